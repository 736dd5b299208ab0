//! Session manifests: which specification, trace and plots make up a run.
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::diag::Diagnostic;
use crate::lang::parse_spec;
use crate::protocol::{Session, SessionPlot};
use crate::trace::{read_trace, ReplayMode, TraceError, TraceRecord};
use crate::viz::{scaffold_spec, PlotBinding, PlotScaffoldConfig, ScaffoldError};
use crate::Monitor;

pub const DEFAULT_OUTBOUND_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    /// Host specification the plot scaffolds are appended to.
    pub spec: PathBuf,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    /// JSONL output; standard output when absent.
    #[serde(default)]
    pub sink: Option<PathBuf>,
    /// Realtime replay at this many trace seconds per second; as fast as
    /// possible when absent.
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_limit")]
    pub outbound_limit: usize,
    #[serde(default)]
    pub plots: Vec<PlotEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_limit() -> usize {
    DEFAULT_OUTBOUND_LIMIT
}

/// One plot: its scaffold configuration, from a file or inline, plus UI
/// presets applied before the first record.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotEntry {
    #[serde(default)]
    pub config: Option<PathBuf>,
    #[serde(default)]
    pub scaffold: Option<PlotScaffoldConfig>,
    #[serde(default)]
    pub visible: Option<bool>,
    #[serde(default)]
    pub pixel_scale: Option<(f64, f64)>,
    #[serde(default)]
    pub color_range: Option<(f64, f64)>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Toml { path: PathBuf, source: Box<toml::de::Error> },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Scaffold(#[from] ScaffoldError),
    #[error("specification has errors")]
    Spec { text: String, diagnostics: Vec<Diagnostic> },
    #[error("{}: {source}", path.display())]
    Trace { path: PathBuf, source: TraceError },
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, ManifestError> {
    toml::from_str(text).map_err(|e| ManifestError::Toml { path: path.to_path_buf(), source: Box::new(e) })
}

/// Everything a run needs, ready to go.
pub struct Prepared {
    pub source: String,
    pub bindings: Vec<PlotBinding>,
    pub session: Session,
    pub records: Vec<TraceRecord>,
}

impl SessionManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut m: SessionManifest = parse_toml(&read(path)?, path)?;
        m.base_dir = base;
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn replay_mode(&self) -> ReplayMode {
        self.speed.map_or(ReplayMode::AsFast, ReplayMode::Realtime)
    }

    pub fn plot_configs(&self) -> Result<Vec<PlotScaffoldConfig>, ManifestError> {
        let mut out = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, p) in self.plots.iter().enumerate() {
            let cfg = match (&p.config, &p.scaffold) {
                (Some(path), None) => {
                    let path = self.resolve(path);
                    parse_toml::<PlotScaffoldConfig>(&read(&path)?, &path)?
                }
                (None, Some(c)) => c.clone(),
                _ => {
                    return Err(ManifestError::Invalid(format!(
                        "plot entry {} needs exactly one of `config` and `scaffold`",
                        i + 1
                    )))
                }
            };
            if !ids.insert(cfg.plot_id.clone()) {
                return Err(ManifestError::Invalid(format!("duplicate plot id `{}`", cfg.plot_id)));
            }
            if let Some((w, h)) = p.pixel_scale {
                if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
                    return Err(ManifestError::Invalid(format!(
                        "plot `{}`: pixel_scale must be positive",
                        cfg.plot_id
                    )));
                }
            }
            if let Some((lo, hi)) = p.color_range {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(ManifestError::Invalid(format!("plot `{}`: color_range must be ordered", cfg.plot_id)));
                }
            }
            out.push(cfg);
        }
        Ok(out)
    }

    /// Host specification with every plot scaffold appended.
    pub fn scaffolded_source(&self) -> Result<(String, Vec<PlotBinding>), ManifestError> {
        let host = read(&self.resolve(&self.spec))?;
        let configs = self.plot_configs()?;
        Ok(scaffold_spec(&host, &configs)?)
    }

    pub fn prepare(&self) -> Result<Prepared, ManifestError> {
        if let Some(s) = self.speed {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ManifestError::Invalid("speed must be positive".into()));
            }
        }
        let trace = self.trace.as_ref().ok_or_else(|| ManifestError::Invalid("manifest has no `trace`".into()))?;
        let (source, bindings) = self.scaffolded_source()?;
        let monitor = match Monitor::from_source(&source) {
            Ok(m) => m,
            Err(diagnostics) => return Err(ManifestError::Spec { text: source, diagnostics }),
        };
        let spec = parse_spec(&source).expect("checked source parses");
        let trace = self.resolve(trace);
        let records = read_trace(&trace, &spec).map_err(|source| ManifestError::Trace { path: trace, source })?;
        let plots = bindings
            .iter()
            .zip(&self.plots)
            .map(|(b, p)| SessionPlot { binding: b.clone(), color_range: p.color_range })
            .collect();
        let mut session = Session::new(monitor, &source, plots);
        for (b, p) in bindings.iter().zip(&self.plots) {
            if p.visible.is_some() || p.pixel_scale.is_some() {
                session
                    .preset(&b.plot_id, p.visible, p.pixel_scale)
                    .map_err(|e| ManifestError::Invalid(e.to_string()))?;
            }
        }
        Ok(Prepared { source, bindings, session, records })
    }
}
