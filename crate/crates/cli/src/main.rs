use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lolaviz::diag::Diagnostic;
use lolaviz::manifest::{ManifestError, SessionManifest};
use lolaviz::protocol::{run_headless, serve, RunOptions, RunReport};
use lolaviz::trace::ReplayMode;
use lolaviz::viz::ScaffoldError;
use lolaviz::CheckedSpec;

const EXIT_DIAGNOSTICS: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_PORT_IN_USE: u8 = 3;

#[derive(Parser)]
#[command(name = "lolaviz", version, about = "Stream runtime monitor with live plot output")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Type and timing check a specification, printing its pacing table.
    Check { spec: PathBuf },
    /// Append generated plot streams to a host specification.
    Scaffold {
        /// Manifest-style file naming the host `spec` and its `[[plots]]`.
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Replay a trace through the monitor.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(short, long)]
    manifest: PathBuf,
    /// Serve the UI protocol; without an address the manifest's `endpoint` is used.
    #[arg(long, num_args = 0..=1)]
    serve: Option<Option<String>>,
    #[arg(long, conflicts_with = "as_fast")]
    speed: Option<f64>,
    #[arg(long)]
    as_fast: bool,
}

struct Failure(u8);

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        eprintln!("error: {e}");
        Failure(EXIT_IO)
    }
}

fn print_diagnostics(diags: &[Diagnostic], source: &str) {
    for d in diags {
        eprintln!("{}", d.render(source));
    }
}

fn pacing_table(checked: &CheckedSpec) -> String {
    let mut rows = vec![("stream".to_string(), "pacing".to_string(), "buffer_len".to_string())];
    let spec = &checked.spec;
    let names = spec.inputs.iter().map(|i| &i.name.name).chain(spec.outputs.iter().map(|o| &o.name.name));
    for name in names {
        let pacing = checked.pacings.of(name).map_or("-".to_string(), |p| p.to_string());
        let len = checked.memory_of(name).map_or(0, |m| m.buffer_len);
        rows.push((name.clone(), pacing, len.to_string()));
    }
    let w0 = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (a, b, c) in &rows {
        out.push_str(&format!("{a:<w0$}  {b:<w1$}  {c}\n"));
    }
    for (i, p) in checked.pacings.triggers.iter().enumerate() {
        out.push_str(&format!("trigger#{i} @ {p}\n"));
    }
    out
}

fn cmd_check(path: &Path) -> Result<(), Failure> {
    let source = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        Failure(EXIT_IO)
    })?;
    match lolaviz::check_source(&source) {
        Ok(checked) => {
            print!("{}", pacing_table(&checked));
            print_diagnostics(&checked.warnings, &source);
            Ok(())
        }
        Err(diags) => {
            print_diagnostics(&diags, &source);
            Err(Failure(EXIT_DIAGNOSTICS))
        }
    }
}

fn report(e: ManifestError) -> Failure {
    match &e {
        ManifestError::Io { .. } => {
            eprintln!("error: {e}");
            Failure(EXIT_IO)
        }
        ManifestError::Trace { source: lolaviz::trace::TraceError::Io(_), .. } => {
            eprintln!("error: {e}");
            Failure(EXIT_IO)
        }
        ManifestError::Spec { text, diagnostics } => {
            print_diagnostics(diagnostics, text);
            Failure(EXIT_DIAGNOSTICS)
        }
        ManifestError::Scaffold(ScaffoldError::Check(diags)) => {
            for d in diags {
                eprintln!("ERROR {d}");
            }
            Failure(EXIT_DIAGNOSTICS)
        }
        _ => {
            eprintln!("error: {e}");
            Failure(EXIT_DIAGNOSTICS)
        }
    }
}

fn cmd_scaffold(config: &Path, out: &Path) -> Result<(), Failure> {
    let manifest = SessionManifest::load(config).map_err(report)?;
    let (text, bindings) = manifest.scaffolded_source().map_err(report)?;
    std::fs::write(out, text)?;
    for b in bindings {
        eprintln!("plot {}: marker `{}` @ {}", b.plot_id, b.marker_stream, b.pacing);
    }
    Ok(())
}

async fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let manifest = SessionManifest::load(&args.manifest).map_err(report)?;
    let prepared = manifest.prepare().map_err(report)?;
    let mode = match (args.as_fast, args.speed) {
        (true, _) => ReplayMode::AsFast,
        (false, Some(s)) if s > 0.0 && s.is_finite() => ReplayMode::Realtime(s),
        (false, Some(_)) => {
            eprintln!("error: --speed must be positive");
            return Err(Failure(EXIT_DIAGNOSTICS));
        }
        (false, None) => manifest.replay_mode(),
    };
    let sink: Box<dyn Write + Send> = match &manifest.sink {
        Some(p) => {
            let p = manifest.resolve(p);
            let f = File::create(&p).map_err(|e| {
                eprintln!("error: {}: {e}", p.display());
                Failure(EXIT_IO)
            })?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    };
    let report: RunReport = match &args.serve {
        None => run_headless(prepared.session, prepared.records, mode, sink).await?,
        Some(addr) => {
            let Some(addr) = addr.clone().or_else(|| manifest.endpoint.clone()) else {
                eprintln!("error: --serve needs an address or a manifest `endpoint`");
                return Err(Failure(EXIT_DIAGNOSTICS));
            };
            let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| {
                eprintln!("error: cannot listen on {addr}: {e}");
                if e.kind() == io::ErrorKind::AddrInUse {
                    Failure(EXIT_PORT_IN_USE)
                } else {
                    Failure(EXIT_IO)
                }
            })?;
            eprintln!("listening on ws://{}{}", listener.local_addr()?, lolaviz::protocol::SESSION_PATH);
            let opts = RunOptions { replay: mode, outbound_limit: manifest.outbound_limit };
            serve(prepared.session, prepared.records, opts, sink, listener).await?
        }
    };
    eprintln!(
        "{} events, {} messages, {} dropped, {} errors",
        report.events, report.messages, report.dropped, report.errors
    );
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { spec } => cmd_check(spec),
        Command::Scaffold { config, out } => cmd_scaffold(config, out),
        Command::Run(args) => cmd_run(args).await,
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code)) => ExitCode::from(code),
    }
}
