//! Regenerates the CSV traces under `examples/traces`.
//!
//!     cargo run -p lolaviz-core --example gen_fixtures

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coordinates are kept on a 1/1024 grid so the CSV text is exact.
fn q(v: f64) -> f64 {
    (v * 1024.0).round() / 1024.0
}

/// 1000 GPS fixes at 64 Hz wandering slowly inside (10, 90)², a charge
/// reading on every 32nd row.
fn dense_gps() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = String::from("time,charge,gps.0,gps.1\n");
    let (mut x, mut y, mut heading) = (50.0f64, 50.0f64, 0.0f64);
    let mut charge = 100.0;
    for i in 0..1000 {
        let t = i as f64 / 64.0;
        heading += rng.gen_range(-0.3..0.3);
        let step = rng.gen_range(0.0625..0.1875);
        let (nx, ny) = (x + step * heading.cos(), y + step * heading.sin());
        if !(10.0..90.0).contains(&nx) || !(10.0..90.0).contains(&ny) {
            heading += std::f64::consts::PI;
        } else {
            (x, y) = (q(nx), q(ny));
        }
        let c = if i % 32 == 0 {
            charge -= 0.25;
            format!("{charge}")
        } else {
            String::new()
        };
        let _ = writeln!(out, "{t},{c},{x},{y}");
    }
    out
}

/// Two corner fixes fix the global limits at (0, 100)², then a walk to a
/// single overheating reading at (50, 50), a cluster of fixes 2.5 units
/// around it, and a walk away.
fn critical_cluster() -> String {
    let mut out = String::from("time,charge,gps.0,gps.1,temp\n");
    let mut t = 0.0;
    let mut row = |out: &mut String, charge: Option<f64>, pos: (f64, f64), temp: Option<f64>| {
        let c = charge.map_or(String::new(), |c| c.to_string());
        let h = temp.map_or(String::new(), |h| h.to_string());
        let _ = writeln!(out, "{t},{c},{},{},{h}", pos.0, pos.1);
        t += 0.0625;
    };
    row(&mut out, Some(80.0), (0.0, 0.0), Some(40.0));
    row(&mut out, None, (100.0, 100.0), None);
    for k in 0..=25 {
        let v = 70.0 - k as f64;
        row(&mut out, None, (v, v), None);
    }
    row(&mut out, Some(80.0), (50.0, 50.0), Some(95.0));
    for k in 0..40 {
        let a = k as f64 * 0.5;
        let r = if k % 2 == 0 { 2.5 } else { -2.5 };
        let pos = (q(50.0 + r * a.cos()), q(50.0 + r * a.sin()));
        row(&mut out, if k % 8 == 0 { Some(80.0) } else { None }, pos, if k % 10 == 0 { Some(60.0) } else { None });
    }
    for k in 1..=30 {
        row(&mut out, None, (50.0 + k as f64, 50.0), None);
    }
    out
}

/// GPS at 8 Hz for five seconds, nothing from 5 s to 8 s while charge keeps
/// falling at 4 Hz, then GPS again until 10 s.
fn gps_dropout() -> String {
    let mut out = String::from("time,charge,gps.0,gps.1\n");
    let mut charge = 100.0;
    for i in 0..=80 {
        let t = i as f64 / 8.0;
        let gps = !(t > 5.0 && t < 8.0);
        let reading = i % 2 == 0;
        if !gps && !reading {
            continue;
        }
        let c = if reading {
            charge -= 1.5;
            charge.to_string()
        } else {
            String::new()
        };
        let (x, y) =
            if gps { ((10.0 + t * 8.0).to_string(), "50".to_string()) } else { (String::new(), String::new()) };
        let _ = writeln!(out, "{t},{c},{x},{y}");
    }
    out
}

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/traces");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("dense_gps.csv"), dense_gps())?;
    std::fs::write(dir.join("critical_cluster.csv"), critical_cluster())?;
    std::fs::write(dir.join("gps_dropout.csv"), gps_dropout())?;
    Ok(())
}
