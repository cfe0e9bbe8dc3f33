use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nsp_core::energy::EnergySample;

pub const TIMESERIES_HEADER: &str = "t,E,D,D_no_qtt,mass,E_basic,identity_residual,min_density";

/// `{:.16e}` keeps 17 significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn timeseries_csv(samples: &[EnergySample]) -> String {
    let mut out = String::with_capacity(200 * (samples.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for s in samples {
        let row = [
            s.t,
            s.e,
            s.d,
            s.d_no_qtt,
            s.mass,
            s.e_basic,
            s.identity_residual,
            s.min_density,
        ];
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write(path: &Path, text: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write(path, &text)
}
