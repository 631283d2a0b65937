//! Regret curves as `t,mean_cum_regret,ci_low,ci_high,n` CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::regret::RegretCurve;

const HEADER: &str = "t,mean_cum_regret,ci_low,ci_high,n";

pub fn export_regret_csv(curve: &RegretCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(64 * curve.horizon() + HEADER.len());
    out.push_str(HEADER);
    out.push('\n');
    for t in 1..=curve.horizon() {
        let (lo, hi) = curve.ci_at(t);
        // `{:?}` prints the shortest representation that round-trips.
        let _ = writeln!(out, "{t},{:?},{lo:?},{hi:?},{}", curve.at(t), curve.n_instances);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Inverse of [`export_regret_csv`]. The config is not stored in the file.
pub fn load_regret_csv(path: impl AsRef<Path>) -> Result<RegretCurve> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header `{HEADER}`"))),
    }
    let mut mean = Vec::new();
    let mut ci_low = Vec::new();
    let mut ci_high = Vec::new();
    let mut n_instances = None;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(path, line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |j: usize| -> Result<f64> {
            fields[j]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad number `{}`", fields[j])))
        };
        let t: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, "bad step index"))?;
        if t != mean.len() + 1 {
            return Err(Error::parse(path, line_no, format!("expected t={}, found {t}", mean.len() + 1)));
        }
        let n: usize = fields[4]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, "bad instance count"))?;
        if *n_instances.get_or_insert(n) != n {
            return Err(Error::parse(path, line_no, "instance count changes between rows"));
        }
        mean.push(num(1)?);
        ci_low.push(num(2)?);
        ci_high.push(num(3)?);
    }
    let n_instances = n_instances.ok_or_else(|| Error::parse(path, 1, "no data rows"))?;
    Ok(RegretCurve {
        label: String::new(),
        mean,
        ci_low,
        ci_high,
        n_instances,
        fallbacks: 0,
        config: None,
    })
}
