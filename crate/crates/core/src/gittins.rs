//! Gittins indices for Beta-Bernoulli arms by the calibration method.
//!
//! For each retirement reward `lambda` on a grid over `[0, 1]` we solve the
//! one-armed retirement problem by backward induction over the triangular
//! state space,
//!
//! ```text
//! V(a, b) = max( lambda / (1 - gamma),  p (1 + gamma V(a+1, b)) + (1 - p) gamma V(a, b+1) )
//! ```
//!
//! with `p = a / (a + b)` and `V = lambda / (1 - gamma)` on the diagonal
//! `a + b - 2 = horizon`. The index of a state is the largest grid `lambda`
//! at which continuing is weakly preferred to retiring.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::bandit::{success_probability, ArmPosterior};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::index::IndexFunction;
use crate::triangle::Triangle;

const HEADER: &str = "#gittins-table v1";

/// Default ceiling on `grid points x DP states` for one table.
pub const DEFAULT_STATE_BUDGET: u64 = 4_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GittinsParams {
    pub gamma: f64,
    pub horizon: u32,
    pub lambda_step: f64,
    pub max_pulls: u32,
}

impl Default for GittinsParams {
    fn default() -> Self {
        GittinsParams {
            gamma: 0.99,
            horizon: 1000,
            lambda_step: 0.001,
            max_pulls: 200,
        }
    }
}

impl GittinsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Argument(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if !(self.lambda_step > 0.0 && self.lambda_step < 0.5) {
            return Err(Error::Argument(format!(
                "lambda step {} outside (0, 0.5)",
                self.lambda_step
            )));
        }
        if self.horizon < self.max_pulls {
            return Err(Error::Argument(format!(
                "horizon {} is shorter than max_pulls {}",
                self.horizon, self.max_pulls
            )));
        }
        Ok(())
    }

    /// Index of the last grid point, `lambda_K <= 1`.
    pub fn grid_last(&self) -> u32 {
        (1.0 / self.lambda_step + 1e-9).floor() as u32
    }

    #[inline]
    pub fn lambda(&self, k: u32) -> f64 {
        k as f64 * self.lambda_step
    }

    /// DP state updates needed by the grid sweep.
    pub fn work(&self) -> u64 {
        let h = self.horizon as u64;
        (self.grid_last() as u64 + 1) * (h + 1) * (h + 2) / 2
    }

    fn table_extent(&self) -> usize {
        self.max_pulls as usize + 1
    }
}

/// Gittins indices for every state with at most `max_pulls` pulls.
#[derive(Debug, Clone, PartialEq)]
pub struct GittinsTable {
    pub params: GittinsParams,
    values: Triangle<f64>,
}

impl GittinsTable {
    pub fn values(&self) -> &Triangle<f64> {
        &self.values
    }

    pub fn max_pulls(&self) -> u32 {
        self.params.max_pulls
    }

    /// Index lookup; states beyond `max_pulls` are a range error.
    pub fn index(&self, arm: ArmPosterior) -> Result<f64> {
        self.values.get(arm).copied().ok_or_else(|| {
            Error::Range(format!(
                "state {arm} has {} pulls, Gittins table covers {}",
                arm.pulls(),
                self.params.max_pulls
            ))
        })
    }

    pub fn bonus(&self, arm: ArmPosterior) -> Result<f64> {
        Ok(self.index(arm)? - success_probability(arm))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let p = &self.params;
        let mut out = String::with_capacity(self.values.len() * 16 + 128);
        writeln!(out, "{HEADER}").unwrap();
        writeln!(
            out,
            "gamma={},horizon={},step={},max_pulls={}",
            p.gamma, p.horizon, p.lambda_step, p.max_pulls
        )
        .unwrap();
        for (s, v) in self.values.iter() {
            writeln!(out, "{},{},{}", s.alpha, s.beta, v).unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_table(&text, path)
    }

    /// Loads a table and checks that its header matches `expected`.
    pub fn load_expecting(path: impl AsRef<Path>, expected: &GittinsParams) -> Result<Self> {
        let path = path.as_ref();
        let table = GittinsTable::load(path)?;
        let found = &table.params;
        let mismatch = |field: &str, found: String, expected: String| Error::Mismatch {
            path: path.to_path_buf(),
            field: field.into(),
            found,
            expected,
        };
        if found.gamma != expected.gamma {
            return Err(mismatch("gamma", found.gamma.to_string(), expected.gamma.to_string()));
        }
        if found.horizon != expected.horizon {
            return Err(mismatch("horizon", found.horizon.to_string(), expected.horizon.to_string()));
        }
        if found.lambda_step != expected.lambda_step {
            return Err(mismatch(
                "step",
                found.lambda_step.to_string(),
                expected.lambda_step.to_string(),
            ));
        }
        if found.max_pulls < expected.max_pulls {
            return Err(mismatch(
                "max_pulls",
                found.max_pulls.to_string(),
                format!(">= {}", expected.max_pulls),
            ));
        }
        Ok(table)
    }
}

fn parse_table(text: &str, path: &Path) -> Result<GittinsTable> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((n, other)) => {
            return Err(Error::parse(path, n, format!("expected `{HEADER}`, found `{other}`")))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let (n, meta) = lines.next().ok_or_else(|| Error::parse(path, 2, "missing parameter line"))?;
    let mut gamma = None;
    let mut horizon = None;
    let mut step = None;
    let mut max_pulls = None;
    for field in meta.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(path, n, format!("malformed field `{field}`")))?;
        let bad = |_| Error::parse(path, n, format!("bad value for `{key}`: `{value}`"));
        match key.trim() {
            "gamma" => gamma = Some(value.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "horizon" => horizon = Some(value.trim().parse::<u32>().map_err(|e| bad(e.to_string()))?),
            "step" => step = Some(value.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "max_pulls" => max_pulls = Some(value.trim().parse::<u32>().map_err(|e| bad(e.to_string()))?),
            other => return Err(Error::parse(path, n, format!("unknown field `{other}`"))),
        }
    }
    let missing = |f: &str| Error::parse(path, n, format!("missing field `{f}`"));
    let params = GittinsParams {
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        horizon: horizon.ok_or_else(|| missing("horizon"))?,
        lambda_step: step.ok_or_else(|| missing("step"))?,
        max_pulls: max_pulls.ok_or_else(|| missing("max_pulls"))?,
    };
    params
        .validate()
        .map_err(|e| Error::parse(path, n, e.to_string()))?;

    let extent = params.table_extent();
    let expected_rows = extent * (extent + 1) / 2;
    let mut data = Vec::with_capacity(expected_rows);
    let template = Triangle::filled(extent, ());
    let mut order = template.iter().map(|(s, _)| s);
    let mut last_line = n;
    for (n, line) in lines {
        last_line = n;
        if line.trim().is_empty() {
            continue;
        }
        let expected = order
            .next()
            .ok_or_else(|| Error::parse(path, n, format!("more than {expected_rows} rows")))?;
        let row = parse_row(line).ok_or_else(|| Error::parse(path, n, format!("malformed row `{line}`")))?;
        if (row.0, row.1) != (expected.alpha, expected.beta) {
            return Err(Error::parse(
                path,
                n,
                format!("expected state {expected}, found ({}, {})", row.0, row.1),
            ));
        }
        data.push(row.2);
    }
    if data.len() != expected_rows {
        return Err(Error::parse(
            path,
            last_line + 1,
            format!("truncated table: {} of {expected_rows} rows", data.len()),
        ));
    }
    Ok(GittinsTable {
        params,
        values: Triangle::from_vec(extent, data),
    })
}

fn parse_row(line: &str) -> Option<(u32, u32, f64)> {
    let mut it = line.split(',');
    let a = it.next()?.trim().parse().ok()?;
    let b = it.next()?.trim().parse().ok()?;
    let v = it.next()?.trim().parse().ok()?;
    it.next().is_none().then_some((a, b, v))
}

/// Solves the retirement problem at one grid reward and returns, for every
/// table state, whether continuing is weakly preferred.
fn continuation_flags(params: &GittinsParams, lambda: f64) -> Vec<bool> {
    let gamma = params.gamma;
    let horizon = params.horizon as usize;
    let max_pulls = params.max_pulls as usize;
    let retire = lambda / (1.0 - gamma);
    let extent = params.table_extent();
    let mut flags = vec![false; extent * (extent + 1) / 2];
    let mut next = vec![retire; horizon + 2];
    let mut cur = vec![0.0; horizon + 2];
    for d in (0..=horizon).rev() {
        let total = (d + 2) as f64;
        let base = d * (d + 1) / 2;
        for i in 0..=d {
            let p = (i + 1) as f64 / total;
            let cont = p * (1.0 + gamma * next[i + 1]) + (1.0 - p) * gamma * next[i];
            if d <= max_pulls {
                flags[base + i] = cont >= retire;
            }
            cur[i] = if d == horizon { retire } else { cont.max(retire) };
        }
        std::mem::swap(&mut next, &mut cur);
    }
    flags
}

/// Grid sweep with the default state budget and execution mode.
pub fn compute_gittins_table(gamma: f64, horizon: u32, lambda_step: f64, max_pulls: u32) -> Result<GittinsTable> {
    compute_gittins_table_with(
        &GittinsParams {
            gamma,
            horizon,
            lambda_step,
            max_pulls,
        },
        DEFAULT_STATE_BUDGET,
        Execution::default(),
    )
}

/// Grid sweep: independent DPs per grid reward, reduced per state to the
/// largest grid index at which continuation is preferred.
pub fn compute_gittins_table_with(params: &GittinsParams, state_budget: u64, exec: Execution) -> Result<GittinsTable> {
    params.validate()?;
    let needed = params.work();
    if needed > state_budget {
        return Err(Error::Budget {
            needed,
            budget: state_budget,
        });
    }
    const CHUNK: u32 = 8;
    let last = params.grid_last();
    let n_chunks = (last / CHUNK + 1) as usize;
    let extent = params.table_extent();
    let n_states = extent * (extent + 1) / 2;
    let partial: Vec<Vec<u32>> = map_indexed(n_chunks, exec, |c| {
        let mut best = vec![0u32; n_states];
        let first = c as u32 * CHUNK;
        for k in first..(first + CHUNK).min(last + 1) {
            let flags = continuation_flags(params, params.lambda(k));
            for (b, f) in best.iter_mut().zip(flags) {
                if f {
                    *b = (*b).max(k);
                }
            }
        }
        best
    });
    let mut best = vec![0u32; n_states];
    for chunk in partial {
        for (b, k) in best.iter_mut().zip(chunk) {
            *b = (*b).max(k);
        }
    }
    let data = best.into_iter().map(|k| params.lambda(k)).collect();
    Ok(GittinsTable {
        params: *params,
        values: Triangle::from_vec(extent, data),
    })
}

/// Whether continuing is weakly preferred at `arm` for grid reward `k`,
/// solving only the sub-triangle reachable from `arm`.
fn continues_from(params: &GittinsParams, arm: ArmPosterior, k: u32) -> bool {
    let gamma = params.gamma;
    let retire = params.lambda(k) / (1.0 - gamma);
    let root = arm.pulls() as usize;
    let horizon = params.horizon as usize;
    let depth = horizon - root;
    let (a0, b0) = (arm.alpha as usize, arm.beta as usize);
    let mut next = vec![retire; depth + 2];
    let mut cur = vec![0.0; depth + 2];
    let mut root_cont = false;
    for j in (0..=depth).rev() {
        let total = (a0 + b0 + j) as f64;
        for i in 0..=j {
            let p = (a0 + i) as f64 / total;
            let cont = p * (1.0 + gamma * next[i + 1]) + (1.0 - p) * gamma * next[i];
            if j == 0 {
                root_cont = cont >= retire;
            }
            cur[i] = if root + j == horizon { retire } else { cont.max(retire) };
        }
        std::mem::swap(&mut next, &mut cur);
    }
    root_cont
}

/// Independent route to a single index: bisection over the grid for the
/// largest reward at which `arm` still prefers to continue.
pub fn gittins_index_bisection(params: &GittinsParams, arm: ArmPosterior) -> Result<f64> {
    params.validate()?;
    if arm.pulls() > params.horizon {
        return Err(Error::Range(format!("state {arm} lies beyond the horizon")));
    }
    let (mut lo, mut hi) = (0u32, params.grid_last() + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if continues_from(params, arm, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(params.lambda(lo))
}

/// Full table by per-state bisection.
pub fn compute_gittins_table_bisection(params: &GittinsParams, exec: Execution) -> Result<GittinsTable> {
    params.validate()?;
    let extent = params.table_extent();
    let template = Triangle::filled(extent, ());
    let states: Vec<ArmPosterior> = template.iter().map(|(s, _)| s).collect();
    let data = map_indexed(states.len(), exec, |i| gittins_index_bisection(params, states[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(GittinsTable {
        params: *params,
        values: Triangle::from_vec(extent, data),
    })
}

/// [`IndexFunction`] adapter. The index is time-independent.
#[derive(Debug, Clone)]
pub struct GittinsIndex {
    pub table: Arc<GittinsTable>,
}

impl GittinsIndex {
    pub fn new(table: Arc<GittinsTable>) -> Self {
        GittinsIndex { table }
    }
}

impl IndexFunction for GittinsIndex {
    fn name(&self) -> String {
        "gittins".into()
    }

    fn bonus(&self, arm: ArmPosterior, _t: u32) -> Result<f64> {
        self.table.bonus(arm)
    }

    fn index(&self, arm: ArmPosterior, _t: u32) -> Result<f64> {
        self.table.index(arm)
    }
}

/// See [`GittinsTable::index`].
pub fn gittins_index(table: &GittinsTable, arm: ArmPosterior) -> Result<f64> {
    table.index(arm)
}
