//! Linearly separable value functions built from an exploration bonus.
//!
//! For a bonus `b` the per-arm table satisfies, at every interior state,
//!
//! ```text
//! p * v(a+1, b) + q * v(a, b+1) - v(a, b) = bonus(a, b)
//! ```
//!
//! with `p = a / (a + b)`, `q = 1 - p` and zeros on the outermost diagonal.
//! One-step lookahead on the sum of these tables reproduces the choices of
//! the index policy the bonus came from.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::bandit::{success_probability, ArmPosterior, BanditState};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::gittins::GittinsTable;
use crate::index::{IndexFunction, Ucb, UcbParams, ZeroBonus};
use crate::triangle::Triangle;

const HEADER: &str = "#elsv-table v1";

/// Where the exploration bonus comes from.
#[derive(Clone)]
pub enum BonusSource {
    Zero,
    Ucb(UcbParams),
    Gittins(Arc<GittinsTable>),
    Index(Arc<dyn IndexFunction>),
}

impl std::fmt::Debug for BonusSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl IndexFunction for BonusSource {
    fn name(&self) -> String {
        match self {
            BonusSource::Zero => ZeroBonus.name(),
            BonusSource::Ucb(p) => Ucb { params: *p }.name(),
            BonusSource::Gittins(_) => "gittins".into(),
            BonusSource::Index(i) => i.name(),
        }
    }

    fn bonus(&self, arm: ArmPosterior, t: u32) -> Result<f64> {
        match self {
            BonusSource::Zero => Ok(0.0),
            BonusSource::Ucb(p) => Ok(Ucb { params: *p }.bonus_value(arm.pulls(), t)),
            BonusSource::Gittins(table) => table.bonus(arm),
            BonusSource::Index(i) => i.bonus(arm, t),
        }
    }

    fn index(&self, arm: ArmPosterior, t: u32) -> Result<f64> {
        match self {
            BonusSource::Gittins(table) => table.index(arm),
            BonusSource::Index(i) => i.index(arm, t),
            _ => Ok(success_probability(arm) + self.bonus(arm, t)?),
        }
    }
}

/// Per-arm value table over the states with at most `t - 1` pulls.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    /// Number of diagonals; the table covers `alpha + beta - 2 <= t - 1`.
    pub t: u32,
    /// Time argument the bonus was evaluated at.
    pub bonus_time: u32,
    pub bonus_name: String,
    values: Triangle<f64>,
    updates: u64,
}

impl ValueTable {
    pub fn zeros(t: u32, bonus_name: impl Into<String>) -> Self {
        ValueTable {
            t,
            bonus_time: t,
            bonus_name: bonus_name.into(),
            values: Triangle::filled(t as usize, 0.0),
            updates: 0,
        }
    }

    pub fn values(&self) -> &Triangle<f64> {
        &self.values
    }

    /// Number of recurrence applications performed while building the table.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn contains(&self, arm: ArmPosterior) -> bool {
        self.values.contains(arm)
    }

    #[inline]
    pub fn value(&self, arm: ArmPosterior) -> Result<f64> {
        self.values.get(arm).copied().ok_or_else(|| {
            Error::Range(format!(
                "state {arm} has {} pulls, value table t={} covers {}",
                arm.pulls(),
                self.t,
                self.t.saturating_sub(1)
            ))
        })
    }

    /// `E[v(S')] - v(s)` at an interior state.
    pub fn expected_gain(&self, arm: ArmPosterior) -> Result<f64> {
        let p = success_probability(arm);
        let q = arm.beta as f64 / (arm.alpha + arm.beta) as f64;
        Ok(p * self.value(arm.success())? + q * self.value(arm.failure())? - self.value(arm)?)
    }

    /// Adds `constant` to every entry.
    pub fn shifted(&self, constant: f64) -> Self {
        ValueTable {
            values: self.values.map(|_, v| v + constant),
            ..self.clone()
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::with_capacity(self.values.len() * 24 + 64);
        writeln!(out, "{HEADER}").unwrap();
        writeln!(
            out,
            "t={},bonus_name={},bonus_time={}",
            self.t, self.bonus_name, self.bonus_time
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
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, HEADER)) => {}
            Some((n, other)) => {
                return Err(Error::parse(path, n, format!("expected `{HEADER}`, found `{other}`")))
            }
            None => return Err(Error::parse(path, 1, "empty file")),
        }
        let (n, meta) = lines.next().ok_or_else(|| Error::parse(path, 2, "missing parameter line"))?;
        let (mut t, mut name, mut bonus_time) = (None, None, None);
        for field in meta.split(',') {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n, format!("malformed field `{field}`")))?;
            let num = || v.parse::<u32>().map_err(|_| Error::parse(path, n, format!("bad `{k}`: `{v}`")));
            match k {
                "t" => t = Some(num()?),
                "bonus_time" => bonus_time = Some(num()?),
                "bonus_name" => name = Some(v.to_string()),
                other => return Err(Error::parse(path, n, format!("unknown field `{other}`"))),
            }
        }
        let t = t.ok_or_else(|| Error::parse(path, n, "missing field `t`"))?;
        let bonus_name = name.ok_or_else(|| Error::parse(path, n, "missing field `bonus_name`"))?;
        let mut table = ValueTable::zeros(t, bonus_name);
        table.bonus_time = bonus_time.unwrap_or(t);
        let expected: Vec<ArmPosterior> = table.values.iter().map(|(s, _)| s).collect();
        let mut data = Vec::with_capacity(expected.len());
        let mut last = n;
        for (n, line) in lines {
            last = n;
            if line.trim().is_empty() {
                continue;
            }
            let want = expected
                .get(data.len())
                .ok_or_else(|| Error::parse(path, n, "too many rows"))?;
            let cols: Vec<&str> = line.split(',').collect();
            let parsed = (cols.len() == 3)
                .then(|| Some((cols[0].parse::<u32>().ok()?, cols[1].parse::<u32>().ok()?, cols[2].parse::<f64>().ok()?)))
                .flatten()
                .ok_or_else(|| Error::parse(path, n, format!("malformed row `{line}`")))?;
            if (parsed.0, parsed.1) != (want.alpha, want.beta) {
                return Err(Error::parse(path, n, format!("expected state {want}")));
            }
            data.push(parsed.2);
        }
        if data.len() != expected.len() {
            return Err(Error::parse(
                path,
                last + 1,
                format!("truncated table: {} of {} rows", data.len(), expected.len()),
            ));
        }
        table.values = Triangle::from_vec(t as usize, data);
        Ok(table)
    }
}

impl AsRef<ValueTable> for ValueTable {
    fn as_ref(&self) -> &ValueTable {
        self
    }
}

/// Backward sweep over the triangle with `t` diagonals, the bonus evaluated
/// through `bonus` (already bound to its time argument).
pub fn compute_value_table_with(
    t: u32,
    bonus_time: u32,
    bonus_name: &str,
    bonus: impl Fn(ArmPosterior) -> Result<f64>,
) -> Result<ValueTable> {
    if t == 0 {
        return Err(Error::Argument("value tables need t >= 1".into()));
    }
    let mut table = ValueTable::zeros(t, bonus_name);
    table.bonus_time = bonus_time;
    let mut updates = 0u64;
    for d in (0..t.saturating_sub(1)).rev() {
        let (inner, outer) = table.values.diagonal_pair_mut(d as usize);
        let total = (d + 2) as f64;
        for (i, slot) in inner.iter_mut().enumerate() {
            let arm = ArmPosterior::on_diagonal(d, i as u32);
            let b = bonus(arm)?;
            if !b.is_finite() {
                return Err(Error::Computation(format!(
                    "bonus `{bonus_name}` is {b} at state {arm} (t = {bonus_time})"
                )));
            }
            let p = arm.alpha as f64 / total;
            let q = arm.beta as f64 / total;
            *slot = p * outer[i + 1] + q * outer[i] - b;
            updates += 1;
        }
    }
    table.updates = updates;
    Ok(table)
}

/// Value table with the bonus evaluated at time `t` on `t` diagonals.
pub fn compute_value_table(t: u32, bonus: &dyn IndexFunction) -> Result<ValueTable> {
    compute_value_table_with(t, t, &bonus.name(), |arm| bonus.bonus(arm, t))
}

/// The table consumed as `v_{t+1}` at decision time `t`: `t + 1 + offset`
/// diagonals, bonus evaluated at time `t` and scaled by the arm's reward.
pub fn decision_table(t: u32, bonus: &dyn IndexFunction, reward: f64, offset: u32) -> Result<ValueTable> {
    compute_value_table_with(t + 1 + offset, t, &bonus.name(), |arm| Ok(reward * bonus.bonus(arm, t)?))
}

/// `sum_i tables[i](state.arms[i])`.
pub fn separable_value<T: AsRef<ValueTable>>(tables: &[T], state: &BanditState) -> Result<f64> {
    if tables.len() != state.arms.len() {
        return Err(Error::Argument(format!(
            "{} tables for {} arms",
            tables.len(),
            state.arms.len()
        )));
    }
    let mut total = 0.0;
    for (table, &arm) in tables.iter().zip(&state.arms) {
        total += table.as_ref().value(arm)?;
    }
    Ok(total)
}

/// Offsets the table by a constant slope per pull,
/// `v'(s) = v(s) + g * (t - 1 - pulls(s))`, with `g` the smallest
/// non-negative slope such that `v'(s) >= r * p(s) + E[v'(S')]` at every
/// interior state. The shift adds the same constant to the separable value
/// of every joint state at a fixed time, so lookahead choices are unchanged.
pub fn normalize_for_plot(table: &ValueTable, reward: f64) -> ValueTable {
    let mut slope = 0.0f64;
    for (arm, _) in table.values.iter() {
        if arm.pulls() + 1 < table.t {
            let gain = table.expected_gain(arm).expect("interior successors are in the table");
            slope = slope.max(reward * success_probability(arm) + gain);
        }
    }
    let outer = table.t.saturating_sub(1);
    ValueTable {
        values: table
            .values
            .map(|arm, v| v + slope * (outer - arm.pulls()) as f64),
        updates: 0,
        ..table.clone()
    }
}

/// Writes `mean,pulls,value` rows for contour plotting.
pub fn export_contour_csv(table: &ValueTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("mean,pulls,value\n");
    for (arm, v) in table.values.iter() {
        writeln!(out, "{},{},{}", success_probability(arm), arm.pulls(), v).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Separable value function for a bandit with per-arm rewards, with the
/// frontier table for every time `2..=max_time` precomputed. Arms with equal
/// rewards share one table.
#[derive(Debug, Clone)]
pub struct SeparableValue {
    bonus: BonusSource,
    rewards: Vec<f64>,
    slot_of_arm: Vec<usize>,
    offset: u32,
    // tables[tau - 2][slot]
    tables: Vec<Vec<Arc<ValueTable>>>,
}

impl SeparableValue {
    pub fn build(bonus: BonusSource, rewards: &[f64], offset: u32, max_time: u32, exec: Execution) -> Result<Self> {
        let mut distinct: Vec<f64> = Vec::new();
        let slot_of_arm = rewards
            .iter()
            .map(|r| {
                distinct.iter().position(|d| d == r).unwrap_or_else(|| {
                    distinct.push(*r);
                    distinct.len() - 1
                })
            })
            .collect();
        let times: Vec<u32> = (2..=max_time.max(2)).collect();
        let jobs = times.len() * distinct.len();
        let built = try_map_indexed(jobs, exec, |j| {
            let tau = times[j / distinct.len()];
            let reward = distinct[j % distinct.len()];
            decision_table(tau - 1, &bonus, reward, offset).map(Arc::new)
        })?;
        let tables = built.chunks(distinct.len()).map(|c| c.to_vec()).collect();
        Ok(SeparableValue {
            bonus,
            rewards: rewards.to_vec(),
            slot_of_arm,
            offset,
            tables,
        })
    }

    pub fn bonus(&self) -> &BonusSource {
        &self.bonus
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn max_time(&self) -> u32 {
        self.tables.len() as u32 + 1
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    fn slots(&self, tau: u32) -> Result<&[Arc<ValueTable>]> {
        if tau < 2 || tau > self.max_time() {
            return Err(Error::Range(format!(
                "no value table for time {tau}; precomputed 2..={}",
                self.max_time()
            )));
        }
        Ok(&self.tables[(tau - 2) as usize])
    }

    /// Per-arm tables `v_tau`.
    pub fn tables_at(&self, tau: u32) -> Result<Vec<Arc<ValueTable>>> {
        let slots = self.slots(tau)?;
        Ok(self.slot_of_arm.iter().map(|&s| Arc::clone(&slots[s])).collect())
    }

    #[inline]
    pub fn arm_table(&self, tau: u32, arm: usize) -> Result<&ValueTable> {
        Ok(&self.slots(tau)?[self.slot_of_arm[arm]])
    }

    /// `v_tau(state)`.
    pub fn value(&self, tau: u32, arms: &[ArmPosterior]) -> Result<f64> {
        let slots = self.slots(tau)?;
        let mut total = 0.0;
        for (i, &arm) in arms.iter().enumerate() {
            total += slots[self.slot_of_arm[i]].value(arm)?;
        }
        Ok(total)
    }
}
