//! Flat `key=value` experiment configuration.
//!
//! One entry per line, `#` starts a comment, vectors are comma-separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::argmax::TieBreak;
use crate::bandit::PriorSpec;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gittins::GittinsParams;

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    source: String,
    entries: BTreeMap<String, (usize, String)>,
}

/// A raw value with enough context to report errors.
#[derive(Debug, Clone, Copy)]
pub struct Value<'a> {
    key: &'a str,
    raw: &'a str,
    line: usize,
    source: &'a str,
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{source}:{line_no}: expected key=value, found `{line}`"))
            })?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), (line_no, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("{source}:{line_no}: duplicate key `{k}`")));
            }
        }
        Ok(KeyValues {
            source: source.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KeyValues::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<Value<'_>> {
        self.entries.get_key_value(key).map(|(k, (line, raw))| Value {
            key: k,
            raw,
            line: *line,
            source: &self.source,
        })
    }

    pub fn require(&self, key: &str) -> Result<Value<'_>> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("{}: missing required key `{key}`", self.source)))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (0, value.into()));
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }
}

impl Value<'_> {
    pub fn as_str(&self) -> &str {
        self.raw
    }

    fn err(&self, what: impl fmt::Display) -> Error {
        Error::Config(format!("{}:{}: `{}`: {what}", self.source, self.line, self.key))
    }

    pub fn parse<T: FromStr>(&self) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.raw
            .parse()
            .map_err(|e: T::Err| self.err(format!("cannot parse `{}`: {e}", self.raw)))
    }

    fn list<T: FromStr>(&self) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e: T::Err| self.err(format!("bad element `{s}`: {e}")))
            })
            .collect()
    }

    pub fn parse_f64_list(&self) -> Result<Vec<f64>> {
        self.list()
    }

    pub fn parse_u32_list(&self) -> Result<Vec<u32>> {
        self.list()
    }
}

/// Source of the exploration bonus for value-table policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BonusSpec {
    Zero,
    Ucb(f64),
    Gittins,
}

impl fmt::Display for BonusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BonusSpec::Zero => f.write_str("zero"),
            BonusSpec::Ucb(a) => write!(f, "ucb:{a}"),
            BonusSpec::Gittins => f.write_str("gittins"),
        }
    }
}

impl BonusSpec {
    /// `zero`, `gittins`, `ucb` (alpha = `default_alpha`) or `ucb:<alpha>`.
    pub fn parse_with(s: &str, default_alpha: f64) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(BonusSpec::Zero),
            "gittins" => Ok(BonusSpec::Gittins),
            "ucb" => Ok(BonusSpec::Ucb(default_alpha)),
            other => match other.strip_prefix("ucb:") {
                Some(a) => a
                    .parse()
                    .map(BonusSpec::Ucb)
                    .map_err(|_| Error::Config(format!("bad ucb alpha in `{other}`"))),
                None => Err(Error::Config(format!("unknown bonus `{other}` (zero|ucb|gittins)"))),
            },
        }
    }
}

/// Which policy an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Ucb { ucb_alpha: f64 },
    BayesUcb { c: f64 },
    Thompson,
    ThompsonConstrained,
    Gittins,
    Elsv { bonus: BonusSpec, depth: u32 },
    ElsvConstrained { bonus: BonusSpec, sample_count: usize },
    /// Knows the hidden means; a reference, not a bandit algorithm.
    Oracle,
}

impl PolicySpec {
    pub fn requires_constrained_prior(&self) -> bool {
        matches!(self, PolicySpec::ThompsonConstrained | PolicySpec::ElsvConstrained { .. })
    }

    pub fn uses_gittins(&self) -> bool {
        matches!(
            self,
            PolicySpec::Gittins
                | PolicySpec::Elsv { bonus: BonusSpec::Gittins, .. }
                | PolicySpec::ElsvConstrained { bonus: BonusSpec::Gittins, .. }
        )
    }

    /// Lookahead depth (1 for non-lookahead policies).
    pub fn depth(&self) -> u32 {
        match self {
            PolicySpec::Elsv { depth, .. } => *depth,
            _ => 1,
        }
    }

    pub fn parse_with(s: &str, default_ucb_alpha: f64) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((n, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in `{s}`")))?;
                (n.trim(), inner.split(',').map(str::trim).collect::<Vec<_>>())
            }
            None => (s, Vec::new()),
        };
        let bad = || Error::Config(format!("cannot parse policy `{s}`"));
        let num = |i: usize| args.get(i).ok_or_else(bad);
        Ok(match (name, args.len()) {
            ("ucb", 0) => PolicySpec::Ucb {
                ucb_alpha: default_ucb_alpha,
            },
            ("ucb", 1) => PolicySpec::Ucb {
                ucb_alpha: num(0)?.parse().map_err(|_| bad())?,
            },
            ("bayes_ucb", 0) => PolicySpec::BayesUcb { c: 0.0 },
            ("bayes_ucb", 1) => PolicySpec::BayesUcb {
                c: num(0)?.parse().map_err(|_| bad())?,
            },
            ("thompson", 0) => PolicySpec::Thompson,
            ("thompson_constrained", 0) => PolicySpec::ThompsonConstrained,
            ("gittins", 0) => PolicySpec::Gittins,
            ("oracle", 0) => PolicySpec::Oracle,
            ("elsv", 1 | 2) => PolicySpec::Elsv {
                bonus: BonusSpec::parse_with(num(0)?, default_ucb_alpha)?,
                depth: match args.get(1) {
                    Some(d) => d.parse().map_err(|_| bad())?,
                    None => 1,
                },
            },
            ("elsv_constrained", 1 | 2) => PolicySpec::ElsvConstrained {
                bonus: BonusSpec::parse_with(num(0)?, default_ucb_alpha)?,
                sample_count: match args.get(1) {
                    Some(d) => d.parse().map_err(|_| bad())?,
                    None => 10_000,
                },
            },
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Ucb { ucb_alpha } => write!(f, "ucb({ucb_alpha})"),
            PolicySpec::BayesUcb { c } => write!(f, "bayes_ucb({c})"),
            PolicySpec::Thompson => f.write_str("thompson"),
            PolicySpec::ThompsonConstrained => f.write_str("thompson_constrained"),
            PolicySpec::Gittins => f.write_str("gittins"),
            PolicySpec::Elsv { bonus, depth } => write!(f, "elsv({bonus},{depth})"),
            PolicySpec::ElsvConstrained { bonus, sample_count } => {
                write!(f, "elsv_constrained({bonus},{sample_count})")
            }
            PolicySpec::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicySpec::parse_with(s, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub policy: PolicySpec,
    pub horizon: u32,
    pub n_instances: usize,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub gittins: GittinsParams,
    /// Precomputed Gittins table to load instead of computing one.
    pub gittins_table: Option<PathBuf>,
    pub min_accepted: usize,
    pub tie_break: TieBreak,
    pub execution: Execution,
    /// Worker threads for the parallel mode; 0 uses the global pool.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(prior: PriorSpec, policy: PolicySpec, horizon: u32, n_instances: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            prior,
            policy,
            horizon,
            n_instances,
            master_seed,
            output_path: None,
            gittins: GittinsParams::default(),
            gittins_table: None,
            min_accepted: 100,
            tie_break: TieBreak::Lowest,
            execution: Execution::default(),
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.n_instances == 0 {
            return Err(Error::Config("instances must be >= 1".into()));
        }
        if self.policy.requires_constrained_prior() && !self.prior.constrained {
            return Err(Error::Config(format!(
                "policy {} requires a constrained prior",
                self.policy
            )));
        }
        match self.policy {
            PolicySpec::Elsv { depth: 0, .. } => {
                return Err(Error::Config("lookahead depth must be >= 1".into()))
            }
            PolicySpec::ElsvConstrained { sample_count, .. } if sample_count < self.min_accepted.max(1) => {
                return Err(Error::Config(format!(
                    "sample_count {sample_count} below min_accepted {}",
                    self.min_accepted
                )))
            }
            PolicySpec::Ucb { ucb_alpha } if ucb_alpha.is_nan() || ucb_alpha <= 0.0 => {
                return Err(Error::Config("ucb alpha must be positive".into()))
            }
            _ => {}
        }
        if let PolicySpec::Elsv { bonus: BonusSpec::Ucb(a), .. } | PolicySpec::ElsvConstrained { bonus: BonusSpec::Ucb(a), .. } = self.policy {
            if a.is_nan() || a <= 0.0 {
                return Err(Error::Config("ucb alpha must be positive".into()));
            }
        }
        Ok(())
    }

    /// Gittins table extent needed by the configured policy.
    pub fn gittins_params(&self) -> GittinsParams {
        let needed = self.horizon + self.policy.depth() + self.prior.prior_offset();
        GittinsParams {
            max_pulls: self.gittins.max_pulls.max(needed),
            horizon: self.gittins.horizon.max(needed),
            ..self.gittins
        }
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        const KNOWN: &[&str] = &[
            "n_arms", "constrained", "rewards", "prior_alpha", "prior_beta", "policy", "horizon",
            "instances", "seed", "out", "ucb_alpha", "gittins_gamma", "gittins_horizon", "gittins_step",
            "gittins_max_pulls", "gittins_table", "min_accepted", "tie_break", "execution", "threads",
        ];
        if let Some(k) = kv.keys().find(|k| !KNOWN.contains(k)) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let n_arms: usize = kv.require("n_arms")?.parse()?;
        let constrained = match kv.get("constrained") {
            Some(v) => v.parse()?,
            None => false,
        };
        let per_arm_u32 = |key: &str| -> Result<Vec<u32>> {
            match kv.get(key) {
                Some(v) => v.parse_u32_list(),
                None => Ok(vec![1; n_arms]),
            }
        };
        let prior = PriorSpec {
            n_arms,
            constrained,
            rewards: match kv.get("rewards") {
                Some(v) => v.parse_f64_list()?,
                None if constrained && n_arms == 3 => vec![0.8, 0.9, 1.0],
                None => vec![1.0; n_arms],
            },
            prior_alpha: per_arm_u32("prior_alpha")?,
            prior_beta: per_arm_u32("prior_beta")?,
        };
        let ucb_alpha = match kv.get("ucb_alpha") {
            Some(v) => v.parse()?,
            None => 1.0,
        };
        let policy = PolicySpec::parse_with(kv.require("policy")?.as_str(), ucb_alpha)?;
        let mut cfg = ExperimentConfig::new(
            prior,
            policy,
            kv.require("horizon")?.parse()?,
            kv.require("instances")?.parse()?,
            match kv.get("seed") {
                Some(v) => v.parse()?,
                None => 0,
            },
        );
        cfg.output_path = kv.get("out").map(|v| PathBuf::from(v.as_str()));
        if let Some(v) = kv.get("gittins_gamma") {
            cfg.gittins.gamma = v.parse()?;
        }
        if let Some(v) = kv.get("gittins_horizon") {
            cfg.gittins.horizon = v.parse()?;
        }
        if let Some(v) = kv.get("gittins_step") {
            cfg.gittins.lambda_step = v.parse()?;
        }
        if let Some(v) = kv.get("gittins_max_pulls") {
            cfg.gittins.max_pulls = v.parse()?;
        }
        cfg.gittins_table = kv.get("gittins_table").map(|v| PathBuf::from(v.as_str()));
        if let Some(v) = kv.get("min_accepted") {
            cfg.min_accepted = v.parse()?;
        }
        if let Some(v) = kv.get("tie_break") {
            cfg.tie_break = v.parse()?;
        }
        if let Some(v) = kv.get("execution") {
            cfg.execution = match v.as_str() {
                "parallel" => Execution::Parallel,
                "sequential" => Execution::Sequential,
                other => return Err(Error::Config(format!("unknown execution mode `{other}`"))),
            };
        }
        if let Some(v) = kv.get("threads") {
            cfg.threads = v.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        ExperimentConfig::from_key_values(&KeyValues::parse(text, "<config>")?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_key_values(&KeyValues::load(path)?)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = self.prior.to_config_string();
        out.push_str(&format!(
            "policy={}\nhorizon={}\ninstances={}\nseed={}\n",
            self.policy, self.horizon, self.n_instances, self.master_seed
        ));
        if let Some(p) = &self.output_path {
            out.push_str(&format!("out={}\n", p.display()));
        }
        let g = &self.gittins;
        out.push_str(&format!(
            "gittins_gamma={}\ngittins_horizon={}\ngittins_step={}\ngittins_max_pulls={}\n",
            g.gamma, g.horizon, g.lambda_step, g.max_pulls
        ));
        if let Some(p) = &self.gittins_table {
            out.push_str(&format!("gittins_table={}\n", p.display()));
        }
        out.push_str(&format!(
            "min_accepted={}\ntie_break={}\nexecution={}\nthreads={}\n",
            self.min_accepted,
            match self.tie_break {
                TieBreak::Lowest => "lowest",
                TieBreak::Random => "random",
            },
            match self.execution {
                Execution::Parallel => "parallel",
                Execution::Sequential => "sequential",
            },
            self.threads
        ));
        out
    }
}
