use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use banditlab::elsv::{compute_value_table, export_contour_csv, normalize_for_plot};
use banditlab::exec::Execution;
use banditlab::gittins::{compute_gittins_table_with, GittinsParams, GittinsTable, DEFAULT_STATE_BUDGET};
use banditlab::harness::{bayes_regret, export_regret_csv, verify_decomposition, ExperimentConfig, KeyValues};
use banditlab::{BonusSource, Error, UcbParams};
use clap::{Parser, Subcommand, ValueEnum};

/// Bayesian Bernoulli bandit experiments.
#[derive(Parser)]
#[command(name = "banditlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a Gittins index table by calibration.
    Gittins {
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 1000)]
        horizon: u32,
        #[arg(long, default_value_t = 0.001)]
        step: f64,
        #[arg(long, default_value_t = 200)]
        max_pulls: u32,
        #[arg(long)]
        out: PathBuf,
        /// Run the lambda sweep on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Compute a per-arm value table from an exploration bonus.
    Elsv {
        #[arg(long, value_enum)]
        bonus: Bonus,
        /// Decision time; the table covers states with fewer than `t` pulls.
        #[arg(long)]
        t: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        ucb_alpha: f64,
        /// Gittins table to read the bonus from (computed if omitted).
        #[arg(long)]
        gittins_table: Option<PathBuf>,
        /// Also write `mean,pulls,value` rows of the plot-normalized table.
        #[arg(long)]
        contour: Option<PathBuf>,
    },
    /// Estimate the Bayesian regret curve of a policy.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the residual decomposition bound for a greedy lookahead policy.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Bonus {
    Ucb,
    Gittins,
    Zero,
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Io { .. } => 3,
        Error::Diagnostic(_) => 2,
        _ => 1,
    }
}

fn gittins_for(t: u32, path: Option<&Path>) -> banditlab::Result<GittinsTable> {
    match path {
        Some(p) => {
            let table = GittinsTable::load(p)?;
            if table.max_pulls() + 1 < t {
                return Err(Error::Config(format!(
                    "{} covers {} pulls, time {t} needs {}",
                    p.display(),
                    table.max_pulls(),
                    t - 1
                )));
            }
            Ok(table)
        }
        None => {
            let params = GittinsParams {
                max_pulls: t,
                horizon: t.max(GittinsParams::default().horizon),
                ..GittinsParams::default()
            };
            compute_gittins_table_with(&params, DEFAULT_STATE_BUDGET, Execution::default())
        }
    }
}

fn run(command: Command) -> banditlab::Result<()> {
    match command {
        Command::Gittins {
            gamma,
            horizon,
            step,
            max_pulls,
            out,
            sequential,
        } => {
            let params = GittinsParams {
                gamma,
                horizon,
                lambda_step: step,
                max_pulls,
            };
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::default()
            };
            let table = compute_gittins_table_with(&params, DEFAULT_STATE_BUDGET, exec)?;
            table.save(&out)?;
            println!("wrote {} states to {}", table.values().len(), out.display());
        }
        Command::Elsv {
            bonus,
            t,
            out,
            ucb_alpha,
            gittins_table,
            contour,
        } => {
            if t == 0 {
                return Err(Error::Config("--t must be at least 1".into()));
            }
            let source = match bonus {
                Bonus::Zero => BonusSource::Zero,
                Bonus::Ucb => BonusSource::Ucb(UcbParams::new(ucb_alpha).map_err(|e| Error::Config(e.to_string()))?),
                Bonus::Gittins => BonusSource::Gittins(Arc::new(gittins_for(t, gittins_table.as_deref())?)),
            };
            let table = compute_value_table(t, &source)?;
            table.save(&out)?;
            println!("wrote {} states ({} updates) to {}", table.values().len(), table.updates(), out.display());
            if let Some(path) = contour {
                export_contour_csv(&normalize_for_plot(&table, 1.0), &path)?;
                println!("wrote contour rows to {}", path.display());
            }
        }
        Command::Simulate {
            config,
            policy,
            horizon,
            instances,
            seed,
            out,
        } => {
            let mut kv = KeyValues::load(&config)?;
            if let Some(p) = policy {
                kv.set("policy", p);
            }
            if let Some(h) = horizon {
                kv.set("horizon", h.to_string());
            }
            if let Some(n) = instances {
                kv.set("instances", n.to_string());
            }
            if let Some(s) = seed {
                kv.set("seed", s.to_string());
            }
            if let Some(o) = &out {
                kv.set("out", o.display().to_string());
            }
            let cfg = ExperimentConfig::from_key_values(&kv)?;
            let curve = bayes_regret(&cfg)?;
            let (lo, hi) = curve.final_ci();
            println!(
                "{} T={} instances={}: cumulative regret {:.4} (95% CI {lo:.4} to {hi:.4})",
                curve.label,
                cfg.horizon,
                curve.n_instances,
                curve.final_mean()
            );
            if curve.is_single_instance() {
                eprintln!("warning: single instance, no confidence band");
            } else if curve.ci_is_rough() {
                eprintln!("warning: fewer than 30 instances, the normal-approximation band is unreliable");
            }
            if curve.fallbacks > 0 {
                eprintln!("note: {} decisions fell back to unconstrained posterior means", curve.fallbacks);
            }
            if let Some(path) = &cfg.output_path {
                export_regret_csv(&curve, path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Diagnose { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = verify_decomposition(&cfg)?;
            println!("{report}");
            report.check()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // A failed diagnostic already printed its report.
            if !matches!(err.root(), Error::Diagnostic(_)) {
                eprintln!("error: {err}");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
