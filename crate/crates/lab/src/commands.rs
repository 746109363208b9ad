//! Command-line surface.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::experiments::{self, Outcome, RunContext};
use crate::parallel::{resolve_workers, WORKERS_ENV};
use crate::report::{emit, Format, RunReport, Timing};
use crate::scenario::ScenarioFile;
use crate::LabError;

/// Simple Max forecasting-competition experiments.
#[derive(Debug, Parser)]
#[command(name = "simplemax", version, about)]
pub struct Cli {
    /// Verb.
    #[command(subcommand)]
    pub command: Verb,
}

/// Flags shared by every verb.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Seed; overrides the file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials; overrides the file.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Verbs.
#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Utilities, tie probability and score-difference CDF.
    MechanismEval(Common),
    /// Support indifference and grid deviations of a coin-world profile.
    EquilibriumVerify(Common),
    /// Parameter condition, lemma margins and sampled dominance of the hedge.
    HedgingVerify(Common),
    /// Truthfulness certificate for a belief world.
    EdgeworthGamma(Common),
    /// Score histograms of base strategies and their variants.
    Figure1(Common),
    /// Two-event equilibrium supports.
    Figure2 {
        /// Shared flags.
        #[command(flatten)]
        common: Common,
        /// Bias in (1/3, 1/2); read from the scenario when absent.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Radius sweep over the number of events.
    GammaSweep(Common),
}

impl Verb {
    fn name(&self) -> &'static str {
        match self {
            Verb::MechanismEval(_) => "mechanism-eval",
            Verb::EquilibriumVerify(_) => "equilibrium-verify",
            Verb::HedgingVerify(_) => "hedging-verify",
            Verb::EdgeworthGamma(_) => "edgeworth-gamma",
            Verb::Figure1(_) => "figure1",
            Verb::Figure2 { .. } => "figure2",
            Verb::GammaSweep(_) => "gamma-sweep",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Verb::MechanismEval(c)
            | Verb::EquilibriumVerify(c)
            | Verb::HedgingVerify(c)
            | Verb::EdgeworthGamma(c)
            | Verb::Figure1(c)
            | Verb::GammaSweep(c) => c,
            Verb::Figure2 { common, .. } => common,
        }
    }
}

fn echo(verb: &Verb, seed: Option<u64>) -> Vec<String> {
    let c = verb.common();
    let mut v = vec![verb.name().to_string()];
    if let Some(s) = &c.scenario {
        v.extend(["--scenario".into(), s.display().to_string()]);
    }
    if let Verb::Figure2 { p: Some(p), .. } = verb {
        v.extend(["--p".into(), p.to_string()]);
    }
    if let Some(s) = seed {
        v.extend(["--seed".into(), s.to_string()]);
    }
    if let Some(t) = c.trials {
        v.extend(["--trials".into(), t.to_string()]);
    }
    v.extend(["--format".into(), format!("{:?}", c.format).to_lowercase()]);
    v
}

fn load(c: &Common) -> Result<ScenarioFile, LabError> {
    match &c.scenario {
        Some(path) => ScenarioFile::load(path),
        None => Err(LabError::Schema("--scenario <path> is required".into())),
    }
}

fn finish<T: Serialize>(verb: &Verb, file: Option<&ScenarioFile>, outcome: Outcome<T>, started: Instant, workers: usize) -> Result<(), LabError> {
    let c = verb.common();
    let report = RunReport::new(echo(verb, outcome.seed), outcome.seed, outcome.outputs, outcome.checks);
    let out = c.out.clone().or_else(|| file.and_then(|f| f.output.clone()));
    let timing = Timing { command: verb.name().into(), wall_clock_seconds: started.elapsed().as_secs_f64(), workers };
    emit(&report, outcome.csv.as_deref(), c.format, out.as_deref(), &timing)?;
    let failed = report.failures();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(LabError::Property(failed.join("; ")))
    }
}

/// Run one parsed command line.
pub fn run(cli: &Cli) -> Result<(), LabError> {
    let started = Instant::now();
    let verb = &cli.command;
    let c = verb.common();
    let workers = resolve_workers(c.workers);
    let ctx = RunContext { seed: c.seed, trials: c.trials, workers };
    match verb {
        Verb::Figure2 { p, common } => {
            let file = match (p, &common.scenario) {
                (Some(_), None) => None,
                _ => Some(load(common)?),
            };
            let p = match (p, &file) {
                (Some(p), _) => *p,
                (None, Some(f)) => ScenarioFile::require(f.p, "p")?,
                (None, None) => unreachable!("a scenario is loaded when --p is absent"),
            };
            finish(verb, file.as_ref(), experiments::figure2(p)?, started, workers)
        }
        _ => {
            let file = load(c)?;
            match verb {
                Verb::MechanismEval(_) => finish(verb, Some(&file), experiments::mechanism_eval(&file, &ctx)?, started, workers),
                Verb::EquilibriumVerify(_) => finish(verb, Some(&file), experiments::equilibrium_verify(&file)?, started, workers),
                Verb::HedgingVerify(_) => finish(verb, Some(&file), experiments::hedging_verify(&file, &ctx)?, started, workers),
                Verb::EdgeworthGamma(_) => finish(verb, Some(&file), experiments::edgeworth_gamma(&file)?, started, workers),
                Verb::Figure1(_) => finish(verb, Some(&file), experiments::figure1(&file)?, started, workers),
                Verb::GammaSweep(_) => finish(verb, Some(&file), experiments::gamma_sweep(&file)?, started, workers),
                Verb::Figure2 { .. } => unreachable!(),
            }
        }
    }
}
