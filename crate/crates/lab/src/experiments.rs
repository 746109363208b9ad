//! One driver per command. Each returns serializable outputs plus checks.

use serde::Serialize;
use simplemax_core::belief::CoinScenario;
use simplemax_core::distribution::{convolve_with, ConvolutionConfig, ScoreDiffDistribution};
use simplemax_core::edgeworth::{self, CertifyConfig, Condition3, LeaveOneOutGamma};
use simplemax_core::equilibrium::{self, ReportClass};
use simplemax_core::hedging::{
    self, DominanceConfig, DominanceSampler, DominanceTally, HedgingParams, OutcomeProposal,
};
use simplemax_core::mechanism::quadratic_score;
use simplemax_core::utility::{
    self, belief_utility, coin_outcome_summary, coin_utility, CoinRoute, ExactOptions, Sampler, Tally, World,
};
use simplemax_core::{Error, MixedStrategy, ReportVector, StrategyProfile};

use crate::parallel::map_blocks;
use crate::report::Check;
use crate::scenario::{self, Method, ProposalKind, ScenarioFile, WorldKind};
use crate::LabError;

/// Trials used when neither the flag nor the file sets them.
pub const DEFAULT_TRIALS: u64 = 100_000;

/// Options shared by every driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunContext {
    /// Seed from the command line (overrides the file).
    pub seed: Option<u64>,
    /// Trials from the command line (overrides the file).
    pub trials: Option<u64>,
    /// Worker threads.
    pub workers: usize,
}

impl RunContext {
    fn seed(&self, file: &ScenarioFile) -> Result<u64, LabError> {
        self.seed
            .or(file.seed)
            .ok_or_else(|| LabError::Schema("a seed is required for stochastic runs (`seed` or --seed)".into()))
    }

    fn trials(&self, file: &ScenarioFile) -> Result<u64, LabError> {
        let t = self.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
        if t == 0 {
            return Err(LabError::Schema("trials must be positive".into()));
        }
        Ok(t)
    }
}

/// Driver result: outputs, an optional CSV table, checks, and the seed used.
#[derive(Debug, Clone)]
pub struct Outcome<T> {
    /// Structured outputs.
    pub outputs: T,
    /// Table for `--format csv`.
    pub csv: Option<String>,
    /// Checks.
    pub checks: Vec<Check>,
    /// Seed actually used.
    pub seed: Option<u64>,
}

/// One point of a CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfRow {
    /// Abscissa (an atom of the distribution).
    pub x: f64,
    /// `Pr[X <= x]`.
    pub cdf: f64,
}

/// Outputs of `mechanism-eval`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismEval {
    /// World kind.
    pub world: WorldKind,
    /// `exact` or `monte_carlo`.
    pub method: &'static str,
    /// Exact route, if exact.
    pub route: Option<&'static str>,
    /// Win probability per player.
    pub utilities: Vec<f64>,
    /// 95% half-widths (Monte Carlo only).
    pub half_widths: Option<Vec<f64>>,
    /// Trials (Monte Carlo only).
    pub trials: Option<u64>,
    /// Probability that the winner set has more than one member.
    pub tie_probability: Option<f64>,
    /// CDF of the best opponent total minus player 0's total.
    pub difference_cdf: Vec<CdfRow>,
}

fn cdf_rows(d: &ScoreDiffDistribution) -> Vec<CdfRow> {
    let mut acc = 0.0;
    d.atoms()
        .iter()
        .map(|&(x, w)| {
            acc += w;
            CdfRow { x, cdf: acc.min(1.0) }
        })
        .collect()
}

fn cdf_csv(rows: &[CdfRow]) -> String {
    crate::report::csv_table(&["x", "cdf"], rows.iter().map(|r| vec![format!("{}", r.x), format!("{}", r.cdf)]))
}

fn is_cap(e: &Error) -> bool {
    matches!(e, Error::EnumerationCap { .. } | Error::AtomCap { .. })
}

fn mc_utilities(
    profile: &StrategyProfile,
    world: &World,
    players: usize,
    seed: u64,
    trials: u64,
    workers: usize,
) -> Result<(Vec<f64>, Vec<f64>), LabError> {
    let mut means = Vec::with_capacity(players);
    let mut halves = Vec::with_capacity(players);
    for player in 0..players {
        let sampler = Sampler::new(player, profile, world)?;
        // each player gets its own stream family so estimates are not coupled
        let player_seed = seed ^ (player as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let parts = map_blocks(trials, workers, |b, c| Ok(sampler.block(player_seed, b, c)))?;
        let mut tally = Tally::default();
        for t in &parts {
            tally.merge(t);
        }
        let est = tally.estimate(player_seed);
        means.push(est.mean);
        halves.push(est.half_width);
    }
    Ok((means, halves))
}

/// Utilities, tie probability and score-difference CDF.
pub fn mechanism_eval(file: &ScenarioFile, ctx: &RunContext) -> Result<Outcome<MechanismEval>, LabError> {
    match file.kind {
        WorldKind::Coin => mechanism_eval_coin(file, ctx),
        WorldKind::Belief => mechanism_eval_belief(file, ctx),
    }
}

fn mechanism_eval_coin(file: &ScenarioFile, ctx: &RunContext) -> Result<Outcome<MechanismEval>, LabError> {
    let scn = file.coin()?;
    let profile = file.profile()?;
    check_profile_fits(&profile, scn.m(), scn.n())?;
    let route = if scn.n() == 2 { CoinRoute::Convolution } else { CoinRoute::Direct };
    let exact = if file.method == Method::MonteCarlo {
        None
    } else {
        match (0..scn.n())
            .map(|k| coin_utility(k, &profile, &scn, route, ExactOptions::default()))
            .collect::<Result<Vec<_>, _>>()
        {
            Ok(u) => Some(u),
            Err(e) if is_cap(&e) && file.method == Method::Auto => None,
            Err(e) => return Err(e.into()),
        }
    };
    let summary = match coin_outcome_summary(0, &profile, &scn, ExactOptions::default()) {
        Ok(s) => Some(s),
        Err(e) if is_cap(&e) => None,
        Err(e) => return Err(e.into()),
    };
    let difference_cdf = summary.as_ref().map(|s| cdf_rows(&s.difference)).unwrap_or_default();
    let tie_probability = summary.as_ref().map(|s| s.tie_probability);
    let (outputs, seed) = match exact {
        Some(utilities) => (
            MechanismEval {
                world: WorldKind::Coin,
                method: "exact",
                route: Some(route_name(route)),
                utilities,
                half_widths: None,
                trials: None,
                tie_probability,
                difference_cdf,
            },
            None,
        ),
        None => {
            let seed = ctx.seed(file)?;
            let trials = ctx.trials(file)?;
            let n = scn.n();
            let world = World::Coin(scn);
            let (utilities, halves) = mc_utilities(&profile, &world, n, seed, trials, ctx.workers)?;
            (
                MechanismEval {
                    world: WorldKind::Coin,
                    method: "monte_carlo",
                    route: None,
                    utilities,
                    half_widths: Some(halves),
                    trials: Some(trials),
                    tie_probability,
                    difference_cdf,
                },
                Some(seed),
            )
        }
    };
    Ok(finish_eval(outputs, seed))
}

fn route_name(route: CoinRoute) -> &'static str {
    match route {
        CoinRoute::Direct => "direct",
        CoinRoute::Canonical => "canonical",
        CoinRoute::Convolution => "convolution",
    }
}

fn check_profile_fits(profile: &StrategyProfile, m: usize, n: usize) -> Result<(), LabError> {
    if profile.n() != n {
        return Err(LabError::Schema(format!("field `strategies`: {} strategies for n = {n}", profile.n())));
    }
    if profile.m() != m {
        return Err(LabError::Schema(format!("field `strategies`: reports have {} entries for m = {m}", profile.m())));
    }
    Ok(())
}

fn mechanism_eval_belief(file: &ScenarioFile, ctx: &RunContext) -> Result<Outcome<MechanismEval>, LabError> {
    let belief = file.belief_model()?;
    let strategies = file.strategy_list()?;
    if strategies.len() != 1 {
        return Err(LabError::Schema(
            "field `strategies`: belief worlds take exactly one strategy (the opponent is the belief)".into(),
        ));
    }
    let s = strategies[0].clone();
    if s.dimension() != belief.m() {
        return Err(LabError::Schema(format!(
            "field `strategies[0]`: reports have {} entries for {} events",
            s.dimension(),
            belief.m()
        )));
    }
    let exact = if file.method == Method::MonteCarlo {
        None
    } else {
        match belief_utility(&s, &belief, ExactOptions::default()) {
            Ok(u) => Some(u),
            Err(e) if is_cap(&e) && file.method == Method::Auto => None,
            Err(e) => return Err(e.into()),
        }
    };
    let mut atoms = Vec::new();
    let mut ties = 0.0;
    for (r, w) in s.support() {
        let total = utility::total_distribution(r, &belief, ConvolutionConfig::default())?;
        ties += w * total.prob_at(0.0);
        atoms.extend(total.atoms().iter().map(|&(x, p)| (x, p * w)));
    }
    let mixture = ScoreDiffDistribution::from_atoms(atoms)?;
    let difference_cdf = cdf_rows(&mixture);
    let (outputs, seed) = match exact {
        Some(u) => (
            MechanismEval {
                world: WorldKind::Belief,
                method: "exact",
                route: Some("convolution"),
                utilities: vec![u, 1.0 - u],
                half_widths: None,
                trials: None,
                tie_probability: Some(ties),
                difference_cdf,
            },
            None,
        ),
        None => {
            let seed = ctx.seed(file)?;
            let trials = ctx.trials(file)?;
            let profile = StrategyProfile::new(vec![s])?;
            let world = World::Belief(belief);
            let (u, h) = mc_utilities(&profile, &world, 1, seed, trials, ctx.workers)?;
            (
                MechanismEval {
                    world: WorldKind::Belief,
                    method: "monte_carlo",
                    route: None,
                    utilities: vec![u[0], 1.0 - u[0]],
                    half_widths: Some(vec![h[0], h[0]]),
                    trials: Some(trials),
                    tie_probability: Some(ties),
                    difference_cdf,
                },
                Some(seed),
            )
        }
    };
    Ok(finish_eval(outputs, seed))
}

fn finish_eval(outputs: MechanismEval, seed: Option<u64>) -> Outcome<MechanismEval> {
    let total: f64 = outputs.utilities.iter().sum();
    let in_range = outputs.utilities.iter().all(|u| (0.0..=1.0).contains(u));
    let checks = vec![
        Check::new("utilities in [0,1]", in_range, format!("{:?}", outputs.utilities)),
        Check::new(
            "utilities sum to 1",
            (total - 1.0).abs() <= 1e-9 || outputs.method == "monte_carlo",
            format!("{total}"),
        ),
    ];
    Outcome { csv: Some(cdf_csv(&outputs.difference_cdf)), outputs, checks, seed }
}

/// A support point with its exact utility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportPoint {
    /// Report (canonical coordinates for the informed player).
    pub report: Vec<f64>,
    /// Probability.
    pub weight: f64,
    /// Exact utility of playing this point against the profile.
    pub utility: f64,
}

/// Best grid deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationOut {
    /// Deviation utility minus profile utility.
    pub gain: f64,
    /// The deviation.
    pub report: Vec<f64>,
    /// Utility of the deviation.
    pub utility: f64,
    /// Deviations evaluated.
    pub evaluated: u64,
}

/// One player's part of an equilibrium report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerEquilibrium {
    /// Player index.
    pub player: usize,
    /// Utility of the profile strategy.
    pub utility: f64,
    /// Support with per-point utilities.
    pub support: Vec<SupportPoint>,
    /// Largest minus smallest support utility.
    pub indifference_spread: f64,
    /// Best grid deviation.
    pub best_deviation: DeviationOut,
}

/// Two-event geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M2Geometry {
    /// Average coordinate of the informed player's strategy.
    pub average_coordinate: f64,
    /// `(3 - 2p) / (4 (2 - p))`.
    pub closed_form: f64,
    /// Hedged, extremized or truthful.
    pub classification: &'static str,
    /// Bias where the classification flips.
    pub threshold: f64,
}

/// Outputs of `equilibrium-verify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumOut {
    /// Events.
    pub m: usize,
    /// Players.
    pub n: usize,
    /// Bias.
    pub p: f64,
    /// Deviation grid.
    pub resolution: f64,
    /// Per-player details.
    pub players: Vec<PlayerEquilibrium>,
    /// Largest deviation gain.
    pub max_gain: f64,
    /// Geometry when `m = 2`, `n = 2`.
    pub m2: Option<M2Geometry>,
}

/// Tolerance of the indifference check.
pub const INDIFFERENCE_TOLERANCE: f64 = 1e-9;
/// Tolerance of the deviation check.
pub const GAIN_TOLERANCE: f64 = 1e-6;

/// Classification label.
pub fn class_name(c: ReportClass) -> &'static str {
    match c {
        ReportClass::Hedged => "hedged",
        ReportClass::Extremized => "extremized",
        ReportClass::Truthful => "truthful",
    }
}

/// Support indifference and grid deviations for a coin-world profile. Without
/// `strategies` the closed-form equilibrium for `m = 1` or `m = 2` is used.
pub fn equilibrium_verify(file: &ScenarioFile) -> Result<Outcome<EquilibriumOut>, LabError> {
    file.expect_kind(WorldKind::Coin)?;
    let scn = file.coin()?;
    let (m, n, p) = (scn.m(), scn.n(), scn.p());
    let profile = match &file.strategies {
        Some(_) => file.profile()?,
        None if m == 1 => equilibrium::m1_n_equilibrium(p, n)?,
        None if m == 2 && n == 2 => equilibrium::m2_equilibrium(p)?,
        None => {
            return Err(LabError::Schema(
                "missing field `strategies` (closed forms exist only for m = 1, and m = 2 with n = 2)".into(),
            ))
        }
    };
    check_profile_fits(&profile, m, n)?;
    let resolution = file.resolution.unwrap_or(0.01);
    let report = equilibrium::verify_equilibrium(&profile, &scn, resolution)?;
    let players: Vec<PlayerEquilibrium> = (0..n)
        .map(|k| PlayerEquilibrium {
            player: k,
            utility: report.utilities[k],
            support: profile
                .strategy(k)
                .support()
                .iter()
                .zip(&report.support_utilities[k])
                .map(|((r, w), &u)| SupportPoint { report: r.as_slice().to_vec(), weight: *w, utility: u })
                .collect(),
            indifference_spread: report.indifference_spread[k],
            best_deviation: DeviationOut {
                gain: report.deviations[k].gain,
                report: report.deviations[k].deviation.as_slice().to_vec(),
                utility: report.deviations[k].deviation_utility,
                evaluated: report.deviations[k].evaluated,
            },
        })
        .collect();
    let m2 = if m == 2 && n == 2 && file.strategies.is_none() {
        let avg = equilibrium::average_report(profile.strategy(scn.informed_index())).as_slice()[0];
        Some(M2Geometry {
            average_coordinate: avg,
            closed_form: equilibrium::m2_average_coordinate(p),
            classification: class_name(equilibrium::classify(avg, p)),
            threshold: equilibrium::hedging_threshold(),
        })
    } else {
        None
    };
    let max_gain = report.max_gain();
    let mut checks = Vec::new();
    for pl in &players {
        checks.push(Check::new(
            format!("player {} support indifference", pl.player),
            pl.indifference_spread <= INDIFFERENCE_TOLERANCE,
            format!("spread {:e}", pl.indifference_spread),
        ));
        checks.push(Check::new(
            format!("player {} no profitable grid deviation", pl.player),
            pl.best_deviation.gain <= GAIN_TOLERANCE,
            format!("gain {:e} at {:?}", pl.best_deviation.gain, pl.best_deviation.report),
        ));
    }
    let outputs = EquilibriumOut { m, n, p, resolution, players, max_gain, m2 };
    let csv = crate::report::csv_table(
        &["player", "utility", "indifference_spread", "best_gain"],
        outputs.players.iter().map(|pl| {
            vec![
                pl.player.to_string(),
                format!("{}", pl.utility),
                format!("{}", pl.indifference_spread),
                format!("{}", pl.best_deviation.gain),
            ]
        }),
    );
    Ok(Outcome { outputs, csv: Some(csv), checks, seed: None })
}

/// Margins of the parameter condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition1Out {
    /// All margins positive.
    pub holds: bool,
    /// `m - 20`.
    pub m_margin: f64,
    /// Upper bound on `p`.
    pub p_bound: f64,
    /// `p_bound - p`.
    pub p_margin: f64,
    /// Upper bound on `eps`.
    pub eps_bound: f64,
    /// `eps_bound - eps`.
    pub eps_margin: f64,
}

/// A lemma margin with its binding weight class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginOut {
    /// Smallest margin over the checked classes.
    pub margin: f64,
    /// Weight class attaining it.
    pub binding_w: usize,
}

/// Confidence interval on the importance-weighted gain, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainInterval {
    /// Lower end divided by `exp(log_scale)`.
    pub scaled_lower: f64,
    /// Upper end divided by `exp(log_scale)`.
    pub scaled_upper: f64,
    /// Natural log of the scale.
    pub log_scale: f64,
    /// Lower end above zero.
    pub excludes_zero: bool,
}

/// Outputs of `hedging-verify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgingOut {
    /// Events.
    pub m: usize,
    /// Bias.
    pub p: f64,
    /// Radius.
    pub eps: f64,
    /// Players.
    pub n: usize,
    /// Parameter condition.
    pub condition1: Condition1Out,
    /// Distance margin between truthful and hedge classes.
    pub lemma1_margin: Option<MarginOut>,
    /// Monotone-slack margin.
    pub lemma2_margin: Option<MarginOut>,
    /// Hedge coordinate.
    pub hedge: f64,
    /// Outcome sampler probability.
    pub proposal_q: f64,
    /// Sampled tuples.
    pub trials: u64,
    /// Outcomes where the hedge did worse.
    pub violations: u64,
    /// Outcomes where the hedge did strictly better.
    pub strict_count: u64,
    /// Weight of the first violation, if any.
    pub first_violation_w: Option<usize>,
    /// Unweighted mean share difference under the sampler.
    pub raw_mean_gain: f64,
    /// Estimated gain under the belief (may underflow to 0).
    pub gain_estimate: f64,
    /// `log10` of the estimated gain.
    pub gain_log10: Option<f64>,
    /// 95% interval.
    pub ci: GainInterval,
}

/// Parameter condition, lemma margins and the sampled dominance check.
pub fn hedging_verify(file: &ScenarioFile, ctx: &RunContext) -> Result<Outcome<HedgingOut>, LabError> {
    let spec = file.hedging.ok_or_else(|| LabError::Schema("missing section `hedging`".into()))?;
    let params = HedgingParams::new(spec.m, spec.p, spec.eps)
        .map_err(|e| LabError::Schema(format!("section `hedging`: {e}")))?;
    let seed = ctx.seed(file)?;
    let trials = ctx.trials(file)?;
    let proposal = match spec.proposal {
        ProposalKind::Belief => OutcomeProposal::Belief,
        ProposalKind::Tilted => OutcomeProposal::Tilted(spec.tilt.or(spec.hedge).unwrap_or(params.p_star())),
    };
    let config = DominanceConfig {
        n: spec.n,
        trials,
        seed,
        proposal,
        require_condition1: spec.require_condition1,
        hedge: spec.hedge,
    };
    let sampler = DominanceSampler::new(params, config).map_err(|e| match e {
        Error::ConditionViolated { .. } | Error::InvalidParameter { .. } | Error::OutOfRange { .. } => {
            LabError::Schema(format!("section `hedging`: {e}"))
        }
        other => LabError::Core(other),
    })?;
    let parts = map_blocks(trials, ctx.workers, |b, c| Ok(sampler.block(b, c)?))?;
    let mut tally = DominanceTally::default();
    for t in &parts {
        tally.merge(t);
    }
    let rep = sampler.report(&tally);
    let c1 = hedging::condition1_check(spec.m, spec.p, spec.eps);
    let condition1 = Condition1Out {
        holds: c1.holds,
        m_margin: c1.m_margin,
        p_bound: c1.p_bound,
        p_margin: c1.p_margin,
        eps_bound: c1.eps_bound,
        eps_margin: c1.eps_margin,
    };
    let lemma1 = hedging::lemma1_margin(&params).ok().map(|l| MarginOut { margin: l.margin, binding_w: l.binding_w });
    let lemma2 = hedging::lemma2_margin(&params).ok().map(|l| MarginOut { margin: l.margin, binding_w: l.binding_w });
    let mut checks = vec![Check::new("no weak-dominance violations", rep.violations == 0, format!("{}", rep.violations))];
    if c1.holds {
        checks.push(Check::new(
            "lemma margins positive",
            lemma1.is_some_and(|l| l.margin > 0.0) && lemma2.is_some_and(|l| l.margin > 0.0),
            format!("{lemma1:?} {lemma2:?}"),
        ));
        checks.push(Check::new("strict improvements observed", rep.strict_count > 0, format!("{}", rep.strict_count)));
        checks.push(Check::new(
            "gain interval excludes zero",
            rep.ci_excludes_zero,
            format!("{} +- {} (x e^{})", rep.scaled_gain, rep.scaled_half_width, rep.log_scale),
        ));
    }
    let outputs = HedgingOut {
        m: spec.m,
        p: spec.p,
        eps: spec.eps,
        n: spec.n,
        condition1,
        lemma1_margin: lemma1,
        lemma2_margin: lemma2,
        hedge: rep.hedge,
        proposal_q: rep.proposal_q,
        trials: rep.trials,
        violations: rep.violations,
        strict_count: rep.strict_count,
        first_violation_w: rep.first_witness.as_ref().map(|w| w.w),
        raw_mean_gain: rep.raw_mean_gain,
        gain_estimate: rep.gain_estimate,
        gain_log10: rep.gain_log10,
        ci: GainInterval {
            scaled_lower: rep.scaled_gain - rep.scaled_half_width,
            scaled_upper: rep.scaled_gain + rep.scaled_half_width,
            log_scale: rep.log_scale,
            excludes_zero: rep.ci_excludes_zero,
        },
    };
    Ok(Outcome { outputs, csv: None, checks, seed: Some(seed) })
}

/// Per-event radius row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventGamma {
    /// Event index.
    pub t: usize,
    /// Radius, `None` when vacuous.
    pub gamma: Option<f64>,
    /// Constant `A`.
    pub a: Option<f64>,
    /// Constant `B`.
    pub b: Option<f64>,
}

/// Competitiveness margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition3Out {
    /// `sigma - 4`.
    pub sigma: f64,
    /// `U(truthful) - (1/2 - delta)`.
    pub truthful_utility: f64,
    /// `(1/2 + delta) - U(max)`.
    pub max_utility: f64,
    /// `0.33 - (P / sigma^3 + delta)`.
    pub ratio: f64,
    /// All margins non-negative.
    pub holds: bool,
}

impl From<Condition3> for Condition3Out {
    fn from(c: Condition3) -> Self {
        Condition3Out {
            sigma: c.sigma_margin,
            truthful_utility: c.truthful_margin,
            max_utility: c.max_margin,
            ratio: c.ratio_margin,
            holds: c.holds,
        }
    }
}

/// Outputs of `edgeworth-gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateOut {
    /// Global radius, `None` when vacuous.
    pub gamma_theorem2: Option<f64>,
    /// Per-event radii.
    pub gamma_per_event: Vec<EventGamma>,
    /// Competitiveness margins.
    pub condition3_margins: Condition3Out,
    /// `delta`.
    pub delta: f64,
    /// `delta + P / sigma^3`.
    pub delta_hat: f64,
    /// Bound on `|mu| / sigma`.
    pub ratio_bound: Option<f64>,
    /// Configured constant.
    #[serde(rename = "D")]
    pub d: f64,
    /// Empirical constant per event.
    #[serde(rename = "D_hat_empirical")]
    pub d_hat_empirical: Vec<Option<f64>>,
    /// Mean of the total score difference.
    pub mu: f64,
    /// Standard deviation of the total.
    pub sigma: f64,
    /// `k3 / sigma^2`.
    pub c3: f64,
    /// `k4 / sigma^2`.
    pub c4: f64,
    /// Utility of the report.
    pub utility_truthful: f64,
    /// Maximum utility used.
    pub utility_max: f64,
}

fn event_gamma(t: usize, g: &Option<LeaveOneOutGamma>) -> EventGamma {
    EventGamma { t, gamma: g.map(|g| g.gamma), a: g.map(|g| g.a), b: g.map(|g| g.b) }
}

/// Truthfulness certificate for a belief world.
pub fn edgeworth_gamma(file: &ScenarioFile) -> Result<Outcome<CertificateOut>, LabError> {
    file.expect_kind(WorldKind::Belief)?;
    let belief = file.belief_model()?;
    let spec = file.edgeworth.clone().unwrap_or(crate::scenario::EdgeworthSpec {
        delta: 0.1,
        d: 1.0,
        report: None,
        utility_max: None,
        resolution: 0.01,
        d_hat: true,
    });
    let r = match &spec.report {
        Some(r) => ReportVector::new(r.clone()).map_err(|e| LabError::Schema(format!("field `edgeworth.report`: {e}")))?,
        None => ReportVector::new(simplemax_core::belief::belief_marginal(&belief))?,
    };
    if r.len() != belief.m() {
        return Err(LabError::Schema(format!("field `edgeworth.report`: {} entries for {} events", r.len(), belief.m())));
    }
    let config = CertifyConfig {
        delta: spec.delta,
        d: spec.d,
        utility_max: spec.utility_max,
        resolution: spec.resolution,
        d_hat: spec.d_hat,
        convolution: ConvolutionConfig::default(),
    };
    let cert = edgeworth::certify(&r, &belief, config)?;
    let outputs = CertificateOut {
        gamma_theorem2: cert.gamma_theorem2,
        gamma_per_event: cert.gamma_per_event.iter().enumerate().map(|(t, g)| event_gamma(t, g)).collect(),
        condition3_margins: cert.condition3.into(),
        delta: cert.delta,
        delta_hat: cert.delta_hat,
        ratio_bound: cert.ratio_bound,
        d: cert.d,
        d_hat_empirical: cert.d_hat_empirical.iter().map(|&v| v.is_finite().then_some(v)).collect(),
        mu: cert.moments.mean,
        sigma: cert.moments.sd(),
        c3: cert.c3,
        c4: cert.c4,
        utility_truthful: cert.utility_truthful,
        utility_max: cert.utility_max,
    };
    let csv = crate::report::csv_table(
        &["t", "gamma", "A", "B", "D_hat"],
        outputs.gamma_per_event.iter().map(|g| {
            vec![
                g.t.to_string(),
                crate::report::cell(g.gamma),
                crate::report::cell(g.a),
                crate::report::cell(g.b),
                crate::report::cell(outputs.d_hat_empirical.get(g.t).copied().flatten()),
            ]
        }),
    );
    Ok(Outcome { outputs, csv: Some(csv), checks: Vec::new(), seed: None })
}

/// One histogram bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    /// Strategy label.
    pub strategy: String,
    /// Left edge.
    pub bin_left: f64,
    /// Right edge.
    pub bin_right: f64,
    /// Probability mass.
    pub mass: f64,
}

/// Summary of one strategy's total score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyScore {
    /// Label.
    pub strategy: String,
    /// Player.
    pub player: usize,
    /// Mean total score.
    pub mean: f64,
    /// Variance of the total score.
    pub variance: f64,
    /// Win share against the other player's base strategy.
    pub win_share: f64,
}

/// Outputs of `figure1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Out {
    /// Events.
    pub m: usize,
    /// Bias.
    pub p: f64,
    /// Per-strategy summaries.
    pub strategies: Vec<StrategyScore>,
    /// Histogram rows.
    pub histogram: Vec<HistogramRow>,
}

/// Exact distribution of `player`'s total score under `s` in the coin world.
///
/// Each event is independent: the informed player's canonical report meets a
/// `Bernoulli(p)` outcome, an uninformed report meets a fair one.
pub fn total_score_distribution(scn: &CoinScenario, player: usize, s: &MixedStrategy) -> Result<ScoreDiffDistribution, Error> {
    let q = if player == scn.informed_index() { scn.p() } else { 0.5 };
    let mut atoms = Vec::new();
    for (r, w) in s.support() {
        let events = r
            .as_slice()
            .iter()
            .map(|&x| ScoreDiffDistribution::from_atoms(vec![(quadratic_score(x, true)?, q), (quadratic_score(x, false)?, 1.0 - q)]))
            .collect::<Result<Vec<_>, _>>()?;
        let total = convolve_with(&events, ConvolutionConfig::default())?;
        atoms.extend(total.atoms().iter().map(|&(v, p)| (v, p * w)));
    }
    ScoreDiffDistribution::from_atoms(atoms)
}

fn histogram(label: &str, d: &ScoreDiffDistribution, m: usize, bins: usize) -> Vec<HistogramRow> {
    let width = m as f64 / bins as f64;
    let mut mass = vec![0.0; bins];
    for &(v, p) in d.atoms() {
        let k = ((v / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        mass[k] += p;
    }
    mass.into_iter()
        .enumerate()
        .map(|(k, mass)| HistogramRow {
            strategy: label.to_string(),
            bin_left: k as f64 * width,
            bin_right: (k + 1) as f64 * width,
            mass,
        })
        .collect()
}

/// Score histograms and win shares of the base strategies and their variants.
pub fn figure1(file: &ScenarioFile) -> Result<Outcome<Figure1Out>, LabError> {
    file.expect_kind(WorldKind::Coin)?;
    let scn = file.coin()?;
    if scn.n() != 2 {
        return Err(LabError::Schema("field `n`: figure1 compares two players".into()));
    }
    let base = file.profile()?;
    check_profile_fits(&base, scn.m(), 2)?;
    let bins = file.bins.unwrap_or(40).max(1);
    let mut entries: Vec<(String, usize, MixedStrategy)> =
        (0..2).map(|k| (format!("player{k}"), k, base.strategy(k).clone())).collect();
    for (i, v) in file.variants.iter().enumerate() {
        if v.player > 1 {
            return Err(LabError::Schema(format!("field `variants[{i}].player`: must be 0 or 1")));
        }
        let s = scenario::strategy(&v.strategy).map_err(|e| LabError::Schema(format!("field `variants[{i}]`: {e}")))?;
        if s.dimension() != scn.m() {
            return Err(LabError::Schema(format!("field `variants[{i}]`: reports must have {} entries", scn.m())));
        }
        entries.push((v.label.clone(), v.player, s));
    }
    let mut strategies = Vec::new();
    let mut rows = Vec::new();
    for (label, player, s) in &entries {
        let d = total_score_distribution(&scn, *player, s)?;
        let mo = d.moments();
        let profile = base.with_strategy(*player, s.clone())?;
        let win = coin_utility(*player, &profile, &scn, CoinRoute::Convolution, ExactOptions::default())?;
        strategies.push(StrategyScore { strategy: label.clone(), player: *player, mean: mo.mean, variance: mo.variance, win_share: win });
        rows.extend(histogram(label, &d, scn.m(), bins));
    }
    let mut checks = Vec::new();
    for label in entries.iter().map(|e| &e.0) {
        let mass: f64 = rows.iter().filter(|r| &r.strategy == label).map(|r| r.mass).sum();
        checks.push(Check::new(format!("{label} histogram mass is 1"), (mass - 1.0).abs() <= 1e-9, format!("{mass}")));
    }
    for v in &strategies[2..] {
        let b = &strategies[v.player];
        let (name, ok) = if v.player == scn.informed_index() {
            (format!("{} lowers informed variance", v.strategy), v.variance < b.variance)
        } else {
            (format!("{} raises uninformed variance", v.strategy), v.variance > b.variance)
        };
        checks.push(Check::new(name, ok, format!("{} vs {}", v.variance, b.variance)));
    }
    let csv = crate::report::csv_table(
        &["strategy", "bin_left", "bin_right", "mass"],
        rows.iter()
            .map(|r| vec![r.strategy.clone(), format!("{}", r.bin_left), format!("{}", r.bin_right), format!("{}", r.mass)]),
    );
    let outputs = Figure1Out { m: scn.m(), p: scn.p(), strategies, histogram: rows };
    Ok(Outcome { outputs, csv: Some(csv), checks, seed: None })
}

/// A weighted point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedPoint {
    /// Coordinates.
    pub point: Vec<f64>,
    /// Probability.
    pub weight: f64,
}

/// One player's support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerSupport {
    /// `informed` or `uninformed`.
    pub role: &'static str,
    /// Support points with weights.
    pub support: Vec<WeightedPoint>,
    /// Average report.
    pub average: Vec<f64>,
}

/// Outputs of `figure2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure2Out {
    /// Bias.
    pub p: f64,
    /// Informed then uninformed.
    pub players: Vec<PlayerSupport>,
    /// Classification of the informed average.
    pub classification: &'static str,
    /// Distance from the informed average to `(p, p)`.
    pub distance_to_truth: f64,
}

/// Two-event equilibrium supports, weights and averages.
pub fn figure2(p: f64) -> Result<Outcome<Figure2Out>, LabError> {
    let profile = equilibrium::m2_equilibrium(p).map_err(|e| LabError::Schema(format!("p: {e}")))?;
    let players: Vec<PlayerSupport> = ["informed", "uninformed"]
        .iter()
        .enumerate()
        .map(|(k, &role)| {
            let s = profile.strategy(k);
            PlayerSupport {
                role,
                support: s.support().iter().map(|(r, w)| WeightedPoint { point: r.as_slice().to_vec(), weight: *w }).collect(),
                average: equilibrium::average_report(s).into_inner(),
            }
        })
        .collect();
    let avg = &players[0].average;
    let distance = ((avg[0] - p).powi(2) + (avg[1] - p).powi(2)).sqrt();
    let mut checks = Vec::new();
    for pl in &players {
        let total: f64 = pl.support.iter().map(|s| s.weight).sum();
        checks.push(Check::new(format!("{} weights sum to 1", pl.role), (total - 1.0).abs() <= 1e-9, format!("{total}")));
    }
    checks.push(Check::new("informed average is not (p, p)", distance > 0.0, format!("{distance}")));
    let csv = crate::report::csv_table(
        &["role", "x", "y", "weight"],
        players.iter().flat_map(|pl| {
            pl.support
                .iter()
                .map(|s| vec![pl.role.to_string(), format!("{}", s.point[0]), format!("{}", s.point[1]), format!("{}", s.weight)])
                .chain(std::iter::once(vec![
                    format!("{}_average", pl.role),
                    format!("{}", pl.average[0]),
                    format!("{}", pl.average[1]),
                    String::new(),
                ]))
                .collect::<Vec<_>>()
        }),
    );
    let outputs = Figure2Out {
        p,
        classification: class_name(equilibrium::classify(avg[0], p)),
        distance_to_truth: distance,
        players,
    };
    Ok(Outcome { outputs, csv: Some(csv), checks, seed: None })
}

/// One sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOut {
    /// Events.
    pub m: usize,
    /// Standard deviation of the total.
    pub sigma: f64,
    /// Global radius.
    pub gamma_theorem2: Option<f64>,
    /// Per-event radius (all events equal).
    pub gamma_per_event: Option<f64>,
    /// Competitiveness.
    pub condition3: bool,
    /// Normal-approximation utility of the template report.
    pub utility_truthful: f64,
    /// Best normal-approximation utility over constant reports.
    pub utility_max: f64,
}

/// Formula-level radius sweep over `m` for an iid template.
pub fn gamma_sweep(file: &ScenarioFile) -> Result<Outcome<Vec<SweepOut>>, LabError> {
    let spec = file.sweep.as_ref().ok_or_else(|| LabError::Schema("missing section `sweep`".into()))?;
    let event = scenario::joint(&spec.template).map_err(|e| LabError::Schema(format!("field `sweep.template`: {e}")))?;
    let ms: Vec<usize> = match (&spec.ms, spec.m_range) {
        (Some(ms), None) => ms.clone(),
        (None, Some(r)) => {
            if r.from < 2 || r.to < r.from || r.count == 0 {
                return Err(LabError::Schema("field `sweep.m_range`: need 2 <= from <= to and count >= 1".into()));
            }
            let mut v: Vec<usize> = edgeworth::log_space(r.from as f64, r.to as f64, r.count)
                .into_iter()
                .map(|x| x.round() as usize)
                .collect();
            v.dedup();
            v
        }
        _ => return Err(LabError::Schema("section `sweep`: give exactly one of `ms` and `m_range`".into())),
    };
    if ms.iter().any(|&m| m < 2) {
        return Err(LabError::Schema("field `sweep.ms`: every m must be at least 2".into()));
    }
    let r = spec.report.unwrap_or(event.marginal());
    let rows = edgeworth::gamma_sweep(&event, r, &ms, spec.d, spec.delta, spec.resolution)?;
    let outputs: Vec<SweepOut> = rows
        .iter()
        .map(|row| SweepOut {
            m: row.m,
            sigma: row.sigma,
            gamma_theorem2: row.gamma_theorem2,
            gamma_per_event: row.gamma_per_event,
            condition3: row.condition3.holds,
            utility_truthful: row.utility_truthful,
            utility_max: row.utility_max,
        })
        .collect();
    let csv = crate::report::csv_table(
        &["m", "sigma", "gamma_theorem2", "gamma_per_event", "condition3"],
        outputs.iter().map(|o| {
            vec![
                o.m.to_string(),
                format!("{}", o.sigma),
                crate::report::cell(o.gamma_theorem2),
                crate::report::cell(o.gamma_per_event),
                if o.condition3 { "pass" } else { "fail" }.to_string(),
            ]
        }),
    );
    Ok(Outcome { outputs, csv: Some(csv), checks: Vec::new(), seed: None })
}
