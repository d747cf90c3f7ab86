//! Seeded experiments: regret trajectories, instance generators, horizon
//! sweeps and the concentration diagnostics that accompany them.
//!
//! Regret is the pseudo-regret `sum_t [opt - <mu, F(X_t)>]`, computed from the
//! exact optimum of the instance, so every increment is non-negative.

mod diagnostics;
mod fit;
mod report;

pub use diagnostics::{
    completion_count_diagnostic, completion_threshold, good_event_diagnostic, CompletionMonitor,
    GoodEventMonitor, ViolationReport,
};
pub use fit::{fit_scaling, ScalingFit};
pub use report::{
    format_float, read_results_csv, read_summary_csv, write_results_csv, write_summary_csv,
    ResultRow, SummaryRow, RESULTS_HEADER, SUMMARY_HEADER,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::CurveSpec;
use crate::environment::{self, expected_reward, FeedbackMode, Instance, RewardDistribution};
use crate::error::{Error, Result};
use crate::rng::{hash_words, SimRng, Stream};
use crate::ucb::UcbState;

/// Smallest horizon the hard-instance construction is defined for.
pub const MIN_HARD_HORIZON: u64 = 16;

/// Per-round regret increments below this are treated as oracle failures.
const NEGATIVE_GAP_TOL: f64 = 1e-9;

/// The `2K`-task hard family: `K` pairs of step curves at `1/K`, one task
/// per pair with mean `1/2 + 1/sqrt(T)` and the other with mean `1/2`.
///
/// `pattern[i] = 1` makes the first task of pair `i` the better one, `2` the
/// second. Without a pattern one is drawn uniformly from `seed`.
pub fn make_hard_instance(
    pairs: usize,
    horizon: u64,
    pattern: Option<&[u8]>,
    seed: Option<u64>,
) -> Result<Instance> {
    if pairs == 0 {
        return Err(Error::Domain(
            "hard instance needs at least one pair".into(),
        ));
    }
    if horizon < MIN_HARD_HORIZON {
        return Err(Error::Domain(format!(
            "hard instances require T >= {MIN_HARD_HORIZON} (the lower-bound construction assumes it), got {horizon}"
        )));
    }
    let pattern: Vec<u8> = match pattern {
        Some(p) => {
            if p.len() != pairs || p.iter().any(|&j| j != 1 && j != 2) {
                return Err(Error::Config(format!(
                    "pattern must list {pairs} entries from {{1, 2}}, got {p:?}"
                )));
            }
            p.to_vec()
        }
        None => {
            let rng = SimRng::new(seed.unwrap_or(0));
            (0..pairs as u64)
                .map(|i| {
                    if rng.uniform(Stream::Harness, i, 0) < 0.5 {
                        1
                    } else {
                        2
                    }
                })
                .collect()
        }
    };
    let good = 0.5 + 1.0 / (horizon as f64).sqrt();
    let step = CurveSpec::step(1.0 / pairs as f64)?;
    let mut rewards = Vec::with_capacity(2 * pairs);
    for &j in &pattern {
        let (first, second) = if j == 1 { (good, 0.5) } else { (0.5, good) };
        rewards.push(RewardDistribution::bernoulli(first)?);
        rewards.push(RewardDistribution::bernoulli(second)?);
    }
    Instance::new(vec![step; 2 * pairs], rewards)
}

/// Power curves `x^{a_k}` with Bernoulli rewards of strictly positive mean.
pub fn make_power_instance(exponents: &[f64], means: &[f64]) -> Result<Instance> {
    if exponents.is_empty() || exponents.len() != means.len() {
        return Err(Error::Config(format!(
            "power instance needs equally many exponents and means, got {} and {}",
            exponents.len(),
            means.len()
        )));
    }
    if let Some(k) = means.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Assumption(format!(
            "Assumption 1 requires every mean to be non-zero, task {k} has mean {}",
            means[k]
        )));
    }
    let curves = exponents
        .iter()
        .map(|&a| CurveSpec::power(a))
        .collect::<Result<Vec<_>>>()?;
    let rewards = means
        .iter()
        .map(|&m| RewardDistribution::bernoulli(m))
        .collect::<Result<Vec<_>>>()?;
    Instance::new(curves, rewards)
}

/// Where an experiment's instance comes from. Hard instances depend on the
/// horizon (and, without a pattern, on the replication seed), so they are
/// rebuilt per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceSource {
    Fixed {
        instance: Instance,
    },
    Hard {
        pairs: usize,
        #[serde(default)]
        pattern: Option<Vec<u8>>,
    },
    Power {
        exponents: Vec<f64>,
        means: Vec<f64>,
    },
}

impl InstanceSource {
    pub fn build(&self, horizon: u64, seed: u64) -> Result<Instance> {
        match self {
            InstanceSource::Fixed { instance } => Ok(instance.clone()),
            InstanceSource::Hard { pairs, pattern } => {
                make_hard_instance(*pairs, horizon, pattern.as_deref(), Some(seed))
            }
            InstanceSource::Power { exponents, means } => make_power_instance(exponents, means),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            InstanceSource::Fixed { .. } => "fixed",
            InstanceSource::Hard { .. } => "hard",
            InstanceSource::Power { .. } => "power",
        }
    }

    /// Number of tasks of the instances this source produces.
    pub fn task_count(&self) -> usize {
        match self {
            InstanceSource::Fixed { instance } => instance.k(),
            InstanceSource::Hard { pairs, .. } => 2 * pairs,
            InstanceSource::Power { exponents, .. } => exponents.len(),
        }
    }
}

/// Powers of two up to `horizon`, plus `horizon` itself.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = (0..64)
        .map(|i| 1u64 << i)
        .take_while(|&c| c < horizon)
        .collect();
    cps.push(horizon);
    cps
}

fn check_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<()> {
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "checkpoints must be strictly ascending".into(),
        ));
    }
    if checkpoints.iter().any(|&c| c == 0 || c > horizon) {
        return Err(Error::Config(format!(
            "checkpoints must lie in [1, {horizon}]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub round: u64,
    pub cumulative_regret: f64,
    pub realized_gain_sum: f64,
    /// Whether a confidence violation occurred at or before this round.
    pub good_event_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// First round at which an empirical mean left its confidence radius.
    pub good_event_violation: Option<u64>,
    /// First round at which completions fell below half the success mass
    /// once that mass passed `100 log(T)^2`.
    pub completion_violation: Option<u64>,
    pub completion_counts: Vec<u64>,
    pub allocated_budget: Vec<f64>,
}

/// Everything observable about one round, kept when tracing is on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRound {
    pub allocation: Vec<f64>,
    pub completions: Vec<bool>,
    pub censored_rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub horizon: u64,
    pub delta: f64,
    pub trajectory: Vec<Checkpoint>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRound>>,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.trajectory.last().map_or(0.0, |c| c.cumulative_regret)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub delta_override: Option<f64>,
    /// Rounds at which to record the trajectory; powers of two plus `T` if empty.
    pub checkpoints: Vec<u64>,
    pub record_trace: bool,
}

/// One censored-feedback trajectory of the allocator with default options.
pub fn run_once(
    instance: &Instance,
    horizon: u64,
    delta_override: Option<f64>,
    seed: u64,
) -> Result<RunResult> {
    run_with(
        instance,
        horizon,
        &RunOptions {
            delta_override,
            ..Default::default()
        },
        seed,
    )
}

pub fn run_with(
    instance: &Instance,
    horizon: u64,
    opts: &RunOptions,
    seed: u64,
) -> Result<RunResult> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let checkpoints = if opts.checkpoints.is_empty() {
        default_checkpoints(horizon)
    } else {
        check_checkpoints(&opts.checkpoints, horizon)?;
        opts.checkpoints.clone()
    };
    let (_, optimum) = environment::optimal_value(instance)?;
    let k = instance.k();
    let curves = instance.curves();
    let rng = SimRng::new(seed);

    let mut state = UcbState::new(k, horizon, opts.delta_override)?;
    let mut good_event = GoodEventMonitor::new(instance.means(), state.delta());
    let mut completion = CompletionMonitor::new(k, horizon);
    let mut budget = vec![0.0; k];
    let mut regret = 0.0;
    let mut gained = 0.0;
    let mut trajectory = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = checkpoints.iter().peekable();
    let mut trace = opts
        .record_trace
        .then(|| Vec::with_capacity(horizon as usize));

    for round in 1..=horizon {
        let allocation = state.select(curves)?;
        let gap = optimum - expected_reward(instance, &allocation)?;
        if gap < -NEGATIVE_GAP_TOL {
            return Err(Error::OracleSuboptimal(format!(
                "round {round}: played allocation beats the optimum by {}",
                -gap
            )));
        }
        regret += gap.max(0.0);

        let feedback =
            environment::step(instance, &allocation, FeedbackMode::Censored, &rng, round)?;
        gained += feedback.realized_gain;
        for (task, &x) in allocation.weights().iter().enumerate() {
            budget[task] += x;
            completion.observe(
                task,
                curves[task].eval_unchecked(x),
                feedback.completions[task],
                round,
            );
        }
        state = state.update(&feedback)?;
        good_event.observe(&state, round);

        if let Some(t) = trace.as_mut() {
            t.push(TraceRound {
                allocation: allocation.into_inner(),
                completions: feedback.completions,
                censored_rewards: feedback.censored_rewards,
            });
        }
        if next_checkpoint.peek() == Some(&&round) {
            next_checkpoint.next();
            trajectory.push(Checkpoint {
                round,
                cumulative_regret: regret,
                realized_gain_sum: gained,
                good_event_violated: good_event.violation().is_some(),
            });
        }
    }

    Ok(RunResult {
        seed,
        horizon,
        delta: state.delta(),
        trajectory,
        diagnostics: Diagnostics {
            good_event_violation: good_event.violation(),
            completion_violation: completion.violation(),
            completion_counts: state.counts().to_vec(),
            allocated_budget: budget,
        },
        trace,
    })
}

/// Seed of replication `replication` in the cell for `horizon`.
pub fn cell_seed(master_seed: u64, horizon: u64, replication: u64) -> u64 {
    hash_words(master_seed, &[horizon, replication])
}

/// Maps `f` over `items` on `jobs` worker threads, preserving input order.
pub(crate) fn par_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Send + Sync,
{
    if jobs <= 1 {
        return items.into_iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

/// A batch of independent trajectories at one horizon.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub source: InstanceSource,
    pub horizon: u64,
    pub replications: usize,
    pub seed: u64,
    pub options: RunOptions,
}

impl Experiment {
    /// Runs all replications; results are ordered by replication index
    /// whatever the number of worker threads.
    pub fn run(&self, jobs: usize) -> Result<Vec<RunResult>> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let cells: Vec<u64> = (0..self.replications as u64).collect();
        par_map(cells, jobs, |r| {
            let seed = cell_seed(self.seed, self.horizon, r);
            let instance = self.source.build(self.horizon, seed)?;
            run_with(&instance, self.horizon, &self.options, seed)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub horizon: u64,
    pub replications: usize,
    pub mean_regret: f64,
    pub stderr: f64,
}

/// Mean and standard error of the mean (0 for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Final-regret statistics per horizon. Every `(horizon, replication)` cell
/// gets its own derived seed, so rows do not depend on scheduling.
pub fn run_sweep(
    source: &InstanceSource,
    horizons: &[u64],
    replications: usize,
    master_seed: u64,
    delta_override: Option<f64>,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "horizons must be non-empty and strictly ascending".into(),
        ));
    }
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    let cells: Vec<(u64, u64)> = horizons
        .iter()
        .flat_map(|&t| (0..replications as u64).map(move |r| (t, r)))
        .collect();
    let finals = par_map(cells, jobs, |(t, r)| {
        let seed = cell_seed(master_seed, t, r);
        let instance = source.build(t, seed)?;
        let opts = RunOptions {
            delta_override,
            checkpoints: vec![t],
            record_trace: false,
        };
        Ok(run_with(&instance, t, &opts, seed)?.final_regret())
    })?;
    Ok(horizons
        .iter()
        .zip(finals.chunks(replications))
        .map(|(&horizon, regrets)| {
            let (mean_regret, stderr) = mean_stderr(regrets);
            SweepRow {
                horizon,
                replications,
                mean_regret,
                stderr,
            }
        })
        .collect())
}
