//! Coverage checks for the two high-probability events behind the regret
//! guarantees.
//!
//! * Confidence coverage: every running mean of observed rewards stays within
//!   `sqrt(log(2/delta) / (2 n))` of the true mean. Fails with probability at
//!   most `K T delta`.
//! * Completion concentration: once the cumulative success probability of a
//!   task reaches `100 log(T)^2`, at least half of it has materialized as
//!   completions. Fails with probability at most `K / T`.
//!
//! The monitors see the true means, which the allocator never does.

use serde::Serialize;

use super::{RunResult, TraceRound};
use crate::curves::CurveSpec;
use crate::ucb::UcbState;

/// Tracks the first round at which an empirical mean leaves its radius.
#[derive(Debug, Clone)]
pub struct GoodEventMonitor {
    means: Vec<f64>,
    log_term: f64,
    violation: Option<u64>,
}

impl GoodEventMonitor {
    pub fn new(means: Vec<f64>, delta: f64) -> Self {
        Self {
            means,
            log_term: (2.0 / delta).ln(),
            violation: None,
        }
    }

    /// Checks the running statistics after `round`. Tasks never completed
    /// are skipped: their index is the initial one, which covers any mean.
    pub fn observe(&mut self, state: &UcbState, round: u64) {
        self.observe_stats(state.counts(), state.reward_sums(), round);
    }

    fn observe_stats(&mut self, counts: &[u64], sums: &[f64], round: u64) {
        if self.violation.is_some() {
            return;
        }
        for ((&n, &sum), &mu) in counts.iter().zip(sums).zip(&self.means) {
            if n == 0 {
                continue;
            }
            let n = n as f64;
            if (sum / n - mu).abs() > (self.log_term / (2.0 * n)).sqrt() {
                self.violation = Some(round);
                return;
            }
        }
    }

    pub fn violation(&self) -> Option<u64> {
        self.violation
    }

    /// Replays a recorded trajectory and returns the first violating round.
    pub fn replay(trace: &[TraceRound], means: Vec<f64>, delta: f64) -> Option<u64> {
        let k = means.len();
        let mut monitor = Self::new(means, delta);
        let mut counts = vec![0u64; k];
        let mut sums = vec![0.0; k];
        for (t, round) in trace.iter().enumerate() {
            for task in 0..k {
                if round.completions[task] {
                    counts[task] += 1;
                    sums[task] += round.censored_rewards[task];
                }
            }
            monitor.observe_stats(&counts, &sums, t as u64 + 1);
        }
        monitor.violation()
    }
}

/// `100 log(T)^2`: the success mass after which completions must keep up.
pub fn completion_threshold(horizon: u64) -> f64 {
    let l = (horizon as f64).ln();
    100.0 * l * l
}

/// Tracks whether observed completions fall below half the expected number
/// once the expected number is large.
#[derive(Debug, Clone)]
pub struct CompletionMonitor {
    threshold: f64,
    mass: Vec<f64>,
    completions: Vec<u64>,
    violation: Option<u64>,
}

impl CompletionMonitor {
    pub fn new(k: usize, horizon: u64) -> Self {
        Self {
            threshold: completion_threshold(horizon),
            mass: vec![0.0; k],
            completions: vec![0; k],
            violation: None,
        }
    }

    /// Records that `task` succeeded with probability `p` in `round`.
    pub fn observe(&mut self, task: usize, p: f64, completed: bool, round: u64) {
        self.mass[task] += p;
        self.completions[task] += completed as u64;
        let mass = self.mass[task];
        if self.violation.is_none()
            && mass >= self.threshold
            && (self.completions[task] as f64) < mass / 2.0
        {
            self.violation = Some(round);
        }
    }

    pub fn violation(&self) -> Option<u64> {
        self.violation
    }

    pub fn replay(trace: &[TraceRound], curves: &[CurveSpec], horizon: u64) -> Option<u64> {
        let mut monitor = Self::new(curves.len(), horizon);
        for (t, round) in trace.iter().enumerate() {
            for (task, curve) in curves.iter().enumerate() {
                let p = curve.eval_unchecked(round.allocation[task]);
                monitor.observe(task, p, round.completions[task], t as u64 + 1);
            }
        }
        monitor.violation()
    }
}

/// Observed frequency of runs with a violation against its theoretical cap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub name: String,
    pub runs: usize,
    pub violating_runs: usize,
    pub frequency: f64,
    /// Probability bound from the theory, capped at 1.
    pub bound: f64,
    /// `bound + 3 sqrt(bound (1 - bound) / runs)`.
    pub tolerance: f64,
    pub pass: bool,
}

impl ViolationReport {
    fn new(name: &str, runs: usize, violating_runs: usize, raw_bound: f64) -> Self {
        let bound = raw_bound.min(1.0);
        let frequency = if runs == 0 {
            0.0
        } else {
            violating_runs as f64 / runs as f64
        };
        let tolerance = if runs == 0 {
            bound
        } else {
            bound + 3.0 * (bound * (1.0 - bound) / runs as f64).sqrt()
        };
        ViolationReport {
            name: name.to_string(),
            runs,
            violating_runs,
            frequency,
            bound,
            tolerance,
            pass: frequency <= tolerance,
        }
    }

    pub fn is_vacuous(&self) -> bool {
        self.bound >= 1.0
    }

    pub fn bound_label(&self) -> String {
        if self.is_vacuous() {
            "bound ≥ 1 (vacuous)".to_string()
        } else {
            format!("{:.6}", self.bound)
        }
    }
}

/// Confidence coverage over a batch of runs on a `k`-task instance.
pub fn good_event_diagnostic(runs: &[RunResult], k: usize) -> ViolationReport {
    let bound = runs
        .first()
        .map_or(0.0, |r| k as f64 * r.horizon as f64 * r.delta);
    let violating = runs
        .iter()
        .filter(|r| r.diagnostics.good_event_violation.is_some())
        .count();
    ViolationReport::new("good_event", runs.len(), violating, bound)
}

/// Completion concentration over a batch of runs on a `k`-task instance.
pub fn completion_count_diagnostic(runs: &[RunResult], k: usize) -> ViolationReport {
    let bound = runs.first().map_or(0.0, |r| k as f64 / r.horizon as f64);
    let violating = runs
        .iter()
        .filter(|r| r.diagnostics.completion_violation.is_some())
        .count();
    ViolationReport::new("completion_count", runs.len(), violating, bound)
}
