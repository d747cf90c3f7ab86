//! Optimistic budget allocation from censored feedback.
//!
//! The allocator keeps, per task, the number of observed completions and the
//! sum of the rewards collected on them. Its index is the empirical mean of
//! those rewards (0 when nothing was observed) plus the bonus
//! `sqrt(log(2/delta) / (1 + completions))`, and each round it plays the
//! allocation that maximizes the index-weighted success probabilities.
//!
//! The state is a plain value: [`UcbState::update`] consumes the old state and
//! returns the next one, so trajectories can be replayed and snapshotted.

use serde::{Deserialize, Serialize};

use crate::curves::CurveSpec;
use crate::environment::{Allocation, Feedback};
use crate::error::{Error, Result};
use crate::oracle;

/// Upper clamp on the default confidence parameter.
pub const MAX_DEFAULT_DELTA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Snapshot")]
pub struct UcbState {
    delta: f64,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    round: u64,
}

/// Serialized form, validated on the way in.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    delta: f64,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    round: u64,
}

impl TryFrom<Snapshot> for UcbState {
    type Error = Error;

    fn try_from(s: Snapshot) -> Result<Self> {
        check_delta(s.delta)?;
        if s.counts.is_empty() || s.counts.len() != s.reward_sums.len() {
            return Err(Error::Contract(
                "snapshot counts and reward_sums must be non-empty and equally long".into(),
            ));
        }
        for (k, (&n, &sum)) in s.counts.iter().zip(&s.reward_sums).enumerate() {
            if n > s.round {
                return Err(Error::Contract(format!(
                    "task {k} has {n} completions after {} rounds",
                    s.round
                )));
            }
            if !(sum >= 0.0 && sum <= n as f64) {
                return Err(Error::Contract(format!(
                    "task {k} reward sum {sum} is outside [0, {n}]"
                )));
            }
        }
        Ok(UcbState {
            delta: s.delta,
            counts: s.counts,
            reward_sums: s.reward_sums,
            round: s.round,
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// `min(1/(K T)^2, 1/2)`: the horizon-tuned confidence level.
pub fn default_delta(k: usize, horizon: u64) -> f64 {
    let kt = k as f64 * horizon as f64;
    (1.0 / (kt * kt)).min(MAX_DEFAULT_DELTA)
}

impl UcbState {
    /// Fresh state for `k` tasks and horizon `horizon`.
    pub fn new(k: usize, horizon: u64, delta_override: Option<f64>) -> Result<Self> {
        if k == 0 || horizon == 0 {
            return Err(Error::Domain(
                "task count and horizon must be at least 1".into(),
            ));
        }
        let delta = match delta_override {
            Some(d) => {
                check_delta(d)?;
                d
            }
            None => default_delta(k, horizon),
        };
        Ok(UcbState {
            delta,
            counts: vec![0; k],
            reward_sums: vec![0.0; k],
            round: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// `log(2 / delta)`.
    pub fn log_term(&self) -> f64 {
        (2.0 / self.delta).ln()
    }

    /// Empirical mean of task `k`'s observed rewards, 0 before any completion.
    pub fn empirical_mean(&self, k: usize) -> f64 {
        match self.counts[k] {
            0 => 0.0,
            n => self.reward_sums[k] / n as f64,
        }
    }

    pub fn bonus(&self, k: usize) -> f64 {
        (self.log_term() / (1.0 + self.counts[k] as f64)).sqrt()
    }

    pub fn ucb_vector(&self) -> Vec<f64> {
        let log_term = self.log_term();
        self.counts
            .iter()
            .zip(&self.reward_sums)
            .map(|(&n, &sum)| {
                let mean = if n == 0 { 0.0 } else { sum / n as f64 };
                mean + (log_term / (1.0 + n as f64)).sqrt()
            })
            .collect()
    }

    /// The optimistic allocation for the next round.
    pub fn select(&self, curves: &[CurveSpec]) -> Result<Allocation> {
        if curves.len() != self.k() {
            return Err(Error::Config(format!(
                "allocator tracks {} tasks but {} curves were given",
                self.k(),
                curves.len()
            )));
        }
        Ok(oracle::maximize(&self.ucb_vector(), curves)?.allocation)
    }

    /// Folds one round of feedback into the statistics. Only the censored
    /// view (completion bits and masked rewards) is read.
    pub fn update(mut self, feedback: &Feedback) -> Result<Self> {
        let k = self.k();
        if feedback.completions.len() != k || feedback.censored_rewards.len() != k {
            return Err(Error::Contract(format!(
                "feedback must carry {k} completion bits and {k} censored rewards, got {} and {}",
                feedback.completions.len(),
                feedback.censored_rewards.len()
            )));
        }
        for (task, (&done, &g)) in feedback
            .completions
            .iter()
            .zip(&feedback.censored_rewards)
            .enumerate()
        {
            if !(0.0..=1.0).contains(&g) || (!done && g != 0.0) {
                return Err(Error::Contract(format!(
                    "censored reward {g} of task {task} is inconsistent with completion {done}"
                )));
            }
        }
        for (task, &done) in feedback.completions.iter().enumerate() {
            if done {
                self.counts[task] += 1;
                self.reward_sums[task] += feedback.censored_rewards[task];
            }
        }
        self.round += 1;
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Contract(format!("bad state snapshot: {e}")))
    }
}
