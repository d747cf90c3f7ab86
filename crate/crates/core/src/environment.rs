//! The simulated budget-allocation environment.
//!
//! Each round the learner splits a unit budget over `K` tasks. Task `k`
//! completes with probability `F_k(x_k)` and, independently, carries a
//! `[0, 1]`-valued reward `G_k`. The learner collects the rewards of completed
//! tasks and, in censored mode, observes nothing else.

use serde::{Deserialize, Serialize};

use crate::curves::CurveSpec;
use crate::error::{Error, Result};
use crate::oracle;
use crate::rng::{SimRng, Stream};

/// Allowed deviation of an allocation's sum from 1 before it is rejected.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Law of a task's per-round reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReward", into = "RawReward")]
pub enum RewardDistribution {
    Bernoulli { mean: f64 },
    PointMass { value: f64 },
    DiscreteOnUnit { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawReward {
    Bernoulli { mean: f64 },
    Point { value: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl TryFrom<RawReward> for RewardDistribution {
    type Error = Error;

    fn try_from(raw: RawReward) -> Result<Self> {
        match raw {
            RawReward::Bernoulli { mean } => RewardDistribution::bernoulli(mean),
            RawReward::Point { value } => RewardDistribution::point_mass(value),
            RawReward::Discrete { values, probs } => RewardDistribution::discrete(values, probs),
        }
    }
}

impl From<RewardDistribution> for RawReward {
    fn from(r: RewardDistribution) -> Self {
        match r {
            RewardDistribution::Bernoulli { mean } => RawReward::Bernoulli { mean },
            RewardDistribution::PointMass { value } => RawReward::Point { value },
            RewardDistribution::DiscreteOnUnit { values, probs } => {
                RawReward::Discrete { values, probs }
            }
        }
    }
}

fn check_unit(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{what} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

impl RewardDistribution {
    pub fn bernoulli(mean: f64) -> Result<Self> {
        check_unit("bernoulli mean", mean)?;
        Ok(RewardDistribution::Bernoulli { mean })
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        check_unit("point mass value", value)?;
        Ok(RewardDistribution::PointMass { value })
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::Domain(
                "discrete reward needs equally many values and probabilities".into(),
            ));
        }
        for &v in &values {
            check_unit("discrete reward value", v)?;
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Domain(
                "discrete reward probabilities must be non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "discrete reward probabilities sum to {total}, expected 1"
            )));
        }
        Ok(RewardDistribution::DiscreteOnUnit { values, probs })
    }

    pub fn mean(&self) -> f64 {
        match self {
            RewardDistribution::Bernoulli { mean } => *mean,
            RewardDistribution::PointMass { value } => *value,
            RewardDistribution::DiscreteOnUnit { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| v * p)
                .sum::<f64>()
                .clamp(0.0, 1.0),
        }
    }

    /// Inverse-CDF sample from a uniform `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            RewardDistribution::Bernoulli { mean } => {
                if u < *mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardDistribution::PointMass { value } => *value,
            RewardDistribution::DiscreteOnUnit { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // u landed in the rounding gap above the last cumulative sum
                let last = probs
                    .iter()
                    .rposition(|&p| p > 0.0)
                    .unwrap_or(values.len() - 1);
                values[last]
            }
        }
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    /// Validates `weights` and renormalizes away sums within `SIMPLEX_TOL` of 1.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain(
                "allocation must have at least one entry".into(),
            ));
        }
        for (k, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() || *w < -SIMPLEX_TOL || *w > 1.0 + SIMPLEX_TOL {
                return Err(Error::Domain(format!(
                    "allocation entry {k} = {w} lies outside [0, 1]"
                )));
            }
            *w = w.clamp(0.0, 1.0);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!(
                "allocation sums to {total}, expected 1"
            )));
        }
        if total != 1.0 {
            for w in &mut weights {
                *w = (*w / total).min(1.0);
            }
        }
        Ok(Allocation(weights))
    }

    /// The equal split over `k` tasks.
    pub fn uniform(k: usize) -> Self {
        Allocation(vec![1.0 / k as f64; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Allocation {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// A complete problem: one curve and one reward law per task.
///
/// Each task also carries the identifier of the random substream it draws
/// from. It defaults to the task's position; permuting tasks together with
/// their stream ids reproduces the original draws task by task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    curves: Vec<CurveSpec>,
    rewards: Vec<RewardDistribution>,
    streams: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    curve: CurveSpec,
    reward: RewardDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stream: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    tasks: Vec<RawTask>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        let streams = raw
            .tasks
            .iter()
            .enumerate()
            .map(|(k, t)| t.stream.unwrap_or(k as u64))
            .collect();
        let (curves, rewards) = raw.tasks.into_iter().map(|t| (t.curve, t.reward)).unzip();
        Instance::with_streams(curves, rewards, streams)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        let tasks = inst
            .curves
            .into_iter()
            .zip(inst.rewards)
            .zip(inst.streams)
            .enumerate()
            .map(|(k, ((curve, reward), stream))| RawTask {
                curve,
                reward,
                stream: (stream != k as u64).then_some(stream),
            })
            .collect();
        RawInstance { tasks }
    }
}

impl Instance {
    pub fn new(curves: Vec<CurveSpec>, rewards: Vec<RewardDistribution>) -> Result<Self> {
        let streams = (0..curves.len() as u64).collect();
        Self::with_streams(curves, rewards, streams)
    }

    pub fn with_streams(
        curves: Vec<CurveSpec>,
        rewards: Vec<RewardDistribution>,
        streams: Vec<u64>,
    ) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::Config("instance needs at least one task".into()));
        }
        if curves.len() != rewards.len() || curves.len() != streams.len() {
            return Err(Error::Config(format!(
                "instance has {} curves, {} reward laws and {} streams",
                curves.len(),
                rewards.len(),
                streams.len()
            )));
        }
        Ok(Instance {
            curves,
            rewards,
            streams,
        })
    }

    /// Number of tasks.
    pub fn k(&self) -> usize {
        self.curves.len()
    }

    pub fn curves(&self) -> &[CurveSpec] {
        &self.curves
    }

    pub fn rewards(&self) -> &[RewardDistribution] {
        &self.rewards
    }

    pub fn streams(&self) -> &[u64] {
        &self.streams
    }

    pub fn means(&self) -> Vec<f64> {
        self.rewards.iter().map(RewardDistribution::mean).collect()
    }

    /// Reorders tasks: task `j` of the result is task `order[j]` of `self`,
    /// stream id included.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k()];
        if order.len() != self.k()
            || order
                .iter()
                .any(|&i| i >= self.k() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::Config(
                "permutation does not match the task count".into(),
            ));
        }
        Ok(Instance {
            curves: order.iter().map(|&i| self.curves[i].clone()).collect(),
            rewards: order.iter().map(|&i| self.rewards[i].clone()).collect(),
            streams: order.iter().map(|&i| self.streams[i]).collect(),
        })
    }

    fn check_dim(&self, allocation: &Allocation) -> Result<()> {
        if allocation.len() != self.k() {
            return Err(Error::Config(format!(
                "allocation has {} entries but the instance has {} tasks",
                allocation.len(),
                self.k()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    Censored,
    Full,
}

/// What one round reveals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub completions: Vec<bool>,
    /// Reward of task `k` if it completed, else 0.
    pub censored_rewards: Vec<f64>,
    /// Every task's reward; present only in full-feedback mode.
    pub full_rewards: Option<Vec<f64>>,
    /// Sum of the censored rewards: what the learner actually earned.
    pub realized_gain: f64,
}

/// Plays one round: draws completions and rewards for `round` from their
/// substreams and returns the view selected by `mode`.
pub fn step(
    instance: &Instance,
    allocation: &Allocation,
    mode: FeedbackMode,
    rng: &SimRng,
    round: u64,
) -> Result<Feedback> {
    instance.check_dim(allocation)?;
    let k = instance.k();
    let mut completions = Vec::with_capacity(k);
    let mut censored = Vec::with_capacity(k);
    let mut full = Vec::with_capacity(k);
    for task in 0..k {
        let stream = instance.streams[task];
        let p = instance.curves[task].eval_unchecked(allocation[task]);
        let done = rng.uniform(Stream::Completions, stream, round) < p;
        let g = instance.rewards[task].sample(rng.uniform(Stream::Rewards, stream, round));
        completions.push(done);
        censored.push(if done { g } else { 0.0 });
        full.push(g);
    }
    let realized_gain = censored.iter().sum();
    Ok(Feedback {
        completions,
        censored_rewards: censored,
        full_rewards: (mode == FeedbackMode::Full).then_some(full),
        realized_gain,
    })
}

/// `<mu, F(x)>`: the expected per-round gain of `allocation`.
pub fn expected_reward(instance: &Instance, allocation: &Allocation) -> Result<f64> {
    instance.check_dim(allocation)?;
    Ok(instance
        .rewards
        .iter()
        .zip(&instance.curves)
        .zip(allocation.weights())
        .map(|((r, c), &x)| r.mean() * c.eval_unchecked(x))
        .sum())
}

/// Best allocation for the true means and its expected per-round gain.
pub fn optimal_value(instance: &Instance) -> Result<(Allocation, f64)> {
    let res = oracle::maximize_exact(&instance.means(), instance.curves())?;
    Ok((res.allocation, res.value))
}
