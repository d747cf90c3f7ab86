//! Budget-allocation bandits over the probability simplex.
//!
//! A learner splits a unit budget among `K` tasks every round; task `k`
//! completes with probability `F_k(x_k)` and then pays a random reward with
//! unknown mean `mu_k`. Only completed tasks reveal their rewards.
//!
//! * [`curves`]: budget-to-success curves (power, step, piecewise-linear);
//! * [`environment`]: the stochastic environment and exact expected rewards;
//! * [`oracle`]: maximizers of `sum_k m_k F_k(x_k)` over the simplex;
//! * [`ucb`]: the optimistic allocator;
//! * [`harness`]: seeded experiments, sweeps, fits and diagnostics;
//! * [`cli`]: the `bandit-sim` command line.

pub mod cli;
pub mod curves;
pub mod environment;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod ucb;

pub use curves::CurveSpec;
pub use environment::{Allocation, Feedback, FeedbackMode, Instance, RewardDistribution};
pub use error::{Error, Result};
pub use oracle::{Method, OracleResult};
pub use ucb::UcbState;
