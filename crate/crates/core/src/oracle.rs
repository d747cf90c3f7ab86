//! Exact maximizers of `Phi_m(x) = sum_k m_k F_k(x_k)` over the simplex.
//!
//! Three solvers cover the supported curve families:
//!
//! * [`maximize_concave`] equalizes weighted marginal returns `m_k F'_k(x_k)`
//!   at a common water level found by bisection (power and concave
//!   piecewise-linear curves);
//! * [`maximize_step`] solves the 0/1 knapsack that step curves induce;
//! * [`maximize_grid`] enumerates a lattice of the simplex. It is exact only
//!   up to the mesh and serves as the fallback for mixed families and as a
//!   brute-force reference in tests.
//!
//! Ties are always resolved the same way: among maximizers, the
//! lexicographically smallest candidate in enumeration order wins.

use serde::{Deserialize, Serialize};

use crate::curves::{segment_slopes, CurveSpec};
use crate::environment::Allocation;
use crate::error::{Error, Result};

/// Lattice resolution used when [`maximize`] falls back to the grid.
pub const DEFAULT_GRID_RESOLUTION: usize = 200;

/// Largest number of lattice points [`maximize_grid`] will visit.
pub const MAX_GRID_POINTS: u128 = 100_000_000;

/// Largest task count for exhaustive step selection with unequal thresholds.
pub const MAX_STEP_ENUMERATION: usize = 25;

/// Water-filling stops once the budget residual is this small.
pub const BUDGET_RESIDUAL_TOL: f64 = 1e-12;

/// Bisection iteration cap for the water level.
pub const MAX_BISECTION_ITERS: usize = 200;

/// Slack allowed when checking that selected step thresholds fit the budget.
const KNAPSACK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    WaterFilling,
    StepSelect,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub allocation: Allocation,
    pub value: f64,
    pub method: Method,
}

fn validate(m: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("oracle needs at least one task".into()));
    }
    if m.len() != k {
        return Err(Error::Config(format!(
            "weight vector has {} entries but there are {k} curves",
            m.len()
        )));
    }
    if let Some((i, v)) = m
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::Domain(format!(
            "weights must be finite and non-negative, entry {i} is {v}"
        )));
    }
    Ok(())
}

fn objective(m: &[f64], curves: &[CurveSpec], x: &[f64]) -> f64 {
    m.iter()
        .zip(curves)
        .zip(x)
        .map(|((w, c), &xi)| w * c.eval_unchecked(xi))
        .sum()
}

fn finish(m: &[f64], curves: &[CurveSpec], x: Vec<f64>, method: Method) -> Result<OracleResult> {
    let allocation = Allocation::new(x)?;
    let value = objective(m, curves, allocation.weights());
    Ok(OracleResult {
        allocation,
        value,
        method,
    })
}

fn step_thresholds(curves: &[CurveSpec]) -> Option<Vec<f64>> {
    curves
        .iter()
        .map(|c| match c {
            CurveSpec::Step { threshold } => Some(*threshold),
            _ => None,
        })
        .collect()
}

/// Maximizes `Phi_m`, choosing the solver from the curve families. Mixed
/// families fall back to the grid at [`DEFAULT_GRID_RESOLUTION`].
pub fn maximize(m: &[f64], curves: &[CurveSpec]) -> Result<OracleResult> {
    validate(m, curves.len())?;
    if curves.iter().all(CurveSpec::is_smooth_concave) {
        maximize_concave(m, curves)
    } else if let Some(thresholds) = step_thresholds(curves) {
        maximize_step(m, &thresholds)
    } else {
        maximize_grid(m, curves, DEFAULT_GRID_RESOLUTION)
    }
}

/// Like [`maximize`] but refuses curve mixes that only the grid can handle.
pub fn maximize_exact(m: &[f64], curves: &[CurveSpec]) -> Result<OracleResult> {
    validate(m, curves.len())?;
    if curves.iter().all(CurveSpec::is_smooth_concave) {
        maximize_concave(m, curves)
    } else if let Some(thresholds) = step_thresholds(curves) {
        maximize_step(m, &thresholds)
    } else {
        let families: Vec<&str> = curves.iter().map(CurveSpec::family).collect();
        Err(Error::UnsupportedInstance(format!(
            "no exact oracle for curve mix [{}]; use the grid oracle (maximize_grid) instead",
            families.join(", ")
        )))
    }
}

/// Budget task `k` absorbs at water level `level`.
///
/// For piecewise curves the demand jumps where `level` equals a weighted
/// segment slope; `inclusive` selects the right end of that jump.
fn demand(curve: &CurveSpec, weight: f64, level: f64, inclusive: bool) -> f64 {
    if weight <= 0.0 {
        return 0.0;
    }
    match curve {
        CurveSpec::Power { exponent } => {
            let u = (weight * exponent / level).powf(1.0 / (1.0 - exponent));
            u.min(1.0)
        }
        CurveSpec::PiecewiseLinear { knots } => {
            let mut reach = 0.0;
            for (j, s) in segment_slopes(knots).into_iter().enumerate() {
                let take = if inclusive {
                    weight * s >= level
                } else {
                    weight * s > level
                };
                if !take {
                    break;
                }
                reach = knots[j + 1].0;
            }
            reach
        }
        CurveSpec::Step { .. } => unreachable!("step curves are not water-filled"),
    }
}

fn total_demand(m: &[f64], curves: &[CurveSpec], level: f64, inclusive: bool) -> f64 {
    curves
        .iter()
        .zip(m)
        .map(|(c, &w)| demand(c, w, level, inclusive))
        .sum()
}

/// Water-filling for concave, almost-everywhere differentiable curves.
///
/// Finds the level `lambda` at which the budgets `x_k(lambda)` solving
/// `m_k F'_k(x_k) = lambda` (capped at 1, zero when `m_k = 0`) sum to one.
/// Tasks with `m_k > 0` and power curves always receive positive budget.
/// All-zero weights yield the uniform allocation with value 0.
pub fn maximize_concave(m: &[f64], curves: &[CurveSpec]) -> Result<OracleResult> {
    validate(m, curves.len())?;
    if let Some(c) = curves.iter().find(|c| !c.is_smooth_concave()) {
        return Err(Error::UnsupportedInstance(format!(
            "water-filling needs concave differentiable curves, got a {} curve",
            c.family()
        )));
    }
    let k = curves.len();
    let w_max = m.iter().cloned().fold(0.0, f64::max);
    if w_max == 0.0 {
        return finish(m, curves, vec![1.0 / k as f64; k], Method::WaterFilling);
    }

    // Shared exponent: x_k is proportional to m_k^(1/(1-a)) in closed form.
    if let Some(a) = common_power_exponent(curves) {
        let p = 1.0 / (1.0 - a);
        let w: Vec<f64> = m.iter().map(|&mk| (mk / w_max).powf(p)).collect();
        let total: f64 = w.iter().sum();
        let x = w.into_iter().map(|wk| wk / total).collect();
        return finish(m, curves, x, Method::WaterFilling);
    }

    // Bracket the level: total demand is non-increasing in it.
    let w_min = m
        .iter()
        .cloned()
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let slope_at_one = curves
        .iter()
        .map(|c| c.derivative(1.0).unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min);
    let mut lo = w_min * slope_at_one * 1e-3;
    if !(lo > 0.0) {
        lo = w_max * 1e-12;
    }
    while total_demand(m, curves, lo, true) < 1.0 && lo > 1e-300 {
        lo *= 1e-3;
    }
    let mut hi = lo.max(f64::MIN_POSITIVE) * 2.0;
    while total_demand(m, curves, hi, false) > 1.0 {
        hi *= 2.0;
    }

    let mut exact = None;
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = total_demand(m, curves, mid, true);
        if (s - 1.0).abs() <= BUDGET_RESIDUAL_TOL
            && (total_demand(m, curves, mid, false) - 1.0).abs() <= BUDGET_RESIDUAL_TOL
        {
            exact = Some(mid);
            break;
        }
        if s > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let x = match exact {
        Some(level) => curves
            .iter()
            .zip(m)
            .map(|(c, &w)| demand(c, w, level, true))
            .collect(),
        None => {
            // Start from the strict demand above the level and hand out the
            // remaining budget along the jump, in task order.
            let upper: Vec<f64> = curves
                .iter()
                .zip(m)
                .map(|(c, &w)| demand(c, w, lo, true))
                .collect();
            let mut x: Vec<f64> = curves
                .iter()
                .zip(m)
                .map(|(c, &w)| demand(c, w, hi, false))
                .collect();
            let mut gap = 1.0 - x.iter().sum::<f64>();
            for (xk, uk) in x.iter_mut().zip(&upper) {
                if gap <= 0.0 {
                    break;
                }
                let add = (uk - *xk).max(0.0).min(gap);
                *xk += add;
                gap -= add;
            }
            // Every curve saturated (flat tails): park the rest where it fits.
            for xk in x.iter_mut() {
                if gap <= 0.0 {
                    break;
                }
                let add = (1.0 - *xk).min(gap);
                *xk += add;
                gap -= add;
            }
            x
        }
    };
    let total: f64 = x.iter().sum();
    let x = x.into_iter().map(|v| v / total).collect();
    finish(m, curves, x, Method::WaterFilling)
}

fn common_power_exponent(curves: &[CurveSpec]) -> Option<f64> {
    let mut shared = None;
    for c in curves {
        match (c, shared) {
            (CurveSpec::Power { exponent }, None) => shared = Some(*exponent),
            (CurveSpec::Power { exponent }, Some(a)) if *exponent == a => {}
            _ => return None,
        }
    }
    shared
}

/// Best subset of step-curve tasks whose thresholds fit in the budget.
///
/// Selected tasks receive exactly their threshold and the leftover budget
/// goes to the first selected task. Ties prefer including lower-indexed
/// tasks. Equal thresholds are solved by sorting; unequal ones by
/// branch-and-bound over at most [`MAX_STEP_ENUMERATION`] tasks.
pub fn maximize_step(m: &[f64], thresholds: &[f64]) -> Result<OracleResult> {
    validate(m, thresholds.len())?;
    let curves = thresholds
        .iter()
        .map(|&t| CurveSpec::step(t))
        .collect::<Result<Vec<_>>>()?;
    let k = thresholds.len();

    let selected = if thresholds.iter().all(|&t| t == thresholds[0]) {
        let fit = (((1.0 + KNAPSACK_TOL) / thresholds[0]).floor() as usize).min(k);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| m[j].total_cmp(&m[i]).then(i.cmp(&j)));
        let mut chosen = vec![false; k];
        for &i in &order[..fit] {
            chosen[i] = true;
        }
        chosen
    } else {
        if k > MAX_STEP_ENUMERATION {
            return Err(Error::Capacity(format!(
                "step selection with unequal thresholds supports at most {MAX_STEP_ENUMERATION} tasks, got {k}"
            )));
        }
        Knapsack::new(m, thresholds).solve()
    };

    let mut x = vec![0.0; k];
    let mut used = 0.0;
    for i in (0..k).filter(|&i| selected[i]) {
        x[i] = thresholds[i];
        used += thresholds[i];
    }
    if let Some(first) = selected.iter().position(|&s| s) {
        if used < 1.0 {
            x[first] += 1.0 - used;
        }
    } else {
        x[0] = 1.0;
    }
    finish(m, &curves, x, Method::StepSelect)
}

/// Depth-first 0/1 knapsack in task order, include branch first, pruned by
/// the fractional relaxation.
struct Knapsack<'a> {
    values: &'a [f64],
    weights: &'a [f64],
    /// Task indices by value density, best first.
    by_density: Vec<usize>,
    chosen: Vec<bool>,
    best: Vec<bool>,
    best_value: f64,
}

impl<'a> Knapsack<'a> {
    fn new(values: &'a [f64], weights: &'a [f64]) -> Self {
        let mut by_density: Vec<usize> = (0..values.len()).collect();
        by_density.sort_by(|&i, &j| {
            (values[j] / weights[j])
                .total_cmp(&(values[i] / weights[i]))
                .then(i.cmp(&j))
        });
        Knapsack {
            values,
            weights,
            by_density,
            chosen: vec![false; values.len()],
            best: vec![false; values.len()],
            best_value: f64::NEG_INFINITY,
        }
    }

    fn solve(mut self) -> Vec<bool> {
        self.visit(0, 0.0, 0.0);
        self.best
    }

    /// Fractional-knapsack upper bound on what tasks `depth..` can add.
    fn relaxation(&self, depth: usize, room: f64) -> f64 {
        let mut room = room;
        let mut bound = 0.0;
        for &i in &self.by_density {
            if i < depth {
                continue;
            }
            if self.weights[i] <= room {
                room -= self.weights[i];
                bound += self.values[i];
            } else {
                bound += self.values[i] * room / self.weights[i];
                break;
            }
        }
        bound
    }

    fn visit(&mut self, depth: usize, used: f64, value: f64) {
        if depth == self.values.len() {
            if value > self.best_value {
                self.best_value = value;
                self.best.copy_from_slice(&self.chosen);
            }
            return;
        }
        let room = 1.0 + KNAPSACK_TOL - used;
        if value + self.relaxation(depth, room) < self.best_value - KNAPSACK_TOL {
            return;
        }
        if self.weights[depth] <= room {
            self.chosen[depth] = true;
            self.visit(
                depth + 1,
                used + self.weights[depth],
                value + self.values[depth],
            );
            self.chosen[depth] = false;
        }
        self.visit(depth + 1, used, value);
    }
}

/// Number of lattice points `(i_1, ..., i_k)` with `sum i = resolution`,
/// saturating just above [`MAX_GRID_POINTS`].
fn composition_count(k: usize, resolution: usize) -> u128 {
    // C(resolution + k - 1, k - 1), built incrementally; each prefix is an
    // integer binomial so the division is exact.
    let mut count: u128 = 1;
    for j in 1..k as u128 {
        count = count * (resolution as u128 + j) / j;
        if count > MAX_GRID_POINTS {
            return MAX_GRID_POINTS + 1;
        }
    }
    count
}

/// Brute force over the lattice `{i / resolution : sum i = resolution}`.
pub fn maximize_grid(m: &[f64], curves: &[CurveSpec], resolution: usize) -> Result<OracleResult> {
    validate(m, curves.len())?;
    if resolution < 2 {
        return Err(Error::Domain(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let k = curves.len();
    let count = composition_count(k, resolution);
    if count > MAX_GRID_POINTS {
        return Err(Error::Capacity(format!(
            "grid with {k} tasks at resolution {resolution} exceeds {MAX_GRID_POINTS} points"
        )));
    }
    let table: Vec<Vec<f64>> = curves
        .iter()
        .zip(m)
        .map(|(c, &w)| {
            (0..=resolution)
                .map(|i| w * c.eval_unchecked(i as f64 / resolution as f64))
                .collect()
        })
        .collect();

    let mut current = vec![0usize; k];
    let mut best = vec![0usize; k];
    let mut best_value = f64::NEG_INFINITY;
    grid_walk(
        &table,
        0,
        resolution,
        0.0,
        &mut current,
        &mut best,
        &mut best_value,
    );

    let x = best.iter().map(|&i| i as f64 / resolution as f64).collect();
    finish(m, curves, x, Method::Grid)
}

fn grid_walk(
    table: &[Vec<f64>],
    task: usize,
    remaining: usize,
    partial: f64,
    current: &mut [usize],
    best: &mut [usize],
    best_value: &mut f64,
) {
    if task + 1 == table.len() {
        current[task] = remaining;
        let value = partial + table[task][remaining];
        if value > *best_value {
            *best_value = value;
            best.copy_from_slice(current);
        }
        return;
    }
    for i in 0..=remaining {
        current[task] = i;
        grid_walk(
            table,
            task + 1,
            remaining - i,
            partial + table[task][i],
            current,
            best,
            best_value,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powers(a: &[f64]) -> Vec<CurveSpec> {
        a.iter().map(|&e| CurveSpec::power(e).unwrap()).collect()
    }

    fn steps(t: &[f64]) -> Vec<CurveSpec> {
        t.iter().map(|&e| CurveSpec::step(e).unwrap()).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn symmetric_power_pair() {
        let r = maximize(&[1.0, 1.0], &powers(&[0.5, 0.5])).unwrap();
        assert_eq!(r.method, Method::WaterFilling);
        assert!(close(r.allocation.weights(), &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn kkt_closed_form_pair() {
        let r = maximize(&[0.8, 0.2], &powers(&[0.5, 0.5])).unwrap();
        assert!(close(
            r.allocation.weights(),
            &[16.0 / 17.0, 1.0 / 17.0],
            1e-12
        ));
        assert!((r.value - 0.68f64.sqrt()).abs() < 1e-12);
        assert!((r.value - 0.8246).abs() < 1e-4);
        let g = maximize_grid(&[0.8, 0.2], &powers(&[0.5, 0.5]), 10_000).unwrap();
        assert!((g.value - r.value).abs() < 1e-6);
        assert!(g.value <= r.value + 1e-12);
    }

    #[test]
    fn concave_examples() {
        let r = maximize_concave(&[1.0; 3], &powers(&[0.5; 3])).unwrap();
        assert!(close(r.allocation.weights(), &[1.0 / 3.0; 3], 1e-12));
        let r = maximize_concave(&[1.0, 0.0], &powers(&[0.5, 0.5])).unwrap();
        assert_eq!(r.allocation.weights(), &[1.0, 0.0]);
        assert_eq!(r.value, 1.0);
        let r = maximize_concave(&[0.0, 0.0], &powers(&[0.5, 0.5])).unwrap();
        assert_eq!(r.allocation.weights(), &[0.5, 0.5]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn bisection_matches_closed_form_on_distinct_exponents() {
        // x_k = (m_k a_k / lambda)^(1/(1-a_k)); check stationarity directly.
        let curves = powers(&[0.3, 0.5, 0.7]);
        let m = [0.9, 0.4, 0.6];
        let r = maximize_concave(&m, &curves).unwrap();
        let x = r.allocation.weights();
        let levels: Vec<f64> = (0..3)
            .map(|k| m[k] * curves[k].derivative(x[k]).unwrap())
            .collect();
        for l in &levels {
            assert!((l - levels[0]).abs() / levels[0] < 1e-9, "{levels:?}");
        }
        let g = maximize_grid(&m, &curves, 500).unwrap();
        assert!(r.value >= g.value - 1e-9);
    }

    #[test]
    fn water_filling_on_piecewise_curves() {
        let curves = vec![
            CurveSpec::piecewise(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]).unwrap(),
            CurveSpec::piecewise(vec![(0.0, 0.0), (0.25, 0.5), (1.0, 0.8)]).unwrap(),
        ];
        // weighted slopes: task0 1.6, 0.4; task1 2.0, 0.4 -> fill 0.25 of task1
        // then 0.5 of task0, the final 0.25 sits on a tie at 0.4.
        let r = maximize_concave(&[1.0, 1.0], &curves).unwrap();
        let g = maximize_grid(&[1.0, 1.0], &curves, 400).unwrap();
        assert!(r.value >= g.value - 1e-9, "{} vs {}", r.value, g.value);
        assert!((r.value - (0.8 + 0.5 + 0.1)).abs() < 1e-9);
    }

    #[test]
    fn mixed_power_and_piecewise() {
        let curves = vec![
            CurveSpec::power(0.4).unwrap(),
            CurveSpec::piecewise(vec![(0.0, 0.0), (0.3, 0.6), (1.0, 0.9)]).unwrap(),
        ];
        for m in [[1.0, 1.0], [0.3, 0.9], [0.9, 0.2]] {
            let r = maximize(&m, &curves).unwrap();
            assert_eq!(r.method, Method::WaterFilling);
            let g = maximize_grid(&m, &curves, 2000).unwrap();
            assert!(
                r.value >= g.value - 1e-9,
                "{m:?}: {} vs {}",
                r.value,
                g.value
            );
        }
    }

    #[test]
    fn step_examples() {
        let r = maximize(&[0.6, 0.5, 0.5, 0.6], &steps(&[0.5; 4])).unwrap();
        assert_eq!(r.method, Method::StepSelect);
        assert_eq!(r.allocation.weights(), &[0.5, 0.0, 0.0, 0.5]);
        assert!((r.value - 1.2).abs() < 1e-15);

        let r = maximize_step(&[0.3, 0.9], &[1.0, 1.0]).unwrap();
        assert_eq!(r.allocation.weights(), &[0.0, 1.0]);
        assert_eq!(r.value, 0.9);
    }

    #[test]
    fn step_pairs_pick_better_task_of_each_pair() {
        let k = 3;
        let m = [0.5, 0.52, 0.53, 0.5, 0.5, 0.51];
        let r = maximize_step(&m, &[1.0 / k as f64; 6]).unwrap();
        let picked: Vec<usize> = (0..6).filter(|&i| r.allocation[i] > 0.0).collect();
        assert_eq!(picked, vec![1, 2, 5]);
        assert!((r.value - (0.52 + 0.53 + 0.51)).abs() < 1e-12);
    }

    #[test]
    fn step_ties_prefer_low_indices() {
        let r = maximize_step(&[1.0; 4], &[0.5; 4]).unwrap();
        assert_eq!(r.allocation.weights(), &[0.5, 0.5, 0.0, 0.0]);
        let r = maximize_step(&[1.0, 1.0, 1.0], &[0.5, 0.4, 0.5]).unwrap();
        assert_eq!(r.allocation.weights(), &[0.6, 0.4, 0.0]);
    }

    #[test]
    fn step_slack_goes_to_first_selected() {
        let r = maximize_step(&[0.1, 0.9, 0.8], &[0.9, 0.3, 0.3]).unwrap();
        assert!(close(r.allocation.weights(), &[0.0, 0.7, 0.3], 1e-15));
        assert!((r.value - 1.7).abs() < 1e-12);
    }

    #[test]
    fn step_capacity_guard() {
        let t: Vec<f64> = (0..26).map(|i| 0.1 + 0.001 * i as f64).collect();
        assert!(matches!(
            maximize_step(&[1.0; 26], &t),
            Err(Error::Capacity(_))
        ));
        // equal thresholds sort instead and have no limit
        assert!(maximize_step(&[1.0; 40], &[0.1; 40]).is_ok());
    }

    #[test]
    fn grid_examples() {
        let r = maximize_grid(&[0.7], &powers(&[0.3]), 10).unwrap();
        assert_eq!(r.allocation.weights(), &[1.0]);
        assert!((r.value - 0.7).abs() < 1e-15);
        let r = maximize_grid(&[1.0, 1.0], &steps(&[0.5, 0.5]), 4).unwrap();
        assert_eq!(r.allocation.weights(), &[0.5, 0.5]);
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn grid_guards() {
        assert!(matches!(
            maximize_grid(&[1.0; 8], &powers(&[0.5; 8]), 1000),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            maximize_grid(&[1.0; 2], &powers(&[0.5; 2]), 1),
            Err(Error::Domain(_))
        ));
        assert_eq!(composition_count(2, 4), 5);
        assert_eq!(composition_count(3, 500), 125_751);
    }

    #[test]
    fn mixed_families_use_grid() {
        let curves = vec![
            CurveSpec::power(0.5).unwrap(),
            CurveSpec::step(0.5).unwrap(),
        ];
        let r = maximize(&[1.0, 1.0], &curves).unwrap();
        assert_eq!(r.method, Method::Grid);
        assert!(close(r.allocation.weights(), &[0.5, 0.5], 1e-12));
        assert!(matches!(
            maximize_exact(&[1.0, 1.0], &curves),
            Err(Error::UnsupportedInstance(_))
        ));
        let many: Vec<CurveSpec> = (0..10).map(|i| curves[i % 2].clone()).collect();
        assert!(matches!(
            maximize(&[1.0; 10], &many),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            maximize(&[-0.1, 1.0], &powers(&[0.5, 0.5])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            maximize(&[f64::NAN, 1.0], &powers(&[0.5, 0.5])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(maximize(&[], &[]), Err(Error::Domain(_))));
        assert!(matches!(
            maximize(&[1.0], &powers(&[0.5, 0.5])),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            maximize_concave(&[1.0, 1.0], &steps(&[0.5, 0.5])),
            Err(Error::UnsupportedInstance(_))
        ));
    }

    #[test]
    fn interior_maximizer_for_positive_weights() {
        let r = maximize(&[0.05, 2.0, 0.3], &powers(&[0.6, 0.3, 0.8])).unwrap();
        assert!(r.allocation.weights().iter().all(|&x| x > 0.0));
    }

    fn phi(m: &[f64], curves: &[CurveSpec], x: &[f64]) -> f64 {
        m.iter()
            .zip(curves)
            .zip(x)
            .map(|((w, c), &v)| w * c.eval_unchecked(v))
            .sum()
    }

    fn power_instance() -> impl Strategy<Value = (Vec<f64>, Vec<CurveSpec>)> {
        (2usize..=3).prop_flat_map(|k| {
            (
                proptest::collection::vec(0.1f64..=1.0, k),
                proptest::collection::vec(0.2f64..=0.8, k),
            )
                .prop_map(|(m, a)| (m, powers(&a)))
        })
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_never_loses_to_grid((m, curves) in power_instance()) {
            let exact = maximize(&m, &curves).unwrap();
            let grid = maximize_grid(&m, &curves, 500).unwrap();
            prop_assert!(exact.value >= grid.value - 1e-9);
            let x = exact.allocation.weights();
            prop_assert!(x.iter().all(|&v| v > 0.0));
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn grid_sandwich((m, curves) in power_instance()) {
            let res = 100;
            let exact = maximize_concave(&m, &curves).unwrap();
            let grid = maximize_grid(&m, &curves, res).unwrap();
            let h = 1.0 / res as f64;
            let slope = m
                .iter()
                .zip(&curves)
                .map(|(w, c)| w * c.derivative(h).unwrap())
                .fold(0.0, f64::max);
            let mesh = slope * m.len() as f64 / res as f64;
            prop_assert!(exact.value - grid.value <= mesh, "{} > {}", exact.value - grid.value, mesh);
        }

        #[test]
        fn argmax_is_scale_invariant((m, curves) in power_instance(), c in 0.01f64..100.0) {
            let a = maximize(&m, &curves).unwrap();
            let scaled: Vec<f64> = m.iter().map(|w| c * w).collect();
            let b = maximize(&scaled, &curves).unwrap();
            prop_assert!(close(a.allocation.weights(), b.allocation.weights(), 1e-9));
        }

        #[test]
        fn step_argmax_is_scale_invariant(
            m in proptest::collection::vec(1u32..=20, 1..=6),
            picks in proptest::collection::vec(0usize..3, 6),
            e in -8i32..=8,
        ) {
            let levels = [0.5, 1.0 / 3.0, 0.25];
            let t: Vec<f64> = (0..m.len()).map(|i| levels[picks[i]]).collect();
            let m: Vec<f64> = m.iter().map(|&v| v as f64).collect();
            let scaled: Vec<f64> = m.iter().map(|w| 2f64.powi(e) * w).collect();
            let a = maximize_step(&m, &t).unwrap();
            let b = maximize_step(&scaled, &t).unwrap();
            // integer weights times a power of two keep every tie exact
            prop_assert_eq!(a.allocation.weights(), b.allocation.weights());
        }

        #[test]
        fn loss_is_quadratic_in_weight_error(
            (m, curves) in power_instance(),
            dir in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let k = m.len();
            let norm = dir[..k].iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(norm > 0.1);
            let best = maximize_concave(&m, &curves).unwrap().value;
            let ratio = |s: f64| {
                let mt: Vec<f64> = m.iter().zip(&dir).map(|(w, d)| w + s * d / norm).collect();
                let xt = maximize_concave(&mt, &curves).unwrap();
                (best - phi(&m, &curves, xt.allocation.weights())) / (s * s)
            };
            let (coarse, mid, fine) = (ratio(5e-2), ratio(1e-2), ratio(1e-3));
            prop_assert!(coarse >= -1e-9 && mid >= -1e-7 && fine >= -1e-5);
            prop_assert!(fine <= 10.0 * coarse + 1e-6, "{fine} vs {coarse}");
            prop_assert!(mid <= 10.0 * coarse + 1e-6, "{mid} vs {coarse}");
        }
    }
}
