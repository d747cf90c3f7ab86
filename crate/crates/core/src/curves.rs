//! Budget-to-success curves.
//!
//! A curve maps the fraction of budget invested in a task to the probability
//! that the task completes. Three families are supported:
//!
//! * `Power`: `x^a` with `a` in `(0, 1)`, concave with diminishing returns;
//! * `Step`: the indicator of `[threshold, 1]`;
//! * `PiecewiseLinear`: linear interpolation of non-decreasing knots on `[0, 1]`.
//!
//! Curves are validated on construction and immutable afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs within this distance of `[0, 1]` are clamped instead of rejected.
pub const DOMAIN_TOL: f64 = 1e-12;

/// A budget fraction counts as reaching a step threshold when it is within
/// this distance below it (simplex renormalization can shave off an ulp).
pub const STEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub enum CurveSpec {
    Power { exponent: f64 },
    Step { threshold: f64 },
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawCurve {
    Power { a: f64 },
    Step { threshold: f64 },
    Piecewise { knots: Vec<[f64; 2]> },
}

impl TryFrom<RawCurve> for CurveSpec {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        match raw {
            RawCurve::Power { a } => CurveSpec::power(a),
            RawCurve::Step { threshold } => CurveSpec::step(threshold),
            RawCurve::Piecewise { knots } => {
                CurveSpec::piecewise(knots.into_iter().map(|[x, y]| (x, y)).collect())
            }
        }
    }
}

impl From<CurveSpec> for RawCurve {
    fn from(c: CurveSpec) -> Self {
        match c {
            CurveSpec::Power { exponent } => RawCurve::Power { a: exponent },
            CurveSpec::Step { threshold } => RawCurve::Step { threshold },
            CurveSpec::PiecewiseLinear { knots } => RawCurve::Piecewise {
                knots: knots.into_iter().map(|(x, y)| [x, y]).collect(),
            },
        }
    }
}

impl CurveSpec {
    /// `x^a`; `a` must lie strictly inside `(0, 1)`.
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::Domain(format!(
                "power exponent must lie in (0, 1), got {exponent}"
            )));
        }
        Ok(CurveSpec::Power { exponent })
    }

    /// Indicator of `[threshold, 1]`; `threshold` must lie in `(0, 1]`.
    pub fn step(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Domain(format!(
                "step threshold must lie in (0, 1], got {threshold}"
            )));
        }
        Ok(CurveSpec::Step { threshold })
    }

    /// Linear interpolation through `knots`. The first knot must sit at
    /// `x = 0`, the last at `x = 1`, abscissae strictly increasing and
    /// ordinates non-decreasing inside `[0, 1]`.
    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Domain(
                "piecewise curve needs at least two knots".into(),
            ));
        }
        if knots.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Domain("piecewise knots must be finite".into()));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::Domain(
                "piecewise knots must start at x = 0 and end at x = 1".into(),
            ));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Domain(format!(
                    "piecewise knot abscissae must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Domain(format!(
                    "piecewise knot ordinates must be non-decreasing ({} then {})",
                    w[0].1, w[1].1
                )));
            }
        }
        if knots.iter().any(|&(_, y)| !(0.0..=1.0).contains(&y)) {
            return Err(Error::Domain(
                "piecewise knot ordinates must lie in [0, 1]".into(),
            ));
        }
        Ok(CurveSpec::PiecewiseLinear { knots })
    }

    /// Success probability at budget fraction `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let x = clamp_unit(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// `eval` for an `x` already known to lie in `[0, 1]`.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match self {
            CurveSpec::Power { exponent } => x.powf(*exponent),
            CurveSpec::Step { threshold } => {
                if x >= threshold - STEP_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            CurveSpec::PiecewiseLinear { knots } => {
                let ((x0, y0), (x1, y1)) = segment_at(knots, x);
                let y = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
                y.clamp(y0, y1)
            }
        }
    }

    /// Derivative at `x` in `(0, 1]`. Piecewise curves report the slope of
    /// the segment to the right of a knot (the last segment at `x = 1`).
    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self {
            CurveSpec::Step { .. } => Err(Error::UnsupportedOperation(
                "step curves have no derivative".into(),
            )),
            CurveSpec::Power { exponent } => {
                let x = clamp_unit(x)?;
                if x <= 0.0 {
                    return Err(Error::Domain(
                        "power curve derivative is unbounded at x = 0".into(),
                    ));
                }
                Ok(exponent * x.powf(exponent - 1.0))
            }
            CurveSpec::PiecewiseLinear { knots } => {
                let x = clamp_unit(x)?;
                if x <= 0.0 {
                    return Err(Error::Domain(format!("derivative requires x > 0, got {x}")));
                }
                let ((x0, y0), (x1, y1)) = segment_at(knots, x);
                Ok((y1 - y0) / (x1 - x0))
            }
        }
    }

    pub fn is_concave(&self) -> bool {
        match self {
            CurveSpec::Power { .. } => true,
            CurveSpec::Step { .. } => false,
            CurveSpec::PiecewiseLinear { knots } => {
                let slopes = segment_slopes(knots);
                slopes.windows(2).all(|w| w[1] <= w[0] + 1e-12)
            }
        }
    }

    /// Concave and differentiable almost everywhere: the curves the
    /// water-filling oracle accepts.
    pub fn is_smooth_concave(&self) -> bool {
        !matches!(self, CurveSpec::Step { .. }) && self.is_concave()
    }

    pub fn family(&self) -> &'static str {
        match self {
            CurveSpec::Power { .. } => "power",
            CurveSpec::Step { .. } => "step",
            CurveSpec::PiecewiseLinear { .. } => "piecewise",
        }
    }
}

/// Slopes of consecutive segments of a piecewise curve.
pub(crate) fn segment_slopes(knots: &[(f64, f64)]) -> Vec<f64> {
    knots
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect()
}

/// Segment containing `x`; a knot belongs to the segment on its right,
/// except `x = 1` which belongs to the last segment.
fn segment_at(knots: &[(f64, f64)], x: f64) -> ((f64, f64), (f64, f64)) {
    let last = knots.len() - 2;
    let i = knots
        .partition_point(|&(kx, _)| kx <= x)
        .saturating_sub(1)
        .min(last);
    (knots[i], knots[i + 1])
}

pub(crate) fn clamp_unit(x: f64) -> Result<f64> {
    if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&x) {
        return Err(Error::Domain(format!(
            "budget fraction {x} lies outside [0, 1]"
        )));
    }
    Ok(x.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(CurveSpec::power(0.5).unwrap().eval(0.25).unwrap(), 0.5);
        assert_eq!(CurveSpec::step(0.5).unwrap().eval(0.5).unwrap(), 1.0);
        assert_eq!(CurveSpec::power(0.3).unwrap().eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn step_threshold_tolerance() {
        let s = CurveSpec::step(0.5).unwrap();
        assert_eq!(s.eval(0.5 - 5e-13).unwrap(), 1.0);
        assert_eq!(s.eval(0.5 - 1e-9).unwrap(), 0.0);
        let third = CurveSpec::step(1.0 / 3.0).unwrap();
        let x = 1.0 - 2.0 / 3.0;
        assert_eq!(third.eval(x).unwrap(), 1.0);
    }

    #[test]
    fn eval_domain() {
        let c = CurveSpec::power(0.5).unwrap();
        assert_eq!(c.eval(1.0 + 1e-13).unwrap(), 1.0);
        assert_eq!(c.eval(-1e-13).unwrap(), 0.0);
        let err = c.eval(1.5).unwrap_err();
        assert!(
            matches!(&err, Error::Domain(m) if m.contains("1.5")),
            "{err}"
        );
        assert!(c.eval(-0.1).is_err());
        assert!(c.eval(f64::NAN).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = CurveSpec::power(0.5).unwrap();
        assert_eq!(p.derivative(0.25).unwrap(), 1.0);
        assert_eq!(p.derivative(1.0).unwrap(), 0.5);
        let id = CurveSpec::piecewise(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(id.derivative(0.7).unwrap(), 1.0);
    }

    #[test]
    fn derivative_errors() {
        assert!(matches!(
            CurveSpec::step(0.5).unwrap().derivative(0.5),
            Err(Error::UnsupportedOperation(_))
        ));
        assert!(matches!(
            CurveSpec::power(0.5).unwrap().derivative(0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn piecewise_right_slope_at_knots() {
        let c = CurveSpec::piecewise(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]).unwrap();
        assert!((c.derivative(0.5).unwrap() - 0.4).abs() < 1e-12);
        assert!((c.derivative(0.25).unwrap() - 1.6).abs() < 1e-12);
        assert!((c.derivative(1.0).unwrap() - 0.4).abs() < 1e-12);
        assert!((c.eval(0.5).unwrap() - 0.8).abs() < 1e-15);
        assert!((c.eval(0.75).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn concavity_examples() {
        assert!(CurveSpec::power(0.9).unwrap().is_concave());
        assert!(!CurveSpec::step(0.5).unwrap().is_concave());
        assert!(
            CurveSpec::piecewise(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)])
                .unwrap()
                .is_concave()
        );
        assert!(
            !CurveSpec::piecewise(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 1.0)])
                .unwrap()
                .is_concave()
        );
    }

    #[test]
    fn constructor_validation() {
        assert!(CurveSpec::power(0.0).is_err());
        assert!(CurveSpec::power(1.0).is_err());
        assert!(CurveSpec::step(0.0).is_err());
        assert!(CurveSpec::step(1.0).is_ok());
        assert!(CurveSpec::piecewise(vec![(0.0, 0.0)]).is_err());
        assert!(CurveSpec::piecewise(vec![(0.1, 0.0), (1.0, 1.0)]).is_err());
        assert!(CurveSpec::piecewise(vec![(0.0, 0.5), (1.0, 0.2)]).is_err());
        assert!(CurveSpec::piecewise(vec![(0.0, 0.0), (0.0, 0.5), (1.0, 1.0)]).is_err());
        assert!(CurveSpec::piecewise(vec![(0.0, 0.0), (1.0, 1.2)]).is_err());
    }

    #[test]
    fn json_forms() {
        let p: CurveSpec = serde_json::from_str(r#"{"type":"power","a":0.5}"#).unwrap();
        assert_eq!(p, CurveSpec::Power { exponent: 0.5 });
        let s: CurveSpec = serde_json::from_str(r#"{"type":"step","threshold":0.25}"#).unwrap();
        assert_eq!(s, CurveSpec::Step { threshold: 0.25 });
        let l: CurveSpec =
            serde_json::from_str(r#"{"type":"piecewise","knots":[[0,0],[1,1]]}"#).unwrap();
        assert_eq!(
            l,
            CurveSpec::PiecewiseLinear {
                knots: vec![(0.0, 0.0), (1.0, 1.0)]
            }
        );
        assert!(serde_json::from_str::<CurveSpec>(r#"{"type":"power","a":1.5}"#).is_err());
        let back = serde_json::to_string(&l).unwrap();
        assert_eq!(
            back,
            r#"{"type":"piecewise","knots":[[0.0,0.0],[1.0,1.0]]}"#
        );
    }

    fn any_curve() -> impl Strategy<Value = CurveSpec> {
        prop_oneof![
            (0.01f64..0.99).prop_map(|a| CurveSpec::power(a).unwrap()),
            (0.01f64..=1.0).prop_map(|t| CurveSpec::step(t).unwrap()),
            (proptest::collection::vec((0.001f64..1.0, 0.0f64..1.0), 1..6)).prop_map(|pts| {
                let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                xs.dedup();
                let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut knots = vec![(0.0, 0.0)];
                for (x, y) in xs.into_iter().zip(ys) {
                    if x < 1.0 {
                        knots.push((x, y));
                    }
                }
                knots.push((1.0, 1.0));
                CurveSpec::piecewise(knots).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn monotone_and_in_range(c in any_curve(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (flo, fhi) = (c.eval(lo).unwrap(), c.eval(hi).unwrap());
            prop_assert!(flo <= fhi);
            prop_assert!((0.0..=1.0).contains(&flo) && (0.0..=1.0).contains(&fhi));
        }

        #[test]
        fn power_derivative_matches_central_difference(a in 0.05f64..0.95, x in 0.1f64..0.9) {
            let c = CurveSpec::power(a).unwrap();
            let h = 1e-6;
            let fd = (c.eval(x + h).unwrap() - c.eval(x - h).unwrap()) / (2.0 * h);
            let d = c.derivative(x).unwrap();
            prop_assert!(((fd - d) / d).abs() < 1e-4);
        }

        #[test]
        fn concave_curves_satisfy_jensen(
            c in any_curve(), x in 0.01f64..=1.0, y in 0.01f64..=1.0, t in 0.0f64..=1.0
        ) {
            if c.is_concave() {
                let mid = c.eval(t * x + (1.0 - t) * y).unwrap();
                let chord = t * c.eval(x).unwrap() + (1.0 - t) * c.eval(y).unwrap();
                prop_assert!(mid >= chord - 1e-10);
            }
        }
    }
}
