//! Log-log least squares for regret-versus-horizon sweeps.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ln(regret)` on `ln(T)`.
///
/// Needs at least three points with distinct horizons and positive regret.
/// Zero-regret rows should be dropped by the caller.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(t, r)) = points.iter().find(|&&(t, r)| !(t > 0.0) || !(r > 0.0)) {
        return Err(Error::Fit(format!(
            "horizons and regrets must be positive, got ({t}, {r})"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("horizons must not all be equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy <= 0.0 {
        1.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_data() {
        let f = fit_scaling(&[(100.0, 10.0), (400.0, 20.0), (1600.0, 40.0)]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data() {
        let f = fit_scaling(&[(100.0, 7.0), (400.0, 7.0), (1600.0, 7.0)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn squared_log_data() {
        // Independent value: numpy.polyfit(log(2**k), log(k**2), 1) for
        // k = 10..16 gives slope 0.22510900647262874.
        let pts: Vec<(f64, f64)> = (10..=16).map(|k| (2f64.powi(k), (k * k) as f64)).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!(
            (f.slope - 0.225_109_006_472_628_7).abs() < 1e-12,
            "{}",
            f.slope
        );
        let pts: Vec<(f64, f64)> = (10..=16)
            .map(|k| {
                let t = 2f64.powi(k);
                (t, 5.0 * t.ln().powi(2))
            })
            .collect();
        assert!((fit_scaling(&pts).unwrap().slope - 0.225_109_006_472_628_6).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        assert!(fit_scaling(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_scaling(&[(1.0, 1.0), (2.0, 0.0), (4.0, 1.0)]).is_err());
        assert!(fit_scaling(&[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]).is_err());
    }
}
