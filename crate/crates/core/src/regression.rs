//! Power-law and through-origin least-squares fits.
//!
//! Power laws `y = a·x^b` are fitted by ordinary least squares in log space,
//! with no retransformation bias correction. The coefficient of determination
//! is always computed in linear space against the centered total sum of
//! squares, for both fit kinds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POWER_PAIRS: usize = 3;
pub const MIN_SLOPE_PAIRS: usize = 2;

/// Result of fitting `y = a·x^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub a: f64,
    pub b: f64,
    pub cd: f64,
    pub n: usize,
}

impl PowerFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * x.powf(self.b)
    }
}

/// Result of fitting `B_s = ρ·V` through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub rho: f64,
    pub cd: f64,
    pub n: usize,
    pub excluded_ids: Vec<String>,
}

fn check_positive(pairs: &[(f64, f64)]) -> Result<()> {
    for (i, &(x, y)) in pairs.iter().enumerate() {
        if !(x.is_finite() && y.is_finite() && x > 0.0 && y > 0.0) {
            return Err(Error::Fit(format!(
                "pair {i} ({x}, {y}) has a non-positive or non-finite coordinate"
            )));
        }
    }
    Ok(())
}

/// `1 − SS_res / SS_tot`, with `SS_tot` centered on the observed mean.
pub fn coefficient_of_determination(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::Fit(format!(
            "length mismatch: {} observed vs {} predicted",
            observed.len(),
            predicted.len()
        )));
    }
    if observed.is_empty() {
        return Err(Error::Fit("no observations".into()));
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    let ss_res: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum();
    if ss_res == 0.0 {
        return Ok(1.0);
    }
    if ss_tot == 0.0 {
        return Err(Error::Fit("all observed values are equal".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Fits `y = a·x^b` by least squares on `(ln x, ln y)`.
pub fn fit_power(pairs: &[(f64, f64)]) -> Result<PowerFit> {
    if pairs.len() < MIN_POWER_PAIRS {
        return Err(Error::Fit(format!(
            "power fit needs at least {MIN_POWER_PAIRS} pairs, got {}",
            pairs.len()
        )));
    }
    check_positive(pairs)?;

    let n = pairs.len() as f64;
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_lx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_ly = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxx, sxy) = logs.iter().fold((0.0, 0.0), |(sxx, sxy), &(lx, ly)| {
        let dx = lx - mean_lx;
        (sxx + dx * dx, sxy + dx * (ly - mean_ly))
    });
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate x: all values equal".into()));
    }
    let b = sxy / sxx;
    let a = (mean_ly - b * mean_lx).exp();

    let observed: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let predicted: Vec<f64> = pairs.iter().map(|&(x, _)| a * x.powf(b)).collect();
    let cd = coefficient_of_determination(&observed, &predicted)?;
    Ok(PowerFit {
        a,
        b,
        cd,
        n: pairs.len(),
    })
}

/// Least-squares slope through the origin: `ρ = Σ v·bs / Σ v²`.
pub fn fit_slope_origin(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < MIN_SLOPE_PAIRS {
        return Err(Error::Fit(format!(
            "slope fit needs at least {MIN_SLOPE_PAIRS} pairs, got {}",
            pairs.len()
        )));
    }
    check_positive(pairs)?;
    let (svb, svv) = pairs
        .iter()
        .fold((0.0, 0.0), |(svb, svv), &(v, bs)| (svb + v * bs, svv + v * v));
    let rho = svb / svv;

    let observed: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let predicted: Vec<f64> = pairs.iter().map(|&(v, _)| rho * v).collect();
    let cd = coefficient_of_determination(&observed, &predicted)?;
    Ok(SlopeFit {
        rho,
        cd,
        n: pairs.len(),
        excluded_ids: Vec::new(),
    })
}

/// Direct regression of `B_t = α·V^β` on (V, B_t) pairs; the estimator used
/// before the stem-biomass separation.
pub fn fit_direct(pairs: &[(f64, f64)]) -> Result<PowerFit> {
    fit_power(pairs)
}
