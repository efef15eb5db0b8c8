//! Wood-density references and the choice of ρ for recombination.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{DensityMeasurement, SpeciesKey};
use crate::error::{Error, Result};

/// Per-species summary of measured wood densities, t m⁻³.
/// `sd` is the population standard deviation (divisor n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReference {
    pub species: SpeciesKey,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn summarize_density(
    measurements: &[DensityMeasurement],
    species: &SpeciesKey,
) -> Result<DensityReference> {
    let values: Vec<f64> = measurements
        .iter()
        .filter(|m| &m.species == species)
        .map(|m| m.density)
        .collect();
    if values.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no density measurements for `{species}`"
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DensityReference {
        species: species.clone(),
        // Summation rounding can push the mean a hair outside [min, max].
        mean: mean.clamp(min, max),
        sd: var.sqrt(),
        min,
        max,
        n: values.len(),
    })
}

/// Summaries for every species present, keyed by species.
pub fn summarize_all(measurements: &[DensityMeasurement]) -> BTreeMap<SpeciesKey, DensityReference> {
    let mut keys: Vec<&SpeciesKey> = measurements.iter().map(|m| &m.species).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|k| summarize_density(measurements, k).ok().map(|r| (k.clone(), r)))
        .collect()
}

/// Percentage error of a fitted ρ against a reference ρ, unrounded.
pub fn rho_error(fitted: f64, reference: f64) -> Result<f64> {
    if reference <= 0.0 || !reference.is_finite() {
        return Err(Error::InvalidInput(format!(
            "reference density must be positive, got {reference}"
        )));
    }
    Ok(100.0 * (fitted - reference) / reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoStrategy {
    /// Slope fitted over all (V, B_s) pairs.
    FitIncluding,
    /// Slope fitted after restricted-zone exclusion.
    FitExcluding,
    /// Wood basic density from a reference source.
    Wbd,
    AvgWbdIncluding,
    AvgWbdExcluding,
}

impl RhoStrategy {
    pub const ALL: [RhoStrategy; 5] = [
        RhoStrategy::FitIncluding,
        RhoStrategy::FitExcluding,
        RhoStrategy::Wbd,
        RhoStrategy::AvgWbdIncluding,
        RhoStrategy::AvgWbdExcluding,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RhoStrategy::FitIncluding => "fit_including",
            RhoStrategy::FitExcluding => "fit_excluding",
            RhoStrategy::Wbd => "wbd",
            RhoStrategy::AvgWbdIncluding => "avg_wbd_including",
            RhoStrategy::AvgWbdExcluding => "avg_wbd_excluding",
        }
    }
}

impl fmt::Display for RhoStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RhoStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RhoStrategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown rho strategy `{s}`")))
    }
}

/// Operand values a strategy may draw on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RhoOperands {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_including: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_excluding: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wbd: Option<f64>,
}

/// A selected ρ together with the operands it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoChoice {
    pub value: f64,
    pub strategy: RhoStrategy,
    /// Only the operands the strategy consumed.
    pub inputs_used: RhoOperands,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    let x = v.ok_or(Error::MissingOperand(name))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {x}")))
    }
}

pub fn choose_rho(strategy: RhoStrategy, operands: RhoOperands) -> Result<RhoChoice> {
    let mut used = RhoOperands::default();
    let value = match strategy {
        RhoStrategy::FitIncluding => {
            let x = need(operands.fit_including, "fit_including")?;
            used.fit_including = Some(x);
            x
        }
        RhoStrategy::FitExcluding => {
            let x = need(operands.fit_excluding, "fit_excluding")?;
            used.fit_excluding = Some(x);
            x
        }
        RhoStrategy::Wbd => {
            let x = need(operands.wbd, "wbd")?;
            used.wbd = Some(x);
            x
        }
        RhoStrategy::AvgWbdIncluding => {
            let w = need(operands.wbd, "wbd")?;
            let f = need(operands.fit_including, "fit_including")?;
            used.wbd = Some(w);
            used.fit_including = Some(f);
            (w + f) / 2.0
        }
        RhoStrategy::AvgWbdExcluding => {
            let w = need(operands.wbd, "wbd")?;
            let f = need(operands.fit_excluding, "fit_excluding")?;
            used.wbd = Some(w);
            used.fit_excluding = Some(f);
            (w + f) / 2.0
        }
    };
    Ok(RhoChoice {
        value,
        strategy,
        inputs_used: used,
    })
}
