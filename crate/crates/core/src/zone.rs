//! Restricted-zone screening.
//!
//! Two physical bounds define the zone: stem biomass cannot exceed a fixed
//! fraction of total biomass, and stem biomass per unit volume cannot exceed
//! a maximum wood density. Observations strictly beyond a bound are inside
//! the zone; a ratio exactly on the bound is not.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::regression::{fit_power, fit_slope_origin, PowerFit, SlopeFit, MIN_POWER_PAIRS, MIN_SLOPE_PAIRS};

pub const DEFAULT_MAX_WOOD_DENSITY: f64 = 0.7;
pub const DEFAULT_MAX_STEM_FRACTION: f64 = 0.8;
/// Implied densities below this are reported but never excluded.
pub const LOW_DENSITY_WARNING: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedZone {
    max_wood_density: f64,
    max_stem_fraction: f64,
}

impl Default for RestrictedZone {
    fn default() -> Self {
        RestrictedZone {
            max_wood_density: DEFAULT_MAX_WOOD_DENSITY,
            max_stem_fraction: DEFAULT_MAX_STEM_FRACTION,
        }
    }
}

impl RestrictedZone {
    pub fn new(max_wood_density: f64, max_stem_fraction: f64) -> Result<Self> {
        if !(max_wood_density > 0.0 && max_wood_density <= 1.0) {
            return Err(Error::Config(format!(
                "max wood density must lie in (0, 1], got {max_wood_density}"
            )));
        }
        if !(max_stem_fraction > 0.0 && max_stem_fraction < 1.0) {
            return Err(Error::Config(format!(
                "max stem fraction must lie in (0, 1), got {max_stem_fraction}"
            )));
        }
        Ok(RestrictedZone {
            max_wood_density,
            max_stem_fraction,
        })
    }

    pub fn max_wood_density(&self) -> f64 {
        self.max_wood_density
    }

    pub fn max_stem_fraction(&self) -> f64 {
        self.max_stem_fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relationship {
    StemTotal,
    VolumeStem,
}

impl Relationship {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relationship::StemTotal => "stem_total",
            Relationship::VolumeStem => "volume_stem",
        }
    }
}

/// Classification of one observation against one bound. `implied_quantity`
/// is B_s/B_t for [`Relationship::StemTotal`] and B_s/V (t m⁻³) for
/// [`Relationship::VolumeStem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneVerdict {
    pub plot_id: String,
    pub relationship: Relationship,
    pub inside_zone: bool,
    pub implied_quantity: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}

pub fn classify_stem_total(bs: f64, bt: f64, zone: &RestrictedZone) -> Result<ZoneVerdict> {
    positive("stem biomass", bs)?;
    positive("total biomass", bt)?;
    let fraction = bs / bt;
    Ok(ZoneVerdict {
        plot_id: String::new(),
        relationship: Relationship::StemTotal,
        inside_zone: fraction > zone.max_stem_fraction,
        implied_quantity: fraction,
    })
}

pub fn classify_volume_stem(v: f64, bs: f64, zone: &RestrictedZone) -> Result<ZoneVerdict> {
    positive("volume", v)?;
    positive("stem biomass", bs)?;
    let density = bs / v;
    Ok(ZoneVerdict {
        plot_id: String::new(),
        relationship: Relationship::VolumeStem,
        inside_zone: density > zone.max_wood_density,
        implied_quantity: density,
    })
}

/// One verdict per applicable relationship per record, in dataset order
/// (stem_total before volume_stem within a record).
pub fn screen_dataset(ds: &Dataset, zone: &RestrictedZone) -> Vec<ZoneVerdict> {
    let mut out = Vec::new();
    for r in ds.records() {
        // Records are validated on construction, so both classifiers succeed.
        if let Some((bs, bt)) = r.stem_total() {
            if let Ok(mut v) = classify_stem_total(bs, bt, zone) {
                v.plot_id = r.plot_id.clone();
                out.push(v);
            }
        }
        if let Some((v, bs)) = r.volume_stem() {
            if let Ok(mut verdict) = classify_volume_stem(v, bs, zone) {
                verdict.plot_id = r.plot_id.clone();
                out.push(verdict);
            }
        }
    }
    out
}

/// Volume-stem verdicts whose implied density is implausibly low. These are
/// reported only.
pub fn low_density_flags(verdicts: &[ZoneVerdict], threshold: f64) -> Vec<&ZoneVerdict> {
    verdicts
        .iter()
        .filter(|v| v.relationship == Relationship::VolumeStem && v.implied_quantity < threshold)
        .collect()
}

/// Outcome of refitting both parametric relationships with zone members removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneRefit {
    pub power: PowerFit,
    /// `excluded_ids` holds every plot excluded from either relationship.
    pub slope: SlopeFit,
    pub excluded_stem_total: Vec<String>,
    pub excluded_volume_stem: Vec<String>,
}

/// Fits (B_s, B_t) and (V, B_s) after removing observations inside the zone.
/// Exclusion is a single pass; zone membership does not depend on the fit.
pub fn refit_excluding(ds: &Dataset, zone: &RestrictedZone) -> Result<ZoneRefit> {
    let mut stem_total = Vec::new();
    let mut volume_stem = Vec::new();
    let mut excluded_st = Vec::new();
    let mut excluded_vs = Vec::new();
    let mut excluded_any = Vec::new();
    let mut seen = HashSet::new();

    for r in ds.records() {
        let mut excluded_here = false;
        if let Some((bs, bt)) = r.stem_total() {
            if classify_stem_total(bs, bt, zone)?.inside_zone {
                excluded_st.push(r.plot_id.clone());
                excluded_here = true;
            } else {
                stem_total.push((bs, bt));
            }
        }
        if let Some((v, bs)) = r.volume_stem() {
            if classify_volume_stem(v, bs, zone)?.inside_zone {
                excluded_vs.push(r.plot_id.clone());
                excluded_here = true;
            } else {
                volume_stem.push((v, bs));
            }
        }
        if excluded_here && seen.insert(r.plot_id.as_str()) {
            excluded_any.push(r.plot_id.clone());
        }
    }

    if stem_total.len() < MIN_POWER_PAIRS {
        return Err(Error::Starved {
            relationship: Relationship::StemTotal.as_str(),
            survivors: stem_total.len(),
            required: MIN_POWER_PAIRS,
        });
    }
    if volume_stem.len() < MIN_SLOPE_PAIRS {
        return Err(Error::Starved {
            relationship: Relationship::VolumeStem.as_str(),
            survivors: volume_stem.len(),
            required: MIN_SLOPE_PAIRS,
        });
    }
    let power = fit_power(&stem_total)?;
    let mut slope = fit_slope_origin(&volume_stem)?;
    slope.excluded_ids = excluded_any;
    Ok(ZoneRefit {
        power,
        slope,
        excluded_stem_total: excluded_st,
        excluded_volume_stem: excluded_vs,
    })
}

/// Fits both relationships over every available pair, no screening.
pub fn fit_unscreened(ds: &Dataset) -> Result<(PowerFit, SlopeFit)> {
    let stem_total: Vec<_> = ds.records().iter().filter_map(|r| r.stem_total()).collect();
    let volume_stem: Vec<_> = ds.records().iter().filter_map(|r| r.volume_stem()).collect();
    Ok((fit_power(&stem_total)?, fit_slope_origin(&volume_stem)?))
}
