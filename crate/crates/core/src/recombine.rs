//! Recombination of the parametric fits into `B_t = α·V^β` and its use on
//! stand inventories.

use serde::{Deserialize, Serialize};

use crate::dataio::{csv_reader, optional_number, read_headers, row_fields, Diagnostic, Parsed, Severity, SpeciesKey};
use crate::density::{RhoChoice, RhoOperands, RhoStrategy};
use crate::error::{Error, Result};

pub const STAND_COLUMNS: [&str; 3] = ["stand_id", "area_ha", "volume_m3_ha"];

/// Relative tolerance for the `alpha = a·ρ^b` invariant when loading JSON.
const ALPHA_CONSISTENCY: f64 = 1e-12;

/// `B_t = alpha·V^beta` with the provenance of its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeBiomassEquation {
    alpha: f64,
    beta: f64,
    rho: RhoChoice,
    source_a: f64,
    source_b: f64,
    species: SpeciesKey,
    created_from: String,
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}

/// Builds the volume-biomass equation: `alpha = a·ρ^b`, `beta = b`.
pub fn recombine(a: f64, b: f64, rho: RhoChoice, species: SpeciesKey) -> Result<VolumeBiomassEquation> {
    require_positive("a", a)?;
    require_positive("b", b)?;
    require_positive("rho", rho.value)?;
    Ok(VolumeBiomassEquation {
        alpha: a * rho.value.powf(b),
        beta: b,
        rho,
        source_a: a,
        source_b: b,
        species,
        created_from: "separate_to_recombine".to_string(),
    })
}

impl VolumeBiomassEquation {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn rho(&self) -> &RhoChoice {
        &self.rho
    }
    pub fn source_a(&self) -> f64 {
        self.source_a
    }
    pub fn source_b(&self) -> f64 {
        self.source_b
    }
    pub fn species(&self) -> &SpeciesKey {
        &self.species
    }
    pub fn created_from(&self) -> &str {
        &self.created_from
    }

    pub fn with_created_from(mut self, source: impl Into<String>) -> Self {
        self.created_from = source.into();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("equation serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("equation json: {e}")))
    }
}

/// Rounds to 15 significant decimal digits so the rendered JSON is stable.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

#[derive(Serialize, Deserialize)]
struct EquationJson {
    species: SpeciesKey,
    alpha: f64,
    beta: f64,
    a: f64,
    b: f64,
    rho: f64,
    rho_strategy: RhoStrategy,
    rho_inputs: RhoOperands,
    created_from: String,
}

impl Serialize for VolumeBiomassEquation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let ops = self.rho.inputs_used;
        EquationJson {
            species: self.species.clone(),
            alpha: sig15(self.alpha),
            beta: sig15(self.beta),
            a: sig15(self.source_a),
            b: sig15(self.source_b),
            rho: sig15(self.rho.value),
            rho_strategy: self.rho.strategy,
            rho_inputs: RhoOperands {
                fit_including: ops.fit_including.map(sig15),
                fit_excluding: ops.fit_excluding.map(sig15),
                wbd: ops.wbd.map(sig15),
            },
            created_from: self.created_from.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VolumeBiomassEquation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = EquationJson::deserialize(d)?;
        for (name, v) in [("alpha", j.alpha), ("beta", j.beta), ("a", j.a), ("b", j.b), ("rho", j.rho)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(D::Error::custom(format!("{name} must be positive")));
            }
        }
        if j.beta != j.b {
            return Err(D::Error::custom("beta must equal b"));
        }
        let expected = j.a * j.rho.powf(j.b);
        if ((j.alpha - expected) / expected).abs() > ALPHA_CONSISTENCY {
            return Err(D::Error::custom(format!(
                "alpha {} inconsistent with a·rho^b = {expected}",
                j.alpha
            )));
        }
        Ok(VolumeBiomassEquation {
            alpha: j.alpha,
            beta: j.beta,
            rho: RhoChoice {
                value: j.rho,
                strategy: j.rho_strategy,
                inputs_used: j.rho_inputs,
            },
            source_a: j.a,
            source_b: j.b,
            species: j.species,
            created_from: j.created_from,
        })
    }
}

/// Total biomass per hectare at volume `v`: `alpha·v^beta`.
pub fn predict_total(eq: &VolumeBiomassEquation, v: f64) -> Result<f64> {
    require_positive("volume", v)?;
    Ok(eq.alpha * v.powf(eq.beta))
}

/// Stem fraction of total biomass implied by `B_t = a·B_s^b`:
/// `B_s / B_t = B_s^(1−b) / a`.
pub fn stem_ratio(a: f64, b: f64, bs: f64) -> Result<f64> {
    require_positive("a", a)?;
    require_positive("stem biomass", bs)?;
    if !b.is_finite() {
        return Err(Error::InvalidInput(format!("b must be finite, got {b}")));
    }
    Ok(bs.powf(1.0 - b) / a)
}

/// A stand in a regional inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandArea {
    pub id: String,
    /// ha
    pub area: f64,
    /// m³ ha⁻¹
    pub volume: f64,
}

impl StandArea {
    pub fn new(id: impl Into<String>, area: f64, volume: f64) -> Result<Self> {
        require_positive("area", area)?;
        require_positive("volume", volume)?;
        Ok(StandArea {
            id: id.into(),
            area,
            volume,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandContribution {
    pub stand_id: String,
    /// t
    pub biomass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionalEstimate {
    /// t
    pub total: f64,
    pub per_stand: Vec<StandContribution>,
    pub warnings: Vec<String>,
}

/// Σ area·alpha·V^beta over the stands. When `observed_max_volume` is given,
/// stands beyond it produce an extrapolation warning (never an error).
pub fn estimate_regional(
    eq: &VolumeBiomassEquation,
    stands: &[StandArea],
    observed_max_volume: Option<f64>,
) -> Result<RegionalEstimate> {
    if stands.is_empty() {
        return Err(Error::InvalidInput("no stands to estimate".into()));
    }
    let mut per_stand = Vec::with_capacity(stands.len());
    let mut warnings = Vec::new();
    let mut total = 0.0;
    for s in stands {
        let biomass = s.area * predict_total(eq, s.volume)?;
        if let Some(vmax) = observed_max_volume {
            if s.volume > vmax {
                warnings.push(format!(
                    "stand `{}`: volume {} exceeds the fit's observed maximum {vmax}",
                    s.id, s.volume
                ));
            }
        }
        total += biomass;
        per_stand.push(StandContribution {
            stand_id: s.id.clone(),
            biomass,
        });
    }
    Ok(RegionalEstimate {
        total,
        per_stand,
        warnings,
    })
}

/// Parses `stand_id,area_ha,volume_m3_ha`.
pub fn parse_stands_csv(bytes: &[u8]) -> Result<Parsed<Vec<StandArea>>> {
    let mut rdr = csv_reader(bytes);
    let idx = read_headers(&mut rdr, &STAND_COLUMNS)?;
    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    let mut raw = csv::ByteRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                diagnostics.push(Diagnostic {
                    line: e.position().map_or(line, |p| p.line()),
                    severity: Severity::Rejected,
                    message: e.to_string(),
                });
                continue;
            }
        }
        let line = raw.position().map_or(line, |p| p.line());
        if raw.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed = row_fields(&raw, &idx, &STAND_COLUMNS).and_then(|f| {
            let area = optional_number(f[1], "area")?.ok_or("missing area")?;
            let volume = optional_number(f[2], "volume")?.ok_or("missing volume")?;
            StandArea::new(f[0], area, volume).map_err(|e| e.to_string())
        });
        match parsed {
            Ok(s) => out.push(s),
            Err(message) => diagnostics.push(Diagnostic {
                line,
                severity: Severity::Rejected,
                message,
            }),
        }
    }
    Ok(Parsed {
        value: out,
        diagnostics,
    })
}
