//! Volume-to-biomass equations built through stem biomass.
//!
//! The direct regression `B_t = α·V^β` is split into two parametric fits,
//! `B_t = a·B_s^b` and `B_s = ρ·V`. Observations that violate physical
//! bounds (the restricted zone) are screened out of the fits, ρ is checked
//! against measured wood density, and the parts are recombined with
//! `α = a·ρ^b`, `β = b`. A synthetic-population experiment compares the
//! recombined estimator against the direct one.

pub mod cli;
pub mod dataio;
pub mod density;
pub mod error;
pub mod recombine;
pub mod regression;
pub mod simulate;
pub mod zone;

pub use dataio::{Dataset, DensityMeasurement, Diagnostic, Parsed, PlotRecord, SpeciesKey};
pub use density::{choose_rho, rho_error, summarize_density, DensityReference, RhoChoice, RhoOperands, RhoStrategy};
pub use error::{Error, Result};
pub use recombine::{estimate_regional, predict_total, recombine, stem_ratio, StandArea, VolumeBiomassEquation};
pub use regression::{coefficient_of_determination, fit_direct, fit_power, fit_slope_origin, PowerFit, SlopeFit};
pub use simulate::{generate_population, run_experiment, ExperimentConfig, ExperimentSummary, NoiseModel, PopulationConfig};
pub use zone::{refit_excluding, screen_dataset, RestrictedZone, ZoneVerdict};
