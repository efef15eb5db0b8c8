//! Synthetic stand populations and the repeated-sampling experiment that
//! compares the direct volume-biomass regression with the
//! separate-to-recombine estimator.
//!
//! All randomness comes from ChaCha8 streams keyed by a master seed. Each
//! purpose (population draw, a given repetition's sample at a given plot
//! count) gets its own stream id, so results do not depend on how
//! repetitions are scheduled across threads.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{csv_reader, optional_number, read_headers, row_fields, Dataset, PlotRecord, SpeciesKey};
use crate::density::{choose_rho, RhoOperands, RhoStrategy};
use crate::error::{Error, Result};
use crate::recombine::recombine;
use crate::regression::{fit_direct, fit_power};
use crate::zone::{refit_excluding, RestrictedZone};

pub const POPULATION_COLUMNS: [&str; 6] = [
    "stand_id",
    "area_ha",
    "volume_m3_ha",
    "rho_t_m3",
    "stem_t_ha",
    "total_t_ha",
];

const TAG_POPULATION: u64 = 1;
const TAG_SAMPLE: u64 = 2;

/// A ChaCha8 stream for `(master seed, purpose, index)`.
pub fn substream(master: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    debug_assert!(index < 1 << 48);
    rng.set_stream((purpose << 48) | index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeDistribution {
    Uniform,
    LogUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RhoMode {
    Homogeneous { value: f64 },
    /// Each stand draws ρ uniformly on `center·(1 ± relative_halfwidth)`.
    Heterogeneous { center: f64, relative_halfwidth: f64 },
}

impl RhoMode {
    pub fn center(&self) -> f64 {
        match *self {
            RhoMode::Homogeneous { value } => value,
            RhoMode::Heterogeneous { center, .. } => center,
        }
    }
}

/// Generative allometry of the population, `B_t = a·B_s^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allometry {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n_stands: usize,
    pub area_range: (f64, f64),
    pub volume_range: (f64, f64),
    pub volume_distribution: VolumeDistribution,
    pub rho_mode: RhoMode,
    pub allometry: Allometry,
    pub seed: u64,
}

impl PopulationConfig {
    pub fn homogeneous(seed: u64) -> Self {
        PopulationConfig {
            n_stands: 10_000,
            area_range: (1.0, 5.0),
            volume_range: (10.0, 600.0),
            volume_distribution: VolumeDistribution::LogUniform,
            rho_mode: RhoMode::Homogeneous { value: 0.59 },
            allometry: Allometry { a: 2.85, b: 0.87 },
            seed,
        }
    }

    pub fn heterogeneous(seed: u64) -> Self {
        PopulationConfig {
            rho_mode: RhoMode::Heterogeneous {
                center: 0.59,
                relative_halfwidth: 0.05,
            },
            ..Self::homogeneous(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_stands < 1 {
            return bad("n_stands must be at least 1".into());
        }
        for (name, (lo, hi)) in [("area", self.area_range), ("volume", self.volume_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return bad(format!("{name} range must satisfy 0 < lo <= hi, got ({lo}, {hi})"));
            }
        }
        match self.rho_mode {
            RhoMode::Homogeneous { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return bad(format!("rho must be positive, got {value}"));
                }
            }
            RhoMode::Heterogeneous {
                center,
                relative_halfwidth,
            } => {
                if !(center.is_finite() && center > 0.0) {
                    return bad(format!("rho center must be positive, got {center}"));
                }
                if !(relative_halfwidth > 0.0 && relative_halfwidth < 0.5) {
                    return bad(format!(
                        "relative half-width must lie in (0, 0.5), got {relative_halfwidth}"
                    ));
                }
            }
        }
        let Allometry { a, b } = self.allometry;
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return bad(format!("allometry must be positive, got ({a}, {b})"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stand {
    pub id: usize,
    pub area: f64,
    pub volume: f64,
    pub rho: f64,
    pub stem_biomass: f64,
    pub total_biomass: f64,
}

impl Stand {
    fn from_chain(id: usize, area: f64, volume: f64, rho: f64, allometry: Allometry) -> Stand {
        let stem_biomass = rho * volume;
        Stand {
            id,
            area,
            volume,
            rho,
            stem_biomass,
            total_biomass: allometry.a * stem_biomass.powf(allometry.b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    pub stands: Vec<Stand>,
    /// Σ area·B_t, t.
    pub true_total: f64,
}

fn uniform_on<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

pub fn generate_population(cfg: &PopulationConfig) -> Result<Population> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, TAG_POPULATION, 0);
    let mut stands = Vec::with_capacity(cfg.n_stands);
    for id in 1..=cfg.n_stands {
        let area = uniform_on(&mut rng, cfg.area_range.0, cfg.area_range.1);
        let (vlo, vhi) = cfg.volume_range;
        let volume = match cfg.volume_distribution {
            VolumeDistribution::Uniform => uniform_on(&mut rng, vlo, vhi),
            VolumeDistribution::LogUniform => uniform_on(&mut rng, vlo.ln(), vhi.ln()).exp().clamp(vlo, vhi),
        };
        let rho = match cfg.rho_mode {
            RhoMode::Homogeneous { value } => value,
            RhoMode::Heterogeneous {
                center,
                relative_halfwidth,
            } => uniform_on(
                &mut rng,
                center * (1.0 - relative_halfwidth),
                center * (1.0 + relative_halfwidth),
            ),
        };
        stands.push(Stand::from_chain(id, area, volume, rho, cfg.allometry));
    }
    let true_total = stands.iter().map(|s| s.area * s.total_biomass).sum();
    Ok(Population { stands, true_total })
}

/// Measurement error applied to sampled stands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Relative SD of the mean-one lognormal factor on observed V.
    pub volume_cv: f64,
    /// Relative SD of the mean-one lognormal factors on observed B_s and B_t.
    pub biomass_cv: f64,
    /// Probability that observed V is further scaled by a gross-error factor.
    pub outlier_prob: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            volume_cv: 0.15,
            biomass_cv: 0.05,
            outlier_prob: 0.05,
        }
    }
}

/// Gross volume errors scale V by a factor uniform on this union.
pub const OUTLIER_FACTOR_BANDS: [(f64, f64); 2] = [(0.4, 0.6), (1.6, 2.5)];

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            volume_cv: 0.0,
            biomass_cv: 0.0,
            outlier_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("volume_cv", self.volume_cv), ("biomass_cv", self.biomass_cv)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.outlier_prob >= 0.0 && self.outlier_prob < 0.5) {
            return Err(Error::Config(format!(
                "outlier_prob must lie in [0, 0.5), got {}",
                self.outlier_prob
            )));
        }
        Ok(())
    }
}

/// exp(σz − σ²/2) with σ² = ln(1 + cv²): mean one, relative SD `cv`.
fn lognormal_factor(cv: f64, z: f64) -> f64 {
    if cv == 0.0 {
        return 1.0;
    }
    let s2 = (1.0 + cv * cv).ln();
    (s2.sqrt() * z - 0.5 * s2).exp()
}

fn outlier_factor(u: f64) -> f64 {
    let [(lo1, hi1), (lo2, hi2)] = OUTLIER_FACTOR_BANDS;
    let w1 = hi1 - lo1;
    let x = u * (w1 + (hi2 - lo2));
    if x < w1 {
        lo1 + x
    } else {
        lo2 + (x - w1)
    }
}

pub const SIMULATED_SPECIES: &str = "simulated";

fn plot_id(stand: &Stand) -> String {
    format!("stand-{}", stand.id)
}

/// Simple random sample of `n` stands without replacement, observed through
/// the noise model. Every stand consumes the same number of draws whatever
/// the noise settings, so zero-noise and noisy runs pick the same stands.
pub fn sample_plots<R: Rng>(
    stands: &[Stand],
    n: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<PlotRecord>> {
    noise.validate()?;
    if n < 1 || n > stands.len() {
        return Err(Error::InvalidInput(format!(
            "plot count {n} outside 1..={}",
            stands.len()
        )));
    }
    let species = SpeciesKey::new(SIMULATED_SPECIES).expect("non-empty");
    let picked = index::sample(rng, stands.len(), n);
    let mut out = Vec::with_capacity(n);
    for i in picked.iter() {
        let s = &stands[i];
        let zv: f64 = rng.sample(StandardNormal);
        let zs: f64 = rng.sample(StandardNormal);
        let zt: f64 = rng.sample(StandardNormal);
        let u_hit: f64 = rng.random();
        let u_fac: f64 = rng.random();

        let mut volume = s.volume * lognormal_factor(noise.volume_cv, zv);
        if u_hit < noise.outlier_prob {
            volume *= outlier_factor(u_fac);
        }
        let stem = s.stem_biomass * lognormal_factor(noise.biomass_cv, zs);
        let total = s.total_biomass * lognormal_factor(noise.biomass_cv, zt);
        out.push(PlotRecord::new(
            species.clone(),
            plot_id(s),
            None,
            Some(volume),
            Some(stem),
            Some(total),
        )?);
    }
    Ok(out)
}

/// Fitted parameters and regional residual for one estimator on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorOutcome {
    pub alpha: f64,
    pub beta: f64,
    /// |true total − modeled total|, t.
    pub residual: f64,
}

fn modeled_total(alpha: f64, beta: f64, stands: &[Stand]) -> f64 {
    alpha * stands.iter().map(|s| s.area * s.volume.powf(beta)).sum::<f64>()
}

/// Direct regression of observed B_t on observed V.
pub fn estimate_before(sample: &[PlotRecord], pop: &Population) -> Result<EstimatorOutcome> {
    let pairs: Vec<_> = sample.iter().filter_map(|r| r.volume_total()).collect();
    let fit = fit_direct(&pairs)?;
    Ok(EstimatorOutcome {
        alpha: fit.a,
        beta: fit.b,
        residual: (pop.true_total - modeled_total(fit.a, fit.b, &pop.stands)).abs(),
    })
}

/// Separate-to-recombine: `a, b` from (B_s, B_t), ρ from the zone-screened
/// (V, B_s) slope averaged with the reference density `wbd`.
pub fn estimate_after(
    sample: &[PlotRecord],
    pop: &Population,
    zone: &RestrictedZone,
    wbd: f64,
) -> Result<EstimatorOutcome> {
    let stem_total: Vec<_> = sample.iter().filter_map(|r| r.stem_total()).collect();
    let power = fit_power(&stem_total)?;
    let ds = Dataset::new("sample", sample.to_vec())?;
    let screened = refit_excluding(&ds, zone)?;
    let rho = choose_rho(
        RhoStrategy::AvgWbdExcluding,
        RhoOperands {
            fit_excluding: Some(screened.slope.rho),
            wbd: Some(wbd),
            ..Default::default()
        },
    )?;
    let eq = recombine(power.a, power.b, rho, SpeciesKey::new(SIMULATED_SPECIES)?)?;
    Ok(EstimatorOutcome {
        alpha: eq.alpha(),
        beta: eq.beta(),
        residual: (pop.true_total - modeled_total(eq.alpha(), eq.beta(), &pop.stands)).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub repetitions: usize,
    pub plot_counts: Vec<usize>,
    pub zone: RestrictedZone,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            repetitions: 500,
            plot_counts: vec![20, 100],
            zone: RestrictedZone::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Population SD (divisor N) across repetitions.
    pub sd: f64,
}

impl MeanSd {
    fn of(values: &[f64]) -> MeanSd {
        if values.is_empty() {
            return MeanSd {
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanSd {
            mean,
            sd: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub alpha: MeanSd,
    pub beta: MeanSd,
    /// Residual e, t.
    pub e: MeanSd,
}

impl EstimatorSummary {
    fn of(outcomes: &[EstimatorOutcome]) -> Self {
        let col = |f: fn(&EstimatorOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
        EstimatorSummary {
            alpha: MeanSd::of(&col(|o| o.alpha)),
            beta: MeanSd::of(&col(|o| o.beta)),
            e: MeanSd::of(&col(|o| o.residual)),
        }
    }
}

/// One row group of the before/after comparison, for a single plot count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotCountSummary {
    pub plots: usize,
    /// Repetitions aggregated (requested minus failed).
    pub repetitions: usize,
    pub failed: usize,
    pub before: EstimatorSummary,
    pub after: EstimatorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub requested_repetitions: usize,
    pub true_total: f64,
    pub wbd: f64,
    pub by_plot_count: Vec<PlotCountSummary>,
    pub population: PopulationConfig,
    pub noise: NoiseModel,
    pub experiment: ExperimentConfig,
}

impl ExperimentSummary {
    pub fn for_plots(&self, n: usize) -> Option<&PlotCountSummary> {
        self.by_plot_count.iter().find(|b| b.plots == n)
    }
}

type RepOutcome = Vec<Option<(EstimatorOutcome, EstimatorOutcome)>>;

/// Runs the repeated-sampling experiment on a freshly generated population.
/// Repetitions run on the current rayon pool; results are gathered in
/// repetition order before aggregation.
pub fn run_experiment(
    cfg: &PopulationConfig,
    noise: &NoiseModel,
    exp: &ExperimentConfig,
) -> Result<ExperimentSummary> {
    noise.validate()?;
    let pop = generate_population(cfg)?;
    run_experiment_on(&pop, cfg, noise, exp)
}

pub fn run_experiment_on(
    pop: &Population,
    cfg: &PopulationConfig,
    noise: &NoiseModel,
    exp: &ExperimentConfig,
) -> Result<ExperimentSummary> {
    noise.validate()?;
    if exp.repetitions < 1 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    if exp.plot_counts.is_empty() {
        return Err(Error::Config("no plot counts given".into()));
    }
    for &n in &exp.plot_counts {
        if n < 1 || n > pop.stands.len() {
            return Err(Error::Config(format!(
                "plot count {n} outside 1..={}",
                pop.stands.len()
            )));
        }
    }
    let wbd = cfg.rho_mode.center();
    let slots = exp.plot_counts.len() as u64;

    let per_rep: Vec<RepOutcome> = (0..exp.repetitions)
        .into_par_iter()
        .map(|rep| {
            exp.plot_counts
                .iter()
                .enumerate()
                .map(|(slot, &n)| {
                    let mut rng = substream(cfg.seed, TAG_SAMPLE, rep as u64 * slots + slot as u64);
                    let sample = sample_plots(&pop.stands, n, noise, &mut rng).ok()?;
                    let before = estimate_before(&sample, pop).ok()?;
                    let after = estimate_after(&sample, pop, &exp.zone, wbd).ok()?;
                    Some((before, after))
                })
                .collect()
        })
        .collect();

    let by_plot_count = exp
        .plot_counts
        .iter()
        .enumerate()
        .map(|(slot, &n)| {
            let ok: Vec<_> = per_rep.iter().filter_map(|r| r[slot]).collect();
            let before: Vec<_> = ok.iter().map(|p| p.0).collect();
            let after: Vec<_> = ok.iter().map(|p| p.1).collect();
            PlotCountSummary {
                plots: n,
                repetitions: ok.len(),
                failed: exp.repetitions - ok.len(),
                before: EstimatorSummary::of(&before),
                after: EstimatorSummary::of(&after),
            }
        })
        .collect();

    Ok(ExperimentSummary {
        requested_repetitions: exp.repetitions,
        true_total: pop.true_total,
        wbd,
        by_plot_count,
        population: *cfg,
        noise: *noise,
        experiment: exp.clone(),
    })
}

/// Writes `stand_id,area_ha,volume_m3_ha,rho_t_m3,stem_t_ha,total_t_ha`.
pub fn export_population(stands: &[Stand]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(POPULATION_COLUMNS).expect("write to Vec");
    for s in stands {
        w.write_record([
            s.id.to_string(),
            s.area.to_string(),
            s.volume.to_string(),
            s.rho.to_string(),
            s.stem_biomass.to_string(),
            s.total_biomass.to_string(),
        ])
        .expect("write to Vec");
    }
    w.into_inner().expect("flush to Vec")
}

/// Reads a population CSV back. Unlike field data, any bad row is an error.
pub fn parse_population_csv(bytes: &[u8]) -> Result<Vec<Stand>> {
    let mut rdr = csv_reader(bytes);
    let idx = read_headers(&mut rdr, &POPULATION_COLUMNS)?;
    let mut out = Vec::new();
    for rec in rdr.byte_records() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |m: String| Error::InvalidInput(format!("line {line}: {m}"));
        let f = row_fields(&rec, &idx, &POPULATION_COLUMNS).map_err(err)?;
        let id: usize = f[0].parse().map_err(|_| err(format!("bad stand_id `{}`", f[0])))?;
        let mut nums = [0.0; 5];
        for (k, slot) in nums.iter_mut().enumerate() {
            *slot = optional_number(f[k + 1], POPULATION_COLUMNS[k + 1])
                .map_err(err)?
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| err(format!("{} must be positive", POPULATION_COLUMNS[k + 1])))?;
        }
        let [area, volume, rho, stem_biomass, total_biomass] = nums;
        out.push(Stand {
            id,
            area,
            volume,
            rho,
            stem_biomass,
            total_biomass,
        });
    }
    Ok(out)
}

/// The population as a plot dataset (V, B_s, B_t per stand, no noise).
pub fn population_as_dataset(stands: &[Stand]) -> Result<Dataset> {
    let species = SpeciesKey::new(SIMULATED_SPECIES)?;
    let records = stands
        .iter()
        .map(|s| {
            PlotRecord::new(
                species.clone(),
                plot_id(s),
                None,
                Some(s.volume),
                Some(s.stem_biomass),
                Some(s.total_biomass),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new("population", records)
}
