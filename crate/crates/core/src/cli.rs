//! Command-line front end. Reports go to stdout as JSON; diagnostics go to
//! stderr. Exit codes: 0 success, 1 usage error, 2 data or fit error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataio::{group_by_species, parse_density_csv, parse_plot_csv, Dataset, DensityMeasurement, Diagnostic, SpeciesKey};
use crate::density::{choose_rho, rho_error, summarize_all, summarize_density, RhoOperands, RhoStrategy};
use crate::error::Error;
use crate::recombine::{estimate_regional, parse_stands_csv, recombine, VolumeBiomassEquation};
use crate::regression::{PowerFit, SlopeFit};
use crate::simulate::{
    export_population, generate_population, run_experiment_on, Allometry, ExperimentConfig, NoiseModel,
    PopulationConfig, RhoMode, VolumeDistribution,
};
use crate::zone::{
    fit_unscreened, low_density_flags, refit_excluding, screen_dataset, Relationship, RestrictedZone, ZoneVerdict,
    LOW_DENSITY_WARNING,
};

pub const TOOL_VERSION: &str = concat!("volbio ", env!("CARGO_PKG_VERSION"));
pub const THREADS_ENV: &str = "VOLBIO_THREADS";
const CURVE_POINTS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "volbio", version, about = "Volume-to-biomass equations through stem biomass")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit B_t = a·B_s^b and B_s = ρ·V for one species.
    Fit(FitArgs),
    /// Classify every observation against the restricted zone.
    Screen(ScreenArgs),
    /// Build B_t = α·V^β from a, b and a chosen ρ.
    Recombine(RecombineArgs),
    /// Apply an equation to a stand inventory.
    Estimate(EstimateArgs),
    /// Run the repeated-sampling experiment on a synthetic population.
    Simulate(SimulateArgs),
    /// Summarize wood-density measurements.
    Density(DensityArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ZoneArgs {
    #[arg(long, default_value_t = crate::zone::DEFAULT_MAX_WOOD_DENSITY)]
    pub zone_max_density: f64,
    #[arg(long, default_value_t = crate::zone::DEFAULT_MAX_STEM_FRACTION)]
    pub zone_max_stem_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub species: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub zone: ZoneArgs,
    #[arg(long)]
    pub exclude_outliers: bool,
    /// Directory for scatter, fit-curve and zone-boundary CSVs.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScreenArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub species: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub zone: ZoneArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RecombineArgs {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub rho_strategy: String,
    #[arg(long)]
    pub rho_fit_incl: Option<f64>,
    #[arg(long)]
    pub rho_fit_excl: Option<f64>,
    #[arg(long)]
    pub wbd: Option<f64>,
    /// A report written by `volbio fit`; explicit flags override its values.
    #[arg(long)]
    pub from_fit: Option<PathBuf>,
    #[arg(long)]
    pub species: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub equation: PathBuf,
    #[arg(long)]
    pub stands: PathBuf,
    /// Largest volume seen when fitting; larger stands produce a warning.
    #[arg(long)]
    pub max_observed_volume: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoModeArg {
    Homogeneous,
    Heterogeneous,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolumeDistArg {
    Uniform,
    LogUniform,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub stands_n: usize,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "20,100")]
    pub plots: Vec<usize>,
    #[arg(long, value_enum, default_value_t = RhoModeArg::Heterogeneous)]
    pub rho_mode: RhoModeArg,
    /// Homogeneous value or heterogeneous center, t m⁻³.
    #[arg(long, default_value_t = 0.59)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.05)]
    pub rho_halfwidth: f64,
    #[arg(long, value_enum, default_value_t = VolumeDistArg::LogUniform)]
    pub volume_dist: VolumeDistArg,
    #[arg(long, default_value_t = 1.0)]
    pub area_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub area_max: f64,
    #[arg(long, default_value_t = 10.0)]
    pub volume_min: f64,
    #[arg(long, default_value_t = 600.0)]
    pub volume_max: f64,
    #[arg(long, default_value_t = 2.85)]
    pub a_pop: f64,
    #[arg(long, default_value_t = 0.87)]
    pub b_pop: f64,
    #[arg(long, default_value_t = 0.15)]
    pub noise_volume_cv: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_biomass_cv: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_outlier_prob: f64,
    #[arg(long)]
    pub export_population: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub species: Option<String>,
    /// CSV `plot_name,density_name` mapping plot species to density taxa.
    #[arg(long)]
    pub alias: Option<PathBuf>,
    /// Fitted ρ to compare against the reference (needs --species).
    #[arg(long)]
    pub fitted: Option<f64>,
}

/// Machine-readable result of one subcommand.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: String,
    pub config: Value,
    pub results: Value,
    pub diagnostics: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingOperand(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

enum Output {
    Report(RunReport),
    Equation(VolumeBiomassEquation),
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match execute(cli.command) {
        Ok(Output::Report(report)) => {
            for d in &report.diagnostics {
                let _ = writeln!(err, "{d}");
            }
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            0
        }
        Ok(Output::Equation(eq)) => {
            let _ = writeln!(out, "{}", eq.to_json());
            0
        }
        Err(e) => {
            let (CliError::Usage(m) | CliError::Data(m)) = &e;
            let _ = writeln!(err, "error: {m}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> CliResult<Output> {
    match cmd {
        Command::Fit(a) => cmd_fit(&a).map(Output::Report),
        Command::Screen(a) => cmd_screen(&a).map(Output::Report),
        Command::Recombine(a) => cmd_recombine(&a).map(Output::Equation),
        Command::Estimate(a) => cmd_estimate(&a).map(Output::Report),
        Command::Simulate(a) => cmd_simulate(&a).map(Output::Report),
        Command::Density(a) => cmd_density(&a).map(Output::Report),
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn with_file<T>(path: &Path, r: crate::error::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn render_diagnostics(path: &Path, diags: &[Diagnostic]) -> Vec<String> {
    diags.iter().map(|d| format!("{}: {d}", path.display())).collect()
}

fn config_of<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("args serialize")
}

fn report(command: &str, config: Value, results: Value, diagnostics: Vec<String>) -> RunReport {
    RunReport {
        command: command.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config,
        results,
        diagnostics,
    }
}

fn zone_from(args: &ZoneArgs) -> CliResult<RestrictedZone> {
    RestrictedZone::new(args.zone_max_density, args.zone_max_stem_fraction).map_err(|e| CliError::Usage(e.to_string()))
}

fn species_key(s: &str) -> CliResult<SpeciesKey> {
    SpeciesKey::new(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn load_species(path: &Path, species: &SpeciesKey) -> CliResult<(Dataset, Vec<String>)> {
    let bytes = read_file(path)?;
    let parsed = with_file(path, parse_plot_csv(&bytes, &path.display().to_string()))?;
    let diagnostics = render_diagnostics(path, &parsed.diagnostics);
    let mut groups = group_by_species(&parsed.value);
    let ds = groups
        .remove(species)
        .ok_or_else(|| CliError::Data(format!("{}: species `{species}` not found", path.display())))?;
    Ok((ds, diagnostics))
}

#[derive(Serialize)]
struct VerdictCounts {
    total: usize,
    inside_zone: usize,
}

fn count_verdicts(verdicts: &[ZoneVerdict]) -> BTreeMap<&'static str, VerdictCounts> {
    let mut m = BTreeMap::new();
    for rel in [Relationship::StemTotal, Relationship::VolumeStem] {
        let of_rel: Vec<_> = verdicts.iter().filter(|v| v.relationship == rel).collect();
        m.insert(
            rel.as_str(),
            VerdictCounts {
                total: of_rel.len(),
                inside_zone: of_rel.iter().filter(|v| v.inside_zone).count(),
            },
        );
    }
    m
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<RunReport> {
    let zone = zone_from(&args.zone)?;
    let species = species_key(&args.species)?;
    let (ds, mut diagnostics) = load_species(&args.input, &species)?;

    let verdicts = screen_dataset(&ds, &zone);
    let low: Vec<&str> = low_density_flags(&verdicts, LOW_DENSITY_WARNING)
        .iter()
        .map(|v| v.plot_id.as_str())
        .collect();
    for id in &low {
        diagnostics.push(format!(
            "plot `{id}`: implied wood density below {LOW_DENSITY_WARNING} (reported, not excluded)"
        ));
    }

    let screened = if args.exclude_outliers {
        Some(refit_excluding(&ds, &zone)?)
    } else {
        None
    };
    let unscreened = match fit_unscreened(&ds) {
        Ok(u) => Some(u),
        // Screened fits can still be reported when the raw pairs are degenerate.
        Err(e) if screened.is_some() => {
            diagnostics.push(format!("unscreened fit: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };

    if let Some(dir) = &args.emit_plot_data {
        write_plot_data(dir, &ds, &zone, unscreened.as_ref(), screened.as_ref().map(|s| (&s.power, &s.slope)))?;
    }

    let results = json!({
        "species": species,
        "records": ds.len(),
        "max_volume": ds.max_volume(),
        "unscreened": unscreened.as_ref().map(|(p, s)| json!({ "power": p, "slope": s })),
        "screened": screened,
        "exclusion": if args.exclude_outliers { "symmetric: stem_total and volume_stem zone members removed from their own fit" } else { "none" },
        "zone": zone,
        "verdicts": count_verdicts(&verdicts),
        "low_density_plots": low,
    });
    Ok(report("fit", config_of(args), results, diagnostics))
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn csv_write(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_plot_data(
    dir: &Path,
    ds: &Dataset,
    zone: &RestrictedZone,
    unscreened: Option<&(PowerFit, SlopeFit)>,
    screened: Option<(&PowerFit, &SlopeFit)>,
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;

    let verdicts = screen_dataset(ds, zone);
    let mut scatter = Vec::new();
    for r in ds.records() {
        let inside = |rel: Relationship| {
            verdicts
                .iter()
                .any(|v| v.plot_id == r.plot_id && v.relationship == rel && v.inside_zone)
        };
        if let Some((bs, bt)) = r.stem_total() {
            let rel = Relationship::StemTotal;
            scatter.push(vec![rel.as_str().into(), r.plot_id.clone(), bs.to_string(), bt.to_string(), inside(rel).to_string()]);
        }
        if let Some((v, bs)) = r.volume_stem() {
            let rel = Relationship::VolumeStem;
            scatter.push(vec![rel.as_str().into(), r.plot_id.clone(), v.to_string(), bs.to_string(), inside(rel).to_string()]);
        }
    }
    csv_write(&dir.join("scatter.csv"), &["relationship", "plot_id", "x", "y", "inside_zone"], scatter)?;

    let max_of = |f: &dyn Fn(&crate::dataio::PlotRecord) -> Option<f64>| {
        ds.records().iter().filter_map(f).fold(0.0_f64, f64::max)
    };
    let bs_max = max_of(&|r| r.stem_biomass);
    let v_max = max_of(&|r| r.volume);
    let bs_min = ds
        .records()
        .iter()
        .filter_map(|r| r.stem_total().map(|p| p.0))
        .fold(f64::INFINITY, f64::min);

    let mut curves = Vec::new();
    let mut push_power = |name: &str, p: &PowerFit| {
        if bs_min.is_finite() {
            for x in linspace(bs_min, bs_max, CURVE_POINTS) {
                curves.push(vec![name.to_string(), x.to_string(), p.predict(x).to_string()]);
            }
        }
    };
    if let Some((p, _)) = unscreened {
        push_power("power_unscreened", p);
    }
    if let Some((p, _)) = screened {
        push_power("power_screened", p);
    }
    let mut push_slope = |name: &str, s: &SlopeFit| {
        for x in linspace(0.0, v_max, CURVE_POINTS) {
            curves.push(vec![name.to_string(), x.to_string(), (s.rho * x).to_string()]);
        }
    };
    if let Some((_, s)) = unscreened {
        push_slope("slope_unscreened", s);
    }
    if let Some((_, s)) = screened {
        push_slope("slope_screened", s);
    }
    csv_write(&dir.join("fit_curves.csv"), &["curve", "x", "y"], curves)?;

    let mut bounds = Vec::new();
    for x in linspace(0.0, bs_max, CURVE_POINTS) {
        bounds.push(vec!["stem_total".into(), x.to_string(), (x / zone.max_stem_fraction()).to_string()]);
    }
    for x in linspace(0.0, v_max, CURVE_POINTS) {
        bounds.push(vec!["volume_stem".into(), x.to_string(), (x * zone.max_wood_density()).to_string()]);
    }
    csv_write(&dir.join("zone_boundaries.csv"), &["boundary", "x", "y"], bounds)
}

pub fn cmd_screen(args: &ScreenArgs) -> CliResult<RunReport> {
    let zone = zone_from(&args.zone)?;
    let bytes = read_file(&args.input)?;
    let parsed = with_file(&args.input, parse_plot_csv(&bytes, &args.input.display().to_string()))?;
    let mut diagnostics = render_diagnostics(&args.input, &parsed.diagnostics);
    let ds = match &args.species {
        Some(s) => {
            let key = species_key(s)?;
            group_by_species(&parsed.value)
                .remove(&key)
                .ok_or_else(|| CliError::Data(format!("species `{key}` not found")))?
        }
        None => parsed.value,
    };
    let verdicts = screen_dataset(&ds, &zone);
    for v in low_density_flags(&verdicts, LOW_DENSITY_WARNING) {
        diagnostics.push(format!(
            "plot `{}`: implied wood density {} below {LOW_DENSITY_WARNING}",
            v.plot_id, v.implied_quantity
        ));
    }
    let results = json!({
        "zone": zone,
        "counts": count_verdicts(&verdicts),
        "verdicts": verdicts,
    });
    Ok(report("screen", config_of(args), results, diagnostics))
}

struct FitValues {
    a: Option<f64>,
    b: Option<f64>,
    fit_incl: Option<f64>,
    fit_excl: Option<f64>,
    species: Option<String>,
}

fn values_from_fit_report(path: &Path) -> CliResult<FitValues> {
    let bytes = read_file(path)?;
    let v: Value =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let res = &v["results"];
    let num = |p: &Value| p.as_f64();
    let power = if res["screened"].is_object() {
        &res["screened"]["power"]
    } else {
        &res["unscreened"]["power"]
    };
    Ok(FitValues {
        a: num(&power["a"]),
        b: num(&power["b"]),
        fit_incl: num(&res["unscreened"]["slope"]["rho"]),
        fit_excl: num(&res["screened"]["slope"]["rho"]),
        species: res["species"].as_str().map(str::to_string),
    })
}

pub fn cmd_recombine(args: &RecombineArgs) -> CliResult<VolumeBiomassEquation> {
    let strategy: RhoStrategy = args
        .rho_strategy
        .parse()
        .map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let from = match &args.from_fit {
        Some(p) => Some(values_from_fit_report(p)?),
        None => None,
    };
    let pick = |flag: Option<f64>, f: fn(&FitValues) -> Option<f64>| flag.or_else(|| from.as_ref().and_then(f));
    let a = pick(args.a, |f| f.a).ok_or_else(|| CliError::Usage("missing --a (or --from-fit)".into()))?;
    let b = pick(args.b, |f| f.b).ok_or_else(|| CliError::Usage("missing --b (or --from-fit)".into()))?;
    let operands = RhoOperands {
        fit_including: pick(args.rho_fit_incl, |f| f.fit_incl),
        fit_excluding: pick(args.rho_fit_excl, |f| f.fit_excl),
        wbd: args.wbd,
    };
    let rho = choose_rho(strategy, operands).map_err(|e| match e {
        Error::MissingOperand(name) => CliError::Usage(format!(
            "missing operand `{name}` for strategy {strategy} (flag --{})",
            match name {
                "fit_including" => "rho-fit-incl",
                "fit_excluding" => "rho-fit-excl",
                _ => "wbd",
            }
        )),
        other => other.into(),
    })?;
    let species = args
        .species
        .clone()
        .or_else(|| from.as_ref().and_then(|f| f.species.clone()))
        .unwrap_or_else(|| "unspecified".to_string());
    let created_from = match &args.from_fit {
        Some(p) => format!("fit_report:{}", p.display()),
        None => "cli".to_string(),
    };
    Ok(recombine(a, b, rho, species_key(&species)?)?.with_created_from(created_from))
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<RunReport> {
    let eq_text = String::from_utf8(read_file(&args.equation)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.equation.display())))?;
    let eq = with_file(&args.equation, VolumeBiomassEquation::from_json(&eq_text))?;
    let bytes = read_file(&args.stands)?;
    let parsed = with_file(&args.stands, parse_stands_csv(&bytes))?;
    let mut diagnostics = render_diagnostics(&args.stands, &parsed.diagnostics);
    let est = with_file(&args.stands, estimate_regional(&eq, &parsed.value, args.max_observed_volume))?;
    diagnostics.extend(est.warnings.iter().cloned());
    let results = json!({
        "equation": eq,
        "stands": parsed.value.len(),
        "total_t": est.total,
        "per_stand": est.per_stand,
    });
    Ok(report("estimate", config_of(args), results, diagnostics))
}

fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<RunReport> {
    let usage = |e: Error| CliError::Usage(e.to_string());
    let cfg = PopulationConfig {
        n_stands: args.stands_n,
        area_range: (args.area_min, args.area_max),
        volume_range: (args.volume_min, args.volume_max),
        volume_distribution: match args.volume_dist {
            VolumeDistArg::Uniform => VolumeDistribution::Uniform,
            VolumeDistArg::LogUniform => VolumeDistribution::LogUniform,
        },
        rho_mode: match args.rho_mode {
            RhoModeArg::Homogeneous => RhoMode::Homogeneous { value: args.rho },
            RhoModeArg::Heterogeneous => RhoMode::Heterogeneous {
                center: args.rho,
                relative_halfwidth: args.rho_halfwidth,
            },
        },
        allometry: Allometry {
            a: args.a_pop,
            b: args.b_pop,
        },
        seed: args.seed,
    };
    cfg.validate().map_err(usage)?;
    let noise = NoiseModel {
        volume_cv: args.noise_volume_cv,
        biomass_cv: args.noise_biomass_cv,
        outlier_prob: args.noise_outlier_prob,
    };
    noise.validate().map_err(usage)?;
    let exp = ExperimentConfig {
        repetitions: args.reps,
        plot_counts: args.plots.clone(),
        ..Default::default()
    };

    let pop = generate_population(&cfg)?;
    if let Some(path) = &args.export_population {
        fs::write(path, export_population(&pop.stands))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let run = || run_experiment_on(&pop, &cfg, &noise, &exp);
    let summary = match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Data(e.to_string()))?
            .install(run),
        None => run(),
    }
    .map_err(|e| match e {
        Error::Config(m) => CliError::Usage(m),
        other => other.into(),
    })?;

    let diagnostics = summary
        .by_plot_count
        .iter()
        .filter(|b| b.failed > 0)
        .map(|b| format!("n={}: {} repetition(s) failed and were excluded", b.plots, b.failed))
        .collect();
    let results = serde_json::to_value(&summary).expect("summary serializes");
    Ok(report("simulate", config_of(args), results, diagnostics))
}

/// Plot species name to one or more density-database names.
fn load_aliases(path: &Path) -> CliResult<BTreeMap<String, Vec<String>>> {
    let bytes = read_file(path)?;
    let mut rdr = crate::dataio::csv_reader(&bytes);
    let idx = with_file(path, crate::dataio::read_headers(&mut rdr, &["plot_name", "density_name"]))?;
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in rdr.byte_records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let f = crate::dataio::row_fields(&rec, &idx, &["plot_name", "density_name"])
            .map_err(|m| CliError::Data(format!("{}: {m}", path.display())))?;
        if !f[0].is_empty() && !f[1].is_empty() {
            let names = map.entry(f[0].to_string()).or_default();
            if !names.iter().any(|n| n == f[1]) {
                names.push(f[1].to_string());
            }
        }
    }
    Ok(map)
}

pub fn cmd_density(args: &DensityArgs) -> CliResult<RunReport> {
    if args.fitted.is_some() && args.species.is_none() {
        return Err(CliError::Usage("--fitted requires --species".into()));
    }
    let bytes = read_file(&args.input)?;
    let parsed = with_file(&args.input, parse_density_csv(&bytes))?;
    let mut diagnostics = render_diagnostics(&args.input, &parsed.diagnostics);
    let aliases = match &args.alias {
        Some(p) => load_aliases(p)?,
        None => BTreeMap::new(),
    };

    let results = match &args.species {
        Some(name) => {
            let lookup = aliases.get(name).cloned().unwrap_or_else(|| vec![name.clone()]);
            let key = species_key(name)?;
            // Measurements of every aliased taxon are pooled under the plot name.
            let pooled: Vec<DensityMeasurement> = parsed
                .value
                .iter()
                .filter(|m| lookup.iter().any(|n| n == m.species.as_str()))
                .map(|m| DensityMeasurement { species: key.clone(), density: m.density })
                .collect();
            match summarize_density(&pooled, &key) {
                Ok(reference) => {
                    let error = match args.fitted {
                        Some(f) => {
                            let pct = rho_error(f, reference.mean)?;
                            json!({ "percent": pct, "display": format!("{}%", pct.round() as i64) })
                        }
                        None => Value::Null,
                    };
                    json!({ "species": name, "density_names": lookup, "reference": reference, "rho_error": error })
                }
                Err(_) => {
                    diagnostics.push(format!("no reference for `{}`", lookup.join("`, `")));
                    json!({ "species": name, "density_names": lookup, "reference": Value::Null, "rho_error": Value::Null })
                }
            }
        }
        None => {
            let table: Vec<_> = summarize_all(&parsed.value).into_values().collect();
            json!({ "references": table, "aliases": aliases })
        }
    };
    Ok(report("density", config_of(args), results, diagnostics))
}
