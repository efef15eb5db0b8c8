//! C ABI for `volbio`.
//!
//! Every fallible function returns a [`VolbioStatus`]; on failure the message
//! is available from [`volbio_last_error`] on the same thread. Datasets and
//! equations are opaque handles owned by the caller and released with their
//! `_free` function. Strings returned by the library are released with
//! [`volbio_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;
use std::slice;

use volbio::dataio::{parse_plot_csv, Dataset, SpeciesKey};
use volbio::density::{choose_rho, RhoOperands, RhoStrategy};
use volbio::recombine::{predict_total, recombine, stem_ratio, VolumeBiomassEquation};
use volbio::regression::{coefficient_of_determination, fit_direct, fit_power, fit_slope_origin};
use volbio::simulate::{run_experiment, ExperimentConfig, NoiseModel, PopulationConfig};
use volbio::zone::{refit_excluding, RestrictedZone};
use volbio::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolbioStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    FitError = 3,
    Starved = 4,
    MissingOperand = 5,
    ParseError = 6,
    ConfigError = 7,
    InvalidUtf8 = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolbioRhoStrategy {
    FitIncluding = 0,
    FitExcluding = 1,
    Wbd = 2,
    AvgWbdIncluding = 3,
    AvgWbdExcluding = 4,
}

impl From<VolbioRhoStrategy> for RhoStrategy {
    fn from(s: VolbioRhoStrategy) -> Self {
        match s {
            VolbioRhoStrategy::FitIncluding => RhoStrategy::FitIncluding,
            VolbioRhoStrategy::FitExcluding => RhoStrategy::FitExcluding,
            VolbioRhoStrategy::Wbd => RhoStrategy::Wbd,
            VolbioRhoStrategy::AvgWbdIncluding => RhoStrategy::AvgWbdIncluding,
            VolbioRhoStrategy::AvgWbdExcluding => RhoStrategy::AvgWbdExcluding,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VolbioPowerFit {
    pub a: f64,
    pub b: f64,
    pub cd: f64,
    pub n: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VolbioSlopeFit {
    pub rho: f64,
    pub cd: f64,
    pub n: usize,
    /// Plots excluded by the zone screen (0 for a plain fit).
    pub n_excluded: usize,
}

/// Opaque plot dataset.
pub struct VolbioDataset {
    inner: Dataset,
    rejected_rows: usize,
}

/// Opaque volume-biomass equation.
pub struct VolbioEquation {
    inner: VolumeBiomassEquation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: VolbioStatus, msg: impl Into<String>) -> VolbioStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> VolbioStatus {
    match e {
        Error::MissingColumns { .. } | Error::Csv(_) => VolbioStatus::ParseError,
        Error::InvalidInput(_) => VolbioStatus::InvalidInput,
        Error::Fit(_) => VolbioStatus::FitError,
        Error::Starved { .. } => VolbioStatus::Starved,
        Error::MissingOperand(_) => VolbioStatus::MissingOperand,
        Error::Config(_) => VolbioStatus::ConfigError,
    }
}

fn from_error(e: Error) -> VolbioStatus {
    fail(status_of(&e), e.to_string())
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn volbio_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn volbio_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn pairs(xs: *const f64, ys: *const f64, n: usize) -> Option<Vec<(f64, f64)>> {
    if n == 0 {
        return Some(Vec::new());
    }
    if xs.is_null() || ys.is_null() {
        return None;
    }
    let xs: &[f64] = slice::from_raw_parts(xs, n);
    let ys: &[f64] = slice::from_raw_parts(ys, n);
    Some(xs.iter().copied().zip(ys.iter().copied()).collect())
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, VolbioStatus> {
    if s.is_null() {
        return Err(fail(VolbioStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(VolbioStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn out_string(s: String, out: *mut *mut c_char) -> VolbioStatus {
    match CString::new(s) {
        Ok(c) => {
            // SAFETY: caller checked `out` for NULL.
            unsafe { *out = c.into_raw() };
            VolbioStatus::Ok
        }
        Err(_) => fail(VolbioStatus::InvalidInput, "output contains NUL"),
    }
}

fn nan_to_none(x: f64) -> Option<f64> {
    if x.is_nan() {
        None
    } else {
        Some(x)
    }
}

/// Fits `y = a·x^b` in log space.
///
/// # Safety
/// `xs` and `ys` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_fit_power(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out: *mut VolbioPowerFit,
) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    let Some(p) = pairs(xs, ys, n) else {
        return fail(VolbioStatus::NullPointer, "null input array");
    };
    match fit_power(&p) {
        Ok(f) => {
            *out = VolbioPowerFit { a: f.a, b: f.b, cd: f.cd, n: f.n };
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Direct regression of total biomass on volume.
///
/// # Safety
/// As [`volbio_fit_power`].
#[no_mangle]
pub unsafe extern "C" fn volbio_fit_direct(
    volume: *const f64,
    total: *const f64,
    n: usize,
    out: *mut VolbioPowerFit,
) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    let Some(p) = pairs(volume, total, n) else {
        return fail(VolbioStatus::NullPointer, "null input array");
    };
    match fit_direct(&p) {
        Ok(f) => {
            *out = VolbioPowerFit { a: f.a, b: f.b, cd: f.cd, n: f.n };
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Least-squares slope through the origin.
///
/// # Safety
/// `volume` and `stem` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_fit_slope_origin(
    volume: *const f64,
    stem: *const f64,
    n: usize,
    out: *mut VolbioSlopeFit,
) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    let Some(p) = pairs(volume, stem, n) else {
        return fail(VolbioStatus::NullPointer, "null input array");
    };
    match fit_slope_origin(&p) {
        Ok(f) => {
            *out = VolbioSlopeFit { rho: f.rho, cd: f.cd, n: f.n, n_excluded: 0 };
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `observed` and `predicted` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_coefficient_of_determination(
    observed: *const f64,
    predicted: *const f64,
    n: usize,
    out: *mut f64,
) -> VolbioStatus {
    if out.is_null() || (n > 0 && (observed.is_null() || predicted.is_null())) {
        return fail(VolbioStatus::NullPointer, "null pointer argument");
    }
    let (o, p): (&[f64], &[f64]) = if n == 0 {
        (&[], &[])
    } else {
        (slice::from_raw_parts(observed, n), slice::from_raw_parts(predicted, n))
    };
    match coefficient_of_determination(o, p) {
        Ok(v) => {
            *out = v;
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// `100·(fitted − reference)/reference`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_rho_error(fitted: f64, reference: f64, out: *mut f64) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    match volbio::density::rho_error(fitted, reference) {
        Ok(v) => {
            *out = v;
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// `B_s^(1−b)/a`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_stem_ratio(a: f64, b: f64, stem: f64, out: *mut f64) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    match stem_ratio(a, b, stem) {
        Ok(v) => {
            *out = v;
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Parses plot CSV bytes into a dataset. Bad rows are skipped; their count
/// is available from [`volbio_dataset_rejected_rows`].
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_dataset_parse_csv(
    bytes: *const u8,
    len: usize,
    out: *mut *mut VolbioDataset,
) -> VolbioStatus {
    if out.is_null() || (len > 0 && bytes.is_null()) {
        return fail(VolbioStatus::NullPointer, "null pointer argument");
    }
    let data: &[u8] = if len == 0 { &[] } else { slice::from_raw_parts(bytes, len) };
    match parse_plot_csv(data, "ffi") {
        Ok(p) => {
            let rejected_rows = p.rejected();
            *out = Box::into_raw(Box::new(VolbioDataset {
                inner: p.value,
                rejected_rows,
            }));
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Number of records; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn volbio_dataset_len(ds: *const VolbioDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn volbio_dataset_rejected_rows(ds: *const VolbioDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.rejected_rows)
}

/// Restricts a dataset to one species, returning a new handle.
///
/// # Safety
/// `ds` must be a live handle, `species` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_dataset_filter_species(
    ds: *const VolbioDataset,
    species: *const c_char,
    out: *mut *mut VolbioDataset,
) -> VolbioStatus {
    let (Some(d), false) = (ds.as_ref(), out.is_null()) else {
        return fail(VolbioStatus::NullPointer, "null pointer argument");
    };
    let name = match str_arg(species) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let key = match SpeciesKey::new(name) {
        Ok(k) => k,
        Err(e) => return from_error(e),
    };
    let records = d.inner.records().iter().filter(|r| r.species == key).cloned().collect();
    match Dataset::new(d.inner.source_label(), records) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(VolbioDataset { inner, rejected_rows: 0 }));
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Refits both relationships with restricted-zone members removed.
///
/// # Safety
/// `ds` must be a live handle; `power` and `slope` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_dataset_refit_excluding(
    ds: *const VolbioDataset,
    max_wood_density: f64,
    max_stem_fraction: f64,
    power: *mut VolbioPowerFit,
    slope: *mut VolbioSlopeFit,
) -> VolbioStatus {
    let Some(d) = ds.as_ref() else {
        return fail(VolbioStatus::NullPointer, "null dataset");
    };
    if power.is_null() || slope.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    let zone = match RestrictedZone::new(max_wood_density, max_stem_fraction) {
        Ok(z) => z,
        Err(e) => return from_error(e),
    };
    match refit_excluding(&d.inner, &zone) {
        Ok(r) => {
            *power = VolbioPowerFit { a: r.power.a, b: r.power.b, cd: r.power.cd, n: r.power.n };
            *slope = VolbioSlopeFit {
                rho: r.slope.rho,
                cd: r.slope.cd,
                n: r.slope.n,
                n_excluded: r.slope.excluded_ids.len(),
            };
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn volbio_dataset_free(ds: *mut VolbioDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Chooses ρ by `strategy` and recombines `a`, `b` into an equation.
/// Operands the strategy does not need may be NaN; a needed NaN operand
/// yields `MissingOperand`.
///
/// # Safety
/// `species` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_new(
    a: f64,
    b: f64,
    strategy: VolbioRhoStrategy,
    rho_fit_including: f64,
    rho_fit_excluding: f64,
    wbd: f64,
    species: *const c_char,
    out: *mut *mut VolbioEquation,
) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    let name = match str_arg(species) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let built = SpeciesKey::new(name).and_then(|key| {
        let rho = choose_rho(
            strategy.into(),
            RhoOperands {
                fit_including: nan_to_none(rho_fit_including),
                fit_excluding: nan_to_none(rho_fit_excluding),
                wbd: nan_to_none(wbd),
            },
        )?;
        recombine(a, b, rho, key)
    });
    match built {
        Ok(eq) => {
            *out = Box::into_raw(Box::new(VolbioEquation { inner: eq.with_created_from("ffi") }));
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Loads an equation from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_from_json(json: *const c_char, out: *mut *mut VolbioEquation) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    let text = match str_arg(json) {
        Ok(s) => s,
        Err(st) => return st,
    };
    match VolumeBiomassEquation::from_json(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(VolbioEquation { inner }));
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// NaN for NULL.
///
/// # Safety
/// `eq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_alpha(eq: *const VolbioEquation) -> f64 {
    eq.as_ref().map_or(f64::NAN, |e| e.inner.alpha())
}

/// NaN for NULL.
///
/// # Safety
/// `eq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_beta(eq: *const VolbioEquation) -> f64 {
    eq.as_ref().map_or(f64::NAN, |e| e.inner.beta())
}

/// NaN for NULL.
///
/// # Safety
/// `eq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_rho(eq: *const VolbioEquation) -> f64 {
    eq.as_ref().map_or(f64::NAN, |e| e.inner.rho().value)
}

/// Total biomass per hectare at `volume`.
///
/// # Safety
/// `eq` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_predict(eq: *const VolbioEquation, volume: f64, out: *mut f64) -> VolbioStatus {
    let (Some(e), false) = (eq.as_ref(), out.is_null()) else {
        return fail(VolbioStatus::NullPointer, "null pointer argument");
    };
    match predict_total(&e.inner, volume) {
        Ok(v) => {
            *out = v;
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Regional total `Σ area·α·V^β`, tonnes.
///
/// # Safety
/// `eq` must be a live handle; `areas` and `volumes` must point to `n`
/// doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_estimate_regional(
    eq: *const VolbioEquation,
    areas: *const f64,
    volumes: *const f64,
    n: usize,
    out: *mut f64,
) -> VolbioStatus {
    let (Some(e), false) = (eq.as_ref(), out.is_null()) else {
        return fail(VolbioStatus::NullPointer, "null pointer argument");
    };
    let Some(p) = pairs(areas, volumes, n) else {
        return fail(VolbioStatus::NullPointer, "null input array");
    };
    let stands = match p
        .iter()
        .enumerate()
        .map(|(i, &(area, volume))| volbio::recombine::StandArea::new(i.to_string(), area, volume))
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(s) => s,
        Err(e) => return from_error(e),
    };
    match volbio::recombine::estimate_regional(&e.inner, &stands, None) {
        Ok(r) => {
            *out = r.total;
            VolbioStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Serializes an equation to JSON. Free the result with [`volbio_string_free`].
///
/// # Safety
/// `eq` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_to_json(eq: *const VolbioEquation, out: *mut *mut c_char) -> VolbioStatus {
    let (Some(e), false) = (eq.as_ref(), out.is_null()) else {
        return fail(VolbioStatus::NullPointer, "null pointer argument");
    };
    out_string(e.inner.to_json(), out)
}

/// # Safety
/// `eq` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn volbio_equation_free(eq: *mut VolbioEquation) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

#[derive(serde::Deserialize)]
struct ExperimentRequest {
    population: PopulationConfig,
    #[serde(default)]
    noise: Option<NoiseModel>,
    #[serde(default)]
    experiment: Option<ExperimentConfig>,
}

/// Runs the sampling experiment described by `request_json`
/// (`{"population": {...}, "noise": {...}, "experiment": {...}}`, the last
/// two optional) and returns the summary as JSON.
///
/// # Safety
/// `request_json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn volbio_run_experiment_json(
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> VolbioStatus {
    if out.is_null() {
        return fail(VolbioStatus::NullPointer, "null output");
    }
    let text = match str_arg(request_json) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let req: ExperimentRequest = match serde_json::from_str(text) {
        Ok(r) => r,
        Err(e) => return fail(VolbioStatus::ParseError, format!("request json: {e}")),
    };
    let noise = req.noise.unwrap_or_default();
    let exp = req.experiment.unwrap_or_default();
    match run_experiment(&req.population, &noise, &exp) {
        Ok(summary) => out_string(serde_json::to_string(&summary).expect("summary serializes"), out),
        Err(e) => from_error(e),
    }
}
