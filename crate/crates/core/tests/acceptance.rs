//! Acceptance criteria, run in order with one `PASS`/`FAIL`/`SKIP` line each.
//! Exits non-zero when any criterion fails.

// Tabulated 3.14 is a fitted coefficient; negated comparisons also fail on NaN.
#![allow(clippy::approx_constant, clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volbio::dataio::{parse_plot_csv, Dataset, PlotRecord, SpeciesKey};
use volbio::density::{choose_rho, rho_error, RhoOperands, RhoStrategy};
use volbio::recombine::{recombine, stem_ratio};
use volbio::regression::{fit_direct, fit_power, fit_slope_origin};
use volbio::simulate::{run_experiment, ExperimentConfig, NoiseModel, PopulationConfig};
use volbio::zone::{refit_excluding, RestrictedZone};

enum Outcome {
    Checked { name: String, failures: Vec<String>, notes: Vec<String> },
    Skipped(String),
}

fn checked(name: &str, failures: Vec<String>) -> Outcome {
    Outcome::Checked { name: name.to_string(), failures, notes: Vec::new() }
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1_recombination_anchors),
        (2, criterion_2_rho_error_anchors),
        (3, criterion_3_stem_ratio_table),
        (4, criterion_4_homogeneous_simulation),
        (5, criterion_5_heterogeneous_simulation),
        (6, criterion_6_oracle_equivalence),
        (7, criterion_7_zone_screening),
        (8, criterion_8_dataset_integration),
    ];
    let mut failed = Vec::new();
    for (id, f) in criteria {
        let outcome = std::panic::catch_unwind(f)
            .unwrap_or_else(|_| checked("panicked", vec!["criterion panicked".into()]));
        let mut out = std::io::stdout().lock();
        match outcome {
            Outcome::Skipped(why) => {
                let _ = writeln!(out, "criterion {id} SKIP: {why}");
            }
            Outcome::Checked { name, failures, notes } => {
                let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "criterion {id} {verdict}: {name}");
                for f in &failures {
                    let _ = writeln!(out, "    {f}");
                }
                for n in &notes {
                    let _ = writeln!(out, "    . {n}");
                }
                if !failures.is_empty() {
                    failed.push(id);
                }
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

fn key(s: &str) -> SpeciesKey {
    SpeciesKey::new(s).unwrap()
}

struct Row {
    no: u32,
    a: f64,
    b: f64,
    rho1: f64,
    rho2: Option<f64>,
    alpha2: f64,
    err_pct: f64,
}

const fn row(no: u32, a: f64, b: f64, rho1: f64, rho2: f64, alpha2: f64, err_pct: f64) -> Row {
    Row { no, a, b, rho1, rho2: Some(rho2), alpha2, err_pct }
}

/// Species parameter table: a, b, fitted ρ, reference ρ, α from reference ρ,
/// and the tabulated percentage error on ρ.
const TABLE: [Row; 30] = [
    row(1, 3.32, 0.86, 0.41, 0.35, 1.35, 18.0),
    row(2, 3.20, 0.85, 0.42, 0.46, 1.66, -9.0),
    row(3, 1.91, 0.95, 0.45, 0.47, 0.93, -5.0),
    row(4, 2.90, 0.86, 0.47, 0.39, 1.29, 21.0),
    row(5, 3.40, 0.84, 0.39, 0.40, 1.58, -2.0),
    row(6, 4.50, 0.80, 0.43, 0.44, 2.34, -1.0),
    row(7, 2.52, 0.89, 0.35, 0.31, 0.89, 13.0),
    row(8, 1.96, 0.93, 0.47, 0.48, 0.99, -2.0),
    row(9, 3.80, 0.83, 0.35, 0.31, 1.44, 12.0),
    row(10, 3.15, 0.87, 0.67, 0.65, 2.16, 3.0),
    row(11, 2.07, 0.92, 0.41, 0.45, 0.99, -8.0),
    row(12, 2.85, 0.87, 0.56, 0.61, 1.86, -7.0),
    row(13, 2.78, 0.87, 0.40, 0.36, 1.14, 12.0),
    row(14, 4.28, 0.80, 0.41, 0.49, 2.42, -16.0),
    row(15, 4.27, 0.80, 0.48, 0.49, 2.41, 9.0),
    row(16, 2.57, 0.89, 0.44, 0.40, 1.14, 11.0),
    row(17, 2.98, 0.87, 0.41, 0.35, 1.19, 17.0),
    row(18, 2.90, 0.88, 0.54, 0.60, 1.86, -9.0),
    row(19, 3.14, 0.85, 0.51, 0.54, 1.86, -5.0),
    row(20, 2.22, 0.91, 0.47, 0.46, 1.10, 2.0),
    row(21, 2.13, 0.91, 0.44, 0.40, 0.92, 10.0),
    row(22, 3.42, 0.84, 0.44, 0.40, 1.59, 10.0),
    row(23, 3.39, 0.84, 0.39, 0.41, 1.60, -6.0),
    row(24, 3.23, 0.86, 0.43, 0.43, 1.57, -1.0),
    row(25, 1.88, 0.96, 0.64, 0.63, 1.21, 2.0),
    row(26, 2.59, 0.90, 0.41, 0.41, 1.16, -1.0),
    row(27, 2.90, 0.88, 0.53, 0.58, 1.80, -9.0),
    row(28, 4.04, 0.81, 0.40, 0.47, 2.19, -15.0),
    Row { no: 29, a: 3.71, b: 0.86, rho1: 0.65, rho2: None, alpha2: 2.43, err_pct: 7.0 },
    row(30, 3.30, 0.87, 0.61, 0.61, 2.15, 0.0),
];

fn criterion_1_recombination_anchors() -> Outcome {
    let mut failures = Vec::new();
    let mut rows = 0;
    for r in &TABLE {
        let Some(rho2) = r.rho2 else { continue };
        let choice = choose_rho(RhoStrategy::Wbd, RhoOperands { wbd: Some(rho2), ..Default::default() }).unwrap();
        let eq = recombine(r.a, r.b, choice, key("row")).unwrap();
        let oracle = r.a * rho2.powf(r.b);
        if (eq.alpha() - oracle).abs() > 1e-12 {
            failures.push(format!("row {}: alpha {} disagrees with a*rho^b {}", r.no, eq.alpha(), oracle));
        }
        if (eq.alpha() - r.alpha2).abs() > 0.02 {
            failures.push(format!("row {}: alpha {:.4} vs tabled {:.2}", r.no, eq.alpha(), r.alpha2));
        }
        rows += 1;
    }
    if rows != 29 {
        failures.push(format!("expected 29 rows with a reference rho, saw {rows}"));
    }
    checked("recombined alpha within 0.02 of tabled second alpha", failures)
}

fn criterion_2_rho_error_anchors() -> Outcome {
    let mut failures = Vec::new();
    for r in &TABLE {
        let Some(rho2) = r.rho2 else { continue };
        let e = rho_error(r.rho1, rho2).unwrap();
        let oracle = (r.rho1 - rho2) / rho2 * 100.0;
        if (e - oracle).abs() > 1e-9 {
            failures.push(format!("row {}: {e} disagrees with closed form {oracle}", r.no));
        }
        if (e - r.err_pct).abs() > 1.5 {
            failures.push(format!("row {}: rho error {e:.2}% vs tabled {}%", r.no, r.err_pct));
        }
        if matches!(r.no, 2 | 4 | 8) && e.round() != r.err_pct {
            failures.push(format!("row {}: rounded {} vs tabled {}", r.no, e.round(), r.err_pct));
        }
    }
    checked("rho error within 1.5 points of tabled value", failures)
}

/// Stem-ratio table: a, b, ratios at B_s = 50..600, tabulated average.
const STEM_LEVELS: [f64; 7] = [50.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0];
const RATIOS: [(f64, f64, [f64; 7], f64); 30] = [
    (3.32, 0.86, [0.52, 0.57, 0.63, 0.67, 0.70, 0.72, 0.74], 0.65),
    (3.20, 0.85, [0.56, 0.62, 0.69, 0.74, 0.77, 0.79, 0.82], 0.71),
    (1.91, 0.95, [0.64, 0.66, 0.68, 0.70, 0.71, 0.71, 0.72], 0.69),
    (2.90, 0.86, [0.60, 0.66, 0.72, 0.77, 0.80, 0.82, 0.84], 0.74),
    (3.40, 0.84, [0.55, 0.61, 0.69, 0.73, 0.77, 0.79, 0.82], 0.71),
    (4.50, 0.80, [0.49, 0.56, 0.64, 0.70, 0.74, 0.77, 0.80], 0.67),
    (2.52, 0.89, [0.61, 0.66, 0.71, 0.74, 0.77, 0.79, 0.80], 0.73),
    (1.96, 0.93, [0.67, 0.70, 0.74, 0.76, 0.78, 0.79, 0.80], 0.75),
    (3.80, 0.83, [0.51, 0.58, 0.65, 0.69, 0.73, 0.76, 0.78], 0.67),
    (3.15, 0.87, [0.53, 0.58, 0.63, 0.67, 0.69, 0.71, 0.73], 0.65),
    (2.07, 0.92, [0.66, 0.70, 0.74, 0.76, 0.78, 0.79, 0.81], 0.75),
    (2.85, 0.87, [0.58, 0.64, 0.70, 0.74, 0.76, 0.79, 0.81], 0.72),
    (2.78, 0.87, [0.60, 0.65, 0.72, 0.76, 0.78, 0.81, 0.83], 0.73),
    (4.28, 0.80, [0.51, 0.59, 0.67, 0.73, 0.77, 0.81, 0.84], 0.70),
    (4.27, 0.80, [0.51, 0.59, 0.68, 0.73, 0.78, 0.81, 0.84], 0.71),
    (2.57, 0.89, [0.60, 0.65, 0.70, 0.73, 0.75, 0.77, 0.79], 0.71),
    (2.98, 0.87, [0.56, 0.61, 0.67, 0.70, 0.73, 0.75, 0.77], 0.69),
    (2.90, 0.88, [0.55, 0.60, 0.65, 0.68, 0.71, 0.73, 0.74], 0.67),
    (3.14, 0.85, [0.57, 0.64, 0.71, 0.75, 0.78, 0.81, 0.83], 0.73),
    (2.22, 0.91, [0.64, 0.68, 0.73, 0.75, 0.77, 0.79, 0.80], 0.74),
    (2.13, 0.91, [0.67, 0.71, 0.76, 0.78, 0.81, 0.82, 0.83], 0.77),
    (3.42, 0.84, [0.55, 0.61, 0.68, 0.73, 0.76, 0.79, 0.81], 0.71),
    (3.39, 0.84, [0.55, 0.62, 0.69, 0.73, 0.77, 0.80, 0.82], 0.71),
    (3.23, 0.86, [0.54, 0.59, 0.65, 0.69, 0.72, 0.74, 0.76], 0.67),
    (1.88, 0.96, [0.62, 0.64, 0.66, 0.67, 0.68, 0.68, 0.69], 0.66),
    (2.59, 0.90, [0.57, 0.61, 0.66, 0.68, 0.70, 0.72, 0.73], 0.67),
    (2.90, 0.88, [0.55, 0.60, 0.65, 0.68, 0.71, 0.73, 0.74], 0.67),
    (4.04, 0.81, [0.52, 0.59, 0.68, 0.73, 0.77, 0.81, 0.83], 0.71),
    (3.71, 0.86, [0.47, 0.51, 0.57, 0.60, 0.62, 0.64, 0.66], 0.58),
    (3.30, 0.87, [0.50, 0.55, 0.60, 0.64, 0.66, 0.68, 0.70], 0.62),
];

/// Rows the "close to 0.7 within ±10%" footnote speaks for; the two
/// tropical rows sit visibly below the band in the table itself.
const BAND_ROWS: std::ops::RangeInclusive<usize> = 1..=28;

fn criterion_3_stem_ratio_table() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, (a, b, cells, _ave)) in RATIOS.iter().enumerate() {
        let no = i + 1;
        let mut sum = 0.0;
        for (bs, want) in STEM_LEVELS.iter().zip(cells) {
            let r = stem_ratio(*a, *b, *bs).unwrap();
            let oracle = bs / (a * bs.powf(*b));
            if (r - oracle).abs() > 1e-12 {
                failures.push(format!("row {no} at {bs}: {r} disagrees with B_s/(a*B_s^b) {oracle}"));
            }
            worst = worst.max((r - want).abs());
            if (r - want).abs() > 0.005 {
                failures.push(format!("row {no} at {bs}: {r:.4} vs tabled {want}"));
            }
            sum += r;
        }
        let avg = sum / STEM_LEVELS.len() as f64;
        if BAND_ROWS.contains(&no) && !(0.63..=0.77).contains(&avg) {
            failures.push(format!("row {no}: average ratio {avg:.4} outside 0.7 ± 10%"));
        }
    }
    let name = format!("all 210 stem ratios within 0.005 (worst {worst:.5}); row averages of rows 1-28 within 0.7 ± 10%");
    checked(&name, failures)
}

fn criterion_4_homogeneous_simulation() -> Outcome {
    let cfg = PopulationConfig::homogeneous(20_240_601);
    let exp = ExperimentConfig::default();
    let t0 = Instant::now();
    let s = run_experiment(&cfg, &NoiseModel::none(), &exp).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let want_alpha = 2.85 * 0.59f64.powf(0.87);
    let mut failures = Vec::new();
    if (want_alpha - 1.80).abs() > 0.02 {
        failures.push(format!("population alpha {want_alpha} not near 1.80"));
    }
    for p in &s.by_plot_count {
        if p.failed != 0 {
            failures.push(format!("n={}: {} failed repetitions", p.plots, p.failed));
        }
        for (label, est) in [("before", &p.before), ("after", &p.after)] {
            let tag = format!("n={} {label}", p.plots);
            if (est.alpha.mean - 1.80).abs() > 0.02 || (est.alpha.mean - want_alpha).abs() > 1e-9 {
                failures.push(format!("{tag}: alpha {} vs {want_alpha}", est.alpha.mean));
            }
            if (est.beta.mean - 0.87).abs() > 1e-9 {
                failures.push(format!("{tag}: beta {}", est.beta.mean));
            }
            if est.alpha.sd > 1e-9 || est.beta.sd > 1e-9 {
                failures.push(format!("{tag}: SD alpha {} beta {}", est.alpha.sd, est.beta.sd));
            }
            if est.e.mean / s.true_total > 1e-9 {
                failures.push(format!("{tag}: residual {} of {}", est.e.mean, s.true_total));
            }
        }
    }
    let (a20, a100) = (s.for_plots(20).unwrap(), s.for_plots(100).unwrap());
    if (a20.after.alpha.mean - a100.after.alpha.mean).abs() > 1e-9 {
        failures.push("alpha depends on plot count".into());
    }
    if elapsed >= 1.0 {
        failures.push(format!("runtime {elapsed:.2}s"));
    }
    let name = format!(
        "zero-noise homogeneous population: alpha {:.4}, beta 0.87, SD 0, e 0 at n=20 and n=100 ({elapsed:.2}s)",
        a20.after.alpha.mean
    );
    checked(&name, failures)
}

fn criterion_5_heterogeneous_simulation() -> Outcome {
    let exp = ExperimentConfig::default();
    let noise = NoiseModel::default();
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    let t0 = Instant::now();
    for seed in 1..=5u64 {
        let s = run_experiment(&PopulationConfig::heterogeneous(seed), &noise, &exp).unwrap();
        for p in &s.by_plot_count {
            detail.push(format!(
                "seed {seed} n={:>3}: SD alpha {:.4}/{:.4} SD beta {:.4}/{:.4} e {:.0}/{:.0} (before/after, {} ok)",
                p.plots, p.before.alpha.sd, p.after.alpha.sd, p.before.beta.sd, p.after.beta.sd,
                p.before.e.mean, p.after.e.mean, p.repetitions,
            ));
            let tag = format!("seed {seed} n={}", p.plots);
            if p.repetitions < 500 {
                failures.push(format!("{tag}: only {} successful repetitions", p.repetitions));
            }
            if !(p.after.alpha.sd < p.before.alpha.sd) {
                failures.push(format!("{tag}: SD(alpha) after {} >= before {}", p.after.alpha.sd, p.before.alpha.sd));
            }
            if !(p.after.beta.sd < p.before.beta.sd) {
                failures.push(format!("{tag}: SD(beta) after {} >= before {}", p.after.beta.sd, p.before.beta.sd));
            }
            if !(p.after.e.mean <= p.before.e.mean) {
                failures.push(format!("{tag}: mean e after {:.0} > before {:.0}", p.after.e.mean, p.before.e.mean));
            }
        }
        let (small, large) = (s.for_plots(20).unwrap(), s.for_plots(100).unwrap());
        for (label, lo, hi) in [
            ("before alpha", large.before.alpha.sd, small.before.alpha.sd),
            ("before beta", large.before.beta.sd, small.before.beta.sd),
            ("after alpha", large.after.alpha.sd, small.after.alpha.sd),
            ("after beta", large.after.beta.sd, small.after.beta.sd),
        ] {
            if !(lo < hi) {
                failures.push(format!("seed {seed}: SD {label} at n=100 {lo} not below n=20 {hi}"));
            }
        }
    }
    let name = format!(
        "heterogeneous population, default noise, 500 reps x 5 seeds: SD and residual orderings ({:.1}s)",
        t0.elapsed().as_secs_f64()
    );
    Outcome::Checked { name, failures, notes: detail }
}

fn criterion_6_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();

    let mut worst_slope: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..60);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let v = rng.random_range(1.0..800.0);
                (v, v * rng.random_range(0.2..0.9) * rng.random_range(0.7..1.3))
            })
            .collect();
        let svb: f64 = pairs.iter().map(|(v, b)| v * b).sum();
        let svv: f64 = pairs.iter().map(|(v, _)| v * v).sum();
        let oracle = svb / svv;
        let got = fit_slope_origin(&pairs).unwrap().rho;
        worst_slope = worst_slope.max(((got - oracle) / oracle).abs());
    }
    if worst_slope > 1e-12 {
        failures.push(format!("slope relative error {worst_slope:e}"));
    }

    let mut worst_power: f64 = 0.0;
    let mut worst_compose: f64 = 0.0;
    for _ in 0..200 {
        let a = rng.random_range(1.5..5.0);
        let b = rng.random_range(0.75..1.0);
        let rho = rng.random_range(0.25..0.7);
        let n = rng.random_range(3..80);
        let vols: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..700.0)).collect();
        let st: Vec<(f64, f64)> = vols.iter().map(|v| (rho * v, a * (rho * v).powf(b))).collect();
        let p = fit_power(&st).unwrap();
        worst_power = worst_power.max(((p.a - a) / a).abs()).max(((p.b - b) / b).abs());

        let vs: Vec<(f64, f64)> = vols.iter().map(|v| (*v, rho * v)).collect();
        let vt: Vec<(f64, f64)> = vols.iter().zip(&st).map(|(v, (_, t))| (*v, *t)).collect();
        let s = fit_slope_origin(&vs).unwrap();
        let choice = choose_rho(RhoStrategy::FitIncluding, RhoOperands { fit_including: Some(s.rho), ..Default::default() }).unwrap();
        let eq = recombine(p.a, p.b, choice, key("c")).unwrap();
        let d = fit_direct(&vt).unwrap();
        worst_compose = worst_compose
            .max(((d.a - eq.alpha()) / eq.alpha()).abs())
            .max(((d.b - eq.beta()) / eq.beta()).abs());
    }
    if worst_power > 1e-9 {
        failures.push(format!("power fit relative error {worst_power:e}"));
    }
    if worst_compose > 1e-9 {
        failures.push(format!("direct vs recombined relative error {worst_compose:e}"));
    }
    let name = format!(
        "oracles: slope {worst_slope:.1e}, power {worst_power:.1e}, direct vs recombined {worst_compose:.1e}"
    );
    checked(&name, failures)
}

fn rec(id: &str, v: Option<f64>, bs: Option<f64>, bt: Option<f64>) -> PlotRecord {
    PlotRecord::new(key("Z"), id, None, v, bs, bt).unwrap()
}

fn criterion_7_zone_screening() -> Outcome {
    let mut failures = Vec::new();
    // Implied density B_s/V and stem fraction B_s/B_t per plot, by hand:
    //   ok1 0.50 / 0.625   ok2 0.45 / 0.60    ok3 0.55 / 0.65    ok4 0.40 / 0.571
    //   dens 0.80 / 0.667 (density only)      frac 0.50 / 0.833 (fraction only)
    //   both 0.90 / 0.90                       edge 0.70 / 0.80 (on both bounds)
    //   vonly 0.75 (no B_t)                     tonly frac 0.85 (no V)
    //   ok5 0.60 / 0.70    ok6 0.35 / 0.583
    let ds = Dataset::new(
        "constructed",
        vec![
            rec("ok1", Some(100.0), Some(50.0), Some(80.0)),
            rec("dens", Some(50.0), Some(40.0), Some(60.0)),
            rec("ok2", Some(200.0), Some(90.0), Some(150.0)),
            rec("frac", Some(120.0), Some(60.0), Some(72.0)),
            rec("ok3", Some(300.0), Some(165.0), Some(253.846)),
            rec("both", Some(100.0), Some(90.0), Some(100.0)),
            rec("edge", Some(100.0), Some(70.0), Some(87.5)),
            rec("vonly", Some(80.0), Some(60.0), None),
            rec("ok4", Some(250.0), Some(100.0), Some(175.0)),
            rec("tonly", None, Some(85.0), Some(100.0)),
            rec("ok5", Some(400.0), Some(240.0), Some(342.857)),
            rec("ok6", Some(150.0), Some(52.5), Some(90.0)),
        ],
    )
    .unwrap();
    let zone = RestrictedZone::default();
    let r = refit_excluding(&ds, &zone).unwrap();
    let want_st = ["frac", "both", "tonly"];
    let want_vs = ["dens", "both", "vonly"];
    let want_union = ["dens", "frac", "both", "vonly", "tonly"];
    if r.excluded_stem_total != want_st {
        failures.push(format!("stem_total excluded {:?}, expected {want_st:?}", r.excluded_stem_total));
    }
    if r.excluded_volume_stem != want_vs {
        failures.push(format!("volume_stem excluded {:?}, expected {want_vs:?}", r.excluded_volume_stem));
    }
    if r.slope.excluded_ids != want_union {
        failures.push(format!("union {:?}, expected {want_union:?}", r.slope.excluded_ids));
    }
    // Each fit drops only its own relationship's members: the slope keeps
    // frac, the power fit keeps dens.
    if r.slope.n != 8 || r.power.n != 8 {
        failures.push(format!("survivor counts slope {} power {}", r.slope.n, r.power.n));
    }

    // Tighter bounds move the boundary plot and ok5 inside.
    let tight = RestrictedZone::new(0.58, 0.69).unwrap();
    let r = refit_excluding(&ds, &tight).unwrap();
    let want_vs = ["dens", "both", "edge", "vonly", "ok5"];
    if r.excluded_volume_stem != want_vs {
        failures.push(format!("tight volume_stem excluded {:?}, expected {want_vs:?}", r.excluded_volume_stem));
    }
    let want_st = ["frac", "both", "edge", "tonly", "ok5"];
    if r.excluded_stem_total != want_st {
        failures.push(format!("tight stem_total excluded {:?}, expected {want_st:?}", r.excluded_stem_total));
    }

    // Random datasets: the refitted slope never exceeds the density bound.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    for trial in 0..500 {
        let max_d = rng.random_range(0.3..1.0);
        let max_f = rng.random_range(0.5..0.95);
        let zone = RestrictedZone::new(max_d, max_f).unwrap();
        let n = rng.random_range(3..40);
        let recs = (0..n)
            .map(|i| {
                let v = rng.random_range(5.0..600.0);
                let bs = v * rng.random_range(0.1..1.3);
                let bt = bs / rng.random_range(0.3..0.99);
                rec(&format!("t{trial}-{i}"), Some(v), Some(bs), Some(bt))
            })
            .collect();
        let ds = Dataset::new("random", recs).unwrap();
        if let Ok(r) = refit_excluding(&ds, &zone) {
            fits += 1;
            worst = worst.max(r.slope.rho - max_d);
            if r.slope.rho > max_d {
                failures.push(format!("trial {trial}: rho {} above bound {max_d}", r.slope.rho));
            }
        }
    }
    if fits < 100 {
        failures.push(format!("only {fits} random refits succeeded"));
    }
    checked("hand-enumerated exclusions match; refitted rho never above max density", failures)
}

fn criterion_8_dataset_integration() -> Outcome {
    let path = std::env::var_os("VOLBIO_EUCALYPTUS_PLOTS");
    let Some(path) = path.filter(|p| std::path::Path::new(p).is_file()) else {
        return Outcome::Skipped(
            "dataset files absent; set VOLBIO_EUCALYPTUS_PLOTS to a plot CSV of the China Eucalyptus group to run".into(),
        );
    };
    let bytes = std::fs::read(&path).unwrap();
    let ds = parse_plot_csv(&bytes, "eucalyptus").unwrap().value;
    let mut failures = Vec::new();
    let st: Vec<_> = ds.records().iter().filter_map(|r| r.stem_total()).collect();
    let p = fit_power(&st).unwrap();
    if (p.a - 2.85).abs() > 0.05 || (p.b - 0.87).abs() > 0.05 {
        failures.push(format!("a {:.3} b {:.3}", p.a, p.b));
    }
    if (p.cd - 0.94).abs() > 0.03 {
        failures.push(format!("cd {:.3}", p.cd));
    }
    let r = refit_excluding(&ds, &RestrictedZone::default()).unwrap();
    if (r.slope.rho - 0.46).abs() > 0.03 {
        failures.push(format!("screened rho {:.3}", r.slope.rho));
    }
    checked("Eucalyptus plots reproduce a, b, CD and screened rho", failures)
}
