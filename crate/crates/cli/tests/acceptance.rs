//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stderr so it shows up in `cargo test` logs without `--nocapture`.
//!
//! Every check is evaluated and reported. The test fails unless the set of
//! failing checks is exactly `KNOWN_FAILURES`, so a new failure and a
//! surprising fix are both caught.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mixfit_core::cost::{
    cost_total_covariate, cost_total_density_ratio, expected_total_cost, CostProfile,
};
use mixfit_core::kernel::{gradient, jacobian, mixture_density, objective};
use mixfit_core::moments::{
    probability_average, r_squared, scaled_probability_average, scaled_probability_average_binary,
};
use mixfit_core::sim::{brute_force_oracle, random_scenario, InstanceGenerator, ShiftKind};
use mixfit_core::solver::{em_solve_observed, existence_check_binary};
use mixfit_core::{
    fit, BinnedDistribution, DensityRatioProfile, SimplexWeights, SolverConfig, SolverMethod,
};

/// The published band columns do not follow from the published prevalences:
/// band rates under a prior shift increase with the prevalence, so the 7.3%
/// column must carry the larger rates, yet the table prints the smaller ones
/// under it. Only the top band misses the ±0.5 pp window (in both columns);
/// the values match with the two columns exchanged.
const KNOWN_FAILURES: &[&str] = &[
    "1: KL band column vs published (35.4, 6.5, 3.3, 1.5, 0.6)",
    "1: Scaled band column vs published (34.6, 6.3, 3.2, 1.5, 0.6)",
];

// High-precision reference values from the band-level inputs of the
// mortgage report (last-period shares renormalized to sum to one).
const GOLDEN_PRIOR: f64 = 0.024_769_230_769_230_77;
const GOLDEN_COVARIATE: f64 = 0.028438;
const GOLDEN_R2: f64 = 0.077_032_902_242_415_67;
const GOLDEN_SCALED: f64 = 0.072_395_233_736_429_66;
const GOLDEN_ML: f64 = 0.070_228_039_316_217_28;
const GOLDEN_SCALED_BANDS: [f64; 5] = [
    0.351_604_384_286_359_5,
    0.064_654_361_950_704_48,
    0.033_047_853_315_334_9,
    0.015_206_662_396_910_42,
    0.006_120_334_216_110_965,
];
const GOLDEN_ML_BANDS: [f64; 5] = [
    0.34418017377123553,
    0.062_703_231_061_831,
    0.032017889328173565,
    0.014724267011186306,
    0.005_924_447_048_692_686,
];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, id: u8, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: format!("{id}: {name}"),
            pass,
            detail: detail.into(),
        });
    }
}

fn report(id: u8, title: &str, c: &Criterion) {
    let mut err = std::io::stderr().lock();
    let pass = c.checks.iter().all(|k| k.pass);
    let _ = writeln!(
        err,
        "criterion {id} [{title}]: {}",
        if pass { "PASS" } else { "FAIL" }
    );
    for k in &c.checks {
        let _ = writeln!(
            err,
            "    {} {} — {}",
            if k.pass { "ok  " } else { "FAIL" },
            k.name,
            k.detail
        );
    }
}

fn mixfit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mixfit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn grid_step(k: usize) -> f64 {
    match k {
        2 => 1e-3,
        3 => 1e-2,
        _ => 2e-2,
    }
}

/// `Σ v − 1` without rounding loss (Neumaier summation).
fn excess_mass(v: &[f64]) -> f64 {
    let (mut sum, mut carry) = (-1.0f64, 0.0f64);
    for &x in v {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + carry
}

/// `F(q) − F(p)` at the simplex points `p / Σp` and `q / Σq`, as
/// `Σ g ln(1 + Σ (q − p) X / D(p)) − ln(Σq / Σp)`. This keeps its accuracy
/// when the two objective values agree to many digits, and ignores the last-ulp
/// mass drift of stored weights.
fn likelihood_gain(g: &[f64], x: &[Vec<f64>], p: &[f64], q: &[f64]) -> f64 {
    let mass = g.iter().filter(|gb| **gb > 0.0).sum::<f64>();
    let drift = mass * (excess_mass(q).ln_1p() - excess_mass(p).ln_1p());
    g.iter()
        .zip(x)
        .filter(|(gb, _)| **gb > 0.0)
        .map(|(gb, row)| {
            let d: f64 = row.iter().zip(p).map(|(a, b)| a * b).sum();
            let delta: f64 = row
                .iter()
                .zip(p.iter().zip(q))
                .map(|(a, (b, c))| a * (c - b))
                .sum();
            gb * (delta / d).ln_1p()
        })
        .sum::<f64>()
        - drift
}

fn ratio_rows(r: &DensityRatioProfile) -> Vec<Vec<f64>> {
    (0..r.support().len()).map(|b| r.row(b).to_vec()).collect()
}

struct Instance {
    test: BinnedDistribution,
    ratios: DensityRatioProfile,
    oracle: SimplexWeights,
    step: f64,
}

/// Random instances (k ∈ {2, 3, 4}, 6–12 bins) whose test distribution is a
/// mixture of the components blended with unrelated noise; kept when the
/// grid oracle's maximizer is at least three grid steps inside the simplex.
fn interior_suite(per_k: usize) -> (Vec<Instance>, usize) {
    let mut out = Vec::new();
    let mut rejected = 0;
    for k in 2..=4 {
        let mut accepted = 0;
        let mut seed = 1000 * k as u64;
        while accepted < per_k {
            seed += 1;
            let mut gen = InstanceGenerator::new(seed);
            let bins = gen.uniform_usize(6..=12);
            let comps = gen.components(k, bins);
            let w = gen.interior_weights(k, 0.02);
            let noise = gen.distribution(bins);
            let t = 0.6 * gen.uniform();
            let mix = mixture_density(&w, &comps).unwrap();
            let blended = mix
                .weights()
                .iter()
                .zip(noise.weights())
                .map(|(m, n)| (1.0 - t) * m + t * n)
                .collect();
            let test =
                BinnedDistribution::from_counts(InstanceGenerator::support(bins), blended).unwrap();
            let ratios = DensityRatioProfile::from_densities(&comps, None).unwrap();
            let step = grid_step(k);
            let oracle = brute_force_oracle(&test, &ratios, step).unwrap();
            if oracle.min() >= 3.0 * step {
                out.push(Instance {
                    test,
                    ratios,
                    oracle,
                    step,
                });
                accepted += 1;
            } else {
                rejected += 1;
            }
        }
    }
    (out, rejected)
}

struct Binary {
    test: BinnedDistribution,
    ratios: DensityRatioProfile,
    x: Vec<f64>,
}

/// Random two-class instances: a third of them with bins where class 1 has
/// no mass (X = 0), half with a test distribution unrelated to the components.
fn binary_suite(n: usize) -> Vec<Binary> {
    (0..n as u64)
        .map(|seed| {
            let mut gen = InstanceGenerator::new(50_000 + seed);
            let bins = gen.uniform_usize(6..=12);
            let mut comps = gen.components(2, bins);
            if seed % 3 == 0 {
                let mut w = comps[0].weights().to_vec();
                let zeros = gen.uniform_usize(1..=bins / 3);
                for b in 0..zeros {
                    w[b] = 0.0;
                }
                comps[0] =
                    BinnedDistribution::from_counts(InstanceGenerator::support(bins), w).unwrap();
            }
            let test = if seed % 2 == 0 {
                gen.distribution(bins)
            } else {
                let w = gen.interior_weights(2, 0.0);
                mixture_density(&w, &comps).unwrap()
            };
            let ratios = DensityRatioProfile::from_densities(&comps, None).unwrap();
            let x = (0..bins).map(|b| ratios.ratio(b, 0)).collect();
            Binary { test, ratios, x }
        })
        .collect()
}

fn g1(g: &[f64], x: &[f64], p: f64) -> f64 {
    g.iter()
        .zip(x)
        .filter(|(gb, _)| **gb > 0.0)
        .map(|(gb, xb)| gb * (xb - 1.0) / (1.0 + p * (xb - 1.0)))
        .sum()
}

fn criterion_1() -> Criterion {
    let mut c = Criterion::default();
    let report = data("mortgage.csv");
    let start = Instant::now();
    let out = mixfit(&[
        "quantify",
        "--report",
        report.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let elapsed = start.elapsed().as_secs_f64();
    c.check(
        1,
        "exit status",
        out.status.code() == Some(0),
        format!("{:?}", out.status.code()),
    );
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json document");
    let stderr = String::from_utf8_lossy(&out.stderr);
    c.check(
        1,
        "All-row inconsistency reported",
        stderr.contains("reported All=2.2 differs"),
        stderr.lines().next().unwrap_or("").to_string(),
    );

    let f = |v: &serde_json::Value| v.as_f64().unwrap();
    let cov = f(&doc["covariate"][0]);
    let r2 = f(&doc["r_squared"]);
    let scaled = f(&doc["scaled"]["weights"]["values"][0]);
    let ml = f(&doc["ml"]["weights"]["values"][0]);
    let bands = doc["bands"].as_array().unwrap();
    let ml_bands: Vec<f64> = bands.iter().map(|b| f(&b["ml"][0])).collect();
    let scaled_bands: Vec<f64> = bands.iter().map(|b| f(&b["scaled"][0])).collect();

    let pp = |name: &str, value: f64, published: f64, tol: f64, c: &mut Criterion| {
        let gap = (100.0 * value - published).abs();
        c.check(
            1,
            name,
            gap <= tol,
            format!(
                "{:.4}% vs {published} (gap {gap:.3} pp, tolerance {tol})",
                100.0 * value
            ),
        );
    };
    pp("covariate-shift All", cov, 2.8, 0.05, &mut c);
    pp("R^2", r2, 7.7, 0.05, &mut c);
    pp("Scaled Probability Average All", scaled, 7.3, 0.3, &mut c);
    pp("KL/ML All", ml, 7.1, 0.3, &mut c);

    let columns = |name: &str, ours: &[f64], published: [f64; 5], c: &mut Criterion| {
        let gaps: Vec<f64> = ours
            .iter()
            .zip(published)
            .map(|(o, p)| (100.0 * o - p).abs())
            .collect();
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        let shown: Vec<String> = ours.iter().map(|o| format!("{:.2}", 100.0 * o)).collect();
        c.check(
            1,
            name,
            ours.len() == 5 && worst <= 0.5,
            format!(
                "computed ({}), worst gap {worst:.2} pp, tolerance 0.5",
                shown.join(", ")
            ),
        );
    };
    let kl_pub = [35.4, 6.5, 3.3, 1.5, 0.6];
    let sc_pub = [34.6, 6.3, 3.2, 1.5, 0.6];
    columns(
        "KL band column vs published (35.4, 6.5, 3.3, 1.5, 0.6)",
        &ml_bands,
        kl_pub,
        &mut c,
    );
    columns(
        "Scaled band column vs published (34.6, 6.3, 3.2, 1.5, 0.6)",
        &scaled_bands,
        sc_pub,
        &mut c,
    );
    // Informational: the same comparison with the published columns exchanged.
    let swapped_kl = ml_bands
        .iter()
        .zip(sc_pub)
        .map(|(o, p)| (100.0 * o - p).abs())
        .fold(0.0, f64::max);
    let swapped_sc = scaled_bands
        .iter()
        .zip(kl_pub)
        .map(|(o, p)| (100.0 * o - p).abs())
        .fold(0.0, f64::max);
    c.check(
        1,
        "band columns with published headers exchanged (diagnostic)",
        swapped_kl <= 0.5 && swapped_sc <= 0.5,
        format!("worst gaps {swapped_kl:.2} / {swapped_sc:.2} pp"),
    );

    // Independent float oracle from the band-level inputs.
    let e0: Vec<f64> = [10.3, 28.2, 12.9, 24.9, 23.8]
        .iter()
        .map(|v| v / 100.1)
        .collect();
    let r: Vec<f64> = [15.0, 2.2, 1.1, 0.5, 0.2]
        .iter()
        .map(|v| v / 100.0)
        .collect();
    let e1: Vec<f64> = [13.3, 24.2, 12.8, 25.4, 24.3]
        .iter()
        .map(|v| v / 100.0)
        .collect();
    let pi: f64 = e0.iter().zip(&r).map(|(a, b)| a * b).sum();
    let x: Vec<f64> = r
        .iter()
        .map(|ri| ri / (1.0 - ri) * (1.0 - pi) / pi)
        .collect();
    let v: f64 = e1.iter().zip(&r).map(|(a, b)| a * b).sum();
    let r2_o =
        (e0.iter().zip(&r).map(|(a, b)| a * b * b).sum::<f64>() - pi * pi) / (pi * (1.0 - pi));
    let scaled_o = (v - pi * (1.0 - r2_o)) / r2_o;
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g1(&e1, &x, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ml_o = 0.5 * (lo + hi);
    let band = |q: f64| -> Vec<f64> { x.iter().map(|xb| q * xb / (q * xb + 1.0 - q)).collect() };

    let pinned = [
        (
            "prior",
            doc["training_priors"][0].as_f64().unwrap(),
            pi,
            GOLDEN_PRIOR,
        ),
        ("covariate All", cov, v, GOLDEN_COVARIATE),
        ("R^2", r2, r2_o, GOLDEN_R2),
        ("scaled All", scaled, scaled_o, GOLDEN_SCALED),
        ("ML All", ml, ml_o, GOLDEN_ML),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for (_, ours, oracle, golden) in pinned {
        worst = worst.max((ours - golden).abs()).max((ours - oracle).abs());
        worst_oracle = worst_oracle.max((oracle - golden).abs());
    }
    worst = worst
        .max(sup(&ml_bands, &GOLDEN_ML_BANDS))
        .max(sup(&scaled_bands, &GOLDEN_SCALED_BANDS))
        .max(sup(&ml_bands, &band(ml_o)))
        .max(sup(&scaled_bands, &band(scaled_o)));
    c.check(
        1,
        "exact values vs oracle and goldens (1e-10)",
        worst <= 1e-10 && worst_oracle <= 1e-10,
        format!("max deviation {worst:.2e} (oracle vs goldens {worst_oracle:.2e})"),
    );
    c.check(
        1,
        "runtime < 1 s",
        elapsed < 1.0,
        format!("{elapsed:.3} s end to end"),
    );
    c
}

fn criterion_2(suite: &[Instance], rejected: usize) -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let config = SolverConfig::default();
    let (mut sum_err, mut rec_err, mut kl_max, mut missing): (f64, f64, f64, usize) =
        (0.0, 0.0, 0.0, 0);
    for inst in suite {
        let r = fit(&inst.test, &inst.ratios, &config).unwrap();
        let Some(comps) = r.exact_fit_components.as_ref() else {
            missing += 1;
            continue;
        };
        let g = inst.test.weights();
        let mut mix = vec![0.0; g.len()];
        for (i, h) in comps.iter().enumerate() {
            sum_err = sum_err.max((h.weights().iter().sum::<f64>() - 1.0).abs());
            for (m, hb) in mix.iter_mut().zip(h.weights()) {
                *m += r.weights[i] * hb;
            }
        }
        rec_err = rec_err.max(sup(&mix, g));
        let kl: f64 = g
            .iter()
            .zip(&mix)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, m)| a * (a / m).ln())
            .sum();
        kl_max = kl_max.max(kl);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ks: Vec<usize> = (2..=4)
        .map(|k| suite.iter().filter(|i| i.ratios.class_count() == k).count())
        .collect();
    c.check(
        2,
        "instance count >= 200",
        suite.len() >= 200,
        format!(
            "{} instances (k=2/3/4: {:?}), {rejected} candidates rejected as not clearly interior",
            suite.len(),
            ks
        ),
    );
    c.check(
        2,
        "exact-fit components present",
        missing == 0,
        format!("{missing} missing"),
    );
    c.check(
        2,
        "components sum to 1 (1e-10)",
        sum_err <= 1e-10,
        format!("max |sum - 1| = {sum_err:.2e}"),
    );
    c.check(
        2,
        "mixture reconstructs test (1e-10)",
        rec_err <= 1e-10,
        format!("max sup error {rec_err:.2e}"),
    );
    c.check(
        2,
        "KL(g, fitted mixture) <= 1e-12",
        kl_max <= 1e-12,
        format!("max {kl_max:.2e}"),
    );
    c.check(
        2,
        "runtime < 10 s",
        elapsed < 10.0,
        format!("{elapsed:.3} s"),
    );
    c
}

fn criterion_3(suite: &[Instance]) -> Criterion {
    let mut c = Criterion::default();
    let (mut agree, mut oracle_ratio, mut alarms): (f64, f64, usize) = (0.0, 0.0, 0);
    for inst in suite {
        let fits: Vec<Vec<f64>> = [
            SolverMethod::Em,
            SolverMethod::Newton,
            SolverMethod::GaussSeidel,
        ]
        .iter()
        .map(|m| {
            let r = fit(&inst.test, &inst.ratios, &SolverConfig::with_method(*m)).unwrap();
            alarms += r.boundary_alarm as usize;
            r.weights.values().to_vec()
        })
        .collect();
        agree = agree
            .max(sup(&fits[0], &fits[1]))
            .max(sup(&fits[0], &fits[2]))
            .max(sup(&fits[1], &fits[2]));
        for f in &fits {
            oracle_ratio = oracle_ratio.max(sup(f, inst.oracle.values()) / inst.step);
        }
    }
    c.check(
        3,
        "EM / Newton / Gauss-Seidel agree (1e-8)",
        agree <= 1e-8,
        format!("max pairwise sup distance {agree:.2e}"),
    );
    c.check(
        3,
        "each within 2 grid steps of brute-force oracle",
        oracle_ratio <= 2.0,
        format!("max distance {oracle_ratio:.3} grid steps"),
    );
    c.check(
        3,
        "no boundary alarms on interior instances",
        alarms == 0,
        format!("{alarms} alarms"),
    );
    c
}

const EM_ITERATIONS: usize = 1_000_000;

fn criterion_4() -> Criterion {
    let mut c = Criterion::default();
    let (mut ml_err, mut scaled_err, mut binary_err, mut solver_err): (f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0);
    let mut n = 0;
    for seed in 0..150u64 {
        let k = 2 + (seed % 3) as usize;
        let bins = 6 + (seed % 7) as usize;
        let sc = random_scenario(ShiftKind::PriorProbability, k, bins, seed).unwrap();
        let truth = sc.truth.as_ref().unwrap();
        let ratios = DensityRatioProfile::from_conditionals(&sc.model, None).unwrap();
        if !ratios.is_independent() {
            continue;
        }
        n += 1;
        ml_err = ml_err.max(
            fit(&sc.test, &ratios, &SolverConfig::default())
                .unwrap()
                .weights
                .sup_distance(truth),
        );
        for m in [
            SolverMethod::Em,
            SolverMethod::Newton,
            SolverMethod::GaussSeidel,
        ] {
            // EM converges linearly; near-collinear instances need more than the default cap.
            let mut config = SolverConfig::with_method(m);
            config.max_iterations = EM_ITERATIONS;
            let r = fit(&sc.test, &ratios, &config).unwrap();
            solver_err = solver_err.max(r.weights.sup_distance(truth));
        }
        scaled_err = scaled_err.max(
            scaled_probability_average(&sc.test, &sc.model)
                .unwrap()
                .weights
                .sup_distance(truth),
        );
        if k == 2 {
            let b = scaled_probability_average_binary(&sc.test, &sc.model).unwrap();
            binary_err = binary_err.max(b.weights.sup_distance(truth));
        }
    }
    c.check(
        4,
        "scenarios",
        n >= 100,
        format!("{n} exact prior-shift scenarios, k = 2..4"),
    );
    c.check(
        4,
        "ML recovers truth (1e-8)",
        ml_err <= 1e-8,
        format!("max error {ml_err:.2e}"),
    );
    c.check(
        4,
        "EM, Newton and Gauss-Seidel each recover truth (1e-8, cap 10^6 iterations)",
        solver_err <= 1e-8,
        format!("max error {solver_err:.2e}"),
    );
    c.check(
        4,
        "Scaled Probability Average, matrix (1e-8)",
        scaled_err <= 1e-8,
        format!("max error {scaled_err:.2e}"),
    );
    c.check(
        4,
        "Scaled Probability Average, binary closed form (1e-8)",
        binary_err <= 1e-8,
        format!("max error {binary_err:.2e}"),
    );
    c
}

fn criterion_5(binaries: &[Binary]) -> Criterion {
    let mut c = Criterion::default();
    let (mut disagree, mut alarm_mismatch, mut exists_count) = (0, 0, 0);
    const N: usize = 10_000;
    for inst in binaries {
        let g = inst.test.weights();
        let values: Vec<f64> = (0..=N)
            .map(|j| g1(g, &inst.x, j as f64 / N as f64))
            .collect();
        let scan = values.windows(2).any(|w| w[0] > 0.0 && w[1] < 0.0)
            || values[1..N].contains(&0.0);
        let check = existence_check_binary(&inst.test, &inst.ratios).unwrap();
        disagree += (scan != check.exists) as usize;
        exists_count += check.exists as usize;
        let r = fit(&inst.test, &inst.ratios, &SolverConfig::default()).unwrap();
        alarm_mismatch += (r.boundary_alarm == check.exists) as usize;
    }
    c.check(
        5,
        "existence check vs 10^4-point sign scan of G",
        disagree == 0,
        format!(
            "{disagree} disagreements on {} instances ({exists_count} with an interior root)",
            binaries.len()
        ),
    );
    c.check(
        5,
        "boundary alarm iff no interior root",
        alarm_mismatch == 0,
        format!("{alarm_mismatch} mismatches"),
    );

    let dir = tempfile::tempdir().unwrap();
    let training = dir.path().join("training.csv");
    let test = dir.path().join("test.csv");
    std::fs::write(
        &training,
        "feature,class,weight\na,1,0.4\na,2,0.1\nb,1,0.1\nb,2,0.4\n",
    )
    .unwrap();
    std::fs::write(&test, "feature,weight\na,0.9\nb,0.1\n").unwrap();
    let out = mixfit(&[
        "fit",
        "--training",
        training.to_str().unwrap(),
        "--test",
        test.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    c.check(
        5,
        "two-bin example with g = (0.9, 0.1): alarm and exit status 2",
        out.status.code() == Some(2) && doc["boundary_alarm"] == true,
        format!(
            "exit {:?}, boundary_alarm {}",
            out.status.code(),
            doc["boundary_alarm"]
        ),
    );
    c
}

fn criterion_6() -> Criterion {
    let mut c = Criterion::default();
    let mut attenuation: f64 = 0.0;
    for seed in 0..200u64 {
        let sc = random_scenario(
            ShiftKind::PriorProbability,
            2,
            6 + (seed % 7) as usize,
            7_000 + seed,
        )
        .unwrap();
        let pi = sc.model.priors()[0];
        let v = probability_average(&sc.test, &sc.model).unwrap()[0];
        let r2 = r_squared(&sc.model).unwrap();
        let q = sc.truth.as_ref().unwrap()[0];
        attenuation = attenuation.max((v - pi - r2 * (q - pi)).abs());
    }
    c.check(
        6,
        "v - P0[A1] = R^2 (q - P0[A1]) (1e-10)",
        attenuation <= 1e-10,
        format!("max residual {attenuation:.2e} on 200 prior shifts"),
    );

    let (mut solvable, mut violations) = (0, 0);
    for seed in 0..600u64 {
        let mut gen = InstanceGenerator::new(90_000 + seed);
        let bins = gen.uniform_usize(6..=12);
        let model = gen.model(2, bins);
        let test = gen.distribution(bins);
        let ratios = DensityRatioProfile::from_conditionals(&model, None).unwrap();
        if !existence_check_binary(&test, &ratios).unwrap().exists {
            continue;
        }
        solvable += 1;
        let pi = model.priors()[0];
        let cov = probability_average(&test, &model).unwrap()[0];
        let ml = fit(&test, &ratios, &SolverConfig::default())
            .unwrap()
            .weights[0];
        if cov < pi.min(ml) || cov > pi.max(ml) {
            violations += 1;
        }
    }
    c.check(
        6,
        "covariate estimate between training prior and ML",
        violations == 0 && solvable > 0,
        format!("{violations} violations on {solvable} solvable random instances"),
    );
    c
}

fn criterion_7() -> Criterion {
    let mut c = Criterion::default();
    let h = 1e-6;
    let (mut rel_max, mut asym, mut positive, mut pairs): (f64, f64, usize, usize) =
        (0.0, 0.0, 0, 0);
    for seed in 0..100u64 {
        let mut gen = InstanceGenerator::new(123_000 + seed);
        let k = 2 + (seed % 3) as usize;
        let bins = gen.uniform_usize(6..=12);
        let comps = gen.components(k, bins);
        let ratios = DensityRatioProfile::from_densities(&comps, None).unwrap();
        let test = gen.distribution(bins);
        let p = gen.interior_weights(k, 0.05);
        let grad = gradient(&test, &ratios, &p).unwrap();
        let reference = ratios.reference_class();
        for (c_idx, j) in ratios.free_classes().into_iter().enumerate() {
            let shifted = |s: f64| {
                let mut w = p.values().to_vec();
                w[j] += s;
                w[reference] -= s;
                objective(&test, &ratios, &SimplexWeights::new(w).unwrap()).unwrap()
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            let scale = grad[c_idx].abs().max(numeric.abs());
            let err = (numeric - grad[c_idx]).abs();
            // Near-zero derivatives have no meaningful relative error.
            let rel = if scale >= 1e-3 {
                err / scale
            } else {
                err / 1e-3
            };
            rel_max = rel_max.max(rel);
        }
        let jac = jacobian(&test, &ratios, &p).unwrap();
        let m = jac.nrows();
        let a: Vec<f64> = (0..m).map(|_| 2.0 * gen.uniform() - 1.0).collect();
        let mut quad = 0.0;
        for r in 0..m {
            for s in 0..m {
                asym = asym.max((jac[(r, s)] - jac[(s, r)]).abs());
                quad += a[r] * jac[(r, s)] * a[s];
            }
        }
        pairs += 1;
        positive += (quad >= 0.0) as usize;
    }
    c.check(
        7,
        "gradient vs central differences (rel. 1e-5, step 1e-6)",
        rel_max <= 1e-5,
        format!("max relative error {rel_max:.2e}"),
    );
    c.check(
        7,
        "Jacobian symmetric",
        asym == 0.0,
        format!("max asymmetry {asym:.1e}"),
    );
    c.check(
        7,
        "a^T J a < 0",
        positive == 0,
        format!("{positive} of {pairs} (instance, a) pairs not negative"),
    );
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::default();
    let (mut sum_cov, mut sum_dr, mut gen_err, mut unit_dr): (f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0);
    let mut unit_cov_exact = true;
    for seed in 0..150u64 {
        let k = 2 + (seed % 3) as usize;
        let bins = 6 + (seed % 7) as usize;
        let sc = random_scenario(ShiftKind::PriorProbability, k, bins, 31_000 + seed).unwrap();
        let mut gen = InstanceGenerator::new(seed);
        let support = sc.test.support().to_vec();
        let costs = CostProfile::new(
            support.clone(),
            (0..bins).map(|_| 10.0 * gen.uniform()).collect(),
        )
        .unwrap();
        let ratios = DensityRatioProfile::from_conditionals(&sc.model, None).unwrap();
        let ml = fit(&sc.test, &ratios, &SolverConfig::default()).unwrap();
        let total = expected_total_cost(&sc.test, &costs).unwrap();
        let cov = cost_total_covariate(&sc.test, &costs, &sc.model).unwrap();
        let dr = cost_total_density_ratio(&sc.test, &costs, &ratios, &ml.weights).unwrap();
        sum_cov = sum_cov.max((cov.iter().sum::<f64>() - total).abs());
        sum_dr = sum_dr.max((dr.iter().sum::<f64>() - total).abs());

        let truth = sc.truth.as_ref().unwrap();
        let conds = sc.model.class_conditionals().unwrap();
        let generative: Vec<f64> = (0..k)
            .map(|i| {
                truth[i]
                    * conds[i]
                        .weights()
                        .iter()
                        .zip(costs.values())
                        .map(|(f, cb)| f * cb)
                        .sum::<f64>()
            })
            .collect();
        gen_err = gen_err.max(sup(&dr, &generative));

        let unit = CostProfile::constant(support, 1.0).unwrap();
        unit_cov_exact &= cost_total_covariate(&sc.test, &unit, &sc.model).unwrap()
            == probability_average(&sc.test, &sc.model).unwrap();
        let unit_totals = cost_total_density_ratio(&sc.test, &unit, &ratios, &ml.weights).unwrap();
        unit_dr = unit_dr.max(sup(&unit_totals, ml.weights.values()));
    }
    c.check(
        8,
        "class totals sum to portfolio expected cost (1e-12)",
        sum_cov <= 1e-12 && sum_dr <= 1e-12,
        format!("covariate {sum_cov:.1e}, density ratio {sum_dr:.1e}"),
    );
    c.check(
        8,
        "density-ratio totals match generative totals (1e-10)",
        gen_err <= 1e-10,
        format!("max error {gen_err:.2e}"),
    );
    c.check(
        8,
        "unit costs reduce to prevalence estimates",
        unit_cov_exact && unit_dr <= 1e-12,
        format!(
            "covariate bit-identical: {unit_cov_exact}; density ratio max deviation {unit_dr:.1e}"
        ),
    );
    c
}

fn criterion_9(suite: &[Instance], binaries: &[Binary]) -> Criterion {
    let mut c = Criterion::default();
    let (mut violations, mut steps, mut worst_drop): (usize, usize, f64) = (0, 0, 0.0);
    let problems = suite
        .iter()
        .map(|i| (&i.test, &i.ratios))
        .chain(binaries.iter().map(|b| (&b.test, &b.ratios)));
    let mut runs = 0;
    for (test, ratios) in problems {
        runs += 1;
        let rows = ratio_rows(ratios);
        let mut trace: Vec<Vec<f64>> = Vec::new();
        em_solve_observed(
            test,
            ratios,
            &SolverConfig::with_method(SolverMethod::Em),
            |_, w| trace.push(w.to_vec()),
        )
        .unwrap();
        for w in trace.windows(2) {
            steps += 1;
            let gain = likelihood_gain(test.weights(), &rows, &w[0], &w[1]);
            if gain < 0.0 {
                violations += 1;
                worst_drop = worst_drop.max(-gain);
            }
        }
    }
    c.check(
        9,
        "objective nondecreasing along EM iterates",
        violations == 0,
        format!("{violations} decreases in {steps} steps over {runs} runs (largest drop {worst_drop:.1e})"),
    );
    c
}

#[test]
fn acceptance() {
    let (suite, rejected) = interior_suite(80);
    let binaries = binary_suite(400);
    let criteria = [
        (1, "mortgage forecast table", criterion_1()),
        (2, "exact-fit identity", criterion_2(&suite, rejected)),
        (3, "solver cross-agreement", criterion_3(&suite)),
        (4, "recovery and uniqueness", criterion_4()),
        (5, "existence condition (k=2)", criterion_5(&binaries)),
        (6, "attenuation and interleaving", criterion_6()),
        (7, "calculus checks", criterion_7()),
        (8, "cost quantification", criterion_8()),
        (9, "EM monotonicity", criterion_9(&suite, &binaries)),
    ];
    let mut failing = Vec::new();
    for (id, title, c) in &criteria {
        report(*id, title, c);
        failing.extend(c.checks.iter().filter(|k| !k.pass).map(|k| k.name.clone()));
    }
    let diagnostic = "1: band columns with published headers exchanged (diagnostic)";
    failing.retain(|n| n != diagnostic);
    let known: Vec<String> = KNOWN_FAILURES.iter().map(|s| s.to_string()).collect();
    assert_eq!(
        failing, known,
        "failing checks differ from the documented known failures"
    );
}
