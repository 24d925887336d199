//! Acceptance suite: one test per release criterion. Each test prints a
//! single pass/fail line, then asserts. Every tolerance, threshold, and
//! runtime bound is fixed here in code; seeds are arbitrary constants
//! pinned for reproducibility.
//!
//! Criterion 07 is expected to fail: the stated eigenvalue window is
//! analytically out of reach for the first coordinate. The README's
//! acceptance section carries the analysis; the criterion is implemented
//! exactly as stated rather than widened to pass.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ilr_approx::approx::{approx_ilr_corrected, approx_ilr_multinomial, CorrectionMode};
use ilr_approx::cli::{cmd_simulate, cmd_table3, GridConfig, RunConfig, SbpChoice};
use ilr_approx::composition::{
    close_with_policy, contrast_matrix, ilr, ilr_balances, pivotal_sbp, SbpMatrix, ZeroPolicy,
};
use ilr_approx::harness::{compare, enumerate_exact, qq_series, run_scenario, Scenario};
use ilr_approx::sampling::{
    dm_log_pmf, multinomial_log_pmf, sample_dirichlet, sample_total, CountVector, Dgd,
    DirichletSpec, TotalCountSpec,
};
use ilr_approx::{Composition, ModelSpec, NormalApprox};

/// Prints the single verdict line for a criterion, then enforces it.
fn criterion(number: u32, name: &str, violations: &[String], clock: Instant, limit: Duration) {
    let mut violations = violations.to_vec();
    let elapsed = clock.elapsed();
    if elapsed > limit {
        violations.push(format!("runtime {elapsed:?} exceeds limit {limit:?}"));
    }
    let pass = violations.is_empty();
    println!("criterion {number:02} {name}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {number:02} {name}:\n  {}", violations.join("\n  "));
}

/// The five-class expected composition every simulation scenario uses.
fn reference_alpha() -> Composition {
    Composition::new(vec![0.01, 0.04, 0.15, 0.30, 0.50]).unwrap()
}

fn dm_scenario(label: &str, alpha_s: f64, k: u64, n_draws: usize, seed: u64) -> Scenario {
    let dir = DirichletSpec::new(reference_alpha(), alpha_s).unwrap();
    let model = ModelSpec::dirichlet_multinomial(dir, k).unwrap();
    Scenario::new(label, model, pivotal_sbp(5).unwrap(), n_draws, 0.5, ZeroPolicy::Renormalize, seed)
        .unwrap()
}

#[test]
fn criterion_01_excess_table_cells() {
    let clock = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        master_seed: 0,
        n_draws: 10_000,
        zero_policy: ZeroPolicy::Renormalize,
        correction_mode: CorrectionMode::Consistent,
        output_dir: dir.path().to_path_buf(),
        emit_svg: false,
        parallelism: 1,
        grid: GridConfig {
            alpha_tilde_vectors: vec![vec![0.01, 0.04, 0.15, 0.30, 0.50]],
            dgds: vec![
                Dgd::Multinomial,
                Dgd::DirichletMultinomial,
                Dgd::LognormalMultinomial,
                Dgd::LognormalDirichletMultinomial,
            ],
            alpha_s_values: vec![101.0, 1000.0, 10_000.0, 100_000.0, 1_000_000.0],
            total_values: vec![101, 1000, 10_000, 100_000, 1_000_000],
            sigma_sq_values: vec![0.1, 1.0],
            sbp: SbpChoice::Pivotal,
            zero_replacement: 0.5,
        },
    };
    let path = cmd_table3(&cfg).unwrap();
    let text = std::fs::read_to_string(path).unwrap();

    // Every cell of the printed table, rounded to two decimals, in row
    // order; one CSV data row per (family row, total) cell.
    #[rustfmt::skip]
    let expected: [(&str, &str, &str, [f64; 5]); 18] = [
        ("mn", "", "", [1.00, 1.00, 1.00, 1.00, 1.00]),
        ("dir_mn", "101", "", [1.98, 10.79, 99.03, 981.38, 9804.91]),
        ("dir_mn", "1000", "", [1.10, 2.00, 10.99, 100.90, 1000.00]),
        ("dir_mn", "10000", "", [1.01, 1.10, 2.00, 11.00, 100.99]),
        ("dir_mn", "100000", "", [1.00, 1.01, 1.10, 2.00, 11.00]),
        ("dir_mn", "1000000", "", [1.00, 1.00, 1.01, 1.10, 2.00]),
        ("ln_mn", "", "0.1", [1.05, 1.05, 1.05, 1.05, 1.05]),
        ("ln_dir_mn", "101", "0.1", [2.03, 10.84, 99.08, 981.43, 9804.96]),
        ("ln_dir_mn", "1000", "0.1", [1.15, 2.05, 11.04, 100.95, 1000.05]),
        ("ln_dir_mn", "10000", "0.1", [1.06, 1.15, 2.05, 11.05, 101.04]),
        ("ln_dir_mn", "100000", "0.1", [1.05, 1.06, 1.15, 2.05, 11.05]),
        ("ln_dir_mn", "1000000", "0.1", [1.05, 1.05, 1.06, 1.15, 2.05]),
        ("ln_mn", "", "1", [1.65, 1.65, 1.65, 1.65, 1.65]),
        ("ln_dir_mn", "101", "1", [2.62, 11.44, 99.67, 982.02, 9805.55]),
        ("ln_dir_mn", "1000", "1", [1.75, 2.65, 11.64, 101.55, 1000.65]),
        ("ln_dir_mn", "10000", "1", [1.66, 1.75, 2.65, 11.65, 101.64]),
        ("ln_dir_mn", "100000", "1", [1.65, 1.66, 1.75, 2.65, 11.65]),
        ("ln_dir_mn", "1000000", "1", [1.65, 1.65, 1.66, 1.75, 2.65]),
    ];
    let totals = [101u64, 1000, 10_000, 100_000, 1_000_000];
    let mut expected_lines = vec!["dgd,alpha_s,sigma_sq,K,excess".to_string()];
    for (dgd, alpha_s, sigma_sq, cells) in expected {
        for (k, cell) in totals.iter().zip(cells) {
            expected_lines.push(format!("{dgd},{alpha_s},{sigma_sq},{k},{cell:.2}"));
        }
    }

    let mut violations = Vec::new();
    let actual: Vec<&str> = text.lines().collect();
    if actual.len() != expected_lines.len() {
        violations.push(format!(
            "expected {} lines (header plus 90 cells), got {}",
            expected_lines.len(),
            actual.len()
        ));
    }
    for (i, (want, got)) in expected_lines.iter().zip(&actual).enumerate() {
        if want != got {
            violations.push(format!("line {}: expected `{want}`, got `{got}`", i + 1));
        }
    }
    criterion(1, "excess table cells", &violations, clock, Duration::from_secs(1));
}

#[test]
fn criterion_02_contrast_matrix_properties() {
    let clock = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(21_001);
    let mut max_gram = 0.0f64;
    let mut max_col_sum = 0.0f64;
    for _ in 0..500 {
        let parts = rng.gen_range(2..=20);
        let sbp = SbpMatrix::random(parts, &mut rng).unwrap();
        let v = contrast_matrix::<f64>(&sbp).unwrap();
        let m = v.matrix();
        for a in 0..v.coords() {
            let mut col_sum = 0.0;
            for i in 0..parts {
                col_sum += m.get(i, a);
            }
            max_col_sum = max_col_sum.max(col_sum.abs());
            for b in 0..v.coords() {
                let mut dot = 0.0;
                for i in 0..parts {
                    dot += m.get(i, a) * m.get(i, b);
                }
                let target = if a == b { 1.0 } else { 0.0 };
                max_gram = max_gram.max((dot - target).abs());
            }
        }
    }
    let mut violations = Vec::new();
    if max_gram >= 1e-10 {
        violations.push(format!("max |V'V - I| = {max_gram:e}, limit 1e-10"));
    }
    if max_col_sum >= 1e-12 {
        violations.push(format!("max |column sum| = {max_col_sum:e}, limit 1e-12"));
    }
    criterion(2, "contrast matrix properties", &violations, clock, Duration::from_secs(5));
}

#[test]
fn criterion_03_ilr_dual_form_equivalence() {
    let clock = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(31_001);
    let mut max_diff = 0.0f64;
    for _ in 0..10_000 {
        let parts = rng.gen_range(2..=10);
        let sbp = SbpMatrix::random(parts, &mut rng).unwrap();
        let raw: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.05..2.0)).collect();
        let p = Composition::from_unnormalized(raw).unwrap();
        let v = contrast_matrix::<f64>(&sbp).unwrap();
        let matrix_form = ilr(&p, &v).unwrap();
        let balance_form = ilr_balances(&p, &sbp).unwrap();
        for (a, b) in matrix_form.coords().iter().zip(balance_form.coords()) {
            max_diff = max_diff.max((a - b).abs());
        }
    }
    let mut violations = Vec::new();
    if max_diff >= 1e-12 {
        violations.push(format!("max |matrix - balance| = {max_diff:e}, limit 1e-12"));
    }
    criterion(3, "ilr dual-form equivalence", &violations, clock, Duration::from_secs(5));
}

/// Exact moments plus Monte Carlo standard errors for a fixed-total
/// three-class model, by direct enumeration of all count vectors.
struct ExactWithSpread {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    /// `sqrt(var_c / n)` per coordinate.
    mean_se: Vec<f64>,
    /// `sqrt((E[(z_c-m_c)^2 (z_d-m_d)^2] - cov_cd^2) / n)` per entry.
    cov_se: Vec<Vec<f64>>,
}

fn enumerate_with_spread(model: &ModelSpec, n: usize) -> ExactWithSpread {
    let k = match *model.total() {
        TotalCountSpec::Fixed(k) => k,
        _ => unreachable!("fixed totals only"),
    };
    let sbp = pivotal_sbp(3).unwrap();
    let v = contrast_matrix::<f64>(&sbp).unwrap();
    let mut outcomes: Vec<(f64, Vec<f64>)> = Vec::new();
    for x1 in 0..=k {
        for x2 in 0..=(k - x1) {
            let x = CountVector::new(vec![x1, x2, k - x1 - x2]).unwrap();
            let log_w = match model.probabilities() {
                ilr_approx::sampling::ClassProbabilities::Fixed(p) => {
                    multinomial_log_pmf(&x, p).unwrap()
                }
                ilr_approx::sampling::ClassProbabilities::Dirichlet(d) => {
                    dm_log_pmf(&x, d).unwrap()
                }
            };
            let closed = close_with_policy(&x, 0.5, ZeroPolicy::Renormalize).unwrap();
            let z = ilr(&closed.composition, &v).unwrap();
            outcomes.push((log_w.exp(), z.coords().to_vec()));
        }
    }
    let coverage: f64 = outcomes.iter().map(|(w, _)| w).sum();
    assert!((coverage - 1.0).abs() < 1e-12, "enumeration must cover all probability");

    let d = v.coords();
    let mut mean = vec![0.0; d];
    for (w, z) in &outcomes {
        for c in 0..d {
            mean[c] += w * z[c];
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    let mut fourth = vec![vec![0.0; d]; d];
    for (w, z) in &outcomes {
        for c in 0..d {
            for e in 0..d {
                let dc = z[c] - mean[c];
                let de = z[e] - mean[e];
                cov[c][e] += w * dc * de;
                fourth[c][e] += w * dc * dc * de * de;
            }
        }
    }
    let mean_se = (0..d).map(|c| (cov[c][c] / n as f64).sqrt()).collect();
    let cov_se = (0..d)
        .map(|c| (0..d).map(|e| ((fourth[c][e] - cov[c][e].powi(2)) / n as f64).sqrt()).collect())
        .collect();
    ExactWithSpread { mean, cov, mean_se, cov_se }
}

#[test]
fn criterion_04_exact_enumeration_oracle() {
    let clock = Instant::now();
    let n = 1_000_000usize;
    let p = Composition::new(vec![0.2, 0.3, 0.5]).unwrap();
    let sbp = pivotal_sbp(3).unwrap();
    let mut violations = Vec::new();
    let mut config_index = 0u64;
    for k in [2u64, 4, 6] {
        let mut models = vec![("mn".to_string(), ModelSpec::multinomial(p.clone(), k).unwrap())];
        for alpha_s in [10.0, 100.0] {
            let dir = DirichletSpec::new(p.clone(), alpha_s).unwrap();
            models.push((
                format!("dm_a{alpha_s}"),
                ModelSpec::dirichlet_multinomial(dir, k).unwrap(),
            ));
        }
        for (name, model) in models {
            let exact = enumerate_with_spread(&model, n);
            // The production oracle must agree with this test's own
            // enumeration before it is used as the reference.
            let oracle = enumerate_exact(&model, &sbp, 0.5).unwrap();
            for c in 0..2 {
                if (oracle.mean_ilr[c] - exact.mean[c]).abs() > 1e-10 {
                    violations.push(format!("{name} K={k}: oracle mean mismatch at {c}"));
                }
                for e in 0..2 {
                    if (oracle.cov_ilr.get(c, e) - exact.cov[c][e]).abs() > 1e-10 {
                        violations.push(format!("{name} K={k}: oracle cov mismatch at {c}{e}"));
                    }
                }
            }

            let label = format!("c4_{name}_K{k}");
            let scenario = Scenario::new(
                &label,
                model,
                sbp.clone(),
                n,
                0.5,
                ZeroPolicy::Renormalize,
                74_001 + 13 * config_index,
            )
            .unwrap();
            config_index += 1;
            let summary = run_scenario(&scenario).unwrap();
            for c in 0..2 {
                let diff = (summary.mean_ilr()[c] - exact.mean[c]).abs();
                if diff > 3.0 * exact.mean_se[c] {
                    violations.push(format!(
                        "{label}: mean coordinate {} off by {diff:.3e} (3 SE = {:.3e})",
                        c + 1,
                        3.0 * exact.mean_se[c]
                    ));
                }
                for e in c..2 {
                    let diff = (summary.cov_ilr().get(c, e) - exact.cov[c][e]).abs();
                    if diff > 3.0 * exact.cov_se[c][e] {
                        violations.push(format!(
                            "{label}: covariance ({},{}) off by {diff:.3e} (3 SE = {:.3e})",
                            c + 1,
                            e + 1,
                            3.0 * exact.cov_se[c][e]
                        ));
                    }
                }
            }
        }
    }
    criterion(4, "exact enumeration oracle", &violations, clock, Duration::from_secs(120));
}

/// Criterion 5's scenario, shared with criterion 6 as its reference point.
fn large_regime_coordinate_one() -> (f64, Vec<f64>, Vec<f64>) {
    let scenario = dm_scenario("large_regime", 1e6, 1_000_000, 10_000, 51_001);
    let summary = run_scenario(&scenario).unwrap();
    let v = contrast_matrix::<f64>(scenario.sbp()).unwrap();
    let corrected = approx_ilr_corrected(scenario.model(), &v).unwrap();
    let report = compare(&summary, &corrected).unwrap();
    (
        report.log_ratio_means()[0].abs(),
        report.log_ratio_means().to_vec(),
        report.log_ratio_eigs().to_vec(),
    )
}

#[test]
fn criterion_05_large_regime_accuracy() {
    let clock = Instant::now();
    let (_, means, eigs) = large_regime_coordinate_one();
    let mut violations = Vec::new();
    for (c, &m) in means.iter().enumerate() {
        if m.abs() >= 0.02 {
            violations.push(format!("|log-ratio mean| coordinate {} = {:.4}, limit 0.02", c + 1, m.abs()));
        }
    }
    for (c, &e) in eigs.iter().enumerate() {
        if e.abs() >= 0.05 {
            violations.push(format!("|log-ratio eigenvalue| {} = {:.4}, limit 0.05", c + 1, e.abs()));
        }
    }
    criterion(5, "large regime accuracy", &violations, clock, Duration::from_secs(60));
}

#[test]
fn criterion_06_moderate_regime_degradation() {
    let clock = Instant::now();
    let (reference, _, _) = large_regime_coordinate_one();
    let mut violations = Vec::new();
    for (label, alpha_s, k, seed) in
        [("overdispersed_total", 101.0, 1_000_000u64, 61_001u64), ("small_total", 1e6, 101, 61_002)]
    {
        let scenario = dm_scenario(label, alpha_s, k, 10_000, seed);
        let summary = run_scenario(&scenario).unwrap();
        let v = contrast_matrix::<f64>(scenario.sbp()).unwrap();
        let corrected = approx_ilr_corrected(scenario.model(), &v).unwrap();
        let report = compare(&summary, &corrected).unwrap();
        let observed = report.log_ratio_means()[0].abs();
        if observed <= reference {
            violations.push(format!(
                "{label}: coordinate-1 |log-ratio mean| {observed:.5} does not exceed \
                 the large-regime value {reference:.5}"
            ));
        }
    }
    criterion(6, "moderate regime degradation", &violations, clock, Duration::from_secs(60));
}

#[test]
fn criterion_07_multinomial_baseline_excess() {
    let clock = Instant::now();
    let scenario = dm_scenario("baseline_excess", 101.0, 1_000_000, 10_000, 71_001);
    let summary = run_scenario(&scenario).unwrap();
    let v = contrast_matrix::<f64>(scenario.sbp()).unwrap();
    let baseline: NormalApprox =
        approx_ilr_multinomial(&reference_alpha(), 1_000_000, &v).unwrap();
    let report = compare(&summary, &baseline).unwrap();
    // The eigenvalue inflation window implied by the excess factor at
    // concentration 101 and total 1e6.
    let center = 9804.91f64.ln();
    let (lo, hi) = (center - 0.2, center + 0.2);
    let mut violations = Vec::new();
    for (c, &e) in report.log_ratio_eigs().iter().enumerate() {
        // Coordinate 1 is dominated by the near-unit Dirichlet shape of
        // the rare class, whose log-scale variance (~trigamma of 1.01)
        // exceeds what any single inflation factor predicts; its
        // log-ratio sits near 9.68 and cannot enter this window. The
        // check is still applied to every eigenvalue as stated.
        if !(e >= lo && e <= hi) {
            violations.push(format!(
                "eigenvalue {} log-ratio {:.4} outside [{lo:.4}, {hi:.4}]",
                c + 1,
                e
            ));
        }
    }
    criterion(7, "multinomial baseline excess", &violations, clock, Duration::from_secs(60));
}

#[test]
fn criterion_08_dirichlet_sampler_moments() {
    let clock = Instant::now();
    let n = 1_000_000usize;
    let alpha = reference_alpha();
    let spec = DirichletSpec::new(alpha.clone(), 101.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(81_001);
    let j = alpha.len();
    let mut sums = vec![0.0f64; j];
    let mut squares = vec![0.0f64; j];
    for _ in 0..n {
        let p = sample_dirichlet(&spec, &mut rng).unwrap();
        for (c, &x) in p.parts().iter().enumerate() {
            sums[c] += x;
            squares[c] += x * x;
        }
    }
    let mut violations = Vec::new();
    for c in 0..j {
        let a = alpha.parts()[c];
        let var = a * (1.0 - a) / 102.0;
        // Beta marginal raw moments give the exact fourth central moment,
        // hence the standard error of the sample variance.
        let shape = 101.0 * a;
        let raw = |r: u32| -> f64 {
            (0..r).map(|i| (shape + i as f64) / (101.0 + i as f64)).product()
        };
        let (m1, m2, m3, m4) = (raw(1), raw(2), raw(3), raw(4));
        let mu4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1.powi(4);

        let mean = sums[c] / n as f64;
        let sample_var = (squares[c] - sums[c] * sums[c] / n as f64) / (n as f64 - 1.0);
        let mean_se = (var / n as f64).sqrt();
        let var_se = ((mu4 - var * var) / n as f64).sqrt();
        if (mean - a).abs() > 3.0 * mean_se {
            violations.push(format!(
                "class {}: mean {mean:.6} vs {a} (3 SE = {:.2e})",
                c + 1,
                3.0 * mean_se
            ));
        }
        if (sample_var - var).abs() > 3.0 * var_se {
            violations.push(format!(
                "class {}: variance {sample_var:.3e} vs {var:.3e} (3 SE = {:.2e})",
                c + 1,
                3.0 * var_se
            ));
        }
    }
    criterion(8, "dirichlet sampler moments", &violations, clock, Duration::from_secs(30));
}

#[test]
fn criterion_09_lognormal_total_cv() {
    let clock = Instant::now();
    let n = 100_000usize;
    let mut violations = Vec::new();
    for (sigma_sq, target, seed) in [(0.1f64, 0.32f64, 91_001u64), (1.0, 1.31, 91_002)] {
        let spec = TotalCountSpec::Lognormal { mu: 1000f64.ln(), sigma_sq };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for _ in 0..n {
            let k = sample_total(&spec, &mut rng).unwrap() as f64;
            sum += k;
            sum_sq += k * k;
        }
        let mean = sum / n as f64;
        let sd = ((sum_sq - sum * sum / n as f64) / (n as f64 - 1.0)).sqrt();
        let cv = sd / mean;
        if (cv - target).abs() > 0.05 * target {
            violations.push(format!(
                "sigma_sq {sigma_sq}: sample CV {cv:.4} not within 5% of {target}"
            ));
        }
    }
    criterion(9, "lognormal total cv", &violations, clock, Duration::from_secs(5));
}

#[test]
fn criterion_10_multimodal_qq_degradation() {
    let clock = Instant::now();
    // Q-Q correlation of the first coordinate against the corrected
    // approximation, at a fixed total of 1e4 and 1e4 draws. The 0.01 gap
    // was locked after calibrating against a true-normal baseline, whose
    // correlation at this sample size is ~0.99997; the unimodal
    // concentration scores ~0.999 and the multimodal one ~0.89.
    let qq_correlation = |alpha_s: f64, seed: u64| -> f64 {
        let scenario =
            dm_scenario(&format!("qq_a{alpha_s}"), alpha_s, 10_000, 10_000, seed);
        let summary = run_scenario(&scenario).unwrap();
        let v = contrast_matrix::<f64>(scenario.sbp()).unwrap();
        let corrected = approx_ilr_corrected(scenario.model(), &v).unwrap();
        let series = qq_series(summary.sorted_coords(0).unwrap(), &corrected, 0).unwrap();
        series.correlation()
    };
    let multimodal = qq_correlation(1.0, 101_001);
    let unimodal = qq_correlation(1e6, 101_002);
    let mut violations = Vec::new();
    if !(multimodal <= unimodal - 0.01) {
        violations.push(format!(
            "multimodal correlation {multimodal:.5} not below unimodal {unimodal:.5} by 0.01"
        ));
    }
    criterion(10, "multimodal qq degradation", &violations, clock, Duration::from_secs(120));
}

#[test]
fn criterion_11_grid_determinism() {
    let clock = Instant::now();
    let parent = tempfile::tempdir().unwrap();
    let run = |name: &str, parallelism: usize| -> Vec<(String, Vec<u8>)> {
        let out = parent.path().join(name);
        let cfg = RunConfig {
            master_seed: 111_001,
            n_draws: 10_000,
            zero_policy: ZeroPolicy::Renormalize,
            correction_mode: CorrectionMode::Consistent,
            output_dir: out.clone(),
            emit_svg: false,
            parallelism,
            grid: GridConfig {
                alpha_tilde_vectors: vec![vec![0.01, 0.04, 0.15, 0.30, 0.50]],
                dgds: vec![Dgd::Multinomial, Dgd::DirichletMultinomial],
                alpha_s_values: vec![101.0, 1000.0, 10_000.0, 100_000.0, 1_000_000.0],
                total_values: vec![101, 1000, 10_000, 100_000, 1_000_000],
                sigma_sq_values: vec![],
                sbp: SbpChoice::Pivotal,
                zero_replacement: 0.5,
            },
        };
        let outcome = cmd_simulate(&cfg).unwrap();
        assert!(outcome.failures.is_empty(), "no scenario may fail: {:?}", outcome.failures);
        let mut csvs: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .filter_map(|e| {
                let e = e.unwrap();
                let name = e.file_name().to_string_lossy().into_owned();
                name.ends_with(".csv").then(|| (name, std::fs::read(e.path()).unwrap()))
            })
            .collect();
        csvs.sort();
        csvs
    };
    let serial_a = run("a", 1);
    let serial_b = run("b", 1);
    let parallel = run("c", 8);
    let mut violations = Vec::new();
    // The full two-family grid: 30 scenario summaries plus comparisons.
    if serial_a.len() != 31 {
        violations.push(format!("expected 31 CSV files, got {}", serial_a.len()));
    }
    if serial_a != serial_b {
        violations.push("rerun with the same seed is not byte-identical".to_string());
    }
    if serial_a != parallel {
        violations.push("parallelism 1 vs 8 changes CSV bytes".to_string());
    }
    criterion(11, "grid determinism", &violations, clock, Duration::from_secs(600));
}
