//! Monte Carlo engine: runs seeded scenarios, summarizes the empirical
//! distribution of ilr coordinates, and compares it against the normal
//! approximations on the log-ratio scale.
//!
//! Also houses the analytic excess-variability table, a Q-Q series builder,
//! and a brute-force enumeration oracle that computes exact ilr moments for
//! small fixed totals by summing over every composition of the total.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::approx::{
    approx_ilr_corrected_with, approx_ilr_multinomial, approx_ilr_plugin, excess_variability,
    gamma_factor, ApproxError, CorrectionMode, NormalApprox,
};
use crate::composition::{
    close_with_policy, contrast_matrix, ilr, CompositionError, SbpMatrix, ZeroPolicy,
};
use crate::linalg::{sym_eigen, LinalgError, SymmetricMatrix};
use crate::sampling::{
    dm_log_pmf, multinomial_log_pmf, sample_counts, ClassProbabilities, CountVector, Dgd,
    ModelSpec, SamplingError, TotalCountSpec,
};
use crate::scalar::Scalar;

/// Largest composition count [`enumerate_exact`] is willing to sum over.
pub const ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("a scenario needs at least two draws, got {got}")]
    TooFewDraws { got: usize },
    #[error("zero replacement must be finite and nonnegative, got {value}")]
    BadZeroReplacement { value: f64 },
    #[error("sign matrix has {sbp} parts but the model has {model} classes")]
    PartsMismatch { sbp: usize, model: usize },
    #[error("scenario labels must be unique, `{label}` appears more than once")]
    DuplicateLabel { label: String },
    #[error("empirical summary has {empirical} coordinates but the approximation has {approx}")]
    CompareDimensions { empirical: usize, approx: usize },
    #[error("samples must be sorted nondecreasing for a Q-Q series")]
    UnsortedSamples,
    #[error("coordinate index {coord} out of range for {coords} coordinates")]
    BadCoordinate { coord: usize, coords: usize },
    #[error("{compositions:.3e} compositions exceed the enumeration cap of {cap}")]
    InstanceTooLarge { compositions: f64, cap: u64 },
    #[error("exact enumeration requires a fixed total count")]
    ExactNeedsFixedTotal,
    #[error(
        "empirical ilr covariance is not positive semidefinite: smallest eigenvalue {min_eigenvalue}"
    )]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("thread pool construction failed: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Composition(#[from] CompositionError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One unit of simulation work: a model, a basis, a draw count, and the
/// seed of its private random stream.
#[derive(Debug, Clone)]
pub struct Scenario {
    label: String,
    model: ModelSpec<f64>,
    sbp: SbpMatrix,
    n_draws: usize,
    zero_replacement: f64,
    zero_policy: ZeroPolicy,
    seed: u64,
}

impl Scenario {
    pub fn new(
        label: impl Into<String>,
        model: ModelSpec<f64>,
        sbp: SbpMatrix,
        n_draws: usize,
        zero_replacement: f64,
        zero_policy: ZeroPolicy,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        if n_draws < 2 {
            return Err(HarnessError::TooFewDraws { got: n_draws });
        }
        if !zero_replacement.is_finite() || zero_replacement < 0.0 {
            return Err(HarnessError::BadZeroReplacement { value: zero_replacement });
        }
        if sbp.parts() != model.classes() {
            return Err(HarnessError::PartsMismatch {
                sbp: sbp.parts(),
                model: model.classes(),
            });
        }
        Ok(Self {
            label: label.into(),
            model,
            sbp,
            n_draws,
            zero_replacement,
            zero_policy,
            seed,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn model(&self) -> &ModelSpec<f64> {
        &self.model
    }

    pub fn sbp(&self) -> &SbpMatrix {
        &self.sbp
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn zero_replacement(&self) -> f64 {
        self.zero_replacement
    }

    pub fn zero_policy(&self) -> ZeroPolicy {
        self.zero_policy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Empirical moments of one scenario's draws.
///
/// The ilr side is computed from zero-replaced closed counts; the
/// proportion side is computed from the raw per-draw proportions
/// `count / total` so it estimates the model's own moments, untouched by
/// the replacement value. `zero_fraction` says how often replacement fired.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSummary {
    mean_ilr: Vec<f64>,
    cov_ilr: SymmetricMatrix<f64>,
    eigenvalues: Vec<f64>,
    sorted_coords: Vec<Vec<f64>>,
    mean_props: Vec<f64>,
    cov_props: SymmetricMatrix<f64>,
    zero_fraction: f64,
}

impl EmpiricalSummary {
    pub fn coords(&self) -> usize {
        self.mean_ilr.len()
    }

    pub fn classes(&self) -> usize {
        self.mean_props.len()
    }

    pub fn n_draws(&self) -> usize {
        self.sorted_coords.first().map_or(0, Vec::len)
    }

    pub fn mean_ilr(&self) -> &[f64] {
        &self.mean_ilr
    }

    pub fn cov_ilr(&self) -> &SymmetricMatrix<f64> {
        &self.cov_ilr
    }

    /// Spectrum of the empirical ilr covariance, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Ascending sample values of one coordinate, for Q-Q series.
    pub fn sorted_coords(&self, coord: usize) -> Result<&[f64], HarnessError> {
        self.sorted_coords
            .get(coord)
            .map(Vec::as_slice)
            .ok_or(HarnessError::BadCoordinate { coord, coords: self.coords() })
    }

    pub fn mean_props(&self) -> &[f64] {
        &self.mean_props
    }

    pub fn cov_props(&self) -> &SymmetricMatrix<f64> {
        &self.cov_props
    }

    /// Fraction of draws that contained at least one zero count.
    pub fn zero_fraction(&self) -> f64 {
        self.zero_fraction
    }
}

/// Sample mean and `(n-1)`-divisor covariance of column-major draws, by the
/// two-pass formula so tiny variances survive large means.
fn two_pass_moments(columns: &[Vec<f64>]) -> (Vec<f64>, SymmetricMatrix<f64>) {
    let dim = columns.len();
    let n = columns[0].len();
    let mean: Vec<f64> =
        columns.iter().map(|col| col.iter().sum::<f64>() / n as f64).collect();
    let cov = SymmetricMatrix::from_fn(dim, |i, j| {
        let (ci, cj) = (&columns[i], &columns[j]);
        let (mi, mj) = (mean[i], mean[j]);
        let mut acc = 0.0f64;
        for k in 0..n {
            acc += (ci[k] - mi) * (cj[k] - mj);
        }
        acc / (n - 1) as f64
    })
    .expect("dimension is at least one");
    (mean, cov)
}

/// Runs one scenario: draws counts from its seeded stream, pushes them
/// through closure and the contrast basis, and summarizes.
pub fn run_scenario(s: &Scenario) -> Result<EmpiricalSummary, HarnessError> {
    let v = contrast_matrix::<f64>(s.sbp())?;
    let coords = v.coords();
    let classes = v.parts();
    let n = s.n_draws();
    let mut rng = ChaCha12Rng::seed_from_u64(s.seed());
    let mut coord_draws = vec![vec![0.0f64; n]; coords];
    let mut prop_draws = vec![vec![0.0f64; n]; classes];
    let mut zero_draws = 0usize;
    for i in 0..n {
        let x = sample_counts(s.model(), &mut rng)?;
        if x.zeros() > 0 {
            zero_draws += 1;
        }
        let total = x.total() as f64;
        for (j, &c) in x.counts().iter().enumerate() {
            prop_draws[j][i] = c as f64 / total;
        }
        let closed = close_with_policy(&x, s.zero_replacement(), s.zero_policy())?;
        let z = ilr(&closed.composition, &v)?;
        for (c, &value) in z.coords().iter().enumerate() {
            coord_draws[c][i] = value;
        }
    }
    let (mean_ilr, cov_ilr) = two_pass_moments(&coord_draws);
    let (mean_props, cov_props) = two_pass_moments(&prop_draws);
    let eigen = sym_eigen(&cov_ilr)?;
    let min = *eigen.eigenvalues.last().expect("at least one coordinate");
    if min < -f64::PSD_TOL {
        return Err(HarnessError::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    let mut sorted_coords = coord_draws;
    for col in &mut sorted_coords {
        col.sort_unstable_by(f64::total_cmp);
    }
    Ok(EmpiricalSummary {
        mean_ilr,
        cov_ilr,
        eigenvalues: eigen.eigenvalues,
        sorted_coords,
        mean_props,
        cov_props,
        zero_fraction: zero_draws as f64 / n as f64,
    })
}

/// Per-coordinate log-ratios of empirical against approximate moments.
/// Zero means perfect correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    log_ratio_means: Vec<f64>,
    log_ratio_eigs: Vec<f64>,
    sign_mismatch: Vec<bool>,
}

impl ComparisonReport {
    pub fn coords(&self) -> usize {
        self.log_ratio_means.len()
    }

    /// `ln(|empirical mean| / |approximate mean|)` per coordinate; a
    /// non-finite entry always has its sign-mismatch flag set.
    pub fn log_ratio_means(&self) -> &[f64] {
        &self.log_ratio_means
    }

    /// `ln(empirical eigenvalue / approximate eigenvalue)` by descending
    /// rank.
    pub fn log_ratio_eigs(&self) -> &[f64] {
        &self.log_ratio_eigs
    }

    /// True where the empirical and approximate means disagree in sign
    /// (counting an exact zero on one side only as disagreement).
    pub fn sign_mismatch(&self) -> &[bool] {
        &self.sign_mismatch
    }
}

/// Compares empirical moments against a normal approximation on the
/// log-ratio scale. Mean ratios are taken on absolute values with a sign
/// flag, since coordinates contrasting rare classes have negative means.
pub fn compare(
    e: &EmpiricalSummary,
    a: &NormalApprox<f64>,
) -> Result<ComparisonReport, HarnessError> {
    if e.coords() != a.dim() {
        return Err(HarnessError::CompareDimensions { empirical: e.coords(), approx: a.dim() });
    }
    let mut log_ratio_means = Vec::with_capacity(e.coords());
    let mut sign_mismatch = Vec::with_capacity(e.coords());
    for (&em, &am) in e.mean_ilr().iter().zip(a.mean()) {
        if em == 0.0 && am == 0.0 {
            log_ratio_means.push(0.0);
            sign_mismatch.push(false);
        } else {
            // ln of a zero side yields an infinite sentinel, always flagged.
            log_ratio_means.push((em.abs() / am.abs()).ln());
            sign_mismatch.push(em.signum() != am.signum());
        }
    }
    let log_ratio_eigs = e
        .eigenvalues()
        .iter()
        .zip(a.eigenvalues())
        .map(|(&ee, &ae)| if ee == ae { 0.0 } else { (ee / ae).ln() })
        .collect();
    Ok(ComparisonReport { log_ratio_means, log_ratio_eigs, sign_mismatch })
}

/// Paired theoretical and sample quantiles for one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct QqSeries {
    theoretical: Vec<f64>,
    sample: Vec<f64>,
}

impl QqSeries {
    pub fn len(&self) -> usize {
        self.theoretical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theoretical.is_empty()
    }

    pub fn theoretical(&self) -> &[f64] {
        &self.theoretical
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    /// Pearson correlation of the two quantile series; NaN when either
    /// side is constant.
    pub fn correlation(&self) -> f64 {
        let n = self.len() as f64;
        let mt = self.theoretical.iter().sum::<f64>() / n;
        let ms = self.sample.iter().sum::<f64>() / n;
        let mut stt = 0.0f64;
        let mut sss = 0.0f64;
        let mut sts = 0.0f64;
        for (&t, &s) in self.theoretical.iter().zip(&self.sample) {
            stt += (t - mt) * (t - mt);
            sss += (s - ms) * (s - ms);
            sts += (t - mt) * (s - ms);
        }
        sts / (stt * sss).sqrt()
    }
}

/// Standard normal quantile function.
///
/// A rational approximation refined by one Halley step against the
/// double-precision normal CDF, leaving errors far below the 1.5e-9 the
/// Q-Q outputs are specified to. Requires `0 < p < 1`.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability must lie strictly inside (0, 1)");
    // Rational pieces (central plus two tails) of the classic minimax fit.
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement; skipped in the far tails where the exp overflows
    // and the unrefined value is already beyond plotting relevance.
    let e = 0.5 * erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    if u.is_finite() {
        x -= u / (1.0 + x * u / 2.0);
    }
    x
}

/// Builds a Q-Q series for one coordinate: theoretical quantile `i` is
/// `mean + sd * quantile((i - 0.5) / n)` against the sorted samples.
pub fn qq_series(
    sorted_samples: &[f64],
    a: &NormalApprox<f64>,
    coord: usize,
) -> Result<QqSeries, HarnessError> {
    if coord >= a.dim() {
        return Err(HarnessError::BadCoordinate { coord, coords: a.dim() });
    }
    if sorted_samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(HarnessError::UnsortedSamples);
    }
    let n = sorted_samples.len();
    let mean = a.mean()[coord];
    let sd = a.cov().get(coord, coord).sqrt();
    let theoretical = (1..=n)
        .map(|i| mean + sd * inverse_normal_cdf((i as f64 - 0.5) / n as f64))
        .collect();
    Ok(QqSeries { theoretical, sample: sorted_samples.to_vec() })
}

/// One row of the excess-variability table: a model family at fixed
/// concentration and log-scale variance, evaluated across the totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessRow {
    pub dgd: Dgd,
    pub alpha_s: Option<f64>,
    pub sigma_sq: Option<f64>,
    /// One cell per total, aligned with [`ExcessGrid::k_values`].
    pub cells: Vec<f64>,
}

/// The analytic excess-variability table over a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessGrid {
    /// Totals (or median totals for lognormal rows), ascending.
    pub k_values: Vec<u64>,
    pub rows: Vec<ExcessRow>,
}

/// Builds the excess-variability table: each cell is the model's
/// proportion-variance factor times the (median) total, i.e. the variance
/// inflation over a multinomial with that total. Row order: multinomial,
/// Dirichlet-multinomial per concentration, then per log-scale variance
/// the two lognormal families.
pub fn excess_variability_table(
    dgds: &[Dgd],
    alpha_s_values: &[f64],
    sigma_sq_values: &[f64],
    k_values: &[u64],
) -> ExcessGrid {
    let mut k_values = k_values.to_vec();
    k_values.sort_unstable();
    k_values.dedup();
    let mut alpha_s_values = alpha_s_values.to_vec();
    alpha_s_values.sort_unstable_by(f64::total_cmp);
    alpha_s_values.dedup();
    let mut sigma_sq_values = sigma_sq_values.to_vec();
    sigma_sq_values.sort_unstable_by(f64::total_cmp);
    sigma_sq_values.dedup();
    let has = |d: Dgd| dgds.contains(&d);

    let mut rows = Vec::new();
    if has(Dgd::Multinomial) {
        rows.push(ExcessRow {
            dgd: Dgd::Multinomial,
            alpha_s: None,
            sigma_sq: None,
            cells: k_values.iter().map(|_| 1.0).collect(),
        });
    }
    if has(Dgd::DirichletMultinomial) {
        for &alpha_s in &alpha_s_values {
            rows.push(ExcessRow {
                dgd: Dgd::DirichletMultinomial,
                alpha_s: Some(alpha_s),
                sigma_sq: None,
                cells: k_values.iter().map(|&k| excess_variability(alpha_s, k)).collect(),
            });
        }
    }
    for &sigma_sq in &sigma_sq_values {
        if has(Dgd::LognormalMultinomial) {
            rows.push(ExcessRow {
                dgd: Dgd::LognormalMultinomial,
                alpha_s: None,
                sigma_sq: Some(sigma_sq),
                // K * exp(-ln K + sigma_sq/2): the total cancels.
                cells: k_values.iter().map(|_| (sigma_sq / 2.0).exp()).collect(),
            });
        }
        if has(Dgd::LognormalDirichletMultinomial) {
            for &alpha_s in &alpha_s_values {
                rows.push(ExcessRow {
                    dgd: Dgd::LognormalDirichletMultinomial,
                    alpha_s: Some(alpha_s),
                    sigma_sq: Some(sigma_sq),
                    cells: k_values
                        .iter()
                        .map(|&k| k as f64 * gamma_factor(alpha_s, (k as f64).ln(), sigma_sq))
                        .collect(),
                });
            }
        }
    }
    ExcessGrid { k_values, rows }
}

/// Exact ilr moments from full enumeration of a small instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub mean_ilr: Vec<f64>,
    pub cov_ilr: SymmetricMatrix<f64>,
    /// Sum of all outcome probabilities; equals one up to rounding and
    /// is exposed so callers can verify coverage.
    pub total_probability: f64,
}

/// Number of weak compositions of `k` into `j` parts, saturating in `f64`.
fn composition_count(k: u64, j: usize) -> f64 {
    let mut c = 1.0f64;
    for i in 1..j {
        c = c * (k as f64 + i as f64) / i as f64;
        if c > 1e18 {
            return c;
        }
    }
    c
}

/// Calls `f` for every vector of `j` nonnegative counts summing to `k`.
fn for_each_composition(k: u64, j: usize, f: &mut impl FnMut(&[u64])) {
    fn rec(buf: &mut Vec<u64>, slot: usize, remaining: u64, j: usize, f: &mut impl FnMut(&[u64])) {
        if slot == j - 1 {
            buf[slot] = remaining;
            f(buf);
            return;
        }
        for v in 0..=remaining {
            buf[slot] = v;
            rec(buf, slot + 1, remaining - v, j, f);
        }
    }
    let mut buf = vec![0u64; j];
    rec(&mut buf, 0, k, j, f);
}

/// Exact mean and covariance of `ilr(close(x))` under a fixed-total model,
/// by summing the probability-weighted coordinates over every composition
/// of the total. The ground truth for Monte Carlo and delta-method results.
pub fn enumerate_exact(
    model: &ModelSpec<f64>,
    sbp: &SbpMatrix,
    zero_replacement: f64,
) -> Result<ExactMoments, HarnessError> {
    let k = match *model.total() {
        TotalCountSpec::Fixed(k) => k,
        TotalCountSpec::Lognormal { .. } => return Err(HarnessError::ExactNeedsFixedTotal),
    };
    let j = model.classes();
    if sbp.parts() != j {
        return Err(HarnessError::PartsMismatch { sbp: sbp.parts(), model: j });
    }
    let compositions = composition_count(k, j);
    if compositions > ENUMERATION_CAP as f64 {
        return Err(HarnessError::InstanceTooLarge { compositions, cap: ENUMERATION_CAP });
    }
    let v = contrast_matrix::<f64>(sbp)?;
    let d = v.coords();

    let log_pmf = |x: &CountVector| -> Result<f64, SamplingError> {
        match model.probabilities() {
            ClassProbabilities::Fixed(p) => multinomial_log_pmf(x, p),
            ClassProbabilities::Dirichlet(dir) => dm_log_pmf(x, dir),
        }
    };
    let coords_of = |counts: &[u64]| -> Result<(f64, Vec<f64>), HarnessError> {
        let x = CountVector::new(counts.to_vec())?;
        let w = log_pmf(&x)?.exp();
        let closed = close_with_policy(&x, zero_replacement, ZeroPolicy::Renormalize)?;
        let z = ilr(&closed.composition, &v)?;
        Ok((w, z.coords().to_vec()))
    };

    // Pass 1: total probability and weighted mean.
    let mut total_probability = 0.0f64;
    let mut mean = vec![0.0f64; d];
    let mut first_error: Option<HarnessError> = None;
    for_each_composition(k, j, &mut |counts| {
        if first_error.is_some() {
            return;
        }
        match coords_of(counts) {
            Ok((w, z)) => {
                total_probability += w;
                for (m, &zc) in mean.iter_mut().zip(&z) {
                    *m += w * zc;
                }
            }
            Err(e) => first_error = Some(e),
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    for m in &mut mean {
        *m /= total_probability;
    }

    // Pass 2: weighted covariance about the exact mean.
    let mut cov_acc = vec![0.0f64; d * d];
    for_each_composition(k, j, &mut |counts| {
        if first_error.is_some() {
            return;
        }
        match coords_of(counts) {
            Ok((w, z)) => {
                for i in 0..d {
                    for l in 0..=i {
                        cov_acc[i * d + l] += w * (z[i] - mean[i]) * (z[l] - mean[l]);
                    }
                }
            }
            Err(e) => first_error = Some(e),
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    let cov_ilr = SymmetricMatrix::from_fn(d, |i, l| {
        let (hi, lo) = if i >= l { (i, l) } else { (l, i) };
        cov_acc[hi * d + lo] / total_probability
    })?;
    Ok(ExactMoments { mean_ilr: mean, cov_ilr, total_probability })
}

/// The approximation a [`VariantComparison`] was made against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApproxVariant {
    Plugin,
    Corrected,
    MultinomialBaseline,
}

impl ApproxVariant {
    pub const ALL: [ApproxVariant; 3] =
        [ApproxVariant::Plugin, ApproxVariant::Corrected, ApproxVariant::MultinomialBaseline];

    pub fn code(self) -> &'static str {
        match self {
            ApproxVariant::Plugin => "plugin",
            ApproxVariant::Corrected => "corrected",
            ApproxVariant::MultinomialBaseline => "multinomial",
        }
    }
}

impl std::fmt::Display for ApproxVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// One approximation evaluated against a scenario's empirical summary.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantComparison {
    pub variant: ApproxVariant,
    pub approx: NormalApprox<f64>,
    pub report: ComparisonReport,
}

/// Everything computed for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub label: String,
    pub summary: EmpiricalSummary,
    pub variants: Vec<VariantComparison>,
}

/// A scenario that could not be completed, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFailure {
    pub label: String,
    pub error: String,
}

/// Grid results: reports and failures, each sorted by label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridOutcome {
    pub reports: Vec<ScenarioReport>,
    pub failures: Vec<ScenarioFailure>,
}

/// Total count the multinomial baseline uses for a model: the fixed total,
/// or the rounded median `exp(mu)` of a lognormal total.
pub fn baseline_total(model: &ModelSpec<f64>) -> u64 {
    match *model.total() {
        TotalCountSpec::Fixed(k) => k,
        TotalCountSpec::Lognormal { mu, .. } => {
            let t = mu.exp().round();
            if t < 1.0 {
                1
            } else if t >= u64::MAX as f64 {
                u64::MAX
            } else {
                t as u64
            }
        }
    }
}

/// The three approximations for one scenario's model and basis.
pub fn scenario_approximations(
    model: &ModelSpec<f64>,
    sbp: &SbpMatrix,
    mode: CorrectionMode,
) -> Result<Vec<(ApproxVariant, NormalApprox<f64>)>, HarnessError> {
    let v = contrast_matrix::<f64>(sbp)?;
    Ok(vec![
        (ApproxVariant::Plugin, approx_ilr_plugin(model, &v)?),
        (ApproxVariant::Corrected, approx_ilr_corrected_with(model, &v, mode)?),
        (
            ApproxVariant::MultinomialBaseline,
            approx_ilr_multinomial(model.expected_probabilities(), baseline_total(model), &v)?,
        ),
    ])
}

fn process_scenario(s: &Scenario, mode: CorrectionMode) -> Result<ScenarioReport, ScenarioFailure> {
    let fail = |e: HarnessError| ScenarioFailure { label: s.label().to_string(), error: e.to_string() };
    let summary = run_scenario(s).map_err(fail)?;
    let approximations = scenario_approximations(s.model(), s.sbp(), mode).map_err(fail)?;
    let mut variants = Vec::with_capacity(approximations.len());
    for (variant, approx) in approximations {
        let report = compare(&summary, &approx).map_err(fail)?;
        variants.push(VariantComparison { variant, approx, report });
    }
    Ok(ScenarioReport { label: s.label().to_string(), summary, variants })
}

/// Runs a grid of scenarios, possibly in parallel. Every scenario draws
/// from its own seeded stream, so the outcome does not depend on the
/// parallelism degree; results are sorted by label. Per-scenario failures
/// are collected, not fatal.
pub fn run_grid(
    scenarios: &[Scenario],
    parallelism: usize,
    mode: CorrectionMode,
) -> Result<GridOutcome, HarnessError> {
    let mut seen = HashSet::new();
    for s in scenarios {
        if !seen.insert(s.label()) {
            return Err(HarnessError::DuplicateLabel { label: s.label().to_string() });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    let results: Vec<Result<ScenarioReport, ScenarioFailure>> =
        pool.install(|| scenarios.par_iter().map(|s| process_scenario(s, mode)).collect());
    let mut outcome = GridOutcome::default();
    for r in results {
        match r {
            Ok(report) => outcome.reports.push(report),
            Err(failure) => outcome.failures.push(failure),
        }
    }
    outcome.reports.sort_by(|a, b| a.label.cmp(&b.label));
    outcome.failures.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(outcome)
}
