//! Closed-form moments and normal approximations for ilr coordinates of
//! counts drawn from the four generating models.
//!
//! Everything here is a deterministic function of the model parameters. The
//! covariance of the proportions is always a scalar multiple of the
//! single-trial covariance `diag(a) - a a'`; the scalar depends on the model
//! (see [`proportion_scale`]). Propagating through the log and the contrast
//! basis gives the plug-in approximation; a second-order term on the log of
//! each proportion gives the corrected mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::{ilr, Composition, CompositionError, ContrastMatrix, IlrVector};
use crate::linalg::{
    quadratic_form, sandwich_form, sym_eigen, LinalgError, SymmetricMatrix,
};
use crate::sampling::{ClassProbabilities, ModelSpec, TotalCountSpec};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("mean has {mean} entries but covariance is {cov}x{cov}")]
    DimensionMismatch { mean: usize, cov: usize },
    #[error("covariance is not positive semidefinite: smallest eigenvalue {min_eigenvalue}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error(
        "covariance routes disagree: sandwich and scaled-quadratic forms differ by {max_abs_diff}"
    )]
    RouteDisagreement { max_abs_diff: f64 },
    #[error(transparent)]
    Composition(#[from] CompositionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A multivariate normal given by its mean and covariance. Construction
/// validates that the dimensions agree and that the covariance is positive
/// semidefinite (smallest eigenvalue above `-PSD_TOL`); the spectrum found
/// during validation is kept for later comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalApprox<F> {
    mean: Vec<F>,
    cov: SymmetricMatrix<F>,
    eigenvalues: Vec<F>,
}

impl<F: Scalar> NormalApprox<F> {
    pub fn new(mean: Vec<F>, cov: SymmetricMatrix<F>) -> Result<Self, ApproxError> {
        if mean.len() != cov.dim() {
            return Err(ApproxError::DimensionMismatch { mean: mean.len(), cov: cov.dim() });
        }
        let eigen = sym_eigen(&cov)?;
        let min = *eigen.eigenvalues.last().expect("dimension is at least one");
        if min < -F::PSD_TOL {
            return Err(ApproxError::NotPositiveSemidefinite {
                min_eigenvalue: min.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { mean, cov, eigenvalues: eigen.eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[F] {
        &self.mean
    }

    pub fn cov(&self) -> &SymmetricMatrix<F> {
        &self.cov
    }

    /// Covariance spectrum in descending order.
    pub fn eigenvalues(&self) -> &[F] {
        &self.eigenvalues
    }

    /// Marginal variances, i.e. the covariance diagonal.
    pub fn variances(&self) -> Vec<F> {
        self.cov.diag()
    }
}

/// Per-class ingredients of the second-order mean correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTerms<F> {
    lambda: Vec<F>,
    beta: Vec<F>,
}

impl<F: Scalar> CorrectionTerms<F> {
    pub fn new(alpha_tilde: &Composition<F>) -> Self {
        let one = F::one();
        let lambda = alpha_tilde.parts().iter().map(|&a| a * (one - a)).collect();
        let beta = alpha_tilde.parts().iter().map(|&a| one / (a * a)).collect();
        Self { lambda, beta }
    }

    /// Single-trial variances `a_j (1 - a_j)`, the covariance diagonal.
    pub fn lambda(&self) -> &[F] {
        &self.lambda
    }

    /// Inverse squared expectations `1 / a_j^2`.
    pub fn beta(&self) -> &[F] {
        &self.beta
    }
}

/// Which mean-correction factor to use for fixed-total Dirichlet models.
///
/// `Consistent` scales the correction by the model's proportion variance,
/// the same scalar that multiplies the covariance. `Literal` reproduces a
/// published variant carrying an extra `1/K`, kept available for
/// side-by-side study; the two coincide for lognormal totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    #[default]
    Consistent,
    Literal,
}

/// Covariance of a single categorical trial: `diag(a) - a a'`.
pub fn sigma_pi<F: Scalar>(alpha_tilde: &Composition<F>) -> SymmetricMatrix<F> {
    let parts = alpha_tilde.parts();
    SymmetricMatrix::from_fn(parts.len(), |i, j| {
        let cross = parts[i] * parts[j];
        if i == j {
            parts[i] - cross
        } else {
            -cross
        }
    })
    .expect("composition dimension is at least two")
}

/// Proportion covariance of the Dirichlet-multinomial with fixed total:
/// `(1/K) (alpha_s + K)/(alpha_s + 1)` times [`sigma_pi`].
pub fn sigma_p<F: Scalar>(alpha_tilde: &Composition<F>, alpha_s: F, k: u64) -> SymmetricMatrix<F> {
    let kf = F::of_u64(k);
    sigma_pi(alpha_tilde).scaled(excess_variability(alpha_s, k) / kf)
}

/// Variance inflation of Dirichlet-multinomial proportions over multinomial
/// proportions at the same total: `(alpha_s + K)/(alpha_s + 1)`.
pub fn excess_variability<F: Scalar>(alpha_s: F, k: u64) -> F {
    (alpha_s + F::of_u64(k)) / (alpha_s + F::one())
}

/// Moments of a lognormal total count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalMoments<F> {
    pub mean: F,
    pub variance: F,
    pub cv: F,
}

/// Mean, variance, and coefficient of variation of `exp(Normal(mu, sigma_sq))`.
pub fn lognormal_moments<F: Scalar>(mu: F, sigma_sq: F) -> LognormalMoments<F> {
    let one = F::one();
    let two = F::of(2.0);
    let mean = (mu + sigma_sq / two).exp();
    let variance = (sigma_sq.exp() - one) * (two * mu + sigma_sq).exp();
    let cv = (sigma_sq.exp() - one).sqrt();
    LognormalMoments { mean, variance, cv }
}

/// Proportion-variance factor for a Dirichlet layer under a lognormal
/// total: `(alpha_s exp(-mu + sigma_sq/2) + 1)/(alpha_s + 1)`.
pub fn gamma_factor<F: Scalar>(alpha_s: F, mu: F, sigma_sq: F) -> F {
    let one = F::one();
    (alpha_s * (sigma_sq / F::of(2.0) - mu).exp() + one) / (alpha_s + one)
}

/// The scalar multiplying [`sigma_pi`] in the model's proportion
/// covariance. Multinomial variants are the `alpha_s -> infinity` limits of
/// the Dirichlet formulas.
pub fn proportion_scale<F: Scalar>(model: &ModelSpec<F>) -> F {
    match (model.probabilities(), model.total()) {
        (ClassProbabilities::Fixed(_), &TotalCountSpec::Fixed(k)) => F::one() / F::of_u64(k),
        (ClassProbabilities::Dirichlet(d), &TotalCountSpec::Fixed(k)) => {
            excess_variability(d.alpha_s(), k) / F::of_u64(k)
        }
        (ClassProbabilities::Fixed(_), &TotalCountSpec::Lognormal { mu, sigma_sq }) => {
            (sigma_sq / F::of(2.0) - mu).exp()
        }
        (ClassProbabilities::Dirichlet(d), &TotalCountSpec::Lognormal { mu, sigma_sq }) => {
            gamma_factor(d.alpha_s(), mu, sigma_sq)
        }
    }
}

/// Normal approximation for the proportions themselves: mean at the
/// expected composition, covariance [`proportion_scale`] times [`sigma_pi`].
pub fn approx_proportions<F: Scalar>(model: &ModelSpec<F>) -> Result<NormalApprox<F>, ApproxError> {
    let a = model.expected_probabilities();
    let cov = sigma_pi(a).scaled(proportion_scale(model));
    NormalApprox::new(a.parts().to_vec(), cov)
}

/// Plug-in covariance via the simplification `scale * V' diag(1/a) V`,
/// valid because the contrast columns sum to zero.
pub fn approx_ilr_cov_simplified<F: Scalar>(
    model: &ModelSpec<F>,
    v: &ContrastMatrix<F>,
) -> Result<SymmetricMatrix<F>, ApproxError> {
    let a = model.expected_probabilities();
    if v.parts() != a.len() {
        return Err(CompositionError::DimensionMismatch {
            context: "contrast matrix and model must have equal part counts",
        }
        .into());
    }
    let inv: Vec<F> = a.parts().iter().map(|&x| F::one() / x).collect();
    Ok(quadratic_form(v.matrix(), &inv)?.scaled(proportion_scale(model)))
}

/// Plug-in covariance via the full three-factor sandwich
/// `V' diag(1/a) Sigma_p diag(1/a) V`, cross-checked against the simplified
/// route; the two are algebraically identical and must agree numerically.
fn plugin_cov<F: Scalar>(
    model: &ModelSpec<F>,
    v: &ContrastMatrix<F>,
) -> Result<SymmetricMatrix<F>, ApproxError> {
    let a = model.expected_probabilities();
    let inv: Vec<F> = a.parts().iter().map(|&x| F::one() / x).collect();
    let sp = sigma_pi(a).scaled(proportion_scale(model));
    let sandwich = sandwich_form(v.matrix(), &inv, &sp)?;
    let simplified = approx_ilr_cov_simplified(model, v)?;
    let mut worst = F::zero();
    let mut scale = F::one();
    for i in 0..sandwich.dim() {
        for j in 0..=i {
            worst = worst.max((sandwich.get(i, j) - simplified.get(i, j)).abs());
            scale = scale.max(sandwich.get(i, j).abs());
        }
    }
    if worst > F::CONTRAST_TOL * scale {
        return Err(ApproxError::RouteDisagreement {
            max_abs_diff: worst.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(sandwich)
}

/// Normal approximation for the ilr coordinates with the plain plug-in
/// mean, `V' ln(a)`.
pub fn approx_ilr_plugin<F: Scalar>(
    model: &ModelSpec<F>,
    v: &ContrastMatrix<F>,
) -> Result<NormalApprox<F>, ApproxError> {
    let mean = ilr(model.expected_probabilities(), v)?;
    let cov = plugin_cov(model, v)?;
    NormalApprox::new(mean.coords().to_vec(), cov)
}

/// Second-order approximation of the log of a positive variable:
/// `ln(mean) - var/(2 mean^2)`.
pub fn log_expectation_correction<F: Scalar>(mean_x: F, var_x: F) -> F {
    mean_x.ln() - var_x / (F::of(2.0) * mean_x * mean_x)
}

/// Normal approximation with the corrected mean
/// `V' (ln(a) - c/2 * lambda .* beta)`; covariance as in the plug-in form.
/// See [`CorrectionMode`] for the fixed-total `c`.
pub fn approx_ilr_corrected_with<F: Scalar>(
    model: &ModelSpec<F>,
    v: &ContrastMatrix<F>,
    mode: CorrectionMode,
) -> Result<NormalApprox<F>, ApproxError> {
    let a = model.expected_probabilities();
    if v.parts() != a.len() {
        return Err(CompositionError::DimensionMismatch {
            context: "contrast matrix and model must have equal part counts",
        }
        .into());
    }
    let scale = match (mode, model.total()) {
        (CorrectionMode::Consistent, _) | (_, TotalCountSpec::Lognormal { .. }) => {
            proportion_scale(model)
        }
        (CorrectionMode::Literal, &TotalCountSpec::Fixed(k)) => {
            proportion_scale(model) / F::of_u64(k)
        }
    };
    let terms = CorrectionTerms::new(a);
    let corrected: Vec<F> = a
        .parts()
        .iter()
        .zip(terms.lambda())
        .map(|(&aj, &lj)| log_expectation_correction(aj, scale * lj))
        .collect();
    let mean = v.matrix().tr_mul_vec(&corrected)?;
    let cov = plugin_cov(model, v)?;
    NormalApprox::new(mean, cov)
}

/// [`approx_ilr_corrected_with`] in the default [`CorrectionMode`].
pub fn approx_ilr_corrected<F: Scalar>(
    model: &ModelSpec<F>,
    v: &ContrastMatrix<F>,
) -> Result<NormalApprox<F>, ApproxError> {
    approx_ilr_corrected_with(model, v, CorrectionMode::Consistent)
}

/// Multinomial baseline: `N(V' ln(p), (1/K) V' diag(1/p) V)`. This is the
/// no-overdispersion reference the other approximations are compared to.
pub fn approx_ilr_multinomial<F: Scalar>(
    p: &Composition<F>,
    k: u64,
    v: &ContrastMatrix<F>,
) -> Result<NormalApprox<F>, ApproxError> {
    let mean = ilr(p, v)?;
    let inv: Vec<F> = p.parts().iter().map(|&x| F::one() / x).collect();
    let cov = quadratic_form(v.matrix(), &inv)?.scaled(F::one() / F::of_u64(k));
    NormalApprox::new(mean.coords().to_vec(), cov)
}

/// Convenience: the plug-in mean as an [`IlrVector`].
pub fn plugin_mean<F: Scalar>(
    model: &ModelSpec<F>,
    v: &ContrastMatrix<F>,
) -> Result<IlrVector<F>, ApproxError> {
    Ok(ilr(model.expected_probabilities(), v)?)
}
