//! Seeded sampling for the four count-generating models.
//!
//! The models share one skeleton: a total count (fixed, or lognormal rounded
//! to an integer), class probabilities (fixed, or Dirichlet-distributed
//! around an expected composition), and a multinomial draw of the counts.
//!
//! Streams come from the ChaCha12 keystream generator (period above 2^128).
//! A grid scenario's substream seed is a SplitMix64 hash of the master seed
//! and the scenario's index, so every scenario draws from its own stream and
//! results do not depend on execution order or thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::composition::Composition;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("count vector needs at least two classes, got {got}")]
    TooFewClasses { got: usize },
    #[error("count vector total must be at least 1")]
    EmptyTotal,
    #[error("{name} must be strictly positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("fixed total count must be at least 1")]
    ZeroTotal,
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: &'static str },
}

/// Nonnegative class counts with their cached total (at least 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self, SamplingError> {
        if counts.len() < 2 {
            return Err(SamplingError::TooFewClasses { got: counts.len() });
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(SamplingError::EmptyTotal);
        }
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of zero cells.
    pub fn zeros(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }
}

/// Dirichlet parameters split into an expected composition and a positive
/// concentration, so the shape parameters are `alpha_s * alpha_tilde_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpec<F> {
    alpha_tilde: Composition<F>,
    alpha_s: F,
}

impl<F: Scalar> DirichletSpec<F> {
    pub fn new(alpha_tilde: Composition<F>, alpha_s: F) -> Result<Self, SamplingError> {
        if !(alpha_s > F::zero()) || !alpha_s.is_finite() {
            return Err(SamplingError::InvalidParameter {
                name: "concentration",
                value: alpha_s.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { alpha_tilde, alpha_s })
    }

    pub fn alpha_tilde(&self) -> &Composition<F> {
        &self.alpha_tilde
    }

    pub fn alpha_s(&self) -> F {
        self.alpha_s
    }

    pub fn classes(&self) -> usize {
        self.alpha_tilde.len()
    }

    /// Shape parameter of class `j`.
    pub fn shape(&self, j: usize) -> F {
        self.alpha_s * self.alpha_tilde.parts()[j]
    }

    /// True when every shape parameter exceeds one, i.e. the density has a
    /// single interior mode instead of mass piling up at the simplex faces.
    pub fn unimodal(&self) -> bool {
        self.alpha_tilde
            .parts()
            .iter()
            .fold(F::infinity(), |m, &a| m.min(a))
            * self.alpha_s
            > F::one()
    }
}

/// Distribution of the total count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TotalCountSpec<F> {
    /// Every draw uses exactly this total (at least 1).
    Fixed(u64),
    /// Totals are `round(exp(Normal(mu, sigma_sq)))`, clamped to at least 1.
    Lognormal { mu: F, sigma_sq: F },
}

impl<F: Scalar> TotalCountSpec<F> {
    fn validate(&self) -> Result<(), SamplingError> {
        match *self {
            TotalCountSpec::Fixed(k) if k == 0 => Err(SamplingError::ZeroTotal),
            TotalCountSpec::Fixed(_) => Ok(()),
            TotalCountSpec::Lognormal { mu, sigma_sq } => {
                if !mu.is_finite() {
                    return Err(SamplingError::InvalidParameter {
                        name: "log-scale location",
                        value: mu.to_f64().unwrap_or(f64::NAN),
                    });
                }
                if !(sigma_sq > F::zero()) || !sigma_sq.is_finite() {
                    return Err(SamplingError::InvalidParameter {
                        name: "log-scale variance",
                        value: sigma_sq.to_f64().unwrap_or(f64::NAN),
                    });
                }
                Ok(())
            }
        }
    }
}

/// Class-probability layer: fixed, or Dirichlet around an expectation.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassProbabilities<F> {
    Fixed(Composition<F>),
    Dirichlet(DirichletSpec<F>),
}

/// Count-generating model codes used in labels and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dgd {
    #[serde(rename = "mn")]
    Multinomial,
    #[serde(rename = "dir_mn")]
    DirichletMultinomial,
    #[serde(rename = "ln_mn")]
    LognormalMultinomial,
    #[serde(rename = "ln_dir_mn")]
    LognormalDirichletMultinomial,
}

impl Dgd {
    pub fn code(self) -> &'static str {
        match self {
            Dgd::Multinomial => "mn",
            Dgd::DirichletMultinomial => "dir_mn",
            Dgd::LognormalMultinomial => "ln_mn",
            Dgd::LognormalDirichletMultinomial => "ln_dir_mn",
        }
    }

    pub fn has_dirichlet_layer(self) -> bool {
        matches!(self, Dgd::DirichletMultinomial | Dgd::LognormalDirichletMultinomial)
    }

    pub fn has_lognormal_total(self) -> bool {
        matches!(self, Dgd::LognormalMultinomial | Dgd::LognormalDirichletMultinomial)
    }
}

impl std::fmt::Display for Dgd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// A complete count-generating model. Any combination of probability and
/// total layers is meaningful; the four combinations are the four model
/// codes reported by [`ModelSpec::dgd`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<F> {
    probabilities: ClassProbabilities<F>,
    total: TotalCountSpec<F>,
}

impl<F: Scalar> ModelSpec<F> {
    pub fn new(
        probabilities: ClassProbabilities<F>,
        total: TotalCountSpec<F>,
    ) -> Result<Self, SamplingError> {
        total.validate()?;
        Ok(Self { probabilities, total })
    }

    pub fn multinomial(p: Composition<F>, k: u64) -> Result<Self, SamplingError> {
        Self::new(ClassProbabilities::Fixed(p), TotalCountSpec::Fixed(k))
    }

    pub fn dirichlet_multinomial(dir: DirichletSpec<F>, k: u64) -> Result<Self, SamplingError> {
        Self::new(ClassProbabilities::Dirichlet(dir), TotalCountSpec::Fixed(k))
    }

    pub fn lognormal_multinomial(p: Composition<F>, mu: F, sigma_sq: F) -> Result<Self, SamplingError> {
        Self::new(ClassProbabilities::Fixed(p), TotalCountSpec::Lognormal { mu, sigma_sq })
    }

    pub fn lognormal_dirichlet_multinomial(
        dir: DirichletSpec<F>,
        mu: F,
        sigma_sq: F,
    ) -> Result<Self, SamplingError> {
        Self::new(ClassProbabilities::Dirichlet(dir), TotalCountSpec::Lognormal { mu, sigma_sq })
    }

    pub fn probabilities(&self) -> &ClassProbabilities<F> {
        &self.probabilities
    }

    pub fn total(&self) -> &TotalCountSpec<F> {
        &self.total
    }

    pub fn dgd(&self) -> Dgd {
        match (&self.probabilities, &self.total) {
            (ClassProbabilities::Fixed(_), TotalCountSpec::Fixed(_)) => Dgd::Multinomial,
            (ClassProbabilities::Dirichlet(_), TotalCountSpec::Fixed(_)) => {
                Dgd::DirichletMultinomial
            }
            (ClassProbabilities::Fixed(_), TotalCountSpec::Lognormal { .. }) => {
                Dgd::LognormalMultinomial
            }
            (ClassProbabilities::Dirichlet(_), TotalCountSpec::Lognormal { .. }) => {
                Dgd::LognormalDirichletMultinomial
            }
        }
    }

    /// Expected class probabilities: the fixed composition, or the
    /// Dirichlet's expectation.
    pub fn expected_probabilities(&self) -> &Composition<F> {
        match &self.probabilities {
            ClassProbabilities::Fixed(p) => p,
            ClassProbabilities::Dirichlet(d) => d.alpha_tilde(),
        }
    }

    pub fn classes(&self) -> usize {
        self.expected_probabilities().len()
    }

    /// Concentration of the Dirichlet layer, if the model has one.
    pub fn alpha_s(&self) -> Option<F> {
        match &self.probabilities {
            ClassProbabilities::Fixed(_) => None,
            ClassProbabilities::Dirichlet(d) => Some(d.alpha_s()),
        }
    }
}

const SPLITMIX_GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream seed for a grid scenario: the `(scenario_index + 1)`-th output
/// of a SplitMix64 sequence seeded with the master seed.
pub fn scenario_seed(master_seed: u64, scenario_index: u64) -> u64 {
    splitmix_mix(
        master_seed.wrapping_add(SPLITMIX_GOLDEN.wrapping_mul(scenario_index.wrapping_add(1))),
    )
}

/// Seeded stream for one scenario; see [`scenario_seed`].
pub fn scenario_rng(master_seed: u64, scenario_index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(scenario_seed(master_seed, scenario_index))
}

/// Draws `Gamma(shape, 1)`. Shapes below one go through the boosting
/// identity `Gamma(a) = Gamma(a+1) * U^(1/a)`, whose product can underflow
/// to zero for tiny shapes; such draws are rejected and redrawn so the
/// result is strictly positive.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64, SamplingError> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(SamplingError::InvalidParameter { name: "gamma shape", value: shape });
    }
    let dist = Gamma::new(shape, 1.0)
        .map_err(|_| SamplingError::InvalidParameter { name: "gamma shape", value: shape })?;
    loop {
        let draw = dist.sample(rng);
        if draw > 0.0 {
            return Ok(draw);
        }
    }
}

/// Draws a Dirichlet composition as normalized gammas with shapes
/// `alpha_s * alpha_tilde_j`. If normalization underflows any part to zero
/// (possible for shapes far below one), the whole vector is redrawn.
pub fn sample_dirichlet<R: Rng + ?Sized>(
    spec: &DirichletSpec<f64>,
    rng: &mut R,
) -> Result<Composition<f64>, SamplingError> {
    let j = spec.classes();
    let mut gammas = vec![0.0f64; j];
    loop {
        for (idx, g) in gammas.iter_mut().enumerate() {
            *g = sample_gamma(spec.shape(idx), rng)?;
        }
        let sum: f64 = gammas.iter().sum();
        if let Ok(p) = Composition::new(gammas.iter().map(|g| g / sum).collect()) {
            return Ok(p);
        }
    }
}

/// Draws multinomial counts by peeling classes off with conditional
/// binomials, so the cost is linear in the number of classes and does not
/// depend on the total.
pub fn sample_multinomial<R: Rng + ?Sized>(
    total: u64,
    p: &Composition<f64>,
    rng: &mut R,
) -> Result<CountVector, SamplingError> {
    if total == 0 {
        return Err(SamplingError::ZeroTotal);
    }
    let j = p.len();
    let mut counts = vec![0u64; j];
    let mut remaining = total;
    let mut rest = 1.0f64;
    for idx in 0..j - 1 {
        if remaining == 0 {
            break;
        }
        let prob = if rest > 0.0 { (p.parts()[idx] / rest).min(1.0) } else { 1.0 };
        let draw = if prob >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, prob)
                .expect("conditional probability clamped to [0, 1]")
                .sample(rng)
        };
        counts[idx] = draw;
        remaining -= draw;
        rest -= p.parts()[idx];
    }
    counts[j - 1] = remaining;
    CountVector::new(counts)
}

/// Draws a total count.
pub fn sample_total<R: Rng + ?Sized>(
    spec: &TotalCountSpec<f64>,
    rng: &mut R,
) -> Result<u64, SamplingError> {
    spec.validate()?;
    match *spec {
        TotalCountSpec::Fixed(k) => Ok(k),
        TotalCountSpec::Lognormal { mu, sigma_sq } => {
            let z: f64 = StandardNormal.sample(rng);
            let t = (mu + sigma_sq.sqrt() * z).exp().round();
            // Saturating cast; the clamp keeps the multinomial layer fed.
            Ok((t.max(1.0)) as u64)
        }
    }
}

/// Draws one count vector from the full model: total, then probabilities,
/// then the multinomial layer.
pub fn sample_counts<R: Rng + ?Sized>(
    model: &ModelSpec<f64>,
    rng: &mut R,
) -> Result<CountVector, SamplingError> {
    let total = sample_total(model.total(), rng)?;
    match model.probabilities() {
        ClassProbabilities::Fixed(p) => sample_multinomial(total, p, rng),
        ClassProbabilities::Dirichlet(d) => {
            let p = sample_dirichlet(d, rng)?;
            sample_multinomial(total, &p, rng)
        }
    }
}

/// Log-probability of counts under the Dirichlet-multinomial with the given
/// parameters, via log-gamma throughout so large totals stay finite.
pub fn dm_log_pmf(x: &CountVector, spec: &DirichletSpec<f64>) -> Result<f64, SamplingError> {
    if x.len() != spec.classes() {
        return Err(SamplingError::DimensionMismatch {
            context: "count vector and Dirichlet parameters must have equal class counts",
        });
    }
    let k = x.total() as f64;
    let alpha_s = spec.alpha_s();
    let mut lp = ln_gamma(k + 1.0) + ln_gamma(alpha_s) - ln_gamma(alpha_s + k);
    for (idx, &c) in x.counts().iter().enumerate() {
        let a = spec.shape(idx);
        lp += ln_gamma(a + c as f64) - ln_gamma(a) - ln_gamma(c as f64 + 1.0);
    }
    Ok(lp)
}

/// Log-probability of counts under the multinomial with fixed probabilities.
pub fn multinomial_log_pmf(x: &CountVector, p: &Composition<f64>) -> Result<f64, SamplingError> {
    if x.len() != p.len() {
        return Err(SamplingError::DimensionMismatch {
            context: "count vector and probabilities must have equal class counts",
        });
    }
    let k = x.total() as f64;
    let mut lp = ln_gamma(k + 1.0);
    for (&c, &pj) in x.counts().iter().zip(p.parts()) {
        lp -= ln_gamma(c as f64 + 1.0);
        if c > 0 {
            lp += c as f64 * pj.ln();
        }
    }
    Ok(lp)
}
