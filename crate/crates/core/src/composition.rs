//! Compositions, sequential binary partitions, and the isometric log-ratio
//! transform.
//!
//! A composition is a vector of strictly positive parts on the unit simplex.
//! A sequential binary partition (SBP) recursively splits the parts into
//! sign groups; its contrast matrix maps log-parts to ilr coordinates. Two
//! independent routes to the coordinates are provided: the matrix product
//! `V' ln(p)` and the per-balance geometric-mean form. They agree to
//! rounding error and are cross-checked in the tests.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::sampling::CountVector;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CompositionError {
    #[error("composition needs at least two parts, got {got}")]
    TooFewParts { got: usize },
    #[error("part {index} is {value}; parts must be strictly positive and finite")]
    NonPositivePart { index: usize, value: f64 },
    #[error("parts sum to {sum}, farther than {tol} from one")]
    NotUnitSum { sum: f64, tol: f64 },
    #[error("counts contain zeros but the zero replacement is {got}; it must be positive")]
    ZeroNeedsReplacement { got: f64 },
    #[error("invalid sequential binary partition: {0}")]
    InvalidSbp(#[from] SbpViolation),
    #[error("sign matrix entries must be -1, 0, or +1; entry ({part},{column}) is {value}")]
    BadSign { part: usize, column: usize, value: i8 },
    #[error("sign matrix shape must be J rows by J-1 columns with J >= 2 (J = {parts})")]
    BadShape { parts: usize },
    #[error("columns {a} and {b} have inner product {value}, beyond the orthonormality tolerance")]
    NotOrthonormal { a: usize, b: usize, value: f64 },
    #[error("column {column} sums to {value}, beyond the zero-sum tolerance")]
    ColumnSumNotZero { column: usize, value: f64 },
    #[error("coordinates too extreme: a reconstructed part rounded to zero")]
    ExtremeCoordinates,
    #[error("non-finite coordinate at index {index}")]
    NonFiniteCoordinate { index: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: &'static str },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// First structural defect found in a would-be sequential binary partition.
/// Columns are reported 1-based, matching how balances are numbered.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SbpViolation {
    #[error("column {column} has no +1 entries")]
    MissingPlus { column: usize },
    #[error("column {column} has no -1 entries")]
    MissingMinus { column: usize },
    #[error("column 1 must involve every part, but part {part} is zero")]
    FirstColumnHasZero { part: usize },
    #[error("column {column} does not split one group left by the earlier columns")]
    NotSequential { column: usize },
}

/// Strictly positive parts summing to one within [`Scalar::UNIT_SUM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Composition<F> {
    parts: Vec<F>,
}

impl<F: Scalar> Composition<F> {
    pub fn new(parts: Vec<F>) -> Result<Self, CompositionError> {
        if parts.len() < 2 {
            return Err(CompositionError::TooFewParts { got: parts.len() });
        }
        for (index, &v) in parts.iter().enumerate() {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(CompositionError::NonPositivePart {
                    index,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let sum: F = parts.iter().copied().sum();
        if (sum - F::one()).abs() > F::UNIT_SUM_TOL {
            return Err(CompositionError::NotUnitSum {
                sum: sum.to_f64().unwrap_or(f64::NAN),
                tol: F::UNIT_SUM_TOL.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { parts })
    }

    /// Scales a strictly positive vector by its sum so it lands on the
    /// simplex.
    pub fn from_unnormalized(raw: Vec<F>) -> Result<Self, CompositionError> {
        if raw.len() < 2 {
            return Err(CompositionError::TooFewParts { got: raw.len() });
        }
        for (index, &v) in raw.iter().enumerate() {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(CompositionError::NonPositivePart {
                    index,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let sum: F = raw.iter().copied().sum();
        Self::new(raw.into_iter().map(|v| v / sum).collect())
    }

    pub fn parts(&self) -> &[F] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ln_parts(&self) -> Vec<F> {
        self.parts.iter().map(|v| v.ln()).collect()
    }
}

/// How [`close_with_policy`] turns replaced counts into proportions.
///
/// The divisor only matters at the proportion level: ilr coordinates are
/// scale-invariant because contrast columns sum to zero, so both policies
/// produce identical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Divide by the post-replacement total; proportions sum to one.
    #[default]
    Renormalize,
    /// Divide by the original count total; proportions exceed one by the
    /// replaced mass when zeros are present.
    DivideByOriginalTotal,
}

/// Zero-replaced proportions of a count vector.
#[derive(Debug, Clone)]
pub struct ClosedCounts<F> {
    /// The point on the open simplex (always renormalized).
    pub composition: Composition<F>,
    /// Proportions under the chosen policy; equal to the composition's parts
    /// except under [`ZeroPolicy::DivideByOriginalTotal`] with zeros present.
    pub scaled_parts: Vec<F>,
    /// Number of zero cells that were replaced.
    pub replaced: usize,
}

/// Replaces zero counts with `zero_replacement` and divides by the
/// post-replacement total, landing on the open simplex.
pub fn close<F: Scalar>(
    x: &CountVector,
    zero_replacement: F,
) -> Result<Composition<F>, CompositionError> {
    Ok(close_with_policy(x, zero_replacement, ZeroPolicy::Renormalize)?.composition)
}

/// [`close`] with an explicit proportion-divisor policy; see [`ZeroPolicy`].
pub fn close_with_policy<F: Scalar>(
    x: &CountVector,
    zero_replacement: F,
    policy: ZeroPolicy,
) -> Result<ClosedCounts<F>, CompositionError> {
    let mut replaced = 0usize;
    let mut parts: Vec<F> = Vec::with_capacity(x.len());
    for &c in x.counts() {
        if c == 0 {
            if !(zero_replacement > F::zero()) {
                return Err(CompositionError::ZeroNeedsReplacement {
                    got: zero_replacement.to_f64().unwrap_or(f64::NAN),
                });
            }
            replaced += 1;
            parts.push(zero_replacement);
        } else {
            parts.push(F::of_u64(c));
        }
    }
    let adjusted_total: F = parts.iter().copied().sum();
    let composition = Composition::new(parts.iter().map(|&v| v / adjusted_total).collect())?;
    let scaled_parts = match policy {
        ZeroPolicy::Renormalize => composition.parts().to_vec(),
        ZeroPolicy::DivideByOriginalTotal => {
            let total = F::of_u64(x.total());
            parts.iter().map(|&v| v / total).collect()
        }
    };
    Ok(ClosedCounts { composition, scaled_parts, replaced })
}

/// Sign code of a sequential binary partition: one row per part, one column
/// per balance, entries in `{-1, 0, +1}`.
///
/// Construction checks shape and entry range only; the structural rules are
/// the business of [`validate_sbp`], so diagnostics stay available for sign
/// matrices built by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbpMatrix {
    parts: usize,
    data: Vec<i8>,
}

impl SbpMatrix {
    pub fn from_signs(parts: usize, data: Vec<i8>) -> Result<Self, CompositionError> {
        if parts < 2 {
            return Err(CompositionError::TooFewParts { got: parts });
        }
        if data.len() != parts * (parts - 1) {
            return Err(CompositionError::BadShape { parts });
        }
        for (pos, &v) in data.iter().enumerate() {
            if !(-1..=1).contains(&v) {
                return Err(CompositionError::BadSign {
                    part: pos / (parts - 1),
                    column: pos % (parts - 1),
                    value: v,
                });
            }
        }
        Ok(Self { parts, data })
    }

    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Self, CompositionError> {
        let parts = rows.len();
        if parts < 2 {
            return Err(CompositionError::TooFewParts { got: parts });
        }
        for row in &rows {
            if row.len() != parts - 1 {
                return Err(CompositionError::BadShape { parts });
            }
        }
        Self::from_signs(parts, rows.into_iter().flatten().collect())
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn balances(&self) -> usize {
        self.parts - 1
    }

    pub fn get(&self, part: usize, balance: usize) -> i8 {
        assert!(part < self.parts && balance < self.parts - 1, "sbp index out of range");
        self.data[part * (self.parts - 1) + balance]
    }

    /// Parts carrying +1 and -1 in the given balance column.
    fn split(&self, balance: usize) -> (Vec<usize>, Vec<usize>) {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for part in 0..self.parts {
            match self.get(part, balance) {
                1 => plus.push(part),
                -1 => minus.push(part),
                _ => {}
            }
        }
        (plus, minus)
    }

    /// Uniform-ish random sequential binary partition built by recursively
    /// splitting groups with fair coin flips; meant for property tests.
    pub fn random<R: Rng + ?Sized>(parts: usize, rng: &mut R) -> Result<Self, CompositionError> {
        if parts < 2 {
            return Err(CompositionError::TooFewParts { got: parts });
        }
        let mut data = vec![0i8; parts * (parts - 1)];
        let mut queue: Vec<Vec<usize>> = vec![(0..parts).collect()];
        let mut column = 0;
        while let Some(group) = queue.pop() {
            if group.len() < 2 {
                continue;
            }
            // Random nonempty proper subset of the group gets +1.
            let mut plus_mask = vec![false; group.len()];
            loop {
                let mut any = false;
                let mut all = true;
                for m in plus_mask.iter_mut() {
                    *m = rng.gen::<bool>();
                    any |= *m;
                    all &= *m;
                }
                if any && !all {
                    break;
                }
            }
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            for (&part, &is_plus) in group.iter().zip(&plus_mask) {
                data[part * (parts - 1) + column] = if is_plus { 1 } else { -1 };
                if is_plus {
                    plus.push(part);
                } else {
                    minus.push(part);
                }
            }
            queue.push(plus);
            queue.push(minus);
            column += 1;
        }
        debug_assert_eq!(column, parts - 1);
        Self::from_signs(parts, data)
    }
}

/// The pivotal partition: balance `k` isolates part `k` against all later
/// parts, so the sign pattern is +1 on the diagonal, -1 below, 0 above.
pub fn pivotal_sbp(parts: usize) -> Result<SbpMatrix, CompositionError> {
    if parts < 2 {
        return Err(CompositionError::TooFewParts { got: parts });
    }
    let mut data = vec![0i8; parts * (parts - 1)];
    for balance in 0..parts - 1 {
        data[balance * (parts - 1) + balance] = 1;
        for part in balance + 1..parts {
            data[part * (parts - 1) + balance] = -1;
        }
    }
    SbpMatrix::from_signs(parts, data)
}

/// Checks the sequential-partition rules, reporting the first offending
/// column (1-based):
///
/// * every column carries both signs;
/// * column 1 involves every part;
/// * each later column splits exactly one group produced by the earlier
///   columns (its support equals one unsplit group).
pub fn validate_sbp(sbp: &SbpMatrix) -> Result<(), SbpViolation> {
    let mut groups: Vec<Vec<usize>> = vec![(0..sbp.parts).collect()];
    for balance in 0..sbp.balances() {
        let column = balance + 1;
        let (plus, minus) = sbp.split(balance);
        if plus.is_empty() {
            return Err(SbpViolation::MissingPlus { column });
        }
        if minus.is_empty() {
            return Err(SbpViolation::MissingMinus { column });
        }
        let mut support: Vec<usize> = plus.iter().chain(minus.iter()).copied().collect();
        support.sort_unstable();
        if balance == 0 {
            if support.len() != sbp.parts {
                let part = (0..sbp.parts).find(|p| sbp.get(*p, 0) == 0).unwrap_or(0);
                return Err(SbpViolation::FirstColumnHasZero { part: part + 1 });
            }
        }
        let slot = groups.iter().position(|g| *g == support);
        match slot {
            Some(i) => {
                groups.swap_remove(i);
                groups.push(plus);
                groups.push(minus);
            }
            None => return Err(SbpViolation::NotSequential { column }),
        }
    }
    Ok(())
}

/// Orthonormal log-contrast basis: one column per balance, columns of unit
/// norm, pairwise orthogonal, and summing to zero within
/// [`Scalar::CONTRAST_TOL`]. Built from an SBP via [`contrast_matrix`] or
/// directly from any matrix satisfying the same checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix<F> {
    m: Matrix<F>,
}

impl<F: Scalar> ContrastMatrix<F> {
    /// Accepts any parts-by-balances matrix with orthonormal, zero-sum
    /// columns; this admits bases that do not come from a partition.
    pub fn new(m: Matrix<F>) -> Result<Self, CompositionError> {
        if m.rows() < 2 || m.cols() != m.rows() - 1 {
            return Err(CompositionError::BadShape { parts: m.rows() });
        }
        for a in 0..m.cols() {
            let sum: F = (0..m.rows()).map(|i| m.get(i, a)).sum();
            if sum.abs() > F::CONTRAST_TOL {
                return Err(CompositionError::ColumnSumNotZero {
                    column: a + 1,
                    value: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
            for b in a..m.cols() {
                let dot: F = (0..m.rows()).map(|i| m.get(i, a) * m.get(i, b)).sum();
                let target = if a == b { F::one() } else { F::zero() };
                if (dot - target).abs() > F::CONTRAST_TOL {
                    return Err(CompositionError::NotOrthonormal {
                        a: a + 1,
                        b: b + 1,
                        value: dot.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(Self { m })
    }

    pub fn parts(&self) -> usize {
        self.m.rows()
    }

    pub fn coords(&self) -> usize {
        self.m.cols()
    }

    pub fn get(&self, part: usize, coord: usize) -> F {
        self.m.get(part, coord)
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.m
    }
}

/// Builds the contrast matrix of a valid SBP. Where column `k` carries
/// `n_plus` positive and `n_minus` negative parts, the entries are
/// `+sqrt(n_minus / (n_plus (n_plus + n_minus)))` on the positive side and
/// `-sqrt(n_plus / (n_minus (n_plus + n_minus)))` on the negative side.
pub fn contrast_matrix<F: Scalar>(sbp: &SbpMatrix) -> Result<ContrastMatrix<F>, CompositionError> {
    validate_sbp(sbp)?;
    let mut m = Matrix::zeros(sbp.parts(), sbp.balances())?;
    for balance in 0..sbp.balances() {
        let (plus, minus) = sbp.split(balance);
        let np = F::of_u64(plus.len() as u64);
        let nm = F::of_u64(minus.len() as u64);
        let plus_entry = (nm / (np * (np + nm))).sqrt();
        let minus_entry = -(np / (nm * (np + nm))).sqrt();
        for part in plus {
            m.set(part, balance, plus_entry);
        }
        for part in minus {
            m.set(part, balance, minus_entry);
        }
    }
    ContrastMatrix::new(m)
}

/// Isometric log-ratio coordinates; finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IlrVector<F> {
    coords: Vec<F>,
}

impl<F: Scalar> IlrVector<F> {
    pub fn new(coords: Vec<F>) -> Result<Self, CompositionError> {
        for (index, v) in coords.iter().enumerate() {
            if !v.is_finite() {
                return Err(CompositionError::NonFiniteCoordinate { index });
            }
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[F] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Matrix form of the transform: `V' ln(p)`.
pub fn ilr<F: Scalar>(
    p: &Composition<F>,
    v: &ContrastMatrix<F>,
) -> Result<IlrVector<F>, CompositionError> {
    if p.len() != v.parts() {
        return Err(CompositionError::DimensionMismatch {
            context: "composition length must equal the contrast matrix's part count",
        });
    }
    IlrVector::new(v.matrix().tr_mul_vec(&p.ln_parts())?)
}

/// Balance form of the transform, computed without the contrast matrix:
/// coordinate `k` is `sqrt(n+ n- / (n+ + n-))` times the log of the ratio of
/// geometric means of the two sign groups.
pub fn ilr_balances<F: Scalar>(
    p: &Composition<F>,
    sbp: &SbpMatrix,
) -> Result<IlrVector<F>, CompositionError> {
    if p.len() != sbp.parts() {
        return Err(CompositionError::DimensionMismatch {
            context: "composition length must equal the partition's part count",
        });
    }
    validate_sbp(sbp)?;
    let ln = p.ln_parts();
    let mut coords = Vec::with_capacity(sbp.balances());
    for balance in 0..sbp.balances() {
        let (plus, minus) = sbp.split(balance);
        let np = F::of_u64(plus.len() as u64);
        let nm = F::of_u64(minus.len() as u64);
        let mean_plus = plus.iter().map(|&j| ln[j]).sum::<F>() / np;
        let mean_minus = minus.iter().map(|&j| ln[j]).sum::<F>() / nm;
        let coef = (np * nm / (np + nm)).sqrt();
        coords.push(coef * (mean_plus - mean_minus));
    }
    IlrVector::new(coords)
}

/// Inverse transform: the closure of `exp(V m)`. The largest exponent is
/// shifted out before exponentiating, so the only failure mode is a part so
/// extreme it rounds to zero, which is reported rather than propagated as a
/// denormal.
pub fn inverse_ilr<F: Scalar>(
    m: &IlrVector<F>,
    v: &ContrastMatrix<F>,
) -> Result<Composition<F>, CompositionError> {
    if m.len() != v.coords() {
        return Err(CompositionError::DimensionMismatch {
            context: "coordinate length must equal the contrast matrix's balance count",
        });
    }
    let y = v.matrix().mul_vec(m.coords())?;
    let mut shift = y[0];
    for &t in &y[1..] {
        if t > shift {
            shift = t;
        }
    }
    if !shift.is_finite() {
        return Err(CompositionError::ExtremeCoordinates);
    }
    let raw: Vec<F> = y.iter().map(|&t| (t - shift).exp()).collect();
    if raw.iter().any(|&t| !(t > F::zero())) {
        return Err(CompositionError::ExtremeCoordinates);
    }
    let sum: F = raw.iter().copied().sum();
    let parts: Vec<F> = raw.iter().map(|&t| t / sum).collect();
    if parts.iter().any(|&t| !(t > F::zero())) {
        return Err(CompositionError::ExtremeCoordinates);
    }
    Composition::new(parts)
}
