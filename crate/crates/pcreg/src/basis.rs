//! Total-order multivariate orthonormal polynomial bases.
//!
//! A basis is a family (Hermite or Legendre), an input dimension `d`, and a
//! total order `p`; the member functions are tensor products of univariate
//! orthonormal polynomials over all multi-indices `k` with `||k||_1 <= p`.
//! Hermite bases are orthonormal against the d-variate standard Gaussian
//! density, Legendre bases against the uniform density on `[-1, 1]^d`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Polynomial family of a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Probabilists' Hermite polynomials, normalized by `sqrt(k!)`;
    /// orthonormal against the standard Gaussian density.
    Hermite,
    /// Legendre polynomials scaled by `sqrt(2k+1)`; orthonormal against the
    /// uniform density on `[-1, 1]`.
    Legendre,
}

impl Family {
    /// Lowercase name used in CSV output and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            Family::Hermite => "hermite",
            Family::Legendre => "legendre",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of multi-indices of dimension `d` and total order at most `p`,
/// which is binomial(p+d, d).
pub fn cardinality(d: usize, p: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let overflow = || Error::BasisSizeOverflow { d, p };
    let mut acc: u128 = 1;
    for i in 1..=d {
        // Running product of binomial(p+i, i); the stepwise division is exact.
        let num = (p as u128).checked_add(i as u128).ok_or_else(overflow)?;
        acc = acc.checked_mul(num).ok_or_else(overflow)? / i as u128;
    }
    usize::try_from(acc).map_err(|_| overflow())
}

/// Ordered exhaustive set of multi-indices with `||k||_1 <= p`.
///
/// The ordering is graded: total degree ascending, ties broken by ascending
/// lexicographic comparison of the tuples. The all-zeros index is therefore
/// always first, so the constant basis function has index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    d: usize,
    p: usize,
    flat: Vec<u32>,
}

impl MultiIndexSet {
    /// Input dimension.
    pub fn dimension(&self) -> usize {
        self.d
    }

    /// Total order.
    pub fn order(&self) -> usize {
        self.p
    }

    /// Number of multi-indices (the basis size P).
    pub fn len(&self) -> usize {
        self.flat.len() / self.d
    }

    /// True only for impossible configurations; kept for API completeness.
    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    /// The k-th multi-index as a slice of length `d`.
    pub fn tuple(&self, k: usize) -> &[u32] {
        &self.flat[k * self.d..(k + 1) * self.d]
    }

    /// Iterator over all multi-indices in basis order.
    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.flat.chunks_exact(self.d)
    }
}

/// Builds the exhaustive graded-lexicographic multi-index set for dimension
/// `d` and total order `p`.
pub fn total_order_indices(d: usize, p: usize) -> Result<MultiIndexSet> {
    let count = cardinality(d, p)?;
    let entries = count
        .checked_mul(d)
        .ok_or(Error::BasisSizeOverflow { d, p })?;
    let mut flat = Vec::with_capacity(entries);
    let mut tuple = vec![0u32; d];
    for total in 0..=p {
        push_with_total(&mut flat, &mut tuple, 0, total as u32, d);
    }
    debug_assert_eq!(flat.len(), entries);
    Ok(MultiIndexSet { d, p, flat })
}

fn push_with_total(flat: &mut Vec<u32>, tuple: &mut [u32], pos: usize, remaining: u32, d: usize) {
    if pos == d - 1 {
        tuple[pos] = remaining;
        flat.extend_from_slice(tuple);
        return;
    }
    for v in 0..=remaining {
        tuple[pos] = v;
        push_with_total(flat, tuple, pos + 1, remaining - v, d);
    }
}

/// Three-term recurrence coefficients for the normalized polynomials:
/// `psi_{k+1} = a[k] * x * psi_k - b[k] * psi_{k-1}` for `k = 0..k_max-1`,
/// with `b[0]` unused.
///
/// The coefficients are computed in `f64` and converted, so the `f32`
/// instantiation carries full-precision constants.
fn recurrence_coefficients<T: Real>(family: Family, k_max: usize) -> (Vec<T>, Vec<T>) {
    let mut a = Vec::with_capacity(k_max);
    let mut b = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let kf = k as f64;
        let (ak, bk) = match family {
            Family::Hermite => {
                // psi_{k+1} = (x psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1)
                let s = 1.0 / (kf + 1.0).sqrt();
                (s, kf.sqrt() * s)
            }
            Family::Legendre => {
                // psi_k = sqrt(2k+1) P_k folded into the monic-style recurrence
                // (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
                let ak = ((2.0 * kf + 1.0) * (2.0 * kf + 3.0)).sqrt() / (kf + 1.0);
                let bk = if k == 0 {
                    0.0
                } else {
                    kf / (kf + 1.0) * ((2.0 * kf + 3.0) / (2.0 * kf - 1.0)).sqrt()
                };
                (ak, bk)
            }
        };
        a.push(T::from_f64_lossy(ak));
        b.push(T::from_f64_lossy(bk));
    }
    (a, b)
}

fn fill_univariate<T: Real>(a: &[T], b: &[T], x: T, out: &mut [T]) {
    out[0] = T::one();
    if out.len() == 1 {
        return;
    }
    out[1] = a[0] * x;
    for k in 1..out.len() - 1 {
        out[k + 1] = a[k] * x * out[k] - b[k] * out[k - 1];
    }
}

/// Values `psi_0(x) .. psi_kmax(x)` of the univariate orthonormal family,
/// evaluated by the normalized three-term recurrence.
pub fn eval_univariate<T: Real>(family: Family, k_max: usize, x: T) -> Result<Vec<T>> {
    if !x.is_finite() {
        return Err(Error::NonFinite {
            name: "x",
            value: x.to_f64_lossy(),
        });
    }
    let (a, b) = recurrence_coefficients(family, k_max);
    let mut out = vec![T::zero(); k_max + 1];
    fill_univariate(&a, &b, x, &mut out);
    Ok(out)
}

/// Multivariate orthonormal polynomial basis over a total-order index set.
#[derive(Debug, Clone)]
pub struct PcBasis<T> {
    family: Family,
    index_set: MultiIndexSet,
    rec_a: Vec<T>,
    rec_b: Vec<T>,
}

impl<T: Real> PcBasis<T> {
    /// Builds the basis for the given family, dimension, and total order.
    pub fn new(family: Family, d: usize, p: usize) -> Result<Self> {
        let index_set = total_order_indices(d, p)?;
        let (rec_a, rec_b) = recurrence_coefficients(family, p);
        Ok(PcBasis {
            family,
            index_set,
            rec_a,
            rec_b,
        })
    }

    /// Polynomial family.
    pub fn family(&self) -> Family {
        self.family
    }

    /// Input dimension `d`.
    pub fn dimension(&self) -> usize {
        self.index_set.d
    }

    /// Total order `p`.
    pub fn order(&self) -> usize {
        self.index_set.p
    }

    /// Basis size `P = binomial(p+d, d)`.
    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    /// Never true; kept so `len` follows the usual container conventions.
    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    /// The multi-index set in basis order.
    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    /// Validates a point against the basis domain: correct length, finite
    /// coordinates, and (for Legendre) coordinates inside `[-1, 1]`.
    pub fn validate_point(&self, point: &[T]) -> Result<()> {
        if point.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: point.len(),
            });
        }
        for (i, &x) in point.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    name: "coordinate",
                    value: x.to_f64_lossy(),
                });
            }
            if self.family == Family::Legendre && (x < -T::one() || x > T::one()) {
                return Err(Error::OutsideDomain {
                    index: i,
                    value: x.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// All P basis functions evaluated at one point, in basis order.
    pub fn eval_basis_row(&self, point: &[T]) -> Result<Vec<T>> {
        let mut evaluator = RowEvaluator::new(self);
        let mut out = vec![T::zero(); self.len()];
        evaluator.row_into(point, &mut out)?;
        Ok(out)
    }

    /// The envelope `B(point) = sqrt(sum_k psi_k(point)^2)`. Always at least
    /// 1 because the constant function contributes.
    pub fn envelope(&self, point: &[T]) -> Result<T> {
        let mut evaluator = RowEvaluator::new(self);
        Ok(evaluator.envelope_squared(point)?.sqrt())
    }

    fn univariate_tables(&self, point: &[T], tables: &mut [T]) {
        let width = self.order() + 1;
        for (j, &x) in point.iter().enumerate() {
            fill_univariate(
                &self.rec_a,
                &self.rec_b,
                x,
                &mut tables[j * width..(j + 1) * width],
            );
        }
    }
}

/// Reusable evaluator holding the univariate scratch table, for hot loops
/// that evaluate many rows of the same basis.
#[derive(Debug)]
pub struct RowEvaluator<'a, T> {
    basis: &'a PcBasis<T>,
    tables: Vec<T>,
}

impl<'a, T: Real> RowEvaluator<'a, T> {
    /// New evaluator bound to one basis.
    pub fn new(basis: &'a PcBasis<T>) -> Self {
        let tables = vec![T::zero(); basis.dimension() * (basis.order() + 1)];
        RowEvaluator { basis, tables }
    }

    /// Writes the full basis row at `point` into `out` (length P).
    pub fn row_into(&mut self, point: &[T], out: &mut [T]) -> Result<()> {
        self.basis.validate_point(point)?;
        if out.len() != self.basis.len() {
            return Err(Error::LengthMismatch {
                name: "output row",
                expected: self.basis.len(),
                got: out.len(),
            });
        }
        self.basis.univariate_tables(point, &mut self.tables);
        let width = self.basis.order() + 1;
        for (slot, index) in out.iter_mut().zip(self.basis.index_set.iter()) {
            let mut prod = T::one();
            for (j, &k) in index.iter().enumerate() {
                prod = prod * self.tables[j * width + k as usize];
            }
            *slot = prod;
        }
        Ok(())
    }

    /// The squared envelope `B(point)^2 = sum_k psi_k(point)^2`.
    pub fn envelope_squared(&mut self, point: &[T]) -> Result<T> {
        self.basis.validate_point(point)?;
        self.basis.univariate_tables(point, &mut self.tables);
        let width = self.basis.order() + 1;
        let mut sum = T::zero();
        for index in self.basis.index_set.iter() {
            let mut prod = T::one();
            for (j, &k) in index.iter().enumerate() {
                prod = prod * self.tables[j * width + k as usize];
            }
            sum = sum + prod * prod;
        }
        Ok(sum)
    }
}
