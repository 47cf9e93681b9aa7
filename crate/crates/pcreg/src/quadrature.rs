//! Gaussian quadrature rules normalized against the probability densities
//! of the basis families, plus the tensor-product Gram matrix used to test
//! orthonormality.
//!
//! Nodes and weights come from the symmetric tridiagonal Jacobi matrix of
//! the monic recurrence (the Golub-Welsch construction): eigenvalues are the
//! nodes and squared first eigenvector components are the weights. Because
//! the rules integrate against probability densities, the weights sum to 1.

use nalgebra::DMatrix;

use crate::basis::{Family, PcBasis, RowEvaluator};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Point budget for tensor-product quadrature loops.
pub const TENSOR_POINT_BUDGET: u128 = 100_000_000;

/// A one-dimensional Gaussian rule: `sum_i weights[i] * g(nodes[i])`
/// approximates the expectation of `g` under the family's density, exactly
/// for polynomials of degree up to `2n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    /// Quadrature nodes in ascending order.
    pub nodes: Vec<T>,
    /// Positive weights summing to 1.
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the rule has no nodes; construction forbids this.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Expectation of `g` under the rule.
    pub fn integrate(&self, mut g: impl FnMut(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .fold(T::zero(), |acc, (&x, &w)| acc + w * g(x))
    }
}

/// Builds the n-point Gaussian rule for the family's orthogonality density.
pub fn gauss_rule<T: Real>(family: Family, n: usize) -> Result<QuadratureRule<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "a quadrature rule needs at least one node".into(),
        });
    }
    // Both families are symmetric, so the Jacobi diagonal is zero; only the
    // off-diagonal entries differ.
    let mut diag = vec![T::zero(); n];
    let mut off = vec![T::zero(); n];
    for k in 1..n {
        let kf = k as f64;
        let b = match family {
            Family::Hermite => kf.sqrt(),
            Family::Legendre => kf / (4.0 * kf * kf - 1.0).sqrt(),
        };
        off[k - 1] = T::from_f64_lossy(b);
    }
    let mut first_components = vec![T::zero(); n];
    first_components[0] = T::one();
    tridiagonal_ql(&mut diag, &mut off, &mut first_components)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let nodes: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let weights: Vec<T> = order
        .iter()
        .map(|&i| first_components[i] * first_components[i])
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix, tracking
/// only the first row of the accumulated eigenvector matrix (all the
/// Golub-Welsch weights need).
///
/// `diag` holds the diagonal and is overwritten with eigenvalues; `off`
/// holds the subdiagonal in its first `n-1` slots; `z` starts as the first
/// coordinate basis vector and ends as the first components of the
/// eigenvectors.
fn tridiagonal_ql<T: Real>(diag: &mut [T], off: &mut [T], z: &mut [T]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    let tol = T::from_f64_lossy(1e-14);
    let max_sweeps = 50;
    off[n - 1] = T::zero();

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let scale = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= tol * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::EigenNoConvergence {
                    index: l,
                    sweeps: max_sweeps,
                });
            }

            let two = T::from_f64_lossy(2.0);
            let mut g = (diag[l + 1] - diag[l]) / (two * off[l]);
            let mut r = g.hypot(T::one());
            let denom = g + r.copysign(g);
            g = diag[m] - diag[l] + off[l] / denom;
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut deflated = false;
            for i in (l..m).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == T::zero() {
                    diag[i + 1] = diag[i + 1] - p;
                    off[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + two * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;

                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if deflated {
                continue;
            }
            diag[l] = diag[l] - p;
            off[l] = g;
            off[m] = T::zero();
        }
    }
    Ok(())
}

fn checked_tensor_points(n_per_dim: usize, d: usize) -> Result<u128> {
    let mut total: u128 = 1;
    for _ in 0..d {
        total = total
            .checked_mul(n_per_dim as u128)
            .filter(|&t| t <= TENSOR_POINT_BUDGET)
            .ok_or(Error::QuadratureBudget {
                points: u128::MAX,
                budget: TENSOR_POINT_BUDGET,
            })?;
    }
    Ok(total)
}

/// Visits every node of the d-fold tensor product of `rule`, passing the
/// point and its product weight to `visit`.
pub(crate) fn for_each_tensor_node<T: Real>(
    rule: &QuadratureRule<T>,
    d: usize,
    mut visit: impl FnMut(&[T], T) -> Result<()>,
) -> Result<()> {
    let n = rule.len();
    let total = checked_tensor_points(n, d)?;
    let mut odometer = vec![0usize; d];
    let mut point = vec![T::zero(); d];
    for _ in 0..total {
        let mut weight = T::one();
        for (j, &idx) in odometer.iter().enumerate() {
            point[j] = rule.nodes[idx];
            weight = weight * rule.weights[idx];
        }
        visit(&point, weight)?;
        for pos in (0..d).rev() {
            odometer[pos] += 1;
            if odometer[pos] < n {
                break;
            }
            odometer[pos] = 0;
        }
    }
    Ok(())
}

/// Gram matrix `G[i][j] = E[psi_i psi_j]` estimated by the d-fold tensor
/// product of the family's `n_per_dim`-point rule. With `n_per_dim >= p+1`
/// the rule is exact on degree-2p integrands and G equals the identity up
/// to rounding.
pub fn gram_matrix<T: Real>(basis: &PcBasis<T>, n_per_dim: usize) -> Result<DMatrix<T>> {
    if n_per_dim < basis.order() + 1 {
        return Err(Error::InvalidParameter {
            name: "n_per_dim",
            reason: format!(
                "need at least p+1 = {} nodes per dimension for exactness",
                basis.order() + 1
            ),
        });
    }
    let rule = gauss_rule::<T>(basis.family(), n_per_dim)?;
    let p_card = basis.len();
    let mut gram = DMatrix::<T>::zeros(p_card, p_card);
    let mut evaluator = RowEvaluator::new(basis);
    let mut row = vec![T::zero(); p_card];
    for_each_tensor_node(&rule, basis.dimension(), |point, weight| {
        evaluator.row_into(point, &mut row)?;
        for i in 0..p_card {
            let wi = weight * row[i];
            for j in 0..p_card {
                gram[(i, j)] = gram[(i, j)] + wi * row[j];
            }
        }
        Ok(())
    })?;
    Ok(gram)
}
