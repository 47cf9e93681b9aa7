//! Weighted least-squares recovery of expansion coefficients: design
//! assembly, a pivoted-QR solver with a minimum-norm SVD fallback for
//! rank-deficient systems, the multiplicative noise model, and recovery
//! and validation metrics.

use nalgebra::{DMatrix, DVector, RealField, SVD};
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::basis::{PcBasis, RowEvaluator};
use crate::coherence::spectral_stability;
use crate::error::{Error, Result};
use crate::sampling::{sample_standard, SampleBatch};
use crate::scalar::Real;

/// Relative-error threshold under which a fit counts as a successful
/// recovery of the true coefficients.
pub const DEFAULT_RECOVERY_THRESHOLD: f64 = 0.02;

/// Weighted least-squares system: the design `W Psi` whose rows are the
/// weighted basis rows at the sample points, and the weighted observations
/// `W u` on the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem<T: Real> {
    matrix: DMatrix<T>,
    rhs: DVector<T>,
}

impl<T: Real> DesignSystem<T> {
    /// Builds the system from an explicit weighted matrix and right-hand
    /// side. Entries must be finite and the shapes must agree.
    pub fn from_weighted(matrix: DMatrix<T>, rhs: DVector<T>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: "design needs at least one row and one column".into(),
            });
        }
        if rhs.len() != matrix.nrows() {
            return Err(Error::LengthMismatch {
                name: "rhs",
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        for &v in matrix.iter().chain(rhs.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    name: "design entry",
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(DesignSystem { matrix, rhs })
    }

    /// Weighted design matrix `W Psi`, one row per sample.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// Weighted observations `W u`.
    pub fn rhs(&self) -> &DVector<T> {
        &self.rhs
    }

    /// Number of samples N.
    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of basis functions P.
    pub fn n_terms(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Assembles the weighted system: row i is `w_i` times the basis row at
/// point i, and the right-hand side entry is `w_i u_i`. The weights enter
/// both sides, so any global weight scale cancels in the minimizer.
pub fn assemble<T: Real>(
    basis: &PcBasis<T>,
    batch: &SampleBatch<T>,
    values: &[T],
) -> Result<DesignSystem<T>> {
    if values.len() != batch.len() {
        return Err(Error::LengthMismatch {
            name: "values",
            expected: batch.len(),
            got: values.len(),
        });
    }
    if batch.dimension() != basis.dimension() {
        return Err(Error::DimensionMismatch {
            expected: basis.dimension(),
            got: batch.dimension(),
        });
    }
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                name: "values",
                value: v.to_f64_lossy(),
            });
        }
    }
    let n = batch.len();
    let p = basis.len();
    let mut evaluator = RowEvaluator::new(basis);
    let mut flat = vec![T::zero(); n * p];
    let mut rhs = DVector::zeros(n);
    let mut row = vec![T::zero(); p];
    for (i, (point, &w)) in batch.iter_points().zip(batch.weights()).enumerate() {
        evaluator.row_into(point, &mut row)?;
        for (k, &psi) in row.iter().enumerate() {
            flat[i * p + k] = w * psi;
        }
        rhs[i] = w * values[i];
    }
    let matrix = DMatrix::from_row_slice(n, p, &flat);
    DesignSystem::from_weighted(matrix, rhs)
}

/// Which algorithm produced the coefficients. `IterativeLsqr` is reserved
/// for an iterative least-squares lane and is never produced by `solve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Column-pivoted Householder QR, used for full-column-rank systems.
    Qr,
    /// Minimum-norm solution through the singular value decomposition,
    /// used when the design is rank-deficient or has fewer rows than
    /// columns.
    MinNormSvd,
    /// Iterative least squares; reserved, currently never returned.
    IterativeLsqr,
}

/// Outcome of a least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    /// Recovered coefficients, one per basis function.
    pub coefficients: Vec<T>,
    /// `||W u - W Psi c||` recomputed from the assembled system and the
    /// returned coefficients.
    pub residual_norm: T,
    /// Numerical rank at the pivoted-QR or SVD tolerance.
    pub rank: usize,
    /// True when the system was not full column rank and the minimum-norm
    /// fallback produced the coefficients.
    pub rank_deficient: bool,
    /// Largest singular value of the sample Gram matrix minus the
    /// identity; `None` when the caller skipped the diagnostic.
    pub sigma_stability: Option<T>,
    /// Algorithm that produced the coefficients.
    pub method: SolveMethod,
}

impl<T: Real> FitResult<T> {
    /// Whether the sample Gram matrix stayed within the stable spectral
    /// interval; `None` when the diagnostic was skipped.
    pub fn is_stable(&self) -> Option<bool> {
        self.sigma_stability
            .map(|sigma| sigma <= T::from_f64_lossy(0.5))
    }
}

/// Solves the weighted least-squares problem with the spectral-stability
/// diagnostic included.
pub fn solve<T: Real + RealField>(design: &DesignSystem<T>) -> Result<FitResult<T>> {
    solve_with(design, true)
}

/// Solves the weighted least-squares problem. Full-column-rank systems go
/// through column-pivoted Householder QR; rank-deficient or underdetermined
/// systems fall back to the minimum-norm SVD solution. Pass
/// `compute_stability = false` to skip the eigen-solve behind the
/// stability diagnostic when fitting in bulk.
pub fn solve_with<T: Real + RealField>(
    design: &DesignSystem<T>,
    compute_stability: bool,
) -> Result<FitResult<T>> {
    let n = design.n_samples();
    let p = design.n_terms();

    let qr_solution = if n >= p {
        let mut work = design.matrix.as_slice().to_vec();
        let mut b: Vec<T> = design.rhs.iter().copied().collect();
        pivoted_qr_least_squares(&mut work, &mut b, n, p)
    } else {
        QrOutcome { rank: 0, solution: None }
    };

    let (coefficients, rank, method) = match qr_solution.solution {
        Some(c) => (c, qr_solution.rank, SolveMethod::Qr),
        None => {
            let (c, rank) = svd_min_norm(design)?;
            (c, rank, SolveMethod::MinNormSvd)
        }
    };

    let c_vec = DVector::from_column_slice(&coefficients);
    let residual = &design.rhs - &design.matrix * &c_vec;
    let residual_norm = Float::sqrt(
        residual
            .iter()
            .fold(T::zero(), |acc, &r| acc + r * r),
    );
    let sigma_stability = if compute_stability {
        Some(spectral_stability(design)?.0)
    } else {
        None
    };
    Ok(FitResult {
        coefficients,
        residual_norm,
        rank,
        rank_deficient: method == SolveMethod::MinNormSvd,
        sigma_stability,
        method,
    })
}

struct QrOutcome<T> {
    rank: usize,
    solution: Option<Vec<T>>,
}

/// Column-pivoted Householder QR on a column-major buffer, applying the
/// reflections to `b` in place. Returns the coefficient vector when the
/// matrix has full column rank at the tolerance
/// `max(n,p) * machine_epsilon * largest column norm`, and the numerical
/// rank either way.
fn pivoted_qr_least_squares<T: Real>(
    a: &mut [T],
    b: &mut [T],
    n: usize,
    p: usize,
) -> QrOutcome<T> {
    debug_assert_eq!(a.len(), n * p);
    debug_assert_eq!(b.len(), n);
    let column_norm = |a: &[T], j: usize, from: usize| {
        let col = &a[j * n + from..(j + 1) * n];
        Float::sqrt(col.iter().fold(T::zero(), |acc, &v| acc + v * v))
    };

    let mut perm: Vec<usize> = (0..p).collect();
    let mut norms: Vec<T> = (0..p).map(|j| column_norm(a, j, 0)).collect();
    let mut reference_norms = norms.clone();
    let max_norm = norms.iter().fold(T::zero(), |acc, &v| Float::max(acc, v));
    let tol = T::from_f64_lossy(n.max(p) as f64) * T::epsilon() * max_norm;
    if !(max_norm > T::zero()) {
        return QrOutcome { rank: 0, solution: None };
    }
    let downdate_guard = Float::sqrt(T::epsilon());

    let steps = n.min(p);
    let mut rank = steps;
    for k in 0..steps {
        let mut jbest = k;
        for j in k + 1..p {
            if norms[j] > norms[jbest] {
                jbest = j;
            }
        }
        if norms[jbest] <= tol {
            rank = k;
            break;
        }
        if jbest != k {
            for i in 0..n {
                a.swap(i + k * n, i + jbest * n);
            }
            perm.swap(k, jbest);
            norms.swap(k, jbest);
            reference_norms.swap(k, jbest);
        }

        let normx = column_norm(a, k, k);
        if normx <= tol {
            rank = k;
            break;
        }
        let x0 = a[k + k * n];
        let alpha = if x0 >= T::zero() { -normx } else { normx };
        let v0 = x0 - alpha;
        let vnorm_sq = v0 * v0 + (normx * normx - x0 * x0);
        a[k + k * n] = alpha;

        let two = T::from_f64_lossy(2.0);
        for j in k + 1..p {
            let mut dot = v0 * a[k + j * n];
            for i in k + 1..n {
                dot = dot + a[i + k * n] * a[i + j * n];
            }
            let coef = two * dot / vnorm_sq;
            a[k + j * n] = a[k + j * n] - coef * v0;
            for i in k + 1..n {
                a[i + j * n] = a[i + j * n] - coef * a[i + k * n];
            }
        }
        let mut dot_b = v0 * b[k];
        for i in k + 1..n {
            dot_b = dot_b + a[i + k * n] * b[i];
        }
        let coef_b = two * dot_b / vnorm_sq;
        b[k] = b[k] - coef_b * v0;
        for i in k + 1..n {
            b[i] = b[i] - coef_b * a[i + k * n];
        }

        for j in k + 1..p {
            if norms[j] > T::zero() {
                let ratio = Float::abs(a[k + j * n]) / norms[j];
                let mut shrink = (T::one() + ratio) * (T::one() - ratio);
                if shrink < T::zero() {
                    shrink = T::zero();
                }
                let relative = norms[j] / reference_norms[j];
                if shrink * relative * relative <= downdate_guard {
                    norms[j] = column_norm(a, j, k + 1);
                    reference_norms[j] = norms[j];
                } else {
                    norms[j] = norms[j] * Float::sqrt(shrink);
                }
            }
        }
    }

    if rank < p {
        return QrOutcome { rank, solution: None };
    }

    let mut c = vec![T::zero(); p];
    for j in (0..p).rev() {
        let mut s = b[j];
        for m in j + 1..p {
            s = s - a[j + m * n] * c[m];
        }
        c[j] = s / a[j + j * n];
    }
    let mut out = vec![T::zero(); p];
    for (j, &target) in perm.iter().enumerate() {
        out[target] = c[j];
    }
    QrOutcome { rank, solution: Some(out) }
}

/// Minimum-norm least-squares solution through the SVD, with the rank
/// taken at the same max-dimension tolerance as the QR path.
fn svd_min_norm<T: Real + RealField>(design: &DesignSystem<T>) -> Result<(Vec<T>, usize)> {
    let n = design.n_samples();
    let p = design.n_terms();
    let svd = SVD::try_new(design.matrix.clone(), true, true, T::epsilon(), 0).ok_or(
        Error::SolveFailed {
            reason: "singular value decomposition did not converge".into(),
        },
    )?;
    let sigma_max = svd
        .singular_values
        .iter()
        .fold(T::zero(), |acc, &s| Float::max(acc, s));
    let tol = T::from_f64_lossy(n.max(p) as f64) * T::epsilon() * sigma_max;
    let rank = svd.rank(tol);
    let solution = svd
        .solve(&design.rhs, tol)
        .map_err(|reason| Error::SolveFailed {
            reason: reason.into(),
        })?;
    Ok((solution.iter().copied().collect(), rank))
}

/// Observation noise model applied to raw model evaluations before
/// weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Observations pass through unchanged.
    None,
    /// Each value gains independent centered Gaussian noise whose standard
    /// deviation is `sigma_rel` times the value's magnitude.
    RelativeGaussian {
        /// Noise standard deviation relative to the observation magnitude.
        sigma_rel: f64,
    },
}

impl NoiseModel {
    /// The relative-Gaussian model at the conventional 3 percent level.
    pub fn default_gaussian() -> Self {
        NoiseModel::RelativeGaussian { sigma_rel: 0.03 }
    }
}

/// Applies the noise model to each value independently, deterministically
/// in the seed. Zero-magnitude values pass through unchanged because their
/// noise scale vanishes.
pub fn apply_noise<T: Real>(values: &[T], model: &NoiseModel, seed: u64) -> Vec<T> {
    match *model {
        NoiseModel::None => values.to_vec(),
        NoiseModel::RelativeGaussian { sigma_rel } => {
            assert!(sigma_rel >= 0.0, "noise level must be non-negative");
            if sigma_rel == 0.0 {
                return values.to_vec();
            }
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let scale = T::from_f64_lossy(sigma_rel);
            values
                .iter()
                .map(|&v| v + scale * Float::abs(v) * T::standard_normal(&mut rng))
                .collect()
        }
    }
}

/// Whether the recovered coefficients match the truth to the given
/// relative tolerance in the Euclidean norm.
pub fn recovery_success<T: Real>(c_hat: &[T], c_true: &[T], threshold: f64) -> Result<bool> {
    if c_hat.len() != c_true.len() {
        return Err(Error::LengthMismatch {
            name: "c_hat",
            expected: c_true.len(),
            got: c_hat.len(),
        });
    }
    let norm_sq = c_true.iter().fold(T::zero(), |acc, &c| acc + c * c);
    if !(norm_sq > T::zero()) {
        return Err(Error::ZeroNorm { name: "c_true" });
    }
    let err_sq = c_hat
        .iter()
        .zip(c_true)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    Ok(Float::sqrt(err_sq / norm_sq) <= T::from_f64_lossy(threshold))
}

/// Relative error between two expansions, both as a Monte Carlo estimate
/// over fresh standard-measure points and exactly in coefficient space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRmse<T> {
    /// `sqrt(sum (u_hat - u_ref)^2 / sum u_ref^2)` over the validation
    /// points.
    pub sampled: T,
    /// `||c_hat - c_ref|| / ||c_ref||`, which the sampled estimate
    /// converges to by orthonormality.
    pub coefficient_space: T,
}

/// Draws `n_val` points from the orthogonality measure and compares the
/// two expansions pointwise, reporting the sampled relative error together
/// with its exact coefficient-space counterpart.
pub fn validation_rmse<T: Real>(
    basis: &PcBasis<T>,
    c_hat: &[T],
    c_ref: &[T],
    n_val: usize,
    seed: u64,
) -> Result<ValidationRmse<T>> {
    if c_hat.len() != basis.len() {
        return Err(Error::LengthMismatch {
            name: "c_hat",
            expected: basis.len(),
            got: c_hat.len(),
        });
    }
    if c_ref.len() != basis.len() {
        return Err(Error::LengthMismatch {
            name: "c_ref",
            expected: basis.len(),
            got: c_ref.len(),
        });
    }
    let ref_norm_sq = c_ref.iter().fold(T::zero(), |acc, &c| acc + c * c);
    if !(ref_norm_sq > T::zero()) {
        return Err(Error::ZeroNorm { name: "c_ref" });
    }

    let batch = sample_standard(basis, n_val, seed)?;
    let mut evaluator = RowEvaluator::new(basis);
    let mut row = vec![T::zero(); basis.len()];
    let mut err_sq = T::zero();
    let mut ref_sq = T::zero();
    for point in batch.iter_points() {
        evaluator.row_into(point, &mut row)?;
        let mut u_hat = T::zero();
        let mut u_ref = T::zero();
        for ((&psi, &a), &b) in row.iter().zip(c_hat).zip(c_ref) {
            u_hat = u_hat + psi * a;
            u_ref = u_ref + psi * b;
        }
        err_sq = err_sq + (u_hat - u_ref) * (u_hat - u_ref);
        ref_sq = ref_sq + u_ref * u_ref;
    }
    if !(ref_sq > T::zero()) {
        return Err(Error::ZeroNorm {
            name: "reference values",
        });
    }
    let diff_sq = c_hat
        .iter()
        .zip(c_ref)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    Ok(ValidationRmse {
        sampled: Float::sqrt(err_sq / ref_sq),
        coefficient_space: Float::sqrt(diff_sq / ref_norm_sq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Family;
    use crate::sampling::{sample_asymptotic, StrategyKind};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn legendre(d: usize, p: usize) -> PcBasis<f64> {
        PcBasis::new(Family::Legendre, d, p).unwrap()
    }

    fn exact_values(basis: &PcBasis<f64>, batch: &SampleBatch<f64>, c: &[f64]) -> Vec<f64> {
        batch
            .iter_points()
            .map(|point| {
                basis
                    .eval_basis_row(point)
                    .unwrap()
                    .iter()
                    .zip(c)
                    .map(|(psi, ck)| psi * ck)
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_fit_is_the_weighted_mean() {
        let basis = legendre(2, 0);
        let batch = sample_asymptotic(&basis, 40, 3).unwrap();
        let values: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let design = assemble(&basis, &batch, &values).unwrap();
        let fit = solve(&design).unwrap();
        let num: f64 = batch
            .weights()
            .iter()
            .zip(&values)
            .map(|(w, u)| w * w * u)
            .sum();
        let den: f64 = batch.weights().iter().map(|w| w * w).sum();
        assert_relative_eq!(fit.coefficients[0], num / den, max_relative = 1e-12);
        assert_eq!(fit.method, SolveMethod::Qr);
    }

    #[test]
    fn three_point_line_fit_matches_the_hand_solution() {
        let basis = legendre(1, 1);
        let batch = SampleBatch::from_parts(
            vec![-1.0, 0.0, 1.0],
            vec![1.0; 3],
            1,
            StrategyKind::Standard,
            0,
        )
        .unwrap();
        let values = vec![-1.0, 0.0, 1.0];
        let design = assemble(&basis, &batch, &values).unwrap();
        let fit = solve(&design).unwrap();
        assert_relative_eq!(fit.coefficients[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(
            fit.coefficients[1],
            1.0 / 3f64.sqrt(),
            max_relative = 1e-14
        );
        assert_eq!(fit.rank, 2);
        assert!(!fit.rank_deficient);
        assert!(fit.sigma_stability.is_some());
    }

    #[test]
    fn square_full_rank_system_interpolates() {
        let basis = legendre(1, 2);
        let batch = SampleBatch::from_parts(
            vec![-0.9, 0.1, 0.8],
            vec![1.0; 3],
            1,
            StrategyKind::Standard,
            0,
        )
        .unwrap();
        let values = vec![0.3, -1.2, 2.0];
        let design = assemble(&basis, &batch, &values).unwrap();
        let fit = solve(&design).unwrap();
        assert!(fit.residual_norm < 1e-10, "residual {}", fit.residual_norm);
        assert_eq!(fit.rank, 3);
        assert_eq!(fit.method, SolveMethod::Qr);
    }

    #[test]
    fn noiseless_planted_coefficients_are_recovered_exactly() {
        let basis = legendre(2, 3);
        let p = basis.len();
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let c: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let batch = sample_standard(&basis, 200, 5).unwrap();
        let values = exact_values(&basis, &batch, &c);
        let design = assemble(&basis, &batch, &values).unwrap();
        let fit = solve(&design).unwrap();
        let err: f64 = fit
            .coefficients
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-10, "relative error {}", err / norm);
    }

    #[test]
    fn underdetermined_systems_return_the_minimum_norm_fit() {
        let matrix = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let rhs = DVector::from_column_slice(&[2.0]);
        let design = DesignSystem::from_weighted(matrix, rhs).unwrap();
        let fit = solve(&design).unwrap();
        assert!(fit.rank_deficient);
        assert_eq!(fit.method, SolveMethod::MinNormSvd);
        assert_eq!(fit.rank, 1);
        assert_relative_eq!(fit.coefficients[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn duplicated_columns_trigger_the_fallback() {
        let mut matrix = DMatrix::zeros(6, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for i in 0..6 {
            let v: f64 = rng.gen_range(-1.0..1.0);
            matrix[(i, 0)] = v;
            matrix[(i, 1)] = 2.0 * v;
            matrix[(i, 2)] = rng.gen_range(-1.0..1.0);
        }
        let rhs = DVector::from_fn(6, |i, _| (i as f64 * 0.37).cos());
        let design = DesignSystem::from_weighted(matrix, rhs).unwrap();
        let fit = solve(&design).unwrap();
        assert!(fit.rank_deficient);
        assert_eq!(fit.rank, 2);
        // The minimum-norm solution splits weight across the parallel
        // columns in the 1:2 ratio of their scales.
        assert_relative_eq!(
            2.0 * fit.coefficients[0],
            fit.coefficients[1],
            max_relative = 1e-9
        );
    }

    #[test]
    fn qr_and_svd_agree_on_full_rank_systems() {
        let basis = legendre(2, 4);
        let batch = sample_standard(&basis, 80, 21).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let values: Vec<f64> = (0..80).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let design = assemble(&basis, &batch, &values).unwrap();
        let qr_fit = solve(&design).unwrap();
        assert_eq!(qr_fit.method, SolveMethod::Qr);
        let (svd_c, svd_rank) = svd_min_norm(&design).unwrap();
        assert_eq!(svd_rank, basis.len());
        let norm: f64 = svd_c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff: f64 = qr_fit
            .coefficients
            .iter()
            .zip(&svd_c)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff / norm < 1e-9, "relative gap {}", diff / norm);
    }

    #[test]
    fn full_rank_residual_is_orthogonal_to_the_columns() {
        let basis = legendre(3, 2);
        let batch = sample_standard(&basis, 60, 33).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(34);
        let values: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let design = assemble(&basis, &batch, &values).unwrap();
        let fit = solve(&design).unwrap();
        let c = DVector::from_column_slice(&fit.coefficients);
        let residual = design.rhs() - design.matrix() * c;
        let gram_residual = design.matrix().transpose() * &residual;
        let scale = design.matrix().norm() * design.rhs().norm();
        assert!(gram_residual.norm() <= 1e-8 * scale);

        let recomputed = residual.norm();
        assert_relative_eq!(fit.residual_norm, recomputed, max_relative = 1e-10);
    }

    #[test]
    fn global_weight_rescaling_leaves_the_fit_unchanged() {
        let basis = legendre(2, 2);
        let batch = sample_asymptotic(&basis, 50, 44).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(45);
        let values: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let scaled = SampleBatch::from_parts(
            batch.iter_points().flatten().copied().collect(),
            batch.weights().iter().map(|w| 7.5 * w).collect(),
            2,
            StrategyKind::Asymptotic,
            batch.seed(),
        )
        .unwrap();

        let fit = solve(&assemble(&basis, &batch, &values).unwrap()).unwrap();
        let fit_scaled = solve(&assemble(&basis, &scaled, &values).unwrap()).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&fit_scaled.coefficients) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn noise_model_preserves_values_when_silent() {
        let values = vec![1.0, -2.0, 0.5];
        assert_eq!(apply_noise(&values, &NoiseModel::None, 7), values);
        assert_eq!(
            apply_noise(&values, &NoiseModel::RelativeGaussian { sigma_rel: 0.0 }, 7),
            values
        );
        let noisy = apply_noise(&values, &NoiseModel::default_gaussian(), 7);
        assert_ne!(noisy, values);
        assert_eq!(noisy, apply_noise(&values, &NoiseModel::default_gaussian(), 7));
    }

    #[test]
    fn zero_values_stay_noise_free() {
        let values = vec![0.0, 1.0, 0.0];
        let noisy = apply_noise(&values, &NoiseModel::default_gaussian(), 3);
        assert_eq!(noisy[0], 0.0);
        assert_eq!(noisy[2], 0.0);
        assert_ne!(noisy[1], 1.0);
    }

    #[test]
    fn noise_spread_matches_the_relative_level() {
        let n = 100_000;
        let values = vec![1.0f64; n];
        let noisy = apply_noise(&values, &NoiseModel::default_gaussian(), 11);
        let mean: f64 = noisy.iter().sum::<f64>() / n as f64;
        let var: f64 =
            noisy.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        assert!(
            (0.0297..=0.0303).contains(&std),
            "sample std {std} outside the 3 percent band"
        );
    }

    #[test]
    fn recovery_threshold_separates_three_and_two_percent_errors() {
        let c: Vec<f64> = vec![0.5, -0.25, 1.5];
        assert!(recovery_success(&c, &c, DEFAULT_RECOVERY_THRESHOLD).unwrap());
        let inflated: Vec<f64> = c.iter().map(|v| 1.03 * v).collect();
        assert!(!recovery_success(&inflated, &c, DEFAULT_RECOVERY_THRESHOLD).unwrap());
        let close: Vec<f64> = c.iter().map(|v| 1.019 * v).collect();
        assert!(recovery_success(&close, &c, DEFAULT_RECOVERY_THRESHOLD).unwrap());
        assert!(matches!(
            recovery_success(&c, &[0.0, 0.0, 0.0], 0.02),
            Err(Error::ZeroNorm { .. })
        ));
        assert!(matches!(
            recovery_success(&c[..2], &c, 0.02),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn validation_error_vanishes_for_identical_expansions() {
        let basis = legendre(2, 2);
        let c: Vec<f64> = (0..basis.len()).map(|k| 1.0 / (k + 1) as f64).collect();
        let v = validation_rmse(&basis, &c, &c, 500, 9).unwrap();
        assert_eq!(v.sampled, 0.0);
        assert_eq!(v.coefficient_space, 0.0);
    }

    #[test]
    fn coefficient_space_error_is_the_exact_relative_norm() {
        let basis = legendre(2, 3);
        let p = basis.len();
        let c_ref: Vec<f64> = (0..p).map(|k| ((k + 1) as f64).recip()).collect();
        let mut c_hat = c_ref.clone();
        c_hat[3] += 0.05;
        c_hat[7] -= 0.02;
        let v = validation_rmse(&basis, &c_hat, &c_ref, 100, 13).unwrap();
        let expect = (0.05f64.powi(2) + 0.02f64.powi(2)).sqrt()
            / c_ref.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_relative_eq!(v.coefficient_space, expect, max_relative = 1e-14);
    }

    #[test]
    fn sampled_validation_error_tracks_the_coefficient_space_value() {
        let basis = legendre(2, 3);
        let p = basis.len();
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let c_ref: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..1.5)).collect();
        let mut c_hat = c_ref.clone();
        for v in c_hat.iter_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
        let n_val = 10_000;
        let v = validation_rmse(&basis, &c_hat, &c_ref, n_val, 52).unwrap();
        let rel = (v.sampled - v.coefficient_space).abs() / v.coefficient_space;
        assert!(
            rel <= 3.0 / (n_val as f64).sqrt(),
            "sampled {} vs exact {}",
            v.sampled,
            v.coefficient_space
        );
    }

    #[test]
    fn assembly_validates_shapes_and_values() {
        let basis = legendre(2, 1);
        let batch = sample_standard(&basis, 10, 1).unwrap();
        assert!(matches!(
            assemble(&basis, &batch, &[0.0; 9]),
            Err(Error::LengthMismatch { .. })
        ));
        let mut values = vec![0.0; 10];
        values[4] = f64::NAN;
        assert!(matches!(
            assemble(&basis, &batch, &values),
            Err(Error::NonFinite { .. })
        ));
        let other = PcBasis::<f64>::new(Family::Legendre, 3, 1).unwrap();
        assert!(matches!(
            assemble(&other, &batch, &vec![0.0; 10]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn assembled_rows_are_weight_times_basis_row() {
        let basis = legendre(2, 2);
        let batch = sample_asymptotic(&basis, 20, 61).unwrap();
        let values: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let design = assemble(&basis, &batch, &values).unwrap();
        for (i, (point, &w)) in batch.iter_points().zip(batch.weights()).enumerate() {
            let row = basis.eval_basis_row(point).unwrap();
            for (k, &psi) in row.iter().enumerate() {
                assert_relative_eq!(
                    design.matrix()[(i, k)],
                    w * psi,
                    max_relative = 1e-14
                );
            }
            assert_relative_eq!(design.rhs()[i], w * values[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn skipping_the_stability_diagnostic_leaves_it_unset() {
        let basis = legendre(1, 1);
        let batch = sample_standard(&basis, 30, 71).unwrap();
        let values = vec![1.0; 30];
        let design = assemble(&basis, &batch, &values).unwrap();
        let fit = solve_with(&design, false).unwrap();
        assert_eq!(fit.sigma_stability, None);
        assert_eq!(fit.is_stable(), None);
        let full = solve(&design).unwrap();
        assert!(full.sigma_stability.unwrap() >= 0.0);
        assert_eq!(full.coefficients, fit.coefficients);
    }
}
