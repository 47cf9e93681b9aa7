//! Coherence parameters of a weighted sampling scheme: empirical estimates
//! from probe batches, closed-form theory bounds, sample-size planning, and
//! the spectral-stability diagnostic of an assembled least-squares system.
//!
//! The two parameters are `mu2`, the supremum over the sampling support of
//! the weighted squared row norm `sum_k (w psi_k)^2`, and `mu_inf`, the
//! supremum of the largest single weighted squared entry `(w psi_k)^2`.
//! Empirical estimates are maxima over finitely many probe points and are
//! therefore lower estimates of the true suprema.

use nalgebra::{DMatrix, RealField};
use num_traits::Float;

use crate::basis::{Family, PcBasis, RowEvaluator};
use crate::error::{Error, Result};
use crate::regression::DesignSystem;
use crate::sampling::{
    hermite_ball_radius, sample, SamplingStrategy, StrategyKind,
};
use crate::scalar::Real;

/// How trustworthy a closed-form coherence bound is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundQuality {
    /// Holds for every order and dimension.
    Proven,
    /// Limit of a family of bounds as the order grows; finite orders may
    /// exceed it slightly.
    AsymptoticEnvelope,
    /// Order-of-magnitude expression evaluated with unit constant.
    OrderOfMagnitude,
}

/// A closed-form bound on `mu_inf` together with its quality flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuInfBound {
    /// Value of the bound.
    pub value: f64,
    /// Whether the value is proven, asymptotic, or order-of-magnitude.
    pub quality: BoundQuality,
}

/// Empirical coherence estimates for one basis and sampling strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport<T> {
    /// Polynomial family of the probed basis.
    pub family: Family,
    /// Sampling strategy the probes were drawn from.
    pub kind: StrategyKind,
    /// Input dimension.
    pub dimension: usize,
    /// Total order of the basis.
    pub order: usize,
    /// Number of basis functions.
    pub basis_size: usize,
    /// Number of probe points the maxima were taken over.
    pub n_probe: usize,
    /// Largest weighted squared row norm seen across the probes.
    pub mu2_hat: T,
    /// Largest weighted squared entry seen across the probes.
    pub mu_inf_hat: T,
    /// Exact value of `mu2` when one is known (the basis size for
    /// coherence-optimal sampling).
    pub mu2_theory: Option<f64>,
    /// Closed-form bound on `mu_inf` when one applies.
    pub mu_inf_bound: Option<f64>,
    /// Quality flag of `mu_inf_bound`.
    pub bound_quality: Option<BoundQuality>,
    /// Seed the probe batch was drawn with.
    pub seed: u64,
}

/// Normalization that turns the samplers' un-normalized weights into the
/// weights whose squared expectation against each squared basis function is
/// one. The empirical coherence maxima are multiplied by this factor.
pub(crate) fn weight_normalization(
    family: Family,
    kind: StrategyKind,
    d: usize,
    p: usize,
    basis_size: usize,
) -> f64 {
    match (kind, family) {
        (StrategyKind::Standard, _) => 1.0,
        (StrategyKind::CoherenceOptimal, _) => basis_size as f64,
        (StrategyKind::Asymptotic, Family::Legendre) => {
            (std::f64::consts::PI / 2.0).powi(d as i32)
        }
        (StrategyKind::Asymptotic, Family::Hermite) => {
            let r = hermite_ball_radius(p);
            r.powi(d as i32) / (2f64.powf(d as f64 / 2.0) * gamma_of_half(d + 2))
        }
    }
}

/// `Gamma(num/2)` for a positive integer `num`, computed exactly as a
/// product of half-integer factors.
fn gamma_of_half(num: usize) -> f64 {
    assert!(num >= 1, "gamma_of_half needs a positive numerator");
    let mut value;
    let mut z;
    if num % 2 == 0 {
        value = 1.0;
        z = 1.0;
    } else {
        value = std::f64::consts::PI.sqrt();
        z = 0.5;
    }
    let target = num as f64 / 2.0;
    while z < target {
        value *= z;
        z += 1.0;
    }
    value
}

/// Draws `n_probe` points from the strategy's sampler and records the
/// largest weighted squared row norm and entry, after normalizing the
/// weights so the estimates target the scheme's coherence parameters.
pub fn estimate_coherence<T: Real>(
    basis: &PcBasis<T>,
    strategy: &SamplingStrategy,
    n_probe: usize,
    seed: u64,
) -> Result<CoherenceReport<T>> {
    let batch = sample(basis, strategy, n_probe, seed)?;
    let kind = strategy.kind();
    let d = basis.dimension();
    let p = basis.order();
    let basis_size = basis.len();
    let scale =
        T::from_f64_lossy(weight_normalization(basis.family(), kind, d, p, basis_size));

    let mut evaluator = RowEvaluator::new(basis);
    let mut row = vec![T::zero(); basis_size];
    let mut max_row_norm = T::zero();
    let mut max_entry = T::zero();
    for (point, &w) in batch.iter_points().zip(batch.weights().iter()) {
        evaluator.row_into(point, &mut row)?;
        let mut row_norm = T::zero();
        let mut entry = T::zero();
        for &psi in &row {
            let term = (w * psi) * (w * psi);
            row_norm = row_norm + term;
            if term > entry {
                entry = term;
            }
        }
        debug_assert!(
            row_norm <= T::from_f64_lossy(basis_size as f64) * entry * T::from_f64_lossy(1.0 + 1e-9),
            "row norm exceeded the size-times-entry bound"
        );
        if row_norm > max_row_norm {
            max_row_norm = row_norm;
        }
        if entry > max_entry {
            max_entry = entry;
        }
    }

    let bound = mu_inf_theory_bound(basis.family(), kind, d, p);
    Ok(CoherenceReport {
        family: basis.family(),
        kind,
        dimension: d,
        order: p,
        basis_size,
        n_probe,
        mu2_hat: scale * max_row_norm,
        mu_inf_hat: scale * max_entry,
        mu2_theory: match kind {
            StrategyKind::CoherenceOptimal => Some(basis_size as f64),
            _ => None,
        },
        mu_inf_bound: bound.map(|b| b.value),
        bound_quality: bound.map(|b| b.quality),
        seed,
    })
}

/// Closed-form bound on `mu_inf` for the given family, strategy, dimension,
/// and order. Returns `None` when no closed form applies: order zero, or
/// coherence-optimal sampling.
///
/// Standard Legendre returns the smallest applicable of `exp(2p)`, `3^p`
/// (when `p <= d`), and `(2p/d+1)^d` (when `p >= d`), all proven. Standard
/// Hermite returns `exp((2-ln 2) p)`, the large-order envelope of a family
/// of bounds. Asymptotic Legendre returns the proven `3^d`. Asymptotic
/// Hermite returns `(2p)^{d/2} / Gamma(d/2+1)`, an order-of-magnitude
/// expression with unit constant.
pub fn mu_inf_theory_bound(
    family: Family,
    kind: StrategyKind,
    d: usize,
    p: usize,
) -> Option<MuInfBound> {
    if p == 0 {
        return None;
    }
    let (pf, df) = (p as f64, d as f64);
    match (kind, family) {
        (StrategyKind::CoherenceOptimal, _) => None,
        (StrategyKind::Standard, Family::Legendre) => {
            let mut value = (2.0 * pf).exp();
            if p <= d {
                value = value.min(3f64.powi(p as i32));
            }
            if p >= d {
                value = value.min((2.0 * pf / df + 1.0).powi(d as i32));
            }
            Some(MuInfBound {
                value,
                quality: BoundQuality::Proven,
            })
        }
        (StrategyKind::Standard, Family::Hermite) => Some(MuInfBound {
            value: ((2.0 - 2f64.ln()) * pf).exp(),
            quality: BoundQuality::AsymptoticEnvelope,
        }),
        (StrategyKind::Asymptotic, Family::Legendre) => Some(MuInfBound {
            value: 3f64.powi(d as i32),
            quality: BoundQuality::Proven,
        }),
        (StrategyKind::Asymptotic, Family::Hermite) => Some(MuInfBound {
            value: (2.0 * pf).powf(df / 2.0) / gamma_of_half(d + 2),
            quality: BoundQuality::OrderOfMagnitude,
        }),
    }
}

/// Inputs of the sample-count formula: how many basis functions, how much
/// coherence per basis function, the excess-error budget, the target
/// success probability, and the error energies of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizePlan {
    /// Number of basis functions retained in the fit.
    pub basis_size: usize,
    /// Coherence per basis function, `mu2 / P`; at least 1.
    pub nu: f64,
    /// Excess mean-squared-error budget relative to the best achievable.
    pub tau: f64,
    /// Target probability that the excess error stays within budget.
    pub rho: f64,
    /// Expected squared truncation error of the retained expansion.
    pub eps2: f64,
    /// Expected squared measurement noise; `None` selects the noiseless
    /// formula and `Some(0.0)` keeps the noise-model constants with zero
    /// noise energy.
    pub eps_m2: Option<f64>,
    /// Whether the scheme's coherence is bounded over the whole sampling
    /// support; unbounded schemes pay an extra `1/P` in the failure
    /// probability, which tightens the feasible `rho` range.
    pub bounded_coherence: bool,
}

/// Smallest sample count the concentration analysis certifies for the
/// plan: the larger of an error-budget term and a logarithmic
/// stability term, scaled by `nu` and rounded up.
pub fn required_samples(plan: &SampleSizePlan) -> Result<usize> {
    if plan.basis_size == 0 {
        return Err(Error::InvalidParameter {
            name: "basis_size",
            reason: "plan needs at least one basis function".into(),
        });
    }
    if !(plan.nu >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "nu",
            reason: "coherence ratio must be at least 1".into(),
        });
    }
    if !(plan.tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: "excess-error budget must be positive".into(),
        });
    }
    if !(plan.rho > 0.0 && plan.rho < 1.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: "success probability must lie strictly between 0 and 1".into(),
        });
    }
    if let Some(eps_m2) = plan.eps_m2 {
        if eps_m2 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "eps_m2",
                reason: "noise energy must be non-negative".into(),
            });
        }
    }
    if plan.eps2 < 0.0 {
        return Err(Error::InvalidParameter {
            name: "eps2",
            reason: "truncation energy must be non-negative".into(),
        });
    }

    let p = plan.basis_size as f64;
    let denom = if plan.bounded_coherence {
        1.0 - plan.rho
    } else {
        let slack = 1.0 - 1.0 / p - plan.rho;
        if slack <= 0.0 {
            return Err(Error::InfeasibleRho {
                rho: plan.rho,
                limit: 1.0 - 1.0 / p,
            });
        }
        slack
    };
    let error_energy = match plan.eps_m2 {
        None => 4.0 * plan.eps2,
        Some(eps_m2) => 8.0 * (plan.eps2 + eps_m2),
    };
    let budget_term = error_energy / plan.tau * p;
    let stability_term = 10.0 * p * (2.0 * p / denom).ln();
    let n = (plan.nu * budget_term.max(stability_term)).ceil();
    if !n.is_finite() {
        return Err(Error::InvalidParameter {
            name: "plan",
            reason: "sample count overflowed; loosen tau or rho".into(),
        });
    }
    Ok(n as usize)
}

/// Upper bound on the conditional mean squared error of the fit given the
/// stable-spectrum event: `eps2 (1 + 4 mu2 / N)` without noise, and
/// `eps2 + 8 mu2 (eps2 + eps_m2) / N` with it.
pub fn mse_bound(eps2: f64, eps_m2: f64, mu2: f64, n: usize) -> f64 {
    let nf = n as f64;
    if eps_m2 == 0.0 {
        eps2 * (1.0 + 4.0 * mu2 / nf)
    } else {
        eps2 + 8.0 * mu2 * (eps2 + eps_m2) / nf
    }
}

/// Upper bound on the probability that the weighted system's spectrum
/// leaves the stable interval, clipped to 1. Unbounded-coherence schemes
/// pay an extra `1/P`.
pub fn failure_prob_bound(n: usize, mu2: f64, basis_size: usize, bounded_coherence: bool) -> f64 {
    let p = basis_size as f64;
    let chernoff = 2.0 * p * (-0.1 * n as f64 / mu2).exp();
    let extra = if bounded_coherence { 0.0 } else { 1.0 / p };
    (chernoff + extra).min(1.0)
}

/// Upper bound on the probability that the squared fit error exceeds
/// `(1 + tau)` times the best achievable, combining the spectral failure
/// bound with a mean-over-budget term, clipped to 1.
pub fn markov_tail_bound(
    n: usize,
    mu2: f64,
    basis_size: usize,
    eps2: f64,
    eps_m2: f64,
    tau: f64,
    bounded_coherence: bool,
) -> f64 {
    let p = basis_size as f64;
    let chernoff = 2.0 * p * (-0.1 * n as f64 / mu2).exp();
    let extra = if bounded_coherence { 0.0 } else { 1.0 / p };
    let coefficient = if eps_m2 == 0.0 { 4.0 } else { 8.0 };
    let markov = coefficient * (mu2 / n as f64) * (eps2 + eps_m2) / tau;
    (extra + chernoff + markov).min(1.0)
}

/// Largest singular value of `M - I`, where `M` is the sample Gram matrix
/// of the weighted design, along with the stability verdict `sigma <= 1/2`.
///
/// Batches carry weights without the density normalization constant, so
/// the raw Gram matrix converges to a scalar multiple of the identity.
/// The constant is restored by rescaling the Gram matrix so its trace
/// matches the identity's. For exact inverse-envelope weights the raw
/// trace is 1 regardless of the draw, making the restored constant exact
/// rather than estimated.
pub fn spectral_stability<T: Real + RealField>(design: &DesignSystem<T>) -> Result<(T, bool)> {
    let a = design.matrix();
    for &entry in a.iter() {
        if !Float::is_finite(entry) {
            return Err(Error::NonFinite {
                name: "design matrix",
                value: entry.to_f64_lossy(),
            });
        }
    }
    let n = design.n_samples();
    let p = design.n_terms();
    let scale = T::from_f64_lossy(1.0 / n as f64);
    let mut m = a.transpose() * a * scale;
    let trace = (0..p).fold(T::zero(), |acc, i| acc + m[(i, i)]);
    if !(trace > T::zero()) {
        return Err(Error::ZeroNorm {
            name: "weighted design rows",
        });
    }
    m *= T::from_f64_lossy(p as f64) / trace;
    for i in 0..p {
        m[(i, i)] -= T::one();
    }
    let sigma = largest_abs_eigenvalue(m);
    let half = T::from_f64_lossy(0.5);
    Ok((sigma, sigma <= half))
}

fn largest_abs_eigenvalue<T: Real + RealField>(m: DMatrix<T>) -> T {
    let eigenvalues = m.symmetric_eigenvalues();
    eigenvalues
        .iter()
        .map(|&ev| Float::abs(ev))
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}
