//! Surface-reaction model: a scalar coverage ODE driven by two lognormal
//! input channels, integrated by fixed-step RK4 with an embedded
//! adaptive integrator as accuracy oracle, a tensor-quadrature reference
//! expansion, and the sampling-strategy comparison study built on them.

use crate::basis::{Family, PcBasis, RowEvaluator};
use crate::error::{Error, Result};
use crate::quadrature::{for_each_tensor_node, gauss_rule};
use crate::regression::{assemble, solve_with};
use crate::sampling::{derive_seed, sample, SamplingStrategy, StrategyKind};
use crate::scalar::Real;

/// Inputs of the surface-coverage equation
/// `d rho/dt = alpha (1 - rho) - gamma rho - kappa (1 - rho)^2 rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceReactionParams {
    /// Adsorption rate.
    pub alpha: f64,
    /// Desorption rate.
    pub gamma: f64,
    /// Reaction rate.
    pub kappa: f64,
    /// Initial coverage, in `[0, 1]`.
    pub rho0: f64,
    /// Time the quantity of interest is read off at.
    pub t_end: f64,
    /// RK4 step size.
    pub step: f64,
}

impl SurfaceReactionParams {
    /// Parameters with the conventional reaction rate 10, initial coverage
    /// 0.9, horizon 4, and step 1e-3.
    pub fn new(alpha: f64, gamma: f64) -> Self {
        SurfaceReactionParams {
            alpha,
            gamma,
            kappa: 10.0,
            rho0: 0.9,
            t_end: 4.0,
            step: 1e-3,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "rates must be non-negative and finite".into(),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.rho0) {
            return Err(Error::InvalidParameter {
                name: "rho0",
                reason: "initial coverage must lie in [0, 1]".into(),
            });
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: "horizon must be non-negative and finite".into(),
            });
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "step",
                reason: "step size must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Maps a two-dimensional standard-normal input to the model rates:
/// shifted lognormal adsorption `0.1 + exp(0.05 x1)` and desorption
/// `0.001 + 0.01 exp(0.05 x2)`, with the remaining fields at their
/// conventional values.
pub fn surface_reaction_inputs(xi: [f64; 2]) -> SurfaceReactionParams {
    SurfaceReactionParams::new(
        0.1 + (0.05 * xi[0]).exp(),
        0.001 + 0.01 * (0.05 * xi[1]).exp(),
    )
}

fn coverage_rate(rho: f64, p: &SurfaceReactionParams) -> f64 {
    let free = 1.0 - rho;
    p.alpha * free - p.gamma * rho - p.kappa * free * free * rho
}

fn rk4_step(rho: f64, h: f64, p: &SurfaceReactionParams) -> f64 {
    let k1 = coverage_rate(rho, p);
    let k2 = coverage_rate(rho + 0.5 * h * k1, p);
    let k3 = coverage_rate(rho + 0.5 * h * k2, p);
    let k4 = coverage_rate(rho + h * k3, p);
    rho + h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)
}

fn integrate(params: &SurfaceReactionParams, mut visit: impl FnMut(f64, f64)) -> Result<f64> {
    params.validate()?;
    let mut rho = params.rho0;
    let mut t = 0.0;
    visit(t, rho);
    let full_steps = (params.t_end / params.step).floor() as u64;
    for k in 0..full_steps {
        rho = rk4_step(rho, params.step, params);
        t = (k + 1) as f64 * params.step;
        if !rho.is_finite() {
            return Err(Error::IntegrationFailed { t });
        }
        visit(t, rho);
    }
    let remainder = params.t_end - full_steps as f64 * params.step;
    if remainder > f64::EPSILON * params.t_end {
        rho = rk4_step(rho, remainder, params);
        t = params.t_end;
        if !rho.is_finite() {
            return Err(Error::IntegrationFailed { t });
        }
        visit(t, rho);
    }
    Ok(rho)
}

/// Coverage at `t_end`, by classical fourth-order Runge-Kutta at the fixed
/// step in `params`; a shorter final step lands exactly on the horizon.
pub fn surface_reaction_qoi(params: &SurfaceReactionParams) -> Result<f64> {
    integrate(params, |_, _| {})
}

/// Full fixed-step trajectory as `(t, rho)` pairs, starting at `(0, rho0)`.
pub fn surface_reaction_trajectory(params: &SurfaceReactionParams) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    integrate(params, |t, rho| out.push((t, rho)))?;
    Ok(out)
}

/// Coverage at `t_end` by an embedded adaptive Runge-Kutta 4(5) pair with
/// per-step error control at `tol`, used as the accuracy oracle for the
/// fixed-step integrator. The step in `params` is ignored.
pub fn adaptive_reference(params: &SurfaceReactionParams, tol: f64) -> Result<f64> {
    params.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "error tolerance must be positive".into(),
        });
    }
    let mut rho = params.rho0;
    let mut t = 0.0;
    let mut h = 1e-4;
    let mut rejected_in_a_row = 0u32;
    while t < params.t_end {
        if h > params.t_end - t {
            h = params.t_end - t;
        }
        let k1 = coverage_rate(rho, params);
        let k2 = coverage_rate(rho + h * 0.25 * k1, params);
        let k3 = coverage_rate(rho + h * (3.0 / 32.0 * k1 + 9.0 / 32.0 * k2), params);
        let k4 = coverage_rate(
            rho + h * (1932.0 / 2197.0 * k1 - 7200.0 / 2197.0 * k2 + 7296.0 / 2197.0 * k3),
            params,
        );
        let k5 = coverage_rate(
            rho + h
                * (439.0 / 216.0 * k1 - 8.0 * k2 + 3680.0 / 513.0 * k3 - 845.0 / 4104.0 * k4),
            params,
        );
        let k6 = coverage_rate(
            rho + h
                * (-8.0 / 27.0 * k1 + 2.0 * k2 - 3544.0 / 2565.0 * k3 + 1859.0 / 4104.0 * k4
                    - 11.0 / 40.0 * k5),
            params,
        );
        let fifth = rho
            + h * (16.0 / 135.0 * k1 + 6656.0 / 12825.0 * k3 + 28561.0 / 56430.0 * k4
                - 9.0 / 50.0 * k5
                + 2.0 / 55.0 * k6);
        let fourth = rho
            + h * (25.0 / 216.0 * k1 + 1408.0 / 2565.0 * k3 + 2197.0 / 4104.0 * k4
                - 1.0 / 5.0 * k5);
        if !fifth.is_finite() {
            return Err(Error::IntegrationFailed { t });
        }
        let err = (fifth - fourth).abs();
        let scale = tol * (1.0 + rho.abs());
        if err <= scale {
            t += h;
            rho = fifth;
            rejected_in_a_row = 0;
        } else {
            rejected_in_a_row += 1;
            if rejected_in_a_row > 60 {
                return Err(Error::IntegrationFailed { t });
            }
        }
        let factor = if err > 0.0 {
            0.9 * (scale / err).powf(0.2)
        } else {
            5.0
        };
        h *= factor.clamp(0.2, 5.0);
        if h < 1e-15 {
            return Err(Error::IntegrationFailed { t });
        }
    }
    Ok(rho)
}

/// Projects a quantity of interest onto the basis by tensor Gaussian
/// quadrature: `c_k = sum_q weight_q qoi(node_q) psi_k(node_q)`. Exact when
/// the integrand is a polynomial the rule resolves.
pub fn quadrature_reference<T: Real, F>(
    basis: &PcBasis<T>,
    mut qoi: F,
    n_per_dim: usize,
) -> Result<Vec<T>>
where
    F: FnMut(&[T]) -> Result<T>,
{
    if n_per_dim < basis.order() + 1 {
        return Err(Error::InvalidParameter {
            name: "n_per_dim",
            reason: format!(
                "{} nodes per dimension cannot resolve order {}",
                n_per_dim,
                basis.order()
            ),
        });
    }
    let rule = gauss_rule::<T>(basis.family(), n_per_dim)?;
    let d = basis.dimension();
    let mut evaluator = RowEvaluator::new(basis);
    let mut row = vec![T::zero(); basis.len()];
    let mut coefficients = vec![T::zero(); basis.len()];
    for_each_tensor_node(&rule, d, |point: &[T], weight: T| {
        let value = qoi(point)?;
        evaluator.row_into(point, &mut row)?;
        for (c, &psi) in coefficients.iter_mut().zip(&row) {
            *c = *c + weight * value * psi;
        }
        Ok(())
    })?;
    Ok(coefficients)
}

/// Configuration of the sampling-strategy comparison on the
/// surface-reaction quantity of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeStudyConfig {
    /// Strategies to compare.
    pub strategies: Vec<SamplingStrategy>,
    /// Sample counts, strictly ascending; smaller batches are prefixes of
    /// larger ones within each replication.
    pub n_grid: Vec<usize>,
    /// Independent replications per strategy.
    pub replications: usize,
    /// Total order of the fitted expansion in the two input channels.
    pub order: usize,
    /// Nodes per dimension of the tensor rule behind the reference
    /// coefficients.
    pub n_per_dim: usize,
    /// RK4 step for every model evaluation.
    pub step: f64,
    /// Root seed; every replication derives its own stream.
    pub seed: u64,
    /// Worker threads for the replication loop. Results are identical for
    /// any value.
    pub jobs: usize,
}

impl Default for OdeStudyConfig {
    fn default() -> Self {
        OdeStudyConfig {
            strategies: vec![
                SamplingStrategy::Standard,
                SamplingStrategy::Asymptotic,
                SamplingStrategy::coherence_optimal(),
            ],
            n_grid: vec![700, 1000, 1300],
            replications: 50,
            order: 32,
            n_per_dim: 100,
            step: 1e-3,
            seed: 0,
            jobs: 1,
        }
    }
}

/// One row of the study: error statistics for a strategy at one sample
/// count.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeCell {
    /// Sampling strategy.
    pub kind: StrategyKind,
    /// Sample count.
    pub n_samples: usize,
    /// Replications aggregated.
    pub replications: usize,
    /// Mean over replications of the coefficient-space relative error
    /// against the quadrature reference.
    pub mean_rel_rmse: f64,
    /// Sample standard deviation of the same.
    pub std_rel_rmse: f64,
    /// Fraction of replications whose design was rank-deficient.
    pub rank_deficient_fraction: f64,
    /// Per-replication relative errors, in replication order.
    pub rel_rmse: Vec<f64>,
}

/// Fits the surface-reaction quantity of interest with every strategy at
/// every sample count and reports relative errors against the tensor
/// quadrature reference, in coefficient space.
pub fn ode_study(config: &OdeStudyConfig) -> Result<Vec<OdeCell>> {
    super::check_ascending_grid("n_grid", &config.n_grid)?;
    super::check_jobs(config.jobs)?;
    if config.replications == 0 {
        return Err(Error::InvalidParameter {
            name: "replications",
            reason: "study needs at least one replication".into(),
        });
    }
    if config.strategies.is_empty() {
        return Err(Error::InvalidParameter {
            name: "strategies",
            reason: "study needs at least one strategy".into(),
        });
    }
    let basis = PcBasis::<f64>::new(Family::Hermite, 2, config.order)?;
    let step = config.step;
    let evaluate = move |point: &[f64]| -> Result<f64> {
        let mut params = surface_reaction_inputs([point[0], point[1]]);
        params.step = step;
        surface_reaction_qoi(&params)
    };
    let c_ref = quadrature_reference(&basis, evaluate, config.n_per_dim)?;
    let ref_norm = c_ref.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(ref_norm > 0.0) {
        return Err(Error::ZeroNorm {
            name: "reference coefficients",
        });
    }

    let n_max = *config.n_grid.last().expect("grid is nonempty");
    let mut cells = Vec::with_capacity(config.strategies.len() * config.n_grid.len());
    for (si, strategy) in config.strategies.iter().enumerate() {
        let per_rep: Vec<Vec<(f64, bool)>> =
            super::run_indexed(config.jobs, config.replications, |rep| {
                let seed = derive_seed(config.seed, &[si as u64, rep as u64]);
                let batch = sample(&basis, strategy, n_max, seed)?;
                let values = batch
                    .iter_points()
                    .map(evaluate)
                    .collect::<Result<Vec<f64>>>()?;
                config
                    .n_grid
                    .iter()
                    .map(|&n| {
                        let sub = batch.prefix(n);
                        let design = assemble(&basis, &sub, &values[..n])?;
                        let fit = solve_with(&design, false)?;
                        let err_sq: f64 = fit
                            .coefficients
                            .iter()
                            .zip(&c_ref)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        Ok((err_sq.sqrt() / ref_norm, fit.rank_deficient))
                    })
                    .collect::<Result<Vec<(f64, bool)>>>()
            })?;

        for (ni, &n) in config.n_grid.iter().enumerate() {
            let errors: Vec<f64> = per_rep.iter().map(|rep| rep[ni].0).collect();
            let deficient = per_rep.iter().filter(|rep| rep[ni].1).count();
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            let std = if errors.len() > 1 {
                (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                    / (errors.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            cells.push(OdeCell {
                kind: strategy.kind(),
                n_samples: n,
                replications: config.replications,
                mean_rel_rmse: mean,
                std_rel_rmse: std,
                rank_deficient_fraction: deficient as f64 / config.replications as f64,
                rel_rmse: errors,
            });
        }
    }
    Ok(cells)
}
