//! Recovery-probability curves on manufactured expansions: plant random
//! coefficients, synthesize observations at sampled points, refit, and
//! count how often the fit lands within a relative-error threshold.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::basis::{Family, PcBasis, RowEvaluator};
use crate::error::{Error, Result};
use crate::regression::{
    apply_noise, assemble, recovery_success, solve_with, NoiseModel, DEFAULT_RECOVERY_THRESHOLD,
};
use crate::sampling::{derive_seed, sample, SamplingStrategy, StrategyKind};
use crate::scalar::Real;

use super::check_ascending_grid;

/// Configuration of a recovery-probability experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    /// Polynomial family of the planted expansion.
    pub family: Family,
    /// Input dimension.
    pub dimension: usize,
    /// Total order.
    pub order: usize,
    /// Strategies to compare; each sees the same planted coefficients per
    /// replication.
    pub strategies: Vec<SamplingStrategy>,
    /// Sample counts, strictly ascending; smaller batches are prefixes of
    /// larger ones within a replication, so curves are coupled across the
    /// grid.
    pub n_grid: Vec<usize>,
    /// Independent replications.
    pub replications: usize,
    /// Observation noise applied to the synthesized values.
    pub noise: NoiseModel,
    /// Relative-error threshold that counts as a successful recovery.
    pub threshold: f64,
    /// Root seed.
    pub seed: u64,
    /// Worker threads for the replication loop. Results are identical for
    /// any value.
    pub jobs: usize,
}

impl RecoveryConfig {
    /// Noiseless configuration at the default success threshold.
    pub fn new(family: Family, dimension: usize, order: usize) -> Self {
        RecoveryConfig {
            family,
            dimension,
            order,
            strategies: vec![
                SamplingStrategy::Standard,
                SamplingStrategy::Asymptotic,
                SamplingStrategy::coherence_optimal(),
            ],
            n_grid: Vec::new(),
            replications: 100,
            noise: NoiseModel::None,
            threshold: DEFAULT_RECOVERY_THRESHOLD,
            seed: 0,
            jobs: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        check_ascending_grid("n_grid", &self.n_grid)?;
        super::check_jobs(self.jobs)?;
        if self.replications == 0 {
            return Err(Error::InvalidParameter {
                name: "replications",
                reason: "experiment needs at least one replication".into(),
            });
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidParameter {
                name: "strategies",
                reason: "experiment needs at least one strategy".into(),
            });
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: "success threshold must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One point of a recovery curve: a strategy at one sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCell {
    /// Polynomial family.
    pub family: Family,
    /// Sampling strategy.
    pub kind: StrategyKind,
    /// Input dimension.
    pub dimension: usize,
    /// Total order.
    pub order: usize,
    /// Number of basis functions.
    pub basis_size: usize,
    /// Sample count.
    pub n_samples: usize,
    /// Relative noise level, zero when noiseless.
    pub noise_sigma: f64,
    /// Replications aggregated.
    pub replications: usize,
    /// Fraction of replications recovered within the threshold.
    pub success_prob: f64,
    /// Per-replication outcomes, in replication order.
    pub successes: Vec<bool>,
}

/// Runs the experiment: for each replication, plant independent
/// standard-normal coefficients (shared across strategies), draw each
/// strategy's largest batch once, synthesize noisy observations, and refit
/// at every prefix length in the grid. A solver failure counts as an
/// unsuccessful recovery; structural errors propagate.
pub fn manufactured_recovery(config: &RecoveryConfig) -> Result<Vec<RecoveryCell>> {
    config.validate()?;
    let basis = PcBasis::<f64>::new(config.family, config.dimension, config.order)?;
    let n_max = *config.n_grid.last().expect("grid is nonempty");
    let noise_sigma = match config.noise {
        NoiseModel::None => 0.0,
        NoiseModel::RelativeGaussian { sigma_rel } => sigma_rel,
    };

    let mut cells = Vec::with_capacity(config.strategies.len() * config.n_grid.len());
    for (si, strategy) in config.strategies.iter().enumerate() {
        let per_rep: Vec<Vec<bool>> =
            super::run_indexed(config.jobs, config.replications, |rep| {
                let mut coeff_rng =
                    ChaCha12Rng::seed_from_u64(derive_seed(config.seed, &[0, rep as u64]));
                let c_true: Vec<f64> = (0..basis.len())
                    .map(|_| f64::standard_normal(&mut coeff_rng))
                    .collect();

                let batch_seed = derive_seed(config.seed, &[1, si as u64, rep as u64]);
                let batch = sample(&basis, strategy, n_max, batch_seed)?;

                let mut evaluator = RowEvaluator::new(&basis);
                let mut row = vec![0.0; basis.len()];
                let mut values = Vec::with_capacity(n_max);
                for point in batch.iter_points() {
                    evaluator.row_into(point, &mut row)?;
                    values.push(row.iter().zip(&c_true).map(|(psi, c)| psi * c).sum());
                }
                let noise_seed = derive_seed(config.seed, &[2, si as u64, rep as u64]);
                let observed = apply_noise(&values, &config.noise, noise_seed);

                config
                    .n_grid
                    .iter()
                    .map(|&n| {
                        let design = assemble(&basis, &batch.prefix(n), &observed[..n])?;
                        match solve_with(&design, false) {
                            Ok(fit) => {
                                recovery_success(&fit.coefficients, &c_true, config.threshold)
                            }
                            Err(Error::SolveFailed { .. }) => Ok(false),
                            Err(e) => Err(e),
                        }
                    })
                    .collect()
            })?;

        for (ni, &n) in config.n_grid.iter().enumerate() {
            let successes: Vec<bool> = per_rep.iter().map(|rep| rep[ni]).collect();
            let hits = successes.iter().filter(|&&s| s).count();
            cells.push(RecoveryCell {
                family: config.family,
                kind: strategy.kind(),
                dimension: config.dimension,
                order: config.order,
                basis_size: basis.len(),
                n_samples: n,
                noise_sigma,
                replications: config.replications,
                success_prob: hits as f64 / config.replications as f64,
                successes,
            });
        }
    }
    Ok(cells)
}
