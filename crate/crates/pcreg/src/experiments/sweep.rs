//! Coherence sweeps: empirical coherence estimates tabulated over a grid
//! of families, sampling strategies, dimensions, and orders.

use crate::basis::{Family, PcBasis};
use crate::coherence::{estimate_coherence, CoherenceReport};
use crate::error::{Error, Result};
use crate::sampling::{derive_seed, SamplingStrategy, StrategyKind};
use crate::scalar::Real;

use super::check_ascending_grid;

/// Grid of a coherence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Polynomial families to cover.
    pub families: Vec<Family>,
    /// Sampling strategies to cover.
    pub strategies: Vec<SamplingStrategy>,
    /// Dimensions, strictly ascending.
    pub d_grid: Vec<usize>,
    /// Total orders, strictly ascending; order zero is allowed.
    pub p_grid: Vec<usize>,
    /// Probe points per estimate.
    pub n_probe: usize,
    /// Root seed. Probe seeds depend on family, strategy, and dimension
    /// but not on order, so rows of a strategy whose distribution ignores
    /// the order reuse the same probe points across the order grid.
    pub seed: u64,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidParameter {
                name: "families",
                reason: "sweep needs at least one family".into(),
            });
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidParameter {
                name: "strategies",
                reason: "sweep needs at least one strategy".into(),
            });
        }
        check_ascending_grid("d_grid", &self.d_grid)?;
        check_ascending_grid("p_grid", &self.p_grid)?;
        Ok(())
    }
}

/// Estimates coherence for every grid cell, ordered family-major, then by
/// strategy, dimension, and order. The order-zero cell of the ball-based
/// Gaussian sampler is skipped: that sampler has no order-zero form.
pub fn coherence_sweep<T: Real>(config: &SweepConfig) -> Result<Vec<CoherenceReport<T>>> {
    config.validate()?;
    let mut rows = Vec::new();
    for (fi, &family) in config.families.iter().enumerate() {
        for (si, strategy) in config.strategies.iter().enumerate() {
            for &d in &config.d_grid {
                let seed = derive_seed(config.seed, &[fi as u64, si as u64, d as u64]);
                for &p in &config.p_grid {
                    let skip = family == Family::Hermite
                        && strategy.kind() == StrategyKind::Asymptotic
                        && p == 0;
                    if skip {
                        continue;
                    }
                    let basis = PcBasis::<T>::new(family, d, p)?;
                    rows.push(estimate_coherence(&basis, strategy, config.n_probe, seed)?);
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> SweepConfig {
        SweepConfig {
            families: vec![Family::Legendre, Family::Hermite],
            strategies: vec![
                SamplingStrategy::Standard,
                SamplingStrategy::Asymptotic,
                SamplingStrategy::coherence_optimal(),
            ],
            d_grid: vec![1, 2],
            p_grid: vec![0, 1, 2, 3],
            n_probe: 2000,
            seed: 9,
        }
    }

    #[test]
    fn sweep_covers_the_grid_minus_the_undefined_cell() {
        let rows = coherence_sweep::<f64>(&small_grid()).unwrap();
        // 2 families x 3 strategies x 2 dimensions x 4 orders, minus the
        // two order-zero ball-sampler cells.
        assert_eq!(rows.len(), 46);
        assert!(!rows.iter().any(|r| {
            r.family == Family::Hermite && r.kind == StrategyKind::Asymptotic && r.order == 0
        }));
    }

    #[test]
    fn coherence_optimal_rows_sit_at_the_basis_size() {
        let rows = coherence_sweep::<f64>(&small_grid()).unwrap();
        for row in rows
            .iter()
            .filter(|r| r.kind == StrategyKind::CoherenceOptimal)
        {
            let ratio = row.mu2_hat / row.basis_size as f64;
            assert!(
                (ratio - 1.0).abs() <= 1e-9,
                "d={} p={} ratio {ratio}",
                row.dimension,
                row.order
            );
        }
    }

    #[test]
    fn order_zero_rows_have_unit_coherence_under_exact_weights() {
        let rows = coherence_sweep::<f64>(&small_grid()).unwrap();
        for row in rows.iter().filter(|r| r.order == 0) {
            if row.kind == StrategyKind::Asymptotic {
                continue;
            }
            assert_eq!(row.basis_size, 1);
            assert!((row.mu2_hat - 1.0).abs() < 1e-12);
            assert!((row.mu_inf_hat - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_probes_make_orthogonality_sampler_rows_nested_in_order() {
        let rows = coherence_sweep::<f64>(&small_grid()).unwrap();
        for family in [Family::Legendre, Family::Hermite] {
            for d in [1usize, 2] {
                let mut column: Vec<(usize, f64)> = rows
                    .iter()
                    .filter(|r| {
                        r.family == family && r.kind == StrategyKind::Standard && r.dimension == d
                    })
                    .map(|r| (r.order, r.mu2_hat))
                    .collect();
                column.sort_by_key(|&(p, _)| p);
                assert_eq!(column.len(), 4);
                for pair in column.windows(2) {
                    assert!(
                        pair[0].1 <= pair[1].1 + 1e-12,
                        "{family:?} d={d}: {:?} above {:?}",
                        pair[0],
                        pair[1]
                    );
                }
            }
        }
    }

    #[test]
    fn sweep_is_reproducible() {
        let config = SweepConfig {
            families: vec![Family::Legendre],
            strategies: vec![SamplingStrategy::coherence_optimal()],
            d_grid: vec![2],
            p_grid: vec![2],
            n_probe: 500,
            seed: 42,
        };
        let a = coherence_sweep::<f64>(&config).unwrap();
        let b = coherence_sweep::<f64>(&config).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].mu2_hat, b[0].mu2_hat);
        assert_eq!(a[0].mu_inf_hat, b[0].mu_inf_hat);
    }

    #[test]
    fn sweep_validates_its_grids() {
        let mut config = small_grid();
        config.families.clear();
        assert!(matches!(
            coherence_sweep::<f64>(&config),
            Err(Error::InvalidParameter { name: "families", .. })
        ));

        let mut config = small_grid();
        config.p_grid = vec![2, 1];
        assert!(matches!(
            coherence_sweep::<f64>(&config),
            Err(Error::GridNotAscending { name: "p_grid" })
        ));

        let mut config = small_grid();
        config.d_grid.clear();
        assert!(matches!(
            coherence_sweep::<f64>(&config),
            Err(Error::EmptyGrid { name: "d_grid" })
        ));
    }
}
