//! Experiment harnesses: manufactured-coefficient recovery curves, the
//! surface-reaction sampling study, and coherence sweeps over basis and
//! strategy grids.

pub mod ode;
pub mod recovery;
pub mod sweep;

use crate::error::{Error, Result};

pub(crate) fn check_ascending_grid(name: &'static str, grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid { name });
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::GridNotAscending { name });
    }
    Ok(())
}

pub(crate) fn check_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Err(Error::InvalidParameter {
            name: "jobs",
            reason: "worker count must be at least one".into(),
        });
    }
    Ok(())
}

/// Maps `f` over `0..count`, on the calling thread when `jobs` is one and
/// on `jobs` scoped worker threads otherwise. Outputs are merged by index,
/// so the result never depends on scheduling.
pub(crate) fn run_indexed<O, F>(jobs: usize, count: usize, f: F) -> Result<Vec<O>>
where
    O: Send,
    F: Fn(usize) -> Result<O> + Sync,
{
    if jobs <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(jobs.min(count));
    let mut slots: Vec<Option<Result<O>>> = Vec::new();
    slots.resize_with(count, || None);
    std::thread::scope(|scope| {
        for (ci, slot_chunk) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in slot_chunk.iter_mut().enumerate() {
                    *slot = Some(f(ci * chunk + j));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every index was assigned to a worker"))
        .collect()
}


pub use ode::{
    adaptive_reference, ode_study, quadrature_reference, surface_reaction_inputs,
    surface_reaction_qoi, surface_reaction_trajectory, OdeCell, OdeStudyConfig,
    SurfaceReactionParams,
};
pub use recovery::{manufactured_recovery, RecoveryCell, RecoveryConfig};
pub use sweep::{coherence_sweep, SweepConfig};
