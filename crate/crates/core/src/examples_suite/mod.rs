//! The three example families of strictly dominated `h`-transforms, as
//! runnable experiments: size-biased sampling of critical branching
//! diffusions, ratios of Vandermonde determinants along Dyson Brownian motion,
//! and planar Brownian motion conditioned to leave the unit disc through an arc.

mod disc;
mod size_biased;
mod vandermonde;

pub use disc::{
    conditioned_exit_expectation, conditioned_exit_profile, disc_exit_frequency,
    disc_harmonic_measure, ConditionedExit, DiscArc, DISC_MAX_STEP,
};
pub use size_biased::{
    coordinate_share, ratio_martingale_check, size_biased_expectations, SizeBiasedConfig,
    SizeBiasedRow,
};
pub use vandermonde::{
    dyson_ratio_expectation, inverse_entry_expectation, vandermonde, vandermonde_control,
    vandermonde_inverse, vandermonde_inverse_last_row, VANDERMONDE_TRANSFORM_VARIANCE,
};

use std::sync::Arc;

use crate::error::Result;
use crate::grid::TimeGrid;

/// Simulation grid that starts at 0 and contains every time of `grid`, with
/// the index of each requested time.
pub(crate) fn anchored(grid: &TimeGrid<f64>) -> Result<(Arc<TimeGrid<f64>>, Vec<usize>)> {
    let times = grid.times();
    if times[0] == 0.0 {
        return Ok((Arc::new(grid.clone()), (0..times.len()).collect()));
    }
    let mut with_zero = Vec::with_capacity(times.len() + 1);
    with_zero.push(0.0);
    with_zero.extend_from_slice(times);
    Ok((Arc::new(TimeGrid::from_times(with_zero)?), (1..=times.len()).collect()))
}
