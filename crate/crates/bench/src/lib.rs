//! Shared fixtures for the criterion benchmarks.

use fracnoether::{Grid, GridFunction};

/// `sin(3t) + t²` on `[0, 1]` with `n` intervals.
pub fn smooth_sample(n: usize) -> GridFunction {
    let grid = Grid::new(0.0, 1.0, n).expect("valid grid");
    GridFunction::from_fn(grid, |t| (3.0 * t).sin() + t * t).expect("finite samples")
}
