//! Midpoint-rule quadrature on uniform tensor grids.
//!
//! The grid is cut into `parallel_chunks` contiguous slabs of the flattened
//! index. Each slab is summed pairwise and the slab sums are combined in slab
//! order, so a result depends only on `(points_per_axis, parallel_chunks)`
//! and never on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest number of grid points a single evaluation may visit.
pub const GRID_POINT_BUDGET: u64 = 1 << 27;

const BLOCK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub parallel_chunks: usize,
}

impl GridSpec {
    pub const DEFAULT_CHUNKS: usize = 64;

    pub fn new(points_per_axis: usize, parallel_chunks: usize) -> Result<Self> {
        if points_per_axis < 2 || !points_per_axis.is_multiple_of(2) {
            return invalid(format!(
                "points per axis must be even and at least 2, got {points_per_axis}"
            ));
        }
        if parallel_chunks == 0 {
            return invalid("at least one parallel chunk is required");
        }
        Ok(Self {
            points_per_axis,
            parallel_chunks,
        })
    }

    pub fn with_points(points_per_axis: usize) -> Result<Self> {
        Self::new(points_per_axis, Self::DEFAULT_CHUNKS)
    }

    /// 256 points per axis in R², 64 in R³, 32 in R⁴, 16 beyond.
    pub fn integrator_default(n: usize) -> Self {
        let m = match n {
            0..=2 => 256,
            3 => 64,
            4 => 32,
            _ => 16,
        };
        Self::with_points(m).expect("defaults are valid")
    }

    /// 512 points per axis in R², 96 in R³, 32 beyond.
    pub fn kakeya_default(n: usize) -> Self {
        let m = match n {
            0..=2 => 512,
            3 => 96,
            _ => 32,
        };
        Self::with_points(m).expect("defaults are valid")
    }

    /// Same chunking at half the resolution (used for residual estimates).
    pub fn coarser(&self) -> Self {
        Self {
            points_per_axis: (self.points_per_axis / 2).max(1),
            parallel_chunks: self.parallel_chunks,
        }
    }

    fn check_budget(&self, n: usize) -> Result<u64> {
        let points = (self.points_per_axis as u128).pow(n as u32);
        if points > GRID_POINT_BUDGET as u128 {
            let mut suggested = 2usize;
            while ((suggested + 2) as u128).pow(n as u32) <= GRID_POINT_BUDGET as u128 {
                suggested += 2;
            }
            return Err(Error::Resource {
                points,
                budget: GRID_POINT_BUDGET,
                suggested,
            });
        }
        Ok(points as u64)
    }
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `∫_{[lo,hi]^n} f` by the midpoint rule. `init` builds per-slab scratch
/// state handed to every call of `f`.
pub(crate) fn midpoint_integral<S, I, F>(n: usize, grid: &GridSpec, lo: f64, hi: f64, init: I, f: F) -> Result<f64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &[f64]) -> f64 + Sync,
{
    let total = grid.check_budget(n)?;
    let m = grid.points_per_axis;
    let h = (hi - lo) / m as f64;
    let chunks = (grid.parallel_chunks as u64).min(total.max(1));
    let slab_sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = total * c / chunks;
            let end = total * (c + 1) / chunks;
            let mut state = init();
            let mut idx = vec![0usize; n];
            let mut rest = start;
            for axis in (0..n).rev() {
                idx[axis] = (rest % m as u64) as usize;
                rest /= m as u64;
            }
            let mut x: Vec<f64> = idx.iter().map(|&i| lo + (i as f64 + 0.5) * h).collect();
            let mut block = Vec::with_capacity(BLOCK);
            let mut block_sums = Vec::new();
            for _ in start..end {
                block.push(f(&mut state, &x));
                if block.len() == BLOCK {
                    block_sums.push(pairwise_sum(&block));
                    block.clear();
                }
                // Advance the odometer, last axis fastest.
                for axis in (0..n).rev() {
                    idx[axis] += 1;
                    if idx[axis] < m {
                        x[axis] = lo + (idx[axis] as f64 + 0.5) * h;
                        break;
                    }
                    idx[axis] = 0;
                    x[axis] = lo + 0.5 * h;
                }
            }
            if !block.is_empty() {
                block_sums.push(pairwise_sum(&block));
            }
            pairwise_sum(&block_sums)
        })
        .collect();
    Ok(pairwise_sum(&slab_sums) * h.powi(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(3, 4).is_err());
        assert!(GridSpec::new(0, 4).is_err());
        assert!(GridSpec::new(4, 0).is_err());
        assert_eq!(GridSpec::integrator_default(3).points_per_axis, 64);
        assert_eq!(GridSpec::kakeya_default(2).points_per_axis, 512);
    }

    #[test]
    fn integrates_polynomials() {
        let g = GridSpec::new(64, 7).unwrap();
        let v = midpoint_integral(2, &g, -1.0, 1.0, || (), |_, x| x[0] * x[0] + x[1]).unwrap();
        // Midpoint rule error for x² on [-1,1] is -h²/12·2 per axis extent.
        let h = 2.0 / 64.0;
        assert_abs_diff_eq!(v, 2.0 * (2.0 / 3.0 - h * h / 6.0), epsilon = 1e-12);
    }

    #[test]
    fn result_independent_of_thread_count() {
        let g = GridSpec::new(128, 13).unwrap();
        let f = |_: &mut (), x: &[f64]| (x[0] * 3.1).sin() * (x[1] * 1.7).cos() + x[0];
        let a = midpoint_integral(2, &g, -2.0, 2.0, || (), f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| midpoint_integral(2, &g, -2.0, 2.0, || (), f).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn over_budget_suggests_a_grid() {
        let g = GridSpec::new(1 << 10, 4).unwrap();
        match midpoint_integral(4, &g, 0.0, 1.0, || (), |_, _| 1.0) {
            Err(Error::Resource { suggested, .. }) => {
                assert!((suggested as u128).pow(4) <= GRID_POINT_BUDGET as u128);
                assert_eq!(suggested % 2, 0);
            }
            other => panic!("expected a resource error, got {other:?}"),
        }
    }
}
