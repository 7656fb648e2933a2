//! Seeded random profiles for experiments and tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::radial::{
    constraint_norm, DimensionParams, NormKind, RadialGrid, RadialProfile,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Piecewise-constant profile with `steps` equal-width steps on `[r_0, R]`
/// and heights drawn from `[0, 1)`, sampled at the grid nodes.
pub fn random_step_profile(grid: Arc<RadialGrid>, steps: usize, seed: u64) -> Result<RadialProfile> {
    let mut rng = rng(seed);
    let heights: Vec<f64> = (0..steps.max(1)).map(|_| rng.gen::<f64>()).collect();
    let (a, b) = (grid.r(0), grid.radius());
    RadialProfile::from_fn(grid, |r| {
        let k = (((r - a) / (b - a)) * heights.len() as f64) as usize;
        heights[k.min(heights.len() - 1)]
    })
}

/// Sum of three to five Gaussian bumps, damped to vanish at `R`.
///
/// Nonnegative and in general not monotone.
pub fn random_smooth_profile(grid: Arc<RadialGrid>, seed: u64) -> Result<RadialProfile> {
    let mut rng = rng(seed);
    let radius = grid.radius();
    let count = rng.gen_range(3..=5);
    let bumps: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(0.1..1.0),
                rng.gen_range(0.0..radius),
                rng.gen_range(0.05..0.25) * radius,
            )
        })
        .collect();
    RadialProfile::from_fn(grid, |r| {
        let x = r / radius;
        let sum: f64 = bumps
            .iter()
            .map(|(a, c, s)| a * (-(r - c) * (r - c) / (2.0 * s * s)).exp())
            .sum();
        sum * (1.0 - x * x)
    })
}

/// Nonincreasing nonnegative profile vanishing at `R`: a random mixture of
/// `(1 - (r/R)^k)^m` shapes plus a random staircase, normalized to `max = 1`.
pub fn random_decreasing_profile(grid: Arc<RadialGrid>, seed: u64) -> Result<RadialProfile> {
    let mut rng = rng(seed);
    let radius = grid.radius();
    let k = rng.gen_range(0.5..3.0);
    let m = rng.gen_range(1.0..3.0);
    let stair_weight = rng.gen_range(0.0..0.5);
    let stairs: Vec<f64> = {
        let mut cuts: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..radius)).collect();
        cuts.sort_by(f64::total_cmp);
        cuts
    };
    let u = RadialProfile::from_fn(grid, |r| {
        let x = (r / radius).min(1.0);
        let smooth = (1.0 - x.powf(k)).powf(m);
        let steps = stairs.iter().filter(|&&c| r < c).count() as f64 / stairs.len() as f64;
        smooth + stair_weight * steps * (1.0 - x)
    })?;
    let top = u.values().iter().cloned().fold(0.0, f64::max);
    Ok(if top > 0.0 { u.scaled(1.0 / top) } else { u })
}

/// A random decreasing profile scaled so that its constraint norm is drawn
/// from `[0.3, 1]`.
pub fn random_feasible_profile(
    grid: Arc<RadialGrid>,
    kind: NormKind,
    p: &DimensionParams,
    seed: u64,
) -> Result<RadialProfile> {
    let u = random_decreasing_profile(grid, seed)?;
    let target = rng(seed ^ 0x9e37_79b9_7f4a_7c15).gen_range(0.3..1.0);
    let norm = constraint_norm(&u, kind, p);
    Ok(if norm > 0.0 { u.scaled(target / norm) } else { u })
}
