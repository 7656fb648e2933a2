//! Schwarz symmetrization of radial profiles and the rearrangement
//! inequalities it satisfies.

use crate::error::{Error, Result};
use crate::kernel::SplitOracle;
use crate::radial::{grad_norm, DimensionParams, RadialProfile};

/// Bisection steps for each rearranged nodal value.
const LEVEL_BISECTIONS: usize = 64;

/// `|{r in [r_0, R] : v(r) > t}|` for the piecewise-linear interpolant of `v`,
/// measured with `omega r^{N-1} dr`.
fn superlevel_volume(nodes: &[f64], values: &[f64], t: f64, p: &DimensionParams) -> f64 {
    let n = p.n as i32;
    let mut acc = 0.0;
    for k in 0..nodes.len() - 1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let (va, vb) = (values[k], values[k + 1]);
        if va > t && vb > t {
            acc += b.powi(n) - a.powi(n);
        } else if va > t || vb > t {
            let cross = a + (t - va) / (vb - va) * (b - a);
            acc += if va > t { cross.powi(n) - a.powi(n) } else { b.powi(n) - cross.powi(n) };
        }
    }
    p.omega * acc / p.dim()
}

/// The nonincreasing rearrangement of `v` with respect to `omega r^{N-1} dr`.
///
/// The distribution function of the piecewise-linear interpolant is inverted
/// at the enclosed volume of every node, so the nodal values of `v*` are exact
/// for the interpolant. Nonincreasing input is already symmetric and is
/// returned as is.
pub fn schwarz_symmetrize(v: &RadialProfile, p: &DimensionParams) -> Result<RadialProfile> {
    if let Some(j) = v.first_negative() {
        return Err(Error::Domain(format!(
            "symmetrization needs a nonnegative profile; value {} at r = {}",
            v.values()[j],
            v.grid().r(j)
        )));
    }
    if v.is_nonincreasing(0.0) {
        return Ok(v.clone());
    }
    let nodes = v.grid().nodes();
    let vals = v.values();
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let bottom = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let r0 = nodes[0].powi(p.n as i32);
    let values = nodes
        .iter()
        .map(|&r| {
            let target = p.omega * (r.powi(p.n as i32) - r0) / p.dim();
            // largest t with |{v > t}| > target
            let (mut lo, mut hi) = (bottom, top);
            if superlevel_volume(nodes, vals, lo, p) <= target {
                return lo;
            }
            for _ in 0..LEVEL_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if superlevel_volume(nodes, vals, mid, p) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    v.with_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszReport {
    /// `b+(v*) - b+(v)`, nonnegative in exact arithmetic.
    pub bplus_gap: f64,
    /// `b-(v) - b-(v*)`, nonnegative in exact arithmetic.
    pub bminus_gap: f64,
    /// `|grad v|_N - |grad v*|_N`, nonnegative in exact arithmetic.
    pub polya_gap: f64,
}

impl RieszReport {
    pub const CSV_HEADER: &'static str = "seed,bplus_gap,bminus_gap,polya_gap";

    pub fn csv_row(&self, seed: u64) -> String {
        format!("{seed},{},{},{}", self.bplus_gap, self.bminus_gap, self.polya_gap)
    }

    pub fn min_gap(&self) -> f64 {
        self.bplus_gap.min(self.bminus_gap).min(self.polya_gap)
    }
}

/// Gaps of the Riesz and Polya-Szego inequalities for `v`, using a prebuilt
/// oracle (reusable across profiles on the same grid).
pub fn riesz_check_with(
    oracle: &SplitOracle,
    v: &RadialProfile,
    p: &DimensionParams,
) -> Result<RieszReport> {
    let star = schwarz_symmetrize(v, p)?;
    let (plus, minus) = oracle.split(v, v);
    let (plus_star, minus_star) = oracle.split(&star, &star);
    Ok(RieszReport {
        bplus_gap: plus_star - plus,
        bminus_gap: minus - minus_star,
        polya_gap: grad_norm(v, p) - grad_norm(&star, p),
    })
}

pub fn riesz_check(
    v: &RadialProfile,
    p: &DimensionParams,
    angular_nodes: usize,
) -> Result<RieszReport> {
    let oracle = SplitOracle::new(v.grid(), p, angular_nodes)?;
    riesz_check_with(&oracle, v, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{dim_params, lp_norm, RadialGrid};
    use crate::samples::random_smooth_profile;
    use std::sync::Arc;

    #[test]
    fn annulus_step_moves_to_the_centre() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 2000).unwrap());
        let v = RadialProfile::from_fn(g, |r| if r >= 0.5 { 1.0 } else { 0.0 }).unwrap();
        let s = schwarz_symmetrize(&v, &p2).unwrap();
        assert!(s.is_nonincreasing(1e-12));
        let edge = 0.75f64.sqrt();
        for (&r, &x) in s.grid().nodes().iter().zip(s.values()) {
            if r < edge - 2e-3 {
                assert!((x - 1.0).abs() < 1e-12, "r = {r}, v* = {x}");
            } else if r > edge + 2e-3 {
                assert!(x.abs() < 1e-12, "r = {r}, v* = {x}");
            }
        }
    }

    #[test]
    fn decreasing_profiles_are_fixed_points() {
        let p3 = dim_params(3).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 64).unwrap());
        let v = RadialProfile::from_fn(g.clone(), |r| 1.0 - r * r).unwrap();
        assert_eq!(schwarz_symmetrize(&v, &p3).unwrap(), v);
        let z = RadialProfile::zeros(g);
        assert_eq!(schwarz_symmetrize(&z, &p3).unwrap(), z);
        assert!(schwarz_symmetrize(&v.scaled(-1.0), &p3).is_err());
    }

    #[test]
    fn symmetrization_is_idempotent_and_preserves_norms() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 2048).unwrap());
        let v = random_smooth_profile(g, 3).unwrap();
        let s = schwarz_symmetrize(&v, &p2).unwrap();
        assert_eq!(schwarz_symmetrize(&s, &p2).unwrap(), s);
        for q in [1.0, 2.0, 4.0] {
            let a = lp_norm(&v, q, &p2).unwrap();
            let b = lp_norm(&s, q, &p2).unwrap();
            assert!((a - b).abs() <= 1e-6 * a, "p = {q}: {a} vs {b}");
        }
    }
}
