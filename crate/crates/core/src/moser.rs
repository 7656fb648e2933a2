//! Moser sequences and the blow-up of the ball energy above the threshold.
//!
//! `m_n(r) = omega^{-1/N} ln(1/r) / (ln n)^{1/N}` on `[1/n, 1]`, constant on
//! `[0, 1/n]`. Its gradient norm is exactly 1 for every `n >= 2`. On the
//! plateau `alpha_N m_n^{N/(N-1)} = N ln n`, which is used as an exact
//! identity so the energy can be assembled in log space.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::growth::GrowthSpec;
use crate::kernel::b0_radial;
use crate::radial::{grad_norm, DimensionParams, RadialGrid, RadialProfile};

/// `s_0` of the at-least growth condition.
pub const AT_LEAST_THRESHOLD: f64 = 1.0;

const MOSER_GRID_NODES: usize = 4096;
const MIN_PLATEAU_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoserRow {
    pub n: u64,
    pub phi: f64,
    /// The analytic bound; only a proven bound when `bound_valid`.
    pub lower_bound: f64,
    pub grad_norm: f64,
    /// Whether the plateau value reaches `s_0 = 1`.
    pub bound_valid: bool,
}

impl MoserRow {
    pub const CSV_HEADER: &'static str = "n,phi,lower_bound,grad_norm";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.n, self.phi, self.lower_bound, self.grad_norm)
    }
}

fn check_n(n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("Moser index must be >= 2, got {n}")));
    }
    Ok((n as f64).ln())
}

/// Plateau value `omega^{-1/N} (ln n)^{(N-1)/N}`.
pub fn moser_plateau(n: u64, p: &DimensionParams) -> Result<f64> {
    let ln_n = check_n(n)?;
    Ok(p.omega.powf(-1.0 / p.dim()) * ln_n.powf((p.dim() - 1.0) / p.dim()))
}

/// Geometric grid on `[0, 1]` from `1e-8 min(1, 1/n)` with the kink `1/n` as a node.
pub fn moser_grid(n: u64) -> Result<RadialGrid> {
    check_n(n)?;
    let kink = 1.0 / n as f64;
    RadialGrid::geometric(1.0, 1e-8 * kink.min(1.0), MOSER_GRID_NODES)?.with_nodes(&[kink])
}

pub fn moser_profile(n: u64, p: &DimensionParams, grid: Arc<RadialGrid>) -> Result<RadialProfile> {
    let ln_n = check_n(n)?;
    let kink = 1.0 / n as f64;
    let inside = grid.nodes().iter().filter(|&&r| r < kink).count();
    if inside < MIN_PLATEAU_NODES {
        let r_min = grid
            .nodes()
            .iter()
            .copied()
            .find(|&r| r > 0.0)
            .unwrap_or(grid.r(0));
        return Err(Error::Usage(format!(
            "grid has {inside} nodes below 1/n = {kink}; need {MIN_PLATEAU_NODES} \
             (smallest positive radius {r_min}, use r_min <= {:e})",
            kink * 1e-2
        )));
    }
    let scale = p.omega.powf(-1.0 / p.dim());
    let plateau = scale * ln_n.powf((p.dim() - 1.0) / p.dim());
    let root = ln_n.powf(1.0 / p.dim());
    RadialProfile::from_fn(grid, |r| {
        if r <= kink {
            plateau
        } else if r < 1.0 {
            scale * (1.0 / r).ln() / root
        } else {
            0.0
        }
    })
}

/// `ln Phi(m_n)` together with the profile's gradient norm.
fn ln_phi_on_moser(n: u64, spec: &GrowthSpec) -> Result<(f64, f64)> {
    let p = spec.params();
    let ln_n = check_n(n)?;
    let grid = Arc::new(moser_grid(n)?);
    let u = moser_profile(n, p, grid.clone())?;
    let kink = 1.0 / n as f64;
    let plateau_exponent = p.dim() * ln_n;
    let nodes = grid.nodes();
    let logs = u
        .values()
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let result = if nodes[j] <= kink {
                spec.ln_value_with_exponent(s, plateau_exponent)
            } else {
                spec.ln_value(s)
            };
            result.map_err(|e| match e {
                Error::Saturation { s, .. } => Error::Saturation { s, radius: Some(nodes[j]) },
                other => other,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled = u.with_values(logs.iter().map(|l| (l - top).exp()).collect())?;
    let b = b0_radial(&scaled, p)?;
    if !(b > 0.0) {
        return Err(Error::Numerical(format!("nonpositive Moser energy {b} at n = {n}")));
    }
    Ok((2.0 * top + b.ln(), grad_norm(&u, p)))
}

/// `Phi(m_n) = b0(1_{B_1} G(m_n))` with the analytic lower bound.
pub fn phi_on_moser(n: u64, spec: &GrowthSpec) -> Result<MoserRow> {
    let p = spec.params();
    let (ln_phi, gn) = ln_phi_on_moser(n, spec)?;
    let (lower_bound, bound_valid) = match (spec.beta(), spec.at_least_constant()) {
        (Some(beta), Some(c1)) => {
            (blowup_bound_formula(n, beta, c1, p)?, moser_plateau(n, p)? >= AT_LEAST_THRESHOLD)
        }
        _ => (f64::NAN, false),
    };
    Ok(MoserRow { n, phi: ln_phi.exp(), lower_bound, grad_norm: gn, bound_valid })
}

/// Rows for several `n`, evaluated in parallel and sorted by `n`.
pub fn moser_table(ns: &[u64], spec: &GrowthSpec) -> Result<Vec<MoserRow>> {
    let mut rows = ns
        .par_iter()
        .map(|&n| phi_on_moser(n, spec))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.n);
    Ok(rows)
}

pub fn moser_table_csv(rows: &[MoserRow]) -> String {
    let mut out = format!("{}\n", MoserRow::CSV_HEADER);
    for row in rows {
        let _ = writeln!(out, "{}", row.csv_row());
    }
    out
}

fn blowup_bound_formula(n: u64, beta: f64, c1: f64, p: &DimensionParams) -> Result<f64> {
    let ln_n = check_n(n)?;
    let c2 = c1 * p.omega.powf(-beta / p.dim());
    Ok(p.omega * p.omega * c2 * c2 * ln_n.powf(threshold_exponent(p.n, beta)) / (p.dim() * p.dim()))
}

/// `omega^2 c_2^2 (ln n)^{2 beta (N-1)/N + 1} / N^2` with
/// `c_2 = c_1 omega^{-beta/N}`.
///
/// On `B_{1/n}` the density is at least `c_1 P^beta n^N` (`P` the plateau
/// value), and restricting the energy to `B_{1/n}` together with
/// `int_0^{1/n} r^{2N-1} ln(1/r) dr >= ln n / (2N n^{2N})` gives the bound.
/// It requires `P >= s_0 = 1`.
pub fn blowup_lower_bound(n: u64, beta: f64, c1: f64, p: &DimensionParams) -> Result<f64> {
    let plateau = moser_plateau(n, p)?;
    if plateau < AT_LEAST_THRESHOLD {
        return Err(Error::Domain(format!(
            "plateau value {plateau} at n = {n} is below s0 = {AT_LEAST_THRESHOLD}"
        )));
    }
    blowup_bound_formula(n, beta, c1, p)
}

/// `2 beta (N-1)/N + 1`, zero exactly at `beta = -N/(2(N-1))`.
pub fn threshold_exponent(n_dim: usize, beta: f64) -> f64 {
    let nf = n_dim as f64;
    (2.0 * beta * (nf - 1.0) + nf) / nf
}

/// Least-squares slope of `ln phi` against `ln ln n`.
pub fn log_log_slope(rows: &[MoserRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln().ln(), r.phi.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::dim_params;

    #[test]
    fn plateau_value() {
        let p2 = dim_params(2).unwrap();
        let v = moser_plateau(10, &p2).unwrap();
        assert!((v - 0.605_365_839_339_910_2).abs() < 1e-15);
        let u = moser_profile(10, &p2, Arc::new(moser_grid(10).unwrap())).unwrap();
        assert_eq!(*u.values().last().unwrap(), 0.0);
        assert!((u.values()[0] - v).abs() < 1e-15);
    }

    #[test]
    fn unresolved_spike_is_rejected() {
        let p2 = dim_params(2).unwrap();
        let coarse = Arc::new(RadialGrid::uniform(1.0, 16).unwrap());
        assert!(matches!(moser_profile(1000, &p2, coarse), Err(Error::Usage(_))));
    }

    #[test]
    fn threshold_exponent_values() {
        assert_eq!(threshold_exponent(2, -1.0), 0.0);
        assert_eq!(threshold_exponent(3, -0.75), 0.0);
        assert_eq!(threshold_exponent(2, -0.5), 0.5);
        for n in 2..=10 {
            let p = dim_params(n).unwrap();
            assert_eq!(threshold_exponent(n, p.beta_star()), 0.0, "N = {n}");
        }
    }

    #[test]
    fn bound_requires_plateau_above_one() {
        let p2 = dim_params(2).unwrap();
        assert!(blowup_lower_bound(100, -0.5, 1.0, &p2).is_err());
        let b4 = blowup_lower_bound(10_000, -0.5, 1.0, &p2).unwrap();
        let b5 = blowup_lower_bound(100_000, -0.5, 1.0, &p2).unwrap();
        assert!(b4 > 0.0 && b5 > b4);
        // (2 pi)^2 (2 pi)^{1/2} (ln 1e4)^{1/2} / 4
        let expected = (2.0 * std::f64::consts::PI).powf(2.5) * (1e4f64).ln().sqrt() / 4.0;
        assert!((b4 / expected - 1.0).abs() < 1e-13);
    }

    #[test]
    fn energy_exceeds_bound_at_n10() {
        let p2 = dim_params(2).unwrap();
        let spec = GrowthSpec::ball_critical(-0.5, 1.0, p2).unwrap();
        let row = phi_on_moser(10, &spec).unwrap();
        assert!(row.phi >= row.lower_bound);
        assert!((row.grad_norm - 1.0).abs() < 1e-4);
    }
}
