//! Multiplier estimates and weak Euler-Lagrange residuals for maximizers,
//! and the potentials `h_u` (ball) and `f_u` (whole space).
//!
//! The weak equation tested against `phi` is
//!
//! ```text
//! omega int |u'|^{N-2} u' phi' r^{N-1} dr  [+ omega int |u|^{N-2} u phi r^{N-1} dr]
//!     = theta b0(G(u), g(u) phi)
//! ```
//!
//! with the bracket present on the whole space only. The log kernel is used
//! with unit normalization (`gamma_N = 1`).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::growth::GrowthSpec;
use crate::kernel::{b0_cross, nodal_masses, potential_log, potential_values};
use crate::maximize::Domain;
use crate::radial::{constraint_norm, radial_pair_integral, DimensionParams, RadialProfile};

fn check_ball_support(v: &RadialProfile, what: &str) -> Result<()> {
    match v
        .grid()
        .nodes()
        .iter()
        .zip(v.values())
        .position(|(&r, &x)| r > 1.0 && x != 0.0)
    {
        Some(j) => Err(Error::Domain(format!(
            "{what} must be supported in [0, 1]; nonzero at r = {}",
            v.grid().r(j)
        ))),
        None => Ok(()),
    }
}

/// `h(r) = ln(1/r) int_0^r rho^{N-1} v + int_r^1 rho^{N-1} ln(1/rho) v`.
pub fn h_ball(v: &RadialProfile, p: &DimensionParams) -> Result<RadialProfile> {
    check_ball_support(v, "h_ball density")?;
    let f = potential_log(v, p)?;
    f.map(|x| x / p.omega)
}

/// `ln(1/|.|) * v`, checked to be nonincreasing in `r`.
pub fn potential_f(v: &RadialProfile, p: &DimensionParams) -> Result<RadialProfile> {
    let f = potential_log(v, p)?;
    if let Some(j) = f.values().windows(2).position(|w| w[1] > w[0] + 1e-9) {
        return Err(Error::Numerical(format!(
            "potential increases between r = {} and r = {}",
            f.grid().r(j),
            f.grid().r(j + 1)
        )));
    }
    Ok(f)
}

/// `G(u)`, cut to `[0, 1]` on the ball.
pub(crate) fn density(u: &RadialProfile, spec: &GrowthSpec, domain: Domain) -> Result<RadialProfile> {
    let v = spec.compose(u)?;
    Ok(match domain {
        Domain::Ball => v.restricted(1.0),
        Domain::Space => v,
    })
}

/// `theta = ||u||^N / b0(G(u), g(u) u)`, the multiplier from testing with `u`.
pub fn estimate_theta(
    u: &RadialProfile,
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
) -> Result<f64> {
    if u.values().iter().all(|&x| x == 0.0) {
        return Err(Error::Domain("multiplier is undefined at u = 0".into()));
    }
    let num = constraint_norm(u, domain.norm_kind(), p).powf(p.dim());
    let v = density(u, spec, domain)?;
    let test = spec.compose_derivative(u)?.product(u)?;
    let test = match domain {
        Domain::Ball => test.restricted(1.0),
        Domain::Space => test,
    };
    let den = b0_cross(&v, &test, p)?;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Degenerate(format!("b0(G(u), g(u) u) = {den}")));
    }
    Ok(num / den)
}

/// Hat functions used as test functions: centres and half-width.
pub fn test_centres(domain: Domain, radius: f64, n_test: usize) -> (Vec<f64>, f64) {
    let span = match domain {
        Domain::Ball => 1.0,
        Domain::Space => radius - 1.0,
    };
    let width = span / (n_test + 1) as f64;
    ((1..=n_test).map(|i| i as f64 * width).collect(), width)
}

/// One weak-equation test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElRow {
    pub centre: f64,
    pub lhs: f64,
    /// `b0(G(u), g(u) phi)` without the multiplier.
    pub rhs_unit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElReport {
    pub theta: f64,
    pub rows: Vec<ElRow>,
}

impl ElReport {
    pub fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for row in &self.rows {
            let rhs = self.theta * row.rhs_unit;
            worst = worst.max((row.lhs - rhs).abs());
            scale = scale.max(row.lhs.abs() + rhs.abs());
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Least-squares multiplier over the test family.
    pub fn theta_least_squares(&self) -> f64 {
        let num: f64 = self.rows.iter().map(|r| r.lhs * r.rhs_unit).sum();
        let den: f64 = self.rows.iter().map(|r| r.rhs_unit * r.rhs_unit).sum();
        num / den
    }

    /// `node,lhs,rhs,residual` per test plus a `summary` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,lhs,rhs,residual\n");
        for row in &self.rows {
            let rhs = self.theta * row.rhs_unit;
            let _ = writeln!(out, "{},{},{},{}", row.centre, row.lhs, rhs, row.lhs - rhs);
        }
        let max_lhs = self.rows.iter().map(|r| r.lhs.abs()).fold(0.0, f64::max);
        let max_rhs = self.rows.iter().map(|r| (self.theta * r.rhs_unit).abs()).fold(0.0, f64::max);
        let _ = writeln!(out, "summary,{max_lhs},{max_rhs},{}", self.residual());
        out
    }
}

fn hat(u: &RadialProfile, centre: f64, width: f64) -> Result<RadialProfile> {
    u.with_values(
        u.grid()
            .nodes()
            .iter()
            .map(|&r| (1.0 - (r - centre).abs() / width).max(0.0))
            .collect(),
    )
}

/// `omega int |u'|^{N-2} u' phi' r^{N-1} dr`, exact for piecewise-linear data.
pub fn quasilinear_form(u: &RadialProfile, phi: &RadialProfile, p: &DimensionParams) -> f64 {
    let nodes = u.grid().nodes();
    let n = p.n as i32;
    let su = u.slopes();
    let sp = phi.slopes();
    let sum: f64 = (0..su.len())
        .map(|k| {
            su[k].abs().powi(n - 2) * su[k] * sp[k] * (nodes[k + 1].powi(n) - nodes[k].powi(n))
        })
        .sum();
    p.omega * sum / p.dim()
}

/// `omega int |u|^{N-2} u phi r^{N-1} dr`, integrated cell by cell.
pub fn mass_form(u: &RadialProfile, phi: &RadialProfile, p: &DimensionParams) -> Result<f64> {
    let n = p.n as i32;
    radial_pair_integral(u, phi, p, |_, x, f| x.abs().powi(n - 2) * x * f)
}

fn weak_lhs(u: &RadialProfile, phi: &RadialProfile, domain: Domain, p: &DimensionParams) -> Result<f64> {
    let lhs = quasilinear_form(u, phi, p);
    Ok(match domain {
        Domain::Ball => lhs,
        Domain::Space => lhs + mass_form(u, phi, p)?,
    })
}

/// Both sides of the weak equation for `n_test` hats.
pub fn el_report(
    u: &RadialProfile,
    theta: f64,
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
    n_test: usize,
) -> Result<ElReport> {
    if n_test < 4 {
        return Err(Error::Usage(format!("need at least 4 test functions, got {n_test}")));
    }
    let v = density(u, spec, domain)?;
    let g = spec.compose_derivative(u)?;
    let (centres, width) = test_centres(domain, u.grid().radius(), n_test);
    let rows = centres
        .iter()
        .map(|&c| {
            let phi = hat(u, c, width)?;
            let lhs = weak_lhs(u, &phi, domain, p)?;
            let rhs_unit = b0_cross(&v, &g.product(&phi)?, p)?;
            Ok(ElRow { centre: c, lhs, rhs_unit })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ElReport { theta, rows })
}

/// `max_i |res_i| / max_i (|LHS_i| + |RHS_i|)` over `n_test` hats.
pub fn el_residual(
    u: &RadialProfile,
    theta: f64,
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
    n_test: usize,
) -> Result<f64> {
    Ok(el_report(u, theta, spec, domain, p, n_test)?.residual())
}

/// The same residual with the right side written through the Choquard
/// potential `w = ln(1/|.|) * G(u)`: `theta omega int g(u) phi w r^{N-1} dr`.
pub fn choquard_residual(
    u: &RadialProfile,
    theta: f64,
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
    n_test: usize,
) -> Result<f64> {
    if n_test < 4 {
        return Err(Error::Usage(format!("need at least 4 test functions, got {n_test}")));
    }
    let v = density(u, spec, domain)?;
    let w = potential_values(&v, p);
    let g = spec.compose_derivative(u)?;
    let (centres, width) = test_centres(domain, u.grid().radius(), n_test);
    let mut rows = Vec::with_capacity(n_test);
    for &c in &centres {
        let phi = hat(u, c, width)?;
        let mut test = g.product(&phi)?;
        if domain == Domain::Ball {
            test = test.restricted(1.0);
        }
        let m = nodal_masses(&test, p);
        let rhs_unit = p.omega * m.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        rows.push(ElRow { centre: c, lhs: weak_lhs(u, &phi, domain, p)?, rhs_unit });
    }
    Ok(ElReport { theta, rows }.residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{dim_params, RadialGrid};
    use std::sync::Arc;

    #[test]
    fn h_of_unit_indicator() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 4096).unwrap());
        let one = RadialProfile::from_fn(g, |_| 1.0).unwrap();
        let h = h_ball(&one, &p2).unwrap();
        assert!((h.values()[2048] - 0.1875).abs() < 1e-8);
        assert_eq!(h.values()[4096], 0.0);
        assert!(h.values()[1..4096].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn h_rejects_support_outside_the_ball() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(2.0, 8).unwrap());
        let one = RadialProfile::from_fn(g, |_| 1.0).unwrap();
        assert!(matches!(h_ball(&one, &p2), Err(Error::Domain(_))));
    }

    #[test]
    fn potential_f_ordering() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(2.0, 4096).unwrap());
        let v = RadialProfile::from_fn(g, |r| (1.0 - r * r).max(0.0)).unwrap();
        let f = potential_f(&v, &p2).unwrap();
        let at = |r: f64| f.values()[(r * 2048.0).round() as usize];
        assert!(at(0.5) > at(1.0) && at(1.0) > at(2.0));
        // mass 1/4 outside its support: f = -omega ln(r) / 4
        assert!((at(2.0) + std::f64::consts::PI * 2f64.ln() / 2.0).abs() < 1e-6, "{}", at(2.0));
        let z = RadialProfile::zeros(f.grid().clone());
        assert!(potential_f(&z, &p2).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn theta_scales_with_growth_constant() {
        let p2 = dim_params(2).unwrap();
        let spec = GrowthSpec::ball_critical(-1.5, 1.0, p2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 256).unwrap());
        let u = RadialProfile::from_fn(g, |r| 0.4 * (1.0 - r * r)).unwrap();
        let t1 = estimate_theta(&u, &spec, Domain::Ball, &p2).unwrap();
        let t2 = estimate_theta(&u, &spec.scaled(2.0).unwrap(), Domain::Ball, &p2).unwrap();
        assert!(t1 > 0.0);
        assert!((t2 - t1 / 4.0).abs() < 1e-12 * t1);
        let z = RadialProfile::zeros(u.grid().clone());
        assert!(matches!(estimate_theta(&z, &spec, Domain::Ball, &p2), Err(Error::Domain(_))));
    }

    #[test]
    fn residual_of_zero_space_profile_is_zero() {
        let p2 = dim_params(2).unwrap();
        let spec = GrowthSpec::space_critical(-1.5, 1.0, p2).unwrap();
        let z = RadialProfile::zeros(Arc::new(RadialGrid::uniform(8.0, 64).unwrap()));
        assert_eq!(el_residual(&z, 1.0, &spec, Domain::Space, &p2, 16).unwrap(), 0.0);
        assert!(matches!(el_residual(&z, 1.0, &spec, Domain::Space, &p2, 3), Err(Error::Usage(_))));
    }
}
