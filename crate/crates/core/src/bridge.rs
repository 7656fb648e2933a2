//! Passage between the whole space and the unit ball: the radial lemma, the
//! lift `U` of a whole-space profile into `W^{1,N}_0(B_1)`, truncation tails
//! and the two-profile functional `Phi_{beta1, beta2}`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::growth::GrowthSpec;
use crate::kernel::{l1_norm, nodal_masses, star_norm};
use crate::radial::{lp_norm, w1n_norm, DimensionParams, RadialProfile};

fn check_decreasing(u: &RadialProfile, what: &str) -> Result<()> {
    if let Some(j) = u.first_negative() {
        return Err(Error::Usage(format!(
            "{what} needs a nonnegative profile; value {} at r = {}",
            u.values()[j],
            u.grid().r(j)
        )));
    }
    if !u.is_nonincreasing(0.0) {
        return Err(Error::Usage(format!("{what} needs a nonincreasing profile")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBoundReport {
    pub holds: bool,
    /// Radius of the largest ratio `u(r) r / (C_N |u|_N)`.
    pub worst_radius: f64,
    pub worst_ratio: f64,
}

/// Checks `u(r) <= C_N |u|_N / r` at every node `r > 0`.
pub fn radial_bound_check(u: &RadialProfile, p: &DimensionParams) -> Result<RadialBoundReport> {
    check_decreasing(u, "radial lemma check")?;
    let norm = lp_norm(u, p.dim(), p)?;
    let mut report = RadialBoundReport { holds: true, worst_radius: 0.0, worst_ratio: 0.0 };
    if norm == 0.0 {
        return Ok(report);
    }
    for (&r, &x) in u.grid().nodes().iter().zip(u.values()) {
        if r <= 0.0 {
            continue;
        }
        let ratio = x * r / (p.c_n * norm);
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_radius = r;
        }
    }
    report.holds = report.worst_ratio <= 1.0 + 1e-12;
    Ok(report)
}

/// `U = (1 + u(1)^N / C_N^N)^{1/N} [u^{N/2} - u(1)^{N/2}]_+^{2/N}` on `[0, 1]`.
///
/// The result lives on the nodes of `u` inside `[0, 1]` plus the node `1`,
/// where it vanishes. For compactly supported `u` with `u(1) = 0` it equals
/// the restriction of `u`.
pub fn lift_to_ball(u: &RadialProfile, p: &DimensionParams) -> Result<RadialProfile> {
    check_decreasing(u, "lift")?;
    let norm = w1n_norm(u, p);
    if norm > 1.0 + 1e-9 {
        return Err(Error::Domain(format!("lift needs ||u|| <= 1, got {norm}")));
    }
    let grid = u.grid().with_nodes(&[1.0])?;
    let nodes: Vec<f64> = grid.nodes().iter().copied().filter(|&r| r <= 1.0).collect();
    let grid = Arc::new(crate::radial::RadialGrid::new(nodes)?);
    let nf = p.dim();
    let u1 = u.value_at(1.0);
    let factor = (1.0 + (u1 / p.c_n).powf(nf)).powf(1.0 / nf);
    let floor = u1.powf(nf / 2.0);
    RadialProfile::from_fn(grid, |r| {
        if r >= 1.0 {
            return 0.0;
        }
        let bracket = u.value_at(r).powf(nf / 2.0) - floor;
        if bracket > 0.0 {
            factor * bracket.powf(2.0 / nf)
        } else {
            0.0
        }
    })
}

/// Largest defect of `u^q <= U^q + u(1)^q + C_N^q` over the nodes of the lift
/// (positive means violated).
pub fn lift_inequality_defect(u: &RadialProfile, lift: &RadialProfile, p: &DimensionParams) -> f64 {
    let q = p.tm_exponent();
    let u1 = u.value_at(1.0);
    lift.grid()
        .nodes()
        .iter()
        .zip(lift.values())
        .map(|(&r, &big_u)| u.value_at(r).powf(q) - (big_u.powf(q) + u1.powf(q) + p.c_n.powf(q)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The functional
///
/// ```text
/// omega^2 int_0^1 r^{N-1} v1(r) ln(1/r) int_0^r rho^{N-1} v2(rho) drho dr,
/// v_i = (1 + |u_i|)^{beta_i} e^{alpha_N |u_i|^{N/(N-1)}}
/// ```
///
/// by one prefix-sum pass. Requires `beta_i <= 0` and
/// `beta1 + beta2 <= -N/(N-1)`.
pub fn eval_phi_beta(
    u1: &RadialProfile,
    u2: &RadialProfile,
    beta1: f64,
    beta2: f64,
    p: &DimensionParams,
) -> Result<f64> {
    let q = p.tm_exponent();
    if beta1 > 0.0 || beta2 > 0.0 || beta1 + beta2 > -q + 1e-12 {
        return Err(Error::Domain(format!(
            "need beta1, beta2 <= 0 and beta1 + beta2 <= {}, got {beta1}, {beta2}",
            -q
        )));
    }
    u1.check_same_grid(u2)?;
    for u in [u1, u2] {
        if let Some(j) = u
            .grid()
            .nodes()
            .iter()
            .zip(u.values())
            .position(|(&r, &x)| r > 1.0 && x != 0.0)
        {
            return Err(Error::Domain(format!(
                "profiles must be supported in [0, 1]; nonzero at r = {}",
                u.grid().r(j)
            )));
        }
    }
    let density = |u: &RadialProfile, beta: f64| -> Result<RadialProfile> {
        let values = u
            .values()
            .iter()
            .zip(u.grid().nodes())
            .map(|(&s, &r)| {
                if r > 1.0 {
                    return Ok(0.0);
                }
                let e = p.alpha_n * s.abs().powf(q);
                if e > crate::growth::EXP_LIMIT {
                    return Err(Error::Saturation { s, radius: Some(r) });
                }
                Ok((1.0 + s.abs()).powf(beta) * e.exp())
            })
            .collect::<Result<Vec<_>>>()?;
        u.with_values(values)
    };
    let m1 = nodal_masses(&density(u1, beta1)?, p);
    let m2 = nodal_masses(&density(u2, beta2)?, p);
    let nodes = u1.grid().nodes();
    let mut prefix = 0.0;
    let mut sum = 0.0;
    for j in 0..nodes.len() {
        if nodes[j] > 0.0 && nodes[j] <= 1.0 {
            sum += m1[j] * (-nodes[j].ln()) * (prefix + 0.5 * m2[j]);
        }
        prefix += m2[j];
    }
    Ok(p.omega * p.omega * sum)
}

/// Upper bound for the part of `|Psi(u)|` that comes from radii beyond `R`.
///
/// With `v = G(u)`, split `v = v_in + v_t` at `R`; the neglected part is
/// `2 b0(v_in, v_t) + b0(v_t, v_t)`. Its pieces are bounded by
///
/// * `b-(a, b) <= |a|_1 |b|_* + |b|_1 |a|_*`,
/// * `b+(a, b) <= L sup_{|x| > R-1} a |b|_1` with `L = int_{B_1} ln(1/|z|) dz = omega / N^2`,
///   since `ln+(1/|x-y|)` vanishes unless `|x - y| < 1`,
///
/// where on the tail `v_t` is replaced by the majorant
/// `C_lin min(u(r), C_N |u|_N / r)`, `C_lin = sup_{0 < s <= u(R)} G(s)/s`.
pub fn tail_bound(u: &RadialProfile, spec: &GrowthSpec, radius: f64) -> Result<f64> {
    if radius < 1.0 {
        return Err(Error::Usage(format!("tail radius must be >= 1, got {radius}")));
    }
    check_decreasing(u, "tail bound")?;
    let p = spec.params();
    let nodes = u.grid().nodes();
    let u_r = u.value_at(radius);
    if radius >= u.grid().radius() || u_r == 0.0 && nodes.iter().zip(u.values()).all(|(&r, &x)| r <= radius || x == 0.0) {
        return Ok(0.0);
    }
    let c_lin = spec.measure_linear_constant(u_r);
    if !c_lin.is_finite() {
        return Err(Error::Domain("tail bound needs G(0) = 0 with G(s) = O(s)".into()));
    }
    let norm = lp_norm(u, p.dim(), p)?;
    let majorant: Vec<f64> = nodes
        .iter()
        .zip(u.values())
        .map(|(&r, &x)| if r > radius { c_lin * x.min(p.c_n * norm / r) } else { 0.0 })
        .collect();
    let tail = u.with_values(majorant)?;
    let v = spec.compose(u)?;
    let big_l = p.omega / (p.dim() * p.dim());
    let sup_near = spec.value(u.value_at((radius - 1.0).max(0.0)))?;
    let sup_tail = tail.values().iter().cloned().fold(0.0, f64::max);
    let (t1, ts) = (l1_norm(&tail, p), star_norm(&tail, p));
    let (v1, vs) = (l1_norm(&v, p), star_norm(&v, p));
    let cross = big_l * sup_near * t1 + v1 * ts + t1 * vs;
    let diagonal = big_l * sup_tail * t1 + 2.0 * t1 * ts;
    Ok(2.0 * cross + diagonal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{dim_params, grad_norm, RadialGrid};
    use std::f64::consts::PI;

    #[test]
    fn radial_lemma_is_sharp_for_the_indicator() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 100).unwrap());
        let one = RadialProfile::from_fn(g.clone(), |_| 1.0).unwrap();
        let rep = radial_bound_check(&one, &p2).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.worst_radius, 1.0);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);
        assert!(radial_bound_check(&RadialProfile::zeros(g.clone()), &p2).unwrap().holds);
        let bump = RadialProfile::from_fn(g, |r| r * (1.0 - r)).unwrap();
        assert!(matches!(radial_bound_check(&bump, &p2), Err(Error::Usage(_))));
    }

    #[test]
    fn lift_of_ball_supported_profile_is_identity() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(2.0, 200).unwrap());
        let u = RadialProfile::from_fn(g, |r| 0.3 * (1.0 - r).max(0.0)).unwrap();
        let lift = lift_to_ball(&u, &p2).unwrap();
        assert_eq!(lift.grid().radius(), 1.0);
        for (&r, &x) in lift.grid().nodes().iter().zip(lift.values()) {
            assert!((x - u.value_at(r)).abs() < 1e-15);
        }
    }

    #[test]
    fn lift_of_constant_vanishes() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 50).unwrap());
        let u = RadialProfile::from_fn(g, |_| 0.1).unwrap();
        assert!(lift_to_ball(&u, &p2).unwrap().values().iter().all(|&x| x == 0.0));
        let big = RadialProfile::from_fn(Arc::new(RadialGrid::uniform(1.0, 50).unwrap()), |_| 5.0)
            .unwrap();
        assert!(matches!(lift_to_ball(&big, &p2), Err(Error::Domain(_))));
    }

    #[test]
    fn lift_is_feasible_in_the_plane() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(4.0, 800).unwrap());
        let raw = RadialProfile::from_fn(g, |r| (1.0 - r / 4.0).powi(2)).unwrap();
        let u = raw.scaled(0.999 / w1n_norm(&raw, &p2));
        let lift = lift_to_ball(&u, &p2).unwrap();
        assert!(grad_norm(&lift, &p2) <= 1.0 + 1e-6);
        assert!(lift_inequality_defect(&u, &lift, &p2) <= 0.0);
    }

    #[test]
    fn phi_beta_of_zero() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 4096).unwrap());
        let z = RadialProfile::zeros(g);
        let value = eval_phi_beta(&z, &z, -1.0, -1.0, &p2).unwrap();
        assert!((value / (PI * PI / 8.0) - 1.0).abs() < 1e-6);
        assert_eq!(value, eval_phi_beta(&z, &z, -1.7, -1.0, &p2).unwrap());
        assert!(matches!(eval_phi_beta(&z, &z, -0.5, -0.5, &p2), Err(Error::Domain(_))));
        assert!(matches!(eval_phi_beta(&z, &z, 0.5, -3.0, &p2), Err(Error::Domain(_))));
    }

    #[test]
    fn tail_bound_basics() {
        let p2 = dim_params(2).unwrap();
        let spec = GrowthSpec::space_critical(-1.5, 1.0, p2).unwrap();
        let g = Arc::new(RadialGrid::uniform(32.0, 3200).unwrap());
        let compact = RadialProfile::from_fn(g.clone(), |r| 0.2 * (1.0 - r / 5.0).max(0.0)).unwrap();
        assert_eq!(tail_bound(&compact, &spec, 10.0).unwrap(), 0.0);
        assert!(matches!(tail_bound(&compact, &spec, 0.5), Err(Error::Usage(_))));
        let spread = RadialProfile::from_fn(g, |r| 0.1 * (-r).exp()).unwrap();
        let t = [2.0, 5.0, 10.0, 20.0].map(|r| tail_bound(&spread, &spec, r).unwrap());
        assert!(t.windows(2).all(|w| w[1] <= w[0]), "{t:?}");
        assert!(t[0] > 0.0);
    }
}
