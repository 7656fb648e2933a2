//! Constrained maximization of the ball energy `Phi` over `|grad u|_N <= 1`
//! and of the whole-space energy `Psi` over `||u||_{W^{1,N}} <= 1` (truncated
//! to `[0, R]`) by projected gradient ascent on radial profiles.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::bridge::tail_bound;
use crate::error::{Error, Result};
use crate::euler_lagrange::{density, el_residual, estimate_theta};
use crate::growth::{check_growth_class, CheckKind, GrowthFamily, GrowthSpec};
use crate::kernel::{b0_radial, potential_values};
use crate::radial::{
    cell_rule, constraint_norm, rescale_to_ball, DimensionParams, NormKind, RadialGrid,
    RadialProfile,
};

/// Iterates with `||u|| >= 1 - ACTIVE_TOL` are treated as on the constraint.
const ACTIVE_TOL: f64 = 1e-9;
use crate::samples::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// `u in W^{1,N}_0(B_1)` with `|grad u|_N <= 1`.
    Ball,
    /// `u in W^{1,N}(R^N)` with `||u|| <= 1`, truncated to the grid.
    Space,
}

impl Domain {
    pub fn norm_kind(self) -> NormKind {
        match self {
            Domain::Ball => NormKind::Gradient,
            Domain::Space => NormKind::Full,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Ball => "ball",
            Domain::Space => "space",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball" => Ok(Domain::Ball),
            "space" => Ok(Domain::Space),
            other => Err(Error::Usage(format!("domain must be `ball` or `space`, got `{other}`"))),
        }
    }
}

/// `Phi(u) = b0(1_{B_1} G(u))` or `Psi(u) = b0(G(u))` on the grid.
pub fn objective(
    u: &RadialProfile,
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
) -> Result<f64> {
    b0_radial(&density(u, spec, domain)?, p)
}

/// Nodal gradient `2 f_j g(u_j) omega a_j` with `f = ln(1/|.|) * G(u)`.
pub fn objective_gradient(
    u: &RadialProfile,
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
) -> Result<RadialProfile> {
    let v = density(u, spec, domain)?;
    let f = potential_values(&v, p);
    let a = u.grid().radial_weights(p.n);
    let nodes = u.grid().nodes();
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            if domain == Domain::Ball && nodes[j] > 1.0 {
                return Ok(0.0);
            }
            Ok(2.0 * f[j] * spec.derivative(s)? * p.omega * a[j])
        })
        .collect::<Result<Vec<_>>>()?;
    u.with_values(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeOptions {
    pub grid_size: usize,
    pub max_iters: usize,
    /// Initial step; `None` picks the step whose first update has sup norm 0.1.
    pub step0: Option<f64>,
    /// Relative objective change that stops the iteration.
    pub tol: f64,
    pub monotone_projection: bool,
    pub seed: u64,
    /// Truncation radius for the whole-space problem.
    pub radius: f64,
    pub n_test: usize,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            grid_size: 512,
            max_iters: 5000,
            step0: None,
            tol: 1e-9,
            monotone_projection: true,
            seed: 0,
            radius: 32.0,
            n_test: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeResult {
    pub domain: Domain,
    pub profile: RadialProfile,
    pub phi_value: f64,
    pub theta: f64,
    pub iterations: usize,
    pub constraint_residual: f64,
    pub el_residual: f64,
    pub converged: bool,
    /// `tail_bound` at `R - 1` for the whole space, 0 for the ball.
    pub tail: f64,
    /// Accepted objective values, starting with the initial point.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl MaximizeResult {
    pub const CSV_HEADER: &'static str =
        "domain,n,beta,c,phi,theta,constraint_residual,el_residual,iterations,converged,tail";

    pub fn csv_row(&self, spec: &GrowthSpec) -> String {
        let fmt_opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "NaN".into());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.domain,
            spec.params().n,
            fmt_opt(spec.beta()),
            fmt_opt(spec.c()),
            self.phi_value,
            self.theta,
            self.constraint_residual,
            self.el_residual,
            self.iterations,
            self.converged,
            self.tail
        )
    }
}

/// Weighted isotonic regression onto nonincreasing sequences (pool adjacent
/// violators).
pub fn pav_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        let w = w.max(1e-300);
        let mut block = (y, w, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m >= block.0 {
                break;
            }
            blocks.pop();
            let total = bw + block.1;
            block = ((m * bw + block.0 * block.1) / total, total, len + block.2);
        }
        blocks.push(block);
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, len) in blocks {
        out.extend(std::iter::repeat(m).take(len));
    }
    out
}

/// Monotone projection (optional), clamp at 0, boundary value 0, then scaling
/// into the constraint set.
fn retract(
    values: Vec<f64>,
    grid: &Arc<RadialGrid>,
    weights: &[f64],
    monotone: bool,
    kind: NormKind,
    p: &DimensionParams,
) -> Result<RadialProfile> {
    let mut values = if monotone { pav_nonincreasing(&values, weights) } else { values };
    for x in values.iter_mut() {
        *x = x.max(0.0);
    }
    let last = values.len() - 1;
    values[last] = 0.0;
    Ok(rescale_to_ball(&RadialProfile::new(grid.clone(), values)?, kind, p))
}

/// Nodal gradient of `||u||^N` (the gradient norm for the ball, the full
/// `W^{1,N}` norm for the whole space), matching [`constraint_norm`].
pub fn constraint_gradient(u: &RadialProfile, kind: NormKind, p: &DimensionParams) -> Vec<f64> {
    let nodes = u.grid().nodes();
    let vals = u.values();
    let n = p.n as i32;
    let mut out = vec![0.0; vals.len()];
    for (k, s) in u.slopes().into_iter().enumerate() {
        let h = nodes[k + 1] - nodes[k];
        let d = p.omega * (nodes[k + 1].powi(n) - nodes[k].powi(n)) * s.abs().powi(n - 2) * s / h;
        out[k] -= d;
        out[k + 1] += d;
    }
    if kind == NormKind::Full {
        let (xs, ws) = cell_rule();
        for k in 0..vals.len() - 1 {
            let (a, b) = (nodes[k], nodes[k + 1]);
            for (x, w) in xs.iter().zip(ws) {
                let t = 0.5 * (1.0 + x);
                let r = a + (b - a) * t;
                let v = vals[k] + (vals[k + 1] - vals[k]) * t;
                let q = p.omega * p.dim() * v.abs().powi(n - 2) * v * r.powi(n - 1) * w * 0.5 * (b - a);
                out[k] += q * (1.0 - t);
                out[k + 1] += q * t;
            }
        }
    }
    out
}

/// Solves `(K + D) d = b` for the Sobolev gradient, `K` the weighted stiffness
/// matrix, `D` the lumped mass (whole space only), Dirichlet at the last node.
fn sobolev_direction(grad: &[f64], grid: &RadialGrid, domain: Domain, p: &DimensionParams) -> Vec<f64> {
    let nodes = grid.nodes();
    let m = nodes.len();
    let nf = p.dim();
    let ni = p.n as i32;
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    for k in 0..m - 1 {
        let h = nodes[k + 1] - nodes[k];
        let c = p.omega * (nodes[k + 1].powi(ni) - nodes[k].powi(ni)) / (nf * h * h);
        diag[k] += c;
        diag[k + 1] += c;
        off[k] = -c;
    }
    if domain == Domain::Space {
        for (d, a) in diag.iter_mut().zip(grid.radial_weights(p.n)) {
            *d += p.omega * a;
        }
    }
    // Thomas algorithm on the first m - 1 unknowns (d_{m-1} = 0).
    let n = m - 1;
    let mut c_star = vec![0.0; n];
    let mut d_star = vec![0.0; n];
    c_star[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d_star[0] = grad[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c_star[i - 1];
        if i + 1 < n {
            c_star[i] = off[i] / denom;
        }
        d_star[i] = (grad[i] - off[i - 1] * d_star[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[n - 1] = d_star[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_star[i] - c_star[i] * x[i + 1];
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn default_grid(domain: Domain, opts: &MaximizeOptions) -> Result<RadialGrid> {
    let radius = match domain {
        Domain::Ball => 1.0,
        Domain::Space => opts.radius,
    };
    RadialGrid::default_layout(radius, opts.grid_size)
}

fn initial_profile(
    grid: &Arc<RadialGrid>,
    domain: Domain,
    opts: &MaximizeOptions,
    p: &DimensionParams,
) -> Result<RadialProfile> {
    let radius = grid.radius();
    let mut u = RadialProfile::from_fn(grid.clone(), |r| (1.0 - r / radius).max(0.0))?;
    if opts.seed != 0 {
        let mut rng = rng(opts.seed);
        let noise: Vec<f64> = u.values().iter().map(|x| x * (1.0 + 0.1 * rng.gen_range(-1.0..1.0))).collect();
        u = u.with_values(noise)?;
    }
    let weights = grid.trapezoid_weights();
    retract(u.into_values(), grid, &weights, opts.monotone_projection, domain.norm_kind(), p)
}

fn bump_profile(
    grid: &Arc<RadialGrid>,
    domain: Domain,
    p: &DimensionParams,
) -> Result<RadialProfile> {
    let u = RadialProfile::from_fn(grid.clone(), |r| (1.0 - r * r).max(0.0).powi(2))?;
    let norm = constraint_norm(&u, domain.norm_kind(), p);
    Ok(u.scaled(1.0 / norm))
}

/// Projected gradient ascent with backtracking.
///
/// Directions are Sobolev gradients: the nodal gradient is preconditioned by
/// the weighted stiffness matrix (plus lumped mass on the whole space), which
/// removes the grid-dependent scaling of the raw nodal gradient. On the
/// constraint the direction is made tangent to the level set of the norm, so
/// fixed points satisfy the discrete multiplier rule.
pub fn maximize(
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
    opts: &MaximizeOptions,
) -> Result<MaximizeResult> {
    if opts.grid_size < 3 {
        return Err(Error::Usage(format!("grid_size must be >= 3, got {}", opts.grid_size)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Usage(format!("tol must be > 0, got {}", opts.tol)));
    }
    let mut warnings = Vec::new();
    match domain {
        Domain::Ball => match spec.beta() {
            Some(beta) => {
                let report = check_growth_class(spec, beta, CheckKind::AtMost);
                if !report.holds || beta >= p.beta_star() {
                    warnings.push(format!(
                        "growth is not at most beta-critical with beta < {} (beta = {beta})",
                        p.beta_star()
                    ));
                }
            }
            None => warnings.push("growth has no beta; existence of a maximizer is unchecked".into()),
        },
        Domain::Space => {
            if opts.radius < 2.0 {
                return Err(Error::Usage(format!("radius must be >= 2, got {}", opts.radius)));
            }
            if !matches!(spec.family(), GrowthFamily::SpaceCritical { .. }) {
                warnings.push("whole-space maximization expects a SpaceCritical growth".into());
            }
        }
    }

    let grid = Arc::new(default_grid(domain, opts)?);
    let kind = domain.norm_kind();
    let weights = grid.trapezoid_weights();
    let mut u = initial_profile(&grid, domain, opts, p)?;
    let mut value = objective(&u, spec, domain, p)?;
    // On the whole space a widely spread start has negative energy and the
    // ascent then drifts to the stationary point u = 0.
    let stalled = objective_gradient(&u, spec, domain, p)?.values().iter().all(|&x| x == 0.0);
    if stalled || (domain == Domain::Space && value <= 0.0) {
        u = bump_profile(&grid, domain, p)?;
        value = objective(&u, spec, domain, p)?;
    }
    let mut history = vec![value];
    let mut step = opts.step0;
    let mut converged = false;
    let mut iterations = 0;

    // previous tangent gradient, its Sobolev representative and direction
    let mut previous: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    while iterations < opts.max_iters {
        iterations += 1;
        let mut grad = objective_gradient(&u, spec, domain, p)?.into_values();
        let mut z = sobolev_direction(&grad, &grid, domain, p);
        let mut normal = None;
        if constraint_norm(&u, kind, p) >= 1.0 - ACTIVE_TOL {
            // remove the component normal to the level set of the norm
            let c = constraint_gradient(&u, kind, p);
            let sc = sobolev_direction(&c, &grid, domain, p);
            let den = dot(&c, &sc);
            if den > 0.0 {
                let mu = dot(&c, &z) / den;
                axpy(&mut z, -mu, &sc);
                axpy(&mut grad, -mu, &c);
                normal = Some((c, sc, den));
            }
        }
        // Polak-Ribiere+ conjugate direction in the Sobolev inner product
        let mut dir = z.clone();
        let mut conjugate = false;
        if let Some((g_prev, z_prev, d_prev)) = &previous {
            let diff: Vec<f64> = z.iter().zip(z_prev).map(|(a, b)| a - b).collect();
            let beta = (dot(&grad, &diff) / dot(g_prev, z_prev)).max(0.0);
            if beta.is_finite() && beta > 0.0 {
                axpy(&mut dir, beta, d_prev);
                if let Some((c, sc, den)) = &normal {
                    let mu = dot(c, &dir) / den;
                    axpy(&mut dir, -mu, sc);
                }
                conjugate = dot(&grad, &dir) > 0.0;
                if !conjugate {
                    dir.clone_from(&z);
                }
            }
        }
        let dir_max = dir.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if dir_max == 0.0 {
            converged = true;
            break;
        }
        let mut tau = step.unwrap_or(0.1 / dir_max);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u.values().iter().zip(&dir).map(|(x, d)| x + tau * d).collect();
            let candidate = retract(trial, &grid, &weights, opts.monotone_projection, kind, p)?;
            let cand_value = objective(&candidate, spec, domain, p)?;
            if cand_value > value {
                accepted = Some((candidate, cand_value));
                break;
            }
            tau *= 0.5;
        }
        match accepted {
            Some((candidate, cand_value)) => {
                let change = (cand_value - value).abs() / value.abs().max(f64::MIN_POSITIVE);
                u = candidate;
                value = cand_value;
                history.push(value);
                step = Some(2.0 * tau);
                if change < opts.tol {
                    if !conjugate {
                        converged = true;
                        break;
                    }
                    // judge convergence on a plain gradient step
                    previous = None;
                } else {
                    previous = Some((grad, z, dir));
                }
            }
            None if conjugate => previous = None,
            None => {
                // no ascent along the projected gradient at any step size
                converged = true;
                break;
            }
        }
    }

    let norm = constraint_norm(&u, kind, p);
    let theta = estimate_theta(&u, spec, domain, p)?;
    let el = el_residual(&u, theta, spec, domain, p, opts.n_test)?;
    let tail = match domain {
        Domain::Ball => 0.0,
        Domain::Space => tail_bound(&u, spec, opts.radius - 1.0)?,
    };
    Ok(MaximizeResult {
        domain,
        profile: u,
        phi_value: value,
        theta,
        iterations,
        constraint_residual: (norm - 1.0).abs(),
        el_residual: el,
        converged,
        tail,
        history,
        warnings,
    })
}

/// Best value of the objective over the truncated-log family
/// `a min(1, ln(1/r) / ln(1/rho))`, each member scaled into the constraint
/// set, on a 32 x 32 grid of `(a, rho)`.
pub fn brute_force_family(
    spec: &GrowthSpec,
    domain: Domain,
    p: &DimensionParams,
    grid: Arc<RadialGrid>,
) -> Result<f64> {
    let kind = domain.norm_kind();
    let mut best = f64::NEG_INFINITY;
    let radius = grid.radius().min(1.0);
    for i in 0..32 {
        let rho = (1e-6f64.ln() + (0.9f64.ln() - 1e-6f64.ln()) * i as f64 / 31.0).exp() * radius;
        let shape = RadialProfile::from_fn(grid.clone(), |r| {
            if r >= radius {
                0.0
            } else if r <= rho {
                1.0
            } else {
                (radius / r).ln() / (radius / rho).ln()
            }
        })?;
        let unit = constraint_norm(&shape, kind, p);
        for k in 1..=32 {
            let a = 2.0 * k as f64 / (32.0 * unit);
            let u = rescale_to_ball(&shape.scaled(a), kind, p);
            best = best.max(objective(&u, spec, domain, p)?);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::dim_params;
    use std::f64::consts::PI;

    #[test]
    fn pav_pools_violators() {
        let out = pav_nonincreasing(&[1.0, 3.0, 2.0, 0.0], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(out, vec![2.0, 2.0, 2.0, 0.0]);
        let out = pav_nonincreasing(&[0.0, 1.0], &[3.0, 1.0]);
        assert_eq!(out, vec![0.25, 0.25]);
        let sorted = [5.0, 4.0, 4.0, 1.0];
        assert_eq!(pav_nonincreasing(&sorted, &[1.0; 4]), sorted.to_vec());
    }

    #[test]
    fn objective_at_zero() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 4096).unwrap());
        let z = RadialProfile::zeros(g);
        let ball = GrowthSpec::ball_critical(-1.5, 1.0, p2).unwrap();
        let phi0 = objective(&z, &ball, Domain::Ball, &p2).unwrap();
        assert!((phi0 / (PI * PI / 4.0) - 1.0).abs() < 1e-6);
        let space = GrowthSpec::space_critical(-1.5, 1.0, p2).unwrap();
        assert_eq!(objective(&z, &space, Domain::Space, &p2).unwrap(), 0.0);
        let grad = objective_gradient(&z, &space, Domain::Space, &p2).unwrap();
        assert!(grad.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_at_zero_follows_h() {
        let p2 = dim_params(2).unwrap();
        let g = Arc::new(RadialGrid::uniform(1.0, 1024).unwrap());
        let z = RadialProfile::zeros(g.clone());
        // BallCritical has g(0) = 0, so use a tabulated G with G(0) = 1, g = 1 near 0
        let spec = GrowthSpec::tabulated(vec![(0.0, 1.0), (10.0, 11.0)], p2).unwrap();
        let grad = objective_gradient(&z, &spec, Domain::Ball, &p2).unwrap();
        let a = g.radial_weights(2);
        for j in [100, 512, 900] {
            let r = g.r(j);
            let h = (1.0 - r * r) / 4.0;
            let expected = 2.0 * 2.0 * PI * h * 2.0 * PI * a[j];
            assert!((grad.values()[j] / expected - 1.0).abs() < 1e-5, "r = {r}");
        }
    }

    #[test]
    fn sobolev_direction_solves_the_system() {
        let p3 = dim_params(3).unwrap();
        let g = RadialGrid::uniform(2.0, 20).unwrap();
        let b: Vec<f64> = (0..21).map(|j| (j as f64).sin()).collect();
        let x = sobolev_direction(&b, &g, Domain::Space, &p3);
        assert_eq!(x[20], 0.0);
        // residual of the assembled system on the free nodes
        let nodes = g.nodes();
        let a = g.radial_weights(3);
        for i in 0..20 {
            let mut lhs = p3.omega * a[i] * x[i];
            for k in [i.wrapping_sub(1), i] {
                if k < 20 {
                    let h = nodes[k + 1] - nodes[k];
                    let c = p3.omega * (nodes[k + 1].powi(3) - nodes[k].powi(3)) / (3.0 * h * h);
                    let (lo, hi) = (x[k], x[k + 1]);
                    lhs += if k == i { c * (lo - hi) } else { c * (hi - lo) };
                }
            }
            assert!((lhs - b[i]).abs() < 1e-9, "node {i}");
        }
    }

    #[test]
    fn constraint_gradient_matches_differences() {
        for n in [2, 3] {
            let p = dim_params(n).unwrap();
            let g = Arc::new(RadialGrid::default_layout(4.0, 40).unwrap());
            let u = RadialProfile::from_fn(g, |r| (-r).exp() * (4.0 - r)).unwrap();
            for kind in [NormKind::Gradient, NormKind::Full] {
                let c = constraint_gradient(&u, kind, &p);
                let pow = |v: &RadialProfile| constraint_norm(v, kind, &p).powf(p.dim());
                let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for j in [0, 5, 20, 39] {
                    let h = 1e-6;
                    let mut plus = u.values().to_vec();
                    plus[j] += h;
                    let mut minus = u.values().to_vec();
                    minus[j] -= h;
                    let fd = (pow(&u.with_values(plus).unwrap()) - pow(&u.with_values(minus).unwrap())) / (2.0 * h);
                    assert!((fd - c[j]).abs() <= 1e-7 * scale, "N = {n}, {kind:?}, node {j}: {fd} vs {}", c[j]);
                }
            }
        }
    }

    #[test]
    fn domain_parsing() {
        assert_eq!("ball".parse::<Domain>().unwrap(), Domain::Ball);
        assert_eq!(Domain::Space.to_string(), "space");
        assert!("disk".parse::<Domain>().is_err());
    }
}
