//! Dimension constants, radial grids, piecewise-linear radial profiles and the
//! Sobolev/Lebesgue norms every other module is built on.
//!
//! All integrals over `R^N` of radial functions reduce to
//! `omega * int_0^R f(r) r^{N-1} dr`. Norms integrate the piecewise-linear
//! interpolant cell by cell ([`radial_integral`]); the nodal forms of the
//! energy use the trapezoid weights of [`RadialGrid::radial_weights`], where
//! the weight `r^{N-1}` is folded in and node `r = 0` carries zero weight.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Points of the per-cell Gauss-Legendre rule used by [`radial_integral`].
const CELL_RULE: usize = 6;

/// Constants of the dimension `N` that appear in every formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionParams {
    pub n: usize,
    /// Surface measure of the unit sphere `S^{N-1}`.
    pub omega: f64,
    /// Trudinger-Moser exponent `N * omega^{1/(N-1)}`.
    pub alpha_n: f64,
    /// Radial-lemma constant `(N / omega)^{1/N}`.
    pub c_n: f64,
}

/// `Gamma(k / 2)` for a positive integer `k`, by the exact recursion from
/// `Gamma(1) = 1` and `Gamma(1/2) = sqrt(pi)`.
pub fn gamma_half_integer(k: usize) -> f64 {
    assert!(k >= 1, "Gamma(k/2) needs k >= 1");
    let (mut value, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = k as f64 / 2.0;
    while x < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// Surface measure of the unit sphere in `R^k`, i.e. of `S^{k-1}`.
///
/// `sphere_measure(1) = 2` (the two points of `S^0`).
pub fn sphere_measure(k: usize) -> f64 {
    2.0 * PI.powf(k as f64 / 2.0) / gamma_half_integer(k)
}

pub fn dim_params(n: usize) -> Result<DimensionParams> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
    }
    let omega = sphere_measure(n);
    let nf = n as f64;
    Ok(DimensionParams {
        n,
        omega,
        alpha_n: nf * omega.powf(1.0 / (nf - 1.0)),
        c_n: (nf / omega).powf(1.0 / nf),
    })
}

impl DimensionParams {
    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// Conjugate exponent `N/(N-1)` of the Trudinger-Moser growth.
    pub fn tm_exponent(&self) -> f64 {
        self.dim() / (self.dim() - 1.0)
    }

    /// Blow-up threshold `-N / (2(N-1))`.
    pub fn beta_star(&self) -> f64 {
        -self.dim() / (2.0 * (self.dim() - 1.0))
    }

    /// Surface measure of `S^{N-2}`, the angular factor of two-point integrals.
    pub fn omega_sub(&self) -> f64 {
        sphere_measure(self.n - 1)
    }

    /// `r^{N-1}`.
    pub fn radial_factor(&self, r: f64) -> f64 {
        r.powi(self.n as i32 - 1)
    }
}

/// Strictly increasing radii `r_0 < ... < r_M`, `M >= 2`, `r_0 >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Domain(format!(
                "a radial grid needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Domain("grid radii must be finite and nonnegative".into()));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "grid radii must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes })
    }

    /// `cells + 1` equally spaced nodes on `[0, radius]`.
    pub fn uniform(radius: f64, cells: usize) -> Result<Self> {
        if !(radius > 0.0) || cells < 2 {
            return Err(Error::Domain(format!(
                "uniform grid needs radius > 0 and >= 2 cells (got {radius}, {cells})"
            )));
        }
        let h = radius / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
        nodes[cells] = radius;
        Self::new(nodes)
    }

    /// Node `0` followed by `size - 1` log-spaced nodes from `r_min` to `radius`.
    pub fn geometric(radius: f64, r_min: f64, size: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_min < radius) || size < 3 {
            return Err(Error::Domain(format!(
                "geometric grid needs 0 < r_min < radius and size >= 3 (got {r_min}, {radius}, {size})"
            )));
        }
        let count = size - 1;
        let (lo, hi) = (r_min.ln(), radius.ln());
        let mut nodes = Vec::with_capacity(size);
        nodes.push(0.0);
        for k in 0..count {
            let t = k as f64 / (count - 1) as f64;
            nodes.push((lo + t * (hi - lo)).exp());
        }
        nodes[size - 1] = radius;
        Self::new(nodes)
    }

    /// The default layout: geometric from `radius * 1e-8` to `radius`, plus `0`.
    pub fn default_layout(radius: f64, size: usize) -> Result<Self> {
        Self::geometric(radius, radius * 1e-8, size)
    }

    /// A copy of the grid with the extra radii inserted (duplicates dropped).
    pub fn with_nodes(&self, extra: &[f64]) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        nodes.extend_from_slice(extra);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radius(&self) -> f64 {
        *self.nodes.last().expect("grid has nodes")
    }

    pub fn r(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Plain trapezoid weights for `int f dr`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.nodes.len();
        let mut w = vec![0.0; m];
        for k in 0..m - 1 {
            let h = self.nodes[k + 1] - self.nodes[k];
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
        w
    }

    /// Trapezoid weights for `int f(r) r^{N-1} dr` (weight folded in).
    pub fn radial_weights(&self, n: usize) -> Vec<f64> {
        self.trapezoid_weights()
            .into_iter()
            .zip(&self.nodes)
            .map(|(w, r)| w * r.powi(n as i32 - 1))
            .collect()
    }

    /// Index `k` of the cell `[r_k, r_{k+1}]` containing `r`, clamped to the grid.
    pub fn locate(&self, r: f64) -> usize {
        let m = self.nodes.len();
        match self.nodes.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(j) => j.min(m - 2),
            Err(0) => 0,
            Err(j) => (j - 1).min(m - 2),
        }
    }

    /// Index of the node nearest to `r`.
    pub fn nearest(&self, r: f64) -> usize {
        let k = self.locate(r);
        if (r - self.nodes[k]).abs() <= (self.nodes[k + 1] - r).abs() {
            k
        } else {
            k + 1
        }
    }
}

/// A continuous piecewise-linear radial function on a grid, zero beyond the
/// last node.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "profile has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("profile value at node {j} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid, new nodal values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    /// Nodewise product, both profiles on the same grid.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect())
    }

    /// The profile multiplied by the indicator of `[0, radius]` at the nodes.
    pub fn restricted(&self, radius: f64) -> Self {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| if r <= radius { v } else { 0.0 })
            .collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Usage("profiles live on different grids".into()))
        }
    }

    /// Linear interpolation; zero beyond the last node.
    pub fn value_at(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        if r > self.grid.radius() {
            return 0.0;
        }
        if r <= nodes[0] {
            return self.values[0];
        }
        let k = self.grid.locate(r);
        let t = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn first_negative(&self) -> Option<usize> {
        self.values.iter().position(|&v| v < 0.0)
    }

    /// `u_{j+1} <= u_j + tol` for all `j`.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// Cell-wise constant slopes.
    pub fn slopes(&self) -> Vec<f64> {
        let nodes = self.grid.nodes();
        (0..nodes.len() - 1)
            .map(|k| (self.values[k + 1] - self.values[k]) / (nodes[k + 1] - nodes[k]))
            .collect()
    }

    /// CSV with header `r,u` and shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,u\n");
        for (r, u) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{r},{u}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "r,u" => {}
            other => return Err(Error::Parse(format!("expected header `r,u`, got {other:?}"))),
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (r, u) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `r,u`", i + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))
            };
            nodes.push(parse(r)?);
            values.push(parse(u)?);
        }
        Self::new(Arc::new(RadialGrid::new(nodes)?), values)
    }
}

/// `(omega * int |u'|^N r^{N-1} dr)^{1/N}`, exact for the piecewise-linear
/// profile.
pub fn grad_norm(u: &RadialProfile, p: &DimensionParams) -> f64 {
    grad_norm_pow(u, p).powf(1.0 / p.dim())
}

/// `|grad u|_N^N`.
pub fn grad_norm_pow(u: &RadialProfile, p: &DimensionParams) -> f64 {
    let nodes = u.grid().nodes();
    let n = p.n as i32;
    let sum: f64 = u
        .slopes()
        .iter()
        .enumerate()
        .map(|(k, s)| s.abs().powi(n) * (nodes[k + 1].powi(n) - nodes[k].powi(n)))
        .sum();
    p.omega * sum / p.dim()
}

/// `omega int f(r, u(r)) r^{N-1} dr` over the grid for the piecewise-linear
/// `u`, with a six-point Gauss-Legendre rule on every cell.
pub fn radial_integral(u: &RadialProfile, p: &DimensionParams, f: impl Fn(f64, f64) -> f64) -> f64 {
    cell_quadrature(u.grid().nodes(), u.values(), u.values(), p, |r, x, _| f(r, x))
}

/// `omega int f(r, u(r), w(r)) r^{N-1} dr` for two profiles on one grid.
pub fn radial_pair_integral(
    u: &RadialProfile,
    w: &RadialProfile,
    p: &DimensionParams,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Result<f64> {
    u.check_same_grid(w)?;
    Ok(cell_quadrature(u.grid().nodes(), u.values(), w.values(), p, f))
}

/// Nodes and weights on `[-1, 1]` of the per-cell rule.
pub(crate) fn cell_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(CELL_RULE))
}

fn cell_quadrature(
    nodes: &[f64],
    us: &[f64],
    ws: &[f64],
    p: &DimensionParams,
    f: impl Fn(f64, f64, f64) -> f64,
) -> f64 {
    let (xs, weights) = cell_rule();
    let n = p.n as i32;
    let mut sum = 0.0;
    for k in 0..nodes.len() - 1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let mut cell = 0.0;
        for (x, wt) in xs.iter().zip(weights) {
            let t = 0.5 * (1.0 + x);
            let r = a + (b - a) * t;
            let u = us[k] + (us[k + 1] - us[k]) * t;
            let w = ws[k] + (ws[k + 1] - ws[k]) * t;
            cell += wt * f(r, u, w) * r.powi(n - 1);
        }
        sum += 0.5 * (b - a) * cell;
    }
    p.omega * sum
}

/// `|u|_p^p`, integrated cell by cell.
pub fn lp_norm_pow(u: &RadialProfile, p_exp: f64, p: &DimensionParams) -> Result<f64> {
    if !(p_exp >= 1.0) {
        return Err(Error::Domain(format!("Lebesgue exponent must be >= 1, got {p_exp}")));
    }
    Ok(match p_exp {
        e if e == e.round() && e <= 16.0 => radial_integral(u, p, |_, v| v.abs().powi(e as i32)),
        e => radial_integral(u, p, |_, v| v.abs().powf(e)),
    })
}

pub fn lp_norm(u: &RadialProfile, p_exp: f64, p: &DimensionParams) -> Result<f64> {
    Ok(lp_norm_pow(u, p_exp, p)?.powf(1.0 / p_exp))
}

/// The full `W^{1,N}` norm `(|grad u|_N^N + |u|_N^N)^{1/N}`.
pub fn w1n_norm(u: &RadialProfile, p: &DimensionParams) -> f64 {
    let lp = lp_norm_pow(u, p.dim(), p).expect("N >= 2 is a valid exponent");
    (grad_norm_pow(u, p) + lp).powf(1.0 / p.dim())
}

/// Which constraint set a profile is retracted onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `|grad u|_N <= 1` (the ball problem).
    Gradient,
    /// `||u||_{W^{1,N}} <= 1` (the whole-space problem).
    Full,
}

pub fn constraint_norm(u: &RadialProfile, kind: NormKind, p: &DimensionParams) -> f64 {
    match kind {
        NormKind::Gradient => grad_norm(u, p),
        NormKind::Full => w1n_norm(u, p),
    }
}

/// `u / max(1, ||u||)`.
pub fn rescale_to_ball(u: &RadialProfile, kind: NormKind, p: &DimensionParams) -> RadialProfile {
    let norm = constraint_norm(u, kind, p);
    if norm > 1.0 {
        u.scaled(1.0 / norm)
    } else {
        u.clone()
    }
}
