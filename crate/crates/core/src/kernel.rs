//! The logarithmic bilinear forms `b0`, `b+`, `b-`, the potential
//! `ln(1/|.|) * v` and the weighted norm `|v|_*`.
//!
//! For radial densities the potential reduces to one-dimensional sums:
//!
//! ```text
//! f(r) = omega * [ ln(1/r) int_0^r v rho^{N-1} drho + int_r^inf ln(1/rho) v rho^{N-1} drho ]
//! ```
//!
//! Both integrals are discretized with the same nodal masses
//! `m_j = a_j v_j` (`a_j` the radial trapezoid weights), which makes the
//! discrete form exactly symmetric, exactly nonincreasing in `r`, and makes
//! the nodal gradient of `b0(v, v)` exactly `2 omega f_j a_j`.
//!
//! The truncated kernels `ln+(1/d)` and `ln+(d)` have no such reduction and
//! are evaluated by [`SplitOracle`], a direct quadrature over
//! `(r, rho, gamma)` where `gamma` is the angle between `x` and `y`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};
use crate::radial::{radial_integral, DimensionParams, RadialGrid, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearReport {
    pub b_plus: f64,
    pub b_minus: f64,
    pub b0: f64,
    /// `|b0 - (b_plus - b_minus)|`.
    pub gap: f64,
}

impl BilinearReport {
    pub const CSV_HEADER: &'static str = "b_plus,b_minus,b0,gap";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.b_plus, self.b_minus, self.b0, self.gap)
    }
}

fn check_nonnegative(v: &RadialProfile, what: &str) -> Result<()> {
    match v.first_negative() {
        Some(j) => Err(Error::Domain(format!(
            "{what} must be nonnegative; value {} at r = {}",
            v.values()[j],
            v.grid().r(j)
        ))),
        None => Ok(()),
    }
}

/// Nodal masses `a_j v_j` (without the factor `omega`).
pub fn nodal_masses(v: &RadialProfile, p: &DimensionParams) -> Vec<f64> {
    v.grid()
        .radial_weights(p.n)
        .iter()
        .zip(v.values())
        .map(|(a, x)| a * x)
        .collect()
}

fn ln_inv(r: f64) -> f64 {
    -r.ln()
}

/// `b0(v, v)` in a single prefix-sum pass.
pub fn b0_radial(v: &RadialProfile, p: &DimensionParams) -> Result<f64> {
    check_nonnegative(v, "b0 density")?;
    Ok(b0_radial_unchecked(v, p))
}

pub(crate) fn b0_radial_unchecked(v: &RadialProfile, p: &DimensionParams) -> f64 {
    let m = nodal_masses(v, p);
    let nodes = v.grid().nodes();
    let mut prefix = 0.0;
    let mut sum = 0.0;
    for (j, &mj) in m.iter().enumerate() {
        if nodes[j] > 0.0 {
            sum += mj * ln_inv(nodes[j]) * (2.0 * prefix + mj);
        }
        prefix += mj;
    }
    p.omega * p.omega * sum
}

/// Nodal values of `ln(1/|.|) * v`, no sign check.
pub(crate) fn potential_values(v: &RadialProfile, p: &DimensionParams) -> Vec<f64> {
    let m = nodal_masses(v, p);
    let nodes = v.grid().nodes();
    let len = m.len();
    // outer[j] = sum_{k > j} m_k ln(1/r_k)
    let mut outer = vec![0.0; len];
    for j in (0..len - 1).rev() {
        let k = j + 1;
        outer[j] = outer[k] + if nodes[k] > 0.0 { m[k] * ln_inv(nodes[k]) } else { 0.0 };
    }
    let mut inner = 0.0;
    let mut f = vec![0.0; len];
    for j in 0..len {
        inner += m[j];
        let near = if nodes[j] > 0.0 { ln_inv(nodes[j]) * inner } else { 0.0 };
        f[j] = p.omega * (near + outer[j]);
    }
    f
}

/// The logarithmic potential `ln(1/|.|) * v` at every node.
///
/// At `r = 0` only the outer log-moment contributes.
pub fn potential_log(v: &RadialProfile, p: &DimensionParams) -> Result<RadialProfile> {
    check_nonnegative(v, "potential density")?;
    v.with_values(potential_values(v, p))
}

/// The potential at an arbitrary radius `r > 0`, using the nodal masses.
pub fn potential_at(v: &RadialProfile, r: f64, p: &DimensionParams) -> f64 {
    let m = nodal_masses(v, p);
    let nodes = v.grid().nodes();
    let mut sum = 0.0;
    for (k, &mk) in m.iter().enumerate() {
        if nodes[k] <= r {
            sum += mk * ln_inv(r);
        } else {
            sum += mk * ln_inv(nodes[k]);
        }
    }
    p.omega * sum
}

fn cross_half(v: &RadialProfile, fw: &[f64], p: &DimensionParams) -> f64 {
    nodal_masses(v, p).iter().zip(fw).map(|(m, f)| m * f).sum::<f64>() * p.omega
}

/// `b0(v, w)`, symmetric in its arguments bit for bit.
pub fn b0_cross(v: &RadialProfile, w: &RadialProfile, p: &DimensionParams) -> Result<f64> {
    v.check_same_grid(w)?;
    let x_vw = cross_half(v, &potential_values(w, p), p);
    let x_wv = cross_half(w, &potential_values(v, p), p);
    Ok(0.5 * (x_vw + x_wv))
}

/// `|v|_1 = omega int |v| r^{N-1} dr`.
pub fn l1_norm(v: &RadialProfile, p: &DimensionParams) -> f64 {
    radial_integral(v, p, |_, x| x.abs())
}

/// `|v|_* = omega int ln(1 + r) |v| r^{N-1} dr`.
pub fn star_norm(v: &RadialProfile, p: &DimensionParams) -> f64 {
    radial_integral(v, p, |r, x| r.ln_1p() * x.abs())
}

const MAX_ORACLE_CELLS: usize = 128;
const CELL_ORDER: usize = 4;
const DIAG_ORDER: usize = 6;

/// Angular integrals `int_0^pi k(d) sin^{N-2}(gamma) dgamma` for both
/// truncated kernels.
struct AngularRule {
    cos: Vec<f64>,
    weight: Vec<f64>,
}

impl AngularRule {
    fn new(nodes: usize, n: usize) -> Self {
        let (g, w) = gauss_legendre_on(nodes, 0.0, std::f64::consts::PI);
        let cos = g.iter().map(|x| x.cos()).collect();
        let weight = g
            .iter()
            .zip(&w)
            .map(|(x, w)| w * x.sin().powi(n as i32 - 2))
            .collect();
        Self { cos, weight }
    }

    fn kernels(&self, r: f64, rho: f64) -> (f64, f64) {
        let s = r * r + rho * rho;
        let t = 2.0 * r * rho;
        let (mut plus, mut minus) = (0.0, 0.0);
        for (c, w) in self.cos.iter().zip(&self.weight) {
            let d2 = (s - t * c).max(f64::MIN_POSITIVE);
            let half_log = 0.5 * d2.ln();
            if half_log < 0.0 {
                plus -= w * half_log;
            } else {
                minus += w * half_log;
            }
        }
        (plus, minus)
    }
}

struct DiagonalCell {
    r: Vec<f64>,
    rho: Vec<f64>,
    weight: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

/// Direct quadrature oracle for `b+` and `b-`.
///
/// The radial range is split into cells (the profile grid's cells when there
/// are at most 128 of them, otherwise 128 equal cells). Pairs of distinct
/// cells use a tensor Gauss-Legendre rule. A cell paired with itself is split
/// along the diagonal `r = rho`, where the angular integral has a kink, and
/// each triangle gets a collapsed Gauss rule with doubled angular resolution.
/// The angular tables depend only on the grid and `N`, so one oracle serves
/// any number of profile pairs.
pub struct SplitOracle {
    p: DimensionParams,
    radius: f64,
    points: Vec<f64>,
    point_weight: Vec<f64>,
    cell_of: Vec<usize>,
    plus: Vec<f64>,
    minus: Vec<f64>,
    diagonal: Vec<DiagonalCell>,
    angular: AngularRule,
}

impl SplitOracle {
    pub fn new(grid: &RadialGrid, p: &DimensionParams, angular_nodes: usize) -> Result<Self> {
        if angular_nodes < 16 {
            return Err(Error::Usage(format!(
                "angular quadrature needs at least 16 nodes, got {angular_nodes}"
            )));
        }
        let nodes = grid.nodes();
        let edges: Vec<f64> = if nodes.len() - 1 <= MAX_ORACLE_CELLS {
            nodes.to_vec()
        } else {
            let (a, b) = (nodes[0], grid.radius());
            (0..=MAX_ORACLE_CELLS)
                .map(|k| a + (b - a) * k as f64 / MAX_ORACLE_CELLS as f64)
                .collect()
        };
        let cells = edges.len() - 1;
        let (gx, gw) = gauss_legendre(CELL_ORDER);
        let mut points = Vec::with_capacity(cells * CELL_ORDER);
        let mut point_weight = Vec::with_capacity(cells * CELL_ORDER);
        let mut cell_of = Vec::with_capacity(cells * CELL_ORDER);
        for c in 0..cells {
            let (a, b) = (edges[c], edges[c + 1]);
            let half = 0.5 * (b - a);
            for (x, w) in gx.iter().zip(&gw) {
                let r = 0.5 * (a + b) + half * x;
                points.push(r);
                point_weight.push(half * w * p.radial_factor(r));
                cell_of.push(c);
            }
        }

        let angular = AngularRule::new(angular_nodes, p.n);
        let count = points.len();
        let rows: Vec<Vec<(f64, f64)>> = (0..count)
            .into_par_iter()
            .map(|i| {
                (i + 1..count)
                    .map(|j| {
                        if cell_of[i] == cell_of[j] {
                            (0.0, 0.0)
                        } else {
                            angular.kernels(points[i], points[j])
                        }
                    })
                    .collect()
            })
            .collect();
        let mut plus = vec![0.0; count * count];
        let mut minus = vec![0.0; count * count];
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, (kp, km)) in row.into_iter().enumerate() {
                let j = i + 1 + offset;
                plus[i * count + j] = kp;
                plus[j * count + i] = kp;
                minus[i * count + j] = km;
                minus[j * count + i] = km;
            }
        }

        let fine = AngularRule::new(2 * angular_nodes, p.n);
        let (dx, dw) = gauss_legendre_on(DIAG_ORDER, 0.0, 1.0);
        let diagonal = (0..cells)
            .into_par_iter()
            .map(|c| {
                let (a, b) = (edges[c], edges[c + 1]);
                let h = b - a;
                let mut cell = DiagonalCell {
                    r: Vec::new(),
                    rho: Vec::new(),
                    weight: Vec::new(),
                    plus: Vec::new(),
                    minus: Vec::new(),
                };
                // triangle rho < r: r = a + h s, rho = a + h s t
                for (s, ws) in dx.iter().zip(&dw) {
                    for (t, wt) in dx.iter().zip(&dw) {
                        let r = a + h * s;
                        let rho = a + h * s * t;
                        let (kp, km) = fine.kernels(r, rho);
                        cell.r.push(r);
                        cell.rho.push(rho);
                        cell.weight.push(
                            ws * wt * h * h * s * p.radial_factor(r) * p.radial_factor(rho),
                        );
                        cell.plus.push(kp);
                        cell.minus.push(km);
                    }
                }
                cell
            })
            .collect();

        Ok(Self {
            p: *p,
            radius: grid.radius(),
            points,
            point_weight,
            cell_of,
            plus,
            minus,
            diagonal,
            angular,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(b+(v, w), b-(v, w))`.
    pub fn split(&self, v: &RadialProfile, w: &RadialProfile) -> (f64, f64) {
        let vp: Vec<f64> = self.points.iter().map(|&r| v.value_at(r)).collect();
        let wp: Vec<f64> = self.points.iter().map(|&r| w.value_at(r)).collect();
        let count = self.points.len();
        let (mut bp, mut bm) = (0.0, 0.0);
        for i in 0..count {
            let vi = vp[i] * self.point_weight[i];
            if vi == 0.0 {
                continue;
            }
            let (mut rp, mut rm) = (0.0, 0.0);
            for j in 0..count {
                if self.cell_of[i] == self.cell_of[j] {
                    continue;
                }
                let wj = wp[j] * self.point_weight[j];
                rp += self.plus[i * count + j] * wj;
                rm += self.minus[i * count + j] * wj;
            }
            bp += vi * rp;
            bm += vi * rm;
        }
        for cell in &self.diagonal {
            for k in 0..cell.r.len() {
                let (r, rho) = (cell.r[k], cell.rho[k]);
                let pair = v.value_at(r) * w.value_at(rho) + v.value_at(rho) * w.value_at(r);
                bp += cell.weight[k] * cell.plus[k] * pair;
                bm += cell.weight[k] * cell.minus[k] * pair;
            }
        }
        let scale = self.p.omega * self.p.omega_sub();
        (scale * bp, scale * bm)
    }

    /// `(ln+|.| * v)(x)` at `|x| = r`.
    pub fn log_plus_potential(&self, v: &RadialProfile, r: f64) -> f64 {
        let mut sum = 0.0;
        for (k, &rho) in self.points.iter().enumerate() {
            let value = v.value_at(rho);
            if value != 0.0 {
                let (_, km) = self.angular.kernels(r, rho);
                sum += self.point_weight[k] * value * km;
            }
        }
        self.p.omega_sub() * sum
    }

    pub fn report(&self, v: &RadialProfile, w: &RadialProfile) -> Result<BilinearReport> {
        let (b_plus, b_minus) = self.split(v, w);
        let b0 = b0_cross(v, w, &self.p)?;
        Ok(BilinearReport { b_plus, b_minus, b0, gap: (b0 - (b_plus - b_minus)).abs() })
    }
}

/// `b+`, `b-` by direct quadrature, with `b0` from the radial reduction.
pub fn b_split_direct(
    v: &RadialProfile,
    w: &RadialProfile,
    p: &DimensionParams,
    angular_nodes: usize,
) -> Result<BilinearReport> {
    v.check_same_grid(w)?;
    check_nonnegative(v, "b+/b- density")?;
    check_nonnegative(w, "b+/b- density")?;
    SplitOracle::new(v.grid(), p, angular_nodes)?.report(v, w)
}

/// CSV table of bilinear reports with a leading index column.
pub fn reports_to_csv(index_name: &str, rows: &[(u64, BilinearReport)]) -> String {
    let mut out = format!("{index_name},{}\n", BilinearReport::CSV_HEADER);
    for (k, r) in rows {
        let _ = writeln!(out, "{k},{}", r.csv_row());
    }
    out
}
