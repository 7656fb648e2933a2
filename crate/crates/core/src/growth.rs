//! Nonlinearities `G` with `g = G'` and their critical-growth classes.
//!
//! With `q = N/(N-1)` and `E(s) = alpha_N |s|^q` the families are
//!
//! ```text
//! BallCritical   G(s) = c [ (1+|s|)^beta (e^E - 1) + 1 ]
//! SpaceCritical  G(s) = c (1+|s|)^beta (e^E - 1)
//! Subcritical    G(s) = c (e^{alpha |s|^q} - 1),   alpha < alpha_N
//! Tabulated      piecewise-linear through samples (s_k, G_k)
//! ```
//!
//! BallCritical is the SpaceCritical profile lifted by the constant `c`, so
//! `G(0) = c` and `g(0) = 0`. Both critical families are nondecreasing on
//! `[0, inf)` when `|beta| <= q`: with `1 - e^{-E} <= E`,
//!
//! ```text
//! d/ds [(1+s)^beta (e^E - 1)] = (1+s)^{beta-1} [ q alpha_N s^{q-1} (1+s) e^E + beta (e^E - 1) ]
//!                             >= (1+s)^{beta-1} alpha_N s^{q-1} e^E [ q (1+s) - |beta| s ] >= 0.
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::radial::{DimensionParams, RadialProfile};

/// Largest exponent evaluated in linear space.
pub const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GrowthFamily {
    BallCritical { beta: f64, c: f64 },
    SpaceCritical { beta: f64, c: f64 },
    Subcritical { alpha: f64, c: f64 },
    /// Samples `(s_k, G_k)` with `s_0 = 0`, increasing `s`, nondecreasing `G`.
    Tabulated { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSpec {
    family: GrowthFamily,
    p: DimensionParams,
    /// `sup_{0 < s <= 1} G(s)/s`, infinite when `G(0) > 0`.
    linear_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub holds: bool,
    pub witness_constant: f64,
    pub worst_s: f64,
}

impl GrowthSpec {
    pub fn new(family: GrowthFamily, p: DimensionParams) -> Result<Self> {
        let q = p.tm_exponent();
        match &family {
            GrowthFamily::BallCritical { beta, c } | GrowthFamily::SpaceCritical { beta, c } => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::Domain(format!("growth constant c must be > 0, got {c}")));
                }
                if !(*beta <= 0.0 && *beta >= -q) {
                    return Err(Error::Domain(format!(
                        "critical families need -N/(N-1) = {} <= beta <= 0, got {beta}",
                        -q
                    )));
                }
            }
            GrowthFamily::Subcritical { alpha, c } => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::Domain(format!("growth constant c must be > 0, got {c}")));
                }
                if !(*alpha > 0.0 && *alpha < p.alpha_n) {
                    return Err(Error::Domain(format!(
                        "subcritical exponent must lie in (0, alpha_N = {}), got {alpha}",
                        p.alpha_n
                    )));
                }
            }
            GrowthFamily::Tabulated { points } => {
                if points.len() < 2 || points[0].0 != 0.0 {
                    return Err(Error::Domain(
                        "tabulated growth needs at least two samples starting at s = 0".into(),
                    ));
                }
                if points.iter().any(|(s, g)| !s.is_finite() || !g.is_finite() || *g < 0.0) {
                    return Err(Error::Domain("tabulated samples must be finite with G >= 0".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                    return Err(Error::Domain(
                        "tabulated samples need increasing s and nondecreasing G".into(),
                    ));
                }
            }
        }
        let mut spec = Self { family, p, linear_constant: f64::INFINITY };
        spec.check_monotone()?;
        spec.linear_constant = spec.measure_linear_constant(1.0);
        Ok(spec)
    }

    pub fn ball_critical(beta: f64, c: f64, p: DimensionParams) -> Result<Self> {
        Self::new(GrowthFamily::BallCritical { beta, c }, p)
    }

    pub fn space_critical(beta: f64, c: f64, p: DimensionParams) -> Result<Self> {
        Self::new(GrowthFamily::SpaceCritical { beta, c }, p)
    }

    pub fn subcritical(alpha: f64, c: f64, p: DimensionParams) -> Result<Self> {
        Self::new(GrowthFamily::Subcritical { alpha, c }, p)
    }

    pub fn tabulated(points: Vec<(f64, f64)>, p: DimensionParams) -> Result<Self> {
        Self::new(GrowthFamily::Tabulated { points }, p)
    }

    pub fn family(&self) -> &GrowthFamily {
        &self.family
    }

    pub fn params(&self) -> &DimensionParams {
        &self.p
    }

    pub fn beta(&self) -> Option<f64> {
        match self.family {
            GrowthFamily::BallCritical { beta, .. } | GrowthFamily::SpaceCritical { beta, .. } => {
                Some(beta)
            }
            _ => None,
        }
    }

    pub fn c(&self) -> Option<f64> {
        match self.family {
            GrowthFamily::BallCritical { c, .. }
            | GrowthFamily::SpaceCritical { c, .. }
            | GrowthFamily::Subcritical { c, .. } => Some(c),
            GrowthFamily::Tabulated { .. } => None,
        }
    }

    /// The same family with `c` multiplied by `factor` (tabulated values too).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let family = match &self.family {
            GrowthFamily::BallCritical { beta, c } => {
                GrowthFamily::BallCritical { beta: *beta, c: c * factor }
            }
            GrowthFamily::SpaceCritical { beta, c } => {
                GrowthFamily::SpaceCritical { beta: *beta, c: c * factor }
            }
            GrowthFamily::Subcritical { alpha, c } => {
                GrowthFamily::Subcritical { alpha: *alpha, c: c * factor }
            }
            GrowthFamily::Tabulated { points } => GrowthFamily::Tabulated {
                points: points.iter().map(|(s, g)| (*s, g * factor)).collect(),
            },
        };
        Self::new(family, self.p)
    }

    /// `alpha_N |s|^q`.
    pub fn critical_exponent(&self, s: f64) -> f64 {
        self.p.alpha_n * s.abs().powf(self.p.tm_exponent())
    }

    fn saturation(s: f64) -> Error {
        Error::Saturation { s, radius: None }
    }

    /// `(G(s), g(s))`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        if !s.is_finite() {
            return Err(Self::saturation(s));
        }
        let a = s.abs();
        let q = self.p.tm_exponent();
        let (value, slope) = match &self.family {
            GrowthFamily::BallCritical { beta, c } | GrowthFamily::SpaceCritical { beta, c } => {
                let e = self.p.alpha_n * a.powf(q);
                if e > EXP_LIMIT {
                    return Err(Self::saturation(s));
                }
                let em1 = e.exp_m1();
                let pre = (1.0 + a).powf(*beta);
                let core = pre * em1;
                let slope = c
                    * pre
                    * (q * self.p.alpha_n * a.powf(q - 1.0) * (em1 + 1.0) + beta * em1 / (1.0 + a));
                let value = match self.family {
                    GrowthFamily::BallCritical { .. } => c * (core + 1.0),
                    _ => c * core,
                };
                (value, slope)
            }
            GrowthFamily::Subcritical { alpha, c } => {
                let e = alpha * a.powf(q);
                if e > EXP_LIMIT {
                    return Err(Self::saturation(s));
                }
                (c * e.exp_m1(), c * alpha * q * a.powf(q - 1.0) * e.exp())
            }
            GrowthFamily::Tabulated { points } => {
                let last = points[points.len() - 1].0;
                if a > last {
                    return Err(Self::saturation(s));
                }
                let k = points.partition_point(|(x, _)| *x <= a).clamp(1, points.len() - 1) - 1;
                let (s0, g0) = points[k];
                let (s1, g1) = points[k + 1];
                let slope = (g1 - g0) / (s1 - s0);
                (g0 + slope * (a - s0), slope)
            }
        };
        Ok((value, if s < 0.0 { -slope } else { slope }))
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        Ok(self.eval(s)?.0)
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        Ok(self.eval(s)?.1)
    }

    /// `ln G(s)` without overflow, given the critical exponent `e = alpha_N |s|^q`.
    ///
    /// Callers that know `e` exactly (the Moser plateau, where `e = N ln n`)
    /// pass it in instead of recomputing it from `s`.
    pub fn ln_value_with_exponent(&self, s: f64, e: f64) -> Result<f64> {
        let a = s.abs();
        Ok(match &self.family {
            GrowthFamily::BallCritical { beta, c } => {
                // (1+a)^beta (e^E - 1) + 1 = (1+a)^beta e^E [1 - e^{-E} + e^{-E} (1+a)^{-beta}]
                let lp = beta * a.ln_1p();
                let tail = (-e - lp).exp() - (-e).exp();
                c.ln() + lp + e + tail.ln_1p()
            }
            GrowthFamily::SpaceCritical { beta, c } => {
                c.ln() + beta * a.ln_1p() + e + (-(-e).exp()).ln_1p()
            }
            GrowthFamily::Subcritical { alpha, c } => {
                let es = alpha / self.p.alpha_n * e;
                c.ln() + es + (-(-es).exp()).ln_1p()
            }
            GrowthFamily::Tabulated { .. } => self.value(s)?.ln(),
        })
    }

    pub fn ln_value(&self, s: f64) -> Result<f64> {
        self.ln_value_with_exponent(s, self.critical_exponent(s))
    }

    /// The constant `c'` with `G(s) >= c' s^beta e^{alpha_N s^q}` for `s >= 1`.
    pub fn at_least_constant(&self) -> Option<f64> {
        match self.family {
            GrowthFamily::BallCritical { beta, c } => Some(c * 2f64.powf(beta)),
            GrowthFamily::SpaceCritical { beta, c } => {
                Some(c * 2f64.powf(beta) * -(-self.p.alpha_n).exp_m1())
            }
            _ => None,
        }
    }

    /// `sup_{0 < s <= 1} G(s)/s`, measured at construction.
    pub fn linear_constant(&self) -> f64 {
        self.linear_constant
    }

    /// `sup_{0 < s <= s_max} G(s)/s` on a log grid plus the endpoint.
    pub fn measure_linear_constant(&self, s_max: f64) -> f64 {
        match self.value(0.0) {
            Ok(g0) if g0 > 0.0 => return f64::INFINITY,
            Err(_) => return f64::INFINITY,
            _ => {}
        }
        let samples = 2000;
        let lo = (1e-12 * s_max).ln();
        let hi = s_max.ln();
        let mut best = 0.0f64;
        for k in 0..=samples {
            let s = (lo + (hi - lo) * k as f64 / samples as f64).exp().min(s_max);
            match self.value(s) {
                Ok(g) => best = best.max(g / s),
                Err(_) => return f64::INFINITY,
            }
        }
        best
    }

    fn check_monotone(&self) -> Result<()> {
        let mut prev = self.value(0.0)?;
        let s_max = match &self.family {
            GrowthFamily::Tabulated { points } => points[points.len() - 1].0,
            _ => (600.0 / self.p.alpha_n).powf(1.0 / self.p.tm_exponent()),
        };
        for k in 0..1000 {
            let s = (1e-6f64.ln() + (s_max / 1e-6).ln() * k as f64 / 999.0).exp().min(s_max);
            let g = self.value(s)?;
            if g < prev * (1.0 - 1e-14) {
                return Err(Error::Domain(format!("growth function decreases near s = {s}")));
            }
            prev = g;
        }
        Ok(())
    }

    /// `G` composed with a profile; saturation errors report the radius.
    pub fn compose(&self, u: &RadialProfile) -> Result<RadialProfile> {
        self.map_profile(u, |s| self.value(s))
    }

    /// `g` composed with a profile.
    pub fn compose_derivative(&self, u: &RadialProfile) -> Result<RadialProfile> {
        self.map_profile(u, |s| self.derivative(s))
    }

    fn map_profile(
        &self,
        u: &RadialProfile,
        f: impl Fn(f64) -> Result<f64>,
    ) -> Result<RadialProfile> {
        let nodes = u.grid().nodes();
        let values = u
            .values()
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                f(s).map_err(|e| match e {
                    Error::Saturation { s, .. } => Error::Saturation { s, radius: Some(nodes[j]) },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        u.with_values(values)
    }

    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        match &self.family {
            GrowthFamily::BallCritical { beta, c } => {
                out.push_str(&format!("family=ball_critical\nbeta={beta}\nc={c}\n"))
            }
            GrowthFamily::SpaceCritical { beta, c } => {
                out.push_str(&format!("family=space_critical\nbeta={beta}\nc={c}\n"))
            }
            GrowthFamily::Subcritical { alpha, c } => {
                out.push_str(&format!("family=subcritical\nalpha={alpha}\nc={c}\n"))
            }
            GrowthFamily::Tabulated { points } => {
                let list: Vec<String> = points.iter().map(|(s, g)| format!("{s}:{g}")).collect();
                out.push_str(&format!("family=tabulated\npoints={}\n", list.join(";")));
            }
        }
        out.push_str(&format!("n={}\n", self.p.n));
        out
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{line}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| {
            map.get(key).ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?.parse::<f64>().map_err(|e| Error::Parse(format!("{key}: {e}")))
        };
        let n: usize = get("n")?.parse().map_err(|e| Error::Parse(format!("n: {e}")))?;
        let p = crate::radial::dim_params(n)?;
        let family = match get("family")?.as_str() {
            "ball_critical" => GrowthFamily::BallCritical { beta: num("beta")?, c: num("c")? },
            "space_critical" => GrowthFamily::SpaceCritical { beta: num("beta")?, c: num("c")? },
            "subcritical" => GrowthFamily::Subcritical { alpha: num("alpha")?, c: num("c")? },
            "tabulated" => {
                let points = get("points")?
                    .split(';')
                    .map(|pair| {
                        let (s, g) = pair
                            .split_once(':')
                            .ok_or_else(|| Error::Parse(format!("bad sample `{pair}`")))?;
                        let parse = |x: &str| {
                            x.parse::<f64>().map_err(|e| Error::Parse(format!("{x}: {e}")))
                        };
                        Ok((parse(s)?, parse(g)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                GrowthFamily::Tabulated { points }
            }
            other => return Err(Error::Parse(format!("unknown family `{other}`"))),
        };
        Self::new(family, p)
    }
}

impl fmt::Display for GrowthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_value())
    }
}

pub fn growth_eval(spec: &GrowthSpec, s: f64) -> Result<(f64, f64)> {
    spec.eval(s)
}

/// Samples the ratio of `G` to the `beta`-critical envelope.
///
/// `AtMost` compares against `e^E (1+s)^beta` on `s in [1e-3, s_max]`, with
/// `s_max` where `E = 600` (or the last tabulated sample), and reports the
/// largest ratio. The class holds when the ratio over the top tenth of the
/// log-spaced range stays below its maximum over the rest, i.e. the ratio is
/// not still growing. `AtLeast` compares against `s^beta e^E` for `s >= 1`,
/// reports the smallest ratio, and holds when the ratio does not decay at the
/// top of the range.
pub fn check_growth_class(spec: &GrowthSpec, beta: f64, kind: CheckKind) -> GrowthReport {
    let p = spec.params();
    let q = p.tm_exponent();
    let mut s_max = (600.0 / p.alpha_n).powf(1.0 / q);
    if let GrowthFamily::Tabulated { points } = spec.family() {
        s_max = s_max.min(points[points.len() - 1].0);
    }
    let s_min = match kind {
        CheckKind::AtMost => 1e-3,
        CheckKind::AtLeast => 1.0,
    };
    if s_max <= s_min {
        return GrowthReport { holds: false, witness_constant: f64::NAN, worst_s: s_min };
    }
    let samples = 4000;
    let mut ratios = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        let s = (s_min.ln() + (s_max / s_min).ln() * k as f64 / samples as f64).exp().min(s_max);
        let e = spec.critical_exponent(s);
        let ln_env = match kind {
            CheckKind::AtMost => e + beta * s.ln_1p(),
            CheckKind::AtLeast => e + beta * s.ln(),
        };
        match spec.ln_value_with_exponent(s, e) {
            Ok(lg) => ratios.push((s, (lg - ln_env).exp())),
            Err(_) => {
                return GrowthReport { holds: false, witness_constant: f64::NAN, worst_s: s }
            }
        }
    }
    // the top tenth of the (log-spaced) range must not set a new extreme
    let split = ratios.len() - ratios.len() / 10;
    let (lower, upper) = ratios.split_at(split);
    let extreme = |set: &[(f64, f64)], max: bool| {
        set.iter().copied().fold(
            (f64::NAN, if max { f64::NEG_INFINITY } else { f64::INFINITY }),
            |acc, x| {
                if (max && x.1 > acc.1) || (!max && x.1 < acc.1) {
                    x
                } else {
                    acc
                }
            },
        )
    };
    match kind {
        CheckKind::AtMost => {
            let lo = extreme(lower, true);
            let hi = extreme(upper, true);
            let worst = if hi.1 > lo.1 { hi } else { lo };
            GrowthReport {
                holds: hi.1 <= lo.1 * (1.0 + 1e-9) && worst.1.is_finite(),
                witness_constant: worst.1,
                worst_s: worst.0,
            }
        }
        CheckKind::AtLeast => {
            let lo = extreme(lower, false);
            let hi = extreme(upper, false);
            let worst = if hi.1 < lo.1 { hi } else { lo };
            GrowthReport {
                holds: hi.1 >= lo.1 * (1.0 - 1e-9) && worst.1 > 0.0,
                witness_constant: worst.1,
                worst_s: worst.0,
            }
        }
    }
}

/// `(c/alpha_N) (1 + alpha_N |s|^q)^{beta (N-1)/N} e^{alpha_N |s|^q}`, the
/// comparison function used for whole-space growth. It is strictly
/// increasing for `s > 0` whenever `-N/(N-1) < beta <= 0`.
pub fn tilde_g_space(beta: f64, c: f64, p: &DimensionParams, s: f64) -> Result<f64> {
    let q = p.tm_exponent();
    if !(beta > -q && beta <= 0.0) {
        return Err(Error::Domain(format!("beta must lie in ({}, 0], got {beta}", -q)));
    }
    let e = p.alpha_n * s.abs().powf(q);
    if e > EXP_LIMIT {
        return Err(Error::Saturation { s, radius: None });
    }
    Ok(c / p.alpha_n * (1.0 + e).powf(beta / q) * e.exp())
}
