//! Perelman's neck: a doubly warped metric on `[t₀, t∞] × S^{n−1}` joining a
//! small round sphere to the boundary of the ambient space.
//!
//! With `B = t b(t) cos x`, `A = t b(t)(1 − η(x) + η(x) a(t))` the warping
//! functions are driven by
//!
//! ```text
//! b'/b = −β (t − t₀) / (2 t₀² ln 2t₀)      t₀ ≤ t ≤ 2t₀
//! b'/b = −β ln 2t₀ / (t ln² t)             t ≥ 2t₀
//! a'/a = −α b'/b
//! ```
//!
//! `t∞` is typically far beyond the range of `f64` (`ln t∞` is several
//! hundred), so everything is stored against `s = ln t`. Curvature on the
//! neck is evaluated for the locally rescaled metric `g / t²`, i.e. the
//! stored block values are `t² λ`. All inequalities are homogeneous, so
//! verdicts are unaffected.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{BoundaryDescriptor, GluingInterface};
use crate::curvature::{
    blocks_from_jets, boundary_profile_curvature, CurvatureBlocks, NeckPointData, ProfileDomain,
    WarpedProfile, XDomain,
};
use crate::error::{LabError, Result};
use crate::jet::Jet;
use crate::kchain::{
    check_inequalities, BlockOperator, BlockValues, ChainStatus, ChainVerdict, Inequality, Margins,
};
use crate::quadrature::{bisect, integrate};
use crate::spline::CubicSpline;

// ---------------------------------------------------------------------------
// η profiles

/// Bump function `η` on `[−π/2, π/2]` with `max η = η(0) = 1` and
/// `η(±π/2) = η'(±π/2) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum EtaProfile {
    /// `cos^{2p} x`, `p ≥ 1`; `p = 1` is `cos² x`.
    Power { p: f64 },
    /// `1 − |sin x|^{2p}`, `p ≥ 1`; `p = 1` is `cos² x`.
    Plateau { p: f64 },
    /// Tabulated profile; cubic spline with `η' = 0` imposed at both ends.
    Table { x: Vec<f64>, eta: Vec<f64> },
}

/// `√π Γ(p + ½) / Γ(p + 1) / π`, the mean of `cos^{2p}` over `[−π/2, π/2]`.
fn power_mean(p: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    (0.5 * PI.ln() + ln_gamma(p + 0.5) - ln_gamma(p + 1.0)).exp() / PI
}

impl EtaProfile {
    pub fn cos2() -> Self {
        EtaProfile::Power { p: 1.0 }
    }

    pub fn name(&self) -> String {
        match self {
            EtaProfile::Power { p } if *p == 1.0 => "cos2".into(),
            EtaProfile::Power { p } => format!("cos^(2*{p})"),
            EtaProfile::Plateau { p } => format!("1-|sin|^(2*{p})"),
            EtaProfile::Table { x, .. } => format!("table[{}]", x.len()),
        }
    }

    /// `(η, η', η'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            EtaProfile::Power { p } => {
                let p = *p;
                let v = x.cos().powi(2);
                if v <= 0.0 {
                    return (0.0, 0.0, if p == 1.0 { 2.0 } else { 0.0 });
                }
                let vp = v.powf(p - 1.0);
                (
                    vp * v,
                    -p * vp * (2.0 * x).sin(),
                    p * vp * (4.0 * (p - 1.0) * (1.0 - v) - 2.0 * (2.0 * v - 1.0)),
                )
            }
            EtaProfile::Plateau { p } => {
                let p = *p;
                let u = x.sin().powi(2);
                if u <= 0.0 {
                    return (1.0, 0.0, if p == 1.0 { -2.0 } else { 0.0 });
                }
                let up = u.powf(p - 1.0);
                (
                    1.0 - up * u,
                    -p * up * (2.0 * x).sin(),
                    -p * up * (4.0 * (p - 1.0) * (1.0 - u) + 2.0 * (1.0 - 2.0 * u)),
                )
            }
            EtaProfile::Table { x: xs, eta } => {
                // validated on construction
                let s = CubicSpline::clamped(xs, eta, 0.0, 0.0).expect("validated table");
                s.eval(x)
            }
        }
    }

    /// Mean of `η` over `[−π/2, π/2]`.
    pub fn mean(&self) -> Result<f64> {
        match self {
            EtaProfile::Power { p } => Ok(power_mean(*p)),
            EtaProfile::Plateau { p } => Ok(1.0 - power_mean(*p)),
            EtaProfile::Table { .. } => {
                let q = integrate(|x| self.eval(x).0, -FRAC_PI_2, FRAC_PI_2, 1e-12, 1e-12)?;
                Ok(q.value / PI)
            }
        }
    }

    /// Member of the power/plateau family with the given mean in `(0, 1)`.
    pub fn with_mean(f: f64) -> Result<Self> {
        if !(f > 0.0 && f < 1.0) {
            return Err(LabError::invalid(
                "eta",
                format!("mean of η must lie in (0, 1), got {f}"),
            ));
        }
        if (f - 0.5).abs() < 1e-15 {
            return Ok(Self::cos2());
        }
        let target = if f < 0.5 { f } else { 1.0 - f };
        // power_mean decreases from 1/2 at p = 1 to 0 like (πp)^{-1/2}
        let mut hi = 2.0_f64;
        while power_mean(hi) > target {
            hi *= 2.0;
            if hi > 1e16 {
                return Err(LabError::invalid("eta", format!("mean {f} too extreme")));
            }
        }
        let lp = bisect(|lp: f64| Ok(power_mean(lp.exp()) - target), 0.0, hi.ln(), 1e-15)?;
        let p = lp.exp();
        Ok(if f < 0.5 {
            EtaProfile::Power { p }
        } else {
            EtaProfile::Plateau { p }
        })
    }

    /// Reads a CSV table with columns `x,eta` covering `[−π/2, π/2]`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let mut next = |col: usize| -> Result<f64> {
                let f = parts.next().ok_or_else(|| {
                    LabError::Parse(format!("line {}: expected columns x,eta", i + 1))
                })?;
                f.parse().map_err(|_| {
                    LabError::Parse(format!("line {}, column {col}: bad number `{f}`", i + 1))
                })
            };
            xs.push(next(1)?);
            ys.push(next(2)?);
        }
        Self::table(xs, ys)
    }

    pub fn table(x: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let s = CubicSpline::clamped(&x, &eta, 0.0, 0.0)?;
        let (lo, hi) = s.domain();
        if (lo + FRAC_PI_2).abs() > 1e-9 || (hi - FRAC_PI_2).abs() > 1e-9 {
            return Err(LabError::invalid("eta", "table must span [−π/2, π/2]"));
        }
        let max = eta.iter().cloned().fold(f64::MIN, f64::max);
        if (max - 1.0).abs() > 1e-9 {
            return Err(LabError::invalid("eta", format!("max η must be 1, got {max}")));
        }
        if eta.iter().any(|&e| !(0.0..=1.0 + 1e-12).contains(&e)) {
            return Err(LabError::invalid("eta", "values must lie in [0, 1]"));
        }
        for end in [lo, hi] {
            let v = s.eval(end).0;
            if v.abs() > 1e-9 {
                return Err(LabError::invalid(
                    "eta",
                    format!("need η = 0 at x = {end}; got {v}"),
                ));
            }
        }
        Ok(EtaProfile::Table { x, eta })
    }

    fn validate(&self) -> Result<()> {
        match self {
            EtaProfile::Power { p } | EtaProfile::Plateau { p } if !(*p >= 1.0 && p.is_finite()) => {
                Err(LabError::invalid("eta", format!("exponent p must be ≥ 1, got {p}")))
            }
            EtaProfile::Table { x, eta } => Self::table(x.clone(), eta.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// boundary data

/// The boundary metric `r² cos²x ds²_{n−2} + A(x)² dx²` of the ambient space,
/// `A = r(1 − η + η a∞)`, total `x`-length `πR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientBoundaryMetric {
    /// Dimension of the neck (and of the docking station).
    pub n: usize,
    pub r: f64,
    pub big_r: f64,
    pub a_inf: f64,
    pub eta: EtaProfile,
}

/// A check whose failure is reported but does not abort the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl AmbientBoundaryMetric {
    /// Profile with the given `η`; `R` follows from the length integral.
    pub fn new(n: usize, r: f64, a_inf: f64, eta: EtaProfile) -> Result<Self> {
        eta.validate()?;
        let big_r = r * (1.0 + (a_inf - 1.0) * eta.mean()?);
        let m = AmbientBoundaryMetric {
            n,
            r,
            big_r,
            a_inf,
            eta,
        };
        m.validate()?;
        Ok(m)
    }

    /// `η = cos² x` (the default when only `r` and `a∞` are known).
    pub fn cos2(n: usize, r: f64, a_inf: f64) -> Result<Self> {
        Self::new(n, r, a_inf, EtaProfile::cos2())
    }

    /// Chooses `η` in the power/plateau family so that `∫A = πR`.
    pub fn fit(n: usize, r: f64, big_r: f64, a_inf: f64) -> Result<Self> {
        if !(a_inf > 1.0) {
            return Err(LabError::invalid("a_inf", format!("need a∞ > 1, got {a_inf}")));
        }
        let f = (big_r / r - 1.0) / (a_inf - 1.0);
        if !(f > 0.0 && f < 1.0) {
            return Err(LabError::precondition(
                "r < R < r·a∞",
                format!("r = {r}, R = {big_r}, a∞ = {a_inf}"),
            ));
        }
        let eta = EtaProfile::with_mean(f)?;
        let mut m = Self::new(n, r, a_inf, eta)?;
        m.big_r = big_r;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let (r, a) = (self.r, self.a_inf);
        if self.n < 4 {
            return Err(LabError::invalid(
                "n",
                format!("the neck needs n ≥ 4 (fibre dimension ≥ 2), got {}", self.n),
            ));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(LabError::invalid("r", format!("need 0 < r < 1, got {r}")));
        }
        if !(a > 1.0) {
            return Err(LabError::invalid("a_inf", format!("need a∞ > 1, got {a}")));
        }
        if !(a < 1.0 / r) {
            return Err(LabError::precondition(
                "a∞ < 1/r",
                format!("a∞ = {a}, 1/r = {}", 1.0 / r),
            ));
        }
        if !(self.big_r < 1.0) {
            return Err(LabError::precondition("R < 1", format!("R = {}", self.big_r)));
        }
        let kmin = self.min_sectional_curvature(256)?;
        if !(kmin > 1.0) {
            return Err(LabError::precondition(
                "boundary sectional curvature > 1",
                format!("minimum {kmin} on the verification grid"),
            ));
        }
        Ok(())
    }

    /// `(A, A')` at `x`.
    pub fn profile(&self, x: f64) -> (f64, f64) {
        let (e, de, _) = self.eta.eval(x);
        let c = self.a_inf - 1.0;
        (self.r * (1.0 + e * c), self.r * de * c)
    }

    /// Interior verification grid, one cell away from the poles.
    pub fn x_grid(count: usize) -> Vec<f64> {
        (0..count)
            .map(|j| -FRAC_PI_2 + (j + 1) as f64 * PI / (count + 1) as f64)
            .collect()
    }

    /// Minimum of `K(∂_x∧v)` and `K(v₁∧v₂)` over the verification grid.
    pub fn min_sectional_curvature(&self, count: usize) -> Result<f64> {
        let mut kmin = f64::INFINITY;
        for x in Self::x_grid(count) {
            let (a, da) = self.profile(x);
            let kxv = boundary_profile_curvature(a, da, x)?;
            // (1 − B_x²/A²)/B² with B = r cos x, written without cancellation
            let (e, _, _) = self.eta.eval(x);
            let excess = self.r * e * (self.a_inf - 1.0) * (a + self.r);
            let c2 = x.cos().powi(2);
            let kvv = 1.0 / (a * a) + excess / (a * a * self.r * self.r * c2);
            kmin = kmin.min(kxv).min(kvv);
        }
        Ok(kmin)
    }

    /// Checks that are part of the hypotheses but do not block the build.
    pub fn soft_diagnostics(&self, rho: f64) -> Vec<Diagnostic> {
        let (r, big_r, a) = (self.r, self.big_r, self.a_inf);
        vec![
            Diagnostic {
                name: "rho < R".into(),
                holds: rho < big_r,
                detail: format!("ρ = {rho}, R = {big_r}"),
            },
            Diagnostic {
                name: "r < R^2".into(),
                holds: r < big_r * big_r,
                detail: format!("r = {r}, R² = {}", big_r * big_r),
            },
            Diagnostic {
                name: "a_inf > rho/r".into(),
                holds: a > rho / r,
                detail: format!("a∞ = {a}, ρ/r = {}", rho / r),
            },
            Diagnostic {
                name: "a_inf >= R/r".into(),
                holds: a >= big_r / r * (1.0 - 1e-12),
                detail: format!("a∞ = {a}, R/r = {}", big_r / r),
            },
        ]
    }
}

// ---------------------------------------------------------------------------
// parameters and constants

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckParams {
    pub rho: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub t0: f64,
    /// Points in `t`: a quarter on `[t₀, 2t₀]` (uniform in `ln t`), the rest
    /// uniform in `ln ln t` up to `t∞`.
    pub nt: usize,
    /// Interior points in `x`.
    pub nx: usize,
    pub quad_tol: f64,
}

impl NeckParams {
    pub fn new(rho: f64, epsilon: f64, delta: f64, t0: f64) -> Self {
        NeckParams {
            rho,
            epsilon,
            delta,
            t0,
            nt: 512,
            nx: 128,
            quad_tol: 1e-8,
        }
    }
}

/// `β = (1−ε)(ln ρ − ln r)/(1 + 1/(4 ln 2t₀))`.
pub fn beta(rho: f64, r: f64, epsilon: f64, t0: f64) -> f64 {
    (1.0 - epsilon) * (rho.ln() - r.ln()) / (1.0 + 1.0 / (4.0 * (2.0 * t0).ln()))
}

/// `α = (1+δ) ln a∞ / ((1−ε) ln(ρ/r))`.
pub fn alpha(rho: f64, r: f64, a_inf: f64, epsilon: f64, delta: f64) -> f64 {
    (1.0 + delta) * a_inf.ln() / ((1.0 - epsilon) * (rho / r).ln())
}

fn check_params(b: &AmbientBoundaryMetric, p: &NeckParams) -> Result<()> {
    let r = b.r;
    if !(p.rho * p.rho > r) {
        return Err(LabError::precondition(
            "rho in (r^(1/2), R)",
            format!("ρ = {} must exceed √r = {}", p.rho, r.sqrt()),
        ));
    }
    if !(p.rho < 1.0) {
        return Err(LabError::invalid("rho", format!("need ρ < 1, got {}", p.rho)));
    }
    for (name, v) in [("epsilon", p.epsilon), ("delta", p.delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(LabError::invalid(name, format!("need 0 < {name} < 1, got {v}")));
        }
    }
    if !(p.t0 > 1.0 && (2.0 * p.t0).is_finite()) {
        return Err(LabError::invalid("t0", format!("need t₀ > 1, got {}", p.t0)));
    }
    if p.nt < 8 || p.nx < 2 {
        return Err(LabError::invalid("grid", "need nt ≥ 8 and nx ≥ 2"));
    }
    if !(p.quad_tol > 0.0) {
        return Err(LabError::invalid("quad_tol", "must be positive"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// the solution

/// State of `a`, `b` at one time node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckNode {
    /// `s = ln t`.
    pub s: f64,
    pub ln_b: f64,
    pub ln_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckIntegrals {
    /// `∫_{t₀}^∞ b'/b` by quadrature.
    pub int_b: f64,
    /// `(1−ε) ln(r/ρ)`.
    pub int_b_expected: f64,
    /// `∫_{t₀}^∞ a'/a` by quadrature.
    pub int_a: f64,
    /// `(1+δ) ln a∞`.
    pub int_a_expected: f64,
    pub quad_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeckSolution {
    pub boundary: AmbientBoundaryMetric,
    pub params: NeckParams,
    pub beta: f64,
    pub alpha: f64,
    /// `ln 2t₀`.
    pub l0: f64,
    /// `ln t∞`.
    pub s_inf: f64,
    pub nodes: Vec<NeckNode>,
    pub xs: Vec<f64>,
    pub integrals: NeckIntegrals,
    /// `ln a(t∞) − ln a∞`.
    pub root_residual: f64,
    /// Jump of `b'/b` at `t = 2t₀`.
    pub junction_residual: f64,
    /// `max |ln(a b^α) − α ln ρ|` over the nodes.
    pub monitor_drift: f64,
    /// `ln` of the main rescaling factor `r/(t∞ b(t∞))`.
    pub ln_rescale_main: f64,
    /// `ln λ`, where `II ≡ −λ` at the small end after the main rescaling.
    pub ln_lambda: f64,
    pub diagnostics: Vec<Diagnostic>,
}

/// `t·b'/b` and `t²·(b'/b)'` at `s = ln t`.
fn phi_terms(beta: f64, t0: f64, l0: f64, s: f64) -> (f64, f64) {
    if s <= l0 {
        // u = t/t₀ keeps t₀² out of the arithmetic
        let u = (s - t0.ln()).exp();
        let c = beta / (2.0 * l0);
        (-c * u * (u - 1.0), -c * u * u)
    } else {
        let k = beta * l0;
        (-k / (s * s), k * (1.0 / (s * s) + 2.0 / (s * s * s)))
    }
}

impl NeckSolution {
    fn tphi(&self, s: f64) -> (f64, f64) {
        phi_terms(self.beta, self.params.t0, self.l0, s)
    }

    pub fn s0(&self) -> f64 {
        self.params.t0.ln()
    }

    /// `∫ b'/b dt` over `[e^{s_a}, e^{s_b}]` (in `s`, split at `2t₀`).
    fn integral_b(&self, sa: f64, sb: f64) -> Result<(f64, f64)> {
        integral_phi(self.beta, self.params.t0, self.l0, sa, sb, self.params.quad_tol)
    }

    /// `(ln b, ln a)` at `s`, integrating from the nearest node below.
    pub fn state_at(&self, s: f64) -> Result<(f64, f64)> {
        if !(s >= self.s0() && s <= self.s_inf) {
            return Err(LabError::Domain {
                t: s.exp(),
                x: f64::NAN,
                reason: format!("ln t = {s} outside [{}, {}]", self.s0(), self.s_inf),
            });
        }
        let i = self.nodes.partition_point(|n| n.s <= s).saturating_sub(1);
        let node = self.nodes[i];
        let (ib, _) = self.integral_b(node.s, s)?;
        let (ia, _) = integral_a(self.alpha, self.beta, self.params.t0, self.l0, node.s, s, self.params.quad_tol)?;
        Ok((node.ln_b + ib, node.ln_a + ia))
    }

    /// Jets of `A/t`, `B/t` for the metric `g/t²` at time `t = e^s`.
    pub fn scaled_jets(&self, s: f64, x: f64, ln_a: f64, ln_b: f64) -> (Jet, Jet) {
        let (tphi, t2dphi) = self.tphi(s);
        let al = self.alpha;
        let (a, b) = (ln_a.exp(), ln_b.exp());
        let (e, de, d2e) = self.boundary.eta.eval(x);
        let tpsi = -al * tphi;
        let t2dpsi = -al * t2dphi;
        let w = 1.0 - e + e * a;
        let g1 = 1.0 + tphi;
        let g2 = 2.0 * tphi + t2dphi + tphi * tphi;
        let (sx, cx) = x.sin_cos();
        let aj = Jet {
            v: b * w,
            t: b * (g1 * w + e * a * tpsi),
            x: b * de * (a - 1.0),
            tt: b * (g2 * w + 2.0 * g1 * e * a * tpsi + e * a * (t2dpsi + tpsi * tpsi)),
            tx: b * (g1 * de * (a - 1.0) + de * a * tpsi),
            xx: b * d2e * (a - 1.0),
        };
        let bj = Jet {
            v: b * cx,
            t: b * g1 * cx,
            x: -b * sx,
            tt: b * g2 * cx,
            tx: -b * g1 * sx,
            xx: -b * cx,
        };
        (aj, bj)
    }

    /// `t²`-scaled blocks from their closed forms, together with a rounding
    /// bound for each orthonormal block value.
    ///
    /// Written so that no two terms of size `O(1)` cancel: the mixed block
    /// is `−tan x · q · tψ / (b w)` with `q = ηa/w`, which the generic jet
    /// formula only obtains as a difference of two nearly equal numbers.
    pub fn scaled_blocks_with_noise(
        &self,
        s: f64,
        x: f64,
        ln_a: f64,
        ln_b: f64,
    ) -> (CurvatureBlocks, BlockValues) {
        let (tphi, t2dphi) = self.tphi(s);
        let al = self.alpha;
        let (a, b) = (ln_a.exp(), ln_b.exp());
        let (e, de, _) = self.boundary.eta.eval(x);
        let (sx, cx) = x.sin_cos();
        let tanx = sx / cx;
        let tpsi = -al * tphi;
        let t2dpsi = -al * t2dphi;
        let w = 1.0 - e + e * a;
        let q = e * a / w;
        let bw2 = (b * w) * (b * w);
        let sum = |terms: &[f64]| -> (f64, f64) {
            (terms.iter().sum(), terms.iter().map(|v| v.abs()).sum())
        };
        let g2 = [2.0 * tphi, t2dphi, tphi * tphi];
        let (l13, m13) = sum(&g2);
        let (l12, m12) = sum(&[
            g2[0],
            g2[1],
            g2[2],
            2.0 * q * tpsi,
            2.0 * tphi * q * tpsi,
            q * t2dpsi,
            q * tpsi * tpsi,
        ]);
        let (l23, m23) = sum(&[
            1.0 / bw2,
            -1.0,
            -2.0 * tphi,
            -tphi * tphi,
            -q * tpsi,
            -tphi * q * tpsi,
            -de * (a - 1.0) * tanx / (bw2 * w),
        ]);
        let (l3, m3) = sum(&[
            1.0 / bw2,
            e * (a - 1.0) * (w + 1.0) / (bw2 * cx * cx),
            -1.0,
            -2.0 * tphi,
            -tphi * tphi,
        ]);
        let unit = -tanx * q * tpsi / (b * w);
        let tol = 16.0 * f64::EPSILON;
        let blocks = CurvatureBlocks {
            lambda12: -l12,
            lambda13: -l13,
            lambda23: l23,
            lambda_tilde: unit / (b * w),
            lambda3: l3,
            t: s,
            x,
            a: b * w,
        };
        let noise = BlockValues::new(tol * m12, tol * m13, tol * m23, tol * unit.abs(), tol * m3);
        (blocks, noise)
    }

    /// `t²`-scaled blocks at `(s, x)`; the `t` field holds `s`.
    pub fn scaled_blocks(&self, s: f64, x: f64) -> Result<CurvatureBlocks> {
        let (ln_b, ln_a) = self.state_at(s)?;
        Ok(self.scaled_blocks_with_noise(s, x, ln_a, ln_b).0)
    }

    /// The same blocks through the generic jet formulas.
    pub fn scaled_blocks_from_jets(&self, s: f64, x: f64) -> Result<CurvatureBlocks> {
        let (ln_b, ln_a) = self.state_at(s)?;
        let (aj, bj) = self.scaled_jets(s, x, ln_a, ln_b);
        Ok(blocks_from_jets(aj, bj, s, x))
    }

    fn grid_with_noise(&self) -> Vec<(CurvatureBlocks, BlockValues)> {
        self.nodes
            .par_iter()
            .flat_map_iter(|node| {
                self.xs
                    .iter()
                    .map(move |&x| self.scaled_blocks_with_noise(node.s, x, node.ln_a, node.ln_b))
            })
            .collect()
    }

    /// The `t²`-scaled block grid over nodes × `xs` (row-major in `t`).
    pub fn block_grid(&self) -> Vec<CurvatureBlocks> {
        self.grid_with_noise().into_iter().map(|(b, _)| b).collect()
    }

    /// Pointwise data for the closed form of `t²(λ₁₂ + λ₁₃)`.
    pub fn scaled_point_data(&self, s: f64, x: f64) -> Result<NeckPointData> {
        let (_, ln_a) = self.state_at(s)?;
        let (tphi, t2dphi) = self.tphi(s);
        Ok(NeckPointData {
            t: 1.0,
            a: ln_a.exp(),
            eta: self.boundary.eta.eval(x).0,
            alpha: self.alpha,
            phi: tphi,
            dphi: t2dphi,
            psi: -self.alpha * tphi,
        })
    }

    /// The unscaled metric as a profile; usable while `t` is representable.
    pub fn profile(&self) -> NeckProfile<'_> {
        NeckProfile { neck: self }
    }

    /// Fibre dimension `m = n − 2`.
    pub fn fibre_dim(&self) -> usize {
        self.boundary.n - 2
    }

    /// `b(t∞)` and `t·b'/b` at `t∞`.
    fn large_end_state(&self) -> (f64, f64, f64) {
        let last = self.nodes.last().expect("non-empty");
        (last.ln_b.exp(), last.ln_a.exp(), self.tphi(self.s_inf).0)
    }

    /// Principal curvatures at the large end after the main rescaling, for
    /// the normal pointing out of the neck: `(II(e_x), II(v))` at `x`.
    pub fn large_end_principal(&self, x: f64) -> (f64, f64) {
        let (b, a, tphi) = self.large_end_state();
        let e = self.boundary.eta.eval(x).0;
        let w = 1.0 - e + e * a;
        let q = e * a / w;
        let f = b / self.boundary.r;
        (f * (1.0 + tphi - self.alpha * q * tphi), f * (1.0 + tphi))
    }

    /// Large-end `A(x)` after the main rescaling.
    pub fn large_end_profile(&self, x: f64) -> f64 {
        let (_, a, _) = self.large_end_state();
        let e = self.boundary.eta.eval(x).0;
        self.boundary.r * (1.0 - e + e * a)
    }

    /// Smallest principal curvature at the large end over the x-grid.
    pub fn large_end_min_principal(&self) -> f64 {
        self.xs
            .iter()
            .map(|&x| {
                let (p, q) = self.large_end_principal(x);
                p.min(q)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn integral_phi(beta: f64, t0: f64, l0: f64, sa: f64, sb: f64, tol: f64) -> Result<(f64, f64)> {
    let f = |s: f64| phi_terms(beta, t0, l0, s).0;
    split_integral(&f, l0, sa, sb, tol)
}

fn integral_a(alpha: f64, beta: f64, t0: f64, l0: f64, sa: f64, sb: f64, tol: f64) -> Result<(f64, f64)> {
    let f = |s: f64| -alpha * phi_terms(beta, t0, l0, s).0;
    split_integral(&f, l0, sa, sb, tol)
}

/// `∫ f ds` over `[sa, sb]`, splitting at the junction `l0`.
fn split_integral<F: Fn(f64) -> f64>(f: &F, l0: f64, sa: f64, sb: f64, tol: f64) -> Result<(f64, f64)> {
    let abs = tol * 1e-4;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut add = |a: f64, b: f64| -> Result<()> {
        if b > a {
            let q = integrate(f, a, b, abs, 1e-14)?;
            total += q.value;
            err += q.error;
        }
        Ok(())
    };
    if sb <= l0 || sa >= l0 {
        add(sa, sb)?;
    } else {
        add(sa, l0)?;
        add(l0, sb)?;
    }
    Ok((total, err))
}

/// Integrates the neck functions, locates `t∞` and records boundary data.
pub fn build_neck(boundary: &AmbientBoundaryMetric, params: &NeckParams) -> Result<NeckSolution> {
    check_params(boundary, params)?;
    boundary.validate()?;
    let (rho, r, a_inf) = (params.rho, boundary.r, boundary.a_inf);
    let (eps, del, t0) = (params.epsilon, params.delta, params.t0);
    let al = alpha(rho, r, a_inf, eps, del);
    if !(al > 1.0 && al < 2.0) {
        return Err(LabError::precondition(
            "alpha in (1, 2)",
            format!("α = {al}; adjust a∞, ε or δ"),
        ));
    }
    let kmin = boundary.min_sectional_curvature(256)?;
    let kreq = (rho / r).powf(eps);
    if !(kmin >= kreq) {
        return Err(LabError::precondition(
            "(rho/r)^epsilon g has sectional curvature >= 1",
            format!("min K = {kmin} < (ρ/r)^ε = {kreq}; decrease ε"),
        ));
    }
    let be = beta(rho, r, eps, t0);
    let l0 = (2.0 * t0).ln();
    let s0 = t0.ln();
    let tol = params.quad_tol;

    // t∞ from the accumulated a-integral
    let ln_ainf = a_inf.ln();
    let g = |s: f64| -> Result<f64> {
        Ok(integral_a(al, be, t0, l0, s0, s, tol)?.0 - ln_ainf)
    };
    let mut hi = s0 + 1.0;
    while g(hi)? <= 0.0 {
        hi = s0 + 2.0 * (hi - s0);
        if hi > 1e9 {
            return Err(LabError::RootFinding(format!(
                "a never reaches a∞ = {a_inf} (bracket exceeded ln t = {hi})"
            )));
        }
    }
    let s_inf = bisect(g, s0, hi, 1e-15)?;
    if s_inf <= l0 {
        return Err(LabError::RootFinding(
            "t∞ ≤ 2t₀: a∞ too close to 1 for this δ".into(),
        ));
    }

    // time grid
    let n1 = (params.nt / 8).max(4);
    let n2 = params.nt - n1;
    let mut ss: Vec<f64> = (0..n1).map(|i| s0 + (l0 - s0) * i as f64 / n1 as f64).collect();
    let (u0, u1) = (l0.ln(), s_inf.ln());
    ss.extend((0..n2).map(|j| {
        if j + 1 == n2 {
            s_inf
        } else {
            (u0 + (u1 - u0) * j as f64 / (n2 - 1) as f64).exp()
        }
    }));

    let mut nodes = Vec::with_capacity(ss.len());
    let (mut ln_b, mut ln_a) = (rho.ln(), 0.0);
    let mut quad_error = 0.0;
    let mut prev = s0;
    for &s in &ss {
        let (ib, eb) = integral_phi(be, t0, l0, prev, s, tol)?;
        let (ia, ea) = integral_a(al, be, t0, l0, prev, s, tol)?;
        ln_b += ib;
        ln_a += ia;
        quad_error += eb + ea;
        nodes.push(NeckNode { s, ln_b, ln_a });
        prev = s;
    }

    // totals to infinity: the tail beyond t∞ in u = 1/ln t
    let tail = |coef: f64| -> Result<(f64, f64)> {
        let q = integrate(
            |u: f64| if u > 0.0 { coef * phi_terms(be, t0, l0, 1.0 / u).0 / (u * u) } else { -coef * be * l0 },
            0.0,
            1.0 / s_inf,
            tol * 1e-4,
            1e-14,
        )?;
        Ok((q.value, q.error))
    };
    let last = nodes.last().expect("non-empty");
    let (tb, eb) = tail(1.0)?;
    let (ta, ea) = tail(-al)?;
    let integrals = NeckIntegrals {
        int_b: last.ln_b - rho.ln() + tb,
        int_b_expected: (1.0 - eps) * (r / rho).ln(),
        int_a: last.ln_a + ta,
        int_a_expected: (1.0 + del) * ln_ainf,
        quad_error: quad_error + eb + ea,
    };
    let root_residual = last.ln_a - ln_ainf;

    let left = phi_terms(be, t0, l0, l0).0;
    let right = -be * l0 / (l0 * l0);
    let junction_residual = (left - right).abs();

    let monitor_drift = nodes
        .iter()
        .map(|nd| (nd.ln_a + al * nd.ln_b - al * rho.ln()).abs())
        .fold(0.0, f64::max);

    // boundary normalizations
    let ln_rescale_main = r.ln() - s_inf - last.ln_b;
    let ln_lambda = -(ln_rescale_main + s0);

    let mut diagnostics = boundary.soft_diagnostics(rho);
    diagnostics.push(Diagnostic {
        name: "b(t_inf) > r".into(),
        holds: last.ln_b > r.ln(),
        detail: format!("b(t∞) = {}, r = {r}", last.ln_b.exp()),
    });

    let sol = NeckSolution {
        boundary: boundary.clone(),
        params: *params,
        beta: be,
        alpha: al,
        l0,
        s_inf,
        nodes,
        xs: AmbientBoundaryMetric::x_grid(params.nx),
        integrals,
        root_residual,
        junction_residual,
        monitor_drift,
        ln_rescale_main,
        ln_lambda,
        diagnostics,
    };
    let junction_tol = 1e-12 * (be / l0).max(1.0);
    if sol.junction_residual > junction_tol {
        return Err(LabError::Numerical(format!(
            "b'/b jumps by {} at t = 2t₀",
            sol.junction_residual
        )));
    }
    Ok(sol)
}

/// The neck metric in original time, with jets built by composition.
pub struct NeckProfile<'a> {
    neck: &'a NeckSolution,
}

impl WarpedProfile for NeckProfile<'_> {
    fn fibre_dim(&self) -> usize {
        self.neck.fibre_dim()
    }

    fn domain(&self) -> ProfileDomain {
        ProfileDomain {
            t_range: (self.neck.params.t0, self.neck.s_inf.exp()),
            x: XDomain::symmetric_half_pi(),
        }
    }

    fn jets(&self, t: f64, x: f64) -> Result<(Jet, Jet)> {
        let nk = self.neck;
        let s = t.ln();
        let (ln_b, ln_a) = nk.state_at(s)?;
        let (tphi, t2dphi) = nk.tphi(s);
        let (phi, dphi) = (tphi / t, t2dphi / (t * t));
        let (b, a) = (ln_b.exp(), ln_a.exp());
        // b' = bφ, b'' = b(φ' + φ²); a'/a = −αφ
        let psi = -nk.alpha * phi;
        let dpsi = -nk.alpha * dphi;
        let tj = Jet::var_t(t);
        let bj = tj.chain(b, b * phi, b * (dphi + phi * phi));
        let aj = tj.chain(a, a * psi, a * (dpsi + psi * psi));
        let (e, de, d2e) = nk.boundary.eta.eval(x);
        let ej = Jet::var_x(x).chain(e, de, d2e);
        let big_b = tj * bj * Jet::var_x(x).cos();
        let big_a = tj * bj * (1.0 - ej + ej * aj);
        Ok((big_a, big_b))
    }
}

// ---------------------------------------------------------------------------
// certification

/// Location and value of the smallest relative margin of one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginLocation {
    pub inequality: Inequality,
    /// Margin divided by the size of the terms it is computed from.
    pub relative: f64,
    /// Margin of the `t²`-scaled blocks.
    pub scaled: f64,
    /// `ln t`.
    pub s: f64,
    pub x: f64,
}

/// Power-law fit `log y = c + slope · log t` (over `ln t`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckCertificate {
    pub t0: f64,
    pub n: usize,
    pub grid_points: usize,
    /// Grid-wide verdict for `Ric₂ > 0`.
    pub verdict: ChainVerdict,
    pub equivalence: bool,
    pub failing_points: usize,
    pub worst: Vec<MarginLocation>,
    /// Fit of `ln min_x λ₂₃` against `ln t`.
    pub lambda23_decay: DecayFit,
    /// Fit of `ln min_x λ₃` against `ln t`.
    pub lambda3_decay: DecayFit,
    /// Smallest `C` with `max_x(|λ₁₂|, |λ₁₃|, |λ̃|) ≤ C ln t₀ / (t² ln² t)`.
    pub small_block_constant: f64,
    pub recommendation: Option<String>,
}

impl NeckCertificate {
    pub fn passed(&self) -> bool {
        self.verdict.status == ChainStatus::CertifiedPositive
    }

    pub fn worst_of(&self, q: Inequality) -> Option<&MarginLocation> {
        self.worst.iter().find(|m| m.inequality == q)
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> DecayFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    DecayFit {
        slope,
        intercept: my - slope * mx,
    }
}

/// Checks the `k = 2` inequalities at every grid point.
pub fn certify_neck_rick2(sol: &NeckSolution) -> Result<NeckCertificate> {
    let n = sol.boundary.n;
    let nx = sol.xs.len();
    let with_noise = sol.grid_with_noise();
    let checks: Vec<(Margins, Margins, Option<Inequality>)> = with_noise
        .par_iter()
        .map(|(b, noise)| -> Result<(Margins, Margins, Option<Inequality>)> {
            let op = BlockOperator::new(b.orthonormal(), n, 2)?.with_noise(*noise)?;
            let v = check_inequalities(&op);
            Ok((v.margins.expect("closed form"), op.magnitudes(), v.failing_inequality))
        })
        .collect::<Result<_>>()?;
    let grid: Vec<CurvatureBlocks> = with_noise.into_iter().map(|(b, _)| b).collect();

    let mut worst: Vec<MarginLocation> = Vec::new();
    for q in Inequality::ALL {
        let mut best: Option<MarginLocation> = None;
        for (idx, (m, mag, _)) in checks.iter().enumerate() {
            let rel = if mag.get(q) > 0.0 { m.get(q) / mag.get(q) } else { m.get(q) };
            if best.is_none_or(|b| rel < b.relative) {
                let blk = &grid[idx];
                best = Some(MarginLocation {
                    inequality: q,
                    relative: rel,
                    scaled: m.get(q),
                    s: blk.t,
                    x: blk.x,
                });
            }
        }
        worst.extend(best);
    }
    let failing_points = checks.iter().filter(|c| c.2.is_some()).count();
    let min_margins = checks
        .iter()
        .map(|c| c.0)
        .reduce(|a, b| a.min(&b))
        .expect("non-empty grid");

    let equivalence = n >= 5;
    let status = if failing_points == 0 {
        ChainStatus::CertifiedPositive
    } else if equivalence {
        ChainStatus::CertifiedNotPositive
    } else {
        ChainStatus::Inconclusive
    };
    let first_failure = Inequality::ALL
        .into_iter()
        .find(|&q| checks.iter().any(|c| c.2 == Some(q)));
    let verdict = ChainVerdict {
        status,
        basis: crate::kchain::VerdictBasis::ClosedForm,
        n,
        k: 2,
        failing_inequality: first_failure,
        margins: Some(min_margins),
        witness: None,
        min_value: None,
    };

    // decay shape checks on the ln ln t part of the grid
    let mut ln_t = Vec::new();
    let (mut l23, mut l3) = (Vec::new(), Vec::new());
    let mut small_c = 0.0_f64;
    let ln_t0 = sol.params.t0.ln();
    for (i, node) in sol.nodes.iter().enumerate() {
        let row = &grid[i * nx..(i + 1) * nx];
        let s = node.s;
        let min23 = row.iter().map(|b| b.lambda23).fold(f64::INFINITY, f64::min);
        let min3 = row.iter().map(|b| b.lambda3).fold(f64::INFINITY, f64::min);
        let maxsmall = row
            .iter()
            .map(|b| b.lambda12.abs().max(b.lambda13.abs()).max(b.lambda_tilde_unit().abs()))
            .fold(0.0, f64::max);
        small_c = small_c.max(maxsmall * s * s / ln_t0);
        if s > sol.l0 && min23 > 0.0 && min3 > 0.0 {
            ln_t.push(s);
            // ln λ = ln(t²λ) − 2 ln t
            l23.push(min23.ln() - 2.0 * s);
            l3.push(min3.ln() - 2.0 * s);
        }
    }
    let fit = |ys: &[f64]| {
        if ln_t.len() >= 2 {
            linear_fit(&ln_t, ys)
        } else {
            DecayFit {
                slope: f64::NAN,
                intercept: f64::NAN,
            }
        }
    };
    let recommendation = (failing_points > 0).then(|| {
        format!(
            "not certified at t₀ = {}: {} of {} grid points fail; retry with a larger t₀",
            sol.params.t0,
            failing_points,
            grid.len()
        )
    });
    Ok(NeckCertificate {
        t0: sol.params.t0,
        n,
        grid_points: grid.len(),
        verdict,
        equivalence,
        failing_points,
        worst,
        lambda23_decay: fit(&l23),
        lambda3_decay: fit(&l3),
        small_block_constant: small_c,
        recommendation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub t0: f64,
    pub passed: bool,
    pub failing_points: usize,
    pub min_relative_margin: f64,
    pub worst: Vec<MarginLocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    pub largest_passing: Option<f64>,
    /// Once passing, every larger `t₀` in the sweep passes as well.
    pub monotone: bool,
}

/// Builds and certifies the neck for each `t₀` (ascending).
pub fn sweep_t0(
    boundary: &AmbientBoundaryMetric,
    params: &NeckParams,
    t0s: &[f64],
) -> Result<SweepReport> {
    let mut t0s = t0s.to_vec();
    t0s.sort_by(f64::total_cmp);
    let mut entries = Vec::with_capacity(t0s.len());
    for &t0 in &t0s {
        let sol = build_neck(boundary, &NeckParams { t0, ..*params })?;
        let cert = certify_neck_rick2(&sol)?;
        entries.push(SweepEntry {
            t0,
            passed: cert.passed(),
            failing_points: cert.failing_points,
            min_relative_margin: cert.worst.iter().map(|w| w.relative).fold(f64::INFINITY, f64::min),
            worst: cert.worst,
        });
    }
    let first_pass = entries.iter().position(|e| e.passed);
    let monotone = first_pass.is_none_or(|i| entries[i..].iter().all(|e| e.passed));
    Ok(SweepReport {
        largest_passing: entries.iter().rev().find(|e| e.passed).map(|e| e.t0),
        entries,
        monotone,
    })
}

/// Parses `lo:hi:steps` into a geometric sequence.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(LabError::Parse(format!("sweep `{spec}`: expected lo:hi:steps")));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| LabError::Parse(format!("sweep `{spec}`: bad number `{s}`")))
    };
    let (lo, hi) = (num(parts[0])?, num(parts[1])?);
    let steps: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| LabError::Parse(format!("sweep `{spec}`: bad step count")))?;
    if !(lo > 0.0 && hi >= lo) || steps == 0 {
        return Err(LabError::Parse(format!("sweep `{spec}`: need 0 < lo ≤ hi, steps ≥ 1")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..steps)
        .map(|i| (a + (b - a) * i as f64 / (steps - 1) as f64).exp())
        .collect())
}

/// Scans `δ` until the large end has principal curvatures above 1.
pub fn tune_delta(
    boundary: &AmbientBoundaryMetric,
    params: &NeckParams,
    candidates: &[f64],
) -> Result<(f64, NeckSolution)> {
    let mut last_err = None;
    for &delta in candidates {
        match build_neck(boundary, &NeckParams { delta, ..*params }) {
            Ok(sol) if sol.large_end_min_principal() > 1.0 => return Ok((delta, sol)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        LabError::Infeasible {
            constraint: "large-end II > 1".into(),
            detail: "no candidate δ satisfies it".into(),
        }
    }))
}

// ---------------------------------------------------------------------------
// boundary interfaces

/// Interfaces at both ends after the main rescaling `r/(t∞ b(t∞))`.
///
/// Small end: round of radius `ρ/λ`, `II ≡ −λ`. Large end: the input boundary
/// metric, `II > 1` required. Principal curvatures use the normal pointing
/// out of the neck.
pub fn neck_boundary_interfaces(sol: &NeckSolution) -> Result<(GluingInterface, GluingInterface)> {
    if !sol.ln_lambda.is_finite() {
        return Err(LabError::Numerical("small-end normalization is not finite".into()));
    }
    let rho = sol.params.rho;
    let dim = sol.boundary.n - 1;
    // radius ρ and II ≡ −1 at scale 1/λ
    let small = GluingInterface {
        ln_scale: -sol.ln_lambda,
        ..GluingInterface::round("neck small end", dim, rho, -1.0)
    };
    let xs = &sol.xs;
    let realized: Vec<f64> = xs.iter().map(|&x| sol.large_end_profile(x)).collect();
    let input: Vec<f64> = xs.iter().map(|&x| sol.boundary.profile(x).0).collect();
    let mismatch = realized
        .iter()
        .zip(&input)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    if mismatch > 1e-6 {
        return Err(LabError::InterfaceMismatch(format!(
            "large-end profile differs from the ambient boundary by {mismatch:e} (relative)"
        )));
    }
    let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in xs {
        let (p, q) = sol.large_end_principal(x);
        pmin = pmin.min(p).min(q);
        pmax = pmax.max(p).max(q);
    }
    let large = GluingInterface {
        label: "neck large end".into(),
        boundary_dim: dim,
        descriptor: BoundaryDescriptor::Warped {
            r: sol.boundary.r,
            x: xs.clone(),
            a: realized,
            fingerprint: boundary_fingerprint(&sol.boundary),
        },
        principal_min: pmin,
        principal_max: pmax,
        ln_scale: 0.0,
    };
    Ok((small, large))
}

/// The ambient boundary as seen from the ambient piece, whose principal
/// curvatures are only known to be at least −1.
pub fn ambient_interface(boundary: &AmbientBoundaryMetric, xs: &[f64]) -> GluingInterface {
    GluingInterface {
        label: "ambient boundary".into(),
        boundary_dim: boundary.n - 1,
        descriptor: BoundaryDescriptor::Warped {
            r: boundary.r,
            x: xs.to_vec(),
            a: xs.iter().map(|&x| boundary.profile(x).0).collect(),
            fingerprint: boundary_fingerprint(boundary),
        },
        principal_min: -1.0,
        principal_max: -1.0,
        ln_scale: 0.0,
    }
}

fn boundary_fingerprint(b: &AmbientBoundaryMetric) -> String {
    format!("r={:.12e};a_inf={:.12e};eta={}", b.r, b.a_inf, b.eta.name())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> (AmbientBoundaryMetric, NeckParams) {
        (
            AmbientBoundaryMetric::cos2(5, 0.05, 6.0).unwrap(),
            NeckParams::new(0.3, 0.01, 0.01, 1e3),
        )
    }

    #[test]
    fn eta_families_meet_endpoint_conditions() {
        for eta in [
            EtaProfile::cos2(),
            EtaProfile::Power { p: 3.7 },
            EtaProfile::Plateau { p: 2.5 },
        ] {
            let (v0, d0, _) = eta.eval(0.0);
            assert_relative_eq!(v0, 1.0, epsilon = 1e-15);
            assert!(d0.abs() < 1e-15);
            for end in [-FRAC_PI_2, FRAC_PI_2] {
                let (v, d, _) = eta.eval(end);
                assert!(v.abs() < 1e-12 && d.abs() < 1e-12, "{eta:?}: {v} {d}");
            }
        }
    }

    #[test]
    fn eta_derivatives_match_differences() {
        let h = 1e-5;
        for eta in [EtaProfile::Power { p: 2.3 }, EtaProfile::Plateau { p: 1.7 }] {
            for &x in &[-1.2, -0.3, 0.4, 1.1] {
                let (_, d, dd) = eta.eval(x);
                let fd = (eta.eval(x + h).0 - eta.eval(x - h).0) / (2.0 * h);
                let fdd = (eta.eval(x + h).1 - eta.eval(x - h).1) / (2.0 * h);
                assert_relative_eq!(d, fd, epsilon = 1e-8);
                assert_relative_eq!(dd, fdd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn eta_mean_and_fit() {
        assert_relative_eq!(EtaProfile::cos2().mean().unwrap(), 0.5, epsilon = 1e-14);
        for f in [0.1, 0.3, 0.5, 0.7, 0.95] {
            let eta = EtaProfile::with_mean(f).unwrap();
            assert_relative_eq!(eta.mean().unwrap(), f, epsilon = 1e-12);
            let q = integrate(|x| eta.eval(x).0, -FRAC_PI_2, FRAC_PI_2, 1e-13, 1e-13).unwrap();
            assert_relative_eq!(q.value / PI, f, epsilon = 1e-9);
        }
    }

    #[test]
    fn eta_table_roundtrip() {
        let xs: Vec<f64> = (0..=200).map(|i| -FRAC_PI_2 + PI * i as f64 / 200.0).collect();
        let mut csv = String::from("x,eta\n");
        for x in &xs {
            csv.push_str(&format!("{x},{}\n", x.cos().powi(4)));
        }
        let eta = EtaProfile::from_csv_str(&csv).unwrap();
        assert_relative_eq!(eta.mean().unwrap(), 0.375, epsilon = 1e-6);
        assert!(EtaProfile::from_csv_str("x,eta\n0,1\n1,0.5\n").is_err());
    }

    #[test]
    fn reference_constants() {
        let (b, p) = reference();
        let sol = build_neck(&b, &p).unwrap();
        assert!(sol.alpha > 1.0 && sol.alpha < 2.0);
        assert!(sol.root_residual.abs() < 1e-12);
        assert!(sol.monitor_drift < 1e-10);
        assert!((sol.integrals.int_b - sol.integrals.int_b_expected).abs() < 1e-8);
        assert!((sol.integrals.int_a - sol.integrals.int_a_expected).abs() < 1e-8);
        // ln t∞ = (1+δ) ln 2t₀ / (δ (1 + 1/(4 ln 2t₀)))
        let l0 = (2e3_f64).ln();
        assert_relative_eq!(sol.s_inf, 1.01 * l0 / (0.01 * (1.0 + 0.25 / l0)), max_relative = 1e-10);
    }

    #[test]
    fn reference_set_violates_rho_below_big_r() {
        let (b, _) = reference();
        let d = b.soft_diagnostics(0.3);
        assert!(!d.iter().find(|d| d.name == "rho < R").unwrap().holds);
        assert!(d.iter().find(|d| d.name == "a_inf >= R/r").unwrap().holds);
    }

    #[test]
    fn preconditions_are_reported() {
        let b = AmbientBoundaryMetric::cos2(5, 0.05, 6.0).unwrap();
        let e = build_neck(&b, &NeckParams::new(0.2, 0.01, 0.01, 1e3)).unwrap_err();
        assert!(matches!(e, LabError::Precondition { ref condition, .. } if condition.contains("r^(1/2)")));
        assert!(AmbientBoundaryMetric::cos2(5, 0.05, 25.0).is_err());
        assert!(AmbientBoundaryMetric::cos2(3, 0.05, 6.0).is_err());
    }

    #[test]
    fn scaled_and_raw_blocks_agree() {
        let (b, p) = reference();
        let sol = build_neck(&b, &p).unwrap();
        let prof = sol.profile();
        for &(t, x) in &[(1.2e3, 0.3), (1.9e3, -1.0), (5e4, 0.8), (1e30, 1.3)] {
            let s: f64 = f64::ln(t);
            let sc = sol.scaled_blocks(s, x).unwrap();
            let raw = crate::curvature::curvature_blocks(&prof, t, x).unwrap();
            let t2 = t * t;
            for (u, v) in [
                (sc.lambda12, raw.lambda12 * t2),
                (sc.lambda13, raw.lambda13 * t2),
                (sc.lambda23, raw.lambda23 * t2),
                (sc.lambda_tilde_unit(), raw.lambda_tilde_unit() * t2),
                (sc.lambda3, raw.lambda3 * t2),
            ] {
                assert!((u - v).abs() <= 1e-9 * sc.orthonormal().scale(), "{u} {v}");
            }
        }
    }

    #[test]
    fn closed_form_blocks_match_jets() {
        let (b, p) = reference();
        let sol = build_neck(&b, &p).unwrap();
        for &s in &[7.0, 7.5, 8.0, 12.0, 40.0] {
            for &x in &[-1.3, -0.2, 0.0, 0.9] {
                let u = sol.scaled_blocks(s, x).unwrap();
                let v = sol.scaled_blocks_from_jets(s, x).unwrap();
                let tol = 1e-12 * u.orthonormal().scale();
                assert!((u.lambda12 - v.lambda12).abs() < tol);
                assert!((u.lambda13 - v.lambda13).abs() < tol);
                assert!((u.lambda23 - v.lambda23).abs() < tol);
                assert!((u.lambda3 - v.lambda3).abs() < tol);
                assert!((u.lambda_tilde_unit() - v.lambda_tilde_unit()).abs() < 1e-9 * u.lambda_tilde_unit().abs().max(tol));
                assert!((u.a - v.a).abs() < 1e-14 * u.a);
            }
        }
    }

    #[test]
    fn interfaces_after_rescaling() {
        let (b, p) = reference();
        let sol = build_neck(&b, &p).unwrap();
        let (small, large) = neck_boundary_interfaces(&sol).unwrap();
        // radius ρ/λ, II ≡ −λ
        assert_relative_eq!(small.ln_radius().unwrap(), 0.3f64.ln() - sol.ln_lambda, max_relative = 1e-14);
        assert_relative_eq!(small.principal_at(-sol.ln_lambda).0, -1.0);
        // final rescaling by λ/ρ: unit radius, II ≡ −ρ
        let s2 = small.rescaled_ln(sol.ln_lambda - 0.3f64.ln());
        assert!(s2.ln_radius().unwrap().abs() < 1e-12);
        assert_relative_eq!(s2.principal_at(0.0).0, -0.3, max_relative = 1e-12);
        assert!(large.principal_min > 1.0);
    }
}
