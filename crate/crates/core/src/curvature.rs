//! Curvature of doubly warped metrics `dt² + A(t,x)² dx² + B(t,x)² ds_m²`.
//!
//! With respect to the frame `{∂_t, ∂_x, v, v₁, v₂}` (`v`'s tangent to the
//! round fibre) the curvature operator is determined by five scalars:
//!
//! ```text
//! λ₁₂ = −A_tt / A
//! λ₁₃ = −B_tt / B
//! λ̃   = −B_xt / (A²B) + A_t B_x / (A³B)
//! λ₂₃ = −A_t B_t / (AB) − B_xx / (A²B) + A_x B_x / (A³B)
//! λ₃  = (1 − B_t²) / B² − B_x² / (A²B²)
//! ```
//!
//! `λ̃` is the coefficient of `∂_x∧v` in `R(∂_t∧v)` with the coordinate
//! field `∂_x`. In an orthonormal frame the off-diagonal entry of the mixed
//! block is `A·λ̃` ([`CurvatureBlocks::lambda_tilde_unit`]); that is the value
//! fed to the k-chain criteria.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::kchain::BlockValues;
use crate::spline::{CubicSpline, SplineEnd};

/// Domain of the `x` coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum XDomain {
    /// `x ∈ [0, 2π)`, periodic.
    Circle,
    Interval {
        lo: f64,
        hi: f64,
        closed_lo: bool,
        closed_hi: bool,
    },
}

impl XDomain {
    pub fn symmetric_half_pi() -> Self {
        XDomain::Interval {
            lo: -FRAC_PI_2,
            hi: FRAC_PI_2,
            closed_lo: false,
            closed_hi: false,
        }
    }

    fn contains(&self, x: f64) -> bool {
        match *self {
            XDomain::Circle => x.is_finite(),
            XDomain::Interval {
                lo,
                hi,
                closed_lo,
                closed_hi,
            } => (x > lo || (closed_lo && x == lo)) && (x < hi || (closed_hi && x == hi)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDomain {
    pub t_range: (f64, f64),
    pub x: XDomain,
}

impl ProfileDomain {
    /// Interior in `t`; in `x` the closure flags decide.
    pub fn check(&self, t: f64, x: f64) -> Result<()> {
        let (t0, t1) = self.t_range;
        if !(t > t0 && t < t1) {
            return Err(LabError::Domain {
                t,
                x,
                reason: format!("t must lie in the open interval ({t0}, {t1})"),
            });
        }
        if !self.x.contains(x) {
            return Err(LabError::Domain {
                t,
                x,
                reason: format!("x outside {:?}", self.x),
            });
        }
        Ok(())
    }
}

/// A metric `dt² + A² dx² + B² ds_m²` with second-order derivative access.
pub trait WarpedProfile: Sync {
    /// Dimension `m` of the round fibre.
    fn fibre_dim(&self) -> usize;

    fn domain(&self) -> ProfileDomain;

    /// Jets of `A` and `B` at `(t, x)`.
    fn jets(&self, t: f64, x: f64) -> Result<(Jet, Jet)>;

    /// Plain values of `A` and `B`; used by the finite-difference oracle.
    fn values(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        let (a, b) = self.jets(t, x)?;
        Ok((a.v, b.v))
    }

    fn total_dim(&self) -> usize {
        self.fibre_dim() + 2
    }
}

/// The five curvature-operator entries at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBlocks {
    pub lambda12: f64,
    pub lambda13: f64,
    pub lambda23: f64,
    /// Coordinate normalization: the `∂_x∧v` coefficient of `R(∂_t∧v)`.
    pub lambda_tilde: f64,
    pub lambda3: f64,
    pub t: f64,
    pub x: f64,
    /// `A(t, x)`, needed to convert between the two mixed-block normalizations.
    pub a: f64,
}

impl CurvatureBlocks {
    /// The `∂_t∧v` coefficient of `R(∂_x∧v)`, equal to `A²·λ̃`.
    pub fn mixed_coefficient(&self) -> f64 {
        self.a * self.a * self.lambda_tilde
    }

    /// Off-diagonal mixed entry in an orthonormal frame, `A·λ̃`.
    pub fn lambda_tilde_unit(&self) -> f64 {
        self.a * self.lambda_tilde
    }

    /// The operator data in an orthonormal frame.
    pub fn orthonormal(&self) -> BlockValues {
        BlockValues {
            l12: self.lambda12,
            l13: self.lambda13,
            l23: self.lambda23,
            ltilde: self.lambda_tilde_unit(),
            l3: self.lambda3,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.lambda12,
            self.lambda13,
            self.lambda23,
            self.lambda_tilde,
            self.lambda3,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Blocks from the jets of `A` and `B` at one point.
pub fn blocks_from_jets(a: Jet, b: Jet, t: f64, x: f64) -> CurvatureBlocks {
    let (av, bv) = (a.v, b.v);
    let a2 = av * av;
    let a3 = a2 * av;
    CurvatureBlocks {
        lambda12: -a.tt / av,
        lambda13: -b.tt / bv,
        lambda_tilde: -b.tx / (a2 * bv) + a.t * b.x / (a3 * bv),
        lambda23: -a.t * b.t / (av * bv) - b.xx / (a2 * bv) + a.x * b.x / (a3 * bv),
        lambda3: (1.0 - b.t * b.t) / (bv * bv) - b.x * b.x / (a2 * bv * bv),
        t,
        x,
        a: av,
    }
}

/// Curvature blocks of `profile` at `(t, x)`.
pub fn curvature_blocks<P: WarpedProfile + ?Sized>(
    profile: &P,
    t: f64,
    x: f64,
) -> Result<CurvatureBlocks> {
    profile.domain().check(t, x)?;
    let (a, b) = profile.jets(t, x)?;
    if !(a.v > 0.0) {
        return Err(LabError::NonPositive {
            which: "A",
            t,
            x,
            value: a.v,
        });
    }
    if !(b.v > 0.0) {
        return Err(LabError::NonPositive {
            which: "B",
            t,
            x,
            value: b.v,
        });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(LabError::Reconstruction(format!(
            "non-finite derivative at ({t}, {x})"
        )));
    }
    let blocks = blocks_from_jets(a, b, t, x);
    if !blocks.is_finite() {
        return Err(LabError::Numerical(format!(
            "non-finite curvature block at ({t}, {x})"
        )));
    }
    Ok(blocks)
}

/// `K(∂_x∧v)` for the metric `r² cos²x ds² + A(x)² dx²`, given `A` and `A'` at `x`.
pub fn boundary_profile_curvature(a: f64, a_prime: f64, x: f64) -> Result<f64> {
    if !(x.abs() < FRAC_PI_2) {
        return Err(LabError::Domain {
            t: f64::NAN,
            x,
            reason: "boundary curvature formula is singular at x = ±π/2".into(),
        });
    }
    if !(a > 0.0) {
        return Err(LabError::NonPositive {
            which: "A",
            t: f64::NAN,
            x,
            value: a,
        });
    }
    Ok((1.0 - x.sin() * a_prime / (x.cos() * a)) / (a * a))
}

/// Pointwise data of the neck profile `B = t b cos x`, `A = t b (1 − η + η a)`.
///
/// Derivatives are logarithmic: `phi = b'/b`, `dphi = (b'/b)'`, `psi = a'/a`.
/// Passing `t = 1` together with `t·φ`, `t²·φ'` and `t·ψ` yields `t²(λ₁₂ + λ₁₃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeckPointData {
    pub t: f64,
    pub a: f64,
    pub eta: f64,
    pub alpha: f64,
    pub phi: f64,
    pub dphi: f64,
    pub psi: f64,
}

/// Closed form of `λ₁₂ + λ₁₃` along the neck.
pub fn analytic_sum_lambda12_13(d: &NeckPointData) -> Result<f64> {
    let w = 1.0 - d.eta + d.eta * d.a;
    if !(w > 0.0) {
        return Err(LabError::invalid(
            "eta",
            format!("1 − η + ηa = {w} must be positive"),
        ));
    }
    let q = d.eta * d.a / w;
    Ok((d.alpha * q - 2.0) * (d.dphi + 2.0 * d.phi / d.t)
        - 2.0 * d.phi * d.phi
        - q * (2.0 * d.psi * d.phi + d.psi * d.psi))
}

// ---------------------------------------------------------------------------
// profile implementations

/// Profile given by closed-form jet functions.
pub struct ClosedFormProfile<FA, FB> {
    pub m: usize,
    pub domain: ProfileDomain,
    pub a: FA,
    pub b: FB,
}

impl<FA, FB> WarpedProfile for ClosedFormProfile<FA, FB>
where
    FA: Fn(Jet, Jet) -> Jet + Sync,
    FB: Fn(Jet, Jet) -> Jet + Sync,
{
    fn fibre_dim(&self) -> usize {
        self.m
    }
    fn domain(&self) -> ProfileDomain {
        self.domain
    }
    fn jets(&self, t: f64, x: f64) -> Result<(Jet, Jet)> {
        let (tj, xj) = (Jet::var_t(t), Jet::var_x(x));
        Ok(((self.a)(tj, xj), (self.b)(tj, xj)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { h: f64 },
}

/// Profile defined by expression strings.
#[derive(Debug, Clone)]
pub struct ExprProfile {
    pub m: usize,
    pub domain: ProfileDomain,
    pub a: Expr,
    pub b: Expr,
    pub mode: DerivativeMode,
}

fn fd_jet(f: impl Fn(f64, f64) -> f64, t: f64, x: f64, h: f64) -> Jet {
    let c = f(t, x);
    let (tp, tm) = (f(t + h, x), f(t - h, x));
    let (xp, xm) = (f(t, x + h), f(t, x - h));
    Jet {
        v: c,
        t: (tp - tm) / (2.0 * h),
        x: (xp - xm) / (2.0 * h),
        tt: (tp - 2.0 * c + tm) / (h * h),
        xx: (xp - 2.0 * c + xm) / (h * h),
        tx: (f(t + h, x + h) - f(t + h, x - h) - f(t - h, x + h) + f(t - h, x - h))
            / (4.0 * h * h),
    }
}

impl WarpedProfile for ExprProfile {
    fn fibre_dim(&self) -> usize {
        self.m
    }
    fn domain(&self) -> ProfileDomain {
        self.domain
    }
    fn jets(&self, t: f64, x: f64) -> Result<(Jet, Jet)> {
        Ok(match self.mode {
            DerivativeMode::Analytic => (self.a.eval_jet(t, x), self.b.eval_jet(t, x)),
            DerivativeMode::FiniteDifference { h } => (
                fd_jet(|t, x| self.a.eval(t, x), t, x, h),
                fd_jet(|t, x| self.b.eval(t, x), t, x, h),
            ),
        })
    }
    fn values(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        Ok((self.a.eval(t, x), self.b.eval(t, x)))
    }
}

/// Profile sampled on a tensor grid, reconstructed with cubic splines
/// (natural in `t`; periodic in `x` on the circle, natural otherwise).
#[derive(Debug, Clone)]
pub struct GridProfile {
    m: usize,
    domain: ProfileDomain,
    xs: Vec<f64>,
    /// Per `x` column, splines in `t` for `A` and `B`.
    a_cols: Vec<CubicSpline>,
    b_cols: Vec<CubicSpline>,
}

impl GridProfile {
    /// `a[i][j]`, `b[i][j]` are samples at `(ts[i], xs[j])`.
    pub fn new(
        m: usize,
        x_domain: XDomain,
        ts: Vec<f64>,
        xs: Vec<f64>,
        a: &[Vec<f64>],
        b: &[Vec<f64>],
    ) -> Result<Self> {
        if m < 2 {
            return Err(LabError::invalid("m", "fibre dimension must be at least 2"));
        }
        if ts.len() < 4 || xs.len() < 4 {
            return Err(LabError::Reconstruction(
                "grid too coarse: need at least 4 samples per axis".into(),
            ));
        }
        let col = |data: &[Vec<f64>], j: usize| -> Result<CubicSpline> {
            let vals: Vec<f64> = data.iter().map(|row| row[j]).collect();
            CubicSpline::natural(&ts, &vals)
        };
        for rows in [a, b] {
            if rows.len() != ts.len() || rows.iter().any(|r| r.len() != xs.len()) {
                return Err(LabError::Reconstruction("ragged sample grid".into()));
            }
            if rows.iter().flatten().any(|v| !(*v > 0.0)) {
                return Err(LabError::Reconstruction(
                    "samples of A and B must be positive".into(),
                ));
            }
        }
        let a_cols = (0..xs.len()).map(|j| col(a, j)).collect::<Result<_>>()?;
        let b_cols = (0..xs.len()).map(|j| col(b, j)).collect::<Result<_>>()?;
        let domain = ProfileDomain {
            t_range: (ts[0], ts[ts.len() - 1]),
            x: match x_domain {
                XDomain::Circle => XDomain::Circle,
                XDomain::Interval { .. } => XDomain::Interval {
                    lo: xs[0],
                    hi: xs[xs.len() - 1],
                    closed_lo: false,
                    closed_hi: false,
                },
            },
        };
        Ok(GridProfile {
            m,
            domain,
            xs,
            a_cols,
            b_cols,
        })
    }

    /// Reads a CSV with header `t,x,A,B` (any row order, full tensor grid).
    pub fn from_csv(path: &Path, m: usize, x_domain: XDomain) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, m, x_domain)
    }

    pub fn from_csv_str(text: &str, m: usize, x_domain: XDomain) -> Result<Self> {
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || lineno == 0 && line.starts_with(|c: char| c.is_alphabetic()) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(LabError::Parse(format!(
                    "line {}: expected 4 columns t,x,A,B",
                    lineno + 1
                )));
            }
            let mut r = [0.0; 4];
            for (k, f) in fields.iter().enumerate() {
                r[k] = f.parse().map_err(|_| {
                    LabError::Parse(format!("line {}, column {}: bad number `{f}`", lineno + 1, k + 1))
                })?;
            }
            rows.push(r);
        }
        let mut ts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let mut xs: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut a = vec![vec![f64::NAN; xs.len()]; ts.len()];
        let mut b = a.clone();
        for r in &rows {
            let i = ts.partition_point(|&v| v < r[0]);
            let j = xs.partition_point(|&v| v < r[1]);
            a[i][j] = r[2];
            b[i][j] = r[3];
        }
        if a.iter().flatten().any(|v| v.is_nan()) {
            return Err(LabError::Reconstruction(
                "CSV does not cover a full tensor grid".into(),
            ));
        }
        Self::new(m, x_domain, ts, xs, &a, &b)
    }

    fn field_jet(&self, cols: &[CubicSpline], t: f64, x: f64) -> Result<Jet> {
        let n = self.xs.len();
        let mut v = Vec::with_capacity(n);
        let mut vt = Vec::with_capacity(n);
        let mut vtt = Vec::with_capacity(n);
        for c in cols {
            let (a, b, d) = c.eval(t);
            v.push(a);
            vt.push(b);
            vtt.push(d);
        }
        let (end, period) = match self.domain.x {
            XDomain::Circle => (SplineEnd::Periodic, 2.0 * PI),
            XDomain::Interval { .. } => (SplineEnd::Natural, 0.0),
        };
        let sv = CubicSpline::build(&self.xs, &v, end, period)?;
        let st = CubicSpline::build(&self.xs, &vt, end, period)?;
        let stt = CubicSpline::build(&self.xs, &vtt, end, period)?;
        let (f, fx, fxx) = sv.eval(x);
        let (ft, ftx, _) = st.eval(x);
        let (ftt, _, _) = stt.eval(x);
        Ok(Jet {
            v: f,
            t: ft,
            x: fx,
            tt: ftt,
            tx: ftx,
            xx: fxx,
        })
    }
}

impl WarpedProfile for GridProfile {
    fn fibre_dim(&self) -> usize {
        self.m
    }
    fn domain(&self) -> ProfileDomain {
        self.domain
    }
    fn jets(&self, t: f64, x: f64) -> Result<(Jet, Jet)> {
        Ok((
            self.field_jet(&self.a_cols, t, x)?,
            self.field_jet(&self.b_cols, t, x)?,
        ))
    }
}

/// Rescaled profile `c² g`: `A_c(t, x) = c A(t/c, x)`, `B_c(t, x) = c B(t/c, x)`.
pub struct ScaledProfile<'a, P: ?Sized> {
    pub inner: &'a P,
    pub c: f64,
}

impl<P: WarpedProfile + ?Sized> WarpedProfile for ScaledProfile<'_, P> {
    fn fibre_dim(&self) -> usize {
        self.inner.fibre_dim()
    }
    fn domain(&self) -> ProfileDomain {
        let d = self.inner.domain();
        ProfileDomain {
            t_range: (self.c * d.t_range.0, self.c * d.t_range.1),
            x: d.x,
        }
    }
    fn jets(&self, t: f64, x: f64) -> Result<(Jet, Jet)> {
        let c = self.c;
        let (a, b) = self.inner.jets(t / c, x)?;
        let sc = |j: Jet| Jet {
            v: c * j.v,
            t: j.t,
            x: c * j.x,
            tt: j.tt / c,
            tx: j.tx,
            xx: c * j.xx,
        };
        Ok((sc(a), sc(b)))
    }
}

/// Evaluates blocks on a tensor grid, in parallel over rows.
pub fn block_grid<P: WarpedProfile + ?Sized>(
    profile: &P,
    ts: &[f64],
    xs: &[f64],
) -> Result<Vec<CurvatureBlocks>> {
    use rayon::prelude::*;
    let rows: Vec<Result<Vec<CurvatureBlocks>>> = ts
        .par_iter()
        .map(|&t| xs.iter().map(|&x| curvature_blocks(profile, t, x)).collect())
        .collect();
    let mut out = Vec::with_capacity(ts.len() * xs.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

pub mod fd_oracle {
    //! Finite-difference Riemann tensor of the coordinate metric.
    //!
    //! Works on the four coordinates `(t, x, y₁, y₂)`, where `(y₁, y₂)` are
    //! stereographic coordinates on a great 2-sphere of the fibre (totally
    //! geodesic, so its curvature is the restriction of the full one). Only
    //! plain values of `A` and `B` are used; every derivative comes from
    //! fourth-order central stencils.

    use nalgebra::Matrix4;

    use crate::error::Result;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct OracleBlocks {
        pub lambda12: f64,
        pub lambda13: f64,
        pub lambda23: f64,
        /// Mixed entry `⟨R(e_t∧e_v), e_x∧e_v⟩` in the orthonormal frame.
        pub mixed_unit: f64,
        pub lambda3: f64,
        /// Value of `A` at the point.
        pub a: f64,
    }

    impl OracleBlocks {
        /// Coordinate-normalized mixed block, comparable to `CurvatureBlocks::lambda_tilde`.
        pub fn lambda_tilde(&self) -> f64 {
            self.mixed_unit / self.a
        }
    }

    fn metric<F>(ab: &F, p: [f64; 4]) -> Result<Matrix4<f64>>
    where
        F: Fn(f64, f64) -> Result<(f64, f64)>,
    {
        let (a, b) = ab(p[0], p[1])?;
        let r2 = p[2] * p[2] + p[3] * p[3];
        let sphere = 4.0 / ((1.0 + r2) * (1.0 + r2));
        Ok(Matrix4::from_diagonal(&nalgebra::Vector4::new(
            1.0,
            a * a,
            b * b * sphere,
            b * b * sphere,
        )))
    }

    const D1: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

    /// Curvature blocks at `(t, x)` from the metric values alone.
    pub fn oracle_blocks<F>(ab: F, t: f64, x: f64, h: f64) -> Result<OracleBlocks>
    where
        F: Fn(f64, f64) -> Result<(f64, f64)>,
    {
        let base = [t, x, 0.0, 0.0];
        let shifted = |d: &[(usize, f64)]| -> Result<Matrix4<f64>> {
            let mut p = base;
            for &(i, s) in d {
                p[i] += s * h;
            }
            metric(&ab, p)
        };
        let g = shifted(&[])?;
        // first derivatives dg[c] = ∂_c g
        let mut dg = [Matrix4::zeros(); 4];
        for (c, dgc) in dg.iter_mut().enumerate() {
            for &(s, w) in &D1 {
                *dgc += shifted(&[(c, s)])? * w;
            }
            *dgc /= 12.0 * h;
        }
        // second derivatives ddg[c][d] = ∂_c ∂_d g
        let mut ddg = [[Matrix4::zeros(); 4]; 4];
        for c in 0..4 {
            let mut acc = g * (-30.0);
            for &(s, w) in &[(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
                acc += shifted(&[(c, s)])? * w;
            }
            ddg[c][c] = acc / (12.0 * h * h);
            for d in c + 1..4 {
                let mut acc = Matrix4::zeros();
                for &(s1, w1) in &D1 {
                    for &(s2, w2) in &D1 {
                        acc += shifted(&[(c, s1), (d, s2)])? * (w1 * w2);
                    }
                }
                let m = acc / (144.0 * h * h);
                ddg[c][d] = m;
                ddg[d][c] = m;
            }
        }
        let ginv = g
            .try_inverse()
            .ok_or_else(|| crate::error::LabError::Numerical("singular metric".into()))?;
        // Γ^a_{bc}
        let mut gamma = [[[0.0; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let mut s = 0.0;
                    for d in 0..4 {
                        s += ginv[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                    }
                    gamma[a][b][c] = 0.5 * s;
                }
            }
        }
        let riemann = |a: usize, b: usize, c: usize, d: usize| -> f64 {
            let mut r = 0.5
                * (ddg[b][c][(a, d)] + ddg[a][d][(b, c)] - ddg[b][d][(a, c)] - ddg[a][c][(b, d)]);
            for e in 0..4 {
                for f in 0..4 {
                    r += g[(e, f)]
                        * (gamma[e][b][c] * gamma[f][a][d] - gamma[e][b][d] * gamma[f][a][c]);
                }
            }
            r
        };
        let norm: Vec<f64> = (0..4).map(|i| g[(i, i)].sqrt()).collect();
        let op = |a: usize, b: usize, c: usize, d: usize| {
            riemann(a, b, c, d) / (norm[a] * norm[b] * norm[c] * norm[d])
        };
        Ok(OracleBlocks {
            lambda12: op(0, 1, 0, 1),
            lambda13: op(0, 2, 0, 2),
            lambda23: op(1, 2, 1, 2),
            mixed_unit: op(0, 2, 1, 2),
            lambda3: op(2, 3, 2, 3),
            a: norm[1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dom() -> ProfileDomain {
        ProfileDomain {
            t_range: (0.0, 10.0),
            x: XDomain::Circle,
        }
    }

    #[test]
    fn flat_times_round_product() {
        let rho = 0.7;
        let p = ClosedFormProfile {
            m: 3,
            domain: dom(),
            a: |_t, _x| Jet::constant(1.0),
            b: move |_t, _x| Jet::constant(rho),
        };
        let b = curvature_blocks(&p, 1.0, 0.3).unwrap();
        assert_eq!(
            (b.lambda12, b.lambda13, b.lambda23, b.lambda_tilde),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert_relative_eq!(b.lambda3, 1.0 / (rho * rho), epsilon = 1e-15);
    }

    #[test]
    fn round_sphere_slice() {
        let p = ClosedFormProfile {
            m: 2,
            domain: dom(),
            a: |_t, _x| Jet::constant(1.0),
            b: |t: Jet, _x| t.sin(),
        };
        let b = curvature_blocks(&p, std::f64::consts::FRAC_PI_4, 1.0).unwrap();
        assert_relative_eq!(b.lambda13, 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.lambda3, 1.0, epsilon = 1e-14);
        assert_eq!(b.lambda12, 0.0);
        assert_eq!(b.lambda23, 0.0);
        assert_eq!(b.lambda_tilde, 0.0);
    }

    #[test]
    fn x_independent_profile_has_no_mixed_block() {
        let p = ClosedFormProfile {
            m: 2,
            domain: dom(),
            a: |t: Jet, _x| 1.0 + t * t,
            b: |t: Jet, _x| (0.3 * t).cosh(),
        };
        for &(t, x) in &[(0.5, 0.1), (2.0, 4.0), (7.5, 3.0)] {
            assert_eq!(curvature_blocks(&p, t, x).unwrap().lambda_tilde, 0.0);
        }
    }

    #[test]
    fn domain_and_positivity_errors() {
        let p = ClosedFormProfile {
            m: 2,
            domain: ProfileDomain {
                t_range: (0.0, 1.0),
                x: XDomain::symmetric_half_pi(),
            },
            a: |_t, x: Jet| x.cos(),
            b: |_t, _x| Jet::constant(1.0),
        };
        assert!(matches!(
            curvature_blocks(&p, 1.0, 0.0),
            Err(LabError::Domain { .. })
        ));
        assert!(matches!(
            curvature_blocks(&p, 0.5, FRAC_PI_2),
            Err(LabError::Domain { .. })
        ));
        let q = ClosedFormProfile {
            m: 2,
            domain: dom(),
            a: |t: Jet, _x| 1.0 - t,
            b: |_t, _x| Jet::constant(1.0),
        };
        assert!(matches!(
            curvature_blocks(&q, 2.0, 0.0),
            Err(LabError::NonPositive { which: "A", .. })
        ));
    }

    #[test]
    fn mixed_normalizations_are_consistent() {
        let p = ClosedFormProfile {
            m: 2,
            domain: dom(),
            a: |t: Jet, x: Jet| 2.0 + 0.3 * x.sin() * t.cos(),
            b: |t: Jet, x: Jet| 1.0 + 0.2 * x.cos() * t.sin(),
        };
        let b = curvature_blocks(&p, 1.1, 0.4).unwrap();
        let (a, bj) = p.jets(1.1, 0.4).unwrap();
        let direct = -bj.tx / bj.v + a.t * bj.x / (a.v * bj.v);
        assert_relative_eq!(b.mixed_coefficient(), direct, epsilon = 1e-14);
        assert_relative_eq!(b.lambda_tilde_unit() * a.v, direct, epsilon = 1e-14);
    }

    #[test]
    fn boundary_curvature_cases() {
        assert_relative_eq!(
            boundary_profile_curvature(0.1, 0.0, 0.4).unwrap(),
            100.0,
            epsilon = 1e-12
        );
        // A = r(1 − η + η a∞), η = cos²x, maximum at x = 0
        let (r, ainf) = (0.1, 5.0);
        assert_relative_eq!(
            boundary_profile_curvature(r * ainf, 0.0, 0.0).unwrap(),
            1.0 / (r * r * ainf * ainf),
            epsilon = 1e-12
        );
        assert!(boundary_profile_curvature(0.1, 0.0, FRAC_PI_2).is_err());
        assert!(boundary_profile_curvature(0.1, 0.0, -FRAC_PI_2).is_err());
    }

    #[test]
    fn analytic_sum_degenerate_cases() {
        let d = NeckPointData {
            t: 3.0,
            a: 1.0,
            eta: 0.5,
            alpha: 1.5,
            phi: 0.0,
            dphi: 0.0,
            psi: 0.0,
        };
        assert_eq!(analytic_sum_lambda12_13(&d).unwrap(), 0.0);
        let d = NeckPointData {
            eta: 0.0,
            a: 3.0,
            phi: -0.2,
            dphi: 0.05,
            psi: 0.4,
            ..d
        };
        let expect = -2.0 * (0.05 + 2.0 * -0.2 / 3.0) - 2.0 * 0.04;
        assert_relative_eq!(analytic_sum_lambda12_13(&d).unwrap(), expect, epsilon = 1e-15);
        let bad = NeckPointData {
            eta: 1.0,
            a: -1.0,
            ..d
        };
        assert!(analytic_sum_lambda12_13(&bad).is_err());
    }

    #[test]
    fn oracle_on_round_sphere_and_mixed_sign() {
        // B = sin t, A = 1: unit sphere slice, all sectional curvatures 1
        let o = fd_oracle::oracle_blocks(|t, _x| Ok((1.0, t.sin())), 1.0, 0.2, 1e-3).unwrap();
        assert_relative_eq!(o.lambda13, 1.0, epsilon = 1e-8);
        assert_relative_eq!(o.lambda3, 1.0, epsilon = 1e-8);
        assert!(o.lambda12.abs() < 1e-8 && o.lambda23.abs() < 1e-8);
    }

    #[test]
    fn oracle_matches_engine_on_mixed_profile() {
        let p = ClosedFormProfile {
            m: 3,
            domain: dom(),
            a: |t: Jet, x: Jet| 2.0 + 0.3 * x.sin() * t.cos(),
            b: |t: Jet, x: Jet| 1.0 + 0.2 * x.cos() * t.sin(),
        };
        for &(t, x) in &[(1.1, 0.4), (2.5, 3.9), (0.7, 5.5)] {
            let e = curvature_blocks(&p, t, x).unwrap();
            let o = fd_oracle::oracle_blocks(|t, x| p.values(t, x), t, x, 1e-3).unwrap();
            assert!(e.lambda_tilde.abs() > 1e-3);
            let tol = 1e-7;
            assert!((e.lambda12 - o.lambda12).abs() < tol, "{e:?} {o:?}");
            assert!((e.lambda13 - o.lambda13).abs() < tol, "{e:?} {o:?}");
            assert!((e.lambda23 - o.lambda23).abs() < tol, "{e:?} {o:?}");
            assert!((e.lambda3 - o.lambda3).abs() < tol, "{e:?} {o:?}");
            assert!((e.lambda_tilde_unit() - o.mixed_unit).abs() < tol, "{e:?} {o:?}");
        }
    }

    #[test]
    fn grid_profile_reconstructs_smooth_field() {
        let nt = 80;
        let nx = 96;
        let ts: Vec<f64> = (0..nt).map(|i| 0.5 + 1.5 * i as f64 / (nt - 1) as f64).collect();
        let xs: Vec<f64> = (0..nx).map(|j| 2.0 * PI * j as f64 / nx as f64).collect();
        let fa = |t: f64, x: f64| 2.0 + 0.3 * x.sin() * t.cos();
        let fb = |t: f64, x: f64| 1.0 + 0.2 * x.cos() * t.sin();
        let a: Vec<Vec<f64>> = ts.iter().map(|&t| xs.iter().map(|&x| fa(t, x)).collect()).collect();
        let b: Vec<Vec<f64>> = ts.iter().map(|&t| xs.iter().map(|&x| fb(t, x)).collect()).collect();
        let g = GridProfile::new(3, XDomain::Circle, ts, xs, &a, &b).unwrap();
        let exact = ClosedFormProfile {
            m: 3,
            domain: dom(),
            a: |t: Jet, x: Jet| 2.0 + 0.3 * x.sin() * t.cos(),
            b: |t: Jet, x: Jet| 1.0 + 0.2 * x.cos() * t.sin(),
        };
        let bg = curvature_blocks(&g, 1.2, 2.0).unwrap();
        let be = curvature_blocks(&exact, 1.2, 2.0).unwrap();
        assert!((bg.lambda23 - be.lambda23).abs() < 1e-3);
        assert!((bg.lambda3 - be.lambda3).abs() < 1e-3);
        assert!((bg.lambda12 - be.lambda12).abs() < 1e-3);
    }

    #[test]
    fn csv_grid_rejects_holes() {
        let csv = "t,x,A,B\n0,0,1,1\n0,1,1,1\n1,0,1,1\n";
        assert!(GridProfile::from_csv_str(csv, 2, XDomain::Circle).is_err());
    }
}
