//! Docking stations, gluing checks and connected-sum certificates.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::neck::{
    alpha, ambient_interface, build_neck, certify_neck_rick2, neck_boundary_interfaces,
    AmbientBoundaryMetric, NeckCertificate, NeckParams,
};
use crate::quadrature::bisect;

// ---------------------------------------------------------------------------
// interfaces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BoundaryDescriptor {
    RoundSphere {
        radius: f64,
    },
    /// `r² cos²x ds² + A(x)² dx²`, sampled on an interior `x`-grid.
    Warped {
        r: f64,
        x: Vec<f64>,
        a: Vec<f64>,
        fingerprint: String,
    },
}

/// One side of a gluing: the induced boundary metric and the range of its
/// principal curvatures with respect to the normal pointing out of the piece.
///
/// The stored data describe the metric `e^{2 ln_scale} h`; sizes scale by
/// `e^{ln_scale}` and principal curvatures by `e^{−ln_scale}`. Necks carry
/// scale factors far outside the range of `f64`, hence the logarithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingInterface {
    pub label: String,
    pub boundary_dim: usize,
    pub descriptor: BoundaryDescriptor,
    pub principal_min: f64,
    pub principal_max: f64,
    pub ln_scale: f64,
}

impl GluingInterface {
    pub fn round(label: &str, boundary_dim: usize, radius: f64, principal: f64) -> Self {
        GluingInterface {
            label: label.into(),
            boundary_dim,
            descriptor: BoundaryDescriptor::RoundSphere { radius },
            principal_min: principal,
            principal_max: principal,
            ln_scale: 0.0,
        }
    }

    /// The interface of the metric `c² g`.
    pub fn rescaled(&self, c: f64) -> Self {
        self.rescaled_ln(c.ln())
    }

    /// The interface of the metric `e^{2 ln_c} g`.
    pub fn rescaled_ln(&self, ln_c: f64) -> Self {
        GluingInterface {
            ln_scale: self.ln_scale + ln_c,
            ..self.clone()
        }
    }

    /// Principal curvature range in units of the scale `e^{ln_ref}`.
    pub fn principal_at(&self, ln_ref: f64) -> (f64, f64) {
        let f = (ln_ref - self.ln_scale).exp();
        (self.principal_min * f, self.principal_max * f)
    }

    /// `ln` of the radius of a round boundary.
    pub fn ln_radius(&self) -> Option<f64> {
        match self.descriptor {
            BoundaryDescriptor::RoundSphere { radius } => Some(radius.ln() + self.ln_scale),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.principal_min.is_finite()
            && self.principal_max.is_finite()
            && self.ln_scale.is_finite())
        {
            return Err(LabError::invalid("interface", format!("{}: non-finite data", self.label)));
        }
        match &self.descriptor {
            BoundaryDescriptor::RoundSphere { radius } if !(*radius > 0.0) => Err(
                LabError::invalid("interface", format!("{}: radius must be positive", self.label)),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingVerdict {
    pub a: String,
    pub b: String,
    /// `min II_a + min II_b`; in actual units unless a side carries a scale
    /// factor beyond `e^600`, in which case the mean scale is used.
    pub margin: f64,
    /// Largest relative deviation between the two boundary metrics.
    pub isometry_residual: f64,
    pub passed: bool,
}

pub const ISOMETRY_TOL: f64 = 1e-6;
pub const GLUING_TOL: f64 = 1e-12;

/// Checks that the two boundary metrics agree and that the second
/// fundamental forms sum to a positive semi-definite form.
pub fn check_gluing(a: &GluingInterface, b: &GluingInterface) -> Result<GluingVerdict> {
    a.validate()?;
    b.validate()?;
    if a.boundary_dim != b.boundary_dim {
        return Err(LabError::DimensionMismatch {
            expected: a.boundary_dim,
            found: b.boundary_dim,
        });
    }
    // actual units when representable, otherwise the mean scale
    let ln_ref = if a.ln_scale.abs().max(b.ln_scale.abs()) < 600.0 {
        0.0
    } else {
        0.5 * (a.ln_scale + b.ln_scale)
    };
    let (fa, fb) = ((a.ln_scale - ln_ref).exp(), (b.ln_scale - ln_ref).exp());
    let rel = |u: f64, v: f64| (u - v).abs() / u.abs().max(v.abs());
    let residual = match (&a.descriptor, &b.descriptor) {
        (BoundaryDescriptor::RoundSphere { radius: ra }, BoundaryDescriptor::RoundSphere { radius: rb }) => {
            rel(ra * fa, rb * fb)
        }
        (
            BoundaryDescriptor::Warped { r: ra, x: xa, a: aa, .. },
            BoundaryDescriptor::Warped { r: rb, x: xb, a: ab, .. },
        ) => {
            if xa.len() != xb.len() || xa.iter().zip(xb).any(|(u, v)| (u - v).abs() > 1e-12) {
                return Err(LabError::InterfaceMismatch(format!(
                    "{} and {} are sampled on different grids",
                    a.label, b.label
                )));
            }
            aa.iter()
                .zip(ab)
                .map(|(u, v)| rel(u * fa, v * fb))
                .fold(rel(ra * fa, rb * fb), f64::max)
        }
        _ => {
            return Err(LabError::InterfaceMismatch(format!(
                "{} and {} have different boundary types",
                a.label, b.label
            )))
        }
    };
    if !(residual <= ISOMETRY_TOL) {
        return Err(LabError::InterfaceMismatch(format!(
            "{} and {} are not isometric (relative deviation {residual:e})",
            a.label, b.label
        )));
    }
    let margin = a.principal_at(ln_ref).0 + b.principal_at(ln_ref).0;
    Ok(GluingVerdict {
        a: a.label.clone(),
        b: b.label.clone(),
        margin,
        isometry_residual: residual,
        passed: margin >= -GLUING_TOL,
    })
}

// ---------------------------------------------------------------------------
// docking station

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMargin {
    pub name: String,
    /// Positive when the constraint holds strictly.
    pub margin: f64,
    pub holds: bool,
}

impl ConstraintMargin {
    fn new(name: &str, margin: f64) -> Self {
        ConstraintMargin {
            name: name.into(),
            margin,
            holds: margin > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DockingOptions {
    pub epsilon: f64,
    pub delta: f64,
    /// Factor applied to every strict upper bound.
    pub safety: f64,
    pub grid: usize,
}

impl Default for DockingOptions {
    fn default() -> Self {
        DockingOptions {
            epsilon: 0.01,
            delta: 0.01,
            safety: 0.9,
            grid: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DockingParams {
    pub n: usize,
    pub ell: usize,
    pub nu: f64,
    pub r0: f64,
    pub r_cone: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Boundary of each socket, handed to the neck with `ρ = ν`.
    pub boundary: AmbientBoundaryMetric,
    pub constraints: Vec<ConstraintMargin>,
    pub notes: Vec<String>,
}

/// `cos r · R₀ · sin(r + r⁴/q)/sin r`.
fn max_b(r_cone: f64, r0: f64, q: f64) -> f64 {
    r_cone.cos() * r0 * (r_cone + r_cone.powi(4) / q).sin() / r_cone.sin()
}

/// Bounds on `a∞` for given `(ρ, r, R)`: `(lower, upper, name of upper)`.
fn a_inf_window(rho: f64, r: f64, big_r: f64, opts: &DockingOptions) -> (f64, f64, &'static str) {
    let (eps, del) = (opts.epsilon, opts.delta);
    let q = rho / r;
    let lower = (big_r / r).max(q.powf((1.0 - eps) / (1.0 + del)));
    let curv = (1.0 / r) * q.powf(-eps / 2.0);
    let alpha_hi = q.powf(2.0 * (1.0 - eps) / (1.0 + del));
    if curv <= alpha_hi {
        (lower, curv, "a_inf < 1/r (curvature-profile consistency)")
    } else {
        (lower, alpha_hi, "alpha < 2")
    }
}

fn docking_constraints(
    nu: f64,
    r0: f64,
    r_cone: f64,
    boundary: &AmbientBoundaryMetric,
    opts: &DockingOptions,
) -> Result<Vec<ConstraintMargin>> {
    let nu2 = nu * nu;
    let (r, big_r, a) = (boundary.r, boundary.big_r, boundary.a_inf);
    let al = alpha(nu, r, a, opts.epsilon, opts.delta);
    let kmin = boundary.min_sectional_curvature(256)?;
    Ok(vec![
        ConstraintMargin::new("R0 < nu^2", nu2 - r0),
        ConstraintMargin::new("cos(r_cone) > nu", r_cone.cos() - nu),
        ConstraintMargin::new("max B with sin(r + r^4) < nu^2", nu2 - max_b(r_cone, r0, 1.0)),
        ConstraintMargin::new("max B with sin(r + r^4/4) < nu^2", nu2 - max_b(r_cone, r0, 4.0)),
        ConstraintMargin::new("r_cone + r_cone^4 < pi/2", FRAC_PI_2 - r_cone - r_cone.powi(4)),
        ConstraintMargin::new("nu^2 > r", nu2 - r),
        ConstraintMargin::new("nu < R", big_r - nu),
        ConstraintMargin::new("a_inf > R/r", a - big_r / r),
        ConstraintMargin::new("a_inf < 1/r", 1.0 / r - a),
        ConstraintMargin::new("alpha > 1", al - 1.0),
        ConstraintMargin::new("alpha < 2", 2.0 - al),
        ConstraintMargin::new("boundary sectional curvature > 1", kmin - 1.0),
        ConstraintMargin::new(
            "boundary curvature >= (nu/r)^epsilon",
            kmin - (nu / r).powf(opts.epsilon),
        ),
    ])
}

pub fn plan_docking(n: usize, ell: usize, nu: f64) -> Result<DockingParams> {
    plan_docking_with(n, ell, nu, &DockingOptions::default())
}

/// Searches a geometric grid in the cone radius, largest first.
pub fn plan_docking_with(n: usize, ell: usize, nu: f64, opts: &DockingOptions) -> Result<DockingParams> {
    if n < 3 {
        return Err(LabError::invalid("n", format!("need n ≥ 3, got {n}")));
    }
    if ell < 1 {
        return Err(LabError::invalid("ell", "need at least one socket"));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(LabError::invalid("nu", format!("need 0 < ν < 1, got {nu}")));
    }
    if !(opts.safety > 0.0 && opts.safety < 1.0) || opts.grid < 2 {
        return Err(LabError::invalid("options", "need safety in (0,1) and grid ≥ 2"));
    }
    let r_max = bisect(|r: f64| Ok(r + r.powi(4) - FRAC_PI_2), 0.0, FRAC_PI_2, 1e-15)?;
    let lo = 1e-4_f64;
    let hi = r_max * opts.safety;
    let cos_floor = nu + (1.0 - nu) * (1.0 - opts.safety);
    let mut binding: Option<(String, String)> = None;
    for i in (0..opts.grid).rev() {
        let r_cone = (lo.ln() + (hi / lo).ln() * i as f64 / (opts.grid - 1) as f64).exp();
        if r_cone.cos() <= cos_floor {
            binding.get_or_insert(("cos(r_cone) > nu".into(), format!("cos({r_cone}) ≤ {cos_floor}")));
            continue;
        }
        let nu2 = nu * nu;
        let bound = nu2 * r_cone.sin() / (r_cone.cos() * (r_cone + r_cone.powi(4)).sin());
        let r0 = opts.safety * nu2.min(bound);
        let r = max_b(r_cone, r0, 4.0);
        let big_r = r_cone.cos();
        let (a_lo, a_hi, upper_name) = a_inf_window(nu, r, big_r, opts);
        if !(a_lo < a_hi) {
            binding = Some((
                upper_name.into(),
                format!("r_cone = {r_cone}: need a∞ > {a_lo} and a∞ < {a_hi}"),
            ));
            continue;
        }
        // geometric interior points of the window, centre first
        let mut found = None;
        for frac in [0.5, 0.25, 0.75, 0.1, 0.9] {
            let a_inf = (a_lo.ln() + frac * (a_hi / a_lo).ln()).exp();
            match AmbientBoundaryMetric::fit(n.max(4), r, big_r, a_inf) {
                Ok(mut b) => {
                    b.n = n;
                    let cons = docking_constraints(nu, r0, r_cone, &b, opts)?;
                    if let Some(c) = cons.iter().find(|c| !c.holds) {
                        binding = Some((c.name.clone(), format!("r_cone = {r_cone}, margin {}", c.margin)));
                    } else {
                        found = Some((b, cons));
                        break;
                    }
                }
                Err(e) => binding = Some(("boundary profile".into(), e.to_string())),
            }
        }
        if let Some((boundary, constraints)) = found {
            let mut notes = vec![format!(
                "max B is stated with sin(r + r^4/4) for the boundary but the docking argument \
                 uses sin(r + r^4); the stricter bound is enforced (margins {} and {})",
                constraints[2].margin, constraints[3].margin
            )];
            notes.push(format!(
                "boundary profile: R = cos(r_cone) = {big_r}, r = {r}, a_inf = {}, eta = {}",
                boundary.a_inf,
                boundary.eta.name()
            ));
            notes.push("ambient interior assumed to have positive sectional curvature".into());
            return Ok(DockingParams {
                n,
                ell,
                nu,
                r0,
                r_cone,
                epsilon: opts.epsilon,
                delta: opts.delta,
                boundary,
                constraints,
                notes,
            });
        }
    }
    let (constraint, detail) = binding.unwrap_or(("grid".into(), "empty search grid".into()));
    Err(LabError::Infeasible {
        constraint,
        detail: format!("ν = {nu}: {detail}"),
    })
}

// ---------------------------------------------------------------------------
// connected sums

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreSummand {
    pub name: String,
    pub n: usize,
    pub k: usize,
    /// Smallest principal curvature of the round unit boundary after the
    /// boundary has been made strictly convex.
    pub nu_min: f64,
}

impl CoreSummand {
    pub fn interface(&self) -> GluingInterface {
        GluingInterface::round(&format!("core {}", self.name), self.n - 1, 1.0, self.nu_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckSummary {
    pub index: usize,
    pub t0: f64,
    pub beta: f64,
    pub alpha: f64,
    pub ln_t_inf: f64,
    pub ln_lambda: f64,
    pub certified: bool,
    pub certificate: NeckCertificate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssemblyCertificate {
    pub n: usize,
    pub ell: usize,
    pub summands: Vec<CoreSummand>,
    pub k_result: usize,
    pub nu0: f64,
    pub nu: f64,
    pub docking: DockingParams,
    pub necks: Vec<NeckSummary>,
    pub gluing: Vec<GluingVerdict>,
    pub constraints: Vec<ConstraintMargin>,
    pub assumptions: Vec<String>,
    pub all_checks_pass: bool,
    pub claim: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub docking: DockingOptions,
    /// Candidate start times for every neck, tried in ascending order.
    pub t0_candidates: Vec<f64>,
    pub nt: usize,
    pub nx: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            docking: DockingOptions::default(),
            t0_candidates: [2, 4, 8, 16, 32, 64, 128, 256].iter().map(|&e| 10f64.powi(e)).collect(),
            nt: 512,
            nx: 128,
        }
    }
}

fn build_certified_neck(
    index: usize,
    boundary: &AmbientBoundaryMetric,
    nu: f64,
    opts: &AssemblyOptions,
) -> Result<(NeckSummary, crate::neck::NeckSolution)> {
    let mut t0s = opts.t0_candidates.clone();
    t0s.sort_by(f64::total_cmp);
    let mut last = None;
    for &t0 in &t0s {
        let params = NeckParams {
            nt: opts.nt,
            nx: opts.nx,
            ..NeckParams::new(nu, opts.docking.epsilon, opts.docking.delta, t0)
        };
        let sol = build_neck(boundary, &params)?;
        let cert = certify_neck_rick2(&sol)?;
        let summary = NeckSummary {
            index,
            t0,
            beta: sol.beta,
            alpha: sol.alpha,
            ln_t_inf: sol.s_inf,
            ln_lambda: sol.ln_lambda,
            certified: cert.passed(),
            certificate: cert,
        };
        let done = summary.certified;
        last = Some((summary, sol));
        if done {
            break;
        }
    }
    last.ok_or_else(|| LabError::invalid("t0_candidates", "no start time given"))
}

pub fn plan_connected_sum(summands: &[CoreSummand]) -> Result<AssemblyCertificate> {
    plan_connected_sum_with(summands, &AssemblyOptions::default())
}

pub fn plan_connected_sum_with(
    summands: &[CoreSummand],
    opts: &AssemblyOptions,
) -> Result<AssemblyCertificate> {
    let first = summands
        .first()
        .ok_or_else(|| LabError::invalid("summands", "need at least one summand"))?;
    let n = first.n;
    for s in summands {
        if s.n != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                found: s.n,
            });
        }
        if s.k < 2 {
            return Err(LabError::invalid("k", format!("summand {}: need k ≥ 2", s.name)));
        }
        if !(s.nu_min > 0.0 && s.nu_min.is_finite()) {
            return Err(LabError::invalid(
                "nu_min",
                format!("summand {}: need a strictly convex boundary", s.name),
            ));
        }
    }
    let ell = summands.len();
    let k_result = summands.iter().map(|s| s.k).max().expect("non-empty");
    let nu0 = summands.iter().map(|s| s.nu_min).fold(f64::INFINITY, f64::min);

    // ν < ν₀, halved until the docking station exists
    let mut nu = 0.5 * nu0.min(1.0);
    let docking = loop {
        match plan_docking_with(n, ell, nu, &opts.docking) {
            Ok(d) => break d,
            Err(LabError::Infeasible { .. }) if nu > 1e-6 => nu *= 0.5,
            Err(e) => return Err(e),
        }
    };

    let built: Vec<(NeckSummary, crate::neck::NeckSolution)> = (0..ell)
        .into_par_iter()
        .map(|i| build_certified_neck(i, &docking.boundary, nu, opts))
        .collect::<Result<_>>()?;

    let mut gluing = Vec::with_capacity(2 * ell);
    for ((summary, sol), summand) in built.iter().zip(summands) {
        let (small, large) = neck_boundary_interfaces(sol)?;
        // final rescaling λ/ρ of station and necks together
        let ln_c = summary.ln_lambda - nu.ln();
        let small = GluingInterface {
            label: format!("neck {} small end", summary.index),
            ..small.rescaled_ln(ln_c)
        };
        let large = GluingInterface {
            label: format!("neck {} large end", summary.index),
            ..large.rescaled_ln(ln_c)
        };
        let socket = GluingInterface {
            label: format!("socket {}", summary.index),
            ..ambient_interface(&docking.boundary, &sol.xs).rescaled_ln(ln_c)
        };
        gluing.push(check_gluing(&small, &summand.interface())?);
        gluing.push(check_gluing(&large, &socket)?);
    }

    let mut constraints = docking.constraints.clone();
    constraints.push(ConstraintMargin::new("nu < nu0", nu0 - nu));
    let necks: Vec<NeckSummary> = built.into_iter().map(|(s, _)| s).collect();
    let all_checks_pass = constraints.iter().all(|c| c.holds)
        && gluing.iter().all(|g| g.passed)
        && necks.iter().all(|s| s.certified);
    let mut assumptions = vec![
        "ambient interior of the docking station has positive sectional curvature".to_string(),
        "core boundaries are made strictly convex with the stated nu_min".to_string(),
        "the glued C^0 metric is smoothed preserving Ric_k > 0".to_string(),
    ];
    assumptions.extend(docking.notes.iter().cloned());
    let claim = if all_checks_pass {
        format!(
            "connected sum admits Ric_{k_result} > 0 conditional on neck certification \
             (necks certified on the sampled grid)"
        )
    } else {
        format!("not certified: Ric_{k_result} > 0 claim withheld; see failing checks")
    };
    Ok(AssemblyCertificate {
        n,
        ell,
        summands: summands.to_vec(),
        k_result,
        nu0,
        nu,
        docking,
        necks,
        gluing,
        constraints,
        assumptions,
        all_checks_pass,
        claim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gluing_scalar_cases() {
        let a = GluingInterface::round("a", 3, 1.0, -0.2);
        let b = GluingInterface::round("b", 3, 1.0, 0.1);
        let v = check_gluing(&a, &b).unwrap();
        assert!(!v.passed);
        assert!((v.margin + 0.1).abs() < 1e-15);
        let z = GluingInterface::round("z", 3, 1.0, 0.0);
        let v = check_gluing(&z, &z.clone()).unwrap();
        assert!(v.passed && v.margin == 0.0);
    }

    #[test]
    fn gluing_errors() {
        let a = GluingInterface::round("a", 3, 1.0, 0.0);
        assert!(matches!(
            check_gluing(&a, &GluingInterface::round("b", 4, 1.0, 0.0)),
            Err(LabError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            check_gluing(&a, &GluingInterface::round("b", 3, 1.1, 0.0)),
            Err(LabError::InterfaceMismatch(_))
        ));
    }

    #[test]
    fn rescaling_round_interface() {
        let a = GluingInterface::round("a", 3, 0.5, -2.0).rescaled(2.0);
        assert!(a.ln_radius().unwrap().abs() < 1e-15);
        assert!((a.principal_at(0.0).0 + 1.0).abs() < 1e-15);
        // a huge rescaling and its inverse
        let b = a.rescaled_ln(800.0);
        let d = GluingInterface::round("d", 3, 0.5, 2.0).rescaled(2.0).rescaled_ln(800.0);
        let v = check_gluing(&b, &d).unwrap();
        assert!(v.passed && v.margin.abs() < 1e-15);
        assert!(!check_gluing(&b, &b.clone()).unwrap().passed);
        assert!((b.rescaled_ln(-800.0).principal_at(0.0).0 + 1.0).abs() < 1e-12);
        let c = GluingInterface::round("c", 3, 1.0, 1.0);
        assert!(check_gluing(&a, &c).unwrap().margin.abs() < 1e-15);
    }

    #[test]
    fn docking_example_is_feasible() {
        let d = plan_docking(7, 3, 0.1).unwrap();
        for c in &d.constraints {
            assert!(c.holds, "{c:?}");
        }
        assert!(d.r0 < 0.01);
        assert!(d.r_cone.cos() > 0.1);
    }

    #[test]
    fn docking_near_one_is_infeasible() {
        match plan_docking(7, 2, 0.9999) {
            Err(LabError::Infeasible { constraint, .. }) => {
                assert!(constraint.contains("a_inf < 1/r"), "{constraint}")
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
