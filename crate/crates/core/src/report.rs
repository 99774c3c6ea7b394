//! Scenario files, pipeline dispatch and report output.
//!
//! A scenario is a TOML document with a `kind` and one table of parameters
//! for that kind. Running it yields a [`Report`]: the scenario echo, one
//! [`Check`] per verdict with its tolerance, a module-specific payload and
//! optional grids. Reports carry no timing data so that identical inputs
//! produce identical bytes.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assembly::{
    plan_connected_sum_with, plan_docking_with, AssemblyCertificate, AssemblyOptions, CoreSummand,
    DockingOptions, GLUING_TOL, ISOMETRY_TOL,
};
use crate::curvature::{
    curvature_blocks, fd_oracle, DerivativeMode, ExprProfile, ProfileDomain, WarpedProfile, XDomain,
};
use crate::error::{LabError, Result};
use crate::expr::Expr;
use crate::kchain::{
    chain_sampling_oracle, check_inequalities, diagonalize_mixed_block, row_sum_criterion,
    BlockOperator, BlockValues, ChainStatus, ChainVerdict, Inequality, Margins, SamplingOptions,
    NOISE, TAU,
};
use crate::neck::{
    build_neck, certify_neck_rick2, parse_sweep, sweep_t0, AmbientBoundaryMetric, EtaProfile,
    NeckParams,
};
use crate::topology::{
    catalog_core_metrics, core_obstruction, plumbing_k_range, sphere_bundle_connected_sum,
    BundleVertex, CurvatureDatum, ManifoldDescriptor, PlumbingGraph, SphereBundle, VertexRole,
};

pub const TOOL: &str = "ricci-k-lab";

// ---------------------------------------------------------------------------
// scenario

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    BlocksCheck,
    Neck,
    Docking,
    ConnectedSum,
    Plumbing,
    Obstruction,
}

impl ScenarioKind {
    fn section(self) -> &'static str {
        match self {
            ScenarioKind::BlocksCheck => "blocks",
            ScenarioKind::Neck => "neck",
            ScenarioKind::Docking => "docking",
            ScenarioKind::ConnectedSum => "connected_sum",
            ScenarioKind::Plumbing => "plumbing",
            ScenarioKind::Obstruction => "obstruction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFormat {
    #[default]
    Json,
    Csv,
    Both,
}

impl std::str::FromStr for GridFormat {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(GridFormat::Json),
            "csv" => Ok(GridFormat::Csv),
            "both" => Ok(GridFormat::Both),
            _ => Err(LabError::Parse(format!("format `{s}`: expected json, csv or both"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: GridFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative uncertainty assigned to every curvature block.
    #[serde(default = "default_tol_curvature")]
    pub curvature: f64,
    /// Target accuracy of quadratures and root finding.
    #[serde(default = "default_tol_quadrature")]
    pub quadrature: f64,
}

fn default_tol_curvature() -> f64 {
    NOISE
}

fn default_tol_quadrature() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            curvature: default_tol_curvature(),
            quadrature: default_tol_quadrature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    /// Expressions in `t` and `x`.
    pub a: String,
    pub b: String,
    pub m: usize,
    pub t_range: [f64; 2],
    #[serde(default = "default_circle")]
    pub x_domain: XDomain,
    #[serde(default = "default_16")]
    pub nt: usize,
    #[serde(default = "default_16")]
    pub nx: usize,
    /// Finite-difference step; analytic derivatives when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    /// Step of the coordinate-Riemann oracle; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_step: Option<f64>,
}

fn default_circle() -> XDomain {
    XDomain::Circle
}

fn default_16() -> usize {
    16
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksScenario {
    pub n: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BlockValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    /// Run the sampling oracle next to the closed-form and row-sum tests.
    #[serde(default = "default_true")]
    pub sampling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeckScenario {
    pub n: usize,
    pub r: f64,
    pub a_inf: f64,
    /// Fix `R`; the `η` profile is then fitted to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaProfile>,
    /// CSV file with columns `x,eta`, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_csv: Option<String>,
    pub rho: f64,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// `lo:hi:steps`, geometric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[serde(default = "default_nt")]
    pub nt: usize,
    #[serde(default = "default_nx")]
    pub nx: usize,
    /// Emit the full block and margin grids.
    #[serde(default)]
    pub grids: bool,
}

fn default_nt() -> usize {
    512
}

fn default_nx() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DockingScenario {
    pub n: usize,
    pub ell: usize,
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<DockingOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummandSpec {
    /// Catalog name (`HP2`, `OP2`, `CP3`, `S7`, ...) or a free label.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "default_nu_min")]
    pub nu_min: f64,
}

/// Declared convexity of a deformed core boundary.
fn default_nu_min() -> f64 {
    0.2
}

impl SummandSpec {
    pub fn named(name: &str) -> Self {
        SummandSpec {
            name: name.into(),
            n: None,
            k: None,
            nu_min: default_nu_min(),
        }
    }

    pub fn resolve(&self) -> Result<CoreSummand> {
        let (n, k) = match (self.n, self.k) {
            (Some(n), Some(k)) => (n, k),
            _ => {
                let m = ManifoldDescriptor::from_name(&self.name)?;
                let k = m.known_core_k.ok_or_else(|| {
                    LabError::invalid("k", format!("{} has no cataloged core metric", self.name))
                })?;
                (self.n.unwrap_or(m.n), self.k.unwrap_or(k))
            }
        };
        Ok(CoreSummand {
            name: self.name.clone(),
            n,
            k,
            nu_min: self.nu_min,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectedSumScenario {
    pub summands: Vec<SummandSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_candidates: Option<Vec<f64>>,
    #[serde(default = "default_nt")]
    pub nt: usize,
    #[serde(default = "default_nx")]
    pub nx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlumbingScenario {
    /// `HP2`, `OP2` or `sphere-bundles`; otherwise `vertices`/`edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<BundleVertex>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
    /// Parameters of the `sphere-bundles` preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionScenario {
    /// Catalog name; otherwise `n`, `connectivity` and `homotopy_sphere`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<usize>,
    #[serde(default)]
    pub homotopy_sphere: bool,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlocksScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neck: Option<NeckScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub docking: Option<DockingScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connected_sum: Option<ConnectedSumScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plumbing: Option<PlumbingScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<ObstructionScenario>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Scenario {
            kind,
            seed: 0,
            output: OutputSpec::default(),
            tolerances: Tolerances::default(),
            blocks: None,
            neck: None,
            docking: None,
            connected_sum: None,
            plumbing: None,
            obstruction: None,
        }
    }

    /// Parses and validates; `origin` labels error messages.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    LabError::Parse(format!("{origin}:{line}:{col}: {msg}"))
                }
                None => LabError::Parse(format!("{origin}: {msg}")),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Parse(format!("serializing scenario: {e}")))
    }

    fn present_sections(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.blocks.is_some() {
            v.push("blocks");
        }
        if self.neck.is_some() {
            v.push("neck");
        }
        if self.docking.is_some() {
            v.push("docking");
        }
        if self.connected_sum.is_some() {
            v.push("connected_sum");
        }
        if self.plumbing.is_some() {
            v.push("plumbing");
        }
        if self.obstruction.is_some() {
            v.push("obstruction");
        }
        v
    }

    /// Exactly the table belonging to `kind`, plus parse-time preconditions.
    pub fn validate(&self) -> Result<()> {
        let want = self.kind.section();
        let have = self.present_sections();
        if have != [want] {
            return Err(LabError::Parse(format!(
                "kind `{}` needs exactly the table [{want}], found [{}]",
                serde_json::to_value(self.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                have.join(", ")
            )));
        }
        for (name, v) in [
            ("tolerances.curvature", self.tolerances.curvature),
            ("tolerances.quadrature", self.tolerances.quadrature),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(LabError::invalid(name, format!("need 0 < tol < 1, got {v}")));
            }
        }
        if let Some(b) = &self.blocks {
            if b.values.is_some() == b.profile.is_some() {
                return Err(LabError::Parse(
                    "[blocks] needs exactly one of `values` or `profile`".into(),
                ));
            }
        }
        if let Some(nk) = &self.neck {
            if nk.t0.is_some() == nk.sweep.is_some() {
                return Err(LabError::Parse("[neck] needs exactly one of `t0` or `sweep`".into()));
            }
            if nk.eta.is_some() && nk.eta_csv.is_some() {
                return Err(LabError::Parse("[neck] `eta` and `eta_csv` are exclusive".into()));
            }
            if !(nk.rho * nk.rho > nk.r) {
                return Err(LabError::precondition(
                    "rho in (r^(1/2), R)",
                    format!("ρ = {} must exceed √r = {}", nk.rho, nk.r.sqrt()),
                ));
            }
            if let Some(sw) = &nk.sweep {
                parse_sweep(sw)?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// What the check is derived from.
    pub provenance: String,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64, passed: bool, provenance: &str) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed,
            provenance: provenance.into(),
        }
    }

    /// Passes when `value > tolerance`.
    fn positive(name: impl Into<String>, value: f64, tolerance: f64, provenance: &str) -> Self {
        Self::new(name, value, tolerance, value > tolerance, provenance)
    }

    /// Passes when `|value| ≤ tolerance`.
    fn small(name: impl Into<String>, value: f64, tolerance: f64, provenance: &str) -> Self {
        Self::new(name, value, tolerance, value.abs() <= tolerance, provenance)
    }

    fn flag(name: impl Into<String>, holds: bool, provenance: &str) -> Self {
        Self::new(name, if holds { 1.0 } else { 0.0 }, 0.0, holds, provenance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub description: String,
}

/// A table of numbers; written as CSV or JSON with a schema sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<f64>>,
}

impl Grid {
    fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Grid {
            name: name.into(),
            columns: columns
                .iter()
                .map(|(n, d)| ColumnSpec {
                    name: (*n).into(),
                    description: (*d).into(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn blocks(name: &str, first: (&str, &str)) -> Self {
        Grid::new(
            name,
            &[
                first,
                ("x", "x coordinate"),
                ("l12", "lambda12"),
                ("l13", "lambda13"),
                ("l23", "lambda23"),
                ("ltilde", "mixed block, orthonormal frame"),
                ("l3", "lambda3"),
            ],
        )
    }

    fn margins(name: &str, first: (&str, &str)) -> Self {
        Grid::new(
            name,
            &[
                first,
                ("x", "x coordinate"),
                ("i", "margin of (i)"),
                ("ii", "margin of (ii)"),
                ("iii", "margin of (iii)"),
                ("iv13", "margin of (iv), lambda13 part"),
                ("iv23", "margin of (iv), lambda23 part"),
                ("iv3", "margin of (iv), lambda3 part"),
            ],
        )
    }
}

fn block_row(first: f64, x: f64, b: &BlockValues) -> Vec<f64> {
    vec![first, x, b.l12, b.l13, b.l23, b.ltilde, b.l3]
}

fn margin_row(first: f64, x: f64, m: &Margins) -> Vec<f64> {
    vec![first, x, m.i, m.ii, m.iii, m.iv13, m.iv23, m.iv3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Strictness floor of the inequality tests.
    pub tau: f64,
    pub isometry_tol: f64,
    pub gluing_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub tolerances: Tolerances,
    pub status: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: Value,
    #[serde(skip)]
    pub grids: Vec<Grid>,
}

impl Report {
    fn new(scenario: &Scenario, status: impl Into<String>, checks: Vec<Check>, details: Value) -> Self {
        let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
        Report {
            provenance: Provenance {
                tool: TOOL.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: scenario.seed,
                tau: TAU,
                isometry_tol: ISOMETRY_TOL,
                gluing_tol: GLUING_TOL,
            },
            scenario: Some(scenario.clone()),
            tolerances: scenario.tolerances,
            status: status.into(),
            passed,
            checks,
            details,
            grids: Vec::new(),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    /// Scenario echo as TOML.
    pub fn scenario_echo(&self) -> Option<Result<String>> {
        self.scenario.as_ref().map(Scenario::to_toml)
    }
}

// ---------------------------------------------------------------------------
// errors and exit codes

/// A library error with the scenario it occurred in.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub context: String,
    pub source: LabError,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.context, self.source)
    }
}

impl std::error::Error for ScenarioError {}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        exit_code_for(&self.source)
    }
}

/// `1` verdict failure, `2` usage or input error, `3` numerical failure.
pub fn exit_code_for(e: &LabError) -> i32 {
    match e {
        LabError::Infeasible { .. } => 1,
        LabError::RootFinding(_) | LabError::Numerical(_) | LabError::Reconstruction(_) => 3,
        _ => 2,
    }
}

// ---------------------------------------------------------------------------
// running

/// Reads, validates and runs a scenario file.
pub fn run_scenario(path: &Path) -> std::result::Result<Report, ScenarioError> {
    let origin = path.display().to_string();
    let wrap = |e: LabError| ScenarioError {
        context: format!("scenario {origin}"),
        source: e,
    };
    let text = fs::read_to_string(path).map_err(|e| wrap(e.into()))?;
    let scenario = Scenario::from_toml_str(&text, &origin).map_err(wrap)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run(&scenario, base).map_err(wrap)
}

/// Runs a parsed scenario; relative file references resolve against `base`.
pub fn run(scenario: &Scenario, base: &Path) -> Result<Report> {
    scenario.validate()?;
    match scenario.kind {
        ScenarioKind::BlocksCheck => run_blocks(scenario),
        ScenarioKind::Neck => run_neck(scenario, base),
        ScenarioKind::Docking => run_docking(scenario),
        ScenarioKind::ConnectedSum => run_connected_sum(scenario),
        ScenarioKind::Plumbing => run_plumbing(scenario),
        ScenarioKind::Obstruction => run_obstruction(scenario),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn status_name(s: ChainStatus) -> String {
    to_value(&s).as_str().unwrap_or_default().to_string()
}

const PROV_CLOSED: &str = "closed-form k-chain inequalities (i)-(iv)";
const PROV_ROWSUM: &str = "primed eigenvalues and row-sum matrix";
const PROV_SAMPLING: &str = "Ky Fan sampling oracle over unit base vectors";
const PROV_ENGINE: &str = "warped-product curvature blocks";
const PROV_ORACLE: &str = "finite-difference coordinate Riemann tensor";

fn run_blocks(sc: &Scenario) -> Result<Report> {
    let spec = sc.blocks.as_ref().expect("validated");
    match (&spec.values, &spec.profile) {
        (Some(values), _) => run_blocks_values(sc, spec, values),
        (_, Some(profile)) => run_blocks_profile(sc, spec, profile),
        _ => unreachable!("validated"),
    }
}

fn run_blocks_values(sc: &Scenario, spec: &BlocksScenario, values: &BlockValues) -> Result<Report> {
    let op = BlockOperator::new(*values, spec.n, spec.k)?.with_relative_noise(sc.tolerances.curvature)?;
    let closed = check_inequalities(&op);
    let primed = diagonalize_mixed_block(values);
    let row = row_sum_criterion(&primed, spec.n, spec.k);
    let sampled = if spec.sampling {
        Some(chain_sampling_oracle(
            &op,
            &SamplingOptions {
                seed: sc.seed,
                ..SamplingOptions::default()
            },
        )?)
    } else {
        None
    };
    let margins = Margins::compute(values, spec.k);
    let thresholds = op.thresholds();
    let mut checks: Vec<Check> = Inequality::ALL
        .iter()
        .map(|&q| {
            Check::positive(
                format!("margin {:?}", q).to_lowercase(),
                margins.get(q),
                thresholds.get(q),
                PROV_CLOSED,
            )
        })
        .collect();
    let positive = closed.status == ChainStatus::CertifiedPositive;
    let agrees = |v: &ChainVerdict| closed.status.sign().is_none_or(|c| v.status.sign() == Some(c));
    checks.push(Check::flag("row-sum criterion agrees", agrees(&row), PROV_ROWSUM));
    if let Some(s) = &sampled {
        checks.push(Check::flag("sampling oracle agrees", agrees(s), PROV_SAMPLING));
    }
    if !positive {
        // inequality margins already record the failure; keep the verdict explicit
        checks.push(Check::flag("Ric_k > 0", false, PROV_CLOSED));
    }
    let mut grid = Grid::margins("margins", ("t", "unused (single point)"));
    grid.push(margin_row(0.0, 0.0, &margins));
    let details = serde_json::json!({
        "closed_form": closed,
        "row_sum": row,
        "primed": {
            "lambda12p": primed.lambda12p,
            "lambda13p": primed.lambda13p,
            "lambda23p": primed.lambda23p,
            "lambda33p": primed.lambda33p,
        },
        "sampling": sampled,
    });
    let mut report = Report::new(sc, status_name(closed.status), checks, details);
    report.grids.push(grid);
    Ok(report)
}

fn grid_points(spec: &ProfileSpec) -> (Vec<f64>, Vec<f64>) {
    let [t0, t1] = spec.t_range;
    let ts = (0..spec.nt)
        .map(|i| t0 + (i as f64 + 0.5) * (t1 - t0) / spec.nt as f64)
        .collect();
    let xs = match spec.x_domain {
        XDomain::Circle => (0..spec.nx).map(|j| 2.0 * PI * j as f64 / spec.nx as f64).collect(),
        XDomain::Interval { lo, hi, .. } => (0..spec.nx)
            .map(|j| lo + (j as f64 + 0.5) * (hi - lo) / spec.nx as f64)
            .collect(),
    };
    (ts, xs)
}

fn run_blocks_profile(sc: &Scenario, spec: &BlocksScenario, ps: &ProfileSpec) -> Result<Report> {
    if ps.m + 2 != spec.n {
        return Err(LabError::DimensionMismatch {
            expected: spec.n,
            found: ps.m + 2,
        });
    }
    if !(ps.t_range[1] > ps.t_range[0]) || ps.nt == 0 || ps.nx == 0 {
        return Err(LabError::invalid("profile", "need t_range[0] < t_range[1] and a non-empty grid"));
    }
    let profile = ExprProfile {
        m: ps.m,
        domain: ProfileDomain {
            t_range: (ps.t_range[0], ps.t_range[1]),
            x: ps.x_domain,
        },
        a: Expr::parse(&ps.a)?,
        b: Expr::parse(&ps.b)?,
        mode: ps
            .fd_step
            .map_or(DerivativeMode::Analytic, |h| DerivativeMode::FiniteDifference { h }),
    };
    let (ts, xs) = grid_points(ps);
    let mut blocks_grid = Grid::blocks("blocks", ("t", "t coordinate"));
    let mut margin_grid = Grid::margins("margins", ("t", "t coordinate"));
    let mut failing = 0usize;
    let mut worst = f64::INFINITY;
    let mut worst_status = ChainStatus::CertifiedPositive;
    let mut oracle_err = 0.0_f64;
    for &t in &ts {
        for &x in &xs {
            let cb = curvature_blocks(&profile, t, x)?;
            let b = cb.orthonormal();
            let op = BlockOperator::new(b, spec.n, spec.k)?.with_relative_noise(sc.tolerances.curvature)?;
            let v = check_inequalities(&op);
            let m = Margins::compute(&b, spec.k);
            let rel = Inequality::ALL
                .iter()
                .map(|&q| m.get(q) / op.magnitudes().get(q).max(f64::MIN_POSITIVE))
                .fold(f64::INFINITY, f64::min);
            worst = worst.min(rel);
            if v.status != ChainStatus::CertifiedPositive {
                failing += 1;
                if worst_status == ChainStatus::CertifiedPositive {
                    worst_status = v.status;
                }
            }
            if let Some(h) = ps.oracle_step {
                let o = fd_oracle::oracle_blocks(|t, x| profile.values(t, x), t, x, h)?;
                let scale = b.scale().max(f64::MIN_POSITIVE);
                let diffs = [
                    cb.lambda12 - o.lambda12,
                    cb.lambda13 - o.lambda13,
                    cb.lambda23 - o.lambda23,
                    b.ltilde - o.mixed_unit,
                    cb.lambda3 - o.lambda3,
                ];
                oracle_err = diffs.iter().fold(oracle_err, |e, d| e.max(d.abs() / scale));
            }
            blocks_grid.push(block_row(t, x, &b));
            margin_grid.push(margin_row(t, x, &m));
        }
    }
    let mut checks = vec![Check::new(
        "failing grid points",
        failing as f64,
        0.0,
        failing == 0,
        PROV_CLOSED,
    )];
    checks.push(Check::new(
        "min relative margin",
        worst,
        0.0,
        worst > 0.0 || failing == 0,
        PROV_CLOSED,
    ));
    if ps.oracle_step.is_some() {
        checks.push(Check::small("max oracle deviation (relative)", oracle_err, 1e-6, PROV_ORACLE));
    }
    let details = serde_json::json!({
        "grid_points": ts.len() * xs.len(),
        "failing_points": failing,
        "engine": PROV_ENGINE,
    });
    let mut report = Report::new(sc, status_name(worst_status), checks, details);
    report.grids.push(blocks_grid);
    report.grids.push(margin_grid);
    Ok(report)
}

fn neck_boundary(spec: &NeckScenario, base: &Path) -> Result<AmbientBoundaryMetric> {
    let eta = match (&spec.eta, &spec.eta_csv) {
        (Some(e), _) => Some(e.clone()),
        (_, Some(file)) => {
            let path = base.join(file);
            if !path.exists() {
                return Err(LabError::Io(format!("eta table {} does not exist", path.display())));
            }
            Some(EtaProfile::from_csv(&path)?)
        }
        _ => None,
    };
    match (spec.big_r, eta) {
        (Some(_), Some(_)) => Err(LabError::Parse("[neck] give either `big_r` or an eta profile".into())),
        (Some(big_r), None) => AmbientBoundaryMetric::fit(spec.n, spec.r, big_r, spec.a_inf),
        (None, Some(eta)) => AmbientBoundaryMetric::new(spec.n, spec.r, spec.a_inf, eta),
        (None, None) => AmbientBoundaryMetric::cos2(spec.n, spec.r, spec.a_inf),
    }
}

const PROV_NECK: &str = "neck ODE: b'/b and a'/a integrals against their prescribed totals";
const PROV_NECK_CERT: &str = "k = 2 inequalities on the neck grid";

fn run_neck(sc: &Scenario, base: &Path) -> Result<Report> {
    let spec = sc.neck.as_ref().expect("validated");
    let boundary = neck_boundary(spec, base)?;
    let params = NeckParams {
        nt: spec.nt,
        nx: spec.nx,
        quad_tol: sc.tolerances.quadrature,
        ..NeckParams::new(spec.rho, spec.epsilon, spec.delta, spec.t0.unwrap_or(1e3))
    };
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    let mut report_grids = Vec::new();
    let t0 = match &spec.sweep {
        Some(sw) => {
            let t0s = parse_sweep(sw)?;
            let sweep = sweep_t0(&boundary, &params, &t0s)?;
            let mut g = Grid::new(
                "sweep",
                &[
                    ("t0", "start time"),
                    ("passed", "1 if certified"),
                    ("failing_points", "grid points failing"),
                    ("min_relative_margin", "smallest margin over term size"),
                ],
            );
            for e in &sweep.entries {
                g.push(vec![
                    e.t0,
                    f64::from(u8::from(e.passed)),
                    e.failing_points as f64,
                    e.min_relative_margin,
                ]);
            }
            report_grids.push(g);
            checks.push(Check::flag("some t0 passes", sweep.largest_passing.is_some(), PROV_NECK_CERT));
            let chosen = sweep
                .largest_passing
                .unwrap_or_else(|| sweep.entries.last().map_or(params.t0, |e| e.t0));
            details.insert("sweep".into(), to_value(&sweep));
            chosen
        }
        None => params.t0,
    };
    let sol = build_neck(&boundary, &NeckParams { t0, ..params })?;
    let cert = certify_neck_rick2(&sol)?;
    let ig = &sol.integrals;
    let qtol = sc.tolerances.quadrature;
    checks.push(Check::small("int b'/b residual", ig.int_b - ig.int_b_expected, qtol, PROV_NECK));
    checks.push(Check::small("int a'/a residual", ig.int_a - ig.int_a_expected, qtol, PROV_NECK));
    checks.push(Check::new(
        "alpha in (1, 2)",
        sol.alpha,
        0.0,
        sol.alpha > 1.0 && sol.alpha < 2.0,
        "neck exponent",
    ));
    checks.push(Check::small(
        "a b^alpha drift",
        sol.monitor_drift,
        qtol,
        "conserved product along the neck",
    ));
    checks.push(Check::new(
        "failing grid points",
        cert.failing_points as f64,
        0.0,
        cert.passed(),
        PROV_NECK_CERT,
    ));
    for w in &cert.worst {
        checks.push(Check::new(
            format!("min relative margin {:?}", w.inequality).to_lowercase(),
            w.relative,
            0.0,
            cert.passed() || w.relative > 0.0,
            PROV_NECK_CERT,
        ));
    }
    checks.push(Check::positive(
        "large-end min principal curvature - 1",
        sol.large_end_min_principal() - 1.0,
        0.0,
        "gluing the large end to the ambient boundary",
    ));
    details.insert("t0".into(), to_value(&t0));
    details.insert("beta".into(), to_value(&sol.beta));
    details.insert("alpha".into(), to_value(&sol.alpha));
    details.insert("ln_t_inf".into(), to_value(&sol.s_inf));
    details.insert("ln_lambda".into(), to_value(&sol.ln_lambda));
    details.insert("integrals".into(), to_value(&sol.integrals));
    details.insert("root_residual".into(), to_value(&sol.root_residual));
    details.insert("diagnostics".into(), to_value(&sol.diagnostics));
    details.insert("boundary".into(), to_value(&sol.boundary));
    details.insert("certificate".into(), to_value(&cert));
    if spec.grids {
        let mut bg = Grid::blocks("neck_blocks", ("s", "ln t; blocks scaled by t^2"));
        let mut mg = Grid::margins("neck_margins", ("s", "ln t; margins of t^2-scaled blocks"));
        for node in &sol.nodes {
            for &x in &sol.xs {
                let (cb, _) = sol.scaled_blocks_with_noise(node.s, x, node.ln_a, node.ln_b);
                let b = cb.orthonormal();
                bg.push(block_row(node.s, x, &b));
                mg.push(margin_row(node.s, x, &Margins::compute(&b, 2)));
            }
        }
        report_grids.push(bg);
        report_grids.push(mg);
    }
    let status = if cert.passed() { "certified" } else { "not certified" };
    let mut report = Report::new(sc, status, checks, Value::Object(details));
    report.grids = report_grids;
    Ok(report)
}

const PROV_DOCKING: &str = "docking-station parameter constraints";

fn run_docking(sc: &Scenario) -> Result<Report> {
    let spec = sc.docking.as_ref().expect("validated");
    let opts = spec.options.unwrap_or_default();
    let plan = plan_docking_with(spec.n, spec.ell, spec.nu, &opts)?;
    let checks = plan
        .constraints
        .iter()
        .map(|c| Check::new(c.name.clone(), c.margin, 0.0, c.holds, PROV_DOCKING))
        .collect();
    let status = "feasible";
    Ok(Report::new(sc, status, checks, to_value(&plan)))
}

fn assembly_checks(cert: &AssemblyCertificate) -> Vec<Check> {
    let mut checks: Vec<Check> = cert
        .constraints
        .iter()
        .map(|c| Check::new(c.name.clone(), c.margin, 0.0, c.holds, PROV_DOCKING))
        .collect();
    for nk in &cert.necks {
        checks.push(Check::new(
            format!("neck {} failing grid points", nk.index),
            nk.certificate.failing_points as f64,
            0.0,
            nk.certified,
            PROV_NECK_CERT,
        ));
    }
    for g in &cert.gluing {
        checks.push(Check::new(
            format!("gluing {} | {}", g.a, g.b),
            g.margin,
            GLUING_TOL,
            g.passed,
            "principal curvatures sum to a non-negative value; induced metrics isometric",
        ));
    }
    checks.push(Check::flag("all checks pass", cert.all_checks_pass, "assembly"));
    checks
}

fn run_connected_sum(sc: &Scenario) -> Result<Report> {
    let spec = sc.connected_sum.as_ref().expect("validated");
    let summands = spec
        .summands
        .iter()
        .map(SummandSpec::resolve)
        .collect::<Result<Vec<_>>>()?;
    let mut opts = AssemblyOptions {
        nt: spec.nt,
        nx: spec.nx,
        ..AssemblyOptions::default()
    };
    if let Some(t0s) = &spec.t0_candidates {
        opts.t0_candidates = t0s.clone();
    }
    let cert = plan_connected_sum_with(&summands, &opts)?;
    let checks = assembly_checks(&cert);
    let status = format!("Ric_{} > 0", cert.k_result);
    Ok(Report::new(sc, status, checks, to_value(&cert)))
}

fn preset_graph(spec: &PlumbingScenario) -> Result<PlumbingGraph> {
    let pair = |d: usize| PlumbingGraph {
        vertices: vec![
            BundleVertex::new(&format!("D{d} over S{d}"), d, d, CurvatureDatum::Ric(1), VertexRole::Fixed),
            BundleVertex::new(&format!("D{d} over S{d} (core)"), d, d, CurvatureDatum::Core(1), VertexRole::Other),
        ],
        edges: vec![(0, 1)],
    };
    match spec.preset.as_deref() {
        Some(p) if p.eq_ignore_ascii_case("HP2") => Ok(pair(4)),
        Some(p) if p.eq_ignore_ascii_case("OP2") => Ok(pair(8)),
        Some("sphere-bundles") => {
            let need = |v: Option<usize>, n: &str| {
                v.ok_or_else(|| LabError::Parse(format!("sphere-bundles preset needs `{n}`")))
            };
            let (p, q, ell, k) = (need(spec.p, "p")?, need(spec.q, "q")?, need(spec.ell, "ell")?, need(spec.k, "k")?);
            let bundles: Vec<SphereBundle> = (1..=ell)
                .map(|i| SphereBundle {
                    name: format!("E{i}"),
                    p,
                    q,
                })
                .collect();
            Ok(sphere_bundle_connected_sum(&bundles, k)?.graph)
        }
        Some(other) => Err(LabError::Parse(format!(
            "unknown plumbing preset `{other}` (HP2, OP2, sphere-bundles)"
        ))),
        None => Ok(PlumbingGraph {
            vertices: spec.vertices.clone(),
            edges: spec.edges.iter().map(|e| (e[0], e[1])).collect(),
        }),
    }
}

fn run_plumbing(sc: &Scenario) -> Result<Report> {
    let spec = sc.plumbing.as_ref().expect("validated");
    let graph = preset_graph(spec)?;
    let range = plumbing_k_range(&graph)?;
    let mut checks = vec![Check::flag("graph is a tree with matching dimensions", true, "plumbing graph")];
    let mut details = serde_json::json!({ "range": range, "graph": graph });
    if spec.preset.as_deref() == Some("sphere-bundles") {
        let bundles: Vec<SphereBundle> = (1..=spec.ell.unwrap_or(1))
            .map(|i| SphereBundle {
                name: format!("E{i}"),
                p: spec.p.unwrap_or(0),
                q: spec.q.unwrap_or(0),
            })
            .collect();
        let sum = sphere_bundle_connected_sum(&bundles, spec.k.unwrap_or(1))?;
        checks.push(Check::new(
            "graph bound >= connected-sum bound",
            (range.k_min as f64) - (sum.k_min as f64),
            0.0,
            range.k_min >= sum.k_min,
            "sphere-bundle connected sums as plumbing boundaries",
        ));
        details["connected_sum_k"] = to_value(&sum.k_min);
    }
    let status = format!("Ric_{} > 0 on the boundary", range.k_min);
    Ok(Report::new(sc, status, checks, details))
}

fn run_obstruction(sc: &Scenario) -> Result<Report> {
    let spec = sc.obstruction.as_ref().expect("validated");
    let m = match (&spec.name, spec.n, spec.connectivity) {
        (Some(name), None, None) => ManifoldDescriptor::from_name(name)?,
        (name, Some(n), Some(c)) => {
            ManifoldDescriptor::new(name.as_deref().unwrap_or("M"), n, c, spec.homotopy_sphere)?
        }
        _ => {
            return Err(LabError::Parse(
                "[obstruction] needs `name`, or `n` and `connectivity`".into(),
            ))
        }
    };
    let o = core_obstruction(&m, spec.k)?;
    let checks = vec![Check::flag(
        "no connectivity obstruction",
        !o.is_obstructed(),
        "k-core metrics force (n - k)-connectedness",
    )];
    let status = to_value(&o)["verdict"].as_str().unwrap_or_default().to_string();
    Ok(Report::new(sc, status, checks, serde_json::json!({ "manifold": m, "obstruction": o })))
}

/// Catalog listing with the homogeneous-space arithmetic as checks.
pub fn catalog_report(seed: u64) -> Report {
    let entries = catalog_core_metrics();
    let checks = entries
        .iter()
        .map(|e| {
            let known = e.manifold.known_core_k.unwrap_or(0);
            Check::new(
                format!("{}: dim(G/K) + 1 = {}", e.manifold.name, e.derived_k()),
                e.derived_k() as f64,
                0.0,
                e.derived_k() == known
                    && core_obstruction(&e.manifold, e.k).is_ok_and(|o| !o.is_obstructed()),
                &e.provenance,
            )
        })
        .collect();
    let mut sc = Scenario::new(ScenarioKind::Obstruction);
    sc.seed = seed;
    let mut r = Report::new(&sc, "catalog", checks, to_value(&entries));
    // the catalog is not a scenario kind
    r.scenario = None;
    r
}

// ---------------------------------------------------------------------------
// output

fn write_csv(grid: &Grid, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LabError::Io(e.to_string()))?;
    w.write_record(grid.columns.iter().map(|c| c.name.as_str()))
        .map_err(|e| LabError::Io(e.to_string()))?;
    for row in &grid.rows {
        w.write_record(row.iter().map(|v| format!("{v:e}")))
            .map_err(|e| LabError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes each grid in `format` plus a `<name>.schema.json` sidecar.
pub fn emit_grid(report: &Report, dir: &Path, format: GridFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for g in &report.grids {
        let schema = serde_json::json!({
            "grid": g.name,
            "seed": report.provenance.seed,
            "rows": g.rows.len(),
            "columns": g.columns,
            "tolerances": report.tolerances,
        });
        let sp = dir.join(format!("{}.schema.json", g.name));
        fs::write(&sp, serde_json::to_string_pretty(&schema).expect("schema") + "\n")?;
        out.push(sp);
        if matches!(format, GridFormat::Csv | GridFormat::Both) {
            let p = dir.join(format!("{}.csv", g.name));
            write_csv(g, &p)?;
            out.push(p);
        }
        if matches!(format, GridFormat::Json | GridFormat::Both) {
            let p = dir.join(format!("{}.json", g.name));
            fs::write(&p, serde_json::to_string(g).expect("grid") + "\n")?;
            out.push(p);
        }
    }
    Ok(out)
}

/// `report.json` plus grids.
pub fn write_report(report: &Report, dir: &Path, format: GridFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let p = dir.join("report.json");
    fs::write(&p, report.to_json())?;
    let mut out = vec![p];
    out.extend(emit_grid(report, dir, format)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISOTROPIC: &str = r#"
kind = "blocks-check"
seed = 3

[blocks]
n = 7
k = 3
values = { l12 = 1.0, l13 = 1.0, l23 = 1.0, ltilde = 0.0, l3 = 1.0 }
"#;

    #[test]
    fn isotropic_blocks_pass() {
        let sc = Scenario::from_toml_str(ISOTROPIC, "inline").unwrap();
        let r = run(&sc, Path::new(".")).unwrap();
        assert_eq!(r.status, "certified_positive");
        assert_eq!(r.exit_code(), 0);
        assert!(r.checks.iter().all(|c| c.tolerance.is_finite()));
    }

    #[test]
    fn echo_round_trips() {
        let sc = Scenario::from_toml_str(ISOTROPIC, "inline").unwrap();
        let r = run(&sc, Path::new(".")).unwrap();
        let back = Scenario::from_toml_str(&r.scenario_echo().unwrap().unwrap(), "echo").unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn parse_errors_carry_position() {
        let bad = "kind = \"neck\"\nseed = \"x\"\n";
        let e = Scenario::from_toml_str(bad, "f.toml").unwrap_err();
        let LabError::Parse(msg) = &e else { panic!("{e:?}") };
        assert!(msg.starts_with("f.toml:2:"), "{msg}");
        assert_eq!(exit_code_for(&e), 2);
    }

    #[test]
    fn wrong_section_rejected() {
        let text = "kind = \"docking\"\n[neck]\nn=7\nr=0.05\na_inf=6\nrho=0.3\nepsilon=0.01\ndelta=0.01\nt0=1e3\n";
        assert!(matches!(Scenario::from_toml_str(text, "x"), Err(LabError::Parse(_))));
    }

    #[test]
    fn neck_precondition_at_parse_time() {
        let text = "kind = \"neck\"\n[neck]\nn=7\nr=0.05\na_inf=6\nrho=0.2\nepsilon=0.01\ndelta=0.01\nt0=1e3\n";
        let e = Scenario::from_toml_str(text, "x").unwrap_err();
        assert!(e.to_string().contains("rho in (r^(1/2), R)"), "{e}");
        assert_eq!(exit_code_for(&e), 2);
    }

    #[test]
    fn empty_grid_gives_schema_only_file() {
        let dir = tempfile::tempdir().unwrap();
        let sc = Scenario::from_toml_str(ISOTROPIC, "inline").unwrap();
        let mut r = run(&sc, Path::new(".")).unwrap();
        r.grids = vec![Grid::blocks("blocks", ("t", "t"))];
        emit_grid(&r, dir.path(), GridFormat::Csv).unwrap();
        let csv = fs::read_to_string(dir.path().join("blocks.csv")).unwrap();
        assert_eq!(csv, "t,x,l12,l13,l23,ltilde,l3\n");
        assert!(dir.path().join("blocks.schema.json").exists());
    }

    #[test]
    fn obstruction_and_plumbing_scenarios() {
        let sc = Scenario::from_toml_str("kind = \"obstruction\"\n[obstruction]\nname = \"CP3\"\nk = 4\n", "x").unwrap();
        assert_eq!(run(&sc, Path::new(".")).unwrap().exit_code(), 1);
        let sc = Scenario::from_toml_str("kind = \"plumbing\"\n[plumbing]\npreset = \"HP2\"\n", "x").unwrap();
        let r = run(&sc, Path::new(".")).unwrap();
        assert_eq!(r.details["range"]["k_min"], 5);
    }

    #[test]
    fn catalog_checks_pass() {
        assert!(catalog_report(0).passed);
    }
}
