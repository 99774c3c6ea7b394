//! Topological bookkeeping around core metrics: connectivity obstructions,
//! curvature indices for surgery and plumbing, and the catalog of spaces
//! known to carry core metrics.

use petgraph::algo::{connected_components, is_cyclic_undirected};
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifoldDescriptor {
    pub name: String,
    pub n: usize,
    /// Largest `c` with `π_i = 0` for `1 ≤ i ≤ c`.
    pub connectivity: usize,
    pub homotopy_sphere: bool,
    pub known_core_k: Option<usize>,
}

impl ManifoldDescriptor {
    pub fn new(name: &str, n: usize, connectivity: usize, homotopy_sphere: bool) -> Result<Self> {
        if n == 0 {
            return Err(LabError::invalid("n", "dimension must be positive"));
        }
        if connectivity > n {
            return Err(LabError::invalid(
                "connectivity",
                format!("must lie in [0, n = {n}], got {connectivity}"),
            ));
        }
        Ok(ManifoldDescriptor {
            name: name.into(),
            n,
            connectivity,
            homotopy_sphere,
            known_core_k: None,
        })
    }

    pub fn sphere(n: usize) -> Self {
        ManifoldDescriptor {
            name: format!("S{n}"),
            n,
            connectivity: n - 1,
            homotopy_sphere: true,
            known_core_k: Some(1),
        }
    }

    /// `ℂPⁿ`, real dimension `2n`.
    pub fn complex_projective(n: usize) -> Self {
        ManifoldDescriptor {
            name: format!("CP{n}"),
            n: 2 * n,
            connectivity: 1,
            homotopy_sphere: n == 1,
            known_core_k: Some(2 * n - 1),
        }
    }

    /// `ℍPⁿ`, real dimension `4n`.
    pub fn quaternionic_projective(n: usize) -> Self {
        ManifoldDescriptor {
            name: format!("HP{n}"),
            n: 4 * n,
            connectivity: 3,
            homotopy_sphere: n == 1,
            known_core_k: Some(4 * n - 3),
        }
    }

    pub fn cayley_plane() -> Self {
        ManifoldDescriptor {
            name: "OP2".into(),
            n: 16,
            connectivity: 7,
            homotopy_sphere: false,
            known_core_k: Some(9),
        }
    }

    /// Parses `S<n>`, `CP<n>`, `HP<n>` or `OP2`.
    pub fn from_name(name: &str) -> Result<Self> {
        let upper = name.trim().to_ascii_uppercase();
        let num = |rest: &str| -> Result<usize> {
            rest.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| LabError::Parse(format!("unknown manifold `{name}`")))
        };
        if upper == "OP2" {
            Ok(Self::cayley_plane())
        } else if let Some(rest) = upper.strip_prefix("CP") {
            Ok(Self::complex_projective(num(rest)?))
        } else if let Some(rest) = upper.strip_prefix("HP") {
            Ok(Self::quaternionic_projective(num(rest)?))
        } else if let Some(rest) = upper.strip_prefix('S') {
            let n = num(rest)?;
            Ok(Self::sphere(n))
        } else {
            Err(LabError::Parse(format!(
                "unknown manifold `{name}` (expected S<n>, CP<n>, HP<n> or OP2)"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Obstruction {
    /// A `k`-core metric would make the manifold `(n − k)`-connected.
    Obstructed { required: usize, connectivity: usize },
    /// `k ≤ ⌊(n+1)/2⌋` forces a homotopy sphere.
    HomotopySphereForced { threshold: usize },
    /// No obstruction from connectivity; existence is not asserted.
    NotObstructed,
}

impl Obstruction {
    pub fn is_obstructed(self) -> bool {
        !matches!(self, Obstruction::NotObstructed)
    }
}

/// Necessary conditions for a `k`-core metric.
pub fn core_obstruction(m: &ManifoldDescriptor, k: usize) -> Result<Obstruction> {
    if k < 1 || k >= m.n {
        return Err(LabError::invalid(
            "k",
            format!("need 1 ≤ k ≤ n − 1 = {}, got {k}", m.n.saturating_sub(1)),
        ));
    }
    let required = m.n - k;
    if m.connectivity < required {
        return Ok(Obstruction::Obstructed {
            required,
            connectivity: m.connectivity,
        });
    }
    let threshold = (m.n + 1) / 2;
    if k <= threshold && !m.homotopy_sphere {
        return Ok(Obstruction::HomotopySphereForced { threshold });
    }
    Ok(Obstruction::NotObstructed)
}

// ---------------------------------------------------------------------------
// surgery and plumbing

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurgeryRange {
    /// `max(p+2, q+2, q+k₂)`.
    pub k_min: usize,
    pub hypotheses: Vec<Hypothesis>,
    pub warning: bool,
    /// The plumbing bound `max(p+2, p+k₁, q+2, q+k₂)` for the same data.
    pub plumbing_bound: usize,
    pub note: Option<String>,
}

fn check_pq(p: usize, q: usize) -> Result<()> {
    if p < 2 || q < 2 {
        return Err(LabError::precondition(
            "p, q >= 2",
            format!("got p = {p}, q = {q}"),
        ));
    }
    Ok(())
}

/// Curvature index after one generalized surgery on `M^{p+q+1}` with
/// `Ric_{k₁} > 0`, using an `S^q`-bundle over a `(p+1)`-dimensional base
/// with a `k₂`-core metric.
pub fn surgery_k_range(p: usize, q: usize, k1: usize, k2: usize) -> Result<SurgeryRange> {
    check_pq(p, q)?;
    if k1 < 1 || k2 < 1 {
        return Err(LabError::invalid("k", "curvature indices start at 1"));
    }
    let emb = (p + 1).max(q + 2);
    let hypotheses = vec![
        Hypothesis {
            name: "(i) M has Ric_k1 > 0".into(),
            holds: k1 < p + q + 1,
            detail: format!("k1 = {k1}, dim M = {}", p + q + 1),
        },
        Hypothesis {
            name: "(ii) embedded S^p x D^(q+1) forces k1 >= max(p+1, q+2)".into(),
            holds: k1 >= emb,
            detail: format!("k1 = {k1}, bound = {emb}"),
        },
        Hypothesis {
            name: "(iii) base of dimension p+1 has a k2-core metric".into(),
            holds: k2 <= p,
            detail: format!("k2 = {k2}, base dimension = {}", p + 1),
        },
    ];
    let warning = hypotheses.iter().any(|h| !h.holds);
    let k_min = (p + 2).max(q + 2).max(q + k2);
    let plumbing_bound = k_min.max(p + k1);
    let note = (plumbing_bound != k_min).then(|| {
        format!("the plumbing bound adds p + k1 = {} and gives {plumbing_bound}", p + k1)
    });
    Ok(SurgeryRange {
        k_min,
        hypotheses,
        warning,
        plumbing_bound,
        note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum CurvatureDatum {
    /// The base carries `Ric_k > 0`.
    Ric(usize),
    /// The base carries a `k`-core metric (which has `Ric_k > 0`).
    Core(usize),
}

impl CurvatureDatum {
    pub fn k(self) -> usize {
        match self {
            CurvatureDatum::Ric(k) | CurvatureDatum::Core(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexRole {
    /// The bundle whose base supplies the `Ric_{k₁} > 0` metric.
    Fixed,
    Other,
}

/// A linear disc bundle: `fibre_dim`-disc over a `base_dim`-dimensional base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleVertex {
    pub name: String,
    pub base_dim: usize,
    pub fibre_dim: usize,
    pub datum: Option<CurvatureDatum>,
    pub role: VertexRole,
}

impl BundleVertex {
    pub fn new(name: &str, base_dim: usize, fibre_dim: usize, datum: CurvatureDatum, role: VertexRole) -> Self {
        BundleVertex {
            name: name.into(),
            base_dim,
            fibre_dim,
            datum: Some(datum),
            role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlumbingGraph {
    pub vertices: Vec<BundleVertex>,
    pub edges: Vec<(usize, usize)>,
}

impl PlumbingGraph {
    /// Connected, acyclic, and base/fibre dimensions exchanged across edges.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if nv == 0 {
            return Err(LabError::Graph("empty graph".into()));
        }
        let mut g: UnGraph<(), ()> = UnGraph::new_undirected();
        let nodes: Vec<NodeIndex> = (0..nv).map(|_| g.add_node(())).collect();
        for &(u, v) in &self.edges {
            if u >= nv || v >= nv || u == v {
                return Err(LabError::Graph(format!("invalid edge ({u}, {v})")));
            }
            let (a, b) = (&self.vertices[u], &self.vertices[v]);
            if a.base_dim != b.fibre_dim || a.fibre_dim != b.base_dim {
                return Err(LabError::Graph(format!(
                    "edge {}–{}: base and fibre dimensions must be exchanged ({}/{} vs {}/{})",
                    a.name, b.name, a.base_dim, a.fibre_dim, b.base_dim, b.fibre_dim
                )));
            }
            g.add_edge(nodes[u], nodes[v], ());
        }
        if connected_components(&g) != 1 {
            return Err(LabError::Graph("graph is not connected".into()));
        }
        if is_cyclic_undirected(&g) {
            return Err(LabError::Graph("graph has a cycle (must be a tree)".into()));
        }
        Ok(())
    }

    pub fn is_path(&self) -> bool {
        let mut deg = vec![0usize; self.vertices.len()];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg.iter().all(|&d| d <= 2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlumbingRange {
    pub p: usize,
    pub q: usize,
    pub k1: usize,
    /// `None` when no bundle has a base of dimension `p + 1`.
    pub k2: Option<usize>,
    /// `max{p+2, p+k₁, q+2, q+k₂}`.
    pub k_min: usize,
    pub notes: Vec<String>,
}

/// Curvature index on the boundary of a plumbing.
///
/// `p + 1` and `q + 1` are the fibre and base dimension of the fixed bundle.
/// Other bundles over `(q+1)`-bases must declare core metrics; their largest
/// index enters `k₁` together with the fixed base. Bundles over
/// `(p+1)`-bases determine `k₂`; without any, the `q + k₂` term is dropped.
pub fn plumbing_k_range(graph: &PlumbingGraph) -> Result<PlumbingRange> {
    graph.validate()?;
    let fixed: Vec<&BundleVertex> = graph
        .vertices
        .iter()
        .filter(|v| v.role == VertexRole::Fixed)
        .collect();
    let fixed = match fixed.as_slice() {
        [f] => *f,
        _ => {
            return Err(LabError::Graph(format!(
                "exactly one fixed bundle required, found {}",
                fixed.len()
            )))
        }
    };
    if fixed.base_dim < 1 || fixed.fibre_dim < 1 {
        return Err(LabError::Graph("dimensions must be positive".into()));
    }
    let q = fixed.base_dim - 1;
    let p = fixed.fibre_dim - 1;
    check_pq(p, q)?;
    let mut k1 = fixed
        .datum
        .ok_or_else(|| LabError::Graph(format!("{}: missing curvature datum", fixed.name)))?
        .k();
    let mut notes = Vec::new();
    let mut k2: Option<usize> = None;
    for v in graph.vertices.iter().filter(|v| v.role == VertexRole::Other) {
        let core = match v.datum {
            Some(CurvatureDatum::Core(k)) => k,
            Some(CurvatureDatum::Ric(_)) => {
                return Err(LabError::Graph(format!(
                    "{}: only the fixed bundle may declare Ric_k; others need core metrics",
                    v.name
                )))
            }
            None => return Err(LabError::Graph(format!("{}: missing curvature datum", v.name))),
        };
        if core >= v.base_dim {
            return Err(LabError::Graph(format!(
                "{}: a {core}-core metric needs k < base dimension {}",
                v.name, v.base_dim
            )));
        }
        let mut matched = false;
        if v.base_dim == q + 1 {
            matched = true;
            if core > k1 {
                notes.push(format!("k1 raised from {k1} to {core} by {}", v.name));
                k1 = core;
            }
        }
        if v.base_dim == p + 1 {
            matched = true;
            k2 = Some(k2.map_or(core, |c| c.max(core)));
        }
        if !matched {
            return Err(LabError::Graph(format!(
                "{}: base dimension {} is neither q+1 = {} nor p+1 = {}",
                v.name,
                v.base_dim,
                q + 1,
                p + 1
            )));
        }
    }
    let mut k_min = (p + 2).max(p + k1).max(q + 2);
    match k2 {
        Some(k2) => k_min = k_min.max(q + k2),
        None => notes.push("no bundle over a (p+1)-dimensional base: q + k2 term omitted".into()),
    }
    Ok(PlumbingRange {
        p,
        q,
        k1,
        k2,
        k_min,
        notes,
    })
}

/// A linear `S^p`-bundle over a `q`-dimensional base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereBundle {
    pub name: String,
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereBundleSum {
    /// `max{p+2, p+k, q+1}`.
    pub k_min: usize,
    pub graph: PlumbingGraph,
    /// `plumbing_k_range` on the emitted graph.
    pub graph_k_min: usize,
}

/// Connected sum of sphere bundles as the boundary of a plumbing: the disc
/// bundles `Ē_i` alternate with trivial `D^q`-bundles over `S^{p+1}`, each of
/// which also carries a trivial `D^{p+1}`-bundle over `S^q`.
pub fn sphere_bundle_connected_sum(bundles: &[SphereBundle], k: usize) -> Result<SphereBundleSum> {
    let first = bundles
        .first()
        .ok_or_else(|| LabError::invalid("bundles", "need at least one bundle"))?;
    let (p, q) = (first.p, first.q);
    for b in bundles {
        if b.p != p || b.q != q {
            return Err(LabError::DimensionMismatch {
                expected: p + q,
                found: b.p + b.q,
            });
        }
    }
    if q < 3 || p < 2 {
        return Err(LabError::precondition(
            "p >= 2, q >= 3",
            format!("got p = {p}, q = {q}"),
        ));
    }
    if k < 1 || k >= q {
        return Err(LabError::invalid("k", format!("need 1 ≤ k < q = {q}, got {k}")));
    }
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, b) in bundles.iter().enumerate() {
        let e = vertices.len();
        vertices.push(BundleVertex::new(
            &format!("disc bundle of {}", b.name),
            q,
            p + 1,
            if i == 0 { CurvatureDatum::Ric(k) } else { CurvatureDatum::Core(k) },
            if i == 0 { VertexRole::Fixed } else { VertexRole::Other },
        ));
        if let Some(c) = prev {
            edges.push((c, e));
        }
        if i + 1 < bundles.len() {
            let c = vertices.len();
            vertices.push(BundleVertex::new(
                &format!("D{q} x S{}", p + 1),
                p + 1,
                q,
                CurvatureDatum::Core(1),
                VertexRole::Other,
            ));
            let leaf = vertices.len();
            vertices.push(BundleVertex::new(
                &format!("D{} x S{q}", p + 1),
                q,
                p + 1,
                CurvatureDatum::Core(1),
                VertexRole::Other,
            ));
            edges.push((e, c));
            edges.push((c, leaf));
            prev = Some(c);
        }
    }
    let graph = PlumbingGraph { vertices, edges };
    let graph_k_min = plumbing_k_range(&graph)?.k_min;
    Ok(SphereBundleSum {
        k_min: (p + 2).max(p + k).max(q + 1),
        graph,
        graph_k_min,
    })
}

// ---------------------------------------------------------------------------
// catalog

/// `G/K` with Lie algebra dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomogeneousData {
    pub g: String,
    pub k: String,
    pub dim_g: usize,
    pub dim_k: usize,
}

impl HomogeneousData {
    pub fn dim_quotient(&self) -> usize {
        self.dim_g - self.dim_k
    }
}

fn dim_u(m: usize) -> usize {
    m * m
}

fn dim_sp(m: usize) -> usize {
    m * (2 * m + 1)
}

fn dim_spin(m: usize) -> usize {
    m * (m - 1) / 2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub manifold: ManifoldDescriptor,
    pub k: usize,
    pub provenance: String,
    pub homogeneous: Option<HomogeneousData>,
}

impl CatalogEntry {
    /// `dim(G/K) + 1` where available, otherwise the stated index.
    pub fn derived_k(&self) -> usize {
        self.homogeneous
            .as_ref()
            .map_or(self.k, |h| h.dim_quotient() + 1)
    }
}

pub fn catalog_entry_cp(n: usize) -> CatalogEntry {
    let h = HomogeneousData {
        g: format!("U({n})"),
        k: format!("U({})U(1)", n - 1),
        dim_g: dim_u(n),
        dim_k: dim_u(n - 1) + dim_u(1),
    };
    CatalogEntry {
        manifold: ManifoldDescriptor::complex_projective(n),
        k: h.dim_quotient() + 1,
        provenance: "cohomogeneity-one disc bundle over CP(n-1)".into(),
        homogeneous: Some(h),
    }
}

pub fn catalog_entry_hp(n: usize) -> CatalogEntry {
    let h = HomogeneousData {
        g: format!("Sp({n})"),
        k: format!("Sp({})Sp(1)", n - 1),
        dim_g: dim_sp(n),
        dim_k: dim_sp(n - 1) + dim_sp(1),
    };
    CatalogEntry {
        manifold: ManifoldDescriptor::quaternionic_projective(n),
        k: h.dim_quotient() + 1,
        provenance: "cohomogeneity-one disc bundle over HP(n-1)".into(),
        homogeneous: Some(h),
    }
}

pub fn catalog_entry_op2() -> CatalogEntry {
    let h = HomogeneousData {
        g: "Spin(9)".into(),
        k: "Spin(8)".into(),
        dim_g: dim_spin(9),
        dim_k: dim_spin(8),
    };
    CatalogEntry {
        manifold: ManifoldDescriptor::cayley_plane(),
        k: h.dim_quotient() + 1,
        provenance: "cohomogeneity-one disc bundle over S8".into(),
        homogeneous: Some(h),
    }
}

pub fn catalog_entry_sphere(n: usize) -> CatalogEntry {
    CatalogEntry {
        manifold: ManifoldDescriptor::sphere(n),
        k: 1,
        provenance: "round metric, hemisphere complement".into(),
        homogeneous: None,
    }
}

/// Spheres up to dimension 16, projective spaces up to `n = 5`, and `𝕆P²`.
pub fn catalog_core_metrics() -> Vec<CatalogEntry> {
    let mut out: Vec<CatalogEntry> = (2..=16).map(catalog_entry_sphere).collect();
    out.extend((2..=5).map(catalog_entry_cp));
    out.extend((2..=5).map(catalog_entry_hp));
    out.push(catalog_entry_op2());
    out
}

/// Coefficient of `L|_𝔭` in the metric induced on a slice:
/// `(1+ε) · (f²b/(1+ε)) / (1 + f²b/(1+ε))`.
pub fn slice_metric_factor(f: f64, b_cheeger: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in [("f", f), ("b", b_cheeger), ("epsilon", epsilon)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(LabError::invalid(name, format!("must be positive, got {v}")));
        }
    }
    let u = f * f * b_cheeger / (1.0 + epsilon);
    Ok((1.0 + epsilon) * u / (1.0 + u))
}

/// The value of `f` that makes the slice metric factor equal to one.
pub fn round_boundary_f(b_cheeger: f64, epsilon: f64) -> Result<f64> {
    if !(b_cheeger > 0.0 && epsilon > 0.0) {
        return Err(LabError::invalid("b, epsilon", "must be positive"));
    }
    Ok(((1.0 + epsilon) / (b_cheeger * epsilon)).sqrt())
}
