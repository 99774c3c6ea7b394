//! Positivity of the curvature operator on k-chains.
//!
//! The operator has the block structure that arises for doubly warped
//! metrics: `V = V₁ ⊕ V₂ ⊕ V₃` with `dim V₁ = dim V₂ = 1`, `dim V₃ = n − 2`,
//!
//! ```text
//! R(e₁∧e₂) = λ₁₂ e₁∧e₂
//! R(e₁∧e_a) = λ₁₃ e₁∧e_a + λ̃ e₂∧e_a        (a ≥ 3)
//! R(e₂∧e_a) = λ̃ e₁∧e_a + λ₂₃ e₂∧e_a
//! R(e_a∧e_b) = λ₃ e_a∧e_b
//! ```
//!
//! Three independent decision paths are provided: closed-form inequalities,
//! a row-sum test on the diagonalized operator, and a sampling oracle that
//! minimizes the exact per-base chain minimum (sum of the k smallest
//! eigenvalues of the Jacobi form) over base directions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Relative strictness resolution. A margin counts as positive when it
/// exceeds `TAU` times the magnitude of its own terms plus the propagated
/// block uncertainty.
pub const TAU: f64 = 1e-10;

/// Default absolute uncertainty of each block, relative to the largest block.
pub const NOISE: f64 = 1e-12;

/// Block values in an orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockValues {
    pub l12: f64,
    pub l13: f64,
    pub l23: f64,
    pub ltilde: f64,
    pub l3: f64,
}

impl BlockValues {
    pub const fn new(l12: f64, l13: f64, l23: f64, ltilde: f64, l3: f64) -> Self {
        BlockValues {
            l12,
            l13,
            l23,
            ltilde,
            l3,
        }
    }

    pub fn scale(&self) -> f64 {
        [self.l12, self.l13, self.l23, self.ltilde, self.l3]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        BlockValues::new(
            c * self.l12,
            c * self.l13,
            c * self.l23,
            c * self.ltilde,
            c * self.l3,
        )
    }

    fn abs(&self) -> Self {
        BlockValues::new(
            self.l12.abs(),
            self.l13.abs(),
            self.l23.abs(),
            self.ltilde.abs(),
            self.l3.abs(),
        )
    }

    fn add(&self, o: &Self) -> Self {
        BlockValues::new(
            self.l12 + o.l12,
            self.l13 + o.l13,
            self.l23 + o.l23,
            self.ltilde + o.ltilde,
            self.l3 + o.l3,
        )
    }

    fn is_finite(&self) -> bool {
        [self.l12, self.l13, self.l23, self.ltilde, self.l3]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Block data together with the ambient dimension and chain length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockOperator {
    pub blocks: BlockValues,
    pub n: usize,
    pub k: usize,
    /// Absolute uncertainty of each block value.
    pub noise: BlockValues,
}

impl BlockOperator {
    /// `n ≥ 4` so that `V₃∧V₃` is non-trivial; `2 ≤ k ≤ n − 1`.
    pub fn new(blocks: BlockValues, n: usize, k: usize) -> Result<Self> {
        if n < 4 {
            return Err(LabError::invalid("n", format!("need n ≥ 4, got {n}")));
        }
        if k < 2 || k >= n {
            return Err(LabError::invalid(
                "k",
                format!("need 2 ≤ k ≤ n − 1 = {}, got {k}", n - 1),
            ));
        }
        if !blocks.is_finite() {
            return Err(LabError::invalid("blocks", "block values must be finite"));
        }
        let s = NOISE * blocks.scale();
        Ok(BlockOperator {
            blocks,
            n,
            k,
            noise: BlockValues::new(s, s, s, s, s),
        })
    }

    /// Replaces the default uniform uncertainty.
    pub fn with_noise(mut self, noise: BlockValues) -> Result<Self> {
        if !noise.is_finite() || noise.abs() != noise {
            return Err(LabError::invalid("noise", "uncertainties must be finite and ≥ 0"));
        }
        self.noise = noise;
        Ok(self)
    }

    /// Uncertainty proportional to each block, for blocks computed without
    /// cancellation.
    pub fn with_relative_noise(self, rel: f64) -> Result<Self> {
        let noise = self.blocks.abs().scaled(rel);
        self.with_noise(noise)
    }

    /// Size of the terms each margin is computed from.
    pub fn magnitudes(&self) -> Margins {
        Margins::magnitudes(&self.blocks.abs(), self.k)
    }

    /// Per-inequality thresholds a margin has to exceed.
    pub fn thresholds(&self) -> Margins {
        let a = self.blocks.abs();
        let mag = Margins::magnitudes(&a, self.k);
        let widened = Margins::magnitudes(&a.add(&self.noise), self.k);
        Margins {
            i: TAU * mag.i + (widened.i - mag.i),
            ii: TAU * mag.ii + (widened.ii - mag.ii),
            iii: TAU * mag.iii + (widened.iii - mag.iii),
            iv13: TAU * mag.iv13 + (widened.iv13 - mag.iv13),
            iv23: TAU * mag.iv23 + (widened.iv23 - mag.iv23),
            iv3: TAU * mag.iv3 + (widened.iv3 - mag.iv3),
        }
    }

    /// Range where the closed-form inequalities are necessary and sufficient.
    pub fn is_equivalence_range(&self) -> bool {
        self.k + 3 <= self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainStatus {
    CertifiedPositive,
    CertifiedNotPositive,
    /// Sufficient inequalities failed outside the equivalence range.
    Inconclusive,
    /// The sampling oracle found no non-positive chain; evidence, not proof.
    SampledPositive,
}

impl ChainStatus {
    /// `Some(true)` for positive outcomes, `Some(false)` for a refutation.
    pub fn sign(self) -> Option<bool> {
        match self {
            ChainStatus::CertifiedPositive | ChainStatus::SampledPositive => Some(true),
            ChainStatus::CertifiedNotPositive => Some(false),
            ChainStatus::Inconclusive => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictBasis {
    ClosedForm,
    RowSum,
    Sampling,
}

/// The closed-form inequalities; `Iv*` split condition (iv) by block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    I,
    II,
    III,
    Iv13,
    Iv23,
    Iv3,
}

impl Inequality {
    pub const ALL: [Inequality; 6] = [
        Inequality::I,
        Inequality::II,
        Inequality::III,
        Inequality::Iv13,
        Inequality::Iv23,
        Inequality::Iv3,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Inequality::I => "(i)",
            Inequality::II => "(ii)",
            Inequality::III => "(iii)",
            Inequality::Iv13 | Inequality::Iv23 | Inequality::Iv3 => "(iv)",
        }
    }

    pub fn degree(self) -> i32 {
        match self {
            Inequality::II | Inequality::III => 2,
            _ => 1,
        }
    }
}

/// Raw margins (left side minus right side) of each inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub i: f64,
    pub ii: f64,
    pub iii: f64,
    pub iv13: f64,
    pub iv23: f64,
    pub iv3: f64,
}

impl Margins {
    pub fn compute(b: &BlockValues, k: usize) -> Self {
        let km1 = (k - 1) as f64;
        Margins {
            i: b.l12 + 0.5 * km1 * (b.l13 + b.l23),
            ii: (b.l12 + km1 * b.l13) * (b.l12 + km1 * b.l23) - km1 * km1 * b.ltilde * b.ltilde,
            iii: b.l13 * b.l23 - b.ltilde * b.ltilde,
            iv13: b.l13,
            iv23: b.l23,
            iv3: b.l3,
        }
    }

    /// The margin expressions evaluated on absolute values, i.e. the size of
    /// the terms each margin is computed from.
    fn magnitudes(a: &BlockValues, k: usize) -> Self {
        let km1 = (k - 1) as f64;
        Margins {
            i: a.l12 + 0.5 * km1 * (a.l13 + a.l23),
            ii: (a.l12 + km1 * a.l13) * (a.l12 + km1 * a.l23) + km1 * km1 * a.ltilde * a.ltilde,
            iii: a.l13 * a.l23 + a.ltilde * a.ltilde,
            iv13: a.l13,
            iv23: a.l23,
            iv3: a.l3,
        }
    }

    pub fn get(&self, which: Inequality) -> f64 {
        match which {
            Inequality::I => self.i,
            Inequality::II => self.ii,
            Inequality::III => self.iii,
            Inequality::Iv13 => self.iv13,
            Inequality::Iv23 => self.iv23,
            Inequality::Iv3 => self.iv3,
        }
    }

    /// First inequality whose margin does not clear its threshold.
    pub fn first_failure(&self, thresholds: &Margins) -> Option<Inequality> {
        Inequality::ALL
            .into_iter()
            .find(|&q| !(self.get(q) > thresholds.get(q)))
    }

    /// Componentwise minimum.
    pub fn min(&self, other: &Margins) -> Margins {
        Margins {
            i: self.i.min(other.i),
            ii: self.ii.min(other.ii),
            iii: self.iii.min(other.iii),
            iv13: self.iv13.min(other.iv13),
            iv23: self.iv23.min(other.iv23),
            iv3: self.iv3.min(other.iv3),
        }
    }

    pub fn scaled(&self, c: f64) -> Margins {
        Margins {
            i: c * self.i,
            ii: c * c * self.ii,
            iii: c * c * self.iii,
            iv13: c * self.iv13,
            iv23: c * self.iv23,
            iv3: c * self.iv3,
        }
    }
}

/// An explicit k-chain `{v₀∧v₁, …, v₀∧v_k}` in frame coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub base: Vec<f64>,
    pub legs: Vec<Vec<f64>>,
    /// `Σᵢ ⟨R(v₀∧vᵢ), v₀∧vᵢ⟩`, recomputed from the operator.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainVerdict {
    pub status: ChainStatus,
    pub basis: VerdictBasis,
    pub n: usize,
    pub k: usize,
    pub failing_inequality: Option<Inequality>,
    pub margins: Option<Margins>,
    pub witness: Option<Witness>,
    /// Smallest chain value seen (row-sum and sampling paths).
    pub min_value: Option<f64>,
}

impl ChainVerdict {
    pub fn is_positive(&self) -> bool {
        self.status.sign() == Some(true)
    }
}

/// Closed-form test. For `k ≤ n − 3` the verdict is an equivalence; for
/// larger `k` a failure is inconclusive unless an explicit negative chain is
/// exhibited.
pub fn check_inequalities(op: &BlockOperator) -> ChainVerdict {
    let b = &op.blocks;
    let scale = b.scale();
    let margins = Margins::compute(b, op.k);
    let failing = margins.first_failure(&op.thresholds());
    let mut verdict = ChainVerdict {
        status: ChainStatus::CertifiedPositive,
        basis: VerdictBasis::ClosedForm,
        n: op.n,
        k: op.k,
        failing_inequality: failing,
        margins: Some(margins),
        witness: None,
        min_value: None,
    };
    if failing.is_none() {
        return verdict;
    }
    let rs = row_sum_criterion(&diagonalize_mixed_block(b), op.n, op.k);
    let witness = rs.witness;
    verdict.status = if op.is_equivalence_range() {
        ChainStatus::CertifiedNotPositive
    } else {
        match &witness {
            Some(w) if w.value < -TAU * scale => ChainStatus::CertifiedNotPositive,
            _ => ChainStatus::Inconclusive,
        }
    };
    verdict.min_value = rs.min_value;
    verdict.witness = witness;
    verdict
}

/// Eigen-decomposition of the mixed block `[[λ₁₃, λ̃], [λ̃, λ₂₃]]`.
///
/// The rotated frame is `v₁' = (μ e₁ + e₂)/√(1+μ²)`,
/// `v₂' = (e₁ − μ e₂)/√(1+μ²)`. For `λ̃ = 0` the frame is left unchanged and
/// `μ = +∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimedEigenvalues {
    pub mu: f64,
    pub lambda12p: f64,
    pub lambda13p: f64,
    pub lambda23p: f64,
    pub lambda33p: f64,
}

impl PrimedEigenvalues {
    /// Unit vectors `v₁'`, `v₂'` as coordinates in `(e₁, e₂)`.
    pub fn frame(&self) -> ([f64; 2], [f64; 2]) {
        if self.mu.is_infinite() {
            return ([1.0, 0.0], [0.0, 1.0]);
        }
        let s = 1.0 / (1.0 + self.mu * self.mu).sqrt();
        ([self.mu * s, s], [s, -self.mu * s])
    }

    /// The mixed block expressed in the rotated frame.
    pub fn rotated_block(&self, l13: f64, l23: f64, lt: f64) -> [[f64; 2]; 2] {
        let (p, q) = self.frame();
        let m = [[l13, lt], [lt, l23]];
        let quad = |u: [f64; 2], v: [f64; 2]| {
            let mv = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
            u[0] * mv[0] + u[1] * mv[1]
        };
        [[quad(p, p), quad(p, q)], [quad(q, p), quad(q, q)]]
    }
}

pub fn diagonalize_mixed_block(b: &BlockValues) -> PrimedEigenvalues {
    let (l13, l23, lt) = (b.l13, b.l23, b.ltilde);
    if lt == 0.0 {
        return PrimedEigenvalues {
            mu: f64::INFINITY,
            lambda12p: b.l12,
            lambda13p: l13,
            lambda23p: l23,
            lambda33p: b.l3,
        };
    }
    let d = l13 - l23;
    let root = d.hypot(2.0 * lt);
    let mu = if d >= 0.0 {
        (d + root) / (2.0 * lt)
    } else {
        2.0 * lt / (root - d)
    };
    let sum = l13 + l23;
    let det = l13 * l23 - lt * lt;
    // pick the non-cancelling root, recover the other from the determinant
    let (hi, lo) = if sum >= 0.0 {
        let hi = 0.5 * (sum + root);
        (hi, if hi != 0.0 { det / hi } else { 0.5 * (sum - root) })
    } else {
        let lo = 0.5 * (sum - root);
        (if lo != 0.0 { det / lo } else { 0.5 * (sum + root) }, lo)
    };
    PrimedEigenvalues {
        mu,
        lambda12p: b.l12,
        lambda13p: hi,
        lambda23p: lo,
        lambda33p: b.l3,
    }
}

/// Matrix of operator eigenvalues on `eᵢ'∧eⱼ'` (zero diagonal).
pub fn row_sum_matrix(p: &PrimedEigenvalues, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let (i, j) = (i.min(j), i.max(j));
        match (i, j) {
            _ if i == j => 0.0,
            (0, 1) => p.lambda12p,
            (0, _) => p.lambda13p,
            (1, _) => p.lambda23p,
            _ => p.lambda33p,
        }
    })
}

/// Checks that in every row the `k` smallest off-diagonal entries sum to a
/// positive number. A failing row yields an explicit chain based at the
/// corresponding frame vector.
pub fn row_sum_criterion(p: &PrimedEigenvalues, n: usize, k: usize) -> ChainVerdict {
    let m = row_sum_matrix(p, n);
    let scale = [p.lambda12p, p.lambda13p, p.lambda23p, p.lambda33p]
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut worst: Option<(f64, usize, Vec<usize>)> = None;
    for i in 0..n {
        let mut entries: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (m[(i, j)], j)).collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let take = &entries[..k.min(entries.len())];
        let sum: f64 = take.iter().map(|e| e.0).sum();
        if worst.as_ref().is_none_or(|w| sum < w.0) {
            worst = Some((sum, i, take.iter().map(|e| e.1).collect()));
        }
    }
    let (min_sum, row, legs) = worst.expect("n ≥ 2");
    let positive = min_sum > TAU * scale;
    let witness = (!positive).then(|| {
        let (v1, v2) = p.frame();
        let frame_vec = |j: usize| -> Vec<f64> {
            let mut v = vec![0.0; n];
            match j {
                0 => v[..2].copy_from_slice(&v1),
                1 => v[..2].copy_from_slice(&v2),
                _ => v[j] = 1.0,
            }
            v
        };
        Witness {
            base: frame_vec(row),
            legs: legs.iter().map(|&j| frame_vec(j)).collect(),
            value: min_sum,
        }
    });
    ChainVerdict {
        status: if positive {
            ChainStatus::CertifiedPositive
        } else {
            ChainStatus::CertifiedNotPositive
        },
        basis: VerdictBasis::RowSum,
        n,
        k,
        failing_inequality: None,
        margins: None,
        witness,
        min_value: Some(min_sum),
    }
}

// ---------------------------------------------------------------------------
// operators on Λ² and the sampling oracle

/// A symmetric operator on `Λ²ℝⁿ`, stored as its non-zero entries in the
/// basis `eᵢ∧eⱼ` (`i < j`, lexicographic).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureOperator {
    n: usize,
    pairs: Vec<(usize, usize)>,
    entries: Vec<(usize, usize, f64)>,
}

impl CurvatureOperator {
    pub fn pair_basis(n: usize) -> Vec<(usize, usize)> {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    }

    /// From a dense symmetric matrix on `Λ²ℝⁿ`.
    pub fn from_matrix(n: usize, m: &DMatrix<f64>) -> Result<Self> {
        let pairs = Self::pair_basis(n);
        let dim = pairs.len();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(LabError::DimensionMismatch {
                expected: dim,
                found: m.nrows(),
            });
        }
        let mut entries = Vec::new();
        for p in 0..dim {
            for q in 0..dim {
                let a = m[(p, q)];
                if (a - m[(q, p)]).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(LabError::invalid("operator", "matrix is not symmetric"));
                }
                if a != 0.0 {
                    entries.push((p, q, a));
                }
            }
        }
        Ok(CurvatureOperator { n, pairs, entries })
    }

    /// Operator with the block structure of this module.
    pub fn from_blocks(b: &BlockValues, n: usize) -> Self {
        let pairs = Self::pair_basis(n);
        let index = |i: usize, j: usize| pairs.iter().position(|&p| p == (i, j)).unwrap();
        let mut entries = Vec::new();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let v = match (i, j) {
                (0, 1) => b.l12,
                (0, _) => b.l13,
                (1, _) => b.l23,
                _ => b.l3,
            };
            if v != 0.0 {
                entries.push((p, p, v));
            }
            if i == 0 && j >= 2 && b.ltilde != 0.0 {
                let q = index(1, j);
                entries.push((p, q, b.ltilde));
                entries.push((q, p, b.ltilde));
            }
        }
        CurvatureOperator { n, pairs, entries }
    }

    /// Constant sectional curvature `kappa`.
    pub fn constant_curvature(n: usize, kappa: f64) -> Self {
        let m = DMatrix::identity(n * (n - 1) / 2, n * (n - 1) / 2) * kappa;
        Self::from_matrix(n, &m).expect("square")
    }

    /// Riemannian product of two constant-curvature factors.
    pub fn product(n1: usize, k1: f64, n2: usize, k2: f64) -> Self {
        let n = n1 + n2;
        let pairs = Self::pair_basis(n);
        let entries = pairs
            .iter()
            .enumerate()
            .filter_map(|(p, &(i, j))| {
                let v = if j < n1 {
                    k1
                } else if i >= n1 {
                    k2
                } else {
                    0.0
                };
                (v != 0.0).then_some((p, p, v))
            })
            .collect();
        CurvatureOperator { n, pairs, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// The Jacobi form `w ↦ ⟨R(v₀∧w), v₀∧w⟩` as an `n×n` matrix.
    pub fn jacobi_form(&self, v0: &[f64]) -> Result<DMatrix<f64>> {
        if v0.len() != self.n {
            return Err(LabError::DimensionMismatch {
                expected: self.n,
                found: v0.len(),
            });
        }
        // (v₀∧w)_{ij} = v₀ᵢ wⱼ − v₀ⱼ wᵢ, linear in w with two non-zeros
        let mut q = DMatrix::zeros(self.n, self.n);
        for &(p, r, a) in &self.entries {
            let (i, j) = self.pairs[p];
            let (k, l) = self.pairs[r];
            let lp = [(j, v0[i]), (i, -v0[j])];
            let lr = [(l, v0[k]), (k, -v0[l])];
            for &(x, cx) in &lp {
                for &(y, cy) in &lr {
                    q[(x, y)] += a * cx * cy;
                }
            }
        }
        Ok(q)
    }

    /// `Σᵢ ⟨R(v₀∧vᵢ), v₀∧vᵢ⟩` for explicit legs.
    pub fn chain_value(&self, base: &[f64], legs: &[Vec<f64>]) -> Result<f64> {
        let q = self.jacobi_form(base)?;
        let mut s = 0.0;
        for w in legs {
            let w = DVector::from_column_slice(w);
            s += (w.transpose() * &q * &w)[(0, 0)];
        }
        Ok(s)
    }
}

/// Orthonormal basis of `v^⊥` (columns), via a Householder reflection.
fn complement_basis(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let mut u = v.clone();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += sign * v.norm();
    let uu = u.norm_squared();
    let h = DMatrix::identity(n, n) - (&u * u.transpose()) * (2.0 / uu);
    h.columns(1, n - 1).into_owned()
}

/// Exact minimum over legs at a fixed base: the sum of the `k` smallest
/// eigenvalues of the Jacobi form on `v₀^⊥`, with the minimizing legs.
pub fn ky_fan_at(
    op: &CurvatureOperator,
    v0: &[f64],
    k: usize,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = op.dim();
    if k == 0 || k >= n {
        return Err(LabError::invalid("k", format!("need 1 ≤ k ≤ {}", n - 1)));
    }
    let v = DVector::from_column_slice(v0);
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(LabError::invalid("v0", "base vector must be non-zero"));
    }
    let v = v / norm;
    let q = op.jacobi_form(v.as_slice())?;
    let p = complement_basis(&v);
    let restricted = p.transpose() * q * &p;
    let eig = SymmetricEigen::new(restricted);
    let mut order: Vec<usize> = (0..n - 1).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sum = order[..k].iter().map(|&i| eig.eigenvalues[i]).sum();
    let legs = order[..k]
        .iter()
        .map(|&i| (&p * eig.eigenvectors.column(i)).as_slice().to_vec())
        .collect();
    Ok((sum, legs))
}

/// Sampling and refinement controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    /// Random base directions on the full sphere.
    pub samples: usize,
    /// Deterministic quasi-uniform directions on the reduced sphere.
    pub grid: usize,
    pub refine: bool,
    pub seed: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            samples: 64,
            grid: 400,
            refine: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RickMin {
    pub min_value: f64,
    pub base: Vec<f64>,
    pub legs: Vec<Vec<f64>>,
    pub evaluations: usize,
}

fn gaussian_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if s > 1e-8 {
                break v.into_iter().map(|x| x / s).collect();
            }
        })
        .collect()
}

/// Quasi-uniform points on `S²` (golden-angle spiral).
fn spiral_points(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), r * th.sin(), z]
        })
        .collect()
}

/// Nelder–Mead on `f(x/|x|)` starting from `x0`.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, iters: usize) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = d + 1;
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[d].1 - simplex[0].1;
        if spread.abs() <= 1e-15 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let worst = simplex[d].0.clone();
        let reflected = lerp(&centroid, &worst, -1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst, -2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[d].1 {
                lerp(&centroid, &worst, -0.5)
            } else {
                lerp(&centroid, &worst, 0.5)
            };
            let fc = f(&contracted);
            evals += 1;
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = lerp(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, evals)
}

fn normalized(x: &[f64]) -> Vec<f64> {
    let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter().map(|v| v / s).collect()
}

/// Minimizes the Ky Fan objective over base directions `lift(y)`, starting
/// from the given candidates; returns the best base and its value.
fn minimize_bases<L>(
    op: &CurvatureOperator,
    k: usize,
    candidates: &[Vec<f64>],
    lift: L,
    refine: bool,
) -> Result<RickMin>
where
    L: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let objective = |y: &[f64]| -> f64 {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return f64::INFINITY;
        }
        ky_fan_at(op, &lift(y), k).map_or(f64::INFINITY, |r| r.0)
    };
    let values: Vec<f64> = candidates.par_iter().map(|y| objective(y)).collect();
    let mut evaluations = values.len();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut best_y = candidates[order[0]].clone();
    let mut best = values[order[0]];
    if refine {
        let starts: Vec<usize> = order.iter().take(4).copied().collect();
        let runs: Vec<(Vec<f64>, f64, usize)> = starts
            .par_iter()
            .map(|&i| {
                let mut y = normalized(&candidates[i]);
                let mut fy = values[i];
                let mut ev = 0;
                let mut step = 0.1;
                for _ in 0..4 {
                    let (ny, nf, e) = nelder_mead(&objective, &y, step, 400);
                    ev += e;
                    if nf <= fy {
                        y = normalized(&ny);
                        fy = nf;
                    }
                    step *= 0.1;
                }
                (y, fy, ev)
            })
            .collect();
        for (y, fy, e) in runs {
            evaluations += e;
            if fy < best {
                best = fy;
                best_y = y;
            }
        }
    }
    let base = normalized(&lift(&best_y));
    let (value, legs) = ky_fan_at(op, &base, k)?;
    Ok(RickMin {
        min_value: value,
        base,
        legs,
        evaluations,
    })
}

/// Minimum over sampled unit bases of the `k` smallest Jacobi eigenvalues.
/// `Ric_k > 0` on the sampled set iff the returned value is positive.
pub fn generic_rick_min(
    op: &CurvatureOperator,
    k: usize,
    opts: &SamplingOptions,
) -> Result<RickMin> {
    let n = op.dim();
    if k == 0 || k >= n {
        return Err(LabError::invalid("k", format!("need 1 ≤ k ≤ {}", n - 1)));
    }
    let mut candidates = gaussian_directions(n, opts.samples.max(1), opts.seed);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        candidates.push(e);
    }
    minimize_bases(op, k, &candidates, |y| y.to_vec(), opts.refine)
}

/// Sampling oracle for block operators.
///
/// The operator is invariant under `O(V₃)`, so every base is equivalent to
/// one in `span(e₁, e₂, e₃)`; that sphere is covered by a deterministic
/// spiral grid. Random full-dimensional bases are sampled as well. The
/// per-base minimum over legs is exact (Ky Fan).
pub fn chain_sampling_oracle(op: &BlockOperator, opts: &SamplingOptions) -> Result<ChainVerdict> {
    if opts.samples == 0 && opts.grid == 0 {
        return Err(LabError::invalid("samples", "need at least one sample"));
    }
    let n = op.n;
    let cop = CurvatureOperator::from_blocks(&op.blocks, n);
    // full-dimensional random bases are folded onto the reduced sphere
    let mut candidates: Vec<Vec<f64>> = spiral_points(opts.grid)
        .into_iter()
        .map(|p| p.to_vec())
        .collect();
    for v in gaussian_directions(n, opts.samples, opts.seed) {
        let tail = v[2..].iter().map(|x| x * x).sum::<f64>().sqrt();
        candidates.push(vec![v[0], v[1], tail]);
    }
    let lift = |y: &[f64]| {
        let mut v = vec![0.0; n];
        v[..3].copy_from_slice(&y[..3]);
        v
    };
    let best = minimize_bases(&cop, op.k, &candidates, lift, opts.refine)?;
    let value = cop.chain_value(&best.base, &best.legs)?;
    let scale = op.blocks.scale();
    let positive = value > TAU * scale;
    Ok(ChainVerdict {
        status: if positive {
            ChainStatus::SampledPositive
        } else {
            ChainStatus::CertifiedNotPositive
        },
        basis: VerdictBasis::Sampling,
        n,
        k: op.k,
        failing_inequality: None,
        margins: None,
        witness: (!positive).then(|| Witness {
            base: best.base.clone(),
            legs: best.legs.clone(),
            value,
        }),
        min_value: Some(value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn op(b: (f64, f64, f64, f64, f64), n: usize, k: usize) -> BlockOperator {
        BlockOperator::new(BlockValues::new(b.0, b.1, b.2, b.3, b.4), n, k).unwrap()
    }

    #[test]
    fn isotropic_blocks_pass() {
        let v = check_inequalities(&op((1.0, 1.0, 1.0, 0.0, 1.0), 7, 2));
        assert_eq!(v.status, ChainStatus::CertifiedPositive);
        assert!(v.failing_inequality.is_none());
    }

    #[test]
    fn mixed_block_violation_is_caught_by_iii() {
        let v = check_inequalities(&op((1.0, 1.0, 1.0, 1.1, 1.0), 8, 3));
        assert_eq!(v.status, ChainStatus::CertifiedNotPositive);
        assert_eq!(v.failing_inequality, Some(Inequality::III));
        assert_relative_eq!(v.margins.unwrap().iii, 1.0 - 1.21, epsilon = 1e-14);
        let w = v.witness.unwrap();
        let cop = CurvatureOperator::from_blocks(&BlockValues::new(1.0, 1.0, 1.0, 1.1, 1.0), 8);
        assert_relative_eq!(cop.chain_value(&w.base, &w.legs).unwrap(), w.value, epsilon = 1e-12);
        assert!(w.value < 0.0);
    }

    #[test]
    fn failure_outside_equivalence_range() {
        let v = check_inequalities(&op((-1.5, 1.0, 1.0, 0.0, 1.0), 6, 4));
        assert_eq!(v.status, ChainStatus::CertifiedPositive);
        // Ricci is positive although λ₁₃ < 0
        let v = check_inequalities(&op((1.0, -0.1, 1.0, 0.0, 1.0), 5, 4));
        assert_eq!(v.failing_inequality, Some(Inequality::III));
        assert_eq!(v.status, ChainStatus::Inconclusive);
        assert!(v.witness.is_none());
        let v = check_inequalities(&op((1.0, -1.0, 1.0, 0.0, 1.0), 6, 4));
        assert_eq!(v.status, ChainStatus::CertifiedNotPositive);
    }

    #[test]
    fn symmetric_mixed_block() {
        let p = diagonalize_mixed_block(&BlockValues::new(0.0, 2.0, 2.0, 0.5, 1.0));
        assert_relative_eq!(p.mu, 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.lambda13p, 2.5, epsilon = 1e-15);
        assert_relative_eq!(p.lambda23p, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_mixed_block_is_identity() {
        let b = BlockValues::new(0.3, -1.0, 2.0, 0.0, 1.0);
        let p = diagonalize_mixed_block(&b);
        assert!(p.mu.is_infinite());
        assert_eq!((p.lambda13p, p.lambda23p), (-1.0, 2.0));
        assert_eq!(p.frame(), ([1.0, 0.0], [0.0, 1.0]));
    }

    #[test]
    fn rotation_diagonalizes() {
        for &(l13, l23, lt) in &[(1.0, 3.0, 0.2), (3.0, 1.0, -0.7), (-2.0, 1e-9, 1e-7), (5.0, 5.0, -1.0)] {
            let p = diagonalize_mixed_block(&BlockValues::new(0.0, l13, l23, lt, 1.0));
            let r = p.rotated_block(l13, l23, lt);
            let scale = l13.abs().max(l23.abs()).max(lt.abs());
            assert!(r[0][1].abs() <= 1e-12 * scale, "{r:?}");
            assert_relative_eq!(r[0][0], p.lambda13p, epsilon = 1e-12 * scale);
            assert_relative_eq!(r[1][1], p.lambda23p, epsilon = 1e-12 * scale);
            assert!(p.lambda13p >= p.lambda23p);
        }
    }

    #[test]
    fn row_sum_examples() {
        let ones = PrimedEigenvalues {
            mu: f64::INFINITY,
            lambda12p: 1.0,
            lambda13p: 1.0,
            lambda23p: 1.0,
            lambda33p: 1.0,
        };
        assert!(row_sum_criterion(&ones, 9, 5).is_positive());
        let neg = PrimedEigenvalues {
            lambda12p: -1.0,
            ..ones
        };
        let v = row_sum_criterion(&neg, 6, 2);
        assert_eq!(v.status, ChainStatus::CertifiedNotPositive);
        assert_eq!(v.min_value, Some(0.0));
        let w = v.witness.unwrap();
        assert_eq!(w.base[0], 1.0);
    }

    #[test]
    fn jacobi_form_matches_sectional_curvature() {
        let cop = CurvatureOperator::product(2, 1.0, 2, 1.0);
        let q = cop.jacobi_form(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q[(1, 1)], 1.0);
        assert_eq!(q[(2, 2)], 0.0);
        assert_eq!(q[(0, 0)], 0.0);
    }

    #[test]
    fn sampling_isotropic_and_cylinder() {
        let opts = SamplingOptions::default();
        let v = chain_sampling_oracle(&op((1.0, 1.0, 1.0, 0.0, 1.0), 6, 2), &opts).unwrap();
        assert_eq!(v.status, ChainStatus::SampledPositive);
        assert_relative_eq!(v.min_value.unwrap(), 2.0, epsilon = 1e-9);
        let v = chain_sampling_oracle(&op((0.0, 0.0, 0.0, 0.0, 4.0), 5, 2), &opts).unwrap();
        assert_eq!(v.status, ChainStatus::CertifiedNotPositive);
        assert!(v.min_value.unwrap().abs() < 1e-12);
    }

    #[test]
    fn sampling_finds_mixed_violation() {
        let v = chain_sampling_oracle(&op((1.0, 1.0, 1.0, 1.1, 1.0), 8, 3), &SamplingOptions::default())
            .unwrap();
        assert_eq!(v.status, ChainStatus::CertifiedNotPositive);
        assert!(v.witness.unwrap().value <= 0.0);
    }

    #[test]
    fn round_sphere_and_product() {
        let opts = SamplingOptions::default();
        for k in 1..5 {
            let m = generic_rick_min(&CurvatureOperator::constant_curvature(5, 1.0), k, &opts).unwrap();
            assert_relative_eq!(m.min_value, k as f64, epsilon = 1e-10);
        }
        let m = generic_rick_min(&CurvatureOperator::product(2, 1.0, 2, 1.0), 2, &opts).unwrap();
        assert!(m.min_value.abs() < 1e-10);
        let m = generic_rick_min(&CurvatureOperator::product(2, 1.0, 2, 1.0), 3, &opts).unwrap();
        assert_relative_eq!(m.min_value, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn operator_argument_validation() {
        assert!(BlockOperator::new(BlockValues::new(1.0, 1.0, 1.0, 0.0, 1.0), 3, 2).is_err());
        assert!(BlockOperator::new(BlockValues::new(1.0, 1.0, 1.0, 0.0, 1.0), 6, 6).is_err());
        assert!(BlockOperator::new(BlockValues::new(1.0, 1.0, 1.0, 0.0, 1.0), 6, 1).is_err());
        let cop = CurvatureOperator::constant_curvature(4, 1.0);
        assert!(cop.jacobi_form(&[1.0, 0.0]).is_err());
    }
}
