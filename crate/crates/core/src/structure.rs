//! Exact integer checks on `(ρ_un^{⊗N})^{T_A}` for `ρ_un = I + Σ_{i<j} P(|ij⟩ − |ji⟩)`,
//! the λ = 1 member with its normalization dropped.
//!
//! Everything here is integer arithmetic over sparse symmetric matrices in
//! system-major order. The coefficient of `|x⟩⟨y|` in the expansion is the
//! matrix entry itself, so "multiplicity" is its absolute value.
//!
//! Only λ = 1 is built. A rational `λ = p/q` fits the same machinery after
//! scaling the single-copy matrix by `q` (entries `q·I + p·Σ…`).

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor_core::SystemShape;

/// Largest total dimension `d^(2N)` accepted for sparse expansions.
pub const DEFAULT_SPARSE_CAP: usize = 1 << 20;

/// Real symmetric integer matrix; zeros are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseIntOperator {
    shape: SystemShape,
    entries: BTreeMap<(usize, usize), i64>,
}

impl SparseIntOperator {
    pub fn new(shape: SystemShape, entries: BTreeMap<(usize, usize), i64>) -> Result<Self> {
        let dim = shape.dim();
        for (&(r, c), &v) in &entries {
            if r >= dim || c >= dim {
                return Err(Error::Shape(format!("entry ({r}, {c}) outside dimension {dim}")));
            }
            if v == 0 {
                return Err(Error::Validation(format!("stored zero at ({r}, {c})")));
            }
            if entries.get(&(c, r)) != Some(&v) {
                return Err(Error::Validation(format!("asymmetric entry at ({r}, {c})")));
            }
        }
        Ok(Self { shape, entries })
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.entries.get(&(row, col)).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn trace(&self) -> i64 {
        self.entries().filter(|(r, c, _)| r == c).map(|(_, _, v)| v).sum()
    }

    /// Sets one entry (and its mirror); used for negative controls.
    pub fn with_entry(&self, row: usize, col: usize, value: i64) -> Self {
        let mut entries = self.entries.clone();
        for key in [(row, col), (col, row)] {
            if value == 0 {
                entries.remove(&key);
            } else {
                entries.insert(key, value);
            }
        }
        Self { shape: self.shape, entries }
    }

    /// Writes `row col value` lines sorted by `(row, col)`.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (r, c, v) in self.entries() {
            writeln!(out, "{r} {c} {v}")?;
        }
        Ok(())
    }
}

/// `I + Σ_{i<j} (|ij⟩ − |ji⟩)(⟨ij| − ⟨ji|)` on one copy.
pub fn werner_unnorm_sparse(d: usize) -> Result<SparseIntOperator> {
    let shape = SystemShape::new(d, 1)?;
    let mut entries = BTreeMap::new();
    for i in 0..d {
        for j in 0..d {
            let x = i * d + j;
            entries.insert((x, x), if i == j { 1 } else { 2 });
            if i != j {
                entries.insert((x, j * d + i), -1);
            }
        }
    }
    SparseIntOperator::new(shape, entries)
}

fn kron_system_major(x: &SparseIntOperator, y: &SparseIntOperator) -> Result<SparseIntOperator> {
    let shape = x.shape.join(&y.shape)?;
    let (kx, ky) = (x.shape.local_dim(), y.shape.local_dim());
    let k = shape.local_dim();
    let split = |i: usize, kk: usize| (i / kk, i % kk);
    let mut entries = BTreeMap::new();
    for (r1, c1, v1) in x.entries() {
        let ((ra1, rb1), (ca1, cb1)) = (split(r1, kx), split(c1, kx));
        for (r2, c2, v2) in y.entries() {
            let ((ra2, rb2), (ca2, cb2)) = (split(r2, ky), split(c2, ky));
            let row = (ra1 * ky + ra2) * k + rb1 * ky + rb2;
            let col = (ca1 * ky + ca2) * k + cb1 * ky + cb2;
            let value = v1
                .checked_mul(v2)
                .ok_or_else(|| Error::Domain("integer overflow in tensor product".into()))?;
            entries.insert((row, col), value);
        }
    }
    Ok(SparseIntOperator { shape, entries })
}

/// `X^{⊗N}` in system-major order.
pub fn sparse_power(x: &SparseIntOperator, copies: usize, cap: usize) -> Result<SparseIntOperator> {
    if copies == 0 {
        return Err(Error::Domain("tensor power needs at least one copy".into()));
    }
    let shape = SystemShape::new(x.shape.d(), x.shape.n() * copies)?;
    if shape.dim() > cap {
        return Err(Error::Capacity { dim: shape.dim(), cap });
    }
    let mut acc = x.clone();
    for _ in 1..copies {
        acc = kron_system_major(&acc, x)?;
    }
    Ok(acc)
}

/// Partial transpose over the full A index.
pub fn sparse_pt(x: &SparseIntOperator) -> SparseIntOperator {
    let k = x.shape.local_dim();
    let entries = x
        .entries()
        .map(|(r, c, v)| {
            let ((a, b), (a2, b2)) = ((r / k, r % k), (c / k, c % k));
            ((a2 * k + b, a * k + b2), v)
        })
        .collect();
    SparseIntOperator { shape: x.shape, entries }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Histogram {
    /// `|entry|` → number of off-diagonal entries with that magnitude.
    pub counts: BTreeMap<u64, usize>,
    pub max: u64,
}

pub fn multiplicity_histogram(x: &SparseIntOperator) -> Histogram {
    let mut counts = BTreeMap::new();
    for (_, _, v) in x.entries().filter(|(r, c, _)| r != c) {
        *counts.entry(v.unsigned_abs()).or_insert(0) += 1;
    }
    let max = counts.keys().next_back().copied().unwrap_or(0);
    Histogram { counts, max }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MinorViolation {
    pub row: usize,
    pub col: usize,
    pub entry: i64,
    pub diag_row: i64,
    pub diag_col: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MinorCheck {
    /// Unordered off-diagonal pairs inspected.
    pub pairs: usize,
    /// Pairs with `X[x,x]·X[y,y] = X[x,y]²`.
    pub equality_pairs: usize,
    pub violations: Vec<MinorViolation>,
}

impl MinorCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `X[x,x]·X[y,y] ≥ X[x,y]²` for every nonzero off-diagonal `(x, y)`, i.e.
/// every such 2×2 principal block is positive semidefinite.
pub fn minor_check(x: &SparseIntOperator) -> MinorCheck {
    let mut check = MinorCheck { pairs: 0, equality_pairs: 0, violations: Vec::new() };
    for (r, c, v) in x.entries().filter(|(r, c, _)| r < c) {
        check.pairs += 1;
        let (dr, dc) = (x.get(r, r), x.get(c, c));
        let det = dr as i128 * dc as i128 - v as i128 * v as i128;
        // a 2×2 block is PSD iff both diagonals and the determinant are >= 0
        if det < 0 || dr < 0 || dc < 0 {
            check.violations.push(MinorViolation { row: r, col: c, entry: v, diag_row: dr, diag_col: dc });
        } else if det == 0 {
            check.equality_pairs += 1;
        }
    }
    check
}

pub const BASIS_STATEMENT: &str = "non-negative quadratic form on computational-basis-supported \
rank-2 states: every 2x2 principal block on an off-diagonal pair of the partial transpose is PSD";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub d: usize,
    pub copies: usize,
    pub lambda: f64,
    pub nnz: usize,
    pub trace: i64,
    pub histogram_before_pt: Histogram,
    pub histogram_after_pt: Histogram,
    /// `2^{N−1}`.
    pub claimed_max_multiplicity: u64,
    pub multiplicity_claim_holds: bool,
    pub minors: MinorCheck,
    pub minors_pass: bool,
    pub statement: &'static str,
}

pub struct StructureArtifacts {
    pub power: SparseIntOperator,
    pub pt: SparseIntOperator,
    pub report: StructureReport,
}

/// Builds `ρ_un^{⊗N}` and its partial transpose and runs every check.
pub fn structure_artifacts(d: usize, copies: usize, cap: usize) -> Result<StructureArtifacts> {
    let single = werner_unnorm_sparse(d)?;
    let power = sparse_power(&single, copies, cap)?;
    let pt = sparse_pt(&power);
    let before = multiplicity_histogram(&power);
    let after = multiplicity_histogram(&pt);
    let claimed = 1u64 << (copies - 1);
    let minors = minor_check(&pt);
    let report = StructureReport {
        d,
        copies,
        lambda: 1.0,
        nnz: power.nnz(),
        trace: power.trace(),
        multiplicity_claim_holds: before.max <= claimed,
        histogram_before_pt: before,
        histogram_after_pt: after,
        claimed_max_multiplicity: claimed,
        minors_pass: minors.passed(),
        minors,
        statement: BASIS_STATEMENT,
    };
    Ok(StructureArtifacts { power, pt, report })
}

pub fn structure_report(d: usize, copies: usize) -> Result<StructureReport> {
    Ok(structure_artifacts(d, copies, DEFAULT_SPARSE_CAP)?.report)
}
