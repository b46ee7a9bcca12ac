//! Dense complex linear algebra with A|B tensor-structure bookkeeping.
//!
//! Multi-copy objects live on `(H_A ⊗ H_B)^{⊗n}` and are always stored in
//! system-major order: the basis index of `|a₁…aₙ⟩_A |b₁…bₙ⟩_B` is
//! `a · d^n + b` with `a` and `b` read as radix-`d` numbers, most significant
//! copy first. Under that ordering the A|B cut is a plain reshape, which is
//! what makes [`schmidt_decompose`] and [`partial_transpose_a`] cheap.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest total dimension for which dense matrices are materialized.
pub const DEFAULT_DENSE_CAP: usize = 4096;
/// Relative tolerance on `max |X − X†|` for Hermitian operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative tolerance on eigen residuals `‖Xv − λv‖`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;
/// Tolerance on the norm of state vectors.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Local dimension `d` and copy count `n` of `(H_A ⊗ H_B)^{⊗n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SystemShape {
    d: usize,
    n: usize,
}

impl SystemShape {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("local dimension must be >= 2, got {d}")));
        }
        if n < 1 {
            return Err(Error::Domain("copy count must be >= 1".into()));
        }
        let total = u32::try_from(2 * n)
            .ok()
            .and_then(|e| d.checked_pow(e))
            .ok_or_else(|| Error::Domain(format!("dimension {d}^(2·{n}) overflows")))?;
        debug_assert!(total >= 4);
        Ok(Self { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `d^n`, the dimension of either side of the A|B cut.
    pub fn local_dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// `d^(2n)`.
    pub fn dim(&self) -> usize {
        self.local_dim() * self.local_dim()
    }

    /// Shape of the tensor product of an object of this shape with one of
    /// `other`.
    pub fn join(&self, other: &SystemShape) -> Result<SystemShape> {
        if self.d != other.d {
            return Err(Error::Shape(format!(
                "cannot join local dimensions {} and {}",
                self.d, other.d
            )));
        }
        SystemShape::new(self.d, self.n + other.n)
    }

    /// Index of the basis vector `|a⟩_A |b⟩_B`.
    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.local_dim() + b
    }

    /// Stride of copy `j`'s A digit and B digit inside a system-major index.
    fn copy_strides(&self, j: usize) -> (usize, usize) {
        let sb = self.d.pow((self.n - 1 - j) as u32);
        (sb * self.local_dim(), sb)
    }
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(Error::Capacity { dim, cap })
    } else {
        Ok(())
    }
}

/// Kronecker product with a dimension cap.
pub trait Kron: Sized {
    fn kron(&self, other: &Self, cap: usize) -> Result<Self>;
}

impl Kron for CMatrix {
    fn kron(&self, other: &Self, cap: usize) -> Result<Self> {
        let rows = self
            .nrows()
            .checked_mul(other.nrows())
            .ok_or(Error::Capacity { dim: usize::MAX, cap })?;
        check_cap(rows, cap)?;
        check_cap(self.ncols() * other.ncols(), cap)?;
        Ok(self.kronecker(other))
    }
}

impl Kron for CVector {
    fn kron(&self, other: &Self, cap: usize) -> Result<Self> {
        let len = self
            .len()
            .checked_mul(other.len())
            .ok_or(Error::Capacity { dim: usize::MAX, cap })?;
        check_cap(len, cap)?;
        Ok(self.kronecker(other))
    }
}

/// A permutation of the radix-`d` digits of a basis index.
///
/// Digit position 0 is the most significant. Output digit `p` is read from
/// input digit `source[p]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitPermutation {
    d: usize,
    source: Vec<usize>,
}

impl DigitPermutation {
    pub fn new(d: usize, source: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; source.len()];
        for &s in &source {
            if s >= source.len() || seen[s] {
                return Err(Error::Domain(format!("{source:?} is not a permutation")));
            }
            seen[s] = true;
        }
        Ok(Self { d, source })
    }

    /// `(A₁B₁)(A₂B₂)…(AₙBₙ)` → `(A₁…Aₙ)(B₁…Bₙ)`.
    pub fn system_major(shape: SystemShape) -> Self {
        let n = shape.n();
        let source = (0..2 * n)
            .map(|p| if p < n { 2 * p } else { 2 * (p - n) + 1 })
            .collect();
        Self { d: shape.d(), source }
    }

    /// Reorders `(A B)(A′ B′)` into `(A A′)(B B′)` where the first factor is
    /// system-major over `left` copies and the second over `right` copies.
    pub fn join_system_major(d: usize, left: usize, right: usize) -> Self {
        let mut source = Vec::with_capacity(2 * (left + right));
        source.extend(0..left);
        source.extend(2 * left..2 * left + right);
        source.extend(left..2 * left);
        source.extend(2 * left + right..2 * (left + right));
        Self { d, source }
    }

    pub fn inverse(&self) -> Self {
        let mut source = vec![0; self.source.len()];
        for (p, &s) in self.source.iter().enumerate() {
            source[s] = p;
        }
        Self { d: self.d, source }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Total dimension `d^len` acted on.
    pub fn dim(&self) -> usize {
        self.d.pow(self.source.len() as u32)
    }

    /// Maps an input index to its position in the output ordering.
    pub fn apply_index(&self, index: usize) -> usize {
        let len = self.source.len();
        let mut digits = vec![0; len];
        let mut rest = index;
        for p in (0..len).rev() {
            digits[p] = rest % self.d;
            rest /= self.d;
        }
        self.source.iter().fold(0, |acc, &s| acc * self.d + digits[s])
    }

    fn index_table(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.apply_index(i)).collect()
    }

    pub fn apply_vector(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.dim() {
            return Err(Error::Shape(format!(
                "vector of length {} under a permutation of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let mut out = CVector::zeros(v.len());
        for (i, &j) in self.index_table().iter().enumerate() {
            out[j] = v[i];
        }
        Ok(out)
    }

    pub fn apply_matrix(&self, m: &CMatrix) -> Result<CMatrix> {
        let dim = self.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Shape(format!(
                "{}×{} matrix under a permutation of dimension {dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        let table = self.index_table();
        let mut out = CMatrix::zeros(dim, dim);
        for c in 0..dim {
            for r in 0..dim {
                out[(table[r], table[c])] = m[(r, c)];
            }
        }
        Ok(out)
    }
}

/// Re-indexes a vector built copy by copy as `(A₁B₁)⊗(A₂B₂)⊗…` into
/// system-major order.
pub fn regroup_system_major_vector(v: &CVector, shape: SystemShape) -> Result<CVector> {
    DigitPermutation::system_major(shape).apply_vector(v)
}

/// Matrix counterpart of [`regroup_system_major_vector`].
pub fn regroup_system_major_matrix(m: &CMatrix, shape: SystemShape) -> Result<CMatrix> {
    DigitPermutation::system_major(shape).apply_matrix(m)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |m[x,y] − conj(m[y,x])|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..m.ncols() {
        for r in 0..=c.min(m.nrows().saturating_sub(1)) {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{}×{} matrix is not square", m.nrows(), m.ncols())));
    }
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL * max_abs(m) {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(())
}

/// A Hermitian operator on `(H_A ⊗ H_B)^{⊗n}` in system-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    shape: SystemShape,
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(shape: SystemShape, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != shape.dim() || matrix.ncols() != shape.dim() {
            return Err(Error::Shape(format!(
                "{}×{} matrix for a system of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                shape.dim()
            )));
        }
        check_hermitian(&matrix)?;
        Ok(Self { shape, matrix })
    }

    /// Skips validation; callers guarantee Hermiticity by construction.
    pub(crate) fn from_parts(shape: SystemShape, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), shape.dim());
        Self { shape, matrix }
    }

    pub fn identity(shape: SystemShape) -> Self {
        Self::from_parts(shape, CMatrix::identity(shape.dim(), shape.dim()))
    }

    /// `|v⟩⟨v|`, not normalized.
    pub fn outer(v: &StateVectorRaw<'_>) -> Self {
        let m = v.amplitudes * v.amplitudes.adjoint();
        Self::from_parts(v.shape, m)
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(self.shape, self.matrix.map(|z| z * factor))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape("operands of different shapes".into()));
        }
        Ok(Self::from_parts(self.shape, &self.matrix + &other.matrix))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    /// Tensor product across copies, regrouped to system-major order.
    pub fn tensor(&self, other: &Self, cap: usize) -> Result<Self> {
        let shape = self.shape.join(&other.shape)?;
        check_cap(shape.dim(), cap)?;
        let raw = self.matrix.kron(&other.matrix, cap)?;
        let perm = DigitPermutation::join_system_major(shape.d(), self.shape.n(), other.shape.n());
        Ok(Self::from_parts(shape, perm.apply_matrix(&raw)?))
    }

    pub fn tensor_power(&self, copies: usize, cap: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::Domain("tensor power needs at least one copy".into()));
        }
        let shape = SystemShape::new(self.shape.d(), self.shape.n() * copies)?;
        check_cap(shape.dim(), cap)?;
        let mut acc = self.clone();
        for _ in 1..copies {
            acc = acc.tensor(self, cap)?;
        }
        Ok(acc)
    }

    /// `X v` for an arbitrary vector of matching length.
    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }
}

/// Borrowed view of an amplitude vector with its shape; used where the vector
/// need not be normalized.
#[derive(Clone, Copy, Debug)]
pub struct StateVectorRaw<'a> {
    pub shape: SystemShape,
    pub amplitudes: &'a CVector,
}

/// A unit vector in `(H_A ⊗ H_B)^{⊗n}`, system-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    shape: SystemShape,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(shape: SystemShape, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != shape.dim() {
            return Err(Error::Shape(format!(
                "{} amplitudes for a system of dimension {}",
                amplitudes.len(),
                shape.dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!("state has norm {norm}")));
        }
        Ok(Self { shape, amplitudes })
    }

    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn normalized(shape: SystemShape, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Validation("cannot normalize a zero vector".into()));
        }
        Self::new(shape, amplitudes.unscale(norm))
    }

    pub fn basis(shape: SystemShape, index: usize) -> Result<Self> {
        if index >= shape.dim() {
            return Err(Error::Shape(format!("basis index {index} out of range")));
        }
        let mut v = CVector::zeros(shape.dim());
        v[index] = ONE;
        Ok(Self { shape, amplitudes: v })
    }

    /// `|a⟩_A |b⟩_B` from the full A and B indices.
    pub fn product_basis(shape: SystemShape, a: usize, b: usize) -> Result<Self> {
        if a >= shape.local_dim() || b >= shape.local_dim() {
            return Err(Error::Shape(format!("local index ({a}, {b}) out of range")));
        }
        Self::basis(shape, shape.index(a, b))
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn raw(&self) -> StateVectorRaw<'_> {
        StateVectorRaw { shape: self.shape, amplitudes: &self.amplitudes }
    }

    /// Tensor product across copies, regrouped to system-major order.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let shape = self.shape.join(&other.shape)?;
        let raw = self.amplitudes.kronecker(&other.amplitudes);
        let perm = DigitPermutation::join_system_major(shape.d(), self.shape.n(), other.shape.n());
        Ok(Self { shape, amplitudes: perm.apply_vector(&raw)? })
    }

    /// The amplitudes as a `d^n × d^n` coefficient matrix `M[a, b]`.
    pub fn coefficient_matrix(&self) -> CMatrix {
        let k = self.shape.local_dim();
        CMatrix::from_fn(k, k, |a, b| self.amplitudes[a * k + b])
    }
}

/// Entry-wise partial transpose on the full n-copy A index:
/// `X[(a,b),(a′,b′)] ↦ X[(a′,b),(a,b′)]`.
pub fn partial_transpose_a(x: &HermitianOperator) -> HermitianOperator {
    let k = x.shape.local_dim();
    let m = &x.matrix;
    let out = CMatrix::from_fn(x.dim(), x.dim(), |r, c| {
        let (a, b) = (r / k, r % k);
        let (a2, b2) = (c / k, c % k);
        m[(a2 * k + b, a * k + b2)]
    });
    HermitianOperator::from_parts(x.shape, out)
}

#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` belongs to `values[i]`.
    pub vectors: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen_matrix(m: &CMatrix) -> Result<Eigen> {
    check_hermitian(m)?;
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

pub fn hermitian_eigen(x: &HermitianOperator) -> Result<Eigen> {
    hermitian_eigen_matrix(&x.matrix)
}

/// Schmidt decomposition across the A|B cut.
#[derive(Clone, Debug)]
pub struct Schmidt {
    /// Descending; length `d^n`.
    pub values: Vec<f64>,
    /// Column `i` is the A-side Schmidt vector of `values[i]`.
    pub a_vectors: CMatrix,
    /// Column `i` is the B-side Schmidt vector of `values[i]`.
    pub b_vectors: CMatrix,
}

impl Schmidt {
    /// Number of Schmidt coefficients above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.values.iter().filter(|&&s| s > tol).count()
    }

    /// `Σ σᵢ aᵢ ⊗ bᵢ` in system-major order.
    pub fn reconstruct(&self) -> CVector {
        let k = self.a_vectors.nrows();
        let mut out = CVector::zeros(k * k);
        for (i, &s) in self.values.iter().enumerate() {
            for a in 0..k {
                let left = self.a_vectors[(a, i)] * s;
                for b in 0..k {
                    out[a * k + b] += left * self.b_vectors[(b, i)];
                }
            }
        }
        out
    }
}

pub fn schmidt_decompose(psi: &StateVector) -> Schmidt {
    schmidt_of_matrix(&psi.coefficient_matrix())
}

pub(crate) fn schmidt_of_matrix(m: &CMatrix) -> Schmidt {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    Schmidt {
        values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        a_vectors: CMatrix::from_fn(u.nrows(), r, |a, c| u[(a, order[c])]),
        b_vectors: CMatrix::from_fn(v_t.ncols(), r, |b, c| v_t[(order[c], b)]),
    }
}

/// `⟨v|X|v⟩` for a vector of any norm; the imaginary part is returned too.
pub(crate) fn quadratic_form(x: &CMatrix, v: &CVector) -> C64 {
    v.dotc(&(x * v))
}

fn imag_tolerance(scale: f64) -> f64 {
    1e-10 * scale.max(1.0)
}

/// Real part of `⟨ψ|X|ψ⟩`; a non-negligible imaginary part is an error.
pub fn expectation(x: &HermitianOperator, psi: &StateVector) -> Result<f64> {
    if x.shape != psi.shape {
        return Err(Error::Shape(format!(
            "operator shape {:?} vs state shape {:?}",
            x.shape, psi.shape
        )));
    }
    let value = quadratic_form(&x.matrix, &psi.amplitudes);
    if value.im.abs() > imag_tolerance(max_abs(&x.matrix)) {
        return Err(Error::Validation(format!(
            "expectation has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// `e = Σ_{i<d} |ii⟩` on a single copy, unnormalized (`⟨e|e⟩ = d`).
pub fn max_entangled_unnorm(d: usize) -> CVector {
    let mut e = CVector::zeros(d * d);
    for i in 0..d {
        e[i * d + i] = ONE;
    }
    e
}

fn validate_subset(shape: SystemShape, subset: &[usize]) -> Result<()> {
    let mut seen = vec![false; shape.n()];
    for &j in subset {
        if j >= shape.n() {
            return Err(Error::Shape(format!(
                "copy index {j} out of range for {} copies",
                shape.n()
            )));
        }
        if seen[j] {
            return Err(Error::Domain(format!("copy index {j} repeated")));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Applies `|e⟩⟨e|` on the `(A_j, B_j)` pair of copy `j`.
fn apply_pplus_copy(shape: SystemShape, j: usize, v: &CVector) -> CVector {
    let d = shape.d();
    let (sa, sb) = shape.copy_strides(j);
    let step = sa + sb;
    let mut out = CVector::zeros(v.len());
    for base in 0..v.len() {
        if (base / sa) % d != 0 || (base / sb) % d != 0 {
            continue;
        }
        let sum: C64 = (0..d).map(|k| v[base + k * step]).sum();
        if sum != ZERO {
            for i in 0..d {
                out[base + i * step] = sum;
            }
        }
    }
    out
}

/// `P⁺_T v` where `P⁺_T` is `|e⟩⟨e|` on every copy `j ∈ T` (0-based) and the
/// identity elsewhere. Never materializes the `D × D` operator.
pub fn apply_pplus_subset_raw(shape: SystemShape, v: &CVector, subset: &[usize]) -> Result<CVector> {
    if v.len() != shape.dim() {
        return Err(Error::Shape(format!(
            "vector of length {} for dimension {}",
            v.len(),
            shape.dim()
        )));
    }
    validate_subset(shape, subset)?;
    let mut acc = v.clone();
    for &j in subset {
        acc = apply_pplus_copy(shape, j, &acc);
    }
    Ok(acc)
}

pub fn apply_pplus_subset(psi: &StateVector, subset: &[usize]) -> Result<CVector> {
    apply_pplus_subset_raw(psi.shape, &psi.amplitudes, subset)
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(d: usize, n: usize) -> SystemShape {
        SystemShape::new(d, n).unwrap()
    }

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&x| c(x))))
    }

    #[test]
    fn shape_rejects_bad_parameters() {
        assert!(SystemShape::new(1, 1).is_err());
        assert!(SystemShape::new(3, 0).is_err());
        assert!(SystemShape::new(3, 60).is_err());
        let s = shape(3, 2);
        assert_eq!((s.local_dim(), s.dim()), (9, 81));
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(i2.kron(&i2, DEFAULT_DENSE_CAP).unwrap(), CMatrix::identity(4, 4));
        let k = diag(&[1.0, 2.0]).kron(&i2, DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(k, diag(&[1.0, 1.0, 2.0, 2.0]));
    }

    #[test]
    fn kron_basis_vectors() {
        let zero = CVector::from_vec(vec![c(1.0), c(0.0)]);
        let one = CVector::from_vec(vec![c(0.0), c(1.0)]);
        let v = zero.kron(&one, DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(v, CVector::from_vec(vec![c(0.0), c(1.0), c(0.0), c(0.0)]));
    }

    #[test]
    fn kron_respects_cap() {
        let m = CMatrix::identity(81, 81);
        let err = m.kron(&m, DEFAULT_DENSE_CAP).unwrap_err();
        assert_eq!(err, Error::Capacity { dim: 6561, cap: DEFAULT_DENSE_CAP });
    }

    #[test]
    fn regroup_single_copy_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_state(&mut rng, shape(3, 1));
        let out = regroup_system_major_vector(v.amplitudes(), shape(3, 1)).unwrap();
        assert_eq!(&out, v.amplitudes());
    }

    #[test]
    fn regroup_moves_digits() {
        // |a1 b1 a2 b2> -> |a1 a2 b1 b2>
        let perm = DigitPermutation::system_major(shape(2, 2));
        assert_eq!(perm.apply_index(0b0100), 0b0010);
        assert_eq!(perm.apply_index(0b0010), 0b0100);
        assert_eq!(perm.apply_index(0b0110), 0b0110);
        assert_eq!(perm.apply_index(0b1101), 0b1011);
        let mut v = CVector::zeros(16);
        v[0b0100] = c(1.0);
        let out = regroup_system_major_vector(&v, shape(2, 2)).unwrap();
        assert_eq!(out[0b0010], c(1.0));
        assert_eq!(out.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn regroup_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=3 {
            let s = shape(3, n);
            let perm = DigitPermutation::system_major(s);
            let v = gaussian_matrix(&mut rng, s.dim(), 1).column(0).into_owned();
            let back = perm.inverse().apply_vector(&perm.apply_vector(&v).unwrap()).unwrap();
            assert!((back - &v).camax() <= 1e-15);
        }
    }

    #[test]
    fn regroup_rejects_wrong_dimension() {
        let v = CVector::zeros(10);
        assert!(matches!(
            regroup_system_major_vector(&v, shape(3, 1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn tensor_of_states_matches_manual_index() {
        let s1 = shape(3, 1);
        let x = StateVector::product_basis(s1, 1, 2).unwrap();
        let y = StateVector::product_basis(s1, 0, 1).unwrap();
        let xy = x.tensor(&y).unwrap();
        // system-major: a = (1, 0), b = (2, 1)
        let expected = shape(3, 2).index(3, 2 * 3 + 1);
        assert_eq!(xy.amplitudes()[expected], c(1.0));
    }

    fn antisym_sum_d3() -> CMatrix {
        let d = 3;
        let mut m = CMatrix::zeros(9, 9);
        for i in 0..d {
            for j in i + 1..d {
                let mut v = CVector::zeros(9);
                v[i * d + j] = c(1.0);
                v[j * d + i] = c(-1.0);
                m += &v * v.adjoint();
            }
        }
        m
    }

    #[test]
    fn partial_transpose_of_antisym_sum_matches_index_loop() {
        let d = 3;
        let x = HermitianOperator::new(shape(3, 1), antisym_sum_d3()).unwrap();
        let pt = partial_transpose_a(&x);
        // independent four-index oracle
        for a in 0..d {
            for b in 0..d {
                for a2 in 0..d {
                    for b2 in 0..d {
                        let expected = x.matrix()[(a2 * d + b, a * d + b2)];
                        assert_eq!(pt.matrix()[(a * d + b, a2 * d + b2)], expected);
                    }
                }
            }
        }
        // Σ_{i<j} P(|ij⟩−|ji⟩) = I − F with F the swap; PT(F) = |e⟩⟨e|.
        let e = max_entangled_unnorm(d);
        let expected = CMatrix::identity(9, 9) - &e * e.adjoint();
        assert!(max_abs(&(pt.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn partial_transpose_identity_and_involution() {
        let id = HermitianOperator::identity(shape(3, 2));
        assert_eq!(partial_transpose_a(&id), id);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let s = shape(3, 1 + trial % 2);
            let x = HermitianOperator::new(s, random_hermitian(&mut rng, s.dim())).unwrap();
            let pt = partial_transpose_a(&x);
            assert!((pt.trace() - x.trace()).abs() <= 1e-12);
            assert!(hermiticity_defect(pt.matrix()) <= 1e-12);
            assert!(partial_transpose_a(&pt).max_abs_diff(&x) <= 1e-12);
        }
    }

    #[test]
    fn eigen_diagonal_sorted() {
        let eig = hermitian_eigen_matrix(&diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(eig.values.len(), 3);
        for (got, want) in eig.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_of_rank_one_projector() {
        let e = max_entangled_unnorm(3);
        let eig = hermitian_eigen_matrix(&(&e * e.adjoint())).unwrap();
        for v in &eig.values[..8] {
            assert!(v.abs() < 1e-12);
        }
        assert!((eig.values[8] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_hermitian(&mut rng, 27);
        let eig = hermitian_eigen_matrix(&m).unwrap();
        let scale = m.norm();
        for (i, &lambda) in eig.values.iter().enumerate() {
            let v = eig.vectors.column(i);
            let r = &m * v - v * c(lambda);
            assert!(r.norm() <= EIGEN_RESIDUAL_TOL * scale);
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(hermitian_eigen_matrix(&m), Err(Error::Validation(_))));
        assert!(HermitianOperator::new(shape(2, 1), CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn schmidt_fixtures() {
        let s = shape(3, 1);
        let prod = StateVector::product_basis(s, 0, 0).unwrap();
        let sch = schmidt_decompose(&prod);
        assert!((sch.values[0] - 1.0).abs() < 1e-15);
        assert!(sch.values[1..].iter().all(|&x| x.abs() < 1e-15));

        let sch = schmidt_decompose(&phi(3));
        let h = 0.5f64.sqrt();
        assert!((sch.values[0] - h).abs() < 1e-15 && (sch.values[1] - h).abs() < 1e-15);
        assert_eq!(sch.rank(1e-12), 2);

        let mut v = CVector::zeros(9);
        v[0] = c(2.0);
        v[4] = c(1.0);
        let psi = StateVector::normalized(s, v).unwrap();
        let sch = schmidt_decompose(&psi);
        assert!((sch.values[0] - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((sch.values[1] - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn schmidt_reconstructs_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=2 {
            let psi = random_state(&mut rng, shape(3, n));
            let sch = schmidt_decompose(&psi);
            let total: f64 = sch.values.iter().map(|s| s * s).sum();
            assert!((total - 1.0).abs() <= 1e-12);
            assert!((sch.reconstruct() - psi.amplitudes()).camax() <= 1e-12);
        }
    }

    #[test]
    fn expectation_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = shape(3, 1);
        let psi = random_state(&mut rng, s);
        let id = HermitianOperator::identity(s);
        assert!((expectation(&id, &psi).unwrap() - 1.0).abs() < 1e-12);

        let e = max_entangled_unnorm(3);
        let pplus = HermitianOperator::new(s, &e * e.adjoint()).unwrap();
        assert!((expectation(&pplus, &phi(3)).unwrap() - 2.0).abs() < 1e-12);

        let wrong = HermitianOperator::identity(shape(3, 2));
        assert!(matches!(expectation(&wrong, &psi), Err(Error::Shape(_))));
    }

    #[test]
    fn pplus_subset_fixtures() {
        let psi = phi(3);
        assert_eq!(&apply_pplus_subset(&psi, &[]).unwrap(), psi.amplitudes());
        let out = apply_pplus_subset(&psi, &[0]).unwrap();
        assert!((psi.amplitudes().dotc(&out).re - 2.0).abs() < 1e-12);

        let s1 = shape(3, 1);
        let star = StateVector::product_basis(s1, 0, 0).unwrap().tensor(&psi).unwrap();
        let out = apply_pplus_subset(&star, &[0, 1]).unwrap();
        assert!((star.amplitudes().dotc(&out).re - 2.0).abs() < 1e-12);

        assert!(matches!(apply_pplus_subset(&star, &[2]), Err(Error::Shape(_))));
        assert!(apply_pplus_subset(&star, &[1, 1]).is_err());
    }

    /// Dense `P⁺_T` from per-copy factors via kron + regroup.
    fn dense_pplus_subset(s: SystemShape, subset: &[usize]) -> CMatrix {
        let d = s.d();
        let e = max_entangled_unnorm(d);
        let p = &e * e.adjoint();
        let id = CMatrix::identity(d * d, d * d);
        let mut raw = CMatrix::identity(1, 1);
        for j in 0..s.n() {
            let factor = if subset.contains(&j) { &p } else { &id };
            raw = raw.kron(factor, usize::MAX).unwrap();
        }
        regroup_system_major_matrix(&raw, s).unwrap()
    }

    #[test]
    fn pplus_subset_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let n = 1 + trial % 3;
            let s = shape(3, n);
            let psi = random_state(&mut rng, s);
            let subset: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            let fast = apply_pplus_subset(&psi, &subset).unwrap();
            let dense = dense_pplus_subset(s, &subset) * psi.amplitudes();
            assert!((fast - dense).camax() <= 1e-12, "trial {trial} subset {subset:?}");
        }
    }

    #[test]
    fn tensor_operator_matches_regrouped_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s1 = shape(2, 1);
        let x = HermitianOperator::new(s1, random_hermitian(&mut rng, 4)).unwrap();
        let y = HermitianOperator::new(s1, random_hermitian(&mut rng, 4)).unwrap();
        let xy = x.tensor(&y, DEFAULT_DENSE_CAP).unwrap();
        let manual = regroup_system_major_matrix(
            &x.matrix().kron(y.matrix(), DEFAULT_DENSE_CAP).unwrap(),
            shape(2, 2),
        )
        .unwrap();
        assert_eq!(xy.matrix(), &manual);
        // (X⊗Y)(u⊗v) = Xu ⊗ Yv
        let u = random_state(&mut rng, s1);
        let v = random_state(&mut rng, s1);
        let lhs = xy.apply(u.tensor(&v).unwrap().amplitudes());
        let xu = StateVector { shape: s1, amplitudes: x.apply(u.amplitudes()) };
        let yv = StateVector { shape: s1, amplitudes: y.apply(v.amplitudes()) };
        let rhs = xu.tensor(&yv).unwrap();
        assert!((lhs - rhs.amplitudes()).camax() < 1e-12);
    }
}
