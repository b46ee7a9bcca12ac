//! The antisymmetric Werner family
//!
//! ```text
//! ρ(λ) = [I + λ Σ_{i<j} P(|ij⟩ − |ji⟩)] / N,   N = d (d + λ (d − 1))
//! ```
//!
//! with `P(|v⟩) = |v⟩⟨v|` unnormalized, its partial transpose
//! `[(1 + λ) I − λ P⁺] / N`, and the spectra of tensor powers of the latter.

use serde::Serialize;

use crate::bounds::binom;
use crate::error::{Error, Result};
use crate::tensor_core::{max_entangled_unnorm, CMatrix, CVector, HermitianOperator, SystemShape, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WernerParams {
    d: usize,
    lambda: f64,
}

impl WernerParams {
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("local dimension must be >= 2, got {d}")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(Self { d, lambda })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `N = d (d + λ (d − 1))`.
    pub fn normalizer(&self) -> f64 {
        let d = self.d as f64;
        d * (d + self.lambda * (d - 1.0))
    }

    /// `1/(d − 1) < λ ≤ 1`.
    pub fn in_conjecture_range(&self) -> bool {
        self.lambda > 1.0 / (self.d as f64 - 1.0) && self.lambda <= 1.0
    }

    /// The conjecture concerns `d ≥ 3`; `d = 2` is allowed as a control.
    pub fn below_conjecture_dimension(&self) -> bool {
        self.d < 3
    }

    /// `(1 + λ)/N`, multiplicity `d² − 1`.
    pub fn pt_upper_eigenvalue(&self) -> f64 {
        (1.0 + self.lambda) / self.normalizer()
    }

    /// `(1 + λ − λd)/N`, multiplicity 1.
    pub fn pt_lower_eigenvalue(&self) -> f64 {
        (1.0 + self.lambda - self.lambda * self.d as f64) / self.normalizer()
    }

    /// Report flags for the parameter choice itself.
    pub fn flags(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if !self.in_conjecture_range() {
            flags.push("outside_conjecture_range");
        }
        if self.below_conjecture_dimension() {
            flags.push("dimension_below_conjecture");
        }
        flags
    }

    fn single_shape(&self) -> SystemShape {
        SystemShape::new(self.d, 1).expect("d >= 2 checked at construction")
    }
}

/// `Σ_{i<j} (|ij⟩ − |ji⟩)(⟨ij| − ⟨ji|)`.
pub fn antisym_sum(d: usize) -> Result<HermitianOperator> {
    let shape = SystemShape::new(d, 1)?;
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in i + 1..d {
            let mut v = CVector::zeros(d * d);
            v[i * d + j] = C64::new(1.0, 0.0);
            v[j * d + i] = C64::new(-1.0, 0.0);
            m += &v * v.adjoint();
        }
    }
    HermitianOperator::new(shape, m)
}

/// `P⁺ = |e⟩⟨e|` with `e = Σ_i |ii⟩`.
pub fn pplus_unnorm(d: usize) -> Result<HermitianOperator> {
    let shape = SystemShape::new(d, 1)?;
    let e = max_entangled_unnorm(d);
    HermitianOperator::new(shape, &e * e.adjoint())
}

/// The density matrix ρ(λ).
pub fn werner_state(params: WernerParams) -> HermitianOperator {
    let shape = params.single_shape();
    let sum = antisym_sum(params.d).expect("d >= 2");
    HermitianOperator::identity(shape)
        .add(&sum.scaled(params.lambda))
        .expect("same shape")
        .scaled(1.0 / params.normalizer())
}

/// Closed-form partial transpose `[(1 + λ) I − λ P⁺] / N`.
pub fn werner_pt(params: WernerParams) -> HermitianOperator {
    let shape = params.single_shape();
    let pplus = pplus_unnorm(params.d).expect("d >= 2");
    HermitianOperator::identity(shape)
        .scaled(1.0 + params.lambda)
        .add(&pplus.scaled(-params.lambda))
        .expect("same shape")
        .scaled(1.0 / params.normalizer())
}

/// `(ρ^{⊗n})^{T_A} = (ρ^{T_A})^{⊗n}`, system-major.
pub fn composite_pt(params: WernerParams, n: usize, cap: usize) -> Result<HermitianOperator> {
    werner_pt(params).tensor_power(n, cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralLine {
    pub value: f64,
    pub multiplicity: u128,
    /// Number of copies contributing the lower eigenvalue.
    pub lower_factors: usize,
}

/// Spectrum of `(ρ^{T_A})^{⊗n}` from products of the two single-copy
/// eigenvalues, one line per count `k` of lower factors.
pub fn pt_spectrum_analytic(params: WernerParams, n: usize) -> Result<Vec<SpectralLine>> {
    if n == 0 {
        return Err(Error::Domain("copy count must be >= 1".into()));
    }
    let upper = params.pt_upper_eigenvalue();
    let lower = params.pt_lower_eigenvalue();
    let degeneracy = (params.d * params.d - 1) as u128;
    (0..=n)
        .map(|k| {
            let overflow = || Error::Domain(format!("multiplicity overflows for n = {n}"));
            let mult = u32::try_from(n - k)
                .ok()
                .and_then(|e| degeneracy.checked_pow(e))
                .and_then(|p| p.checked_mul(binom(n as u64, k as u64).ok()?))
                .ok_or_else(overflow)?;
            Ok(SpectralLine {
                value: upper.powi((n - k) as i32) * lower.powi(k as i32),
                multiplicity: mult,
                lower_factors: k,
            })
        })
        .collect()
}

/// Expands the analytic spectrum into a sorted list of eigenvalues.
pub fn expand_spectrum(lines: &[SpectralLine]) -> Vec<f64> {
    let mut values: Vec<f64> = lines
        .iter()
        .flat_map(|l| std::iter::repeat_n(l.value, l.multiplicity as usize))
        .collect();
    values.sort_by(f64::total_cmp);
    values
}
