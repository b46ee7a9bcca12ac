//! Numerical workbench for the distillability of the antisymmetric Werner
//! family ρ(λ) in d⊗d.
//!
//! The crate is split along the experiments it supports:
//!
//! - [`tensor_core`]: dense complex linear algebra with explicit A|B
//!   bookkeeping (Kronecker products, system-major regrouping, partial
//!   transpose, eigen and Schmidt decompositions, matrix-free P⁺ action).
//! - [`werner`]: the state family, its closed-form partial transpose and
//!   analytic spectra of tensor powers.
//! - [`rank2_opt`]: seesaw optimization of quadratic forms over Schmidt-rank-2
//!   states and the distillation witness search built on it.
//! - [`bounds`]: subset-sum bounds on ⟨P⁺⟩ for rank-2 states and the
//!   inequalities derived from them.
//! - [`structure`]: exact integer sparse checks of the partial-transposed
//!   tensor powers.
//! - [`cli_report`]: run configuration, dispatch and report emission used by
//!   the `nptbench` binary.
//!
//! Throughout, `P(|v⟩)` denotes the *unnormalized* outer product `|v⟩⟨v|`, and
//! multi-copy objects are stored in system-major order
//! `(a₁…aₙ, b₁…bₙ)`.

pub mod bounds;
pub mod cli_report;
pub mod error;
pub mod rank2_opt;
pub mod structure;
pub mod tensor_core;
pub mod werner;

pub use error::{Error, Result};
