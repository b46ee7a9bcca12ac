//! Optimization of `⟨ψ|W|ψ⟩` over states of Schmidt rank at most two.
//!
//! Every such state lies in some `A₂ ⊗ B₂` with `A₂ ⊆ H_A`, `B₂ ⊆ H_B` two
//! dimensional, and any vector of `A₂ ⊗ H_B` (or `H_A ⊗ B₂`) has Schmidt rank
//! at most two. The seesaw therefore alternates between the two compressions
//! and solves an exact eigenproblem on each, so the objective is monotone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tensor_core::{
    expectation, hermitian_eigen_matrix, schmidt_decompose, CMatrix, CVector, HermitianOperator,
    StateVector, SystemShape, C64, DEFAULT_DENSE_CAP,
};
use crate::werner::{composite_pt, WernerParams};

/// Orthonormality tolerance on the two frames.
pub const FRAME_TOL: f64 = 1e-12;
/// Largest admissible third Schmidt coefficient of an expanded state.
pub const RANK_TOL: f64 = 1e-10;
/// `best_value` below this is reported as a distillation witness.
pub const WITNESS_THRESHOLD: f64 = -1e-8;

/// A quadratic form that the seesaw can compress onto `A₂ ⊗ H_B` and
/// `H_A ⊗ B₂`.
pub trait Observable: Sync {
    fn shape(&self) -> SystemShape;

    fn apply(&self, v: &CVector) -> CVector;

    /// Dimension of the materialized matrix, if any; checked against the
    /// dense cap.
    fn dense_dim(&self) -> Option<usize> {
        None
    }

    /// `V† W V` for `V = a_frame ⊗ I_B`, columns ordered `(r, b) ↦ r·d^n + b`.
    fn compress_a(&self, a_frame: &CMatrix) -> CMatrix {
        let k = self.shape().local_dim();
        let cols: Vec<CVector> = (0..2 * k)
            .map(|col| {
                let (r, b) = (col / k, col % k);
                let mut v = CVector::zeros(k * k);
                for a in 0..k {
                    v[a * k + b] = a_frame[(a, r)];
                }
                v
            })
            .collect();
        gram(self, &cols)
    }

    /// `V† W V` for `V = I_A ⊗ b_frame`, columns ordered `(a, s) ↦ 2a + s`.
    fn compress_b(&self, b_frame: &CMatrix) -> CMatrix {
        let k = self.shape().local_dim();
        let cols: Vec<CVector> = (0..2 * k)
            .map(|col| {
                let (a, s) = (col / 2, col % 2);
                let mut v = CVector::zeros(k * k);
                for b in 0..k {
                    v[a * k + b] = b_frame[(b, s)];
                }
                v
            })
            .collect();
        gram(self, &cols)
    }
}

fn gram<O: Observable + ?Sized>(w: &O, cols: &[CVector]) -> CMatrix {
    let images: Vec<CVector> = cols.iter().map(|v| w.apply(v)).collect();
    CMatrix::from_fn(cols.len(), cols.len(), |r, c| cols[r].dotc(&images[c]))
}

impl Observable for HermitianOperator {
    fn shape(&self) -> SystemShape {
        HermitianOperator::shape(self)
    }

    fn apply(&self, v: &CVector) -> CVector {
        HermitianOperator::apply(self, v)
    }

    fn dense_dim(&self) -> Option<usize> {
        Some(self.dim())
    }

    fn compress_a(&self, a_frame: &CMatrix) -> CMatrix {
        let k = self.shape().local_dim();
        let w = self.matrix();
        let dim = k * k;
        let mut wv = CMatrix::zeros(dim, 2 * k);
        for r in 0..2 {
            for b in 0..k {
                let mut col = wv.column_mut(r * k + b);
                for a in 0..k {
                    col.axpy(a_frame[(a, r)], &w.column(a * k + b), C64::new(1.0, 0.0));
                }
            }
        }
        CMatrix::from_fn(2 * k, 2 * k, |row, c| {
            let (r, b) = (row / k, row % k);
            (0..k).map(|a| a_frame[(a, r)].conj() * wv[(a * k + b, c)]).sum()
        })
    }

    fn compress_b(&self, b_frame: &CMatrix) -> CMatrix {
        let k = self.shape().local_dim();
        let w = self.matrix();
        let dim = k * k;
        let mut wv = CMatrix::zeros(dim, 2 * k);
        for a in 0..k {
            for s in 0..2 {
                let mut col = wv.column_mut(2 * a + s);
                for b in 0..k {
                    col.axpy(b_frame[(b, s)], &w.column(a * k + b), C64::new(1.0, 0.0));
                }
            }
        }
        CMatrix::from_fn(2 * k, 2 * k, |row, c| {
            let (a, s) = (row / 2, row % 2);
            (0..k).map(|b| b_frame[(b, s)].conj() * wv[(a * k + b, c)]).sum()
        })
    }
}

/// `Σ coeff[r,s] a_r ⊗ b_s` with orthonormal 2-frames `a_r`, `b_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank2State {
    shape: SystemShape,
    a_frame: CMatrix,
    b_frame: CMatrix,
    coeff: CMatrix,
}

fn frame_defect(frame: &CMatrix) -> f64 {
    let g = frame.adjoint() * frame - CMatrix::identity(2, 2);
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Orthonormal basis `q₀, q₁` of a space containing `v₀, v₁`, together with
/// `R[r, s] = ⟨q_r|v_s⟩`. A degenerate span is completed with the first
/// standard basis vectors that are independent of it.
fn orthonormal_span(v0: &CVector, v1: &CVector) -> (CMatrix, CMatrix) {
    let dim = v0.len();
    let scale = v0.norm().max(v1.norm()).max(f64::MIN_POSITIVE);
    let mut kept: Vec<CVector> = Vec::with_capacity(2);
    let candidates = [v0.clone(), v1.clone()];
    let basis = (0..dim).map(|i| {
        let mut e = CVector::zeros(dim);
        e[i] = C64::new(1.0, 0.0);
        e
    });
    for (i, cand) in candidates.into_iter().chain(basis).enumerate() {
        if kept.len() == 2 {
            break;
        }
        let reference = if i < 2 { scale } else { 1.0 };
        let mut r = cand;
        for _ in 0..2 {
            for q in &kept {
                let proj = q.dotc(&r);
                r -= q * proj;
            }
        }
        let norm = r.norm();
        if norm > 1e-10 * reference {
            kept.push(r.unscale(norm));
        }
    }
    let frame = CMatrix::from_columns(&kept);
    let coeff = CMatrix::from_fn(2, 2, |r, s| {
        let v = if s == 0 { v0 } else { v1 };
        kept[r].dotc(v)
    });
    (frame, coeff)
}

impl Rank2State {
    pub fn new(shape: SystemShape, a_frame: CMatrix, b_frame: CMatrix, coeff: CMatrix) -> Result<Self> {
        let k = shape.local_dim();
        if a_frame.shape() != (k, 2) || b_frame.shape() != (k, 2) || coeff.shape() != (2, 2) {
            return Err(Error::Shape(format!(
                "frames must be {k}×2 and coefficients 2×2"
            )));
        }
        for (name, frame) in [("A", &a_frame), ("B", &b_frame)] {
            let defect = frame_defect(frame);
            if defect > FRAME_TOL {
                return Err(Error::Validation(format!(
                    "{name} frame is not orthonormal (defect {defect:e})"
                )));
            }
        }
        let norm = coeff.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("coefficients have norm {norm}")));
        }
        Ok(Self { shape, a_frame, b_frame, coeff })
    }

    fn from_parts(shape: SystemShape, a_frame: CMatrix, b_frame: CMatrix, coeff: CMatrix) -> Self {
        let norm = coeff.norm();
        Self { shape, a_frame, b_frame, coeff: coeff.unscale(norm) }
    }

    /// Represents `psi` if its Schmidt rank is at most two.
    pub fn from_state(psi: &StateVector) -> Result<Self> {
        let schmidt = schmidt_decompose(psi);
        if schmidt.values.len() > 2 && schmidt.values[2] > RANK_TOL {
            return Err(Error::Validation(format!(
                "state has Schmidt rank above two (third coefficient {:e})",
                schmidt.values[2]
            )));
        }
        let k = psi.shape().local_dim();
        let a = CMatrix::from_fn(k, 2, |r, c| schmidt.a_vectors[(r, c)] * schmidt.values[c]);
        let b = CMatrix::from_fn(k, 2, |r, c| schmidt.b_vectors[(r, c)]);
        // ψ = Σ_s (σ_s a_s) ⊗ b_s; re-derive orthonormal frames from that.
        let (a_frame, r) = orthonormal_span(&a.column(0).into_owned(), &a.column(1).into_owned());
        let (b_frame, rb) = orthonormal_span(&b.column(0).into_owned(), &b.column(1).into_owned());
        // ψ = Σ_{r,s} R[r,s] q_r ⊗ b_s and b_s = Σ_t Rb[t,s] p_t
        let coeff = &r * rb.transpose();
        Rank2State::new(psi.shape(), a_frame, b_frame, coeff.unscale(coeff.norm()))
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn a_frame(&self) -> &CMatrix {
        &self.a_frame
    }

    pub fn b_frame(&self) -> &CMatrix {
        &self.b_frame
    }

    pub fn coeff(&self) -> &CMatrix {
        &self.coeff
    }

    pub fn frame_defects(&self) -> (f64, f64) {
        (frame_defect(&self.a_frame), frame_defect(&self.b_frame))
    }

    fn amplitudes(&self) -> CVector {
        let k = self.shape.local_dim();
        let m = &self.a_frame * &self.coeff * self.b_frame.transpose();
        CVector::from_fn(k * k, |i, _| m[(i / k, i % k)])
    }

    pub fn expand(&self) -> StateVector {
        StateVector::normalized(self.shape, self.amplitudes())
            .expect("orthonormal frames with unit coefficients")
    }
}

impl Serialize for Rank2State {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            d: usize,
            copies: usize,
            a_frame: Vec<Vec<[f64; 2]>>,
            b_frame: Vec<Vec<[f64; 2]>>,
            coeff: Vec<Vec<[f64; 2]>>,
        }
        fn rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
            m.row_iter()
                .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                .collect()
        }
        Repr {
            d: self.shape.d(),
            copies: self.shape.n(),
            a_frame: rows(&self.a_frame),
            b_frame: rows(&self.b_frame),
            coeff: rows(&self.coeff),
        }
        .serialize(serializer)
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

fn random_frame<R: Rng + ?Sized>(rng: &mut R, k: usize) -> CMatrix {
    loop {
        let g = gaussian_matrix(rng, k, 2);
        let (v0, v1) = (g.column(0).into_owned(), g.column(1).into_owned());
        let (frame, r) = orthonormal_span(&v0, &v1);
        // both draws must contribute; otherwise the frame was completed
        if r[(0, 0)].norm() > 1e-8 && r[(1, 1)].norm() > 1e-8 {
            return frame;
        }
    }
}

/// Frames from orthonormalized complex Gaussian matrices, coefficients from a
/// normalized complex Gaussian 4-vector.
pub fn sample_rank2<R: Rng + ?Sized>(shape: SystemShape, rng: &mut R) -> Rank2State {
    let k = shape.local_dim();
    let a_frame = random_frame(rng, k);
    let b_frame = random_frame(rng, k);
    let coeff = loop {
        let c = gaussian_matrix(rng, 2, 2);
        let norm = c.norm();
        if norm > 1e-12 {
            break c.unscale(norm);
        }
    };
    Rank2State { shape, a_frame, b_frame, coeff }
}

/// `⟨ψ|W|ψ⟩` for the expanded state.
pub fn rank2_value(w: &HermitianOperator, s: &Rank2State) -> Result<f64> {
    expectation(w, &s.expand())
}

/// [`rank2_value`] for any [`Observable`].
pub fn observable_value<O: Observable + ?Sized>(w: &O, s: &Rank2State) -> Result<f64> {
    if w.shape() != s.shape {
        return Err(Error::Shape(format!(
            "operator shape {:?} vs state shape {:?}",
            w.shape(),
            s.shape
        )));
    }
    let psi = s.amplitudes();
    Ok(psi.dotc(&w.apply(&psi)).re)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub value_tol: f64,
    pub seed: u64,
    pub direction: Direction,
    /// Keep the half-sweep objective sequence of every restart.
    pub record_trace: bool,
    pub dense_cap: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            restarts: 100,
            max_iter: 500,
            value_tol: 1e-10,
            seed: 42,
            direction: Direction::Minimize,
            record_trace: false,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Domain("restarts must be >= 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::Domain("max_iter must be >= 1".into()));
        }
        if !(self.value_tol > 0.0 && self.value_tol.is_finite()) {
            return Err(Error::Domain("value_tol must be positive".into()));
        }
        Ok(())
    }

    /// Independent generator for one restart: ChaCha stream `restart` under
    /// key `seed`.
    pub fn restart_rng(&self, restart: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(restart as u64);
        rng
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptReport {
    pub best_value: f64,
    pub best_restart: usize,
    pub best_state: Rank2State,
    pub seed: u64,
    pub direction: Direction,
    /// Final objective of each restart.
    pub restart_values: Vec<f64>,
    /// Full sweeps used by each restart.
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<Vec<f64>>>,
}

struct RestartResult {
    state: Rank2State,
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()).map(|z| z * 0.5)
}

/// Lowest eigenpair of `sign · m`.
fn extreme_eigenpair(m: CMatrix, sign: f64) -> Result<(f64, CVector)> {
    let signed = hermitize(m.map(|z| z * sign));
    let eig = hermitian_eigen_matrix(&signed)?;
    Ok((eig.values[0], eig.vectors.column(0).into_owned()))
}

fn b_half_step<O: Observable + ?Sized>(w: &O, s: &Rank2State, sign: f64) -> Result<(Rank2State, f64)> {
    let k = s.shape.local_dim();
    let (value, v) = extreme_eigenpair(w.compress_a(&s.a_frame), sign)?;
    let rows: Vec<CVector> = (0..2).map(|r| CVector::from_fn(k, |b, _| v[r * k + b])).collect();
    let (b_frame, r) = orthonormal_span(&rows[0], &rows[1]);
    // Σ_r a_r ⊗ c_r with c_r = Σ_s R[s,r] b_s
    let coeff = r.transpose();
    let next = Rank2State::from_parts(s.shape, s.a_frame.clone(), b_frame, coeff);
    Ok((next, value * sign))
}

fn a_half_step<O: Observable + ?Sized>(w: &O, s: &Rank2State, sign: f64) -> Result<(Rank2State, f64)> {
    let k = s.shape.local_dim();
    let (value, u) = extreme_eigenpair(w.compress_b(&s.b_frame), sign)?;
    let cols: Vec<CVector> = (0..2).map(|t| CVector::from_fn(k, |a, _| u[2 * a + t])).collect();
    let (a_frame, r) = orthonormal_span(&cols[0], &cols[1]);
    let next = Rank2State::from_parts(s.shape, a_frame, s.b_frame.clone(), r);
    Ok((next, value * sign))
}

fn run_restart<O: Observable + ?Sized>(w: &O, config: &OptConfig, restart: usize) -> Result<RestartResult> {
    let sign = config.direction.sign();
    let mut rng = config.restart_rng(restart);
    let mut state = sample_rank2(w.shape(), &mut rng);
    let mut value = observable_value(w, &state)?;
    let mut trace = vec![value];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        let previous = value;
        let (next, v) = b_half_step(w, &state, sign)?;
        trace.push(v);
        let (next, v) = a_half_step(w, &next, sign)?;
        trace.push(v);
        state = next;
        value = v;
        if (value - previous).abs() < config.value_tol {
            converged = true;
            break;
        }
    }
    let value = observable_value(w, &state)?;
    Ok(RestartResult { state, value, iterations, converged, trace })
}

/// Seesaw over Schmidt-rank-2 states with `config.restarts` seeded restarts.
///
/// Restarts run in parallel; each draws from its own stream, and the best
/// restart is chosen by value with ties going to the lowest index, so the
/// report does not depend on scheduling.
pub fn seesaw<O: Observable + ?Sized>(w: &O, config: &OptConfig) -> Result<OptReport> {
    config.validate()?;
    if let Some(dim) = w.dense_dim() {
        if dim > config.dense_cap {
            return Err(Error::Capacity { dim, cap: config.dense_cap });
        }
    }
    let results: Vec<RestartResult> = (0..config.restarts)
        .into_par_iter()
        .map(|i| run_restart(w, config, i))
        .collect::<Result<_>>()?;
    let sign = config.direction.sign();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if sign * r.value < sign * results[best].value {
            best = i;
        }
    }
    let restart_values = results.iter().map(|r| r.value).collect();
    let iterations = results.iter().map(|r| r.iterations).collect();
    let converged = results.iter().map(|r| r.converged).collect();
    let best_value = results[best].value;
    let best_state = results[best].state.clone();
    let traces = config
        .record_trace
        .then(|| results.into_iter().map(|r| r.trace).collect());
    Ok(OptReport {
        best_value,
        best_restart: best,
        best_state,
        seed: config.seed,
        direction: config.direction,
        restart_values,
        iterations,
        converged,
        traces,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "WITNESS_FOUND")]
    WitnessFound,
    /// Evidence only; local search cannot certify undistillability.
    #[serde(rename = "NO_WITNESS")]
    NoWitness,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistillOutcome {
    pub verdict: Verdict,
    pub copies: usize,
    pub threshold: f64,
    pub report: OptReport,
}

/// Minimizes `⟨ψ|(ρ(λ)^{⊗n})^{T_A}|ψ⟩` over rank-2 `ψ`; a value below
/// [`WITNESS_THRESHOLD`] witnesses n-copy distillability.
pub fn distill_search(params: WernerParams, copies: usize, config: &OptConfig) -> Result<DistillOutcome> {
    config.validate()?;
    let w = composite_pt(params, copies, config.dense_cap)?;
    let config = OptConfig { direction: Direction::Minimize, ..config.clone() };
    let report = seesaw(&w, &config)?;
    let verdict = if report.best_value < WITNESS_THRESHOLD {
        Verdict::WitnessFound
    } else {
        Verdict::NoWitness
    };
    Ok(DistillOutcome { verdict, copies, threshold: WITNESS_THRESHOLD, report })
}
