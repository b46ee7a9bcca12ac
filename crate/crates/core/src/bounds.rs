//! Subset-sum bounds on `⟨P⁺⟩` for Schmidt-rank-2 states.
//!
//! For a state on `n` copies, `S_m(ψ) = Σ_{|T| = m} ⟨ψ|P⁺_T|ψ⟩` where `P⁺_T`
//! acts as `|e⟩⟨e|` on the copies in `T` and as the identity elsewhere. The
//! conjectured bound is `S_m ≤ B(n, m) = 2·C(n−1, m−1) + C(n−1, m)`, and the
//! state `ψ* = |00⟩^{⊗(n−1)} ⊗ (|00⟩ + |11⟩)/√2` attains all of them at once.
//! Expanding `((1 + λ) I − λ P⁺)^{⊗n}` over subsets turns every Werner
//! expectation into a combination of the `S_m`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rank2_opt::{
    sample_rank2, seesaw, Direction, Observable, OptConfig, OptReport, Rank2State,
};
use crate::tensor_core::{
    apply_pplus_subset_raw, schmidt_decompose, CVector, HermitianOperator, StateVector,
    SystemShape, C64,
};
use crate::werner::{pplus_unnorm, WernerParams};

/// Slack allowed before a conjectured bound counts as violated.
pub const VIOLATION_TOL: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Exact binomial coefficient `C(n, r)`.
pub fn binom(n: u64, r: u64) -> Result<u128> {
    if r > n {
        return Err(Error::Domain(format!("C({n}, {r}) needs r <= n")));
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc · (n − i) / (i + 1) stays integral at every step
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Domain(format!("C({n}, {r}) overflows")))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

fn binom_or_zero(n: u64, r: u64) -> Result<u128> {
    if r > n {
        Ok(0)
    } else {
        binom(n, r)
    }
}

/// `B(n, 0) = 1`, `B(n, m) = 2·C(n−1, m−1) + C(n−1, m)`.
pub fn conjectured_bound(n: usize, m: usize) -> Result<u128> {
    if n < 1 || m > n {
        return Err(Error::Domain(format!("bound ({n}, {m}) needs 0 <= m <= n, n >= 1")));
    }
    if m == 0 {
        return Ok(1);
    }
    let (n, m) = (n as u64, m as u64);
    Ok(2 * binom(n - 1, m - 1)? + binom_or_zero(n - 1, m)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BoundSpec {
    pub n: usize,
    pub m: usize,
    pub conjectured: u128,
}

impl BoundSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Ok(Self { n, m, conjectured: conjectured_bound(n, m)? })
    }
}

/// `⟨ψ|P⁺_T|ψ⟩` for every subset `T`, indexed by bitmask (bit `j` ↔ copy `j`).
pub fn subset_overlaps(shape: SystemShape, psi: &CVector) -> Result<Vec<f64>> {
    let n = shape.n();
    let mut images: Vec<CVector> = Vec::with_capacity(1 << n);
    images.push(psi.clone());
    for mask in 1usize..1 << n {
        let j = mask.trailing_zeros() as usize;
        let image = apply_pplus_subset_raw(shape, &images[mask & (mask - 1)], &[j])?;
        images.push(image);
    }
    Ok(images.iter().map(|v| psi.dotc(v).re).collect())
}

fn sums_from_overlaps(n: usize, overlaps: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; n + 1];
    for (mask, value) in overlaps.iter().enumerate() {
        sums[mask.count_ones() as usize] += value;
    }
    sums
}

/// `[S_0, S_1, …, S_n]`.
pub fn subset_sums(psi: &StateVector) -> Result<Vec<f64>> {
    let overlaps = subset_overlaps(psi.shape(), psi.amplitudes())?;
    Ok(sums_from_overlaps(psi.shape().n(), &overlaps))
}

/// `S_m(ψ)`, computed matrix-free.
pub fn subset_sum(psi: &StateVector, m: usize) -> Result<f64> {
    let n = psi.shape().n();
    if m > n {
        return Err(Error::Domain(format!("weight {m} exceeds copy count {n}")));
    }
    Ok(subset_sums(psi)?[m])
}

/// The certified bound-attaining state `|00⟩^{⊗(n−1)} ⊗ (|00⟩ + |11⟩)/√2`.
pub fn attaining_state(d: usize, n: usize) -> Result<StateVector> {
    let single = SystemShape::new(d, 1)?;
    let zero = StateVector::product_basis(single, 0, 0)?;
    let mut phi = CVector::zeros(d * d);
    phi[0] = C64::new(1.0, 0.0);
    phi[d + 1] = C64::new(1.0, 0.0);
    let phi = StateVector::normalized(single, phi)?;
    let mut acc = if n == 1 { return Ok(phi) } else { zero.clone() };
    for _ in 1..n - 1 {
        acc = acc.tensor(&zero)?;
    }
    acc.tensor(&phi)
}

fn require_copies(psi: &StateVector, n: usize) -> Result<()> {
    if psi.shape().n() != n {
        return Err(Error::Shape(format!(
            "expected a {n}-copy state, got {} copies",
            psi.shape().n()
        )));
    }
    Ok(())
}

/// `S_1` of `|χφ⟩ ⊗ ψ′`, which cannot exceed 3 because ψ′ contributes at most
/// 2 and the product factor at most 1.
pub fn observation_check(product: &StateVector, other: &Rank2State) -> Result<f64> {
    require_copies(product, 1)?;
    if other.shape().n() != 1 || other.shape().d() != product.shape().d() {
        return Err(Error::Shape("second factor must be a single copy of the same d".into()));
    }
    let schmidt = schmidt_decompose(product);
    if schmidt.values[1] > 1e-10 {
        return Err(Error::Validation("first factor is not a product state".into()));
    }
    let combined = product.tensor(&other.expand())?;
    let s1 = subset_sum(&combined, 1)?;
    if s1 > 3.0 + 1e-9 {
        return Err(Error::Validation(format!("S_1 = {s1} exceeds 3")));
    }
    Ok(s1)
}

/// `⟨ψ|(kI − P⁺)⊗P⁺ + P⁺⊗(kI − P⁺)|ψ⟩ = k·S₁ − 2·S₂` on two copies.
pub fn assumption1_lhs(psi: &StateVector, k: f64) -> Result<f64> {
    require_copies(psi, 2)?;
    let s = subset_sums(psi)?;
    Ok(k * s[1] - 2.0 * s[2])
}

/// `max{2k, 3k − 4}` for `k > 2`.
pub fn assumption1_rhs(k: f64) -> Result<f64> {
    if !(k > 2.0) {
        return Err(Error::Domain(format!("k must exceed 2, got {k}")));
    }
    Ok((2.0 * k).max(3.0 * k - 4.0))
}

/// Dense `(kI − P⁺)⊗P⁺ + P⁺⊗(kI − P⁺)` on two copies.
pub fn assumption1_operator(d: usize, k: f64, cap: usize) -> Result<HermitianOperator> {
    let p = pplus_unnorm(d)?;
    let shifted = HermitianOperator::identity(p.shape()).scaled(k).add(&p.scaled(-1.0))?;
    shifted.tensor(&p, cap)?.add(&p.tensor(&shifted, cap)?)
}

/// `⟨ψ|(k/2 I − P⁺)^{⊗2}|ψ⟩ = k²/4 − (k/2)·S₁ + S₂` on two copies.
pub fn eq4_value(psi: &StateVector, k: f64) -> Result<f64> {
    require_copies(psi, 2)?;
    let s = subset_sums(psi)?;
    Ok(k * k / 4.0 - k / 2.0 * s[1] + s[2])
}

/// `k²/4 − max{2k, 3k − 4}/2`, the floor of [`eq4_value`] whenever
/// Assumption 1 holds for the state.
pub fn eq4_floor(k: f64) -> f64 {
    k * k / 4.0 - (2.0 * k).max(3.0 * k - 4.0) / 2.0
}

/// `k = 2(1 + λ)/λ`.
pub fn k_of_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(2.0 * (1.0 + lambda) / lambda)
}

/// `Σ_m (1 + λ)^{n−m} (−λ)^m · c_m`.
fn werner_combination(lambda: f64, n: usize, weights: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(m, w)| (1.0 + lambda).powi((n - m) as i32) * (-lambda).powi(m as i32) * w)
        .sum()
}

/// `⟨ψ|(ρ(λ)^{⊗n})^{T_A}|ψ⟩` from the subset sums of ψ.
pub fn composite_value(psi: &StateVector, params: WernerParams) -> Result<f64> {
    if psi.shape().d() != params.d() {
        return Err(Error::Shape(format!(
            "state has d = {}, parameters d = {}",
            psi.shape().d(),
            params.d()
        )));
    }
    let n = psi.shape().n();
    let sums = subset_sums(psi)?;
    Ok(werner_combination(params.lambda(), n, &sums) / params.normalizer().powi(n as i32))
}

/// [`composite_value`] with every `S_m` replaced by `B(n, m)`; equals
/// `(1 − λ)/N^n`.
pub fn optimal_set_value(params: WernerParams, n: usize) -> Result<f64> {
    let bounds: Vec<f64> = (0..=n)
        .map(|m| conjectured_bound(n, m).map(|b| b as f64))
        .collect::<Result<_>>()?;
    Ok(werner_combination(params.lambda(), n, &bounds) / params.normalizer().powi(n as i32))
}

fn subsets_of_weight(n: usize, m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0usize..1 << n)
        .filter(move |mask| mask.count_ones() as usize == m)
        .map(move |mask| (0..n).filter(|j| mask >> j & 1 == 1).collect())
}

/// Dense `Σ_{|T| = m} P⁺_T`, built from per-copy factors.
pub fn subset_sum_operator(shape: SystemShape, m: usize, cap: usize) -> Result<HermitianOperator> {
    if m > shape.n() {
        return Err(Error::Domain(format!("weight {m} exceeds copy count {}", shape.n())));
    }
    let single = SystemShape::new(shape.d(), 1)?;
    let p = pplus_unnorm(shape.d())?;
    let id = HermitianOperator::identity(single);
    let mut total: Option<HermitianOperator> = None;
    for subset in subsets_of_weight(shape.n(), m) {
        let factor = |j: usize| if subset.contains(&j) { &p } else { &id };
        let mut term = factor(0).clone();
        for j in 1..shape.n() {
            term = term.tensor(factor(j), cap)?;
        }
        total = Some(match total {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    Ok(total.expect("at least one subset"))
}

/// Matrix-free `Σ_{|T| = m} P⁺_T`.
#[derive(Clone, Debug)]
pub struct SubsetSumObservable {
    shape: SystemShape,
    subsets: Vec<Vec<usize>>,
}

impl SubsetSumObservable {
    pub fn new(shape: SystemShape, m: usize) -> Result<Self> {
        if m > shape.n() {
            return Err(Error::Domain(format!("weight {m} exceeds copy count {}", shape.n())));
        }
        Ok(Self { shape, subsets: subsets_of_weight(shape.n(), m).collect() })
    }
}

impl Observable for SubsetSumObservable {
    fn shape(&self) -> SystemShape {
        self.shape
    }

    fn apply(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        for subset in &self.subsets {
            out += apply_pplus_subset_raw(self.shape, v, subset).expect("validated subsets");
        }
        out
    }
}

const SAMPLE_CHUNK: usize = 1000;
const SAMPLE_STREAM_BASE: u64 = 1 << 63;

/// Largest `S_m` seen over `samples` random rank-2 states, for every `m`.
///
/// Chunks of samples draw from their own ChaCha streams (disjoint from the
/// optimizer's restart streams) so the result is schedule independent.
pub fn sample_sweep(shape: SystemShape, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let n = shape.n();
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let per_chunk: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(SAMPLE_STREAM_BASE + c as u64);
            let count = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            let mut best = vec![f64::NEG_INFINITY; n + 1];
            for _ in 0..count {
                let psi = sample_rank2(shape, &mut rng).expand();
                let overlaps = subset_overlaps(shape, psi.amplitudes())?;
                for (b, s) in best.iter_mut().zip(sums_from_overlaps(n, &overlaps)) {
                    *b = b.max(s);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok((0..=n)
        .map(|m| per_chunk.iter().map(|c| c[m]).fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub optimizer: OptConfig,
    pub samples: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { optimizer: OptConfig::default(), samples: DEFAULT_SAMPLES }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub violation: bool,
    pub d: usize,
    pub spec: BoundSpec,
    pub optimizer_max: f64,
    /// `dense` or `matrix_free`.
    pub optimizer_route: &'static str,
    pub sample_max: f64,
    pub samples: usize,
    pub attaining_value: f64,
    pub tolerance: f64,
    pub optimizer: OptReport,
}

/// Maximizes `S_m` over rank-2 states with the seesaw and with random
/// sampling, and compares both against `B(n, m)`.
pub fn bound_probe(n: usize, m: usize, d: usize, config: &ProbeConfig) -> Result<BoundReport> {
    let spec = BoundSpec::new(n, m)?;
    let shape = SystemShape::new(d, n)?;
    let opt = OptConfig { direction: Direction::Maximize, ..config.optimizer.clone() };
    let (optimizer, route) = if shape.dim() <= opt.dense_cap {
        (seesaw(&subset_sum_operator(shape, m, opt.dense_cap)?, &opt)?, "dense")
    } else {
        (seesaw(&SubsetSumObservable::new(shape, m)?, &opt)?, "matrix_free")
    };
    let sample_max = if config.samples > 0 {
        sample_sweep(shape, config.samples, opt.seed)?[m]
    } else {
        f64::NEG_INFINITY
    };
    let attaining_value = subset_sum(&attaining_state(d, n)?, m)?;
    let limit = spec.conjectured as f64 + VIOLATION_TOL;
    let violation = optimizer.best_value > limit || sample_max > limit;
    Ok(BoundReport {
        violation,
        d,
        spec,
        optimizer_max: optimizer.best_value,
        optimizer_route: route,
        sample_max,
        samples: config.samples,
        attaining_value,
        tolerance: VIOLATION_TOL,
        optimizer,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assumption1Report {
    pub violation: bool,
    pub d: usize,
    pub k: f64,
    pub rhs: f64,
    pub optimizer_max: f64,
    pub sample_max: f64,
    pub samples: usize,
    /// `3k − 4`, from the attaining state.
    pub attaining_value: f64,
    /// `2k`, from `Φ ⊗ |01⟩`.
    pub orthogonal_fixture_value: f64,
    pub tolerance: f64,
    pub optimizer: OptReport,
}

/// `Φ ⊗ |01⟩`: `S₁ = 2`, `S₂ = 0`.
pub fn orthogonal_fixture(d: usize) -> Result<StateVector> {
    let single = SystemShape::new(d, 1)?;
    let phi = attaining_state(d, 1)?;
    phi.tensor(&StateVector::product_basis(single, 0, 1)?)
}

/// Maximizes the left-hand side of Assumption 1 for fixed `k`.
pub fn assumption1_probe(d: usize, k: f64, config: &ProbeConfig) -> Result<Assumption1Report> {
    let rhs = assumption1_rhs(k)?;
    let opt = OptConfig { direction: Direction::Maximize, ..config.optimizer.clone() };
    let op = assumption1_operator(d, k, opt.dense_cap)?;
    let optimizer = seesaw(&op, &opt)?;
    let sample_max = if config.samples > 0 {
        let sums = |s: &[f64]| k * s[1] - 2.0 * s[2];
        let shape = SystemShape::new(d, 2)?;
        sample_sweep_map(shape, config.samples, opt.seed, sums)?
    } else {
        f64::NEG_INFINITY
    };
    let attaining_value = assumption1_lhs(&attaining_state(d, 2)?, k)?;
    let orthogonal_fixture_value = assumption1_lhs(&orthogonal_fixture(d)?, k)?;
    let limit = rhs + VIOLATION_TOL;
    Ok(Assumption1Report {
        violation: optimizer.best_value > limit || sample_max > limit,
        d,
        k,
        rhs,
        optimizer_max: optimizer.best_value,
        sample_max,
        samples: config.samples,
        attaining_value,
        orthogonal_fixture_value,
        tolerance: VIOLATION_TOL,
        optimizer,
    })
}

/// Largest value of `f(S_0, …, S_n)` over random rank-2 samples.
fn sample_sweep_map<F>(shape: SystemShape, samples: usize, seed: u64, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = shape.n();
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let maxima: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(SAMPLE_STREAM_BASE + c as u64);
            let count = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            let mut best = f64::NEG_INFINITY;
            for _ in 0..count {
                let psi = sample_rank2(shape, &mut rng).expand();
                let overlaps = subset_overlaps(shape, psi.amplitudes())?;
                best = best.max(f(&sums_from_overlaps(n, &overlaps)));
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(maxima.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank2_opt::Rank2State;
    use crate::tensor_core::test_util::*;
    use crate::tensor_core::{expectation, DEFAULT_DENSE_CAP};
    use crate::werner::composite_pt;

    /// Multiplicative formula from the definition, independent of [`binom`].
    fn binom_oracle(n: u64, r: u64) -> u128 {
        let num: u128 = (n - r + 1..=n).map(|x| x as u128).product();
        let den: u128 = (1..=r).map(|x| x as u128).product();
        num / den
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(4, 2).unwrap(), 6);
        assert_eq!(binom(7, 0).unwrap(), 1);
        assert_eq!(binom(5, 3).unwrap(), 10);
        assert!(binom(3, 4).is_err());
        for n in 0..20 {
            for r in 0..=n {
                assert_eq!(binom(n, r).unwrap(), binom_oracle(n, r));
            }
        }
        assert_eq!(binom(100, 50).unwrap(), 100891344545564193334812497256);
    }

    #[test]
    fn conjectured_bound_values() {
        assert_eq!(conjectured_bound(2, 1).unwrap(), 3);
        assert_eq!(conjectured_bound(3, 2).unwrap(), 5);
        assert_eq!(conjectured_bound(4, 0).unwrap(), 1);
        assert_eq!(conjectured_bound(2, 2).unwrap(), 2);
        assert!(conjectured_bound(2, 3).is_err());
        for n in 2..=10 {
            assert_eq!(conjectured_bound(n, 1).unwrap(), n as u128 + 1);
            // 2(C(n,m) − C(n−1,m)) + C(n−1,m) form
            for m in 1..=n {
                let (nn, mm) = (n as u64, m as u64);
                let alt = 2 * (binom_oracle(nn, mm) - binom_or_zero(nn - 1, mm).unwrap())
                    + binom_or_zero(nn - 1, mm).unwrap();
                assert_eq!(conjectured_bound(n, m).unwrap(), alt);
            }
        }
    }

    #[test]
    fn subset_sum_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state(&mut rng, SystemShape::new(3, 2).unwrap());
        assert!((subset_sum(&psi, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!(subset_sum(&psi, 3).is_err());

        let prod = StateVector::product_basis(SystemShape::new(3, 2).unwrap(), 0, 0).unwrap();
        assert!((subset_sum(&prod, 1).unwrap() - 2.0).abs() < 1e-14);
        assert!((subset_sum(&prod, 2).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn attaining_state_meets_every_bound() {
        for n in 2..=4 {
            let star = attaining_state(3, n).unwrap();
            assert!(Rank2State::from_state(&star).is_ok());
            let sums = subset_sums(&star).unwrap();
            for (m, s) in sums.iter().enumerate() {
                let b = conjectured_bound(n, m).unwrap() as f64;
                assert!((s - b).abs() <= 1e-12, "n={n} m={m}: {s} vs {b}");
            }
        }
    }

    #[test]
    fn subset_sum_matches_dense_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = SystemShape::new(3, 2).unwrap();
        for m in 0..=2 {
            let op = subset_sum_operator(shape, m, DEFAULT_DENSE_CAP).unwrap();
            let free = SubsetSumObservable::new(shape, m).unwrap();
            for _ in 0..5 {
                let psi = sample_rank2(shape, &mut rng).expand();
                let dense = expectation(&op, &psi).unwrap();
                assert!((dense - subset_sum(&psi, m).unwrap()).abs() < 1e-12);
                assert!((free.apply(psi.amplitudes()) - op.apply(psi.amplitudes())).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn observation_fixtures() {
        let single = SystemShape::new(3, 1).unwrap();
        let phi_state = Rank2State::from_state(&phi(3)).unwrap();
        let s00 = StateVector::product_basis(single, 0, 0).unwrap();
        let s01 = StateVector::product_basis(single, 0, 1).unwrap();
        let s11 = Rank2State::from_state(&StateVector::product_basis(single, 1, 1).unwrap()).unwrap();
        assert!((observation_check(&s00, &phi_state).unwrap() - 3.0).abs() < 1e-12);
        assert!((observation_check(&s01, &phi_state).unwrap() - 2.0).abs() < 1e-12);
        assert!((observation_check(&s00, &s11).unwrap() - 2.0).abs() < 1e-12);
        assert!(observation_check(&phi(3), &s11).is_err());
    }

    #[test]
    fn observation_holds_on_random_factors() {
        let single = SystemShape::new(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let chi = random_state(&mut rng, SystemShape::new(3, 1).unwrap());
            let sch = schmidt_decompose(&chi);
            // keep the leading product term only
            let a = sch.a_vectors.column(0);
            let b = sch.b_vectors.column(0);
            let prod = CVector::from_fn(9, |i, _| a[i / 3] * b[i % 3]);
            let prod = StateVector::normalized(single, prod).unwrap();
            let other = sample_rank2(single, &mut rng);
            assert!(observation_check(&prod, &other).unwrap() <= 3.0 + 1e-9);
        }
    }

    #[test]
    fn assumption1_expansion_matches_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = SystemShape::new(3, 2).unwrap();
        for k in [2.5, 3.0, 4.0, 5.0, 8.0] {
            let op = assumption1_operator(3, k, DEFAULT_DENSE_CAP).unwrap();
            for _ in 0..10 {
                let psi = sample_rank2(shape, &mut rng).expand();
                let dense = expectation(&op, &psi).unwrap();
                assert!((dense - assumption1_lhs(&psi, k).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn assumption1_fixtures() {
        let star = attaining_state(3, 2).unwrap();
        assert!((assumption1_lhs(&star, 5.0).unwrap() - 11.0).abs() < 1e-12);
        assert!((assumption1_lhs(&orthogonal_fixture(3).unwrap(), 5.0).unwrap() - 10.0).abs() < 1e-12);
        let prod = StateVector::product_basis(SystemShape::new(3, 2).unwrap(), 0, 0).unwrap();
        let v = assumption1_lhs(&prod, 4.0).unwrap();
        assert!((v - 6.0).abs() < 1e-12 && v <= assumption1_rhs(4.0).unwrap());
        assert!(assumption1_lhs(&phi(3), 4.0).is_err());
    }

    #[test]
    fn assumption1_rhs_branches() {
        assert_eq!(assumption1_rhs(3.0).unwrap(), 6.0);
        assert_eq!(assumption1_rhs(4.0).unwrap(), 8.0);
        assert_eq!(assumption1_rhs(5.0).unwrap(), 11.0);
        assert!(assumption1_rhs(2.0).is_err());
        assert!(assumption1_rhs(f64::NAN).is_err());
    }

    #[test]
    fn eq4_values_and_floor() {
        let star = attaining_state(3, 2).unwrap();
        assert!(eq4_value(&star, 4.0).unwrap().abs() < 1e-12);
        assert!((eq4_value(&star, 5.0).unwrap() - 0.75).abs() < 1e-12);
        assert!(eq4_floor(4.0).abs() < 1e-12);
        assert!((eq4_floor(5.0) - 0.75).abs() < 1e-12);
        assert!((eq4_floor(3.9) + 0.0975).abs() < 1e-12);
        assert!(eq4_value(&phi(3), 4.0).is_err());
    }

    #[test]
    fn eq4_expansion_matches_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = SystemShape::new(3, 2).unwrap();
        for k in [4.0, 5.0, 6.0] {
            let p = pplus_unnorm(3).unwrap();
            let half = HermitianOperator::identity(p.shape()).scaled(k / 2.0).add(&p.scaled(-1.0)).unwrap();
            let op = half.tensor(&half, DEFAULT_DENSE_CAP).unwrap();
            for _ in 0..10 {
                let psi = sample_rank2(shape, &mut rng).expand();
                let dense = expectation(&op, &psi).unwrap();
                assert!((dense - eq4_value(&psi, k).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn k_of_lambda_values() {
        assert_eq!(k_of_lambda(1.0).unwrap(), 4.0);
        assert!((k_of_lambda(2.0 / 3.0).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(k_of_lambda(0.5).unwrap(), 6.0);
        assert!(k_of_lambda(0.0).is_err());
        for i in 1..20 {
            assert!(k_of_lambda(i as f64 / 20.0).unwrap() > 4.0);
        }
    }

    /// Direct summation with exact binomials.
    fn identity_oracle(lambda: f64, n: usize) -> f64 {
        let mut total = 1.0 * (1.0 + lambda).powi(n as i32);
        for m in 1..=n {
            let b = 2 * binom_oracle(n as u64 - 1, m as u64 - 1)
                + if m < n { binom_oracle(n as u64 - 1, m as u64) } else { 0 };
            total += (1.0 + lambda).powi((n - m) as i32) * (-lambda).powi(m as i32) * b as f64;
        }
        total
    }

    #[test]
    fn binomial_identity() {
        for n in 2..=5 {
            for lambda in [0.0, 0.3, 0.5, 1.0] {
                assert!((identity_oracle(lambda, n) - (1.0 - lambda)).abs() <= 1e-12);
                let p = WernerParams::new(3, lambda).unwrap();
                let want = (1.0 - lambda) / p.normalizer().powi(n as i32);
                assert!((optimal_set_value(p, n).unwrap() - want).abs() <= 1e-12);
            }
        }
        let p = WernerParams::new(3, 0.5).unwrap();
        assert!((optimal_set_value(p, 2).unwrap() - 0.5 / 144.0).abs() < 1e-15);
        let p = WernerParams::new(3, 0.0).unwrap();
        assert!((optimal_set_value(p, 3).unwrap() - 1.0 / 729.0).abs() < 1e-15);
    }

    #[test]
    fn composite_value_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shape = SystemShape::new(3, 2).unwrap();
        let p = WernerParams::new(3, 0.8).unwrap();
        let w = composite_pt(p, 2, DEFAULT_DENSE_CAP).unwrap();
        for _ in 0..100 {
            let psi = sample_rank2(shape, &mut rng).expand();
            let dense = expectation(&w, &psi).unwrap();
            assert!((composite_value(&psi, p).unwrap() - dense).abs() <= 1e-10);
        }
        for lambda in [0.3, 0.6, 1.0] {
            let p = WernerParams::new(3, lambda).unwrap();
            let star = attaining_state(3, 2).unwrap();
            let want = (1.0 - lambda) / p.normalizer().powi(2);
            assert!((composite_value(&star, p).unwrap() - want).abs() < 1e-15);
        }
        let p1 = WernerParams::new(3, 1.0).unwrap();
        for n in 2..=4 {
            assert!(composite_value(&attaining_state(3, n).unwrap(), p1).unwrap().abs() < 1e-15);
        }
        let p4 = WernerParams::new(4, 1.0).unwrap();
        assert!(composite_value(&attaining_state(3, 2).unwrap(), p4).is_err());
    }

    #[test]
    fn small_probes() {
        let config = ProbeConfig {
            optimizer: OptConfig { restarts: 30, ..OptConfig::default() },
            samples: 5_000,
        };
        let r = bound_probe(2, 1, 3, &config).unwrap();
        assert!(!r.violation);
        assert!((r.optimizer_max - 3.0).abs() <= 1e-6, "{}", r.optimizer_max);
        assert!(r.sample_max <= 3.0);
        assert!((r.attaining_value - 3.0).abs() < 1e-12);
        let r = bound_probe(2, 2, 3, &config).unwrap();
        assert!(!r.violation);
        assert!((r.optimizer_max - 2.0).abs() <= 1e-6, "{}", r.optimizer_max);
    }

    #[test]
    fn matrix_free_probe_route() {
        let config = ProbeConfig {
            optimizer: OptConfig { restarts: 4, max_iter: 50, dense_cap: 15, ..OptConfig::default() },
            samples: 100,
        };
        let r = bound_probe(2, 1, 2, &config).unwrap();
        assert_eq!(r.optimizer_route, "matrix_free");
        assert!(!r.violation);
        assert!((r.optimizer_max - 3.0).abs() <= 1e-6);
    }

    #[test]
    fn sample_sweep_is_deterministic() {
        let shape = SystemShape::new(3, 2).unwrap();
        let a = sample_sweep(shape, 2_500, 9).unwrap();
        let b = sample_sweep(shape, 2_500, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!((a[0] - 1.0).abs() < 1e-12);
    }
}
