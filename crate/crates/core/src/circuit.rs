//! Explicit unitary realisation of a phase-enhanced model.
//!
//! Memory states are obtained by factoring the overlap matrix, the map
//! `|σ_j⟩|0⟩ ↦ Σ_x √P(x|j) e^{iφ_xj} |σ_λ(j,x)⟩|x⟩` is built on their span
//! and completed to a full unitary on `memory ⊗ output`. Basis index of
//! `|m⟩|x⟩` is `m * alphabet_size + x` (memory major, output minor). Outside
//! the span of the `|σ_j⟩|0⟩` the completion is arbitrary; any orthonormal
//! extension realises the same output statistics.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gram::{complex_matrix_json, max_abs_diff, overlaps, OverlapMatrix, PhaseAssignment};
use crate::process::{StochasticProcess, Word, WORD_LIMIT};
use crate::scalar::{cis, modulus, Real};
use crate::SCHEMA_VERSION;

const PIVOT_THRESHOLD: f64 = 1e-12;
/// Branches whose amplitude norm falls below this are treated as impossible.
const BRANCH_NORM_FLOOR: f64 = 1e-15;
/// Word length used by [`verify_model`].
pub const VERIFY_WORD_LENGTH: usize = 4;

/// One memory vector per causal state, all of dimension `rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryStateSet<T: Real> {
    /// `rank × num_states`; column `j` is `|σ_j⟩`.
    vectors: DMatrix<Complex<T>>,
}

impl<T: Real> MemoryStateSet<T> {
    pub fn from_columns(vectors: DMatrix<Complex<T>>) -> Self {
        Self { vectors }
    }

    /// Memory register dimension.
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of memory states.
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn state(&self, j: usize) -> DVector<Complex<T>> {
        self.vectors.column(j).into_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex<T>> {
        &self.vectors
    }

    /// `⟨σ_j|σ_k⟩`.
    pub fn gram(&self) -> DMatrix<Complex<T>> {
        self.vectors.adjoint() * &self.vectors
    }
}

/// Factors `C = V†V` through the eigendecomposition of `C`, keeping the
/// eigenvalues above `rank_tolerance` times the largest one.
pub fn embed_states<T: Real>(
    overlaps: &OverlapMatrix<T>,
    rank_tolerance: T,
) -> Result<MemoryStateSet<T>> {
    let n = overlaps.dim();
    let eig = overlaps.0.clone().symmetric_eigen();
    let floor = T::lit(T::NEG_EIGEN_FLOOR);
    let max = eig.eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept = Vec::new();
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        if lambda < -floor {
            return Err(Error::NotPsd {
                eigenvalue: lambda.as_f64(),
            });
        }
        if lambda > rank_tolerance * max {
            kept.push(i);
        }
    }
    // σ_k[r] = √λ_r · conj(V[k, r]) gives Σ_r λ_r V[j,r] conj(V[k,r]) = C_jk.
    let vectors = DMatrix::from_fn(kept.len(), n, |r, k| {
        let i = kept[r];
        eig.eigenvectors[(k, i)].conj() * eig.eigenvalues[i].sqrt()
    });
    Ok(MemoryStateSet { vectors })
}

/// Unitary acting on `memory ⊗ output`, together with the memory states it
/// was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryModel<T: Real> {
    matrix: DMatrix<Complex<T>>,
    memory_dim: usize,
    alphabet_size: usize,
    states: MemoryStateSet<T>,
}

impl<T: Real> UnitaryModel<T> {
    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.matrix
    }

    pub fn memory_dim(&self) -> usize {
        self.memory_dim
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn states(&self) -> &MemoryStateSet<T> {
        &self.states
    }

    /// Basis index of `|memory⟩|output⟩`.
    #[inline]
    pub fn basis_index(&self, memory: usize, output: usize) -> usize {
        memory * self.alphabet_size + output
    }

    /// `max |U†U − I|`.
    pub fn unitarity_residual(&self) -> T {
        let d = self.matrix.nrows();
        max_abs_diff(&(self.matrix.adjoint() * &self.matrix), &DMatrix::identity(d, d))
    }

    /// `U (ψ ⊗ |0⟩)`.
    fn apply(&self, psi: &DVector<Complex<T>>) -> DVector<Complex<T>> {
        let d = self.matrix.nrows();
        let mut out = DVector::from_element(d, Complex::new(T::zero(), T::zero()));
        for (i, &amp) in psi.iter().enumerate() {
            out.axpy(amp, &self.matrix.column(self.basis_index(i, 0)), Complex::new(T::one(), T::zero()));
        }
        out
    }

    /// Memory amplitude left behind when output `x` is observed.
    fn branch(&self, out: &DVector<Complex<T>>, x: usize) -> DVector<Complex<T>> {
        DVector::from_fn(self.memory_dim, |i, _| out[self.basis_index(i, x)])
    }

    /// Largest `‖U|σ_j⟩|0⟩ − Σ_x √P(x|j) e^{iφ_xj} |σ_λ(j,x)⟩|x⟩‖` over states.
    pub fn action_residual(
        &self,
        process: &StochasticProcess<T>,
        phases: &PhaseAssignment<T>,
    ) -> Result<T> {
        let targets = target_states(process, phases, &self.states)?;
        let mut worst = T::zero();
        for j in 0..self.states.len() {
            let diff = self.apply(&self.states.state(j)) - targets.column(j);
            worst = worst.max(diff.iter().fold(T::zero(), |a, z| a + z.re * z.re + z.im * z.im).sqrt());
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "memory_dim": self.memory_dim,
            "alphabet_size": self.alphabet_size,
            "basis_order": "memory-major, output-minor: index = memory * alphabet_size + output",
            "matrix": complex_matrix_json(&self.matrix),
        })
    }
}

/// Column `j`: `Σ_x √P(x|j) e^{iφ_xj} |σ_λ(j,x)⟩ ⊗ |x⟩`.
fn target_states<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
    states: &MemoryStateSet<T>,
) -> Result<DMatrix<Complex<T>>> {
    let n = process.num_states();
    if states.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} memory states for a {n}-state process",
            states.len()
        )));
    }
    let r = states.dim();
    let m = process.alphabet_size();
    let mut b = DMatrix::from_element(r * m, n, Complex::new(T::zero(), T::zero()));
    for t in process.transitions() {
        let amp = cis(phases.get(t.symbol, t.from)) * t.prob.sqrt();
        for i in 0..r {
            b[(i * m + t.symbol, t.from)] += amp * states.vectors[(i, t.to)];
        }
    }
    Ok(b)
}

/// Builds a unitary satisfying the phase-enhanced update on the span of the
/// memory states and completes it by orthonormal extension.
pub fn build_unitary<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
    states: &MemoryStateSet<T>,
) -> Result<UnitaryModel<T>> {
    let sigma = &states.vectors;
    let b = target_states(process, phases, states)?;
    let gram_tol = T::lit(1e-8).max(T::default_epsilon() * T::lit(1e3));
    let mismatch = max_abs_diff(&states.gram(), &(b.adjoint() * &b));
    if mismatch > gram_tol {
        return Err(Error::InconsistentGram {
            mismatch: mismatch.as_f64(),
        });
    }
    let r = states.dim();
    let m = process.alphabet_size();
    let d = r * m;

    // Σ has full row rank r, so Σ⁺ = Σ†(ΣΣ†)⁻¹ and M = BΣ⁺ is an isometry
    // with MΣ = B.
    let ssd = sigma * sigma.adjoint();
    let inv = ssd.try_inverse().ok_or(Error::NotPsd { eigenvalue: 0.0 })?;
    let isometry = &b * sigma.adjoint() * inv;

    let mut basis: Vec<DVector<Complex<T>>> = Vec::with_capacity(d);
    for i in 0..r {
        basis.push(isometry.column(i).into_owned());
    }
    let complement = orthonormal_complement(&basis, d)?;

    let mut matrix = DMatrix::from_element(d, d, Complex::new(T::zero(), T::zero()));
    let mut extra = complement.into_iter();
    for mem in 0..r {
        for x in 0..m {
            let col = if x == 0 {
                basis[mem].clone()
            } else {
                extra.next().expect("complement has d - r vectors")
            };
            matrix.set_column(mem * m + x, &col);
        }
    }
    Ok(UnitaryModel {
        matrix,
        memory_dim: r,
        alphabet_size: m,
        states: states.clone(),
    })
}

/// Extends an orthonormal set to a basis of `C^d` by Gram–Schmidt over the
/// standard basis, always taking the candidate with the largest residual and
/// orthogonalising twice.
fn orthonormal_complement<T: Real>(
    basis: &[DVector<Complex<T>>],
    d: usize,
) -> Result<Vec<DVector<Complex<T>>>> {
    let zero = Complex::new(T::zero(), T::zero());
    let project_out = |v: &mut DVector<Complex<T>>, set: &[DVector<Complex<T>>]| {
        for _ in 0..2 {
            for b in set {
                let coeff = b.dotc(v);
                v.axpy(-coeff, b, Complex::new(T::one(), T::zero()));
            }
        }
    };
    let mut all: Vec<DVector<Complex<T>>> = basis.to_vec();
    let mut out = Vec::with_capacity(d - basis.len());
    let mut used = vec![false; d];
    while all.len() < d {
        let mut best: Option<(usize, T, DVector<Complex<T>>)> = None;
        for (e, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let mut v = DVector::from_element(d, zero);
            v[e] = Complex::new(T::one(), T::zero());
            project_out(&mut v, &all);
            let norm = v.iter().fold(T::zero(), |a, z| a + z.re * z.re + z.im * z.im).sqrt();
            if best.as_ref().is_none_or(|(_, bn, _)| norm > *bn) {
                best = Some((e, norm, v));
            }
        }
        let (e, norm, v) = best.expect("fewer than d vectors leaves a candidate");
        if norm <= T::lit(PIVOT_THRESHOLD) {
            return Err(Error::DimensionMismatch(
                "mapped memory states are not linearly independent".into(),
            ));
        }
        used[e] = true;
        let v = v.unscale(norm);
        all.push(v.clone());
        out.push(v);
    }
    Ok(out)
}

/// Born-rule distribution over output words of length `len` when the memory
/// starts in `|σ_start⟩`.
pub fn exact_word_distribution<T: Real>(
    model: &UnitaryModel<T>,
    start: usize,
    len: usize,
) -> Result<BTreeMap<Word, T>> {
    if start >= model.states.len() {
        return Err(Error::InvalidProcess(format!(
            "start state {start} outside 0..{}",
            model.states.len()
        )));
    }
    let mut out = BTreeMap::new();
    let mut word = Vec::with_capacity(len);
    let floor = T::lit(BRANCH_NORM_FLOOR * BRANCH_NORM_FLOOR);
    word_recurse(model, model.states.state(start), len, floor, &mut word, &mut out)?;
    Ok(out)
}

fn word_recurse<T: Real>(
    model: &UnitaryModel<T>,
    psi: DVector<Complex<T>>,
    remaining: usize,
    floor: T,
    word: &mut Word,
    out: &mut BTreeMap<Word, T>,
) -> Result<()> {
    if remaining == 0 {
        let p = norm_sqr(&psi);
        out.insert(word.clone(), p);
        if out.len() as u64 > WORD_LIMIT {
            return Err(Error::TooLarge {
                words: out.len() as u64,
                limit: WORD_LIMIT,
            });
        }
        return Ok(());
    }
    let full = model.apply(&psi);
    for x in 0..model.alphabet_size {
        let next = model.branch(&full, x);
        if norm_sqr(&next) <= floor {
            continue;
        }
        word.push(x);
        word_recurse(model, next, remaining - 1, floor, word, out)?;
        word.pop();
    }
    Ok(())
}

fn norm_sqr<T: Real>(v: &DVector<Complex<T>>) -> T {
    v.iter().fold(T::zero(), |a, z| a + z.re * z.re + z.im * z.im)
}

/// Samples `len` outputs, measuring the output register after every step
/// and renormalising the collapsed memory.
pub fn sample_trajectory<T: Real>(
    model: &UnitaryModel<T>,
    start: usize,
    len: usize,
    seed: u64,
) -> Result<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trajectory_with(model, start, len, &mut rng)
}

/// As [`sample_trajectory`], drawing from a caller-owned generator.
pub fn sample_trajectory_with<T: Real, R: Rng + ?Sized>(
    model: &UnitaryModel<T>,
    start: usize,
    len: usize,
    rng: &mut R,
) -> Result<Word> {
    if start >= model.states.len() {
        return Err(Error::InvalidProcess(format!(
            "start state {start} outside 0..{}",
            model.states.len()
        )));
    }
    let mut psi = model.states.state(start);
    let mut word = Vec::with_capacity(len);
    let floor = BRANCH_NORM_FLOOR;
    let mut branches: Vec<(usize, f64, DVector<Complex<T>>)> = Vec::with_capacity(model.alphabet_size);
    for _ in 0..len {
        let full = model.apply(&psi);
        branches.clear();
        let mut total = 0.0;
        for x in 0..model.alphabet_size {
            let b = model.branch(&full, x);
            let p = norm_sqr(&b).as_f64();
            if p.sqrt() > floor {
                total += p;
                branches.push((x, p, b));
            }
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = branches.len() - 1;
        for (i, (_, p, _)) in branches.iter().enumerate() {
            if u < *p {
                chosen = i;
                break;
            }
            u -= p;
        }
        let (x, p, b) = branches.swap_remove(chosen);
        word.push(x);
        psi = b.unscale(T::lit(p.sqrt()));
    }
    Ok(word)
}

/// Residuals and statistical distance of the full overlap → embed → build pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelReport {
    pub memory_dim: usize,
    pub num_states: usize,
    pub unitarity_residual: f64,
    pub action_residual: f64,
    /// Largest total-variation distance over start states between circuit
    /// words and process words of length `word_length`.
    pub tv_distance: f64,
    pub word_length: usize,
}

/// Total-variation distance between two word distributions.
pub fn total_variation<T: Real>(a: &BTreeMap<Word, T>, b: &BTreeMap<Word, T>) -> T {
    let mut acc = T::zero();
    for (w, &pa) in a {
        acc += (pa - b.get(w).copied().unwrap_or_else(T::zero)).abs();
    }
    for (w, &pb) in b {
        if !a.contains_key(w) {
            acc += pb.abs();
        }
    }
    acc * T::lit(0.5)
}

/// Builds the model for `(process, phases)` and checks it end to end.
pub fn verify_model<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
) -> Result<(UnitaryModel<T>, ModelReport)> {
    let c = overlaps(process, phases)?;
    let states = embed_states(&c, T::lit(T::RANK_TOL))?;
    let model = build_unitary(process, phases, &states)?;
    let mut tv = T::zero();
    for j in 0..process.num_states() {
        let circuit = exact_word_distribution(&model, j, VERIFY_WORD_LENGTH)?;
        let classical = process.word_distribution(j, VERIFY_WORD_LENGTH)?;
        tv = tv.max(total_variation(&circuit, &classical));
    }
    let report = ModelReport {
        memory_dim: model.memory_dim,
        num_states: process.num_states(),
        unitarity_residual: model.unitarity_residual().as_f64(),
        action_residual: model.action_residual(process, phases)?.as_f64(),
        tv_distance: tv.as_f64(),
        word_length: VERIFY_WORD_LENGTH,
    };
    Ok((model, report))
}

/// `max_jk |⟨σ_j|σ_k⟩ − C_jk|`.
pub fn embedding_error<T: Real>(states: &MemoryStateSet<T>, overlaps: &OverlapMatrix<T>) -> T {
    states
        .gram()
        .iter()
        .zip(overlaps.0.iter())
        .fold(T::zero(), |a, (x, y)| a.max(modulus(*x - *y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::{markov_overlaps, spectrum};
    use crate::models;
    use std::f64::consts::PI;

    #[test]
    fn embed_identity_and_ones() {
        let id = OverlapMatrix(DMatrix::<Complex<f64>>::identity(3, 3));
        let s = embed_states(&id, 1e-9).unwrap();
        assert_eq!(s.dim(), 3);
        assert!(embedding_error(&s, &id) < 1e-12);

        let ones = OverlapMatrix(DMatrix::from_element(3, 3, Complex::new(1.0, 0.0)));
        let s = embed_states(&ones, 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        for j in 0..3 {
            assert!((s.state(j)[0].norm() - 1.0_f64).abs() < 1e-12);
        }
        assert!(embedding_error(&s, &ones) < 1e-12);
    }

    #[test]
    fn embed_rank_two_for_phase_flipped_half_cycle() {
        let q = models::quasi_cycle(0.5_f64);
        let phases = PhaseAssignment::from_entries(&q, [((2, 2), PI)]).unwrap();
        let c = markov_overlaps(&q, &phases).unwrap();
        let mut eig: Vec<f64> = c.0.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(eig[0].abs() < 1e-10);
        let s = embed_states(&c, 1e-9).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(embedding_error(&s, &c) < 1e-10);
    }

    #[test]
    fn fair_coin_unitary_acts_as_hadamard_column() {
        let coin = models::fair_coin::<f64>();
        let zeros = PhaseAssignment::zeros(&coin);
        let (model, report) = verify_model(&coin, &zeros).unwrap();
        assert_eq!(model.memory_dim(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sigma = model.states().state(0)[0];
        let out = model.apply(&model.states().state(0));
        assert!((out[0] - sigma * h).norm() < 1e-12);
        assert!((out[1] - sigma * h).norm() < 1e-12);
        assert!(report.unitarity_residual < 1e-12);
        assert!(report.action_residual < 1e-12);
        assert!(report.tv_distance < 1e-12);
    }

    #[test]
    fn quasi_cycle_model_is_faithful() {
        let q = models::quasi_cycle(0.3_f64);
        let (model, report) = verify_model(&q, &PhaseAssignment::zeros(&q)).unwrap();
        assert!(report.unitarity_residual < 1e-10);
        assert!(report.action_residual < 1e-10);
        assert!(report.tv_distance < 1e-8);
        let w1 = exact_word_distribution(&model, 0, 1).unwrap();
        assert!((w1[&vec![0]] - 0.7).abs() < 1e-12);
        assert!((w1[&vec![1]] - 0.3).abs() < 1e-12);
        let w0 = exact_word_distribution(&model, 0, 0).unwrap();
        assert!((w0[&Vec::<usize>::new()] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn memory_dimension_tracks_spectral_rank() {
        let q = models::quasi_cycle(0.5_f64);
        for phases in [
            PhaseAssignment::zeros(&q),
            PhaseAssignment::from_entries(&q, [((2, 2), PI)]).unwrap(),
        ] {
            let (model, _) = verify_model(&q, &phases).unwrap();
            let s = spectrum(&q, &phases).unwrap();
            assert_eq!(model.memory_dim() as f64, s.dq_bits.exp2().round());
        }
    }

    #[test]
    fn inconsistent_states_are_rejected() {
        let q = models::quasi_cycle(0.3_f64);
        let id = OverlapMatrix(DMatrix::<Complex<f64>>::identity(3, 3));
        let wrong = embed_states(&id, 1e-9).unwrap();
        assert!(matches!(
            build_unitary(&q, &PhaseAssignment::zeros(&q), &wrong),
            Err(Error::InconsistentGram { .. })
        ));
    }

    #[test]
    fn deterministic_cycle_sampling() {
        let cycle = models::quasi_cycle(1.0_f64);
        let (model, _) = verify_model(&cycle, &PhaseAssignment::zeros(&cycle)).unwrap();
        for seed in 0..5 {
            assert_eq!(sample_trajectory(&model, 0, 3, seed).unwrap(), vec![1, 2, 0]);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let q = models::quasi_cycle(0.3_f64);
        let (model, _) = verify_model(&q, &PhaseAssignment::zeros(&q)).unwrap();
        let a = sample_trajectory(&model, 1, 50, 42).unwrap();
        let b = sample_trajectory(&model, 1, 50, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fair_coin_frequency_within_three_sigma() {
        let coin = models::fair_coin::<f64>();
        let (model, _) = verify_model(&coin, &PhaseAssignment::zeros(&coin)).unwrap();
        let n = 100_000;
        let word = sample_trajectory(&model, 0, n, 7).unwrap();
        let zeros = word.iter().filter(|&&x| x == 0).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((zeros - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn total_variation_basics() {
        let a: BTreeMap<Word, f64> = [(vec![0], 0.5), (vec![1], 0.5)].into();
        let b: BTreeMap<Word, f64> = [(vec![0], 1.0)].into();
        assert!((total_variation(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&a, &a), 0.0);
    }
}
