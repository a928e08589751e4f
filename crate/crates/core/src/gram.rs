//! Phase-dependent overlaps of quantum memory states and the entropic and
//! dimensional memory they induce.
//!
//! For a phase assignment `φ_{xj}` the memory states satisfy
//! `c_jk = Σ_x √(P(x|j) P(x|k)) e^{i(φ_xk − φ_xj)} c_{λ(j,x) λ(k,x)}`.
//! Markov processes close this after one step; in general it is solved by
//! fixed-point iteration from the all-ones matrix. The steady-state memory
//! spectrum is read off the weighted Gram matrix `√(π_j π_k) c_jk`, which
//! has the same nonzero eigenvalues as `ρ = Σ_j π_j |σ_j⟩⟨σ_j|`.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::process::{StationaryDistribution, StochasticProcess, Word};
use crate::scalar::{cis, modulus, shannon_bits, wrap_angle, Real};
use crate::SCHEMA_VERSION;

/// Iteration cap used by [`overlaps`].
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// One phase per nonzero transition, keyed by `(symbol, state)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAssignment<T> {
    phases: BTreeMap<(usize, usize), T>,
}

impl<T: Real> PhaseAssignment<T> {
    /// All phases zero.
    pub fn zeros(process: &StochasticProcess<T>) -> Self {
        Self {
            phases: process
                .transitions()
                .iter()
                .map(|t| ((t.symbol, t.from), T::zero()))
                .collect(),
        }
    }

    /// Builds an assignment from `((symbol, state), angle)` entries.
    /// Transitions not listed get phase zero; entries naming a
    /// zero-probability transition are rejected.
    pub fn from_entries(
        process: &StochasticProcess<T>,
        entries: impl IntoIterator<Item = ((usize, usize), T)>,
    ) -> Result<Self> {
        let mut out = Self::zeros(process);
        for ((symbol, state), angle) in entries {
            out.set(symbol, state, angle)?;
        }
        Ok(out)
    }

    /// Uniformly random phases on every nonzero transition.
    pub fn random<R: Rng + ?Sized>(process: &StochasticProcess<T>, rng: &mut R) -> Self {
        let two_pi = std::f64::consts::TAU;
        Self {
            phases: process
                .transitions()
                .iter()
                .map(|t| ((t.symbol, t.from), T::lit(rng.random_range(0.0..two_pi))))
                .collect(),
        }
    }

    /// `φ_{xj}`; zero for transitions without an entry.
    #[inline]
    pub fn get(&self, symbol: usize, state: usize) -> T {
        self.phases
            .get(&(symbol, state))
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Sets `φ_{xj}`, canonicalised to `[0, 2π)`.
    pub fn set(&mut self, symbol: usize, state: usize, angle: T) -> Result<()> {
        match self.phases.get_mut(&(symbol, state)) {
            Some(slot) => {
                if !angle.is_finite() {
                    return Err(Error::InvalidPhase(format!(
                        "phase on ({symbol}, {state}) is not finite"
                    )));
                }
                *slot = wrap_angle(angle);
                Ok(())
            }
            None => Err(Error::InvalidPhase(format!(
                "symbol {symbol} has zero probability from state {state}"
            ))),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        self.phases.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// JSON object mapping `"x,j"` to radians.
    pub fn to_json(&self) -> Value {
        Value::Object(
            self.phases
                .iter()
                .map(|(&(x, j), &v)| (format!("{x},{j}"), json!(v.as_f64())))
                .collect(),
        )
    }

    pub fn from_json(process: &StochasticProcess<T>, text: &str) -> Result<Self> {
        let map: BTreeMap<String, f64> = serde_json::from_str(text)?;
        let mut entries = Vec::with_capacity(map.len());
        for (key, angle) in map {
            let parsed = key
                .split_once(',')
                .and_then(|(x, j)| Some((x.trim().parse().ok()?, j.trim().parse().ok()?)));
            match parsed {
                Some(k) => entries.push((k, T::lit(angle))),
                None => {
                    return Err(Error::InvalidPhase(format!(
                        "key {key:?} is not of the form \"symbol,state\""
                    )))
                }
            }
        }
        Self::from_entries(process, entries)
    }
}

/// Hermitian matrix of memory-state inner products `c_jk = ⟨σ_j|σ_k⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapMatrix<T: Real>(pub DMatrix<Complex<T>>);

impl<T: Real> OverlapMatrix<T> {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.0
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &DMatrix<Complex<T>>) -> T {
        max_abs_diff(&self.0, other)
    }

    /// Checks unit diagonal, Hermiticity, `|c_jk| ≤ 1` and positive semidefiniteness.
    pub fn check(&self) -> Result<()> {
        let n = self.dim();
        let herm_tol = T::lit(1e-12_f64.max(T::FIXED_POINT_TOL));
        for j in 0..n {
            if modulus(self.0[(j, j)] - Complex::new(T::one(), T::zero())) > herm_tol {
                return Err(Error::DimensionMismatch(format!(
                    "overlap diagonal entry {j} is not 1"
                )));
            }
            for k in 0..n {
                if modulus(self.0[(j, k)] - self.0[(k, j)].conj()) > herm_tol {
                    return Err(Error::DimensionMismatch(format!(
                        "overlap entry ({j}, {k}) breaks Hermiticity"
                    )));
                }
                if modulus(self.0[(j, k)]) > T::one() + herm_tol {
                    return Err(Error::DimensionMismatch(format!(
                        "overlap entry ({j}, {k}) exceeds 1 in modulus"
                    )));
                }
            }
        }
        let floor = T::lit(T::NEG_EIGEN_FLOOR);
        let min = hermitian_eigenvalues(&self.0)
            .into_iter()
            .fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b));
        if min < -floor {
            return Err(Error::NotPsd {
                eigenvalue: min.as_f64(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "dim": self.dim(),
            "overlaps": complex_matrix_json(&self.0),
        })
    }
}

/// Eigenvalues of the weighted Gram matrix and the memory costs they imply.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorySpectrum<T> {
    /// Nonincreasing.
    pub eigenvalues: Vec<T>,
    /// Von Neumann entropy of the steady-state memory, in bits.
    pub cq_bits: T,
    /// `log2(rank)`.
    pub dq_bits: T,
    pub rank: usize,
    /// Relative to the largest eigenvalue.
    pub rank_tolerance: T,
}

impl<T: Real> MemorySpectrum<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "eigenvalues": self.eigenvalues.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "cq_bits": self.cq_bits.as_f64(),
            "dq_bits": self.dq_bits.as_f64(),
            "rank": self.rank,
            "rank_tolerance": self.rank_tolerance.as_f64(),
        })
    }
}

/// Closed-form overlaps of a Markov process:
/// `c_jk = Σ_y √(T_yj T_yk) e^{i(φ_yk − φ_yj)}`.
pub fn markov_overlaps<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
) -> Result<OverlapMatrix<T>> {
    if !process.is_markov() {
        return Err(Error::NotMarkov);
    }
    let n = process.num_states();
    let one = Complex::new(T::one(), T::zero());
    let mut c = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
    for j in 0..n {
        c[(j, j)] = one;
        for k in (j + 1)..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for y in 0..n {
                let (pj, pk) = (process.prob(j, y), process.prob(k, y));
                if pj > T::zero() && pk > T::zero() {
                    acc += cis(phases.get(y, k) - phases.get(y, j)) * (pj * pk).sqrt();
                }
            }
            c[(j, k)] = acc;
            c[(k, j)] = acc.conj();
        }
    }
    Ok(OverlapMatrix(c))
}

/// Solves the overlap recursion by iteration from the all-ones matrix until
/// successive iterates differ by at most `tol` in max-norm.
pub fn fixed_point_overlaps<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
    tol: T,
    max_iter: usize,
) -> Result<OverlapMatrix<T>> {
    process.ensure_valid()?;
    let n = process.num_states();
    let m = process.alphabet_size();
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());

    // Per (j, k) pair: list of (weight, successor pair).
    let mut terms: Vec<Vec<(Complex<T>, usize, usize)>> = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            let mut row = Vec::new();
            for x in 0..m {
                if let (Some((pj, tj)), Some((pk, tk))) = (process.step(j, x), process.step(k, x)) {
                    let w = cis(phases.get(x, k) - phases.get(x, j)) * (pj * pk).sqrt();
                    row.push((w, tj, tk));
                }
            }
            terms.push(row);
        }
    }

    let mut c = DMatrix::from_element(n, n, one);
    let mut next = DMatrix::from_element(n, n, zero);
    for _ in 0..max_iter {
        for j in 0..n {
            for k in 0..n {
                next[(j, k)] = terms[j * n + k]
                    .iter()
                    .fold(zero, |acc, &(w, a, b)| acc + w * c[(a, b)]);
            }
        }
        let diff = max_abs_diff(&next, &c);
        std::mem::swap(&mut c, &mut next);
        if diff <= tol {
            for j in 0..n {
                c[(j, j)] = one;
            }
            return Ok(OverlapMatrix(c));
        }
    }
    Err(Error::NotConverged { max_iter })
}

/// Overlaps by the cheapest exact route: closed form for Markov processes,
/// fixed-point iteration with the default tolerance otherwise.
pub fn overlaps<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
) -> Result<OverlapMatrix<T>> {
    if process.is_markov() {
        process.ensure_valid()?;
        markov_overlaps(process, phases)
    } else {
        fixed_point_overlaps(process, phases, T::lit(T::FIXED_POINT_TOL), DEFAULT_MAX_ITER)
    }
}

/// Length-`len` truncation of the overlap series, computed by explicit word
/// enumeration: `Σ_{|w|=len} √(P(w|j) P(w|k)) e^{i(φ_wk − φ_wj)}`.
pub fn brute_force_fidelity<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
    len: usize,
) -> Result<DMatrix<Complex<T>>> {
    let n = process.num_states();
    let starts: Vec<usize> = (0..n).collect();
    process.guard_words(&starts, len)?;
    let per_state: Vec<BTreeMap<Word, (T, T)>> = (0..n)
        .map(|j| {
            let mut out = BTreeMap::new();
            phased_words(process, phases, j, T::one(), T::zero(), len, &mut Vec::new(), &mut out);
            out
        })
        .collect();
    let mut f = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
    for j in 0..n {
        for k in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (w, &(pj, phj)) in &per_state[j] {
                if let Some(&(pk, phk)) = per_state[k].get(w) {
                    acc += cis(phk - phj) * (pj * pk).sqrt();
                }
            }
            f[(j, k)] = acc;
        }
    }
    Ok(f)
}

#[allow(clippy::too_many_arguments)]
fn phased_words<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
    state: usize,
    prob: T,
    phase: T,
    remaining: usize,
    word: &mut Word,
    out: &mut BTreeMap<Word, (T, T)>,
) {
    if remaining == 0 {
        out.insert(word.clone(), (prob, phase));
        return;
    }
    for t in process.outgoing(state) {
        word.push(t.symbol);
        phased_words(
            process,
            phases,
            t.to,
            prob * t.prob,
            phase + phases.get(t.symbol, state),
            remaining - 1,
            word,
            out,
        );
        word.pop();
    }
}

/// `G_jk = √(π_j π_k) c_jk`.
pub fn weighted_gram<T: Real>(
    overlaps: &OverlapMatrix<T>,
    pi: &StationaryDistribution<T>,
) -> Result<DMatrix<Complex<T>>> {
    let n = overlaps.dim();
    if pi.0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} memory states but {} stationary weights",
            pi.0.len()
        )));
    }
    let w: Vec<T> = pi.0.iter().map(|p| p.sqrt()).collect();
    Ok(DMatrix::from_fn(n, n, |j, k| overlaps.0[(j, k)] * (w[j] * w[k])))
}

/// Spectrum of the steady-state memory with `C_q` and `D_q`.
pub fn memory_spectrum<T: Real>(
    overlaps: &OverlapMatrix<T>,
    pi: &StationaryDistribution<T>,
    rank_tolerance: T,
) -> Result<MemorySpectrum<T>> {
    let g = weighted_gram(overlaps, pi)?;
    let mut eigenvalues = hermitian_eigenvalues(&g);
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let floor = T::lit(T::NEG_EIGEN_FLOOR);
    for v in eigenvalues.iter_mut() {
        if *v < T::zero() {
            if *v < -floor {
                return Err(Error::NotPsd {
                    eigenvalue: v.as_f64(),
                });
            }
            *v = T::zero();
        }
    }
    let max = eigenvalues.first().copied().unwrap_or_else(T::zero);
    let rank = eigenvalues
        .iter()
        .filter(|&&v| v > rank_tolerance * max)
        .count();
    let cq_bits = shannon_bits(eigenvalues.iter().copied());
    let dq_bits = if rank == 0 {
        T::zero()
    } else {
        T::lit(rank as f64).log2()
    };
    Ok(MemorySpectrum {
        eigenvalues,
        cq_bits,
        dq_bits,
        rank,
        rank_tolerance,
    })
}

/// Memory spectrum of `process` under `phases` at the default rank tolerance.
pub fn spectrum<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
) -> Result<MemorySpectrum<T>> {
    let pi = process.stationary_distribution()?;
    memory_spectrum(&overlaps(process, phases)?, &pi, T::lit(T::RANK_TOL))
}

/// Real eigenvalues of a Hermitian matrix (unsorted).
pub(crate) fn hermitian_eigenvalues<T: Real>(m: &DMatrix<Complex<T>>) -> Vec<T> {
    m.clone().symmetric_eigenvalues().iter().copied().collect()
}

pub(crate) fn max_abs_diff<T: Real>(a: &DMatrix<Complex<T>>, b: &DMatrix<Complex<T>>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc.max(modulus(*x - *y)))
}

/// `[[[re, im], ...], ...]`, row-major.
pub fn complex_matrix_json<T: Real>(m: &DMatrix<Complex<T>>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| {
                Value::Array(
                    (0..m.ncols())
                        .map(|c| json!([m[(r, c)].re.as_f64(), m[(r, c)].im.as_f64()]))
                        .collect(),
                )
            })
            .collect(),
    )
}
