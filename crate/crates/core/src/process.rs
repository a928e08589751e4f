//! Stationary unifilar stochastic processes and their classical memory costs.
//!
//! A process is a labeled transition structure: from state `j`, symbol `x` is
//! emitted with probability `P(x|j)` and the state moves to `λ(j, x)`. Markov
//! processes are the special case where the emitted symbol is the destination
//! state, written as a column-stochastic matrix `T[y][x] = P(y|x)`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{shannon_bits, Real};

/// Upper bound on the number of nonzero-probability words any enumeration may visit.
pub const WORD_LIMIT: u64 = 10_000_000;

/// Above this state count the stationary distribution is found by power iteration.
const DIRECT_SOLVE_MAX_STATES: usize = 64;
const POWER_ITER_TOL: f64 = 1e-12;
const POWER_ITER_CAP: usize = 1_000_000;

/// Emitting `symbol` from `from` with probability `prob` moves the process to `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<T> {
    pub from: usize,
    pub symbol: usize,
    pub prob: T,
    pub to: usize,
}

/// A word is a sequence of symbol indices.
pub type Word = Vec<usize>;

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticProcess<T> {
    num_states: usize,
    alphabet_size: usize,
    /// Sorted by `(from, symbol)`; zero-probability entries removed.
    transitions: Vec<Transition<T>>,
    /// Dense `(prob, to)` lookup indexed by `from * alphabet_size + symbol`.
    table: Vec<Option<(T, usize)>>,
}

impl<T: Real> StochasticProcess<T> {
    /// Builds a process, dropping zero-probability transitions.
    ///
    /// Only structural checks happen here (indices in range, probabilities
    /// finite and in `[0, 1]`); use [`validate`](Self::validate) for the
    /// stochasticity, unifilarity and reachability checks.
    pub fn new(
        num_states: usize,
        alphabet_size: usize,
        transitions: impl IntoIterator<Item = Transition<T>>,
    ) -> Result<Self> {
        if num_states == 0 || alphabet_size == 0 {
            return Err(Error::InvalidProcess(
                "state count and alphabet size must be positive".into(),
            ));
        }
        let tol = T::lit(T::PROB_TOL);
        let mut kept = Vec::new();
        for t in transitions {
            if t.from >= num_states || t.to >= num_states {
                return Err(Error::InvalidProcess(format!(
                    "transition {} -> {} references a state outside 0..{num_states}",
                    t.from, t.to
                )));
            }
            if t.symbol >= alphabet_size {
                return Err(Error::InvalidProcess(format!(
                    "symbol {} outside alphabet 0..{alphabet_size}",
                    t.symbol
                )));
            }
            if !t.prob.is_finite() || t.prob < -tol || t.prob > T::one() + tol {
                return Err(Error::InvalidProcess(format!(
                    "probability {} on transition {} --{}--> {} is outside [0, 1]",
                    t.prob, t.from, t.symbol, t.to
                )));
            }
            if t.prob > T::zero() {
                kept.push(t);
            }
        }
        kept.sort_by_key(|t| (t.from, t.symbol, t.to));
        let mut table = vec![None; num_states * alphabet_size];
        for t in &kept {
            let slot = &mut table[t.from * alphabet_size + t.symbol];
            if slot.is_none() {
                *slot = Some((t.prob, t.to));
            }
        }
        Ok(Self {
            num_states,
            alphabet_size,
            transitions: kept,
            table,
        })
    }

    /// Markov process from a column-stochastic matrix: `matrix[y][x]` is the
    /// probability of moving from `x` to `y` while emitting `y`.
    pub fn markov(matrix: &[Vec<T>]) -> Result<Self> {
        let n = matrix.len();
        if matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidProcess("Markov matrix must be square".into()));
        }
        let transitions = (0..n).flat_map(|x| {
            (0..n).map(move |y| Transition {
                from: x,
                symbol: y,
                prob: matrix[y][x],
                to: y,
            })
        });
        Self::new(n, n, transitions)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Nonzero transitions ordered by `(from, symbol)`.
    pub fn transitions(&self) -> &[Transition<T>] {
        &self.transitions
    }

    /// Outgoing transitions of `state`.
    pub fn outgoing(&self, state: usize) -> &[Transition<T>] {
        let lo = self.transitions.partition_point(|t| t.from < state);
        let hi = self.transitions.partition_point(|t| t.from <= state);
        &self.transitions[lo..hi]
    }

    /// `(P(x|j), λ(j, x))`, or `None` when the transition has zero probability.
    #[inline]
    pub fn step(&self, state: usize, symbol: usize) -> Option<(T, usize)> {
        self.table[state * self.alphabet_size + symbol]
    }

    /// `P(x|j)`.
    #[inline]
    pub fn prob(&self, state: usize, symbol: usize) -> T {
        self.step(state, symbol).map_or(T::zero(), |(p, _)| p)
    }

    /// True when every transition emits its destination state's index.
    pub fn is_markov(&self) -> bool {
        self.num_states == self.alphabet_size && self.transitions.iter().all(|t| t.symbol == t.to)
    }

    /// Column-stochastic matrix `T[y][x]` of a Markov process.
    pub fn markov_matrix(&self) -> Result<Vec<Vec<T>>> {
        if !self.is_markov() {
            return Err(Error::NotMarkov);
        }
        let n = self.num_states;
        let mut m = vec![vec![T::zero(); n]; n];
        for t in &self.transitions {
            m[t.to][t.from] += t.prob;
        }
        Ok(m)
    }

    /// State-to-state matrix `M[k][j] = Σ_x P(x|j) [λ(j,x) = k]`.
    pub fn state_transition_matrix(&self) -> DMatrix<T> {
        let n = self.num_states;
        let mut m = DMatrix::zeros(n, n);
        for t in &self.transitions {
            m[(t.to, t.from)] += t.prob;
        }
        m
    }

    /// Strong connectivity of the support graph.
    pub fn is_irreducible(&self) -> bool {
        let n = self.num_states;
        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for t in &self.transitions {
            fwd[t.from].push(t.to);
            bwd[t.to].push(t.from);
        }
        let reach_all = |adj: &[Vec<usize>]| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach_all(&fwd) && reach_all(&bwd)
    }

    /// Lists every stochasticity, unifilarity and reachability violation.
    pub fn validate(&self) -> ValidationReport {
        let tol = T::lit(T::PROB_TOL);
        let mut violations = Vec::new();
        for j in 0..self.num_states {
            let total = self
                .outgoing(j)
                .iter()
                .fold(T::zero(), |acc, t| acc + t.prob);
            if (total - T::one()).abs() > tol {
                violations.push(Violation::Stochasticity {
                    state: j,
                    total: total.as_f64(),
                });
            }
        }
        for pair in self.transitions.windows(2) {
            if pair[0].from == pair[1].from && pair[0].symbol == pair[1].symbol {
                let dup = Violation::Unifilarity {
                    state: pair[0].from,
                    symbol: pair[0].symbol,
                };
                if violations.last() != Some(&dup) {
                    violations.push(dup);
                }
            }
        }
        if !self.is_irreducible() {
            violations.push(Violation::Reachability);
        }
        ValidationReport { violations }
    }

    /// Validation as a `Result`.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(report.to_string()))
        }
    }

    /// Stationary distribution over states.
    ///
    /// Direct linear solve up to 64 states, lazy power iteration beyond.
    pub fn stationary_distribution(&self) -> Result<StationaryDistribution<T>> {
        if !self.is_irreducible() {
            return Err(Error::Reducible);
        }
        let n = self.num_states;
        let m = self.state_transition_matrix();
        let mut pi = if n <= DIRECT_SOLVE_MAX_STATES {
            let mut a = m - DMatrix::identity(n, n);
            let mut b = DVector::zeros(n);
            for k in 0..n {
                a[(n - 1, k)] = T::one();
            }
            b[n - 1] = T::one();
            a.lu().solve(&b).ok_or(Error::Reducible)?
        } else {
            // (I + M)/2 shares the fixed point and removes periodicity.
            let half = T::lit(0.5);
            let tol = T::lit(POWER_ITER_TOL.max(T::FIXED_POINT_TOL));
            let mut v = DVector::from_element(n, T::one() / T::lit(n as f64));
            let mut converged = false;
            for _ in 0..POWER_ITER_CAP {
                let next = (&v + &m * &v) * half;
                let diff = (&next - &v).amax();
                v = next;
                if diff <= tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NotConverged {
                    max_iter: POWER_ITER_CAP,
                });
            }
            v
        };
        for p in pi.iter_mut() {
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let total = pi.sum();
        pi /= total;
        Ok(StationaryDistribution(pi.iter().copied().collect()))
    }

    /// `P(w | S_0 = start)` for every nonzero word of length `len`.
    pub fn word_distribution(&self, start: usize, len: usize) -> Result<BTreeMap<Word, T>> {
        self.check_state(start)?;
        self.guard_words(&[start], len)?;
        let mut out = BTreeMap::new();
        let mut word = Vec::with_capacity(len);
        self.collect_words(start, T::one(), len, &mut word, &mut out);
        Ok(out)
    }

    fn collect_words(
        &self,
        state: usize,
        prob: T,
        remaining: usize,
        word: &mut Word,
        out: &mut BTreeMap<Word, T>,
    ) {
        if remaining == 0 {
            out.insert(word.clone(), prob);
            return;
        }
        for t in self.outgoing(state) {
            word.push(t.symbol);
            self.collect_words(t.to, prob * t.prob, remaining - 1, word, out);
            word.pop();
        }
    }

    /// Number of nonzero-probability words of length `len` from each of `starts`.
    pub fn count_words(&self, starts: &[usize], len: usize) -> u64 {
        let n = self.num_states;
        let mut counts = vec![1u64; n];
        for _ in 0..len {
            let mut next = vec![0u64; n];
            for (j, slot) in next.iter_mut().enumerate() {
                *slot = self
                    .outgoing(j)
                    .iter()
                    .fold(0u64, |acc, t| acc.saturating_add(counts[t.to]));
            }
            counts = next;
        }
        starts
            .iter()
            .fold(0u64, |acc, &s| acc.saturating_add(counts[s]))
    }

    pub(crate) fn guard_words(&self, starts: &[usize], len: usize) -> Result<()> {
        let words = self.count_words(starts, len);
        if words > WORD_LIMIT {
            Err(Error::TooLarge {
                words,
                limit: WORD_LIMIT,
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_state(&self, state: usize) -> Result<()> {
        if state < self.num_states {
            Ok(())
        } else {
            Err(Error::InvalidProcess(format!(
                "state {state} outside 0..{}",
                self.num_states
            )))
        }
    }

    /// Merges states whose conditional word distributions agree (within the
    /// probability tolerance) for every word of length up to `horizon`.
    ///
    /// The classes are refined until they form a congruence of the update
    /// rule so that the quotient is again unifilar; the result is therefore
    /// the exact causal-state merge for any `horizon >= 1`. For Markov
    /// processes the first round (identical columns) is already final.
    pub fn merge_equivalent_states(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidConfig("merge horizon must be at least 1".into()));
        }
        let tol = T::lit(T::PROB_TOL);
        let n = self.num_states;
        let m = self.alphabet_size;

        // Length-1 agreement: identical emission probabilities.
        let mut class = assign_classes(n, |a, b| {
            (0..m).all(|x| (self.prob(a, x) - self.prob(b, x)).abs() <= tol)
        });
        // Round r leaves together exactly the states that agree on all words
        // up to length r + 1. A quotient needs a congruence, so refinement
        // continues past `horizon` until the partition is stable.
        loop {
            let prev = class.clone();
            class = assign_classes(n, |a, b| {
                prev[a] == prev[b]
                    && (0..m).all(|x| match (self.step(a, x), self.step(b, x)) {
                        (Some((_, ta)), Some((_, tb))) => prev[ta] == prev[tb],
                        (None, None) => true,
                        _ => false,
                    })
            });
            if class == prev {
                break;
            }
        }

        let num_classes = class.iter().copied().max().map_or(0, |c| c + 1);
        let mut rep = vec![usize::MAX; num_classes];
        for (state, &c) in class.iter().enumerate() {
            if rep[c] == usize::MAX {
                rep[c] = state;
            }
        }
        let transitions = rep.iter().enumerate().flat_map(|(c, &r)| {
            let class = &class;
            self.outgoing(r).iter().map(move |t| Transition {
                from: c,
                symbol: t.symbol,
                prob: t.prob,
                to: class[t.to],
            })
        });
        Self::new(num_classes, m, transitions.collect::<Vec<_>>())
    }

    /// Statistical complexity `H(π)` in bits.
    pub fn c_mu(&self) -> Result<T> {
        Ok(shannon_bits(self.stationary_distribution()?.0))
    }

    /// Topological complexity `log2(num_states)` in bits.
    pub fn d_mu(&self) -> Result<T> {
        if !self.is_irreducible() {
            return Err(Error::Reducible);
        }
        Ok(T::lit(self.num_states as f64).log2())
    }

    /// `H(S_0 | X_{-L:0})` in bits: uncertainty in the current state after
    /// observing `len` symbols emitted from the stationary ensemble.
    pub fn synchronization_entropy(&self, len: usize) -> Result<T> {
        if len == 0 {
            return Err(Error::InvalidConfig(
                "synchronization horizon must be at least 1".into(),
            ));
        }
        let pi = self.stationary_distribution()?;
        let starts: Vec<usize> = (0..self.num_states).collect();
        self.guard_words(&starts, len)?;
        let mut belief = pi.0.clone();
        let mut acc = T::zero();
        self.sync_recurse(&mut belief, len, &mut acc);
        Ok(acc.max(T::zero()))
    }

    /// `belief[k]` holds the joint probability of the word so far and state `k`.
    fn sync_recurse(&self, belief: &mut [T], remaining: usize, acc: &mut T) {
        if remaining == 0 {
            let total = belief.iter().fold(T::zero(), |a, &b| a + b);
            if total > T::zero() {
                let h = shannon_bits(belief.iter().map(|&b| b / total));
                *acc += total * h;
            }
            return;
        }
        let n = self.num_states;
        for x in 0..self.alphabet_size {
            let mut next = vec![T::zero(); n];
            let mut any = false;
            for (j, &b) in belief.iter().enumerate() {
                if b > T::zero() {
                    if let Some((p, to)) = self.step(j, x) {
                        next[to] += b * p;
                        any = true;
                    }
                }
            }
            if any {
                self.sync_recurse(&mut next, remaining - 1, acc);
            }
        }
    }

    /// Stable SHA-256 digest of the canonical transition list.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.num_states as u64).to_le_bytes());
        hasher.update((self.alphabet_size as u64).to_le_bytes());
        for t in &self.transitions {
            hasher.update((t.from as u64).to_le_bytes());
            hasher.update((t.symbol as u64).to_le_bytes());
            hasher.update((t.to as u64).to_le_bytes());
            hasher.update(t.prob.as_f64().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Parses the JSON process format (general or Markov shorthand).
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProcessFile = serde_json::from_str(text)?;
        file.into_process()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// General-form JSON description.
    pub fn to_file(&self) -> ProcessFile {
        ProcessFile::General {
            states: self.num_states,
            alphabet: self.alphabet_size,
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionRecord {
                    from: t.from,
                    symbol: t.symbol,
                    prob: t.prob.as_f64(),
                    to: t.to,
                })
                .collect(),
        }
    }
}

/// Greedy class assignment: each state joins the first earlier class whose
/// representative it is equivalent to.
fn assign_classes(n: usize, same: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut reps: Vec<usize> = Vec::new();
    let mut class = vec![0; n];
    for s in 0..n {
        match reps.iter().position(|&r| same(r, s)) {
            Some(c) => class[s] = c,
            None => {
                class[s] = reps.len();
                reps.push(s);
            }
        }
    }
    class
}

/// Stationary probability vector over states.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryDistribution<T>(pub Vec<T>);

impl<T> StationaryDistribution<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Outgoing probabilities of `state` sum to `total` instead of 1.
    Stochasticity { state: usize, total: f64 },
    /// More than one transition leaves `state` on `symbol`.
    Unifilarity { state: usize, symbol: usize },
    /// Some state cannot reach some other state.
    Reachability,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Stochasticity { state, total } => {
                write!(f, "outgoing probabilities of state {state} sum to {total}")
            }
            Violation::Unifilarity { state, symbol } => {
                write!(f, "state {state} has several transitions on symbol {symbol}")
            }
            Violation::Reachability => write!(f, "not every state is reachable from every other"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// On-disk process description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ProcessFile {
    /// `{"markov": [[...]]}` with entry `(y, x)` the probability of `x -> y`.
    Markov { markov: Vec<Vec<f64>> },
    General {
        states: usize,
        alphabet: usize,
        transitions: Vec<TransitionRecord>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub from: usize,
    pub symbol: usize,
    pub prob: f64,
    pub to: usize,
}

impl ProcessFile {
    pub fn into_process<T: Real>(self) -> Result<StochasticProcess<T>> {
        match self {
            ProcessFile::Markov { markov } => {
                let m: Vec<Vec<T>> = markov
                    .into_iter()
                    .map(|row| row.into_iter().map(T::lit).collect())
                    .collect();
                StochasticProcess::markov(&m)
            }
            ProcessFile::General {
                states,
                alphabet,
                transitions,
            } => StochasticProcess::new(
                states,
                alphabet,
                transitions.into_iter().map(|r| Transition {
                    from: r.from,
                    symbol: r.symbol,
                    prob: T::lit(r.prob),
                    to: r.to,
                }),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn quasi_cycle_is_valid_markov() {
        let q = models::quasi_cycle(0.3_f64);
        assert!(q.validate().is_valid());
        assert!(q.is_markov());
        let json = r#"{"markov": [[0.7, 0.0, 0.3], [0.3, 0.7, 0.0], [0.0, 0.3, 0.7]]}"#;
        let parsed = StochasticProcess::<f64>::from_json(json).unwrap();
        assert_eq!(parsed, q);
    }

    #[test]
    fn detects_stochasticity_violation() {
        let p = StochasticProcess::new(
            1,
            2,
            [
                Transition { from: 0, symbol: 0, prob: 0.5, to: 0 },
                Transition { from: 0, symbol: 1, prob: 0.4, to: 0 },
            ],
        )
        .unwrap();
        let report = p.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::Stochasticity { state: 0, .. }));
    }

    #[test]
    fn detects_unifilarity_violation() {
        let p = StochasticProcess::new(
            2,
            2,
            [
                Transition { from: 0, symbol: 1, prob: 0.5, to: 0 },
                Transition { from: 0, symbol: 1, prob: 0.5, to: 1 },
                Transition { from: 1, symbol: 0, prob: 1.0, to: 0 },
            ],
        )
        .unwrap();
        let report = p.validate();
        assert_eq!(
            report.violations,
            vec![Violation::Unifilarity { state: 0, symbol: 1 }]
        );
    }

    #[test]
    fn rejects_structural_errors() {
        let bad_state = StochasticProcess::new(
            1,
            1,
            [Transition { from: 0, symbol: 0, prob: 1.0, to: 3 }],
        );
        assert!(matches!(bad_state, Err(Error::InvalidProcess(_))));
        let bad_prob = StochasticProcess::new(
            1,
            1,
            [Transition { from: 0, symbol: 0, prob: 1.5, to: 0 }],
        );
        assert!(matches!(bad_prob, Err(Error::InvalidProcess(_))));
    }

    #[test]
    fn zero_probability_transitions_are_dropped() {
        let q = models::quasi_cycle(0.3_f64);
        assert_eq!(q.transitions().len(), 6);
        assert_eq!(q.step(0, 2), None);
    }

    #[test]
    fn stationary_examples() {
        for &p in &[0.1, 0.3, 0.77] {
            let pi = models::quasi_cycle(p).stationary_distribution().unwrap();
            for &v in pi.as_slice() {
                assert!(approx(v, 1.0 / 3.0, 1e-12));
            }
        }
        let sym = StochasticProcess::markov(&[vec![0.4, 0.6], vec![0.6, 0.4]]).unwrap();
        let pi = sym.stationary_distribution().unwrap();
        assert!(approx(pi.0[0], 0.5, 1e-12) && approx(pi.0[1], 0.5, 1e-12));

        let absorbing = StochasticProcess::markov(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(absorbing.stationary_distribution(), Err(Error::Reducible)));
    }

    #[test]
    fn stationary_power_iteration_path() {
        // A 70-state biased ring exercises the power-iteration branch.
        let n = 70;
        let mut m = vec![vec![0.0; n]; n];
        for x in 0..n {
            m[x][x] = 0.25;
            m[(x + 1) % n][x] = 0.75;
        }
        let p = StochasticProcess::markov(&m).unwrap();
        let pi = p.stationary_distribution().unwrap();
        for &v in pi.as_slice() {
            assert!(approx(v, 1.0 / n as f64, 1e-10));
        }
    }

    #[test]
    fn word_distribution_examples() {
        let q = models::quasi_cycle(0.3_f64);
        let w = q.word_distribution(0, 1).unwrap();
        assert_eq!(w.len(), 2);
        assert!(approx(w[&vec![0]], 0.7, 1e-15));
        assert!(approx(w[&vec![1]], 0.3, 1e-15));

        let w0 = q.word_distribution(2, 0).unwrap();
        assert_eq!(w0.len(), 1);
        assert_eq!(w0[&Vec::<usize>::new()], 1.0);

        let cycle = models::quasi_cycle(1.0_f64);
        let w3 = cycle.word_distribution(0, 3).unwrap();
        assert_eq!(w3.len(), 1);
        assert_eq!(w3[&vec![1, 2, 0]], 1.0);
    }

    #[test]
    fn merge_examples() {
        let identical = StochasticProcess::markov(&[vec![0.2, 0.2], vec![0.8, 0.8]]).unwrap();
        assert_eq!(identical.merge_equivalent_states(1).unwrap().num_states(), 1);

        let q = models::quasi_cycle(0.3_f64);
        for horizon in 1..=4 {
            assert_eq!(q.merge_equivalent_states(horizon).unwrap(), q);
        }

        let dup = models::quasi_cycle_with_duplicate(0.3_f64);
        assert_eq!(dup.num_states(), 4);
        // The duplicate's length-3 word distributions coincide with the original's.
        assert_eq!(
            dup.word_distribution(2, 3).unwrap().len(),
            dup.word_distribution(3, 3).unwrap().len()
        );
        for (w, p) in dup.word_distribution(2, 3).unwrap() {
            assert!(approx(p, dup.word_distribution(3, 3).unwrap()[&w], 1e-12));
        }
        let merged = dup.merge_equivalent_states(3).unwrap();
        assert_eq!(merged.num_states(), 3);
        assert!(merged.validate().is_valid());
        assert!(merged.is_markov());
    }

    #[test]
    fn complexity_examples() {
        let q = models::quasi_cycle(0.3_f64);
        assert!(approx(q.c_mu().unwrap(), 3f64.log2(), 1e-12));
        assert!(approx(q.d_mu().unwrap(), 3f64.log2(), 1e-15));

        let single = models::fair_coin::<f64>();
        assert_eq!(single.c_mu().unwrap(), 0.0);
        assert_eq!(single.d_mu().unwrap(), 0.0);

        // Columns (0.7, 0.3) and (0.1, 0.9): π ∝ (0.1, 0.3) = (0.25, 0.75).
        let biased = StochasticProcess::markov(&[vec![0.7, 0.1], vec![0.3, 0.9]]).unwrap();
        let pi = biased.stationary_distribution().unwrap();
        assert!(approx(pi.0[0], 0.25, 1e-12));
        let h = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert!(approx(biased.c_mu().unwrap(), h, 1e-12));
        assert!(approx(h, 0.81128, 1e-5));
        assert_eq!(biased.d_mu().unwrap(), 1.0);
    }

    #[test]
    fn synchronization_examples() {
        let biased = StochasticProcess::<f64>::markov(&[vec![0.7, 0.1], vec![0.3, 0.9]]).unwrap();
        assert!(biased.synchronization_entropy(1).unwrap().abs() < 1e-12);
        let q = models::quasi_cycle(0.3_f64);
        assert!(q.synchronization_entropy(4).unwrap().abs() < 1e-12);

        let hmm = models::shared_emission_hmm::<f64>();
        assert!(hmm.validate().is_valid());
        let profile: Vec<f64> = (1..=8)
            .map(|l| hmm.synchronization_entropy(l).unwrap())
            .collect();
        assert!(profile[0] > 0.1);
        for pair in profile.windows(2) {
            assert!(pair[1] < pair[0], "{profile:?}");
        }
    }

    #[test]
    fn enumeration_guard() {
        let coin = StochasticProcess::new(
            1,
            4,
            (0..4).map(|x| Transition { from: 0, symbol: x, prob: 0.25, to: 0 }),
        )
        .unwrap();
        assert!(matches!(
            coin.word_distribution(0, 12),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(
            coin.synchronization_entropy(12),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn single_precision_pipeline() {
        let q = models::quasi_cycle(0.3_f32);
        assert!(q.validate().is_valid());
        let c = q.c_mu().unwrap();
        assert!((c - 3f32.log2()).abs() < 1e-5);
    }
}
