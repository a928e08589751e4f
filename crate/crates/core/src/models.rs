//! Named example processes and seeded random generators.

use rand::Rng;

use crate::process::{StochasticProcess, Transition};
use crate::scalar::Real;

/// Symmetric three-state quasi-cycle: each state stays put with probability
/// `1 - p` or advances cyclically (x → y → z → x) with probability `p`.
pub fn quasi_cycle<T: Real>(p: T) -> StochasticProcess<T> {
    let q = T::one() - p;
    let z = T::zero();
    StochasticProcess::markov(&[vec![q, z, p], vec![p, q, z], vec![z, p, q]])
        .expect("quasi-cycle matrix is well formed")
}

/// The quasi-cycle with state z split into two equivalent copies that hand
/// the self-loop back and forth. Not Markov, but merges back to the quasi-cycle.
pub fn quasi_cycle_with_duplicate<T: Real>(p: T) -> StochasticProcess<T> {
    let q = T::one() - p;
    let t = |from, symbol, prob, to| Transition { from, symbol, prob, to };
    StochasticProcess::new(
        4,
        3,
        [
            t(0, 0, q, 0),
            t(0, 1, p, 1),
            t(1, 1, q, 1),
            t(1, 2, p, 2),
            t(2, 0, p, 0),
            t(2, 2, q, 3),
            t(3, 0, p, 0),
            t(3, 2, q, 2),
        ],
    )
    .expect("duplicate quasi-cycle is well formed")
}

/// One memory state emitting a fair bit.
pub fn fair_coin<T: Real>() -> StochasticProcess<T> {
    let half = T::lit(0.5);
    StochasticProcess::new(
        1,
        2,
        [
            Transition { from: 0, symbol: 0, prob: half, to: 0 },
            Transition { from: 0, symbol: 1, prob: half, to: 0 },
        ],
    )
    .expect("fair coin is well formed")
}

/// Two states swapping deterministically while always emitting symbol 0.
/// The futures are identical, so the states are not distinguishable.
pub fn silent_alternator<T: Real>() -> StochasticProcess<T> {
    StochasticProcess::new(
        2,
        1,
        [
            Transition { from: 0, symbol: 0, prob: T::one(), to: 1 },
            Transition { from: 1, symbol: 0, prob: T::one(), to: 0 },
        ],
    )
    .expect("alternator is well formed")
}

/// Unifilar hidden Markov model whose states 0 and 1 emit the same fair-bit
/// distribution but lead to different futures, so a single observation does
/// not pin down the state.
pub fn shared_emission_hmm<T: Real>() -> StochasticProcess<T> {
    let t = |from, symbol, prob: f64, to| Transition { from, symbol, prob: T::lit(prob), to };
    StochasticProcess::new(
        3,
        2,
        [
            t(0, 0, 0.5, 0),
            t(0, 1, 0.5, 1),
            t(1, 0, 0.5, 2),
            t(1, 1, 0.5, 0),
            t(2, 0, 0.9, 0),
            t(2, 1, 0.1, 2),
        ],
    )
    .expect("shared-emission HMM is well formed")
}

/// Random irreducible Markov process with `n` states; each entry is zeroed
/// with probability `sparsity` before column normalization.
pub fn random_markov<T: Real, R: Rng + ?Sized>(
    n: usize,
    sparsity: f64,
    rng: &mut R,
) -> StochasticProcess<T> {
    loop {
        let mut cols = vec![vec![0.0f64; n]; n];
        for col in cols.iter_mut() {
            for v in col.iter_mut() {
                if !rng.random_bool(sparsity) {
                    *v = rng.random_range(0.01..1.0);
                }
            }
            let total: f64 = col.iter().sum();
            if total == 0.0 {
                col[rng.random_range(0..n)] = 1.0;
            } else {
                col.iter_mut().for_each(|v| *v /= total);
            }
        }
        let matrix: Vec<Vec<T>> = (0..n)
            .map(|y| (0..n).map(|x| T::lit(cols[x][y])).collect())
            .collect();
        let p = StochasticProcess::markov(&matrix).expect("generated matrix is well formed");
        if p.is_irreducible() {
            return p;
        }
    }
}

/// Random irreducible unifilar process with at most `n` states and an
/// alphabet of `m` symbols, reduced to its causal states.
pub fn random_unifilar<T: Real, R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> StochasticProcess<T> {
    loop {
        let mut transitions = Vec::new();
        for from in 0..n {
            let mut symbols: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.7)).collect();
            if symbols.is_empty() {
                symbols.push(rng.random_range(0..m));
            }
            let weights: Vec<f64> = symbols.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (&symbol, w) in symbols.iter().zip(weights) {
                transitions.push(Transition {
                    from,
                    symbol,
                    prob: T::lit(w / total),
                    to: rng.random_range(0..n),
                });
            }
        }
        let p = StochasticProcess::new(n, m, transitions).expect("generated process is well formed");
        if p.is_irreducible() {
            return p
                .merge_equivalent_states(n)
                .expect("merge of a valid process succeeds");
        }
    }
}

/// Quasi-cycle in which state x stays with probability `1 - p - δ`, advances
/// to y with probability `p` and slips ahead to z with probability `δ`;
/// y and z behave as in [`quasi_cycle`]. Requires `p + δ ≤ 1`.
pub fn slippage_cycle<T: Real>(p: T, delta: T) -> StochasticProcess<T> {
    let q = T::one() - p;
    let z = T::zero();
    StochasticProcess::markov(&[
        vec![q - delta, z, p],
        vec![p, q, z],
        vec![delta, p, q],
    ])
    .expect("slippage-cycle matrix is well formed")
}
