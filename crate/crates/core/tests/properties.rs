use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmemopt_core::advantage::{
    all_certificates, dimensional_feasibility, gauge_transform, minimize_cq, AlphaBetaSet,
    Labeling,
};
use qmemopt_core::gram::{overlaps, spectrum, PhaseAssignment};
use qmemopt_core::models;
use qmemopt_core::process::StochasticProcess;
use qmemopt_core::scalar::modulus;
use qmemopt_core::sweep::{cell_process, sample_angles, SamplingMeasure};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_process(seed: u64) -> StochasticProcess<f64> {
    let mut r = rng(seed);
    if r.random_bool(0.5) {
        let n = r.random_range(2..=4);
        models::random_markov(n, 0.3, &mut r)
    } else {
        let n = r.random_range(2..=4);
        let m = r.random_range(2..=3);
        models::random_unifilar(n, m, &mut r)
    }
}

fn permute(p: &StochasticProcess<f64>, perm: [usize; 3]) -> StochasticProcess<f64> {
    // New state perm[j] plays old state j; symbols follow states.
    let t = p.markov_matrix().unwrap();
    let mut out = vec![vec![0.0; 3]; 3];
    for w in 0..3 {
        for j in 0..3 {
            out[perm[w]][perm[j]] = t[w][j];
        }
    }
    StochasticProcess::markov(&out).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_distribution_is_fixed_and_normalised(seed in any::<u64>()) {
        let p = random_process(seed);
        let pi = p.stationary_distribution().unwrap();
        let total: f64 = pi.0.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let m = p.state_transition_matrix();
        for k in 0..p.num_states() {
            let next: f64 = (0..p.num_states()).map(|j| m[(k, j)] * pi.0[j]).sum();
            prop_assert!((next - pi.0[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn overlaps_are_valid_gram_matrices(seed in any::<u64>()) {
        let p = random_process(seed);
        let phases = PhaseAssignment::random(&p, &mut rng(seed ^ 1));
        overlaps(&p, &phases).unwrap().check().unwrap();
    }

    #[test]
    fn phases_never_increase_overlaps(seed in any::<u64>()) {
        let p = random_process(seed);
        let c0 = overlaps(&p, &PhaseAssignment::zeros(&p)).unwrap();
        let phases = PhaseAssignment::random(&p, &mut rng(seed ^ 2));
        let c = overlaps(&p, &phases).unwrap();
        for (a, b) in c.0.iter().zip(c0.0.iter()) {
            prop_assert!(modulus(*a) <= b.re + 1e-10);
        }
    }

    #[test]
    fn gauge_shifts_preserve_spectrum(seed in any::<u64>()) {
        let p = random_process(seed);
        let mut r = rng(seed ^ 3);
        let phases = PhaseAssignment::random(&p, &mut r);
        let psi: Vec<f64> = (0..p.alphabet_size()).map(|_| r.random_range(0.0..6.3)).collect();
        let theta: Vec<f64> = (0..p.num_states()).map(|_| r.random_range(0.0..6.3)).collect();
        let shifted = gauge_transform(&p, &phases, &psi, &theta).unwrap();
        let a = spectrum(&p, &phases).unwrap();
        let b = spectrum(&p, &shifted).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_and_rank_bounded_by_classical(seed in any::<u64>()) {
        let p = random_process(seed);
        let s = spectrum(&p, &PhaseAssignment::random(&p, &mut rng(seed ^ 4))).unwrap();
        prop_assert!(s.cq_bits <= p.c_mu().unwrap() + 1e-9);
        prop_assert!(s.dq_bits <= p.d_mu().unwrap() + 1e-12);
        prop_assert!(s.cq_bits <= s.dq_bits + 1e-9);
    }

    #[test]
    fn minimiser_never_exceeds_zero_phases(seed in any::<u64>()) {
        let a = sample_angles(SamplingMeasure::Angles, seed, 0);
        let p = cell_process(&a);
        prop_assume!(p.is_irreducible());
        let r = minimize_cq(&p, 4, true).unwrap();
        prop_assert!(r.cq_min_bits <= r.cq_zero_bits + 1e-12);
        let s = spectrum(&p, &r.best_phases).unwrap();
        prop_assert!((s.cq_bits - r.cq_min_bits).abs() < 1e-12);
    }

    #[test]
    fn certificates_collapse_the_memory(seed in any::<u64>()) {
        let a = sample_angles(SamplingMeasure::Angles, seed, 1);
        let p = cell_process(&a);
        prop_assume!(p.is_irreducible());
        for c in all_certificates(&p, &AlphaBetaSet::standard()).unwrap() {
            prop_assert!(c.residual <= 1e-8);
            prop_assert!(c.achieved_rank < 3);
            let s = spectrum(&p, &c.phases).unwrap();
            prop_assert!(s.eigenvalues[2] <= 1e-8 * s.eigenvalues[0]);
        }
    }

    #[test]
    fn feasibility_is_permutation_covariant(seed in any::<u64>(), perm_idx in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[perm_idx];
        let a = sample_angles(SamplingMeasure::Angles, seed, 2);
        let p = cell_process(&a);
        let q = permute(&p, perm);
        let set = AlphaBetaSet::standard();
        let canon = |l: Labeling, alpha: f64, beta: f64| {
            if l.x < l.y { (l.z, l.x, l.y, alpha, beta) } else { (l.z, l.y, l.x, beta, alpha) }
        };
        let mut mapped: Vec<_> = dimensional_feasibility(&p, &set)
            .unwrap()
            .into_iter()
            .map(|c| {
                let l = c.labeling;
                canon(Labeling { x: perm[l.x], y: perm[l.y], z: perm[l.z] }, c.alpha, c.beta)
            })
            .collect();
        let mut direct: Vec<_> = dimensional_feasibility(&q, &set)
            .unwrap()
            .into_iter()
            .map(|c| canon(c.labeling, c.alpha, c.beta))
            .collect();
        let key = |v: &(usize, usize, usize, f64, f64)| (v.0, v.1, v.2, v.3.to_bits(), v.4.to_bits());
        mapped.sort_by_key(key);
        direct.sort_by_key(key);
        prop_assert_eq!(mapped, direct);
    }

    #[test]
    fn larger_sets_never_shrink_feasibility(seed in any::<u64>()) {
        let a = sample_angles(SamplingMeasure::Angles, seed, 3);
        let p = cell_process(&a);
        let base = AlphaBetaSet::standard();
        let wider = base.union(&AlphaBetaSet::continuous(7));
        let small = dimensional_feasibility(&p, &base).unwrap();
        let large = dimensional_feasibility(&p, &wider).unwrap();
        for c in &small {
            prop_assert!(large.contains(c));
        }
    }

    #[test]
    fn merging_preserves_word_statistics(seed in any::<u64>()) {
        let p = random_process(seed);
        let merged = p.merge_equivalent_states(p.num_states()).unwrap();
        let pi = p.stationary_distribution().unwrap();
        let mpi = merged.stationary_distribution().unwrap();
        let mix = |proc: &StochasticProcess<f64>, w: &[f64]| {
            let mut acc = std::collections::BTreeMap::new();
            for (j, &wj) in w.iter().enumerate() {
                for (word, pr) in proc.word_distribution(j, 3).unwrap() {
                    *acc.entry(word).or_insert(0.0) += wj * pr;
                }
            }
            acc
        };
        let a = mix(&p, &pi.0);
        let b = mix(&merged, &mpi.0);
        for (word, pa) in &a {
            prop_assert!((pa - b.get(word).copied().unwrap_or(0.0)).abs() < 1e-10);
        }
    }
}

#[test]
fn f32_pipeline_tracks_f64() {
    let q64 = models::quasi_cycle(0.3_f64);
    let q32 = models::quasi_cycle(0.3_f32);
    let s64 = spectrum(&q64, &PhaseAssignment::zeros(&q64)).unwrap();
    let s32 = spectrum(&q32, &PhaseAssignment::zeros(&q32)).unwrap();
    assert!((s64.cq_bits - s32.cq_bits as f64).abs() < 1e-5);
    let r32 = minimize_cq(&q32, 8, true).unwrap();
    assert!((r32.cq_min_bits as f64 - 1.1556).abs() < 1e-3);
}
