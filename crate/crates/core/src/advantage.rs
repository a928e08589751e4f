//! Dimensional certificates for three-state Markov processes, phase
//! optimisation of the entropic memory, and detection of competing optima.
//!
//! A Markov memory state decomposes as `|σ_j⟩ = Σ_w √T_wj e^{iφ_wj} |w⟩|σ_w⟩`
//! with orthonormal `|w⟩|σ_w⟩`, so `α|σ_x⟩ + β|σ_y⟩ = |σ_z⟩` splits into one
//! scalar equation per symbol `w`:
//! `α√T_wx e^{iφ_wx} + β√T_wy e^{iφ_wy} = √T_wz e^{iφ_wz}`.
//! A solution exists iff `| |α|√T_wx − |β|√T_wy | ≤ √T_wz ≤ |α|√T_wx + |β|√T_wy`
//! for every `w`. Negative `α`, `β` only shift phases by `π`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gram::{memory_spectrum, overlaps, PhaseAssignment};
use crate::process::{StationaryDistribution, StochasticProcess};
use crate::scalar::{cis, modulus, neg_plogp, wrap_angle, Real};
use crate::SCHEMA_VERSION;

/// Slack allowed in the feasibility inequalities.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Largest accepted certificate residual `‖α|σ_x⟩ + β|σ_y⟩ − |σ_z⟩‖`.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Entropy gap required for strict orderings in [`AmbiguityReport`].
pub const AMBIGUITY_MARGIN: f64 = 1e-6;
/// Default points per free phase.
pub const DEFAULT_PHASE_GRID: usize = 24;
/// Coordinate descent stops once its step falls below this (radians).
pub const REFINE_MIN_STEP: f64 = 1e-6;
/// Upper bound on coordinate-descent sweeps.
pub const REFINE_MAX_SWEEPS: usize = 10_000;
/// Largest phase grid [`minimize_cq`] will enumerate.
pub const MAX_GRID_CELLS: u64 = 1 << 24;

const STANDARD_MAGNITUDES: [f64; 5] = [1.0, 2.0, 3.0, 0.5, 0.25];

/// Roles of the three states in a linear dependence `α|σ_x⟩ + β|σ_y⟩ = |σ_z⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Labeling {
    pub x: usize,
    pub y: usize,
    /// Dependent state.
    pub z: usize,
}

impl Labeling {
    /// One labeling per choice of dependent state, with `x < y`.
    pub const ALL: [Labeling; 3] = [
        Labeling { x: 1, y: 2, z: 0 },
        Labeling { x: 0, y: 2, z: 1 },
        Labeling { x: 0, y: 1, z: 2 },
    ];
}

/// Candidate `(α, β)` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaBetaSet {
    pairs: Vec<(f64, f64)>,
}

impl AlphaBetaSet {
    /// Exactly the given pairs, deduplicated and sorted.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in pairs {
            if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "alpha and beta must be finite and nonzero, got ({a}, {b})"
                )));
            }
            out.push((a, b));
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("empty alpha/beta set".into()));
        }
        out.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        out.dedup();
        Ok(Self { pairs: out })
    }

    /// Every pair in `magnitudes × magnitudes` with all four sign choices.
    pub fn square_with_signs(magnitudes: &[f64]) -> Result<Self> {
        let mut pairs = Vec::new();
        for &a in magnitudes {
            for &b in magnitudes {
                for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    pairs.push((sa * a.abs(), sb * b.abs()));
                }
            }
        }
        Self::new(pairs)
    }

    /// `α = β = 1` with sign flips.
    pub fn unit() -> Self {
        Self::square_with_signs(&[1.0]).expect("nonempty")
    }

    /// The values `{1, 2, 3, 1/2, 1/4}` squared into pairs, with sign flips.
    pub fn standard() -> Self {
        Self::square_with_signs(&STANDARD_MAGNITUDES).expect("nonempty")
    }

    /// [`Self::standard`] plus `points` log-spaced magnitudes in `[1/8, 8]`.
    pub fn continuous(points: usize) -> Self {
        let mut mags = STANDARD_MAGNITUDES.to_vec();
        if points == 1 {
            mags.push(1.0);
        } else {
            for i in 0..points {
                let t = i as f64 / (points - 1) as f64;
                mags.push(2f64.powf(-3.0 + 6.0 * t));
            }
        }
        Self::square_with_signs(&mags).expect("nonempty")
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::new(self.pairs.iter().chain(other.pairs.iter()).copied()).expect("nonempty")
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct `(|α|, |β|)`; feasibility depends only on these.
    pub fn magnitudes(&self) -> Vec<(f64, f64)> {
        let set: BTreeSet<(u64, u64)> = self
            .pairs
            .iter()
            .map(|&(a, b)| (a.abs().to_bits(), b.abs().to_bits()))
            .collect();
        set.into_iter()
            .map(|(a, b)| (f64::from_bits(a), f64::from_bits(b)))
            .collect()
    }
}

impl fmt::Display for AlphaBetaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `standard`, `unit`, `continuous[:N]` or a list `a:b,a:b,...`
/// (taken literally, without sign extension).
impl FromStr for AlphaBetaSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "standard" | "default" => return Ok(Self::standard()),
            "unit" => return Ok(Self::unit()),
            "continuous" => return Ok(Self::continuous(9)),
            _ => {}
        }
        if let Some(n) = s.strip_prefix("continuous:") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad point count in {s:?}")))?;
            return Ok(Self::continuous(n));
        }
        let mut pairs = Vec::new();
        for item in s.split(',') {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidConfig(format!("expected alpha:beta, got {item:?}")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad number {v:?}")))
            };
            pairs.push((parse(a)?, parse(b)?));
        }
        Self::new(pairs)
    }
}

/// `√T_wj` indexed `[w][j]`.
pub type SqrtColumns<T> = [[T; 3]; 3];

/// Checks all three symbol rows for dependent state `lab.z`, using `|α|`, `|β|`.
#[inline]
pub fn feasible_sqrt<T: Real>(s: &SqrtColumns<T>, lab: Labeling, alpha: T, beta: T) -> bool {
    let (a, b) = (alpha.abs(), beta.abs());
    let tol = T::lit(FEASIBILITY_TOL);
    s.iter().all(|row| {
        let u = a * row[lab.x];
        let v = b * row[lab.y];
        let c = row[lab.z];
        (u - v).abs() <= c + tol && c <= u + v + tol
    })
}

fn sqrt_columns<T: Real>(process: &StochasticProcess<T>) -> Result<SqrtColumns<T>> {
    if process.num_states() != 3 {
        return Err(Error::WrongArity {
            states: process.num_states(),
        });
    }
    process.ensure_valid()?;
    let t = process.markov_matrix()?;
    let mut s = [[T::zero(); 3]; 3];
    for w in 0..3 {
        for j in 0..3 {
            s[w][j] = t[w][j].max(T::zero()).sqrt();
        }
    }
    Ok(s)
}

/// A labeling and coefficient pair passing the feasibility inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeasibleChoice {
    pub labeling: Labeling,
    pub alpha: f64,
    pub beta: f64,
}

/// Every `(labeling, α, β)` for which the memory of a three-state Markov
/// process can be collapsed to two dimensions.
pub fn dimensional_feasibility<T: Real>(
    process: &StochasticProcess<T>,
    set: &AlphaBetaSet,
) -> Result<Vec<FeasibleChoice>> {
    let s = sqrt_columns(process)?;
    let mut out = Vec::new();
    for lab in Labeling::ALL {
        for &(alpha, beta) in set.pairs() {
            if feasible_sqrt(&s, lab, T::lit(alpha), T::lit(beta)) {
                out.push(FeasibleChoice {
                    labeling: lab,
                    alpha,
                    beta,
                });
            }
        }
    }
    Ok(out)
}

/// Phases realising `α|σ_x⟩ + β|σ_y⟩ = |σ_z⟩`, checked end to end.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionalCertificate<T: Real> {
    pub dependent_state: usize,
    pub labeling: Labeling,
    pub alpha: T,
    pub beta: T,
    pub phases: PhaseAssignment<T>,
    /// `‖α|σ_x⟩ + β|σ_y⟩ − |σ_z⟩‖`.
    pub residual: T,
    pub achieved_rank: usize,
    /// Weighted-Gram eigenvalues at the certificate phases, descending.
    pub eigenvalues: Vec<T>,
    /// Entropic memory at the certificate phases.
    pub cq_bits: T,
    /// Bit `w` set means `sin φ_wy` was taken negative.
    pub branch: u8,
}

impl<T: Real> DimensionalCertificate<T> {
    pub fn to_json(&self, process: &StochasticProcess<T>) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "process_hash": process.content_hash(),
            "dependent_state": self.dependent_state,
            "independent_states": [self.labeling.x, self.labeling.y],
            "alpha": self.alpha.as_f64(),
            "beta": self.beta.as_f64(),
            "phases": self.phases.to_json(),
            "residual": self.residual.as_f64(),
            "achieved_rank": self.achieved_rank,
            "dq_bits": (self.achieved_rank as f64).log2(),
            "cq_bits": self.cq_bits.as_f64(),
            "eigenvalues": self.eigenvalues.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "sign_branch": self.branch,
            "tolerances": {
                "feasibility": FEASIBILITY_TOL,
                "residual": CERTIFICATE_TOL,
                "rank": T::RANK_TOL,
            },
        })
    }
}

fn clamp_unit<T: Real>(v: T) -> T {
    v.max(-T::one()).min(T::one())
}

/// Phases and residual for one sign branch, gauge `φ_wx = 0`.
fn branch_phases<T: Real>(
    process: &StochasticProcess<T>,
    s: &SqrtColumns<T>,
    lab: Labeling,
    alpha: T,
    beta: T,
    branch: u8,
) -> Result<(PhaseAssignment<T>, T)> {
    let mut phases = PhaseAssignment::zeros(process);
    let mut residual_sq = T::zero();
    for (w, row) in s.iter().enumerate() {
        let (a, b, c) = (row[lab.x], row[lab.y], row[lab.z]);
        let mut phi_y = T::zero();
        if a > T::zero() && b > T::zero() {
            let cos = (c * c - alpha * alpha * a * a - beta * beta * b * b)
                / (T::lit(2.0) * alpha * beta * a * b);
            phi_y = clamp_unit(cos).acos();
            if branch & (1 << w) != 0 {
                phi_y = -phi_y;
            }
        }
        let sum = Complex::new(alpha * a, T::zero()) + cis(phi_y) * (beta * b);
        let phi_z = if c > T::zero() && modulus(sum) > T::zero() {
            sum.im.atan2(sum.re)
        } else {
            T::zero()
        };
        let d = sum - cis(phi_z) * c;
        residual_sq += d.re * d.re + d.im * d.im;
        if b > T::zero() {
            phases.set(w, lab.y, phi_y)?;
        }
        if c > T::zero() {
            phases.set(w, lab.z, phi_z)?;
        }
    }
    Ok((phases, residual_sq.sqrt()))
}

fn finish_certificate<T: Real>(
    process: &StochasticProcess<T>,
    pi: &StationaryDistribution<T>,
    lab: Labeling,
    alpha: T,
    beta: T,
    branch: u8,
    phases: PhaseAssignment<T>,
    residual: T,
) -> Result<DimensionalCertificate<T>> {
    let spec = memory_spectrum(&overlaps(process, &phases)?, pi, T::lit(T::RANK_TOL))?;
    Ok(DimensionalCertificate {
        dependent_state: lab.z,
        labeling: lab,
        alpha,
        beta,
        phases,
        residual,
        achieved_rank: spec.rank,
        eigenvalues: spec.eigenvalues,
        cq_bits: spec.cq_bits,
        branch,
    })
}

/// Recovers the collapsing phases for a feasible `(labeling, α, β)`,
/// returning the first sign branch whose residual passes.
pub fn recover_phases<T: Real>(
    process: &StochasticProcess<T>,
    lab: Labeling,
    alpha: T,
    beta: T,
) -> Result<DimensionalCertificate<T>> {
    let s = sqrt_columns(process)?;
    let pi = process.stationary_distribution()?;
    for branch in 0..8u8 {
        let (phases, residual) = branch_phases(process, &s, lab, alpha, beta, branch)?;
        if residual <= T::lit(CERTIFICATE_TOL) {
            return finish_certificate(process, &pi, lab, alpha, beta, branch, phases, residual);
        }
    }
    Err(Error::NoBranch)
}

/// Every distinct passing sign branch for one `(labeling, α, β)`.
pub fn certificate_branches<T: Real>(
    process: &StochasticProcess<T>,
    lab: Labeling,
    alpha: T,
    beta: T,
) -> Result<Vec<DimensionalCertificate<T>>> {
    let s = sqrt_columns(process)?;
    let pi = process.stationary_distribution()?;
    let mut seen: Vec<PhaseAssignment<T>> = Vec::new();
    let mut out = Vec::new();
    for branch in 0..8u8 {
        let (phases, residual) = branch_phases(process, &s, lab, alpha, beta, branch)?;
        if residual > T::lit(CERTIFICATE_TOL) || seen.contains(&phases) {
            continue;
        }
        seen.push(phases.clone());
        out.push(finish_certificate(process, &pi, lab, alpha, beta, branch, phases, residual)?);
    }
    Ok(out)
}

/// All certificates over the set and every sign branch.
pub fn all_certificates<T: Real>(
    process: &StochasticProcess<T>,
    set: &AlphaBetaSet,
) -> Result<Vec<DimensionalCertificate<T>>> {
    let mut out = Vec::new();
    for choice in dimensional_feasibility(process, set)? {
        out.extend(certificate_branches(
            process,
            choice.labeling,
            T::lit(choice.alpha),
            T::lit(choice.beta),
        )?);
    }
    Ok(out)
}

/// First certificate found over the set, if any.
pub fn certify<T: Real>(
    process: &StochasticProcess<T>,
    set: &AlphaBetaSet,
) -> Result<Option<DimensionalCertificate<T>>> {
    for choice in dimensional_feasibility(process, set)? {
        match recover_phases(process, choice.labeling, T::lit(choice.alpha), T::lit(choice.beta)) {
            Ok(cert) => return Ok(Some(cert)),
            Err(Error::NoBranch) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Applies the gauge `φ_xj ↦ φ_xj + ψ_x + θ_j − θ_λ(j,x)`, which leaves the
/// memory spectrum unchanged.
pub fn gauge_transform<T: Real>(
    process: &StochasticProcess<T>,
    phases: &PhaseAssignment<T>,
    psi: &[T],
    theta: &[T],
) -> Result<PhaseAssignment<T>> {
    if psi.len() != process.alphabet_size() || theta.len() != process.num_states() {
        return Err(Error::DimensionMismatch(format!(
            "gauge needs {} symbol and {} state shifts, got {} and {}",
            process.alphabet_size(),
            process.num_states(),
            psi.len(),
            theta.len()
        )));
    }
    let mut out = phases.clone();
    for t in process.transitions() {
        let v = phases.get(t.symbol, t.from) + psi[t.symbol] + theta[t.from] - theta[t.to];
        out.set(t.symbol, t.from, v)?;
    }
    Ok(out)
}

/// Split of the transitions into gauge-pinned (phase fixed to zero) and free.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GaugeFixing {
    /// `(symbol, state)` keys.
    pub pinned: Vec<(usize, usize)>,
    pub free: Vec<(usize, usize)>,
}

/// Pins transitions in `(state, symbol)` order whenever their gauge row is
/// independent of the rows already pinned. The pinned rows span the whole
/// gauge group, so every phase orbit meets the `pinned = 0` slice.
pub fn gauge_fixing<T: Real>(process: &StochasticProcess<T>) -> GaugeFixing {
    let m = process.alphabet_size();
    let n = process.num_states();
    let width = m + n;
    // Row-echelon basis with the pivot column of each row.
    let mut basis: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut pinned = Vec::new();
    let mut free = Vec::new();
    for t in process.transitions() {
        let mut row = vec![0.0; width];
        row[t.symbol] += 1.0;
        row[m + t.from] += 1.0;
        row[m + t.to] -= 1.0;
        for (pivot, b) in &basis {
            let f = row[*pivot];
            if f != 0.0 {
                row.iter_mut().zip(b).for_each(|(r, v)| *r -= f * v);
            }
        }
        match row.iter().position(|v| v.abs() > 1e-9) {
            Some(pivot) => {
                let p = row[pivot];
                row.iter_mut().for_each(|v| *v /= p);
                for (_, b) in basis.iter_mut() {
                    let f = b[pivot];
                    if f != 0.0 {
                        b.iter_mut().zip(&row).for_each(|(x, v)| *x -= f * v);
                    }
                }
                basis.push((pivot, row));
                pinned.push((t.symbol, t.from));
            }
            None => free.push((t.symbol, t.from)),
        }
    }
    GaugeFixing { pinned, free }
}

/// Eigenvalues of a 3×3 Hermitian matrix by the trigonometric solution of
/// its characteristic polynomial, descending.
pub fn hermitian3_eigenvalues<T: Real>(g: &[[Complex<T>; 3]; 3]) -> [T; 3] {
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    let q = (g[0][0].re + g[1][1].re + g[2][2].re) / three;
    let (a01, a02, a12) = (g[0][1], g[0][2], g[1][2]);
    let n01 = a01.norm_sqr();
    let n02 = a02.norm_sqr();
    let n12 = a12.norm_sqr();
    let p1 = n01 + n02 + n12;
    let d0 = g[0][0].re - q;
    let d1 = g[1][1].re - q;
    let d2 = g[2][2].re - q;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + two * p1;
    if p2 <= T::zero() {
        return [q, q, q];
    }
    let p = (p2 / T::lit(6.0)).sqrt();
    let det = d0 * d1 * d2 + two * (a01 * a12 * a02.conj()).re - d0 * n12 - d1 * n02 - d2 * n01;
    let r = clamp_unit(det / (two * p * p * p));
    let phi = r.acos() / three;
    let e1 = q + two * p * phi.cos();
    let e3 = q + two * p * (phi + T::two_pi() / three).cos();
    let e2 = three * q - e1 - e3;
    [e1, e2, e3]
}

/// Entropic memory as a function of the free phases.
enum Evaluator<'a, T: Real> {
    /// Three-state Markov: `√π_j √T_wj e^{iφ_wj}` without the phase, indexed `[w][j]`,
    /// plus the `(w, j)` slot of every free phase.
    Markov3 {
        amp: [[T; 3]; 3],
        base: [[T; 3]; 3],
        slots: Vec<(usize, usize)>,
    },
    General {
        process: &'a StochasticProcess<T>,
        pi: StationaryDistribution<T>,
        free: Vec<(usize, usize)>,
    },
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn new(
        process: &'a StochasticProcess<T>,
        pi: StationaryDistribution<T>,
        base: &PhaseAssignment<T>,
        free: &[(usize, usize)],
    ) -> Self {
        if process.num_states() == 3 && process.is_markov() {
            let mut amp = [[T::zero(); 3]; 3];
            let mut ph = [[T::zero(); 3]; 3];
            for t in process.transitions() {
                amp[t.symbol][t.from] = (t.prob * pi.0[t.from]).sqrt();
                ph[t.symbol][t.from] = base.get(t.symbol, t.from);
            }
            return Evaluator::Markov3 {
                amp,
                base: ph,
                slots: free.to_vec(),
            };
        }
        Evaluator::General {
            process,
            pi,
            free: free.to_vec(),
        }
    }

    fn eval(&self, angles: &[T]) -> Result<T> {
        match self {
            Evaluator::Markov3 { amp, base, slots } => {
                let mut ph = *base;
                for (&(w, j), &a) in slots.iter().zip(angles) {
                    ph[w][j] = a;
                }
                // Columns u_j[w] = √π_j √T_wj e^{iφ_wj}; G = U†U.
                let mut u = [[Complex::new(T::zero(), T::zero()); 3]; 3];
                for w in 0..3 {
                    for j in 0..3 {
                        u[w][j] = cis(ph[w][j]) * amp[w][j];
                    }
                }
                let mut g = [[Complex::new(T::zero(), T::zero()); 3]; 3];
                for j in 0..3 {
                    for k in j..3 {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for row in &u {
                            acc += row[j].conj() * row[k];
                        }
                        g[j][k] = acc;
                        g[k][j] = acc.conj();
                    }
                }
                let e = hermitian3_eigenvalues(&g);
                Ok(e.iter().fold(T::zero(), |h, &v| h + neg_plogp(v.max(T::zero()))))
            }
            Evaluator::General { process, pi, free } => {
                let phases = assignment(process, free, angles)?;
                let c = overlaps(process, &phases)?;
                Ok(memory_spectrum(&c, pi, T::lit(T::RANK_TOL))?.cq_bits)
            }
        }
    }
}

fn assignment<T: Real>(
    process: &StochasticProcess<T>,
    free: &[(usize, usize)],
    angles: &[T],
) -> Result<PhaseAssignment<T>> {
    PhaseAssignment::from_entries(process, free.iter().copied().zip(angles.iter().copied()))
}

/// Result of [`minimize_cq`].
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult<T: Real> {
    pub best_phases: PhaseAssignment<T>,
    pub cq_min_bits: T,
    /// Entropic memory at zero phases.
    pub cq_zero_bits: T,
    pub grid_resolution: usize,
    pub refine: bool,
    /// Coordinate-descent sweeps performed.
    pub refinement_iterations: usize,
    pub gauge: GaugeFixing,
    pub process_hash: String,
}

impl<T: Real> OptimizationResult<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "process_hash": self.process_hash,
            "cq_min_bits": self.cq_min_bits.as_f64(),
            "cq_zero_bits": self.cq_zero_bits.as_f64(),
            "advantage_bits": (self.cq_zero_bits - self.cq_min_bits).as_f64(),
            "best_phases": self.best_phases.to_json(),
            "grid_resolution": self.grid_resolution,
            "refine": self.refine,
            "refinement_iterations": self.refinement_iterations,
            "free_phases": self.gauge.free.iter().map(|(x, j)| format!("{x},{j}")).collect::<Vec<_>>(),
            "pinned_phases": self.gauge.pinned.iter().map(|(x, j)| format!("{x},{j}")).collect::<Vec<_>>(),
            "tolerances": {
                "rank": T::RANK_TOL,
                "fixed_point": T::FIXED_POINT_TOL,
                "refine_min_step": REFINE_MIN_STEP,
            },
        })
    }
}

fn grid_angles<T: Real>(mut index: u64, resolution: usize, k: usize) -> Vec<T> {
    let step = T::two_pi() / T::lit(resolution as f64);
    let r = resolution as u64;
    (0..k)
        .map(|_| {
            let d = index % r;
            index /= r;
            step * T::lit(d as f64)
        })
        .collect()
}

fn better<T: Real>(a: Option<(T, u64)>, b: Option<(T, u64)>) -> Option<(T, u64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

/// Minimises `C_q^φ` over gauge-inequivalent phases: exhaustive grid with
/// `resolution` points per free phase (zero phases included), optionally
/// followed by coordinate descent with halving steps. The result never
/// exceeds the zero-phase entropy.
pub fn minimize_cq<T: Real>(
    process: &StochasticProcess<T>,
    resolution: usize,
    refine: bool,
) -> Result<OptimizationResult<T>> {
    if resolution == 0 {
        return Err(Error::InvalidConfig("phase grid resolution must be at least 1".into()));
    }
    process.ensure_valid()?;
    let pi = process.stationary_distribution()?;
    let zeros = PhaseAssignment::zeros(process);
    let rank_tol = T::lit(T::RANK_TOL);
    let cq_zero = memory_spectrum(&overlaps(process, &zeros)?, &pi, rank_tol)?.cq_bits;

    let gauge = gauge_fixing(process);
    let k = gauge.free.len();
    let cells = (resolution as u64)
        .checked_pow(k as u32)
        .filter(|&c| c <= MAX_GRID_CELLS)
        .ok_or(Error::TooLarge {
            words: (resolution as f64).powi(k as i32).min(u64::MAX as f64) as u64,
            limit: MAX_GRID_CELLS,
        })?;
    let eval = Evaluator::new(process, pi.clone(), &zeros, &gauge.free);

    let best = (0..cells)
        .into_par_iter()
        .map(|idx| -> Result<Option<(T, u64)>> {
            Ok(Some((eval.eval(&grid_angles::<T>(idx, resolution, k))?, idx)))
        })
        .try_reduce(|| None, |a, b| Ok(better(a, b)))?;
    let (mut best_val, best_idx) = best.expect("grid has at least one cell");
    let mut x: Vec<T> = grid_angles(best_idx, resolution, k);

    let mut iterations = 0;
    if refine && k > 0 {
        let mut step = T::pi() / T::lit(resolution as f64);
        let min_step = T::lit(REFINE_MIN_STEP);
        while step >= min_step && iterations < REFINE_MAX_SWEEPS {
            iterations += 1;
            let mut improved = false;
            for i in 0..k {
                for sign in [T::one(), -T::one()] {
                    let mut trial = x.clone();
                    trial[i] = wrap_angle(trial[i] + sign * step);
                    let v = eval.eval(&trial)?;
                    if v < best_val {
                        best_val = v;
                        x = trial;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= T::lit(0.5);
            }
        }
    }

    let mut best_phases = assignment(process, &gauge.free, &x)?;
    let mut cq_min = memory_spectrum(&overlaps(process, &best_phases)?, &pi, rank_tol)?.cq_bits;
    if cq_min > cq_zero {
        best_phases = zeros;
        cq_min = cq_zero;
    }
    Ok(OptimizationResult {
        best_phases,
        cq_min_bits: cq_min,
        cq_zero_bits: cq_zero,
        grid_resolution: resolution,
        refine,
        refinement_iterations: iterations,
        gauge,
        process_hash: process.content_hash(),
    })
}

/// One cell of a two-phase scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhasePlanePoint {
    pub phi_a: f64,
    pub phi_b: f64,
    pub cq_bits: f64,
}

/// `C_q^φ` on a `resolution × resolution` grid over the phases of the two
/// given `(symbol, state)` transitions, all other phases zero.
pub fn phase_plane<T: Real>(
    process: &StochasticProcess<T>,
    a: (usize, usize),
    b: (usize, usize),
    resolution: usize,
) -> Result<Vec<PhasePlanePoint>> {
    if resolution == 0 {
        return Err(Error::InvalidConfig("phase grid resolution must be at least 1".into()));
    }
    let pi = process.stationary_distribution()?;
    let step = T::two_pi() / T::lit(resolution as f64);
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let (pa, pb) = (step * T::lit(i as f64), step * T::lit(j as f64));
            let phases = PhaseAssignment::from_entries(process, [(a, pa), (b, pb)])?;
            let s = memory_spectrum(&overlaps(process, &phases)?, &pi, T::lit(T::RANK_TOL))?;
            out.push(PhasePlanePoint {
                phi_a: pa.as_f64(),
                phi_b: pb.as_f64(),
                cq_bits: s.cq_bits.as_f64(),
            });
        }
    }
    Ok(out)
}

/// Entropic memory at zero phases, at the best dimension-collapsing phases,
/// and at the entropic optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguityReport<T: Real> {
    pub cq_zero: T,
    /// Smallest entropy over all certificates; `None` without a certificate.
    pub cq_at_dim_cert: Option<T>,
    pub cq_min: T,
    pub ambiguous: bool,
    pub certificate: Option<DimensionalCertificate<T>>,
    pub min_phases: PhaseAssignment<T>,
    pub certificates_tested: usize,
}

impl<T: Real> AmbiguityReport<T> {
    pub fn to_json(&self, process: &StochasticProcess<T>) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "process_hash": process.content_hash(),
            "cq_zero": self.cq_zero.as_f64(),
            "cq_at_dim_cert": self.cq_at_dim_cert.map(|v| v.as_f64()),
            "cq_min": self.cq_min.as_f64(),
            "ambiguous": self.ambiguous,
            "certificate": self.certificate.as_ref().map(|c| c.to_json(process)),
            "min_phases": self.min_phases.to_json(),
            "certificates_tested": self.certificates_tested,
            "margin": AMBIGUITY_MARGIN,
        })
    }
}

/// Flags `C^φ(certificate) > C_q > C^φ_min` with margin [`AMBIGUITY_MARGIN`].
/// The certificate entropy is the smallest over every certificate in the
/// set, so an ambiguity means no dimension-minimising model is also
/// entropy-optimal. Processes other than three-state Markov have no
/// certificate and are never ambiguous.
pub fn ambiguity_report<T: Real>(
    process: &StochasticProcess<T>,
    set: &AlphaBetaSet,
    resolution: usize,
    refine: bool,
) -> Result<AmbiguityReport<T>> {
    let opt = minimize_cq(process, resolution, refine)?;
    let certs = if process.num_states() == 3 && process.is_markov() {
        all_certificates(process, set)?
    } else {
        Vec::new()
    };
    let best_cert = certs
        .iter()
        .min_by(|a, b| a.cq_bits.partial_cmp(&b.cq_bits).unwrap_or(std::cmp::Ordering::Equal))
        .cloned();
    let (mut cq_min, mut min_phases) = (opt.cq_min_bits, opt.best_phases);
    if let Some(c) = &best_cert {
        if c.cq_bits < cq_min {
            cq_min = c.cq_bits;
            min_phases = c.phases.clone();
        }
    }
    let margin = T::lit(AMBIGUITY_MARGIN);
    let cq_zero = opt.cq_zero_bits;
    let cq_at = best_cert.as_ref().map(|c| c.cq_bits);
    let ambiguous = cq_at.is_some_and(|c| c > cq_zero + margin && cq_zero > cq_min + margin);
    Ok(AmbiguityReport {
        cq_zero,
        cq_at_dim_cert: cq_at,
        cq_min,
        ambiguous,
        certificate: best_cert,
        min_phases,
        certificates_tested: certs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::spectrum;
    use crate::models;
    use std::f64::consts::PI;

    fn quasi_oracle(p: f64) -> (f64, f64) {
        let a = (p * (1.0 - p)).sqrt();
        let h = |v: &[f64]| v.iter().map(|&x| if x > 0.0 { -x * x.log2() } else { 0.0 }).sum::<f64>();
        (
            h(&[(1.0 + 2.0 * a) / 3.0, (1.0 - a) / 3.0, (1.0 - a) / 3.0]),
            h(&[(1.0 + a) / 3.0, (1.0 + a) / 3.0, (1.0 - 2.0 * a) / 3.0]),
        )
    }

    #[test]
    fn closed_form_eigenvalues_match_nalgebra() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut g = [[Complex::new(0.0, 0.0); 3]; 3];
            for j in 0..3 {
                g[j][j] = Complex::new(rng.random_range(-1.0..1.0), 0.0);
                for k in j + 1..3 {
                    let z = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    g[j][k] = z;
                    g[k][j] = z.conj();
                }
            }
            let m = nalgebra::DMatrix::from_fn(3, 3, |j, k| g[j][k]);
            let mut reference: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let fast = hermitian3_eigenvalues(&g);
            for (a, b) in fast.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-9, "{fast:?} vs {reference:?}");
            }
        }
        let id = [[Complex::new(0.0, 0.0); 3]; 3];
        assert_eq!(hermitian3_eigenvalues(&id), [0.0; 3]);
    }

    #[test]
    fn quasi_cycle_gauge_leaves_one_phase() {
        let q = models::quasi_cycle(0.3_f64);
        let g = gauge_fixing(&q);
        assert_eq!(g.free, vec![(2, 2)]);
        assert_eq!(g.pinned.len(), 5);
        let full = models::random_markov::<f64, _>(3, 0.0, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        assert_eq!(gauge_fixing(&full).free.len(), 4);
    }

    use rand::SeedableRng;

    #[test]
    fn quasi_cycle_minimum_matches_oracle() {
        for p in [0.2, 0.3, 0.5] {
            let q = models::quasi_cycle(p);
            let (zero, flipped) = quasi_oracle(p);
            let r = minimize_cq(&q, DEFAULT_PHASE_GRID, true).unwrap();
            assert!((r.cq_zero_bits - zero).abs() < 1e-10);
            assert!((r.cq_min_bits - flipped).abs() < 1e-9, "p={p}: {} vs {flipped}", r.cq_min_bits);
            let gap = (r.best_phases.get(2, 1) - r.best_phases.get(2, 2)).abs();
            assert!((gap - PI).abs() < 1e-6);
        }
        let (zero, flipped) = quasi_oracle(0.3);
        assert!((zero - 1.305).abs() < 2e-3 && (flipped - 1.156).abs() < 5e-3);
    }

    #[test]
    fn grid_of_one_is_zero_phases() {
        let q = models::quasi_cycle(0.3_f64);
        let r = minimize_cq(&q, 1, false).unwrap();
        assert_eq!(r.cq_min_bits, r.cq_zero_bits);
        assert!(r.best_phases.iter().all(|(_, v)| v == 0.0));
        assert!(matches!(minimize_cq(&q, 0, false), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn single_state_costs_nothing() {
        let coin = models::fair_coin::<f64>();
        let r = minimize_cq(&coin, 8, true).unwrap();
        assert!(r.cq_min_bits.abs() < 1e-12);
    }

    #[test]
    fn non_markov_process_uses_general_path() {
        let hmm = models::shared_emission_hmm::<f64>();
        let r = minimize_cq(&hmm, 6, true).unwrap();
        assert!(r.cq_min_bits <= r.cq_zero_bits + 1e-12);
    }

    #[test]
    fn quasi_cycle_half_certificate() {
        let q = models::quasi_cycle(0.5_f64);
        let feas = dimensional_feasibility(&q, &AlphaBetaSet::new([(1.0, 1.0)]).unwrap()).unwrap();
        let lab = Labeling { x: 0, y: 1, z: 2 };
        assert!(feas.iter().any(|c| c.labeling == lab));
        let cert = recover_phases(&q, lab, 1.0, 1.0).unwrap();
        assert!(cert.residual < 1e-12);
        assert_eq!(cert.achieved_rank, 2);
        // symbol y from state y carries π; every other phase vanishes.
        for ((x, j), v) in cert.phases.iter() {
            let expected = if (x, j) == (1, 1) { PI } else { 0.0 };
            assert!((wrap_angle(v) - expected).abs() < 1e-12, "φ[{x},{j}] = {v}");
        }
        let s = spectrum(&q, &cert.phases).unwrap();
        assert!(s.eigenvalues[2] < 1e-8 * s.eigenvalues[0]);
    }

    #[test]
    fn deterministic_cycle_has_no_certificate() {
        let c = models::quasi_cycle(1.0_f64);
        let positive = AlphaBetaSet::new(
            AlphaBetaSet::standard().pairs().iter().copied().filter(|p| p.0 > 0.0 && p.1 > 0.0),
        )
        .unwrap();
        assert!(dimensional_feasibility(&c, &positive).unwrap().is_empty());
        assert!(certify(&c, &AlphaBetaSet::standard()).unwrap().is_none());
    }

    #[test]
    fn wrong_arity_is_reported() {
        let coin = models::fair_coin::<f64>();
        assert!(matches!(
            dimensional_feasibility(&coin, &AlphaBetaSet::unit()),
            Err(Error::WrongArity { states: 1 })
        ));
    }

    #[test]
    fn tight_inequality_still_certifies() {
        // Row w = 0 is tight: √T_0z = √T_0x + √T_0y.
        let t = vec![
            vec![0.25, 0.25, 1.0],
            vec![0.5, 0.25, 0.0],
            vec![0.25, 0.5, 0.0],
        ];
        let p = StochasticProcess::markov(&t).unwrap();
        let lab = Labeling { x: 0, y: 1, z: 2 };
        assert!(!feasible_sqrt(&sqrt_columns(&p).unwrap(), lab, 1.0, 1.0));
        let t = vec![
            vec![0.25, 0.25, 1.0],
            vec![0.375, 0.375, 0.0],
            vec![0.375, 0.375, 0.0],
        ];
        let p = StochasticProcess::markov(&t).unwrap();
        assert!(feasible_sqrt(&sqrt_columns(&p).unwrap(), lab, 1.0, 1.0));
        let cert = recover_phases(&p, lab, 1.0, 1.0).unwrap();
        assert!(cert.residual <= 1e-8);
    }

    #[test]
    fn alpha_beta_sets() {
        let d = AlphaBetaSet::standard();
        assert_eq!(d.len(), 100);
        assert_eq!(d.magnitudes().len(), 25);
        assert_eq!(AlphaBetaSet::unit().len(), 4);
        let c = AlphaBetaSet::continuous(5);
        assert!(c.magnitudes().len() > 25);
        let parsed: AlphaBetaSet = "1:1, 2:-0.5".parse().unwrap();
        assert_eq!(parsed.pairs(), &[(1.0, 1.0), (2.0, -0.5)]);
        assert!("1:0".parse::<AlphaBetaSet>().is_err());
        assert!("x".parse::<AlphaBetaSet>().is_err());
        assert_eq!("standard".parse::<AlphaBetaSet>().unwrap(), d);
    }

    #[test]
    fn slippage_line_admits_its_pair() {
        for (p, delta) in [(0.3_f64, 0.6209622947970366), (0.4, 0.563427280060847)] {
            let lhs = (p * delta * (1.0 - p)).sqrt() - p * p.sqrt();
            let rhs = (1.0 - p) * (1.0 - p - delta).sqrt();
            assert!((lhs - rhs).abs() < 1e-9);
            let proc = models::slippage_cycle(p, delta);
            let alpha = p.sqrt() / (1.0 - p - delta).sqrt();
            let beta = -p / ((1.0 - p) * (1.0 - p - delta)).sqrt();
            let lab = Labeling { x: 0, y: 1, z: 2 };
            assert!(feasible_sqrt(&sqrt_columns(&proc).unwrap(), lab, alpha, beta));
            let cert = recover_phases(&proc, lab, alpha, beta).unwrap();
            assert!(cert.residual < 1e-8);
            assert_eq!(cert.achieved_rank, 2);
        }
    }

    #[test]
    fn quasi_cycle_half_is_not_ambiguous() {
        let q = models::quasi_cycle(0.5_f64);
        let r = ambiguity_report(&q, &AlphaBetaSet::standard(), 12, true).unwrap();
        assert!(r.cq_at_dim_cert.is_some());
        assert!(!r.ambiguous);
        let cycle = models::quasi_cycle(1.0_f64);
        let r = ambiguity_report(&cycle, &AlphaBetaSet::standard(), 4, false).unwrap();
        assert!(r.cq_at_dim_cert.is_none() && !r.ambiguous);
    }

    #[test]
    fn phase_plane_minimum_on_antidiagonal() {
        let q = models::quasi_cycle(0.3_f64);
        let plane = phase_plane(&q, (2, 1), (2, 2), 12).unwrap();
        let best = plane
            .iter()
            .min_by(|a, b| a.cq_bits.partial_cmp(&b.cq_bits).unwrap())
            .unwrap();
        assert!(((best.phi_a - best.phi_b).abs() - PI).abs() < 2.0 * PI / 12.0 + 1e-12);
    }
}
