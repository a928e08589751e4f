//! Sweeps over three-state Markov processes.
//!
//! Each state's outgoing distribution is the squared direction cosines of a
//! point `(cos θ, sin θ cos ψ, sin θ sin ψ)` in the positive octant of the
//! unit sphere, `θ, ψ ∈ [0, π/2]`. The grid is uniform in both angles and
//! shares the same pole for every state; a cell is one point per state.
//! Cells whose chain is reducible have no unique stationary distribution
//! and are skipped; rates are taken over the cells actually tested.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::advantage::{feasible_sqrt, minimize_cq, AlphaBetaSet, Labeling, SqrtColumns};
use crate::error::{Error, Result};
use crate::process::StochasticProcess;
use crate::SCHEMA_VERSION;

/// `C^φ_min < C_q − ENTROPIC_MARGIN` counts as an entropic advantage.
pub const ENTROPIC_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub steps_per_edge: usize,
    pub alpha_beta_set: AlphaBetaSet,
    pub entropic_samples: usize,
    pub phase_grid: usize,
    pub refine: bool,
    pub seed: u64,
    pub measure: SamplingMeasure,
}

/// Distribution of each state's octant point in the entropic sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMeasure {
    /// `θ, ψ` independent and uniform in `[0, π/2]`, matching the grid.
    #[default]
    Angles,
    /// Uniform on the octant surface of the unit sphere.
    Surface,
    /// Outgoing probabilities uniform on the simplex.
    Simplex,
}

impl fmt::Display for SamplingMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMeasure::Angles => "angles",
            SamplingMeasure::Surface => "surface",
            SamplingMeasure::Simplex => "simplex",
        })
    }
}

impl FromStr for SamplingMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angles" => Ok(SamplingMeasure::Angles),
            "surface" => Ok(SamplingMeasure::Surface),
            "simplex" => Ok(SamplingMeasure::Simplex),
            _ => Err(Error::InvalidConfig(format!(
                "unknown sampling measure {s:?} (angles, surface, simplex)"
            ))),
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            steps_per_edge: 20,
            alpha_beta_set: AlphaBetaSet::standard(),
            entropic_samples: 2000,
            phase_grid: 16,
            refine: true,
            seed: 0,
            measure: SamplingMeasure::Angles,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_edge < 2 {
            return Err(Error::InvalidConfig("steps_per_edge must be at least 2".into()));
        }
        if self.entropic_samples < 1 {
            return Err(Error::InvalidConfig("entropic_samples must be at least 1".into()));
        }
        if self.phase_grid < 1 {
            return Err(Error::InvalidConfig("phase_grid must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feasible-cell count for one `(|α|, |β|)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCount {
    pub alpha: f64,
    pub beta: f64,
    pub feasible: u64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub mode: &'static str,
    pub steps_per_edge: usize,
    pub seed: u64,
    pub total_cells: u64,
    /// Reducible cells, excluded from every rate.
    pub skipped_cells: u64,
    pub tested_cells: u64,
    pub dimensional_feasible_count: u64,
    pub dimensional_rate: f64,
    /// Per-magnitude-pair counts; the set-level count is feasibility under any pair.
    pub pair_counts: Vec<PairCount>,
    pub entropic_tested: u64,
    pub entropic_advantage_count: u64,
    pub entropic_rate: f64,
    pub phase_grid: usize,
    pub measure: SamplingMeasure,
    pub runtime_seconds: f64,
}

impl SweepReport {
    fn empty(mode: &'static str, config: &SweepConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mode,
            steps_per_edge: config.steps_per_edge,
            seed: config.seed,
            total_cells: 0,
            skipped_cells: 0,
            tested_cells: 0,
            dimensional_feasible_count: 0,
            dimensional_rate: 0.0,
            pair_counts: Vec::new(),
            entropic_tested: 0,
            entropic_advantage_count: 0,
            entropic_rate: 0.0,
            phase_grid: config.phase_grid,
            measure: config.measure,
            runtime_seconds: 0.0,
        }
    }

    /// Rate of the pair `(|α|, |β|)`, if it was swept.
    pub fn pair_rate(&self, alpha: f64, beta: f64) -> Option<f64> {
        self.pair_counts
            .iter()
            .find(|p| p.alpha == alpha.abs() && p.beta == beta.abs())
            .map(|p| p.rate)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Angle `i` of `steps` evenly spaced values in `[0, π/2]`.
pub fn grid_angle(i: usize, steps: usize) -> f64 {
    FRAC_PI_2 * i as f64 / (steps - 1) as f64
}

/// Unit vector with nonnegative entries; trigonometric values at the grid
/// endpoints are snapped to exact zeros and ones.
pub fn octant_point(theta: f64, psi: f64) -> [f64; 3] {
    let snap = |v: f64| {
        if v.abs() < 1e-15 {
            0.0
        } else if (v - 1.0).abs() < 1e-15 {
            1.0
        } else {
            v
        }
    };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    let (st, ct, sp, cp) = (snap(st), snap(ct), snap(sp), snap(cp));
    [ct, st * cp, st * sp]
}

/// The six angles `(θ_0, ψ_0, θ_1, ψ_1, θ_2, ψ_2)` of one cell.
pub type CellAngles = [f64; 6];

/// Column `j` is `point_j`; `√T_wj = point_j[w]`.
fn sqrt_columns(angles: &CellAngles) -> SqrtColumns<f64> {
    let mut s = [[0.0; 3]; 3];
    for j in 0..3 {
        let p = octant_point(angles[2 * j], angles[2 * j + 1]);
        for w in 0..3 {
            s[w][j] = p[w];
        }
    }
    s
}

/// `T_wj = point_j[w]²` as a Markov process.
pub fn cell_process(angles: &CellAngles) -> StochasticProcess<f64> {
    let s = sqrt_columns(angles);
    let t: Vec<Vec<f64>> = (0..3).map(|w| (0..3).map(|j| s[w][j] * s[w][j]).collect()).collect();
    StochasticProcess::markov(&t).expect("octant columns are stochastic")
}

/// Strong connectivity of the three-state graph `j → w` where `√T_wj > 0`.
fn irreducible(s: &SqrtColumns<f64>) -> bool {
    let reach = |forward: bool| {
        let mut seen = [true, false, false];
        for _ in 0..2 {
            for j in 0..3 {
                for w in 0..3 {
                    let edge = if forward { s[w][j] } else { s[j][w] };
                    if seen[j] && edge > 0.0 {
                        seen[w] = true;
                    }
                }
            }
        }
        seen.iter().all(|&v| v)
    };
    reach(true) && reach(false)
}

/// Angles of grid cell `id` in `0..steps^6`.
pub fn cell_angles(id: u64, steps: usize) -> CellAngles {
    let s = steps as u64;
    let mut rest = id;
    let mut idx = [0usize; 6];
    for slot in idx.iter_mut().rev() {
        *slot = (rest % s) as usize;
        rest /= s;
    }
    idx.map(|i| grid_angle(i, steps))
}

/// Every grid cell in id order, as `(id, angles, process)`.
pub fn enumerate_octant_grid(
    steps: usize,
) -> impl Iterator<Item = (u64, CellAngles, StochasticProcess<f64>)> {
    let total = (steps as u64).pow(6);
    (0..total).map(move |id| {
        let a = cell_angles(id, steps);
        (id, a, cell_process(&a))
    })
}

/// One row of the dimensional sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionalRow {
    pub cell_id: u64,
    pub angles: CellAngles,
    pub skipped: bool,
    /// Per magnitude pair, in [`SweepReport::pair_counts`] order.
    pub feasible: Vec<bool>,
}

impl DimensionalRow {
    pub fn any_feasible(&self) -> bool {
        self.feasible.iter().any(|&f| f)
    }
}

/// Header matching [`DimensionalRow::record`].
pub fn dimensional_header(pairs: &[(f64, f64)]) -> Vec<String> {
    let mut h: Vec<String> = ["schema_version", "cell_id", "theta0", "psi0", "theta1", "psi1", "theta2", "psi2", "skipped"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(pairs.iter().map(|(a, b)| format!("feasible_{a}_{b}")));
    h.push("feasible_any".into());
    h
}

impl DimensionalRow {
    pub fn record(&self) -> Vec<String> {
        let mut r = vec![SCHEMA_VERSION.to_string(), self.cell_id.to_string()];
        r.extend(self.angles.iter().map(|a| format!("{a:.17}")));
        r.push((self.skipped as u8).to_string());
        r.extend(self.feasible.iter().map(|&f| (f as u8).to_string()));
        r.push((self.any_feasible() as u8).to_string());
        r
    }
}

fn evaluate_cell(id: u64, steps: usize, pairs: &[(f64, f64)]) -> DimensionalRow {
    let angles = cell_angles(id, steps);
    let s = sqrt_columns(&angles);
    if !irreducible(&s) {
        return DimensionalRow {
            cell_id: id,
            angles,
            skipped: true,
            feasible: vec![false; pairs.len()],
        };
    }
    let feasible = pairs
        .iter()
        .map(|&(a, b)| Labeling::ALL.iter().any(|&lab| feasible_sqrt(&s, lab, a, b)))
        .collect();
    DimensionalRow {
        cell_id: id,
        angles,
        skipped: false,
        feasible,
    }
}

#[derive(Clone, Default)]
struct Tally {
    skipped: u64,
    any: u64,
    pairs: Vec<u64>,
}

impl Tally {
    fn add(&mut self, row: &DimensionalRow) {
        if self.pairs.len() < row.feasible.len() {
            self.pairs.resize(row.feasible.len(), 0);
        }
        if row.skipped {
            self.skipped += 1;
            return;
        }
        self.any += row.any_feasible() as u64;
        for (c, &f) in self.pairs.iter_mut().zip(&row.feasible) {
            *c += f as u64;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        if self.pairs.len() < other.pairs.len() {
            self.pairs.resize(other.pairs.len(), 0);
        }
        self.skipped += other.skipped;
        self.any += other.any;
        for (a, b) in self.pairs.iter_mut().zip(other.pairs) {
            *a += b;
        }
        self
    }
}

/// Feasibility of every grid cell under every magnitude pair of the set.
pub fn sweep_dimensional(config: &SweepConfig) -> Result<SweepReport> {
    sweep_dimensional_with(config, |_| Ok(()))
}

/// As [`sweep_dimensional`], handing each block of rows to `sink` in cell-id
/// order. Blocks are computed in parallel; counts are order-independent.
pub fn sweep_dimensional_with(
    config: &SweepConfig,
    mut sink: impl FnMut(&[DimensionalRow]) -> Result<()>,
) -> Result<SweepReport> {
    config.validate()?;
    let start = Instant::now();
    let steps = config.steps_per_edge;
    let pairs = config.alpha_beta_set.magnitudes();
    let total = (steps as u64).pow(6);
    let block = (steps as u64).pow(4);
    let mut tally = Tally {
        pairs: vec![0; pairs.len()],
        ..Tally::default()
    };
    for b in 0..total / block {
        let rows: Vec<DimensionalRow> = (b * block..(b + 1) * block)
            .into_par_iter()
            .map(|id| evaluate_cell(id, steps, &pairs))
            .collect();
        let part = rows.par_iter().fold(Tally::default, |mut t, r| {
            t.add(r);
            t
        });
        tally = part.reduce(Tally::default, Tally::merge).merge(tally);
        sink(&rows)?;
    }
    let mut report = SweepReport::empty("dimensional", config);
    report.total_cells = total;
    report.skipped_cells = tally.skipped;
    report.tested_cells = total - tally.skipped;
    report.dimensional_feasible_count = tally.any;
    report.dimensional_rate = ratio(tally.any, report.tested_cells);
    report.pair_counts = pairs
        .iter()
        .zip(&tally.pairs)
        .map(|(&(alpha, beta), &feasible)| PairCount {
            alpha,
            beta,
            feasible,
            rate: ratio(feasible, report.tested_cells),
        })
        .collect();
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Angles of entropic sample `index` under `measure`, drawn from stream
/// `index` of a generator seeded with `seed`.
pub fn sample_angles(measure: SamplingMeasure, seed: u64, index: u64) -> CellAngles {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut out = [0.0; 6];
    for j in 0..3 {
        let (theta, psi) = match measure {
            SamplingMeasure::Angles => (
                rng.random_range(0.0..=FRAC_PI_2),
                rng.random_range(0.0..=FRAC_PI_2),
            ),
            SamplingMeasure::Surface => {
                let v: [f64; 3] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal).abs());
                point_angles(v)
            }
            SamplingMeasure::Simplex => {
                let v: [f64; 3] = std::array::from_fn(|_| rng.sample::<f64, _>(Exp1).sqrt());
                point_angles(v)
            }
        };
        out[2 * j] = theta;
        out[2 * j + 1] = psi;
    }
    out
}

/// Spherical angles of the direction of a nonnegative vector.
fn point_angles(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    ((v[0] / r).clamp(0.0, 1.0).acos(), v[2].atan2(v[1]))
}

/// One row of the entropic sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropicRow {
    pub sample_id: u64,
    /// `None` for injected processes.
    pub angles: Option<CellAngles>,
    pub skipped: bool,
    pub cq_zero: f64,
    pub cq_min: f64,
    pub advantage: bool,
}

pub const ENTROPIC_HEADER: [&str; 12] = [
    "schema_version", "sample_id", "theta0", "psi0", "theta1", "psi1", "theta2", "psi2", "skipped", "cq", "cq_phi_min", "advantage",
];

impl EntropicRow {
    pub fn record(&self) -> Vec<String> {
        let mut r = vec![SCHEMA_VERSION.to_string(), self.sample_id.to_string()];
        match self.angles {
            Some(a) => r.extend(a.iter().map(|v| format!("{v:.17}"))),
            None => r.extend(std::iter::repeat_n(String::new(), 6)),
        }
        r.push((self.skipped as u8).to_string());
        if self.skipped {
            r.extend([String::new(), String::new()]);
        } else {
            r.push(format!("{:.17}", self.cq_zero));
            r.push(format!("{:.17}", self.cq_min));
        }
        r.push((self.advantage as u8).to_string());
        r
    }
}

fn entropic_row(
    sample_id: u64,
    angles: Option<CellAngles>,
    process: &StochasticProcess<f64>,
    config: &SweepConfig,
) -> Result<EntropicRow> {
    if !process.is_irreducible() {
        return Ok(EntropicRow {
            sample_id,
            angles,
            skipped: true,
            cq_zero: f64::NAN,
            cq_min: f64::NAN,
            advantage: false,
        });
    }
    let r = minimize_cq(process, config.phase_grid, config.refine)?;
    Ok(EntropicRow {
        sample_id,
        angles,
        skipped: false,
        cq_zero: r.cq_zero_bits,
        cq_min: r.cq_min_bits,
        advantage: r.cq_min_bits < r.cq_zero_bits - ENTROPIC_MARGIN,
    })
}

/// Seeded random processes, each tested with [`minimize_cq`].
pub fn sample_entropic(config: &SweepConfig) -> Result<SweepReport> {
    entropic_sweep(config, &[], |_| Ok(()))
}

/// [`sample_entropic`] with extra processes appended after the random
/// samples (ids continue the sequence), streaming rows to `sink` in id order.
pub fn entropic_sweep(
    config: &SweepConfig,
    injected: &[StochasticProcess<f64>],
    mut sink: impl FnMut(&[EntropicRow]) -> Result<()>,
) -> Result<SweepReport> {
    config.validate()?;
    let start = Instant::now();
    let n = config.entropic_samples as u64;
    let mut rows: Vec<EntropicRow> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = sample_angles(config.measure, config.seed, i);
            entropic_row(i, Some(a), &cell_process(&a), config)
        })
        .collect::<Result<_>>()?;
    for (k, p) in injected.iter().enumerate() {
        if p.num_states() != 3 || !p.is_markov() {
            return Err(Error::InvalidConfig(
                "injected processes must be three-state Markov".into(),
            ));
        }
        rows.push(entropic_row(n + k as u64, None, p, config)?);
    }
    sink(&rows)?;
    let mut report = SweepReport::empty("entropic", config);
    report.total_cells = rows.len() as u64;
    report.skipped_cells = rows.iter().filter(|r| r.skipped).count() as u64;
    report.tested_cells = report.total_cells - report.skipped_cells;
    report.entropic_tested = report.tested_cells;
    report.entropic_advantage_count = rows.iter().filter(|r| r.advantage).count() as u64;
    report.entropic_rate = ratio(report.entropic_advantage_count, report.entropic_tested);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs [`sweep_dimensional`] and writes one CSV row per cell.
pub fn write_dimensional_csv<W: std::io::Write>(config: &SweepConfig, out: W) -> Result<SweepReport> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dimensional_header(&config.alpha_beta_set.magnitudes()))?;
    let report = sweep_dimensional_with(config, |rows| {
        for r in rows {
            w.write_record(r.record())?;
        }
        Ok(())
    })?;
    w.flush()?;
    Ok(report)
}

/// Runs [`entropic_sweep`] and writes one CSV row per sample.
pub fn write_entropic_csv<W: std::io::Write>(
    config: &SweepConfig,
    injected: &[StochasticProcess<f64>],
    out: W,
) -> Result<SweepReport> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENTROPIC_HEADER)?;
    let report = entropic_sweep(config, injected, |rows| {
        for r in rows {
            w.write_record(r.record())?;
        }
        Ok(())
    })?;
    w.flush()?;
    Ok(report)
}
