//! Outer minimization of the total energy over breakpoints.
//!
//! The iterate is the vector of cell lengths `ℓ`, constrained to
//! `Σ ℓ = b − a` and the Lipschitz box `1/(kL̄) ≤ ℓ_i ≤ L̄/k` (equivalently
//! `𝓛(T) ≤ L̄`). Each evaluation solves all cells independently. Steps are
//! projected gradient steps with Barzilai–Borwein lengths and Armijo
//! backtracking, so the total energy never increases between accepted
//! iterates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cellsolve::{solve_cell, CellOptions, CellSolution};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{deformation_distance, lipschitz_constant, uniform_partition, Partition, ProblemSpec};
use crate::par;

/// Restricted deformation class: stay within `d_k ≤ radius` of `reference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedClass {
    pub reference: Partition,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterOptions {
    /// Reported certificate only: `max mismatch ≤ tol_flux · max|u′|`.
    pub tol_flux: f64,
    /// Stop when the projected length gradient falls below
    /// `tol_outer · ½ max|u′|²` (the natural scale of a breakpoint force).
    pub tol_outer: f64,
    pub max_outer_iterations: usize,
    /// Random feasible starts tried in addition to the uniform partition.
    pub multistart: usize,
    pub seed: u64,
    /// Relative amplitude of the random length perturbation.
    pub start_jitter: f64,
    pub first_sign: i8,
    pub armijo_slope: f64,
    pub restricted: Option<RestrictedClass>,
    pub cell: CellOptions,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self {
            tol_flux: 1e-5,
            tol_outer: 1e-9,
            max_outer_iterations: 500,
            multistart: 3,
            seed: 0,
            start_jitter: 0.1,
            first_sign: 1,
            armijo_slope: 1e-4,
            restricted: None,
            cell: CellOptions::default(),
        }
    }
}

/// One line of the per-iteration log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub total_energy: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub max_flux_mismatch: f64,
    pub interior_margin: f64,
}

/// Partition together with all of its solved cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterState {
    pub spec: ProblemSpec,
    pub partition: Partition,
    pub m_per_cell: usize,
    pub cells: Vec<CellSolution>,
    pub total_energy: f64,
    /// `|u′ᵢ(yᵢ)| − |u′ᵢ₊₁(yᵢ)|` at interior breakpoints.
    pub flux_mismatches: Vec<f64>,
    pub l_bound: f64,
    pub lipschitz: f64,
    /// `L̄ − 𝓛(T)`; positive means the bound is inactive.
    pub interior_margin: f64,
    /// `r − d_k(T, T₀)` when optimizing in a restricted class.
    pub restricted_margin: Option<f64>,
    /// Projected length gradient over `½ max|u′|²`.
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Stopped because the decrease still available along the search
    /// direction is below the energy's rounding level.
    #[serde(default)]
    pub at_rounding_floor: bool,
    pub history: Vec<IterationRecord>,
}

impl OuterState {
    pub fn max_flux(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| [c.flux_left.abs(), c.flux_right.abs()])
            .fold(0.0, f64::max)
    }

    pub fn max_flux_mismatch(&self) -> f64 {
        self.flux_mismatches.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn cell_energies(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.energy).collect()
    }

    pub fn min_cell_energy(&self) -> f64 {
        self.cells.iter().map(|c| c.energy).fold(f64::INFINITY, f64::min)
    }

    fn record(&self, iter: usize) -> IterationRecord {
        IterationRecord {
            iter,
            total_energy: self.total_energy,
            l: self.lipschitz,
            max_flux_mismatch: self.max_flux_mismatch(),
            interior_margin: self.interior_margin,
        }
    }

    /// Per-iteration log as CSV.
    pub fn write_history_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.history {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solve every cell of `partition` and assemble the totals.
pub fn total_energy(
    spec: &ProblemSpec,
    partition: &Partition,
    m_per_cell: usize,
    l_bound: f64,
    cell_opts: &CellOptions,
) -> Result<OuterState> {
    let results = par::map_range(partition.cells(), |i| {
        let (xl, xr) = partition.cell(i);
        solve_cell(spec, xl, xr, m_per_cell, partition.signs[i], cell_opts)
    });
    let mut cells = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        cells.push(r.map_err(|e| Error::Cell {
            index,
            source: Box::new(e),
        })?);
    }
    let total_energy = cells.iter().map(|c| c.energy).sum();
    let flux_mismatches = cells
        .windows(2)
        .map(|w| w[0].flux_right.abs() - w[1].flux_left.abs())
        .collect();
    let lipschitz = lipschitz_constant(partition);
    Ok(OuterState {
        spec: spec.clone(),
        partition: partition.clone(),
        m_per_cell,
        cells,
        total_energy,
        flux_mismatches,
        l_bound,
        lipschitz,
        interior_margin: l_bound - lipschitz,
        restricted_margin: None,
        stationarity: f64::NAN,
        iterations: 0,
        converged: false,
        at_rounding_floor: false,
        history: Vec::new(),
    })
}

/// Derivative of the total energy with respect to moving each interior
/// breakpoint to the right; the discrete form of `½(u′ᵢ₊₁² − u′ᵢ²)`.
pub fn breakpoint_gradient(state: &OuterState) -> Vec<f64> {
    state
        .cells
        .windows(2)
        .map(|w| w[0].shape_right + w[1].shape_left)
        .collect()
}

/// `½(u′ᵢ₊₁(yᵢ)² − u′ᵢ(yᵢ)²)` from the one-sided flux estimates.
pub fn flux_gradient(state: &OuterState) -> Vec<f64> {
    state
        .cells
        .windows(2)
        .map(|w| 0.5 * (w[1].flux_left.powi(2) - w[0].flux_right.powi(2)))
        .collect()
}

/// Gradient with respect to the cell lengths, treating `y_J` as free.
fn length_gradient(state: &OuterState) -> Vec<f64> {
    let j = state.cells.len();
    let mut by_breakpoint = breakpoint_gradient(state);
    by_breakpoint.push(state.cells[j - 1].shape_right);
    let mut out = vec![0.0; j];
    let mut acc = 0.0;
    for i in (0..j).rev() {
        acc += by_breakpoint[i];
        out[i] = acc;
    }
    out
}

/// Euclidean projection onto `{Σ ℓ = total, lo ≤ ℓ ≤ hi}`.
pub fn project_lengths(v: &[f64], total: f64, lo: f64, hi: f64) -> Vec<f64> {
    let sum_at = |tau: f64| v.iter().map(|x| (x - tau).clamp(lo, hi)).sum::<f64>();
    let mut a = v.iter().cloned().fold(f64::INFINITY, f64::min) - hi;
    let mut b = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lo;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if sum_at(mid) > total {
            a = mid;
        } else {
            b = mid;
        }
    }
    let tau = 0.5 * (a + b);
    let mut out: Vec<f64> = v.iter().map(|x| (x - tau).clamp(lo, hi)).collect();
    let free: Vec<usize> = (0..out.len()).filter(|&i| out[i] > lo && out[i] < hi).collect();
    if !free.is_empty() {
        let r = (total - out.iter().sum::<f64>()) / free.len() as f64;
        for i in free {
            out[i] += r;
        }
    }
    out
}

struct Feasible<'a> {
    spec: &'a ProblemSpec,
    k: usize,
    lo: f64,
    hi: f64,
    first_sign: i8,
    restricted: Option<(&'a RestrictedClass, Vec<f64>)>,
}

impl Feasible<'_> {
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut l = project_lengths(v, self.spec.length(), self.lo, self.hi);
        if let Some((class, l0)) = &self.restricted {
            // radial retraction toward the reference, which lies in the box
            let p = self.partition(&l);
            if let Ok(d) = deformation_distance(&p, &class.reference) {
                if d.distance_to_reference > class.radius {
                    let theta = class.radius / d.distance_to_reference * (1.0 - 1e-12);
                    l = l0.iter().zip(&l).map(|(a, b)| a + theta * (b - a)).collect();
                }
            }
        }
        l
    }

    fn partition(&self, lengths: &[f64]) -> Partition {
        let mut p = Partition::from_lengths(self.k, self.spec.a, lengths, self.first_sign)
            .expect("projected lengths are positive");
        let last = p.breakpoints.len() - 1;
        p.breakpoints[last] = self.spec.b;
        p
    }
}

/// Minimize the total energy over feasible partitions with `k` and `cells`.
///
/// The uniform partition and `opts.multistart` random feasible starts are
/// descended; the lowest converged state is returned.
pub fn optimize_partition(
    spec: &ProblemSpec,
    k: usize,
    cells: usize,
    l_bound: f64,
    m_per_cell: usize,
    opts: &OuterOptions,
) -> Result<OuterState> {
    let uniform = uniform_partition(spec, k, cells, l_bound)?;
    let uniform = if opts.first_sign < 0 { uniform.flipped() } else { uniform };
    let feasible = Feasible {
        spec,
        k,
        lo: 1.0 / (k as f64 * l_bound),
        hi: l_bound / k as f64,
        first_sign: opts.first_sign,
        restricted: opts.restricted.as_ref().map(|c| (c, c.reference.lengths())),
    };
    if let Some(class) = &opts.restricted {
        if class.reference.cells() != cells || class.reference.k != k {
            return Err(Error::MismatchedGrids {
                k0: class.reference.k,
                j0: class.reference.cells(),
                k1: k,
                j1: cells,
            });
        }
    }
    let base = uniform.lengths();
    let mut starts = vec![base.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.multistart {
        let v: Vec<f64> = base
            .iter()
            .map(|l| l * (1.0 + opts.start_jitter * rng.gen_range(-1.0..1.0)))
            .collect();
        starts.push(v);
    }

    let mut best: Option<OuterState> = None;
    let mut first_err = None;
    for (n, start) in starts.iter().enumerate() {
        match descend(&feasible, start, l_bound, m_per_cell, opts) {
            Ok(state) => {
                log::debug!("start {n}: E = {:.12e} after {} iterations", state.total_energy, state.iterations);
                if best.as_ref().map_or(true, |b| state.total_energy < b.total_energy) {
                    best = Some(state);
                }
            }
            Err(e) => {
                log::debug!("start {n} failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(state), _) => Ok(state),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one start"),
    }
}

/// Sup norm of the gradient projected onto the tangent cone of the
/// feasible set at `lengths`.
fn projected_gradient_norm(feasible: &Feasible, lengths: &[f64], grad: &[f64]) -> f64 {
    let at_lo = |l: f64| l <= feasible.lo * (1.0 + 1e-12);
    let at_hi = |l: f64| l >= feasible.hi * (1.0 - 1e-12);
    let mut free = vec![true; lengths.len()];
    loop {
        let n = free.iter().filter(|&&f| f).count();
        if n == 0 {
            return 0.0;
        }
        let mu = grad.iter().zip(&free).filter(|(_, &f)| f).map(|(g, _)| g).sum::<f64>() / n as f64;
        let mut changed = false;
        for i in 0..lengths.len() {
            if free[i] && ((at_lo(lengths[i]) && grad[i] > mu) || (at_hi(lengths[i]) && grad[i] < mu)) {
                free[i] = false;
                changed = true;
            }
        }
        if !changed {
            return grad
                .iter()
                .zip(&free)
                .filter(|(_, &f)| f)
                .fold(0.0, |m, (g, _)| m.max((g - mu).abs()));
        }
    }
}

fn descend(
    feasible: &Feasible,
    start: &[f64],
    l_bound: f64,
    m_per_cell: usize,
    opts: &OuterOptions,
) -> Result<OuterState> {
    let spec = feasible.spec;
    let eval = |lengths: &[f64]| -> Result<OuterState> {
        let mut s = total_energy(spec, &feasible.partition(lengths), m_per_cell, l_bound, &opts.cell)?;
        if let Some((class, _)) = &feasible.restricted {
            let d = deformation_distance(&s.partition, &class.reference)?;
            s.restricted_margin = Some(class.radius - d.distance_to_reference);
        }
        Ok(s)
    };
    let mut lengths = feasible.project(start);
    let mut state = eval(&lengths)?;
    let mut history = vec![state.record(0)];
    let mut grad = length_gradient(&state);
    let mut alpha = {
        let mean = grad.iter().sum::<f64>() / grad.len() as f64;
        let spread = grad.iter().fold(0.0f64, |m, g| m.max((g - mean).abs()));
        if spread > 0.0 {
            0.01 * feasible.lo / spread
        } else {
            1.0
        }
    };

    let stationarity = |state: &OuterState, lengths: &[f64], grad: &[f64]| {
        let scale = 0.5 * state.max_flux().powi(2);
        projected_gradient_norm(feasible, lengths, grad) / scale.max(f64::MIN_POSITIVE)
    };
    let mut measure = stationarity(&state, &lengths, &grad);
    state.stationarity = measure;
    for iter in 0..=opts.max_outer_iterations {
        if measure <= opts.tol_outer {
            state.iterations = iter;
            state.converged = true;
            state.history = history;
            if state.interior_margin <= 1e-9 * l_bound {
                return Err(Error::StalledOnBoundary {
                    margin: state.interior_margin,
                    state: Box::new(state),
                });
            }
            return Ok(state);
        }
        if iter == opts.max_outer_iterations {
            break;
        }

        let mean = grad.iter().sum::<f64>() / grad.len() as f64;
        let noise = 64.0 * f64::EPSILON * state.total_energy.abs();
        let mut a = alpha;
        let mut accepted = None;
        // largest remaining decrease along any trial direction, from a
        // quadratic fit `ΔE = gᵀs + ½ c |s|²`
        let mut attainable: Option<f64> = None;
        for _ in 0..50 {
            let trial: Vec<f64> = lengths.iter().zip(&grad).map(|(l, g)| l - a * g).collect();
            let trial = feasible.project(&trial);
            // steps preserve the total length, so the mean of the gradient
            // only contributes rounding
            let predicted: f64 = grad
                .iter()
                .zip(trial.iter().zip(&lengths))
                .map(|(g, (t, l))| (g - mean) * (t - l))
                .sum();
            if predicted >= 0.0 {
                break;
            }
            if let Ok(next) = eval(&trial) {
                let next_grad = length_gradient(&next);
                let next_measure = stationarity(&next, &trial, &next_grad);
                let sufficient = next.total_energy <= state.total_energy + opts.armijo_slope * predicted;
                // below rounding the energy cannot discriminate; fall back on
                // the stationarity measure
                let flat = (next.total_energy - state.total_energy).abs()
                    <= 64.0 * f64::EPSILON * state.total_energy.abs()
                    && next_measure < measure;
                if sufficient || flat {
                    accepted = Some((trial, next, next_grad, next_measure));
                    break;
                }
                let step: Vec<f64> = trial.iter().zip(&lengths).map(|(t, l)| t - l).collect();
                let excess = next.total_energy - state.total_energy - predicted;
                if attainable.is_none() && excess > noise {
                    let curvature = 2.0 * excess / dot(&step, &step);
                    attainable = Some(predicted * predicted / (2.0 * curvature * dot(&step, &step)));
                }
            }
            a *= 0.5;
        }
        let Some((trial, next, next_grad, next_measure)) = accepted else {
            state.iterations = iter;
            state.history = history;
            if attainable.is_some_and(|d| d <= noise) {
                log::debug!("outer stop at rounding floor, stationarity {measure:e}");
                state.converged = true;
                state.at_rounding_floor = true;
                return Ok(state);
            }
            return Err(Error::LineSearchFailed {
                iteration: iter,
                state: Box::new(state),
            });
        };
        debug_assert!(next.total_energy <= state.total_energy * (1.0 + 64.0 * f64::EPSILON.copysign(state.total_energy)));
        let s: Vec<f64> = trial.iter().zip(&lengths).map(|(x, y)| x - y).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(x, y)| x - y).collect();
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 { dot(&s, &s) / sy } else { 2.0 * a };
        lengths = trial;
        state = next;
        state.stationarity = next_measure;
        grad = next_grad;
        measure = next_measure;
        history.push(state.record(iter + 1));
    }
    state.iterations = opts.max_outer_iterations;
    state.history = history;
    Err(Error::MaxOuterIterations {
        iterations: opts.max_outer_iterations,
        state: Box::new(state),
    })
}
