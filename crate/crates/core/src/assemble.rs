//! Gluing cell solutions into a global profile and checking it solves the
//! full boundary value problem.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, SymTridiagonal};
use crate::model::{eigen_sign, ProblemSpec};
use crate::par;
use crate::partition::OuterState;

/// Number of sine test fields used by default for the stationarity check.
pub const DEFAULT_TEST_FIELDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluedSolution {
    pub spec: ProblemSpec,
    pub k: usize,
    pub breakpoints: Vec<f64>,
    pub signs: Vec<i8>,
    /// Union of the cell grids including `a`, the breakpoints and `b`.
    pub global_nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub cell_energies: Vec<f64>,
    pub total_energy: f64,
    /// One-sided `u′` estimates `(left, right)` per cell.
    pub cell_fluxes: Vec<(f64, f64)>,
    pub residual_dual_norm: f64,
    /// `residual_dual_norm` over the dual norm of the load `f(u) + w`.
    pub residual_relative: f64,
    /// `| |u′ᵢ(yᵢ)| − |u′ᵢ₊₁(yᵢ)| |` at interior breakpoints.
    pub flux_jumps: Vec<f64>,
    /// Interior zeros in increasing order.
    pub zeros: Vec<f64>,
    pub stationarity_defects: Vec<f64>,
}

impl GluedSolution {
    pub fn cells(&self) -> usize {
        self.signs.len()
    }

    pub fn max_abs_flux(&self) -> f64 {
        self.cell_fluxes
            .iter()
            .flat_map(|(l, r)| [l.abs(), r.abs()])
            .fold(0.0, f64::max)
    }

    pub fn max_flux_jump(&self) -> f64 {
        self.flux_jumps.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn min_cell_energy(&self) -> f64 {
        self.cell_energies.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `u′(a)` as seen from the first cell.
    pub fn initial_slope(&self) -> f64 {
        self.cell_fluxes[0].0
    }

    /// Piecewise-linear evaluation of the profile.
    pub fn eval(&self, x: f64) -> f64 {
        let n = &self.global_nodes;
        if x <= n[0] || x >= n[n.len() - 1] {
            return 0.0;
        }
        let i = n.partition_point(|v| *v <= x).saturating_sub(1);
        let t = (x - n[i]) / (n[i + 1] - n[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// `x,u` rows on the global grid.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "u"])?;
        for (x, u) in self.global_nodes.iter().zip(&self.values) {
            w.write_record([format!("{x:.17e}"), format!("{u:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Concatenate the cell solutions and compute all global diagnostics.
pub fn glue(state: &OuterState) -> GluedSolution {
    let partition = &state.partition;
    let mut nodes = vec![partition.breakpoints[0]];
    let mut values = vec![0.0];
    for cell in &state.cells {
        nodes.extend_from_slice(&cell.grid.nodes);
        values.extend_from_slice(&cell.u);
        nodes.push(cell.grid.x_right);
        values.push(0.0);
    }
    let last = nodes.len() - 1;
    nodes[last] = state.spec.b;

    let mut zeros = Vec::new();
    let mut offset = 1;
    for (i, cell) in state.cells.iter().enumerate() {
        if i > 0 {
            zeros.push(partition.breakpoints[i]);
        }
        for j in 0..cell.u.len().saturating_sub(1) {
            let (u0, u1) = (cell.u[j], cell.u[j + 1]);
            if u0 * u1 < 0.0 {
                let (x0, x1) = (nodes[offset + j], nodes[offset + j + 1]);
                zeros.push(x0 + (x1 - x0) * u0 / (u0 - u1));
            }
        }
        offset += cell.u.len() + 1;
    }
    zeros.sort_by(f64::total_cmp);

    let cell_fluxes: Vec<(f64, f64)> = state.cells.iter().map(|c| (c.flux_left, c.flux_right)).collect();
    let cell_energies = state.cell_energies();
    let mut glued = GluedSolution {
        spec: state.spec.clone(),
        k: partition.k,
        breakpoints: partition.breakpoints.clone(),
        signs: partition.signs.clone(),
        global_nodes: nodes,
        values,
        total_energy: cell_energies.iter().sum(),
        cell_energies,
        cell_fluxes,
        residual_dual_norm: 0.0,
        residual_relative: 0.0,
        flux_jumps: Vec::new(),
        zeros,
        stationarity_defects: Vec::new(),
    };
    let residual = residual_norms(&state.spec, &glued);
    glued.residual_dual_norm = residual.dual_norm;
    glued.residual_relative = residual.relative;
    glued.flux_jumps = residual.flux_jumps;
    glued.stationarity_defects = stationarity_defect(&glued, DEFAULT_TEST_FIELDS);
    glued
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub dual_norm: f64,
    pub relative: f64,
    pub flux_jumps: Vec<f64>,
}

/// Global discrete weak residual `K u − ω (f(u) + w)` on the union grid,
/// measured in the inverse-stiffness norm.
pub fn residual_norms(spec: &ProblemSpec, glued: &GluedSolution) -> ResidualReport {
    let x = &glued.global_nodes;
    let u = &glued.values;
    let n = x.len() - 2;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mut residual = Vec::with_capacity(n);
    let mut load = Vec::with_capacity(n);
    for i in 1..=n {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        diag.push(1.0 / hl + 1.0 / hr);
        if i < n {
            off.push(-1.0 / hr);
        }
        let ku = -u[i - 1] / hl + (1.0 / hl + 1.0 / hr) * u[i] - u[i + 1] / hr;
        let l = 0.5 * (hl + hr) * spec.nonlinearity(u[i]) + spec.forcing.hat_integral(x[i - 1], x[i], x[i + 1]);
        residual.push(ku - l);
        load.push(l);
    }
    let factor = SymTridiagonal::new(diag, off)
        .ldlt()
        .expect("global stiffness is positive definite");
    let dual = |v: &[f64]| dot(v, &factor.solve(v)).max(0.0).sqrt();
    let dual_norm = dual(&residual);
    let scale = dual(&load);
    let flux_jumps = glued
        .cell_fluxes
        .windows(2)
        .map(|w| (w[0].1.abs() - w[1].0.abs()).abs())
        .collect();
    ResidualReport {
        dual_norm,
        relative: if scale > 0.0 { dual_norm / scale } else { dual_norm },
        flux_jumps,
    }
}

/// Boundary-term defect `Σᵢ ½(u′ᵢ(yᵢ)² − u′ᵢ₊₁(yᵢ)²) v_m(yᵢ)` for the sine
/// fields `v_m = sin(mπ(x − a)/(b − a))`, `m = 1..=fields`, normalized by
/// `½ max|u′|²`.
pub fn stationarity_defect(glued: &GluedSolution, fields: usize) -> Vec<f64> {
    let jumps: Vec<(f64, f64)> = glued
        .cell_fluxes
        .windows(2)
        .enumerate()
        .map(|(i, w)| (glued.breakpoints[i + 1], 0.5 * (w[0].1.powi(2) - w[1].0.powi(2))))
        .collect();
    let scale = 0.5 * glued.max_abs_flux().powi(2);
    let (a, len) = (glued.spec.a, glued.spec.length());
    par::map_range(fields, |m| {
        let freq = (m + 1) as f64 * PI / len;
        let s: f64 = jumps.iter().map(|(y, j)| j * (freq * (y - a)).sin()).sum();
        if scale > 0.0 {
            s / scale
        } else {
            s
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedZero {
    pub index: usize,
    pub target: f64,
    pub zero: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSign {
    pub region: usize,
    /// Sign of the eigenfunction on the region.
    pub eigen_sign: i8,
    /// `min u` where the eigenfunction is positive, `max u` otherwise.
    pub extreme: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub k_eig: usize,
    pub required: usize,
    pub zeros: Vec<LocalizedZero>,
    pub regions: Vec<RegionSign>,
}

/// Check that the `k_eig − 1` zeros forced by a sign-of-eigenfunction forcing
/// are present, the `i`-th within `(b − a)/k_eig` of `a + i(b − a)/k_eig`,
/// and that `u` takes the opposite sign to the eigenfunction somewhere in
/// each of its nodal intervals.
pub fn zero_localization_check(glued: &GluedSolution, k_eig: usize, spec: &ProblemSpec) -> Result<ZeroReport> {
    if k_eig < 1 {
        return Err(Error::InvalidProblem("eigen index must be at least 1".into()));
    }
    let (a, b) = (spec.a, spec.b);
    let width = (b - a) / k_eig as f64;
    let required = k_eig - 1;

    let mut zeros = Vec::with_capacity(required);
    let mut used = 0;
    let mut first_violation = None;
    for i in 1..=required {
        let target = a + i as f64 * width;
        let found = glued.zeros[used..]
            .iter()
            .position(|z| (z - target).abs() < width)
            .map(|p| used + p);
        if let Some(p) = found {
            used = p + 1;
        } else {
            first_violation.get_or_insert(i);
        }
        zeros.push(LocalizedZero {
            index: i,
            target,
            zero: found.map(|p| glued.zeros[p]),
        });
    }

    let mut regions = Vec::with_capacity(k_eig);
    let mut bad_region = None;
    for r in 0..k_eig {
        let lo = a + r as f64 * width;
        let hi = lo + width;
        let s = eigen_sign(k_eig, a, b, 0.5 * (lo + hi));
        let inside = glued
            .global_nodes
            .iter()
            .zip(&glued.values)
            .filter(|(x, _)| **x > lo && **x < hi)
            .map(|(_, u)| *u);
        let (extreme, holds) = if s > 0.0 {
            let m = inside.fold(f64::INFINITY, f64::min);
            (m, m < 0.0)
        } else {
            let m = inside.fold(f64::NEG_INFINITY, f64::max);
            (m, m > 0.0)
        };
        if !holds {
            bad_region.get_or_insert(r);
        }
        regions.push(RegionSign {
            region: r,
            eigen_sign: s as i8,
            extreme,
            holds,
        });
    }
    if let Some(index) = first_violation {
        return Err(Error::ViolatedLocalization { index });
    }
    if let Some(region) = bad_region {
        return Err(Error::ViolatedSignPattern { region });
    }
    Ok(ZeroReport {
        k_eig,
        required,
        zeros,
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{uniform_partition, ForcingSpec, ForcingTerm};
    use crate::partition::{optimize_partition, total_energy, OuterOptions};
    use approx::assert_relative_eq;

    fn symmetric_state(cells: usize, m: usize) -> OuterState {
        let spec = ProblemSpec::symmetric(0.0, 1.0, 3.0, ForcingSpec::zero()).unwrap();
        let p = uniform_partition(&spec, cells, cells, 2.0).unwrap();
        total_energy(&spec, &p, m, 2.0, &Default::default()).unwrap()
    }

    #[test]
    fn single_cell_glue_is_the_cell() {
        let state = symmetric_state(1, 99);
        let g = glue(&state);
        assert_eq!(g.values.len(), 101);
        assert_eq!(&g.values[1..100], &state.cells[0].u[..]);
        assert_eq!(g.total_energy, state.cells[0].energy);
        assert!(g.zeros.is_empty());
    }

    #[test]
    fn alternating_translation_symmetry() {
        let state = symmetric_state(4, 49);
        let g = glue(&state);
        let amp = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // node i + 50 is the image of node i under x -> x + 1/4
        for i in 0..(g.values.len() - 50) {
            assert!((g.values[i + 50] + g.values[i]).abs() <= 1e-9 * amp);
        }
        assert_eq!(g.zeros.len(), 3);
        assert!(g.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn values_vanish_at_breakpoints_and_energy_adds_up() {
        let spec = ProblemSpec::symmetric(0.0, 1.0, 3.0, ForcingSpec::sinusoid(2.0, 3.0 * PI, 0.0)).unwrap();
        let p = uniform_partition(&spec, 5, 5, 2.0).unwrap();
        let state = total_energy(&spec, &p, 59, 2.0, &Default::default()).unwrap();
        let g = glue(&state);
        for y in &g.breakpoints {
            let i = g.global_nodes.iter().position(|x| x == y).unwrap();
            assert_eq!(g.values[i], 0.0);
        }
        let sum: f64 = g.cell_energies.iter().sum();
        assert_relative_eq!(g.total_energy, sum, max_relative = 1e-12);
        assert_eq!(g.zeros.len(), 4);
        for w in g.values.windows(2) {
            assert!(!(w[0] * w[1] < 0.0), "no sign change away from breakpoints");
        }
    }

    #[test]
    fn manufactured_solution_residual_is_second_order() {
        // u = sin(πx) solves the problem for w = π² sin(πx) − sin³(πx)
        let forcing = ForcingSpec {
            terms: vec![
                ForcingTerm::Sinusoid {
                    amplitude: PI * PI - 0.75,
                    frequency: PI,
                    phase: 0.0,
                },
                ForcingTerm::Sinusoid {
                    amplitude: 0.25,
                    frequency: 3.0 * PI,
                    phase: 0.0,
                },
            ],
        };
        let spec = ProblemSpec::symmetric(0.0, 1.0, 3.0, forcing).unwrap();
        let run = |n: usize| {
            let nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let values: Vec<f64> = nodes.iter().map(|x| (PI * x).sin()).collect();
            let g = GluedSolution {
                spec: spec.clone(),
                k: 1,
                breakpoints: vec![0.0, 1.0],
                signs: vec![1],
                global_nodes: nodes,
                values,
                cell_energies: vec![0.0],
                total_energy: 0.0,
                cell_fluxes: vec![(PI, -PI)],
                residual_dual_norm: 0.0,
                residual_relative: 0.0,
                flux_jumps: Vec::new(),
                zeros: Vec::new(),
                stationarity_defects: Vec::new(),
            };
            residual_norms(&spec, &g)
        };
        let r1 = run(50);
        let r2 = run(100);
        let order = (r1.dual_norm / r2.dual_norm).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
        assert!(r2.relative < 1e-3);
        assert!(r2.flux_jumps.is_empty());
    }

    #[test]
    fn displaced_breakpoint_shows_in_flux_jump_and_defect() {
        let spec = ProblemSpec::symmetric(0.0, 1.0, 3.0, ForcingSpec::sinusoid(2.0, 3.0 * PI, 0.0)).unwrap();
        let mut opts = OuterOptions::default();
        opts.multistart = 0;
        let best = optimize_partition(&spec, 4, 4, 2.0, 199, &opts).unwrap();
        let converged = glue(&best);
        let mut p = best.partition.clone();
        p.breakpoints[2] += 0.01;
        let moved = glue(&total_energy(&spec, &p, 199, 2.0, &opts.cell).unwrap());
        assert!(moved.flux_jumps[1] > 10.0 * converged.flux_jumps[1]);

        // defect for m = 1 equals direct evaluation of the sum
        let direct: f64 = (0..3)
            .map(|i| {
                let y = moved.breakpoints[i + 1];
                let j = 0.5 * (moved.cell_fluxes[i].1.powi(2) - moved.cell_fluxes[i + 1].0.powi(2));
                j * (PI * y).sin()
            })
            .sum::<f64>()
            / (0.5 * moved.max_abs_flux().powi(2));
        assert_relative_eq!(moved.stationarity_defects[0], direct, max_relative = 1e-12);
        assert!(moved.stationarity_defects[0].abs() > 10.0 * converged.stationarity_defects[0].abs());
    }

    #[test]
    fn no_fields_no_defect() {
        let g = glue(&symmetric_state(3, 29));
        assert!(stationarity_defect(&g, 0).is_empty());
        for d in &g.stationarity_defects {
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn csv_and_json_exports() {
        let g = glue(&symmetric_state(2, 9));
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), g.values.len() + 1);
        assert!(text.starts_with("x,u"));
        let mut buf = Vec::new();
        g.write_json(&mut buf).unwrap();
        let back: GluedSolution = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn localization_on_hand_built_profile() {
        let spec = ProblemSpec::symmetric(0.0, 1.0, 3.0, ForcingSpec::zero()).unwrap();
        let nodes: Vec<f64> = (0..=300).map(|i| i as f64 / 300.0).collect();
        // −sin(3πx) is negative where the third eigenfunction is positive
        let values: Vec<f64> = nodes.iter().map(|x| -(3.0 * PI * x).sin()).collect();
        let mut g = GluedSolution {
            spec: spec.clone(),
            k: 3,
            breakpoints: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            signs: vec![-1, 1, -1],
            global_nodes: nodes,
            values,
            cell_energies: vec![],
            total_energy: 0.0,
            cell_fluxes: vec![],
            residual_dual_norm: 0.0,
            residual_relative: 0.0,
            flux_jumps: vec![],
            zeros: vec![1.0 / 3.0, 2.0 / 3.0],
            stationarity_defects: vec![],
        };
        let rep = zero_localization_check(&g, 3, &spec).unwrap();
        assert_eq!(rep.required, 2);
        assert!(rep.regions.iter().all(|r| r.holds));

        g.zeros = vec![0.05];
        assert!(matches!(
            zero_localization_check(&g, 3, &spec),
            Err(Error::ViolatedLocalization { index: 2 })
        ));

        g.zeros = vec![1.0 / 3.0, 2.0 / 3.0];
        g.values.iter_mut().for_each(|v| *v = -*v);
        assert!(matches!(
            zero_localization_check(&g, 3, &spec),
            Err(Error::ViolatedSignPattern { region: 0 })
        ));
    }
}
