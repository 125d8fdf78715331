//! Independent checks on the variational solver: a shooting integrator, the
//! optimal two-cell split for asymmetric coefficients, Dirichlet eigen-data
//! and the sign-forcing construction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assemble::GluedSolution;
use crate::cellsolve::{solve_cell, CellOptions};
use crate::error::{Error, Result};
use crate::linalg::SymTridiagonal;
use crate::model::{eigen_sign, ForcingSpec, ForcingTerm, ProblemSpec};

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Magnitude beyond which a trajectory is treated as blown up.
const OVERFLOW: f64 = 1e100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingResult {
    pub slope: f64,
    pub step: f64,
    pub nodes: Vec<f64>,
    pub trajectory: Vec<f64>,
    pub derivative: Vec<f64>,
    pub end_value: f64,
    /// Strict sign changes strictly inside `(a, b)`.
    pub zero_count: usize,
}

impl ShootingResult {
    /// Cubic Hermite interpolation of the trajectory.
    pub fn eval(&self, x: f64) -> f64 {
        let n = &self.nodes;
        let x = x.clamp(n[0], n[n.len() - 1]);
        let i = n.partition_point(|v| *v <= x).saturating_sub(1).min(n.len() - 2);
        let h = n[i + 1] - n[i];
        let t = (x - n[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.trajectory[i]
            + h10 * h * self.derivative[i]
            + h01 * self.trajectory[i + 1]
            + h11 * h * self.derivative[i + 1]
    }
}

/// Integrate `u″ = −f(u) − w` from `(u, u′) = (0, slope)` at `a` to `b` with
/// fixed-step RK4.
pub fn shoot(spec: &ProblemSpec, slope: f64, step: f64) -> Result<ShootingResult> {
    if !(step > 0.0) {
        return Err(Error::InvalidProblem(format!("shooting step must be positive, got {step}")));
    }
    let n = (spec.length() / step).ceil().max(1.0) as usize;
    let h = spec.length() / n as f64;
    let accel = |x: f64, u: f64| -spec.nonlinearity(u) - spec.forcing.eval(x);
    let mut nodes = Vec::with_capacity(n + 1);
    let mut traj = Vec::with_capacity(n + 1);
    let mut der = Vec::with_capacity(n + 1);
    let (mut u, mut v) = (0.0, slope);
    nodes.push(spec.a);
    traj.push(u);
    der.push(v);
    for i in 0..n {
        let x = spec.a + i as f64 * h;
        let k1u = v;
        let k1v = accel(x, u);
        let k2u = v + 0.5 * h * k1v;
        let k2v = accel(x + 0.5 * h, u + 0.5 * h * k1u);
        let k3u = v + 0.5 * h * k2v;
        let k3v = accel(x + 0.5 * h, u + 0.5 * h * k2u);
        let k4u = v + h * k3v;
        let k4v = accel(x + h, u + h * k3u);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let xn = if i + 1 == n { spec.b } else { spec.a + (i + 1) as f64 * h };
        if !u.is_finite() || !v.is_finite() || u.abs() > OVERFLOW || v.abs() > OVERFLOW {
            return Err(Error::Overflow { x: xn });
        }
        nodes.push(xn);
        traj.push(u);
        der.push(v);
    }
    let zero_count = count_sign_changes(&traj[1..n]);
    Ok(ShootingResult {
        slope,
        step: h,
        nodes,
        trajectory: traj,
        derivative: der,
        end_value: u,
        zero_count,
    })
}

fn count_sign_changes(values: &[f64]) -> usize {
    let mut last = 0.0;
    let mut count = 0;
    for &v in values {
        if v != 0.0 {
            if last != 0.0 && (v > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = v;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingMatch {
    pub slope: f64,
    /// `max |u_shoot − u_glued|` over the glued grid.
    pub sup_error: f64,
    pub end_value: f64,
    pub shooting_zero_count: usize,
    pub glued_zero_count: usize,
    pub zero_count_match: bool,
}

/// Shoot from the glued solution's initial slope and compare profiles.
pub fn shooting_match(spec: &ProblemSpec, glued: &GluedSolution, step: f64) -> Result<ShootingMatch> {
    let slope = glued.initial_slope();
    let shot = shoot(spec, slope, step)?;
    let sup_error = glued
        .global_nodes
        .iter()
        .zip(&glued.values)
        .map(|(x, u)| (shot.eval(*x) - u).abs())
        .fold(0.0, f64::max);
    let glued_zero_count = glued.zeros.len();
    Ok(ShootingMatch {
        slope,
        sup_error,
        end_value: shot.end_value,
        shooting_zero_count: shot.zero_count,
        glued_zero_count,
        zero_count_match: shot.zero_count == glued_zero_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetrySplit {
    pub t_hat: f64,
    pub l_hat: f64,
    /// Ground-state energy of `−u″ = uᵖ` on a unit cell.
    pub unit_energy: f64,
    /// Samples `(t, e₊(t) + e₋(2 − t))`.
    pub energy_curve: Vec<(f64, f64)>,
    /// Interior local minima of the sampled curve.
    pub local_minima: Vec<f64>,
}

impl AsymmetrySplit {
    pub fn write_curve_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "energy"])?;
        for (t, e) in &self.energy_curve {
            w.write_record([format!("{t:.17e}"), format!("{e:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exponent `α = (p + 3)/(p − 1)` of the cell energy scaling `E(ℓ) ∝ ℓ^{−α}`.
pub fn length_exponent(p: f64) -> f64 {
    (p + 3.0) / (p - 1.0)
}

/// Energy of a one-signed ground state with coefficient `c` on a cell of
/// length `len`, from the unit-cell energy.
pub fn scaled_cell_energy(unit_energy: f64, p: f64, c: f64, len: f64) -> f64 {
    unit_energy * c.powf(-2.0 / (p - 1.0)) * len.powf(-length_exponent(p))
}

/// Number of samples on the reported energy curve.
const CURVE_SAMPLES: usize = 391;

/// Optimal division of a length-2 reference pair between the positive and
/// negative bump; `m` is the unit-cell resolution.
pub fn compute_split(spec: &ProblemSpec, m: usize) -> Result<AsymmetrySplit> {
    spec.validate()?;
    if !spec.forcing.is_zero() {
        return Err(Error::InvalidProblem("the split is defined for w = 0".into()));
    }
    if spec.c_plus > spec.c_minus {
        // relabel the signs so the search always runs in one orientation
        let swapped = ProblemSpec {
            c_plus: spec.c_minus,
            c_minus: spec.c_plus,
            ..spec.clone()
        };
        let s = compute_split(&swapped, m)?;
        let t_hat = 2.0 - s.t_hat;
        return Ok(AsymmetrySplit {
            t_hat,
            l_hat: 1.0 / t_hat.min(2.0 - t_hat),
            unit_energy: s.unit_energy,
            energy_curve: s.energy_curve.iter().rev().map(|(t, e)| (2.0 - t, *e)).collect(),
            local_minima: s.local_minima.iter().rev().map(|t| 2.0 - t).collect(),
        });
    }
    let unit = ProblemSpec::symmetric(0.0, 1.0, spec.p, ForcingSpec::zero())?;
    let unit_energy = solve_cell(&unit, 0.0, 1.0, m, 1, &CellOptions::default())?.energy;
    let (p, cp, cm) = (spec.p, spec.c_plus, spec.c_minus);
    let objective =
        |t: f64| scaled_cell_energy(unit_energy, p, cp, t) + scaled_cell_energy(unit_energy, p, cm, 2.0 - t);

    let t_hat = golden_section(&objective, 1e-9, 2.0 - 1e-9, 1e-13);
    let energy_curve: Vec<(f64, f64)> = (0..CURVE_SAMPLES)
        .map(|i| {
            let t = 0.05 + 1.9 * i as f64 / (CURVE_SAMPLES - 1) as f64;
            (t, objective(t))
        })
        .collect();
    let local_minima: Vec<f64> = energy_curve
        .windows(3)
        .filter(|w| w[1].1 < w[0].1 && w[1].1 < w[2].1)
        .map(|w| w[1].0)
        .collect();
    if local_minima.len() > 1 {
        log::warn!("split energy curve has {} local minima: {:?}", local_minima.len(), local_minima);
    }
    Ok(AsymmetrySplit {
        t_hat,
        l_hat: 1.0 / t_hat.min(2.0 - t_hat),
        unit_energy,
        energy_curve,
        local_minima,
    })
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub k: usize,
    /// `(kπ/(b − a))²`.
    pub lambda: f64,
    pub nodes: Vec<f64>,
    /// `sin(kπ(x − a)/(b − a))` at `nodes`.
    pub values: Vec<f64>,
    /// `k`-th eigenvalue of the lumped P1 operator with `m` interior nodes.
    pub discrete_lambda: f64,
}

impl EigenData {
    pub fn relative_gap(&self) -> f64 {
        (self.discrete_lambda - self.lambda).abs() / self.lambda
    }
}

/// Dirichlet eigen-data of `−u″` on `(a, b)` sampled at `m` interior nodes.
pub fn eigen_data(spec: &ProblemSpec, k_eig: usize, m: usize) -> Result<EigenData> {
    if k_eig == 0 || m < k_eig {
        return Err(Error::InvalidProblem(format!(
            "need 1 <= k_eig <= m, got k_eig = {k_eig}, m = {m}"
        )));
    }
    let len = spec.length();
    let lambda = (k_eig as f64 * PI / len).powi(2);
    let h = len / (m as f64 + 1.0);
    let nodes: Vec<f64> = (1..=m).map(|j| spec.a + j as f64 * h).collect();
    let values = nodes
        .iter()
        .map(|x| (k_eig as f64 * PI * (x - spec.a) / len).sin())
        .collect();
    let discrete_lambda = SymTridiagonal::stiffness(m, h).eigenvalue(k_eig - 1) / h;
    Ok(EigenData {
        k: k_eig,
        lambda,
        nodes,
        values,
        discrete_lambda,
    })
}

/// `(t⋆, max_{t≥0} λt − c tᵖ)`.
pub fn r4_threshold(lambda: f64, p: f64, c: f64) -> (f64, f64) {
    let t_star = (lambda / (c * p)).powf(1.0 / (p - 1.0));
    (t_star, lambda * t_star * (1.0 - 1.0 / p))
}

/// Sample count for the grid checks on forcing terms.
const FORCING_SAMPLES: usize = 10_000;

/// `w = (M + margin) sign(e_k)` with `M = max_{t≥0}(λ_k t − c̄ tᵖ)` and
/// `c̄ = min(c₊, c₋)`, which forces sign changes in every nodal interval of
/// `e_k`.
pub fn adversarial_forcing(spec: &ProblemSpec, k_eig: usize, margin: f64) -> Result<ForcingSpec> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidProblem(format!("margin must be positive, got {margin}")));
    }
    if k_eig == 0 {
        return Err(Error::InvalidProblem("eigen index must be at least 1".into()));
    }
    let lambda = (k_eig as f64 * PI / spec.length()).powi(2);
    let c_bar = spec.c_plus.min(spec.c_minus);
    let (_, threshold) = r4_threshold(lambda, spec.p, c_bar);
    let forcing = ForcingSpec {
        terms: vec![ForcingTerm::SignOfEigenfunction {
            amplitude: threshold + margin,
            k: k_eig,
            a: spec.a,
            b: spec.b,
        }],
    };
    for i in 0..FORCING_SAMPLES {
        let x = spec.a + (i as f64 + 0.5) / FORCING_SAMPLES as f64 * spec.length();
        let w = forcing.eval(x);
        let e = (k_eig as f64 * PI * (x - spec.a) / spec.length()).sin();
        assert!(e * w >= 0.0 && w.abs() > threshold, "forcing fails the threshold at x = {x}");
    }
    Ok(forcing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignConditions {
    /// `inf{g(x,t) − λ₁t : x ∈ D, t ≥ 0} > 0`.
    pub r1_holds: bool,
    /// `sup{g(x,t) − λ₁t : x ∈ D, t ≤ 0} < 0`.
    pub r3_holds: bool,
    /// The infimum above.
    pub r1_gap: f64,
    /// The supremum above.
    pub r3_gap: f64,
}

/// One-sided extrema of `g(x,t) − λ₁t` for `g = f(t) + w(x)` on `D = (lo, hi)`.
pub fn verify_sign_conditions(spec: &ProblemSpec, lo: f64, hi: f64, lambda_1: f64) -> SignConditions {
    let (_, m_plus) = r4_threshold(lambda_1, spec.p, spec.c_plus);
    let (_, m_minus) = r4_threshold(lambda_1, spec.p, spec.c_minus);
    let (mut w_min, mut w_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..FORCING_SAMPLES {
        let x = lo + (i as f64 + 0.5) / FORCING_SAMPLES as f64 * (hi - lo);
        let w = spec.forcing.eval(x);
        w_min = w_min.min(w);
        w_max = w_max.max(w);
    }
    // t ≥ 0: min_t c₊tᵖ − λt = −M₊;  t = −s ≤ 0: max_s λs − c₋sᵖ = M₋
    let r1_gap = w_min - m_plus;
    let r3_gap = w_max + m_minus;
    SignConditions {
        r1_holds: r1_gap > 0.0,
        r3_holds: r3_gap < 0.0,
        r1_gap,
        r3_gap,
    }
}

/// Sign of the `k`-th eigenfunction on nodal interval `region`.
pub fn region_sign(k_eig: usize, region: usize) -> f64 {
    eigen_sign(k_eig, 0.0, k_eig as f64, region as f64 + 0.5)
}
