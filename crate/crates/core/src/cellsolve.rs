//! Per-cell variational solver.
//!
//! A cell `[x_left, x_right]` is discretized with P1 elements and lumped
//! (trapezoid) quadrature. On it we compute
//!
//! * the small local minimizer `ũ` of the energy (damped Newton from zero,
//!   with a positive-definiteness check of the Hessian along the path), and
//! * the one-signed critical point `u = ũ + t⋆ d⋆` obtained by minimizing
//!   the ray maximum `M(u) = max_{t ≥ 0} E(ũ + t (u − ũ))` over the cone
//!   `sign · (u − ũ) ≥ 0`.
//!
//! The descent on `M` uses the Sobolev (stiffness-preconditioned) gradient,
//! projects onto the cone and reprojects onto the ray maximum after every
//! step. Close to convergence a few Newton steps on `∇E = 0` polish the
//! iterate; the polished point is only accepted if it stays in the cone and
//! keeps the same energy level.

use serde::{Deserialize, Serialize};

use crate::error::{CellFailure, Error, Result};
use crate::linalg::{dot, solve_tridiagonal, Ldlt, SymTridiagonal};
use crate::model::{nonlinearity, nonlinearity_derivative, potential, ProblemSpec};

/// Uniform grid on one cell; the endpoints carry the Dirichlet value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub x_left: f64,
    pub x_right: f64,
    pub m: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl CellGrid {
    pub fn new(x_left: f64, x_right: f64, m: usize) -> Self {
        let h = (x_right - x_left) / (m as f64 + 1.0);
        let nodes = (1..=m).map(|j| x_left + j as f64 * h).collect();
        Self {
            x_left,
            x_right,
            m,
            h,
            nodes,
        }
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }
}

/// Discrete energy `E(u) = ½⟨Ku, u⟩ − Σ ω_j P(u_j) − Σ ω_j w_j u_j`.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy {
    pub grid: CellGrid,
    pub stiffness: SymTridiagonal,
    pub weights: Vec<f64>,
    /// `∫ w φ_j`: lumped for smooth terms, exact for step terms.
    pub load: Vec<f64>,
    /// `w′(x_j)` of the smooth terms, used by the shape sensitivities.
    pub forcing_slope: Vec<f64>,
    /// Forcing jumps inside the cell as `(x, w(x+) − w(x−))`.
    pub jumps: Vec<(f64, f64)>,
    pub p: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    factor: Ldlt,
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellOptions {
    pub tol_newton: f64,
    pub tol_nehari: f64,
    pub tol_grad: f64,
    pub max_iterations: usize,
    pub armijo_slope: f64,
    pub backtrack: f64,
    /// Relative gradient below which Newton polishing is attempted.
    pub polish_below: f64,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            tol_newton: 1e-10,
            tol_nehari: 1e-8,
            tol_grad: 1e-8,
            max_iterations: 10_000,
            armijo_slope: 1e-4,
            backtrack: 0.5,
            polish_below: 1e-3,
        }
    }
}

/// Discretize `[x_left, x_right]` with `m` interior nodes.
pub fn discretize_cell(spec: &ProblemSpec, x_left: f64, x_right: f64, m: usize) -> Result<DiscreteEnergy> {
    let min_len = 10.0 * f64::EPSILON * spec.length();
    if !(x_right - x_left > min_len) || m == 0 {
        return Err(Error::DegenerateCell { x_left, x_right });
    }
    let grid = CellGrid::new(x_left, x_right, m);
    let h = grid.h;
    let stiffness = SymTridiagonal::stiffness(m, h);
    let factor = stiffness.ldlt().expect("P1 stiffness is positive definite");
    let weights = vec![h; m];
    let forcing_slope = grid.nodes.iter().map(|&x| spec.forcing.derivative(x)).collect();
    let load = grid
        .nodes
        .iter()
        .map(|&x| spec.forcing.hat_integral(x - h, x, x + h))
        .collect();
    let jumps = spec.forcing.jumps_in(x_left, x_right);
    Ok(DiscreteEnergy {
        grid,
        stiffness,
        weights,
        load,
        forcing_slope,
        jumps,
        p: spec.p,
        c_plus: spec.c_plus,
        c_minus: spec.c_minus,
        factor,
    })
}

impl DiscreteEnergy {
    pub fn len(&self) -> usize {
        self.grid.m
    }

    pub fn is_empty(&self) -> bool {
        self.grid.m == 0
    }

    pub fn f(&self, t: f64) -> f64 {
        nonlinearity(self.p, self.c_plus, self.c_minus, t)
    }

    pub fn df(&self, t: f64) -> f64 {
        nonlinearity_derivative(self.p, self.c_plus, self.c_minus, t)
    }

    pub fn big_f(&self, t: f64) -> f64 {
        potential(self.p, self.c_plus, self.c_minus, t)
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let quad = 0.5 * self.stiffness.quad_form(u);
        let pot: f64 = u.iter().zip(&self.weights).map(|(&x, o)| o * self.big_f(x)).sum();
        quad - pot - dot(&self.load, u)
    }

    /// `ω_j f(u_j) + ω_j w_j`, the right-hand side of the discrete problem.
    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.weights)
            .zip(&self.load)
            .map(|((&x, o), l)| o * self.f(x) + l)
            .collect()
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let ku = self.stiffness.mul_vec(u);
        ku.iter().zip(self.rhs(u)).map(|(a, b)| a - b).collect()
    }

    pub fn hessian(&self, u: &[f64]) -> SymTridiagonal {
        let diag = self
            .stiffness
            .diag
            .iter()
            .zip(u)
            .zip(&self.weights)
            .map(|((d, &x), o)| d - o * self.df(x))
            .collect();
        SymTridiagonal::new(diag, self.stiffness.off.clone())
    }

    /// `K⁻¹ v`.
    pub fn sobolev(&self, v: &[f64]) -> Vec<f64> {
        self.factor.solve(v)
    }

    /// `sqrt(vᵀ K⁻¹ v)`, the discrete H⁻¹ norm.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        dot(v, &self.sobolev(v)).max(0.0).sqrt()
    }

    /// `Σ ω_j |u_j|^{p+1}`.
    pub fn mass(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weights).map(|(x, o)| o * x.abs().powf(self.p + 1.0)).sum()
    }

    /// Relative H⁻¹ size of the gradient, `‖∇E‖ / ‖rhs‖`.
    pub fn relative_gradient(&self, u: &[f64]) -> f64 {
        let g = self.gradient(u);
        let reference = self.dual_norm(&self.rhs(u));
        let gn = self.dual_norm(&g);
        if reference > 0.0 {
            gn / reference
        } else {
            gn
        }
    }

    /// Discrete first Dirichlet eigenfunction, normalized to unit maximum.
    pub fn first_eigenfunction(&self) -> Vec<f64> {
        let m = self.grid.m as f64;
        (1..=self.grid.m)
            .map(|j| (std::f64::consts::PI * j as f64 / (m + 1.0)).sin())
            .collect()
    }

    /// Piecewise-linear interpolant of interior values `u`, zero at the ends.
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        let t = (x - self.grid.x_left) / self.grid.h;
        if !(t > 0.0 && t < (self.grid.m + 1) as f64) {
            return 0.0;
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        let at = |j: usize| if j == 0 || j > self.grid.m { 0.0 } else { u[j - 1] };
        (1.0 - frac) * at(i) + frac * at(i + 1)
    }

    /// Derivatives of `E(u)` at fixed nodal values with respect to moving
    /// the left and right endpoint (nodes follow affinely).
    pub fn shape_sensitivities(&self, u: &[f64]) -> (f64, f64) {
        let m = self.grid.m;
        let h = self.grid.h;
        let mp1 = m as f64 + 1.0;
        let mut diff2 = 0.0;
        let mut prev = 0.0;
        for &x in u.iter().chain(std::iter::once(&0.0)) {
            diff2 += (x - prev).powi(2);
            prev = x;
        }
        let pot: f64 = u.iter().map(|&x| self.big_f(x)).sum();
        let wu: f64 = self.load.iter().zip(u).map(|(l, x)| l * x).sum::<f64>() / h;
        let bracket = -0.5 * diff2 / (h * h) - pot - wu;
        let mut slope_r = 0.0;
        let mut slope_l = 0.0;
        for (j, (ws, x)) in self.forcing_slope.iter().zip(u).enumerate() {
            let frac = (j as f64 + 1.0) / mp1;
            slope_r += ws * x * frac;
            slope_l += ws * x * (1.0 - frac);
        }
        let mut d_right = bracket / mp1 - h * slope_r;
        let mut d_left = -bracket / mp1 - h * slope_l;
        for &(xq, size) in &self.jumps {
            let s = (xq - self.grid.x_left) / self.grid.length();
            let uq = self.interpolate(u, xq);
            d_right -= size * s * uq;
            d_left -= size * (1.0 - s) * uq;
        }
        (d_left, d_right)
    }
}

/// The small local minimizer `ũ`: damped Newton from zero with positive
/// definite Hessians along the whole path and `Σ ω|ũ|^{p+1} < 1`.
pub fn solve_tilde(energy: &DiscreteEnergy, opts: &CellOptions) -> Result<Vec<f64>> {
    let m = energy.len();
    let mut u = vec![0.0; m];
    let load_norm = energy.dual_norm(&energy.load);
    if load_norm == 0.0 {
        return Ok(u);
    }
    let max_newton = 100;
    let mut converged = false;
    let mut last_grad = f64::INFINITY;
    for it in 0..max_newton {
        let g = energy.gradient(&u);
        let gn = energy.dual_norm(&g);
        last_grad = gn / load_norm;
        let hess = energy.hessian(&u);
        let fac = hess
            .ldlt()
            .map_err(|pivot| Error::CellTooLarge(CellFailure::HessianNotPd { iteration: it, pivot }))?;
        if gn <= opts.tol_newton * load_norm {
            converged = true;
            break;
        }
        let step: Vec<f64> = fac.solve(&g).iter().map(|v| -v).collect();
        let slope = dot(&g, &step);
        let e0 = energy.energy(&u);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            let e1 = energy.energy(&trial);
            // near convergence the energy difference drowns in rounding
            if e1 <= e0 + opts.armijo_slope * alpha * slope || (e1 - e0).abs() <= 1e-14 * e0.abs().max(1e-300) {
                u = trial;
                accepted = true;
                break;
            }
            alpha *= opts.backtrack;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        return Err(Error::CellTooLarge(CellFailure::NewtonStalled {
            iterations: max_newton,
            grad_norm: last_grad,
        }));
    }
    let mass = energy.mass(&u);
    if !(mass < 1.0) {
        return Err(Error::CellTooLarge(CellFailure::MassConstraintViolated { mass }));
    }
    Ok(u)
}

/// Maximum of `φ(t) = E(ũ + t d)` over `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayMax {
    pub t_star: f64,
    pub value: f64,
    /// `φ″(t⋆)`, negative at a strict maximum.
    pub curvature: f64,
}

/// Bracket the first sign change of `φ′` on `t > 0`, then refine it with
/// safeguarded Newton.
pub fn ray_maximize(energy: &DiscreteEnergy, u_tilde: &[f64], d: &[f64]) -> Result<RayMax> {
    if d.iter().all(|&x| x == 0.0) {
        return Err(Error::NoInteriorMax("zero direction".into()));
    }
    let point = |t: f64| -> Vec<f64> { u_tilde.iter().zip(d).map(|(a, b)| a + t * b).collect() };
    let dphi = |t: f64| dot(&energy.gradient(&point(t)), d);
    let ddphi = |t: f64| energy.hessian(&point(t)).quad_form(d);

    let q = energy.stiffness.quad_form(d);
    let r: f64 = d
        .iter()
        .zip(&energy.weights)
        .map(|(&x, o)| {
            let c = if x >= 0.0 { energy.c_plus } else { energy.c_minus };
            o * c * x.abs().powf(energy.p + 1.0)
        })
        .sum();
    let t0 = if r > 0.0 && q > 0.0 {
        (q / r).powf(1.0 / (energy.p - 1.0))
    } else {
        1.0
    };

    let (mut lo, mut hi);
    if dphi(t0) > 0.0 {
        lo = t0;
        hi = 2.0 * t0;
        let mut n = 0;
        while dphi(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > 200 || !hi.is_finite() {
                return Err(Error::NoInteriorMax(format!("phi' > 0 up to t = {hi:e}")));
            }
        }
    } else {
        hi = t0;
        lo = 0.5 * t0;
        while dphi(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-14 * t0 {
                return Err(Error::NoInteriorMax("phi' <= 0 arbitrarily close to 0".into()));
            }
        }
    }
    if dphi(2.0 * hi) > 0.0 || dphi(4.0 * hi) > 0.0 {
        log::warn!("ray maximization found more than one bracket; keeping the first");
    }

    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = dphi(t);
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let fd = ddphi(t);
        let mut next = if fd < 0.0 { t - f / fd } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t || hi - lo <= 4.0 * f64::EPSILON * hi {
            t = next;
            break;
        }
        t = next;
    }
    let curvature = ddphi(t);
    if !(curvature < 0.0) {
        return Err(Error::NoInteriorMax(format!("phi'' = {curvature:e} >= 0 at t = {t:e}")));
    }
    Ok(RayMax {
        t_star: t,
        value: energy.energy(&point(t)),
        curvature,
    })
}

/// Converged cell solution and its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub grid: CellGrid,
    pub sign: i8,
    pub u_tilde: Vec<f64>,
    pub u: Vec<f64>,
    pub energy_tilde: f64,
    pub energy: f64,
    pub flux_left: f64,
    pub flux_right: f64,
    pub nehari_residual: f64,
    pub grad_norm: f64,
    pub lp1_mass_tilde: f64,
    /// `∂E/∂x_left` at the solution (≈ `½ u′(x_left)²`).
    pub shape_left: f64,
    /// `∂E/∂x_right` at the solution (≈ `−½ u′(x_right)²`).
    pub shape_right: f64,
    pub iterations: usize,
}

impl CellSolution {
    /// Smallest value of `sign · (u − ũ)` over the nodes.
    pub fn cone_margin(&self) -> f64 {
        let s = self.sign as f64;
        self.u
            .iter()
            .zip(&self.u_tilde)
            .map(|(u, t)| s * (u - t))
            .fold(f64::INFINITY, f64::min)
    }
}

fn project_cone(u_tilde: &[f64], v: &[f64], sign: f64) -> Vec<f64> {
    v.iter()
        .zip(u_tilde)
        .map(|(x, t)| t + sign * (sign * (x - t)).max(0.0))
        .collect()
}

/// Newton on `∇E = 0` from `u`; `None` if it does not converge.
fn newton_polish(energy: &DiscreteEnergy, u: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut u = u.to_vec();
    for _ in 0..30 {
        if energy.relative_gradient(&u) <= tol {
            return Some(u);
        }
        let g = energy.gradient(&u);
        let hess = energy.hessian(&u);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = solve_tridiagonal(&hess.off, &hess.diag, &hess.off, &rhs)?;
        for (x, s) in u.iter_mut().zip(&step) {
            *x += s;
        }
        if u.iter().any(|x| !x.is_finite()) {
            return None;
        }
    }
    (energy.relative_gradient(&u) <= tol).then_some(u)
}

/// Minimize the ray maximum over the cone `sign · (u − ũ) ≥ 0`.
pub fn solve_cell_nehari(
    energy: &DiscreteEnergy,
    u_tilde: &[f64],
    sign: i8,
    opts: &CellOptions,
) -> Result<CellSolution> {
    let s = sign as f64;
    let m = energy.len();
    if m < 3 {
        return Err(Error::DegenerateCell {
            x_left: energy.grid.x_left,
            x_right: energy.grid.x_right,
        });
    }
    let energy_tilde = energy.energy(u_tilde);
    let d0: Vec<f64> = energy.first_eigenfunction().iter().map(|v| s * v).collect();
    let ray = ray_maximize(energy, u_tilde, &d0)?;
    let mut u: Vec<f64> = u_tilde.iter().zip(&d0).map(|(a, b)| a + ray.t_star * b).collect();
    let mut e = ray.value;
    let mut alpha = 1.0;
    let mut polish = true;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut nehari = f64::INFINITY;
    let mut converged = false;

    while iterations < opts.max_iterations {
        let g = energy.gradient(&u);
        let sg = energy.sobolev(&g);
        let gs = dot(&g, &sg).max(0.0);
        let reference = energy.dual_norm(&energy.rhs(&u)).max(f64::MIN_POSITIVE);
        grad_norm = gs.sqrt() / reference;
        let dir: Vec<f64> = u.iter().zip(u_tilde).map(|(a, b)| a - b).collect();
        nehari = dot(&g, &dir).abs();
        if nehari <= opts.tol_nehari * (1.0 + e.abs()) && grad_norm <= opts.tol_grad {
            converged = true;
            break;
        }
        if polish && grad_norm <= opts.polish_below {
            if let Some(v) = newton_polish(energy, &u, opts.tol_grad * 1e-2) {
                let ev = energy.energy(&v);
                let in_cone = v.iter().zip(u_tilde).all(|(x, t)| s * (x - t) >= -1e-12);
                let same_level = (ev - e).abs() <= 1e-4 * (1.0 + e.abs());
                if in_cone && same_level && v != u_tilde {
                    u = v;
                    e = ev;
                    polish = false;
                    continue;
                }
            }
            polish = false;
        }

        iterations += 1;
        let mut accepted = None;
        let mut a = alpha;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&sg).map(|(x, v)| x - a * v).collect();
            let trial = project_cone(u_tilde, &trial, s);
            let d: Vec<f64> = trial.iter().zip(u_tilde).map(|(x, t)| x - t).collect();
            let predicted: f64 = g.iter().zip(trial.iter().zip(&u)).map(|(gi, (x, y))| gi * (x - y)).sum();
            if let Ok(r) = ray_maximize(energy, u_tilde, &d) {
                if r.value <= e + opts.armijo_slope * predicted {
                    let next: Vec<f64> = u_tilde.iter().zip(&d).map(|(t, di)| t + r.t_star * di).collect();
                    accepted = Some((next, r.value, a));
                    break;
                }
            }
            a *= opts.backtrack;
        }
        match accepted {
            Some((next, value, step)) => {
                // Barzilai–Borwein length in the stiffness metric
                let ds: Vec<f64> = next.iter().zip(&u).map(|(x, y)| x - y).collect();
                let g_next = energy.gradient(&next);
                let dg: Vec<f64> = g_next.iter().zip(&g).map(|(x, y)| x - y).collect();
                let sy = dot(&ds, &dg);
                let ss = energy.stiffness.quad_form(&ds);
                alpha = if sy > 0.0 { (ss / sy).clamp(1e-3, 1e3) } else { (2.0 * step).min(1e3) };
                u = next;
                e = value;
            }
            None => break,
        }
    }
    if !converged {
        return Err(Error::MaxIterations {
            iterations,
            nehari_residual: nehari,
            grad_norm,
        });
    }
    if u.iter().zip(u_tilde).all(|(a, b)| a == b) {
        return Err(Error::NoInteriorMax("solution collapsed onto the local minimizer".into()));
    }
    let (flux_left, flux_right) = endpoint_flux(&u, energy.grid.h);
    let (shape_left, shape_right) = energy.shape_sensitivities(&u);
    Ok(CellSolution {
        grid: energy.grid.clone(),
        sign,
        u_tilde: u_tilde.to_vec(),
        u,
        energy_tilde,
        energy: e,
        flux_left,
        flux_right,
        nehari_residual: nehari,
        grad_norm,
        lp1_mass_tilde: energy.mass(u_tilde),
        shape_left,
        shape_right,
        iterations,
    })
}

/// Discretize, compute `ũ`, then the cone-constrained critical point.
pub fn solve_cell(
    spec: &ProblemSpec,
    x_left: f64,
    x_right: f64,
    m: usize,
    sign: i8,
    opts: &CellOptions,
) -> Result<CellSolution> {
    let energy = discretize_cell(spec, x_left, x_right, m)?;
    let u_tilde = solve_tilde(&energy, opts)?;
    solve_cell_nehari(&energy, &u_tilde, sign, opts)
}

fn endpoint_flux(u: &[f64], h: f64) -> (f64, f64) {
    let m = u.len();
    let left = (4.0 * u[0] - u[1]) / (2.0 * h);
    let right = (u[m - 2] - 4.0 * u[m - 1]) / (2.0 * h);
    (left, right)
}

/// One-sided second-order estimates of `u′` at both cell endpoints.
pub fn cell_flux(solution: &CellSolution) -> (f64, f64) {
    endpoint_flux(&solution.u, solution.grid.h)
}

/// Minimizer of `E` on `{Σ ω|u|^{p+1} = 1}`.
#[derive(Debug, Clone)]
pub struct ConstrainedMin {
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub iterations: usize,
}

/// Constrained infimum by Sobolev-gradient descent along the constraint
/// tangent with radial renormalization; started from `±φ₁`, best kept.
pub fn constrained_infimum(energy: &DiscreteEnergy, opts: &CellOptions) -> Result<ConstrainedMin> {
    let phi = energy.first_eigenfunction();
    let minus: Vec<f64> = phi.iter().map(|v| -v).collect();
    let a = constrained_descent(energy, &phi, opts)?;
    let b = constrained_descent(energy, &minus, opts)?;
    Ok(if b.value < a.value { b } else { a })
}

fn constrained_descent(energy: &DiscreteEnergy, start: &[f64], opts: &CellOptions) -> Result<ConstrainedMin> {
    let p1 = energy.p + 1.0;
    let normalize = |v: &[f64]| -> Vec<f64> {
        let c = energy.mass(v).powf(1.0 / p1);
        v.iter().map(|x| x / c).collect()
    };
    let mut u = normalize(start);
    let mut e = energy.energy(&u);
    let mut alpha = 1.0;
    let mut last = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let g = energy.gradient(&u);
        let sg = energy.sobolev(&g);
        let n: Vec<f64> = u
            .iter()
            .zip(&energy.weights)
            .map(|(x, o)| o * p1 * x.abs().powf(energy.p - 1.0) * x)
            .collect();
        let sn = energy.sobolev(&n);
        let coef = dot(&n, &sg) / dot(&n, &sn);
        let tangent: Vec<f64> = sg.iter().zip(&sn).map(|(a, b)| a - coef * b).collect();
        let gt = dot(&g, &tangent).max(0.0);
        let scale = energy.stiffness.quad_form(&u).sqrt() + energy.dual_norm(&energy.load);
        last = gt.sqrt() / scale;
        if last <= opts.tol_grad {
            return Ok(ConstrainedMin {
                value: e,
                minimizer: u,
                iterations: it,
            });
        }
        let mut a = alpha;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&tangent).map(|(x, t)| x - a * t).collect();
            let trial = normalize(&trial);
            let et = energy.energy(&trial);
            if et <= e - opts.armijo_slope * a * gt {
                let ds: Vec<f64> = trial.iter().zip(&u).map(|(x, y)| x - y).collect();
                let dg: Vec<f64> = energy.gradient(&trial).iter().zip(&g).map(|(x, y)| x - y).collect();
                let sy = dot(&ds, &dg);
                let ss = energy.stiffness.quad_form(&ds);
                alpha = if sy > 0.0 { (ss / sy).clamp(1e-4, 1e4) } else { (2.0 * a).min(1e4) };
                u = trial;
                e = et;
                accepted = true;
                break;
            }
            a *= opts.backtrack;
        }
        if !accepted {
            // rounding floor reached: accept when already tight
            if last <= 1e3 * opts.tol_grad {
                return Ok(ConstrainedMin {
                    value: e,
                    minimizer: u,
                    iterations: it,
                });
            }
            break;
        }
    }
    Err(Error::MaxIterations {
        iterations: opts.max_iterations,
        nehari_residual: f64::NAN,
        grad_norm: last,
    })
}
