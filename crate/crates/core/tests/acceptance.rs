//! Acceptance criteria AC-1 .. AC-10.
//!
//! Reference setup unless a test says otherwise: (0,1), p = 3,
//! c₊ = c₋ = 1, w = 2 sin(3πx), J = k, global spacing h = 1e-3, shooting
//! step 1e-4. Every test prints one `AC-n PASS|FAIL` line.

use std::f64::consts::PI;
use std::io::Write;

use checksolve::assemble::{zero_localization_check, GluedSolution};
use checksolve::cellsolve::{discretize_cell, solve_cell, CellOptions};
use checksolve::cli::{solve_and_verify, SolveRun};
use checksolve::config::{KSetting, RunConfig};
use checksolve::model::{ForcingSpec, Partition, ProblemSpec};
use checksolve::oracle::{adversarial_forcing, compute_split, shooting_match};
use checksolve::partition::{breakpoint_gradient, total_energy, OuterOptions};

const SWEEP: [usize; 4] = [8, 16, 32, 64];

fn report(id: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // bypass the test harness capture so the line always shows
    let _ = writeln!(std::io::stdout().lock(), "{id} {verdict}: {detail}");
    assert!(pass, "{id} failed: {detail}");
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn reference() -> RunConfig {
    RunConfig::default()
}

fn unforced(p: f64, c_plus: f64, c_minus: f64) -> ProblemSpec {
    ProblemSpec::new(0.0, 1.0, p, c_plus, c_minus, ForcingSpec::zero()).unwrap()
}

fn run(cfg: &RunConfig, spec: &ProblemSpec, k: usize) -> SolveRun {
    let cfg = RunConfig {
        k: KSetting::One(k),
        ..cfg.clone()
    };
    let r = solve_and_verify(&cfg, spec, k).unwrap();
    assert!(r.outer_error.is_none(), "k = {k}: {:?}", r.outer_error);
    r
}

fn sweep(cfg: &RunConfig, spec: &ProblemSpec) -> Vec<SolveRun> {
    SWEEP.iter().map(|&k| run(cfg, spec, k)).collect()
}

fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Thomas algorithm for a symmetric tridiagonal system.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// Relative H⁻¹ residual of the glued profile, assembled here from scratch.
fn independent_residual(spec: &ProblemSpec, g: &GluedSolution) -> f64 {
    let (x, u) = (&g.global_nodes, &g.values);
    let n = x.len() - 2;
    let (mut diag, mut off, mut res, mut load) = (vec![], vec![], vec![], vec![]);
    for i in 1..=n {
        let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        diag.push(1.0 / hl + 1.0 / hr);
        if i < n {
            off.push(-1.0 / hr);
        }
        let f = spec.c_plus * u[i].max(0.0).powf(spec.p) - spec.c_minus * (-u[i]).max(0.0).powf(spec.p);
        let l = 0.5 * (hl + hr) * (f + spec.forcing.eval(x[i]));
        res.push(-u[i - 1] / hl + (1.0 / hl + 1.0 / hr) * u[i] - u[i + 1] / hr - l);
        load.push(l);
    }
    let dual = |v: &[f64]| {
        let z = thomas(&diag, &off, v);
        v.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().sqrt()
    };
    dual(&res) / dual(&load)
}

#[test]
fn ac01_nehari_residual_and_cone() {
    let cfg = reference();
    let asym = unforced(3.0, 1.0, 16.0);
    let mut worst_nehari: f64 = 0.0;
    let mut worst_cone = f64::INFINITY;
    let mut cells = 0;
    for (spec, k) in [(&cfg.problem, 8), (&cfg.problem, 16), (&asym, 8)] {
        let r = run(&cfg, spec, k);
        for c in &r.state.cells {
            worst_nehari = worst_nehari.max(c.nehari_residual / (1.0 + c.energy.abs()));
            worst_cone = worst_cone.min(c.cone_margin());
            cells += 1;
        }
    }
    report(
        "AC-1",
        worst_nehari <= 1e-8 && worst_cone >= -1e-12,
        format!("{cells} cells, max |E'(u)[u-ũ]|/(1+|E|) = {worst_nehari:.3e}, min cone margin = {worst_cone:.3e}"),
    );
}

#[test]
fn ac02_shooting_oracle_equivalence() {
    let cfg = reference();
    let r = run(&cfg, &cfg.problem, 8);
    let m = shooting_match(&cfg.problem, &r.glued, 1e-4).unwrap();
    report(
        "AC-2",
        m.sup_error <= 1e-5 && m.zero_count_match,
        format!(
            "k = J = 8: sup error {:.3e} (limit 1e-5), zero counts {} vs {}",
            m.sup_error, m.shooting_zero_count, m.glued_zero_count
        ),
    );
}

#[test]
fn ac03_flux_matching_and_stationarity() {
    let cfg = reference();
    let mut worst_flux: f64 = 0.0;
    let mut worst_defect: f64 = 0.0;
    for r in sweep(&cfg, &cfg.problem) {
        let g = &r.glued;
        let scale = g.cell_fluxes.iter().flat_map(|f| [f.0.abs(), f.1.abs()]).fold(0.0, f64::max);
        let mismatch = g
            .cell_fluxes
            .windows(2)
            .map(|w| (w[0].1.abs() - w[1].0.abs()).abs())
            .fold(0.0, f64::max);
        worst_flux = worst_flux.max(mismatch / scale);
        assert_eq!(g.stationarity_defects.len(), 8);
        worst_defect = g.stationarity_defects.iter().fold(worst_defect, |m, d| m.max(d.abs()));
    }
    report(
        "AC-3",
        worst_flux <= 1e-5 && worst_defect <= 1e-5,
        format!("k in {SWEEP:?}: max |u'| mismatch / max|u'| = {worst_flux:.3e}, max stationarity defect (m = 1..8) = {worst_defect:.3e}"),
    );
}

#[test]
fn ac04_global_residual() {
    let cfg = reference();
    let r = run(&cfg, &cfg.problem, 16);
    let ours = independent_residual(&cfg.problem, &r.glued);
    let agree = (ours - r.glued.residual_relative).abs() <= 1e-6 * ours.max(1e-12) + 1e-14;
    report(
        "AC-4",
        ours <= 1e-6 && agree,
        format!(
            "k = J = 16: relative H^-1 residual {ours:.3e} (solver reports {:.3e})",
            r.glued.residual_relative
        ),
    );
}

#[test]
fn ac05_scaling_law() {
    let opts = CellOptions::default();
    let mut details = Vec::new();
    let mut pass = true;
    for p in [2.0, 3.0, 5.0] {
        let spec = unforced(p, 1.0, 1.0);
        let pts: Vec<(f64, f64)> = [1.0, 0.5, 0.25, 0.125]
            .iter()
            .map(|&len: &f64| {
                let m = (len / 1e-3).round() as usize - 1;
                (len, solve_cell(&spec, 0.0, len, m, 1, &opts).unwrap().energy)
            })
            .collect();
        let slope = loglog_slope(&pts);
        let expected = -(p + 3.0) / (p - 1.0);
        pass &= (slope - expected).abs() <= 1e-2;
        details.push(format!("p = {p}: slope {slope:.6} vs {expected:.6}"));
    }
    report("AC-5", pass, details.join(", "));
}

#[test]
fn ac06_partition_uniformity() {
    let cfg = reference();
    let runs = sweep(&cfg, &cfg.problem);
    let excess: Vec<f64> = runs.iter().map(|r| r.state.lipschitz - 1.0).collect();
    let decreasing = excess.windows(2).all(|w| w[1] < w[0]);
    let last = runs.last().unwrap().state.lipschitz;
    report(
        "AC-6",
        decreasing && last < 1.05,
        format!("L - 1 along k = {SWEEP:?}: {}; L(64) = {last:.12}", sci(&excess)),
    );
}

#[test]
fn ac07_energy_blow_up() {
    let cfg = reference();
    let forced: Vec<f64> = sweep(&cfg, &cfg.problem).iter().map(|r| r.glued.min_cell_energy()).collect();
    let increasing = forced.windows(2).all(|w| w[1] > w[0]);
    let ratio = forced[3] / forced[0];

    let free = unforced(3.0, 1.0, 1.0);
    let free_min: Vec<(f64, f64)> = sweep(&cfg, &free)
        .iter()
        .zip(SWEEP)
        .map(|(r, k)| (k as f64, r.glued.min_cell_energy()))
        .collect();
    let free_increasing = free_min.windows(2).all(|w| w[1].1 > w[0].1);
    let exponent = loglog_slope(&free_min);
    report(
        "AC-7",
        increasing && free_increasing && (exponent - 3.0).abs() <= 0.05 && ratio >= 100.0,
        format!("min cell energy (w != 0) {}, ratio E(64)/E(8) = {ratio:.2}; w = 0 exponent {exponent:.5} vs 3", sci(&forced)),
    );
}

/// Minimum of `E₊(t) + E₋(2 − t)` from real cell solves on a t-grid,
/// refined by a parabola through the best three samples.
fn brute_force_split(spec: &ProblemSpec, lo: f64, hi: f64, steps: usize) -> f64 {
    let opts = CellOptions::default();
    let m = 199;
    let e = |t: f64| {
        solve_cell(spec, 0.0, t, m, 1, &opts).unwrap().energy + solve_cell(spec, 0.0, 2.0 - t, m, -1, &opts).unwrap().energy
    };
    let ts: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let es: Vec<f64> = ts.iter().map(|&t| e(t)).collect();
    let i = (1..steps).min_by(|&a, &b| es[a].total_cmp(&es[b])).unwrap();
    let (e0, e1, e2) = (es[i - 1], es[i], es[i + 1]);
    let h = ts[i] - ts[i - 1];
    ts[i] + 0.5 * h * (e0 - e2) / (e0 - 2.0 * e1 + e2)
}

#[test]
fn ac08_asymmetric_split() {
    let sym = compute_split(&unforced(3.0, 1.0, 1.0), 999).unwrap();
    let sym_ok = (sym.t_hat - 1.0).abs() <= 1e-6 && (sym.l_hat - 1.0).abs() <= 1e-6;

    let asym_spec = unforced(3.0, 1.0, 16.0);
    let asym = compute_split(&asym_spec, 999).unwrap();
    let brute = brute_force_split(&asym_spec, 1.2, 1.45, 250);
    let split_ok = (asym.t_hat - brute).abs() <= 1e-4;

    let cfg = reference();
    let r = run(&cfg, &asym_spec, 64);
    let lengths = r.state.partition.lengths();
    let (mut pos, mut neg) = (vec![], vec![]);
    for (l, s) in lengths.iter().zip(&r.state.partition.signs) {
        if *s > 0 { pos.push(*l) } else { neg.push(*l) }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ratio = mean(&pos) / mean(&neg);
    let target = asym.t_hat / (2.0 - asym.t_hat);
    let ratio_ok = (ratio / target - 1.0).abs() <= 0.05;
    let l_ok = (r.state.lipschitz / asym.l_hat - 1.0).abs() <= 0.05;
    report(
        "AC-8",
        sym_ok && split_ok && ratio_ok && l_ok,
        format!(
            "c+ = c-: t = {:.9}, L = {:.9}; (1,16): t = {:.9} vs brute force {brute:.9}; k = 64 length ratio {ratio:.6} vs {target:.6}, L = {:.6} vs {:.6}",
            sym.t_hat, sym.l_hat, asym.t_hat, r.state.lipschitz, asym.l_hat
        ),
    );
}

#[test]
fn ac09_forced_zero_count() {
    let base = unforced(3.0, 1.0, 1.0);
    let w = adversarial_forcing(&base, 3, 1.0).unwrap();
    let spec = ProblemSpec { forcing: w, ..base };
    let mut solved = Vec::new();
    let mut pass = true;
    let mut notes = Vec::new();
    for first_sign in [1i8, -1] {
        for k in 3..=8 {
            let cfg = RunConfig {
                k: KSetting::One(k),
                tolerances: OuterOptions {
                    first_sign,
                    ..OuterOptions::default()
                },
                ..reference()
            };
            match solve_and_verify(&cfg, &spec, k) {
                Ok(r) => {
                    let ok = r.outer_error.is_none() && zero_localization_check(&r.glued, 3, &spec).is_ok() && r.glued.zeros.len() >= 2;
                    if !ok {
                        notes.push(format!("k = {k}, first sign {first_sign}: {:?}", r.outer_error));
                    }
                    pass &= ok;
                    solved.push((k, first_sign, r.glued.zeros.len()));
                }
                Err(e) if e.is_cell_too_large() => {}
                Err(e) => {
                    pass = false;
                    notes.push(format!("k = {k}, first sign {first_sign}: {e}"));
                }
            }
        }
    }
    pass &= !solved.is_empty();
    report(
        "AC-9",
        pass,
        format!("solutions (k, first sign, zeros) {solved:?} all localized with sign pattern {notes:?}"),
    );
}

#[test]
fn ac10_gradient_checks() {
    let opts = CellOptions::default();
    let demo = reference().problem;
    let base = unforced(3.0, 1.0, 1.0);
    let adversarial = ProblemSpec {
        forcing: adversarial_forcing(&base, 2, 1.0).unwrap(),
        ..base
    };
    let mut worst_break: f64 = 0.0;
    let cases = [
        (&demo, Partition::new(4, vec![0.0, 0.22, 0.51, 0.74, 1.0], 1).unwrap(), 99),
        (&adversarial, Partition::new(5, vec![0.0, 0.19, 0.41, 0.58, 0.8, 1.0], 1).unwrap(), 199),
    ];
    for (spec, p, m) in cases {
        let s = total_energy(spec, &p, m, 2.0, &opts).unwrap();
        let g = breakpoint_gradient(&s);
        let d = 1e-6;
        for i in 1..p.breakpoints.len() - 1 {
            let shifted = |delta: f64| {
                let mut b = p.breakpoints.clone();
                b[i] += delta;
                total_energy(spec, &Partition::new(p.k, b, 1).unwrap(), m, 2.0, &opts).unwrap().total_energy
            };
            let fd = (shifted(d) - shifted(-d)) / (2.0 * d);
            worst_break = worst_break.max((g[i - 1] - fd).abs() / fd.abs());
        }
    }

    let e = discretize_cell(&demo, 0.1, 0.35, 60).unwrap();
    let u: Vec<f64> = (0..60).map(|j| 2.0 * (PI * (j + 1) as f64 / 61.0).sin() + 0.1 * (j as f64).cos()).collect();
    let grad = e.gradient(&u);
    let mut worst_cell: f64 = 0.0;
    for j in 0..60 {
        let d = 1e-6;
        let (mut up, mut um) = (u.clone(), u.clone());
        up[j] += d;
        um[j] -= d;
        let fd = (e.energy(&up) - e.energy(&um)) / (2.0 * d);
        worst_cell = worst_cell.max((fd - grad[j]).abs() / grad[j].abs().max(1.0));
    }
    report(
        "AC-10",
        worst_break <= 1e-4 && worst_cell <= 1e-6,
        format!("breakpoint gradient rel. error {worst_break:.3e}, cell energy gradient rel. error {worst_cell:.3e}"),
    );
}
