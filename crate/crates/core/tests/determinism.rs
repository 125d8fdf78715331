//! Identical configuration and seed give bit-identical results.

use checksolve::cli::{solve_and_verify, SolveRun};
use checksolve::config::{KSetting, RunConfig};

fn solve(seed: u64) -> SolveRun {
    let mut cfg = RunConfig {
        k: KSetting::One(8),
        seed,
        ..RunConfig::default()
    };
    cfg.tolerances.multistart = 2;
    solve_and_verify(&cfg, &cfg.problem, 8).unwrap()
}

fn bytes(run: &SolveRun) -> Vec<u8> {
    let mut buf = Vec::new();
    run.glued.write_json(&mut buf).unwrap();
    run.state.write_history_csv(&mut buf).unwrap();
    buf
}

#[test]
fn repeated_runs_are_bit_identical() {
    assert_eq!(bytes(&solve(7)), bytes(&solve(7)));
}

#[test]
fn seeds_reach_the_same_optimum() {
    let a = solve(1).glued;
    let b = solve(2).glued;
    let rel = (a.total_energy - b.total_energy).abs() / a.total_energy;
    assert!(rel < 1e-10, "{rel:e}");
    for (x, y) in a.breakpoints.iter().zip(&b.breakpoints) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}
