//! Shooting from the glued initial slope reproduces the glued profile,
//! with the P1 error shrinking at second order.

use checksolve::cli::solve_and_verify;
use checksolve::config::{KSetting, RunConfig};
use checksolve::model::ProblemSpec;
use checksolve::oracle::shooting_match;

fn sup_error(p: f64, spacing: f64) -> (f64, bool) {
    let mut cfg = RunConfig {
        k: KSetting::One(4),
        spacing,
        ..RunConfig::default()
    };
    cfg.problem = ProblemSpec { p, ..cfg.problem };
    let run = solve_and_verify(&cfg, &cfg.problem, 4).unwrap();
    assert!(run.outer_error.is_none(), "p = {p}: {:?}", run.outer_error);
    let m = shooting_match(&cfg.problem, &run.glued, 2e-5).unwrap();
    (m.sup_error, m.zero_count_match)
}

#[test]
fn shooting_error_is_second_order_in_spacing() {
    for p in [2.0, 3.0, 5.0] {
        let (coarse, z1) = sup_error(p, 1e-3);
        let (fine, z2) = sup_error(p, 5e-4);
        assert!(z1 && z2, "p = {p}: zero counts differ");
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "p = {p}: {coarse:e} / {fine:e} = {ratio}");
    }
}
