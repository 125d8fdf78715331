//! Subcommands of the `checksolve` binary.
//!
//! Every command returns a [`Report`]: a list of named gates with the
//! measured value and threshold. The process exit code is 0 when all gates
//! pass, [`EXIT_GATE`] when a gate fails and [`EXIT_ERROR`] on hard errors.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::assemble::{self, glue, zero_localization_check, GluedSolution, ZeroReport};
use crate::cellsolve::solve_cell;
use crate::config::{Emit, RunConfig};
use crate::error::{Error, Result};
use crate::model::{ForcingSpec, ProblemSpec};
use crate::oracle::{self, ShootingMatch, SignConditions};
use crate::partition::{optimize_partition, OuterOptions, OuterState};
use crate::svg::{Plot, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_GATE: i32 = 2;

/// Cone membership slack for accepted cells.
const CONE_SLACK: f64 = 1e-12;
/// Relative tolerance of the energy-additivity check in `verify`.
const ADDITIVITY_TOL: f64 = 1e-12;
/// Allowed deviation of the fitted length exponent.
const SCALING_TOL: f64 = 1e-2;

#[derive(Debug, Parser)]
#[command(name = "checksolve", version, about = "Sign-changing solutions by cellwise Nehari minimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of json,csv,svg.
    #[arg(long, global = true, value_delimiter = ',')]
    pub emit: Option<Vec<Emit>>,
    /// Multistart seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// File stem of the profile CSV and SVG.
    #[arg(long, global = true, default_value = "profile")]
    pub stem: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve at one k and run every verification gate.
    Solve,
    /// Solve along the configured k list.
    Sweep,
    /// Solve with a forcing that pins the zeros of an eigenfunction.
    Adversarial,
    /// Report the optimal positive/negative length split.
    Split,
    /// Ground-state energy against cell length for w = 0.
    Scaling,
    /// Re-check a saved solution.json.
    Verify { solution: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Gate {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }

    fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed: ok,
        }
    }
}

/// Machine-readable outcome of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub passed: bool,
    pub gates: Vec<Gate>,
    pub error: Option<String>,
}

impl Report {
    fn new(command: &str, gates: Vec<Gate>) -> Self {
        Self {
            command: command.into(),
            passed: gates.iter().all(|g| g.passed),
            gates,
            error: None,
        }
    }

    fn failed(command: &str, error: &Error) -> Self {
        Self {
            command: command.into(),
            passed: false,
            gates: Vec::new(),
            error: Some(error.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match (&self.error, self.passed) {
            (Some(_), _) => EXIT_ERROR,
            (None, true) => EXIT_OK,
            (None, false) => EXIT_GATE,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| !g.passed)
    }
}

/// Parse arguments, run the command and print its report to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let name = command_name(&cli.command);
    let report = crate::par::with_thread_cap(|| match load_config(&cli) {
        Ok(cfg) => dispatch(&cli, &cfg).unwrap_or_else(|e| Report::failed(name, &e)),
        Err(e) => Report::failed(name, &e),
    });
    for g in report.failing() {
        log::error!("gate {} failed: {:e} vs threshold {:e}", g.name, g.value, g.threshold);
    }
    if let Some(e) = &report.error {
        log::error!("{name}: {e}");
    }
    match serde_json::to_string_pretty(&report) {
        Ok(s) => println!("{s}"),
        Err(e) => log::error!("could not serialize report: {e}"),
    }
    report.exit_code()
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Solve => "solve",
        Command::Sweep => "sweep",
        Command::Adversarial => "adversarial",
        Command::Split => "split",
        Command::Scaling => "scaling",
        Command::Verify { .. } => "verify",
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(emit) = &cli.emit {
        cfg.emit = emit.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<Report> {
    let out = Output::new(&cfg.output_dir, cfg, &cli.stem)?;
    match &cli.command {
        Command::Solve => cmd_solve(cfg, &out),
        Command::Sweep => cmd_sweep(cfg, &out),
        Command::Adversarial => cmd_adversarial(cfg, &out),
        Command::Split => cmd_split(cfg, &out),
        Command::Scaling => cmd_scaling(cfg, &out),
        Command::Verify { solution } => cmd_verify(cfg, solution, &out),
    }
}

/// Where and what to write.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub stem: String,
    json: bool,
    csv: bool,
    svg: bool,
}

impl Output {
    pub fn new(dir: &Path, cfg: &RunConfig, stem: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            json: cfg.emits(Emit::Json),
            csv: cfg.emits(Emit::Csv),
            svg: cfg.emits(Emit::Svg),
        })
    }

    fn child(&self, name: &str) -> Result<Self> {
        let dir = self.dir.join(name);
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, ..self.clone() })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if self.json {
            serde_json::to_writer_pretty(self.create(name)?, value)?;
        }
        Ok(())
    }

    fn svg(&self, name: &str, plot: &Plot) -> Result<()> {
        if self.svg {
            std::fs::write(self.dir.join(name), plot.render())?;
        }
        Ok(())
    }
}

/// Everything produced by one solve.
#[derive(Debug, Clone)]
pub struct SolveRun {
    pub state: OuterState,
    pub glued: GluedSolution,
    pub shooting: Option<ShootingMatch>,
    pub outer_error: Option<String>,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Serialize)]
struct Diagnostics<'a> {
    k: usize,
    cells: usize,
    m_per_cell: usize,
    #[serde(rename = "L")]
    lipschitz: f64,
    total_energy: f64,
    min_cell_energy: f64,
    zero_count: usize,
    zeros: &'a [f64],
    breakpoints: &'a [f64],
    outer_iterations: usize,
    outer_converged: bool,
    outer_at_rounding_floor: bool,
    outer_error: &'a Option<String>,
    stationarity: f64,
    max_flux_jump: f64,
    max_abs_flux: f64,
    residual_relative: f64,
    stationarity_defects: &'a [f64],
    shooting: &'a Option<ShootingMatch>,
    gates: &'a [Gate],
}

fn outer_options(cfg: &RunConfig) -> OuterOptions {
    OuterOptions {
        seed: cfg.seed,
        ..cfg.tolerances.clone()
    }
}

/// Optimize, glue and verify the problem `spec` at index `k`.
pub fn solve_and_verify(cfg: &RunConfig, spec: &ProblemSpec, k: usize) -> Result<SolveRun> {
    let cells = cfg.cells.resolve(k);
    let m = cfg.m_for(cells);
    let (state, outer_error) = match optimize_partition(spec, k, cells, cfg.l_bound, m, &outer_options(cfg)) {
        Ok(s) => (s, None),
        Err(e) => match e.outer_state() {
            Some(s) => (s.clone(), Some(e.to_string())),
            None => return Err(e),
        },
    };
    let glued = glue(&state);
    let shooting = match oracle::shooting_match(spec, &glued, cfg.shooting_step) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("shooting oracle failed: {e}");
            None
        }
    };
    let gates = solve_gates(cfg, &state, &glued, shooting.as_ref(), outer_error.is_none());
    Ok(SolveRun {
        state,
        glued,
        shooting,
        outer_error,
        gates,
    })
}

fn solve_gates(
    cfg: &RunConfig,
    state: &OuterState,
    glued: &GluedSolution,
    shooting: Option<&ShootingMatch>,
    outer_ok: bool,
) -> Vec<Gate> {
    let tol = &cfg.tolerances;
    let nehari = state
        .cells
        .iter()
        .map(|c| c.nehari_residual / (1.0 + c.energy.abs()))
        .fold(0.0, f64::max);
    let cone = state.cells.iter().map(|c| c.cone_margin()).fold(f64::INFINITY, f64::min);
    let flux = glued.max_flux_jump() / glued.max_abs_flux().max(f64::MIN_POSITIVE);
    let defect = glued.stationarity_defects.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
    let mut gates = vec![
        Gate::holds("outer_converged", outer_ok && state.converged),
        Gate::at_most("nehari_residual", nehari, tol.cell.tol_nehari),
        Gate::at_least("cone_margin", cone, -CONE_SLACK),
        Gate::at_most("flux_mismatch", flux, tol.tol_flux),
        Gate::at_most("stationarity_defect", defect, cfg.gates.stationarity),
        Gate::at_most("residual", glued.residual_relative, cfg.gates.residual),
        Gate::holds("shooting_zero_count", shooting.is_some_and(|s| s.zero_count_match)),
    ];
    if let Some(limit) = cfg.gates.shooting_sup {
        let err = shooting.map_or(f64::INFINITY, |s| s.sup_error);
        gates.push(Gate::at_most("shooting_sup", err, limit));
    }
    gates
}

fn write_solve(out: &Output, run: &SolveRun) -> Result<()> {
    let glued = &run.glued;
    if out.json {
        glued.write_json(out.create("solution.json")?)?;
    }
    out.json(
        "diagnostics.json",
        &Diagnostics {
            k: glued.k,
            cells: glued.cells(),
            m_per_cell: run.state.m_per_cell,
            lipschitz: run.state.lipschitz,
            total_energy: glued.total_energy,
            min_cell_energy: glued.min_cell_energy(),
            zero_count: glued.zeros.len(),
            zeros: &glued.zeros,
            breakpoints: &glued.breakpoints,
            outer_iterations: run.state.iterations,
            outer_converged: run.state.converged,
            outer_at_rounding_floor: run.state.at_rounding_floor,
            outer_error: &run.outer_error,
            stationarity: run.state.stationarity,
            max_flux_jump: glued.max_flux_jump(),
            max_abs_flux: glued.max_abs_flux(),
            residual_relative: glued.residual_relative,
            stationarity_defects: &glued.stationarity_defects,
            shooting: &run.shooting,
            gates: &run.gates,
        },
    )?;
    if out.csv {
        glued.write_csv(out.create(&format!("{}.csv", out.stem))?)?;
        run.state.write_history_csv(out.create("history.csv")?)?;
    }
    if out.svg {
        out.svg(&format!("{}.svg", out.stem), &profile_plot(glued))?;
    }
    Ok(())
}

fn profile_plot(glued: &GluedSolution) -> Plot {
    Plot {
        title: format!("u, k = {}, J = {}", glued.k, glued.cells()),
        x_label: "x".into(),
        y_label: "u".into(),
        series: vec![Series {
            label: String::new(),
            points: glued.global_nodes.iter().cloned().zip(glued.values.iter().cloned()).collect(),
            dots: false,
        }],
        markers: glued.zeros.clone(),
        ..Default::default()
    }
}

fn single_k(cfg: &RunConfig) -> Result<usize> {
    match cfg.k.values().as_slice() {
        [k] => Ok(*k),
        ks => Err(Error::Config(format!("solve takes one k, got {ks:?}; use sweep"))),
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Output) -> Result<Report> {
    let k = single_k(cfg)?;
    let run = solve_and_verify(cfg, &cfg.problem, k)?;
    log::info!(
        "k = {k}: E = {:.12e}, L = {:.9}, {} zeros",
        run.glued.total_energy,
        run.state.lipschitz,
        run.glued.zeros.len()
    );
    write_solve(out, &run)?;
    Ok(Report::new("solve", run.gates))
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    #[serde(rename = "J")]
    pub cells: usize,
    pub total_energy: f64,
    pub min_cell_energy: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub max_flux_jump: f64,
    pub zero_count: usize,
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    rows: &'a [SweepRow],
    failures: &'a [(usize, String)],
    /// Least-squares slope of log min_cell_energy against log k.
    energy_exponent: Option<f64>,
    /// `(p + 3)/(p − 1)`, the exponent expected for w = 0.
    unforced_exponent: f64,
    note: &'static str,
    min_energy_increasing: bool,
    lipschitz_excess_decreasing: bool,
    zero_count_monotone: bool,
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Output) -> Result<Report> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut gates = Vec::new();
    for k in cfg.k.values() {
        let dir = out.child(&format!("k{k}"))?;
        match solve_and_verify(cfg, &cfg.problem, k) {
            Ok(run) => {
                write_solve(&dir, &run)?;
                for g in &run.gates {
                    gates.push(Gate {
                        name: format!("k{k}.{}", g.name),
                        ..g.clone()
                    });
                }
                rows.push(SweepRow {
                    k,
                    cells: run.glued.cells(),
                    total_energy: run.glued.total_energy,
                    min_cell_energy: run.glued.min_cell_energy(),
                    lipschitz: run.state.lipschitz,
                    max_flux_jump: run.glued.max_flux_jump(),
                    zero_count: run.glued.zeros.len(),
                });
            }
            Err(e) => {
                log::error!("k = {k}: {e}");
                gates.push(Gate::holds(&format!("k{k}.solved"), false));
                failures.push((k, e.to_string()));
            }
        }
    }
    let min_energy_increasing = rows.windows(2).all(|w| w[1].min_cell_energy > w[0].min_cell_energy);
    let lipschitz_excess_decreasing = rows.windows(2).all(|w| w[1].lipschitz <= w[0].lipschitz);
    let zero_count_monotone = rows
        .windows(2)
        .all(|w| w[1].cells < w[0].cells || w[1].zero_count >= w[0].zero_count);
    gates.push(Gate::holds("min_energy_increasing", min_energy_increasing));
    gates.push(Gate::holds("zero_count_monotone", zero_count_monotone));

    let energy_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.min_cell_energy)).collect();
    let excess_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.lipschitz - 1.0)).collect();
    if out.csv {
        let mut w = csv::Writer::from_writer(out.create("sweep.csv")?);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    out.json(
        "sweep.json",
        &SweepSummary {
            rows: &rows,
            failures: &failures,
            energy_exponent: loglog_slope(&energy_pts),
            unforced_exponent: oracle::length_exponent(cfg.problem.p),
            note: "empirical fit over the listed k; not a proven rate",
            min_energy_increasing,
            lipschitz_excess_decreasing,
            zero_count_monotone,
        },
    )?;
    let trend = |title: &str, y_label: &str, points: Vec<(f64, f64)>| Plot {
        title: title.into(),
        x_label: "k".into(),
        y_label: y_label.into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: String::new(),
            points,
            dots: true,
        }],
        ..Default::default()
    };
    out.svg("min_energy_vs_k.svg", &trend("min cell energy", "min E", energy_pts))?;
    out.svg("lipschitz_excess_vs_k.svg", &trend("L - 1", "L - 1", excess_pts))?;
    Ok(Report::new("sweep", gates))
}

#[derive(Debug, Serialize)]
struct AdversarialSummary<'a> {
    k_eig: usize,
    margin: f64,
    amplitude: f64,
    lambda: f64,
    k: usize,
    attempts: &'a [(usize, String)],
    localization: &'a Option<ZeroReport>,
    localization_error: &'a Option<String>,
    /// Per nodal region of the eigenfunction.
    sign_conditions: &'a [SignConditions],
    residual_relative: f64,
    zeros: &'a [f64],
}

pub fn cmd_adversarial(cfg: &RunConfig, out: &Output) -> Result<Report> {
    let adv = &cfg.adversarial;
    let base = ProblemSpec {
        forcing: ForcingSpec::zero(),
        ..cfg.problem.clone()
    };
    let forcing = oracle::adversarial_forcing(&base, adv.k_eig, adv.margin)?;
    let amplitude = forcing.eval(base.a + 0.5 * base.length() / adv.k_eig as f64).abs();
    let spec = ProblemSpec { forcing, ..base };
    let lambda = (adv.k_eig as f64 * std::f64::consts::PI / spec.length()).powi(2);
    let width = spec.length() / adv.k_eig as f64;
    let sign_conditions: Vec<SignConditions> = (0..adv.k_eig)
        .map(|i| {
            let lo = spec.a + i as f64 * width;
            oracle::verify_sign_conditions(&spec, lo, lo + width, lambda)
        })
        .collect();

    let mut attempts = Vec::new();
    let mut found = None;
    for k in adv.k_eig..=adv.max_k {
        match solve_and_verify(cfg, &spec, k) {
            Ok(run) => {
                found = Some((k, run));
                break;
            }
            Err(e) if e.is_cell_too_large() => {
                log::info!("k = {k}: {e}; refining");
                attempts.push((k, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    let Some((k, run)) = found else {
        return Err(Error::Config(format!(
            "no k in {}..={} passed the cell checks",
            adv.k_eig, adv.max_k
        )));
    };
    let (localization, localization_error) = match zero_localization_check(&run.glued, adv.k_eig, &spec) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let sign_ok = localization.as_ref().is_some_and(|r| r.regions.iter().all(|s| s.holds));
    let gates = vec![
        Gate::holds("outer_converged", run.outer_error.is_none() && run.state.converged),
        Gate::holds("localization", localization.is_some()),
        Gate::holds("sign_pattern", sign_ok),
        Gate::at_least("zero_count", run.glued.zeros.len() as f64, (adv.k_eig - 1) as f64),
    ];
    write_solve(out, &run)?;
    out.json(
        "adversarial.json",
        &AdversarialSummary {
            k_eig: adv.k_eig,
            margin: adv.margin,
            amplitude,
            lambda,
            k,
            attempts: &attempts,
            localization: &localization,
            localization_error: &localization_error,
            sign_conditions: &sign_conditions,
            residual_relative: run.glued.residual_relative,
            zeros: &run.glued.zeros,
        },
    )?;
    Ok(Report::new("adversarial", gates))
}

#[derive(Debug, Serialize)]
struct SplitSummary<'a> {
    c_plus: f64,
    c_minus: f64,
    p: f64,
    t_hat: f64,
    l_hat: f64,
    /// `t̂/(2 − t̂)`, the positive-to-negative cell length ratio.
    length_ratio: f64,
    unit_energy: f64,
    local_minima: &'a [f64],
}

fn unit_resolution(cfg: &RunConfig) -> usize {
    cfg.m_per_cell
        .unwrap_or_else(|| ((1.0 / cfg.spacing).round() as usize).saturating_sub(1).max(3))
}

pub fn cmd_split(cfg: &RunConfig, out: &Output) -> Result<Report> {
    let spec = ProblemSpec {
        forcing: ForcingSpec::zero(),
        ..cfg.problem.clone()
    };
    let split = oracle::compute_split(&spec, unit_resolution(cfg))?;
    out.json(
        "split.json",
        &SplitSummary {
            c_plus: spec.c_plus,
            c_minus: spec.c_minus,
            p: spec.p,
            t_hat: split.t_hat,
            l_hat: split.l_hat,
            length_ratio: split.t_hat / (2.0 - split.t_hat),
            unit_energy: split.unit_energy,
            local_minima: &split.local_minima,
        },
    )?;
    if out.csv {
        split.write_curve_csv(out.create("energy_curve.csv")?)?;
    }
    out.svg(
        "split.svg",
        &Plot {
            title: "pair energy against positive length".into(),
            x_label: "t".into(),
            y_label: "E".into(),
            log_y: true,
            series: vec![Series {
                label: String::new(),
                points: split.energy_curve.clone(),
                dots: false,
            }],
            markers: vec![split.t_hat],
            ..Default::default()
        },
    )?;
    Ok(Report::new(
        "split",
        vec![Gate::at_most("unique_minimum", split.local_minima.len() as f64, 1.0)],
    ))
}

#[derive(Debug, Clone, Serialize)]
struct ScalingRow {
    length: f64,
    m_per_cell: usize,
    energy: f64,
}

/// Interior nodes for a cell of length `len` at the configured spacing.
fn scaling_resolution(cfg: &RunConfig, len: f64) -> usize {
    cfg.m_per_cell
        .unwrap_or_else(|| ((len / cfg.spacing).round() as usize).saturating_sub(1).max(3))
}

#[derive(Debug, Serialize)]
struct ScalingSummary<'a> {
    rows: &'a [ScalingRow],
    slope: f64,
    expected: f64,
}

pub fn cmd_scaling(cfg: &RunConfig, out: &Output) -> Result<Report> {
    let spec = ProblemSpec {
        forcing: ForcingSpec::zero(),
        ..cfg.problem.clone()
    };
    let opts = cfg.tolerances.cell;
    let lengths = &cfg.scaling.lengths;
    let energies = crate::par::map(lengths, |&len| {
        let m = scaling_resolution(cfg, len);
        solve_cell(&spec, spec.a, spec.a + len, m, 1, &opts).map(|c| (m, c.energy))
    });
    let mut rows = Vec::with_capacity(lengths.len());
    for (&length, e) in lengths.iter().zip(energies) {
        let (m_per_cell, energy) = e?;
        rows.push(ScalingRow {
            length,
            m_per_cell,
            energy,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.length, r.energy)).collect();
    let slope = loglog_slope(&pts).unwrap_or(f64::NAN);
    let expected = -oracle::length_exponent(spec.p);
    if out.csv {
        let mut w = csv::Writer::from_writer(out.create("scaling.csv")?);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    out.json(
        "scaling.json",
        &ScalingSummary {
            rows: &rows,
            slope,
            expected,
        },
    )?;
    out.svg(
        "scaling.svg",
        &Plot {
            title: "cell ground-state energy".into(),
            x_label: "length".into(),
            y_label: "E".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                label: String::new(),
                points: pts,
                dots: true,
            }],
            ..Default::default()
        },
    )?;
    Ok(Report::new(
        "scaling",
        vec![Gate::at_most("exponent_error", (slope - expected).abs(), SCALING_TOL)],
    ))
}

pub fn cmd_verify(cfg: &RunConfig, path: &Path, out: &Output) -> Result<Report> {
    let saved: GluedSolution = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    let spec = saved.spec.clone();
    let residual = assemble::residual_norms(&spec, &saved);
    let defects = assemble::stationarity_defect(&saved, saved.stationarity_defects.len().max(1));
    let defect = defects.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
    let sum: f64 = saved.cell_energies.iter().sum();
    let additivity = (sum - saved.total_energy).abs() / saved.total_energy.abs().max(f64::MIN_POSITIVE);
    let flux = saved.max_flux_jump() / saved.max_abs_flux().max(f64::MIN_POSITIVE);
    let shooting = oracle::shooting_match(&spec, &saved, cfg.shooting_step).ok();
    let mut gates = vec![
        Gate::at_most("residual", residual.relative, cfg.gates.residual),
        Gate::at_most("stationarity_defect", defect, cfg.gates.stationarity),
        Gate::at_most("flux_mismatch", flux, cfg.tolerances.tol_flux),
        Gate::at_most("energy_additivity", additivity, ADDITIVITY_TOL),
        Gate::holds(
            "boundary_values",
            saved.values.first() == Some(&0.0) && saved.values.last() == Some(&0.0),
        ),
        Gate::holds("shooting_zero_count", shooting.as_ref().is_some_and(|s| s.zero_count_match)),
    ];
    if let Some(limit) = cfg.gates.shooting_sup {
        let err = shooting.as_ref().map_or(f64::INFINITY, |s| s.sup_error);
        gates.push(Gate::at_most("shooting_sup", err, limit));
    }
    let report = Report::new("verify", gates);
    out.json("verify.json", &report)?;
    Ok(report)
}
