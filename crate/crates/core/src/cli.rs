//! Command-line front end. `run` is the whole program minus process exit,
//! so it can be driven from tests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha1::{Digest, Sha1};

use crate::error::{Error, Result};
use crate::graph::{parse_graph, MetricGraph};
use crate::mesh::{build_mesh, default_mesh_size, truncation_for_multiplier};
use crate::minmax::{mass_threshold_k, Placement, SlotLayout};
use crate::ps::{ps_scaling_sequence, ps_sine_sequence, PsRow, SineBump};
use crate::quadrature::integrate;
use crate::report::{csv_table, fmt_sig, render_table, Check, RunReport};
use crate::soliton::{cutoff_soliton, energy_conservation_residual, SolitonParams};
use crate::solver::{multi_solve, SolverConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "graph-nls", version, about = "Normalized NLS bound states on noncompact metric graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the closed-form soliton against its ODE, scaling laws and cut-off.
    VerifySoliton(VerifySolitonArgs),
    /// Search for bound states from the min-max seed families.
    Solve(SolveArgs),
    /// Tabulate the two Palais–Smale sequences on a half-line.
    PsDemo(PsDemoArgs),
    /// Mass thresholds μ_k for the seed families.
    Thresholds(ThresholdsArgs),
}

fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 2.0 && p < 6.0 {
        Ok(p)
    } else {
        Err(format!("p = {p} must lie in (2, 6)"))
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be positive"))
    }
}

fn parse_nonnegative(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be nonnegative"))
    }
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n >= 1 {
        Ok(n)
    } else {
        Err("must be at least 1".into())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct VerifySolitonArgs {
    #[arg(long, num_args = 1.., required = true, value_parser = parse_exponent)]
    pub p: Vec<f64>,
    #[arg(long, num_args = 1.., required = true, value_parser = parse_positive)]
    pub mu: Vec<f64>,
    /// Support length of the cut-off check.
    #[arg(long, default_value_t = 4.0, value_parser = parse_positive)]
    pub ell: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    pub graph: PathBuf,
    #[arg(long, value_parser = parse_positive)]
    pub mu: f64,
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    pub k: usize,
    #[arg(long, default_value_t = 4.0, value_parser = parse_exponent)]
    pub p: f64,
    /// Mesh size; defaults to min(ℓ_min/8, μ^{−β}/20).
    #[arg(long, value_parser = parse_positive)]
    pub h: Option<f64>,
    /// Half-line truncation; defaults to ln(1e10)/√λ of the soliton.
    #[arg(long = "T", value_parser = parse_positive)]
    pub truncation: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    #[serde(skip)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run below the mass threshold μ_k.
    #[arg(long)]
    pub force: bool,
    /// Do not fail the run on unconverged attempts.
    #[arg(long)]
    pub allow_unconverged: bool,
    #[arg(long, default_value = "longest-edge")]
    pub placement: Placement,
    #[arg(long, default_value_t = 4, value_parser = parse_count)]
    pub theta_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub perturbations: usize,
    #[arg(long, default_value_t = 1e-8, value_parser = parse_positive)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct PsDemoArgs {
    /// Energy level of the sine sequence; 0 runs only the dilation sequence.
    #[arg(long, value_parser = parse_nonnegative)]
    pub c: f64,
    #[arg(long, value_parser = parse_positive)]
    pub mu: f64,
    #[arg(long, num_args = 1.., required = true, value_parser = parse_count)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 4.0, value_parser = parse_exponent)]
    pub p: f64,
    /// Graph file; defaults to the dumbbell with core length 4.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_positive)]
    pub h: f64,
    /// Support of the dilated bump.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub radius: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdsArgs {
    pub graph: PathBuf,
    #[arg(long, num_args = 1.., required = true, value_parser = parse_count)]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 4.0, value_parser = parse_exponent)]
    pub p: f64,
    #[arg(long, default_value = "longest-edge")]
    pub placement: Placement,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::VerifySoliton(a) => cmd_verify_soliton(a, out),
        Command::Solve(a) => cmd_solve(a, out, err),
        Command::PsDemo(a) => cmd_ps_demo(a, out),
        Command::Thresholds(a) => cmd_thresholds(a, out),
    };
    match result {
        Ok(report) => {
            for w in &report.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            for c in report.checks.iter().filter(|c| !c.passed) {
                let _ = writeln!(err, "FAILED {}: {} against {}", c.name, fmt_sig(c.value), fmt_sig(c.tolerance));
            }
            report.exit_code()
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Graph(_) | Error::Json(_) | Error::InvalidParameter(_) | Error::ExponentOutOfRange(_) => EXIT_USAGE,
                Error::Io(_) => EXIT_USAGE,
                _ => EXIT_FAIL,
            }
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn finish(report: &RunReport, dir: Option<&Path>) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        report.write_json(&dir.join("report.json"))?;
    }
    Ok(())
}

/// Git blob hash: `sha1("blob <len>\0" ++ bytes)`.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_graph(path: &Path) -> Result<(MetricGraph, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(io_err)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    Ok((parse_graph(&text)?, bytes))
}

/// One row of the soliton suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolitonRow {
    pub p: f64,
    pub mu: f64,
    pub lambda: f64,
    pub energy: f64,
    /// `max|φ'' + φ^{p−1} − λφ| / (λφ(0))` over a grid.
    pub ode_residual: f64,
    /// `|ℰ(φ_μ) − μ^{2β+1}ℰ(φ_1)| / |ℰ(φ_μ)|`
    pub scaling_error: f64,
    /// `max|½φ'² + φ^p/p − λφ²/2| / (λφ(0)²/2)`
    pub conservation_residual: f64,
    pub sign_point: f64,
    /// `|x_μ − μ^{−β}x_1| / x_μ`
    pub sign_point_error: f64,
    /// Relative mismatch between the closed-form mass and quadrature.
    pub mass_error: f64,
    /// Relative mismatch between the closed-form energy and quadrature.
    pub energy_quadrature_error: f64,
    /// `ℰ(ψ)` and `ℰ(φ_μ) + certified gap` when the cut-off is certified.
    pub cutoff: Option<(f64, f64)>,
}

pub fn soliton_row(p: f64, mu: f64, ell: f64) -> Result<SolitonRow> {
    let s = SolitonParams::new(p, mu)?;
    let unit = SolitonParams::new(p, 1.0)?;
    let width = 1.0 / s.rate;
    let grid: Vec<f64> = (0..=800).map(|i| -20.0 * width + 40.0 * width * i as f64 / 800.0).collect();
    let ode = grid.iter().map(|&x| s.ode_residual(x).abs()).fold(0.0, f64::max) / s.ode_scale();
    let cons = grid.iter().map(|&x| energy_conservation_residual(&s, x).abs()).fold(0.0, f64::max) / s.conservation_scale();
    let energy = s.energy();
    let scaled = mu.powf(2.0 * s.beta + 1.0) * unit.energy();
    let x_mu = s.sign_point();
    let end = 60.0 * width;
    let mass_q = 2.0 * integrate(|x| s.value(x).powi(2), 0.0, end, 0.0, 1e-13);
    let energy_q = 2.0 * integrate(|x| 0.5 * s.derivative(x).powi(2) - s.value(x).powf(p) / p, 0.0, end, 0.0, 1e-13);
    let cutoff = cutoff_soliton(p, mu, ell).ok().map(|c| (c.energy, c.certified_bound()));
    Ok(SolitonRow {
        p,
        mu,
        lambda: s.lambda,
        energy,
        ode_residual: ode,
        scaling_error: (energy - scaled).abs() / energy.abs(),
        conservation_residual: cons,
        sign_point: x_mu,
        sign_point_error: (x_mu - mu.powf(-s.beta) * unit.sign_point()).abs() / x_mu,
        mass_error: (mass_q - mu).abs() / mu,
        energy_quadrature_error: (energy_q - energy).abs() / energy.abs(),
        cutoff,
    })
}

pub fn cmd_verify_soliton(a: &VerifySolitonArgs, out: &mut dyn Write) -> Result<RunReport> {
    let mut report = RunReport::new("verify-soliton", serde_json::to_value(a)?);
    let mut rows = Vec::new();
    for &p in &a.p {
        for &mu in &a.mu {
            let r = soliton_row(p, mu, a.ell)?;
            let tag = format!("p={} mu={}", fmt_sig(p), fmt_sig(mu));
            report.checks.push(Check::at_most(format!("{tag} ode residual"), r.ode_residual, 1e-8));
            report.checks.push(Check::at_most(format!("{tag} energy scaling"), r.scaling_error, 1e-10));
            report.checks.push(Check::at_most(format!("{tag} conservation"), r.conservation_residual, 1e-9));
            report.checks.push(Check::at_most(format!("{tag} sign point scaling"), r.sign_point_error, 1e-10));
            report.checks.push(Check::at_most(format!("{tag} mass quadrature"), r.mass_error, 1e-10));
            report.checks.push(Check::at_most(format!("{tag} energy quadrature"), r.energy_quadrature_error, 1e-9));
            if let Some((e, bound)) = r.cutoff {
                report.checks.push(Check::at_most(format!("{tag} cut-off below certified bound"), e - bound, 1e-12 * bound.abs()));
                report.checks.push(Check::below(format!("{tag} certified bound negative"), bound, 0.0));
            }
            if p == 4.0 && mu == 1.0 {
                report.checks.push(Check::at_most("spot energy -1/96", (r.energy + 1.0 / 96.0).abs(), 1e-14));
                report.checks.push(Check::at_most("spot lambda 1/16", (r.lambda - 1.0 / 16.0).abs(), 1e-14));
                let x1 = 4.0 * std::f64::consts::SQRT_2.acosh();
                report.checks.push(Check::at_most("spot sign point", (r.sign_point - x1).abs() / x1, 1e-12));
            }
            rows.push(r);
        }
    }
    let header = ["p", "mu", "lambda", "energy", "ode", "scaling", "conservation", "x_mu", "cutoff bound"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_sig(r.p),
                fmt_sig(r.mu),
                fmt_sig(r.lambda),
                fmt_sig(r.energy),
                fmt_sig(r.ode_residual),
                fmt_sig(r.scaling_error),
                fmt_sig(r.conservation_residual),
                fmt_sig(r.sign_point),
                r.cutoff.map(|c| fmt_sig(c.1)).unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    write!(out, "{}", render_table(&header, &cells)).map_err(io_err)?;
    writeln!(out, "{} of {} checks passed", report.checks.iter().filter(|c| c.passed).count(), report.checks.len()).map_err(io_err)?;
    report.outcomes = json!({ "rows": rows });
    finish(&report, a.out.as_deref())?;
    Ok(report)
}

pub fn cmd_solve(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<RunReport> {
    let started = Instant::now();
    let (g, bytes) = load_graph(&a.graph)?;
    let g = Arc::new(g);
    let mut report = RunReport::new("solve", serde_json::to_value(a)?);
    let (mu_k, edge) = mass_threshold_k(&g, a.k, a.p)?;
    let below = a.mu < mu_k;
    if below {
        let msg = format!("mass {} is below the threshold mu_{} = {}", fmt_sig(a.mu), a.k, fmt_sig(mu_k));
        if !a.force {
            report.checks.push(Check::at_most("mass threshold", mu_k - a.mu, 0.0));
            writeln!(err, "warning: {msg}; rerun with --force to solve anyway").map_err(io_err)?;
            report.outcomes = json!({ "threshold": mu_k, "threshold_edge": g.edge(edge).id });
            finish(&report, a.out.as_deref())?;
            return Ok(report);
        }
        report.warnings.push(msg);
    }

    let layout = SlotLayout::new(&g, a.k, a.placement)?;
    let h = layout.aligned_mesh_size(&g, a.h.unwrap_or_else(|| default_mesh_size(&g, a.mu, a.p)));
    let sol = SolitonParams::new(a.p, a.mu)?;
    let t = a.truncation.unwrap_or_else(|| truncation_for_multiplier(sol.lambda, 10.0));
    let mesh = build_mesh(g.clone(), h, t)?;
    let mut cfg = SolverConfig::new(a.mu, a.p);
    cfg.seed = a.seed;
    cfg.jobs = a.jobs;
    cfg.placement = a.placement;
    cfg.theta_samples = a.theta_samples;
    cfg.perturbations = a.perturbations;
    cfg.tolerance = a.tolerance;
    cfg.max_iterations = a.max_iterations;
    let setup = started.elapsed().as_secs_f64();
    let res = multi_solve(&g, &mesh, &cfg, a.k)?;
    let solve_time = started.elapsed().as_secs_f64() - setup;
    report.warnings.extend(res.warnings.iter().cloned());

    for (i, s) in res.states.iter().enumerate() {
        let tag = format!("state {}", i + 1);
        report.checks.push(Check::at_most(format!("{tag} mass error"), s.mass_error, 1e-8));
        report.checks.push(Check::at_most(format!("{tag} residual"), s.j_residual, a.tolerance));
        report.checks.push(Check::at_most(format!("{tag} kirchhoff"), s.max_kirchhoff(), 1e-6));
        if s.energy.total < 0.0 {
            report.checks.push(Check::above(format!("{tag} lambda*mu + 2E"), s.lambda * s.energy.mass + 2.0 * s.energy.total, 0.0));
        }
    }
    let unconverged = res.attempts.iter().filter(|t| t.status != crate::solver::SolveStatus::Converged).count();
    if unconverged > 0 {
        let msg = format!("{unconverged} of {} attempts did not converge", res.attempts.len());
        if a.allow_unconverged {
            report.warnings.push(msg);
        } else {
            report.checks.push(Check::at_most("unconverged attempts", unconverged as f64, 0.0));
        }
    }

    let levels: Vec<_> = res
        .levels
        .iter()
        .zip(&res.level_satisfied)
        .map(|(l, ok)| json!({ "level": l, "satisfied": ok, "tolerance": cfg.delta_e() }))
        .collect();
    report.outcomes = json!({
        "threshold": mu_k,
        "threshold_edge": g.edge(edge).id,
        "below_threshold": below,
        "mesh": mesh.metadata(),
        "delta_e": cfg.delta_e(),
        "delta_2": cfg.delta_2(),
        "soliton_energy": sol.energy(),
        "states": res.states.iter().map(|s| s.summary()).collect::<Vec<_>>(),
        "attempts": res.attempts,
        "levels": levels,
    });

    let header = ["state", "energy", "lambda", "residual", "kirchhoff", "seed"];
    let rows: Vec<Vec<String>> = res
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                (i + 1).to_string(),
                fmt_sig(s.energy.total),
                fmt_sig(s.lambda),
                fmt_sig(s.j_residual),
                fmt_sig(s.max_kirchhoff()),
                s.seed.label.clone(),
            ]
        })
        .collect();
    write!(out, "{}", render_table(&header, &rows)).map_err(io_err)?;
    for (l, ok) in res.levels.iter().zip(&res.level_satisfied) {
        let verdict = match ok {
            Some(true) => "met",
            Some(false) => "not met",
            None => "no state",
        };
        writeln!(out, "level {}: bound {} ({verdict})", l.j, fmt_sig(l.bound_cj)).map_err(io_err)?;
    }

    if let Some(dir) = a.out.as_deref() {
        std::fs::create_dir_all(dir)?;
        let mut files = vec!["report.json".to_string(), "timing.json".to_string()];
        for (i, s) in res.states.iter().enumerate() {
            let name = format!("state_{}.csv", i + 1);
            std::fs::write(dir.join(&name), s.u.to_csv())?;
            files.push(name);
        }
        report.write_json(&dir.join("report.json"))?;
        let timing = json!({ "setup_seconds": setup, "solve_seconds": solve_time, "jobs": a.jobs });
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
        let manifest = json!({
            "command": "solve",
            "version": env!("CARGO_PKG_VERSION"),
            "config": report.config,
            "graph_file": a.graph.file_name().map(|f| f.to_string_lossy().into_owned()),
            "graph_sha1": git_blob_sha1(&bytes),
            "files": files,
        });
        let mut manifest = manifest;
        crate::report::round_json(&mut manifest);
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    }
    Ok(report)
}

fn ps_cells(rows: &[PsRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_sig(r.energy),
                fmt_sig(r.energy_discrete),
                fmt_sig(r.dual_residual),
                fmt_sig(r.sup_norm),
                fmt_sig(r.mass_discrete),
            ]
        })
        .collect()
}

fn ps_csv(rows: &[PsRow]) -> String {
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.n as f64, r.energy, r.energy_quadrature, r.energy_discrete, r.dual_residual, r.sup_norm, r.mass_discrete])
        .collect();
    csv_table(&["n", "energy", "energy_quadrature", "energy_discrete", "dual_residual", "sup_norm", "mass"], &data)
}

pub fn cmd_ps_demo(a: &PsDemoArgs, out: &mut dyn Write) -> Result<RunReport> {
    let g = Arc::new(match &a.graph {
        Some(path) => load_graph(path)?.0,
        None => MetricGraph::dumbbell(4.0)?,
    });
    let mut report = RunReport::new("ps-demo", serde_json::to_value(a)?);
    let mut ns = a.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let header = ["n", "energy", "discrete", "residual", "sup", "mass"];

    let mut sine = Vec::new();
    if a.c > 0.0 {
        for &n in &ns {
            sine.push(ps_sine_sequence(&g, a.c, a.mu, n, a.p, a.h)?);
        }
        for r in &sine {
            let tag = format!("sine n={}", r.n);
            report.checks.push(Check::at_most(format!("{tag} quadrature energy"), (r.energy_quadrature - a.c).abs() / a.c, 1e-8));
            report.checks.push(Check::at_most(format!("{tag} mass"), (r.mass_discrete - a.mu).abs() / a.mu, 1e-12));
        }
        for w in sine.windows(2) {
            report.checks.push(Check::below(format!("sine residual n={}->{}", w[0].n, w[1].n), w[1].dual_residual, w[0].dual_residual));
        }
        writeln!(out, "sine sequence, level {}", fmt_sig(a.c)).map_err(io_err)?;
        write!(out, "{}", render_table(&header, &ps_cells(&sine))).map_err(io_err)?;
    }

    // the dilated mesh must stay finer than the core
    let n_max = *ns.last().expect("n is required") as f64;
    let h1 = a.h.min(0.5 * g.shortest_bounded_length() / n_max);
    let xi = SineBump::with_mass(a.mu, a.radius);
    let mut scaling = Vec::new();
    for &n in &ns {
        scaling.push(ps_scaling_sequence(&g, &xi, a.mu, n, a.p, h1)?);
    }
    for r in &scaling {
        report.checks.push(Check::at_most(
            format!("dilation n={} quadrature energy", r.n),
            (r.energy_quadrature - r.energy).abs() / r.energy,
            1e-10,
        ));
    }
    for w in scaling.windows(2) {
        let expected = (w[0].n as f64 / w[1].n as f64).powi(2);
        let ratio = w[1].energy_discrete / w[0].energy_discrete;
        report.checks.push(Check::at_most(format!("dilation energy ratio n={}->{}", w[0].n, w[1].n), (ratio - expected).abs(), 1e-10));
    }
    writeln!(out, "dilation sequence, level 0").map_err(io_err)?;
    write!(out, "{}", render_table(&header, &ps_cells(&scaling))).map_err(io_err)?;

    report.outcomes = json!({ "sine": sine, "dilation": scaling, "bump": xi });
    if let Some(dir) = a.out.as_deref() {
        std::fs::create_dir_all(dir)?;
        if !sine.is_empty() {
            std::fs::write(dir.join("ps_sine.csv"), ps_csv(&sine))?;
        }
        std::fs::write(dir.join("ps_dilation.csv"), ps_csv(&scaling))?;
    }
    finish(&report, a.out.as_deref())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub k: usize,
    pub threshold: f64,
    pub slot_length: f64,
    pub edges: Vec<String>,
}

pub fn cmd_thresholds(a: &ThresholdsArgs, out: &mut dyn Write) -> Result<RunReport> {
    let (g, _) = load_graph(&a.graph)?;
    let mut report = RunReport::new("thresholds", serde_json::to_value(a)?);
    let mut rows = Vec::new();
    for &k in &a.k {
        let layout = SlotLayout::new(&g, k, a.placement)?;
        let threshold = layout.mass_threshold(a.p)?;
        let edges = layout.slots.iter().map(|s| g.edge(s.edge).id.clone()).collect();
        rows.push(ThresholdRow { k, threshold, slot_length: layout.slot_length, edges });
    }
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.k);
    for w in sorted.windows(2) {
        if w[1].k > w[0].k && w[1].threshold <= w[0].threshold {
            report.warnings.push(format!("mu_{} does not exceed mu_{}", w[1].k, w[0].k));
        }
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.k.to_string(), fmt_sig(r.threshold), fmt_sig(r.slot_length), r.edges.join(" ")])
        .collect();
    write!(out, "{}", render_table(&["k", "mu_k", "slot", "edges"], &cells)).map_err(io_err)?;
    report.outcomes = json!({ "rows": rows });
    finish(&report, a.out.as_deref())?;
    Ok(report)
}
