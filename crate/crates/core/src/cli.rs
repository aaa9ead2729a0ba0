//! The `aniso` command-line front end.
//!
//! Every subcommand writes one artifact (to `--out` or standard output) that
//! starts with `#`-prefixed metadata lines echoing the configuration. Outputs
//! contain no timestamps or timings, so equal flags give equal bytes.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{boundary_leak, composite};
use crate::fdsolver::{fmt17, solve_fd_with, FdOptions, Grid2D, Preconditioner, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::montecarlo::{estimate_point, McConfig, DEFAULT_DT, DEFAULT_PATHS};
use crate::problem::{
    builtin_problem, check_compatibility, check_y_derivatives, decompose, ProblemSpec, BUILTIN_EPS2,
    DEFAULT_COMPAT_STEP, DEFAULT_TOL_COMPAT, DEFAULT_TOL_DERIV,
};
use crate::spectral::build_antiderivatives;
use crate::validation::{matching_identity_check, max_principle_check, remainder_norms, RemainderConfig};
use crate::{DEFAULT_MODES, DEFAULT_QUAD_POINTS};

#[derive(Debug, Parser)]
#[command(name = "aniso", version, about = "Asymptotic, finite-difference and Monte Carlo solutions of a strongly anisotropic elliptic problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corner compatibility and supplied-derivative checks.
    Check(CheckArgs),
    /// Evaluate the composite approximation u^[2n] on a grid (field CSV).
    Expand(ExpandArgs),
    /// Finite-difference reference solve (field CSV).
    Fd(FdArgs),
    /// Remainder norms against the reference and slope fits (CSV + JSON).
    Convergence(ConvergenceArgs),
    /// Monte Carlo point estimate (JSON).
    Mc(McArgs),
    /// Deviation of the matching identity (JSON).
    Identity(IdentityArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Built-in problem: paper, constant-force, no-layer, zero.
    #[arg(long, default_value = "paper")]
    pub problem: String,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// x-cells.
    #[arg(long, default_value_t = 256)]
    pub nx: usize,
    /// y-cells.
    #[arg(long, default_value_t = 256)]
    pub ny: usize,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Relative residual of the linear solve.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = PrecondArg::FastDiagonal)]
    pub preconditioner: PrecondArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecondArg {
    FastDiagonal,
    LineSgs,
}

impl SolverArgs {
    fn options(&self) -> FdOptions {
        FdOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            preconditioner: match self.preconditioner {
                PrecondArg::FastDiagonal => Preconditioner::FastDiagonal,
                PrecondArg::LineSgs => Preconditioner::LineSgs,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = DEFAULT_TOL_COMPAT)]
    pub tol_compat: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_DERIV)]
    pub tol_deriv: f64,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = BUILTIN_EPS2)]
    pub eps2: f64,
    /// Expansion order n (the approximation is u^[2n]).
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Cosine modes K.
    #[arg(long, default_value_t = DEFAULT_MODES)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_QUAD_POINTS)]
    pub quad_points: usize,
}

#[derive(Debug, Args)]
pub struct FdArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = BUILTIN_EPS2)]
    pub eps2: f64,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated, strictly increasing, at least three values.
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.005, 0.01, 0.05, 0.1])]
    pub eps2: Vec<f64>,
    /// Comma-separated expansion orders.
    #[arg(long, value_delimiter = ',', default_values_t = [0, 1])]
    pub orders: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_MODES)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_QUAD_POINTS)]
    pub quad_points: usize,
    /// Skip the self-convergence estimate of the FD error.
    #[arg(long)]
    pub no_fd_estimate: bool,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = BUILTIN_EPS2)]
    pub eps2: f64,
    #[arg(long)]
    pub x: f64,
    #[arg(long)]
    pub y: f64,
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    pub paths: usize,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Brownian-bridge exit correction.
    #[arg(long)]
    pub bridge: bool,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = BUILTIN_EPS2)]
    pub eps2: f64,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 4096)]
    pub quad_points: usize,
    /// Number of uniform y samples on [0, 1].
    #[arg(long, default_value_t = 9)]
    pub y_samples: usize,
}

fn tool() -> String {
    format!("aniso {}", env!("CARGO_PKG_VERSION"))
}

fn header(command: &str, problem: &ProblemSpec) -> Vec<String> {
    vec![
        tool(),
        format!("command: {command}"),
        format!("problem: {}", problem.name),
        format!("eps2: {}", fmt17(problem.eps2())),
    ]
}

fn load(name: &str, eps2: f64) -> Result<ProblemSpec> {
    builtin_problem(name)?.with_eps2(eps2)
}

fn emit(out: Option<&Path>, content: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn check(a: &CheckArgs) -> Result<()> {
    let p = builtin_problem(&a.common.problem)?;
    let c = check_compatibility(&p, DEFAULT_COMPAT_STEP, a.tol_compat);
    let d = check_y_derivatives(&p, a.tol_deriv);
    let mut s = String::new();
    let _ = writeln!(s, "# {}", tool());
    let _ = writeln!(s, "# command: check");
    let _ = writeln!(s, "problem: {}", p.name);
    let _ = writeln!(s, "compatibility: {}", if c.pass { "pass" } else { "FAIL" });
    let _ = writeln!(s, "  step: {:e}, tol: {:e}", c.step, c.tol);
    for (label, v) in ["phi0'(0)", "phi0'(1)", "phi1'(0)", "phi1'(1)"].iter().zip(c.slopes()) {
        let _ = writeln!(s, "  {label} = {}", fmt17(v));
    }
    let _ = writeln!(
        s,
        "y-derivatives supplied: {} ({})",
        p.f_y_derivs.len(),
        if d.pass { "consistent" } else { "INCONSISTENT" }
    );
    for (j, dev) in d.max_rel_deviation.iter().enumerate() {
        let _ = writeln!(s, "  d^{}f/dy^{}: max relative deviation {dev:.3e}", j + 1, j + 1);
    }
    emit(a.common.out.as_deref(), s.as_bytes())
}

fn expand(a: &ExpandArgs) -> Result<()> {
    let p = load(&a.common.problem, a.eps2)?;
    let grid = Grid2D::new(a.grid.nx, a.grid.ny)?;
    let e = composite(&p, a.order, a.k, a.quad_points)?;
    let leak = boundary_leak(&e);
    let mut meta = header("expand", &p);
    meta.extend([
        format!("order: {} (u^[{}])", a.order, 2 * a.order),
        format!("modes: {}", a.k),
        format!("quad_points: {}", a.quad_points),
        format!("grid: {}x{}", grid.nx(), grid.ny()),
        format!("tail |c_K|: bottom {} top {}", fmt17(e.bottom_layer().series.tail()), fmt17(e.top_layer().series.tail())),
        format!("boundary leak: bottom {} top {}", fmt17(leak.bottom), fmt17(leak.top)),
    ]);
    let mut buf = Vec::new();
    e.eval_grid(&grid).write_csv(&mut buf, &meta)?;
    emit(a.common.out.as_deref(), &buf)
}

fn fd(a: &FdArgs) -> Result<()> {
    let p = load(&a.common.problem, a.eps2)?;
    let grid = Grid2D::new(a.grid.nx, a.grid.ny)?;
    let opts = a.solver.options();
    let (u, stats) = solve_fd_with(&p, &grid, &opts)?;
    let mp = max_principle_check(&u, &p);
    let mut meta = header("fd", &p);
    meta.extend([
        format!("grid: {}x{}", grid.nx(), grid.ny()),
        format!("solver: pcg/{}, tol {:e}, max_iter {}", opts.preconditioner.name(), opts.tol, opts.max_iter),
        format!("iterations: {}", stats.iterations),
        format!("relative_residual: {:e}", stats.relative_residual),
        format!(
            "max principle: max|u| {} <= bound {}: {}",
            fmt17(mp.max_abs),
            fmt17(mp.bound),
            if mp.pass { "pass" } else { "FAIL" }
        ),
    ]);
    let mut buf = Vec::new();
    u.write_csv(&mut buf, &meta)?;
    emit(a.common.out.as_deref(), &buf)
}

fn convergence(a: &ConvergenceArgs) -> Result<()> {
    let p = builtin_problem(&a.common.problem)?;
    let grid = Grid2D::new(a.grid.nx, a.grid.ny)?;
    let cfg = RemainderConfig {
        eps2: a.eps2.clone(),
        orders: a.orders.clone(),
        grid,
        modes: a.k,
        quad_points: a.quad_points,
        fd: a.solver.options(),
        estimate_fd_error: !a.no_fd_estimate,
    };
    let report = remainder_norms(&p, &cfg)?;
    let mut meta = vec![
        tool(),
        "command: convergence".to_string(),
        format!("problem: {}", p.name),
        format!("grid: {}x{}", grid.nx(), grid.ny()),
        format!("modes: {}", a.k),
        format!("quad_points: {}", a.quad_points),
        format!(
            "solver: pcg/{}, tol {:e}, max_iter {}",
            cfg.fd.preconditioner.name(),
            cfg.fd.tol,
            cfg.fd.max_iter
        ),
    ];
    for f in &report.fits {
        meta.push(format!(
            "fit {}: slope {:.6}, intercept {:.6}, residual {:.3e}",
            f.column, f.fit.slope, f.fit.intercept, f.fit.residual
        ));
    }
    for r in &report.rows {
        if r.polluted.iter().any(|b| *b) {
            meta.push(format!("warning: eps2 {} has entries within 10x of the FD error estimate", r.eps2));
        }
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf, &meta)?;
    emit(a.common.out.as_deref(), &buf)?;
    if let Some(out) = &a.common.out {
        let sidecar = Sidecar { tool: tool(), report: &report };
        std::fs::write(out.with_extension("json"), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: String,
    #[serde(flatten)]
    report: &'a crate::validation::ErrorReport,
}

#[derive(Serialize)]
struct McOutput<'a> {
    tool: String,
    #[serde(flatten)]
    estimate: &'a crate::montecarlo::McEstimate,
    problem: &'a str,
    eps2: f64,
    x: f64,
    y: f64,
    bridge_correction: bool,
}

fn mc(a: &McArgs) -> Result<()> {
    let p = load(&a.common.problem, a.eps2)?;
    let cfg = McConfig {
        dt: a.dt,
        n_paths: a.paths,
        seed: a.seed,
        bridge_correction: a.bridge,
    };
    let est = estimate_point(&p, a.x, a.y, &cfg)?;
    let out = McOutput {
        tool: tool(),
        estimate: &est,
        problem: &p.name,
        eps2: p.eps2(),
        x: a.x,
        y: a.y,
        bridge_correction: a.bridge,
    };
    let body = serde_json::to_string_pretty(&out)? + "\n";
    emit(a.common.out.as_deref(), body.as_bytes())
}

#[derive(Serialize)]
struct IdentityOutput<'a> {
    tool: String,
    problem: &'a str,
    max_deviation: f64,
    modes: usize,
    quad_points: usize,
    y_samples: Vec<f64>,
}

fn identity(a: &IdentityArgs) -> Result<()> {
    if a.y_samples < 2 {
        return Err(Error::InvalidArgument("--y-samples must be at least 2".into()));
    }
    let p = load(&a.common.problem, a.eps2)?;
    let d = decompose(&p, a.quad_points)?;
    let stack = build_antiderivatives(&d, a.quad_points)?;
    let ys: Vec<f64> = (0..a.y_samples).map(|j| j as f64 / (a.y_samples - 1) as f64).collect();
    let dev = matching_identity_check(&stack, a.k, &ys)?;
    let out = IdentityOutput {
        tool: tool(),
        problem: &p.name,
        max_deviation: dev,
        modes: a.k,
        quad_points: stack.quad_points(),
        y_samples: ys,
    };
    let body = serde_json::to_string_pretty(&out)? + "\n";
    emit(a.common.out.as_deref(), body.as_bytes())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Check(a) => check(a),
        Command::Expand(a) => expand(a),
        Command::Fd(a) => fd(a),
        Command::Convergence(a) => convergence(a),
        Command::Mc(a) => mc(a),
        Command::Identity(a) => identity(a),
    }
}

/// Runs one command line; returns 0 on success, 1 on usage errors and 2 on
/// numerical failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
