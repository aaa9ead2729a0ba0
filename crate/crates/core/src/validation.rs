//! Remainder norms against the finite-difference reference, slope fits and
//! the analytic bound checks.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{composite, mean_solution, mean_solution_bvp};
use crate::fdsolver::{fmt17, linf_distance, solve_fd_with, FdOptions, Field2D, Grid2D};
use crate::problem::{decompose, ProblemSpec};
use crate::spectral::{AntiderivativeStack, CosineBasis};
use crate::{DEFAULT_MODES, DEFAULT_QUAD_POINTS};

/// FD error must sit this factor below a remainder for the entry to count.
pub const POLLUTION_MARGIN: f64 = 10.0;

/// Slack on the maximum-principle comparison.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root of the summed squared log10 residuals.
    pub residual: f64,
}

/// Least squares line through `(log10 ε², log10 norm)`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints(points.len()));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(e, r) in points {
        if !(e > 0.0) {
            return Err(Error::InvalidArgument(format!("eps2 must be positive, got {e}")));
        }
        if !(r > 0.0) {
            return Err(Error::NonPositiveNorm(r));
        }
        xs.push(e.log10());
        ys.push(r.log10());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all eps2 values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(Fit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPrincipleCheck {
    pub bound: f64,
    pub max_abs: f64,
    pub pass: bool,
}

const SUP_SAMPLES: usize = 256;

/// `‖u‖∞ ≤ Φ + G/2` with `Φ` the largest boundary magnitude and
/// `G = ε² sup|f|`, both sampled on the grid and on a uniform lattice.
pub fn max_principle_check(u: &Field2D, p: &ProblemSpec) -> MaxPrincipleCheck {
    let g = u.grid();
    let mut xs: Vec<f64> = (0..=SUP_SAMPLES).map(|i| i as f64 / SUP_SAMPLES as f64).collect();
    xs.extend((0..g.nx()).map(|i| g.x(i)));
    let mut ys: Vec<f64> = (0..=SUP_SAMPLES).map(|j| j as f64 / SUP_SAMPLES as f64).collect();
    ys.extend((0..=g.ny()).map(|j| g.y(j)));

    let phi = xs
        .iter()
        .map(|&x| (p.phi0)(x).abs().max((p.phi1)(x).abs()))
        .fold(0.0, f64::max);
    let mut sup_f: f64 = 0.0;
    for &y in &ys {
        for &x in &xs {
            sup_f = sup_f.max((p.f)(x, y).abs());
        }
    }
    let bound = phi + 0.5 * p.eps2() * sup_f;
    let max_abs = u.max_abs();
    MaxPrincipleCheck {
        bound,
        max_abs,
        pass: max_abs <= bound + MAX_PRINCIPLE_SLACK,
    }
}

/// `max |2∫₀¹(-F̃₂ + F̃₃(1,y)) cos(kπx) dx - f̃ₖ(y)/(kπ)²|` over `k ≤ modes`
/// and the sampled `y`.
pub fn matching_identity_check(stack: &AntiderivativeStack, modes: usize, y_samples: &[f64]) -> Result<f64> {
    let basis = CosineBasis::new(modes, stack.quad_points());
    let mut worst: f64 = 0.0;
    for &y in y_samples {
        let row = stack.row(y)?;
        let f3_end = row.at_one(3);
        let outer: Vec<f64> = row.table(2).iter().map(|v| f3_end - v).collect();
        let lhs = basis.project(&outer);
        let ftilde = basis.project(row.table(0));
        for k in 0..modes {
            let kp = (k + 1) as f64 * PI;
            worst = worst.max((lhs[k] - ftilde[k] / (kp * kp)).abs());
        }
    }
    Ok(worst)
}

/// Self-convergence estimate of the FD error on `fine`: one solve on the
/// grid coarsened by two in both directions, compared at the coarse nodes
/// (exact rows in y, four-point midpoint interpolation in x), divided by 3.
pub fn fd_error_estimate(p: &ProblemSpec, fine: &Field2D, opts: &FdOptions) -> Result<f64> {
    let g = fine.grid();
    if !g.nx().is_multiple_of(2) || !g.ny().is_multiple_of(2) || g.nx() < 4 || g.ny() < 4 {
        return Err(Error::InvalidArgument(format!(
            "self-convergence needs even grid sizes of at least 4, got {}x{}",
            g.nx(),
            g.ny()
        )));
    }
    let coarse_grid = Grid2D::new(g.nx() / 2, g.ny() / 2)?;
    let (coarse, _) = solve_fd_with(p, &coarse_grid, opts)?;
    let nx = g.nx();
    let at = |i: isize, j: usize| {
        // Neumann ghosts mirror the first and last cell centres
        let i = if i < 0 {
            (-1 - i) as usize
        } else if i as usize >= nx {
            2 * nx - 1 - i as usize
        } else {
            i as usize
        };
        fine.get(i, j)
    };
    let mut worst: f64 = 0.0;
    for jc in 0..=coarse_grid.ny() {
        let j = 2 * jc;
        for ic in 0..coarse_grid.nx() {
            let i = 2 * ic as isize;
            let interp = (-at(i - 1, j) + 9.0 * at(i, j) + 9.0 * at(i + 1, j) - at(i + 2, j)) / 16.0;
            worst = worst.max((interp - coarse.get(ic, jc)).abs());
        }
    }
    Ok(worst / 3.0)
}

/// Errors of the tridiagonal mean solve against the closed-form mean at
/// `m` and `2m` intervals, and their ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanOracleCheck {
    pub coarse_error: f64,
    pub fine_error: f64,
    pub ratio: f64,
}

pub fn mean_oracle_check(p: &ProblemSpec, m: usize, quad_points: usize) -> Result<MeanOracleCheck> {
    let d = decompose(p, quad_points)?;
    let mean = mean_solution(&d, quad_points)?;
    let err = |m: usize| -> Result<f64> {
        let v = mean_solution_bvp(&d, m)?;
        Ok(v.iter()
            .enumerate()
            .map(|(j, u)| (u - mean.eval(j as f64 / m as f64)).abs())
            .fold(0.0, f64::max))
    };
    let coarse_error = err(m)?;
    let fine_error = err(2 * m)?;
    Ok(MeanOracleCheck {
        coarse_error,
        fine_error,
        ratio: coarse_error / fine_error,
    })
}

#[derive(Debug, Clone)]
pub struct RemainderConfig {
    pub eps2: Vec<f64>,
    /// Expansion orders `n`; column `r{2n}` holds `‖u^[2n] - u_FD‖∞`.
    pub orders: Vec<usize>,
    pub grid: Grid2D,
    pub modes: usize,
    pub quad_points: usize,
    pub fd: FdOptions,
    pub estimate_fd_error: bool,
}

impl RemainderConfig {
    pub fn new(eps2: Vec<f64>, orders: Vec<usize>, grid: Grid2D) -> Self {
        Self {
            eps2,
            orders,
            grid,
            modes: DEFAULT_MODES,
            quad_points: DEFAULT_QUAD_POINTS,
            fd: FdOptions::default(),
            estimate_fd_error: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.eps2.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidArgument("every eps2 must be positive".into()));
        }
        if self.eps2.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("eps2 values must be strictly increasing".into()));
        }
        if self.orders.is_empty() || self.orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("orders must be non-empty and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub eps2: f64,
    /// One entry per configured order.
    pub norms: Vec<f64>,
    pub fd_error_estimate: Option<f64>,
    /// True where the FD error estimate is not `POLLUTION_MARGIN` times
    /// below the norm.
    pub polluted: Vec<bool>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub max_principle: MaxPrincipleCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderFit {
    pub order: usize,
    pub column: String,
    #[serde(flatten)]
    pub fit: Fit,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub problem: String,
    pub nx: usize,
    pub ny: usize,
    pub modes: usize,
    pub quad_points: usize,
    pub fd: FdOptions,
    pub orders: Vec<usize>,
    pub rows: Vec<ErrorRow>,
    /// Empty when fewer than three ε² values are present.
    pub fits: Vec<OrderFit>,
}

pub fn column_name(order: usize) -> String {
    format!("r{}", 2 * order)
}

/// One ε² entry of the table.
pub fn remainder_row(p: &ProblemSpec, eps2: f64, cfg: &RemainderConfig) -> Result<ErrorRow> {
    let pe = p.clone().with_eps2(eps2)?;
    let (u, stats) = solve_fd_with(&pe, &cfg.grid, &cfg.fd)?;
    log::info!(
        "eps2 = {eps2}: FD solve on {}x{} took {} iterations ({:.2?})",
        cfg.grid.nx(),
        cfg.grid.ny(),
        stats.iterations,
        stats.wall_time
    );
    let mut norms = Vec::with_capacity(cfg.orders.len());
    for &n in &cfg.orders {
        let e = composite(&pe, n, cfg.modes, cfg.quad_points)?;
        norms.push(linf_distance(&e.eval_grid(&cfg.grid), &u)?);
    }
    let fd_error_estimate = if cfg.estimate_fd_error {
        Some(fd_error_estimate(&pe, &u, &cfg.fd)?)
    } else {
        None
    };
    let polluted = norms
        .iter()
        .map(|r| fd_error_estimate.is_some_and(|e| POLLUTION_MARGIN * e > *r))
        .collect();
    Ok(ErrorRow {
        eps2,
        norms,
        fd_error_estimate,
        polluted,
        iterations: stats.iterations,
        relative_residual: stats.relative_residual,
        max_principle: max_principle_check(&u, &pe),
    })
}

/// The full table; fits every order over all ε² values.
pub fn remainder_norms(p: &ProblemSpec, cfg: &RemainderConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    if cfg.eps2.len() < 3 {
        return Err(Error::InsufficientPoints(cfg.eps2.len()));
    }
    let rows = cfg
        .eps2
        .iter()
        .map(|&e| remainder_row(p, e, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ErrorReport {
        problem: p.name.clone(),
        nx: cfg.grid.nx(),
        ny: cfg.grid.ny(),
        modes: cfg.modes,
        quad_points: cfg.quad_points,
        fd: cfg.fd,
        orders: cfg.orders.clone(),
        rows,
        fits: Vec::new(),
    };
    report.fits = (0..cfg.orders.len())
        .map(|c| report.fit_column(c, 0.0))
        .collect::<Result<_>>()?;
    Ok(report)
}

impl ErrorReport {
    /// Norms of column `c` (index into `orders`).
    pub fn column(&self, c: usize) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.eps2, r.norms[c])).collect()
    }

    /// Fit of column `c` restricted to `ε² ≥ min_eps2`.
    pub fn fit_column(&self, c: usize, min_eps2: f64) -> Result<OrderFit> {
        let pts: Vec<(f64, f64)> = self.column(c).into_iter().filter(|(e, _)| *e >= min_eps2).collect();
        Ok(OrderFit {
            order: self.orders[c],
            column: column_name(self.orders[c]),
            fit: fit_order(&pts)?,
        })
    }

    /// Column `c` is nondecreasing in ε².
    pub fn is_monotone(&self, c: usize) -> bool {
        self.rows.windows(2).all(|w| w[0].norms[c] <= w[1].norms[c])
    }

    /// Each higher order beats each lower one at every ε².
    pub fn is_dominated(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.norms.windows(2).all(|w| w[1] < w[0]))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &[String]) -> Result<()> {
        for line in metadata {
            writeln!(out, "# {line}")?;
        }
        let header: Vec<String> = self.orders.iter().map(|&n| column_name(n)).collect();
        writeln!(out, "eps2,{}", header.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.norms.iter().map(|v| fmt17(*v)).collect();
            writeln!(out, "{},{}", fmt17(r.eps2), cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_problem;
    use crate::spectral::build_antiderivatives;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [0.005, 0.01, 0.05, 0.1].iter().map(|&e| (e, 3.0 * e * e)).collect();
        let f = fit_order(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.log10()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let pts: Vec<(f64, f64)> = [0.001, 0.01, 0.1].iter().map(|&e| (e, 0.5 * e)).collect();
        assert!((fit_order(&pts).unwrap().slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_r0_column_slope() {
        let table = [
            (0.001, 1.0533e-4),
            (0.005, 5.2186e-4),
            (0.01, 1.0332e-3),
            (0.05, 4.7441e-3),
            (0.1, 8.6241e-3),
        ];
        let f = fit_order(&table).unwrap();
        assert!((f.slope - 1.0).abs() < 0.05, "{}", f.slope);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_order(&[(0.1, 1.0), (0.2, 2.0)]), Err(Error::InsufficientPoints(2))));
        assert!(matches!(
            fit_order(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]),
            Err(Error::NonPositiveNorm(_))
        ));
    }

    #[test]
    fn max_principle_examples() {
        let zero = builtin_problem("zero").unwrap();
        let g = Grid2D::new(8, 8).unwrap();
        let (u, _) = crate::fdsolver::solve_fd(&zero, &g, 1e-12, 100).unwrap();
        let c = max_principle_check(&u, &zero);
        assert_eq!((c.bound, c.max_abs, c.pass), (0.0, 0.0, true));

        let unit = builtin_problem("constant-force").unwrap().with_eps(1.0).unwrap();
        let (u, _) = crate::fdsolver::solve_fd(&unit, &Grid2D::new(8, 16).unwrap(), 1e-12, 100).unwrap();
        let c = max_principle_check(&u, &unit);
        assert!((c.bound - 0.5).abs() < 1e-15);
        assert!((c.max_abs - 0.125).abs() < 1e-12);
        assert!(c.pass);

        let paper = builtin_problem("paper").unwrap();
        let (u, _) = crate::fdsolver::solve_fd(&paper, &Grid2D::new(32, 32).unwrap(), 1e-11, 100).unwrap();
        let c = max_principle_check(&u, &paper);
        assert!((c.bound - 1.025).abs() < 1e-4, "{}", c.bound);
        assert!(c.pass);
    }

    #[test]
    fn identity_vanishes_for_zero_force() {
        let d = decompose(&builtin_problem("zero").unwrap(), 256).unwrap();
        let s = build_antiderivatives(&d, 256).unwrap();
        assert_eq!(matching_identity_check(&s, 8, &[0.0, 0.5, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn identity_for_separable_force() {
        let p = ProblemSpec::new("sep", |x, y| (PI * x).cos() * (1.0 + y * y), |_| 0.0, |_| 0.0, 0.3).unwrap();
        let d = decompose(&p, 1024).unwrap();
        let s = build_antiderivatives(&d, 1024).unwrap();
        let ys: Vec<f64> = (0..=8).map(|j| j as f64 / 8.0).collect();
        assert!(matching_identity_check(&s, 8, &ys).unwrap() <= 1e-9);
    }

    #[test]
    fn fd_estimate_vanishes_on_exact_data() {
        // linear in y, constant in x: the scheme is exact on every grid
        let p = ProblemSpec::new("lin", |_, _| 0.0, |_| 1.0, |_| 3.0, 0.2).unwrap();
        let g = Grid2D::new(16, 16).unwrap();
        let opts = FdOptions {
            tol: 1e-13,
            ..FdOptions::default()
        };
        let (u, _) = solve_fd_with(&p, &g, &opts).unwrap();
        assert!(fd_error_estimate(&p, &u, &opts).unwrap() < 1e-11);
        let odd = Field2D::from_fn(Grid2D::new(5, 4).unwrap(), |_, _| 0.0).unwrap();
        assert!(fd_error_estimate(&p, &odd, &opts).is_err());
    }

    #[test]
    fn fd_estimate_tracks_no_layer_error() {
        let p = builtin_problem("no-layer").unwrap();
        let g = Grid2D::new(8, 64).unwrap();
        let opts = FdOptions {
            tol: 1e-13,
            ..FdOptions::default()
        };
        let (u, _) = solve_fd_with(&p, &g, &opts).unwrap();
        let exact = crate::fdsolver::linf_distance_to(&u, |_, y| (PI * y).sin() + 1.0 + y);
        let est = fd_error_estimate(&p, &u, &opts).unwrap();
        assert!(est >= exact && est < 1.1 * exact, "est {est:e}, exact {exact:e}");
    }

    #[test]
    fn small_report() {
        let p = builtin_problem("paper").unwrap();
        let mut cfg = RemainderConfig::new(vec![0.01, 0.05, 0.1], vec![0, 1], Grid2D::new(64, 64).unwrap());
        cfg.modes = 16;
        cfg.quad_points = 256;
        let rep = remainder_norms(&p, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.fits.len(), 2);
        assert!(rep.rows.iter().all(|r| r.max_principle.pass && r.fd_error_estimate.is_some()));
        let mut csv = Vec::new();
        rep.write_csv(&mut csv, &[]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("eps2,r0,r2\n"));
        assert_eq!(text.lines().count(), 4);
        let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(json["fits"][1]["column"], "r2");
        assert!(json.get("wall_time").is_none());

        cfg.eps2 = vec![0.05, 0.01, 0.1];
        assert!(remainder_norms(&p, &cfg).is_err());
        cfg.eps2 = vec![0.01, 0.05];
        assert!(matches!(remainder_norms(&p, &cfg), Err(Error::InsufficientPoints(2))));
    }

    #[test]
    fn mean_oracle_is_second_order() {
        let c = mean_oracle_check(&builtin_problem("paper").unwrap(), 64, 1024).unwrap();
        assert!((c.ratio - 4.0).abs() < 0.3, "{c:?}");
    }
}
