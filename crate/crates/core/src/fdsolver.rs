//! Five-point finite-difference reference solver.
//!
//! Grid: `xᵢ = (i - ½)Δx`, `i = 1..N` (half-integer, so the Neumann sides
//! reflect through ghost nodes `u₀ = u₁`, `u_{N+1} = u_N`), and
//! `y_j = (j - 1)Δy`, `j = 1..M+1`, with Dirichlet rows at `j = 1, M+1`.
//! Indices in code are 0-based.
//!
//! The system is solved in the rescaled form `-∂ₓ²u - ε²∂ᵧ²u = ε²f`, which
//! has the same solution and a bounded x-part of the spectrum. Eliminating
//! the Dirichlet rows leaves an SPD matrix, solved by preconditioned
//! conjugate gradients (see [`Preconditioner`]).

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use rustdct::{DctPlanner, TransformType2And3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::tridiag::FactoredTridiag;

pub const DEFAULT_TOL: f64 = 1e-11;
pub const DEFAULT_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
}

impl Grid2D {
    /// `nx` cells in x (nodes at cell centres), `ny` cells in y (`ny + 1` node rows).
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs nx >= 2 and ny >= 2, got {nx}x{ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    /// Node `i` in `0..nx`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.nx as f64
    }

    /// Row `j` in `0..=ny`.
    pub fn y(&self, j: usize) -> f64 {
        j as f64 / self.ny as f64
    }

    pub fn node_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }
}

/// Nodal values on a [`Grid2D`], stored row by row (`j` outer, `i` inner).
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                what: "field",
                x: grid.x(k % grid.nx),
                y: grid.y(k / grid.nx),
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_rows(grid: Grid2D, rows: Vec<Vec<f64>>) -> Self {
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: Grid2D, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.grid.nx..(j + 1) * self.grid.nx]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bilinear interpolation; constant extension in x outside the first and
    /// last cell centres (consistent with the Neumann sides).
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let sx = (x * g.nx as f64 - 0.5).clamp(0.0, (g.nx - 1) as f64);
        let sy = (y * g.ny as f64).clamp(0.0, g.ny as f64);
        let i0 = (sx.floor() as usize).min(g.nx - 2);
        let j0 = (sy.floor() as usize).min(g.ny - 1);
        let (tx, ty) = (sx - i0 as f64, sy - j0 as f64);
        let v = |i, j| self.get(i, j);
        (1.0 - ty) * ((1.0 - tx) * v(i0, j0) + tx * v(i0 + 1, j0))
            + ty * ((1.0 - tx) * v(i0, j0 + 1) + tx * v(i0 + 1, j0 + 1))
    }

    /// CSV with `#`-prefixed metadata lines, header `x,y,value`, rows over
    /// `j` then `i`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &[String]) -> Result<()> {
        for line in metadata {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "x,y,value")?;
        for j in 0..=self.grid.ny {
            let y = self.grid.y(j);
            for i in 0..self.grid.nx {
                writeln!(out, "{},{},{}", fmt17(self.grid.x(i)), fmt17(y), fmt17(self.get(i, j)))?;
            }
        }
        Ok(())
    }
}

/// A float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub tol: f64,
    /// Residual level set by rounding in `u`; the solve stops here when `tol` lies below it.
    pub residual_floor: f64,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

/// `max |aᵢⱼ - bᵢⱼ|` over all nodes.
pub fn linf_distance(a: &Field2D, b: &Field2D) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!(
            "{}x{} vs {}x{}",
            a.grid.nx, a.grid.ny, b.grid.nx, b.grid.ny
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// `max |aᵢⱼ - b(xᵢ, y_j)|`.
pub fn linf_distance_to<F: Fn(f64, f64) -> f64>(a: &Field2D, b: F) -> f64 {
    let g = a.grid;
    let mut m: f64 = 0.0;
    for j in 0..=g.ny {
        let y = g.y(j);
        for i in 0..g.nx {
            m = m.max((a.get(i, j) - b(g.x(i), y)).abs());
        }
    }
    m
}

/// Preconditioner for the conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    /// Cosine transform in x, one tridiagonal solve per mode in y. This is
    /// the exact inverse of the constant-coefficient operator.
    #[default]
    FastDiagonal,
    /// Symmetric block Gauss–Seidel over x-lines.
    LineSgs,
}

impl Preconditioner {
    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::FastDiagonal => "fast-diagonal",
            Preconditioner::LineSgs => "line-sgs",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            preconditioner: Preconditioner::default(),
        }
    }
}

/// The interior operator with the Dirichlet rows eliminated.
struct Operator {
    nx: usize,
    rows: usize,
    ax: f64,
    cy: f64,
}

impl Operator {
    fn new(grid: &Grid2D, eps2: f64) -> Self {
        Self {
            nx: grid.nx,
            rows: grid.ny - 1,
            ax: 1.0 / (grid.dx() * grid.dx()),
            cy: eps2 / (grid.dy() * grid.dy()),
        }
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, rows, ax, cy) = (self.nx, self.rows, self.ax, self.cy);
        out.par_chunks_mut(nx).enumerate().for_each(|(r, o)| {
            let row = &u[r * nx..(r + 1) * nx];
            let below = (r > 0).then(|| &u[(r - 1) * nx..r * nx]);
            let above = (r + 1 < rows).then(|| &u[(r + 1) * nx..(r + 2) * nx]);
            for i in 0..nx {
                let c = row[i];
                let mut xs = 0.0;
                if i > 0 {
                    xs += c - row[i - 1];
                }
                if i + 1 < nx {
                    xs += c - row[i + 1];
                }
                let mut ys = 2.0 * c;
                if let Some(b) = below {
                    ys -= b[i];
                }
                if let Some(a) = above {
                    ys -= a[i];
                }
                o[i] = ax * xs + cy * ys;
            }
        });
    }
}

struct LineSgs {
    nx: usize,
    rows: usize,
    cy: f64,
    line: FactoredTridiag,
}

impl LineSgs {
    fn new(op: &Operator) -> Self {
        let nx = op.nx;
        let diag: Vec<f64> = (0..nx)
            .map(|i| {
                let neighbours = if i == 0 || i == nx - 1 { 1.0 } else { 2.0 };
                neighbours * op.ax + 2.0 * op.cy
            })
            .collect();
        Self {
            nx,
            rows: op.rows,
            cy: op.cy,
            line: FactoredTridiag::new(&diag, op.ax),
        }
    }

    /// `z = M⁻¹ r` for `M = (D + L) D⁻¹ (D + U)` with x-line blocks `D`.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (nx, cy) = (self.nx, self.cy);
        // forward: (D + L) w = r
        for k in 0..self.rows {
            let (done, rest) = z.split_at_mut(k * nx);
            let w = &mut rest[..nx];
            w.copy_from_slice(&r[k * nx..(k + 1) * nx]);
            if k > 0 {
                let prev = &done[(k - 1) * nx..];
                w.iter_mut().zip(prev).for_each(|(a, b)| *a += cy * b);
            }
            self.line.solve_in_place(w);
        }
        // backward: (D + U) z = D w
        let mut tmp = vec![0.0; nx];
        for k in (0..self.rows.saturating_sub(1)).rev() {
            let (head, tail) = z.split_at_mut((k + 1) * nx);
            let next = &tail[..nx];
            tmp.iter_mut().zip(next).for_each(|(t, n)| *t = cy * n);
            self.line.solve_in_place(&mut tmp);
            head[k * nx..].iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
        }
    }
}

/// The staggered Neumann second difference is diagonalized by the DCT-II:
/// mode `k` has eigenvalue `4 sin²(kπ/2N)/Δx²`.
struct FastDiagonal {
    nx: usize,
    rows: usize,
    cy: f64,
    dct: Arc<dyn TransformType2And3<f64>>,
    // per (row, mode) LU data of the y-tridiagonals, laid out row-major
    mult: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl FastDiagonal {
    fn new(op: &Operator) -> Self {
        let (nx, rows, cy) = (op.nx, op.rows, op.cy);
        let diag: Vec<f64> = (0..nx)
            .map(|k| {
                let s = (k as f64 * PI / (2.0 * nx as f64)).sin();
                4.0 * op.ax * s * s + 2.0 * cy
            })
            .collect();
        let mut mult = vec![0.0; nx * rows];
        let mut inv_pivot = vec![0.0; nx * rows];
        for k in 0..nx {
            inv_pivot[k] = 1.0 / diag[k];
        }
        for r in 1..rows {
            for k in 0..nx {
                let m = -cy * inv_pivot[(r - 1) * nx + k];
                mult[r * nx + k] = m;
                inv_pivot[r * nx + k] = 1.0 / (diag[k] + m * cy);
            }
        }
        Self {
            nx,
            rows,
            cy,
            dct: DctPlanner::new().plan_dct2(nx),
            mult,
            inv_pivot,
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (nx, cy) = (self.nx, self.cy);
        z.copy_from_slice(r);
        z.par_chunks_mut(nx).for_each(|row| self.dct.process_dct2(row));
        for r in 1..self.rows {
            let (done, rest) = z.split_at_mut(r * nx);
            let prev = &done[(r - 1) * nx..];
            let mult = &self.mult[r * nx..(r + 1) * nx];
            for k in 0..nx {
                rest[k] -= mult[k] * prev[k];
            }
        }
        let last = (self.rows - 1) * nx;
        for k in 0..nx {
            z[last + k] *= self.inv_pivot[last + k];
        }
        for r in (0..self.rows - 1).rev() {
            let (head, tail) = z.split_at_mut((r + 1) * nx);
            let row = &mut head[r * nx..];
            let inv = &self.inv_pivot[r * nx..(r + 1) * nx];
            for k in 0..nx {
                row[k] = (row[k] + cy * tail[k]) * inv[k];
            }
        }
        let scale = 2.0 / nx as f64;
        z.par_chunks_mut(nx).for_each(|row| {
            self.dct.process_dct3(row);
            row.iter_mut().for_each(|v| *v *= scale);
        });
    }
}

enum Precond {
    FastDiagonal(FastDiagonal),
    LineSgs(LineSgs),
}

impl Precond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::FastDiagonal(p) => p.apply(r, z),
            Precond::LineSgs(p) => p.apply(r, z),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the five-point system for `p` on `grid` to relative residual `tol`
/// with the default preconditioner.
pub fn solve_fd(p: &ProblemSpec, grid: &Grid2D, tol: f64, max_iter: usize) -> Result<(Field2D, SolveStats)> {
    solve_fd_with(
        p,
        grid,
        &FdOptions {
            tol,
            max_iter,
            ..FdOptions::default()
        },
    )
}

pub fn solve_fd_with(p: &ProblemSpec, grid: &Grid2D, opts: &FdOptions) -> Result<(Field2D, SolveStats)> {
    let (tol, max_iter) = (opts.tol, opts.max_iter);
    if !(tol >= 1e-14) {
        return Err(Error::InvalidArgument(format!("tol must be at least 1e-14, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be positive".into()));
    }
    let start = Instant::now();
    let (nx, ny) = (grid.nx, grid.ny);
    let eps2 = p.eps2();
    let op = Operator::new(grid, eps2);

    let eval1 = |g: &crate::problem::Fn1, what, y: f64| -> Result<Vec<f64>> {
        (0..nx)
            .map(|i| {
                let x = grid.x(i);
                let v = g(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteValue { what, x, y })
                }
            })
            .collect()
    };
    let bottom = eval1(&p.phi0, "phi0", 0.0)?;
    let top = eval1(&p.phi1, "phi1", 1.0)?;

    let n = nx * op.rows;
    let mut b = vec![0.0; n];
    for r in 0..op.rows {
        let y = grid.y(r + 1);
        for i in 0..nx {
            let x = grid.x(i);
            let fv = (p.f)(x, y);
            if !fv.is_finite() {
                return Err(Error::NonFiniteValue { what: "f", x, y });
            }
            b[r * nx + i] = eps2 * fv;
        }
    }
    for i in 0..nx {
        b[i] += op.cy * bottom[i];
        b[(op.rows - 1) * nx + i] += op.cy * top[i];
    }

    // start from the linear blend of the Dirichlet rows
    let mut u: Vec<f64> = (0..n)
        .map(|k| {
            let (r, i) = (k / nx, k % nx);
            let t = grid.y(r + 1);
            (1.0 - t) * bottom[i] + t * top[i]
        })
        .collect();

    let b_norm = dot(&b, &b).sqrt();
    let mut iterations = 0;
    let mut rel = 0.0;
    let mut floor = 0.0;
    // A double-precision u cannot push ||b - Au|| below roughly eps_mach * ||A|| * ||u||,
    // which exceeds tol * ||b|| on fine anisotropic grids.
    let a_norm = 4.0 * op.ax + 4.0 * op.cy;
    let floor_of = |u: &[f64]| f64::EPSILON * a_norm * dot(u, u).sqrt() / b_norm;
    if b_norm > 0.0 {
        let mut r = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut dir = vec![0.0; n];
        let mut pre: Option<Precond> = None;
        loop {
            // (re)start from the true residual
            op.apply(&u, &mut q);
            r.iter_mut().zip(&b).zip(&q).for_each(|((r, b), q)| *r = b - q);
            rel = dot(&r, &r).sqrt() / b_norm;
            floor = floor_of(&u);
            if rel <= tol.max(floor) {
                if rel > tol {
                    log::warn!("tol {tol:e} below rounding floor {floor:.3e}; stopped at {rel:.3e}");
                }
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NoConvergence { iterations, residual: rel });
            }
            let pre = pre.get_or_insert_with(|| match opts.preconditioner {
                Preconditioner::FastDiagonal => Precond::FastDiagonal(FastDiagonal::new(&op)),
                Preconditioner::LineSgs => Precond::LineSgs(LineSgs::new(&op)),
            });
            pre.apply(&r, &mut z);
            dir.copy_from_slice(&z);
            let mut rz = dot(&r, &z);
            while iterations < max_iter {
                iterations += 1;
                op.apply(&dir, &mut q);
                let alpha = rz / dot(&dir, &q);
                u.iter_mut().zip(&dir).for_each(|(u, d)| *u += alpha * d);
                r.iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
                let res = dot(&r, &r).sqrt() / b_norm;
                if res <= tol.max(floor) {
                    break;
                }
                pre.apply(&r, &mut z);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                dir.iter_mut().zip(&z).for_each(|(d, z)| *d = z + beta * *d);
            }
        }
    } else {
        u.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut values = Vec::with_capacity(grid.node_count());
    values.extend_from_slice(&bottom);
    values.extend_from_slice(&u);
    values.extend_from_slice(&top);
    debug_assert_eq!(values.len(), nx * (ny + 1));
    let field = Field2D::new(*grid, values)?;
    Ok((
        field,
        SolveStats {
            iterations,
            relative_residual: rel,
            tol,
            residual_floor: floor,
            wall_time: start.elapsed(),
        },
    ))
}
