//! Fourier-cosine analysis/synthesis on `[0,1]` and the repeated
//! antiderivatives `F̃ₙ(x, y) = ∫₀ˣ F̃ₙ₋₁(z, y) dz`, `F̃₀ = f̃`.
//!
//! Only zero-mean functions are represented, so a series starts at `k = 1`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::problem::DecomposedProblem;
use crate::quadrature;

/// Largest `|∫g|` accepted by [`cosine_coeffs`].
pub const ZERO_MEAN_TOL: f64 = 1e-8;
/// Largest `|F̃₁(1, y)|` accepted by the antiderivative stack.
pub const INTEGRAL_CONDITION_TOL: f64 = 1e-7;

/// `e^{exponent}`, flushed to zero below the subnormal range.
#[inline]
pub fn decay(exponent: f64) -> f64 {
    if exponent < -745.0 {
        0.0
    } else {
        exponent.exp()
    }
}

/// `g(x) = Σₖ₌₁ᴷ cₖ cos(kπx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSeries {
    coeffs: Vec<f64>,
}

impl CosineSeries {
    /// `coeffs[k-1]` is the coefficient of `cos(kπx)`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("a cosine series needs at least one mode".into()));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteValue {
                what: "cosine coefficient",
                x: (k + 1) as f64,
                y: f64::NAN,
            });
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; modes.max(1)],
        }
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of mode `k` (1-based); zero beyond the truncation.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.coeffs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    /// Magnitude of the last retained coefficient, a rough truncation gauge.
    pub fn tail(&self) -> f64 {
        self.coeffs.last().map_or(0.0, |c| c.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * PI * x).cos())
            .sum()
    }
}

pub fn eval_series(s: &CosineSeries, x: f64) -> f64 {
    s.eval(x)
}

/// Precomputed `cos(kπxⱼ)` on a Simpson grid, for projecting many sampled
/// rows onto the first `modes` cosines.
#[derive(Debug, Clone)]
pub struct CosineBasis {
    modes: usize,
    weights: Vec<f64>,
    // row-major: table[(k-1) * nodes + j]
    table: Vec<f64>,
}

impl CosineBasis {
    pub fn new(modes: usize, quad_points: usize) -> Self {
        let n = quadrature::even_intervals(quad_points.max(2));
        let x = quadrature::nodes(0.0, 1.0, n);
        let weights = quadrature::simpson_weights(0.0, 1.0, n);
        let mut table = Vec::with_capacity(modes * (n + 1));
        for k in 1..=modes {
            let kp = k as f64 * PI;
            table.extend(x.iter().map(|&xj| (kp * xj).cos()));
        }
        Self {
            modes,
            weights,
            table,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn mean(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `cₖ = 2∫₀¹ g cos(kπx) dx` for `k = 1..=modes`.
    pub fn project(&self, samples: &[f64]) -> Vec<f64> {
        assert_eq!(samples.len(), self.nodes(), "samples must lie on the basis grid");
        let weighted: Vec<f64> = samples.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        self.table
            .chunks_exact(self.nodes())
            .map(|row| 2.0 * row.iter().zip(&weighted).map(|(c, v)| c * v).sum::<f64>())
            .collect()
    }
}

/// Cosine coefficients of a zero-mean `g` by Simpson quadrature.
pub fn cosine_coeffs<G: Fn(f64) -> f64>(g: G, modes: usize, quad_points: usize) -> Result<CosineSeries> {
    if modes == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    let basis = CosineBasis::new(modes, quad_points);
    let n = basis.nodes() - 1;
    let samples: Vec<f64> = quadrature::nodes(0.0, 1.0, n).into_iter().map(g).collect();
    if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            what: "series input",
            x: j as f64 / n as f64,
            y: f64::NAN,
        });
    }
    let mean = basis.mean(&samples);
    if mean.abs() > ZERO_MEAN_TOL {
        return Err(Error::NotZeroMean { mean });
    }
    CosineSeries::new(basis.project(&samples))
}

/// Tables of `F̃₀..F̃₃` at a fixed `y` on the stack's x-grid.
#[derive(Debug)]
pub struct AntiderivativeRow {
    pub y: f64,
    fbar: f64,
    // tables[n][i] = F̃ₙ(xᵢ, y)
    tables: [Vec<f64>; 4],
}

impl AntiderivativeRow {
    pub fn table(&self, order: usize) -> &[f64] {
        &self.tables[order]
    }

    /// `F̃ₙ(1, y)`.
    pub fn at_one(&self, order: usize) -> f64 {
        *self.tables[order].last().expect("non-empty")
    }
}

/// Lazily built, memoized rows of the antiderivative recursion.
pub struct AntiderivativeStack {
    problem: DecomposedProblem,
    n: usize,
    h: f64,
    rows: Mutex<HashMap<u64, Arc<AntiderivativeRow>>>,
}

impl std::fmt::Debug for AntiderivativeStack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AntiderivativeStack")
            .field("quad_points", &self.n)
            .finish()
    }
}

/// Deepest antiderivative kept by the stack.
pub const MAX_ANTIDERIVATIVE: usize = 3;

const ROW_CACHE_LIMIT: usize = 1 << 14;

impl AntiderivativeStack {
    pub fn quad_points(&self) -> usize {
        self.n
    }

    pub fn problem(&self) -> &DecomposedProblem {
        &self.problem
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        quadrature::nodes(0.0, 1.0, self.n)
    }

    fn ftilde(&self, x: f64, y: f64, fbar: f64) -> f64 {
        (self.problem.problem().f)(x, y) - fbar
    }

    fn build_row(&self, y: f64) -> Result<AntiderivativeRow> {
        let fbar = self.problem.fbar(y);
        let f0: Vec<f64> = self
            .x_nodes()
            .into_iter()
            .map(|x| self.ftilde(x, y, fbar))
            .collect();
        let f1 = quadrature::cumulative_simpson(&f0, self.h);
        let end = *f1.last().expect("non-empty");
        if !(end.abs() <= INTEGRAL_CONDITION_TOL) {
            return Err(Error::IntegralConditionViolated { y, value: end });
        }
        let f2 = quadrature::cumulative_simpson(&f1, self.h);
        let f3 = quadrature::cumulative_simpson(&f2, self.h);
        Ok(AntiderivativeRow {
            y,
            fbar,
            tables: [f0, f1, f2, f3],
        })
    }

    /// The memoized row at `y`.
    pub fn row(&self, y: f64) -> Result<Arc<AntiderivativeRow>> {
        let key = y.to_bits();
        if let Some(r) = self.rows.lock().expect("poisoned").get(&key) {
            return Ok(Arc::clone(r));
        }
        let row = Arc::new(self.build_row(y)?);
        let mut rows = self.rows.lock().expect("poisoned");
        if rows.len() >= ROW_CACHE_LIMIT {
            rows.clear();
        }
        rows.insert(key, Arc::clone(&row));
        Ok(row)
    }

    /// `F̃ₙ(x, y)` for `n ≤ 3`. Exact table lookup on grid nodes; between
    /// nodes the last partial interval is integrated by three-point Simpson.
    pub fn eval(&self, order: usize, x: f64, y: f64) -> Result<f64> {
        if order > MAX_ANTIDERIVATIVE {
            return Err(Error::InvalidArgument(format!(
                "antiderivative order {order} exceeds {MAX_ANTIDERIVATIVE}"
            )));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("x = {x} outside [0, 1]")));
        }
        let row = self.row(y)?;
        Ok(self.eval_in_row(&row, order, x))
    }

    fn eval_in_row(&self, row: &AntiderivativeRow, order: usize, x: f64) -> f64 {
        if order == 0 {
            return self.ftilde(x, row.y, row.fbar);
        }
        let pos = x / self.h;
        let k = (pos.floor() as usize).min(self.n);
        let base = row.tables[order][k];
        let xk = k as f64 * self.h;
        let len = x - xk;
        if len <= 0.0 {
            return base;
        }
        let mid = xk + 0.5 * len;
        let inner = |s: f64| self.eval_in_row(row, order - 1, s);
        base + len / 6.0 * (row.tables[order - 1][k] + 4.0 * inner(mid) + inner(x))
    }
}

/// Sets up the recursion for `d` on `quad_points` (rounded to even) x-intervals
/// and verifies the integral condition on three sample rows.
pub fn build_antiderivatives(d: &DecomposedProblem, quad_points: usize) -> Result<AntiderivativeStack> {
    if quad_points < 8 {
        return Err(Error::InvalidArgument(format!(
            "quad_points must be at least 8, got {quad_points}"
        )));
    }
    let n = quadrature::even_intervals(quad_points);
    let stack = AntiderivativeStack {
        problem: d.clone(),
        n,
        h: 1.0 / n as f64,
        rows: Mutex::new(HashMap::new()),
    };
    for y in [0.0, 0.5, 1.0] {
        stack.row(y)?;
    }
    Ok(stack)
}
