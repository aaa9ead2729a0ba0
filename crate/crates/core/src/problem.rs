//! Problem instances, the mean/fluctuation split along `x`, and the
//! corner compatibility check.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::quadrature;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Default tolerance on the endpoint slopes of the Dirichlet data.
pub const DEFAULT_TOL_COMPAT: f64 = 1e-8;
/// Default relative tolerance of the y-derivative sanity check.
pub const DEFAULT_TOL_DERIV: f64 = 1e-4;
/// Default step of the one-sided endpoint difference quotients.
pub const DEFAULT_COMPAT_STEP: f64 = 1e-6;

/// Number of `y` rows on which `decompose` screens `f` for non-finite values.
const SCREEN_ROWS: usize = 32;

/// Data of one anisotropic problem: force `f`, Dirichlet data `φ₀`, `φ₁`,
/// and the anisotropy `ε`.
///
/// `f_y_derivs[j-1]` is `∂ʸʲ f`; orders `n ≥ 2` of the expansion need them
/// up to `2n-2`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub f: Fn2,
    pub f_y_derivs: Vec<Fn2>,
    pub phi0: Fn1,
    pub phi1: Fn1,
    eps: f64,
    // kept separately so a user-supplied ε² round-trips exactly
    eps2: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("y_derivs", &self.f_y_derivs.len())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new<F, P0, P1>(name: impl Into<String>, f: F, phi0: P0, phi1: P1, eps: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        P0: Fn(f64) -> f64 + Send + Sync + 'static,
        P1: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_eps(eps)?;
        Ok(Self {
            name: name.into(),
            f: Arc::new(f),
            f_y_derivs: Vec::new(),
            phi0: Arc::new(phi0),
            phi1: Arc::new(phi1),
            eps,
            eps2: eps * eps,
        })
    }

    /// Attaches analytic y-derivatives `∂ʸ¹f, ∂ʸ²f, …` (in that order).
    pub fn with_y_derivs(mut self, derivs: Vec<Fn2>) -> Self {
        self.f_y_derivs = derivs;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        self.eps = eps;
        self.eps2 = eps * eps;
        Ok(self)
    }

    pub fn with_eps2(self, eps2: f64) -> Result<Self> {
        if !(eps2 > 0.0) || !eps2.is_finite() {
            return Err(Error::InvalidArgument(format!("eps2 must be positive, got {eps2}")));
        }
        let mut p = self.with_eps(eps2.sqrt())?;
        p.eps2 = eps2;
        Ok(p)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    /// `∂ʸʲ f` for `j ≥ 1`, `f` itself for `j = 0`.
    pub fn y_deriv(&self, j: usize) -> Option<&Fn2> {
        if j == 0 {
            Some(&self.f)
        } else {
            self.f_y_derivs.get(j - 1)
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")))
    }
}

/// The split `f = f̄(y) + f̃`, `φᵢ = φ̄ᵢ + φ̃ᵢ`, with means over `x ∈ [0,1]`
/// taken by composite Simpson on `quad_points + 1` uniform nodes.
#[derive(Clone)]
pub struct DecomposedProblem {
    problem: ProblemSpec,
    quad_points: usize,
    x_nodes: Arc<[f64]>,
    weights: Arc<[f64]>,
    pub phibar0: f64,
    pub phibar1: f64,
}

impl fmt::Debug for DecomposedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecomposedProblem")
            .field("problem", &self.problem)
            .field("quad_points", &self.quad_points)
            .field("phibar0", &self.phibar0)
            .field("phibar1", &self.phibar1)
            .finish()
    }
}

impl DecomposedProblem {
    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn mean_of<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.x_nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// `f̄(y) = ∫₀¹ f(x, y) dx`.
    pub fn fbar(&self, y: f64) -> f64 {
        let f = &self.problem.f;
        self.mean_of(|x| f(x, y))
    }

    /// `f̃(x, y) = f(x, y) - f̄(y)`.
    pub fn ftilde(&self, x: f64, y: f64) -> f64 {
        (self.problem.f)(x, y) - self.fbar(y)
    }

    pub fn phitilde0(&self, x: f64) -> f64 {
        (self.problem.phi0)(x) - self.phibar0
    }

    pub fn phitilde1(&self, x: f64) -> f64 {
        (self.problem.phi1)(x) - self.phibar1
    }

    /// Samples of `∂ʸʲf(·, y)` on the quadrature nodes with their x-mean
    /// removed. `j = 0` gives `f̃(·, y)`. `None` when the derivative was not
    /// supplied.
    pub fn tilde_row(&self, j: usize, y: f64) -> Option<Vec<f64>> {
        let g = self.problem.y_deriv(j)?;
        let mut row: Vec<f64> = self.x_nodes.iter().map(|&x| g(x, y)).collect();
        let mean: f64 = row.iter().zip(self.weights.iter()).map(|(v, w)| v * w).sum();
        row.iter_mut().for_each(|v| *v -= mean);
        Some(row)
    }

    pub fn phitilde0_row(&self) -> Vec<f64> {
        self.x_nodes.iter().map(|&x| self.phitilde0(x)).collect()
    }

    pub fn phitilde1_row(&self) -> Vec<f64> {
        self.x_nodes.iter().map(|&x| self.phitilde1(x)).collect()
    }
}

/// Splits `p` into means and fluctuations. `quad_points` is rounded up to
/// an even interval count.
pub fn decompose(p: &ProblemSpec, quad_points: usize) -> Result<DecomposedProblem> {
    if quad_points < 8 {
        return Err(Error::InvalidArgument(format!(
            "quad_points must be at least 8, got {quad_points}"
        )));
    }
    let n = quadrature::even_intervals(quad_points);
    let x_nodes = quadrature::nodes(0.0, 1.0, n);
    let weights = quadrature::simpson_weights(0.0, 1.0, n);

    for &x in &x_nodes {
        check_finite((p.phi0)(x), "phi0", x, 0.0)?;
        check_finite((p.phi1)(x), "phi1", x, 1.0)?;
    }
    for r in 0..=SCREEN_ROWS {
        let y = r as f64 / SCREEN_ROWS as f64;
        for &x in &x_nodes {
            check_finite((p.f)(x, y), "f", x, y)?;
        }
    }

    let mean = |g: &Fn1| -> f64 { x_nodes.iter().zip(&weights).map(|(&x, &w)| w * g(x)).sum() };
    let phibar0 = mean(&p.phi0);
    let phibar1 = mean(&p.phi1);

    Ok(DecomposedProblem {
        problem: p.clone(),
        quad_points: n,
        x_nodes: x_nodes.into(),
        weights: weights.into(),
        phibar0,
        phibar1,
    })
}

/// Endpoint slopes of the Dirichlet data.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    /// `φ₀′(0)`, `φ₀′(1)`, `φ₁′(0)`, `φ₁′(1)` (difference quotients).
    pub phi0_left: f64,
    pub phi0_right: f64,
    pub phi1_left: f64,
    pub phi1_right: f64,
    pub step: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CompatibilityReport {
    pub fn slopes(&self) -> [f64; 4] {
        [self.phi0_left, self.phi0_right, self.phi1_left, self.phi1_right]
    }
}

/// One-sided second-order difference quotients of `φ₀`, `φ₁` at `x = 0, 1`.
/// The corners are consistent with the Neumann sides iff all four vanish.
pub fn check_compatibility(p: &ProblemSpec, h: f64, tol_compat: f64) -> CompatibilityReport {
    let left = |g: &Fn1| (-3.0 * g(0.0) + 4.0 * g(h) - g(2.0 * h)) / (2.0 * h);
    let right = |g: &Fn1| (3.0 * g(1.0) - 4.0 * g(1.0 - h) + g(1.0 - 2.0 * h)) / (2.0 * h);
    let phi0_left = left(&p.phi0);
    let phi0_right = right(&p.phi0);
    let phi1_left = left(&p.phi1);
    let phi1_right = right(&p.phi1);
    let pass = [phi0_left, phi0_right, phi1_left, phi1_right]
        .iter()
        .all(|d| d.abs() <= tol_compat);
    CompatibilityReport {
        phi0_left,
        phi0_right,
        phi1_left,
        phi1_right,
        step: h,
        tol: tol_compat,
        pass,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeCheck {
    /// Worst relative deviation of entry `j` from a central difference of entry `j-1`.
    pub max_rel_deviation: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// Sanity check of the supplied `∂ʸʲf` against central differences of the
/// previous entry on a coarse interior sample.
pub fn check_y_derivatives(p: &ProblemSpec, tol_deriv: f64) -> DerivativeCheck {
    const H: f64 = 1e-4;
    const SAMPLES: usize = 9;
    let mut max_rel_deviation = Vec::with_capacity(p.f_y_derivs.len());
    for j in 1..=p.f_y_derivs.len() {
        let lower = p.y_deriv(j - 1).expect("checked above");
        let upper = p.y_deriv(j).expect("checked above");
        let mut worst: f64 = 0.0;
        for a in 0..=SAMPLES {
            for b in 1..SAMPLES {
                let x = a as f64 / SAMPLES as f64;
                let y = b as f64 / SAMPLES as f64;
                let fd = (lower(x, y + H) - lower(x, y - H)) / (2.0 * H);
                let exact = upper(x, y);
                worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
        max_rel_deviation.push(worst);
    }
    let pass = max_rel_deviation.iter().all(|d| *d <= tol_deriv);
    DerivativeCheck {
        max_rel_deviation,
        tol: tol_deriv,
        pass,
    }
}

/// Default `ε` of the built-in problems (`ε² = 0.05`).
pub const BUILTIN_EPS2: f64 = 0.05;

pub const BUILTIN_NAMES: [&str; 4] = ["paper", "constant-force", "no-layer", "zero"];

/// Named problem instances for the CLI. All are returned with `ε² = 0.05`;
/// use [`ProblemSpec::with_eps2`] to change it.
///
/// - `paper`: `f = sin(π(x²+y²))`, `φ₀ = cos(πx)`, `φ₁ = 16x²(x-1)²`,
///   with `∂ʸʲf` for `j ≤ 4`.
/// - `constant-force`: `f ≡ 1`, `φ₀ = φ₁ ≡ 0`; exact `u = y(1-y)/2`.
/// - `no-layer`: `f = π² sin(πy)`, `φ₀ ≡ 1`, `φ₁ ≡ 2`; exact
///   `u = sin(πy) + 1 + y` for every `ε`.
/// - `zero`: everything zero.
pub fn builtin_problem(name: &str) -> Result<ProblemSpec> {
    let eps = BUILTIN_EPS2.sqrt();
    let zero2 = || -> Fn2 { Arc::new(|_, _| 0.0) };
    match name {
        "paper" => {
            let derivs: Vec<Fn2> = vec![
                Arc::new(|x, y| {
                    let t = PI * (x * x + y * y);
                    2.0 * PI * y * t.cos()
                }),
                Arc::new(|x, y| {
                    let t = PI * (x * x + y * y);
                    let b = 2.0 * PI * y;
                    2.0 * PI * t.cos() - b * b * t.sin()
                }),
                Arc::new(|x, y| {
                    let t = PI * (x * x + y * y);
                    let (a, b) = (2.0 * PI, 2.0 * PI * y);
                    -3.0 * a * b * t.sin() - b * b * b * t.cos()
                }),
                Arc::new(|x, y| {
                    let t = PI * (x * x + y * y);
                    let (a, b) = (2.0 * PI, 2.0 * PI * y);
                    -3.0 * a * a * t.sin() - 6.0 * a * b * b * t.cos() + b.powi(4) * t.sin()
                }),
            ];
            Ok(ProblemSpec::new(
                "paper",
                |x, y| (PI * (x * x + y * y)).sin(),
                |x| (PI * x).cos(),
                |x| 16.0 * x * x * (x - 1.0) * (x - 1.0),
                eps,
            )?
            .with_y_derivs(derivs))
        }
        "constant-force" => Ok(ProblemSpec::new("constant-force", |_, _| 1.0, |_| 0.0, |_| 0.0, eps)?
            .with_y_derivs(vec![zero2(), zero2(), zero2(), zero2()])),
        "no-layer" => {
            let derivs: Vec<Fn2> = vec![
                Arc::new(|_, y| PI.powi(3) * (PI * y).cos()),
                Arc::new(|_, y| -PI.powi(4) * (PI * y).sin()),
                Arc::new(|_, y| -PI.powi(5) * (PI * y).cos()),
                Arc::new(|_, y| PI.powi(6) * (PI * y).sin()),
            ];
            Ok(ProblemSpec::new(
                "no-layer",
                |_, y| PI * PI * (PI * y).sin(),
                |_| 1.0,
                |_| 2.0,
                eps,
            )?
            .with_y_derivs(derivs))
        }
        "zero" => Ok(ProblemSpec::new("zero", |_, _| 0.0, |_| 0.0, |_| 0.0, eps)?
            .with_y_derivs(vec![zero2(), zero2(), zero2(), zero2()])),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}
