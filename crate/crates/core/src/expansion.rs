//! Mean solution `ū`, boundary-layer terms and the composite approximations
//!
//! ```text
//! u^[2n](x,y) = ū(y) + Σₖ (φ̃₀ₖ e^{-kπy/ε} + φ̃₁ₖ e^{-kπ(1-y)/ε}) cos(kπx)
//!             + Σₘ₌₁ⁿ ε²ᵐ Σₖ [f̃ₖ⁽²ᵐ⁻²⁾(y) - f̃ₖ⁽²ᵐ⁻²⁾(0) e^{-kπy/ε}
//!                            - f̃ₖ⁽²ᵐ⁻²⁾(1) e^{-kπ(1-y)/ε}] / (kπ)²ᵐ cos(kπx)
//! ```
//!
//! where `f̃ₖ⁽ʲ⁾(y)` is the k-th cosine coefficient of `∂ʸʲ f̃(·, y)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::fdsolver::{Field2D, Grid2D};
use crate::problem::{decompose, DecomposedProblem, ProblemSpec};
use crate::quadrature;
use crate::spectral::{decay, AntiderivativeStack, CosineBasis, CosineSeries};
use crate::tridiag;

/// Above this `ε` the layers overlap and the expansion stops being meaningful.
pub const EPS_WARN: f64 = 0.5;

/// `ū(y) = y(∫₀¹∫₀ᶻ f̄ - φ̄₀ + φ̄₁) - ∫₀ʸ∫₀ᶻ f̄ + φ̄₀`, the unique solution of
/// `-ū″ = f̄`, `ū(0) = φ̄₀`, `ū(1) = φ̄₁`.
///
/// `f̄` and its two running integrals are tabulated on a uniform y-grid with
/// cumulative Simpson; off-grid points integrate the partial interval.
#[derive(Debug, Clone)]
pub struct MeanSolution {
    problem: DecomposedProblem,
    h: f64,
    fbar: Vec<f64>,
    i1: Vec<f64>,
    i2: Vec<f64>,
    pub phibar0: f64,
    pub phibar1: f64,
    /// `∫₀¹∫₀ᶻ f̄(t) dt dz`.
    pub double_integral: f64,
}

impl MeanSolution {
    fn slope(&self) -> f64 {
        self.double_integral - self.phibar0 + self.phibar1
    }

    /// `(∫₀ʸ f̄, ∫₀ʸ∫₀ᶻ f̄)`.
    fn running_integrals(&self, y: f64) -> (f64, f64) {
        let n = self.fbar.len() - 1;
        let k = ((y / self.h).floor().max(0.0) as usize).min(n);
        let yk = k as f64 * self.h;
        let len = y - yk;
        if len <= 0.0 {
            return (self.i1[k], self.i2[k]);
        }
        let fb = |t: f64| self.problem.fbar(t);
        let (f0, fq, fm, fe) = (self.fbar[k], fb(yk + 0.25 * len), fb(yk + 0.5 * len), fb(y));
        let i1_mid = self.i1[k] + len / 12.0 * (f0 + 4.0 * fq + fm);
        let i1_end = self.i1[k] + len / 6.0 * (f0 + 4.0 * fm + fe);
        let i2_end = self.i2[k] + len / 6.0 * (self.i1[k] + 4.0 * i1_mid + i1_end);
        (i1_end, i2_end)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let (_, i2) = self.running_integrals(y);
        y * self.slope() - i2 + self.phibar0
    }

    /// `ū′(y) = slope - ∫₀ʸ f̄`.
    pub fn derivative(&self, y: f64) -> f64 {
        let (i1, _) = self.running_integrals(y);
        self.slope() - i1
    }
}

pub fn mean_solution(d: &DecomposedProblem, quad_points: usize) -> Result<MeanSolution> {
    if quad_points < 8 {
        return Err(Error::InvalidArgument(format!(
            "quad_points must be at least 8, got {quad_points}"
        )));
    }
    let n = quadrature::even_intervals(quad_points);
    let h = 1.0 / n as f64;
    let fbar = quadrature::nodes(0.0, 1.0, n)
        .into_iter()
        .map(|y| check_finite(d.fbar(y), "fbar", f64::NAN, y))
        .collect::<Result<Vec<_>>>()?;
    let i1 = quadrature::cumulative_simpson(&fbar, h);
    let i2 = quadrature::cumulative_simpson(&i1, h);
    let double_integral = i2[n];
    Ok(MeanSolution {
        problem: d.clone(),
        h,
        fbar,
        i1,
        i2,
        phibar0: d.phibar0,
        phibar1: d.phibar1,
        double_integral,
    })
}

/// Three-point finite-difference solve of `-ū″ = f̄` on `M+1` uniform nodes.
/// Independent of [`mean_solution`]; second order in `1/M`.
pub fn mean_solution_bvp(d: &DecomposedProblem, m: usize) -> Result<Vec<f64>> {
    if m < 4 {
        return Err(Error::InvalidArgument(format!("M must be at least 4, got {m}")));
    }
    let dy = 1.0 / m as f64;
    let inner = m - 1;
    let mut rhs = Vec::with_capacity(inner);
    for j in 1..m {
        let y = j as f64 * dy;
        rhs.push(check_finite(d.fbar(y), "fbar", f64::NAN, y)? * dy * dy);
    }
    rhs[0] += d.phibar0;
    rhs[inner - 1] += d.phibar1;
    let diag = vec![2.0; inner];
    let off = vec![-1.0; inner - 1];
    let interior = tridiag::solve(&off, &diag, &off, &rhs);
    let mut out = Vec::with_capacity(m + 1);
    out.push(d.phibar0);
    out.extend(interior);
    out.push(d.phibar1);
    Ok(out)
}

/// Which Dirichlet edge a layer hugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerSide {
    Bottom,
    Top,
}

impl LayerSide {
    /// Distance to the edge: `y` at the bottom, `1 - y` at the top.
    pub fn distance(self, y: f64) -> f64 {
        match self {
            LayerSide::Bottom => y,
            LayerSide::Top => 1.0 - y,
        }
    }
}

/// `Σₖ cₖ e^{-kπs/ε} cos(kπx)` with `s` the distance to the layer's edge;
/// `s/ε` is the stretched variable (`ξ` at the bottom, `η` at the top).
#[derive(Debug, Clone)]
pub struct LayerTerm {
    pub side: LayerSide,
    pub series: CosineSeries,
    pub eps: f64,
}

impl LayerTerm {
    pub fn stretched(&self, y: f64) -> f64 {
        self.side.distance(y) / self.eps
    }

    /// Value at stretched coordinate `s ≥ 0`.
    pub fn eval_stretched(&self, x: f64, s: f64) -> f64 {
        self.series
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let kp = (i + 1) as f64 * PI;
                c * decay(-kp * s) * (kp * x).cos()
            })
            .sum()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_stretched(x, self.stretched(y))
    }

    /// Decay factors `e^{-kπs/ε}` at `y`, one per mode.
    pub fn decay_factors(&self, y: f64) -> Vec<f64> {
        decay_factors(self.series.modes(), self.stretched(y))
    }
}

fn decay_factors(modes: usize, stretched: f64) -> Vec<f64> {
    (1..=modes).map(|k| decay(-(k as f64) * PI * stretched)).collect()
}

pub fn layer_term(series: CosineSeries, side: LayerSide, eps: f64) -> Result<LayerTerm> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    Ok(LayerTerm { side, series, eps })
}

/// `ũ₂ᵒᵗ(x, y) = -F̃₂(x, y) + F̃₃(1, y)`, the first nonzero outer term.
pub struct OuterTerm2<'a> {
    stack: &'a AntiderivativeStack,
}

impl OuterTerm2<'_> {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let row = self.stack.row(y)?;
        Ok(-self.stack.eval(2, x, y)? + row.at_one(3))
    }
}

pub fn outer_term2(stack: &AntiderivativeStack) -> OuterTerm2<'_> {
    OuterTerm2 { stack }
}

/// An evaluable `u^[2n]` with its parts.
///
/// `eval = mean + bottom_layer + top_layer + outer_sum`, where `outer_sum`
/// is the `ε²ᵐ` forcing part including its own layer corrections.
pub struct ExpansionResult {
    order: usize,
    eps: f64,
    modes: usize,
    problem: DecomposedProblem,
    basis: CosineBasis,
    mean: MeanSolution,
    bottom: LayerTerm,
    top: LayerTerm,
    forcing_bottom: LayerTerm,
    forcing_top: LayerTerm,
    outer_rows: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for ExpansionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpansionResult")
            .field("order", &self.order)
            .field("eps", &self.eps)
            .field("modes", &self.modes)
            .finish()
    }
}

const OUTER_CACHE_LIMIT: usize = 1 << 16;

impl ExpansionResult {
    /// `n` in `u^[2n]`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn mean(&self) -> &MeanSolution {
        &self.mean
    }

    /// The `φ̃₀` layer, `Σ φ̃₀ₖ e^{-kπy/ε} cos(kπx)`.
    pub fn bottom_layer(&self) -> &LayerTerm {
        &self.bottom
    }

    /// The `φ̃₁` layer, `Σ φ̃₁ₖ e^{-kπ(1-y)/ε} cos(kπx)`.
    pub fn top_layer(&self) -> &LayerTerm {
        &self.top
    }

    /// Layer corrections of the forcing part at the bottom and top edges.
    pub fn forcing_layers(&self) -> (&LayerTerm, &LayerTerm) {
        (&self.forcing_bottom, &self.forcing_top)
    }

    /// `f̃ₖ⁽ʲ⁾(y)`, k = 1..=modes.
    pub fn forcing_coeffs(&self, j: usize, y: f64) -> Result<Vec<f64>> {
        forcing_coeffs(&self.problem, &self.basis, j, y)
    }

    /// Coefficients of the pure outer sum `Σₘ ε²ᵐ f̃ₖ⁽²ᵐ⁻²⁾(y) / (kπ)²ᵐ`.
    pub fn outer_coeffs(&self, y: f64) -> Arc<Vec<f64>> {
        let key = y.to_bits();
        if let Some(r) = self.outer_rows.lock().expect("poisoned").get(&key) {
            return Arc::clone(r);
        }
        let row = Arc::new(self.build_outer_row(y));
        let mut rows = self.outer_rows.lock().expect("poisoned");
        if rows.len() >= OUTER_CACHE_LIMIT {
            rows.clear();
        }
        rows.insert(key, Arc::clone(&row));
        row
    }

    fn build_outer_row(&self, y: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.modes];
        for m in 1..=self.order {
            // derivatives were checked in `composite`
            let coeffs = self
                .forcing_coeffs(2 * m - 2, y)
                .expect("derivative availability checked at construction");
            let prefactor = self.eps.powi(2 * m as i32);
            for (k, (a, c)) in acc.iter_mut().zip(coeffs).enumerate() {
                *a += prefactor * c / ((k + 1) as f64 * PI).powi(2 * m as i32);
            }
        }
        acc
    }

    /// The pure outer part (no layer corrections).
    pub fn outer_only(&self, x: f64, y: f64) -> f64 {
        if self.order == 0 {
            return 0.0;
        }
        synth(&self.outer_coeffs(y), x)
    }

    /// The whole `ε²ᵐ` part of `u^[2n]`, layer corrections included.
    pub fn outer_sum(&self, x: f64, y: f64) -> f64 {
        if self.order == 0 {
            return 0.0;
        }
        self.outer_only(x, y) + self.forcing_bottom.eval(x, y) + self.forcing_top.eval(x, y)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.mean.eval(y) + self.bottom.eval(x, y) + self.top.eval(x, y) + self.outer_sum(x, y)
    }

    /// Mode coefficients of the full fluctuation at height `y`.
    pub fn fluctuation_coeffs(&self, y: f64) -> Vec<f64> {
        let eb = self.bottom.decay_factors(y);
        let et = self.top.decay_factors(y);
        let mut a: Vec<f64> = (0..self.modes)
            .map(|k| self.bottom.series.coeffs()[k] * eb[k] + self.top.series.coeffs()[k] * et[k])
            .collect();
        if self.order > 0 {
            let outer = self.outer_coeffs(y);
            for k in 0..self.modes {
                a[k] += outer[k]
                    + self.forcing_bottom.series.coeffs()[k] * eb[k]
                    + self.forcing_top.series.coeffs()[k] * et[k];
            }
        }
        a
    }

    /// `u^[2n]` at every node of `grid`, one row of `y` at a time.
    pub fn eval_grid(&self, grid: &Grid2D) -> Field2D {
        let nx = grid.nx();
        let cos_table: Vec<f64> = (1..=self.modes)
            .flat_map(|k| (0..nx).map(move |i| (k as f64 * PI * grid.x(i)).cos()))
            .collect();
        let rows: Vec<Vec<f64>> = (0..=grid.ny())
            .into_par_iter()
            .map(|j| {
                let y = grid.y(j);
                let a = self.fluctuation_coeffs(y);
                let mut row = vec![self.mean.eval(y); nx];
                for (k, ak) in a.iter().enumerate() {
                    if *ak == 0.0 {
                        continue;
                    }
                    let c = &cos_table[k * nx..(k + 1) * nx];
                    row.iter_mut().zip(c).for_each(|(r, c)| *r += ak * c);
                }
                row
            })
            .collect();
        Field2D::from_rows(*grid, rows)
    }
}

fn synth(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * ((k + 1) as f64 * PI * x).cos())
        .sum()
}

fn forcing_coeffs(d: &DecomposedProblem, basis: &CosineBasis, j: usize, y: f64) -> Result<Vec<f64>> {
    let row = d.tilde_row(j, y).ok_or(Error::MissingDerivatives {
        order: j / 2 + 1,
        needed: j,
        supplied: d.problem().f_y_derivs.len(),
    })?;
    Ok(basis.project(&row))
}

/// Builds `u^[2n]` for `p` with `modes` cosine modes; all x-projections and
/// the mean use `quad_points` Simpson intervals.
pub fn composite(p: &ProblemSpec, n: usize, modes: usize, quad_points: usize) -> Result<ExpansionResult> {
    if modes == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    let needed = (2 * n).saturating_sub(2);
    if n >= 2 && p.f_y_derivs.len() < needed {
        return Err(Error::MissingDerivatives {
            order: n,
            needed,
            supplied: p.f_y_derivs.len(),
        });
    }
    let eps = p.eps();
    if eps > EPS_WARN {
        log::warn!("eps = {eps} exceeds {EPS_WARN}: boundary layers overlap, the expansion loses meaning");
    }

    let d = decompose(p, quad_points)?;
    let basis = CosineBasis::new(modes, d.quad_points());
    let mean = mean_solution(&d, quad_points)?;

    let phi0_series = CosineSeries::new(basis.project(&d.phitilde0_row()))?;
    let phi1_series = CosineSeries::new(basis.project(&d.phitilde1_row()))?;

    let mut fb = vec![0.0; modes];
    let mut ft = vec![0.0; modes];
    for m in 1..=n {
        let prefactor = eps.powi(2 * m as i32);
        let c0 = forcing_coeffs(&d, &basis, 2 * m - 2, 0.0)?;
        let c1 = forcing_coeffs(&d, &basis, 2 * m - 2, 1.0)?;
        for k in 0..modes {
            let denom = ((k + 1) as f64 * PI).powi(2 * m as i32);
            fb[k] -= prefactor * c0[k] / denom;
            ft[k] -= prefactor * c1[k] / denom;
        }
    }

    Ok(ExpansionResult {
        order: n,
        eps,
        modes,
        bottom: layer_term(phi0_series, LayerSide::Bottom, eps)?,
        top: layer_term(phi1_series, LayerSide::Top, eps)?,
        forcing_bottom: layer_term(CosineSeries::new(fb)?, LayerSide::Bottom, eps)?,
        forcing_top: layer_term(CosineSeries::new(ft)?, LayerSide::Top, eps)?,
        problem: d,
        basis,
        mean,
        outer_rows: Mutex::new(HashMap::new()),
    })
}

/// Right-hand side of the boundary-fidelity inequality at `y = 0` and `y = 1`:
/// only the opposite layers' tails `e^{-kπ/ε}` leak onto each edge.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryLeak {
    pub bottom: f64,
    pub top: f64,
}

pub fn boundary_leak(e: &ExpansionResult) -> BoundaryLeak {
    let far = decay_factors(e.modes, 1.0 / e.eps);
    let leak = |layers: [&LayerTerm; 2]| -> f64 {
        layers
            .iter()
            .flat_map(|l| l.series.coeffs().iter().zip(&far).map(|(c, f)| c.abs() * f))
            .sum()
    };
    BoundaryLeak {
        bottom: leak([&e.top, &e.forcing_top]),
        top: leak([&e.bottom, &e.forcing_bottom]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_problem;
    use crate::spectral::build_antiderivatives;

    fn problem(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        phi0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi1: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> DecomposedProblem {
        decompose(&ProblemSpec::new("t", f, phi0, phi1, 0.1).unwrap(), 1024).unwrap()
    }

    #[test]
    fn harmonic_mean_is_linear() {
        let d = problem(|_, _| 0.0, |_| 2.0, |_| -1.0);
        let m = mean_solution(&d, 1024).unwrap();
        for y in [0.0, 0.123, 0.5, 0.999, 1.0] {
            assert!((m.eval(y) - (2.0 - 3.0 * y)).abs() < 1e-13);
        }
    }

    #[test]
    fn unit_force_gives_parabola() {
        let d = problem(|_, _| 1.0, |_| 0.0, |_| 0.0);
        let m = mean_solution(&d, 1024).unwrap();
        for y in [0.0, 0.1, 0.3337, 0.5, 0.9, 1.0] {
            assert!((m.eval(y) - y * (1.0 - y) / 2.0).abs() < 1e-13, "y = {y}");
        }
        assert!((m.double_integral - 0.5).abs() < 1e-14);
    }

    #[test]
    fn mean_satisfies_boundary_values_and_ode() {
        let d = decompose(&builtin_problem("paper").unwrap(), 1024).unwrap();
        let m = mean_solution(&d, 1024).unwrap();
        assert!((m.eval(0.0) - d.phibar0).abs() < 1e-10);
        assert!((m.eval(1.0) - d.phibar1).abs() < 1e-10);
        let h = 1e-3;
        for y in [0.2, 0.45, 0.8] {
            let second = (m.eval(y + h) - 2.0 * m.eval(y) + m.eval(y - h)) / (h * h);
            assert!((-second - d.fbar(y)).abs() < 1e-4, "y = {y}");
        }
    }

    #[test]
    fn bvp_is_exact_on_linears_and_quadratics() {
        let d = problem(|_, _| 0.0, |_| 0.0, |_| 1.0);
        let u = mean_solution_bvp(&d, 16).unwrap();
        for (j, v) in u.iter().enumerate() {
            assert!((v - j as f64 / 16.0).abs() < 1e-14);
        }
        let d = problem(|_, _| 1.0, |_| 0.0, |_| 0.0);
        let u = mean_solution_bvp(&d, 16).unwrap();
        for (j, v) in u.iter().enumerate() {
            let y = j as f64 / 16.0;
            assert!((v - y * (1.0 - y) / 2.0).abs() < 1e-14);
        }
        assert!(mean_solution_bvp(&d, 3).is_err());
    }

    #[test]
    fn bvp_converges_at_second_order() {
        let d = decompose(&builtin_problem("paper").unwrap(), 1024).unwrap();
        let m = mean_solution(&d, 1024).unwrap();
        let err = |n: usize| {
            mean_solution_bvp(&d, n)
                .unwrap()
                .iter()
                .enumerate()
                .map(|(j, v)| (v - m.eval(j as f64 / n as f64)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn off_grid_mean_matches_on_grid() {
        let d = decompose(&builtin_problem("paper").unwrap(), 1024).unwrap();
        let coarse = mean_solution(&d, 512).unwrap();
        let fine = mean_solution(&d, 4096).unwrap();
        for y in [0.01, 0.333, 0.71] {
            assert!((coarse.eval(y) - fine.eval(y)).abs() < 1e-9);
        }
    }

    fn unit_series() -> CosineSeries {
        CosineSeries::new(vec![1.0]).unwrap()
    }

    #[test]
    fn layer_term_boundary_values_and_decay() {
        let b = layer_term(unit_series(), LayerSide::Bottom, 0.1).unwrap();
        let t = layer_term(unit_series(), LayerSide::Top, 0.1).unwrap();
        for x in [0.0, 0.3, 0.5, 1.0] {
            assert!((b.eval(x, 0.0) - (PI * x).cos()).abs() < 1e-15);
            assert!((t.eval(x, 1.0) - (PI * x).cos()).abs() < 1e-15);
            let far = (-10.0 * PI).exp() * (PI * x).cos();
            assert!((b.eval(x, 1.0) - far).abs() < 1e-20);
        }
        assert!(b.eval_stretched(0.0, 1e6).abs() == 0.0);
        assert!(layer_term(unit_series(), LayerSide::Top, 0.0).is_err());
    }

    #[test]
    fn outer_term2_of_separable_force() {
        let g = |y: f64| 2.0 - y;
        let d = problem(move |x, y| (PI * x).cos() * g(y), |_| 0.0, |_| 0.0);
        let stack = build_antiderivatives(&d, 1024).unwrap();
        let outer = outer_term2(&stack);
        for y in [0.0, 0.4, 1.0] {
            for x in [0.0, 0.25, 0.6, 1.0] {
                let want = g(y) * (PI * x).cos() / (PI * PI);
                assert!((outer.eval(x, y).unwrap() - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn outer_term2_is_zero_mean() {
        let d = decompose(&builtin_problem("paper").unwrap(), 1024).unwrap();
        let stack = build_antiderivatives(&d, 1024).unwrap();
        let outer = outer_term2(&stack);
        for y in [0.0, 0.5, 0.9] {
            let integral = quadrature::integrate(|x| outer.eval(x, y).unwrap(), 0.0, 1.0, 256);
            assert!(integral.abs() < 1e-10, "y = {y}: {integral:e}");
        }
        let zero = decompose(&builtin_problem("zero").unwrap(), 64).unwrap();
        let stack = build_antiderivatives(&zero, 64).unwrap();
        assert_eq!(outer_term2(&stack).eval(0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn no_layer_problem_expands_to_mean() {
        let p = builtin_problem("no-layer").unwrap();
        for n in 0..=3 {
            let e = composite(&p, n, 16, 1024).unwrap();
            for (x, y) in [(0.1, 0.0), (0.5, 0.37), (0.9, 1.0)] {
                let exact = (PI * y).sin() + 1.0 + y;
                assert!((e.eval(x, y) - e.mean().eval(y)).abs() < 1e-12);
                assert!((e.eval(x, y) - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_problem_expands_to_zero() {
        let p = builtin_problem("zero").unwrap();
        let e = composite(&p, 2, 8, 64).unwrap();
        assert_eq!(e.eval(0.3, 0.6), 0.0);
    }

    #[test]
    fn order_two_needs_derivatives() {
        let p = builtin_problem("paper").unwrap().with_y_derivs(Vec::new());
        assert!(composite(&p, 1, 8, 64).is_ok());
        assert!(matches!(
            composite(&p, 2, 8, 64),
            Err(Error::MissingDerivatives { needed: 2, supplied: 0, .. })
        ));
    }

    #[test]
    fn leading_order_is_mean_plus_layers() {
        let p = builtin_problem("paper").unwrap();
        let e = composite(&p, 0, 32, 1024).unwrap();
        for (x, y) in [(0.2, 0.05), (0.7, 0.5), (0.4, 0.97)] {
            assert_eq!(e.outer_sum(x, y), 0.0);
            let parts = e.mean().eval(y) + e.bottom_layer().eval(x, y) + e.top_layer().eval(x, y);
            assert_eq!(e.eval(x, y), parts);
        }
    }

    #[test]
    fn grid_evaluation_matches_pointwise() {
        let p = builtin_problem("paper").unwrap();
        let e = composite(&p, 2, 32, 512).unwrap();
        let grid = Grid2D::new(8, 6).unwrap();
        let field = e.eval_grid(&grid);
        for j in 0..=6 {
            for i in 0..8 {
                let (x, y) = (grid.x(i), grid.y(j));
                assert!((field.get(i, j) - e.eval(x, y)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn forcing_part_carries_exact_even_powers() {
        let base = builtin_problem("paper").unwrap();
        let (x, y) = (0.3, 0.5);
        let at = |eps2: f64, n: usize| {
            composite(&base.clone().with_eps2(eps2).unwrap(), n, 32, 512)
                .unwrap()
                .outer_only(x, y)
        };
        // order 1: outer/ε² does not depend on ε
        let a = at(0.01, 1) / 0.01;
        let b = at(0.04, 1) / 0.04;
        assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        // order 2: (outer - ε² A)/ε⁴ does not depend on ε
        let c = (at(0.01, 2) - 0.01 * a) / 1e-4;
        let d = (at(0.04, 2) - 0.04 * a) / 16e-4;
        assert!((c - d).abs() <= 1e-9 * c.abs(), "{c} vs {d}");
    }
}
