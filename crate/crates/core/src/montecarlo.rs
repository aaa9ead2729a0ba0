//! Feynman–Kac estimator for `u_ε(x, y)`.
//!
//! The diffusion `dX = ε⁻¹dW` (reflected at x = 0, 1), `dY = dB` (absorbed
//! at y = 0, 1) has generator `½(ε⁻²∂ₓ² + ∂ᵧ²)`, so
//! `u(x, y) = E[φ_exit(X_τ) + ½∫₀^τ f(X_t, Y_t) dt]`.
//!
//! Every path owns a ChaCha8 stream selected by its index, and paths are
//! reduced in fixed-size chunks in index order, so the estimate depends
//! only on the seed and the configuration.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::LayerSide;
use crate::problem::ProblemSpec;

pub const DEFAULT_DT: f64 = 1e-5;
pub const DEFAULT_PATHS: usize = 10_000;
pub const MAX_DT: f64 = 1e-3;
pub const MIN_PATHS: usize = 100;

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            n_paths: DEFAULT_PATHS,
            seed: 0,
            bridge_correction: false,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidArgument(format!(
                "dt must lie in (0, {MAX_DT}], got {}",
                self.dt
            )));
        }
        if self.n_paths < MIN_PATHS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_PATHS} paths, got {}",
                self.n_paths
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub mean_tau: f64,
    pub seed: u64,
    pub dt: f64,
}

impl McEstimate {
    /// `|mean - value| ≤ k·std_error`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Folds the real line onto `[0, 1]` by repeated reflection at 0 and 1.
pub fn reflect_unit(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub payoff: f64,
    pub tau: f64,
    pub exit: LayerSide,
    /// Visited states, including the start and the exit state, if recording
    /// was requested.
    pub states: Vec<(f64, f64)>,
}

struct Stepper<'a> {
    p: &'a ProblemSpec,
    cfg: &'a McConfig,
    sx: f64,
    sy: f64,
}

impl<'a> Stepper<'a> {
    fn new(p: &'a ProblemSpec, cfg: &'a McConfig) -> Self {
        let sq = cfg.dt.sqrt();
        Self {
            p,
            cfg,
            sx: sq / p.eps(),
            sy: sq,
        }
    }

    fn run(&self, x0: f64, y0: f64, index: u64, mut record: Option<&mut Vec<(f64, f64)>>) -> Result<(f64, f64, LayerSide)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index);
        let dt = self.cfg.dt;
        let (mut x, mut y) = (x0, y0);
        let mut integral = 0.0;
        let mut steps: u64 = 0;
        if let Some(r) = record.as_deref_mut() {
            r.push((x, y));
        }
        let exit = loop {
            let fv = (self.p.f)(x, y);
            if !fv.is_finite() {
                return Err(Error::NonFiniteValue { what: "f", x, y });
            }
            integral += fv * dt;
            steps += 1;
            let xi: f64 = rng.sample(StandardNormal);
            let zeta: f64 = rng.sample(StandardNormal);
            let y_prev = y;
            x = reflect_unit(x + self.sx * xi);
            y += self.sy * zeta;
            if let Some(r) = record.as_deref_mut() {
                r.push((x, y.clamp(0.0, 1.0)));
            }
            if y <= 0.0 {
                break LayerSide::Bottom;
            }
            if y >= 1.0 {
                break LayerSide::Top;
            }
            if self.cfg.bridge_correction {
                // probability that the bridge between the two samples touched
                // each boundary
                let u: f64 = rng.random();
                let p_bottom = (-2.0 * y_prev * y / dt).exp();
                let p_top = (-2.0 * (1.0 - y_prev) * (1.0 - y) / dt).exp();
                if u < p_bottom {
                    break LayerSide::Bottom;
                }
                if u < p_bottom + p_top {
                    break LayerSide::Top;
                }
            }
        };
        let boundary = match exit {
            LayerSide::Bottom => (self.p.phi0)(x),
            LayerSide::Top => (self.p.phi1)(x),
        };
        if !boundary.is_finite() {
            return Err(Error::NonFiniteValue {
                what: "boundary data",
                x,
                y: if exit == LayerSide::Bottom { 0.0 } else { 1.0 },
            });
        }
        Ok((boundary + 0.5 * integral, steps as f64 * dt, exit))
    }
}

fn check_start(x0: f64, y0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::InvalidArgument(format!("x0 must lie in [0, 1], got {x0}")));
    }
    if y0 == 0.0 || y0 == 1.0 {
        return Err(Error::DegenerateStart(y0));
    }
    if !(y0 > 0.0 && y0 < 1.0) {
        return Err(Error::InvalidArgument(format!("y0 must lie in (0, 1), got {y0}")));
    }
    Ok(())
}

/// Simulates path `index` of the configuration and records its states.
pub fn sample_path(p: &ProblemSpec, x0: f64, y0: f64, cfg: &McConfig, index: u64) -> Result<PathRecord> {
    check_start(x0, y0)?;
    let mut states = Vec::new();
    let (payoff, tau, exit) = Stepper::new(p, cfg).run(x0, y0, index, Some(&mut states))?;
    Ok(PathRecord {
        payoff,
        tau,
        exit,
        states,
    })
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    tau: f64,
}

impl Moments {
    fn push(&mut self, v: f64, tau: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
        self.tau += tau;
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
            tau: self.tau + o.tau,
        }
    }
}

/// Monte Carlo estimate of `u_ε(x0, y0)`.
pub fn estimate_point(p: &ProblemSpec, x0: f64, y0: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    check_start(x0, y0)?;
    let stepper = Stepper::new(p, cfg);
    let n = cfg.n_paths;
    let chunks: Vec<Moments> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let (v, tau, _) = stepper.run(x0, y0, i as u64, None)?;
                m.push(v, tau);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let total = chunks.into_iter().fold(Moments::default(), Moments::merge);
    let var = total.m2 / (total.n - 1.0);
    Ok(McEstimate {
        mean: total.mean,
        std_error: (var / total.n).sqrt(),
        n_paths: n,
        mean_tau: total.tau / total.n,
        seed: cfg.seed,
        dt: cfg.dt,
    })
}
