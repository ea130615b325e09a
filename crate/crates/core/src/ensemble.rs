//! Interacting-particle integration of the inertial system and of the
//! first-order limit equation.
//!
//! The law-dependent term `E[x_t]` is replaced by the ensemble average. Each
//! step freezes both the mean field and the kernel value at the start of the
//! step; all particles advance with the same frozen mean, then a single
//! order-independent reduction produces the next one.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result, SystemLabel};
use crate::kernels::DriftKernel;
use crate::noise::{brownian_increments, exp_remainder1, one_minus_exp, RngStream, StepNoiseModel};
use crate::stats::order_free_mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    DeterministicPoint,
    Gaussian,
}

/// Law of `(x₀, v₀)`, independent of every Brownian stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLaw {
    pub kind: InitKind,
    #[serde(default)]
    pub mean_x: f64,
    #[serde(default)]
    pub mean_v: f64,
    #[serde(default)]
    pub var_x: f64,
    #[serde(default)]
    pub var_v: f64,
    /// Declared bound on `E[x₀² + v₀²]`.
    #[serde(rename = "M")]
    pub m: f64,
}

impl InitialLaw {
    pub fn point(x0: f64, v0: f64) -> Self {
        Self {
            kind: InitKind::DeterministicPoint,
            mean_x: x0,
            mean_v: v0,
            var_x: 0.0,
            var_v: 0.0,
            m: (x0 * x0 + v0 * v0).max(f64::MIN_POSITIVE),
        }
    }

    pub fn gaussian(mean_x: f64, var_x: f64, mean_v: f64, var_v: f64, m: f64) -> Self {
        Self {
            kind: InitKind::Gaussian,
            mean_x,
            mean_v,
            var_x,
            var_v,
            m,
        }
    }

    pub fn second_moment(&self) -> f64 {
        let (vx, vv) = match self.kind {
            InitKind::DeterministicPoint => (0.0, 0.0),
            InitKind::Gaussian => (self.var_x, self.var_v),
        };
        self.mean_x * self.mean_x + vx + self.mean_v * self.mean_v + vv
    }

    /// `E[v₀²]`.
    pub fn velocity_second_moment(&self) -> f64 {
        match self.kind {
            InitKind::DeterministicPoint => self.mean_v * self.mean_v,
            InitKind::Gaussian => self.mean_v * self.mean_v + self.var_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mean_x, self.mean_v, self.var_x, self.var_v, self.m];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(param("init", "all fields must be finite"));
        }
        if self.var_x < 0.0 || self.var_v < 0.0 {
            return Err(param("init.var", "variances must be >= 0"));
        }
        if !(self.m > 0.0) {
            return Err(param("init.M", "must be > 0"));
        }
        let e2 = self.second_moment();
        if e2 > self.m * (1.0 + 1e-12) {
            return Err(param("init.M", format!("E[x0^2 + v0^2] = {e2} exceeds declared M = {}", self.m)));
        }
        Ok(())
    }

    pub fn draw(&self, seed: u64, particle: u64) -> (f64, f64) {
        match self.kind {
            InitKind::DeterministicPoint => (self.mean_x, self.mean_v),
            InitKind::Gaussian => {
                let z = RngStream::initial(seed, particle).normals();
                (self.mean_x + self.var_x.sqrt() * z[0], self.mean_v + self.var_v.sqrt() * z[1])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub beta: f64,
    pub kernel: DriftKernel,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub n_steps: usize,
    pub n_particles: usize,
    pub init: InitialLaw,
    pub seed: u64,
}

impl SimConfig {
    pub fn h(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            self.t_end / self.n_steps as f64
        }
    }

    /// Uniform grid `k·h`, `k = 0..=n_steps`.
    pub fn grid(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.n_steps).map(|k| k as f64 * h).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(param("beta", format!("must be finite and > 0, got {}", self.beta)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(param("T", format!("must be finite and > 0, got {}", self.t_end)));
        }
        if self.n_particles == 0 {
            return Err(param("n_particles", "must be >= 1"));
        }
        if self.n_steps > 0 && self.h() * self.kernel.kappa() > 0.1 {
            return Err(param(
                "n_steps",
                format!("h·kappa = {} exceeds 0.1; refine the grid", self.h() * self.kernel.kappa()),
            ));
        }
        self.init.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    SecondOrder,
    Limit,
    /// Original-time system with friction γ, unit force gain, noise √γ.
    Unscaled { gamma: f64 },
}

impl System {
    fn label(&self) -> SystemLabel {
        match self {
            System::SecondOrder => SystemLabel::SecondOrder,
            System::Limit => SystemLabel::Limit,
            System::Unscaled { .. } => SystemLabel::Unscaled,
        }
    }
}

/// Linear part of a velocity equation `dv = -friction·v dt + force_gain·F dt + noise_gain·dB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Langevin {
    pub friction: f64,
    pub force_gain: f64,
    pub noise_gain: f64,
}

impl Langevin {
    /// The β-scaled system: all three coefficients equal β.
    pub fn scaled(beta: f64) -> Self {
        Self {
            friction: beta,
            force_gain: beta,
            noise_gain: beta,
        }
    }

    pub fn unscaled(gamma: f64) -> Self {
        Self {
            friction: gamma,
            force_gain: 1.0,
            noise_gain: gamma.sqrt(),
        }
    }
}

/// Current state of an N-particle system. `v` is empty for the limit system.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub t: f64,
    pub step: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub mu_hat: f64,
    scratch: Vec<f64>,
}

impl Ensemble {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        let mut e = Self {
            t: 0.0,
            step: 0,
            x,
            v,
            mu_hat: 0.0,
            scratch: Vec::new(),
        };
        e.refresh_mean();
        e
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn refresh_mean(&mut self) {
        self.mu_hat = order_free_mean(&self.x, &mut self.scratch);
    }

    fn finish_step(&mut self, h: f64, system: SystemLabel) -> Result<()> {
        let bad = self
            .x
            .iter()
            .zip(self.v.iter().chain(std::iter::repeat(&0.0)))
            .position(|(x, v)| !(x.is_finite() && v.is_finite()));
        if let Some(particle) = bad {
            return Err(Error::Divergence {
                system,
                particle,
                step: self.step,
            });
        }
        self.step += 1;
        self.t = self.step as f64 * h;
        self.refresh_mean();
        Ok(())
    }
}

fn check_len(state: &Ensemble, n: usize) -> Result<()> {
    if state.len() != n {
        return Err(Error::Contract(format!("{} noise samples for {} particles", n, state.len())));
    }
    Ok(())
}

/// Exponential-Euler step of `dx = v dt`, `dv = -βv dt + βK(x - μ)dt + β dB`.
///
/// The linear friction is integrated exactly, so there is no restriction on
/// `β·h`. `noise` are the `(dB, dxi_x, dxi_v)` triples of
/// [`StepNoiseModel::new(beta, h)`].
pub fn exact_ou_step(
    state: &mut Ensemble,
    kernel: &DriftKernel,
    beta: f64,
    h: f64,
    noise: &[(f64, f64, f64)],
) -> Result<()> {
    exact_langevin_step(state, kernel, &Langevin::scaled(beta), h, noise, SystemLabel::SecondOrder)
}

pub(crate) fn exact_langevin_step(
    state: &mut Ensemble,
    kernel: &DriftKernel,
    dynamics: &Langevin,
    h: f64,
    noise: &[(f64, f64, f64)],
    label: SystemLabel,
) -> Result<()> {
    check_len(state, noise.len())?;
    let fr = dynamics.friction;
    let u = fr * h;
    let decay = (-u).exp();
    let a = one_minus_exp(u);
    let x_from_v = a / fr;
    let x_from_f = exp_remainder1(u) / fr;
    let f_gain = dynamics.force_gain / fr;
    let n_gain = dynamics.noise_gain / fr;
    let mu = state.mu_hat;
    state
        .x
        .par_iter_mut()
        .zip(state.v.par_iter_mut())
        .zip(noise.par_iter())
        .for_each(|((x, v), &(_, dxi_x, dxi_v))| {
            let f = f_gain * kernel.apply(*x - mu);
            let v_old = *v;
            *v = decay * v_old + a * f + n_gain * dxi_v;
            *x += x_from_v * v_old + x_from_f * f + n_gain * dxi_x;
        });
    state.finish_step(h, label)
}

/// Explicit Euler–Maruyama step of the inertial system; reference scheme only.
pub fn euler_maruyama_step(state: &mut Ensemble, kernel: &DriftKernel, beta: f64, h: f64, db: &[f64]) -> Result<()> {
    if !(beta * h < 0.5) {
        return Err(param("h", format!("explicit scheme needs beta·h < 0.5, got {}", beta * h)));
    }
    check_len(state, db.len())?;
    let mu = state.mu_hat;
    state
        .x
        .par_iter_mut()
        .zip(state.v.par_iter_mut())
        .zip(db.par_iter())
        .for_each(|((x, v), &db)| {
            let f = kernel.apply(*x - mu);
            let v_old = *v;
            *v = v_old - beta * v_old * h + beta * f * h + beta * db;
            *x += v_old * h;
        });
    state.finish_step(h, SystemLabel::SecondOrder)
}

/// Euler step of the limit equation `dy = K(y - E[y])dt + dB`.
pub fn limit_step(state: &mut Ensemble, kernel: &DriftKernel, h: f64, db: &[f64]) -> Result<()> {
    if h * kernel.kappa() > 0.1 {
        return Err(param("h", format!("limit step needs h·kappa <= 0.1, got {}", h * kernel.kappa())));
    }
    check_len(state, db.len())?;
    let mu = state.mu_hat;
    state.x.par_iter_mut().zip(db.par_iter()).for_each(|(y, &db)| {
        *y += kernel.apply(*y - mu) * h + db;
    });
    state.finish_step(h, SystemLabel::Limit)
}

/// Stored trajectories on the uniform grid, time-major: entry `k·N + i` is
/// particle `i` at `grid[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub config: SimConfig,
    pub system: System,
    pub grid: Vec<f64>,
    /// Noise-stream index of each particle.
    pub ids: Vec<u64>,
    pub x: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub mu_hat: Vec<f64>,
}

impl PathBundle {
    pub(crate) fn start(config: &SimConfig, system: System, state: &Ensemble, ids: &[u64]) -> Self {
        let cap = state.len() * (config.n_steps + 1);
        let mut x = Vec::with_capacity(cap);
        x.extend_from_slice(&state.x);
        let v = if state.v.is_empty() {
            None
        } else {
            let mut v = Vec::with_capacity(cap);
            v.extend_from_slice(&state.v);
            Some(v)
        };
        Self {
            config: config.clone(),
            system,
            grid: vec![0.0],
            ids: ids.to_vec(),
            x,
            v,
            mu_hat: vec![state.mu_hat],
        }
    }

    pub(crate) fn record(&mut self, state: &Ensemble) {
        self.grid.push(state.t);
        self.x.extend_from_slice(&state.x);
        if let Some(v) = self.v.as_mut() {
            v.extend_from_slice(&state.v);
        }
        self.mu_hat.push(state.mu_hat);
    }

    pub fn n_particles(&self) -> usize {
        self.ids.len()
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    /// All positions at grid index `k`.
    pub fn x_at(&self, k: usize) -> &[f64] {
        let n = self.n_particles();
        &self.x[k * n..(k + 1) * n]
    }

    pub fn v_at(&self, k: usize) -> Option<&[f64]> {
        let n = self.n_particles();
        self.v.as_ref().map(|v| &v[k * n..(k + 1) * n])
    }

    pub fn x_path(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().skip(i).step_by(self.n_particles()).copied()
    }

    pub fn v_path(&self, i: usize) -> Option<impl Iterator<Item = f64> + '_> {
        let n = self.n_particles();
        self.v.as_ref().map(move |v| v.iter().skip(i).step_by(n).copied())
    }

    /// Columnar CSV `t, particle_id, x, v`; `v` is empty for the limit system.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "particle_id", "x", "v"])?;
        let n = self.n_particles();
        for (k, &t) in self.grid.iter().enumerate() {
            for i in 0..n {
                let v = self.v.as_ref().map(|v| v[k * n + i]);
                w.serialize((t, i, self.x[k * n + i], v))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Initial ensemble for the given particle streams; `with_velocity = false`
/// drops `v₀` (limit system, `y₀ = x₀`).
pub fn initial_ensemble(config: &SimConfig, ids: &[u64], with_velocity: bool) -> Ensemble {
    let (x, v): (Vec<f64>, Vec<f64>) = ids.iter().map(|&id| config.init.draw(config.seed, id)).unzip();
    Ensemble::new(x, if with_velocity { v } else { Vec::new() })
}

pub fn default_ids(n: usize) -> Vec<u64> {
    (0..n as u64).collect()
}

pub fn simulate(config: &SimConfig, system: System) -> Result<PathBundle> {
    simulate_with_ids(config, system, &default_ids(config.n_particles))
}

/// Like [`simulate`], with particle `i` driven by noise stream `ids[i]`.
pub fn simulate_with_ids(config: &SimConfig, system: System, ids: &[u64]) -> Result<PathBundle> {
    config.validate()?;
    if ids.len() != config.n_particles {
        return Err(Error::Contract(format!(
            "{} stream ids for {} particles",
            ids.len(),
            config.n_particles
        )));
    }
    let h = config.h();
    let with_velocity = !matches!(system, System::Limit);
    let mut state = initial_ensemble(config, ids, with_velocity);
    let mut bundle = PathBundle::start(config, system, &state, ids);
    let seed = config.seed;
    match system {
        System::Limit => {
            for k in 0..config.n_steps as u64 {
                let db: Vec<f64> = ids
                    .par_iter()
                    .map(|&id| brownian_increments(RngStream::new(seed, id, k), h, 1)[0])
                    .collect();
                limit_step(&mut state, &config.kernel, h, &db)?;
                bundle.record(&state);
            }
        }
        System::SecondOrder | System::Unscaled { .. } => {
            let dynamics = match system {
                System::Unscaled { gamma } => Langevin::unscaled(gamma),
                _ => Langevin::scaled(config.beta),
            };
            if config.n_steps > 0 {
                let model = StepNoiseModel::new(dynamics.friction, h)?;
                for k in 0..config.n_steps as u64 {
                    let noise: Vec<_> = ids
                        .par_iter()
                        .map(|&id| model.sample(&RngStream::new(seed, id, k)))
                        .collect();
                    exact_langevin_step(&mut state, &config.kernel, &dynamics, h, &noise, system.label())?;
                    bundle.record(&state);
                }
            }
        }
    }
    Ok(bundle)
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(f)
}
