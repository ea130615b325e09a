//! Time change from the unscaled friction-`γ` system to the `β = γ²` system,
//! and a two-sample check of the resulting equality in law.
//!
//! For a path of the unscaled system on `[0, γT′]`,
//! `x^γ(t′) = x(γt′)` and `v^γ(t′) = γ v(γt′)` solve the `β`-system on
//! `[0, T′]`. The check compares position marginals only; velocities depend
//! on the rescaling convention.

use serde::Serialize;

use crate::ensemble::{simulate, InitialLaw, PathBundle, SimConfig, System};
use crate::error::{param, Error, Result};
use crate::stats::{ks_critical, ks_statistic, mean, sample_variance};

pub const KS_ALPHA: f64 = 0.01;
/// Raw-moment differences must stay within this many combined standard errors.
pub const MOMENT_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingMap {
    gamma: f64,
    beta: f64,
}

impl ScalingMap {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(param("gamma", format!("must be finite and > 0, got {gamma}")));
        }
        Ok(Self {
            gamma,
            beta: gamma * gamma,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Initial law of the `β`-system matching `law` under the map: `v₀ ↦ γv₀`.
    pub fn scaled_initial_law(&self, law: &InitialLaw) -> InitialLaw {
        let g = self.gamma;
        let mut out = InitialLaw {
            mean_v: g * law.mean_v,
            var_v: g * g * law.var_v,
            ..*law
        };
        out.m = out.m.max(out.second_moment());
        out
    }
}

/// Simulates the unscaled system over the original-time horizon `γT′`,
/// with `T′ = base.t_end`. `base.beta` is ignored.
pub fn unscaled_simulate(map: &ScalingMap, base: &SimConfig) -> Result<PathBundle> {
    let config = SimConfig {
        beta: map.beta,
        t_end: map.gamma * base.t_end,
        ..base.clone()
    };
    simulate(&config, System::Unscaled { gamma: map.gamma })
}

/// `t′ = t/γ`, positions copied, velocities times `γ`. A bundle of the
/// unscaled system with the same `γ` becomes a second-order bundle with
/// `β = γ²`.
pub fn time_change(bundle: &PathBundle, gamma: f64) -> Result<PathBundle> {
    let map = ScalingMap::new(gamma)?;
    let n = bundle.grid.len() - 1;
    let t_new = bundle.config.t_end / gamma;
    let grid: Vec<f64> = bundle.grid.iter().map(|t| t / gamma).collect();
    let h_new = if n == 0 { 0.0 } else { t_new / n as f64 };
    let tol = 1e-12 * t_new.max(1.0);
    for (k, t) in grid.iter().enumerate() {
        if (t - k as f64 * h_new).abs() > tol {
            return Err(Error::Contract(format!(
                "grid point {k} maps to {t}, not {} on the transformed uniform grid",
                k as f64 * h_new
            )));
        }
    }
    if n > 0 && bundle.config.n_steps != n {
        return Err(Error::Contract("bundle grid does not match its configuration".into()));
    }

    let mut config = bundle.config.clone();
    config.t_end = t_new;
    let system = match bundle.system {
        System::Unscaled { gamma: g } if g == gamma => {
            config.beta = map.beta;
            System::SecondOrder
        }
        other => other,
    };
    Ok(PathBundle {
        config,
        system,
        grid,
        ids: bundle.ids.clone(),
        x: bundle.x.clone(),
        v: bundle.v.as_ref().map(|v| v.iter().map(|v| gamma * v).collect()),
        mu_hat: bundle.mu_hat.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointMatch {
    pub t: f64,
    pub ks_distance: f64,
    pub ks_critical: f64,
    /// `E_a[x^p] - E_b[x^p]` for `p = 1..=4`.
    pub moment_diffs: [f64; 4],
    /// Each difference divided by its combined standard error.
    pub moment_z: [f64; 4],
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub checkpoints: Vec<CheckpointMatch>,
    pub passes: bool,
}

fn checkpoint_index(bundle: &PathBundle, t: f64) -> Result<usize> {
    let tol = 1e-9 * t.abs().max(1.0);
    bundle
        .grid
        .iter()
        .position(|g| (g - t).abs() <= tol)
        .ok_or_else(|| Error::Contract(format!("checkpoint {t} is not on the grid")))
}

/// Two-sample KS and raw moments 1..=4 of `x` at each checkpoint.
pub fn distribution_match(a: &PathBundle, b: &PathBundle, checkpoints: &[f64]) -> Result<MatchReport> {
    let mut out = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let xa = a.x_at(checkpoint_index(a, t)?);
        let xb = b.x_at(checkpoint_index(b, t)?);
        if xa.len() < 2 || xb.len() < 2 {
            return Err(param("n_particles", "distribution match needs at least two particles per side"));
        }
        let ks_distance = ks_statistic(xa, xb);
        let crit = ks_critical(KS_ALPHA, xa.len(), xb.len());
        let mut moment_diffs = [0.0; 4];
        let mut moment_z = [0.0; 4];
        for p in 0..4 {
            let pa: Vec<f64> = xa.iter().map(|x| x.powi(p as i32 + 1)).collect();
            let pb: Vec<f64> = xb.iter().map(|x| x.powi(p as i32 + 1)).collect();
            let diff = mean(&pa) - mean(&pb);
            let se = (sample_variance(&pa) / pa.len() as f64 + sample_variance(&pb) / pb.len() as f64).sqrt();
            moment_diffs[p] = diff;
            moment_z[p] = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        let passes = ks_distance < crit && moment_z.iter().all(|z| z.abs() <= MOMENT_SIGMAS);
        out.push(CheckpointMatch {
            t,
            ks_distance,
            ks_critical: crit,
            moment_diffs,
            moment_z,
            passes,
        });
    }
    let passes = out.iter().all(|c| c.passes);
    Ok(MatchReport {
        checkpoints: out,
        passes,
    })
}
