//! Reproducible Gaussian noise and the exact joint law of one integrator step.
//!
//! Every Gaussian draw is addressed by `(master_seed, domain, particle, step)`
//! and produced by a ChaCha8 block positioned at that address, so a draw
//! never depends on how particles are scheduled across workers.
//!
//! For a step of length `h` the second-order system needs three functionals
//! of the same Brownian increment:
//!
//! ```text
//! dB    = ∫ dB_u
//! dxi_x = ∫ (1 - e^{-β(t+h-u)}) dB_u
//! dxi_v = β ∫ e^{-β(t+h-u)} dB_u
//! ```
//!
//! Their covariance follows from the Itô isometry. Note the exact linear
//! relation `dxi_x = dB - dxi_v / β`: the 3×3 covariance always has rank 2.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};

/// Counter domains. Initial-condition draws never share blocks with
/// Brownian draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Brownian = 0,
    Initial = 1,
}

/// Address of one block of Gaussian draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub particle_index: u64,
    pub step_index: u64,
    pub domain: Domain,
}

// ChaCha8 block = 16 u32 words = 8 u64 = 4 Box-Muller pairs.
const WORDS_PER_STEP: u128 = 16;
const NORMALS_PER_STEP: usize = 4;

impl RngStream {
    pub fn new(master_seed: u64, particle_index: u64, step_index: u64) -> Self {
        Self {
            master_seed,
            particle_index,
            step_index,
            domain: Domain::Brownian,
        }
    }

    pub fn initial(master_seed: u64, particle_index: u64) -> Self {
        Self {
            master_seed,
            particle_index,
            step_index: 0,
            domain: Domain::Initial,
        }
    }

    pub fn at_step(self, step_index: u64) -> Self {
        Self { step_index, ..self }
    }

    /// Four standard normals that are a pure function of the address.
    pub fn normals(&self) -> [f64; NORMALS_PER_STEP] {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        debug_assert!(self.particle_index < (1 << 56));
        rng.set_stream(((self.domain as u64) << 56) | self.particle_index);
        rng.set_word_pos(self.step_index as u128 * WORDS_PER_STEP);
        let mut out = [0.0; NORMALS_PER_STEP];
        for pair in out.chunks_exact_mut(2) {
            let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
            pair[0] = z0;
            pair[1] = z1;
        }
        out
    }
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// `n` i.i.d. `N(0, h)` draws for steps `stream.step_index ..`.
///
/// Each draw is `sqrt(h)` times the first normal of the step's block, which is
/// bit-identical to the `dB` component of [`StepNoiseModel::sample`].
pub fn brownian_increments(stream: RngStream, h: f64, n: usize) -> Vec<f64> {
    let sd = h.sqrt();
    (0..n as u64)
        .map(|k| sd * stream.at_step(stream.step_index + k).normals()[0])
        .collect()
}

/// `1 - e^{-u}`.
#[inline]
pub fn one_minus_exp(u: f64) -> f64 {
    -(-u).exp_m1()
}

const SERIES_CUTOFF: f64 = 0.5;
const SERIES_TERMS: u32 = 30;

/// Sum `Σ_{n≥start} c(n) u^n / n!` with `c` given per term.
fn exp_series(u: f64, start: u32, coef: impl Fn(u32) -> f64) -> f64 {
    let mut term = 1.0;
    for n in 1..start {
        term *= u / n as f64;
    }
    let mut sum = 0.0;
    for n in start..start + SERIES_TERMS {
        term *= u / n as f64;
        sum += coef(n) * term;
    }
    sum
}

fn sign(n: u32) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `u - (1 - e^{-u})`, `~ u²/2` near 0.
pub fn exp_remainder1(u: f64) -> f64 {
    if u < SERIES_CUTOFF {
        exp_series(u, 2, sign)
    } else {
        u - one_minus_exp(u)
    }
}

/// `u - 2(1 - e^{-u}) + (1 - e^{-2u})/2 = ∫_0^u (1 - e^{-r})² dr`, `~ u³/3`.
fn position_variance_shape(u: f64) -> f64 {
    if u < SERIES_CUTOFF {
        exp_series(u, 3, |n| -sign(n) * (2f64.powi(n as i32 - 1) - 2.0))
    } else {
        let a = one_minus_exp(u);
        u - 2.0 * a + 0.5 * one_minus_exp(2.0 * u)
    }
}

/// `u(1 + e^{-u})/2 - (1 - e^{-u})`, `~ u³/12`. Proportional to the Schur
/// complement of `Var(dB)` in the `(dB, dxi_x)` block.
fn schur_shape(u: f64) -> f64 {
    if u < SERIES_CUTOFF {
        exp_series(u, 3, |n| -sign(n) * (n as f64 - 2.0) / 2.0)
    } else {
        0.5 * u * (1.0 + (-u).exp()) - one_minus_exp(u)
    }
}

pub type Mat3 = [[f64; 3]; 3];

/// Joint law of `(dB, dxi_x, dxi_v)` for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoiseModel {
    pub beta: f64,
    pub h: f64,
    pub cov: Mat3,
    /// Lower-triangular, `factor · factorᵀ = cov`. Last column is zero.
    pub factor: Mat3,
}

impl StepNoiseModel {
    /// Closed-form covariance and factor. `h = 0` gives the zero law.
    pub fn new(beta: f64, h: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(param("beta", format!("must be finite and > 0, got {beta}")));
        }
        if !(h >= 0.0 && h.is_finite()) {
            return Err(param("h", format!("must be finite and >= 0, got {h}")));
        }
        let u = beta * h;
        let a = one_minus_exp(u);
        let var_b = h;
        let var_v = 0.5 * beta * one_minus_exp(2.0 * u);
        let var_x = position_variance_shape(u) / beta;
        let cov_bv = a;
        let cov_bx = exp_remainder1(u) / beta;
        let cov_xv = 0.5 * a * a;
        let cov = [
            [var_b, cov_bx, cov_bv],
            [cov_bx, var_x, cov_xv],
            [cov_bv, cov_xv, var_v],
        ];

        let mut factor = [[0.0; 3]; 3];
        if h > 0.0 {
            let sh = h.sqrt();
            let l11 = (a * schur_shape(u) / h).sqrt() / beta;
            factor[0][0] = sh;
            factor[1][0] = cov_bx / sh;
            factor[1][1] = l11;
            factor[2][0] = a / sh;
            factor[2][1] = -beta * l11;
        }
        Ok(Self { beta, h, cov, factor })
    }

    /// `factor · z` for the step's first three normals.
    pub fn sample(&self, stream: &RngStream) -> (f64, f64, f64) {
        let z = stream.normals();
        self.transform(&z)
    }

    #[inline]
    pub fn transform(&self, z: &[f64; 4]) -> (f64, f64, f64) {
        let l = &self.factor;
        let db = l[0][0] * z[0];
        let dxi_x = l[1][0] * z[0] + l[1][1] * z[1];
        let dxi_v = l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2];
        (db, dxi_x, dxi_v)
    }
}

/// Cholesky factor of a symmetric positive semi-definite 3×3 matrix.
///
/// Pivots within `1e-10 · a_jj` of zero are treated as exact zeros and their
/// column is dropped. A clearly negative pivot triggers one retry with
/// `1e-14 · trace` added to the diagonal, then [`Error::Conditioning`].
pub fn cholesky_psd(m: &Mat3) -> Result<Mat3> {
    match try_cholesky(m) {
        Ok(l) => Ok(l),
        Err(_) => {
            let jitter = 1e-14 * (m[0][0] + m[1][1] + m[2][2]);
            let mut mj = *m;
            for (i, row) in mj.iter_mut().enumerate() {
                row[i] += jitter;
            }
            try_cholesky(&mj).map_err(|pivot| Error::Conditioning { pivot })
        }
    }
}

fn try_cholesky(m: &Mat3) -> std::result::Result<Mat3, f64> {
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        let d = m[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        let tol = 1e-10 * m[j][j].abs();
        if d > tol {
            let ljj = d.sqrt();
            l[j][j] = ljj;
            for i in (j + 1)..3 {
                let s = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = s / ljj;
            }
        } else if d < -tol || !d.is_finite() {
            return Err(d);
        }
    }
    Ok(l)
}
