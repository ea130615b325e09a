//! Proof constants of the `O(1/β)` strong-error bound and Monte-Carlo checks
//! of each intermediate moment estimate.
//!
//! Constants are carried in log space. Two variants are reported side by
//! side:
//!
//! * *printed*: `H = H₀ e^{θT²}`, the `I₂` bound carries a second factor
//!   `e^{θT²}`, and the final Gronwall factor is `e^{DT²}`;
//! * *sharp*: a single `e^{θT²}` in the `I₂` bound and `e^{DT}` from
//!   Gronwall applied to `a(t) ≤ c + D∫a`.
//!
//! The I-terms of the variation-of-constants decomposition are
//!
//! ```text
//! I₀(t) = v₀ (1 - e^{-βt}) / β
//! I₁(t) = -e^{-βt} ∫₀ᵗ e^{βs} dB_s
//! I₂(t) = -e^{-βt} ∫₀ᵗ e^{βs} K(x_s - μ_s) ds
//! ```
//!
//! `I₁` and `I₂` are accumulated with the exponential recursion
//! `I(t+h) = e^{-βh} I(t) + increment`, which never forms `e^{βs}` and uses
//! the same frozen kernel value per step as the integrator.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::CoupledRun;
use crate::ensemble::{PathBundle, System};
use crate::error::{param, Error, Result};
use crate::kernels::check_lipschitz;
use crate::noise::{one_minus_exp, RngStream, StepNoiseModel};
use crate::stats::{estimate_error, ErrorEstimate};

/// A positive quantity held as its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub ln: f64,
}

impl LogValue {
    pub fn from_ln(ln: f64) -> Self {
        Self { ln }
    }

    pub fn of(v: f64) -> Self {
        Self { ln: v.ln() }
    }

    /// `exp(ln)`, which may be `inf`.
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    pub fn overflows(&self) -> bool {
        !self.value().is_finite()
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundLedger {
    pub m: f64,
    pub kappa: f64,
    pub t_end: f64,
    pub theta: f64,
    pub d: f64,
    pub h0: f64,
    pub h: LogValue,
    pub lambda: LogValue,
    pub lambda_sharp: LogValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub ln: f64,
    /// The bound is `inf` in f64; it is still well defined in log space.
    pub overflow: bool,
}

impl From<LogValue> for BoundValue {
    fn from(l: LogValue) -> Self {
        Self {
            value: l.value(),
            ln: l.ln,
            overflow: l.overflows(),
        }
    }
}

pub fn compute_ledger(m: f64, kappa: f64, t_end: f64) -> Result<BoundLedger> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(param("M", format!("must be finite and > 0, got {m}")));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(param("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(param("T", format!("must be finite and > 0, got {t_end}")));
    }
    let t = t_end;
    let k2 = kappa * kappa;
    let theta = 20.0 * k2;
    let d = 10.0 * k2 * t;
    let h0 = 5.0 * m + 5.0 + 45.0 * t + 40.0 * t * t;
    let ln_h = h0.ln() + theta * t * t;
    let ln_k2t = (k2 * t).ln();
    let ln_15 = 1.5f64.ln();
    let ln5 = 5f64.ln();
    let lambda = ln5 + ln_add_exp(ln_k2t + ln_h + theta * t * t, ln_15);
    let lambda_sharp = ln5 + ln_add_exp(ln_k2t + ln_h, ln_15);
    Ok(BoundLedger {
        m,
        kappa,
        t_end,
        theta,
        d,
        h0,
        h: LogValue::from_ln(ln_h),
        lambda: LogValue::from_ln(lambda),
        lambda_sharp: LogValue::from_ln(lambda_sharp),
    })
}

impl BoundLedger {
    fn ln_kappa2_t(&self) -> f64 {
        (self.kappa * self.kappa * self.t_end).ln()
    }

    /// `(1/β) Λ e^{DT²}`.
    pub fn strong_error_bound(&self, beta: f64) -> BoundValue {
        let t = self.t_end;
        LogValue::from_ln(self.lambda.ln + self.d * t * t - beta.ln()).into()
    }

    /// `(1/β) Λ_sharp e^{DT}`.
    pub fn strong_error_bound_sharp(&self, beta: f64) -> BoundValue {
        LogValue::from_ln(self.lambda_sharp.ln + self.d * self.t_end - beta.ln()).into()
    }

    /// `(κ²/β) T H e^{θT²}`.
    pub fn i2_bound(&self, beta: f64) -> BoundValue {
        let t = self.t_end;
        LogValue::from_ln(self.ln_kappa2_t() + self.h.ln + self.theta * t * t - beta.ln()).into()
    }

    /// `(κ²/β) T H`.
    pub fn i2_bound_sharp(&self, beta: f64) -> BoundValue {
        LogValue::from_ln(self.ln_kappa2_t() + self.h.ln - beta.ln()).into()
    }

    /// `Λ/β`, the combined I-term bound.
    pub fn i_sum_bound(&self, beta: f64) -> BoundValue {
        LogValue::from_ln(self.lambda.ln - beta.ln()).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentValue {
    pub value: f64,
    /// The inequality's right-hand side as printed.
    pub bound: f64,
    /// The printed bound assumes `E|v₀|^k ≤ 1`; true when that fails.
    pub needs_unit_velocity_moment: bool,
}

/// `E|I₀(t)|^k = E|v₀|^k (1 - e^{-βt})^k / β^k` against the printed `1/β^k`.
pub fn i0_moment(beta: f64, t: f64, k: u32, v0_abs_moment_k: f64) -> Result<MomentValue> {
    if !(beta > 0.0) {
        return Err(param("beta", "must be > 0"));
    }
    if !(t >= 0.0) {
        return Err(param("t", "must be >= 0"));
    }
    if k == 0 {
        return Err(param("k", "must be >= 1"));
    }
    let k = k as i32;
    Ok(MomentValue {
        value: v0_abs_moment_k * (one_minus_exp(beta * t) / beta).powi(k),
        bound: beta.powi(-k),
        needs_unit_velocity_moment: v0_abs_moment_k > 1.0,
    })
}

/// `E|I₁(t)|² = (1 - e^{-2βt}) / (2β)` against `1/(2β)`.
pub fn i1_second_moment(beta: f64, t: f64) -> Result<MomentValue> {
    if !(beta > 0.0) {
        return Err(param("beta", "must be > 0"));
    }
    if !(t >= 0.0) {
        return Err(param("t", "must be >= 0"));
    }
    Ok(MomentValue {
        value: one_minus_exp(2.0 * beta * t) / (2.0 * beta),
        bound: 0.5 / beta,
        needs_unit_velocity_moment: false,
    })
}

/// Per-particle I-term statistics along a stored inertial bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ITerms {
    pub i0_sup_sq: Vec<f64>,
    pub i1_sup_sq: Vec<f64>,
    pub i2_sup_sq: Vec<f64>,
    /// `I₁(T)²`, for the pointwise second-moment check.
    pub i1_final_sq: Vec<f64>,
}

/// Per-particle `(I₀, I₁, I₂)` paths of one particle, on the bundle's grid.
pub fn i_term_paths(bundle: &PathBundle, i: usize) -> Result<[Vec<f64>; 3]> {
    let ctx = ITermContext::new(bundle)?;
    Ok(ctx.paths(bundle, i))
}

struct ITermContext {
    beta: f64,
    decay: f64,
    a: f64,
    model: StepNoiseModel,
}

impl ITermContext {
    fn new(bundle: &PathBundle) -> Result<Self> {
        if bundle.system != System::SecondOrder || bundle.v.is_none() {
            return Err(Error::Contract("I-terms need a second-order bundle with velocities".into()));
        }
        let beta = bundle.config.beta;
        let h = bundle.config.h();
        Ok(Self {
            beta,
            decay: (-beta * h).exp(),
            a: one_minus_exp(beta * h),
            model: StepNoiseModel::new(beta, h)?,
        })
    }

    fn paths(&self, bundle: &PathBundle, i: usize) -> [Vec<f64>; 3] {
        let n_points = bundle.n_points();
        let kernel = &bundle.config.kernel;
        let v0 = bundle.v_at(0).expect("velocities")[i];
        let id = bundle.ids[i];
        let seed = bundle.config.seed;
        let mut i0 = Vec::with_capacity(n_points);
        let mut i1 = Vec::with_capacity(n_points);
        let mut i2 = Vec::with_capacity(n_points);
        let (mut c1, mut c2) = (0.0, 0.0);
        for k in 0..n_points {
            if k > 0 {
                let (_, _, dxi_v) = self.model.sample(&RngStream::new(seed, id, (k - 1) as u64));
                let f = kernel.apply(bundle.x_at(k - 1)[i] - bundle.mu_hat[k - 1]);
                c1 = self.decay * c1 - dxi_v / self.beta;
                c2 = self.decay * c2 - self.a * f / self.beta;
            }
            i0.push(v0 * one_minus_exp(self.beta * bundle.grid[k]) / self.beta);
            i1.push(c1);
            i2.push(c2);
        }
        [i0, i1, i2]
    }
}

pub fn i_terms(bundle: &PathBundle) -> Result<ITerms> {
    let ctx = ITermContext::new(bundle)?;
    let sup_sq = |p: &[f64]| p.iter().fold(0.0f64, |m, v| m.max(v * v));
    let rows: Vec<[f64; 4]> = (0..bundle.n_particles())
        .into_par_iter()
        .map(|i| {
            let [i0, i1, i2] = ctx.paths(bundle, i);
            let last = i1[i1.len() - 1];
            [sup_sq(&i0), sup_sq(&i1), sup_sq(&i2), last * last]
        })
        .collect();
    Ok(ITerms {
        i0_sup_sq: rows.iter().map(|r| r[0]).collect(),
        i1_sup_sq: rows.iter().map(|r| r[1]).collect(),
        i2_sup_sq: rows.iter().map(|r| r[2]).collect(),
        i1_final_sq: rows.iter().map(|r| r[3]).collect(),
    })
}

/// One validation record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub beta: f64,
    pub lhs: f64,
    pub lhs_halfwidth: f64,
    pub rhs: f64,
    pub passes: bool,
    /// The inequality being checked, in words.
    pub relation: &'static str,
}

impl BoundCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// Monte-Carlo check: `lhs ≤ rhs + tol·halfwidth`.
    fn monte_carlo(name: &str, beta: f64, est: &ErrorEstimate, rhs: f64, tol: f64, relation: &'static str) -> Self {
        Self {
            name: name.to_string(),
            beta,
            lhs: est.mean,
            lhs_halfwidth: est.confidence_halfwidth_95,
            rhs,
            passes: est.mean <= rhs + tol * est.confidence_halfwidth_95,
            relation,
        }
    }
}

pub const REL_LIPSCHITZ: &str = "|K(a)-K(b)| <= kappa |a-b|";
pub const REL_I0: &str = "E sup|I0|^2 <= 1/beta^2";
pub const REL_I1: &str = "E|I1(T)|^2 <= 1/(2 beta)";
pub const REL_SUP_MOMENT: &str = "sup_beta E sup|x|^2 <= H(T)";
pub const REL_I2: &str = "E sup|I2|^2 <= (kappa^2/beta) T H(T) e^(theta T^2)";
pub const REL_I2_SHARP: &str = "E sup|I2|^2 <= (kappa^2/beta) T H(T)";
pub const REL_I_SUM: &str = "sum_i E sup|I_i|^2 <= Lambda(T)/beta";
pub const REL_STRONG_ERROR: &str = "E sup|x-y|^2 <= Lambda(T) e^(D T^2)/beta";
pub const REL_STRONG_ERROR_SHARP: &str = "E sup|x-y|^2 <= Lambda_sharp(T) e^(D T)/beta";

/// CSV `name, lhs, rhs, margin, passes, paper_eq`. Names carry `@beta=…`;
/// the last column holds the inequality checked.
pub fn write_validations_csv(checks: &[BoundCheck], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "lhs", "rhs", "margin", "passes", "paper_eq"])?;
    for c in checks {
        w.serialize((format!("{}@beta={}", c.name, c.beta), c.lhs, c.rhs, c.margin(), c.passes, c.relation))?;
    }
    w.flush()?;
    Ok(())
}

/// `E sup|I₂|²` against `(κ²/β) T H e^{θT²}`; passes within 3 halfwidths.
pub fn validate_i2(bundle: &PathBundle, ledger: &BoundLedger) -> Result<BoundCheck> {
    let terms = i_terms(bundle)?;
    let beta = bundle.config.beta;
    let est = estimate_error(&terms.i2_sup_sq)?;
    Ok(BoundCheck::monte_carlo("i2_sup_moment", beta, &est, ledger.i2_bound(beta).value, 3.0, REL_I2))
}

/// `E sup_t |x_t|²` against `H(T)`; requires `β > 1`.
pub fn validate_sup_moment(bundle: &PathBundle, ledger: &BoundLedger) -> Result<BoundCheck> {
    if bundle.system != System::SecondOrder {
        return Err(Error::Contract("sup-moment check needs a second-order bundle".into()));
    }
    let beta = bundle.config.beta;
    if !(beta > 1.0) {
        return Err(param("beta", format!("uniform sup-moment bound is stated for beta > 1, got {beta}")));
    }
    let n = bundle.n_particles();
    let mut sup = vec![0.0f64; n];
    for k in 0..bundle.n_points() {
        for (s, x) in sup.iter_mut().zip(bundle.x_at(k)) {
            *s = s.max(x * x);
        }
    }
    let est = estimate_error(&sup)?;
    Ok(BoundCheck::monte_carlo("x_sup_moment", beta, &est, ledger.h.value(), 0.0, REL_SUP_MOMENT))
}

/// Every check for one coupled run, in a fixed order.
pub fn validate_all(run: &CoupledRun, ledger: &BoundLedger) -> Result<Vec<BoundCheck>> {
    let config = &run.config;
    let beta = config.beta;
    let mut out = Vec::new();

    let lip = check_lipschitz(&config.kernel, -10.0, 10.0, 10_000)?;
    out.push(BoundCheck {
        name: "kernel_lipschitz".into(),
        beta,
        lhs: lip.max_observed_ratio,
        lhs_halfwidth: 0.0,
        rhs: config.kernel.kappa(),
        passes: lip.passes,
        relation: REL_LIPSCHITZ,
    });

    let terms = i_terms(&run.x_bundle)?;
    let i0 = estimate_error(&terms.i0_sup_sq)?;
    let i2 = estimate_error(&terms.i2_sup_sq)?;

    let mut i0_check = BoundCheck::monte_carlo("i0_sup_moment", beta, &i0, beta.powi(-2), 3.0, REL_I0);
    if config.init.velocity_second_moment() > 1.0 {
        i0_check.name.push_str("[E|v0|^2>1]");
    }
    out.push(i0_check);

    let i1_t = estimate_error(&terms.i1_final_sq)?;
    out.push(BoundCheck::monte_carlo("i1_second_moment", beta, &i1_t, 0.5 / beta, 3.0, REL_I1));

    if beta > 1.0 {
        out.push(validate_sup_moment(&run.x_bundle, ledger)?);
    }

    out.push(BoundCheck::monte_carlo("i2_sup_moment", beta, &i2, ledger.i2_bound(beta).value, 3.0, REL_I2));
    out.push(BoundCheck::monte_carlo(
        "i2_sup_moment_sharp",
        beta,
        &i2,
        ledger.i2_bound_sharp(beta).value,
        3.0,
        REL_I2_SHARP,
    ));

    let sums: Vec<f64> = (0..terms.i0_sup_sq.len())
        .map(|i| terms.i0_sup_sq[i] + terms.i1_sup_sq[i] + terms.i2_sup_sq[i])
        .collect();
    let sum_est = estimate_error(&sums)?;
    out.push(BoundCheck::monte_carlo("i_terms_sum", beta, &sum_est, ledger.i_sum_bound(beta).value, 3.0, REL_I_SUM));

    let err = run.estimate()?;
    out.push(BoundCheck::monte_carlo("strong_error", beta, &err, ledger.strong_error_bound(beta).value, 3.0, REL_STRONG_ERROR));
    out.push(BoundCheck::monte_carlo(
        "strong_error_sharp",
        beta,
        &err,
        ledger.strong_error_bound_sharp(beta).value,
        3.0,
        REL_STRONG_ERROR_SHARP,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::coupled_simulate;
    use crate::ensemble::{simulate, InitialLaw, SimConfig};
    use crate::kernels::DriftKernel;
    use crate::noise::brownian_increments;

    #[test]
    fn kappa_zero_ledger() {
        let l = compute_ledger(1.0, 0.0, 1.0).unwrap();
        assert_eq!(l.h0, 95.0);
        assert_eq!(l.theta, 0.0);
        assert_eq!(l.d, 0.0);
        assert!((l.h.value() - 95.0).abs() < 1e-12);
        assert!((l.lambda.value() - 7.5).abs() < 1e-13);
        assert!((l.strong_error_bound(3.0).value - 2.5).abs() < 1e-13);
        for (m, t) in [(0.5, 2.0), (10.0, 0.1)] {
            let l = compute_ledger(m, 0.0, t).unwrap();
            assert!((l.strong_error_bound(10.0).value - 0.75).abs() < 1e-14);
            assert_eq!(l.i2_bound(10.0).value, 0.0);
        }
    }

    #[test]
    fn ledger_rejects_bad_inputs() {
        assert!(compute_ledger(0.0, 1.0, 1.0).is_err());
        assert!(compute_ledger(1.0, -1.0, 1.0).is_err());
        assert!(compute_ledger(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn unit_kappa_ledger_in_log_space() {
        let l = compute_ledger(1.0, 1.0, 1.0).unwrap();
        assert_eq!(l.theta, 20.0);
        assert_eq!(l.d, 10.0);
        assert!((l.h.ln - (95f64.ln() + 20.0)).abs() < 1e-13);
        let ln_lambda = 5f64.ln() + (95.0 * 40f64.exp() + 1.5).ln();
        assert!((l.lambda.ln - ln_lambda).abs() < 1e-13);
        let b = l.strong_error_bound(100.0);
        assert!(!b.overflow);
        assert!((b.ln - (ln_lambda + 10.0 - 100f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log_space_matches_high_precision() {
        // (M, kappa, T, beta) -> ln of H, bound, bound_sharp, i2 bound, i2 bound sharp (40-digit evaluation)
        let cases = [
            ((2.0, 0.5, 1.5, 10.0), [16.400397236471414447, 34.413920802903666143, 20.35142110451819374, 24.366982890465642527, 13.116982890465642527]),
            ((1.0, 1.0, 3.0, 1000.0), [186.22455842927535983, 632.02485335139543284, 272.02485335139543284, 360.41541543896133246, 180.41541543896133246]),
            ((0.25, 3.0, 1.0, 7.0), [184.51360299246260088, 456.37435533317760734, 276.37435533317760734, 364.76491742074350696, 184.76491742074350696]),
            ((3.0, 0.1, 2.0, 50.0), [6.398421958998374847, 1.8383800410284244821, 0.70143119463252384601, -0.62562405185791707038, -1.4256240518579171592]),
        ];
        for ((m, k, t, beta), want) in cases {
            let l = compute_ledger(m, k, t).unwrap();
            let got = [
                l.h.ln,
                l.strong_error_bound(beta).ln,
                l.strong_error_bound_sharp(beta).ln,
                l.i2_bound(beta).ln,
                l.i2_bound_sharp(beta).ln,
            ];
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-12, "{m} {k} {t}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn huge_constants_flag_overflow() {
        let l = compute_ledger(1.0, 3.0, 3.0).unwrap();
        let b = l.strong_error_bound(10.0);
        assert!(b.overflow);
        assert!(b.value.is_infinite());
        assert!(b.ln.is_finite());
    }

    #[test]
    fn i0_moment_values() {
        let m = i0_moment(2.0, 1e3, 1, 1.0).unwrap();
        assert!((m.value - 0.5).abs() < 1e-15);
        assert_eq!(m.bound, 0.5);
        assert_eq!(i0_moment(2.0, 0.0, 3, 1.0).unwrap().value, 0.0);
        let m = i0_moment(4.0, 0.5, 2, 1.0).unwrap();
        let expected = (1.0 - (-2f64).exp()).powi(2) / 16.0;
        assert!((m.value - expected).abs() < 1e-16);
        assert!((m.value - 0.046_728).abs() < 1e-6);
        assert!(i0_moment(4.0, 0.5, 2, 2.0).unwrap().needs_unit_velocity_moment);
    }

    #[test]
    fn i1_moment_values() {
        assert!((i1_second_moment(1.0, 1e3).unwrap().value - 0.5).abs() < 1e-15);
        assert_eq!(i1_second_moment(5.0, 0.0).unwrap().value, 0.0);
        let m = i1_second_moment(10.0, 0.05).unwrap();
        assert!((m.value - (1.0 - (-1f64).exp()) / 20.0).abs() < 1e-16);
        assert!((m.value - 0.031_606_0).abs() < 1e-7);
    }

    fn cfg(beta: f64, kernel: DriftKernel, n_steps: usize, n: usize) -> SimConfig {
        SimConfig {
            beta,
            kernel,
            t_end: 1.0,
            n_steps,
            n_particles: n,
            init: InitialLaw::gaussian(0.1, 0.4, 0.3, 0.5, 1.0),
            seed: 5,
        }
    }

    #[test]
    fn variation_of_constants_identity_holds_pathwise() {
        // x_t = x₀ + I₀ + I₁ + I₂ + ∫K ds + B_t on the discrete grid
        let c = cfg(40.0, DriftKernel::scaled_tanh(1.0, 2.0), 64, 8);
        let b = simulate(&c, System::SecondOrder).unwrap();
        let h = c.h();
        for i in 0..c.n_particles {
            let [i0, i1, i2] = i_term_paths(&b, i).unwrap();
            let db = brownian_increments(RngStream::new(c.seed, i as u64, 0), h, c.n_steps);
            let x0 = b.x_at(0)[i];
            let (mut drift, mut bm) = (0.0, 0.0);
            for k in 0..b.n_points() {
                if k > 0 {
                    drift += c.kernel.apply(b.x_at(k - 1)[i] - b.mu_hat[k - 1]) * h;
                    bm += db[k - 1];
                }
                let rhs = x0 + i0[k] + i1[k] + i2[k] + drift + bm;
                assert!((b.x_at(k)[i] - rhs).abs() < 1e-12, "particle {i} step {k}");
            }
        }
    }

    #[test]
    fn velocity_identity_holds_pathwise() {
        // v_t = e^{-βt} v₀ - β(I₁ + I₂)
        let c = cfg(25.0, DriftKernel::linear(1.0), 40, 5);
        let b = simulate(&c, System::SecondOrder).unwrap();
        for i in 0..5 {
            let [_, i1, i2] = i_term_paths(&b, i).unwrap();
            let v0 = b.v_at(0).unwrap()[i];
            for k in 0..b.n_points() {
                let v = b.v_at(k).unwrap()[i];
                let rhs = (-c.beta * b.grid[k]).exp() * v0 - c.beta * (i1[k] + i2[k]);
                assert!((v - rhs).abs() < 1e-11 * c.beta);
            }
        }
    }

    #[test]
    fn zero_kernel_has_no_i2() {
        let c = cfg(50.0, DriftKernel::zero(), 32, 20);
        let b = simulate(&c, System::SecondOrder).unwrap();
        let l = compute_ledger(1.0, 0.0, 1.0).unwrap();
        let r = validate_i2(&b, &l).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.passes);
    }

    #[test]
    fn sup_moment_needs_beta_above_one() {
        let c = cfg(1.0, DriftKernel::zero(), 8, 4);
        let b = simulate(&c, System::SecondOrder).unwrap();
        let l = compute_ledger(1.0, 0.0, 1.0).unwrap();
        assert!(validate_sup_moment(&b, &l).is_err());
    }

    #[test]
    fn deterministic_path_sup_moment_is_m() {
        let mut c = cfg(10.0, DriftKernel::zero(), 4, 3);
        c.init = InitialLaw::point(1.0, 0.0);
        let mut b = simulate(&c, System::SecondOrder).unwrap();
        // freeze the path at x₀
        b.x.iter_mut().for_each(|x| *x = 1.0);
        let l = compute_ledger(1.0, 0.0, 1.0).unwrap();
        let r = validate_sup_moment(&b, &l).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert!(r.passes);
    }

    #[test]
    fn limit_bundle_rejected_for_i_terms() {
        let c = cfg(10.0, DriftKernel::zero(), 4, 3);
        let b = simulate(&c, System::Limit).unwrap();
        assert!(matches!(i_terms(&b), Err(Error::Contract(_))));
    }

    #[test]
    fn validate_all_on_zero_kernel_passes() {
        let c = cfg(100.0, DriftKernel::zero(), 256, 400);
        let run = coupled_simulate(&c).unwrap();
        let l = compute_ledger(c.init.m, 0.0, 1.0).unwrap();
        let checks = validate_all(&run, &l).unwrap();
        for ch in &checks {
            assert!(ch.passes, "{ch:?}");
        }
        assert_eq!(checks.len(), 9);
    }
}
