//! Mean-field drift kernels.
//!
//! A kernel is a one-dimensional force `K` applied to the centred position
//! `x - E[x]`, together with a *declared* Lipschitz constant. Every bound in
//! [`crate::bounds`] is a function of the declared constant, never of an
//! inferred one; [`check_lipschitz`] is only a guard.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `K ≡ 0`.
    Zero,
    /// `K(z) = -λ z`.
    Linear { lambda: f64 },
    /// `K(z) = a tanh(b z)`.
    ScaledTanh { a: f64, b: f64 },
    /// `K(z) = clamp(-λ z, -cap, cap)`.
    Clamp { lambda: f64, cap: f64 },
}

impl KernelKind {
    fn name(&self) -> &'static str {
        match self {
            KernelKind::Zero => "zero",
            KernelKind::Linear { .. } => "linear",
            KernelKind::ScaledTanh { .. } => "tanh",
            KernelKind::Clamp { .. } => "clamp",
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            KernelKind::Zero => vec![],
            KernelKind::Linear { lambda } => vec![lambda],
            KernelKind::ScaledTanh { a, b } => vec![a, b],
            KernelKind::Clamp { lambda, cap } => vec![lambda, cap],
        }
    }

    /// Exact Lipschitz constant of the built-in form.
    fn natural_kappa(&self) -> f64 {
        match *self {
            KernelKind::Zero => 0.0,
            KernelKind::Linear { lambda } => lambda.abs(),
            KernelKind::ScaledTanh { a, b } => (a * b).abs(),
            KernelKind::Clamp { lambda, .. } => lambda.abs(),
        }
    }
}

/// Drift kernel with its declared Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct DriftKernel {
    kind: KernelKind,
    kappa: f64,
}

/// On-disk form of a kernel: `{ name, params, kappa }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl DriftKernel {
    pub fn zero() -> Self {
        Self::from_kind(KernelKind::Zero)
    }

    pub fn linear(lambda: f64) -> Self {
        Self::from_kind(KernelKind::Linear { lambda })
    }

    pub fn scaled_tanh(a: f64, b: f64) -> Self {
        Self::from_kind(KernelKind::ScaledTanh { a, b })
    }

    pub fn clamp(lambda: f64, cap: f64) -> Self {
        Self::from_kind(KernelKind::Clamp { lambda, cap })
    }

    fn from_kind(kind: KernelKind) -> Self {
        Self {
            kappa: kind.natural_kappa(),
            kind,
        }
    }

    /// Replace the declared constant. Used for negative controls where
    /// the declaration is deliberately wrong.
    pub fn with_declared_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(param("kappa", format!("must be finite and >= 0, got {kappa}")));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, KernelKind::Zero)
    }

    /// `K(z)` without the finiteness check; the integrators check state
    /// finiteness once per step instead.
    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self.kind {
            KernelKind::Zero => 0.0,
            KernelKind::Linear { lambda } => -lambda * z,
            KernelKind::ScaledTanh { a, b } => a * (b * z).tanh(),
            KernelKind::Clamp { lambda, cap } => (-lambda * z).clamp(-cap, cap),
        }
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::Domain(z));
        }
        Ok(self.apply(z))
    }
}

impl TryFrom<KernelSpec> for DriftKernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        let p = &spec.params;
        let want = |n: usize| -> Result<()> {
            if p.len() != n {
                return Err(Error::Config {
                    field: "kernel.params".into(),
                    reason: format!("kernel `{}` takes {n} parameter(s), got {}", spec.name, p.len()),
                });
            }
            if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config {
                    field: "kernel.params".into(),
                    reason: format!("non-finite parameter {bad}"),
                });
            }
            Ok(())
        };
        let kernel = match spec.name.as_str() {
            "zero" => {
                want(0)?;
                DriftKernel::zero()
            }
            "linear" => {
                want(1)?;
                DriftKernel::linear(p[0])
            }
            "tanh" => {
                want(2)?;
                DriftKernel::scaled_tanh(p[0], p[1])
            }
            "clamp" => {
                want(2)?;
                if p[1] < 0.0 {
                    return Err(Error::Config {
                        field: "kernel.params".into(),
                        reason: "clamp cap must be >= 0".into(),
                    });
                }
                DriftKernel::clamp(p[0], p[1])
            }
            other => {
                return Err(Error::Config {
                    field: "kernel.name".into(),
                    reason: format!("unknown kernel `{other}` (expected zero, linear, tanh, clamp)"),
                })
            }
        };
        match spec.kappa {
            Some(k) => kernel.with_declared_kappa(k).map_err(|e| Error::Config {
                field: "kernel.kappa".into(),
                reason: e.to_string(),
            }),
            None => Ok(kernel),
        }
    }
}

impl From<DriftKernel> for KernelSpec {
    fn from(k: DriftKernel) -> Self {
        KernelSpec {
            name: k.name().to_string(),
            params: k.kind.params(),
            kappa: Some(k.kappa),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub max_observed_ratio: f64,
    pub passes: bool,
}

/// Largest difference quotient of `kernel` over a uniform grid of
/// `n_samples` points on `[lo, hi]`, compared against the declared κ.
///
/// On a sorted grid the maximum over all pairs equals the maximum over
/// adjacent pairs (a chord slope is a weighted mean of the adjacent slopes it
/// spans), so this is O(n).
pub fn check_lipschitz(kernel: &DriftKernel, lo: f64, hi: f64, n_samples: usize) -> Result<LipschitzReport> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(param("range", format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if n_samples < 2 {
        return Err(param("n_samples", "need at least 2 samples"));
    }
    let step = (hi - lo) / (n_samples - 1) as f64;
    let point = |k: usize| if k + 1 == n_samples { hi } else { lo + k as f64 * step };
    let mut prev_z = point(0);
    let mut prev_k = kernel.apply(prev_z);
    let mut ratio: f64 = 0.0;
    for k in 1..n_samples {
        let z = point(k);
        let kz = kernel.apply(z);
        ratio = ratio.max((kz - prev_k).abs() / (z - prev_z));
        prev_z = z;
        prev_k = kz;
    }
    // a few ulps of slack so that an exactly linear kernel is not rejected
    let passes = ratio <= kernel.kappa * (1.0 + 1e-12);
    Ok(LipschitzReport {
        max_observed_ratio: ratio,
        passes,
    })
}
