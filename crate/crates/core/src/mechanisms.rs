//! Canonical privacy primitives and their audit annotations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::accountant::calibrate_gaussian_sigma;
use crate::rng::{DpRng, RngError};
use crate::value::Value;

pub const ENSURE_EQUALITY: &str = "ensure_equality";
pub const BUDGET_REPORT: &str = "budget_report";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    L1,
    L2,
    Linf,
    Hamming,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Analytic privacy-loss model a trusted primitive is accounted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountantKind {
    Laplace,
    Gaussian,
    Exponential,
}

/// Annotation attached to a primitive. The declared sensitivity itself
/// travels in [`MechanismParams::sensitivity`] of each call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSpec {
    pub kind: String,
    pub input_role: String,
    pub sensitivity_role: String,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accountant: Option<AccountantKind>,
}

impl AuditSpec {
    pub fn new(kind: impl Into<String>, metric: Metric, accountant: Option<AccountantKind>) -> Self {
        Self {
            kind: kind.into(),
            input_role: "x".into(),
            sensitivity_role: "sensitivity".into(),
            metric,
            accountant,
        }
    }

    pub fn is_trusted(&self) -> bool {
        self.accountant.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    #[serde(with = "crate::float_repr")]
    pub epsilon: f64,
    #[serde(with = "crate::float_repr")]
    pub delta: f64,
    #[serde(with = "crate::float_repr")]
    pub sensitivity: f64,
    /// Explicit Laplace scale; `sensitivity / epsilon` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::float_repr::opt")]
    pub scale: Option<f64>,
    /// Explicit Gaussian standard deviation; calibrated from `(epsilon, delta, sensitivity)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::float_repr::opt")]
    pub sigma: Option<f64>,
}

impl MechanismParams {
    pub fn new(epsilon: f64, delta: f64, sensitivity: f64) -> Result<Self, MechanismError> {
        let p = Self { epsilon, delta, sensitivity, scale: None, sigma: None };
        p.validate()?;
        Ok(p)
    }

    pub fn pure(epsilon: f64, sensitivity: f64) -> Result<Self, MechanismError> {
        Self::new(epsilon, 0.0, sensitivity)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        let bad = |what: &str, v: f64| Err(MechanismError::InvalidParams(format!("{what} = {v}")));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon);
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad("delta", self.delta);
        }
        if !(self.sensitivity >= 0.0 && self.sensitivity.is_finite()) {
            return bad("sensitivity", self.sensitivity);
        }
        for (name, v) in [("scale", self.scale), ("sigma", self.sigma)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(name, v);
                }
            }
        }
        Ok(())
    }

    /// Laplace scale implied by the declared budget.
    pub fn implied_laplace_scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    pub fn laplace_scale(&self) -> f64 {
        self.scale.unwrap_or_else(|| self.implied_laplace_scale())
    }

    /// Gaussian sigma implied by the declared budget.
    pub fn implied_gaussian_sigma(&self) -> Result<f64, MechanismError> {
        if self.sensitivity == 0.0 {
            return Ok(0.0);
        }
        calibrate_gaussian_sigma(self.epsilon, self.delta, self.sensitivity)
            .map_err(|e| MechanismError::InvalidParams(e.to_string()))
    }

    pub fn gaussian_sigma(&self) -> Result<f64, MechanismError> {
        match self.sigma {
            Some(s) => Ok(s),
            None => self.implied_gaussian_sigma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MechanismError {
    #[error("input outside the primitive's domain: {0}")]
    InputDomain(String),
    #[error("invalid mechanism parameters: {0}")]
    InvalidParams(String),
    #[error("input has the wrong shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Rng(#[from] RngError),
}

/// A privacy primitive that can be recorded, replayed and sampled.
pub trait Primitive: Send + Sync {
    fn spec(&self) -> &AuditSpec;

    /// Guard run before any draw is consumed.
    fn check_input(&self, input: &Value) -> Result<(), MechanismError>;

    fn invoke(&self, input: &Value, params: &MechanismParams, rng: &mut DpRng) -> Result<Value, MechanismError>;

    /// Noise scale actually applied for `params` (Laplace `b` or Gaussian `sigma`).
    fn realized_scale(&self, _params: &MechanismParams) -> Option<f64> {
        None
    }
}

fn numeric_input(input: &Value) -> Result<Vec<f64>, MechanismError> {
    match input {
        Value::Real(x) => Ok(vec![*x]),
        Value::Vector(v) => Ok(v.clone()),
        other => Err(MechanismError::Shape(format!("expected real or vector, got {other:?}"))),
    }
}

fn reshape_like(input: &Value, out: Vec<f64>) -> Value {
    match input {
        Value::Real(_) => Value::Real(out[0]),
        _ => Value::Vector(out),
    }
}

fn guard_finite(input: &Value) -> Result<(), MechanismError> {
    if input.is_finite() {
        Ok(())
    } else {
        Err(MechanismError::InputDomain(format!("non-finite entry in {input:?}")))
    }
}

/// One draw per coordinate; a zero scale consumes the draw and adds nothing.
fn add_noise(
    xs: &mut [f64],
    scale: f64,
    zero_noise: bool,
    rng: &mut DpRng,
    draw: fn(&mut DpRng, f64) -> Result<f64, RngError>,
) -> Result<(), MechanismError> {
    for x in xs {
        if zero_noise || scale == 0.0 {
            rng.skip_draw();
        } else {
            *x += draw(rng, scale)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LaplaceMechanism {
    spec: AuditSpec,
    guarded: bool,
    zero_noise: bool,
    folded: bool,
}

impl Default for LaplaceMechanism {
    fn default() -> Self {
        Self::new()
    }
}

impl LaplaceMechanism {
    pub fn new() -> Self {
        Self {
            spec: AuditSpec::new("LM", Metric::L1, Some(AccountantKind::Laplace)),
            guarded: true,
            zero_noise: false,
            folded: false,
        }
    }

    pub fn with_kind(mut self, kind: impl Into<String>) -> Self {
        self.spec.kind = kind.into();
        self
    }

    /// Drops the analytic accountant, so the primitive must be audited by sampling.
    pub fn untrusted(mut self) -> Self {
        self.spec.accountant = None;
        self
    }

    pub fn unguarded(mut self) -> Self {
        self.guarded = false;
        self
    }

    /// Consumes draws but adds no noise.
    pub fn zero_noise(mut self) -> Self {
        self.zero_noise = true;
        self
    }

    /// Releases `|x + noise|` coordinate-wise.
    pub fn folded(mut self) -> Self {
        self.folded = true;
        self
    }
}

impl Primitive for LaplaceMechanism {
    fn spec(&self) -> &AuditSpec {
        &self.spec
    }

    fn check_input(&self, input: &Value) -> Result<(), MechanismError> {
        numeric_input(input)?;
        if self.guarded {
            guard_finite(input)?;
        }
        Ok(())
    }

    fn invoke(&self, input: &Value, params: &MechanismParams, rng: &mut DpRng) -> Result<Value, MechanismError> {
        self.check_input(input)?;
        params.validate()?;
        let mut xs = numeric_input(input)?;
        add_noise(&mut xs, params.laplace_scale(), self.zero_noise, rng, DpRng::laplace)?;
        if self.folded {
            xs.iter_mut().for_each(|x| *x = x.abs());
        }
        Ok(reshape_like(input, xs))
    }

    fn realized_scale(&self, params: &MechanismParams) -> Option<f64> {
        Some(params.laplace_scale())
    }
}

#[derive(Debug, Clone)]
pub struct GaussianMechanism {
    spec: AuditSpec,
    guarded: bool,
    zero_noise: bool,
}

impl Default for GaussianMechanism {
    fn default() -> Self {
        Self::new()
    }
}

impl GaussianMechanism {
    pub fn new() -> Self {
        Self {
            spec: AuditSpec::new("GM", Metric::L2, Some(AccountantKind::Gaussian)),
            guarded: true,
            zero_noise: false,
        }
    }

    pub fn with_kind(mut self, kind: impl Into<String>) -> Self {
        self.spec.kind = kind.into();
        self
    }

    pub fn untrusted(mut self) -> Self {
        self.spec.accountant = None;
        self
    }

    pub fn unguarded(mut self) -> Self {
        self.guarded = false;
        self
    }

    pub fn zero_noise(mut self) -> Self {
        self.zero_noise = true;
        self
    }
}

impl Primitive for GaussianMechanism {
    fn spec(&self) -> &AuditSpec {
        &self.spec
    }

    fn check_input(&self, input: &Value) -> Result<(), MechanismError> {
        numeric_input(input)?;
        if self.guarded {
            guard_finite(input)?;
        }
        Ok(())
    }

    fn invoke(&self, input: &Value, params: &MechanismParams, rng: &mut DpRng) -> Result<Value, MechanismError> {
        self.check_input(input)?;
        params.validate()?;
        let sigma = params.gaussian_sigma()?;
        let mut xs = numeric_input(input)?;
        add_noise(&mut xs, sigma, self.zero_noise, rng, DpRng::gaussian)?;
        Ok(reshape_like(input, xs))
    }

    fn realized_scale(&self, params: &MechanismParams) -> Option<f64> {
        params.gaussian_sigma().ok()
    }
}

#[derive(Debug, Clone)]
pub struct ExponentialMechanism {
    spec: AuditSpec,
    guarded: bool,
}

impl Default for ExponentialMechanism {
    fn default() -> Self {
        Self::new()
    }
}

impl ExponentialMechanism {
    pub fn new() -> Self {
        Self {
            spec: AuditSpec::new("EM", Metric::Linf, Some(AccountantKind::Exponential)),
            guarded: true,
        }
    }

    pub fn with_kind(mut self, kind: impl Into<String>) -> Self {
        self.spec.kind = kind.into();
        self
    }

    pub fn unguarded(mut self) -> Self {
        self.guarded = false;
        self
    }
}

/// Selection probabilities `exp(eps * s_i / (2 * sens))`, normalised after max-subtraction.
pub fn exponential_probabilities(scores: &[f64], epsilon: f64, sensitivity: f64) -> Vec<f64> {
    let logits: Vec<f64> = scores.iter().map(|s| epsilon * s / (2.0 * sensitivity)).collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

impl Primitive for ExponentialMechanism {
    fn spec(&self) -> &AuditSpec {
        &self.spec
    }

    fn check_input(&self, input: &Value) -> Result<(), MechanismError> {
        match input {
            Value::Vector(v) if !v.is_empty() => {}
            other => return Err(MechanismError::Shape(format!("expected non-empty score vector, got {other:?}"))),
        }
        if self.guarded {
            guard_finite(input)?;
        }
        Ok(())
    }

    fn invoke(&self, input: &Value, params: &MechanismParams, rng: &mut DpRng) -> Result<Value, MechanismError> {
        self.check_input(input)?;
        params.validate()?;
        if params.sensitivity <= 0.0 {
            return Err(MechanismError::InvalidParams("exponential mechanism needs sensitivity > 0".into()));
        }
        let scores = input.as_vector().expect("checked above");
        let probs = exponential_probabilities(scores, params.epsilon, params.sensitivity);
        Ok(Value::Index(rng.categorical(&probs)?))
    }
}

/// Primitives available to a pipeline, keyed by kind.
#[derive(Clone, Default)]
pub struct Registry {
    prims: BTreeMap<String, Arc<dyn Primitive>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, prim: impl Primitive + 'static) -> Self {
        self.insert(Arc::new(prim));
        self
    }

    pub fn insert(&mut self, prim: Arc<dyn Primitive>) {
        self.prims.insert(prim.spec().kind.clone(), prim);
    }

    pub fn get(&self, kind: &str) -> Option<&Arc<dyn Primitive>> {
        self.prims.get(kind)
    }

    pub fn specs(&self) -> BTreeMap<String, AuditSpec> {
        self.prims.iter().map(|(k, p)| (k.clone(), p.spec().clone())).collect()
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.prims.keys()).finish()
    }
}
