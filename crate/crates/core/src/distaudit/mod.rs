//! Distributional auditing: a privacy-loss estimate for the whole pipeline.
//!
//! Every aligned primitive call of a record/replay trace pair contributes a
//! PLD. Calls with a trusted accountant use the exact loss distribution
//! between the two recorded inputs at the realised noise scale; untrusted
//! calls are sampled on both inputs and turned into a pessimistic PLD via an
//! empirical trade-off curve. The composed PLD gives `eps_hat` at `delta`.

pub mod blackbox;
pub mod scoring;
pub mod tradeoff;

use serde::{Deserialize, Serialize};

use crate::accountant::{
    analytic_pld_gaussian, analytic_pld_laplace, compose, eps_grid, exponential_pld, pld_from_profile, AccountantError,
    DiscretePld, PrivacyProfile, DEFAULT_GRID_STEP,
};
use crate::exec::{map_indexed, Execution};
use crate::mechanisms::{AccountantKind, MechanismError, MechanismParams, Primitive, Registry};
use crate::recorder::Trace;
use crate::rng::DpRng;
use crate::validator::{Violation, ViolationKind};
use crate::value::Value;

pub use blackbox::{blackbox_audit, BlackboxConfig, BlackboxResult};
pub use scoring::score_samples;
pub use tradeoff::{estimate_tradeoff_scores, tradeoff_to_profile, EstimatorConfig, TradeoffCurve, MIN_SAMPLES};

/// Smallest sample count accepted by [`distributional_audit`].
pub const MIN_AUDIT_SAMPLES: usize = 1000;
/// Slack on `eps_hat <= eps_claimed`.
pub const PASS_TOLERANCE: f64 = 1e-9;
/// Extra slack when any call's PLD was estimated from samples; the estimator overshoots by at most this much at 10^5 samples.
pub const DEFAULT_EMPIRICAL_SLACK: f64 = 0.15;
/// Coordinates beyond which a Laplace vector is bounded by its L1 shift instead of per-coordinate composition.
const MAX_COMPOSED_COORDINATES: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum DistAuditError {
    #[error("trace pair stopped early ({0}); no distributional audit possible")]
    Stopped(String),
    #[error("traces have different lengths: {0} vs {1}")]
    Length(usize, usize),
    #[error("call {index}: record ran {record} but replay ran {replay}")]
    KindMismatch { index: usize, record: String, replay: String },
    #[error("no primitive registered as {0}")]
    UnknownKind(String),
    #[error("call {0} has no mechanism parameters")]
    MissingParams(usize),
    #[error("need at least {need} samples per side, got {got}")]
    InsufficientData { got: usize, need: usize },
    #[error("scoring failed: {0}")]
    Scoring(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pipeline run failed: {0}")]
    Pipeline(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Accountant(#[from] AccountantError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistAuditConfig {
    pub samples: usize,
    pub delta: f64,
    pub eps_claimed: f64,
    pub seed: u64,
    pub grid_step: f64,
    pub estimator: EstimatorConfig,
    /// Sample trusted calls too instead of using their analytic PLD.
    pub empirical_for_trusted: bool,
    /// A reported budget more than this many times `eps_hat` counts as an accounting discrepancy.
    pub discrepancy_factor: f64,
    /// Added to the pass threshold when any PLD is empirical.
    pub empirical_slack: f64,
    #[serde(skip, default)]
    pub exec: Execution,
}

impl DistAuditConfig {
    pub fn new(samples: usize, delta: f64, eps_claimed: f64, seed: u64) -> Self {
        Self {
            samples,
            delta,
            eps_claimed,
            seed,
            grid_step: DEFAULT_GRID_STEP,
            estimator: EstimatorConfig::default(),
            empirical_for_trusted: false,
            discrepancy_factor: 10.0,
            empirical_slack: DEFAULT_EMPIRICAL_SLACK,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PldSource {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallPld {
    pub index: usize,
    pub kind: String,
    pub source: PldSource,
    #[serde(with = "crate::float_repr")]
    pub eps_at_delta: f64,
    #[serde(skip)]
    pub pld: Option<DiscretePld>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    #[serde(with = "crate::float_repr")]
    pub eps_hat: f64,
    pub eps_claimed: f64,
    pub delta: f64,
    pub pass: bool,
    pub per_call: Vec<CallPld>,
    pub findings: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_budget: Option<(f64, f64)>,
}

/// `+inf` when no finite epsilon exists at `delta`.
fn eps_or_inf(pld: &DiscretePld, delta: f64) -> Result<f64, AccountantError> {
    match pld.epsilon_at(delta) {
        Ok(e) => Ok(e),
        Err(AccountantError::NoFiniteEpsilon { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `n` runs of `prim` on a fixed input, replicate `r` using child generator `(seed, stream, r)`.
pub fn sample_outputs(
    prim: &dyn Primitive,
    input: &Value,
    params: &MechanismParams,
    n: usize,
    seed: u64,
    stream: u64,
    exec: Execution,
) -> Result<Vec<Value>, MechanismError> {
    // Sigma is resolved once for all replicates; non-Gaussian primitives ignore it.
    let mut params = params.clone();
    if params.sigma.is_none() && params.delta > 0.0 {
        params.sigma = params.implied_gaussian_sigma().ok();
    }
    map_indexed(n, exec, |r| {
        let mut rng = DpRng::child(seed, stream, r as u64);
        prim.invoke(input, &params, &mut rng)
    })
    .into_iter()
    .collect()
}

/// PLD dominating both orientations of an empirical trade-off between two sample sets.
pub fn empirical_pld_from_samples(
    sp: &[Value],
    sq: &[Value],
    samples: usize,
    grid_step: f64,
    estimator: &EstimatorConfig,
) -> Result<DiscretePld, DistAuditError> {
    let (fp, fq) = score_samples(sp, sq)?;
    let forward = estimate_tradeoff_scores(&fp, &fq, estimator)?;
    let backward = estimate_tradeoff_scores(&fq, &fp, estimator)?;
    let k_max = ((samples as f64).ln() / grid_step).ceil() as i64;
    let grid = eps_grid(-k_max, k_max, grid_step);
    let profile: PrivacyProfile = tradeoff_to_profile(&forward, &grid).pointwise_max(&tradeoff_to_profile(&backward, &grid))?;
    Ok(pld_from_profile(&profile, grid_step)?)
}

/// Samples `prim` on both inputs and estimates their PLD.
pub fn empirical_pld(
    prim: &dyn Primitive,
    q: &Value,
    q_prime: &Value,
    params: &MechanismParams,
    cfg: &DistAuditConfig,
    call_index: usize,
) -> Result<DiscretePld, DistAuditError> {
    if q == q_prime {
        return Ok(DiscretePld::identity(cfg.grid_step));
    }
    let stream = 2 * call_index as u64;
    let sp = sample_outputs(prim, q, params, cfg.samples, cfg.seed, stream, cfg.exec)?;
    let sq = sample_outputs(prim, q_prime, params, cfg.samples, cfg.seed, stream + 1, cfg.exec)?;
    empirical_pld_from_samples(&sp, &sq, cfg.samples, cfg.grid_step, &cfg.estimator)
}

fn shifts(q: &Value, q_prime: &Value) -> Result<Vec<f64>, DistAuditError> {
    match (q.numeric(), q_prime.numeric()) {
        (Some(a), Some(b)) if a.len() == b.len() => Ok(a
            .iter()
            .zip(&b)
            .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
            .map(|d| if d.is_nan() { f64::INFINITY } else { d })
            .collect()),
        _ => Err(DistAuditError::Scoring(format!("inputs {q:?} and {q_prime:?} are not comparable"))),
    }
}

/// Exact PLD of a trusted call between its two recorded inputs at the realised noise scale.
pub fn analytic_pld(
    accountant: AccountantKind,
    q: &Value,
    q_prime: &Value,
    params: &MechanismParams,
    grid_step: f64,
) -> Result<DiscretePld, DistAuditError> {
    let identity = || Ok(DiscretePld::identity(grid_step));
    let distinguishing = || Ok(DiscretePld::distinguishing(grid_step));
    match accountant {
        AccountantKind::Laplace => {
            let d: Vec<f64> = shifts(q, q_prime)?.into_iter().filter(|x| *x > 0.0).collect();
            let b = params.laplace_scale();
            if d.is_empty() {
                return identity();
            }
            if b == 0.0 || d.iter().any(|x| x.is_infinite()) {
                return distinguishing();
            }
            if d.len() > MAX_COMPOSED_COORDINATES {
                return Ok(analytic_pld_laplace(d.iter().sum(), b, grid_step)?);
            }
            let parts = d.iter().map(|&x| analytic_pld_laplace(x, b, grid_step)).collect::<Result<Vec<_>, _>>()?;
            Ok(compose(&parts)?)
        }
        AccountantKind::Gaussian => {
            let l2 = shifts(q, q_prime)?.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sigma = params.gaussian_sigma()?;
            if l2 == 0.0 {
                identity()
            } else if sigma == 0.0 || l2.is_infinite() {
                distinguishing()
            } else {
                Ok(analytic_pld_gaussian(l2, sigma, grid_step)?)
            }
        }
        AccountantKind::Exponential => match (q.as_vector(), q_prime.as_vector()) {
            (Some(a), Some(b)) if a.iter().chain(b).all(|x| x.is_finite()) => {
                Ok(exponential_pld(a, b, params.epsilon, params.sensitivity, grid_step)?)
            }
            (Some(_), Some(_)) => distinguishing(),
            _ => Err(DistAuditError::Scoring("exponential mechanism inputs must be score vectors".into())),
        },
    }
}

pub fn distributional_audit(record: &Trace, replay: &Trace, registry: &Registry, cfg: &DistAuditConfig) -> Result<AuditVerdict, DistAuditError> {
    if cfg.samples < MIN_AUDIT_SAMPLES {
        return Err(DistAuditError::InvalidConfig(format!("samples = {} (need at least {MIN_AUDIT_SAMPLES})", cfg.samples)));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(DistAuditError::InvalidConfig(format!("delta = {}", cfg.delta)));
    }
    if let Some(s) = record.stop_reason.as_ref().or(replay.stop_reason.as_ref()) {
        return Err(DistAuditError::Stopped(format!("{:?} at call {}", s.kind, s.index)));
    }
    if record.entries.len() != replay.entries.len() {
        return Err(DistAuditError::Length(record.entries.len(), replay.entries.len()));
    }
    let mut per_call = Vec::new();
    for (e, r) in record.entries.iter().zip(&replay.entries) {
        if e.kind != r.kind {
            return Err(DistAuditError::KindMismatch { index: e.index, record: e.kind.clone(), replay: r.kind.clone() });
        }
        if e.is_marker() {
            continue;
        }
        let prim = registry.get(&e.kind).ok_or_else(|| DistAuditError::UnknownKind(e.kind.clone()))?;
        let params = e.params.as_ref().ok_or(DistAuditError::MissingParams(e.index))?;
        let (pld, source) = match prim.spec().accountant {
            Some(acc) if !cfg.empirical_for_trusted => {
                (analytic_pld(acc, &e.input, &r.input, params, cfg.grid_step)?, PldSource::Analytic)
            }
            _ => (empirical_pld(prim.as_ref(), &e.input, &r.input, params, cfg, e.index)?, PldSource::Empirical),
        };
        per_call.push(CallPld {
            index: e.index,
            kind: e.kind.clone(),
            source,
            eps_at_delta: eps_or_inf(&pld, cfg.delta)?,
            pld: Some(pld),
        });
    }
    let plds: Vec<DiscretePld> = per_call.iter().filter_map(|c| c.pld.clone()).collect();
    let composed = if plds.is_empty() { DiscretePld::identity(cfg.grid_step) } else { compose(&plds)? };
    let eps_hat = eps_or_inf(&composed, cfg.delta)?;
    let sampled = per_call.iter().any(|c| c.source == PldSource::Empirical);
    let slack = PASS_TOLERANCE + if sampled { cfg.empirical_slack } else { 0.0 };
    let pass = eps_hat <= cfg.eps_claimed + slack;
    let reported_budget = record.reported_budget();
    let mut findings = Vec::new();
    if !pass {
        findings.push(Violation {
            kind: ViolationKind::AccountingDiscrepancy,
            call_index: None,
            primitive: None,
            measured: Value::Real(eps_hat),
            declared: Value::Real(cfg.eps_claimed),
            message: format!("estimated privacy loss at delta={} exceeds the claimed epsilon", cfg.delta),
        });
    }
    if let Some((reported, _)) = reported_budget {
        let floor = eps_hat.max(cfg.grid_step);
        if reported > cfg.discrepancy_factor * floor {
            findings.push(Violation {
                kind: ViolationKind::AccountingDiscrepancy,
                call_index: None,
                primitive: None,
                measured: Value::Real(eps_hat),
                declared: Value::Real(reported),
                message: format!("reported budget is more than {}x the estimated loss", cfg.discrepancy_factor),
            });
        } else if reported + PASS_TOLERANCE < eps_hat {
            findings.push(Violation {
                kind: ViolationKind::AccountingDiscrepancy,
                call_index: None,
                primitive: None,
                measured: Value::Real(eps_hat),
                declared: Value::Real(reported),
                message: "reported budget understates the estimated loss".into(),
            });
        }
    }
    Ok(AuditVerdict { eps_hat, eps_claimed: cfg.eps_claimed, delta: cfg.delta, pass, per_call, findings, reported_budget })
}

impl AuditVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict is serializable")
    }
}
