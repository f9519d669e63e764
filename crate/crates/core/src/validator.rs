//! Call-by-call comparison of a record trace with its replay.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::mechanisms::{AccountantKind, AuditSpec, MechanismParams, Metric};
use crate::recorder::{Mode, StopKind, StopReason, Trace, TraceEntry};
use crate::value::Value;

/// Absolute slack allowed between measured and declared sensitivity.
pub const SENSITIVITY_TOLERANCE: f64 = 1e-9;
/// Relative slack allowed between realized and implied noise scale.
pub const SCALE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    ControlFlowMismatch,
    InvarianceViolation,
    SensitivityViolation,
    NoiseMiscalibration,
    AccountingDiscrepancy,
    InputDomainViolation,
}

impl ViolationKind {
    pub const ALL: [ViolationKind; 6] = [
        ViolationKind::ControlFlowMismatch,
        ViolationKind::InvarianceViolation,
        ViolationKind::SensitivityViolation,
        ViolationKind::NoiseMiscalibration,
        ViolationKind::AccountingDiscrepancy,
        ViolationKind::InputDomainViolation,
    ];
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for ViolationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.replace(['_', '-'], "").to_ascii_lowercase();
        ViolationKind::ALL
            .into_iter()
            .find(|k| {
                let name = k.to_string().to_ascii_lowercase();
                name == key || name.trim_end_matches("violation").trim_end_matches("mismatch") == key
            })
            .ok_or_else(|| format!("unknown violation kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<String>,
    pub measured: Value,
    pub declared: Value,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSummary {
    pub index: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::float_repr::opt")]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::float_repr::opt")]
    pub declared_sensitivity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub trace_summary: Vec<CallSummary>,
    /// A guarded primitive refused the neighbouring input; nothing was released.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<StopReason>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// One line per violation, then the per-call table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        };
        let _ = writeln!(s, "verdict: {verdict} ({} violation(s))", self.violations.len());
        for v in &self.violations {
            let at = v.call_index.map_or_else(|| "pipeline".to_string(), |i| format!("call {i}"));
            let prim = v.primitive.as_deref().unwrap_or("-");
            let _ = writeln!(
                s,
                "  [{at}] {} {prim}: measured {} vs declared {} ({})",
                v.kind,
                short(&v.measured),
                short(&v.declared),
                v.message
            );
        }
        if let Some(r) = &self.rejection {
            let _ = writeln!(s, "  input rejected at call {}: {}", r.index, r.detail);
        }
        let _ = writeln!(s, "{:>5}  {:<16} {:<8} {:>14} {:>14}", "call", "kind", "metric", "distance", "declared");
        for c in &self.trace_summary {
            let num = |x: Option<f64>| x.map_or_else(|| "-".into(), |v| format!("{v:.6}"));
            let metric = c.metric.map_or_else(|| "-".into(), |m| m.to_string());
            let _ = writeln!(
                s,
                "{:>5}  {:<16} {:<8} {:>14} {:>14}",
                c.index,
                c.kind,
                metric,
                num(c.distance),
                num(c.declared_sensitivity)
            );
        }
        s
    }
}

fn short(v: &Value) -> String {
    match v {
        Value::Real(x) => format!("{x}"),
        other => serde_json::to_string(other).unwrap_or_default(),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidatorError {
    #[error("traces belong to different pipelines: {0} vs {1}")]
    PipelineMismatch(String, String),
    #[error("expected a record trace and a replay trace")]
    ModeMismatch,
    #[error("no audit spec for primitive kind {0}")]
    UnknownKind(String),
    #[error("operands differ in shape: {0}")]
    Shape(String),
}

/// Distance between two inputs under `metric`. Any NaN operand gives `+inf`.
pub fn empirical_distance(a: &Value, b: &Value, metric: Metric) -> Result<f64, ValidatorError> {
    if let (Value::Index(x), Value::Index(y)) = (a, b) {
        return Ok(if x == y { 0.0 } else if metric == Metric::Hamming { 1.0 } else { x.abs_diff(*y) as f64 });
    }
    let (Some(xs), Some(ys)) = (a.numeric(), b.numeric()) else {
        return Err(ValidatorError::Shape(format!("{a:?} vs {b:?}")));
    };
    if xs.len() != ys.len() {
        return Err(ValidatorError::Shape(format!("length {} vs {}", xs.len(), ys.len())));
    }
    if xs.iter().chain(&ys).any(|x| x.is_nan()) {
        return Ok(f64::INFINITY);
    }
    let diffs = xs.iter().zip(&ys).map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() });
    let d = match metric {
        Metric::L1 => diffs.sum(),
        Metric::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        Metric::Linf => diffs.fold(0.0, f64::max),
        Metric::Hamming => xs.iter().zip(&ys).filter(|(x, y)| x.to_bits() != y.to_bits()).count() as f64,
    };
    Ok(if d.is_nan() { f64::INFINITY } else { d })
}

/// Checks to skip, for fault-injection experiments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidatorConfig {
    pub disabled: BTreeSet<ViolationKind>,
}

fn params_equal(a: &Option<MechanismParams>, b: &Option<MechanismParams>) -> bool {
    let bits = |p: &MechanismParams| {
        [Some(p.epsilon), Some(p.delta), Some(p.sensitivity), p.scale, p.sigma].map(|x| x.map(f64::to_bits))
    };
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => bits(x) == bits(y),
        _ => false,
    }
}

fn params_value(p: &Option<MechanismParams>) -> Value {
    match p {
        None => Value::Text("none".into()),
        Some(p) => {
            let mut m = BTreeMap::from([
                ("epsilon".to_string(), Value::Real(p.epsilon)),
                ("delta".to_string(), Value::Real(p.delta)),
                ("sensitivity".to_string(), Value::Real(p.sensitivity)),
            ]);
            if let Some(s) = p.scale {
                m.insert("scale".into(), Value::Real(s));
            }
            if let Some(s) = p.sigma {
                m.insert("sigma".into(), Value::Real(s));
            }
            Value::Map(m)
        }
    }
}

/// `(realized, implied)` noise scale of a trusted call, when the accountant has one.
fn scales(accountant: AccountantKind, p: &MechanismParams) -> Option<(f64, f64)> {
    match accountant {
        AccountantKind::Laplace => Some((p.laplace_scale(), p.implied_laplace_scale())),
        AccountantKind::Gaussian => {
            let implied = p.implied_gaussian_sigma().ok()?;
            Some((p.sigma.unwrap_or(implied), implied))
        }
        AccountantKind::Exponential => None,
    }
}

fn miscalibrated(realized: f64, implied: f64) -> bool {
    if implied == 0.0 {
        realized != 0.0
    } else {
        !((realized - implied).abs() <= SCALE_TOLERANCE * implied)
    }
}

struct Collector<'a> {
    cfg: &'a ValidatorConfig,
    out: Vec<Violation>,
}

impl Collector<'_> {
    fn emit(&mut self, kind: ViolationKind, e: Option<&TraceEntry>, measured: Value, declared: Value, message: String) {
        if self.cfg.disabled.contains(&kind) {
            return;
        }
        self.out.push(Violation {
            kind,
            call_index: e.map(|e| e.index),
            primitive: e.map(|e| e.kind.clone()),
            measured,
            declared,
            message,
        });
    }
}

/// Validates using the specs embedded in the record trace.
pub fn validate_traces(record: &Trace, replay: &Trace) -> Result<AuditReport, ValidatorError> {
    validate_records(record, replay, &record.specs, &ValidatorConfig::default())
}

pub fn validate_records(
    record: &Trace,
    replay: &Trace,
    specs: &BTreeMap<String, AuditSpec>,
    cfg: &ValidatorConfig,
) -> Result<AuditReport, ValidatorError> {
    if record.pipeline != replay.pipeline {
        return Err(ValidatorError::PipelineMismatch(record.pipeline.clone(), replay.pipeline.clone()));
    }
    if record.mode != Mode::Record || replay.mode != Mode::Replay {
        return Err(ValidatorError::ModeMismatch);
    }
    let spec_of = |kind: &str| specs.get(kind).ok_or_else(|| ValidatorError::UnknownKind(kind.into()));
    let mut c = Collector { cfg, out: Vec::new() };
    let mut summary = Vec::new();
    let mut rejection = None;

    for e in record.entries.iter().filter(|e| !e.is_marker()) {
        let spec = spec_of(&e.kind)?;
        if let (Some(acc), Some(p)) = (spec.accountant, &e.params) {
            if let Some((realized, implied)) = scales(acc, p) {
                if miscalibrated(realized, implied) {
                    c.emit(
                        ViolationKind::NoiseMiscalibration,
                        Some(e),
                        Value::Real(realized),
                        Value::Real(implied),
                        format!("realized noise scale {realized} but the declared budget implies {implied}"),
                    );
                }
            }
        }
    }

    for (e, r) in record.entries.iter().zip(&replay.entries) {
        if e.kind != r.kind {
            c.emit(
                ViolationKind::ControlFlowMismatch,
                Some(r),
                Value::Text(r.kind.clone()),
                Value::Text(e.kind.clone()),
                "call kinds diverge".into(),
            );
            break;
        }
        if e.is_marker() {
            summary.push(CallSummary { index: e.index, kind: e.kind.clone(), metric: None, distance: None, declared_sensitivity: None });
            if e.input != r.input {
                c.emit(
                    ViolationKind::InvarianceViolation,
                    Some(r),
                    r.input.clone(),
                    e.input.clone(),
                    "value asserted equal differs between runs".into(),
                );
            }
            continue;
        }
        let spec = spec_of(&e.kind)?;
        if !params_equal(&e.params, &r.params) {
            c.emit(
                ViolationKind::InvarianceViolation,
                Some(r),
                params_value(&r.params),
                params_value(&e.params),
                "mechanism parameters depend on the data".into(),
            );
        }
        let declared = e.params.as_ref().map_or(0.0, |p| p.sensitivity);
        let distance = match empirical_distance(&e.input, &r.input, spec.metric) {
            Ok(d) => Some(d),
            Err(err) => {
                c.emit(
                    ViolationKind::InvarianceViolation,
                    Some(r),
                    r.input.clone(),
                    e.input.clone(),
                    format!("input shape depends on the data: {err}"),
                );
                None
            }
        };
        if let Some(d) = distance {
            if d > declared + SENSITIVITY_TOLERANCE {
                c.emit(
                    ViolationKind::SensitivityViolation,
                    Some(r),
                    Value::Real(d),
                    Value::Real(declared),
                    format!("{} distance between inputs exceeds the declared sensitivity", spec.metric),
                );
            }
        }
        if !(e.input.is_finite() && r.input.is_finite()) {
            c.emit(
                ViolationKind::InputDomainViolation,
                Some(r),
                r.input.clone(),
                e.input.clone(),
                "non-finite value reached an unguarded primitive".into(),
            );
        }
        summary.push(CallSummary {
            index: e.index,
            kind: e.kind.clone(),
            metric: Some(spec.metric),
            distance,
            declared_sensitivity: Some(declared),
        });
    }

    for stop in [&record.stop_reason, &replay.stop_reason].into_iter().flatten() {
        match stop.kind {
            StopKind::ControlFlowMismatch => c.emit(
                ViolationKind::ControlFlowMismatch,
                None,
                Value::Index(stop.index),
                Value::Index(record.entries.len()),
                format!("call {}: {}", stop.index, stop.detail),
            ),
            StopKind::EqualityMismatch => {
                if !c.out.iter().any(|v| v.kind == ViolationKind::InvarianceViolation && v.call_index == Some(stop.index)) {
                    c.emit(
                        ViolationKind::InvarianceViolation,
                        None,
                        Value::Index(stop.index),
                        Value::Index(stop.index),
                        stop.detail.clone(),
                    );
                }
            }
            StopKind::InputRejected => rejection = Some(stop.clone()),
            StopKind::PrimitiveFailure => c.emit(
                ViolationKind::InputDomainViolation,
                None,
                Value::Index(stop.index),
                Value::Text("completed call".into()),
                format!("primitive failed: {}", stop.detail),
            ),
        }
    }
    if replay.stop_reason.is_none() && record.stop_reason.is_none() && replay.entries.len() < record.entries.len() {
        c.emit(
            ViolationKind::ControlFlowMismatch,
            None,
            Value::Index(replay.entries.len()),
            Value::Index(record.entries.len()),
            format!("replay made {} calls, record made {}", replay.entries.len(), record.entries.len()),
        );
    }

    let violations = c.out;
    Ok(AuditReport {
        verdict: if violations.is_empty() { Verdict::Pass } else { Verdict::Fail },
        violations,
        trace_summary: summary,
        rejection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{LaplaceMechanism, Registry};
    use crate::recorder::AuditContext;

    fn pair(declared: f64, q: f64, q2: f64) -> (Trace, Trace) {
        let reg = Registry::new().with(LaplaceMechanism::new());
        let p = MechanismParams::pure(1.0, declared).unwrap();
        let mut rec = AuditContext::record("t", reg.clone(), 0);
        rec.call("LM", p.clone(), Value::Real(q)).unwrap();
        let t = rec.finish();
        let mut rep = AuditContext::replay(t.clone(), reg).unwrap();
        rep.call("LM", p, Value::Real(q2)).unwrap();
        (t, rep.finish())
    }

    #[test]
    fn distances() {
        let d = |a: Vec<f64>, b: Vec<f64>, m| empirical_distance(&Value::Vector(a), &Value::Vector(b), m).unwrap();
        assert_eq!(d(vec![6.0], vec![8.0], Metric::L1), 2.0);
        assert_eq!(d(vec![1.0, 2.0], vec![1.0, 2.0], Metric::L2), 0.0);
        assert_eq!(d(vec![1.0, 5.0], vec![2.0, 3.0], Metric::Linf), 2.0);
        assert_eq!(d(vec![1.0, 5.0], vec![2.0, 5.0], Metric::Hamming), 1.0);
        assert_eq!(d(vec![f64::NAN], vec![0.0], Metric::L1), f64::INFINITY);
        assert_eq!(d(vec![f64::INFINITY], vec![0.0], Metric::L2), f64::INFINITY);
        assert!(empirical_distance(&Value::Vector(vec![1.0]), &Value::Vector(vec![1.0, 2.0]), Metric::L1).is_err());
    }

    #[test]
    fn sensitivity_violation_reported() {
        let (t, t2) = pair(1.0, 6.0, 8.0);
        let r = validate_traces(&t, &t2).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!((v.kind, v.call_index), (ViolationKind::SensitivityViolation, Some(1)));
        assert_eq!((v.measured.clone(), v.declared.clone()), (Value::Real(2.0), Value::Real(1.0)));
        assert!(r.to_text().contains("SensitivityViolation"));
    }

    #[test]
    fn raising_declared_sensitivity_clears_violation() {
        let (t, t2) = pair(2.0, 6.0, 8.0);
        assert!(validate_traces(&t, &t2).unwrap().passed());
    }

    #[test]
    fn fault_injection_hides_kind() {
        let (t, t2) = pair(1.0, 6.0, 8.0);
        let cfg = ValidatorConfig { disabled: [ViolationKind::SensitivityViolation].into() };
        assert!(validate_records(&t, &t2, &t.specs, &cfg).unwrap().passed());
    }

    #[test]
    fn zero_scale_is_miscalibrated() {
        let reg = Registry::new().with(LaplaceMechanism::new());
        let p = MechanismParams::pure(1.0, 0.01).unwrap().with_scale(0.0);
        let mut rec = AuditContext::record("t", reg.clone(), 0);
        rec.call("LM", p.clone(), Value::Real(1.0)).unwrap();
        let t = rec.finish();
        let mut rep = AuditContext::replay(t.clone(), reg).unwrap();
        rep.call("LM", p, Value::Real(1.0)).unwrap();
        let r = validate_traces(&t, &rep.finish()).unwrap();
        assert!(r.has(ViolationKind::NoiseMiscalibration));
    }

    #[test]
    fn mismatched_pipelines_error() {
        let (t, mut t2) = pair(1.0, 1.0, 1.0);
        t2.pipeline = "other".into();
        assert!(matches!(validate_traces(&t, &t2), Err(ValidatorError::PipelineMismatch(..))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("sensitivity".parse::<ViolationKind>().unwrap(), ViolationKind::SensitivityViolation);
        assert_eq!("ControlFlowMismatch".parse::<ViolationKind>().unwrap(), ViolationKind::ControlFlowMismatch);
        assert_eq!("input-domain".parse::<ViolationKind>().unwrap(), ViolationKind::InputDomainViolation);
    }
}
