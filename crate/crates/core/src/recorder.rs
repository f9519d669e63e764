//! Record/replay tracing of privacy-primitive calls.
//!
//! In record mode every primitive call runs for real and its parameters,
//! sensitive input, post-call generator state and output are logged. In
//! replay mode calls are checked against the reference trace for kind and
//! order, their inputs are logged, the generator is moved to the recorded
//! post-call state, and the recorded output is returned instead of running
//! the primitive.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mechanisms::{AuditSpec, MechanismParams, Registry, BUDGET_REPORT, ENSURE_EQUALITY};
use crate::neighbors::TabularDataset;
use crate::rng::{DpRng, RngState};
use crate::value::Value;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Record,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopKind {
    /// Replay made a call the reference trace does not have at this index.
    ControlFlowMismatch,
    /// An `ensure_equality` value differs from the recorded one.
    EqualityMismatch,
    /// A guarded primitive refused its input; nothing was released.
    InputRejected,
    /// A primitive raised an error other than a guard rejection.
    PrimitiveFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopReason {
    pub kind: StopKind,
    pub index: usize,
    pub detail: String,
}

/// Returned by context calls once the run has stopped; pipelines propagate it with `?`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halt(pub StopReason);

impl fmt::Display for Halt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run stopped at call {}: {:?} ({})", self.0.index, self.0.kind, self.0.detail)
    }
}

impl std::error::Error for Halt {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<MechanismParams>,
    pub input: Value,
    pub rng_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_state: Option<RngState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
}

impl TraceEntry {
    pub fn is_marker(&self) -> bool {
        self.kind == ENSURE_EQUALITY || self.kind == BUDGET_REPORT
    }

    /// First 8 bytes of the SHA-256 of the input's JSON, as hex.
    pub fn input_digest(&self) -> String {
        let json = serde_json::to_vec(&self.input).expect("values are serializable");
        let h = Sha256::digest(&json);
        hex::encode(&h[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub version: u32,
    pub pipeline: String,
    pub mode: Mode,
    pub seed: u64,
    pub specs: BTreeMap<String, AuditSpec>,
    pub entries: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported trace version {0}")]
    Version(u32),
    #[error("trace indices are not contiguous from 1 (entry {0})")]
    Indices(usize),
    #[error("replay needs a record-mode reference trace")]
    NotRecord,
}

impl Trace {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace values are always serializable");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, TraceError> {
        let t: Trace = serde_json::from_str(s)?;
        if t.version != TRACE_VERSION {
            return Err(TraceError::Version(t.version));
        }
        if let Some(e) = t.entries.iter().enumerate().find(|(i, e)| e.index != i + 1) {
            return Err(TraceError::Indices(e.0 + 1));
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Declared `(epsilon, delta)` from the last budget report, if any.
    pub fn reported_budget(&self) -> Option<(f64, f64)> {
        self.entries.iter().rev().find(|e| e.kind == BUDGET_REPORT).and_then(|e| match e.input.as_vector() {
            Some([eps, delta]) => Some((*eps, *delta)),
            _ => None,
        })
    }
}

/// Instrumentation handle passed to a pipeline for one run.
pub struct AuditContext {
    mode: Mode,
    pipeline: String,
    seed: u64,
    registry: Registry,
    rng: DpRng,
    reference: Option<Trace>,
    entries: Vec<TraceEntry>,
    stop: Option<StopReason>,
}

impl AuditContext {
    pub fn record(pipeline: impl Into<String>, registry: Registry, seed: u64) -> Self {
        Self {
            mode: Mode::Record,
            pipeline: pipeline.into(),
            seed,
            registry,
            rng: DpRng::seed_from_u64(seed),
            reference: None,
            entries: Vec::new(),
            stop: None,
        }
    }

    /// Replays against `reference`, reseeding the generator with its seed.
    pub fn replay(reference: Trace, registry: Registry) -> Result<Self, TraceError> {
        if reference.mode != Mode::Record {
            return Err(TraceError::NotRecord);
        }
        Ok(Self {
            mode: Mode::Replay,
            pipeline: reference.pipeline.clone(),
            seed: reference.seed,
            registry,
            rng: DpRng::seed_from_u64(reference.seed),
            reference: Some(reference),
            entries: Vec::new(),
            stop: None,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Generator for pipeline-level randomness outside primitives.
    pub fn rng(&mut self) -> &mut DpRng {
        &mut self.rng
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.is_some()
    }

    /// Stops the run for a pipeline-level error such as unusable mechanism parameters.
    pub fn fail(&mut self, detail: impl Into<String>) -> Halt {
        self.halt(StopKind::PrimitiveFailure, detail.into())
    }

    fn next_index(&self) -> usize {
        self.entries.len() + 1
    }

    fn halt(&mut self, kind: StopKind, detail: String) -> Halt {
        let reason = StopReason { kind, index: self.next_index(), detail };
        self.stop = Some(reason.clone());
        Halt(reason)
    }

    fn check_running(&self) -> Result<(), Halt> {
        match &self.stop {
            Some(r) => Err(Halt(r.clone())),
            None => Ok(()),
        }
    }

    /// Reference entry for the next call, or STOP when kinds or lengths disagree.
    fn expect_reference(&mut self, kind: &str) -> Result<TraceEntry, Halt> {
        let k = self.next_index();
        let reference = self.reference.as_ref().expect("replay mode has a reference");
        match reference.entries.get(k - 1) {
            None => Err(self.halt(
                StopKind::ControlFlowMismatch,
                format!("call {k} ({kind}) beyond the {} recorded calls", reference.entries.len()),
            )),
            Some(e) if e.kind != kind => {
                let detail = format!("recorded {} but replay called {kind}", e.kind);
                Err(self.halt(StopKind::ControlFlowMismatch, detail))
            }
            Some(e) => Ok(e.clone()),
        }
    }

    fn push(&mut self, kind: &str, params: Option<MechanismParams>, input: Value, output: Option<Value>) {
        let state = self.rng.snapshot();
        let record = self.mode == Mode::Record;
        self.entries.push(TraceEntry {
            index: self.next_index(),
            kind: kind.to_owned(),
            params,
            input,
            rng_digest: state.digest_hex(),
            rng_state: record.then_some(state),
            output: if record { output } else { None },
        });
    }

    /// Invokes the registered primitive `kind` on the sensitive `input`.
    pub fn call(&mut self, kind: &str, params: MechanismParams, input: Value) -> Result<Value, Halt> {
        self.check_running()?;
        let Some(prim) = self.registry.get(kind).cloned() else {
            return Err(self.halt(StopKind::PrimitiveFailure, format!("no primitive registered as {kind}")));
        };
        match self.mode {
            Mode::Record => {
                if let Err(e) = prim.check_input(&input) {
                    return Err(self.halt(StopKind::InputRejected, e.to_string()));
                }
                match prim.invoke(&input, &params, &mut self.rng) {
                    Ok(out) => {
                        self.push(kind, Some(params), input, Some(out.clone()));
                        Ok(out)
                    }
                    Err(e) => Err(self.halt(StopKind::PrimitiveFailure, e.to_string())),
                }
            }
            Mode::Replay => {
                let rec = self.expect_reference(kind)?;
                if let Err(e) = prim.check_input(&input) {
                    return Err(self.halt(StopKind::InputRejected, e.to_string()));
                }
                let (Some(state), Some(out)) = (rec.rng_state, rec.output) else {
                    return Err(self.halt(StopKind::PrimitiveFailure, "reference entry lacks state or output".into()));
                };
                self.rng.restore(&state).expect("state parsed from a valid trace");
                self.push(kind, Some(params), input, None);
                Ok(out)
            }
        }
    }

    /// Asserts that `value` is identical across the two runs and returns it unchanged.
    pub fn ensure_equality(&mut self, label: &str, value: Value) -> Result<Value, Halt> {
        self.check_running()?;
        let payload = Value::map([(label, value.clone())]);
        match self.mode {
            Mode::Record => self.push(ENSURE_EQUALITY, None, payload, None),
            Mode::Replay => {
                let rec = self.expect_reference(ENSURE_EQUALITY)?;
                self.push(ENSURE_EQUALITY, None, payload.clone(), None);
                if rec.input != payload {
                    let detail = format!("{label}: recorded {:?}, replay {:?}", rec.input, payload);
                    let reason = StopReason { kind: StopKind::EqualityMismatch, index: self.entries.len(), detail };
                    self.stop = Some(reason.clone());
                    return Err(Halt(reason));
                }
            }
        }
        Ok(value)
    }

    /// Logs the privacy budget the pipeline claims to have spent.
    pub fn report_budget(&mut self, epsilon: f64, delta: f64) -> Result<(), Halt> {
        self.check_running()?;
        if self.mode == Mode::Replay {
            self.expect_reference(BUDGET_REPORT)?;
        }
        self.push(BUDGET_REPORT, None, Value::Vector(vec![epsilon, delta]), None);
        Ok(())
    }

    pub fn finish(self) -> Trace {
        Trace {
            version: TRACE_VERSION,
            pipeline: self.pipeline,
            mode: self.mode,
            seed: self.seed,
            specs: self.registry.specs(),
            entries: self.entries,
            stop_reason: self.stop,
        }
    }
}

/// Total privacy budget handed to a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub epsilon: f64,
    pub delta: f64,
}

/// A program whose every privacy primitive goes through an [`AuditContext`].
pub trait Pipeline: Send + Sync {
    fn name(&self) -> &str;

    fn registry(&self) -> Registry;

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    pub record: Trace,
    pub replay: Trace,
    /// `None` when the run stopped.
    pub record_output: Option<Value>,
    pub replay_output: Option<Value>,
}

/// Records `pipeline` on `d` and replays it on `d_prime`, both from `seed`.
pub fn generate_traces(
    pipeline: &dyn Pipeline,
    d: &TabularDataset,
    d_prime: &TabularDataset,
    budget: Budget,
    seed: u64,
) -> TracePair {
    let registry = pipeline.registry();
    let mut ctx = AuditContext::record(pipeline.name(), registry.clone(), seed);
    let record_output = pipeline.run(d, budget, &mut ctx).ok();
    let record = ctx.finish();
    let mut ctx = AuditContext::replay(record.clone(), registry).expect("trace was just recorded");
    let replay_output = pipeline.run(d_prime, budget, &mut ctx).ok();
    TracePair { record, replay: ctx.finish(), record_output, replay_output }
}
