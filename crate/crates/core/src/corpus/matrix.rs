//! Detection matrix: every case and variant audited on its designated pair.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distaudit::{distributional_audit, DistAuditConfig, DistAuditError};
use crate::exec::{map_indexed, Execution};
use crate::recorder::generate_traces;
use crate::validator::{validate_records, ValidatorConfig, ViolationKind};

use super::{AuditKind, CorpusCase, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConfig {
    pub seed: u64,
    pub samples: usize,
    /// Run the sampling audit as well as record/replay.
    pub distributional: bool,
    pub validator: ValidatorConfig,
    pub exec: Execution,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100_000,
            distributional: true,
            validator: ValidatorConfig::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSummary {
    #[serde(with = "crate::float_repr")]
    pub eps_hat: f64,
    pub eps_claimed: f64,
    pub pass: bool,
    pub findings: Vec<ViolationKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub name: String,
    pub variant: Variant,
    pub expected_violation: Option<ViolationKind>,
    pub designated_audit: AuditKind,
    pub pathological: bool,
    /// Distinct kinds found by record/replay.
    pub record_replay: Vec<ViolationKind>,
    pub rejected: bool,
    /// `None` when skipped: not requested, or a run stopped before completing.
    pub distributional: Option<DistSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// False when the designated audit was not requested; such rows do not count.
    pub evaluated: bool,
    /// Buggy: the designated audit reported the expected kind. Fixed: both audits passed.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: Vec<MatrixRow>,
    pub passed: bool,
}

pub fn run_case(case: &dyn CorpusCase, variant: Variant, cfg: &MatrixConfig) -> MatrixRow {
    let info = case.info();
    let (d, dp) = case.designated_pair();
    let pipeline = case.pipeline(variant);
    let pair = generate_traces(pipeline.as_ref(), &d, &dp, info.budget, cfg.seed);
    let mut row = MatrixRow {
        name: info.name.to_owned(),
        variant,
        expected_violation: (variant == Variant::Buggy).then_some(info.expected_violation),
        designated_audit: info.designated_audit,
        pathological: info.pathological,
        record_replay: Vec::new(),
        rejected: false,
        distributional: None,
        error: None,
        evaluated: variant == Variant::Fixed || info.designated_audit == AuditKind::RecordReplay || cfg.distributional,
        ok: false,
    };
    match validate_records(&pair.record, &pair.replay, &pair.record.specs, &cfg.validator) {
        Ok(report) => {
            let kinds: std::collections::BTreeSet<ViolationKind> = report.violations.iter().map(|v| v.kind).collect();
            row.record_replay = kinds.into_iter().collect();
            row.rejected = report.rejection.is_some();
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    if cfg.distributional && row.error.is_none() {
        let mut dc = DistAuditConfig::new(cfg.samples, info.budget.delta, info.claimed_epsilon, cfg.seed);
        dc.exec = cfg.exec;
        match distributional_audit(&pair.record, &pair.replay, &pipeline.registry(), &dc) {
            Ok(v) => {
                let findings: Vec<ViolationKind> =
                    v.findings.iter().map(|f| f.kind).filter(|k| !cfg.validator.disabled.contains(k)).collect();
                let pass = v.pass || cfg.validator.disabled.contains(&ViolationKind::AccountingDiscrepancy);
                row.distributional =
                    Some(DistSummary { eps_hat: v.eps_hat, eps_claimed: v.eps_claimed, pass, findings });
            }
            Err(DistAuditError::Stopped(_)) => {}
            Err(e) => row.error = Some(e.to_string()),
        }
    }
    row.ok = row.error.is_none()
        && match row.expected_violation {
            Some(kind) => match row.designated_audit {
                AuditKind::RecordReplay => row.record_replay.contains(&kind),
                AuditKind::Distributional => row.distributional.as_ref().is_some_and(|d| d.findings.contains(&kind)),
            },
            None => {
                row.record_replay.is_empty()
                    && row.distributional.as_ref().is_none_or(|d| d.pass && d.findings.is_empty())
            }
        };
    row
}

/// Buggy and fixed rows for every case, in case order.
pub fn run_matrix(cases: &[Box<dyn CorpusCase>], cfg: &MatrixConfig) -> Matrix {
    let jobs: Vec<(usize, Variant)> =
        (0..cases.len()).flat_map(|i| Variant::BOTH.map(|v| (i, v))).collect();
    let rows = map_indexed(jobs.len(), cfg.exec, |j| {
        let (i, v) = jobs[j];
        run_case(cases[i].as_ref(), v, cfg)
    });
    let passed = rows.iter().all(|r| r.ok || !r.evaluated);
    Matrix { rows, passed }
}

impl Matrix {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix is serializable")
    }

    pub fn to_text(&self) -> String {
        let kinds = |ks: &[ViolationKind]| {
            if ks.is_empty() {
                "-".to_string()
            } else {
                ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
            }
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:<6} {:<24} {:<40} {:<32} {}",
            "case", "var", "expected", "record-replay", "distributional", "ok"
        );
        for r in &self.rows {
            let expected = r.expected_violation.map_or("-".to_string(), |k| k.to_string());
            let mut rr = kinds(&r.record_replay);
            if r.rejected {
                rr.push_str(" (rejected)");
            }
            let dist = match &r.distributional {
                Some(d) => format!("eps_hat={:.3} {}", d.eps_hat, kinds(&d.findings)),
                None => "skipped".to_string(),
            };
            let ok = match (r.evaluated, r.ok) {
                (false, _) => "n/a",
                (true, true) => "ok",
                (true, false) => "MISMATCH",
            };
            let _ = writeln!(s, "{:<20} {:<6} {:<24} {:<40} {:<32} {ok}", r.name, r.variant.to_string(), expected, rr, dist);
            if let Some(e) = &r.error {
                let _ = writeln!(s, "    error: {e}");
            }
        }
        let _ = writeln!(s, "matrix: {}", if self.passed { "PASS" } else { "FAIL" });
        s
    }
}
