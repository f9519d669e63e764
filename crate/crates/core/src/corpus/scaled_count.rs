//! Count scaled by a public multiplier, released with the Laplace mechanism.
//!
//! The buggy variant declares the sensitivity of the unscaled count.

use crate::mechanisms::{LaplaceMechanism, Registry};
use crate::neighbors::{AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy)]
pub struct ScaledCount {
    pub multiplier: f64,
}

impl Default for ScaledCount {
    fn default() -> Self {
        Self { multiplier: 2.0 }
    }
}

struct Run {
    variant: Variant,
    multiplier: f64,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "scaled_count"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(LaplaceMechanism::new())
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let q = data.len() as f64 * self.multiplier;
        let sensitivity = match self.variant {
            Variant::Buggy => 1.0,
            Variant::Fixed => self.multiplier.abs(),
        };
        let p = params(ctx, budget.epsilon, 0.0, sensitivity)?;
        ctx.call("LM", p, Value::Real(q))
    }
}

impl CorpusCase for ScaledCount {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "scaled_count",
            summary: "count times a multiplier, declared with the sensitivity of the bare count",
            expected_violation: ViolationKind::SensitivityViolation,
            designated_audit: AuditKind::RecordReplay,
            adjacency: AdjacencyModel::AddRemove,
            strategy: Strategy::AddDuplicate,
            benign_strategies: vec![Strategy::RemoveRandom, Strategy::AddUniform, Strategy::AddMarginal],
            budget: DEFAULT_BUDGET,
            claimed_epsilon: DEFAULT_BUDGET.epsilon,
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant, multiplier: self.multiplier })
    }

    fn schema(&self) -> Vec<Column> {
        vec![Column::categorical("x", 0, 1)]
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = TabularDataset::from_column(self.schema().remove(0), &[0.0, 0.0, 0.0]);
        let dp = TabularDataset::from_column(self.schema().remove(0), &[0.0, 0.0, 0.0, 0.0]);
        (d, dp)
    }
}
