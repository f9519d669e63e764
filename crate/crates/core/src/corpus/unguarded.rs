//! Raw column sum passed to each primitive with no input validation.
//!
//! The buggy variant registers unguarded primitives, so NaN and infinite
//! inputs reach the noise step; the fixed variant's guarded primitives
//! reject them before any budget is spent.

use crate::mechanisms::{ExponentialMechanism, GaussianMechanism, LaplaceMechanism, Registry};
use crate::neighbors::{gen_synthetic, AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{column, params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, Default)]
pub struct UnguardedInputs;

struct Run {
    variant: Variant,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "unguarded_inputs"
    }

    fn registry(&self) -> Registry {
        match self.variant {
            Variant::Buggy => Registry::new()
                .with(LaplaceMechanism::new().unguarded())
                .with(GaussianMechanism::new().unguarded())
                .with(ExponentialMechanism::new().unguarded()),
            Variant::Fixed => Registry::new()
                .with(LaplaceMechanism::new())
                .with(GaussianMechanism::new())
                .with(ExponentialMechanism::new()),
        }
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let s: f64 = column(data, 0).sum();
        let eps = budget.epsilon / 3.0;
        let p = params(ctx, eps, 0.0, 1.0)?;
        let a = ctx.call("LM", p, Value::Real(s))?;
        let p = params(ctx, eps, budget.delta, 1.0)?;
        let b = ctx.call("GM", p, Value::Real(s))?;
        let p = params(ctx, eps, 0.0, 1.0)?;
        let c = ctx.call("EM", p, Value::Vector(vec![s, -s]))?;
        Ok(Value::List(vec![a, b, c]))
    }
}

impl CorpusCase for UnguardedInputs {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "unguarded_inputs",
            summary: "primitives accept NaN and infinite inputs",
            expected_violation: ViolationKind::SensitivityViolation,
            designated_audit: AuditKind::RecordReplay,
            adjacency: AdjacencyModel::AddRemove,
            strategy: Strategy::AddNan,
            benign_strategies: vec![Strategy::RemoveRandom, Strategy::AddUniform, Strategy::AddDuplicate],
            budget: DEFAULT_BUDGET,
            claimed_epsilon: DEFAULT_BUDGET.epsilon,
            pathological: true,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant })
    }

    fn schema(&self) -> Vec<Column> {
        vec![Column::real("x", 0.0, 1.0)]
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = gen_synthetic(41, 20, &self.schema()).expect("valid schema");
        let dp = d.with_row(vec![f64::NAN]).expect("row width matches");
        (d, dp)
    }
}
