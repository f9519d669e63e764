//! Numeric encoder releasing a clipped sum and a row count.
//!
//! The buggy variant spends the full budget on each Laplace release and
//! decides whether to release a sequence-length total by looking at the
//! private lengths. The primitives are registered without an accountant,
//! so only sampling can see the double spend.

use crate::mechanisms::{LaplaceMechanism, Registry};
use crate::neighbors::{gen_synthetic, AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{censor, column, params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

const VALUE_HI: f64 = 10.0;
const LENGTH_HI: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleSpend {
    /// Public declaration that rows may carry sequences longer than one.
    pub has_sequences: bool,
}

struct Run {
    variant: Variant,
    has_sequences: bool,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "double_spend"
    }

    fn registry(&self) -> Registry {
        let lm = || LaplaceMechanism::new().untrusted();
        Registry::new().with(lm().with_kind("DPB")).with(lm().with_kind("DNR")).with(lm().with_kind("DQ"))
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let (sequences, eps_each) = match self.variant {
            Variant::Buggy => (column(data, 1).any(|l| l != 1.0), budget.epsilon),
            Variant::Fixed => (self.has_sequences, budget.epsilon / (2 + self.has_sequences as u8) as f64),
        };
        let total: f64 = column(data, 0).map(|x| censor(x, 0.0, VALUE_HI)).sum();
        let p = params(ctx, eps_each, 0.0, VALUE_HI)?;
        let bounds = ctx.call("DPB", p, Value::Real(total))?;
        let p = params(ctx, eps_each, 0.0, 1.0)?;
        let count = ctx.call("DNR", p, Value::Real(data.len() as f64))?;
        let mut out = vec![bounds, count];
        if sequences {
            let lengths: f64 = column(data, 1).map(|l| censor(l, 1.0, LENGTH_HI)).sum();
            let p = params(ctx, eps_each, 0.0, LENGTH_HI)?;
            out.push(ctx.call("DQ", p, Value::Real(lengths))?);
        }
        Ok(Value::List(out))
    }
}

impl DoubleSpend {
    fn base(&self) -> TabularDataset {
        let d = gen_synthetic(31, 100, &self.schema()).expect("valid schema");
        let rows = d.rows().iter().map(|r| vec![r[0], 1.0]).collect();
        TabularDataset::new(self.schema(), rows).expect("rows match schema")
    }

    /// Neighbour whose added row has a sequence, which changes the buggy branch.
    pub fn branch_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = self.base();
        let dp = d.with_row(vec![5.0, 3.0]).expect("row width matches");
        (d, dp)
    }
}

impl CorpusCase for DoubleSpend {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "double_spend",
            summary: "two releases each spend the whole budget",
            expected_violation: ViolationKind::AccountingDiscrepancy,
            designated_audit: AuditKind::Distributional,
            adjacency: AdjacencyModel::AddRemove,
            strategy: Strategy::AddUniform,
            benign_strategies: vec![Strategy::RemoveRandom, Strategy::AddMarginal, Strategy::AddDuplicate],
            budget: DEFAULT_BUDGET,
            claimed_epsilon: DEFAULT_BUDGET.epsilon,
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant, has_sequences: self.has_sequences })
    }

    fn schema(&self) -> Vec<Column> {
        vec![Column::real("value", 0.0, VALUE_HI), Column::categorical("length", 1, LENGTH_HI as i64)]
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = self.base();
        let dp = d.with_row(vec![VALUE_HI, 1.0]).expect("row width matches");
        (d, dp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recorder::generate_traces;
    use crate::validator::validate_traces;

    #[test]
    fn private_branch_changes_the_call_sequence() {
        let case = DoubleSpend::default();
        let (d, dp) = case.branch_pair();
        let pair = generate_traces(case.pipeline(Variant::Buggy).as_ref(), &d, &dp, DEFAULT_BUDGET, 3);
        let r = validate_traces(&pair.record, &pair.replay).unwrap();
        assert!(r.has(ViolationKind::ControlFlowMismatch), "{}", r.to_text());
        let pair = generate_traces(case.pipeline(Variant::Fixed).as_ref(), &d, &dp, DEFAULT_BUDGET, 3);
        assert!(validate_traces(&pair.record, &pair.replay).unwrap().passed());
    }
}
