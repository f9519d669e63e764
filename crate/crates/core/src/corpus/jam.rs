//! Exponential-mechanism choice of which marginal to measure next.
//!
//! A marginal's score is the model's L1 error minus the public estimate's
//! L1 error on it. Under replace-one the two errors can move in opposite
//! directions by 2 each, so the score sensitivity is 4; the buggy variant
//! declares 2.

use crate::mechanisms::{ExponentialMechanism, Registry};
use crate::neighbors::{AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{column, params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

const CELLS: usize = 3;
const MODEL: [f64; CELLS] = [12.0, 8.0, 10.0];
const PUBLIC: [f64; CELLS] = [8.0, 12.0, 10.0];

#[derive(Debug, Clone, Copy, Default)]
pub struct JamLite;

fn marginal(values: impl Iterator<Item = f64>) -> [f64; CELLS] {
    let mut h = [0.0; CELLS];
    for v in values {
        if v >= 0.0 && v < CELLS as f64 {
            h[v as usize] += 1.0;
        }
    }
    h
}

fn l1(a: &[f64; CELLS], b: &[f64; CELLS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

struct Run {
    variant: Variant,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "jam_lite"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(ExponentialMechanism::new())
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let scores: Vec<f64> = (0..data.columns().len())
            .map(|j| {
                let h = marginal(column(data, j));
                l1(&h, &MODEL) - l1(&h, &PUBLIC)
            })
            .collect();
        let sensitivity = match self.variant {
            Variant::Buggy => 2.0,
            Variant::Fixed => 4.0,
        };
        let p = params(ctx, budget.epsilon, 0.0, sensitivity)?;
        ctx.call("EM", p, Value::Vector(scores))
    }
}

impl JamLite {
    /// Ten rows in every cell of both columns.
    fn base(&self) -> TabularDataset {
        let rows = (0..30).map(|i| vec![(i % 3) as f64, ((i / 10) % 3) as f64]).collect();
        TabularDataset::new(self.schema(), rows).expect("rows match schema")
    }

    /// Moves a record between cells whose model and public errors shift the same way.
    pub fn same_direction_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = self.base();
        let dp = d.with_replaced(0, vec![2.0, 0.0]).expect("row width matches");
        (d, dp)
    }
}

impl CorpusCase for JamLite {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "jam_lite",
            summary: "score sensitivity ignores that both error terms can move in opposite directions",
            expected_violation: ViolationKind::SensitivityViolation,
            designated_audit: AuditKind::RecordReplay,
            adjacency: AdjacencyModel::ReplaceOne,
            strategy: Strategy::ReplaceCombined,
            benign_strategies: vec![Strategy::AddUniform, Strategy::AddMarginal, Strategy::AddDuplicate],
            budget: DEFAULT_BUDGET,
            claimed_epsilon: DEFAULT_BUDGET.epsilon,
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant })
    }

    fn schema(&self) -> Vec<Column> {
        let hi = CELLS as i64 - 1;
        vec![Column::categorical("a", 0, hi), Column::categorical("b", 0, hi)]
    }

    /// Moves a record from cell 0 to cell 1 of the first column.
    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = self.base();
        let dp = d.with_replaced(0, vec![1.0, 0.0]).expect("row width matches");
        (d, dp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recorder::generate_traces;
    use crate::validator::validate_traces;

    #[test]
    fn opposite_shifts_double_the_gap() {
        let case = JamLite;
        let run = |v: Variant, (d, dp): (TabularDataset, TabularDataset)| {
            let pair = generate_traces(case.pipeline(v).as_ref(), &d, &dp, DEFAULT_BUDGET, 2);
            validate_traces(&pair.record, &pair.replay).unwrap()
        };
        let r = run(Variant::Buggy, case.designated_pair());
        assert!(r.has(ViolationKind::SensitivityViolation));
        assert_eq!(r.violations[0].measured, Value::Real(4.0));
        assert!(run(Variant::Fixed, case.designated_pair()).passed());
        assert!(run(Variant::Buggy, case.same_direction_pair()).passed());
    }
}
