//! Sequential counting queries behind a privacy odometer.
//!
//! Each query is a Laplace count at a fixed per-query epsilon; after the
//! last one the odometer reports the total spend via advanced composition.
//! The buggy variant drops the logarithm around `1/delta'`.

use crate::accountant::{advanced_composition, advanced_composition_without_log};
use crate::mechanisms::{LaplaceMechanism, Registry};
use crate::neighbors::{gen_synthetic, AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{column, params, AuditKind, CaseInfo, CorpusCase, Variant};

#[derive(Debug, Clone, Copy)]
pub struct Odometer {
    pub queries: u32,
    pub per_query_epsilon: f64,
    pub delta_slack: f64,
}

impl Default for Odometer {
    fn default() -> Self {
        Self { queries: 10, per_query_epsilon: 0.1, delta_slack: 1e-6 }
    }
}

impl Odometer {
    /// Total spend the odometer should report.
    pub fn correct_bound(&self) -> f64 {
        spent(Variant::Fixed, self).unwrap_or(f64::INFINITY)
    }
}

fn spent(variant: Variant, o: &Odometer) -> Result<f64, String> {
    if o.queries <= 1 {
        return Ok(o.per_query_epsilon * f64::from(o.queries));
    }
    let f = match variant {
        Variant::Buggy => advanced_composition_without_log,
        Variant::Fixed => advanced_composition,
    };
    f(o.per_query_epsilon, 0.0, o.queries, o.delta_slack).map_err(|e| e.to_string())
}

struct Run {
    variant: Variant,
    odometer: Odometer,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "odometer"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(LaplaceMechanism::new())
    }

    /// The per-query epsilon is fixed by the odometer; `budget` only bounds what it may report.
    fn run(&self, data: &TabularDataset, _budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let o = &self.odometer;
        let mut answers = Vec::with_capacity(o.queries as usize);
        for j in 0..o.queries {
            let count = column(data, 0).filter(|x| *x >= f64::from(j)).count() as f64;
            let p = params(ctx, o.per_query_epsilon, 0.0, 1.0)?;
            answers.push(ctx.call("LM", p, Value::Real(count))?.as_real().unwrap_or(f64::NAN));
        }
        let eps = spent(self.variant, o).map_err(|e| ctx.fail(e))?;
        ctx.report_budget(eps, o.delta_slack)?;
        Ok(Value::map([("answers", Value::Vector(answers)), ("epsilon_spent", Value::Real(eps))]))
    }
}

impl CorpusCase for Odometer {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "odometer",
            summary: "advanced composition with 1/delta where ln(1/delta) belongs",
            expected_violation: ViolationKind::AccountingDiscrepancy,
            designated_audit: AuditKind::Distributional,
            adjacency: AdjacencyModel::AddRemove,
            strategy: Strategy::AddUniform,
            benign_strategies: vec![Strategy::RemoveRandom, Strategy::AddMarginal, Strategy::AddDuplicate],
            budget: Budget { epsilon: self.correct_bound(), delta: self.delta_slack },
            claimed_epsilon: self.correct_bound(),
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant, odometer: *self })
    }

    fn schema(&self) -> Vec<Column> {
        vec![Column::categorical("x", 0, 9)]
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = gen_synthetic(5, 100, &self.schema()).expect("valid schema");
        let dp = d.with_row(vec![9.0]).expect("row width matches");
        (d, dp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_spend_matches_closed_forms() {
        let o = Odometer::default();
        assert!((o.correct_bound() - 1.767_429_054).abs() < 1e-8, "{}", o.correct_bound());
        let buggy = spent(Variant::Buggy, &o).unwrap();
        assert!((buggy - 447.318_766_418).abs() < 1e-6, "{buggy}");
        let single = Odometer { queries: 1, ..o };
        assert_eq!(spent(Variant::Buggy, &single), spent(Variant::Fixed, &single));
    }
}
