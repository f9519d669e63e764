//! One-way marginals over two categorical columns.
//!
//! The buggy variant infers each column's domain as `max(data) + 1`, so an
//! out-of-domain record changes the shape of the released marginals.

use crate::mechanisms::{LaplaceMechanism, Registry};
use crate::neighbors::{gen_synthetic, AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{column, params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

/// Declared domain size of each column.
const DOMAIN: usize = 5;

#[derive(Debug, Clone, Copy, Default)]
pub struct DomainInference;

fn histogram(values: impl Iterator<Item = f64>, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for v in values {
        if v >= 0.0 && v < bins as f64 {
            h[v as usize] += 1.0;
        }
    }
    h
}

struct Run {
    variant: Variant,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "domain_inference"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(LaplaceMechanism::new())
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let width = data.columns().len();
        let domain: Vec<f64> = (0..width)
            .map(|j| match self.variant {
                Variant::Buggy => column(data, j).fold(0.0, f64::max) + 1.0,
                Variant::Fixed => DOMAIN as f64,
            })
            .collect();
        let domain = ctx.ensure_equality("domain", Value::Vector(domain))?;
        let domain = domain.as_vector().unwrap_or_default().to_vec();
        let mut marginals = Vec::new();
        for (j, size) in domain.iter().enumerate() {
            let bins = if size.is_finite() && *size > 0.0 { *size as usize } else { 0 };
            marginals.extend(histogram(column(data, j), bins));
        }
        let p = params(ctx, budget.epsilon, 0.0, width as f64)?;
        ctx.call("LM", p, Value::Vector(marginals))
    }
}

impl CorpusCase for DomainInference {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "domain_inference",
            summary: "marginal domain inferred from the data as max + 1",
            expected_violation: ViolationKind::InvarianceViolation,
            designated_audit: AuditKind::RecordReplay,
            adjacency: AdjacencyModel::AddRemove,
            strategy: Strategy::AddOutOfDomain,
            benign_strategies: vec![Strategy::RemoveRandom, Strategy::AddMarginal, Strategy::AddDuplicate],
            budget: DEFAULT_BUDGET,
            claimed_epsilon: DEFAULT_BUDGET.epsilon,
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant })
    }

    fn schema(&self) -> Vec<Column> {
        let hi = DOMAIN as i64 - 1;
        vec![Column::categorical("a", 0, hi), Column::categorical("b", 0, hi)]
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = gen_synthetic(29, 100, &self.schema()).expect("valid schema");
        let dp = d.with_row(vec![44.0, 2.0]).expect("row width matches");
        (d, dp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recorder::generate_traces;
    use crate::validator::validate_traces;

    #[test]
    fn inferred_domain_shifts_with_outlier() {
        let case = DomainInference;
        let (d, dp) = case.designated_pair();
        assert_eq!(column(&d, 0).fold(0.0, f64::max), 4.0);
        let run = |v: Variant, dp: &TabularDataset| {
            let pair = generate_traces(case.pipeline(v).as_ref(), &d, dp, DEFAULT_BUDGET, 8);
            validate_traces(&pair.record, &pair.replay).unwrap()
        };
        assert!(run(Variant::Buggy, &dp).has(ViolationKind::InvarianceViolation));
        assert!(run(Variant::Fixed, &dp).passed());
        assert!(run(Variant::Buggy, &d.with_row(vec![3.0, 1.0]).unwrap()).passed());
    }
}
