//! Second-moment release of two bounded columns.
//!
//! Both variants clip the data into `newdata`; the buggy one then computes
//! the statistic on the raw rows anyway.

use crate::mechanisms::{LaplaceMechanism, Registry};
use crate::neighbors::{gen_synthetic, AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{censor, params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

const LO: f64 = 0.0;
const HI: f64 = 1.0;
/// L1 bound on `[a^2, ab, b^2]` for one row in `[LO, HI]^2`.
const SENSITIVITY: f64 = 3.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct CovarianceRelease;

struct Run {
    variant: Variant,
}

fn moments(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut s = vec![0.0; 3];
    for r in rows {
        s[0] += r[0] * r[0];
        s[1] += r[0] * r[1];
        s[2] += r[1] * r[1];
    }
    s
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "covariance_release"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(LaplaceMechanism::new())
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let newdata: Vec<Vec<f64>> =
            data.rows().iter().map(|r| r.iter().map(|x| censor(*x, LO, HI)).collect()).collect();
        let stat = match self.variant {
            Variant::Buggy => moments(data.rows()),
            Variant::Fixed => moments(&newdata),
        };
        let p = params(ctx, budget.epsilon, 0.0, SENSITIVITY)?;
        ctx.call("LM", p, Value::Vector(stat))
    }
}

impl CorpusCase for CovarianceRelease {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "covariance_release",
            summary: "statistic computed on the raw data instead of the clipped copy",
            expected_violation: ViolationKind::SensitivityViolation,
            designated_audit: AuditKind::RecordReplay,
            adjacency: AdjacencyModel::AddRemove,
            strategy: Strategy::AddOutOfDomain,
            benign_strategies: vec![Strategy::RemoveRandom, Strategy::AddUniform, Strategy::AddDuplicate],
            budget: DEFAULT_BUDGET,
            claimed_epsilon: DEFAULT_BUDGET.epsilon,
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant })
    }

    fn schema(&self) -> Vec<Column> {
        vec![Column::real("a", LO, HI), Column::real("b", LO, HI)]
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = gen_synthetic(11, 50, &self.schema()).expect("valid schema");
        let dp = d.with_row(vec![1e6, 0.5]).expect("row width matches");
        (d, dp)
    }
}
