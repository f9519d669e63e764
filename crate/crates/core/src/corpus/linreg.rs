//! Objective perturbation for one-feature least squares.
//!
//! The data-dependent coefficients `[sum x^2, sum xy]` of the squared loss
//! are released with folded Laplace noise. Each coefficient moves by at
//! most `max(|lo|, |hi|)^2` per row; the buggy variant uses the lower bound
//! twice.

use crate::mechanisms::{LaplaceMechanism, Registry};
use crate::neighbors::{gen_synthetic, AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{censor, params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy)]
pub struct LinregObjective {
    pub lo: f64,
    pub hi: f64,
}

impl Default for LinregObjective {
    fn default() -> Self {
        Self { lo: 0.0, hi: 2.0 }
    }
}

impl LinregObjective {
    /// Declared L1 sensitivity of the two coefficients.
    pub fn declared_sensitivity(&self, variant: Variant) -> f64 {
        let bound = match variant {
            Variant::Buggy => self.lo.abs().max(self.lo.abs()),
            Variant::Fixed => self.lo.abs().max(self.hi.abs()),
        };
        2.0 * bound * bound
    }
}

struct Run {
    variant: Variant,
    case: LinregObjective,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "linreg_objective"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(LaplaceMechanism::new().folded())
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let (lo, hi) = (self.case.lo, self.case.hi);
        let mut coef = vec![0.0; 2];
        for r in data.rows() {
            let (x, y) = (censor(r[0], lo, hi), censor(r[1], lo, hi));
            coef[0] += x * x;
            coef[1] += x * y;
        }
        let p = params(ctx, budget.epsilon, 0.0, self.case.declared_sensitivity(self.variant))?;
        ctx.call("LM", p, Value::Vector(coef))
    }
}

impl CorpusCase for LinregObjective {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "linreg_objective",
            summary: "coefficient sensitivity built from the lower bound twice",
            expected_violation: ViolationKind::SensitivityViolation,
            designated_audit: AuditKind::RecordReplay,
            adjacency: AdjacencyModel::AddRemove,
            strategy: Strategy::AddUniform,
            benign_strategies: vec![Strategy::RemoveRandom, Strategy::AddMarginal, Strategy::AddDuplicate],
            budget: DEFAULT_BUDGET,
            claimed_epsilon: DEFAULT_BUDGET.epsilon,
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant, case: *self })
    }

    fn schema(&self) -> Vec<Column> {
        vec![Column::real("x", self.lo, self.hi), Column::real("y", self.lo, self.hi)]
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = gen_synthetic(37, 50, &self.schema()).expect("valid schema");
        let dp = d.with_row(vec![self.hi, self.hi]).expect("row width matches");
        (d, dp)
    }
}
