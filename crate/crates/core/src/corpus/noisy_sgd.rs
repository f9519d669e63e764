//! A few steps of noisy gradient descent for logistic regression.
//!
//! Per-example gradients are clipped to L2 norm `clip`, summed, noised by
//! the Gaussian mechanism and averaged over the expected batch size. The
//! buggy variant derives that size from the private row count.

use crate::mechanisms::{GaussianMechanism, Registry};
use crate::neighbors::{gen_synthetic, AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{params, AuditKind, CaseInfo, CorpusCase, Variant};

const ROWS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct NoisySgdLite {
    pub adjacency: AdjacencyModel,
    pub steps: usize,
    pub learning_rate: f64,
    pub clip: f64,
    pub sample_rate: f64,
    /// Public batch size used by the fixed variant.
    pub expected_batch_size: usize,
}

impl Default for NoisySgdLite {
    fn default() -> Self {
        Self {
            adjacency: AdjacencyModel::AddRemove,
            steps: 5,
            learning_rate: 0.5,
            clip: 1.0,
            sample_rate: 0.05,
            expected_batch_size: 10,
        }
    }
}

fn clipped_gradient(theta: &[f64; 2], x: f64, y: f64, clip: f64) -> [f64; 2] {
    let z = theta[0] * x + theta[1];
    let r = 1.0 / (1.0 + (-z).exp()) - y;
    let g = [r * x, r];
    let norm = g[0].hypot(g[1]);
    let f = if norm > clip { clip / norm } else { 1.0 };
    [g[0] * f, g[1] * f]
}

struct Run {
    variant: Variant,
    cfg: NoisySgdLite,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "noisy_sgd_lite"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(GaussianMechanism::new())
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let c = &self.cfg;
        let batch = match self.variant {
            Variant::Buggy => (data.len() as f64 * c.sample_rate).floor() as i64,
            Variant::Fixed => c.expected_batch_size as i64,
        };
        let batch = ctx.ensure_equality("expected_batch_size", Value::Int(batch))?;
        let batch = match batch {
            Value::Int(b) => b.max(1) as f64,
            _ => 1.0,
        };
        let sensitivity = match c.adjacency {
            AdjacencyModel::AddRemove => c.clip,
            AdjacencyModel::ReplaceOne => 2.0 * c.clip,
        };
        let steps = c.steps.max(1) as f64;
        let mut theta = [0.0; 2];
        for _ in 0..c.steps {
            let mut sum = [0.0; 2];
            for r in data.rows() {
                let g = clipped_gradient(&theta, r[0], r[1], c.clip);
                sum[0] += g[0];
                sum[1] += g[1];
            }
            let p = params(ctx, budget.epsilon / steps, budget.delta / steps, sensitivity)?;
            let noisy = ctx.call("GM", p, Value::Vector(sum.to_vec()))?;
            let noisy = noisy.as_vector().ok_or_else(|| ctx.fail("gradient release lost its shape"))?.to_vec();
            theta[0] -= c.learning_rate * noisy[0] / batch;
            theta[1] -= c.learning_rate * noisy[1] / batch;
        }
        Ok(Value::Vector(theta.to_vec()))
    }
}

impl CorpusCase for NoisySgdLite {
    fn info(&self) -> CaseInfo {
        let budget = Budget { epsilon: 1.0, delta: 1e-5 };
        CaseInfo {
            name: "noisy_sgd_lite",
            summary: "expected batch size derived from the private dataset length",
            expected_violation: ViolationKind::InvarianceViolation,
            designated_audit: AuditKind::RecordReplay,
            adjacency: self.adjacency,
            strategy: Strategy::RemoveRandom,
            benign_strategies: vec![Strategy::AddUniform, Strategy::AddMarginal, Strategy::AddDuplicate],
            budget,
            claimed_epsilon: budget.epsilon,
            pathological: false,
        }
    }

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline> {
        Box::new(Run { variant, cfg: *self })
    }

    fn schema(&self) -> Vec<Column> {
        vec![Column::real("x", -1.0, 1.0), Column::categorical("y", 0, 1)]
    }

    /// Drops the last row under add/remove; flips its label under replace-one.
    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = gen_synthetic(17, ROWS, &self.schema()).expect("valid schema");
        let dp = match self.adjacency {
            AdjacencyModel::AddRemove => d.without_row(ROWS - 1),
            AdjacencyModel::ReplaceOne => {
                let mut row = d.rows()[ROWS - 1].clone();
                row[1] = 1.0 - row[1];
                d.with_replaced(ROWS - 1, row).expect("row width matches")
            }
        };
        (d, dp)
    }
}
