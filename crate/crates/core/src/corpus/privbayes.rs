//! One step of greedy Bayesian-network structure learning.
//!
//! The exponential mechanism picks the parent of the last attribute by
//! mutual information; a threshold on that MI decides whether the edge is
//! kept; the joint histogram is released with Laplace noise split over the
//! `n_features - k` conditionals. The buggy variant thresholds the private
//! MI and lets the noise scale reach zero when `k == n_features`.

use crate::mechanisms::{ExponentialMechanism, LaplaceMechanism, Registry};
use crate::neighbors::{AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::rng::DpRng;
use crate::validator::ViolationKind;
use crate::value::Value;

use super::{column, params, AuditKind, CaseInfo, CorpusCase, Variant, DEFAULT_BUDGET};

const FEATURES: usize = 3;
const ROWS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct PrivBayesLite {
    /// Degree parameter; `FEATURES - 1` keeps the noise scale positive.
    pub k: usize,
    /// Edges with MI (bits) at or below this are dropped.
    pub mi_threshold: f64,
}

impl Default for PrivBayesLite {
    fn default() -> Self {
        Self { k: FEATURES - 1, mi_threshold: 0.05 }
    }
}

/// Replace-one sensitivity of the mutual information (bits) between two binary attributes over `n` rows.
pub fn mi_sensitivity(n: usize) -> f64 {
    let n = n as f64;
    if n <= 1.0 {
        return 1.0;
    }
    (n.log2() + (n - 1.0) * (n / (n - 1.0)).log2()) / n
}

/// Mutual information in bits between binary columns `x` and `y`.
pub fn mutual_information(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut joint = [[0.0f64; 2]; 2];
    for (a, b) in x.iter().zip(y) {
        joint[(*a != 0.0) as usize][(*b != 0.0) as usize] += 1.0;
    }
    let px = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let py = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            if joint[i][j] > 0.0 {
                mi += joint[i][j] / n * (joint[i][j] * n / (px[i] * py[j])).log2();
            }
        }
    }
    mi
}

fn joint_histogram(d: &TabularDataset) -> Vec<f64> {
    let n = d.len().max(1) as f64;
    let mut h = vec![0.0; 1 << FEATURES];
    for r in d.rows() {
        let cell = r.iter().fold(0usize, |acc, x| (acc << 1) | (*x != 0.0) as usize);
        h[cell] += 1.0 / n;
    }
    h
}

struct Run {
    variant: Variant,
    k: usize,
    mi_threshold: f64,
}

impl Pipeline for Run {
    fn name(&self) -> &str {
        "privbayes_lite"
    }

    fn registry(&self) -> Registry {
        Registry::new().with(ExponentialMechanism::new()).with(LaplaceMechanism::new())
    }

    fn run(&self, data: &TabularDataset, budget: Budget, ctx: &mut AuditContext) -> Result<Value, Halt> {
        let n = data.len();
        let eps_part = budget.epsilon / 3.0;
        let child: Vec<f64> = column(data, FEATURES - 1).collect();
        let mi: Vec<f64> = (0..FEATURES - 1)
            .map(|j| mutual_information(&child, &column(data, j).collect::<Vec<_>>()))
            .collect();
        let s = mi_sensitivity(n);

        let p = params(ctx, eps_part, 0.0, s)?;
        let candidate = ctx.call("EM", p, Value::Vector(mi.clone()))?;
        let idx = candidate.as_index().ok_or_else(|| ctx.fail("selection did not return an index"))?;
        let p = params(ctx, eps_part, 0.0, s)?;
        let noisy_mi = ctx.call("LM", p, Value::Real(mi[idx]))?;
        let operand = match self.variant {
            Variant::Buggy => Value::Real(mi[idx]),
            Variant::Fixed => noisy_mi,
        };
        let operand = ctx.ensure_equality("mi_at_candidate", operand)?.as_real().unwrap_or(f64::NAN);
        let parents: Vec<f64> = if self.mi_threshold >= operand { vec![] } else { vec![idx as f64] };

        let conditionals = FEATURES.saturating_sub(self.k);
        let guarded = match self.variant {
            Variant::Buggy => conditionals,
            Variant::Fixed => conditionals.max(1),
        };
        let eps_each = eps_part / conditionals.max(1) as f64;
        let scale = 2.0 * guarded as f64 / (n.max(1) as f64 * eps_part);
        let p = params(ctx, eps_each, 0.0, 2.0 / n.max(1) as f64)?.with_scale(scale);
        let hist = ctx.call("LM", p, Value::Vector(joint_histogram(data)))?;
        Ok(Value::map([("parents", Value::Vector(parents)), ("histogram", hist)]))
    }
}

impl PrivBayesLite {
    /// Parent and child agree with probability 0.8, the other column is independent.
    fn base(&self) -> TabularDataset {
        let mut rng = DpRng::seed_from_u64(23);
        let rows = (0..ROWS)
            .map(|_| {
                let a = (rng.uniform() < 0.5) as u8 as f64;
                let b = (rng.uniform() < 0.5) as u8 as f64;
                let c = if rng.uniform() < 0.8 { a } else { 1.0 - a };
                vec![a, b, c]
            })
            .collect();
        TabularDataset::new(self.schema(), rows).expect("rows match schema")
    }
}

impl CorpusCase for PrivBayesLite {
    fn info(&self) -> CaseInfo {
        CaseInfo {
            name: "privbayes_lite",
            summary: "edge threshold compared against the private MI; noise scale zero when k equals the feature count",
            expected_violation: ViolationKind::InvarianceViolation,
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
        Box::new(Run { variant, k: self.k, mi_threshold: self.mi_threshold })
    }

    fn schema(&self) -> Vec<Column> {
        (0..FEATURES).map(|j| Column::categorical(format!("c{j}"), 0, 1)).collect()
    }

    fn designated_pair(&self) -> (TabularDataset, TabularDataset) {
        let d = self.base();
        let mut row = d.rows()[0].clone();
        row[FEATURES - 1] = 1.0 - row[FEATURES - 1];
        let dp = d.with_replaced(0, row).expect("row width matches");
        (d, dp)
    }
}
