//! Paired buggy/fixed pipelines with known privacy bugs.
//!
//! Each case is a small analog of a bug pattern found in real DP libraries.
//! The two variants differ by one localized change, and every case ships a
//! crafted neighbouring pair that triggers its bug plus a few benign
//! strategies that do not.

mod covariance;
mod domain;
mod double_spend;
mod jam;
mod linreg;
pub mod matrix;
mod noisy_sgd;
mod odometer;
pub mod privbayes;
mod scaled_count;
mod unguarded;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mechanisms::MechanismParams;
use crate::neighbors::{AdjacencyModel, Column, Strategy, TabularDataset};
use crate::recorder::{AuditContext, Budget, Halt, Pipeline};
use crate::validator::ViolationKind;

pub use covariance::CovarianceRelease;
pub use domain::DomainInference;
pub use double_spend::DoubleSpend;
pub use jam::JamLite;
pub use linreg::LinregObjective;
pub use matrix::{run_case, run_matrix, Matrix, MatrixConfig, MatrixRow};
pub use noisy_sgd::NoisySgdLite;
pub use odometer::Odometer;
pub use privbayes::PrivBayesLite;
pub use scaled_count::ScaledCount;
pub use unguarded::UnguardedInputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Buggy,
    Fixed,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Buggy, Variant::Fixed];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Buggy => "buggy",
            Variant::Fixed => "fixed",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buggy" => Ok(Variant::Buggy),
            "fixed" => Ok(Variant::Fixed),
            _ => Err(format!("unknown variant {s:?} (expected buggy or fixed)")),
        }
    }
}

/// Which audit is expected to catch a case's bug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    RecordReplay,
    Distributional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub expected_violation: ViolationKind,
    pub designated_audit: AuditKind,
    pub adjacency: AdjacencyModel,
    /// Strategy the crafted pair instantiates.
    pub strategy: Strategy,
    pub benign_strategies: Vec<Strategy>,
    pub budget: Budget,
    /// Epsilon the pipeline's guarantee is checked against.
    pub claimed_epsilon: f64,
    /// Exercises input validation rather than a logic bug.
    pub pathological: bool,
}

pub trait CorpusCase: Send + Sync {
    fn info(&self) -> CaseInfo;

    fn pipeline(&self, variant: Variant) -> Box<dyn Pipeline>;

    fn schema(&self) -> Vec<Column>;

    /// `(D, D')` that triggers the bug in the buggy variant.
    fn designated_pair(&self) -> (TabularDataset, TabularDataset);

    fn base_dataset(&self) -> TabularDataset {
        self.designated_pair().0
    }
}

/// Every registered case, in manifest order.
pub fn all_cases() -> Vec<Box<dyn CorpusCase>> {
    vec![
        Box::new(ScaledCount::default()),
        Box::new(CovarianceRelease),
        Box::new(PrivBayesLite::default()),
        Box::new(Odometer::default()),
        Box::new(NoisySgdLite::default()),
        Box::new(DomainInference),
        Box::new(DoubleSpend::default()),
        Box::new(LinregObjective::default()),
        Box::new(JamLite),
        Box::new(UnguardedInputs),
    ]
}

pub fn find_case(name: &str) -> Option<Box<dyn CorpusCase>> {
    all_cases().into_iter().find(|c| c.info().name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub variant: Variant,
    /// `None` for fixed variants.
    pub expected_violation: Option<ViolationKind>,
    pub adjacency: AdjacencyModel,
    pub strategy: Strategy,
    pub designated_audit: AuditKind,
    pub claimed_epsilon: f64,
    pub claimed_delta: f64,
}

/// Two entries per case: buggy then fixed.
pub fn manifest() -> Vec<ManifestEntry> {
    all_cases()
        .iter()
        .flat_map(|c| {
            let info = c.info();
            Variant::BOTH.map(|variant| ManifestEntry {
                name: info.name.to_owned(),
                variant,
                expected_violation: (variant == Variant::Buggy).then_some(info.expected_violation),
                adjacency: info.adjacency,
                strategy: info.strategy,
                designated_audit: info.designated_audit,
                claimed_epsilon: info.claimed_epsilon,
                claimed_delta: info.budget.delta,
            })
        })
        .collect()
}

fn params(ctx: &mut AuditContext, epsilon: f64, delta: f64, sensitivity: f64) -> Result<MechanismParams, Halt> {
    MechanismParams::new(epsilon, delta, sensitivity).map_err(|e| ctx.fail(e.to_string()))
}

fn column(d: &TabularDataset, j: usize) -> impl Iterator<Item = f64> + '_ {
    d.rows().iter().map(move |r| r[j])
}

/// Clips to `[lo, hi]`, sending NaN to `lo`.
fn censor(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

const DEFAULT_BUDGET: Budget = Budget { epsilon: 1.0, delta: 1e-6 };
