//! Grey-box auditing of differential-privacy pipelines.
//!
//! A pipeline is run twice: once on a dataset `D` in record mode, logging
//! every privacy primitive it invokes, and once on a neighbouring dataset
//! `D'` in replay mode, where every primitive returns the output frozen in
//! the record trace. The two traces are then compared call by call
//! ([`validator`]) and, optionally, turned into a composed privacy-loss
//! estimate ([`distaudit`]).
//!
//! The `parallel` feature (on by default) runs sampling replicates and
//! corpus sweeps on the rayon thread pool. Without it every data-parallel
//! loop falls back to a sequential iterator; results are bit-identical
//! either way.

pub mod accountant;
pub mod corpus;
pub mod distaudit;
pub mod exec;
pub mod mechanisms;
pub mod neighbors;
pub mod recorder;
pub mod rng;
pub mod validator;
pub mod value;

mod float_repr;

pub use mechanisms::{AuditSpec, MechanismParams, Metric, Primitive};
pub use recorder::{AuditContext, Budget, Pipeline, Trace};
pub use rng::DpRng;
pub use value::Value;
