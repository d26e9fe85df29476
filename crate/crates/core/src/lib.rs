//! Discrete-state active inference: categorical beliefs, a factorized
//! generative model, exact state inference, expected free energy and
//! policy precision, plus a lane-yield driving scenario built on top.

pub mod behavior;
pub mod belief;
pub mod calibrate;
pub mod cli;
pub mod engine;
pub mod environment;
pub mod error;
pub mod model;
pub mod scenario;
pub mod sim;
pub mod tensor;
pub mod trace;

pub use belief::Categorical;
pub use engine::{Agent, EngineConfig, StepOutput};
pub use environment::{build_condition, ConditionScript, ObservationMode};
pub use error::{Error, Result};
pub use model::{GenerativeModel, ModelFile, ModelParts, ModelShape, Policy, ValidationReport};
pub use scenario::{build_model, ScenarioParams};
pub use sim::{run_condition, run_trial};
pub use trace::{summarize, SummaryRow, TrialTrace};
