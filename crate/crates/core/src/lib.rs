//! Core library of `tsfuzz`: a closed-loop fuzzing engine that evolves
//! adversarial 5G network configurations with NSGA-II to expose stability,
//! QoE, and fairness failures in traffic-steering policies, plus the
//! statistical machinery to compare it against a deterministic testing
//! baseline.
//!
//! Layering, bottom up:
//!
//! - [`channel`]: analytic radio model (path loss, shadowing, SINR, Shannon
//!   throughput)
//! - [`netstate`]: time-stepped network state, mobility, handovers
//! - [`kpi`]: window KPIs, thresholds, vulnerability classification
//! - [`genome`]: configuration vectors, scenario bounds, encode/decode
//! - [`policies`]: the five traffic-steering policies under test
//! - [`objectives`]: the simulate-and-score loop mapping a genome to a
//!   three-objective fitness vector
//! - [`nsga2`]: the multi-objective evolutionary engine
//! - [`stats`]: Welch t, Mann-Whitney U, Cohen's d, Shannon diversity, CIs
//! - [`campaign`]: fuzzing-vs-traditional experiment orchestration
//! - [`report`]: CSV/JSON artifact formats
//! - [`config`]: the user-facing configuration schema

pub mod campaign;
pub mod channel;
pub mod config;
pub mod error;
pub mod genome;
pub mod kpi;
pub mod netstate;
pub mod nsga2;
pub mod objectives;
pub mod policies;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
