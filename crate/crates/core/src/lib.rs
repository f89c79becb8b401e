//! Generation of in-group asset condition data.
//!
//! Degradation, correlation, and categorical models are fitted to periodic
//! inspection records and combined into per-condition predictors. Those
//! predictors generate synthetic condition data (optionally diversified with
//! Gaussian noise), which feeds health-index prediction and sequential Monte
//! Carlo reliability and cost assessment.

// `!(x >= 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combination;
pub mod correlation;
pub mod data;
pub mod degradation;
pub mod fixture;
pub mod generation;
pub mod health_index;
pub mod lstsq;
pub mod metrics;
pub mod reliability;
pub mod seed;
pub mod stochastic;
pub mod validation;
