//! Core engine of a self-hostable N-of-1 trial platform.
//!
//! * [`model`]: the study-definition format, its validation and canonical encoding.
//! * [`expression`]: eligibility expressions and the step-by-step questionnaire flow.
//! * [`schedule`]: crossover phase sequences, daily task plans and progress accounting.
//! * [`analysis`]: data-reference resolution, average sections and the regression report.

pub mod analysis;
pub mod enrollment;
pub mod expression;
pub mod fixtures;
pub mod model;
pub mod schedule;
