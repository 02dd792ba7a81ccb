//! Conditional front-door identification and CFDiVAE-based treatment effect
//! estimation.

pub mod autodiff;
pub mod bench;
pub mod cfdivae;
pub mod dataset;
pub mod discrete;
pub mod estimator;
pub mod graph;
pub mod scm;
pub mod seed;
