//! Lucas-Interpretation engine: a tutoring backend that runs mathematical
//! programs step by step and checks student input against them.

pub mod calc;
pub mod interpreter;
pub mod knowledge;
pub mod parser;
pub mod program;
pub mod rewrite;
pub mod term;
pub mod service;
