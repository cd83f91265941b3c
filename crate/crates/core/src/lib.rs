pub mod build;
pub mod context;
pub mod diff;
pub mod eval;
pub mod generate;
pub mod java;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod refine;
pub mod workspace;
