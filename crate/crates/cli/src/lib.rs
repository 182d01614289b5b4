//! CLI, IO and file-format layer over the core analysis library: source
//! fetching, the AST cache, batch orchestration and the JSON audit report.

pub mod batch;
pub mod cache;
pub mod fetch;
pub mod history;
pub mod llm_http;
pub mod pipeline;
pub mod report;
