pub mod claims;
pub mod estimator;
pub mod gateway;
pub mod ingestion;
pub mod judgment;
pub mod model;
pub mod prompts;
pub mod rag;
pub mod pipeline;
pub mod report;
