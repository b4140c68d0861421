//! Data-grounded prompt construction and iterative repair for LLM-generated
//! scientific analysis scripts.

pub mod disambiguate;
pub mod bench;
pub mod embedding;
pub mod gateway;
pub mod pipeline;
pub mod repair;
pub mod retrieval;
pub mod schema;
