//! Pathogenic social media account detection: cascades, causal scores, text
//! and topic features, classifiers and cross-validated evaluation.

pub mod cascade;
pub mod causal;
pub mod config;
pub mod corpus;
pub mod features;
pub mod stats;
pub mod textproc;
pub mod topics;
pub mod learn;
pub mod eval;
pub mod pipeline;
