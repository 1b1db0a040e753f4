//! Annotation-budget simulation for training a target-domain model from
//! labels bought exclusively in source domains.
//!
//! The crate is layered bottom-up:
//!
//! - [`corpus`]: multi-domain corpora, JSONL ingestion, the synthetic
//!   generator and the [`corpus::AnnotationPool`] that keeps source labels
//!   sealed until they are purchased.
//! - [`features`]: signed feature hashing for documents and token windows.
//! - [`neural`]: a one-hidden-layer MLP with hand-written gradients,
//!   label smoothing, gradient reversal, denoising pretraining and
//!   MC-dropout, plus a finite-difference checker.
//! - [`adapt`]: domain discriminators, proxy A-distance and the
//!   task-adapted variant used to pick the nearest source domain.
//! - [`strategies`]: uncertainty scores, batch selection and the registry
//!   of the eleven composed methods.
//! - [`engine`]: leave-one-out protocol, the active-learning loop,
//!   metrics, AUC, the resumable experiment matrix and reporting.

pub mod adapt;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod features;
pub mod neural;
pub mod rng;
pub mod strategies;

pub use error::{Error, Result};
