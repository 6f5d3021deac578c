//! Liquid-level monitoring from frame sequences.
//!
//! The library processes a sequence of container images with segmentation
//! masks: masks are repaired morphologically, frames are reduced to a fused
//! grayscale, adjacent frames are differenced against a threshold, and each
//! frame pair is labeled with one of five level states — static low, static
//! high, rising, falling, or container moved — by either a rule set or a
//! small trained network. Around that core sit a pseudo-label quality engine
//! (mask scoring, filtering, augmentation), a deterministic synthetic scene
//! generator with exact ground truth, and corpus/evaluation plumbing.
//!
//! Everything is deterministic: random draws come from a single seeded
//! generator per consumer, and batch stages produce identical output at any
//! job count.

pub mod classify;
pub mod corpus;
pub mod diff;
pub mod engine;
pub mod error;
pub mod image;
pub mod io;
pub mod mask;
pub mod morphology;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
