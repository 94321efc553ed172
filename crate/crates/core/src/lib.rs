//! Label-space toolkit for soil-horizon classification pipelines.
//!
//! The crate bundles the pieces of a horizon-labeling pipeline that are pure
//! computation: the KA5-style label grammar, the rooted label taxonomy with
//! mixture leaves, similarity-faithful unit-sphere label embeddings, rare-label
//! clustering by edit distance, nearest-embedding decoding, the evaluation
//! metrics used for depth segmentation and hierarchical classification, and a
//! seeded generator of synthetic profile records for end-to-end testing.
//!
//! The crate is `no_std`-compatible (`alloc` required); disable the default
//! `std` feature and enable `libm` for embedded targets. File formats, CLI and
//! all other IO live in the companion `htk-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("htk-core requires either the `std` or the `libm` feature");

pub mod cluster;
pub mod decode;
pub mod embed;
pub mod grammar;
mod math;
pub mod metrics;
pub mod simgen;
pub mod taxonomy;

pub use grammar::{HorizonLabel, MainSymbol, SimpleLabel};
pub use taxonomy::TaxonomyGraph;
