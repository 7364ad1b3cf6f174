//! Visual program synthesis on a synthetic scene world.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`scene`] generates deterministic 2-D box worlds and typed question/answer
//!   tasks whose gold answers are computed exactly from the scene graph.
//! - [`lang`] defines VPL, a restricted imperative language whose surface
//!   syntax mirrors `ImagePatch`-style visual programs, with a parser,
//!   pretty-printer, normalizer, and grammar-derivation extraction.
//! - [`exec`] runs parsed programs against a scene through the `ImagePatch`
//!   API with seedable perception noise and hard step limits.
//! - [`reward`] scores execution results against task annotations with the
//!   binary reward and the evaluation metrics used in reports.
//! - [`policy`] is the program generator: a trainable query-conditioned
//!   weighted grammar plus an HTTP completion-endpoint client, sharing one
//!   prompt assembler.
//! - [`selftrain`] orchestrates grow / filter / improve iterations with
//!   resumable run-state persistence and fine-tune-dataset export.
//! - [`analytics`] turns trajectory dumps into plot-ready syntactic-structure
//!   tables.

pub mod analytics;
pub mod exec;
pub mod lang;
pub mod policy;
pub mod reward;
pub mod scene;
pub mod selftrain;
pub mod util;
