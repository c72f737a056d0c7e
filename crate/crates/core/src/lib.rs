//! Periodic crystal-structure matching and the benchmark / curation tooling
//! built on top of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`], [`unimodular`], [`structure`], [`primitive`], [`synth`]:
//!   crystallographic primitives (cells, Niggli reduction, primitive cells,
//!   equivalent-cell generation).
//! * [`matcher`]: tolerance-gated matching of two structures with a
//!   normalized RMS displacement, optionally restricted to proper rotations.
//! * [`metrics`]: standard / k-match rates, METRe, cRMSE and tolerance sweeps.
//! * [`dedup`]: match-boundary searches, duplicate clustering, enantiomorph
//!   screening and uniqueness curves.
//! * [`splits`]: random, polymorph-aware, stratified and N-ordered splits.
//! * [`io`]: CIF (P1), extended XYZ, JSONL datasets and report files.

pub mod dedup;
pub mod error;
pub mod io;
pub mod lattice;
pub mod matcher;
pub mod metrics;
pub mod primitive;
pub mod splits;
pub mod structure;
pub mod synth;
pub mod unimodular;

pub use error::CrystalError;
pub use lattice::{cell_parameters, niggli_reduce, CellParameters, Lattice};
pub use matcher::{match_structures, MatchOptions, MatchResult, MatchTolerances};
pub use primitive::primitive_cell;
pub use structure::{reduced_composition, Composition, Structure};
pub use synth::{synth_equivalent_cell, SynthOptions};
pub use unimodular::UnimodularTransform;
