//! Occupancy mapping with a Haar-wavelet octree and a beam-based inverse
//! sensor model.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Octant loops index several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod beam_model;
pub mod config;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod haar;
pub mod integrator;
pub mod observation;
pub mod obslog;
pub mod sim;
pub mod tree;
pub mod units;
