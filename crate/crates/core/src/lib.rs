//! Codazzi-field calculus on discretized surface charts.
//!
//! The crate is organised bottom-up:
//!
//! - [`j_calculus`]: exact 2×2 matrix calculus with the standard complex structure.
//! - [`fields`]: grids, node fields and the conformal-metric differential operators.
//! - [`energy_variation`]: the (1,0)-energy, its gradient, second variation and the
//!   curvature correction term.
//! - [`one_harmonic`]: Newton/continuation solver for one-harmonic diffeomorphisms.
//! - [`teich_variation`]: the trace functional and its derivatives along quadratic families.
//! - [`embedding`]: equivariant immersions into Minkowski space from Codazzi fields.
//! - [`symmetric_space`]: the lorentzian geometry of positive symmetric matrices.
//! - [`diagnostics`]: intermediate complex structures, α-harmonicity and collar bounds.
//! - [`cli`]: the `codazzi` command-line front end.

pub mod cli;
pub mod diagnostics;
pub mod embedding;
pub mod energy_variation;
pub mod fields;
pub mod fixtures;
pub mod j_calculus;
pub mod linalg;
pub mod one_harmonic;
pub mod rng;
pub mod symmetric_space;
pub mod teich_variation;

pub use fields::{ConformalMetric, EndoField, Grid, ScalarField, Topology, VectorField};
pub use j_calculus::{Mat2, SpdMat2};
