//! Numerical laboratory for a boundary-reaction problem with the degenerate
//! weight |x_n|^{1-2s} on the upper half plane.
//!
//! The library solves the variational problem whose energy is the weighted
//! Dirichlet integral plus a thin reaction term concentrated on the line
//! x_n = 0, drives the reaction-width parameter eps to zero, and measures the
//! quantitative structure of the limit: Weiss-type scaled energies, blowup
//! homogeneity, the explicit half-plane profile and its amplitude-mass
//! relation, and the Dirichlet-to-Neumann symbol of the weighted extension.

pub mod closed_forms;
pub mod error;
pub mod grid;
pub mod limit;
pub mod quad;
pub mod reaction;
pub mod solver;
pub mod weiss;

pub use error::{Error, Result};
pub use grid::{face_weight, Field, Grid, ThinField};
pub use reaction::ReactionProfile;
pub use solver::{ProblemParams, SolveReport};
