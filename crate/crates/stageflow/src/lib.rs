//! Staged-flow TSP relaxation toolkit.
//!
//! The library reconstructs a staged-flow linear relaxation of the asymmetric
//! TSP, builds a 51-node instance on which that relaxation admits an exact
//! fractional certificate far below the integral optimum, and verifies the
//! certificate constraint family by constraint family in exact rational
//! arithmetic.
//!
//! Module map:
//! - [`rat`]: exact rational helpers.
//! - [`graph`]: instance types and text formats.
//! - [`canonical`]: the 51-node instance, its 23-node seed, and their tables.
//! - [`reduce`]: Hamiltonian-cycle to TSP reductions and node splitting.
//! - [`oracle`]: exact integral solvers (Hamiltonian search, dynamic
//!   programming, branch and bound) and tour counting.
//! - [`model`]: stage-arc variables, constraint families, LP export.
//! - [`certificate`]: the fractional stage-flow certificates.
//! - [`lift`]: conditional-flow construction (the 6-index variables).
//! - [`verify`]: streaming family verification, verdicts, mutation checks.

pub mod canonical;
pub mod certificate;
pub mod graph;
pub mod lift;
pub mod model;
pub mod oracle;
pub mod rat;
pub mod reduce;
pub mod verify;
