//! Total variation flow, perimeter geometry, Cheeger cuts, calibrability
//! certificates and 1-Laplacian eigenpairs on finite state spaces carrying
//! a reversible random walk.
//!
//! The building block is [`space::RandomWalkSpace`]: a finite state set, a
//! row-stochastic kernel and a positive reversible measure, validated at
//! construction. On top of it sit exact finite-sum geometry
//! ([`geometry`]), ratio minimization and flux certificates ([`cheeger`]),
//! the implicit-Euler total variation flow with its decay and extinction
//! analysis ([`flow`]), isoperimetric profiles ([`iso`]), JSON/CSV formats
//! ([`io`]) and a registry of worked examples ([`fixtures`]).

pub mod cheeger;
pub mod fixtures;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod iso;
pub mod solver;
pub mod space;

pub use space::{RandomWalkSpace, SpaceError, StateFunction, StateSet};
