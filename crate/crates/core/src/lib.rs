//! Simulation and verification toolkit for random walks on bubble Schreier
//! graphs, the groups they generate, and lamp-group wreath products over
//! them.
//!
//! The crate is organized around the objects of study:
//!
//! - [`scaling`]: the cycle-length sequences `alpha_k` parameterizing
//!   everything else.
//! - [`graph`]: the infinite tree-of-cycles graph `S(alpha)`, addressed
//!   lazily, with exact distances, balls and volume counts.
//! - [`zline`]: the lazy walk on the integers obtained by projecting the
//!   generators, with an exact confinement-probability solver.
//! - [`orbit`]: inverted orbits of words acting on the graph, their radii
//!   under confinement conditioning, and displacement bounds.
//! - [`group`]: element equality via action fingerprints and exhaustive
//!   counting of elements with small inverted orbits.
//! - [`wreath`]: the lamp-group wreath product, switch-walk-switch random
//!   walk, and a harmonic-function estimator.
//! - [`analysis`]: electrical flow energy, transience diagnostics, volume
//!   exponents and the return-probability lower-bound pipeline.

pub mod analysis;
pub mod error;
pub mod graph;
pub mod group;
pub mod orbit;
pub mod rng;
pub mod scaling;
pub mod wreath;
pub mod zline;

pub use error::{Error, Result};
pub use graph::{BitPath, Dist, Letter, VertexAddress, ROOT};
pub use orbit::{ConfinementReport, InvertedOrbitTrace, Word};
pub use scaling::{AssumptionReport, RuleKind, ScalingRule};
pub use wreath::{LampConfig, SwsSummary, WreathElement};
