//! Composition and simulation of quantum Markov components driven by Gaussian
//! (vacuum, thermal, squeezed) input fields.
//!
//! Components are SLH triples `(S, L, H)` over a truncated tensor-product
//! space. They compose with the series product and concatenation, and their
//! averaged dynamics under a Gaussian field state with second moments `(N, M)`
//! are generated by [`generators::gaussian_lindblad`]. Evolution lives in
//! [`dynamics`]; the degenerate parametric amplifier construction, whose
//! singular-coupling limit turns vacuum input into thermal noise, is in [`dpa`].

pub mod cli;
pub mod dpa;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod gaussian;
pub mod generators;
pub mod linalg;
pub mod operator;
pub mod par;
pub mod random;
pub mod slh;
pub mod superop;

pub use error::{Error, Result};
pub use gaussian::{BogoliubovMap, CovarianceMatrix, GaussianNoiseSpec};
pub use linalg::{ComplexMatrix, C64};
pub use operator::{HilbertSpec, Operator};
pub use par::Parallelism;
pub use slh::{SlhModel, StratonovichGenerator};
pub use superop::SuperOperator;
