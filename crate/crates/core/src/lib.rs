//! Exact verification workbench for depth-r projector identities on p-adic groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`affine_apartment`] builds refined polysimplicial decompositions of one apartment.
//! * [`convex_combinatorics`] implements the basic subcomplexes, the chamber sets and the retraction.
//! * [`projector_stabilizer`] holds the symbolic signed sums and their telescoping certificates.
//! * [`moy_prasad_lattices`] is threshold calculus for filtration lattices and their duals.
//! * [`sl2_padic_engine`] realises the groups of SL2 over Q_p at finite precision.
//! * [`lie_fourier`] is a finite model of the Lie algebra with its Fourier transform.
//! * [`steinberg_finite`] covers the Steinberg representation of SL2 over a prime field.
//! * [`cli_runner`] orchestrates batches of checks and emits reports.

pub mod affine_apartment;
pub mod cli_runner;
pub mod convex_combinatorics;
pub mod error;
pub mod lie_fourier;
pub mod moy_prasad_lattices;
pub mod projector_stabilizer;
pub mod rational;
pub mod sl2_padic_engine;
pub mod steinberg_finite;

pub use error::{Error, Result};
pub use rational::Q;
