//! Anchored fixed-point iteration toolkit for strongly nonexpansive
//! operator sequences in Euclidean space.
//!
//! The crate is organized around a small set of building blocks:
//!
//! * [`space`] — vectors of `R^d` with the inner product, norm, and the
//!   subdifferential inequality gap used throughout the convergence
//!   diagnostics.
//! * [`operators`] — a library of nonexpansive operators (projections onto
//!   closed convex sets, separable proximal resolvents) and the two
//!   combinators that preserve fixed-point structure: relaxation with the
//!   identity and convex combination.
//! * [`sequences`] — operator sequences `n -> S_n` together with validated
//!   parameter schedules and the reference operator their asymptotic fixed
//!   points are measured against.
//! * [`iterate`] — the anchored iteration drivers (Halpern, viscosity,
//!   proximal, common-fixed-point) and the implicit anchor path, each
//!   producing a full diagnostic trace.
//! * [`verify`] — executable forms of the scalar recursion lemmas and
//!   empirical certification probes for the strong-nonexpansiveness and
//!   residual-transfer properties.
//! * [`oracle`] — independent ground-truth computations (active-set
//!   enumeration cross-checked against Dykstra's algorithm, scalar
//!   minimization) used to certify iteration limits without circularity.
//! * [`cli`] — problem-spec parsing and the subcommand implementations
//!   behind the `fixedpoint` binary.

pub mod cli;
pub mod iterate;
pub mod operators;
pub mod oracle;
pub mod sequences;
pub mod space;
pub mod verify;

mod error;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
