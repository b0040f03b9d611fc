//! Spectral laboratory for a third-order dispersive flow of closed curves
//! into embedded almost Hermitian manifolds.
//!
//! The crate exposes, as separately testable numerical objects:
//!
//! - a periodic spectral layer (grids, Fourier multipliers with parity
//!   metadata, dealiased products) in [`grid`] and [`multiplier`];
//! - explicit embedded targets (round two- and six-spheres, the flat
//!   complex line) with projection, retraction, almost complex structure
//!   and curvature in [`manifold`];
//! - the pullback covariant calculus along closed curves and the flow
//!   right-hand side in [`covariant`];
//! - a scalar linear dispersive problem with its gauge, commutator
//!   remainders and energy inequality in [`linear`];
//! - the bundle gauge, gauged energy and cancellation probe in [`gauge`];
//! - integrating-factor time stepping, presets and the regularization
//!   continuation in [`flow`];
//! - rate probes, growth-constant fits and per-time records in
//!   [`diagnostics`];
//! - file emission (CSV, SVG, binary snapshots) in [`report`].

pub mod covariant;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod gauge;
pub mod grid;
pub mod linear;
pub mod manifold;
pub mod multiplier;
pub mod report;

pub use error::{Error, Result};
