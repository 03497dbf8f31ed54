//! Exact-arithmetic toolkit for Cantor minimal systems presented as ordered
//! Bratteli diagrams.
//!
//! The crate models a Cantor minimal system as the infinite-path space of an
//! ordered Bratteli diagram together with the Vershik successor map. On top of
//! that it provides:
//!
//! * Kakutani-Rohlin tower partitions, exact Vershik action on the clopen cell
//!   algebra, telescoping and tower division ([`bratteli`]).
//! * The dimension group `K^0(X, alpha) = C(X, Z) / B_alpha` as a directed
//!   system of integer lattices, with certified equality, coboundary,
//!   divisibility, periodic-spectrum and mod-2 solving ([`kzero`]).
//! * Elements of the topological full group `[[alpha]]` and the constructive
//!   clopen-set exchange constructions ([`fullgroup`]).
//! * Synthesis of approximate conjugators between two systems from periodic
//!   spectrum data, with exact verification ([`conjsynth`]).
//! * Isometric circle cocycles, orientation straightening, the eta/omega
//!   corrections and the weak-approximate-conjugacy decision procedure for
//!   skew products on `X x T` ([`circle`]).
//! * Finite cyclic skew extensions `alpha x c` on `X x Z_m`, their periodic
//!   spectrum and the torsion of `K^0` relative to the base ([`extension`]).
//!
//! Everything is computed in exact integer or rational arithmetic. Verdicts
//! are three-valued (`yes` / `no` / `unknown`) and every `yes` or `no` carries
//! a machine-checkable certificate; `unknown` records the exhausted bound.

pub mod bratteli;
pub mod circle;
pub mod conjsynth;
pub mod error;
pub mod extension;
pub mod fullgroup;
pub mod intlin;
pub mod io;
pub mod kzero;
pub mod rational;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
