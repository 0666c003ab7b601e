//! Numerics engine certifying nonclassical space-time correlation properties
//! of radiation fields.
//!
//! The engine builds Hermitian matrices of normally-and-time-ordered field
//! moments over a truncated operator basis and tests them for negativity:
//! a negative principal minor (equivalently a negative eigenvalue) certifies
//! that no nonnegative classical probability functional can reproduce the
//! measured correlations. Alongside the matrix test it evaluates a family of
//! named inequality criteria (antibunching, higher-order intensity,
//! field-strength–intensity, and multipoint forms) from the same moments.
//!
//! Two correlation providers are implemented:
//!
//! * prepared multimode states in a truncated Fock basis ([`state`],
//!   [`moments`]) — Fock, coherent, thermal, squeezed, tensor products and
//!   classical mixtures;
//! * a resonantly driven two-level atom with radiative decay ([`atom`]) —
//!   multi-time source-field correlations evaluated through the quantum
//!   regression theorem at retarded times.
//!
//! The [`witness`] module assembles matrices and criteria from either
//! provider; [`config`], [`run`] and [`report`] form the CLI/reporting
//! surface (see the `ncwitness` binary).
//!
//! # Conventions (pinned for reproducibility)
//!
//! * Squeezing: `S(xi) = exp[(conj(xi) a^2 - xi adag^2)/2]`, `xi = r e^{i phi}`;
//!   at `phi = 0`, `<a^2> = -sinh(r) cosh(r)`.
//! * Atom: `H = -(Omega/2)(sigma_+ + sigma_-) + Delta sigma_+ sigma_-` in the
//!   rotating frame, Lindblad decay at rate `Gamma` on `sigma_-`; `Gamma = 1`
//!   sets the time unit.
//! * Field normalization: the positive-frequency field at a mode/point is the
//!   bare annihilator (unit mode function); for the atom,
//!   `E^+(r, t) = sigma_-(t - r)` with the retardation folded into the time
//!   argument. All implemented criteria are homogeneous in the prefactor.

pub mod atom;
pub mod config;
pub mod error;
pub mod linalg;
pub mod moments;
pub mod report;
pub mod run;
pub mod state;
pub mod witness;

pub use error::Error;
pub use linalg::{CMatrix, CVector, C64};

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
