//! Toolkit for censusing vectors mutually unbiased to a basis pair {I, H}.
//!
//! Given a complex Hadamard matrix H of dimension d, the columns of H form a
//! basis mutually unbiased (MU) to the standard basis I. Every further vector
//! MU to both is a zero of a system of 2(d-1) real quadratic equations. This
//! crate builds those systems, solves them rigorously, and reports how the
//! solutions assemble into additional MU bases.
//!
//! Pipeline, one module per stage:
//!
//! * [`catalog`] — construct, validate, dephase and compare the known
//!   complex Hadamard matrices of dimension ≤ 7 (Fourier, Dita, Hermitean,
//!   symmetric, Szollosi, circulant, spectral families).
//! * [`polysys`] — translate {I, H} into the MU polynomial system, in exact
//!   Q(√3) coefficients or rational approximations.
//! * [`groebner`] — reduced Groebner bases via Buchberger's algorithm, with
//!   an optional order-conversion route for large lex computations.
//! * [`realroots`] — Sturm-sequence isolation plus certified triangular
//!   back-substitution: every real solution, refined to requested digits.
//! * [`analyzer`] — unit vectors from solutions, certified pair
//!   classification, and the census (N_v, N_t, N_p, base structure).
//! * [`numcheck`] — independent multistart Newton oracle for cross-checks
//!   and lower bounds.
//! * [`harness`] — parameter-grid campaigns with a resumable JSONL store
//!   and CSV/JSONL export.

pub mod analyzer;
pub mod apf;
pub mod catalog;
pub mod groebner;
pub mod harness;
pub mod numcheck;
pub mod polysys;
pub mod rat;
pub mod realroots;

/// Software version recorded in result provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
