//! Reference implementation of QML, a first-order functional quantum
//! programming language with quantum data and quantum control but no
//! measurement.
//!
//! The pipeline is: parse (`parser`) -> typecheck under a strict linear
//! discipline (`typecheck`) -> evaluate to a complex matrix (`semantics`)
//! -> read the matrix back into a canonical term (`normalizer`).  The
//! `equations` module exposes the equational theory as replayable rewrite
//! rules, and `generator` produces random well-typed programs for fuzzing.

pub mod equations;
pub mod generator;
pub mod normalizer;
pub mod parser;
pub mod pretty;
pub mod semantics;
pub mod syntax;
pub mod typecheck;

/// Default numeric tolerance used by orthogonality tests, pseudo-inverses,
/// display pruning and matrix comparison.  Overridable everywhere via an
/// explicit parameter (the CLI exposes `--tol` / `QML_TOL`).
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

pub use syntax::{amp, Amplitude, CVal, Context, Pattern, QType, QVal, Term};
pub use typecheck::{infer, infer_classical, inner_product, orthogonal, IpResult, Judgement};

pub use normalizer::{equiv, nf, nf_classical};
pub use semantics::{eval_classical, eval_quantum, is_isometry, LinMap, Vector};
