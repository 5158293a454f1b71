//! Random relaxed projection methods for
//!
//! ```text
//! minimize (1/n) Σ fᵢ(x)   subject to   φⱼ(x) ≤ 0 (j = 1..m),  x ∈ C₀
//! ```
//!
//! where every `fᵢ` is smooth and convex, every `φⱼ` is convex (possibly
//! nonsmooth) and `C₀` is a set with a cheap exact projection.
//!
//! The main method ([`solvers::Algorithm::Vr3pm`]) combines an SVRG gradient
//! estimator with a projection onto the half-space linearization of one
//! randomly drawn constraint per iteration. The crate also ships the baseline
//! methods it is usually compared against, seeded LCQP/QCQP instance
//! generators, a projected-gradient reference solver, and an experiment
//! harness that writes CSV traces and fits log-log convergence rates.
//!
//! Indices are zero-based throughout.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod instances;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use model::{ConstraintFunction, DenseVector, ProblemInstance, SimpleSet, SmoothSummand};

/// Name of the pseudo-random generator used for every random stream.
pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64 + set_stream";

/// Name of the Gaussian sampler used by the instance generators.
pub const GAUSSIAN_NAME: &str = "ziggurat (rand_distr::StandardNormal)";
