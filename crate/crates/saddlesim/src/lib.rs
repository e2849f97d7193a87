//! Distributed saddle-point optimization over simulated peer-to-peer networks.
//!
//! A network of `n` nodes cooperates to solve the min–max problem
//!
//! ```text
//!     min_x max_y  F(x, y) = (1/n) · Σ_i f_i(x, y),
//!     f_i(x, y)    = g_i(x) + ⟨y, P_i x⟩ − h_i(y),
//! ```
//!
//! where each node privately holds its own cost pieces `g_i`, `h_i` and its
//! own coupling matrix `P_i`, and may only exchange vectors with its graph
//! neighbours through a doubly-stochastic mixing matrix.
//!
//! The crate provides four layers, one module each:
//!
//! - [`graph`] — communication topologies, mixing matrices, and the spectral
//!   gap `λ` that controls how fast consensus averages information.
//! - [`problem`] — problem generators (quadratic, regression with strong or
//!   merely-convex regularizers, linearly constrained), gradient oracles,
//!   aggregate smoothness/convexity constants, and reference saddle points.
//! - [`solvers`] — the gradient-tracking saddle-point solver (with and
//!   without consensus on the coupling matrices), a plain distributed
//!   descent–ascent baseline, and a centralized reference loop; plus the
//!   certified stepsize policy.
//! - [`analysis`] — executable convergence theory: a six-dimensional error
//!   recursion with an entrywise contraction certificate, an exact linear
//!   iteration map for quadratic instances, and eigenvalue-perturbation
//!   checks that tie small-stepsize behaviour to a saddle matrix.
//!
//! Key design rules, enforced throughout:
//!
//! - **Determinism.** Every random draw flows from a caller-supplied `u64`
//!   seed through a counter-based generator; equal seeds give bitwise-equal
//!   problems, iterates, and traces.
//! - **Checked claims.** Numeric claims made by the analysis layer (error
//!   bounds, contraction factors, eigenvalue predictions) are verified
//!   against running solvers in the test suites, not merely printed.
//! - **Honest failure.** Divergence, assumption violations, and certificate
//!   failures are reported as data or typed errors — never masked.

// Validation guards are written `!(x > 0.0)` rather than `x <= 0.0` so that
// NaN falls on the rejecting side of every comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod graph;
pub mod problem;
pub mod solvers;
pub mod tol;
