//! Communication topologies and doubly-stochastic mixing matrices.
//!
//! Nodes sit on a directed circulant graph: node `i` listens to node `r`
//! exactly when `(i − r) mod n` is one of the topology's offsets. Every
//! offset set contains `0`, so each node always averages with itself.
//! Circulant structure buys two properties for free:
//!
//! - uniform in/out degree ⟹ uniform weights `1/d` give a **doubly
//!   stochastic** mixing matrix `W` (rows and columns sum to one), and
//! - `W` is **normal**, so its deviation from the averaging limit
//!   `W∞ = 𝟙𝟙ᵀ/n` has spectral norm equal to its second-largest eigenvalue
//!   modulus.
//!
//! The **spectral gap parameter** `λ := ‖W − W∞‖₂ ∈ [0, 1)` measures how
//! slowly a single gossip round contracts disagreement; all convergence
//! certificates in [`crate::analysis`] consume it.
//!
//! Key frozen values (pinned by tests):
//!
//! - complete graph: `λ = 0` for every `n`;
//! - directed ring (`offsets {0, 1}`), `n = 4`: `λ = √2 / 2`;
//! - exponential graph (`offsets {0} ∪ {2^j mod n}`), `n = 4`: `λ = 1/3`;
//! - exponential graph, `n = 8`: `λ = 1/2`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tol::{SPECTRAL_MAX_ITERS, SPECTRAL_REL_TOL, STOCHASTICITY_TOL};

/// Errors from topology construction and spectral estimation.
#[derive(Debug, Error)]
pub enum GraphError {
    /// A size or matrix argument is malformed.
    #[error("invalid graph parameter: {0}")]
    InvalidParameter(String),
    /// The requested topology cannot be realized at this size.
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
    /// The iterative spectral estimate did not reach its tolerance.
    #[error("spectral estimate stalled after {iterations} iterations")]
    SpectralEstimateStalled {
        /// Number of power-iteration steps performed before giving up.
        iterations: usize,
    },
}

/// Families of circulant communication graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    /// Offsets `{0} ∪ {2^j mod n : 0 ≤ j < ⌈log₂ n⌉}`: degree `O(log n)`
    /// with a size-independent spectral gap on power-of-two sizes.
    Exponential,
    /// Offsets `{0, 1}`: each node hears itself and one upstream
    /// neighbour. Sparsest connected option; gap degrades as `n` grows.
    Ring,
    /// All offsets: one gossip round averages exactly (`λ = 0`).
    Complete,
}

impl TopologyKind {
    /// Human-readable name, matching the configuration-file spelling.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Exponential => "exponential",
            TopologyKind::Ring => "ring",
            TopologyKind::Complete => "complete",
        }
    }
}

/// A circulant communication graph on `n` nodes.
///
/// Node `i` receives from node `r` exactly when `(i − r) mod n` is in
/// [`offsets`](Self::offsets). `0` is always present (self-loop).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    kind: TopologyKind,
    n: usize,
    offsets: BTreeSet<usize>,
}

impl Topology {
    /// Graph family this topology was built from.
    #[must_use]
    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    /// Number of nodes.
    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Circulant offsets: `i` listens to `r` iff `(i − r) mod n` is here.
    #[must_use]
    pub fn offsets(&self) -> &BTreeSet<usize> {
        &self.offsets
    }

    /// In-degree of every node (uniform by circulant structure).
    #[must_use]
    pub fn degree(&self) -> usize {
        self.offsets.len()
    }

    /// Nodes that node `i` receives from, in increasing offset order.
    ///
    /// # Panics
    ///
    /// Panics if `i >= self.n()`.
    #[must_use]
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        assert!(i < self.n, "node index {i} out of range for n = {}", self.n);
        self.offsets
            .iter()
            .map(|&d| (i + self.n - d % self.n) % self.n)
            .collect()
    }
}

/// A doubly-stochastic mixing matrix together with its spectral gap
/// parameter `λ = ‖W − W∞‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    /// The `n × n` mixing matrix. Row `i` holds the weights node `i`
    /// applies to incoming values.
    pub matrix: DMatrix<f64>,
    /// Spectral norm of the deviation from exact averaging; in `[0, 1)`.
    pub lambda: f64,
}

impl WeightMatrix {
    /// Number of nodes.
    #[must_use]
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

// ---- Topology construction ----------------------------------------------

/// Builds a circulant topology of the given family on `n` nodes.
///
/// # Arguments
///
/// * `kind` — graph family.
/// * `n` — number of nodes; must be ≥ 1 (≥ 2 for [`TopologyKind::Ring`],
///   which is degenerate on a single node).
///
/// # Errors
///
/// [`GraphError::InvalidParameter`] for `n = 0`, and
/// [`GraphError::UnsupportedTopology`] for a single-node ring.
///
/// # Example
///
/// ```
/// use saddlesim::graph::{build_topology, TopologyKind};
///
/// let t = build_topology(TopologyKind::Exponential, 8).unwrap();
/// let offsets: Vec<usize> = t.offsets().iter().copied().collect();
/// assert_eq!(offsets, vec![0, 1, 2, 4]);
/// ```
pub fn build_topology(kind: TopologyKind, n: usize) -> Result<Topology, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParameter(
            "topology size n must be at least 1".into(),
        ));
    }
    let offsets: BTreeSet<usize> = match kind {
        TopologyKind::Exponential => {
            // ⌈log₂ n⌉ doubling hops plus the self-loop.
            let mut offs = BTreeSet::from([0]);
            let hops = (usize::BITS - (n - 1).leading_zeros()) as usize;
            let mut step = 1usize;
            for _ in 0..hops {
                offs.insert(step % n);
                step *= 2;
            }
            offs
        }
        TopologyKind::Ring => {
            if n < 2 {
                return Err(GraphError::UnsupportedTopology(
                    "ring requires at least 2 nodes".into(),
                ));
            }
            BTreeSet::from([0, 1])
        }
        TopologyKind::Complete => (0..n).collect(),
    };
    Ok(Topology { kind, n, offsets })
}

/// Builds the uniform-weight mixing matrix of a topology and computes its
/// spectral gap parameter.
///
/// Row `i` holds weight `1/d` on each in-neighbour (including `i` itself),
/// where `d` is the uniform degree. Circulant structure makes the result
/// doubly stochastic; this is re-verified to absolute tolerance
/// [`STOCHASTICITY_TOL`] as an internal invariant.
///
/// # Errors
///
/// Propagates [`GraphError::SpectralEstimateStalled`] from the spectral-gap
/// computation, and reports [`GraphError::UnsupportedTopology`] if the
/// constructed matrix fails the doubly-stochastic check or does not contract
/// disagreement (`λ ≥ 1`).
pub fn make_weights(topology: &Topology) -> Result<WeightMatrix, GraphError> {
    let n = topology.n;
    let d = topology.degree() as f64;
    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for r in topology.in_neighbors(i) {
            w[(i, r)] = 1.0 / d;
        }
    }
    for i in 0..n {
        let row_sum: f64 = w.row(i).sum();
        let col_sum: f64 = w.column(i).sum();
        if (row_sum - 1.0).abs() > STOCHASTICITY_TOL || (col_sum - 1.0).abs() > STOCHASTICITY_TOL {
            return Err(GraphError::UnsupportedTopology(format!(
                "constructed weights are not doubly stochastic at node {i} \
                 (row sum {row_sum}, column sum {col_sum})"
            )));
        }
    }
    let lambda = spectral_gap(&w)?;
    if lambda >= 1.0 {
        return Err(GraphError::UnsupportedTopology(format!(
            "mixing matrix does not contract disagreement (λ = {lambda})"
        )));
    }
    Ok(WeightMatrix { matrix: w, lambda })
}

// ---- Spectral gap --------------------------------------------------------

/// Computes `‖W − W∞‖₂` for a doubly-stochastic `W`, where `W∞ = 𝟙𝟙ᵀ/n`.
///
/// Uses power iteration on `AᵀA` with `A = W − W∞`, started from a **seeded
/// pseudorandom** unit vector: the all-ones direction lies in the kernel of
/// `A`, so a constant start would estimate nothing. The Rayleigh quotient is
/// converged to relative tolerance [`SPECTRAL_REL_TOL`] and the result
/// cross-checked against dense SVD in the test suite.
///
/// # Errors
///
/// [`GraphError::InvalidParameter`] if `w` is empty or not square, and
/// [`GraphError::SpectralEstimateStalled`] if the Rayleigh quotient fails to
/// settle within [`SPECTRAL_MAX_ITERS`] iterations.
pub fn spectral_gap(w: &DMatrix<f64>) -> Result<f64, GraphError> {
    let n = w.nrows();
    if n == 0 || w.ncols() != n {
        return Err(GraphError::InvalidParameter(format!(
            "spectral gap needs a nonempty square matrix, got {}×{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if n == 1 {
        return Ok(0.0);
    }
    let winf = DMatrix::from_element(n, n, 1.0 / n as f64);
    let a = w - &winf;
    let at = a.transpose();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5ADD_7E51);
    let mut v = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    v /= v.norm();

    let mut prev = f64::INFINITY;
    for _ in 0..SPECTRAL_MAX_ITERS {
        let t = &at * (&a * &v);
        // ‖v‖ = 1, so this is the Rayleigh quotient of AᵀA: a σ² estimate.
        let ray = v.dot(&t);
        let t_norm = t.norm();
        if t_norm <= f64::MIN_POSITIVE {
            // A annihilates the iterate: the deviation operator is zero on
            // the reachable space (complete graph), so the gap is zero.
            return Ok(0.0);
        }
        v = t / t_norm;
        if (ray - prev).abs() <= SPECTRAL_REL_TOL * ray.max(f64::MIN_POSITIVE) {
            return Ok(ray.max(0.0).sqrt());
        }
        prev = ray;
    }
    Err(GraphError::SpectralEstimateStalled {
        iterations: SPECTRAL_MAX_ITERS,
    })
}

// ---- Tests ---------------------------------------------------------------
