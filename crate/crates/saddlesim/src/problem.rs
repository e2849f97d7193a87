//! Saddle-point problem instances, gradient oracles, and reference solutions.
//!
//! Every instance is a network objective
//!
//! ```text
//!     F(x, y) = (1/n) Σ_i f_i(x, y),
//!     f_i(x, y) = g_i(x) + ⟨y, P_i x⟩ − h_i(y),
//! ```
//!
//! with `x ∈ R^{p_x}`, `y ∈ R^{p_y}`, and per-node private data. Four local
//! cost families are supported ([`LocalCost`]):
//!
//! - **quadratic** — `g_i = xᵀQ_i x + q_iᵀx`, `h_i = yᵀR_i y + r_iᵀy`;
//! - **regression, strongly convex regularizer** — the saddle reformulation
//!   of `min_x (1/2n)Σᵢ‖data_i·x − b_i‖²_{C_i⁻¹} + weight·xᵀD_i x` (the
//!   coupling stores the **negated** data matrix so the inner `max_y`
//!   recovers the fit term);
//! - **regression, merely convex regularizer** — same fit term with the
//!   smooth soft-plus pair `Σ_j (1/t)[ln(1+e^{t x_j}) + ln(1+e^{−t x_j})]`,
//!   whose curvature vanishes as `|x_j|` grows;
//! - **constrained** — strongly convex quadratic `g_i` with linear
//!   `h_i(y) = ⟨b_i, y⟩`, so `y` is a Lagrange multiplier enforcing
//!   `mean_i P_i x = mean_i b_i`.
//!
//! Problem-level structural assumptions tracked by [`AssumptionReport`]:
//!
//! 1. every `h_i` is smooth and `H = mean h_i` is `μ`-strongly convex
//!    (`μ > 0`); fails for the constrained family;
//! 2. the average coupling `P̄ = mean_i P_i` has full column rank
//!    (`σ_min(P̄) > 0`, which requires `p_y ≥ p_x`).
//!
//! Aggregate constants ([`ProblemConstants`]) feed the stepsize policy and
//! the convergence certificates: smoothness `L₁, L₂, L`, strong convexity
//! `μ`, the extreme singular values `σ_max, σ_min` of `P̄`, the condition
//! numbers `κ = L/μ` and `γ = σ_max/σ_min`, and the coupling heterogeneity
//! `τ = ‖stack_i(P_i − P̄)‖₂` (the total initial distance of the local
//! couplings from their average; identically zero when nodes share one
//! coupling matrix).
//!
//! All generators are deterministic in their `u64` seed: the draw order is
//! fixed and documented in each generator, so equal seeds give bitwise-equal
//! instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::tol::{
    COUPLING_DEV, COUPLING_SV_MAX, COUPLING_SV_MIN, GENERATION_RETRY_CAP, QUAD_CURVATURE_DEV,
    QUAD_CURVATURE_MARGIN, QUAD_CURVATURE_SCALE, RANK_TOL, REFERENCE_GRAD_TOL, REFERENCE_MAX_ITERS,
    REFERENCE_RESIDUAL_TOL, REGRESSION_CONVEX_WEIGHT, REGRESSION_CURVATURE_DEV,
    REGRESSION_STRONG_WEIGHT, SHARPNESS_MAX, SHARPNESS_MIN,
};

/// Errors from instance generation and oracle evaluation.
#[derive(Debug, Error)]
pub enum ProblemError {
    /// A size, scale, or vector argument is malformed.
    #[error("invalid problem parameter: {0}")]
    InvalidParameter(String),
    /// Rejection sampling exhausted its retry budget.
    #[error("instance generation failed: {0}")]
    GenerationFailed(String),
    /// The reference saddle point could not be computed to tolerance.
    #[error("reference solve failed: {0}")]
    ReferenceFailed(String),
    /// An operation requires a structural assumption this instance violates.
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),
    /// An argument has the wrong dimension for this instance.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// The four supported local-cost families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Quadratic `g_i` and `h_i`.
    Quadratic,
    /// Regression with a strongly convex quadratic regularizer.
    RegressionStrong,
    /// Regression with a merely convex smooth regularizer.
    RegressionConvex,
    /// Strongly convex objective with linear coupling constraints.
    Constrained,
}

impl ProblemKind {
    /// Human-readable name, matching the configuration-file spelling.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::RegressionStrong => "regression-strong",
            ProblemKind::RegressionConvex => "regression-convex",
            ProblemKind::Constrained => "constrained",
        }
    }
}

/// Which regularizer [`make_regression`] should install.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerKind {
    /// Strongly convex quadratic form `weight · xᵀD_i x` with `D_i` SPD.
    Strong,
    /// Convex soft-plus pair with per-node sharpness; curvature decays to
    /// zero away from the origin, so only plain convexity holds.
    Convex,
}

/// One node's private cost data.
///
/// In every variant, `coupling` is the `p_y × p_x` matrix `P_i` entering
/// the bilinear term `⟨y, P_i x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalCost {
    /// `g_i(x) = xᵀ·q_mat·x + q_vec·x`, `h_i(y) = yᵀ·r_mat·y + r_vec·y`.
    Quadratic {
        /// Quadratic form of `g_i` (gradient uses `q_mat + q_matᵀ`).
        q_mat: DMatrix<f64>,
        /// Linear term of `g_i`.
        q_vec: DVector<f64>,
        /// Quadratic form of `h_i` (gradient uses `r_mat + r_matᵀ`).
        r_mat: DMatrix<f64>,
        /// Linear term of `h_i`.
        r_vec: DVector<f64>,
        /// Bilinear coupling `P_i`.
        coupling: DMatrix<f64>,
    },
    /// `g_i(x) = reg_weight · xᵀ·d_mat·x` (`d_mat` SPD),
    /// `h_i(y) = ½·yᵀ·c_mat·y − b_vec·y`.
    RegressionStrong {
        /// Regularizer weight.
        reg_weight: f64,
        /// SPD regularizer metric.
        d_mat: DMatrix<f64>,
        /// SPD curvature of `h_i`.
        c_mat: DMatrix<f64>,
        /// Observation vector (linear term of `h_i` is `−b_vec`).
        b_vec: DVector<f64>,
        /// Bilinear coupling `P_i` (negated data matrix).
        coupling: DMatrix<f64>,
    },
    /// `g_i(x) = reg_weight · Σ_j (1/t)[ln(1+e^{t·x_j}) + ln(1+e^{−t·x_j})]`
    /// with `t = sharpness`; `h_i` as in [`LocalCost::RegressionStrong`].
    RegressionConvex {
        /// Regularizer weight.
        reg_weight: f64,
        /// Sharpness `t` of the soft-plus pair.
        sharpness: f64,
        /// SPD curvature of `h_i`.
        c_mat: DMatrix<f64>,
        /// Observation vector (linear term of `h_i` is `−b_vec`).
        b_vec: DVector<f64>,
        /// Bilinear coupling `P_i` (negated data matrix).
        coupling: DMatrix<f64>,
    },
    /// `g_i(x) = xᵀ·q_mat·x + q_vec·x` (SPD part), `h_i(y) = b_vec·y`.
    Constrained {
        /// Quadratic form of `g_i`.
        q_mat: DMatrix<f64>,
        /// Linear term of `g_i`.
        q_vec: DVector<f64>,
        /// Constraint offset (`h_i` is linear with gradient `b_vec`).
        b_vec: DVector<f64>,
        /// Bilinear coupling `P_i`.
        coupling: DMatrix<f64>,
    },
}

impl LocalCost {
    /// The family this cost belongs to.
    #[must_use]
    pub fn kind(&self) -> ProblemKind {
        match self {
            LocalCost::Quadratic { .. } => ProblemKind::Quadratic,
            LocalCost::RegressionStrong { .. } => ProblemKind::RegressionStrong,
            LocalCost::RegressionConvex { .. } => ProblemKind::RegressionConvex,
            LocalCost::Constrained { .. } => ProblemKind::Constrained,
        }
    }

    /// The coupling matrix `P_i` (`p_y × p_x`).
    #[must_use]
    pub fn coupling(&self) -> &DMatrix<f64> {
        match self {
            LocalCost::Quadratic { coupling, .. }
            | LocalCost::RegressionStrong { coupling, .. }
            | LocalCost::RegressionConvex { coupling, .. }
            | LocalCost::Constrained { coupling, .. } => coupling,
        }
    }

    fn check_dims(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<(), ProblemError> {
        let p = self.coupling();
        if x.len() != p.ncols() || y.len() != p.nrows() {
            return Err(ProblemError::DimensionMismatch(format!(
                "expected x of length {} and y of length {}, got {} and {}",
                p.ncols(),
                p.nrows(),
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }
}

// ---- Gradient and value oracles -------------------------------------------

/// Gradient of the private part `g_i` at `x`.
fn grad_g(local: &LocalCost, x: &DVector<f64>) -> DVector<f64> {
    match local {
        LocalCost::Quadratic { q_mat, q_vec, .. } | LocalCost::Constrained { q_mat, q_vec, .. } => {
            (q_mat + q_mat.transpose()) * x + q_vec
        }
        LocalCost::RegressionStrong {
            reg_weight, d_mat, ..
        } => d_mat * x * (2.0 * reg_weight),
        LocalCost::RegressionConvex {
            reg_weight,
            sharpness,
            ..
        } => x.map(|v| reg_weight * (0.5 * sharpness * v).tanh()),
    }
}

/// Gradient of the private part `h_i` at `y`.
fn grad_h(local: &LocalCost, y: &DVector<f64>) -> DVector<f64> {
    match local {
        LocalCost::Quadratic { r_mat, r_vec, .. } => (r_mat + r_mat.transpose()) * y + r_vec,
        LocalCost::RegressionStrong { c_mat, b_vec, .. }
        | LocalCost::RegressionConvex { c_mat, b_vec, .. } => c_mat * y - b_vec,
        LocalCost::Constrained { b_vec, .. } => b_vec.clone(),
    }
}

/// Numerically stable `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Value of the local saddle cost `f_i(x, y) = g_i(x) + yᵀP_i x − h_i(y)`.
///
/// # Errors
///
/// [`ProblemError::DimensionMismatch`] if `x` or `y` has the wrong length.
pub fn value(local: &LocalCost, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64, ProblemError> {
    local.check_dims(x, y)?;
    let bilinear = y.dot(&(local.coupling() * x));
    let (g, h) = match local {
        LocalCost::Quadratic {
            q_mat,
            q_vec,
            r_mat,
            r_vec,
            ..
        } => (
            x.dot(&(q_mat * x)) + q_vec.dot(x),
            y.dot(&(r_mat * y)) + r_vec.dot(y),
        ),
        LocalCost::RegressionStrong {
            reg_weight,
            d_mat,
            c_mat,
            b_vec,
            ..
        } => (
            reg_weight * x.dot(&(d_mat * x)),
            0.5 * y.dot(&(c_mat * y)) - b_vec.dot(y),
        ),
        LocalCost::RegressionConvex {
            reg_weight,
            sharpness,
            c_mat,
            b_vec,
            ..
        } => {
            let t = *sharpness;
            let g = reg_weight
                * x.iter()
                    .map(|&v| (softplus(t * v) + softplus(-t * v)) / t)
                    .sum::<f64>();
            (g, 0.5 * y.dot(&(c_mat * y)) - b_vec.dot(y))
        }
        LocalCost::Constrained {
            q_mat,
            q_vec,
            b_vec,
            ..
        } => (x.dot(&(q_mat * x)) + q_vec.dot(x), b_vec.dot(y)),
    };
    Ok(g + bilinear - h)
}

/// `∇_x f_i(x, y) = ∇g_i(x) + P_iᵀ y` with the node's own coupling.
///
/// # Errors
///
/// [`ProblemError::DimensionMismatch`] if `x` or `y` has the wrong length.
pub fn grad_x(
    local: &LocalCost,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, ProblemError> {
    local.check_dims(x, y)?;
    Ok(grad_x_with_coupling(local, x, y, local.coupling()))
}

/// `∇_y f_i(x, y) = P_i x − ∇h_i(y)` with the node's own coupling.
///
/// # Errors
///
/// [`ProblemError::DimensionMismatch`] if `x` or `y` has the wrong length.
pub fn grad_y(
    local: &LocalCost,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, ProblemError> {
    local.check_dims(x, y)?;
    Ok(grad_y_with_coupling(local, x, y, local.coupling()))
}

/// `∇_x f_i` evaluated with an explicit coupling estimate in place of the
/// node's own `P_i`. Solvers that run consensus on the coupling matrices
/// differentiate through their current estimate, not the private matrix.
#[must_use]
pub fn grad_x_with_coupling(
    local: &LocalCost,
    x: &DVector<f64>,
    y: &DVector<f64>,
    coupling: &DMatrix<f64>,
) -> DVector<f64> {
    grad_g(local, x) + coupling.transpose() * y
}

/// `∇_y f_i` evaluated with an explicit coupling estimate; see
/// [`grad_x_with_coupling`].
#[must_use]
pub fn grad_y_with_coupling(
    local: &LocalCost,
    x: &DVector<f64>,
    y: &DVector<f64>,
    coupling: &DMatrix<f64>,
) -> DVector<f64> {
    coupling * x - grad_h(local, y)
}

// ---- Aggregate constants ---------------------------------------------------

/// Smoothness, convexity, and coupling constants of an assembled instance.
///
/// `kappa` and `gamma` are `+∞` when `mu` respectively `sigma_min` vanish;
/// consumers that require finite values must check [`AssumptionReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    /// Max over nodes of the Lipschitz constant of `∇g_i`.
    pub l1: f64,
    /// Max over nodes of the Lipschitz constant of `∇h_i`.
    pub l2: f64,
    /// `max(l1, l2)` — the smoothness constant used by stepsize policies.
    pub l: f64,
    /// Strong-convexity modulus of `H = mean_i h_i` (0 when only convex).
    pub mu: f64,
    /// Largest singular value of the average coupling `P̄`.
    pub sigma_max: f64,
    /// Smallest **column** singular value of `P̄` (0 if rank-deficient).
    pub sigma_min: f64,
    /// Condition number `l / mu`.
    pub kappa: f64,
    /// Coupling conditioning `sigma_max / sigma_min`.
    pub gamma: f64,
    /// Total coupling heterogeneity `‖stack_i(P_i − P̄)‖₂`.
    pub tau: f64,
    /// Norm of the averaged coupling deviation `(1/n)‖Σ_i (P_i − P̄)‖₂`.
    /// Identically zero by construction (the deviations telescope); kept as
    /// a recorded witness of that identity.
    pub tau_avg: f64,
}

/// Which structural assumptions an instance satisfies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `H` is strongly convex (`mu > 0`) and all pieces are smooth.
    pub strongly_convex_h: bool,
    /// `P̄` has full column rank (`sigma_min > 0`, needs `p_y ≥ p_x`).
    pub full_column_rank_coupling: bool,
    /// Human-readable description of each violated assumption.
    pub violations: Vec<String>,
}

impl AssumptionReport {
    /// True when every tracked assumption holds.
    #[must_use]
    pub fn all_hold(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Largest eigenvalue of a symmetric matrix.
fn max_eig_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Smallest eigenvalue of a symmetric matrix.
fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Spectral norm via singular values (safe for any rectangular matrix).
fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0_f64, |a, &b| a.max(b))
}

fn constants_from_locals(locals: &[LocalCost], p_bar: &DMatrix<f64>) -> ProblemConstants {
    let n = locals.len() as f64;
    let (p_y, p_x) = (p_bar.nrows(), p_bar.ncols());

    let mut l1 = 0.0_f64;
    let mut l2 = 0.0_f64;
    let mut b_bar = DMatrix::<f64>::zeros(p_y, p_y);
    for lc in locals {
        match lc {
            LocalCost::Quadratic { q_mat, r_mat, .. } => {
                l1 = l1.max(max_eig_sym(&(q_mat + q_mat.transpose())).abs());
                let b = r_mat + r_mat.transpose();
                l2 = l2.max(max_eig_sym(&b).abs());
                b_bar += b / n;
            }
            LocalCost::RegressionStrong {
                reg_weight,
                d_mat,
                c_mat,
                ..
            } => {
                l1 = l1.max(2.0 * reg_weight * max_eig_sym(d_mat).abs());
                l2 = l2.max(max_eig_sym(c_mat).abs());
                b_bar += c_mat / n;
            }
            LocalCost::RegressionConvex {
                reg_weight,
                sharpness,
                c_mat,
                ..
            } => {
                // d/dv [w·tanh(t v / 2)] = w·(t/2)·sech² ≤ w·t/2.
                l1 = l1.max(reg_weight * sharpness / 2.0);
                l2 = l2.max(max_eig_sym(c_mat).abs());
                b_bar += c_mat / n;
            }
            LocalCost::Constrained { q_mat, .. } => {
                l1 = l1.max(max_eig_sym(&(q_mat + q_mat.transpose())).abs());
                // h_i is linear: ∇h_i is 0-Lipschitz.
            }
        }
    }
    let mu = match locals[0] {
        LocalCost::Constrained { .. } => 0.0,
        _ => min_eig_sym(&b_bar).max(0.0),
    };
    let l = l1.max(l2);

    let svs = p_bar.singular_values();
    let sigma_max = svs.iter().fold(0.0_f64, |a, &b| a.max(b));
    // Full **column** rank needs p_x singular values; a wide matrix
    // (p_y < p_x) is rank-deficient in columns regardless of its svd.
    let sigma_min = if p_y >= p_x {
        svs.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    } else {
        0.0
    };

    let mut stack = DMatrix::<f64>::zeros(locals.len() * p_y, p_x);
    let mut dev_sum = DMatrix::<f64>::zeros(p_y, p_x);
    for (i, lc) in locals.iter().enumerate() {
        let dev = lc.coupling() - p_bar;
        stack.view_mut((i * p_y, 0), (p_y, p_x)).copy_from(&dev);
        dev_sum += dev;
    }
    let tau = spectral_norm(&stack);
    let tau_avg = spectral_norm(&dev_sum) / n;

    ProblemConstants {
        l1,
        l2,
        l,
        mu,
        sigma_max,
        sigma_min,
        kappa: l / mu,
        gamma: sigma_max / sigma_min,
        tau,
        tau_avg,
    }
}

// ---- Assembled problem -----------------------------------------------------

/// A fully assembled network saddle-point instance: local costs, their
/// averages, aggregate constants, and the reference saddle point
/// `(x*, y*)` of the averaged objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleProblem {
    kind: ProblemKind,
    p_x: usize,
    p_y: usize,
    locals: Vec<LocalCost>,
    p_bar: DMatrix<f64>,
    /// Average Hessian of `g` when it is constant (`None` for the convex
    /// regression family, whose curvature depends on `x`).
    a_bar: Option<DMatrix<f64>>,
    /// Average Hessian of `h` (zero matrix for the constrained family).
    b_bar: DMatrix<f64>,
    /// Linear term of `∇H`: `∇H(y) = b_bar·y + h_lin`.
    h_lin: DVector<f64>,
    x_star: DVector<f64>,
    y_star: DVector<f64>,
    constants: ProblemConstants,
}

impl SaddleProblem {
    /// Number of nodes.
    #[must_use]
    pub fn n(&self) -> usize {
        self.locals.len()
    }

    /// Primal dimension.
    #[must_use]
    pub fn p_x(&self) -> usize {
        self.p_x
    }

    /// Dual dimension.
    #[must_use]
    pub fn p_y(&self) -> usize {
        self.p_y
    }

    /// Cost family of every local.
    #[must_use]
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// All local costs, node order.
    #[must_use]
    pub fn locals(&self) -> &[LocalCost] {
        &self.locals
    }

    /// One node's cost.
    ///
    /// # Panics
    ///
    /// Panics if `i >= self.n()`.
    #[must_use]
    pub fn local(&self, i: usize) -> &LocalCost {
        &self.locals[i]
    }

    /// Average coupling matrix `P̄`.
    #[must_use]
    pub fn p_bar(&self) -> &DMatrix<f64> {
        &self.p_bar
    }

    /// Average Hessian of `g` when constant across `x`.
    #[must_use]
    pub fn a_bar(&self) -> Option<&DMatrix<f64>> {
        self.a_bar.as_ref()
    }

    /// Average Hessian of `h` (`∇H(y) = b_bar·y + h_lin`).
    #[must_use]
    pub fn b_bar(&self) -> &DMatrix<f64> {
        &self.b_bar
    }

    /// Aggregate constants of this instance.
    #[must_use]
    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    /// Reference primal solution of the averaged objective.
    #[must_use]
    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    /// Reference dual solution of the averaged objective.
    #[must_use]
    pub fn y_star(&self) -> &DVector<f64> {
        &self.y_star
    }

    /// Which structural assumptions this instance satisfies.
    #[must_use]
    pub fn assumptions(&self) -> AssumptionReport {
        let mut violations = Vec::new();
        let strongly_convex_h = self.constants.mu > 0.0;
        if !strongly_convex_h {
            violations.push(
                "dual cost H is not strongly convex (mu = 0), so the certified \
                 stepsize policy and the dual map ∇H* are unavailable"
                    .to_string(),
            );
        }
        let full_column_rank_coupling = self.constants.sigma_min > RANK_TOL;
        if !full_column_rank_coupling {
            violations.push(format!(
                "average coupling lacks full column rank \
                 (p_y = {} vs p_x = {}, sigma_min = {:.3e})",
                self.p_y, self.p_x, self.constants.sigma_min
            ));
        }
        AssumptionReport {
            strongly_convex_h,
            full_column_rank_coupling,
            violations,
        }
    }

    /// Gradient of the averaged dual cost: `∇H(y) = b_bar·y + h_lin`.
    ///
    /// # Panics
    ///
    /// Panics if `y` has the wrong length.
    #[must_use]
    pub fn grad_h_mean(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.p_y, "dual argument has wrong length");
        &self.b_bar * y + &self.h_lin
    }

    /// Distance of averaged iterates from the reference saddle point:
    /// `‖x̄ − x*‖ + ‖ȳ − y*‖`.
    ///
    /// # Panics
    ///
    /// Panics if either argument has the wrong length.
    #[must_use]
    pub fn optimality_gap(&self, x_bar: &DVector<f64>, y_bar: &DVector<f64>) -> f64 {
        assert_eq!(x_bar.len(), self.p_x, "primal argument has wrong length");
        assert_eq!(y_bar.len(), self.p_y, "dual argument has wrong length");
        (x_bar - &self.x_star).norm() + (y_bar - &self.y_star).norm()
    }

    /// Reproducibility dump: the full instance as JSON with matrices in
    /// row-major order. One-way (documentation format, not a loader).
    #[must_use]
    pub fn to_json(&self) -> Value {
        fn mat(m: &DMatrix<f64>) -> Value {
            let mut data = Vec::with_capacity(m.nrows() * m.ncols());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    data.push(m[(i, j)]);
                }
            }
            json!({"rows": m.nrows(), "cols": m.ncols(), "data": data})
        }
        fn vec(v: &DVector<f64>) -> Value {
            json!(v.iter().copied().collect::<Vec<f64>>())
        }
        fn fin(v: f64) -> Value {
            if v.is_finite() {
                json!(v)
            } else {
                json!(v.to_string())
            }
        }
        let locals: Vec<Value> = self
            .locals
            .iter()
            .map(|lc| match lc {
                LocalCost::Quadratic {
                    q_mat,
                    q_vec,
                    r_mat,
                    r_vec,
                    coupling,
                } => json!({
                    "q_mat": mat(q_mat), "q_vec": vec(q_vec),
                    "r_mat": mat(r_mat), "r_vec": vec(r_vec),
                    "coupling": mat(coupling),
                }),
                LocalCost::RegressionStrong {
                    reg_weight,
                    d_mat,
                    c_mat,
                    b_vec,
                    coupling,
                } => json!({
                    "reg_weight": reg_weight, "d_mat": mat(d_mat),
                    "c_mat": mat(c_mat), "b_vec": vec(b_vec),
                    "coupling": mat(coupling),
                }),
                LocalCost::RegressionConvex {
                    reg_weight,
                    sharpness,
                    c_mat,
                    b_vec,
                    coupling,
                } => json!({
                    "reg_weight": reg_weight, "sharpness": sharpness,
                    "c_mat": mat(c_mat), "b_vec": vec(b_vec),
                    "coupling": mat(coupling),
                }),
                LocalCost::Constrained {
                    q_mat,
                    q_vec,
                    b_vec,
                    coupling,
                } => json!({
                    "q_mat": mat(q_mat), "q_vec": vec(q_vec),
                    "b_vec": vec(b_vec), "coupling": mat(coupling),
                }),
            })
            .collect();
        let k = &self.constants;
        json!({
            "kind": self.kind.name(),
            "n": self.n(),
            "p_x": self.p_x,
            "p_y": self.p_y,
            "p_bar": mat(&self.p_bar),
            "x_star": vec(&self.x_star),
            "y_star": vec(&self.y_star),
            "constants": {
                "l1": fin(k.l1), "l2": fin(k.l2), "l": fin(k.l), "mu": fin(k.mu),
                "sigma_max": fin(k.sigma_max), "sigma_min": fin(k.sigma_min),
                "kappa": fin(k.kappa), "gamma": fin(k.gamma),
                "tau": fin(k.tau), "tau_avg": fin(k.tau_avg),
            },
            "locals": locals,
        })
    }
}

/// Recomputes the aggregate constants of an assembled instance from its
/// locals. Construction stores the same values in
/// [`SaddleProblem::constants`]; this entry point exists so analyses can
/// re-derive them independently.
#[must_use]
pub fn aggregate_constants(p: &SaddleProblem) -> ProblemConstants {
    constants_from_locals(&p.locals, &p.p_bar)
}

// ---- Reference saddle points ------------------------------------------------

/// Computes the saddle point `(x*, y*)` of the **averaged** objective of
/// `locals`. Linear-gradient families use a direct first-order-system solve;
/// the convex regression family runs damped Newton on its smooth strictly
/// convex primal reduction. The result is verified against the averaged
/// first-order system to [`REFERENCE_RESIDUAL_TOL`].
///
/// # Errors
///
/// [`ProblemError::ReferenceFailed`] if the linear system is singular, the
/// Newton loop stalls, or residual verification fails.
pub fn reference_saddle(p: &SaddleProblem) -> Result<(DVector<f64>, DVector<f64>), ProblemError> {
    reference_from_parts(&p.locals, &p.p_bar, p.a_bar.as_ref(), &p.b_bar, &p.h_lin)
}

fn reference_from_parts(
    locals: &[LocalCost],
    p_bar: &DMatrix<f64>,
    a_bar: Option<&DMatrix<f64>>,
    b_bar: &DMatrix<f64>,
    h_lin: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), ProblemError> {
    let (p_y, p_x) = (p_bar.nrows(), p_bar.ncols());
    let n = locals.len() as f64;

    let (x_star, y_star) = match locals[0].kind() {
        ProblemKind::Quadratic | ProblemKind::RegressionStrong => {
            // Stationarity of the averaged objective:
            //   Ā x + ā + P̄ᵀ y = 0,
            //   P̄ x − (b_bar y + h_lin) = 0,
            // a symmetric-saddle linear system in (x, y).
            let a = a_bar.expect("linear families always carry a constant average Hessian");
            let mut a_lin = DVector::<f64>::zeros(p_x);
            for lc in locals {
                match lc {
                    LocalCost::Quadratic { q_vec, .. } => a_lin += q_vec / n,
                    LocalCost::RegressionStrong { .. } => {}
                    _ => unreachable!("mixed kinds rejected at assembly"),
                }
            }
            let side = p_x + p_y;
            let mut kkt = DMatrix::<f64>::zeros(side, side);
            kkt.view_mut((0, 0), (p_x, p_x)).copy_from(a);
            kkt.view_mut((0, p_x), (p_x, p_y))
                .copy_from(&p_bar.transpose());
            kkt.view_mut((p_x, 0), (p_y, p_x)).copy_from(p_bar);
            kkt.view_mut((p_x, p_x), (p_y, p_y)).copy_from(&(-b_bar));
            let mut rhs = DVector::<f64>::zeros(side);
            rhs.rows_mut(0, p_x).copy_from(&(-&a_lin));
            rhs.rows_mut(p_x, p_y).copy_from(h_lin);
            let sol = kkt.lu().solve(&rhs).ok_or_else(|| {
                ProblemError::ReferenceFailed("first-order system is singular".into())
            })?;
            (
                DVector::from(sol.rows(0, p_x).clone_owned()),
                DVector::from(sol.rows(p_x, p_y).clone_owned()),
            )
        }
        ProblemKind::Constrained => {
            // h is linear: the dual block of the first-order system is the
            // pure feasibility condition P̄ x = h_lin. With p_y > p_x the
            // multiplier is non-unique; report the minimum-norm one.
            let a = a_bar.expect("constrained family carries a constant average Hessian");
            let mut a_lin = DVector::<f64>::zeros(p_x);
            for lc in locals {
                if let LocalCost::Constrained { q_vec, .. } = lc {
                    a_lin += q_vec / n;
                }
            }
            let gram = p_bar.transpose() * p_bar; // p_x × p_x, SPD by full column rank
            let gram_lu = gram.lu();
            let x = gram_lu.solve(&(p_bar.transpose() * h_lin)).ok_or_else(|| {
                ProblemError::ReferenceFailed(
                    "coupling Gram matrix is singular; full column rank required".into(),
                )
            })?;
            // Minimum-norm y solving P̄ᵀ y = −(Ā x + ā):  y = P̄ (P̄ᵀP̄)⁻¹ rhs.
            let rhs = -(a * &x + &a_lin);
            let y = p_bar
                * gram_lu.solve(&rhs).ok_or_else(|| {
                    ProblemError::ReferenceFailed("coupling Gram matrix is singular".into())
                })?;
            (x, y)
        }
        ProblemKind::RegressionConvex => reference_convex(locals, p_bar, b_bar, h_lin)?,
    };

    // Verify against the averaged first-order system.
    let mut gx = DVector::<f64>::zeros(p_x);
    let mut gy = DVector::<f64>::zeros(p_y);
    for lc in locals {
        gx += grad_x(lc, &x_star, &y_star).expect("dimensions fixed at assembly") / n;
        gy += grad_y(lc, &x_star, &y_star).expect("dimensions fixed at assembly") / n;
    }
    let residual = gx.norm() + gy.norm();
    if !(residual <= REFERENCE_RESIDUAL_TOL) {
        return Err(ProblemError::ReferenceFailed(format!(
            "reference saddle residual {residual:.3e} exceeds {REFERENCE_RESIDUAL_TOL:.1e}"
        )));
    }
    Ok((x_star, y_star))
}

/// Damped Newton on the primal reduction of the convex regression family:
/// maximizing out `y` gives `φ(x) = G(x) + ½(P̄x + b̄)ᵀ b_bar⁻¹ (P̄x + b̄)`,
/// smooth and strictly convex (the soft-plus pair has positive curvature
/// everywhere, decaying in `|x|`).
fn reference_convex(
    locals: &[LocalCost],
    p_bar: &DMatrix<f64>,
    b_bar: &DMatrix<f64>,
    h_lin: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), ProblemError> {
    let (p_y, p_x) = (p_bar.nrows(), p_bar.ncols());
    let n = locals.len() as f64;
    let b_vec_bar = -h_lin; // ∇H(y) = b_bar·y − b̄ for this family
    let blu = b_bar.clone().lu();
    let cinv_p = blu.solve(p_bar).ok_or_else(|| {
        ProblemError::ReferenceFailed("average dual curvature is singular".into())
    })?;
    let cinv_b = blu.solve(&b_vec_bar).ok_or_else(|| {
        ProblemError::ReferenceFailed("average dual curvature is singular".into())
    })?;
    let pt_cinv_p = p_bar.transpose() * &cinv_p;
    let pt_cinv_b = p_bar.transpose() * &cinv_b;

    let params: Vec<(f64, f64)> = locals
        .iter()
        .map(|lc| match lc {
            LocalCost::RegressionConvex {
                reg_weight,
                sharpness,
                ..
            } => (*reg_weight, *sharpness),
            _ => unreachable!("mixed kinds rejected at assembly"),
        })
        .collect();
    let grad_g_mean = |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(p_x, |j, _| {
            params
                .iter()
                .map(|&(w, t)| w * (0.5 * t * x[j]).tanh())
                .sum::<f64>()
                / n
        })
    };
    let g_mean = |x: &DVector<f64>| -> f64 {
        params
            .iter()
            .map(|&(w, t)| {
                w * x
                    .iter()
                    .map(|&v| (softplus(t * v) + softplus(-t * v)) / t)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n
    };
    // sech²(a), overflow-safe.
    let sech2 = |a: f64| {
        let e = (-a.abs()).exp();
        let s = 2.0 * e / (1.0 + e * e);
        s * s
    };
    let phi = |x: &DVector<f64>| -> f64 {
        let z = p_bar * x + &b_vec_bar;
        g_mean(x) + 0.5 * z.dot(&blu.solve(&z).expect("factorized above"))
    };

    let mut x = DVector::<f64>::zeros(p_x);
    let mut converged = false;
    for _ in 0..REFERENCE_MAX_ITERS {
        let grad = grad_g_mean(&x) + &pt_cinv_p * &x + &pt_cinv_b;
        if grad.norm() <= REFERENCE_GRAD_TOL {
            converged = true;
            break;
        }
        let mut hess = pt_cinv_p.clone();
        for j in 0..p_x {
            hess[(j, j)] += params
                .iter()
                .map(|&(w, t)| w * (t / 2.0) * sech2(0.5 * t * x[j]))
                .sum::<f64>()
                / n;
        }
        let dir = hess
            .lu()
            .solve(&grad)
            .ok_or_else(|| ProblemError::ReferenceFailed("Newton system is singular".into()))?;
        if grad.norm() <= 1e-6 {
            // Inside the quadratic-convergence basin the true objective
            // decrease (~‖grad‖²) is below f64 resolution, so an Armijo
            // test can only stall on rounding noise; take the full step.
            x -= dir;
        } else {
            let phi0 = phi(&x);
            let slope = grad.dot(&dir);
            let mut s = 1.0;
            while s > 1e-12 && phi(&(&x - s * &dir)) > phi0 - 1e-4 * s * slope {
                s *= 0.5;
            }
            x -= s * dir;
        }
    }
    if !converged {
        let grad = grad_g_mean(&x) + &pt_cinv_p * &x + &pt_cinv_b;
        if grad.norm() > 1e-12 {
            return Err(ProblemError::ReferenceFailed(format!(
                "Newton stalled at gradient norm {:.3e} after {REFERENCE_MAX_ITERS} iterations",
                grad.norm()
            )));
        }
    }
    let y = &cinv_p * &x + &cinv_b;
    debug_assert_eq!(y.len(), p_y);
    Ok((x, y))
}

/// Solution of `∇H(y) = z` for the averaged dual cost, i.e. the gradient of
/// the convex conjugate `H*` — the map the averaged dual iterates chase.
///
/// # Errors
///
/// [`ProblemError::AssumptionViolation`] when `H` is not strongly convex
/// (constrained family: `∇H` is constant and cannot be inverted), and
/// [`ProblemError::DimensionMismatch`] for a wrong-length argument.
pub fn grad_h_star(p: &SaddleProblem, z: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
    if z.len() != p.p_y {
        return Err(ProblemError::DimensionMismatch(format!(
            "expected argument of length {}, got {}",
            p.p_y,
            z.len()
        )));
    }
    if p.constants.mu <= 0.0 {
        return Err(ProblemError::AssumptionViolation(
            "∇H* requires strongly convex H (mu > 0)".into(),
        ));
    }
    p.b_bar.clone().lu().solve(&(z - &p.h_lin)).ok_or_else(|| {
        ProblemError::AssumptionViolation("average dual curvature is singular".into())
    })
}

// ---- Assembly ---------------------------------------------------------------

/// Assembles a problem instance from explicit local costs: computes the
/// averages, aggregate constants, and the reference saddle point.
///
/// Structural **assumptions are not enforced** here — an instance violating
/// them is constructible and carries the violations in
/// [`SaddleProblem::assumptions`]. Only solvability of the reference system
/// is required.
///
/// # Errors
///
/// [`ProblemError::InvalidParameter`] for empty input, mixed cost families,
/// or inconsistent dimensions; [`ProblemError::ReferenceFailed`] when the
/// reference saddle point cannot be computed and verified.
pub fn from_locals(locals: Vec<LocalCost>) -> Result<SaddleProblem, ProblemError> {
    if locals.is_empty() {
        return Err(ProblemError::InvalidParameter(
            "at least one local cost is required".into(),
        ));
    }
    let kind = locals[0].kind();
    let p_y = locals[0].coupling().nrows();
    let p_x = locals[0].coupling().ncols();
    if p_x == 0 || p_y == 0 {
        return Err(ProblemError::InvalidParameter(
            "dimensions must be at least 1".into(),
        ));
    }
    for (i, lc) in locals.iter().enumerate() {
        if lc.kind() != kind {
            return Err(ProblemError::InvalidParameter(format!(
                "local {i} has kind {} but local 0 has kind {}",
                lc.kind().name(),
                kind.name()
            )));
        }
        if lc.coupling().nrows() != p_y || lc.coupling().ncols() != p_x {
            return Err(ProblemError::InvalidParameter(format!(
                "local {i} coupling is {}×{}, expected {p_y}×{p_x}",
                lc.coupling().nrows(),
                lc.coupling().ncols()
            )));
        }
    }
    let n = locals.len() as f64;

    let mut p_bar = DMatrix::<f64>::zeros(p_y, p_x);
    for lc in &locals {
        p_bar += lc.coupling() / n;
    }

    let mut b_bar = DMatrix::<f64>::zeros(p_y, p_y);
    let mut h_lin = DVector::<f64>::zeros(p_y);
    let mut a_bar = match kind {
        ProblemKind::RegressionConvex => None,
        _ => Some(DMatrix::<f64>::zeros(p_x, p_x)),
    };
    for lc in &locals {
        match lc {
            LocalCost::Quadratic {
                q_mat,
                r_mat,
                r_vec,
                ..
            } => {
                if let Some(a) = a_bar.as_mut() {
                    *a += (q_mat + q_mat.transpose()) / n;
                }
                b_bar += (r_mat + r_mat.transpose()) / n;
                h_lin += r_vec / n;
            }
            LocalCost::RegressionStrong {
                reg_weight,
                d_mat,
                c_mat,
                b_vec,
                ..
            } => {
                if let Some(a) = a_bar.as_mut() {
                    *a += d_mat * (2.0 * reg_weight / n);
                }
                b_bar += c_mat / n;
                h_lin -= b_vec / n;
            }
            LocalCost::RegressionConvex { c_mat, b_vec, .. } => {
                b_bar += c_mat / n;
                h_lin -= b_vec / n;
            }
            LocalCost::Constrained { q_mat, b_vec, .. } => {
                if let Some(a) = a_bar.as_mut() {
                    *a += (q_mat + q_mat.transpose()) / n;
                }
                h_lin += b_vec / n;
            }
        }
    }

    let constants = constants_from_locals(&locals, &p_bar);
    let (x_star, y_star) = reference_from_parts(&locals, &p_bar, a_bar.as_ref(), &b_bar, &h_lin)?;

    Ok(SaddleProblem {
        kind,
        p_x,
        p_y,
        locals,
        p_bar,
        a_bar,
        b_bar,
        h_lin,
        x_star,
        y_star,
        constants,
    })
}

// ---- Random generators --------------------------------------------------------

/// Gaussian matrix with entries sampled row-major (deterministic order).
fn gauss_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn gauss_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_iterator(
        len,
        (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)),
    )
}

/// `n` zero-mean deviation matrices: raw Gaussian draws minus their average,
/// so per-node quantities `base + dev_i` average to `base` exactly (up to
/// one rounding).
fn centered_family(
    rng: &mut ChaCha8Rng,
    n: usize,
    rows: usize,
    cols: usize,
    scale: f64,
    symmetric: bool,
) -> Vec<DMatrix<f64>> {
    let raw: Vec<DMatrix<f64>> = (0..n)
        .map(|_| {
            let m = gauss_mat(rng, rows, cols, scale);
            if symmetric {
                (&m + m.transpose()) / 2.0
            } else {
                m
            }
        })
        .collect();
    let mut mean = DMatrix::<f64>::zeros(rows, cols);
    for m in &raw {
        mean += m / n as f64;
    }
    raw.into_iter().map(|m| m - &mean).collect()
}

fn centered_vec_family(
    rng: &mut ChaCha8Rng,
    n: usize,
    len: usize,
    scale: f64,
) -> Vec<DVector<f64>> {
    let raw: Vec<DVector<f64>> = (0..n).map(|_| gauss_vec(rng, len, scale)).collect();
    let mut mean = DVector::<f64>::zeros(len);
    for v in &raw {
        mean += v / n as f64;
    }
    raw.into_iter().map(|v| v - &mean).collect()
}

/// Random matrix with a floor on the smallest eigenvalue of `m + mᵀ`:
/// a Gaussian draw diagonally shifted until `λ_min(m + mᵀ) ≥ margin`.
fn gauss_with_curvature_floor(
    rng: &mut ChaCha8Rng,
    dim: usize,
    scale: f64,
    margin: f64,
) -> DMatrix<f64> {
    let mut m = gauss_mat(rng, dim, dim, scale);
    let lo = min_eig_sym(&(&m + m.transpose()));
    if lo < margin {
        // Adding c·I to m adds 2c to every eigenvalue of m + mᵀ.
        let c = (margin - lo) / 2.0;
        for j in 0..dim {
            m[(j, j)] += c;
        }
    }
    m
}

/// Random SPD matrix with eigenvalues drawn uniformly from `[lo, hi]`.
fn random_spd(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = gauss_mat(rng, dim, dim, 1.0).qr().q();
    let eigs = DVector::from_iterator(dim, (0..dim).map(|_| rng.gen_range(lo..hi)));
    let m = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
    (&m + m.transpose()) / 2.0
}

/// Random coupling matrix with singular values drawn uniformly from
/// `[COUPLING_SV_MIN, COUPLING_SV_MAX]` and Haar-like singular subspaces.
/// Keeping singular values O(1) keeps downstream certified stepsizes
/// representable in f64.
fn conditioned_coupling(rng: &mut ChaCha8Rng, p_y: usize, p_x: usize) -> DMatrix<f64> {
    let u = gauss_mat(rng, p_y, p_y, 1.0).qr().q();
    let v = gauss_mat(rng, p_x, p_x, 1.0).qr().q();
    let k = p_y.min(p_x);
    let mut m = DMatrix::<f64>::zeros(p_y, p_x);
    for j in 0..k {
        let sv = rng.gen_range(COUPLING_SV_MIN..COUPLING_SV_MAX);
        m += u.column(j) * v.column(j).transpose() * sv;
    }
    m
}

fn check_generator_args(
    p_x: usize,
    p_y: usize,
    n: usize,
    heterogeneity: f64,
) -> Result<(), ProblemError> {
    if p_x == 0 || p_y == 0 || n == 0 {
        return Err(ProblemError::InvalidParameter(format!(
            "dimensions and node count must be at least 1 (p_x={p_x}, p_y={p_y}, n={n})"
        )));
    }
    if !(heterogeneity >= 0.0) || !heterogeneity.is_finite() {
        return Err(ProblemError::InvalidParameter(format!(
            "heterogeneity must be a finite non-negative number, got {heterogeneity}"
        )));
    }
    Ok(())
}

fn make_quadratic_inner(
    p_x: usize,
    p_y: usize,
    n: usize,
    heterogeneity: f64,
    seed: u64,
    shared_coupling: bool,
) -> Result<SaddleProblem, ProblemError> {
    check_generator_args(p_x, p_y, n, heterogeneity)?;
    if p_y < p_x {
        return Err(ProblemError::GenerationFailed(format!(
            "average coupling cannot have full column rank with p_y = {p_y} < p_x = {p_x}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..GENERATION_RETRY_CAP {
        // Draw order (frozen): curvature bases, coupling base, linear bases,
        // then per-node deviation families in declaration order.
        let q_bar =
            gauss_with_curvature_floor(&mut rng, p_x, QUAD_CURVATURE_SCALE, QUAD_CURVATURE_MARGIN);
        let r_bar =
            gauss_with_curvature_floor(&mut rng, p_y, QUAD_CURVATURE_SCALE, QUAD_CURVATURE_MARGIN);
        let p_bar = conditioned_coupling(&mut rng, p_y, p_x);
        let q_lin = gauss_vec(&mut rng, p_x, 1.0);
        let r_lin = gauss_vec(&mut rng, p_y, 1.0);

        let dq = centered_family(
            &mut rng,
            n,
            p_x,
            p_x,
            QUAD_CURVATURE_DEV * heterogeneity,
            false,
        );
        let dr = centered_family(
            &mut rng,
            n,
            p_y,
            p_y,
            QUAD_CURVATURE_DEV * heterogeneity,
            false,
        );
        let dp = if shared_coupling {
            vec![DMatrix::<f64>::zeros(p_y, p_x); n]
        } else {
            centered_family(&mut rng, n, p_y, p_x, COUPLING_DEV * heterogeneity, false)
        };
        let dqv = centered_vec_family(&mut rng, n, p_x, COUPLING_DEV * heterogeneity);
        let drv = centered_vec_family(&mut rng, n, p_y, COUPLING_DEV * heterogeneity);

        if spectral_smallest_column_sv(&p_bar) <= RANK_TOL {
            continue; // resample the whole draw
        }
        let locals: Vec<LocalCost> = (0..n)
            .map(|i| LocalCost::Quadratic {
                q_mat: &q_bar + &dq[i],
                q_vec: &q_lin + &dqv[i],
                r_mat: &r_bar + &dr[i],
                r_vec: &r_lin + &drv[i],
                coupling: &p_bar + &dp[i],
            })
            .collect();
        return from_locals(locals);
    }
    Err(ProblemError::GenerationFailed(format!(
        "no full-column-rank coupling found in {GENERATION_RETRY_CAP} attempts"
    )))
}

fn spectral_smallest_column_sv(m: &DMatrix<f64>) -> f64 {
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    m.singular_values()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Generates a random quadratic instance.
///
/// Average curvature blocks are Gaussian draws with an eigenvalue floor
/// ([`QUAD_CURVATURE_MARGIN`]) on their symmetric parts; the average
/// coupling has singular values in `[0.8, 2]`; per-node data are the
/// averages plus zero-mean Gaussian deviations scaled by `heterogeneity`.
/// `heterogeneity = 0` makes all nodes identical.
///
/// # Arguments
///
/// * `p_x`, `p_y` — primal/dual dimensions (needs `p_y ≥ p_x` for the
///   coupling-rank assumption, enforced here by rejection).
/// * `n` — node count.
/// * `heterogeneity` — node-to-node deviation scale, ≥ 0.
/// * `seed` — RNG seed; equal seeds give bitwise-equal instances.
///
/// # Errors
///
/// [`ProblemError::InvalidParameter`] for degenerate sizes,
/// [`ProblemError::GenerationFailed`] when no full-column-rank coupling can
/// be drawn (in particular whenever `p_y < p_x`).
///
/// # Example
///
/// ```
/// use saddlesim::problem::make_quadratic;
///
/// let p = make_quadratic(3, 3, 8, 0.8, 7).unwrap();
/// assert_eq!(p.n(), 8);
/// assert!(p.constants().mu > 0.0);
/// assert!(p.assumptions().all_hold());
/// ```
pub fn make_quadratic(
    p_x: usize,
    p_y: usize,
    n: usize,
    heterogeneity: f64,
    seed: u64,
) -> Result<SaddleProblem, ProblemError> {
    make_quadratic_inner(p_x, p_y, n, heterogeneity, seed, false)
}

/// Like [`make_quadratic`], but every node receives the **same** coupling
/// matrix `P_i = P̄` (so the coupling heterogeneity `tau` is exactly zero)
/// while the other blocks still deviate node-to-node.
///
/// # Errors
///
/// As for [`make_quadratic`].
pub fn make_quadratic_shared_coupling(
    p_x: usize,
    p_y: usize,
    n: usize,
    heterogeneity: f64,
    seed: u64,
) -> Result<SaddleProblem, ProblemError> {
    make_quadratic_inner(p_x, p_y, n, heterogeneity, seed, true)
}

/// Generates a random distributed-regression instance in saddle form.
///
/// The underlying task is fitting `data_i · x ≈ b_i` in a metric defined by
/// SPD matrices `C_i`, plus a regularizer on `x`; the dual vector `y`
/// carries the fit residual. The stored couplings are the **negated** data
/// matrices, so the assembled saddle objective's solution is the regression
/// solution. No rank condition is imposed on the coupling: wide data
/// (`p_y < p_x`) is legal and simply flags the rank assumption as violated.
///
/// # Arguments
///
/// * `regularizer` — [`RegularizerKind::Strong`] (SPD quadratic, weight
///   [`REGRESSION_STRONG_WEIGHT`]) or [`RegularizerKind::Convex`]
///   (soft-plus pair, weight [`REGRESSION_CONVEX_WEIGHT`], per-node
///   sharpness log-uniform in `[0.1, 10]` spread by `heterogeneity`).
/// * `p_x`, `p_y` — primal dimension and per-node observation count.
/// * `n` — node count.
/// * `heterogeneity` — node-to-node deviation scale, ≥ 0; at 0 all nodes
///   hold identical data.
/// * `seed` — RNG seed.
///
/// # Errors
///
/// [`ProblemError::InvalidParameter`] for degenerate sizes;
/// [`ProblemError::GenerationFailed`] if per-node curvature cannot be kept
/// SPD within the retry budget; [`ProblemError::ReferenceFailed`] if the
/// reference solve stalls.
pub fn make_regression(
    regularizer: RegularizerKind,
    p_x: usize,
    p_y: usize,
    n: usize,
    heterogeneity: f64,
    seed: u64,
) -> Result<SaddleProblem, ProblemError> {
    check_generator_args(p_x, p_y, n, heterogeneity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Draw order (frozen): data base, dual curvature base, observations,
    // regularizer base, then per-node deviation families.
    let data_bar = gauss_mat(&mut rng, p_y, p_x, 1.0);
    let c_bar = random_spd(&mut rng, p_y, 1.0, 2.0);
    let b_bar = gauss_vec(&mut rng, p_y, 1.0);

    enum Reg {
        Strong(DMatrix<f64>),
        Convex(Vec<f64>),
    }
    let reg = match regularizer {
        RegularizerKind::Strong => Reg::Strong(random_spd(&mut rng, p_x, 1.0, 2.0)),
        RegularizerKind::Convex => {
            // Sharpness: log-uniform draws contracted toward their mean by
            // (1 − heterogeneity) in log space, so heterogeneity = 0 gives
            // every node the same sharpness.
            let logs: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(SHARPNESS_MIN.ln()..SHARPNESS_MAX.ln()))
                .collect();
            let mean = logs.iter().sum::<f64>() / n as f64;
            Reg::Convex(
                logs.iter()
                    .map(|&u| (mean + heterogeneity.min(1.0) * (u - mean)).exp())
                    .collect(),
            )
        }
    };

    for _attempt in 0..GENERATION_RETRY_CAP {
        let dp = centered_family(&mut rng, n, p_y, p_x, COUPLING_DEV * heterogeneity, false);
        let db = centered_vec_family(&mut rng, n, p_y, COUPLING_DEV * heterogeneity);
        let dc = centered_family(
            &mut rng,
            n,
            p_y,
            p_y,
            REGRESSION_CURVATURE_DEV * heterogeneity,
            true,
        );
        let dd = match &reg {
            Reg::Strong(_) => centered_family(
                &mut rng,
                n,
                p_x,
                p_x,
                REGRESSION_CURVATURE_DEV * heterogeneity,
                true,
            ),
            Reg::Convex(_) => Vec::new(),
        };

        // Per-node curvature must stay SPD after deviations.
        let all_spd = (0..n).all(|i| {
            let c_ok = min_eig_sym(&(&c_bar + &dc[i])) > 0.0;
            let d_ok = match &reg {
                Reg::Strong(d_base) => min_eig_sym(&(d_base + &dd[i])) > 0.0,
                Reg::Convex(_) => true,
            };
            c_ok && d_ok
        });
        if !all_spd {
            continue; // redraw the whole deviation family, keeping means exact
        }

        let locals: Vec<LocalCost> = (0..n)
            .map(|i| {
                // Sign fold: the saddle reformulation needs ⟨y, −data·x⟩.
                let coupling = -(&data_bar + &dp[i]);
                let c_mat = &c_bar + &dc[i];
                let b_vec = &b_bar + &db[i];
                match &reg {
                    Reg::Strong(d_base) => LocalCost::RegressionStrong {
                        reg_weight: REGRESSION_STRONG_WEIGHT,
                        d_mat: d_base + &dd[i],
                        c_mat,
                        b_vec,
                        coupling,
                    },
                    Reg::Convex(ts) => LocalCost::RegressionConvex {
                        reg_weight: REGRESSION_CONVEX_WEIGHT,
                        sharpness: ts[i],
                        c_mat,
                        b_vec,
                        coupling,
                    },
                }
            })
            .collect();
        return from_locals(locals);
    }
    Err(ProblemError::GenerationFailed(format!(
        "could not keep per-node curvature SPD in {GENERATION_RETRY_CAP} attempts"
    )))
}

/// Generates a random linearly-constrained instance: strongly convex
/// quadratic `g_i` with `h_i(y) = ⟨b_i, y⟩`, so the dual vector enforces
/// `P̄ x = b̄`. The offsets are drawn **consistently** (`b̄ = P̄·x̂` for a
/// random `x̂`), making the saddle point exist; with `p_y > p_x` the
/// multiplier is non-unique and the minimum-norm one is reported.
///
/// Node-to-node deviations use the same scales as [`make_quadratic`] at
/// heterogeneity 1.
///
/// # Arguments
///
/// * `p_x`, `p_y` — dimensions; **requires** `p_y ≥ p_x` so the constraint
///   `P̄x = b̄` pins `x` down.
/// * `n` — node count.
/// * `seed` — RNG seed.
///
/// # Errors
///
/// [`ProblemError::InvalidParameter`] if `p_y < p_x` or sizes are
/// degenerate.
pub fn make_constrained(
    p_x: usize,
    p_y: usize,
    n: usize,
    seed: u64,
) -> Result<SaddleProblem, ProblemError> {
    check_generator_args(p_x, p_y, n, 1.0)?;
    if p_y < p_x {
        return Err(ProblemError::InvalidParameter(format!(
            "constrained instances need p_y ≥ p_x to pin the primal down \
             (got p_y = {p_y}, p_x = {p_x})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Draw order (frozen): curvature base, coupling base, linear base,
    // feasible point, then per-node deviation families.
    let q_bar =
        gauss_with_curvature_floor(&mut rng, p_x, QUAD_CURVATURE_SCALE, QUAD_CURVATURE_MARGIN);
    let p_bar = conditioned_coupling(&mut rng, p_y, p_x);
    let q_lin = gauss_vec(&mut rng, p_x, 1.0);
    let x_hat = gauss_vec(&mut rng, p_x, 1.0);
    let b_bar = &p_bar * &x_hat;

    let dq = centered_family(&mut rng, n, p_x, p_x, QUAD_CURVATURE_DEV, false);
    let dp = centered_family(&mut rng, n, p_y, p_x, COUPLING_DEV, false);
    let dqv = centered_vec_family(&mut rng, n, p_x, COUPLING_DEV);
    let dbv = centered_vec_family(&mut rng, n, p_y, COUPLING_DEV);

    let locals: Vec<LocalCost> = (0..n)
        .map(|i| LocalCost::Constrained {
            q_mat: &q_bar + &dq[i],
            q_vec: &q_lin + &dqv[i],
            b_vec: &b_bar + &dbv[i],
            coupling: &p_bar + &dp[i],
        })
        .collect();
    from_locals(locals)
}

// ---- Tests -----------------------------------------------------------------
