//! Executable convergence theory for the gradient-tracking saddle solvers.
//!
//! Three independent models of the same dynamics, each checkable against a
//! running solver:
//!
//! 1. **Six-state error recursion** (any smooth instance). The vector
//!    [`ErrorVector`] collects primal/dual consensus errors, distances of
//!    the averaged iterates from the target, and tracker consensus errors.
//!    Along solver runs it obeys `u⁺ ≤ M u + N_k s` entrywise, where
//!    [`build_m`] assembles the 6×6 system matrix from aggregate constants
//!    and [`build_n`] the coupling-heterogeneity forcing term (decaying
//!    geometrically when the solver runs consensus on the couplings,
//!    constant for the frozen-coupling variant).
//! 2. **Entrywise contraction certificate.** [`build_delta`] produces a
//!    positive weight vector `δ` and [`verify_lemma2`] checks
//!    `M δ ≤ η δ` with `η = 1 − αβσ_min²/κ` ([`predicted_eta`]): a weighted
//!    max-norm proof that `ρ(M) ≤ η < 1` at the certified stepsizes.
//! 3. **Exact linear model for quadratic instances.** [`build_quad_lti`]
//!    assembles the one-step matrix `M̃` of the *exact* error dynamics (no
//!    inequalities): applying `M̃` to the stacked error coordinates
//!    ([`quad_error_coords`]) reproduces the solver bit-for-bit up to
//!    rounding, so `ρ(M̃) < 1` is a sharp convergence criterion. As the
//!    stepsizes `α = β → 0`, the nontrivial eigenvalues satisfy
//!    `λ_i(α) = 1 + α·λ_i(S) + o(α)` where `S` ([`build_s`]) is the
//!    averaged saddle matrix; [`eigen_perturbation_check`] measures that
//!    first-order prediction on a live instance.
//!
//! All certificate inequalities use absolute slack
//! [`crate::tol::CERTIFICATE_TOL`]; every numeric claim here is exercised
//! against solver runs in the test suites.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::WeightMatrix;
use crate::problem::{grad_h_star, LocalCost, ProblemConstants, ProblemKind, SaddleProblem};
use crate::solvers::{init_state, step, NetworkState, SolverConfig, Variant};
use crate::tol::{CERTIFICATE_TOL, DENSE_EIG_MAX_SIDE, SPECTRAL_MAX_ITERS, SPECTRAL_REL_TOL};

/// Errors from certificate assembly and spectral computation.
#[derive(Debug, Error)]
pub enum AnalysisError {
    /// An argument is out of the valid range for this computation.
    #[error("invalid analysis parameter: {0}")]
    InvalidParameter(String),
    /// The computation requires a structural assumption the instance lacks.
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),
    /// An iterative numeric routine failed to converge.
    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

// ---- Six-state error vector -------------------------------------------------

/// The six error coordinates tracked by the contraction analysis:
///
/// ```text
/// u₁ = ‖x − 𝟙x̄ᵀ‖_F           primal consensus error
/// u₂ = √n·‖x̄ − x*‖            averaged primal optimality error
/// u₃ = ‖q − 𝟙q̄ᵀ‖_F / L        primal tracker consensus error (scaled)
/// u₄ = ‖y − 𝟙ȳᵀ‖_F           dual consensus error
/// u₅ = √n·‖ȳ − ∇H*(P̄x̄)‖      averaged dual lag behind its target
/// u₆ = ‖w − 𝟙w̄ᵀ‖_F / L        dual tracker consensus error (scaled)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorVector {
    /// The coordinates in the order above.
    pub u: [f64; 6],
}

impl ErrorVector {
    /// The coordinates as a nalgebra vector.
    #[must_use]
    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.u)
    }
}

/// Frobenius norm of the rows' deviation from their mean (`‖z − 𝟙z̄ᵀ‖_F`),
/// and the mean row.
fn consensus_error(z: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let mean = z.row_mean().transpose();
    let mut acc = 0.0;
    for i in 0..z.nrows() {
        let d = z.row(i).transpose() - &mean;
        acc += d.norm_squared();
    }
    (acc.sqrt(), mean)
}

/// Evaluates the six-state [`ErrorVector`] of a solver state.
///
/// # Arguments
///
/// * `state` — a distributed solver state (one row per node).
/// * `p` — the instance being solved (provides `x*`, `P̄`, and `∇H*`).
/// * `l` — the smoothness constant used to scale the tracker coordinates
///   (pass `p.constants().l`).
///
/// # Errors
///
/// [`AnalysisError::AssumptionViolation`] when `∇H*` does not exist
/// (instances whose dual cost is not strongly convex).
pub fn error_vector(
    state: &NetworkState,
    p: &SaddleProblem,
    l: f64,
) -> Result<ErrorVector, AnalysisError> {
    if !(l > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "smoothness constant must be positive, got {l}"
        )));
    }
    let n = state.x.nrows() as f64;
    let (u1, x_bar) = consensus_error(&state.x);
    let (u4, y_bar) = consensus_error(&state.y);
    let (q_dev, _) = consensus_error(&state.q);
    let (w_dev, _) = consensus_error(&state.w);
    let u2 = n.sqrt() * (&x_bar - p.x_star()).norm();
    let y_target = grad_h_star(p, &(p.p_bar() * &x_bar))
        .map_err(|e| AnalysisError::AssumptionViolation(e.to_string()))?;
    let u5 = n.sqrt() * (&y_bar - y_target).norm();
    Ok(ErrorVector {
        u: [u1, u2, q_dev / l, u4, u5, w_dev / l],
    })
}

// ---- Six-by-six system matrix -------------------------------------------------

/// The 6×6 entrywise bound matrix of the error recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix6 {
    /// Entries, row `i` bounding the next value of `u_{i+1}`.
    pub entries: DMatrix<f64>,
}

/// Lower bound that the conservativeness constant `c` must strictly exceed
/// for the certificate weights to exist: `2L²/σ_min² + 2σ_max²κ/σ_min² + 1`.
#[must_use]
pub fn min_conservativeness(k: &ProblemConstants) -> f64 {
    2.0 * k.l * k.l / (k.sigma_min * k.sigma_min)
        + 2.0 * k.sigma_max * k.sigma_max * k.kappa / (k.sigma_min * k.sigma_min)
        + 1.0
}

fn check_constants_for_certificates(k: &ProblemConstants) -> Result<(), AnalysisError> {
    if !(k.mu > 0.0) {
        return Err(AnalysisError::AssumptionViolation(
            "certificates require a strongly convex dual cost (mu > 0)".into(),
        ));
    }
    if !(k.sigma_min > 0.0) {
        return Err(AnalysisError::AssumptionViolation(
            "certificates require a full-column-rank average coupling (sigma_min > 0)".into(),
        ));
    }
    if !(k.l > 0.0 && k.l1 >= 0.0 && k.l2 >= 0.0 && k.sigma_max > 0.0) {
        return Err(AnalysisError::InvalidParameter(
            "smoothness and coupling constants must be positive".into(),
        ));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<(), AnalysisError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(AnalysisError::InvalidParameter(format!(
            "spectral gap parameter must lie in [0, 1), got {lambda}"
        )));
    }
    Ok(())
}

/// Assembles the 6×6 system matrix `M` bounding the error recursion
/// `u⁺ ≤ M u + N s` at stepsizes `(alpha, beta)`.
///
/// # Arguments
///
/// * `k` — aggregate constants (needs `mu > 0`, `sigma_min > 0`).
/// * `lambda` — spectral gap parameter of the mixing matrix, in `[0, 1)`.
/// * `alpha`, `beta` — primal/dual stepsizes; must satisfy the coupling
///   condition `alpha ≤ beta·mu²/(c·sigma_max²)` within certificate slack
///   (the bound's cross terms are only valid in that regime).
/// * `c` — conservativeness constant, strictly above
///   [`min_conservativeness`].
///
/// # Errors
///
/// [`AnalysisError::AssumptionViolation`] for instances without the
/// required structure; [`AnalysisError::InvalidParameter`] when `lambda`,
/// `c`, or the stepsize coupling condition is out of range.
pub fn build_m(
    k: &ProblemConstants,
    lambda: f64,
    alpha: f64,
    beta: f64,
    c: f64,
) -> Result<SystemMatrix6, AnalysisError> {
    check_constants_for_certificates(k)?;
    check_lambda(lambda)?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "stepsizes must be positive, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if c <= min_conservativeness(k) {
        return Err(AnalysisError::InvalidParameter(format!(
            "conservativeness constant {c} must exceed {}",
            min_conservativeness(k)
        )));
    }
    let alpha_cap = beta * k.mu * k.mu / (c * k.sigma_max * k.sigma_max);
    if alpha > alpha_cap * (1.0 + 1e-9) {
        return Err(AnalysisError::InvalidParameter(format!(
            "stepsize coupling violated: alpha = {alpha} exceeds beta·mu²/(c·sigma_max²) = {alpha_cap:.6e}"
        )));
    }

    let (l1, l2, l, mu) = (k.l1, k.l2, k.l, k.mu);
    let (sm, s2) = (k.sigma_max, k.sigma_max * k.sigma_max);
    let lam = lambda;

    // Cross-term magnitudes shared between rows.
    let m1 = lam * (l + s2 / mu);
    let m2 = lam * (s2 / l) * (1.0 + l / mu);
    let m3 = (sm / mu) * (l1 + s2 / mu);
    let m4 = lam * (sm / l) * (l + s2 / mu);
    let m5 = lam * sm * (1.0 + l / mu);

    let rows: [[f64; 6]; 6] = [
        [lam, 0.0, alpha * l, 0.0, 0.0, 0.0],
        [
            alpha * l1,
            1.0 - alpha * k.sigma_min * k.sigma_min / l2,
            0.0,
            0.0,
            alpha * sm,
            0.0,
        ],
        [
            lam + alpha * lam * l + beta * lam * s2 / l,
            alpha * m1 + beta * m2,
            lam + alpha * lam * l,
            (lam / l + alpha * lam + beta * lam) * sm,
            (alpha * lam + beta * lam) * sm,
            beta * lam * sm,
        ],
        [0.0, 0.0, 0.0, lam, 0.0, beta * l],
        [
            alpha * sm * l1 / mu,
            alpha * m3,
            0.0,
            alpha * s2 / mu + beta * l2,
            1.0 - beta * mu * (1.0 - 1.0 / c),
            0.0,
        ],
        [
            lam * sm / l + alpha * lam * sm + beta * lam * sm,
            alpha * m4 + beta * m5,
            alpha * lam * sm,
            lam + alpha * lam * s2 / l + beta * lam * l,
            alpha * lam * s2 / l + beta * lam * l,
            lam + beta * lam * l,
        ],
    ];
    let mut entries = DMatrix::<f64>::zeros(6, 6);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(SystemMatrix6 { entries })
}

/// Assembles the forcing matrix `N_k` of the error recursion: the imprint of the
/// initial coupling heterogeneity `tau` on the averaged-iterate rows. For
/// the coupling-consensus solver the effect decays as `λ^k`; for the
/// frozen-coupling variant it is constant in `k`.
///
/// Nonzero entries: row 2 column 2 (`alpha·decay·tau`, primal averaged
/// error driven by `‖x‖`-scale bias) and row 5 column 1
/// (`beta·decay·tau`, dual averaged error), zero-indexed rows (1,1) and
/// (4,0).
///
/// # Errors
///
/// [`AnalysisError::InvalidParameter`] for `lambda` outside `[0, 1)`.
pub fn build_n(
    k: &ProblemConstants,
    lambda: f64,
    alpha: f64,
    beta: f64,
    iteration: u64,
    frozen_coupling: bool,
) -> Result<DMatrix<f64>, AnalysisError> {
    check_lambda(lambda)?;
    let decay = if frozen_coupling {
        1.0
    } else {
        lambda.powi(iteration.min(i32::MAX as u64) as i32)
    };
    let mut n = DMatrix::<f64>::zeros(6, 6);
    n[(1, 1)] = alpha * decay * k.tau;
    n[(4, 0)] = beta * decay * k.tau;
    Ok(n)
}

// ---- Contraction certificate ----------------------------------------------

/// Builds the positive certificate weights `δ` for the entrywise
/// contraction check `M δ ≤ η δ`.
///
/// The weights are explicit functions of the aggregate constants, the gap
/// parameter, and the conservativeness constant `c`. At `lambda = 0`
/// (complete graph) the two weights attached to pure-consensus rows vanish
/// together with those rows of `M`, which keeps the certificate valid.
///
/// # Errors
///
/// [`AnalysisError::InvalidParameter`] if `c` is too small for the internal
/// scaling to stay positive, or `lambda` is out of `[0, 1)`.
pub fn build_delta(
    k: &ProblemConstants,
    lambda: f64,
    c: f64,
) -> Result<DVector<f64>, AnalysisError> {
    check_constants_for_certificates(k)?;
    check_lambda(lambda)?;
    if c <= 1.0 {
        return Err(AnalysisError::InvalidParameter(format!(
            "conservativeness constant must exceed 1, got {c}"
        )));
    }
    let (l, mu) = (k.l, k.mu);
    let (sm, s_min2) = (k.sigma_max, k.sigma_min * k.sigma_min);
    let l1 = l / sm + sm / mu;
    let l3 = 1.0 / (c - 1.0);
    let d = 1.0 - 2.0 * l1 * l3 * sm * l / s_min2;
    if !(d > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "certificate scaling is nonpositive (d = {d}); increase the conservativeness constant"
        )));
    }
    let l2 = sm * l / (d * s_min2);
    let ratio = lambda / (1.0 - lambda);
    let delta = [
        sm / l,
        4.0 * l2 * (1.0 + l3),
        ratio * 2.0 * sm / l,
        (c - 1.0) / (2.0 * (1.0 + c * k.kappa)),
        2.0 * l3 * (1.0 + 4.0 * l1 * l2 * (1.0 + l3)) + 1.0,
        ratio * sm * sm * (1.0 / (l * l) + 1.0 / s_min2),
    ];
    Ok(DVector::from_row_slice(&delta))
}

/// Predicted contraction factor `η = 1 − α·β·σ_min²/κ` of the certified
/// recursion.
///
/// # Errors
///
/// [`AnalysisError::AssumptionViolation`] without strong duality structure;
/// [`AnalysisError::InvalidParameter`] for nonpositive stepsizes.
pub fn predicted_eta(k: &ProblemConstants, alpha: f64, beta: f64) -> Result<f64, AnalysisError> {
    check_constants_for_certificates(k)?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "stepsizes must be positive, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(1.0 - alpha * beta * k.sigma_min * k.sigma_min / k.kappa)
}

/// Result of the entrywise contraction check `M δ ≤ η δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Report {
    /// True when every row satisfies the inequality within
    /// [`CERTIFICATE_TOL`], `η < 1`, and `δ ≥ 0` entrywise.
    pub holds: bool,
    /// Per-row slack `η·δ_i − (M δ)_i`; nonnegative (within tolerance) rows
    /// satisfy the certificate.
    pub slack: [f64; 6],
}

/// Checks the entrywise contraction certificate `M δ ≤ η δ`.
///
/// A passing check proves `ρ(M) ≤ η` in the `δ`-weighted max norm. Weights
/// are required to be nonnegative; a zero weight is sound exactly when it
/// co-occurs with an (effectively) zero row contribution, which the
/// entrywise inequality itself enforces.
///
/// # Errors
///
/// [`AnalysisError::InvalidParameter`] for a non-6×6 matrix or wrong-length
/// weight vector.
pub fn verify_lemma2(
    m: &SystemMatrix6,
    delta: &DVector<f64>,
    eta: f64,
) -> Result<Lemma2Report, AnalysisError> {
    if m.entries.nrows() != 6 || m.entries.ncols() != 6 || delta.len() != 6 {
        return Err(AnalysisError::InvalidParameter(
            "certificate check needs a 6×6 matrix and 6 weights".into(),
        ));
    }
    let md = &m.entries * delta;
    let mut slack = [0.0_f64; 6];
    let mut holds = eta < 1.0;
    for i in 0..6 {
        slack[i] = eta * delta[i] - md[i];
        if delta[i] < 0.0 || slack[i] < -CERTIFICATE_TOL {
            holds = false;
        }
    }
    Ok(Lemma2Report { holds, slack })
}

// ---- Exact linear model for quadratic instances ---------------------------

/// The exact one-step error propagation matrix of a quadratic instance.
#[derive(Debug, Clone)]
pub struct QuadLti {
    /// The `side × side` iteration matrix.
    pub m: DMatrix<f64>,
    /// Node count the model was built for.
    pub n: usize,
    /// Primal dimension per node.
    pub p_x: usize,
    /// Dual dimension per node.
    pub p_y: usize,
}

impl QuadLti {
    /// State dimension: `2·n·p_x + p_x + 2·n·p_y + p_y`.
    #[must_use]
    pub fn side(&self) -> usize {
        2 * self.n * self.p_x + self.p_x + 2 * self.n * self.p_y + self.p_y
    }
}

fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(DMatrix::nrows).sum();
    let cols: usize = blocks.iter().map(DMatrix::ncols).sum();
    let mut out = DMatrix::<f64>::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Assembles the exact linear iteration matrix `M̃` of the
/// frozen-coupling gradient-tracking solver on a **quadratic** instance
/// (on shared-coupling instances the coupling-consensus variant follows
/// the same recursion, since its consensus pass is a no-op there).
///
/// The state ordering is that of [`quad_error_coords`]:
/// `[x̃; x̄ − x*; q̃; ỹ; ȳ − y*; w̃]` with consensus deviations stacked
/// node-major. One application of `M̃` reproduces one solver step exactly
/// (verified to relative accuracy ~1e−11 by the test suites), so
/// `ρ(M̃) < 1` is the sharp linear convergence criterion for the instance.
///
/// # Errors
///
/// [`AnalysisError::AssumptionViolation`] for non-quadratic instances;
/// [`AnalysisError::InvalidParameter`] if the state dimension would exceed
/// [`DENSE_EIG_MAX_SIDE`] or the weight matrix size mismatches.
pub fn build_quad_lti(
    p: &SaddleProblem,
    w: &WeightMatrix,
    alpha: f64,
    beta: f64,
) -> Result<QuadLti, AnalysisError> {
    if p.kind() != ProblemKind::Quadratic {
        return Err(AnalysisError::AssumptionViolation(format!(
            "exact linear model requires the quadratic family, got {}",
            p.kind().name()
        )));
    }
    if w.n() != p.n() {
        return Err(AnalysisError::InvalidParameter(format!(
            "weight matrix is for {} nodes but the instance has {}",
            w.n(),
            p.n()
        )));
    }
    let (n, px, py) = (p.n(), p.p_x(), p.p_y());
    let side = 2 * n * px + px + 2 * n * py + py;
    if side > DENSE_EIG_MAX_SIDE {
        return Err(AnalysisError::InvalidParameter(format!(
            "state dimension {side} exceeds the dense-model cap {DENSE_EIG_MAX_SIDE}"
        )));
    }

    let eye_x = DMatrix::<f64>::identity(px, px);
    let eye_y = DMatrix::<f64>::identity(py, py);
    let ones_row = DMatrix::<f64>::from_element(1, n, 1.0 / n as f64);
    let ones_col = DMatrix::<f64>::from_element(n, 1, 1.0);
    let winf = DMatrix::<f64>::from_element(n, n, 1.0 / n as f64);

    // Lifted consensus operators per coordinate space.
    let e1 = ones_row.kronecker(&eye_x); // px × n·px  (block-mean)
    let u1 = ones_col.kronecker(&eye_x); // n·px × px  (broadcast)
    let w1 = w.matrix.kronecker(&eye_x);
    let w1_dev = &w1 - winf.kronecker(&eye_x);
    let e2 = ones_row.kronecker(&eye_y);
    let u2 = ones_col.kronecker(&eye_y);
    let w2 = w.matrix.kronecker(&eye_y);
    let w2_dev = &w2 - winf.kronecker(&eye_y);

    // Block-diagonal lifts of the symmetrized local data.
    let mut a_blocks = Vec::with_capacity(n);
    let mut b_blocks = Vec::with_capacity(n);
    let mut p_blocks = Vec::with_capacity(n);
    let mut pt_blocks = Vec::with_capacity(n);
    for lc in p.locals() {
        match lc {
            LocalCost::Quadratic {
                q_mat,
                r_mat,
                coupling,
                ..
            } => {
                a_blocks.push(q_mat + q_mat.transpose());
                b_blocks.push(r_mat + r_mat.transpose());
                p_blocks.push(coupling.clone());
                pt_blocks.push(coupling.transpose());
            }
            _ => unreachable!("kind checked above"),
        }
    }
    let lam_a = block_diag(&a_blocks);
    let lam_b = block_diag(&b_blocks);
    let lam_p = block_diag(&p_blocks);
    let lam_pt = block_diag(&pt_blocks);

    let a_bar = p.a_bar().expect("quadratic instances carry a_bar").clone();
    let b_bar = p.b_bar().clone();
    let p_bar = p.p_bar();
    let pt_bar = p_bar.transpose();

    let eye_nx = DMatrix::<f64>::identity(n * px, n * px);
    let eye_ny = DMatrix::<f64>::identity(n * py, n * py);

    // Shared products.
    let la_u1 = &lam_a * &u1; //   n·px × px
    let lpt_u2 = &lam_pt * &u2; // n·px × py
    let lp_u1 = &lam_p * &u1; //   n·py × px
    let lb_u2 = &lam_b * &u2; //   n·py × py
    let e1_la = &e1 * &lam_a; //   px × n·px
    let e1_lpt = &e1 * &lam_pt; // px × n·py
    let e2_lp = &e2 * &lam_p; //   py × n·px
    let e2_lb = &e2 * &lam_b; //   py × n·py

    // Row blocks of the state update, in state order.
    // 1. x̃⁺ = W̄₁ x̃ − α W̄₁ q̃
    let r1 = [
        w1_dev.clone(),
        DMatrix::zeros(n * px, px),
        -&w1_dev * alpha,
        DMatrix::zeros(n * px, n * py),
        DMatrix::zeros(n * px, py),
        DMatrix::zeros(n * px, n * py),
    ];
    // 2. (x̄ − x*)⁺ = −α E₁Λ_A x̃ + (I − α Ā)(x̄ − x*) − α E₁Λ_Pᵀ ỹ − α P̄ᵀ (ȳ − y*)
    let r2 = [
        -&e1_la * alpha,
        &eye_x - &a_bar * alpha,
        DMatrix::zeros(px, n * px),
        -&e1_lpt * alpha,
        -&pt_bar * alpha,
        DMatrix::zeros(px, n * py),
    ];
    // 3. q̃⁺ (tracker deviation; the leading W̄₁ applies to every term)
    let r3 = [
        &w1_dev
            * (&lam_a * (&w1 - &eye_nx) - (&la_u1 * &e1_la) * alpha + (&lpt_u2 * &e2_lp) * beta),
        &w1_dev * (-(&la_u1 * &a_bar) * alpha + (&lpt_u2 * p_bar) * beta),
        &w1_dev - (&w1_dev * &lam_a * &w1) * alpha,
        &w1_dev
            * (&lam_pt * (&w2 - &eye_ny) - (&la_u1 * &e1_lpt) * alpha - (&lpt_u2 * &e2_lb) * beta),
        &w1_dev * (-(&la_u1 * &pt_bar) * alpha - (&lpt_u2 * &b_bar) * beta),
        (&w1_dev * &lam_pt * &w2) * beta,
    ];
    // 4. ỹ⁺ = W̄₂ ỹ + β W̄₂ w̃
    let r4 = [
        DMatrix::zeros(n * py, n * px),
        DMatrix::zeros(n * py, px),
        DMatrix::zeros(n * py, n * px),
        w2_dev.clone(),
        DMatrix::zeros(n * py, py),
        &w2_dev * beta,
    ];
    // 5. (ȳ − y*)⁺ = β E₂Λ_P x̃ + β P̄ (x̄ − x*) − β E₂Λ_B ỹ + (I − β B̄)(ȳ − y*)
    let r5 = [
        &e2_lp * beta,
        p_bar * beta,
        DMatrix::zeros(py, n * px),
        -&e2_lb * beta,
        &eye_y - &b_bar * beta,
        DMatrix::zeros(py, n * py),
    ];
    // 6. w̃⁺ (dual tracker deviation)
    let r6 = [
        &w2_dev * (&lam_p * (&w1 - &eye_nx) - (&lp_u1 * &e1_la) * alpha - (&lb_u2 * &e2_lp) * beta),
        &w2_dev * (-(&lp_u1 * &a_bar) * alpha - (&lb_u2 * p_bar) * beta),
        -(&w2_dev * &lam_p * &w1) * alpha,
        &w2_dev
            * (-(&lam_b * (&w2 - &eye_ny)) + (&lb_u2 * &e2_lb) * beta - (&lp_u1 * &e1_lpt) * alpha),
        &w2_dev * ((&lb_u2 * &b_bar) * beta - (&lp_u1 * &pt_bar) * alpha),
        &w2_dev - (&w2_dev * &lam_b * &w2) * beta,
    ];

    let seg_lens = [n * px, px, n * px, n * py, py, n * py];
    let mut offsets = [0usize; 6];
    for i in 1..6 {
        offsets[i] = offsets[i - 1] + seg_lens[i - 1];
    }
    let mut m = DMatrix::<f64>::zeros(side, side);
    for (ri, row) in [r1, r2, r3, r4, r5, r6].iter().enumerate() {
        for (ci, blk) in row.iter().enumerate() {
            m.view_mut((offsets[ri], offsets[ci]), (blk.nrows(), blk.ncols()))
                .copy_from(blk);
        }
    }
    Ok(QuadLti {
        m,
        n,
        p_x: px,
        p_y: py,
    })
}

/// Stacks a solver state into the error coordinates of [`build_quad_lti`]:
/// `[x̃; x̄ − x*; q̃; ỹ; ȳ − y*; w̃]`, deviations node-major.
///
/// # Errors
///
/// [`AnalysisError::InvalidParameter`] if the state shape does not match
/// the instance.
pub fn quad_error_coords(
    state: &NetworkState,
    p: &SaddleProblem,
) -> Result<DVector<f64>, AnalysisError> {
    let (n, px, py) = (p.n(), p.p_x(), p.p_y());
    if state.x.nrows() != n || state.x.ncols() != px || state.y.ncols() != py {
        return Err(AnalysisError::InvalidParameter(
            "state shape does not match the instance".into(),
        ));
    }
    let side = 2 * n * px + px + 2 * n * py + py;
    let mut out = DVector::<f64>::zeros(side);
    let x_bar = state.x.row_mean().transpose();
    let y_bar = state.y.row_mean().transpose();
    let q_bar = state.q.row_mean().transpose();
    let w_bar = state.w.row_mean().transpose();
    let mut pos = 0;
    for i in 0..n {
        out.rows_mut(pos, px)
            .copy_from(&(state.x.row(i).transpose() - &x_bar));
        pos += px;
    }
    out.rows_mut(pos, px).copy_from(&(&x_bar - p.x_star()));
    pos += px;
    for i in 0..n {
        out.rows_mut(pos, px)
            .copy_from(&(state.q.row(i).transpose() - &q_bar));
        pos += px;
    }
    for i in 0..n {
        out.rows_mut(pos, py)
            .copy_from(&(state.y.row(i).transpose() - &y_bar));
        pos += py;
    }
    out.rows_mut(pos, py).copy_from(&(&y_bar - p.y_star()));
    pos += py;
    for i in 0..n {
        out.rows_mut(pos, py)
            .copy_from(&(state.w.row(i).transpose() - &w_bar));
        pos += py;
    }
    Ok(out)
}

// ---- Averaged saddle matrix and eigenvalue perturbation --------------------

/// The averaged saddle matrix `S` with its spectrum.
#[derive(Debug, Clone)]
pub struct SaddleMatrixReport {
    /// `S = [[−Ā, −P̄ᵀ], [P̄, −B̄]]`, size `(p_x + p_y)²`.
    pub s: DMatrix<f64>,
    /// Eigenvalues of `S`.
    pub eigenvalues: Vec<Complex<f64>>,
    /// True when every eigenvalue has strictly negative real part — the
    /// continuous-time stability condition for simultaneous small-stepsize
    /// descent–ascent on the averaged objective.
    pub hurwitz: bool,
}

/// Builds the averaged saddle matrix `S = [[−Ā, −P̄ᵀ], [P̄, −B̄]]` driving
/// the small-stepsize dynamics of the averaged iterates, and reports its
/// spectrum and Hurwitz status.
///
/// # Errors
///
/// [`AnalysisError::AssumptionViolation`] for instance families whose
/// primal curvature is not constant (the convex-regularizer regression).
pub fn build_s(p: &SaddleProblem) -> Result<SaddleMatrixReport, AnalysisError> {
    let a_bar = p.a_bar().ok_or_else(|| {
        AnalysisError::AssumptionViolation(
            "the averaged saddle matrix needs a constant primal curvature".into(),
        )
    })?;
    let (px, py) = (p.p_x(), p.p_y());
    let mut s = DMatrix::<f64>::zeros(px + py, px + py);
    s.view_mut((0, 0), (px, px)).copy_from(&(-a_bar));
    s.view_mut((0, px), (px, py))
        .copy_from(&(-p.p_bar().transpose()));
    s.view_mut((px, 0), (py, px)).copy_from(p.p_bar());
    s.view_mut((px, px), (py, py)).copy_from(&(-p.b_bar()));
    let eigenvalues: Vec<Complex<f64>> = s.clone().complex_eigenvalues().iter().copied().collect();
    let hurwitz = eigenvalues.iter().all(|e| e.re < 0.0);
    Ok(SaddleMatrixReport {
        s,
        eigenvalues,
        hurwitz,
    })
}

/// One stepsize's worth of eigenvalue-perturbation measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRow {
    /// Stepsize `α` (used for both primal and dual updates).
    pub alpha: f64,
    /// `max_i |λ_i(M̃_α) − (1 + α·λ_i(S))| / α` over the matched pairs.
    pub max_ratio: f64,
    /// Spectral radius of `M̃_α`.
    pub rho: f64,
    /// Number of predicted eigenvalues whose nearest match fell outside
    /// the guard radius `10·α·max|λ(S)|` (0 when matching is unambiguous).
    pub outside_guard: usize,
}

/// Result of [`eigen_perturbation_check`].
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    /// Eigenvalues of the averaged saddle matrix `S`.
    pub saddle_eigenvalues: Vec<Complex<f64>>,
    /// One row per requested stepsize, in input order.
    pub rows: Vec<PerturbationRow>,
}

/// Measures how well the first-order prediction
/// `λ_i(M̃_α) ≈ 1 + α·λ_i(S)` describes the exact iteration matrix of a
/// quadratic instance, at each stepsize in `alphas` (`β = α`).
///
/// Matching is greedy nearest-neighbour without replacement between the
/// `p_x + p_y` predictions and the full spectrum of `M̃_α`; matches farther
/// than `10·α·max|λ(S)|` are counted in
/// [`PerturbationRow::outside_guard`].
///
/// # Errors
///
/// Propagates errors from [`build_s`] and [`build_quad_lti`];
/// [`AnalysisError::InvalidParameter`] for an empty or nonpositive stepsize
/// list.
pub fn eigen_perturbation_check(
    p: &SaddleProblem,
    w: &WeightMatrix,
    alphas: &[f64],
) -> Result<PerturbationReport, AnalysisError> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(AnalysisError::InvalidParameter(
            "perturbation check needs a nonempty list of positive stepsizes".into(),
        ));
    }
    let s_report = build_s(p)?;
    let s_eigs = s_report.eigenvalues.clone();
    let s_max = s_eigs.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);

    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let lti = build_quad_lti(p, w, alpha, alpha)?;
        let eigs: Vec<Complex<f64>> = lti
            .m
            .clone()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect();
        let rho = eigs.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let targets: Vec<Complex<f64>> = s_eigs
            .iter()
            .map(|l| Complex::new(1.0 + alpha * l.re, alpha * l.im))
            .collect();

        // Greedy globally-nearest matching without replacement.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(targets.len() * eigs.len());
        for (ti, t) in targets.iter().enumerate() {
            for (ei, e) in eigs.iter().enumerate() {
                pairs.push(((t - e).norm(), ti, ei));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut t_used = vec![false; targets.len()];
        let mut e_used = vec![false; eigs.len()];
        let mut max_dist = 0.0_f64;
        let mut outside_guard = 0usize;
        let guard = 10.0 * alpha * s_max;
        let mut matched = 0usize;
        for (dist, ti, ei) in pairs {
            if t_used[ti] || e_used[ei] {
                continue;
            }
            t_used[ti] = true;
            e_used[ei] = true;
            matched += 1;
            max_dist = max_dist.max(dist);
            if dist > guard {
                outside_guard += 1;
            }
            if matched == targets.len() {
                break;
            }
        }
        rows.push(PerturbationRow {
            alpha,
            max_ratio: max_dist / alpha,
            rho,
            outside_guard,
        });
    }
    Ok(PerturbationReport {
        saddle_eigenvalues: s_eigs,
        rows,
    })
}

// ---- Spectral radius ---------------------------------------------------------

/// Spectral radius of a square matrix.
///
/// Up to side [`DENSE_EIG_MAX_SIDE`] this is a dense eigendecomposition;
/// beyond it, a power iteration with a seeded pseudorandom start whose
/// estimate is the geometric mean of consecutive norm-growth ratios (stable
/// when the dominant eigenvalue is a complex pair). The iterative path is a
/// documented best-effort estimate for out-of-scale inputs.
///
/// # Errors
///
/// [`AnalysisError::InvalidParameter`] for empty or non-square input;
/// [`AnalysisError::NumericFailure`] if the iterative estimate stalls.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64, AnalysisError> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(AnalysisError::InvalidParameter(format!(
            "spectral radius needs a nonempty square matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if n <= DENSE_EIG_MAX_SIDE {
        return Ok(m
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ADD_D00D);
    let mut v =
        DVector::<f64>::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    v /= v.norm();
    let mut prev_est = f64::INFINITY;
    let mut prev_ratio: Option<f64> = None;
    for _ in 0..SPECTRAL_MAX_ITERS {
        let av = m * &v;
        let r = av.norm();
        if r <= f64::MIN_POSITIVE {
            return Ok(0.0);
        }
        let est = match prev_ratio {
            Some(pr) => (pr * r).sqrt(),
            None => r,
        };
        v = av / r;
        if (est - prev_est).abs() <= SPECTRAL_REL_TOL * est.max(f64::MIN_POSITIVE) {
            return Ok(est);
        }
        prev_est = est;
        prev_ratio = Some(r);
    }
    Err(AnalysisError::NumericFailure(format!(
        "power iteration did not settle in {SPECTRAL_MAX_ITERS} steps"
    )))
}

// ---- Runtime monitor ----------------------------------------------------------

/// Result of checking `u⁺ ≤ M u + N_k s` along a live solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    /// Worst entrywise violation `max_k max_i (u⁺_i − (M u + N_k s)_i)`
    /// over the run; at certified stepsizes this is ≤ numerical noise.
    pub worst_violation: f64,
    /// Steps monitored.
    pub iterations: u64,
    /// Final error vector.
    pub final_error: ErrorVector,
}

/// Runs a gradient-tracking solver for `iters` steps and verifies at each
/// step that the measured error vector obeys the bound
/// `u⁺ ≤ M u + N_k s`, where `s = (‖x‖_F, ‖y‖_F, 0, …)`.
///
/// # Arguments
///
/// * `variant` — must be [`Variant::GtGda`] or [`Variant::GtGdaLite`]; the
///   forcing matrix decay follows the variant.
/// * `alpha`, `beta`, `c` — stepsizes and conservativeness constant the
///   system matrix is built at (use the certified values).
///
/// # Errors
///
/// [`AnalysisError::InvalidParameter`] for other solver variants;
/// propagates certificate-assembly errors and wraps solver failures as
/// [`AnalysisError::NumericFailure`].
#[allow(clippy::too_many_arguments)]
pub fn lemma1_monitor(
    p: &SaddleProblem,
    w: &WeightMatrix,
    variant: Variant,
    alpha: f64,
    beta: f64,
    c: f64,
    iters: u64,
    seed: u64,
) -> Result<MonitorReport, AnalysisError> {
    let frozen_coupling = match variant {
        Variant::GtGda => false,
        Variant::GtGdaLite => true,
        other => {
            return Err(AnalysisError::InvalidParameter(format!(
                "the error recursion describes the gradient-tracking variants, not {}",
                other.name()
            )))
        }
    };
    let k = *p.constants();
    let m = build_m(&k, w.lambda, alpha, beta, c)?;
    let cfg = SolverConfig {
        variant,
        alpha,
        beta,
        max_iters: iters,
        stop_gap: 0.0,
        seed,
        record_every: 1,
    };
    let mut state =
        init_state(p, p.n(), seed).map_err(|e| AnalysisError::NumericFailure(e.to_string()))?;
    let mut u = error_vector(&state, p, k.l)?;
    let mut worst = f64::NEG_INFINITY;
    for it in 0..iters {
        let s_vec = DVector::from_row_slice(&[state.x.norm(), state.y.norm(), 0.0, 0.0, 0.0, 0.0]);
        state =
            step(&state, w, p, &cfg).map_err(|e| AnalysisError::NumericFailure(e.to_string()))?;
        let u_next = error_vector(&state, p, k.l)?;
        let n_mat = build_n(&k, w.lambda, alpha, beta, it, frozen_coupling)?;
        let bound = &m.entries * u.as_dvector() + n_mat * s_vec;
        for i in 0..6 {
            worst = worst.max(u_next.u[i] - bound[i]);
        }
        u = u_next;
    }
    Ok(MonitorReport {
        worst_violation: worst,
        iterations: iters,
        final_error: u,
    })
}

// ---- Tests ---------------------------------------------------------------------
