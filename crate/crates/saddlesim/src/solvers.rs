//! Distributed saddle-point solvers and the certified stepsize policy.
//!
//! Four iteration schemes over a mixing matrix `W` ([`Variant`]):
//!
//! - **`gt-gda`** — gradient descent–ascent with *gradient tracking* and
//!   *coupling consensus*. Each node keeps primal/dual trackers `(q_i, w_i)`
//!   estimating the network-average gradients, and additionally gossips its
//!   coupling-matrix estimate toward the network average `P̄`:
//!
//!   ```text
//!   P_i ⁺ = Σ_r w_{ir} P_r                   (coupling consensus)
//!   x_i⁺ = Σ_r w_{ir} (x_r − α q_r)
//!   y_i⁺ = Σ_r w_{ir} (y_r + β w_r)
//!   q_i⁺ = Σ_r w_{ir} (q_r + ∇_x f_r⁺ − ∇_x f_r)
//!   w_i⁺ = Σ_r w_{ir} (w_r + ∇_y f_r⁺ − ∇_y f_r)
//!   ```
//!
//!   with both fresh gradients evaluated at the *new* point using the
//!   node's current coupling estimate, and trackers initialized to the
//!   initial gradients.
//! - **`gt-gda-lite`** — identical except the coupling-consensus step is
//!   skipped: nodes differentiate through their private `P_i` forever.
//!   This halves per-step communication when couplings are large; doubly
//!   stochastic mixing still preserves the tracker means exactly, so any
//!   fixed point forces consensus at the exact saddle.
//! - **`d-gda`** — plain distributed descent–ascent without trackers:
//!   `x_i⁺ = Σ_r w_{ir} x_r − α ∇_x f_i`, gradients at the *current* local
//!   point. Carries a well-known heterogeneity-induced bias: it stalls at a
//!   plateau whose height scales with the stepsizes and node disagreement.
//! - **`centralized`** — simultaneous descent–ascent on the averaged
//!   objective from a single state (ignores `W`); the single-node
//!   gradient-tracking step reproduces it bit-for-bit.
//!
//! [`run`] produces a [`Trace`] of optimality gaps, consensus residuals,
//! tracker-conservation residuals, and the dual-lag metric used by the
//! error-recursion analysis. Divergence (non-finite iterates or gaps above
//! [`crate::tol::DIVERGENCE_GAP`]) is flagged **in the trace**, not as an
//! error: a diverged run is a result.
//!
//! [`theorem1_stepsizes`] implements the certified policy: a closed-form
//! base stepsize pair from the aggregate constants and the spectral gap,
//! with a conservativeness constant `c` escalated ×4 until the entrywise
//! contraction certificate of [`crate::analysis`] passes. The returned
//! stepsizes provably contract the six-state error recursion at rate
//! `η < 1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{build_delta, build_m, min_conservativeness, predicted_eta, verify_lemma2};
use crate::graph::WeightMatrix;
use crate::problem::{
    grad_h_star, grad_x, grad_x_with_coupling, grad_y, grad_y_with_coupling, ProblemConstants,
    SaddleProblem,
};
use crate::tol::{CERTIFICATE_ESCALATION_CAP, DIVERGENCE_GAP, RANK_TOL};

/// Errors from solver configuration and the stepsize policy.
#[derive(Debug, Error)]
pub enum SolverError {
    /// A configuration value or state shape is malformed.
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    /// The instance violates an assumption the requested operation needs.
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),
    /// No conservativeness constant made the contraction certificate pass.
    #[error(
        "certified stepsize search failed after {escalations} escalations \
         (final conservativeness constant {final_c:.3e})"
    )]
    CertificateFailed {
        /// Number of ×4 escalations attempted.
        escalations: usize,
        /// Conservativeness constant at the last attempt.
        final_c: f64,
    },
}

/// The solver iteration schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Gradient tracking with coupling consensus.
    GtGda,
    /// Gradient tracking with frozen private couplings.
    GtGdaLite,
    /// Plain distributed descent–ascent (no trackers; biased).
    DGda,
    /// Single-state descent–ascent on the averaged objective.
    Centralized,
}

impl Variant {
    /// Human-readable name, matching the configuration-file spelling.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            Variant::GtGda => "gt-gda",
            Variant::GtGdaLite => "gt-gda-lite",
            Variant::DGda => "d-gda",
            Variant::Centralized => "centralized",
        }
    }

    /// Whether this variant maintains gradient trackers.
    #[must_use]
    pub fn has_trackers(self) -> bool {
        matches!(self, Variant::GtGda | Variant::GtGdaLite)
    }
}

/// Solver configuration for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Iteration scheme.
    pub variant: Variant,
    /// Primal stepsize, > 0.
    pub alpha: f64,
    /// Dual stepsize, > 0.
    pub beta: f64,
    /// Iteration budget (0 records only the initial state).
    pub max_iters: u64,
    /// Stop as soon as the optimality gap falls to this value; 0 disables
    /// early stopping.
    pub stop_gap: f64,
    /// Seed for the initial iterates.
    pub seed: u64,
    /// Record every this-many iterations (≥ 1); iteration 0 and the final
    /// iteration are always recorded.
    pub record_every: u64,
}

/// The full network state of a distributed solver: one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// Primal iterates, `n × p_x`.
    pub x: DMatrix<f64>,
    /// Dual iterates, `n × p_y`.
    pub y: DMatrix<f64>,
    /// Primal gradient trackers, `n × p_x`.
    pub q: DMatrix<f64>,
    /// Dual gradient trackers, `n × p_y`.
    pub w: DMatrix<f64>,
    /// Per-node coupling estimates (start at the private couplings).
    pub p_est: Vec<DMatrix<f64>>,
    /// Cached `∇_x f_i` at the current point and coupling estimate.
    pub gx: DMatrix<f64>,
    /// Cached `∇_y f_i` at the current point and coupling estimate.
    pub gy: DMatrix<f64>,
}

impl NetworkState {
    /// True when every entry of every field is finite.
    #[must_use]
    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.y.iter().all(|v| v.is_finite())
            && self.q.iter().all(|v| v.is_finite())
            && self.w.iter().all(|v| v.is_finite())
    }
}

/// One recorded iteration of a [`Trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Iteration index (0 = initial state).
    pub iteration: u64,
    /// `‖x̄ − x*‖ + ‖ȳ − y*‖`.
    pub gap_total: f64,
    /// `‖x̄ − x*‖`.
    pub gap_x: f64,
    /// `‖ȳ − y*‖`.
    pub gap_y: f64,
    /// Primal consensus residual `‖x − 𝟙x̄ᵀ‖_F`.
    pub agree_x: f64,
    /// Dual consensus residual `‖y − 𝟙ȳᵀ‖_F`.
    pub agree_y: f64,
    /// Tracker conservation residual `‖q̄ − mean_i ∇_x f_i‖` (0 for
    /// variants without trackers).
    pub track_q: f64,
    /// Tracker conservation residual `‖w̄ − mean_i ∇_y f_i‖`.
    pub track_w: f64,
    /// Dual lag `‖ȳ − ∇H*(P̄x̄)‖`; for instances without strongly convex
    /// dual cost, the feasibility residual `‖P̄x̄ − ∇H(ȳ)‖` instead.
    pub lemma1_y_metric: f64,
}

/// A recorded solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Scheme that produced this trace.
    pub variant: Variant,
    /// Primal stepsize used.
    pub alpha: f64,
    /// Dual stepsize used.
    pub beta: f64,
    /// Recorded rows, ascending iteration; row 0 is the initial state and
    /// the final executed iteration is always present.
    pub rows: Vec<TraceRow>,
    /// First iteration at which divergence was detected, if any.
    pub diverged_at: Option<u64>,
}

impl Trace {
    /// The last recorded row.
    ///
    /// # Panics
    ///
    /// Never panics: every trace holds at least the initial row.
    #[must_use]
    pub fn final_row(&self) -> &TraceRow {
        self.rows
            .last()
            .expect("a trace always records iteration 0")
    }

    /// True when the run was flagged divergent.
    #[must_use]
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// First recorded iteration whose total gap is at or below `target`.
    #[must_use]
    pub fn first_iteration_at_gap(&self, target: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.gap_total <= target)
            .map(|r| r.iteration)
    }
}

// ---- Initialization -----------------------------------------------------------

fn gauss_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Draws the initial distributed state: standard-Gaussian primal rows, then
/// dual rows (row-major each), coupling estimates at the private couplings,
/// trackers at the initial gradients.
///
/// # Arguments
///
/// * `p` — the instance.
/// * `n` — node count; must equal `p.n()`.
/// * `seed` — RNG seed; equal seeds give bitwise-equal states.
///
/// # Errors
///
/// [`SolverError::InvalidParameter`] when `n != p.n()`.
pub fn init_state(p: &SaddleProblem, n: usize, seed: u64) -> Result<NetworkState, SolverError> {
    if n != p.n() {
        return Err(SolverError::InvalidParameter(format!(
            "state size {n} does not match the instance's {} nodes",
            p.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gauss_rows(&mut rng, n, p.p_x());
    let y = gauss_rows(&mut rng, n, p.p_y());
    let p_est: Vec<DMatrix<f64>> = p.locals().iter().map(|lc| lc.coupling().clone()).collect();
    let mut gx = DMatrix::<f64>::zeros(n, p.p_x());
    let mut gy = DMatrix::<f64>::zeros(n, p.p_y());
    for (i, pe) in p_est.iter().enumerate() {
        let xi = x.row(i).transpose();
        let yi = y.row(i).transpose();
        gx.row_mut(i)
            .copy_from(&grad_x_with_coupling(p.local(i), &xi, &yi, pe).transpose());
        gy.row_mut(i)
            .copy_from(&grad_y_with_coupling(p.local(i), &xi, &yi, pe).transpose());
    }
    Ok(NetworkState {
        q: gx.clone(),
        w: gy.clone(),
        x,
        y,
        p_est,
        gx,
        gy,
    })
}

/// Initial state of the centralized loop: a single Gaussian point drawn with
/// the same recipe as [`init_state`] at `n = 1` (so a one-node network and
/// the centralized solver start bitwise identically).
fn init_centralized(p: &SaddleProblem, seed: u64) -> NetworkState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gauss_rows(&mut rng, 1, p.p_x());
    let y = gauss_rows(&mut rng, 1, p.p_y());
    NetworkState {
        q: DMatrix::zeros(1, p.p_x()),
        w: DMatrix::zeros(1, p.p_y()),
        gx: DMatrix::zeros(1, p.p_x()),
        gy: DMatrix::zeros(1, p.p_y()),
        p_est: Vec::new(),
        x,
        y,
    }
}

// ---- One step -------------------------------------------------------------------

fn check_step_args(
    state: &NetworkState,
    w: &WeightMatrix,
    p: &SaddleProblem,
    cfg: &SolverConfig,
) -> Result<(), SolverError> {
    if !(cfg.alpha > 0.0 && cfg.alpha.is_finite() && cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(SolverError::InvalidParameter(format!(
            "stepsizes must be positive and finite, got alpha = {}, beta = {}",
            cfg.alpha, cfg.beta
        )));
    }
    match cfg.variant {
        Variant::Centralized => {
            if state.x.nrows() != 1 {
                return Err(SolverError::InvalidParameter(format!(
                    "the centralized scheme iterates a single state, got {} rows",
                    state.x.nrows()
                )));
            }
        }
        _ => {
            if state.x.nrows() != p.n() || w.n() != p.n() {
                return Err(SolverError::InvalidParameter(format!(
                    "state has {} rows and weights {} nodes, but the instance has {}",
                    state.x.nrows(),
                    w.n(),
                    p.n()
                )));
            }
        }
    }
    if state.x.ncols() != p.p_x() || state.y.ncols() != p.p_y() {
        return Err(SolverError::InvalidParameter(
            "state dimensions do not match the instance".into(),
        ));
    }
    Ok(())
}

/// Advances a solver state by one iteration of `cfg.variant`.
///
/// Pure with respect to its inputs: returns the next state, leaving the
/// current one untouched. Produces non-finite entries rather than erroring
/// when the iteration diverges — [`run`] turns that into a trace flag.
///
/// # Errors
///
/// [`SolverError::InvalidParameter`] for mismatched shapes or nonpositive
/// stepsizes.
pub fn step(
    state: &NetworkState,
    w: &WeightMatrix,
    p: &SaddleProblem,
    cfg: &SolverConfig,
) -> Result<NetworkState, SolverError> {
    check_step_args(state, w, p, cfg)?;
    match cfg.variant {
        Variant::GtGda => Ok(gt_step(state, w, p, cfg, true)),
        Variant::GtGdaLite => Ok(gt_step(state, w, p, cfg, false)),
        Variant::DGda => Ok(dgda_step(state, w, p, cfg)),
        Variant::Centralized => Ok(central_step(state, p, cfg)),
    }
}

fn gt_step(
    state: &NetworkState,
    w: &WeightMatrix,
    p: &SaddleProblem,
    cfg: &SolverConfig,
    coupling_consensus: bool,
) -> NetworkState {
    let n = p.n();
    // Coupling consensus in deviation form: algebraically Σ_r w_{ir} P_r
    // (rows sum to one), but an exact no-op when all estimates agree, so a
    // shared-coupling network runs bitwise identically with and without
    // this step.
    let p_next: Vec<DMatrix<f64>> = if coupling_consensus {
        (0..n)
            .map(|i| {
                let mut acc = state.p_est[i].clone();
                for r in 0..n {
                    if r == i {
                        continue;
                    }
                    let wir = w.matrix[(i, r)];
                    if wir != 0.0 {
                        acc += (&state.p_est[r] - &state.p_est[i]) * wir;
                    }
                }
                acc
            })
            .collect()
    } else {
        state.p_est.clone()
    };

    let x_next = &w.matrix * (&state.x - &state.q * cfg.alpha);
    let y_next = &w.matrix * (&state.y + &state.w * cfg.beta);

    let mut gx_next = DMatrix::<f64>::zeros(n, p.p_x());
    let mut gy_next = DMatrix::<f64>::zeros(n, p.p_y());
    for (i, pn) in p_next.iter().enumerate() {
        let xi = x_next.row(i).transpose();
        let yi = y_next.row(i).transpose();
        gx_next
            .row_mut(i)
            .copy_from(&grad_x_with_coupling(p.local(i), &xi, &yi, pn).transpose());
        gy_next
            .row_mut(i)
            .copy_from(&grad_y_with_coupling(p.local(i), &xi, &yi, pn).transpose());
    }
    let q_next = &w.matrix * (&state.q + &gx_next - &state.gx);
    let w_next = &w.matrix * (&state.w + &gy_next - &state.gy);

    NetworkState {
        x: x_next,
        y: y_next,
        q: q_next,
        w: w_next,
        p_est: p_next,
        gx: gx_next,
        gy: gy_next,
    }
}

fn dgda_step(
    state: &NetworkState,
    w: &WeightMatrix,
    p: &SaddleProblem,
    cfg: &SolverConfig,
) -> NetworkState {
    let n = p.n();
    // Gradients at the *current* local points, private couplings.
    let x_next = &w.matrix * &state.x - &state.gx * cfg.alpha;
    let y_next = &w.matrix * &state.y + &state.gy * cfg.beta;
    let mut gx_next = DMatrix::<f64>::zeros(n, p.p_x());
    let mut gy_next = DMatrix::<f64>::zeros(n, p.p_y());
    for i in 0..n {
        let xi = x_next.row(i).transpose();
        let yi = y_next.row(i).transpose();
        gx_next.row_mut(i).copy_from(
            &grad_x(p.local(i), &xi, &yi)
                .expect("shape checked")
                .transpose(),
        );
        gy_next.row_mut(i).copy_from(
            &grad_y(p.local(i), &xi, &yi)
                .expect("shape checked")
                .transpose(),
        );
    }
    NetworkState {
        x: x_next,
        y: y_next,
        q: state.q.clone(),
        w: state.w.clone(),
        p_est: state.p_est.clone(),
        gx: gx_next,
        gy: gy_next,
    }
}

fn central_step(state: &NetworkState, p: &SaddleProblem, cfg: &SolverConfig) -> NetworkState {
    let xi = state.x.row(0).transpose();
    let yi = state.y.row(0).transpose();
    let n = p.n() as f64;
    let mut gx = DVector::<f64>::zeros(p.p_x());
    let mut gy = DVector::<f64>::zeros(p.p_y());
    for lc in p.locals() {
        gx += grad_x(lc, &xi, &yi).expect("shape checked") / n;
        gy += grad_y(lc, &xi, &yi).expect("shape checked") / n;
    }
    let mut out = state.clone();
    out.x
        .row_mut(0)
        .copy_from(&(state.x.row(0) - gx.transpose() * cfg.alpha));
    out.y
        .row_mut(0)
        .copy_from(&(state.y.row(0) + gy.transpose() * cfg.beta));
    out
}

// ---- Full runs -------------------------------------------------------------------

fn measure(state: &NetworkState, p: &SaddleProblem, variant: Variant, iteration: u64) -> TraceRow {
    let x_bar = state.x.row_mean().transpose();
    let y_bar = state.y.row_mean().transpose();
    let gap_x = (&x_bar - p.x_star()).norm();
    let gap_y = (&y_bar - p.y_star()).norm();

    let dev_norm = |z: &DMatrix<f64>, mean: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..z.nrows() {
            acc += (z.row(i).transpose() - mean).norm_squared();
        }
        acc.sqrt()
    };
    let agree_x = dev_norm(&state.x, &x_bar);
    let agree_y = dev_norm(&state.y, &y_bar);

    let (track_q, track_w) = if variant.has_trackers() {
        let q_bar = state.q.row_mean().transpose();
        let w_bar = state.w.row_mean().transpose();
        let gx_bar = state.gx.row_mean().transpose();
        let gy_bar = state.gy.row_mean().transpose();
        ((q_bar - gx_bar).norm(), (w_bar - gy_bar).norm())
    } else {
        (0.0, 0.0)
    };

    let lemma1_y_metric = if p.constants().mu > 0.0 {
        grad_h_star(p, &(p.p_bar() * &x_bar))
            .map(|target| (&y_bar - target).norm())
            .unwrap_or(f64::NAN)
    } else {
        (p.p_bar() * &x_bar - p.grad_h_mean(&y_bar)).norm()
    };

    TraceRow {
        iteration,
        gap_total: gap_x + gap_y,
        gap_x,
        gap_y,
        agree_x,
        agree_y,
        track_q,
        track_w,
        lemma1_y_metric,
    }
}

fn check_run_config(cfg: &SolverConfig) -> Result<(), SolverError> {
    if !(cfg.alpha > 0.0 && cfg.alpha.is_finite() && cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(SolverError::InvalidParameter(format!(
            "stepsizes must be positive and finite, got alpha = {}, beta = {}",
            cfg.alpha, cfg.beta
        )));
    }
    if cfg.record_every == 0 {
        return Err(SolverError::InvalidParameter(
            "record_every must be at least 1".into(),
        ));
    }
    if !(cfg.stop_gap >= 0.0) || !cfg.stop_gap.is_finite() {
        return Err(SolverError::InvalidParameter(format!(
            "stop_gap must be a finite nonnegative number, got {}",
            cfg.stop_gap
        )));
    }
    Ok(())
}

/// Runs a solver to completion and records a [`Trace`].
///
/// Iteration 0 (the initial state) and the final executed iteration are
/// always recorded; intermediate iterations every `cfg.record_every`. The
/// run ends at `cfg.max_iters`, when the gap reaches `cfg.stop_gap`
/// (if positive), or when divergence is detected — the latter sets
/// [`Trace::diverged_at`] instead of erroring. The centralized variant
/// ignores the weight matrix.
///
/// # Errors
///
/// [`SolverError::InvalidParameter`] for malformed configuration or a
/// weight matrix that does not match the instance.
pub fn run(p: &SaddleProblem, w: &WeightMatrix, cfg: &SolverConfig) -> Result<Trace, SolverError> {
    check_run_config(cfg)?;
    let mut state = match cfg.variant {
        Variant::Centralized => init_centralized(p, cfg.seed),
        _ => init_state(p, p.n(), cfg.seed)?,
    };
    // Surface shape mismatches (e.g. wrong-size weight matrix) immediately,
    // even when max_iters = 0.
    check_step_args(&state, w, p, cfg)?;

    let mut rows = vec![measure(&state, p, cfg.variant, 0)];
    let mut diverged_at = None;
    for k in 1..=cfg.max_iters {
        state = step(&state, w, p, cfg)?;
        let row = measure(&state, p, cfg.variant, k);
        let diverged = !row.gap_total.is_finite() || row.gap_total > DIVERGENCE_GAP;
        let stopped = cfg.stop_gap > 0.0 && row.gap_total <= cfg.stop_gap;
        if diverged {
            diverged_at = Some(k);
        }
        if k % cfg.record_every == 0 || k == cfg.max_iters || diverged || stopped {
            rows.push(row);
        }
        if diverged || stopped {
            break;
        }
    }
    Ok(Trace {
        variant: cfg.variant,
        alpha: cfg.alpha,
        beta: cfg.beta,
        rows,
        diverged_at,
    })
}

// ---- Certified stepsize policy -----------------------------------------------

/// Stepsizes certified by the entrywise contraction certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedStepsizes {
    /// Certified primal stepsize.
    pub alpha: f64,
    /// Certified dual stepsize.
    pub beta: f64,
    /// Conservativeness constant at which the certificate passed.
    pub c: f64,
    /// Certified contraction factor `η = 1 − αβσ_min²/κ < 1`.
    pub eta: f64,
    /// Number of ×4 escalations of `c` needed (0 = first attempt passed).
    pub escalations: usize,
}

/// Computes certified stepsizes from the aggregate constants and the
/// spectral gap parameter.
///
/// The dual stepsize is the minimum of three closed-form bounds:
///
/// ```text
/// β̄ = min( σ_min²(1−λ)² / (192 σ_max² L),
///           L(1−λ)² / (48 σ_max²),
///           1 / (382 κ L) )
/// ```
///
/// and the primal stepsize is coupled as `ᾱ = β̄ μ² / (c σ_max²)`, where
/// the conservativeness constant `c` starts just above its structural lower
/// bound and escalates ×4 until the entrywise contraction certificate
/// `M δ ≤ η δ` verifies (typically zero or one escalation). Both stepsizes
/// scale linearly with `safety ∈ (0, 1]`.
///
/// # Errors
///
/// [`SolverError::AssumptionViolation`] when the instance lacks a strongly
/// convex dual cost or a full-column-rank average coupling;
/// [`SolverError::InvalidParameter`] for out-of-range `lambda`/`safety`;
/// [`SolverError::CertificateFailed`] if no escalation level certifies.
pub fn theorem1_stepsizes(
    k: &ProblemConstants,
    lambda: f64,
    safety: f64,
) -> Result<CertifiedStepsizes, SolverError> {
    if !(k.mu > 0.0) {
        return Err(SolverError::AssumptionViolation(
            "certified stepsizes require a strongly convex dual cost (mu > 0)".into(),
        ));
    }
    if k.sigma_min <= RANK_TOL {
        return Err(SolverError::AssumptionViolation(
            "certified stepsizes require a full-column-rank average coupling".into(),
        ));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(SolverError::InvalidParameter(format!(
            "spectral gap parameter must lie in [0, 1), got {lambda}"
        )));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(SolverError::InvalidParameter(format!(
            "safety factor must lie in (0, 1], got {safety}"
        )));
    }

    let s_min2 = k.sigma_min * k.sigma_min;
    let s_max2 = k.sigma_max * k.sigma_max;
    let gap2 = (1.0 - lambda) * (1.0 - lambda);
    let beta_bar = (s_min2 * gap2 / (192.0 * s_max2 * k.l))
        .min(k.l * gap2 / (48.0 * s_max2))
        .min(1.0 / (382.0 * k.kappa * k.l));
    let beta = safety * beta_bar;

    let mut c = min_conservativeness(k) + 1.0;
    for escalations in 0..=CERTIFICATE_ESCALATION_CAP {
        let alpha = beta * k.mu * k.mu / (c * s_max2);
        let certified = (|| -> Option<CertifiedStepsizes> {
            let m = build_m(k, lambda, alpha, beta, c).ok()?;
            let delta = build_delta(k, lambda, c).ok()?;
            let eta = predicted_eta(k, alpha, beta).ok()?;
            let rep = verify_lemma2(&m, &delta, eta).ok()?;
            if rep.holds {
                Some(CertifiedStepsizes {
                    alpha,
                    beta,
                    c,
                    eta,
                    escalations,
                })
            } else {
                None
            }
        })();
        if let Some(cert) = certified {
            return Ok(cert);
        }
        c *= 4.0;
    }
    Err(SolverError::CertificateFailed {
        escalations: CERTIFICATE_ESCALATION_CAP,
        final_c: c,
    })
}

/// Checks whether the instance sits in the regime where the closed-form
/// stepsize bounds are dominated by the conditioning terms:
/// `γ²κ⁴ ≥ max( γ⁶κ²/(1−λ)⁴, σ_min²σ_max²/(L²μ²(1−λ)⁴) )`.
#[must_use]
pub fn regime_check(k: &ProblemConstants, lambda: f64) -> bool {
    let gap4 = (1.0 - lambda).powi(4);
    let lhs = k.gamma.powi(2) * k.kappa.powi(4);
    let rhs = (k.gamma.powi(6) * k.kappa.powi(2) / gap4).max(
        k.sigma_min * k.sigma_min * k.sigma_max * k.sigma_max / (k.l * k.l * k.mu * k.mu * gap4),
    );
    lhs >= rhs
}

// ---- Tests --------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, make_weights, TopologyKind};
    use crate::problem::{
        from_locals, make_constrained, make_quadratic, make_regression, LocalCost, RegularizerKind,
    };

    fn weights(kind: TopologyKind, n: usize) -> WeightMatrix {
        make_weights(&build_topology(kind, n).unwrap()).unwrap()
    }

    fn cfg(variant: Variant, alpha: f64, beta: f64, iters: u64) -> SolverConfig {
        SolverConfig {
            variant,
            alpha,
            beta,
            max_iters: iters,
            stop_gap: 0.0,
            seed: 17,
            record_every: 1,
        }
    }

    #[test]
    fn single_node_tracking_step_equals_centralized_bitwise() {
        let p = make_quadratic(2, 3, 1, 0.0, 5).unwrap();
        let w = weights(TopologyKind::Complete, 1);
        let s0 = init_state(&p, 1, 23).unwrap();
        let gt = step(&s0, &w, &p, &cfg(Variant::GtGda, 0.03, 0.05, 1)).unwrap();
        let ce = step(&s0, &w, &p, &cfg(Variant::Centralized, 0.03, 0.05, 1)).unwrap();
        assert_eq!(gt.x, ce.x, "first primal steps must agree bitwise");
        assert_eq!(gt.y, ce.y, "first dual steps must agree bitwise");
    }

    #[test]
    fn single_node_trajectories_stay_together() {
        let p = make_quadratic(2, 2, 1, 0.0, 5).unwrap();
        let w = weights(TopologyKind::Complete, 1);
        let mut gt = init_state(&p, 1, 23).unwrap();
        let mut ce = gt.clone();
        let cg = cfg(Variant::GtGda, 0.03, 0.05, 1);
        let cc = cfg(Variant::Centralized, 0.03, 0.05, 1);
        for _ in 0..200 {
            gt = step(&gt, &w, &p, &cg).unwrap();
            ce = step(&ce, &w, &p, &cc).unwrap();
        }
        let rel = (&gt.x - &ce.x).norm() / ce.x.norm().max(1e-300);
        assert!(rel <= 1e-14, "relative drift {rel}");
        assert!((&gt.y - &ce.y).norm() / ce.y.norm().max(1e-300) <= 1e-14);
    }

    #[test]
    fn two_node_step_matches_hand_expansion() {
        let scalar = |v: f64| DMatrix::from_element(1, 1, v);
        let vec1 = |v: f64| DVector::from_element(1, v);
        let locals = vec![
            LocalCost::Quadratic {
                q_mat: scalar(1.0),
                q_vec: vec1(0.5),
                r_mat: scalar(1.0),
                r_vec: vec1(0.2),
                coupling: scalar(1.0),
            },
            LocalCost::Quadratic {
                q_mat: scalar(2.0),
                q_vec: vec1(-0.5),
                r_mat: scalar(1.5),
                r_vec: vec1(-0.2),
                coupling: scalar(2.0),
            },
        ];
        let p = from_locals(locals).unwrap();
        let w = weights(TopologyKind::Complete, 2);
        let (alpha, beta) = (0.01, 0.02);
        let s0 = init_state(&p, 2, 7).unwrap();
        let s1 = step(&s0, &w, &p, &cfg(Variant::GtGda, alpha, beta, 1)).unwrap();

        // Hand expansion with scalars. Node data: A_i = Q_i + Q_i, etc.
        let (x0, x1) = (s0.x[(0, 0)], s0.x[(1, 0)]);
        let (y0, y1) = (s0.y[(0, 0)], s0.y[(1, 0)]);
        let a = [2.0, 4.0];
        let ql = [0.5, -0.5];
        let b = [2.0, 3.0];
        let rl = [0.2, -0.2];
        let pc = [1.0, 2.0];
        let gx = [
            a[0] * x0 + ql[0] + pc[0] * y0,
            a[1] * x1 + ql[1] + pc[1] * y1,
        ];
        let gy = [
            pc[0] * x0 - (b[0] * y0 + rl[0]),
            pc[1] * x1 - (b[1] * y1 + rl[1]),
        ];
        // Coupling consensus: both estimates move to the average 1.5.
        let pn = [pc[0] + 0.5 * (pc[1] - pc[0]), pc[1] + 0.5 * (pc[0] - pc[1])];
        // Mixing of the descent/ascent midpoints (q⁰ = gx, w⁰ = gy).
        let xm = [x0 - alpha * gx[0], x1 - alpha * gx[1]];
        let ym = [y0 + beta * gy[0], y1 + beta * gy[1]];
        let xn = 0.5 * xm[0] + 0.5 * xm[1];
        let yn = 0.5 * ym[0] + 0.5 * ym[1];
        let gxn = [
            a[0] * xn + ql[0] + pn[0] * yn,
            a[1] * xn + ql[1] + pn[1] * yn,
        ];
        let gyn = [
            pn[0] * xn - (b[0] * yn + rl[0]),
            pn[1] * xn - (b[1] * yn + rl[1]),
        ];
        let qm = [gx[0] + gxn[0] - gx[0], gx[1] + gxn[1] - gx[1]];
        let wm = [gy[0] + gyn[0] - gy[0], gy[1] + gyn[1] - gy[1]];
        let qn = 0.5 * qm[0] + 0.5 * qm[1];
        let wn = 0.5 * wm[0] + 0.5 * wm[1];

        for i in 0..2 {
            assert!((s1.p_est[i][(0, 0)] - pn[i]).abs() <= 1e-15);
            assert!((s1.x[(i, 0)] - xn).abs() <= 1e-15, "x mismatch at node {i}");
            assert!((s1.y[(i, 0)] - yn).abs() <= 1e-15);
            assert!((s1.gx[(i, 0)] - gxn[i]).abs() <= 1e-15);
            assert!((s1.q[(i, 0)] - qn).abs() <= 1e-15);
            assert!((s1.w[(i, 0)] - wn).abs() <= 1e-15);
        }
    }

    #[test]
    fn trackers_conserve_the_mean_gradient() {
        let p = make_quadratic(3, 3, 6, 0.8, 2).unwrap();
        let w = weights(TopologyKind::Exponential, 6);
        for variant in [Variant::GtGda, Variant::GtGdaLite] {
            let trace = run(&p, &w, &cfg(variant, 0.02, 0.04, 50)).unwrap();
            for row in &trace.rows {
                assert!(
                    row.track_q <= 1e-10 && row.track_w <= 1e-10,
                    "{} tracker residual broke at iteration {}: {} / {}",
                    variant.name(),
                    row.iteration,
                    row.track_q,
                    row.track_w
                );
            }
        }
    }

    #[test]
    fn recording_includes_first_last_and_stride() {
        let p = make_quadratic(2, 2, 4, 0.5, 1).unwrap();
        let w = weights(TopologyKind::Complete, 4);
        let mut c = cfg(Variant::GtGda, 0.02, 0.02, 20);
        c.record_every = 7;
        let trace = run(&p, &w, &c).unwrap();
        let iters: Vec<u64> = trace.rows.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![0, 7, 14, 20]);

        let mut c0 = c;
        c0.max_iters = 0;
        let t0 = run(&p, &w, &c0).unwrap();
        assert_eq!(t0.rows.len(), 1);
        assert_eq!(t0.rows[0].iteration, 0);
    }

    #[test]
    fn early_stop_honors_the_gap_target() {
        let p = make_quadratic(2, 2, 4, 0.5, 3).unwrap();
        let w = weights(TopologyKind::Complete, 4);
        let mut c = cfg(Variant::GtGda, 0.05, 0.08, 20_000);
        c.stop_gap = 1e-6;
        let trace = run(&p, &w, &c).unwrap();
        assert!(!trace.diverged());
        let last = trace.final_row();
        assert!(last.gap_total <= 1e-6);
        assert!(
            last.iteration < 20_000,
            "should stop early, ran to {}",
            last.iteration
        );
        assert_eq!(trace.first_iteration_at_gap(1e-6), Some(last.iteration));
    }

    #[test]
    fn divergence_is_flagged_not_fatal() {
        let p = make_quadratic(2, 2, 4, 0.5, 3).unwrap();
        let w = weights(TopologyKind::Ring, 4);
        let trace = run(&p, &w, &cfg(Variant::GtGda, 10.0, 10.0, 500)).unwrap();
        assert!(trace.diverged());
        let k = trace.diverged_at.unwrap();
        assert!((1..=500).contains(&k));
        assert_eq!(trace.final_row().iteration, k);
    }

    #[test]
    fn runs_are_deterministic() {
        let p = make_quadratic(3, 3, 5, 0.7, 9).unwrap();
        let w = weights(TopologyKind::Exponential, 5);
        let a = run(&p, &w, &cfg(Variant::GtGdaLite, 0.02, 0.03, 40)).unwrap();
        let b = run(&p, &w, &cfg(Variant::GtGdaLite, 0.02, 0.03, 40)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centralized_ignores_the_weight_matrix() {
        let p = make_quadratic(2, 3, 4, 0.8, 6).unwrap();
        let ring = weights(TopologyKind::Ring, 4);
        let complete = weights(TopologyKind::Complete, 4);
        let a = run(&p, &ring, &cfg(Variant::Centralized, 0.05, 0.05, 100)).unwrap();
        let b = run(&p, &complete, &cfg(Variant::Centralized, 0.05, 0.05, 100)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn certified_stepsizes_exist_and_contract() {
        let p = make_quadratic(3, 3, 8, 0.8, 7).unwrap();
        let w = weights(TopologyKind::Exponential, 8);
        let cert = theorem1_stepsizes(p.constants(), w.lambda, 1.0).unwrap();
        assert!(cert.alpha > 0.0 && cert.beta > 0.0);
        assert!(
            cert.alpha < cert.beta,
            "primal stepsize is the conservative one"
        );
        assert!(cert.eta < 1.0);
        assert!(cert.escalations <= 2);
    }

    #[test]
    fn stepsize_policy_rejects_unsuitable_instances() {
        let c = make_constrained(2, 3, 4, 0).unwrap();
        assert!(matches!(
            theorem1_stepsizes(c.constants(), 0.5, 1.0),
            Err(SolverError::AssumptionViolation(_))
        ));
        let wide = make_regression(RegularizerKind::Strong, 10, 4, 4, 1.0, 0).unwrap();
        assert!(matches!(
            theorem1_stepsizes(wide.constants(), 0.5, 1.0),
            Err(SolverError::AssumptionViolation(_))
        ));
        let q = make_quadratic(2, 2, 4, 0.5, 0).unwrap();
        assert!(matches!(
            theorem1_stepsizes(q.constants(), 1.0, 1.0),
            Err(SolverError::InvalidParameter(_))
        ));
    }

    #[test]
    fn malformed_configs_are_rejected() {
        let p = make_quadratic(2, 2, 4, 0.5, 0).unwrap();
        let w = weights(TopologyKind::Complete, 4);
        let mut c = cfg(Variant::GtGda, 0.0, 0.1, 5);
        assert!(matches!(
            run(&p, &w, &c),
            Err(SolverError::InvalidParameter(_))
        ));
        c.alpha = 0.1;
        c.record_every = 0;
        assert!(matches!(
            run(&p, &w, &c),
            Err(SolverError::InvalidParameter(_))
        ));
        c.record_every = 1;
        let w3 = weights(TopologyKind::Complete, 3);
        assert!(matches!(
            run(&p, &w3, &c),
            Err(SolverError::InvalidParameter(_))
        ));
    }
}
