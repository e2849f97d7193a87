//! Experiment drivers behind the CLI subcommands: full solver runs with
//! artifact emission, the certificate/analysis report, the network-scaling
//! (speedup) table, and the manual-stepsize sweep.

use serde_json::{json, Value};

use saddlesim::analysis::{
    build_delta, build_m, build_quad_lti, build_s, eigen_perturbation_check, spectral_radius,
    verify_lemma2, AnalysisError,
};
use saddlesim::graph::{build_topology, make_weights, WeightMatrix};
use saddlesim::problem::{
    make_constrained, make_quadratic, make_regression, ProblemError, ProblemKind, RegularizerKind,
    SaddleProblem,
};
use saddlesim::solvers::{
    run, theorem1_stepsizes, CertifiedStepsizes, SolverConfig, SolverError, Trace, Variant,
};

use crate::config::{
    config_hash, resolve_output_path, solver_labels, validate, ExperimentConfig, ProblemSpec,
    SolverSpec, StepsizeMode, TopologySpec,
};
use crate::csvout::{labeled_csv_path, table_csv, trace_csv, write_file};
use crate::svg::{log_line_plot, scatter_fit_plot, Series};
use crate::HarnessError;

/// JSON representation of an f64 that survives infinities and NaN (which
/// `serde_json` would otherwise turn into `null`).
#[must_use]
pub fn json_num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

// ---- Shared assembly -------------------------------------------------------

/// Builds the problem instance a config describes.
pub fn build_problem(spec: &ProblemSpec) -> Result<SaddleProblem, HarnessError> {
    let built = match spec.kind {
        ProblemKind::Quadratic => {
            make_quadratic(spec.p_x, spec.p_y, spec.n, spec.heterogeneity, spec.seed)
        }
        ProblemKind::RegressionStrong => make_regression(
            RegularizerKind::Strong,
            spec.p_x,
            spec.p_y,
            spec.n,
            spec.heterogeneity,
            spec.seed,
        ),
        ProblemKind::RegressionConvex => make_regression(
            RegularizerKind::Convex,
            spec.p_x,
            spec.p_y,
            spec.n,
            spec.heterogeneity,
            spec.seed,
        ),
        ProblemKind::Constrained => make_constrained(spec.p_x, spec.p_y, spec.n, spec.seed),
    };
    built.map_err(|e| match e {
        ProblemError::AssumptionViolation(m) => HarnessError::Assumption(m),
        ProblemError::InvalidParameter(m) | ProblemError::GenerationFailed(m) => {
            HarnessError::Config(format!("problem: {m}"))
        }
        other => HarnessError::Failed(other.to_string()),
    })
}

/// Builds the mixing matrix a config describes.
pub fn build_weights(spec: &TopologySpec) -> Result<WeightMatrix, HarnessError> {
    let t = build_topology(spec.kind, spec.n)
        .map_err(|e| HarnessError::Config(format!("topology: {e}")))?;
    make_weights(&t).map_err(|e| HarnessError::Failed(format!("topology: {e}")))
}

fn map_solver_err(e: SolverError) -> HarnessError {
    match e {
        SolverError::AssumptionViolation(m) => HarnessError::Assumption(m),
        SolverError::InvalidParameter(m) => HarnessError::Config(m),
        other => HarnessError::Failed(other.to_string()),
    }
}

fn map_analysis_err(e: AnalysisError) -> HarnessError {
    match e {
        AnalysisError::AssumptionViolation(m) => HarnessError::Assumption(m),
        other => HarnessError::Failed(other.to_string()),
    }
}

/// Resolves a solver spec's stepsizes: manual values pass through, and
/// theorem1 mode derives certified values (carrying the certificate).
fn resolve_stepsizes(
    spec: &SolverSpec,
    p: &SaddleProblem,
    lambda: f64,
) -> Result<(f64, f64, Option<CertifiedStepsizes>), HarnessError> {
    match spec.mode {
        StepsizeMode::Manual => Ok((
            spec.alpha.expect("validated"),
            spec.beta.expect("validated"),
            None,
        )),
        StepsizeMode::Theorem1 => {
            let cert =
                theorem1_stepsizes(p.constants(), lambda, spec.safety).map_err(map_solver_err)?;
            Ok((cert.alpha, cert.beta, Some(cert)))
        }
    }
}

// ---- run ----------------------------------------------------------------------

/// One solver's result inside a [`RunReport`].
pub struct SolverOutcome {
    /// File label (variant name, index-suffixed on repeats).
    pub label: String,
    /// Scheme run.
    pub variant: Variant,
    /// Stepsizes actually used.
    pub alpha: f64,
    /// Dual stepsize actually used.
    pub beta: f64,
    /// Certified contraction factor when stepsizes came from theorem1 mode.
    pub eta: Option<f64>,
    /// Whether the stepsizes carry a contraction certificate.
    pub certified: bool,
    /// The recorded trace.
    pub trace: Trace,
    /// Where the trace CSV was written, when CSV output was requested.
    pub csv_path: Option<String>,
}

/// Everything `run` produced.
pub struct RunReport {
    /// Deterministic hash of the originating config.
    pub config_hash: String,
    /// Per-solver outcomes, in config order.
    pub outcomes: Vec<SolverOutcome>,
    /// Where the overlay SVG went, when requested.
    pub svg_path: Option<String>,
}

/// Runs every solver in the config, writes the requested artifacts, and
/// returns the report. Individual divergence is recorded in-trace; only
/// *all* solvers diverging is an error (after artifacts are written, so
/// the traces remain inspectable).
///
/// # Errors
///
/// [`HarnessError::Config`], [`HarnessError::Assumption`] (theorem1 mode on
/// an unsuitable instance), [`HarnessError::Io`], or
/// [`HarnessError::AllDiverged`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    validate(cfg)?;
    let p = build_problem(&cfg.problem)?;
    let w = build_weights(&cfg.topology)?;
    let labels = solver_labels(&cfg.solvers);

    let mut outcomes = Vec::with_capacity(cfg.solvers.len());
    for (spec, label) in cfg.solvers.iter().zip(labels) {
        let (alpha, beta, cert) = resolve_stepsizes(spec, &p, w.lambda)?;
        let scfg = SolverConfig {
            variant: spec.variant,
            alpha,
            beta,
            max_iters: spec.max_iters,
            stop_gap: spec.stop_gap,
            seed: spec.seed.unwrap_or(cfg.problem.seed),
            record_every: cfg.outputs.record_every,
        };
        let trace = run(&p, &w, &scfg).map_err(map_solver_err)?;
        outcomes.push(SolverOutcome {
            label,
            variant: spec.variant,
            alpha,
            beta,
            eta: cert.as_ref().map(|c| c.eta),
            certified: cert.is_some(),
            trace,
            csv_path: None,
        });
    }

    if let Some(stem) = &cfg.outputs.csv {
        for o in &mut outcomes {
            let path = resolve_output_path(&labeled_csv_path(stem, &o.label));
            write_file(&path, &trace_csv(&o.trace))?;
            o.csv_path = Some(path.display().to_string());
        }
    }
    let mut svg_path = None;
    if let Some(svg) = &cfg.outputs.svg {
        let series: Vec<Series> = outcomes
            .iter()
            .map(|o| Series {
                label: o.label.clone(),
                points: o
                    .trace
                    .rows
                    .iter()
                    .map(|r| (r.iteration as f64, r.gap_total))
                    .collect(),
            })
            .collect();
        let path = resolve_output_path(svg);
        write_file(
            &path,
            &log_line_plot(&series, "iteration", "optimality gap"),
        )?;
        svg_path = Some(path.display().to_string());
    }

    if outcomes.iter().all(|o| o.trace.diverged()) {
        return Err(HarnessError::AllDiverged);
    }
    Ok(RunReport {
        config_hash: config_hash(cfg),
        outcomes,
        svg_path,
    })
}

/// JSON summary of a [`RunReport`] for stdout.
#[must_use]
pub fn run_report_json(report: &RunReport) -> Value {
    json!({
        "config_hash": report.config_hash,
        "solvers": report.outcomes.iter().map(|o| {
            let last = o.trace.final_row();
            json!({
                "label": o.label,
                "variant": o.variant.name(),
                "alpha": json_num(o.alpha),
                "beta": json_num(o.beta),
                "certified": o.certified,
                "eta": o.eta.map(json_num),
                "iterations": last.iteration,
                "final_gap": json_num(last.gap_total),
                "diverged_at": o.trace.diverged_at,
                "csv": o.csv_path,
            })
        }).collect::<Vec<_>>(),
        "svg": report.svg_path,
    })
}

// ---- analyze ------------------------------------------------------------------

/// Certificate-and-spectra report for the config's instance: aggregate
/// constants, spectral gap, regime check, certified stepsizes with the
/// contraction certificate, and — for quadratic instances — the exact LTI
/// radius, saddle-matrix eigenvalues, and the perturbation table.
///
/// # Errors
///
/// [`HarnessError::Assumption`] naming every violated assumption (exit 4),
/// or [`HarnessError::Failed`] for uncertifiable instances.
pub fn analyze(cfg: &ExperimentConfig) -> Result<Value, HarnessError> {
    validate(cfg)?;
    let p = build_problem(&cfg.problem)?;
    let w = build_weights(&cfg.topology)?;
    let k = *p.constants();
    let report = p.assumptions();
    if !report.all_hold() {
        return Err(HarnessError::Assumption(report.violations.join("; ")));
    }

    let cert = theorem1_stepsizes(&k, w.lambda, 1.0).map_err(map_solver_err)?;
    let m = build_m(&k, w.lambda, cert.alpha, cert.beta, cert.c).map_err(map_analysis_err)?;
    let delta = build_delta(&k, w.lambda, cert.c).map_err(map_analysis_err)?;
    let lemma2 = verify_lemma2(&m, &delta, cert.eta).map_err(map_analysis_err)?;
    let rho_m = spectral_radius(&m.entries).map_err(map_analysis_err)?;

    let mut out = json!({
        "config_hash": config_hash(cfg),
        "problem_kind": cfg.problem.kind.name(),
        "constants": {
            "l1": json_num(k.l1),
            "l2": json_num(k.l2),
            "l": json_num(k.l),
            "mu": json_num(k.mu),
            "sigma_max": json_num(k.sigma_max),
            "sigma_min": json_num(k.sigma_min),
            "kappa": json_num(k.kappa),
            "gamma": json_num(k.gamma),
            "tau": json_num(k.tau),
            "tau_avg": json_num(k.tau_avg),
        },
        "lambda": json_num(w.lambda),
        "regime_check": saddlesim::solvers::regime_check(&k, w.lambda),
        "certificate": {
            "alpha": json_num(cert.alpha),
            "beta": json_num(cert.beta),
            "c": json_num(cert.c),
            "eta": json_num(cert.eta),
            "escalations": cert.escalations,
            "rho_m": json_num(rho_m),
            "holds": lemma2.holds,
            "slack": lemma2.slack.iter().copied().map(json_num).collect::<Vec<_>>(),
        },
    });

    if p.kind() == ProblemKind::Quadratic {
        let lti = build_quad_lti(&p, &w, cert.alpha, cert.beta).map_err(map_analysis_err)?;
        let rho_lti = spectral_radius(&lti.m).map_err(map_analysis_err)?;
        let s_rep = build_s(&p).map_err(map_analysis_err)?;
        let pert =
            eigen_perturbation_check(&p, &w, &[1e-2, 1e-3, 1e-4]).map_err(map_analysis_err)?;
        out["quadratic"] = json!({
            "rho_exact_lti": json_num(rho_lti),
            "hurwitz": s_rep.hurwitz,
            "saddle_eigenvalues": s_rep
                .eigenvalues
                .iter()
                .map(|z| vec![json_num(z.re), json_num(z.im)])
                .collect::<Vec<_>>(),
            "perturbation": pert.rows.iter().map(|r| json!({
                "alpha": json_num(r.alpha),
                "max_ratio": json_num(r.max_ratio),
                "rho": json_num(r.rho),
                "outside_guard": r.outside_guard,
            })).collect::<Vec<_>>(),
        });
    }
    Ok(out)
}

// ---- speedup ------------------------------------------------------------------

/// One network size in a [`SpeedupReport`].
pub struct SpeedupRow {
    /// Network size.
    pub n: usize,
    /// Spectral gap parameter of that network.
    pub lambda: f64,
    /// Iterations the centralized loop needed (None = censored).
    pub iterations_centralized: Option<u64>,
    /// Iterations the gradient-tracking loop needed (None = censored).
    pub iterations_gt: Option<u64>,
    /// `n · k_centralized / k_gt`; 1 by definition at n = 1.
    pub ratio: Option<f64>,
    /// True when either loop missed the target within its budget.
    pub censored: bool,
}

/// Result of the network-scaling experiment.
pub struct SpeedupReport {
    /// Per-size rows, in the requested order.
    pub rows: Vec<SpeedupRow>,
    /// Whether the (non-censored) ratios are non-decreasing in n.
    pub monotone: bool,
    /// Least-squares fit ratio ≈ slope·n + intercept with its R², when at
    /// least two rows survived.
    pub fit: Option<(f64, f64, f64)>,
    /// Artifact paths written (csv, svg).
    pub csv_path: Option<String>,
    /// SVG path, when requested.
    pub svg_path: Option<String>,
}

/// Runs the scaling experiment: for each network size, how many iterations
/// the certified-or-manual gradient-tracking solver needs to reach
/// `target` versus the centralized loop at the same stepsizes, reported as
/// the per-node work ratio `n·k_c/k_g`.
///
/// The family config supplies everything but `n`: the problem family
/// (regenerated at each size with the same seed), the topology kind, and a
/// `gt-gda` solver spec whose stepsizes and budget both loops share.
///
/// # Errors
///
/// [`HarnessError::Config`] when the config lacks a `gt-gda` spec or a size
/// is unsupported by the topology; solver errors as in [`run_experiment`].
pub fn speedup(
    cfg: &ExperimentConfig,
    n_list: &[usize],
    target: f64,
) -> Result<SpeedupReport, HarnessError> {
    validate(cfg)?;
    if n_list.is_empty() {
        return Err(HarnessError::Config(
            "--n: at least one size is required".into(),
        ));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(HarnessError::Config(format!(
            "--target: must be positive and finite, got {target}"
        )));
    }
    let spec = cfg
        .solvers
        .iter()
        .find(|s| s.variant == Variant::GtGda)
        .ok_or_else(|| {
            HarnessError::Config("speedup needs a gt-gda solver spec in the config".into())
        })?;

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let pspec = ProblemSpec {
            n,
            ..cfg.problem.clone()
        };
        let tspec = TopologySpec {
            kind: cfg.topology.kind,
            n,
        };
        let p = build_problem(&pspec)?;
        let w = build_weights(&tspec)?;
        let (alpha, beta, _) = resolve_stepsizes(spec, &p, w.lambda)?;
        let mk = |variant: Variant| SolverConfig {
            variant,
            alpha,
            beta,
            max_iters: spec.max_iters,
            stop_gap: target,
            seed: spec.seed.unwrap_or(cfg.problem.seed),
            record_every: 1,
        };
        let tc = run(&p, &w, &mk(Variant::Centralized)).map_err(map_solver_err)?;
        let kc = tc.first_iteration_at_gap(target);
        let (kg, ratio) = if n == 1 {
            // A single node runs the centralized iteration verbatim.
            (kc, kc.map(|_| 1.0))
        } else {
            let tg = run(&p, &w, &mk(Variant::GtGda)).map_err(map_solver_err)?;
            let kg = tg.first_iteration_at_gap(target);
            let ratio = match (kc, kg) {
                (Some(c), Some(g)) => Some(n as f64 * c as f64 / g.max(1) as f64),
                _ => None,
            };
            (kg, ratio)
        };
        rows.push(SpeedupRow {
            n,
            lambda: w.lambda,
            iterations_centralized: kc,
            iterations_gt: kg,
            ratio,
            censored: ratio.is_none(),
        });
    }

    let usable: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.ratio.map(|v| (r.n as f64, v)))
        .collect();
    let monotone = usable.windows(2).all(|p| p[1].1 >= p[0].1);
    let fit = least_squares(&usable);

    let mut csv_path = None;
    if let Some(stem) = &cfg.outputs.csv {
        let header = [
            "n",
            "lambda",
            "iterations_centralized",
            "iterations_gt_gda",
            "ratio",
            "censored",
        ];
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.lambda.to_string(),
                    r.iterations_centralized
                        .map_or(String::new(), |v| v.to_string()),
                    r.iterations_gt.map_or(String::new(), |v| v.to_string()),
                    r.ratio.map_or(String::new(), |v| v.to_string()),
                    r.censored.to_string(),
                ]
            })
            .collect();
        let path = resolve_output_path(&labeled_csv_path(stem, "speedup"));
        write_file(&path, &table_csv(&header, &table))?;
        csv_path = Some(path.display().to_string());
    }
    let mut svg_path = None;
    if let Some(svg) = &cfg.outputs.svg {
        let path = resolve_output_path(svg);
        let fit_line = fit.map(|(a, b, _)| (a, b));
        write_file(
            &path,
            &scatter_fit_plot(&usable, fit_line, "network size n", "iteration ratio"),
        )?;
        svg_path = Some(path.display().to_string());
    }

    Ok(SpeedupReport {
        rows,
        monotone,
        fit,
        csv_path,
        svg_path,
    })
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (sx, sy): (f64, f64) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - (slope * p.0 + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Some((slope, intercept, r2))
}

/// JSON summary of a [`SpeedupReport`] for stdout.
#[must_use]
pub fn speedup_json(cfg: &ExperimentConfig, target: f64, report: &SpeedupReport) -> Value {
    json!({
        "config_hash": config_hash(cfg),
        "target_gap": json_num(target),
        "rows": report.rows.iter().map(|r| json!({
            "n": r.n,
            "lambda": json_num(r.lambda),
            "iterations_centralized": r.iterations_centralized,
            "iterations_gt_gda": r.iterations_gt,
            "ratio": r.ratio.map(json_num),
            "censored": r.censored,
        })).collect::<Vec<_>>(),
        "monotone": report.monotone,
        "fit": report.fit.map(|(slope, intercept, r2)| json!({
            "slope": json_num(slope),
            "intercept": json_num(intercept),
            "r_squared": json_num(r2),
        })),
        "csv": report.csv_path,
        "svg": report.svg_path,
    })
}

// ---- sweep --------------------------------------------------------------------

/// Which stepsize a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Vary the primal stepsize.
    Alpha,
    /// Vary the dual stepsize.
    Beta,
}

impl SweepParam {
    /// Lowercase name, as in the CLI flag.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
        }
    }
}

/// Re-runs every manual-mode solver of the config across a stepsize grid
/// and reports the final gap per (value, solver), plus each solver's best
/// value — the tuning loop behind hand-picked stepsizes.
///
/// # Errors
///
/// [`HarnessError::Config`] when the grid is empty/invalid or any solver
/// spec uses theorem1 mode (certified stepsizes are not sweepable).
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    grid: &[f64],
) -> Result<Value, HarnessError> {
    validate(cfg)?;
    if grid.is_empty() {
        return Err(HarnessError::Config(
            "--grid: at least one value is required".into(),
        ));
    }
    if let Some(bad) = grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(HarnessError::Config(format!(
            "--grid: values must be positive and finite, got {bad}"
        )));
    }
    if let Some(i) = cfg
        .solvers
        .iter()
        .position(|s| s.mode != StepsizeMode::Manual)
    {
        return Err(HarnessError::Config(format!(
            "solvers[{i}]: sweep varies manual stepsizes; theorem1 mode is not sweepable"
        )));
    }
    let p = build_problem(&cfg.problem)?;
    let w = build_weights(&cfg.topology)?;
    let labels = solver_labels(&cfg.solvers);

    let mut results: Vec<(f64, String, Trace)> = Vec::new();
    for &v in grid {
        for (spec, label) in cfg.solvers.iter().zip(&labels) {
            let (mut alpha, mut beta) = (
                spec.alpha.expect("validated"),
                spec.beta.expect("validated"),
            );
            match param {
                SweepParam::Alpha => alpha = v,
                SweepParam::Beta => beta = v,
            }
            let scfg = SolverConfig {
                variant: spec.variant,
                alpha,
                beta,
                max_iters: spec.max_iters,
                stop_gap: spec.stop_gap,
                seed: spec.seed.unwrap_or(cfg.problem.seed),
                record_every: cfg.outputs.record_every,
            };
            let trace = run(&p, &w, &scfg).map_err(map_solver_err)?;
            results.push((v, label.clone(), trace));
        }
    }

    let mut csv_path = None;
    if let Some(stem) = &cfg.outputs.csv {
        let header = [
            "param",
            "value",
            "solver",
            "final_gap",
            "iterations",
            "diverged",
        ];
        let table: Vec<Vec<String>> = results
            .iter()
            .map(|(v, label, trace)| {
                let last = trace.final_row();
                vec![
                    param.name().to_string(),
                    v.to_string(),
                    label.clone(),
                    last.gap_total.to_string(),
                    last.iteration.to_string(),
                    trace.diverged().to_string(),
                ]
            })
            .collect();
        let path = resolve_output_path(&labeled_csv_path(stem, "sweep"));
        write_file(&path, &table_csv(&header, &table))?;
        csv_path = Some(path.display().to_string());
    }

    // Best grid value per solver: smallest final gap among non-diverged runs.
    let best: Vec<Value> = labels
        .iter()
        .map(|label| {
            let winner = results
                .iter()
                .filter(|(_, l, t)| l == label && !t.diverged())
                .min_by(|a, b| {
                    a.2.final_row()
                        .gap_total
                        .total_cmp(&b.2.final_row().gap_total)
                });
            match winner {
                Some((v, _, t)) => json!({
                    "solver": label,
                    "value": json_num(*v),
                    "final_gap": json_num(t.final_row().gap_total),
                }),
                None => json!({ "solver": label, "value": Value::Null, "final_gap": Value::Null }),
            }
        })
        .collect();

    Ok(json!({
        "config_hash": config_hash(cfg),
        "param": param.name(),
        "grid": grid.iter().copied().map(json_num).collect::<Vec<_>>(),
        "rows": results.iter().map(|(v, label, trace)| {
            let last = trace.final_row();
            json!({
                "value": json_num(*v),
                "solver": label,
                "final_gap": json_num(last.gap_total),
                "iterations": last.iteration,
                "diverged": trace.diverged(),
            })
        }).collect::<Vec<_>>(),
        "best": best,
        "csv": csv_path,
    }))
}
