//! End-to-end agreement between the analysis layer and live solver runs:
//! the exact quadratic LTI reproduces the frozen-coupling solver step for
//! step, and certified stepsizes keep every run inside the entrywise
//! error-recursion bound.

use saddlesim::analysis::{build_quad_lti, lemma1_monitor, quad_error_coords, spectral_radius};
use saddlesim::graph::{build_topology, make_weights, TopologyKind, WeightMatrix};
use saddlesim::problem::make_quadratic;
use saddlesim::solvers::{init_state, step, theorem1_stepsizes, SolverConfig, Variant};

fn weights(kind: TopologyKind, n: usize) -> WeightMatrix {
    make_weights(&build_topology(kind, n).unwrap()).unwrap()
}

#[test]
fn lti_recursion_reproduces_the_frozen_coupling_solver() {
    for seed in [0u64, 1, 2] {
        let p = make_quadratic(2, 3, 5, 0.8, seed).unwrap();
        let w = weights(TopologyKind::Exponential, 5);
        let (alpha, beta) = (0.02, 0.03);
        let lti = build_quad_lti(&p, &w, alpha, beta).unwrap();
        let cfg = SolverConfig {
            variant: Variant::GtGdaLite,
            alpha,
            beta,
            max_iters: 1,
            stop_gap: 0.0,
            seed: 0,
            record_every: 1,
        };
        let mut state = init_state(&p, 5, 97 + seed).unwrap();
        let mut z = quad_error_coords(&state, &p).unwrap();
        for k in 0..200 {
            state = step(&state, &w, &p, &cfg).unwrap();
            z = &lti.m * z;
            let measured = quad_error_coords(&state, &p).unwrap();
            let rel = (&measured - &z).norm() / z.norm().max(1e-300);
            assert!(
                rel <= 1e-11,
                "seed {seed}, step {k}: relative disagreement {rel}"
            );
        }
    }
}

#[test]
fn certified_runs_stay_inside_the_error_recursion_bound() {
    let p = make_quadratic(3, 3, 8, 0.8, 0).unwrap();
    let w = weights(TopologyKind::Exponential, 8);
    let cert = theorem1_stepsizes(p.constants(), w.lambda, 1.0).unwrap();
    for variant in [Variant::GtGda, Variant::GtGdaLite] {
        let report =
            lemma1_monitor(&p, &w, variant, cert.alpha, cert.beta, cert.c, 300, 5).unwrap();
        assert!(
            report.worst_violation <= 1e-9,
            "{}: bound violated by {}",
            variant.name(),
            report.worst_violation
        );
        assert_eq!(report.iterations, 300);
    }
}

#[test]
fn certified_stepsizes_keep_the_exact_lti_contractive() {
    let p = make_quadratic(2, 3, 5, 0.8, 1).unwrap();
    let w = weights(TopologyKind::Exponential, 5);
    let cert = theorem1_stepsizes(p.constants(), w.lambda, 1.0).unwrap();
    let lti = build_quad_lti(&p, &w, cert.alpha, cert.beta).unwrap();
    let rho = spectral_radius(&lti.m).unwrap();
    assert!(rho < 1.0, "exact system radius {rho}");
}
