use coron_core::bubbles::DimensionConstants;
use coron_core::radial::{
    geometric_grid, rate_sweep, refinement_study, RadialProblem, SolverOptions, SweepOptions,
};

fn unit_annulus(n: usize, r: f64) -> RadialProblem {
    RadialProblem::new(DimensionConstants::new(n).unwrap(), 1.0, r, 1.0).unwrap()
}

#[test]
fn rate_follows_square_root_law() {
    let pb = unit_annulus(4, 1.0);
    let eps = geometric_grid(1e-2, 1e-4, 8);
    let rep = rate_sweep(&pb, &eps, &SweepOptions::default()).unwrap();
    assert!((rep.slope - 0.5).abs() < 0.05);
    assert!(rep.d_relative_error < 0.2);
    assert!(rep.d_spread_last3 < 0.1);
    assert!(rep.metrics.iter().all(|m| m.residual < 1e-10));
}

#[test]
fn parallel_chains_agree_with_serial() {
    let pb = unit_annulus(4, 1.0);
    let eps = geometric_grid(1e-2, 1e-4, 8);
    let serial = rate_sweep(&pb, &eps, &SweepOptions::default()).unwrap();
    let parallel = rate_sweep(
        &pb,
        &eps,
        &SweepOptions {
            chains: 3,
            ..Default::default()
        },
    )
    .unwrap();
    for (a, b) in serial.metrics.iter().zip(&parallel.metrics) {
        assert_eq!(a.epsilon, b.epsilon);
        assert!((a.delta_est - b.delta_est).abs() < 1e-7 * a.delta_est);
    }
}

#[test]
fn slope_ignores_hole_coefficient() {
    let eps = geometric_grid(1e-2, 1e-4, 8);
    let a = rate_sweep(&unit_annulus(4, 1.0), &eps, &SweepOptions::default()).unwrap();
    let b = rate_sweep(&unit_annulus(4, 2.0), &eps, &SweepOptions::default()).unwrap();
    assert!((a.slope - b.slope).abs() < 0.02);
    assert!(b.d_est > a.d_est);
}

#[test]
fn mesh_doubling_barely_moves_delta() {
    for eps in [1e-2, 1e-3, 1e-4] {
        let study = refinement_study(&unit_annulus(4, 1.0), eps, SolverOptions::default()).unwrap();
        assert!(study.relative_change < 0.01);
    }
}

#[test]
fn three_dimensional_rate() {
    // In R^3 the hole must stay well inside the bubble scale for the ansatz
    // to start Newton in the right basin, hence the smaller range.
    let pb = unit_annulus(3, 1.0);
    let eps = geometric_grid(1e-3, 1e-5, 6);
    let rep = rate_sweep(&pb, &eps, &SweepOptions::default()).unwrap();
    assert!((rep.slope - 0.5).abs() < 0.05, "{}", rep.slope);
    assert!(
        rep.d_relative_error < 0.2,
        "{} vs {}",
        rep.d_est,
        rep.d_tilde
    );
    // d_est approaches d̃ from above as ε shrinks.
    let d: Vec<f64> = rep.metrics.iter().map(|m| m.d_est).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn energy_gap_stays_bounded() {
    let pb = unit_annulus(4, 1.0);
    let eps = geometric_grid(1e-2, 1e-4, 8);
    let rep = rate_sweep(&pb, &eps, &SweepOptions::default()).unwrap();
    let first = rep.energy_gaps[0].abs();
    assert!(rep
        .energy_gaps
        .iter()
        .all(|g| g.abs() <= first * 1.0001 && g.is_finite()));
    // The leading terms capture the energy: the scaled gap shrinks with ε.
    assert!(rep.energy_gaps.last().unwrap().abs() < 0.1 * first);
}

#[test]
fn sweep_reports_partial_results() {
    // The last ε leaves no room between hole and ball: rejected up front.
    let pb = unit_annulus(4, 1.0);
    let err = rate_sweep(&pb, &[1e-2, 1e-3, 2.0], &SweepOptions::default()).unwrap_err();
    assert!(err.partial.is_empty());

    let tight = SweepOptions {
        solver: SolverOptions {
            max_iterations: 1,
            ..Default::default()
        },
        chains: 1,
    };
    let err = rate_sweep(&pb, &geometric_grid(1e-3, 1e-4, 4), &tight).unwrap_err();
    assert!(err.partial.len() < 4);
}
