use approx::assert_relative_eq;
use becsim_core::meanfield::{integrate, BlochState, DriveSpec};
use becsim_core::model::ModelParams;
use becsim_core::series::linspace;
use becsim_core::steadystate::*;
use proptest::prelude::*;

fn fig2(j: f64, t1: f64) -> ModelParams {
    ModelParams::from_loss(j, 0.0, 0.0, 5.0, t1, 0.5).unwrap()
}

#[test]
fn contrast_peak_in_tunneling_near_matching_condition() {
    for t1 in [1.0, 2.0, 4.0] {
        let base = fig2(1.0, t1);
        let (j_max, _) = maximize(|j| steady_mode(&base.with_j(j)).unwrap().alpha, 0.01, 100.0, 200);
        let j_star = sr_condition_j(&base).unwrap();
        assert!((j_max - j_star).abs() < 0.15 * j_star, "T1⁻¹={t1}: {j_max} vs {j_star}");
    }
}

#[test]
fn limits_approach_exact_contrast() {
    let t1 = 2.0;
    for (j, which) in [(1e-3, 0), (1e-2, 0), (1e3, 1), (1e4, 1)] {
        let p = fig2(j, t1);
        let exact = steady_mode(&p).unwrap().alpha;
        let (small, large) = alpha_limits(&p).unwrap();
        let approx = if which == 0 { small } else { large };
        assert!((exact / approx - 1.0).abs() < 1e-2, "J={j}");
    }
}

#[test]
fn long_time_decay_rate_matches_selected_mode() {
    let p = ModelParams::new(2.0, 0.0, 1.0, 5.0, 1.0, 3.0).unwrap();
    let kappa = steady_mode(&p).unwrap().kappa.re;
    let grid = linspace(0.0, 30.0, 301);
    let s = integrate(&BlochState::coherent(100.0, 1.0, 0.0), &p, &DriveSpec::none(), (0.0, 30.0), &grid).unwrap();
    // least-squares slope of ln n over the last ten seconds
    let pts: Vec<(f64, f64)> = (200..=300).map(|i| (grid[i], s.n[i].ln())).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, (x, y)| (a.0 + x, a.1 + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    assert_relative_eq!(-num / den, kappa, max_relative = 1e-6);
}

#[test]
fn solution_count_is_one_or_three_on_fig4_grid() {
    let base = fig2(1.0, 2.0);
    let mut seen_three = false;
    for j in linspace(0.05, 6.0, 40) {
        for un in linspace(0.0, 120.0, 41) {
            let rows = scan_point(&base, j, 2.0, un);
            let count = rows[0].n_solutions;
            assert!(count == 1 || count == 3, "J={j} Un={un}: {count}");
            seen_three |= count == 3;
        }
    }
    assert!(seen_three);
}

#[test]
fn strong_interaction_count_transition_at_critical_number() {
    let p = ModelParams::from_loss(10.0, 0.5, 0.0, 0.0, 2.0, 0.5).unwrap();
    let n_crit = critical_n(&p).unwrap();
    assert_eq!(nonlinear_quasi_steady(&p, 0.9 * n_crit).unwrap().len(), 1);
    assert_eq!(nonlinear_quasi_steady(&p, 1.1 * n_crit).unwrap().len(), 3);
}

#[test]
fn adiabatic_branch_lost_at_critical_number() {
    let p = ModelParams::from_loss(10.0, 0.5, 0.0, 0.0, 2.0, 0.5).unwrap();
    let n_crit = critical_n(&p).unwrap();
    let grid = linspace(0.0, 3.0, 61);
    let out = adiabatic_decay(&p, 100.0, (0.0, 3.0), &grid).unwrap();
    let lost = out.branch_lost.expect("branch should disappear");
    assert!((lost.n_critical - n_crit).abs() < 0.05 * n_crit, "{} vs {n_crit}", lost.n_critical);
    assert!(out.series.n.windows(2).all(|w| w[1] < w[0]));
    assert!(out.kappa.iter().all(|&k| k > 0.0));
}

#[test]
fn interaction_shifts_peak_but_not_height() {
    let base = fig2(1.0, 2.0);
    let peak = |un: f64| {
        maximize(
            |j| {
                let p = base.with_j(j).with_u(un);
                nonlinear_quasi_steady(&p, 1.0).unwrap()[0].alpha
            },
            0.05,
            50.0,
            200,
        )
    };
    let (j0, a0) = peak(0.0);
    let (j5, a5) = peak(5.0);
    let (j10, a10) = peak(10.0);
    assert!(j0 < j5 && j5 < j10);
    for a in [a5, a10] {
        assert!((a - a0).abs() < 0.02 * a0);
    }
}

#[test]
fn scan_csv_masks_failures() {
    // f_a = 0 has no nonlinear quasi-steady state
    let base = ModelParams::from_loss(1.0, 0.0, 0.0, 5.0, 2.0, 0.0).unwrap();
    let mut rows = scan_point(&base, 1.0, 2.0, 5.0);
    rows.extend(scan_point(&fig2(1.0, 2.0), 1.0, 2.0, 0.0));
    assert_eq!(rows[0].branch_id, -1);
    let mut buf = Vec::new();
    write_scan_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "J,T1_inv,Un,kappa,alpha,n_solutions,branch_id");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",NaN,NaN,0,-1"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_modes_are_eigenpairs(
        j in 0.0f64..10.0, eps in -5.0f64..5.0, gp in 0.0f64..10.0, t1 in 0.0f64..8.0, fa in -1.0f64..1.0,
    ) {
        let p = ModelParams::from_loss(j, 0.0, eps, gp, t1, fa).unwrap();
        for m in linear_decay_modes(&p) {
            prop_assert!(m.residual < 1e-10, "{:?}", m);
        }
    }

    #[test]
    fn selected_contrast_matches_kappa_relation(j in 0.01f64..20.0, gp in 0.0f64..10.0, t1 in 0.05f64..8.0, fa in 0.05f64..1.0) {
        let p = ModelParams::from_loss(j, 0.0, 0.0, gp, t1, fa).unwrap();
        let m = steady_mode(&p).unwrap();
        let closed = alpha_from_kappa(&p, m.kappa.re).unwrap();
        prop_assert!((m.alpha - closed).abs() < 1e-10 * (1.0 + closed));
    }

    #[test]
    fn nonlinear_solutions_are_stationary(
        j in 0.1f64..10.0, gp in 0.0f64..10.0, t1 in 0.1f64..5.0, fa in -1.0f64..1.0, un in 0.0f64..200.0,
    ) {
        prop_assume!(fa.abs() > 0.05);
        let n = 10.0;
        let p = ModelParams::from_loss(j, un / n, 0.0, gp, t1, fa).unwrap();
        let sols = nonlinear_quasi_steady(&p, n).unwrap();
        prop_assert!(sols.len() == 1 || sols.len() == 3, "{} solutions", sols.len());
        let coeffs = quartic_coefficients(&p, n);
        for s in &sols {
            let scale = j + un + 2.0 * t1 + gp;
            prop_assert!(stationarity_residual(&p, s.kappa.re, s.s0, n) < 1e-8 * scale * n);
            prop_assert!(becsim_core::linalg::relative_residual(&coeffs, s.kappa) < 1e-10);
            let len = (s.s0[0].powi(2) + s.s0[1].powi(2) + s.s0[2].powi(2)).sqrt();
            prop_assert!(len <= n * (1.0 + 1e-8));
        }
    }
}
