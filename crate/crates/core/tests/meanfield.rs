use std::f64::consts::PI;

use approx::assert_relative_eq;
use becsim_core::meanfield::{
    bifurcation_threshold, bloch_rhs, find_fixed_points, fixed_point_residual, integrate, BlochState, DriveSpec,
    Stability,
};
use becsim_core::model::ModelParams;
use becsim_core::series::linspace;
use becsim_core::steadystate::decay_matrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (-5.0f64..5.0, -3.0f64..3.0, 0.0f64..5.0, 0.0f64..4.0, 0.0f64..4.0)
        .prop_map(|(j, eps, gp, g1, g2)| ModelParams::new(j, 0.0, eps, gp, g1, g2).unwrap())
}

fn bloch() -> impl Strategy<Value = BlochState> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.1f64..100.0)
        .prop_map(|(x, y, z, n)| BlochState::new(x * n, y * n, z * n, n))
}

#[test]
fn fig3_particle_number_after_one_second() {
    let p = ModelParams::from_loss(4.0, 0.0, 10.0, 5.0, 1.0, 0.5).unwrap();
    let s = integrate(&BlochState::coherent(100.0, PI / 3.0, 0.0), &p, &DriveSpec::none(), (0.0, 1.0), &[1.0]).unwrap();
    let ratio = s.n[0] / 100.0;
    assert!((ratio - 0.40).abs() <= 0.05, "n(1)/n(0) = {ratio}");
}

#[test]
fn linear_trajectory_matches_matrix_exponential() {
    let p = ModelParams::new(2.0, 0.0, 1.5, 5.0, 1.0, 3.0).unwrap();
    let init = BlochState::coherent(100.0, 1.0, 0.4);
    let grid = linspace(0.0, 2.0, 21);
    let s = integrate(&init, &p, &DriveSpec::none(), (0.0, 2.0), &grid).unwrap();
    let m = decay_matrix(&p);
    let v0 = DVector::from_column_slice(&init.to_array());
    for (i, &t) in grid.iter().enumerate() {
        let v: DVector<f64> = (&m * -t).exp() * &v0;
        let (got, n) = s.bloch(i);
        let scale = v.norm();
        for k in 0..3 {
            assert!((got[k] - v[k]).abs() < 1e-8 * scale, "t={t} k={k}");
        }
        assert!((n - v[3]).abs() < 1e-8 * scale);
    }
}

#[test]
fn closed_system_conserves_length_and_number() {
    let p = ModelParams::new(3.0, 0.7, 1.2, 0.0, 0.0, 0.0).unwrap();
    let init = BlochState::coherent(40.0, 0.8, 2.0);
    let grid = linspace(0.0, 5.0, 51);
    let s = integrate(&init, &p, &DriveSpec::none(), (0.0, 5.0), &grid).unwrap();
    for i in 0..grid.len() {
        let (v, n) = s.bloch(i);
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert_relative_eq!(len, 40.0, max_relative = 1e-7);
        assert_relative_eq!(n, 40.0, max_relative = 1e-12);
    }
}

#[test]
fn phase_noise_keeps_number_and_shrinks_bloch_vector() {
    let p = ModelParams::new(2.0, 0.3, 0.5, 4.0, 0.0, 0.0).unwrap();
    let init = BlochState::coherent(50.0, 1.2, 0.3);
    let grid = linspace(0.0, 3.0, 61);
    let s = integrate(&init, &p, &DriveSpec::none(), (0.0, 3.0), &grid).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..grid.len() {
        let (v, n) = s.bloch(i);
        assert_eq!(n, 50.0);
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!(len <= prev * (1.0 + 1e-9));
        prev = len;
    }
}

#[test]
fn fixed_points_have_small_residual() {
    for (u, t1) in [(0.0, 0.0), (0.4, 0.0), (0.4, 10.0), (0.1, 3.0)] {
        let p = ModelParams::from_loss(10.0, u, 0.0, 0.0, t1, 0.5).unwrap();
        for fp in find_fixed_points(&p, 100.0).unwrap() {
            let d = fp.direction;
            assert_relative_eq!((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(), 1.0, epsilon = 1e-10);
            assert!(fixed_point_residual(&p, 100.0, d) < 1e-9, "{fp:?}");
        }
    }
}

#[test]
fn dissipation_turns_elliptic_points_attractive_and_repulsive() {
    let closed = ModelParams::new(10.0, 0.4, 0.0, 0.0, 0.0, 0.0).unwrap();
    let fps = find_fixed_points(&closed, 100.0).unwrap();
    assert_eq!(fps.len(), 4);
    assert_eq!(fps.iter().filter(|f| f.stability == Stability::Saddle).count(), 1);
    assert_eq!(fps.iter().filter(|f| f.stability == Stability::Elliptic).count(), 3);

    let lossy = ModelParams::from_loss(10.0, 0.4, 0.0, 0.0, 10.0, 0.5).unwrap();
    let fps = find_fixed_points(&lossy, 100.0).unwrap();
    assert!(fps.iter().any(|f| f.stability == Stability::Attractive));
    assert!(fps.iter().any(|f| f.stability == Stability::Repulsive));
    for f in &fps {
        let re: Vec<f64> = f.jacobian_eigenvalues.iter().map(|z| z.re).collect();
        match f.stability {
            Stability::Attractive => assert!(re.iter().all(|&r| r < 0.0)),
            Stability::Repulsive => assert!(re.iter().all(|&r| r > 0.0)),
            Stability::Saddle => assert!(re[0] * re[1] < 0.0),
            Stability::Elliptic => {}
        }
    }
}

#[test]
fn self_trapping_threshold_at_twice_tunneling() {
    let p = ModelParams::new(10.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
    let un = bifurcation_threshold(&p, 100.0, 5.0, 40.0, 1e-6).unwrap();
    assert!((un - 20.0).abs() < 0.01 * 20.0, "Un = {un}");
    assert_eq!(find_fixed_points(&p.with_u(0.19), 100.0).unwrap().len(), 2);
    assert_eq!(find_fixed_points(&p.with_u(0.21), 100.0).unwrap().len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decay_matrix_matches_rhs(p in params(), s in bloch()) {
        // the non-interacting equations are dv/dt = -M v
        let d = bloch_rhs(&s, &p, 0.0, &DriveSpec::none()).to_array();
        let m: DMatrix<f64> = decay_matrix(&p);
        let v = DVector::from_column_slice(&s.to_array());
        let mv = m * v;
        for k in 0..4 {
            prop_assert!((d[k] + mv[k]).abs() < 1e-10 * (1.0 + mv.norm()));
        }
    }

    #[test]
    fn phase_noise_leaves_imbalance_undamped(
        j in -5.0f64..5.0, u in -2.0f64..2.0, eps in -3.0f64..3.0, gp in 0.0f64..5.0, s in bloch(),
    ) {
        let p = ModelParams::new(j, u, eps, gp, 0.0, 0.0).unwrap();
        let d = bloch_rhs(&s, &p, 0.0, &DriveSpec::none());
        prop_assert_eq!(d.n, 0.0);
        prop_assert!((d.s_z + 2.0 * j * s.s_y).abs() < 1e-12 * (1.0 + s.n));
    }

    #[test]
    fn loss_bias_pumps_imbalance(n in 0.1f64..100.0, t1 in 0.1f64..5.0, fa in -1.0f64..1.0) {
        let p = ModelParams::from_loss(1.0, 0.0, 0.0, 0.0, t1, fa).unwrap();
        let d = bloch_rhs(&BlochState::new(0.0, 0.0, 0.0, n), &p, 0.0, &DriveSpec::none());
        prop_assert!((d.s_z + t1 * fa * n).abs() < 1e-12 * n * t1);
    }
}
