use approx::assert_relative_eq;
use becsim_core::model::{angular_momentum_ops, build_hamiltonian, coherent_state, derive_rates, FockSector, ModelParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

type C = Complex64;

fn comm(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    a * b - b * a
}

/// Exchange of the two wells: basis index `i -> n - i`.
fn exchange(n: usize) -> DMatrix<C> {
    DMatrix::from_fn(n + 1, n + 1, |r, c| if r + c == n { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) })
}

fn expect(op: &DMatrix<C>, psi: &nalgebra::DVector<C>) -> f64 {
    (psi.adjoint() * op * psi)[(0, 0)].re
}

#[test]
fn rates_one_sided_loss() {
    let r = derive_rates(&ModelParams::new(1.0, 0.0, 0.0, 5.0, 0.0, 4.0).unwrap());
    assert_relative_eq!(r.t1_inv, 2.0);
    assert_relative_eq!(r.t2_inv, 7.0);
    assert_relative_eq!(r.f_a, 1.0);
}

#[test]
fn config_keys_match_external_names() {
    let p = ModelParams::new(1.0, 0.5, 0.25, 5.0, 1.0, 3.0).unwrap();
    let v = serde_json::to_value(p).unwrap();
    for key in ["J", "U", "epsilon", "gamma_p", "gamma_a1", "gamma_a2"] {
        assert!(v.get(key).is_some(), "missing key {key}");
    }
    let back: ModelParams = serde_json::from_value(v).unwrap();
    assert_eq!(back, p);
}

#[test]
fn ground_state_matches_independent_construction() {
    // H from its definition with independently built matrix elements
    let (n, j, u, eps) = (20usize, 10.0, 1.0, 3.0);
    let h = build_hamiltonian(FockSector::new(n), &ModelParams::new(j, u, eps, 0.0, 0.0, 0.0).unwrap());
    let mut oracle = DMatrix::<f64>::zeros(n + 1, n + 1);
    for n1 in 0..=n {
        let n2 = n - n1;
        let lz = (n2 as f64 - n1 as f64) / 2.0;
        oracle[(n1, n1)] = 2.0 * eps * lz + u * lz * lz;
        if n1 < n {
            // <n1+1, n2-1| a1† a2 |n1, n2> = sqrt((n1+1) n2)
            let t = ((n1 + 1) as f64 * n2 as f64).sqrt();
            oracle[(n1 + 1, n1)] = -j * t;
            oracle[(n1, n1 + 1)] = -j * t;
        }
    }
    let e_model = h.map(|z| z.re).symmetric_eigen().eigenvalues.min();
    let e_oracle = oracle.symmetric_eigen().eigenvalues.min();
    assert_relative_eq!(e_model, e_oracle, max_relative = 1e-12);
    assert!(h.iter().all(|z| z.im == 0.0));
}

#[test]
fn equator_coherent_state_points_along_y() {
    let sector = FockSector::new(10);
    let ops = angular_momentum_ops(sector);
    let psi = coherent_state(sector, std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    assert!(expect(&ops.lx, &psi).abs() < 1e-12);
    assert_relative_eq!(expect(&ops.ly, &psi), 5.0, epsilon = 1e-12);
}

#[test]
fn pole_coherent_state_fills_well_two() {
    let sector = FockSector::new(7);
    let psi = coherent_state(sector, 0.0, 0.0);
    assert_relative_eq!(psi[0].norm(), 1.0, epsilon = 1e-15);
    let ops = angular_momentum_ops(sector);
    assert_relative_eq!(expect(&ops.lz, &psi) / 7.0, 0.5, epsilon = 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn su2_algebra_and_casimir(n in 0usize..=200) {
        let ops = angular_momentum_ops(FockSector::new(n));
        let i = C::new(0.0, 1.0);
        let l = n as f64 / 2.0;
        // products have entries up to ℓ(ℓ+1); measure round-off relative to it
        let scale = (l * (l + 1.0)).max(1.0);
        prop_assert!((comm(&ops.lx, &ops.ly) - &ops.lz * i).norm() / scale < 1e-12);
        prop_assert!((comm(&ops.ly, &ops.lz) - &ops.lx * i).norm() / scale < 1e-12);
        prop_assert!((comm(&ops.lz, &ops.lx) - &ops.ly * i).norm() / scale < 1e-12);
        let cas = &ops.lx * &ops.lx + &ops.ly * &ops.ly + &ops.lz * &ops.lz;
        let id = DMatrix::<C>::identity(n + 1, n + 1) * C::new(l * (l + 1.0), 0.0);
        prop_assert!((cas - id).norm() / scale < 1e-12);
        prop_assert!(ops.lz.trace().norm() < 1e-12);
    }

    #[test]
    fn hamiltonian_hermitian_and_exchange_symmetric(
        n in 1usize..40, j in -5.0f64..5.0, u in -3.0f64..3.0, eps in -3.0f64..3.0,
    ) {
        let sector = FockSector::new(n);
        let h = build_hamiltonian(sector, &ModelParams::new(j, u, eps, 0.0, 0.0, 0.0).unwrap());
        prop_assert!((&h - h.adjoint()).norm() < 1e-12);
        let x = exchange(n);
        // exchange maps Lz -> -Lz, so it commutes with H only without bias
        let h0 = build_hamiltonian(sector, &ModelParams::new(j, u, 0.0, 0.0, 0.0, 0.0).unwrap());
        prop_assert!(comm(&h0, &x).norm() < 1e-10 * (1.0 + h0.norm()));
        let ops = angular_momentum_ops(sector);
        prop_assert!((&x * &ops.lz * &x + &ops.lz).norm() < 1e-12);
    }

    #[test]
    fn coherent_state_moments(n in 1usize..120, theta in 0.0f64..std::f64::consts::PI, phi in -3.0f64..3.0) {
        let sector = FockSector::new(n);
        let psi = coherent_state(sector, theta, phi);
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        let ops = angular_momentum_ops(sector);
        let half = n as f64 / 2.0;
        let want = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let got = [expect(&ops.lx, &psi), expect(&ops.ly, &psi), expect(&ops.lz, &psi)];
        for k in 0..3 {
            prop_assert!((got[k] / half - want[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn derived_rates_invariants(gp in 0.0f64..10.0, g1 in 0.0f64..10.0, g2 in 0.0f64..10.0) {
        let r = derive_rates(&ModelParams::new(1.0, 0.0, 0.0, gp, g1, g2).unwrap());
        prop_assert!(r.t2_inv >= r.t1_inv);
        prop_assert!(r.f_a.abs() <= 1.0);
        prop_assert!((r.t1_inv - 0.5 * (g1 + g2)).abs() < 1e-12);
    }
}
