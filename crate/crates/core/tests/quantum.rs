use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_relative_eq;
use becsim_core::meanfield::{integrate, BlochState, DriveSpec};
use becsim_core::model::{build_hamiltonian, FockSector, ModelParams};
use becsim_core::quantum::*;
use becsim_core::series::linspace;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

fn master(state: &QuantumState, p: &ModelParams, t_end: f64, points: usize) -> MasterRun {
    let grid = linspace(0.0, t_end, points);
    propagate_master(state, p, &DriveSpec::none(), (0.0, t_end), &grid, &MasterOptions::default()).unwrap()
}

#[test]
fn master_preserves_trace_hermiticity_and_positivity() {
    let p = ModelParams::new(2.0, 0.4, 0.5, 1.0, 0.5, 1.5).unwrap();
    let run = master(&QuantumState::coherent(10, 1.0, 0.3), &p, 2.0, 21);
    for rho in &run.states {
        assert!((rho.trace() - 1.0).abs() < 1e-10);
        assert!(rho.hermiticity_error() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-10);
    }
}

#[test]
fn noninteracting_moments_follow_mean_field() {
    // without interaction the first moments close on the linear equations
    let p = ModelParams::new(1.5, 0.0, 0.8, 2.0, 0.5, 1.5).unwrap();
    let (n, theta, phi) = (12, 1.1, 0.4);
    let run = master(&QuantumState::coherent(n, theta, phi), &p, 2.0, 21);
    let mf = integrate(&BlochState::coherent(n as f64, theta, phi), &p, &DriveSpec::none(), (0.0, 2.0), &run.series.t)
        .unwrap();
    for i in 0..run.series.t.len() {
        let (a, na) = run.series.bloch(i);
        let (b, nb) = mf.bloch(i);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-6 * n as f64, "t={} k={k}", run.series.t[i]);
        }
        assert!((na - nb).abs() < 1e-6 * n as f64);
    }
}

#[test]
fn phase_noise_thermalizes_within_sector() {
    let p = ModelParams::new(1.0, 0.5, 0.0, 2.0, 0.0, 0.0).unwrap();
    let run = master(&QuantumState::coherent(10, 1.0, 0.0), &p, 10.0, 11);
    let last = run.series.t.len() - 1;
    let (s, n) = run.series.bloch(last);
    assert_relative_eq!(n, 10.0, max_relative = 1e-10);
    assert!(s.iter().all(|c| c.abs() < 1e-2 * n), "{s:?}");
    assert!(run.series.alpha[last] < 1e-2);
}

#[test]
fn unitary_evolution_conserves_energy() {
    let p = ModelParams::new(2.0, 0.7, 0.4, 0.0, 0.0, 0.0).unwrap();
    let n = 14;
    let h = build_hamiltonian(FockSector::new(n), &p);
    let run = master(&QuantumState::coherent(n, 2.0, 1.0), &p, 3.0, 31);
    let energy = |rho: &BlockDensity| (rho.block(n) * &h).trace().re;
    let e0 = energy(&run.states[0]);
    for rho in &run.states {
        assert!((energy(rho) - e0).abs() < 1e-8 * e0.abs().max(1.0));
    }
}

#[test]
fn pure_loss_decays_exponentially() {
    let gamma = 0.8;
    let p = ModelParams::new(1.0, 0.3, 0.0, 0.0, gamma, gamma).unwrap();
    let run = master(&QuantumState::coherent(10, 0.7, 0.0), &p, 2.0, 21);
    for (t, n) in run.series.t.iter().zip(&run.series.n) {
        assert_relative_eq!(*n, 10.0 * (-gamma * t).exp(), max_relative = 1e-7);
    }
}

#[test]
fn mcwf_without_dissipation_is_unitary() {
    let p = ModelParams::new(2.0, 0.5, 0.3, 0.0, 0.0, 0.0).unwrap();
    let psi = QuantumState::coherent(12, 1.2, 0.5);
    let grid = linspace(0.0, 2.0, 21);
    let ens = mcwf_ensemble(&psi, &p, &DriveSpec::none(), (0.0, 2.0), &grid, 3, 1, &McwfOptions::default()).unwrap();
    let run = master(&psi, &p, 2.0, 21);
    assert!(ens.jump_counts.iter().all(|c| c.iter().all(|&k| k == 0)));
    for i in 0..grid.len() {
        let (a, _) = ens.series.bloch(i);
        let (b, _) = run.series.bloch(i);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-6, "t={} k={k}", grid[i]);
        }
    }
}

#[test]
fn mcwf_ensemble_agrees_with_master() {
    let p = ModelParams::new(1.0, 0.3, 0.0, 1.0, 0.5, 1.0).unwrap();
    let psi = QuantumState::coherent(10, FRAC_PI_2, 0.0);
    let grid = linspace(0.0, 1.5, 7);
    let ens = mcwf_ensemble(&psi, &p, &DriveSpec::none(), (0.0, 1.5), &grid, 400, 77, &McwfOptions::default()).unwrap();
    let run = master(&psi, &p, 1.5, 7);
    let se = ens.series.errors.as_ref().unwrap();
    let pairs = [
        (&ens.series.s_x, &run.series.s_x, &se.s_x),
        (&ens.series.s_y, &run.series.s_y, &se.s_y),
        (&ens.series.s_z, &run.series.s_z, &se.s_z),
        (&ens.series.n, &run.series.n, &se.n),
    ];
    for (a, b, e) in pairs {
        for i in 0..grid.len() {
            let d = (a[i] - b[i]).abs();
            // at t = 0 every trajectory is identical and the error is round-off
            assert!(d <= 3.0 * e[i] || d <= 1e-9 * b[i].abs().max(1.0), "t={} {d} vs {}", grid[i], e[i]);
        }
    }
}

#[test]
fn loss_jump_counts_are_binomial() {
    let (n, gamma) = (10usize, 1.0);
    let t_end = 2f64.ln();
    let p = ModelParams::new(0.0, 0.0, 0.0, 0.0, gamma, 0.0).unwrap();
    let psi = QuantumState::dicke(n, n);
    let ens = mcwf_ensemble(&psi, &p, &DriveSpec::none(), (0.0, t_end), &[t_end], 1000, 2024, &McwfOptions::default())
        .unwrap();
    let mut observed = vec![0.0; n + 1];
    for c in &ens.jump_counts {
        assert_eq!(c[0] + c[1] + c[3], 0);
        observed[c[2]] += 1.0;
    }
    let dist = Binomial::new(1.0 - (-gamma * t_end).exp(), n as u64).unwrap();
    let m = ens.completed() as f64;
    // merge sparse tails so every bin expects at least five
    let bins: [&[usize]; 9] = [&[0, 1], &[2], &[3], &[4], &[5], &[6], &[7], &[8], &[9, 10]];
    let chi2: f64 = bins
        .iter()
        .map(|b| {
            let o: f64 = b.iter().map(|&k| observed[k]).sum();
            let e: f64 = b.iter().map(|&k| m * dist.pmf(k as u64)).sum();
            (o - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new((bins.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 = {chi2}, p = {p_value}");
}

#[test]
fn mcwf_is_reproducible_for_fixed_seed() {
    let p = ModelParams::new(1.0, 0.3, 0.2, 1.0, 0.5, 1.0).unwrap();
    let psi = QuantumState::coherent(8, 1.0, 0.0);
    let grid = linspace(0.0, 1.0, 5);
    let run = |seed| mcwf_ensemble(&psi, &p, &DriveSpec::none(), (0.0, 1.0), &grid, 20, seed, &McwfOptions::default()).unwrap();
    let a = run(5);
    assert_eq!(a, run(5));
    assert_ne!(a.series, run(6).series);
}

#[test]
fn spdm_of_coherent_and_thermal_states() {
    let c = reduced_spdm(&QuantumState::coherent(20, 0.9, 1.3)).unwrap();
    assert_relative_eq!(c.purity, 1.0, epsilon = 1e-10);
    let t = reduced_spdm(&QuantumState::infinite_temperature(20)).unwrap();
    assert!(t.purity.abs() < 1e-12);
    for r in 0..2 {
        for k in 0..2 {
            let want = if r == k { 0.5 } else { 0.0 };
            assert!((t.matrix[(r, k)].re - want).abs() < 1e-12 && t.matrix[(r, k)].im.abs() < 1e-12);
        }
    }
}

#[test]
fn number_state_distributions() {
    let (n, k) = (9, 3);
    let d = measurement_distributions(&QuantumState::dicke(n, k));
    let want = (n as f64 - 2.0 * k as f64) / 2.0;
    for &(sz, p) in &d.sz {
        assert_relative_eq!(p, if sz == want { 1.0 } else { 0.0 }, epsilon = 1e-12);
    }
    let occupied: Vec<f64> = d.phi.iter().copied().filter(|&p| p > 0.0).collect();
    assert_eq!(occupied.len(), n + 1);
    assert!(occupied.iter().all(|&p| (p - 1.0 / (n + 1) as f64).abs() < 1e-12));
}

#[test]
fn phase_state_has_sharp_phase() {
    let n = 15;
    let phi = 2.0 * PI * 5.0 / (n + 1) as f64;
    let d = measurement_distributions(&QuantumState::phase_state(n, phi));
    let peak = d.phi.iter().copied().fold(0.0, f64::max);
    assert_relative_eq!(peak, 1.0, epsilon = 1e-12);
    let idx = d.phi.iter().position(|&p| p == peak).unwrap();
    assert!((d.phi_centers[idx] - phi).abs() < PI / d.phi.len() as f64);
}

#[test]
fn equator_coherent_state_phase_peaks_at_zero() {
    let d = measurement_distributions(&QuantumState::coherent(30, FRAC_PI_2, 0.0));
    let idx = (0..d.phi.len()).max_by(|&a, &b| d.phi[a].total_cmp(&d.phi[b])).unwrap();
    assert_eq!(idx, 0);
    assert_relative_eq!(d.phi.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
}

#[test]
fn coherent_state_fluctuations_scale_with_number() {
    let rel = |n: usize| covariances(&QuantumState::coherent(n, FRAC_PI_2, 0.0)).zz / (n * n) as f64;
    assert!((rel(40) / rel(20) - 0.5).abs() < 0.1);
    let d = covariances(&QuantumState::dicke(12, 4));
    assert!(d.zz.abs() < 1e-12);
}

#[test]
fn husimi_function_normalization_and_peak() {
    let (theta, phi) = (1.0, 2.0);
    let q = husimi_q(&QuantumState::coherent(20, theta, phi), 64, 128);
    assert_relative_eq!(q.integral(), 1.0, epsilon = 1e-6);
    let (t, f) = q.argmax();
    assert!((t - theta).abs() < 0.06 && (f - phi).abs() < 0.06, "({t}, {f})");

    let flat = husimi_q(&QuantumState::infinite_temperature(10), 16, 32);
    assert!(flat.q.iter().all(|&v| (v - 0.25 / PI).abs() < 1e-12));
    assert_relative_eq!(flat.integral(), 1.0, epsilon = 1e-10);
}
