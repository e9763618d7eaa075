use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use wavepacket_core::flow::{integrate_flow, FlowOptions};
use wavepacket_core::gaussian::{propagate_gaussian, GaussianState};
use wavepacket_core::models::HamiltonianModel;
use wavepacket_core::oracle::{
    exact_width, fidelity, grid_for_evolution, hbar_scaling_study, split_step_evolve, GridSpec, GridWavefunction,
    ScalingOptions,
};
use wavepacket_core::symplectic::{PhaseSpacePoint, SiegelForm};
use wavepacket_core::Error;

fn pt(p: f64, q: f64) -> PhaseSpacePoint {
    PhaseSpacePoint::scalar(p, q).unwrap()
}

fn gaussian(hbar: f64, p: f64, q: f64, z: Complex64) -> GaussianState {
    GaussianState::new(hbar, pt(p, q), SiegelForm::scalar(z.re, z.im).unwrap()).unwrap()
}

fn inner(a: &GridWavefunction, b: &GridWavefunction) -> Complex64 {
    a.values.iter().zip(&b.values).map(|(u, v)| u.conj() * v).sum::<Complex64>() * a.grid.dx
}

fn distance(a: &GridWavefunction, b: &GridWavefunction) -> f64 {
    (a.values.iter().zip(&b.values).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>() * a.grid.dx).sqrt()
}

#[test]
fn grid_construction() {
    let g = GridSpec::default_for(1.0, 0.01).unwrap();
    assert_eq!(g.n, 4096);
    assert!((g.x0 + 9.0).abs() < 1e-12 && (g.length() - 20.0).abs() < 1e-12);
    let wide = GridSpec::default_for(0.0, 4.0).unwrap();
    assert!((wide.length() - 80.0).abs() < 1e-12);
    assert!(GridSpec::new(0.0, 0.1, 1000).is_err());
    let p = g.momenta(0.5);
    assert_eq!(p[1], -p[g.n - 1]);
    assert!((p[g.n / 2].abs() - g.p_nyquist(0.5)).abs() < 1e-9);
    let fine = GridSpec::covering(-5.0, 5.0, 200.0, 0.1).unwrap();
    assert!(0.8 * fine.p_nyquist(0.1) >= 200.0 && fine.n > 4096);
}

#[test]
fn harmonic_ground_state_returns_with_half_phase() {
    let model = HamiltonianModel::harmonic(1.0).unwrap();
    let psi0 = GridWavefunction::from_state(
        &gaussian(1.0, 0.0, 0.0, Complex64::i()),
        GridSpec::default_for(0.0, 1.0).unwrap(),
    )
    .unwrap();
    assert!((psi0.norm_squared() - 1.0).abs() < 1e-8);
    let series = split_step_evolve(&model, &psi0, TAU / 4000.0, TAU, TAU / 4.0).unwrap();
    assert_eq!(series.times.len(), 5);
    let overlap = inner(&psi0, series.states.last().unwrap());
    assert!(overlap.norm() > 1.0 - 1e-8, "fidelity {}", overlap.norm());
    assert!((overlap - Complex64::new(-1.0, 0.0)).norm() < 1e-6, "overlap {overlap}");
}

#[test]
fn free_evolution_keeps_momentum_magnitudes_and_is_step_independent() {
    let free = HamiltonianModel::free();
    let psi0 = GridWavefunction::from_state(
        &gaussian(1.0, 0.7, -1.0, Complex64::new(0.3, 1.2)),
        GridSpec::default_for(0.0, 1.0).unwrap(),
    )
    .unwrap();
    let coarse = split_step_evolve(&free, &psi0, 0.02, 2.0, 0.5).unwrap();
    let fine = split_step_evolve(&free, &psi0, 0.001, 2.0, 0.5).unwrap();
    let fft = FftPlanner::new().plan_fft_forward(psi0.grid.n);
    let magnitudes = |psi: &GridWavefunction| {
        let mut buf = psi.values.clone();
        fft.process(&mut buf);
        let scale = (psi.grid.dx / psi.grid.n as f64).sqrt();
        buf.iter().map(|v| v.norm() * scale).collect::<Vec<_>>()
    };
    let m0 = magnitudes(&psi0);
    for (a, b) in coarse.states.iter().zip(&fine.states) {
        let m = magnitudes(a);
        let drift = m.iter().zip(&m0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-10, "momentum magnitude drift {drift:.3e}");
        assert!(distance(a, b) < 1e-10);
    }
}

#[test]
fn strang_splitting_is_second_order() {
    let model = HamiltonianModel::quartic();
    let hbar = 0.1;
    let state = gaussian(hbar, 0.0, 1.0, Complex64::i());
    let psi0 = GridWavefunction::from_state(&state, GridSpec::default_for(0.0, hbar).unwrap()).unwrap();
    let run = |dt: f64| split_step_evolve(&model, &psi0, dt, 1.0, 1.0).unwrap().states.pop().unwrap();
    let error = |dt: f64| distance(&run(dt), &run(dt / 4.0));
    let (e1, e2) = (error(0.005), error(0.0025));
    let factor = e1 / e2;
    assert!((3.5..=4.5).contains(&factor), "reduction factor {factor} ({e1:.3e} -> {e2:.3e})");
}

#[test]
fn unitarity_over_ten_thousand_steps() {
    let model = HamiltonianModel::pendulum(1.0).unwrap();
    let hbar = 0.05;
    let psi0 =
        GridWavefunction::from_state(&gaussian(hbar, 1.0, 0.0, Complex64::i()), GridSpec::default_for(0.0, hbar).unwrap())
            .unwrap();
    let series = split_step_evolve(&model, &psi0, 1e-3, 10.0, 1.0).unwrap();
    assert_eq!(series.steps, 10_000);
    assert!(series.norm_drift < 1e-10, "norm drift {:.3e}", series.norm_drift);
    assert!(series.max_tail_mass < 1e-8 && series.max_edge_mass < 1e-6);
}

#[test]
fn quadratic_models_agree_with_semiclassical_states() {
    let hbar = 0.1;
    // the inverted case starts on the stable manifold, focusing to Z = i at t = 5
    let inverted_z0 = Complex64::new(-(5.0f64).tanh(), 1.0 / (5.0f64).cosh());
    let cases = [
        (HamiltonianModel::harmonic(1.0).unwrap(), pt(0.5, 1.0), Complex64::i(), 5e-4),
        (HamiltonianModel::free(), pt(0.4, -1.0), Complex64::new(0.2, 1.0), 5e-4),
        (HamiltonianModel::inverted(1.0).unwrap(), pt(-0.5, 0.5), inverted_z0, 5e-4),
    ];
    for (model, x0, z0, dt) in cases {
        let traj = integrate_flow(&model, &x0, 5.0, 0.05, &FlowOptions::default()).unwrap();
        let evo = propagate_gaussian(&traj, &SiegelForm::scalar(z0.re, z0.im).unwrap(), hbar).unwrap();
        let grid = grid_for_evolution(&evo, 12.0).unwrap();
        let psi0 = GridWavefunction::from_state(&evo.states[0], grid).unwrap();
        let series = split_step_evolve(&model, &psi0, dt, 5.0, 0.5).unwrap();
        for (k, psi) in series.states.iter().enumerate() {
            let state = &evo.states[10 * k];
            assert!((state_time(&evo, 10 * k) - series.times[k]).abs() < 1e-12);
            let f = fidelity(psi, state).unwrap();
            assert!(f.modulus >= 1.0 - 1e-6, "{model} t = {}: modulus {}", series.times[k], f.modulus);
            if model.name() != "inverted" {
                assert!(f.raw_norm_error < 1e-6, "{model} t = {}: {:.3e}", series.times[k], f.raw_norm_error);
            }
        }
    }
}

fn state_time(evo: &wavepacket_core::gaussian::GaussianEvolution, k: usize) -> f64 {
    evo.widths.times[k]
}

#[test]
fn fidelity_examples() {
    let hbar = 0.1;
    let state = gaussian(hbar, 0.3, 0.2, Complex64::new(0.5, 1.5));
    let grid = GridSpec::default_for(0.0, hbar).unwrap();
    let psi = GridWavefunction::from_state(&state, grid).unwrap();
    let own = fidelity(&psi, &state).unwrap();
    assert!((own.modulus - 1.0).abs() < 1e-9 && own.norm_error < 1e-9 && own.phase_mismatch.abs() < 1e-12);

    // |ψ| ∝ exp(−x²/2ħ) has scale √ħ; coherent-state overlap exp(−d²/4ħ)
    let d = 10.0 * hbar.sqrt();
    let far = gaussian(hbar, 0.0, d, Complex64::i());
    let near = GridWavefunction::from_state(&gaussian(hbar, 0.0, 0.0, Complex64::i()), grid).unwrap();
    let modulus = fidelity(&near, &far).unwrap().modulus;
    assert!(modulus < 1e-10);
    assert!((modulus / (-d * d / (4.0 * hbar)).exp() - 1.0).abs() < 1e-6);

    let model = HamiltonianModel::harmonic(1.0).unwrap();
    let t = PI / 2.0;
    let traj = integrate_flow(&model, &pt(0.3, 1.0), t, t / 50.0, &FlowOptions::default()).unwrap();
    let evo = propagate_gaussian(&traj, &SiegelForm::scalar(0.0, 1.0).unwrap(), hbar).unwrap();
    let psi0 = GridWavefunction::from_state(&evo.states[0], grid).unwrap();
    let series = split_step_evolve(&model, &psi0, t / 2000.0, t, t).unwrap();
    let f = fidelity(series.states.last().unwrap(), evo.states.last().unwrap()).unwrap();
    assert!((f.modulus - 1.0).abs() < 1e-7, "modulus {}", f.modulus);
    assert!(f.phase_mismatch.abs() < 1e-6, "phase mismatch {:.3e}", f.phase_mismatch);

    let other = gaussian(0.2, 0.0, 0.0, Complex64::i());
    assert!(matches!(fidelity(&psi, &other), Err(Error::GridMismatch(_))));
}

#[test]
fn exact_width_examples() {
    let grid = GridSpec::default_for(0.0, 1.0).unwrap();
    let ground = GridWavefunction::from_state(&gaussian(1.0, 0.0, 0.0, Complex64::i()), grid).unwrap();
    assert!((exact_width(&ground).unwrap() - 1.0).abs() < 1e-10);
    let squeezed = GridWavefunction::from_state(&gaussian(1.0, 0.5, 1.0, Complex64::new(0.0, 2.0)), grid).unwrap();
    assert!((exact_width(&squeezed).unwrap() - 1.25).abs() < 1e-10);

    let wide = GridSpec::new(-40.0, 80.0 / 8192.0, 8192).unwrap();
    let ground = GridWavefunction::from_state(&gaussian(1.0, 0.0, 0.0, Complex64::i()), wide).unwrap();
    let series = split_step_evolve(&HamiltonianModel::free(), &ground, 0.01, 4.0, 1.0).unwrap();
    for (psi, t) in series.states.iter().zip(&series.times) {
        let expected = 0.5 * (2.0 + t * t);
        assert!((exact_width(psi).unwrap() - expected).abs() < 1e-10, "t = {t}");
    }
}

#[test]
fn guards() {
    let hbar = 0.1;
    let grid = GridSpec::default_for(0.0, hbar).unwrap();
    let psi = GridWavefunction::from_state(&gaussian(hbar, 0.0, 0.0, Complex64::i()), grid).unwrap();

    let aniso = HamiltonianModel::aniso_harmonic_2d(1.0, 2.0).unwrap();
    let err = split_step_evolve(&aniso, &psi, 1e-3, 1.0, 0.5).unwrap_err();
    assert!(matches!(err.error, Error::UnsupportedModel(_)));

    let harmonic = HamiltonianModel::harmonic(1.0).unwrap();
    let err = split_step_evolve(&harmonic, &psi, 0.5, 1.0, 0.5).unwrap_err();
    assert!(matches!(err.error, Error::Resolution(_)), "{:?}", err.error);
    let err = split_step_evolve(&harmonic, &psi, 1e-3, 1.0, 0.3333).unwrap_err();
    assert!(matches!(err.error, Error::InvalidArgument(_)));

    // a fast packet accelerated toward the Nyquist limit
    let coarse = GridSpec::new(-12.8, 0.025, 1024).unwrap();
    let fast = GridWavefunction::from_state(&gaussian(hbar, 5.0, -3.0, Complex64::i()), coarse).unwrap();
    let stark = HamiltonianModel::wannier_stark(0.0, -10.0).unwrap();
    let err = split_step_evolve(&stark, &fast, 1e-3, 2.0, 0.1).unwrap_err();
    match err.error {
        Error::Aliasing { t, .. } => {
            assert!(t > 0.0 && t < 2.0);
            assert!(err.partial.times.last().unwrap() <= &t);
        }
        other => panic!("expected aliasing, got {other:?}"),
    }

    // a packet drifting into the edge strip of a narrow window
    let narrow = GridSpec::new(-5.0, 10.0 / 4096.0, 4096).unwrap();
    let drifting = GridWavefunction::from_state(&gaussian(hbar, 2.0, 0.0, Complex64::i()), narrow).unwrap();
    let err = split_step_evolve(&HamiltonianModel::free(), &drifting, 1e-3, 4.0, 0.5).unwrap_err();
    assert!(matches!(err.error, Error::Coverage(_)), "{:?}", err.error);
    assert!(err.partial.times.len() >= 3);
}

#[test]
fn harmonic_scaling_study_is_exact() {
    let study = hbar_scaling_study(
        &HamiltonianModel::harmonic(1.0).unwrap(),
        &pt(0.5, 1.0),
        &SiegelForm::scalar(0.0, 1.0).unwrap(),
        &[0.1, 0.05, 0.025],
        1.0,
        &ScalingOptions::default(),
    )
    .unwrap();
    assert!(study.exact_regime);
    assert!(study.points.iter().all(|p| p.norm_error < 1e-6));
    assert_eq!(study.points.iter().map(|p| p.hbar).collect::<Vec<_>>(), vec![0.1, 0.05, 0.025]);
}

#[test]
fn scaling_study_preconditions() {
    let model = HamiltonianModel::quartic();
    let z0 = SiegelForm::scalar(0.0, 1.0).unwrap();
    let opts = ScalingOptions::default();
    for hbars in [&[0.1, 0.05][..], &[0.1, 0.05, 0.03][..], &[0.025, 0.05, 0.1][..]] {
        let err = hbar_scaling_study(&model, &pt(0.0, 1.0), &z0, hbars, 1.0, &opts).unwrap_err();
        assert!(matches!(err.error, Error::InvalidArgument(_)));
        assert!(err.completed.is_empty());
    }
}
