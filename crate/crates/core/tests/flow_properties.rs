use rand::{rngs::StdRng, Rng, SeedableRng};
use wavepacket_core::flow::{integrate_flow, integrate_flow_times, lyapunov_estimate, FlowOptions};
use wavepacket_core::models::HamiltonianModel;
use wavepacket_core::symplectic::PhaseSpacePoint;

fn catalog() -> Vec<HamiltonianModel> {
    vec![
        HamiltonianModel::harmonic(1.3).unwrap(),
        HamiltonianModel::free(),
        HamiltonianModel::inverted(0.2).unwrap(),
        HamiltonianModel::pendulum(1.0).unwrap(),
        HamiltonianModel::wannier_stark(1.0, 0.1).unwrap(),
        HamiltonianModel::quartic(),
        HamiltonianModel::aniso_harmonic_2d(1.0, std::f64::consts::SQRT_2).unwrap(),
    ]
}

fn random_point(rng: &mut StdRng, d: usize, radius: f64) -> PhaseSpacePoint {
    loop {
        let v: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-radius..radius)).collect();
        if v.iter().map(|x| x * x).sum::<f64>().sqrt() <= radius {
            return PhaseSpacePoint::from_stacked(&v).unwrap();
        }
    }
}

#[test]
fn long_runs_stay_symplectic_and_conserve_energy() {
    let mut rng = StdRng::seed_from_u64(7);
    for model in catalog() {
        let t_end = 100.0;
        for _ in 0..3 {
            let x0 = random_point(&mut rng, model.dim(), 3.0);
            let traj = integrate_flow(&model, &x0, t_end, 1.0, &FlowOptions::default()).unwrap();
            let end = traj.last();
            let h0 = model.energy(&x0);
            let h1 = model.energy(&end.x);
            // Along exponentially unstable flows round-off in S and X is amplified
            // by the stretch itself, so the checks are normalized by it there.
            let stretch = end.s.matrix().norm_squared().max(1.0);
            let (defect, drift) = if stretch > 1e8 {
                let kinetic = 0.5 * end.x.p.norm_squared();
                (end.sympl_defect / stretch, (h1 - h0).abs() / kinetic.max(1.0))
            } else {
                (end.sympl_defect, (h1 - h0).abs() / h0.abs().max(1.0))
            };
            assert!(defect < 1e-7, "{model}: defect {defect:.3e} from {x0:?}");
            assert!(drift < 1e-8, "{model}: energy drift {drift:.3e} from {x0:?}");
        }
    }
}

#[test]
fn flow_composes() {
    let mut rng = StdRng::seed_from_u64(11);
    let opts = FlowOptions::default();
    for model in catalog() {
        for _ in 0..4 {
            let x0 = random_point(&mut rng, model.dim(), 2.0);
            let s = rng.gen_range(0.1..3.0);
            let t = rng.gen_range(0.1..3.0);
            let whole = integrate_flow_times(&model, &x0, &[0.0, s + t], &opts).unwrap();
            let first = integrate_flow_times(&model, &x0, &[0.0, s], &opts).unwrap();
            let mid = first.last();
            let second = integrate_flow_times(&model, &mid.x, &[0.0, t], &opts).unwrap();
            let xa = whole.last().x.to_stacked();
            let xb = second.last().x.to_stacked();
            assert!((xa - xb).amax() < 1e-7, "{model}: point composition");
            let sa = whole.last().s.matrix().clone();
            let sb = second.last().s.matrix() * mid.s.matrix();
            assert!((sa - sb).amax() < 1e-7, "{model}: differential composition");
        }
    }
}

#[test]
fn consecutive_samples_are_reproducible() {
    let model = HamiltonianModel::pendulum(1.0).unwrap();
    let x0 = PhaseSpacePoint::scalar(1.0, 0.5).unwrap();
    let traj = integrate_flow(&model, &x0, 20.0, 0.5, &FlowOptions::default()).unwrap();
    let ratio = traj.consistency_ratio().unwrap();
    assert!(ratio < 10.0, "consistency ratio {ratio}");
    assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn lyapunov_examples() {
    let opts = FlowOptions::default();
    let harmonic = integrate_flow(
        &HamiltonianModel::harmonic(1.0).unwrap(),
        &PhaseSpacePoint::scalar(0.3, 1.0).unwrap(),
        50.0,
        0.5,
        &opts,
    )
    .unwrap();
    assert!(lyapunov_estimate(&harmonic).unwrap().gamma.abs() < 1e-8);

    let inverted = integrate_flow(
        &HamiltonianModel::inverted(1.0).unwrap(),
        &PhaseSpacePoint::scalar(0.0, 0.0).unwrap(),
        20.0,
        0.5,
        &opts,
    )
    .unwrap();
    let est = lyapunov_estimate(&inverted).unwrap();
    assert!((est.gamma - 1.0).abs() < 1e-3, "gamma {}", est.gamma);

    let free = integrate_flow(
        &HamiltonianModel::free(),
        &PhaseSpacePoint::scalar(1.0, 0.0).unwrap(),
        100.0,
        1.0,
        &opts,
    )
    .unwrap();
    let est = lyapunov_estimate(&free).unwrap();
    // s_max of [[1,0],[t,1]] is (t + sqrt(t² + 4)) / 2
    for (t, g) in est.times.iter().zip(&est.series) {
        let smax = 0.5 * (t + (t * t + 4.0).sqrt());
        assert!((g - smax.ln() / t).abs() < 1e-9);
    }
    assert!(est.gamma > 0.0 && est.gamma < 0.05);
    assert!(est.series.windows(2).skip(5).all(|w| w[1] < w[0]));
}

#[test]
fn escape_keeps_partial_trajectory() {
    // p-independent blow-up is not in the catalog; an inverted oscillator with
    // a huge rate overflows within the window instead.
    let model = HamiltonianModel::inverted(40.0).unwrap();
    let x0 = PhaseSpacePoint::scalar(1.0, 1.0).unwrap();
    let abort = integrate_flow(&model, &x0, 30.0, 0.5, &FlowOptions::default()).unwrap_err();
    assert!(abort.partial.len() >= 1);
    assert!(abort.partial.t_end() < 30.0);
}
