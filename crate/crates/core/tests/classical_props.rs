use dew_core::classical::{
    exact_trajectory, integrate_trajectory, point_score, simulate_classical_score, DistributionConfig, PhasePoint,
};
use dew_core::normal_modes::NormalModeSpec;
use dew_core::precession::{classical_bound, ProtocolSpec, Sigma};
use proptest::prelude::*;

fn distributions() -> Vec<DistributionConfig> {
    vec![
        DistributionConfig::Gaussian { mean: [0.7, 0.1, -0.3, 0.4], std: [0.5, 0.8, 0.3, 1.0] },
        DistributionConfig::Ring { radius: 1.5, width: 0.2, momentum_std: 0.4 },
        DistributionConfig::PointMass { point: [1.0, 0.0, 1.0, 0.0] },
        DistributionConfig::Bimodal { a: [1.0, 0.5, 0.0, 0.0], b: [-0.4, 0.0, 0.8, -0.2], std: 0.3, weight: 0.7 },
        DistributionConfig::UniformBox { lo: [0.0, -0.5, 0.0, -0.5], hi: [1.0, 0.5, 1.0, 0.5] },
    ]
}

fn coupled() -> NormalModeSpec {
    NormalModeSpec::new(1.0, 1.3, 1.0, 0.8, 0.25).unwrap()
}

#[test]
fn ensembles_respect_the_classical_bound() {
    let spec = coupled();
    for k in [3usize, 5, 7] {
        for sigma in [Sigma::Plus, Sigma::Minus] {
            let protocol = ProtocolSpec::new(k, sigma).unwrap();
            for config in distributions() {
                let dist = config.build().unwrap();
                for seed in 0..50u64 {
                    let est = simulate_classical_score(&dist, &spec, &protocol, 10_000, seed).unwrap();
                    let limit = classical_bound(k) + 4.0 * est.stderr.max(1e-12);
                    assert!(
                        est.p_value <= limit,
                        "K={k} {sigma:?} {} seed {seed}: {} > {limit}",
                        config.label(),
                        est.p_value
                    );
                }
            }
        }
    }
}

#[test]
fn seeds_reproduce_across_thread_counts() {
    let spec = coupled();
    let protocol = ProtocolSpec::new(5, Sigma::Minus).unwrap();
    let dist = distributions()[1].build().unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate_classical_score(&dist, &spec, &protocol, 50_000, 11).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
    let other = simulate_classical_score(&dist, &spec, &protocol, 50_000, 12).unwrap();
    assert_ne!(one.counts, other.counts);
}

#[test]
fn verlet_converges_at_second_order() {
    let spec = coupled();
    let start: PhasePoint = [0.8, -0.2, 0.3, 0.5];
    let t = 7.0;
    let exact = exact_trajectory(start, &spec, t);
    let err = |dt: f64| {
        let got = integrate_trajectory(start, &spec, t, dt).unwrap();
        got.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let base = 0.05 / spec.omega_plus;
    let (e1, e2) = (err(base), err(base / 4.0));
    let slope = (e1 / e2).ln() / 4f64.ln();
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope} from errors {e1}, {e2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_point_respects_the_bound(
        point in prop::array::uniform4(-5.0f64..5.0),
        k in 1usize..9,
        t0 in -1.0f64..1.0,
        minus in any::<bool>(),
    ) {
        let sigma = if minus { Sigma::Minus } else { Sigma::Plus };
        let protocol = ProtocolSpec::with_offset(k, t0, sigma).unwrap();
        prop_assert!(point_score(&point, &coupled(), &protocol) <= classical_bound(k) + 1e-15);
    }

    #[test]
    fn energy_is_conserved_by_the_exact_flow(point in prop::array::uniform4(-3.0f64..3.0), t in 0.0f64..50.0) {
        let spec = coupled();
        let e0 = spec.energy(point[0], point[1], point[2], point[3]);
        let p = exact_trajectory(point, &spec, t);
        prop_assert!((spec.energy(p[0], p[1], p[2], p[3]) - e0).abs() <= 1e-10 * (1.0 + e0));
    }
}
