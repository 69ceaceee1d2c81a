//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::fs;
use std::path::Path;

use dew_core::classical::{hermite_overlap_quadrature, simulate_classical_score, DistributionConfig};
use dew_core::fock::{log_negativity, BasisTag, TwoModeState};
use dew_core::linalg::{herm_eigen, CMatrix, CVector};
use dew_core::normal_modes::{to_normal_exact, to_physical_exact, NormalModeSpec};
use dew_core::precession::{
    classical_bound, classical_bound_ratio, max_score, pos_x_real, score_state, ProtocolSpec, Sigma,
};
use dew_core::rival::{
    abiuso_min_margin, duan_grid, duan_min_margin, family_state, hillery_zubairy_detects, moments, zhang_detects,
    SupportMode,
};
use dew_core::sdp::{build_problem, solve, sweep};
use dew_core::witness::{coherent_expectation_auto, coherent_expectation_closed_form, nondecomposability_check};
use dew_core::Error;
use dew_validation::{run_all, Verdict};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SDP_TOL: f64 = 1e-7;

fn gaussian_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian_complex(rng));
    let n = v.norm();
    v.unscale(n)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn classical_bounds_exact() -> Verdict {
    let mut v = Verdict::new(1, "classical bounds are exact rationals");
    for (k, num, den) in [(3usize, 2u64, 3u64), (4, 1, 2), (5, 3, 5)] {
        let ratio = classical_bound_ratio(k);
        let value = classical_bound(k);
        v.check(ratio == (num, den) && value == num as f64 / den as f64, format!("K={k}: {}/{} = {value}", ratio.0, ratio.1));
    }
    v
}

fn no_false_positives() -> Verdict {
    let mut v = Verdict::new(2, "classical ensembles never exceed the bound");
    let spec = NormalModeSpec::new(1.0, 1.3, 1.0, 0.8, 0.25).unwrap();
    let dists = [
        DistributionConfig::Gaussian { mean: [0.7, 0.1, -0.3, 0.4], std: [0.5, 0.8, 0.3, 1.0] },
        DistributionConfig::Ring { radius: 1.5, width: 0.2, momentum_std: 0.4 },
        DistributionConfig::PointMass { point: [1.0, 0.0, 1.0, 0.0] },
        DistributionConfig::Bimodal { a: [1.0, 0.5, 0.0, 0.0], b: [-0.4, 0.0, 0.8, -0.2], std: 0.3, weight: 0.7 },
        DistributionConfig::UniformBox { lo: [0.0, -0.5, 0.0, -0.5], hi: [1.0, 0.5, 1.0, 0.5] },
    ];
    for k in [3usize, 5] {
        for sigma in [Sigma::Plus, Sigma::Minus] {
            let protocol = ProtocolSpec::new(k, sigma).unwrap();
            let bound = classical_bound(k);
            let mut worst = f64::NEG_INFINITY;
            let mut violations = 0;
            for config in &dists {
                let dist = config.build().unwrap();
                for seed in 0..50u64 {
                    let est = simulate_classical_score(&dist, &spec, &protocol, 100_000, seed).unwrap();
                    let excess = est.p_value - bound - 4.0 * est.stderr;
                    worst = worst.max(excess);
                    violations += (excess > 0.0) as usize;
                }
            }
            v.check(
                violations == 0,
                format!("K={k} {sigma:?}: 5 ensembles x 50 seeds x 1e5 rounds, max(p - bound - 4 stderr) = {worst:.3e}"),
            );
        }
    }
    v
}

fn quantum_violation() -> Verdict {
    let mut v = Verdict::new(3, "Q_3 top eigenvalue and plateau structure");
    let p30 = max_score(3, 30).0;
    v.check((0.705..=0.715).contains(&p30), format!("p_max(n_max=30) = {p30:.6}, required in [0.705, 0.715]"));
    let values: Vec<f64> = (0..=15).map(|n| max_score(3, n).0).collect();
    let nondecreasing = values.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    v.check(nondecreasing, "nondecreasing over n_max = 0..15");
    let jumps: Vec<usize> = (1..values.len()).filter(|&n| values[n] > values[n - 1] + 1e-12).collect();
    let widths: Vec<usize> = std::iter::once(0).chain(jumps.iter().copied()).collect::<Vec<_>>().windows(2).map(|w| w[1] - w[0]).collect();
    v.check(widths.iter().all(|&w| w == 6), format!("rises at n_max = {jumps:?}, plateau widths {widths:?}, required 6"));
    v
}

fn pos_oracle() -> Verdict {
    let mut v = Verdict::new(4, "closed-form pos(X) matches quadrature");
    let pos = pos_x_real(30);
    let mut worst: f64 = 0.0;
    for m in 0..=30 {
        for n in 0..=30 {
            worst = worst.max((pos[(m, n)] - hermite_overlap_quadrature(m, n)).abs());
        }
    }
    v.check(worst <= 1e-10, format!("max |closed form - quadrature| over m, n <= 30: {worst:.3e}"));
    v
}

fn separable_states_respect_bound() -> Verdict {
    let mut v = Verdict::new(5, "random separable states score at most 2/3");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n_max = 5;
    let d = n_max + 1;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let terms = rng.random_range(1..=4);
        let weights: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        let mut m = CMatrix::zeros(d * d, d * d);
        for w in weights {
            let prod = random_unit(&mut rng, d).kronecker(&random_unit(&mut rng, d));
            m += &prod * prod.adjoint() * Complex64::new(w / total, 0.0);
        }
        let phys = TwoModeState::new(m, n_max, BasisTag::Physical).unwrap();
        // The exact image lives on the doubled box, so no amplitude is dropped.
        let normal = to_normal_exact(&phys, FRAC_PI_4).unwrap();
        for sigma in [Sigma::Plus, Sigma::Minus] {
            worst = worst.max(score_state(&normal, 3, sigma).unwrap());
        }
    }
    v.check(worst <= 2.0 / 3.0 + 1e-9, format!("200 states at n_max=5, theta=pi/4: max score {worst:.9}"));
    v
}

fn sdp_sign_structure() -> Verdict {
    let mut v = Verdict::new(6, "SDP sign structure and monotonicity at n_max=3");
    let n = 3;
    let p_max = max_score(3, n).0;
    let thetas = linspace(0.0, FRAC_PI_4, 5);
    let scores = linspace(0.5, p_max, 5);
    let report = sweep(3, n, &thetas, &scores, SDP_TOL);
    let mut worst_zero: f64 = f64::NEG_INFINITY;
    let mut all_ok = true;
    for j in 0..scores.len() {
        match &report.cell(0, j).outcome {
            Ok(sol) => worst_zero = worst_zero.max(sol.s_n - sol.dual_gap),
            Err(_) => all_ok = false,
        }
    }
    v.check(all_ok && worst_zero <= 0.0, format!("theta=0 column: max(s_n - gap) = {worst_zero:.3e}"));

    let mut half_ok = true;
    let mut half_worst: f64 = f64::NEG_INFINITY;
    for i in 0..thetas.len() {
        match &report.cell(i, 0).outcome {
            Ok(sol) => {
                half_worst = half_worst.max(sol.s_n - sol.dual_gap);
                half_ok &= sol.s_n <= sol.dual_gap;
            }
            Err(_) => half_ok = false,
        }
    }
    v.check(half_ok, format!("p=1/2 row: max(s_n - gap) = {half_worst:.3e}"));

    match build_problem(3, FRAC_PI_4, 0.68, n).and_then(|prob| solve(&prob, SDP_TOL)) {
        Ok(sol) => v.check(sol.s_n - sol.dual_gap > 0.0, format!("theta=pi/4, p=0.68: s_n = {:.6}, gap {:.2e}", sol.s_n, sol.dual_gap)),
        Err(Error::InfeasibleTarget { p_max, .. }) => {
            v.check(false, format!("theta=pi/4, p=0.68: infeasible, largest score at n_max=3 is {p_max:.6}"))
        }
        Err(e) => v.check(false, format!("theta=pi/4, p=0.68: {e}")),
    }

    let failed_cells = report.cells.iter().filter(|c| c.outcome.is_err()).count();
    v.check(failed_cells == 0, format!("5x5 grid solved, {failed_cells} failed cells"));
    for viol in &report.violations {
        v.note(format!(
            "{:?} drop {:.4} from (theta={:.4}, p={:.4}) to (theta={:.4}, p={:.4})",
            viol.axis, viol.drop, viol.from.0, viol.from.1, viol.to.0, viol.to.1
        ));
    }
    v.check(report.violations.is_empty(), format!("monotonic along both axes: {} violations", report.violations.len()));
    v
}

fn family_evasion() -> Verdict {
    let mut v = Verdict::new(7, "family states evade the moment criteria");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = duan_grid(41);
    let kappas = [0.25, 0.5, 1.0, 2.0, 4.0];
    let sigmas = [0.1, 0.5, 1.0, 3.0];
    let (mut duan_min, mut abiuso_min, mut zhang_slack, mut closed_err): (f64, f64, f64, f64) = (f64::INFINITY, f64::INFINITY, 0.0, 0.0);
    let (mut zhang_detected, mut hz_mismatch, mut hz_detected) = (0, 0, 0);
    let states = 32;
    for i in 0..states {
        let k = [3usize, 4, 5][i % 3];
        let len = 2 + i % 3;
        let theta = rng.random_range(0.05..1.5);
        let psi = loop {
            let raw = random_unit(&mut rng, len);
            if raw[0].norm_sqr() < 0.95 {
                break raw.iter().copied().collect::<Vec<_>>();
            }
        };
        let fam = family_state(&psi, k, theta, k * (len - 1), SupportMode::MultiplesOfK).unwrap();
        let m = moments(&fam.physical).unwrap();
        closed_err = closed_err.max(m.max_abs_diff(&fam.closed_form_moments()));
        duan_min = duan_min.min(duan_min_margin(&m, &grid).0);
        abiuso_min = abiuso_min.min(abiuso_min_margin(&m, &kappas, &sigmas));
        let z = zhang_detects(&m).unwrap();
        zhang_detected += z.detected as usize;
        zhang_slack = zhang_slack.max(z.slack_exchange.abs());
        let hz = hillery_zubairy_detects(&m);
        let sub_poisson = fam.mean_n_sq() - fam.mean_n().powi(2) < fam.mean_n();
        hz_detected += hz.detected as usize;
        hz_mismatch += (hz.detected != sub_poisson) as usize;
    }
    v.check(duan_min > 0.0, format!("{states} states: min Duan margin over the grid {duan_min:.4}"));
    v.check(zhang_detected == 0 && zhang_slack <= 1e-9, format!("Zhang: {zhang_detected} detections, max |exchange slack| {zhang_slack:.2e}"));
    v.check(abiuso_min > 0.0, format!("min Abiuso margin on the (kappa, sigma) grid {abiuso_min:.4}"));
    v.check(hz_mismatch == 0, format!("Hillery-Zubairy: {hz_detected} detections, {hz_mismatch} disagreements with variance < mean"));
    v.check(closed_err <= 1e-9, format!("closed-form moments vs traces: {closed_err:.2e}"));
    v
}

fn witness_analysis() -> Verdict {
    let mut v = Verdict::new(8, "witness coherent values and nondecomposability");
    for r in [0.0, 0.5, 1.0, 2.0] {
        let (numeric, n) = coherent_expectation_auto(r).unwrap();
        let err = (numeric - coherent_expectation_closed_form(r)).abs();
        v.check(err <= 1e-8, format!("r={r}: |numeric - closed form| = {err:.2e} at n_max={n}"));
    }
    let at_zero = coherent_expectation_auto(0.0).unwrap().0;
    v.check((at_zero - 1.0 / 6.0).abs() <= 1e-14, format!("r=0 value {at_zero:.17}"));
    let values: Vec<f64> = (2..=8).map(|p| nondecomposability_check(3, 2, p).unwrap()).collect();
    let negative = values.iter().all(|&x| x < 0.0);
    let stable = values.iter().all(|&x| (x < 0.0) == (values[0] < 0.0));
    v.check(stable, "sign stable for parent truncations 2..8");
    v.check(negative, format!("min eigenvalue at (K=3, level 2), parents 2..8: {values:.7?}"));
    v
}

fn sdp_reconstruction() -> Verdict {
    let mut v = Verdict::new(9, "SDP minimizers are consistent states");
    let face = max_score(3, 3).0;
    for (theta, p) in [(FRAC_PI_4, 0.62), (FRAC_PI_8, 0.64), (3.0 * FRAC_PI_8 / 2.0, face), (FRAC_PI_4, 0.58)] {
        let sol = build_problem(3, theta, p, 3).and_then(|prob| solve(&prob, SDP_TOL)).unwrap();
        let score = score_state(&sol.rho, 3, Sigma::Plus).unwrap();
        let min_eig = herm_eigen(sol.rho.matrix()).0[0];
        let ln = log_negativity(&to_physical_exact(&sol.rho, theta).unwrap()).unwrap();
        let ok = (score - p).abs() <= 1e-7 && min_eig >= -1e-8 && ln >= sol.s_n - sol.dual_gap;
        v.check(
            ok,
            format!(
                "theta={theta:.4} p={p:.4}: |score - p| {:.1e}, min eig {min_eig:.1e}, LN {ln:.6} vs s_n {:.6} (gap {:.1e})",
                (score - p).abs(),
                sol.s_n,
                sol.dual_gap
            ),
        );
    }
    v
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let mut v = Verdict::new(10, "CLI outputs are byte-reproducible");
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["bounds", "simulate", "certify", "compare", "witness"] {
        let runs: Vec<_> = ["a", "b"]
            .iter()
            .map(|tag| {
                let out = tmp.path().join(format!("{cmd}-{tag}"));
                let code = dew_cli::run_from_args(["dew", cmd, "--seed", "17", "--out", out.to_str().unwrap()]);
                (code, out)
            })
            .collect();
        let codes_ok = runs.iter().all(|(c, _)| *c == 0);
        let (a, b) = (dir_bytes(&runs[0].1), dir_bytes(&runs[1].1));
        let total: usize = a.iter().map(|f| f.1.len()).sum();
        v.check(codes_ok && a == b, format!("{cmd}: {} files, {total} bytes identical", a.len()));
    }
    v
}

fn main() {
    let ok = run_all(vec![
        classical_bounds_exact,
        no_false_positives,
        quantum_violation,
        pos_oracle,
        separable_states_respect_bound,
        sdp_sign_structure,
        family_evasion,
        witness_analysis,
        sdp_reconstruction,
        determinism,
    ]);
    if !ok {
        std::process::exit(1);
    }
}
