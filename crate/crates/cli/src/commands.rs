//! The five subcommands. Each computes everything in memory and returns the
//! serialized files; the caller writes them.

use dew_core::classical::{simulate_classical_score, SimulationRecord};
use dew_core::fock::{log_negativity, BasisTag, FockOperator, TwoModeState};
use dew_core::linalg::CMatrix;
use dew_core::precession::{classical_bound, classical_bound_ratio, max_score, score_state, ProtocolSpec, Sigma};
use dew_core::rival::{
    abiuso_min_margin, duan_grid, duan_min_margin, family_state, hillery_zubairy_detects, moments, normalized,
    real_psi, zhang_detects, SupportMode,
};
use dew_core::sdp::{sweep, truncation_study, SdpSolution};
use dew_core::witness::{
    coherent_expectation_auto, coherent_expectation_closed_form, nondecomposability_check, optimality_probe,
    WitnessReport,
};
use dew_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{ScenarioConfig, StateSpec};
use crate::{CliError, CommandOutput};

/// Margin below which a criterion counts as detecting.
const DETECTION_TOL: f64 = 1e-9;

fn config_error(context: &str, e: Error) -> CliError {
    CliError::Config(format!("{context}: {e}"))
}

fn check_k(name: &str, k: usize) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Config(format!("{name}: K must be at least 1")));
    }
    Ok(())
}

fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct BoundsRow {
    #[serde(rename = "K")]
    k: usize,
    classical_num: u64,
    classical_den: u64,
    classical_bound: f64,
    n_max: usize,
    quantum_max: f64,
    excess: f64,
}

pub fn bounds(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let b = &cfg.bounds;
    let mut rows = Vec::with_capacity(b.k_values.len());
    for &k in &b.k_values {
        check_k("bounds", k)?;
        let (num, den) = classical_bound_ratio(k);
        let quantum = max_score(k, b.n_max).0;
        let classical = classical_bound(k);
        rows.push(BoundsRow {
            k,
            classical_num: num,
            classical_den: den,
            classical_bound: classical,
            n_max: b.n_max,
            quantum_max: quantum,
            excess: quantum - classical,
        });
    }
    Ok(CommandOutput {
        files: vec![("bounds.csv".into(), csv_bytes(&rows)?)],
        resolved: json!({}),
        diagnostics: json!({}),
        failure: None,
    })
}

#[derive(Serialize)]
struct SimulationLine {
    #[serde(flatten)]
    record: SimulationRecord,
    distribution: String,
    classical_bound: f64,
    /// `(p - bound) / stderr`; null when the estimate has no spread.
    excess_sigmas: Option<f64>,
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let s = &cfg.simulate;
    if s.rounds == 0 || s.repeats == 0 {
        return Err(CliError::Config("simulate: rounds and repeats must be at least 1".into()));
    }
    if s.distributions.is_empty() {
        return Err(CliError::Config("simulate: no distributions given".into()));
    }
    let spec = s.oscillators.build().map_err(|e| config_error("simulate.oscillators", e))?;
    let dists = s
        .distributions
        .iter()
        .map(|d| d.build().map_err(|e| config_error("simulate.distributions", e)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Vec::new();
    let mut run_index = 0u64;
    let mut worst = f64::NEG_INFINITY;
    for &k in &s.k_values {
        check_k("simulate", k)?;
        let protocol = ProtocolSpec::with_offset(k, s.t0, s.sigma).map_err(|e| config_error("simulate", e))?;
        let bound = classical_bound(k);
        for (config, dist) in s.distributions.iter().zip(&dists) {
            for _ in 0..s.repeats {
                let seed = cfg.seed.wrapping_add(run_index);
                run_index += 1;
                let est = simulate_classical_score(dist, &spec, &protocol, s.rounds, seed)?;
                let excess = (est.stderr > 0.0).then(|| (est.p_value - bound) / est.stderr);
                worst = worst.max(excess.unwrap_or(if est.p_value > bound { f64::INFINITY } else { f64::NEG_INFINITY }));
                let line = SimulationLine {
                    record: SimulationRecord::new(dist, &spec, &protocol, s.rounds, seed, est),
                    distribution: config.label(),
                    classical_bound: bound,
                    excess_sigmas: excess,
                };
                out.extend(serde_json::to_vec(&line).map_err(|e| CliError::Io(e.to_string()))?);
                out.push(b'\n');
            }
        }
    }
    Ok(CommandOutput {
        files: vec![("records.jsonl".into(), out)],
        resolved: json!({
            "theta": spec.theta_raw,
            "theta_folded": spec.theta,
            "omega_plus": spec.omega_plus,
            "omega_minus": spec.omega_minus,
            "runs": run_index,
        }),
        diagnostics: json!({ "max_excess_sigmas": if worst.is_finite() { Some(worst) } else { None } }),
        failure: None,
    })
}

fn error_code(e: &Error) -> &'static str {
    match e {
        Error::InfeasibleTarget { .. } => "infeasible_target",
        Error::NumericalFailure(_) => "numerical_failure",
        Error::InvalidParameter(_) => "invalid_parameter",
        _ => "error",
    }
}

#[derive(Serialize)]
struct SweepRow {
    n_max: usize,
    theta: f64,
    p_target: f64,
    status: &'static str,
    z: Option<f64>,
    z_lower: Option<f64>,
    s_n: Option<f64>,
    s_n_lower: Option<f64>,
    dual_gap: Option<f64>,
    iterations: Option<usize>,
    certified: bool,
    message: String,
}

impl SweepRow {
    fn new(n_max: usize, theta: f64, p_target: f64, outcome: &Result<SdpSolution, Error>) -> Self {
        match outcome {
            Ok(sol) => Self {
                n_max,
                theta,
                p_target,
                status: sol.status.label(),
                z: Some(sol.z),
                z_lower: Some(sol.z_lower),
                s_n: Some(sol.s_n),
                s_n_lower: Some(sol.s_n_lower),
                dual_gap: Some(sol.dual_gap),
                iterations: Some(sol.iterations),
                certified: sol.s_n - sol.dual_gap > 0.0,
                message: String::new(),
            },
            Err(e) => Self {
                n_max,
                theta,
                p_target,
                status: error_code(e),
                z: None,
                z_lower: None,
                s_n: None,
                s_n_lower: None,
                dual_gap: None,
                iterations: None,
                certified: false,
                message: e.to_string(),
            },
        }
    }
}

#[derive(Serialize)]
struct TimingRow {
    theta: f64,
    p_target: f64,
    wall_time_s: f64,
}

pub fn certify(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let c = &cfg.certify;
    check_k("certify", c.k)?;
    let thetas = match &c.oscillators {
        Some(osc) => vec![osc.build().map_err(|e| config_error("certify.oscillators", e))?.theta_raw],
        None => c.theta.resolve("certify.theta", None)?,
    };
    let p_max = max_score(c.k, c.n_max).0;
    let scores = c.scores.resolve("certify.scores", Some(p_max))?;

    let report = sweep(c.k, c.n_max, &thetas, &scores, cfg.tol);
    let rows: Vec<SweepRow> = report.cells.iter().map(|cell| SweepRow::new(c.n_max, cell.theta, cell.p_target, &cell.outcome)).collect();
    let mut files = vec![("sweep.csv".to_string(), csv_bytes(&rows)?)];

    let study = truncation_study(c.k, thetas[thetas.len() - 1], &c.truncation, cfg.tol);
    if !c.truncation.is_empty() {
        let trows: Vec<SweepRow> =
            study.iter().map(|r| SweepRow::new(r.n_max, thetas[thetas.len() - 1], r.p_target, &r.outcome)).collect();
        files.push(("truncation.csv".into(), csv_bytes(&trows)?));
    }
    if c.record_timings {
        let timings: Vec<TimingRow> = report
            .cells
            .iter()
            .filter_map(|cell| {
                let sol = cell.outcome.as_ref().ok()?;
                Some(TimingRow { theta: cell.theta, p_target: cell.p_target, wall_time_s: sol.wall_time_s })
            })
            .collect();
        files.push(("timings.csv".into(), csv_bytes(&timings)?));
    }

    let failed: Vec<&SweepRow> = rows.iter().filter(|r| r.s_n.is_none()).collect();
    let failure = report
        .cells
        .iter()
        .find_map(|cell| match &cell.outcome {
            Err(e @ Error::NumericalFailure(_)) => Some(CliError::Numerical(e.clone())),
            _ => None,
        })
        .or_else(|| {
            study.iter().find_map(|r| match &r.outcome {
                Err(e @ Error::NumericalFailure(_)) => Some(CliError::Numerical(e.clone())),
                _ => None,
            })
        });
    Ok(CommandOutput {
        files,
        resolved: json!({ "thetas": thetas, "scores": scores, "p_max": p_max }),
        diagnostics: json!({
            "cells": rows.len(),
            "failed_cells": failed.len(),
            "certified_cells": rows.iter().filter(|r| r.certified).count(),
            "max_dual_gap": rows.iter().filter_map(|r| r.dual_gap).fold(0.0, f64::max),
            "monotonicity_violations": report.violations,
        }),
        failure,
    })
}

#[derive(Serialize)]
struct CompareRow<'a> {
    state: &'a str,
    criterion: &'static str,
    /// Empty when the criterion does not apply to the state.
    detected: Option<bool>,
    margin: Option<f64>,
    note: String,
}

struct NamedState {
    label: String,
    normal: TwoModeState,
    physical: TwoModeState,
}

fn compare_states(cfg: &ScenarioConfig) -> Result<Vec<NamedState>, CliError> {
    let c = &cfg.compare;
    let mut states = Vec::new();
    let family = |label: &str, psi: &[_], support: SupportMode, n_max: usize| {
        family_state(psi, c.k, c.theta, n_max, support)
            .map(|f| NamedState { label: label.to_string(), normal: f.normal, physical: f.physical })
            .map_err(|e| config_error(&format!("compare.states[{label}]"), e))
    };
    if c.controls {
        states.push(NamedState {
            label: "vacuum".into(),
            normal: TwoModeState::vacuum(1, BasisTag::Normal),
            physical: TwoModeState::vacuum(1, BasisTag::Physical),
        });
        states.push(family("single_fock_1", &real_psi(&[0.0, 1.0]), SupportMode::Direct, 1)?);
    }
    for spec in &c.states {
        match spec {
            StateSpec::Psi { label, psi, support } => {
                if psi.is_empty() {
                    return Err(CliError::Config(format!("compare.states[{label}]: psi is empty")));
                }
                let levels = psi.len() - 1;
                let n_max = match support {
                    SupportMode::Direct => levels,
                    SupportMode::MultiplesOfK => levels * c.k,
                };
                states.push(family(label, &real_psi(psi), *support, n_max)?);
            }
            StateSpec::TopEigenvector { label, n_max } => {
                let (_, v) = max_score(c.k, *n_max);
                states.push(family(label, &normalized(&v), SupportMode::Direct, *n_max)?);
            }
        }
    }
    Ok(states)
}

pub fn compare(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let c = &cfg.compare;
    check_k("compare", c.k)?;
    if c.kappas.iter().chain(&c.sigmas).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CliError::Config("compare: kappas and sigmas must be positive".into()));
    }
    if c.kappas.is_empty() || c.sigmas.is_empty() {
        return Err(CliError::Config("compare: kappas and sigmas must be nonempty".into()));
    }
    let states = compare_states(cfg)?;
    let grid = duan_grid(c.duan_points);
    let bound = classical_bound(c.k);
    let mut rows = Vec::new();
    for st in &states {
        let m = moments(&st.physical)?;
        let label = st.label.as_str();
        let row = |criterion, detected, margin, note: String| CompareRow { state: label, criterion, detected, margin, note };

        let (duan, c_star) = duan_min_margin(&m, &grid);
        rows.push(row("duan", Some(duan < -DETECTION_TOL), Some(duan), format!("c={c_star}")));
        match zhang_detects(&m) {
            Ok(z) => rows.push(row(
                "zhang",
                Some(z.detected),
                Some(z.slack_squeezing.min(z.slack_exchange)),
                format!("slack_squeezing={} slack_exchange={}", z.slack_squeezing, z.slack_exchange),
            )),
            Err(e) => rows.push(row("zhang", None, None, e.to_string())),
        }
        let hz = hillery_zubairy_detects(&m);
        rows.push(row("hillery_zubairy", Some(hz.detected), Some(hz.slack), String::new()));
        let abiuso = abiuso_min_margin(&m, &c.kappas, &c.sigmas);
        rows.push(row("abiuso", Some(abiuso < -DETECTION_TOL), Some(abiuso), String::new()));
        let score = score_state(&st.normal, c.k, Sigma::Plus)?;
        rows.push(row("dew", Some(score - bound > DETECTION_TOL), Some(bound - score), format!("score={score}")));
        let ln = log_negativity(&st.physical)?;
        rows.push(row("log_negativity", Some(ln > DETECTION_TOL), Some(0.0 - ln), String::new()));
    }
    Ok(CommandOutput {
        files: vec![("compare.csv".into(), csv_bytes(&rows)?)],
        resolved: json!({ "states": states.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(), "duan_grid": grid }),
        diagnostics: json!({}),
        failure: None,
    })
}

#[derive(Serialize)]
struct ErfRow {
    r: f64,
    n_max: usize,
    numeric: f64,
    closed_form: f64,
    abs_error: f64,
}

#[derive(Serialize)]
struct ParentRow {
    parent_truncation: usize,
    min_eigenvalue: f64,
}

#[derive(Serialize)]
struct ProbeRow {
    epsilon: f64,
    n_max: usize,
    r_star: f64,
    crossing: f64,
    value: f64,
    closed_form_value: f64,
    verified: bool,
}

#[derive(Serialize)]
struct WitnessFile {
    report: WitnessReport,
    parent_scan: Vec<ParentRow>,
    sign_stable: bool,
    erf_check: Vec<ErfRow>,
    probe: ProbeRow,
}

pub fn witness(cfg: &ScenarioConfig) -> Result<CommandOutput, CliError> {
    let w = &cfg.witness;
    if w.k.is_multiple_of(2) {
        return Err(CliError::Config(format!("witness: K must be odd, got {}", w.k)));
    }
    if w.parents.is_empty() || w.parents.iter().any(|&p| p < w.proj_level) {
        return Err(CliError::Config("witness: parents must be nonempty and at least proj_level".into()));
    }
    if !(w.probe_epsilon > 0.0) {
        return Err(CliError::Config("witness: probe_epsilon must be positive".into()));
    }
    let mut erf_check = Vec::new();
    for &r in &w.radii {
        let (numeric, n_max) = coherent_expectation_auto(r)?;
        let closed_form = coherent_expectation_closed_form(r);
        erf_check.push(ErfRow { r, n_max, numeric, closed_form, abs_error: (numeric - closed_form).abs() });
    }
    let erf_max = erf_check.iter().map(|e| e.abs_error).fold(0.0, f64::max);

    let parent_scan = w
        .parents
        .iter()
        .map(|&p| Ok(ParentRow { parent_truncation: p, min_eigenvalue: nondecomposability_check(w.k, w.proj_level, p)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    let first_sign = parent_scan[0].min_eigenvalue < 0.0;
    let sign_stable = parent_scan.iter().all(|p| (p.min_eigenvalue < 0.0) == first_sign);
    let last = parent_scan.last().map(|p| (p.parent_truncation, p.min_eigenvalue)).expect("parents checked nonempty");

    let d = (w.probe_n_max + 1) * (w.probe_n_max + 1);
    let p = FockOperator::new(CMatrix::identity(d, d), w.probe_n_max, BasisTag::Physical)?;
    let res = optimality_probe(&p, w.probe_epsilon)?;
    let closed_form_value = (1.0 + w.probe_epsilon) * coherent_expectation_closed_form(res.r_star) - w.probe_epsilon;
    let probe = ProbeRow {
        epsilon: w.probe_epsilon,
        n_max: w.probe_n_max,
        r_star: res.r_star,
        crossing: res.crossing,
        value: res.value,
        closed_form_value,
        verified: res.value < 0.0 && closed_form_value < 0.0,
    };

    let file = WitnessFile {
        report: WitnessReport {
            k: w.k,
            proj_level: w.proj_level,
            min_eigenvalue: last.1,
            parent_truncation: last.0,
            erf_check_max_abs_error: erf_max,
        },
        parent_scan,
        sign_stable,
        erf_check,
        probe,
    };
    Ok(CommandOutput {
        files: vec![("witness.json".into(), json_bytes(&file)?)],
        resolved: json!({}),
        diagnostics: json!({ "erf_check_max_abs_error": erf_max, "min_eigenvalue_negative": last.1 < 0.0 }),
        failure: None,
    })
}
