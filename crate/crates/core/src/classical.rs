//! Classical baselines: Monte-Carlo scoring of phase-space distributions,
//! a velocity-Verlet integrator for the coupled oscillators, and a quadrature
//! oracle for the `pos(X)` matrix elements.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal_modes::{normal_coordinates, physical_coordinates, NormalModeSpec};
use crate::precession::{ProtocolSpec, ScoreEstimate, Sigma, SlotCounts};

/// Phase-space point `(x1, p1, x2, p2)`.
pub type PhasePoint = [f64; 4];

type Sampler = dyn Fn(&mut ChaCha8Rng) -> PhasePoint + Send + Sync;

/// Rounds per RNG substream. Fixed so results do not depend on the thread count.
const CHUNK_ROUNDS: u64 = 8192;

#[derive(Clone)]
pub struct ClassicalDistribution {
    descriptor: String,
    sampler: Arc<Sampler>,
}

impl fmt::Debug for ClassicalDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassicalDistribution").field("descriptor", &self.descriptor).finish()
    }
}

impl ClassicalDistribution {
    pub fn new<F>(descriptor: impl Into<String>, sampler: F) -> Self
    where
        F: Fn(&mut ChaCha8Rng) -> PhasePoint + Send + Sync + 'static,
    {
        Self { descriptor: descriptor.into(), sampler: Arc::new(sampler) }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> PhasePoint {
        (self.sampler)(rng)
    }
}

/// Serializable description of the bundled distribution families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionConfig {
    /// Independent normal coordinates.
    Gaussian { mean: PhasePoint, std: PhasePoint },
    /// Positions on a noisy circle in the `(x1, x2)` plane, Gaussian momenta.
    Ring { radius: f64, width: f64, momentum_std: f64 },
    PointMass { point: PhasePoint },
    /// Two isotropic Gaussian lobes; `weight` is the probability of lobe `a`.
    Bimodal { a: PhasePoint, b: PhasePoint, std: f64, weight: f64 },
    UniformBox { lo: PhasePoint, hi: PhasePoint },
}

impl DistributionConfig {
    pub fn label(&self) -> String {
        match self {
            DistributionConfig::Gaussian { mean, std } => format!("gaussian(mean={mean:?},std={std:?})"),
            DistributionConfig::Ring { radius, width, momentum_std } => {
                format!("ring(radius={radius},width={width},momentum_std={momentum_std})")
            }
            DistributionConfig::PointMass { point } => format!("point_mass({point:?})"),
            DistributionConfig::Bimodal { a, b, std, weight } => {
                format!("bimodal(a={a:?},b={b:?},std={std},weight={weight})")
            }
            DistributionConfig::UniformBox { lo, hi } => format!("uniform_box(lo={lo:?},hi={hi:?})"),
        }
    }

    pub fn build(&self) -> Result<ClassicalDistribution> {
        let label = self.label();
        let finite = |p: &PhasePoint| p.iter().all(|v| v.is_finite());
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("{label}: {msg}")));
        match self.clone() {
            DistributionConfig::Gaussian { mean, std } => {
                if !finite(&mean) || std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return bad("mean must be finite and std nonnegative");
                }
                Ok(ClassicalDistribution::new(label, move |rng| {
                    std::array::from_fn(|i| {
                        let z: f64 = StandardNormal.sample(rng);
                        mean[i] + std[i] * z
                    })
                }))
            }
            DistributionConfig::Ring { radius, width, momentum_std } => {
                if ![radius, width, momentum_std].iter().all(|v| v.is_finite() && *v >= 0.0) {
                    return bad("radius, width and momentum_std must be nonnegative");
                }
                Ok(ClassicalDistribution::new(label, move |rng| {
                    let phi = rng.random::<f64>() * 2.0 * PI;
                    let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
                    let r = radius + width * z[0];
                    [r * phi.cos(), momentum_std * z[1], r * phi.sin(), momentum_std * z[2]]
                }))
            }
            DistributionConfig::PointMass { point } => {
                if !finite(&point) {
                    return bad("point must be finite");
                }
                Ok(ClassicalDistribution::new(label, move |_| point))
            }
            DistributionConfig::Bimodal { a, b, std, weight } => {
                if !finite(&a) || !finite(&b) || !(std.is_finite() && std >= 0.0) || !(0.0..=1.0).contains(&weight) {
                    return bad("lobes must be finite, std nonnegative, weight in [0, 1]");
                }
                let noise = Normal::new(0.0, std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Ok(ClassicalDistribution::new(label, move |rng| {
                    let centre = if rng.random::<f64>() < weight { a } else { b };
                    std::array::from_fn(|i| centre[i] + noise.sample(rng))
                }))
            }
            DistributionConfig::UniformBox { lo, hi } => {
                if !finite(&lo) || !finite(&hi) || lo.iter().zip(&hi).any(|(l, h)| l > h) {
                    return bad("need finite bounds with lo <= hi");
                }
                Ok(ClassicalDistribution::new(label, move |rng| {
                    std::array::from_fn(|i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>())
                }))
            }
        }
    }
}

/// Position of the followed normal mode at precession phase `phase`, in position units.
fn precessed_position(point: &PhasePoint, spec: &NormalModeSpec, sigma: Sigma, phase: f64) -> f64 {
    let (xp, pp, xm, pm) = normal_coordinates(point[0], point[1], point[2], point[3], spec);
    let (x, p) = match sigma {
        Sigma::Plus => (xp, pp),
        Sigma::Minus => (xm, pm),
    };
    let p_scaled = p / (spec.mu * spec.omega(sigma));
    x * phase.cos() + p_scaled * phase.sin()
}

fn tally(counts: &mut SlotCounts, value: f64) {
    if value > 0.0 {
        counts.positive += 1;
    } else if value < 0.0 {
        counts.negative += 1;
    } else {
        counts.zero += 1;
    }
}

/// Monte-Carlo estimate of the protocol score for a classical ensemble.
///
/// Each round draws one phase-space point and one measurement slot uniformly at
/// random. Rounds are grouped in fixed-size chunks, each with its own ChaCha
/// stream derived from `seed`, so the result is independent of scheduling.
pub fn simulate_classical_score(
    dist: &ClassicalDistribution,
    spec: &NormalModeSpec,
    protocol: &ProtocolSpec,
    n_rounds: u64,
    seed: u64,
) -> Result<ScoreEstimate> {
    if n_rounds == 0 {
        return Err(Error::InvalidParameter("n_rounds must be at least 1".into()));
    }
    let phases = protocol.phases();
    let k = protocol.k;
    let n_chunks = n_rounds.div_ceil(CHUNK_ROUNDS);
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let rounds = CHUNK_ROUNDS.min(n_rounds - chunk * CHUNK_ROUNDS);
            let mut local = vec![SlotCounts::default(); k];
            for _ in 0..rounds {
                let point = dist.sample(&mut rng);
                let slot = rng.random_range(0..k);
                tally(&mut local[slot], precessed_position(&point, spec, protocol.sigma, phases[slot]));
            }
            local
        })
        .reduce(
            || vec![SlotCounts::default(); k],
            |mut acc, part| {
                for (a, p) in acc.iter_mut().zip(&part) {
                    a.merge(p);
                }
                acc
            },
        );
    Ok(ScoreEstimate::from_counts(counts))
}

/// Exact score of a single phase-space point: the fraction of slots with a
/// positive outcome, zeros at half weight.
pub fn point_score(point: &PhasePoint, spec: &NormalModeSpec, protocol: &ProtocolSpec) -> f64 {
    let mut counts = SlotCounts::default();
    for phase in protocol.phases() {
        tally(&mut counts, precessed_position(point, spec, protocol.sigma, phase));
    }
    counts.fraction()
}

/// One JSON line per Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub descriptor: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub theta: f64,
    pub seed: u64,
    pub n_rounds: u64,
    pub p_value: f64,
    pub stderr: f64,
    pub counts: Vec<SlotCounts>,
}

impl SimulationRecord {
    pub fn new(dist: &ClassicalDistribution, spec: &NormalModeSpec, protocol: &ProtocolSpec, n_rounds: u64, seed: u64, est: ScoreEstimate) -> Self {
        Self {
            descriptor: dist.descriptor().to_string(),
            k: protocol.k,
            theta: spec.theta_raw,
            seed,
            n_rounds,
            p_value: est.p_value,
            stderr: est.stderr,
            counts: est.counts,
        }
    }
}

fn forces(x1: f64, x2: f64, spec: &NormalModeSpec) -> (f64, f64) {
    let k = spec.stiffness();
    (-(k[(0, 0)] * x1 + k[(0, 1)] * x2), -(k[(1, 0)] * x1 + k[(1, 1)] * x2))
}

/// Velocity-Verlet integration up to time `t` with steps no longer than `dt`.
pub fn integrate_trajectory(start: PhasePoint, spec: &NormalModeSpec, t: f64, dt: f64) -> Result<PhasePoint> {
    let limit = 0.1 / spec.omega_plus;
    if !(dt > 0.0) || dt >= limit {
        return Err(Error::UnstableStep { dt, limit });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("integration time must be nonnegative, got {t}")));
    }
    let steps = (t / dt).ceil().max(1.0) as u64;
    let h = t / steps as f64;
    let [mut x1, mut p1, mut x2, mut p2] = start;
    let (mut f1, mut f2) = forces(x1, x2, spec);
    for _ in 0..steps {
        p1 += 0.5 * h * f1;
        p2 += 0.5 * h * f2;
        x1 += h * p1 / spec.m1;
        x2 += h * p2 / spec.m2;
        (f1, f2) = forces(x1, x2, spec);
        p1 += 0.5 * h * f1;
        p2 += 0.5 * h * f2;
    }
    Ok([x1, p1, x2, p2])
}

/// Closed-form evolution: each normal mode rotates in its own phase plane.
pub fn exact_trajectory(start: PhasePoint, spec: &NormalModeSpec, t: f64) -> PhasePoint {
    let (xp, pp, xm, pm) = normal_coordinates(start[0], start[1], start[2], start[3], spec);
    let evolve = |x: f64, p: f64, w: f64| {
        let (s, c) = (w * t).sin_cos();
        let scale = spec.mu * w;
        (x * c + p / scale * s, -x * scale * s + p * c)
    };
    let (xp, pp) = evolve(xp, pp, spec.omega_plus);
    let (xm, pm) = evolve(xm, pm, spec.omega_minus);
    let (x1, p1, x2, p2) = physical_coordinates(xp, pp, xm, pm, spec);
    [x1, p1, x2, p2]
}

/// Normalized Hermite function `psi_n(x)` via the stable three-term recursion.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for j in 0..n {
        let next = (2.0 / (j + 1) as f64).sqrt() * x * cur - (j as f64 / (j + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate with the embedded 7-point Gauss difference.
fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        kron += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gauss_kronrod(f, a, b);
    if err <= tol || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// `int_0^inf psi_m(x) psi_n(x) dx` by adaptive Gauss-Kronrod quadrature.
pub fn hermite_overlap_quadrature(m: usize, n: usize) -> f64 {
    // Beyond the classical turning point the product decays like exp(-x^2).
    let upper = (2.0 * m.max(n) as f64 + 1.0).sqrt() + 12.0;
    let pieces = (upper * 2.0).ceil() as usize;
    let width = upper / pieces as f64;
    let f = |x: f64| hermite_function(m, x) * hermite_function(n, x);
    let tol = 1e-14 / pieces as f64;
    (0..pieces).map(|i| adaptive(&f, i as f64 * width, (i + 1) as f64 * width, tol, 30)).sum()
}
