//! Extended phase-space flow with a two-link Nosé-Hoover chain and the
//! jump-free short-time propagation of density-matrix elements.
//!
//! Equations of motion (one thermalized coordinate, g = 1):
//!
//! ```text
//! Q̇  = P                       Λ̇1 = Π1/μ1
//! Ṗ  = F - P·Π1/μ1             Λ̇2 = Π2/μ2
//! Π̇1 = P² - kT - Π1·Π2/μ2      Π̇2 = Π1²/μ1 - kT
//! ```
//!
//! with `F` the mean Hellmann-Feynman force of the propagated element.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{AdiabaticPair, ModelParams};

/// One point `(Q, P, Λ1, Λ2, Π1, Π2)` of the extended phase space.
///
/// Also used for time derivatives of such a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtendedPoint {
    pub q: f64,
    pub p: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub pi1: f64,
    pub pi2: f64,
}

impl ExtendedPoint {
    pub fn new(q: f64, p: f64) -> Self {
        ExtendedPoint {
            q,
            p,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.q, self.p, self.lambda1, self.lambda2, self.pi1, self.pi2]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        ExtendedPoint {
            q: a[0],
            p: a[1],
            lambda1: a[2],
            lambda2: a[3],
            pi1: a[4],
            pi2: a[5],
        }
    }
}

impl Add for ExtendedPoint {
    type Output = ExtendedPoint;

    fn add(self, rhs: ExtendedPoint) -> ExtendedPoint {
        let (a, b) = (self.to_array(), rhs.to_array());
        ExtendedPoint::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl Mul<f64> for ExtendedPoint {
    type Output = ExtendedPoint;

    fn mul(self, rhs: f64) -> ExtendedPoint {
        ExtendedPoint::from_array(self.to_array().map(|v| v * rhs))
    }
}

/// Time derivative of `x` under the extended flow, for a given mean force.
pub fn extended_vector_field(x: &ExtendedPoint, mean_force: f64, params: &ModelParams) -> ExtendedPoint {
    if !params.nhc_enabled {
        return ExtendedPoint {
            q: x.p,
            p: mean_force,
            ..Default::default()
        };
    }
    let kt = params.temperature();
    let xi1 = x.pi1 / params.mu1;
    let xi2 = x.pi2 / params.mu2;
    ExtendedPoint {
        q: x.p,
        p: mean_force - x.p * xi1,
        lambda1: xi1,
        lambda2: xi2,
        pi1: x.p * x.p - kt - x.pi1 * xi2,
        pi2: x.pi1 * xi1 - kt,
    }
}

/// Phase-space compressibility κ, the divergence of the extended flow:
/// `-Π1/μ1 - Π2/μ2`.
pub fn compressibility(x: &ExtendedPoint, params: &ModelParams) -> f64 {
    if !params.nhc_enabled {
        return 0.0;
    }
    -x.pi1 / params.mu1 - x.pi2 / params.mu2
}

/// Extended energy `P²/2 + E_mean(Q) + Σ Π²/2μ + kT(Λ1 + Λ2)`, conserved by
/// the exact flow.
pub fn conserved_energy(x: &ExtendedPoint, pair: AdiabaticPair, params: &ModelParams) -> f64 {
    let physical = 0.5 * x.p * x.p + params.mean_energy(x.q, pair);
    if !params.nhc_enabled {
        return physical;
    }
    physical
        + 0.5 * x.pi1 * x.pi1 / params.mu1
        + 0.5 * x.pi2 * x.pi2 / params.mu2
        + params.temperature() * (x.lambda1 + x.lambda2)
}

/// What the weight update needs from one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMidpoint {
    /// Q at the centre of the drift.
    pub q: f64,
    /// `-∫κ dt` over the step, equal to `ΔΛ1 + ΔΛ2`.
    pub log_compressibility: f64,
}

/// Propagator of `ẏ = g - a·y` over `t` with `g`, `a` frozen:
/// `y(t) = decay·y + t·phi·g` with `decay = e^{-at}`, `phi = (1 - e^{-at})/(at)`.
#[derive(Clone, Copy)]
struct Relaxation {
    decay: f64,
    t_phi: f64,
}

impl Relaxation {
    fn new(a: f64, t: f64) -> Self {
        let x = a * t;
        let decay = (-x).exp();
        let phi = if x.abs() < 1e-2 {
            // truncation below 1e-16
            1.0 - x / 2.0 * (1.0 - x / 3.0 * (1.0 - x / 4.0 * (1.0 - x / 5.0 * (1.0 - x / 6.0))))
        } else {
            (1.0 - decay) / x
        };
        Relaxation { decay, t_phi: t * phi }
    }

    fn apply(self, y: f64, g: f64) -> f64 {
        self.decay * y + self.t_phi * g
    }
}

/// Inner steps of the thermostat sub-flow per half step. The chain
/// momenta evolve much faster than the mode at high temperature.
const THERMOSTAT_SUBSTEPS: usize = 4;

/// Fourth-order Suzuki-Yoshida weights.
const YOSHIDA: [f64; 3] = [
    1.351_207_191_959_657_6,
    -1.702_414_383_919_315_3,
    1.351_207_191_959_657_6,
];

/// Constants of the chain, hoisted out of the inner stages.
#[derive(Clone, Copy)]
struct Chain {
    kt: f64,
    inv_mu1: f64,
    inv_mu2: f64,
}

/// One symmetric thermostat stage Π2(dt/2) Π1(dt/2) [P, Λ](dt) Π1(dt/2)
/// Π2(dt/2). Each piece is integrated exactly. Returns `ΔΛ1 + ΔΛ2`.
fn thermostat_stage(x: &mut ExtendedPoint, c: Chain, dt: f64) -> f64 {
    let half = 0.5 * dt;
    x.pi2 += (x.pi1 * x.pi1 * c.inv_mu1 - c.kt) * half;
    // Π2 is frozen until the end of the stage, so both Π1 pieces share it
    let relax = Relaxation::new(x.pi2 * c.inv_mu2, half);
    x.pi1 = relax.apply(x.pi1, x.p * x.p - c.kt);
    let d1 = x.pi1 * c.inv_mu1 * dt;
    let d2 = x.pi2 * c.inv_mu2 * dt;
    x.p *= (-d1).exp();
    x.lambda1 += d1;
    x.lambda2 += d2;
    x.pi1 = relax.apply(x.pi1, x.p * x.p - c.kt);
    x.pi2 += (x.pi1 * x.pi1 * c.inv_mu1 - c.kt) * half;
    d1 + d2
}

/// Thermostat sub-flow (P scaling, Λ and chain momenta) over `dt`,
/// composed from Suzuki-Yoshida stages. Returns `ΔΛ1 + ΔΛ2`.
fn thermostat_flow(x: &mut ExtendedPoint, params: &ModelParams, dt: f64) -> f64 {
    let chain = Chain {
        kt: params.temperature(),
        inv_mu1: 1.0 / params.mu1,
        inv_mu2: 1.0 / params.mu2,
    };
    let h = dt / THERMOSTAT_SUBSTEPS as f64;
    let mut dlambda = 0.0;
    for _ in 0..THERMOSTAT_SUBSTEPS {
        for w in YOSHIDA {
            dlambda += thermostat_stage(x, chain, w * h);
        }
    }
    dlambda
}

/// Advances `x` by `dt` (of either sign) and reports what the weight
/// update needs.
///
/// Splitting: thermostat(dt/2), kick(dt/2), drift(dt), kick(dt/2),
/// thermostat(dt/2). Without the thermostat this is plain velocity Verlet.
pub fn step_by(
    x: &ExtendedPoint,
    pair: AdiabaticPair,
    params: &ModelParams,
    dt: f64,
) -> (ExtendedPoint, StepMidpoint) {
    let mut y = *x;
    let mut dlambda = 0.0;
    if params.nhc_enabled {
        dlambda += thermostat_flow(&mut y, params, 0.5 * dt);
    }
    y.p += 0.5 * dt * params.mean_force(y.q, pair);
    let q_mid = y.q + 0.5 * dt * y.p;
    y.q += dt * y.p;
    y.p += 0.5 * dt * params.mean_force(y.q, pair);
    if params.nhc_enabled {
        dlambda += thermostat_flow(&mut y, params, 0.5 * dt);
    }
    (
        y,
        StepMidpoint {
            q: q_mid,
            log_compressibility: dlambda,
        },
    )
}

/// One integrator step of length `params.tau`.
pub fn step(x: &ExtendedPoint, pair: AdiabaticPair, params: &ModelParams) -> Result<ExtendedPoint> {
    let (y, _) = step_by(x, pair, params, params.tau);
    if !y.is_finite() {
        return Err(Error::NonFiniteState { steps: 1 });
    }
    Ok(y)
}

/// Phase and decay factor `exp(-(iω_αα′(Q) + γ_αα′)τ)` of one step.
pub fn quantum_increment(q_mid: f64, pair: AdiabaticPair, params: &ModelParams) -> Complex64 {
    let rate = Complex64::new(params.decay_rate(pair), params.bohr_frequency(q_mid, pair));
    (-rate * params.tau).exp()
}

/// Midpoint-rule log compressibility factor of one step, `-κ(x_mid)·τ`.
pub fn compressibility_exponent(x_mid: &ExtendedPoint, params: &ModelParams) -> f64 {
    -compressibility(x_mid, params) * params.tau
}

/// Full one-step weight factor `exp(-(iω_αα′ + γ_αα′ + κ)τ)` evaluated at
/// the step midpoint.
pub fn weight_increment(x_mid: &ExtendedPoint, pair: AdiabaticPair, params: &ModelParams) -> Complex64 {
    quantum_increment(x_mid.q, pair, params) * compressibility_exponent(x_mid, params).exp()
}

/// Snapshot of one density-matrix element along its trajectory.
///
/// The accumulated weight is stored factorized: `amplitude` carries phase and
/// decay, `log_compressibility` the integrated `-∫κ dt`. Ensemble averages
/// over initially sampled points use `amplitude` alone, because the
/// phase-space volume carried by the trajectory grows as `exp(∫κ dt)` and
/// cancels the compressibility factor exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementTrajectory {
    pub pair: AdiabaticPair,
    pub point: ExtendedPoint,
    pub amplitude: Complex64,
    pub log_compressibility: f64,
    pub elapsed: f64,
}

impl ElementTrajectory {
    pub fn start(x0: ExtendedPoint, pair: AdiabaticPair) -> Self {
        ElementTrajectory {
            pair,
            point: x0,
            amplitude: Complex64::new(1.0, 0.0),
            log_compressibility: 0.0,
            elapsed: 0.0,
        }
    }

    /// Accumulated weight `exp(-∫(iω + γ + κ) dt)`.
    pub fn weight(&self) -> Complex64 {
        self.amplitude * self.log_compressibility.exp()
    }

    /// Weight times the phase-space volume factor `exp(∫κ dt)`.
    pub fn volume_weighted(&self) -> Complex64 {
        self.amplitude
    }
}

/// Propagates one element for `params.n_step` steps from `x0`, recording a
/// snapshot every `record_stride` steps (t = 0 included).
pub fn propagate_element(
    x0: &ExtendedPoint,
    pair: AdiabaticPair,
    params: &ModelParams,
    record_stride: usize,
) -> Result<Vec<ElementTrajectory>> {
    assert!(record_stride >= 1, "record_stride must be >= 1");
    if !x0.is_finite() {
        return Err(Error::NonFiniteState { steps: 0 });
    }
    let mut state = ElementTrajectory::start(*x0, pair);
    let mut out = Vec::with_capacity(params.n_step / record_stride + 2);
    out.push(state);
    for n in 1..=params.n_step {
        let (next, mid) = step_by(&state.point, pair, params, params.tau);
        if !next.is_finite() {
            return Err(Error::NonFiniteState { steps: n });
        }
        state.amplitude *= quantum_increment(mid.q, pair, params);
        state.log_compressibility += mid.log_compressibility;
        state.point = next;
        state.elapsed = n as f64 * params.tau;
        if n % record_stride == 0 || n == params.n_step {
            out.push(state);
        }
    }
    Ok(out)
}
