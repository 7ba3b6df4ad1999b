//! Seeded generation of the uncorrelated initial ensemble.
//!
//! Each Monte Carlo sample owns an independent ChaCha stream keyed by
//! [`derive_sample_seed`], so the ensemble does not depend on how samples
//! are scheduled across threads.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::ExtendedPoint;
use crate::model::ModelParams;
use crate::observables::QuantumMatrix2;

/// Phase-space density used for the harmonic mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BathDistribution {
    /// `exp(-(tanh(βω/2)/ω)·H_B)`.
    #[default]
    AsPrinted,
    /// Thermal Wigner function `exp(-(2 tanh(βω/2)/ω)·H_B)`.
    StandardWigner,
}

/// Variance of the initial thermostat momenta.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThermostatMomentumVariance {
    /// `μ_J · kT`.
    #[default]
    Thermal,
    /// Unit variance.
    Unit,
}

/// Initial state of the two-level system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialState {
    /// Lowest eigenvector of `-Δσz`, i.e. `|↑⟩`, expressed in the adiabatic
    /// basis at the sampled Q. Equals `diag(0, 1)` at Q = 0.
    #[default]
    DiabaticGround,
    /// `(|Φ1⟩ + |Φ2⟩)/√2`: both adiabatic states equally occupied.
    EqualSuperposition,
}

keyword_enum!(BathDistribution,
    BathDistribution::AsPrinted => "as_printed",
    BathDistribution::StandardWigner => "standard_wigner",
);

keyword_enum!(ThermostatMomentumVariance,
    ThermostatMomentumVariance::Thermal => "thermal",
    ThermostatMomentumVariance::Unit => "unit",
);

keyword_enum!(InitialState,
    InitialState::DiabaticGround => "diabatic_ground",
    InitialState::EqualSuperposition => "equal_superposition",
);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SamplingOptions {
    pub bath: BathDistribution,
    pub thermostat_momenta: ThermostatMomentumVariance,
    pub initial_state: InitialState,
}

/// One member of the initial ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialSample {
    pub point: ExtendedPoint,
    pub omega0: QuantumMatrix2,
    pub sample_index: usize,
}

/// `(Var Q, Var P)` of the bath density.
pub fn bath_variances(params: &ModelParams, bath: BathDistribution) -> (f64, f64) {
    let t = (0.5 * params.beta * params.omega).tanh();
    let scale = match bath {
        BathDistribution::AsPrinted => 1.0,
        BathDistribution::StandardWigner => 0.5,
    };
    (scale / (params.omega * t), scale * params.omega / t)
}

/// Draws `(Q, P)` from the Gaussian bath density.
pub fn sample_bath<R: Rng + ?Sized>(params: &ModelParams, bath: BathDistribution, rng: &mut R) -> (f64, f64) {
    let (var_q, var_p) = bath_variances(params, bath);
    let q: f64 = rng.sample(StandardNormal);
    let p: f64 = rng.sample(StandardNormal);
    (q * var_q.sqrt(), p * var_p.sqrt())
}

/// Draws `(Λ1, Λ2, Π1, Π2)`. Λ is always zero; everything is zero when the
/// thermostat is off.
pub fn sample_thermostat<R: Rng + ?Sized>(
    params: &ModelParams,
    variance: ThermostatMomentumVariance,
    rng: &mut R,
) -> (f64, f64, f64, f64) {
    if !params.nhc_enabled {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let (v1, v2) = match variance {
        ThermostatMomentumVariance::Thermal => (params.mu1 * params.temperature(), params.mu2 * params.temperature()),
        ThermostatMomentumVariance::Unit => (1.0, 1.0),
    };
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    (0.0, 0.0, z1 * v1.sqrt(), z2 * v2.sqrt())
}

/// Initial quantum matrix in the adiabatic basis at `q`.
pub fn initial_quantum_matrix(q: f64, params: &ModelParams, state: InitialState) -> QuantumMatrix2 {
    match state {
        InitialState::DiabaticGround => {
            // ⟨Φ1|↑⟩ = -sin(θ/2), ⟨Φ2|↑⟩ = cos(θ/2)
            let basis = params.adiabatic_basis(q);
            let amp = [basis[0][0], basis[0][1]];
            QuantumMatrix2::from_fn(|a, b| Complex64::new(amp[a] * amp[b], 0.0))
        }
        InitialState::EqualSuperposition => QuantumMatrix2::from_fn(|_, _| Complex64::new(0.5, 0.0)),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample seed. For a fixed master seed this is a bijection of the
/// sample index, so distinct samples never share a stream.
pub fn derive_sample_seed(master_seed: u64, sample_index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ sample_index)
}

pub fn sample_rng(master_seed: u64, sample_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_sample_seed(master_seed, sample_index))
}

/// Draws the complete initial condition of sample `sample_index`. The bath
/// point is drawn first, so it is shared by runs that differ only in mode.
pub fn draw_initial_sample(params: &ModelParams, options: &SamplingOptions, sample_index: usize) -> InitialSample {
    let mut rng = sample_rng(params.seed, sample_index as u64);
    let (q, p) = sample_bath(params, options.bath, &mut rng);
    let (lambda1, lambda2, pi1, pi2) = sample_thermostat(params, options.thermostat_momenta, &mut rng);
    InitialSample {
        point: ExtendedPoint {
            q,
            p,
            lambda1,
            lambda2,
            pi1,
            pi2,
        },
        omega0: initial_quantum_matrix(q, params, options.initial_state),
        sample_index,
    }
}
