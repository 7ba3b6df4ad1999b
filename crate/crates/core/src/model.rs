//! Two-level junction coupled linearly to one harmonic mode.
//!
//! The quantum part is `-Δσz - cQσx` on top of the bath potential `ω²Q²/2`.
//! Everything is expressed in the adiabatic basis of that 2×2 problem, which
//! is solved in closed form through the mixing angle `θ(Q) = atan(cQ/Δ)`.
//!
//! Index convention: adiabatic state 1 is the upper surface (the one drained
//! by the sink), state 2 the lower surface.

use std::fmt;

use crate::error::{Error, Result};

/// Physical and numerical constants of a run. All quantities are
/// dimensionless (ħ = k_B = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Two-level splitting Δ.
    pub delta: f64,
    /// Harmonic mode frequency ω.
    pub omega: f64,
    /// Linear system-bath coupling c.
    pub coupling: f64,
    /// Sink strength γ.
    pub gamma: f64,
    /// Inverse temperature β.
    pub beta: f64,
    /// Thermostat inertias.
    pub mu1: f64,
    pub mu2: f64,
    /// Time step τ.
    pub tau: f64,
    pub n_step: usize,
    pub n_mcs: usize,
    pub seed: u64,
    pub nhc_enabled: bool,
    pub decay_enabled: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            delta: 1.0,
            omega: 1.0 / 3.0,
            coupling: 0.007,
            gamma: 0.1,
            beta: 0.005,
            mu1: 1.0,
            mu2: 1.0,
            tau: 0.005,
            n_step: 10_000,
            n_mcs: 2500,
            seed: 42,
            nhc_enabled: true,
            decay_enabled: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("omega", self.omega),
            ("beta", self.beta),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("tau", self.tau),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(key, "must be > 0"));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::config("gamma", "must be >= 0"));
        }
        if !self.coupling.is_finite() {
            return Err(Error::config("coupling", "must be finite"));
        }
        if self.n_step < 1 {
            return Err(Error::config("n_step", "must be >= 1"));
        }
        if self.n_mcs < 1 {
            return Err(Error::config("n_mcs", "must be >= 1"));
        }
        Ok(())
    }

    /// k_B T with k_B = 1.
    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// Total propagated time `n_step · τ`.
    pub fn duration(&self) -> f64 {
        self.n_step as f64 * self.tau
    }

    /// Q-dependent part of the adiabatic Hamiltonian in the diabatic basis
    /// `(|↑⟩, |↓⟩)`: `-Δσz - cQσx + (ω²Q²/2)·1`.
    pub fn diabatic_hamiltonian(&self, q: f64) -> [[f64; 2]; 2] {
        let v = self.bath_potential(q);
        let off = -self.coupling * q;
        [[-self.delta + v, off], [off, self.delta + v]]
    }

    pub fn bath_potential(&self, q: f64) -> f64 {
        0.5 * self.omega * self.omega * q * q
    }

    /// Half gap `sqrt(Δ² + c²Q²)`.
    fn half_gap(&self, q: f64) -> f64 {
        self.delta.hypot(self.coupling * q)
    }

    /// `(E_lower, E_upper)`, ascending.
    pub fn adiabatic_energies(&self, q: f64) -> (f64, f64) {
        let v = self.bath_potential(q);
        let r = self.half_gap(q);
        (v - r, v + r)
    }

    pub fn energy(&self, q: f64, state: AdiabaticState) -> f64 {
        let (lower, upper) = self.adiabatic_energies(q);
        match state {
            AdiabaticState::Upper => upper,
            AdiabaticState::Lower => lower,
        }
    }

    /// Mixing angle θ with `tan θ = cQ/Δ`, in `(-π/2, π/2)`.
    pub fn mixing_angle(&self, q: f64) -> f64 {
        (self.coupling * q).atan2(self.delta)
    }

    /// Real orthogonal eigenbasis as columns `[Φ1, Φ2]` in diabatic
    /// components: `basis[i][α]` is component `i` of state `α`.
    ///
    /// `Φ1 = (-sin θ/2, cos θ/2)` (upper), `Φ2 = (cos θ/2, sin θ/2)` (lower).
    /// Both are continuous in Q and reduce to `|↓⟩`, `|↑⟩` at Q = 0.
    pub fn adiabatic_basis(&self, q: f64) -> [[f64; 2]; 2] {
        let (s, c) = (0.5 * self.mixing_angle(q)).sin_cos();
        [[-s, c], [c, s]]
    }

    /// Hellmann-Feynman force `-∂E_α/∂Q`.
    pub fn force(&self, q: f64, state: AdiabaticState) -> f64 {
        let harmonic = -self.omega * self.omega * q;
        let split = self.coupling * self.coupling * q / self.half_gap(q);
        match state {
            AdiabaticState::Upper => harmonic - split,
            AdiabaticState::Lower => harmonic + split,
        }
    }

    /// Force driving the trajectory of a density-matrix element: the average
    /// of the two surface forces.
    pub fn mean_force(&self, q: f64, pair: AdiabaticPair) -> f64 {
        if pair.is_diagonal() {
            self.force(q, pair.alpha)
        } else {
            0.5 * (self.force(q, pair.alpha) + self.force(q, pair.alpha_prime))
        }
    }

    /// Energy surface that generates [`Self::mean_force`].
    pub fn mean_energy(&self, q: f64, pair: AdiabaticPair) -> f64 {
        if pair.is_diagonal() {
            self.energy(q, pair.alpha)
        } else {
            0.5 * (self.energy(q, pair.alpha) + self.energy(q, pair.alpha_prime))
        }
    }

    /// `C_12 = ⟨Φ1|∂_Q Φ2⟩ = cΔ / (2(Δ² + c²Q²))`. `C_21 = -C_12`.
    pub fn coupling_vector(&self, q: f64) -> f64 {
        let cq = self.coupling * q;
        self.coupling * self.delta / (2.0 * (self.delta * self.delta + cq * cq))
    }

    /// Nonadiabatic coupling `⟨Φ_α|∂_Q Φ_β⟩` for any pair.
    pub fn coupling_element(&self, q: f64, pair: AdiabaticPair) -> f64 {
        match (pair.alpha, pair.alpha_prime) {
            (AdiabaticState::Upper, AdiabaticState::Lower) => self.coupling_vector(q),
            (AdiabaticState::Lower, AdiabaticState::Upper) => -self.coupling_vector(q),
            _ => 0.0,
        }
    }

    /// Momentum change `S_αβ = (E_α - E_β)·C_αβ / (P·C_αβ)` associated with a
    /// transition between surfaces α and β. In one dimension this is
    /// `(E_α - E_β)/P`; the full expression is kept so that a vanishing
    /// coupling is reported instead of silently cancelled.
    pub fn momentum_shift(&self, q: f64, p: f64, pair: AdiabaticPair) -> Result<f64> {
        let c = self.coupling_element(q, pair);
        let projected = p * c;
        if pair.is_diagonal() || projected == 0.0 || !projected.is_finite() {
            return Err(Error::DegenerateJump {
                momentum: p,
                coupling: c,
            });
        }
        let gap = self.energy(q, pair.alpha) - self.energy(q, pair.alpha_prime);
        Ok(gap * c / projected)
    }

    /// Bohr frequency `ω_αα′ = E_α - E_α′`.
    pub fn bohr_frequency(&self, q: f64, pair: AdiabaticPair) -> f64 {
        if pair.is_diagonal() {
            return 0.0;
        }
        self.energy(q, pair.alpha) - self.energy(q, pair.alpha_prime)
    }

    /// Diagonal of the decay operator `Γ = (γ/2)·diag(1, 0)`.
    pub fn decay_diagonal(&self, state: AdiabaticState) -> f64 {
        if !self.decay_enabled {
            return 0.0;
        }
        match state {
            AdiabaticState::Upper => 0.5 * self.gamma,
            AdiabaticState::Lower => 0.0,
        }
    }

    /// `γ_αα′ = Γ_αα + Γ_α′α′`.
    pub fn decay_rate(&self, pair: AdiabaticPair) -> f64 {
        self.decay_diagonal(pair.alpha) + self.decay_diagonal(pair.alpha_prime)
    }

    /// Diabatic `σz` expressed in the adiabatic basis at `q`:
    /// `[[-cos θ, -sin θ], [-sin θ, cos θ]]`.
    pub fn sigma_z_adiabatic(&self, q: f64) -> [[f64; 2]; 2] {
        let (s, c) = self.mixing_angle(q).sin_cos();
        [[-c, -s], [-s, c]]
    }
}

/// Adiabatic state label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdiabaticState {
    /// Index 1, upper surface, coupled to the sink.
    Upper,
    /// Index 2, lower surface.
    Lower,
}

impl AdiabaticState {
    pub fn index(self) -> usize {
        match self {
            AdiabaticState::Upper => 1,
            AdiabaticState::Lower => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            1 => Some(AdiabaticState::Upper),
            2 => Some(AdiabaticState::Lower),
            _ => None,
        }
    }
}

/// Index pair (α, α′) of a density-matrix element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AdiabaticPair {
    pub alpha: AdiabaticState,
    pub alpha_prime: AdiabaticState,
}

impl AdiabaticPair {
    pub const UPPER: AdiabaticPair = AdiabaticPair {
        alpha: AdiabaticState::Upper,
        alpha_prime: AdiabaticState::Upper,
    };
    pub const LOWER: AdiabaticPair = AdiabaticPair {
        alpha: AdiabaticState::Lower,
        alpha_prime: AdiabaticState::Lower,
    };
    /// The (1, 2) coherence; (2, 1) is its complex conjugate.
    pub const COHERENCE: AdiabaticPair = AdiabaticPair {
        alpha: AdiabaticState::Upper,
        alpha_prime: AdiabaticState::Lower,
    };

    pub fn new(alpha: usize, alpha_prime: usize) -> Option<Self> {
        Some(AdiabaticPair {
            alpha: AdiabaticState::from_index(alpha)?,
            alpha_prime: AdiabaticState::from_index(alpha_prime)?,
        })
    }

    pub fn is_diagonal(self) -> bool {
        self.alpha == self.alpha_prime
    }

    pub fn transposed(self) -> Self {
        AdiabaticPair {
            alpha: self.alpha_prime,
            alpha_prime: self.alpha,
        }
    }
}

impl fmt::Display for AdiabaticPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.alpha.index(), self.alpha_prime.index())
    }
}
