//! Exact pure-state representation of a two-level emitter and the two time
//! bins it can emit into.
//!
//! The joint space is `atom ⊗ bin1 ⊗ bin2` with at most one photon per bin,
//! eight amplitudes in total. Basis index is `4·atom + 2·n1 + n2` with
//! `g = 0`, `e = 1`:
//!
//! | index | ket        |
//! |-------|------------|
//! | 0     | `|g,0,0⟩`  |
//! | 1     | `|g,0,1⟩`  |
//! | 2     | `|g,1,0⟩`  |
//! | 3     | `|g,1,1⟩`  |
//! | 4     | `|e,0,0⟩`  |
//! | 5     | `|e,0,1⟩`  |
//! | 6     | `|e,1,0⟩`  |
//! | 7     | `|e,1,1⟩`  |
//!
//! The one-photon ket of a bin is the normalized exponential wavepacket the
//! emitter radiates into that bin, with its amplitude taken real-positive at
//! emission.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{INPUT_TOL, ZERO_WEIGHT};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Atomic level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    Ground,
    Excited,
}

/// Time bin receiving the spontaneously emitted photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeBin {
    First,
    Second,
}

impl TimeBin {
    fn slot(self) -> usize {
        match self {
            TimeBin::First => 0,
            TimeBin::Second => 1,
        }
    }

    /// Bit of the basis index carrying this bin's photon number.
    fn mask(self) -> usize {
        match self {
            TimeBin::First => 2,
            TimeBin::Second => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.slot() as u8 + 1
    }
}

/// Basis index of `|atom, n1, n2⟩`.
pub fn basis_index(atom: Atom, n1: u8, n2: u8) -> usize {
    debug_assert!(n1 <= 1 && n2 <= 1);
    let a = match atom {
        Atom::Ground => 0,
        Atom::Excited => 1,
    };
    4 * a + 2 * n1 as usize + n2 as usize
}

/// Instantaneous classical pulse acting on the atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    area: f64,
    phase: f64,
}

impl PulseSpec {
    /// `area` in `[0, π]`, `phase` any finite angle (reduced to `[0, 2π)`).
    pub fn new(area: f64, phase: f64) -> Result<Self> {
        if !area.is_finite() || !(-INPUT_TOL..=PI + INPUT_TOL).contains(&area) {
            return Err(invalid("area", format!("{area} outside [0, π]")));
        }
        if !phase.is_finite() {
            return Err(invalid("phase", "must be finite"));
        }
        Ok(Self {
            area: area.clamp(0.0, PI),
            phase: phase.rem_euclid(TAU),
        })
    }

    pub fn half_pi(phase: f64) -> Result<Self> {
        Self::new(PI / 2.0, phase)
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Action on the atomic factor as `(e, g) -> (e', g')`.
    ///
    /// `|g⟩ → cos(A/2)|g⟩ + e^{iφ} sin(A/2)|e⟩` and
    /// `|e⟩ → cos(A/2)|e⟩ − e^{−iφ} sin(A/2)|g⟩`, i.e. a rotation by `A`
    /// about the equatorial axis `(−sin φ, −cos φ, 0)` with `|e⟩` as the
    /// north pole.
    pub(crate) fn rotate(&self, e: Complex64, g: Complex64) -> (Complex64, Complex64) {
        let (s, c) = (self.area / 2.0).sin_cos();
        let up = Complex64::from_polar(s, self.phase);
        let down = Complex64::from_polar(s, -self.phase);
        (c * e + up * g, c * g - down * e)
    }
}

/// Spontaneous decay at rate `gamma` for `duration`, emitting into `target_bin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySpec {
    gamma: f64,
    duration: f64,
    target_bin: TimeBin,
}

impl DecaySpec {
    /// `duration` may be `+∞` (complete decay).
    pub fn new(gamma: f64, duration: f64, target_bin: TimeBin) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("{gamma} must be finite and > 0")));
        }
        if duration.is_nan() || duration < 0.0 {
            return Err(invalid("duration", format!("{duration} must be >= 0")));
        }
        Ok(Self {
            gamma,
            duration,
            target_bin,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn target_bin(&self) -> TimeBin {
        self.target_bin
    }

    /// Dimensionless exposure `γ·duration`.
    pub fn exposure(&self) -> f64 {
        self.gamma * self.duration
    }
}

/// Joint emitter + two-bin photon state.
///
/// Besides the amplitudes, the state remembers how much decay (`γ·t`) each
/// bin has already collected, which fixes the wavepacket its one-photon ket
/// stands for. Repeated decays into the same bin therefore extend one
/// exponential wavepacket rather than introducing a second photon mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    amps: [Complex64; 8],
    exposure: [f64; 2],
}

impl JointState {
    /// `|g,0,0⟩`.
    pub fn ground() -> Self {
        let mut amps = [ZERO; 8];
        amps[0] = Complex64::new(1.0, 0.0);
        Self {
            amps,
            exposure: [0.0; 2],
        }
    }

    /// Builds a state from raw amplitudes in the documented basis order.
    /// Neither bin has emission history.
    pub fn from_amplitudes(amps: [Complex64; 8]) -> Result<Self> {
        let state = Self {
            amps,
            exposure: [0.0; 2],
        };
        state.check_normalized()?;
        Ok(state)
    }

    pub fn amplitudes(&self) -> &[Complex64; 8] {
        &self.amps
    }

    pub fn amplitude(&self, atom: Atom, n1: u8, n2: u8) -> Complex64 {
        self.amps[basis_index(atom, n1, n2)]
    }

    /// Accumulated `γ·t` emitted into `bin`.
    pub fn exposure(&self, bin: TimeBin) -> f64 {
        self.exposure[bin.slot()]
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let norm_sq = self.norm_sq();
        if (norm_sq - 1.0).abs() > INPUT_TOL || !norm_sq.is_finite() {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(())
    }

    /// `⟨a|b⟩`, ignoring emission history.
    pub fn inner(&self, other: &JointState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨a|b⟩|`; equals one iff the states agree up to a global phase.
    pub fn fidelity(&self, other: &JointState) -> f64 {
        self.inner(other).norm()
    }

    /// Largest `atom + n1 + n2` carried with non-zero weight.
    pub fn max_excitation(&self) -> u8 {
        (0..8)
            .filter(|&i| self.amps[i].norm_sqr() > ZERO_WEIGHT)
            .map(|i| ((i >> 2) & 1) as u8 + ((i >> 1) & 1) as u8 + (i & 1) as u8)
            .max()
            .unwrap_or(0)
    }

    pub fn apply_pulse(&self, pulse: &PulseSpec) -> Result<JointState> {
        self.check_normalized()?;
        let mut out = self.clone();
        for photons in 0..4 {
            let (e, g) = pulse.rotate(self.amps[4 + photons], self.amps[photons]);
            out.amps[4 + photons] = e;
            out.amps[photons] = g;
        }
        Ok(out)
    }

    /// Purified amplitude damping into `decay.target_bin()`:
    /// `α|e,0⟩ → α e^{−x/2}|e,0⟩ + α √(1−e^{−x})|g,1⟩` with `x = γ·duration`.
    ///
    /// If the bin already holds part of a wavepacket from an earlier decay,
    /// the new emission is folded into the same (longer) wavepacket.
    pub fn apply_decay(&self, decay: &DecaySpec) -> Result<JointState> {
        self.check_normalized()?;
        let bin = decay.target_bin();
        let mask = bin.mask();
        let prior = self.exposure[bin.slot()];

        for photons in (0..4).filter(|p| p & mask != 0) {
            if self.amps[4 + photons].norm_sqr() > ZERO_WEIGHT {
                return Err(Error::BinOccupied {
                    bin: bin.number(),
                    branch: "excited",
                });
            }
            if prior == 0.0 && self.amps[photons].norm_sqr() > ZERO_WEIGHT {
                return Err(Error::BinOccupied {
                    bin: bin.number(),
                    branch: "ground",
                });
            }
        }

        let added = decay.exposure();
        if added == 0.0 {
            return Ok(self.clone());
        }
        let kept = (-added / 2.0).exp();
        let emitted = (-(-added).exp_m1()).sqrt();

        // Weights of the old and new wavepacket pieces inside the extended one.
        let before = (-prior).exp();
        let total = -(-(prior + added)).exp_m1();
        let (w_old, w_new) = if prior == 0.0 {
            (0.0, 1.0)
        } else {
            (
                (-(-prior).exp_m1() / total).sqrt(),
                (before * -(-added).exp_m1() / total).sqrt(),
            )
        };

        let mut out = self.clone();
        for vac in (0..4).filter(|p| p & mask == 0) {
            let e = self.amps[4 + vac];
            let g1 = self.amps[vac | mask];
            out.amps[4 + vac] = e * kept;
            out.amps[vac | mask] = g1 * w_old + e * emitted * w_new;
        }
        out.exposure[bin.slot()] = prior + added;
        Ok(out)
    }

    /// `Σ |⟨e,n1,n2|ψ⟩|²`.
    pub fn excited_population(&self) -> f64 {
        self.amps[4..].iter().map(Complex64::norm_sqr).sum()
    }

    /// `⟨σ₋⟩ = Σ ⟨g,n|ψ⟩* ⟨e,n|ψ⟩` with `σ₋ = |g⟩⟨e|`.
    pub fn dipole(&self) -> Complex64 {
        (0..4).map(|n| self.amps[n].conj() * self.amps[4 + n]).sum()
    }

    /// Photonic states conditioned on the atomic level.
    pub fn pointer_states(&self) -> PointerStates {
        let pe = self.excited_population().clamp(0.0, 1.0);
        let pg = self.amps[..4].iter().map(Complex64::norm_sqr).sum::<f64>();
        let conditional = |offset: usize, weight: f64| {
            if weight <= ZERO_WEIGHT {
                return None;
            }
            let scale = 1.0 / weight.sqrt();
            let mut photons = [ZERO; 4];
            for (n, slot) in photons.iter_mut().enumerate() {
                *slot = self.amps[offset + n] * scale;
            }
            Some(photons)
        };
        PointerStates {
            excited: conditional(4, pe),
            ground: conditional(0, pg),
            pe,
            exposure: self.exposure,
        }
    }
}

/// Photonic amplitudes over `|n1, n2⟩`, index `2·n1 + n2`.
pub type PhotonState = [Complex64; 4];

/// Decomposition `|ψ⟩ = √p_e |e,φ_e⟩ + √(1−p_e) |g,φ_g⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerStates {
    /// `φ_e`, `None` when `p_e = 0`.
    pub excited: Option<PhotonState>,
    /// `φ_g`, `None` when `p_e = 1`.
    pub ground: Option<PhotonState>,
    pub pe: f64,
    exposure: [f64; 2],
}

impl PointerStates {
    pub fn is_degenerate(&self) -> bool {
        self.excited.is_none() || self.ground.is_none()
    }

    /// `w = ⟨φ_e|φ_g⟩`.
    pub fn overlap(&self) -> Result<Complex64> {
        let e = self
            .excited
            .ok_or(Error::DegenerateBranch { branch: "excited" })?;
        let g = self
            .ground
            .ok_or(Error::DegenerateBranch { branch: "ground" })?;
        Ok(e.iter().zip(&g).map(|(a, b)| a.conj() * b).sum())
    }

    /// Rebuilds the joint state; an undefined branch contributes nothing.
    pub fn reconstruct(&self) -> JointState {
        let mut amps = [ZERO; 8];
        if let Some(g) = self.ground {
            let s = (1.0 - self.pe).max(0.0).sqrt();
            for n in 0..4 {
                amps[n] = g[n] * s;
            }
        }
        if let Some(e) = self.excited {
            let s = self.pe.sqrt();
            for n in 0..4 {
                amps[4 + n] = e[n] * s;
            }
        }
        JointState {
            amps,
            exposure: self.exposure,
        }
    }
}

/// Norm of a photonic state.
pub fn photon_norm(state: &PhotonState) -> f64 {
    state.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}
