//! Time-resolved emitted field: amplitude `⟨b(t)⟩`, intensity `⟨b†b(t)⟩`,
//! unbalanced Mach-Zehnder counts and the self-homodyne visibility.
//!
//! Pulses are instantaneous. The first bin is `0 ≤ t < Δt`, the second
//! `t ≥ Δt` (the sample at `t = Δt` belongs to the second bin). Amplitudes
//! are in units of `√γ`, intensities in units of `γ`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, RamseyConfig};
use crate::error::{Error, Result};
use crate::state::{DecaySpec, JointState, PulseSpec, TimeBin};
use crate::ZERO_WEIGHT;

/// Number of samples in [`default_grid`].
pub const DEFAULT_SAMPLES: usize = 2001;

/// Intensity (in units of `γ`) below which visibility is left undefined.
pub const MIN_INTENSITY: f64 = 1e-15;

/// Which side of the bin boundary a limit is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `2001` uniform samples over `[0, Δt + 8/γ]`.
pub fn default_grid(cfg: &RamseyConfig) -> Vec<f64> {
    uniform_grid(0.0, cfg.delta_t + 8.0 / cfg.gamma, DEFAULT_SAMPLES)
}

pub fn uniform_grid(start: f64, end: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![start],
        n => {
            let h = (end - start) / (n - 1) as f64;
            (0..n).map(|i| start + h * i as f64).collect()
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite sample".into()));
    }
    if grid[0] < 0.0 {
        return Err(Error::InvalidGrid(format!("starts before the first pulse ({})", grid[0])));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("not strictly increasing at {} -> {}", w[0], w[1])));
    }
    Ok(())
}

fn in_second_bin(cfg: &RamseyConfig, t: f64, side: Side) -> bool {
    match side {
        Side::Right => t >= cfg.delta_t,
        Side::Left => t > cfg.delta_t,
    }
}

fn amplitude_on(cfg: &RamseyConfig, t: f64, side: Side) -> Complex64 {
    let g = cfg.gamma;
    if !in_second_bin(cfg, t, side) {
        return Complex64::new(g.sqrt() * (-g * t / 2.0).exp() / 2.0, 0.0);
    }
    let x = cfg.gamma_dt();
    let phi = cfg.phi_r;
    let half = (-x / 2.0).exp();
    let bracket = (Complex64::new(-(-x).exp_m1(), 0.0)
        + (1.0 - Complex64::from_polar(half, phi)) * (1.0 + Complex64::from_polar(half, -phi)))
        / 2.0;
    Complex64::from_polar(g.sqrt() * (-g * (t - cfg.delta_t) / 2.0).exp() / 2.0, phi) * bracket
}

fn intensity_on(cfg: &RamseyConfig, t: f64, side: Side) -> f64 {
    let g = cfg.gamma;
    if !in_second_bin(cfg, t, side) {
        return g * (-g * t).exp() / 2.0;
    }
    let x = cfg.gamma_dt();
    let bracket = (-(-x).exp_m1() + (1.0 + Complex64::from_polar((-x / 2.0).exp(), -cfg.phi_r)).norm_sqr()) / 2.0;
    g * (-g * (t - cfg.delta_t)).exp() / 2.0 * bracket
}

/// `⟨b(t)⟩` from the closed-form field state.
pub fn amplitude_at(cfg: &RamseyConfig, t: f64) -> Complex64 {
    amplitude_on(cfg, t, Side::Right)
}

/// `⟨b†b(t)⟩` from the closed-form field state.
pub fn intensity_at(cfg: &RamseyConfig, t: f64) -> f64 {
    intensity_on(cfg, t, Side::Right)
}

/// One-sided limits of amplitude and intensity at the bin boundary.
pub fn boundary_limit(cfg: &RamseyConfig, side: Side) -> (Complex64, f64) {
    (
        amplitude_on(cfg, cfg.delta_t, side),
        intensity_on(cfg, cfg.delta_t, side),
    )
}

/// Joint state at time `t` of the sequence (right-continuous at `Δt`).
pub fn state_at(cfg: &RamseyConfig, t: f64) -> Result<JointState> {
    let first = JointState::ground().apply_pulse(&PulseSpec::new(FRAC_PI_2, 0.0)?)?;
    if t < cfg.delta_t {
        return first.apply_decay(&DecaySpec::new(cfg.gamma, t, TimeBin::First)?);
    }
    first
        .apply_decay(&DecaySpec::new(cfg.gamma, cfg.delta_t, TimeBin::First)?)?
        .apply_pulse(&PulseSpec::new(FRAC_PI_2, cfg.phi_r)?)?
        .apply_decay(&DecaySpec::new(cfg.gamma, t - cfg.delta_t, TimeBin::Second)?)
}

/// Sampled amplitude and intensity profiles of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub grid: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub intensity: Vec<f64>,
    pub bin_boundary: f64,
    /// `(⟨b⟩, ⟨b†b⟩)` just before the boundary.
    pub boundary_left: (Complex64, f64),
    /// `(⟨b⟩, ⟨b†b⟩)` just after the boundary.
    pub boundary_right: (Complex64, f64),
}

impl TemporalProfile {
    /// Trapezoidal integral of the intensity, bin by bin, using the
    /// one-sided boundary limits so the jump at `Δt` is not smeared.
    pub fn photon_number(&self) -> f64 {
        let b = self.bin_boundary;
        let mut first: Vec<(f64, f64)> = Vec::new();
        let mut second: Vec<(f64, f64)> = Vec::new();
        for (&t, &i) in self.grid.iter().zip(&self.intensity) {
            if t < b {
                first.push((t, i));
            } else if t > b {
                second.push((t, i));
            }
        }
        let last = *self.grid.last().unwrap_or(&0.0);
        let first_start = self.grid.first().copied().unwrap_or(0.0);
        if !first.is_empty() && last >= b {
            first.push((b, self.boundary_left.1));
        }
        if last >= b && first_start <= b {
            second.insert(0, (b, self.boundary_right.1));
        }
        trapezoid(&first) + trapezoid(&second)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
        .sum()
}

fn build_profile(
    cfg: &RamseyConfig,
    grid: &[f64],
    amplitude: Vec<Complex64>,
    intensity: Vec<f64>,
) -> TemporalProfile {
    TemporalProfile {
        grid: grid.to_vec(),
        amplitude,
        intensity,
        bin_boundary: cfg.delta_t,
        boundary_left: boundary_limit(cfg, Side::Left),
        boundary_right: boundary_limit(cfg, Side::Right),
    }
}

/// `⟨b(t)⟩` sampled on `grid`.
pub fn amplitude_profile(cfg: &RamseyConfig, grid: &[f64]) -> Result<Vec<Complex64>> {
    validate_grid(grid)?;
    Ok(grid.iter().map(|&t| amplitude_at(cfg, t)).collect())
}

/// `⟨b†b(t)⟩` sampled on `grid`.
pub fn intensity_profile(cfg: &RamseyConfig, grid: &[f64]) -> Result<Vec<f64>> {
    validate_grid(grid)?;
    Ok(grid.iter().map(|&t| intensity_at(cfg, t)).collect())
}

/// Closed-form amplitude and intensity on `grid`.
pub fn profile(cfg: &RamseyConfig, grid: &[f64]) -> Result<TemporalProfile> {
    let amplitude = amplitude_profile(cfg, grid)?;
    let intensity = intensity_profile(cfg, grid)?;
    Ok(build_profile(cfg, grid, amplitude, intensity))
}

/// Same profile from state evolution and the input-output relations
/// `⟨b⟩ = √γ⟨σ₋⟩`, `⟨b†b⟩ = γ p_e`.
pub fn profile_from_state(cfg: &RamseyConfig, grid: &[f64]) -> Result<TemporalProfile> {
    validate_grid(grid)?;
    let mut amplitude = Vec::with_capacity(grid.len());
    let mut intensity = Vec::with_capacity(grid.len());
    for &t in grid {
        let s = state_at(cfg, t)?;
        amplitude.push(s.dipole() * cfg.gamma.sqrt());
        intensity.push(s.excited_population() * cfg.gamma);
    }
    Ok(build_profile(cfg, grid, amplitude, intensity))
}

/// Time-resolved photon numbers at the two outputs of the final beam splitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MziCounts {
    pub mu3: Vec<f64>,
    pub mu4: Vec<f64>,
}

/// `μ₃,₄ = ⟨b₁†b₁⟩ + ⟨b₂†b₂⟩ ± 2 Re(e^{−iφ} ⟨b₁⟩*⟨b₂⟩)` for two independent
/// input fields.
pub fn mzi_counts(a: &TemporalProfile, b: &TemporalProfile, phi_hom: f64) -> Result<MziCounts> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let phase = Complex64::from_polar(1.0, -phi_hom);
    let (mu3, mu4) = a
        .amplitude
        .iter()
        .zip(&b.amplitude)
        .zip(a.intensity.iter().zip(&b.intensity))
        .map(|((aa, ab), (ia, ib))| {
            let cross = 2.0 * (phase * aa.conj() * ab).re;
            (ia + ib + cross, ia + ib - cross)
        })
        .unzip();
    Ok(MziCounts { mu3, mu4 })
}

/// Self-homodyne visibility of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityTrace {
    pub grid: Vec<f64>,
    /// `|μ₃−μ₄|/(μ₃+μ₄)`, `None` where the intensity vanishes.
    pub v: Vec<Option<f64>>,
    pub v1: f64,
    /// `None` when the second bin receives no emission (`p_e⁺ = 0`).
    pub v2: Option<f64>,
    pub phi_hom: f64,
    pub bin_boundary: f64,
}

impl VisibilityTrace {
    /// Largest deviation from the plateau value within each bin.
    pub fn plateau_spread(&self) -> (f64, f64) {
        let mut first = 0.0f64;
        let mut second = 0.0f64;
        for (&t, v) in self.grid.iter().zip(&self.v) {
            let Some(v) = v else { continue };
            if t < self.bin_boundary {
                first = first.max((v - self.v1).abs());
            } else if let Some(v2) = self.v2 {
                second = second.max((v - v2).abs());
            }
        }
        (first, second)
    }

    /// Multiplies the whole trace by a constant contrast factor.
    pub fn scaled(&self, factor: f64) -> VisibilityTrace {
        VisibilityTrace {
            grid: self.grid.clone(),
            v: self.v.iter().map(|v| v.map(|v| v * factor)).collect(),
            v1: self.v1 * factor,
            v2: self.v2.map(|v| v * factor),
            phi_hom: self.phi_hom,
            bin_boundary: self.bin_boundary,
        }
    }
}

/// Second-plateau visibility `|⟨σ₋⟩⁺|²/p_e⁺ = |w⁺|²(1−p_e⁺)`.
pub fn second_plateau(cfg: &RamseyConfig) -> Option<f64> {
    let p = analytics::pe_plus(cfg);
    (p > ZERO_WEIGHT).then(|| analytics::sigma_plus(cfg).norm_sqr() / p)
}

/// Piecewise closed-form visibility `Θ(Δt−t)/2 + Θ(t−Δt)|w⁺|²(1−p_e⁺)`.
pub fn visibility_at(cfg: &RamseyConfig, t: f64) -> Option<f64> {
    if t < cfg.delta_t {
        Some(0.5)
    } else {
        second_plateau(cfg)
    }
}

/// Visibility from the Mach-Zehnder counts of two identical copies of the
/// emitted field, overlapped with interferometer phase `phi_hom`.
pub fn visibility_trace(cfg: &RamseyConfig, grid: &[f64], phi_hom: f64) -> Result<VisibilityTrace> {
    let p = profile(cfg, grid)?;
    let counts = mzi_counts(&p, &p, phi_hom)?;
    let threshold = MIN_INTENSITY * cfg.gamma;
    let v = p
        .intensity
        .iter()
        .zip(counts.mu3.iter().zip(&counts.mu4))
        .map(|(&i, (m3, m4))| (i > threshold).then(|| (m3 - m4).abs() / (m3 + m4)))
        .collect();
    let contrast = phi_hom.cos().abs();
    Ok(VisibilityTrace {
        grid: grid.to_vec(),
        v,
        v1: 0.5 * contrast,
        v2: second_plateau(cfg).map(|v| v * contrast),
        phi_hom,
        bin_boundary: cfg.delta_t,
    })
}

/// `v₂/v₁`, which equals `2|w⁺|²(1−p_e⁺)` in the ideal model.
pub fn plateau_ratio(trace: &VisibilityTrace) -> Result<f64> {
    if trace.v1 == 0.0 {
        return Err(Error::Degenerate("first plateau vanishes".into()));
    }
    let v2 = trace
        .v2
        .ok_or_else(|| Error::Degenerate("second plateau undefined".into()))?;
    Ok(v2 / trace.v1)
}

/// Inverts the plateau ratio for `|w⁺|` given `p_e⁺`.
pub fn w_plus_from_ratio(ratio: f64, pe_plus: f64) -> Result<f64> {
    if 1.0 - pe_plus <= ZERO_WEIGHT {
        return Err(Error::Degenerate("p_e⁺ = 1".into()));
    }
    Ok((ratio / (2.0 * (1.0 - pe_plus))).sqrt())
}
