//! Ensemble-averaged decoherence on top of the ideal model.
//!
//! Two mechanisms are covered:
//!
//! * spectral diffusion: a static Gaussian detuning `Δω ~ N(0, δγ)` per
//!   sequence adds a phase `Δω·Δt` to the Ramsey fringe, damping its
//!   contrast by `e^{−δ²(γΔt)²/2}`;
//! * nuclear (Overhauser) field: the resident electron spin precesses about
//!   a static random field between two repetitions of the sequence, which
//!   reduces the self-homodyne visibility by `|𝒞_{τ_p}|`.
//!
//! Every Monte Carlo estimate uses the per-sample streams of [`crate::rng`]
//! and is therefore independent of the worker count.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, RamseyConfig};
use crate::error::{invalid, Error, Result};
use crate::field::VisibilityTrace;
use crate::rng::{ensemble_mean, Estimate};
use crate::roots;

/// Minimum ensemble size accepted by the Monte Carlo estimators.
pub const MIN_SAMPLES: u64 = 100;

/// How an ensemble average is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    ClosedForm,
    MonteCarlo { n_samples: u64, seed: u64 },
}

impl Averaging {
    fn validate(&self) -> Result<()> {
        if let Averaging::MonteCarlo { n_samples, .. } = *self {
            if n_samples < MIN_SAMPLES {
                return Err(invalid(
                    "n_samples",
                    format!("{n_samples} is below the minimum of {MIN_SAMPLES}"),
                ));
            }
        }
        Ok(())
    }
}

fn closed(value: f64) -> Estimate {
    Estimate {
        mean: value,
        std_error: 0.0,
        n: 0,
    }
}

/// Gaussian spectral wandering of the emitter frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiffusionSpec {
    /// Width of the detuning distribution in units of `γ`.
    pub delta: f64,
    pub averaging: Averaging,
}

impl SpectralDiffusionSpec {
    pub fn new(delta: f64, averaging: Averaging) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(invalid("delta", format!("{delta} must be finite and >= 0")));
        }
        averaging.validate()?;
        Ok(Self { delta, averaging })
    }
}

/// Contrast damping `e^{−δ²(γΔt)²/2}`.
pub fn diffusion_damping(delta: f64, gamma_dt: f64) -> f64 {
    (-0.5 * (delta * gamma_dt).powi(2)).exp()
}

/// Monte Carlo estimate of `⟨cos(Δω·Δt)⟩`, the damping factor itself.
pub fn diffusion_damping_mc(delta: f64, gamma_dt: f64, n_samples: u64, seed: u64) -> Estimate {
    ensemble_mean(n_samples, seed, |rng, _| {
        let z: f64 = rng.sample(StandardNormal);
        (delta * gamma_dt * z).cos()
    })
}

/// `⟨Δp⟩ = 1/2 − p_e⁻ + e^{−δ²Δt²/2} σ₋⁻ cos φ_R`, or its Monte Carlo
/// counterpart averaging `cos(φ_R + Δω·Δt)` over sampled detunings.
pub fn absorption_with_diffusion(cfg: &RamseyConfig, spec: &SpectralDiffusionSpec) -> Result<Estimate> {
    spec.averaging.validate()?;
    let base = 0.5 - analytics::pe_minus(cfg);
    let sigma = analytics::sigma_minus(cfg);
    let x = cfg.gamma_dt();
    Ok(match spec.averaging {
        Averaging::ClosedForm => closed(base + diffusion_damping(spec.delta, x) * sigma * cfg.phi_r.cos()),
        Averaging::MonteCarlo { n_samples, seed } => {
            let delta = spec.delta;
            let phi = cfg.phi_r;
            ensemble_mean(n_samples, seed, |rng, _| {
                let z: f64 = rng.sample(StandardNormal);
                base + sigma * (phi + delta * x * z).cos()
            })
        }
    })
}

/// Delay `γΔt` of maximal absorption at `φ_R = 0` under spectral diffusion.
///
/// The absorption rises from `Δp(0) = 1/2`; its first stationary point is
/// the global maximum. It is located by scanning `d⟨Δp⟩/d(γΔt)`
/// geometrically for the first sign change and bisecting.
pub fn peak_shift_with_diffusion(delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(invalid("delta", format!("{delta} must be finite and >= 0")));
    }
    let d2 = delta * delta;
    // ⟨Δp⟩(x) = 1/2 − e^{−x}/2 + e^{−x/2 − δ²x²/2}/2
    let slope = |x: f64| 0.5 * (-x).exp() - 0.5 * (0.5 + d2 * x) * (-0.5 * x - 0.5 * d2 * x * x).exp();
    let mut lo = 0.0;
    let mut hi = 1e-12;
    while hi < 200.0 {
        if slope(hi) <= 0.0 {
            return roots::bisect(slope, lo, hi, 1e-15);
        }
        lo = hi;
        hi *= 1.1;
    }
    Err(Error::Bracket(format!("no absorption maximum found for δ = {delta}")))
}

/// One static configuration of the effective nuclear field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverhauserSample {
    /// Precession frequency `Ω ≥ 0`.
    pub omega: f64,
    /// Polar angle from the growth axis.
    pub theta: f64,
    /// Azimuth in `[0, 2π)`.
    pub phi: f64,
}

impl OverhauserSample {
    /// Field from Cartesian components (already in frequency units).
    pub fn from_components(x: f64, y: f64, z: f64) -> Self {
        let omega = (x * x + y * y + z * z).sqrt();
        let theta = if omega > 0.0 { (z / omega).clamp(-1.0, 1.0).acos() } else { 0.0 };
        Self {
            omega,
            theta,
            phi: y.atan2(x).rem_euclid(TAU),
        }
    }

    /// `C_t = cos(Ωt/2) − i cos θ sin(Ωt/2)`, `S_t = sin θ e^{−iφ} sin(Ωt/2)`.
    pub fn coefficients(&self, t: f64) -> (Complex64, Complex64) {
        let (s, c) = (self.omega * t / 2.0).sin_cos();
        (
            Complex64::new(c, -self.theta.cos() * s),
            Complex64::from_polar(self.theta.sin() * s, -self.phi),
        )
    }

    /// `⟨s_z⟩_t = |C_t|² − |S_t|²` for a spin starting in `|↑⟩`.
    pub fn polarization_up(&self, t: f64) -> f64 {
        let (c, s) = self.coefficients(t);
        c.norm_sqr() - s.norm_sqr()
    }

    /// Same for `|↓⟩`, evolving into `C_t*|↓⟩ + S_t*|↑⟩`.
    pub fn polarization_down(&self, t: f64) -> f64 {
        let (c, s) = self.coefficients(t);
        s.conj().norm_sqr() - c.conj().norm_sqr()
    }
}

/// Draws an isotropic Gaussian field with per-component standard deviation `w`.
pub fn sample_overhauser<R: Rng + ?Sized>(w: f64, rng: &mut R) -> OverhauserSample {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    OverhauserSample::from_components(w * x, w * y, w * z)
}

/// Parameters of the spin-decoherence model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinModelSpec {
    /// Spin decoherence rate (standard deviation of each field component).
    pub w: f64,
    /// Repetition period between the two interfering wavepackets.
    pub tau_p: f64,
    /// Emission probability per sequence.
    pub p: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl SpinModelSpec {
    pub fn new(w: f64, tau_p: f64, p: f64, n_samples: u64, seed: u64) -> Result<Self> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(invalid("w", format!("{w} must be finite and >= 0")));
        }
        if !(tau_p.is_finite() && tau_p >= 0.0) {
            return Err(invalid("tau_p", format!("{tau_p} must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("{p} outside [0, 1]")));
        }
        if n_samples < 1 {
            return Err(invalid("n_samples", "must be >= 1"));
        }
        Ok(Self {
            w,
            tau_p,
            p,
            n_samples,
            seed,
        })
    }
}

/// Ensemble-averaged spin polarization
/// `𝒞_t = (1 + 2 e^{−w²t²/2}(1 − w²t²))/3`.
pub fn spin_correlation_closed(w: f64, t: f64) -> f64 {
    let u = (w * t).powi(2);
    (1.0 + 2.0 * (-u / 2.0).exp() * (1.0 - u)) / 3.0
}

/// Monte Carlo average of `|C_t|² − |S_t|²` over sampled fields.
pub fn spin_correlation_mc(spec: &SpinModelSpec, t: f64) -> Result<Estimate> {
    if spec.n_samples < MIN_SAMPLES {
        return Err(invalid(
            "n_samples",
            format!("{} is below the minimum of {MIN_SAMPLES}", spec.n_samples),
        ));
    }
    let w = spec.w;
    Ok(ensemble_mean(spec.n_samples, spec.seed, |rng, _| {
        sample_overhauser(w, rng).polarization_up(t)
    }))
}

/// Visibility of the self-homodyne fringes with spin decoherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinVisibility {
    /// Visibility for a spin starting in `|↑⟩`.
    pub visibility: Estimate,
    /// Same quantity for a spin starting in `|↓⟩`.
    pub down_branch: f64,
}

/// `v̄ = |𝒞_{τ_p}|(1 − p)`.
///
/// In Monte Carlo mode each sampled field yields the cross term
/// `⟨b†_{V,1} b_{V,2}⟩ = (|C|² − |S|²)(p/2)(1 − p)`; the counts
/// `μ₃,₄ = p ± 2 Re(e^{−iφ}X)` are formed from the ensemble-averaged cross
/// term `X` and the visibility is maximized over the interferometer phase.
pub fn spin_homodyne_visibility(spec: &SpinModelSpec, averaging: Averaging) -> Result<SpinVisibility> {
    if spec.p <= 0.0 {
        return Err(Error::Degenerate("no emission (p = 0): visibility undefined".into()));
    }
    averaging.validate()?;
    let p = spec.p;
    match averaging {
        Averaging::ClosedForm => {
            let v = spin_correlation_closed(spec.w, spec.tau_p).abs() * (1.0 - p);
            Ok(SpinVisibility {
                visibility: closed(v),
                down_branch: v,
            })
        }
        Averaging::MonteCarlo { n_samples, seed } => {
            let (w, tau) = (spec.w, spec.tau_p);
            let scale = p / 2.0 * (1.0 - p);
            let up = ensemble_mean(n_samples, seed, |rng, _| {
                sample_overhauser(w, rng).polarization_up(tau) * scale
            });
            let down = ensemble_mean(n_samples, seed, |rng, _| {
                sample_overhauser(w, rng).polarization_down(tau) * scale
            });
            let visibility = |cross: f64| {
                // the cross term is real: the optimum phase is 0 or π
                let phase = if cross >= 0.0 { 0.0 } else { std::f64::consts::PI };
                let re = (Complex64::from_polar(1.0, -phase) * cross).re;
                let (mu3, mu4) = (p + 2.0 * re, p - 2.0 * re);
                (mu3 - mu4).abs() / (mu3 + mu4)
            };
            Ok(SpinVisibility {
                visibility: Estimate {
                    mean: visibility(up.mean),
                    std_error: 2.0 * up.std_error / p,
                    n: up.n,
                },
                down_branch: visibility(down.mean),
            })
        }
    }
}

/// Multiplies a visibility trace by `|𝒞_{τ_p}|`.
pub fn apply_spin_factor(trace: &VisibilityTrace, spec: &SpinModelSpec) -> VisibilityTrace {
    trace.scaled(spin_correlation_closed(spec.w, spec.tau_p).abs())
}

/// Spin decoherence rate recovered from a measured contrast reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferredLifetime {
    pub w: f64,
    /// `1/w` (infinite for `w = 0`).
    pub lifetime: f64,
    /// Set when the ratio sits within `1e-3` of the `1/3` edge of the branch.
    pub near_branch_limit: bool,
}

/// Solves `𝒞_{τ_p}(w) = ratio` on the branch `wτ_p ∈ [0, 1]`, where `𝒞`
/// falls monotonically from 1 to 1/3 and every ratio in `(1/3, 1]` has a
/// unique preimage.
pub fn infer_spin_lifetime(ratio: f64, tau_p: f64) -> Result<InferredLifetime> {
    if !(tau_p.is_finite() && tau_p > 0.0) {
        return Err(invalid("tau_p", format!("{tau_p} must be finite and > 0")));
    }
    if !(ratio > 1.0 / 3.0 && ratio <= 1.0) {
        return Err(invalid(
            "ratio",
            format!("{ratio} outside the invertible range (1/3, 1]"),
        ));
    }
    let wt = if ratio == 1.0 {
        0.0
    } else {
        roots::bisect(|s| spin_correlation_closed(s, 1.0) - ratio, 0.0, 1.0, 1e-15)?
    };
    let w = wt / tau_p;
    Ok(InferredLifetime {
        w,
        lifetime: if w == 0.0 { f64::INFINITY } else { 1.0 / w },
        near_branch_limit: ratio - 1.0 / 3.0 < 1e-3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{default_grid, plateau_ratio, visibility_trace};
    use crate::rng::sample_stream;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn spin(w: f64, tau_p: f64, p: f64, n: u64) -> SpinModelSpec {
        SpinModelSpec::new(w, tau_p, p, n, 2024).unwrap()
    }

    #[test]
    fn zero_width_diffusion_is_ideal() {
        let c = RamseyConfig::dimensionless(0.8, 0.4).unwrap();
        let s = SpectralDiffusionSpec::new(0.0, Averaging::ClosedForm).unwrap();
        assert_eq!(absorption_with_diffusion(&c, &s).unwrap().mean, analytics::absorption(&c));
        let s = SpectralDiffusionSpec::new(0.0, Averaging::MonteCarlo { n_samples: 500, seed: 3 }).unwrap();
        let e = absorption_with_diffusion(&c, &s).unwrap();
        assert_abs_diff_eq!(e.mean, analytics::absorption(&c), epsilon = 1e-14);
    }

    #[test]
    fn damping_value_at_reference_width() {
        assert_abs_diff_eq!(diffusion_damping(0.6, 1.0), (-0.18f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(diffusion_damping(0.6, 1.0), 0.83527, epsilon = 1e-5);
        let c = RamseyConfig::dimensionless(1.0, 0.0).unwrap();
        let s = SpectralDiffusionSpec::new(0.6, Averaging::ClosedForm).unwrap();
        let expected = 0.5 - analytics::pe_minus(&c) + 0.83527021141 * analytics::sigma_minus(&c);
        assert_abs_diff_eq!(absorption_with_diffusion(&c, &s).unwrap().mean, expected, epsilon = 1e-10);
    }

    #[test]
    fn diffusion_monte_carlo_converges() {
        let c = RamseyConfig::dimensionless(1.0, 0.3).unwrap();
        let mc = SpectralDiffusionSpec::new(0.6, Averaging::MonteCarlo { n_samples: 200_000, seed: 11 }).unwrap();
        let cf = SpectralDiffusionSpec::new(0.6, Averaging::ClosedForm).unwrap();
        let target = absorption_with_diffusion(&c, &cf).unwrap().mean;
        let e = absorption_with_diffusion(&c, &mc).unwrap();
        assert!(e.z_score(target) < 4.0, "{e:?} vs {target}");
        assert!(SpectralDiffusionSpec::new(0.6, Averaging::MonteCarlo { n_samples: 10, seed: 1 }).is_err());
        assert!(SpectralDiffusionSpec::new(-0.1, Averaging::ClosedForm).is_err());
    }

    #[test]
    fn peak_shift() {
        assert_abs_diff_eq!(peak_shift_with_diffusion(0.0).unwrap(), 2.0 * LN_2, epsilon = 1e-10);
        let shifted = peak_shift_with_diffusion(0.6).unwrap();
        assert!(shifted < 2.0 * LN_2);
        assert_abs_diff_eq!(shifted, 0.7323733437912717, epsilon = 1e-9);
        // strong diffusion: the peak approaches 1/(2δ²)
        let strong = peak_shift_with_diffusion(100.0).unwrap();
        assert!(strong < 1e-4 && strong > 0.0);
        assert!((strong * 2.0 * 1e4 - 1.0).abs() < 0.05);
        // shift is monotone in δ over the sampled widths
        let widths = [0.0, 0.2, 0.4, 0.6, 1.0, 2.0, 5.0];
        let peaks: Vec<f64> = widths.iter().map(|&d| peak_shift_with_diffusion(d).unwrap()).collect();
        assert!(peaks.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn overhauser_sampling_statistics() {
        let mut rng = sample_stream(5, 0);
        assert_eq!(sample_overhauser(0.0, &mut rng).omega, 0.0);

        let w = 0.7;
        let omega2 = ensemble_mean(200_000, 8, |rng, _| sample_overhauser(w, rng).omega.powi(2));
        assert!(omega2.z_score(3.0 * w * w) < 4.0, "{omega2:?}");
        let cos_theta = ensemble_mean(200_000, 8, |rng, _| sample_overhauser(w, rng).theta.cos());
        assert!(cos_theta.z_score(0.0) < 4.0);
    }

    #[test]
    fn precession_coefficients_are_normalized() {
        let s = OverhauserSample::from_components(0.3, -1.2, 0.5);
        for t in [0.0, 0.5, 3.0, 17.0] {
            let (c, sn) = s.coefficients(t);
            assert_abs_diff_eq!(c.norm_sqr() + sn.norm_sqr(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.polarization_up(t), -s.polarization_down(t), epsilon = 1e-15);
        }
    }

    #[test]
    fn closed_form_correlation_values() {
        assert_eq!(spin_correlation_closed(0.3, 0.0), 1.0);
        assert_abs_diff_eq!(spin_correlation_closed(1.0, 1e3), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spin_correlation_closed(0.5, 1.0), 0.77458, epsilon = 1e-5);
        assert_abs_diff_eq!(spin_correlation_closed(2f64.sqrt(), 1.0), 0.08808, epsilon = 1e-5);
        // stays positive; the minimum sits at wt = √3
        let min = (0..=100_000)
            .map(|i| spin_correlation_closed(i as f64 * 1e-4, 1.0))
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        assert_abs_diff_eq!(min, spin_correlation_closed(3f64.sqrt(), 1.0), epsilon = 1e-8);
        assert_abs_diff_eq!(min, (1.0 - 4.0 * (-1.5f64).exp()) / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn monte_carlo_correlation() {
        let e = spin_correlation_mc(&spin(0.0, 1.0, 0.5, 1000), 1.0).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
        let e = spin_correlation_mc(&spin(0.5, 1.0, 0.5, 200_000), 1.0).unwrap();
        assert!(e.z_score(spin_correlation_closed(0.5, 1.0)) < 4.0);
        assert!(spin_correlation_mc(&spin(0.5, 1.0, 0.5, 50), 1.0).is_err());
    }

    #[test]
    fn homodyne_visibility() {
        let v = spin_homodyne_visibility(&spin(0.0, 1.0, 0.3, 1000), Averaging::ClosedForm).unwrap();
        assert_abs_diff_eq!(v.visibility.mean, 0.7, epsilon = 1e-15);
        let v = spin_homodyne_visibility(&spin(0.5, 1.0, 0.5, 1000), Averaging::ClosedForm).unwrap();
        assert_abs_diff_eq!(v.visibility.mean, 0.38729, epsilon = 1e-5);
        let v = spin_homodyne_visibility(&spin(0.5, 1.0, 1.0, 1000), Averaging::ClosedForm).unwrap();
        assert_eq!(v.visibility.mean, 0.0);
        assert!(spin_homodyne_visibility(&spin(0.5, 1.0, 0.0, 1000), Averaging::ClosedForm).is_err());

        let spec = spin(0.5, 1.0, 0.5, 200_000);
        let mc = spin_homodyne_visibility(&spec, Averaging::MonteCarlo { n_samples: 200_000, seed: 4 }).unwrap();
        assert!(mc.visibility.z_score(0.387291) < 4.0);
        assert_abs_diff_eq!(mc.visibility.mean, mc.down_branch, epsilon = 1e-15);
    }

    #[test]
    fn spin_factor_preserves_plateau_ratio() {
        let c = RamseyConfig::dimensionless(1.42, 0.8).unwrap();
        let tr = visibility_trace(&c, &default_grid(&c), 0.0).unwrap();
        let identity = apply_spin_factor(&tr, &spin(0.0, 5.0, 0.5, 1));
        assert_eq!(identity, tr);
        let reduced = apply_spin_factor(&tr, &spin(0.5, 1.0, 0.5, 1));
        assert_abs_diff_eq!(reduced.v1, 0.38729, epsilon = 1e-5);
        assert_abs_diff_eq!(
            plateau_ratio(&reduced).unwrap(),
            plateau_ratio(&tr).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lifetime_inversion() {
        let r = infer_spin_lifetime(1.0, 12.5).unwrap();
        assert_eq!(r.w, 0.0);
        assert!(r.lifetime.is_infinite());
        let r = infer_spin_lifetime(0.7, 12.5).unwrap();
        assert_abs_diff_eq!(spin_correlation_closed(r.w, 12.5), 0.7, epsilon = 1e-8);
        assert!((r.lifetime - 25.0).abs() / 25.0 < 0.2);
        let r = infer_spin_lifetime(1.0 / 3.0 + 1e-6, 12.5).unwrap();
        assert!(r.near_branch_limit);
        assert!(infer_spin_lifetime(0.3, 12.5).is_err());
        assert!(infer_spin_lifetime(1.2, 12.5).is_err());
        // round trip on the branch
        for wt in [0.05, 0.3, 0.5, 0.9] {
            let back = infer_spin_lifetime(spin_correlation_closed(wt, 1.0), 2.0).unwrap();
            assert_abs_diff_eq!(back.w * 2.0, wt, epsilon = 1e-7);
        }
    }
}
