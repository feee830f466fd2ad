//! Closed-form observables of the two-pulse Ramsey sequence.
//!
//! The first pulse (area π/2, phase 0) prepares `(|e⟩+|g⟩)/√2`, the emitter
//! then decays into the first time bin for `Δt`, and the second pulse (area
//! π/2, phase `φ_R`) follows. Superscript `−`/`+` quantities refer to the
//! instants just before and just after the second pulse.
//!
//! Every closed form here has a counterpart obtained by evolving a
//! [`JointState`]; [`full_report`] evaluates both.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::roots;
use crate::state::{DecaySpec, JointState, PulseSpec, TimeBin};
use crate::{GAMMA_INVERSE_PS, TAU_P_SPIN_NS, ZERO_WEIGHT};

/// Physical parameters of one Ramsey sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyConfig {
    /// Spontaneous decay rate.
    pub gamma: f64,
    /// Delay between the two π/2 pulses.
    pub delta_t: f64,
    /// Relative phase of the second pulse (radians).
    pub phi_r: f64,
    /// Repetition period of the whole sequence.
    pub tau_p: f64,
}

impl RamseyConfig {
    pub fn new(gamma: f64, delta_t: f64, phi_r: f64, tau_p: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("{gamma} must be finite and > 0")));
        }
        if !(delta_t.is_finite() && delta_t >= 0.0) {
            return Err(invalid("delta_t", format!("{delta_t} must be finite and >= 0")));
        }
        if !phi_r.is_finite() {
            return Err(invalid("phi_r", "must be finite"));
        }
        if tau_p.is_nan() || tau_p <= delta_t {
            return Err(invalid(
                "tau_p",
                format!("repetition period {tau_p} must exceed the pulse delay {delta_t}"),
            ));
        }
        Ok(Self {
            gamma,
            delta_t,
            phi_r,
            tau_p,
        })
    }

    /// Config in units of `1/γ` (so `γ = 1`), with the repetition period of
    /// the spin-decoherence estimate expressed in those units, or a longer
    /// one if the delay requires it.
    pub fn dimensionless(gamma_dt: f64, phi_r: f64) -> Result<Self> {
        let tau_p = default_tau_p().max(2.0 * gamma_dt + 1.0);
        Self::new(1.0, gamma_dt, phi_r, tau_p)
    }

    /// `γΔt`.
    pub fn gamma_dt(&self) -> f64 {
        self.gamma * self.delta_t
    }
}

/// Repetition period `τ_p = 12.5 ns` in units of the `202.4 ps` lifetime.
pub fn default_tau_p() -> f64 {
    TAU_P_SPIN_NS * 1e3 / GAMMA_INVERSE_PS
}

/// `p_e⁻ = e^{−γΔt}/2`.
pub fn pe_minus(cfg: &RamseyConfig) -> f64 {
    0.5 * (-cfg.gamma_dt()).exp()
}

/// `w⁻ = 1/√(2(1−p_e⁻))`, the overlap of the first-bin pointer states.
pub fn w_minus(cfg: &RamseyConfig) -> f64 {
    1.0 / (2.0 * (1.0 - pe_minus(cfg))).sqrt()
}

/// `σ₋⁻ = w⁻ √(p_e⁻(1−p_e⁻))`, the (real) dipole before the second pulse.
pub fn sigma_minus(cfg: &RamseyConfig) -> f64 {
    let p = pe_minus(cfg);
    w_minus(cfg) * (p * (1.0 - p)).sqrt()
}

/// Population change during the second pulse,
/// `Δp = 1/2 − p_e⁻ + σ₋⁻ cos φ_R`.
pub fn absorption(cfg: &RamseyConfig) -> f64 {
    0.5 - pe_minus(cfg) + sigma_minus(cfg) * cfg.phi_r.cos()
}

/// Absorption with the which-path information switched off (`w⁻ = 1`).
pub fn absorption_without_which_path(cfg: &RamseyConfig) -> f64 {
    let p = pe_minus(cfg);
    0.5 - p + (p * (1.0 - p)).sqrt() * cfg.phi_r.cos()
}

/// `p_e⁺ = (1 + e^{−γΔt/2} cos φ_R)/2`.
pub fn pe_plus(cfg: &RamseyConfig) -> f64 {
    0.5 * (1.0 + (-cfg.gamma_dt() / 2.0).exp() * cfg.phi_r.cos())
}

/// `⟨σ₋⟩` just after the second pulse,
/// `e^{iφ_R}(1 − e^{−γΔt} − i e^{−γΔt/2} sin φ_R)/2`.
pub fn sigma_plus(cfg: &RamseyConfig) -> Complex64 {
    let x = cfg.gamma_dt();
    let bracket = Complex64::new(-(-x).exp_m1(), -(-x / 2.0).exp() * cfg.phi_r.sin());
    Complex64::from_polar(0.5, cfg.phi_r) * bracket
}

fn check_nondegenerate(p: f64, what: &str) -> Result<()> {
    if p <= ZERO_WEIGHT || 1.0 - p <= ZERO_WEIGHT {
        return Err(Error::Degenerate(format!("{what} = {p} leaves a pointer state undefined")));
    }
    Ok(())
}

/// `w⁺ = ⟨φ_e⁺|φ_g⁺⟩
///     = e^{−iφ_R}(1 − e^{−γΔt} + i e^{−γΔt/2} sin φ_R) / (2√(p_e⁺(1−p_e⁺)))`.
pub fn w_plus(cfg: &RamseyConfig) -> Result<Complex64> {
    let p = pe_plus(cfg);
    check_nondegenerate(p, "p_e⁺")?;
    let x = cfg.gamma_dt();
    let numerator = Complex64::new(-(-x).exp_m1(), (-x / 2.0).exp() * cfg.phi_r.sin());
    Ok(Complex64::from_polar(1.0, -cfg.phi_r) * numerator / (2.0 * (p * (1.0 - p)).sqrt()))
}

/// Residual `|LHS − RHS|` of
/// `p_e⁺(1−p_e⁺)|w⁺|² = (1/2 − p_e⁻)² + p_e⁻(1−p_e⁻)(w⁻)² sin²φ_R`.
pub fn check_eq7(cfg: &RamseyConfig) -> Result<f64> {
    let (lhs, rhs) = eq7_sides(cfg)?;
    Ok((lhs - rhs).abs())
}

/// Both sides of the before/after overlap relation (see [`check_eq7`]).
pub fn eq7_sides(cfg: &RamseyConfig) -> Result<(f64, f64)> {
    let pp = pe_plus(cfg);
    let lhs = pp * (1.0 - pp) * w_plus(cfg)?.norm_sqr();
    let pm = pe_minus(cfg);
    let wm = w_minus(cfg);
    let rhs = (0.5 - pm).powi(2) + pm * (1.0 - pm) * wm * wm * cfg.phi_r.sin().powi(2);
    Ok((lhs, rhs))
}

/// `|w⁺|` from the before/after relation with `p_e⁻` and `w⁻` treated as
/// independent inputs, `p_e⁺ = 1/2 + √(p_e⁻(1−p_e⁻)) w⁻ cos φ_R`.
pub fn w_plus_from_relation(pe_minus: f64, w_minus: f64, phi_r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pe_minus) {
        return Err(invalid("pe_minus", format!("{pe_minus} outside [0, 1]")));
    }
    let coherence = (pe_minus * (1.0 - pe_minus)).sqrt() * w_minus;
    let pp = 0.5 + coherence * phi_r.cos();
    check_nondegenerate(pp, "p_e⁺")?;
    let rhs = (0.5 - pe_minus).powi(2) + (coherence * phi_r.sin()).powi(2);
    Ok((rhs / (pp * (1.0 - pp))).sqrt())
}

/// Balanced interferometer (`p_e⁻ = 1/2`):
/// `|w⁺| = w⁻ sin φ_R / √(1 − (w⁻)² cos² φ_R)`.
pub fn w_plus_balanced(w_minus: f64, phi_r: f64) -> Result<f64> {
    if !(w_minus > 0.0 && w_minus <= 1.0) {
        return Err(invalid("w_minus", format!("{w_minus} outside (0, 1]")));
    }
    let denom_sq = 1.0 - (w_minus * phi_r.cos()).powi(2);
    if denom_sq <= ZERO_WEIGHT {
        return Err(Error::Degenerate(format!(
            "balanced overlap singular at w⁻ = {w_minus}, φ_R = {phi_r}"
        )));
    }
    Ok((w_minus * phi_r.sin()).abs() / denom_sq.sqrt())
}

/// Delay `γΔt` maximizing the absorption at `φ_R = 0`, found as the root of
/// `d(Δp)/d(γΔt)`. The ideal optimum is `2 ln 2`.
pub fn absorption_peak() -> Result<f64> {
    // Δp(x) = 1/2 − e^{−x}/2 + e^{−x/2}/2
    roots::bisect(|x| 0.5 * (-x).exp() - 0.25 * (-x / 2.0).exp(), 0.0, 10.0, 1e-14)
}

/// Observables obtained by evolving the joint state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolvedObservables {
    pub pe_minus: f64,
    pub pe_plus: f64,
    pub sigma_minus: Complex64,
    pub sigma_plus: Complex64,
    pub w_minus: Option<Complex64>,
    pub w_plus: Option<Complex64>,
}

/// Joint states just before and just after the second pulse.
pub fn evolve_sequence(cfg: &RamseyConfig) -> Result<(JointState, JointState)> {
    let before = JointState::ground()
        .apply_pulse(&PulseSpec::new(FRAC_PI_2, 0.0)?)?
        .apply_decay(&DecaySpec::new(cfg.gamma, cfg.delta_t, TimeBin::First)?)?;
    let after = before.apply_pulse(&PulseSpec::new(FRAC_PI_2, cfg.phi_r)?)?;
    Ok((before, after))
}

pub fn evolve_observables(cfg: &RamseyConfig) -> Result<EvolvedObservables> {
    let (before, after) = evolve_sequence(cfg)?;
    Ok(EvolvedObservables {
        pe_minus: before.excited_population(),
        pe_plus: after.excited_population(),
        sigma_minus: before.dipole(),
        sigma_plus: after.dipole(),
        w_minus: before.pointer_states().overlap().ok(),
        w_plus: after.pointer_states().overlap().ok(),
    })
}

/// All which-path observables of one configuration, from the closed forms,
/// together with the state-evolution values and their largest discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhichPathReport {
    pub config: RamseyConfig,
    pub pe_minus: f64,
    pub pe_plus: f64,
    pub delta_p: f64,
    pub sigma_minus: f64,
    pub sigma_plus: Complex64,
    pub w_minus: f64,
    /// `None` flags an undefined overlap (`p_e⁺ ∈ {0, 1}`).
    pub w_plus: Option<Complex64>,
    pub evolved: EvolvedObservables,
    pub max_discrepancy: f64,
}

impl WhichPathReport {
    /// Which-path information before the second pulse, `1 − w⁻`.
    pub fn wp_before(&self) -> f64 {
        1.0 - self.w_minus
    }

    /// Which-path information after the second pulse, `1 − |w⁺|`.
    pub fn wp_after(&self) -> Option<f64> {
        self.w_plus.map(|w| 1.0 - w.norm())
    }

    pub fn is_degenerate(&self) -> bool {
        self.w_plus.is_none()
    }
}

pub fn full_report(cfg: &RamseyConfig) -> Result<WhichPathReport> {
    let pe_m = pe_minus(cfg);
    let pe_p = pe_plus(cfg);
    let sig_m = sigma_minus(cfg);
    let sig_p = sigma_plus(cfg);
    let w_m = w_minus(cfg);
    let w_p = match w_plus(cfg) {
        Ok(w) => Some(w),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let evolved = evolve_observables(cfg)?;

    let mut diffs = vec![
        (pe_m - evolved.pe_minus).abs(),
        (pe_p - evolved.pe_plus).abs(),
        (sig_m - evolved.sigma_minus).norm(),
        (sig_p - evolved.sigma_plus).norm(),
    ];
    if let Some(w) = evolved.w_minus {
        diffs.push((w_m - w).norm());
    }
    if let (Some(a), Some(b)) = (w_p, evolved.w_plus) {
        diffs.push((a - b).norm());
    }
    let max_discrepancy = diffs.into_iter().fold(0.0, f64::max);

    Ok(WhichPathReport {
        config: *cfg,
        pe_minus: pe_m,
        pe_plus: pe_p,
        delta_p: absorption(cfg),
        sigma_minus: sig_m,
        sigma_plus: sig_p,
        w_minus: w_m,
        w_plus: w_p,
        evolved,
        max_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

    fn cfg(x: f64, phi: f64) -> RamseyConfig {
        RamseyConfig::dimensionless(x, phi).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(RamseyConfig::new(0.0, 1.0, 0.0, 10.0).is_err());
        assert!(RamseyConfig::new(1.0, -1.0, 0.0, 10.0).is_err());
        assert!(RamseyConfig::new(1.0, 2.0, 0.0, 2.0).is_err());
        assert!(RamseyConfig::new(1.0, 2.0, f64::NAN, 20.0).is_err());
        assert_abs_diff_eq!(default_tau_p(), 12500.0 / 202.4, epsilon = 1e-12);
    }

    #[test]
    fn pe_minus_values() {
        assert_eq!(pe_minus(&cfg(0.0, 0.0)), 0.5);
        assert_abs_diff_eq!(pe_minus(&cfg(2.0 * LN_2, 0.0)), 0.125, epsilon = 1e-15);
        assert!(pe_minus(&cfg(800.0, 0.0)) < 1e-300);
    }

    #[test]
    fn w_minus_values() {
        assert_eq!(w_minus(&cfg(0.0, 0.0)), 1.0);
        assert_abs_diff_eq!(w_minus(&cfg(60.0, 0.0)), FRAC_1_SQRT_2, epsilon = 1e-15);
        // p_e⁻ = 1/4
        assert_abs_diff_eq!(w_minus(&cfg(LN_2, 0.0)), 1.0 / 1.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w_minus(&cfg(LN_2, 0.0)), 0.81650, epsilon = 1e-5);
    }

    #[test]
    fn absorption_values() {
        assert_eq!(absorption(&cfg(0.0, 0.0)), 0.5);
        assert_eq!(absorption(&cfg(0.0, PI)), -0.5);
        // p_e⁻ = 1/8, w⁻ = 2/√7, σ₋⁻ = 1/4
        assert_abs_diff_eq!(sigma_minus(&cfg(2.0 * LN_2, 0.0)), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(absorption(&cfg(2.0 * LN_2, 0.0)), 0.625, epsilon = 1e-15);
        for phi in [0.0, 1.0, PI] {
            assert_abs_diff_eq!(absorption(&cfg(60.0, phi)), 0.5, epsilon = 1e-12);
        }
        // without which-path information the contrast is larger
        let c = cfg(1.0, 0.0);
        assert!(absorption_without_which_path(&c) > absorption(&c));
    }

    #[test]
    fn absorption_peak_is_two_ln_two() {
        assert_abs_diff_eq!(absorption_peak().unwrap(), 2.0 * LN_2, epsilon = 1e-12);
    }

    #[test]
    fn pe_plus_values() {
        assert_eq!(pe_plus(&cfg(0.0, 0.0)), 1.0);
        assert_abs_diff_eq!(pe_plus(&cfg(0.7, FRAC_PI_2)), 0.5, epsilon = 1e-15);
        // 1/2 + (1/√2)(1/2)/2
        assert_abs_diff_eq!(pe_plus(&cfg(LN_2, PI / 3.0)), 0.5 + FRAC_1_SQRT_2 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pe_plus(&cfg(LN_2, PI / 3.0)), 0.67678, epsilon = 1e-5);
        for (x, phi) in [(0.3, 0.2), (1.4, 2.0), (3.0, 5.0)] {
            let c = cfg(x, phi);
            assert_abs_diff_eq!(pe_plus(&c), pe_minus(&c) + absorption(&c), epsilon = 1e-12);
        }
    }

    #[test]
    fn w_plus_values() {
        for x in [0.1, 0.5, 1.42, 3.0] {
            let w = w_plus(&cfg(x, 0.0)).unwrap();
            assert_abs_diff_eq!(w.norm(), (-(-x).exp_m1()).sqrt(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(w_plus(&cfg(40.0, 1.1)).unwrap().norm(), 1.0, epsilon = 1e-12);
        // numerator modulus² 0.625 over 4 p(1−p) = 0.875
        let w = w_plus(&cfg(LN_2, PI / 3.0)).unwrap();
        assert_abs_diff_eq!(w.norm_sqr(), 0.625 / 0.875, epsilon = 1e-12);
        assert_abs_diff_eq!(w.norm_sqr(), 0.71429, epsilon = 1e-5);
        assert!(matches!(w_plus(&cfg(0.0, 0.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn eq7_examples() {
        let (l, r) = eq7_sides(&cfg(LN_2, PI / 3.0)).unwrap();
        assert_abs_diff_eq!(l, 0.15625, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.15625, epsilon = 1e-12);
        let (l, r) = eq7_sides(&cfg(0.0, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(l, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.25, epsilon = 1e-12);
        let c = cfg(0.9, 0.0);
        let (_, r) = eq7_sides(&c).unwrap();
        assert_abs_diff_eq!(r, (0.5 - pe_minus(&c)).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn balanced_limit() {
        assert_abs_diff_eq!(w_plus_balanced(FRAC_1_SQRT_2, FRAC_PI_2).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(w_plus_balanced(0.3, FRAC_PI_2).unwrap(), 0.3, epsilon = 1e-15);
        assert!(w_plus_balanced(FRAC_1_SQRT_2, 1e-9).unwrap() < 1e-8);
        assert!(w_plus_balanced(1.0, 0.0).is_err());
        assert!(w_plus_balanced(1.0, PI).is_err());
        assert!(w_plus_balanced(0.0, 1.0).is_err());
    }

    #[test]
    fn full_report_examples() {
        let r = full_report(&cfg(1.42, 0.0)).unwrap();
        assert_abs_diff_eq!(r.w_plus.unwrap().norm(), (1.0 - (-1.42f64).exp()).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.w_plus.unwrap().norm(), 0.87080, epsilon = 1e-5);
        assert!(r.max_discrepancy < 1e-10);

        let r = full_report(&cfg(0.33, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(r.pe_minus, 0.5 * (-0.33f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.pe_minus, 0.35946, epsilon = 1e-5);
        // p_e⁺ = 1/2 here, so the relation reduces to |w⁺|² = 1 − 2p_e⁻ + 4(p_e⁻)²,
        // which differs from (w⁻)² because p_e⁻ ≠ 1/2.
        let p = r.pe_minus;
        assert_abs_diff_eq!(r.w_plus.unwrap().norm_sqr(), 1.0 - 2.0 * p + 4.0 * p * p, epsilon = 1e-12);
        assert!((r.w_plus.unwrap().norm() - r.w_minus).abs() > 1e-3);
        assert!(r.max_discrepancy < 1e-10);

        let r = full_report(&cfg(0.0, PI)).unwrap();
        assert_abs_diff_eq!(r.pe_plus, 0.0, epsilon = 1e-15);
        assert!(r.is_degenerate());
        assert!(r.wp_after().is_none());
        assert_eq!(r.wp_before(), 0.0);
    }

    #[test]
    fn relation_route_reaches_erasure() {
        let w = w_plus_from_relation(1e-6, 1.0 / (2.0 * (1.0 - 1e-6f64)).sqrt(), 0.8).unwrap();
        assert!((w - 1.0).abs() < 1e-5);
        assert_abs_diff_eq!(w_plus_from_relation(0.0, FRAC_1_SQRT_2, 2.0).unwrap(), 1.0, epsilon = 1e-15);
    }
}
