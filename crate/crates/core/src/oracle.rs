//! Time-discretized collision model of the driven emitter.
//!
//! The atom meets one fresh vacuum mode per step of length `dt` and swaps
//! amplitude into it through an exact beam-splitter rotation with
//! `sin²θ = γ·dt`. Pulses are instantaneous rotations applied between
//! steps. The joint wavefunction is kept as a list of branches, one per
//! photon-emission history, each carrying the atomic `(g, e)` amplitudes.
//!
//! Nothing here uses the closed-form expressions of [`crate::analytics`];
//! only [`compare_point`] and [`oracle_grid`] confront the two.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, RamseyConfig};
use crate::error::{invalid, Error, Result};
use crate::state::{Atom, PulseSpec};
use crate::field;

/// Largest accepted `γ·dt`.
pub const MAX_GAMMA_DT: f64 = 0.01;
/// Emission time after the last pulse that a run must cover, in units of `1/γ`.
pub const MIN_TAIL: f64 = 8.0;
/// Default step in units of `1/γ`.
pub const DEFAULT_DT: f64 = 1e-3;
/// Level-to-level change below which a refinement sequence counts as exact
/// (sums over up to ~10⁴ branches accumulate rounding of this size).
pub const EXACT_TOL: f64 = 1e-11;
/// Allowed shortfall of the order estimate below 1, per unit `γ·dt` of the
/// coarsest step. The estimate of a first-order scheme carries an `O(γ·dt)`
/// bias whose sign follows the second-order error term; on the comparison
/// grid it stays below `2.6 γ·dt`.
pub const ORDER_SLACK_PER_STEP: f64 = 10.0;

/// Smallest accepted order estimate for refinements starting at `coarsest`.
pub fn min_order(coarsest: f64) -> f64 {
    1.0 - ORDER_SLACK_PER_STEP * coarsest
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Input of [`run_collision`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionConfig {
    pub dt: f64,
    pub n_steps_bin1: usize,
    pub n_steps_bin2: usize,
    pub gamma: f64,
    /// Pulses applied before the collision of the given step, in order.
    pub pulses: Vec<(usize, PulseSpec)>,
    pub max_photons_tracked: usize,
    pub initial: Atom,
}

impl CollisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid("gamma", format!("{} must be finite and > 0", self.gamma)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("{} must be finite and > 0", self.dt)));
        }
        if self.gamma * self.dt > MAX_GAMMA_DT * (1.0 + 1e-12) {
            return Err(invalid(
                "dt",
                format!("γ·dt = {} exceeds {MAX_GAMMA_DT}", self.gamma * self.dt),
            ));
        }
        if self.max_photons_tracked < 2 {
            return Err(invalid("max_photons_tracked", "must be >= 2"));
        }
        let total = self.total_steps();
        if self.pulses.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(invalid("pulses", "steps must be non-decreasing"));
        }
        if let Some(&(last, _)) = self.pulses.last() {
            if last >= total {
                return Err(invalid("pulses", format!("step {last} beyond the {total} simulated steps")));
            }
        }
        let last = self.pulses.last().map_or(0, |p| p.0);
        let tail = (total - last) as f64 * self.gamma * self.dt;
        if tail < MIN_TAIL * (1.0 - 1e-9) {
            return Err(invalid(
                "n_steps_bin2",
                format!("only γt = {tail} simulated after the last pulse, need {MIN_TAIL}"),
            ));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.n_steps_bin1 + self.n_steps_bin2
    }
}

/// One emission history: the steps whose modes hold a photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub modes: Vec<usize>,
    pub g: Complex64,
    pub e: Complex64,
}

/// Branch amplitudes on both sides of a pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSnapshot {
    pub step: usize,
    pub before: Vec<Branch>,
    pub after: Vec<Branch>,
}

/// Output of [`run_collision`]. Per-step series are sampled at `t_s = s·dt`
/// after any pulse of that step and before its collision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub dt: f64,
    pub gamma: f64,
    pub excited: Vec<f64>,
    pub dipole: Vec<Complex64>,
    /// `⟨b_s⟩/√dt`.
    pub mean_field: Vec<Complex64>,
    /// `⟨b_s†b_s⟩/dt`.
    pub flux: Vec<f64>,
    pub snapshots: Vec<PulseSnapshot>,
    /// Norm carried by histories that can no longer interact.
    pub retired_norm: f64,
    pub final_norm: f64,
    pub max_photons: usize,
}

impl ModeRecord {
    pub fn len(&self) -> usize {
        self.excited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excited.is_empty()
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn norm_drift(&self) -> f64 {
        (self.final_norm - 1.0).abs()
    }

    /// Step index of `time`, or [`Error::OffGrid`].
    pub fn step_of(&self, time: f64) -> Result<usize> {
        let s = time / self.dt;
        let r = s.round();
        if !time.is_finite() || time < 0.0 || (s - r).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::OffGrid { time, dt: self.dt });
        }
        Ok(r as usize)
    }
}

fn populations(live: &[Branch]) -> (f64, Complex64) {
    live.iter().fold((0.0, ZERO), |(p, d), b| {
        (p + b.e.norm_sqr(), d + b.g.conj() * b.e)
    })
}

/// Runs the collision model.
///
/// Photons emitted after the last pulse leave the atom in `|g⟩` for good;
/// those histories only contribute their emitted amplitude to the step
/// observables and are then folded into `retired_norm`.
pub fn run_collision(cfg: &CollisionConfig) -> Result<ModeRecord> {
    cfg.validate()?;
    let total = cfg.total_steps();
    let sin = (cfg.gamma * cfg.dt).sqrt();
    let cos = (1.0 - cfg.gamma * cfg.dt).sqrt();
    let last_pulse = cfg.pulses.last().map_or(0, |p| p.0);

    let (g0, e0) = match cfg.initial {
        Atom::Ground => (Complex64::new(1.0, 0.0), ZERO),
        Atom::Excited => (ZERO, Complex64::new(1.0, 0.0)),
    };
    let mut live = vec![Branch { modes: Vec::new(), g: g0, e: e0 }];
    let mut rec = ModeRecord {
        dt: cfg.dt,
        gamma: cfg.gamma,
        excited: Vec::with_capacity(total),
        dipole: Vec::with_capacity(total),
        mean_field: Vec::with_capacity(total),
        flux: Vec::with_capacity(total),
        snapshots: Vec::new(),
        retired_norm: 0.0,
        final_norm: 0.0,
        max_photons: 0,
    };
    let mut next_pulse = 0;
    let inv_sqrt_dt = 1.0 / cfg.dt.sqrt();

    for s in 0..total {
        while next_pulse < cfg.pulses.len() && cfg.pulses[next_pulse].0 == s {
            let pulse = &cfg.pulses[next_pulse].1;
            let before = live.clone();
            for b in live.iter_mut() {
                (b.e, b.g) = pulse.rotate(b.e, b.g);
            }
            rec.snapshots.push(PulseSnapshot { step: s, before, after: live.clone() });
            next_pulse += 1;
        }
        let (pe, dip) = populations(&live);
        rec.excited.push(pe);
        rec.dipole.push(dip);

        let retire = s >= last_pulse;
        let mut mean = ZERO;
        let mut flux = 0.0;
        let mut born = Vec::new();
        for b in live.iter_mut() {
            if b.e == ZERO {
                continue;
            }
            let photons = b.modes.len() + 1;
            if photons > cfg.max_photons_tracked {
                return Err(Error::SectorOverflow { max: cfg.max_photons_tracked });
            }
            rec.max_photons = rec.max_photons.max(photons);
            let emitted = b.e * sin;
            mean += b.g.conj() * emitted;
            flux += emitted.norm_sqr();
            b.e *= cos;
            if retire {
                rec.retired_norm += emitted.norm_sqr();
            } else {
                let mut modes = b.modes.clone();
                modes.push(s);
                born.push(Branch { modes, g: emitted, e: ZERO });
            }
        }
        live.extend(born);
        rec.mean_field.push(mean * inv_sqrt_dt);
        rec.flux.push(flux / cfg.dt);
    }
    rec.final_norm = rec.retired_norm
        + live.iter().map(|b| b.g.norm_sqr() + b.e.norm_sqr()).sum::<f64>();
    Ok(rec)
}

/// Mean of `|⟨b_s⟩|²/⟨b_s†b_s⟩` over the steps of `[from, to)` with
/// non-negligible flux.
pub fn bin_visibility(record: &ModeRecord, from: usize, to: usize) -> Option<f64> {
    let threshold = field::MIN_INTENSITY * record.gamma;
    let (sum, n) = (from..to.min(record.len()))
        .filter(|&s| record.flux[s] > threshold)
        .map(|s| record.mean_field[s].norm_sqr() / record.flux[s])
        .fold((0.0, 0usize), |(a, n), v| (a + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Spread `max − min` of the per-step visibility over `[from, to)`.
pub fn bin_visibility_spread(record: &ModeRecord, from: usize, to: usize) -> f64 {
    let threshold = field::MIN_INTENSITY * record.gamma;
    let (lo, hi) = (from..to.min(record.len()))
        .filter(|&s| record.flux[s] > threshold)
        .map(|s| record.mean_field[s].norm_sqr() / record.flux[s])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Pointer states and visibilities reconstructed from a collision record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinOverlaps {
    pub pe_minus: f64,
    pub pe_plus: f64,
    /// Overlap of the two-bin pointer states before the boundary pulse.
    pub w_minus: Option<Complex64>,
    /// Same after the pulse.
    pub w_plus: Option<Complex64>,
    /// Overlaps of the full many-mode pointer states.
    pub w_minus_modes: Option<Complex64>,
    pub w_plus_modes: Option<Complex64>,
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    /// Largest weight outside the two-bin projection (either side of the pulse).
    pub unresolved_weight: f64,
}

fn overlap(e: &[Complex64], g: &[Complex64]) -> Option<Complex64> {
    let ne: f64 = e.iter().map(|z| z.norm_sqr()).sum();
    let ng: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    if ne <= crate::ZERO_WEIGHT || ng <= crate::ZERO_WEIGHT {
        return None;
    }
    let ip: Complex64 = e.iter().zip(g).map(|(a, b)| a.conj() * b).sum();
    Some(ip / (ne * ng).sqrt())
}

struct Projection {
    coarse: Option<Complex64>,
    modes: Option<Complex64>,
    pe: f64,
    unresolved: f64,
}

fn project(branches: &[Branch], wavepacket: &[f64], start: usize) -> Projection {
    let mut vac = (ZERO, ZERO);
    let mut one = (ZERO, ZERO);
    let (mut eg, mut gg) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for b in branches {
        eg.push(b.e);
        gg.push(b.g);
        total += b.g.norm_sqr() + b.e.norm_sqr();
        match b.modes.as_slice() {
            [] => vac = (b.g, b.e),
            &[k] if k >= start && k - start < wavepacket.len() => {
                let u = wavepacket[k - start];
                one.0 += b.g * u;
                one.1 += b.e * u;
            }
            _ => {}
        }
    }
    let kept = vac.0.norm_sqr() + vac.1.norm_sqr() + one.0.norm_sqr() + one.1.norm_sqr();
    Projection {
        coarse: overlap(&[vac.1, one.1], &[vac.0, one.0]),
        modes: overlap(&eg, &gg),
        pe: branches.iter().map(|b| b.e.norm_sqr()).sum(),
        unresolved: (total - kept).max(0.0),
    }
}

/// Projects the record onto two time bins split at the pulse at `boundary`.
///
/// Bin 1 runs from the preceding pulse (or `t = 0`) to `boundary`; its
/// photon is projected on the normalized decay wavepacket `∝ e^{−γt/2}`
/// sampled on the step grid. Bin 2 runs from `boundary` to the next pulse
/// or the end of the record.
pub fn coarse_grain_bins(record: &ModeRecord, boundary: f64) -> Result<BinOverlaps> {
    let step = record.step_of(boundary)?;
    let idx = record
        .snapshots
        .iter()
        .rposition(|s| s.step == step)
        .ok_or_else(|| invalid("boundary", format!("no pulse at t = {boundary}")))?;
    let start = idx.checked_sub(1).map_or(0, |i| record.snapshots[i].step);
    let end = record
        .snapshots
        .iter()
        .find(|s| s.step > step)
        .map_or(record.len(), |s| s.step);

    let mut wavepacket: Vec<f64> = (0..step - start)
        .map(|k| (-0.5 * record.gamma * record.time(k)).exp())
        .collect();
    let norm = wavepacket.iter().map(|u| u * u).sum::<f64>().sqrt();
    if norm > 0.0 {
        wavepacket.iter_mut().for_each(|u| *u /= norm);
    }

    let snap = &record.snapshots[idx];
    let before = project(&snap.before, &wavepacket, start);
    let after = project(&snap.after, &wavepacket, start);
    Ok(BinOverlaps {
        pe_minus: before.pe,
        pe_plus: after.pe,
        w_minus: before.coarse,
        w_plus: after.coarse,
        w_minus_modes: before.modes,
        w_plus_modes: after.modes,
        v1: bin_visibility(record, start, step),
        v2: bin_visibility(record, step, end),
        unresolved_weight: before.unresolved.max(after.unresolved),
    })
}

/// Two-pulse Ramsey run of the collision model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyOracle {
    pub gamma: f64,
    pub delta_t: f64,
    pub phi_r: f64,
    /// Simulated time after the second pulse.
    pub tail: f64,
}

impl RamseyOracle {
    /// Dimensionless run (`γ = 1`) with the minimum tail.
    pub fn new(gamma_dt: f64, phi_r: f64) -> Self {
        Self {
            gamma: 1.0,
            delta_t: gamma_dt,
            phi_r,
            tail: MIN_TAIL,
        }
    }

    pub fn collision_config(&self, dt: f64) -> Result<CollisionConfig> {
        if !(self.delta_t.is_finite() && self.delta_t >= 0.0) {
            return Err(invalid("delta_t", format!("{} must be finite and >= 0", self.delta_t)));
        }
        let s = self.delta_t / dt;
        let n1 = s.round();
        if (s - n1).abs() > 1e-9 * n1.max(1.0) {
            return Err(Error::OffGrid { time: self.delta_t, dt });
        }
        let tail = self.tail.max(MIN_TAIL / self.gamma);
        let n2 = (tail / dt - 1e-9).ceil() as usize;
        let n1 = n1 as usize;
        Ok(CollisionConfig {
            dt,
            n_steps_bin1: n1,
            n_steps_bin2: n2,
            gamma: self.gamma,
            pulses: vec![
                (0, PulseSpec::half_pi(0.0)?),
                (n1, PulseSpec::half_pi(self.phi_r)?),
            ],
            max_photons_tracked: 2,
            initial: Atom::Ground,
        })
    }

    pub fn run(&self, dt: f64) -> Result<OracleObservables> {
        let record = run_collision(&self.collision_config(dt)?)?;
        let bins = coarse_grain_bins(&record, record.time(record.step_of(self.delta_t)?))?;
        Ok(OracleObservables {
            dt,
            pe_plus: bins.pe_plus,
            w_plus_sq: bins.w_plus.map(|w| w.norm_sqr()),
            w_minus: bins.w_minus.map(|w| w.re),
            v1: bins.v1,
            v2: bins.v2,
            bins,
            norm_drift: record.norm_drift(),
            steps: record.len(),
        })
    }
}

/// Observables extracted from one Ramsey run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleObservables {
    pub dt: f64,
    pub pe_plus: f64,
    pub w_plus_sq: Option<f64>,
    pub w_minus: Option<f64>,
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub bins: BinOverlaps,
    pub norm_drift: f64,
    pub steps: usize,
}

/// Observables followed by [`richardson_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    PePlus,
    WPlusSq,
    WMinus,
    V1,
    V2,
}

impl Observable {
    pub const ALL: [Observable; 5] = [
        Observable::PePlus,
        Observable::WPlusSq,
        Observable::WMinus,
        Observable::V1,
        Observable::V2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::PePlus => "pe_plus",
            Observable::WPlusSq => "w_plus_sq",
            Observable::WMinus => "w_minus",
            Observable::V1 => "v1",
            Observable::V2 => "v2",
        }
    }

    pub fn of(self, o: &OracleObservables) -> Option<f64> {
        match self {
            Observable::PePlus => Some(o.pe_plus),
            Observable::WPlusSq => o.w_plus_sq,
            Observable::WMinus => o.w_minus,
            Observable::V1 => o.v1,
            Observable::V2 => o.v2,
        }
    }

    /// Continuum value of the observable.
    pub fn closed_form(self, cfg: &RamseyConfig) -> Option<f64> {
        match self {
            Observable::PePlus => Some(analytics::pe_plus(cfg)),
            Observable::WPlusSq => analytics::w_plus(cfg).ok().map(|w| w.norm_sqr()),
            Observable::WMinus => Some(analytics::w_minus(cfg)),
            Observable::V1 => (cfg.delta_t > 0.0).then_some(0.5),
            Observable::V2 => field::second_plateau(cfg),
        }
    }
}

/// Convergence of one observable under step refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub observable: Observable,
    pub dts: Vec<f64>,
    pub values: Vec<f64>,
    /// Observed order from the last three levels; `None` when the values
    /// do not change or the differences alternate.
    pub order: Option<f64>,
    /// Polynomial extrapolation of the values to `dt = 0`.
    pub extrapolated: f64,
    /// Successive differences share a sign and shrink.
    pub monotone: bool,
    /// Values agree to rounding at every level.
    pub exact: bool,
}

impl ConvergenceReport {
    /// Ratios of successive errors against `target`.
    pub fn error_ratios(&self, target: f64) -> Vec<f64> {
        self.values
            .windows(2)
            .map(|w| (w[0] - target) / (w[1] - target))
            .collect()
    }
}

fn extrapolate_to_zero(h: &[f64], f: &[f64]) -> f64 {
    // Neville's scheme evaluated at h = 0
    let mut p = f.to_vec();
    for m in 1..h.len() {
        for i in 0..h.len() - m {
            p[i] = (h[i] * p[i + 1] - h[i + m] * p[i]) / (h[i] - h[i + m]);
        }
    }
    p[0]
}

/// Builds a report from values on a geometric sequence of steps.
pub fn convergence_report(observable: Observable, dts: &[f64], values: &[f64]) -> Result<ConvergenceReport> {
    if dts.len() < 3 || dts.len() != values.len() {
        return Err(invalid("refinements", "need at least three levels with one value each"));
    }
    if dts.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(invalid("refinements", "steps must be positive and strictly decreasing"));
    }
    let ratio = dts[0] / dts[1];
    if dts.windows(2).any(|w| ((w[0] / w[1]) / ratio - 1.0).abs() > 1e-9) {
        return Err(invalid("refinements", "steps must form a geometric sequence"));
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let exact = diffs.iter().all(|d| d.abs() <= EXACT_TOL * scale);
    let monotone = !exact
        && diffs.windows(2).all(|d| d[0] * d[1] > 0.0 && d[1].abs() < d[0].abs());
    let n = diffs.len();
    let (d1, d2) = (diffs[n - 2], diffs[n - 1]);
    let order = (!exact && d1 * d2 > 0.0).then(|| (d1 / d2).ln() / ratio.ln());
    Ok(ConvergenceReport {
        observable,
        dts: dts.to_vec(),
        values: values.to_vec(),
        order,
        extrapolated: if exact { values[values.len() - 1] } else { extrapolate_to_zero(dts, values) },
        monotone,
        exact,
    })
}

/// Runs `base` at every step of `refinements` and reports the convergence
/// of each observable defined at all levels.
pub fn richardson_check(base: &RamseyOracle, refinements: &[f64]) -> Result<Vec<ConvergenceReport>> {
    if refinements.len() < 3 {
        return Err(invalid("refinements", "need at least three levels"));
    }
    let runs = refinements
        .par_iter()
        .map(|&dt| base.run(dt))
        .collect::<Result<Vec<_>>>()?;
    Observable::ALL
        .iter()
        .filter_map(|&obs| {
            let values: Option<Vec<f64>> = runs.iter().map(|r| obs.of(r)).collect();
            values.map(|v| convergence_report(obs, refinements, &v))
        })
        .collect()
}

/// Closed form against collision model at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointComparison {
    pub gamma_dt: f64,
    pub phi_r: f64,
    pub observable: Observable,
    pub closed_form: f64,
    /// Value at the coarsest step.
    pub oracle: f64,
    pub abs_error: f64,
    pub report: ConvergenceReport,
    pub extrapolation_error: f64,
}

/// Compares every observable with a continuum value at `(γΔt, φ_R)`.
pub fn compare_point(gamma_dt: f64, phi_r: f64, refinements: &[f64]) -> Result<Vec<PointComparison>> {
    let cfg = RamseyConfig::dimensionless(gamma_dt, phi_r)?;
    let reports = richardson_check(&RamseyOracle::new(gamma_dt, phi_r), refinements)?;
    Ok(reports
        .into_iter()
        .filter_map(|report| {
            let target = report.observable.closed_form(&cfg)?;
            Some(PointComparison {
                gamma_dt,
                phi_r,
                observable: report.observable,
                closed_form: target,
                oracle: report.values[0],
                abs_error: (report.values[0] - target).abs(),
                extrapolation_error: (report.extrapolated - target).abs(),
                report,
            })
        })
        .collect())
}

/// Delays `γΔt` of the comparison grid.
pub const GRID_DELAYS: [f64; 5] = [0.2, 0.6, 1.0, 1.42, 2.0];
/// Ramsey phases of the comparison grid, in units of `π`.
pub const GRID_PHASES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Step sequence of the comparison grid.
pub const GRID_REFINEMENTS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

impl PointComparison {
    /// Observed order at least first order (see [`min_order`]), or the
    /// sequence is exact.
    pub fn order_ok(&self) -> bool {
        // the grid runs at γ = 1, so steps are already γ·dt
        let floor = min_order(self.report.dts[0]);
        self.report.exact || self.report.order.is_some_and(|p| p >= floor)
    }

    pub fn passes(&self, abs_tol: f64, extrapolation_tol: f64) -> bool {
        self.abs_error <= abs_tol && self.extrapolation_error <= extrapolation_tol && self.order_ok()
    }
}

/// [`compare_point`] over the 5×5 comparison grid, in grid order.
pub fn oracle_grid(refinements: &[f64]) -> Result<Vec<PointComparison>> {
    let points: Vec<(f64, f64)> = GRID_DELAYS
        .iter()
        .flat_map(|&x| GRID_PHASES.iter().map(move |&p| (x, p * std::f64::consts::PI)))
        .collect();
    let per_point = points
        .par_iter()
        .map(|&(x, phi)| compare_point(x, phi, refinements))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_3, LN_2, PI};

    fn free_decay(initial: Atom, pulses: Vec<(usize, PulseSpec)>, dt: f64, steps: usize) -> CollisionConfig {
        CollisionConfig {
            dt,
            n_steps_bin1: 0,
            n_steps_bin2: steps,
            gamma: 1.0,
            pulses,
            max_photons_tracked: 2,
            initial,
        }
    }

    #[test]
    fn excited_atom_decays_exponentially() {
        let rec = run_collision(&free_decay(Atom::Excited, vec![], 1e-3, 8000)).unwrap();
        for s in (0..8000).step_by(500) {
            let t = rec.time(s);
            assert_abs_diff_eq!(rec.excited[s], (-t).exp(), epsilon = 1e-3);
            assert_abs_diff_eq!(rec.excited[s], 0.999f64.powi(s as i32), epsilon = 1e-12);
        }
        assert!(rec.norm_drift() < 8000.0 * 1e-14);
        assert_eq!(rec.max_photons, 1);
    }

    #[test]
    fn half_pi_drive_gives_half_population_and_half_visibility() {
        let rec = run_collision(&free_decay(
            Atom::Ground,
            vec![(0, PulseSpec::half_pi(0.0).unwrap())],
            1e-3,
            8000,
        ))
        .unwrap();
        for s in (0..8000).step_by(400) {
            assert_abs_diff_eq!(rec.excited[s], 0.5 * (-rec.time(s)).exp(), epsilon = 1e-3);
        }
        assert_abs_diff_eq!(bin_visibility(&rec, 0, rec.len()).unwrap(), 0.5, epsilon = 1e-12);
        assert!(bin_visibility_spread(&rec, 0, rec.len()) < 1e-12);
    }

    #[test]
    fn flux_matches_excited_population() {
        let cfg = RamseyOracle::new(0.7, 1.1).collision_config(1e-3).unwrap();
        let rec = run_collision(&cfg).unwrap();
        for s in 0..rec.len() {
            assert_abs_diff_eq!(rec.flux[s], rec.gamma * rec.excited[s], epsilon = 1e-12);
        }
        assert!(rec.norm_drift() < rec.len() as f64 * 1e-14);
        assert_eq!(rec.max_photons, 2);
    }

    #[test]
    fn ramsey_population_after_second_pulse() {
        for (x, phi) in [(0.5, 0.0), (1.0, 2.0), (2.0, PI)] {
            let obs = RamseyOracle::new(x, phi).run(1e-3).unwrap();
            let cfg = RamseyConfig::dimensionless(x, phi).unwrap();
            assert_abs_diff_eq!(obs.pe_plus, analytics::pe_plus(&cfg), epsilon = 2e-3);
            assert_abs_diff_eq!(obs.bins.pe_minus, analytics::pe_minus(&cfg), epsilon = 2e-3);
        }
    }

    #[test]
    fn reference_overlap_value() {
        // step chosen so that ln 2 lies on the grid, dt ≈ 1.0002e-3
        let dt = LN_2 / 693.0;
        let rec = run_collision(&RamseyOracle::new(LN_2, FRAC_PI_3).collision_config(dt).unwrap()).unwrap();
        let bins = coarse_grain_bins(&rec, LN_2).unwrap();
        assert_abs_diff_eq!(bins.w_plus.unwrap().norm_sqr(), 0.71429, epsilon = 5e-3);
        assert_abs_diff_eq!(bins.v1.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_phase_gives_erasure_bound() {
        let obs = RamseyOracle::new(1.42, 0.0).run(1e-3).unwrap();
        let expected = (1.0 - (-1.42f64).exp()).sqrt();
        assert_abs_diff_eq!(obs.w_plus_sq.unwrap().sqrt(), expected, epsilon = 2e-3);
    }

    #[test]
    fn coarse_and_mode_resolved_overlaps_agree() {
        let obs = RamseyOracle::new(1.0, 0.9).run(1e-3).unwrap();
        let b = obs.bins;
        let cfg = RamseyConfig::dimensionless(1.0, 0.9).unwrap();
        let w = analytics::w_plus(&cfg).unwrap();
        assert_abs_diff_eq!((b.w_plus.unwrap() - w).norm(), 0.0, epsilon = 2e-3);
        assert_abs_diff_eq!((b.w_plus_modes.unwrap() - w).norm(), 0.0, epsilon = 2e-3);
        assert_abs_diff_eq!((b.w_minus.unwrap() - analytics::w_minus(&cfg)).norm(), 0.0, epsilon = 2e-3);
        assert!(b.unresolved_weight < 1e-3);
    }

    #[test]
    fn validation_errors() {
        let base = RamseyOracle::new(1.0, 0.0).collision_config(1e-3).unwrap();
        let mut c = base.clone();
        c.dt = 0.02;
        assert!(matches!(run_collision(&c), Err(Error::InvalidParameter { name: "dt", .. })));
        let mut c = base.clone();
        c.max_photons_tracked = 1;
        assert!(run_collision(&c).is_err());
        let mut c = base.clone();
        c.n_steps_bin2 = 100;
        assert!(run_collision(&c).is_err());
        assert!(matches!(
            RamseyOracle::new(0.10005, 0.0).collision_config(1e-3),
            Err(Error::OffGrid { .. })
        ));
        let rec = run_collision(&base).unwrap();
        assert!(matches!(coarse_grain_bins(&rec, 0.5005), Err(Error::OffGrid { .. })));
        assert!(coarse_grain_bins(&rec, 0.5).is_err());
    }

    #[test]
    fn third_pulse_overflows_two_photon_sector() {
        let p = PulseSpec::half_pi(0.0).unwrap();
        let cfg = free_decay(Atom::Ground, vec![(0, p), (50, p), (100, p)], 1e-3, 8200);
        assert_eq!(run_collision(&cfg), Err(Error::SectorOverflow { max: 2 }));
        let mut cfg = cfg;
        cfg.max_photons_tracked = 3;
        let rec = run_collision(&cfg).unwrap();
        assert_eq!(rec.max_photons, 3);
        assert!(rec.norm_drift() < 1e-10);
    }

    #[test]
    fn refinement_converges_at_first_order() {
        let base = RamseyOracle::new(0.6, 1.0);
        let cfg = RamseyConfig::dimensionless(0.6, 1.0).unwrap();
        let reports = richardson_check(&base, &[4e-3, 2e-3, 1e-3]).unwrap();
        let pe = reports.iter().find(|r| r.observable == Observable::PePlus).unwrap();
        let target = analytics::pe_plus(&cfg);
        for ratio in pe.error_ratios(target) {
            assert_abs_diff_eq!(ratio, 2.0, epsilon = 0.1);
        }
        assert!(pe.monotone);
        assert_abs_diff_eq!(pe.order.unwrap(), 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(pe.extrapolated, target, epsilon = 1e-6);
        let w = reports.iter().find(|r| r.observable == Observable::WPlusSq).unwrap();
        let target = analytics::w_plus(&cfg).unwrap().norm_sqr();
        for ratio in w.error_ratios(target) {
            assert_abs_diff_eq!(ratio, 2.0, epsilon = 0.1);
        }
        let v1 = reports.iter().find(|r| r.observable == Observable::V1).unwrap();
        assert!(v1.exact);
        assert!(v1.order.is_none());
    }

    #[test]
    fn convergence_report_inputs() {
        assert!(convergence_report(Observable::PePlus, &[1e-3, 5e-4], &[1.0, 1.0]).is_err());
        assert!(convergence_report(Observable::PePlus, &[1e-3, 5e-4, 1e-4], &[1.0; 3]).is_err());
        let r = convergence_report(Observable::PePlus, &[4.0, 2.0, 1.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!(!r.monotone);
        assert!(r.order.is_none());
        // exact for quadratic error expansions
        let f = |h: f64| 0.3 + 2.0 * h - 5.0 * h * h;
        let r = convergence_report(Observable::V2, &[0.4, 0.2, 0.1], &[f(0.4), f(0.2), f(0.1)]).unwrap();
        assert_abs_diff_eq!(r.extrapolated, 0.3, epsilon = 1e-14);
    }
}
