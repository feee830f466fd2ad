//! Acceptance suite. Runs without the libtest harness and prints one line per
//! criterion; exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use whichpath_core::analytics::{
    absorption, absorption_peak, check_eq7, full_report, pe_plus, w_minus, w_plus, w_plus_balanced,
    w_plus_from_relation,
};
use whichpath_core::decoherence::{
    diffusion_damping, diffusion_damping_mc, infer_spin_lifetime, peak_shift_with_diffusion,
    spin_correlation_closed, spin_correlation_mc, SpinModelSpec,
};
use whichpath_core::field::{default_grid, visibility_trace};
use whichpath_core::oracle::{oracle_grid, Observable, GRID_REFINEMENTS, min_order};
use whichpath_core::sweep::presets::PRESETS;
use whichpath_core::{Error, RamseyConfig};

const MC_SAMPLES: u64 = 1_000_000;
const MC_SEED: u64 = 20240917;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn cfg(x: f64, phi: f64) -> RamseyConfig {
    RamseyConfig::dimensionless(x, phi).expect("valid point")
}

/// The 50 x 50 grid: delays in [0.01, 5], phases in [0, 2π).
fn grid_50() -> Vec<(f64, f64)> {
    let n = 50;
    (0..n)
        .flat_map(|i| {
            let x = 0.01 + (5.0 - 0.01) * i as f64 / (n - 1) as f64;
            (0..n).map(move |j| (x, 2.0 * PI * j as f64 / n as f64))
        })
        .collect()
}

fn within(t: Duration, budget_s: f64) -> bool {
    t.as_secs_f64() < budget_s
}

fn overlap_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for (x, phi) in grid_50() {
        match check_eq7(&cfg(x, phi)) {
            Ok(r) => worst = worst.max(r),
            Err(Error::Degenerate(_)) => skipped += 1,
            Err(e) => return Outcome { pass: false, detail: format!("error at ({x}, {phi}): {e}") },
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: worst < 1e-12 && within(t, 1.0),
        detail: format!("max residual {worst:.3e} (< 1e-12), {skipped} degenerate skipped, {:.3} s (< 1 s)", t.as_secs_f64()),
    }
}

fn dual_route() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (x, phi) in grid_50() {
        match full_report(&cfg(x, phi)) {
            Ok(r) => worst = worst.max(r.max_discrepancy),
            Err(e) => return Outcome { pass: false, detail: format!("error at ({x}, {phi}): {e}") },
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: worst < 1e-10 && within(t, 5.0),
        detail: format!("max formula/evolution gap {worst:.3e} (< 1e-10), {:.3} s (< 5 s)", t.as_secs_f64()),
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let results = match oracle_grid(&GRID_REFINEMENTS) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: format!("oracle failed: {e}") },
    };
    let t = start.elapsed();
    let checked = [Observable::PePlus, Observable::WPlusSq, Observable::V1, Observable::V2];
    let mut worst_abs = 0.0f64;
    let mut worst_extrap = 0.0f64;
    let mut lowest_order = f64::INFINITY;
    let mut exact = 0;
    let mut strict_order = 0;
    let mut order_fail = 0;
    let mut n = 0;
    for c in results.iter().filter(|c| checked.contains(&c.observable)) {
        n += 1;
        worst_abs = worst_abs.max(c.abs_error);
        worst_extrap = worst_extrap.max(c.extrapolation_error);
        if c.report.exact {
            exact += 1;
        } else if let Some(p) = c.report.order {
            lowest_order = lowest_order.min(p);
            if p >= 1.0 {
                strict_order += 1;
            }
        }
        if !c.order_ok() {
            order_fail += 1;
        }
    }
    let graded = n - exact;
    Outcome {
        pass: worst_abs < 1e-2 && worst_extrap < 1e-6 && order_fail == 0 && within(t, 120.0),
        detail: format!(
            "{n} comparisons at dt = {:e}: max |error| {worst_abs:.3e} (< 1e-2), max extrapolation error {worst_extrap:.3e} (< 1e-6), \
             {exact} exact at every step, min order {lowest_order:.5} (>= {:.2}; {strict_order}/{graded} >= 1 strictly), {:.1} s (< 120 s)",
            GRID_REFINEMENTS[0],
            min_order(GRID_REFINEMENTS[0]),
            t.as_secs_f64()
        ),
    }
}

fn anchors() -> Outcome {
    let up = absorption(&cfg(0.0, 0.0));
    let down = absorption(&cfg(0.0, PI));
    let peak = absorption_peak().unwrap_or(f64::NAN);
    let w0 = w_minus(&cfg(0.0, 0.0));
    let w_inf = w_minus(&cfg(60.0, 0.0));
    let pass = up == 0.5
        && down == -0.5
        && (peak - 2.0 * LN_2).abs() < 1e-8
        && (w0 - 1.0).abs() < 1e-9
        && (w_inf - FRAC_1_SQRT_2).abs() < 1e-9;
    Outcome {
        pass,
        detail: format!(
            "Δp(0,0) = {up}, Δp(0,π) = {down}, argmax - 2 ln 2 = {:.2e}, w⁻(0) - 1 = {:.1e}, w⁻(60) - 1/√2 = {:.1e}",
            peak - 2.0 * LN_2,
            w0 - 1.0,
            w_inf - FRAC_1_SQRT_2
        ),
    }
}

fn plateaus() -> Outcome {
    let points = [(0.2, 0.3), (0.7, 1.1), (1.42, 0.25 * PI), (2.0, 2.5), (3.3, 4.0)];
    let mut worst_first = 0.0f64;
    let mut worst_second = 0.0f64;
    let mut worst_flat = 0.0f64;
    let mut slowest = 0.0f64;
    for (x, phi) in points {
        let c = cfg(x, phi);
        let start = Instant::now();
        let trace = match visibility_trace(&c, &default_grid(&c), 0.0) {
            Ok(t) => t,
            Err(e) => return Outcome { pass: false, detail: format!("trace failed at ({x}, {phi}): {e}") },
        };
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let target = w_plus(&c).map(|w| w.norm_sqr() * (1.0 - pe_plus(&c))).unwrap_or(f64::NAN);
        for (&t, v) in trace.grid.iter().zip(&trace.v) {
            let Some(v) = v else { continue };
            if t < c.delta_t {
                worst_first = worst_first.max((v - 0.5).abs());
            } else {
                worst_second = worst_second.max((v - target).abs());
            }
        }
        let (s1, s2) = trace.plateau_spread();
        worst_flat = worst_flat.max(s1).max(s2);
    }
    Outcome {
        pass: worst_first <= 4.0 * f64::EPSILON && worst_second < 1e-10 && worst_flat < 1e-10 && slowest < 1.0,
        detail: format!(
            "|v - 1/2| in bin 1 <= {worst_first:.1e} (rounding), |v - |w⁺|²(1-p_e⁺)| in bin 2 <= {worst_second:.1e} (< 1e-10), \
             flatness {worst_flat:.1e} (< 1e-10), slowest config {slowest:.3} s (< 1 s)"
        ),
    }
}

fn spectral_diffusion() -> Outcome {
    let start = Instant::now();
    let delta = 0.6;
    let mut worst_z = 0.0f64;
    for x in [0.5, 1.0, 1.5] {
        let est = diffusion_damping_mc(delta, x, MC_SAMPLES, MC_SEED);
        worst_z = worst_z.max(est.z_score(diffusion_damping(delta, x)).abs());
    }
    let deltas = [0.05, 0.3, 0.6, 1.0, 3.0];
    let shifts: Vec<f64> = deltas
        .iter()
        .map(|&d| peak_shift_with_diffusion(d).unwrap_or(f64::NAN))
        .collect();
    let shifted = shifts.iter().all(|&p| p < 2.0 * LN_2);
    let t = start.elapsed();
    Outcome {
        pass: worst_z <= 4.0 && shifted && within(t, 30.0),
        detail: format!(
            "max |z| {worst_z:.2} (<= 4) at δ = 0.6, 10^6 samples; argmax at δ = 0.6 is {:.6} < 2 ln 2 for all δ in {deltas:?}: {shifted}; {:.2} s (< 30 s)",
            shifts[2],
            t.as_secs_f64()
        ),
    }
}

fn overhauser() -> Outcome {
    let start = Instant::now();
    let spec = SpinModelSpec::new(1.0, 1.0, 0.5, MC_SAMPLES, MC_SEED).expect("valid spin model");
    let mut worst_z = 0.0f64;
    for wt in [0.1, 0.5, 1.0, 2.0, 4.0] {
        match spin_correlation_mc(&spec, wt) {
            Ok(est) => worst_z = worst_z.max(est.z_score(spin_correlation_closed(1.0, wt)).abs()),
            Err(e) => return Outcome { pass: false, detail: format!("MC failed: {e}") },
        }
    }
    let c_half = spin_correlation_closed(1.0, 0.5);
    let inferred = match infer_spin_lifetime(0.7, 12.5) {
        Ok(l) => l,
        Err(e) => return Outcome { pass: false, detail: format!("inversion failed: {e}") },
    };
    let rel = (inferred.lifetime - 25.0).abs() / 25.0;
    let t = start.elapsed();
    Outcome {
        pass: worst_z <= 4.0 && (c_half - 0.77458).abs() <= 1e-5 && rel <= 0.2 && within(t, 60.0),
        detail: format!(
            "max |z| {worst_z:.2} (<= 4), 10^6 samples; 𝒞(0.5) = {c_half:.7}; lifetime from ratio 0.7 at 12.5 ns = {:.2} ns ({:.1}% from 25 ns); {:.2} s (< 60 s)",
            inferred.lifetime,
            100.0 * rel,
            t.as_secs_f64()
        ),
    }
}

fn balanced_limit() -> Outcome {
    let mut worst = 0.0f64;
    for &wm in &[0.3, FRAC_1_SQRT_2, 0.9, 0.999] {
        for j in 1..200 {
            let phi = PI * j as f64 / 200.0;
            let (Ok(a), Ok(b)) = (w_plus_balanced(wm, phi), w_plus_from_relation(0.5, wm, phi)) else {
                return Outcome { pass: false, detail: format!("degenerate at w⁻ = {wm}, φ = {phi}") };
            };
            worst = worst.max((a - b).abs());
        }
    }
    let p: f64 = 1e-6;
    let wm = 1.0 / (2.0 * (1.0 - p)).sqrt();
    let mut erasure = 0.0f64;
    for j in 0..64 {
        let phi = 2.0 * PI * j as f64 / 64.0;
        match w_plus_from_relation(p, wm, phi) {
            Ok(w) => erasure = erasure.max((w - 1.0).abs()),
            Err(e) => return Outcome { pass: false, detail: format!("erasure limit failed: {e}") },
        }
    }
    Outcome {
        pass: worst < 1e-12 && erasure < 1e-5,
        detail: format!("balanced vs general route {worst:.1e} (< 1e-12); |w⁺| - 1 at p_e⁻ = 1e-6: {erasure:.1e} (< 1e-5)"),
    }
}

fn run_preset(name: &str, threads: usize, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_whichpath"))
        .args(["--threads", &threads.to_string(), "preset", name, "--out"])
        .arg(out)
        .status()
        .map_err(|e| format!("cannot start whichpath: {e}"))?;
    if !status.success() {
        return Err(format!("preset {name} exited with {status}"));
    }
    std::fs::read(out).map_err(|e| format!("cannot read {}: {e}", out.display()))
}

fn reproducibility() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome { pass: false, detail: format!("no temp dir: {e}") },
    };
    let mut mismatched = Vec::new();
    for p in PRESETS.iter() {
        let runs: Result<Vec<Vec<u8>>, String> = [(8, "a"), (8, "b"), (1, "c")]
            .iter()
            .map(|(threads, tag)| run_preset(p.name, *threads, &dir.path().join(format!("{}-{tag}.csv", p.name))))
            .collect();
        match runs {
            Ok(r) if r[0] == r[1] && r[0] == r[2] && !r[0].is_empty() => {}
            Ok(_) => mismatched.push(p.name.to_string()),
            Err(e) => return Outcome { pass: false, detail: e },
        }
    }
    Outcome {
        pass: mismatched.is_empty(),
        detail: format!(
            "{} presets, two runs at --threads 8 and one at --threads 1 each; differing: {mismatched:?}",
            PRESETS.len()
        ),
    }
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("overlap identity on 50 x 50 grid", overlap_identity),
        ("formula vs state evolution", dual_route),
        ("collision oracle vs closed forms", oracle_equivalence),
        ("anchor values", anchors),
        ("visibility plateaus", plateaus),
        ("spectral diffusion", spectral_diffusion),
        ("Overhauser field model", overhauser),
        ("balanced and erasure limits", balanced_limit),
        ("preset reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({})",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            name,
            outcome.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
