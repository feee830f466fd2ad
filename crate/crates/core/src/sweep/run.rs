//! Evaluation of a sweep into a [`ResultTable`].

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{Quantity, SweepSpec, Units, Variable};
use super::table::{Column, ResultTable, Row};
use crate::analytics::{self, RamseyConfig};
use crate::decoherence::{self, Averaging, SpectralDiffusionSpec, SpinModelSpec};
use crate::error::{Error, Result};
use crate::field;
use crate::oracle::{self, Observable};

type Point = BTreeMap<Variable, f64>;

/// Values of one row before axis columns are prepended.
struct Partial {
    time: Option<f64>,
    values: Vec<Option<f64>>,
    status: String,
}

fn ok(values: Vec<Option<f64>>) -> Partial {
    Partial {
        time: None,
        values,
        status: "ok".into(),
    }
}

fn provenance(avg: &Averaging) -> String {
    match avg {
        Averaging::ClosedForm => "formula".into(),
        Averaging::MonteCarlo { seed, .. } => format!("mc(seed={seed})"),
    }
}

fn mc_provenance(avg: &Averaging) -> String {
    match avg {
        Averaging::ClosedForm => "mc(disabled)".into(),
        Averaging::MonteCarlo { seed, .. } => format!("mc(seed={seed})"),
    }
}

/// Columns produced by `quantity` after the axis (and time) columns.
pub fn quantity_columns(spec: &SweepSpec) -> Vec<Column> {
    let f = |n: &str, u: &str| Column::new(n, u, "formula");
    let s = |n: &str, u: &str| Column::new(n, u, "state-evolution");
    match spec.quantity {
        Quantity::Absorption => vec![
            f("delta_p", "hbar_omega0"),
            s("delta_p_state", "hbar_omega0"),
            f("delta_p_no_wp", "hbar_omega0"),
            Column::new("delta_p_diffusion", "hbar_omega0", provenance(&spec.diffusion)),
            Column::new("delta_p_diffusion_se", "hbar_omega0", mc_provenance(&spec.diffusion)),
            f("sigma_minus", "1"),
            f("pe_minus", "1"),
        ],
        Quantity::WpBefore => vec![
            f("pe_minus", "1"),
            f("sigma_minus", "1"),
            f("w_minus", "1"),
            s("w_minus_state", "1"),
            f("wp_before", "1"),
        ],
        Quantity::WpAfter => vec![
            f("pe_minus", "1"),
            f("pe_plus", "1"),
            f("w_minus", "1"),
            f("w_plus_abs", "1"),
            s("w_plus_abs_state", "1"),
            f("w_plus_relation", "1"),
            f("wp_before", "1"),
            f("wp_after", "1"),
            f("wp_after_relation", "1"),
        ],
        Quantity::VisibilityTrace => vec![
            f("intensity", "gamma"),
            f("v", "1"),
            f("v_closed", "1"),
            f("v1", "1"),
            f("v2", "1"),
            f("spin_factor", "1"),
        ],
        Quantity::Profiles => vec![
            f("amplitude_re", "sqrt_gamma"),
            f("amplitude_im", "sqrt_gamma"),
            f("intensity", "gamma"),
            s("intensity_state", "gamma"),
        ],
        Quantity::SpinMc => {
            let mc = provenance(&spec.spin);
            vec![
                f("correlation", "1"),
                Column::new("correlation_mc", "1", mc.clone()),
                Column::new("correlation_se", "1", mc.clone()),
                Column::new("correlation_z", "1", mc.clone()),
                f("visibility", "1"),
                Column::new("visibility_mc", "1", mc.clone()),
                Column::new("visibility_se", "1", mc),
            ]
        }
        Quantity::Diffusion => vec![
            f("damping", "1"),
            Column::new("damping_mc", "1", mc_provenance(&spec.diffusion)),
            Column::new("damping_se", "1", mc_provenance(&spec.diffusion)),
            Column::new("delta_p_diffusion", "hbar_omega0", provenance(&spec.diffusion)),
            Column::new("delta_p_diffusion_se", "hbar_omega0", mc_provenance(&spec.diffusion)),
            f("peak_gamma_dt", "1"),
        ],
        Quantity::Oracle => Observable::ALL
            .iter()
            .flat_map(|o| {
                let n = o.name();
                [
                    f(&format!("{n}_closed"), "1"),
                    Column::new(format!("{n}_oracle"), "1", "oracle"),
                    Column::new(format!("{n}_extrapolated"), "1", "oracle"),
                    Column::new(format!("{n}_order"), "1", "oracle"),
                ]
            })
            .collect(),
    }
}

fn ramsey(p: &Point) -> Result<RamseyConfig> {
    RamseyConfig::dimensionless(p[&Variable::GammaDt], p.get(&Variable::PhiR).copied().unwrap_or(0.0))
}

fn degenerate_status(e: &Error) -> String {
    match e {
        Error::Degenerate(_) | Error::DegenerateBranch { .. } => format!("degenerate: {e}"),
        _ => format!("error: {e}"),
    }
}

fn absorption(spec: &SweepSpec, p: &Point) -> Result<Vec<Partial>> {
    let cfg = ramsey(p)?;
    let ev = analytics::evolve_observables(&cfg)?;
    let diff = SpectralDiffusionSpec::new(p[&Variable::Delta], spec.diffusion)?;
    let d = decoherence::absorption_with_diffusion(&cfg, &diff)?;
    let se = matches!(spec.diffusion, Averaging::MonteCarlo { .. }).then_some(d.std_error);
    Ok(vec![ok(vec![
        Some(analytics::absorption(&cfg)),
        Some(ev.pe_plus - ev.pe_minus),
        Some(analytics::absorption_without_which_path(&cfg)),
        Some(d.mean),
        se,
        Some(analytics::sigma_minus(&cfg)),
        Some(analytics::pe_minus(&cfg)),
    ])])
}

fn wp_before(p: &Point) -> Result<Vec<Partial>> {
    let cfg = ramsey(p)?;
    let ev = analytics::evolve_observables(&cfg)?;
    let w = analytics::w_minus(&cfg);
    Ok(vec![ok(vec![
        Some(analytics::pe_minus(&cfg)),
        Some(analytics::sigma_minus(&cfg)),
        Some(w),
        ev.w_minus.map(|w| w.norm()),
        Some(1.0 - w),
    ])])
}

fn wp_after(p: &Point) -> Result<Vec<Partial>> {
    let cfg = ramsey(p)?;
    let ev = analytics::evolve_observables(&cfg)?;
    let pe_m = analytics::pe_minus(&cfg);
    let w_m = analytics::w_minus(&cfg);
    let w_p = analytics::w_plus(&cfg);
    let relation = analytics::w_plus_from_relation(pe_m, w_m, cfg.phi_r);
    let status = match (&w_p, &relation) {
        (Err(e), _) | (_, Err(e)) => degenerate_status(e),
        _ => "ok".into(),
    };
    let w_abs = w_p.ok().map(|w| w.norm());
    let rel = relation.ok();
    Ok(vec![Partial {
        time: None,
        values: vec![
            Some(pe_m),
            Some(analytics::pe_plus(&cfg)),
            Some(w_m),
            w_abs,
            ev.w_plus.map(|w| w.norm()),
            rel,
            Some(1.0 - w_m),
            w_abs.map(|w| 1.0 - w),
            rel.map(|w| 1.0 - w),
        ],
        status,
    }])
}

fn trace_grid(spec: &SweepSpec, cfg: &RamseyConfig) -> Vec<f64> {
    field::uniform_grid(0.0, cfg.delta_t + spec.trace_tail, spec.trace_samples)
}

fn visibility_trace(spec: &SweepSpec, p: &Point) -> Result<Vec<Partial>> {
    let cfg = ramsey(p)?;
    let grid = trace_grid(spec, &cfg);
    let phi_hom = p[&Variable::PhiHom];
    let spin = SpinModelSpec::new(p[&Variable::WTau], 1.0, 0.5, 1, spec.seed)?;
    let factor = decoherence::spin_correlation_closed(spin.w, spin.tau_p).abs();
    let tr = decoherence::apply_spin_factor(&field::visibility_trace(&cfg, &grid, phi_hom)?, &spin);
    let intensity = field::intensity_profile(&cfg, &grid)?;
    let contrast = phi_hom.cos().abs() * factor;
    let status = if tr.v2.is_none() {
        "degenerate: second plateau undefined".to_string()
    } else {
        "ok".to_string()
    };
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &t)| Partial {
            time: Some(t),
            values: vec![
                Some(intensity[i]),
                tr.v[i],
                field::visibility_at(&cfg, t).map(|v| v * contrast),
                Some(tr.v1),
                tr.v2,
                Some(factor),
            ],
            status: status.clone(),
        })
        .collect())
}

fn profiles(spec: &SweepSpec, p: &Point) -> Result<Vec<Partial>> {
    let cfg = ramsey(p)?;
    let grid = trace_grid(spec, &cfg);
    let a = field::profile(&cfg, &grid)?;
    let b = field::profile_from_state(&cfg, &grid)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &t)| Partial {
            time: Some(t),
            values: vec![
                Some(a.amplitude[i].re),
                Some(a.amplitude[i].im),
                Some(a.intensity[i]),
                Some(b.intensity[i]),
            ],
            status: "ok".into(),
        })
        .collect())
}

fn spin_mc(spec: &SweepSpec, p: &Point) -> Result<Vec<Partial>> {
    let Averaging::MonteCarlo { n_samples, seed } = spec.spin else {
        return Err(Error::Degenerate("spin_mc needs Monte Carlo averaging".into()));
    };
    let model = SpinModelSpec::new(p[&Variable::WTau], 1.0, p[&Variable::P], n_samples, seed)?;
    let closed = decoherence::spin_correlation_closed(model.w, 1.0);
    let mc = decoherence::spin_correlation_mc(&model, 1.0)?;
    let mut values = vec![Some(closed), Some(mc.mean), Some(mc.std_error), Some(mc.z_score(closed))];
    let mut status = "ok".to_string();
    match (
        decoherence::spin_homodyne_visibility(&model, Averaging::ClosedForm),
        decoherence::spin_homodyne_visibility(&model, spec.spin),
    ) {
        (Ok(c), Ok(m)) => values.extend([
            Some(c.visibility.mean),
            Some(m.visibility.mean),
            Some(m.visibility.std_error),
        ]),
        (Err(e), _) | (_, Err(e)) => {
            status = degenerate_status(&e);
            values.extend([None, None, None]);
        }
    }
    Ok(vec![Partial {
        time: None,
        values,
        status,
    }])
}

fn diffusion(spec: &SweepSpec, p: &Point) -> Result<Vec<Partial>> {
    let cfg = ramsey(p)?;
    let delta = p[&Variable::Delta];
    let x = cfg.gamma_dt();
    let (damping_mc, damping_se) = match spec.diffusion {
        Averaging::MonteCarlo { n_samples, seed } => {
            let e = decoherence::diffusion_damping_mc(delta, x, n_samples, seed);
            (Some(e.mean), Some(e.std_error))
        }
        Averaging::ClosedForm => (None, None),
    };
    let d = decoherence::absorption_with_diffusion(&cfg, &SpectralDiffusionSpec::new(delta, spec.diffusion)?)?;
    Ok(vec![ok(vec![
        Some(decoherence::diffusion_damping(delta, x)),
        damping_mc,
        damping_se,
        Some(d.mean),
        damping_se.map(|_| d.std_error),
        Some(decoherence::peak_shift_with_diffusion(delta)?),
    ])])
}

fn oracle_point(spec: &SweepSpec, p: &Point) -> Result<Vec<Partial>> {
    let cfg = ramsey(p)?;
    let reports = oracle::richardson_check(
        &oracle::RamseyOracle::new(cfg.delta_t, cfg.phi_r),
        &spec.refinements,
    )?;
    let mut values = Vec::new();
    for obs in Observable::ALL {
        let r = reports.iter().find(|r| r.observable == obs);
        values.extend([
            obs.closed_form(&cfg),
            r.map(|r| r.values[0]),
            r.map(|r| r.extrapolated),
            r.and_then(|r| r.order),
        ]);
    }
    Ok(vec![ok(values)])
}

fn evaluate(spec: &SweepSpec, p: &Point, width: usize) -> Vec<Partial> {
    let result = match spec.quantity {
        Quantity::Absorption => absorption(spec, p),
        Quantity::WpBefore => wp_before(p),
        Quantity::WpAfter => wp_after(p),
        Quantity::VisibilityTrace => visibility_trace(spec, p),
        Quantity::Profiles => profiles(spec, p),
        Quantity::SpinMc => spin_mc(spec, p),
        Quantity::Diffusion => diffusion(spec, p),
        Quantity::Oracle => oracle_point(spec, p),
    };
    result.unwrap_or_else(|e| {
        vec![Partial {
            time: None,
            values: vec![None; width],
            status: degenerate_status(&e),
        }]
    })
}

fn to_si(columns: &mut [Column], rows: &mut [Row], gamma_inverse_ps: f64) {
    for (i, c) in columns.iter_mut().enumerate() {
        let (unit, factor) = match c.unit.as_str() {
            "1/gamma" => ("ps", gamma_inverse_ps),
            "gamma" => ("1/ps", 1.0 / gamma_inverse_ps),
            "sqrt_gamma" => ("1/sqrt(ps)", 1.0 / gamma_inverse_ps.sqrt()),
            _ => continue,
        };
        c.unit = unit.into();
        for r in rows.iter_mut() {
            if let Some(v) = r.values[i].as_mut() {
                *v *= factor;
            }
        }
    }
}

/// Evaluates every grid point and assembles the table in grid order.
///
/// A failing point yields a row with empty cells and an `error:` or
/// `degenerate:` status instead of aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> ResultTable {
    let mut columns: Vec<Column> = spec
        .axes
        .iter()
        .map(|a| Column::new(a.variable.name(), a.variable.unit(), "input"))
        .collect();
    if spec.quantity.is_trace() {
        columns.push(Column::new("t", "1/gamma", "input"));
    }
    let own = quantity_columns(spec);
    let width = own.len();
    columns.extend(own);

    let points = spec.points();
    let evaluated: Vec<Vec<Partial>> = points.par_iter().map(|p| evaluate(spec, p, width)).collect();

    let mut rows = Vec::new();
    for (p, partials) in points.iter().zip(evaluated) {
        for part in partials {
            let mut values: Vec<Option<f64>> = spec.axes.iter().map(|a| Some(p[&a.variable])).collect();
            if spec.quantity.is_trace() {
                values.push(part.time);
            }
            values.extend(part.values);
            rows.push(Row {
                values,
                status: part.status,
            });
        }
    }
    if spec.units == Units::Si {
        to_si(&mut columns, &mut rows, spec.gamma_inverse_ps);
    }

    let mut metadata = vec![
        ("tool".to_string(), "whichpath".to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("quantity".to_string(), spec.quantity.name().to_string()),
        ("seed".to_string(), spec.seed.to_string()),
        ("points".to_string(), points.len().to_string()),
        ("rows".to_string(), rows.len().to_string()),
    ];
    for (v, x) in &spec.fixed {
        metadata.push((format!("fixed.{}", v.name()), format!("{x:.16e}")));
    }
    if let Some(d) = &spec.description {
        metadata.push(("description".to_string(), d.replace('\n', " ")));
    }
    ResultTable {
        metadata,
        config: spec.resolved_toml(),
        columns,
        rows,
    }
}
