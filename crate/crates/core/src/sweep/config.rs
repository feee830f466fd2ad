//! Sweep configuration: TOML grammar, defaults and validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::decoherence::{Averaging, MIN_SAMPLES};
use crate::oracle::{GRID_REFINEMENTS, MAX_GAMMA_DT};

/// Default ensemble size when Monte Carlo is implied but no size is given.
pub const DEFAULT_SAMPLES: u64 = 100_000;
/// Default number of time samples for trace quantities.
pub const DEFAULT_TRACE_SAMPLES: usize = 2001;
/// Default simulated time after the second pulse for trace quantities.
pub const DEFAULT_TRACE_TAIL: f64 = 8.0;

/// What a sweep computes at every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Absorption,
    WpBefore,
    WpAfter,
    VisibilityTrace,
    Profiles,
    SpinMc,
    Diffusion,
    Oracle,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Absorption => "absorption",
            Quantity::WpBefore => "wp_before",
            Quantity::WpAfter => "wp_after",
            Quantity::VisibilityTrace => "visibility_trace",
            Quantity::Profiles => "profiles",
            Quantity::SpinMc => "spin_mc",
            Quantity::Diffusion => "diffusion",
            Quantity::Oracle => "oracle",
        }
    }

    /// Parameters the quantity needs, with their defaults (`None` = required).
    fn parameters(self) -> &'static [(Variable, Option<f64>)] {
        use Variable::*;
        match self {
            Quantity::Absorption => &[(GammaDt, None), (PhiR, Some(0.0)), (Delta, Some(0.0))],
            Quantity::WpBefore => &[(GammaDt, None)],
            Quantity::WpAfter => &[(GammaDt, None), (PhiR, Some(0.0))],
            Quantity::VisibilityTrace => &[
                (GammaDt, None),
                (PhiR, Some(0.0)),
                (PhiHom, Some(0.0)),
                (WTau, Some(0.0)),
            ],
            Quantity::Profiles => &[(GammaDt, None), (PhiR, Some(0.0))],
            Quantity::SpinMc => &[(WTau, None), (P, Some(0.5))],
            Quantity::Diffusion => &[(Delta, None), (GammaDt, None), (PhiR, Some(0.0))],
            Quantity::Oracle => &[(GammaDt, None), (PhiR, Some(0.0))],
        }
    }

    /// Whether rows are indexed by time within each grid point.
    pub fn is_trace(self) -> bool {
        matches!(self, Quantity::VisibilityTrace | Quantity::Profiles)
    }
}

/// Sweepable scalar parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// Pulse delay in units of `1/γ`.
    GammaDt,
    /// Ramsey phase (rad).
    PhiR,
    /// Interferometer phase of the self-homodyne measurement (rad).
    PhiHom,
    /// Spectral-diffusion width in units of `γ`.
    Delta,
    /// Spin decoherence rate times the repetition period.
    WTau,
    /// Emission probability per sequence.
    P,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::GammaDt => "gamma_dt",
            Variable::PhiR => "phi_r",
            Variable::PhiHom => "phi_hom",
            Variable::Delta => "delta",
            Variable::WTau => "w_tau",
            Variable::P => "p",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Variable::PhiR | Variable::PhiHom => "rad",
            Variable::Delta => "gamma",
            _ => "1",
        }
    }

    fn check(self, value: f64) -> std::result::Result<(), String> {
        if !value.is_finite() {
            return Err(format!("{value} is not finite"));
        }
        match self {
            Variable::GammaDt | Variable::Delta | Variable::WTau if value < 0.0 => {
                Err(format!("{value} must be >= 0"))
            }
            Variable::P if !(0.0..=1.0).contains(&value) => Err(format!("{value} outside [0, 1]")),
            _ => Ok(()),
        }
    }
}

/// Spacing of a swept axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Time unit of the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Times in units of `1/γ`.
    #[default]
    Gamma,
    /// Times in picoseconds using `gamma_inverse_ps`.
    Si,
}

/// `[[axis]]` table as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub variable: Variable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Bounds and values are multiples of `π`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_units: Option<bool>,
}

/// `[params]` table: fixed values of non-swept parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_hom: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl Params {
    fn get(&self, v: Variable) -> Option<f64> {
        match v {
            Variable::GammaDt => self.gamma_dt,
            Variable::PhiR => self.phi_r,
            Variable::PhiHom => self.phi_hom,
            Variable::Delta => self.delta,
            Variable::WTau => self.w_tau,
            Variable::P => self.p,
        }
    }

    fn set(&mut self, v: Variable, value: f64) {
        let slot = match v {
            Variable::GammaDt => &mut self.gamma_dt,
            Variable::PhiR => &mut self.phi_r,
            Variable::PhiHom => &mut self.phi_hom,
            Variable::Delta => &mut self.delta,
            Variable::WTau => &mut self.w_tau,
            Variable::P => &mut self.p,
        };
        *slot = Some(value);
    }

    fn entries(&self) -> Vec<(Variable, f64)> {
        use Variable::*;
        [GammaDt, PhiR, PhiHom, Delta, WTau, P]
            .into_iter()
            .filter_map(|v| self.get(v).map(|x| (v, x)))
            .collect()
    }
}

/// `[diffusion]` and `[spin]` tables: how ensemble averages are taken.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
}

/// `[trace]` table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
}

/// `[oracle]` table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinements: Option<Vec<f64>>,
}

/// `[output]` table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_inverse_ps: Option<f64>,
}

/// The configuration document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub quantity: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<AveragingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<AveragingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, rename = "axis", skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<AxisSpec>,
}

/// Why a configuration was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, column: usize, message: String },
    Semantic { key: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, column, message } => {
                write!(f, "syntax error at line {line}, column {column}: {message}")
            }
            ConfigError::Semantic { key, message } => write!(f, "invalid `{key}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn semantic(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Semantic {
        key: key.into(),
        message: message.into(),
    }
}

/// A swept axis with its resolved values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub variable: Variable,
    pub values: Vec<f64>,
}

/// Fully resolved sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub quantity: Quantity,
    pub description: Option<String>,
    pub seed: u64,
    pub axes: Vec<Axis>,
    /// Values of the parameters that are not swept.
    pub fixed: BTreeMap<Variable, f64>,
    pub diffusion: Averaging,
    pub spin: Averaging,
    pub trace_samples: usize,
    pub trace_tail: f64,
    pub refinements: Vec<f64>,
    pub path: Option<PathBuf>,
    /// Format named in the file, if any.
    pub format: Option<Format>,
    pub units: Units,
    pub gamma_inverse_ps: f64,
    /// Non-fatal remarks raised while resolving.
    pub warnings: Vec<String>,
    raw: RawConfig,
}

impl SweepSpec {
    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order (first axis slowest), each holding the
    /// value of every parameter the quantity uses.
    pub fn points(&self) -> Vec<BTreeMap<Variable, f64>> {
        let mut out = vec![self.fixed.clone()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(axis.variable, v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Replaces the master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        let fix = |a: &mut Averaging| {
            if let Averaging::MonteCarlo { seed: s, .. } = a {
                *s = seed;
            }
        };
        fix(&mut self.diffusion);
        fix(&mut self.spin);
        self
    }

    /// Canonical configuration with every default written out; parsing it
    /// yields the same spec.
    pub fn resolved(&self) -> RawConfig {
        let mut raw = self.raw.clone();
        raw.seed = Some(self.seed);
        let mut params = Params::default();
        for (&v, &x) in &self.fixed {
            params.set(v, x);
        }
        raw.params = params;
        raw.axes = self
            .axes
            .iter()
            .map(|a| AxisSpec {
                variable: a.variable,
                min: None,
                max: None,
                steps: None,
                scale: None,
                values: Some(a.values.clone()),
                pi_units: None,
            })
            .collect();
        let averaging = |a: &Averaging| match *a {
            Averaging::ClosedForm => AveragingSpec {
                closed_form: Some(true),
                n_samples: None,
            },
            Averaging::MonteCarlo { n_samples, .. } => AveragingSpec {
                closed_form: None,
                n_samples: Some(n_samples),
            },
        };
        raw.diffusion = Some(averaging(&self.diffusion));
        raw.spin = Some(averaging(&self.spin));
        raw.trace = Some(TraceSpec {
            samples: Some(self.trace_samples),
            tail: Some(self.trace_tail),
        });
        raw.oracle = Some(OracleSpec {
            refinements: Some(self.refinements.clone()),
        });
        raw.output = OutputSpec {
            path: self.path.clone(),
            format: self.format,
            units: Some(self.units),
            gamma_inverse_ps: Some(self.gamma_inverse_ps),
        };
        raw
    }

    /// [`Self::resolved`] as TOML.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(&self.resolved()).expect("configuration serializes")
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

/// Parses and resolves a configuration document.
pub fn parse_config(text: &str) -> Result<SweepSpec, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    resolve(raw)
}

fn resolve_axis(i: usize, a: &AxisSpec) -> Result<Axis, ConfigError> {
    let key = |field: &str| format!("axis[{i}].{field}");
    let factor = if a.pi_units.unwrap_or(false) { PI } else { 1.0 };
    let values = if let Some(values) = &a.values {
        if a.min.is_some() || a.max.is_some() || a.steps.is_some() || a.scale.is_some() {
            return Err(semantic(key("values"), "cannot be combined with min/max/steps/scale"));
        }
        if values.is_empty() {
            return Err(semantic(key("values"), "must not be empty"));
        }
        values.iter().map(|v| v * factor).collect()
    } else {
        let steps = a.steps.ok_or_else(|| semantic(key("steps"), "required unless `values` is given"))?;
        if steps < 1 {
            return Err(semantic(key("steps"), "must be >= 1"));
        }
        let min = a.min.ok_or_else(|| semantic(key("min"), "required unless `values` is given"))?;
        if !min.is_finite() {
            return Err(semantic(key("min"), "must be finite"));
        }
        let scale = a.scale.unwrap_or_default();
        if steps == 1 {
            vec![min * factor]
        } else {
            let max = a.max.ok_or_else(|| semantic(key("max"), "required when steps > 1"))?;
            if !(max.is_finite() && min < max) {
                return Err(semantic(key("max"), format!("must exceed min = {min}")));
            }
            if scale == Scale::Log && min <= 0.0 {
                return Err(semantic(key("min"), "must be > 0 on a log scale"));
            }
            let n = (steps - 1) as f64;
            (0..steps)
                .map(|k| {
                    let f = k as f64 / n;
                    let v = match (scale, k) {
                        (_, 0) => min,
                        (_, k) if k == steps - 1 => max,
                        (Scale::Linear, _) => min + (max - min) * f,
                        (Scale::Log, _) => min * (max / min).powf(f),
                    };
                    v * factor
                })
                .collect()
        }
    };
    for &v in &values {
        a.variable.check(v).map_err(|m| semantic(key("values"), m))?;
    }
    Ok(Axis {
        variable: a.variable,
        values,
    })
}

fn resolve_averaging(
    key: &str,
    spec: Option<&AveragingSpec>,
    seed: u64,
    monte_carlo_default: bool,
    warnings: &mut Vec<String>,
) -> Result<Averaging, ConfigError> {
    let spec = spec.cloned().unwrap_or_default();
    if let Some(n) = spec.n_samples {
        if n < MIN_SAMPLES {
            return Err(semantic(
                format!("{key}.n_samples"),
                format!("must be >= {MIN_SAMPLES}"),
            ));
        }
        if spec.closed_form == Some(true) {
            let msg = format!("{key}: both closed_form and n_samples set; Monte Carlo with {n} samples is used");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        return Ok(Averaging::MonteCarlo { n_samples: n, seed });
    }
    Ok(match spec.closed_form {
        Some(true) => Averaging::ClosedForm,
        Some(false) => Averaging::MonteCarlo { n_samples: DEFAULT_SAMPLES, seed },
        None if monte_carlo_default => Averaging::MonteCarlo { n_samples: DEFAULT_SAMPLES, seed },
        None => Averaging::ClosedForm,
    })
}

/// Validates a parsed document and fills in defaults.
pub fn resolve(raw: RawConfig) -> Result<SweepSpec, ConfigError> {
    let q = raw.quantity;
    let seed = raw.seed.unwrap_or(0);
    let mut warnings = Vec::new();
    let allowed = q.parameters();
    let allows = |v: Variable| allowed.iter().any(|(a, _)| *a == v);

    let mut axes = Vec::new();
    for (i, a) in raw.axes.iter().enumerate() {
        if !allows(a.variable) {
            return Err(semantic(
                format!("axis[{i}].variable"),
                format!("`{}` is not used by quantity `{}`", a.variable.name(), q.name()),
            ));
        }
        if axes.iter().any(|b: &Axis| b.variable == a.variable) {
            return Err(semantic(
                format!("axis[{i}].variable"),
                format!("`{}` is swept twice", a.variable.name()),
            ));
        }
        axes.push(resolve_axis(i, a)?);
    }

    let mut fixed = BTreeMap::new();
    for (v, x) in raw.params.entries() {
        let key = format!("params.{}", v.name());
        if !allows(v) {
            return Err(semantic(key, format!("not used by quantity `{}`", q.name())));
        }
        if axes.iter().any(|a| a.variable == v) {
            return Err(semantic(key, "also swept by an axis"));
        }
        v.check(x).map_err(|m| semantic(key, m))?;
        fixed.insert(v, x);
    }
    for &(v, default) in allowed {
        if fixed.contains_key(&v) || axes.iter().any(|a| a.variable == v) {
            continue;
        }
        match default {
            Some(d) => {
                fixed.insert(v, d);
            }
            None => {
                return Err(semantic(
                    format!("params.{}", v.name()),
                    format!("required by quantity `{}` (set it or sweep it)", q.name()),
                ))
            }
        }
    }

    let diffusion = resolve_averaging("diffusion", raw.diffusion.as_ref(), seed, false, &mut warnings)?;
    let spin = resolve_averaging("spin", raw.spin.as_ref(), seed, q == Quantity::SpinMc, &mut warnings)?;
    if q == Quantity::SpinMc && spin == Averaging::ClosedForm {
        return Err(semantic("spin.closed_form", "spin_mc always compares against Monte Carlo"));
    }

    let trace = raw.trace.clone().unwrap_or_default();
    let trace_samples = trace.samples.unwrap_or(DEFAULT_TRACE_SAMPLES);
    if trace_samples < 2 {
        return Err(semantic("trace.samples", "must be >= 2"));
    }
    let trace_tail = trace.tail.unwrap_or(DEFAULT_TRACE_TAIL);
    if !(trace_tail.is_finite() && trace_tail > 0.0) {
        return Err(semantic("trace.tail", "must be finite and > 0"));
    }

    let refinements = raw
        .oracle
        .as_ref()
        .and_then(|o| o.refinements.clone())
        .unwrap_or_else(|| GRID_REFINEMENTS.to_vec());
    if refinements.len() < 3 {
        return Err(semantic("oracle.refinements", "need at least three levels"));
    }
    if refinements
        .iter()
        .any(|&dt| !(dt.is_finite() && dt > 0.0 && dt <= MAX_GAMMA_DT))
    {
        return Err(semantic(
            "oracle.refinements",
            format!("every step must lie in (0, {MAX_GAMMA_DT}]"),
        ));
    }

    let gamma_inverse_ps = raw.output.gamma_inverse_ps.unwrap_or(crate::GAMMA_INVERSE_PS);
    if !(gamma_inverse_ps.is_finite() && gamma_inverse_ps > 0.0) {
        return Err(semantic("output.gamma_inverse_ps", "must be finite and > 0"));
    }

    Ok(SweepSpec {
        quantity: q,
        description: raw.description.clone(),
        seed,
        axes,
        fixed,
        diffusion,
        spin,
        trace_samples,
        trace_tail,
        refinements,
        path: raw.output.path.clone(),
        format: raw.output.format,
        units: raw.output.units.unwrap_or_default(),
        gamma_inverse_ps,
        warnings,
        raw,
    })
}
