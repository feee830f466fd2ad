//! Named sweeps for the published figures.
//!
//! Each preset is an ordinary configuration document, so `list-presets`
//! output can be copied into a file and edited.

use super::config::{parse_config, SweepSpec};

/// A named configuration with its expected runtime on one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Runtime budget in seconds.
    pub budget_s: u32,
    pub config: &'static str,
}

impl Preset {
    pub fn spec(&self) -> SweepSpec {
        parse_config(self.config).unwrap_or_else(|e| panic!("preset `{}` is invalid: {e}", self.name))
    }
}

const FIG2A: &str = r#"quantity = "absorption"
description = "absorption vs delay at phi_r = 0 and pi, with and without which-path damping and with delta = 0.6 diffusion"

[params]
delta = 0.6

[[axis]]
variable = "gamma_dt"
min = 0.08
max = 1.68
steps = 81

[[axis]]
variable = "phi_r"
values = [0.0, 1.0]
pi_units = true
"#;

const FIG2B: &str = r#"quantity = "wp_before"
description = "which-path information 1 - w_minus before the second pulse"

[[axis]]
variable = "gamma_dt"
min = 0.0
max = 1.68
steps = 85
"#;

const FIG3B: &str = r#"quantity = "visibility_trace"
description = "time-resolved self-homodyne visibility at gamma_dt = 1.42 for ten Ramsey phases, spin factor at w_tau = 0.5"

[params]
gamma_dt = 1.42
w_tau = 0.5
phi_hom = 0.0

[trace]
samples = 401

[[axis]]
variable = "phi_r"
min = 0.05
max = 0.97
steps = 10
pi_units = true
"#;

const FIG4A: &str = r#"quantity = "wp_after"
description = "which-path information 1 - |w_plus| vs Ramsey phase at gamma_dt = 1.42"

[params]
gamma_dt = 1.42

[[axis]]
variable = "phi_r"
min = 0.0
max = 2.0
steps = 101
pi_units = true
"#;

const FIG4B: &str = r#"quantity = "wp_after"
description = "which-path information 1 - |w_plus| vs Ramsey phase at gamma_dt = 0.33"

[params]
gamma_dt = 0.33

[[axis]]
variable = "phi_r"
min = 0.0
max = 2.0
steps = 101
pi_units = true
"#;

const FIGS1: &str = r#"quantity = "absorption"
description = "absorption with and without delta = 0.6 spectral diffusion over an extended delay range"

[params]
delta = 0.6

[[axis]]
variable = "gamma_dt"
min = 0.0
max = 3.0
steps = 151

[[axis]]
variable = "phi_r"
values = [0.0, 1.0]
pi_units = true
"#;

const ORACLE_GRID: &str = r#"quantity = "oracle"
description = "collision model against closed forms on the 5 x 5 comparison grid"

[oracle]
refinements = [1e-3, 5e-4, 2.5e-4]

[[axis]]
variable = "gamma_dt"
values = [0.2, 0.6, 1.0, 1.42, 2.0]

[[axis]]
variable = "phi_r"
values = [0.0, 0.25, 0.5, 0.75, 1.0]
pi_units = true
"#;

const SPIN_MC: &str = r#"quantity = "spin_mc"
description = "ensemble spin correlation, closed form vs Monte Carlo"
seed = 1

[params]
p = 0.5

[spin]
n_samples = 1000000

[[axis]]
variable = "w_tau"
values = [0.1, 0.5, 1.0, 2.0, 4.0]
"#;

/// Every preset, in listing order.
pub const PRESETS: [Preset; 8] = [
    Preset { name: "fig2a", summary: "absorption vs delay, phi_r in {0, pi}, ideal / no which-path / diffusion", budget_s: 2, config: FIG2A },
    Preset { name: "fig2b", summary: "1 - w_minus vs delay", budget_s: 1, config: FIG2B },
    Preset { name: "fig3b", summary: "visibility traces at gamma_dt = 1.42, ten phases, spin factor", budget_s: 2, config: FIG3B },
    Preset { name: "fig4a", summary: "1 - |w_plus| vs phi_r at gamma_dt = 1.42", budget_s: 1, config: FIG4A },
    Preset { name: "fig4b", summary: "1 - |w_plus| vs phi_r at gamma_dt = 0.33", budget_s: 1, config: FIG4B },
    Preset { name: "figS1", summary: "absorption with and without spectral diffusion", budget_s: 2, config: FIGS1 },
    Preset { name: "oracle-grid", summary: "collision model vs closed forms, 5 x 5 grid, three step sizes", budget_s: 60, config: ORACLE_GRID },
    Preset { name: "spin-mc", summary: "spin correlation closed form vs 10^6-sample Monte Carlo", budget_s: 20, config: SPIN_MC },
];

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Every preset resolved to a spec.
pub fn figure_presets() -> Vec<(&'static str, SweepSpec)> {
    PRESETS.iter().map(|p| (p.name, p.spec())).collect()
}
