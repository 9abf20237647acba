//! Whole-design evaluation: process → mechanics → transduction → pierce, then
//! the feasibility constraints.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result, Stage};
use crate::mechanics::{
    beam_model, pull_in_voltage, spring_softening, static_deflection, Anchor, BeamGeometry,
    DeflectionMode, LumpedBeamModel, MassModel,
};
use crate::pierce::{
    low_root_for, max_negative_resistance, negative_resistance, required_gm, startup_check,
    PeakResistance, PierceConfig, StartupReport, DEFAULT_C0, DEFAULT_PIERCE_CAPACITANCE,
    STARTUP_MARGIN,
};
use crate::process::{
    check_mems_rules, LaminateProperties, LaminateSpec, MemsRuleSet, ProcessTechnology, RuleKind,
    RuleViolation, DEFAULT_DENSITY, DEFAULT_YOUNGS_MODULUS,
};
use crate::transduction::{
    circuit_for, coupling_coefficient, displacement_limit, electrode_capacitance,
    EquivalentCircuit, Port, Transducer,
};

/// Default pull-in safety factor α in V_P < α·V_pi.
pub const DEFAULT_PULL_IN_SAFETY: f64 = 0.97;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialsBlock {
    pub top_metal_index: u8,
    pub include_dielectric: bool,
    pub youngs_modulus: f64,
    pub density: f64,
    /// Overrides the per-metal-count thickness lookup (m).
    pub stack_thickness: Option<[f64; 4]>,
    pub metal_thickness: Option<f64>,
}

impl Default for MaterialsBlock {
    fn default() -> Self {
        Self {
            top_metal_index: 4,
            include_dielectric: true,
            youngs_modulus: DEFAULT_YOUNGS_MODULUS,
            density: DEFAULT_DENSITY,
            stack_thickness: None,
            metal_thickness: None,
        }
    }
}

impl MaterialsBlock {
    pub fn technology(&self) -> ProcessTechnology {
        let base = ProcessTechnology::default();
        ProcessTechnology {
            stack_thickness: self.stack_thickness.unwrap_or(base.stack_thickness),
            metal_thickness: self.metal_thickness.unwrap_or(base.metal_thickness),
            youngs_modulus: self.youngs_modulus,
            density: self.density,
        }
    }

    pub fn laminate(&self) -> LaminateSpec {
        LaminateSpec {
            top_metal_index: self.top_metal_index,
            include_dielectric: self.include_dielectric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamBlock {
    pub anchor: Anchor,
    /// L (m)
    pub length: f64,
    /// H, in-plane width (m)
    pub width: f64,
    /// W (m); defaults to the laminate thickness.
    pub thickness: Option<f64>,
    pub q_factor: f64,
    pub mass_model: MassModel,
}

impl Default for BeamBlock {
    fn default() -> Self {
        Self {
            anchor: Anchor::Cantilever,
            length: 100e-6,
            width: 2e-6,
            thickness: None,
            q_factor: 4000.0,
            mass_model: MassModel::Lumped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransducerBlock {
    pub gap: f64,
    pub electrode_length: f64,
    pub bias: f64,
    pub port: Port,
}

impl Default for TransducerBlock {
    fn default() -> Self {
        Self {
            gap: 1.2e-6,
            electrode_length: 75e-6,
            bias: 9.5,
            port: Port::OnePort,
        }
    }
}

/// `"auto"` or a fixed transconductance in A/V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GmSetting {
    Fixed(f64),
    Keyword(GmKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmKeyword {
    Auto,
}

impl Default for GmSetting {
    fn default() -> Self {
        GmSetting::Keyword(GmKeyword::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PierceBlock {
    pub c1: f64,
    pub c2: f64,
    pub c0: f64,
    pub gm: GmSetting,
    /// Margin targeted by `"auto"`.
    pub target_margin: f64,
    /// When set, `"auto"` targets this |Re(Z_C)| (Ω) instead of a margin.
    pub target_resistance: Option<f64>,
}

impl Default for PierceBlock {
    fn default() -> Self {
        Self {
            c1: DEFAULT_PIERCE_CAPACITANCE,
            c2: DEFAULT_PIERCE_CAPACITANCE,
            c0: DEFAULT_C0,
            gm: GmSetting::default(),
            target_margin: STARTUP_MARGIN,
            target_resistance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSettings {
    pub pull_in_safety: f64,
    /// Vibration amplitude budgeted on top of the static offset (m). When
    /// absent, whatever the limit leaves after the static deflection.
    pub vibration_allowance: Option<f64>,
    pub deflection_mode: DeflectionMode,
}

impl Default for ConstraintSettings {
    fn default() -> Self {
        Self {
            pull_in_safety: DEFAULT_PULL_IN_SAFETY,
            vibration_allowance: None,
            deflection_mode: DeflectionMode::Linearized,
        }
    }
}

/// Everything a design evaluation consumes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignInputs {
    pub materials: MaterialsBlock,
    pub rules: MemsRuleSet,
    pub beam: BeamBlock,
    pub transducer: TransducerBlock,
    pub pierce: PierceBlock,
    pub constraints: ConstraintSettings,
}

/// Numeric input addressable by sweep axes and `--set`-style overrides.
pub const PARAMETER_PATHS: &[&str] = &[
    "materials.youngs_modulus",
    "materials.density",
    "beam.length",
    "beam.width",
    "beam.thickness",
    "beam.q_factor",
    "transducer.gap",
    "transducer.electrode_length",
    "transducer.bias",
    "pierce.c1",
    "pierce.c2",
    "pierce.c0",
    "pierce.gm",
    "pierce.target_margin",
    "pierce.target_resistance",
    "rules.min_lateral_gap",
    "rules.max_release_width",
];

impl DesignInputs {
    pub fn set_parameter(&mut self, path: &str, value: f64) -> Result<()> {
        match path {
            "materials.youngs_modulus" => self.materials.youngs_modulus = value,
            "materials.density" => self.materials.density = value,
            "beam.length" => self.beam.length = value,
            "beam.width" => self.beam.width = value,
            "beam.thickness" => self.beam.thickness = Some(value),
            "beam.q_factor" => self.beam.q_factor = value,
            "transducer.gap" => self.transducer.gap = value,
            "transducer.electrode_length" => self.transducer.electrode_length = value,
            "transducer.bias" => self.transducer.bias = value,
            "pierce.c1" => self.pierce.c1 = value,
            "pierce.c2" => self.pierce.c2 = value,
            "pierce.c0" => self.pierce.c0 = value,
            "pierce.gm" => self.pierce.gm = GmSetting::Fixed(value),
            "pierce.target_margin" => self.pierce.target_margin = value,
            "pierce.target_resistance" => self.pierce.target_resistance = Some(value),
            "rules.min_lateral_gap" => self.rules.min_lateral_gap = value,
            "rules.max_release_width" => self.rules.max_release_width = value,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown parameter path `{other}`; expected one of {}",
                    PARAMETER_PATHS.join(", ")
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// V_P < α·V_pi
    PullIn,
    /// static deflection + vibration allowance ≤ displacement limit
    Deflection,
    /// negative resistance ≥ 3·R_x
    Startup,
    /// no MEMS rule violations
    Rules,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 4] = [
        ConstraintKind::PullIn,
        ConstraintKind::Deflection,
        ConstraintKind::Startup,
        ConstraintKind::Rules,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::PullIn => "pull_in",
            ConstraintKind::Deflection => "deflection",
            ConstraintKind::Startup => "startup",
            ConstraintKind::Rules => "rules",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    /// Normalised excess; positive means violated.
    pub violation: f64,
}

/// One fully evaluated design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignPoint {
    pub inputs: DesignInputs,
    pub laminate: LaminateProperties,
    pub geometry: BeamGeometry,
    pub transducer: Transducer,
    pub model: LumpedBeamModel,
    /// Electromechanical coupling η (N/V).
    pub eta: f64,
    /// Static electrode capacitance (F).
    pub electrode_capacitance: f64,
    pub circuit: EquivalentCircuit,
    pub peak: PeakResistance,
    /// Both transconductance roots for the targeted resistance, if any.
    pub gm_roots: Vec<f64>,
    pub pierce: PierceConfig,
    pub startup: StartupReport,
    /// Best achievable margin Re_max / R_x.
    pub max_margin: f64,
    pub pull_in_voltage: f64,
    /// `None` when the nonlinear solve reports pull-in.
    pub static_deflection: Option<f64>,
    pub spring_softening: f64,
    pub displacement_limit: f64,
    pub rule_violations: Vec<RuleViolation>,
    pub constraints: Vec<ConstraintCheck>,
    pub feasible: bool,
}

impl DesignPoint {
    pub fn constraint(&self, kind: ConstraintKind) -> &ConstraintCheck {
        self.constraints
            .iter()
            .find(|c| c.kind == kind)
            .expect("every constraint kind is evaluated")
    }

    pub fn feasible_under(&self, kinds: &[ConstraintKind]) -> bool {
        kinds.iter().all(|k| self.constraint(*k).passed)
    }

    /// Worst violated constraint among `kinds`, if any.
    pub fn worst_violation(&self, kinds: &[ConstraintKind]) -> Option<ConstraintCheck> {
        self.constraints
            .iter()
            .filter(|c| kinds.contains(&c.kind) && !c.passed)
            .max_by(|a, b| a.violation.total_cmp(&b.violation))
            .copied()
    }
}

pub fn evaluate(inputs: &DesignInputs) -> Result<DesignPoint> {
    // process
    let tech = inputs.materials.technology();
    let laminate = tech
        .laminate_properties(inputs.materials.laminate())
        .map_err(|e| e.at(Stage::Process))?;
    inputs.rules.validate().map_err(|e| e.at(Stage::Process))?;

    // mechanics
    let thickness = inputs.beam.thickness.unwrap_or(laminate.thickness);
    if thickness > laminate.thickness * (1.0 + 1e-12) {
        return Err(Error::input(
            "beam.thickness",
            format!(
                "{thickness:e} m exceeds the {:e} m laminate",
                laminate.thickness
            ),
        )
        .at(Stage::Mechanics));
    }
    let geometry = BeamGeometry::new(
        inputs.beam.anchor,
        inputs.beam.length,
        inputs.beam.width,
        thickness,
    )
    .map_err(|e| e.at(Stage::Mechanics))?;
    let model = beam_model(
        &geometry,
        laminate.youngs_modulus,
        laminate.density,
        inputs.beam.q_factor,
        inputs.beam.mass_model,
    )
    .map_err(|e| e.at(Stage::Mechanics))?;

    // transduction
    let t = &inputs.transducer;
    let transducer = Transducer::new(t.gap, t.electrode_length, thickness, t.bias, t.port)
        .map_err(|e| e.at(Stage::Transduction))?;
    if transducer.electrode_length > geometry.length {
        return Err(Error::input(
            "transducer.electrode_length",
            format!(
                "{:e} m is longer than the {:e} m beam",
                transducer.electrode_length, geometry.length
            ),
        )
        .at(Stage::Transduction));
    }
    let eta = coupling_coefficient(&transducer);
    let circuit = circuit_for(&model, eta).map_err(|e| e.at(Stage::Transduction))?;
    let x_limit = displacement_limit(&transducer);

    let v_pi = pull_in_voltage(model.k(), transducer.gap, transducer.area());
    let mode = inputs.constraints.deflection_mode;
    let static_x = match static_deflection(model.k(), &transducer, mode) {
        Ok(x) => Some(x),
        Err(Error::PullIn { .. }) => None,
        Err(e) => return Err(e.at(Stage::Mechanics)),
    };

    // pierce
    let p = &inputs.pierce;
    let stage = |e: Error| e.at(Stage::Pierce);
    require_positive("pierce.c1", p.c1).map_err(stage)?;
    require_positive("pierce.c2", p.c2).map_err(stage)?;
    require_positive("pierce.c0", p.c0).map_err(stage)?;
    let f0 = circuit.f0();
    let peak = max_negative_resistance(p.c1, p.c2, p.c0, f0);
    let (gm, gm_roots) = match p.gm {
        GmSetting::Fixed(gm) => (gm, Vec::new()),
        GmSetting::Keyword(GmKeyword::Auto) => {
            let target = match p.target_resistance {
                Some(r) => r,
                None => {
                    require_positive("pierce.target_margin", p.target_margin).map_err(stage)?;
                    p.target_margin * circuit.r_x()
                }
            };
            let roots = required_gm(p.c1, p.c2, p.c0, f0, target).map_err(stage)?;
            let gm = match low_root_for(p.c1, p.c2, p.c0, f0, target).map_err(stage)? {
                Some(gm) if p.target_resistance.is_none() => {
                    reach_margin(p, f0, gm, peak.gm_opt, circuit.r_x())
                }
                Some(gm) => gm,
                None => peak.gm_opt,
            };
            (gm, roots)
        }
    };
    let pierce_cfg = PierceConfig::new(p.c1, p.c2, p.c0, gm, f0).map_err(stage)?;
    let neg = negative_resistance(&pierce_cfg);
    let startup = startup_check(neg, circuit.r_x()).map_err(stage)?;

    let rule_violations = check_mems_rules(&geometry, &transducer, &inputs.rules);
    let constraints = constraint_checks(
        inputs,
        &transducer,
        v_pi,
        static_x,
        x_limit,
        &startup,
        &rule_violations,
    );
    let feasible = constraints.iter().all(|c| c.passed);

    Ok(DesignPoint {
        inputs: inputs.clone(),
        laminate,
        geometry,
        transducer,
        model,
        eta,
        electrode_capacitance: electrode_capacitance(&transducer),
        circuit,
        peak,
        gm_roots,
        pierce: pierce_cfg,
        startup,
        max_margin: peak.re_max / circuit.r_x(),
        pull_in_voltage: v_pi,
        static_deflection: static_x,
        spring_softening: spring_softening(&transducer),
        displacement_limit: x_limit,
        rule_violations,
        constraints,
        feasible,
    })
}

/// Step the low root up until the quotient Re/R_x itself clears the target.
fn reach_margin(p: &PierceBlock, f0: f64, mut gm: f64, gm_opt: f64, rx: f64) -> f64 {
    let re = |gm: f64| {
        negative_resistance(&PierceConfig {
            c1: p.c1,
            c2: p.c2,
            c0: p.c0,
            gm,
            f0,
        })
    };
    while re(gm) / rx < p.target_margin && gm < gm_opt {
        gm = gm.next_up();
    }
    gm
}

fn constraint_checks(
    inputs: &DesignInputs,
    transducer: &Transducer,
    v_pi: f64,
    static_x: Option<f64>,
    x_limit: f64,
    startup: &StartupReport,
    violations: &[RuleViolation],
) -> Vec<ConstraintCheck> {
    let alpha = inputs.constraints.pull_in_safety;
    let bias_limit = alpha * v_pi;
    let pull_in = ConstraintCheck {
        kind: ConstraintKind::PullIn,
        passed: transducer.bias < bias_limit,
        value: transducer.bias,
        limit: bias_limit,
        violation: transducer.bias / bias_limit - 1.0,
    };

    let deflection = match static_x {
        Some(x) => {
            let allowance = inputs
                .constraints
                .vibration_allowance
                .unwrap_or((x_limit - x).max(0.0));
            let total = x + allowance;
            ConstraintCheck {
                kind: ConstraintKind::Deflection,
                passed: total <= x_limit,
                value: total,
                limit: x_limit,
                violation: total / x_limit - 1.0,
            }
        }
        None => ConstraintCheck {
            kind: ConstraintKind::Deflection,
            passed: false,
            value: f64::INFINITY,
            limit: x_limit,
            violation: f64::INFINITY,
        },
    };

    let start = ConstraintCheck {
        kind: ConstraintKind::Startup,
        passed: startup.meets_3x,
        value: startup.margin,
        limit: STARTUP_MARGIN,
        violation: 1.0 - startup.margin / STARTUP_MARGIN,
    };

    let rule_excess = violations
        .iter()
        .map(|v| match v.rule {
            RuleKind::MinLateralGap => 1.0 - v.measured / v.limit,
            RuleKind::MaxReleaseWidth => v.measured / v.limit - 1.0,
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let rules = ConstraintCheck {
        kind: ConstraintKind::Rules,
        passed: violations.is_empty(),
        value: violations.len() as f64,
        limit: 0.0,
        violation: if violations.is_empty() {
            -1.0
        } else {
            rule_excess
        },
    };

    vec![pull_in, deflection, start, rules]
}
