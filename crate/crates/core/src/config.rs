//! Project configuration: JSON with strict keys, SI units, and dotted-path
//! overrides applied before the schema check.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::explore::{
    BeamBlock, ConstraintSettings, DesignInputs, GmSetting, MaterialsBlock, PierceBlock, SweepSpec,
    TransducerBlock, DEFAULT_GRID_CAP, DEFAULT_PULL_IN_SAFETY,
};
use crate::mechanics::DeflectionMode;
use crate::process::MemsRuleSet;
use crate::simulate::{SimConfig, MIN_CYCLES, MIN_STEPS_PER_CYCLE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimBlock {
    /// Simulated span in resonator periods; ignored when `duration` is set.
    pub cycles: f64,
    /// RK4 steps per period; ignored when `dt` is set.
    pub steps_per_cycle: f64,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub seed: u64,
    pub initial_kick: f64,
    pub v_limit: f64,
    pub r_feedback: f64,
    pub r_output: f64,
    pub record_every: usize,
}

impl Default for SimBlock {
    fn default() -> Self {
        Self {
            cycles: 6000.0,
            steps_per_cycle: MIN_STEPS_PER_CYCLE,
            dt: None,
            duration: None,
            seed: 0,
            initial_kick: SimConfig::DEFAULT_KICK,
            v_limit: SimConfig::DEFAULT_V_LIMIT,
            r_feedback: SimConfig::DEFAULT_R_FEEDBACK,
            r_output: SimConfig::DEFAULT_R_OUTPUT,
            record_every: 4,
        }
    }
}

impl SimBlock {
    pub fn to_sim_config(&self, f0: f64) -> SimConfig {
        SimConfig {
            dt: self.dt.unwrap_or(1.0 / (self.steps_per_cycle * f0)),
            duration: self.duration.unwrap_or(self.cycles / f0),
            noise_seed: self.seed,
            initial_kick: self.initial_kick,
            v_limit: self.v_limit,
            r_feedback: self.r_feedback,
            r_output: self.r_output,
            record_every: self.record_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreBlock {
    pub pull_in_safety: f64,
    pub vibration_allowance: Option<f64>,
    pub deflection_mode: DeflectionMode,
    pub grid_cap: u64,
    /// Sweep/optimize spec used when none is given on the command line.
    pub spec: Option<SweepSpec>,
}

impl Default for ExploreBlock {
    fn default() -> Self {
        Self {
            pull_in_safety: DEFAULT_PULL_IN_SAFETY,
            vibration_allowance: None,
            deflection_mode: DeflectionMode::Linearized,
            grid_cap: DEFAULT_GRID_CAP,
            spec: None,
        }
    }
}

/// Full configuration. Every block is optional; an empty object is design #1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectConfig {
    pub materials: MaterialsBlock,
    pub rules: MemsRuleSet,
    pub beam: BeamBlock,
    pub transducer: TransducerBlock,
    pub pierce: PierceBlock,
    pub sim: SimBlock,
    pub explore: ExploreBlock,
}

/// Parse `path=value`. The value is read as JSON when it parses, otherwise
/// as a bare string (so `beam.anchor=clamped_clamped` works).
pub fn parse_assignment(assignment: &str) -> Result<(String, Value)> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidSpec(format!("override `{assignment}` is not path=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::InvalidSpec(format!(
            "override path `{path}` is malformed"
        )));
    }
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path.to_string(), value))
}

/// Set a dotted path inside a JSON object, creating intermediate objects.
pub fn apply_override(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = doc;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::InvalidSpec(format!(
                "override `{path}`: `{key}` is not inside an object"
            ))
        })?;
        if parts.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one part")
}

fn check(cond: bool, path: &str, what: &str, v: f64) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "{path} must be {what}, got {v}"
        )))
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v > 0.0, path, "positive", v)
}

impl ProjectConfig {
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("config is not valid JSON: {e}")))?;
        if !doc.is_object() {
            return Err(Error::InvalidSpec("config must be a JSON object".into()));
        }
        for o in overrides {
            let (path, value) = parse_assignment(o)?;
            apply_override(&mut doc, &path, value)?;
        }
        let cfg: ProjectConfig = serde_json::from_value(doc)
            .map_err(|e| Error::InvalidSpec(format!("config schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks on every field; runs before any physics.
    pub fn validate(&self) -> Result<()> {
        let m = &self.materials;
        check(
            (1..=4).contains(&m.top_metal_index),
            "materials.top_metal_index",
            "in 1..=4",
            m.top_metal_index as f64,
        )?;
        positive("materials.youngs_modulus", m.youngs_modulus)?;
        positive("materials.density", m.density)?;
        if let Some(st) = m.stack_thickness {
            for v in st {
                positive("materials.stack_thickness", v)?;
            }
        }
        if let Some(t) = m.metal_thickness {
            positive("materials.metal_thickness", t)?;
        }
        positive("rules.min_lateral_gap", self.rules.min_lateral_gap)?;
        positive("rules.max_release_width", self.rules.max_release_width)?;

        let b = &self.beam;
        positive("beam.length", b.length)?;
        positive("beam.width", b.width)?;
        if let Some(t) = b.thickness {
            positive("beam.thickness", t)?;
        }
        positive("beam.q_factor", b.q_factor)?;

        let t = &self.transducer;
        positive("transducer.gap", t.gap)?;
        positive("transducer.electrode_length", t.electrode_length)?;
        check(
            t.bias.is_finite() && t.bias >= 0.0,
            "transducer.bias",
            "non-negative",
            t.bias,
        )?;

        let p = &self.pierce;
        positive("pierce.c1", p.c1)?;
        positive("pierce.c2", p.c2)?;
        positive("pierce.c0", p.c0)?;
        if let GmSetting::Fixed(gm) = p.gm {
            check(gm.is_finite() && gm >= 0.0, "pierce.gm", "non-negative", gm)?;
        }
        positive("pierce.target_margin", p.target_margin)?;
        if let Some(r) = p.target_resistance {
            positive("pierce.target_resistance", r)?;
        }

        let s = &self.sim;
        positive("sim.cycles", s.cycles)?;
        check(
            s.cycles >= MIN_CYCLES,
            "sim.cycles",
            "at least 50",
            s.cycles,
        )?;
        check(
            s.steps_per_cycle >= MIN_STEPS_PER_CYCLE,
            "sim.steps_per_cycle",
            "at least 200",
            s.steps_per_cycle,
        )?;
        if let Some(dt) = s.dt {
            positive("sim.dt", dt)?;
        }
        if let Some(d) = s.duration {
            positive("sim.duration", d)?;
        }
        check(
            s.initial_kick.is_finite() && s.initial_kick >= 0.0,
            "sim.initial_kick",
            "non-negative",
            s.initial_kick,
        )?;
        positive("sim.v_limit", s.v_limit)?;
        check(
            s.r_feedback > 0.0,
            "sim.r_feedback",
            "positive",
            s.r_feedback,
        )?;
        check(s.r_output > 0.0, "sim.r_output", "positive", s.r_output)?;
        check(
            s.record_every >= 1,
            "sim.record_every",
            "at least 1",
            s.record_every as f64,
        )?;

        let e = &self.explore;
        check(
            e.pull_in_safety > 0.0 && e.pull_in_safety <= 1.0,
            "explore.pull_in_safety",
            "in (0, 1]",
            e.pull_in_safety,
        )?;
        if let Some(a) = e.vibration_allowance {
            check(
                a.is_finite() && a >= 0.0,
                "explore.vibration_allowance",
                "non-negative",
                a,
            )?;
        }
        check(
            e.grid_cap >= 1,
            "explore.grid_cap",
            "at least 1",
            e.grid_cap as f64,
        )?;
        if let Some(spec) = &e.spec {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn design_inputs(&self) -> DesignInputs {
        DesignInputs {
            materials: self.materials.clone(),
            rules: self.rules,
            beam: self.beam.clone(),
            transducer: self.transducer.clone(),
            pierce: self.pierce.clone(),
            constraints: ConstraintSettings {
                pull_in_safety: self.explore.pull_in_safety,
                vibration_allowance: self.explore.vibration_allowance,
                deflection_mode: self.explore.deflection_mode,
            },
        }
    }

    /// Spec with the configured grid cap filled in where the spec has none.
    pub fn with_grid_cap(&self, mut spec: SweepSpec) -> SweepSpec {
        spec.grid_cap.get_or_insert(self.explore.grid_cap);
        spec
    }
}
