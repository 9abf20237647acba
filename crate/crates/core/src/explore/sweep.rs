use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{evaluate, ConstraintKind, DesignInputs, DesignPoint, PARAMETER_PATHS};
use crate::error::{Error, Result, Stage};

pub const DEFAULT_GRID_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted input path, e.g. `beam.length`.
    pub path: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    #[serde(default)]
    pub scale: AxisScale,
}

impl Axis {
    pub fn validate(&self) -> Result<()> {
        if !PARAMETER_PATHS.contains(&self.path.as_str()) {
            return Err(Error::InvalidSpec(format!(
                "axis path `{}` is not a sweepable parameter",
                self.path
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidSpec(format!(
                "axis `{}` needs finite min < max, got [{}, {}]",
                self.path, self.min, self.max
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidSpec(format!(
                "axis `{}` needs at least 2 steps",
                self.path
            )));
        }
        if self.scale == AxisScale::Log && self.min <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "log axis `{}` needs a positive lower bound",
                self.path
            )));
        }
        Ok(())
    }

    /// Map u ∈ [0, 1] onto the axis.
    pub fn value_at(&self, u: f64) -> f64 {
        match self.scale {
            AxisScale::Linear => self.min + u * (self.max - self.min),
            AxisScale::Log => (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp(),
        }
    }

    pub fn grid_value(&self, i: usize, steps: usize) -> f64 {
        if i + 1 == steps {
            return self.max;
        }
        self.value_at(i as f64 / (steps - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize Re_max / R_x.
    #[default]
    #[serde(rename = "startup_margin")]
    StartupMargin,
    /// Minimize R_x.
    #[serde(rename = "min_Rx", alias = "min_rx")]
    MinRx,
    /// Maximize f0.
    #[serde(rename = "max_f0")]
    MaxF0,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::StartupMargin => "startup_margin",
            Objective::MinRx => "min_Rx",
            Objective::MaxF0 => "max_f0",
        }
    }

    /// Reported value in natural units.
    pub fn value(self, p: &DesignPoint) -> f64 {
        match self {
            Objective::StartupMargin => p.max_margin,
            Objective::MinRx => p.circuit.r_x(),
            Objective::MaxF0 => p.model.f0(),
        }
    }

    /// Lower is better.
    pub fn score(self, p: &DesignPoint) -> f64 {
        match self {
            Objective::MinRx => self.value(p),
            _ => -self.value(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub objective: Objective,
    /// Constraints that decide feasibility; all four when absent.
    #[serde(default)]
    pub constraints: Option<Vec<ConstraintKind>>,
    #[serde(default)]
    pub grid_cap: Option<u64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.axes.iter().enumerate() {
            a.validate()?;
            if self.axes[..i].iter().any(|b| b.path == a.path) {
                return Err(Error::InvalidSpec(format!(
                    "axis `{}` listed twice",
                    a.path
                )));
            }
        }
        let size = self.grid_size();
        let cap = self.grid_cap.unwrap_or(DEFAULT_GRID_CAP);
        if size > cap as u128 {
            return Err(Error::GridTooLarge { size, cap });
        }
        Ok(())
    }

    pub fn grid_size(&self) -> u128 {
        self.axes.iter().map(|a| a.steps as u128).product()
    }

    pub fn enforced(&self) -> Vec<ConstraintKind> {
        self.constraints
            .clone()
            .unwrap_or_else(|| ConstraintKind::ALL.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: Vec<(String, f64)>,
    pub point: Option<DesignPoint>,
    /// Evaluation failure, stage-tagged.
    pub error: Option<String>,
    pub feasible: bool,
    pub objective: Option<f64>,
}

/// Row-major multi-index (first axis slowest).
pub(crate) fn unravel(mut index: usize, steps: &[usize]) -> Vec<usize> {
    let mut out = vec![0; steps.len()];
    for (slot, &n) in out.iter_mut().zip(steps).rev() {
        *slot = index % n;
        index /= n;
    }
    out
}

pub(crate) fn evaluate_at(
    base: &DesignInputs,
    axes: &[Axis],
    values: &[f64],
    spec: &SweepSpec,
    index: usize,
) -> SweepRow {
    let enforced = spec.enforced();
    let params: Vec<(String, f64)> = axes
        .iter()
        .zip(values)
        .map(|(a, &v)| (a.path.clone(), v))
        .collect();
    let mut inputs = base.clone();
    let result = params
        .iter()
        .try_for_each(|(p, v)| inputs.set_parameter(p, *v))
        .and_then(|_| evaluate(&inputs));
    match result {
        Ok(point) => SweepRow {
            index,
            feasible: point.feasible_under(&enforced),
            objective: Some(spec.objective.value(&point)),
            params,
            point: Some(point),
            error: None,
        },
        Err(e) => SweepRow {
            index,
            params,
            point: None,
            error: Some(match e {
                Error::Stage { .. } => e.to_string(),
                other => other.at(Stage::Explore).to_string(),
            }),
            feasible: false,
            objective: None,
        },
    }
}

/// Evaluate every grid point; rows come back in grid order whatever the
/// thread count.
pub fn sweep(base: &DesignInputs, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let steps: Vec<usize> = spec.axes.iter().map(|a| a.steps).collect();
    let total = spec.grid_size() as usize;
    Ok((0..total)
        .into_par_iter()
        .map(|index| {
            let idx = unravel(index, &steps);
            let values: Vec<f64> = spec
                .axes
                .iter()
                .zip(&idx)
                .map(|(a, &i)| a.grid_value(i, a.steps))
                .collect();
            evaluate_at(base, &spec.axes, &values, spec, index)
        })
        .collect())
}
