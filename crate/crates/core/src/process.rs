//! CMOS back-end stack to structural material mapping, plus the schematic
//! MEMS layout rules.
//!
//! The released structure is a laminate of aluminium interconnect layers and
//! inter-metal oxide. Choosing which metal acts as the top etch mask fixes the
//! structural thickness; the composite modulus and density are treated as
//! stack-independent effective values.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::mechanics::BeamGeometry;
use crate::transduction::Transducer;

/// Number of metal layers usable as the top mask of a released structure.
pub const MAX_METAL_LAYERS: u8 = 4;

/// Default effective Young's modulus of the metal/oxide laminate (Pa).
pub const DEFAULT_YOUNGS_MODULUS: f64 = 63e9;

/// Default effective laminate density (kg/m³).
///
/// Back-solved from the reference designs' resonance frequencies with the
/// lumped stiffness/mass model; one value fits all three to within 0.1%.
pub const DEFAULT_DENSITY: f64 = 2770.0;

/// Thickness contributed by one metal + dielectric pair (m).
pub const DEFAULT_PAIR_THICKNESS: f64 = 1.2e-6;

/// Which layers make up the released laminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminateSpec {
    /// Index of the metal layer used as the etch mask, 1..=4.
    pub top_metal_index: u8,
    #[serde(default = "default_true")]
    pub include_dielectric: bool,
}

fn default_true() -> bool {
    true
}

impl Default for LaminateSpec {
    fn default() -> Self {
        Self {
            top_metal_index: MAX_METAL_LAYERS,
            include_dielectric: true,
        }
    }
}

/// Effective structural properties of a released laminate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaminateProperties {
    /// Structural thickness W (m).
    pub thickness: f64,
    /// Effective Young's modulus E (Pa).
    pub youngs_modulus: f64,
    /// Effective density ρ (kg/m³).
    pub density: f64,
}

/// Process description: thickness lookup and effective material constants.
///
/// `stack_thickness[i]` is the laminate thickness when metal `i + 1` is the
/// top mask, dielectric included. `metal_thickness` is the per-layer metal
/// share used when the dielectric is excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessTechnology {
    pub stack_thickness: [f64; MAX_METAL_LAYERS as usize],
    pub metal_thickness: f64,
    pub youngs_modulus: f64,
    pub density: f64,
}

impl Default for ProcessTechnology {
    fn default() -> Self {
        // Only the 4-metal value (4.8 µm) is measured; lower stacks assume a
        // uniform 1.2 µm per metal+oxide pair.
        let p = DEFAULT_PAIR_THICKNESS;
        Self {
            stack_thickness: [p, 2.0 * p, 3.0 * p, 4.0 * p],
            metal_thickness: 0.5 * p,
            youngs_modulus: DEFAULT_YOUNGS_MODULUS,
            density: DEFAULT_DENSITY,
        }
    }
}

impl ProcessTechnology {
    pub fn validate(&self) -> Result<()> {
        for &t in &self.stack_thickness {
            require_positive("stack_thickness", t)?;
        }
        if self.stack_thickness.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec(
                "stack thickness must strictly increase with the top metal index".into(),
            ));
        }
        require_positive("metal_thickness", self.metal_thickness)?;
        require_positive("youngs_modulus", self.youngs_modulus)?;
        require_positive("density", self.density)?;
        Ok(())
    }

    pub fn laminate_properties(&self, spec: LaminateSpec) -> Result<LaminateProperties> {
        self.validate()?;
        if !(1..=MAX_METAL_LAYERS).contains(&spec.top_metal_index) {
            return Err(Error::InvalidSpec(format!(
                "top_metal_index must be within 1..={MAX_METAL_LAYERS}, got {}",
                spec.top_metal_index
            )));
        }
        let idx = usize::from(spec.top_metal_index - 1);
        let thickness = if spec.include_dielectric {
            self.stack_thickness[idx]
        } else {
            f64::from(spec.top_metal_index) * self.metal_thickness
        };
        Ok(LaminateProperties {
            thickness,
            youngs_modulus: self.youngs_modulus,
            density: self.density,
        })
    }
}

/// Laminate properties under the default process constants.
pub fn laminate_properties(spec: LaminateSpec) -> Result<LaminateProperties> {
    ProcessTechnology::default().laminate_properties(spec)
}

/// Schematic MEMS release rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemsRuleSet {
    /// Minimum lateral gap the release etch can open (m).
    #[serde(default = "default_min_gap")]
    pub min_lateral_gap: f64,
    /// Widest in-plane feature that still under-etches completely (m).
    #[serde(default = "default_max_release")]
    pub max_release_width: f64,
    /// CMOS areas must be metal-covered. Carried for layout-level tooling;
    /// the geometry-only check below has nothing to measure it against.
    #[serde(default = "default_true")]
    pub require_metal_cover: bool,
}

fn default_min_gap() -> f64 {
    1.2e-6
}

fn default_max_release() -> f64 {
    8e-6
}

impl Default for MemsRuleSet {
    fn default() -> Self {
        Self {
            min_lateral_gap: default_min_gap(),
            max_release_width: default_max_release(),
            require_metal_cover: true,
        }
    }
}

impl MemsRuleSet {
    pub fn validate(&self) -> Result<()> {
        require_positive("min_lateral_gap", self.min_lateral_gap)?;
        require_positive("max_release_width", self.max_release_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    MinLateralGap,
    MaxReleaseWidth,
}

/// One failed rule: what was measured against which limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: RuleKind,
    pub measured: f64,
    pub limit: f64,
}

pub fn check_mems_rules(
    geometry: &BeamGeometry,
    transducer: &Transducer,
    rules: &MemsRuleSet,
) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    if transducer.gap < rules.min_lateral_gap {
        out.push(RuleViolation {
            rule: RuleKind::MinLateralGap,
            measured: transducer.gap,
            limit: rules.min_lateral_gap,
        });
    }
    if geometry.width > rules.max_release_width {
        out.push(RuleViolation {
            rule: RuleKind::MaxReleaseWidth,
            measured: geometry.width,
            limit: rules.max_release_width,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::Anchor;
    use crate::transduction::Port;

    fn beam(width: f64) -> BeamGeometry {
        BeamGeometry::new(Anchor::Cantilever, 100e-6, width, 4.8e-6).unwrap()
    }

    fn transducer(gap: f64) -> Transducer {
        Transducer::new(gap, 75e-6, 4.8e-6, 9.5, Port::OnePort).unwrap()
    }

    #[test]
    fn four_metal_stack() {
        let p = laminate_properties(LaminateSpec::default()).unwrap();
        assert!((p.thickness - 4.8e-6).abs() < 1e-18);
        assert_eq!(p.youngs_modulus, 63e9);
        assert_eq!(p.density, 2770.0);
    }

    #[test]
    fn thickness_increases_with_metal_count() {
        let t: Vec<f64> = (1..=4)
            .map(|i| {
                laminate_properties(LaminateSpec {
                    top_metal_index: i,
                    include_dielectric: true,
                })
                .unwrap()
                .thickness
            })
            .collect();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn metal_only_stack_is_thinner() {
        let with = laminate_properties(LaminateSpec::default()).unwrap();
        let without = laminate_properties(LaminateSpec {
            top_metal_index: 4,
            include_dielectric: false,
        })
        .unwrap();
        assert!(without.thickness < with.thickness);
    }

    #[test]
    fn rejects_unknown_metal_index() {
        for idx in [0, 5, 9] {
            let err = laminate_properties(LaminateSpec {
                top_metal_index: idx,
                include_dielectric: true,
            })
            .unwrap_err();
            assert!(matches!(err, Error::InvalidSpec(_)));
        }
    }

    #[test]
    fn rejects_non_monotone_table() {
        let tech = ProcessTechnology {
            stack_thickness: [1e-6, 3e-6, 2e-6, 4e-6],
            ..Default::default()
        };
        assert!(tech.laminate_properties(LaminateSpec::default()).is_err());
    }

    #[test]
    fn gap_at_minimum_passes() {
        let v = check_mems_rules(&beam(2e-6), &transducer(1.2e-6), &MemsRuleSet::default());
        assert!(v.is_empty());
    }

    #[test]
    fn narrow_gap_is_flagged() {
        let v = check_mems_rules(&beam(2e-6), &transducer(0.6e-6), &MemsRuleSet::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, RuleKind::MinLateralGap);
        assert_eq!(v[0].measured, 0.6e-6);
        assert_eq!(v[0].limit, 1.2e-6);
    }

    #[test]
    fn wide_beam_is_flagged() {
        let rules = MemsRuleSet::default();
        assert!(check_mems_rules(&beam(2e-6), &transducer(1.2e-6), &rules).is_empty());
        let v = check_mems_rules(&beam(9e-6), &transducer(1.2e-6), &rules);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, RuleKind::MaxReleaseWidth);
    }

    #[test]
    fn shrinking_gap_keeps_violation() {
        let rules = MemsRuleSet::default();
        let mut gap = 1.1e-6;
        while gap > 0.1e-6 {
            let v = check_mems_rules(&beam(2e-6), &transducer(gap), &rules);
            assert!(v.iter().any(|v| v.rule == RuleKind::MinLateralGap));
            gap *= 0.8;
        }
    }
}
