//! Lumped single-degree-of-freedom beam model.
//!
//! Stiffness is the static endpoint (cantilever tip) or midpoint (clamped-
//! clamped) stiffness, and the lumped mass is the full beam mass. This pairing
//! is what the reference designs were computed with; the distributed
//! Euler-Bernoulli first mode is available through [`MassModel::Modal`] for
//! comparison and lands roughly 2x higher in frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::transduction::{Transducer, VACUUM_PERMITTIVITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Cantilever,
    ClampedClamped,
}

impl Anchor {
    /// Point-load stiffness coefficient c in k = c·EI/L³.
    pub fn stiffness_coefficient(self) -> f64 {
        match self {
            Anchor::Cantilever => 3.0,
            Anchor::ClampedClamped => 192.0,
        }
    }

    /// First-mode eigenvalue βL of the Euler-Bernoulli beam.
    pub fn first_mode_eigenvalue(self) -> f64 {
        match self {
            Anchor::Cantilever => 1.875_104_068_711_961,
            Anchor::ClampedClamped => 4.730_040_744_862_704,
        }
    }
}

/// Beam dimensions. `width` (H) is the in-plane dimension along the motion,
/// `thickness` (W) is the out-of-plane laminate thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    pub anchor: Anchor,
    /// L (m)
    pub length: f64,
    /// H (m)
    pub width: f64,
    /// W (m)
    pub thickness: f64,
}

impl BeamGeometry {
    pub fn new(anchor: Anchor, length: f64, width: f64, thickness: f64) -> Result<Self> {
        let g = Self {
            anchor,
            length,
            width,
            thickness,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("beam.length", self.length)?;
        require_positive("beam.width", self.width)?;
        require_positive("beam.thickness", self.thickness)?;
        if self.length <= self.width {
            return Err(Error::input(
                "beam.length",
                format!(
                    "length {:e} m must exceed the in-plane width {:e} m",
                    self.length, self.width
                ),
            ));
        }
        Ok(())
    }
}

/// How the lumped mass is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassModel {
    /// m = ρ·W·H·L.
    #[default]
    Lumped,
    /// Effective mass chosen so that the endpoint stiffness reproduces the
    /// Euler-Bernoulli first-mode frequency.
    Modal,
}

/// Stiffness, mass, resonance and Q of the single-mode model.
///
/// f0 is always derived from k and m, so the resonance identity holds by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LumpedBeamModel {
    k: f64,
    m: f64,
    f0: f64,
    q: f64,
}

impl LumpedBeamModel {
    pub fn new(k: f64, m: f64, q: f64) -> Result<Self> {
        require_positive("k", k)?;
        require_positive("m", m)?;
        require_positive("q", q)?;
        Ok(Self {
            k,
            m,
            f0: resonant_frequency(k, m),
            q,
        })
    }

    /// Spring stiffness (N/m).
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Lumped mass (kg).
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Resonance frequency (Hz).
    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.f0
    }
}

/// Second moment of area for lateral bending, I = W·H³/12 (m⁴).
pub fn area_moment(geometry: &BeamGeometry) -> f64 {
    geometry.thickness * geometry.width.powi(3) / 12.0
}

/// Point-load stiffness: 3EI/L³ (cantilever tip) or 192EI/L³ (clamped-clamped
/// midpoint).
pub fn spring_constant(geometry: &BeamGeometry, youngs_modulus: f64) -> f64 {
    geometry.anchor.stiffness_coefficient() * youngs_modulus * area_moment(geometry)
        / geometry.length.powi(3)
}

/// Full beam mass ρ·W·H·L (kg).
pub fn lumped_mass(geometry: &BeamGeometry, density: f64) -> f64 {
    density * geometry.thickness * geometry.width * geometry.length
}

pub fn resonant_frequency(k: f64, m: f64) -> f64 {
    (k / m).sqrt() / (2.0 * PI)
}

/// Euler-Bernoulli first-mode frequency (Hz).
pub fn modal_frequency(geometry: &BeamGeometry, youngs_modulus: f64, density: f64) -> f64 {
    let beta_l = geometry.anchor.first_mode_eigenvalue();
    let area = geometry.thickness * geometry.width;
    let omega = beta_l
        * beta_l
        * (youngs_modulus * area_moment(geometry) / (density * area * geometry.length.powi(4)))
            .sqrt();
    omega / (2.0 * PI)
}

/// Assemble the single-mode model from geometry and material constants.
pub fn beam_model(
    geometry: &BeamGeometry,
    youngs_modulus: f64,
    density: f64,
    q: f64,
    mass_model: MassModel,
) -> Result<LumpedBeamModel> {
    geometry.validate()?;
    require_positive("youngs_modulus", youngs_modulus)?;
    require_positive("density", density)?;
    let k = spring_constant(geometry, youngs_modulus);
    let m = match mass_model {
        MassModel::Lumped => lumped_mass(geometry, density),
        MassModel::Modal => {
            let w = 2.0 * PI * modal_frequency(geometry, youngs_modulus, density);
            k / (w * w)
        }
    };
    LumpedBeamModel::new(k, m, q)
}

/// Parallel-plate pull-in voltage √(8·k·g³ / (27·ε₀·A)).
pub fn pull_in_voltage(k: f64, gap: f64, electrode_area: f64) -> f64 {
    (8.0 * k * gap.powi(3) / (27.0 * VACUUM_PERMITTIVITY * electrode_area)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeflectionMode {
    /// Force evaluated at the rest gap: x = ε₀·A·V²/(2k·g²).
    #[default]
    Linearized,
    /// Solve x = ε₀·A·V²/(2k·(g−x)²) on the stable branch.
    Nonlinear,
}

const DEFLECTION_TOLERANCE: f64 = 1e-15;
const DEFLECTION_MAX_ITERATIONS: usize = 1000;
const DEFLECTION_DAMPING: f64 = 0.5;

/// Static deflection toward the electrode under the DC bias (m).
pub fn static_deflection(k: f64, transducer: &Transducer, mode: DeflectionMode) -> Result<f64> {
    require_positive("k", k)?;
    let g = transducer.gap;
    let force_scale = VACUUM_PERMITTIVITY * transducer.area() * transducer.bias.powi(2) / (2.0 * k);
    match mode {
        DeflectionMode::Linearized => Ok(force_scale / (g * g)),
        DeflectionMode::Nonlinear => {
            let v_pi = pull_in_voltage(k, g, transducer.area());
            if transducer.bias >= v_pi {
                return Err(Error::PullIn {
                    bias: transducer.bias,
                    pull_in: v_pi,
                });
            }
            if force_scale == 0.0 {
                return Ok(0.0);
            }
            let mut x = 0.0_f64;
            for _ in 0..DEFLECTION_MAX_ITERATIONS {
                let target = force_scale / ((g - x) * (g - x));
                let next = x + DEFLECTION_DAMPING * (target - x);
                if (next - x).abs() < DEFLECTION_TOLERANCE {
                    // iterates approach from below; the undamped image is
                    // the closer estimate and never under the linear value
                    return Ok(target);
                }
                x = next;
            }
            Err(Error::NoConvergence {
                iterations: DEFLECTION_MAX_ITERATIONS,
            })
        }
    }
}

/// Electrostatic spring softening k_e = ε₀·A·V²/g³ (N/m).
pub fn spring_softening(transducer: &Transducer) -> f64 {
    VACUUM_PERMITTIVITY * transducer.area() * transducer.bias.powi(2) / transducer.gap.powi(3)
}

/// Resonance after adding `dk` to the stiffness, mass unchanged.
pub fn frequency_shift(model: &LumpedBeamModel, dk: f64) -> Result<f64> {
    let k = model.k() + dk;
    if k <= 0.0 || !k.is_finite() {
        return Err(Error::InvalidPerturbation { k: model.k(), dk });
    }
    Ok(resonant_frequency(k, model.m()))
}

pub(crate) fn validate_bias(bias: f64) -> Result<()> {
    require_non_negative("transducer.bias", bias)
}
