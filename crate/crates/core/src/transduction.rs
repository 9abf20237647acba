//! Parallel-plate transducer and series-RLC equivalent circuit.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Result};
use crate::mechanics::{validate_bias, LumpedBeamModel};

/// ε₀ (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854e-12;

/// Allowed vibration amplitude as a fraction of the gap, single shared
/// drive/sense electrode.
pub const ONE_PORT_GAP_FRACTION: f64 = 0.33;
/// Same, with separate electrodes on both sides of the beam.
pub const TWO_PORT_GAP_FRACTION: f64 = 0.11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    #[default]
    OnePort,
    TwoPort,
}

/// Biased parallel-plate drive electrode facing the beam sidewall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transducer {
    /// g (m)
    pub gap: f64,
    /// W_e (m)
    pub electrode_length: f64,
    /// Electrode height (m); equals the beam laminate thickness W.
    pub electrode_height: f64,
    /// V_P (V)
    pub bias: f64,
    pub port: Port,
}

impl Transducer {
    pub fn new(
        gap: f64,
        electrode_length: f64,
        electrode_height: f64,
        bias: f64,
        port: Port,
    ) -> Result<Self> {
        let t = Self {
            gap,
            electrode_length,
            electrode_height,
            bias,
            port,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("transducer.gap", self.gap)?;
        require_positive("transducer.electrode_length", self.electrode_length)?;
        require_positive("transducer.electrode_height", self.electrode_height)?;
        validate_bias(self.bias)
    }

    /// Overlap area W_e·W (m²).
    pub fn area(&self) -> f64 {
        self.electrode_length * self.electrode_height
    }
}

/// η = V_P·ε₀·A/g² (N/V).
pub fn coupling_coefficient(t: &Transducer) -> f64 {
    t.bias * VACUUM_PERMITTIVITY * t.area() / (t.gap * t.gap)
}

/// Static parallel-plate capacitance ε₀·A/g (F).
pub fn electrode_capacitance(t: &Transducer) -> f64 {
    VACUUM_PERMITTIVITY * t.area() / t.gap
}

/// Peak displacement budget for the drive configuration (m).
pub fn displacement_limit(t: &Transducer) -> f64 {
    let fraction = match t.port {
        Port::OnePort => ONE_PORT_GAP_FRACTION,
        Port::TwoPort => TWO_PORT_GAP_FRACTION,
    };
    fraction * t.gap
}

/// R_x = k/(ω₀·Q·η²) (Ω).
pub fn motional_resistance(k: f64, f0: f64, q: f64, eta: f64) -> f64 {
    k / (2.0 * PI * f0 * q * eta * eta)
}

/// Series R-L-C equivalent of the resonator seen at the electrode.
///
/// Constructed only through [`extract_circuit`] or [`EquivalentCircuit::from_rlc`],
/// both of which derive f0 and Q from the element values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalentCircuit {
    r_x: f64,
    l_x: f64,
    c_x: f64,
    f0: f64,
    q: f64,
}

impl EquivalentCircuit {
    /// Build from element values. `r_x = 0` is allowed (lossless branch, Q = ∞).
    pub fn from_rlc(r_x: f64, l_x: f64, c_x: f64) -> Result<Self> {
        require_non_negative("r_x", r_x)?;
        require_positive("l_x", l_x)?;
        require_positive("c_x", c_x)?;
        let f0 = 1.0 / (2.0 * PI * (l_x * c_x).sqrt());
        let q = (l_x / c_x).sqrt() / r_x;
        Ok(Self {
            r_x,
            l_x,
            c_x,
            f0,
            q,
        })
    }

    /// Motional resistance (Ω).
    pub fn r_x(&self) -> f64 {
        self.r_x
    }

    /// Motional inductance (H).
    pub fn l_x(&self) -> f64 {
        self.l_x
    }

    /// Motional capacitance (F).
    pub fn c_x(&self) -> f64 {
        self.c_x
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.f0
    }

    /// Recover (k, m) given the coupling coefficient that produced this circuit.
    pub fn mechanical(&self, eta: f64) -> (f64, f64) {
        (eta * eta / self.c_x, self.l_x * eta * eta)
    }
}

/// L_x = m/η², C_x = η²/k, R_x from the motional-resistance relation.
pub fn extract_circuit(k: f64, m: f64, q: f64, eta: f64) -> Result<EquivalentCircuit> {
    require_positive("k", k)?;
    require_positive("m", m)?;
    require_positive("q", q)?;
    require_positive("eta", eta)?;
    let eta2 = eta * eta;
    let l_x = m / eta2;
    let c_x = eta2 / k;
    let f0 = (k / m).sqrt() / (2.0 * PI);
    Ok(EquivalentCircuit {
        r_x: motional_resistance(k, f0, q, eta),
        l_x,
        c_x,
        f0,
        q,
    })
}

/// Convenience wrapper over [`extract_circuit`] for an assembled beam model.
pub fn circuit_for(model: &LumpedBeamModel, eta: f64) -> Result<EquivalentCircuit> {
    extract_circuit(model.k(), model.m(), model.q(), eta)
}

/// Z(f) = R_x + j(ωL_x − 1/(ωC_x)).
pub fn series_impedance(ec: &EquivalentCircuit, f: f64) -> Complex64 {
    let w = 2.0 * PI * f;
    Complex64::new(ec.r_x, w * ec.l_x - 1.0 / (w * ec.c_x))
}

/// Motional current amplitude η·ω₀·x for a displacement amplitude x (A).
pub fn motional_current(eta: f64, f0: f64, x_amp: f64) -> f64 {
    eta * 2.0 * PI * f0 * x_amp
}
