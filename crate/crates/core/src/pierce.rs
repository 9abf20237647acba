//! Small-signal Pierce amplifier analysis.
//!
//! Network: transconductor g_m from gate to drain, C1 gate-to-ground, C2
//! drain-to-ground, C0 gate-to-drain. Seen from the resonator terminals the
//! network impedance is
//!
//! ```text
//! Z_C = −(g_m + jω(C1 + C2)) / (ω·(ω·S − j·C0·g_m)),   S = C1C2 + C2C0 + C0C1
//! ```
//!
//! whose real part is negative with magnitude
//! g_m·C1·C2 / ((g_m·C0)² + ω²S²). Everything here reports that magnitude.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Default C1 = C2 (F).
pub const DEFAULT_PIERCE_CAPACITANCE: f64 = 2e-12;
/// Default gate-drain parasitic (F). Fitted to the three reference Re_max values.
pub const DEFAULT_C0: f64 = 10e-15;

/// Required ratio of negative resistance to R_x for reliable startup.
pub const STARTUP_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PierceConfig {
    pub c1: f64,
    pub c2: f64,
    pub c0: f64,
    /// Transconductance (A/V). Zero is accepted and yields a passive network.
    pub gm: f64,
    /// Operating frequency (Hz).
    pub f0: f64,
}

impl PierceConfig {
    pub fn new(c1: f64, c2: f64, c0: f64, gm: f64, f0: f64) -> Result<Self> {
        let cfg = Self { c1, c2, c0, gm, f0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("pierce.c1", self.c1)?;
        require_positive("pierce.c2", self.c2)?;
        require_positive("pierce.c0", self.c0)?;
        require_non_negative("pierce.gm", self.gm)?;
        require_positive("pierce.f0", self.f0)
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.f0
    }

    pub fn with_gm(self, gm: f64) -> Self {
        Self { gm, ..self }
    }
}

fn capacitance_sum(c1: f64, c2: f64, c0: f64) -> f64 {
    c1 * c2 + c2 * c0 + c0 * c1
}

fn resistance_at(c1: f64, c2: f64, c0: f64, w: f64, gm: f64) -> f64 {
    let s = capacitance_sum(c1, c2, c0);
    gm * c1 * c2 / ((gm * c0).powi(2) + (w * s).powi(2))
}

/// |Re(Z_C)| (Ω).
pub fn negative_resistance(cfg: &PierceConfig) -> f64 {
    resistance_at(cfg.c1, cfg.c2, cfg.c0, cfg.omega(), cfg.gm)
}

/// Complex Z_C with its physical (negative) real part.
pub fn impedance(cfg: &PierceConfig) -> Complex64 {
    let w = cfg.omega();
    let s = capacitance_sum(cfg.c1, cfg.c2, cfg.c0);
    let num = -Complex64::new(cfg.gm, w * (cfg.c1 + cfg.c2));
    let den = Complex64::new(w * w * s, -w * cfg.c0 * cfg.gm);
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakResistance {
    /// Largest achievable |Re(Z_C)| (Ω).
    pub re_max: f64,
    /// Transconductance at which it occurs (A/V).
    pub gm_opt: f64,
}

pub fn max_negative_resistance(c1: f64, c2: f64, c0: f64, f0: f64) -> PeakResistance {
    let w = 2.0 * PI * f0;
    let s = capacitance_sum(c1, c2, c0);
    PeakResistance {
        re_max: c1 * c2 / (2.0 * w * c0 * s),
        gm_opt: w * s / c0,
    }
}

/// Transconductances giving |Re(Z_C)| = `target`, ascending.
///
/// Empty when the target exceeds the peak; a single element at the peak itself.
pub fn required_gm(c1: f64, c2: f64, c0: f64, f0: f64, target: f64) -> Result<Vec<f64>> {
    require_positive("target_re", target)?;
    for (field, v) in [("c1", c1), ("c2", c2), ("c0", c0), ("f0", f0)] {
        require_positive(field, v)?;
    }
    let w = 2.0 * PI * f0;
    let s = capacitance_sum(c1, c2, c0);
    // target·C0²·g² − C1C2·g + target·ω²S² = 0
    let a = target * c0 * c0;
    let b = c1 * c2;
    let c = target * (w * s).powi(2);
    let disc = b * b - 4.0 * a * c;
    // disc/b² = 1 − (target/Re_max)², so this band is a ~5e-11 relative
    // neighbourhood of the peak.
    let double_band = 1e-10 * b * b;
    if disc.abs() <= double_band {
        return Ok(vec![w * s / c0]);
    }
    if disc < 0.0 {
        return Ok(Vec::new());
    }
    let q = 0.5 * (b + disc.sqrt());
    Ok(vec![c / q, q / a])
}

/// Lower-power root for `target`, nudged up the rising flank until the
/// forward evaluation is not below `target`.
///
/// `None` when the target is unreachable.
pub fn low_root_for(c1: f64, c2: f64, c0: f64, f0: f64, target: f64) -> Result<Option<f64>> {
    let roots = required_gm(c1, c2, c0, f0, target)?;
    let Some(&root) = roots.first() else {
        return Ok(None);
    };
    let w = 2.0 * PI * f0;
    let peak = max_negative_resistance(c1, c2, c0, f0);
    let mut gm = root;
    for _ in 0..64 {
        if resistance_at(c1, c2, c0, w, gm) >= target || gm >= peak.gm_opt {
            break;
        }
        gm = gm.next_up();
    }
    Ok(Some(gm))
}

/// Startup verdict for a negative resistance against R_x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartupReport {
    pub neg_resistance: f64,
    pub rx: f64,
    pub margin: f64,
    pub meets_3x: bool,
    pub oscillates: bool,
}

pub fn startup_check(neg_resistance: f64, rx: f64) -> Result<StartupReport> {
    require_positive("rx", rx)?;
    require_non_negative("neg_resistance", neg_resistance)?;
    let margin = neg_resistance / rx;
    Ok(StartupReport {
        neg_resistance,
        rx,
        margin,
        // amplitude is stationary at exactly 1
        oscillates: margin > 1.0,
        meets_3x: margin >= STARTUP_MARGIN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocusPoint {
    pub gm: f64,
    /// |Re(Z_C)| (Ω).
    pub resistance: f64,
    /// Im(Z_C) (Ω).
    pub reactance: f64,
}

/// Z_C traced over a set of transconductances. `base.gm` is ignored.
pub fn impedance_locus(base: &PierceConfig, gm_samples: &[f64]) -> Result<Vec<LocusPoint>> {
    gm_samples
        .iter()
        .map(|&gm| {
            if gm <= 0.0 || !gm.is_finite() {
                return Err(Error::input(
                    "gm_samples",
                    format!("sample {gm} is not positive"),
                ));
            }
            let z = impedance(&base.with_gm(gm));
            Ok(LocusPoint {
                gm,
                resistance: -z.re,
                reactance: z.im,
            })
        })
        .collect()
}

/// `n` logarithmically spaced points spanning [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}
