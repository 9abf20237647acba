//! Envelope, frequency and growth measurements on a startup trace.

use serde::Serialize;

use super::Trace;
use crate::error::{Error, Result};
use crate::transduction::EquivalentCircuit;

/// Periods averaged by [`measure_frequency`] unless told otherwise.
pub const DEFAULT_FREQUENCY_WINDOW: usize = 20;

/// Window (cycles) for the settled-envelope test in [`summarize`].
pub const SETTLING_WINDOW: usize = 50;
/// Largest window-to-window envelope change still counted as settled.
pub const SETTLED_DRIFT: f64 = 0.01;

/// Cycles required for a growth-rate fit.
const MIN_GROWTH_CYCLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub amplitude: f64,
}

/// Indices i with s[i-1] < 0 <= s[i].
fn rising_crossings(signal: &[f64]) -> Vec<usize> {
    (1..signal.len())
        .filter(|&i| signal[i - 1] < 0.0 && signal[i] >= 0.0)
        .collect()
}

fn crossing_time(time: &[f64], signal: &[f64], i: usize) -> f64 {
    let (a, b) = (signal[i - 1], signal[i]);
    let frac = -a / (b - a);
    time[i - 1] + frac * (time[i] - time[i - 1])
}

/// Per-cycle peak magnitude of an arbitrary sampled signal.
///
/// Cycles are delimited by rising zero crossings; each peak is refined with a
/// three-point parabola through |signal|.
pub fn envelope_of(time: &[f64], signal: &[f64]) -> Result<Vec<EnvelopePoint>> {
    let crossings = rising_crossings(signal);
    if crossings.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 full cycles, found {} rising zero crossings",
            crossings.len()
        )));
    }
    let points = crossings
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let mut k = start;
            for j in start..end {
                if signal[j].abs() > signal[k].abs() {
                    k = j;
                }
            }
            refine_peak(time, signal, k)
        })
        .collect();
    Ok(points)
}

fn refine_peak(time: &[f64], signal: &[f64], k: usize) -> EnvelopePoint {
    if k == 0 || k + 1 >= signal.len() {
        return EnvelopePoint {
            t: time[k],
            amplitude: signal[k].abs(),
        };
    }
    let (y0, y1, y2) = (signal[k - 1].abs(), signal[k].abs(), signal[k + 1].abs());
    let denom = y0 - 2.0 * y1 + y2;
    if denom >= 0.0 {
        return EnvelopePoint {
            t: time[k],
            amplitude: y1,
        };
    }
    let offset = 0.5 * (y0 - y2) / denom;
    let h = time[k + 1] - time[k];
    EnvelopePoint {
        t: time[k] + offset * h,
        amplitude: y1 - 0.25 * (y0 - y2) * offset,
    }
}

/// Per-cycle peak magnitude of the amplifier output.
pub fn envelope(trace: &Trace) -> Result<Vec<EnvelopePoint>> {
    if trace.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    envelope_of(&trace.time, &trace.v_out)
}

/// Mean frequency over the last `window` periods of the amplifier output (Hz).
pub fn measure_frequency(trace: &Trace, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::input("window", "must be at least 1 cycle"));
    }
    let crossings = rising_crossings(&trace.v_out);
    if crossings.len() < window + 1 {
        return Err(Error::InsufficientData(format!(
            "need {} rising zero crossings, found {}",
            window + 1,
            crossings.len()
        )));
    }
    let tail = &crossings[crossings.len() - window - 1..];
    let first = crossing_time(&trace.time, &trace.v_out, tail[0]);
    let last = crossing_time(&trace.time, &trace.v_out, tail[window]);
    Ok(window as f64 / (last - first))
}

/// Least-squares slope of ln(amplitude) against time (1/s).
pub fn log_slope(points: &[EnvelopePoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two envelope points".into(),
        ));
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.t).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.amplitude.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        let dt = p.t - mean_t;
        sxy += dt * (p.amplitude.ln() - mean_y);
        sxx += dt * dt;
    }
    Ok(sxy / sxx)
}

/// Small-signal exponential growth rate of the gate voltage envelope (1/s).
///
/// Fits the longest run of strictly increasing per-cycle peaks that stay
/// below `0.1 · v_limit`.
pub fn growth_rate(trace: &Trace, v_limit: f64) -> Result<f64> {
    let env = envelope_of(&trace.time, &trace.v_in)?;
    let ceiling = 0.1 * v_limit;
    let mut best: &[EnvelopePoint] = &[];
    let mut start = 0;
    for i in 0..=env.len() {
        let continues = i < env.len()
            && env[i].amplitude < ceiling
            && (i == start || env[i].amplitude > env[i - 1].amplitude);
        if !continues {
            if i - start > best.len() {
                best = &env[start..i];
            }
            start = if i < env.len() && env[i].amplitude < ceiling {
                i
            } else {
                i + 1
            };
        }
    }
    if best.len() < MIN_GROWTH_CYCLES {
        return Err(Error::InsufficientData(format!(
            "no growing small-signal segment of {MIN_GROWTH_CYCLES} cycles (longest {})",
            best.len()
        )));
    }
    log_slope(best)
}

/// Relative change between the mean amplitude of the last `window` cycles and
/// the `window` cycles before them.
pub fn settling_drift(env: &[EnvelopePoint], window: usize) -> Result<f64> {
    if window == 0 || env.len() < 2 * window {
        return Err(Error::InsufficientData(format!(
            "need {} envelope points, have {}",
            2 * window,
            env.len()
        )));
    }
    let mean = |s: &[EnvelopePoint]| s.iter().map(|p| p.amplitude).sum::<f64>() / s.len() as f64;
    let last = mean(&env[env.len() - window..]);
    let prev = mean(&env[env.len() - 2 * window..env.len() - window]);
    Ok((last - prev) / prev)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Envelope has settled.
    Oscillating,
    /// Still growing at the end of the run.
    Growing,
    Decayed,
    PulledIn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub status: RunStatus,
    /// Steady-state frequency (Hz), when oscillating.
    pub frequency: Option<f64>,
    /// Small-signal growth rate (1/s), when a growing segment exists.
    pub growth_rate: Option<f64>,
    /// Relative change of the mean envelope between the last two
    /// [`SETTLING_WINDOW`]-cycle windows.
    pub envelope_drift: Option<f64>,
    /// Last per-cycle peak of v_out (V).
    pub final_amplitude: Option<f64>,
    /// Last per-cycle peak of the beam displacement (m).
    pub final_displacement: Option<f64>,
    /// Motional current amplitude implied by the final displacement (A).
    pub final_motional_current: Option<f64>,
    pub pulled_in: bool,
    pub samples: usize,
}

/// Classify a run and collect its headline measurements.
pub fn summarize(trace: &Trace, ec: &EquivalentCircuit, eta: f64, v_limit: f64) -> SimSummary {
    let env = envelope(trace).ok();
    let final_amplitude = env.as_ref().and_then(|e| e.last()).map(|p| p.amplitude);
    let x_env = envelope_of(&trace.time, &trace.x).ok();
    let final_displacement = x_env.as_ref().and_then(|e| e.last()).map(|p| p.amplitude);

    let growing = env
        .as_ref()
        .map(|e| {
            let early = e.iter().take(3).map(|p| p.amplitude).fold(0.0, f64::max);
            e.last().is_some_and(|p| p.amplitude > early)
        })
        .unwrap_or(false);
    let envelope_drift = env
        .as_ref()
        .and_then(|e| settling_drift(e, SETTLING_WINDOW).ok());
    let status = if trace.pulled_in {
        RunStatus::PulledIn
    } else if growing {
        match envelope_drift {
            Some(d) if d.abs() <= SETTLED_DRIFT => RunStatus::Oscillating,
            _ => RunStatus::Growing,
        }
    } else {
        RunStatus::Decayed
    };
    let frequency = match status {
        RunStatus::Decayed => None,
        _ => measure_frequency(trace, DEFAULT_FREQUENCY_WINDOW).ok(),
    };
    SimSummary {
        status,
        frequency,
        growth_rate: growth_rate(trace, v_limit).ok(),
        envelope_drift,
        final_amplitude,
        final_displacement,
        final_motional_current: final_displacement
            .map(|x| crate::transduction::motional_current(eta, ec.f0(), x)),
        pulled_in: trace.pulled_in,
        samples: trace.len(),
    }
}
