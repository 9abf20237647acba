//! Time-domain startup of the closed Pierce loop.
//!
//! The resonator enters as its series R-L-C equivalent between drain and gate.
//! The amplifier is a tanh-saturating transconductor with C1, C2, C0, a
//! gate-drain feedback resistor and a drain output resistance. Four states are
//! integrated with fixed-step RK4: motional current, motional charge, gate
//! voltage and drain voltage. Beam displacement is recovered as charge/η.

mod analysis;
mod export;

pub use analysis::{
    envelope, envelope_of, growth_rate, log_slope, measure_frequency, settling_drift, summarize,
    EnvelopePoint, RunStatus, SimSummary, DEFAULT_FREQUENCY_WINDOW, SETTLED_DRIFT, SETTLING_WINDOW,
};
pub use export::{trace_svg, write_envelope_csv, write_trace_csv};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::pierce::PierceConfig;
use crate::transduction::EquivalentCircuit;

/// Minimum integration steps per resonator period.
pub const MIN_STEPS_PER_CYCLE: f64 = 200.0;
/// Minimum simulated span in resonator periods.
pub const MIN_CYCLES: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Fixed RK4 step (s).
    pub dt: f64,
    /// Simulated span (s).
    pub duration: f64,
    pub noise_seed: u64,
    /// Scale of the initial gate perturbation (V).
    pub initial_kick: f64,
    /// Transconductor saturation scale (V).
    pub v_limit: f64,
    /// Gate-drain bias resistor (Ω); `f64::INFINITY` removes it.
    pub r_feedback: f64,
    /// Drain-to-ground output resistance (Ω); `f64::INFINITY` removes it.
    pub r_output: f64,
    /// Keep every n-th integration step in the trace.
    pub record_every: usize,
}

impl SimConfig {
    pub const DEFAULT_KICK: f64 = 10e-9;
    pub const DEFAULT_V_LIMIT: f64 = 30e-6;
    pub const DEFAULT_R_FEEDBACK: f64 = 1e9;
    pub const DEFAULT_R_OUTPUT: f64 = 100e6;

    /// Step at the 200-per-cycle bound and a span of `cycles` periods of `f0`.
    pub fn for_frequency(f0: f64, cycles: f64) -> Self {
        Self {
            dt: 1.0 / (MIN_STEPS_PER_CYCLE * f0),
            duration: cycles / f0,
            noise_seed: 0,
            initial_kick: Self::DEFAULT_KICK,
            v_limit: Self::DEFAULT_V_LIMIT,
            r_feedback: Self::DEFAULT_R_FEEDBACK,
            r_output: Self::DEFAULT_R_OUTPUT,
            record_every: 1,
        }
    }

    pub fn validate(&self, f0: f64) -> Result<()> {
        require_positive("sim.dt", self.dt)?;
        require_positive("sim.duration", self.duration)?;
        require_positive("sim.v_limit", self.v_limit)?;
        require_positive("sim.r_feedback", self.r_feedback)
            .or_else(|_| infinite_ok("sim.r_feedback", self.r_feedback))?;
        require_positive("sim.r_output", self.r_output)
            .or_else(|_| infinite_ok("sim.r_output", self.r_output))?;
        if !(self.initial_kick.is_finite() && self.initial_kick >= 0.0) {
            return Err(Error::input("sim.initial_kick", "must be non-negative"));
        }
        if self.record_every == 0 {
            return Err(Error::input("sim.record_every", "must be at least 1"));
        }
        // small slack so that dt = 1/(200 f0) computed elsewhere passes
        let max_dt = 1.0 / (MIN_STEPS_PER_CYCLE * f0);
        if self.dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::input(
                "sim.dt",
                format!("{:e} s exceeds 1/(200·f0) = {max_dt:e} s", self.dt),
            ));
        }
        let min_span = MIN_CYCLES / f0;
        if self.duration < min_span * (1.0 - 1e-12) {
            return Err(Error::input(
                "sim.duration",
                format!(
                    "{:e} s is shorter than 50/f0 = {min_span:e} s",
                    self.duration
                ),
            ));
        }
        Ok(())
    }
}

fn infinite_ok(field: &'static str, v: f64) -> Result<()> {
    if v == f64::INFINITY {
        Ok(())
    } else {
        Err(Error::input(field, format!("must be positive, got {v}")))
    }
}

/// Uniformly sampled startup waveform.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub time: Vec<f64>,
    /// Gate (amplifier input) voltage (V).
    pub v_in: Vec<f64>,
    /// Drain (amplifier output) voltage (V).
    pub v_out: Vec<f64>,
    /// Beam displacement (m).
    pub x: Vec<f64>,
    /// Integration stopped because |x| reached the displacement limit.
    pub pulled_in: bool,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn push(&mut self, t: f64, s: &LoopState, eta: f64) {
        self.time.push(t);
        self.v_in.push(s[V_IN]);
        self.v_out.push(s[V_OUT]);
        self.x.push(s[CHARGE] / eta);
    }
}

/// [motional current, motional charge, v_in, v_out]
pub type LoopState = [f64; 4];

const CURRENT: usize = 0;
const CHARGE: usize = 1;
const V_IN: usize = 2;
const V_OUT: usize = 3;

/// Right-hand side of the closed-loop circuit equations.
#[derive(Debug, Clone, Copy)]
pub struct PierceLoop {
    r_x: f64,
    l_x: f64,
    c_x: f64,
    c1: f64,
    c2: f64,
    c0: f64,
    gm: f64,
    v_limit: f64,
    g_feedback: f64,
    g_output: f64,
    det: f64,
}

impl PierceLoop {
    pub fn new(ec: &EquivalentCircuit, cfg: &PierceConfig, sim: &SimConfig) -> Self {
        let (c1, c2, c0) = (cfg.c1, cfg.c2, cfg.c0);
        Self {
            r_x: ec.r_x(),
            l_x: ec.l_x(),
            c_x: ec.c_x(),
            c1,
            c2,
            c0,
            gm: cfg.gm,
            v_limit: sim.v_limit,
            g_feedback: 1.0 / sim.r_feedback,
            g_output: 1.0 / sim.r_output,
            det: (c1 + c0) * (c2 + c0) - c0 * c0,
        }
    }

    /// Saturating drain current for a gate voltage.
    pub fn drain_current(&self, v_in: f64) -> f64 {
        self.gm * self.v_limit * (v_in / self.v_limit).tanh()
    }

    pub fn derivative(&self, s: &LoopState) -> LoopState {
        let (i, q, v1, v2) = (s[CURRENT], s[CHARGE], s[V_IN], s[V_OUT]);
        let di = (v2 - v1 - self.r_x * i - q / self.c_x) / self.l_x;
        let i_fb = (v2 - v1) * self.g_feedback;
        // net current into each node, then solve the 2x2 capacitance system
        let n1 = i + i_fb;
        let n2 = -i - i_fb - self.drain_current(v1) - v2 * self.g_output;
        let dv1 = ((self.c2 + self.c0) * n1 + self.c0 * n2) / self.det;
        let dv2 = (self.c0 * n1 + (self.c1 + self.c0) * n2) / self.det;
        [di, i, dv1, dv2]
    }

    pub fn rk4_step(&self, s: &LoopState, dt: f64) -> LoopState {
        let add = |a: &LoopState, k: &LoopState, h: f64| -> LoopState {
            std::array::from_fn(|j| a[j] + h * k[j])
        };
        let k1 = self.derivative(s);
        let k2 = self.derivative(&add(s, &k1, 0.5 * dt));
        let k3 = self.derivative(&add(s, &k2, 0.5 * dt));
        let k4 = self.derivative(&add(s, &k3, dt));
        std::array::from_fn(|j| s[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
    }

    /// Energy stored in the inductor and all capacitors (J).
    pub fn stored_energy(&self, s: &LoopState) -> f64 {
        let (i, q, v1, v2) = (s[CURRENT], s[CHARGE], s[V_IN], s[V_OUT]);
        0.5 * self.l_x * i * i
            + 0.5 * q * q / self.c_x
            + 0.5 * self.c1 * v1 * v1
            + 0.5 * self.c2 * v2 * v2
            + 0.5 * self.c0 * (v1 - v2) * (v1 - v2)
    }
}

/// Seeded initial state: gate at `kick` plus uniform noise of the same scale,
/// drain at noise only, resonator at rest.
pub fn initial_state(sim: &SimConfig) -> LoopState {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.noise_seed);
    let a: f64 = rng.gen_range(-0.5..0.5);
    let b: f64 = rng.gen_range(-0.5..0.5);
    [0.0, 0.0, sim.initial_kick * (1.0 + a), sim.initial_kick * b]
}

/// Integrate the loop from seeded noise.
///
/// Stops early with `pulled_in` set once |x| reaches `x_max`.
pub fn simulate_startup(
    ec: &EquivalentCircuit,
    cfg: &PierceConfig,
    sim: &SimConfig,
    eta: f64,
    x_max: f64,
) -> Result<Trace> {
    cfg.validate()?;
    sim.validate(ec.f0())?;
    require_positive("eta", eta)?;
    if x_max.is_nan() || x_max <= 0.0 {
        return Err(Error::input("x_max", "must be positive"));
    }

    let model = PierceLoop::new(ec, cfg, sim);
    let steps = (sim.duration / sim.dt).round() as usize;
    let capacity = steps / sim.record_every + 1;
    let mut trace = Trace {
        time: Vec::with_capacity(capacity),
        v_in: Vec::with_capacity(capacity),
        v_out: Vec::with_capacity(capacity),
        x: Vec::with_capacity(capacity),
        pulled_in: false,
    };

    let mut state = initial_state(sim);
    trace.push(0.0, &state, eta);
    for step in 1..=steps {
        state = model.rk4_step(&state, sim.dt);
        let t = step as f64 * sim.dt;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalInstability { step, time: t });
        }
        let hit = (state[CHARGE] / eta).abs() >= x_max;
        if step % sim.record_every == 0 || hit {
            trace.push(t, &state, eta);
        }
        if hit {
            trace.pulled_in = true;
            break;
        }
    }
    Ok(trace)
}
