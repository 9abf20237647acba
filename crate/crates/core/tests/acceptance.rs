use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use memsosc::config::ProjectConfig;
use memsosc::explore::{
    evaluate, optimize, sweep, Axis, AxisScale, DesignPoint, Objective, SweepSpec,
};
use memsosc::pierce::{
    low_root_for, max_negative_resistance, negative_resistance, startup_check, PierceConfig,
};
use memsosc::reference::bundled_project;
use memsosc::simulate::{
    envelope, growth_rate, measure_frequency, settling_drift, simulate_startup, summarize,
    PierceLoop, RunStatus, SimConfig,
};
use memsosc::transduction::{extract_circuit, EquivalentCircuit};

// published reference values, SI
const F0: [f64; 3] = [75.9e3, 105.4e3, 303.6e3];
const V_PI: [f64; 3] = [9.8, 9.7, 26.9];
const Z_DEFLECTION: [f64; 3] = [161.1e-9, 171.2e-9, 22.0e-9];
const R_X: [f64; 3] = [717.0e3, 737.6e3, 1008.3e3];
const L_X: [f64; 3] = [6013.7, 5011.5, 2642.8];
const C_X: [f64; 3] = [731.1e-18, 454.8e-18, 104e-18];
const RE_MAX: [f64; 3] = [103.8e6, 74.7e6, 25.9e6];
const RE_OPERATING: [f64; 3] = [64.7e6, 33.6e6, 4.7e6];

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} [{id}] {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn design(id: u8) -> (ProjectConfig, DesignPoint) {
    let cfg = bundled_project(id, &[]).expect("bundled config");
    let p = evaluate(&cfg.design_inputs()).expect("design evaluates");
    (cfg, p)
}

fn cells(
    r: &mut Report,
    id: &str,
    name: &str,
    published: &[f64; 3],
    tol: &[f64; 3],
    computed: impl Fn(&DesignPoint) -> f64,
) {
    for d in 0..3 {
        let (_, p) = design(d as u8 + 1);
        let c = computed(&p);
        let e = rel(c, published[d]);
        r.check(
            id,
            e <= tol[d],
            format!(
                "design #{} {name}: computed {c:.6e} vs {:.6e}, rel err {e:.3e} (tol {})",
                d + 1,
                published[d],
                tol[d]
            ),
        );
    }
}

fn criterion_1_to_5(r: &mut Report) {
    cells(r, "1", "f0", &F0, &[0.002; 3], |p| p.model.f0());
    cells(r, "2", "V_pi", &V_PI, &[0.015; 3], |p| p.pull_in_voltage);
    cells(
        r,
        "3",
        "z-deflection",
        &Z_DEFLECTION,
        &[0.03, 0.005, 0.005],
        |p| p.static_deflection.unwrap(),
    );
    cells(r, "4", "R_x", &R_X, &[0.01; 3], |p| p.circuit.r_x());
    cells(r, "4", "L_x", &L_X, &[0.01; 3], |p| p.circuit.l_x());
    cells(r, "4", "C_x", &C_X, &[0.01; 3], |p| p.circuit.c_x());
    cells(r, "5", "Re(Z_c,max)", &RE_MAX, &[0.01; 3], |p| {
        p.peak.re_max
    });
}

fn criterion_6(r: &mut Report) {
    for (d, &re) in RE_OPERATING.iter().enumerate() {
        let (_, p) = design(d as u8 + 1);
        let verdict = startup_check(re, p.circuit.r_x()).unwrap();
        let reachable = re <= p.peak.re_max;
        r.check(
            "6",
            verdict.meets_3x && reachable,
            format!(
                "design #{} at Re(Z_c) = {:.1} MOhm: margin {:.2}, reachable (<= Re_max {:.2} MOhm): {reachable}",
                d + 1,
                re * 1e-6,
                verdict.margin,
                p.peak.re_max * 1e-6
            ),
        );
        if d == 0 {
            let expected = 64.7e6 / 717e3;
            r.check(
                "6",
                rel(verdict.margin, expected) < 0.01,
                format!(
                    "design #1 margin {:.2} vs 64.7 MOhm / 717 kOhm = {expected:.2}",
                    verdict.margin
                ),
            );
        }
    }
}

fn criterion_7(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_res = 0.0_f64;
    let mut worst_q = 0.0_f64;
    for _ in 0..1000 {
        let k = 10f64.powf(rng.gen_range(-2.0..3.0));
        let m = 10f64.powf(rng.gen_range(-14.0..-9.0));
        let q = 10f64.powf(rng.gen_range(0.0..5.0));
        let eta = 10f64.powf(rng.gen_range(-10.0..-6.0));
        let ec = extract_circuit(k, m, q, eta).unwrap();
        let w = 1.0 / (ec.l_x() * ec.c_x()).sqrt();
        worst_res = worst_res.max(rel(w, ec.omega0()));
        worst_q = worst_q.max(rel(ec.r_x() * ec.q(), (ec.l_x() / ec.c_x()).sqrt()));
    }
    r.check(
        "7",
        worst_res <= 1e-9,
        format!("omega0 = 1/sqrt(L_x C_x) over 1000 random sets: worst rel err {worst_res:.2e} (tol 1e-9)"),
    );
    r.check(
        "7",
        worst_q <= 1e-9,
        format!(
            "R_x Q = sqrt(L_x/C_x) over 1000 random sets: worst rel err {worst_q:.2e} (tol 1e-9)"
        ),
    );

    let mut unimodal = true;
    let mut worst_peak = 0.0_f64;
    let mut never_exceeded = true;
    for _ in 0..1000 {
        let c1 = 10f64.powf(rng.gen_range(-13.0..-10.0));
        let c2 = 10f64.powf(rng.gen_range(-13.0..-10.0));
        let c0 = 10f64.powf(rng.gen_range(-16.0..-12.0));
        let f0 = 10f64.powf(rng.gen_range(3.0..7.0));
        let peak = max_negative_resistance(c1, c2, c0, f0);
        let at = |gm: f64| negative_resistance(&PierceConfig { c1, c2, c0, gm, f0 });
        worst_peak = worst_peak.max(rel(at(peak.gm_opt), peak.re_max));
        let samples: Vec<f64> = (0..=80)
            .map(|i| peak.gm_opt * 10f64.powf(-4.0 + 0.1 * i as f64))
            .collect();
        let values: Vec<f64> = samples.iter().map(|&g| at(g)).collect();
        let split = samples.partition_point(|&g| g < peak.gm_opt);
        unimodal &= values[..split].windows(2).all(|w| w[1] > w[0]);
        unimodal &= values[split..].windows(2).all(|w| w[1] < w[0]);
        never_exceeded &= values.iter().all(|&v| v <= peak.re_max * (1.0 + 1e-12));
    }
    r.check(
        "7",
        unimodal && never_exceeded,
        "negative resistance rises strictly below gm_opt, falls strictly above, never exceeds Re_max (1000 random sets)".into(),
    );
    r.check(
        "7",
        worst_peak <= 1e-12,
        format!("Re(gm_opt) = Re_max: worst rel err {worst_peak:.2e} (tol 1e-12)"),
    );
}

fn run(
    ec: &EquivalentCircuit,
    p: &DesignPoint,
    gm: f64,
    sim: &SimConfig,
) -> memsosc::simulate::Trace {
    let cfg = p.pierce.with_gm(gm);
    simulate_startup(ec, &cfg, sim, p.eta, p.displacement_limit).expect("simulation runs")
}

fn criterion_8(r: &mut Report) {
    let (cfg, p) = design(1);
    let ec = p.circuit;
    let sim = cfg.sim.to_sim_config(ec.f0());
    let trace = run(&ec, &p, p.pierce.gm, &sim);
    let summary = summarize(&trace, &ec, p.eta, sim.v_limit);
    let env = envelope(&trace).unwrap();
    let first = env.first().unwrap().amplitude;
    let last = env.last().unwrap().amplitude;
    r.check(
        "8",
        summary.status == RunStatus::Oscillating && last > 1e3 * first,
        format!(
            "design #1 grows from seeded noise: envelope {first:.3e} V -> {last:.3e} V, status {:?}",
            summary.status
        ),
    );
    let drift = settling_drift(&env, 250).unwrap();
    r.check(
        "8",
        !trace.pulled_in && drift.abs() < 0.01,
        format!(
            "stabilizes: envelope drift over the last 250 cycles {:.3}% (tol 1%), pulled in: {}",
            drift * 100.0,
            trace.pulled_in
        ),
    );
    let f = measure_frequency(&trace, 20).unwrap();
    r.check(
        "8",
        rel(f, ec.f0()) < 0.01,
        format!(
            "steady-state frequency {f:.1} Hz vs f0 {:.1} Hz (tol 1%)",
            ec.f0()
        ),
    );
    let predicted = (p.startup.neg_resistance - ec.r_x()) / (2.0 * ec.l_x());
    let measured = growth_rate(&trace, sim.v_limit).unwrap();
    r.check(
        "8",
        rel(measured, predicted) < 0.10,
        format!(
            "small-signal growth {measured:.1} 1/s vs (|Re(Z_C)| - R_x)/(2 L_x) = {predicted:.1} 1/s (tol 10%)"
        ),
    );

    let weak_gm = low_root_for(
        p.pierce.c1,
        p.pierce.c2,
        p.pierce.c0,
        ec.f0(),
        0.9 * ec.r_x(),
    )
    .unwrap()
    .unwrap();
    let weak_sim = SimConfig {
        duration: 2000.0 / ec.f0(),
        ..sim
    };
    let weak = run(&ec, &p, weak_gm, &weak_sim);
    let weak_env = envelope(&weak).unwrap();
    let (w0, w1) = (weak_env[0].amplitude, weak_env.last().unwrap().amplitude);
    let weak_status = summarize(&weak, &ec, p.eta, sim.v_limit).status;
    r.check(
        "8",
        weak_status == RunStatus::Decayed && w1 < w0,
        format!("margin 0.9 decays: envelope {w0:.3e} V -> {w1:.3e} V, status {weak_status:?}"),
    );

    let lossless = EquivalentCircuit::from_rlc(0.0, ec.l_x(), ec.c_x()).unwrap();
    let passive = p.pierce.with_gm(0.0);
    let open = SimConfig {
        r_feedback: f64::INFINITY,
        r_output: f64::INFINITY,
        ..SimConfig::for_frequency(ec.f0(), 200.0)
    };
    let model = PierceLoop::new(&lossless, &passive, &open);
    let mut s = [1e-9, 0.0, 1e-3, -1e-3];
    let e0 = model.stored_energy(&s);
    let mut worst = 0.0_f64;
    for _ in 0..(open.duration / open.dt).round() as usize {
        s = model.rk4_step(&s, open.dt);
        worst = worst.max(rel(model.stored_energy(&s), e0));
    }
    r.check(
        "8",
        worst < 1e-3,
        format!(
            "lossless integrator energy drift over 200 cycles {:.2e} (tol 1e-3)",
            worst
        ),
    );

    let seeded = SimConfig {
        noise_seed: 7,
        duration: 300.0 / ec.f0(),
        ..sim
    };
    let a = run(&ec, &p, p.pierce.gm, &seeded);
    let b = run(&ec, &p, p.pierce.gm, &seeded);
    let identical = a.time.len() == b.time.len()
        && [(&a.v_in, &b.v_in), (&a.v_out, &b.v_out), (&a.x, &b.x)]
            .iter()
            .all(|(u, v)| {
                u.iter()
                    .zip(v.iter())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            });
    r.check("8", identical, "seed 7 rerun is bit-identical".into());
}

fn axis(path: &str, min: f64, max: f64, steps: usize) -> Axis {
    Axis {
        path: path.into(),
        min,
        max,
        steps,
        scale: AxisScale::Linear,
    }
}

fn criterion_9(r: &mut Report) {
    let (_, d2) = design(2);
    let spec = SweepSpec {
        axes: vec![
            axis("beam.length", 60e-6, 100e-6, 2),
            axis("beam.width", 1e-6, 2e-6, 2),
        ],
        objective: Objective::MaxF0,
        constraints: None,
        grid_cap: None,
    };
    let rows = sweep(&d2.inputs, &spec).unwrap();
    let f0_at = |i: usize| rows[i].point.as_ref().unwrap().model.f0();
    // grid order: (60,1) (60,2) (100,1) (100,2)
    let (short, long) = (f0_at(0), f0_at(3));
    r.check(
        "9",
        rows.len() == 4 && rel(short, F0[1]) < 0.002 && rel(long, F0[0]) < 0.002,
        format!(
            "2-point L x H sweep endpoints: (60 um, 1 um) -> {:.2} kHz vs 105.4, (100 um, 2 um) -> {:.2} kHz vs 75.9 (tol 0.2%)",
            short * 1e-3,
            long * 1e-3
        ),
    );

    let (_, d1) = design(1);
    let spec = SweepSpec {
        axes: vec![axis("transducer.bias", 1.0, 12.0, 41)],
        objective: Objective::MinRx,
        constraints: None,
        grid_cap: None,
    };
    let out = optimize(&d1.inputs, &spec).unwrap();
    let bound = 0.97 * d1.pull_in_voltage;
    let vp = out.params[0].1;
    r.check(
        "9",
        vp < bound && rel(vp, bound) < 1e-6 && out.best.feasible,
        format!(
            "min_Rx over V_P: optimum {vp:.6} V vs bound 0.97 V_pi = {bound:.6} V (tol 1e-6 rel)"
        ),
    );

    let mut base = d1.inputs.clone();
    base.transducer.electrode_length = 45e-6;
    let spec = SweepSpec {
        axes: vec![axis("beam.length", 60e-6, 100e-6, 41)],
        objective: Objective::MaxF0,
        constraints: None,
        grid_cap: None,
    };
    let out = optimize(&base, &spec).unwrap();
    let l = out.params[0].1;
    let not_worse = out.objective_value >= out.grid_objective_value;
    r.check(
        "9",
        (l - 60e-6).abs() < 1e-12 && not_worse,
        format!(
            "max_f0 over L: optimum {:.4} um vs bound 60 um, f0 {:.2} kHz (grid best {:.2} kHz)",
            l * 1e6,
            out.objective_value * 1e-3,
            out.grid_objective_value * 1e-3
        ),
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    criterion_1_to_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    println!("{} failing check(s)", r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}
