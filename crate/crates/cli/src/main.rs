use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use memsosc::config::ProjectConfig;
use memsosc::explore::{
    evaluate, flatten_point, optimize, sweep, write_rows_csv, DesignPoint, SweepSpec,
};
use memsosc::reference::{bundled_config, reference_report, CellStatus, ComparisonReport};
use memsosc::simulate::{
    envelope, simulate_startup, summarize, trace_svg, write_envelope_csv, write_trace_csv,
};
use memsosc::Error;

#[derive(Parser)]
#[command(
    name = "memsosc",
    version,
    about = "CMOS-MEMS resonator and Pierce oscillator design tool"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON project config. Without it the design #1 defaults apply.
    #[arg(long, global = true, conflicts_with = "design")]
    config: Option<PathBuf>,

    /// Use bundled reference design 1, 2 or 3 as the config.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=3))]
    design: Option<u8>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Noise seed for simulate (overrides sim.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Override a config value, e.g. --set transducer.bias=9 (repeatable).
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one design and report every derived quantity.
    Analyze,
    /// Recompute the published design table and compare cell by cell.
    Table1 {
        /// Laminate density override (kg/m^3) applied to all three designs.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Transient startup simulation of the closed loop.
    Simulate {
        /// Fixed transconductance (A/V) instead of the configured choice.
        #[arg(long)]
        gm: Option<f64>,
        /// Skip the SVG plot.
        #[arg(long)]
        no_svg: bool,
    },
    /// Grid sweep over input parameters.
    Sweep {
        /// Sweep spec JSON; falls back to explore.spec in the config.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Coarse grid plus simplex refinement of one objective.
    Optimize {
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Check the geometry against the MEMS release rules.
    CheckRules,
}

enum Outcome {
    Success,
    /// Infeasible design, failed comparison or refused problem.
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct Inputs {
    config: ProjectConfig,
    /// Canonical JSON the config was built from, for hashing.
    source: String,
}

fn load_config(cli: &Cli, extra: &[String]) -> Result<Inputs> {
    let text = match (&cli.config, cli.design) {
        (Some(path), _) => fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?,
        (None, Some(id)) => bundled_config(id)
            .expect("range-checked by clap")
            .to_string(),
        (None, None) => "{}".to_string(),
    };
    let mut overrides = cli.set.clone();
    overrides.extend_from_slice(extra);
    let config = ProjectConfig::from_json_str(&text, &overrides).context("invalid config")?;
    let source = serde_json::to_string(&config)?;
    Ok(Inputs { config, source })
}

fn load_spec(path: Option<&Path>, config: &ProjectConfig) -> Result<SweepSpec> {
    let spec = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read sweep spec {}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidSpec(format!("sweep spec: {e}")))
                .context("invalid sweep spec")?
        }
        None => config.explore.spec.clone().unwrap_or(SweepSpec {
            axes: Vec::new(),
            objective: Default::default(),
            constraints: None,
            grid_cap: None,
        }),
    };
    Ok(config.with_grid_cap(spec))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

/// Deliver a result either into `--out DIR/name.ext` or onto stdout.
fn emit(cli: &Cli, name: &str, bytes: &[u8]) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join(format!("{name}.{}", cli.format.ext()));
            write_file(&path, bytes)?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Analyze => analyze(cli),
        Command::Table1 { rho } => table1(cli, *rho),
        Command::Simulate { gm, no_svg } => simulate(cli, *gm, *no_svg),
        Command::Sweep { spec } => run_sweep(cli, spec.as_deref()),
        Command::Optimize { spec } => run_optimize(cli, spec.as_deref()),
        Command::CheckRules => check_rules(cli),
    }
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    feasible: bool,
    f0_hz: f64,
    stiffness_n_per_m: f64,
    mass_kg: f64,
    laminate_thickness_m: f64,
    coupling_n_per_v: f64,
    electrode_capacitance_f: f64,
    pull_in_voltage_v: f64,
    static_deflection_m: Option<f64>,
    displacement_limit_m: f64,
    spring_softening_n_per_m: f64,
    r_x_ohm: f64,
    l_x_h: f64,
    c_x_f: f64,
    q: f64,
    re_max_ohm: f64,
    gm_opt_a_per_v: f64,
    gm_a_per_v: f64,
    negative_resistance_ohm: f64,
    startup_margin: f64,
    max_startup_margin: f64,
    point: &'a DesignPoint,
}

fn analysis(p: &DesignPoint) -> AnalyzeReport<'_> {
    AnalyzeReport {
        feasible: p.feasible,
        f0_hz: p.model.f0(),
        stiffness_n_per_m: p.model.k(),
        mass_kg: p.model.m(),
        laminate_thickness_m: p.laminate.thickness,
        coupling_n_per_v: p.eta,
        electrode_capacitance_f: p.electrode_capacitance,
        pull_in_voltage_v: p.pull_in_voltage,
        static_deflection_m: p.static_deflection,
        displacement_limit_m: p.displacement_limit,
        spring_softening_n_per_m: p.spring_softening,
        r_x_ohm: p.circuit.r_x(),
        l_x_h: p.circuit.l_x(),
        c_x_f: p.circuit.c_x(),
        q: p.circuit.q(),
        re_max_ohm: p.peak.re_max,
        gm_opt_a_per_v: p.peak.gm_opt,
        gm_a_per_v: p.pierce.gm,
        negative_resistance_ohm: p.startup.neg_resistance,
        startup_margin: p.startup.margin,
        max_startup_margin: p.max_margin,
        point: p,
    }
}

fn feasibility_note(p: &DesignPoint) {
    for c in p.constraints.iter().filter(|c| !c.passed) {
        eprintln!(
            "infeasible: {} constraint violated (value {:e}, limit {:e})",
            c.kind.name(),
            c.value,
            c.limit
        );
    }
}

fn analyze(cli: &Cli) -> Result<Outcome> {
    let inputs = load_config(cli, &[])?;
    let p = evaluate(&inputs.config.design_inputs())?;
    let bytes = match cli.format {
        Format::Json => to_json(&analysis(&p))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(flatten_point(&p))?;
            w.into_inner()?
        }
    };
    emit(cli, "analysis", &bytes)?;
    feasibility_note(&p);
    Ok(if p.feasible {
        Outcome::Success
    } else {
        Outcome::Failed
    })
}

fn print_table(report: &ComparisonReport) {
    println!(
        "{:<6} {:<13} {:<5} {:>12} {:>12} {:>9} {:>6}  {:<7} note",
        "design", "quantity", "unit", "reference", "computed", "err %", "tol %", "status"
    );
    for r in &report.rows {
        let (unit, scale) = r.quantity.display_unit();
        let status = match r.status {
            CellStatus::Pass => "pass",
            CellStatus::Fail => "FAIL",
            CellStatus::Ungated => "info",
        };
        println!(
            "{:<6} {:<13} {:<5} {:>12.4} {:>12} {:>9} {:>6}  {:<7} {}",
            format!("#{}", r.design),
            r.label,
            unit,
            r.reference * scale,
            r.computed
                .map_or("-".into(), |c| format!("{:.4}", c * scale)),
            r.rel_error
                .map_or("-".into(), |e| format!("{:+.3}", e * 100.0)),
            r.tolerance
                .map_or("-".into(), |t| format!("{:.1}", t * 100.0)),
            status,
            r.note.unwrap_or("")
        );
    }
    let failed = report.failures().count();
    println!(
        "{} of {} gated cells pass",
        report
            .rows
            .iter()
            .filter(|r| r.status == CellStatus::Pass)
            .count(),
        report
            .rows
            .iter()
            .filter(|r| r.status != CellStatus::Ungated)
            .count()
    );
    if failed > 0 {
        println!("{failed} cell(s) outside tolerance");
    }
}

fn table1(cli: &Cli, rho: Option<f64>) -> Result<Outcome> {
    let mut overrides = cli.set.clone();
    if let Some(rho) = rho {
        overrides.push(format!("materials.density={rho}"));
    }
    let report = reference_report(&overrides)?;
    print_table(&report);
    if let Some(dir) = &cli.out {
        ensure_dir(dir)?;
        let path = dir.join(format!("table1.{}", cli.format.ext()));
        let bytes = match cli.format {
            Format::Json => to_json(&report)?,
            Format::Csv => {
                let mut buf = Vec::new();
                report.write_csv(&mut buf)?;
                buf
            }
        };
        write_file(&path, &bytes)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(if report.passed {
        Outcome::Success
    } else {
        Outcome::Failed
    })
}

fn simulate(cli: &Cli, gm: Option<f64>, no_svg: bool) -> Result<Outcome> {
    let mut extra = Vec::new();
    if let Some(seed) = cli.seed {
        extra.push(format!("sim.seed={seed}"));
    }
    if let Some(gm) = gm {
        extra.push(format!("pierce.gm={gm}"));
    }
    let inputs = load_config(cli, &extra)?;
    let p = evaluate(&inputs.config.design_inputs())?;
    let ec = p.circuit;
    let sim = inputs.config.sim.to_sim_config(ec.f0());
    let trace = simulate_startup(&ec, &p.pierce, &sim, p.eta, p.displacement_limit)
        .map_err(|e| e.at(memsosc::Stage::Simulate))?;
    let summary = summarize(&trace, &ec, p.eta, sim.v_limit);
    let env = envelope(&trace).unwrap_or_default();

    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("memsosc-out"));
    ensure_dir(&dir)?;
    let mut buf = Vec::new();
    write_trace_csv(&trace, &mut buf)?;
    write_file(&dir.join("trace.csv"), &buf)?;
    let mut buf = Vec::new();
    write_envelope_csv(&env, &mut buf)?;
    write_file(&dir.join("envelope.csv"), &buf)?;
    if !no_svg {
        write_file(&dir.join("trace.svg"), trace_svg(&trace, &env).as_bytes())?;
    }
    let record = json!({
        "summary": summary,
        "f0_hz": ec.f0(),
        "gm_a_per_v": p.pierce.gm,
        "negative_resistance_ohm": p.startup.neg_resistance,
        "r_x_ohm": ec.r_x(),
        "predicted_growth_rate": (p.startup.neg_resistance - ec.r_x()) / (2.0 * ec.l_x()),
        "sim": sim,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let bytes = to_json(&record)?;
    write_file(&dir.join("summary.json"), &bytes)?;
    io::stdout().write_all(&to_json(&summary)?)?;
    eprintln!("wrote trace files to {}", dir.display());
    Ok(Outcome::Success)
}

fn manifest(cli: &Cli, command: &str, inputs: &Inputs, spec: &SweepSpec) -> Result<Vec<u8>> {
    let spec_json = serde_json::to_string(spec)?;
    let mut h = Sha256::new();
    h.update(inputs.source.as_bytes());
    h.update([0u8]);
    h.update(spec_json.as_bytes());
    let digest: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    to_json(&json!({
        "tool": "memsosc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "inputs_sha256": digest,
        "config": cli.config.as_ref().map(|p| p.display().to_string()),
        "design": cli.design,
        "overrides": cli.set,
        "spec": spec,
    }))
}

/// Refusals and infeasible problems are reported results, not errors.
fn refused(e: &Error) -> bool {
    matches!(
        e,
        Error::GridTooLarge { .. } | Error::InfeasibleProblem { .. }
    )
}

fn run_sweep(cli: &Cli, spec_path: Option<&Path>) -> Result<Outcome> {
    let inputs = load_config(cli, &[])?;
    let spec = load_spec(spec_path, &inputs.config)?;
    let rows = match sweep(&inputs.config.design_inputs(), &spec) {
        Ok(rows) => rows,
        Err(e) if refused(&e) => {
            eprintln!("refused: {e}");
            return Ok(Outcome::Failed);
        }
        Err(e) => return Err(e.into()),
    };
    let bytes = match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_rows_csv(&rows, &mut buf)?;
            buf
        }
        Format::Json => to_json(&rows)?,
    };
    emit(cli, "sweep", &bytes)?;
    if let Some(dir) = &cli.out {
        write_file(
            &dir.join("manifest.json"),
            &manifest(cli, "sweep", &inputs, &spec)?,
        )?;
    }
    let feasible = rows.iter().filter(|r| r.feasible).count();
    eprintln!("{} point(s), {feasible} feasible", rows.len());
    Ok(Outcome::Success)
}

fn run_optimize(cli: &Cli, spec_path: Option<&Path>) -> Result<Outcome> {
    let inputs = load_config(cli, &[])?;
    let spec = load_spec(spec_path, &inputs.config)?;
    if spec.axes.is_empty() {
        bail!("optimize needs a spec with at least one axis (--spec or explore.spec)");
    }
    let out = match optimize(&inputs.config.design_inputs(), &spec) {
        Ok(out) => out,
        Err(e) if refused(&e) => {
            eprintln!("infeasible: {e}");
            return Ok(Outcome::Failed);
        }
        Err(e) => return Err(e.into()),
    };
    let bytes = match cli.format {
        Format::Json => to_json(&json!({
            "objective": out.objective,
            "objective_value": out.objective_value,
            "grid_objective_value": out.grid_objective_value,
            "params": out.params,
            "best": analysis(&out.best),
            "log": out.log,
        }))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["evaluation".to_string(), "phase".to_string()];
            header.extend(spec.axes.iter().map(|a| a.path.clone()));
            header.extend(["objective", "feasible", "note"].map(String::from));
            w.write_record(&header)?;
            for e in &out.log {
                let mut rec = vec![
                    e.evaluation.to_string(),
                    format!("{:?}", e.phase).to_lowercase(),
                ];
                rec.extend(e.params.iter().map(|v| v.to_string()));
                rec.push(e.objective.map(|v| v.to_string()).unwrap_or_default());
                rec.push(e.feasible.to_string());
                rec.push(e.note.clone().unwrap_or_default());
                w.write_record(&rec)?;
            }
            w.into_inner()?
        }
    };
    emit(cli, "optimize", &bytes)?;
    if let Some(dir) = &cli.out {
        write_file(
            &dir.join("manifest.json"),
            &manifest(cli, "optimize", &inputs, &spec)?,
        )?;
    }
    let params: Vec<String> = out
        .params
        .iter()
        .map(|(p, v)| format!("{p}={v:e}"))
        .collect();
    eprintln!(
        "best {} = {:e} at {}",
        out.objective.name(),
        out.objective_value,
        params.join(", ")
    );
    Ok(Outcome::Success)
}

fn check_rules(cli: &Cli) -> Result<Outcome> {
    let inputs = load_config(cli, &[])?;
    let p = evaluate(&inputs.config.design_inputs())?;
    let bytes = match cli.format {
        Format::Json => to_json(&json!({
            "rules": inputs.config.rules,
            "violations": p.rule_violations,
        }))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["rule", "measured", "limit"])?;
            for v in &p.rule_violations {
                w.write_record([
                    serde_json::to_value(v.rule)?
                        .as_str()
                        .unwrap_or("")
                        .to_string(),
                    v.measured.to_string(),
                    v.limit.to_string(),
                ])?;
            }
            w.into_inner()?
        }
    };
    emit(cli, "rules", &bytes)?;
    Ok(if p.rule_violations.is_empty() {
        Outcome::Success
    } else {
        Outcome::Failed
    })
}
