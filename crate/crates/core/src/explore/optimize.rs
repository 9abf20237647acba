use serde::Serialize;

use super::design::{DesignInputs, DesignPoint};
use super::sweep::{evaluate_at, sweep, unravel, Axis, Objective, SweepRow, SweepSpec};
use crate::error::{Error, Result};

/// Coarse-grid resolution per axis before the simplex refinement.
const COARSE_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once every vertex is this close to the best (∞-norm).
    pub x_tol: f64,
    /// Stop once the finite objective spread falls below this, relative.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 600,
            x_tol: 1e-10,
            f_tol: 1e-13,
        }
    }
}

/// Minimize `f` from `x0` with an axis-aligned initial simplex of edge
/// `steps`. Infinite values act as rejections. Returns (x, f(x), evals).
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    opts: NelderMeadOptions,
) -> (Vec<f64>, f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut call = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), call(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = call(&x, &mut evals);
        simplex.push((x, fx));
    }

    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let flat = worst.is_finite() && (worst - best) <= opts.f_tol * best.abs().max(1e-300);
        if diameter < opts.x_tol || flat || evals >= opts.max_evals {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let xw = simplex[n].0.clone();
        let xr = lerp(&centroid, &xw, -1.0);
        let fr = call(&xr, &mut evals);

        if fr < best {
            let xe = lerp(&centroid, &xw, -2.0);
            let fe = call(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = lerp(&centroid, &xr, 0.5);
            let fc = call(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &xw, 0.5);
            let fc = call(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            v.0 = lerp(&x_best, &v.0, 0.5);
            v.1 = call(&v.0, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, evals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Grid,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub phase: Phase,
    pub evaluation: usize,
    pub params: Vec<f64>,
    pub objective: Option<f64>,
    pub feasible: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeOutcome {
    pub objective: Objective,
    pub params: Vec<(String, f64)>,
    pub objective_value: f64,
    /// Best feasible objective on the coarse grid.
    pub grid_objective_value: f64,
    pub best: DesignPoint,
    pub log: Vec<LogEntry>,
}

fn log_row(phase: Phase, evaluation: usize, row: &SweepRow) -> LogEntry {
    LogEntry {
        phase,
        evaluation,
        params: row.params.iter().map(|(_, v)| *v).collect(),
        objective: row.objective,
        feasible: row.feasible,
        note: row.error.clone(),
    }
}

fn infeasible_report(rows: &[SweepRow], spec: &SweepSpec) -> Error {
    let enforced = spec.enforced();
    let closest = rows
        .iter()
        .filter_map(|r| r.point.as_ref())
        .filter_map(|p| p.worst_violation(&enforced))
        .min_by(|a, b| a.violation.total_cmp(&b.violation));
    match closest {
        Some(c) => Error::InfeasibleProblem {
            constraint: c.kind.name().to_string(),
            violation: c.violation,
        },
        None => Error::InfeasibleProblem {
            constraint: rows
                .iter()
                .find_map(|r| r.error.clone())
                .map_or_else(|| "evaluation".into(), |e| format!("evaluation ({e})")),
            violation: f64::INFINITY,
        },
    }
}

/// Coarse grid over the spec axes, then Nelder–Mead in normalised
/// coordinates from the best feasible grid point. Infeasible and failing
/// evaluations are rejected; the result is never worse than the grid.
pub fn optimize(base: &DesignInputs, spec: &SweepSpec) -> Result<OptimizeOutcome> {
    if spec.axes.is_empty() {
        return Err(Error::InvalidSpec(
            "optimization needs at least one axis".into(),
        ));
    }
    let coarse = SweepSpec {
        axes: spec
            .axes
            .iter()
            .map(|a| Axis {
                steps: a.steps.min(COARSE_STEPS),
                ..a.clone()
            })
            .collect(),
        ..spec.clone()
    };
    coarse.validate()?;
    let rows = sweep(base, &coarse)?;
    let mut log: Vec<LogEntry> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| log_row(Phase::Grid, i, r))
        .collect();

    let objective = spec.objective;
    let grid_best = rows
        .iter()
        .filter(|r| r.feasible)
        .min_by(|a, b| {
            let sa = objective.score(a.point.as_ref().unwrap());
            let sb = objective.score(b.point.as_ref().unwrap());
            sa.total_cmp(&sb)
        })
        .ok_or_else(|| infeasible_report(&rows, spec))?;

    let steps: Vec<usize> = coarse.axes.iter().map(|a| a.steps).collect();
    let u0: Vec<f64> = unravel(grid_best.index, &steps)
        .iter()
        .zip(&steps)
        .map(|(&i, &n)| i as f64 / (n - 1) as f64)
        .collect();
    let h: Vec<f64> = u0
        .iter()
        .zip(&steps)
        .map(|(&u, &n)| {
            let h = 0.5 / (n - 1) as f64;
            if u + h > 1.0 {
                -h
            } else {
                h
            }
        })
        .collect();

    let mut best_row = grid_best.clone();
    let grid_score = objective.score(grid_best.point.as_ref().unwrap());
    let mut best_score = grid_score;
    let mut counter = log.len();
    let cost = |u: &[f64]| -> f64 {
        counter += 1;
        if u.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            log.push(LogEntry {
                phase: Phase::Refine,
                evaluation: counter - 1,
                params: u
                    .iter()
                    .zip(&coarse.axes)
                    .map(|(&v, a)| a.value_at(v))
                    .collect(),
                objective: None,
                feasible: false,
                note: Some("outside bounds".into()),
            });
            return f64::INFINITY;
        }
        let values: Vec<f64> = u
            .iter()
            .zip(&coarse.axes)
            .map(|(&v, a)| a.value_at(v))
            .collect();
        let row = evaluate_at(base, &coarse.axes, &values, spec, counter - 1);
        log.push(log_row(Phase::Refine, counter - 1, &row));
        if !row.feasible {
            return f64::INFINITY;
        }
        let s = objective.score(row.point.as_ref().unwrap());
        if s < best_score {
            best_score = s;
            best_row = row;
        }
        s
    };
    let opts = NelderMeadOptions {
        max_evals: 300 * (u0.len() + 1),
        ..NelderMeadOptions::default()
    };
    nelder_mead(cost, &u0, &h, opts);

    let best = best_row.point.expect("feasible rows carry a point");
    Ok(OptimizeOutcome {
        objective,
        params: best_row.params,
        objective_value: objective.value(&best),
        grid_objective_value: objective.value(grid_best.point.as_ref().unwrap()),
        best,
        log,
    })
}
