use std::io::Write;

use serde::Serialize;

use super::design::{ConstraintKind, DesignPoint};
use super::sweep::SweepRow;
use crate::error::Result;

/// Headline numbers of one design, one scalar per field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatRow {
    pub f0: f64,
    pub k: f64,
    pub m: f64,
    pub eta: f64,
    pub r_x: f64,
    pub l_x: f64,
    pub c_x: f64,
    pub pull_in_voltage: f64,
    pub static_deflection: Option<f64>,
    pub displacement_limit: f64,
    pub re_max: f64,
    pub gm_opt: f64,
    pub gm: f64,
    pub neg_resistance: f64,
    pub margin: f64,
    pub max_margin: f64,
    pub pull_in_ok: bool,
    pub deflection_ok: bool,
    pub startup_ok: bool,
    pub rules_ok: bool,
}

pub fn flatten_point(p: &DesignPoint) -> FlatRow {
    FlatRow {
        f0: p.model.f0(),
        k: p.model.k(),
        m: p.model.m(),
        eta: p.eta,
        r_x: p.circuit.r_x(),
        l_x: p.circuit.l_x(),
        c_x: p.circuit.c_x(),
        pull_in_voltage: p.pull_in_voltage,
        static_deflection: p.static_deflection,
        displacement_limit: p.displacement_limit,
        re_max: p.peak.re_max,
        gm_opt: p.peak.gm_opt,
        gm: p.pierce.gm,
        neg_resistance: p.startup.neg_resistance,
        margin: p.startup.margin,
        max_margin: p.max_margin,
        pull_in_ok: p.constraint(ConstraintKind::PullIn).passed,
        deflection_ok: p.constraint(ConstraintKind::Deflection).passed,
        startup_ok: p.constraint(ConstraintKind::Startup).passed,
        rules_ok: p.constraint(ConstraintKind::Rules).passed,
    }
}

const FLAT_COLUMNS: [&str; 20] = [
    "f0",
    "k",
    "m",
    "eta",
    "r_x",
    "l_x",
    "c_x",
    "pull_in_voltage",
    "static_deflection",
    "displacement_limit",
    "re_max",
    "gm_opt",
    "gm",
    "neg_resistance",
    "margin",
    "max_margin",
    "pull_in_ok",
    "deflection_ok",
    "startup_ok",
    "rules_ok",
];

fn flat_fields(r: &FlatRow) -> [String; 20] {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    [
        r.f0.to_string(),
        r.k.to_string(),
        r.m.to_string(),
        r.eta.to_string(),
        r.r_x.to_string(),
        r.l_x.to_string(),
        r.c_x.to_string(),
        r.pull_in_voltage.to_string(),
        opt(r.static_deflection),
        r.displacement_limit.to_string(),
        r.re_max.to_string(),
        r.gm_opt.to_string(),
        r.gm.to_string(),
        r.neg_resistance.to_string(),
        r.margin.to_string(),
        r.max_margin.to_string(),
        r.pull_in_ok.to_string(),
        r.deflection_ok.to_string(),
        r.startup_ok.to_string(),
        r.rules_ok.to_string(),
    ]
}

/// One CSV line per sweep row: index, swept parameters, objective,
/// feasibility, error text, then the flattened design.
pub fn write_rows_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    if let Some(first) = rows.first() {
        header.extend(first.params.iter().map(|(p, _)| p.clone()));
    }
    header.extend(["objective", "feasible", "error"].map(String::from));
    header.extend(FLAT_COLUMNS.map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.params.iter().map(|(_, v)| v.to_string()));
        rec.push(r.objective.map(|v| v.to_string()).unwrap_or_default());
        rec.push(r.feasible.to_string());
        rec.push(r.error.clone().unwrap_or_default());
        match &r.point {
            Some(p) => rec.extend(flat_fields(&flatten_point(p))),
            None => rec.extend(std::iter::repeat_n(String::new(), FLAT_COLUMNS.len())),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::sweep::{sweep, Axis, AxisScale, Objective, SweepSpec};
    use super::*;
    use crate::explore::DesignInputs;

    #[test]
    fn csv_has_one_line_per_row() {
        let spec = SweepSpec {
            axes: vec![Axis {
                path: "transducer.electrode_length".into(),
                min: 50e-6,
                max: 150e-6,
                steps: 3,
                scale: AxisScale::Linear,
            }],
            objective: Objective::MaxF0,
            constraints: None,
            grid_cap: None,
        };
        let rows = sweep(&DesignInputs::default(), &spec).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let header = rdr.headers().unwrap().clone();
        assert_eq!(header.len(), 1 + 1 + 3 + FLAT_COLUMNS.len());
        assert_eq!(&header[1], "transducer.electrode_length");
        let recs: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(recs.len(), 3);
        assert!(recs[2][4].contains("transduction"));
        let f0: f64 = recs[0][5].parse().unwrap();
        assert!(f0 > 70e3);
    }
}
