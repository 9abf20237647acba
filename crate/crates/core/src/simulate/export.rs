//! Trace and envelope export: CSV (`t,v_in,v_out,x`, SI units) and a static
//! SVG of v_out with its envelope.

use std::fmt::Write as _;
use std::io::Write;

use super::{EnvelopePoint, Trace};
use crate::error::Result;

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "v_in", "v_out", "x"])?;
    for i in 0..trace.len() {
        w.write_record(&[
            trace.time[i].to_string(),
            trace.v_in[i].to_string(),
            trace.v_out[i].to_string(),
            trace.x[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_envelope_csv<W: Write>(env: &[EnvelopePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "amplitude"])?;
    for p in env {
        w.write_record(&[p.t.to_string(), p.amplitude.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const MAX_COLUMNS: usize = 2000;

/// Line plot of v_out(t) with the envelope overlaid.
///
/// Long traces are reduced to a min/max pair per pixel column so the file
/// stays small without hiding the waveform extent.
pub fn trace_svg(trace: &Trace, env: &[EnvelopePoint]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if trace.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let t_end = trace.time[trace.len() - 1].max(f64::MIN_POSITIVE);
    let peak = trace
        .v_out
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let px = |t: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * t / t_end;
    let py = |v: f64| HEIGHT / 2.0 - (HEIGHT / 2.0 - MARGIN) * v / peak;

    let columns = MAX_COLUMNS.min(trace.len());
    let per_col = trace.len().div_ceil(columns);
    let mut path = String::new();
    for chunk_start in (0..trace.len()).step_by(per_col) {
        let chunk_end = (chunk_start + per_col).min(trace.len());
        let slice = &trace.v_out[chunk_start..chunk_end];
        let lo = slice.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let x = px(trace.time[chunk_start]);
        let _ = write!(path, "{:.2},{:.2} {:.2},{:.2} ", x, py(lo), x, py(hi));
    }
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="0.6" points="{}"/>"##,
        path.trim_end()
    );
    if !env.is_empty() {
        let pts: Vec<String> = env
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.t), py(p.amplitude)))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="#d62728" stroke-width="1.2" points="{}"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="#888" stroke-width="0.5"/>"##,
        HEIGHT / 2.0,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="12">v_out (peak {peak:.3e} V) over {t_end:.3e} s</text>"#
    );
    svg.push_str("</svg>\n");
    svg
}
