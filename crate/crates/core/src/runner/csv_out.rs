use std::io::Write;
use std::path::Path;

use super::{SweepRow, SweepScale};
use crate::error::{Error, Result};

/// `v` with `digits` significant digits in scientific notation.
pub fn format_value(v: f64, digits: usize) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{:.*e}", digits.saturating_sub(1), v)
    }
}

fn header(rows: &[SweepRow]) -> Vec<String> {
    let first = &rows[0];
    let mut cols = vec![match first.scale {
        SweepScale::Db => "sweep_value_db".to_string(),
        SweepScale::Linear => "sweep_value".to_string(),
    }];
    for cell in &first.cells {
        let m = cell.metric.short_name();
        cols.push(format!("{m}_analytic"));
        for (order, _) in &cell.low_order {
            cols.push(format!("{m}_analytic_m{order}"));
        }
        if cell.mc.is_some() {
            cols.push(format!("{m}_mc"));
            cols.push(format!("{m}_mc_stderr"));
        }
    }
    for c in ["quad_order", "mvn_max_error", "clamped", "warning", "failed"] {
        cols.push(c.to_string());
    }
    cols
}

fn record(row: &SweepRow, digits: usize) -> Vec<String> {
    let f = |v: f64| format_value(v, digits);
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    let mut out = vec![f(row.sweep_value)];
    for cell in &row.cells {
        out.push(f(cell.analytic));
        out.extend(cell.low_order.iter().map(|&(_, v)| f(v)));
        if let Some(mc) = cell.mc {
            out.push(f(mc.value));
            out.push(f(mc.std_error));
        }
    }
    out.push(row.quad_order.to_string());
    out.push(f(row.mvn_max_error));
    out.push(flag(row.clamped));
    out.push(flag(row.warning));
    out.push(flag(row.failed));
    out
}

/// Writes a header and one line per row, LF-terminated.
pub fn write_csv<W: Write>(rows: &[SweepRow], sink: W, digits: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::config("rows", "nothing to write"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(header(rows)).map_err(io)?;
    for r in rows {
        w.write_record(record(r, digits)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_csv(rows: &[SweepRow], digits: usize) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf, digits)?;
    Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
}

pub fn emit_csv(rows: &[SweepRow], path: &Path, digits: usize) -> Result<()> {
    let text = render_csv(rows, digits)?;
    std::fs::write(path, text)?;
    Ok(())
}
