//! Trace files: one row per recorded iterate.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use composolve::TraceRecord;

pub const HEADER: &str =
    "epoch,inner_iter,wall_ms,q_inner_val,q_inner_jac,q_outer_grad,objective,gap,grad_map_sq,composite_grad_sq";

pub const COLUMNS: usize = 10;

/// Index of the `wall_ms` column, the only one allowed to differ on replay.
pub const WALL_COLUMN: usize = 2;

/// Floats use 17 significant digits, so values round-trip exactly.
pub fn format_trace(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 200);
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.epoch,
            r.inner_iter,
            r.wall_ms,
            r.q_inner_val,
            r.q_inner_jac,
            r.q_outer_grad,
            r.objective,
            r.gap,
            r.grad_map_sq,
            r.composite_grad_sq
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    fs::write(path, format_trace(records)).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(HEADER) => {}
        Some(other) => bail!("unexpected header {other:?}; expected {HEADER:?}"),
        None => bail!("empty file"),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        ensure!(
            fields.len() == COLUMNS,
            "line {row}: expected {COLUMNS} fields, found {}",
            fields.len()
        );
        let int = |k: usize| -> Result<u64> {
            fields[k]
                .parse()
                .with_context(|| format!("line {row}, column {}", k + 1))
        };
        let float = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .with_context(|| format!("line {row}, column {}", k + 1))
        };
        records.push(TraceRecord {
            epoch: int(0)? as usize,
            inner_iter: int(1)? as usize,
            wall_ms: float(2)?,
            q_inner_val: int(3)?,
            q_inner_jac: int(4)?,
            q_outer_grad: int(5)?,
            objective: float(6)?,
            gap: float(7)?,
            grad_map_sq: float(8)?,
            composite_grad_sq: float(9)?,
        });
    }
    Ok(records)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace(&text).with_context(|| format!("in {}", path.display()))
}

/// The file with the `wall_ms` column removed, for replay comparisons.
pub fn without_wall_column(text: &str) -> String {
    text.lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(k, _)| *k != WALL_COLUMN)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: u64) -> TraceRecord {
        TraceRecord {
            epoch: k as usize,
            inner_iter: 3,
            wall_ms: 0.125 * k as f64,
            q_inner_val: 10 * k,
            q_inner_jac: 10 * k,
            q_outer_grad: 5 * k,
            objective: 1.0 / 3.0,
            gap: 1e-300,
            grad_map_sq: f64::NAN,
            composite_grad_sq: 2.0f64.sqrt(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let records = vec![record(0), record(1)];
        let text = format_trace(&records);
        assert!(text.starts_with(HEADER));
        assert!(text.ends_with('\n') && !text.contains('\r'));
        let back = parse_trace(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].objective.to_bits(), records[1].objective.to_bits());
        assert_eq!(
            back[1].composite_grad_sq.to_bits(),
            records[1].composite_grad_sq.to_bits()
        );
        assert_eq!(back[1].gap, 1e-300);
        assert!(back[1].grad_map_sq.is_nan());
        assert_eq!(format_trace(&back), text);
    }

    #[test]
    fn rejects_schema_drift() {
        let text = format_trace(&[record(1)]);
        assert!(parse_trace(&text.replace("gap,", "gapp,")).is_err());
        assert!(
            parse_trace(&text.replace("q_inner_val,q_inner_jac", "q_inner_jac,q_inner_val"))
                .is_err()
        );
        assert!(parse_trace("").is_err());
        let short = format!("{HEADER}\n1,2,3\n");
        assert!(parse_trace(&short).is_err());
    }

    #[test]
    fn wall_column_masking() {
        assert_eq!(without_wall_column("a,b,c,d\n1,2,3,4"), "a,b,d\n1,2,4");
    }
}
