//! CSV emission. Trace files carry the exact header
//! `iteration,gap_total,gap_x,gap_y,agree_x,agree_y,track_q,track_w,lemma1_y_metric`
//! with RFC-4180 CRLF line endings; numbers use Rust's shortest
//! round-trip formatting, which is locale-independent, so equal traces
//! produce byte-identical files.

use std::path::Path;

use saddlesim::solvers::Trace;

use crate::HarnessError;

/// The fixed trace header.
pub const TRACE_HEADER: &str =
    "iteration,gap_total,gap_x,gap_y,agree_x,agree_y,track_q,track_w,lemma1_y_metric";

/// Renders a trace as CSV bytes.
#[must_use]
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push_str("\r\n");
    for r in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\r\n",
            r.iteration,
            r.gap_total,
            r.gap_x,
            r.gap_y,
            r.agree_x,
            r.agree_y,
            r.track_q,
            r.track_w,
            r.lemma1_y_metric
        ));
    }
    out
}

/// Renders a generic table (header row + stringified cells) as CSV bytes.
#[must_use]
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push_str("\r\n");
    for row in rows {
        out.push_str(&row.join(","));
        out.push_str("\r\n");
    }
    out
}

/// Writes bytes to a path, creating parent directories as needed.
///
/// # Errors
///
/// [`HarnessError::Io`] carrying the path.
pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io_err = |e: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    std::fs::write(path, contents).map_err(io_err)
}

/// Appends `.{label}.csv` to a stem path (replacing an existing `.csv`
/// extension first, so `traces/run.csv` + `gt-gda` → `traces/run.gt-gda.csv`).
#[must_use]
pub fn labeled_csv_path(stem: &str, label: &str) -> String {
    let base = stem.strip_suffix(".csv").unwrap_or(stem);
    format!("{base}.{label}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use saddlesim::solvers::{TraceRow, Variant};

    #[test]
    fn trace_csv_has_the_exact_header_and_crlf_rows() {
        let trace = Trace {
            variant: Variant::GtGda,
            alpha: 0.1,
            beta: 0.2,
            rows: vec![TraceRow {
                iteration: 0,
                gap_total: 1.5,
                gap_x: 1.0,
                gap_y: 0.5,
                agree_x: 0.25,
                agree_y: 0.125,
                track_q: 0.0,
                track_w: 0.0,
                lemma1_y_metric: 2.0,
            }],
            diverged_at: None,
        };
        let text = trace_csv(&trace);
        let mut lines = text.split("\r\n");
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.next(), Some("0,1.5,1,0.5,0.25,0.125,0,0,2"));
        assert_eq!(lines.next(), Some(""));
        assert!(!text.contains('\n') || text.matches('\n').count() == text.matches("\r\n").count());
    }

    #[test]
    fn labeled_paths_replace_the_extension() {
        assert_eq!(
            labeled_csv_path("traces/run.csv", "d-gda"),
            "traces/run.d-gda.csv"
        );
        assert_eq!(labeled_csv_path("run", "gt-gda"), "run.gt-gda.csv");
    }
}
