use std::fmt::Write as _;
use std::io::Write;

use super::metrics::{EvalReport, RECALL_KS};
use crate::error::Result;

/// One row of the comparison table: a labelled pair of direction reports.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub label: String,
    pub t2i: EvalReport,
    pub i2t: EvalReport,
}

/// `metric,direction,value` lines for every report.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[EvalReport]) -> Result<()> {
    writeln!(w, "metric,direction,value")?;
    for r in reports {
        for k in RECALL_KS {
            writeln!(w, "R@{k},{},{}", r.direction, r.r_at(k))?;
        }
        writeln!(w, "MR,{},{}", r.direction, r.median_rank)?;
    }
    Ok(())
}

/// Fixed-width table with R@1, R@5, R@10 and MR for each direction.
pub fn format_table(rows: &[ReportRow]) -> String {
    let label_w = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:label_w$} | {:^29} | {:^29}",
        "", "Text-to-Image", "Image-to-Text"
    );
    let _ = writeln!(
        out,
        "{:label_w$} | {:>6} {:>6} {:>6} {:>8} | {:>6} {:>6} {:>6} {:>8}",
        "Model", "R@1", "R@5", "R@10", "MR", "R@1", "R@5", "R@10", "MR"
    );
    let _ = writeln!(out, "{}", "-".repeat(label_w + 66));
    for row in rows {
        let mut line = format!("{:label_w$}", row.label);
        for r in [&row.t2i, &row.i2t] {
            let _ = write!(
                line,
                " | {:>6.3} {:>6.3} {:>6.3} {:>8.1}",
                r.r_at(1),
                r.r_at(5),
                r.r_at(10),
                r.median_rank
            );
        }
        let _ = writeln!(out, "{line}");
    }
    out
}
