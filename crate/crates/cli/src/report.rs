use crate::pipeline::Report;
use cspmi_core::theorem::Status;
use std::fmt::Write;

fn status_label(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Reported => "REPORTED",
        Status::Flagged => "FLAGGED",
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:.4e}")
    } else {
        format!("{v:.6}")
    }
}

/// Aligned-column rendering of a report: one row per statistic, with the
/// criterion it is held to, if any.
pub fn render_table(report: &Report) -> String {
    let header = ["check", "scope", "status", "statistic", "value", "n", "criterion"];
    let mut rows: Vec<[String; 7]> = Vec::new();
    for c in &report.checks {
        let scope = format!("{:?}", c.scope).to_lowercase();
        let status = status_label(c.status).to_string();
        if c.statistics.is_empty() {
            rows.push([c.name.clone(), scope.clone(), status.clone(), "-".into(), "-".into(), "-".into(), "".into()]);
        }
        for (name, s) in &c.statistics {
            let criterion = c
                .criteria
                .iter()
                .find(|k| &k.statistic == name)
                .map(|k| format!("{} {} ({})", k.comparison, fmt_value(k.threshold), if k.passed { "ok" } else { "missed" }))
                .unwrap_or_default();
            rows.push([
                c.name.clone(),
                scope.clone(),
                status.clone(),
                name.clone(),
                fmt_value(s.value),
                s.n.to_string(),
                criterion,
            ]);
        }
    }
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            // numbers right-aligned
            if i == 4 || i == 5 {
                let _ = write!(s, "{cell:>w$}");
            } else {
                let _ = write!(s, "{cell:<w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for r in &rows {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for c in &report.checks {
        for n in &c.notes {
            let _ = writeln!(out, "note [{}]: {n}", c.name);
        }
    }
    out
}
