//! File formats: `trace.csv`, `events.json`, `checks.json`, `summary.json`
//! and the sweep table.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::analysis::{RunSummary, SweepRow};
use crate::trace::TraceLog;

/// Header: `t, omega_hz_1..n, p_watt_1..n, mp_p_1..n, u_omega_1..n, u_p_1..n`.
pub fn trace_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for prefix in ["omega_hz", "p_watt", "mp_p", "u_omega", "u_p"] {
        cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    cols.join(",")
}

pub fn write_trace_csv<W: Write>(log: &TraceLog, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", trace_header(log.n))?;
    let mut line = String::new();
    for s in &log.samples {
        line.clear();
        line.push_str(&s.t.to_string());
        let hz = s.omega.iter().map(|w| w / (2.0 * PI));
        for v in hz
            .chain(s.p.iter().copied())
            .chain(s.mp.iter().copied())
            .chain(s.u_omega.iter().copied())
            .chain(s.u_p.iter().copied())
        {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn events_json(log: &TraceLog) -> String {
    serde_json::to_string_pretty(&log.events).expect("events serialise")
}

pub fn checks_json(log: &TraceLog) -> String {
    serde_json::to_string_pretty(&log.checks).expect("checks serialise")
}

pub fn summary_json(summary: &RunSummary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serialises")
}

pub fn parse_summary(text: &str) -> serde_json::Result<RunSummary> {
    serde_json::from_str(text)
}

const SWEEP_COLUMNS: &[&str] = &[
    "condition_violated",
    "lambda",
    "events_frequency",
    "events_power",
    "communication_reduction",
    "convergence_time",
    "terminal_max_frequency_error_hz",
    "terminal_sharing_mismatch",
    "runtime_s",
    "error",
];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    let param_names: Vec<&str> = rows
        .first()
        .map(|r| r.point.iter().map(|(p, _)| p.name()).collect())
        .unwrap_or_default();
    let header: Vec<&str> = param_names.iter().chain(SWEEP_COLUMNS).copied().collect();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut cells: Vec<String> = row.point.iter().map(|(_, v)| v.to_string()).collect();
        cells.push(
            row.condition_violated
                .map(|b| b.to_string())
                .unwrap_or_default(),
        );
        match &row.summary {
            Some(s) => {
                cells.push(s.condition.lambda.to_string());
                cells.push(s.events.frequency.total.to_string());
                cells.push(s.events.power.total.to_string());
                cells.push(s.communication_reduction.to_string());
                cells.push(s.convergence_time.map(|t| t.to_string()).unwrap_or_default());
                cells.push(s.terminal_max_frequency_error_hz.to_string());
                cells.push(s.terminal_sharing_mismatch.to_string());
                cells.push(s.runtime_s.to_string());
                cells.push(String::new());
            }
            None => {
                cells.extend(std::iter::repeat_n(String::new(), SWEEP_COLUMNS.len() - 2));
                let msg = row.error.clone().unwrap_or_default().replace(['"', '\n'], " ");
                cells.push(format!("\"{msg}\""));
            }
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
