//! Browser bindings. Every export takes plain numbers or JSON text and
//! returns JSON text: `{"ok": ...}` on success, `{"error": "..."}` otherwise.

use std::f64::consts::PI;

use mgsync::analysis::{summarize, time_triggered_baseline, RunSummary};
use mgsync::controller::Channel;
use mgsync::engine::run;
use mgsync::graph::{
    check_theorem1_condition, compute_lambda, disagreement_lambda, is_strongly_connected,
    laplacian, left_perron_vector, lemma1_check, CommGraph,
};
use mgsync::nalgebra::DMatrix;
use mgsync::presets::Preset;
use mgsync::scenario::Scenario;
use mgsync::trace::TraceLog;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(v) => json!({ "ok": v }).to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[derive(Serialize)]
struct GraphReport {
    strongly_connected: bool,
    w: Vec<f64>,
    lemma1_holds: bool,
    lambda: f64,
    lambda_unpinned: Option<f64>,
    margin_lhs: f64,
    inv_lambda: f64,
    satisfied: bool,
}

fn graph_report(adjacency: &str, pinning: &str, gain: f64, h: f64, sigma: f64) -> Result<GraphReport, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(adjacency).map_err(|e| format!("adjacency: {e}"))?;
    let pins: Vec<f64> = serde_json::from_str(pinning).map_err(|e| format!("pinning: {e}"))?;
    let graph = CommGraph::from_rows(&rows, &pins).map_err(|e| e.to_string())?;
    if !is_strongly_connected(&graph) {
        return Ok(GraphReport {
            strongly_connected: false,
            w: vec![],
            lemma1_holds: false,
            lambda: f64::NAN,
            lambda_unpinned: None,
            margin_lhs: h / 2.0 + sigma,
            inv_lambda: f64::NAN,
            satisfied: false,
        });
    }
    let lap = laplacian(&graph);
    let w = left_perron_vector(&lap).map_err(|e| e.to_string())?;
    let big_w = DMatrix::from_diagonal(&w);
    let lambda = compute_lambda(&graph.pinned_laplacian(gain), &big_w).map_err(|e| e.to_string())?;
    Ok(GraphReport {
        strongly_connected: true,
        w: w.iter().copied().collect(),
        lemma1_holds: lemma1_check(&lap, &w).map_err(|e| e.to_string())?,
        lambda,
        lambda_unpinned: disagreement_lambda(&lap, &big_w, gain).ok(),
        margin_lhs: h / 2.0 + sigma,
        inv_lambda: 1.0 / lambda,
        satisfied: check_theorem1_condition(h, sigma, lambda),
    })
}

/// Spectral quantities and the sampling condition for a graph given as
/// JSON (`[[a11, a12, ...], ...]` and `[g1, g2, ...]`).
#[wasm_bindgen]
pub fn analyze_graph(adjacency: &str, pinning: &str, gain: f64, h: f64, sigma: f64) -> String {
    respond(graph_report(adjacency, pinning, gain, h, sigma))
}

fn tuned_preset(preset: &str, gain: f64, sigma: f64, h: f64) -> Result<Scenario, String> {
    let preset: Preset = preset.parse().map_err(|e: mgsync::Error| e.to_string())?;
    let mut s = preset.scenario().map_err(|e| e.to_string())?;
    let c = &mut s.controller;
    c.c_omega = gain;
    c.c_p = gain;
    c.sigma_omega = sigma;
    c.sigma_p = sigma;
    c.h = h;
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

fn run_and_summarize(s: &Scenario) -> Result<(TraceLog, RunSummary), String> {
    let log = run(s).map_err(|e| e.to_string())?;
    let summary = summarize(s, &log, 0.0).map_err(|e| e.to_string())?;
    Ok((log, summary))
}

#[derive(Serialize)]
struct TracePlot {
    summary: RunSummary,
    t: Vec<f64>,
    /// `[dg][sample]`
    freq_hz: Vec<Vec<f64>>,
    mp: Vec<Vec<f64>>,
    /// `(t, dg)` for frequency-channel broadcasts, DGs 1-based.
    events: Vec<(f64, usize)>,
}

fn trace_plot(preset: &str, gain: f64, sigma: f64, h: f64, max_points: usize) -> Result<TracePlot, String> {
    let s = tuned_preset(preset, gain, sigma, h)?;
    let (log, summary) = run_and_summarize(&s)?;
    let stride = log.samples.len().div_ceil(max_points.max(2)).max(1);
    let picked: Vec<_> = log.samples.iter().step_by(stride).collect();
    let n = log.n;
    Ok(TracePlot {
        summary,
        t: picked.iter().map(|x| x.t).collect(),
        freq_hz: (0..n)
            .map(|i| picked.iter().map(|x| x.omega[i] / (2.0 * PI)).collect())
            .collect(),
        mp: (0..n).map(|i| picked.iter().map(|x| x.mp[i]).collect()).collect(),
        events: log
            .events
            .iter()
            .filter(|e| e.channel == Channel::Frequency)
            .map(|e| (e.t, e.dg))
            .collect(),
    })
}

/// Runs a bundled preset with the given gain (`c_ω = c_P`), threshold
/// (`σ_ω = σ_P`) and check period, returning at most `max_points`
/// samples per series.
#[wasm_bindgen]
pub fn simulate_preset(preset: &str, gain: f64, sigma: f64, h: f64, max_points: usize) -> String {
    respond(trace_plot(preset, gain, sigma, h, max_points))
}

#[derive(Serialize)]
struct Comparison {
    event_triggered: Vec<usize>,
    time_triggered: Vec<usize>,
    reduction_percent: f64,
    /// Per-DG `|f_ET(T) − f_TT(T)|` in Hz.
    terminal_difference_hz: Vec<f64>,
}

fn comparison(preset: &str, gain: f64, sigma: f64, h: f64) -> Result<Comparison, String> {
    let s = tuned_preset(preset, gain, sigma, h)?;
    let (et_log, et) = run_and_summarize(&s)?;
    let (tt_log, tt) = run_and_summarize(&time_triggered_baseline(&s))?;
    let (a, b) = (et.events.frequency.total, tt.events.frequency.total);
    Ok(Comparison {
        reduction_percent: if b == 0 { 0.0 } else { 100.0 * (1.0 - a as f64 / b as f64) },
        event_triggered: et.events.frequency.per_dg,
        time_triggered: tt.events.frequency.per_dg,
        terminal_difference_hz: et_log
            .last()
            .omega
            .iter()
            .zip(&tt_log.last().omega)
            .map(|(x, y)| (x - y).abs() / (2.0 * PI))
            .collect(),
    })
}

/// Event-triggered vs time-triggered broadcast counts for a preset.
#[wasm_bindgen]
pub fn compare_preset(preset: &str, gain: f64, sigma: f64, h: f64) -> String {
    respond(comparison(preset, gain, sigma, h))
}
