//! Run summaries, the sampling-condition report, the comparison against
//! time-triggered communication, and parameter sweeps.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::controller::Channel;
use crate::engine;
use crate::error::{Error, Result};
use crate::graph::{
    check_theorem1_condition, compute_lambda, disagreement_lambda, is_strongly_connected,
    laplacian, lemma1_check, left_perron_vector,
};
use crate::scenario::Scenario;
use crate::trace::{
    convergence_time_from, event_counts, max_frequency_error, sharing_mismatch, EventCounts,
    TraceLog,
};

/// Frequency band (rad/s) used for convergence times: 1 mHz.
pub const CONVERGENCE_TOL: f64 = 2.0 * PI * 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEcho {
    pub satisfied: bool,
    pub h: f64,
    pub sigma_omega: f64,
    pub lambda: f64,
    pub inv_lambda: f64,
    /// `h/2 + σ_ω`
    pub margin_lhs: f64,
}

/// Evaluates `h/2 + σ_ω < 1/λ` with `λ` on `c_ω(L + G)` and `W` from the
/// unpinned Laplacian.
pub fn condition_echo(scenario: &Scenario) -> Result<ConditionEcho> {
    let lap = laplacian(&scenario.graph);
    let w = left_perron_vector(&lap)?;
    let big_w = DMatrix::from_diagonal(&w);
    let lambda = compute_lambda(&scenario.graph.pinned_laplacian(scenario.controller.c_omega), &big_w)?;
    let h = scenario.controller.h;
    let sigma = scenario.controller.sigma_omega;
    Ok(ConditionEcho {
        satisfied: check_theorem1_condition(h, sigma, lambda),
        h,
        sigma_omega: sigma,
        lambda,
        inv_lambda: 1.0 / lambda,
        margin_lhs: h / 2.0 + sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCounts {
    pub frequency: EventCounts,
    pub power: EventCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub condition: ConditionEcho,
    /// Counting window `(t_on, horizon]`.
    pub window: (f64, f64),
    pub events: ChannelCounts,
    /// Broadcasts a time-triggered scheme would send per DG in the window.
    pub time_triggered_per_dg: usize,
    /// Frequency-channel reduction vs time-triggered, percent.
    pub communication_reduction: f64,
    pub power_communication_reduction: f64,
    /// First time after `t_on` from which all frequencies stay within
    /// 1 mHz of the reference; `None` if that never happens.
    pub convergence_time: Option<f64>,
    pub terminal_max_frequency_error_hz: f64,
    /// `max_{i,j} |m_i P_i − m_j P_j|` at the horizon (rad/s).
    pub terminal_sharing_mismatch: f64,
    pub runtime_s: f64,
}

/// Check instants in `(t_on, horizon]` for a clock starting at 0.
pub fn periodic_checks_in_window(t_on: f64, horizon: f64, h: f64) -> usize {
    let upto = |t: f64| (t / h + 1e-9).floor() as i64;
    (upto(horizon) - upto(t_on)).max(0) as usize
}

fn reduction(events: usize, baseline: usize) -> f64 {
    if baseline == 0 {
        return 0.0;
    }
    (100.0 * (1.0 - events as f64 / baseline as f64)).clamp(0.0, 100.0)
}

pub fn summarize(scenario: &Scenario, log: &TraceLog, runtime_s: f64) -> Result<RunSummary> {
    let condition = condition_echo(scenario)?;
    let window = (scenario.t_on, scenario.horizon);
    let frequency = event_counts(log, window, Channel::Frequency);
    let power = event_counts(log, window, Channel::Power);
    let per_dg = periodic_checks_in_window(scenario.t_on, scenario.horizon, scenario.controller.h);
    let baseline = per_dg * scenario.n();
    let reference = scenario.controller.omega_ref;
    let last = log.last();
    Ok(RunSummary {
        condition,
        window,
        communication_reduction: reduction(frequency.total, baseline),
        power_communication_reduction: reduction(power.total, baseline),
        events: ChannelCounts { frequency, power },
        time_triggered_per_dg: per_dg,
        convergence_time: convergence_time_from(log, reference, CONVERGENCE_TOL, scenario.t_on).ok(),
        terminal_max_frequency_error_hz: max_frequency_error(last, reference) / (2.0 * PI),
        terminal_sharing_mismatch: sharing_mismatch(last),
        runtime_s,
    })
}

/// Runs a scenario and summarises it.
pub fn simulate(scenario: &Scenario) -> Result<(TraceLog, RunSummary)> {
    let start = Instant::now();
    let log = engine::run(scenario)?;
    let runtime = start.elapsed().as_secs_f64();
    let summary = summarize(scenario, &log, runtime)?;
    Ok((log, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub strongly_connected: bool,
    pub w: Vec<f64>,
    pub lemma1_holds: bool,
    /// `λ` on `c_ω(L + G)` with `W = diag(w)`.
    pub lambda: f64,
    /// `λ` of `c_ω L` on the disagreement subspace (no pinning).
    pub lambda_unpinned: Option<f64>,
    pub h: f64,
    pub sigma_omega: f64,
    pub margin_lhs: f64,
    pub inv_lambda: f64,
    pub pass: bool,
}

pub fn check_report(scenario: &Scenario) -> Result<CheckReport> {
    if !is_strongly_connected(&scenario.graph) {
        return Err(Error::NotStronglyConnected);
    }
    let lap = laplacian(&scenario.graph);
    let w = left_perron_vector(&lap)?;
    let lemma1_holds = lemma1_check(&lap, &w)?;
    let big_w = DMatrix::from_diagonal(&w);
    let echo = condition_echo(scenario)?;
    let lambda_unpinned = disagreement_lambda(&lap, &big_w, scenario.controller.c_omega).ok();
    Ok(CheckReport {
        strongly_connected: true,
        w: w.iter().copied().collect(),
        lemma1_holds,
        lambda: echo.lambda,
        lambda_unpinned,
        h: echo.h,
        sigma_omega: echo.sigma_omega,
        margin_lhs: echo.margin_lhs,
        inv_lambda: echo.inv_lambda,
        pass: echo.satisfied && lemma1_holds,
    })
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: Vec<String> = self.w.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(f, "strongly connected : yes")?;
        writeln!(f, "w (Σw = n)         : [{}]", w.join(", "))?;
        writeln!(
            f,
            "WL + LᵀW ⪰ 0       : {}",
            if self.lemma1_holds { "yes" } else { "no" }
        )?;
        writeln!(f, "lambda             : {:.6}", self.lambda)?;
        if let Some(l) = self.lambda_unpinned {
            writeln!(f, "lambda (unpinned)  : {l:.6}")?;
        }
        writeln!(
            f,
            "h/2 + sigma        : {:.6}  (h = {}, sigma = {})",
            self.margin_lhs, self.h, self.sigma_omega
        )?;
        writeln!(f, "1/lambda           : {:.6}", self.inv_lambda)?;
        write!(f, "verdict            : {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Synchronised clocks and `σ = 0`: every check broadcasts.
pub fn time_triggered_baseline(scenario: &Scenario) -> Scenario {
    let mut s = scenario.clone();
    s.controller.sigma_omega = 0.0;
    s.controller.sigma_p = 0.0;
    s.clocks = vec![0.0; s.n()];
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub event_triggered: RunSummary,
    pub time_triggered: RunSummary,
    /// `|ω_i^ET(T) − ω_i^TT(T)|` per DG (rad/s).
    pub terminal_frequency_difference: Vec<f64>,
    /// Frequency-channel reduction of the event-triggered run relative to
    /// the counted time-triggered broadcasts, percent.
    pub reduction_percent: f64,
}

pub fn compare(scenario: &Scenario) -> Result<CompareReport> {
    let (et_log, et) = simulate(scenario)?;
    let (tt_log, tt) = simulate(&time_triggered_baseline(scenario))?;
    let difference = et_log
        .last()
        .omega
        .iter()
        .zip(&tt_log.last().omega)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let reduction_percent = reduction(
        et.events.frequency.total,
        tt.events.frequency.total,
    );
    Ok(CompareReport {
        event_triggered: et,
        time_triggered: tt,
        terminal_frequency_difference: difference,
        reduction_percent,
    })
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = |name: &str, c: &EventCounts| {
            let cells: Vec<String> = c.per_dg.iter().map(|x| format!("{x:>6}")).collect();
            format!("{name:<16}{} {:>7}", cells.join(""), c.total)
        };
        let n = self.event_triggered.events.frequency.per_dg.len();
        let head: Vec<String> = (1..=n).map(|i| format!("{:>6}", format!("DG{i}"))).collect();
        let (a, b) = self.event_triggered.window;
        writeln!(f, "broadcasts in ({a}, {b}] s, frequency channel")?;
        writeln!(f, "{:<16}{} {:>7}", "", head.join(""), "total")?;
        writeln!(f, "{}", row("time-triggered", &self.time_triggered.events.frequency))?;
        writeln!(f, "{}", row("event-triggered", &self.event_triggered.events.frequency))?;
        writeln!(f, "power channel")?;
        writeln!(f, "{}", row("time-triggered", &self.time_triggered.events.power))?;
        writeln!(f, "{}", row("event-triggered", &self.event_triggered.events.power))?;
        writeln!(f, "reduction          : {:.1} %", self.reduction_percent)?;
        let diffs: Vec<String> = self
            .terminal_frequency_difference
            .iter()
            .map(|d| format!("{:.3e}", d / (2.0 * PI)))
            .collect();
        write!(f, "terminal |Δf| (Hz) : [{}]", diffs.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    SigmaOmega,
    SigmaP,
    H,
    COmega,
    CP,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::SigmaOmega => "sigma_omega",
            SweepParam::SigmaP => "sigma_p",
            SweepParam::H => "h",
            SweepParam::COmega => "c_omega",
            SweepParam::CP => "c_p",
        }
    }

    fn apply(self, scenario: &mut Scenario, value: f64) {
        let c = &mut scenario.controller;
        match self {
            SweepParam::SigmaOmega => c.sigma_omega = value,
            SweepParam::SigmaP => c.sigma_p = value,
            SweepParam::H => c.h = value,
            SweepParam::COmega => c.c_omega = value,
            SweepParam::CP => c.c_p = value,
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepParam::SigmaOmega,
            SweepParam::SigmaP,
            SweepParam::H,
            SweepParam::COmega,
            SweepParam::CP,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::ConfigInvalid(format!("unknown sweep parameter {s:?}")))
    }
}

/// One axis of a sweep grid, written `name=v1,v2,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| Error::ConfigInvalid(format!("grid axis {s:?} is not name=v1,v2,...")))?;
        let param = name.trim().parse()?;
        let values = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::ConfigInvalid(format!("grid value {v:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridAxis { param, values })
    }
}

/// Cartesian product of the axes; no axes means no points.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(SweepParam, f64)>> {
    if axes.is_empty() {
        return Vec::new();
    }
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.param, v));
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: Vec<(SweepParam, f64)>,
    pub condition_violated: Option<bool>,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

pub fn run_point(base: &Scenario, point: &[(SweepParam, f64)]) -> SweepRow {
    let mut scenario = base.clone();
    for &(param, value) in point {
        param.apply(&mut scenario, value);
    }
    let outcome = scenario.validate().and_then(|_| simulate(&scenario));
    match outcome {
        Ok((_, summary)) => SweepRow {
            point: point.to_vec(),
            condition_violated: Some(!summary.condition.satisfied),
            summary: Some(summary),
            error: None,
        },
        Err(e) => SweepRow {
            point: point.to_vec(),
            condition_violated: condition_echo(&scenario).ok().map(|c| !c.satisfied),
            summary: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn sweep(base: &Scenario, axes: &[GridAxis]) -> Vec<SweepRow> {
    grid_points(axes).iter().map(|p| run_point(base, p)).collect()
}
