//! Simulation records and the metrics computed from them.

use serde::{Deserialize, Serialize};

use crate::controller::Channel;
use crate::error::{Error, Result};

/// State at one micro-step boundary. Inputs are the ones held over the
/// following step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// rad/s
    pub omega: Vec<f64>,
    /// W
    pub p: Vec<f64>,
    /// rad/s
    pub mp: Vec<f64>,
    /// rad/s²
    pub u_omega: Vec<f64>,
    /// rad/s²
    pub u_p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    /// 1-based DG number.
    pub dg: usize,
    pub channel: Channel,
    /// Broadcast value: Hz for frequency, rad/s for `m·P`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub t: f64,
    /// 1-based DG number.
    pub dg: usize,
    pub channel: Channel,
    pub fired: bool,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub n: usize,
    pub micro_step: f64,
    /// Check-schedule offsets after rounding to the micro-step grid.
    pub clocks: Vec<f64>,
    pub samples: Vec<Sample>,
    pub events: Vec<EventRecord>,
    pub checks: Vec<CheckRecord>,
}

impl TraceLog {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trace has at least one sample")
    }

    /// Sample at or just before `t`.
    pub fn sample_at(&self, t: f64) -> &Sample {
        let idx = self.samples.partition_point(|s| s.t <= t + 1e-12);
        &self.samples[idx.saturating_sub(1)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub per_dg: Vec<usize>,
    pub total: usize,
}

/// Broadcasts per DG on `channel` with `t_a < t ≤ t_b`.
pub fn event_counts(log: &TraceLog, window: (f64, f64), channel: Channel) -> EventCounts {
    let (ta, tb) = window;
    let mut per_dg = vec![0; log.n];
    for e in log
        .events
        .iter()
        .filter(|e| e.channel == channel && e.t > ta + 1e-12 && e.t <= tb + 1e-12)
    {
        per_dg[e.dg - 1] += 1;
    }
    let total = per_dg.iter().sum();
    EventCounts { per_dg, total }
}

/// Earliest `t*` after which every sample satisfies
/// `max_i |ω_i − reference| ≤ tolerance` through the end of the trace.
pub fn convergence_time(log: &TraceLog, reference: f64, tolerance: f64) -> Result<f64> {
    convergence_time_from(log, reference, tolerance, 0.0)
}

/// As [`convergence_time`], only considering samples at or after `from`.
pub fn convergence_time_from(log: &TraceLog, reference: f64, tolerance: f64, from: f64) -> Result<f64> {
    let within = |s: &Sample| s.omega.iter().all(|w| (w - reference).abs() <= tolerance);
    let samples: Vec<&Sample> = log.samples.iter().filter(|s| s.t >= from - 1e-12).collect();
    let Some(last) = samples.last() else {
        return Err(Error::NotConverged);
    };
    if !within(last) {
        return Err(Error::NotConverged);
    }
    let first_good = samples
        .iter()
        .rposition(|s| !within(s))
        .map(|k| k + 1)
        .unwrap_or(0);
    Ok(samples[first_good].t)
}

/// `max_{i,j} |m_i P_i − m_j P_j|`.
pub fn sharing_mismatch(sample: &Sample) -> f64 {
    let max = sample.mp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sample.mp.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `max_i |ω_i − reference|`.
pub fn max_frequency_error(sample: &Sample, reference: f64) -> f64 {
    sample
        .omega
        .iter()
        .map(|w| (w - reference).abs())
        .fold(0.0, f64::max)
}
