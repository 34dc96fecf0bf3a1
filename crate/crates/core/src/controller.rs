//! Secondary frequency and power-sharing controllers with asynchronous
//! periodic integral-type event triggers.
//!
//! Every DG keeps a [`TriggerState`] per channel. Between check instants the
//! squared neighbourhood error is integrated exactly: broadcast values are
//! piecewise constant, so each segment contributes `e² · length`. At a check
//! instant the drift since the last broadcast is compared against
//! `σ · sqrt(window_integral / h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CommGraph;

/// Tolerance when matching a time against the check schedule.
pub const CHECK_TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TriggerMode {
    /// Each channel fires on its own condition.
    #[default]
    Independent,
    /// A DG broadcasts (both channels) only when both conditions hold.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Frequency,
    Power,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Frequency, Channel::Power];

    pub fn index(self) -> usize {
        match self {
            Channel::Frequency => 0,
            Channel::Power => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Frequency => "frequency",
            Channel::Power => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Frequency control gain (1/s).
    pub c_omega: f64,
    /// Power-sharing control gain (1/s).
    pub c_p: f64,
    pub sigma_omega: f64,
    pub sigma_p: f64,
    /// Reference angular frequency (rad/s).
    pub omega_ref: f64,
    /// Event-checking period (s).
    pub h: f64,
    #[serde(default)]
    pub trigger_mode: TriggerMode,
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("c_omega", self.c_omega), ("c_p", self.c_p), ("h", self.h)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ConfigInvalid(format!("controller.{name} must be > 0, got {v}")));
            }
        }
        let nonneg = [("sigma_omega", self.sigma_omega), ("sigma_p", self.sigma_p)];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::ConfigInvalid(format!("controller.{name} must be >= 0, got {v}")));
            }
        }
        if !(self.omega_ref.is_finite() && self.omega_ref > 0.0) {
            return Err(Error::ConfigInvalid("controller.omega_ref_hz must be > 0".into()));
        }
        Ok(())
    }

    pub fn sigma(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Frequency => self.sigma_omega,
            Channel::Power => self.sigma_p,
        }
    }
}

/// Latest broadcast values (zero-order hold) and when each DG came online.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BroadcastTable {
    pub omega_hat: Vec<f64>,
    pub mp_hat: Vec<f64>,
    /// Time of each DG's initial broadcast; `None` until it happens.
    pub active_since: Vec<Option<f64>>,
}

impl BroadcastTable {
    pub fn new(n: usize) -> Self {
        Self {
            omega_hat: vec![0.0; n],
            mp_hat: vec![0.0; n],
            active_since: vec![None; n],
        }
    }

    pub fn n(&self) -> usize {
        self.omega_hat.len()
    }

    pub fn value(&self, i: usize, channel: Channel) -> f64 {
        match channel {
            Channel::Frequency => self.omega_hat[i],
            Channel::Power => self.mp_hat[i],
        }
    }

    pub fn is_active(&self, i: usize, t: f64) -> bool {
        matches!(self.active_since[i], Some(t0) if t + CHECK_TIME_TOL >= t0)
    }

    /// Edge `(i, j)` only counts once both endpoints have broadcast.
    fn link_open(&self, i: usize, j: usize, t: f64) -> bool {
        self.is_active(i, t) && self.is_active(j, t)
    }
}

/// `Σ_j a_ij (ω̂_i − ω̂_j) + g_i (ω̂_i − ω_ref)`.
pub fn neighborhood_error_freq(
    i: usize,
    table: &BroadcastTable,
    graph: &CommGraph,
    omega_ref: f64,
    t: f64,
) -> Result<f64> {
    if !table.is_active(i, t) {
        return Err(Error::InactiveAgent { agent: i, t });
    }
    let own = table.omega_hat[i];
    let coupling: f64 = (0..graph.n())
        .filter(|&j| j != i && graph.weight(i, j) > 0.0 && table.link_open(i, j, t))
        .map(|j| graph.weight(i, j) * (own - table.omega_hat[j]))
        .sum();
    Ok(coupling + graph.pinning()[i] * (own - omega_ref))
}

/// `Σ_j a_ij (m_i P̂_i − m_j P̂_j)`; power sharing has no reference.
pub fn neighborhood_error_power(
    i: usize,
    table: &BroadcastTable,
    graph: &CommGraph,
    t: f64,
) -> Result<f64> {
    if !table.is_active(i, t) {
        return Err(Error::InactiveAgent { agent: i, t });
    }
    let own = table.mp_hat[i];
    Ok((0..graph.n())
        .filter(|&j| j != i && graph.weight(i, j) > 0.0 && table.link_open(i, j, t))
        .map(|j| graph.weight(i, j) * (own - table.mp_hat[j]))
        .sum())
}

pub fn control_input_freq(e_omega: f64, params: &ControllerParams, active: bool) -> f64 {
    if active {
        -params.c_omega * e_omega
    } else {
        0.0
    }
}

/// Negative feedback on the sharing error, mirroring the frequency loop.
pub fn control_input_power(e_p: f64, params: &ControllerParams, active: bool) -> f64 {
    if active {
        -params.c_p * e_p
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriggerOutcome {
    pub fired: bool,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriggerState {
    pub channel: Channel,
    /// Value broadcast at the latest event.
    pub last_event_value: f64,
    /// ∫ e² over the current inter-check window.
    pub window_integral: f64,
    pub segment_start: f64,
    /// Schedule origin; checks happen at `origin + k·h`.
    pub origin: f64,
    pub checks_done: u64,
    /// Checks since the last event (`p`).
    pub checks_since_event: u64,
}

impl TriggerState {
    /// Starts a trigger whose forced initial broadcast happened at `origin`.
    pub fn start(channel: Channel, origin: f64, value: f64) -> Self {
        Self {
            channel,
            last_event_value: value,
            window_integral: 0.0,
            segment_start: origin,
            origin,
            checks_done: 0,
            checks_since_event: 0,
        }
    }

    pub fn next_check(&self, h: f64) -> f64 {
        self.origin + (self.checks_done + 1) as f64 * h
    }

    /// Adds `error² · segment_length` and advances the segment start.
    pub fn accumulate_window_integral(&mut self, error: f64, segment_length: f64) -> Result<()> {
        if segment_length < 0.0 {
            return Err(Error::NegativeSegment(segment_length));
        }
        self.window_integral += error * error * segment_length;
        self.segment_start += segment_length;
        Ok(())
    }

    /// Closes the current constant-error segment at time `t`.
    pub fn close_segment(&mut self, error: f64, t: f64) -> Result<()> {
        let len = t - self.segment_start;
        // absorb round-off from time arithmetic
        let len = if len.abs() < CHECK_TIME_TOL { 0.0 } else { len };
        self.accumulate_window_integral(error, len)?;
        self.segment_start = t;
        Ok(())
    }

    /// Evaluates the trigger inequality without mutating state.
    ///
    /// `σ = 0` degenerates to time-triggered communication: every check
    /// broadcasts.
    pub fn evaluate(&self, current_value: f64, sigma: f64, h: f64) -> TriggerOutcome {
        let lhs = (current_value - self.last_event_value).abs();
        let rhs = sigma * (self.window_integral / h).sqrt();
        TriggerOutcome {
            fired: sigma == 0.0 || lhs > rhs,
            lhs,
            rhs,
        }
    }

    /// Runs the check scheduled at `t` and commits the result. `broadcast`
    /// overrides the local verdict (used by joint mode).
    pub fn commit_check(
        &mut self,
        t: f64,
        current_value: f64,
        outcome: TriggerOutcome,
        broadcast: bool,
        h: f64,
    ) -> Result<TriggerOutcome> {
        let expected = self.next_check(h);
        if (t - expected).abs() > CHECK_TIME_TOL {
            return Err(Error::NotACheckInstant { t, expected });
        }
        self.window_integral = 0.0;
        self.segment_start = t;
        self.checks_done += 1;
        if broadcast {
            self.last_event_value = current_value;
            self.checks_since_event = 0;
        } else {
            self.checks_since_event += 1;
        }
        Ok(TriggerOutcome {
            fired: broadcast,
            ..outcome
        })
    }

    /// Check at `t`: `|y(t) − y(t_k)| > σ · sqrt(∫e²/h)`.
    pub fn check_trigger(&mut self, t: f64, current_value: f64, params: &ControllerParams) -> Result<TriggerOutcome> {
        let outcome = self.evaluate(current_value, params.sigma(self.channel), params.h);
        self.commit_check(t, current_value, outcome, outcome.fired, params.h)
    }
}

/// Records an event: the owner's table entry takes `current_value`.
/// Delivery is instantaneous; callers close the receivers' integral
/// segments at `t`.
pub fn on_event(
    i: usize,
    t: f64,
    channel: Channel,
    current_value: f64,
    table: &mut BroadcastTable,
) {
    match channel {
        Channel::Frequency => table.omega_hat[i] = current_value,
        Channel::Power => table.mp_hat[i] = current_value,
    }
    if table.active_since[i].is_none() {
        table.active_since[i] = Some(t);
    }
}
