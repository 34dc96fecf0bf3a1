//! Hybrid simulation loop.
//!
//! Time advances on an integer micro-step grid. At each grid instant, in
//! order:
//!
//! 1. the plant is integrated over the previous step with held inputs;
//! 2. scheduled load switchings are applied;
//! 3. every DG whose check instant falls here is processed, ascending id
//!    (forced initial broadcast on its first instant at or after `t_on`,
//!    trigger evaluation afterwards);
//! 4. if any broadcast happened, open integral segments are closed, the
//!    neighbourhood errors and control inputs are recomputed;
//! 5. the sample is logged.

use crate::controller::{
    control_input_freq, control_input_power, neighborhood_error_freq, neighborhood_error_power,
    on_event, BroadcastTable, Channel, TriggerMode, TriggerOutcome, TriggerState,
};
use crate::error::{Error, Result};
use crate::plant::{reduced_step, NetworkPlant, PlantState};
use crate::scenario::{InitialState, LoadAction, PlantKind, Scenario};
use crate::trace::{CheckRecord, EventRecord, Sample, TraceLog};

/// Time step and stopping rule used to find the droop operating point that
/// seeds reduced-plant runs.
pub const SETTLE_STEP: f64 = 1e-4;
pub const SETTLE_TOL: f64 = 1e-13;
pub const SETTLE_MAX_TIME: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerFeedback {
    /// `u_P = −c_P e_P`.
    #[default]
    Negative,
    /// `u_P = +c_P e_P`; diverges, kept for experiments.
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub power_feedback: PowerFeedback,
}

enum Plant {
    Reduced,
    Network(Box<NetworkPlant>),
}

/// Initial plant state for a scenario.
pub fn initial_plant_state(scenario: &Scenario) -> Result<PlantState> {
    let omega_ref = scenario.controller.omega_ref;
    match (scenario.plant_kind, &scenario.initial_state) {
        (PlantKind::Reduced, InitialState::Explicit { omega, mp }) => Ok(PlantState::reduced(
            &scenario.dg_params,
            omega.clone(),
            mp.clone(),
        )),
        (PlantKind::Reduced, InitialState::DroopSettle) => {
            let net = scenario
                .network
                .clone()
                .ok_or_else(|| Error::ConfigInvalid("droop-settle needs a network".into()))?;
            let plant = NetworkPlant::new(net, scenario.dg_params.clone())?;
            let settled = plant.settle(omega_ref, SETTLE_STEP, SETTLE_TOL, SETTLE_MAX_TIME)?;
            Ok(PlantState::reduced(
                &scenario.dg_params,
                settled.omega,
                settled.mp,
            ))
        }
        (PlantKind::Network, _) => {
            let net = scenario
                .network
                .clone()
                .ok_or_else(|| Error::ConfigInvalid("network plant needs a network".into()))?;
            NetworkPlant::new(net, scenario.dg_params.clone())?.initial_state(omega_ref)
        }
    }
}

pub fn run(scenario: &Scenario) -> Result<TraceLog> {
    run_with(scenario, RunOptions::default())
}

pub fn run_with(scenario: &Scenario, options: RunOptions) -> Result<TraceLog> {
    scenario.validate()?;
    let n = scenario.n();
    let ms = scenario.micro_step;
    let params = &scenario.controller;
    let h = params.h;
    let period = scenario.ticks_per_period();
    let total_ticks = (scenario.horizon / ms + 1e-9).floor() as usize;
    let on_tick = (scenario.t_on / ms - 1e-9).ceil().max(0.0) as usize;
    let offsets: Vec<usize> = scenario
        .clocks
        .iter()
        .map(|t0| (t0 / ms).round() as usize % period)
        .collect();
    let first_check: Vec<usize> = offsets
        .iter()
        .map(|&off| {
            if on_tick <= off {
                off
            } else {
                off + (on_tick - off).div_ceil(period) * period
            }
        })
        .collect();

    let mut plant = match scenario.plant_kind {
        PlantKind::Reduced => Plant::Reduced,
        PlantKind::Network => Plant::Network(Box::new(NetworkPlant::new(
            scenario.network.clone().expect("validated"),
            scenario.dg_params.clone(),
        )?)),
    };
    let mut state = initial_plant_state(scenario)?;

    let mut load_events: Vec<(usize, usize, LoadAction)> = scenario
        .load_events
        .iter()
        .map(|e| (((e.t / ms) - 1e-9).ceil().max(0.0) as usize, e.load, e.action))
        .collect();
    load_events.sort_by_key(|e| e.0);
    let mut next_load_event = 0;

    let mut table = BroadcastTable::new(n);
    let mut triggers: Vec<Option<[TriggerState; 2]>> = vec![None; n];
    let mut e_omega = vec![0.0; n];
    let mut e_p = vec![0.0; n];
    let mut u_omega = vec![0.0; n];
    let mut u_p = vec![0.0; n];

    let mut log = TraceLog {
        n,
        micro_step: ms,
        clocks: offsets.iter().map(|&o| o as f64 * ms).collect(),
        samples: Vec::with_capacity(total_ticks + 1),
        events: Vec::new(),
        checks: Vec::new(),
    };

    for tick in 0..=total_ticks {
        let t = tick as f64 * ms;

        if tick > 0 {
            state = match &plant {
                Plant::Reduced => reduced_step(&state, &scenario.dg_params, &u_omega, &u_p, ms),
                Plant::Network(p) => p.step(&state, &u_omega, &u_p, ms)?,
            };
        }

        let mut switched = false;
        while next_load_event < load_events.len() && load_events[next_load_event].0 <= tick {
            let (_, load, action) = load_events[next_load_event];
            if let Plant::Network(p) = &mut plant {
                p.set_load_connected(load, action == LoadAction::Connect)?;
                switched = true;
            }
            next_load_event += 1;
        }
        if switched {
            if let Plant::Network(p) = &plant {
                state = p.resolve(state)?;
            }
        }

        let mut table_changed = false;
        for i in 0..n {
            if tick < first_check[i] || !(tick - first_check[i]).is_multiple_of(period) {
                continue;
            }
            let values = [state.omega[i], state.mp[i]];
            match &mut triggers[i] {
                None => {
                    // forced initial broadcast on both channels
                    for ch in Channel::ALL {
                        on_event(i, t, ch, values[ch.index()], &mut table);
                        log.events.push(EventRecord {
                            t,
                            dg: i + 1,
                            channel: ch,
                            value: report_value(ch, values[ch.index()]),
                        });
                    }
                    triggers[i] = Some([
                        TriggerState::start(Channel::Frequency, t, values[0]),
                        TriggerState::start(Channel::Power, t, values[1]),
                    ]);
                    table_changed = true;
                }
                Some(states) => {
                    let errors = [e_omega[i], e_p[i]];
                    let mut outcomes = [TriggerOutcome {
                        fired: false,
                        lhs: 0.0,
                        rhs: 0.0,
                    }; 2];
                    for ch in Channel::ALL {
                        let s = &mut states[ch.index()];
                        s.close_segment(errors[ch.index()], t)?;
                        outcomes[ch.index()] = s.evaluate(values[ch.index()], params.sigma(ch), h);
                    }
                    let joint = outcomes[0].fired && outcomes[1].fired;
                    for ch in Channel::ALL {
                        let k = ch.index();
                        let broadcast = match params.trigger_mode {
                            TriggerMode::Independent => outcomes[k].fired,
                            TriggerMode::Joint => joint,
                        };
                        let out = states[k].commit_check(t, values[k], outcomes[k], broadcast, h)?;
                        log.checks.push(CheckRecord {
                            t,
                            dg: i + 1,
                            channel: ch,
                            fired: out.fired,
                            lhs: out.lhs,
                            rhs: out.rhs,
                        });
                        if out.fired {
                            on_event(i, t, ch, values[k], &mut table);
                            log.events.push(EventRecord {
                                t,
                                dg: i + 1,
                                channel: ch,
                                value: report_value(ch, values[k]),
                            });
                            table_changed = true;
                        }
                    }
                }
            }
        }

        if table_changed {
            for i in 0..n {
                if let Some(states) = &mut triggers[i] {
                    states[0].close_segment(e_omega[i], t)?;
                    states[1].close_segment(e_p[i], t)?;
                }
            }
            for i in 0..n {
                let active = table.is_active(i, t);
                if active {
                    e_omega[i] = neighborhood_error_freq(i, &table, &scenario.graph, params.omega_ref, t)?;
                    e_p[i] = neighborhood_error_power(i, &table, &scenario.graph, t)?;
                }
                u_omega[i] = control_input_freq(e_omega[i], params, active);
                u_p[i] = match options.power_feedback {
                    PowerFeedback::Negative => control_input_power(e_p[i], params, active),
                    PowerFeedback::Positive => -control_input_power(e_p[i], params, active),
                };
            }
        }

        log.samples.push(Sample {
            t,
            omega: state.omega.clone(),
            p: state.p.clone(),
            mp: state.mp.clone(),
            u_omega: u_omega.clone(),
            u_p: u_p.clone(),
        });
    }
    Ok(log)
}

fn report_value(channel: Channel, value: f64) -> f64 {
    match channel {
        Channel::Frequency => value / (2.0 * std::f64::consts::PI),
        Channel::Power => value,
    }
}
