//! Scenario description and its TOML configuration format.
//!
//! Buses, loads and DGs are numbered from 1 in configuration files and in
//! every output; they are 0-based internally.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerParams, TriggerMode};
use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::plant::{DGParams, Line, Load, NetworkModel};

/// Relative tolerance when checking that the micro-step divides `h`.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Reduced,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadAction {
    Connect,
    Disconnect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadEvent {
    pub t: f64,
    /// 0-based load index.
    pub load: usize,
    pub action: LoadAction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialState {
    /// Network plant: start at `ω_n = ω_ref`, `θ = 0` and let droop act.
    /// Reduced plant: start at the settled droop operating point of the
    /// configured network.
    DroopSettle,
    /// Reduced plant only: explicit `ω` (rad/s) and `m·P` (rad/s).
    Explicit { omega: Vec<f64>, mp: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub graph: CommGraph,
    pub controller: ControllerParams,
    pub plant_kind: PlantKind,
    pub dg_params: Vec<DGParams>,
    pub network: Option<NetworkModel>,
    /// Check-schedule offsets `t_0^i ∈ [0, h)` (s).
    pub clocks: Vec<f64>,
    pub t_on: f64,
    pub horizon: f64,
    pub micro_step: f64,
    pub load_events: Vec<LoadEvent>,
    pub initial_state: InitialState,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.into_scenario()
    }

    /// Number of micro-steps per check period.
    pub fn ticks_per_period(&self) -> usize {
        (self.controller.h / self.micro_step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let err = |m: String| Err(Error::ConfigInvalid(m));
        self.controller.validate()?;
        if self.dg_params.len() != n {
            return err(format!("plant.dgs has {} entries, graph has {n} agents", self.dg_params.len()));
        }
        for (i, dg) in self.dg_params.iter().enumerate() {
            dg.validate(i)?;
        }
        if self.clocks.len() != n {
            return err(format!("clocks.t0 has {} entries, graph has {n} agents", self.clocks.len()));
        }
        let h = self.controller.h;
        for (i, &t0) in self.clocks.iter().enumerate() {
            if !(t0 >= 0.0 && t0 < h) {
                return err(format!("clocks.t0[{i}] = {t0} must lie in [0, h = {h})"));
            }
        }
        if !(self.micro_step.is_finite() && self.micro_step > 0.0) {
            return err("sim.micro_step must be > 0".into());
        }
        let ratio = h / self.micro_step;
        if ratio < 1.0 - GRID_TOL || (ratio - ratio.round()).abs() > GRID_TOL * ratio.max(1.0) {
            return err(format!("sim.micro_step = {} must divide h = {h}", self.micro_step));
        }
        if !(self.t_on >= 0.0 && self.horizon > self.t_on) {
            return err(format!(
                "need 0 <= sim.t_on < sim.horizon (t_on = {}, horizon = {})",
                self.t_on, self.horizon
            ));
        }
        match self.plant_kind {
            PlantKind::Network => {
                let Some(net) = &self.network else {
                    return err("plant.kind = network needs a [network] section".into());
                };
                net.validate()?;
                if net.dg_buses.len() != n {
                    return err("network.dg_buses must list one bus per DG".into());
                }
                if self.micro_step > 1e-3 + 1e-15 {
                    return err("network plant needs sim.micro_step <= 1e-3".into());
                }
                if matches!(self.initial_state, InitialState::Explicit { .. }) {
                    return err("explicit initial state is only supported for the reduced plant".into());
                }
            }
            PlantKind::Reduced => {
                if !self.load_events.is_empty() {
                    return err("load events need plant.kind = network".into());
                }
                match &self.initial_state {
                    InitialState::DroopSettle if self.network.is_none() => {
                        return err("droop-settle initial state needs a [network] section".into());
                    }
                    InitialState::Explicit { omega, mp } if omega.len() != n || mp.len() != n => {
                        return err("plant.initial_state arrays must have one entry per DG".into());
                    }
                    _ => {}
                }
                if let Some(net) = &self.network {
                    net.validate()?;
                }
            }
        }
        if let Some(net) = &self.network {
            for ev in &self.load_events {
                if ev.load >= net.loads.len() {
                    return err(format!("event refers to load {} which does not exist", ev.load + 1));
                }
                if !(ev.t >= 0.0 && ev.t <= self.horizon) {
                    return err(format!("event time {} outside [0, horizon]", ev.t));
                }
            }
        }
        Ok(())
    }

    pub fn to_config(&self) -> ScenarioConfig {
        let n = self.n();
        let adjacency = (0..n)
            .map(|i| (0..n).map(|j| self.graph.weight(i, j)).collect())
            .collect();
        let (initial, initial_state) = match &self.initial_state {
            InitialState::DroopSettle => ("droop-settle".to_string(), None),
            InitialState::Explicit { omega, mp } => (
                "explicit".to_string(),
                Some(InitialStateConfig {
                    omega_hz: omega.iter().map(|w| w / (2.0 * PI)).collect(),
                    mp: mp.clone(),
                }),
            ),
        };
        ScenarioConfig {
            graph: GraphConfig {
                adjacency,
                pinning: self.graph.pinning().iter().copied().collect(),
            },
            controller: ControllerConfig {
                c_omega: self.controller.c_omega,
                c_p: self.controller.c_p,
                sigma_omega: self.controller.sigma_omega,
                sigma_p: self.controller.sigma_p,
                h: self.controller.h,
                omega_ref_hz: self.controller.omega_ref / (2.0 * PI),
                trigger_mode: self.controller.trigger_mode,
            },
            clocks: ClocksConfig {
                t0: self.clocks.clone(),
            },
            plant: PlantConfig {
                kind: self.plant_kind,
                initial,
                initial_state,
                dgs: self.dg_params.clone(),
            },
            network: self.network.as_ref().map(|net| NetworkConfig {
                n_buses: Some(net.n_buses),
                dg_buses: Some(net.dg_buses.iter().map(|b| b + 1).collect()),
                omega_nominal_hz: Some(net.omega_nominal / (2.0 * PI)),
                lines: net
                    .lines
                    .iter()
                    .map(|l| LineConfig {
                        from: l.from + 1,
                        to: l.to + 1,
                        r: l.r,
                        l: l.l,
                    })
                    .collect(),
                loads: net
                    .loads
                    .iter()
                    .map(|l| LoadConfig {
                        bus: l.bus + 1,
                        r: l.r,
                        l: l.l,
                        connected: l.connected,
                    })
                    .collect(),
            }),
            sim: SimConfig {
                t_on: self.t_on,
                horizon: self.horizon,
                micro_step: self.micro_step,
            },
            events: self
                .load_events
                .iter()
                .map(|e| EventConfig {
                    t: e.t,
                    load: e.load + 1,
                    action: e.action,
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// TOML mirror
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub graph: GraphConfig,
    pub controller: ControllerConfig,
    pub clocks: ClocksConfig,
    pub plant: PlantConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Row-major; `adjacency[i][j] > 0` means DG j+1 sends to DG i+1.
    pub adjacency: Vec<Vec<f64>>,
    pub pinning: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub c_omega: f64,
    pub c_p: f64,
    pub sigma_omega: f64,
    pub sigma_p: f64,
    pub h: f64,
    pub omega_ref_hz: f64,
    #[serde(default)]
    pub trigger_mode: TriggerMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClocksConfig {
    pub t0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub kind: PlantKind,
    /// `"droop-settle"` (default) or `"explicit"`.
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateConfig>,
    pub dgs: Vec<DGParams>,
}

fn default_initial() -> String {
    "droop-settle".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub omega_hz: Vec<f64>,
    /// `m_i · P_i` (rad/s).
    pub mp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Defaults to the largest bus number referenced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_buses: Option<usize>,
    /// Defaults to DG i on bus i.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dg_buses: Option<Vec<usize>>,
    /// Defaults to `controller.omega_ref_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_nominal_hz: Option<f64>,
    #[serde(default)]
    pub lines: Vec<LineConfig>,
    #[serde(default)]
    pub loads: Vec<LoadConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub bus: usize,
    pub r: f64,
    pub l: f64,
    #[serde(default = "default_true")]
    pub connected: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub t_on: f64,
    pub horizon: f64,
    pub micro_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub t: f64,
    pub load: usize,
    pub action: LoadAction,
}

fn one_based(v: usize, what: &str) -> Result<usize> {
    v.checked_sub(1)
        .ok_or_else(|| Error::ConfigInvalid(format!("{what} numbers start at 1, got 0")))
}

impl ScenarioConfig {
    pub fn into_scenario(self) -> Result<Scenario> {
        let graph = CommGraph::from_rows(&self.graph.adjacency, &self.graph.pinning)
            .map_err(|e| Error::ConfigInvalid(format!("graph: {e}")))?;
        let n = graph.n();
        let omega_ref = 2.0 * PI * self.controller.omega_ref_hz;
        let controller = ControllerParams {
            c_omega: self.controller.c_omega,
            c_p: self.controller.c_p,
            sigma_omega: self.controller.sigma_omega,
            sigma_p: self.controller.sigma_p,
            omega_ref,
            h: self.controller.h,
            trigger_mode: self.controller.trigger_mode,
        };

        let network = match self.network {
            None => None,
            Some(net) => {
                let dg_buses = match net.dg_buses {
                    Some(b) => b
                        .into_iter()
                        .map(|x| one_based(x, "network.dg_buses"))
                        .collect::<Result<Vec<_>>>()?,
                    None => (0..n).collect(),
                };
                let lines = net
                    .lines
                    .into_iter()
                    .map(|l| {
                        Ok(Line {
                            from: one_based(l.from, "network.lines bus")?,
                            to: one_based(l.to, "network.lines bus")?,
                            r: l.r,
                            l: l.l,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let loads = net
                    .loads
                    .into_iter()
                    .map(|l| {
                        Ok(Load {
                            bus: one_based(l.bus, "network.loads bus")?,
                            r: l.r,
                            l: l.l,
                            connected: l.connected,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let max_bus = dg_buses
                    .iter()
                    .copied()
                    .chain(lines.iter().flat_map(|l| [l.from, l.to]))
                    .chain(loads.iter().map(|l| l.bus))
                    .max()
                    .unwrap_or(0);
                Some(NetworkModel {
                    n_buses: net.n_buses.unwrap_or(max_bus + 1),
                    dg_buses,
                    lines,
                    loads,
                    omega_nominal: net
                        .omega_nominal_hz
                        .map(|f| 2.0 * PI * f)
                        .unwrap_or(omega_ref),
                })
            }
        };

        let initial_state = match (self.plant.initial.as_str(), self.plant.initial_state) {
            ("droop-settle", None) => InitialState::DroopSettle,
            ("explicit", Some(s)) | ("droop-settle", Some(s)) => InitialState::Explicit {
                omega: s.omega_hz.iter().map(|f| 2.0 * PI * f).collect(),
                mp: s.mp,
            },
            ("explicit", None) => {
                return Err(Error::ConfigInvalid(
                    "plant.initial = \"explicit\" needs [plant.initial_state]".into(),
                ))
            }
            (other, _) => {
                return Err(Error::ConfigInvalid(format!(
                    "plant.initial: unknown value {other:?} (expected \"droop-settle\" or \"explicit\")"
                )))
            }
        };

        let load_events = self
            .events
            .into_iter()
            .map(|e| {
                Ok(LoadEvent {
                    t: e.t,
                    load: one_based(e.load, "events load")?,
                    action: e.action,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let scenario = Scenario {
            graph,
            controller,
            plant_kind: self.plant.kind,
            dg_params: self.plant.dgs,
            network,
            clocks: self.clocks.t0,
            t_on: self.sim.t_on,
            horizon: self.sim.horizon,
            micro_step: self.sim.micro_step,
            load_events,
            initial_state,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    #[test]
    fn presets_parse_and_validate() {
        for p in Preset::ALL {
            let s = p.scenario().unwrap();
            assert_eq!(s.n(), 4);
            assert_eq!(s.clocks, vec![0.0, 0.005, 0.008, 0.009]);
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let s = Preset::Case3.scenario().unwrap();
        let text = toml::to_string(&s.to_config()).unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_config_reports_location() {
        let text = Preset::Case1.toml().replace("c_omega = 4.5", "c_omega = \"fast\"");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("c_omega"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn invariants_are_enforced() {
        let base = Preset::Case1.scenario().unwrap();

        let mut s = base.clone();
        s.clocks[1] = 0.01;
        assert!(s.validate().is_err());

        let mut s = base.clone();
        s.micro_step = 0.003;
        assert!(s.validate().is_err());

        let mut s = base.clone();
        s.horizon = 1.0;
        assert!(s.validate().is_err());

        let mut s = base.clone();
        s.dg_params.pop();
        assert!(s.validate().is_err());

        let mut s = base;
        s.load_events.push(LoadEvent {
            t: 3.0,
            load: 0,
            action: LoadAction::Connect,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = Preset::Case1.toml().replace("[sim]", "[sim]\nbogus = 1");
        assert!(Scenario::from_toml(&text).is_err());
    }
}
