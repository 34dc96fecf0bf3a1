//! Plant models.
//!
//! * Reduced: `ω̇_i = u_ω,i`, `d(m_i P_i)/dt = u_P,i`. Inputs are held
//!   between broadcasts, so a step is exact.
//! * Network: quasi-static phasor circuit. Each DG is an ideal source
//!   `V_i ∠ θ_i` behind its connector impedance, lines and loads are
//!   constant impedances at nominal frequency, and the droop laws
//!   `ω_i = ω_n,i − m_i P_i`, `V_i = V_n,i − n_i Q_i` close the loop.
//!
//! Circuit quantities are single-phase; DG powers reported by the network
//! plant are three-phase totals.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Balanced three-phase system, solved per phase.
pub const PHASES: f64 = 3.0;
/// Convergence threshold of the droop-voltage Newton iteration (V).
pub const VOLTAGE_TOL: f64 = 1e-9;
const MAX_NEWTON_ITERS: usize = 50;

type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DGParams {
    /// Frequency droop slope (rad/s per W).
    pub m_p: f64,
    /// Voltage droop slope (V per var).
    pub n_q: f64,
    pub v_nominal: f64,
    /// Connector resistance (Ω).
    pub r_c: f64,
    /// Connector inductance (H).
    pub l_c: f64,
}

impl DGParams {
    pub fn validate(&self, idx: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::ConfigInvalid(format!("plant.dgs[{idx}].{what}")));
        if !(self.m_p.is_finite() && self.m_p > 0.0) {
            return bad("m_p must be > 0");
        }
        if !(self.n_q.is_finite() && self.n_q >= 0.0) {
            return bad("n_q must be >= 0");
        }
        if !(self.v_nominal.is_finite() && self.v_nominal > 0.0) {
            return bad("v_nominal must be > 0");
        }
        if !(self.r_c >= 0.0 && self.l_c >= 0.0) {
            return bad("r_c and l_c must be >= 0");
        }
        Ok(())
    }

    fn connector(&self, omega: f64) -> C64 {
        C64::new(self.r_c, omega * self.l_c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Ω
    pub r: f64,
    /// H
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: usize,
    /// Ω
    pub r: f64,
    /// H
    pub l: f64,
    #[serde(default = "default_true")]
    pub connected: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub n_buses: usize,
    /// Bus each DG's connector attaches to.
    pub dg_buses: Vec<usize>,
    pub lines: Vec<Line>,
    pub loads: Vec<Load>,
    /// Frequency at which reactances are evaluated (rad/s).
    pub omega_nominal: f64,
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::ConfigInvalid(m));
        if self.n_buses == 0 {
            return err("network has no buses".into());
        }
        if self.dg_buses.is_empty() {
            return err("network has no DG sources".into());
        }
        if let Some(b) = self.dg_buses.iter().find(|&&b| b >= self.n_buses) {
            return err(format!("DG bus {b} out of range"));
        }
        for (k, line) in self.lines.iter().enumerate() {
            if line.from >= self.n_buses || line.to >= self.n_buses || line.from == line.to {
                return err(format!("network.lines[{k}] has invalid endpoints"));
            }
            if !(line.r >= 0.0 && line.l >= 0.0) || (line.r == 0.0 && line.l == 0.0) {
                return err(format!("network.lines[{k}] needs non-negative, non-zero impedance"));
            }
        }
        for (k, load) in self.loads.iter().enumerate() {
            if load.bus >= self.n_buses {
                return err(format!("network.loads[{k}] bus out of range"));
            }
            if !(load.r >= 0.0 && load.l >= 0.0) || (load.r == 0.0 && load.l == 0.0) {
                return err(format!("network.loads[{k}] needs non-negative, non-zero impedance"));
            }
        }
        // every bus reachable through lines
        let mut seen = vec![false; self.n_buses];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(b) = stack.pop() {
            for line in &self.lines {
                for (u, v) in [(line.from, line.to), (line.to, line.from)] {
                    if u == b && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        if let Some(b) = seen.iter().position(|s| !s) {
            return err(format!("bus {b} is not connected to bus 0"));
        }
        Ok(())
    }

    pub fn set_load_connected(&mut self, load: usize, connected: bool) -> Result<()> {
        let slot = self
            .loads
            .get_mut(load)
            .ok_or_else(|| Error::ConfigInvalid(format!("load {load} does not exist")))?;
        slot.connected = connected;
        Ok(())
    }

    /// Total per-phase active power drawn by connected loads at the given
    /// bus voltages.
    pub fn load_power(&self, bus_voltages: &[C64]) -> f64 {
        self.loads
            .iter()
            .filter(|l| l.connected)
            .map(|l| {
                let z = C64::new(l.r, self.omega_nominal * l.l);
                let v = bus_voltages[l.bus];
                (v * (v / z).conj()).re
            })
            .sum()
    }

    /// Per-phase I²R losses in lines.
    pub fn line_losses(&self, bus_voltages: &[C64]) -> f64 {
        self.lines
            .iter()
            .map(|l| {
                let z = C64::new(l.r, self.omega_nominal * l.l);
                let i = (bus_voltages[l.from] - bus_voltages[l.to]) / z;
                i.norm_sqr() * l.r
            })
            .sum()
    }

    fn bus_admittance(&self, dgs: &[DGParams]) -> DMatrix<C64> {
        let n = self.n_buses;
        let w = self.omega_nominal;
        let mut y = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for line in &self.lines {
            let ya = C64::new(1.0, 0.0) / C64::new(line.r, w * line.l);
            y[(line.from, line.from)] += ya;
            y[(line.to, line.to)] += ya;
            y[(line.from, line.to)] -= ya;
            y[(line.to, line.from)] -= ya;
        }
        for load in self.loads.iter().filter(|l| l.connected) {
            y[(load.bus, load.bus)] += C64::new(1.0, 0.0) / C64::new(load.r, w * load.l);
        }
        for (dg, &bus) in dgs.iter().zip(&self.dg_buses) {
            let z = dg.connector(w);
            if z.norm_sqr() > 0.0 {
                y[(bus, bus)] += C64::new(1.0, 0.0) / z;
            }
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasorSolution {
    /// Per-phase active power injected by each DG (W).
    pub p: Vec<f64>,
    /// Per-phase reactive power injected by each DG (var).
    pub q: Vec<f64>,
    pub bus_voltages: Vec<C64>,
    pub source_currents: Vec<C64>,
}

/// Solves the nodal equations for given source magnitudes and angles.
///
/// Sources with zero connector impedance pin their bus voltage directly.
pub fn phasor_solve(
    network: &NetworkModel,
    dgs: &[DGParams],
    magnitudes: &[f64],
    theta: &[f64],
) -> Result<PhasorSolution> {
    let n_dg = network.dg_buses.len();
    if dgs.len() != n_dg || magnitudes.len() != n_dg || theta.len() != n_dg {
        return Err(Error::DimensionMismatch {
            expected: n_dg,
            found: dgs.len().min(magnitudes.len()).min(theta.len()),
        });
    }
    let w = network.omega_nominal;
    let nb = network.n_buses;
    let y = network.bus_admittance(dgs);
    let sources: Vec<C64> = magnitudes
        .iter()
        .zip(theta)
        .map(|(&v, &th)| C64::from_polar(v, th))
        .collect();

    let mut fixed: Vec<Option<C64>> = vec![None; nb];
    let mut injection = vec![C64::new(0.0, 0.0); nb];
    for (k, (dg, &bus)) in dgs.iter().zip(&network.dg_buses).enumerate() {
        let z = dg.connector(w);
        if z.norm_sqr() > 0.0 {
            injection[bus] += sources[k] / z;
        } else {
            if fixed[bus].is_some() {
                return Err(Error::SingularNetwork);
            }
            fixed[bus] = Some(sources[k]);
        }
    }

    let free: Vec<usize> = (0..nb).filter(|&b| fixed[b].is_none()).collect();
    let mut v = vec![C64::new(0.0, 0.0); nb];
    for b in 0..nb {
        if let Some(e) = fixed[b] {
            v[b] = e;
        }
    }
    if !free.is_empty() {
        let m = free.len();
        let a = DMatrix::from_fn(m, m, |r, c| y[(free[r], free[c])]);
        let rhs = DVector::from_fn(m, |r, _| {
            let b = free[r];
            let coupled: C64 = (0..nb)
                .filter_map(|f| fixed[f].map(|e| y[(b, f)] * e))
                .sum();
            injection[b] - coupled
        });
        let sol = a.lu().solve(&rhs).ok_or(Error::SingularNetwork)?;
        if sol.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::SingularNetwork);
        }
        for (r, &b) in free.iter().enumerate() {
            v[b] = sol[r];
        }
    }

    let mut currents = Vec::with_capacity(n_dg);
    for (k, (dg, &bus)) in dgs.iter().zip(&network.dg_buses).enumerate() {
        let z = dg.connector(w);
        let i = if z.norm_sqr() > 0.0 {
            (sources[k] - v[bus]) / z
        } else {
            // everything leaving the pinned bus comes from this source
            let out: C64 = (0..nb).map(|c| y[(bus, c)] * v[c]).sum();
            out - injection[bus]
        };
        currents.push(i);
    }
    let (p, q) = sources
        .iter()
        .zip(&currents)
        .map(|(e, i)| {
            let s = e * i.conj();
            (s.re, s.im)
        })
        .unzip();
    Ok(PhasorSolution {
        p,
        q,
        bus_voltages: v,
        source_currents: currents,
    })
}

/// Source-to-source admittance: `I = Y · E` for the DG source phasors.
/// Depends only on topology and which loads are connected.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAdmittance {
    y: DMatrix<C64>,
}

impl SourceAdmittance {
    pub fn build(network: &NetworkModel, dgs: &[DGParams]) -> Result<Self> {
        let n = dgs.len();
        let mut y = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        let zeros = vec![0.0; n];
        for k in 0..n {
            let mut mags = vec![0.0; n];
            mags[k] = 1.0;
            let sol = phasor_solve(network, dgs, &mags, &zeros)?;
            for (r, i) in sol.source_currents.iter().enumerate() {
                y[(r, k)] = *i;
            }
        }
        Ok(Self { y })
    }

    /// Per-phase `S_i = E_i · conj(I_i)` for sources `V_i ∠ θ_i`.
    pub fn powers(&self, magnitudes: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.coupling(theta);
        let n = magnitudes.len();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            let s: C64 = (0..n).map(|j| m[(i, j)] * magnitudes[j]).sum::<C64>() * magnitudes[i];
            p[i] = s.re;
            q[i] = s.im;
        }
        (p, q)
    }

    /// `M_ij = conj(Y_ij) · e^{j(θ_i − θ_j)}`, so `S = V ⊙ (M V)`.
    fn coupling(&self, theta: &[f64]) -> DMatrix<C64> {
        let n = theta.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.y[(i, j)].conj() * C64::from_polar(1.0, theta[i] - theta[j])
        })
    }

    /// Solves `V_i = V_n,i − n_i · Q_i(V)` (three-phase Q) by Newton's
    /// method. Returns magnitudes and three-phase `(P, Q)`.
    pub fn droop_voltages(
        &self,
        dgs: &[DGParams],
        theta: &[f64],
        warm_start: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = dgs.len();
        let b = self.coupling(theta).map(|c| c.im * PHASES);
        let mut v = DVector::from_column_slice(warm_start);
        for _ in 0..MAX_NEWTON_ITERS {
            let bv = &b * &v;
            let mut residual = DVector::zeros(n);
            let mut jac = DMatrix::identity(n, n);
            for i in 0..n {
                let q = v[i] * bv[i];
                residual[i] = v[i] - (dgs[i].v_nominal - dgs[i].n_q * q);
                for k in 0..n {
                    let mut dq = v[i] * b[(i, k)];
                    if i == k {
                        dq += bv[i];
                    }
                    jac[(i, k)] += dgs[i].n_q * dq;
                }
            }
            let step = jac.lu().solve(&residual).ok_or(Error::VoltageDivergence)?;
            v -= &step;
            if step.amax() < VOLTAGE_TOL {
                let mags: Vec<f64> = v.iter().copied().collect();
                let (p, q) = self.powers(&mags, theta);
                let p = p.into_iter().map(|x| x * PHASES).collect();
                let q = q.into_iter().map(|x| x * PHASES).collect();
                return Ok((mags, p, q));
            }
            if v.iter().any(|x| !x.is_finite()) {
                break;
            }
        }
        Err(Error::VoltageDivergence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantState {
    /// Operating frequencies (rad/s).
    pub omega: Vec<f64>,
    /// Secondary set points `ω_n` (rad/s).
    pub omega_n: Vec<f64>,
    /// Angles relative to DG 1's rotating frame (rad).
    pub theta: Vec<f64>,
    /// Active power (W).
    pub p: Vec<f64>,
    /// Reactive power (var).
    pub q: Vec<f64>,
    /// `m_i · P_i` (rad/s).
    pub mp: Vec<f64>,
    /// Droop voltage magnitudes (V).
    pub voltage: Vec<f64>,
}

impl PlantState {
    /// Reduced-model state from frequencies and `m·P` values.
    pub fn reduced(dgs: &[DGParams], omega: Vec<f64>, mp: Vec<f64>) -> Self {
        let n = dgs.len();
        let p = mp.iter().zip(dgs).map(|(x, d)| x / d.m_p).collect();
        let omega_n = omega.iter().zip(&mp).map(|(w, x)| w + x).collect();
        Self {
            omega,
            omega_n,
            theta: vec![0.0; n],
            p,
            q: vec![0.0; n],
            mp,
            voltage: dgs.iter().map(|d| d.v_nominal).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }
}

pub fn reduced_step(
    state: &PlantState,
    dgs: &[DGParams],
    u_omega: &[f64],
    u_p: &[f64],
    dt: f64,
) -> PlantState {
    let mut next = state.clone();
    for i in 0..state.n() {
        next.omega[i] += u_omega[i] * dt;
        next.mp[i] += u_p[i] * dt;
        next.p[i] = next.mp[i] / dgs[i].m_p;
        next.omega_n[i] = next.omega[i] + next.mp[i];
    }
    next
}

/// Quasi-static network plant with a cached source admittance.
#[derive(Debug, Clone)]
pub struct NetworkPlant {
    pub network: NetworkModel,
    pub dgs: Vec<DGParams>,
    admittance: SourceAdmittance,
}

impl NetworkPlant {
    pub fn new(network: NetworkModel, dgs: Vec<DGParams>) -> Result<Self> {
        network.validate()?;
        if network.dg_buses.len() != dgs.len() {
            return Err(Error::DimensionMismatch {
                expected: dgs.len(),
                found: network.dg_buses.len(),
            });
        }
        let admittance = SourceAdmittance::build(&network, &dgs)?;
        Ok(Self {
            network,
            dgs,
            admittance,
        })
    }

    pub fn set_load_connected(&mut self, load: usize, connected: bool) -> Result<()> {
        self.network.set_load_connected(load, connected)?;
        self.admittance = SourceAdmittance::build(&self.network, &self.dgs)?;
        Ok(())
    }

    /// Primary-only start: `ω_n = ω_ref`, `θ = 0`, nominal voltages.
    pub fn initial_state(&self, omega_ref: f64) -> Result<PlantState> {
        let n = self.dgs.len();
        let state = PlantState {
            omega: vec![omega_ref; n],
            omega_n: vec![omega_ref; n],
            theta: vec![0.0; n],
            p: vec![0.0; n],
            q: vec![0.0; n],
            mp: vec![0.0; n],
            voltage: self.dgs.iter().map(|d| d.v_nominal).collect(),
        };
        self.resolve(state)
    }

    /// Re-solves the algebraic part at the current angles and set points.
    pub fn resolve(&self, mut state: PlantState) -> Result<PlantState> {
        let (v, p, q) = self
            .admittance
            .droop_voltages(&self.dgs, &state.theta, &state.voltage)?;
        for i in 0..self.dgs.len() {
            state.mp[i] = self.dgs[i].m_p * p[i];
            state.omega[i] = state.omega_n[i] - state.mp[i];
        }
        state.voltage = v;
        state.p = p;
        state.q = q;
        Ok(state)
    }

    /// `ω_n += (u_ω + u_P)·dt`, `θ += (ω − ω_1)·dt`, then re-solve.
    pub fn step(
        &self,
        state: &PlantState,
        u_omega: &[f64],
        u_p: &[f64],
        dt: f64,
    ) -> Result<PlantState> {
        let mut next = state.clone();
        let reference = state.omega[0];
        for i in 0..state.n() {
            next.omega_n[i] += (u_omega[i] + u_p[i]) * dt;
            next.theta[i] += (state.omega[i] - reference) * dt;
        }
        self.resolve(next)
    }

    /// Runs the primary-only system until frequencies stop moving
    /// (`max |Δω| < tol` per step) or `max_time` elapses.
    pub fn settle(&self, omega_ref: f64, dt: f64, tol: f64, max_time: f64) -> Result<PlantState> {
        let n = self.dgs.len();
        let zeros = vec![0.0; n];
        let mut state = self.initial_state(omega_ref)?;
        let steps = (max_time / dt).ceil() as usize;
        for _ in 0..steps {
            let next = self.step(&state, &zeros, &zeros, dt)?;
            let change = next
                .omega
                .iter()
                .zip(&state.omega)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            state = next;
            if change < tol {
                break;
            }
        }
        Ok(state)
    }
}

/// Free function form of one network step.
pub fn network_step(
    plant: &NetworkPlant,
    state: &PlantState,
    u_omega: &[f64],
    u_p: &[f64],
    dt: f64,
) -> Result<PlantState> {
    plant.step(state, u_omega, u_p, dt)
}
