//! Generators and independent reference computations shared by the
//! integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use mgsync::controller::{ControllerParams, TriggerMode};
use mgsync::graph::{check_theorem1_condition, spectral_data, CommGraph};
use mgsync::plant::{DGParams, Line, Load, NetworkModel};
use mgsync::scenario::{InitialState, PlantKind, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OMEGA_REF: f64 = 2.0 * PI * 50.0;

/// Random strongly connected digraph: a shuffled Hamiltonian cycle plus
/// extra edges, weights in `[0.5, 2]`.
pub fn random_strong_graph<R: Rng>(rng: &mut R, n: usize, extra_edge_prob: f64) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut a = vec![vec![0.0; n]; n];
    if n > 1 {
        for k in 0..n {
            let (to, from) = (order[(k + 1) % n], order[k]);
            a[to][from] = rng.random_range(0.5..2.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && a[i][j] == 0.0 && rng.random_bool(extra_edge_prob) {
                a[i][j] = rng.random_range(0.5..2.0);
            }
        }
    }
    a
}

/// At least one pinned agent.
pub fn random_pinning<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.3) { rng.random_range(0.5..2.0) } else { 0.0 })
        .collect();
    if g.iter().all(|&x| x == 0.0) {
        g[rng.random_range(0..n)] = 1.0;
    }
    g
}

pub fn dense_laplacian(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                l[i][j] = -a[i][j];
                l[i][i] += a[i][j];
            }
        }
    }
    l
}

/// Gaussian elimination with partial pivoting on a dense real system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 1e-300, "singular system");
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl Cx {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }
    pub fn inv(self) -> Self {
        let d = self.re * self.re + self.im * self.im;
        Self::new(self.re / d, -self.im / d)
    }
    pub fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
    pub fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }
}

/// Modified nodal analysis with explicit source nodes, written out as a
/// real `2(m) × 2(m)` system. Returns per-phase `(P, Q)` of each source.
///
/// Node layout: buses `0..nb`, then one internal node per DG whose voltage
/// is fixed by an ideal source branch carrying an extra current unknown.
pub fn mna_source_powers(
    network: &NetworkModel,
    dgs: &[DGParams],
    magnitudes: &[f64],
    theta: &[f64],
) -> Vec<(f64, f64)> {
    let w = network.omega_nominal;
    let nb = network.n_buses;
    let nd = dgs.len();
    let nodes = nb + nd;
    let m = nodes + nd; // node voltages + source currents
    let mut yr = vec![vec![0.0; m]; m];
    let mut yi = vec![vec![0.0; m]; m];
    let stamp = |a: usize, b: Option<usize>, y: Cx, yr: &mut Vec<Vec<f64>>, yi: &mut Vec<Vec<f64>>| {
        yr[a][a] += y.re;
        yi[a][a] += y.im;
        if let Some(b) = b {
            yr[b][b] += y.re;
            yi[b][b] += y.im;
            yr[a][b] -= y.re;
            yi[a][b] -= y.im;
            yr[b][a] -= y.re;
            yi[b][a] -= y.im;
        }
    };
    for l in &network.lines {
        stamp(l.from, Some(l.to), Cx::new(l.r, w * l.l).inv(), &mut yr, &mut yi);
    }
    for l in network.loads.iter().filter(|l| l.connected) {
        stamp(l.bus, None, Cx::new(l.r, w * l.l).inv(), &mut yr, &mut yi);
    }
    for (k, d) in dgs.iter().enumerate() {
        let node = nb + k;
        stamp(network.dg_buses[k], Some(node), Cx::new(d.r_c, w * d.l_c).inv(), &mut yr, &mut yi);
        // source current leaves the internal node into the network
        let cur = nodes + k;
        yr[node][cur] -= 1.0;
        yr[cur][node] += 1.0;
    }
    let mut rhs_r = vec![0.0; m];
    let mut rhs_i = vec![0.0; m];
    for k in 0..nd {
        rhs_r[nodes + k] = magnitudes[k] * theta[k].cos();
        rhs_i[nodes + k] = magnitudes[k] * theta[k].sin();
    }
    // [Yr −Yi; Yi Yr] [xr; xi] = [br; bi]
    let mut big = vec![vec![0.0; 2 * m]; 2 * m];
    for r in 0..m {
        for c in 0..m {
            big[r][c] = yr[r][c];
            big[r][m + c] = -yi[r][c];
            big[m + r][c] = yi[r][c];
            big[m + r][m + c] = yr[r][c];
        }
    }
    let b: Vec<f64> = rhs_r.iter().chain(&rhs_i).copied().collect();
    let x = gauss_solve(big, b);
    (0..nd)
        .map(|k| {
            let e = Cx::new(x[nb + k], x[m + nb + k]);
            let i = Cx::new(x[nodes + k], x[m + nodes + k]);
            let s = e.mul(i.conj());
            (s.re, s.im)
        })
        .collect()
}

/// Random radial-plus-chords network with `n_buses ≤ 6`, one DG per bus
/// for the first `n_dg` buses.
pub fn random_network<R: Rng>(rng: &mut R) -> (NetworkModel, Vec<DGParams>) {
    let nb = rng.random_range(1..=6);
    let n_dg = rng.random_range(1..=nb);
    let mut lines = Vec::new();
    for b in 1..nb {
        lines.push(Line {
            from: rng.random_range(0..b),
            to: b,
            r: rng.random_range(0.05..1.0),
            l: rng.random_range(1e-4..3e-3),
        });
    }
    if nb > 2 && rng.random_bool(0.5) {
        lines.push(Line {
            from: 0,
            to: nb - 1,
            r: rng.random_range(0.05..1.0),
            l: rng.random_range(1e-4..3e-3),
        });
    }
    let mut loads = Vec::new();
    for bus in 0..nb {
        if rng.random_bool(0.8) {
            loads.push(Load {
                bus,
                r: rng.random_range(5.0..60.0),
                l: rng.random_range(0.0..0.08),
                connected: true,
            });
        }
    }
    let dgs = (0..n_dg)
        .map(|_| DGParams {
            m_p: rng.random_range(5e-5..2e-4),
            n_q: rng.random_range(5e-4..2e-3),
            v_nominal: 380.0,
            r_c: rng.random_range(0.01..0.1),
            l_c: rng.random_range(1e-4..1e-3),
        })
        .collect();
    let network = NetworkModel {
        n_buses: nb,
        dg_buses: (0..n_dg).collect(),
        lines,
        loads,
        omega_nominal: OMEGA_REF,
    };
    (network, dgs)
}

pub fn plain_dg() -> DGParams {
    DGParams {
        m_p: 1e-4,
        n_q: 1e-3,
        v_nominal: 380.0,
        r_c: 0.03,
        l_c: 0.35e-3,
    }
}

/// Reduced-plant scenario with an explicit initial state.
#[allow(clippy::too_many_arguments)]
pub fn reduced_scenario(
    adjacency: &[Vec<f64>],
    pinning: &[f64],
    c: f64,
    sigma: f64,
    h: f64,
    micro_step: f64,
    clocks: Vec<f64>,
    t_on: f64,
    horizon: f64,
    omega0: Vec<f64>,
    mp0: Vec<f64>,
) -> Scenario {
    let n = pinning.len();
    Scenario {
        graph: CommGraph::from_rows(adjacency, pinning).expect("graph"),
        controller: ControllerParams {
            c_omega: c,
            c_p: c,
            sigma_omega: sigma,
            sigma_p: sigma,
            omega_ref: OMEGA_REF,
            h,
            trigger_mode: TriggerMode::Independent,
        },
        plant_kind: PlantKind::Reduced,
        dg_params: vec![plain_dg(); n],
        network: None,
        clocks,
        t_on,
        horizon,
        micro_step,
        load_events: vec![],
        initial_state: InitialState::Explicit { omega: omega0, mp: mp0 },
    }
}

/// Piecewise-constant error pattern: `(segment length, error)` pairs
/// covering one check window. Breakpoints sit on a `h/ticks` grid, as
/// broadcast changes do in the engine.
pub fn random_pattern<R: Rng>(rng: &mut R, h: f64, ticks: usize) -> Vec<(f64, f64)> {
    let k = rng.random_range(1..=8);
    let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.random_range(0..=ticks)).collect();
    cuts.push(0);
    cuts.push(ticks);
    cuts.sort_unstable();
    let dt = h / ticks as f64;
    cuts.windows(2)
        .map(|w| ((w[1] - w[0]) as f64 * dt, rng.random_range(-5.0..5.0)))
        .collect()
}

/// Midpoint Riemann sum of `e²` over a piecewise-constant pattern.
pub fn riemann_square_integral(pattern: &[(f64, f64)], points: usize) -> f64 {
    let total: f64 = pattern.iter().map(|p| p.0).sum();
    let dz = total / points as f64;
    let mut bounds = Vec::with_capacity(pattern.len());
    let mut acc = 0.0;
    for (len, e) in pattern {
        acc += len;
        bounds.push((acc, *e));
    }
    (0..points)
        .map(|k| {
            let z = (k as f64 + 0.5) * dz;
            let e = bounds
                .iter()
                .find(|(end, _)| z < *end)
                .map(|b| b.1)
                .unwrap_or(bounds.last().unwrap().1);
            e * e * dz
        })
        .sum()
}

/// Horizon used for the randomized convergence property.
pub const CONVERGENCE_HORIZON: f64 = 20.0;

/// Random pinned digraph with gain and `σ` chosen so that the sufficient
/// condition holds with margin. Graphs whose slowest mode needs more than
/// `40 / (c·μ_min)` > `CONVERGENCE_HORIZON` seconds are redrawn.
pub fn random_convergent_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.01;
    loop {
        let n = rng.random_range(1..=6);
        let a = random_strong_graph(&mut rng, n, 0.3);
        let g = random_pinning(&mut rng, n);
        let graph = CommGraph::from_rows(&a, &g).unwrap();
        let unit = spectral_data(&graph, 1.0).unwrap().lambda;
        // h/2 alone uses half the budget, gain capped at 6
        let c = (1.0 / (h * unit)).min(6.0);
        let slowest = graph
            .pinned_laplacian(c)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min);
        if 40.0 / slowest > CONVERGENCE_HORIZON {
            continue;
        }
        let lambda = c * unit;
        let sigma = 0.5 * (1.0 / lambda - h / 2.0);
        assert!(check_theorem1_condition(h, sigma, lambda));
        let clocks = (0..n).map(|_| rng.random_range(0..10) as f64 * 1e-3).collect();
        let omega0 = (0..n)
            .map(|_| OMEGA_REF + rng.random_range(-2.0..0.5))
            .collect();
        let mp0 = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        return reduced_scenario(&a, &g, c, sigma, h, 1e-3, clocks, 0.0, CONVERGENCE_HORIZON, omega0, mp0);
    }
}
