//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use mgsync::analysis::{compare, condition_echo, simulate};
use mgsync::controller::{Channel, TriggerState};
use mgsync::engine::run;
use mgsync::graph::{
    check_theorem1_condition, compute_lambda, disagreement_lambda, laplacian, left_perron_vector,
    lemma1_check, CommGraph,
};
use mgsync::output::{events_json, write_trace_csv};
use mgsync::plant::{phasor_solve, DGParams, Load, NetworkModel};
use mgsync::presets::Preset;
use mgsync::trace::{event_counts, max_frequency_error, sharing_mismatch};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 1 mHz in rad/s.
const FREQ_TOL: f64 = 2.0 * PI * 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ring_graph() -> CommGraph {
    CommGraph::directed_ring(4, &[1.0, 0.0, 0.0, 0.0]).unwrap()
}

fn lambda_reproduction() -> Outcome {
    let graph = ring_graph();
    let lambda = compute_lambda(&graph.pinned_laplacian(4.5), &DMatrix::identity(4, 4)).unwrap();
    let unpinned = disagreement_lambda(&laplacian(&graph), &DMatrix::identity(4, 4), 4.5).unwrap();
    outcome(
        (lambda - 9.0).abs() <= 1e-6,
        format!("lambda = {lambda:.8} (expected 9 ± 1e-6); unpinned disagreement ratio = {unpinned:.8}"),
    )
}

fn condition_arithmetic() -> Outcome {
    let a = check_theorem1_condition(0.01, 0.1, 9.0);
    let b = check_theorem1_condition(0.03, 0.1, 9.0);
    outcome(a && !b, format!("(0.01, 0.1, 9) -> {a}, (0.03, 0.1, 9) -> {b}"))
}

fn case1_restoration() -> Outcome {
    let scenario = Preset::Case1.scenario().unwrap();
    let start = Instant::now();
    let log = run(&scenario).unwrap();
    let wall = start.elapsed().as_secs_f64();
    let last = log.last();
    let err = max_frequency_error(last, scenario.controller.omega_ref);
    let mismatch = sharing_mismatch(last);
    outcome(
        err <= FREQ_TOL && mismatch <= 1e-3 && wall < 5.0,
        format!(
            "max|w-w_ref|(5 s) = {err:.6} rad/s (tol {FREQ_TOL:.6}), sharing mismatch = {mismatch:.3e} rad/s (tol 1e-3), wall {wall:.3} s"
        ),
    )
}

fn time_triggered_count() -> Outcome {
    let report = compare(&Preset::Case1.scenario().unwrap()).unwrap();
    let counts = &report.time_triggered.events.frequency;
    let power = &report.time_triggered.events.power;
    let pass = counts.per_dg.iter().all(|&c| c == 300) && counts.total == 1200 && power.total == 1200;
    outcome(
        pass,
        format!("frequency per DG {:?} total {}, power total {}", counts.per_dg, counts.total, power.total),
    )
}

fn communication_reduction() -> Outcome {
    let scenario = Preset::Case1.scenario().unwrap();
    let log = run(&scenario).unwrap();
    let window = (scenario.t_on, scenario.horizon);
    let f = event_counts(&log, window, Channel::Frequency);
    let p = event_counts(&log, window, Channel::Power);
    outcome(
        f.total <= 480,
        format!(
            "frequency events {:?} total {} ({:.1}% of 1200, limit 480; reference point 233), power total {}",
            f.per_dg,
            f.total,
            100.0 * f.total as f64 / 1200.0,
            p.total
        ),
    )
}

fn baseline_equivalence() -> Outcome {
    let report = compare(&Preset::Case2.scenario().unwrap()).unwrap();
    let worst = report.terminal_frequency_difference.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= FREQ_TOL,
        format!("max per-DG |w_ET(T) - w_TT(T)| = {worst:.6} rad/s (tol {FREQ_TOL:.6})"),
    )
}

fn case3_robustness() -> Outcome {
    let scenario = Preset::Case3.scenario().unwrap();
    let log = run(&scenario).unwrap();
    let reference = scenario.controller.omega_ref;
    let ms = scenario.micro_step;
    let before_disconnect = max_frequency_error(log.sample_at(8.0 - ms), reference);
    let at_horizon = max_frequency_error(log.last(), reference);
    let total = |t: f64| log.sample_at(t).p.iter().sum::<f64>();
    let (p_before, p_after) = (total(5.0 - ms), total(5.0));
    let pass = before_disconnect <= FREQ_TOL && at_horizon <= FREQ_TOL && p_after > p_before;
    outcome(
        pass,
        format!(
            "max|w-w_ref| just before 8 s = {before_disconnect:.6}, at 11 s = {at_horizon:.6} rad/s (tol {FREQ_TOL:.6}); sum P {p_before:.1} -> {p_after:.1} W at 5 s"
        ),
    )
}

fn window_integral_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pattern = common::random_pattern(&mut rng, 0.01, 100);
        let mut state = TriggerState::start(Channel::Frequency, 0.0, 0.0);
        let mut t = 0.0;
        for &(len, e) in &pattern {
            t += len;
            state.close_segment(e, t).unwrap();
        }
        let oracle = common::riemann_square_integral(&pattern, 10_000);
        worst = worst.max((state.window_integral - oracle).abs() / oracle.abs());
    }
    outcome(worst <= 1e-10, format!("100 patterns, worst relative deviation {worst:.3e} (tol 1e-10)"))
}

fn perron_vector_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut residual, mut min_w, mut failures): (f64, f64, usize) = (0.0, f64::INFINITY, 0);
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let a = common::random_strong_graph(&mut rng, n, 0.3);
        let g = common::random_pinning(&mut rng, n);
        let graph = CommGraph::from_rows(&a, &g).unwrap();
        let l = laplacian(&graph);
        let w = left_perron_vector(&l).unwrap();
        residual = residual.max((w.transpose() * &l).amax());
        min_w = min_w.min(w.min());
        if !lemma1_check(&l, &w).unwrap() {
            failures += 1;
        }
    }
    outcome(
        residual <= 1e-9 && min_w > 0.0 && failures == 0,
        format!("50 digraphs: max |wL| = {residual:.2e}, min w = {min_w:.4}, semidefiniteness failures {failures}"),
    )
}

fn randomized_convergence() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..25 {
        let s = common::random_convergent_scenario(seed);
        let log = run(&s).unwrap();
        worst = worst.max(max_frequency_error(log.last(), s.controller.omega_ref));
    }
    // violation control: h/2 + σ = 2/λ
    let mut control = common::random_convergent_scenario(0);
    let echo = condition_echo(&control).unwrap();
    let sigma = 2.0 / echo.lambda - control.controller.h / 2.0;
    control.controller.sigma_omega = sigma;
    control.controller.sigma_p = sigma;
    let control_note = match run(&control) {
        Ok(log) => format!(
            "violation control (sigma {sigma:.4}) ends at {:.3e} rad/s",
            max_frequency_error(log.last(), control.controller.omega_ref)
        ),
        Err(e) => format!("violation control (sigma {sigma:.4}) errored: {e}"),
    };
    outcome(
        worst <= 1e-4,
        format!("25 scenarios, worst terminal error {worst:.3e} rad/s (tol 1e-4); {control_note}"),
    )
}

fn circuit_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (network, dgs) = common::random_network(&mut rng);
        let n = dgs.len();
        let mags: Vec<f64> = (0..n).map(|_| rng.random_range(360.0..400.0)).collect();
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let sol = phasor_solve(&network, &dgs, &mags, &theta).unwrap();
        let oracle = common::mna_source_powers(&network, &dgs, &mags, &theta);
        let scale = oracle.iter().map(|(p, q)| p.abs().max(q.abs())).fold(1.0, f64::max);
        for k in 0..n {
            worst = worst.max((sol.p[k] - oracle[k].0).abs() / scale);
            worst = worst.max((sol.q[k] - oracle[k].1).abs() / scale);
        }
    }
    let network = NetworkModel {
        n_buses: 1,
        dg_buses: vec![0],
        lines: vec![],
        loads: vec![Load { bus: 0, r: 20.0, l: 0.0, connected: true }],
        omega_nominal: common::OMEGA_REF,
    };
    let dg = DGParams { r_c: 0.0, l_c: 0.0, ..common::plain_dg() };
    let single = phasor_solve(&network, &[dg], &[380.0], &[0.0]).unwrap().p[0];
    let expected = 380.0 * 380.0 / 20.0;
    let single_err = (single - expected).abs() / expected;
    outcome(
        worst <= 1e-9 && single_err <= 1e-14,
        format!("50 networks, worst relative deviation {worst:.3e} (tol 1e-9); single DG P = {single} W vs V^2/R = {expected} W"),
    )
}

fn determinism() -> Outcome {
    let mut mismatched = Vec::new();
    for preset in Preset::ALL {
        let render = || {
            let (log, _) = simulate(&preset.scenario().unwrap()).unwrap();
            let mut trace = Vec::new();
            write_trace_csv(&log, &mut trace).unwrap();
            (trace, events_json(&log))
        };
        if render() != render() {
            mismatched.push(preset.name());
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("trace.csv and events.json compared for all presets; mismatches: {mismatched:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("lambda reproduction", lambda_reproduction),
        ("condition arithmetic", condition_arithmetic),
        ("case 1 restoration", case1_restoration),
        ("time-triggered baseline count", time_triggered_count),
        ("communication reduction", communication_reduction),
        ("baseline equivalence", baseline_equivalence),
        ("case 3 robustness", case3_robustness),
        ("window-integral oracle", window_integral_oracle),
        ("Perron vector suite", perron_vector_suite),
        ("randomized convergence", randomized_convergence),
        ("circuit oracle", circuit_oracle),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2}. {name}: {}", k + 1, result.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
