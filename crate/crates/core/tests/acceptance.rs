//! Acceptance checks for the simulator. Prints one PASS/FAIL line per
//! criterion and exits nonzero if any of them fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use otto_probe::analytics::{
    amplification, delta_z, squeeze_quantum_threshold, stroboscopic_position, AnalyticContext,
    GrowthMode,
};
use otto_probe::constants::K_BOLTZMANN;
use otto_probe::engine::{peak_positions, run_engine, EngineConfig, EngineTrace, QuantumBackend};
use otto_probe::fock::{thermal_occupation, SqueezeSpec};
use otto_probe::params::TrapConfig;
use otto_probe::propagator::{
    dense_propagate_oracle, newton_propagate, NewtonConfig, PropagationStep,
};
use otto_probe::thermometry::{estimate_delta_t, run_protocol, sensitivity, ProtocolConfig};
use rand::Rng;

// Tolerances, one per criterion.
const TRAJECTORY_TOL: f64 = 0.01; // of the growth accumulated over the run
const QUADRATIC_R2_MIN: f64 = 0.999;
const GROWTH_TARGET: f64 = 2.43e-10;
const GROWTH_TOL: f64 = 0.05;
const GROWTH_EXACT_TOL: f64 = 0.005;
const SLOPE_TOL: f64 = 0.02;
const AMPLIFICATION_TOL: f64 = 0.05;
const AMPLIFICATION_R0_TOL: f64 = 0.01;
const THRESHOLD_RANGE: (f64, f64) = (1.07, 1.14);
const SENSITIVITY_RANGE: (f64, f64) = (1.2e-6, 2.2e-6);
const MONTE_CARLO_TOL: f64 = 0.20;
const ORACLE_TRACE_DISTANCE: f64 = 1e-8;
const BACKEND_REL_TOL: f64 = 1e-4;
const OCCUPATION_RANGE: (f64, f64) = (205.0, 212.0);

const T_HOT: f64 = 1.2e-3;
const T_COLD: f64 = 1.0e-3;
const Z0: f64 = -1.1e-6;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn trap() -> TrapConfig {
    TrapConfig::reference()
}

fn ctx() -> AnalyticContext {
    AnalyticContext::new(trap()).unwrap()
}

fn trajectory_cfg(backend: QuantumBackend) -> EngineConfig {
    let mut cfg = EngineConfig::new(trap(), T_HOT, T_COLD, 4).unwrap();
    cfg.initial = (Z0, 0.0);
    cfg.quantum_backend = backend;
    cfg.record_every = 100;
    cfg
}

fn trajectory_agreement(dm: &EngineTrace, dim: usize, secs: f64) -> Verdict {
    let c = ctx();
    let growth = delta_z(T_HOT, T_COLD, &c, GrowthMode::Exact).abs();
    let tol = TRAJECTORY_TOL * 4.0 * growth;
    let worst = dm
        .peaks
        .iter()
        .map(|p| (p.z - stroboscopic_position(p.n, Z0, T_HOT, T_COLD, &c)).abs())
        .fold(0.0, f64::max);
    verdict(
        dim >= 128 && worst < tol,
        format!(
            "dim {dim}, worst peak deviation {worst:.3e} m, tolerance {tol:.3e} m, runtime {secs:.0} s"
        ),
    )
}

fn quadratic_energy() -> Verdict {
    let mut cfg = EngineConfig::new(trap(), T_HOT, T_COLD, 50).unwrap();
    cfg.quantum_backend = QuantumBackend::Moments;
    cfg.record_every = 10_000;
    let trace = run_engine(&cfg).unwrap();
    // flywheel energy after N cycles; the run starts at rest at z = 0
    let mut energy = 0.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for c in &trace.ledger {
        energy += c.work;
        let n = (c.cycle + 1) as f64;
        if n >= 4.0 {
            xs.push(n);
            ys.push(energy);
        }
    }
    let sxx: f64 = xs.iter().map(|x| x.powi(4)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * x * y).sum();
    let coef = sxy / sxx;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - coef * x * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    verdict(
        r2 > QUADRATIC_R2_MIN,
        format!("E = {coef:.4e} J * N^2, R^2 = {r2:.6}"),
    )
}

fn per_cycle_growth() -> Verdict {
    let c = ctx();
    let mut cfg = EngineConfig::new(trap(), 1.0e-3, 1.2e-3, 6).unwrap();
    cfg.quantum_backend = QuantumBackend::Moments;
    cfg.record_every = 10_000;
    let even = peak_positions(&run_engine(&cfg).unwrap()).even;
    let steps: Vec<f64> = even.windows(2).skip(1).map(|w| w[1].1 - w[0].1).collect();
    let measured = steps.iter().sum::<f64>() / steps.len() as f64;
    let exact = delta_z(1.0e-3, 1.2e-3, &c, GrowthMode::Exact);
    let rel = (measured / GROWTH_TARGET - 1.0).abs();
    let rel_exact = (measured / exact - 1.0).abs();
    verdict(
        rel < GROWTH_TOL && rel_exact < GROWTH_EXACT_TOL,
        format!(
            "z(n+2) - z(n) = {measured:.4e} m, {:.2}% from 2.43e-10, {:.3}% from coth law",
            100.0 * rel,
            100.0 * rel_exact
        ),
    )
}

fn linearity() -> Verdict {
    let c = ctx();
    let n = 1000;
    let slope_want = 2.0 * n as f64 * 4.0 * K_BOLTZMANN * c.derived.gamma / c.cfg.axial_stiffness();
    let mut details = Vec::new();
    let mut pass = true;
    for base in [1.0e-3, 0.2e-3] {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in -5..=5 {
            let dt = k as f64 * 0.02e-3;
            let mut e = EngineConfig::new(trap(), base, base + dt, 1).unwrap();
            e.quantum_backend = QuantumBackend::Moments;
            // the same seed for every point: thermal spread cancels in the slope
            let pcfg = ProtocolConfig {
                n_cycles: n,
                repetitions: 2000,
                sigma_shot: 0.0,
                seed: 5,
                ..Default::default()
            };
            xs.push(dt);
            ys.push(run_protocol(&pcfg, &e).unwrap().amplitude());
        }
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let max_resid = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - my - slope * (x - mx)).abs())
            .fold(0.0, f64::max);
        let rel = (slope / slope_want - 1.0).abs();
        let linear = max_resid < 0.01 * slope.abs() * 0.1e-3;
        pass &= rel < SLOPE_TOL && linear;
        details.push(format!(
            "base {:.1} mK slope {slope:.4e} m/K ({:.2}%), max residual {max_resid:.1e} m",
            base * 1e3,
            100.0 * rel
        ));
    }
    verdict(
        pass,
        format!("expected {slope_want:.4e} m/K; {}", details.join("; ")),
    )
}

fn squeezing_amplification() -> Verdict {
    let c = ctx();
    let (t1, t2) = (0.11e-3, 0.1e-3);
    let cycles = 5;
    let base = delta_z(t1, t2, &c, GrowthMode::Exact);
    let mut pass = true;
    let mut details = Vec::new();
    for r in [0.0, 0.5, 1.0, 1.5] {
        let mut cfg = EngineConfig::new(trap(), t1, t2, cycles).unwrap();
        cfg.quantum_backend = QuantumBackend::Moments;
        cfg.record_every = 10_000;
        if r > 0.0 {
            let spec = SqueezeSpec::new(r, 0.0).unwrap();
            cfg.bath_1.squeeze_after = Some(spec);
            cfg.bath_2.squeeze_after = Some(spec);
        }
        let even = peak_positions(&run_engine(&cfg).unwrap()).even;
        let growth = (even[cycles].1 - even[1].1) / (cycles - 1) as f64;
        let sim = growth / base;
        let want = amplification(r, 0.0, c.derived.kappa);
        let rel = (sim / want - 1.0).abs();
        let tol = if r == 0.0 {
            AMPLIFICATION_R0_TOL
        } else {
            AMPLIFICATION_TOL
        };
        pass &= rel < tol;
        details.push(format!("r={r}: {sim:.4} vs {want:.4}"));
    }
    verdict(pass, details.join(", "))
}

fn quantum_threshold() -> Verdict {
    let n = thermal_occupation(0.11e-3, trap().omega_x0);
    let r = squeeze_quantum_threshold(n);
    verdict(
        (THRESHOLD_RANGE.0..=THRESHOLD_RANGE.1).contains(&r),
        format!("n_th = {n:.4}, r* = {r:.4}"),
    )
}

fn sensitivity_check() -> Verdict {
    let c = ctx();
    let n_cycles = 100_000;
    let s = sensitivity(250e-9, n_cycles, &c);
    let m = 2000;
    let sigma_shot = 250e-9 * (m as f64).sqrt();
    let predicted = sensitivity(sigma_shot / (m as f64).sqrt(), n_cycles, &c);
    let mut e = EngineConfig::new(trap(), 1.0e-3, 1.0e-3, 1).unwrap();
    e.quantum_backend = QuantumBackend::Moments;
    let runs = 200;
    let est: Vec<f64> = (0..runs)
        .map(|k| {
            let pcfg = ProtocolConfig {
                n_cycles,
                repetitions: m,
                sigma_shot,
                seed: 77_000 + k,
                ..Default::default()
            };
            let rec = run_protocol(&pcfg, &e).unwrap();
            estimate_delta_t(&rec, n_cycles, &c).unwrap().delta_t_hat
        })
        .collect();
    let mean = est.iter().sum::<f64>() / runs as f64;
    let sd = (est.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs as f64 - 1.0)).sqrt();
    let rel = (sd / predicted - 1.0).abs();
    verdict(
        (SENSITIVITY_RANGE.0..=SENSITIVITY_RANGE.1).contains(&s) && rel < MONTE_CARLO_TOL,
        format!(
            "sensitivity {:.4} uK; Monte Carlo std {:.4} uK vs {:.4} uK ({:.1}%)",
            s * 1e6,
            sd * 1e6,
            predicted * 1e6,
            100.0 * rel
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let cfg = trap();
    let tau = ctx().derived.tau_z;
    let ncfg = NewtonConfig::default();
    let mut rng = common::rng(2024);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let dim = rng.random_range(2..=16);
        let rank = rng.random_range(1..=dim);
        let state = common::random_state(dim, rank, &mut rng);
        let step = PropagationStep::new(
            tau / rng.random_range(100.0..4000.0),
            rng.random_range(-3e-6..3e-6),
        )
        .unwrap();
        let a = newton_propagate(&state, &step, &cfg, &ncfg).unwrap();
        let b = dense_propagate_oracle(&state, &step, &cfg).unwrap();
        worst = worst.max(a.trace_distance(&b));
    }
    // long run along an axial oscillation
    let dt = tau / 2000.0;
    let mut rho = common::random_state(16, 16, &mut rng);
    for k in 0..10_000 {
        let z = -2e-6 * (cfg.omega_z * k as f64 * dt).cos();
        rho = newton_propagate(&rho, &PropagationStep::new(dt, z).unwrap(), &cfg, &ncfg).unwrap();
    }
    let invariants = rho.check_invariants();
    verdict(
        worst < ORACLE_TRACE_DISTANCE && invariants.is_ok(),
        format!(
            "worst trace distance {worst:.2e}; after 1e4 steps trace err {:.1e}, hermiticity {:.1e}, min eigenvalue {:.1e}",
            (rho.trace() - 1.0).abs(),
            rho.hermiticity_error(),
            rho.min_eigenvalue()
        ),
    )
}

fn backend_equivalence(dm: &EngineTrace) -> Verdict {
    let mo = run_engine(&trajectory_cfg(QuantumBackend::Moments)).unwrap();
    let worst = dm
        .peaks
        .iter()
        .zip(&mo.peaks)
        .map(|(a, b)| (a.z - b.z).abs() / b.z.abs())
        .fold(0.0, f64::max);
    verdict(
        worst < BACKEND_REL_TOL,
        format!("worst relative peak difference {worst:.2e}"),
    )
}

fn occupation() -> Verdict {
    let n = thermal_occupation(1e-3, 2.0 * std::f64::consts::PI * 1e5);
    verdict(
        (OCCUPATION_RANGE.0..=OCCUPATION_RANGE.1).contains(&n),
        format!("n_th = {n:.2}"),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {}", v.detail);
        if !v.pass {
            failures += 1;
        }
    };

    let cfg = trajectory_cfg(QuantumBackend::DensityMatrix);
    let start = Instant::now();
    let dm = run_engine(&cfg);
    let secs = start.elapsed().as_secs_f64();
    match &dm {
        Ok(trace) => report(
            1,
            "trajectory vs stroboscopic law",
            trajectory_agreement(trace, cfg.resolved_dim(), secs),
        ),
        Err(e) => report(
            1,
            "trajectory vs stroboscopic law",
            verdict(false, e.to_string()),
        ),
    }
    report(2, "quadratic flywheel energy", quadratic_energy());
    report(3, "per-cycle growth", per_cycle_growth());
    report(4, "linearity and base independence", linearity());
    report(5, "squeezing amplification", squeezing_amplification());
    report(6, "quantum squeezing threshold", quantum_threshold());
    report(7, "sensitivity", sensitivity_check());
    report(8, "propagator oracle equivalence", oracle_equivalence());
    match &dm {
        Ok(trace) => report(9, "backend equivalence", backend_equivalence(trace)),
        Err(e) => report(9, "backend equivalence", verdict(false, e.to_string())),
    }
    report(10, "thermal occupation", occupation());

    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
