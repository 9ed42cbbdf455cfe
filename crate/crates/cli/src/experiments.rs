//! The named experiments behind the command line. Each one writes a data
//! CSV and a JSON sidecar holding the resolved configuration and summary
//! numbers; simulated columns sit next to their closed-form counterparts.

use std::fs;
use std::path::{Path, PathBuf};

use otto_probe::analytics::{
    amplification, delta_z, protocol_amplitude, squeeze_quantum_threshold, stroboscopic_position,
    AnalyticContext, GrowthMode,
};
use otto_probe::engine::{peak_positions, run_engine, BathSpec, EngineConfig};
use otto_probe::error::Error;
use otto_probe::fock::{thermal_occupation, SqueezeSpec};
use otto_probe::thermometry::{estimate_delta_t, run_protocol, sensitivity};
use serde_json::{json, Value};

use crate::config::{parse_config, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Trajectory,
    Energy,
    DtSweep,
    SqueezeSweep,
    Protocol,
    Threshold,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Trajectory => "trajectory",
            Command::Energy => "energy",
            Command::DtSweep => "dt-sweep",
            Command::SqueezeSweep => "squeeze-sweep",
            Command::Protocol => "protocol",
            Command::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    /// `key=value` pairs applied after the file.
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    /// 2 for bad input, 3 for failures inside the numerics or while writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_config_error() => 2,
            CliError::Output(_) => 2,
            CliError::Model(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Model(e) => e.kind(),
            CliError::Output(_) => "output",
        };
        json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

/// Scientific notation with enough digits to round-trip.
fn sci(x: f64) -> String {
    format!("{x:.15e}")
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        w.write_record(&self.header).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(io_err)?;
    fs::write(path, text + "\n").map_err(io_err)
}

/// Runs one experiment and returns the files it wrote.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = parse_config(&spec.config_path, &spec.overrides)?;
    if let Some(seed) = spec.seed {
        cfg.protocol.seed = seed;
    }
    fs::create_dir_all(&spec.output_dir).map_err(io_err)?;
    let ctx = AnalyticContext::new(cfg.engine.trap)?;
    let name = spec.command.name();
    let (tables, summary) = match spec.command {
        Command::Trajectory => trajectory(&cfg, &ctx)?,
        Command::Energy => energy(&cfg, &ctx)?,
        Command::DtSweep => dt_sweep(&cfg, &ctx)?,
        Command::SqueezeSweep => squeeze_sweep(&cfg, &ctx)?,
        Command::Protocol => protocol(&cfg, &ctx)?,
        Command::Threshold => threshold(&cfg, &ctx),
    };
    let mut written = Vec::new();
    for (suffix, table) in &tables {
        let path = spec.output_dir.join(format!("{name}{suffix}.csv"));
        table.write(&path)?;
        written.push(path);
    }
    let sidecar = json!({
        "command": name,
        "config": serde_json::to_value(&cfg).map_err(io_err)?,
        "summary": summary,
    });
    let path = spec.output_dir.join(format!("{name}.json"));
    write_json(&path, &sidecar)?;
    written.push(path);
    Ok(written)
}

type Output = (Vec<(&'static str, Table)>, Value);

fn trajectory(cfg: &RunConfig, ctx: &AnalyticContext) -> Result<Output, CliError> {
    let e = &cfg.engine;
    let trace = run_engine(e)?;
    let mut samples = Table::new(&[
        "t_s", "z_m", "v_mps", "E_fly_J", "E_wm_J", "R", "X", "Y", "N",
    ]);
    for s in &trace.samples {
        samples.push(
            [
                s.t,
                s.z,
                s.v,
                s.e_flywheel,
                s.e_working_medium,
                s.r,
                s.x,
                s.y,
                s.n,
            ]
            .iter()
            .map(|&x| sci(x))
            .collect(),
        );
    }
    let (t1, t2) = (e.bath_1.temperature, e.bath_2.temperature);
    let modes = f64::from(e.radial_mode_count);
    let growth = modes * delta_z(t1, t2, ctx, GrowthMode::Exact);
    let mut peaks = Table::new(&["n", "t_s", "z_m", "z_analytic_m"]);
    let mut worst = 0.0_f64;
    // the closed form assumes release from rest and thermal baths
    let comparable =
        e.initial.1 == 0.0 && e.bath_1.squeeze_after.is_none() && e.bath_2.squeeze_after.is_none();
    for p in &trace.peaks {
        let analytic = modes_scaled_position(p.n, e, ctx);
        if comparable && growth != 0.0 {
            worst = worst.max(((p.z - analytic) / growth).abs());
        }
        peaks.push(vec![p.n.to_string(), sci(p.t), sci(p.z), sci(analytic)]);
    }
    let summary = json!({
        "samples": trace.samples.len(),
        "peaks": trace.peaks.len(),
        "growth_per_cycle_analytic_m": growth,
        "max_peak_deviation_over_growth": if comparable { json!(worst) } else { Value::Null },
        "branches": peak_positions(&trace),
    });
    Ok((vec![("", samples), ("_peaks", peaks)], summary))
}

fn modes_scaled_position(n: usize, e: &EngineConfig, ctx: &AnalyticContext) -> f64 {
    // the driven part scales with the number of thermalized radial modes
    let z0 = e.initial.0;
    let driven = stroboscopic_position(n, 0.0, e.bath_1.temperature, e.bath_2.temperature, ctx);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * z0 + f64::from(e.radial_mode_count) * driven
}

fn energy(cfg: &RunConfig, ctx: &AnalyticContext) -> Result<Output, CliError> {
    let e = &cfg.engine;
    let trace = run_engine(e)?;
    let k = e.trap.axial_stiffness();
    let mut table = Table::new(&[
        "cycle",
        "E_fly_J",
        "E_fly_analytic_J",
        "work_J",
        "heat_bath1_J",
        "heat_bath2_J",
        "delta_E_wm_J",
        "closure_residual_J",
    ]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in &trace.ledger {
        let end = &trace.peaks[2 * c.cycle + 2];
        let e_fly = 0.5 * k * end.z * end.z;
        let z_an = modes_scaled_position(end.n, e, ctx);
        let e_an = 0.5 * k * z_an * z_an;
        xs.push((c.cycle + 1) as f64);
        ys.push(e_fly);
        table.push(vec![
            (c.cycle + 1).to_string(),
            sci(e_fly),
            sci(e_an),
            sci(c.work),
            sci(c.heat_bath1),
            sci(c.heat_bath2),
            sci(c.delta_working_medium),
            sci(c.residual()),
        ]);
    }
    let (coef, r2) = quadratic_fit(&xs, &ys);
    let summary = json!({ "fit_c_J": coef, "fit_r_squared": r2 });
    Ok((vec![("", table)], summary))
}

/// Least-squares fit y = c x^2 and its centred coefficient of determination.
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let sxx: f64 = xs.iter().map(|x| x.powi(4)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * x * y).sum();
    let c = sxy / sxx;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - c * x * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    (c, 1.0 - ss_res / ss_tot)
}

fn dt_sweep(cfg: &RunConfig, ctx: &AnalyticContext) -> Result<Output, CliError> {
    let base = cfg.engine.bath_1.temperature;
    let n = cfg.protocol.n_cycles;
    let mut table = Table::new(&[
        "delta_T_K",
        "amplitude_sim_m",
        "amplitude_analytic_m",
        "delta_T_hat_K",
        "sigma_delta_T_K",
    ]);
    let points = cfg.sweep.points;
    for i in 0..points {
        let dt = -cfg.sweep.dt_max + 2.0 * cfg.sweep.dt_max * i as f64 / (points - 1) as f64;
        let mut e = cfg.engine;
        e.bath_1 = BathSpec::thermal(base);
        e.bath_2 = BathSpec::thermal(base + dt);
        let rec = run_protocol(&cfg.protocol, &e)?;
        let est = estimate_delta_t(&rec, n, ctx)?;
        let analytic = f64::from(e.radial_mode_count) * protocol_amplitude(n, base, base + dt, ctx);
        table.push(vec![
            sci(dt),
            sci(rec.amplitude()),
            sci(analytic),
            sci(est.delta_t_hat),
            sci(est.sigma_delta_t),
        ]);
    }
    let summary = json!({ "base_temperature_K": base, "n_cycles": n, "repetitions": cfg.protocol.repetitions });
    Ok((vec![("", table)], summary))
}

fn squeeze_sweep(cfg: &RunConfig, ctx: &AnalyticContext) -> Result<Output, CliError> {
    let (t1, t2) = (cfg.engine.bath_1.temperature, cfg.engine.bath_2.temperature);
    let alpha = cfg.squeeze.map_or(0.0, |s| s.alpha);
    let base_growth =
        f64::from(cfg.engine.radial_mode_count) * delta_z(t1, t2, ctx, GrowthMode::Exact);
    let mut table = Table::new(&[
        "r",
        "growth_sim_m",
        "amplification_sim",
        "amplification_analytic",
    ]);
    let steps = (cfg.sweep.r_max / cfg.sweep.r_step + 1e-9).floor() as usize;
    for i in 0..=steps {
        let r = i as f64 * cfg.sweep.r_step;
        let spec = SqueezeSpec::new(r, alpha)?;
        let mut e = cfg.engine;
        e.n_cycles = cfg.sweep.cycles;
        e.record_every = usize::MAX / 2;
        e.bath_1.squeeze_after = Some(spec).filter(|_| r > 0.0);
        e.bath_2.squeeze_after = e.bath_1.squeeze_after;
        let trace = run_engine(&e)?;
        let growth = mean_even_growth(&trace.peaks.iter().map(|p| p.z).collect::<Vec<_>>());
        table.push(vec![
            sci(r),
            sci(growth),
            sci(growth / base_growth),
            sci(amplification(r, alpha, ctx.derived.kappa)),
        ]);
    }
    let summary = json!({ "alpha": alpha, "cycles": cfg.sweep.cycles, "growth_unsqueezed_analytic_m": base_growth });
    Ok((vec![("", table)], summary))
}

/// Average growth of the even-contact positions per cycle.
pub fn mean_even_growth(peaks: &[f64]) -> f64 {
    let last = (peaks.len() - 1) / 2 * 2;
    if last == 0 {
        return 0.0;
    }
    (peaks[last] - peaks[0]) / (last / 2) as f64
}

fn protocol(cfg: &RunConfig, ctx: &AnalyticContext) -> Result<Output, CliError> {
    let p = &cfg.protocol;
    let rec = run_protocol(p, &cfg.engine)?;
    let est = estimate_delta_t(&rec, p.n_cycles, ctx)?;
    let mut shots = Table::new(&["set", "trial", "z_measured_m"]);
    for (set, values) in [("A", &rec.set_a_positions), ("B", &rec.set_b_positions)] {
        for (i, z) in values.iter().enumerate() {
            shots.push(vec![set.to_string(), i.to_string(), sci(*z)]);
        }
    }
    let (t1, t2) = (cfg.engine.bath_1.temperature, cfg.engine.bath_2.temperature);
    let per_mean = p.sigma_shot / (p.repetitions as f64).sqrt();
    let summary = json!({
        "delta_T_hat_K": est.delta_t_hat,
        "sigma_K": est.sigma_delta_t,
        "amplitude_m": est.amplitude,
        "amplitude_analytic_m": f64::from(cfg.engine.radial_mode_count) * protocol_amplitude(p.n_cycles, t1, t2, ctx),
        "delta_T_true_K": t2 - t1,
        "sensitivity_analytic_K": sensitivity(per_mean, p.n_cycles, ctx),
        "N": p.n_cycles,
        "M": p.repetitions,
        "seed": p.seed,
    });
    Ok((vec![("_shots", shots)], summary))
}

fn threshold(cfg: &RunConfig, ctx: &AnalyticContext) -> Output {
    let mut table = Table::new(&["bath", "T_K", "n_th", "r_threshold"]);
    for (name, bath) in [("1", cfg.engine.bath_1), ("2", cfg.engine.bath_2)] {
        let n = thermal_occupation(bath.temperature, ctx.cfg.omega_x0);
        table.push(vec![
            name.to_string(),
            sci(bath.temperature),
            sci(n),
            sci(squeeze_quantum_threshold(n)),
        ]);
    }
    (vec![("", table)], json!({}))
}
