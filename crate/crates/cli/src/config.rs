//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` are comments, blank lines are ignored. Trap and
//! bath keys are required; everything else has a default. Overrides given on
//! the command line are applied after the file is read.

use std::collections::BTreeMap;
use std::path::Path;

use otto_probe::engine::{BathSpec, EngineConfig, QuantumBackend};
use otto_probe::error::{Error, Result};
use otto_probe::flywheel::ForceModel;
use otto_probe::fock::SqueezeSpec;
use otto_probe::params::{derive_params, TrapConfig};
use otto_probe::propagator::NewtonConfig;
use otto_probe::thermometry::{ProtocolBackend, ProtocolConfig, DEFAULT_FULL_SIMULATION_CAP};
use serde::Serialize;

/// Every key the parser accepts, in documentation order.
pub const KNOWN_KEYS: &[&str] = &[
    "mass_amu",
    "omega_x0_hz",
    "omega_z_hz",
    "theta_deg",
    "r0_m",
    "t_bath1_mk",
    "t_bath2_mk",
    "n_cycles",
    "dim",
    "dt_per_tauz",
    "force_model",
    "backend",
    "radial_mode_count",
    "z0_m",
    "v0_mps",
    "record_every",
    "squeeze_r",
    "squeeze_alpha",
    "squeeze_baths",
    "t0_mk",
    "protocol_n",
    "protocol_m",
    "sigma_shot_m",
    "pulse_fraction",
    "protocol_backend",
    "full_sim_cap",
    "seed",
    "sweep_dt_max_mk",
    "sweep_points",
    "sweep_r_max",
    "sweep_r_step",
    "sweep_cycles",
];

const REQUIRED_KEYS: &[&str] = &[
    "mass_amu",
    "omega_x0_hz",
    "omega_z_hz",
    "theta_deg",
    "r0_m",
    "t_bath1_mk",
    "t_bath2_mk",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SqueezeBaths {
    Both,
    Bath1,
    Bath2,
}

/// Ranges for the sweep commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    /// Largest |T2 - T1| of the temperature sweep, K.
    pub dt_max: f64,
    /// Points of the temperature sweep, symmetric about zero.
    pub points: usize,
    pub r_max: f64,
    pub r_step: f64,
    /// Cycles simulated per squeezing value.
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub protocol: ProtocolConfig,
    pub squeeze: Option<SqueezeSpec>,
    pub squeeze_baths: SqueezeBaths,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn trap(&self) -> &TrapConfig {
        &self.engine.trap
    }
}

/// Raw entries with the line they came from; line 0 marks an override.
struct Entries(BTreeMap<String, (String, usize)>);

impl Entries {
    fn parse_error(&self, key: &str, message: String) -> Error {
        match self.0.get(key) {
            Some(&(_, line)) if line > 0 => Error::Parse { line, message },
            _ => Error::InvalidConfig(message),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(v, _)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.f64_or(key, None)?
            .ok_or_else(|| Error::InvalidConfig(format!("missing required key `{key}`")))
    }

    fn f64_or(&self, key: &str, default: Option<f64>) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| {
                    self.parse_error(key, format!("`{key}` expects a finite number, got `{v}`"))
                }),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_or(key, Some(default))?.unwrap_or(default))
    }

    fn int<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(|_| {
                self.parse_error(
                    key,
                    format!("`{key}` expects a nonnegative integer, got `{v}`"),
                )
            }),
        }
    }

    fn choice<T: Copy>(&self, key: &str, default: T, options: &[(&str, T)]) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => options
                .iter()
                .find(|(name, _)| name.eq_ignore_ascii_case(v))
                .map(|&(_, t)| t)
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    self.parse_error(
                        key,
                        format!("`{key}` must be one of {}, got `{v}`", names.join(", ")),
                    )
                }),
        }
    }
}

fn split_line(line: &str) -> Option<std::result::Result<(String, String), String>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return None;
    }
    Some(match content.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected `key = value`, got `{content}`")),
    })
}

fn check_key(key: &str) -> bool {
    KNOWN_KEYS.contains(&key)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let (key, value) = match split_line(line) {
            None => continue,
            Some(Ok(kv)) => kv,
            Some(Err(message)) => {
                return Err(Error::Parse {
                    line: line_no,
                    message,
                })
            }
        };
        if !check_key(&key) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            });
        }
        if map.insert(key.clone(), (value, line_no)).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    for o in overrides {
        let (key, value) = match split_line(o) {
            Some(Ok(kv)) => kv,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "override must be `key=value`, got `{o}`"
                )))
            }
        };
        if !check_key(&key) {
            return Err(Error::InvalidConfig(format!(
                "unknown override key `{key}`"
            )));
        }
        map.insert(key, (value, 0));
    }
    build(&Entries(map))
}

fn build(e: &Entries) -> Result<RunConfig> {
    for key in REQUIRED_KEYS {
        if e.raw(key).is_none() {
            return Err(Error::InvalidConfig(format!(
                "missing required key `{key}`"
            )));
        }
    }
    let trap = TrapConfig::from_lab_units(
        e.required("mass_amu")?,
        e.required("omega_x0_hz")?,
        e.required("omega_z_hz")?,
        e.required("theta_deg")?,
        e.required("r0_m")?,
    )?;
    let tau_z = derive_params(&trap)?.tau_z;

    let squeeze_r = e.f64("squeeze_r", 0.0)?;
    let squeeze_alpha = e.f64("squeeze_alpha", 0.0)?;
    let squeeze = if squeeze_r > 0.0 {
        Some(SqueezeSpec::new(squeeze_r, squeeze_alpha)?)
    } else if squeeze_r < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "squeeze_r must be >= 0, got {squeeze_r}"
        )));
    } else {
        None
    };
    let squeeze_baths = e.choice(
        "squeeze_baths",
        SqueezeBaths::Both,
        &[
            ("both", SqueezeBaths::Both),
            ("bath1", SqueezeBaths::Bath1),
            ("bath2", SqueezeBaths::Bath2),
        ],
    )?;
    let on = |which: SqueezeBaths| match squeeze_baths {
        SqueezeBaths::Both => squeeze,
        s if s == which => squeeze,
        _ => None,
    };
    let bath_1 = BathSpec {
        temperature: e.required("t_bath1_mk")? * 1e-3,
        squeeze_after: on(SqueezeBaths::Bath1),
    };
    let bath_2 = BathSpec {
        temperature: e.required("t_bath2_mk")? * 1e-3,
        squeeze_after: on(SqueezeBaths::Bath2),
    };

    let dim = match e.raw("dim") {
        None => None,
        Some(v) if v.eq_ignore_ascii_case("auto") => None,
        Some(_) => Some(e.int::<usize>("dim", 0)?),
    };
    let dt_ratio = e.f64("dt_per_tauz", 5e-4)?;
    if !(dt_ratio > 0.0 && dt_ratio <= 0.01) {
        return Err(e.parse_error(
            "dt_per_tauz",
            format!("dt_per_tauz must lie in (0, 0.01], got {dt_ratio}"),
        ));
    }
    let engine = EngineConfig {
        trap,
        bath_1,
        bath_2,
        n_cycles: e.int("n_cycles", 4)?,
        dim,
        dt: dt_ratio * tau_z,
        force_model: e.choice(
            "force_model",
            ForceModel::Approximate,
            &[
                ("approximate", ForceModel::Approximate),
                ("exact", ForceModel::Exact),
            ],
        )?,
        quantum_backend: e.choice(
            "backend",
            QuantumBackend::DensityMatrix,
            &[
                ("density_matrix", QuantumBackend::DensityMatrix),
                ("moments", QuantumBackend::Moments),
            ],
        )?,
        initial: (e.f64("z0_m", 0.0)?, e.f64("v0_mps", 0.0)?),
        radial_mode_count: e.int("radial_mode_count", 1)?,
        record_every: e.int("record_every", 1)?,
        newton: NewtonConfig::default(),
    };
    engine.validate()?;

    let repetitions: usize = e.int("protocol_m", 2000)?;
    let protocol = ProtocolConfig {
        t0: e.f64("t0_mk", 1.0)? * 1e-3,
        n_cycles: e.int("protocol_n", 1000)?,
        repetitions,
        // 250 nm on each set mean unless given explicitly
        sigma_shot: e.f64("sigma_shot_m", 250e-9 * (repetitions as f64).sqrt())?,
        pulse_fraction: e.f64("pulse_fraction", 0.1)?,
        seed: e.int("seed", 0)?,
        backend: e.choice(
            "protocol_backend",
            ProtocolBackend::Analytic,
            &[
                ("analytic", ProtocolBackend::Analytic),
                ("full_simulation", ProtocolBackend::FullSimulation),
            ],
        )?,
        full_simulation_cap: e.int("full_sim_cap", DEFAULT_FULL_SIMULATION_CAP)?,
    };
    protocol.validate()?;

    let sweep = SweepConfig {
        dt_max: e.f64("sweep_dt_max_mk", 0.1)? * 1e-3,
        points: e.int("sweep_points", 11)?,
        r_max: e.f64("sweep_r_max", 1.5)?,
        r_step: e.f64("sweep_r_step", 0.25)?,
        cycles: e.int("sweep_cycles", 4)?,
    };
    if sweep.points < 2 || !(sweep.dt_max > 0.0) {
        return Err(Error::InvalidConfig(
            "temperature sweep needs sweep_points >= 2 and sweep_dt_max_mk > 0".into(),
        ));
    }
    if !(sweep.r_step > 0.0 && sweep.r_max >= 0.0) || sweep.cycles == 0 {
        return Err(Error::InvalidConfig(
            "squeeze sweep needs sweep_r_step > 0, sweep_r_max >= 0 and sweep_cycles >= 1".into(),
        ));
    }
    Ok(RunConfig {
        engine,
        protocol,
        squeeze,
        squeeze_baths,
        sweep,
    })
}
