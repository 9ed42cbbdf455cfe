//! Monte Carlo version of the two-pulse measurement of the bath
//! temperature difference.
//!
//! Each trial restarts the engine from a Boltzmann-distributed axial state,
//! runs N cycles and images the ion once: set A at the instant the next
//! contact is due, set B one half period later with that contact skipped.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{thermal_r, AnalyticContext};
use crate::constants::K_BOLTZMANN;
use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::params::TrapConfig;

pub const DEFAULT_FULL_SIMULATION_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ProtocolBackend {
    /// Stroboscopic closed form plus the free oscillation of the initial state.
    #[default]
    Analytic,
    /// Runs the engine for every trial.
    FullSimulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Doppler temperature of the initial axial state, K.
    pub t0: f64,
    /// Engine cycles before the measurement.
    pub n_cycles: usize,
    /// Trials per measurement set.
    pub repetitions: usize,
    /// Localization noise of a single image, m.
    pub sigma_shot: f64,
    /// Laser pulse length in units of tau_z.
    pub pulse_fraction: f64,
    pub seed: u64,
    pub backend: ProtocolBackend,
    /// Largest n_cycles accepted by the full-simulation backend.
    pub full_simulation_cap: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            t0: 1e-3,
            n_cycles: 100_000,
            repetitions: 200_000,
            sigma_shot: 250e-9 * (200_000f64).sqrt(),
            pulse_fraction: 0.1,
            seed: 0,
            backend: ProtocolBackend::Analytic,
            full_simulation_cap: DEFAULT_FULL_SIMULATION_CAP,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig(
                "protocol repetitions must be >= 1".into(),
            ));
        }
        if self.n_cycles == 0 {
            return Err(Error::InvalidConfig(
                "protocol cycle count must be >= 1".into(),
            ));
        }
        if !(self.pulse_fraction > 0.0 && self.pulse_fraction < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "pulse_fraction must lie in (0, 0.5), got {}",
                self.pulse_fraction
            )));
        }
        if !(self.sigma_shot.is_finite() && self.sigma_shot >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma_shot must be finite and >= 0, got {}",
                self.sigma_shot
            )));
        }
        if !(self.t0.is_finite() && self.t0 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "t0 must be finite and >= 0, got {}",
                self.t0
            )));
        }
        if self.backend == ProtocolBackend::FullSimulation
            && self.n_cycles > self.full_simulation_cap
        {
            return Err(Error::TooManyCycles {
                requested: self.n_cycles,
                cap: self.full_simulation_cap,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub set_a_positions: Vec<f64>,
    pub set_b_positions: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sem_a: f64,
    pub sem_b: f64,
    pub radial_mode_count: u8,
}

fn mean_and_sem(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl MeasurementRecord {
    pub fn new(
        set_a_positions: Vec<f64>,
        set_b_positions: Vec<f64>,
        radial_mode_count: u8,
    ) -> Result<Self> {
        if set_a_positions.is_empty() || set_a_positions.len() != set_b_positions.len() {
            return Err(Error::InvalidConfig(format!(
                "measurement sets must be nonempty and equal in size, got {} and {}",
                set_a_positions.len(),
                set_b_positions.len()
            )));
        }
        let (mean_a, sem_a) = mean_and_sem(&set_a_positions);
        let (mean_b, sem_b) = mean_and_sem(&set_b_positions);
        Ok(MeasurementRecord {
            set_a_positions,
            set_b_positions,
            mean_a,
            mean_b,
            sem_a,
            sem_b,
            radial_mode_count,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.mean_a - self.mean_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureEstimate {
    /// K
    pub delta_t_hat: f64,
    /// K
    pub sigma_delta_t: f64,
    /// m
    pub amplitude: f64,
}

/// Draws (z0, v0) from the thermal distribution of the axial mode at `t0`.
pub fn sample_initial_conditions<R: rand::Rng + ?Sized>(
    t0: f64,
    trap: &TrapConfig,
    rng: &mut R,
) -> (f64, f64) {
    if t0 <= 0.0 {
        return (0.0, 0.0);
    }
    let sz = (K_BOLTZMANN * t0 / trap.axial_stiffness()).sqrt();
    let sv = (K_BOLTZMANN * t0 / trap.mass).sqrt();
    let z = Normal::new(0.0, sz).expect("positive std").sample(rng);
    let v = Normal::new(0.0, sv).expect("positive std").sample(rng);
    (z, v)
}

/// Factor by which averaging over the pulse shrinks the oscillation about
/// its centre: sinc(omega_z w / 2) with w = pulse_fraction tau_z.
pub fn pulse_attenuation(pulse_fraction: f64) -> f64 {
    let x = 0.5 * std::f64::consts::PI * pulse_fraction;
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Independent stream for one trial of one set.
fn trial_rng(seed: u64, set: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((set << 48) | trial);
    rng
}

/// Both window-averaged positions (set A, set B) of one trial.
fn analytic_trial(
    pcfg: &ProtocolConfig,
    ecfg: &EngineConfig,
    ctx: &AnalyticContext,
    z0: f64,
) -> (f64, f64) {
    let modes = f64::from(ecfg.radial_mode_count);
    let k = ctx.drive_length() * modes;
    let c1 = k * thermal_r(ecfg.bath_1.temperature, ctx);
    let c2 = k * thermal_r(ecfg.bath_2.temperature, ctx);
    // each contact reflects the position about the new centre; the initial
    // velocity only changes sign every half period
    let z_2n = z0 + 2.0 * pcfg.n_cycles as f64 * (c2 - c1);
    let s = pulse_attenuation(pcfg.pulse_fraction);
    (c2 + (z_2n - c2) * s, c2 - (z_2n - c2) * s)
}

/// Runs the engine for one trial and returns the window-averaged position
/// around the trigger: set A at 2N tau_z, set B at (2N + 1) tau_z.
fn simulated_trial(
    pcfg: &ProtocolConfig,
    ecfg: &EngineConfig,
    z0: f64,
    v0: f64,
    set_b: bool,
) -> Result<f64> {
    let mut cfg = *ecfg;
    cfg.n_cycles = pcfg.n_cycles;
    cfg.initial = (z0, v0);
    let mut engine = Engine::new(cfg)?;
    let tau_z = std::f64::consts::PI / cfg.trap.omega_z;
    let contacts = 2 * pcfg.n_cycles;
    let trigger = (contacts + usize::from(set_b)) as f64 * tau_z;
    let half = 0.5 * pcfg.pulse_fraction * tau_z;
    let eps = 1e-9 * cfg.dt;
    let (mut sum, mut count) = (0.0, 0usize);
    let mut collect = |e: &Engine| {
        let f = e.flywheel();
        if (f.t - trigger).abs() <= half + eps {
            sum += f.z;
            count += 1;
        }
    };
    for _ in 0..contacts {
        engine.contact()?;
        engine.stroke(|e, _| {
            collect(e);
            Ok(())
        })?;
    }
    // no further contacts: the ion oscillates freely about the last centre
    while engine.flywheel().t < trigger + half - eps {
        engine.step()?;
        collect(&engine);
    }
    Ok(sum / count.max(1) as f64)
}

pub fn run_protocol(pcfg: &ProtocolConfig, ecfg: &EngineConfig) -> Result<MeasurementRecord> {
    pcfg.validate()?;
    ecfg.validate()?;
    let ctx = AnalyticContext::new(ecfg.trap)?;
    if pcfg.backend == ProtocolBackend::Analytic
        && (ecfg.bath_1.squeeze_after.is_some() || ecfg.bath_2.squeeze_after.is_some())
    {
        return Err(Error::InvalidConfig(
            "the analytic protocol backend does not model squeezed baths".into(),
        ));
    }
    let noise = Normal::new(0.0, pcfg.sigma_shot.max(0.0)).expect("nonnegative std");
    let trial = |set: u64, i: usize| -> Result<f64> {
        let mut rng = trial_rng(pcfg.seed, set, i as u64);
        let (z0, v0) = sample_initial_conditions(pcfg.t0, &ecfg.trap, &mut rng);
        let z = match pcfg.backend {
            ProtocolBackend::Analytic => {
                let (a, b) = analytic_trial(pcfg, ecfg, &ctx, z0);
                if set == 0 {
                    a
                } else {
                    b
                }
            }
            ProtocolBackend::FullSimulation => simulated_trial(pcfg, ecfg, z0, v0, set == 1)?,
        };
        let shot = if pcfg.sigma_shot > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        Ok(z + shot)
    };
    let run_set = |set: u64| -> Result<Vec<f64>> {
        (0..pcfg.repetitions)
            .into_par_iter()
            .map(|i| trial(set, i))
            .collect()
    };
    MeasurementRecord::new(run_set(0)?, run_set(1)?, ecfg.radial_mode_count)
}

/// Converts amplitude to K: m omega_z^2 / (8 N kB gamma), per radial mode.
fn amplitude_to_temperature(n_cycles: usize, modes: u8, ctx: &AnalyticContext) -> f64 {
    ctx.cfg.axial_stiffness()
        / (8.0 * n_cycles as f64 * K_BOLTZMANN * ctx.derived.gamma * f64::from(modes.max(1)))
}

/// Inverts the high-temperature amplitude law for the temperature difference.
pub fn estimate_delta_t(
    rec: &MeasurementRecord,
    n_cycles: usize,
    ctx: &AnalyticContext,
) -> Result<TemperatureEstimate> {
    if rec.set_a_positions.is_empty() || n_cycles == 0 {
        return Err(Error::InvalidConfig(
            "estimate needs a nonempty record and N >= 1".into(),
        ));
    }
    let scale = amplitude_to_temperature(n_cycles, rec.radial_mode_count, ctx);
    let amplitude = rec.amplitude();
    Ok(TemperatureEstimate {
        delta_t_hat: amplitude * scale,
        sigma_delta_t: (rec.sem_a.powi(2) + rec.sem_b.powi(2)).sqrt() * scale,
        amplitude,
    })
}

/// Closed-form temperature uncertainty when each set mean is known to `sigma_mean`.
pub fn sensitivity(sigma_mean: f64, n_cycles: usize, ctx: &AnalyticContext) -> f64 {
    std::f64::consts::SQRT_2 * sigma_mean * amplitude_to_temperature(n_cycles, 1, ctx)
}
