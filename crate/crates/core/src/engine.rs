//! The open-cycle Otto engine: instantaneous bath contacts alternating with
//! strokes of length tau_z in which the radial state and the axial flywheel
//! evolve together in a mean-field loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flywheel::{axial_energy, axial_force, verlet_step, FlywheelState, ForceModel};
use crate::fock::{
    auto_dim, moments, moments_energy, thermal_occupation, thermal_state, GaussianMoments,
    RadialState, SqueezeOperator, SqueezeSpec,
};
use crate::params::{derive_params, DerivedParams, TrapConfig};
use crate::propagator::{
    moments_step, propagate_with_hamiltonian, NewtonConfig, RadialHamiltonian,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// K
    pub temperature: f64,
    /// Squeeze applied right after the contact.
    pub squeeze_after: Option<SqueezeSpec>,
}

impl BathSpec {
    pub fn thermal(temperature: f64) -> Self {
        BathSpec {
            temperature,
            squeeze_after: None,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{name} temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QuantumBackend {
    #[default]
    DensityMatrix,
    Moments,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub trap: TrapConfig,
    /// Acts at the even contacts 0, 2, 4, ...
    pub bath_1: BathSpec,
    /// Acts at the odd contacts.
    pub bath_2: BathSpec,
    pub n_cycles: usize,
    /// Fock levels; `None` sizes the basis from the baths.
    pub dim: Option<usize>,
    /// s
    pub dt: f64,
    pub force_model: ForceModel,
    pub quantum_backend: QuantumBackend,
    /// Initial axial position (m) and velocity (m/s).
    pub initial: (f64, f64),
    /// 1 for the x mode alone, 2 when the y mode is thermalized as well.
    pub radial_mode_count: u8,
    /// Keep every n-th integration step in the trace.
    pub record_every: usize,
    pub newton: NewtonConfig,
}

impl EngineConfig {
    /// Hot and cold bath at the given temperatures, reference trap, dt = tau_z / 2000.
    pub fn new(trap: TrapConfig, t1: f64, t2: f64, n_cycles: usize) -> Result<Self> {
        let tau_z = derive_params(&trap)?.tau_z;
        Ok(EngineConfig {
            trap,
            bath_1: BathSpec::thermal(t1),
            bath_2: BathSpec::thermal(t2),
            n_cycles,
            dim: None,
            dt: tau_z / 2000.0,
            force_model: ForceModel::Approximate,
            quantum_backend: QuantumBackend::DensityMatrix,
            initial: (0.0, 0.0),
            radial_mode_count: 1,
            record_every: 1,
            newton: NewtonConfig::default(),
        })
    }

    /// Integration steps in one stroke of length tau_z.
    pub fn steps_per_stroke(&self) -> Result<usize> {
        let tau_z = derive_params(&self.trap)?.tau_z;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        let steps = (tau_z / self.dt).round();
        if steps < 100.0 || ((steps * self.dt - tau_z) / tau_z).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "dt = {:e} s must divide tau_z = {:e} s into at least 100 equal steps",
                self.dt, tau_z
            )));
        }
        Ok(steps as usize)
    }

    /// Fock dimension used by the density-matrix backend.
    pub fn resolved_dim(&self) -> usize {
        self.dim.unwrap_or_else(|| {
            [self.bath_1, self.bath_2]
                .iter()
                .map(|b| {
                    let n = thermal_occupation(b.temperature, self.trap.omega_x0);
                    auto_dim(n, b.squeeze_after.map_or(0.0, |s| s.r))
                })
                .max()
                .unwrap_or(32)
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        self.bath_1.validate("bath_1")?;
        self.bath_2.validate("bath_2")?;
        if self.n_cycles == 0 {
            return Err(Error::InvalidConfig("n_cycles must be >= 1".into()));
        }
        self.steps_per_stroke()?;
        if let Some(d) = self.dim {
            if d < 2 {
                return Err(Error::InvalidDimension(d));
            }
        }
        if !(1..=2).contains(&self.radial_mode_count) {
            return Err(Error::InvalidConfig(format!(
                "radial_mode_count must be 1 or 2, got {}",
                self.radial_mode_count
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        let (z0, v0) = self.initial;
        if !(z0.is_finite() && v0.is_finite()) {
            return Err(Error::InvalidConfig(
                "initial conditions must be finite".into(),
            ));
        }
        self.newton.validate()
    }
}

/// Replaces the radial state by the bath's thermal state, squeezed if requested.
pub fn thermalize(state: &RadialState, bath: &BathSpec, cfg: &TrapConfig) -> Result<RadialState> {
    let n = thermal_occupation(bath.temperature, cfg.omega_x0);
    let th = thermal_state(n, state.dim())?;
    match bath.squeeze_after {
        Some(spec) => SqueezeOperator::new(th.dim(), spec)?.apply(&th),
        None => Ok(th),
    }
}

/// Radial state in one of the two representations.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkingMedium {
    Density(RadialState),
    Moments(GaussianMoments),
}

impl WorkingMedium {
    pub fn moments(&self) -> GaussianMoments {
        match self {
            WorkingMedium::Density(rho) => moments(rho),
            WorkingMedium::Moments(m) => *m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub z: f64,
    pub v: f64,
    pub e_flywheel: f64,
    pub e_working_medium: f64,
    pub r: f64,
    pub x: f64,
    pub y: f64,
    pub n: f64,
}

/// Axial position at a bath-contact instant; index `n` counts contacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub n: usize,
    pub t: f64,
    pub z: f64,
}

/// Energy flows of one engine cycle, J. Heats are positive into the radial mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleEnergy {
    pub cycle: usize,
    pub work: f64,
    pub heat_bath1: f64,
    pub heat_bath2: f64,
    pub delta_working_medium: f64,
}

impl CycleEnergy {
    /// work - (heat in - change of the working medium energy)
    pub fn residual(&self) -> f64 {
        self.work - (self.heat_bath1 + self.heat_bath2 - self.delta_working_medium)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EngineTrace {
    pub samples: Vec<TraceSample>,
    pub peaks: Vec<Peak>,
    pub ledger: Vec<CycleEnergy>,
}

/// Stepwise engine, also used by the measurement protocol to stop, skip
/// contacts and sample the trajectory freely.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: EngineConfig,
    derived: DerivedParams,
    steps_per_stroke: usize,
    medium: WorkingMedium,
    fly: FlywheelState,
    contacts: usize,
    squeezers: [Option<SqueezeOperator>; 2],
}

impl Engine {
    /// Places the ion at the initial conditions with the radial mode in
    /// the ground state; the first contact is made by [`Engine::contact`].
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let derived = derive_params(&cfg.trap)?;
        let (medium, squeezers) = match cfg.quantum_backend {
            QuantumBackend::DensityMatrix => {
                let dim = cfg.resolved_dim();
                let sq = |b: &BathSpec| {
                    b.squeeze_after
                        .map(|s| SqueezeOperator::new(dim, s))
                        .transpose()
                };
                (
                    WorkingMedium::Density(RadialState::fock(0, dim)?),
                    [sq(&cfg.bath_1)?, sq(&cfg.bath_2)?],
                )
            }
            QuantumBackend::Moments => (
                WorkingMedium::Moments(GaussianMoments::thermal(0.0)),
                [None, None],
            ),
        };
        let (z0, v0) = cfg.initial;
        Ok(Engine {
            steps_per_stroke: cfg.steps_per_stroke()?,
            fly: FlywheelState::new(z0, v0, 0.0)?,
            cfg,
            derived,
            medium,
            contacts: 0,
            squeezers,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn flywheel(&self) -> FlywheelState {
        self.fly
    }

    pub fn medium(&self) -> &WorkingMedium {
        &self.medium
    }

    /// Contacts made or skipped so far.
    pub fn contacts(&self) -> usize {
        self.contacts
    }

    pub fn steps_per_stroke(&self) -> usize {
        self.steps_per_stroke
    }

    fn modes(&self) -> f64 {
        f64::from(self.cfg.radial_mode_count)
    }

    /// Energy of the radial mode(s) including the coupling term, J.
    pub fn working_medium_energy(&self) -> Result<f64> {
        Ok(self.modes() * moments_energy(&self.medium.moments(), self.fly.z, &self.cfg.trap)?)
    }

    pub fn flywheel_energy(&self) -> f64 {
        axial_energy(&self.fly, &self.cfg.trap)
    }

    /// Thermalizes with the bath due at this contact and returns the heat
    /// that flowed into the radial mode(s).
    pub fn contact(&mut self) -> Result<f64> {
        let before = self.working_medium_energy()?;
        let slot = self.contacts % 2;
        let bath = if slot == 0 {
            self.cfg.bath_1
        } else {
            self.cfg.bath_2
        };
        let n = thermal_occupation(bath.temperature, self.cfg.trap.omega_x0);
        self.medium = match &self.medium {
            WorkingMedium::Density(rho) => {
                let th = thermal_state(n, rho.dim())?;
                WorkingMedium::Density(match &self.squeezers[slot] {
                    Some(op) => op.apply(&th)?,
                    None => th,
                })
            }
            WorkingMedium::Moments(_) => WorkingMedium::Moments(match bath.squeeze_after {
                Some(spec) => GaussianMoments::squeezed_thermal(n, &spec),
                None => GaussianMoments::thermal(n),
            }),
        };
        self.contacts += 1;
        Ok(self.working_medium_energy()? - before)
    }

    /// Lets a contact instant pass without touching the radial state.
    pub fn skip_contact(&mut self) {
        self.contacts += 1;
    }

    /// One mean-field step: R from the current state, Verlet update of the
    /// flywheel with R frozen, then the radial state under H(z_new).
    pub fn step(&mut self) -> Result<()> {
        let r = self.modes() * self.medium.moments().r_value();
        let trap = self.cfg.trap;
        let model = self.cfg.force_model;
        let dt = self.cfg.dt;
        self.fly = verlet_step(&self.fly, trap.mass, dt, |z| {
            axial_force(z, r, &trap, model)
        })?;
        let z = self.fly.z;
        self.medium = match &self.medium {
            WorkingMedium::Density(rho) => {
                let h = RadialHamiltonian::new(rho.dim(), z, &trap)?;
                WorkingMedium::Density(propagate_with_hamiltonian(rho, &h, dt, &self.cfg.newton)?)
            }
            WorkingMedium::Moments(m) => WorkingMedium::Moments(moments_step(m, z, dt, &trap)?),
        };
        Ok(())
    }

    /// Evolves for one stroke of length tau_z, calling `observe` after
    /// every step with the step index within the stroke (1-based).
    pub fn stroke<F>(&mut self, mut observe: F) -> Result<()>
    where
        F: FnMut(&Engine, usize) -> Result<()>,
    {
        let start = self.fly.t;
        for k in 1..=self.steps_per_stroke {
            self.step()?;
            observe(self, k)?;
        }
        // keep contact times on the exact grid k tau_z
        self.fly.t = start + self.derived.tau_z;
        if let WorkingMedium::Density(rho) = &self.medium {
            rho.check_truncation()?;
        }
        Ok(())
    }

    pub fn sample(&self) -> Result<TraceSample> {
        let m = self.medium.moments();
        Ok(TraceSample {
            t: self.fly.t,
            z: self.fly.z,
            v: self.fly.v,
            e_flywheel: self.flywheel_energy(),
            e_working_medium: self.working_medium_energy()?,
            r: m.r_value(),
            x: m.x,
            y: m.y,
            n: m.n,
        })
    }
}

/// Runs `n_cycles` full cycles (2 n_cycles contacts, each followed by a stroke).
pub fn run_engine(cfg: &EngineConfig) -> Result<EngineTrace> {
    let mut engine = Engine::new(*cfg)?;
    let mut trace = EngineTrace::default();
    let record_every = cfg.record_every;
    let mut heats = Vec::with_capacity(2 * cfg.n_cycles);
    // energies just before each contact
    let mut fly_marks = Vec::with_capacity(2 * cfg.n_cycles + 1);
    let mut wm_marks = Vec::with_capacity(2 * cfg.n_cycles + 1);
    let mut counter = 0usize;
    for k in 0..2 * cfg.n_cycles {
        let fly = engine.flywheel();
        trace.peaks.push(Peak {
            n: k,
            t: fly.t,
            z: fly.z,
        });
        fly_marks.push(engine.flywheel_energy());
        wm_marks.push(engine.working_medium_energy()?);
        let q = engine.contact()?;
        // the initial ground state is a bookkeeping device, not a real contact
        heats.push(if k == 0 { 0.0 } else { q });
        if k == 0 {
            wm_marks[0] = engine.working_medium_energy()?;
            trace.samples.push(engine.sample()?);
        }
        engine.stroke(|e, _| {
            counter += 1;
            if counter.is_multiple_of(record_every) {
                trace.samples.push(e.sample()?);
            }
            Ok(())
        })?;
    }
    let fly = engine.flywheel();
    trace.peaks.push(Peak {
        n: 2 * cfg.n_cycles,
        t: fly.t,
        z: fly.z,
    });
    fly_marks.push(engine.flywheel_energy());
    wm_marks.push(engine.working_medium_energy()?);
    trace.ledger = (0..cfg.n_cycles)
        .map(|c| CycleEnergy {
            cycle: c,
            work: fly_marks[2 * c + 2] - fly_marks[2 * c],
            heat_bath1: heats[2 * c],
            heat_bath2: heats[2 * c + 1],
            delta_working_medium: wm_marks[2 * c + 2] - wm_marks[2 * c],
        })
        .collect();
    Ok(trace)
}

/// Contact-instant positions split into the even and odd branches.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakBranches {
    pub even: Vec<(usize, f64)>,
    pub odd: Vec<(usize, f64)>,
}

pub fn peak_positions(trace: &EngineTrace) -> PeakBranches {
    let mut out = PeakBranches::default();
    for p in &trace.peaks {
        if p.n % 2 == 0 {
            out.even.push((p.n, p.z));
        } else {
            out.odd.push((p.n, p.z));
        }
    }
    out
}
