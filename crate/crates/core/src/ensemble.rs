//! Trajectory ensembles for CT-MQC and the independent-trajectory baselines.
//!
//! Each step first gathers the ensemble (CT-MQC only), then advances every
//! trajectory in parallel. Reductions run serially in trajectory order so
//! results do not depend on the number of workers.

use rayon::prelude::*;

use crate::baselines::{ehrenfest_step, fssh_step, mqc_step, HopEvent, HopState};
use crate::config::{Method, RunConfig, Sampling};
use crate::ctmqc::{EnsembleFrame, Region};
use crate::error::{Error, Result};
use crate::models::DiabaticModel;
use crate::observables::{
    classify_channels, decoherence_indicator, density_histogram, ensemble_populations, state_weights, ChannelResult,
    Histogram,
};
use crate::sampling::{sample_fixed_momentum, sample_wigner, InitialConditions};
use crate::trajectory::{advance, gauge_residual, ForceLaw, StepOptions, TrajectoryState};

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub model: DiabaticModel,
    pub method: Method,
    pub dt: f64,
    pub options: StepOptions,
    /// Trajectories that receive a quantum momentum (CT-MQC only).
    pub region: Region,
    /// Population below which a trajectory's accumulated forces are zeroed;
    /// zero disables the reset.
    pub force_reset: f64,
    pub trajectories: Vec<TrajectoryState>,
    /// Surface-hopping state, empty for the other methods.
    pub hops: Vec<HopState>,
    pub step: usize,
    pub time: f64,
    /// Quantum momentum used in the last step.
    pub quantum_momentum: Vec<f64>,
    pub max_norm_drift: f64,
    pub max_gauge_residual: f64,
}

/// Ensemble-level quantities at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSample {
    pub time: f64,
    pub populations: [f64; 2],
    pub coherence: f64,
    pub gauge_residual: f64,
    pub norm_drift: f64,
}

impl Ensemble {
    pub fn from_initial_conditions(
        model: DiabaticModel,
        method: Method,
        dt: f64,
        options: StepOptions,
        ic: &InitialConditions,
    ) -> Result<Self> {
        if method == Method::Exact {
            return Err(Error::config("the exact method has no trajectory ensemble"));
        }
        let trajectories = ic
            .positions
            .iter()
            .zip(&ic.momenta)
            .map(|(&r, &p)| TrajectoryState::new(&model, r, p, ic.initial_state))
            .collect::<Result<Vec<_>>>()?;
        let trajectories: Vec<TrajectoryState> = trajectories
            .into_iter()
            .map(|mut t| {
                if !options.couplings {
                    t.point.nacv = 0.0;
                }
                t
            })
            .collect();
        let hops = if method == Method::Tsh {
            (0..trajectories.len())
                .map(|i| HopState::new(ic.seed, i, ic.initial_state))
                .collect()
        } else {
            Vec::new()
        };
        let n = trajectories.len();
        Ok(Ensemble {
            model,
            method,
            dt,
            options,
            region: Region::default(),
            force_reset: 0.0,
            trajectories,
            hops,
            step: 0,
            time: 0.0,
            quantum_momentum: vec![0.0; n],
            max_norm_drift: 0.0,
            max_gauge_residual: 0.0,
        })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Self::from_config_with(cfg, &initial_conditions(cfg)?)
    }

    /// Ensemble for `cfg` started from already sampled initial conditions.
    pub fn from_config_with(cfg: &RunConfig, ic: &InitialConditions) -> Result<Self> {
        let options = StepOptions {
            couplings: cfg.couplings,
        };
        let mut ens = Self::from_initial_conditions(cfg.diabatic_model()?, cfg.method, cfg.dt, options, ic)?;
        ens.region = cfg.qm_region;
        ens.force_reset = cfg.force_reset;
        Ok(ens)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.trajectories.iter().map(|t| t.r).collect()
    }

    pub fn active_surfaces(&self) -> Option<Vec<usize>> {
        if self.method == Method::Tsh {
            Some(self.hops.iter().map(|h| h.active).collect())
        } else {
            None
        }
    }

    /// Per-trajectory state weights: coefficients, or active-surface
    /// indicators for surface hopping.
    pub fn weights(&self) -> Vec<[f64; 2]> {
        let active = self.active_surfaces();
        state_weights(&self.trajectories, active.as_deref())
    }

    pub fn populations(&self) -> [f64; 2] {
        ensemble_populations(&self.weights())
    }

    pub fn coherence(&self) -> f64 {
        decoherence_indicator(&self.trajectories)
    }

    pub fn channels(&self, r_split: f64) -> ChannelResult {
        classify_channels(&self.positions(), &self.weights(), r_split)
    }

    pub fn histogram(&self, bin_width: f64) -> Histogram {
        density_histogram(&self.positions(), &self.weights(), bin_width)
    }

    /// Largest `|norm - 1|` and gauge residual over the current ensemble.
    fn invariants(&self) -> (f64, f64) {
        let mass = self.model.mass;
        let mut drift = 0.0f64;
        let mut gauge = 0.0f64;
        for (t, qm) in self.trajectories.iter().zip(&self.quantum_momentum) {
            drift = drift.max((t.norm() - 1.0).abs());
            gauge = gauge.max(gauge_residual(t, *qm, mass).abs());
        }
        (drift, gauge)
    }

    pub fn sample(&self) -> EnsembleSample {
        let (norm_drift, gauge) = self.invariants();
        EnsembleSample {
            time: self.time,
            populations: self.populations(),
            coherence: self.coherence(),
            gauge_residual: gauge,
            norm_drift,
        }
    }

    /// Advances every trajectory by one time step.
    pub fn step(&mut self) -> Result<()> {
        let (model, dt, options, step) = (&self.model, self.dt, self.options, self.step);
        let results: Vec<Result<()>> = match self.method {
            Method::Ctmqc => {
                let frame = EnsembleFrame::gather(&self.trajectories, self.region);
                self.quantum_momentum = frame.quantum_momentum;
                self.trajectories
                    .par_iter_mut()
                    .zip(self.quantum_momentum.par_iter())
                    .map(|(t, &qm)| advance(t, model, dt, ForceLaw::CoupledTrajectory { qm }, options))
                    .collect()
            }
            Method::Ehrenfest => self
                .trajectories
                .par_iter_mut()
                .map(|t| ehrenfest_step(t, model, dt, options))
                .collect(),
            Method::Mqc => self
                .trajectories
                .par_iter_mut()
                .map(|t| mqc_step(t, model, dt, options))
                .collect(),
            Method::Tsh => self
                .trajectories
                .par_iter_mut()
                .zip(self.hops.par_iter_mut())
                .map(|(t, h)| fssh_step(t, h, model, dt, step, options))
                .collect(),
            Method::Exact => unreachable!("rejected at construction"),
        };
        for (index, result) in results.into_iter().enumerate() {
            result.map_err(|e| attach_trajectory(e, step, index))?;
        }
        if self.method == Method::Ctmqc && self.force_reset > 0.0 {
            // a trajectory that has collapsed onto one state forgets the force
            // history of its earlier passage
            for t in &mut self.trajectories {
                let p = t.populations();
                if p[0] < self.force_reset || p[1] < self.force_reset {
                    t.f = [0.0, 0.0];
                }
            }
        }
        if let Some(index) = self.trajectories.iter().position(|t| !t.is_finite()) {
            return Err(Error::Numerical {
                step,
                trajectory: Some(index),
                message: "non-finite trajectory state".into(),
            });
        }
        self.step += 1;
        self.time = self.step as f64 * self.dt;
        let (drift, gauge) = self.invariants();
        self.max_norm_drift = self.max_norm_drift.max(drift);
        self.max_gauge_residual = self.max_gauge_residual.max(gauge);
        Ok(())
    }

    /// Hop log in trajectory order.
    pub fn hop_log(&self) -> Vec<(usize, HopEvent)> {
        self.hops
            .iter()
            .enumerate()
            .flat_map(|(i, h)| h.log.iter().map(move |e| (i, *e)))
            .collect()
    }

    /// Fraction of trajectories inside `|R| < distance`.
    pub fn fraction_within(&self, distance: f64) -> f64 {
        let inside = self.trajectories.iter().filter(|t| t.r.abs() < distance).count();
        inside as f64 / self.len().max(1) as f64
    }
}

fn attach_trajectory(err: Error, step: usize, index: usize) -> Error {
    match err {
        Error::Numerical {
            trajectory: None,
            message,
            ..
        } => Error::Numerical {
            step,
            trajectory: Some(index),
            message,
        },
        Error::Degenerate { position, gap } => Error::Numerical {
            step,
            trajectory: Some(index),
            message: format!("degenerate adiabatic states at R = {position} (gap {gap:e})"),
        },
        other => other,
    }
}

pub fn initial_conditions(cfg: &RunConfig) -> Result<InitialConditions> {
    let sigma = cfg.sigma();
    let mut ic = match cfg.sampling {
        Sampling::Wigner => sample_wigner(cfg.center, cfg.k0, sigma, cfg.n_traj, cfg.seed)?,
        Sampling::FixedMomentum => sample_fixed_momentum(cfg.center, cfg.k0, sigma, cfg.n_traj, cfg.seed)?,
    };
    ic.initial_state = cfg.initial_state;
    Ok(ic)
}
