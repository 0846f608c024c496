//! Independent-trajectory baselines: Ehrenfest, fewest-switches surface
//! hopping and the vector-potential MQC scheme.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::DiabaticModel;
use crate::sampling::{trajectory_rng, StreamDomain};
use crate::trajectory::{advance, ForceLaw, StepOptions, TrajectoryState};

/// Populations below this make the hop probability zero.
pub const ACTIVE_FLOOR: f64 = 1e-12;

pub fn ehrenfest_step(traj: &mut TrajectoryState, model: &DiabaticModel, dt: f64, options: StepOptions) -> Result<()> {
    advance(traj, model, dt, ForceLaw::CoupledTrajectory { qm: 0.0 }, options)
}

pub fn mqc_step(traj: &mut TrajectoryState, model: &DiabaticModel, dt: f64, options: StepOptions) -> Result<()> {
    advance(traj, model, dt, ForceLaw::VectorPotential, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopEvent {
    pub step: usize,
    pub from: usize,
    pub to: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct HopState {
    pub active: usize,
    pub log: Vec<HopEvent>,
    rng: ChaCha8Rng,
}

impl HopState {
    pub fn new(seed: u64, index: usize, active: usize) -> Self {
        HopState {
            active,
            log: Vec::new(),
            rng: trajectory_rng(seed, StreamDomain::Hopping, index as u64),
        }
    }
}

/// Fewest-switches probability of leaving the active state `a` during `dt`,
/// before clamping: `g = 2 dt v d_al Re(C_a^* C_l) / |C_a|^2`. This is the
/// population flux out of `a` divided by its population.
pub fn raw_hop_probability(traj: &TrajectoryState, active: usize, dt: f64, mass: f64) -> f64 {
    let other = 1 - active;
    let rho_aa = traj.c[active].norm_sqr();
    if rho_aa < ACTIVE_FLOOR {
        return 0.0;
    }
    let rho_al = traj.c[active].conj() * traj.c[other];
    let d_al = traj.point.coupling(active, other);
    2.0 * dt * (traj.p / mass) * d_al * rho_al.re / rho_aa
}

pub fn hop_probability(traj: &TrajectoryState, active: usize, dt: f64, mass: f64) -> f64 {
    raw_hop_probability(traj, active, dt, mass).clamp(0.0, 1.0)
}

/// Attempts a hop to `target`, rescaling the momentum so that
/// `P^2/2M + eps_active` is conserved. Returns false for a frustrated hop,
/// which leaves surface and momentum untouched.
pub fn attempt_hop(traj: &mut TrajectoryState, hop: &mut HopState, target: usize, mass: f64) -> bool {
    let kinetic = traj.p * traj.p / (2.0 * mass);
    let new_kinetic = kinetic + traj.point.energies[hop.active] - traj.point.energies[target];
    if new_kinetic < 0.0 {
        return false;
    }
    let sign = if traj.p < 0.0 { -1.0 } else { 1.0 };
    traj.p = sign * (2.0 * mass * new_kinetic).sqrt();
    hop.active = target;
    true
}

/// One surface-hopping step: propagate on the active surface, then test for a
/// hop with one uniform draw using end-of-step quantities.
pub fn fssh_step(
    traj: &mut TrajectoryState,
    hop: &mut HopState,
    model: &DiabaticModel,
    dt: f64,
    step: usize,
    options: StepOptions,
) -> Result<()> {
    advance(traj, model, dt, ForceLaw::Surface(hop.active), options)?;
    let raw = raw_hop_probability(traj, hop.active, dt, model.mass);
    if raw > 1.0 {
        return Err(Error::Numerical {
            step,
            trajectory: None,
            message: format!("hop probability {raw} exceeds one; reduce the time step"),
        });
    }
    let g = raw.max(0.0);
    let xi: f64 = hop.rng.random();
    if g > 0.0 && xi < g {
        let from = hop.active;
        let to = 1 - from;
        let accepted = attempt_hop(traj, hop, to, model.mass);
        hop.log.push(HopEvent {
            step,
            from,
            to,
            accepted,
        });
    }
    Ok(())
}
