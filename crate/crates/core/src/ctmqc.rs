//! Ensemble gather and quantum-momentum construction of the coupled-trajectory
//! scheme.
//!
//! The nuclear density projected on each adiabatic state is modelled as a
//! Gaussian whose center and width come from the population-weighted
//! trajectory distribution. The quantum momentum of trajectory `I` is linear,
//! `qm_I = alpha_I (R_I - R0)`, with `alpha_I = sum_l |C_l^I|^2 / sigma_l^2`.
//! The intercept `R0` is fixed by requiring that, with the couplings switched
//! off, the decoherence term moves no population between states when summed
//! over the ensemble. With [`Region::BetweenCenters`] the quantum momentum is
//! nonzero only for trajectories lying between the two Gaussian centers.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryState;

/// Ensemble population below which a state carries no Gaussian.
pub const POPULATION_FLOOR: f64 = 1e-8;
/// Smallest `|sum_J alpha_J w_J|` for which the intercept is defined.
pub const WEIGHT_FLOOR: f64 = 1e-10;
/// Widths below this (bohr^2) carry no slope information.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Trajectories that receive a quantum momentum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Every trajectory.
    #[default]
    Ensemble,
    /// Only trajectories inside the closed interval between the two
    /// Gaussian centers. Once the centers coincide the interval is empty and
    /// the scheme stays on the Ehrenfest branch.
    BetweenCenters,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Ensemble => "ensemble",
            Region::BetweenCenters => "between_centers",
        }
    }

    /// Closed interval of positions that carry a quantum momentum.
    pub fn bounds(self, a: &Gaussian, b: &Gaussian) -> (f64, f64) {
        match self {
            Region::Ensemble => (f64::NEG_INFINITY, f64::INFINITY),
            Region::BetweenCenters => (a.center.min(b.center), a.center.max(b.center)),
        }
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ensemble" => Ok(Region::Ensemble),
            "between_centers" => Ok(Region::BetweenCenters),
            other => Err(Error::config(format!("unknown quantum-momentum region '{other}' (expected ensemble or between_centers)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub center: f64,
    /// `sigma^2 = 2 * weighted variance`.
    pub variance: f64,
}

impl Gaussian {
    /// `1 / sigma^2`, or 0 for a collapsed distribution.
    pub fn inverse_width(&self) -> f64 {
        if self.variance < VARIANCE_FLOOR {
            0.0
        } else {
            1.0 / self.variance
        }
    }
}

/// Population-weighted center and width of one state's trajectory
/// distribution. `None` when the state's ensemble population is below the
/// floor.
pub fn gaussian_moments(positions: &[f64], rho: &[f64]) -> Option<Gaussian> {
    let n = positions.len();
    if n == 0 {
        return None;
    }
    let total: f64 = rho.iter().sum();
    if total / (n as f64) < POPULATION_FLOOR {
        return None;
    }
    let center = positions.iter().zip(rho).map(|(r, w)| r * w).sum::<f64>() / total;
    let var = positions
        .iter()
        .zip(rho)
        .map(|(r, w)| (r - center).powi(2) * w)
        .sum::<f64>()
        / total;
    Some(Gaussian {
        center,
        variance: 2.0 * var,
    })
}

/// Quantities gathered from all trajectories once per step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFrame {
    pub positions: Vec<f64>,
    pub populations: Vec<[f64; 2]>,
    pub forces: Vec<[f64; 2]>,
    pub moments: [Option<Gaussian>; 2],
    pub region: Region,
    pub intercept: Option<f64>,
    pub quantum_momentum: Vec<f64>,
    /// Ensemble-averaged populations.
    pub state_populations: [f64; 2],
}

impl EnsembleFrame {
    /// Gathers in trajectory-index order and derives the quantum momentum.
    pub fn gather(trajectories: &[TrajectoryState], region: Region) -> Self {
        let positions: Vec<f64> = trajectories.iter().map(|t| t.r).collect();
        let populations: Vec<[f64; 2]> = trajectories.iter().map(|t| t.populations()).collect();
        let forces: Vec<[f64; 2]> = trajectories.iter().map(|t| t.f).collect();
        Self::from_parts(positions, populations, forces, region)
    }

    pub fn from_parts(positions: Vec<f64>, populations: Vec<[f64; 2]>, forces: Vec<[f64; 2]>, region: Region) -> Self {
        let n = positions.len().max(1) as f64;
        let rho1: Vec<f64> = populations.iter().map(|p| p[0]).collect();
        let rho2: Vec<f64> = populations.iter().map(|p| p[1]).collect();
        let state_populations = [rho1.iter().sum::<f64>() / n, rho2.iter().sum::<f64>() / n];
        let moments = [gaussian_moments(&positions, &rho1), gaussian_moments(&positions, &rho2)];
        let mut frame = EnsembleFrame {
            quantum_momentum: vec![0.0; positions.len()],
            positions,
            populations,
            forces,
            moments,
            region,
            intercept: None,
            state_populations,
        };
        frame.intercept = quantum_momentum(&mut frame);
        frame
    }
}

/// Fills `frame.quantum_momentum` and returns the intercept, or leaves the
/// quantum momentum at zero when it is undefined.
pub fn quantum_momentum(frame: &mut EnsembleFrame) -> Option<f64> {
    frame.quantum_momentum.iter_mut().for_each(|q| *q = 0.0);
    let (g1, g2) = match frame.moments {
        [Some(a), Some(b)] => (a, b),
        _ => return None,
    };
    let inv = [g1.inverse_width(), g2.inverse_width()];
    let (lo, hi) = frame.region.bounds(&g1, &g2);
    let n = frame.positions.len();
    let mut alpha = vec![0.0; n];
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let r = frame.positions[i];
        if r < lo || r > hi {
            continue;
        }
        let [p1, p2] = frame.populations[i];
        let a = p1 * inv[0] + p2 * inv[1];
        alpha[i] = a;
        let w = p1 * p2 * (frame.forces[i][0] - frame.forces[i][1]);
        num += a * w * r;
        den += a * w;
    }
    if den.abs() < WEIGHT_FLOOR {
        return None;
    }
    let r0 = num / den;
    for i in 0..n {
        let r = frame.positions[i];
        if r >= lo && r <= hi {
            frame.quantum_momentum[i] = alpha[i] * (r - r0);
        }
    }
    Some(r0)
}

/// Decoherence factors `D_l^I` for an arbitrary number of states, built from
/// pairwise two-state contributions. The coefficient equation gains
/// `-(1/M) D_l C_l` and the force `-(2/M) sum_l rho_ll f_l D_l`.
///
/// For pair `(l, k)` the quantum momentum is `alpha_lk (R - R0_lk)` with
/// `alpha_lk = sum_{m in {l,k}} rho_mm / (rho_ll + rho_kk) / sigma_m^2`, and
/// `D_l = 1/(N_active - 1) sum_k qm_lk (rho_ll + rho_kk) rho_kk (f_k - f_l)`.
pub fn multi_level_decoherence(
    positions: &[f64],
    populations: &[Vec<f64>],
    forces: &[Vec<f64>],
    region: Region,
) -> Vec<Vec<f64>> {
    let n = positions.len();
    let n_states = populations.first().map_or(0, |p| p.len());
    let mut out = vec![vec![0.0; n_states]; n];
    let moments: Vec<Option<Gaussian>> = (0..n_states)
        .map(|l| {
            let rho: Vec<f64> = populations.iter().map(|p| p[l]).collect();
            gaussian_moments(positions, &rho)
        })
        .collect();
    let active: Vec<usize> = (0..n_states).filter(|&l| moments[l].is_some()).collect();
    if active.len() < 2 {
        return out;
    }
    let prefactor = 1.0 / (active.len() - 1) as f64;
    for (ai, &l) in active.iter().enumerate() {
        for &k in &active[ai + 1..] {
            let (gl, gk) = (moments[l].unwrap(), moments[k].unwrap());
            let (lo, hi) = region.bounds(&gl, &gk);
            let inside = |r: f64| r >= lo && r <= hi;
            let mut alpha = vec![0.0; n];
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let r = positions[i];
                if !inside(r) {
                    continue;
                }
                let (pl, pk) = (populations[i][l], populations[i][k]);
                let pair = pl + pk;
                if pair <= 0.0 {
                    continue;
                }
                let a = (pl * gl.inverse_width() + pk * gk.inverse_width()) / pair;
                alpha[i] = a;
                let w = pair * pl * pk * (forces[i][k] - forces[i][l]);
                num += a * w * r;
                den += a * w;
            }
            if den.abs() < WEIGHT_FLOOR {
                continue;
            }
            let r0 = num / den;
            for i in 0..n {
                let r = positions[i];
                if !inside(r) {
                    continue;
                }
                let qm = alpha[i] * (r - r0);
                let (pl, pk) = (populations[i][l], populations[i][k]);
                let pair = pl + pk;
                out[i][l] += prefactor * qm * pair * pk * (forces[i][k] - forces[i][l]);
                out[i][k] += prefactor * qm * pair * pl * (forces[i][l] - forces[i][k]);
            }
        }
    }
    out
}
