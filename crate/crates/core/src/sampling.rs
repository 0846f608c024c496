//! Initial conditions for trajectory ensembles.
//!
//! The nuclear packet `chi(R) ~ exp(-(R - Rc)^2 / (2 sigma^2)) exp(i k0 R)`
//! has density `|chi|^2 ~ exp(-(R - Rc)^2 / sigma^2)` and momentum density
//! `~ exp(-(P - k0)^2 sigma^2)`. Its Wigner function is the product of two
//! Gaussians with standard deviations `sigma / sqrt(2)` in position and
//! `1 / (sigma sqrt(2))` in momentum.
//!
//! Every trajectory draws from its own stream keyed by `(seed, index)`, so a
//! sample never depends on how the work is scheduled.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Independent random domains sharing one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    InitialConditions = 1,
    Hopping = 2,
}

/// Deterministic generator for trajectory `index` in `domain`.
pub fn trajectory_rng(seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub initial_state: usize,
    pub weights: Vec<f64>,
    pub seed: u64,
}

impl InitialConditions {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Writes `index,R,P` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("index,R,P\n");
        for (i, (r, p)) in self.positions.iter().zip(&self.momenta).enumerate() {
            out.push_str(&format!("{i},{r:.17e},{p:.17e}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

fn check(sigma: f64, n_traj: usize) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("packet width must be positive, got {sigma}")));
    }
    if n_traj == 0 {
        return Err(Error::config("trajectory count must be at least 1"));
    }
    Ok(())
}

fn sample(center: f64, k0: f64, sigma: f64, n_traj: usize, seed: u64, momentum_spread: bool) -> InitialConditions {
    let sx = sigma / 2f64.sqrt();
    let sp = 1.0 / (sigma * 2f64.sqrt());
    let (positions, momenta) = (0..n_traj)
        .map(|i| {
            let mut rng = trajectory_rng(seed, StreamDomain::InitialConditions, i as u64);
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            let p = if momentum_spread { k0 + sp * y } else { k0 };
            (center + sx * x, p)
        })
        .unzip();
    InitialConditions {
        positions,
        momenta,
        initial_state: 0,
        weights: vec![1.0 / n_traj as f64; n_traj],
        seed,
    }
}

/// Samples the Wigner distribution of the Gaussian packet.
pub fn sample_wigner(center: f64, k0: f64, sigma: f64, n_traj: usize, seed: u64) -> Result<InitialConditions> {
    check(sigma, n_traj)?;
    Ok(sample(center, k0, sigma, n_traj, seed, true))
}

/// Samples positions from the packet density and gives every trajectory
/// momentum `k0`.
pub fn sample_fixed_momentum(center: f64, k0: f64, sigma: f64, n_traj: usize, seed: u64) -> Result<InitialConditions> {
    check(sigma, n_traj)?;
    Ok(sample(center, k0, sigma, n_traj, seed, false))
}
