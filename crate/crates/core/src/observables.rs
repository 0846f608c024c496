//! Ensemble estimators: populations, decoherence indicator, histogram
//! densities and transmission/reflection channels.
//!
//! Estimators take per-trajectory state weights. Coefficient methods use
//! `|C_l|^2`; surface hopping uses the indicator of the active surface.

use serde::{Deserialize, Serialize};

use crate::trajectory::TrajectoryState;

pub const DEFAULT_BIN_WIDTH: f64 = 0.2;
pub const DEFAULT_SPLIT: f64 = 0.0;
/// Distance from the split point inside which a trajectory is unsettled.
pub const SETTLE_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelResult {
    pub t1: f64,
    pub t2: f64,
    pub r1: f64,
    pub r2: f64,
    pub unsettled: bool,
}

impl ChannelResult {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.r1 + self.r2
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t1, self.t2, self.r1, self.r2]
    }

    /// Largest absolute difference over the four channels.
    pub fn max_deviation(&self, other: &ChannelResult) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-trajectory state weights. `active` selects surface-hopping counting.
pub fn state_weights(trajectories: &[TrajectoryState], active: Option<&[usize]>) -> Vec<[f64; 2]> {
    match active {
        Some(a) => a
            .iter()
            .map(|&s| if s == 0 { [1.0, 0.0] } else { [0.0, 1.0] })
            .collect(),
        None => trajectories.iter().map(|t| t.populations()).collect(),
    }
}

/// Ensemble-averaged populations.
pub fn ensemble_populations(weights: &[[f64; 2]]) -> [f64; 2] {
    let n = weights.len().max(1) as f64;
    let mut pop = [0.0; 2];
    for w in weights {
        pop[0] += w[0];
        pop[1] += w[1];
    }
    [pop[0] / n, pop[1] / n]
}

/// `(1/N) sum_I |C_1^I|^2 |C_2^I|^2`.
pub fn decoherence_indicator(trajectories: &[TrajectoryState]) -> f64 {
    let n = trajectories.len().max(1) as f64;
    trajectories.iter().map(|t| t.coherence()).sum::<f64>() / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub bin_width: f64,
    /// Per-state densities `|F_l|^2` on the bin centers.
    pub states: [Vec<f64>; 2],
}

impl Histogram {
    /// Nuclear density `|chi|^2 = sum_l |F_l|^2`.
    pub fn total(&self) -> Vec<f64> {
        self.states[0].iter().zip(&self.states[1]).map(|(a, b)| a + b).collect()
    }

    pub fn mass(&self) -> f64 {
        self.total().iter().sum::<f64>() * self.bin_width
    }
}

/// Weighted position histogram. Bins are aligned to multiples of
/// `bin_width` and span all trajectories.
pub fn density_histogram(positions: &[f64], weights: &[[f64; 2]], bin_width: f64) -> Histogram {
    assert!(bin_width > 0.0, "bin width must be positive");
    if positions.is_empty() {
        return Histogram {
            centers: Vec::new(),
            bin_width,
            states: [Vec::new(), Vec::new()],
        };
    }
    let lo = positions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = (lo / bin_width).floor() as i64;
    let last = (hi / bin_width).floor() as i64;
    let nbins = (last - first + 1) as usize;
    let norm = 1.0 / (positions.len() as f64 * bin_width);
    let mut states = [vec![0.0; nbins], vec![0.0; nbins]];
    for (r, w) in positions.iter().zip(weights) {
        let b = (((r / bin_width).floor() as i64) - first).clamp(0, nbins as i64 - 1) as usize;
        states[0][b] += w[0] * norm;
        states[1][b] += w[1] * norm;
    }
    let centers = (0..nbins)
        .map(|b| (first + b as i64) as f64 * bin_width + 0.5 * bin_width)
        .collect();
    Histogram {
        centers,
        bin_width,
        states,
    }
}

/// Transmission (`R > r_split`) and reflection probabilities per state.
pub fn classify_channels(positions: &[f64], weights: &[[f64; 2]], r_split: f64) -> ChannelResult {
    let n = positions.len().max(1) as f64;
    let mut out = ChannelResult::default();
    for (r, w) in positions.iter().zip(weights) {
        if *r > r_split {
            out.t1 += w[0];
            out.t2 += w[1];
        } else {
            out.r1 += w[0];
            out.r2 += w[1];
        }
        if (r - r_split).abs() < SETTLE_DISTANCE {
            out.unsettled = true;
        }
    }
    out.t1 /= n;
    out.t2 /= n;
    out.r1 /= n;
    out.r2 /= n;
    out
}

/// Per-trajectory `(R, sum_l rho_ll eps_l)`.
pub fn trajectory_surface(trajectories: &[TrajectoryState]) -> Vec<(f64, f64)> {
    trajectories
        .iter()
        .map(|t| (t.r, t.electronic_energy()))
        .collect()
}
