//! Exact two-state wave-packet propagation on a uniform periodic grid and the
//! exact-factorization observables derived from it.
//!
//! The wavefunction is stored in the diabatic representation, which is the
//! representation the split-operator propagator works in. The adiabatic
//! components `F_l(R)` are obtained on demand through an [`AdiabaticBasis`]
//! whose eigenvectors are sign-continuous across the grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{adiabatize, DiabaticModel, ModelKind, SymMatrix2};
use crate::observables::ChannelResult;

type C64 = Complex64;

/// Relative density floor below which `C_l = F_l / chi` is considered
/// undefined (coherence integrand and TDPES mask).
pub const DENSITY_FLOOR: f64 = 1e-7;

/// Width of the edge strip monitored for probability leaking to the
/// periodic boundary.
pub const EDGE_WIDTH: f64 = 2.0;
pub const EDGE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > r_min) || !r_min.is_finite() || !r_max.is_finite() {
            return Err(Error::config(format!(
                "grid bounds must satisfy r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        Ok(Grid { r_min, r_max, n })
    }

    /// Grid used for a model unless overridden.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::SingleAvoided | ModelKind::DualAvoided => Grid {
                r_min: -40.0,
                r_max: 80.0,
                n: 4096,
            },
            ModelKind::ExtendedCoupling | ModelKind::DoubleArch => Grid {
                r_min: -150.0,
                r_max: 150.0,
                n: 8192,
            },
        }
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        self.r_min + j as f64 * self.dr()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.position(j)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / (self.n as f64 * self.dr());
        (0..self.n)
            .map(|j| {
                if j < self.n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - self.n as f64) * dk
                }
            })
            .collect()
    }
}

/// Adiabatic eigenvectors, energies and couplings tabulated on the grid.
#[derive(Debug, Clone)]
pub struct AdiabaticBasis {
    pub lower: Vec<[f64; 2]>,
    pub energies: Vec<[f64; 2]>,
    pub nacv: Vec<f64>,
    pub potential: Vec<SymMatrix2>,
}

impl AdiabaticBasis {
    /// Tabulates `potential` with a left-to-right continuity sweep.
    pub fn new(grid: &Grid, potential: impl Fn(f64) -> (SymMatrix2, SymMatrix2)) -> Self {
        let mut lower = Vec::with_capacity(grid.n);
        let mut energies = Vec::with_capacity(grid.n);
        let mut nacv = Vec::with_capacity(grid.n);
        let mut table = Vec::with_capacity(grid.n);
        let mut prev = None;
        for j in 0..grid.n {
            let (h, dh) = potential(grid.position(j));
            let eig = adiabatize(&h, prev);
            let gap = eig.energies[1] - eig.energies[0];
            let d = if gap > 0.0 {
                dh.bilinear(eig.eigvecs[0], eig.eigvecs[1]) / gap
            } else {
                0.0
            };
            prev = Some(eig.eigvecs[0]);
            lower.push(eig.eigvecs[0]);
            energies.push(eig.energies);
            nacv.push(d);
            table.push(h);
        }
        AdiabaticBasis {
            lower,
            energies,
            nacv,
            potential: table,
        }
    }

    pub fn for_model(grid: &Grid, model: &DiabaticModel) -> Self {
        Self::new(grid, |r| model.evaluate(r))
    }

    /// `(v1, v2)` at grid point `j`, with `v2` the right-handed partner.
    pub fn vectors(&self, j: usize) -> ([f64; 2], [f64; 2]) {
        let v1 = self.lower[j];
        (v1, [-v1[1], v1[0]])
    }
}

#[derive(Debug, Clone)]
pub struct GridWavefunction {
    pub grid: Grid,
    /// Diabatic components on the grid.
    pub diabatic: [Vec<C64>; 2],
    pub time: f64,
}

impl GridWavefunction {
    pub fn zeros(grid: Grid) -> Self {
        GridWavefunction {
            grid,
            diabatic: [vec![C64::new(0.0, 0.0); grid.n], vec![C64::new(0.0, 0.0); grid.n]],
            time: 0.0,
        }
    }

    /// Adiabatic components `F_l(R_j)`.
    pub fn adiabatic(&self, basis: &AdiabaticBasis) -> [Vec<C64>; 2] {
        let n = self.grid.n;
        let mut f1 = Vec::with_capacity(n);
        let mut f2 = Vec::with_capacity(n);
        for j in 0..n {
            let (v1, v2) = basis.vectors(j);
            let (a, b) = (self.diabatic[0][j], self.diabatic[1][j]);
            f1.push(a * v1[0] + b * v1[1]);
            f2.push(a * v2[0] + b * v2[1]);
        }
        [f1, f2]
    }

    pub fn from_adiabatic(grid: Grid, basis: &AdiabaticBasis, f: &[Vec<C64>; 2], time: f64) -> Self {
        let n = grid.n;
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for j in 0..n {
            let (v1, v2) = basis.vectors(j);
            d1.push(f[0][j] * v1[0] + f[1][j] * v2[0]);
            d2.push(f[0][j] * v1[1] + f[1][j] * v2[1]);
        }
        GridWavefunction {
            grid,
            diabatic: [d1, d2],
            time,
        }
    }

    pub fn norm(&self) -> f64 {
        let dr = self.grid.dr();
        self.diabatic
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            * dr
    }

    /// Probability within `width` of either grid edge.
    pub fn edge_probability(&self, width: f64) -> f64 {
        let dr = self.grid.dr();
        let mut p = 0.0;
        for j in 0..self.grid.n {
            let r = self.grid.position(j);
            if r - self.grid.r_min < width || self.grid.r_max - r < width + dr {
                p += self.diabatic[0][j].norm_sqr() + self.diabatic[1][j].norm_sqr();
            }
        }
        p * dr
    }

    /// Multiplies both components by `exp(i theta(R))`.
    pub fn apply_phase(&mut self, theta: impl Fn(f64) -> f64) {
        for j in 0..self.grid.n {
            let ph = C64::from_polar(1.0, theta(self.grid.position(j)));
            self.diabatic[0][j] *= ph;
            self.diabatic[1][j] *= ph;
        }
    }
}

/// Initial Gaussian packet on adiabatic state `state`:
/// `|chi(R)|^2 ~ exp(-(R - Rc)^2 / sigma^2)`, mean momentum `k0`.
pub fn init_gaussian_packet(
    grid: Grid,
    basis: &AdiabaticBasis,
    center: f64,
    k0: f64,
    sigma: f64,
    state: usize,
) -> Result<GridWavefunction> {
    if !(sigma > 0.0) {
        return Err(Error::config(format!("packet width must be positive, got {sigma}")));
    }
    if state > 1 {
        return Err(Error::config(format!("initial state index {state} out of range")));
    }
    let norm = (PI * sigma * sigma).powf(-0.25);
    let mut f = [vec![C64::new(0.0, 0.0); grid.n], vec![C64::new(0.0, 0.0); grid.n]];
    for j in 0..grid.n {
        let r = grid.position(j);
        let x = r - center;
        f[state][j] = C64::from_polar(norm * (-0.5 * x * x / (sigma * sigma)).exp(), k0 * x);
    }
    let mut wf = GridWavefunction::from_adiabatic(grid, basis, &f, 0.0);
    // discrete renormalization
    let s = wf.norm().sqrt();
    for c in wf.diabatic.iter_mut() {
        for z in c.iter_mut() {
            *z /= s;
        }
    }
    let edge = (0..grid.n)
        .filter(|&j| j == 0 || j == grid.n - 1)
        .map(|j| wf.diabatic[0][j].norm_sqr() + wf.diabatic[1][j].norm_sqr())
        .fold(0.0, f64::max);
    if edge > 1e-10 {
        return Err(Error::config(format!(
            "initial packet density {edge:e} at the grid edge; widen the grid"
        )));
    }
    Ok(wf)
}

/// Forward/inverse transforms plus spectral derivative on one grid.
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    scratch: Vec<C64>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Spectral {
            forward,
            inverse,
            wavenumbers: grid.wavenumbers(),
            scratch: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn forward(&mut self, data: &mut [C64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&mut self, data: &mut [C64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }

    pub fn derivative(&mut self, data: &[C64]) -> Vec<C64> {
        let n = data.len();
        let mut buf = data.to_vec();
        self.forward(&mut buf);
        for (z, &k) in buf.iter_mut().zip(&self.wavenumbers) {
            *z *= C64::new(0.0, k);
        }
        if n % 2 == 0 {
            // Nyquist mode has no consistent sign
            buf[n / 2] = C64::new(0.0, 0.0);
        }
        self.inverse(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }
}

/// Symmetric (Strang) split-operator propagator for two coupled diabatic
/// states: half potential step, full kinetic step in momentum space, half
/// potential step.
pub struct SplitOperator {
    pub grid: Grid,
    pub mass: f64,
    pub dt: f64,
    potential_half: Vec<[[C64; 2]; 2]>,
    kinetic_phase: Vec<C64>,
    spectral: Spectral,
}

/// `exp(-i H tau)` for real symmetric `H`, closed form.
pub fn propagator_2x2(h: &SymMatrix2, tau: f64) -> [[C64; 2]; 2] {
    let mean = 0.5 * (h.h11 + h.h22);
    let dz = 0.5 * (h.h11 - h.h22);
    let r = dz.hypot(h.h12);
    let (sn, cs) = (r * tau).sin_cos();
    // sin(r tau) / r, regular at r = 0
    let sinc = if r * tau.abs() > 1e-8 { sn / r } else { tau * (1.0 - (r * tau).powi(2) / 6.0) };
    let phase = C64::from_polar(1.0, -mean * tau);
    let i = C64::new(0.0, 1.0);
    [
        [phase * (cs - i * sinc * dz), phase * (-i * sinc * h.h12)],
        [phase * (-i * sinc * h.h12), phase * (cs + i * sinc * dz)],
    ]
}

impl SplitOperator {
    pub fn new(grid: Grid, basis: &AdiabaticBasis, mass: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        let potential_half = basis
            .potential
            .iter()
            .map(|h| propagator_2x2(h, 0.5 * dt))
            .collect();
        let kinetic_phase = grid
            .wavenumbers()
            .iter()
            .map(|k| C64::from_polar(1.0, -k * k * dt / (2.0 * mass)))
            .collect();
        Ok(SplitOperator {
            grid,
            mass,
            dt,
            potential_half,
            kinetic_phase,
            spectral: Spectral::new(&grid),
        })
    }

    fn potential_kick(&self, wf: &mut GridWavefunction) {
        let [d1, d2] = &mut wf.diabatic;
        for ((a, b), u) in d1.iter_mut().zip(d2.iter_mut()).zip(&self.potential_half) {
            let (x, y) = (*a, *b);
            *a = u[0][0] * x + u[0][1] * y;
            *b = u[1][0] * x + u[1][1] * y;
        }
    }

    pub fn step(&mut self, wf: &mut GridWavefunction) {
        self.potential_kick(wf);
        let scale = 1.0 / self.grid.n as f64;
        for comp in wf.diabatic.iter_mut() {
            self.spectral.forward(comp);
            for (z, p) in comp.iter_mut().zip(&self.kinetic_phase) {
                *z *= p * scale;
            }
            self.spectral.inverse(comp);
        }
        self.potential_kick(wf);
        wf.time += self.dt;
    }

    /// Total energy `<Psi|T + H_d|Psi>` (not divided by the norm).
    pub fn energy(&mut self, wf: &GridWavefunction, basis: &AdiabaticBasis) -> f64 {
        let dr = self.grid.dr();
        let n = self.grid.n as f64;
        let mut kinetic = 0.0;
        for comp in &wf.diabatic {
            let mut buf = comp.clone();
            self.spectral.forward(&mut buf);
            kinetic += buf
                .iter()
                .zip(self.spectral.wavenumbers())
                .map(|(z, k)| z.norm_sqr() * k * k)
                .sum::<f64>();
        }
        kinetic *= dr / (n * 2.0 * self.mass);
        let mut potential = 0.0;
        for (j, h) in basis.potential.iter().enumerate() {
            let (a, b) = (wf.diabatic[0][j], wf.diabatic[1][j]);
            potential += h.h11 * a.norm_sqr()
                + h.h22 * b.norm_sqr()
                + 2.0 * h.h12 * (a.conj() * b).re;
        }
        kinetic + potential * dr
    }

    pub fn spectral(&mut self) -> &mut Spectral {
        &mut self.spectral
    }
}

#[derive(Debug, Clone)]
pub struct ExactObservables {
    pub pop: [f64; 2],
    pub coherence: f64,
    pub density: Vec<f64>,
    pub bo_density: [Vec<f64>; 2],
}

pub fn exact_observables(wf: &GridWavefunction, basis: &AdiabaticBasis) -> ExactObservables {
    let f = wf.adiabatic(basis);
    let dr = wf.grid.dr();
    let bo1: Vec<f64> = f[0].iter().map(|z| z.norm_sqr()).collect();
    let bo2: Vec<f64> = f[1].iter().map(|z| z.norm_sqr()).collect();
    let density: Vec<f64> = bo1.iter().zip(&bo2).map(|(a, b)| a + b).collect();
    let floor = DENSITY_FLOOR * density.iter().cloned().fold(0.0, f64::max);
    let coherence = density
        .iter()
        .zip(bo1.iter().zip(&bo2))
        .filter(|(rho, _)| **rho > floor)
        .map(|(rho, (a, b))| a * b / rho)
        .sum::<f64>()
        * dr;
    ExactObservables {
        pop: [bo1.iter().sum::<f64>() * dr, bo2.iter().sum::<f64>() * dr],
        coherence,
        density,
        bo_density: [bo1, bo2],
    }
}

/// Gauge-invariant part of the exact TDPES on the grid; `None` where the
/// nuclear density is below the floor.
pub fn exact_tdpes_gi(
    wf: &GridWavefunction,
    basis: &AdiabaticBasis,
    mass: f64,
    spectral: &mut Spectral,
) -> Vec<Option<f64>> {
    let f = wf.adiabatic(basis);
    let df = [spectral.derivative(&f[0]), spectral.derivative(&f[1])];
    let n = wf.grid.n;
    let density: Vec<f64> = (0..n).map(|j| f[0][j].norm_sqr() + f[1][j].norm_sqr()).collect();
    let floor = DENSITY_FLOOR * density.iter().cloned().fold(0.0, f64::max);
    (0..n)
        .map(|j| {
            if !(density[j] > floor) {
                return None;
            }
            let chi = density[j].sqrt();
            let dchi = (f[0][j].conj() * df[0][j] + f[1][j].conj() * df[1][j]).re / chi;
            let c = [f[0][j] / chi, f[1][j] / chi];
            let dc = [
                (df[0][j] - c[0] * dchi) / chi,
                (df[1][j] - c[1] * dchi) / chi,
            ];
            let d12 = basis.nacv[j];
            // components of grad Phi in the adiabatic basis
            let g = [dc[0] + c[1] * d12, dc[1] - c[0] * d12];
            let grad_sq = g[0].norm_sqr() + g[1].norm_sqr();
            let vector_potential = (c[0].conj() * g[0] + c[1].conj() * g[1]).im;
            let e = basis.energies[j];
            let bo = c[0].norm_sqr() * e[0] + c[1].norm_sqr() * e[1];
            let value = bo + (grad_sq - vector_potential * vector_potential) / (2.0 * mass);
            value.is_finite().then_some(value)
        })
        .collect()
}

/// Transmission and reflection probabilities per surface.
pub fn channel_probabilities(wf: &GridWavefunction, basis: &AdiabaticBasis, r_split: f64) -> ChannelResult {
    let f = wf.adiabatic(basis);
    let dr = wf.grid.dr();
    let mut t = [0.0; 2];
    let mut r = [0.0; 2];
    let mut overlap = 0.0;
    for j in 0..wf.grid.n {
        let x = wf.grid.position(j);
        for l in 0..2 {
            let p = f[l][j].norm_sqr() * dr;
            if x > r_split {
                t[l] += p;
            } else {
                r[l] += p;
            }
            if (x - r_split).abs() < 1.0 {
                overlap += p;
            }
        }
    }
    ChannelResult {
        t1: t[0],
        t2: t[1],
        r1: r[0],
        r2: r[1],
        unsettled: overlap > 1e-3,
    }
}

/// Probability inside `|R - r_split| < half_width`.
pub fn probability_near(wf: &GridWavefunction, center: f64, half_width: f64) -> f64 {
    let dr = wf.grid.dr();
    (0..wf.grid.n)
        .filter(|&j| (wf.grid.position(j) - center).abs() < half_width)
        .map(|j| wf.diabatic[0][j].norm_sqr() + wf.diabatic[1][j].norm_sqr())
        .sum::<f64>()
        * dr
}
