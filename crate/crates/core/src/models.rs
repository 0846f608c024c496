//! The four one-dimensional two-state diabatic models, their closed-form
//! adiabatization, Born-Oppenheimer surfaces, gradients and non-adiabatic
//! couplings.
//!
//! All quantities are in Hartree atomic units. State index 0 is the lower
//! adiabatic surface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default nuclear mass (proton mass in electron masses, rounded).
pub const DEFAULT_MASS: f64 = 2000.0;

/// Smallest adiabatic gap for which the NACV is evaluated.
pub const DEGENERACY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SingleAvoided,
    DualAvoided,
    ExtendedCoupling,
    DoubleArch,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::SingleAvoided,
        ModelKind::DualAvoided,
        ModelKind::ExtendedCoupling,
        ModelKind::DoubleArch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SingleAvoided => "single_avoided",
            ModelKind::DualAvoided => "dual_avoided",
            ModelKind::ExtendedCoupling => "extended_coupling",
            ModelKind::DoubleArch => "double_arch",
        }
    }

    /// Parameters used in the benchmark set.
    pub fn default_params(self) -> ModelParams {
        match self {
            ModelKind::SingleAvoided => ModelParams {
                a: 0.01,
                b: 1.6,
                c: 0.005,
                d: 1.0,
                e0: 0.0,
            },
            ModelKind::DualAvoided => ModelParams {
                a: 0.1,
                b: 0.28,
                c: 0.015,
                d: 0.06,
                e0: 0.05,
            },
            ModelKind::ExtendedCoupling => ModelParams {
                a: 6e-4,
                b: 0.1,
                c: 0.9,
                d: 0.0,
                e0: 0.0,
            },
            ModelKind::DoubleArch => ModelParams {
                a: 6e-4,
                b: 0.1,
                c: 0.9,
                d: 4.0,
                e0: 0.0,
            },
        }
    }

    /// Initial wave-packet center used for this model.
    pub fn default_center(self) -> f64 {
        match self {
            ModelKind::SingleAvoided | ModelKind::DualAvoided => -8.0,
            ModelKind::ExtendedCoupling | ModelKind::DoubleArch => -15.0,
        }
    }

    /// Names of the parameters that enter the Hamiltonian of this kind.
    pub fn used_params(self) -> &'static [&'static str] {
        match self {
            ModelKind::SingleAvoided => &["a", "b", "c", "d"],
            ModelKind::DualAvoided => &["a", "b", "c", "d", "e0"],
            ModelKind::ExtendedCoupling => &["a", "b", "c"],
            ModelKind::DoubleArch => &["a", "b", "c", "d"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single_avoided" | "a" => Ok(ModelKind::SingleAvoided),
            "dual_avoided" | "b" => Ok(ModelKind::DualAvoided),
            "extended_coupling" | "c" => Ok(ModelKind::ExtendedCoupling),
            "double_arch" | "d" => Ok(ModelKind::DoubleArch),
            other => Err(Error::config(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e0: f64,
}

/// Real symmetric 2x2 matrix `[[h11, h12], [h12, h22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMatrix2 {
    pub h11: f64,
    pub h22: f64,
    pub h12: f64,
}

impl SymMatrix2 {
    pub fn new(h11: f64, h22: f64, h12: f64) -> Self {
        SymMatrix2 { h11, h22, h12 }
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.h11 * v[0] + self.h12 * v[1],
            self.h12 * v[0] + self.h22 * v[1],
        ]
    }

    /// `u^T M v`
    pub fn bilinear(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let mv = self.apply(v);
        u[0] * mv[0] + u[1] * mv[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiabaticModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub mass: f64,
}

impl DiabaticModel {
    pub fn new(kind: ModelKind) -> Self {
        DiabaticModel {
            kind,
            params: kind.default_params(),
            mass: DEFAULT_MASS,
        }
    }

    pub fn with_params(kind: ModelKind, params: ModelParams, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::config(format!("mass must be positive, got {mass}")));
        }
        Ok(DiabaticModel { kind, params, mass })
    }

    /// Diabatic Hamiltonian `H_d(R)`.
    pub fn diabatic_hamiltonian(&self, r: f64) -> SymMatrix2 {
        self.evaluate(r).0
    }

    /// Diabatic Hamiltonian and its analytic derivative with respect to `R`.
    pub fn evaluate(&self, r: f64) -> (SymMatrix2, SymMatrix2) {
        let ModelParams { a, b, c, d, e0 } = self.params;
        match self.kind {
            ModelKind::SingleAvoided => {
                let decay = (-b * r.abs()).exp();
                let h11 = a * (1.0 - decay) * r.signum();
                let h11 = if r == 0.0 { 0.0 } else { h11 };
                let dh11 = a * b * decay;
                let h12 = c * (-d * r * r).exp();
                let dh12 = -2.0 * d * r * h12;
                (
                    SymMatrix2::new(h11, -h11, h12),
                    SymMatrix2::new(dh11, -dh11, dh12),
                )
            }
            ModelKind::DualAvoided => {
                let g = (-b * r * r).exp();
                let h22 = -a * g + e0;
                let dh22 = 2.0 * a * b * r * g;
                let h12 = c * (-d * r * r).exp();
                let dh12 = -2.0 * d * r * h12;
                (
                    SymMatrix2::new(0.0, h22, h12),
                    SymMatrix2::new(0.0, dh22, dh12),
                )
            }
            ModelKind::ExtendedCoupling => {
                let (h12, dh12) = if r < 0.0 {
                    let e = (c * r).exp();
                    (b * e, b * c * e)
                } else {
                    let e = (-c * r).exp();
                    (b * (2.0 - e), b * c * e)
                };
                (
                    SymMatrix2::new(a, -a, h12),
                    SymMatrix2::new(0.0, 0.0, dh12),
                )
            }
            ModelKind::DoubleArch => {
                let (h12, dh12) = if r < -d {
                    let h = -b * (c * (r - d)).exp() + b * (c * (r + d)).exp();
                    (h, c * h)
                } else if r > d {
                    let h = b * (-c * (r - d)).exp() - b * (-c * (r + d)).exp();
                    (h, -c * h)
                } else {
                    let ep = (c * (r - d)).exp();
                    let em = (-c * (r + d)).exp();
                    (2.0 * b - b * ep - b * em, -b * c * ep + b * c * em)
                };
                (
                    SymMatrix2::new(a, -a, h12),
                    SymMatrix2::new(0.0, 0.0, dh12),
                )
            }
        }
    }

    /// Born-Oppenheimer data at `r`. `prev` carries eigenvector continuity
    /// along a trajectory or a grid sweep.
    pub fn adiabatic_point(&self, r: f64, prev: Option<&AdiabaticPoint>) -> Result<AdiabaticPoint> {
        let (h, dh) = self.evaluate(r);
        let eig = adiabatize(&h, prev.map(|p| p.eigvecs[0]));
        let gap = eig.energies[1] - eig.energies[0];
        if gap < DEGENERACY_FLOOR {
            return Err(Error::Degenerate { position: r, gap });
        }
        let [v1, v2] = eig.eigvecs;
        Ok(AdiabaticPoint {
            position: r,
            energies: eig.energies,
            gradients: [dh.bilinear(v1, v1), dh.bilinear(v2, v2)],
            nacv: dh.bilinear(v1, v2) / gap,
            eigvecs: eig.eigvecs,
            sign: eig.sign,
        })
    }
}

/// Closed-form eigendecomposition of a real symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    /// Ascending eigenvalues.
    pub energies: [f64; 2],
    /// Normalized eigenvectors, `eigvecs[l]` belongs to `energies[l]`.
    /// The pair is always right-handed: `v2 = (-v1[1], v1[0])`.
    pub eigvecs: [[f64; 2]; 2],
    /// Sign applied to the reference lower eigenvector.
    pub sign: f64,
}

/// Diagonalizes `h`. When `prev_lower` is given the overall sign maximizes
/// the overlap with that vector; otherwise the first component of the lower
/// eigenvector is made non-negative.
pub fn adiabatize(h: &SymMatrix2, prev_lower: Option<[f64; 2]>) -> Eigen2 {
    let mean = 0.5 * (h.h11 + h.h22);
    let half_diff = 0.5 * (h.h11 - h.h22);
    let radius = half_diff.hypot(h.h12);
    // Upper eigenvector is (cos phi, sin phi).
    let phi = 0.5 * h.h12.atan2(half_diff);
    let (s, c) = phi.sin_cos();
    let lower = [-s, c];
    let sign = match prev_lower {
        Some(p) => {
            if lower[0] * p[0] + lower[1] * p[1] < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
        None => {
            if lower[0] < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
    };
    let v1 = [sign * lower[0], sign * lower[1]];
    let v2 = [-v1[1], v1[0]];
    Eigen2 {
        energies: [mean - radius, mean + radius],
        eigvecs: [v1, v2],
        sign,
    }
}

/// Born-Oppenheimer energies, gradients and coupling at one nuclear position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticPoint {
    pub position: f64,
    pub energies: [f64; 2],
    pub gradients: [f64; 2],
    /// `d12 = <1|d/dR 2>`; `d21 = -d12`.
    pub nacv: f64,
    pub eigvecs: [[f64; 2]; 2],
    pub sign: f64,
}

impl AdiabaticPoint {
    /// Coupling matrix element `d_lk`.
    pub fn coupling(&self, l: usize, k: usize) -> f64 {
        match (l, k) {
            (0, 1) => self.nacv,
            (1, 0) => -self.nacv,
            _ => 0.0,
        }
    }

    pub fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }
}
