//! Single classical trajectory with Born-Huang coefficients, and the
//! per-trajectory integrator shared by the CT-MQC engine and the
//! independent-trajectory baselines.
//!
//! One step is velocity Verlet for `(R, P)` and a fourth-order Runge-Kutta
//! step for the coefficients, carried out in the interaction picture of the
//! adiabatic energies so the fast phase rotation is integrated exactly.
//! Within a step the adiabatic data, the velocity and the accumulated forces
//! are interpolated linearly between the step endpoints.

use num_complex::Complex64;

use crate::error::Result;
use crate::models::{AdiabaticPoint, DiabaticModel};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub r: f64,
    pub p: f64,
    pub c: [C64; 2],
    /// Time-integrated adiabatic forces.
    pub f: [f64; 2],
    pub point: AdiabaticPoint,
    /// Vector potential at the previous step (independent-trajectory MQC).
    pub previous_a: Option<f64>,
}

/// Nuclear force law used by [`advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceLaw {
    /// Mean-field force plus the quantum-momentum term; `qm == 0` gives
    /// plain Ehrenfest.
    CoupledTrajectory { qm: f64 },
    /// Force of a single adiabatic surface.
    Surface(usize),
    /// Time derivative of the vector potential along the trajectory.
    VectorPotential,
}

impl TrajectoryState {
    pub fn new(model: &DiabaticModel, r: f64, p: f64, state: usize) -> Result<Self> {
        let point = model.adiabatic_point(r, None)?;
        let mut c = [C64::new(0.0, 0.0); 2];
        c[state.min(1)] = C64::new(1.0, 0.0);
        Ok(TrajectoryState {
            r,
            p,
            c,
            f: [0.0; 2],
            point,
            previous_a: None,
        })
    }

    pub fn populations(&self) -> [f64; 2] {
        [self.c[0].norm_sqr(), self.c[1].norm_sqr()]
    }

    pub fn norm(&self) -> f64 {
        self.c[0].norm_sqr() + self.c[1].norm_sqr()
    }

    /// `|C_1|^2 |C_2|^2`.
    pub fn coherence(&self) -> f64 {
        self.c[0].norm_sqr() * self.c[1].norm_sqr()
    }

    /// `rho_12 = C_1^* C_2`.
    pub fn rho12(&self) -> C64 {
        self.c[0].conj() * self.c[1]
    }

    /// Population-weighted accumulated force `sum_k |C_k|^2 f_k`.
    pub fn mean_f(&self) -> f64 {
        let [r1, r2] = self.populations();
        r1 * self.f[0] + r2 * self.f[1]
    }

    /// Vector potential `sum_l rho_ll f_l + Im sum_lk rho_lk d_lk`.
    pub fn vector_potential(&self) -> f64 {
        self.mean_f() + 2.0 * self.point.nacv * self.rho12().im
    }

    pub fn electronic_energy(&self) -> f64 {
        let [r1, r2] = self.populations();
        r1 * self.point.energies[0] + r2 * self.point.energies[1]
    }

    /// Mean-field total energy `sum_l rho_ll eps_l + P^2 / 2M`.
    pub fn ehrenfest_energy(&self, mass: f64) -> f64 {
        self.electronic_energy() + self.p * self.p / (2.0 * mass)
    }

    pub fn surface_energy(&self, state: usize, mass: f64) -> f64 {
        self.point.energies[state] + self.p * self.p / (2.0 * mass)
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite()
            && self.p.is_finite()
            && self.f.iter().all(|x| x.is_finite())
            && self.c.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Mean-field force `-sum_k rho_kk eps'_k - sum_kl Re(rho_lk)(eps_k - eps_l) d_lk`.
pub fn ehrenfest_force(point: &AdiabaticPoint, c: &[C64; 2]) -> f64 {
    let r1 = c[0].norm_sqr();
    let r2 = c[1].norm_sqr();
    let rho12 = c[0].conj() * c[1];
    -(r1 * point.gradients[0] + r2 * point.gradients[1])
        - 2.0 * rho12.re * (point.energies[1] - point.energies[0]) * point.nacv
}

/// Quantum-momentum contribution `-(2 qm / M) sum_l rho_ll f_l (sum_k rho_kk f_k - f_l)`.
pub fn decoherence_force(c: &[C64; 2], f: &[f64; 2], qm: f64, mass: f64) -> f64 {
    let rho = [c[0].norm_sqr(), c[1].norm_sqr()];
    let mean = rho[0] * f[0] + rho[1] * f[1];
    -2.0 * qm / mass * (rho[0] * f[0] * (mean - f[0]) + rho[1] * f[1] * (mean - f[1]))
}

/// Full coupled-trajectory force on one trajectory.
pub fn ctmqc_force(traj: &TrajectoryState, qm: f64, mass: f64) -> f64 {
    let mut force = ehrenfest_force(&traj.point, &traj.c);
    if qm != 0.0 {
        force += decoherence_force(&traj.c, &traj.f, qm, mass);
    }
    force
}

/// Right-hand side of the coefficient equation in the Schroedinger picture:
/// `dC_l/dt = -i eps_l C_l - sum_k C_k v d_lk - (qm/M)(sum_k |C_k|^2 f_k - f_l) C_l`.
pub fn ctmqc_electronic_rhs(traj: &TrajectoryState, qm: f64, mass: f64) -> [C64; 2] {
    let v = traj.p / mass;
    let d = traj.point.nacv;
    let e = traj.point.energies;
    let i = C64::new(0.0, 1.0);
    let mut rhs = [
        -i * e[0] * traj.c[0] - traj.c[1] * (v * d),
        -i * e[1] * traj.c[1] + traj.c[0] * (v * d),
    ];
    if qm != 0.0 {
        let mean = traj.mean_f();
        for l in 0..2 {
            rhs[l] -= traj.c[l] * (qm / mass * (mean - traj.f[l]));
        }
    }
    rhs
}

/// Trapezoidal update of the time-integrated adiabatic forces.
pub fn accumulate_adiabatic_force(f: [f64; 2], g0: [f64; 2], g1: [f64; 2], dt: f64) -> [f64; 2] {
    [
        f[0] - 0.5 * dt * (g0[0] + g1[0]),
        f[1] - 0.5 * dt * (g0[1] + g1[1]),
    ]
}

/// Endpoint data of one step, interpolated linearly inside the step.
#[derive(Debug, Clone, Copy)]
pub struct StepSegment {
    pub energies: [[f64; 2]; 2],
    pub nacv: [f64; 2],
    pub velocity: [f64; 2],
    pub f: [[f64; 2]; 2],
}

impl StepSegment {
    fn lerp(a: f64, b: f64, s: f64) -> f64 {
        a + (b - a) * s
    }

    /// Integrated phase `int_0^tau eps_l` for linearly varying energies.
    fn phase(&self, l: usize, tau: f64, dt: f64) -> f64 {
        let e0 = self.energies[0][l];
        let e1 = self.energies[1][l];
        e0 * tau + 0.5 * (e1 - e0) * tau * tau / dt
    }
}

/// Interaction-picture coupling derivative at fraction `s = tau/dt` of the step.
fn interaction_rhs(seg: &StepSegment, c: &[C64; 2], tau: f64, dt: f64) -> [C64; 2] {
    let s = tau / dt;
    let v = StepSegment::lerp(seg.velocity[0], seg.velocity[1], s);
    let d = StepSegment::lerp(seg.nacv[0], seg.nacv[1], s);
    let dtheta = seg.phase(0, tau, dt) - seg.phase(1, tau, dt);
    // c_l = C_l exp(i theta_l); coupling picks up exp(i(theta_l - theta_k))
    let rot = C64::from_polar(v * d, dtheta);
    [-(rot * c[1]), rot.conj() * c[0]]
}

/// Exact flow of the decoherence term `dC_l/dt = -(qm/M)(sum_k |C_k|^2 f_k - f_l) C_l`
/// from `ta` to `tb`. Each coefficient is scaled by `exp((qm/M) int f_l)` and the
/// result is renormalized, so the norm is kept exactly and phases are untouched.
fn decoherence_flow(seg: &StepSegment, c: [C64; 2], ta: f64, tb: f64, dt: f64, qm: f64, mass: f64) -> [C64; 2] {
    let f_at = |l: usize, tau: f64| StepSegment::lerp(seg.f[0][l], seg.f[1][l], tau / dt);
    let integral = |l: usize| 0.5 * (tb - ta) * (f_at(l, ta) + f_at(l, tb));
    let g = [qm / mass * integral(0), qm / mass * integral(1)];
    // shift by the larger exponent to avoid overflow
    let top = g[0].max(g[1]);
    let w = [(g[0] - top).exp(), (g[1] - top).exp()];
    let before = c[0].norm_sqr() + c[1].norm_sqr();
    let after = w[0] * w[0] * c[0].norm_sqr() + w[1] * w[1] * c[1].norm_sqr();
    if after == 0.0 {
        return c;
    }
    let scale = (before / after).sqrt();
    [c[0] * (w[0] * scale), c[1] * (w[1] * scale)]
}

/// Advances the coefficients over one step: half a step of decoherence flow,
/// RK4 for the non-adiabatic coupling in the interaction picture, then the
/// second half of the decoherence flow.
pub fn propagate_coefficients(c: [C64; 2], seg: &StepSegment, dt: f64, qm: f64, mass: f64) -> [C64; 2] {
    let c = if qm != 0.0 { decoherence_flow(seg, c, 0.0, 0.5 * dt, dt, qm, mass) } else { c };
    let axpy = |a: &[C64; 2], k: &[C64; 2], h: f64| [a[0] + k[0] * h, a[1] + k[1] * h];
    let k1 = interaction_rhs(seg, &c, 0.0, dt);
    let k2 = interaction_rhs(seg, &axpy(&c, &k1, 0.5 * dt), 0.5 * dt, dt);
    let k3 = interaction_rhs(seg, &axpy(&c, &k2, 0.5 * dt), 0.5 * dt, dt);
    let k4 = interaction_rhs(seg, &axpy(&c, &k3, dt), dt, dt);
    let mut c = [
        c[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (dt / 6.0),
        c[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (dt / 6.0),
    ];
    if qm != 0.0 {
        c = decoherence_flow(seg, c, 0.5 * dt, dt, dt, qm, mass);
    }
    [
        c[0] * C64::from_polar(1.0, -seg.phase(0, dt, dt)),
        c[1] * C64::from_polar(1.0, -seg.phase(1, dt, dt)),
    ]
}

/// Knobs that alter the physics for diagnostic runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// When false the NACV is zeroed everywhere.
    pub couplings: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { couplings: true }
    }
}

pub fn evaluate_point(
    model: &DiabaticModel,
    r: f64,
    prev: Option<&AdiabaticPoint>,
    options: StepOptions,
) -> Result<AdiabaticPoint> {
    let mut point = model.adiabatic_point(r, prev)?;
    if !options.couplings {
        point.nacv = 0.0;
    }
    Ok(point)
}

fn force_for(traj: &TrajectoryState, law: ForceLaw, mass: f64, dt: f64) -> f64 {
    match law {
        ForceLaw::CoupledTrajectory { qm } => ctmqc_force(traj, qm, mass),
        ForceLaw::Surface(a) => -traj.point.gradients[a],
        ForceLaw::VectorPotential => match traj.previous_a {
            Some(prev) => (traj.vector_potential() - prev) / dt,
            None => ehrenfest_force(&traj.point, &traj.c),
        },
    }
}

/// One velocity-Verlet / RK4 step of a single trajectory. The coefficient
/// equation always contains the adiabatic and NACV terms; the decoherence
/// term is present only for [`ForceLaw::CoupledTrajectory`] with `qm != 0`.
pub fn advance(
    traj: &mut TrajectoryState,
    model: &DiabaticModel,
    dt: f64,
    law: ForceLaw,
    options: StepOptions,
) -> Result<()> {
    let mass = model.mass;
    let qm = match law {
        ForceLaw::CoupledTrajectory { qm } => qm,
        _ => 0.0,
    };
    let f0 = force_for(traj, law, mass, dt);
    let r1 = traj.r + traj.p * dt / mass + 0.5 * f0 * dt * dt / mass;
    let point1 = evaluate_point(model, r1, Some(&traj.point), options)?;
    let f_acc = accumulate_adiabatic_force(traj.f, traj.point.gradients, point1.gradients, dt);
    let seg = StepSegment {
        energies: [traj.point.energies, point1.energies],
        nacv: [traj.point.nacv, point1.nacv],
        velocity: [traj.p / mass, (traj.p + f0 * dt) / mass],
        f: [traj.f, f_acc],
    };
    let c1 = propagate_coefficients(traj.c, &seg, dt, qm, mass);
    let a0 = traj.vector_potential();

    traj.r = r1;
    traj.point = point1;
    traj.f = f_acc;
    traj.c = c1;
    match law {
        // P - A is conserved exactly: dP = dA over the step
        ForceLaw::VectorPotential => {
            traj.p += traj.vector_potential() - a0;
            traj.previous_a = Some(a0);
        }
        _ => {
            let f1 = force_for(traj, law, mass, dt);
            traj.p += 0.5 * (f0 + f1) * dt;
        }
    }
    Ok(())
}

/// Residual of the gauge condition `eps_apx + A P / M`, with
/// `-i <Phi|dPhi/dt>` evaluated from the coefficient equation including the
/// basis rotation along the trajectory. Vanishes analytically.
pub fn gauge_residual(traj: &TrajectoryState, qm: f64, mass: f64) -> f64 {
    let v = traj.p / mass;
    let rhs = ctmqc_electronic_rhs(traj, qm, mass);
    let c = &traj.c;
    // <Phi|dPhi/dt> = sum_l C_l^* dC_l/dt + v sum_lk C_l^* C_k d_lk
    let mut overlap = c[0].conj() * rhs[0] + c[1].conj() * rhs[1];
    overlap += (c[0].conj() * c[1] - c[1].conj() * c[0]) * (v * traj.point.nacv);
    let a = traj.vector_potential();
    let eps_apx = traj.electronic_energy() + (C64::new(0.0, -1.0) * overlap).re - v * a;
    eps_apx + a * v
}
