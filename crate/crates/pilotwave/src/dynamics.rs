//! Bohmian velocities.
//!
//! The exact guidance law takes the imaginary part of the logarithmic
//! gradient of the spinor wave, contracted over spin components:
//! `v_i = (hbar/m) Im(psi^dag d_i psi / psi^dag psi)`. Gradients are
//! analytic for every factor kind (plane-wave carrier for Rect and ring
//! factors, complex-width exponent for Gauss), so no numerical
//! differentiation is involved.
//!
//! The weighted-velocity formula averages the local packet currents with
//! density weights. It is exact whenever the overlapping packets are
//! entangled with orthogonal spin states and remains a good approximation
//! otherwise; both facts are exercised heavily by the tests.

use num_complex::Complex64;
use thiserror::Error;

use crate::state::{Configuration, QuantumState, StateError};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("velocity undefined at node (density {density:.3e})")]
    NodeDensity { density: f64 },
    #[error("weighted velocity undefined: all packet densities vanish")]
    UndefinedPoint,
    #[error("degenerate rotated-basis parameters")]
    DegenerateTransform,
    #[error(transparent)]
    State(#[from] StateError),
}

/// Velocity of one degree of freedom, with a flag marking configurations
/// that sit on a Rect support edge (where the one-sided interior value is
/// used).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub value: f64,
    pub at_rect_edge: bool,
}

/// Density and local velocity of one wave packet at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketCurrent {
    pub density: f64,
    pub velocity: f64,
}

/// Velocity evaluator of one degree of freedom, closing over a state:
/// finite wherever the density is positive, and constant (the group
/// velocity) on a single plane-wave packet.
#[derive(Debug, Clone, Copy)]
pub struct VelocityField<'s> {
    pub dof: usize,
    state: &'s QuantumState,
}

impl<'s> VelocityField<'s> {
    pub fn new(state: &'s QuantumState, dof: usize) -> Self {
        VelocityField { dof, state }
    }

    pub fn eval(&self, config: &Configuration, t: f64) -> Result<VelocitySample, DynamicsError> {
        exact_velocity_at(self.state, config, self.dof, t)
    }
}

/// Exact guidance-law velocity of dof `dof` at the state's current time.
pub fn exact_velocity(
    state: &QuantumState,
    config: &Configuration,
    dof: usize,
) -> Result<VelocitySample, DynamicsError> {
    exact_velocity_at(state, config, dof, state.time)
}

/// Exact guidance-law velocity at an explicit time (the factors are
/// parametric in time, so no state clone is needed while integrating).
pub fn exact_velocity_at(
    state: &QuantumState,
    config: &Configuration,
    dof: usize,
    t: f64,
) -> Result<VelocitySample, DynamicsError> {
    if config.len() != state.dof_count() {
        return Err(StateError::ArityMismatch {
            expected: state.dof_count(),
            got: config.len(),
        }
        .into());
    }
    // Group branch values and branch gradients by spin tuple, then contract.
    let mut groups: Vec<(&[crate::state::Spin], Complex64, Complex64)> = Vec::new();
    let mut at_edge = false;
    let mut scale = 1.0;
    for b in &state.branches {
        let value = b.value_at(&config.0, t, &state.hbar_over_m);
        let f = &b.factors[dof];
        scale = f.coordinate_scale();
        if f.at_edge(config[dof], t) {
            at_edge = true;
        }
        let grad = value * f.log_derivative(config[dof], t, state.hbar_over_m[dof]);
        match groups.iter_mut().find(|(s, _, _)| *s == b.spins.as_slice()) {
            Some((_, v, g)) => {
                *v += value;
                *g += grad;
            }
            None => groups.push((&b.spins, value, grad)),
        }
    }
    let density: f64 = groups.iter().map(|(_, v, _)| v.norm_sqr()).sum();
    if density < 1e-300 {
        return Err(DynamicsError::NodeDensity { density });
    }
    let current: f64 = groups.iter().map(|(_, v, g)| (v.conj() * g).im).sum();
    let value = state.hbar_over_m[dof] * current / (density * scale * scale);
    Ok(VelocitySample {
        value,
        at_rect_edge: at_edge,
    })
}

/// Density-weighted average of packet velocities (the simple velocity
/// formula). When packets spread non-negligibly the caller must supply
/// local currents, as [`packet_currents`] does.
pub fn approx_velocity(currents: &[PacketCurrent]) -> Result<f64, DynamicsError> {
    let rho: f64 = currents.iter().map(|c| c.density).sum();
    if rho <= 0.0 {
        return Err(DynamicsError::UndefinedPoint);
    }
    Ok(currents.iter().map(|c| c.density * c.velocity).sum::<f64>() / rho)
}

/// One [`PacketCurrent`] per branch at the configuration: the branch
/// density (interference ignored) and the branch's local current velocity
/// on `dof`. Feeding these into [`approx_velocity`] gives the weighted
/// velocity formula for the state.
pub fn packet_currents(
    state: &QuantumState,
    config: &Configuration,
    dof: usize,
    t: f64,
) -> Vec<PacketCurrent> {
    state
        .branches
        .iter()
        .map(|b| {
            let density = b.value_at(&config.0, t, &state.hbar_over_m).norm_sqr();
            let velocity =
                b.factors[dof].local_current_velocity(config[dof], t, state.hbar_over_m[dof]);
            PacketCurrent { density, velocity }
        })
        .collect()
}

/// Weighted-velocity formula evaluated directly on a state.
pub fn approx_velocity_at(
    state: &QuantumState,
    config: &Configuration,
    dof: usize,
    t: f64,
) -> Result<f64, DynamicsError> {
    approx_velocity(&packet_currents(state, config, dof, t))
}

/// Exact guidance-law velocities of every dof at once, sharing the branch
/// evaluations, plus the configuration-space density. This is the inner
/// loop of the numerical integrator.
pub fn velocity_vector(
    state: &QuantumState,
    positions: &[f64],
    t: f64,
) -> Result<(Vec<f64>, f64), DynamicsError> {
    let dofs = state.dof_count();
    let mut groups: Vec<(&[crate::state::Spin], Complex64, Vec<Complex64>)> = Vec::new();
    for b in &state.branches {
        let value = b.value_at(positions, t, &state.hbar_over_m);
        let grads: Vec<Complex64> = (0..dofs)
            .map(|d| value * b.factors[d].log_derivative(positions[d], t, state.hbar_over_m[d]))
            .collect();
        match groups.iter_mut().find(|(s, _, _)| *s == b.spins.as_slice()) {
            Some((_, v, g)) => {
                *v += value;
                for (acc, gd) in g.iter_mut().zip(&grads) {
                    *acc += gd;
                }
            }
            None => groups.push((&b.spins, value, grads)),
        }
    }
    let density: f64 = groups.iter().map(|(_, v, _)| v.norm_sqr()).sum();
    if density < 1e-300 {
        return Err(DynamicsError::NodeDensity { density });
    }
    let velocities = (0..dofs)
        .map(|d| {
            let current: f64 = groups.iter().map(|(_, v, g)| (v.conj() * g[d]).im).sum();
            let scale = state.branches[0].factors[d].coordinate_scale();
            state.hbar_over_m[d] * current / (density * scale * scale)
        })
        .collect();
    Ok((velocities, density))
}

/// Weighted-velocity counterpart of [`velocity_vector`]: the density-
/// weighted average of branch currents on every dof, ignoring interference.
pub fn weighted_velocity_vector(
    state: &QuantumState,
    positions: &[f64],
    t: f64,
) -> Result<(Vec<f64>, f64), DynamicsError> {
    let dofs = state.dof_count();
    let weights: Vec<f64> = state
        .branches
        .iter()
        .map(|b| b.value_at(positions, t, &state.hbar_over_m).norm_sqr())
        .collect();
    let rho: f64 = weights.iter().sum();
    if rho < 1e-300 {
        return Err(DynamicsError::NodeDensity { density: rho });
    }
    let velocities = (0..dofs)
        .map(|d| {
            state
                .branches
                .iter()
                .zip(&weights)
                .map(|(b, w)| {
                    w * b.factors[d].local_current_velocity(
                        positions[d],
                        t,
                        state.hbar_over_m[d],
                    )
                })
                .sum::<f64>()
                / rho
        })
        .collect();
    Ok((velocities, rho))
}

/// Relative phase `phi` of two amplitudes, defined through
/// `alpha |beta| / (|alpha| beta) = exp(-i phi)`.
pub fn relative_phase(alpha: Complex64, beta: Complex64) -> f64 {
    (alpha.conj() * beta).arg()
}

/// Closed-form Bohmian velocity of a spinless particle inside the overlap
/// of two counter-propagating plane-wave packets:
/// `(|beta|^2 - |alpha|^2) u / (1 + 2 |alpha beta| cos(2 k z + phi))`.
pub fn spinless_overlap_velocity(
    alpha: Complex64,
    beta: Complex64,
    u: f64,
    k: f64,
    z: f64,
) -> Result<f64, DynamicsError> {
    let phi = relative_phase(alpha, beta);
    let ab = alpha.norm() * beta.norm();
    let denom = 1.0 + 2.0 * ab * (2.0 * k * z + phi).cos();
    if denom <= 0.0 {
        return Err(DynamicsError::NodeDensity { density: denom });
    }
    Ok((beta.norm_sqr() - alpha.norm_sqr()) * u / denom)
}

/// Rotated 2D basis for the joint particle/ring-detector motion. `Z` is
/// the direction along which the two overlap plane waves counter-propagate
/// and `Y` the conserved transverse coordinate:
///
/// ```text
/// Z = (k z + kt * R * theta) / sqrt(k^2 + kt^2)
/// Y = (-omega R z + u R theta) / sqrt(u^2 + (omega R)^2)
/// ```
///
/// The map is an isometry of (z, R*theta) exactly when `k/u = kt/(omega R)`
/// (equal mass scale for both subsystems).
#[derive(Debug, Clone, Copy)]
pub struct RotatedBasis {
    pub k: f64,
    pub k_tilde: f64,
    pub u: f64,
    pub omega: f64,
    pub radius: f64,
}

impl RotatedBasis {
    pub fn new(
        k: f64,
        k_tilde: f64,
        u: f64,
        omega: f64,
        radius: f64,
    ) -> Result<Self, DynamicsError> {
        let wavenorm = k.hypot(k_tilde);
        let velnorm = u.hypot(omega * radius);
        // The inverse exists only when the two projection directions are
        // not (anti)parallel-degenerate: k*u + kt*omega*R != 0.
        let det = k * u + k_tilde * omega * radius;
        if wavenorm == 0.0 || velnorm == 0.0 || det.abs() < 1e-12 * wavenorm * velnorm {
            return Err(DynamicsError::DegenerateTransform);
        }
        Ok(RotatedBasis {
            k,
            k_tilde,
            u,
            omega,
            radius,
        })
    }

    /// Combined wavenumber `K = sqrt(k^2 + kt^2)` of the overlap plane
    /// waves along Z.
    pub fn combined_wavenumber(&self) -> f64 {
        self.k.hypot(self.k_tilde)
    }

    /// Forward map from (z, theta) to (Z, Y).
    pub fn to_zy(&self, z: f64, theta: f64) -> (f64, f64) {
        let s = self.radius * theta;
        let big_z = (self.k * z + self.k_tilde * s) / self.combined_wavenumber();
        let or = self.omega * self.radius;
        let y = (-or * z + self.u * s) / self.u.hypot(or);
        (big_z, y)
    }

    /// Inverse map from (Z, Y) back to (z, theta).
    pub fn from_zy(&self, big_z: f64, y: f64) -> (f64, f64) {
        let a = self.combined_wavenumber();
        let or = self.omega * self.radius;
        let b = self.u.hypot(or);
        // Solve  [k/a  kt/a] [z]   [Z]
        //        [-or/b u/b] [s] = [Y]
        let det = (self.k * self.u + self.k_tilde * or) / (a * b);
        let z = (self.u / b * big_z - self.k_tilde / a * y) / det;
        let s = (self.k / a * y + or / b * big_z) / det;
        (z, s / self.radius)
    }
}
