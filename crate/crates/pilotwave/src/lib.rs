//! # pilotwave
//!
//! A de Broglie-Bohm trajectory simulator for wave-packet interferometry.
//!
//! The library integrates Bohmian particle trajectories through
//! Stern-Gerlach devices, EPR pairs and empty-wave interferometers, using
//! both the exact guidance law and the simple weighted-velocity formula
//! (the density-weighted average of packet velocities, exact under
//! orthogonal-spin entanglement). Four which-path detector models show how
//! a position record can end up on the arm the Bohmian particle never
//! took: the "surrealistic trajectory" effect.
//!
//! Everything runs in natural units: packet width `a = 1`, kick speed
//! `u = 1`, time in `a/u`, and `hbar/m = u/k` so a carrier `exp(i k z)`
//! rides at group velocity `u`.
//!
//! Modules:
//!
//! * [`state`] — multi-branch product states, conditional waves, effective
//!   collapse.
//! * [`dynamics`] — exact guidance velocity, weighted packet currents,
//!   closed-form overlap velocity, rotated 2D basis.
//! * [`integrate`] — event-driven piecewise-analytic integration, the
//!   implicit overlap solution, adaptive RK4, packet quantiles.
//! * [`detectors`] — the four position-detector interactions and record
//!   readout.
//! * [`scenarios`] — end-to-end experiments, surreal-record
//!   classification, the GHZ no-assignment table, ensembles.
//! * [`io`] — key/value run configs, CSV trajectory export, SVG figures
//!   with a grayscale density layer.
//! * [`verify`] — the reproduction checklist behind `pilotwave verify`.
//!
//! The `examples/` directory holds one runnable program per capability;
//! `cargo run --example stern_gerlach` is a good place to start. The thin
//! `pilotwave` binary drives the same library from the command line.

pub mod detectors;
pub mod dynamics;
pub mod integrate;
pub mod io;
pub mod scenarios;
pub mod state;
pub mod stats;
pub mod verify;

pub use dynamics::{
    approx_velocity, exact_velocity, spinless_overlap_velocity, PacketCurrent, RotatedBasis,
    VelocityField, VelocitySample,
};
pub use integrate::{
    catch_time, integrate_piecewise, quantile, rk4_adaptive, solve_implicit, CapturedBy,
    EventKind, ImplicitOverlap, IntegratorControls, Method, PacketModel, Trajectory,
    TrajectoryEvent,
};
pub use state::{
    Amplitude, Branch, Configuration, ConditionalWave, FactorKind, QuantumState, SpatialFactor,
    Spin,
};
