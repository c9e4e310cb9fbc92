//! Trajectory integration.
//!
//! Three routes produce trajectories:
//!
//! * [`integrate_piecewise`] — event-driven, piecewise-analytic and exact
//!   for box packets entangled with orthogonal spins: ride segments at the
//!   group velocity, overlap segments at the weighted velocity, with every
//!   support-boundary crossing solved in closed form.
//! * [`ImplicitOverlap`] / [`solve_implicit`] — the closed-form implicit
//!   solution of the spinless two-plane-wave overlap, evaluated by
//!   safeguarded Newton iteration with a guaranteed bracket.
//! * [`rk4_adaptive`] — classic fourth-order Runge-Kutta with step-doubling
//!   error control on the exact guidance law for any packet model, with
//!   sign-change bisection for events and effective-collapse pruning after
//!   each accepted step.

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{self, DynamicsError};
use crate::state::{Configuration, FactorKind, QuantumState, StateError};

/// Density floor below which an integration step counts as a node
/// collision (natural units, `a = 1`).
const NODE_FLOOR: f64 = 1e-14;
/// Time resolution of event bisection.
const EVENT_TIME_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum IntegrateError {
    #[error("initial position {z0} outside the packet support (half width {half_width})")]
    OutsideSupport { z0: f64, half_width: f64 },
    #[error("amplitudes not normalized: |alpha|^2 + |beta|^2 = {norm}")]
    InvalidAmplitudes { norm: f64 },
    #[error("piecewise integration refused: same-spin branches overlap at t = {time} (use rk4Adaptive or the implicit solution)")]
    SameSpinBranches { time: f64 },
    #[error("piecewise integration requires box or ring factors")]
    RequiresBoundedFactors,
    #[error("node collision at t = {time}: density below {NODE_FLOOR}")]
    NodeCollision { time: f64 },
    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },
    #[error("no root in bracket at t = {time}")]
    NoRootInBracket { time: f64 },
    #[error("event loop failed to advance at t = {time}")]
    Stalled { time: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    OverlapEntry,
    OverlapExit,
    PacketCapture,
    BranchCollapse,
    DetectorInteraction,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::OverlapEntry => "overlapEntry",
            EventKind::OverlapExit => "overlapExit",
            EventKind::PacketCapture => "packetCapture",
            EventKind::BranchCollapse => "branchCollapse",
            EventKind::DetectorInteraction => "detectorInteraction",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEvent {
    pub time: f64,
    pub kind: EventKind,
    pub config: Configuration,
    /// Stable tag of the branch concerned (captured packet, pruned branch).
    pub branch: Option<usize>,
    pub note: String,
}

/// Time-ordered configurations with annotated events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, Configuration)>,
    pub events: Vec<TrajectoryEvent>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory::default()
    }

    pub fn push_sample(&mut self, t: f64, config: Configuration) {
        if let Some((last, _)) = self.samples.last() {
            if t <= *last {
                return;
            }
        }
        self.samples.push((t, config));
    }

    pub fn push_event(&mut self, event: TrajectoryEvent) {
        self.events.push(event);
    }

    pub fn start_time(&self) -> f64 {
        self.samples.first().map(|(t, _)| *t).unwrap_or(0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }

    pub fn final_config(&self) -> &Configuration {
        &self.samples.last().expect("empty trajectory").1
    }

    /// Linear interpolation between samples (clamped at the ends). The
    /// analytic integrators place samples on every kink, so interpolation
    /// is exact for them.
    pub fn position_at(&self, t: f64, dof: usize) -> f64 {
        self.config_at(t)[dof]
    }

    pub fn config_at(&self, t: f64) -> Configuration {
        assert!(!self.samples.is_empty(), "empty trajectory");
        if t <= self.samples[0].0 {
            return self.samples[0].1.clone();
        }
        if t >= self.samples[self.samples.len() - 1].0 {
            return self.samples[self.samples.len() - 1].1.clone();
        }
        let idx = self.samples.partition_point(|(st, _)| *st <= t);
        let (t0, c0) = &self.samples[idx - 1];
        let (t1, c1) = &self.samples[idx];
        let frac = (t - t0) / (t1 - t0);
        Configuration(
            c0.0.iter()
                .zip(&c1.0)
                .map(|(a, b)| a + frac * (b - a))
                .collect(),
        )
    }

    pub fn first_event(&self, kind: EventKind) -> Option<&TrajectoryEvent> {
        self.events.iter().find(|e| e.kind == kind)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TrajectoryEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Append a later leg, dropping a duplicated boundary sample.
    pub fn extend(&mut self, other: Trajectory) {
        for (t, c) in other.samples {
            self.push_sample(t, c);
        }
        self.events.extend(other.events);
        self.events
            .sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PiecewiseAnalytic,
    ImplicitRoot,
    Rk4Adaptive,
}

/// Integration controls; the defaults resolve the lambda = 0.3a overlap
/// oscillations with well over 100 steps per period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorControls {
    pub method: Method,
    pub max_step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub collapse_epsilon: f64,
    /// Collapse pruning assumes free evolution from now on; legs that still
    /// have kicks or detector interactions ahead must disable it.
    pub prune_enabled: bool,
    /// Output resolution of the analytic integrators.
    pub sample_step: f64,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        IntegratorControls {
            method: Method::Rk4Adaptive,
            max_step: 1e-3,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            collapse_epsilon: 1e-12,
            prune_enabled: true,
            sample_step: 1e-2,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        if self.max_step <= 0.0 || self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(IntegrateError::InvalidAmplitudes { norm: f64::NAN });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapturedBy {
    UpPacket,
    DownPacket,
}

/// Hypothetical times at which the overlap loses the particle, from the
/// two linear catch equations; the earlier one is the one that actually
/// takes place. Ties are deterministically assigned to the up packet.
///
/// Returns the catch time and which packet keeps the particle afterwards.
pub fn catch_time(
    alpha: Complex64,
    beta: Complex64,
    z0: f64,
    a: f64,
    u: f64,
) -> Result<(f64, CapturedBy), IntegrateError> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(IntegrateError::InvalidAmplitudes { norm });
    }
    if z0.abs() > 0.5 * a {
        return Err(IntegrateError::OutsideSupport {
            z0,
            half_width: 0.5 * a,
        });
    }
    let a2 = alpha.norm_sqr();
    let b2 = beta.norm_sqr();
    if b2 < 1e-30 {
        return Ok((0.0, CapturedBy::UpPacket));
    }
    if a2 < 1e-30 {
        return Ok((0.0, CapturedBy::DownPacket));
    }
    // z0 + (|a|^2 - |b|^2) u t = -a/2 + u t  : bottom of the up packet
    // passes the particle, which then rides the down packet.
    let t_down = (z0 + 0.5 * a) / (2.0 * b2 * u);
    // z0 + (|a|^2 - |b|^2) u t = a/2 - u t   : top of the down packet
    // passes it, leaving it riding the up packet.
    let t_up = (0.5 * a - z0) / (2.0 * a2 * u);
    if t_up <= t_down {
        Ok((t_up, CapturedBy::UpPacket))
    } else {
        Ok((t_down, CapturedBy::DownPacket))
    }
}

// ---------------------------------------------------------------------------
// piecewise-analytic integration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Membership {
    Interior,
    Boundary(usize, f64), // dof at whose edge the branch sits, sign of xi
    Outside,
}

fn classify_membership(state: &QuantumState, branch: usize, x: &[f64], t: f64) -> Membership {
    const EDGE_TOL: f64 = 1e-12;
    let b = &state.branches[branch];
    if b.coefficient.norm_sqr() == 0.0 {
        return Membership::Outside;
    }
    let mut boundary: Option<(usize, f64)> = None;
    for (d, f) in b.factors.iter().enumerate() {
        if f.kind != FactorKind::Rect {
            continue;
        }
        let xi = x[d] - f.center_at(t);
        let gap = 0.5 * f.width - xi.abs();
        if gap < -EDGE_TOL {
            return Membership::Outside;
        }
        if gap <= EDGE_TOL {
            boundary = Some((d, xi.signum()));
        }
    }
    match boundary {
        Some((d, s)) => Membership::Boundary(d, s),
        None => Membership::Interior,
    }
}

/// Weighted velocity over a set of branches whose supports contain the
/// configuration. Membership is already settled by the alive set, so the
/// weights are the analytic interior densities |c|^2 / prod(width); going
/// through the pointwise amplitude instead would drop a branch whose edge
/// rounded a single ulp past the configuration.
fn weighted_velocities(state: &QuantumState, alive: &[usize], _x: &[f64], _t: f64) -> Vec<f64> {
    let dofs = state.dof_count();
    let mut num = vec![0.0; dofs];
    let mut den = 0.0;
    for &i in alive {
        let b = &state.branches[i];
        let mut w = b.coefficient.norm_sqr();
        for f in &b.factors {
            w /= match f.kind {
                FactorKind::RingPlane => 2.0 * std::f64::consts::PI * f.width,
                _ => f.width,
            };
        }
        den += w;
        for (acc, f) in num.iter_mut().zip(&b.factors) {
            // coordinate velocity: arc group velocity over the arc scale
            *acc += w * f.group_velocity / f.coordinate_scale();
        }
    }
    num.iter().map(|n| n / den).collect()
}

/// The alive set at a configuration: interior branches always, boundary
/// branches only when the flow does not escape their support. When every
/// branch sits at an edge and all of them escape (the capture-time tie),
/// the particle is deterministically assigned to the up packet, the branch
/// with the largest group velocity.
fn alive_branches(state: &QuantumState, x: &[f64], t: f64) -> Vec<usize> {
    let memberships: Vec<Membership> = (0..state.branches.len())
        .map(|i| classify_membership(state, i, x, t))
        .collect();
    let interior: Vec<usize> = memberships
        .iter()
        .enumerate()
        .filter(|(_, m)| **m == Membership::Interior)
        .map(|(i, _)| i)
        .collect();
    let boundary: Vec<(usize, usize, f64)> = memberships
        .iter()
        .enumerate()
        .filter_map(|(i, m)| match m {
            Membership::Boundary(d, side) => Some((i, *d, *side)),
            _ => None,
        })
        .collect();
    let escapes = |reference: &[usize], i: usize, d: usize, side: f64| -> bool {
        let v = weighted_velocities(state, reference, x, t);
        let edge_v = state.branches[i].factors[d].group_velocity;
        // Escaping when the reference flow outruns the edge on the side
        // where the particle sits; including the branch itself only pulls
        // the velocity toward the edge speed, never across it.
        (v[d] - edge_v) * side > 0.0
    };
    let mut alive = interior.clone();
    if interior.is_empty() {
        let all: Vec<usize> = boundary.iter().map(|(i, _, _)| *i).collect();
        for &(i, d, side) in &boundary {
            if !escapes(&all, i, d, side) {
                alive.push(i);
            }
        }
        if alive.is_empty() && !boundary.is_empty() {
            let up = boundary
                .iter()
                .map(|(i, d, _)| (*i, state.branches[*i].factors[*d].group_velocity))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            alive.push(up);
        }
    } else {
        for &(i, d, side) in &boundary {
            if !escapes(&interior, i, d, side) {
                alive.push(i);
            }
        }
    }
    alive.sort_unstable();
    alive
}

fn ensure_orthogonal_spins(
    state: &QuantumState,
    alive: &[usize],
    t: f64,
) -> Result<(), IntegrateError> {
    for (a, &i) in alive.iter().enumerate() {
        for &j in &alive[a + 1..] {
            if state.branches[i].spins == state.branches[j].spins {
                return Err(IntegrateError::SameSpinBranches { time: t });
            }
        }
    }
    Ok(())
}

/// Event-driven exact integration for box-packet states whose overlapping
/// branches carry orthogonal spins (the weighted velocity formula is then
/// exact). Ring factors are allowed; they never bound the support.
pub fn integrate_piecewise(
    state: &QuantumState,
    config0: &Configuration,
    t_end: f64,
    sample_step: f64,
) -> Result<Trajectory, IntegrateError> {
    piecewise_driver(state, config0, t_end, sample_step, true)
}

/// The formula-(4) reference trajectory: identical event-driven machinery
/// but without the orthogonal-spin requirement, so it yields the weighted
/// velocity *approximation* for interfering branches.
pub fn integrate_weighted_piecewise(
    state: &QuantumState,
    config0: &Configuration,
    t_end: f64,
    sample_step: f64,
) -> Result<Trajectory, IntegrateError> {
    piecewise_driver(state, config0, t_end, sample_step, false)
}

fn piecewise_driver(
    state: &QuantumState,
    config0: &Configuration,
    t_end: f64,
    sample_step: f64,
    require_orthogonal: bool,
) -> Result<Trajectory, IntegrateError> {
    for b in &state.branches {
        if b.factors.iter().any(|f| f.kind == FactorKind::Gauss) {
            return Err(IntegrateError::RequiresBoundedFactors);
        }
    }
    if config0.len() != state.dof_count() {
        return Err(StateError::ArityMismatch {
            expected: state.dof_count(),
            got: config0.len(),
        }
        .into());
    }
    let mut t = state.time;
    let mut x = config0.0.clone();
    let mut traj = Trajectory::new();
    traj.push_sample(t, Configuration(x.clone()));

    let mut alive = alive_branches(state, &x, t);
    let mut guard = 0;
    while t < t_end {
        guard += 1;
        if guard > 100_000 {
            return Err(IntegrateError::Stalled { time: t });
        }
        if alive.is_empty() {
            return Err(IntegrateError::NodeCollision { time: t });
        }
        if require_orthogonal {
            ensure_orthogonal_spins(state, &alive, t)?;
        }
        let v = weighted_velocities(state, &alive, &x, t);

        // Earliest support-boundary crossing of the straight-line motion.
        let mut t_next = t_end;
        for b in &state.branches {
            if b.coefficient.norm_sqr() == 0.0 {
                continue;
            }
            for (d, f) in b.factors.iter().enumerate() {
                if f.kind != FactorKind::Rect {
                    continue;
                }
                let rel_v = v[d] - f.group_velocity;
                if rel_v.abs() < 1e-15 {
                    continue;
                }
                let c = f.center_at(t);
                for edge in [c - 0.5 * f.width, c + 0.5 * f.width] {
                    let dt = (edge - x[d]) / rel_v;
                    if dt > 1e-12 && t + dt < t_next {
                        t_next = t + dt;
                    }
                }
            }
        }

        // Densify the straight segment for output, then land on the node.
        let mut ts = t + sample_step;
        while ts < t_next - 1e-12 {
            let xi: Vec<f64> = x
                .iter()
                .zip(&v)
                .map(|(xi, vi)| xi + vi * (ts - t))
                .collect();
            traj.push_sample(ts, Configuration(xi));
            ts += sample_step;
        }
        let x_new: Vec<f64> = x
            .iter()
            .zip(&v)
            .map(|(xi, vi)| xi + vi * (t_next - t))
            .collect();
        x = x_new;
        t = t_next;
        traj.push_sample(t, Configuration(x.clone()));
        if t >= t_end {
            break;
        }

        let new_alive = alive_branches(state, &x, t);
        record_transition_events(state, &mut traj, t, &x, &alive, &new_alive);
        alive = new_alive;
    }
    Ok(traj)
}

/// Overlap-entry / overlap-exit / packet-capture annotations from a change
/// of the alive branch set.
fn record_transition_events(
    state: &QuantumState,
    traj: &mut Trajectory,
    t: f64,
    x: &[f64],
    before: &[usize],
    after: &[usize],
) {
    if before == after {
        return;
    }
    let config = Configuration(x.to_vec());
    let tags = |set: &[usize]| -> Vec<usize> {
        set.iter().map(|&i| state.branches[i].tag).collect()
    };
    if after.len() > before.len() && after.len() >= 2 {
        traj.push_event(TrajectoryEvent {
            time: t,
            kind: EventKind::OverlapEntry,
            config: config.clone(),
            branch: None,
            note: format!("alive branches {:?}", tags(after)),
        });
    }
    if after.len() < before.len() {
        traj.push_event(TrajectoryEvent {
            time: t,
            kind: EventKind::OverlapExit,
            config: config.clone(),
            branch: None,
            note: format!("alive branches {:?}", tags(after)),
        });
        if after.len() == 1 {
            let tag = state.branches[after[0]].tag;
            traj.push_event(TrajectoryEvent {
                time: t,
                kind: EventKind::PacketCapture,
                config,
                branch: Some(tag),
                note: format!("captured by branch {tag}"),
            });
        }
    }
}

// ---------------------------------------------------------------------------
// implicit spinless-overlap solution
// ---------------------------------------------------------------------------

/// The implicit solution of the spinless overlap motion,
/// `z = (|beta|^2 - |alpha|^2) u t - (|alpha beta|/k) sin(2 k z + phi) + C1`,
/// with the constant fixed by continuity at the overlap entry point.
#[derive(Debug, Clone, Copy)]
pub struct ImplicitOverlap {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub u: f64,
    pub k: f64,
    pub phi: f64,
    pub c1: f64,
}

impl ImplicitOverlap {
    pub fn from_entry(
        alpha: Complex64,
        beta: Complex64,
        u: f64,
        k: f64,
        t_entry: f64,
        z_entry: f64,
    ) -> Self {
        let phi = dynamics::relative_phase(alpha, beta);
        let ab = alpha.norm() * beta.norm();
        let drift = (beta.norm_sqr() - alpha.norm_sqr()) * u;
        let c1 = z_entry + ab / k * (2.0 * k * z_entry + phi).sin() - drift * t_entry;
        ImplicitOverlap {
            alpha,
            beta,
            u,
            k,
            phi,
            c1,
        }
    }

    /// Drift velocity of the approximate solution,
    /// `(|beta|^2 - |alpha|^2) u`.
    pub fn drift(&self) -> f64 {
        (self.beta.norm_sqr() - self.alpha.norm_sqr()) * self.u
    }

    /// Oscillation scale `|alpha beta| / k`; the exact position never
    /// leaves `linear(t) +- scale`.
    pub fn oscillation_scale(&self) -> f64 {
        self.alpha.norm() * self.beta.norm() / self.k
    }

    /// The companion straight-line solution through the same entry point.
    pub fn linear(&self, t: f64) -> f64 {
        self.drift() * t + self.c1
    }

    pub fn solve(&self, t: f64) -> Result<f64, IntegrateError> {
        solve_implicit(t, self.alpha, self.beta, self.u, self.k, self.phi, self.c1)
    }
}

/// Solve the implicit overlap equation for `z(t)` by safeguarded Newton
/// iteration; bisection on the guaranteed bracket `z_lin +- |alpha beta|/k`
/// is the fallback. The residual is driven below 1e-12 a.
pub fn solve_implicit(
    t: f64,
    alpha: Complex64,
    beta: Complex64,
    u: f64,
    k: f64,
    phi: f64,
    c1: f64,
) -> Result<f64, IntegrateError> {
    let ab = alpha.norm() * beta.norm();
    let drift = (beta.norm_sqr() - alpha.norm_sqr()) * u;
    let rhs = drift * t + c1;
    if ab == 0.0 {
        return Ok(rhs);
    }
    let scale = ab / k;
    let residual = |z: f64| z + scale * (2.0 * k * z + phi).sin() - rhs;
    let slope = |z: f64| 1.0 + 2.0 * ab * (2.0 * k * z + phi).cos();
    let mut lo = rhs - scale - 1e-12;
    let mut hi = rhs + scale + 1e-12;
    let (flo, fhi) = (residual(lo), residual(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(IntegrateError::NoRootInBracket { time: t });
    }
    let mut z = rhs;
    for _ in 0..200 {
        let f = residual(z);
        if f.abs() < 1e-13 {
            return Ok(z);
        }
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let dz = slope(z);
        let newton = z - f / dz;
        z = if dz.abs() > 1e-12 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let f = residual(z);
    if f.abs() < 1e-12 {
        Ok(z)
    } else {
        Err(IntegrateError::NoRootInBracket { time: t })
    }
}

// ---------------------------------------------------------------------------
// adaptive Runge-Kutta on the exact guidance law
// ---------------------------------------------------------------------------

/// Result of a numerical integration leg: the trajectory plus the final
/// state (pruned branches removed when collapse pruning is enabled).
#[derive(Debug, Clone)]
pub struct IntegrationOutcome {
    pub trajectory: Trajectory,
    pub final_state: QuantumState,
}

enum VelocityMode {
    Exact,
    Weighted,
}

/// Adaptive RK4 on the exact guidance law for every continuous dof
/// simultaneously, from `state.time` to `t_end`.
pub fn rk4_adaptive(
    state: &QuantumState,
    config0: &Configuration,
    t_end: f64,
    controls: &IntegratorControls,
) -> Result<IntegrationOutcome, IntegrateError> {
    rk4_driver(state, config0, t_end, controls, VelocityMode::Exact)
}

/// Same driver on the weighted-velocity (local packet current) field; used
/// for formula-comparison runs. Pruning is never applied here.
pub fn rk4_weighted(
    state: &QuantumState,
    config0: &Configuration,
    t_end: f64,
    controls: &IntegratorControls,
) -> Result<IntegrationOutcome, IntegrateError> {
    rk4_driver(state, config0, t_end, controls, VelocityMode::Weighted)
}

fn eval_velocity(
    state: &QuantumState,
    x: &[f64],
    t: f64,
    mode: &VelocityMode,
) -> Result<Vec<f64>, IntegrateError> {
    let (v, density) = match mode {
        VelocityMode::Exact => dynamics::velocity_vector(state, x, t),
        VelocityMode::Weighted => dynamics::weighted_velocity_vector(state, x, t),
    }
    .map_err(|e| match e {
        DynamicsError::NodeDensity { .. } => IntegrateError::NodeCollision { time: t },
        other => IntegrateError::Dynamics(other),
    })?;
    if density < NODE_FLOOR {
        return Err(IntegrateError::NodeCollision { time: t });
    }
    Ok(v)
}

fn rk4_step(
    state: &QuantumState,
    x: &[f64],
    t: f64,
    h: f64,
    mode: &VelocityMode,
) -> Result<Vec<f64>, IntegrateError> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + s * bi).collect()
    };
    let k1 = eval_velocity(state, x, t, mode)?;
    let k2 = eval_velocity(state, &add(x, &k1, 0.5 * h), t + 0.5 * h, mode)?;
    let k3 = eval_velocity(state, &add(x, &k2, 0.5 * h), t + 0.5 * h, mode)?;
    let k4 = eval_velocity(state, &add(x, &k3, h), t + h, mode)?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Geometric event probes rebuilt whenever the branch list changes.
enum EventProbe {
    /// Rect support membership of one branch (all Rect dofs at once).
    RectContain { branch: usize },
    /// Gaussian branch-pair separation crossing the 6-width threshold.
    GaussSeparation { i: usize, j: usize, dof: usize, threshold: f64 },
}

fn build_probes(state: &QuantumState) -> Vec<EventProbe> {
    let mut probes = Vec::new();
    for (i, b) in state.branches.iter().enumerate() {
        if b.factors.iter().any(|f| f.kind == FactorKind::Rect) {
            probes.push(EventProbe::RectContain { branch: i });
        }
    }
    for i in 0..state.branches.len() {
        for j in i + 1..state.branches.len() {
            // A pair that is permanently dead through a statically
            // disjoint box ancilla never produces overlap events.
            let t0 = state.time;
            let ancilla_dead = (0..state.dof_count()).any(|d| {
                let (fi, fj) = (&state.branches[i].factors[d], &state.branches[j].factors[d]);
                fi.kind == FactorKind::Rect
                    && fj.kind == FactorKind::Rect
                    && fi.group_velocity == fj.group_velocity
                    && (fi.center_at(t0) - fj.center_at(t0)).abs()
                        >= 0.5 * (fi.width + fj.width)
            });
            if ancilla_dead {
                continue;
            }
            for d in 0..state.dof_count() {
                let (fi, fj) = (&state.branches[i].factors[d], &state.branches[j].factors[d]);
                if fi.kind == FactorKind::Gauss
                    && fj.kind == FactorKind::Gauss
                    && (fi.center0 != fj.center0 || fi.group_velocity != fj.group_velocity)
                {
                    probes.push(EventProbe::GaussSeparation {
                        i,
                        j,
                        dof: d,
                        threshold: 6.0 * fi.width.max(fj.width),
                    });
                }
            }
        }
    }
    probes
}

fn probe_value(probe: &EventProbe, state: &QuantumState, x: &[f64], t: f64) -> bool {
    match probe {
        EventProbe::RectContain { branch } => state.branches[*branch].contains(x, t),
        EventProbe::GaussSeparation { i, j, dof, threshold } => {
            let ci = state.branches[*i].factors[*dof].center_at(t);
            let cj = state.branches[*j].factors[*dof].center_at(t);
            (ci - cj).abs() >= *threshold
        }
    }
}

fn containing_branches(state: &QuantumState, x: &[f64], t: f64) -> Vec<usize> {
    state
        .branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.coefficient.norm_sqr() > 0.0 && b.contains(x, t))
        .map(|(i, _)| i)
        .collect()
}

fn rk4_driver(
    state: &QuantumState,
    config0: &Configuration,
    t_end: f64,
    controls: &IntegratorControls,
    mode: VelocityMode,
) -> Result<IntegrationOutcome, IntegrateError> {
    controls.validate()?;
    if config0.len() != state.dof_count() {
        return Err(StateError::ArityMismatch {
            expected: state.dof_count(),
            got: config0.len(),
        }
        .into());
    }
    let mut current = state.clone();
    let mut t = state.time;
    let mut x = config0.0.clone();
    let mut traj = Trajectory::new();
    traj.push_sample(t, Configuration(x.clone()));
    let mut probes = build_probes(&current);
    let mut h = controls.max_step;

    let mut steps: u64 = 0;
    while t < t_end - 1e-14 {
        steps += 1;
        if steps > 50_000_000 {
            return Err(IntegrateError::Stalled { time: t });
        }
        h = h.min(controls.max_step).min(t_end - t);

        // Step doubling: one full step against two half steps.
        let attempt = (|| -> Result<(Vec<f64>, Vec<f64>), IntegrateError> {
            let full = rk4_step(&current, &x, t, h, &mode)?;
            let mid = rk4_step(&current, &x, t, 0.5 * h, &mode)?;
            let half = rk4_step(&current, &mid, t + 0.5 * h, 0.5 * h, &mode)?;
            Ok((full, half))
        })();
        let (full, half) = match attempt {
            Ok(pair) => pair,
            Err(IntegrateError::NodeCollision { .. }) => {
                h *= 0.5;
                if h < 1e-13 {
                    return Err(IntegrateError::NodeCollision { time: t });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let err = full
            .iter()
            .zip(&half)
            .map(|(f, s)| (f - s).abs() / (controls.abs_tol + controls.rel_tol * s.abs().max(1.0)))
            .fold(0.0, f64::max)
            / 15.0;
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-13 {
                return Err(IntegrateError::StepUnderflow { time: t });
            }
            continue;
        }
        // Fifth-order local extrapolation of the accepted value.
        let x_new: Vec<f64> = half
            .iter()
            .zip(&full)
            .map(|(s, f)| s + (s - f) / 15.0)
            .collect();
        let t_new = t + h;

        // Event detection: bisect the earliest probe flip inside the step.
        let flipped: Vec<usize> = probes
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                probe_value(p, &current, &x, t) != probe_value(p, &current, &x_new, t_new)
            })
            .map(|(i, _)| i)
            .collect();
        if !flipped.is_empty() {
            let mut lo = t;
            let mut hi = t_new;
            while hi - lo > EVENT_TIME_TOL {
                let mid = 0.5 * (lo + hi);
                let x_mid = rk4_step(&current, &x, t, mid - t, &mode)?;
                let any = flipped.iter().any(|&i| {
                    probe_value(&probes[i], &current, &x, t)
                        != probe_value(&probes[i], &current, &x_mid, mid)
                });
                if any {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let t_event = hi;
            let x_event = rk4_step(&current, &x, t, t_event - t, &mode)?;
            let before = containing_branches(&current, &x, t);
            let after = containing_branches(&current, &x_event, t_event);
            record_transition_events(&current, &mut traj, t_event, &x_event, &before, &after);
            for &i in &flipped {
                if let EventProbe::GaussSeparation { i: bi, j: bj, .. } = &probes[i] {
                    let separated = probe_value(&probes[i], &current, &x_event, t_event);
                    let kind = if separated {
                        EventKind::OverlapExit
                    } else {
                        EventKind::OverlapEntry
                    };
                    let (ti, tj) = (current.branches[*bi].tag, current.branches[*bj].tag);
                    traj.push_event(TrajectoryEvent {
                        time: t_event,
                        kind,
                        config: Configuration(x_event.clone()),
                        branch: None,
                        note: format!("packets {ti} and {tj}"),
                    });
                }
            }
            t = t_event;
            x = x_event;
            traj.push_sample(t, Configuration(x.clone()));
        } else {
            t = t_new;
            x = x_new;
            traj.push_sample(t, Configuration(x.clone()));
            if err > 1e-4 {
                h *= (0.9 * err.powf(-0.2)).clamp(0.5, 5.0);
            } else {
                h *= 5.0;
            }
        }

        // Effective collapse after each accepted step.
        if controls.prune_enabled && matches!(mode, VelocityMode::Exact) {
            let (pruned, removed) = current
                .at_time(t)
                .prune_collapsed(&Configuration(x.clone()), controls.collapse_epsilon)?;
            if !removed.is_empty() {
                for tag in &removed {
                    traj.push_event(TrajectoryEvent {
                        time: t,
                        kind: EventKind::BranchCollapse,
                        config: Configuration(x.clone()),
                        branch: Some(*tag),
                        note: format!("branch {tag} pruned"),
                    });
                }
                if pruned.branches.len() == 1 {
                    let tag = pruned.branches[0].tag;
                    traj.push_event(TrajectoryEvent {
                        time: t,
                        kind: EventKind::PacketCapture,
                        config: Configuration(x.clone()),
                        branch: Some(tag),
                        note: format!("captured by branch {tag}"),
                    });
                }
                current = pruned;
                probes = build_probes(&current);
            }
        }
    }
    Ok(IntegrationOutcome {
        trajectory: traj,
        final_state: current.at_time(t),
    })
}

// ---------------------------------------------------------------------------
// packet quantiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketModel {
    Rect,
    Gauss,
}

/// Position below which the given fraction of the packet weight lies, for
/// a packet of the stated width centered at the origin.
pub fn quantile(model: PacketModel, width: f64, fraction: f64) -> f64 {
    assert!(fraction > 0.0 && fraction < 1.0, "fraction must be in (0, 1)");
    match model {
        PacketModel::Rect => (fraction - 0.5) * width,
        // density exp(-z^2/a^2)/(a sqrt(pi)): cdf = (1 + erf(z/a))/2
        PacketModel::Gauss => width * statrs::function::erf::erf_inv(2.0 * fraction - 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{Branch, SpatialFactor, Spin};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const K: f64 = 2.0 * std::f64::consts::PI / 0.3;

    /// The split state right after the spin-dependent kick at t = 0.
    fn sg_state(alpha2: f64, beta2: f64) -> QuantumState {
        QuantumState::new(
            vec![
                Branch::new(
                    c(alpha2.sqrt(), 0.0),
                    vec![SpatialFactor::rect(0.0, 1.0, K, 1.0)],
                    vec![Spin::Up],
                ),
                Branch::new(
                    c(beta2.sqrt(), 0.0),
                    vec![SpatialFactor::rect(0.0, -1.0, -K, 1.0)],
                    vec![Spin::Down],
                ),
            ],
            0.0,
            vec![1.0 / K],
        )
    }

    /// Converging packets that fully overlap at t = 0 (clock shifted),
    /// valid for t > -T.
    fn empty_wave_state(alpha2: f64, beta2: f64, t_now: f64, same_spin: bool) -> QuantumState {
        let spin_b = if same_spin { Spin::Up } else { Spin::Down };
        QuantumState::new(
            vec![
                Branch::new(
                    c(alpha2.sqrt(), 0.0),
                    vec![SpatialFactor::rect(0.0, -1.0, -K, 1.0)],
                    vec![Spin::Up],
                ),
                Branch::new(
                    c(beta2.sqrt(), 0.0),
                    vec![SpatialFactor::rect(0.0, 1.0, K, 1.0)],
                    vec![spin_b],
                ),
            ],
            t_now,
            vec![1.0 / K],
        )
    }

    #[test]
    fn catch_time_worked_example() {
        // alpha^2 = 2/5, beta^2 = 3/5, z0 = a/5: caught by the up packet at
        // t = 3a/(8u).
        let (t, who) = catch_time(c(0.4f64.sqrt(), 0.0), c(0.6f64.sqrt(), 0.0), 0.2, 1.0, 1.0)
            .unwrap();
        assert_relative_eq!(t, 0.375, epsilon = 1e-14);
        assert_eq!(who, CapturedBy::UpPacket);
    }

    #[test]
    fn catch_time_single_packet_is_immediate() {
        let (t, who) = catch_time(c(1.0, 0.0), c(0.0, 0.0), 0.3, 1.0, 1.0).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(who, CapturedBy::UpPacket);
    }

    #[test]
    fn catch_time_symmetric_weights() {
        // |alpha| = |beta|, z0 = a/4: zero overlap velocity; the top of the
        // down packet reaches z0 at t = a/(4u).
        let h = c(0.5f64.sqrt(), 0.0);
        let (t, who) = catch_time(h, h, 0.25, 1.0, 1.0).unwrap();
        assert_relative_eq!(t, 0.25, epsilon = 1e-14);
        assert_eq!(who, CapturedBy::UpPacket);
    }

    #[test]
    fn catch_time_validates_inputs() {
        let h = c(0.5f64.sqrt(), 0.0);
        assert!(matches!(
            catch_time(h, h, 0.7, 1.0, 1.0),
            Err(IntegrateError::OutsideSupport { .. })
        ));
        assert!(matches!(
            catch_time(c(1.0, 0.0), c(1.0, 0.0), 0.0, 1.0, 1.0),
            Err(IntegrateError::InvalidAmplitudes { .. })
        ));
    }

    #[test]
    fn piecewise_sg_capture_event() {
        let state = sg_state(0.4, 0.6);
        let traj =
            integrate_piecewise(&state, &Configuration::single(0.2), 1.5, 0.01).unwrap();
        let capture = traj.first_event(EventKind::PacketCapture).unwrap();
        assert_relative_eq!(capture.time, 0.375, epsilon = 1e-13);
        assert_relative_eq!(capture.config[0], 0.125, epsilon = 1e-13);
        assert_eq!(capture.branch, Some(0));
        // thereafter rides a/4 below the up-packet center
        let z_end = traj.position_at(1.5, 0);
        assert_relative_eq!(z_end - 1.5, -0.25, epsilon = 1e-13);
    }

    #[test]
    fn piecewise_empty_wave_packet_exchange() {
        // Particle of the z0 = a/5 lineage: at t = -T it rides a/4 below
        // the up packet (center uT). Entry at (-3a/8u, a/8), exit at
        // (a/4u, a/4), then it rides the down-packet center.
        let t_start = -2.0;
        let state = empty_wave_state(0.4, 0.6, t_start, false);
        let z_start = 2.0 - 0.25;
        let traj =
            integrate_piecewise(&state, &Configuration::single(z_start), 1.0, 0.01).unwrap();
        let entry = traj.first_event(EventKind::OverlapEntry).unwrap();
        assert_relative_eq!(entry.time, -0.375, epsilon = 1e-13);
        assert_relative_eq!(entry.config[0], 0.125, epsilon = 1e-13);
        let exit = traj.first_event(EventKind::OverlapExit).unwrap();
        assert_relative_eq!(exit.time, 0.25, epsilon = 1e-13);
        assert_relative_eq!(exit.config[0], 0.25, epsilon = 1e-13);
        // riding the down-packet center: z(t) = u t
        assert_relative_eq!(traj.position_at(1.0, 0), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn piecewise_refuses_same_spin_overlap() {
        let state = empty_wave_state(0.4, 0.6, -0.1, true);
        let err = integrate_piecewise(&state, &Configuration::single(0.05), 1.0, 0.01)
            .unwrap_err();
        assert!(matches!(err, IntegrateError::SameSpinBranches { .. }));
        // the weighted variant accepts the same state
        let traj =
            integrate_weighted_piecewise(&state, &Configuration::single(0.05), 1.0, 0.01)
                .unwrap();
        assert!(traj.end_time() >= 1.0 - 1e-12);
    }

    #[test]
    fn piecewise_symmetric_split_zero_overlap_velocity() {
        let state = sg_state(0.5, 0.5);
        let traj =
            integrate_piecewise(&state, &Configuration::single(0.25), 1.0, 0.01).unwrap();
        let capture = traj.first_event(EventKind::PacketCapture).unwrap();
        assert_relative_eq!(capture.time, 0.25, epsilon = 1e-13);
        // stationary until capture
        assert_relative_eq!(traj.position_at(0.2, 0), 0.25, epsilon = 1e-13);
        assert_eq!(capture.branch, Some(0));
    }

    #[test]
    fn implicit_solution_anchors_at_entry() {
        let alpha = c(0.4f64.sqrt(), 0.0);
        let beta = c(0.6f64.sqrt(), 0.0);
        let imp = ImplicitOverlap::from_entry(alpha, beta, 1.0, K, -0.375, 0.125);
        assert_relative_eq!(imp.solve(-0.375).unwrap(), 0.125, epsilon = 1e-12);
    }

    #[test]
    fn implicit_solution_linear_when_no_interference() {
        let imp = ImplicitOverlap::from_entry(c(0.0, 0.0), c(1.0, 0.0), 1.0, K, 0.0, 0.1);
        for t in [0.0, 0.2, 0.5] {
            assert_relative_eq!(imp.solve(t).unwrap(), 0.1 + t, epsilon = 1e-14);
        }
    }

    #[test]
    fn implicit_matches_rk4_oracle() {
        // Exact spinless overlap: implicit solution versus the adaptive
        // integrator at tight tolerance, inside the overlap window.
        let alpha = c(0.4f64.sqrt(), 0.0);
        let beta = c(0.6f64.sqrt(), 0.0);
        let t_entry = -0.375;
        let z_entry = 0.125;
        let state = empty_wave_state(0.4, 0.6, t_entry, true);
        let controls = IntegratorControls {
            rel_tol: 1e-10,
            prune_enabled: false,
            ..Default::default()
        };
        let run = rk4_adaptive(&state, &Configuration::single(z_entry), 0.2, &controls).unwrap();
        let imp = ImplicitOverlap::from_entry(alpha, beta, 1.0, K, t_entry, z_entry);
        for i in 0..=50 {
            let t = t_entry + (0.2 - t_entry) * i as f64 / 50.0;
            let z_imp = imp.solve(t).unwrap();
            let z_rk = run.trajectory.position_at(t, 0);
            assert!(
                (z_imp - z_rk).abs() < 1e-6,
                "t = {t}: implicit {z_imp} vs rk4 {z_rk}"
            );
        }
    }

    #[test]
    fn rk4_symmetric_gaussian_stays_on_axis() {
        let h = c(0.5f64.sqrt(), 0.0);
        let state = QuantumState::new(
            vec![
                Branch::new(
                    h,
                    vec![SpatialFactor::gauss(0.0, -1.0, -K, 1.0, -4.0)],
                    vec![Spin::Up],
                ),
                Branch::new(
                    h,
                    vec![SpatialFactor::gauss(0.0, 1.0, K, 1.0, -4.0)],
                    vec![Spin::Up],
                ),
            ],
            -2.0,
            vec![1.0 / K],
        );
        let run = rk4_adaptive(
            &state,
            &Configuration::single(0.0),
            2.0,
            &IntegratorControls::default(),
        )
        .unwrap();
        for (_, cfg) in &run.trajectory.samples {
            assert!(cfg[0].abs() < 1e-10);
        }
    }

    #[test]
    fn rk4_reproduces_piecewise_on_orthogonal_spins() {
        let state = sg_state(0.4, 0.6);
        let exact =
            integrate_piecewise(&state, &Configuration::single(0.2), 1.0, 0.005).unwrap();
        let run = rk4_adaptive(
            &state,
            &Configuration::single(0.2),
            1.0,
            &IntegratorControls::default(),
        )
        .unwrap();
        for i in 0..=100 {
            let t = i as f64 * 0.01;
            let d = (exact.position_at(t, 0) - run.trajectory.position_at(t, 0)).abs();
            assert!(d < 1e-6, "t = {t}, deviation {d}");
        }
        // rk4 found the capture too
        let cap = run.trajectory.first_event(EventKind::PacketCapture).unwrap();
        assert!((cap.time - 0.375).abs() < 1e-4);
    }

    #[test]
    fn rk4_aborts_with_node_collision_diagnostic() {
        // Equal-weight same-spin overlap: the density vanishes on the
        // interference nodes and the velocity there is undefined. A
        // trajectory started on a node must abort with the diagnostic.
        let state = empty_wave_state(0.5, 0.5, 0.0, true);
        let z_node = std::f64::consts::PI / (2.0 * K);
        let err = rk4_adaptive(
            &state,
            &Configuration::single(z_node),
            0.5,
            &IntegratorControls::default(),
        )
        .unwrap_err();
        assert!(matches!(err, IntegrateError::NodeCollision { .. }), "{err}");
    }

    #[test]
    fn quantile_values() {
        assert_relative_eq!(quantile(PacketModel::Rect, 1.0, 0.7), 0.2, epsilon = 1e-15);
        assert_relative_eq!(
            quantile(PacketModel::Gauss, 1.0, 0.7),
            0.370_807_158_593_558,
            epsilon = 1e-12
        );
        assert_relative_eq!(quantile(PacketModel::Rect, 1.0, 0.5), 0.0, epsilon = 1e-15);
        assert_relative_eq!(quantile(PacketModel::Gauss, 1.0, 0.5), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn trajectory_interpolation_and_extend() {
        let mut a = Trajectory::new();
        a.push_sample(0.0, Configuration::single(0.0));
        a.push_sample(1.0, Configuration::single(2.0));
        let mut b = Trajectory::new();
        b.push_sample(1.0, Configuration::single(2.0));
        b.push_sample(2.0, Configuration::single(2.0));
        a.extend(b);
        assert_eq!(a.samples.len(), 3);
        assert_relative_eq!(a.position_at(0.5, 0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(a.position_at(1.5, 0), 2.0, epsilon = 1e-15);
    }
}
