//! End-to-end gedanken experiments.
//!
//! Every run follows the same clock convention: for the interferometer
//! experiments the spin-dependent kick splits the packet at `t = -2T`, the
//! mirror reverses the motion (and an optional which-path detector fires)
//! at `t = -T`, and the packets fully overlap at `t = 0`. The plain
//! Stern-Gerlach run starts at its own kick, `t = 0`.
//!
//! A run produces a [`RunResult`]: the trajectory with events, the beam or
//! detector the particle ends up in, any detector records, and whether the
//! record is "surrealistic" (asserting presence on an arm the Bohmian
//! trajectory never visited, or absence on the arm it did visit).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::detectors::{
    apply_detector, read_record, Arm, DetectorError, DetectorKind, DetectorRecord,
    DetectorSpec, RingParams, Verdict,
};
use crate::dynamics::DynamicsError;
use crate::integrate::{
    self, catch_time, integrate_piecewise, integrate_weighted_piecewise, rk4_adaptive,
    rk4_weighted, EventKind, ImplicitOverlap, IntegrateError, IntegratorControls, Method,
    PacketModel, Trajectory, TrajectoryEvent,
};
use crate::state::{
    Branch, Configuration, FactorKind, QuantumState, SpatialFactor, Spin, StateError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("amplitudes not normalized: |alpha|^2 + |beta|^2 = {0}")]
    NotNormalized(f64),
    #[error("detector record undetermined; cannot classify the run")]
    UndeterminedRecord,
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Sg,
    SgReversed,
    Epr,
    EmptyWave,
    Interferometer,
    Ghz,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Sg => "sg",
            Experiment::SgReversed => "sg_reversed",
            Experiment::Epr => "epr",
            Experiment::EmptyWave => "empty_wave",
            Experiment::Interferometer => "interferometer",
            Experiment::Ghz => "ghz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinMode {
    Spinful,
    Spinless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    DetectorA,
    DetectorB,
    UpBeam,
    DownBeam,
}

impl Destination {
    pub fn label(&self) -> &'static str {
        match self {
            Destination::DetectorA => "detectorA",
            Destination::DetectorB => "detectorB",
            Destination::UpBeam => "upBeam",
            Destination::DownBeam => "downBeam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrealVerdict {
    Surreal,
    NotSurreal,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureFirst {
    Particle1,
    Particle2,
}

/// Geometry of the simplified device, in natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Packet width.
    pub a: f64,
    /// Magnitude of the spin-dependent kick velocity.
    pub u: f64,
    /// Carrier wavenumber of the kicked packets.
    pub k: f64,
    /// Half the time from split to full overlap; packets separate to
    /// `2uT` before the mirror.
    pub big_t: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            a: 1.0,
            u: 1.0,
            k: 2.0 * std::f64::consts::PI / 0.3,
            big_t: 2.0,
        }
    }
}

impl Geometry {
    /// Mass scale fixed so the carrier rides at the kick velocity.
    pub fn hbar_over_m(&self) -> f64 {
        self.u / self.k
    }

    pub fn lambda(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPosition {
    Absolute(f64),
    Quantile(f64),
}

/// Scenario-level detector choice; the engine derives the full
/// [`DetectorSpec`] (interaction time, dof indices, ring frequency) from
/// it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub arm: Arm,
    /// Neutron shift b for kinds (i) and (iii); any b > a works.
    pub shift: f64,
    pub ring_radius: f64,
    /// Ring carrier wavelength (lambda-tilde).
    pub ring_wavelength: f64,
    /// Neutron-to-particle mass ratio; scales hbar/m of the neutron dof.
    pub neutron_mass_ratio: f64,
    /// Initial Bohmian coordinate of the neutron (position for kinds i and
    /// iii, ring angle for kind iv).
    pub neutron_start: f64,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind, arm: Arm) -> Self {
        DetectorConfig {
            kind,
            arm,
            shift: 10.0,
            ring_radius: 1.0,
            ring_wavelength: 0.1,
            neutron_mass_ratio: 1.0,
            neutron_start: match kind {
                DetectorKind::RingVelocity => std::f64::consts::PI,
                _ => 0.0,
            },
        }
    }

    pub fn k_tilde(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.ring_wavelength
    }

    /// Ring frequency from the mass scale: `omega R = (hbar/m_n) k_tilde`,
    /// so equal masses give `omega R = u k_tilde / k`.
    pub fn omega(&self, g: &Geometry) -> f64 {
        g.hbar_over_m() / self.neutron_mass_ratio * self.k_tilde() / self.ring_radius
    }

    fn has_neutron_dof(&self) -> bool {
        self.kind != DetectorKind::SpinFlip
    }
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub experiment: Experiment,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub z0: InitialPosition,
    pub packet: PacketModel,
    pub spin_mode: SpinMode,
    pub detector: Option<DetectorConfig>,
    pub geometry: Geometry,
    pub controls: IntegratorControls,
    /// Explicit integrator choice; `None` picks the exact analytic route
    /// where available and RK4 otherwise.
    pub method: Option<Method>,
    pub t_end: Option<f64>,
    pub rng_seed: u64,
    pub epr_z1: f64,
    pub epr_z2: f64,
    pub epr_first: MeasureFirst,
}

impl ScenarioSpec {
    pub fn new(experiment: Experiment) -> Self {
        ScenarioSpec {
            experiment,
            alpha: Complex64::new(0.4f64.sqrt(), 0.0),
            beta: Complex64::new(0.6f64.sqrt(), 0.0),
            z0: InitialPosition::Quantile(0.7),
            packet: PacketModel::Rect,
            spin_mode: SpinMode::Spinful,
            detector: None,
            geometry: Geometry::default(),
            controls: IntegratorControls::default(),
            method: None,
            t_end: None,
            rng_seed: 0,
            epr_z1: 0.2,
            epr_z2: 0.3,
            epr_first: MeasureFirst::Particle1,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let norm = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(ScenarioError::NotNormalized(norm));
        }
        if self.geometry.a <= 0.0 || self.geometry.u <= 0.0 || self.geometry.k <= 0.0 {
            return Err(ScenarioError::Invalid(
                "geometry parameters must be positive".into(),
            ));
        }
        if let Some(det) = &self.detector {
            if det.has_neutron_dof()
                && det.kind != DetectorKind::RingVelocity
                && det.shift <= self.geometry.a
            {
                return Err(ScenarioError::Invalid(format!(
                    "detector shift b = {} must exceed the packet width {}",
                    det.shift, self.geometry.a
                )));
            }
        }
        match self.experiment {
            Experiment::Interferometer if self.detector.is_none() => Err(ScenarioError::Invalid(
                "interferometer runs need a detector".into(),
            )),
            Experiment::EmptyWave if self.detector.is_some() => Err(ScenarioError::Invalid(
                "empty-wave runs carry no detector".into(),
            )),
            Experiment::Sg | Experiment::SgReversed if self.spin_mode == SpinMode::Spinless => {
                Err(ScenarioError::Invalid(
                    "spinless mode needs the interferometer mirror construction".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn resolve_z0(&self) -> f64 {
        match self.z0 {
            InitialPosition::Absolute(z) => z,
            InitialPosition::Quantile(f) => integrate::quantile(self.packet, self.geometry.a, f),
        }
    }
}

/// One segment of the piecewise-constant state history: `state` is valid
/// (parametrically in time) on `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct StateInterval {
    pub t_start: f64,
    pub t_end: f64,
    pub state: QuantumState,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: ScenarioSpec,
    pub trajectory: Trajectory,
    pub destination: Destination,
    pub records: Vec<DetectorRecord>,
    pub surreal: SurrealVerdict,
    /// Outcome label of a Stern-Gerlach run (+1 / -1), device dependent.
    pub sigma_z: Option<i32>,
    /// Outcomes of the two EPR measurements, by particle index.
    pub epr_outcomes: Option<(Spin, Spin)>,
    pub timeline: Vec<StateInterval>,
    pub final_state: QuantumState,
    pub dof_labels: Vec<String>,
    /// Weighted-velocity reference trajectory, when requested.
    pub approx_trajectory: Option<Trajectory>,
}

impl RunResult {
    /// The full detector spec used by the run, if any.
    pub fn detector_spec(&self) -> Option<DetectorSpec> {
        let det = self.spec.detector.as_ref()?;
        Some(build_detector_spec(det, &self.spec.geometry))
    }
}

fn build_detector_spec(det: &DetectorConfig, g: &Geometry) -> DetectorSpec {
    let t_int = -g.big_t;
    match det.kind {
        DetectorKind::BohmianPosition => {
            DetectorSpec::bohmian_position(det.arm, t_int, det.shift, 1)
        }
        DetectorKind::SpinFlip => DetectorSpec::spin_flip(det.arm, t_int, 1),
        DetectorKind::PhaseFlip => DetectorSpec::phase_flip(det.arm, t_int, det.shift, 1),
        DetectorKind::RingVelocity => DetectorSpec::ring_velocity(
            det.arm,
            t_int,
            RingParams {
                radius: det.ring_radius,
                k_tilde: det.k_tilde(),
                omega: det.omega(g),
            },
            1,
        ),
    }
}

fn particle_factor(
    packet: PacketModel,
    g: &Geometry,
    center0: f64,
    dir: f64,
) -> SpatialFactor {
    match packet {
        PacketModel::Rect => SpatialFactor::rect(center0, dir * g.u, dir * g.k, g.a),
        // Spreading counted from the packet's preparation at -2T.
        PacketModel::Gauss => {
            SpatialFactor::gauss(center0, dir * g.u, dir * g.k, g.a, -2.0 * g.big_t)
        }
    }
}

/// Reverse every branch's particle motion (the mirror: an opposite kick
/// twice as strong), keeping the packet centers continuous.
fn mirror_kick(state: &QuantumState, dof: usize) -> QuantumState {
    let mut out = state.clone();
    let t = state.time;
    for b in &mut out.branches {
        let f = &mut b.factors[dof];
        let c_now = f.center_at(t);
        f.group_velocity = -f.group_velocity;
        f.carrier = -f.carrier;
        f.center0 = c_now - f.group_velocity * t;
    }
    out
}

/// Spin-dependent momentum kick of a Stern-Gerlach device on one dof:
/// up-spin branches are kicked along `+dir`, down-spin along `-dir`.
fn sg_kick(state: &QuantumState, dof: usize, slot: usize, g: &Geometry, dir: f64) -> QuantumState {
    let mut out = state.clone();
    let t = state.time;
    for b in &mut out.branches {
        let sign = match b.spins[slot] {
            Spin::Up => dir,
            Spin::Down => -dir,
            Spin::NoSpin => 0.0,
        };
        let f = &mut b.factors[dof];
        let c_now = f.center_at(t);
        f.group_velocity += sign * g.u;
        f.carrier += sign * g.k;
        f.center0 = c_now - f.group_velocity * t;
    }
    out
}

/// Branch with the largest amplitude at the configuration; falls back to
/// the largest coefficient if everything vanishes.
fn dominant_branch<'s>(state: &'s QuantumState, config: &Configuration, t: f64) -> &'s Branch {
    state
        .branches
        .iter()
        .max_by(|a, b| {
            let wa = a.value_at(&config.0, t, &state.hbar_over_m).norm_sqr();
            let wb = b.value_at(&config.0, t, &state.hbar_over_m).norm_sqr();
            wa.partial_cmp(&wb).unwrap()
        })
        .expect("state has branches")
}

fn spin_to_sigma(spin: Spin) -> Option<i32> {
    match spin {
        Spin::Up => Some(1),
        Spin::Down => Some(-1),
        Spin::NoSpin => None,
    }
}

/// Dispatch a trajectory experiment. GHZ has no trajectory; call
/// [`ghz_check`] (or the `ghz` subcommand) instead.
pub fn run(spec: &ScenarioSpec) -> Result<RunResult, ScenarioError> {
    match spec.experiment {
        Experiment::Sg | Experiment::SgReversed => run_sg(spec, false),
        Experiment::EmptyWave => run_two_leg(spec, false),
        Experiment::Interferometer => run_two_leg(spec, false),
        Experiment::Epr => Ok(run_epr(spec, spec.epr_z1, spec.epr_z2, spec.epr_first)?.result),
        Experiment::Ghz => Err(ScenarioError::Invalid(
            "ghz is an algebraic check, not a trajectory run; use ghz_check()".into(),
        )),
    }
}

/// Like [`run`] but also integrates the weighted-velocity reference
/// trajectory from the same initial data.
pub fn run_with_approx(spec: &ScenarioSpec) -> Result<RunResult, ScenarioError> {
    match spec.experiment {
        Experiment::Sg | Experiment::SgReversed => run_sg(spec, true),
        Experiment::EmptyWave | Experiment::Interferometer => run_two_leg(spec, true),
        _ => run(spec),
    }
}

// ---------------------------------------------------------------------------
// Stern-Gerlach
// ---------------------------------------------------------------------------

fn run_sg(spec: &ScenarioSpec, with_approx: bool) -> Result<RunResult, ScenarioError> {
    spec.validate()?;
    let g = spec.geometry;
    let dir = if spec.experiment == Experiment::SgReversed {
        -1.0
    } else {
        1.0
    };
    let z0 = spec.resolve_z0();
    if spec.packet == PacketModel::Rect && z0.abs() > 0.5 * g.a {
        return Err(IntegrateError::OutsideSupport {
            z0,
            half_width: 0.5 * g.a,
        }
        .into());
    }
    let state = QuantumState::new(
        vec![
            Branch::new(
                spec.alpha,
                vec![particle_factor(spec.packet, &g, 0.0, dir)],
                vec![Spin::Up],
            ),
            Branch::new(
                spec.beta,
                vec![particle_factor(spec.packet, &g, 0.0, -dir)],
                vec![Spin::Down],
            ),
        ],
        0.0,
        vec![g.hbar_over_m()],
    );
    // Capture happens no later than the moment the packets separate, at
    // t = a/(2u); ride a while longer by default.
    let t_end = spec.t_end.unwrap_or(match spec.packet {
        PacketModel::Rect => 1.5 * g.a / g.u,
        PacketModel::Gauss => 2.0 * g.a / g.u,
    });
    let config0 = Configuration::single(z0);
    let method = spec.method.unwrap_or(match spec.packet {
        PacketModel::Rect => Method::PiecewiseAnalytic,
        PacketModel::Gauss => Method::Rk4Adaptive,
    });
    let (trajectory, final_state) = match (method, spec.packet) {
        (Method::PiecewiseAnalytic, PacketModel::Rect) => {
            let traj = integrate_piecewise(&state, &config0, t_end, spec.controls.sample_step)?;
            let end_state = state.at_time(t_end);
            let (pruned, _) =
                end_state.prune_collapsed(traj.final_config(), spec.controls.collapse_epsilon)?;
            (traj, pruned)
        }
        (Method::Rk4Adaptive, _) => {
            let run = rk4_adaptive(&state, &config0, t_end, &spec.controls)?;
            (run.trajectory, run.final_state)
        }
        _ => {
            return Err(ScenarioError::Invalid(format!(
                "method {method:?} unsupported for a {:?} Stern-Gerlach run",
                spec.packet
            )))
        }
    };
    let approx_trajectory = if with_approx {
        Some(match spec.packet {
            PacketModel::Rect => {
                integrate_weighted_piecewise(&state, &config0, t_end, spec.controls.sample_step)?
            }
            PacketModel::Gauss => {
                rk4_weighted(&state, &config0, t_end, &spec.controls)?.trajectory
            }
        })
    } else {
        None
    };
    let rider = dominant_branch(&state, trajectory.final_config(), t_end);
    let destination = if rider.factors[0].group_velocity > 0.0 {
        Destination::UpBeam
    } else {
        Destination::DownBeam
    };
    let sigma_z = spin_to_sigma(rider.spins[0]);
    Ok(RunResult {
        spec: spec.clone(),
        trajectory,
        destination,
        records: Vec::new(),
        surreal: SurrealVerdict::NotApplicable,
        sigma_z,
        epr_outcomes: None,
        timeline: vec![StateInterval {
            t_start: 0.0,
            t_end,
            state,
        }],
        final_state,
        dof_labels: vec!["z".into()],
        approx_trajectory,
    })
}

// ---------------------------------------------------------------------------
// two-leg interferometer engine (empty wave and which-path detectors)
// ---------------------------------------------------------------------------

struct LegOneOutcome {
    state1: QuantumState,
    trajectory: Trajectory,
    dof_labels: Vec<String>,
}

fn build_leg_one(spec: &ScenarioSpec, z0: f64) -> Result<(LegOneOutcome, Configuration), ScenarioError> {
    let g = spec.geometry;
    let t_split = -2.0 * g.big_t;
    let hom = g.hbar_over_m();

    let mut dof_labels = vec!["z".to_string()];
    let mut hom_vec = vec![hom];
    let mut neutron_factors: Vec<SpatialFactor> = Vec::new();
    let mut neutron_positions: Vec<f64> = Vec::new();
    let mut extra_spin: Option<Spin> = None;
    let mut phase_pair = false;

    if let Some(det) = &spec.detector {
        match det.kind {
            DetectorKind::BohmianPosition => {
                neutron_factors.push(SpatialFactor::rect_at_rest(0.0, g.a));
                neutron_positions.push(det.neutron_start);
                dof_labels.push("ztilde".into());
                hom_vec.push(hom / det.neutron_mass_ratio);
            }
            DetectorKind::PhaseFlip => {
                phase_pair = true;
                neutron_positions.push(det.neutron_start);
                dof_labels.push("ztilde".into());
                hom_vec.push(hom / det.neutron_mass_ratio);
            }
            DetectorKind::RingVelocity => {
                let ring = SpatialFactor::ring(
                    det.ring_radius,
                    -det.k_tilde(),
                    -det.omega(&g) * det.ring_radius,
                );
                neutron_factors.push(ring);
                neutron_positions.push(det.neutron_start);
                dof_labels.push("theta".into());
                hom_vec.push(hom / det.neutron_mass_ratio);
            }
            DetectorKind::SpinFlip => {
                extra_spin = Some(Spin::Up);
            }
        }
    }

    let mut branches = Vec::new();
    for (coef, spin, dir) in [
        (spec.alpha, Spin::Up, 1.0),
        (spec.beta, Spin::Down, -1.0),
    ] {
        let pf = particle_factor(spec.packet, &g, dir * 2.0 * g.u * g.big_t, dir);
        let mut spins = vec![spin];
        if let Some(s) = extra_spin {
            spins.push(s);
        }
        if phase_pair {
            // The phase-detector neutron starts in an equal superposition
            // of a near and a far packet; expand it into branches.
            let b = spec.detector.as_ref().unwrap().shift;
            let half = Complex64::new(0.5f64.sqrt(), 0.0);
            for center in [b, 0.0] {
                branches.push(Branch::new(
                    coef * half,
                    vec![pf, SpatialFactor::rect_at_rest(center, g.a)],
                    spins.clone(),
                ));
            }
        } else {
            let mut factors = vec![pf];
            factors.extend(neutron_factors.iter().copied());
            branches.push(Branch::new(coef, factors, spins));
        }
    }
    let state1 = QuantumState::new(branches, t_split, hom_vec);
    let mut positions = vec![z0];
    positions.extend(neutron_positions);
    let config0 = Configuration::new(positions);

    // Leg one is always orthogonal-spin (the mirror flip comes later), so
    // box packets integrate exactly; Gaussians go through RK4 with
    // pruning off (the mirror will re-overlap everything).
    let trajectory = match spec.packet {
        PacketModel::Rect => {
            integrate_piecewise(&state1, &config0, -g.big_t, spec.controls.sample_step)?
        }
        PacketModel::Gauss => {
            let controls = IntegratorControls {
                prune_enabled: false,
                ..spec.controls
            };
            rk4_adaptive(&state1, &config0, -g.big_t, &controls)?.trajectory
        }
    };
    let config_mt = trajectory.final_config().clone();
    Ok((
        LegOneOutcome {
            state1,
            trajectory,
            dof_labels,
        },
        config_mt,
    ))
}

fn resolve_leg_two_method(spec: &ScenarioSpec) -> Result<Method, ScenarioError> {
    if let Some(m) = spec.method {
        let ok = match m {
            Method::PiecewiseAnalytic => {
                spec.packet == PacketModel::Rect
                    && (spec.spin_mode == SpinMode::Spinful
                        || matches!(
                            spec.detector.map(|d| d.kind),
                            Some(DetectorKind::BohmianPosition) | Some(DetectorKind::SpinFlip)
                        ))
            }
            Method::ImplicitRoot => {
                spec.packet == PacketModel::Rect
                    && spec.spin_mode == SpinMode::Spinless
                    && !matches!(
                        spec.detector.map(|d| d.kind),
                        Some(DetectorKind::RingVelocity)
                    )
            }
            Method::Rk4Adaptive => true,
        };
        if !ok {
            return Err(ScenarioError::Invalid(format!(
                "method {m:?} is not valid for this scenario"
            )));
        }
        return Ok(m);
    }
    Ok(match (spec.packet, spec.spin_mode) {
        (PacketModel::Gauss, _) => Method::Rk4Adaptive,
        (PacketModel::Rect, SpinMode::Spinful) => Method::PiecewiseAnalytic,
        (PacketModel::Rect, SpinMode::Spinless) => match spec.detector.map(|d| d.kind) {
            None | Some(DetectorKind::PhaseFlip) => Method::ImplicitRoot,
            Some(DetectorKind::BohmianPosition) | Some(DetectorKind::SpinFlip) => {
                Method::PiecewiseAnalytic
            }
            Some(DetectorKind::RingVelocity) => Method::Rk4Adaptive,
        },
    })
}

fn run_two_leg(spec: &ScenarioSpec, with_approx: bool) -> Result<RunResult, ScenarioError> {
    spec.validate()?;
    let g = spec.geometry;
    let z0 = spec.resolve_z0();
    if spec.packet == PacketModel::Rect && z0.abs() > 0.5 * g.a {
        return Err(IntegrateError::OutsideSupport {
            z0,
            half_width: 0.5 * g.a,
        }
        .into());
    }
    let (leg1, config_mt) = build_leg_one(spec, z0)?;
    let t_mirror = -g.big_t;
    let t_end = spec.t_end.unwrap_or(2.0 * g.big_t);

    // Mirror time: detector first (arms identified by the diverging
    // velocities), then the reversing kick, then the spinless flip.
    let mut state2 = leg1.state1.at_time(t_mirror);
    let det_spec = spec
        .detector
        .as_ref()
        .map(|d| build_detector_spec(d, &g));
    let mut trajectory = leg1.trajectory.clone();
    if let Some(det) = &det_spec {
        state2 = apply_detector(&state2, det)?;
        trajectory.push_event(TrajectoryEvent {
            time: t_mirror,
            kind: EventKind::DetectorInteraction,
            config: config_mt.clone(),
            branch: None,
            note: format!(
                "{} detector, {} arm",
                spec.detector.unwrap().kind.label(),
                spec.detector.unwrap().arm.label()
            ),
        });
    }
    state2 = mirror_kick(&state2, 0);
    if spec.spin_mode == SpinMode::Spinless {
        // The mirror also flips the upper-arm spin so both packets carry
        // the same spin state from here on.
        for b in &mut state2.branches {
            if b.spins[0] == Spin::Up {
                b.spins[0] = Spin::Down;
            }
        }
    }

    let method = resolve_leg_two_method(spec)?;
    let (leg2, final_state) = match method {
        Method::PiecewiseAnalytic => {
            let traj = integrate_piecewise(&state2, &config_mt, t_end, spec.controls.sample_step)?;
            let end_state = state2.at_time(t_end);
            let (pruned, removed) =
                end_state.prune_collapsed(traj.final_config(), spec.controls.collapse_epsilon)?;
            let mut traj = traj;
            push_collapse_events(&mut traj, t_end, &removed, &pruned);
            (traj, pruned)
        }
        Method::ImplicitRoot => {
            let traj = integrate_implicit_leg(&state2, &config_mt, t_end, &g, spec)?;
            let end_state = state2.at_time(t_end);
            let (pruned, removed) =
                end_state.prune_collapsed(traj.final_config(), spec.controls.collapse_epsilon)?;
            let mut traj = traj;
            push_collapse_events(&mut traj, t_end, &removed, &pruned);
            (traj, pruned)
        }
        Method::Rk4Adaptive => {
            let run = rk4_adaptive(&state2, &config_mt, t_end, &spec.controls)?;
            (run.trajectory, run.final_state)
        }
    };
    trajectory.extend(leg2);

    let approx_trajectory = if with_approx {
        let mut approx = leg1.trajectory.clone();
        let leg2 = match spec.packet {
            PacketModel::Rect => integrate_weighted_piecewise(
                &state2,
                &config_mt,
                t_end,
                spec.controls.sample_step,
            )?,
            PacketModel::Gauss => rk4_weighted(&state2, &config_mt, t_end, &spec.controls)?
                .trajectory,
        };
        approx.extend(leg2);
        Some(approx)
    } else {
        None
    };

    let final_config = trajectory.final_config().clone();
    let records = match &det_spec {
        Some(det) => vec![read_record(&final_state, det, &final_config)?],
        None => Vec::new(),
    };
    let rider = dominant_branch(&final_state, &final_config, t_end);
    let destination = if rider.factors[0].group_velocity > 0.0 {
        Destination::DetectorB
    } else {
        Destination::DetectorA
    };
    let timeline = vec![
        StateInterval {
            t_start: -2.0 * g.big_t,
            t_end: t_mirror,
            state: leg1.state1,
        },
        StateInterval {
            t_start: t_mirror,
            t_end,
            state: state2,
        },
    ];
    let surreal = match &det_spec {
        Some(det) => classify_surreal(&trajectory, &records, det, &timeline)?,
        None => SurrealVerdict::NotApplicable,
    };
    Ok(RunResult {
        spec: spec.clone(),
        trajectory,
        destination,
        records,
        surreal,
        sigma_z: None,
        epr_outcomes: None,
        timeline,
        final_state,
        dof_labels: leg1.dof_labels,
        approx_trajectory,
    })
}

fn push_collapse_events(
    traj: &mut Trajectory,
    t: f64,
    removed: &[usize],
    pruned: &QuantumState,
) {
    let config = traj.final_config().clone();
    for tag in removed {
        traj.push_event(TrajectoryEvent {
            time: t,
            kind: EventKind::BranchCollapse,
            config: config.clone(),
            branch: Some(*tag),
            note: format!("branch {tag} pruned"),
        });
    }
    if !removed.is_empty() && pruned.branches.len() == 1 {
        let tag = pruned.branches[0].tag;
        traj.push_event(TrajectoryEvent {
            time: t,
            kind: EventKind::PacketCapture,
            config,
            branch: Some(tag),
            note: format!("captured by branch {tag}"),
        });
    }
}

/// Exact spinless leg: ride, the implicit overlap solution, ride again.
/// Valid when only dof 0 moves and its conditional wave is a pair of
/// counter-propagating box packets with equal spins.
fn integrate_implicit_leg(
    state2: &QuantumState,
    config0: &Configuration,
    t_end: f64,
    g: &Geometry,
    spec: &ScenarioSpec,
) -> Result<Trajectory, ScenarioError> {
    let t0 = state2.time;
    let sample_step = spec.controls.sample_step;
    let cond = state2.conditional(0, config0)?;
    let live: Vec<_> = cond
        .terms
        .iter()
        .filter(|term| term.weight.norm_sqr() > 0.0)
        .collect();
    if live.len() != 2 {
        return Err(ScenarioError::Invalid(format!(
            "implicit leg expects two live branches, found {}",
            live.len()
        )));
    }
    let down = live
        .iter()
        .find(|t| t.factor.group_velocity < 0.0)
        .ok_or_else(|| ScenarioError::Invalid("no down-moving branch".into()))?;
    let up = live
        .iter()
        .find(|t| t.factor.group_velocity > 0.0)
        .ok_or_else(|| ScenarioError::Invalid("no up-moving branch".into()))?;
    let norm = (down.weight.norm_sqr() + up.weight.norm_sqr()).sqrt();
    let alpha_eff = down.weight / norm;
    let beta_eff = up.weight / norm;

    let mut traj = Trajectory::new();
    let full_config = |z: f64| {
        let mut p = config0.0.clone();
        p[0] = z;
        Configuration(p)
    };
    let t = t0;
    let z = config0[0];
    traj.push_sample(t, full_config(z));

    // Which packet carries the particle now?
    let (rider, other) = if down.factor.contains(z, t0) {
        (down, up)
    } else {
        (up, down)
    };
    let v_r = rider.factor.group_velocity;

    // Ride until the other packet's support reaches the particle.
    let mut t_entry = f64::INFINITY;
    let c_other = other.factor.center_at(t0);
    let rel = v_r - other.factor.group_velocity;
    if rel.abs() > 1e-15 {
        for edge in [c_other - 0.5 * g.a, c_other + 0.5 * g.a] {
            let dt = (edge - z) / rel;
            if dt > 1e-12 {
                t_entry = t_entry.min(t0 + dt);
            }
        }
    }
    if t_entry >= t_end {
        let mut ts = t + sample_step;
        while ts < t_end {
            traj.push_sample(ts, full_config(z + v_r * (ts - t)));
            ts += sample_step;
        }
        traj.push_sample(t_end, full_config(z + v_r * (t_end - t)));
        return Ok(traj);
    }
    let z_entry = z + v_r * (t_entry - t);
    let mut ts = t + sample_step;
    while ts < t_entry {
        traj.push_sample(ts, full_config(z + v_r * (ts - t)));
        ts += sample_step;
    }
    traj.push_sample(t_entry, full_config(z_entry));
    traj.push_event(TrajectoryEvent {
        time: t_entry,
        kind: EventKind::OverlapEntry,
        config: full_config(z_entry),
        branch: None,
        note: "enters the two-packet overlap".into(),
    });

    // Overlap interval [lo(t), hi(t)]; both packets share the width a.
    let (gv_down, gv_up) = (down.factor.group_velocity, up.factor.group_velocity);
    let c_down = |t: f64| down.factor.center_at(t);
    let c_up = |t: f64| up.factor.center_at(t);
    let hi = |t: f64| (c_down(t) + 0.5 * g.a).min(c_up(t) + 0.5 * g.a);
    let lo = |t: f64| (c_down(t) - 0.5 * g.a).max(c_up(t) - 0.5 * g.a);
    let phi = crate::dynamics::relative_phase(alpha_eff, beta_eff);
    let ab = alpha_eff.norm() * beta_eff.norm();
    let drift = (beta_eff.norm_sqr() - alpha_eff.norm_sqr()) * g.u;
    let v_interior =
        |z: f64| drift / (1.0 + 2.0 * ab * (2.0 * g.k * z + phi).cos());

    // The exact motion inside the overlap alternates between implicit
    // segments and short sliding segments on a support edge: the interior
    // velocity bursts near the density minima and can outrun a receding
    // edge, and the one-sided flow just outside pushes the particle back
    // (a Filippov sliding mode, an artifact of the sharp-edged model).
    let mut t_cur = t_entry;
    let mut z_cur = z_entry;
    let mut exit: Option<(f64, f64, bool)> = None; // (t, z, through_top)
    let scan = 1e-3 * g.a / g.u;
    'segments: for _ in 0..100_000 {
        let imp = ImplicitOverlap::from_entry(alpha_eff, beta_eff, g.u, g.k, t_cur, z_cur);
        let margin = |t: f64| -> Result<f64, ScenarioError> {
            let z = imp.solve(t)?;
            Ok((z - lo(t)).min(hi(t) - z))
        };
        // First boundary contact of this implicit segment.
        let mut prev = t_cur + 1e-9;
        let mut contact: Option<f64> = None;
        let mut tt = t_cur + scan;
        loop {
            let t_probe = tt.min(t_end);
            if margin(t_probe)? <= 0.0 {
                let (mut lo_t, mut hi_t) = (prev, t_probe);
                for _ in 0..80 {
                    let m = 0.5 * (lo_t + hi_t);
                    if margin(m)? <= 0.0 {
                        hi_t = m;
                    } else {
                        lo_t = m;
                    }
                }
                contact = Some(hi_t);
                break;
            }
            if t_probe >= t_end {
                break;
            }
            prev = t_probe;
            tt += scan;
        }
        // Sample the implicit stretch (up to the contact or the end).
        let t_stop = contact.unwrap_or(t_end);
        let mut ts = (t_cur / sample_step).floor() * sample_step + sample_step;
        while ts < t_stop {
            if ts > t_cur {
                traj.push_sample(ts, full_config(imp.solve(ts)?));
            }
            ts += sample_step;
        }
        let t_c = match contact {
            None => {
                traj.push_sample(t_end, full_config(imp.solve(t_end)?));
                return Ok(traj);
            }
            Some(t) => t,
        };
        let z_c = imp.solve(t_c)?;
        traj.push_sample(t_c, full_config(z_c));

        // Identify the touched edge and the flow just outside it.
        let through_top = (hi(t_c) - z_c).abs() <= (z_c - lo(t_c)).abs();
        let (v_edge, v_out) = if through_top {
            // the packet with the lower top edge forms hi; the region
            // above holds only the other packet
            if c_down(t_c) < c_up(t_c) {
                (gv_down, gv_up)
            } else {
                (gv_up, gv_down)
            }
        } else if c_down(t_c) < c_up(t_c) {
            (gv_up, gv_down)
        } else {
            (gv_down, gv_up)
        };
        let escapes = if through_top {
            v_out >= v_edge
        } else {
            v_out <= v_edge
        };
        if escapes {
            exit = Some((t_c, z_c, through_top));
            break 'segments;
        }

        // Slide along the edge until the interior flow lets go.
        let edge = |t: f64| if through_top { hi(t) } else { lo(t) };
        let holds = |t: f64| {
            let v_in = v_interior(edge(t));
            if through_top {
                v_in >= v_edge
            } else {
                v_in <= v_edge
            }
        };
        let mut t_d = t_c;
        loop {
            let t_probe = (t_d + scan).min(t_end);
            // the overlap may close while sliding
            if lo(t_probe) >= hi(t_probe) || t_probe >= t_end {
                t_d = t_probe;
                break;
            }
            if !holds(t_probe) {
                let (mut a_t, mut b_t) = (t_d, t_probe);
                for _ in 0..80 {
                    let m = 0.5 * (a_t + b_t);
                    if holds(m) {
                        a_t = m;
                    } else {
                        b_t = m;
                    }
                }
                t_d = b_t;
                break;
            }
            t_d = t_probe;
        }
        let mut ts = (t_c / sample_step).floor() * sample_step + sample_step;
        while ts < t_d {
            if ts > t_c {
                traj.push_sample(ts, full_config(edge(ts)));
            }
            ts += sample_step;
        }
        if t_d >= t_end {
            traj.push_sample(t_end, full_config(edge(t_end)));
            return Ok(traj);
        }
        if lo(t_d) >= hi(t_d) {
            // squeezed out at the closing point; the up-moving packet
            // keeps the particle (the deterministic tie rule)
            exit = Some((t_d, edge(t_d), true));
            break 'segments;
        }
        t_cur = t_d;
        z_cur = edge(t_d);
        traj.push_sample(t_cur, full_config(z_cur));
    }

    let (t_exit, z_exit, through_top) = exit.ok_or_else(|| {
        ScenarioError::Invalid("implicit leg failed to terminate".into())
    })?;
    // The survivor is the packet on the far side of the crossed edge.
    let survivor = if through_top {
        if c_down(t_exit) < c_up(t_exit) {
            up
        } else {
            down
        }
    } else if c_down(t_exit) < c_up(t_exit) {
        down
    } else {
        up
    };
    traj.push_event(TrajectoryEvent {
        time: t_exit,
        kind: EventKind::OverlapExit,
        config: full_config(z_exit),
        branch: None,
        note: "leaves the two-packet overlap".into(),
    });
    traj.push_event(TrajectoryEvent {
        time: t_exit,
        kind: EventKind::PacketCapture,
        config: full_config(z_exit),
        branch: Some(survivor.tag),
        note: format!("captured by branch {}", survivor.tag),
    });
    let v_s = survivor.factor.group_velocity;
    let mut ts = t_exit + sample_step;
    while ts < t_end {
        traj.push_sample(ts, full_config(z_exit + v_s * (ts - t_exit)));
        ts += sample_step;
    }
    traj.push_sample(t_end, full_config(z_exit + v_s * (t_end - t_exit)));
    Ok(traj)
}

/// True iff the record asserts the particle on an arm the trajectory never
/// entered, or absence on the arm it did enter. The arm region is the arm
/// packet's support at the interaction time.
pub fn classify_surreal(
    trajectory: &Trajectory,
    records: &[DetectorRecord],
    det: &DetectorSpec,
    timeline: &[StateInterval],
) -> Result<SurrealVerdict, ScenarioError> {
    if records.is_empty() {
        return Ok(SurrealVerdict::NotApplicable);
    }
    if records
        .iter()
        .any(|r| r.verdict == Verdict::Undetermined)
    {
        return Err(ScenarioError::UndeterminedRecord);
    }
    let t_int = det.interaction_time;
    // The leg that ends at the interaction defines the arm geometry.
    let interval = timeline
        .iter()
        .find(|iv| t_int > iv.t_start && t_int <= iv.t_end)
        .or_else(|| timeline.first())
        .ok_or_else(|| ScenarioError::Invalid("empty timeline".into()))?;
    let z = trajectory.position_at(t_int, det.particle_dof);
    let arm_dir = match det.arm {
        Arm::Upper => 1.0,
        Arm::Lower => -1.0,
    };
    let arm_branch = interval
        .state
        .branches
        .iter()
        .find(|b| b.factors[det.particle_dof].group_velocity * arm_dir > 0.0)
        .ok_or_else(|| ScenarioError::Invalid("no branch on the detector arm".into()))?;
    let f = &arm_branch.factors[det.particle_dof];
    let entered = match f.kind {
        FactorKind::Rect => (z - f.center_at(t_int)).abs() <= 0.5 * f.width,
        // Gaussian packets carry no sharp support; the nearest packet
        // center decides which arm was traversed.
        _ => {
            let c_arm = f.center_at(t_int);
            (z - c_arm).abs() < (z + c_arm).abs()
        }
    };
    let surreal = records.iter().any(|r| match r.verdict {
        Verdict::ParticlePresent => !entered,
        Verdict::ParticleAbsent => entered,
        Verdict::Undetermined => false,
    });
    Ok(if surreal {
        SurrealVerdict::Surreal
    } else {
        SurrealVerdict::NotSurreal
    })
}

// ---------------------------------------------------------------------------
// EPR
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EprRun {
    /// Outcome of the measurement on particle 1 and on particle 2 (by
    /// particle index, not by measurement order).
    pub outcome1: Spin,
    pub outcome2: Spin,
    pub result: RunResult,
}

/// Sequential Stern-Gerlach measurements on a singlet pair. The devices
/// fire in the given order; the conditional collapse of the first
/// measurement fixes the second outcome, so the outcomes are always
/// anticorrelated and the first-measured particle follows the sign of its
/// own position.
pub fn run_epr(
    spec: &ScenarioSpec,
    z1: f64,
    z2: f64,
    first: MeasureFirst,
) -> Result<EprRun, ScenarioError> {
    let g = spec.geometry;
    for z in [z1, z2] {
        if z.abs() > 0.5 * g.a {
            return Err(IntegrateError::OutsideSupport {
                z0: z,
                half_width: 0.5 * g.a,
            }
            .into());
        }
    }
    let half = Complex64::new(0.5f64.sqrt(), 0.0);
    let rest = |z: f64| {
        let _ = z;
        SpatialFactor::rect_at_rest(0.0, g.a)
    };
    let state0 = QuantumState::new(
        vec![
            Branch::new(half, vec![rest(z1), rest(z2)], vec![Spin::Up, Spin::Down]),
            Branch::new(-half, vec![rest(z1), rest(z2)], vec![Spin::Down, Spin::Up]),
        ],
        0.0,
        vec![g.hbar_over_m(), g.hbar_over_m()],
    );
    let (p, q) = match first {
        MeasureFirst::Particle1 => (0usize, 1usize),
        MeasureFirst::Particle2 => (1, 0),
    };
    let config0 = Configuration::new(vec![z1, z2]);

    // Device on the first particle; capture is over by a/u.
    let state_a = sg_kick(&state0, p, p, &g, 1.0);
    let t_second = 1.1 * g.a / g.u;
    let traj_a =
        integrate_piecewise(&state_a, &config0, t_second, spec.controls.sample_step)?;
    let config_b = traj_a.final_config().clone();

    // Device on the second particle.
    let state_b = sg_kick(&state_a.at_time(t_second), q, q, &g, 1.0);
    let t_end = spec.t_end.unwrap_or(t_second + 1.1 * g.a / g.u);
    let traj_b = integrate_piecewise(&state_b, &config_b, t_end, spec.controls.sample_step)?;

    let mut trajectory = traj_a;
    trajectory.extend(traj_b);
    let final_config = trajectory.final_config().clone();
    let end_state = state_b.at_time(t_end);
    let (final_state, removed) =
        end_state.prune_collapsed(&final_config, spec.controls.collapse_epsilon)?;
    push_collapse_events(&mut trajectory, t_end, &removed, &final_state);

    let winner = dominant_branch(&final_state, &final_config, t_end);
    let (outcome1, outcome2) = (winner.spins[0], winner.spins[1]);
    let destination = if outcome1 == Spin::Up {
        Destination::UpBeam
    } else {
        Destination::DownBeam
    };
    let result = RunResult {
        spec: spec.clone(),
        trajectory,
        destination,
        records: Vec::new(),
        surreal: SurrealVerdict::NotApplicable,
        sigma_z: spin_to_sigma(outcome1),
        epr_outcomes: Some((outcome1, outcome2)),
        timeline: vec![
            StateInterval {
                t_start: 0.0,
                t_end: t_second,
                state: state_a,
            },
            StateInterval {
                t_start: t_second,
                t_end,
                state: state_b,
            },
        ],
        final_state,
        dof_labels: vec!["z1".into(), "z2".into()],
        approx_trajectory: None,
    };
    Ok(EprRun {
        outcome1,
        outcome2,
        result,
    })
}

// ---------------------------------------------------------------------------
// GHZ exhaustive check
// ---------------------------------------------------------------------------

/// One assignment of the six +-1 outcomes, in the order
/// (s1x, s2x, s3x, s1y, s2y, s3y), with the indices of the product
/// equations it violates.
#[derive(Debug, Clone)]
pub struct GhzAssignment {
    pub sigma: [i8; 6],
    pub violated: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GhzTable {
    pub rhs: [i8; 4],
    pub assignments: Vec<GhzAssignment>,
    pub satisfying: usize,
    /// Product of the four left-hand sides; every outcome appears squared,
    /// so it is +1 for all 64 assignments.
    pub lhs_product: i8,
    pub rhs_product: i8,
}

/// Exhaustive check of the four GHZ product equations with the canonical
/// right-hand sides (-1, +1, +1, +1): no assignment satisfies all four.
pub fn ghz_check() -> GhzTable {
    ghz_check_with_rhs([-1, 1, 1, 1])
}

pub fn ghz_check_with_rhs(rhs: [i8; 4]) -> GhzTable {
    let mut assignments = Vec::with_capacity(64);
    let mut satisfying = 0;
    let mut lhs_product: i8 = 1;
    for bits in 0..64u32 {
        let s: [i8; 6] = std::array::from_fn(|i| if bits & (1 << i) == 0 { 1 } else { -1 });
        // indices: 0 = s1x, 1 = s2x, 2 = s3x, 3 = s1y, 4 = s2y, 5 = s3y
        let eqs = [
            s[0] * s[1] * s[2],
            s[0] * s[4] * s[5],
            s[3] * s[1] * s[5],
            s[3] * s[4] * s[2],
        ];
        lhs_product = eqs.iter().product();
        let violated: Vec<usize> = (0..4).filter(|&i| eqs[i] != rhs[i]).collect();
        if violated.is_empty() {
            satisfying += 1;
        }
        assignments.push(GhzAssignment {
            sigma: s,
            violated,
        });
    }
    GhzTable {
        rhs,
        assignments,
        satisfying,
        lhs_product,
        rhs_product: rhs.iter().product(),
    }
}

// ---------------------------------------------------------------------------
// ensembles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EnsembleRow {
    pub index: usize,
    pub z0: f64,
    pub final_z: f64,
    pub destination: Destination,
    pub sigma_z: Option<i32>,
    pub capture_time: Option<f64>,
}

/// Initial-position standard deviation of the Gaussian packet density at
/// the scenario's start time.
fn gauss_sigma_at_start(spec: &ScenarioSpec) -> f64 {
    let g = spec.geometry;
    let t0 = match spec.experiment {
        Experiment::EmptyWave | Experiment::Interferometer => -2.0 * g.big_t,
        _ => 0.0,
    };
    let w = Complex64::new(
        g.a * g.a,
        (t0 + 2.0 * g.big_t) * g.hbar_over_m(),
    );
    w.norm() / (g.a * 2.0f64.sqrt())
}

/// Draw initial Bohmian positions from the packet density at the start of
/// the experiment (uniform over the box, normal for the Gaussian model).
pub fn sample_initial_positions(spec: &ScenarioSpec, n: usize, seed: u64) -> Vec<f64> {
    let g = spec.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.packet {
        PacketModel::Rect => (0..n)
            .map(|_| rng.gen_range(-0.5 * g.a..0.5 * g.a))
            .collect(),
        PacketModel::Gauss => {
            let sigma = gauss_sigma_at_start(spec);
            let normal = rand_distr::Normal::new(0.0, sigma).expect("valid sigma");
            (0..n).map(|_| rng.sample(normal)).collect()
        }
    }
}

/// Run an ensemble of independent trajectories with seeded initial
/// positions; execution is parallel and the result order deterministic.
pub fn run_ensemble(
    spec: &ScenarioSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<EnsembleRow>, ScenarioError> {
    let z0s = sample_initial_positions(spec, n, seed);
    let rows: Result<Vec<EnsembleRow>, ScenarioError> = z0s
        .par_iter()
        .enumerate()
        .map(|(index, &z0)| {
            let mut s = spec.clone();
            s.z0 = InitialPosition::Absolute(z0);
            s.rng_seed = seed;
            let r = run(&s)?;
            Ok(EnsembleRow {
                index,
                z0,
                final_z: r.trajectory.final_config()[0],
                destination: r.destination,
                sigma_z: r.sigma_z,
                capture_time: r
                    .trajectory
                    .first_event(EventKind::PacketCapture)
                    .map(|e| e.time),
            })
        })
        .collect();
    rows
}

/// Position-density CDF of the Gaussian split state at time `t`: a
/// mixture of two normal packets at `+-ut` with common width from the
/// complex spreading parameter and weights `|alpha|^2`, `|beta|^2`.
pub fn sg_gauss_cdf(spec: &ScenarioSpec, t: f64) -> impl Fn(f64) -> f64 {
    let g = spec.geometry;
    let w = Complex64::new(g.a * g.a, (t + 2.0 * g.big_t) * g.hbar_over_m());
    let sigma = w.norm() / (g.a * 2.0f64.sqrt());
    let (wa, wb) = (spec.alpha.norm_sqr(), spec.beta.norm_sqr());
    let (ca, cb) = (g.u * t, -g.u * t);
    move |z: f64| {
        let phi = |c: f64| {
            0.5 * (1.0 + statrs::function::erf::erf((z - c) / (sigma * 2.0f64.sqrt())))
        };
        wa * phi(ca) + wb * phi(cb)
    }
}

/// Fraction of a uniform z0 grid over the box support that ends in the up
/// beam; combinatorially exact through the catch-time equations.
pub fn born_fraction_up(alpha: Complex64, beta: Complex64, grid: usize) -> f64 {
    let mut up = 0usize;
    for i in 0..grid {
        let z0 = -0.5 + (i as f64 + 0.5) / grid as f64;
        if catch_time(alpha, beta, z0, 1.0, 1.0).map(|(_, who)| who)
            == Ok(integrate::CapturedBy::UpPacket)
        {
            up += 1;
        }
    }
    up as f64 / grid as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors;
    use approx::assert_relative_eq;

    fn fig1_spec() -> ScenarioSpec {
        let mut s = ScenarioSpec::new(Experiment::Sg);
        s.z0 = InitialPosition::Absolute(0.2);
        s
    }

    #[test]
    fn sg_worked_example() {
        let r = run(&fig1_spec()).unwrap();
        assert_eq!(r.destination, Destination::UpBeam);
        assert_eq!(r.sigma_z, Some(1));
        let cap = r.trajectory.first_event(EventKind::PacketCapture).unwrap();
        assert_relative_eq!(cap.time, 0.375, epsilon = 1e-13);
        assert_relative_eq!(cap.config[0], 0.125, epsilon = 1e-13);
        // rides a/4 below the up-packet center afterwards
        let t_end = r.trajectory.end_time();
        assert_relative_eq!(
            r.trajectory.position_at(t_end, 0) - t_end,
            -0.25,
            epsilon = 1e-13
        );
    }

    #[test]
    fn sg_pure_spin_state_always_up() {
        for z0 in [-0.45, -0.2, 0.0, 0.3, 0.45] {
            let mut s = ScenarioSpec::new(Experiment::Sg);
            s.alpha = Complex64::new(1.0, 0.0);
            s.beta = Complex64::new(0.0, 0.0);
            s.z0 = InitialPosition::Absolute(z0);
            let r = run(&s).unwrap();
            assert_eq!(r.destination, Destination::UpBeam);
            assert_eq!(r.sigma_z, Some(1));
        }
    }

    #[test]
    fn contextuality_reversed_device_same_trajectory_opposite_label() {
        let half = Complex64::new(0.5f64.sqrt(), 0.0);
        let mk = |exp| {
            let mut s = ScenarioSpec::new(exp);
            s.alpha = half;
            s.beta = half;
            s.z0 = InitialPosition::Absolute(0.25);
            s
        };
        let std = run(&mk(Experiment::Sg)).unwrap();
        let rev = run(&mk(Experiment::SgReversed)).unwrap();
        assert_eq!(std.trajectory.samples.len(), rev.trajectory.samples.len());
        for ((t1, c1), (t2, c2)) in std
            .trajectory
            .samples
            .iter()
            .zip(&rev.trajectory.samples)
        {
            assert_eq!(t1, t2);
            assert_eq!(c1[0], c2[0], "trajectories must be identical pointwise");
        }
        assert_eq!(std.destination, Destination::UpBeam);
        assert_eq!(rev.destination, Destination::UpBeam);
        assert_eq!(std.sigma_z, Some(1));
        assert_eq!(rev.sigma_z, Some(-1));
    }

    #[test]
    fn empty_wave_packet_exchange() {
        let mut s = ScenarioSpec::new(Experiment::EmptyWave);
        s.z0 = InitialPosition::Absolute(0.2);
        let r = run(&s).unwrap();
        let entry = r.trajectory.first_event(EventKind::OverlapEntry).unwrap();
        assert_relative_eq!(entry.time, -0.375, epsilon = 1e-12);
        assert_relative_eq!(entry.config[0], 0.125, epsilon = 1e-12);
        // the first overlap exit after the re-approach entry (an earlier
        // one ends the initial split)
        let exit = r
            .trajectory
            .events_of(EventKind::OverlapExit)
            .find(|e| e.time > entry.time)
            .unwrap();
        assert_relative_eq!(exit.time, 0.25, epsilon = 1e-12);
        assert_relative_eq!(exit.config[0], 0.25, epsilon = 1e-12);
        assert_eq!(r.destination, Destination::DetectorB);
    }

    #[test]
    fn empty_wave_symmetric_weights_go_straight() {
        let half = Complex64::new(0.5f64.sqrt(), 0.0);
        let mut s = ScenarioSpec::new(Experiment::EmptyWave);
        s.alpha = half;
        s.beta = half;
        s.z0 = InitialPosition::Quantile(0.5);
        let r = run(&s).unwrap();
        // Symmetric weights: the overlap velocity vanishes, so the
        // trajectory is a straight horizontal line through the re-approach
        // overlap (z = 0 from entry to exit).
        let entry = r
            .trajectory
            .events_of(EventKind::OverlapEntry)
            .next()
            .unwrap()
            .time;
        let exit = r
            .trajectory
            .events_of(EventKind::OverlapExit)
            .find(|e| e.time > entry)
            .map(|e| e.time)
            .unwrap_or(r.trajectory.end_time());
        for (t, c) in &r.trajectory.samples {
            if *t >= entry && *t <= exit {
                assert!(c[0].abs() < 1e-12, "t = {t}, z = {}", c[0]);
            }
        }
    }

    #[test]
    fn empty_wave_gaussian_center_stays_put() {
        let half = Complex64::new(0.5f64.sqrt(), 0.0);
        let mut s = ScenarioSpec::new(Experiment::EmptyWave);
        s.alpha = half;
        s.beta = half;
        s.packet = PacketModel::Gauss;
        s.spin_mode = SpinMode::Spinless;
        s.z0 = InitialPosition::Absolute(0.0);
        let r = run(&s).unwrap();
        for (_, c) in &r.trajectory.samples {
            assert!(c[0].abs() < 1e-8);
        }
    }

    #[test]
    fn epr_order_dependence_and_anticorrelation() {
        let spec = ScenarioSpec::new(Experiment::Epr);
        let r1 = run_epr(&spec, 0.2, 0.3, MeasureFirst::Particle1).unwrap();
        assert_eq!((r1.outcome1, r1.outcome2), (Spin::Up, Spin::Down));
        let r2 = run_epr(&spec, 0.2, 0.3, MeasureFirst::Particle2).unwrap();
        assert_eq!((r2.outcome1, r2.outcome2), (Spin::Down, Spin::Up));
        // z1 > 0, z2 < 0, particle 1 first: the collapse drives 2 down
        let r3 = run_epr(&spec, 0.2, -0.3, MeasureFirst::Particle1).unwrap();
        assert_eq!((r3.outcome1, r3.outcome2), (Spin::Up, Spin::Down));
    }

    #[test]
    fn ghz_has_no_solution() {
        let table = ghz_check();
        assert_eq!(table.satisfying, 0);
        assert_eq!(table.assignments.len(), 64);
        assert_eq!(table.lhs_product, 1);
        assert_eq!(table.rhs_product, -1);
    }

    #[test]
    fn ghz_relaxed_first_equation() {
        // Flipping the first right-hand side to +1 makes the system
        // consistent; three independent parity constraints remain, so
        // 2^(6-3) = 8 of the 64 assignments satisfy all four equations.
        let table = ghz_check_with_rhs([1, 1, 1, 1]);
        assert_eq!(table.satisfying, 8);
        assert_eq!(table.rhs_product, 1);
    }

    #[test]
    fn interferometer_position_detector_not_surreal() {
        let mut s = ScenarioSpec::new(Experiment::Interferometer);
        s.z0 = InitialPosition::Absolute(0.2);
        s.detector = Some(DetectorConfig::new(
            DetectorKind::BohmianPosition,
            Arm::Lower,
        ));
        let r = run(&s).unwrap();
        assert_eq!(r.destination, Destination::DetectorA);
        assert_eq!(r.records[0].verdict, Verdict::ParticleAbsent);
        assert_eq!(r.surreal, SurrealVerdict::NotSurreal);
    }

    #[test]
    fn interferometer_spin_detector_is_surreal() {
        let mut s = ScenarioSpec::new(Experiment::Interferometer);
        s.z0 = InitialPosition::Absolute(0.2);
        s.detector = Some(DetectorConfig::new(DetectorKind::SpinFlip, Arm::Lower));
        let r = run(&s).unwrap();
        assert_eq!(r.destination, Destination::DetectorB);
        assert_eq!(r.records[0].verdict, Verdict::ParticlePresent);
        assert_eq!(r.surreal, SurrealVerdict::Surreal);
        // identical particle motion to the no-detector run
        let mut bare = ScenarioSpec::new(Experiment::EmptyWave);
        bare.z0 = InitialPosition::Absolute(0.2);
        let b = run(&bare).unwrap();
        for i in 0..=80 {
            let t = -4.0 + i as f64 * 0.1;
            assert_relative_eq!(
                r.trajectory.position_at(t, 0),
                b.trajectory.position_at(t, 0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn interferometer_phase_detector_is_surreal() {
        let mut s = ScenarioSpec::new(Experiment::Interferometer);
        s.z0 = InitialPosition::Absolute(0.2);
        s.detector = Some(DetectorConfig::new(DetectorKind::PhaseFlip, Arm::Lower));
        let r = run(&s).unwrap();
        assert_eq!(r.destination, Destination::DetectorB);
        assert_eq!(r.records[0].verdict, Verdict::ParticlePresent);
        assert_eq!(r.surreal, SurrealVerdict::Surreal);
    }

    #[test]
    fn interferometer_ring_detector_is_surreal_and_erased_on_upper_arm() {
        let mut s = ScenarioSpec::new(Experiment::Interferometer);
        s.z0 = InitialPosition::Absolute(0.2);
        s.detector = Some(DetectorConfig::new(DetectorKind::RingVelocity, Arm::Lower));
        let r = run(&s).unwrap();
        assert_eq!(r.destination, Destination::DetectorB);
        assert_eq!(r.records[0].verdict, Verdict::ParticlePresent);
        assert_eq!(r.surreal, SurrealVerdict::Surreal);

        // Upper-arm detector: the record written at -T is erased when the
        // particle ends at B; the final rotation sense equals the initial
        // (clockwise, negative).
        let mut s_up = s.clone();
        s_up.detector = Some(DetectorConfig::new(DetectorKind::RingVelocity, Arm::Upper));
        let r_up = run(&s_up).unwrap();
        assert_eq!(r_up.destination, Destination::DetectorB);
        assert_eq!(r_up.records[0].verdict, Verdict::ParticleAbsent);
        let det = r_up.detector_spec().unwrap();
        let sense = detectors::ring_rotation_sense(
            &r_up.final_state,
            &det,
            r_up.trajectory.final_config(),
        )
        .unwrap();
        assert!(sense < 0.0, "rotation sense restored to clockwise");
        assert_eq!(r_up.surreal, SurrealVerdict::Surreal);
    }

    #[test]
    fn spinless_rect_phase_detector_goes_to_b() {
        let mut s = ScenarioSpec::new(Experiment::Interferometer);
        s.spin_mode = SpinMode::Spinless;
        s.z0 = InitialPosition::Quantile(0.7);
        s.detector = Some(DetectorConfig::new(DetectorKind::PhaseFlip, Arm::Lower));
        let r = run(&s).unwrap();
        assert_eq!(r.destination, Destination::DetectorB);
        assert_eq!(r.records[0].verdict, Verdict::ParticlePresent);
        assert_eq!(r.surreal, SurrealVerdict::Surreal);
    }

    #[test]
    fn born_fraction_is_exact_on_the_grid() {
        let alpha = Complex64::new(0.4f64.sqrt(), 0.0);
        let beta = Complex64::new(0.6f64.sqrt(), 0.0);
        let f = born_fraction_up(alpha, beta, 10_000);
        assert!((f - 0.4).abs() < 1e-12);
    }

    #[test]
    fn classify_requires_determined_records() {
        let mut s = ScenarioSpec::new(Experiment::Interferometer);
        s.z0 = InitialPosition::Absolute(0.2);
        s.detector = Some(DetectorConfig::new(DetectorKind::SpinFlip, Arm::Lower));
        let r = run(&s).unwrap();
        let det = r.detector_spec().unwrap();
        let undetermined = vec![DetectorRecord {
            verdict: Verdict::Undetermined,
            channel: r.records[0].channel,
        }];
        let err = classify_surreal(&r.trajectory, &undetermined, &det, &r.timeline);
        assert!(matches!(err, Err(ScenarioError::UndeterminedRecord)));
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = ScenarioSpec::new(Experiment::Sg);
        s.alpha = Complex64::new(0.8, 0.0);
        assert!(matches!(
            run(&s),
            Err(ScenarioError::NotNormalized(_))
        ));
        let s2 = ScenarioSpec::new(Experiment::Interferometer);
        assert!(matches!(run(&s2), Err(ScenarioError::Invalid(_))));
        let mut s3 = ScenarioSpec::new(Experiment::EmptyWave);
        s3.detector = Some(DetectorConfig::new(DetectorKind::SpinFlip, Arm::Lower));
        assert!(matches!(run(&s3), Err(ScenarioError::Invalid(_))));
    }
}
