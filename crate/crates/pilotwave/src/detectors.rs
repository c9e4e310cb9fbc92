//! The four position-detector models.
//!
//! Each detector couples a "neutron" ancilla to the particle on one
//! interferometer arm by an impulsive transformation of the wave function
//! at the interaction time:
//!
//! * kind (i), Bohmian position: the neutron packet is shifted by a
//!   distance `b` larger than its width, so the record sits in the
//!   neutron's Bohmian position itself.
//! * kind (ii), spin: the neutron spin flips; its spatial state is frozen.
//! * kind (iii), phase: the neutron lives in a superposition of a near and
//!   a far packet and picks up a relative sign.
//! * kind (iv), Bohmian velocity: the neutron is a uniform rotating wave
//!   on a ring and reverses its rotation sense.
//!
//! For kinds (ii)-(iv) the record stays undetermined until the particle's
//! conditional wave collapses onto one branch; reading it earlier returns
//! [`Verdict::Undetermined`].

use thiserror::Error;

use crate::dynamics::{self, DynamicsError};
use crate::state::{Configuration, FactorKind, QuantumState, Spin, StateError};

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("detector fired at t = {state_time} but is scheduled for t = {expected}")]
    WrongTime { state_time: f64, expected: f64 },
    #[error("temporal-order violation: the packets have not separated into arms at t = {time}")]
    TemporalOrder { time: f64 },
    #[error("detector of kind {kind:?} carries no {missing}")]
    Misconfigured {
        kind: DetectorKind,
        missing: &'static str,
    },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    BohmianPosition,
    SpinFlip,
    PhaseFlip,
    RingVelocity,
}

impl DetectorKind {
    pub fn label(&self) -> &'static str {
        match self {
            DetectorKind::BohmianPosition => "bohmian_position",
            DetectorKind::SpinFlip => "spin_flip",
            DetectorKind::PhaseFlip => "phase_flip",
            DetectorKind::RingVelocity => "ring_velocity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Upper,
    Lower,
}

impl Arm {
    pub fn label(&self) -> &'static str {
        match self {
            Arm::Upper => "upper",
            Arm::Lower => "lower",
        }
    }
}

/// Ring geometry of the velocity detector. `omega` is fixed by the equal
/// mass-scale condition `omega R = (hbar/m) k_tilde` unless overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingParams {
    pub radius: f64,
    pub k_tilde: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub arm: Arm,
    pub interaction_time: f64,
    /// Shift distance b of kinds (i) and (iii); must exceed the neutron
    /// packet width so the two records are disjoint.
    pub shift: f64,
    pub ring: RingParams,
    /// Continuous dof index of the neutron, for kinds (i), (iii), (iv).
    pub dof: Option<usize>,
    /// Spin slot of the neutron, for kind (ii).
    pub spin_slot: Option<usize>,
    /// Particle dof whose group-velocity sign identifies the arm.
    pub particle_dof: usize,
}

const NO_RING: RingParams = RingParams {
    radius: 1.0,
    k_tilde: 0.0,
    omega: 0.0,
};

impl DetectorSpec {
    pub fn bohmian_position(arm: Arm, interaction_time: f64, shift: f64, dof: usize) -> Self {
        DetectorSpec {
            kind: DetectorKind::BohmianPosition,
            arm,
            interaction_time,
            shift,
            ring: NO_RING,
            dof: Some(dof),
            spin_slot: None,
            particle_dof: 0,
        }
    }

    pub fn spin_flip(arm: Arm, interaction_time: f64, spin_slot: usize) -> Self {
        DetectorSpec {
            kind: DetectorKind::SpinFlip,
            arm,
            interaction_time,
            shift: 0.0,
            ring: NO_RING,
            dof: None,
            spin_slot: Some(spin_slot),
            particle_dof: 0,
        }
    }

    pub fn phase_flip(arm: Arm, interaction_time: f64, shift: f64, dof: usize) -> Self {
        DetectorSpec {
            kind: DetectorKind::PhaseFlip,
            arm,
            interaction_time,
            shift,
            ring: NO_RING,
            dof: Some(dof),
            spin_slot: None,
            particle_dof: 0,
        }
    }

    pub fn ring_velocity(arm: Arm, interaction_time: f64, ring: RingParams, dof: usize) -> Self {
        DetectorSpec {
            kind: DetectorKind::RingVelocity,
            arm,
            interaction_time,
            shift: 0.0,
            ring,
            dof: Some(dof),
            spin_slot: None,
            particle_dof: 0,
        }
    }

    fn dof_or_err(&self) -> Result<usize, DetectorError> {
        self.dof.ok_or(DetectorError::Misconfigured {
            kind: self.kind,
            missing: "neutron dof",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ParticlePresent,
    ParticleAbsent,
    Undetermined,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::ParticlePresent => "particlePresent",
            Verdict::ParticleAbsent => "particleAbsent",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordChannel {
    NeutronPosition,
    NeutronSpin,
    NeutronPhase,
    NeutronRotationSense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorRecord {
    pub verdict: Verdict,
    pub channel: RecordChannel,
}

/// True for branches traversing the detector's arm, identified by the sign
/// of the particle-dof group velocity during the diverging leg.
fn on_arm(state: &QuantumState, branch: usize, det: &DetectorSpec) -> bool {
    let gv = state.branches[branch].factors[det.particle_dof].group_velocity;
    match det.arm {
        Arm::Upper => gv > 0.0,
        Arm::Lower => gv < 0.0,
    }
}

/// Checks that the two arms hold spatially separated packets at the
/// interaction time, so the arm interaction is well defined.
fn check_arm_separation(state: &QuantumState, det: &DetectorSpec) -> Result<(), DetectorError> {
    let t = det.interaction_time;
    let d = det.particle_dof;
    for (i, bi) in state.branches.iter().enumerate() {
        for bj in state.branches.iter().skip(i + 1) {
            let (fi, fj) = (&bi.factors[d], &bj.factors[d]);
            if fi.group_velocity.signum() == fj.group_velocity.signum() {
                continue;
            }
            let gap = (fi.center_at(t) - fj.center_at(t)).abs();
            let needed = match (fi.kind, fj.kind) {
                (FactorKind::Rect, FactorKind::Rect) => 0.5 * (fi.width + fj.width),
                _ => 3.0 * fi.width.max(fj.width),
            };
            if gap < needed {
                return Err(DetectorError::TemporalOrder { time: t });
            }
        }
    }
    Ok(())
}

/// Applies the impulsive detector transformation to the branches
/// traversing the detector's arm. The state must sit at the interaction
/// time and the arm packets must already be separated.
pub fn apply_detector(
    state: &QuantumState,
    det: &DetectorSpec,
) -> Result<QuantumState, DetectorError> {
    if (state.time - det.interaction_time).abs() > 1e-9 {
        return Err(DetectorError::WrongTime {
            state_time: state.time,
            expected: det.interaction_time,
        });
    }
    check_arm_separation(state, det)?;
    let mut out = state.clone();
    let t = det.interaction_time;
    for i in 0..out.branches.len() {
        if !on_arm(&out, i, det) {
            continue;
        }
        match det.kind {
            DetectorKind::BohmianPosition => {
                let dof = det.dof_or_err()?;
                out.branches[i].factors[dof].center0 += det.shift;
            }
            DetectorKind::SpinFlip => {
                let slot = det.spin_slot.ok_or(DetectorError::Misconfigured {
                    kind: det.kind,
                    missing: "spin slot",
                })?;
                let s = out.branches[i].spins[slot];
                out.branches[i].spins[slot] = s.flipped();
            }
            DetectorKind::PhaseFlip => {
                // Negate the near-packet component of the neutron
                // superposition (the packet at the detector location).
                let dof = det.dof_or_err()?;
                let near = out.branches[i].factors[dof].center_at(t).abs() < 0.5 * det.shift;
                if near {
                    out.branches[i].coefficient = -out.branches[i].coefficient;
                }
            }
            DetectorKind::RingVelocity => {
                let dof = det.dof_or_err()?;
                let f = &mut out.branches[i].factors[dof];
                f.carrier = -f.carrier;
                f.group_velocity = -f.group_velocity;
            }
        }
    }
    Ok(out)
}

/// Signed conditional Bohmian velocity of the ring neutron (negative =
/// clockwise, the no-particle sense).
pub fn ring_rotation_sense(
    state: &QuantumState,
    det: &DetectorSpec,
    config: &Configuration,
) -> Result<f64, DetectorError> {
    let dof = det.dof_or_err()?;
    let cond = state.conditional(dof, config)?.to_state();
    let v = dynamics::exact_velocity(&cond, &Configuration::single(config[dof]), 0)?;
    Ok(v.value)
}

/// Reads the detector record off the current state and Bohmian
/// configuration. Kind (i) is readable at any time from the neutron's
/// position; kinds (ii)-(iv) stay undetermined until the surviving
/// branches agree on the record content.
pub fn read_record(
    state: &QuantumState,
    det: &DetectorSpec,
    config: &Configuration,
) -> Result<DetectorRecord, DetectorError> {
    let undetermined = |channel| DetectorRecord {
        verdict: Verdict::Undetermined,
        channel,
    };
    match det.kind {
        DetectorKind::BohmianPosition => {
            let dof = det.dof_or_err()?;
            let z = config[dof];
            let w = state.branches[0].factors[dof].width;
            let verdict = if (z - det.shift).abs() <= 0.5 * w {
                Verdict::ParticlePresent
            } else if z.abs() <= 0.5 * w {
                Verdict::ParticleAbsent
            } else {
                Verdict::Undetermined
            };
            Ok(DetectorRecord {
                verdict,
                channel: RecordChannel::NeutronPosition,
            })
        }
        DetectorKind::SpinFlip => {
            let channel = RecordChannel::NeutronSpin;
            if state.time < det.interaction_time {
                return Ok(undetermined(channel));
            }
            let slot = det.spin_slot.ok_or(DetectorError::Misconfigured {
                kind: det.kind,
                missing: "spin slot",
            })?;
            let mut labels: Vec<Spin> = state.branches.iter().map(|b| b.spins[slot]).collect();
            labels.dedup();
            if labels.len() != 1 {
                return Ok(undetermined(channel));
            }
            let verdict = match labels[0] {
                Spin::Down => Verdict::ParticlePresent,
                Spin::Up => Verdict::ParticleAbsent,
                Spin::NoSpin => Verdict::Undetermined,
            };
            Ok(DetectorRecord { verdict, channel })
        }
        DetectorKind::PhaseFlip => {
            let channel = RecordChannel::NeutronPhase;
            if state.time < det.interaction_time {
                return Ok(undetermined(channel));
            }
            let dof = det.dof_or_err()?;
            // Determined once every surviving branch shares the particle
            // factor; the relative sign of the near and far neutron
            // packets then carries the record.
            let pd = det.particle_dof;
            let first = &state.branches[0].factors[pd];
            let same_particle = state.branches.iter().all(|b| {
                let f = &b.factors[pd];
                f.center0 == first.center0
                    && f.group_velocity == first.group_velocity
                    && f.carrier == first.carrier
            });
            if !same_particle {
                return Ok(undetermined(channel));
            }
            let t = state.time;
            let near: Vec<_> = state
                .branches
                .iter()
                .filter(|b| b.factors[dof].center_at(t).abs() < 0.5 * det.shift)
                .collect();
            let far: Vec<_> = state
                .branches
                .iter()
                .filter(|b| b.factors[dof].center_at(t).abs() >= 0.5 * det.shift)
                .collect();
            if near.len() != 1 || far.len() != 1 {
                return Ok(undetermined(channel));
            }
            let ratio = near[0].coefficient / far[0].coefficient;
            let verdict = if ratio.re < 0.0 {
                Verdict::ParticlePresent
            } else {
                Verdict::ParticleAbsent
            };
            Ok(DetectorRecord { verdict, channel })
        }
        DetectorKind::RingVelocity => {
            let channel = RecordChannel::NeutronRotationSense;
            if state.time < det.interaction_time {
                return Ok(undetermined(channel));
            }
            let dof = det.dof_or_err()?;
            let mut senses: Vec<f64> = state
                .branches
                .iter()
                .map(|b| b.factors[dof].group_velocity.signum())
                .collect();
            senses.dedup();
            if senses.len() != 1 {
                return Ok(undetermined(channel));
            }
            // clockwise (negative) is the no-particle sense
            let v = ring_rotation_sense(state, det, config)?;
            let verdict = if v > 0.0 {
                Verdict::ParticlePresent
            } else {
                Verdict::ParticleAbsent
            };
            Ok(DetectorRecord { verdict, channel })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{Branch, SpatialFactor};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    const K: f64 = 2.0 * std::f64::consts::PI / 0.3;
    const T: f64 = 2.0;
    const B: f64 = 10.0;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Diverging two-arm state with a resting neutron packet on dof 1,
    /// valid for the leg before the interaction (split at -2T).
    fn diverging_with_neutron(t: f64) -> QuantumState {
        QuantumState::new(
            vec![
                Branch::new(
                    c(0.4f64.sqrt()),
                    vec![
                        SpatialFactor::rect(2.0 * T, 1.0, K, 1.0),
                        SpatialFactor::rect_at_rest(0.0, 1.0),
                    ],
                    vec![Spin::Up],
                ),
                Branch::new(
                    c(0.6f64.sqrt()),
                    vec![
                        SpatialFactor::rect(-2.0 * T, -1.0, -K, 1.0),
                        SpatialFactor::rect_at_rest(0.0, 1.0),
                    ],
                    vec![Spin::Down],
                ),
            ],
            t,
            vec![1.0 / K, 1.0 / K],
        )
    }

    #[test]
    fn position_detector_shifts_lower_arm_neutron() {
        let state = diverging_with_neutron(-T);
        let det = DetectorSpec::bohmian_position(Arm::Lower, -T, B, 1);
        let out = apply_detector(&state, &det).unwrap();
        // upper (alpha) branch neutron untouched, lower (beta) shifted by b
        assert_relative_eq!(out.branches[0].factors[1].center0, 0.0);
        assert_relative_eq!(out.branches[1].factors[1].center0, B);
    }

    #[test]
    fn spin_detector_flips_lower_arm_label() {
        let mut state = diverging_with_neutron(-T);
        for b in &mut state.branches {
            b.spins.push(Spin::Up);
        }
        let det = DetectorSpec::spin_flip(Arm::Lower, -T, 1);
        let out = apply_detector(&state, &det).unwrap();
        assert_eq!(out.branches[0].spins[1], Spin::Up);
        assert_eq!(out.branches[1].spins[1], Spin::Down);
    }

    #[test]
    fn phase_detector_negates_near_packet_on_arm() {
        // Four branches: (upper, lower) x (far, near) neutron packets.
        let mk = |coef: f64, up: bool, near: bool| {
            Branch::new(
                c(coef),
                vec![
                    SpatialFactor::rect(
                        if up { 2.0 * T } else { -2.0 * T },
                        if up { 1.0 } else { -1.0 },
                        if up { K } else { -K },
                        1.0,
                    ),
                    SpatialFactor::rect_at_rest(if near { 0.0 } else { B }, 1.0),
                ],
                vec![if up { Spin::Up } else { Spin::Down }],
            )
        };
        let half = 0.5f64.sqrt();
        let state = QuantumState::new(
            vec![
                mk(0.4f64.sqrt() * half, true, false),
                mk(0.4f64.sqrt() * half, true, true),
                mk(0.6f64.sqrt() * half, false, false),
                mk(0.6f64.sqrt() * half, false, true),
            ],
            -T,
            vec![1.0 / K, 1.0 / K],
        );
        let det = DetectorSpec::phase_flip(Arm::Lower, -T, B, 1);
        let out = apply_detector(&state, &det).unwrap();
        assert!(out.branches[0].coefficient.re > 0.0);
        assert!(out.branches[1].coefficient.re > 0.0);
        assert!(out.branches[2].coefficient.re > 0.0);
        assert!(
            out.branches[3].coefficient.re < 0.0,
            "near packet on the arm flips sign"
        );
        assert_eq!(out.branches.len(), 4);
    }

    #[test]
    fn ring_detector_reverses_rotation_on_arm() {
        let ring = RingParams {
            radius: 1.0,
            k_tilde: 2.0 * std::f64::consts::PI / 0.1,
            omega: 3.0,
        };
        let mut state = diverging_with_neutron(-T);
        for b in &mut state.branches {
            b.factors[1] =
                SpatialFactor::ring(ring.radius, -ring.k_tilde, -ring.omega * ring.radius);
        }
        let det = DetectorSpec::ring_velocity(Arm::Lower, -T, ring, 1);
        let out = apply_detector(&state, &det).unwrap();
        assert!(out.branches[0].factors[1].carrier < 0.0);
        assert!(out.branches[1].factors[1].carrier > 0.0);
        assert!(out.branches[1].factors[1].group_velocity > 0.0);
    }

    #[test]
    fn interaction_before_separation_is_rejected() {
        // Shortly after the split the packets still overlap: no arms yet.
        let state = diverging_with_neutron(-2.0 * T + 0.2);
        let det = DetectorSpec::bohmian_position(Arm::Lower, -2.0 * T + 0.2, B, 1);
        assert!(matches!(
            apply_detector(&state, &det),
            Err(DetectorError::TemporalOrder { .. })
        ));
        let det_late = DetectorSpec::bohmian_position(Arm::Lower, -T, B, 1);
        assert!(matches!(
            apply_detector(&state, &det_late),
            Err(DetectorError::WrongTime { .. })
        ));
    }

    #[test]
    fn position_record_reads_intervals() {
        let state = diverging_with_neutron(-T);
        let det = DetectorSpec::bohmian_position(Arm::Lower, -T, B, 1);
        let absent = read_record(&state, &det, &Configuration::new(vec![1.75, 0.1])).unwrap();
        assert_eq!(absent.verdict, Verdict::ParticleAbsent);
        assert_eq!(absent.channel, RecordChannel::NeutronPosition);
        let present =
            read_record(&state, &det, &Configuration::new(vec![1.75, B - 0.2])).unwrap();
        assert_eq!(present.verdict, Verdict::ParticlePresent);
    }

    #[test]
    fn spin_record_undetermined_until_collapse() {
        let mut state = diverging_with_neutron(-T);
        for b in &mut state.branches {
            b.spins.push(Spin::Up);
        }
        let det = DetectorSpec::spin_flip(Arm::Lower, -T, 1);
        // before the interaction
        let pre = state.at_time(-T - 0.5);
        let rec = read_record(&pre, &det, &Configuration::new(vec![1.75, 0.0])).unwrap();
        assert_eq!(rec.verdict, Verdict::Undetermined);
        // after the interaction but before collapse the labels disagree
        let fired = apply_detector(&state, &det).unwrap();
        let rec = read_record(&fired, &det, &Configuration::new(vec![1.75, 0.0])).unwrap();
        assert_eq!(rec.verdict, Verdict::Undetermined);
        // collapse to the flipped branch: the record reads present
        let collapsed = QuantumState::new(
            vec![fired.branches[1].clone()],
            0.5,
            fired.hbar_over_m.clone(),
        );
        let rec = read_record(&collapsed, &det, &Configuration::new(vec![0.5, 0.0])).unwrap();
        assert_eq!(rec.verdict, Verdict::ParticlePresent);
    }

    #[test]
    fn ring_record_sense_before_interaction_is_undetermined() {
        let ring = RingParams {
            radius: 1.0,
            k_tilde: 2.0 * std::f64::consts::PI / 0.1,
            omega: 3.0,
        };
        let mut state = diverging_with_neutron(-2.0 * T);
        for b in &mut state.branches {
            b.factors[1] =
                SpatialFactor::ring(ring.radius, -ring.k_tilde, -ring.omega * ring.radius);
        }
        let det = DetectorSpec::ring_velocity(Arm::Lower, -T, ring, 1);
        let config = Configuration::new(vec![0.1, 3.0]);
        let rec = read_record(&state, &det, &config).unwrap();
        assert_eq!(rec.verdict, Verdict::Undetermined);
        // the rotation sense itself is clockwise (negative) initially
        let sense = ring_rotation_sense(&state, &det, &config).unwrap();
        assert!(sense < 0.0);
        assert_relative_eq!(sense, -3.0, epsilon = 1e-12);
    }
}
