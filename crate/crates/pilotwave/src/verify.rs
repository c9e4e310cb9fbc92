//! The reproduction checklist behind `pilotwave verify` and the
//! `acceptance` test target: twelve checks covering the worked
//! Stern-Gerlach example, the empty-wave exchange, the which-path detector
//! verdict table, the overlap oscillation bounds, the Gaussian-model runs,
//! Born-rule and equivariance statistics, EPR anticorrelation, the GHZ
//! table and measurement contextuality. Every tolerance is pinned here.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::detectors::{Arm, DetectorKind, Verdict};
use crate::dynamics::RotatedBasis;
use crate::integrate::{
    quantile, rk4_adaptive, EventKind, ImplicitOverlap, IntegratorControls, PacketModel,
};
use crate::scenarios::{
    born_fraction_up, ghz_check, run, run_epr, run_with_approx, sample_initial_positions,
    sg_gauss_cdf, Destination, DetectorConfig, Experiment, InitialPosition, MeasureFirst,
    ScenarioSpec, SpinMode, SurrealVerdict,
};
use crate::state::{Branch, Configuration, QuantumState, SpatialFactor, Spin};
use crate::stats::ks_test;

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:2} {} ({:6.2}s)  {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.name,
            self.detail
        )
    }
}

fn report(
    id: usize,
    name: &'static str,
    time_limit: Option<f64>,
    body: impl FnOnce() -> Result<String, String>,
) -> CriterionReport {
    let start = Instant::now();
    let outcome = body();
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = time_limit {
        if seconds > limit {
            passed = false;
            detail = format!("{detail}; runtime {seconds:.2}s exceeded {limit}s");
        }
    }
    CriterionReport {
        id,
        name,
        passed,
        detail,
        seconds,
    }
}

fn check(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn fig1_spec() -> ScenarioSpec {
    let mut s = ScenarioSpec::new(Experiment::Sg);
    s.alpha = Complex64::new(0.4f64.sqrt(), 0.0);
    s.beta = Complex64::new(0.6f64.sqrt(), 0.0);
    s.z0 = InitialPosition::Absolute(0.2);
    s
}

/// Stern-Gerlach worked example: capture by the up packet at t = 3a/(8u),
/// exactly for the analytic route and within 1e-4 for RK4; the particle
/// then rides a/4 below the up-packet center.
pub fn criterion_1() -> CriterionReport {
    report(1, "SG worked example", Some(1.0), || {
        let r = run(&fig1_spec()).map_err(|e| e.to_string())?;
        let cap = r
            .trajectory
            .first_event(EventKind::PacketCapture)
            .ok_or("no capture event")?;
        check((cap.time - 0.375).abs() < 1e-13, &format!(
            "piecewise capture time {} != 3/8", cap.time
        ))?;
        check((cap.config[0] - 0.125).abs() < 1e-13, &format!(
            "capture position {} != 1/8", cap.config[0]
        ))?;
        let t_end = r.trajectory.end_time();
        let offset = r.trajectory.position_at(t_end, 0) - t_end;
        check((offset + 0.25).abs() < 1e-13, &format!(
            "post-capture offset {offset} != -1/4"
        ))?;
        check(r.destination == Destination::UpBeam && r.sigma_z == Some(1),
            "wrong beam or outcome label")?;

        let mut rk = fig1_spec();
        rk.method = Some(crate::integrate::Method::Rk4Adaptive);
        let r2 = run(&rk).map_err(|e| e.to_string())?;
        let cap2 = r2
            .trajectory
            .first_event(EventKind::PacketCapture)
            .ok_or("no rk4 capture event")?;
        check((cap2.time - 0.375).abs() < 1e-4, &format!(
            "rk4 capture time {} off by {:.2e}",
            cap2.time,
            (cap2.time - 0.375).abs()
        ))?;
        Ok(format!(
            "capture at (t, z) = ({}, {}), rk4 within {:.1e}",
            cap.time,
            cap.config[0],
            (cap2.time - 0.375).abs()
        ))
    })
}

/// Empty-wave packet exchange: overlap entry at (-3a/8u, a/8) and exit at
/// (a/4u, a/4), exactly; the particle ends riding the down-spin packet
/// center toward detector B.
pub fn criterion_2() -> CriterionReport {
    report(2, "empty-wave exchange", None, || {
        let mut s = ScenarioSpec::new(Experiment::EmptyWave);
        s.z0 = InitialPosition::Absolute(0.2);
        let r = run(&s).map_err(|e| e.to_string())?;
        let entry = r
            .trajectory
            .first_event(EventKind::OverlapEntry)
            .ok_or("no entry event")?;
        check(
            (entry.time + 0.375).abs() < 1e-13 && (entry.config[0] - 0.125).abs() < 1e-13,
            &format!("entry at ({}, {})", entry.time, entry.config[0]),
        )?;
        let exit = r
            .trajectory
            .events_of(EventKind::OverlapExit)
            .find(|e| e.time > entry.time)
            .ok_or("no exit event")?;
        check(
            (exit.time - 0.25).abs() < 1e-13 && (exit.config[0] - 0.25).abs() < 1e-13,
            &format!("exit at ({}, {})", exit.time, exit.config[0]),
        )?;
        // riding the down-spin packet center: z(t) = u t afterwards
        let t_end = r.trajectory.end_time();
        check(
            (r.trajectory.position_at(t_end, 0) - t_end).abs() < 1e-13,
            "not riding the packet center",
        )?;
        check(r.destination == Destination::DetectorB, "wrong destination")?;
        Ok(format!(
            "entry ({}, {}), exit ({}, {}), destination B",
            entry.time, entry.config[0], exit.time, exit.config[0]
        ))
    })
}

/// Which-path verdict table: the Bohmian-position detector reads the truth
/// (destination A, not surreal); the spin, phase and ring detectors leave
/// a record on the arm the particle never took (destination B, surreal).
/// Verified for spinful-rect, spinless-rect and spinless-Gauss models.
pub fn criterion_3() -> CriterionReport {
    report(3, "detector verdict table", Some(30.0), || {
        let variants: [(SpinMode, PacketModel, &str); 3] = [
            (SpinMode::Spinful, PacketModel::Rect, "spinful-rect"),
            (SpinMode::Spinless, PacketModel::Rect, "spinless-rect"),
            (SpinMode::Spinless, PacketModel::Gauss, "spinless-gauss"),
        ];
        let kinds = [
            DetectorKind::BohmianPosition,
            DetectorKind::SpinFlip,
            DetectorKind::PhaseFlip,
            DetectorKind::RingVelocity,
        ];
        for (spin_mode, packet, vname) in variants {
            for kind in kinds {
                let mut s = ScenarioSpec::new(Experiment::Interferometer);
                s.spin_mode = spin_mode;
                s.packet = packet;
                s.z0 = InitialPosition::Quantile(0.7);
                s.detector = Some(DetectorConfig::new(kind, Arm::Lower));
                let r = run(&s).map_err(|e| format!("{vname}/{}: {e}", kind.label()))?;
                let tag = format!("{vname}/{}", kind.label());
                match kind {
                    DetectorKind::BohmianPosition => {
                        check(r.destination == Destination::DetectorA, &format!(
                            "{tag}: destination {:?}", r.destination))?;
                        check(r.records[0].verdict == Verdict::ParticleAbsent, &format!(
                            "{tag}: verdict {:?}", r.records[0].verdict))?;
                        check(r.surreal == SurrealVerdict::NotSurreal, &format!(
                            "{tag}: surreal {:?}", r.surreal))?;
                    }
                    _ => {
                        check(r.destination == Destination::DetectorB, &format!(
                            "{tag}: destination {:?}", r.destination))?;
                        check(r.records[0].verdict == Verdict::ParticlePresent, &format!(
                            "{tag}: verdict {:?}", r.records[0].verdict))?;
                        check(r.surreal == SurrealVerdict::Surreal, &format!(
                            "{tag}: surreal {:?}", r.surreal))?;
                    }
                }
            }
        }
        Ok("12 runs: (i) truthful, (ii)-(iv) surreal in all three models".into())
    })
}

/// Spinless overlap oscillations at lambda = 0.3a: the exact trajectory
/// stays within 2|alpha beta|/k of the weighted-velocity line throughout
/// the overlap, with observed amplitude in [0.5, 1.0] of |alpha beta|/k.
pub fn criterion_4() -> CriterionReport {
    report(4, "spinless oscillation bound", None, || {
        let mut s = ScenarioSpec::new(Experiment::EmptyWave);
        s.spin_mode = SpinMode::Spinless;
        s.z0 = InitialPosition::Absolute(0.2);
        let r = run_with_approx(&s).map_err(|e| e.to_string())?;
        let approx = r.approx_trajectory.as_ref().ok_or("no reference run")?;
        let entry = r
            .trajectory
            .events_of(EventKind::OverlapEntry)
            .find(|e| e.time > -2.0)
            .ok_or("no entry")?
            .time;
        let exit_exact = r
            .trajectory
            .events_of(EventKind::OverlapExit)
            .find(|e| e.time > entry)
            .ok_or("no exit")?
            .time;
        let exit_approx = approx
            .events_of(EventKind::OverlapExit)
            .find(|e| e.time > entry)
            .map(|e| e.time)
            .unwrap_or(exit_exact);
        let window_end = exit_exact.min(exit_approx);
        let g = s.geometry;
        let ab = s.alpha.norm() * s.beta.norm();
        let scale = ab / g.k;
        let mut max_dev: f64 = 0.0;
        let mut min_dev: f64 = 0.0;
        let n = 4000;
        for i in 0..=n {
            let t = entry + (window_end - entry) * i as f64 / n as f64;
            let dev = r.trajectory.position_at(t, 0) - approx.position_at(t, 0);
            max_dev = max_dev.max(dev);
            min_dev = min_dev.min(dev);
            if dev.abs() > 2.0 * scale + 1e-9 {
                return Err(format!(
                    "deviation {dev:.3e} exceeds 2|ab|/k = {:.3e} at t = {t}",
                    2.0 * scale
                ));
            }
        }
        let amplitude = 0.5 * (max_dev - min_dev);
        check(
            amplitude >= 0.5 * scale && amplitude <= 1.0 * scale + 1e-9,
            &format!(
                "amplitude {amplitude:.4e} outside [0.5, 1.0] x {scale:.4e}"
            ),
        )?;
        Ok(format!(
            "max |dev| = {:.3e} <= {:.3e}, amplitude = {:.3} x |ab|/k",
            max_dev.max(-min_dev),
            2.0 * scale,
            amplitude / scale
        ))
    })
}

/// The implicit overlap solution and the adaptive integrator agree to
/// 1e-6 a at 100 sampled times inside the overlap.
pub fn criterion_5() -> CriterionReport {
    report(5, "implicit vs RK4 oracle", None, || {
        let k = 2.0 * std::f64::consts::PI / 0.3;
        let alpha = Complex64::new(0.4f64.sqrt(), 0.0);
        let beta = Complex64::new(0.6f64.sqrt(), 0.0);
        let (t_entry, z_entry) = (-0.375, 0.125);
        let state = QuantumState::new(
            vec![
                Branch::new(
                    alpha,
                    vec![SpatialFactor::rect(0.0, -1.0, -k, 1.0)],
                    vec![Spin::NoSpin],
                ),
                Branch::new(
                    beta,
                    vec![SpatialFactor::rect(0.0, 1.0, k, 1.0)],
                    vec![Spin::NoSpin],
                ),
            ],
            t_entry,
            vec![1.0 / k],
        );
        // The oracle runs at tight tolerance (relTol 1e-10) and is driven
        // segment-by-segment so each comparison lands on an integration
        // endpoint; interpolating across the velocity bursts near the
        // density minima would otherwise dominate the error.
        let controls = IntegratorControls {
            prune_enabled: false,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let imp = ImplicitOverlap::from_entry(alpha, beta, 1.0, k, t_entry, z_entry);
        let mut worst: f64 = 0.0;
        let mut t = t_entry;
        let mut z = z_entry;
        for i in 0..100 {
            let t_next = t_entry + (0.24 - t_entry) * (i as f64 + 1.0) / 100.0;
            let leg = rk4_adaptive(
                &state.at_time(t),
                &Configuration::single(z),
                t_next,
                &controls,
            )
            .map_err(|e| e.to_string())?;
            z = leg.trajectory.final_config()[0];
            t = t_next;
            let z_imp = imp.solve(t).map_err(|e| e.to_string())?;
            worst = worst.max((z_imp - z).abs());
        }
        check(worst < 1e-6, &format!("max |implicit - rk4| = {worst:.3e}"))?;
        Ok(format!("max |implicit - rk4| = {worst:.2e} over 100 times"))
    })
}

/// Ring-detector joint motion in the rotated basis (lambda-tilde = 0.1a):
/// Y is conserved to 1e-6 across the overlap, the Z oscillation amplitude
/// is |alpha beta|/sqrt(k^2 + kt^2) and its z projection is
/// |alpha beta| k/(k^2 + kt^2), both within 5%.
pub fn criterion_6() -> CriterionReport {
    report(6, "ring detector rotated basis", None, || {
        let mut s = ScenarioSpec::new(Experiment::Interferometer);
        s.spin_mode = SpinMode::Spinless;
        s.z0 = InitialPosition::Quantile(0.7);
        s.detector = Some(DetectorConfig::new(DetectorKind::RingVelocity, Arm::Lower));
        let r = run_with_approx(&s).map_err(|e| e.to_string())?;
        let g = s.geometry;
        let det = s.detector.unwrap();
        let rb = RotatedBasis::new(g.k, det.k_tilde(), g.u, det.omega(&g), det.ring_radius)
            .map_err(|e| e.to_string())?;
        let entry = r
            .trajectory
            .events_of(EventKind::OverlapEntry)
            .find(|e| e.time > -2.0)
            .ok_or("no entry")?
            .time;
        let exit = r
            .trajectory
            .events_of(EventKind::OverlapExit)
            .find(|e| e.time > entry)
            .ok_or("no exit")?
            .time;
        let approx = r.approx_trajectory.as_ref().ok_or("no reference")?;
        let (pad_a, pad_b) = (entry + 0.02, exit - 0.02);
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        let mut zdev_min = f64::INFINITY;
        let mut zdev_max = f64::NEG_INFINITY;
        let mut xdev_min = f64::INFINITY;
        let mut xdev_max = f64::NEG_INFINITY;
        let n = 6000;
        for i in 0..=n {
            let t = pad_a + (pad_b - pad_a) * i as f64 / n as f64;
            let z = r.trajectory.position_at(t, 0);
            let th = r.trajectory.position_at(t, 1);
            let (bz, y) = rb.to_zy(z, th);
            let za = approx.position_at(t, 0);
            let tha = approx.position_at(t, 1);
            let (bza, _) = rb.to_zy(za, tha);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
            zdev_min = zdev_min.min(bz - bza);
            zdev_max = zdev_max.max(bz - bza);
            xdev_min = xdev_min.min(z - za);
            xdev_max = xdev_max.max(z - za);
        }
        let y_drift = y_max - y_min;
        check(y_drift < 1e-6, &format!("Y drift {y_drift:.3e} >= 1e-6"))?;
        let ab = s.alpha.norm() * s.beta.norm();
        let big_k = g.k.hypot(det.k_tilde());
        let z_amp = 0.5 * (zdev_max - zdev_min);
        let z_expect = ab / big_k;
        check(
            (z_amp - z_expect).abs() <= 0.05 * z_expect,
            &format!("Z amplitude {z_amp:.4e} vs {z_expect:.4e}"),
        )?;
        let x_amp = 0.5 * (xdev_max - xdev_min);
        let x_expect = ab * g.k / (big_k * big_k);
        check(
            (x_amp - x_expect).abs() <= 0.05 * x_expect,
            &format!("z-projected amplitude {x_amp:.4e} vs {x_expect:.4e}"),
        )?;
        Ok(format!(
            "Y drift {y_drift:.1e}; Z amp {z_amp:.3e} (expect {z_expect:.3e}); z amp {x_amp:.3e} (expect {x_expect:.3e})"
        ))
    })
}

/// Gaussian-model run: the 0.7-quantile start (0.37a to 1e-3) reaches
/// detector B, the exact trajectory reconverges to the weighted-velocity
/// one after packet separation, and the symmetric control stays on the
/// axis.
pub fn criterion_7() -> CriterionReport {
    report(7, "Gaussian packet run", Some(10.0), || {
        let z0 = quantile(PacketModel::Gauss, 1.0, 0.7);
        check(
            (z0 - 0.37).abs() <= 1e-3,
            &format!("0.7-quantile {z0} differs from 0.37a by more than 1e-3"),
        )?;
        let mut s = ScenarioSpec::new(Experiment::EmptyWave);
        s.spin_mode = SpinMode::Spinless;
        s.packet = PacketModel::Gauss;
        s.z0 = InitialPosition::Absolute(z0);
        let r = run_with_approx(&s).map_err(|e| e.to_string())?;
        check(
            r.destination == Destination::DetectorB,
            &format!("destination {:?}", r.destination),
        )?;
        let approx = r.approx_trajectory.as_ref().ok_or("no reference")?;
        // packets separate (centers 6a apart) at t = 3a/u
        let mut worst: f64 = 0.0;
        for i in 0..=50 {
            let t = 3.05 + (3.95 - 3.05) * i as f64 / 50.0;
            worst = worst.max(
                (r.trajectory.position_at(t, 0) - approx.position_at(t, 0)).abs(),
            );
        }
        check(
            worst < 1e-3,
            &format!("post-separation |exact - approx| = {worst:.3e}"),
        )?;
        let mut sym = ScenarioSpec::new(Experiment::EmptyWave);
        sym.spin_mode = SpinMode::Spinless;
        sym.packet = PacketModel::Gauss;
        sym.alpha = Complex64::new(0.5f64.sqrt(), 0.0);
        sym.beta = Complex64::new(0.5f64.sqrt(), 0.0);
        sym.z0 = InitialPosition::Absolute(0.0);
        let rs = run(&sym).map_err(|e| e.to_string())?;
        let max_z = rs
            .trajectory
            .samples
            .iter()
            .map(|(_, c)| c[0].abs())
            .fold(0.0, f64::max);
        check(max_z < 1e-8, &format!("symmetric control drifts to {max_z:.2e}"))?;
        Ok(format!(
            "destination B; post-separation dev {worst:.1e}; control |z| <= {max_z:.1e}"
        ))
    })
}

/// Born-rule fractions: over a uniform 10^4 grid of starting positions the
/// up-capture fraction equals |alpha|^2 exactly.
pub fn criterion_8() -> CriterionReport {
    report(8, "Born-rule fractions", None, || {
        for alpha2 in [0.4f64, 0.25] {
            let alpha = Complex64::new(alpha2.sqrt(), 0.0);
            let beta = Complex64::new((1.0 - alpha2).sqrt(), 0.0);
            let f = born_fraction_up(alpha, beta, 10_000);
            check(
                (f - alpha2).abs() < 1e-4,
                &format!("fraction {f} != |alpha|^2 = {alpha2}"),
            )?;
        }
        Ok("up-capture fraction = |alpha|^2 exactly on the 1e4 grid".into())
    })
}

/// Equivariance: 10^4 positions sampled from |psi(0)|^2 of the Gaussian
/// split state, integrated to t = 2a/u, pass a KS test against |psi(t)|^2
/// at significance 1e-3.
pub fn criterion_9() -> CriterionReport {
    report(9, "equivariance (KS)", Some(60.0), || {
        let mut s = ScenarioSpec::new(Experiment::Sg);
        s.packet = PacketModel::Gauss;
        let t_end = 2.0;
        let n = 10_000;
        let z0s = sample_initial_positions(&s, n, 2026);
        let g = s.geometry;
        let state = QuantumState::new(
            vec![
                Branch::new(
                    s.alpha,
                    vec![SpatialFactor::gauss(0.0, g.u, g.k, g.a, -2.0 * g.big_t)],
                    vec![Spin::Up],
                ),
                Branch::new(
                    s.beta,
                    vec![SpatialFactor::gauss(0.0, -g.u, -g.k, g.a, -2.0 * g.big_t)],
                    vec![Spin::Down],
                ),
            ],
            0.0,
            vec![g.hbar_over_m()],
        );
        // Orthogonal spins make the velocity field smooth (no overlap
        // interference to resolve), so a coarser step cap is plenty here.
        let controls = IntegratorControls {
            max_step: 0.02,
            ..Default::default()
        };
        let finals: Result<Vec<f64>, String> = z0s
            .par_iter()
            .map(|&z0| {
                rk4_adaptive(&state, &Configuration::single(z0), t_end, &controls)
                    .map(|out| out.trajectory.final_config()[0])
                    .map_err(|e| e.to_string())
            })
            .collect();
        let mut finals = finals?;
        let cdf = sg_gauss_cdf(&s, t_end);
        let res = ks_test(&mut finals, cdf);
        check(
            res.p_value > 1e-3,
            &format!("KS D = {:.4e}, p = {:.3e}", res.statistic, res.p_value),
        )?;
        Ok(format!(
            "n = {n}: KS D = {:.3e}, p = {:.3}",
            res.statistic, res.p_value
        ))
    })
}

/// EPR anticorrelation over 1000 random draws, plus the measurement-order
/// dependence of the individual outcomes.
pub fn criterion_10() -> CriterionReport {
    report(10, "EPR anticorrelation", None, || {
        use rand::{Rng, SeedableRng};
        let spec = ScenarioSpec::new(Experiment::Epr);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for trial in 0..1000 {
            let z1 = rng.gen_range(-0.49..0.49);
            let z2 = rng.gen_range(-0.49..0.49);
            let first = if rng.gen_bool(0.5) {
                MeasureFirst::Particle1
            } else {
                MeasureFirst::Particle2
            };
            let r = run_epr(&spec, z1, z2, first).map_err(|e| e.to_string())?;
            check(
                r.outcome1 != r.outcome2,
                &format!("trial {trial}: outcomes correlated ({z1}, {z2}, {first:?})"),
            )?;
        }
        let r1 = run_epr(&spec, 0.2, 0.3, MeasureFirst::Particle1).map_err(|e| e.to_string())?;
        let r2 = run_epr(&spec, 0.2, 0.3, MeasureFirst::Particle2).map_err(|e| e.to_string())?;
        check(
            (r1.outcome1, r1.outcome2) == (Spin::Up, Spin::Down)
                && (r2.outcome1, r2.outcome2) == (Spin::Down, Spin::Up),
            "order dependence not reproduced",
        )?;
        Ok("1000/1000 anticorrelated; (z1, z2 > 0) gives (up, down) or (down, up) by order".into())
    })
}

/// GHZ: none of the 64 outcome assignments satisfies all four product
/// equations; the product of the equations is the +1 = -1 contradiction.
pub fn criterion_11() -> CriterionReport {
    report(11, "GHZ exhaustive check", None, || {
        let table = ghz_check();
        check(
            table.satisfying == 0,
            &format!("{} assignments satisfy the equations", table.satisfying),
        )?;
        check(
            table.assignments.len() == 64,
            "incomplete enumeration",
        )?;
        check(
            table.lhs_product == 1 && table.rhs_product == -1,
            "product identity not reproduced",
        )?;
        Ok("0 of 64 assignments; LHS product +1 vs RHS product -1".into())
    })
}

/// Contextuality: with equal weights the standard and reversed devices
/// yield pointwise-identical trajectories with opposite outcome labels.
pub fn criterion_12() -> CriterionReport {
    report(12, "measurement contextuality", None, || {
        let half = Complex64::new(0.5f64.sqrt(), 0.0);
        let mk = |exp| {
            let mut s = ScenarioSpec::new(exp);
            s.alpha = half;
            s.beta = half;
            s.z0 = InitialPosition::Absolute(0.25);
            s
        };
        let std_run = run(&mk(Experiment::Sg)).map_err(|e| e.to_string())?;
        let rev_run = run(&mk(Experiment::SgReversed)).map_err(|e| e.to_string())?;
        check(
            std_run.trajectory.samples.len() == rev_run.trajectory.samples.len(),
            "sample counts differ",
        )?;
        for ((t1, c1), (t2, c2)) in std_run
            .trajectory
            .samples
            .iter()
            .zip(&rev_run.trajectory.samples)
        {
            check(
                t1 == t2 && c1[0] == c2[0],
                &format!("trajectories differ at t = {t1}"),
            )?;
        }
        check(
            std_run.sigma_z == Some(1) && rev_run.sigma_z == Some(-1),
            &format!(
                "labels {:?} / {:?} not opposite",
                std_run.sigma_z, rev_run.sigma_z
            ),
        )?;
        Ok("identical trajectories, sigma_z = +1 vs -1".into())
    })
}

/// Run the whole checklist in order.
pub fn run_all() -> Vec<CriterionReport> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
        criterion_12(),
    ]
}

