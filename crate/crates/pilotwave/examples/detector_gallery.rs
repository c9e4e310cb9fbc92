//! The four which-path detectors on the lower interferometer arm, for a
//! particle whose Bohmian trajectory traverses the *upper* arm.
//!
//! The Bohmian-position detector reads the truth. The spin, phase and
//! ring-velocity detectors end up holding a record of the particle on the
//! arm it never visited: surrealistic trajectories.

use pilotwave::detectors::{Arm, DetectorKind};
use pilotwave::io::{emit_figure, FigureOptions};
use pilotwave::scenarios::{
    run_with_approx, DetectorConfig, Experiment, InitialPosition, ScenarioSpec, SurrealVerdict,
};

fn main() {
    std::fs::create_dir_all("out").unwrap();
    println!("{:<18} {:>11} {:>16} {:>9}", "detector", "destination", "record", "surreal");
    for kind in [
        DetectorKind::BohmianPosition,
        DetectorKind::SpinFlip,
        DetectorKind::PhaseFlip,
        DetectorKind::RingVelocity,
    ] {
        let mut spec = ScenarioSpec::new(Experiment::Interferometer);
        spec.z0 = InitialPosition::Absolute(0.2);
        spec.detector = Some(DetectorConfig::new(kind, Arm::Lower));
        let r = run_with_approx(&spec).expect("run");
        println!(
            "{:<18} {:>11} {:>16} {:>9}",
            kind.label(),
            r.destination.label(),
            r.records[0].verdict.label(),
            match r.surreal {
                SurrealVerdict::Surreal => "yes",
                SurrealVerdict::NotSurreal => "no",
                SurrealVerdict::NotApplicable => "-",
            }
        );
        let path = format!("out/detector_{}.svg", kind.label());
        emit_figure(&r, &path, &FigureOptions::default()).unwrap();
    }
    println!("\nwrote out/detector_<kind>.svg figures");
}
