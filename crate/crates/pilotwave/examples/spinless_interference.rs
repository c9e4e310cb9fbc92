//! Spinless particle: flipping the spin in the upper arm makes the two
//! packets interfere in the overlap, so the weighted-velocity formula is
//! only approximate. The exact trajectory follows the implicit solution
//! z = (|b|^2-|a|^2) u t - (|ab|/k) sin(2kz + phi) + C1 and oscillates
//! around the straight weighted-velocity line with amplitude |ab|/k.

use pilotwave::io::{emit_figure, FigureOptions};
use pilotwave::scenarios::{
    run_with_approx, Experiment, InitialPosition, ScenarioSpec, SpinMode,
};
use pilotwave::EventKind;

fn main() {
    let mut spec = ScenarioSpec::new(Experiment::EmptyWave);
    spec.spin_mode = SpinMode::Spinless;
    spec.z0 = InitialPosition::Absolute(0.2);

    let r = run_with_approx(&spec).expect("run");
    let approx = r.approx_trajectory.as_ref().unwrap();
    let entry = r
        .trajectory
        .events_of(EventKind::OverlapEntry)
        .find(|e| e.time > -2.0)
        .unwrap()
        .time;
    let exit = r
        .trajectory
        .events_of(EventKind::OverlapExit)
        .find(|e| e.time > entry)
        .unwrap()
        .time;

    let k = spec.geometry.k;
    let ab = spec.alpha.norm() * spec.beta.norm();
    let mut max_dev: f64 = 0.0;
    for i in 0..=2000 {
        let t = entry + (exit - entry) * i as f64 / 2000.0;
        let dev = r.trajectory.position_at(t, 0) - approx.position_at(t, 0);
        max_dev = max_dev.max(dev.abs());
    }
    println!("overlap window    : [{entry:.4}, {exit:.4}] a/u");
    println!("oscillation scale : |ab|/k = {:.5} a", ab / k);
    println!("max |z - z_appr|  : {max_dev:.5} a (bound 2|ab|/k = {:.5})", 2.0 * ab / k);
    println!("destination       : {}", r.destination.label());
    let exit_gap = r.trajectory.position_at(4.0, 0) - approx.position_at(4.0, 0);
    println!("post-exit offset  : {exit_gap:+.5} a");
    println!("(lambda = 0.3a with entry at a/8 happens to exit exactly on the");
    println!(" weighted-velocity corner; a generic wavelength leaves an offset)");

    // the same lineage at lambda = 0.28a: the exact trajectory leaves the
    // overlap a little away from the weighted exit and the rides stay
    // offset, the sharp-edged model's own artifact
    let mut generic = spec.clone();
    generic.geometry.k = 2.0 * std::f64::consts::PI / 0.28;
    let rg = run_with_approx(&generic).expect("run");
    let ga = rg.approx_trajectory.as_ref().unwrap();
    let gap = rg.trajectory.position_at(4.0, 0) - ga.position_at(4.0, 0);
    println!("at lambda = 0.28a : post-exit offset {gap:+.5} a");

    std::fs::create_dir_all("out").unwrap();
    emit_figure(
        &r,
        "out/spinless_interference.svg",
        &FigureOptions {
            gamma: 1.4,
            ..Default::default()
        },
    )
    .unwrap();
    println!("wrote out/spinless_interference.svg (fringes visible in the overlap lens)");
}
