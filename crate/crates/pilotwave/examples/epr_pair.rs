//! EPR-Bohm pair through sequential Stern-Gerlach devices. Both particles
//! can start with positive positions, but the outcomes are always
//! anticorrelated: the first measurement's conditional collapse drives the
//! second particle regardless of its own position. Which particle goes up
//! depends on the measurement *order* - real action at a distance.

use pilotwave::scenarios::{run_epr, Experiment, MeasureFirst, ScenarioSpec};

fn main() {
    let spec = ScenarioSpec::new(Experiment::Epr);

    println!("z1 = +0.2, z2 = +0.3 (both in the upper half)\n");
    for first in [MeasureFirst::Particle1, MeasureFirst::Particle2] {
        let r = run_epr(&spec, 0.2, 0.3, first).expect("run");
        println!(
            "measure {:?} first -> particle 1: {:?}, particle 2: {:?}",
            first, r.outcome1, r.outcome2
        );
    }

    println!("\nz1 = +0.2, z2 = -0.3, particle 1 first:");
    let r = run_epr(&spec, 0.2, -0.3, MeasureFirst::Particle1).expect("run");
    println!(
        "  particle 1: {:?}, particle 2: {:?} (collapse drives every z2 down)",
        r.outcome1, r.outcome2
    );

    // a small random scan: anticorrelation never fails
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut anti = 0;
    let n = 200;
    for _ in 0..n {
        let z1 = rng.gen_range(-0.49..0.49);
        let z2 = rng.gen_range(-0.49..0.49);
        let first = if rng.gen_bool(0.5) {
            MeasureFirst::Particle1
        } else {
            MeasureFirst::Particle2
        };
        let r = run_epr(&spec, z1, z2, first).expect("run");
        if r.outcome1 != r.outcome2 {
            anti += 1;
        }
    }
    println!("\nrandom draws: {anti}/{n} anticorrelated");
}
