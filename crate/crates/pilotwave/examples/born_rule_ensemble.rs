//! Ensemble statistics: the fraction of starting positions captured by
//! the up packet equals |alpha|^2 exactly (Born rule from the trajectory
//! picture), and an ensemble distributed as |psi|^2 at one time remains
//! |psi|^2-distributed under the flow (equivariance), checked with a
//! Kolmogorov-Smirnov test.

use num_complex::Complex64;
use pilotwave::integrate::PacketModel;
use pilotwave::scenarios::{
    born_fraction_up, run_ensemble, sg_gauss_cdf, Experiment, ScenarioSpec,
};
use pilotwave::stats::ks_test;

fn main() {
    // Born-rule fractions on a fine grid of box starting positions.
    for alpha2 in [0.4, 0.25, 0.5] {
        let alpha = Complex64::new(f64::sqrt(alpha2), 0.0);
        let beta = Complex64::new((1.0 - alpha2).sqrt(), 0.0);
        let f = born_fraction_up(alpha, beta, 10_000);
        println!("|alpha|^2 = {alpha2:4}: up-capture fraction = {f}");
    }

    // Equivariance for the Gaussian split state.
    let mut spec = ScenarioSpec::new(Experiment::Sg);
    spec.packet = PacketModel::Gauss;
    spec.controls.max_step = 0.02;
    spec.t_end = Some(2.0);
    let n = 2000;
    let rows = run_ensemble(&spec, n, 7).expect("ensemble");
    let mut finals: Vec<f64> = rows.iter().map(|r| r.final_z).collect();
    let up = rows
        .iter()
        .filter(|r| r.sigma_z == Some(1))
        .count();
    println!("\nGaussian ensemble, n = {n}, integrated to t = 2 a/u:");
    println!("  up-beam fraction: {:.3} (|alpha|^2 = 0.4)", up as f64 / n as f64);
    let res = ks_test(&mut finals, sg_gauss_cdf(&spec, 2.0));
    println!(
        "  KS against |psi(t)|^2: D = {:.4}, p = {:.3} (equivariant)",
        res.statistic, res.p_value
    );
}
