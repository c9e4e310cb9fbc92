use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pilotwave::detectors::DetectorError;
use pilotwave::integrate::IntegrateError;
use pilotwave::io::{self, FigureOptions};
use pilotwave::scenarios::{self, Experiment, ScenarioError};

const CONFIG_HELP: &str = "\
Config file format: line-oriented `key = value`, `#` comments, UTF-8.
All quantities are dimensionless in (a, a/u) units.

  experiment        sg | sg_reversed | epr | empty_wave | interferometer | ghz  (required)
  alpha2, beta2     branch weights, must sum to 1           [0.4, 0.6]
  alpha_phase, beta_phase   amplitude phases in radians     [0, 0]
  z0                initial Bohmian position                [z0_quantile = 0.7]
  z0_quantile       start at this packet quantile instead
  packet            rect | gauss                            [rect]
  spin_mode         spinful | spinless                      [spinful]
  detector          none | bohmian_position | spin_flip | phase_flip | ring_velocity  [none]
  detector_arm      lower | upper                           [lower]
  detector_shift    neutron shift b (> a)                   [10]
  ring_radius, ring_wavelength   ring detector geometry     [1, 0.1]
  neutron_mass_ratio  neutron/particle mass                 [1]
  neutron_start     initial neutron coordinate              [0 | pi]
  a, u, lambda, big_t   geometry                            [1, 1, 0.3, 2]
  t_end             override the integration end time
  method            auto | piecewise | implicit | rk4       [auto]
  max_step, rel_tol, abs_tol, collapse_epsilon, sample_step  integrator controls
  seed              RNG seed for ensembles                  [0]
  z1, z2, measure_first    EPR positions and order          [0.2, 0.3, 1]
";

#[derive(Parser)]
#[command(
    name = "pilotwave",
    version,
    about = "de Broglie-Bohm trajectories through Stern-Gerlach and empty-wave interferometers",
    after_help = CONFIG_HELP
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write the trajectory table here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write an SVG figure here.
        #[arg(long)]
        fig: Option<PathBuf>,
        /// Also integrate and overlay the weighted-velocity reference.
        #[arg(long)]
        compare_approx: bool,
    },
    /// Run an ensemble of trajectories with sampled initial positions.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the GHZ no-assignment table.
    Ghz,
    /// Run the full acceptance suite.
    Verify,
}

/// 1 for physics diagnostics (node collisions and friends), 2 for config
/// and spec errors.
fn exit_code_for(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Invalid(_) | ScenarioError::NotNormalized(_) => 2,
        ScenarioError::Integrate(IntegrateError::OutsideSupport { .. })
        | ScenarioError::Integrate(IntegrateError::InvalidAmplitudes { .. }) => 2,
        ScenarioError::Detector(DetectorError::Misconfigured { .. }) => 2,
        _ => 1,
    }
}

fn cmd_run(
    config: &PathBuf,
    out: Option<&PathBuf>,
    fig: Option<&PathBuf>,
    compare_approx: bool,
) -> ExitCode {
    let spec = match io::parse_config_file(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if spec.experiment == Experiment::Ghz {
        return cmd_ghz();
    }
    let result = if compare_approx || fig.is_some() {
        scenarios::run_with_approx(&spec)
    } else {
        scenarios::run(&spec)
    };
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    println!("experiment   {}", spec.experiment.label());
    println!("destination  {}", result.destination.label());
    if let Some(sigma) = result.sigma_z {
        println!("sigma_z      {sigma:+}");
    }
    if let Some((o1, o2)) = result.epr_outcomes {
        println!("outcomes     particle1 {o1:?}, particle2 {o2:?}");
    }
    for rec in &result.records {
        println!("record       {} ({:?})", rec.verdict.label(), rec.channel);
    }
    match result.surreal {
        scenarios::SurrealVerdict::Surreal => println!("surreal      yes"),
        scenarios::SurrealVerdict::NotSurreal => println!("surreal      no"),
        scenarios::SurrealVerdict::NotApplicable => {}
    }
    for e in &result.trajectory.events {
        println!(
            "event        t = {:+.6}  {}  {}",
            e.time,
            e.kind.label(),
            e.note
        );
    }
    if let Some(path) = out {
        if let Err(e) = io::emit_csv(&result, path) {
            eprintln!("csv write failed: {e}");
            return ExitCode::from(1);
        }
        println!("wrote        {}", path.display());
    }
    if let Some(path) = fig {
        let options = FigureOptions {
            compare_approx,
            ..Default::default()
        };
        if let Err(e) = io::emit_figure(&result, path, &options) {
            eprintln!("figure write failed: {e}");
            return ExitCode::from(1);
        }
        println!("wrote        {}", path.display());
    }
    ExitCode::SUCCESS
}

fn cmd_ensemble(config: &PathBuf, samples: usize, seed: u64, out: &PathBuf) -> ExitCode {
    let spec = match io::parse_config_file(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let rows = match scenarios::run_ensemble(&spec, samples, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("ensemble failed: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let mut text = String::from("sample,z0,final_z,destination,sigma_z,capture_time\n");
    let mut up = 0usize;
    for row in &rows {
        let sigma = row
            .sigma_z
            .map(|s| s.to_string())
            .unwrap_or_else(|| "-".into());
        let capture = row
            .capture_time
            .map(|t| t.to_string())
            .unwrap_or_else(|| "-".into());
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.index,
            row.z0,
            row.final_z,
            row.destination.label(),
            sigma,
            capture
        ));
        if matches!(
            row.destination,
            scenarios::Destination::UpBeam | scenarios::Destination::DetectorB
        ) {
            up += 1;
        }
    }
    if let Err(e) = std::fs::write(out, text) {
        eprintln!("csv write failed: {e}");
        return ExitCode::from(1);
    }
    println!(
        "{} samples (seed {seed}): {} up / {} down; wrote {}",
        rows.len(),
        up,
        rows.len() - up,
        out.display()
    );
    ExitCode::SUCCESS
}

fn cmd_ghz() -> ExitCode {
    let table = scenarios::ghz_check();
    println!("GHZ outcome assignments: {} checked", table.assignments.len());
    println!(
        "satisfying all four product equations: {} of {}",
        table.satisfying,
        table.assignments.len()
    );
    println!(
        "product of the four left-hand sides: {:+} (every outcome appears squared)",
        table.lhs_product
    );
    println!(
        "product of the four right-hand sides: {:+}",
        table.rhs_product
    );
    println!("=> no local outcome assignment exists: {:+} != {:+}",
        table.lhs_product, table.rhs_product);
    let worst = table
        .assignments
        .iter()
        .map(|a| a.violated.len())
        .min()
        .unwrap_or(0);
    println!("every assignment violates at least {worst} equation(s)");
    ExitCode::SUCCESS
}

fn cmd_verify() -> ExitCode {
    let reports = pilotwave::verify::run_all();
    let mut ok = true;
    for r in &reports {
        println!("{r}");
        ok &= r.passed;
    }
    if ok {
        println!("all {} criteria passed", reports.len());
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Run {
            config,
            out,
            fig,
            compare_approx,
        } => cmd_run(config, out.as_ref(), fig.as_ref(), *compare_approx),
        Cmd::Ensemble {
            config,
            samples,
            seed,
            out,
        } => cmd_ensemble(config, *samples, *seed, out),
        Cmd::Ghz => cmd_ghz(),
        Cmd::Verify => cmd_verify(),
    }
}
