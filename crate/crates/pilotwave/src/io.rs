//! Run configuration files, CSV trajectory export and SVG figures.
//!
//! Config files are line-oriented UTF-8 `key = value` text with `#`
//! comments; several pairs may share a line. All physical quantities are
//! dimensionless in (a, a/u) units. Unknown keys are rejected with the
//! offending line number.
//!
//! CSV tables carry one row per trajectory sample with the reconstructed
//! horizontal coordinate `x = x0 + u t`, the Bohmian coordinates, the
//! branch weights at the configuration and a region tag; events are
//! appended as `#event,` comment lines.
//!
//! Figures are self-contained SVG: a grayscale density raster (darker
//! shade = higher conditional amplitude at the comoving slice) embedded as
//! a PNG data URI, with the trajectory overlaid as a solid polyline and
//! the weighted-velocity reference dashed when present.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use base64::Engine as _;
use num_complex::Complex64;
use thiserror::Error;

use crate::detectors::{Arm, DetectorKind};
use crate::integrate::{Method, PacketModel, Trajectory};
use crate::scenarios::{
    DetectorConfig, Experiment, InitialPosition, MeasureFirst, RunResult, ScenarioSpec, SpinMode,
    StateInterval,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: amplitudes not normalized: alpha2 + beta2 = {sum}")]
    Normalization { line: usize, sum: f64 },
    #[error("missing required keys: {0}")]
    MissingKeys(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("key `{key}`: `{value}` is not a number"),
    })
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, ConfigError> {
    value.parse::<u64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("key `{key}`: `{value}` is not an integer"),
    })
}

/// Parse a scenario description. Defaults are documented in `--help` and
/// mirror the canonical worked example (alpha2 = 0.4, beta2 = 0.6,
/// lambda = 0.3, T = 2).
pub fn parse_config(text: &str) -> Result<ScenarioSpec, ConfigError> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let eq_count = line.matches('=').count();
        if eq_count == 0 {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        }
        if eq_count == 1 {
            let (k, v) = line.split_once('=').unwrap();
            pairs.push((line_no, k.trim().to_string(), v.trim().to_string()));
        } else {
            // several key=value tokens on one line
            for token in line.split_whitespace() {
                let (k, v) = token.split_once('=').ok_or_else(|| ConfigError::Parse {
                    line: line_no,
                    message: format!("token `{token}` is not key=value"),
                })?;
                if v.contains('=') {
                    return Err(ConfigError::Parse {
                        line: line_no,
                        message: format!("token `{token}` has multiple `=`"),
                    });
                }
                pairs.push((line_no, k.trim().to_string(), v.trim().to_string()));
            }
        }
    }

    let experiment = pairs
        .iter()
        .find(|(_, k, _)| k == "experiment")
        .ok_or_else(|| {
            ConfigError::MissingKeys(
                "experiment (sg | sg_reversed | epr | empty_wave | interferometer | ghz)".into(),
            )
        })?;
    let exp = match experiment.2.as_str() {
        "sg" => Experiment::Sg,
        "sg_reversed" => Experiment::SgReversed,
        "epr" => Experiment::Epr,
        "empty_wave" => Experiment::EmptyWave,
        "interferometer" => Experiment::Interferometer,
        "ghz" => Experiment::Ghz,
        other => {
            return Err(ConfigError::Parse {
                line: experiment.0,
                message: format!("unknown experiment `{other}`"),
            })
        }
    };
    let mut spec = ScenarioSpec::new(exp);
    let mut alpha2 = 0.4;
    let mut beta2 = 0.6;
    let mut alpha_phase = 0.0;
    let mut beta_phase = 0.0;
    let mut amp_line = 0usize;
    let mut lambda: Option<f64> = None;
    let mut det_kind: Option<DetectorKind> = None;
    let mut det_arm = Arm::Lower;
    let mut det_shift: Option<f64> = None;
    let mut ring_radius: Option<f64> = None;
    let mut ring_wavelength: Option<f64> = None;
    let mut neutron_mass_ratio: Option<f64> = None;
    let mut neutron_start: Option<f64> = None;

    for (line, key, value) in &pairs {
        let line = *line;
        match key.as_str() {
            "experiment" => {}
            "alpha2" => {
                alpha2 = parse_f64(line, key, value)?;
                amp_line = line;
            }
            "beta2" => {
                beta2 = parse_f64(line, key, value)?;
                amp_line = line;
            }
            "alpha_phase" => alpha_phase = parse_f64(line, key, value)?,
            "beta_phase" => beta_phase = parse_f64(line, key, value)?,
            "z0" => spec.z0 = InitialPosition::Absolute(parse_f64(line, key, value)?),
            "z0_quantile" => {
                let f = parse_f64(line, key, value)?;
                if f <= 0.0 || f >= 1.0 {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("z0_quantile must be in (0, 1), got {f}"),
                    });
                }
                spec.z0 = InitialPosition::Quantile(f);
            }
            "packet" => {
                spec.packet = match value.as_str() {
                    "rect" => PacketModel::Rect,
                    "gauss" => PacketModel::Gauss,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("unknown packet model `{other}`"),
                        })
                    }
                }
            }
            "spin_mode" => {
                spec.spin_mode = match value.as_str() {
                    "spinful" => SpinMode::Spinful,
                    "spinless" => SpinMode::Spinless,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("unknown spin mode `{other}`"),
                        })
                    }
                }
            }
            "detector" => {
                det_kind = match value.as_str() {
                    "none" => None,
                    "bohmian_position" => Some(DetectorKind::BohmianPosition),
                    "spin_flip" => Some(DetectorKind::SpinFlip),
                    "phase_flip" => Some(DetectorKind::PhaseFlip),
                    "ring_velocity" => Some(DetectorKind::RingVelocity),
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("unknown detector `{other}`"),
                        })
                    }
                }
            }
            "detector_arm" => {
                det_arm = match value.as_str() {
                    "upper" => Arm::Upper,
                    "lower" => Arm::Lower,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("unknown arm `{other}`"),
                        })
                    }
                }
            }
            "detector_shift" => det_shift = Some(parse_f64(line, key, value)?),
            "ring_radius" => ring_radius = Some(parse_f64(line, key, value)?),
            "ring_wavelength" => ring_wavelength = Some(parse_f64(line, key, value)?),
            "neutron_mass_ratio" => neutron_mass_ratio = Some(parse_f64(line, key, value)?),
            "neutron_start" => neutron_start = Some(parse_f64(line, key, value)?),
            "a" => {
                spec.geometry.a = parse_f64(line, key, value)?;
                if spec.geometry.a <= 0.0 {
                    return Err(ConfigError::Parse {
                        line,
                        message: "packet width a must be positive".into(),
                    });
                }
            }
            "u" => spec.geometry.u = parse_f64(line, key, value)?,
            "lambda" => {
                let l = parse_f64(line, key, value)?;
                if l <= 0.0 {
                    return Err(ConfigError::Parse {
                        line,
                        message: "wavelength must be positive".into(),
                    });
                }
                lambda = Some(l);
            }
            "big_t" => spec.geometry.big_t = parse_f64(line, key, value)?,
            "t_end" => spec.t_end = Some(parse_f64(line, key, value)?),
            "method" => {
                spec.method = match value.as_str() {
                    "auto" => None,
                    "piecewise" => Some(Method::PiecewiseAnalytic),
                    "implicit" => Some(Method::ImplicitRoot),
                    "rk4" => Some(Method::Rk4Adaptive),
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("unknown method `{other}`"),
                        })
                    }
                }
            }
            "max_step" => spec.controls.max_step = parse_f64(line, key, value)?,
            "rel_tol" => spec.controls.rel_tol = parse_f64(line, key, value)?,
            "abs_tol" => spec.controls.abs_tol = parse_f64(line, key, value)?,
            "collapse_epsilon" => spec.controls.collapse_epsilon = parse_f64(line, key, value)?,
            "sample_step" => spec.controls.sample_step = parse_f64(line, key, value)?,
            "seed" => spec.rng_seed = parse_u64(line, key, value)?,
            "z1" => spec.epr_z1 = parse_f64(line, key, value)?,
            "z2" => spec.epr_z2 = parse_f64(line, key, value)?,
            "measure_first" => {
                spec.epr_first = match value.as_str() {
                    "1" => MeasureFirst::Particle1,
                    "2" => MeasureFirst::Particle2,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("measure_first must be 1 or 2, got `{other}`"),
                        })
                    }
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.clone(),
                })
            }
        }
    }

    let sum = alpha2 + beta2;
    if (sum - 1.0).abs() > 1e-12 {
        return Err(ConfigError::Normalization {
            line: amp_line,
            sum,
        });
    }
    if alpha2 < 0.0 || beta2 < 0.0 {
        return Err(ConfigError::Parse {
            line: amp_line,
            message: "alpha2 and beta2 must be nonnegative".into(),
        });
    }
    spec.alpha = Complex64::from_polar(alpha2.sqrt(), alpha_phase);
    spec.beta = Complex64::from_polar(beta2.sqrt(), beta_phase);
    if let Some(l) = lambda {
        spec.geometry.k = 2.0 * std::f64::consts::PI / l;
    }
    if let Some(kind) = det_kind {
        let mut det = DetectorConfig::new(kind, det_arm);
        if let Some(b) = det_shift {
            det.shift = b;
        }
        if let Some(r) = ring_radius {
            det.ring_radius = r;
        }
        if let Some(l) = ring_wavelength {
            det.ring_wavelength = l;
        }
        if let Some(m) = neutron_mass_ratio {
            det.neutron_mass_ratio = m;
        }
        if let Some(s) = neutron_start {
            det.neutron_start = s;
        }
        spec.detector = Some(det);
    }
    Ok(spec)
}

pub fn parse_config_file(path: impl AsRef<Path>) -> Result<ScenarioSpec, IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

/// Serialize a spec back into the config format; `parse_config` of the
/// output reproduces the spec.
pub fn serialize_config(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment = {}", spec.experiment.label());
    let _ = writeln!(out, "alpha2 = {}", spec.alpha.norm_sqr());
    let _ = writeln!(out, "beta2 = {}", spec.beta.norm_sqr());
    let _ = writeln!(out, "alpha_phase = {}", spec.alpha.arg());
    let _ = writeln!(out, "beta_phase = {}", spec.beta.arg());
    match spec.z0 {
        InitialPosition::Absolute(z) => {
            let _ = writeln!(out, "z0 = {z}");
        }
        InitialPosition::Quantile(f) => {
            let _ = writeln!(out, "z0_quantile = {f}");
        }
    }
    let _ = writeln!(
        out,
        "packet = {}",
        match spec.packet {
            PacketModel::Rect => "rect",
            PacketModel::Gauss => "gauss",
        }
    );
    let _ = writeln!(
        out,
        "spin_mode = {}",
        match spec.spin_mode {
            SpinMode::Spinful => "spinful",
            SpinMode::Spinless => "spinless",
        }
    );
    match &spec.detector {
        None => {
            let _ = writeln!(out, "detector = none");
        }
        Some(det) => {
            let _ = writeln!(out, "detector = {}", det.kind.label());
            let _ = writeln!(out, "detector_arm = {}", det.arm.label());
            let _ = writeln!(out, "detector_shift = {}", det.shift);
            let _ = writeln!(out, "ring_radius = {}", det.ring_radius);
            let _ = writeln!(out, "ring_wavelength = {}", det.ring_wavelength);
            let _ = writeln!(out, "neutron_mass_ratio = {}", det.neutron_mass_ratio);
            let _ = writeln!(out, "neutron_start = {}", det.neutron_start);
        }
    }
    let _ = writeln!(out, "a = {}", spec.geometry.a);
    let _ = writeln!(out, "u = {}", spec.geometry.u);
    let _ = writeln!(out, "lambda = {}", spec.geometry.lambda());
    let _ = writeln!(out, "big_t = {}", spec.geometry.big_t);
    if let Some(t) = spec.t_end {
        let _ = writeln!(out, "t_end = {t}");
    }
    let _ = writeln!(
        out,
        "method = {}",
        match spec.method {
            None => "auto",
            Some(Method::PiecewiseAnalytic) => "piecewise",
            Some(Method::ImplicitRoot) => "implicit",
            Some(Method::Rk4Adaptive) => "rk4",
        }
    );
    let _ = writeln!(out, "max_step = {}", spec.controls.max_step);
    let _ = writeln!(out, "rel_tol = {}", spec.controls.rel_tol);
    let _ = writeln!(out, "abs_tol = {}", spec.controls.abs_tol);
    let _ = writeln!(out, "collapse_epsilon = {}", spec.controls.collapse_epsilon);
    let _ = writeln!(out, "sample_step = {}", spec.controls.sample_step);
    let _ = writeln!(out, "seed = {}", spec.rng_seed);
    let _ = writeln!(out, "z1 = {}", spec.epr_z1);
    let _ = writeln!(out, "z2 = {}", spec.epr_z2);
    let _ = writeln!(
        out,
        "measure_first = {}",
        match spec.epr_first {
            MeasureFirst::Particle1 => 1,
            MeasureFirst::Particle2 => 2,
        }
    );
    out
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

fn interval_for(timeline: &[StateInterval], t: f64) -> &StateInterval {
    timeline
        .iter()
        .find(|iv| t >= iv.t_start && t <= iv.t_end)
        .unwrap_or_else(|| timeline.last().expect("empty timeline"))
}

/// Branch weights (|amplitude|^2 per stable tag) at a sample.
fn weights_at(result: &RunResult, t: f64, config: &crate::state::Configuration) -> Vec<f64> {
    let iv = interval_for(&result.timeline, t);
    let n_tags = result
        .timeline
        .iter()
        .map(|iv| iv.state.branches.len())
        .max()
        .unwrap_or(0);
    let mut w = vec![0.0; n_tags];
    for b in &iv.state.branches {
        w[b.tag] = b.value_at(&config.0, t, &iv.state.hbar_over_m).norm_sqr();
    }
    w
}

fn region_tags(result: &RunResult) -> Vec<&'static str> {
    // A sample sits in the overlap when at least two branches carry
    // non-negligible weight there; after the last overlap sample the tag
    // flips from ride to post.
    let flags: Vec<bool> = result
        .trajectory
        .samples
        .iter()
        .map(|(t, c)| {
            let w = weights_at(result, *t, c);
            let max = w.iter().cloned().fold(0.0, f64::max);
            max > 0.0 && w.iter().filter(|&&x| x > 1e-6 * max).count() >= 2
        })
        .collect();
    let last_overlap = flags.iter().rposition(|&f| f);
    flags
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            if f {
                "overlap"
            } else if last_overlap.is_none_or(|l| i > l) {
                "post"
            } else {
                "ride"
            }
        })
        .collect()
}

/// Write the trajectory table: `t, x, <coordinates>, w<tag>..., region`,
/// with events appended as `#event,` comment lines. `x0` anchors the
/// reconstructed horizontal coordinate `x = x0 + u t`.
pub fn write_csv(
    result: &RunResult,
    x0: f64,
    out: &mut impl std::io::Write,
) -> Result<(), IoError> {
    let u = result.spec.geometry.u;
    let n_tags = result
        .timeline
        .iter()
        .map(|iv| iv.state.branches.len())
        .max()
        .unwrap_or(0);
    let mut header = String::from("t,x");
    for label in &result.dof_labels {
        let _ = write!(header, ",{label}");
    }
    for tag in 0..n_tags {
        let _ = write!(header, ",w{tag}");
    }
    header.push_str(",region");
    writeln!(out, "{header}")?;
    let regions = region_tags(result);
    for ((t, config), region) in result.trajectory.samples.iter().zip(&regions) {
        let mut row = format!("{},{}", t, x0 + u * t);
        for x in &config.0 {
            let _ = write!(row, ",{x}");
        }
        for w in weights_at(result, *t, config) {
            let _ = write!(row, ",{w}");
        }
        let _ = write!(row, ",{region}");
        writeln!(out, "{row}")?;
    }
    for e in &result.trajectory.events {
        let branch = e
            .branch
            .map(|b| b.to_string())
            .unwrap_or_else(|| "-".into());
        let note = e.note.replace(',', ";");
        writeln!(
            out,
            "#event,{},{},{},{}",
            e.time,
            e.kind.label(),
            branch,
            note
        )?;
    }
    Ok(())
}

pub fn emit_csv(result: &RunResult, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(result, 0.0, &mut file)?;
    file.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG figures with an embedded density raster
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FigureOptions {
    /// Raster resolution of the density layer.
    pub nx: u32,
    pub nz: u32,
    /// Density-shading gamma; larger values darken faint structure.
    pub gamma: f64,
    /// Overlay the weighted-velocity reference (dashed) when present.
    pub compare_approx: bool,
    pub x0: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            nx: 480,
            nz: 360,
            gamma: 1.0,
            compare_approx: true,
            x0: 0.0,
        }
    }
}

/// Conditional amplitude |psi| of the primary dof at (z, t), the other
/// coordinates fixed at their Bohmian trajectory values.
pub fn conditional_amplitude(result: &RunResult, z: f64, t: f64) -> f64 {
    let iv = interval_for(&result.timeline, t);
    let state = iv.state.at_time(t);
    let mut config = result.trajectory.config_at(t);
    config.0[0] = z;
    state
        .evaluate(&config)
        .map(|amp| amp.density().sqrt())
        .unwrap_or(0.0)
}

/// Vertical extent covered by the packets and the trajectory.
fn z_range(result: &RunResult) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, c) in &result.trajectory.samples {
        lo = lo.min(c[0]);
        hi = hi.max(c[0]);
    }
    for iv in &result.timeline {
        for t in [iv.t_start, iv.t_end] {
            for b in &iv.state.branches {
                let f = &b.factors[0];
                let c = f.center_at(t);
                let half = match f.kind {
                    crate::state::FactorKind::Gauss => 2.0 * f.width,
                    _ => 0.75 * f.width,
                };
                lo = lo.min(c - half);
                hi = hi.max(c + half);
            }
        }
    }
    let pad = 0.05 * (hi - lo).max(1.0);
    (lo - pad, hi + pad)
}

fn polyline_points(
    traj: &Trajectory,
    t0: f64,
    t1: f64,
    z_lo: f64,
    z_hi: f64,
    w: f64,
    h: f64,
) -> String {
    let mut pts = String::new();
    for (t, c) in &traj.samples {
        let x = (t - t0) / (t1 - t0) * w;
        let y = (z_hi - c[0]) / (z_hi - z_lo) * h;
        let _ = write!(pts, "{x:.2},{y:.2} ");
    }
    pts.trim_end().to_string()
}

/// Render the run as a self-contained SVG file.
pub fn emit_figure(
    result: &RunResult,
    path: impl AsRef<Path>,
    options: &FigureOptions,
) -> Result<(), IoError> {
    let t0 = result.trajectory.start_time();
    let t1 = result.trajectory.end_time();
    let (z_lo, z_hi) = z_range(result);
    let (nx, nz) = (options.nx.max(8), options.nz.max(8));

    // density raster
    let mut values = vec![0.0f64; (nx * nz) as usize];
    let mut max_amp = 0.0f64;
    for i in 0..nx {
        let t = t0 + (i as f64 + 0.5) / nx as f64 * (t1 - t0);
        for j in 0..nz {
            let z = z_hi - (j as f64 + 0.5) / nz as f64 * (z_hi - z_lo);
            let a = conditional_amplitude(result, z, t);
            values[(j * nx + i) as usize] = a;
            max_amp = max_amp.max(a);
        }
    }
    let mut img = image::GrayImage::new(nx, nz);
    for (idx, pixel) in img.pixels_mut().enumerate() {
        let a = if max_amp > 0.0 {
            (values[idx] / max_amp).powf(options.gamma)
        } else {
            0.0
        };
        pixel.0 = [(255.0 * (1.0 - 0.85 * a)) as u8];
    }
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| {
            IoError::Io(std::io::Error::other(
                e.to_string(),
            ))
        })?;
    let data = base64::engine::general_purpose::STANDARD.encode(&png);

    // layout
    let (plot_w, plot_h) = (560.0, 420.0);
    let (margin_l, margin_t, margin_r, margin_b) = (56.0, 16.0, 16.0, 44.0);
    let total_w = plot_w + margin_l + margin_r;
    let total_h = plot_h + margin_t + margin_b;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{total_w}" height="{total_h}" fill="white"/>"#
    );
    let _ = writeln!(svg, r#"<g transform="translate({margin_l},{margin_t})">"#);
    let _ = writeln!(
        svg,
        r#"<image x="0" y="0" width="{plot_w}" height="{plot_h}" preserveAspectRatio="none" href="data:image/png;base64,{data}"/>"#
    );
    if options.compare_approx {
        if let Some(approx) = &result.approx_trajectory {
            let pts = polyline_points(approx, t0, t1, z_lo, z_hi, plot_w, plot_h);
            let _ = writeln!(
                svg,
                r##"<polyline points="{pts}" fill="none" stroke="#555555" stroke-width="1.4" stroke-dasharray="6 4"/>"##
            );
        }
    }
    let pts = polyline_points(&result.trajectory, t0, t1, z_lo, z_hi, plot_w, plot_h);
    let _ = writeln!(
        svg,
        r#"<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.8"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{plot_w}" height="{plot_h}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    // axis labels: x = x0 + u t on the horizontal axis, z on the vertical
    let u = result.spec.geometry.u;
    let x_left = options.x0 + u * t0;
    let x_right = options.x0 + u * t1;
    let _ = writeln!(
        svg,
        r#"<text x="0" y="{y}" font-family="sans-serif" font-size="12">{x_left:.2}</text>"#,
        y = plot_h + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="end">{x_right:.2}</text>"#,
        x = plot_w,
        y = plot_h + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="13" text-anchor="middle">x  [a]</text>"#,
        x = plot_w / 2.0,
        y = plot_h + 34.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="-8" y="10" font-family="sans-serif" font-size="12" text-anchor="end">{z_hi:.2}</text>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="-8" y="{y}" font-family="sans-serif" font-size="12" text-anchor="end">{z_lo:.2}</text>"#,
        y = plot_h
    );
    let _ = writeln!(
        svg,
        r#"<text x="-34" y="{y}" font-family="sans-serif" font-size="13" transform="rotate(-90 -34 {y})" text-anchor="middle">z  [a]</text>"#,
        y = plot_h / 2.0
    );
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    std::fs::write(path, svg)?;
    Ok(())
}
