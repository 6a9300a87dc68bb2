//! `notchwall`: command line front end.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 for configuration and input errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod io;
mod pipeline;
mod plot;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use notchwall::energy::{EnergyReport, ExchangeForm, Functional};
use notchwall::profile::change_of_variable;
use notchwall::solver::shoot_detailed;
use notchwall::transforms::{apply_chain, Transform, TransformReport};
use notchwall::ProfileSpec;

use config::{DynamicsConfig, GridConfig, PathConfig, RunConfig, SpectrumConfig, VerifyConfig};
use io::{read_field, same_grid, write_columns, write_json};
use pipeline::{execute, Report, Sinks};

#[derive(Parser)]
#[command(
    name = "notchwall",
    version,
    about = "Domain walls in notched nanowires"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Profile file (TOML: kind, s0, a, ramp, nodes).
    #[arg(long)]
    profile: PathBuf,
    /// Grid as `L,n` (n odd).
    #[arg(long, value_parser = parse_grid, conflicts_with = "spacing")]
    grid: Option<(f64, usize)>,
    /// Grid spacing, with `L = a + 15`.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run everything a config file asks for.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a config once per sweep entry, in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Minimize the energy.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Wall CSV (x, theta, dtheta, defect).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Initial field CSV.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, value_parser = parse_form, default_value = "quadratic")]
        form: ExchangeForm,
    },
    /// Solve the boundary value problem by shooting.
    Shoot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Zero of the wall.
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        /// Initial slope guess.
        #[arg(long, default_value_t = 1.0)]
        slope: f64,
    },
    /// Apply a chain of transforms to a field.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Comma separated: threshold, reflect, envelope, symmetrize, localize.
        #[arg(long, value_parser = parse_transforms, value_delimiter = ',', required = true)]
        chain: Vec<Transform>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// LLG relaxation of a perturbed wall.
    Dynamics {
        #[command(flatten)]
        common: Common,
        /// Wall to perturb; solved with the chord exchange when absent.
        #[arg(long)]
        init: Option<PathBuf>,
        /// `amplitude,width,seed`; the seed picks the transverse direction.
        #[arg(long, value_parser = parse_perturb)]
        perturb: Option<(f64, f64, u64)>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        /// Trajectory CSV (t, energy, distance_mod_rotation).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy profile of the composite path between two walls.
    Path {
        #[command(flatten)]
        common: Common,
        /// Start wall; the end wall when absent.
        #[arg(long)]
        from: Option<PathBuf>,
        /// End wall; solved when absent.
        #[arg(long)]
        to: Option<PathBuf>,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        /// Path CSV (lambda, energy).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral audit of a wall.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Wall CSV; solved when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        probes: usize,
    },
    /// Check a wall. Without --monotone, --decay or --defect, runs all three.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Wall CSV; solved when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        monotone: bool,
        #[arg(long)]
        decay: bool,
        #[arg(long)]
        defect: bool,
        #[arg(long)]
        odd: bool,
        /// Multi-start uniqueness with this many starts.
        #[arg(long)]
        uniqueness: Option<usize>,
        /// Add the spectral audit.
        #[arg(long)]
        spectrum: bool,
    },
    /// Dump the profile and change of variable as CSV (x, s, y).
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grid(s: &str) -> Result<(f64, usize), String> {
    let (l, n) = s.split_once(',').ok_or("expected L,n")?;
    let l: f64 = l.trim().parse().map_err(|e| format!("L: {e}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("n: {e}"))?;
    Ok((l, n))
}

fn parse_form(s: &str) -> Result<ExchangeForm, String> {
    match s {
        "quadratic" => Ok(ExchangeForm::Quadratic),
        "chord" => Ok(ExchangeForm::Chord),
        _ => Err(format!("unknown form '{s}' (quadratic or chord)")),
    }
}

fn parse_transforms(s: &str) -> Result<Transform, String> {
    s.parse().map_err(|e: notchwall::Error| e.to_string())
}

fn parse_perturb(s: &str) -> Result<(f64, f64, u64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [amp, width, seed] = parts[..] else {
        return Err("expected amplitude,width,seed".into());
    };
    Ok((
        amp.parse().map_err(|e| format!("amplitude: {e}"))?,
        width.parse().map_err(|e| format!("width: {e}"))?,
        seed.parse().map_err(|e| format!("seed: {e}"))?,
    ))
}

impl Common {
    fn config(&self) -> RunConfig {
        let mut cfg = RunConfig {
            profile_file: Some(self.profile.clone()),
            seed: self.seed,
            ..RunConfig::new(ProfileSpec::CosineDip { s0: 1.0, a: 1.0 })
        };
        cfg.profile = None;
        cfg.grid = match (self.grid, self.spacing) {
            (Some((l, n)), _) => GridConfig {
                half_length: Some(l),
                n: Some(n),
                h: None,
            },
            (None, Some(h)) => GridConfig {
                h: Some(h),
                ..GridConfig::default()
            },
            (None, None) => GridConfig::default(),
        };
        cfg
    }

    fn sinks(&self) -> Sinks {
        Sinks {
            report: self.report.clone(),
            ..Sinks::default()
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_out(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Prints the report when it was not written to a file.
fn emit<T: Serialize>(report: &T, file: &Option<PathBuf>) -> Result<()> {
    if let Some(p) = file {
        write_json(p, report)
    } else {
        print_out(&io::to_json(report)?)
    }
}

fn finish(report: &Report, sinks: &Sinks) -> Result<bool> {
    if sinks.report.is_none() {
        print_out(&io::to_json(report)?)?;
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "check failed: {} = {:e} (limit {:e}): {}",
            c.name, c.value, c.limit, c.detail
        );
    }
    Ok(report.passed)
}

fn run_pipeline(command: &str, cfg: RunConfig, sinks: Sinks) -> Result<bool> {
    let (cfg, profile) = cfg.resolve()?;
    let report = execute(command, cfg, &profile, &sinks)?;
    finish(&report, &sinks)
}

#[derive(Serialize)]
struct SweepEntry {
    index: usize,
    dir: String,
    profile: Option<ProfileSpec>,
    energy: f64,
    alpha: Option<f64>,
    min_decay_margin: Option<f64>,
    path_margin: Option<f64>,
    failed_checks: Vec<String>,
    passed: bool,
}

#[derive(Serialize)]
struct SweepSummary {
    config: RunConfig,
    runs: Vec<SweepEntry>,
    passed: bool,
}

fn with_s0(spec: &ProfileSpec, s0: f64) -> Result<ProfileSpec> {
    Ok(match spec {
        ProfileSpec::Plateau { a, ramp, .. } => ProfileSpec::Plateau {
            s0,
            a: *a,
            ramp: *ramp,
        },
        ProfileSpec::CosineDip { a, .. } => ProfileSpec::CosineDip { s0, a: *a },
        ProfileSpec::PiecewiseLinear { .. } => {
            bail!("an s0 sweep needs a plateau or cosine_dip base profile")
        }
    })
}

fn sweep(path: &Path) -> Result<bool> {
    let base = RunConfig::load(path)?;
    let Some(spec) = base.sweep.clone() else {
        bail!("{}: missing [sweep] table", path.display());
    };
    let (mut resolved_base, _) = RunConfig {
        sweep: None,
        ..base.clone()
    }
    .resolve()?;
    let base_profile = resolved_base.profile.clone().context("profile")?;
    let mut profiles = spec.profiles.clone();
    for &s0 in &spec.s0 {
        profiles.push(with_s0(&base_profile, s0)?);
    }
    if profiles.is_empty() {
        bail!("{}: the sweep has no entries", path.display());
    }
    // every variant is validated before anything is written
    let runs = profiles
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let cfg = RunConfig {
                profile: Some(p),
                profile_file: None,
                output_dir: base.output_dir.join(format!("run_{k:03}")),
                sweep: None,
                ..resolved_base.clone()
            };
            cfg.resolve().with_context(|| format!("sweep entry {k}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = runs
        .into_par_iter()
        .map(|(cfg, profile)| {
            let sinks = Sinks::in_dir(&cfg.output_dir);
            execute("sweep", cfg, &profile, &sinks)
        })
        .collect::<Result<Vec<Report>>>()?;
    let entries: Vec<SweepEntry> = results
        .iter()
        .enumerate()
        .map(|(k, r)| SweepEntry {
            index: k,
            dir: format!("run_{k:03}"),
            profile: r.config.profile.clone(),
            energy: r.wall.energy.total,
            alpha: r.spectrum.as_ref().map(|s| s.alpha),
            min_decay_margin: r.decay.as_ref().map(|d| d.min_margin),
            path_margin: r.path.as_ref().map(|p| p.margin),
            failed_checks: r
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.clone())
                .collect(),
            passed: r.passed,
        })
        .collect();
    let passed = entries.iter().all(|e| e.passed);
    resolved_base.sweep = Some(spec);
    resolved_base.output_dir = base.output_dir.clone();
    let summary = SweepSummary {
        config: resolved_base,
        runs: entries,
        passed,
    };
    write_json(&base.output_dir.join("summary.json"), &summary)?;
    for e in summary.runs.iter().filter(|e| !e.passed) {
        eprintln!("run {} failed: {}", e.index, e.failed_checks.join(", "));
    }
    Ok(passed)
}

#[derive(Serialize)]
struct ShootConfig {
    profile: ProfileSpec,
    grid: GridConfig,
    seed: u64,
    x0: f64,
    slope: f64,
}

#[derive(Serialize)]
struct ShootReport {
    command: &'static str,
    seed: u64,
    config: ShootConfig,
    x0: f64,
    slope_right: f64,
    slope_left: f64,
    mismatch_right: f64,
    mismatch_left: f64,
    energy: EnergyReport,
}

#[derive(Serialize)]
struct TransformConfig {
    profile: ProfileSpec,
    grid: GridConfig,
    seed: u64,
    input: PathBuf,
    chain: Vec<Transform>,
}

#[derive(Serialize)]
struct TransformOutput {
    command: &'static str,
    seed: u64,
    config: TransformConfig,
    steps: Vec<TransformReport>,
    /// Largest energy increase over one step.
    max_rise: f64,
    passed: bool,
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            if cfg.sweep.is_some() {
                bail!(
                    "{}: has a [sweep] table; use the sweep command",
                    config.display()
                );
            }
            let sinks = Sinks::in_dir(&cfg.output_dir);
            run_pipeline("run", cfg, sinks)
        }
        Command::Sweep { config } => sweep(&config),
        Command::Solve {
            common,
            out,
            init,
            form,
        } => {
            let mut cfg = common.config();
            cfg.init = init;
            cfg.solver.form = form;
            let sinks = Sinks {
                wall: out,
                ..common.sinks()
            };
            run_pipeline("solve", cfg, sinks)
        }
        Command::Verify {
            common,
            input,
            monotone,
            decay,
            defect,
            odd,
            uniqueness,
            spectrum,
        } => {
            let mut cfg = common.config();
            cfg.wall = input;
            let all = !(monotone || decay || defect);
            cfg.verify = Some(VerifyConfig {
                monotone: monotone || all,
                decay: decay || all,
                defect: defect || all,
                odd,
                uniqueness_starts: uniqueness.unwrap_or(0),
                ..VerifyConfig::default()
            });
            cfg.spectrum = spectrum.then(SpectrumConfig::default);
            run_pipeline("verify", cfg, common.sinks())
        }
        Command::Spectrum {
            common,
            input,
            probes,
        } => {
            let mut cfg = common.config();
            cfg.wall = input;
            cfg.spectrum = Some(SpectrumConfig {
                probes,
                ..SpectrumConfig::default()
            });
            run_pipeline("spectrum", cfg, common.sinks())
        }
        Command::Dynamics {
            common,
            init,
            perturb,
            alpha,
            dt,
            t_end,
            out,
        } => {
            let mut cfg = common.config();
            if init.is_none() {
                // the chord wall is the exact rest state of the scheme
                cfg.solver.form = ExchangeForm::Chord;
                if cfg.grid == GridConfig::default() {
                    cfg.grid.h = DynamicsConfig::default().h;
                }
            }
            cfg.wall = init;
            let mut d = DynamicsConfig {
                h: None,
                alpha_gilbert: alpha,
                dt,
                t_end,
                ..DynamicsConfig::default()
            };
            if let Some((amp, width, seed)) = perturb {
                d.amplitude = amp;
                d.width = width;
                cfg.seed = seed;
            }
            cfg.dynamics = Some(d);
            let sinks = Sinks {
                trajectory: out,
                ..common.sinks()
            };
            run_pipeline("dynamics", cfg, sinks)
        }
        Command::Path {
            common,
            from,
            to,
            samples,
            out,
        } => {
            let mut cfg = common.config();
            cfg.wall = to;
            cfg.path = Some(PathConfig {
                from,
                samples,
                ..PathConfig::default()
            });
            let sinks = Sinks {
                path: out,
                ..common.sinks()
            };
            run_pipeline("path", cfg, sinks)
        }
        Command::Shoot {
            common,
            out,
            x0,
            slope,
        } => {
            let (cfg, profile) = common.config().resolve()?;
            let grid = cfg.grid.build(&profile)?;
            let r = shoot_detailed(&profile, &grid, x0, slope)?;
            let f = Functional::new(&profile, &grid);
            if let Some(p) = &out {
                let dtheta = notchwall::energy::derivative(&r.theta.values, grid.spacing());
                let defect = f.defect(&r.theta.values);
                write_columns(
                    p,
                    &["x", "theta", "dtheta", "defect"],
                    &[grid.nodes(), &r.theta.values, &dtheta, &defect],
                )?;
            }
            let report = ShootReport {
                command: "shoot",
                seed: cfg.seed,
                energy: f.report(&r.theta.values),
                config: ShootConfig {
                    profile: cfg.profile.clone().context("profile")?,
                    grid: GridConfig::resolved(&grid),
                    seed: cfg.seed,
                    x0,
                    slope,
                },
                x0: r.x0,
                slope_right: r.slope_right,
                slope_left: r.slope_left,
                mismatch_right: r.mismatch_right,
                mismatch_left: r.mismatch_left,
            };
            emit(&report, &common.report)?;
            Ok(true)
        }
        Command::Transform {
            common,
            input,
            chain,
            out,
        } => {
            if chain.is_empty() {
                bail!("--chain needs at least one transform");
            }
            let explicit_grid = common.grid.is_some() || common.spacing.is_some();
            let (cfg, profile) = common.config().resolve()?;
            let field = read_field(&input)?;
            if explicit_grid && !same_grid(&cfg.grid.build(&profile)?, &field.grid) {
                bail!("{}: grid does not match --grid/--spacing", input.display());
            }
            let grid = field.grid;
            let (result, steps) = apply_chain(&chain, &field.theta, &profile, &grid)?;
            if let Some(p) = &out {
                write_columns(p, &["x", "theta"], &[grid.nodes(), &result.values])?;
            }
            let max_rise = steps
                .iter()
                .map(|s| s.energy_after - s.energy_before)
                .fold(f64::NEG_INFINITY, f64::max);
            let passed = max_rise <= 1e-12;
            let report = TransformOutput {
                command: "transform",
                seed: cfg.seed,
                config: TransformConfig {
                    profile: cfg.profile.clone().context("profile")?,
                    grid: GridConfig::resolved(&grid),
                    seed: cfg.seed,
                    input,
                    chain,
                },
                steps,
                max_rise,
                passed,
            };
            emit(&report, &common.report)?;
            if !passed {
                eprintln!("check failed: a transform raised the energy by {max_rise:e}");
            }
            Ok(passed)
        }
        Command::Profile { common, out } => {
            let (cfg, profile) = common.config().resolve()?;
            let grid = cfg.grid.build(&profile)?;
            let cov = change_of_variable(&profile, &grid);
            let s = profile.sample(&grid);
            match &out {
                Some(p) => write_columns(p, &["x", "s", "y"], &[grid.nodes(), &s, cov.forward()])?,
                None => {
                    let mut text = String::from("x,s,y\n");
                    for ((x, s), y) in grid.nodes().iter().zip(&s).zip(cov.forward()) {
                        text.push_str(&format!("{x},{s},{y}\n"));
                    }
                    print_out(&text)?;
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
