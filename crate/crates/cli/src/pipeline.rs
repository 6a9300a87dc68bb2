//! Stages of a run and the report they fill.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use notchwall::dynamics::{perturbed_wall, relax, stable_dt, LLGOptions};
use notchwall::energy::{derivative, EnergyReport, ExchangeForm, Functional};
use notchwall::paths::{composite_path, NOTCHLESS_ENERGY};
use notchwall::profile::{change_of_variable, classify, ProfileClass, DEFAULT_CLASS_TOL};
use notchwall::solver::{
    decay_check, default_init, minimize, multi_start_uniqueness, SolveOptions, UniquenessReport,
    Verdict,
};
use notchwall::spectral::{audit, SpectralReport};
use notchwall::{AngleField, Grid, NotchProfile};

use crate::config::{GridConfig, RunConfig};
use crate::io::{read_field, same_grid, write_columns, write_json};
use crate::plot;

/// One pass/fail verification.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
            limit,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WallSummary {
    /// `solved` or the file the wall was read from.
    pub source: String,
    pub energy: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    pub monotone: bool,
    pub odd_defect: f64,
    pub zero: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySummary {
    pub min_margin: f64,
    pub at_x: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicsSummary {
    pub nodes: usize,
    pub h: f64,
    pub dt: f64,
    pub direction: f64,
    pub steps: usize,
    pub final_time: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub wall_energy: f64,
    /// Largest energy increase between recorded samples.
    pub max_energy_rise: f64,
    pub final_distance: f64,
    pub final_phi: f64,
    pub residual: f64,
    pub max_halvings: u32,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathSummary {
    pub from: String,
    pub x0: f64,
    pub xs: f64,
    pub max_energy: f64,
    pub argmax_lambda: f64,
    pub translated_energy: f64,
    pub margin: f64,
    pub samples: usize,
    pub endpoint_grad_norms: [f64; 2],
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    /// The resolved configuration of the run.
    pub config: RunConfig,
    pub profile_class: ProfileClass,
    pub wall: WallSummary,
    pub decay: Option<DecaySummary>,
    pub uniqueness: Option<UniquenessReport>,
    pub spectrum: Option<SpectralReport>,
    pub dynamics: Option<DynamicsSummary>,
    pub path: Option<PathSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub outputs: Vec<String>,
}

/// Where the artifacts of a run go. Unset entries are not written.
#[derive(Clone, Debug, Default)]
pub struct Sinks {
    pub report: Option<PathBuf>,
    pub wall: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub decay: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub path: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

impl Sinks {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            report: Some(dir.join("report.json")),
            wall: Some(dir.join("wall.csv")),
            profile: Some(dir.join("profile.csv")),
            decay: Some(dir.join("decay.csv")),
            trajectory: Some(dir.join("trajectory.csv")),
            path: Some(dir.join("path.csv")),
            plot: Some(dir.join("plot.py")),
        }
    }
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(
        || p.display().to_string(),
        |f| f.to_string_lossy().into_owned(),
    )
}

/// Reads a field file on the run grid, or adopts its grid when the config
/// leaves the grid open.
fn field_on(path: &Path, grid: &mut Option<Grid>) -> Result<AngleField> {
    let f = read_field(path)?;
    match grid {
        Some(g) if !same_grid(g, &f.grid) => bail!(
            "{}: grid L = {}, n = {} does not match the run grid L = {}, n = {}",
            path.display(),
            f.grid.half_length(),
            f.grid.len(),
            g.half_length(),
            g.len()
        ),
        Some(_) => {}
        None => *grid = Some(f.grid),
    }
    Ok(f.theta)
}

fn grid_is_open(g: &GridConfig) -> bool {
    g.half_length.is_none() && g.n.is_none() && g.h.is_none()
}

fn solve_wall(
    profile: &NotchProfile,
    grid: &Grid,
    init: Option<&AngleField>,
    opts: &SolveOptions,
) -> Result<(AngleField, WallSummary)> {
    let start = init.cloned().unwrap_or_else(|| default_init(profile, grid));
    let r = minimize(profile, grid, &start, opts)?;
    let summary = WallSummary {
        source: "solved".into(),
        energy: r.report,
        iterations: r.iterations,
        converged: r.converged,
        monotone: r.monotone,
        odd_defect: r.odd_defect,
        zero: r.theta.first_zero(grid),
    };
    Ok((r.theta, summary))
}

/// Runs every stage the config asks for and writes the artifacts.
///
/// Returns the report; `report.passed` is the conjunction of all checks.
pub fn execute(
    command: &str,
    cfg: RunConfig,
    profile: &NotchProfile,
    sinks: &Sinks,
) -> Result<Report> {
    let mut cfg = cfg;
    let mut grid = if grid_is_open(&cfg.grid) && (cfg.wall.is_some() || cfg.init.is_some()) {
        None
    } else {
        Some(cfg.grid.build(profile)?)
    };
    let given_wall = cfg
        .wall
        .as_deref()
        .map(|p| field_on(p, &mut grid))
        .transpose()?;
    let init = cfg
        .init
        .as_deref()
        .map(|p| field_on(p, &mut grid))
        .transpose()?;
    let grid = match grid {
        Some(g) => g,
        None => cfg.grid.build(profile)?,
    };
    cfg.grid = GridConfig::resolved(&grid);
    let h = grid.spacing();
    let f = Functional::with_form(profile, &grid, cfg.solver.form);
    let mut checks = Vec::new();

    let (theta, wall) = match (given_wall, &cfg.wall) {
        (Some(t), Some(path)) => {
            let summary = WallSummary {
                source: display_name(path),
                energy: f.report(&t.values),
                iterations: 0,
                converged: f.grad_norm(&t.values) <= cfg.solver.grad_tol,
                monotone: t.is_nondecreasing(1e-10),
                odd_defect: t.odd_defect(),
                zero: t.first_zero(&grid),
            };
            (t, summary)
        }
        _ => {
            let (t, s) = solve_wall(profile, &grid, init.as_ref(), &cfg.solver)?;
            checks.push(Check::new(
                "solver_converged",
                s.converged,
                s.energy.grad_norm,
                cfg.solver.grad_tol,
                format!("{} iterations", s.iterations),
            ));
            (t, s)
        }
    };

    let class = classify(profile, DEFAULT_CLASS_TOL);
    let margins = decay_check(&theta, profile, &grid)?;
    let (imin, min_margin) =
        margins.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc },
        );
    let mut decay = None;
    let mut uniqueness = None;

    if let Some(v) = &cfg.verify {
        if v.monotone {
            let d = theta.monotonicity_defect();
            checks.push(Check::new(
                "monotone",
                d <= v.monotone_tol,
                d,
                v.monotone_tol,
                "largest decrease between nodes",
            ));
        }
        if v.decay {
            decay = Some(DecaySummary {
                min_margin,
                at_x: grid.nodes()[imin],
            });
            checks.push(Check::new(
                "decay",
                min_margin >= -v.decay_tol,
                min_margin,
                -v.decay_tol,
                format!(
                    "smallest margin of the decay bound, at x = {:.6}",
                    grid.nodes()[imin]
                ),
            ));
        }
        if v.defect {
            let tol = v.defect_tol.unwrap_or(10.0 * h * h);
            let d = f.defect(&theta.values);
            let a = profile.a();
            let inside = d
                .iter()
                .zip(grid.nodes())
                .filter(|(_, x)| x.abs() <= a)
                .map(|(v, _)| *v)
                .fold(f64::INFINITY, f64::min);
            let outside = d
                .iter()
                .zip(grid.nodes())
                .filter(|(_, x)| x.abs() > a)
                .map(|(v, _)| v.abs())
                .fold(0.0, f64::max);
            checks.push(Check::new(
                "defect_nonnegative",
                inside >= -tol,
                inside,
                -tol,
                "smallest defect on the notch",
            ));
            checks.push(Check::new(
                "defect_outside",
                outside <= tol,
                outside,
                tol,
                "largest |defect| off the notch",
            ));
        }
        if v.odd {
            if class.symmetric {
                let d = theta.odd_defect();
                checks.push(Check::new(
                    "odd",
                    d <= v.odd_tol,
                    d,
                    v.odd_tol,
                    "max |theta(x) + theta(-x)|",
                ));
            } else {
                checks.push(Check::new(
                    "odd",
                    true,
                    f64::NAN,
                    v.odd_tol,
                    "skipped: profile is not symmetric",
                ));
            }
        }
        if v.uniqueness_starts > 0 {
            let r =
                multi_start_uniqueness(profile, &grid, v.uniqueness_starts, cfg.seed, &cfg.solver)?;
            let pass = if profile.is_notchless() {
                matches!(r.verdict, Verdict::Unique | Verdict::TranslationFamily)
            } else {
                r.verdict == Verdict::Unique
            };
            checks.push(Check::new(
                "uniqueness",
                pass,
                r.max_pairwise_aligned,
                r.threshold,
                format!("{:?} over {} starts", r.verdict, r.n_starts),
            ));
            uniqueness = Some(r);
        }
    }

    let spectrum = match &cfg.spectrum {
        Some(s) => {
            // L2 cos theta vanishes exactly only at critical points of the chord form
            let chord_wall = if cfg.solver.form == ExchangeForm::Chord {
                theta.clone()
            } else {
                let opts = SolveOptions {
                    form: ExchangeForm::Chord,
                    ..cfg.solver.clone()
                };
                minimize(profile, &grid, &theta, &opts)?.theta
            };
            let r = audit(&chord_wall, profile, &grid, s.probes, cfg.seed)?;
            if profile.is_notchless() {
                checks.push(Check::new(
                    "alpha",
                    r.alpha >= -1e-8,
                    r.alpha,
                    -1e-8,
                    "notchless: zero mode expected",
                ));
            } else {
                checks.push(Check::new(
                    "alpha",
                    r.alpha > 0.0,
                    r.alpha,
                    0.0,
                    "coercivity constant",
                ));
            }
            checks.push(Check::new(
                "kernel",
                r.kernel_residual <= s.kernel_tol,
                r.kernel_residual,
                s.kernel_tol,
                "||L2 cos theta||_s",
            ));
            Some(r)
        }
        None => None,
    };

    let mut trajectory = None;
    let dynamics = match &cfg.dynamics {
        Some(d) => {
            let (dgrid, dwall) = match d.h {
                Some(dh) => {
                    let g = Grid::with_spacing(grid.half_length(), dh)?;
                    let opts = SolveOptions {
                        form: ExchangeForm::Chord,
                        ..cfg.solver.clone()
                    };
                    (g.clone(), solve_wall(profile, &g, None, &opts)?.0)
                }
                None => (grid.clone(), theta.clone()),
            };
            let direction = d
                .direction
                .unwrap_or_else(|| ChaCha8Rng::seed_from_u64(cfg.seed).gen_range(0.0..TAU));
            let dt = d.dt.unwrap_or_else(|| stable_dt(profile, &dgrid));
            let opts = LLGOptions {
                alpha_gilbert: d.alpha_gilbert,
                dt,
                t_end: d.t_end,
                record_every: d.record_every,
                tol: d.tol,
            };
            let m0 = perturbed_wall(&dwall, &dgrid, d.amplitude, d.width, direction);
            let tr = relax(&m0, &dwall, &opts, profile, &dgrid)?;
            let rise = tr
                .energies
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            if d.alpha_gilbert > 0.0 {
                checks.push(Check::new(
                    "lyapunov",
                    rise <= 1e-10,
                    rise,
                    1e-10,
                    "largest energy increase along the trajectory",
                ));
            }
            let wall_energy =
                Functional::with_form(profile, &dgrid, ExchangeForm::Chord).energy(&dwall.values);
            let summary = DynamicsSummary {
                nodes: dgrid.len(),
                h: dgrid.spacing(),
                dt,
                direction,
                steps: tr.steps,
                final_time: tr.times.last().copied().unwrap_or(0.0),
                initial_energy: tr.energies.first().copied().unwrap_or(f64::NAN),
                final_energy: tr.energies.last().copied().unwrap_or(f64::NAN),
                wall_energy,
                max_energy_rise: rise,
                final_distance: tr.distances.last().copied().unwrap_or(f64::NAN),
                final_phi: tr.final_phi,
                residual: tr.residual,
                max_halvings: tr.max_halvings,
                converged: tr.converged,
            };
            trajectory = Some(tr);
            Some(summary)
        }
        None => None,
    };

    let mut path_sample = None;
    let path = match &cfg.path {
        Some(p) => {
            let (start, from) = match &p.from {
                Some(file) => {
                    let mut g = Some(grid.clone());
                    (field_on(file, &mut g)?, display_name(file))
                }
                None => (theta.clone(), "wall".to_string()),
            };
            let c = composite_path(&start, &theta, profile, &grid, &p.options())?;
            checks.push(Check::new(
                "path_below_notchless",
                c.margin > 0.0,
                c.max_energy,
                NOTCHLESS_ENERGY,
                "largest energy along the composite path",
            ));
            let s = PathSummary {
                from,
                x0: c.x0,
                xs: c.xs,
                max_energy: c.max_energy,
                argmax_lambda: c.argmax_lambda,
                translated_energy: c.translated_energy,
                margin: c.margin,
                samples: c.samples,
                endpoint_grad_norms: c.endpoint_grad_norms,
                warnings: c.warnings.clone(),
            };
            path_sample = Some(c.sample);
            Some(s)
        }
        None => None,
    };

    // artifacts
    let mut outputs = Vec::new();
    let mkparent = |p: &Path| -> Result<()> {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(())
    };
    if let Some(p) = &sinks.wall {
        mkparent(p)?;
        let dtheta = derivative(&theta.values, h);
        let defect = f.defect(&theta.values);
        write_columns(
            p,
            &["x", "theta", "dtheta", "defect"],
            &[grid.nodes(), &theta.values, &dtheta, &defect],
        )?;
        outputs.push(display_name(p));
    }
    if let Some(p) = &sinks.profile {
        mkparent(p)?;
        let s = profile.sample(&grid);
        let cov = change_of_variable(profile, &grid);
        write_columns(p, &["x", "s", "y"], &[grid.nodes(), &s, cov.forward()])?;
        outputs.push(display_name(p));
    }
    if let Some(p) = &sinks.decay {
        mkparent(p)?;
        let gap: Vec<f64> = theta
            .values
            .iter()
            .map(|t| (t.abs() - FRAC_PI_2).abs())
            .collect();
        let cov = change_of_variable(profile, &grid);
        let envelope: Vec<f64> = cov
            .forward()
            .iter()
            .map(|y| PI * (-y.abs()).exp())
            .collect();
        write_columns(
            p,
            &["x", "gap", "envelope", "margin"],
            &[grid.nodes(), &gap, &envelope, &margins],
        )?;
        outputs.push(display_name(p));
    }
    if let (Some(p), Some(tr)) = (&sinks.trajectory, &trajectory) {
        mkparent(p)?;
        write_columns(
            p,
            &["t", "energy", "distance_mod_rotation"],
            &[&tr.times, &tr.energies, &tr.distances],
        )?;
        outputs.push(display_name(p));
    }
    if let (Some(p), Some(s)) = (&sinks.path, &path_sample) {
        mkparent(p)?;
        write_columns(p, &["lambda", "energy"], &[&s.lambdas, &s.energies])?;
        outputs.push(display_name(p));
    }
    if let Some(p) = &sinks.plot {
        mkparent(p)?;
        let has = |s: &Option<PathBuf>| {
            s.as_ref()
                .filter(|q| outputs.contains(&display_name(q)))
                .map(|q| display_name(q))
        };
        let script = plot::script(&plot::Inputs {
            wall: has(&sinks.wall),
            decay: has(&sinks.decay),
            path: has(&sinks.path),
            trajectory: has(&sinks.trajectory),
        });
        fs::write(p, script).with_context(|| format!("writing {}", p.display()))?;
        outputs.push(display_name(p));
    }
    if let Some(p) = &sinks.report {
        outputs.push(display_name(p));
    }

    let passed = checks.iter().all(|c| c.pass);
    let report = Report {
        command: command.into(),
        seed: cfg.seed,
        config: cfg,
        profile_class: class,
        wall,
        decay,
        uniqueness,
        spectrum,
        dynamics,
        path,
        checks,
        passed,
        outputs,
    };
    if let Some(p) = &sinks.report {
        mkparent(p)?;
        write_json(p, &report)?;
    }
    Ok(report)
}
