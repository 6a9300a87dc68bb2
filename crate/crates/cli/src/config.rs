//! Run configuration: parsing, validation and resolution against files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use notchwall::energy::ExchangeForm;
use notchwall::paths::PathOptions;
use notchwall::solver::SolveOptions;
use notchwall::{Grid, NotchProfile, ProfileSpec};

/// Grid request. `half_length` defaults to `a + 15`; give at most one of `n`
/// and `h` (default `h = 0.01`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_length: Option<f64>,
    pub n: Option<usize>,
    pub h: Option<f64>,
}

pub const DEFAULT_SPACING: f64 = 0.01;

impl GridConfig {
    pub fn build(&self, profile: &NotchProfile) -> Result<Grid> {
        let l = self.half_length.unwrap_or(profile.a() + 15.0);
        let g = match (self.n, self.h) {
            (Some(_), Some(_)) => bail!("grid: give either n or h, not both"),
            (Some(n), None) => Grid::new(l, n)?,
            (None, h) => Grid::with_spacing(l, h.unwrap_or(DEFAULT_SPACING))?,
        };
        Ok(g)
    }

    pub fn resolved(g: &Grid) -> Self {
        Self {
            half_length: Some(g.half_length()),
            n: Some(g.len()),
            h: Some(g.spacing()),
        }
    }
}

/// Checks on the wall. Tolerances default to the values used by the test suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub monotone: bool,
    pub decay: bool,
    pub defect: bool,
    /// Oddness, only meaningful for symmetric profiles.
    pub odd: bool,
    /// Number of random starts for the uniqueness check; 0 skips it.
    pub uniqueness_starts: usize,
    pub monotone_tol: f64,
    pub decay_tol: f64,
    /// Defaults to `10 h^2`.
    pub defect_tol: Option<f64>,
    pub odd_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            monotone: true,
            decay: true,
            defect: true,
            odd: false,
            uniqueness_starts: 0,
            monotone_tol: 1e-10,
            decay_tol: 1e-8,
            defect_tol: None,
            odd_tol: 1e-8,
        }
    }
}

/// Spectral audit, done at the chord-exchange wall polished from the run's wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub probes: usize,
    /// Upper bound on `||L2 cos theta||_s`.
    pub kernel_tol: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            probes: 50,
            kernel_tol: 1e-6,
        }
    }
}

/// LLG relaxation of a perturbed wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Spacing of the grid on which the wall is solved again with the chord
    /// exchange, the form that matches the magnetization energy. Without it
    /// the run's own wall and grid are used.
    pub h: Option<f64>,
    pub alpha_gilbert: f64,
    /// Defaults to the stable step `0.2 h^2 s0`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub record_every: usize,
    pub tol: f64,
    pub amplitude: f64,
    pub width: f64,
    /// Transverse direction of the perturbation; drawn from the seed when absent.
    pub direction: Option<f64>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            h: Some(0.1),
            alpha_gilbert: 0.5,
            dt: None,
            t_end: 100.0,
            record_every: 100,
            tol: 1e-10,
            amplitude: 0.1,
            width: 1.0,
            direction: None,
        }
    }
}

/// Composite path settings; the fields after `from` are those of [`PathOptions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    /// Start wall; the solved wall when absent.
    pub from: Option<PathBuf>,
    pub samples: usize,
    pub refine_tol: f64,
    pub max_doublings: usize,
    pub critical_tol: f64,
    pub form: ExchangeForm,
}

impl Default for PathConfig {
    fn default() -> Self {
        let o = PathOptions::default();
        Self {
            from: None,
            samples: o.samples,
            refine_tol: o.refine_tol,
            max_doublings: o.max_doublings,
            critical_tol: o.critical_tol,
            form: o.form,
        }
    }
}

impl PathConfig {
    pub fn options(&self) -> PathOptions {
        PathOptions {
            samples: self.samples,
            refine_tol: self.refine_tol,
            max_doublings: self.max_doublings,
            critical_tol: self.critical_tol,
            form: self.form,
        }
    }
}

/// Parameter sweep: one run per entry, each in its own subdirectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Replaces `s0` of the base profile.
    pub s0: Vec<f64>,
    /// Replaces the base profile.
    pub profiles: Vec<ProfileSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Option<ProfileSpec>,
    /// Profile file, used when `profile` is absent.
    pub profile_file: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Use this wall instead of solving.
    pub wall: Option<PathBuf>,
    /// Start the solver from this field.
    pub init: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolveOptions,
    pub verify: Option<VerifyConfig>,
    pub spectrum: Option<SpectrumConfig>,
    pub dynamics: Option<DynamicsConfig>,
    pub path: Option<PathConfig>,
    pub sweep: Option<SweepConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(profile: ProfileSpec) -> Self {
        Self {
            profile: Some(profile),
            profile_file: None,
            grid: GridConfig::default(),
            seed: 0,
            output_dir: default_output_dir(),
            wall: None,
            init: None,
            solver: SolveOptions::default(),
            verify: None,
            spectrum: None,
            dynamics: None,
            path: None,
            sweep: None,
        }
    }

    /// Reads a TOML config. Relative paths inside it are taken relative to the
    /// config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.profile_file, &mut cfg.wall, &mut cfg.init]
            .into_iter()
            .flatten()
        {
            rebase(p);
        }
        if let Some(from) = cfg.path.as_mut().and_then(|p| p.from.as_mut()) {
            rebase(from);
        }
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    /// Validates everything that can be checked without computing, and
    /// inlines the profile. Nothing is written before this succeeds.
    pub fn resolve(mut self) -> Result<(Self, NotchProfile)> {
        let spec = match (self.profile.take(), self.profile_file.take()) {
            (Some(_), Some(_)) => bail!("give either profile or profile_file, not both"),
            (Some(spec), None) => spec,
            (None, Some(file)) => read_profile(&file)?,
            (None, None) => bail!("missing profile"),
        };
        let profile = NotchProfile::new(spec.clone()).context("profile")?;
        self.profile = Some(spec);
        self.solver.validate().context("solver")?;
        if let Some(p) = &self.path {
            p.options().validate().context("path")?;
        }
        for f in [&self.wall, &self.init].into_iter().flatten() {
            if !f.is_file() {
                bail!("referenced file {} does not exist", f.display());
            }
        }
        if let Some(f) = self.path.as_ref().and_then(|p| p.from.as_ref()) {
            if !f.is_file() {
                bail!("referenced file {} does not exist", f.display());
            }
        }
        if let Some(d) = &self.dynamics {
            if d.h.is_some_and(|h| !(h > 0.0)) || !(d.t_end > 0.0 && d.width > 0.0 && d.tol > 0.0) {
                bail!("dynamics: h, t_end, width and tol must be positive");
            }
            if !(d.alpha_gilbert >= 0.0) || d.dt.is_some_and(|dt| !(dt > 0.0)) {
                bail!("dynamics: alpha_gilbert must be >= 0 and dt positive");
            }
        }
        self.grid.build(&profile).context("grid")?;
        Ok((self, profile))
    }
}

/// Reads a profile file (TOML with `kind`, `s0`, `a`, `ramp`, `nodes`).
pub fn read_profile(path: &Path) -> Result<ProfileSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: ProfileSpec =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    NotchProfile::new(spec.clone()).with_context(|| format!("profile in {}", path.display()))?;
    Ok(spec)
}
