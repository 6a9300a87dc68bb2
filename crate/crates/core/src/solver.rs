//! Domain wall computation: energy minimization, shooting on the
//! Euler-Lagrange equation, multi-start uniqueness evidence, and the
//! exponential decay bound.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyReport, ExchangeForm, Functional};
use crate::field::{separatrix, AngleField, Grid};
use crate::profile::{change_of_variable, classify, NotchProfile, DEFAULT_CLASS_TOL};
use crate::transforms::{self, Transform};
use crate::{Error, Result};

/// Search direction used by [`minimize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descent {
    /// Plain gradient in the weighted metric.
    Gradient,
    /// Gradient in the weighted `H^1` metric.
    Sobolev,
    /// Newton step regularized by a multiple of the `H^1` metric.
    #[default]
    Newton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop when `||g||_s <= grad_tol`.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    /// Sufficient decrease constant of the backtracking line search.
    pub armijo: f64,
    /// Apply the transform chain every this many iterations (0 disables it).
    pub transform_every: usize,
    pub transforms: Vec<Transform>,
    pub descent: Descent,
    pub form: ExchangeForm,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-8,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            transform_every: 10,
            transforms: vec![
                Transform::Threshold,
                Transform::Reflect,
                Transform::Envelope,
                Transform::Symmetrize,
                Transform::Localize,
            ],
            descent: Descent::Newton,
            form: ExchangeForm::Quadratic,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOptions(m.into()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub theta: AngleField,
    pub report: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    pub monotone: bool,
    /// `max_i |theta(x_i) + theta(-x_i)|`.
    pub odd_defect: f64,
    /// Energy after every iteration, starting with the prepared initial field.
    pub energy_history: Vec<f64>,
}

/// `theta_*(x - x_c)` with `x_c` the location of the notch minimum.
pub fn default_init(profile: &NotchProfile, grid: &Grid) -> AngleField {
    AngleField::separatrix(grid, profile.minimum_location())
}

/// Transforms of `chain` that make sense on `profile`.
///
/// Symmetrization needs a symmetric notch. On the notchless profile both
/// symmetrization and localization would only pick one translate of the wall,
/// so they are dropped there.
fn effective_chain(chain: &[Transform], profile: &NotchProfile) -> Vec<Transform> {
    let symmetric = classify(profile, DEFAULT_CLASS_TOL).symmetric;
    chain
        .iter()
        .copied()
        .filter(|t| match t {
            Transform::Symmetrize => symmetric && !profile.is_notchless(),
            Transform::Localize => !profile.is_notchless(),
            _ => true,
        })
        .collect()
}

fn run_chain(
    chain: &[Transform],
    theta: AngleField,
    profile: &NotchProfile,
    grid: &Grid,
) -> AngleField {
    let mut cur = theta;
    for &t in chain {
        // a transform that does not apply (no sign change, non-monotone input)
        // leaves the field as is
        if let Ok(next) = transforms::apply(t, &cur, profile, grid) {
            cur = next;
        }
    }
    cur
}

fn prepare_init(init: &AngleField, profile: &NotchProfile, grid: &Grid) -> AngleField {
    let t = if init.in_band() {
        init.clone()
    } else {
        transforms::threshold(init)
    };
    if t.first_zero(grid).is_some() {
        t
    } else {
        default_init(profile, grid)
    }
}

/// Minimizes the discrete energy from `init`.
pub fn minimize(
    profile: &NotchProfile,
    grid: &Grid,
    init: &AngleField,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    grid.check(init.len())?;
    opts.validate()?;
    let f = Functional::with_form(profile, grid, opts.form);
    let metric = f.sobolev_metric();
    let chain = effective_chain(&opts.transforms, profile);

    let mut theta = prepare_init(init, profile, grid);
    let mut e = f.energy(&theta.values);
    let mut history = vec![e];
    let mut mu = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        if opts.transform_every > 0 && it % opts.transform_every == 0 && !chain.is_empty() {
            let next = run_chain(&chain, theta.clone(), profile, grid);
            let en = f.energy(&next.values);
            if en <= e {
                theta = next;
                e = en;
            }
        }
        let grad = f.euclidean_gradient(&theta.values);
        let gnorm = weighted_norm(&grad, f.mass());
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations = it + 1;

        let dir = match opts.descent {
            Descent::Gradient => grad.iter().zip(f.mass()).map(|(g, m)| -g / m).collect(),
            Descent::Sobolev => {
                let mut d = metric.solve_spd(&grad).ok_or_else(|| {
                    Error::Domain("weighted H1 metric is not positive definite".into())
                })?;
                d.iter_mut().for_each(|v| *v = -*v);
                d
            }
            Descent::Newton => {
                let hess = f.hessian(&theta.values);
                let mut d = loop {
                    if let Some(d) = hess.add_scaled(&metric, mu).solve_spd(&grad) {
                        break d;
                    }
                    mu = (mu * 10.0).max(1e-8);
                    if mu > 1e12 {
                        return Err(Error::Domain(
                            "regularized Newton matrix stays indefinite".into(),
                        ));
                    }
                };
                d.iter_mut().for_each(|v| *v = -*v);
                d
            }
        };
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            break;
        }

        let mut t = opts.initial_step;
        let mut accepted = None;
        let noise = 1e-14 * e.abs().max(1.0);
        while t > 1e-14 {
            let cand = transforms::threshold(&AngleField::new(
                theta
                    .values
                    .iter()
                    .zip(&dir)
                    .map(|(v, d)| v + t * d)
                    .collect(),
            ));
            let ec = f.energy(&cand.values);
            if -t * slope > 100.0 * noise {
                if ec <= e + opts.armijo * t * slope {
                    accepted = Some((cand, ec, t));
                    break;
                }
            } else if ec <= e + noise {
                // the predicted decrease is below rounding, so the Armijo test
                // carries no information; ask for a smaller gradient instead
                let gc = weighted_norm(&f.euclidean_gradient(&cand.values), f.mass());
                if gc < gnorm {
                    accepted = Some((cand, ec, t));
                    break;
                }
            }
            t *= opts.shrink;
        }
        let Some((cand, ec, t)) = accepted else {
            if opts.descent == Descent::Newton && mu < 1e12 {
                mu = (mu * 10.0).max(1e-8);
                continue;
            }
            break;
        };
        if opts.descent == Descent::Newton {
            mu = if t == opts.initial_step {
                (mu * 0.25).max(1e-12)
            } else {
                mu * 4.0
            };
        }
        theta = cand;
        e = ec;
        history.push(e);
    }

    let report = f.report(&theta.values);
    let converged = converged && report.grad_norm <= opts.grad_tol;
    Ok(SolveResult {
        monotone: theta.is_nondecreasing(1e-10),
        odd_defect: theta.odd_defect(),
        theta,
        report,
        iterations,
        converged,
        energy_history: history,
    })
}

fn weighted_norm(euclidean_grad: &[f64], mass: &[f64]) -> f64 {
    euclidean_grad
        .iter()
        .zip(mass)
        .map(|(g, m)| g * g / m)
        .sum::<f64>()
        .sqrt()
}

/// Per-node margin `pi exp(-|y(x_i)|) - | |theta_i| - pi/2 |` of the decay bound.
pub fn decay_check(theta: &AngleField, profile: &NotchProfile, grid: &Grid) -> Result<Vec<f64>> {
    grid.check(theta.len())?;
    let cov = change_of_variable(profile, grid);
    Ok(theta
        .values
        .iter()
        .zip(cov.forward())
        .map(|(t, y)| PI * (-y.abs()).exp() - (t.abs() - FRAC_PI_2).abs())
        .collect())
}

// ---------------------------------------------------------------- shooting

/// Outcome of the shooting method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub theta: AngleField,
    /// Zero of the wall.
    pub x0: f64,
    /// `theta'(x0)` for the right and left half trajectories.
    pub slope_right: f64,
    pub slope_left: f64,
    /// `theta'^2 - cos^2 theta` where each half leaves the notch.
    pub mismatch_right: f64,
    pub mismatch_left: f64,
}

const SLOPE_MIN: f64 = 1e-6;
const SLOPE_MAX: f64 = 10.0;
const OVERSHOOT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Fate {
    Over,
    Under,
    Exit { theta: f64, p: f64 },
}

/// Integrator for `theta' = p / s`, `p' = -s cos(theta) sin(theta)`, which is
/// the Euler-Lagrange equation written for the flux `p = s theta'`.
struct Shooter<'a> {
    profile: &'a NotchProfile,
    kinks: Vec<f64>,
    nodes: &'a [f64],
    step: f64,
}

impl<'a> Shooter<'a> {
    fn rhs(&self, x: f64, th: f64, p: f64) -> (f64, f64) {
        let s = self.profile.eval(x);
        (p / s, -s * th.cos() * th.sin())
    }

    /// Marches from `x0` to `end`. Records node values when `record` is given.
    fn run(
        &self,
        x0: f64,
        slope: f64,
        end: f64,
        mut record: Option<&mut Vec<(usize, f64)>>,
    ) -> Fate {
        let dir = if end >= x0 { 1.0 } else { -1.0 };
        let mut stops: Vec<(f64, Option<usize>)> = self
            .kinks
            .iter()
            .filter(|&&k| (k - x0) * dir > 0.0 && (end - k) * dir > 0.0)
            .map(|&k| (k, None))
            .collect();
        for (i, &x) in self.nodes.iter().enumerate() {
            if (x - x0) * dir > 0.0 && (end - x) * dir >= 0.0 {
                stops.push((x, Some(i)));
            }
        }
        stops.push((end, None));
        stops.sort_by(|a, b| (dir * a.0).total_cmp(&(dir * b.0)));

        let mut x = x0;
        let mut th = 0.0;
        let mut p = slope * self.profile.eval(x0);
        for (target, node) in stops {
            let span = target - x;
            if span * dir > 0.0 {
                let m = (span.abs() / self.step).ceil().max(1.0) as usize;
                let dx = span / m as f64;
                // evaluate s strictly inside the piece so that jumps at kinks
                // are seen from the correct side
                let lo = x.min(target);
                let hi = x.max(target);
                let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
                let clip = |u: f64| u.clamp(lo + pad, hi - pad);
                for k in 0..m {
                    let xa = x + k as f64 * dx;
                    let (k1t, k1p) = self.rhs(clip(xa), th, p);
                    let (k2t, k2p) =
                        self.rhs(clip(xa + 0.5 * dx), th + 0.5 * dx * k1t, p + 0.5 * dx * k1p);
                    let (k3t, k3p) =
                        self.rhs(clip(xa + 0.5 * dx), th + 0.5 * dx * k2t, p + 0.5 * dx * k2p);
                    let (k4t, k4p) = self.rhs(clip(xa + dx), th + dx * k3t, p + dx * k3p);
                    th += dx / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
                    p += dx / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
                    if th.abs() > FRAC_PI_2 + OVERSHOOT {
                        return Fate::Over;
                    }
                    if p <= 0.0 && th.abs() < FRAC_PI_2 - OVERSHOOT {
                        return Fate::Under;
                    }
                }
                x = target;
            }
            if let (Some(i), Some(rec)) = (node, record.as_deref_mut()) {
                rec.push((i, th));
            }
        }
        Fate::Exit { theta: th, p }
    }

    /// `+1` when `slope` is too steep, `-1` when too shallow, with the
    /// first integral at the exit point.
    fn classify(&self, x0: f64, slope: f64, end: f64) -> (f64, f64) {
        match self.run(x0, slope, end, None) {
            Fate::Over => (1.0, f64::NAN),
            Fate::Under => (-1.0, f64::NAN),
            Fate::Exit { theta, p } => {
                // outside the notch s = 1, so p is the slope there
                let c = theta.cos();
                let d = p * p - c * c;
                if theta.abs() >= FRAC_PI_2 {
                    (1.0, d)
                } else {
                    (d.signum(), d)
                }
            }
        }
    }

    /// Slope at `x0` whose trajectory leaves the notch on the separatrix,
    /// with the remaining first-integral mismatch.
    fn slope_for(&self, x0: f64, end: f64, guess: f64) -> Result<(f64, f64)> {
        let bracket_err = Error::Bracket {
            lo: SLOPE_MIN,
            hi: SLOPE_MAX,
        };
        let (sign, d) = self.classify(x0, guess, end);
        if sign == 0.0 {
            return Ok((guess, d));
        }
        // expand geometrically from the guess until the sign flips
        let (mut lo, mut hi) = (guess, guess);
        let factor = if sign > 0.0 { 0.5 } else { 2.0 };
        let mut probe = guess;
        loop {
            let next = (probe * factor).clamp(SLOPE_MIN, SLOPE_MAX);
            if next == probe {
                return Err(bracket_err);
            }
            probe = next;
            let (s, d) = self.classify(x0, probe, end);
            if s == 0.0 {
                return Ok((probe, d));
            }
            if s != sign {
                break;
            }
        }
        if sign > 0.0 {
            lo = probe;
            hi = hi.min(probe / factor);
        } else {
            hi = probe;
            lo = lo.max(probe / factor);
        }
        let mut best = (0.5 * (lo + hi), f64::INFINITY);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (s, d) = self.classify(x0, mid, end);
            if d.is_finite() && d.abs() < best.1.abs() {
                best = (mid, d);
            }
            if s == 0.0 {
                return Ok((mid, d));
            }
            if s > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(best)
    }
}

/// Shooting solution with zero at `x0` (refined when the two halves disagree)
/// and initial slope guess `slope0`.
pub fn shoot_detailed(
    profile: &NotchProfile,
    grid: &Grid,
    x0: f64,
    slope0: f64,
) -> Result<ShootResult> {
    if !(slope0 > 0.0) {
        return Err(Error::InvalidOptions("slope0 must be positive".into()));
    }
    let l = grid.half_length();
    if !(x0.abs() < l) {
        return Err(Error::InvalidOptions(format!(
            "x0 = {x0} is outside the grid"
        )));
    }
    let a = profile.a();
    let shooter = Shooter {
        profile,
        kinks: profile.kinks(),
        nodes: grid.nodes(),
        step: 0.25 * grid.spacing().min(0.01),
    };
    let guess = slope0.clamp(SLOPE_MIN, SLOPE_MAX);
    let halves = |z: f64| -> Result<((f64, f64), (f64, f64))> {
        let r = shooter.slope_for(z, z.max(a), guess)?;
        let lft = shooter.slope_for(z, z.min(-a), guess)?;
        Ok((r, lft))
    };

    let mut z = x0;
    let (mut r, mut lft) = halves(z)?;
    let gap = |r: (f64, f64), l: (f64, f64)| r.0 - l.0;
    if gap(r, lft).abs() > 1e-10 * r.0 {
        // the zero is not at x0: bisect on the zero location inside the notch
        let (mut zl, mut zr) = (-a, a);
        let gl = {
            let (r, l) = halves(zl)?;
            gap(r, l)
        };
        let gr = {
            let (r, l) = halves(zr)?;
            gap(r, l)
        };
        if gl * gr > 0.0 {
            return Err(Error::Bracket { lo: -a, hi: a });
        }
        for _ in 0..100 {
            z = 0.5 * (zl + zr);
            let (rr, ll) = halves(z)?;
            r = rr;
            lft = ll;
            let g = gap(r, lft);
            if g == 0.0 || zr - zl <= 1e-13 * (1.0 + a) {
                break;
            }
            if (g > 0.0) == (gl > 0.0) {
                zl = z;
            } else {
                zr = z;
            }
        }
    }

    let n = grid.len();
    let x = grid.nodes();
    let mut values = vec![f64::NAN; n];
    let mut rec = Vec::new();
    let right_end = z.max(a);
    let left_end = z.min(-a);
    let exit_r = shooter.run(z, r.0, right_end, Some(&mut rec));
    let exit_l = shooter.run(z, lft.0, left_end, Some(&mut rec));
    for (i, v) in rec {
        values[i] = v;
    }
    let center = |fate: Fate, end: f64| match fate {
        Fate::Exit { theta, .. } if theta.abs() < FRAC_PI_2 => end - theta.tan().asinh(),
        _ => end,
    };
    let cr = center(exit_r, right_end);
    let cl = center(exit_l, left_end);
    for i in 0..n {
        if x[i] > right_end {
            values[i] = separatrix(x[i] - cr);
        } else if x[i] < left_end {
            values[i] = separatrix(x[i] - cl);
        } else if values[i].is_nan() {
            // node exactly at the zero
            values[i] = 0.0;
        }
    }
    Ok(ShootResult {
        theta: AngleField::new(values),
        x0: z,
        slope_right: r.0,
        slope_left: lft.0,
        mismatch_right: r.1,
        mismatch_left: lft.1,
    })
}

/// Wall obtained by shooting from `x0` with initial slope guess `slope0`.
pub fn shoot(profile: &NotchProfile, grid: &Grid, x0: f64, slope0: f64) -> Result<AngleField> {
    Ok(shoot_detailed(profile, grid, x0, slope0)?.theta)
}

// ---------------------------------------------------------------- uniqueness

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// All starts reached the same wall.
    Unique,
    /// The limits differ only by translation.
    TranslationFamily,
    /// At least two distinct limits.
    Multiple,
    /// Some start did not converge.
    NotConverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub n_starts: usize,
    pub seed: u64,
    /// Whether the profile is a unimodal notch other than `s = 1`.
    pub precondition_met: bool,
    pub threshold: f64,
    pub start_centers: Vec<f64>,
    pub converged: Vec<bool>,
    pub energies: Vec<f64>,
    /// `||g||_s` of each limit.
    pub grad_norms: Vec<f64>,
    pub zeros: Vec<Option<f64>>,
    pub max_pairwise: f64,
    /// Largest pairwise distance after moving every zero to the origin.
    pub max_pairwise_aligned: f64,
    /// Number of clusters at `threshold`.
    pub distinct_limits: usize,
    pub cluster_of: Vec<usize>,
    pub verdict: Verdict,
}

pub const UNIQUENESS_THRESHOLD: f64 = 1e-4;

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Random in-band start: a separatrix crossing at a random point plus a few
/// smooth bumps.
fn random_start(grid: &Grid, rng: &mut ChaCha8Rng) -> (f64, AngleField) {
    let l = grid.half_length();
    let c = rng.gen_range(-l + 2.0..=l - 2.0);
    let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| {
            (
                rng.gen_range(-0.5..0.5),
                c + rng.gen_range(-3.0..3.0),
                rng.gen_range(0.5..2.0),
            )
        })
        .collect();
    let field = AngleField::from_fn(grid, |x| {
        let b: f64 = bumps
            .iter()
            .map(|(amp, xc, w)| amp * (-((x - xc) / w).powi(2)).exp())
            .sum();
        (separatrix(x - c) + b).clamp(-FRAC_PI_2, FRAC_PI_2)
    });
    (c, field)
}

/// Runs [`minimize`] from `n_starts` random starts in parallel and compares
/// the limits.
pub fn multi_start_uniqueness(
    profile: &NotchProfile,
    grid: &Grid,
    n_starts: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<UniquenessReport> {
    if n_starts == 0 {
        return Err(Error::InvalidOptions("n_starts must be positive".into()));
    }
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(f64, AngleField)> = (0..n_starts)
        .map(|_| random_start(grid, &mut rng))
        .collect();
    let results: Vec<SolveResult> = starts
        .par_iter()
        .map(|(_, init)| minimize(profile, grid, init, opts))
        .collect::<Result<_>>()?;

    let walls: Vec<&[f64]> = results.iter().map(|r| r.theta.values.as_slice()).collect();
    let mut max_pairwise: f64 = 0.0;
    for i in 0..n_starts {
        for j in i + 1..n_starts {
            max_pairwise = max_pairwise.max(sup_distance(walls[i], walls[j]));
        }
    }
    let mut reps: Vec<usize> = Vec::new();
    let mut cluster_of = Vec::with_capacity(n_starts);
    for i in 0..n_starts {
        match reps
            .iter()
            .position(|&r| sup_distance(walls[r], walls[i]) <= UNIQUENESS_THRESHOLD)
        {
            Some(c) => cluster_of.push(c),
            None => {
                cluster_of.push(reps.len());
                reps.push(i);
            }
        }
    }

    let zeros: Vec<Option<f64>> = results.iter().map(|r| r.theta.first_zero(grid)).collect();
    let aligned: Vec<Vec<f64>> = results
        .iter()
        .zip(&zeros)
        .map(|(r, z)| {
            let z = z.unwrap_or(0.0);
            grid.nodes()
                .iter()
                .map(|&x| r.theta.value_at(grid, x + z))
                .collect()
        })
        .collect();
    let mut max_aligned: f64 = 0.0;
    for i in 0..n_starts {
        for j in i + 1..n_starts {
            max_aligned = max_aligned.max(sup_distance(&aligned[i], &aligned[j]));
        }
    }
    let energies: Vec<f64> = results.iter().map(|r| r.report.total).collect();
    let e_spread = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let converged: Vec<bool> = results.iter().map(|r| r.converged).collect();

    let grad_norms: Vec<f64> = results.iter().map(|r| r.report.grad_norm).collect();
    // a start still sliding along a flat valley of translates counts as a
    // member of the family, not as a failure
    let family = reps.len() > 1
        && max_aligned <= 10.0 * grid.spacing().powi(2) + UNIQUENESS_THRESHOLD
        && e_spread <= grid.spacing().powi(2).max(1e-6);
    let all_converged = converged.iter().all(|&c| c);
    let verdict = if family {
        Verdict::TranslationFamily
    } else if !all_converged {
        Verdict::NotConverged
    } else if reps.len() == 1 {
        Verdict::Unique
    } else {
        Verdict::Multiple
    };
    let class = classify(profile, DEFAULT_CLASS_TOL);
    Ok(UniquenessReport {
        n_starts,
        seed,
        precondition_met: class.unimodal && !profile.is_notchless(),
        threshold: UNIQUENESS_THRESHOLD,
        start_centers: starts.iter().map(|s| s.0).collect(),
        converged,
        energies,
        grad_norms,
        zeros,
        max_pairwise,
        max_pairwise_aligned: max_aligned,
        distinct_limits: reps.len(),
        cluster_of,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notchless_minimizer_is_a_translate_of_the_separatrix() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let init = AngleField::from_fn(&g, |x| (x / 4.0).clamp(-FRAC_PI_2, FRAC_PI_2));
        let r = minimize(&p, &g, &init, &SolveOptions::default()).unwrap();
        assert!(r.converged, "{:?}", r.report);
        assert!((r.report.total - 2.0).abs() < 1e-3);
        let c = r.theta.first_zero(&g).unwrap();
        let err = sup_distance(&r.theta.values, &AngleField::separatrix(&g, c).values);
        assert!(err < 1e-3, "err {err}");
        assert!(r.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-13));
    }

    #[test]
    fn plateau_wall_is_pinned_inside_the_notch() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::for_profile(&p, 0.01).unwrap();
        let r = minimize(&p, &g, &default_init(&p, &g), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.monotone);
        assert!(r.report.total < 2.0);
        let z = r.theta.first_zero(&g).unwrap();
        assert!(z.abs() <= 1.0);
        assert!(r.odd_defect <= 1e-6, "{}", r.odd_defect);
    }

    #[test]
    fn far_start_is_pulled_into_the_notch() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::for_profile(&p, 0.01).unwrap();
        let r0 = minimize(&p, &g, &default_init(&p, &g), &SolveOptions::default()).unwrap();
        let r = minimize(
            &p,
            &g,
            &AngleField::separatrix(&g, 9.0),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(sup_distance(&r.theta.values, &r0.theta.values) < 1e-6);
    }

    #[test]
    fn shooting_on_the_notchless_line_recovers_the_separatrix() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(10.0, 0.01).unwrap();
        let s = shoot_detailed(&p, &g, 0.0, 0.3).unwrap();
        assert!((s.slope_right - 1.0).abs() < 1e-12);
        let err = sup_distance(&s.theta.values, &AngleField::separatrix(&g, 0.0).values);
        assert!(err < 1e-12);
    }

    #[test]
    fn shooting_agrees_with_minimization() {
        for p in [
            NotchProfile::plateau(0.5, 1.0, 0.0).unwrap(),
            NotchProfile::plateau(0.5, 1.0, 0.25).unwrap(),
            NotchProfile::cosine_dip(0.6, 1.5).unwrap(),
        ] {
            let g = Grid::for_profile(&p, 0.01).unwrap();
            let s = shoot_detailed(&p, &g, 0.0, 1.0).unwrap();
            assert!(s.slope_right >= 1.0);
            let m = minimize(&p, &g, &default_init(&p, &g), &SolveOptions::default()).unwrap();
            let gap = sup_distance(&s.theta.values, &m.theta.values);
            assert!(gap <= 1e-4, "{:?} gap {gap}", p.spec());
        }
    }

    #[test]
    fn shooting_finds_the_zero_of_an_asymmetric_notch() {
        let p = NotchProfile::piecewise_linear(&[(-1.0, 1.0), (-0.5, 0.5), (1.5, 1.0)]).unwrap();
        let g = Grid::for_profile(&p, 0.01).unwrap();
        let s = shoot_detailed(&p, &g, 0.0, 1.0).unwrap();
        assert!((s.slope_right - s.slope_left).abs() < 1e-8);
        let m = minimize(&p, &g, &default_init(&p, &g), &SolveOptions::default()).unwrap();
        assert!(sup_distance(&s.theta.values, &m.theta.values) <= 1e-4);
    }

    #[test]
    fn rejects_bad_shooting_input() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(5.0, 0.1).unwrap();
        assert!(shoot(&p, &g, 0.0, 0.0).is_err());
        assert!(shoot(&p, &g, 7.0, 1.0).is_err());
    }

    #[test]
    fn decay_margins_are_nonnegative_for_the_separatrix() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(15.0, 0.01).unwrap();
        let m = decay_check(&AngleField::separatrix(&g, 0.0), &p, &g).unwrap();
        assert!(m.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn multi_start_verdicts() {
        let opts = SolveOptions::default();
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::for_profile(&p, 0.01).unwrap();
        let r = multi_start_uniqueness(&p, &g, 20, 7, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Unique, "{r:?}");
        assert!(r.max_pairwise <= 1e-4);

        let two = NotchProfile::piecewise_linear(&[
            (-4.0, 1.0),
            (-3.5, 0.5),
            (-2.5, 0.5),
            (-2.0, 1.0),
            (2.0, 1.0),
            (2.5, 0.5),
            (3.5, 0.5),
            (4.0, 1.0),
        ])
        .unwrap();
        let g = Grid::for_profile(&two, 0.01).unwrap();
        let r = multi_start_uniqueness(&two, &g, 20, 7, &opts).unwrap();
        assert_eq!(
            r.verdict,
            Verdict::Multiple,
            "{:?} {:?}",
            r.zeros,
            r.converged
        );
        assert!(r.distinct_limits >= 2);

        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let r = multi_start_uniqueness(&p, &g, 20, 7, &opts).unwrap();
        assert_eq!(
            r.verdict,
            Verdict::TranslationFamily,
            "{:?} {:?} {}",
            r.energies,
            r.converged,
            r.max_pairwise_aligned
        );
    }
}
