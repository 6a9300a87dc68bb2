//! Paths between walls built in cos-space.
//!
//! On each side of the zero `x0` of a wall, `psi = cos(theta)` lies in `(0, 1]`
//! and the energy becomes `1/2 int (L(psi', psi) + psi^2) s` with
//! `L(y, z) = y^2 / (1 - z^2)`, which is convex. Averaging two walls in
//! cos-space and mapping back with `sgn(x - x0) arccos` therefore gives a path
//! whose energy lies below the chord between its endpoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{ExchangeForm, Functional};
use crate::field::{separatrix, tail_energy, AngleField, Grid, Side};
use crate::profile::NotchProfile;
use crate::{Error, Result};

/// Energy of the notchless wall.
pub const NOTCHLESS_ENERGY: f64 = 2.0;

fn check_z(z: f64) -> Result<()> {
    if !(z.abs() < 1.0) {
        return Err(Error::Domain(format!("L(y, z) needs |z| < 1, got z = {z}")));
    }
    Ok(())
}

/// `L(y, z) = y^2 / (1 - z^2)`.
pub fn l_function(y: f64, z: f64) -> Result<f64> {
    check_z(z)?;
    Ok(y * y / (1.0 - z * z))
}

/// Hessian of [`l_function`] in `(y, z)`.
pub fn l_hessian(y: f64, z: f64) -> Result<[[f64; 2]; 2]> {
    check_z(z)?;
    let q = 1.0 - z * z;
    let yy = 2.0 / q;
    let yz = 4.0 * y * z / (q * q);
    let zz = 2.0 * y * y / (q * q) + 8.0 * y * y * z * z / (q * q * q);
    Ok([[yy, yz], [yz, zz]])
}

/// Closed form of the Hessian determinant, `4 y^2 / (1 - z^2)^3`.
pub fn l_hessian_det(y: f64, z: f64) -> Result<f64> {
    check_z(z)?;
    Ok(4.0 * y * y / (1.0 - z * z).powi(3))
}

/// Zero of a nondecreasing wall, by linear interpolation of the sign change.
pub fn wall_zero(theta: &AngleField, grid: &Grid) -> Result<f64> {
    grid.check(theta.len())?;
    if !theta.is_nondecreasing(1e-12) {
        return Err(Error::Domain(format!(
            "wall is not monotone (largest decrease {:.3e})",
            theta.monotonicity_defect()
        )));
    }
    theta
        .first_zero(grid)
        .ok_or_else(|| Error::Domain("wall has no sign change".into()))
}

/// `sgn(x - x0) |u(x)|`.
pub fn signed_about(u: &[f64], grid: &Grid, x0: f64) -> Vec<f64> {
    u.iter()
        .zip(grid.nodes())
        .map(|(v, &x)| {
            if x == x0 {
                0.0
            } else {
                v.abs().copysign(x - x0)
            }
        })
        .collect()
}

/// `P_lambda(theta0)(x) = sgn(x - x0) arccos((1 - lambda) cos theta0(x) + lambda cos theta_*(x - x0))`.
///
/// The arccos is taken in half-angle form,
/// `arccos(1 - 2w) = 2 asin(sqrt(w))` with `w = (1 - lambda) sin^2(theta0/2) + lambda sin^2(theta_*/2)`,
/// which keeps full precision near the zero and needs no clamping.
pub fn cos_convex_path(
    theta0: &AngleField,
    x0: f64,
    lambda: f64,
    grid: &Grid,
) -> Result<AngleField> {
    grid.check(theta0.len())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    if !theta0.is_nondecreasing(1e-12) {
        return Err(Error::Domain(format!(
            "path start is not monotone (largest decrease {:.3e})",
            theta0.monotonicity_defect()
        )));
    }
    let at_zero = theta0.value_at(grid, x0);
    if !(at_zero.abs() <= 1e-6) {
        return Err(Error::Domain(format!(
            "theta0({x0}) = {at_zero:.3e} is not zero"
        )));
    }
    let values = theta0
        .values
        .iter()
        .zip(grid.nodes())
        .map(|(&t, &x)| {
            let w = (1.0 - lambda) * (0.5 * t).sin().powi(2)
                + lambda * (0.5 * separatrix(x - x0)).sin().powi(2);
            let angle = 2.0 * w.sqrt().min(1.0).asin();
            if x == x0 {
                0.0
            } else {
                angle.copysign(x - x0)
            }
        })
        .collect();
    Ok(AngleField::new(values))
}

/// `theta_*(x - gamma)` sampled on the grid.
pub fn translated_wall(gamma: f64, grid: &Grid) -> AngleField {
    AngleField::separatrix(grid, gamma)
}

/// `E_s(theta_*(. - gamma))`.
pub fn translated_wall_energy(
    gamma: f64,
    profile: &NotchProfile,
    grid: &Grid,
    form: ExchangeForm,
) -> f64 {
    Functional::with_form(profile, grid, form).energy(&translated_wall(gamma, grid).values)
}

/// Energies of a wall on each side of `x0`, computed from the angle and
/// again from `psi = cos(theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialEnergies {
    pub x0: f64,
    /// `(E^-, E^+)` from the angle.
    pub angle: (f64, f64),
    /// `(E^-, E^+)` from `cos(theta)`.
    pub cosine: (f64, f64),
}

impl PartialEnergies {
    /// Largest relative disagreement between the two computations.
    pub fn identity_gap(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        rel(self.angle.0, self.cosine.0).max(rel(self.angle.1, self.cosine.1))
    }
}

/// Splits the discrete energy at `x0`.
///
/// A cell cut by `x0` contributes its exchange in proportion to length, and
/// node masses are split by integrating `s` over each part of the dual cell.
/// The left tail goes to `E^-`, the right tail to `E^+`, so `E^- + E^+` is the
/// full energy.
pub fn partial_energies(
    theta: &AngleField,
    x0: f64,
    profile: &NotchProfile,
    grid: &Grid,
    form: ExchangeForm,
) -> Result<PartialEnergies> {
    grid.check(theta.len())?;
    let x = grid.nodes();
    let h = grid.spacing();
    let n = x.len();
    let t = &theta.values;
    // sign pattern, allowing boundary nodes and the nodes next to x0 to sit on zero
    for (i, (&ti, &xi)) in t.iter().zip(x).enumerate() {
        let bad = (xi < x0 && ti > 0.0)
            || (xi > x0 && ti < 0.0)
            || ti.abs() > std::f64::consts::FRAC_PI_2;
        if bad {
            return Err(Error::Domain(format!(
                "theta({xi}) = {ti} breaks the sign pattern about x0 = {x0} (node {i})"
            )));
        }
    }
    let f = Functional::with_form(profile, grid, form);
    let psi: Vec<f64> = t.iter().map(|v| v.cos()).collect();
    let side = |xi: f64| if xi < x0 { -1.0 } else { 1.0 };

    let cell = |d: f64, s: f64| match form {
        ExchangeForm::Quadratic => 0.5 * s * d * d / h,
        ExchangeForm::Chord => 2.0 * s * (0.5 * d).sin().powi(2) / h,
    };
    let mut angle = (0.0, 0.0);
    let mut cosine = (0.0, 0.0);
    for i in 0..n - 1 {
        let left_share = ((x0 - x[i]) / h).clamp(0.0, 1.0);
        let s = f.s_mid()[i];
        let ea = cell(t[i + 1] - t[i], s);
        // the angle recovered from psi on each side of x0
        let d = side(x[i + 1]) * psi[i + 1].min(1.0).acos() - side(x[i]) * psi[i].min(1.0).acos();
        let ec = cell(d, s);
        angle.0 += left_share * ea;
        angle.1 += (1.0 - left_share) * ea;
        cosine.0 += left_share * ec;
        cosine.1 += (1.0 - left_share) * ec;
    }
    for i in 0..n {
        let lo = if i == 0 { x[0] } else { x[i] - 0.5 * h };
        let hi = if i == n - 1 { x[n - 1] } else { x[i] + 0.5 * h };
        let m = f.mass()[i];
        let m_left = if x0 <= lo {
            0.0
        } else if x0 >= hi {
            m
        } else {
            profile.integrate(lo, x0)
        };
        let m_right = m - m_left;
        let ca = t[i].cos().powi(2);
        let cc = psi[i] * psi[i];
        angle.0 += 0.5 * m_left * ca;
        angle.1 += 0.5 * m_right * ca;
        cosine.0 += 0.5 * m_left * cc;
        cosine.1 += 0.5 * m_right * cc;
    }
    angle.0 += tail_energy(t[0], Side::Left);
    angle.1 += tail_energy(t[n - 1], Side::Right);
    // 1 - |sin theta| = 1 - sqrt(1 - psi^2)
    cosine.0 += 1.0 - (1.0 - psi[0] * psi[0]).max(0.0).sqrt();
    cosine.1 += 1.0 - (1.0 - psi[n - 1] * psi[n - 1]).max(0.0).sqrt();
    Ok(PartialEnergies { x0, angle, cosine })
}

/// Fields and energies sampled along a path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSample {
    pub lambdas: Vec<f64>,
    pub fields: Vec<AngleField>,
    pub energies: Vec<f64>,
}

impl PathSample {
    /// Largest sampled energy and the `lambda` where it occurs.
    pub fn max_energy(&self) -> (f64, f64) {
        self.energies
            .iter()
            .zip(&self.lambdas)
            .fold((f64::NEG_INFINITY, 0.0), |acc, (&e, &l)| {
                if e > acc.0 {
                    (e, l)
                } else {
                    acc
                }
            })
    }

    /// Discrete `H^1` distances between consecutive samples.
    pub fn h1_gaps(&self, grid: &Grid) -> Vec<f64> {
        let h = grid.spacing();
        self.fields
            .windows(2)
            .map(|w| {
                let d: Vec<f64> = w[1]
                    .values
                    .iter()
                    .zip(&w[0].values)
                    .map(|(a, b)| a - b)
                    .collect();
                let l2: f64 = d.iter().map(|v| v * v).sum::<f64>() * h;
                let dx: f64 = d.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>() / h;
                (l2 + dx).sqrt()
            })
            .collect()
    }
}

/// Energies along `P_lambda(theta0)` against the chord bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub x0: f64,
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    /// `(1 - lambda) E_s(theta0) + lambda E_s(theta_*(. - x0))`.
    pub bounds: Vec<f64>,
    /// `max(energy - bound)`, negative when the inequality holds with room.
    pub max_violation: f64,
}

/// `n` uniform values covering `[0, 1]`.
pub fn uniform_lambdas(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

/// Samples `P_lambda(theta0)` and checks the convexity inequality.
pub fn convexity_check(
    theta0: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
    lambdas: &[f64],
    form: ExchangeForm,
) -> Result<ConvexityReport> {
    let x0 = wall_zero(theta0, grid)?;
    let f = Functional::with_form(profile, grid, form);
    let e0 = f.energy(&theta0.values);
    let e1 = f.energy(&translated_wall(x0, grid).values);
    let energies = lambdas
        .par_iter()
        .map(|&l| cos_convex_path(theta0, x0, l, grid).map(|p| f.energy(&p.values)))
        .collect::<Result<Vec<f64>>>()?;
    let bounds: Vec<f64> = lambdas.iter().map(|l| (1.0 - l) * e0 + l * e1).collect();
    let max_violation = energies
        .iter()
        .zip(&bounds)
        .map(|(e, b)| e - b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConvexityReport {
        x0,
        lambdas: lambdas.to_vec(),
        energies,
        bounds,
        max_violation,
    })
}

/// Sampling of the composite path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathOptions {
    /// Samples per segment, endpoints included.
    pub samples: usize,
    /// Stop doubling once the maximum energy moves less than this.
    pub refine_tol: f64,
    pub max_doublings: usize,
    /// Endpoints with a larger gradient norm trigger a warning.
    pub critical_tol: f64,
    pub form: ExchangeForm,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            samples: 101,
            refine_tol: 1e-8,
            max_doublings: 4,
            critical_tol: 1e-6,
            form: ExchangeForm::Quadratic,
        }
    }
}

impl PathOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidOptions(
                "path needs at least 2 samples per segment".into(),
            ));
        }
        if !(self.refine_tol > 0.0) || !(self.critical_tol > 0.0) {
            return Err(Error::InvalidOptions(
                "path tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The composite path from `theta0` to `theta_s` and its energy profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositePath {
    pub sample: PathSample,
    /// Zero of `theta0`.
    pub x0: f64,
    /// Zero of `theta_s`.
    pub xs: f64,
    pub max_energy: f64,
    pub argmax_lambda: f64,
    /// `E_s(theta_*(. - x0))`.
    pub translated_energy: f64,
    /// `2 - max_energy`.
    pub margin: f64,
    /// Samples per segment after refinement.
    pub samples: usize,
    pub endpoint_grad_norms: [f64; 2],
    pub warnings: Vec<String>,
}

/// Three segments joined at `lambda = 1/3` and `2/3`: `P_{3 lambda}(theta0)`,
/// the translation of `theta_*` from `x0` to `xs`, and `P_{3 - 3 lambda}(theta_s)`.
///
/// Each segment is sampled uniformly with its endpoints, and the sampling is
/// doubled until the maximum energy settles.
pub fn composite_path(
    theta0: &AngleField,
    theta_s: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
    opts: &PathOptions,
) -> Result<CompositePath> {
    opts.validate()?;
    grid.check(theta0.len())?;
    grid.check(theta_s.len())?;
    let x0 = wall_zero(theta0, grid)?;
    let xs = wall_zero(theta_s, grid)?;
    let f = Functional::with_form(profile, grid, opts.form);
    let endpoint_grad_norms = [f.grad_norm(&theta0.values), f.grad_norm(&theta_s.values)];
    let mut warnings = Vec::new();
    for (name, g) in ["start", "end"].iter().zip(endpoint_grad_norms) {
        if g > opts.critical_tol {
            warnings.push(format!(
                "{name} wall is not critical: gradient norm {g:.3e} > {:.1e}",
                opts.critical_tol
            ));
        }
    }

    let build = |n: usize| -> Result<PathSample> {
        let t = uniform_lambdas(n);
        let mut jobs: Vec<(f64, u8, f64)> = Vec::with_capacity(3 * n);
        for (seg, skip_first) in [(0u8, false), (1, true), (2, true)] {
            for (k, &tk) in t.iter().enumerate() {
                if skip_first && k == 0 {
                    continue;
                }
                jobs.push(((seg as f64 + tk) / 3.0, seg, tk));
            }
        }
        let fields = jobs
            .par_iter()
            .map(|&(_, seg, tk)| match seg {
                0 => cos_convex_path(theta0, x0, tk, grid),
                1 => Ok(translated_wall(x0 + tk * (xs - x0), grid)),
                _ => cos_convex_path(theta_s, xs, 1.0 - tk, grid),
            })
            .collect::<Result<Vec<AngleField>>>()?;
        let energies = fields.par_iter().map(|p| f.energy(&p.values)).collect();
        Ok(PathSample {
            lambdas: jobs.iter().map(|j| j.0).collect(),
            fields,
            energies,
        })
    };

    let mut n = opts.samples;
    let mut sample = build(n)?;
    let mut best = sample.max_energy().0;
    for _ in 0..opts.max_doublings {
        let finer = build(2 * n - 1)?;
        let m = finer.max_energy().0;
        let settled = (m - best).abs() < opts.refine_tol;
        n = 2 * n - 1;
        sample = finer;
        best = m;
        if settled {
            break;
        }
    }
    let (max_energy, argmax_lambda) = sample.max_energy();
    let translated_energy = f.energy(&translated_wall(x0, grid).values);
    Ok(CompositePath {
        sample,
        x0,
        xs,
        max_energy,
        argmax_lambda,
        translated_energy,
        margin: NOTCHLESS_ENERGY - max_energy,
        samples: n,
        endpoint_grad_norms,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{default_init, minimize, SolveOptions};

    fn wall(p: &NotchProfile, g: &Grid) -> AngleField {
        let r = minimize(p, g, &default_init(p, g), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        r.theta
    }

    #[test]
    fn l_function_plug_in_values() {
        assert_eq!(l_function(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(l_hessian(1.0, 0.0).unwrap(), [[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(l_hessian_det(1.0, 0.0).unwrap(), 4.0);
        assert_eq!(l_function(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(l_hessian_det(0.0, -0.3).unwrap(), 0.0);
        assert!(l_function(1.0, 1.0).is_err());
        assert!(l_hessian(1.0, -1.5).is_err());
        assert!(l_function(1.0, f64::NAN).is_err());
    }

    #[test]
    fn path_endpoints() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::with_spacing(12.0, 0.02).unwrap();
        let t0 = wall(&p, &g);
        let x0 = wall_zero(&t0, &g).unwrap();
        let p0 = cos_convex_path(&t0, x0, 0.0, &g).unwrap();
        let p1 = cos_convex_path(&t0, x0, 1.0, &g).unwrap();
        let star = translated_wall(x0, &g);
        for i in 0..g.len() {
            assert!((p0.values[i] - t0.values[i]).abs() <= 1e-12);
            assert!((p1.values[i] - star.values[i]).abs() <= 1e-12);
        }
        assert!(cos_convex_path(&t0, x0, 1.5, &g).is_err());
        assert!(cos_convex_path(&t0, x0 + 0.5, 0.5, &g).is_err());
        let mut bumpy = t0.clone();
        bumpy.values[g.center() + 10] -= 0.1;
        assert!(cos_convex_path(&bumpy, x0, 0.5, &g).is_err());
    }

    #[test]
    fn partial_energies_of_the_separatrix_split_evenly() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let t = translated_wall(0.0, &g);
        let pe = partial_energies(&t, 0.0, &p, &g, ExchangeForm::Quadratic).unwrap();
        assert!((pe.angle.0 - 1.0).abs() < 1e-4, "{pe:?}");
        assert!((pe.angle.1 - 1.0).abs() < 1e-4, "{pe:?}");
        assert!((pe.angle.0 - pe.angle.1).abs() < 1e-12);
        assert!(pe.identity_gap() <= 1e-8, "{pe:?}");
        let total = Functional::new(&p, &g).energy(&t.values);
        assert!((pe.angle.0 + pe.angle.1 - total).abs() < 1e-12);
        assert!(partial_energies(&t, 1.0, &p, &g, ExchangeForm::Quadratic).is_err());
    }

    #[test]
    fn composite_path_stays_below_the_notchless_energy() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::with_spacing(12.0, 0.02).unwrap();
        let t = wall(&p, &g);
        let c = composite_path(&t, &t, &p, &g, &PathOptions::default()).unwrap();
        assert!(c.warnings.is_empty(), "{:?}", c.warnings);
        assert!((c.max_energy - c.translated_energy).abs() <= 1e-6, "{c:?}");
        assert!(c.max_energy < 2.0 && c.margin > 0.0);
        assert_eq!(c.sample.lambdas.first(), Some(&0.0));
        assert_eq!(c.sample.lambdas.last(), Some(&1.0));
        assert!(c.sample.lambdas.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn notchless_translation_is_flat() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let e: Vec<f64> = [-3.0, 0.0, 2.5]
            .iter()
            .map(|&gm| translated_wall_energy(gm, &p, &g, ExchangeForm::Quadratic))
            .collect();
        for v in e {
            assert!((v - 2.0).abs() <= 1e-4, "{v}");
        }
    }
}
