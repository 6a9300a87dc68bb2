//! Energy nonincreasing transforms of angle fields: thresholding, reflection
//! after the first zero, monotone envelope, symmetric rearrangement in the
//! `y` variable, and localization of the zero set at the notch.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::Functional;
use crate::field::{AngleField, Grid};
use crate::profile::{change_of_variable, classify, NotchProfile, DEFAULT_CLASS_TOL};
use crate::{Error, Result};

/// Energies around one transform application.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub transform: Transform,
    pub energy_before: f64,
    pub energy_after: f64,
    pub changed: bool,
    /// First zero of the input, if it has a sign change.
    pub rho: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Threshold,
    Reflect,
    Envelope,
    Symmetrize,
    Localize,
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "threshold" => Ok(Self::Threshold),
            "reflect" => Ok(Self::Reflect),
            "envelope" => Ok(Self::Envelope),
            "symmetrize" => Ok(Self::Symmetrize),
            "localize" => Ok(Self::Localize),
            other => Err(Error::InvalidOptions(format!(
                "unknown transform '{other}'"
            ))),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Threshold => "threshold",
            Self::Reflect => "reflect",
            Self::Envelope => "envelope",
            Self::Symmetrize => "symmetrize",
            Self::Localize => "localize",
        };
        f.write_str(s)
    }
}

/// Clamps every value to `[-pi/2, pi/2]`.
pub fn threshold(theta: &AngleField) -> AngleField {
    AngleField::new(
        theta
            .values
            .iter()
            .map(|t| t.clamp(-FRAC_PI_2, FRAC_PI_2))
            .collect(),
    )
}

/// Index of the first node with `theta >= 0`, if the field changes sign.
fn split_index(theta: &AngleField) -> Option<usize> {
    match theta.values.iter().position(|&t| t >= 0.0) {
        Some(k) if k > 0 => Some(k),
        _ => None,
    }
}

/// Keeps `theta` up to its first zero and replaces it by `|theta|` afterwards.
pub fn reflect_monotone(theta: &AngleField) -> Result<AngleField> {
    let k = split_index(theta)
        .ok_or_else(|| Error::Domain("field has no sign change on the grid".into()))?;
    let mut out = theta.values.clone();
    for v in &mut out[k..] {
        *v = v.abs();
    }
    Ok(AngleField::new(out))
}

/// Running infimum from the right before the first zero, running supremum from
/// the left after it. The result is non-decreasing.
pub fn monotone_envelope(theta: &AngleField) -> AngleField {
    let n = theta.len();
    let k = split_index(theta).unwrap_or(if theta.values[0] >= 0.0 { 0 } else { n });
    let mut out = theta.values.clone();
    for i in (0..k.saturating_sub(1)).rev() {
        out[i] = out[i].min(out[i + 1]);
    }
    for i in k + 1..n {
        out[i] = out[i].max(out[i - 1]);
    }
    AngleField::new(out)
}

fn reversed(v: &[f64]) -> Vec<f64> {
    v.iter().rev().copied().collect()
}

fn interp_uniform(values: &[f64], step: f64, y: f64) -> f64 {
    let t = y / step;
    let k = (t.floor() as usize).min(values.len() - 2);
    let f = t - k as f64;
    values[k] + f * (values[k + 1] - values[k])
}

/// Symmetric rearrangement in the `y` variable.
///
/// `pi/2 - |theta|` is resampled on a uniform `y` grid, rearranged into a
/// symmetric decreasing sequence, and turned back into an odd non-decreasing
/// field. A candidate that would raise the discrete energy (interpolation can
/// outweigh the gain for nearly odd inputs) is discarded and the input is
/// returned.
pub fn symmetrize(theta: &AngleField, profile: &NotchProfile, grid: &Grid) -> Result<AngleField> {
    grid.check(theta.len())?;
    if !classify(profile, DEFAULT_CLASS_TOL).symmetric {
        return Err(Error::Class(
            "symmetrize needs an even unimodal profile".into(),
        ));
    }
    if !theta.is_nondecreasing(0.0) {
        return Err(Error::Domain(
            "symmetrize needs a non-decreasing field".into(),
        ));
    }
    let cov = change_of_variable(profile, grid);
    let n = grid.len();
    let c = grid.center();
    let hy = grid.spacing();
    let y_right = &cov.forward()[c..];
    let big_y = y_right[y_right.len() - 1];
    let jmax = (big_y / hy).ceil() as usize + 1;

    // samples of pi/2 - |theta| at y = +-j hy; the left half is read through
    // the mirrored field so that odd inputs give exactly even samples
    let mirror = AngleField::new(reversed(&theta.values));
    let mut plus = Vec::with_capacity(jmax + 1);
    let mut minus = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let x = cov.x_of_y(j as f64 * hy);
        plus.push(FRAC_PI_2 - theta.value_at(grid, x).abs());
        minus.push(FRAC_PI_2 - mirror.value_at(grid, x).abs());
    }
    let symmetric_decreasing = plus == minus && plus.windows(2).all(|w| w[1] <= w[0]);
    if symmetric_decreasing {
        // the rearrangement leaves the samples unchanged
        return Ok(theta.clone());
    }
    let mut pool: Vec<f64> = plus.clone();
    pool.extend_from_slice(&minus[1..]);
    pool.sort_by(|a, b| b.total_cmp(a));

    // cell k of the symmetric layout takes ranks 2k-1 and 2k
    let mut rearranged = vec![0.0; jmax + 1];
    rearranged[0] = pool[0];
    for k in 1..=jmax {
        rearranged[k] = 0.5 * (pool[2 * k - 1] + pool[2 * k]);
    }
    let mut upper: Vec<f64> = rearranged.iter().map(|g| FRAC_PI_2 - g).collect();
    upper[0] = 0.0;

    let mut out = vec![0.0; n];
    for i in c..n {
        let v = interp_uniform(&upper, hy, cov.forward()[i]);
        out[i] = v;
        out[n - 1 - i] = -v;
    }
    out[c] = 0.0;

    let f = Functional::new(profile, grid);
    if f.energy(&out) > f.energy(&theta.values) {
        return Ok(theta.clone());
    }
    Ok(AngleField::new(out))
}

/// Translates the field in the `y` variable so that its zero set meets
/// `[y(-a), y(a)]`. No-op when it already does, when the field has no zero,
/// or when the shifted field would have a larger discrete energy.
pub fn localize(theta: &AngleField, profile: &NotchProfile, grid: &Grid) -> Result<AngleField> {
    grid.check(theta.len())?;
    let a = profile.a();
    let x = grid.nodes();
    let n = theta.len();
    let Some(z_lo) = theta.first_zero(grid) else {
        return Ok(theta.clone());
    };
    let z_hi = match theta.values.iter().rposition(|&t| t <= 0.0) {
        Some(k) if k + 1 < n => {
            let (ta, tb) = (theta.values[k], theta.values[k + 1]);
            if ta == 0.0 {
                x[k]
            } else {
                x[k] + (x[k + 1] - x[k]) * (-ta) / (tb - ta)
            }
        }
        _ => return Ok(theta.clone()),
    };
    // a zero placed on the notch edge by an earlier call counts as inside
    if z_hi >= -a - 1e-12 && z_lo <= a + 1e-12 {
        return Ok(theta.clone());
    }
    let cov = change_of_variable(profile, grid);
    let delta = if z_hi < -a {
        cov.a_minus - cov.y_of_x(z_hi)
    } else {
        cov.a_plus - cov.y_of_x(z_lo)
    };
    let shifted: Vec<f64> = cov
        .forward()
        .iter()
        .map(|&y| theta.value_at(grid, cov.x_of_y(y - delta)))
        .collect();
    let f = Functional::new(profile, grid);
    if f.energy(&shifted) > f.energy(&theta.values) {
        return Ok(theta.clone());
    }
    Ok(AngleField::new(shifted))
}

/// Applies one transform.
pub fn apply(
    transform: Transform,
    theta: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<AngleField> {
    match transform {
        Transform::Threshold => Ok(threshold(theta)),
        Transform::Reflect => reflect_monotone(theta),
        Transform::Envelope => Ok(monotone_envelope(theta)),
        Transform::Symmetrize => symmetrize(theta, profile, grid),
        Transform::Localize => localize(theta, profile, grid),
    }
}

/// Applies one transform and records the energies.
pub fn apply_with_report(
    transform: Transform,
    theta: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<(AngleField, TransformReport)> {
    grid.check(theta.len())?;
    let f = Functional::new(profile, grid);
    let out = apply(transform, theta, profile, grid)?;
    let report = TransformReport {
        transform,
        energy_before: f.energy(&theta.values),
        energy_after: f.energy(&out.values),
        changed: out != *theta,
        rho: theta.first_zero(grid),
    };
    Ok((out, report))
}

/// Applies a chain of transforms in order.
pub fn apply_chain(
    chain: &[Transform],
    theta: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<(AngleField, Vec<TransformReport>)> {
    let mut cur = theta.clone();
    let mut reports = Vec::with_capacity(chain.len());
    for &t in chain {
        let (next, r) = apply_with_report(t, &cur, profile, grid)?;
        reports.push(r);
        cur = next;
    }
    Ok((cur, reports))
}

/// Parses a comma separated chain such as `threshold,reflect,envelope`.
pub fn parse_chain(s: &str) -> Result<Vec<Transform>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::separatrix;

    fn energy(t: &AngleField, p: &NotchProfile, g: &Grid) -> f64 {
        Functional::new(p, g).energy(&t.values)
    }

    #[test]
    fn threshold_clamps() {
        let t = threshold(&AngleField::new(vec![-2.0, 0.3, 1.8]));
        assert_eq!(t.values, vec![-FRAC_PI_2, 0.3, FRAC_PI_2]);
        let g = Grid::with_spacing(12.0, 0.02).unwrap();
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let wall = AngleField::separatrix(&g, 0.0);
        assert_eq!(threshold(&wall), wall);
        let over = AngleField::new(wall.values.iter().map(|v| 1.2 * v).collect());
        assert!(energy(&threshold(&over), &p, &g) < energy(&over, &p, &g));
    }

    #[test]
    fn reflect_examples() {
        let g = Grid::with_spacing(12.0, 0.02).unwrap();
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let wall = AngleField::separatrix(&g, 0.0);
        assert_eq!(reflect_monotone(&wall).unwrap(), wall);
        let dip = AngleField::from_fn(&g, |x| {
            separatrix(x) - 2.5 * (-(x - 2.0) * (x - 2.0) * 4.0).exp()
        });
        assert!(dip
            .values
            .iter()
            .zip(g.nodes())
            .any(|(v, x)| *x > 1.5 && *v < 0.0));
        let r = reflect_monotone(&dip).unwrap();
        let rho = dip.first_zero(&g).unwrap();
        for ((v, w), x) in r.values.iter().zip(&dip.values).zip(g.nodes()) {
            assert_eq!(v.abs(), w.abs());
            if *x > rho {
                assert!(*v >= 0.0);
            }
        }
        assert!(energy(&r, &p, &g) < energy(&dip, &p, &g));
        assert!(reflect_monotone(&AngleField::new(vec![0.1; 5])).is_err());
        let odd = AngleField::from_fn(&g, |x| x * (-x * x).exp());
        assert!(odd.first_zero(&g).unwrap().abs() < 1e-15);
        let r = reflect_monotone(&odd).unwrap();
        assert_eq!(r.odd_defect(), 0.0);
    }

    #[test]
    fn envelope_examples() {
        let t = monotone_envelope(&AngleField::new(vec![-0.2, -0.1, 0.0, 0.5, 0.3, 0.8]));
        assert_eq!(t.values, vec![-0.2, -0.1, 0.0, 0.5, 0.5, 0.8]);
        let t = monotone_envelope(&AngleField::new(vec![-0.3, -0.1, -0.2, 0.5]));
        assert_eq!(t.values, vec![-0.3, -0.2, -0.2, 0.5]);
        let g = Grid::with_spacing(12.0, 0.02).unwrap();
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let wiggly = AngleField::from_fn(&g, |x| {
            (separatrix(x) + 0.1 * (3.0 * x).sin() * (-x * x / 8.0).exp())
                .clamp(-FRAC_PI_2, FRAC_PI_2)
        });
        let r = monotone_envelope(&reflect_monotone(&wiggly).unwrap());
        assert!(r.is_nondecreasing(0.0));
        assert!(energy(&r, &p, &g) < energy(&wiggly, &p, &g));
    }

    #[test]
    fn symmetrize_examples() {
        let g = Grid::with_spacing(16.0, 0.02).unwrap();
        let p = NotchProfile::plateau(0.5, 1.0, 0.0).unwrap();
        let wall = AngleField::separatrix(&g, 0.0);
        let s = symmetrize(&wall, &p, &g).unwrap();
        for (a, b) in s.values.iter().zip(&wall.values) {
            assert!((a - b).abs() < 1e-10);
        }
        let shifted = AngleField::separatrix(&g, 1.0);
        let s = symmetrize(&shifted, &p, &g).unwrap();
        assert!(s.odd_defect() <= 1e-10);
        assert!(s.is_nondecreasing(0.0));
        assert!(energy(&s, &p, &g) < energy(&shifted, &p, &g));
        let twice = symmetrize(&s, &p, &g).unwrap();
        for (a, b) in twice.values.iter().zip(&s.values) {
            assert!((a - b).abs() <= 1e-12);
        }
        let lopsided =
            NotchProfile::piecewise_linear(&[(-1.0, 1.0), (-0.5, 0.6), (0.0, 1.0)]).unwrap();
        assert!(matches!(
            symmetrize(&wall, &lopsided, &g),
            Err(Error::Class(_))
        ));
        let bumpy = AngleField::from_fn(&g, |x| (x * 0.3).sin());
        assert!(matches!(symmetrize(&bumpy, &p, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn localize_examples() {
        let g = Grid::with_spacing(16.0, 0.02).unwrap();
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let wall = AngleField::separatrix(&g, 0.0);
        assert_eq!(localize(&wall, &p, &g).unwrap(), wall);
        let far = AngleField::separatrix(&g, 10.0);
        let l = localize(&far, &p, &g).unwrap();
        let z = l.first_zero(&g).unwrap();
        assert!((z - 1.0).abs() < 1e-6, "{z}");
        assert!(energy(&l, &p, &g) < energy(&far, &p, &g));
        let flat = NotchProfile::notchless();
        let far = AngleField::separatrix(&g, 6.0);
        let l = localize(&far, &flat, &g).unwrap();
        assert!((energy(&l, &flat, &g) - energy(&far, &flat, &g)).abs() < 1e-6);
    }

    #[test]
    fn chain_parsing() {
        assert_eq!(
            parse_chain("threshold,reflect,envelope,symmetrize").unwrap(),
            vec![
                Transform::Threshold,
                Transform::Reflect,
                Transform::Envelope,
                Transform::Symmetrize
            ]
        );
        assert!(parse_chain("threshold,fold").is_err());
    }
}
