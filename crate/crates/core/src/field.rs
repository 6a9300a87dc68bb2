//! Grids, angle fields, magnetization fields and the conversions between them.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::profile::NotchProfile;
use crate::{Error, Result};

/// Uniform grid on `[-L, L]` with an odd number of nodes, so that `x = 0` is a node.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    half_length: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !half_length.is_finite() || half_length <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "half length {half_length} must be positive"
            )));
        }
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "node count {n} must be odd and >= 3"
            )));
        }
        let m = (n - 1) / 2;
        let h = half_length / m as f64;
        // symmetric construction: x_{m+k} = -x_{m-k} exactly
        let nodes = (0..n).map(|i| (i as f64 - m as f64) * h).collect();
        Ok(Self {
            half_length: m as f64 * h,
            h,
            nodes,
        })
    }

    /// Grid whose spacing is the closest value to `h` that divides `L`.
    pub fn with_spacing(half_length: f64, h: f64) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidGrid(format!("spacing {h} must be positive")));
        }
        let m = (half_length / h).round().max(1.0) as usize;
        Self::new(half_length, 2 * m + 1)
    }

    /// Default truncation `L = a + 15` for a profile.
    pub fn for_profile(profile: &NotchProfile, h: f64) -> Result<Self> {
        Self::with_spacing(profile.a() + 15.0, h)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the node `x = 0`.
    pub fn center(&self) -> usize {
        (self.nodes.len() - 1) / 2
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![self.h; n];
        w[0] = 0.5 * self.h;
        w[n - 1] = 0.5 * self.h;
        w
    }

    /// Midpoints of the cells.
    pub fn midpoints(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }
}

/// The notchless wall `theta_*(x) = arctan(sinh x)`.
///
/// Written as `sgn(x) (pi/2 - 2 atan(exp(-|x|)))`, which is exactly odd and
/// keeps full relative precision of `pi/2 - |theta_*|` in the tails.
pub fn separatrix(x: f64) -> f64 {
    (FRAC_PI_2 - 2.0 * (-x.abs()).exp().atan()).copysign(x)
}

/// Which end of the truncated line a tail is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Center `c` of the separatrix tail `theta_*(x - c)` that passes through
/// `theta_boundary` at `x = -L` (left) or `x = L` (right).
///
/// Returns an infinite sentinel when `|theta_boundary| >= pi/2`.
pub fn separatrix_tail(theta_boundary: f64, side: Side, half_length: f64) -> f64 {
    if theta_boundary.abs() >= FRAC_PI_2 {
        return match side {
            Side::Left => f64::NEG_INFINITY,
            Side::Right => f64::INFINITY,
        };
    }
    let shift = theta_boundary.tan().asinh();
    match side {
        Side::Right => half_length - shift,
        Side::Left => -half_length - shift,
    }
}

/// Energy `1 - |sin theta|` of the cheapest continuation beyond the boundary:
/// the separatrix arc from `theta_boundary` to the nearest of `+-pi/2`.
///
/// For walls this is `1 + sin theta(-L)` on the left and `1 - sin theta(L)` on
/// the right. A zero boundary value follows the wall convention on each side.
pub fn tail_energy(theta_boundary: f64, side: Side) -> f64 {
    let s = theta_boundary.sin();
    if tail_rises(theta_boundary, side) {
        1.0 - s
    } else {
        1.0 + s
    }
}

/// True when the cheapest tail tends to `+pi/2` (as opposed to `-pi/2`).
pub(crate) fn tail_rises(theta_boundary: f64, side: Side) -> bool {
    let s = theta_boundary.sin();
    match side {
        Side::Left => s > 0.0,
        Side::Right => s >= 0.0,
    }
}

/// Nodal values of the lifting angle. Outside the grid the field continues as
/// separatrix tails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleField {
    pub values: Vec<f64>,
}

impl AngleField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::new(grid.nodes().iter().map(|&x| f(x)).collect())
    }

    /// Samples of `theta_*(x - center)`.
    pub fn separatrix(grid: &Grid, center: f64) -> Self {
        Self::from_fn(grid, |x| separatrix(x - center))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Centers `(c_minus, c_plus)` of the tails attached at `-L` and `L`, for
    /// fields that run from `-pi/2` to `pi/2`.
    pub fn tail_centers(&self, grid: &Grid) -> (f64, f64) {
        let l = grid.half_length();
        (
            separatrix_tail(self.values[0], Side::Left, l),
            separatrix_tail(self.values[self.len() - 1], Side::Right, l),
        )
    }

    /// Linear interpolation on the grid, cheapest separatrix tails beyond it.
    pub fn value_at(&self, grid: &Grid, x: f64) -> f64 {
        let n = self.len();
        let l = grid.half_length();
        if x > l || x < -l {
            let (side, b) = if x > l {
                (Side::Right, self.values[n - 1])
            } else {
                (Side::Left, self.values[0])
            };
            let wall_like = tail_rises(b, side) == (side == Side::Right);
            let sign = if wall_like { 1.0 } else { -1.0 };
            let c = separatrix_tail(sign * b, side, l);
            return if c.is_finite() {
                sign * separatrix(x - c)
            } else {
                b
            };
        }
        let h = grid.spacing();
        let t = (x + l) / h;
        let k = (t.floor() as usize).min(n - 2);
        let f = t - k as f64;
        self.values[k] + f * (self.values[k + 1] - self.values[k])
    }

    /// True when every value lies in `[-pi/2, pi/2]`.
    pub fn in_band(&self) -> bool {
        self.values.iter().all(|t| t.abs() <= FRAC_PI_2)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] - w[0] >= -tol)
    }

    /// Largest decrease between neighbours (0 for a non-decreasing field).
    pub fn monotonicity_defect(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }

    /// `max_i |theta(x_i) + theta(-x_i)|`.
    pub fn odd_defect(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| (self.values[i] + self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// First point where the field becomes nonnegative, located by linear
    /// interpolation inside the first cell where the sign changes.
    pub fn first_zero(&self, grid: &Grid) -> Option<f64> {
        let k = self.values.iter().position(|&t| t >= 0.0)?;
        if k == 0 {
            return None;
        }
        let (ta, tb) = (self.values[k - 1], self.values[k]);
        let (xa, xb) = (grid.nodes()[k - 1], grid.nodes()[k]);
        Some(xa + (xb - xa) * (-ta) / (tb - ta))
    }

    /// Zeros of the piecewise linear interpolant (one per sign change).
    pub fn zeros(&self, grid: &Grid) -> Vec<f64> {
        let x = grid.nodes();
        let mut out = Vec::new();
        for i in 0..self.len() - 1 {
            let (ta, tb) = (self.values[i], self.values[i + 1]);
            if ta == 0.0 {
                out.push(x[i]);
            } else if ta * tb < 0.0 {
                out.push(x[i] + (x[i + 1] - x[i]) * (-ta) / (tb - ta));
            }
        }
        if self.values[self.len() - 1] == 0.0 {
            out.push(x[self.len() - 1]);
        }
        out
    }
}

/// Rotation angle about `e1`, reduced to `[0, 2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationAngle(f64);

impl RotationAngle {
    pub fn new(phi: f64) -> Self {
        let r = phi.rem_euclid(TAU);
        Self(if r >= TAU { 0.0 } else { r })
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Applies `R_phi` to a vector.
    pub fn rotate(self, v: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.0.sin_cos();
        [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]]
    }
}

/// Nodal unit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationField {
    pub values: Vec<[f64; 3]>,
}

impl MagnetizationField {
    pub fn new(values: Vec<[f64; 3]>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max_i | |m_i| - 1 |`.
    pub fn norm_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (norm(*v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn rotated(&self, phi: RotationAngle) -> Self {
        Self::new(self.values.iter().map(|&v| phi.rotate(v)).collect())
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `m_i = R_phi (sin theta_i, cos theta_i, 0)`.
pub fn unlift(theta: &AngleField, phi: RotationAngle) -> MagnetizationField {
    MagnetizationField::new(
        theta
            .values
            .iter()
            .map(|&t| {
                let (s, c) = t.sin_cos();
                phi.rotate([s, c, 0.0])
            })
            .collect(),
    )
}

/// Relative tolerance of the rank-1 planarity test in [`lift`].
pub const PLANARITY_TOL: f64 = 1e-8;

/// Recovers `(theta, phi)` from a planar field.
///
/// The transverse rows `(m2_i, m3_i)` must be colinear. `phi` is the principal
/// direction of those rows, oriented so that the projections sum to a
/// nonnegative value, and `theta` is unwrapped from the left end, whose value
/// lies in `(-pi, pi]`; walls starting near `-e1` start in `[-pi, 0]`.
pub fn lift(m: &MagnetizationField) -> Result<(AngleField, RotationAngle)> {
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for v in &m.values {
        sxx += v[1] * v[1];
        sxy += v[1] * v[2];
        syy += v[2] * v[2];
    }
    let trace = sxx + syy;
    let mut phi = 0.0;
    if trace > 0.0 {
        phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let (s, c) = phi.sin_cos();
        // summed directly; the eigenvalue formula loses everything below sqrt(eps)
        let off: f64 = m.values.iter().map(|v| (c * v[2] - s * v[1]).powi(2)).sum();
        let residual = (off / trace).sqrt();
        if residual > PLANARITY_TOL {
            return Err(Error::NotPlanar { residual });
        }
        let total: f64 = m.values.iter().map(|v| c * v[1] + s * v[2]).sum();
        if total < 0.0 {
            phi += PI;
        }
    }
    let phi = RotationAngle::new(phi);
    let (s, c) = phi.radians().sin_cos();
    let mut theta = Vec::with_capacity(m.len());
    let mut prev = 0.0;
    for (i, v) in m.values.iter().enumerate() {
        let raw = v[0].atan2(c * v[1] + s * v[2]);
        let t = if i == 0 {
            if raw >= PI {
                -PI
            } else {
                raw
            }
        } else {
            raw + TAU * ((prev - raw) / TAU).round()
        };
        theta.push(t);
        prev = t;
    }
    Ok((AngleField::new(theta), phi))
}

/// Tolerance on `|m1 -/+ 1|` at the ends for [`planarize`].
pub const PLANARIZE_END_TOL: f64 = 0.05;

/// Replaces the transverse part `(m2, m3)` by `(|(m2, m3)|, 0)`.
///
/// Keeps `m1` and every norm, and never increases the discrete energy since
/// `|m'|^2 = theta'^2 + phi'^2 cos^2 theta`.
pub fn planarize(m: &MagnetizationField) -> Result<MagnetizationField> {
    let n = m.len();
    if n == 0 {
        return Err(Error::Domain("empty field".into()));
    }
    let (left, right) = (m.values[0][0], m.values[n - 1][0]);
    if left > -1.0 + PLANARIZE_END_TOL || right < 1.0 - PLANARIZE_END_TOL {
        return Err(Error::Domain(format!(
            "field must run from -e1 to e1, found m1 = {left} .. {right}"
        )));
    }
    Ok(MagnetizationField::new(
        m.values
            .iter()
            .map(|v| [v[0], v[1].hypot(v[2]), 0.0])
            .collect(),
    ))
}
