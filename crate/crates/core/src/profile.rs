//! Notch profiles `s(x)`, their classification, and the change of variable
//! `y(x) = int_0^x du / s(u)`.

use serde::{Deserialize, Serialize};

use crate::field::Grid;
use crate::{Error, Result};

/// Default tolerance used by [`classify`] on closed-form families.
pub const DEFAULT_CLASS_TOL: f64 = 1e-10;

/// Serializable description of a profile, as read from profile files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Linear interpolation between `[x, s]` nodes; equal to 1 outside the node range.
    PiecewiseLinear { nodes: Vec<[f64; 2]> },
    /// `s0` on `|x| <= a - ramp`, linear ramps reaching 1 at `|x| = a`.
    Plateau {
        s0: f64,
        a: f64,
        #[serde(default)]
        ramp: f64,
    },
    /// `1 - (1 - s0) (1 + cos(pi x / a)) / 2` on `[-a, a]`.
    CosineDip { s0: f64, a: f64 },
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Piecewise(Vec<(f64, f64)>),
    Plateau { ramp: f64 },
    CosineDip,
}

/// A validated cross-section profile with `s0 <= s <= 1` and `s = 1` for `|x| > a`.
#[derive(Clone, Debug, PartialEq)]
pub struct NotchProfile {
    spec: ProfileSpec,
    shape: Shape,
    s0: f64,
    a: f64,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidProfile(msg.into())
}

impl NotchProfile {
    /// Validates a spec and builds the profile.
    pub fn new(spec: ProfileSpec) -> Result<Self> {
        match &spec {
            ProfileSpec::Plateau { s0, a, ramp } => {
                check_depth(*s0)?;
                check_width(*a)?;
                if !ramp.is_finite() || *ramp < 0.0 || *ramp > *a {
                    return Err(invalid(format!("ramp must lie in [0, a], got {ramp}")));
                }
                Ok(Self {
                    shape: Shape::Plateau { ramp: *ramp },
                    s0: *s0,
                    a: *a,
                    spec,
                })
            }
            ProfileSpec::CosineDip { s0, a } => {
                check_depth(*s0)?;
                check_width(*a)?;
                Ok(Self {
                    shape: Shape::CosineDip,
                    s0: *s0,
                    a: *a,
                    spec,
                })
            }
            ProfileSpec::PiecewiseLinear { nodes } => {
                if nodes.len() < 2 {
                    return Err(invalid("piecewise profile needs at least two nodes"));
                }
                for w in nodes.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(invalid("piecewise nodes must be strictly increasing in x"));
                    }
                }
                for [x, s] in nodes {
                    if !x.is_finite() || !s.is_finite() {
                        return Err(invalid("piecewise nodes must be finite"));
                    }
                    if *s <= 0.0 || *s > 1.0 {
                        return Err(invalid(format!("node value {s} outside (0, 1]")));
                    }
                }
                let first = nodes[0][1];
                let last = nodes[nodes.len() - 1][1];
                if first != 1.0 || last != 1.0 {
                    return Err(invalid("first and last node values must equal 1"));
                }
                let s0 = nodes.iter().map(|n| n[1]).fold(1.0, f64::min);
                let a = nodes[0][0].abs().max(nodes[nodes.len() - 1][0].abs());
                check_width(a)?;
                let pts = nodes.iter().map(|n| (n[0], n[1])).collect();
                Ok(Self {
                    shape: Shape::Piecewise(pts),
                    s0,
                    a,
                    spec,
                })
            }
        }
    }

    pub fn plateau(s0: f64, a: f64, ramp: f64) -> Result<Self> {
        Self::new(ProfileSpec::Plateau { s0, a, ramp })
    }

    pub fn cosine_dip(s0: f64, a: f64) -> Result<Self> {
        Self::new(ProfileSpec::CosineDip { s0, a })
    }

    pub fn piecewise_linear(nodes: &[(f64, f64)]) -> Result<Self> {
        Self::new(ProfileSpec::PiecewiseLinear {
            nodes: nodes.iter().map(|&(x, s)| [x, s]).collect(),
        })
    }

    /// The constant profile `s = 1`.
    pub fn notchless() -> Self {
        Self::plateau(1.0, 1.0, 0.0).expect("constant profile is valid")
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    /// Minimum value of `s`.
    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Support radius: `s = 1` for `|x| > a`.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn is_notchless(&self) -> bool {
        self.s0 >= 1.0
    }

    /// Evaluates `s(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.s0 >= 1.0 {
            return 1.0;
        }
        let ax = x.abs();
        match &self.shape {
            Shape::Plateau { ramp } => {
                if ax > self.a {
                    1.0
                } else if ax <= self.a - ramp {
                    self.s0
                } else {
                    self.s0 + (1.0 - self.s0) * (ax - (self.a - ramp)) / ramp
                }
            }
            Shape::CosineDip => {
                if ax >= self.a {
                    1.0
                } else {
                    1.0 - 0.5 * (1.0 - self.s0) * (1.0 + (std::f64::consts::PI * ax / self.a).cos())
                }
            }
            Shape::Piecewise(nodes) => {
                let (x_lo, x_hi) = (nodes[0].0, nodes[nodes.len() - 1].0);
                if x <= x_lo || x >= x_hi {
                    return 1.0;
                }
                let k = nodes.partition_point(|n| n.0 <= x);
                let (xa, sa) = nodes[k - 1];
                let (xb, sb) = nodes[k];
                sa + (sb - sa) * (x - xa) / (xb - xa)
            }
        }
    }

    /// Points where `s` fails to be differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        if self.is_notchless() {
            return Vec::new();
        }
        match &self.shape {
            Shape::Plateau { ramp } => {
                let inner = self.a - ramp;
                let mut k = vec![-self.a, self.a];
                if *ramp > 0.0 {
                    k.extend([-inner, inner]);
                }
                k.sort_by(f64::total_cmp);
                k
            }
            Shape::CosineDip => vec![],
            Shape::Piecewise(nodes) => nodes.iter().map(|n| n.0).collect(),
        }
    }

    /// Lipschitz constant of the family. Infinite for a plateau without ramps.
    /// Reported as metadata only.
    pub fn lipschitz(&self) -> f64 {
        if self.is_notchless() {
            return 0.0;
        }
        match &self.shape {
            Shape::Plateau { ramp } => {
                if *ramp > 0.0 {
                    (1.0 - self.s0) / ramp
                } else {
                    f64::INFINITY
                }
            }
            Shape::CosineDip => 0.5 * (1.0 - self.s0) * std::f64::consts::PI / self.a,
            Shape::Piecewise(nodes) => nodes
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Center of the first interval on which `s` attains its minimum.
    pub fn minimum_location(&self) -> f64 {
        match &self.shape {
            Shape::Piecewise(nodes) if !self.is_notchless() => {
                let first = nodes.iter().position(|n| n.1 == self.s0).unwrap_or(0);
                let mut last = first;
                while last + 1 < nodes.len() && nodes[last + 1].1 == self.s0 {
                    last += 1;
                }
                0.5 * (nodes[first].0 + nodes[last].0)
            }
            _ => 0.0,
        }
    }

    /// `s` at every grid node.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().iter().map(|&x| self.eval(x)).collect()
    }

    /// `int_lo^hi du / s(u)` by 5-point Gauss-Legendre on each piece between kinks.
    pub fn integrate_inverse(&self, lo: f64, hi: f64) -> f64 {
        self.quadrature(lo, hi, |s| 1.0 / s)
    }

    /// `int_lo^hi s(u) du`, exact for piecewise linear profiles.
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        self.quadrature(lo, hi, |s| s)
    }

    fn quadrature(&self, lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
        if lo == hi {
            return 0.0;
        }
        if lo > hi {
            return -self.quadrature(hi, lo, g);
        }
        let mut cuts = vec![lo];
        cuts.extend(self.kinks().into_iter().filter(|&k| k > lo && k < hi));
        cuts.push(hi);
        cuts.windows(2)
            .map(|w| {
                let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                r * GAUSS5
                    .iter()
                    .map(|(t, wt)| wt * g(self.eval(c + r * t)))
                    .sum::<f64>()
            })
            .sum()
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn check_depth(s0: f64) -> Result<()> {
    if !s0.is_finite() || s0 <= 0.0 || s0 > 1.0 {
        return Err(invalid(format!("s0 must lie in (0, 1], got {s0}")));
    }
    Ok(())
}

fn check_width(a: f64) -> Result<()> {
    if !a.is_finite() || a <= 0.0 {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    Ok(())
}

/// Class membership flags of a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileClass {
    pub general: bool,
    /// Non-increasing then non-decreasing.
    pub unimodal: bool,
    /// Even and unimodal.
    pub symmetric: bool,
    pub tol: f64,
}

/// Classifies a profile from samples on `[-a, a]` (uniform samples plus kinks).
pub fn classify(profile: &NotchProfile, tol: f64) -> ProfileClass {
    let a = profile.a();
    let m = 4000;
    let mut xs: Vec<f64> = (0..=m)
        .map(|i| -a + 2.0 * a * i as f64 / m as f64)
        .collect();
    xs.extend(profile.kinks().into_iter().filter(|k| k.abs() <= a));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let v: Vec<f64> = xs.iter().map(|&x| profile.eval(x)).collect();

    let k = v
        .iter()
        .enumerate()
        .min_by(|p, q| p.1.total_cmp(q.1))
        .map(|p| p.0)
        .unwrap_or(0);
    let unimodal = v[..=k].windows(2).all(|w| w[1] <= w[0] + tol)
        && v[k..].windows(2).all(|w| w[1] >= w[0] - tol);
    let even = xs
        .iter()
        .all(|&x| (profile.eval(x) - profile.eval(-x)).abs() <= tol);
    ProfileClass {
        general: true,
        unimodal,
        symmetric: unimodal && even,
        tol,
    }
}

/// Tabulated change of variable `y(x) = int_0^x du / s(u)` on a grid.
#[derive(Clone, Debug)]
pub struct ChangeOfVariable {
    profile: NotchProfile,
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    /// `y(-a)`.
    pub a_minus: f64,
    /// `y(a)`.
    pub a_plus: f64,
}

/// Builds the change of variable table on `grid`.
///
/// Each cell is integrated by Gauss-Legendre quadrature, split at profile
/// kinks. The table is accumulated outward from the central node, where `y = 0`.
pub fn change_of_variable(profile: &NotchProfile, grid: &Grid) -> ChangeOfVariable {
    let x = grid.nodes().to_vec();
    let n = x.len();
    let c = grid.center();
    let mut y = vec![0.0; n];
    for i in c + 1..n {
        y[i] = y[i - 1] + profile.integrate_inverse(x[i - 1], x[i]);
    }
    for i in (0..c).rev() {
        y[i] = y[i + 1] - profile.integrate_inverse(x[i], x[i + 1]);
    }
    let sigma = profile.sample(grid);
    let mut cov = ChangeOfVariable {
        profile: profile.clone(),
        x,
        y,
        sigma,
        a_minus: 0.0,
        a_plus: 0.0,
    };
    cov.a_minus = cov.y_of_x(-profile.a());
    cov.a_plus = cov.y_of_x(profile.a());
    cov
}

impl ChangeOfVariable {
    /// `y` at the grid nodes.
    pub fn forward(&self) -> &[f64] {
        &self.y
    }

    /// `sigma(y_i) = s(x_i)` at the grid nodes.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `y(x)` for any `x`; beyond the grid the profile is 1.
    pub fn y_of_x(&self, x: f64) -> f64 {
        let n = self.x.len();
        let k = self.x.partition_point(|&xi| xi <= x).clamp(1, n) - 1;
        self.y[k] + self.profile.integrate_inverse(self.x[k], x)
    }

    /// Inverse map `x(y)`.
    pub fn x_of_y(&self, y: f64) -> f64 {
        let n = self.y.len();
        if y >= self.y[n - 1] {
            return self.x[n - 1] + (y - self.y[n - 1]);
        }
        if y <= self.y[0] {
            return self.x[0] + (y - self.y[0]);
        }
        let k = self.y.partition_point(|&yi| yi <= y) - 1;
        if self.y[k] == y {
            return self.x[k];
        }
        let (xa, xb) = (self.x[k], self.x[k + 1]);
        let t = (y - self.y[k]) / (self.y[k + 1] - self.y[k]);
        let mut xg = xa + t * (xb - xa);
        for _ in 0..3 {
            let r = self.y[k] + self.profile.integrate_inverse(xa, xg) - y;
            xg = (xg - r * self.profile.eval(xg)).clamp(xa, xb);
        }
        xg
    }

    /// `sigma(y) = s(x(y))`.
    pub fn sigma_at(&self, y: f64) -> f64 {
        self.profile.eval(self.x_of_y(y))
    }
}
