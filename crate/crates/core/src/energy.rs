//! Discrete energy `E_s`, its gradient and Hessian, the weighted inner product
//! `<u, v>_s = int u v s`, and the first-integral defect `theta'^2 - cos^2 theta`.
//!
//! The exchange term uses the flux form with the harmonic cell average of `s`,
//! the anisotropy term lumped masses `int s` over dual cells, and the separatrix tails beyond
//! `+-L` are added in closed form. Gradient and Hessian are exact derivatives
//! of this discrete energy.

use serde::{Deserialize, Serialize};

use crate::field::{tail_energy, tail_rises, AngleField, Grid, MagnetizationField, Side};
use crate::linalg::SymTridiag;
use crate::profile::NotchProfile;
use crate::Result;

/// Discretization of the exchange term on a cell with increment `d = theta_{i+1} - theta_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeForm {
    /// `s d^2 / (2h)`.
    #[default]
    Quadratic,
    /// `s (1 - cos d) / h`, i.e. `s |m_{i+1} - m_i|^2 / (2h)` for the unlifted field.
    Chord,
}

/// Energy breakdown of an angle field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub exchange: f64,
    pub anisotropy: f64,
    pub tail_energy: f64,
    pub total: f64,
    /// `||g||_s` for the gradient `g` in the weighted metric.
    pub grad_norm: f64,
    /// Extrema of `theta'^2 - cos^2 theta` over the nodes with `|x| <= a`.
    pub defect_min: f64,
    pub defect_max: f64,
}

/// The discrete energy on a fixed profile and grid.
#[derive(Clone, Debug)]
pub struct Functional {
    h: f64,
    a: f64,
    x: Vec<f64>,
    s_mid: Vec<f64>,
    mass: Vec<f64>,
    form: ExchangeForm,
}

impl Functional {
    pub fn new(profile: &NotchProfile, grid: &Grid) -> Self {
        Self::with_form(profile, grid, ExchangeForm::Quadratic)
    }

    pub fn with_form(profile: &NotchProfile, grid: &Grid, form: ExchangeForm) -> Self {
        // harmonic cell average of s and dual-cell integrals of s, so that a
        // jump of s at a node or inside a cell keeps second order accuracy
        let x = grid.nodes();
        let h = grid.spacing();
        let n = x.len();
        let s_mid = x
            .windows(2)
            .map(|w| h / profile.integrate_inverse(w[0], w[1]))
            .collect();
        let mass = (0..n)
            .map(|i| {
                let lo = if i == 0 { x[0] } else { x[i] - 0.5 * h };
                let hi = if i == n - 1 { x[n - 1] } else { x[i] + 0.5 * h };
                profile.integrate(lo, hi)
            })
            .collect();
        Self {
            h: grid.spacing(),
            a: profile.a(),
            x: grid.nodes().to_vec(),
            s_mid,
            mass,
            form,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn form(&self) -> ExchangeForm {
        self.form
    }

    /// Quadrature weights of the weighted inner product: `int s` over the dual cell of each node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Harmonic average of `s` over each cell.
    pub fn s_mid(&self) -> &[f64] {
        &self.s_mid
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// `(exchange, anisotropy, tails)`.
    pub fn parts(&self, theta: &[f64]) -> (f64, f64, f64) {
        let n = theta.len();
        let exchange: f64 = theta
            .windows(2)
            .zip(&self.s_mid)
            .map(|(w, s)| {
                let d = w[1] - w[0];
                match self.form {
                    ExchangeForm::Quadratic => 0.5 * s * d * d / self.h,
                    ExchangeForm::Chord => 2.0 * s * (0.5 * d).sin().powi(2) / self.h,
                }
            })
            .sum();
        let anisotropy: f64 = theta
            .iter()
            .zip(&self.mass)
            .map(|(t, m)| {
                let c = t.cos();
                0.5 * m * c * c
            })
            .sum();
        let tails = tail_energy(theta[0], Side::Left) + tail_energy(theta[n - 1], Side::Right);
        (exchange, anisotropy, tails)
    }

    pub fn energy(&self, theta: &[f64]) -> f64 {
        let (e, a, t) = self.parts(theta);
        e + a + t
    }

    /// Partial derivatives `dE / d theta_i`.
    pub fn euclidean_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let n = theta.len();
        let mut g: Vec<f64> = theta
            .iter()
            .zip(&self.mass)
            .map(|(t, m)| {
                let (s, c) = t.sin_cos();
                -m * c * s
            })
            .collect();
        for i in 0..n - 1 {
            let d = theta[i + 1] - theta[i];
            let flux = match self.form {
                ExchangeForm::Quadratic => self.s_mid[i] * d / self.h,
                ExchangeForm::Chord => self.s_mid[i] * d.sin() / self.h,
            };
            g[i] -= flux;
            g[i + 1] += flux;
        }
        g[0] += tail_slope(theta[0], Side::Left);
        g[n - 1] += tail_slope(theta[n - 1], Side::Right);
        g
    }

    /// Gradient in the weighted metric: `dE . v = <g, v>_s` for every `v`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.euclidean_gradient(theta)
            .iter()
            .zip(&self.mass)
            .map(|(g, m)| g / m)
            .collect()
    }

    /// `||g||_s` computed from the Euclidean gradient.
    pub fn grad_norm(&self, theta: &[f64]) -> f64 {
        self.euclidean_gradient(theta)
            .iter()
            .zip(&self.mass)
            .map(|(g, m)| g * g / m)
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean Hessian of the discrete energy.
    pub fn hessian(&self, theta: &[f64]) -> SymTridiag {
        let n = theta.len();
        let mut diag: Vec<f64> = theta
            .iter()
            .zip(&self.mass)
            .map(|(t, m)| -m * (2.0 * t).cos())
            .collect();
        let mut off = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let k = match self.form {
                ExchangeForm::Quadratic => self.s_mid[i] / self.h,
                ExchangeForm::Chord => self.s_mid[i] * (theta[i + 1] - theta[i]).cos() / self.h,
            };
            diag[i] += k;
            diag[i + 1] += k;
            off[i] = -k;
        }
        diag[0] += tail_curvature(theta[0], Side::Left);
        diag[n - 1] += tail_curvature(theta[n - 1], Side::Right);
        SymTridiag::new(diag, off)
    }

    /// Weighted `H^1` metric: stiffness `int s u' v'` plus mass `int s u v`.
    pub fn sobolev_metric(&self) -> SymTridiag {
        let n = self.len();
        let mut diag = self.mass.clone();
        let mut off = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let k = self.s_mid[i] / self.h;
            diag[i] += k;
            diag[i + 1] += k;
            off[i] = -k;
        }
        SymTridiag::new(diag, off)
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.mass)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// `theta'^2 - cos^2 theta` with centered differences inside and
    /// one-sided differences at the two end nodes.
    pub fn defect(&self, theta: &[f64]) -> Vec<f64> {
        derivative(theta, self.h)
            .iter()
            .zip(theta)
            .map(|(d, t)| {
                let c = t.cos();
                d * d - c * c
            })
            .collect()
    }

    /// Nodal `theta'^2` from the chord exchange density of the two adjacent
    /// half cells: `sum s (1 - cos d) / (h m_i)`.
    pub fn slope_squared(&self, theta: &[f64]) -> Vec<f64> {
        let n = theta.len();
        let mut out = vec![0.0; n];
        for i in 0..n - 1 {
            let e = 2.0 * self.s_mid[i] * (0.5 * (theta[i + 1] - theta[i])).sin().powi(2) / self.h;
            out[i] += e;
            out[i + 1] += e;
        }
        out.iter_mut().zip(&self.mass).for_each(|(v, m)| *v /= m);
        out
    }

    pub fn report(&self, theta: &[f64]) -> EnergyReport {
        let (exchange, anisotropy, tails) = self.parts(theta);
        let defect = self.defect(theta);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (d, x) in defect.iter().zip(&self.x) {
            if x.abs() <= self.a {
                lo = lo.min(*d);
                hi = hi.max(*d);
            }
        }
        EnergyReport {
            exchange,
            anisotropy,
            tail_energy: tails,
            total: exchange + anisotropy + tails,
            grad_norm: self.grad_norm(theta),
            defect_min: lo,
            defect_max: hi,
        }
    }
}

fn tail_slope(t: f64, side: Side) -> f64 {
    if tail_rises(t, side) {
        -t.cos()
    } else {
        t.cos()
    }
}

fn tail_curvature(t: f64, side: Side) -> f64 {
    if tail_rises(t, side) {
        t.sin()
    } else {
        -t.sin()
    }
}

/// Centered differences inside, one-sided at the ends.
pub fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (f[1] - f[0]) / h
            } else if i == n - 1 {
                (f[n - 1] - f[n - 2]) / h
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Energy report of `theta`.
pub fn energy(theta: &AngleField, profile: &NotchProfile, grid: &Grid) -> Result<EnergyReport> {
    grid.check(theta.len())?;
    Ok(Functional::new(profile, grid).report(&theta.values))
}

/// Gradient of the discrete energy in the weighted metric.
pub fn gradient(theta: &AngleField, profile: &NotchProfile, grid: &Grid) -> Result<Vec<f64>> {
    grid.check(theta.len())?;
    Ok(Functional::new(profile, grid).gradient(&theta.values))
}

/// Lumped-mass approximation of `int u v s`.
pub fn weighted_inner(u: &[f64], v: &[f64], profile: &NotchProfile, grid: &Grid) -> Result<f64> {
    grid.check(u.len())?;
    grid.check(v.len())?;
    Ok(Functional::new(profile, grid).inner(u, v))
}

/// Pointwise first-integral defect `theta'^2 - cos^2 theta`.
pub fn pointwise_defect(
    theta: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<Vec<f64>> {
    grid.check(theta.len())?;
    Ok(Functional::new(profile, grid).defect(&theta.values))
}

/// Discrete `E_s(m) = 1/2 int |m'|^2 s + 1/2 int (m2^2 + m3^2) s` with the
/// tail energies `1 - |m1|` at both ends.
pub fn magnetization_energy(
    m: &MagnetizationField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<f64> {
    grid.check(m.len())?;
    let f = Functional::new(profile, grid);
    let h = grid.spacing();
    let v = &m.values;
    let n = v.len();
    let exchange: f64 = v
        .windows(2)
        .zip(f.s_mid())
        .map(|(w, s)| {
            let d2: f64 = (0..3).map(|k| (w[1][k] - w[0][k]).powi(2)).sum();
            0.5 * s * d2 / h
        })
        .sum();
    let anisotropy: f64 = v
        .iter()
        .zip(f.mass())
        .map(|(m, w)| 0.5 * w * (m[1] * m[1] + m[2] * m[2]))
        .sum();
    Ok(exchange + anisotropy + (1.0 - v[0][0].abs()) + (1.0 - v[n - 1][0].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::separatrix;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn constant_at_easy_axis_has_no_energy() {
        let g = Grid::new(5.0, 51).unwrap();
        let r = energy(
            &AngleField::new(vec![FRAC_PI_2; 51]),
            &NotchProfile::notchless(),
            &g,
        )
        .unwrap();
        assert!(r.total.abs() < 1e-15);
    }

    #[test]
    fn separatrix_energy_is_two() {
        // analytic value int sech^2 = 2
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let p = NotchProfile::notchless();
        let r = energy(&AngleField::separatrix(&g, 0.0), &p, &g).unwrap();
        assert!((r.total - 2.0).abs() < 1e-4, "{}", r.total);
        assert!((r.total - (r.exchange + r.anisotropy + r.tail_energy)).abs() < 1e-15);
        let q = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let r = energy(&AngleField::separatrix(&g, 0.0), &q, &g).unwrap();
        assert!(r.total < 2.0);
    }

    #[test]
    fn separatrix_gradient_is_small() {
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let p = NotchProfile::notchless();
        let gr = gradient(&AngleField::separatrix(&g, 0.0), &p, &g).unwrap();
        // second-order truncation h^2 theta''''/12 is about 1.3e-5 at h = 0.01
        let max = gr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 2e-5, "{max}");
        let fine = Grid::with_spacing(20.0, 0.0025).unwrap();
        let gr = gradient(&AngleField::separatrix(&fine, 0.0), &p, &fine).unwrap();
        assert!(gr.iter().all(|v| v.abs() <= 1e-6));
        let gr = gradient(&AngleField::new(vec![0.0; g.len()]), &p, &g).unwrap();
        assert!(gr[1..g.len() - 1].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn inner_product_examples() {
        let g = Grid::new(1.0, 101).unwrap();
        let one = vec![1.0; 101];
        let p = NotchProfile::notchless();
        assert!((weighted_inner(&one, &one, &p, &g).unwrap() - 2.0).abs() < 1e-14);
        assert!(weighted_inner(&one, &one[1..], &p, &g).is_err());
        let q = NotchProfile::plateau(0.5, 0.7, 0.2).unwrap();
        let odd: Vec<f64> = g.nodes().iter().map(|x| x.powi(3)).collect();
        let even: Vec<f64> = g.nodes().iter().map(|x| x.cos()).collect();
        assert!(weighted_inner(&odd, &even, &q, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn defect_of_constant() {
        let g = Grid::new(2.0, 21).unwrap();
        let d = pointwise_defect(
            &AngleField::new(vec![FRAC_PI_4; 21]),
            &NotchProfile::notchless(),
            &g,
        )
        .unwrap();
        assert!(d.iter().all(|v| (v + 0.5).abs() < 1e-15));
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let d = pointwise_defect(
            &AngleField::separatrix(&g, 0.0),
            &NotchProfile::notchless(),
            &g,
        )
        .unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn separatrix_convergence_order() {
        let p = NotchProfile::notchless();
        let err: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| {
                let g = Grid::with_spacing(20.0, h).unwrap();
                (energy(&AngleField::separatrix(&g, 0.0), &p, &g)
                    .unwrap()
                    .total
                    - 2.0)
                    .abs()
            })
            .collect();
        let o1 = (err[0] / err[1]).log2();
        let o2 = (err[1] / err[2]).log2();
        assert!(o1 >= 1.9 && o2 >= 1.9, "{o1} {o2}");
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let p = NotchProfile::cosine_dip(0.4, 1.5).unwrap();
        let g = Grid::new(6.0, 121).unwrap();
        for form in [ExchangeForm::Quadratic, ExchangeForm::Chord] {
            let f = Functional::with_form(&p, &g, form);
            let theta: Vec<f64> = g
                .nodes()
                .iter()
                .map(|&x| separatrix(1.3 * x - 0.2) + 0.1 * x.sin())
                .collect();
            let v: Vec<f64> = g.nodes().iter().map(|&x| (0.7 * x).cos()).collect();
            let hv = f.hessian(&theta).apply(&v);
            let eps = 1e-6;
            let plus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + eps * d).collect();
            let minus: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - eps * d).collect();
            let (gp, gm) = (f.euclidean_gradient(&plus), f.euclidean_gradient(&minus));
            for i in 0..g.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * eps);
                assert!((fd - hv[i]).abs() < 1e-6 * (1.0 + hv[i].abs()));
            }
        }
    }

    #[test]
    fn planar_magnetization_energy_matches_chord_form() {
        let p = NotchProfile::plateau(0.6, 1.0, 0.3).unwrap();
        let g = Grid::new(8.0, 161).unwrap();
        let theta = AngleField::separatrix(&g, 0.3);
        let m = crate::field::unlift(&theta, crate::field::RotationAngle::new(1.1));
        let em = magnetization_energy(&m, &p, &g).unwrap();
        let et = Functional::with_form(&p, &g, ExchangeForm::Chord).energy(&theta.values);
        assert!((em - et).abs() < 1e-12);
    }
}
