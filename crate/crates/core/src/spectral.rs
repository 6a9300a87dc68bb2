//! Linearized operators at a wall in the weighted product `<u, v>_s`:
//!
//! `L1 u = -(1/s)(s u')' + (sin^2 theta - cos^2 theta) u`,
//! `L2 u = -(1/s)(s u')' + (sin^2 theta - theta'^2) u`,
//!
//! with Dirichlet conditions at `+-L`. `L2 = l* l` with `l = d/dx + theta' tan theta`,
//! and `cos theta` spans its kernel.
//!
//! Nodal `theta'^2` is the chord exchange density of the two half cells around
//! a node. At a discrete critical point of the chord energy this makes
//! `L2 cos theta` vanish up to the gradient, so the kernel residual measures
//! how critical the wall is rather than the truncation error.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::Functional;
use crate::field::{AngleField, Grid};
use crate::linalg::SymTridiag;
use crate::profile::NotchProfile;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    L1,
    L2,
}

/// `-(1/s)(s u')' + V u` on the interior nodes.
///
/// Vectors passed to and returned by the operator have full grid length; the
/// two end values are treated as zero.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    pub kind: OperatorKind,
    /// Nodal potential (end entries unused).
    pub potential: Vec<f64>,
    mass: Vec<f64>,
    stiffness: Vec<f64>,
}

/// `theta'^2 - cos^2 theta` with the nodal slope used by the operators.
pub fn defect_field(theta: &AngleField, profile: &NotchProfile, grid: &Grid) -> Result<Vec<f64>> {
    grid.check(theta.len())?;
    let f = Functional::new(profile, grid);
    Ok(f.slope_squared(&theta.values)
        .iter()
        .zip(&theta.values)
        .map(|(d, t)| d - t.cos().powi(2))
        .collect())
}

/// Builds `L1` or `L2` at `theta`.
pub fn assemble(
    kind: OperatorKind,
    theta: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<LinearizedOperator> {
    grid.check(theta.len())?;
    if grid.len() < 3 {
        return Err(Error::InvalidGrid("operators need an interior node".into()));
    }
    let f = Functional::new(profile, grid);
    let potential = match kind {
        OperatorKind::L1 => theta.values.iter().map(|t| -(2.0 * t).cos()).collect(),
        OperatorKind::L2 => f
            .slope_squared(&theta.values)
            .iter()
            .zip(&theta.values)
            .map(|(d, t)| t.sin().powi(2) - d)
            .collect(),
    };
    Ok(LinearizedOperator {
        kind,
        potential,
        mass: f.mass().to_vec(),
        stiffness: f.s_mid().iter().map(|s| s / f.spacing()).collect(),
    })
}

impl LinearizedOperator {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `sum_e k_e (du)_e (dv)_e + sum_i m_i V_i u_i v_i`, i.e. `<A u, v>_s`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.len();
        let uu = |i: usize| if i == 0 || i == n - 1 { 0.0 } else { u[i] };
        let vv = |i: usize| if i == 0 || i == n - 1 { 0.0 } else { v[i] };
        let kin: f64 = (0..n - 1)
            .map(|e| self.stiffness[e] * (uu(e + 1) - uu(e)) * (vv(e + 1) - vv(e)))
            .sum();
        let pot: f64 = (1..n - 1)
            .map(|i| self.mass[i] * self.potential[i] * u[i] * v[i])
            .sum();
        kin + pot
    }

    /// `A u` at the nodes (zero at both ends), with `u` set to zero at the ends.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.rows(u, false)
    }

    /// The difference expression at the interior nodes using the given end
    /// values of `u` instead of zero.
    pub fn apply_with_ends(&self, u: &[f64]) -> Vec<f64> {
        self.rows(u, true)
    }

    fn rows(&self, u: &[f64], keep_ends: bool) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let left = if i > 1 || keep_ends { u[i - 1] } else { 0.0 };
            let right = if i + 2 < n || keep_ends {
                u[i + 1]
            } else {
                0.0
            };
            let k = self.stiffness[i - 1] * (u[i] - left) + self.stiffness[i] * (u[i] - right);
            out[i] = k / self.mass[i] + self.potential[i] * u[i];
        }
        out
    }

    /// `<u, v>_s` over the interior nodes.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        (1..self.len() - 1)
            .map(|i| self.mass[i] * u[i] * v[i])
            .sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Symmetric interior matrix `W^{-1/2} K W^{-1/2} + V`, similar to the
    /// operator.
    pub fn symmetric_matrix(&self) -> SymTridiag {
        let n = self.len();
        let m = n - 2;
        let w: Vec<f64> = self.mass[1..n - 1].iter().map(|x| x.sqrt()).collect();
        let diag = (0..m)
            .map(|j| {
                let i = j + 1;
                (self.stiffness[i - 1] + self.stiffness[i]) / self.mass[i] + self.potential[i]
            })
            .collect();
        let off = (0..m.saturating_sub(1))
            .map(|j| -self.stiffness[j + 1] / (w[j] * w[j + 1]))
            .collect();
        SymTridiag::new(diag, off)
    }
}

/// `l u = u' + theta' tan(theta) u` on the cells, with `theta'` and `u'` the
/// cell differences and `theta`, `u` the cell averages.
///
/// `support` marks the cells where `tan` is needed; a value within `1e-8` of
/// `+-pi/2` there is an error.
fn ell(theta: &[f64], u: &[f64], h: f64, support: &[bool]) -> Result<Vec<f64>> {
    let n = theta.len();
    let mut out = vec![0.0; n - 1];
    for e in 0..n - 1 {
        let du = (u[e + 1] - u[e]) / h;
        if !support[e] {
            out[e] = du;
            continue;
        }
        let tb = 0.5 * (theta[e] + theta[e + 1]);
        for (i, t) in [(e, theta[e]), (e + 1, theta[e + 1])] {
            if t.abs() >= FRAC_PI_2 - 1e-8 {
                return Err(Error::TanSingularity { index: i, theta: t });
            }
        }
        let q = (theta[e + 1] - theta[e]) / h * tb.tan();
        out[e] = du + q * 0.5 * (u[e] + u[e + 1]);
    }
    Ok(out)
}

/// `<l u, l v>_s` with cell weights `h s_e`.
pub fn ell_form(
    theta: &AngleField,
    u: &[f64],
    v: &[f64],
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<f64> {
    grid.check(theta.len())?;
    let f = Functional::new(profile, grid);
    let n = grid.len();
    let clip = |w: &[f64]| -> Vec<f64> {
        let mut c = w.to_vec();
        c[0] = 0.0;
        c[n - 1] = 0.0;
        c
    };
    let (u, v) = (clip(u), clip(v));
    let support: Vec<bool> = (0..n - 1)
        .map(|e| u[e] != 0.0 || u[e + 1] != 0.0 || v[e] != 0.0 || v[e + 1] != 0.0)
        .collect();
    let h = grid.spacing();
    let lu = ell(&theta.values, &u, h, &support)?;
    let lv = ell(&theta.values, &v, h, &support)?;
    Ok(lu
        .iter()
        .zip(&lv)
        .zip(f.s_mid())
        .map(|((a, b), s)| h * s * a * b)
        .sum())
}

/// Random pairs of smooth bumps supported in `|x| <= L - 2`, vanishing
/// identically outside.
pub fn random_probes(grid: &Grid, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.half_length() - 2.0;
    let bump = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let width = rng.gen_range(0.5..3.0f64).min(l);
        let center = rng.gen_range(-(l - width)..=(l - width));
        let amp = rng.gen_range(-1.0..1.0);
        let freq = rng.gen_range(0.0..2.0);
        grid.nodes()
            .iter()
            .map(|&x| {
                let r = (x - center) / width;
                if r.abs() < 1.0 {
                    // C^2 compactly supported bump with a slow oscillation
                    amp * (1.0 - r * r).powi(3) * (1.0 + 0.5 * (freq * x).sin())
                } else {
                    0.0
                }
            })
            .collect()
    };
    (0..count)
        .map(|_| (bump(&mut rng), bump(&mut rng)))
        .collect()
}

/// `max |<L2 u, v>_s - <l u, l v>_s| / (||u||_s ||v||_s)` over the probes.
pub fn factorization_check(
    theta: &AngleField,
    l2: &LinearizedOperator,
    probes: &[(Vec<f64>, Vec<f64>)],
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<f64> {
    if l2.kind != OperatorKind::L2 {
        return Err(Error::InvalidOptions("factorization check needs L2".into()));
    }
    grid.check(l2.len())?;
    let mut gap: f64 = 0.0;
    for (u, v) in probes {
        grid.check(u.len())?;
        grid.check(v.len())?;
        let scale = l2.norm(u) * l2.norm(v);
        if scale == 0.0 {
            continue;
        }
        let lhs = l2.form(u, v);
        let rhs = ell_form(theta, u, v, profile, grid)?;
        gap = gap.max((lhs - rhs).abs() / scale);
    }
    Ok(gap)
}

/// Lowest eigenpair of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub value: f64,
    /// Full grid length, zero at the ends, unit `||.||_s` norm.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Smallest eigenvalue of `op` in the weighted metric by inverse iteration.
///
/// The shift is 0 when the operator has no negative eigenvalue (Sturm count)
/// and the bisection estimate of the lowest eigenvalue otherwise.
pub fn lowest_eigenpair(
    op: &LinearizedOperator,
    rel_tol: f64,
    max_iters: usize,
) -> Result<Eigenpair> {
    let b = op.symmetric_matrix();
    let m = b.len();
    let mut shift = if b.count_below(0.0) == 0 {
        0.0
    } else {
        b.smallest_eigenvalue(1e-10) - 1e-6
    };
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    let mut rho = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..max_iters {
        iterations = it + 1;
        let shifted = SymTridiag::new(b.diag.iter().map(|d| d - shift).collect(), b.off.clone());
        let y = match shifted.solve(&x) {
            Some(y) if y.iter().all(|v| v.is_finite()) => y,
            _ => {
                // exactly singular: move the shift off the eigenvalue
                shift -= 1e-12 * (1.0 + shift.abs());
                continue;
            }
        };
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.iter().map(|v| v / norm).collect();
        let bx = b.apply(&x);
        let next: f64 = x.iter().zip(&bx).map(|(a, c)| a * c).sum();
        if (next - rho).abs() <= rel_tol * next.abs() + 1e-15 {
            rho = next;
            converged = true;
            break;
        }
        rho = next;
    }
    let n = op.len();
    let mut vector = vec![0.0; n];
    for j in 0..m {
        vector[j + 1] = x[j] / op.mass[j + 1].sqrt();
    }
    Ok(Eigenpair {
        value: rho,
        vector,
        iterations,
        converged,
    })
}

/// Coercivity constant: lowest eigenvalue of `L1`.
pub fn coercivity_alpha(l1: &LinearizedOperator) -> Result<Eigenpair> {
    if l1.kind != OperatorKind::L1 {
        return Err(Error::InvalidOptions("coercivity constant needs L1".into()));
    }
    lowest_eigenpair(l1, 1e-10, 1000)
}

/// Spectral audit of a wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub alpha: f64,
    /// `||L2 cos theta||_s`.
    pub kernel_residual: f64,
    /// Largest normalized gap over the probes, see [`factorization_check`].
    pub factorization_gap: f64,
    pub iterations: usize,
    pub eigen_converged: bool,
    /// Rayleigh quotient `<L1 u, u>_s` of the returned unit eigenvector.
    pub rayleigh: f64,
    /// `alpha <= 1/2`, the bottom of the essential spectrum quoted for `L2`.
    /// Informational.
    pub below_essential_marker: bool,
    pub probes: usize,
}

/// Runs the kernel, factorization and coercivity checks at `theta`.
pub fn audit(
    theta: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
    probes: usize,
    seed: u64,
) -> Result<SpectralReport> {
    let l1 = assemble(OperatorKind::L1, theta, profile, grid)?;
    let l2 = assemble(OperatorKind::L2, theta, profile, grid)?;
    let c: Vec<f64> = theta.values.iter().map(|t| t.cos()).collect();
    let kernel_residual = l2.norm(&l2.apply_with_ends(&c));
    let pairs = random_probes(grid, probes, seed);
    let factorization_gap = factorization_check(theta, &l2, &pairs, profile, grid)?;
    let eig = coercivity_alpha(&l1)?;
    let rayleigh = l1.form(&eig.vector, &eig.vector);
    Ok(SpectralReport {
        alpha: eig.value,
        kernel_residual,
        factorization_gap,
        iterations: eig.iterations,
        eigen_converged: eig.converged,
        rayleigh,
        below_essential_marker: eig.value <= 0.5 + 1e-9,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ExchangeForm;
    use crate::solver::{default_init, minimize, SolveOptions};

    fn chord_wall(p: &NotchProfile, h: f64) -> (Grid, AngleField) {
        let g = Grid::for_profile(p, h).unwrap();
        let opts = SolveOptions {
            form: ExchangeForm::Chord,
            ..SolveOptions::default()
        };
        let r = minimize(p, &g, &default_init(p, &g), &opts).unwrap();
        assert!(
            r.converged,
            "{} {:?} {:?}",
            r.iterations,
            r.report,
            &r.energy_history[r.energy_history.len().saturating_sub(5)..]
        );
        (g, r.theta)
    }

    #[test]
    fn operators_are_symmetric_in_the_weighted_product() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let (g, t) = chord_wall(&p, 0.02);
        for kind in [OperatorKind::L1, OperatorKind::L2] {
            let op = assemble(kind, &t, &p, &g).unwrap();
            for (u, v) in random_probes(&g, 20, 3) {
                let a = op.inner(&op.apply(&u), &v);
                let b = op.inner(&u, &op.apply(&v));
                assert!((a - b).abs() <= 1e-10, "{kind:?} {a} {b}");
                assert!((a - op.form(&u, &v)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn potentials_differ_by_the_defect() {
        let p = NotchProfile::cosine_dip(0.6, 1.5).unwrap();
        let (g, t) = chord_wall(&p, 0.02);
        let l1 = assemble(OperatorKind::L1, &t, &p, &g).unwrap();
        let l2 = assemble(OperatorKind::L2, &t, &p, &g).unwrap();
        let d = defect_field(&t, &p, &g).unwrap();
        for ((a, b), d) in l1.potential.iter().zip(&l2.potential).zip(&d) {
            assert!((a - b - d).abs() < 1e-12);
        }
    }

    #[test]
    fn cos_theta_is_in_the_kernel_of_l2() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let (g, t) = chord_wall(&p, 0.01);
        let r = audit(&t, &p, &g, 10, 1).unwrap();
        assert!(r.kernel_residual <= 1e-6, "{r:?}");
        assert!(r.alpha > 0.0);
    }

    #[test]
    fn eigenvector_reproduces_the_rayleigh_quotient() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.0).unwrap();
        let (g, t) = chord_wall(&p, 0.02);
        let l1 = assemble(OperatorKind::L1, &t, &p, &g).unwrap();
        let e = coercivity_alpha(&l1).unwrap();
        assert!(e.converged);
        assert!((l1.norm(&e.vector) - 1.0).abs() < 1e-12);
        let rq = l1.form(&e.vector, &e.vector);
        assert!((rq - e.value).abs() <= 1e-8 * e.value.abs());
        // oracle: Sturm bisection on the similar symmetric matrix
        let oracle = l1.symmetric_matrix().smallest_eigenvalue(1e-13);
        assert!((oracle - e.value).abs() <= 1e-8 * e.value.abs());
    }

    #[test]
    fn tan_singularity_is_reported() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(6.0, 0.1).unwrap();
        let mut t = AngleField::separatrix(&g, 0.0);
        t.values[40] = FRAC_PI_2;
        let l2 = assemble(OperatorKind::L2, &t, &p, &g).unwrap();
        let u: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| (-(x - 2.0) * (x - 2.0)).exp())
            .collect();
        let err = factorization_check(&t, &l2, &[(u.clone(), u)], &p, &g);
        assert!(matches!(err, Err(Error::TanSingularity { .. })));
    }
}
