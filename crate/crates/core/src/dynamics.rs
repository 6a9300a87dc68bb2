//! Landau-Lifshitz-Gilbert evolution
//! `m_t = -m x H(m) - alpha m x (m x H(m))` with
//! `H(m) = (1/s)(s m')' - (m2 e2 + m3 e3)`.
//!
//! `H` is minus the gradient of the discrete energy (chord exchange, lumped
//! masses, tails `1 - |m1|` continuing the end nodes to `-+e1`) in the weighted
//! product, so `<H(m), dm>_s = -dE(m) . dm`. The end nodes see a one-sided flux
//! plus the pull of their tail.

use serde::{Deserialize, Serialize};

#[cfg(doc)]
use crate::energy::magnetization_energy;
use crate::energy::Functional;
use crate::field::{unlift, AngleField, Grid, MagnetizationField, RotationAngle};
use crate::profile::NotchProfile;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LLGOptions {
    /// Gilbert damping. Zero gives the precession-only flow.
    pub alpha_gilbert: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Record every this many steps.
    pub record_every: usize,
    /// Stop once `||m x H||_s` drops below this.
    pub tol: f64,
}

impl Default for LLGOptions {
    fn default() -> Self {
        Self {
            alpha_gilbert: 0.5,
            dt: 1e-3,
            t_end: 100.0,
            record_every: 100,
            tol: 1e-10,
        }
    }
}

/// Largest documented step of the explicit scheme: `0.2 h^2 s0`.
pub fn stable_dt(profile: &NotchProfile, grid: &Grid) -> f64 {
    0.2 * grid.spacing().powi(2) * profile.s0()
}

impl LLGOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOptions(m.into()));
        if !(self.alpha_gilbert >= 0.0) || !self.alpha_gilbert.is_finite() {
            return bad("alpha_gilbert must be nonnegative");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.t_end >= 0.0) {
            return bad("t_end must be nonnegative");
        }
        if self.record_every == 0 {
            return bad("record_every must be positive");
        }
        Ok(())
    }
}

/// Precomputed coefficients of the effective field on a grid.
#[derive(Clone, Debug)]
pub struct FieldOperator {
    stiffness: Vec<f64>,
    mass: Vec<f64>,
}

impl FieldOperator {
    pub fn new(profile: &NotchProfile, grid: &Grid) -> Self {
        let f = Functional::new(profile, grid);
        Self {
            stiffness: f.s_mid().iter().map(|s| s / f.spacing()).collect(),
            mass: f.mass().to_vec(),
        }
    }

    /// Effective field at every node.
    pub fn field(&self, m: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let n = m.len();
        let mut h = vec![[0.0; 3]; n];
        for e in 0..n - 1 {
            let k = self.stiffness[e];
            for c in 0..3 {
                let flux = k * (m[e + 1][c] - m[e][c]);
                h[e][c] += flux;
                h[e + 1][c] -= flux;
            }
        }
        for (hi, (mi, w)) in h.iter_mut().zip(m.iter().zip(&self.mass)) {
            hi[0] /= w;
            hi[1] = hi[1] / w - mi[1];
            hi[2] = hi[2] / w - mi[2];
        }
        // tails: 1 - |m1| = 1 - sqrt(1 - m2^2 - m3^2) on the sphere; this form
        // has the same tangential gradient and vanishes at +-e1
        for i in [0, n - 1] {
            let w = m[i][0].abs().max(f64::MIN_POSITIVE) * self.mass[i];
            h[i][1] -= m[i][1] / w;
            h[i][2] -= m[i][2] / w;
        }
        h
    }

    /// Right-hand side of the LLG equation.
    fn rhs(&self, m: &[[f64; 3]], alpha: f64) -> Vec<[f64; 3]> {
        let h = self.field(m);
        let n = m.len();
        let mut out = vec![[0.0; 3]; n];
        for i in 0..n {
            let mh = cross(m[i], h[i]);
            let mmh = cross(m[i], mh);
            for c in 0..3 {
                out[i][c] = -mh[c] - alpha * mmh[c];
            }
        }
        out
    }

    /// `||m x H||_s`.
    pub fn residual(&self, m: &[[f64; 3]]) -> f64 {
        let h = self.field(m);
        let n = m.len();
        (0..n)
            .map(|i| {
                let c = cross(m[i], h[i]);
                self.mass[i] * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Discrete energy, equal to [`magnetization_energy`].
    pub fn energy(&self, m: &[[f64; 3]]) -> f64 {
        let n = m.len();
        let exchange: f64 = m
            .windows(2)
            .zip(&self.stiffness)
            .map(|(w, k)| {
                let d2: f64 = (0..3).map(|c| (w[1][c] - w[0][c]).powi(2)).sum();
                0.5 * k * d2
            })
            .sum();
        let anisotropy: f64 = m
            .iter()
            .zip(&self.mass)
            .map(|(v, w)| 0.5 * w * (v[1] * v[1] + v[2] * v[2]))
            .sum();
        exchange + anisotropy + (1.0 - m[0][0].abs()) + (1.0 - m[n - 1][0].abs())
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / r, v[1] / r, v[2] / r]
}

/// `H(m)` at every node.
pub fn effective_field(
    m: &MagnetizationField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<Vec<[f64; 3]>> {
    grid.check(m.len())?;
    Ok(FieldOperator::new(profile, grid).field(&m.values))
}

/// One RK2 midpoint step of size `dt` followed by renormalization.
fn rk2(op: &FieldOperator, m: &[[f64; 3]], alpha: f64, dt: f64) -> Vec<[f64; 3]> {
    let k1 = op.rhs(m, alpha);
    let mid: Vec<[f64; 3]> = m
        .iter()
        .zip(&k1)
        .map(|(a, k)| {
            [
                a[0] + 0.5 * dt * k[0],
                a[1] + 0.5 * dt * k[1],
                a[2] + 0.5 * dt * k[2],
            ]
        })
        .collect();
    let k2 = op.rhs(&mid, alpha);
    m.iter()
        .zip(&k2)
        .map(|(a, k)| normalized([a[0] + dt * k[0], a[1] + dt * k[1], a[2] + dt * k[2]]))
        .collect()
}

/// Outcome of a guarded step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub field: MagnetizationField,
    pub energy: f64,
    /// Step actually taken.
    pub dt: f64,
    pub halvings: u32,
}

/// Integrator state shared by [`llg_step`] and [`relax`].
struct Stepper {
    op: FieldOperator,
    alpha: f64,
}

impl Stepper {
    fn energy(&self, m: &[[f64; 3]]) -> f64 {
        self.op.energy(m)
    }

    /// Advances by `dt`, halving the step while the energy rises by more than
    /// `1e-10` (only with damping). A halved step still covers `dt` by
    /// repeated substeps.
    fn advance(&self, m: &[[f64; 3]], e0: f64, dt: f64) -> Result<(Vec<[f64; 3]>, f64, u32)> {
        if self.alpha == 0.0 {
            let next = rk2(&self.op, m, 0.0, dt);
            let e = self.energy(&next);
            return Ok((next, e, 0));
        }
        let mut halvings = 0;
        loop {
            let sub = dt / f64::from(1u32 << halvings);
            let mut cur = m.to_vec();
            let mut e_prev = e0;
            let mut ok = true;
            for _ in 0..1u32 << halvings {
                let next = rk2(&self.op, &cur, self.alpha, sub);
                let e = self.energy(&next);
                if e > e_prev + 1e-10 {
                    ok = false;
                    break;
                }
                cur = next;
                e_prev = e;
            }
            if ok {
                return Ok((cur, e_prev, halvings));
            }
            halvings += 1;
            if halvings > 10 {
                return Err(Error::StepFailure {
                    halvings: 10,
                    dt: sub / 2.0,
                });
            }
        }
    }
}

/// One guarded step of size `opts.dt`.
pub fn llg_step(
    m: &MagnetizationField,
    opts: &LLGOptions,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<StepOutcome> {
    grid.check(m.len())?;
    opts.validate()?;
    let st = Stepper {
        op: FieldOperator::new(profile, grid),
        alpha: opts.alpha_gilbert,
    };
    let e0 = st.energy(&m.values);
    let (next, energy, halvings) = st.advance(&m.values, e0, opts.dt)?;
    Ok(StepOutcome {
        field: MagnetizationField::new(next),
        energy,
        dt: opts.dt / f64::from(1u32 << halvings),
        halvings,
    })
}

/// Best rotation `phi` aligning `m` with `R_phi w` for `w` the unlifted wall,
/// and the resulting sup-node distance.
pub fn distance_mod_rotation(
    m: &MagnetizationField,
    theta_s: &AngleField,
    mass: &[f64],
) -> (RotationAngle, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    for ((v, t), w) in m.values.iter().zip(&theta_s.values).zip(mass) {
        let c = t.cos();
        a += w * c * v[1];
        b += w * c * v[2];
    }
    let phi = RotationAngle::new(if a == 0.0 && b == 0.0 {
        0.0
    } else {
        b.atan2(a)
    });
    let reference = unlift(theta_s, phi);
    let d = m
        .values
        .iter()
        .zip(&reference.values)
        .map(|(u, v)| {
            ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)).sqrt()
        })
        .fold(0.0, f64::max);
    (phi, d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub distances: Vec<f64>,
    pub final_field: MagnetizationField,
    pub final_phi: f64,
    pub steps: usize,
    /// Largest number of halvings needed by any step.
    pub max_halvings: u32,
    /// `||m x H||_s` at the end.
    pub residual: f64,
    pub converged: bool,
}

/// Evolves `m0` until `||m x H||_s <= opts.tol` or `t_end`, recording energy
/// and distance to the wall `theta_s` modulo rotations.
pub fn relax(
    m0: &MagnetizationField,
    theta_s: &AngleField,
    opts: &LLGOptions,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<Trajectory> {
    grid.check(m0.len())?;
    grid.check(theta_s.len())?;
    opts.validate()?;
    let st = Stepper {
        op: FieldOperator::new(profile, grid),
        alpha: opts.alpha_gilbert,
    };
    let mut m = m0.values.clone();
    let mut e = st.energy(&m);
    let mut t = 0.0;
    let mut traj = Trajectory {
        times: Vec::new(),
        energies: Vec::new(),
        distances: Vec::new(),
        final_field: m0.clone(),
        final_phi: 0.0,
        steps: 0,
        max_halvings: 0,
        residual: f64::NAN,
        converged: false,
    };
    let record = |traj: &mut Trajectory, m: &[[f64; 3]], t: f64, e: f64| {
        let (_, d) =
            distance_mod_rotation(&MagnetizationField::new(m.to_vec()), theta_s, st.op.mass());
        traj.times.push(t);
        traj.energies.push(e);
        traj.distances.push(d);
    };
    record(&mut traj, &m, t, e);
    let n_steps = (opts.t_end / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let mut res = st.op.residual(&m);
    for k in 0..n_steps {
        if res <= opts.tol {
            traj.converged = true;
            break;
        }
        let dt = opts.dt.min(opts.t_end - t);
        let (next, en, halvings) = st.advance(&m, e, dt)?;
        m = next;
        e = en;
        t += dt;
        traj.steps = k + 1;
        traj.max_halvings = traj.max_halvings.max(halvings);
        if (k + 1) % opts.record_every == 0 {
            res = st.op.residual(&m);
            record(&mut traj, &m, t, e);
        }
    }
    res = st.op.residual(&m);
    traj.converged |= res <= opts.tol;
    if traj.times.last() != Some(&t) {
        record(&mut traj, &m, t, e);
    }
    let out = MagnetizationField::new(m);
    let (phi, _) = distance_mod_rotation(&out, theta_s, st.op.mass());
    traj.final_phi = phi.radians();
    traj.final_field = out;
    traj.residual = res;
    Ok(traj)
}

/// Components of `m` in the moving frame of the rotated wall: `r1` along
/// `d/dtheta` of the wall (in plane), `r2` along the rotated `e3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobileFrame {
    pub phi: f64,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r1_norm: f64,
    pub r2_norm: f64,
}

pub fn mobile_frame(
    m: &MagnetizationField,
    theta_s: &AngleField,
    profile: &NotchProfile,
    grid: &Grid,
) -> Result<MobileFrame> {
    grid.check(m.len())?;
    grid.check(theta_s.len())?;
    let f = Functional::new(profile, grid);
    let (phi, _) = distance_mod_rotation(m, theta_s, f.mass());
    let inv = RotationAngle::new(-phi.radians());
    let (mut r1, mut r2) = (Vec::with_capacity(m.len()), Vec::with_capacity(m.len()));
    for (v, t) in m.values.iter().zip(&theta_s.values) {
        let u = inv.rotate(*v);
        let (s, c) = t.sin_cos();
        r1.push(u[0] * c - u[1] * s);
        r2.push(u[2]);
    }
    Ok(MobileFrame {
        phi: phi.radians(),
        r1_norm: f.norm(&r1),
        r2_norm: f.norm(&r2),
        r1,
        r2,
    })
}

/// Unit field `w + amp g(x) (0, cos b, sin b)` renormalized, with `g` a
/// Gaussian of the given width centered at the wall's zero.
pub fn perturbed_wall(
    theta_s: &AngleField,
    grid: &Grid,
    amplitude: f64,
    width: f64,
    direction: f64,
) -> MagnetizationField {
    let z = theta_s.first_zero(grid).unwrap_or(0.0);
    let w = unlift(theta_s, RotationAngle::new(0.0));
    let (sb, cb) = direction.sin_cos();
    MagnetizationField::new(
        w.values
            .iter()
            .zip(grid.nodes())
            .map(|(v, &x)| {
                let g = amplitude * (-((x - z) / width).powi(2)).exp();
                normalized([v[0], v[1] + g * cb, v[2] + g * sb])
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ExchangeForm;
    use crate::solver::{default_init, minimize, SolveOptions};

    fn chord_wall(p: &NotchProfile, g: &Grid) -> AngleField {
        let opts = SolveOptions {
            form: ExchangeForm::Chord,
            ..SolveOptions::default()
        };
        minimize(p, g, &default_init(p, g), &opts).unwrap().theta
    }

    #[test]
    fn cached_energy_matches_the_energy_module() {
        let p = NotchProfile::cosine_dip(0.6, 1.5).unwrap();
        let g = Grid::with_spacing(4.0, 0.05).unwrap();
        let m = MagnetizationField::new(
            g.nodes()
                .iter()
                .map(|&x| normalized([x.sin(), (0.3 * x).cos(), 0.4 * x]))
                .collect(),
        );
        let a = FieldOperator::new(&p, &g).energy(&m.values);
        let b = crate::energy::magnetization_energy(&m, &p, &g).unwrap();
        assert!((a - b).abs() <= 1e-13, "{a} {b}");
    }

    #[test]
    fn constant_field_has_no_effective_field() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::with_spacing(5.0, 0.1).unwrap();
        let m = MagnetizationField::new(vec![[1.0, 0.0, 0.0]; g.len()]);
        let h = effective_field(&m, &p, &g).unwrap();
        assert!(h.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn separatrix_is_stationary() {
        let p = NotchProfile::notchless();
        let g = Grid::with_spacing(15.0, 0.001).unwrap();
        let m = unlift(&AngleField::separatrix(&g, 0.0), RotationAngle::new(0.0));
        let h = effective_field(&m, &p, &g).unwrap();
        let worst = (1..g.len() - 1)
            .map(|i| {
                let c = cross(m.values[i], h[i]);
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn field_is_minus_the_weighted_gradient() {
        let p = NotchProfile::cosine_dip(0.6, 1.5).unwrap();
        let g = Grid::with_spacing(4.0, 0.05).unwrap();
        let m = MagnetizationField::new(
            g.nodes()
                .iter()
                .map(|&x| normalized([x.sin(), (0.3 * x).cos(), 0.4 * (x * x * 0.2).sin()]))
                .collect(),
        );
        let h = effective_field(&m, &p, &g).unwrap();
        let op = FieldOperator::new(&p, &g);
        let n = g.len();
        // tangent variation vanishing at the ends
        let dm: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    return [0.0; 3];
                }
                let x = g.nodes()[i];
                cross(m.values[i], [0.3 * x.cos(), 1.0, -0.5 * x])
            })
            .collect();
        let lhs: f64 = (0..n)
            .map(|i| op.mass()[i] * (0..3).map(|c| h[i][c] * dm[i][c]).sum::<f64>())
            .sum();
        let eps = 1e-6;
        let shift = |sgn: f64| {
            MagnetizationField::new(
                (0..n)
                    .map(|i| {
                        let v = m.values[i];
                        [
                            v[0] + sgn * eps * dm[i][0],
                            v[1] + sgn * eps * dm[i][1],
                            v[2] + sgn * eps * dm[i][2],
                        ]
                    })
                    .collect(),
            )
        };
        let de = (crate::energy::magnetization_energy(&shift(1.0), &p, &g).unwrap()
            - crate::energy::magnetization_energy(&shift(-1.0), &p, &g).unwrap())
            / (2.0 * eps);
        assert!((lhs + de).abs() <= 1e-5 * de.abs(), "{lhs} {de}");
    }

    #[test]
    fn steady_state_does_not_move() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::for_profile(&p, 0.1).unwrap();
        let t = chord_wall(&p, &g);
        let m = unlift(&t, RotationAngle::new(0.0));
        let opts = LLGOptions {
            dt: stable_dt(&p, &g),
            ..LLGOptions::default()
        };
        let out = llg_step(&m, &opts, &p, &g).unwrap();
        let d = m
            .values
            .iter()
            .zip(&out.field.values)
            .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        assert!(d <= 1e-8, "{d}");
        assert!(out.field.norm_defect() <= 1e-15);
    }

    #[test]
    fn damped_flow_decreases_energy() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::for_profile(&p, 0.1).unwrap();
        let t = chord_wall(&p, &g);
        let m0 = perturbed_wall(&t, &g, 0.1, 1.0, 0.7);
        let opts = LLGOptions {
            dt: stable_dt(&p, &g),
            t_end: 1000.0 * stable_dt(&p, &g),
            record_every: 1,
            ..LLGOptions::default()
        };
        let tr = relax(&m0, &t, &opts, &p, &g).unwrap();
        assert_eq!(tr.steps, 1000);
        assert!(tr.energies.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn mobile_frame_of_the_rotated_wall_is_zero() {
        let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
        let g = Grid::for_profile(&p, 0.1).unwrap();
        let t = chord_wall(&p, &g);
        let m = unlift(&t, RotationAngle::new(1.2));
        let fr = mobile_frame(&m, &t, &p, &g).unwrap();
        assert!((fr.phi - 1.2).abs() < 1e-12);
        assert!(fr.r1_norm < 1e-12 && fr.r2_norm < 1e-12);
    }
}
