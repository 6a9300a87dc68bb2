//! Library results against independent computations done here.

use std::f64::consts::{FRAC_PI_2, PI};

use notchwall::dynamics::{llg_step, perturbed_wall, stable_dt, LLGOptions};
use notchwall::energy::{magnetization_energy, Functional};
use notchwall::solver::{decay_check, default_init, minimize, shoot, SolveOptions};
use notchwall::spectral::{assemble, coercivity_alpha, OperatorKind};
use notchwall::{AngleField, Grid, NotchProfile};

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn wall(p: &NotchProfile, g: &Grid) -> AngleField {
    let r = minimize(p, g, &default_init(p, g), &SolveOptions::default()).unwrap();
    assert!(r.converged);
    r.theta
}

/// Odd wall for a step notch `s = s0` on `|x| < a`.
///
/// Inside, `theta'^2 = q^2 - sin^2 theta`; outside, the separatrix tail gives
/// `theta' = cos theta`, and flux continuity `s0 theta'(a-) = theta'(a+)` fixes
/// `q^2 = sin^2 t + cos^2 t / s0^2` with `t = theta(a)`. Then `t` solves
/// `int_0^t dtheta / sqrt(q^2 - sin^2 theta) = a`. Returns `(t, energy)`.
fn step_notch_wall(s0: f64, a: f64) -> (f64, f64) {
    let q2 = |t: f64| t.sin().powi(2) + t.cos().powi(2) / (s0 * s0);
    let half_width = |t: f64| {
        let q = q2(t);
        simpson(|th| 1.0 / (q - th.sin().powi(2)).sqrt(), 0.0, t, 4000)
    };
    let (mut lo, mut hi) = (0.0, FRAC_PI_2 - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if half_width(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let q = q2(t);
    let inside = s0
        * simpson(
            |th| (q - th.sin().powi(2) + th.cos().powi(2)) / (q - th.sin().powi(2)).sqrt(),
            0.0,
            t,
            4000,
        );
    (t, inside + 2.0 * (1.0 - t.sin()))
}

#[test]
fn notchless_wall_carries_energy_two() {
    // int sech^2 over the line, times the two equal halves of the energy density
    let exact = simpson(|x| 1.0 / x.cosh().powi(2), -40.0, 40.0, 200_000);
    assert!((exact - 2.0).abs() < 1e-10);
    let p = NotchProfile::notchless();
    let g = Grid::with_spacing(20.0, 0.01).unwrap();
    let e = Functional::new(&p, &g).energy(&AngleField::separatrix(&g, 0.0).values);
    assert!((e - exact).abs() < 1e-4, "energy {e}");
}

#[test]
fn step_notch_wall_matches_closed_form() {
    for (s0, a) in [(0.5, 1.0), (0.3, 0.5), (0.8, 2.0)] {
        let (t, energy) = step_notch_wall(s0, a);
        let p = NotchProfile::plateau(s0, a, 0.0).unwrap();
        let g = Grid::with_spacing(a + 12.0, 0.0025).unwrap();
        let theta = wall(&p, &g);
        let at_edge = theta.value_at(&g, a);
        let e = Functional::new(&p, &g).energy(&theta.values);
        assert!(
            (at_edge - t).abs() < 1e-6,
            "s0 {s0}: theta(a) {at_edge} vs {t}"
        );
        assert!((e - energy).abs() < 1e-4, "s0 {s0}: energy {e} vs {energy}");
    }
}

/// The pointwise decay bound fails for a deep step notch: the wall leaves the
/// notch further from `pi/2` than `pi exp(-a / s0)`.
#[test]
fn decay_bound_fails_for_a_deep_step_notch() {
    let (t, _) = step_notch_wall(0.5, 1.0);
    let oracle_margin = PI * (-2.0f64).exp() - (FRAC_PI_2 - t);
    assert!(oracle_margin < -0.03, "oracle margin {oracle_margin}");

    let p = NotchProfile::plateau(0.5, 1.0, 0.0).unwrap();
    let g = Grid::with_spacing(13.0, 0.0025).unwrap();
    let margins = decay_check(&wall(&p, &g), &p, &g).unwrap();
    let edge = g
        .nodes()
        .iter()
        .position(|x| (x - 1.0).abs() < 1e-9)
        .unwrap();
    let at_edge = margins[edge];
    assert!(
        (at_edge - oracle_margin).abs() < 1e-6,
        "library {at_edge} vs oracle {oracle_margin}"
    );
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(worst <= at_edge);
}

#[test]
fn decay_bound_holds_for_cosine_dips() {
    for (s0, a) in [(0.6, 1.5), (0.3, 1.0), (0.9, 0.5)] {
        let p = NotchProfile::cosine_dip(s0, a).unwrap();
        let g = Grid::with_spacing(a + 12.0, 0.005).unwrap();
        let margins = decay_check(&wall(&p, &g), &p, &g).unwrap();
        let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(worst >= -1e-8, "cosine_dip({s0}, {a}): {worst}");
    }
}

#[test]
fn shooting_agrees_with_minimization() {
    for p in [
        NotchProfile::plateau(0.5, 1.0, 0.25).unwrap(),
        NotchProfile::cosine_dip(0.6, 1.5).unwrap(),
    ] {
        let g = Grid::for_profile(&p, 0.01).unwrap();
        let m = wall(&p, &g);
        let s = shoot(&p, &g, 0.0, 1.0).unwrap();
        let gap = m
            .values
            .iter()
            .zip(&s.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 1e-4, "gap {gap}");
    }
}

#[test]
fn deeper_notch_is_more_coercive() {
    let alpha = |s0: f64| {
        let p = NotchProfile::plateau(s0, 1.0, 0.25).unwrap();
        let g = Grid::with_spacing(13.0, 0.02).unwrap();
        let op = assemble(OperatorKind::L1, &wall(&p, &g), &p, &g).unwrap();
        coercivity_alpha(&op).unwrap().value
    };
    let (deep, shallow) = (alpha(0.3), alpha(0.9));
    assert!(deep >= shallow && shallow > 0.0, "{deep} vs {shallow}");
}

#[test]
fn precession_conserves_energy_to_second_order() {
    let p = NotchProfile::plateau(0.5, 1.0, 0.25).unwrap();
    let g = Grid::with_spacing(8.0, 0.1).unwrap();
    let m0 = perturbed_wall(&wall(&p, &g), &g, 0.3, 0.7, 0.4);
    let e0 = magnetization_energy(&m0, &p, &g).unwrap();
    let drift = |dt: f64| {
        let opts = LLGOptions {
            alpha_gilbert: 0.0,
            dt,
            ..LLGOptions::default()
        };
        let mut m = m0.clone();
        let steps = (1.0 / dt).round() as usize;
        for _ in 0..steps {
            m = llg_step(&m, &opts, &p, &g).unwrap().field;
        }
        (magnetization_energy(&m, &p, &g).unwrap() - e0).abs()
    };
    let dt = stable_dt(&p, &g);
    let (coarse, fine) = (drift(dt), drift(dt / 2.0));
    assert!(coarse < 1e-3, "drift {coarse}");
    assert!(fine < coarse / 3.0 || fine < 1e-12, "{coarse} then {fine}");
}
