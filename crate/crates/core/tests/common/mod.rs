//! Oracles shared by the integration tests.
#![allow(dead_code)]

use quasinorm::grid::RadialGrid;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// RK4 for `df/ds = t / sqrt(1 + 2 f^2)` in `s = ln t`, from `t = 1e-12` where
/// `f = t - t^3/3` is exact to rounding. Returns `(t, f)` every `stride` steps.
pub fn ode_reference(decades: usize, steps_per_decade: usize, stride: usize) -> Vec<(f64, f64)> {
    let rhs = |s: f64, f: f64| s.exp() / (1.0 + 2.0 * f * f).sqrt();
    let s0 = (1e-12f64).ln();
    let h = std::f64::consts::LN_10 / steps_per_decade as f64;
    let t0 = 1e-12f64;
    let mut f = t0 - t0.powi(3) / 3.0;
    let mut out = Vec::new();
    for j in 0..decades * steps_per_decade {
        let s = s0 + j as f64 * h;
        let k1 = rhs(s, f);
        let k2 = rhs(s + h / 2.0, f + h / 2.0 * k1);
        let k3 = rhs(s + h / 2.0, f + h / 2.0 * k2);
        let k4 = rhs(s + h, f + h * k3);
        f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (j + 1) % stride == 0 {
            out.push(((s + h).exp(), f));
        }
    }
    out
}

pub fn small_grid() -> RadialGrid {
    RadialGrid::graded(3, 512, 30.0, 3.0).unwrap()
}

pub fn random_state(grid: &RadialGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = 10f64.powf(rng.gen_range(-1.0..0.7));
    let b = rng.gen_range(1.0..4.0);
    let c = rng.gen_range(-0.3..0.3);
    let d = rng.gen_range(0.5..2.0);
    grid.sample(|x| a * (-(x / b).powi(2)).exp() * (1.0 + c * (d * x).cos()))
}

pub fn random_direction(grid: &RadialGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let centre = rng.gen_range(0.0..8.0);
    let width = rng.gen_range(0.5..3.0);
    grid.nodes
        .iter()
        .map(|&x| (-((x - centre) / width).powi(2)).exp() + 0.1 * rng.gen_range(-1.0..1.0))
        .collect()
}

/// Fourth-order central difference of `g` at 0.
pub fn derivative<F: Fn(f64) -> f64>(g: F, h: f64) -> f64 {
    (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h)
}
