//! Energies of the quasilinear problem and of its dual formulation.
//!
//! Dual functional: `J^m(lambda, v) = 1/2 |grad v|^2 + e^lambda/2 (|f(v)|^2 - m) - int G[f(v)]`.
//! Everything is evaluated with the grid's quadrature, and the discrete gradients are
//! exact derivatives of the discrete functionals.

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, DEFAULT_BETA_MAX};
use crate::nonlinearity::Nonlinearity;
use crate::transform::{f_of, f_prime_from_f};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub mass_term: f64,
    pub potential: f64,
    pub total: f64,
}

/// The components of the Pohozaev–Palais–Smale residual at `(lambda, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PspResidual {
    pub d_j_d_lambda: f64,
    /// Mesh-weighted L2 norm of the strong-form residual divided by `1 + |v|_2`.
    pub grad_v_norm: f64,
    pub pohozaev: f64,
}

impl PspResidual {
    pub fn as_array(&self) -> [f64; 3] {
        [self.d_j_d_lambda, self.grad_v_norm, self.pohozaev]
    }
}

/// Cached pointwise quantities of a dual field.
#[derive(Debug, Clone)]
pub struct DualPoint {
    pub u: Vec<f64>,
    pub fp: Vec<f64>,
}

impl DualPoint {
    pub fn new(v: &[f64]) -> Self {
        let u: Vec<f64> = v.iter().map(|&t| f_of(t)).collect();
        let fp = u.iter().map(|&f| f_prime_from_f(f)).collect();
        DualPoint { u, fp }
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFiniteSample { index }),
        None => Ok(()),
    }
}

/// Scalars that every dual functional is assembled from.
#[derive(Debug, Clone, Copy)]
pub struct DualScalars {
    pub grad_sq: f64,
    pub dual_mass: f64,
    pub potential: f64,
}

pub fn dual_scalars(grid: &RadialGrid, v: &[f64], nl: &Nonlinearity) -> DualScalars {
    let dp = DualPoint::new(v);
    dual_scalars_with(grid, v, &dp, nl)
}

pub fn dual_scalars_with(grid: &RadialGrid, v: &[f64], dp: &DualPoint, nl: &Nonlinearity) -> DualScalars {
    let mut mass = 0.0;
    let mut pot = 0.0;
    for i in 0..v.len() {
        let u = dp.u[i];
        mass += grid.weights[i] * u * u;
        pot += grid.weights[i] * nl.big_g(u);
    }
    DualScalars { grad_sq: grid.grad_sq_norm(v), dual_mass: mass, potential: pot }
}

fn breakdown(s: &DualScalars, lambda: f64, m: f64) -> EnergyBreakdown {
    let kinetic = 0.5 * s.grad_sq;
    let mass_term = 0.5 * lambda.exp() * (s.dual_mass - m);
    EnergyBreakdown { kinetic, mass_term, potential: s.potential, total: kinetic + mass_term - s.potential }
}

/// `J^m(lambda, v)`; `m = 0` gives `J_lambda(v)`.
pub fn dual_j(grid: &RadialGrid, lambda: f64, v: &[f64], m: f64, nl: &Nonlinearity) -> Result<EnergyBreakdown> {
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!("mass m = {m} must be nonnegative")));
    }
    check_finite(v)?;
    Ok(breakdown(&dual_scalars(grid, v, nl), lambda, m))
}

/// `J_lambda(v) = 1/2 |grad v|^2 + e^lambda/2 |f(v)|^2 - int G[f(v)]`.
pub fn j_lambda(grid: &RadialGrid, lambda: f64, v: &[f64], nl: &Nonlinearity) -> f64 {
    breakdown(&dual_scalars(grid, v, nl), lambda, 0.0).total
}

/// `P(lambda, v) = (N-2)/2 |grad v|^2 + N e^lambda/2 |f(v)|^2 - N int G[f(v)]`.
pub fn pohozaev_p(grid: &RadialGrid, lambda: f64, v: &[f64], nl: &Nonlinearity) -> f64 {
    pohozaev_from(&dual_scalars(grid, v, nl), lambda, grid.n)
}

pub fn pohozaev_from(s: &DualScalars, lambda: f64, n: usize) -> f64 {
    let nf = n as f64;
    0.5 * (nf - 2.0) * s.grad_sq + 0.5 * nf * lambda.exp() * s.dual_mass - nf * s.potential
}

/// `|P| / (|grad v|^2 + e^lambda |f(v)|^2)`.
pub fn pohozaev_relative(s: &DualScalars, lambda: f64, n: usize) -> f64 {
    pohozaev_from(s, lambda, n).abs() / (s.grad_sq + lambda.exp() * s.dual_mass)
}

/// `F(theta, lambda, v) = J^m(lambda, v(e^{-theta} x))`, evaluated through the exact scaling.
pub fn augmented_f(grid: &RadialGrid, theta: f64, lambda: f64, v: &[f64], m: f64, nl: &Nonlinearity) -> Result<f64> {
    if !theta.is_finite() || theta.abs() > DEFAULT_BETA_MAX {
        return Err(Error::InvalidArgument(format!("|theta| = {} exceeds beta_max", theta.abs())));
    }
    check_finite(v)?;
    Ok(augmented_from(&dual_scalars(grid, v, nl), theta, lambda, m, grid.n))
}

pub fn augmented_from(s: &DualScalars, theta: f64, lambda: f64, m: f64, n: usize) -> f64 {
    let nf = n as f64;
    let en = (nf * theta).exp();
    0.5 * ((nf - 2.0) * theta).exp() * s.grad_sq + 0.5 * lambda.exp() * (en * s.dual_mass - m) - en * s.potential
}

/// L2 representative of `d_v J^m`: `-Delta v + e^lambda f f' - g(f) f'` on the grid.
pub fn grad_v_j(grid: &RadialGrid, lambda: f64, v: &[f64], nl: &Nonlinearity) -> Vec<f64> {
    let dp = DualPoint::new(v);
    grad_v_j_with(grid, lambda, v, &dp, nl)
}

pub fn grad_v_j_with(grid: &RadialGrid, lambda: f64, v: &[f64], dp: &DualPoint, nl: &Nonlinearity) -> Vec<f64> {
    let mu = lambda.exp();
    let k = grid.stiffness_apply(v);
    (0..v.len())
        .map(|i| {
            let (u, fp) = (dp.u[i], dp.fp[i]);
            k[i] / grid.weights[i] + mu * u * fp - nl.g(u) * fp
        })
        .collect()
}

/// `d_lambda J^m = e^lambda/2 (|f(v)|^2 - m)`.
pub fn d_lambda_j(grid: &RadialGrid, lambda: f64, v: &[f64], m: f64) -> f64 {
    let mass: f64 = v.iter().zip(&grid.weights).map(|(&t, w)| w * f_of(t).powi(2)).sum();
    0.5 * lambda.exp() * (mass - m)
}

/// `sqrt(sum w_i r_i^2) / (1 + |v|_2)`.
pub fn residual_surrogate(grid: &RadialGrid, res: &[f64], v: &[f64]) -> f64 {
    let r2: f64 = res.iter().zip(&grid.weights).map(|(r, w)| w * r * r).sum();
    let v2: f64 = v.iter().zip(&grid.weights).map(|(x, w)| w * x * x).sum();
    r2.sqrt() / (1.0 + v2.sqrt())
}

pub fn psp_residual(grid: &RadialGrid, lambda: f64, v: &[f64], m: f64, nl: &Nonlinearity) -> PspResidual {
    let dp = DualPoint::new(v);
    let s = dual_scalars_with(grid, v, &dp, nl);
    let res = grad_v_j_with(grid, lambda, v, &dp, nl);
    PspResidual {
        d_j_d_lambda: 0.5 * lambda.exp() * (s.dual_mass - m),
        grad_v_norm: residual_surrogate(grid, &res, v),
        pohozaev: pohozaev_from(&s, lambda, grid.n),
    }
}

/// u-space integrals `A = |grad u|^2`, `B = int u^2 |grad u|^2`, mass and `int G(u)`,
/// discretized so that the mass-preserving fiber `theta^{N/2} u(theta x)` scales them exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberIntegrals {
    pub a: f64,
    pub b: f64,
    pub mass: f64,
    pub potential: f64,
}

pub fn fiber_integrals(grid: &RadialGrid, u: &[f64], nl: &Nonlinearity) -> FiberIntegrals {
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..grid.h.len() {
        let du = (u[i + 1] - u[i]) / grid.h[i];
        let dw = (u[i + 1] * u[i + 1] - u[i] * u[i]) / grid.h[i];
        a += grid.cells[i] * du * du;
        b += 0.25 * grid.cells[i] * dw * dw;
    }
    let mut mass = 0.0;
    let mut pot = 0.0;
    for i in 0..u.len() {
        mass += grid.weights[i] * u[i] * u[i];
        pot += grid.weights[i] * nl.big_g(u[i]);
    }
    FiberIntegrals { a, b, mass, potential: pot }
}

/// Gradients of `A` and `B` with respect to nodal `u` values.
pub fn fiber_gradients(grid: &RadialGrid, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let mut ga = vec![0.0; n];
    let mut gb = vec![0.0; n];
    for i in 0..grid.h.len() {
        let h2 = grid.h[i] * grid.h[i];
        let fa = 2.0 * grid.cells[i] * (u[i + 1] - u[i]) / h2;
        ga[i] -= fa;
        ga[i + 1] += fa;
        let fb = 0.5 * grid.cells[i] * (u[i + 1] * u[i + 1] - u[i] * u[i]) / h2;
        gb[i] -= fb * 2.0 * u[i];
        gb[i + 1] += fb * 2.0 * u[i + 1];
    }
    (ga, gb)
}

/// `E(u) = 1/2 int (1 + 2u^2)|grad u|^2 - int G(u)`.
pub fn energy_e(grid: &RadialGrid, u: &[f64], nl: &Nonlinearity) -> Result<f64> {
    check_finite(u)?;
    let fi = fiber_integrals(grid, u, nl);
    Ok(0.5 * fi.a + fi.b - fi.potential)
}

/// Gagliardo–Nirenberg exponents `(a, b)` for `|u|_r^r <= c |u|_2^{2a} (int (1+2u^2)|grad u|^2)^b`.
pub fn gn_exponents(r: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let a = (3.0 * nf + 2.0 - (nf - 2.0) * (r - 1.0)) / (2.0 * nf + 4.0);
    let b = nf * (r - 2.0) / (2.0 * nf + 4.0);
    (a, b)
}

/// Ratio of the two sides of the Gagliardo–Nirenberg bound for `u`.
pub fn gn_check(grid: &RadialGrid, u: &[f64], r: f64, n: usize) -> Result<f64> {
    let upper = if n >= 3 { 4.0 * n as f64 / (n as f64 - 2.0) } else { f64::INFINITY };
    if !(r > 2.0 && r < upper) {
        return Err(Error::InvalidArgument(format!("r = {r} outside (2, {upper})")));
    }
    check_finite(u)?;
    let (a, b) = gn_exponents(r, n);
    let lr: f64 = u.iter().zip(&grid.weights).map(|(x, w)| w * x.abs().powf(r)).sum();
    let pl = Nonlinearity::power(3.0, n)?;
    let fi = fiber_integrals(grid, u, &pl);
    let k = fi.a + 2.0 * fi.b;
    Ok(lr / (fi.mass.powf(a) * k.powf(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::f_inv;
    use std::f64::consts::PI;

    fn setup() -> (RadialGrid, Nonlinearity) {
        (RadialGrid::default_for(3), Nonlinearity::power(3.0, 3).unwrap())
    }

    #[test]
    fn zero_field() {
        let (g, nl) = setup();
        let z = vec![0.0; g.len()];
        let e = dual_j(&g, 0.3, &z, 2.0, &nl).unwrap();
        assert!((e.total + 0.3f64.exp()).abs() < 1e-15);
        assert_eq!(pohozaev_p(&g, 0.3, &z, &nl), 0.0);
        assert!(grad_v_j(&g, 0.3, &z, &nl).iter().all(|x| *x == 0.0));
        assert!((d_lambda_j(&g, 0.0, &z, 1.0) + 0.5).abs() < 1e-15);
        assert_eq!(energy_e(&g, &z, &nl).unwrap(), 0.0);
        assert!(dual_j(&g, 0.0, &z, -1.0, &nl).is_err());
    }

    #[test]
    fn gaussian_energy_without_potential() {
        let g = RadialGrid::default_for(3);
        let u = g.sample(|r| (-r * r).exp());
        let nl = Nonlinearity::power(3.0, 3).unwrap();
        let fi = fiber_integrals(&g, &u, &nl);
        // int u^2 |grad u|^2 = 16 pi int r^4 e^{-4 r^2} dr, and int r^4 e^{-a r^2} dr = 3 sqrt(pi) / (8 a^{5/2}).
        let b_exact = 4.0 * 4.0 * PI * (3.0 * PI.sqrt() / (8.0 * 4f64.powf(2.5)));
        assert!((fi.b - b_exact).abs() / b_exact < 1e-5, "{} vs {}", fi.b, b_exact);
        let e0 = 0.5 * fi.a + fi.b;
        assert!((e0 - 3.997).abs() < 2e-3, "E = {e0}");
    }

    #[test]
    fn dual_form_of_energy() {
        let (g, nl) = setup();
        let u = g.sample(|r| 0.8 * (-r * r / 2.0).exp());
        let v: Vec<f64> = u.iter().map(|&x| f_inv(x)).collect();
        let e = energy_e(&g, &u, &nl).unwrap();
        let s = dual_scalars(&g, &v, &nl);
        let dual = 0.5 * s.grad_sq - s.potential;
        assert!((e - dual).abs() / e.abs() < 1e-5, "{e} vs {dual}");
    }

    #[test]
    fn identities() {
        let (g, nl) = setup();
        let v = g.sample(|r| 1.3 * (-r * r / 3.0).exp());
        let lam = 0.4;
        let m = 2.0;
        let a = dual_j(&g, lam, &v, m, &nl).unwrap();
        let b = dual_j(&g, lam, &v, 0.0, &nl).unwrap();
        assert!((a.total - (b.total - 0.5 * lam.exp() * m)).abs() < 1e-12);
        assert!((a.total - (a.kinetic + a.mass_term - a.potential)).abs() <= 1e-12 * a.total.abs());
        let f0 = augmented_f(&g, 0.0, lam, &v, m, &nl).unwrap();
        assert_eq!(f0, a.total);
        let s = dual_scalars(&g, &v, &nl);
        let lhs = 3.0 * b.total - pohozaev_from(&s, lam, 3);
        assert!((lhs - s.grad_sq).abs() <= 1e-10 * s.grad_sq);
    }

    #[test]
    fn gn_exponents_n3_r4() {
        let (a, b) = gn_exponents(4.0, 3);
        assert!((a - 0.8).abs() < 1e-15 && (b - 0.6).abs() < 1e-15);
        let g = RadialGrid::default_for(3);
        assert!(gn_check(&g, &vec![0.0; g.len()], 12.0, 3).is_err());
        assert!(gn_check(&g, &vec![0.0; g.len()], 2.0, 3).is_err());
    }
}
