//! Radial meshes on `R^N` and sampled radial fields.
//!
//! Node weights are the exact integrals of the piecewise-linear hat functions against
//! the radial measure `omega_{N-1} rho^{N-1} d rho`, so `sum_i w_i h(rho_i)` is the
//! trapezoid rule in that measure. Gradients live on cells (staggered differences).

use crate::error::{Error, Result};
use crate::interp::Pchip;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub const DEFAULT_NODES: usize = 4096;
pub const DEFAULT_RMAX: f64 = 50.0;
/// Clustering strength of the default geometric mesh.
pub const DEFAULT_GRADING: f64 = 3.0;
pub const DEFAULT_BETA_MAX: f64 = 10.0;

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Surface measure of the unit sphere in `R^N`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {n}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub n: usize,
    pub nodes: Vec<f64>,
    /// Full quadrature weights, `omega` and `rho^{N-1}` included.
    pub weights: Vec<f64>,
    /// Cell widths `rho_{i+1} - rho_i`.
    pub h: Vec<f64>,
    /// Exact measure of each shell `[rho_i, rho_{i+1}]`.
    pub cells: Vec<f64>,
}

impl RadialGrid {
    /// Geometric mesh `rho_i = R (e^{k i/M} - 1)/(e^k - 1)` with `M + 1 = nodes`.
    pub fn graded(n: usize, nodes: usize, r_max: f64, grading: f64) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::InvalidArgument(format!("grid needs at least 3 nodes, got {nodes}")));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidArgument(format!("r_max = {r_max} must be positive")));
        }
        let m = (nodes - 1) as f64;
        let denom = grading.exp_m1();
        let rho: Vec<f64> = (0..nodes)
            .map(|i| if grading.abs() < 1e-12 { r_max * i as f64 / m } else { r_max * (grading * i as f64 / m).exp_m1() / denom })
            .collect();
        Self::from_nodes(n, rho)
    }

    /// Default mesh: 4096 nodes on `[0, 50]`.
    pub fn default_for(n: usize) -> Self {
        Self::graded(n, DEFAULT_NODES, DEFAULT_RMAX, DEFAULT_GRADING).expect("default grid")
    }

    pub fn from_nodes(n: usize, nodes: Vec<f64>) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::InvalidArgument(format!("dimension {n} unsupported")));
        }
        if nodes.len() < 3 || nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("nodes must start at 0 and increase strictly".into()));
        }
        let om = sphere_area(n);
        let k = n - 1;
        let mut weights = vec![0.0; nodes.len()];
        let mut h = Vec::with_capacity(nodes.len() - 1);
        let mut cells = Vec::with_capacity(nodes.len() - 1);
        for i in 0..nodes.len() - 1 {
            let (a, b) = (nodes[i], nodes[i + 1]);
            let w = b - a;
            h.push(w);
            let shell = match n {
                2 => w * (a + b) / 2.0,
                _ => w * (a * a + a * b + b * b) / 3.0,
            };
            cells.push(om * shell);
            // Two-point Gauss is exact for the degree-N integrands of hat times rho^{N-1}.
            for &g in &GAUSS2 {
                let x = 0.5 * (a + b) + 0.5 * w * g;
                let jac = 0.5 * w * om * x.powi(k as i32);
                let phi_b = (x - a) / w;
                weights[i] += jac * (1.0 - phi_b);
                weights[i + 1] += jac * phi_b;
            }
        }
        Ok(RadialGrid { n, nodes, weights, h, cells })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Same mesh with all radii multiplied by `sigma`.
    pub fn scaled(&self, sigma: f64) -> Self {
        let sn = sigma.powi(self.n as i32);
        RadialGrid {
            n: self.n,
            nodes: self.nodes.iter().map(|x| x * sigma).collect(),
            weights: self.weights.iter().map(|x| x * sn).collect(),
            h: self.h.iter().map(|x| x * sigma).collect(),
            cells: self.cells.iter().map(|x| x * sn).collect(),
        }
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    /// `int_{R^N} h` for nodal values `h_i`; rejects non-finite samples.
    pub fn integrate(&self, vals: &[f64]) -> Result<f64> {
        if let Some(index) = vals.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(self.integrate_unchecked(vals))
    }

    #[inline]
    pub fn integrate_unchecked(&self, vals: &[f64]) -> f64 {
        self.weights.iter().zip(vals).map(|(w, v)| w * v).sum()
    }

    /// `int_{R^N} h` where `h` is a function of the radius, sampled at the nodes.
    pub fn integrate_fn<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.integrate(&self.sample(f))
    }

    /// Integral of the piecewise-linear interpolant of `vals` over the ball of radius `radius`.
    pub fn integrate_ball(&self, vals: &[f64], radius: f64) -> f64 {
        let om = sphere_area(self.n);
        let k = (self.n - 1) as i32;
        let mut total = 0.0;
        for i in 0..self.len() - 1 {
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            if a >= radius {
                break;
            }
            let top = b.min(radius);
            let w = top - a;
            for &g in &GAUSS2 {
                let x = a + 0.5 * w * (1.0 + g);
                let phi_b = (x - a) / (b - a);
                let val = vals[i] * (1.0 - phi_b) + vals[i + 1] * phi_b;
                total += 0.5 * w * om * x.powi(k) * val;
            }
        }
        total
    }

    /// `||grad v||_2^2` from cell differences; nonnegative by construction.
    pub fn grad_sq_norm(&self, v: &[f64]) -> f64 {
        (0..self.h.len()).map(|i| self.cells[i] * ((v[i + 1] - v[i]) / self.h[i]).powi(2)).sum()
    }

    /// Gradient of `(1/2) ||grad v||^2` with respect to the nodal values.
    pub fn stiffness_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.h.len() {
            let flux = self.cells[i] * (v[i + 1] - v[i]) / (self.h[i] * self.h[i]);
            out[i] -= flux;
            out[i + 1] += flux;
        }
        out
    }

    /// Off-diagonal couplings `-c_i / h_i^2` of the stiffness matrix; the diagonal is minus the row sum.
    pub fn stiffness_offdiag(&self) -> Vec<f64> {
        (0..self.h.len()).map(|i| -self.cells[i] / (self.h[i] * self.h[i])).collect()
    }

    /// `v(e^{-beta} rho)` by monotone cubic interpolation, zero beyond `r_max`.
    pub fn dilate(&self, v: &[f64], beta: f64, beta_max: f64) -> Result<Vec<f64>> {
        if !beta.is_finite() || beta.abs() > beta_max {
            return Err(Error::InvalidArgument(format!("|beta| = {} exceeds beta_max = {beta_max}", beta.abs())));
        }
        if beta == 0.0 {
            return Ok(v.to_vec());
        }
        let p = Pchip::new(&self.nodes, v);
        let s = (-beta).exp();
        let rm = self.r_max();
        Ok(self.nodes.iter().map(|&r| {
            let x = r * s;
            if x > rm {
                0.0
            } else {
                p.eval(x)
            }
        }).collect())
    }

    /// Central node derivative `v'(rho_i)` (used for plotting and diagnostics), `v'(0) = 0`.
    pub fn node_derivative(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (self.h[i - 1], self.h[i]);
            d[i] = (h0 * h0 * (v[i + 1] - v[i]) + h1 * h1 * (v[i] - v[i - 1])) / (h0 * h1 * (h0 + h1));
        }
        d[n - 1] = (v[n - 1] - v[n - 2]) / self.h[n - 2];
        d
    }
}

/// A radial function sampled on a grid.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument("field length differs from grid".into()));
        }
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(RadialField { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, f: F) -> Self {
        let values = grid.sample(f);
        RadialField { grid, values }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    /// `|v_M| <= 1e-8 max |v|`.
    pub fn is_decayed(&self) -> bool {
        self.values.last().map_or(true, |t| t.abs() <= 1e-8 * self.sup_abs())
    }

    pub fn l2_sq(&self) -> f64 {
        self.grid.integrate_unchecked(&self.values.iter().map(|x| x * x).collect::<Vec<_>>())
    }

    pub fn grad_sq_norm(&self) -> f64 {
        self.grid.grad_sq_norm(&self.values)
    }

    pub fn dilate(&self, beta: f64) -> Result<Self> {
        Ok(RadialField { grid: self.grid.clone(), values: self.grid.dilate(&self.values, beta, DEFAULT_BETA_MAX)? })
    }

    /// CSV with header `rho,value`, one row per node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_profile_csv(path, &self.grid.nodes, &self.values)
    }
}

/// Writes a `rho,value` profile with round-trip exact formatting.
pub fn write_profile_csv(path: &Path, rho: &[f64], vals: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "rho,value")?;
    for (r, v) in rho.iter().zip(vals) {
        writeln!(f, "{r:e},{v:e}")?;
    }
    f.flush()?;
    Ok(())
}

/// Solves a symmetric tridiagonal system `A x = b` (Thomas algorithm) with diagonal `d`
/// and off-diagonal `e` (`e[i]` couples `i` and `i+1`).
pub fn solve_tridiagonal(d: &[f64], e: &[f64], b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut piv = d[0];
    x[0] = b[0] / piv;
    for i in 1..n {
        c[i - 1] = e[i - 1] / piv;
        piv = d[i] - e[i - 1] * c[i - 1];
        x[i] = (b[i] - e[i - 1] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_and_zero() {
        let g = RadialGrid::default_for(3);
        let ones = vec![1.0; g.len()];
        let vol = g.integrate_ball(&ones, 1.0);
        assert!((vol - 4.0 * PI / 3.0).abs() / (4.0 * PI / 3.0) < 1e-6);
        assert_eq!(g.integrate(&vec![0.0; g.len()]).unwrap(), 0.0);
        let total = g.integrate(&ones).unwrap();
        assert!((total - 4.0 * PI / 3.0 * 50f64.powi(3)).abs() / total < 1e-12);
    }

    #[test]
    fn gaussian_integrals() {
        let g = RadialGrid::default_for(3);
        let u = g.sample(|r| (-r * r).exp());
        let mass = g.integrate(&u.iter().map(|x| x * x).collect::<Vec<_>>()).unwrap();
        let want = (PI / 2.0).powf(1.5);
        assert!((mass - want).abs() / want < 1e-5, "mass {mass}");
        let gs = g.grad_sq_norm(&u);
        assert!((gs - 3.0 * want).abs() / (3.0 * want) < 1e-5, "grad {gs}");
        assert!(g.grad_sq_norm(&vec![2.5; g.len()]).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = RadialGrid::default_for(3);
        let mut v = vec![0.0; g.len()];
        v[17] = f64::NAN;
        assert_eq!(g.integrate(&v), Err(Error::NonFiniteSample { index: 17 }));
        assert!(RadialGrid::graded(3, 2, 10.0, 3.0).is_err());
        assert!(g.dilate(&vec![0.0; g.len()], 11.0, 10.0).is_err());
    }

    #[test]
    fn dilation_scaling() {
        let g = RadialGrid::default_for(3);
        let u = g.sample(|r| (-r * r).exp());
        assert_eq!(g.dilate(&u, 0.0, 10.0).unwrap(), u);
        let d = g.dilate(&u, 2f64.ln(), 10.0).unwrap();
        let mass = g.integrate(&d.iter().map(|x| x * x).collect::<Vec<_>>()).unwrap();
        let want = 8.0 * (PI / 2.0).powf(1.5);
        assert!((mass - want).abs() / want < 1e-4);
        let beta = 0.4;
        let gd = g.grad_sq_norm(&g.dilate(&u, beta, 10.0).unwrap());
        let want = beta.exp() * g.grad_sq_norm(&u);
        assert!((gd - want).abs() / want < 1e-4);
    }

    #[test]
    fn tridiagonal_solver() {
        let d = [4.0, 4.0, 4.0, 4.0];
        let e = [1.0, 1.0, 1.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let b: Vec<f64> = (0..4)
            .map(|i| d[i] * x[i] + if i > 0 { e[i - 1] * x[i - 1] } else { 0.0 } + if i < 3 { e[i] * x[i + 1] } else { 0.0 })
            .collect();
        let got = solve_tridiagonal(&d, &e, &b);
        for i in 0..4 {
            assert!((got[i] - x[i]).abs() < 1e-14);
        }
    }
}
