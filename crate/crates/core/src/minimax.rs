//! Minimax geometry of the dual functional: the Pohozaev set, the `lambda`-scan for the
//! least normalized level, and explicit odd path families bounding `a_k(lambda)` from above.

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::functionals::{dual_scalars, pohozaev_from};
use crate::grid::{sphere_area, RadialGrid};
use crate::nonlinearity::Nonlinearity;
use crate::shooting::{ground_state, ground_state_level, GroundStateOptions};
use crate::transform::log_samples;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OmegaRegion {
    Interior,
    Boundary,
    Exterior,
}

pub const DEFAULT_OMEGA_TOL: f64 = 1e-3;

/// Position of `(lambda, v)` relative to `{P > 0}`; `|P|` inside the dead band
/// `tol (|grad v|^2 + e^lambda |f(v)|^2 + 1)` counts as the boundary.
pub fn omega_membership(grid: &RadialGrid, lambda: f64, v: &[f64], nl: &Nonlinearity, tol: f64) -> OmegaRegion {
    if v.iter().all(|&x| x == 0.0) {
        return OmegaRegion::Interior;
    }
    let s = dual_scalars(grid, v, nl);
    let p = pohozaev_from(&s, lambda, grid.n);
    let band = tol * (s.grad_sq + lambda.exp() * s.dual_mass + 1.0);
    if p.abs() < band {
        OmegaRegion::Boundary
    } else if p > 0.0 {
        OmegaRegion::Interior
    } else {
        OmegaRegion::Exterior
    }
}

#[derive(Debug, Clone)]
pub struct B1Estimate {
    /// `min_lambda a_1(lambda) - e^lambda m / 2`.
    pub b1: f64,
    pub lambda_star: f64,
    pub a1_star: f64,
    /// `| |f(v)|^2 - m | / m` at `lambda_star`.
    pub mass_residual: f64,
    /// `(lambda, phi(lambda))` on the scan grid; failed points are dropped.
    pub scan: Vec<(f64, f64)>,
    /// Ground state at `lambda_star`, with `energy` set to `b1`.
    pub point: CriticalPoint,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > width {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Upper bound `b_1^m <= min_lambda (a_1(lambda) - e^lambda m / 2)`, scanned on `lambdas`
/// and refined by golden section. At the minimizer the ground state is a normalized solution
/// candidate: stationarity in `lambda` is exactly the dual mass constraint.
pub fn b1_upper(m: f64, nl: &Nonlinearity, lambdas: &[f64]) -> Result<B1Estimate> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("mass m = {m} must be positive")));
    }
    if lambdas.len() < 3 {
        return Err(Error::InvalidArgument("lambda grid needs at least 3 points".into()));
    }
    let opts = GroundStateOptions::default();
    let phi = |l: f64| ground_state_level(l, nl, &opts).map(|(a1, _)| a1 - 0.5 * l.exp() * m);
    let scan: Vec<(f64, f64)> = lambdas
        .par_iter()
        .filter_map(|&l| match phi(l) {
            Ok(v) => Some((l, v)),
            Err(e) => {
                log::warn!("phi at lambda = {l}: {e}");
                None
            }
        })
        .collect();
    let j = (0..scan.len())
        .min_by(|&a, &b| scan[a].1.total_cmp(&scan[b].1))
        .ok_or(Error::NegativeNotFound(m))?;
    if scan[j].1 >= 0.0 {
        return Err(Error::NegativeNotFound(m));
    }
    let lo = scan[j.saturating_sub(1)].0;
    let hi = scan[(j + 1).min(scan.len() - 1)].0;
    let (lambda_star, b1) = golden_min(|l| phi(l).unwrap_or(f64::INFINITY), lo, hi, 1e-7 * lo.abs().max(1.0));
    let (lambda_star, b1) = if b1 <= scan[j].1 { (lambda_star, b1) } else { scan[j] };
    let gs = ground_state(lambda_star, nl, &opts)?;
    let mut point = gs.point;
    point.energy = b1;
    Ok(B1Estimate {
        b1,
        lambda_star,
        a1_star: gs.a1,
        mass_residual: (gs.mass_ode - m).abs() / m,
        scan,
        point,
    })
}

// 8-point Gauss-Legendre on [-1, 1].
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
const RAMP_PANELS: usize = 2;

/// `int_a^b H(c phi(rho)) rho^{N-1} d rho` with `phi` linear, `phi(a) = pa`, `phi(b) = pb`.
fn ramp_integral(nl: &Nonlinearity, lambda: f64, c: f64, a: f64, b: f64, pa: f64, pb: f64) -> f64 {
    let nm1 = (nl.n - 1) as i32;
    let w = (b - a) / RAMP_PANELS as f64;
    let mut sum = 0.0;
    for p in 0..RAMP_PANELS {
        let mid = a + (p as f64 + 0.5) * w;
        for k in 0..4 {
            for sgn in [-1.0, 1.0] {
                let rho = mid + sgn * GL_X[k] * 0.5 * w;
                let phi = pa + (pb - pa) * (rho - a) / (b - a);
                sum += GL_W[k] * 0.5 * w * nl.h_of(lambda, c * phi) * rho.powi(nm1);
            }
        }
    }
    sum
}

fn shell(n: usize, a: f64, b: f64) -> f64 {
    (b.powi(n as i32) - a.powi(n as i32)) / n as f64
}

/// Odd map `D_k -> H^1_r`: `xi = s t` with `t` on the polyhedron `max |t_i| = 1`, and
/// `eta(xi)(x) = s sum_i sgn(t_i) (s_lambda + (|t_i| - 1) delta) chi_eps(2 k i, |t_i|; x / L)`.
#[derive(Debug, Clone, Serialize)]
pub struct OddPathFamily {
    pub k: usize,
    pub n: usize,
    pub lambda: f64,
    pub s_lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Dilation factor, doubled until `J_lambda < 0` on the sampled boundary.
    pub l: f64,
    pub ring_radii: Vec<f64>,
    /// `min int H(gamma_eps(t))` over the polyhedron samples.
    pub c0: f64,
    /// `max J_lambda` over the boundary samples at the final `L`.
    pub boundary_max: f64,
    #[serde(skip)]
    nl: Nonlinearity,
}

/// Integrals of one ring at unit dilation: `(|grad chi|^2 c^2, int H(c chi))` per unit sphere measure.
struct RingParts {
    grad: f64,
    h: f64,
}

impl OddPathFamily {
    /// Splits `xi` into the radial level `s = max |xi_i|` and the polyhedron point `t`.
    pub fn split(xi: &[f64]) -> (f64, Vec<f64>) {
        let s = xi.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if s == 0.0 {
            return (0.0, vec![0.0; xi.len()]);
        }
        (s, xi.iter().map(|x| x / s).collect())
    }

    fn amplitude(&self, t: f64) -> f64 {
        let h = t.abs();
        if h == 0.0 {
            return 0.0;
        }
        t.signum() * (self.s_lambda + (h - 1.0) * self.delta)
    }

    /// `chi_eps(R, h; rho)`.
    pub fn chi(&self, radius: f64, h: f64, rho: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let eh = self.epsilon * h;
        let d = (rho - radius).abs();
        if d <= h {
            1.0
        } else if d <= h + eh {
            1.0 - (d - h) / eh
        } else {
            0.0
        }
    }

    /// Contribution of ring `i` (0-based) to `eta(xi)` at radius `rho`.
    pub fn ring_value(&self, i: usize, xi: &[f64], rho: f64) -> f64 {
        let (s, t) = Self::split(xi);
        s * self.amplitude(t[i]) * self.chi(self.ring_radii[i], t[i].abs(), rho / self.l)
    }

    /// `eta(xi)` at radius `rho`.
    pub fn value(&self, xi: &[f64], rho: f64) -> f64 {
        (0..self.k).map(|i| self.ring_value(i, xi, rho)).sum()
    }

    pub fn sample(&self, xi: &[f64], grid: &RadialGrid) -> Vec<f64> {
        grid.nodes.iter().map(|&r| self.value(xi, r)).collect()
    }

    fn ring_parts(&self, c: f64, radius: f64, h: f64) -> RingParts {
        if h <= 0.0 || c == 0.0 {
            return RingParts { grad: 0.0, h: 0.0 };
        }
        let n = self.n;
        let eh = self.epsilon * h;
        let (a0, a1, b1, b0) = (radius - h - eh, radius - h, radius + h, radius + h + eh);
        let grad = c * c * (shell(n, a0, a1) + shell(n, b1, b0)) / (eh * eh);
        let hv = self.nl.h_of(self.lambda, c) * shell(n, a1, b1)
            + ramp_integral(&self.nl, self.lambda, c, a0, a1, 0.0, 1.0)
            + ramp_integral(&self.nl, self.lambda, c, b1, b0, 1.0, 0.0);
        RingParts { grad, h: hv }
    }

    /// `(|grad eta(xi)|^2, int H(eta(xi)))`, exact up to the ramp quadrature.
    pub fn integrals(&self, xi: &[f64]) -> (f64, f64) {
        let (s, t) = Self::split(xi);
        let om = sphere_area(self.n);
        let nf = self.n as f64;
        let (mut g, mut h) = (0.0, 0.0);
        for (i, &ti) in t.iter().enumerate() {
            let p = self.ring_parts(s * self.amplitude(ti), self.ring_radii[i], ti.abs());
            g += p.grad;
            h += p.h;
        }
        (om * self.l.powf(nf - 2.0) * g, om * self.l.powf(nf) * h)
    }

    /// `J_lambda(eta(xi)) = |grad|^2 / 2 - int H`.
    pub fn energy(&self, xi: &[f64]) -> f64 {
        let (g, h) = self.integrals(xi);
        0.5 * g - h
    }

    /// Pohozaev functional `(N-2)/2 |grad|^2 - N int H` along the family.
    pub fn pohozaev(&self, xi: &[f64]) -> f64 {
        let (g, h) = self.integrals(xi);
        let nf = self.n as f64;
        0.5 * (nf - 2.0) * g - nf * h
    }

    /// `int H(gamma_eps(t))` before dilation.
    pub fn h_integral_undilated(&self, t: &[f64]) -> f64 {
        let om = sphere_area(self.n);
        t.iter()
            .enumerate()
            .map(|(i, &ti)| self.ring_parts(self.amplitude(ti), self.ring_radii[i], ti.abs()).h)
            .sum::<f64>()
            * om
    }

    /// Polyhedron samples: `2k + 1` points per axis with `max |t_i| = 1`.
    pub fn boundary_samples(&self) -> Vec<Vec<f64>> {
        polyhedron_samples(self.k)
    }

    /// Outer edge of the support after dilation.
    pub fn support_radius(&self) -> f64 {
        self.l * (self.ring_radii[self.k - 1] + 1.0 + self.epsilon)
    }
}

pub fn polyhedron_samples(k: usize) -> Vec<Vec<f64>> {
    let per = 2 * k + 1;
    let axis: Vec<f64> = (0..per).map(|j| -1.0 + 2.0 * j as f64 / (per - 1) as f64).collect();
    let total = per.pow(k as u32);
    (0..total)
        .map(|mut c| {
            (0..k)
                .map(|_| {
                    let v = axis[c % per];
                    c /= per;
                    v
                })
                .collect::<Vec<f64>>()
        })
        .filter(|t| t.iter().any(|x| x.abs() == 1.0))
        .collect()
}

pub const MAX_K: usize = 4;
pub const DEFAULT_EPSILON: f64 = 0.1;
const RADIAL_LEVELS: usize = 16;

/// First positive zero of `H(s) = G[f(s)] - e^lambda f(s)^2 / 2`.
fn h_zero(nl: &Nonlinearity, lambda: f64) -> Result<f64> {
    let ss = log_samples(1e-8, 1e8, 1601);
    let k = ss
        .windows(2)
        .position(|w| nl.h_of(lambda, w[0]) <= 0.0 && nl.h_of(lambda, w[1]) > 0.0)
        .ok_or(Error::NoPositiveH(lambda))?;
    let (mut lo, mut hi) = (ss[k], ss[k + 1]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if nl.h_of(lambda, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Builds the odd path family at `(k, lambda)` with `s_lambda = 2 s_0`, `delta = s_0 / 2`
/// where `s_0` is the first zero of `H`.
pub fn odd_path_family(k: usize, lambda: f64, nl: &Nonlinearity) -> Result<OddPathFamily> {
    if k == 0 || k > MAX_K {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={MAX_K}")));
    }
    if !lambda.is_finite() {
        return Err(Error::NonFinite(format!("lambda = {lambda}")));
    }
    if lambda >= nl.lambda0() {
        return Err(Error::NoPositiveH(lambda));
    }
    let s0 = h_zero(nl, lambda)?;
    let (s_lambda, delta) = (2.0 * s0, 0.5 * s0);
    let band_ok = (0..=200).all(|j| {
        let s = s_lambda - delta + 2.0 * delta * j as f64 / 200.0;
        nl.h_of(lambda, s) > 0.0
    });
    if !band_ok {
        return Err(Error::NoPositiveH(lambda));
    }
    let mut fam = OddPathFamily {
        k,
        n: nl.n,
        lambda,
        s_lambda,
        delta,
        epsilon: DEFAULT_EPSILON,
        l: 1.0,
        ring_radii: (1..=k).map(|i| (2 * k * i) as f64).collect(),
        c0: 0.0,
        boundary_max: 0.0,
        nl: nl.clone(),
    };
    let samples = fam.boundary_samples();
    fam.c0 = samples.iter().map(|t| fam.h_integral_undilated(t)).fold(f64::INFINITY, f64::min);
    if !(fam.c0 > 0.0) {
        return Err(Error::NoPositiveH(lambda));
    }
    for _ in 0..200 {
        fam.boundary_max = samples.iter().map(|t| fam.energy(t)).fold(f64::NEG_INFINITY, f64::max);
        if fam.boundary_max < 0.0 {
            return Ok(fam);
        }
        fam.l *= 2.0;
    }
    Err(Error::InvalidArgument(format!("no dilation makes J negative on the boundary at lambda = {lambda}")))
}

/// `max J_lambda` over the cone `D_k` through the family: polyhedron samples times 16 radial
/// levels, with golden-section refinement along each ray around its best level.
pub fn a_k_upper(k: usize, lambda: f64, nl: &Nonlinearity) -> Result<(f64, OddPathFamily)> {
    let fam = odd_path_family(k, lambda, nl)?;
    let best = fam
        .boundary_samples()
        .par_iter()
        .map(|t| {
            let ray = |s: f64| -fam.energy(&t.iter().map(|x| s * x).collect::<Vec<_>>());
            let levels: Vec<f64> = (0..=RADIAL_LEVELS).map(|j| j as f64 / RADIAL_LEVELS as f64).collect();
            let j = (0..levels.len()).min_by(|&a, &b| ray(levels[a]).total_cmp(&ray(levels[b]))).unwrap();
            let lo = levels[j.saturating_sub(1)];
            let hi = levels[(j + 1).min(RADIAL_LEVELS)];
            let (_, v) = golden_min(ray, lo, hi, 1e-8);
            (-v).max(-ray(levels[j]))
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok((best, fam))
}
