//! Minimization of `E` on the mass sphere `S(m)` in the dual variable.
//!
//! The iterate is a pair `(sigma, v)`: nodal values `v` on the base mesh dilated by `sigma`.
//! Two kinds of moves alternate. A fiber move `u -> tau^{N/2} u(tau x)` is exact in this
//! representation (divide `sigma` by `tau`, rescale values) and keeps the mass. A shape move is a
//! Sobolev-preconditioned projected gradient step on `v` followed by multiplicative mass
//! projection. Both only ever lower the discrete dual energy `1/2 |grad v|^2 - int G[f(v)]`.

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::functionals::{dual_j, dual_scalars, fiber_gradients, fiber_integrals, pohozaev_relative, psp_residual, FiberIntegrals};
use crate::grid::{solve_tridiagonal, RadialField, RadialGrid};
use crate::nonlinearity::Nonlinearity;
use crate::transform::{f_inv, f_of_from, f_prime_from_f};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Relative stationarity tolerance `|r|_W / (|mu| |f f'|_W)`.
    pub tol: f64,
    pub rearrange_every: usize,
    /// Width of the initial Gaussian in base-mesh units.
    pub initial_width: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { max_iter: 20_000, tol: 1e-6, rearrange_every: 25, initial_width: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE", tag = "kind")]
pub enum FiberVerdict {
    UnboundedEvidence,
    BoundedBelow,
    /// `r = 4 + 4/N`: `E(u_theta) = A theta^2/2 + (B - C) theta^{N+2}`.
    CriticalTie { coefficient: f64, unbounded: bool },
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberEvidence {
    pub thetas: Vec<f64>,
    pub energies: Vec<f64>,
    /// Potential exponent `s = N(r-2)/2` for power laws.
    pub exponent: Option<f64>,
    pub integrals: FiberIntegrals,
    pub verdict: FiberVerdict,
}

impl FiberEvidence {
    pub fn is_unbounded(&self) -> bool {
        matches!(self.verdict, FiberVerdict::UnboundedEvidence | FiberVerdict::CriticalTie { unbounded: true, .. })
    }
}

/// `E(u_theta)` along the mass-preserving fiber for `theta` in `theta_0 {1, 2, 4, 8, 16}`.
///
/// `theta_0` is 1 unless the potential term only dominates at larger `theta`, in which case the
/// sequence starts at twice the crossover scale so that the asymptotic regime is sampled.
pub fn fiber_slope(grid: &RadialGrid, u: &[f64], nl: &Nonlinearity) -> FiberEvidence {
    let fi = fiber_integrals(grid, u, nl);
    let nf = nl.n as f64;
    let (a, b, c) = (fi.a, fi.b, fi.potential);
    let exponent = nl.power_exponent().map(|r| nf * (r - 2.0) / 2.0);
    let energy = |th: f64| -> f64 {
        match exponent {
            Some(s) => 0.5 * a * th * th + b * th.powf(nf + 2.0) - c * th.powf(s),
            None => {
                let amp = th.powf(0.5 * nf);
                let pot: f64 = u.iter().zip(&grid.weights).map(|(x, w)| w * nl.big_g(amp * x)).sum::<f64>() / th.powf(nf);
                0.5 * a * th * th + b * th.powf(nf + 2.0) - pot
            }
        }
    };
    let mut theta0: f64 = 1.0;
    if let Some(s) = exponent {
        if c > 0.0 && s > 2.0 {
            theta0 = theta0.max(2.0 * (a / (2.0 * c)).powf(1.0 / (s - 2.0)));
        }
        if c > 0.0 && s > nf + 2.0 + 1e-12 {
            theta0 = theta0.max(2.0 * (b / c).powf(1.0 / (s - nf - 2.0)));
        } else if (s - nf - 2.0).abs() <= 1e-12 && c > b {
            theta0 = theta0.max(2.0 * (a / (2.0 * (c - b))).powf(1.0 / nf));
        }
    }
    let thetas: Vec<f64> = (0..5).map(|k| theta0 * 2f64.powi(k)).collect();
    let energies: Vec<f64> = thetas.iter().map(|&t| energy(t)).collect();
    let dec: Vec<f64> = energies.windows(2).map(|w| w[0] - w[1]).collect();
    let geometric = dec.iter().all(|&d| d > 0.0) && dec.windows(2).all(|w| w[1] >= 1.5 * w[0]);
    let verdict = match exponent {
        Some(s) if (s - nf - 2.0).abs() <= 1e-12 => FiberVerdict::CriticalTie { coefficient: c - b, unbounded: c > b && geometric },
        _ if geometric => FiberVerdict::UnboundedEvidence,
        _ => FiberVerdict::BoundedBelow,
    };
    FiberEvidence { thetas, energies, exponent, integrals: fi, verdict }
}

/// Decreasing rearrangement of `|u|` with respect to the mesh measure.
///
/// The source defines a step function of the measure variable; each target node receives the
/// root mean square of that function over its own measure interval, so the mass is preserved.
pub fn rearrange(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let w = &grid.weights;
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[j].abs().partial_cmp(&u[i].abs()).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let mut out = vec![0.0; u.len()];
    let mut k = 0;
    let mut left = w[order[0]];
    for j in 0..u.len() {
        let mut need = w[j];
        let mut acc = 0.0;
        while need > 0.0 && k < order.len() {
            let take = need.min(left);
            acc += take * u[order[k]] * u[order[k]];
            need -= take;
            left -= take;
            if left <= 0.0 {
                k += 1;
                if k < order.len() {
                    left = w[order[k]];
                }
            }
        }
        out[j] = (acc / w[j]).sqrt();
    }
    out
}

/// Outcome of [`minimize_e`].
#[derive(Debug, Clone)]
pub enum DescentOutcome {
    Converged(Box<Minimizer>),
    Unbounded(FiberEvidence),
    /// Dispersal towards zero energy. `positive_level` records a stationary point of positive
    /// energy met on the way, which the descent left by spreading the profile along its fiber.
    Vanishes { energy: f64, sup_u: f64, iterations: usize, shape_quotient: Option<f64>, positive_level: Option<f64> },
}

enum Run {
    Done(DescentOutcome),
    /// Stationary on `S(m)` at a nonnegative level.
    Positive(State, f64),
}

#[derive(Debug, Clone)]
pub struct Minimizer {
    pub point: CriticalPoint,
    /// Lagrange multiplier from the Rayleigh quotient.
    pub mu: f64,
    /// `E(f(v))` in the u-space discretization.
    pub energy_u: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub sigma: f64,
    /// Largest value of the shape quotient found before descending, if it was used.
    pub shape_quotient: Option<f64>,
}

/// Iterate `(sigma, v)` with cached `u = f(v)`.
#[derive(Clone)]
struct State {
    sigma: f64,
    v: Vec<f64>,
    u: Vec<f64>,
}

struct Dual<'a> {
    base: &'a RadialGrid,
    nl: &'a Nonlinearity,
    nf: f64,
    k_off: Vec<f64>,
}

impl<'a> Dual<'a> {
    fn new(base: &'a RadialGrid, nl: &'a Nonlinearity) -> Self {
        Dual { base, nl, nf: base.n as f64, k_off: base.stiffness_offdiag() }
    }

    fn kin(&self, sigma: f64, v: &[f64]) -> f64 {
        0.5 * sigma.powf(self.nf - 2.0) * self.base.grad_sq_norm(v)
    }

    fn pot(&self, sigma: f64, u: &[f64]) -> f64 {
        sigma.powf(self.nf) * u.iter().zip(&self.base.weights).map(|(x, w)| w * self.nl.big_g(*x)).sum::<f64>()
    }

    fn mass(&self, sigma: f64, u: &[f64]) -> f64 {
        sigma.powf(self.nf) * u.iter().zip(&self.base.weights).map(|(x, w)| w * x * x).sum::<f64>()
    }

    fn energy(&self, s: &State) -> f64 {
        self.kin(s.sigma, &s.v) - self.pot(s.sigma, &s.u)
    }

    /// Rescales `v` by `c > 0` so that `|f(c v)|^2 = m`.
    fn project(&self, sigma: f64, v: &mut Vec<f64>, u: &mut Vec<f64>, m: f64) {
        let sn = sigma.powf(self.nf);
        let mut c = 1.0;
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        for _ in 0..60 {
            let mut phi = -m;
            let mut dphi = 0.0;
            for i in 0..v.len() {
                let t = c * v[i];
                let f = f_of_from(t, u[i] * c.max(1.0));
                u[i] = f;
                let w = sn * self.base.weights[i];
                phi += w * f * f;
                dphi += 2.0 * w * f * f_prime_from_f(f) * v[i];
            }
            if phi.abs() <= 1e-14 * m {
                break;
            }
            if phi > 0.0 {
                hi = c;
            } else {
                lo = c;
            }
            let mut next = c - phi / dphi;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * c };
            }
            c = next;
        }
        for x in v.iter_mut() {
            *x *= c;
        }
    }

    /// Weak gradient of the energy and the half constraint gradient `W f f'`.
    fn gradients(&self, s: &State) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let sk = s.sigma.powf(self.nf - 2.0);
        let sn = s.sigma.powf(self.nf);
        let kv = self.base.stiffness_apply(&s.v);
        let n = s.v.len();
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut ffp = vec![0.0; n];
        for i in 0..n {
            let f = s.u[i];
            let fp = f_prime_from_f(f);
            let w = sn * self.base.weights[i];
            g[i] = sk * kv[i] - w * self.nl.g(f) * fp;
            ffp[i] = f * fp;
            h[i] = w * f * fp;
        }
        // The outer node is pinned to zero.
        g[n - 1] = 0.0;
        h[n - 1] = 0.0;
        (g, h, ffp)
    }

    /// `(K_sigma + beta W_sigma)^{-1} b`.
    fn precondition(&self, sigma: f64, beta: f64, b: &[f64]) -> Vec<f64> {
        let sk = sigma.powf(self.nf - 2.0);
        let sn = sigma.powf(self.nf);
        let n = b.len();
        let off: Vec<f64> = self.k_off.iter().map(|x| sk * x).collect();
        let mut d = vec![0.0; n];
        for i in 0..n - 1 {
            d[i] -= off[i];
            d[i + 1] -= off[i];
        }
        for i in 0..n {
            d[i] += beta * sn * self.base.weights[i];
        }
        let mut off = off;
        pin_last(&mut d, &mut off, b)
    }

    /// State for the physical profile `theta^{N/2} u(theta x)` of base-mesh values `u`.
    fn state_from_u(&self, u: &[f64], theta: f64) -> State {
        let amp = theta.powf(0.5 * self.nf);
        let u: Vec<f64> = u.iter().map(|x| amp * x.abs()).collect();
        State { sigma: 1.0 / theta, v: u.iter().map(|&x| f_inv(x)).collect(), u }
    }

    /// Best fiber move `tau in [e^{-1}, e]`; returns `tau` (1 when no improvement).
    fn fiber_move(&self, s: &mut State) -> f64 {
        let e0 = self.energy(s);
        let trial = |lt: f64| -> (f64, State) {
            let tau = lt.exp();
            let amp = tau.powf(0.5 * self.nf);
            let u: Vec<f64> = s.u.iter().map(|x| amp * x).collect();
            let v: Vec<f64> = u.iter().map(|&x| f_inv(x)).collect();
            let st = State { sigma: s.sigma / tau, v, u };
            (self.energy(&st), st)
        };
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (-1.0f64, 1.0f64);
        let mut x1 = b - gr * (b - a);
        let mut x2 = a + gr * (b - a);
        let mut f1 = trial(x1).0;
        let mut f2 = trial(x2).0;
        for _ in 0..40 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = trial(x1).0;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = trial(x2).0;
            }
            if b - a < 1e-9 {
                break;
            }
        }
        let (e, st) = trial(0.5 * (a + b));
        if e < e0 {
            let tau = s.sigma / st.sigma;
            *s = st;
            tau
        } else {
            1.0
        }
    }
}

/// Solves the tridiagonal system with the last unknown fixed at zero.
fn pin_last(d: &mut [f64], off: &mut [f64], b: &[f64]) -> Vec<f64> {
    let n = d.len();
    d[n - 1] = 1.0;
    off[n - 2] = 0.0;
    let mut rhs = b.to_vec();
    rhs[n - 1] = 0.0;
    solve_tridiagonal(d, off, &rhs)
}

/// `Phi(A, B) = min_theta (A theta^{2-s}/2 + B theta^{N+2-s})` and its partial derivatives.
fn phi_fiber(a: f64, b: f64, s: f64, nf: f64) -> (f64, f64, f64) {
    if s <= 2.0 + 1e-12 {
        return (0.5 * a, 0.5, 0.0);
    }
    if s >= nf + 2.0 - 1e-12 {
        return (b, 0.0, 1.0);
    }
    let th = (a * (s - 2.0) / (2.0 * b * (nf + 2.0 - s))).powf(1.0 / nf);
    let da = 0.5 * th.powf(2.0 - s);
    let db = th.powf(nf + 2.0 - s);
    (a * da + b * db, da, db)
}

/// The fiber scale `theta` minimizing `A theta^2/2 + B theta^{N+2} - C theta^s`.
fn best_theta(fi: &FiberIntegrals, s: f64, nf: f64) -> f64 {
    let e = |lt: f64| {
        let t = lt.exp();
        0.5 * fi.a * t * t + fi.b * t.powf(nf + 2.0) - fi.potential * t.powf(s)
    };
    let (mut best, mut be) = (0.0, e(0.0));
    for k in -400..=400 {
        let lt = k as f64 * 0.05;
        let v = e(lt);
        if v < be {
            be = v;
            best = lt;
        }
    }
    best.exp()
}

/// Maximizes the fiber quotient `Q = C / Phi(A, B)` on `S(m)` by preconditioned projected ascent
/// in `u` on the base mesh. `Q > 1` exactly when some dilate of the shape has negative energy.
pub fn shape_quotient_max(base: &RadialGrid, u0: &[f64], m: f64, nl: &Nonlinearity, max_iter: usize) -> (Vec<f64>, f64) {
    let nf = base.n as f64;
    let s = nl.power_exponent().map(|r| nf * (r - 2.0) / 2.0).unwrap_or(nf);
    let w = &base.weights;
    let log_q = |u: &[f64]| -> f64 {
        let fi = fiber_integrals(base, u, nl);
        if fi.potential <= 0.0 {
            return f64::NEG_INFINITY;
        }
        fi.potential.ln() - phi_fiber(fi.a, fi.b, s, nf).0.ln()
    };
    let normalize = |u: &mut Vec<f64>| {
        let mass: f64 = u.iter().zip(w).map(|(x, w)| w * x * x).sum();
        let c = (m / mass).sqrt();
        u.iter_mut().for_each(|x| *x *= c);
    };
    let mut u = u0.to_vec();
    *u.last_mut().unwrap() = 0.0;
    normalize(&mut u);
    let mut off = base.stiffness_offdiag();
    let n = u.len();
    let mut diag = vec![0.0; n];
    for i in 0..n - 1 {
        diag[i] -= off[i];
        diag[i + 1] -= off[i];
    }
    for i in 0..n {
        diag[i] += w[i];
    }
    diag[n - 1] = 1.0;
    off[n - 2] = 0.0;
    let mut lq = log_q(&u);
    let mut t = 1.0;
    let mut stall = 0;
    for it in 0..max_iter {
        let fi = fiber_integrals(base, &u, nl);
        let (_, da, db) = phi_fiber(fi.a, fi.b, s, nf);
        let phi = phi_fiber(fi.a, fi.b, s, nf).0;
        let (ga, gb) = fiber_gradients(base, &u);
        let mut grad: Vec<f64> = (0..n).map(|i| w[i] * nl.g(u[i]) / fi.potential - (da * ga[i] + db * gb[i]) / phi).collect();
        let mut h: Vec<f64> = (0..n).map(|i| w[i] * u[i]).collect();
        grad[n - 1] = 0.0;
        h[n - 1] = 0.0;
        let z1 = solve_tridiagonal(&diag, &off, &grad);
        let z2 = solve_tridiagonal(&diag, &off, &h);
        let mu = -dot(&h, &z1) / dot(&h, &z2);
        let d: Vec<f64> = (0..n).map(|i| z1[i] + mu * z2[i]).collect();
        let scale = (dot(&u, &h) / dot(&d, &d.iter().zip(w).map(|(x, w)| w * x).collect::<Vec<_>>()).max(1e-300)).sqrt();
        let mut improved = false;
        while t > 1e-12 {
            let mut trial: Vec<f64> = (0..n).map(|i| u[i] + t * scale * d[i]).collect();
            normalize(&mut trial);
            let lt = log_q(&trial);
            if lt > lq {
                stall = if lt - lq < 1e-10 { stall + 1 } else { 0 };
                u = trial;
                lq = lt;
                improved = true;
                t = (t * 1.5).min(0.5);
                break;
            }
            t *= 0.5;
        }
        if !improved || stall > 20 {
            break;
        }
        if (it + 1) % 25 == 0 {
            let mut r = rearrange(base, &u);
            r[n - 1] = 0.0;
            normalize(&mut r);
            let lr = log_q(&r);
            if lr >= lq {
                u = r;
                lq = lr;
            }
        }
    }
    (u, lq.exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `E` on `S(m)`.
///
/// Power laws are screened first: `r > 4 + 4/N` is unbounded, and for `2 + 4/N <= r <= 4 + 4/N`
/// the fiber quotient decides whether a negative level is reachable before the descent starts.
pub fn minimize_e(m: f64, nl: &Nonlinearity, base: &RadialGrid, opts: &DescentOptions) -> Result<DescentOutcome> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("mass m = {m} must be positive")));
    }
    let dual = Dual::new(base, nl);
    let nf = dual.nf;
    let wid = opts.initial_width;
    let mut gauss: Vec<f64> = base.sample(|r| (-(r * r) / (wid * wid)).exp());
    *gauss.last_mut().unwrap() = 0.0;
    let c0 = (m / dual.mass(1.0, &gauss)).sqrt();
    let u0: Vec<f64> = gauss.iter().map(|x| c0 * x).collect();

    let mut shape_q = None;
    let mut start = u0.clone();
    let mut theta = 1.0;
    if let Some(r) = nl.power_exponent() {
        let (q, p) = (nl.q(), nl.p());
        let s = nf * (r - 2.0) / 2.0;
        if r > p + 1e-12 {
            return Ok(DescentOutcome::Unbounded(fiber_slope(base, &u0, nl)));
        }
        if r >= q - 1e-12 {
            let (u, qmax) = shape_quotient_max(base, &u0, m, nl, 3000);
            shape_q = Some(qmax);
            let ev = fiber_slope(base, &u, nl);
            if ev.is_unbounded() {
                return Ok(DescentOutcome::Unbounded(ev));
            }
            let fi = fiber_integrals(base, &u, nl);
            theta = if qmax > 1.0 { best_theta(&fi, s, nf) } else { 1.0 };
            start = u;
        } else {
            let fi = fiber_integrals(base, &u0, nl);
            theta = best_theta(&fi, s, nf);
        }
    }
    let mut st = dual.state_from_u(&start, theta);
    {
        let (mut v, mut u) = (st.v.clone(), st.u.clone());
        dual.project(st.sigma, &mut v, &mut u, m);
        st.v = v;
        st.u = u;
    }
    let mut positive = None;
    for _ in 0..=SPREAD_RESTARTS {
        match descend(&dual, st, m, opts, shape_q)? {
            Run::Done(DescentOutcome::Vanishes { energy, sup_u, iterations, shape_quotient, .. }) => {
                return Ok(DescentOutcome::Vanishes { energy, sup_u, iterations, shape_quotient, positive_level: positive });
            }
            Run::Done(out) => return Ok(out),
            Run::Positive(s, e) => {
                positive = Some(e);
                let amp = SPREAD.powf(-0.5 * nf);
                let u: Vec<f64> = s.u.iter().map(|x| amp * x).collect();
                st = State { sigma: s.sigma * SPREAD, v: u.iter().map(|&x| f_inv(x)).collect(), u };
            }
        }
    }
    Err(Error::NonConverged(format!("stationary at nonnegative energy {:e} after spreading", positive.unwrap_or(f64::NAN))))
}

/// Fiber dilation applied when the descent stalls at a nonnegative stationary point.
const SPREAD: f64 = 8.0;
const SPREAD_RESTARTS: usize = 2;

const STALL_WINDOW: usize = 200;

fn descend(dual: &Dual, mut st: State, m: f64, opts: &DescentOptions, shape_q: Option<f64>) -> Result<Run> {
    let base = dual.base;
    let mut e = dual.energy(&st);
    let mut t: f64 = 1.0;
    let mut vanish_run = 0;
    let mut mu = 0.0;
    let mut rel = f64::INFINITY;
    let mut e_lag = f64::INFINITY;
    for it in 0..opts.max_iter {
        let tau = dual.fiber_move(&mut st);
        e = dual.energy(&st);

        let (g, h, ffp) = dual.gradients(&st);
        let hh = dot(&h, &ffp);
        mu = if hh > 0.0 { -dot(&g, &ffp) / hh } else { 0.0 };
        let sn = st.sigma.powf(dual.nf);
        let res2: f64 = (0..g.len()).map(|i| (g[i] + mu * h[i]).powi(2) / (sn * base.weights[i])).sum();
        rel = res2.sqrt() / (mu.abs() * hh.max(0.0).sqrt()).max(1e-300);

        let sup_u = st.u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        log::trace!("it {it} E {e:.6e} sigma {:.3e} mu {mu:.4e} rel {rel:.2e}", st.sigma);
        if e.abs() < 1e-6 && sup_u < 1e-4 && tau < 1.0 {
            vanish_run += 1;
            if vanish_run >= 50 {
                return Ok(Run::Done(DescentOutcome::Vanishes {
                    energy: e,
                    sup_u,
                    iterations: it + 1,
                    shape_quotient: shape_q,
                    positive_level: None,
                }));
            }
        } else {
            vanish_run = 0;
        }
        if rel < opts.tol {
            return stationary(dual, st, m, mu, rel, it + 1, shape_q, e);
        }
        if it % STALL_WINDOW == 0 {
            // Residual floor: the energy has stopped moving while the residual is already small.
            if rel < 1e2 * opts.tol && e_lag - e <= opts.tol * e.abs() {
                return stationary(dual, st, m, mu, rel, it + 1, shape_q, e);
            }
            e_lag = e;
        }

        let beta = mu.max(0.1 / (st.sigma * st.sigma));
        let z1 = dual.precondition(st.sigma, beta, &g);
        let z2 = dual.precondition(st.sigma, beta, &h);
        let md = -dot(&h, &z1) / dot(&h, &z2);
        let d: Vec<f64> = (0..g.len()).map(|i| z1[i] + md * z2[i]).collect();
        let slope = dot(&g, &d);
        if !(slope > 0.0) {
            if rel < 1e2 * opts.tol {
                return stationary(dual, st, m, mu, rel, it + 1, shape_q, e);
            }
            continue;
        }
        let mut accepted = false;
        while t >= 1e-14 {
            let mut v: Vec<f64> = (0..g.len()).map(|i| st.v[i] - t * d[i]).collect();
            let mut u = st.u.clone();
            dual.project(st.sigma, &mut v, &mut u, m);
            let trial = State { sigma: st.sigma, v, u };
            let et = dual.energy(&trial);
            if et <= e - 1e-4 * t * slope {
                st = trial;
                e = et;
                accepted = true;
                t = (t * 1.5).min(10.0);
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if rel < 1e2 * opts.tol {
                return stationary(dual, st, m, mu, rel, it + 1, shape_q, e);
            }
            return Err(Error::NonConverged(format!(
                "step size below 1e-14 at iteration {it}: energy {e:e}, mu {mu:e}, relative residual {rel:e}"
            )));
        }
        if opts.rearrange_every > 0 && (it + 1) % opts.rearrange_every == 0 {
            let mut ur = rearrange(base, &st.u);
            *ur.last_mut().unwrap() = 0.0;
            let mut v: Vec<f64> = ur.iter().map(|&x| f_inv(x)).collect();
            let mut u = ur;
            dual.project(st.sigma, &mut v, &mut u, m);
            let trial = State { sigma: st.sigma, v, u };
            let et = dual.energy(&trial);
            if et <= e {
                st = trial;
                e = et;
            }
        }
    }
    Err(Error::NonConverged(format!(
        "iteration limit {} reached: energy {e:e}, mu {mu:e}, relative residual {rel:e}",
        opts.max_iter
    )))
}

#[allow(clippy::too_many_arguments)]
fn stationary(dual: &Dual, st: State, m: f64, mu: f64, rel: f64, iterations: usize, shape_q: Option<f64>, e: f64) -> Result<Run> {
    if e < 0.0 {
        finish(dual, st, m, mu, rel, iterations, shape_q).map(Run::Done)
    } else {
        Ok(Run::Positive(st, e))
    }
}

fn finish(dual: &Dual, st: State, m: f64, mu: f64, rel: f64, iterations: usize, shape_q: Option<f64>) -> Result<DescentOutcome> {
    let nl = dual.nl;
    let grid = Arc::new(dual.base.scaled(st.sigma));
    let lambda = if mu > 0.0 { mu.ln() } else { f64::NAN };
    let lam_eval = if mu > 0.0 { lambda } else { 0.0 };
    let s = dual_scalars(&grid, &st.v, nl);
    let breakdown = dual_j(&grid, lam_eval, &st.v, m, nl)?;
    let energy = 0.5 * s.grad_sq - s.potential;
    let energy_u = crate::functionals::energy_e(&grid, &st.u, nl)?;
    let point = CriticalPoint {
        lambda,
        mu,
        mass: s.dual_mass,
        energy,
        breakdown,
        pohozaev_residual: pohozaev_relative(&s, lam_eval, nl.n),
        psp: psp_residual(&grid, lam_eval, &st.v, m, nl),
        field: RadialField::new(grid, st.v)?,
    };
    Ok(DescentOutcome::Converged(Box::new(Minimizer { point, mu, energy_u, iterations, relative_residual: rel, sigma: st.sigma, shape_quotient: shape_q })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rearrangement_keeps_monotone_input_and_mass() {
        let g = RadialGrid::graded(3, 400, 20.0, 3.0).unwrap();
        let mono = g.sample(|r| (-r * r / 4.0).exp());
        let out = rearrange(&g, &mono);
        for (a, b) in mono.iter().zip(&out) {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
        let bumps = g.sample(|r| (-(r - 5.0).powi(2)).exp() + 0.5 * (-(r - 10.0).powi(2)).exp());
        let re = rearrange(&g, &bumps);
        assert!(re.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let m0: f64 = g.integrate_unchecked(&bumps.iter().map(|x| x * x).collect::<Vec<_>>());
        let m1: f64 = g.integrate_unchecked(&re.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!((m0 - m1).abs() < 1e-12 * m0);
    }

    #[test]
    fn fiber_exponents() {
        let g = RadialGrid::default_for(3);
        let u = g.sample(|r| (-r * r).exp());
        let six = fiber_slope(&g, &u, &Nonlinearity::power(6.0, 3).unwrap());
        assert_eq!(six.verdict, FiberVerdict::UnboundedEvidence);
        let three = fiber_slope(&g, &u, &Nonlinearity::power(3.0, 3).unwrap());
        assert_eq!(three.verdict, FiberVerdict::BoundedBelow);
        let tie = fiber_slope(&g, &u, &Nonlinearity::power(16.0 / 3.0, 3).unwrap());
        assert!(matches!(tie.verdict, FiberVerdict::CriticalTie { .. }));
    }
}
