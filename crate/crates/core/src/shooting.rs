//! Radial shooting for the dual equation
//! `v'' + (N-1)/rho v' = e^lambda f(v) f'(v) - g[f(v)] f'(v)`, `v(0) = a`, `v'(0) = 0`.
//!
//! The ground state is located by bisection on `a` between an overshoot (the trajectory
//! crosses zero) and an undershoot (it turns back up at a positive minimum). Levels are
//! accumulated along the ODE, so `a_1(lambda)` does not depend on any mesh.

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::functionals::{dual_j, dual_scalars, grad_v_j, pohozaev_relative, psp_residual, residual_surrogate};
use crate::grid::{solve_tridiagonal, sphere_area, RadialField, RadialGrid, DEFAULT_NODES};
use crate::nonlinearity::Nonlinearity;
use crate::ode::{integrate, OdeOptions, OdeStatus, Step};
use crate::transform::{f_inv, f_of, f_prime_from_f};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShotClass {
    CrossesZero,
    BlowsUp,
    Decays,
}

#[derive(Debug, Clone)]
pub struct ShootingOutcome {
    pub a: f64,
    pub classification: ShotClass,
    pub trajectory: RadialField,
    pub crossing_radius: Option<f64>,
}

/// State: `v`, `v'` and the running integrals of `|v'|^2`, `f(v)^2`, `G(f(v))`.
type State = [f64; 5];

struct Problem<'a> {
    nl: &'a Nonlinearity,
    mu: f64,
    n: usize,
    omega: f64,
}

impl Problem<'_> {
    fn new(nl: &Nonlinearity, lambda: f64) -> Problem<'_> {
        Problem { nl, mu: lambda.exp(), n: nl.n, omega: sphere_area(nl.n) }
    }

    /// `q(v) = f'(v) (e^lambda f(v) - g(f(v)))`.
    fn q(&self, v: f64) -> f64 {
        let u = f_of(v);
        f_prime_from_f(u) * (self.mu * u - self.nl.g(u))
    }

    /// `dq/dv`.
    fn q_prime(&self, v: f64) -> f64 {
        let u = f_of(v);
        let fp = f_prime_from_f(u);
        let fp2 = fp * fp;
        let fpp = -2.0 * u * fp2 * fp2;
        self.mu * (fp2 + u * fpp) - (self.nl.g_prime(u) * fp2 + self.nl.g(u) * fpp)
    }

    fn rhs(&self, rho: f64, y: &State) -> State {
        let u = f_of(y[0]);
        let fp = f_prime_from_f(u);
        let w = y[1];
        let jac = self.omega * rho.powi(self.n as i32 - 1);
        [
            w,
            fp * (self.mu * u - self.nl.g(u)) - (self.n as f64 - 1.0) / rho * w,
            jac * w * w,
            jac * u * u,
            jac * self.nl.big_g(u),
        ]
    }

    /// Natural length scale at height `a`.
    fn length(&self, a: f64) -> f64 {
        let c = (self.q_prime(a).abs()).max(self.mu).max((self.q(a) / a).abs());
        1.0 / c.sqrt()
    }

    /// Series start `v = a + q(a) rho^2 / (2N)` at a small radius.
    fn start(&self, a: f64) -> (f64, State) {
        let rho0 = 1e-6 * self.length(a);
        let c = self.q(a);
        let nf = self.n as f64;
        let u = f_of(a);
        let vol = self.omega * rho0.powi(self.n as i32) / nf;
        let w = c * rho0 / nf;
        (rho0, [a + c * rho0 * rho0 / (2.0 * nf), w, self.omega * w * w * rho0.powi(self.n as i32) / (nf + 2.0), vol * u * u, vol * self.nl.big_g(u)])
    }

    fn options(&self, a: f64) -> OdeOptions<5> {
        let l = self.length(a);
        OdeOptions {
            rtol: 1e-12,
            atol: [1e-14 * a, 1e-14 * a / l, f64::INFINITY, f64::INFINITY, f64::INFINITY],
            h_init: 1e-3 * l,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

struct Shot {
    class: ShotClass,
    crossing: Option<f64>,
    steps: Vec<Step<5>>,
    end: (f64, State),
}

/// Integrates one trajectory until its classification is decided.
fn run(p: &Problem, a: f64, r_decay: f64, keep: bool) -> Shot {
    let (rho0, y0) = p.start(a);
    let cap = r_decay.max(1e4 * p.length(a));
    let opts = p.options(a);
    let mut class = ShotClass::Decays;
    let mut crossing = None;
    let mut steps = Vec::new();
    let (status, t, y) = integrate(|t, y| p.rhs(t, y), rho0, y0, cap, &opts, |s| {
        if keep {
            steps.push(*s);
        }
        let (v, w) = (s.y1[0], s.y1[1]);
        if v < 0.0 {
            class = ShotClass::CrossesZero;
            crossing = Some(locate_zero(s));
            return false;
        }
        if (w > 0.0 && v > 0.0) || v.abs() > 10.0 * a {
            class = ShotClass::BlowsUp;
            return false;
        }
        // Past the decay radius with a tail below the field tolerance.
        !(s.t1 >= r_decay && v <= 1e-8 * a)
    });
    if status == OdeStatus::StepUnderflow || status == OdeStatus::StepLimit {
        log::warn!("shooting integration stopped early at rho = {t:e} (a = {a:e})");
    }
    Shot { class, crossing, steps, end: (t, y) }
}

fn locate_zero(s: &Step<5>) -> f64 {
    let (mut lo, mut hi) = (s.t0, s.t1);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if s.eval(0, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Dense evaluation of a stored trajectory (component `k`), clamped to its range.
fn dense(steps: &[Step<5>], k: usize, t: f64, cursor: &mut usize) -> f64 {
    if t <= steps[0].t0 {
        return steps[0].y0[k];
    }
    while *cursor + 1 < steps.len() && steps[*cursor].t1 < t {
        *cursor += 1;
    }
    let s = &steps[*cursor];
    if t >= s.t1 {
        return s.y1[k];
    }
    s.eval(k, t)
}

/// Positive zero of `e^lambda s - g(s)`, in the dual variable.
pub fn equilibrium_height(nl: &Nonlinearity, lambda: f64) -> Result<f64> {
    if let Some(r) = nl.power_exponent() {
        return Ok(f_inv((lambda / (r - 2.0)).exp()));
    }
    let mu = lambda.exp();
    let phi = |s: f64| nl.g(s) - mu * s;
    let ss = crate::transform::log_samples(1e-8, 1e8, 1601);
    let k = ss.windows(2).position(|w| phi(w[0]) <= 0.0 && phi(w[1]) > 0.0).ok_or(Error::NoPositiveH(lambda))?;
    let (mut lo, mut hi) = (ss[k], ss[k + 1]);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(f_inv(0.5 * (lo + hi)))
}

fn check_lambda(nl: &Nonlinearity, lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite(format!("lambda = {lambda}")));
    }
    if lambda >= nl.lambda0() {
        return Err(Error::NoPositiveH(lambda));
    }
    Ok(())
}

/// Shoots from height `a` and samples the trajectory on `grid`.
pub fn shoot(lambda: f64, a: f64, grid: Arc<RadialGrid>, nl: &Nonlinearity) -> Result<ShootingOutcome> {
    check_lambda(nl, lambda)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("initial height a = {a} must be positive")));
    }
    let p = Problem::new(nl, lambda);
    let shot = run(&p, a, grid.r_max(), true);
    let mut cur = 0;
    let (t_end, y_end) = shot.end;
    let values: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| if r >= t_end { y_end[0] } else { dense(&shot.steps, 0, r, &mut cur) })
        .collect();
    Ok(ShootingOutcome { a, classification: shot.class, trajectory: RadialField::new(grid, values)?, crossing_radius: shot.crossing })
}

#[derive(Debug, Clone, Copy)]
pub struct GroundStateOptions {
    /// Nodes of the adapted mesh carrying the sampled ground state.
    pub nodes: usize,
    /// Bisection stops at `hi - lo <= rel_width * hi`.
    pub rel_width: f64,
    /// Polish the sampled profile by Newton's method on the mesh.
    pub polish: bool,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions { nodes: DEFAULT_NODES, rel_width: 1e-12, polish: true }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub point: CriticalPoint,
    /// Shooting height `v(0)`.
    pub a: f64,
    /// Level `J_lambda` from the ODE integrals plus the exponential tail.
    pub a1: f64,
    /// Dual mass from the ODE integrals.
    pub mass_ode: f64,
    /// `J_lambda` of the mesh field.
    pub a1_grid: f64,
    /// Radius where the bracketing trajectories separate and the tail takes over.
    pub rho_match: f64,
    pub bisection_steps: usize,
}

/// Least-energy solution of the dual equation at `lambda`.
pub fn ground_state(lambda: f64, nl: &Nonlinearity, opts: &GroundStateOptions) -> Result<GroundState> {
    check_lambda(nl, lambda)?;
    let p = Problem::new(nl, lambda);
    let v_eq = equilibrium_height(nl, lambda)?;
    let a_max = 1e6 * v_eq.max(1.0);
    let classify = |a: f64| run(&p, a, f64::INFINITY, false).class;

    let mut hi = 2.0 * v_eq;
    let mut lo = 0.5 * v_eq;
    loop {
        match classify(hi) {
            ShotClass::CrossesZero => break,
            _ => {
                lo = hi;
                hi *= 2.0;
            }
        }
        if hi > a_max {
            return Err(Error::NoBracket { lambda, a_min: 1e-6, a_max });
        }
    }
    let mut iters = 0;
    while hi - lo > opts.rel_width * hi && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify(mid) {
            ShotClass::CrossesZero => hi = mid,
            _ => lo = mid,
        }
        iters += 1;
    }
    let s_lo = run(&p, lo, f64::INFINITY, true);
    let s_hi = run(&p, hi, f64::INFINITY, true);
    let a = 0.5 * (lo + hi);

    // Follow the undershoot while both bracketing trajectories agree and decrease.
    let mut cur = 0;
    let mut k_match = 0;
    for (k, s) in s_lo.steps.iter().enumerate() {
        let v_lo = s.y1[0];
        let v_hi = dense(&s_hi.steps, 0, s.t1, &mut cur);
        if s.y1[1] >= 0.0 || v_hi <= 0.0 || (v_lo - v_hi).abs() > 1e-6 * v_lo.abs() {
            break;
        }
        k_match = k;
    }
    let sm = &s_lo.steps[k_match];
    let rho_c = sm.t1;
    let mut cur_hi = 0;
    let avg = |k: usize, cur_hi: &mut usize| 0.5 * (sm.y1[k] + dense(&s_hi.steps, k, rho_c, cur_hi));
    let v_c = avg(0, &mut cur_hi);
    let (i1, i2, i3) = (avg(2, &mut cur_hi), avg(3, &mut cur_hi), avg(4, &mut cur_hi));
    let mu = p.mu;
    let kdec = mu.sqrt();
    let nm1 = nl.n as f64 - 1.0;
    // Linear tail v = v_c (rho_c/rho)^{(N-1)/2} e^{-k (rho - rho_c)}, integrated to leading order.
    let tail_mass = p.omega * v_c * v_c * rho_c.powf(nm1) / (2.0 * kdec);
    let i1 = i1 + kdec * kdec * tail_mass;
    let i2 = i2 + tail_mass;
    let a1 = 0.5 * i1 + 0.5 * mu * i2 - i3;
    if v_c > 1e-2 * a {
        log::warn!("ground state at lambda = {lambda}: tail matched at v/a = {:.2e}", v_c / a);
    }

    let tail = move |r: f64| v_c * (rho_c / r).powf(0.5 * nm1) * (-kdec * (r - rho_c)).exp();
    let rho_end = rho_c + (v_c / (1e-10 * a)).max(10.0).ln() / kdec;
    let grid = Arc::new(adapted_mesh(nl.n, opts.nodes, rho_end, a, |r, c| {
        if r <= rho_c {
            0.5 * (dense(&s_lo.steps, 0, r, &mut c.0) + dense(&s_hi.steps, 0, r, &mut c.1))
        } else {
            tail(r)
        }
    })?);
    let mut c = (0, 0);
    let mut v: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| if r <= rho_c { 0.5 * (dense(&s_lo.steps, 0, r, &mut c.0) + dense(&s_hi.steps, 0, r, &mut c.1)) } else { tail(r) })
        .collect();
    if opts.polish {
        newton_polish(&grid, lambda, &mut v, nl);
    }
    let field = RadialField::new(grid.clone(), v)?;
    let s = dual_scalars(&grid, &field.values, nl);
    let breakdown = dual_j(&grid, lambda, &field.values, 0.0, nl)?;
    let point = CriticalPoint {
        lambda,
        mu,
        mass: s.dual_mass,
        energy: a1,
        breakdown,
        pohozaev_residual: pohozaev_relative(&s, lambda, nl.n),
        psp: psp_residual(&grid, lambda, &field.values, s.dual_mass, nl),
        field,
    };
    Ok(GroundState { a1_grid: breakdown.total, point, a, a1, mass_ode: i2, rho_match: rho_c, bisection_steps: iters })
}

/// Mesh on `[0, r_end]` equidistributing `rho / r_end + (a - v(rho)) / a`: half the nodes
/// uniform, half placed by equal decrements of `v`.
fn adapted_mesh<F>(n: usize, nodes: usize, r_end: f64, a: f64, mut v: F) -> Result<RadialGrid>
where
    F: FnMut(f64, &mut (usize, usize)) -> f64,
{
    let fine = 16 * nodes;
    let mut c = (0, 0);
    let xs: Vec<f64> = (0..=fine).map(|i| r_end * i as f64 / fine as f64).collect();
    let mut cum = vec![0.0; fine + 1];
    let mut prev = v(0.0, &mut c);
    for i in 1..=fine {
        let cur = v(xs[i], &mut c);
        cum[i] = cum[i - 1] + 1.0 / fine as f64 + (cur - prev).abs() / a;
        prev = cur;
    }
    let total = cum[fine];
    let mut out = Vec::with_capacity(nodes);
    let mut j = 0;
    for i in 0..nodes {
        let target = total * i as f64 / (nodes - 1) as f64;
        while j + 1 < fine && cum[j + 1] < target {
            j += 1;
        }
        let w = ((target - cum[j]) / (cum[j + 1] - cum[j])).clamp(0.0, 1.0);
        out.push(xs[j] + w * (xs[j + 1] - xs[j]));
    }
    out[0] = 0.0;
    out[nodes - 1] = r_end;
    out.dedup_by(|b, a| *b <= *a);
    RadialGrid::from_nodes(n, out)
}

/// Newton iterations on the discrete equation `K v + W q(v) = 0` with a tridiagonal Jacobian.
pub fn newton_polish(grid: &RadialGrid, lambda: f64, v: &mut [f64], nl: &Nonlinearity) -> f64 {
    let p = Problem::new(nl, lambda);
    let off = grid.stiffness_offdiag();
    let n = v.len();
    let weak = |v: &[f64]| -> Vec<f64> {
        let k = grid.stiffness_apply(v);
        (0..n).map(|i| k[i] + grid.weights[i] * p.q(v[i])).collect()
    };
    let norm = |r: &[f64]| -> f64 { r.iter().zip(&grid.weights).map(|(x, w)| x * x / w).sum::<f64>().sqrt() };
    let mut r = weak(v);
    let mut rn = norm(&r);
    for _ in 0..40 {
        if residual_surrogate(grid, &grad_v_j(grid, lambda, v, nl), v) < 1e-12 {
            break;
        }
        let mut d = vec![0.0; n];
        for i in 0..n - 1 {
            d[i] -= off[i];
            d[i + 1] -= off[i];
        }
        for i in 0..n {
            d[i] += grid.weights[i] * p.q_prime(v[i]);
        }
        let minus_r: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = solve_tridiagonal(&d, &off, &minus_r);
        if delta.iter().any(|x| !x.is_finite()) {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-4 {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(x, d)| x + alpha * d).collect();
            let rt = weak(&trial);
            let nt = norm(&rt);
            if nt < rn {
                v.copy_from_slice(&trial);
                r = rt;
                rn = nt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    residual_surrogate(grid, &grad_v_j(grid, lambda, v, nl), v)
}

#[derive(Debug, Clone, Serialize)]
pub struct A1Point {
    pub lambda: f64,
    pub a1: f64,
    pub dual_mass: f64,
    /// `a_1(lambda) / e^lambda`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct A1Curve {
    pub points: Vec<A1Point>,
    /// `2 min a_1(lambda) / e^lambda` over the computed points.
    pub m1_estimate: f64,
}

/// Tabulates `a_1` and the dual mass of the ground state over `lambdas`; failed points are skipped.
pub fn a1_curve(lambdas: &[f64], nl: &Nonlinearity) -> A1Curve {
    let opts = GroundStateOptions { polish: false, ..Default::default() };
    let points: Vec<A1Point> = lambdas
        .par_iter()
        .filter_map(|&l| match ground_state_level(l, nl, &opts) {
            Ok((a1, mass)) => Some(A1Point { lambda: l, a1, dual_mass: mass, ratio: a1 / l.exp() }),
            Err(e) => {
                log::warn!("a1 at lambda = {l}: {e}");
                None
            }
        })
        .collect();
    let m1_estimate = 2.0 * points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    A1Curve { points, m1_estimate }
}

/// `(a_1(lambda), |f(v_lambda)|^2)` from the ODE integrals only.
pub fn ground_state_level(lambda: f64, nl: &Nonlinearity, opts: &GroundStateOptions) -> Result<(f64, f64)> {
    let gs = ground_state(lambda, nl, &GroundStateOptions { nodes: 256.min(opts.nodes), polish: false, ..*opts })?;
    Ok((gs.a1, gs.mass_ode))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_ground_state_at_zero() {
        let nl = Nonlinearity::power(3.0, 3).unwrap();
        let gs = ground_state(0.0, &nl, &GroundStateOptions::default()).unwrap();
        assert!(gs.a1 > 0.0);
        assert!((gs.a1 - gs.a1_grid).abs() < 1e-3 * gs.a1, "{} vs {}", gs.a1, gs.a1_grid);
        assert!(gs.point.pohozaev_residual < 1e-3);
        assert!(gs.point.psp.grad_v_norm < 1e-6);
    }

    #[test]
    fn shooting_dichotomy() {
        let nl = Nonlinearity::power(3.0, 3).unwrap();
        let gs = ground_state(0.0, &nl, &GroundStateOptions { polish: false, nodes: 256, ..Default::default() }).unwrap();
        let grid = Arc::new(RadialGrid::default_for(3));
        let over = shoot(0.0, gs.a * 1.01, grid.clone(), &nl).unwrap();
        let under = shoot(0.0, gs.a * 0.99, grid, &nl).unwrap();
        assert_eq!(over.classification, ShotClass::CrossesZero);
        assert!(over.crossing_radius.unwrap() > 0.0);
        assert_eq!(under.classification, ShotClass::BlowsUp);
    }
}
