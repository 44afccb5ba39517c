//! The dual change of variables `u = f(v)`.
//!
//! `f` is the odd solution of `f' = (1 + 2 f^2)^{-1/2}`, `f(0) = 0`. Its inverse has
//! the closed form `f^{-1}(s) = s sqrt(1 + 2 s^2) / 2 + asinh(sqrt(2) s) / (2 sqrt(2))`,
//! so `f` itself is evaluated by Newton iteration on that expression.

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use serde::Serialize;

const SQRT2: f64 = std::f64::consts::SQRT_2;
const NEWTON_MAX_ITER: usize = 80;

/// Closed-form inverse of `f`, extended oddly to negative arguments.
#[inline]
pub fn f_inv(s: f64) -> f64 {
    let a = s.abs();
    let root = (1.0f64).hypot(SQRT2 * a);
    let val = 0.5 * a * root + (SQRT2 * a).asinh() / (2.0 * SQRT2);
    val.copysign(s)
}

/// Derivative of [`f_inv`]: `sqrt(1 + 2 s^2)`.
#[inline]
pub fn f_inv_prime(s: f64) -> f64 {
    (1.0f64).hypot(SQRT2 * s)
}

/// Checked variant of [`f_inv`] that rejects non-finite input.
pub fn f_inv_checked(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("f_inv({s})")));
    }
    Ok(f_inv(s))
}

/// `f(t)`. Non-finite input yields NaN; see [`f_of_checked`].
#[inline]
pub fn f_of(t: f64) -> f64 {
    let a = t.abs();
    // f(t) <= min(t, 2^{1/4} sqrt(t)); Newton on the convex f_inv from above is monotone.
    let guess = a.min(SQRT2.sqrt() * a.sqrt());
    solve_from(a, guess).copysign(t)
}

/// `f(t)` with a caller-supplied starting point, used when a nearby value is known.
#[inline]
pub fn f_of_from(t: f64, guess: f64) -> f64 {
    let a = t.abs();
    let g = guess.abs();
    let g = if g.is_finite() && g > 0.0 && g <= a { g } else { a.min(SQRT2.sqrt() * a.sqrt()) };
    solve_from(a, g).copysign(t)
}

fn solve_from(a: f64, mut s: f64) -> f64 {
    if !a.is_finite() {
        return f64::NAN;
    }
    if a == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, a);
    for _ in 0..NEWTON_MAX_ITER {
        let r = f_inv(s) - a;
        if r > 0.0 {
            hi = hi.min(s);
        } else {
            lo = lo.max(s);
        }
        let mut next = s - r / f_inv_prime(s);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 4.0 * f64::EPSILON * s {
            return next;
        }
        s = next;
    }
    s
}

/// Checked variant of [`f_of`].
pub fn f_of_checked(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("f_of({t})")));
    }
    Ok(f_of(t))
}

/// `f'(t) = (1 + 2 f(t)^2)^{-1/2}`.
#[inline]
pub fn f_prime(t: f64) -> f64 {
    f_prime_from_f(f_of(t))
}

/// `f'` expressed through an already computed `f(t)`.
#[inline]
pub fn f_prime_from_f(f: f64) -> f64 {
    1.0 / (1.0f64).hypot(SQRT2 * f)
}

/// `f''(t) = -2 f f'^4`, expressed through `f(t)`.
#[inline]
pub fn f_second_from_f(f: f64) -> f64 {
    let fp = f_prime_from_f(f);
    -2.0 * f * fp.powi(4)
}

/// Optional tabulated `f` on nonnegative nodes; direct Newton evaluation remains the reference.
#[derive(Debug, Clone)]
pub struct TransformTable {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub accuracy: f64,
}

impl TransformTable {
    /// Tabulates `f` at the given strictly increasing nonnegative nodes.
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.first().map_or(true, |&x| x < 0.0) {
            return Err(Error::InvalidArgument("table nodes must be increasing and nonnegative".into()));
        }
        let values: Vec<f64> = nodes.iter().map(|&t| f_of(t)).collect();
        // Linear interpolation error is bounded by h^2 max|f''| / 8 and |f''| <= 1.
        let accuracy = nodes.windows(2).map(|w| (w[1] - w[0]).powi(2) / 8.0).fold(0.0, f64::max);
        Ok(TransformTable { nodes, values, accuracy })
    }

    /// Checks the table invariants; returns the first violated index if any.
    pub fn validate(&self) -> std::result::Result<(), usize> {
        for i in 0..self.nodes.len() {
            let (t, f) = (self.nodes[i], self.values[i]);
            if f > t * (1.0 + 1e-15) || f > SQRT2.sqrt() * t.sqrt() * (1.0 + 1e-15) {
                return Err(i);
            }
            if i + 1 < self.nodes.len() {
                let slope = (self.values[i + 1] - f) / (self.nodes[i + 1] - t);
                if !(slope > 0.0 && slope <= 1.0 + 1e-12) {
                    return Err(i);
                }
            }
        }
        Ok(())
    }

    /// Piecewise-linear lookup, odd extension, falls back to Newton outside the table.
    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        let n = self.nodes.len();
        if n < 2 || a < self.nodes[0] || a > self.nodes[n - 1] {
            return f_of(t);
        }
        let j = self.nodes.partition_point(|&x| x <= a).clamp(1, n - 1);
        let (t0, t1) = (self.nodes[j - 1], self.nodes[j]);
        let w = (a - t0) / (t1 - t0);
        ((1.0 - w) * self.values[j - 1] + w * self.values[j]).copysign(t)
    }
}

/// Outcome of a single property check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// One row of the transform property report. `margin >= 0` means the inequality holds.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub id: u8,
    pub name: &'static str,
    pub status: CheckStatus,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    /// Plain-text table, one row per property.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:>3}  {:<44} {:<13} {:>12}\n", "id", "property", "status", "margin");
        for c in &self.checks {
            let st = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Inconclusive => "INCONCLUSIVE",
            };
            s.push_str(&format!("{:>3}  {:<44} {:<13} {:>12.4e}\n", c.id, c.name, st, c.margin));
        }
        s
    }
}

/// Log-spaced samples on `[t_min, t_max]`.
pub fn log_samples(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

fn check(id: u8, name: &'static str, ok: bool, margin: f64, detail: String) -> PropertyCheck {
    PropertyCheck { id, name, status: status(ok), margin, detail }
}

// Relative slack allowed for pairwise monotonicity tests near rounding level.
const MONO_TOL: f64 = 1e-12;

/// A sampled ratio has a finite supremum if it does not grow toward either end of the range.
fn bounded_trend(ratios: &[f64]) -> (bool, f64) {
    let n = ratios.len();
    if ratios.iter().any(|r| !r.is_finite()) {
        return (false, f64::INFINITY);
    }
    let sup = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = (n / 16).max(1);
    let tail_ok = ratios[n - 1] <= ratios[n - 1 - k] * (1.0 + 1e-9) + 1e-300;
    let head_ok = ratios[0] <= ratios[k] * (1.0 + 1e-9) + 1e-300;
    (tail_ok && head_ok, sup)
}

/// Evaluates the sixteen structural properties of `f` over `samples` (positive, sorted).
/// Properties involving the nonlinearity use `nl` in dimension `nl.n`.
pub fn check_f_properties(samples: &[f64], nl: &Nonlinearity) -> PropertyReport {
    let ts: Vec<f64> = {
        let mut v: Vec<f64> = samples.iter().cloned().filter(|t| *t > 0.0 && t.is_finite()).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    };
    let n = ts.len();
    let t_min = ts.first().cloned().unwrap_or(f64::NAN);
    let t_max = ts.last().cloned().unwrap_or(f64::NAN);
    let fs: Vec<f64> = ts.iter().map(|&t| f_of(t)).collect();
    let fps: Vec<f64> = fs.iter().map(|&f| f_prime_from_f(f)).collect();
    let mut out = Vec::with_capacity(16);

    // (1) invertible: strictly increasing, odd, round trip through the closed form.
    {
        let mut margin = f64::INFINITY;
        let mut ok = n >= 2;
        for i in 0..n {
            let rt = (f_inv(fs[i]) - ts[i]).abs() / ts[i].max(1.0);
            margin = margin.min(1e-10 - rt);
            if i + 1 < n && !(fs[i + 1] > fs[i]) {
                ok = false;
            }
            if f_of(-ts[i]) != -fs[i] {
                ok = false;
            }
        }
        ok &= margin >= 0.0;
        out.push(check(1, "smooth, odd, invertible (round trip)", ok, margin, "1e-10 round-trip budget".into()));
    }
    // (2) 0 < f' <= 1
    {
        let margin = fps.iter().map(|&d| d.min(1.0 - d)).fold(f64::INFINITY, f64::min);
        let ok = fps.iter().all(|&d| d > 0.0 && d <= 1.0);
        out.push(check(2, "0 < f'(t) <= 1", ok, margin, String::new()));
    }
    // (3) |f(t)| <= |t|
    {
        let margin = ts.iter().zip(&fs).map(|(t, f)| (t - f) / t).fold(f64::INFINITY, f64::min);
        out.push(check(3, "|f(t)| <= |t|", margin >= 0.0, margin, String::new()));
    }
    // (4) f(t)/t -> 1 as t -> 0
    {
        if t_min > 1e-4 {
            out.push(PropertyCheck {
                id: 4,
                name: "f(t)/t -> 1 as t -> 0",
                status: CheckStatus::Inconclusive,
                margin: f64::NAN,
                detail: "sample range does not reach 1e-4".into(),
            });
        } else {
            let at = |t: f64| (f_of(t) / t - 1.0).abs();
            let dev = at(1e-4).max(at(t_min));
            let trend = at(t_min) <= at(1e-4) + 1e-16;
            out.push(check(4, "f(t)/t -> 1 as t -> 0", dev < 1e-6 && trend, 1e-6 - dev, format!("|f/t-1| = {dev:.3e}")));
        }
    }
    // (5) f(t)^2/t -> sqrt 2
    {
        if t_max < 1e8 {
            out.push(PropertyCheck {
                id: 5,
                name: "f(t)^2/t -> sqrt(2) as t -> inf",
                status: CheckStatus::Inconclusive,
                margin: f64::NAN,
                detail: "sample range does not reach 1e8".into(),
            });
        } else {
            let at = |t: f64| (f_of(t).powi(2) / t - SQRT2).abs();
            let dev = at(t_max);
            let trend = at(t_max) <= at(t_max / 10.0);
            out.push(check(5, "f(t)^2/t -> sqrt(2) as t -> inf", dev < 1e-3 && trend, 1e-3 - dev, format!("|f^2/t-sqrt2| = {dev:.3e}")));
        }
    }
    // (6) f/2 <= t f' <= f for t >= 0
    {
        let mut margin = f64::INFINITY;
        for i in 0..n {
            let tf = ts[i] * fps[i];
            margin = margin.min((tf - 0.5 * fs[i]) / fs[i]).min((fs[i] - tf) / fs[i]);
        }
        out.push(check(6, "f/2 <= t f' <= f (t >= 0)", margin >= -MONO_TOL, margin, String::new()));
    }
    // (7) |f| <= 2^{1/4} |t|^{1/2}
    {
        let c = SQRT2.sqrt();
        let margin = ts.iter().zip(&fs).map(|(t, f)| (c * t.sqrt() - f) / f).fold(f64::INFINITY, f64::min);
        out.push(check(7, "|f(t)| <= 2^(1/4) |t|^(1/2)", margin >= 0.0, margin, String::new()));
    }
    // (8) f >= C|t| on |t|<=1, f >= C|t|^{1/2} on |t|>1
    {
        let c = ts
            .iter()
            .zip(&fs)
            .map(|(&t, &f)| if t <= 1.0 { f / t } else { f / t.sqrt() })
            .fold(f64::INFINITY, f64::min);
        out.push(check(8, "f >= C|t| (|t|<=1), f >= C|t|^(1/2) (|t|>1)", c > 0.0 && c.is_finite(), c, format!("C = {c:.6}")));
    }
    // (9) |f| f' <= 1/sqrt 2
    {
        let margin = fs.iter().zip(&fps).map(|(f, d)| 1.0 / SQRT2 - f * d).fold(f64::INFINITY, f64::min);
        out.push(check(9, "|f| f' <= 1/sqrt(2)", margin >= 0.0, margin, String::new()));
    }
    // (10) |f(theta t)|^2 <= C(theta) |f(t)|^2, with C(theta) = max(1, theta^2)
    {
        let mut margin = f64::INFINITY;
        for &th in &[0.01, 0.5, 2.0, 10.0, 1000.0] {
            let bound = if th > 1.0 { th * th } else { 1.0 };
            for (&t, &f) in ts.iter().zip(&fs) {
                let ratio = (f_of(th * t) / f).powi(2);
                margin = margin.min((bound - ratio) / bound);
            }
        }
        out.push(check(10, "|f(theta t)|^2 <= C(theta) |f(t)|^2", margin >= -MONO_TOL, margin, "C(theta) = max(1, theta^2)".into()));
    }
    // (11) f f' / t decreasing
    {
        let h: Vec<f64> = (0..n).map(|i| fs[i] * fps[i] / ts[i]).collect();
        let margin = h.windows(2).map(|w| (w[0] - w[1]) / w[0]).fold(f64::INFINITY, f64::min);
        out.push(check(11, "f f'/t decreasing on t > 0", margin >= -MONO_TOL, margin, String::new()));
    }
    // (12) f^r f' / t increasing for r >= 3
    {
        let mut margin = f64::INFINITY;
        for &r in &[3.0, 4.0, 6.0] {
            let h: Vec<f64> = (0..n).map(|i| fs[i].powf(r) * fps[i] / ts[i]).collect();
            let m = h.windows(2).map(|w| (w[1] - w[0]) / w[1]).fold(f64::INFINITY, f64::min);
            margin = margin.min(m);
        }
        out.push(check(12, "f^r f'/t increasing (r = 3, 4, 6)", margin >= -MONO_TOL, margin, String::new()));
    }
    // (13) |t|^r <= C|f|^2 + C|f|^{2r}
    {
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for &r in &[2.0, 3.0, 4.0, 6.0] {
            let ratios: Vec<f64> = (0..n)
                .map(|i| (r * ts[i].ln() - (fs[i].powi(2) + fs[i].powf(2.0 * r)).ln()).exp())
                .collect();
            let (b, sup) = bounded_trend(&ratios);
            ok &= b;
            worst = worst.max(sup);
        }
        out.push(check(13, "|t|^r <= C|f|^2 + C|f|^2r (r = 2..6)", ok, worst, format!("max C = {worst:.4}")));
    }
    // (14) f^2(rt) >= C r f^2(t) (r >= 1), >= C r^2 f^2(t) (r <= 1)
    {
        let mut c = f64::INFINITY;
        for &r in &[1.0, 2.0, 10.0, 1e3, 0.5, 0.1, 1e-3] {
            for (&t, &f) in ts.iter().zip(&fs) {
                let lhs = f_of(r * t).powi(2);
                let rhs = if r >= 1.0 { r * f * f } else { r * r * f * f };
                c = c.min(lhs / rhs);
            }
        }
        out.push(check(14, "f^2(rt) >= C r f^2(t) / C r^2 f^2(t)", c > 0.0, c, format!("C = {c:.6}")));
    }
    // (15) |G[f(t)]| <= eps |f|^2 + C_eps |t|^{p/2}
    {
        let p = nl.p();
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for &eps in &[1.0, 0.1, 0.01] {
            let ratios: Vec<f64> = (0..n)
                .map(|i| ((nl.big_g(fs[i]).abs() - eps * fs[i] * fs[i]).max(0.0)) / ts[i].powf(0.5 * p))
                .collect();
            let (b, sup) = bounded_trend(&ratios);
            ok &= b;
            worst = worst.max(sup);
        }
        out.push(check(15, "|G[f]| <= eps f^2 + C_eps |t|^(p/2)", ok, worst, format!("max C_eps = {worst:.4e}")));
    }
    // (16) G[f(t)] >= L|t|^q - C_L |t|^r for an exponent r in (q, 2*)
    {
        let q = nl.q();
        let r_hi = match nl.n {
            2 => q + 2.0,
            nn => 0.5 * (q + 2.0 * nn as f64 / (nn as f64 - 2.0)),
        };
        if !nl.g6_holds() {
            out.push(PropertyCheck {
                id: 16,
                name: "G[f] >= L|t|^q - C_L|t|^r",
                status: CheckStatus::Inconclusive,
                margin: f64::NAN,
                detail: "configured nonlinearity does not satisfy (g6)".into(),
            });
        } else {
            let mut ok = true;
            let mut worst: f64 = 0.0;
            for &l in &[1.0, 10.0] {
                let ratios: Vec<f64> = (0..n)
                    .map(|i| ((l * ts[i].powf(q) - nl.big_g(fs[i])).max(0.0)) / ts[i].powf(r_hi))
                    .collect();
                let (b, sup) = bounded_trend(&ratios);
                ok &= b;
                worst = worst.max(sup);
            }
            out.push(check(16, "G[f] >= L|t|^q - C_L|t|^r", ok, worst, format!("r = {r_hi:.4}, max C_L = {worst:.4e}")));
        }
    }
    PropertyReport { t_min, t_max, samples: n, checks: out }
}
