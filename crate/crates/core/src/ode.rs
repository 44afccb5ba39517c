//! Adaptive Dormand–Prince 5(4) integration with step callbacks.

/// One accepted step, with enough data for cubic Hermite dense output.
#[derive(Debug, Clone, Copy)]
pub struct Step<const D: usize> {
    pub t0: f64,
    pub y0: [f64; D],
    pub f0: [f64; D],
    pub t1: f64,
    pub y1: [f64; D],
    pub f1: [f64; D],
}

impl<const D: usize> Step<D> {
    /// Hermite interpolant of component `k` at `t` in `[t0, t1]`.
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y0[k]
            + (s3 - 2.0 * s2 + s) * h * self.f0[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y1[k]
            + (s3 - s2) * h * self.f1[k]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<const D: usize> {
    pub rtol: f64,
    pub atol: [f64; D],
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStatus {
    /// The callback asked to stop.
    Stopped,
    ReachedEnd,
    StepLimit,
    StepUnderflow,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights are the last row of A; these are fifth minus fourth order.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`, calling `on_step` after every accepted step.
/// Returns the status and the final `(t, y)`.
pub fn integrate<const D: usize, F, S>(
    rhs: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    opts: &OdeOptions<D>,
    mut on_step: S,
) -> (OdeStatus, f64, [f64; D])
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    S: FnMut(&Step<D>) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut f = rhs(t, &y);
    let mut h = opts.h_init.min(opts.h_max).min(t_end - t0);
    let mut k = [[0.0; D]; 7];
    for _ in 0..opts.max_steps {
        if t >= t_end {
            return (OdeStatus::ReachedEnd, t, y);
        }
        h = h.min(t_end - t);
        if h <= 1e-15 * t.abs().max(1e-300) {
            return (OdeStatus::StepUnderflow, t, y);
        }
        k[0] = f;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..D {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[s] = rhs(t + C[s] * h, &ys);
        }
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            for i in 0..D {
                y_new[i] += h * A[6][j] * kj[i];
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..D {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = opts.atol[i] + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        if !err.is_finite() {
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            let f_new = k[6];
            let step = Step { t0: t, y0: y, f0: f, t1: t + h, y1: y_new, f1: f_new };
            t += h;
            y = y_new;
            f = f_new;
            if !on_step(&step) {
                return (OdeStatus::Stopped, t, y);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    (OdeStatus::StepLimit, t, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let opts = OdeOptions { rtol: 1e-11, atol: [1e-13; 2], h_init: 1e-3, h_max: 1.0, max_steps: 100_000 };
        let (st, t, y) = integrate(|_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, &opts, |_| true);
        assert_eq!(st, OdeStatus::ReachedEnd);
        assert!((t - 10.0).abs() < 1e-12);
        assert!((y[0] - 10f64.cos()).abs() < 1e-9 && (y[1] + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn callback_stops_and_dense_output_is_accurate() {
        let opts = OdeOptions { rtol: 1e-10, atol: [1e-12; 1], h_init: 1e-2, h_max: 0.5, max_steps: 10_000 };
        let mut worst: f64 = 0.0;
        let (st, t, _) = integrate(|_, y| [-y[0]], 0.0, [1.0], 100.0, &opts, |s| {
            let tm = 0.5 * (s.t0 + s.t1);
            worst = worst.max((s.eval(0, tm) - (-tm).exp()).abs());
            s.t1 < 3.0
        });
        assert_eq!(st, OdeStatus::Stopped);
        assert!(t >= 3.0 && t < 4.0);
        assert!(worst < 1e-6);
    }
}
