//! The nonlinearity `g`, its primitive `G`, the critical exponents and `lambda_0`.

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::transform::{f_of, log_samples, CheckStatus};
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// A user-supplied `g` sampled at nonnegative `s`, extended oddly.
#[derive(Debug, Clone)]
pub struct TableG {
    interp: Pchip,
    prefix: Vec<f64>,
    source: String,
}

impl TableG {
    /// Builds the table from `(s, g(s))` pairs with `s >= 0`; `(0, 0)` is added when missing.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>, source: &str) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        if pairs.iter().any(|(s, g)| !s.is_finite() || !g.is_finite() || *s < 0.0) {
            return Err(Error::Config { path: "nonlinearity.path".into(), msg: "table entries must be finite with s >= 0".into() });
        }
        if pairs.first().map_or(true, |p| p.0 > 0.0) {
            pairs.insert(0, (0.0, 0.0));
        }
        if pairs[0].1 != 0.0 {
            return Err(Error::Config { path: "nonlinearity.path".into(), msg: "g(0) must be 0".into() });
        }
        if pairs.windows(2).any(|w| !(w[1].0 > w[0].0)) || pairs.len() < 4 {
            return Err(Error::Config { path: "nonlinearity.path".into(), msg: "need >= 3 distinct positive s values".into() });
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let interp = Pchip::new(&x, &y);
        let prefix = interp.node_integrals();
        Ok(TableG { interp, prefix, source: source.to_string() })
    }

    /// Reads a two-column CSV `s,g` (header optional).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(|e| Error::Config {
            path: "nonlinearity.path".into(),
            msg: format!("{}: {e}", path.display()),
        })?;
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Config { path: "nonlinearity.path".into(), msg: e.to_string() })?;
            if rec.len() < 2 {
                continue;
            }
            match (rec[0].trim().parse::<f64>(), rec[1].trim().parse::<f64>()) {
                (Ok(s), Ok(g)) => pairs.push((s, g)),
                _ if pairs.is_empty() => continue,
                _ => return Err(Error::Config { path: "nonlinearity.path".into(), msg: "unparsable row".into() }),
            }
        }
        Self::from_pairs(pairs, &path.display().to_string())
    }

    /// Log-slope of `g` at the last node; beyond the table `g` continues as a power law.
    fn tail_exponent(&self) -> Option<f64> {
        let xm = self.interp.x_max();
        let gm = self.interp.eval(xm);
        (gm > 0.0).then(|| (xm * self.interp.deriv(xm) / gm).max(0.0))
    }

    fn g_pos(&self, s: f64) -> f64 {
        let xm = self.interp.x_max();
        if s <= xm {
            return self.interp.eval(s);
        }
        match self.tail_exponent() {
            Some(k) => self.interp.eval(xm) * (s / xm).powf(k),
            None => self.interp.eval(xm) + self.interp.deriv(xm) * (s - xm),
        }
    }

    fn gp_pos(&self, s: f64) -> f64 {
        let xm = self.interp.x_max();
        if s <= xm {
            return self.interp.deriv(s);
        }
        match self.tail_exponent() {
            Some(k) => self.interp.eval(xm) * k / xm * (s / xm).powf(k - 1.0),
            None => self.interp.deriv(xm),
        }
    }

    fn big_g_pos(&self, s: f64) -> f64 {
        let xm = self.interp.x_max();
        if s <= xm {
            return self.interp.integral_to(s, &self.prefix);
        }
        let base = self.interp.integral_to(xm, &self.prefix);
        let g0 = self.interp.eval(xm);
        match self.tail_exponent() {
            Some(k) => base + g0 * xm / (k + 1.0) * ((s / xm).powf(k + 1.0) - 1.0),
            None => {
                let w = s - xm;
                base + g0 * w + 0.5 * self.interp.deriv(xm) * w * w
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Kind {
    /// `g(s) = |s|^{r-2} s`, `G(s) = |s|^r / r`.
    Power { r: f64 },
    Table(Arc<TableG>),
}

/// `g`, `G` and the exponents derived from the dimension `n`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    pub n: usize,
    pub kind: Kind,
}

impl Nonlinearity {
    /// Power law, validated against the admissible range for `n`.
    pub fn power(r: f64, n: usize) -> Result<Self> {
        check_dimension(n)?;
        if !(r > 2.0) || !r.is_finite() {
            return Err(Error::Config { path: "nonlinearity.r".into(), msg: format!("r = {r} must exceed 2") });
        }
        if n >= 3 {
            let crit = 4.0 * n as f64 / (n as f64 - 2.0);
            if r >= crit {
                return Err(Error::Config { path: "nonlinearity.r".into(), msg: format!("r = {r} must be below 4N/(N-2) = {crit}") });
            }
        }
        Ok(Nonlinearity { n, kind: Kind::Power { r } })
    }

    pub fn table(t: TableG, n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(Nonlinearity { n, kind: Kind::Table(Arc::new(t)) })
    }

    /// `q = 2 + 4/N`.
    pub fn q(&self) -> f64 {
        2.0 + 4.0 / self.n as f64
    }

    /// `p = 4 + 4/N`.
    pub fn p(&self) -> f64 {
        4.0 + 4.0 / self.n as f64
    }

    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { r } => Some(r),
            Kind::Table(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Power { r } => format!("power(r={r})"),
            Kind::Table(t) => format!("table({})", t.source),
        }
    }

    #[inline]
    pub fn g(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { r } => s.abs().powf(r - 2.0) * s,
            Kind::Table(t) => t.g_pos(s.abs()).copysign(s),
        }
    }

    /// `g'(s)`.
    #[inline]
    pub fn g_prime(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { r } => (r - 1.0) * s.abs().powf(r - 2.0),
            Kind::Table(t) => t.gp_pos(s.abs()),
        }
    }

    /// Primitive `G(s) = int_0^s g`.
    #[inline]
    pub fn big_g(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { r } => s.abs().powf(*r) / r,
            Kind::Table(t) => t.big_g_pos(s.abs()),
        }
    }

    /// `G[f(t)]`.
    pub fn g_of_f(&self, t: f64) -> f64 {
        self.big_g(f_of(t))
    }

    /// `lambda_0 = ln(2 sup G(s)/s^2)`, `+inf` when the supremum keeps growing.
    pub fn lambda0(&self) -> f64 {
        if self.power_exponent().is_some() {
            return f64::INFINITY;
        }
        let ss = log_samples(1e-8, 1e8, 1601);
        let ratios: Vec<f64> = ss.iter().map(|&s| self.big_g(s) / (s * s)).collect();
        let sup = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let top = ratios.len() - 101;
        let sup_below_top = ratios[..top].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Still growing by more than 0.1% over the top decade: treat the supremum as divergent.
        if sup > sup_below_top.max(0.0) * (1.0 + 1e-3) && ratios[ratios.len() - 1] >= sup * (1.0 - 1e-12) {
            return f64::INFINITY;
        }
        if sup <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (2.0 * sup).ln()
    }

    /// Whether `liminf_{s->0} |g(s)|/|s|^{q-1} = inf`.
    pub fn g6_holds(&self) -> bool {
        match self.kind {
            Kind::Power { r } => r < self.q(),
            Kind::Table(_) => self.check_assumptions().g6.status == CheckStatus::Pass,
        }
    }

    /// `H(s) = G[f(s)] - (e^lambda / 2) f(s)^2`, positive exactly where the mountain-pass geometry lives.
    pub fn h_of(&self, lambda: f64, s: f64) -> f64 {
        let f = f_of(s);
        self.big_g(f) - 0.5 * lambda.exp() * f * f
    }

    /// Numeric verdicts for the hypotheses (g1)-(g7).
    pub fn check_assumptions(&self) -> AssumptionReport {
        let small = log_samples(1e-8, 1e-2, 61);
        let large = log_samples(1e2, 1e6, 41);
        let mk = |status, margin: f64, detail: String| AssumptionCheck { status, margin, detail };

        let g1 = mk(CheckStatus::Pass, 0.0, "continuous by construction".into());

        let r2: Vec<f64> = small.iter().map(|&s| (self.g(s) / s).abs()).collect();
        let g2 = trend_to_zero(&r2, false);

        let p = self.p();
        let r3: Vec<f64> = large.iter().map(|&s| self.g(s).abs() / s.powf(p - 1.0)).collect();
        let g3 = trend_to_zero(&r3, true);

        let probe = log_samples(1e-6, 1e6, 241);
        let best = probe.iter().map(|&s| (s, self.big_g(s))).fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let g4 = mk(
            if best.1 > 0.0 { CheckStatus::Pass } else { CheckStatus::Fail },
            best.1,
            format!("max G = {:.3e} at s = {:.3e}", best.1, best.0),
        );

        let odd_err = probe.iter().map(|&s| (self.g(-s) + self.g(s)).abs() / self.g(s).abs().max(1e-300)).fold(0.0, f64::max);
        let g5 = mk(if odd_err <= 1e-12 { CheckStatus::Pass } else { CheckStatus::Fail }, -odd_err, format!("max odd defect {odd_err:.2e}"));

        let q = self.q();
        let r6: Vec<f64> = small.iter().map(|&s| self.g(s).abs() / s.powf(q - 1.0)).collect();
        let g6 = match self.kind {
            Kind::Power { r } => {
                let st = if r < q { CheckStatus::Pass } else { CheckStatus::Fail };
                mk(st, q - r, format!("exponent comparison r = {r:.4} vs q = {q:.4}"))
            }
            Kind::Table(_) => trend_to_infinity(&r6),
        };

        let sign_min = probe.iter().flat_map(|&s| [self.g(s) * s, self.g(-s) * -s]).fold(f64::INFINITY, f64::min);
        let g7 = mk(if sign_min >= 0.0 { CheckStatus::Pass } else { CheckStatus::Fail }, sign_min, String::new());

        AssumptionReport { g1, g2, g3, g4, g5, g6, g7 }
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::Config { path: "N".into(), msg: format!("N = {n} unsupported (supported dimensions: 2, 3)") })
    }
}

/// Ratios sampled toward the limit point (increasing `s` when `toward_end`, otherwise decreasing).
fn trend_to_zero(r: &[f64], toward_end: bool) -> AssumptionCheck {
    let (near, far) = if toward_end { (r[r.len() - 1], r[0]) } else { (r[0], r[r.len() - 1]) };
    let decreasing = near <= far;
    let (status, detail) = if near < 1e-3 * far.max(1e-300) || near < 1e-8 {
        (CheckStatus::Pass, "ratio decays toward the limit".to_string())
    } else if decreasing {
        (CheckStatus::Inconclusive, "ratio decreasing but not yet small".to_string())
    } else {
        (CheckStatus::Fail, "ratio does not decay".to_string())
    };
    AssumptionCheck { status, margin: near, detail }
}

fn trend_to_infinity(r: &[f64]) -> AssumptionCheck {
    let (near, far) = (r[0], r[r.len() - 1]);
    let status = if near > 1e3 * far.max(1e-300) {
        CheckStatus::Pass
    } else if near > far {
        CheckStatus::Inconclusive
    } else {
        CheckStatus::Fail
    };
    AssumptionCheck { status, margin: near, detail: format!("ratio {near:.3e} near 0 vs {far:.3e}") }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub status: CheckStatus,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub g1: AssumptionCheck,
    pub g2: AssumptionCheck,
    pub g3: AssumptionCheck,
    pub g4: AssumptionCheck,
    pub g5: AssumptionCheck,
    pub g6: AssumptionCheck,
    pub g7: AssumptionCheck,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_and_lambda0() {
        let nl = Nonlinearity::power(3.0, 3).unwrap();
        assert!((nl.q() - 10.0 / 3.0).abs() < 1e-15);
        assert!((nl.p() - 16.0 / 3.0).abs() < 1e-15);
        assert!(nl.lambda0().is_infinite());
        assert!(nl.g6_holds());
        assert!(!Nonlinearity::power(4.0, 3).unwrap().g6_holds());
        assert!(Nonlinearity::power(1.5, 3).is_err());
        assert!(Nonlinearity::power(3.0, 4).is_err());
    }

    #[test]
    fn primitive_matches_g() {
        let nl = Nonlinearity::power(3.0, 3).unwrap();
        for i in -20..=20 {
            let s = i as f64 * 0.5 + 0.1;
            let h = 1e-5 * s.abs().max(1.0);
            let fd = (nl.big_g(s + h) - nl.big_g(s - h)) / (2.0 * h);
            assert!((fd - nl.g(s)).abs() <= 1e-6 * nl.g(s).abs().max(1e-3));
        }
        assert!((nl.g_of_f(1.271274) - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(nl.g_of_f(0.0), 0.0);
    }

    #[test]
    fn table_reproduces_cubic_power() {
        let pairs: Vec<(f64, f64)> = log_samples(1e-4, 50.0, 400).into_iter().map(|s| (s, s * s)).collect();
        let t = TableG::from_pairs(pairs, "inline").unwrap();
        let nl = Nonlinearity::table(t, 3).unwrap();
        assert!((nl.big_g(2.0) - 8.0 / 3.0).abs() < 1e-4);
        assert!((nl.g(-2.0) + 4.0).abs() < 1e-4);
        assert!(nl.lambda0().is_infinite());
        let rep = nl.check_assumptions();
        assert_eq!(rep.g5.status, CheckStatus::Pass);
        assert_eq!(rep.g4.status, CheckStatus::Pass);
    }

    #[test]
    fn saturating_table_has_finite_lambda0() {
        // g(s) = s^3/(1+s^2) gives G(s)/s^2 -> 1/2, so lambda_0 = ln 1 = 0 from below.
        let pairs: Vec<(f64, f64)> = log_samples(1e-4, 1e9, 600).into_iter().map(|s| (s, s.powi(3) / (1.0 + s * s))).collect();
        let nl = Nonlinearity::table(TableG::from_pairs(pairs, "inline").unwrap(), 3).unwrap();
        let l0 = nl.lambda0();
        assert!(l0.is_finite() && l0 < 0.0 && l0 > -0.1, "lambda0 = {l0}");
    }

    #[test]
    fn assumption_report_for_powers() {
        let r3 = Nonlinearity::power(3.0, 3).unwrap().check_assumptions();
        assert_eq!(r3.g6.status, CheckStatus::Pass);
        assert_eq!(r3.g2.status, CheckStatus::Pass);
        assert_eq!(r3.g3.status, CheckStatus::Pass);
        let r4 = Nonlinearity::power(4.0, 3).unwrap().check_assumptions();
        assert_eq!(r4.g6.status, CheckStatus::Fail);
        let r55 = Nonlinearity::power(5.5, 3).unwrap().check_assumptions();
        assert_eq!(r55.g3.status, CheckStatus::Fail);
    }
}
