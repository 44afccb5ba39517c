//! Classification of `e(m)` and location of the mass thresholds between regimes.

use crate::critical::CriticalPointRecord;
use crate::descent::{fiber_slope, minimize_e, DescentOptions, DescentOutcome, FiberEvidence};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid, DEFAULT_GRADING, DEFAULT_NODES, DEFAULT_RMAX};
use crate::minimax::b1_upper;
use crate::nonlinearity::Nonlinearity;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    NegAttained,
    Zero,
    MinusInf,
    Unresolved,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::NegAttained => "NEG_ATTAINED",
            Verdict::Zero => "ZERO",
            Verdict::MinusInf => "MINUS_INF",
            Verdict::Unresolved => "UNRESOLVED",
        }
    }

    pub fn is_resolved(&self) -> bool {
        *self != Verdict::Unresolved
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeVerdict {
    /// Power exponent, `NaN` for tabulated nonlinearities.
    pub r: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: f64,
    pub verdict: Verdict,
    /// Minimal energy found; `-inf` for `MINUS_INF`.
    pub energy: Option<f64>,
    pub mu: Option<f64>,
    pub evidence: String,
    /// Descent energy vs the `lambda`-scan bound, when the cross-check ran.
    pub routes_agreement: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<CriticalPointRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber: Option<FiberEvidence>,
    /// Dual field of the minimizer.
    #[serde(skip)]
    pub field: Option<RadialField>,
}

#[derive(Debug, Clone, Copy)]
pub struct RegimeOptions {
    pub descent: DescentOptions,
    pub nodes: usize,
    pub r_max: f64,
    pub grading: f64,
    /// Run `b1_upper` next to the descent for attained negative levels.
    pub cross_check: bool,
    /// Relative width at which `bracket_threshold` stops.
    pub rel_width: f64,
}

impl Default for RegimeOptions {
    fn default() -> Self {
        RegimeOptions {
            descent: DescentOptions::default(),
            nodes: DEFAULT_NODES,
            r_max: DEFAULT_RMAX,
            grading: DEFAULT_GRADING,
            cross_check: false,
            rel_width: 0.05,
        }
    }
}

impl RegimeOptions {
    pub fn grid(&self, n: usize) -> Result<RadialGrid> {
        RadialGrid::graded(n, self.nodes, self.r_max, self.grading)
    }
}

/// Energies above this are not counted as an attained negative level.
pub const NEG_LEVEL: f64 = -1e-8;
/// Relative agreement required between the descent energy and the `lambda`-scan bound.
pub const ROUTE_TOL: f64 = 1e-2;

pub fn classify(r: f64, n: usize, m: f64, opts: &RegimeOptions) -> Result<RegimeVerdict> {
    let nl = Nonlinearity::power(r, n)?;
    classify_nl(&nl, m, opts)
}

/// Fiber screen on a Gaussian of mass `m`, then the constrained descent.
pub fn classify_nl(nl: &Nonlinearity, m: f64, opts: &RegimeOptions) -> Result<RegimeVerdict> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("mass m = {m} must be positive")));
    }
    let base = opts.grid(nl.n)?;
    let mut out = RegimeVerdict {
        r: nl.power_exponent().unwrap_or(f64::NAN),
        n: nl.n,
        m,
        verdict: Verdict::Unresolved,
        energy: None,
        mu: None,
        evidence: String::new(),
        routes_agreement: None,
        minimizer: None,
        fiber: None,
        field: None,
    };

    let mut probe = base.sample(|x| (-x * x / 9.0).exp());
    *probe.last_mut().unwrap() = 0.0;
    let mass: f64 = base.integrate_unchecked(&probe.iter().map(|x| x * x).collect::<Vec<_>>());
    let c = (m / mass).sqrt();
    probe.iter_mut().for_each(|x| *x *= c);
    let screen = fiber_slope(&base, &probe, nl);
    if screen.is_unbounded() {
        out.verdict = Verdict::MinusInf;
        out.energy = Some(f64::NEG_INFINITY);
        out.evidence = format!("fiber screen: {}", describe_fiber(&screen));
        out.fiber = Some(screen);
        return Ok(out);
    }

    match minimize_e(m, nl, &base, &opts.descent) {
        Ok(DescentOutcome::Unbounded(ev)) => {
            out.verdict = if ev.is_unbounded() { Verdict::MinusInf } else { Verdict::Unresolved };
            out.energy = Some(f64::NEG_INFINITY);
            out.evidence = format!("fiber after shape ascent: {}", describe_fiber(&ev));
            out.fiber = Some(ev);
        }
        Ok(DescentOutcome::Vanishes { energy, sup_u, iterations, shape_quotient, positive_level }) => {
            out.verdict = Verdict::Zero;
            out.energy = Some(energy);
            let mut ev = format!("vanishes: sup|u| = {sup_u:.3e} after {iterations} iterations");
            if let Some(q) = shape_quotient {
                ev.push_str(&format!("; shape quotient {q:.6}"));
            }
            if let Some(p) = positive_level {
                ev.push_str(&format!("; left a stationary point at E = {p:.6e}"));
            }
            out.evidence = ev;
        }
        Ok(DescentOutcome::Converged(min)) => {
            let p = &min.point;
            let mass_ok = (p.mass - m).abs() <= 1e-6 * m;
            out.energy = Some(min.energy_u);
            out.mu = Some(min.mu);
            out.evidence = format!(
                "descent: {} iterations; relative residual {:.2e}; Pohozaev residual {:.2e}",
                min.iterations, min.relative_residual, p.pohozaev_residual
            );
            out.verdict = if min.energy_u < NEG_LEVEL && mass_ok && min.mu > 0.0 {
                Verdict::NegAttained
            } else {
                Verdict::Unresolved
            };
            if opts.cross_check && out.verdict == Verdict::NegAttained {
                let l0 = p.lambda;
                let grid: Vec<f64> = (0..=32).map(|i| l0 - 4.0 + 0.25 * i as f64).collect();
                out.routes_agreement = Some(match b1_upper(m, nl, &grid) {
                    Ok(b) => (b.b1 - min.energy_u).abs() <= ROUTE_TOL * min.energy_u.abs(),
                    Err(e) => {
                        log::warn!("cross-check at m = {m}: {e}");
                        false
                    }
                });
            }
            out.minimizer = Some(p.record());
            out.field = Some(p.field.clone());
        }
        Err(Error::NonConverged(msg)) => {
            out.evidence = format!("nonconverged: {msg}");
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

fn describe_fiber(ev: &FiberEvidence) -> String {
    let last = ev.energies.last().copied().unwrap_or(f64::NAN);
    let theta = ev.thetas.last().copied().unwrap_or(f64::NAN);
    match ev.exponent {
        Some(s) => format!("{:?}; exponent {s:.4}; E at theta = {theta:.3e} is {last:.3e}", ev.verdict),
        None => format!("{:?}; E at theta = {theta:.3e} is {last:.3e}", ev.verdict),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_verdict: Verdict,
    pub hi_verdict: Verdict,
    /// Every classification made, in order.
    pub probes: Vec<RegimeVerdict>,
}

/// Bisection in `ln m` until `hi / lo - 1 <= rel_width`. Requires `ZERO` at `m_lo` and
/// `NEG_ATTAINED` or `MINUS_INF` at `m_hi`.
pub fn bracket_threshold(nl: &Nonlinearity, m_lo: f64, m_hi: f64, opts: &RegimeOptions) -> Result<ThresholdInterval> {
    if !(m_lo > 0.0 && m_hi > m_lo) {
        return Err(Error::InvalidArgument(format!("need 0 < m_lo < m_hi, got [{m_lo}, {m_hi}]")));
    }
    let lo_v = classify_nl(nl, m_lo, opts)?;
    let hi_v = classify_nl(nl, m_hi, opts)?;
    let top = hi_v.verdict;
    if lo_v.verdict != Verdict::Zero || !matches!(top, Verdict::NegAttained | Verdict::MinusInf) {
        return Err(Error::BadBracket(format!("{} at m = {m_lo}, {} at m = {m_hi}", lo_v.verdict, top)));
    }
    let (mut lo, mut hi) = (m_lo, m_hi);
    let mut probes = vec![lo_v, hi_v];
    while hi / lo - 1.0 > opts.rel_width {
        let mid = (lo * hi).sqrt();
        let v = classify_nl(nl, mid, opts)?;
        let verdict = v.verdict;
        probes.push(v);
        match verdict {
            Verdict::Zero => lo = mid,
            x if x == top => hi = mid,
            Verdict::Unresolved => {
                return Err(Error::NonConverged(format!("classification unresolved at m = {mid} inside [{lo}, {hi}]")));
            }
            other => {
                return Err(Error::BadBracket(format!("{other} at m = {mid} between ZERO and {top}")));
            }
        }
    }
    Ok(ThresholdInterval { lo, hi, lo_verdict: Verdict::Zero, hi_verdict: top, probes })
}

/// Classifies every mass in `ms` in parallel; the output follows the input order.
pub fn scan_masses(nl: &Nonlinearity, ms: &[f64], opts: &RegimeOptions) -> Vec<Result<RegimeVerdict>> {
    ms.par_iter().map(|&m| classify_nl(nl, m, opts)).collect()
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub r: f64,
    pub m: f64,
}

/// Classifies every `(r, m)` cell; failures become `UNRESOLVED` rows and never abort the sweep.
pub fn sweep(n: usize, cells: &[SweepCell], opts: &RegimeOptions) -> Vec<RegimeVerdict> {
    cells
        .par_iter()
        .map(|c| match classify(c.r, n, c.m, opts) {
            Ok(v) => v,
            Err(e) => RegimeVerdict {
                r: c.r,
                n,
                m: c.m,
                verdict: Verdict::Unresolved,
                energy: None,
                mu: None,
                evidence: format!("error: {e}"),
                routes_agreement: None,
                minimizer: None,
                fiber: None,
                field: None,
            },
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    r: f64,
    #[serde(rename = "N")]
    n: usize,
    m: f64,
    verdict: &'a str,
    energy: Option<f64>,
    mu: Option<f64>,
    evidence: &'a str,
}

pub fn write_verdicts_csv(path: &Path, rows: &[RegimeVerdict]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    for v in rows {
        w.serialize(CsvRow {
            r: v.r,
            n: v.n,
            m: v.m,
            verdict: v.verdict.as_str(),
            energy: v.energy,
            mu: v.mu,
            evidence: &v.evidence,
        })
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
