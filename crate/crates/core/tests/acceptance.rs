//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use common::{derivative, ode_reference, random_direction, random_state, small_grid};
use quasinorm::config::parse_config;
use quasinorm::error::Error;
use quasinorm::functionals::{augmented_f, d_lambda_j, dual_j, grad_v_j, j_lambda, pohozaev_p};
use quasinorm::grid::{RadialGrid, DEFAULT_BETA_MAX};
use quasinorm::minimax::{a_k_upper, b1_upper, polyhedron_samples, OddPathFamily};
use quasinorm::nonlinearity::Nonlinearity;
use quasinorm::regime::{bracket_threshold, classify, sweep, write_verdicts_csv, RegimeOptions, ThresholdInterval, Verdict};
use quasinorm::shooting::{ground_state, ground_state_level, GroundStateOptions};
use quasinorm::transform::{check_f_properties, f_of, log_samples};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

const F_SUITE_TIME: Duration = Duration::from_secs(5);
const F_ORACLE_TOL: f64 = 1e-8;
const GRAD_TOL: f64 = 1e-6;
const D_LAMBDA_TOL: f64 = 1e-8;
const POHOZAEV_IDENTITY_TOL: f64 = 1e-5;
const DILATION_TOL: f64 = 1e-4;
const GS_POHOZAEV_TOL: f64 = 1e-3;
const GS_SURROGATE_TOL: f64 = 1e-6;
const REGIME_TIME: Duration = Duration::from_secs(180);
const SMALL_LAMBDA_RATIO: f64 = 1e-2;
const FLOOR_REFINEMENT_TOL: f64 = 2e-2;
const ROUTE_TOL: f64 = 1e-2;
const THRESHOLD_WINDOW: (f64, f64) = (5.0, 200.0);
const THRESHOLD_TIME: Duration = Duration::from_secs(1800);

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn power(r: f64) -> Nonlinearity {
    Nonlinearity::power(r, 3).unwrap()
}

fn c1_f_properties() -> Outcome {
    let nl = power(3.0);
    let t = Instant::now();
    let report = check_f_properties(&log_samples(1e-8, 1e8, 1601), &nl);
    let el = t.elapsed();
    ensure(report.checks.len() == 16, || format!("{} checks", report.checks.len()))?;
    ensure(report.all_pass(), || format!("not all pass:\n{}", report.to_table()))?;
    ensure(el < F_SUITE_TIME, || format!("took {el:?}"))?;
    Ok(format!("16/16 pass on [1e-8, 1e8] in {el:.2?}"))
}

fn c2_f_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (t, f_ref) in ode_reference(18, 20_000, 2_000).into_iter().filter(|(t, _)| (0.99e-6..=1.01e6).contains(t)) {
        worst = worst.max((f_of(t) - f_ref).abs() / f_ref);
        count += 1;
    }
    ensure(count >= 120, || format!("only {count} oracle points"))?;
    ensure(worst < F_ORACLE_TOL, || format!("max relative error {worst:.2e}"))?;
    Ok(format!("max relative error {worst:.2e} over {count} points"))
}

fn c3_gradients() -> Outcome {
    let grid = small_grid();
    let nl = power(3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_v = 0.0f64;
    let mut worst_l = 0.0f64;
    for _ in 0..5 {
        let v = random_state(&grid, &mut rng);
        let lambda = rng.gen_range(-2.0..1.0);
        let g = grad_v_j(&grid, lambda, &v, &nl);
        for _ in 0..10 {
            let w = random_direction(&grid, &mut rng);
            let analytic: f64 = g.iter().zip(&w).zip(&grid.weights).map(|((a, b), q)| a * b * q).sum();
            let fd = derivative(
                |s| {
                    let p: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + s * b).collect();
                    j_lambda(&grid, lambda, &p, &nl)
                },
                1e-5,
            );
            worst_v = worst_v.max((fd - analytic).abs() / analytic.abs().max(1.0));
        }
        let m = rng.gen_range(0.0..5.0);
        let analytic = d_lambda_j(&grid, lambda, &v, m);
        let fd = derivative(|h| dual_j(&grid, lambda + h, &v, m, &nl).unwrap().total, 1e-3);
        worst_l = worst_l.max((fd - analytic).abs() / analytic.abs().max(1.0));
    }
    ensure(worst_v < GRAD_TOL, || format!("<d_v J, w> error {worst_v:.2e}"))?;
    ensure(worst_l < D_LAMBDA_TOL, || format!("d_lambda J error {worst_l:.2e}"))?;
    Ok(format!("<d_v J, w> error {worst_v:.2e} (50 pairs), d_lambda J error {worst_l:.2e}"))
}

fn c4_identities() -> Outcome {
    let grid = RadialGrid::default_for(3);
    let nl = power(10.0 / 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_p = 0.0f64;
    for _ in 0..5 {
        let v = random_state(&grid, &mut rng);
        let lambda = rng.gen_range(-2.0..1.0);
        let p = pohozaev_p(&grid, lambda, &v, &nl);
        let fd = derivative(|t| augmented_f(&grid, t, lambda, &v, 1.0, &nl).unwrap(), 1e-3);
        worst_p = worst_p.max((fd - p).abs() / p.abs().max(1.0));
    }
    let gs = ground_state(0.0, &power(3.0), &GroundStateOptions::default()).map_err(|e| e.to_string())?;
    let field = &gs.point.field;
    let (g, v) = (&field.grid, &field.values);
    let mut worst_d = 0.0f64;
    for theta in [0.0, 0.3, -0.3] {
        let base = augmented_f(g, theta, 0.0, v, 1.0, &power(3.0)).unwrap();
        for beta in [-0.5, -0.2, 0.2, 0.5] {
            let w = g.dilate(v, -beta, DEFAULT_BETA_MAX).unwrap();
            let moved = augmented_f(g, theta + beta, 0.0, &w, 1.0, &power(3.0)).unwrap();
            worst_d = worst_d.max((moved - base).abs() / base.abs());
        }
    }
    ensure(worst_p < POHOZAEV_IDENTITY_TOL, || format!("d_theta F(0) - P error {worst_p:.2e}"))?;
    ensure(worst_d < DILATION_TOL, || format!("dilation error {worst_d:.2e}"))?;
    Ok(format!("d_theta F(0) = P to {worst_p:.2e}, dilation identity to {worst_d:.2e}"))
}

fn c5_ground_states() -> Outcome {
    let lambdas = [-8.0, -4.0, -2.0, 0.0, 2.0, 4.0];
    let mut checked = 0;
    let (mut poh, mut sur) = (0.0f64, 0.0f64);
    for r in [3.0, 10.0 / 3.0, 4.0, 5.0] {
        for &l in &lambdas {
            let gs = ground_state(l, &power(r), &GroundStateOptions::default()).map_err(|e| format!("r = {r}, lambda = {l}: {e}"))?;
            if !gs.point.field.is_decayed() {
                continue;
            }
            checked += 1;
            poh = poh.max(gs.point.pohozaev_residual);
            sur = sur.max(gs.point.psp.grad_v_norm);
            ensure(gs.a1 > 0.0, || format!("a1 = {} at r = {r}, lambda = {l}", gs.a1))?;
        }
    }
    ensure(checked >= 20, || format!("only {checked} decaying ground states"))?;
    ensure(poh < GS_POHOZAEV_TOL, || format!("Pohozaev residual {poh:.2e}"))?;
    ensure(sur < GS_SURROGATE_TOL, || format!("surrogate residual {sur:.2e}"))?;
    Ok(format!("{checked} decaying ground states: Pohozaev <= {poh:.2e}, surrogate <= {sur:.2e}, a1 > 0"))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn check_bracket(label: &str, r: f64, lo: f64, hi: f64, top: Verdict) -> Result<String, String> {
    let (b, el) = timed(|| bracket_threshold(&power(r), lo, hi, &RegimeOptions::default()));
    let b = b.map_err(|e| format!("({label}) {e}"))?;
    ensure(b.lo_verdict == Verdict::Zero && b.hi_verdict == top, || format!("({label}) verdicts {} / {}", b.lo_verdict, b.hi_verdict))?;
    ensure(el < REGIME_TIME, || format!("({label}) took {el:.0?}"))?;
    Ok(format!("({label}) ZERO at {:.2}, {top} at {:.2} [{el:.0?}]", b.lo, b.hi))
}

fn c6_regimes() -> Outcome {
    let opts = RegimeOptions::default();
    let mut parts = Vec::new();

    let (v, el) = timed(|| classify(3.0, 3, 1.0, &opts));
    let v = v.map_err(|e| format!("(a) {e}"))?;
    let mu = v.mu.unwrap_or(f64::NAN);
    ensure(v.verdict == Verdict::NegAttained && mu > 0.0 && el < REGIME_TIME, || format!("(a) {} mu {mu} in {el:?}", v.verdict))?;
    parts.push(format!("(a) NEG_ATTAINED mu = {mu:.3e} [{el:.1?}]"));

    parts.push(check_bracket("b", 5.0, 100.0, 300.0, Verdict::NegAttained)?);

    for m in [0.1, 1.0, 10.0] {
        let (v, el) = timed(|| classify(6.0, 3, m, &opts));
        let v = v.map_err(|e| format!("(c) {e}"))?;
        ensure(v.verdict == Verdict::MinusInf && el < REGIME_TIME, || format!("(c) m = {m}: {}", v.verdict))?;
    }
    parts.push("(c) MINUS_INF at m = 0.1, 1, 10".into());

    parts.push(check_bracket("d", 16.0 / 3.0, 1.0, 1000.0, Verdict::MinusInf)?);
    parts.push(check_bracket("e", 10.0 / 3.0, 10.0, 500.0, Verdict::NegAttained)?);
    Ok(parts.join("; "))
}

fn ratio(r: f64, lambda: f64) -> Result<f64, String> {
    let (a1, _) = ground_state_level(lambda, &power(r), &GroundStateOptions::default())
        .map_err(|e| format!("r = {r}, lambda = {lambda}: {e}"))?;
    Ok(a1 / lambda.exp())
}

fn grid_min(r: f64, lo: f64, hi: f64, step: f64) -> Result<f64, String> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| ratio(r, lo + i as f64 * step)).try_fold(f64::INFINITY, |a, b| b.map(|b| a.min(b)))
}

fn c7_mass_levels() -> Outcome {
    let (low, zero) = (ratio(3.0, -10.0)?, ratio(3.0, 0.0)?);
    ensure(low < SMALL_LAMBDA_RATIO * zero, || format!("r = 3: ratio {low:.3e} at -10 vs {zero:.3e} at 0"))?;
    let mins: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&h| grid_min(4.0, -10.0, 2.0, h)).collect::<Result<_, _>>()?;
    let fine = mins[2];
    let spread = mins.iter().map(|m| (m - fine).abs() / fine).fold(0.0, f64::max);
    ensure(fine > 0.0 && spread < FLOOR_REFINEMENT_TOL, || format!("r = 4 minima {mins:?}"))?;
    Ok(format!(
        "r = 3: a1/e^lambda = {low:.3e} at -10, {zero:.3e} at 0; r = 4 floor {fine:.3} (steps 1, 0.5, 0.25 agree to {spread:.1e})"
    ))
}

fn c8_monotone() -> Outcome {
    let vals: Vec<f64> = (0..=24).map(|i| ratio(3.0, 2.0 + 0.25 * i as f64)).collect::<Result<_, _>>()?;
    if let Some(i) = vals.windows(2).position(|w| w[1] <= w[0]) {
        return Err(format!("not increasing at lambda = {}", 2.0 + 0.25 * i as f64));
    }
    Ok(format!("a1/e^lambda increases from {:.3e} to {:.3e} over 25 points", vals[0], vals[24]))
}

fn c9_cross_route() -> Outcome {
    let v = classify(3.0, 3, 1.0, &RegimeOptions::default()).map_err(|e| e.to_string())?;
    let (e, mu) = (v.energy.ok_or("no energy")?, v.mu.ok_or("no mu")?);
    let lambdas: Vec<f64> = (0..=32).map(|i| -14.0 + 0.25 * i as f64).collect();
    let b = b1_upper(1.0, &power(3.0), &lambdas).map_err(|e| e.to_string())?;
    let de = (e - b.b1).abs() / e.abs();
    let dmu = (mu - b.lambda_star.exp()).abs() / mu;
    ensure(de < ROUTE_TOL && dmu < ROUTE_TOL, || format!("e = {e:.6e}, b1 = {:.6e}, mu = {mu:.6e}, e^lambda* = {:.6e}", b.b1, b.lambda_star.exp()))?;
    Ok(format!("e(m) = {e:.5e}, b1 = {:.5e} ({de:.1e}); mu = {mu:.5e}, e^lambda* = {:.5e} ({dmu:.1e})", b.b1, b.lambda_star.exp()))
}

fn odd_family_checks(fam: &OddPathFamily, a_up: f64, a1: f64) -> Result<(), String> {
    let k = fam.k;
    let samples = polyhedron_samples(k);
    let radii: Vec<f64> = (0..=4000).map(|j| fam.support_radius() * 1.05 * j as f64 / 4000.0).collect();
    for t in &samples {
        for s in [0.3, 1.0] {
            let xi: Vec<f64> = t.iter().map(|x| s * x).collect();
            let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
            for &rho in radii.iter().step_by(7) {
                ensure(fam.value(&neg, rho) == -fam.value(&xi, rho), || format!("k = {k}: not odd at rho = {rho}"))?;
            }
        }
        let h = fam.h_integral_undilated(t);
        ensure(h >= fam.c0 && fam.c0 > 0.0, || format!("k = {k}: int H = {h} below C0 = {}", fam.c0))?;
        ensure(fam.energy(t) < 0.0, || format!("k = {k}: boundary J = {} at {t:?}", fam.energy(t)))?;
    }
    let ones = vec![1.0; k];
    for &rho in &radii {
        let live = (0..k).filter(|&i| fam.ring_value(i, &ones, rho) != 0.0).count();
        ensure(live <= 1, || format!("k = {k}: {live} rings overlap at rho = {rho}"))?;
    }
    ensure(fam.boundary_max < 0.0 && fam.l >= 1.0 && fam.l.log2().fract() == 0.0, || format!("k = {k}: L = {}", fam.l))?;
    ensure(a_up >= a1, || format!("k = {k}: a_k upper {a_up} below a1 {a1}"))
}

fn c10_odd_family() -> Outcome {
    let nl = power(3.0);
    let lambda = 0.0;
    let a1 = ground_state(lambda, &nl, &GroundStateOptions::default()).map_err(|e| e.to_string())?.a1;
    let mut parts = Vec::new();
    for k in 1..=3 {
        let (a_up, fam) = a_k_upper(k, lambda, &nl).map_err(|e| e.to_string())?;
        odd_family_checks(&fam, a_up, a1)?;
        parts.push(format!("k = {k}: L = {}, C0 = {:.3e}, a_k upper = {a_up:.4e}", fam.l, fam.c0));
    }
    Ok(format!("{}; a1 = {a1:.4e}", parts.join("; ")))
}

fn c11_threshold() -> Outcome {
    let nl = power(13.0 / 3.0);
    let opts = RegimeOptions { rel_width: 0.01, ..Default::default() };
    let t = Instant::now();
    let (lo, hi) = THRESHOLD_WINDOW;
    let found: Result<ThresholdInterval, Error> = bracket_threshold(&nl, lo, hi, &opts);
    let found = match found {
        Ok(b) => Ok(b),
        Err(Error::BadBracket(why)) => {
            // Locate the transition above the window so the report still gives an interval.
            let mut a = hi;
            loop {
                let b = 2.0 * a;
                if b > 3200.0 {
                    break Err(format!("ZERO on all of [{lo}, {b}]: {why}"));
                }
                if classify(13.0 / 3.0, 3, b, &opts).map_err(|e| e.to_string())?.verdict != Verdict::Zero {
                    break bracket_threshold(&nl, a, b, &opts).map_err(|e| e.to_string());
                }
                a = b;
            }
            .map(|b| ThresholdInterval { probes: Vec::new(), ..b })
        }
        Err(e) => return Err(e.to_string()),
    }
    .map_err(|e| format!("{e}"));
    let el = t.elapsed();
    let b = found?;
    let interval = format!("transition in ({:.2}, {:.2}] ({}) after {el:.0?}", b.lo, b.hi, b.hi_verdict);
    ensure(b.lo >= lo && b.hi <= hi && el < THRESHOLD_TIME, || format!("{interval}, outside [{lo}, {hi}]"))?;
    Ok(interval)
}

fn c12_reproducible() -> Outcome {
    let cfg = parse_config(
        r#"{"N":3,"nonlinearity":{"kind":"power","r":3},"seed":17,
            "sweep":{"r":[2.5,3.5,4.5,6],"m":{"min":0.1,"max":100,"count":4,"spacing":"log"}}}"#,
    )
    .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let rows = sweep(cfg.n, &cfg.sweep_cells().map_err(|e| e.to_string())?, &cfg.regime_options());
        let p = dir.path().join(name);
        write_verdicts_csv(&p, &rows).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(&p).map_err(|e| e.to_string())?);
    }
    ensure(bytes[0] == bytes[1], || "CSV bytes differ".into())?;
    Ok(format!("two 4x4 sweeps wrote identical CSVs ({} bytes)", bytes[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("f property suite", c1_f_properties),
        ("f against ODE oracle", c2_f_oracle),
        ("gradient checks", c3_gradients),
        ("Pohozaev and dilation identities", c4_identities),
        ("ground-state residuals", c5_ground_states),
        ("regimes", c6_regimes),
        ("a1 / e^lambda limits", c7_mass_levels),
        ("a1 / e^lambda increasing for r = 3", c8_monotone),
        ("descent against lambda-scan", c9_cross_route),
        ("odd path family", c10_odd_family),
        ("r = 13/3 threshold window", c11_threshold),
        ("reproducible sweep", c12_reproducible),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let out = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let el = t.elapsed();
        match out {
            Ok(msg) => println!("criterion {id:>2} PASS  {name}: {msg} [{el:.1?}]"),
            Err(msg) => {
                println!("criterion {id:>2} FAIL  {name}: {msg} [{el:.1?}]");
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
