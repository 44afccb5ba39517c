use clap::{Args, Parser, Subcommand};
use quasinorm::config::load_config;
use quasinorm::critical::CriticalPointRecord;
use quasinorm::error::Error;
use quasinorm::grid::{write_profile_csv, RadialField, DEFAULT_GRADING, DEFAULT_NODES, DEFAULT_RMAX};
use quasinorm::minimax::{a_k_upper, b1_upper, OddPathFamily};
use quasinorm::nonlinearity::Nonlinearity;
use quasinorm::output::{default_run_path, RunDir};
use quasinorm::regime::{classify_nl, sweep, write_verdicts_csv, RegimeOptions, Verdict};
use quasinorm::shooting::{ground_state, GroundStateOptions};
use quasinorm::transform::{check_f_properties, f_of, log_samples};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Serialize)]
#[command(name = "quasinorm", version, about = "Normalized solutions of -Δu + μu - Δ(u²)u = g(u) on R^N")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Serialize)]
struct Global {
    /// Output directory [default: ./runs/<timestamp>]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, recorded in the manifest
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of radial nodes
    #[arg(long, global = true)]
    grid_size: Option<usize>,
    /// Outer radius of the radial grid
    #[arg(long, global = true)]
    rmax: Option<f64>,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Cmd {
    /// Check the sixteen properties of the transform f on a log grid
    CheckF {
        #[arg(long, default_value_t = 1e-8)]
        t_min: f64,
        #[arg(long, default_value_t = 1e8)]
        t_max: f64,
        #[arg(long, default_value_t = 1601)]
        samples: usize,
        #[arg(long, default_value_t = 3.0)]
        r: f64,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
    },
    /// Least-energy solution of the dual equation at fixed lambda
    GroundState {
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long)]
        r: f64,
        #[arg(long = "N")]
        n: usize,
    },
    /// Minimize the energy at fixed mass
    Solve {
        #[arg(long)]
        r: f64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Upper bound for the least normalized level from a lambda-scan
    B1 {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        r: f64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        lambda_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda_max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Odd path family and the upper bound for a_k(lambda)
    Minimax {
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long)]
        r: f64,
        #[arg(long = "N")]
        n: usize,
    },
    /// Classify e(m) at one (r, N, m)
    Regime {
        #[arg(long)]
        r: f64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        m: f64,
        /// Also run the lambda-scan and compare the two levels
        #[arg(long)]
        cross_check: bool,
    },
    /// Classify every cell of a configured (r, m) grid
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Exit status 2: the computation finished without a resolved answer.
struct Unresolved(String);

enum Failure {
    Usage(String),
    Unresolved(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConverged(_) | Error::NegativeNotFound(_) | Error::NoBracket { .. } | Error::BadBracket(_) => {
                Failure::Unresolved(e.to_string())
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<Unresolved> for Failure {
    fn from(u: Unresolved) -> Self {
        Failure::Unresolved(u.0)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Unresolved(msg)) => {
            eprintln!("unresolved: {msg}");
            ExitCode::from(2)
        }
    }
}

fn nodes(g: &Global) -> usize {
    g.grid_size.unwrap_or(DEFAULT_NODES)
}

fn regime_options(g: &Global) -> RegimeOptions {
    RegimeOptions { nodes: nodes(g), r_max: g.rmax.unwrap_or(DEFAULT_RMAX), grading: DEFAULT_GRADING, ..Default::default() }
}

fn open_run(cli: &Cli, name: &str, config: serde_json::Value) -> Result<RunDir, Failure> {
    let path = cli.global.out.clone().unwrap_or_else(default_run_path);
    RunDir::create(&path, name, config, cli.global.seed).map_err(|e| Failure::Usage(e.to_string()))
}

fn say(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn print_json<T: Serialize>(v: &T) {
    say(&serde_json::to_string_pretty(v).expect("json serializes"));
}

fn write_field(run: &mut RunDir, name: &str, field: &RadialField) -> Result<(), Failure> {
    let u: Vec<f64> = field.values.iter().map(|&t| f_of(t)).collect();
    let p = run.file(name);
    let mut w = csv::Writer::from_path(&p).map_err(|e| Failure::Usage(e.to_string()))?;
    w.write_record(["rho", "v", "u"]).map_err(|e| Failure::Usage(e.to_string()))?;
    for ((r, v), u) in field.grid.nodes.iter().zip(&field.values).zip(&u) {
        w.write_record([format!("{r:e}"), format!("{v:e}"), format!("{u:e}")]).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(())
}

#[derive(Serialize)]
struct SolveRecord {
    mu: Option<f64>,
    lambda: Option<f64>,
    mass: f64,
    energy: Option<f64>,
    pohozaev_residual: Option<f64>,
    psp_residual: Option<[f64; 3]>,
    verdict: &'static str,
    evidence: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimizer: Option<CriticalPointRecord>,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let echo = serde_json::to_value(cli).expect("cli serializes");
    let g = &cli.global;
    match &cli.cmd {
        Cmd::CheckF { t_min, t_max, samples, r, n } => {
            if !(t_min > &0.0 && t_max > t_min) || *samples < 2 {
                return Err(Failure::Usage("need 0 < t-min < t-max and at least 2 samples".into()));
            }
            let nl = Nonlinearity::power(*r, *n)?;
            let report = check_f_properties(&log_samples(*t_min, *t_max, *samples), &nl);
            let mut run = open_run(cli, "check-f", echo)?;
            run.write_json("check_f.json", &report)?;
            run.finish()?;
            say(report.to_table().trim_end());
            if !report.all_pass() {
                return Err(Unresolved("transform property check failed".into()).into());
            }
        }
        Cmd::GroundState { lambda, r, n } => {
            let nl = Nonlinearity::power(*r, *n)?;
            let gs = ground_state(*lambda, &nl, &GroundStateOptions { nodes: nodes(g), ..Default::default() })?;
            #[derive(Serialize)]
            struct Out {
                a: f64,
                a1: f64,
                a1_grid: f64,
                mass_ode: f64,
                rho_match: f64,
                bisection_steps: usize,
                point: CriticalPointRecord,
            }
            let out = Out {
                a: gs.a,
                a1: gs.a1,
                a1_grid: gs.a1_grid,
                mass_ode: gs.mass_ode,
                rho_match: gs.rho_match,
                bisection_steps: gs.bisection_steps,
                point: gs.point.record(),
            };
            let mut run = open_run(cli, "ground-state", echo)?;
            run.write_json("ground_state.json", &out)?;
            write_field(&mut run, "profile.csv", &gs.point.field)?;
            run.finish()?;
            print_json(&out);
        }
        Cmd::Solve { r, n, m, max_iter, tol } => {
            let nl = Nonlinearity::power(*r, *n)?;
            let mut opts = regime_options(g);
            opts.descent.max_iter = *max_iter;
            opts.descent.tol = *tol;
            let v = classify_nl(&nl, *m, &opts)?;
            let verdict = match v.verdict {
                Verdict::Unresolved => "NONCONVERGED",
                other => other.as_str(),
            };
            let rec = SolveRecord {
                mu: v.mu,
                lambda: v.minimizer.as_ref().map(|p| p.lambda),
                mass: v.minimizer.as_ref().map_or(*m, |p| p.mass),
                energy: v.energy,
                pohozaev_residual: v.minimizer.as_ref().map(|p| p.pohozaev_residual),
                psp_residual: v.minimizer.as_ref().map(|p| p.psp_residual),
                verdict,
                evidence: v.evidence.clone(),
                minimizer: v.minimizer.clone(),
            };
            let mut run = open_run(cli, "solve", echo)?;
            run.write_json("solve.json", &rec)?;
            if let Some(f) = &v.field {
                write_field(&mut run, "profile.csv", f)?;
            }
            run.finish()?;
            print_json(&rec);
            if v.verdict == Verdict::Unresolved {
                return Err(Unresolved(v.evidence).into());
            }
        }
        Cmd::B1 { m, r, n, lambda_min, lambda_max, points } => {
            if !(lambda_max > lambda_min) || *points < 3 {
                return Err(Failure::Usage("need lambda-min < lambda-max and at least 3 points".into()));
            }
            let nl = Nonlinearity::power(*r, *n)?;
            let grid: Vec<f64> =
                (0..*points).map(|i| lambda_min + (lambda_max - lambda_min) * i as f64 / (*points - 1) as f64).collect();
            let b = b1_upper(*m, &nl, &grid)?;
            #[derive(Serialize)]
            struct Out {
                b1: f64,
                lambda_star: f64,
                mu_star: f64,
                a1_star: f64,
                mass_residual: f64,
                stationary: bool,
                point: CriticalPointRecord,
            }
            let out = Out {
                b1: b.b1,
                lambda_star: b.lambda_star,
                mu_star: b.lambda_star.exp(),
                a1_star: b.a1_star,
                mass_residual: b.mass_residual,
                stationary: b.mass_residual < 1e-3,
                point: b.point.record(),
            };
            let mut run = open_run(cli, "b1", echo)?;
            run.write_json("b1.json", &out)?;
            let (ls, phis): (Vec<f64>, Vec<f64>) = b.scan.iter().cloned().unzip();
            write_profile_csv(&run.file("phi_scan.csv"), &ls, &phis)?;
            write_field(&mut run, "profile.csv", &b.point.field)?;
            run.finish()?;
            print_json(&out);
            if !out.stationary {
                return Err(Unresolved(format!("mass residual {:.3e} at lambda* exceeds 1e-3", b.mass_residual)).into());
            }
        }
        Cmd::Minimax { k, lambda, r, n } => {
            let nl = Nonlinearity::power(*r, *n)?;
            let (a, fam) = a_k_upper(*k, *lambda, &nl)?;
            let a1 = if *k == 1 { ground_state(*lambda, &nl, &GroundStateOptions::default()).ok().map(|gs| gs.a1) } else { None };
            #[derive(Serialize)]
            struct Out<'a> {
                k: usize,
                lambda: f64,
                a_k_upper: f64,
                a1_shooting: Option<f64>,
                boundary_negative: bool,
                family: &'a OddPathFamily,
            }
            let out = Out { k: *k, lambda: *lambda, a_k_upper: a, a1_shooting: a1, boundary_negative: fam.boundary_max < 0.0, family: &fam };
            let mut run = open_run(cli, "minimax", echo)?;
            run.write_json("minimax.json", &out)?;
            run.finish()?;
            print_json(&out);
        }
        Cmd::Regime { r, n, m, cross_check } => {
            let nl = Nonlinearity::power(*r, *n)?;
            let mut opts = regime_options(g);
            opts.cross_check = *cross_check;
            let v = classify_nl(&nl, *m, &opts)?;
            let mut run = open_run(cli, "regime", echo)?;
            run.write_json("regime.json", &v)?;
            if let Some(f) = &v.field {
                write_field(&mut run, "profile.csv", f)?;
            }
            run.finish()?;
            print_json(&v);
            if !v.verdict.is_resolved() {
                return Err(Unresolved(v.evidence).into());
            }
        }
        Cmd::Sweep { config } => {
            let cfg = load_config(config)?;
            let cells = cfg.sweep_cells()?;
            let mut opts = cfg.regime_options();
            if let Some(k) = g.grid_size {
                opts.nodes = k;
            }
            if let Some(r) = g.rmax {
                opts.r_max = r;
            }
            let rows = sweep(cfg.n, &cells, &opts);
            let mut run = open_run(cli, "sweep", serde_json::json!({ "cli": echo, "config": cfg.echo() }))?;
            write_verdicts_csv(&run.file("verdicts.csv"), &rows)?;
            let dir = run.path().display().to_string();
            run.finish()?;
            let resolved = rows.iter().filter(|v| v.verdict.is_resolved()).count();
            say(&format!("{resolved}/{} cells resolved; results in {dir}", rows.len()));
            if resolved < rows.len() {
                return Err(Unresolved(format!("{} unresolved cells", rows.len() - resolved)).into());
            }
        }
    }
    Ok(())
}
