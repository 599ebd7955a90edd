//! Command dispatch for the `eqmanifold` binary.
//!
//! Exit codes: 0 success, 1 evaluation failure, 2 theorem-direction
//! violation flagged, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use eqmanifold_core::diffgeo::{christoffel_from_metric, DerivativeEngine, DEFAULT_FD_STEP};
use eqmanifold_core::economy::{count_equilibria, count_equilibria_at, sample_b_curve, solve_price_income, Economy};
use eqmanifold_core::expr::CurveExpression;
use eqmanifold_core::fgp::{check_fgp, corollary_dashboard, uniform_grid, DashboardConfig, FgpConfig, Subject};
use eqmanifold_core::geodesic::{
    arc_length_reparametrize, geodesic_bvp, geodesic_ivp, geodesic_residual, BvpOptions, FnCurve, Geometry,
    ParamCurve, DEFAULT_STEP,
};
use eqmanifold_core::io::{fmt_num, load_subject};
use eqmanifold_core::manifolds::CoordinateCurve;
use eqmanifold_core::scalar::HyperDual;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "eqmanifold", version, about = "Geometry of two-consumer equilibrium manifolds")]
struct Cli {
    /// Seed for every sampled quantity.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the geodesic and price-constancy tolerances.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form and metric-derived Christoffel symbols side by side.
    Christoffel {
        manifold: PathBuf,
        /// Point `t,a1,...`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
        /// Central-difference step for the metric-derived symbols.
        #[arg(long, default_value_t = DEFAULT_FD_STEP)]
        step: f64,
    },
    #[command(subcommand)]
    Geodesic(GeodesicCommand),
    #[command(subcommand)]
    Fgp(FgpCommand),
    /// Corollary dashboard as JSON.
    Corollary {
        file: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        fibers: usize,
    },
    #[command(subcommand)]
    Economy(EconomyCommand),
}

#[derive(Subcommand, Debug)]
enum GeodesicCommand {
    /// Integrate the geodesic equation; trajectory CSV.
    Shoot {
        manifold: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        velocity: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Geodesic residual along a curve; residual CSV.
    Residual {
        manifold: PathBuf,
        /// One expression in `t` per parameter coordinate.
        #[arg(long, num_args = 1.., conflicts_with = "coordinate")]
        curve: Vec<String>,
        /// Coordinate t-curve through base point 0 (origin) or e_j.
        #[arg(long)]
        coordinate: Option<usize>,
        /// Parameter range `a,b`; defaults to the manifold's t-range.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        range: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        /// Reparametrize by arc length first.
        #[arg(long)]
        arc_length: bool,
    },
    /// Two-point boundary problem by shooting; trajectory CSV.
    Connect {
        manifold: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        to: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        guess: Vec<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum FgpCommand {
    /// Finite-geodesic-property report as JSON.
    Check { file: PathBuf },
}

#[derive(Subcommand, Debug)]
enum EconomyCommand {
    /// Equilibrium prices at consumer 1's income share.
    Solve {
        economy: PathBuf,
        #[arg(long)]
        t: f64,
    },
    /// Price-income curve on a grid; CSV.
    Curve {
        economy: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.95])]
        range: Vec<f64>,
        #[arg(long, default_value_t = 19)]
        samples: usize,
    },
    /// Count equilibria on an endowment fiber (two goods).
    Count {
        economy: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
        #[arg(long, value_delimiter = ',')]
        omega1: Vec<f64>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn subject(path: &Path) -> Result<Subject> {
    load_subject(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn economy(path: &Path) -> Result<Economy> {
    Economy::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn fgp_config(cli: &Cli) -> FgpConfig {
    let mut cfg = FgpConfig::default();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.geodesic_tol = tol;
        cfg.constancy_tol = tol;
    }
    cfg
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Christoffel { manifold, at, step } => christoffel(cli, manifold, at, *step),
        Command::Geodesic(cmd) => geodesic(cli, cmd),
        Command::Fgp(FgpCommand::Check { file }) => {
            let report = check_fgp(&subject(file)?, &fgp_config(cli))?;
            emit(cli, &json(&report)?)?;
            Ok(if report.theorem_violation { EXIT_VIOLATION } else { EXIT_OK })
        }
        Command::Corollary { file, samples, fibers } => {
            let cfg = DashboardConfig {
                fgp: fgp_config(cli),
                curvature_samples: *samples,
                fibers: *fibers,
                ..DashboardConfig::default()
            };
            let dash = corollary_dashboard(&subject(file)?, &cfg)?;
            emit(cli, &json(&dash)?)?;
            Ok(dash.exit_code())
        }
        Command::Economy(cmd) => economy_cmd(cli, cmd),
    }
}

fn christoffel(cli: &Cli, path: &Path, at: &[f64], step: f64) -> Result<i32> {
    let s = subject(path)?;
    let f = s.immersion();
    let numeric = christoffel_from_metric(f.as_ref(), at, DerivativeEngine::CentralDifference { step })?;
    let closed = match &s {
        Subject::Equilibrium { manifold, .. } => Some(manifold.closed_form_christoffel(at)?),
        _ => None,
    };
    let m = f.dim_param();
    let mut out = format!("# {}\n# point", f.name());
    for v in at {
        out.push(' ');
        out.push_str(&fmt_num(*v));
    }
    out.push_str("\nk,i,j,closed_form,numeric,difference\n");
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let n = numeric.get(k, i, j);
                match &closed {
                    Some(c) => {
                        let v = c.get(k, i, j);
                        out.push_str(&format!("{k},{i},{j},{},{},{}\n", fmt_num(v), fmt_num(n), fmt_num(v - n)));
                    }
                    None => out.push_str(&format!("{k},{i},{j},n/a,{},n/a\n", fmt_num(n))),
                }
            }
        }
    }
    if let Some(c) = &closed {
        out.push_str(&format!("# max relative discrepancy {}\n", fmt_num(c.relative_discrepancy(&numeric))));
    }
    emit(cli, &out)?;
    Ok(EXIT_OK)
}

fn geodesic(cli: &Cli, cmd: &GeodesicCommand) -> Result<i32> {
    match cmd {
        GeodesicCommand::Shoot {
            manifold,
            from,
            velocity,
            horizon,
            step,
        } => {
            let geom = Geometry::new(subject(manifold)?.immersion());
            let traj = geodesic_ivp(&geom, from, velocity, *horizon, *step)?;
            if traj.exited_domain {
                eprintln!("warning: trajectory left the domain at time {}", traj.last().time);
            }
            emit(cli, &traj.to_csv(&geom)?)?;
            Ok(EXIT_OK)
        }
        GeodesicCommand::Residual {
            manifold,
            curve,
            coordinate,
            range,
            samples,
            arc_length,
        } => {
            let s = subject(manifold)?;
            // Exact metric derivatives, so curves may run up to the chart edge.
            let geom = Geometry::new(s.immersion()).with_engine(DerivativeEngine::Dual);
            let m = geom.dim();
            let path: Arc<dyn ParamCurve> = if let Some(j) = coordinate {
                if *j >= m {
                    bail!("coordinate index must be below {m}");
                }
                let mut base = vec![0.0; m - 1];
                if *j > 0 {
                    base[j - 1] = 1.0;
                }
                Arc::new(CoordinateCurve { base }.line())
            } else {
                if curve.len() != m {
                    bail!("--curve needs {m} expressions (one per coordinate)");
                }
                let exprs = curve
                    .iter()
                    .map(|c| CurveExpression::parse(c))
                    .collect::<eqmanifold_core::Result<Vec<_>>>()?;
                Arc::new(FnCurve::new(m, move |t: HyperDual| {
                    exprs.iter().map(|e| e.tree().eval(t)).collect()
                }))
            };
            let (a, b) = match range.as_slice() {
                [] => s.t_range(),
                [a, b] => (*a, *b),
                _ => bail!("--range takes two numbers"),
            };
            let report = if *arc_length {
                let arc = arc_length_reparametrize(&geom, path, (a, b))?;
                let (s0, s1) = arc.span();
                geodesic_residual(&geom, &arc, &uniform_grid(s0, s1, *samples))?
            } else {
                geodesic_residual(&geom, path.as_ref(), &uniform_grid(a, b, *samples))?
            };
            emit(cli, &report.to_csv())?;
            Ok(EXIT_OK)
        }
        GeodesicCommand::Connect { manifold, from, to, guess } => {
            let geom = Geometry::new(subject(manifold)?.immersion());
            let guess = if guess.is_empty() { None } else { Some(guess.as_slice()) };
            let sol = geodesic_bvp(&geom, from, to, guess, BvpOptions::default())?;
            eprintln!(
                "length {} endpoint error {} iterations {}",
                fmt_num(sol.length),
                fmt_num(sol.endpoint_error),
                sol.iterations
            );
            emit(cli, &sol.trajectory.to_csv(&geom)?)?;
            Ok(EXIT_OK)
        }
    }
}

fn economy_cmd(cli: &Cli, cmd: &EconomyCommand) -> Result<i32> {
    match cmd {
        EconomyCommand::Solve { economy: path, t } => {
            let sol = solve_price_income(&economy(path)?, *t)?;
            emit(cli, &json(&sol)?)?;
        }
        EconomyCommand::Curve {
            economy: path,
            range,
            samples,
        } => {
            let [a, b] = range.as_slice() else {
                bail!("--range takes two numbers");
            };
            let econ = economy(path)?;
            let c = sample_b_curve(&econ, &uniform_grid(*a, *b, *samples))?;
            let k = econ.goods - 1;
            let mut out = String::from("t");
            for prefix in ["p", "dp", "d2p"] {
                for j in 0..k {
                    out.push_str(&format!(",{prefix}_{j}"));
                }
            }
            out.push_str(",w,dw,d2w\n");
            for i in 0..c.t.len() {
                let mut row = vec![c.t[i]];
                row.extend(&c.p[i]);
                row.extend(&c.dp[i]);
                row.extend(&c.d2p[i]);
                row.extend([c.w[i], c.dw[i], c.d2w[i]]);
                let row: Vec<String> = row.into_iter().map(fmt_num).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            if !c.smooth {
                eprintln!("warning: sampled curve failed the smoothness check");
            }
            emit(cli, &out)?;
        }
        EconomyCommand::Count {
            economy: path,
            resolution,
            omega1,
        } => {
            let econ = economy(path)?;
            let set = if omega1.is_empty() {
                count_equilibria(&econ, *resolution)?
            } else {
                count_equilibria_at(&econ, omega1, *resolution)?
            };
            if let Some(w) = &set.scan_warning {
                eprintln!("warning: {w}");
            }
            emit(cli, &json(&set)?)?;
        }
    }
    Ok(EXIT_OK)
}
