//! Command-line front door: config loading, CSV/JSON emission, and the
//! reproducibility manifest.
//!
//! Exit codes: 0 success, 2 validation/config errors, 3 numerical failures.

use crate::nonlinearity::{compute_constants, regime_partition, Nonlinearity};
use crate::solver::{
    energy, run, BumpShape, DatumFamily, InitialDatum, LogHook, RunHook, SnapshotHook, Solver,
    SolverConfig,
};
use crate::steady;
use crate::threshold::{bisect_sigma, sigma_star_curve};
use crate::transition::{
    fit_log_law_with, reduced_ode_with, shift_regime_report, PulseHook,
};
use crate::Error;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Floating-point formatting used in every emitted file: 17 significant
/// digits round-trip f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Parser)]
#[command(name = "halfline", version, about = "Sharp-threshold dynamics for bistable reaction-diffusion on the half-line with a Robin boundary")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for threshold curves (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Reserved for future stochastic features.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,
}

#[derive(Args, Clone)]
struct FArg {
    /// TOML file describing the nonlinearity (kind = "cubic"/"table").
    #[arg(long)]
    f_config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build steady states and the Robin shift sets.
    Steady {
        #[command(flatten)]
        f: FArg,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        /// Half-width of the tabulated ground state.
        #[arg(long, default_value_t = 0.0)]
        z_max: f64,
        /// Output CSV (columns z,v,vprime) for the ground state.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve the PDE from an initial datum, emitting snapshots and a run log.
    Simulate {
        #[command(flatten)]
        f: FArg,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        /// Datum spec: triangle:h=1 | smooth:h=2 | plateau:h=4 |
        /// capped-ground:z0=2,rho=0.5 | bump-offset:m=0.8,xm=1
        #[arg(long, default_value = "triangle:h=1")]
        datum: String,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.02)]
        dx: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 50.0)]
        tmax: f64,
        #[arg(long, default_value_t = 1.0)]
        snap_every: f64,
    },
    /// Bisect the sharp threshold sigma* with certified endpoints.
    Threshold {
        #[command(flatten)]
        f: FArg,
        /// Robin parameter, or a comma-separated list for a sigma*(b) curve.
        #[arg(long, default_value = "0")]
        b: String,
        #[arg(long, default_value = "triangle:h=1")]
        datum: String,
        #[arg(long, default_value_t = 1e-6)]
        tol_rel: f64,
        #[arg(long, default_value_t = 60)]
        max_iter: u32,
        #[arg(long, default_value_t = 0.02)]
        dx: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Classification horizon; defaults to 2000/lambda^2.
        #[arg(long)]
        max_t: Option<f64>,
        /// Result JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Near-threshold experiment end to end: bisect, track the pulse, fit
    /// the drift law, cross-check the reduced ODE.
    Transition {
        #[command(flatten)]
        f: FArg,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        #[arg(long, default_value = "triangle:h=1")]
        datum: String,
        #[arg(long, default_value_t = 42)]
        iterations: u32,
        #[arg(long, default_value_t = 0.02)]
        dx: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        max_t: Option<f64>,
        /// Emit a gnuplot script for xi vs ln t.
        #[arg(long, default_value_t = false)]
        gnuplot: bool,
    },
    /// Integrate the reduced motion law dy/dt = c(b) e^{-2 lambda y}.
    ReducedOde {
        #[command(flatten)]
        f: FArg,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        #[arg(long, default_value_t = 3.0)]
        y0: f64,
        #[arg(long, default_value_t = 1e6)]
        t_end: f64,
        /// Output CSV (columns t,y,y_closed_form).
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the shift regime for a Robin parameter.
    Regime {
        #[command(flatten)]
        f: FArg,
        #[arg(long)]
        b: f64,
    },
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    tool: String,
    version: String,
    command: String,
    wall_seconds: f64,
    outputs: Vec<ManifestEntry>,
}

struct OutputSink {
    dir: PathBuf,
    argv: String,
    started: Instant,
    entries: Vec<ManifestEntry>,
}

impl OutputSink {
    fn new(dir: &Path, argv: String) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputSink { dir: dir.to_path_buf(), argv, started: Instant::now(), entries: Vec::new() })
    }

    fn write(&mut self, rel: &Path, contents: &str) -> std::io::Result<PathBuf> {
        let path = if rel.is_absolute() { rel.to_path_buf() } else { self.dir.join(rel) };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.entries.push(ManifestEntry {
            path: path.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(path)
    }

    fn finish(self) -> std::io::Result<()> {
        let manifest = RunManifest {
            tool: "halfline".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.argv,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.entries,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(self.dir.join("manifest.json"), text)
    }
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

fn parse_datum(spec: &str) -> Result<DatumFamily, Error> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = std::collections::HashMap::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad datum parameter {part:?}")))?;
        let val: f64 = v
            .parse()
            .map_err(|e| Error::Config(format!("datum parameter {k}: {e}")))?;
        kv.insert(k.to_string(), val);
    }
    let get = |k: &str, d: f64| kv.get(k).copied().unwrap_or(d);
    match kind {
        "triangle" => Ok(DatumFamily::ScaledBump { shape: BumpShape::Triangle, h: get("h", 1.0), sigma: get("sigma", 1.0) }),
        "smooth" => Ok(DatumFamily::ScaledBump { shape: BumpShape::Smooth, h: get("h", 1.0), sigma: get("sigma", 1.0) }),
        "plateau" => Ok(DatumFamily::ScaledBump { shape: BumpShape::Plateau, h: get("h", 1.0), sigma: get("sigma", 1.0) }),
        "capped-ground" => Ok(DatumFamily::CappedGround { z0: get("z0", 2.0), rho: get("rho", 0.5) }),
        "bump-offset" => Ok(DatumFamily::BumpOffset { m: get("m", 0.8), x_m: get("xm", 1.0) }),
        other => Err(Error::Config(format!("unknown datum family {other:?}"))),
    }
}

fn profile_csv(p: &steady::SteadyProfile, f: &Nonlinearity, symmetric: bool) -> String {
    let mut s = String::from("z,v,vprime\n");
    if symmetric {
        for i in (1..p.grid.len()).rev() {
            let z = -p.grid[i];
            let _ = writeln!(s, "{},{},{}", fmt_f64(z), fmt_f64(p.eval(z)), fmt_f64(p.deriv(z, f)));
        }
    }
    for i in 0..p.grid.len() {
        let z = p.grid[i];
        let _ = writeln!(s, "{},{},{}", fmt_f64(z), fmt_f64(p.eval(z)), fmt_f64(p.deriv(z, f)));
    }
    s
}

fn err_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::InvalidM(..) | Error::NotBistable(_) | Error::NoThetaFound => 2,
        _ => 3,
    }
}

/// Run the CLI; returns a process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv_str = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match execute(&cli, argv_str) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            err_code(&e)
        }
    }
}

fn execute(cli: &Cli, argv: String) -> Result<(), Error> {
    let mut sink = OutputSink::new(&cli.out_dir, argv)?;
    let say = |msg: &str| {
        if !cli.quiet {
            println!("{msg}");
        }
    };

    match &cli.command {
        Command::Steady { f, b, z_max, out } => {
            let nl = Nonlinearity::from_config_path(&f.f_config)?;
            let z_max = if *z_max > 0.0 { *z_max } else { 28.0 / nl.lambda };
            let n = ((z_max * nl.lambda / 0.01).ceil() as usize).max(64);
            let ground = steady::build_ground_state(&nl, z_max, n)?;
            let x_act = 30.0 / (1.0 - nl.alpha).sqrt();
            let active = steady::build_active_state(&nl, x_act, n)?;
            let shifts = steady::find_shift_sets(&nl, &ground, &active, *b)?;
            sink.write(out, &profile_csv(&ground, &nl, true))?;
            let active_csv_name = out.with_extension("active.csv");
            sink.write(&active_csv_name, &profile_csv(&active, &nl, false))?;
            say(&format!(
                "ground state: peak theta = {}, residual sup = {:e}",
                nl.theta,
                ground.residual_sup(&nl)
            ));
            say(&format!("ground shifts (s0, z): {:?}", shifts.ground.iter().map(|g| (g.s0, g.z)).collect::<Vec<_>>()));
            say(&format!("active shifts z: {:?}", shifts.active));
        }
        Command::Simulate { f, b, datum, sigma, dx, dt, tmax, snap_every } => {
            let nl = Nonlinearity::from_config_path(&f.f_config)?;
            let family = parse_datum(datum)?;
            let phi = InitialDatum::render(family, &nl, *dx)?;
            let cfg = SolverConfig::for_nonlinearity(&nl, *dx, *dt, *tmax);
            let mut field = phi.make_field(&cfg, *b, *sigma);
            let mut solver = Solver::new(cfg, &nl, &field);
            let mut snaps = SnapshotHook::new(*snap_every);
            let mut log = LogHook::new(*snap_every);
            let rec = {
                let mut hooks: Vec<&mut dyn RunHook> = vec![&mut snaps, &mut log];
                run(&mut field, &mut solver, &nl, &mut hooks)?
            };
            for (t, values) in &snaps.snapshots {
                let mut csv = String::from("x,u\n");
                for (i, v) in values.iter().enumerate() {
                    let _ = writeln!(csv, "{},{}", fmt_f64(i as f64 * dx), fmt_f64(*v));
                }
                sink.write(Path::new(&format!("snapshot_t{t:.3}.csv")), &csv)?;
            }
            let mut csv = String::from("t,umax,argmax,energy,signchanges,domain_len\n");
            for row in &log.rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    fmt_f64(row.t),
                    fmt_f64(row.umax),
                    fmt_f64(row.argmax),
                    fmt_f64(row.energy),
                    row.sign_changes,
                    fmt_f64(row.domain_len)
                );
            }
            sink.write(Path::new("run_log.csv"), &csv)?;
            say(&format!(
                "simulated to t = {} ({} steps, {} clipped undershoots, {} domain growths); final energy {}",
                rec.final_t,
                rec.steps,
                rec.clipped,
                rec.growth_events,
                energy(&field, &nl)
            ));
        }
        Command::Threshold { f, b, datum, tol_rel, max_iter, dx, dt, max_t, out } => {
            let nl = Nonlinearity::from_config_path(&f.f_config)?;
            let family = parse_datum(datum)?;
            let phi = InitialDatum::render(family, &nl, *dx)?;
            let max_t = max_t.unwrap_or(2000.0 / (nl.lambda * nl.lambda));
            let cfg = SolverConfig::for_nonlinearity(&nl, *dx, *dt, max_t);
            let bs: Vec<f64> = b
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad b value {p:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            let results = if bs.len() == 1 {
                vec![bisect_sigma(&phi, bs[0], &cfg, &nl, *tol_rel, *max_iter)?]
            } else {
                sigma_star_curve(&phi, &bs, &cfg, &nl, *tol_rel, *max_iter)?
            };
            let json = serde_json::to_string_pretty(&results).expect("results serialize");
            sink.write(out, &json)?;
            let mut csv = String::from("b,sigma_lo,sigma_hi,iterations\n");
            for r in &results {
                let _ = writeln!(csv, "{},{},{},{}", fmt_f64(r.b), fmt_f64(r.sigma_lo), fmt_f64(r.sigma_hi), r.iterations);
                say(&format!(
                    "b = {}: sigma* in [{}, {}] after {} iterations (rel width {:.2e})",
                    r.b,
                    r.sigma_lo,
                    r.sigma_hi,
                    r.iterations,
                    r.width_rel()
                ));
            }
            if results.len() > 1 {
                sink.write(Path::new("sigma_star_curve.csv"), &csv)?;
                for w in results.windows(2) {
                    if w[1].sigma_hi > w[0].sigma_hi + w[0].sigma_hi * 1e-12 + (w[0].sigma_hi - w[0].sigma_lo) + (w[1].sigma_hi - w[1].sigma_lo) {
                        say("warning: sigma*(b) failed the monotonicity check within bracket widths");
                    }
                }
            }
        }
        Command::Transition { f, b, datum, iterations, dx, dt, max_t, gnuplot } => {
            let nl = Nonlinearity::from_config_path(&f.f_config)?;
            let consts = compute_constants(&nl)?;
            let family = parse_datum(datum)?;
            let phi = InitialDatum::render(family, &nl, *dx)?;
            let max_t = max_t.unwrap_or(2000.0 / (nl.lambda * nl.lambda));
            let cfg = SolverConfig::for_nonlinearity(&nl, *dx, *dt, max_t);
            let res = bisect_sigma(&phi, *b, &cfg, &nl, 0.0, *iterations)?;
            let sigma = 0.5 * (res.sigma_lo + res.sigma_hi);
            say(&format!("bisected {} iterations: launching midpoint sigma = {sigma}", res.iterations));

            let mut field = phi.make_field(&cfg, *b, sigma);
            let mut solver = Solver::new(cfg.clone(), &nl, &field);
            let mut pulse = PulseHook::new(&nl, 1.0);
            run(&mut field, &mut solver, &nl, &mut [&mut pulse])?;
            let traj = pulse.into_trajectory();

            let mut csv = String::from("t,xi,umax\n");
            for s in &traj.samples {
                let _ = writeln!(csv, "{},{},{}", fmt_f64(s.t), fmt_f64(s.xi), fmt_f64(s.umax));
            }
            sink.write(Path::new("trajectory.csv"), &csv)?;

            let regime = regime_partition(&nl, *b);
            let report = shift_regime_report(&nl, *b, &traj, &regime)?;
            say(&report.note);
            match fit_log_law_with(&consts, &traj, &nl, *b) {
                Ok(fit) => {
                    say(&format!(
                        "drift fit: slope {} vs predicted {} ({:.1}% off) over t in [{}, {}]",
                        fit.slope,
                        fit.predicted_slope,
                        100.0 * fit.slope_rel_dev,
                        fit.window.0,
                        fit.window.1
                    ));
                    let fit_json = serde_json::to_string_pretty(&(&fit, &report)).expect("fit serializes");
                    sink.write(Path::new("fit.json"), &fit_json)?;
                }
                Err(e) => say(&format!("drift fit unavailable: {e}")),
            }
            if *gnuplot {
                let gp = "set logscale x\nset xlabel 't'\nset ylabel 'xi'\nplot 'trajectory.csv' using 1:2 with lines title 'xi(t)'\n";
                sink.write(Path::new("trajectory.gp"), gp)?;
            }
        }
        Command::ReducedOde { f, b, y0, t_end, out } => {
            let nl = Nonlinearity::from_config_path(&f.f_config)?;
            let consts = compute_constants(&nl)?;
            let drift = reduced_ode_with(&consts, &nl, *b, *y0, *t_end)?;
            let mut csv = String::from("t,y,y_closed_form\n");
            for &(t, y) in &drift.samples {
                let _ = writeln!(csv, "{},{},{}", fmt_f64(t), fmt_f64(y), fmt_f64(drift.closed_form(t)));
            }
            sink.write(out, &csv)?;
            say(&format!(
                "reduced law {:?} with coefficient {}; y({}) = {}",
                drift.branch,
                drift.coef,
                t_end,
                drift.samples.last().map(|s| s.1).unwrap_or(f64::NAN)
            ));
        }
        Command::Regime { f, b } => {
            let nl = Nonlinearity::from_config_path(&f.f_config)?;
            let report = regime_partition(&nl, *b);
            say(&format!("{:?}", report.label));
            if !report.roots.is_empty() {
                let mut table = String::from("s0,z\n");
                for &s0 in &report.roots {
                    let z = steady::ground_z_of_value(&nl, s0)?;
                    let _ = writeln!(table, "{},{}", fmt_f64(s0), fmt_f64(z));
                    say(&format!("  s0 = {s0}, z = {z}"));
                }
                sink.write(Path::new("ground_shifts.csv"), &table)?;
            } else {
                say("  no ground shifts: b sqrt(F(s)) = s has no root in (0, theta)");
            }
            if report.oscillatory_near_zero {
                say("  note: g - b changes sign along the dyadic tail; grid detector uncertain");
            }
        }
    }
    sink.finish()?;
    Ok(())
}
