use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wavefront::asymptotics::{
    add_approx_attenuating, add_lower_bound, flat_drift, lambda_limit, q_phi_closed,
    q_phi_printed_integrand, q_phi_quadrature,
};
use wavefront::dp::{
    backward_induction, binary_quantizer, dp_policy, threshold_diagnostic, DpInstance,
    ObservationSpec,
};
use wavefront::geometry::{build_origin_grid, Domain, Point};
use wavefront::harness::reproduce::preset;
use wavefront::harness::{emit_all, run_with_workers, ScenarioConfig, ScenarioResult};
use wavefront::observation::{Clamp, ObservationModel};
use wavefront::posterior::DetectorModel;
use wavefront::state_model::{PriorParams, Propagation};
use wavefront::stopping::Decision;

#[derive(Parser)]
#[command(
    name = "wavefront",
    version,
    about = "Quickest detection of propagating spatial events"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write results.csv, table.txt and plot-data.csv.
    Simulate(SimulateArgs),
    /// Run a built-in preset: table1, table2, fig3, fig4 or add-trend.
    Reproduce(ReproduceArgs),
    /// Solve the finite-horizon dynamic program on a tiny instance.
    Dp(DpArgs),
    /// Evaluate the delay approximations and drift constants.
    Asymptotics(AsymptoticsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write one row per trial to trials.csv.
    #[arg(long)]
    dump_trials: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    name: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    dump_trials: bool,
    /// Print the preset's scenario file(s) instead of running.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct DpArgs {
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    rho1: f64,
    #[arg(long, default_value_t = 0.0)]
    p_inf: f64,
    /// Delay cost per slot.
    #[arg(long, default_value_t = 0.05)]
    cost: f64,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, default_value_t = 40)]
    resolution: u32,
    /// Side of the square domain.
    #[arg(long, default_value_t = 2.0)]
    side: f64,
    /// Number of candidate origins on a grid.
    #[arg(long, default_value_t = 1)]
    origins: usize,
    #[arg(long, default_value_t = 1)]
    r_max: u32,
    #[arg(long, default_value_t = 5.0)]
    unit: f64,
    /// Sensor location `x,y`; repeat for more sensors.
    #[arg(long = "sensor", value_parser = parse_point, default_values = ["1.5,1.0"])]
    sensors: Vec<Point>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 3.0)]
    gamma2: f64,
    /// Binary quantizer threshold on |x|; ignored when --nodes is given.
    #[arg(long, default_value_t = 1.5)]
    tau: f64,
    /// Gauss-Hermite nodes per sensor instead of the quantizer.
    #[arg(long)]
    nodes: Option<usize>,
    /// Also write a threshold-structure diagnostic for these ρ values.
    #[arg(long, value_delimiter = ',')]
    rho_sweep: Vec<f64>,
    /// Value-table CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Diagnostic CSV path, required with --rho-sweep.
    #[arg(long)]
    diagnostic_out: Option<PathBuf>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[arg(long, value_delimiter = ',', default_values = ["0.1", "0.01", "0.001"])]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 0.02)]
    rho: f64,
    /// Sensor count L.
    #[arg(long, default_value_t = 100)]
    sensors: usize,
    #[arg(long, value_delimiter = ',', default_values = ["1"])]
    phi: Vec<f64>,
    /// Disk radius R in radius units.
    #[arg(long, value_delimiter = ',', default_values = ["10"])]
    radius: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad x: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("bad y: {e}"))?;
    Ok(Point::new(x, y))
}

fn run_scenarios(
    cfgs: &[ScenarioConfig],
    workers: Option<usize>,
    dump: bool,
) -> Result<ScenarioResult> {
    let mut all = ScenarioResult::default();
    for cfg in cfgs {
        let workers = workers
            .or(cfg.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let r = run_with_workers(cfg, workers, dump)
            .with_context(|| format!("scenario `{}`", cfg.name))?;
        all.rows.extend(r.rows);
        all.trials.extend(r.trials);
        all.capped += r.capped;
    }
    Ok(all)
}

fn finish(result: &ScenarioResult, out: &Path) -> Result<()> {
    let path = emit_all(result, out).with_context(|| format!("writing {}", out.display()))?;
    if result.capped > 0 {
        eprintln!(
            "warning: {} trials reached the slot cap without stopping",
            result.capped
        );
    }
    println!("{}", path.display());
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = ScenarioConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    cfg.seed = args.seed;
    cfg.trials = args.trials;
    let result = run_scenarios(&[cfg], args.workers, args.dump_trials)?;
    finish(&result, &args.out)
}

fn reproduce(args: ReproduceArgs) -> Result<()> {
    let mut cfgs = preset(&args.name)?;
    for c in &mut cfgs {
        if let Some(s) = args.seed {
            c.seed = s;
        }
        if let Some(t) = args.trials {
            c.trials = t;
        }
    }
    if args.print_config {
        for c in &cfgs {
            print!("{}", c.to_toml());
        }
        return Ok(());
    }
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from("results").join(&args.name));
    let result = run_scenarios(&cfgs, args.workers, args.dump_trials)?;
    finish(&result, &out)
}

fn output(path: Option<&Path>) -> Result<Box<dyn std::io::Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn dp(args: DpArgs) -> Result<()> {
    let domain = Domain::square(args.side);
    let prior = PriorParams::new(args.rho, args.rho1, args.p_inf)?;
    let model = ObservationModel::flat(args.sigma2, args.gamma2)?;
    let origins = build_origin_grid(&domain, args.origins)?;
    let detector = DetectorModel::with_r_max(
        origins,
        Propagation::Growth { rho1: args.rho1 },
        args.r_max,
        prior,
        model,
        args.unit,
    )?;
    let observations = match args.nodes {
        Some(nodes) => ObservationSpec::GaussHermite { nodes },
        None => ObservationSpec::Finite {
            null: binary_quantizer(args.sigma2, args.tau).to_vec(),
            alt: binary_quantizer(args.sigma2 + args.gamma2, args.tau).to_vec(),
        },
    };
    let instance = DpInstance {
        detector,
        sensors: args.sensors,
        observations,
        cost: args.cost,
        horizon: args.horizon,
        resolution: args.resolution,
    };
    if !args.rho_sweep.is_empty() && args.diagnostic_out.is_none() {
        bail!("--rho-sweep needs --diagnostic-out");
    }
    let table = backward_induction(&instance)?;
    let dim = table.lattice.states();
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    let mut header = vec!["n".to_string(), "point".to_string()];
    header.extend((0..dim).map(|s| format!("p{s}")));
    header.extend(["pi0", "value", "continuation", "stop"].map(String::from));
    w.write_record(&header)?;
    let points: Vec<Vec<f64>> = table.lattice.points().collect();
    for n in 0..=table.horizon {
        for (i, p) in points.iter().enumerate() {
            let mut rec: Vec<String> = vec![n.to_string(), i.to_string()];
            rec.extend(p.iter().map(|v| v.to_string()));
            let cont = if n < table.horizon {
                table.d[n][i].to_string()
            } else {
                String::new()
            };
            let stop = dp_policy(&table, n, p) == Decision::Stop;
            rec.extend([
                table.pi0(p).to_string(),
                table.j[n][i].to_string(),
                cont,
                u8::from(stop).to_string(),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    if let Some(path) = args.diagnostic_out {
        let reports = threshold_diagnostic(&instance, &args.rho_sweep)?;
        let mut w = csv::Writer::from_writer(output(Some(&path))?);
        w.write_record([
            "rho",
            "misclassification",
            "psi_over_rho_mean",
            "psi_over_rho_max",
            "stop_fraction",
        ])?;
        for r in reports {
            w.write_record(
                [
                    r.rho,
                    r.misclassification,
                    r.psi_over_rho_mean,
                    r.psi_over_rho_max,
                    r.stop_fraction,
                ]
                .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
    }
    Ok(())
}

fn asymptotics(args: AsymptoticsArgs) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record([
        "alpha",
        "rho",
        "sensors",
        "phi",
        "radius",
        "q_phi_closed",
        "q_phi_quadrature",
        "q_phi_printed_integrand",
        "add_attenuating",
        "flat_drift",
        "add_flat",
        "lambda_limit",
    ])?;
    for &alpha in &args.alpha {
        for &phi in &args.phi {
            for &r in &args.radius {
                let closed = q_phi_closed(phi, r)?;
                let quad = q_phi_quadrature(phi, r, 2.0, Clamp::UnitFloor, 1.0)?;
                let printed = q_phi_printed_integrand(phi, r, 2.0)?;
                let add_att = add_approx_attenuating(alpha, args.rho, args.sensors, closed)?;
                let fd = flat_drift(args.sensors, phi);
                let add_flat = add_lower_bound(alpha, args.rho, &[fd])?;
                let lam = lambda_limit(args.sensors as f64 / (r * r), phi);
                w.write_record(
                    [
                        alpha,
                        args.rho,
                        args.sensors as f64,
                        phi,
                        r,
                        closed,
                        quad,
                        printed,
                        add_att,
                        fd,
                        add_flat,
                        lam,
                    ]
                    .map(|v| v.to_string()),
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            let _ = writeln!(std::io::stderr(), "{}", first.trim());
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Dp(a) => dp(a),
        Command::Asymptotics(a) => asymptotics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            let _ = writeln!(std::io::stderr(), "error: {msg}");
            ExitCode::from(2)
        }
    }
}
