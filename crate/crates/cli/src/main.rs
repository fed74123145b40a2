//! `nlcs`: simulate, sample and analyse linear control systems on nilpotent
//! groups.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use nilpotent_lcs::dynamics::{
    exceptional_set, integrate, integrate_direct, larc_check, regularity, ControlRange,
    ControlSystem, FieldSystem, LinearControlSystem, PiecewiseControl, Trajectory, DEFAULT_STEP,
};
use nilpotent_lcs::error::Error;
use nilpotent_lcs::heisenberg::{
    build_ascent_plan, build_descent_plan, verify_singleton_control_sets, LyapunovParams,
};
use nilpotent_lcs::io as files;
use nilpotent_lcs::reach::{
    control_set_estimate, grid_transition_graph, mutual_reachability_check, sample_reachable,
    seed_control_set, GridSpec, RETURN_TOL,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "nlcs",
    version,
    about = "Linear control systems on nilpotent Lie groups"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Built-in name (example1, example1-conjugated, example2,
    /// regular-heisenberg) or a TOML/JSON system file
    #[arg(long, global = true, default_value = "example2")]
    system: String,
    /// Control range: `r` for [-r, r] on every channel, or `lo:hi,...`
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as `t,x1..xn,u1..um`
    Simulate {
        /// Initial state `x1,...,xn` (identity by default)
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Constant control `u1,...,um`
        #[arg(long, allow_hyphen_values = true, conflicts_with = "control_file")]
        control: Option<String>,
        /// Piecewise-constant control as `duration,u1..um` CSV
        #[arg(long)]
        control_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Sample the reachable set at a fixed time
    Reach {
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Estimate control sets on a grid, or seed one through `f_S⁻¹`
    Controlset {
        /// Half-width of the cubic window
        #[arg(long, default_value_t = 3.0)]
        window: f64,
        /// Cells per axis
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Control lattice levels per channel
        #[arg(long, default_value_t = 5)]
        levels: usize,
        /// Integration step inside each transition (default min(τ/20, 1e-2))
        #[arg(long)]
        step: Option<f64>,
        /// Seed points `f_S⁻¹(y)` with `y` sampled at this time instead of
        /// running the grid estimator
        #[arg(long)]
        seed_time: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Structural report: LARC, det A, kernel, exceptional times
    Check {
        /// Exceptional times are listed in [0, window]
        #[arg(long, default_value_t = 20.0)]
        window: f64,
    },
    /// Lyapunov verification for the Example 1 normal form, or a mutual
    /// reachability check between two states
    Verify {
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 3.0)]
        horizon: f64,
        #[arg(long, allow_hyphen_values = true, requires = "to")]
        from: Option<String>,
        #[arg(long, allow_hyphen_values = true, requires = "from")]
        to: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Steering plan between two points of the z-axis for Example 2
    Steer {
        #[arg(long, allow_hyphen_values = true)]
        from_z: f64,
        #[arg(long, allow_hyphen_values = true)]
        to_z: f64,
        /// Loop control for descents
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Dwell control for ascents
        #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
        u: f64,
        /// Also write the leg waypoints as JSON
        #[arg(long)]
        waypoints: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ExceptionalTime { .. }
            | Error::NewtonDivergence { .. }
            | Error::NotRegular { .. }
            | Error::RankConditionFails { .. }
            | Error::SteeringFailed(_) => Failure::numeric(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

enum System {
    Linear(LinearControlSystem),
    Field(FieldSystem),
}

impl System {
    fn as_dyn(&self) -> &(dyn ControlSystem + Sync) {
        match self {
            System::Linear(s) => s,
            System::Field(s) => s,
        }
    }

    fn linear(&self, what: &str) -> CliResult<&LinearControlSystem> {
        match self {
            System::Linear(s) => Ok(s),
            System::Field(_) => Err(Failure::config(format!(
                "{what} needs a linear system; example1-conjugated is not one"
            ))),
        }
    }
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::config(format!("--{what}: `{v}` is not a number")))
        })
        .collect()
}

fn parse_omega(text: &str, channels: usize) -> CliResult<ControlRange> {
    if !text.contains(':') {
        let r = parse_list(text, "omega")?;
        if r.len() != 1 {
            return Err(Failure::config("--omega: expected `r` or `lo:hi,...`"));
        }
        return Ok(ControlRange::symmetric(channels, r[0])?);
    }
    let bounds = text
        .split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| Failure::config(format!("--omega: `{pair}` is not `lo:hi`")))?;
            let lo = parse_list(lo, "omega")?[0];
            let hi = parse_list(hi, "omega")?[0];
            Ok((lo, hi))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ControlRange::new(bounds)?)
}

fn load_system(common: &Common) -> CliResult<System> {
    let omega = |default: f64, channels: usize| match &common.omega {
        Some(text) => parse_omega(text, channels),
        None => Ok(ControlRange::symmetric(channels, default)?),
    };
    Ok(match common.system.as_str() {
        "example1" => System::Linear(LinearControlSystem::example1(omega(1.0, 1)?)?),
        "example1-conjugated" => System::Field(FieldSystem::example1_conjugated(omega(1.0, 1)?)?),
        "example2" => System::Linear(LinearControlSystem::example2(omega(1.0, 1)?)?),
        "regular-heisenberg" => {
            let sys = LinearControlSystem::regular_heisenberg();
            System::Linear(sys.with_omega(omega(1.0, 2)?)?)
        }
        path => {
            let path = Path::new(path);
            if !path.exists() {
                return Err(Failure::config(format!(
                    "{}: no such built-in system or file",
                    path.display()
                )));
            }
            let sys = files::load_system(path)?;
            match &common.omega {
                Some(text) => {
                    let m = sys.controls().len();
                    System::Linear(sys.with_omega(parse_omega(text, m)?)?)
                }
                None => System::Linear(sys),
            }
        }
    })
}

fn output(common: &Common) -> CliResult<Box<dyn Write>> {
    Ok(match &common.out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).map_err(|e| {
                Failure::config(format!("{}: {e}", path.display()))
            })?))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn write_json(common: &Common, value: &serde_json::Value) -> CliResult<()> {
    let mut w = output(common)?;
    writeln!(
        w,
        "{}",
        serde_json::to_string_pretty(value).expect("json values serialize")
    )?;
    w.flush()?;
    Ok(())
}

fn point(text: &Option<String>, dim: usize, what: &str) -> CliResult<DVector<f64>> {
    match text {
        None => Ok(DVector::zeros(dim)),
        Some(t) => {
            let v = parse_list(t, what)?;
            if v.len() != dim {
                return Err(Failure::config(format!(
                    "--{what}: expected {dim} coordinates, got {}",
                    v.len()
                )));
            }
            Ok(DVector::from_vec(v))
        }
    }
}

fn positive(value: f64, what: &str) -> CliResult<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Failure::config(format!(
            "--{what} must be positive, got {value}"
        )))
    }
}

fn simulate(
    common: &Common,
    x0: &Option<String>,
    control: &Option<String>,
    control_file: &Option<PathBuf>,
    horizon: f64,
    step: f64,
) -> CliResult<()> {
    let sys = load_system(common)?;
    let dyn_sys = sys.as_dyn();
    let x0 = point(x0, dyn_sys.dim(), "x0")?;
    let m = dyn_sys.omega().num_channels();
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Failure::config(format!(
            "--horizon must be non-negative, got {horizon}"
        )));
    }
    positive(step, "step")?;
    let u = match control_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            files::read_control_csv(&text)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => {
            let value = match control {
                Some(t) => DVector::from_vec(parse_list(t, "control")?),
                None => DVector::zeros(m),
            };
            PiecewiseControl::constant(value, horizon.max(f64::MIN_POSITIVE))?
        }
    };
    let tr: Trajectory = match &sys {
        System::Linear(s) => integrate(s, &x0, &u, horizon, step)?,
        System::Field(s) => integrate_direct(s, &x0, &u, horizon, step)?,
    };
    if tr.points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Failure::numeric("trajectory left the floating-point range"));
    }
    match common.format {
        Format::Csv => {
            let mut w = output(common)?;
            files::write_trajectory_csv(&mut w, &tr)?;
            w.flush()?;
        }
        Format::Json => {
            let rows: Vec<_> = tr
                .times
                .iter()
                .zip(&tr.points)
                .map(|(t, p)| {
                    json!({"t": t, "x": p.as_slice(), "u": tr.control.value_at(*t).as_slice()})
                })
                .collect();
            write_json(common, &json!(rows))?;
        }
    }
    Ok(())
}

fn reach(common: &Common, x0: &Option<String>, horizon: f64, samples: usize) -> CliResult<()> {
    let sys = load_system(common)?;
    let sys = sys.as_dyn();
    let x0 = point(x0, sys.dim(), "x0")?;
    positive(horizon, "horizon")?;
    let cloud = sample_reachable(sys, &x0, horizon, samples, common.seed)?;
    match common.format {
        Format::Csv => {
            let mut w = output(common)?;
            files::write_points_csv(&mut w, &cloud.points)?;
            w.flush()?;
        }
        Format::Json => {
            let pts: Vec<&[f64]> = cloud.points.iter().map(|p| p.as_slice()).collect();
            write_json(
                common,
                &json!({"base": x0.as_slice(), "horizon": horizon, "seed": common.seed, "points": pts}),
            )?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn controlset(
    common: &Common,
    window: f64,
    grid: usize,
    tau: f64,
    levels: usize,
    step: Option<f64>,
    seed_time: Option<f64>,
    samples: usize,
) -> CliResult<()> {
    let sys = load_system(common)?;
    if let Some(s) = seed_time {
        positive(s, "seed-time")?;
        let lin = sys.linear("seeding")?;
        let cloud = seed_control_set(lin, s, samples, common.seed)?;
        let passing = cloud.passing(RETURN_TOL);
        eprintln!(
            "{} points, {} pass the return check, {} skipped",
            cloud.points.len(),
            passing,
            cloud.skipped
        );
        let mut w = output(common)?;
        files::write_points_csv(&mut w, &cloud.points)?;
        w.flush()?;
        return Ok(());
    }
    let dyn_sys = sys.as_dyn();
    positive(window, "window")?;
    positive(tau, "tau")?;
    let mut spec = GridSpec::cube(dyn_sys.dim(), window, grid, tau, dyn_sys.omega(), levels)?;
    if let Some(h) = step {
        positive(h, "step")?;
        spec.step = h;
    }
    let graph = grid_transition_graph(dyn_sys, &spec)?;
    let estimates = control_set_estimate(&graph);
    let files: Vec<_> = estimates
        .iter()
        .map(|e| files::EstimateFile::new(e, &spec))
        .collect();
    let interior = (0..spec.num_cells())
        .filter(|&c| spec.is_window_interior(c))
        .count();
    println!("components: {}", estimates.len());
    match estimates.first() {
        Some(best) => {
            let inside = best
                .cells
                .iter()
                .filter(|&&c| spec.is_window_interior(c))
                .count();
            println!(
                "largest: {} cells ({:.1}% of window-interior cells), diameter {:.3}",
                best.cells.len(),
                100.0 * inside as f64 / interior.max(1) as f64,
                best.diameter
            );
            println!(
                "identity adjoins largest: {}",
                if best.contains_identity_closure {
                    "yes"
                } else {
                    "no"
                }
            );
        }
        None => println!("identity adjoins largest: no"),
    }
    if let Some(path) = &common.out {
        let mut w = BufWriter::new(
            File::create(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?,
        );
        writeln!(
            w,
            "{}",
            serde_json::to_string(&files).expect("estimates serialize")
        )?;
        w.flush()?;
    }
    Ok(())
}

fn check(common: &Common, window: f64) -> CliResult<()> {
    let sys = load_system(common)?;
    let sys = sys.linear("check")?;
    positive(window, "window")?;
    let larc = larc_check(sys);
    let reg = regularity(sys.derivation());
    let times = exceptional_set(sys.derivation(), window);
    let derivation = sys.algebra().validate_derivation(sys.derivation());
    let vecs = |v: &[DVector<f64>]| v.iter().map(|x| x.as_slice().to_vec()).collect::<Vec<_>>();
    match common.format {
        Format::Json => write_json(
            common,
            &json!({
                "larc_rank": larc.rank,
                "dim": larc.dim,
                "larc_satisfied": larc.satisfied(),
                "generators": vecs(&larc.generators),
                "det_a": reg.det,
                "regular": reg.regular,
                "kernel": vecs(&reg.kernel),
                "exceptional_window": window,
                "exceptional_times": times,
                "derivation_valid": derivation.is_valid(),
            }),
        ),
        Format::Csv => {
            let mut w = output(common)?;
            let fmt = |v: &DVector<f64>| {
                let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                format!("({})", parts.join(", "))
            };
            writeln!(w, "larc rank: {} of {}", larc.rank, larc.dim)?;
            writeln!(
                w,
                "larc: {}",
                if larc.satisfied() {
                    "satisfied"
                } else {
                    "fails"
                }
            )?;
            for g in &larc.generators {
                writeln!(w, "  generator {}", fmt(g))?;
            }
            writeln!(w, "det A: {}", reg.det)?;
            writeln!(w, "regular: {}", if reg.regular { "yes" } else { "no" })?;
            writeln!(w, "kernel dim: {}", reg.kernel.len())?;
            for k in &reg.kernel {
                writeln!(w, "  kernel {}", fmt(k))?;
            }
            let ts: Vec<String> = times.iter().map(|t| format!("{t:.6}")).collect();
            writeln!(w, "exceptional times in [0, {window}]: {}", ts.join(", "))?;
            writeln!(
                w,
                "derivation: {}",
                if derivation.is_valid() {
                    "valid"
                } else {
                    "invalid"
                }
            )?;
            w.flush()?;
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn verify(
    common: &Common,
    sigma: Option<f64>,
    samples: usize,
    horizon: f64,
    from: &Option<String>,
    to: &Option<String>,
    tol: f64,
) -> CliResult<()> {
    if let (Some(from), Some(to)) = (from, to) {
        let sys = load_system(common)?;
        let sys = sys.as_dyn();
        let x = point(&Some(from.clone()), sys.dim(), "from")?;
        let y = point(&Some(to.clone()), sys.dim(), "to")?;
        positive(horizon, "horizon")?;
        positive(tol, "tol")?;
        let ok = mutual_reachability_check(sys, &x, &y, horizon, samples, tol, common.seed);
        println!(
            "mutually reachable within {tol}: {}",
            if ok { "yes" } else { "no" }
        );
        return if ok {
            Ok(())
        } else {
            Err(Failure::numeric("no mutual reachability witness found"))
        };
    }
    let omega = match &common.omega {
        Some(text) => parse_omega(text, 1)?,
        None => ControlRange::interval(-1.0, 1.0)?,
    };
    let rho = omega.bounds()[0].0;
    let sigma = sigma.unwrap_or(2.0 * rho);
    let params = LyapunovParams::for_range(sigma, &omega)?;
    let report = verify_singleton_control_sets(params, &omega, samples, horizon, common.seed)?;
    println!("samples: {}", report.samples);
    println!(
        "monotonicity violations: {}",
        report.monotonicity_violations
    );
    println!("worst change of F: {:e}", report.worst_change);
    println!("strict cases: {}", report.strict_cases);
    println!("strict violations: {}", report.strict_violations);
    println!(
        "smallest strict increase: {:e}",
        report.smallest_strict_increase
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::numeric("Lyapunov verification failed"))
    }
}

fn steer(
    common: &Common,
    from_z: f64,
    to_z: f64,
    alpha: f64,
    u: f64,
    waypoints: &Option<PathBuf>,
) -> CliResult<()> {
    if common.system != "example2" {
        return Err(Failure::config(
            "steer is implemented for the example2 system only",
        ));
    }
    let omega = match &common.omega {
        Some(text) => parse_omega(text, 1)?,
        None => ControlRange::interval(-2.0, 2.0)?,
    };
    let sys = LinearControlSystem::example2(omega.clone())?;
    let plan = if from_z > to_z {
        build_descent_plan(from_z, to_z, alpha, &omega)?
    } else {
        build_ascent_plan(from_z, to_z, u, &omega)?
    };
    plan.check_range(&omega)?;
    let end = plan.endpoint(&sys, DEFAULT_STEP)?;
    let err = (&end - DVector::from_vec(vec![0.0, 0.0, to_z])).amax();
    eprintln!(
        "{} legs, {} loops, duration {:.6}, endpoint error {:e}",
        plan.legs.len(),
        plan.loops,
        plan.duration(),
        err
    );
    let mut w = output(common)?;
    files::write_plan_csv(&mut w, &plan)?;
    w.flush()?;
    if let Some(path) = waypoints {
        std::fs::write(path, files::plan_waypoints_json(&plan) + "\n")
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate {
            x0,
            control,
            control_file,
            horizon,
            step,
        } => simulate(c, x0, control, control_file, *horizon, *step),
        Command::Reach {
            x0,
            horizon,
            samples,
        } => reach(c, x0, *horizon, *samples),
        Command::Controlset {
            window,
            grid,
            tau,
            levels,
            step,
            seed_time,
            samples,
        } => controlset(
            c, *window, *grid, *tau, *levels, *step, *seed_time, *samples,
        ),
        Command::Check { window } => check(c, *window),
        Command::Verify {
            sigma,
            samples,
            horizon,
            from,
            to,
            tol,
        } => verify(c, *sigma, *samples, *horizon, from, to, *tol),
        Command::Steer {
            from_z,
            to_z,
            alpha,
            u,
            waypoints,
        } => steer(c, *from_z, *to_z, *alpha, *u, waypoints),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nlcs: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
