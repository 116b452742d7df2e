use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use toda_lax::config::{RunConfig, SUITES};
use toda_lax::dynamics::{integrate_flow, uniform_times, FlowOptions, Integrator};
use toda_lax::maslov::{check_holonomy_theorem, CurveSpec};
use toda_lax::sampling::random_points;
use toda_lax::singularity::{find_singular, stratum_seed, FindOptions, SingularPoint};
use toda_lax::verify::{cmd_verify, SEED_SIZE};
use toda_lax::{LaxClass, PairId, PhasePoint, TodaError};

#[derive(Parser)]
#[command(name = "toda-lax", version, about = "Lax matrices, singular strata and Maslov indices of the periodic Toda chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite and write a JSON report.
    Verify(VerifyArgs),
    /// Locate points where the given eigenvalue pairs are degenerate.
    Singular(SingularArgs),
    /// Maslov index and eigenvector holonomy of a closed curve.
    Maslov(MaslovArgs),
    /// Integrate a combination of the Toda flows and write CSV.
    Integrate(IntegrateArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single particle count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to one suite; repeatable.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
    suite: Vec<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "tol.degeneracy")]
    tol_degeneracy: Option<f64>,
    #[arg(long = "tol.rank")]
    tol_rank: Option<f64>,
    #[arg(long = "tol.bracket")]
    tol_bracket: Option<f64>,
    #[arg(long = "tol.ode-rtol")]
    tol_ode_rtol: Option<f64>,
    /// Record wall time per check.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SingularArgs {
    #[arg(long)]
    n: usize,
    /// Target pair as `class:first`, e.g. `odd:0`; repeatable.
    #[arg(long = "pair", required = true, value_parser = parse_pair_spec)]
    pairs: Vec<(LaxClass, usize)>,
    /// Find one point where all targets are degenerate together instead of
    /// one point per target.
    #[arg(long)]
    joint: bool,
    /// JSON phase point used as the Newton seed.
    #[arg(long)]
    seed_point: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MaslovArgs {
    /// JSON curve description.
    #[arg(long)]
    curve: PathBuf,
    /// JSON array of singular points that circle specs may refer to by index.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of the unwrapped phase along the curve.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Random start with this many particles.
    #[arg(long, conflicts_with = "z0", required_unless_present = "z0")]
    n: Option<usize>,
    /// JSON phase point to start from.
    #[arg(long)]
    z0: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Coefficients c_j of the Hamiltonian sum c_j F_j, comma separated;
    /// defaults to the physical flow F_2.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    t_final: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Fixed-step Stormer-Verlet with this step (F_2 flow only).
    #[arg(long)]
    verlet: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What went wrong, mapped to the exit code.
enum Failure {
    Usage(String),
    Check(String),
}

impl From<TodaError> for Failure {
    fn from(e: TodaError) -> Self {
        match e {
            TodaError::Config(_) | TodaError::Json(_) | TodaError::Io(_) | TodaError::InvalidPair(..) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

fn parse_pair_spec(s: &str) -> Result<(LaxClass, usize), String> {
    let (class, first) = s.split_once(':').ok_or("expected class:first, e.g. odd:0")?;
    let class = match class {
        "even" => LaxClass::Even,
        "odd" => LaxClass::Odd,
        _ => return Err(format!("unknown class {class:?}; expected even or odd")),
    };
    let first = first.parse().map_err(|_| format!("bad pair index {first:?}"))?;
    Ok((class, first))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Usage(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = args.n {
        cfg.n_min = n;
        cfg.n_max = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if !args.suite.is_empty() {
        cfg.suites = args.suite;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let t = &mut cfg.tolerances;
    for (slot, v) in [
        (&mut t.degeneracy, args.tol_degeneracy),
        (&mut t.rank, args.tol_rank),
        (&mut t.bracket, args.tol_bracket),
        (&mut t.ode_rtol, args.tol_ode_rtol),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    cfg.timing |= args.timing;
    cfg.validate()?;

    let report = cmd_verify(&cfg)?;
    emit(cfg.out.as_deref(), &to_json(&report))?;
    eprint!("{}", report.summary());
    if report.count(toda_lax::report::Status::Inconclusive) > 0 {
        eprintln!("warning: some checks were inconclusive at the configured tolerances");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check("verification failed".into()))
    }
}

fn singular(args: SingularArgs) -> Result<(), Failure> {
    if args.n < 2 {
        return Err(Failure::Usage("--n must be at least 2".into()));
    }
    let pairs = args
        .pairs
        .iter()
        .map(|&(class, first)| PairId::new(class, first, args.n))
        .collect::<Result<Vec<_>, _>>()?;
    let seed_point: Option<PhasePoint> = args.seed_point.as_deref().map(read_json).transpose()?;
    if let Some(z) = &seed_point {
        if z.n() != args.n {
            return Err(Failure::Usage(format!("seed point has {} particles, expected {}", z.n(), args.n)));
        }
    }
    let opts = FindOptions {
        max_iter: args.max_iter,
        ..Default::default()
    };
    let groups: Vec<Vec<PairId>> = if args.joint {
        vec![pairs]
    } else {
        pairs.into_iter().map(|p| vec![p]).collect()
    };
    let mut found: Vec<SingularPoint> = Vec::new();
    for targets in &groups {
        let seed = match &seed_point {
            Some(z) => z.clone(),
            None => stratum_seed(args.n, targets, SEED_SIZE)?,
        };
        let sp = if args.n == 2 {
            // the only singular stratum is the line of relative equilibria
            SingularPoint::from_omega(2, seed.q().iter().sum::<f64>() / 2.0, seed.p().iter().sum::<f64>() / 2.0)?
        } else {
            find_singular(&seed, targets, &opts)?
        };
        for f in &sp.frequencies {
            eprintln!("{}: omega = {:.12}", f.pair, f.omega);
        }
        found.push(sp);
    }
    emit(args.out.as_deref(), &to_json(&found))
}

#[derive(serde::Serialize)]
struct MaslovOutput {
    maslov: toda_lax::maslov::MaslovResult,
    holonomy: toda_lax::maslov::HolonomyResult,
    product: i8,
    holonomy_theorem_holds: bool,
}

fn maslov(args: MaslovArgs) -> Result<(), Failure> {
    let spec: CurveSpec = read_json(&args.curve)?;
    let stored: Vec<SingularPoint> = match &args.points {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let curve = spec.build(&stored)?;
    let rep = check_holonomy_theorem(&curve)?;
    if let Some(p) = &args.trace_csv {
        let f = std::fs::File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        rep.maslov
            .write_trace_csv(std::io::BufWriter::new(f))
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let ok = rep.passed;
    let out = MaslovOutput {
        product: rep.lhs,
        holonomy_theorem_holds: ok,
        maslov: rep.maslov,
        holonomy: rep.holonomy,
    };
    emit(args.out.as_deref(), &to_json(&out))?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check("holonomy product disagrees with the Maslov index".into()))
    }
}

fn integrate(args: IntegrateArgs) -> Result<(), Failure> {
    let z0: PhasePoint = match (&args.z0, args.n) {
        (Some(p), _) => read_json(p)?,
        (None, Some(n)) if n >= 2 => random_points(args.seed, n, 1, 1.0).remove(0),
        _ => return Err(Failure::Usage("--n must be at least 2".into())),
    };
    let n = z0.n();
    let coeffs = if args.coeffs.is_empty() {
        let mut c = vec![0.0; n];
        c[1] = 1.0;
        c
    } else {
        args.coeffs
    };
    if !(args.t_final > 0.0) || args.samples == 0 {
        return Err(Failure::Usage("--t-final and --samples must be positive".into()));
    }
    let mut opts = FlowOptions::with_rtol(args.rtol);
    if let Some(h) = args.verlet {
        opts.integrator = Integrator::StormerVerlet { h };
    }
    let traj = integrate_flow(&z0, &coeffs, &uniform_times(args.t_final, args.samples), &opts)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(args.out.as_deref(), &String::from_utf8(buf).expect("CSV is ASCII"))?;
    eprintln!("max relative drift of F_1..F_{n}: {:.3e}", traj.max_integral_drift);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Singular(a) => singular(a),
        Command::Maslov(a) => maslov(a),
        Command::Integrate(a) => integrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
