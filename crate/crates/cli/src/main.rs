use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use chebsparse::analysis::{coherence_bound_td, coherence_bound_tp, mutual_incoherence, weil_sum_check, Bound};
use chebsparse::chebmat::{assemble, SensingMatrix};
use chebsparse::harness::{run_experiment, write_plot_csv, ExperimentConfig, Sampling};
use chebsparse::indexsets::{enumerate, SpaceKind};
use chebsparse::sampling::{deterministic_points, format_f64, parse_f64, random_points, PointSet, Provenance};
use chebsparse::solver::{BasisPursuit, BpOptions};
use chebsparse::unisolvence::{chebyshev_system_probe, find_unisolvent_points, is_unisolvent, BasisSpec};
use chebsparse::Error;

/// Deterministic Chebyshev sampling points and sparse recovery experiments.
#[derive(Parser)]
#[command(name = "chebsparse", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CHEBSPARSE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point set as CSV.
    Points(PointsArgs),
    /// Assemble the Chebyshev sampling matrix as CSV.
    Matrix(MatrixArgs),
    /// Mutual coherence of a matrix, with the theoretical bound when it applies.
    Coherence(CoherenceArgs),
    /// Basis pursuit on a stored matrix and sample vector.
    Recover(RecoverArgs),
    /// Success-rate sweep over sparsity levels.
    Experiment(ExperimentArgs),
    /// Unisolvence verdict for a one-dimensional basis and point set.
    Unisolvence(UnisolvenceArgs),
    /// Exponential sum against the Weil bound.
    Weil(WeilArgs),
}

#[derive(Args)]
struct PointSource {
    /// Deterministic points for the prime modulus --M.
    #[arg(long, conflicts_with_all = ["rand", "points"])]
    det: bool,
    /// Uniform random points; --m of them.
    #[arg(long, conflicts_with = "points")]
    rand: bool,
    /// Read points from a CSV file instead.
    #[arg(long, value_name = "FILE")]
    points: Option<PathBuf>,
    /// Prime modulus for --det.
    #[arg(long = "M", value_name = "PRIME")]
    modulus: Option<u64>,
    /// Number of random points for --rand.
    #[arg(long = "m", value_name = "COUNT")]
    count: Option<usize>,
    /// Dimension (inferred from --points).
    #[arg(long)]
    d: Option<usize>,
    /// Seed for --rand.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PointsArgs {
    #[command(flatten)]
    source: PointSource,
    /// Output file (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Tp,
    Td,
}

impl From<Space> for SpaceKind {
    fn from(s: Space) -> Self {
        match s {
            Space::Tp => SpaceKind::Tp,
            Space::Td => SpaceKind::Td,
        }
    }
}

#[derive(Args)]
struct BasisArgs {
    /// Polynomial space: tensor product or total degree.
    #[arg(long, value_enum)]
    space: Space,
    /// Degree parameter q.
    #[arg(long)]
    q: u32,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    source: PointSource,
    #[command(flatten)]
    basis: BasisArgs,
    /// Scale columns to unit norm.
    #[arg(long)]
    normalize: bool,
    /// Output file (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoherenceArgs {
    #[command(flatten)]
    source: PointSource,
    #[command(flatten)]
    basis: BasisArgs,
}

#[derive(Args)]
struct RecoverArgs {
    /// Matrix CSV as written by `matrix`.
    #[arg(long, value_name = "FILE")]
    matrix: PathBuf,
    /// Sample vector: one-column CSV with a header row.
    #[arg(long, value_name = "FILE")]
    samples: PathBuf,
    /// Coefficient CSV output (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Absolute residual tolerance (default: 1e-8 * max(1, |b|)).
    #[arg(long)]
    feas_tol: Option<f64>,
    /// Relative duality-gap tolerance.
    #[arg(long, default_value_t = 1e-9)]
    opt_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Det,
    Rand,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    space: Space,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    q: u32,
    /// Number of sampling points.
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum, default_value = "det")]
    sampling: SamplingArg,
    #[arg(long, default_value_t = 1)]
    smin: usize,
    /// Largest sparsity (default: m/2).
    #[arg(long)]
    smax: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative l2 error below which a trial counts as recovered.
    #[arg(long, default_value_t = 1e-3)]
    success_tol: f64,
    /// Draw new random points for every trial.
    #[arg(long)]
    redraw_per_trial: bool,
    /// Result CSV (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also run both samplings and write paired curves here.
    #[arg(long, value_name = "FILE")]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Monomial,
    Chebyshev,
    Exponential,
    Power,
    Cauchy,
    Bspline,
}

#[derive(Args)]
struct UnisolvenceArgs {
    #[arg(long, value_enum)]
    basis: Family,
    /// Number of functions (monomial, chebyshev, bspline).
    #[arg(long)]
    n: Option<usize>,
    /// Distinct parameters (exponential, power, cauchy).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambdas: Vec<f64>,
    /// Sparsity level.
    #[arg(long)]
    s: usize,
    /// Points to test; without them a random 2s-point set is searched for.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    points: Vec<f64>,
    /// Random draws for the search and the determinant probe.
    #[arg(long, default_value_t = 5)]
    attempts: usize,
    #[arg(long, default_value_t = 100)]
    probe_trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct WeilArgs {
    /// Coefficients m1,...,md of f(x) = m1 x + ... + md x^d.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    poly: Vec<i64>,
    /// Prime modulus.
    #[arg(long)]
    p: u64,
}

fn usage(msg: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(p: &Path) -> Result<File, Error> {
    File::open(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

impl PointSource {
    fn load(&self) -> Result<PointSet, Error> {
        if let Some(path) = &self.points {
            let pts = PointSet::read_csv(open(path)?)?;
            if let Some(d) = self.d.filter(|&d| d != pts.dim()) {
                return Err(Error::DimensionMismatch { expected: d, got: pts.dim() });
            }
            return Ok(pts);
        }
        let d = self.d.unwrap_or_else(|| usage("--d is required unless --points is given"));
        if self.det {
            let m = self.modulus.unwrap_or_else(|| usage("--det requires --M"));
            deterministic_points(m, d)
        } else if self.rand {
            let m = self.count.unwrap_or_else(|| usage("--rand requires --m"));
            random_points(m, d, self.seed)
        } else {
            usage("choose one of --det, --rand or --points")
        }
    }
}

fn build_matrix(source: &PointSource, basis: &BasisArgs) -> Result<SensingMatrix, Error> {
    let pts = source.load()?;
    let set = enumerate(basis.space.into(), basis.q, pts.dim())?;
    assemble(&pts, &set)
}

fn points(args: PointsArgs) -> Result<(), Error> {
    args.source.load()?.write_csv(writer(args.out.as_deref())?)
}

fn matrix(args: MatrixArgs) -> Result<(), Error> {
    let mut a = build_matrix(&args.source, &args.basis)?;
    if args.normalize {
        a = a.normalize_columns()?;
    }
    a.write_csv(writer(args.out.as_deref())?)
}

fn coherence(args: CoherenceArgs) -> Result<(), Error> {
    let a = build_matrix(&args.source, &args.basis)?;
    let report = mutual_incoherence(&a)?;
    let bound = match a.points().map(|p| p.provenance()) {
        Some(Provenance::Deterministic { modulus }) => {
            let d = a.labels()[0].dim();
            match args.basis.space {
                Space::Tp => coherence_bound_tp(modulus, d, args.basis.q),
                Space::Td => coherence_bound_td(modulus, d, args.basis.q),
            }
        }
        _ => Bound::Inapplicable("the bound covers deterministic points only".into()),
    };
    let (k, j) = report.argmax_pair;
    let out = json!({
        "mu": report.mu,
        "pair": [a.labels()[k].to_string(), a.labels()[j].to_string()],
        "bound": bound.value(),
        "applicable": bound.is_applicable(),
        "reason": match &bound { Bound::Inapplicable(r) => Some(r.as_str()), _ => None },
    });
    println!("{out}");
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<f64>, Error> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut b = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 1 {
            return Err(Error::Parse(format!("sample rows must have one field, got {}", rec.len())));
        }
        b.push(parse_f64(&rec[0])?);
    }
    Ok(b)
}

fn recover(args: RecoverArgs) -> Result<(), Error> {
    let a = SensingMatrix::read_csv(open(&args.matrix)?)?.normalize_columns()?;
    let b = read_samples(&args.samples)?;
    let opts = BpOptions {
        feas_tol: args.feas_tol,
        opt_tol: args.opt_tol,
        max_iter: args.max_iter,
    };
    let r = BasisPursuit::new(&a)?.solve(&b, &opts)?;
    let mut w = csv::Writer::from_writer(writer(args.out.as_deref())?);
    w.write_record(["index", "coefficient"])?;
    for (label, c) in a.labels().iter().zip(&r.coefficients) {
        w.write_record([label.to_string(), format_f64(*c)])?;
    }
    w.flush()?;
    drop(w);
    let status = json!({
        "status": r.status,
        "iterations": r.iterations,
        "residual_l2": r.residual_l2,
        "l1_norm": r.l1_norm,
        "duality_gap": r.duality_gap,
    });
    if args.out.is_some() {
        println!("{status}");
    } else {
        eprintln!("{status}");
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<(), Error> {
    let sampling = match args.sampling {
        SamplingArg::Det => Sampling::Deterministic,
        SamplingArg::Rand => Sampling::Random,
    };
    let config = |sampling| {
        let mut c = ExperimentConfig::new(args.space.into(), args.d, args.q, args.m, sampling)
            .with_trials(args.trials)
            .with_seed(args.seed);
        c.s_min = args.smin;
        if let Some(s) = args.smax {
            c.s_max = s;
        }
        c.success_rel_tol = args.success_tol;
        c.redraw_per_trial = args.redraw_per_trial;
        c
    };
    let report = run_experiment(&config(sampling))?;
    report.write_csv(writer(args.out.as_deref())?)?;
    if let Some(path) = &args.emit_plot_data {
        let other = match sampling {
            Sampling::Deterministic => Sampling::Random,
            Sampling::Random => Sampling::Deterministic,
        };
        let other = run_experiment(&config(other))?;
        let (det, rand) = match sampling {
            Sampling::Deterministic => (&report, &other),
            Sampling::Random => (&other, &report),
        };
        write_plot_csv(det, rand, writer(Some(path))?)?;
    }
    Ok(())
}

fn unisolvence(args: UnisolvenceArgs) -> Result<(), Error> {
    let n = || args.n.unwrap_or_else(|| usage("--n is required for this basis"));
    let spec = match args.basis {
        Family::Monomial => BasisSpec::monomial(n())?,
        Family::Chebyshev => BasisSpec::chebyshev(n())?,
        Family::Bspline => BasisSpec::bspline(n())?,
        Family::Exponential => BasisSpec::exponential(args.lambdas.clone())?,
        Family::Power => BasisSpec::power_function(args.lambdas.clone())?,
        Family::Cauchy => BasisSpec::cauchy_kernel(args.lambdas.clone())?,
    };
    let (points, attempts) = if args.points.is_empty() {
        let found = find_unisolvent_points(&spec, args.s, args.attempts, args.seed)?;
        (found.points, Some(found.attempts_used))
    } else {
        (Some(args.points.clone()), None)
    };
    let verdict = match &points {
        Some(p) => Some(is_unisolvent(&spec, p, args.s)?),
        None => None,
    };
    let k = (2 * args.s).min(spec.len());
    let subset: Vec<usize> = (1..=k).collect();
    let probe = chebyshev_system_probe(&spec, &subset, args.probe_trials, args.seed)?;
    let out = json!({
        "basis": spec,
        "s": args.s,
        "points": points,
        "search_attempts": attempts,
        "unisolvent": verdict.as_ref().map(|v| v.unisolvent),
        "witness": verdict.as_ref().and_then(|v| v.witness.clone()),
        "reason": verdict.as_ref().and_then(|v| v.reason.clone()),
        "probe": { "subset": subset, "report": probe },
    });
    println!("{out}");
    Ok(())
}

fn weil(args: WeilArgs) -> Result<(), Error> {
    let w = weil_sum_check(&args.poly, args.p)?;
    println!("{}", serde_json::to_string(&w).expect("plain struct serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global thread pool is configured once");
    }
    let result = match cli.command {
        Command::Points(a) => points(a),
        Command::Matrix(a) => matrix(a),
        Command::Coherence(a) => coherence(a),
        Command::Recover(a) => recover(a),
        Command::Experiment(a) => experiment(a),
        Command::Unisolvence(a) => unisolvence(a),
        Command::Weil(a) => weil(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
