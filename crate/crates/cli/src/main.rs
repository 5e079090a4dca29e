//! Command-line front end: sampling, rate evaluation, density grids, and
//! the LDP verification sweep.
//!
//! Exit codes: 0 success, 1 domain/ordering errors, 2 accuracy/numeric
//! errors, 64 usage errors.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use gempd_core::error::Error as CoreError;
use gempd_core::gem::{assign_to_partition, rank_prefix, sample_gem, StopRule};
use gempd_core::harness::{run_sweep, EventSpec, SweepConfig};
use gempd_core::measure::{BaseMeasure, MeasureSpec, PartitionSpec};
use gempd_core::perman::{perman_log_density, OrderedPoint, PermanContext};
use gempd_core::rates;
use gempd_core::report::{parse_sweep_report, render_sweep_report, validate_report};
use gempd_core::rng::RandomStream;
use gempd_core::subordinator::sample_partition_via_subordinator;

mod config;
use config::FileConfig;

#[derive(Parser)]
#[command(name = "gempd", version, about = "GEM / Poisson-Dirichlet sampling and LDP verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples and emit them as CSV (replicate,coordinate,value).
    #[command(subcommand)]
    Sample(SampleCmd),
    /// Evaluate rate functions.
    #[command(subcommand)]
    Rate(RateCmd),
    /// Evaluate densities.
    #[command(subcommand)]
    Density(DensityCmd),
    /// Run empirical LDP verification sweeps.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Re-parse and validate a sweep report.
    CheckReport { path: PathBuf },
}

#[derive(Subcommand)]
enum SampleCmd {
    /// GEM stick prefixes.
    Gem(SampleGemArgs),
    /// Ranked top-k Poisson-Dirichlet masses (top-k-exact stopping).
    Pd(SamplePdArgs),
    /// Dirichlet-process cell masses over a partition.
    Dirichlet(SampleDirichletArgs),
}

#[derive(Args)]
struct CommonSampleArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleGemArgs {
    #[command(flatten)]
    common: CommonSampleArgs,
    /// Stop after exactly this many sticks.
    #[arg(long, conflicts_with = "residual_tol")]
    sticks: Option<usize>,
    /// Stop once the residual mass falls below this tolerance.
    #[arg(long)]
    residual_tol: Option<f64>,
}

#[derive(Args)]
struct SamplePdArgs {
    #[command(flatten)]
    common: CommonSampleArgs,
    /// Number of ranked masses to report (top-k-exact stopping).
    #[arg(long, default_value_t = 1)]
    top_k: usize,
}

#[derive(Args)]
struct SampleDirichletArgs {
    #[command(flatten)]
    common: CommonSampleArgs,
    /// Partition cut points, e.g. 0.25,0.5,1 (last must be 1).
    #[arg(long, value_delimiter = ',')]
    cells: Vec<f64>,
    /// Base measure: "uniform" or "beta:a,b".
    #[arg(long, default_value = "uniform")]
    nu: String,
}

#[derive(Subcommand)]
enum RateCmd {
    /// Single-stick rate log 1/(1-u).
    I1 {
        #[arg(long)]
        u: f64,
    },
    /// Prefix rate log 1/(1 - sum p_i).
    Pd {
        /// Masses, e.g. 0.3,0.2 (descending unless --gem-order).
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Treat the input as unordered GEM coordinates.
        #[arg(long)]
        gem_order: bool,
    },
    /// Partition rate at a simplex point.
    Partition {
        #[arg(long)]
        alpha: f64,
        /// Cell probabilities, e.g. 0.5,0.5.
        #[arg(long, value_delimiter = ',')]
        nu: Vec<f64>,
        /// Simplex point, e.g. 0.25,0.75.
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// Measure rate by dyadic partition supremum.
    Measure {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 9)]
        depth: u32,
        /// Measure under test: "uniform" or "beta:a,b".
        #[arg(long)]
        mu: String,
        /// Base measure: "uniform" or "beta:a,b".
        #[arg(long, default_value = "uniform")]
        nu: String,
    },
    /// Relative entropy H(nu|mu).
    Entropy {
        #[arg(long)]
        mu: String,
        #[arg(long, default_value = "uniform")]
        nu: String,
    },
}

#[derive(Subcommand)]
enum DensityCmd {
    /// Log density of the k largest PD masses.
    Perman(DensityPermanArgs),
}

#[derive(Args)]
struct DensityPermanArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    scale_c: f64,
    /// Grid lo:hi:count over the largest mass (k=1 only).
    #[arg(long, conflicts_with = "point")]
    grid: Option<String>,
    /// A single point p1,p2,...,pk.
    #[arg(long, value_delimiter = ',')]
    point: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Theta-sweep slope verification of an LDP event.
    Ldp(VerifyLdpArgs),
}

#[derive(Args, Default)]
struct VerifyLdpArgs {
    /// Event spec, e.g. p1_ge:0.1, first_k_sum_ge:2:0.5, gem_x1_ge:0.5,
    /// partition_cell_ge:0:0.5 (needs --cells), weak_ball:0.2.
    #[arg(long)]
    event: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Theta grid, e.g. 20,40,60,80.
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
    /// Samples per theta point.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    tolerance_factor: Option<f64>,
    /// Partition cut points for partition events.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<f64>>,
    /// Base measure for partition / weak-ball events.
    #[arg(long)]
    nu: Option<String>,
    /// TOML config file; explicit flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_base_measure(s: &str) -> Result<BaseMeasure, CoreError> {
    if s == "uniform" {
        return Ok(BaseMeasure::uniform());
    }
    if let Some(rest) = s.strip_prefix("beta:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            let a: f64 = parts[0]
                .parse()
                .map_err(|_| CoreError::Domain(format!("bad beta parameter {:?}", parts[0])))?;
            let b: f64 = parts[1]
                .parse()
                .map_err(|_| CoreError::Domain(format!("bad beta parameter {:?}", parts[1])))?;
            return BaseMeasure::beta(a, b);
        }
    }
    Err(CoreError::Domain(format!(
        "unknown base measure {s:?} (expected \"uniform\" or \"beta:a,b\")"
    )))
}

fn parse_event(
    spec: &str,
    cells: Option<&[f64]>,
    nu: &BaseMeasure,
) -> Result<EventSpec, CoreError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let fnum = |s: &str| -> Result<f64, CoreError> {
        s.parse()
            .map_err(|_| CoreError::Domain(format!("bad number {s:?} in event spec")))
    };
    match parts.as_slice() {
        ["p1_ge", x] => EventSpec::p1_ge(fnum(x)?),
        ["gem_x1_ge", x] => EventSpec::gem_x1_ge(fnum(x)?),
        ["first_k_sum_ge", k, x] => {
            let k: usize = k
                .parse()
                .map_err(|_| CoreError::Domain(format!("bad k {k:?} in event spec")))?;
            EventSpec::first_k_sum_ge(k, fnum(x)?)
        }
        ["partition_cell_ge", idx, x] => {
            let cuts = cells.ok_or_else(|| {
                CoreError::Domain("partition_cell_ge needs --cells".into())
            })?;
            let cells = PartitionSpec::from_cuts(cuts, nu)?;
            let idx: usize = idx
                .parse()
                .map_err(|_| CoreError::Domain(format!("bad cell index {idx:?}")))?;
            EventSpec::partition_cell_ge(cells, idx, fnum(x)?)
        }
        ["weak_ball", r] => EventSpec::weak_ball(fnum(r)?, *nu),
        _ => Err(CoreError::Domain(format!("unknown event spec {spec:?}"))),
    }
}

/// CSV rows (replicate,coordinate,value); values carry 9 significant digits.
struct CsvOut {
    sink: Box<dyn Write>,
}

impl CsvOut {
    fn create(path: &Option<PathBuf>) -> Result<Self, CoreError> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(
                std::fs::File::create(p)
                    .map_err(|e| CoreError::Domain(format!("cannot create {p:?}: {e}")))?,
            ),
            None => Box::new(std::io::stdout().lock()),
        };
        Ok(Self { sink })
    }

    fn header(&mut self, header: &str) -> Result<(), CoreError> {
        writeln!(self.sink, "{header}").map_err(|e| CoreError::Numeric(e.to_string()))
    }

    fn row(&mut self, replicate: u64, coordinate: usize, value: f64) -> Result<(), CoreError> {
        writeln!(self.sink, "{replicate},{coordinate},{value:.8e}")
            .map_err(|e| CoreError::Numeric(e.to_string()))
    }
}

fn run(cli: Cli) -> Result<(), CoreError> {
    match cli.command {
        Command::Sample(cmd) => run_sample(cmd),
        Command::Rate(cmd) => run_rate(cmd),
        Command::Density(cmd) => run_density(cmd),
        Command::Verify(VerifyCmd::Ldp(args)) => run_verify(args),
        Command::CheckReport { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CoreError::Domain(format!("cannot read {path:?}: {e}")))?;
            let parsed = parse_sweep_report(&text)?;
            validate_report(&parsed)?;
            println!("ok");
            Ok(())
        }
    }
}

fn run_sample(cmd: SampleCmd) -> Result<(), CoreError> {
    match cmd {
        SampleCmd::Gem(args) => {
            let stop = match (args.sticks, args.residual_tol) {
                (Some(n), None) => StopRule::FixedCount(n),
                (None, Some(eps)) => StopRule::ResidualBelow(eps),
                (None, None) => StopRule::FixedCount(25),
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let mut out = CsvOut::create(&args.common.out)?;
            out.header("replicate,coordinate,value")?;
            for r in 0..args.common.samples {
                let mut stream = RandomStream::new(args.common.seed, r);
                let g = sample_gem(args.common.theta, args.common.alpha, stop, &mut stream)?;
                for (i, &stick) in g.sticks().iter().enumerate() {
                    out.row(r, i + 1, stick)?;
                }
            }
            Ok(())
        }
        SampleCmd::Pd(args) => {
            if args.top_k == 0 {
                return Err(CoreError::Domain("--top-k must be at least 1".into()));
            }
            let mut out = CsvOut::create(&args.common.out)?;
            out.header("replicate,coordinate,value")?;
            for r in 0..args.common.samples {
                let mut stream = RandomStream::new(args.common.seed, r);
                let g = sample_gem(
                    args.common.theta,
                    args.common.alpha,
                    StopRule::TopKExact(args.top_k),
                    &mut stream,
                )?;
                let prefix = rank_prefix(&g, args.top_k);
                for (i, &mass) in prefix.masses().iter().enumerate() {
                    out.row(r, i + 1, mass)?;
                }
            }
            Ok(())
        }
        SampleCmd::Dirichlet(args) => {
            let nu = parse_base_measure(&args.nu)?;
            let cells = PartitionSpec::from_cuts(&args.cells, &nu)?;
            let mut out = CsvOut::create(&args.common.out)?;
            out.header("replicate,coordinate,value")?;
            for r in 0..args.common.samples {
                let mut stream = RandomStream::new(args.common.seed, r);
                let v = if args.common.alpha > 0.0 {
                    sample_partition_via_subordinator(
                        args.common.theta,
                        args.common.alpha,
                        &cells,
                        &mut stream,
                    )?
                    .vector
                } else {
                    let g = sample_gem(
                        args.common.theta,
                        0.0,
                        StopRule::ResidualBelow(1e-4),
                        &mut stream,
                    )?;
                    assign_to_partition(&g, &cells, 1e-4, &mut stream)?
                };
                for (i, &mass) in v.values().iter().enumerate() {
                    out.row(r, i + 1, mass)?;
                }
            }
            Ok(())
        }
    }
}

fn print_rate(v: &rates::RateValue) {
    match v {
        rates::RateValue::Finite(x) => println!("{x:.6}"),
        rates::RateValue::Infinite => println!("inf"),
    }
}

fn run_rate(cmd: RateCmd) -> Result<(), CoreError> {
    match cmd {
        RateCmd::I1 { u } => {
            print_rate(&rates::rate_i1(u)?);
            Ok(())
        }
        RateCmd::Pd { p, gem_order } => {
            print_rate(&rates::rate_pd_prefix(&p, !gem_order)?);
            Ok(())
        }
        RateCmd::Partition { alpha, nu, x } => {
            let cells = PartitionSpec::from_probs(&nu)?;
            let xv = gempd_core::measure::PartitionVector::new(x)?;
            print_rate(&rates::rate_partition(&xv, alpha, &cells)?);
            Ok(())
        }
        RateCmd::Measure {
            alpha,
            depth,
            mu,
            nu,
        } => {
            let nu = parse_base_measure(&nu)?;
            let mu = MeasureSpec::from_base(parse_base_measure(&mu)?);
            let r = rates::rate_measure_alpha(&mu, &nu, alpha, depth)?;
            print_rate(&r.value);
            eprintln!("converged={} depths={}", r.converged, r.by_depth.len());
            Ok(())
        }
        RateCmd::Entropy { mu, nu } => {
            let nu = parse_base_measure(&nu)?;
            let mu = MeasureSpec::from_base(parse_base_measure(&mu)?);
            print_rate(&rates::relative_entropy(&nu, &mu)?);
            Ok(())
        }
    }
}

fn run_density(cmd: DensityCmd) -> Result<(), CoreError> {
    let DensityCmd::Perman(args) = cmd;
    let ctx = PermanContext::with_scale(args.theta, args.alpha, args.k, args.scale_c)?;
    let mut sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(
            std::fs::File::create(p)
                .map_err(|e| CoreError::Domain(format!("cannot create {p:?}: {e}")))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let header: Vec<String> = (1..=args.k).map(|i| format!("p{i}")).collect();
    writeln!(sink, "{},log_density", header.join(","))
        .map_err(|e| CoreError::Numeric(e.to_string()))?;
    let mut emit = |point: &[f64]| -> Result<(), CoreError> {
        let p = OrderedPoint::new(point)?;
        let d = perman_log_density(&p, &ctx)?;
        let coords: Vec<String> = point.iter().map(|v| format!("{v:.8e}")).collect();
        writeln!(sink, "{},{:.8e}", coords.join(","), d.log_density)
            .map_err(|e| CoreError::Numeric(e.to_string()))
    };
    match (&args.grid, &args.point) {
        (Some(g), None) => {
            if args.k != 1 {
                return Err(CoreError::Domain("--grid applies to k = 1 only".into()));
            }
            let parts: Vec<&str> = g.split(':').collect();
            if parts.len() != 3 {
                return Err(CoreError::Domain(format!(
                    "grid must be lo:hi:count, got {g:?}"
                )));
            }
            let lo: f64 = parts[0]
                .parse()
                .map_err(|_| CoreError::Domain("bad grid lower bound".into()))?;
            let hi: f64 = parts[1]
                .parse()
                .map_err(|_| CoreError::Domain("bad grid upper bound".into()))?;
            let count: usize = parts[2]
                .parse()
                .map_err(|_| CoreError::Domain("bad grid count".into()))?;
            if count < 2 || !(lo < hi) {
                return Err(CoreError::Domain(format!("degenerate grid {g:?}")));
            }
            for i in 0..count {
                let p = lo + (hi - lo) * i as f64 / (count - 1) as f64;
                emit(&[p])?;
            }
            Ok(())
        }
        (None, Some(point)) => emit(point),
        _ => Err(CoreError::Domain(
            "density perman needs exactly one of --grid or --point".into(),
        )),
    }
}

fn run_verify(args: VerifyLdpArgs) -> Result<(), CoreError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let event_str = args
        .event
        .or(file.event)
        .ok_or_else(|| CoreError::Domain("verify ldp needs --event (or a config file)".into()))?;
    let alpha = args
        .alpha
        .or(file.alpha)
        .ok_or_else(|| CoreError::Domain("verify ldp needs --alpha".into()))?;
    let thetas = args
        .thetas
        .or(file.thetas)
        .ok_or_else(|| CoreError::Domain("verify ldp needs --thetas".into()))?;
    let samples = args
        .samples
        .or(file.samples)
        .ok_or_else(|| CoreError::Domain("verify ldp needs --samples".into()))?;
    let nu = parse_base_measure(&args.nu.or(file.nu).unwrap_or_else(|| "uniform".into()))?;
    let cells = args.cells.or(file.cells);
    let event = parse_event(&event_str, cells.as_deref(), &nu)?;
    let config = SweepConfig {
        event,
        alpha,
        thetas,
        samples_per_theta: samples,
        seed: args.seed.or(file.seed).unwrap_or(0),
        workers: args.workers.or(file.workers).unwrap_or(1),
        tolerance_factor: args
            .tolerance_factor
            .or(file.tolerance_factor)
            .unwrap_or(1.25),
    };
    let result = run_sweep(&config)?;
    let text = render_sweep_report(&result);
    match &args.out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CoreError::Domain(format!("cannot write {p:?}: {e}")))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                CoreError::Domain(_)
                | CoreError::Ordering(_)
                | CoreError::Unsupported(_)
                | CoreError::InsufficientData(_) => 1,
                CoreError::Accuracy(_) | CoreError::Numeric(_) => 2,
            };
            ExitCode::from(code)
        }
    }
}
