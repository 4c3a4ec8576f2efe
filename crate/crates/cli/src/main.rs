use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wrt_core::experiments::{run_experiment, write_csv, ExperimentConfig};
use wrt_core::rng::seeded;
use wrt_core::rw::renewal::ladder_constant;
use wrt_core::rw::{
    barrier_prediction, barrier_probability, coupling_bound, renewal_estimate, BarrierEvent, Direction, PoissonCoupler,
    PoissonSteps, RenewalTable, SpecSteps, WalkSpec, DEFAULT_TERM_CAP,
};
use wrt_core::spine::{grow_with_spines, verify_two_point_identity, IdentityReport, VerifyMode};
use wrt_core::tilt::{barrier_indicator, many_to_one_check, many_to_two_check, tilt_params};
use wrt_core::weights::{check_assumptions, parse_weight_spec, AssumptionThresholds, IidLaw};
use wrt_core::{grow_pat, grow_wrt, solve_theta, FitnessSequence, WeightSequence};

const SEED_ENV: &str = "WRTLAB_SEED";

#[derive(Parser, Debug)]
#[command(name = "wrtlab", version, about = "Weighted recursive tree simulation and verification")]
struct Cli {
    /// Master seed; defaults to $WRTLAB_SEED, then 1.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for theta and print the expansion constants.
    Theta {
        #[arg(long)]
        gamma: f64,
    },
    /// Grow one tree and print its parent array or summary.
    Grow(GrowArgs),
    /// Check a distinguished-vertex identity by exact enumeration.
    Verify(VerifyArgs),
    /// Random walk tools.
    Rw {
        #[command(subcommand)]
        command: RwCommand,
    },
    /// Run a campaign described by a key=value config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Diagnose the growth and square-summability conditions on a weight sequence.
    CheckAssumptions {
        #[arg(long)]
        weights: String,
        #[arg(long, default_value_t = 1 << 16)]
        n_max: usize,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    Wrt,
    Pat,
    Spines,
}

#[derive(Args, Debug)]
struct GrowArgs {
    #[arg(long, value_enum, default_value_t = Model::Wrt)]
    model: Model,
    #[arg(long, default_value = "constant:1")]
    weights: String,
    #[arg(long, default_value = "constant:1")]
    fitness: String,
    #[arg(long)]
    n: usize,
    /// Print height and diameter instead of the parent array.
    #[arg(long)]
    summary: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Identity {
    ManyToOne,
    ManyToTwo,
    TwoPoint,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    identity: Identity,
    #[arg(long)]
    n: usize,
    /// Weight spec; defaults to i.i.d. exponential weights drawn from the seed.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
}

#[derive(Subcommand, Debug)]
enum RwCommand {
    /// Estimate a ladder renewal function, or the long-run ladder constants.
    Renewal {
        #[arg(long, default_value = "ascending")]
        direction: String,
        #[arg(long, default_value_t = 20)]
        x_max: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1_000_000)]
        step_cap: u64,
        /// Print the closed-form table instead of simulating.
        #[arg(long)]
        exact: bool,
        /// Estimate rho and rho^- from independent ladder epochs.
        #[arg(long)]
        constants: bool,
        #[arg(long, default_value_t = 10_000_000)]
        epochs: usize,
        #[arg(long, default_value_t = 100_000)]
        epoch_cap: u64,
    },
    /// Couple a blocked Bernoulli walk with the Poisson(1) - 1 walk.
    Couple {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
    },
    /// Two-barrier probability against its asymptotic prediction.
    Barrier {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long = "K", default_value_t = 5)]
        k: u32,
        #[arg(long = "L", default_value_t = 0, allow_negative_numbers = true)]
        l: i64,
        #[arg(long, default_value_t = 3)]
        a: u32,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        replicas: u64,
    },
}

/// Uniform blocks of `block_size` entries `1 / block_size`; size 0 means
/// exact Poisson(1) - 1 steps where allowed.
#[derive(Args, Debug)]
struct SpecArgs {
    #[arg(long, default_value_t = 0)]
    block_size: usize,
}

enum Failure {
    Usage(String),
    Scientific(String),
}

impl From<wrt_core::Error> for Failure {
    fn from(e: wrt_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn open_out(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| Failure::Usage(format!("{SEED_ENV}={v}: {e}"))),
        Err(_) => Ok(1),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scientific(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let seed = resolve_seed(cli.seed)?;
    match cli.command {
        Command::Theta { gamma } => {
            let c = solve_theta(gamma)?;
            let mut out = open_out(&cli.out)?;
            writeln!(out, "{c}")?;
            out.flush()?;
            Ok(())
        }
        Command::Grow(args) => grow(args, seed, &cli.out),
        Command::Verify(args) => verify(args, seed, &cli.out),
        Command::Rw { command } => rw(command, seed, &cli.out),
        Command::Experiment { config } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if cli.seed.is_some() || std::env::var(SEED_ENV).is_ok() {
                cfg.seed = seed;
            }
            if cli.out.is_some() {
                cfg.out = cli.out.clone();
            }
            let result = run_experiment(&cfg)?;
            let mut out = open_out(&cfg.out)?;
            write_csv(&result.rows, &mut out)?;
            out.flush()?;
            if result.passed {
                Ok(())
            } else {
                Err(Failure::Scientific(format!("{} campaign checks did not hold", cfg.experiment)))
            }
        }
        Command::CheckAssumptions { weights, n_max } => {
            let seq = parse_weight_spec(&weights)?;
            let report = check_assumptions(&seq, n_max, &AssumptionThresholds::default())?;
            let mut out = open_out(&cli.out)?;
            report.write_csv(&mut out)?;
            out.flush()?;
            let failed: Vec<String> = [("H1", &report.h1), ("H2", &report.h2)]
                .iter()
                .filter_map(|(name, v)| v.as_ref().filter(|v| !v.pass).map(|v| format!("{name}: {}", v.detail)))
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Scientific(failed.join("; ")))
            }
        }
    }
}

fn grow(args: GrowArgs, seed: u64, out_path: &Option<PathBuf>) -> Outcome {
    if args.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let mut out = open_out(out_path)?;
    let tree = match args.model {
        Model::Wrt => grow_wrt(&parse_weight_spec(&args.weights)?, args.n, &mut rng),
        Model::Pat => grow_pat(&FitnessSequence::parse(&args.fitness)?, args.n, &mut rng),
        Model::Spines => {
            let run = grow_with_spines(&parse_weight_spec(&args.weights)?, args.n, &mut rng);
            writeln!(out, "d_label={}", run.d_label)?;
            writeln!(out, "dt_label={}", run.dt_label)?;
            writeln!(out, "i_meet={}", run.i_meet)?;
            run.tree
        }
    };
    if args.summary {
        writeln!(out, "n={}", tree.n())?;
        writeln!(out, "height={}", tree.height())?;
        writeln!(out, "diameter={}", tree.diameter())?;
    } else {
        tree.write_parent_array(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

type Functional = (&'static str, Box<dyn Fn(&[u32]) -> f64>);

fn functionals() -> Vec<Functional> {
    vec![
        ("constant", Box::new(|_: &[u32]| 1.0)),
        ("final_height", Box::new(|h: &[u32]| *h.last().unwrap() as f64)),
        ("final_height_squared", Box::new(|h: &[u32]| (*h.last().unwrap() as f64).powi(2))),
        ("reached_two", Box::new(|h: &[u32]| (*h.last().unwrap() >= 2) as u8 as f64)),
        ("barrier_half_slope", Box::new(barrier_indicator(0.5, 0.5))),
        ("barrier_flat", Box::new(barrier_indicator(1.0, 0.0))),
    ]
}

fn verify(args: VerifyArgs, seed: u64, out_path: &Option<PathBuf>) -> Outcome {
    let seq = match &args.weights {
        Some(s) => parse_weight_spec(s)?,
        None => WeightSequence::iid(IidLaw::Exponential { mean: 1.0 }, seed)?,
    };
    let mut out = open_out(out_path)?;
    let mut reports: Vec<(String, IdentityReport)> = Vec::new();
    match args.identity {
        Identity::ManyToOne => {
            for (name, f) in functionals() {
                reports.push((name.into(), many_to_one_check(&seq, args.theta, args.n, f)?));
            }
        }
        Identity::ManyToTwo => {
            let marks: Vec<(&str, Box<dyn Fn(usize) -> f64>)> = vec![
                ("one", Box::new(|_| 1.0)),
                ("root", Box::new(|l| (l == 1) as u8 as f64)),
                ("label", Box::new(|l| l as f64)),
            ];
            for (fname, big_f) in functionals() {
                for (mname, f) in &marks {
                    let r = many_to_two_check(&seq, args.theta, args.n, &big_f, f)?;
                    reports.push((format!("{fname}/{mname}"), r));
                }
            }
        }
        Identity::TwoPoint => {
            let phis: Vec<(&str, Box<dyn Fn(&wrt_core::Tree, usize, usize) -> f64>)> = vec![
                ("constant", Box::new(|_, _, _| 1.0)),
                ("mrca_is_root", Box::new(|t, u, v| (t.mrca(u, v) == 1) as u8 as f64)),
                ("height_sum", Box::new(|t, u, v| (t.vertex_height(u) + t.vertex_height(v)) as f64)),
                ("mrca_label", Box::new(|t, u, v| t.mrca(u, v) as f64)),
            ];
            for (name, phi) in phis {
                reports.push((name.into(), verify_two_point_identity(&seq, args.n, phi, VerifyMode::Exact)?));
            }
        }
    }
    let params = tilt_params(&seq, args.theta, args.n)?;
    writeln!(out, "n={}", args.n)?;
    writeln!(out, "theta={}", args.theta)?;
    writeln!(out, "z_n={}", params.z(args.n))?;
    for (name, r) in &reports {
        writeln!(out, "{name}: lhs={} rhs={} rel_diff={:.3e}", r.lhs, r.rhs, r.rel_diff)?;
    }
    let max_disc = reports.iter().map(|(_, r)| r.rel_diff.min(r.abs_diff)).fold(0.0, f64::max);
    writeln!(out, "max_discrepancy={max_disc:.3e}")?;
    out.flush()?;
    if reports.iter().any(|(_, r)| !r.holds(args.tolerance)) {
        Err(Failure::Scientific(format!("discrepancy above {}", args.tolerance)))
    } else {
        Ok(())
    }
}

fn rw(cmd: RwCommand, seed: u64, out_path: &Option<PathBuf>) -> Outcome {
    let mut out = open_out(out_path)?;
    match cmd {
        RwCommand::Renewal {
            direction,
            x_max,
            samples,
            step_cap,
            exact,
            constants,
            epochs,
            epoch_cap,
        } => {
            if constants {
                writeln!(out, "name,value,stderr,epochs,censored")?;
                for (name, dir) in [("rho", Direction::Ascending), ("rho_minus", Direction::Descending)] {
                    let c = ladder_constant(dir, epochs, epoch_cap, seed);
                    writeln!(out, "{name},{},{},{},{}", c.rho, c.rho_stderr, c.epochs, c.censored)?;
                }
            } else {
                let dir: Direction = direction.parse()?;
                let table = if exact {
                    RenewalTable::exact(dir, x_max)
                } else {
                    renewal_estimate(dir, x_max, samples, step_cap, seed)?
                };
                table.write_csv(&mut out)?;
            }
        }
        RwCommand::Couple { spec, m, n, replicas } => {
            if spec.block_size == 0 {
                return Err(Failure::Usage("couple needs --block-size >= 1".into()));
            }
            let ws = WalkSpec::uniform_blocks(n, spec.block_size)?;
            let coupler = PoissonCoupler::new(&ws, m, n, DEFAULT_TERM_CAP)?;
            let mut rng = seeded(seed);
            let hits = (0..replicas)
                .filter(|_| coupler.sample(&mut rng).first_disagreement.is_some())
                .count();
            let freq = hits as f64 / replicas as f64;
            let bound = coupling_bound(&ws, m, n)?;
            let sigma = (bound.min(1.0) * (1.0 - bound.min(1.0)) / replicas as f64).sqrt();
            writeln!(out, "empirical_disagreement={freq}")?;
            writeln!(out, "exact_disagreement={}", coupler.exact_disagreement_probability())?;
            writeln!(out, "bound={bound}")?;
            out.flush()?;
            if freq > bound + 3.0 * sigma {
                return Err(Failure::Scientific("disagreement above the bound".into()));
            }
        }
        RwCommand::Barrier {
            spec,
            k,
            l,
            a,
            lambda,
            n,
            replicas,
        } => {
            let event = BarrierEvent { k, l, a, lambda, n };
            let est = if spec.block_size == 0 {
                barrier_probability(&PoissonSteps::new(), &event, replicas, seed)?
            } else {
                let ws = WalkSpec::uniform_blocks(n, spec.block_size)?;
                barrier_probability(&SpecSteps::new(&ws, DEFAULT_TERM_CAP)?, &event, replicas, seed)?
            };
            let r = RenewalTable::exact(Direction::Ascending, k as usize);
            let rm = RenewalTable::exact(Direction::Descending, a as usize);
            let pred = barrier_prediction(&r, &rm, &event)?;
            writeln!(out, "probability={}", est.probability)?;
            writeln!(out, "ci_low={}", est.ci_low)?;
            writeln!(out, "ci_high={}", est.ci_high)?;
            writeln!(out, "successes={}", est.successes)?;
            writeln!(out, "replicas={}", est.replicas)?;
            writeln!(out, "prediction={pred}")?;
            writeln!(out, "ratio={}", est.probability / pred)?;
        }
    }
    out.flush()?;
    Ok(())
}
