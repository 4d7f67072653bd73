use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use specbal_core::instance::{generate, instance_to_json, read_instance, write_instance, FamilyParams};
use specbal_core::params::{bbvh_bound, chernoff_bound, DEFAULT_BBVH_CONSTANT};
use specbal_core::partial::theoretical_delta;
use specbal_core::verify::{all_passed, verify_instance};
use specbal_core::{
    brute_force_min, random_coloring_stats, solve_seeded, ConcentrationParams, Family, Instance, PartialColoringConfig,
    SolveConfig,
};

const BRUTE_FORCE_MAX_N: usize = specbal_core::baselines::BRUTE_FORCE_LIMIT;

#[derive(Parser, Debug)]
#[command(
    name = "specbal",
    version,
    about = "Balance signed sums of symmetric matrices in operator norm"
)]
struct Cli {
    /// Worker threads for sampling; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance from one of the built-in families.
    Gen(GenArgs),
    /// Compute a full coloring and write a JSON report.
    Solve(SolveArgs),
    /// Compare the solver against random signs, brute force and the norm bounds.
    Bench(BenchArgs),
    /// Check the numerical invariants on an instance.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// diagonal-spencer, lower-bound, low-rank or block-diagonal.
    #[arg(value_name = "FAMILY", conflicts_with = "family")]
    family_name: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: usize,
    /// Matrix dimension; defaults to n.
    #[arg(long)]
    d: Option<usize>,
    /// Rank of each matrix (low-rank family).
    #[arg(long)]
    r: Option<usize>,
    /// Block size (block-diagonal family).
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Instance file; printed to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolverFlags {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "c-bound")]
    c_bound: Option<f64>,
    #[arg(long = "max-restarts")]
    max_restarts: Option<usize>,
    /// Finish by exhaustive search once at most this many coordinates remain.
    #[arg(long)]
    endgame: Option<usize>,
    /// Use the constants from the analysis instead of the desk-scale ones.
    #[arg(long)]
    theoretical: bool,
}

impl SolverFlags {
    fn config(&self) -> SolveConfig {
        let mut partial = if self.theoretical {
            PartialColoringConfig::theoretical()
        } else {
            PartialColoringConfig::practical()
        };
        if let Some(eps) = self.epsilon {
            partial.epsilon = eps;
            if self.theoretical {
                partial.delta = theoretical_delta(eps);
            }
        }
        if let Some(c) = self.c_bound {
            partial.c_bound = c;
        }
        if let Some(m) = self.max_restarts {
            partial.max_restarts = m;
            partial.escalate_every = partial.escalate_every.min(m).max(1);
        }
        let mut cfg = SolveConfig {
            partial,
            ..SolveConfig::default()
        };
        if let Some(k) = self.endgame {
            cfg.endgame_threshold = k;
        }
        cfg
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; printed to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct BenchArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV file; printed to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    instance: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Verify,
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Verify => 1,
            Failure::Solver(_) => 3,
        }
    }
}

impl From<specbal_core::Error> for Failure {
    fn from(e: specbal_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    Ok(read_instance(path)?)
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let name = args
        .family_name
        .or(args.family)
        .ok_or_else(|| Failure::Usage("a family is required".into()))?;
    let family: Family = name.parse()?;
    let seed = seed_or_entropy(args.seed);
    let inst = generate(
        family,
        FamilyParams {
            n: args.n,
            d: args.d,
            rank: args.r,
            block: args.h,
            seed,
        },
    )?;
    let p = ConcentrationParams::compute(&inst)?;
    let summary = format!(
        "n = {}\nd = {}\nsigma = {:.6}\nv = {:.6}\nf = {:.6}\n",
        p.n, p.d, p.sigma, p.v, p.f
    );
    match &args.out {
        Some(path) => {
            write_instance(&inst, path)?;
            print!("{summary}");
        }
        None => {
            print!("{}", instance_to_json(&inst));
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), Failure> {
    let inst = load(&args.instance)?;
    let cfg = args.solver.config();
    cfg.validate()?;
    let seed = seed_or_entropy(args.seed);
    match solve_seeded(&inst, &cfg, seed) {
        Ok(report) => {
            info!(
                "discrepancy {:.6} over {} rounds",
                report.discrepancy,
                report.rounds.len()
            );
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            emit(args.out.as_deref(), &text)
        }
        Err(failure) => {
            let partial = serde_json::json!({
                "version": env!("CARGO_PKG_VERSION"),
                "label": inst.label,
                "n": inst.n(),
                "d": inst.d(),
                "seed": seed,
                "error": failure.error.to_string(),
                "rounds": failure.rounds,
                "x": failure.x,
                "active": failure.active,
                "config": cfg,
            });
            let text = serde_json::to_string_pretty(&partial).expect("report serializes") + "\n";
            emit(args.out.as_deref(), &text)?;
            Err(Failure::Solver(failure.error.to_string()))
        }
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let inst = load(&args.instance)?;
    let cfg = args.solver.config();
    cfg.validate()?;
    if args.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let seed = seed_or_entropy(args.seed);
    let root_n = (inst.n() as f64).sqrt();
    let normalized = |v: f64| {
        if root_n > 0.0 {
            format!("{:.6}", v / root_n)
        } else {
            String::new()
        }
    };

    let mut rows: Vec<[String; 5]> = Vec::new();
    let start = Instant::now();
    let report = solve_seeded(&inst, &cfg, seed).map_err(|e| Failure::Solver(e.to_string()))?;
    rows.push([
        "solver".into(),
        format!("{:.6}", report.discrepancy),
        normalized(report.discrepancy),
        start.elapsed().as_millis().to_string(),
        seed.to_string(),
    ]);

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = random_coloring_stats(&inst, args.samples, &mut rng)?;
    rows.push([
        "random".into(),
        format!("{:.6}±{:.6}", est.mean, est.stderr),
        normalized(est.mean),
        start.elapsed().as_millis().to_string(),
        seed.to_string(),
    ]);

    if inst.n() <= BRUTE_FORCE_MAX_N {
        let start = Instant::now();
        let (_, best) = brute_force_min(&inst)?;
        rows.push([
            "brute-force".into(),
            format!("{best:.6}"),
            normalized(best),
            start.elapsed().as_millis().to_string(),
            String::new(),
        ]);
    } else {
        rows.push([
            "brute-force".into(),
            format!("skipped (n>{BRUTE_FORCE_MAX_N})"),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }

    let start = Instant::now();
    let params = ConcentrationParams::compute(&inst)?;
    let elapsed = start.elapsed().as_millis().to_string();
    for (name, bound) in [
        ("chernoff_bound", chernoff_bound(&params)),
        ("bbvh_bound", bbvh_bound(&params, DEFAULT_BBVH_CONSTANT)),
    ] {
        let row = match bound {
            Ok(b) => [
                name.into(),
                format!("{b:.6}"),
                normalized(b),
                elapsed.clone(),
                String::new(),
            ],
            Err(_) => [
                name.into(),
                "n/a (d<2)".into(),
                String::new(),
                elapsed.clone(),
                String::new(),
            ],
        };
        rows.push(row);
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["method", "discrepancy", "normalized", "runtime_ms", "seed"])
        .map_err(|e| Failure::Usage(e.to_string()))?;
    for row in &rows {
        writer.write_record(row).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
    emit(args.out.as_deref(), &String::from_utf8(bytes).expect("csv is utf-8"))
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let inst = load(&args.instance)?;
    let seed = seed_or_entropy(args.seed);
    let checks = verify_instance(&inst, seed)?;
    for c in &checks {
        let status = match c.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!(
            "{status} {:<24} residual {:.3e} (tol {:.1e})  {}",
            c.name, c.residual, c.tolerance, c.detail
        );
    }
    if all_passed(&checks) {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SPECBAL_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) | Failure::Solver(msg) => eprintln!("error: {msg}"),
                Failure::Verify => eprintln!("verification failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
