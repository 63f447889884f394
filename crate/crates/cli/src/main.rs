use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use byzline::adversary::{adversary_algorithm, AttackConfig, AttackVerdict};
use byzline::analysis::analyze;
use byzline::experiment::{self, parse_config_file, ExperimentConfig, SweepRow};
use byzline::protocol::algorithm_by_name;
use byzline::scheduler::default_fairness_window;
use byzline::trace::Trace;
use byzline::Scalar;

/// Relative output paths are resolved against this directory when set.
const OUT_DIR_ENV: &str = "BYZLINE_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "byzline",
    version,
    about = "Byzantine-resilient convergence on a line: simulate, attack, check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and analyse its trace
    Simulate(ConfigArgs),
    /// Run the lower-bound construction against a victim algorithm
    Attack(AttackArgs),
    /// Run a configuration over a grid of (n, f) cells and seeds
    Sweep(SweepArgs),
    /// Re-run the analysis on an existing trace file
    Check(CheckArgs),
}

#[derive(Args, Default, Clone)]
struct ConfigArgs {
    /// key = value file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    f: Option<String>,
    /// Comma separated list, or `random`
    #[arg(long)]
    positions: Option<String>,
    /// Range for random positions, `lo,hi`
    #[arg(long)]
    range: Option<String>,
    /// Preset `A,B,X`
    #[arg(long)]
    figure1: Option<String>,
    /// One value for every robot or a comma separated list
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// sync|kbounded|async|script
    #[arg(long)]
    scheduler: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// Integer or `unbounded`
    #[arg(long)]
    interleave_depth: Option<String>,
    #[arg(long)]
    weights: Option<String>,
    /// Events such as `look:0;compute:0;move:0:1/2`
    #[arg(long)]
    script: Option<String>,
    /// none|static|random|attack
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    teleport_range: Option<String>,
    /// algo4|fulltrim|stay
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Maximum number of events
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    rel_epsilon: Option<String>,
    #[arg(long)]
    window: Option<String>,
    /// Trace CSV output
    #[arg(long)]
    trace: Option<String>,
    /// Report JSON output
    #[arg(long)]
    report: Option<String>,
}

impl ConfigArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let fields: [(&'static str, &Option<String>); 22] = [
            ("n", &self.n),
            ("f", &self.f),
            ("positions", &self.positions),
            ("range", &self.range),
            ("figure1", &self.figure1),
            ("delta", &self.delta),
            ("model", &self.model),
            ("scheduler", &self.scheduler),
            ("k", &self.k),
            ("interleave_depth", &self.interleave_depth),
            ("weights", &self.weights),
            ("script", &self.script),
            ("adversary", &self.adversary),
            ("teleport_range", &self.teleport_range),
            ("algorithm", &self.algorithm),
            ("seed", &self.seed),
            ("budget", &self.budget),
            ("epsilon", &self.epsilon),
            ("rel_epsilon", &self.rel_epsilon),
            ("window", &self.window),
            ("trace", &self.trace),
            ("report", &self.report),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            pairs = parse_config_file(&text)?;
        }
        pairs.extend(self.pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
        let config = ExperimentConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        Ok(config)
    }
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, default_value_t = 9)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    f: usize,
    #[arg(long = "A", default_value = "0")]
    a: String,
    #[arg(long = "B", default_value = "1")]
    b: String,
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, default_value_t = 6)]
    outer_loops: usize,
    /// Maximum activations per push
    #[arg(long, default_value_t = 10_000)]
    cap: usize,
    #[arg(long, default_value = "algo4")]
    victim: String,
    #[arg(long)]
    trace_out: Option<String>,
    #[arg(long)]
    report: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma separated robot counts
    #[arg(long, default_value = "")]
    ns: String,
    /// Comma separated fault counts, one per n, or `auto` for (n - 1) / 5
    #[arg(long, default_value = "auto")]
    fs: String,
    /// Number of seeds, starting at --first-seed
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// JSON output of the summary rows
    #[arg(long)]
    out: Option<String>,
    #[command(flatten)]
    base: ConfigArgs,
}

#[derive(Args)]
struct CheckArgs {
    /// Trace CSV to analyse
    trace: PathBuf,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long, default_value = "1/1000000")]
    rel_epsilon: String,
    #[arg(long)]
    window: Option<usize>,
    /// Also check the half-distance destination bound
    #[arg(long)]
    half_bound: bool,
    #[arg(long)]
    report: Option<String>,
}

fn output_path(path: &str) -> PathBuf {
    let path = Path::new(path);
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn write_json(value: &impl serde::Serialize, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_scalar(flag: &str, text: &str) -> Result<Scalar> {
    text.parse().with_context(|| format!("--{flag}: cannot parse `{text}`"))
}

fn simulate(args: &ConfigArgs) -> Result<bool> {
    let config = args.load()?;
    for w in config.warnings() {
        eprintln!("warning: {w}");
    }
    let outcome = experiment::run(&config)?;
    if let Some(path) = &config.trace {
        write_trace(&outcome.trace, &output_path(&path.to_string_lossy()))?;
    }
    let report_path = config.report.as_ref().map(|p| output_path(&p.to_string_lossy()));
    write_json(&outcome.report, report_path.as_deref())?;
    Ok(outcome.report.passed())
}

fn attack(args: &AttackArgs) -> Result<bool> {
    let Some(victim) = algorithm_by_name(&args.victim) else {
        bail!("--victim: unknown algorithm `{}`", args.victim);
    };
    let mut config = AttackConfig::new(args.n, args.f, parse_scalar("A", &args.a)?, parse_scalar("B", &args.b)?);
    config.x0 = args.x0.as_deref().map(|x| parse_scalar("x0", x)).transpose()?;
    config.delta = args.delta.as_deref().map(|d| parse_scalar("delta", d)).transpose()?;
    config.outer_loops = args.outer_loops;
    config.cap = args.cap;
    let report = adversary_algorithm(&config, victim.as_ref())?;
    if let Some(path) = &args.trace_out {
        write_trace(&report.trace, &output_path(path))?;
    }
    eprintln!(
        "min separation {} (bound {}), verdict {:?}",
        report.min_separation, report.separation_bound, report.verdict
    );
    write_json(&report, args.report.as_deref().map(output_path).as_deref())?;
    Ok(report.verdict == AttackVerdict::NonConvergenceDemonstrated)
}

fn sweep(args: &SweepArgs) -> Result<bool> {
    let base = args.base.load()?;
    let ns: Vec<usize> = args
        .ns
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().with_context(|| format!("--ns: bad count `{s}`")))
        .collect::<Result<_>>()?;
    let fs: Vec<usize> = if args.fs == "auto" {
        ns.iter().map(|n| n.saturating_sub(1) / 5).collect()
    } else {
        let fs: Vec<usize> = args
            .fs
            .split(',')
            .map(|s| s.trim().parse().with_context(|| format!("--fs: bad count `{s}`")))
            .collect::<Result<_>>()?;
        match fs.len() {
            1 => vec![fs[0]; ns.len()],
            l if l == ns.len() => fs,
            _ => bail!("--fs needs one value or one per n"),
        }
    };
    let cells: Vec<(usize, usize)> = ns.into_iter().zip(fs).collect();
    let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
    let rows = experiment::sweep(&base, &cells, &seeds);
    print_table(&rows);
    if let Some(path) = &args.out {
        write_json(&rows, Some(&output_path(path)))?;
    }
    Ok(rows.iter().all(|r| r.errors == 0))
}

fn print_table(rows: &[SweepRow]) {
    println!(
        "{:>4} {:>3} {:>5} {:>9} {:>6} {:>7} {:>12} {:>10}",
        "n", "f", "runs", "converged", "errors", "rate", "mean_t_eps", "worst_alpha"
    );
    for r in rows {
        println!(
            "{:>4} {:>3} {:>5} {:>9} {:>6} {:>6.1}% {:>12} {:>10}",
            r.n,
            r.f,
            r.runs,
            r.converged,
            r.errors,
            100.0 * r.convergence_rate,
            r.mean_t_epsilon.map_or("-".to_string(), |t| format!("{t:.1}")),
            r.worst_alpha
                .as_ref()
                .map_or("-".to_string(), |a| format!("{:.4}", a.to_f64())),
        );
    }
}

fn check(args: &CheckArgs) -> Result<bool> {
    let file = File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let trace = Trace::read_csv(std::io::BufReader::new(file))?;
    let epsilon = match &args.epsilon {
        Some(e) => parse_scalar("epsilon", e)?,
        None => {
            let rel = parse_scalar("rel-epsilon", &args.rel_epsilon)?;
            let d = trace.diam_u(0);
            if d.is_zero() {
                rel
            } else {
                &d * &rel
            }
        }
    };
    let n = trace.params().n;
    let window = args
        .window
        .unwrap_or_else(|| default_fairness_window(n))
        .min(trace.len().max(1));
    let report = analyze(&trace, &epsilon, window, args.half_bound)?;
    write_json(&report, args.report.as_deref().map(output_path).as_deref())?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Attack(args) => attack(args),
        Command::Sweep(args) => sweep(args),
        Command::Check(args) => check(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
