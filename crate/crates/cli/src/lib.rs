//! Command-line front end. [`run_cli`] does all the work so tests can drive it
//! without spawning a process.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use purgemerge::codec::{format_grid, parse_generic, parse_sudoku, parse_sudoku_corpus, CspInstance, ParseError};
use purgemerge::graph::ClusterGraph;
use purgemerge::merge::{MergeOrder, Metric};
use purgemerge::oracle::{brute_force_solutions, check_assignment, BudgetExceeded, SearchBudget};
use purgemerge::solver::{
    enumerate_solutions, purge_and_merge_observed, SolveObserver, SolverConfig, DEFAULT_ENUMERATION_CAP,
    DEFAULT_MAX_TABLE_ENTRIES, DEFAULT_THRESHOLD_INIT,
};
use purgemerge::{Error, Value, VarId};
use rayon::prelude::*;
use serde::Serialize;

pub const EXIT_SOLVED: i32 = 0;
pub const EXIT_UNSATISFIABLE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "purgemerge", version, about = "Purge-and-merge constraint solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve every puzzle in a file and print the solution grid(s).
    Solve(SolveArgs),
    /// Check proposed solutions against a puzzle's clauses.
    Verify(VerifyArgs),
    /// Print every solution (same as `solve --all-solutions`).
    Enumerate(SolveArgs),
    /// Run a corpus under several settings and print one stats row per run.
    Bench(BenchArgs),
    /// Enumerate solutions with plain backtracking.
    Oracle(OracleArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Sudoku,
    Generic,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum StatsMode {
    Json,
    None,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Puzzle file, `-` for stdin.
    file: PathBuf,
    /// Input format; by default `.json` files are generic documents and anything else is Sudoku text.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value = "gravity")]
    metric: Metric,
    #[arg(long, default_value = "strongest-first")]
    merge_order: MergeOrder,
    /// Multiplier on the widest initial clause entropy.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_INIT)]
    threshold_init: f64,
    /// Bits added to the threshold per round [default: log2 of the largest domain].
    #[arg(long)]
    threshold_growth: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_TABLE_ENTRIES)]
    max_table_entries: usize,
    /// Per-puzzle time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Accepted for reproducible scripts; the solver is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Print every solution instead of the first.
    #[arg(long)]
    all_solutions: bool,
    /// Most solutions to print with --all-solutions.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    #[arg(long, value_enum, default_value = "none")]
    stats: StatsMode,
    /// Write each round's cluster graph to stderr.
    #[arg(long)]
    dump_graph: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// One candidate per line: a grid line for Sudoku, `name=value` pairs for generic documents.
    solution: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Corpus files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Metrics to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "gravity")]
    metric: Vec<Metric>,
    #[arg(long, default_value = "strongest-first")]
    merge_order: MergeOrder,
    #[arg(long, value_delimiter = ',', default_value = "1.5")]
    threshold_init: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    threshold_growth: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_TABLE_ENTRIES)]
    max_table_entries: usize,
    #[arg(long)]
    timeout: Option<f64>,
    /// Solutions counted per run.
    #[arg(long, default_value_t = 1)]
    cap: usize,
    /// Worker threads [default: one per core].
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1_000_000)]
    cap: usize,
    #[arg(long, default_value_t = 50_000_000)]
    max_nodes: u64,
}

/// One stats row. Field names are part of the output format.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    pub puzzle: String,
    pub metric: String,
    pub threshold_init: f64,
    pub threshold_growth: Option<f64>,
    /// `solved`, `unsatisfiable`, `blow-up` or `budget`.
    pub outcome: &'static str,
    pub wall_time_secs: f64,
    pub rounds: usize,
    pub peak_table_entries: usize,
    /// log2 of `peak_table_entries`.
    pub peak_table_bits: f64,
    pub solution_count: usize,
    pub truncated: bool,
}

struct Outcome {
    stats: RunStats,
    solutions: Vec<Vec<Value>>,
    code: i32,
    graphs: String,
}

fn error_outcome(e: &Error) -> (&'static str, i32) {
    match e {
        Error::Unsatisfiable(_) => ("unsatisfiable", EXIT_UNSATISFIABLE),
        Error::TableBlowUp { .. } => ("blow-up", EXIT_BUDGET),
        Error::IterationBudget { .. } | Error::Timeout | Error::Contract(_) => ("budget", EXIT_BUDGET),
    }
}

fn bits(entries: usize) -> f64 {
    if entries == 0 {
        0.0
    } else {
        (entries as f64).log2()
    }
}

struct GraphDump<'a> {
    instance: &'a CspInstance,
    text: Option<String>,
}

impl SolveObserver for GraphDump<'_> {
    fn on_graph(&mut self, round: usize, graph: &ClusterGraph) {
        if let Some(text) = &mut self.text {
            let _ = writeln!(text, "# round {round}");
            text.push_str(&graph.dump(|v| self.instance.name(v).to_string()));
        }
    }
}

fn solve_one(label: &str, instance: &CspInstance, config: &SolverConfig, cap: usize, dump_graph: bool) -> Outcome {
    let started = Instant::now();
    let mut observer = GraphDump {
        instance,
        text: dump_graph.then(String::new),
    };
    let result = purge_and_merge_observed(instance, config, &mut observer);
    let mut stats = RunStats {
        puzzle: label.to_string(),
        metric: config.metric.name().to_string(),
        threshold_init: config.threshold_init,
        threshold_growth: config.threshold_growth,
        outcome: "solved",
        wall_time_secs: 0.0,
        rounds: 0,
        peak_table_entries: 0,
        peak_table_bits: 0.0,
        solution_count: 0,
        truncated: false,
    };
    let (solutions, code) = match result {
        Ok(report) => {
            let found = enumerate_solutions(&report, cap);
            stats.rounds = report.rounds.len();
            stats.peak_table_entries = report.peak_table_entries;
            stats.solution_count = found.solutions.len();
            stats.truncated = found.truncated;
            if found.solutions.is_empty() {
                stats.outcome = "unsatisfiable";
                (found.solutions, EXIT_UNSATISFIABLE)
            } else {
                (found.solutions, EXIT_SOLVED)
            }
        }
        Err(failure) => {
            let (outcome, code) = error_outcome(&failure.error);
            stats.outcome = outcome;
            stats.rounds = failure.rounds.len();
            stats.peak_table_entries = failure.peak_table_entries;
            (Vec::new(), code)
        }
    };
    stats.peak_table_bits = bits(stats.peak_table_entries);
    stats.wall_time_secs = started.elapsed().as_secs_f64();
    Outcome {
        stats,
        solutions,
        code,
        graphs: observer.text.unwrap_or_default(),
    }
}

fn read_input(path: &Path) -> Result<String, String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| format!("stdin: {e}"))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn detect_format(path: &Path, format: Option<Format>) -> Format {
    format.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Generic,
        _ => Format::Sudoku,
    })
}

/// Reads every puzzle in a file, labelled `path:index` (1-based).
fn load_puzzles(path: &Path, format: Option<Format>) -> Result<(Format, Vec<(String, CspInstance)>), String> {
    let text = read_input(path)?;
    let format = detect_format(path, format);
    let parse_err = |e: ParseError| format!("{}: {e}", path.display());
    let puzzles = match format {
        Format::Generic => vec![parse_generic(&text).map_err(parse_err)?],
        Format::Sudoku => {
            let lines = parse_sudoku_corpus(&text);
            if lines.iter().any(|r| matches!(r, Err(ParseError::Length(_)))) {
                // Not one puzzle per line: treat the whole file as a single grid.
                vec![parse_sudoku(&text).map_err(parse_err)?]
            } else {
                lines.into_iter().collect::<Result<Vec<_>, _>>().map_err(parse_err)?
            }
        }
    };
    if puzzles.is_empty() {
        return Err(format!("{}: no puzzles found", path.display()));
    }
    let label = path.display().to_string();
    Ok((
        format,
        puzzles
            .into_iter()
            .enumerate()
            .map(|(i, p)| (format!("{label}:{}", i + 1), p))
            .collect(),
    ))
}

fn render(format: Format, instance: &CspInstance, values: &[Value]) -> String {
    match format {
        Format::Sudoku => format_grid(values),
        Format::Generic => values
            .iter()
            .enumerate()
            .map(|(i, x)| format!("{}={x}", instance.name(VarId(i as u32))))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn parse_candidate(format: Format, instance: &CspInstance, line: &str) -> Result<Vec<Value>, String> {
    match format {
        Format::Sudoku => line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as Value)
                    .ok_or_else(|| format!("invalid character {c:?}"))
            })
            .collect(),
        Format::Generic => {
            let mut values: Vec<Option<Value>> = vec![None; instance.num_vars()];
            for token in line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
            {
                let (name, value) = token
                    .split_once('=')
                    .ok_or_else(|| format!("expected name=value, found `{token}`"))?;
                let var = instance.var(name).ok_or_else(|| format!("unknown variable `{name}`"))?;
                values[var.index()] = Some(value.parse().map_err(|_| format!("bad value in `{token}`"))?);
            }
            values
                .iter()
                .enumerate()
                .map(|(i, v)| v.ok_or_else(|| format!("no value for `{}`", instance.name(VarId(i as u32)))))
                .collect()
        }
    }
}

fn solver_config(args: &SolverArgs) -> SolverConfig {
    SolverConfig {
        threshold_init: args.threshold_init,
        threshold_growth: args.threshold_growth,
        max_table_entries: args.max_table_entries,
        metric: args.metric,
        merge_order: args.merge_order,
        timeout: args.timeout.map(Duration::from_secs_f64),
        ..SolverConfig::default()
    }
}

fn check_timeout(t: Option<f64>) -> Result<(), String> {
    match t {
        Some(s) if !(s.is_finite() && s > 0.0) => Err("--timeout must be a positive number of seconds".into()),
        _ => Ok(()),
    }
}

/// Runs the command line `args` (program name first) and returns the exit status.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_SOLVED
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => solve(args, false, out, err),
        Command::Enumerate(args) => solve(args, true, out, err),
        Command::Verify(args) => verify(args, out),
        Command::Bench(args) => bench(args, out),
        Command::Oracle(args) => oracle(args, out, err),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
    }
}

fn solve(args: SolveArgs, enumerate: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    check_timeout(args.solver.timeout)?;
    let config = solver_config(&args.solver);
    config.validate().map_err(|e| e.to_string())?;
    if args.cap == 0 {
        return Err("--cap must be positive".into());
    }
    let (format, puzzles) = load_puzzles(&args.input.file, args.input.format)?;
    let all = enumerate || args.all_solutions;
    let cap = if all { args.cap } else { 1 };
    let mut worst = EXIT_SOLVED;
    for (label, instance) in &puzzles {
        let outcome = solve_one(label, instance, &config, cap, args.dump_graph);
        err.write_all(outcome.graphs.as_bytes()).map_err(|e| e.to_string())?;
        for s in &outcome.solutions {
            writeln!(out, "{}", render(format, instance, s)).map_err(|e| e.to_string())?;
        }
        if outcome.code != EXIT_SOLVED {
            writeln!(err, "{label}: {}", outcome.stats.outcome).map_err(|e| e.to_string())?;
        } else if all && outcome.stats.truncated {
            writeln!(err, "{label}: stopped after {} solutions", outcome.stats.solution_count)
                .map_err(|e| e.to_string())?;
        }
        if args.stats == StatsMode::Json {
            let row = serde_json::to_string(&outcome.stats).expect("stats serialise");
            writeln!(err, "{row}").map_err(|e| e.to_string())?;
        }
        worst = worst.max(outcome.code);
    }
    Ok(worst)
}

fn verify(args: VerifyArgs, out: &mut dyn Write) -> Result<i32, String> {
    let (format, puzzles) = load_puzzles(&args.input.file, args.input.format)?;
    let text = read_input(&args.solution)?;
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if lines.is_empty() {
        return Err(format!("{}: no candidate solutions", args.solution.display()));
    }
    if puzzles.len() > 1 && lines.len() != puzzles.len() {
        return Err(format!("{} puzzles but {} candidate lines", puzzles.len(), lines.len()));
    }
    let mut code = EXIT_SOLVED;
    for (k, line) in lines.iter().enumerate() {
        let (label, instance) = &puzzles[if puzzles.len() == 1 { 0 } else { k }];
        let values = parse_candidate(format, instance, line).map_err(|e| format!("line {}: {e}", k + 1))?;
        match check_assignment(instance, &values) {
            Ok(()) => writeln!(out, "{label}: ok"),
            Err(v) => {
                code = EXIT_UNSATISFIABLE;
                writeln!(out, "{label}: invalid: {v}")
            }
        }
        .map_err(|e| e.to_string())?;
    }
    Ok(code)
}

fn bench(args: BenchArgs, out: &mut dyn Write) -> Result<i32, String> {
    check_timeout(args.timeout)?;
    if args.cap == 0 {
        return Err("--cap must be positive".into());
    }
    let mut puzzles = Vec::new();
    for f in &args.files {
        puzzles.extend(load_puzzles(f, args.format)?.1);
    }
    let growths: Vec<Option<f64>> = if args.threshold_growth.is_empty() {
        vec![None]
    } else {
        args.threshold_growth.iter().copied().map(Some).collect()
    };
    let mut configs = Vec::new();
    for &metric in &args.metric {
        for &threshold_init in &args.threshold_init {
            for &threshold_growth in &growths {
                let config = SolverConfig {
                    threshold_init,
                    threshold_growth,
                    max_table_entries: args.max_table_entries,
                    metric,
                    merge_order: args.merge_order,
                    timeout: args.timeout.map(Duration::from_secs_f64),
                    ..SolverConfig::default()
                };
                config.validate().map_err(|e| e.to_string())?;
                configs.push(config);
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..puzzles.len())
        .flat_map(|p| (0..configs.len()).map(move |c| (p, c)))
        .collect();
    let run = || -> Vec<RunStats> {
        jobs.par_iter()
            .map(|&(p, c)| solve_one(&puzzles[p].0, &puzzles[p].1, &configs[c], args.cap, false).stats)
            .collect()
    };
    let rows = match args.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| e.to_string())?
            .install(run),
        None => run(),
    };
    for row in rows {
        writeln!(out, "{}", serde_json::to_string(&row).expect("stats serialise")).map_err(|e| e.to_string())?;
    }
    Ok(EXIT_SOLVED)
}

fn oracle(args: OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    if args.cap == 0 || args.max_nodes == 0 {
        return Err("--cap and --max-nodes must be positive".into());
    }
    let (format, puzzles) = load_puzzles(&args.input.file, args.input.format)?;
    let budget = SearchBudget {
        max_nodes: args.max_nodes,
        max_solutions: args.cap,
    };
    let mut worst = EXIT_SOLVED;
    for (label, instance) in &puzzles {
        match brute_force_solutions(instance, budget) {
            Ok(solutions) => {
                for s in &solutions {
                    writeln!(out, "{}", render(format, instance, s)).map_err(|e| e.to_string())?;
                }
                writeln!(err, "{label}: {} solutions", solutions.len()).map_err(|e| e.to_string())?;
                if solutions.is_empty() {
                    worst = worst.max(EXIT_UNSATISFIABLE);
                }
            }
            Err(e @ (BudgetExceeded::Nodes(_) | BudgetExceeded::Solutions(_))) => {
                writeln!(err, "{label}: budget exceeded: {e}").map_err(|e| e.to_string())?;
                worst = worst.max(EXIT_BUDGET);
            }
        }
    }
    Ok(worst)
}
