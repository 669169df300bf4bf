//! `tsfuzz` command line: run fuzzing-vs-traditional campaigns, compare
//! result directories, and replay recorded genomes.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! arguments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use tsfuzz_core::campaign::{self, Method};
use tsfuzz_core::config::RunConfig;
use tsfuzz_core::genome::{GenomeFile, ScenarioKind};
use tsfuzz_core::objectives::{evaluate_traced, TraceRow};
use tsfuzz_core::policies::PolicyKind;
use tsfuzz_core::report;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "TSFUZZ_OUT_DIR";

#[derive(Parser)]
#[command(name = "tsfuzz", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a campaign and write runs.csv, records.csv, history.csv and
    /// report.json into the output directory.
    Run(RunArgs),
    /// Compare an AI-fuzzing results directory against a traditional one.
    Compare(CompareArgs),
    /// Re-run a single recorded genome deterministically.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario selection (repeatable); overrides the config file.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Policy selection (repeatable); overrides the config file.
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Which method(s) to run.
    #[arg(long, default_value = "both", value_parser = ["ai", "traditional", "both"])]
    method: String,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of UEs.
    #[arg(long)]
    ues: Option<usize>,
    /// Number of gNodeBs.
    #[arg(long)]
    cells: Option<usize>,
    /// NSGA-II population size.
    #[arg(long)]
    mu: Option<usize>,
    /// NSGA-II generation count.
    #[arg(long)]
    generations: Option<usize>,
    /// Output directory (default: $TSFUZZ_OUT_DIR or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Results directory of the AI-fuzzing campaign.
    dir_ai: PathBuf,
    /// Results directory of the traditional campaign.
    dir_traditional: PathBuf,
    /// Where to write the comparison report.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Genome file (JSON with layout header), e.g. extracted from the
    /// `genome` column of records.csv.
    #[arg(long)]
    genome: PathBuf,
    /// Policy to steer under.
    #[arg(long)]
    policy: String,
    /// Evaluation seed (use the records.csv `eval_seed` to reproduce).
    #[arg(long)]
    seed: u64,
    /// JSON configuration file for network/eval settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the evaluation result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a per-epoch state trace CSV (time, ue, cell, sinr_db,
    /// throughput_bps).
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, ExitCode> {
    let cfg = match path {
        Some(p) => RunConfig::from_json_file(p)
            .map_err(|e| fail(2, format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn parse_list<T: FromStr<Err = String>>(raw: &[String]) -> Result<Vec<T>, ExitCode> {
    let mut out = Vec::with_capacity(raw.len());
    for item in raw {
        for part in item.split(',').filter(|s| !s.is_empty()) {
            out.push(T::from_str(part).map_err(|e| fail(2, e))?);
        }
    }
    Ok(out)
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let mut cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match parse_list::<ScenarioKind>(&args.scenarios) {
        Ok(v) if !v.is_empty() => cfg.scenarios = v,
        Ok(_) => {}
        Err(code) => return code,
    }
    match parse_list::<PolicyKind>(&args.policies) {
        Ok(v) if !v.is_empty() => cfg.policies = v,
        Ok(_) => {}
        Err(code) => return code,
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.ues {
        cfg.network.n_ues = n;
    }
    if let Some(m) = args.cells {
        cfg.network.n_cells = m;
    }
    if let Some(mu) = args.mu {
        cfg.ga.mu = mu;
    }
    if let Some(g) = args.generations {
        cfg.ga.generations = g;
    }
    if let Err(problems) = cfg.validate() {
        for p in &problems {
            eprintln!("config error: {p}");
        }
        return ExitCode::from(2);
    }

    let methods: Vec<Method> = match args.method.as_str() {
        "ai" => vec![Method::Ai],
        "traditional" => vec![Method::Traditional],
        _ => vec![Method::Ai, Method::Traditional],
    };
    let out_dir = args
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));

    let output = match campaign::execute(&cfg, &methods, args.jobs) {
        Ok(o) => o,
        Err(e) => return fail(1, e),
    };
    if let Err(e) = report::write_campaign(&out_dir, &output) {
        return fail(1, e);
    }
    println!(
        "{} runs, {} vulnerability records -> {}",
        output.runs.len(),
        output.records.len(),
        out_dir.display()
    );
    print!("{}", report::format_report_table(&output.report));
    ExitCode::SUCCESS
}

fn read_dir_rows(
    dir: &Path,
) -> Result<(Vec<campaign::RunRow>, Vec<campaign::RecordRow>), ExitCode> {
    let runs = report::read_runs_csv(&dir.join(report::RUNS_FILE))
        .map_err(|e| fail(2, format!("{}: {e}", dir.display())))?;
    let records = report::read_records_csv(&dir.join(report::RECORDS_FILE))
        .map_err(|e| fail(2, format!("{}: {e}", dir.display())))?;
    Ok((runs, records))
}

fn cmd_compare(args: CompareArgs) -> ExitCode {
    let (ai_runs, ai_records) = match read_dir_rows(&args.dir_ai) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let (trad_runs, trad_records) = match read_dir_rows(&args.dir_traditional) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let ai: Vec<campaign::RunRow> = ai_runs
        .into_iter()
        .filter(|r| r.method == Method::Ai)
        .collect();
    let trad: Vec<campaign::RunRow> = trad_runs
        .into_iter()
        .filter(|r| r.method == Method::Traditional)
        .collect();
    if ai.is_empty() {
        return fail(2, format!("{}: no ai runs found", args.dir_ai.display()));
    }
    if trad.is_empty() {
        return fail(
            2,
            format!(
                "{}: no traditional runs found",
                args.dir_traditional.display()
            ),
        );
    }
    let ai_sev =
        campaign::severity_counts(ai_records.iter().filter(|r| r.method == Method::Ai));
    let trad_sev = campaign::severity_counts(
        trad_records
            .iter()
            .filter(|r| r.method == Method::Traditional),
    );
    let report = match campaign::aggregate(&ai, &trad, ai_sev, trad_sev) {
        Ok(r) => r,
        Err(e) => return fail(2, e),
    };
    if let Err(e) = report::write_report_json(&args.out, &report) {
        return fail(1, e);
    }
    print!("{}", report::format_report_table(&report));
    println!("report written to {}", args.out.display());
    ExitCode::SUCCESS
}

fn cmd_replay(args: ReplayArgs) -> ExitCode {
    let mut cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let policy = match PolicyKind::from_str(&args.policy) {
        Ok(p) => p,
        Err(e) => return fail(2, e),
    };
    let text = match std::fs::read_to_string(&args.genome) {
        Ok(t) => t,
        Err(e) => return fail(2, format!("{}: {e}", args.genome.display())),
    };
    let file = match GenomeFile::from_json(&text) {
        Ok(f) => f,
        Err(e) => return fail(2, format!("{}: {e}", args.genome.display())),
    };
    // the genome file pins the deployment size it was recorded under
    cfg.network.n_ues = file.n_ues;
    cfg.network.n_cells = file.n_cells;
    if let Err(problems) = cfg.validate() {
        for p in &problems {
            eprintln!("config error: {p}");
        }
        return ExitCode::from(2);
    }
    let genome = match file.into_genome(&cfg.network) {
        Ok(g) => g,
        Err(e) => return fail(2, format!("{}: {e}", args.genome.display())),
    };

    let mut trace_rows: Vec<TraceRow> = Vec::new();
    let sink = args.trace.is_some().then_some(&mut trace_rows);
    let result = match evaluate_traced(
        &genome,
        policy,
        &cfg.policy,
        &cfg.network,
        &cfg.eval,
        args.seed,
        sink,
    ) {
        Ok(r) => r,
        Err(e) => return fail(1, e),
    };

    if let Some(trace_path) = &args.trace {
        if let Err(e) = write_trace_csv(trace_path, &trace_rows) {
            return fail(1, e);
        }
    }
    let json = match serde_json::to_string_pretty(&result) {
        Ok(j) => j,
        Err(e) => return fail(1, e),
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                return fail(1, e);
            }
            println!(
                "replayed {} records, objectives f1 {:.4} f2 {:.4} f3 {:.4} -> {}",
                result.records.len(),
                result.objectives.f1,
                result.objectives.f2,
                result.objectives.f3,
                path.display()
            );
        }
        None => println!("{json}"),
    }
    ExitCode::SUCCESS
}

fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> tsfuzz_core::Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "# tsfuzz-trace-v1")?;
    writeln!(file, "time,ue,cell,sinr_db,throughput_bps")?;
    for r in rows {
        writeln!(
            file,
            "{},{},{},{},{}",
            r.time, r.ue, r.cell, r.sinr_db, r.throughput_bps
        )?;
    }
    file.flush()?;
    Ok(())
}
