//! Command-line front end: closed-form benchmark rows, scenario-grid runs
//! with CSV artifacts, and the built-in self checks.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on failed checks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tpsim_core::analytic::{first_best_at, optimal_gammas, second_best, SecondBestSolution};
use tpsim_core::model::{Division, FirmParams, SharingRule};
use tpsim_core::report::{
    self, config_digest, fmt_sig, indicator_rows, write_indicator_csv, write_per_run_csv,
    write_rulebase_csv, write_summary_csv, write_timeline_csv,
};
use tpsim_core::runner::{run_grid, run_replication_detailed, TraceMode};
use tpsim_core::scenario::{parse_scenarios, ScenarioDef};
use tpsim_core::validate;
use tpsim_core::MembershipPartition;

#[derive(Parser)]
#[command(
    name = "tpsim",
    version,
    about = "Negotiated transfer-pricing hold-up benchmark with fuzzy Q-learning agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form benchmark rows: first-best, the optimal sharing
    /// rule, and the second-best solution
    Bench(BenchArgs),
    /// Run scenario grids from a configuration file and emit CSV artifacts
    Run(RunArgs),
    /// Execute the built-in self checks
    Validate(ValidateArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Slope of the inverse demand function
    #[arg(long, default_value_t = 12.0)]
    b: f64,
    /// Expected purchase price of the supplying division
    #[arg(long = "theta-s", default_value_t = 60.0)]
    theta_s: f64,
    /// Expected demand intercept of the first buying division
    #[arg(long = "theta-1", default_value_t = 100.0)]
    theta_1: f64,
    /// Expected demand intercept of the second buying division
    #[arg(long = "theta-2", default_value_t = 100.0)]
    theta_2: f64,
    /// Marginal investment-cost parameter of the supplying division
    #[arg(long = "lambda-s", default_value_t = 1.0)]
    lambda_s: f64,
    /// Marginal investment-cost parameter of the first buying division
    #[arg(long = "lambda1", default_value_t = 0.5)]
    lambda_1: f64,
    /// Marginal investment-cost parameter of the second buying division
    #[arg(long = "lambda2", default_value_t = 0.5)]
    lambda_2: f64,
    /// Override the seller's share of the first margin (default: optimal)
    #[arg(long = "gamma1")]
    gamma_1: Option<f64>,
    /// Override the seller's share of the second margin (default: gamma1)
    #[arg(long = "gamma2")]
    gamma_2: Option<f64>,
    /// Emit CSV instead of an aligned table
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file path, or the name of a bundled preset (scenario1..6)
    #[arg(long)]
    scenario: String,
    /// Override the replication count of every scenario
    #[arg(long)]
    runs: Option<u32>,
    /// Override the base seed of every scenario
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Stop q-value updates during the evaluation window
    #[arg(long = "freeze-eval")]
    freeze_eval: bool,
    /// Force greedy action selection during the evaluation window
    #[arg(long = "greedy-eval")]
    greedy_eval: bool,
    /// Retain and emit every time step instead of the decimated series
    #[arg(long = "full-trace")]
    full_trace: bool,
    /// Also emit per-replication evaluation means
    #[arg(long = "per-run")]
    per_run: bool,
    /// Dump the final rule bases of replication 0 of every cell
    #[arg(long = "dump-rules")]
    dump_rules: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Emit the check report as JSON
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                err.exit();
            }
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Bench(args) => cmd_bench(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Validate(args) => cmd_validate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

struct BenchRow {
    label: &'static str,
    gamma_1: f64,
    gamma_2: f64,
    values: [f64; 9], // i_s, i_1, i_2, q_1, q_2, pi_s, pi_1, pi_2, pi_hq
}

impl BenchRow {
    fn from_second_best(label: &'static str, sb: &SecondBestSolution) -> Self {
        BenchRow {
            label,
            gamma_1: sb.gamma_1,
            gamma_2: sb.gamma_2,
            values: [sb.i_s, sb.i_1, sb.i_2, sb.q_1, sb.q_2, sb.pi_s, sb.pi_1, sb.pi_2, sb.pi_hq],
        }
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    let params = FirmParams::new(
        args.b,
        args.theta_s,
        args.theta_1,
        args.theta_2,
        0.0,
        args.lambda_s,
        args.lambda_1,
        args.lambda_2,
    )
    .context("invalid firm parameters")?;
    let optimal = optimal_gammas(&params).context("no interior optimal sharing rule")?;
    let override_rule = match (args.gamma_1, args.gamma_2) {
        (None, None) => None,
        (g1, g2) => {
            let g1 = g1.ok_or_else(|| anyhow!("--gamma2 requires --gamma1"))?;
            Some(SharingRule::new(g1, g2.unwrap_or(g1)).context("invalid sharing rule")?)
        }
    };
    let reporting = override_rule.unwrap_or(optimal);

    let fb = first_best_at(&params, &reporting);
    let mut rows = vec![BenchRow {
        label: "first-best",
        gamma_1: reporting.gamma_1(),
        gamma_2: reporting.gamma_2(),
        values: [fb.i_s, fb.i_1, fb.i_2, fb.q_1, fb.q_2, fb.pi_s, fb.pi_1, fb.pi_2, fb.pi_hq],
    }];
    let at_optimum = second_best(&params, &optimal).context("second-best solution")?;
    rows.push(BenchRow::from_second_best("second-best@optimal-rule", &at_optimum));
    if let Some(rule) = override_rule {
        let sb = second_best(&params, &rule).context("second-best solution")?;
        rows.push(BenchRow::from_second_best("second-best@gamma", &sb));
    }

    const COLUMNS: [&str; 11] =
        ["gamma_1", "gamma_2", "i_s", "i_1", "i_2", "q_1", "q_2", "pi_s", "pi_1", "pi_2", "pi_hq"];
    if args.csv {
        println!("solution,{}", COLUMNS.join(","));
        for row in &rows {
            let fields: Vec<String> = std::iter::once(fmt_sig(row.gamma_1))
                .chain(std::iter::once(fmt_sig(row.gamma_2)))
                .chain(row.values.iter().map(|v| fmt_sig(*v)))
                .collect();
            println!("{},{}", row.label, fields.join(","));
        }
    } else {
        println!(
            "b = {}, E[theta] = ({}, {}, {}), lambda = ({}, {}, {})",
            args.b, args.theta_s, args.theta_1, args.theta_2, args.lambda_s, args.lambda_1, args.lambda_2
        );
        print!("{:<26}", "solution");
        for column in COLUMNS {
            print!("{column:>10}");
        }
        println!();
        for row in &rows {
            print!("{:<26}", row.label);
            print!("{:>10.4}{:>10.4}", row.gamma_1, row.gamma_2);
            for v in row.values {
                print!("{v:>10.2}");
            }
            println!();
        }
    }
    Ok(ExitCode::SUCCESS)
}

const PRESETS: [(&str, &str); 6] = [
    ("scenario1", include_str!("../../../scenarios/scenario1.cfg")),
    ("scenario2", include_str!("../../../scenarios/scenario2.cfg")),
    ("scenario3", include_str!("../../../scenarios/scenario3.cfg")),
    ("scenario4", include_str!("../../../scenarios/scenario4.cfg")),
    ("scenario5", include_str!("../../../scenarios/scenario5.cfg")),
    ("scenario6", include_str!("../../../scenarios/scenario6.cfg")),
];

fn resolve_scenario(selector: &str) -> Result<(String, String)> {
    let path = Path::new(selector);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("failed to read {}", path.display()))?;
        return Ok((selector.to_string(), text));
    }
    let wanted = selector.trim_end_matches(".cfg").to_ascii_lowercase();
    for (name, text) in PRESETS {
        if wanted == name {
            return Ok((format!("bundled:{name}"), text.to_string()));
        }
    }
    bail!("scenario {selector:?} is neither a file nor a bundled preset (scenario1..scenario6)")
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let (source, text) = resolve_scenario(&args.scenario)?;
    let mut defs = parse_scenarios(&text).context("invalid scenario configuration")?;
    for def in &mut defs {
        if let Some(runs) = args.runs {
            def.n_runs = runs;
        }
        if let Some(seed) = args.seed {
            def.seed = seed;
        }
    }

    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to configure the worker pool")?;
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("failed to create {}", args.out.display()))?;

    for def in &defs {
        run_one_scenario(args, def)?;
    }
    write_manifest(args, &source, &text, &defs)?;
    Ok(ExitCode::SUCCESS)
}

fn run_one_scenario(args: &RunArgs, def: &ScenarioDef) -> Result<()> {
    let mut grid = def.expand().context("invalid scenario grid")?;
    for spec in &mut grid.specs {
        spec.freeze_eval = args.freeze_eval;
        spec.greedy_eval = args.greedy_eval;
        if args.full_trace {
            spec.trace = TraceMode::Full;
        }
    }
    eprintln!("scenario {}: {} cells x {} runs", grid.name, grid.len(), def.n_runs);
    let results = run_grid(&grid.specs);
    for (index, cell) in results.cells.iter().enumerate() {
        if let Err(err) = cell {
            eprintln!("scenario {}: cell {index} failed: {err}", grid.name);
        }
    }

    let open = |suffix: &str| -> Result<BufWriter<File>> {
        let path = args.out.join(format!("{}_{suffix}.csv", grid.name));
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("failed to create {}", path.display()))?,
        ))
    };

    write_summary_csv(open("summary")?, &grid, &results).context("summary output")?;
    write_timeline_csv(open("timeline")?, &grid, &results).context("timeline output")?;
    if def.n_runs >= 8 {
        let rows = indicator_rows(&grid, &results).context("indicator grid")?;
        write_indicator_csv(open("indicators")?, &rows).context("indicator output")?;
    } else {
        eprintln!(
            "scenario {}: skipping indicators (needs at least 8 runs, got {})",
            grid.name, def.n_runs
        );
    }
    if args.per_run {
        write_per_run_csv(open("runs")?, &grid, &results).context("per-run output")?;
    }
    if args.dump_rules {
        let partition = MembershipPartition::paper_default();
        for (index, spec) in grid.specs.iter().enumerate() {
            let (_, agents) = run_replication_detailed(spec, 0)
                .map_err(|err| anyhow!("rule dump for cell {index}: {err}"))?;
            let mut writer = open(&format!("cell{index}_rules"))?;
            for division in Division::ALL {
                write_rulebase_csv(&mut writer, division, &agents[division.index()], &partition)
                    .context("rule-base dump")?;
            }
        }
    }
    Ok(())
}

fn write_manifest(args: &RunArgs, source: &str, text: &str, defs: &[ScenarioDef]) -> Result<()> {
    let path = args.out.join("manifest.txt");
    let mut w = BufWriter::new(
        File::create(&path).with_context(|| format!("failed to create {}", path.display()))?,
    );
    writeln!(w, "tool = tpsim {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "scenario_source = {source}")?;
    writeln!(w, "config_sha256 = {}", config_digest(text))?;
    for def in defs {
        writeln!(w, "scenario.{}.seed = {}", def.name, def.seed)?;
        writeln!(w, "scenario.{}.n_runs = {}", def.name, def.n_runs)?;
    }
    writeln!(w, "threads = {}", args.threads.map_or_else(|| "auto".to_string(), |t| t.to_string()))?;
    writeln!(
        w,
        "flags = freeze_eval:{} greedy_eval:{} full_trace:{} per_run:{} dump_rules:{}",
        args.freeze_eval, args.greedy_eval, args.full_trace, args.per_run, args.dump_rules
    )?;
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode> {
    let checks = validate::run_all();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&checks)?);
    } else {
        for check in &checks {
            println!("{} {:<40} {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
        }
    }
    if validate::all_passed(&checks) {
        Ok(ExitCode::SUCCESS)
    } else {
        if !args.json {
            eprintln!("{} of {} checks failed", checks.iter().filter(|c| !c.passed).count(), checks.len());
        }
        Ok(ExitCode::from(2))
    }
}

// Unused import guard: report is pulled in for the digest helper only.
use report as _;
