//! Command-line front end for the summability classifiers.
//!
//! Every subcommand parses an expression, runs the matching analysis from
//! the core crate, and prints one JSON report (schema `summakit/1`).
//! Trajectory-producing commands (`density`, `stat`, `almost`) can export
//! CSV instead.  Exit codes: 0 for a definite verdict, 2 for an
//! inconclusive one, 1 for usage or runtime errors.

pub mod report;
pub mod seeded;

use std::ffi::OsString;
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use anyhow::{bail, ensure};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use summakit::almostconv::{default_k_schedule, default_p_budget, lorentz_test};
use summakit::seqspec::dsl::{parse_set, parse_spec, parse_witness};
use summakit::statconv::default_eps_grid;
use summakit::{
    classify, empirical_density, gas_limit, stat_limit, Budgets, GasStatus, IndexSet,
    Rule, Spec, Status,
};

use report::{
    AlmostResult, BudgetsJson, ClassificationJson, DensityResult, FixtureCheck,
    FixtureResult, GasResult, Meta, Report, SeededResult, StatResult, SCHEMA,
};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const INCONCLUSIVE: i32 = 2;
}

fn init_threads() {
    static THREADS: OnceLock<()> = OnceLock::new();
    THREADS.get_or_init(|| {
        if let Some(n) = std::env::var("SUMMAKIT_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|n| *n >= 1)
        {
            // build_global fails if a pool already exists; the cap is
            // best-effort then
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

const DEFAULT_N_MAX: u64 = 1_000_000;
const DEFAULT_GRID: f64 = 3.162_277_660_168_379_5;
const RANDOM_N_MAX: u64 = 200_000;

#[derive(Parser)]
#[command(
    name = "summakit",
    version,
    about = "Classify bounded real sequences by convergence mode"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Natural density of an index set: exact when the calculus derives
    /// one, always with an empirical trajectory
    Density {
        /// Set expression, e.g. "squares | ap(2, 5)"
        set: String,
        /// Largest prefix length sampled
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: u64,
        /// Growth factor of the prefix-length grid
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Statistical limit of a sequence
    Stat {
        /// Sequence expression, e.g. "overlay(const(0); squares -> index)"
        spec: String,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: u64,
        /// Exceedance tolerances, strictly descending
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps: Vec<f64>,
        /// Limit to try before the automatic candidate search
        #[arg(long)]
        candidate: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Almost limit: uniform window means over every start position
    Almost {
        spec: String,
        /// Window lengths, strictly ascending
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        k_schedule: Vec<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Staged test: statistical, then almost, then both again after
    /// rewriting the sequence on a density-zero witness set
    Gas {
        spec: String,
        /// Witness modification "set -> rule"
        #[arg(long)]
        witness: Option<String>,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: u64,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        k_schedule: Vec<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Verdicts for every convergence mode at once
    Classify {
        spec: String,
        /// Witness modification "set -> rule" for the staged test
        #[arg(long)]
        witness: Option<String>,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: u64,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        k_schedule: Vec<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Show a named catalog fixture, or generate one with --seed
    Fixture {
        /// Catalog name, or "random" together with --seed
        name: String,
        /// Re-run the classification and compare against the pinned verdicts
        #[arg(long)]
        check: bool,
        /// Generator seed for the random fixture
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

/// Run the CLI against `argv` (including the program name), writing
/// reports to `out`.  Diagnostics go to stderr.  Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => match err.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = write!(out, "{}", err.render());
                return exit::OK;
            }
            _ => {
                eprint!("{}", err.render());
                return exit::ERROR;
            }
        },
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("summakit: {err:#}");
            exit::ERROR
        }
    }
}

/// `run` over the process arguments and stdout.
pub fn main_entry() -> i32 {
    let args: Vec<OsString> = std::env::args_os().collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    run(args, &mut out)
}

fn dispatch(command: Command, out: &mut dyn Write) -> anyhow::Result<i32> {
    match command {
        Command::Density { set, n_max, grid, format } => {
            run_density(&set, n_max, grid, format, out)
        }
        Command::Stat { spec, n_max, eps, candidate, format } => {
            run_stat(&spec, n_max, eps, candidate, format, out)
        }
        Command::Almost { spec, k_schedule, format } => {
            run_almost(&spec, k_schedule, format, out)
        }
        Command::Gas { spec, witness, n_max, eps, k_schedule, format } => {
            run_gas(&spec, witness.as_deref(), n_max, eps, k_schedule, format, out)
        }
        Command::Classify { spec, witness, n_max, eps, k_schedule, format } => {
            run_classify(&spec, witness.as_deref(), n_max, eps, k_schedule, format, out)
        }
        Command::Fixture { name, check, seed, format } => {
            run_fixture(&name, check, seed, format, out)
        }
    }
}

fn checked_n_max(n_max: u64) -> anyhow::Result<u64> {
    ensure!(n_max >= 10, "--n-max must be at least 10");
    Ok(n_max)
}

fn checked_eps(eps: Vec<f64>) -> anyhow::Result<Vec<f64>> {
    if eps.is_empty() {
        return Ok(default_eps_grid());
    }
    ensure!(eps.iter().all(|e| *e > 0.0), "--eps values must be positive");
    ensure!(
        eps.windows(2).all(|w| w[0] > w[1]),
        "--eps values must be strictly descending"
    );
    Ok(eps)
}

fn checked_schedule(ks: Vec<u64>) -> anyhow::Result<Vec<u64>> {
    if ks.is_empty() {
        return Ok(default_k_schedule());
    }
    ensure!(ks.iter().all(|k| *k >= 1), "--k-schedule lengths must be at least 1");
    ensure!(
        ks.windows(2).all(|w| w[0] < w[1]),
        "--k-schedule must be strictly ascending"
    );
    Ok(ks)
}

fn json_only(format: Format, command: &str) -> anyhow::Result<()> {
    ensure!(
        format == Format::Json,
        "{command} has no tabular export; only density, stat, and almost take --format csv"
    );
    Ok(())
}

fn status_code(status: &Status<f64>) -> i32 {
    if status.is_definite() {
        exit::OK
    } else {
        exit::INCONCLUSIVE
    }
}

fn emit<R: serde::Serialize>(out: &mut dyn Write, report: &Report<R>) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    writeln!(out)?;
    Ok(())
}

fn run_density(
    text: &str,
    n_max: u64,
    grid: f64,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let start = Instant::now();
    let n_max = checked_n_max(n_max)?;
    ensure!(grid > 1.0, "--grid growth factor must exceed 1");
    let set = parse_set(text)?;
    let estimate = empirical_density(&set, n_max, grid)?;
    let result = DensityResult::new(&estimate);
    let code = if result.exact.is_some() || result.settled {
        exit::OK
    } else {
        exit::INCONCLUSIVE
    };
    match format {
        Format::Csv => {
            writeln!(out, "n,ratio")?;
            for (n, ratio) in &result.trajectory {
                writeln!(out, "{n},{ratio}")?;
            }
        }
        Format::Json => emit(
            out,
            &Report {
                schema: SCHEMA,
                command: "density",
                input: set.to_string(),
                params: json!({ "n_max": n_max, "grid": grid }),
                result,
                meta: Meta::since(start),
            },
        )?,
    }
    Ok(code)
}

fn run_stat(
    text: &str,
    n_max: u64,
    eps: Vec<f64>,
    candidate: Option<f64>,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let start = Instant::now();
    let n_max = checked_n_max(n_max)?;
    let eps = checked_eps(eps)?;
    let spec: Spec = parse_spec(text)?;
    let verdict = stat_limit(&spec, n_max, &eps, candidate);
    let code = status_code(&verdict.status);
    let result = StatResult::from(&verdict);
    match format {
        Format::Csv => {
            writeln!(out, "eps,n,ratio")?;
            for t in &result.trajectories {
                for (n, ratio) in &t.points {
                    writeln!(out, "{},{n},{ratio}", t.eps)?;
                }
            }
        }
        Format::Json => emit(
            out,
            &Report {
                schema: SCHEMA,
                command: "stat",
                input: spec.to_string(),
                params: json!({ "n_max": n_max, "eps": eps, "candidate": candidate }),
                result,
                meta: Meta::since(start),
            },
        )?,
    }
    Ok(code)
}

fn run_almost(
    text: &str,
    k_schedule: Vec<u64>,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let start = Instant::now();
    let ks = checked_schedule(k_schedule)?;
    let spec: Spec = parse_spec(text)?;
    let verdict = lorentz_test(&spec, &ks, &default_p_budget)?;
    let code = status_code(&verdict.status);
    let result = AlmostResult::from(&verdict);
    match format {
        Format::Csv => {
            writeln!(out, "k,sup_mean,inf_mean,oscillation,midpoint")?;
            for w in &result.windows {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    w.k, w.sup_mean, w.inf_mean, w.oscillation, w.midpoint
                )?;
            }
        }
        Format::Json => emit(
            out,
            &Report {
                schema: SCHEMA,
                command: "almost",
                input: spec.to_string(),
                params: json!({ "k_schedule": ks }),
                result,
                meta: Meta::since(start),
            },
        )?,
    }
    Ok(code)
}

fn parse_witness_arg(text: Option<&str>) -> anyhow::Result<Option<(IndexSet, Rule)>> {
    Ok(match text {
        Some(t) => Some(parse_witness(t)?),
        None => None,
    })
}

fn witness_text(witness: &Option<(IndexSet, Rule)>) -> Option<String> {
    witness.as_ref().map(|(set, rule)| format!("{set} -> {rule}"))
}

fn run_gas(
    text: &str,
    witness_arg: Option<&str>,
    n_max: u64,
    eps: Vec<f64>,
    k_schedule: Vec<u64>,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let start = Instant::now();
    json_only(format, "gas")?;
    let budgets = Budgets {
        n_max: checked_n_max(n_max)?,
        eps_grid: checked_eps(eps)?,
        k_schedule: checked_schedule(k_schedule)?,
    };
    let spec: Spec = parse_spec(text)?;
    let witness = parse_witness_arg(witness_arg)?;
    let witness_canon = witness_text(&witness);
    let verdict = gas_limit(&spec, witness, &budgets);
    let code = match verdict.status {
        GasStatus::Converges { .. } => exit::OK,
        GasStatus::Inconclusive => exit::INCONCLUSIVE,
        // a rejected witness is a refused precondition, not an open verdict
        GasStatus::WitnessRejected => exit::ERROR,
    };
    emit(
        out,
        &Report {
            schema: SCHEMA,
            command: "gas",
            input: spec.to_string(),
            params: json!({
                "n_max": budgets.n_max,
                "eps": budgets.eps_grid,
                "k_schedule": budgets.k_schedule,
                "witness": witness_canon,
            }),
            result: GasResult::from(&verdict),
            meta: Meta::since(start),
        },
    )?;
    Ok(code)
}

fn classification_code(c: &ClassificationJson) -> i32 {
    use report::{GasStatusJson, StatusJson};
    if matches!(c.gas, Some(GasStatusJson::WitnessRejected)) {
        return exit::ERROR;
    }
    let open = matches!(c.usual, StatusJson::Inconclusive)
        || matches!(c.statistical, StatusJson::Inconclusive)
        || matches!(c.almost, Some(StatusJson::Inconclusive))
        || matches!(c.gas, Some(GasStatusJson::Inconclusive));
    if open {
        exit::INCONCLUSIVE
    } else {
        exit::OK
    }
}

fn run_classify(
    text: &str,
    witness_arg: Option<&str>,
    n_max: u64,
    eps: Vec<f64>,
    k_schedule: Vec<u64>,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let start = Instant::now();
    json_only(format, "classify")?;
    let budgets = Budgets {
        n_max: checked_n_max(n_max)?,
        eps_grid: checked_eps(eps)?,
        k_schedule: checked_schedule(k_schedule)?,
    };
    let spec: Spec = parse_spec(text)?;
    let witness = parse_witness_arg(witness_arg)?;
    let witness_canon = witness_text(&witness);
    let classification = classify(&spec, witness, &budgets);
    let result = ClassificationJson::from(&classification);
    let code = classification_code(&result);
    emit(
        out,
        &Report {
            schema: SCHEMA,
            command: "classify",
            input: spec.to_string(),
            params: json!({
                "n_max": budgets.n_max,
                "eps": budgets.eps_grid,
                "k_schedule": budgets.k_schedule,
                "witness": witness_canon,
            }),
            result,
            meta: Meta::since(start),
        },
    )?;
    Ok(code)
}

fn run_fixture(
    name: &str,
    check: bool,
    seed: Option<u64>,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    json_only(format, "fixture")?;
    if name == "random" {
        let Some(seed) = seed else {
            bail!("the random fixture needs --seed");
        };
        return run_random_fixture(seed, out);
    }
    ensure!(seed.is_none(), "--seed only applies to the random fixture");
    run_catalog_fixture(name, check, out)
}

fn run_catalog_fixture(name: &str, check: bool, out: &mut dyn Write) -> anyhow::Result<i32> {
    let start = Instant::now();
    let f = summakit::fixture(name)?;
    let expected = ClassificationJson::from(&f.expected);
    let (check_json, code) = if check {
        let got = f.classify();
        let pass = got == f.expected;
        (
            Some(FixtureCheck { got: ClassificationJson::from(&got), pass }),
            if pass { exit::OK } else { exit::ERROR },
        )
    } else {
        (None, exit::OK)
    };
    emit(
        out,
        &Report {
            schema: SCHEMA,
            command: "fixture",
            input: name.to_string(),
            params: json!({ "check": check, "seed": null }),
            result: FixtureResult {
                name: f.name.to_string(),
                provenance: f.provenance.to_string(),
                dsl: f.dsl.to_string(),
                witness: f.witness_dsl.map(str::to_string),
                budgets: BudgetsJson {
                    n_max: f.budgets.n_max,
                    eps: f.budgets.eps_grid.clone(),
                    k_schedule: f.budgets.k_schedule.clone(),
                },
                expected,
                check: check_json,
            },
            meta: Meta::since(start),
        },
    )?;
    Ok(code)
}

/// No-contradiction predicate across the modes of one classification:
/// every definite limit agrees, ordinary convergence is never refuted
/// downstream, and a statistical or almost limit always survives the
/// staged test.
pub fn modes_consistent(c: &summakit::Classification<f64>) -> bool {
    let gas_converges = matches!(c.gas, Some(GasStatus::Converges { .. }));
    let mut limits: Vec<f64> = Vec::new();
    if let Status::Converges { limit } = c.usual {
        limits.push(limit);
        if matches!(c.statistical, Status::Refuted)
            || matches!(c.almost, Some(Status::Refuted))
        {
            return false;
        }
    }
    if let Status::Converges { limit } = c.statistical {
        limits.push(limit);
        if c.gas.is_some() && !gas_converges {
            return false;
        }
    }
    if let Some(Status::Converges { limit }) = c.almost {
        limits.push(limit);
        if c.gas.is_some() && !gas_converges {
            return false;
        }
    }
    if let Some(GasStatus::Converges { limit }) = c.gas {
        limits.push(limit);
    }
    limits.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-6)
}

fn run_random_fixture(seed: u64, out: &mut dyn Write) -> anyhow::Result<i32> {
    let start = Instant::now();
    let generated = seeded::fixture(seed);
    let budgets = Budgets {
        n_max: RANDOM_N_MAX,
        eps_grid: default_eps_grid(),
        k_schedule: default_k_schedule(),
    };
    let witness_canon = witness_text(&generated.witness);
    let classification = classify(&generated.spec, generated.witness.clone(), &budgets);
    let consistent = modes_consistent(&classification);
    emit(
        out,
        &Report {
            schema: SCHEMA,
            command: "fixture",
            input: "random".to_string(),
            params: json!({ "check": true, "seed": seed }),
            result: SeededResult {
                seed,
                dsl: generated.spec.to_string(),
                witness: witness_canon,
                classification: ClassificationJson::from(&classification),
                consistent,
            },
            meta: Meta::since(start),
        },
    )?;
    Ok(if consistent { exit::OK } else { exit::ERROR })
}
