use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use borelforge::Rat;
use borelforge_cli::job::Outputs;
use borelforge_cli::{corpus, dispatch, output, outcome_code, parse_job, CliError, Settings};

#[derive(Parser)]
#[command(name = "borelforge", version, about = "Smooth functions with prescribed jets, flat functions and filtration checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Highest derivative order the verification pass checks
    #[arg(long)]
    max_order: Option<usize>,
    /// Residual tolerance of the main match check
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (BORELFORGE_THREADS wins when set)
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a CSV grid of the output function
    #[arg(long)]
    dump_grid: bool,
}

#[derive(Args, Clone)]
struct JobArgs {
    /// Job file (JSON)
    #[arg(long)]
    job: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Realize one jet by a Borel sum
    RealizeBorel(JobArgs),
    /// Realize jets at several points with disjointly supported sums
    MultiBorel(JobArgs),
    /// Extend point and segment data in the plane
    ExtendStrata(JobArgs),
    /// Assemble a completion prefix into one function
    RealizeFiltered(JobArgs),
    /// Flat function along a descending chain of closed sets
    BuildFlat(JobArgs),
    /// Order loci, stabilization and form verdict of a polynomial filtration
    CheckFiltration {
        #[command(flatten)]
        args: JobArgs,
        /// Largest order locus index
        #[arg(long)]
        i_max: Option<u32>,
        /// Number of levels inspected
        #[arg(long)]
        j_max: Option<usize>,
        /// Window `lo,hi` (rationals such as -1/2) replacing the job's
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(Rat, Rat)>,
    },
    /// Correct a function to meet linear conditions without touching its jet on Z
    SolveConstraints(JobArgs),
    /// Assemble a prefix that decays against boundary envelopes
    DecayWrap(JobArgs),
    /// Check an expression against listed derivative, order and norm claims
    Verify(JobArgs),
    /// Run the built-in example corpus
    Corpus {
        /// The worked examples with their acceptance tolerances
        #[arg(long)]
        paper_examples: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_window(s: &str) -> Result<(Rat, Rat), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: Rat = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: Rat = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("BORELFORGE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Validation(format!("BORELFORGE_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(flag),
    }
}

fn init_pool(flag: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads(flag)? {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(())
}

fn run_job(command: &str, args: &JobArgs, extra: Settings) -> Result<i32, CliError> {
    init_pool(args.common.threads)?;
    let text = std::fs::read_to_string(&args.job).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", args.job.display())))?;
    let job = parse_job(&text)?;
    let flags = Settings { tol: args.common.tol, max_order: args.common.max_order, ..extra };
    match dispatch(command, &job, &flags) {
        Ok(o) => {
            output::write_outcome(&args.common.out, &job.outputs, &o, args.common.dump_grid)?;
            print!("{}", o.report.to_text());
            Ok(outcome_code(&o))
        }
        Err(e) => {
            output::write_failure(&args.common.out, &job.outputs, command, &e)?;
            Err(e)
        }
    }
}

fn run_corpus(common: &Common) -> Result<i32, CliError> {
    init_pool(common.threads)?;
    let t = Instant::now();
    let dir: &Path = &common.out;
    let mut failed = 0;
    for case in corpus::cases() {
        let names = Outputs {
            report: format!("case_{:02}_{}.json", case.id, case.name),
            text: format!("case_{:02}_{}.txt", case.id, case.name),
            ..Outputs::default()
        };
        match (case.run)() {
            Ok(rep) => {
                println!("case {:2} {:<26} {}", case.id, case.name, if rep.pass { "PASS" } else { "FAIL" });
                if !rep.pass {
                    failed += 1;
                    print!("{}", rep.to_text());
                }
                let o = borelforge_cli::Outcome { command: format!("corpus/{}", case.name), expr: None, result: serde_json::Value::Null, report: rep };
                output::write_outcome(dir, &names, &o, false)?;
            }
            Err(e) => {
                failed += 1;
                println!("case {:2} {:<26} ERROR {e}", case.id, case.name);
                output::write_failure(dir, &names, case.name, &e)?;
            }
        }
    }
    println!("corpus: {} failed, {:.2} s", failed, t.elapsed().as_secs_f64());
    Ok(if failed == 0 { 0 } else { 3 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::RealizeBorel(a) => run_job("realize-borel", a, Settings::default()),
        Command::MultiBorel(a) => run_job("multi-borel", a, Settings::default()),
        Command::ExtendStrata(a) => run_job("extend-strata", a, Settings::default()),
        Command::RealizeFiltered(a) => run_job("realize-filtered", a, Settings::default()),
        Command::BuildFlat(a) => run_job("build-flat", a, Settings::default()),
        Command::CheckFiltration { args, i_max, j_max, window } => {
            let extra = Settings { i_max: *i_max, j_max: *j_max, window: window.clone(), ..Settings::default() };
            run_job("check-filtration", args, extra)
        }
        Command::SolveConstraints(a) => run_job("solve-constraints", a, Settings::default()),
        Command::DecayWrap(a) => run_job("decay-wrap", a, Settings::default()),
        Command::Verify(a) => run_job("verify", a, Settings::default()),
        Command::Corpus { paper_examples, common } => {
            if *paper_examples {
                run_corpus(common)
            } else {
                Err(CliError::Validation("nothing to run: pass --paper-examples".into()))
            }
        }
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("borelforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
