use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sky_cli::corpus::run_corpus;
use sky_cli::{compare_modes, exit, load, run, HarnessError, Mode, RunOptions};
use sky_core::backtrack::BranchOrder;

#[derive(Parser)]
#[command(
    name = "sky",
    version,
    about = "Datalog with guesses and circumscription"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Backtrack,
    Enumerate,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Lex,
    Mcf,
}

#[derive(Subcommand)]
enum Command {
    /// Print the minimal models of a program.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "backtrack")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "lex")]
        branch: BranchArg,
        /// Disable dominance pruning in backtrack mode.
        #[arg(long)]
        no_dominance: bool,
        #[arg(long)]
        max_models: Option<usize>,
        /// Print solver statistics as JSON on stderr.
        #[arg(long)]
        stats: bool,
        /// Allow exhaustive modes past the decision-atom guard.
        #[arg(long)]
        force_large: bool,
    },
    /// Parse and validate a program without solving it.
    Check { file: PathBuf },
    /// Run every solver mode and compare the results.
    Compare {
        file: PathBuf,
        #[arg(long)]
        force_large: bool,
    },
    /// Check every `.sky` file in a directory against its recorded answer.
    Corpus {
        dir: PathBuf,
        /// Record the oracle answer into each file instead of checking it.
        #[arg(long)]
        bless: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Run {
            file,
            mode,
            branch,
            no_dominance,
            max_models,
            stats,
            force_large,
        } => {
            let options = RunOptions {
                mode: match mode {
                    ModeArg::Backtrack => Mode::Backtrack,
                    ModeArg::Enumerate => Mode::Enumerate,
                    ModeArg::Oracle => Mode::Oracle,
                },
                branch_order: match branch {
                    BranchArg::Lex => BranchOrder::Lexicographic,
                    BranchArg::Mcf => BranchOrder::MostConstrainedFirst,
                },
                dominance: !no_dominance,
                max_models,
                force_large,
            };
            let (report, lines) = run(&file, &options)?;
            for l in &lines {
                println!("{l}");
            }
            if report.truncated {
                eprintln!(
                    "warning: stopped after {} models (--max-models)",
                    report.model_count
                );
            }
            if stats {
                eprintln!(
                    "{}",
                    serde_json::to_string(&report.stats_record()).expect("stats serialise")
                );
            }
            Ok(exit::SUCCESS)
        }
        Command::Check { file } => {
            let program = load(&file)?;
            println!(
                "OK: rules={} strata={}",
                program.rules().len(),
                program.strata().len()
            );
            Ok(exit::SUCCESS)
        }
        Command::Compare { file, force_large } => {
            let cmp = compare_modes(&file, force_large)?;
            for l in cmp.table() {
                println!("{l}");
            }
            Ok(if cmp.agrees() {
                exit::SUCCESS
            } else {
                exit::CORPUS_FAILURE
            })
        }
        Command::Corpus { dir, bless } => {
            let results = run_corpus(&dir, bless)?;
            let failed = results.iter().filter(|r| !r.passed).count();
            for r in &results {
                println!("{}", r.line());
            }
            println!("CORPUS: {} passed, {failed} failed", results.len() - failed);
            Ok(if failed == 0 {
                exit::SUCCESS
            } else {
                exit::CORPUS_FAILURE
            })
        }
    }
}
