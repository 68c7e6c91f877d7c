//! Runner behind the `sky` command: loads a program, solves it in one of the
//! three modes, renders models canonically and compares modes against each
//! other. The regression corpus lives in [`corpus`].

pub mod corpus;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use sky_core::analysis::{ValidityReport, ViolationClass};
use sky_core::backtrack::{BranchOrder, SolveConfig, SolveMode, SolverStats};
use sky_core::circumscription::{check_guard, GuardError, ModelSet, OracleConfig, DEFAULT_GUARD};
use sky_core::parser::ParseError;
use sky_core::{
    enumerate_bruteforce, ground_program, parse_program, GroundProgram, LoadError, Program,
};

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 10;
    pub const SAFETY: i32 = 11;
    pub const NON_STRATIFIABLE: i32 = 12;
    pub const POLICY: i32 = 13;
    pub const GUARD: i32 = 14;
    pub const CORPUS_FAILURE: i32 = 20;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{error}")]
    Parse { path: PathBuf, error: ParseError },
    #[error("{}", render_report(.path, .report))]
    Invalid {
        path: PathBuf,
        report: ValidityReport,
    },
    #[error("{0} (--force-large)")]
    Guard(#[from] GuardError),
    #[error("{0}")]
    Mismatch(String),
}

fn render_report(path: &Path, report: &ValidityReport) -> String {
    report
        .violations
        .iter()
        .map(|v| match v.position() {
            Some(_) => format!("{}:{v}", path.display()),
            None => format!("{}: {v}", path.display()),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl HarnessError {
    /// Exit status for this class of error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => exit::IO,
            HarnessError::Parse { .. } => exit::PARSE,
            HarnessError::Invalid { report, .. } => match report.primary_class() {
                Some(ViolationClass::Stratification) => exit::NON_STRATIFIABLE,
                Some(ViolationClass::Policy) => exit::POLICY,
                _ => exit::SAFETY,
            },
            HarnessError::Guard(_) => exit::GUARD,
            HarnessError::Mismatch(_) => exit::CORPUS_FAILURE,
        }
    }

    fn from_load(path: &Path, e: LoadError) -> Self {
        match e {
            LoadError::Parse(error) => HarnessError::Parse {
                path: path.to_path_buf(),
                error,
            },
            LoadError::Invalid(report) => HarnessError::Invalid {
                path: path.to_path_buf(),
                report,
            },
        }
    }
}

/// Solver used by `sky run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Backtrack,
    Enumerate,
    Oracle,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Backtrack => "backtrack",
            Mode::Enumerate => "enumerate",
            Mode::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: Mode,
    pub branch_order: BranchOrder,
    pub dominance: bool,
    pub max_models: Option<usize>,
    pub force_large: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::Backtrack,
            branch_order: BranchOrder::Lexicographic,
            dominance: true,
            max_models: None,
            force_large: false,
        }
    }
}

impl RunOptions {
    pub fn with_mode(mode: Mode) -> Self {
        RunOptions {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub path: PathBuf,
    pub mode: Mode,
    pub model_count: usize,
    pub stats: SolverStats,
    /// Milliseconds; the only field that varies between identical runs.
    pub wall_time: f64,
    pub truncated: bool,
}

/// The machine-readable record printed by `sky run --stats`.
#[derive(Debug, Clone, Serialize)]
pub struct StatsRecord {
    pub nodes_expanded: u64,
    pub constraint_prunes: u64,
    pub dominance_prunes: u64,
    pub leaves_evaluated: u64,
    pub models_found: u64,
    pub wall_time: f64,
}

impl RunReport {
    pub fn stats_record(&self) -> StatsRecord {
        StatsRecord {
            nodes_expanded: self.stats.nodes_expanded,
            constraint_prunes: self.stats.constraint_prunes,
            dominance_prunes: self.stats.dominance_prunes,
            leaves_evaluated: self.stats.leaves_evaluated,
            models_found: self.stats.models_found,
            wall_time: self.wall_time,
        }
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub models: ModelSet,
    pub stats: SolverStats,
    pub truncated: bool,
}

pub fn load(path: &Path) -> Result<Program, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_str(path, &text)
}

pub fn load_str(path: &Path, text: &str) -> Result<Program, HarnessError> {
    parse_program(text).map_err(|e| HarnessError::from_load(path, e))
}

/// Solves in `options.mode`. Exhaustive modes respect the decision-atom guard
/// unless `force_large` is set.
pub fn solve_mode(ground: &GroundProgram, options: &RunOptions) -> Result<Outcome, HarnessError> {
    let n = ground.decision_atoms().len();
    match options.mode {
        Mode::Oracle => {
            let r = enumerate_bruteforce(
                ground,
                &OracleConfig {
                    limit: options.max_models,
                    guard: DEFAULT_GUARD,
                    force: options.force_large,
                },
            )?;
            Ok(Outcome {
                stats: SolverStats {
                    nodes_expanded: r.stats.tried,
                    constraint_prunes: 0,
                    dominance_prunes: 0,
                    leaves_evaluated: r.stats.tried,
                    models_found: r.stats.minimal,
                },
                models: r.models,
                truncated: r.truncated,
            })
        }
        Mode::Backtrack | Mode::Enumerate => {
            let mode = if options.mode == Mode::Backtrack {
                SolveMode::Backtrack
            } else {
                check_guard(n, DEFAULT_GUARD, options.force_large)?;
                SolveMode::Enumerate
            };
            let s = sky_core::solve(
                ground,
                &SolveConfig {
                    mode,
                    branch_order: options.branch_order,
                    max_models: options.max_models,
                    dominance_pruning: options.dominance,
                },
            );
            Ok(Outcome {
                models: s.models,
                stats: s.stats,
                truncated: s.truncated,
            })
        }
    }
}

/// Parse, ground and solve `path`. Returns the report and the model lines
/// followed by the `MODELS: n` summary.
pub fn run(path: &Path, options: &RunOptions) -> Result<(RunReport, Vec<String>), HarnessError> {
    let program = load(path)?;
    let start = Instant::now();
    let ground = ground_program(&program);
    let outcome = solve_mode(&ground, options)?;
    let wall_time = start.elapsed().as_secs_f64() * 1000.0;

    let mut lines = outcome.models.render_lines(program.show());
    lines.push(format!("MODELS: {}", outcome.models.len()));
    Ok((
        RunReport {
            path: path.to_path_buf(),
            mode: options.mode,
            model_count: outcome.models.len(),
            stats: outcome.stats,
            wall_time,
            truncated: outcome.truncated,
        },
        lines,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRow {
    pub mode: Mode,
    pub models: ModelSet,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ModeRow>,
}

impl Comparison {
    /// All modes returned the same model set.
    pub fn agrees(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].models == w[1].models)
    }

    pub fn table(&self) -> Vec<String> {
        let mut lines = vec![format!(
            "{:<10} {:>7} {:>8} {:>8} {:>18} {:>17}",
            "mode", "models", "leaves", "nodes", "constraint_prunes", "dominance_prunes"
        )];
        for r in &self.rows {
            lines.push(format!(
                "{:<10} {:>7} {:>8} {:>8} {:>18} {:>17}",
                r.mode.to_string(),
                r.models.len(),
                r.stats.leaves_evaluated,
                r.stats.nodes_expanded,
                r.stats.constraint_prunes,
                r.stats.dominance_prunes
            ));
        }
        lines.push(format!(
            "VERDICT: {}",
            if self.agrees() { "ok" } else { "mismatch" }
        ));
        lines
    }
}

/// Runs oracle, enumerate and backtrack on one ground program.
pub fn compare_ground(
    ground: &GroundProgram,
    force_large: bool,
) -> Result<Comparison, HarnessError> {
    check_guard(ground.decision_atoms().len(), DEFAULT_GUARD, force_large)?;
    let mut rows = Vec::new();
    for mode in [Mode::Oracle, Mode::Enumerate, Mode::Backtrack] {
        let options = RunOptions {
            force_large,
            ..RunOptions::with_mode(mode)
        };
        let o = solve_mode(ground, &options)?;
        rows.push(ModeRow {
            mode,
            models: o.models,
            stats: o.stats,
        });
    }
    Ok(Comparison { rows })
}

pub fn compare_modes(path: &Path, force_large: bool) -> Result<Comparison, HarnessError> {
    let program = load(path)?;
    compare_ground(&ground_program(&program), force_large)
}
