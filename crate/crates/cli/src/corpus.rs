//! Regression corpus: `.sky` files whose leading comment block records the
//! expected answer.
//!
//! ```text
//! % @provenance: hand-written 3-colouring of a triangle
//! % @expect-models: 6
//! % @expect: {chosen(a,bl), chosen(b,g), chosen(c,r)}
//! ```
//!
//! `@expect` lines are optional; when present they must match the rendered
//! model lines exactly, in sorted order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use sky_core::ground_program;

use crate::{compare_ground, load, HarnessError};

const PREFIX: &str = "% @";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCase {
    pub path: PathBuf,
    pub source: String,
    pub provenance: Option<String>,
    pub expect_models: Option<usize>,
    pub expect_lines: Vec<String>,
}

impl CorpusCase {
    pub fn parse(path: &Path, source: String) -> CorpusCase {
        let mut case = CorpusCase {
            path: path.to_path_buf(),
            source: String::new(),
            provenance: None,
            expect_models: None,
            expect_lines: Vec::new(),
        };
        for line in source.lines() {
            let Some(rest) = line.strip_prefix(PREFIX) else {
                continue;
            };
            let Some((key, value)) = rest.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "provenance" => case.provenance = Some(value.to_string()),
                "expect-models" => case.expect_models = value.parse().ok(),
                "expect" => case.expect_lines.push(value.to_string()),
                _ => {}
            }
        }
        case.source = source;
        case
    }

    pub fn read(path: &Path) -> Result<CorpusCase, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(CorpusCase::parse(path, text))
    }

    /// Program text with the expectation headers removed.
    pub fn body(&self) -> String {
        let mut out = String::new();
        for line in self.source.lines() {
            if is_expectation(line) {
                continue;
            }
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Rewrites the expectation headers from `lines`, keeping everything else.
    pub fn blessed(&self, lines: &[String]) -> String {
        let mut out = String::new();
        if let Some(p) = &self.provenance {
            out.push_str(&format!("{PREFIX}provenance: {p}\n"));
        }
        out.push_str(&format!("{PREFIX}expect-models: {}\n", lines.len()));
        for l in lines {
            out.push_str(&format!("{PREFIX}expect: {l}\n"));
        }
        for line in self.source.lines() {
            if is_expectation(line) || line.starts_with(&format!("{PREFIX}provenance:")) {
                continue;
            }
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

fn first_difference(expected: &[String], actual: &[String]) -> String {
    let i = expected
        .iter()
        .zip(actual)
        .position(|(e, a)| e != a)
        .unwrap_or(expected.len().min(actual.len()));
    let show = |v: &[String]| v.get(i).map_or("<none>".to_string(), Clone::clone);
    format!(
        "model {} differs: expected {} got {}",
        i + 1,
        show(expected),
        show(actual)
    )
}

fn is_expectation(line: &str) -> bool {
    line.starts_with(&format!("{PREFIX}expect"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub path: PathBuf,
    pub passed: bool,
    /// Decision atoms after grounding.
    pub atoms: usize,
    pub models: usize,
    pub detail: String,
}

impl CaseResult {
    pub fn line(&self) -> String {
        format!(
            "{} {} atoms={} models={}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.path.display(),
            self.atoms,
            self.models,
            if self.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.detail)
            }
        )
    }
}

/// `.sky` files directly under `dir`, sorted by path.
pub fn list_cases(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "sky") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Checks one case: all three modes agree and match the recorded answer.
/// With `bless`, the oracle answer is written back into the file instead.
pub fn run_case(path: &Path, bless: bool) -> Result<CaseResult, HarnessError> {
    let case = CorpusCase::read(path)?;
    let program = load(path)?;
    let ground = ground_program(&program);
    let cmp = compare_ground(&ground, false)?;
    let oracle = &cmp.rows[0].models;
    let lines = oracle.render_lines(program.show());

    let mut problems = Vec::new();
    if !cmp.agrees() {
        let counts: Vec<String> = cmp
            .rows
            .iter()
            .map(|r| format!("{}={}", r.mode, r.models.len()))
            .collect();
        problems.push(format!("modes disagree: {}", counts.join(" ")));
    }
    if bless {
        std::fs::write(path, case.blessed(&lines)).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    } else {
        match case.expect_models {
            Some(n) if n != oracle.len() => {
                problems.push(format!("expected {n} models, got {}", oracle.len()))
            }
            None => problems.push("missing @expect-models".to_string()),
            _ => {}
        }
        if !case.expect_lines.is_empty() && case.expect_lines != lines {
            problems.push(first_difference(&case.expect_lines, &lines));
        }
    }
    Ok(CaseResult {
        path: path.to_path_buf(),
        passed: problems.is_empty(),
        atoms: ground.decision_atoms().len(),
        models: oracle.len(),
        detail: problems.join("; "),
    })
}

/// Runs every case in `dir` in parallel. Results come back in path order;
/// a case that fails to load is reported as a failure.
pub fn run_corpus(dir: &Path, bless: bool) -> Result<Vec<CaseResult>, HarnessError> {
    let paths = list_cases(dir)?;
    Ok(paths
        .par_iter()
        .map(|p| {
            run_case(p, bless).unwrap_or_else(|e| CaseResult {
                path: p.clone(),
                passed: false,
                atoms: 0,
                models: 0,
                detail: e.to_string(),
            })
        })
        .collect())
}
