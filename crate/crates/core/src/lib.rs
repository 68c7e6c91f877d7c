//! Engine for sky, a Datalog dialect with guess directives, denial
//! constraints and circumscriptive minimal-model semantics.
//!
//! The pipeline is [`parser::parse_program`] → [`grounder::ground_program`] →
//! either [`circumscription::enumerate_bruteforce`] (the reference oracle) or
//! [`backtrack::solve`] in enumerate or backtrack mode. All three return the
//! same [`circumscription::ModelSet`] on untruncated runs.
//!
//! Negation is stratified. Constraints may negate any predicate, including
//! guess predicates, since they are checked against completed models.

pub mod analysis;
pub mod ast;
pub mod backtrack;
pub mod circumscription;
pub mod fixpoint;
pub mod grounder;
pub mod parser;

pub use ast::{Program, Rule};
pub use backtrack::{solve, SolveConfig, SolveMode, SolverStats};
pub use circumscription::{enumerate_bruteforce, ModelSet, OracleConfig};
pub use fixpoint::Interpretation;
pub use grounder::{ground_program, GroundAtom, GroundProgram};
pub use parser::{parse_program, LoadError};
