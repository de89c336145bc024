//! Problem files, command dispatch and reports for the `uniconv` binary.

pub mod problem;
pub mod report;
pub mod run;

pub use problem::{parse_problem_file, ParseError, ProblemFile};
pub use report::{render, write_atomic, Format};
pub use run::{run, Command, Flags, Report};
