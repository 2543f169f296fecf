//! File formats: problem files, reports, solution files and standard-form dumps.

pub mod dump;
pub mod json;
pub mod problem;
pub mod report;

pub use dump::{read_dump, write_dump, StandardForm};
pub use json::Real;
pub use problem::{parse_problem, problem_to_string, ProblemFile, SCHEMA_VERSION};
pub use report::{CertifyInput, ReportFile, SettingsEcho, SolutionFile};
