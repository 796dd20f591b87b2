use std::path::Path;

use hanoi_core::coverage::CoverageError;
use hanoi_core::instance::InstanceError;
use hanoi_core::planner::PlanError;
use hanoi_core::rewards::RewardError;
use hanoi_core::simulator::BenchmarkError;
use hanoi_core::skills::ConfigError;
use serde::Serialize;

/// Failure of a subcommand, mapped onto a distinct exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Io(String),
    Schema(String),
    Invalid(String),
    Other(String),
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: &'a str,
    exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Schema(_) => 4,
            CliError::Invalid(_) => 5,
            CliError::Other(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Schema(_) => "schema",
            CliError::Invalid(_) => "invalid",
            CliError::Other(_) => "other",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Io(m)
            | CliError::Schema(m)
            | CliError::Invalid(m)
            | CliError::Other(m) => m,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorReport {
            error: self.kind(),
            message: self.message(),
            exit_code: self.exit_code(),
        })
        .expect("error report serializes")
    }

    /// Prefix the message with the file it concerns.
    pub fn with_context(self, path: &Path) -> Self {
        let m = format!("{}: {}", path.display(), self.message());
        match self {
            CliError::Usage(_) => CliError::Usage(m),
            CliError::Io(_) => CliError::Io(m),
            CliError::Schema(_) => CliError::Schema(m),
            CliError::Invalid(_) => CliError::Invalid(m),
            CliError::Other(_) => CliError::Other(m),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Schema(_) => CliError::Schema(e.to_string()),
            ConfigError::UnknownPreset(_) => CliError::Usage(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::Schema(_) => CliError::Schema(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::Schema(_) => CliError::Schema(e.to_string()),
            RewardError::UnknownSkill(_) => CliError::Usage(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<CoverageError> for CliError {
    fn from(e: CoverageError) -> Self {
        match e {
            CoverageError::Schema(_) => CliError::Schema(e.to_string()),
            CoverageError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<BenchmarkError> for CliError {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::NoEpisodes => CliError::Usage(e.to_string()),
            BenchmarkError::Instance(e) => e.into(),
            BenchmarkError::Plan(e) => e.into(),
            BenchmarkError::Episode(_) => CliError::Invalid(e.to_string()),
            BenchmarkError::Pool(_) => CliError::Other(e.to_string()),
        }
    }
}
