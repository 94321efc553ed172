//! Process-level error type carrying the exit code convention:
//! 1 = domain error in input data, 2 = IO/config error, 3 = mathematical
//! infeasibility or inconsistent inputs.

use std::fmt;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn domain(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn math(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::io(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io(format!("csv: {e}"))
    }
}

impl From<htk_core::grammar::GrammarError> for CliError {
    fn from(e: htk_core::grammar::GrammarError) -> Self {
        CliError::domain(e.to_string())
    }
}

impl From<htk_core::grammar::RuleViolation> for CliError {
    fn from(e: htk_core::grammar::RuleViolation) -> Self {
        CliError::domain(e.to_string())
    }
}

impl From<htk_core::taxonomy::TaxonomyError> for CliError {
    fn from(e: htk_core::taxonomy::TaxonomyError) -> Self {
        CliError::domain(e.to_string())
    }
}

impl From<htk_core::embed::EmbedError> for CliError {
    fn from(e: htk_core::embed::EmbedError) -> Self {
        use htk_core::embed::EmbedError;
        match e {
            EmbedError::InfeasibleHierarchy { .. } | EmbedError::SingularStep { .. } => {
                CliError::math(e.to_string())
            }
            _ => CliError::domain(e.to_string()),
        }
    }
}

impl From<htk_core::cluster::ClusterError> for CliError {
    fn from(e: htk_core::cluster::ClusterError) -> Self {
        use htk_core::cluster::ClusterError;
        match e {
            ClusterError::EmptyRetainedSet { .. } => CliError::math(e.to_string()),
            _ => CliError::domain(e.to_string()),
        }
    }
}

impl From<htk_core::simgen::SimgenError> for CliError {
    fn from(e: htk_core::simgen::SimgenError) -> Self {
        use htk_core::simgen::SimgenError;
        match e {
            SimgenError::InvalidConfig { .. } | SimgenError::InvalidFractions { .. } => {
                CliError::io(e.to_string())
            }
            _ => CliError::domain(e.to_string()),
        }
    }
}
