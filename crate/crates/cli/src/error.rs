use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("{key}: {msg}")]
    Range { key: String, msg: String },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] conflab::Error),
}

impl CliError {
    pub(crate) fn range(key: &str, msg: impl Into<String>) -> CliError {
        CliError::Range { key: key.to_string(), msg: msg.into() }
    }

    /// 0 ok, 2 solver failure or exhausted search, 3 configuration,
    /// 4 numerical precondition, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use conflab::Error as E;
        match self {
            CliError::Parse { .. }
            | CliError::UnknownKey { .. }
            | CliError::Range { .. }
            | CliError::Missing { .. }
            | CliError::Usage(_) => 3,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                E::SolveFailure { .. }
                | E::NotFound(_)
                | E::EigenFailure(_)
                | E::NoBracket(_)
                | E::SingularOperator { .. }
                | E::NoWitness => 2,
                E::NotYamabePositive { .. }
                | E::ConformalKillingKernel { .. }
                | E::Precondition(_)
                | E::NotAssociation { .. } => 4,
                E::InvalidMetric(_)
                | E::ShapeMismatch { .. }
                | E::InvalidExponent(_)
                | E::InvalidTT(_)
                | E::InvalidTransform(_)
                | E::InvalidState(_)
                | E::InvalidLayout(_)
                | E::Profile(_) => 3,
            },
        }
    }
}
