use serde_json::{json, Map, Value};
use thiserror::Error;

use bayeslens_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_ZERO_MASS: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed model: {0}")]
    Parse(String),

    /// A model-level problem the engine itself does not know about.
    #[error("{message}")]
    Model { code: &'static str, message: String },

    #[error("{}{source}", context.as_deref().map(|c| format!("{c}: ")).unwrap_or_default())]
    Core {
        context: Option<String>,
        #[source]
        source: CoreError,
    },
}

impl From<CoreError> for CliError {
    fn from(source: CoreError) -> Self {
        CliError::Core { context: None, source }
    }
}

impl CliError {
    pub fn model(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Model {
            code,
            message: message.into(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "parse",
            CliError::Model { code, .. } => code,
            CliError::Core { source, .. } => source.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core {
                source: CoreError::ZeroMassObservation { .. },
                ..
            } => EXIT_ZERO_MASS,
            _ => EXIT_FAILURE,
        }
    }

    /// Machine-readable form, printed on stdout.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("status".into(), json!("error"));
        m.insert("error".into(), json!(self.code()));
        if let CliError::Core { context, source } = self {
            if let Some(c) = context {
                m.insert("at".into(), json!(c));
            }
            match source {
                CoreError::RowSumViolation { row, .. } => {
                    m.insert("row".into(), json!(row));
                }
                CoreError::InvalidEntry { row, col, .. } => {
                    m.insert("row".into(), json!(row));
                    m.insert("col".into(), json!(col));
                }
                CoreError::UnboundName { name, .. } => {
                    m.insert("name".into(), json!(name));
                }
                CoreError::ZeroMassObservation { index } => {
                    m.insert("observation".into(), json!(index));
                }
                _ => {}
            }
        }
        m.insert("message".into(), json!(self.to_string()));
        Value::Object(m)
    }
}

pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: Some(what()),
            source,
        })
    }
}
