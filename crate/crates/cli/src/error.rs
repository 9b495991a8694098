use std::path::{Path, PathBuf};

use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {message}")]
    Config {
        message: String,
        field: Option<String>,
    },

    #[error("missing input {}: {message}", path.display())]
    MissingInput { path: PathBuf, message: String },

    #[error("write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Core(#[from] picker_bench::Error),
}

/// Pulls the field name out of serde's "missing field `x`" / "unknown field `x`".
fn field_of(message: &str) -> Option<String> {
    ["missing field `", "unknown field `"].iter().find_map(|p| {
        let rest = &message[message.find(p)? + p.len()..];
        Some(rest[..rest.find('`')?].to_string())
    })
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        let message = message.into();
        CliError::Config {
            field: field_of(&message),
            message,
        }
    }

    /// A schema violation at `path` (dotted, "." for the root object). Missing
    /// and unknown keys are reported with their full path.
    pub fn schema(path: &str, message: String) -> Self {
        // The path already ends at an unknown key but stops above a missing one.
        let field = match (message.starts_with("missing field"), field_of(&message)) {
            (true, Some(leaf)) if path != "." && !path.is_empty() => Some(format!("{path}.{leaf}")),
            (_, Some(leaf)) if path == "." || path.is_empty() => Some(leaf),
            _ if path == "." || path.is_empty() => None,
            _ => Some(path.to_string()),
        };
        let message = match path {
            "." | "" => message,
            p => format!("{p}: {message}"),
        };
        CliError::Config { message, field }
    }

    pub fn invalid_field(field: &str, message: &str) -> Self {
        CliError::Config {
            message: format!("{field}: {message}"),
            field: Some(field.to_string()),
        }
    }

    pub fn missing(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::MissingInput {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::MissingInput { .. } => 3,
            CliError::Write { .. } => 4,
            CliError::Core(_) => 1,
        }
    }

    /// One-line JSON for stderr.
    pub fn record(&self, subcommand: &str) -> Value {
        let mut rec = json!({
            "status": "error",
            "subcommand": subcommand,
            "message": self.to_string(),
        });
        let (kind, extra) = match self {
            CliError::Config { field, .. } => ("config", field.clone().map(|f| ("field", f))),
            CliError::MissingInput { path, .. } => {
                ("missing_input", Some(("path", path.display().to_string())))
            }
            CliError::Write { path, .. } => ("write", Some(("path", path.display().to_string()))),
            CliError::Core(_) => ("core", None),
        };
        rec["kind"] = kind.into();
        if let Some((k, v)) = extra {
            rec[k] = v.into();
        }
        rec
    }
}
