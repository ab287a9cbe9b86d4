use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use serde_json::{json, Value};

/// A command's result: JSON for `--json`, text otherwise.
pub struct Output {
    pub json: Value,
    pub human: String,
    /// False when the command ran but its checks failed (exit 1).
    pub ok: bool,
}

impl Output {
    pub fn new(json: Value, human: impl Into<String>) -> Self {
        Output { json, human: human.into(), ok: true }
    }

    pub fn failed_if(mut self, failed: bool) -> Self {
        self.ok = !failed;
        self
    }

    pub fn emit(self, json: bool) -> ExitCode {
        if json {
            println!("{}", serde_json::to_string_pretty(&self.json).expect("serializable"));
        } else {
            print!("{}", self.human);
            if !self.human.ends_with('\n') {
                println!();
            }
        }
        ExitCode::from(if self.ok { 0 } else { 1 })
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Input was rejected or verification failed (exit 1).
    Invalid { name: String, class: String, message: String },
    /// Unusable configuration (exit 2).
    Config(String),
    /// File system trouble (exit 2).
    Io(String),
}

impl CliError {
    pub fn invalid(name: &str, class: impl fmt::Display, message: impl fmt::Display) -> Self {
        CliError::Invalid { name: name.to_string(), class: class.to_string(), message: message.to_string() }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Invalid { name, class, message } => json!({ "ok": false, "error": name, "class": class, "message": message }),
            CliError::Config(m) => json!({ "ok": false, "error": "BadConfig", "class": "config", "message": m }),
            CliError::Io(m) => json!({ "ok": false, "error": "Io", "class": "io", "message": m }),
        }
    }

    pub fn emit(self, json: bool) -> ExitCode {
        if json {
            println!("{}", serde_json::to_string_pretty(&self.to_json()).expect("serializable"));
        } else {
            eprintln!("error: {self}");
        }
        ExitCode::from(self.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid { name, class, message } => write!(f, "{name} ({class}): {message}"),
            CliError::Config(m) => write!(f, "bad config: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}
