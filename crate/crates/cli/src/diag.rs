use std::fmt;

use hlsflow_core::SourceSpan;

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_LOWER: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One line of `path:line:col: severity: message`; the position is
/// omitted when unknown.
#[derive(Debug, Clone)]
pub struct Diag {
    pub path: String,
    pub span: Option<SourceSpan>,
    pub severity: Severity,
    pub message: String,
}

impl Diag {
    pub fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diag { path: path.into(), span: None, severity: Severity::Error, message: message.into() }
    }

    pub fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diag { severity: Severity::Warning, ..Diag::error(path, message) }
    }

    pub fn at(mut self, span: Option<SourceSpan>) -> Self {
        self.span = span;
        self
    }
}

impl fmt::Display for Diag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.span {
            Some(s) => write!(f, "{}:{}:{}: {sev}: {}", self.path, s.line, s.column, self.message),
            None => write!(f, "{}: {sev}: {}", self.path, self.message),
        }
    }
}

/// A failed command: its diagnostics and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub diags: Vec<Diag>,
}

impl Failure {
    pub fn new(code: u8, diag: Diag) -> Self {
        Failure { code, diags: vec![diag] }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(EXIT_USAGE, Diag::error("hlsflow", message))
    }
}

pub type CmdResult = Result<(), Failure>;
