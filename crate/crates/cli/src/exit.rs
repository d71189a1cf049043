//! Exit codes: 0 ok, 1 usage, 2 validation, 3 resource, 4 analysis.

use std::fmt;

pub const USAGE: u8 = 1;
pub const VALIDATION: u8 = 2;
pub const RESOURCE: u8 = 3;
pub const ANALYSIS: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure { code, error: error.into() }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

pub trait OrExit<T> {
    fn or_exit(self, code: u8) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> Outcome<T> {
        self.map_err(|e| Failure::new(code, e))
    }
}

pub fn fail<T>(code: u8, msg: impl fmt::Display) -> Outcome<T> {
    Err(Failure { code, error: anyhow::anyhow!("{msg}") })
}
