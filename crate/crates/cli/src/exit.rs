//! Exit-code classes: 2 for bad input or configuration, 3 for index
//! problems, 4 when some chunks were never accepted.

use std::fmt;

pub const PARTIAL: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Input,
    Index,
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input => 2,
            Failure::Index => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Failure::Input => "input error",
            Failure::Index => "index error",
        })
    }
}

impl std::error::Error for Failure {}

/// Attaches an exit class to an error while keeping its message chain.
pub trait Classify<T> {
    fn input(self) -> anyhow::Result<T>;
    fn index(self) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> anyhow::Result<T> {
        self.map_err(|e| e.into().context(Failure::Input))
    }

    fn index(self) -> anyhow::Result<T> {
        self.map_err(|e| e.into().context(Failure::Index))
    }
}
