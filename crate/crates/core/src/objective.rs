use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

/// Window objective: fixed window of length `ℓ`, or bounded window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Fwmp(usize),
    Bwmp,
}

impl Objective {
    pub fn fwmp(window: usize) -> Self {
        assert!(window >= 1, "window length must be positive");
        Objective::Fwmp(window)
    }

    pub fn window(self) -> Option<usize> {
        match self {
            Objective::Fwmp(l) => Some(l),
            Objective::Bwmp => None,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Fwmp(l) => write!(f, "fwmp({l})"),
            Objective::Bwmp => write!(f, "bwmp"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sure guarantee.
    Bwc,
    /// Guarantee with probability at least `p`.
    Bp,
    /// Almost-sure guarantee.
    Bas,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Bwc => "bwc",
            Mode::Bp => "bp",
            Mode::Bas => "bas",
        })
    }
}

/// A synthesis question: guarantee `alpha` (with probability `prob` in BP mode)
/// while reaching expectation `beta` from `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuaranteeQuery {
    pub mode: Mode,
    pub objective: Objective,
    pub alpha: Rational,
    pub beta: Rational,
    pub prob: Option<Rational>,
    pub start: String,
}
