use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{KlError, Result};

/// Right endpoint of the domain `[0, eta)` of a desingularizing function.
///
/// Either a finite positive real or `+inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "EtaRepr", into = "EtaRepr")]
pub struct Eta(f64);

impl Eta {
    pub const INFINITE: Eta = Eta(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return Err(KlError::arg(format!("eta must be positive, got {value}")));
        }
        Ok(Eta(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn min(self, other: Eta) -> Eta {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    /// Whether `t` lies in the open interval `(0, eta)`.
    pub fn contains_open(self, t: f64) -> bool {
        t > 0.0 && t < self.0
    }
}

impl Default for Eta {
    fn default() -> Self {
        Eta::INFINITE
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Eta {
    type Err = KlError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Eta::INFINITE);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| KlError::arg(format!("cannot parse eta from {s:?}")))?;
        Eta::new(v)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EtaRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<EtaRepr> for Eta {
    type Error = KlError;

    fn try_from(r: EtaRepr) -> Result<Self> {
        match r {
            EtaRepr::Num(v) => Eta::new(v),
            EtaRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Eta> for EtaRepr {
    fn from(e: Eta) -> Self {
        if e.0.is_infinite() {
            EtaRepr::Text("inf".into())
        } else {
            EtaRepr::Num(e.0)
        }
    }
}
