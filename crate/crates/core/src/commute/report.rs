//! Residual reports and their CSV form.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::{Error, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResidualKind {
    A,
    B,
    R,
    Concentration,
    ChainRule,
    Stability,
}

impl ResidualKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::R => "R",
            Self::Concentration => "concentration",
            Self::ChainRule => "chain_rule",
            Self::Stability => "stability",
        }
    }
}

impl fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResidualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "A" | "a" => Self::A,
            "B" | "b" => Self::B,
            "R" | "r" => Self::R,
            "concentration" => Self::Concentration,
            "chain_rule" => Self::ChainRule,
            "stability" => Self::Stability,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown residual kind `{other}`"
                )))
            }
        })
    }
}

/// A norm estimate and the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport<T> {
    pub kind: ResidualKind,
    /// Named parameters in insertion order.
    pub params: Vec<(String, f64)>,
    pub value: T,
    pub sample_count: usize,
    pub seed: u64,
}

impl<T: Scalar> ResidualReport<T> {
    pub fn new(kind: ResidualKind, value: T, sample_count: usize, seed: u64) -> Self {
        Self {
            kind,
            params: Vec::new(),
            value,
            sample_count,
            seed,
        }
    }

    pub fn with(mut self, name: &str, v: T) -> Self {
        self.params.push((name.to_string(), v.to_f64_lossy()));
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

/// One row per report; the parameter columns are the union of all names,
/// in first-seen order, left empty where a report lacks them.
pub fn reports_to_csv<T: Scalar>(reports: &[ResidualReport<T>]) -> String {
    let mut cols: Vec<&str> = Vec::new();
    for r in reports {
        for (k, _) in &r.params {
            if !cols.contains(&k.as_str()) {
                cols.push(k);
            }
        }
    }
    let mut out = String::from("kind");
    for c in &cols {
        let _ = write!(out, ",{c}");
    }
    out.push_str(",value,sample_count,seed\n");
    for r in reports {
        out.push_str(r.kind.as_str());
        for c in &cols {
            out.push(',');
            if let Some(v) = r.param(c) {
                let _ = write!(out, "{v}");
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            r.value.to_f64_lossy(),
            r.sample_count,
            r.seed
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_union_of_columns() {
        let a = ResidualReport::new(ResidualKind::A, 0.5f64, 10, 1)
            .with("s", 0.5)
            .with("delta", 0.125);
        let b = ResidualReport::new(ResidualKind::B, 0.25f64, 10, 1).with("t", 0.0);
        assert_eq!(
            reports_to_csv(&[a, b]),
            "kind,s,delta,t,value,sample_count,seed\nA,0.5,0.125,,0.5,10,1\nB,,,0,0.25,10,1\n"
        );
    }

    #[test]
    fn kind_round_trip() {
        for k in [
            ResidualKind::A,
            ResidualKind::Concentration,
            ResidualKind::Stability,
        ] {
            assert_eq!(k.as_str().parse::<ResidualKind>().unwrap(), k);
        }
    }
}
