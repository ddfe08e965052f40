//! Run configuration: the parsed document, the effective seed and the hash.

use std::path::{Path, PathBuf};

use flowlab::config::{parse_number, Document, Entry, Section};
use flowlab::flow::FlowMethod;
use flowlab::linalg::Matrix;
use flowlab::measure::{Grid, Source};
use flowlab::Function;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Defect,
    Ladder,
    Compress,
    Maximal,
    Sobolev,
    Concentrate,
    Stability,
    Catalog,
    Bracket,
    Trajectory,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Self::Defect,
        Self::Ladder,
        Self::Compress,
        Self::Maximal,
        Self::Sobolev,
        Self::Concentrate,
        Self::Stability,
        Self::Catalog,
        Self::Bracket,
        Self::Trajectory,
    ];

    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Self::Defect => "defect",
            Self::Ladder => "ladder",
            Self::Compress => "compress",
            Self::Maximal => "maximal",
            Self::Sobolev => "sobolev",
            Self::Concentrate => "concentrate",
            Self::Stability => "stability",
            Self::Catalog => "catalog",
            Self::Bracket => "bracket",
            Self::Trajectory => "trajectory",
        }
    }

    /// Accepts the subcommand name or the long experiment name.
    pub fn from_config_name(s: &str) -> Option<Self> {
        Some(match s {
            "defect" | "commutator_defect" => Self::Defect,
            "ladder" | "residual_ladder" => Self::Ladder,
            "compress" | "compressibility" => Self::Compress,
            "maximal" | "maximal_decay" => Self::Maximal,
            "sobolev" | "sobolev_audit" => Self::Sobolev,
            "concentrate" | "concentration" => Self::Concentrate,
            "stability" => Self::Stability,
            "catalog" => Self::Catalog,
            "bracket" => Self::Bracket,
            "trajectory" => Self::Trajectory,
            _ => return None,
        })
    }

    pub fn needs_seed(self) -> bool {
        !matches!(self, Self::Catalog)
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub doc: Document,
    pub seed: u64,
    /// Zero means one worker per core.
    pub workers: usize,
    pub out: PathBuf,
    pub plots: bool,
    /// Canonical document with the effective seed, without `workers`.
    pub canonical: String,
    pub hash: String,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub plots: bool,
}

impl RunConfig {
    pub fn load(
        experiment: Experiment,
        path: Option<&Path>,
        overrides: Overrides,
    ) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
            None => String::new(),
        };
        Self::from_text(experiment, &text, overrides)
    }

    pub fn from_text(
        experiment: Experiment,
        text: &str,
        overrides: Overrides,
    ) -> Result<Self, CliError> {
        let doc = Document::parse(text)?;
        let root = doc.root();
        if let Some(name) = root.get("experiment") {
            match Experiment::from_config_name(name) {
                Some(e) if e == experiment => {}
                Some(e) => {
                    return Err(CliError::Config(format!(
                        "config is for `{}` but the subcommand is `{}`",
                        e.name(),
                        experiment.name()
                    )))
                }
                None => return Err(CliError::Config(format!("unknown experiment `{name}`"))),
            }
        }
        let seed = match overrides.seed {
            Some(s) => s,
            None => match root.parse::<u64>("seed")? {
                Some(s) => s,
                None if experiment.needs_seed() => {
                    return Err(CliError::Config(
                        "a seed is required: pass --seed or set `seed` in the config".into(),
                    ))
                }
                None => 0,
            },
        };
        let workers = match overrides.workers {
            Some(w) => w,
            None => root.parse_or("workers", 0usize)?,
        };
        let canonical = hashed_form(&doc, experiment, seed);
        let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        Ok(Self {
            experiment,
            doc,
            seed,
            workers,
            out: overrides.out.unwrap_or_else(|| PathBuf::from("out")),
            plots: overrides.plots,
            canonical,
            hash,
        })
    }

    pub fn root(&self) -> &Section {
        self.doc.root()
    }

    /// The named section, or an empty one.
    pub fn section(&self, kind: &str) -> Section {
        self.doc.section(kind).cloned().unwrap_or_else(|| Section {
            kind: kind.to_string(),
            label: None,
            line: 0,
            entries: Vec::new(),
        })
    }

    pub fn method(&self) -> Result<FlowMethod<f64>, CliError> {
        let root = self.root();
        let tol = number(root, "tol")?.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0) {
            return Err(CliError::Config(format!("tol must be positive, got {tol}")));
        }
        match root.get("method").unwrap_or("numeric") {
            "numeric" => Ok(FlowMethod::Numeric(tol)),
            "oracle" | "analytic" => Ok(FlowMethod::AnalyticOracle),
            other => Err(CliError::Config(format!("unknown method `{other}`"))),
        }
    }

    pub fn samples(&self, default: usize) -> Result<usize, CliError> {
        let n = self.root().parse_or("samples", default)?;
        if n == 0 {
            return Err(CliError::Config("samples must be positive".into()));
        }
        Ok(n)
    }

    /// `[region]`: `kind = gaussian` (`mean`, `sigma`) or `kind = box`
    /// (`lo`, `hi`), optionally conditioned on `restrict_lo`/`restrict_hi`.
    pub fn region(&self, dim: usize) -> Result<Source<f64>, CliError> {
        let sec = self.section("region");
        let base = match sec.get("kind").unwrap_or("gaussian") {
            "gaussian" => Source::Gaussian {
                mean: vector(&sec, "mean", dim)?.unwrap_or_else(|| vec![0.0; dim]),
                sigma: number(&sec, "sigma")?.unwrap_or(1.0),
            },
            "box" => Source::uniform_box(
                vector(&sec, "lo", dim)?.unwrap_or_else(|| vec![-1.0; dim]),
                vector(&sec, "hi", dim)?.unwrap_or_else(|| vec![1.0; dim]),
            ),
            other => return Err(CliError::Config(format!("unknown region kind `{other}`"))),
        };
        Ok(
            match (
                vector(&sec, "restrict_lo", dim)?,
                vector(&sec, "restrict_hi", dim)?,
            ) {
                (None, None) => base,
                (lo, hi) => base.restricted(
                    lo.unwrap_or_else(|| vec![f64::NEG_INFINITY; dim]),
                    hi.unwrap_or_else(|| vec![f64::INFINITY; dim]),
                ),
            },
        )
    }

    /// Sampler exclusion radius around singular sets, if overridden.
    pub fn exclusion(&self) -> Result<Option<f64>, CliError> {
        number(&self.section("region"), "exclusion")
    }

    /// `[<kind>]` with `lo`, `hi`, `cells`; scalars are broadcast over axes.
    pub fn grid(
        &self,
        kind: &str,
        dim: usize,
        lo: f64,
        hi: f64,
        cells: usize,
    ) -> Result<Grid<f64>, CliError> {
        let sec = self.section(kind);
        let lo = vector(&sec, "lo", dim)?.unwrap_or_else(|| vec![lo; dim]);
        let hi = vector(&sec, "hi", dim)?.unwrap_or_else(|| vec![hi; dim]);
        let shape = match vector(&sec, "cells", dim)? {
            Some(v) => v
                .iter()
                .map(|&c| to_count(c, "cells"))
                .collect::<Result<_, _>>()?,
            None => vec![cells; dim],
        };
        Ok(Grid::new(lo, hi, shape)?)
    }

    /// `[function]`: `kind = bump | gaussian | sin_cos | linear | quadratic | zero`.
    pub fn function(&self, default_kind: &str, default_dim: usize) -> Result<Function, CliError> {
        let sec = self.section("function");
        let dim = sec.parse_or("dim", default_dim)?;
        Ok(match sec.get("kind").unwrap_or(default_kind) {
            "bump" => Function::bump(dim, number(&sec, "radius")?.unwrap_or(0.5)),
            "gaussian" => Function::gaussian(dim, number(&sec, "sigma")?.unwrap_or(0.3)),
            "sin_cos" => Function::sin_cos(),
            "zero" => Function::zero(dim),
            "linear" => Function::linear(
                vector(&sec, "coeffs", dim)?.unwrap_or_else(|| vec![1.0; dim]),
                number(&sec, "intercept")?.unwrap_or(0.0),
            ),
            "quadratic" => {
                let flat = list(&sec, "matrix")?.unwrap_or_else(|| {
                    let mut m = vec![0.0; dim * dim];
                    for i in 0..dim {
                        m[i * dim + i] = 1.0;
                    }
                    m
                });
                if flat.len() != dim * dim {
                    return Err(CliError::Config(format!(
                        "quadratic matrix needs {} entries, got {}",
                        dim * dim,
                        flat.len()
                    )));
                }
                let matrix = Matrix::from_fn(dim, dim, |i, j| flat[i * dim + j]);
                Function::quadratic(
                    matrix,
                    vector(&sec, "c", dim)?.unwrap_or_else(|| vec![0.0; dim]),
                )
            }
            other => return Err(CliError::Config(format!("unknown function kind `{other}`"))),
        })
    }
}

fn hashed_form(doc: &Document, experiment: Experiment, seed: u64) -> String {
    let mut doc = doc.clone();
    let root = &mut doc.sections[0];
    root.entries
        .retain(|e| !matches!(e.key.as_str(), "seed" | "workers" | "experiment"));
    for (key, value) in [
        ("experiment", experiment.name().to_string()),
        ("seed", seed.to_string()),
    ] {
        root.entries.push(Entry {
            key: key.into(),
            value,
            line: 0,
        });
    }
    doc.canonical()
}

pub fn number(sec: &Section, key: &str) -> Result<Option<f64>, CliError> {
    match sec.get(key) {
        None => Ok(None),
        Some(v) => parse_number(v.trim()).map(Some).ok_or_else(|| {
            CliError::Config(format!("[{}] `{key}`: `{v}` is not a number", sec.kind))
        }),
    }
}

pub fn list(sec: &Section, key: &str) -> Result<Option<Vec<f64>>, CliError> {
    Ok(sec.parse_list(key)?)
}

/// A list of length `dim`, or a single value broadcast to it.
pub fn vector(sec: &Section, key: &str, dim: usize) -> Result<Option<Vec<f64>>, CliError> {
    match list(sec, key)? {
        None => Ok(None),
        Some(v) if v.len() == dim => Ok(Some(v)),
        Some(v) if v.len() == 1 => Ok(Some(vec![v[0]; dim])),
        Some(v) => Err(CliError::Config(format!(
            "[{}] `{key}` needs {dim} values, got {}",
            sec.kind,
            v.len()
        ))),
    }
}

pub fn words<'a>(sec: &'a Section, key: &str, default: &'a str) -> Vec<&'a str> {
    sec.get(key)
        .unwrap_or(default)
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .collect()
}

pub fn to_count(v: f64, what: &str) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e12 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!(
            "{what} must be a positive integer, got {v}"
        )))
    }
}
