//! One function per subcommand. Each writes its tables into the output
//! directory and returns the `results` object of `summary.json`.

mod catalog;
mod commute;
mod measure;

use std::path::PathBuf;

use flowlab::commute::BoundGrids;
use flowlab::field::catalog::Registry;
use flowlab::field::SingularSet;
use flowlab::measure::{sample_reference_measure, ParticleEnsemble, Source};
use flowlab::{Field, Pair};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::Output;
use crate::settings::{to_count, vector, Experiment, RunConfig};

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub registry: Registry<f64>,
    pub out: Output,
    pub notes: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        let mut registry = Registry::builtin();
        registry.load_document(&cfg.doc)?;
        let out = Output::create(&cfg.out, &cfg.hash)?;
        Ok(Self {
            cfg,
            registry,
            out,
            notes: Vec::new(),
        })
    }

    pub fn pair(&self, default: &str) -> Result<Pair, CliError> {
        let name = self.cfg.root().get("pair").unwrap_or(default);
        Ok(self.registry.pair(name)?.clone())
    }

    pub fn field(&self, default: &str) -> Result<Field, CliError> {
        let name = self.cfg.root().get("field").unwrap_or(default);
        Ok(self.registry.field(name)?.clone())
    }

    pub fn named_field(&self, name: &str) -> Result<Field, CliError> {
        Ok(self.registry.field(name)?.clone())
    }

    /// Reference sample avoiding `singular` (when non-empty), with the
    /// `[region] exclusion` override applied.
    pub fn ensemble(
        &self,
        source: &Source<f64>,
        n: usize,
        singular: &SingularSet<f64>,
    ) -> Result<ParticleEnsemble<f64>, CliError> {
        let mut set = singular.clone();
        if let Some(eps) = self.cfg.exclusion()? {
            set = set.with_exclusion(eps);
        }
        let exclude = (!set.is_empty()).then_some(&set);
        Ok(sample_reference_measure(source, n, self.cfg.seed, exclude)?)
    }

    /// `[bounds]`: norm and density grids plus time intervals.
    pub fn bound_grids(&self, dim: usize) -> Result<BoundGrids<f64>, CliError> {
        let sec = self.cfg.section("bounds");
        let defaults = BoundGrids::<f64>::default_for(dim);
        let lo = vector(&sec, "lo", dim)?.unwrap_or_else(|| defaults.norm_grid.lo.clone());
        let hi = vector(&sec, "hi", dim)?.unwrap_or_else(|| defaults.norm_grid.hi.clone());
        let cells = |key: &str, d: usize| -> Result<usize, CliError> {
            match crate::settings::number(&sec, key)? {
                Some(v) => to_count(v, key),
                None => Ok(d),
            }
        };
        let norm_cells = cells("norm_cells", defaults.norm_grid.shape[0])?;
        let density_cells = cells("density_cells", defaults.density_grid.shape[0])?;
        let time_intervals = cells("time_intervals", defaults.time_intervals)?;
        Ok(BoundGrids {
            norm_grid: flowlab::measure::Grid::new(lo.clone(), hi.clone(), vec![norm_cells; dim])?,
            density_grid: flowlab::measure::Grid::new(lo, hi, vec![density_cells; dim])?,
            time_intervals,
        })
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub hash: String,
    pub workers: usize,
}

pub fn effective_workers(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Runs the configured experiment on a dedicated thread pool.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let workers = effective_workers(cfg.workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut ctx = Ctx::new(cfg)?;
        let results = dispatch(&mut ctx)?;
        let Ctx { out, notes, .. } = ctx;
        let summary = if notes.is_empty() {
            results
        } else {
            let mut r = results;
            r["notes"] = json!(notes);
            r
        };
        let files = out.finish(cfg, workers, summary)?;
        Ok(RunOutcome {
            dir: cfg.out.clone(),
            files,
            hash: cfg.hash.clone(),
            workers,
        })
    })
}

fn dispatch(ctx: &mut Ctx) -> Result<Value, CliError> {
    match ctx.cfg.experiment {
        Experiment::Defect => commute::defect(ctx),
        Experiment::Ladder => commute::ladder(ctx),
        Experiment::Concentrate => commute::concentrate(ctx),
        Experiment::Stability => commute::stability(ctx),
        Experiment::Compress => measure::compress(ctx),
        Experiment::Maximal => measure::maximal(ctx),
        Experiment::Sobolev => measure::sobolev(ctx),
        Experiment::Catalog => catalog::catalog(ctx),
        Experiment::Bracket => catalog::bracket(ctx),
        Experiment::Trajectory => catalog::trajectory(ctx),
    }
}

/// `[section] window = a, b`.
pub(crate) fn window(
    sec: &flowlab::config::Section,
    default: (f64, f64),
) -> Result<flowlab::flow::TimeWindow<f64>, CliError> {
    let w = crate::settings::list(sec, "window")?.unwrap_or_else(|| vec![default.0, default.1]);
    if w.len() != 2 {
        return Err(CliError::Config(format!(
            "window needs two values, got {}",
            w.len()
        )));
    }
    Ok(flowlab::flow::TimeWindow::new(w[0], w[1])?)
}
