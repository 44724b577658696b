use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedcore::Algorithm;

use super::config::ExperimentConfig;
use super::experiment::{
    format_float, rounds_to_threshold, run_experiment, stationarity_floor, write_atomic,
};

pub const SUMMARY_HEADER: &str = "axis,value,seed,floor,rounds_to_threshold";

/// Environment variable capping the number of sweep cells run at once; 0 or unset means all cores.
pub const THREADS_ENV: &str = "FEDPART_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "m")]
    M,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "algorithm")]
    Algorithm,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::M => "m",
            SweepAxis::K => "K",
            SweepAxis::Algorithm => "algorithm",
        }
    }
}

/// One grid point: a number for `gamma`, `m`, `K`, or an algorithm name.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(i64),
    Float(f64),
    Algorithm(Algorithm),
}

impl SweepValue {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            SweepValue::Int(i) => Some(i as f64),
            SweepValue::Float(x) => Some(x),
            SweepValue::Algorithm(_) => None,
        }
    }

    /// Positive integer value, for the `m` and `K` axes.
    fn as_count(self) -> Option<usize> {
        match self {
            SweepValue::Int(i) if i >= 1 => Some(i as usize),
            SweepValue::Float(x) if x >= 1.0 && x.fract() == 0.0 => Some(x as usize),
            _ => None,
        }
    }
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Int(i) => write!(f, "{i}"),
            SweepValue::Float(x) => write!(f, "{x}"),
            SweepValue::Algorithm(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    axis: SweepAxis,
    values: Vec<SweepValue>,
    seeds: Vec<u64>,
    #[serde(default = "default_threshold")]
    threshold: f64,
    output_dir: PathBuf,
    #[serde(default)]
    base: toml::Table,
}

fn default_threshold() -> f64 {
    1e-3
}

/// A grid over one hyperparameter and a list of seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    pub output_dir: PathBuf,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SweepFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let base = ExperimentConfig::from_toml_str(
            &toml::to_string(&file.base).map_err(|e| Error::Parse(e.to_string()))?,
        )?;
        let spec = SweepSpec {
            base,
            axis: file.axis,
            values: file.values,
            seeds: file.seeds,
            threshold: file.threshold,
            output_dir: file.output_dir,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::validation("values", "at least one value required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("seeds", "at least one seed required"));
        }
        let fits = |v: &SweepValue| match self.axis {
            SweepAxis::Gamma => v.as_f64().is_some(),
            SweepAxis::M | SweepAxis::K => v.as_count().is_some(),
            SweepAxis::Algorithm => matches!(v, SweepValue::Algorithm(_)),
        };
        if let Some(v) = self.values.iter().find(|v| !fits(v)) {
            return Err(Error::validation(
                "values",
                format!("{v} is not a valid {} value", self.axis.name()),
            ));
        }
        for (value, seed) in self.cells() {
            self.cell_config(value, seed).validate()?;
        }
        Ok(())
    }

    /// Cells in row-major order: values outer, seeds inner.
    pub fn cells(&self) -> Vec<(SweepValue, u64)> {
        self.values
            .iter()
            .flat_map(|&v| self.seeds.iter().map(move |&s| (v, s)))
            .collect()
    }

    pub fn cell_path(&self, value: SweepValue, seed: u64) -> PathBuf {
        self.output_dir
            .join(format!("trace_{}={}_seed={}.csv", self.axis.name(), value, seed))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.output_dir.join("summary.csv")
    }

    pub fn cell_config(&self, value: SweepValue, seed: u64) -> ExperimentConfig {
        let mut c = self.base.clone();
        match (self.axis, value) {
            (_, SweepValue::Algorithm(a)) => c.algorithm = a,
            (SweepAxis::Gamma, v) => {
                c.gamma = v.as_f64().unwrap_or(c.gamma);
                c.gamma_u = None;
                c.gamma_v = None;
            }
            (SweepAxis::M, v) => c.m = v.as_count().unwrap_or(0),
            (SweepAxis::K, v) => c.k = v.as_count().unwrap_or(0),
            (SweepAxis::Algorithm, _) => {}
        }
        c.seed = seed;
        c.output = self.cell_path(value, seed);
        c
    }
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SweepSpec::from_toml_str(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub value: SweepValue,
    pub seed: u64,
    pub floor: f64,
    pub rounds_to_threshold: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub cells: Vec<CellResult>,
    pub summary_path: PathBuf,
}

impl SweepSummary {
    /// Mean floor per axis value, in sweep order.
    pub fn mean_floors(&self) -> Vec<(SweepValue, f64)> {
        let mut out: Vec<(SweepValue, f64, usize)> = Vec::new();
        for c in &self.cells {
            match out.iter_mut().find(|(v, _, _)| *v == c.value) {
                Some(e) => {
                    e.1 += c.floor;
                    e.2 += 1;
                }
                None => out.push((c.value, c.floor, 1)),
            }
        }
        out.into_iter().map(|(v, s, k)| (v, s / k as f64)).collect()
    }
}

fn summary_csv(summary: &SweepSummary) -> String {
    let (axis, cells) = (summary.axis, &summary.cells);
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            axis.name(),
            c.value,
            c.seed,
            format_float(c.floor),
            c.rounds_to_threshold.map(|r| r.to_string()).unwrap_or_default()
        ));
    }
    for (value, floor) in summary.mean_floors() {
        let reached: Vec<usize> = cells
            .iter()
            .filter(|c| c.value == value)
            .filter_map(|c| c.rounds_to_threshold)
            .collect();
        let all_reached = reached.len() == cells.iter().filter(|c| c.value == value).count();
        let mean_rounds = if all_reached && !reached.is_empty() {
            format_float(reached.iter().sum::<usize>() as f64 / reached.len() as f64)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},mean,{},{}\n",
            axis.name(),
            value,
            format_float(floor),
            mean_rounds
        ));
    }
    out
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs every cell, writing one trace per cell plus `summary.csv`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepSummary> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let cells: Vec<CellResult> = pool.install(|| {
        spec.cells()
            .par_iter()
            .map(|&(value, seed)| {
                let outcome = run_experiment(&spec.cell_config(value, seed))?;
                let traces = &outcome.output.traces;
                Ok(CellResult {
                    value,
                    seed,
                    floor: stationarity_floor(traces),
                    rounds_to_threshold: rounds_to_threshold(traces, spec.threshold),
                })
            })
            .collect::<Result<_>>()
    })?;
    let summary = SweepSummary {
        axis: spec.axis,
        cells,
        summary_path: spec.summary_path(),
    };
    write_atomic(&summary.summary_path, &summary_csv(&summary))?;
    Ok(summary)
}
