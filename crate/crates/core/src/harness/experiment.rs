use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fedcore::{RoundTrace, Trainer, TrainingOutput};
use crate::metrics::{estimate_constants, ConstantEstimates, EstimateOptions};
use crate::rng::{Purpose, StreamKey};
use crate::vector::Vec64;

use super::config::{build_objective, ExperimentConfig};

pub const TRACE_HEADER: &str = "t,f_value,grad_norm_u,grad_norm_v,grad_norm_v_hat,sampled,wall_ms";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_trace_row(r: &RoundTrace) -> String {
    let sampled: Vec<String> = r.sampled.iter().map(|i| i.to_string()).collect();
    format!(
        "{},{},{},{},{},{},{}",
        r.t,
        format_float(r.f_value),
        format_float(r.grad_norm_u),
        format_float(r.grad_norm_v),
        format_float(r.grad_norm_v_hat),
        sampled.join(";"),
        format_float(r.wall_ms)
    )
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn trace_csv(traces: &[RoundTrace]) -> String {
    let mut out = String::with_capacity(64 * (traces.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in traces {
        out.push_str(&format_trace_row(r));
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(path: &Path, traces: &[RoundTrace]) -> Result<()> {
    write_atomic(path, &trace_csv(traces))
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<RoundTrace>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "unexpected trace header {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let bad = |line: usize, what: &str| Error::Parse(format!("trace line {line}: bad {what}"));
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let no = idx + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(bad(no, "column count"));
        }
        let float = |i: usize, name: &str| cols[i].parse::<f64>().map_err(|_| bad(no, name));
        let sampled = if cols[5].is_empty() {
            Vec::new()
        } else {
            cols[5]
                .split(';')
                .map(|s| s.parse::<usize>().map_err(|_| bad(no, "sampled")))
                .collect::<Result<_>>()?
        };
        out.push(RoundTrace {
            t: cols[0].parse().map_err(|_| bad(no, "t"))?,
            f_value: float(1, "f_value")?,
            grad_norm_u: float(2, "grad_norm_u")?,
            grad_norm_v: float(3, "grad_norm_v")?,
            grad_norm_v_hat: float(4, "grad_norm_v_hat")?,
            sampled,
            wall_ms: float(6, "wall_ms")?,
        });
    }
    Ok(out)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<RoundTrace>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace_csv(&text)
}

/// Mean of `G_u + Ĝ_v` over the last `min(100, T/5)` rounds (at least one).
pub fn stationarity_floor(traces: &[RoundTrace]) -> f64 {
    if traces.is_empty() {
        return f64::NAN;
    }
    let window = (traces.len() / 5).clamp(1, 100);
    let tail = &traces[traces.len() - window..];
    tail.iter()
        .map(|r| r.grad_norm_u + r.grad_norm_v_hat)
        .sum::<f64>()
        / window as f64
}

/// First completed round with `G_u + Ĝ_v ≤ threshold`.
pub fn rounds_to_threshold(traces: &[RoundTrace], threshold: f64) -> Option<usize> {
    traces
        .iter()
        .find(|r| r.grad_norm_u + r.grad_norm_v_hat <= threshold)
        .map(|r| r.t)
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub output: TrainingOutput,
    pub trace_path: PathBuf,
    pub echo_path: PathBuf,
}

/// Runs one configuration in memory.
pub fn simulate(config: &ExperimentConfig) -> Result<TrainingOutput> {
    config.validate()?;
    let objective = build_objective(config)?;
    let trainer = Trainer::from_zero(
        objective.oracle(),
        config.algorithm,
        config.hyper_params(),
        config.seed,
    )?;
    trainer.run()
}

/// Runs one configuration, writing the trace CSV and the resolved config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let output = simulate(config)?;
    let trace_path = config.output.clone();
    let echo_path = config.echo_path();
    write_trace_csv(&trace_path, &output.traces)?;
    write_atomic(&echo_path, &config.resolved().to_toml_string()?)?;
    Ok(ExperimentOutcome {
        output,
        trace_path,
        echo_path,
    })
}

/// Estimated constants at the configuration's starting point `u = 0`, `v_i = 0`.
pub fn estimate_for_config(
    config: &ExperimentConfig,
    options: EstimateOptions,
) -> Result<(ConstantEstimates, Option<f64>)> {
    config.validate()?;
    let objective = build_objective(config)?;
    let oracle = objective.oracle();
    let u0 = Vec64::zeros(oracle.dim_u());
    let v0 = vec![Vec64::zeros(oracle.dim_v()); oracle.num_clients()];
    let mut rng = StreamKey::new(config.seed, Purpose::Probe).rng();
    let est = estimate_constants(oracle, &u0, &v0, options, &mut rng)?;
    Ok((est, objective.closed_form_b2()))
}
