use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{partition_clients, synth_quadratic, PartitionScheme, RawDataset, SynthQuadratic};
use crate::error::{Error, Result};
use crate::fedcore::{Algorithm, HyperParams};
use crate::objectives::{LogisticSpec, ObjectiveOracle, DEFAULT_RHO};

pub const MNIST_PIXELS: usize = 784;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Quadratic,
    LogisticMnist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MnistSplit {
    Train,
    Test,
}

/// One experiment. Unset step sizes follow the default profile:
/// `η_u = √m`, `η_v = √(n/m)`, `γ_u = γ/η_u`, `γ_v = γ/η_v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub objective: ObjectiveKind,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    /// Effective step `γ = γ_u η_u = γ_v η_v`.
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_v: Option<f64>,
    pub seed: u64,
    pub batch_size: usize,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_v: Option<usize>,
    pub spread: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mnist_dir: Option<PathBuf>,
    pub mnist_split: MnistSplit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mnist_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mnist_labels: Option<PathBuf>,
    pub partition: PartitionScheme,
    pub per_client_cap: usize,
    pub output: PathBuf,
}

/// Every key accepted in a config file.
pub const CONFIG_KEYS: &[&str] = &[
    "algorithm",
    "objective",
    "n",
    "m",
    "K",
    "T",
    "gamma",
    "gamma_u",
    "gamma_v",
    "eta_u",
    "eta_v",
    "seed",
    "batch_size",
    "rho",
    "d_u",
    "d_v",
    "spread",
    "sigma_u",
    "sigma_v",
    "mnist_dir",
    "mnist_split",
    "mnist_images",
    "mnist_labels",
    "partition",
    "per_client_cap",
    "output",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::FedavgP,
            objective: ObjectiveKind::Quadratic,
            n: 10,
            m: 9,
            k: 25,
            t: 2000,
            gamma: 0.001,
            gamma_u: None,
            gamma_v: None,
            eta_u: None,
            eta_v: None,
            seed: 0,
            batch_size: 1,
            rho: DEFAULT_RHO,
            d_u: None,
            d_v: None,
            spread: 1.0,
            sigma_u: 1.0,
            sigma_v: 0.0,
            mnist_dir: None,
            mnist_split: MnistSplit::Train,
            mnist_images: None,
            mnist_labels: None,
            partition: PartitionScheme::ByLabel,
            per_client_cap: 1000,
            output: PathBuf::from("trace.csv"),
        }
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be > 0, got {x}")))
    }
}

fn non_negative(field: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be >= 0, got {x}")))
    }
}

impl ExperimentConfig {
    /// Parses TOML text, rejecting unknown keys, then validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        if let Some(key) = table.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::UnknownKey(key.clone()));
        }
        let config: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn dims(&self) -> (usize, usize) {
        match self.objective {
            ObjectiveKind::Quadratic => (self.d_u.unwrap_or(10), self.d_v.unwrap_or(5)),
            ObjectiveKind::LogisticMnist => {
                let du = self.d_u.unwrap_or_else(|| {
                    self.d_v.map_or(MNIST_PIXELS / 2, |dv| MNIST_PIXELS.saturating_sub(dv))
                });
                (du, self.d_v.unwrap_or(MNIST_PIXELS.saturating_sub(du)))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n", "n ≥ 1 required"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::validation("m", "m ≤ n required"));
        }
        if self.k == 0 {
            return Err(Error::validation("K", "K ≥ 1 required"));
        }
        positive("gamma", self.gamma)?;
        for (name, x) in [
            ("gamma_u", self.gamma_u),
            ("gamma_v", self.gamma_v),
            ("eta_u", self.eta_u),
            ("eta_v", self.eta_v),
        ] {
            if let Some(x) = x {
                positive(name, x)?;
            }
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be ≥ 1"));
        }
        non_negative("rho", self.rho)?;
        non_negative("spread", self.spread)?;
        non_negative("sigma_u", self.sigma_u)?;
        non_negative("sigma_v", self.sigma_v)?;
        let (du, dv) = self.dims();
        if du == 0 {
            return Err(Error::validation("d_u", "must be ≥ 1"));
        }
        if dv == 0 {
            return Err(Error::validation("d_v", "must be ≥ 1"));
        }
        if self.objective == ObjectiveKind::LogisticMnist {
            if du + dv != MNIST_PIXELS {
                return Err(Error::validation(
                    "d_u",
                    format!("d_u + d_v must equal {MNIST_PIXELS}, got {du} + {dv}"),
                ));
            }
            if self.per_client_cap == 0 {
                return Err(Error::validation("per_client_cap", "must be ≥ 1"));
            }
            self.mnist_paths()?;
        }
        Ok(())
    }

    pub fn hyper_params(&self) -> HyperParams {
        let eta_u = self.eta_u.unwrap_or_else(|| (self.m as f64).sqrt());
        let eta_v = self
            .eta_v
            .unwrap_or_else(|| (self.n as f64 / self.m as f64).sqrt());
        HyperParams {
            gamma_u: self.gamma_u.unwrap_or(self.gamma / eta_u),
            gamma_v: self.gamma_v.unwrap_or(self.gamma / eta_v),
            eta_u,
            eta_v,
            local_steps: self.k,
            rounds: self.t,
            sampled: self.m,
        }
    }

    /// A copy with every derived value written out explicitly.
    pub fn resolved(&self) -> ExperimentConfig {
        let hp = self.hyper_params();
        let (du, dv) = self.dims();
        let mut out = self.clone();
        out.gamma_u = Some(hp.gamma_u);
        out.gamma_v = Some(hp.gamma_v);
        out.eta_u = Some(hp.eta_u);
        out.eta_v = Some(hp.eta_v);
        out.d_u = Some(du);
        out.d_v = Some(dv);
        if self.objective == ObjectiveKind::LogisticMnist {
            if let Ok((images, labels)) = self.mnist_paths() {
                out.mnist_images = Some(images);
                out.mnist_labels = Some(labels);
            }
        }
        out
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Image and label paths, either given directly or found under `mnist_dir`.
    pub fn mnist_paths(&self) -> Result<(PathBuf, PathBuf)> {
        if let (Some(i), Some(l)) = (&self.mnist_images, &self.mnist_labels) {
            return Ok((i.clone(), l.clone()));
        }
        let dir = self.mnist_dir.as_ref().ok_or_else(|| {
            Error::validation(
                "mnist_dir",
                "logistic_mnist needs mnist_dir or both mnist_images and mnist_labels",
            )
        })?;
        let prefix = match self.mnist_split {
            MnistSplit::Train => "train",
            MnistSplit::Test => "t10k",
        };
        let find = |stem: String| {
            let plain = dir.join(&stem);
            let gz = dir.join(format!("{stem}.gz"));
            if !plain.exists() && gz.exists() {
                gz
            } else {
                plain
            }
        };
        Ok((
            find(format!("{prefix}-images-idx3-ubyte")),
            find(format!("{prefix}-labels-idx1-ubyte")),
        ))
    }

    /// Path of the config echo written next to the trace.
    pub fn echo_path(&self) -> PathBuf {
        self.output.with_extension("config.toml")
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml_str(&text)
}

/// A built objective, keeping the closed-form dissimilarity of synthetic instances.
pub enum Objective {
    Quadratic(SynthQuadratic),
    Logistic(LogisticSpec),
}

impl Objective {
    pub fn oracle(&self) -> &dyn ObjectiveOracle {
        match self {
            Objective::Quadratic(q) => &q.spec,
            Objective::Logistic(l) => l,
        }
    }

    /// Exact `b²` for synthetic instances.
    pub fn closed_form_b2(&self) -> Option<f64> {
        match self {
            Objective::Quadratic(q) => Some(q.b2),
            Objective::Logistic(_) => None,
        }
    }
}

pub fn build_objective(config: &ExperimentConfig) -> Result<Objective> {
    let (du, dv) = config.dims();
    match config.objective {
        ObjectiveKind::Quadratic => Ok(Objective::Quadratic(synth_quadratic(
            config.n,
            du,
            dv,
            config.spread,
            config.sigma_u,
            config.sigma_v,
            config.seed,
        )?)),
        ObjectiveKind::LogisticMnist => {
            let (images, labels) = config.mnist_paths()?;
            let data = RawDataset::load_idx(&images, &labels)?;
            if data.images.first().is_some_and(|x| x.len() != MNIST_PIXELS) {
                return Err(Error::validation(
                    "mnist_images",
                    format!("expected {MNIST_PIXELS} pixels per image"),
                ));
            }
            let mut shards =
                partition_clients(&data, config.n, config.partition, config.seed, du, dv)?;
            for s in &mut shards {
                s.truncate(config.per_client_cap);
            }
            Ok(Objective::Logistic(LogisticSpec::new(
                shards,
                config.rho,
                config.batch_size,
            )?))
        }
    }
}
