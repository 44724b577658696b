use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    FedavgP,
    ScaffoldP,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FedavgP => "fedavg_p",
            Algorithm::ScaffoldP => "scaffold_p",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Step sizes and loop counts of one training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Inner step for the shared block.
    pub gamma_u: f64,
    /// Inner step for the personal block.
    pub gamma_v: f64,
    /// Outer step applied when the server merges the shared block.
    pub eta_u: f64,
    /// Outer step applied when a client merges its personal block.
    pub eta_v: f64,
    /// `K`
    pub local_steps: usize,
    /// `T`
    pub rounds: usize,
    /// `m`
    pub sampled: usize,
}

impl HyperParams {
    /// Checks the loop counts against `n` clients and that every step size is
    /// finite and non-negative. Zero steps are accepted (the state then stays
    /// put), except where an operation divides by `gamma_u`.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, x) in [
            ("gamma_u", self.gamma_u),
            ("gamma_v", self.gamma_v),
            ("eta_u", self.eta_u),
            ("eta_v", self.eta_v),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::validation(name, format!("must be finite and >= 0, got {x}")));
            }
        }
        if self.local_steps == 0 {
            return Err(Error::validation("K", "K >= 1 required"));
        }
        if self.sampled == 0 {
            return Err(Error::validation("m", "m >= 1 required"));
        }
        if self.sampled > n {
            return Err(Error::validation("m", "m ≤ n required"));
        }
        Ok(())
    }

    pub fn effective_u(&self) -> f64 {
        self.gamma_u * self.eta_u
    }

    pub fn effective_v(&self) -> f64 {
        self.gamma_v * self.eta_v
    }

    /// True when `γ_u η_u` and `γ_v η_v` differ; the convergence theory
    /// assumes they are equal but both algorithms run either way.
    pub fn step_mismatch(&self) -> bool {
        let (a, b) = (self.effective_u(), self.effective_v());
        (a - b).abs() > 1e-9 * a.abs().max(b.abs())
    }
}
