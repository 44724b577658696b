//! Closed-form step-size prescriptions from the convergence analyses.
//!
//! Each variant returns the effective step `γ = γ_u η_u = γ_v η_v` and the
//! smallest admissible outer steps `η_u`, `η_v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum StepSizeVariant {
    /// FedAvg-P with partial participation.
    FedavgpPartial,
    /// FedAvg-P with every client participating (`m = n`).
    FedavgpFull,
    /// Scaffold-P.
    Scaffoldp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizeInputs {
    pub l: f64,
    pub k: usize,
    pub t: usize,
    pub f0: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub b: f64,
    pub m: usize,
    pub n: usize,
    /// `B⁰ = Σ_i ‖∇_u f(u⁰, v_i⁰)‖²`; only enters the full-participation
    /// bound on `η_u`, where 0 drops its term.
    pub b0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepSizes {
    pub gamma: f64,
    pub eta_u_min: f64,
    pub eta_v_min: f64,
}

impl StepSizes {
    /// Inner steps `γ/η_u`, `γ/η_v` at the minimal outer steps.
    pub fn inner(&self) -> (f64, f64) {
        (self.gamma / self.eta_u_min, self.gamma / self.eta_v_min)
    }
}

pub fn recommended_step_sizes(variant: StepSizeVariant, p: &StepSizeInputs) -> Result<StepSizes> {
    for (name, x) in [("L", p.l), ("F0", p.f0)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::validation(name, format!("must be positive, got {x}")));
        }
    }
    if p.k == 0 {
        return Err(Error::validation("K", "must be positive"));
    }
    if p.t == 0 {
        return Err(Error::validation("T", "must be positive"));
    }
    for (name, x) in [("sigma_u", p.sigma_u), ("sigma_v", p.sigma_v), ("b", p.b), ("b0", p.b0)] {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::validation(name, format!("must be >= 0, got {x}")));
        }
    }
    if p.m == 0 || p.m > p.n {
        return Err(Error::validation("m", "1 ≤ m ≤ n required"));
    }

    let (l, k, t, f0) = (p.l, p.k as f64, p.t as f64, p.f0);
    let (m, n) = (p.m as f64, p.n as f64);
    let (su2, sv2, b2) = (p.sigma_u * p.sigma_u, p.sigma_v * p.sigma_v, p.b * p.b);

    let steps = match variant {
        StepSizeVariant::FedavgpPartial => {
            let noise = 4.0 * (n - m) * k * b2 / (m * n) + su2 / m + m * sv2 / n;
            StepSizes {
                gamma: 1.0 / (32.0 * l * k + (3.0 * l * k * t / f0 * noise).sqrt()),
                eta_u_min: m.sqrt().max((b2 * t / (l * f0)).sqrt()),
                eta_v_min: (n / m).sqrt(),
            }
        }
        StepSizeVariant::FedavgpFull => {
            let noise = su2 / n + sv2;
            StepSizes {
                gamma: 1.0 / (84.0 * l * k + (11.0 * l * k * t / f0 * noise).sqrt()),
                eta_u_min: t.max((p.b0 * t / (n * l * f0)).sqrt()).max(n.sqrt()),
                eta_v_min: 1.0,
            }
        }
        StepSizeVariant::Scaffoldp => {
            let noise = su2 / m + m * sv2 / n;
            let participation = (n.powf(2.0 / 3.0) / m).max(1.0);
            StepSizes {
                gamma: 1.0
                    / (72.0 * l * k * participation + (37.0 * l * k * t / f0 * noise).sqrt()),
                eta_u_min: m.sqrt(),
                eta_v_min: (n / m).sqrt(),
            }
        }
    };
    Ok(steps)
}
