//! Evaluation-only quantities: function value, the gradient norms reported per
//! round, and empirical estimates of the smoothness, dissimilarity and
//! initial-gap constants used by the step-size prescriptions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::ObjectiveOracle;
use crate::rng::SimRng;
use crate::vector::{check_len, Vec64};

fn check_clients<O: ObjectiveOracle + ?Sized>(oracle: &O, v_all: &[Vec64]) -> Result<()> {
    if v_all.len() != oracle.num_clients() {
        return Err(Error::WrongCount {
            expected: oracle.num_clients(),
            got: v_all.len(),
        });
    }
    Ok(())
}

fn per_client_grads<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u: &Vec64,
    v_all: &[Vec64],
) -> Result<Vec<(Vec64, Vec64)>> {
    check_clients(oracle, v_all)?;
    v_all
        .par_iter()
        .enumerate()
        .map(|(i, v)| oracle.grads(i, u, v))
        .collect()
}

/// `‖(1/n) Σ_i ∇_u f_i(u, v_i)‖²` with exact gradients.
pub fn grad_norm_shared<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u: &Vec64,
    v_all: &[Vec64],
) -> Result<f64> {
    let grads = per_client_grads(oracle, u, v_all)?;
    Ok(Vec64::mean(grads.iter().map(|g| &g.0), oracle.dim_u()).norm_sq())
}

/// `(G_v, Ĝ_v)` where `G_v = (1/n) Σ ‖∇_v f_i‖²` and `Ĝ_v = (m/n) G_v`.
pub fn grad_norm_personal<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u: &Vec64,
    v_all: &[Vec64],
    m: usize,
    n: usize,
) -> Result<(f64, f64)> {
    let grads = per_client_grads(oracle, u, v_all)?;
    let g_v = grads.iter().map(|g| g.1.norm_sq()).sum::<f64>() / grads.len() as f64;
    Ok((g_v, personal_hat(g_v, m, n)))
}

fn personal_hat(g_v: f64, m: usize, n: usize) -> f64 {
    m as f64 / n as f64 * g_v
}

/// `f(u, v) = (1/n) Σ f_i(u, v_i)`.
pub fn function_value<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u: &Vec64,
    v_all: &[Vec64],
) -> Result<f64> {
    check_clients(oracle, v_all)?;
    let values: Vec<f64> = v_all
        .par_iter()
        .enumerate()
        .map(|(i, v)| oracle.value(i, u, v))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Pointwise dissimilarity `(1/n) Σ ‖∇_u f_i‖² − ‖∇_u f‖²`.
pub fn estimate_dissimilarity<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u: &Vec64,
    v_all: &[Vec64],
) -> Result<f64> {
    let grads = per_client_grads(oracle, u, v_all)?;
    Ok(dissimilarity_of(grads.iter().map(|g| &g.0), oracle.dim_u()))
}

fn dissimilarity_of<'a>(grads: impl Iterator<Item = &'a Vec64> + Clone, dim: usize) -> f64 {
    let mean = Vec64::mean(grads.clone(), dim);
    // centered form of (1/n) Σ ‖g_i‖² − ‖ḡ‖²; never negative
    let (sum, count) = grads.fold((0.0, 0usize), |(s, c), g| (s + g.sub(&mean).norm_sq(), c + 1));
    sum / count as f64
}

/// Every per-round metric from a single pass over the clients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub f_value: f64,
    pub grad_norm_u: f64,
    pub grad_norm_v: f64,
    pub grad_norm_v_hat: f64,
}

pub fn evaluate<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u: &Vec64,
    v_all: &[Vec64],
    m: usize,
) -> Result<RoundMetrics> {
    check_clients(oracle, v_all)?;
    let n = v_all.len();
    let per_client: Vec<(f64, Vec64, f64)> = v_all
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let (f, gu, gv) = oracle.value_and_grads(i, u, v)?;
            Ok((f, gu, gv.norm_sq()))
        })
        .collect::<Result<_>>()?;
    let f_value = per_client.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let grad_norm_u = Vec64::mean(per_client.iter().map(|p| &p.1), oracle.dim_u()).norm_sq();
    let grad_norm_v = per_client.iter().map(|p| p.2).sum::<f64>() / n as f64;
    Ok(RoundMetrics {
        f_value,
        grad_norm_u,
        grad_norm_v,
        grad_norm_v_hat: personal_hat(grad_norm_v, m, n),
    })
}

fn random_in_ball(dim: usize, radius: f64, rng: &mut SimRng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    let s = if norm > 0.0 { r / norm } else { 0.0 };
    x.iter_mut().for_each(|t| *t *= s);
    x
}

/// Lower bound on the joint Lipschitz constant of `(∇_u f_i, ∇_v f_i)`:
/// the largest secant ratio `‖∇f_i(x + δ) − ∇f_i(x)‖ / ‖δ‖` seen over
/// `probes` random pairs in the ball of the given radius, cycling clients.
pub fn estimate_smoothness<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    probes: usize,
    radius: f64,
    rng: &mut SimRng,
) -> Result<f64> {
    if probes < 2 {
        return Err(Error::InvalidArgument("need at least two probes".into()));
    }
    let (du, dv) = (oracle.dim_u(), oracle.dim_v());
    let mut best: f64 = 0.0;
    for p in 0..probes {
        let client = p % oracle.num_clients();
        let x = random_in_ball(du + dv, radius, rng);
        // step lengths spread over three decades to catch local curvature
        let len = radius * 10f64.powf(-3.0 * rng.random::<f64>());
        let mut delta = random_in_ball(du + dv, 1.0, rng);
        let dn = delta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if dn == 0.0 {
            continue;
        }
        delta.iter_mut().for_each(|t| *t *= len / dn);
        let y: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let (xu, xv) = x.split_at(du);
        let (yu, yv) = y.split_at(du);
        let (gxu, gxv) = oracle.grads(client, &xu.into(), &xv.into())?;
        let (gyu, gyv) = oracle.grads(client, &yu.into(), &yv.into())?;
        let diff = gyu.sub(&gxu).norm_sq() + gyv.sub(&gxv).norm_sq();
        let step = delta.iter().map(|t| t * t).sum::<f64>();
        best = best.max((diff / step).sqrt());
    }
    Ok(best)
}

/// Estimated theory constants at an initial point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantEstimates {
    pub l_hat: f64,
    pub b2_hat: f64,
    /// `f(u⁰, v⁰) − best f seen` during a full-batch calibration descent.
    pub f0: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EstimateOptions {
    pub probes: usize,
    pub radius: f64,
    pub calibration_steps: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            probes: 200,
            radius: 1.0,
            calibration_steps: 200,
        }
    }
}

pub fn estimate_constants<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u0: &Vec64,
    v0: &[Vec64],
    options: EstimateOptions,
    rng: &mut SimRng,
) -> Result<ConstantEstimates> {
    check_len(u0, oracle.dim_u())?;
    let l_hat = estimate_smoothness(oracle, options.probes, options.radius, rng)?;
    let b2_hat = estimate_dissimilarity(oracle, u0, v0)?;
    let f_start = function_value(oracle, u0, v0)?;
    let f_best = calibrate_best_value(oracle, u0, v0, l_hat, options.calibration_steps)?;
    Ok(ConstantEstimates {
        l_hat,
        b2_hat,
        f0: (f_start - f_best).max(0.0),
    })
}

/// Full-batch gradient descent on the joint variable with step `1/L`,
/// returning the smallest objective value seen.
fn calibrate_best_value<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u0: &Vec64,
    v0: &[Vec64],
    l_hat: f64,
    steps: usize,
) -> Result<f64> {
    let step = if l_hat > 0.0 { 1.0 / l_hat } else { 1.0 };
    let mut u = u0.clone();
    let mut v = v0.to_vec();
    let mut best = function_value(oracle, &u, &v)?;
    for _ in 0..steps {
        let grads = per_client_grads(oracle, &u, &v)?;
        u.axpy(-step, &Vec64::mean(grads.iter().map(|g| &g.0), oracle.dim_u()));
        // each v_i moves along its own client gradient, as in the local steps
        for (vi, g) in v.iter_mut().zip(&grads) {
            vi.axpy(-step, &g.1);
        }
        let f = function_value(oracle, &u, &v)?;
        if !f.is_finite() {
            break;
        }
        best = best.min(f);
    }
    Ok(best)
}
