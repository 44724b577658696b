//! Client-side local SGD and the merge rules of both algorithms.

use crate::error::{Error, Result};
use crate::objectives::ObjectiveOracle;
use crate::rng::StreamKey;
use crate::vector::Vec64;

use super::HyperParams;

/// `K` simultaneous SGD steps on `(u, v)` for one client.
///
/// Step `k` draws its stochastic gradient from `streams.step(k)`; both blocks
/// use the same draw, evaluated at the same `(u_k, v_k)`. With a correction
/// `c − c_i` the u-direction becomes `g − c_i + c` (Scaffold-P); the
/// v-direction is never corrected.
fn local_steps<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    client: usize,
    u_init: &Vec64,
    v_init: &Vec64,
    correction: Option<&Vec64>,
    hp: &HyperParams,
    streams: StreamKey,
) -> Result<(Vec64, Vec64)> {
    let mut u = u_init.clone();
    let mut v = v_init.clone();
    for k in 0..hp.local_steps {
        let mut rng = streams.step(k).rng();
        let (mut gu, gv) = oracle.stoch_grads(client, &u, &v, &mut rng)?;
        if let Some(corr) = correction {
            gu.axpy(1.0, corr);
        }
        u.axpy(-hp.gamma_u, &gu);
        v.axpy(-hp.gamma_v, &gv);
    }
    Ok((u, v))
}

/// FedAvg-P local updates from `(u_init, v_init)`; returns `(u_K, v_K)`.
pub fn local_steps_fedavgp<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    client: usize,
    u_init: &Vec64,
    v_init: &Vec64,
    hp: &HyperParams,
    streams: StreamKey,
) -> Result<(Vec64, Vec64)> {
    local_steps(oracle, client, u_init, v_init, None, hp, streams)
}

/// Scaffold-P local updates: the u-gradient is shifted by `c − c_i`.
#[allow(clippy::too_many_arguments)]
pub fn local_steps_scaffoldp<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    client: usize,
    u_init: &Vec64,
    v_init: &Vec64,
    client_control: &Vec64,
    server_control: &Vec64,
    hp: &HyperParams,
    streams: StreamKey,
) -> Result<(Vec64, Vec64)> {
    client_control.check_same_len(server_control)?;
    let correction = server_control.sub(client_control);
    local_steps(oracle, client, u_init, v_init, Some(&correction), hp, streams)
}

/// `(1 − η_v) v_old + η_v v_K`.
pub fn merge_personal(v_old: &Vec64, v_k: &Vec64, eta_v: f64) -> Result<Vec64> {
    v_old.check_same_len(v_k)?;
    Ok(v_old.lincomb(1.0 - eta_v, v_k, eta_v))
}

/// `(1 − η_u) u_old + (η_u / m) Σ returned`, summing in the given order.
pub fn aggregate_shared(u_old: &Vec64, returned: &[Vec64], eta_u: f64, m: usize) -> Result<Vec64> {
    if returned.len() != m || m == 0 {
        return Err(Error::WrongCount {
            expected: m,
            got: returned.len(),
        });
    }
    let mut sum = Vec64::zeros(u_old.len());
    for u in returned {
        u_old.check_same_len(u)?;
        sum.axpy(1.0, u);
    }
    Ok(u_old.lincomb(1.0 - eta_u, &sum, eta_u / m as f64))
}

/// `c_i^0 = (1/K) Σ_k ∇_u F(u⁰, v_i⁰; ξ_{i,k})` for every client, and their mean `c⁰`.
pub fn init_control_variates<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    u0: &Vec64,
    v0_all: &[Vec64],
    local_steps: usize,
    streams: StreamKey,
) -> Result<(Vec<Vec64>, Vec64)> {
    if local_steps == 0 {
        return Err(Error::validation("K", "K >= 1 required"));
    }
    let controls = v0_all
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut acc = Vec64::zeros(u0.len());
            for k in 0..local_steps {
                let mut rng = streams.client(i).step(k).rng();
                let (gu, _) = oracle.stoch_grads(i, u0, v, &mut rng)?;
                acc.axpy(1.0, &gu);
            }
            acc.scale(1.0 / local_steps as f64);
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = Vec64::mean(&controls, u0.len());
    Ok((controls, mean))
}

/// `c_i − c + (u^t − u_i^{t+1}) / (K γ_u)`.
pub fn update_client_control(
    client_control: &Vec64,
    server_control: &Vec64,
    u_t: &Vec64,
    u_next: &Vec64,
    local_steps: usize,
    gamma_u: f64,
) -> Result<Vec64> {
    if gamma_u.is_nan() || gamma_u <= 0.0 {
        return Err(Error::validation(
            "gamma_u",
            "control-variate update needs gamma_u > 0",
        ));
    }
    if local_steps == 0 {
        return Err(Error::validation("K", "K >= 1 required"));
    }
    client_control.check_same_len(server_control)?;
    u_t.check_same_len(u_next)?;
    let mut out = client_control.sub(server_control);
    out.axpy(1.0 / (local_steps as f64 * gamma_u), &u_t.sub(u_next));
    Ok(out)
}

/// `c + (1/n) Σ deltas`, where the deltas are `c_i^{new} − c_i^{old}` of the sampled clients.
pub fn update_server_control(server_control: &Vec64, deltas: &[Vec64], n: usize) -> Result<Vec64> {
    let mut sum = Vec64::zeros(server_control.len());
    for d in deltas {
        server_control.check_same_len(d)?;
        sum.axpy(1.0, d);
    }
    let mut out = server_control.clone();
    out.axpy(1.0 / n as f64, &sum);
    Ok(out)
}
