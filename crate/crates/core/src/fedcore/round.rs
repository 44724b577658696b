use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics;
use crate::objectives::ObjectiveOracle;
use crate::rng::{Purpose, StreamKey};
use crate::vector::{check_len, Vec64};

use super::local::{
    aggregate_shared, init_control_variates, local_steps_fedavgp, local_steps_scaffoldp,
    merge_personal, update_client_control, update_server_control,
};
use super::sampling::sample_clients;
use super::{Algorithm, HyperParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ServerState {
    pub u: Vec64,
    /// Global control variate `c`; present only for Scaffold-P.
    pub control: Option<Vec64>,
    /// Number of completed rounds.
    pub round: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientState {
    pub v: Vec64,
    /// Client control variate `c_i`; present only for Scaffold-P.
    pub control: Option<Vec64>,
}

/// Metrics of the state reached after round `t` (so `t` counts completed rounds).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundTrace {
    pub t: usize,
    pub f_value: f64,
    pub grad_norm_u: f64,
    pub grad_norm_v: f64,
    pub grad_norm_v_hat: f64,
    /// 1-based client ids, ascending.
    pub sampled: Vec<usize>,
    pub wall_ms: f64,
}

/// Builds the initial server/client states; Scaffold-P also draws the
/// initial control variates from the `(seed, ControlInit, client, step)` streams.
pub fn init_states<O: ObjectiveOracle + ?Sized>(
    algorithm: Algorithm,
    oracle: &O,
    u0: Vec64,
    v0: Vec<Vec64>,
    local_steps: usize,
    seed: u64,
) -> Result<(ServerState, Vec<ClientState>)> {
    check_len(&u0, oracle.dim_u())?;
    if v0.len() != oracle.num_clients() {
        return Err(Error::WrongCount {
            expected: oracle.num_clients(),
            got: v0.len(),
        });
    }
    for v in &v0 {
        check_len(v, oracle.dim_v())?;
    }
    match algorithm {
        Algorithm::FedavgP => Ok((
            ServerState {
                u: u0,
                control: None,
                round: 0,
            },
            v0.into_iter()
                .map(|v| ClientState { v, control: None })
                .collect(),
        )),
        Algorithm::ScaffoldP => {
            let streams = StreamKey::new(seed, Purpose::ControlInit);
            let (controls, c) = init_control_variates(oracle, &u0, &v0, local_steps, streams)?;
            Ok((
                ServerState {
                    u: u0,
                    control: Some(c),
                    round: 0,
                },
                v0.into_iter()
                    .zip(controls)
                    .map(|(v, ci)| ClientState {
                        v,
                        control: Some(ci),
                    })
                    .collect(),
            ))
        }
    }
}

fn missing_control() -> Error {
    Error::InvalidArgument("Scaffold-P state is missing control variates".into())
}

/// Executes one outer round `t = server.round` and reports metrics on the
/// resulting state.
///
/// Sampled clients run their local steps in parallel from a snapshot of
/// `(u^t, c^t)`; results are merged in ascending client order, so the
/// outcome does not depend on scheduling.
pub fn run_round<O: ObjectiveOracle + ?Sized>(
    algorithm: Algorithm,
    server: &mut ServerState,
    clients: &mut [ClientState],
    oracle: &O,
    hp: &HyperParams,
    seed: u64,
) -> Result<RoundTrace> {
    let n = clients.len();
    hp.validate(n)?;
    let t = server.round;
    let start = Instant::now();

    let mut sample_rng = StreamKey::new(seed, Purpose::Sample).round(t).rng();
    let sampled = sample_clients(n, hp.sampled, &mut sample_rng)?;

    let u_t = &server.u;
    let c_t = server.control.as_ref();
    let locals: Vec<(Vec64, Vec64)> = sampled
        .par_iter()
        .map(|&i| {
            let streams = StreamKey::new(seed, Purpose::Local).round(t).client(i);
            let client = &clients[i];
            match algorithm {
                Algorithm::FedavgP => {
                    local_steps_fedavgp(oracle, i, u_t, &client.v, hp, streams)
                }
                Algorithm::ScaffoldP => {
                    let ci = client.control.as_ref().ok_or_else(missing_control)?;
                    let c = c_t.ok_or_else(missing_control)?;
                    local_steps_scaffoldp(oracle, i, u_t, &client.v, ci, c, hp, streams)
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut returned = Vec::with_capacity(sampled.len());
    let mut deltas = Vec::new();
    for (&i, (u_k, v_k)) in sampled.iter().zip(locals) {
        let client = &mut clients[i];
        client.v = merge_personal(&client.v, &v_k, hp.eta_v)?;
        if algorithm == Algorithm::ScaffoldP {
            let c = server.control.as_ref().ok_or_else(missing_control)?;
            let old = client.control.take().ok_or_else(missing_control)?;
            let new = update_client_control(&old, c, &server.u, &u_k, hp.local_steps, hp.gamma_u)?;
            deltas.push(new.sub(&old));
            client.control = Some(new);
        }
        returned.push(u_k);
    }
    server.u = aggregate_shared(&server.u, &returned, hp.eta_u, hp.sampled)?;
    if algorithm == Algorithm::ScaffoldP {
        let c = server.control.as_ref().ok_or_else(missing_control)?;
        server.control = Some(update_server_control(c, &deltas, n)?);
    }
    server.round += 1;

    if !server.u.is_finite() || sampled.iter().any(|&i| !clients[i].v.is_finite()) {
        return Err(Error::NonFinite(server.round));
    }

    let v_all: Vec<Vec64> = clients.iter().map(|c| c.v.clone()).collect();
    let m = metrics::evaluate(oracle, &server.u, &v_all, hp.sampled)?;
    Ok(RoundTrace {
        t: server.round,
        f_value: m.f_value,
        grad_norm_u: m.grad_norm_u,
        grad_norm_v: m.grad_norm_v,
        grad_norm_v_hat: m.grad_norm_v_hat,
        sampled: sampled.iter().map(|i| i + 1).collect(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Drives a run round by round, exposing the state in between.
pub struct Trainer<'a, O: ObjectiveOracle + ?Sized> {
    oracle: &'a O,
    algorithm: Algorithm,
    hp: HyperParams,
    seed: u64,
    server: ServerState,
    clients: Vec<ClientState>,
}

impl<'a, O: ObjectiveOracle + ?Sized> Trainer<'a, O> {
    pub fn new(
        oracle: &'a O,
        algorithm: Algorithm,
        hp: HyperParams,
        seed: u64,
        u0: Vec64,
        v0: Vec<Vec64>,
    ) -> Result<Self> {
        hp.validate(oracle.num_clients())?;
        let (server, clients) = init_states(algorithm, oracle, u0, v0, hp.local_steps, seed)?;
        Ok(Trainer {
            oracle,
            algorithm,
            hp,
            seed,
            server,
            clients,
        })
    }

    /// Starts from `u = 0`, `v_i = 0`.
    pub fn from_zero(oracle: &'a O, algorithm: Algorithm, hp: HyperParams, seed: u64) -> Result<Self> {
        let u0 = Vec64::zeros(oracle.dim_u());
        let v0 = vec![Vec64::zeros(oracle.dim_v()); oracle.num_clients()];
        Trainer::new(oracle, algorithm, hp, seed, u0, v0)
    }

    pub fn step(&mut self) -> Result<RoundTrace> {
        run_round(
            self.algorithm,
            &mut self.server,
            &mut self.clients,
            self.oracle,
            &self.hp,
            self.seed,
        )
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    /// Runs the remaining rounds up to `T`.
    pub fn run(mut self) -> Result<TrainingOutput> {
        if self.hp.step_mismatch() {
            log::warn!(
                "gamma_u*eta_u = {} differs from gamma_v*eta_v = {}",
                self.hp.effective_u(),
                self.hp.effective_v()
            );
        }
        let mut traces = Vec::with_capacity(self.hp.rounds.saturating_sub(self.server.round));
        while self.server.round < self.hp.rounds {
            traces.push(self.step()?);
        }
        Ok(TrainingOutput {
            traces,
            step_mismatch: self.hp.step_mismatch(),
            u: self.server.u,
            v: self.clients.into_iter().map(|c| c.v).collect(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainingOutput {
    pub traces: Vec<RoundTrace>,
    /// Final shared variable `u^T`.
    pub u: Vec64,
    /// Final personal variables `v_i^T`.
    pub v: Vec<Vec64>,
    /// Set when `γ_u η_u ≠ γ_v η_v`.
    pub step_mismatch: bool,
}

/// Runs `T` rounds of the chosen algorithm from `(u0, v0)`.
pub fn run_training<O: ObjectiveOracle + ?Sized>(
    algorithm: Algorithm,
    oracle: &O,
    hp: HyperParams,
    seed: u64,
    u0: Vec64,
    v0: Vec<Vec64>,
) -> Result<TrainingOutput> {
    Trainer::new(oracle, algorithm, hp, seed, u0, v0)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synth_quadratic;

    fn hp(k: usize, t: usize, m: usize, gamma: f64) -> HyperParams {
        HyperParams {
            gamma_u: gamma,
            gamma_v: gamma,
            eta_u: 1.0,
            eta_v: 1.0,
            local_steps: k,
            rounds: t,
            sampled: m,
        }
    }

    #[test]
    fn zero_rounds_return_inputs() {
        let q = synth_quadratic(3, 2, 2, 1.0, 0.5, 0.5, 1).unwrap().spec;
        let u0 = Vec64::from([0.1, 0.2]);
        let v0 = vec![Vec64::from([1.0, 2.0]); 3];
        for alg in [Algorithm::FedavgP, Algorithm::ScaffoldP] {
            let out = run_training(alg, &q, hp(2, 0, 2, 0.1), 0, u0.clone(), v0.clone()).unwrap();
            assert!(out.traces.is_empty());
            assert_eq!(out.u, u0);
            assert_eq!(out.v, v0);
        }
    }

    #[test]
    fn zero_steps_leave_state_unchanged() {
        let q = synth_quadratic(4, 3, 2, 2.0, 1.0, 1.0, 3).unwrap().spec;
        let mut h = hp(5, 3, 2, 0.0);
        h.eta_v = 0.7;
        let out = run_training(Algorithm::FedavgP, &q, h, 9, Vec64::zeros(3), vec![Vec64::zeros(2); 4])
            .unwrap();
        assert_eq!(out.u, Vec64::zeros(3));
        assert!(out.v.iter().all(|v| *v == Vec64::zeros(2)));
        let f0 = metrics::function_value(&q, &Vec64::zeros(3), &out.v).unwrap();
        assert!(out.traces.iter().all(|tr| tr.f_value == f0));
    }

    #[test]
    fn deterministic_traces() {
        let q = synth_quadratic(6, 3, 2, 1.0, 0.5, 0.5, 2).unwrap().spec;
        for alg in [Algorithm::FedavgP, Algorithm::ScaffoldP] {
            let run = || {
                Trainer::from_zero(&q, alg, hp(3, 20, 3, 0.05), 77)
                    .unwrap()
                    .run()
                    .unwrap()
            };
            let (a, b) = (run(), run());
            let strip = |o: &TrainingOutput| {
                o.traces
                    .iter()
                    .map(|t| {
                        (
                            t.f_value.to_bits(),
                            t.grad_norm_u.to_bits(),
                            t.grad_norm_v.to_bits(),
                            t.sampled.clone(),
                        )
                    })
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b));
            assert_eq!(a.u, b.u);
        }
    }

    #[test]
    fn trace_reports_sampled_ids_one_based() {
        let q = synth_quadratic(5, 2, 2, 1.0, 0.0, 0.0, 2).unwrap().spec;
        let mut tr = Trainer::from_zero(&q, Algorithm::FedavgP, hp(1, 4, 5, 0.1), 1).unwrap();
        let trace = tr.step().unwrap();
        assert_eq!(trace.t, 1);
        assert_eq!(trace.sampled, vec![1, 2, 3, 4, 5]);
        assert_eq!(trace.grad_norm_v_hat, trace.grad_norm_v);
    }

    #[test]
    fn scaffold_needs_positive_inner_step() {
        let q = synth_quadratic(3, 2, 2, 1.0, 0.0, 0.0, 2).unwrap().spec;
        let mut tr = Trainer::from_zero(&q, Algorithm::ScaffoldP, hp(1, 1, 2, 0.0), 1).unwrap();
        assert!(tr.step().is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let q = synth_quadratic(3, 2, 2, 1.0, 0.0, 0.0, 2).unwrap().spec;
        let out = Trainer::from_zero(&q, Algorithm::FedavgP, hp(10, 400, 3, 5.0), 1)
            .unwrap()
            .run();
        assert!(matches!(out, Err(Error::NonFinite(_))));
    }
}
