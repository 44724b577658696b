#![allow(dead_code)]

use std::path::PathBuf;

use fedpart::dataio::{
    partition_clients, synth_quadratic, ClientShard, PartitionScheme, RawDataset, SynthQuadratic,
};
use fedpart::fedcore::{sample_clients, Algorithm, HyperParams, Trainer, TrainingOutput};
use fedpart::harness::stationarity_floor;
use fedpart::objectives::LogisticSpec;
use fedpart::rng::{Purpose, SimRng, StreamKey};
use fedpart::{ObjectiveOracle, Vec64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-6;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn mnist_images() -> PathBuf {
    data_dir().join("mnist5k-images-idx3-ubyte.gz")
}

pub fn mnist_labels() -> PathBuf {
    data_dir().join("mnist5k-labels-idx1-ubyte.gz")
}

/// Synthetic quadratic whose dissimilarity is exactly `b2`.
pub fn quadratic_with_b2(
    n: usize,
    dims: (usize, usize),
    b2: f64,
    sigma: (f64, f64),
    seed: u64,
) -> SynthQuadratic {
    let unit = synth_quadratic(n, dims.0, dims.1, 1.0, 0.0, 0.0, seed).unwrap();
    let spread = if b2 > 0.0 { (b2 / unit.b2).sqrt() } else { 0.0 };
    synth_quadratic(n, dims.0, dims.1, spread, sigma.0, sigma.1, seed).unwrap()
}

/// Inner steps `γ/η_u`, `γ/η_v` for the given effective step and outer steps.
pub fn hyper(gamma: f64, eta_u: f64, eta_v: f64, k: usize, t: usize, m: usize) -> HyperParams {
    HyperParams {
        gamma_u: gamma / eta_u,
        gamma_v: gamma / eta_v,
        eta_u,
        eta_v,
        local_steps: k,
        rounds: t,
        sampled: m,
    }
}

pub fn train(q: &SynthQuadratic, algorithm: Algorithm, hp: HyperParams, seed: u64) -> TrainingOutput {
    Trainer::from_zero(&q.spec, algorithm, hp, seed)
        .unwrap()
        .run()
        .unwrap()
}

pub fn floor(q: &SynthQuadratic, algorithm: Algorithm, hp: HyperParams, seed: u64) -> f64 {
    stationarity_floor(&train(q, algorithm, hp, seed).traces)
}

/// Central-difference derivative of `f` along coordinate `j`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[j] += h;
    m[j] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

pub fn gaussian(dim: usize, scale: f64, rng: &mut SimRng) -> Vec64 {
    (0..dim)
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
        .collect::<Vec<f64>>()
        .into()
}

/// Largest norm-wise relative error between analytic and central-difference
/// gradients over `points` random points.
pub fn worst_fd_error<O: ObjectiveOracle>(oracle: &O, points: usize, seed: u64) -> f64 {
    let (du, dv) = (oracle.dim_u(), oracle.dim_v());
    let mut rng = StreamKey::new(seed, Purpose::Probe).rng();
    let mut worst: f64 = 0.0;
    for p in 0..points {
        let i = p % oracle.num_clients();
        let u = gaussian(du, 1.0 / (du as f64).sqrt(), &mut rng);
        let v = gaussian(dv, 1.0 / (dv as f64).sqrt(), &mut rng);
        let (gu, gv) = oracle.grads(i, &u, &v).unwrap();
        let mut x: Vec<f64> = u.as_slice().to_vec();
        x.extend_from_slice(v.as_slice());
        let f = |z: &[f64]| {
            oracle
                .value(i, &z[..du].into(), &z[du..].into())
                .unwrap()
        };
        let fd: Vec<f64> = (0..du + dv).map(|j| central_diff(f, &x, j, FD_STEP)).collect();
        let exact: Vec<f64> = gu.iter().chain(gv.iter()).copied().collect();
        let diff = fd
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = exact.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        worst = worst.max(diff / scale);
    }
    worst
}

pub fn random_logistic(n: usize, rows: usize, du: usize, dv: usize, rho: f64, seed: u64) -> LogisticSpec {
    let mut rng = StreamKey::new(seed, Purpose::Synth).rng();
    let shards = (0..n)
        .map(|i| {
            let mut s = ClientShard::new(i + 1, du, dv);
            for _ in 0..rows {
                let a = gaussian(du, 1.0, &mut rng);
                let b = gaussian(dv, 1.0, &mut rng);
                let c = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s.push(a.as_slice(), b.as_slice(), c).unwrap();
            }
            s
        })
        .collect();
    LogisticSpec::new(shards, rho, 1).unwrap()
}

/// Logistic objective on an iid split of the MNIST fixture, `cap` rows per client.
pub fn mnist_logistic(cap: usize) -> LogisticSpec {
    let data = RawDataset::load_idx(&mnist_images(), &mnist_labels()).unwrap();
    let mut shards = partition_clients(&data, 10, PartitionScheme::Iid, 4, 392, 392).unwrap();
    for s in &mut shards {
        s.truncate(cap);
    }
    LogisticSpec::new(shards, 0.01, 1).unwrap()
}

pub fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Straight-line FedSim: sampled clients run K SGD steps on `(u, v_i)` and
/// the server averages the returned `u`.
#[allow(clippy::too_many_arguments)]
pub fn fedsim<O: ObjectiveOracle>(
    oracle: &O,
    n: usize,
    m: usize,
    k: usize,
    gamma_u: f64,
    gamma_v: f64,
    rounds: usize,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<Vec<f64>>)> {
    let (du, dv) = (oracle.dim_u(), oracle.dim_v());
    let mut u = vec![0.0; du];
    let mut v = vec![vec![0.0; dv]; n];
    let mut history = Vec::new();
    for t in 0..rounds {
        let mut rng = StreamKey::new(seed, Purpose::Sample).round(t).rng();
        let sampled = sample_clients(n, m, &mut rng).unwrap();
        let mut new_u = vec![0.0; du];
        for &i in &sampled {
            let mut ui = u.clone();
            let mut vi = v[i].clone();
            for step in 0..k {
                let mut rng = StreamKey::new(seed, Purpose::Local)
                    .round(t)
                    .client(i)
                    .step(step)
                    .rng();
                let (gu, gv) = oracle
                    .stoch_grads(i, &ui.clone().into(), &vi.clone().into(), &mut rng)
                    .unwrap();
                for j in 0..du {
                    ui[j] -= gamma_u * gu[j];
                }
                for j in 0..dv {
                    vi[j] -= gamma_v * gv[j];
                }
            }
            for j in 0..du {
                new_u[j] += ui[j] / m as f64;
            }
            v[i] = vi;
        }
        u = new_u;
        history.push((u.clone(), v.clone()));
    }
    history
}

/// Largest deviation between FedAvg-P and Scaffold-P states over `rounds`
/// matched-seed rounds with a single client.
pub fn single_client_deviation(rounds: usize) -> f64 {
    let q = quadratic_with_b2(1, (4, 3), 0.0, (1.0, 0.5), 2);
    let hp = hyper(0.02, 1.5, 1.2, 5, rounds, 1);
    let mut a = Trainer::from_zero(&q.spec, Algorithm::FedavgP, hp, 17).unwrap();
    let mut b = Trainer::from_zero(&q.spec, Algorithm::ScaffoldP, hp, 17).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..rounds {
        a.step().unwrap();
        b.step().unwrap();
        worst = worst.max(a.server().u.max_abs_diff(&b.server().u));
        worst = worst.max(a.clients()[0].v.max_abs_diff(&b.clients()[0].v));
    }
    worst
}

/// Deviation of one `K = 1`, `m = n`, unit-outer-step round from a directly
/// coded parallel SGD step on the same stochastic gradients.
pub fn parallel_sgd_deviation(algorithm: Algorithm) -> f64 {
    let n = 6;
    let gamma = 0.1;
    let q = quadratic_with_b2(n, (5, 3), 4.0, (1.0, 1.0), 8);
    let hp = hyper(gamma, 1.0, 1.0, 1, 1, n);
    let seed = 23;
    let mut tr = Trainer::from_zero(&q.spec, algorithm, hp, seed).unwrap();
    let u0 = tr.server().u.clone();
    let v0: Vec<Vec64> = tr.clients().iter().map(|c| c.v.clone()).collect();
    tr.step().unwrap();

    let mut mean_gu = vec![0.0; u0.len()];
    let mut worst: f64 = 0.0;
    for (i, v0i) in v0.iter().enumerate() {
        let mut rng = StreamKey::new(seed, Purpose::Local)
            .round(0)
            .client(i)
            .step(0)
            .rng();
        let (gu, gv) = q.spec.stoch_grads(i, &u0, v0i, &mut rng).unwrap();
        for (acc, g) in mean_gu.iter_mut().zip(gu.iter()) {
            *acc += g / n as f64;
        }
        let v: Vec<f64> = v0i.iter().zip(gv.iter()).map(|(v, g)| v - gamma * g).collect();
        worst = worst.max(max_dev(tr.clients()[i].v.as_slice(), &v));
    }
    let u: Vec<f64> = u0.iter().zip(&mean_gu).map(|(u, g)| u - gamma * g).collect();
    worst.max(max_dev(tr.server().u.as_slice(), &u))
}

/// Largest deviation between unit-outer-step FedAvg-P and [`fedsim`] over
/// `configs` random configurations of 30 rounds each.
pub fn fedsim_deviation(configs: u64) -> f64 {
    let mut rng = StreamKey::new(5, Purpose::Probe).rng();
    let mut worst: f64 = 0.0;
    for config in 0..configs {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=n);
        let k = rng.random_range(1..=6);
        let du = rng.random_range(1..=6);
        let dv = rng.random_range(1..=4);
        let gamma_u = rng.random_range(0.01..0.2);
        let gamma_v = rng.random_range(0.01..0.2);
        let sigma = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let q = quadratic_with_b2(n, (du, dv), 3.0, sigma, config);
        let rounds = 30;
        let seed = 100 + config;
        let hp = HyperParams {
            gamma_u,
            gamma_v,
            eta_u: 1.0,
            eta_v: 1.0,
            local_steps: k,
            rounds,
            sampled: m,
        };
        let reference = fedsim(&q.spec, n, m, k, gamma_u, gamma_v, rounds, seed);
        let mut tr = Trainer::from_zero(&q.spec, Algorithm::FedavgP, hp, seed).unwrap();
        for (u_ref, v_ref) in &reference {
            tr.step().unwrap();
            worst = worst.max(max_dev(tr.server().u.as_slice(), u_ref));
            for (c, v) in tr.clients().iter().zip(v_ref) {
                worst = worst.max(max_dev(c.v.as_slice(), v));
            }
        }
    }
    worst
}

/// Largest `‖c − mean c_i‖` seen after each of `rounds` partial-participation
/// Scaffold-P rounds, with the largest `‖c‖` for scale.
pub fn control_mean_gap(rounds: usize) -> (f64, f64) {
    let q = quadratic_with_b2(10, (8, 4), 10.0, (1.0, 1.0), 6);
    let hp = hyper(0.05, 2.0, 1.5, 10, rounds, 3);
    let mut tr = Trainer::from_zero(&q.spec, Algorithm::ScaffoldP, hp, 31).unwrap();
    let (mut gap, mut norm): (f64, f64) = (0.0, 0.0);
    for _ in 0..rounds {
        tr.step().unwrap();
        let c = tr.server().control.as_ref().unwrap();
        let clients = tr.clients();
        let mean = Vec64::mean(clients.iter().map(|s| s.control.as_ref().unwrap()), c.len());
        gap = gap.max(c.sub(&mean).norm());
        norm = norm.max(c.norm());
    }
    (gap, norm)
}
