use rand::Rng;

use super::{check_point, ObjectiveOracle};
use crate::dataio::ClientShard;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::vector::{dot, Vec64};

pub const DEFAULT_RHO: f64 = 0.01;

/// Logistic loss on split features with a bounded non-convex penalty:
///
/// `f_i(u, v) = (1/N_i) Σ log(1 + exp(−c (aᵀu + bᵀv))) + ρ (‖u‖²/(1+‖u‖²) + ‖v‖²/(1+‖v‖²))`.
///
/// Stochastic gradients average `batch_size` rows drawn uniformly with
/// replacement from the client's shard.
#[derive(Clone, Debug)]
pub struct LogisticSpec {
    shards: Vec<ClientShard>,
    rho: f64,
    batch_size: usize,
    dim_u: usize,
    dim_v: usize,
}

impl LogisticSpec {
    pub fn new(shards: Vec<ClientShard>, rho: f64, batch_size: usize) -> Result<Self> {
        let first = shards
            .first()
            .ok_or_else(|| Error::InvalidArgument("need at least one shard".into()))?;
        let (dim_u, dim_v) = (first.dim_u(), first.dim_v());
        for s in &shards {
            if s.dim_u() != dim_u {
                return Err(Error::DimMismatch {
                    expected: dim_u,
                    got: s.dim_u(),
                });
            }
            if s.dim_v() != dim_v {
                return Err(Error::DimMismatch {
                    expected: dim_v,
                    got: s.dim_v(),
                });
            }
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be >= 0, got {rho}")));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        Ok(LogisticSpec {
            shards,
            rho,
            batch_size,
            dim_u,
            dim_v,
        })
    }

    pub fn shards(&self) -> &[ClientShard] {
        &self.shards
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn shard(&self, client: usize) -> Result<&ClientShard> {
        let shard = &self.shards[client];
        if shard.is_empty() {
            return Err(Error::EmptyShard(client));
        }
        Ok(shard)
    }

    /// Mean logistic loss and gradient over the given rows, penalty included.
    fn loss_and_grads_over(
        &self,
        shard: &ClientShard,
        rows: impl ExactSizeIterator<Item = usize>,
        u: &Vec64,
        v: &Vec64,
    ) -> (f64, Vec64, Vec64) {
        let count = rows.len() as f64;
        let mut loss = 0.0;
        let mut gu = Vec64::zeros(self.dim_u);
        let mut gv = Vec64::zeros(self.dim_v);
        for l in rows {
            let (a, b, c) = shard.row(l);
            let margin = c * (dot(a, u.as_slice()) + dot(b, v.as_slice()));
            loss += log1p_exp_neg(margin);
            // d/dz log(1 + e^{-z}) = -1 / (1 + e^{z})
            let w = -c * sigmoid(-margin) / count;
            for (g, x) in gu.as_mut_slice().iter_mut().zip(a) {
                *g += w * x;
            }
            for (g, x) in gv.as_mut_slice().iter_mut().zip(b) {
                *g += w * x;
            }
        }
        if self.rho > 0.0 {
            gu.axpy(self.rho, &regularizer_grad(u));
            gv.axpy(self.rho, &regularizer_grad(v));
        }
        let value = loss / count + self.rho * (regularizer(u) + regularizer(v));
        (value, gu, gv)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^{-z})` without overflow.
fn log1p_exp_neg(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `‖x‖² / (1 + ‖x‖²)`.
pub fn regularizer(x: &Vec64) -> f64 {
    let s = x.norm_sq();
    s / (1.0 + s)
}

/// `2x / (1 + ‖x‖²)²`.
pub fn regularizer_grad(x: &Vec64) -> Vec64 {
    let s = x.norm_sq();
    x.scaled(2.0 / ((1.0 + s) * (1.0 + s)))
}

impl ObjectiveOracle for LogisticSpec {
    fn num_clients(&self) -> usize {
        self.shards.len()
    }

    fn dim_u(&self) -> usize {
        self.dim_u
    }

    fn dim_v(&self) -> usize {
        self.dim_v
    }

    fn value(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<f64> {
        check_point(self, client, u, v)?;
        let shard = self.shard(client)?;
        let loss = (0..shard.len())
            .map(|l| {
                let (a, b, c) = shard.row(l);
                log1p_exp_neg(c * (dot(a, u.as_slice()) + dot(b, v.as_slice())))
            })
            .sum::<f64>()
            / shard.len() as f64;
        Ok(loss + self.rho * (regularizer(u) + regularizer(v)))
    }

    fn grads(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<(Vec64, Vec64)> {
        check_point(self, client, u, v)?;
        let shard = self.shard(client)?;
        let (_, gu, gv) = self.loss_and_grads_over(shard, 0..shard.len(), u, v);
        Ok((gu, gv))
    }

    fn value_and_grads(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<(f64, Vec64, Vec64)> {
        check_point(self, client, u, v)?;
        let shard = self.shard(client)?;
        Ok(self.loss_and_grads_over(shard, 0..shard.len(), u, v))
    }

    fn stoch_grads(
        &self,
        client: usize,
        u: &Vec64,
        v: &Vec64,
        rng: &mut SimRng,
    ) -> Result<(Vec64, Vec64)> {
        check_point(self, client, u, v)?;
        let shard = self.shard(client)?;
        let rows: Vec<usize> = (0..self.batch_size)
            .map(|_| rng.random_range(0..shard.len()))
            .collect();
        let (_, gu, gv) = self.loss_and_grads_over(shard, rows.into_iter(), u, v);
        Ok((gu, gv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamKey};

    fn one_row(a: &[f64], b: &[f64], c: f64, rho: f64) -> LogisticSpec {
        let mut shard = ClientShard::new(1, a.len(), b.len());
        shard.push(a, b, c).unwrap();
        LogisticSpec::new(vec![shard], rho, 1).unwrap()
    }

    #[test]
    fn zero_point_value_is_log2() {
        let mut shard = ClientShard::new(1, 2, 1);
        shard.push(&[0.3, 0.1], &[0.9], 1.0).unwrap();
        shard.push(&[0.5, 0.2], &[0.1], -1.0).unwrap();
        let spec = LogisticSpec::new(vec![shard], 0.0, 1).unwrap();
        let f = spec.value(0, &Vec64::zeros(2), &Vec64::zeros(1)).unwrap();
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn penalty_vanishes_at_origin() {
        let spec = one_row(&[1.0], &[1.0], 1.0, 1.0);
        let f = spec.value(0, &Vec64::zeros(1), &Vec64::zeros(1)).unwrap();
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn scalar_margin() {
        let spec = one_row(&[1.0], &[0.0], 1.0, 0.0);
        let f = spec.value(0, &[2.0].into(), &[0.0].into()).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((f - expected).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_zero_margin() {
        let spec = one_row(&[0.4, -1.0], &[2.0], 1.0, 0.5);
        let (gu, gv) = spec.grads(0, &Vec64::zeros(2), &Vec64::zeros(1)).unwrap();
        assert_eq!(gu, Vec64::from([-0.2, 0.5]));
        assert_eq!(gv, Vec64::from([-1.0]));
    }

    #[test]
    fn extreme_margins_stay_finite() {
        let spec = one_row(&[1.0], &[1.0], -1.0, 0.0);
        for z in [-800.0, 800.0] {
            let f = spec.value(0, &[z].into(), &[0.0].into()).unwrap();
            let (gu, gv) = spec.grads(0, &[z].into(), &[0.0].into()).unwrap();
            assert!(f.is_finite() && gu.is_finite() && gv.is_finite());
        }
    }

    #[test]
    fn empty_shard_is_an_error() {
        let spec = LogisticSpec::new(vec![ClientShard::new(1, 1, 1)], 0.0, 1).unwrap();
        assert!(matches!(
            spec.value(0, &Vec64::zeros(1), &Vec64::zeros(1)),
            Err(Error::EmptyShard(0))
        ));
        assert!(matches!(
            spec.grads(0, &Vec64::zeros(1), &Vec64::zeros(1)),
            Err(Error::EmptyShard(0))
        ));
    }

    #[test]
    fn single_row_batches_average_to_full_gradient() {
        let mut shard = ClientShard::new(1, 2, 2);
        let rows = [
            ([0.1, 0.7], [0.0, 0.3], 1.0),
            ([0.9, 0.2], [0.5, 0.5], -1.0),
            ([0.4, 0.4], [1.0, 0.0], 1.0),
        ];
        for (a, b, c) in &rows {
            shard.push(a, b, *c).unwrap();
        }
        let spec = LogisticSpec::new(vec![shard.clone()], 0.01, 1).unwrap();
        let u = Vec64::from([0.3, -0.2]);
        let v = Vec64::from([0.8, 0.1]);
        let (gu, gv) = spec.grads(0, &u, &v).unwrap();
        let (mut su, mut sv) = (Vec64::zeros(2), Vec64::zeros(2));
        for l in 0..rows.len() {
            let (_, bu, bv) = spec.loss_and_grads_over(&shard, std::iter::once(l), &u, &v);
            su.axpy(1.0 / rows.len() as f64, &bu);
            sv.axpy(1.0 / rows.len() as f64, &bv);
        }
        assert!(su.max_abs_diff(&gu) < 1e-15);
        assert!(sv.max_abs_diff(&gv) < 1e-15);
        let (f, fu, fv) = spec.value_and_grads(0, &u, &v).unwrap();
        assert!((f - spec.value(0, &u, &v).unwrap()).abs() < 1e-15);
        assert_eq!((fu, fv), (gu.clone(), gv.clone()));

        // and the minibatch path draws exactly such single-row batches
        let mut rng = StreamKey::new(3, Purpose::Local).rng();
        let (ou, _) = spec.stoch_grads(0, &u, &v, &mut rng).unwrap();
        let hit = (0..rows.len()).any(|l| {
            let (_, bu, _) = spec.loss_and_grads_over(&shard, std::iter::once(l), &u, &v);
            bu.max_abs_diff(&ou) == 0.0
        });
        assert!(hit);
    }

    #[test]
    fn regularizer_gradient_is_bounded() {
        // sup over x of 2x/(1+x²)² is reached at x = 1/√3
        let peak = 2.0 / 3f64.sqrt() / (4.0f64 / 3.0).powi(2);
        assert!(peak <= 0.65);
        for k in 0..2000 {
            let r = k as f64 * 0.005;
            let g = regularizer_grad(&Vec64::from([r * 0.6, r * 0.8]));
            assert!(g.norm() <= peak + 1e-12);
            assert!(regularizer(&Vec64::from([r])) < 1.0);
        }
    }
}
