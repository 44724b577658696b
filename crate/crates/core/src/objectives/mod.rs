//! Objective oracles: exact values, exact gradients and stochastic gradients
//! of per-client losses `f_i(u, v_i)`.

mod logistic;
mod quadratic;

pub use logistic::{regularizer, regularizer_grad, LogisticSpec, DEFAULT_RHO};
pub use quadratic::QuadraticSpec;

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::vector::{check_len, Vec64};

/// Per-client objective with a shared block `u` and a personal block `v_i`.
///
/// Client indices are 0-based. Implementations are immutable; all randomness
/// comes from the generator passed to [`ObjectiveOracle::stoch_grads`].
pub trait ObjectiveOracle: Send + Sync {
    fn num_clients(&self) -> usize;
    fn dim_u(&self) -> usize;
    fn dim_v(&self) -> usize;

    fn value(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<f64>;

    /// Exact `(grad_u f_i, grad_v f_i)`.
    fn grads(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<(Vec64, Vec64)>;

    /// One unbiased draw of `(grad_u F, grad_v F)(u, v_i; xi_i)`.
    fn stoch_grads(
        &self,
        client: usize,
        u: &Vec64,
        v: &Vec64,
        rng: &mut SimRng,
    ) -> Result<(Vec64, Vec64)>;

    /// `(f_i, grad_u f_i, grad_v f_i)`; objectives may share work between them.
    fn value_and_grads(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<(f64, Vec64, Vec64)> {
        let (gu, gv) = self.grads(client, u, v)?;
        Ok((self.value(client, u, v)?, gu, gv))
    }

    fn grad_u(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<Vec64> {
        Ok(self.grads(client, u, v)?.0)
    }

    fn grad_v(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<Vec64> {
        Ok(self.grads(client, u, v)?.1)
    }
}

/// Validates a client index and the dimensions of `(u, v)`.
pub(crate) fn check_point<O: ObjectiveOracle + ?Sized>(
    oracle: &O,
    client: usize,
    u: &Vec64,
    v: &Vec64,
) -> Result<()> {
    let n = oracle.num_clients();
    if client >= n {
        return Err(Error::ClientOutOfRange { index: client, n });
    }
    check_len(u, oracle.dim_u())?;
    check_len(v, oracle.dim_v())
}
