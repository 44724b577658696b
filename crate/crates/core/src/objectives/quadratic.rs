use rand_distr::{Distribution, StandardNormal};

use super::{check_point, ObjectiveOracle};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::vector::Vec64;

/// Heterogeneous quadratic `f_i(u, v) = ½‖u − a_i‖² + ½‖v − b_i‖²`.
///
/// Its smoothness constant is exactly 1, the gradient dissimilarity is the
/// spread of the centers `(1/n) Σ ‖a_i − ā‖²` at every point, and the
/// stochastic gradients carry Gaussian noise whose total second moment is
/// exactly `σ_u²` (resp. `σ_v²`).
#[derive(Clone, Debug)]
pub struct QuadraticSpec {
    centers_u: Vec<Vec64>,
    centers_v: Vec<Vec64>,
    noise_u: f64,
    noise_v: f64,
}

impl QuadraticSpec {
    pub fn new(
        centers_u: Vec<Vec64>,
        centers_v: Vec<Vec64>,
        noise_u: f64,
        noise_v: f64,
    ) -> Result<Self> {
        if centers_u.is_empty() || centers_u.len() != centers_v.len() {
            return Err(Error::InvalidArgument(format!(
                "need one u-center and one v-center per client, got {} and {}",
                centers_u.len(),
                centers_v.len()
            )));
        }
        let (du, dv) = (centers_u[0].len(), centers_v[0].len());
        for (a, b) in centers_u.iter().zip(&centers_v) {
            crate::vector::check_len(a, du)?;
            crate::vector::check_len(b, dv)?;
        }
        if !(noise_u >= 0.0 && noise_v >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise levels must be non-negative".into(),
            ));
        }
        Ok(QuadraticSpec {
            centers_u,
            centers_v,
            noise_u,
            noise_v,
        })
    }

    pub fn centers_u(&self) -> &[Vec64] {
        &self.centers_u
    }

    pub fn centers_v(&self) -> &[Vec64] {
        &self.centers_v
    }

    pub fn noise_u(&self) -> f64 {
        self.noise_u
    }

    pub fn noise_v(&self) -> f64 {
        self.noise_v
    }

    /// Closed-form gradient dissimilarity `(1/n) Σ ‖a_i − ā‖²`.
    pub fn dissimilarity(&self) -> f64 {
        let mean = Vec64::mean(&self.centers_u, self.dim_u());
        self.centers_u
            .iter()
            .map(|a| a.sub(&mean).norm_sq())
            .sum::<f64>()
            / self.centers_u.len() as f64
    }

    /// Mean of the shared-block centers, the unique minimizer in `u`.
    pub fn mean_center_u(&self) -> Vec64 {
        Vec64::mean(&self.centers_u, self.dim_u())
    }
}

fn add_noise(g: &mut Vec64, total_std: f64, rng: &mut SimRng) {
    if total_std == 0.0 || g.is_empty() {
        return;
    }
    let per_coord = total_std / (g.len() as f64).sqrt();
    for x in g.as_mut_slice() {
        let z: f64 = StandardNormal.sample(rng);
        *x += per_coord * z;
    }
}

impl ObjectiveOracle for QuadraticSpec {
    fn num_clients(&self) -> usize {
        self.centers_u.len()
    }

    fn dim_u(&self) -> usize {
        self.centers_u[0].len()
    }

    fn dim_v(&self) -> usize {
        self.centers_v[0].len()
    }

    fn value(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<f64> {
        check_point(self, client, u, v)?;
        Ok(0.5 * u.sub(&self.centers_u[client]).norm_sq()
            + 0.5 * v.sub(&self.centers_v[client]).norm_sq())
    }

    fn grads(&self, client: usize, u: &Vec64, v: &Vec64) -> Result<(Vec64, Vec64)> {
        check_point(self, client, u, v)?;
        Ok((u.sub(&self.centers_u[client]), v.sub(&self.centers_v[client])))
    }

    fn stoch_grads(
        &self,
        client: usize,
        u: &Vec64,
        v: &Vec64,
        rng: &mut SimRng,
    ) -> Result<(Vec64, Vec64)> {
        let (mut gu, mut gv) = self.grads(client, u, v)?;
        add_noise(&mut gu, self.noise_u, rng);
        add_noise(&mut gv, self.noise_v, rng);
        Ok((gu, gv))
    }
}
