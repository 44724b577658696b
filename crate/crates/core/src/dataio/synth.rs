use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objectives::QuadraticSpec;
use crate::rng::{Purpose, StreamKey};
use crate::vector::Vec64;

/// A generated quadratic instance together with its exact dissimilarity.
#[derive(Clone, Debug)]
pub struct SynthQuadratic {
    pub spec: QuadraticSpec,
    /// `spread² · (1/n) Σ h_i²`.
    pub b2: f64,
}

/// Generates `n` clients with u-centers `a_i = h_i · spread · e` along the
/// unit vector `e = (1, …, 1)/√d_u`, where the `h_i` are standard normal
/// draws shifted to mean zero, and standard-normal v-centers.
pub fn synth_quadratic(
    n: usize,
    dim_u: usize,
    dim_v: usize,
    spread: f64,
    sigma_u: f64,
    sigma_v: f64,
    seed: u64,
) -> Result<SynthQuadratic> {
    if n == 0 || dim_u == 0 || dim_v == 0 {
        return Err(Error::InvalidArgument(
            "need n, d_u and d_v all positive".into(),
        ));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!("spread must be >= 0, got {spread}")));
    }
    let mut rng = StreamKey::new(seed, Purpose::Synth).rng();
    let mut h: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mean = h.iter().sum::<f64>() / n as f64;
    for x in &mut h {
        *x -= mean;
    }
    let unit = 1.0 / (dim_u as f64).sqrt();
    let centers_u = h
        .iter()
        .map(|&hi| Vec64::from(vec![hi * spread * unit; dim_u]))
        .collect();
    let centers_v = (0..n)
        .map(|_| {
            (0..dim_v)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>()
                .into()
        })
        .collect();
    let b2 = spread * spread * h.iter().map(|x| x * x).sum::<f64>() / n as f64;
    Ok(SynthQuadratic {
        spec: QuadraticSpec::new(centers_u, centers_v, sigma_u, sigma_v)?,
        b2,
    })
}
