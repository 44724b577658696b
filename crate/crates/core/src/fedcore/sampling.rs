use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Uniform `m`-subset of `0..n` without replacement, returned in ascending order.
///
/// Runs the first `m` swaps of a Fisher–Yates shuffle and keeps the prefix.
pub fn sample_clients(n: usize, m: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::TooManySampled { m, n });
    }
    let mut ids: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        ids.swap(i, j);
    }
    ids.truncate(m);
    ids.sort_unstable();
    Ok(ids)
}
