//! Dense `f64` vectors for shared/personal variables, gradients and control variates.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vec64(Vec<f64>);

impl Vec64 {
    pub fn zeros(len: usize) -> Self {
        Vec64(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Errors unless `other` has the same length as `self`.
    pub fn check_same_len(&self, other: &Vec64) -> Result<()> {
        check_len(other, self.len())
    }

    pub fn dot(&self, other: &Vec64) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Vec64) {
        debug_assert_eq!(self.len(), x.len());
        for (s, xi) in self.0.iter_mut().zip(&x.0) {
            *s += alpha * xi;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for s in &mut self.0 {
            *s *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Vec64 {
        Vec64(self.0.iter().map(|x| alpha * x).collect())
    }

    pub fn add(&self, other: &Vec64) -> Vec64 {
        debug_assert_eq!(self.len(), other.len());
        Vec64(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vec64) -> Vec64 {
        debug_assert_eq!(self.len(), other.len());
        Vec64(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `alpha * self + beta * other`.
    pub fn lincomb(&self, alpha: f64, other: &Vec64, beta: f64) -> Vec64 {
        debug_assert_eq!(self.len(), other.len());
        Vec64(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Vec64) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Arithmetic mean of equal-length vectors, summed in iteration order.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a Vec64>, len: usize) -> Vec64 {
        let mut acc = Vec64::zeros(len);
        let mut count = 0usize;
        for v in vectors {
            acc.axpy(1.0, v);
            count += 1;
        }
        if count > 0 {
            acc.scale(1.0 / count as f64);
        }
        acc
    }
}

pub(crate) fn check_len(v: &Vec64, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimMismatch {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // independent partial sums so the additions pipeline
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl From<Vec<f64>> for Vec64 {
    fn from(v: Vec<f64>) -> Self {
        Vec64(v)
    }
}

impl From<&[f64]> for Vec64 {
    fn from(v: &[f64]) -> Self {
        Vec64(v.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for Vec64 {
    fn from(v: [f64; N]) -> Self {
        Vec64(v.to_vec())
    }
}

impl Index<usize> for Vec64 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec64 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<'a> IntoIterator for &'a Vec64 {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
