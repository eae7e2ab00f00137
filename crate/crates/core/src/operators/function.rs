use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::{pairwise_sum, Real};

/// Block size for deterministic parallel reductions.
pub(crate) const REDUCE_BLOCK: usize = 4096;

/// Sum of `f(i)` over `0..n` in fixed blocks, merged pairwise: independent of the worker count.
pub(crate) fn det_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let blocks = n.div_ceil(REDUCE_BLOCK);
    let partial: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * REDUCE_BLOCK;
            let hi = (lo + REDUCE_BLOCK).min(n);
            (lo..hi).map(&f).sum()
        })
        .collect();
    pairwise_sum(&partial)
}

/// `g(x) = f(θ_x ω)` over the sites of a torus.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFunction<T: Real> {
    values: Vec<T>,
}

impl<T: Real> FieldFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![T::zero(); len] }
    }

    pub fn constant(len: usize, c: T) -> Self {
        Self { values: vec![c; len] }
    }

    pub fn from_fn(len: usize, f: impl Fn(usize) -> T + Sync + Send) -> Self {
        Self { values: (0..len).into_par_iter().map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found: self.len() })
        }
    }

    /// Site average `(1/N) Σ g(x)`.
    pub fn mean(&self) -> f64 {
        det_sum(self.len(), |i| self.values[i].to_f64_lossy()) / self.len() as f64
    }

    /// `(1/N) Σ g(x)²`.
    pub fn mean_square(&self) -> f64 {
        det_sum(self.len(), |i| {
            let v = self.values[i].to_f64_lossy();
            v * v
        }) / self.len() as f64
    }

    /// `(1/N) Σ g(x) h(x)`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        det_sum(self.len(), |i| self.values[i].to_f64_lossy() * other.values[i].to_f64_lossy()) / self.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.to_f64_lossy().abs()).fold(0.0, f64::max)
    }

    /// `g − mean(g)`.
    pub fn centered(&self) -> Self {
        let m = T::lit(self.mean());
        Self { values: self.values.iter().map(|&v| v - m).collect() }
    }

    pub fn shifted(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|&v| v + c).collect() }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|&v| v * c).collect() }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
            .fold(0.0, f64::max)
    }
}

impl<T: Real> From<Vec<T>> for FieldFunction<T> {
    fn from(values: Vec<T>) -> Self {
        Self::new(values)
    }
}
