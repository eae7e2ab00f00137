use rayon::prelude::*;

use super::eigen::{symmetric_eigen, SymmetricEigen};
use super::function::FieldFunction;
use super::generator::TorusOperator;
use super::DENSE_LIMIT;
use crate::error::{Error, Result};
use crate::num::Real;

/// Poisson mass discarded by the uniformization backend.
pub const POISSON_TAIL: f64 = 1e-12;

/// Eigenvalues of `−L` below this are treated as exactly zero.
pub const ZERO_EIGENVALUE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SemigroupBackend {
    /// Dense when the decomposition is cheaper than the Poisson series, else uniformization.
    Auto,
    Dense,
    Uniformization,
}

/// Full spectral decomposition of `−L`, reusable across times and functions.
#[derive(Clone, Debug)]
pub struct Decomposition<T: Real> {
    eig: SymmetricEigen<T>,
}

impl<T: Real> Decomposition<T> {
    pub fn new(op: &TorusOperator<T>) -> Result<Self> {
        let n = op.sites();
        let mut eig = symmetric_eigen(op.dense_negative()?, n);
        for v in eig.values.iter_mut() {
            if v.to_f64_lossy().abs() < ZERO_EIGENVALUE {
                *v = T::zero();
            }
        }
        Ok(Self { eig })
    }

    pub fn sites(&self) -> usize {
        self.eig.n
    }

    /// Eigenvalues of `−L`, ascending, all ≥ 0.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eig.values
    }

    pub fn eigenvector(&self, i: usize) -> &[T] {
        self.eig.vector(i)
    }

    /// Euclidean coefficients `⟨v_i, g⟩` for every eigenvector.
    pub fn coefficients(&self, g: &FieldFunction<T>) -> Vec<f64> {
        let n = self.sites();
        (0..n)
            .into_par_iter()
            .map(|i| {
                self.eig.vector(i).iter().zip(g.values()).map(|(a, b)| a.to_f64_lossy() * b.to_f64_lossy()).sum()
            })
            .collect()
    }

    /// Spectral atoms `(λ_i, ⟨v_i, g⟩² / N)`; the weights sum to the mean square of `g`.
    pub fn atoms(&self, g: &FieldFunction<T>) -> Vec<(f64, f64)> {
        let n = self.sites() as f64;
        self.coefficients(g)
            .into_iter()
            .zip(&self.eig.values)
            .map(|(c, l)| (l.to_f64_lossy(), c * c / n))
            .collect()
    }

    /// `Σ_i φ(λ_i) ⟨v_i, g⟩ v_i`.
    pub fn apply_spectral(&self, g: &FieldFunction<T>, phi: impl Fn(f64) -> f64) -> FieldFunction<T> {
        let n = self.sites();
        let coef: Vec<f64> = self
            .coefficients(g)
            .into_iter()
            .zip(&self.eig.values)
            .map(|(c, l)| c * phi(l.to_f64_lossy()))
            .collect();
        let out: Vec<T> = (0..n)
            .into_par_iter()
            .map(|x| {
                let s: f64 = coef.iter().enumerate().map(|(i, c)| c * self.eig.vectors[i * n + x].to_f64_lossy()).sum();
                T::lit(s)
            })
            .collect();
        FieldFunction::new(out)
    }

    pub fn exp_apply(&self, g: &FieldFunction<T>, t: f64) -> FieldFunction<T> {
        self.apply_spectral(g, |l| (-l * t).exp())
    }
}

/// `e^{tL} g`.
pub fn semigroup_apply<T: Real>(op: &TorusOperator<T>, g: &FieldFunction<T>, t: f64) -> Result<FieldFunction<T>> {
    semigroup_apply_with(op, g, t, SemigroupBackend::Auto)
}

pub fn semigroup_apply_with<T: Real>(
    op: &TorusOperator<T>,
    g: &FieldFunction<T>,
    t: f64,
    backend: SemigroupBackend,
) -> Result<FieldFunction<T>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Range(format!("semigroup time {t} must be finite and ≥ 0")));
    }
    g.check_len(op.sites())?;
    if t == 0.0 {
        return Ok(g.clone());
    }
    let backend = match backend {
        SemigroupBackend::Auto => {
            let n = op.sites() as f64;
            let lt = op.max_jump_rate().to_f64_lossy() * t;
            let series = (lt + 8.0 * lt.sqrt() + 10.0) * n * op.lattice().degree() as f64;
            if op.sites() <= DENSE_LIMIT && 4.0 * n * n * n < series {
                SemigroupBackend::Dense
            } else {
                SemigroupBackend::Uniformization
            }
        }
        b => b,
    };
    match backend {
        SemigroupBackend::Dense => Ok(Decomposition::new(op)?.exp_apply(g, t)),
        _ => Ok(uniformization(op, g, t)),
    }
}

/// Poisson(m) weights on `[lo, hi]`, normalized, with the discarded mass below `POISSON_TAIL`.
pub(crate) fn poisson_window(m: f64) -> (usize, Vec<f64>) {
    if m == 0.0 {
        return (0, vec![1.0]);
    }
    let mode = m.floor() as usize;
    // relative weights around the mode, then normalize
    let mut right = vec![1.0f64];
    let mut k = mode;
    loop {
        let w = right.last().unwrap() * m / (k + 1) as f64;
        k += 1;
        right.push(w);
        let ratio = m / (k + 1) as f64;
        // geometric bound on the remaining right tail
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < POISSON_TAIL * 1e-2 {
            break;
        }
    }
    let mut left = Vec::new();
    let mut k = mode;
    let mut w = 1.0f64;
    while k > 0 {
        w *= k as f64 / m;
        k -= 1;
        left.push(w);
        let ratio = k as f64 / m;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < POISSON_TAIL * 1e-2 {
            break;
        }
    }
    let lo = mode - left.len();
    let mut weights: Vec<f64> = left.into_iter().rev().collect();
    weights.extend(right);
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    (lo, weights)
}

/// `e^{tL} g = Σ_k Pois(Λt; k) P^k g` with `P = I + L/Λ`, `Λ = max p(x)`.
fn uniformization<T: Real>(op: &TorusOperator<T>, g: &FieldFunction<T>, t: f64) -> FieldFunction<T> {
    let lambda = op.max_jump_rate().to_f64_lossy();
    let (lo, weights) = poisson_window(lambda * t);
    let n = op.sites();
    let inv = T::lit(1.0 / lambda);
    let mut cur = g.values().to_vec();
    let mut lg = vec![T::zero(); n];
    let mut acc = vec![0.0f64; n];
    for k in 0..lo + weights.len() {
        if k >= lo {
            let w = weights[k - lo];
            acc.par_iter_mut().zip(&cur).for_each(|(a, c)| *a += w * c.to_f64_lossy());
        }
        if k + 1 == lo + weights.len() {
            break;
        }
        op.apply_into(&cur, &mut lg);
        cur.par_iter_mut().zip(&lg).for_each(|(c, l)| *c = *c + *l * inv);
    }
    FieldFunction::new(acc.into_iter().map(T::lit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_window_mass() {
        for m in [0.3, 1.0, 7.5, 250.0, 4000.0] {
            let (lo, w) = poisson_window(m);
            let mean: f64 = w.iter().enumerate().map(|(i, p)| (lo + i) as f64 * p).sum();
            assert!((mean - m).abs() < 1e-9 * m.max(1.0), "{m}: {mean}");
        }
    }
}
