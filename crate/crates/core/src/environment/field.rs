use rayon::prelude::*;

use super::lattice::{EdgeOffset, Lattice};
use super::law::ConductanceLaw;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::stream;

/// Edges drawn from one RNG stream. Fixed so fields do not depend on the worker count.
pub const EDGE_BLOCK: usize = 4096;

/// Edge conductances on a torus, one value per undirected edge.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductanceField<T: Real> {
    lattice: Lattice,
    omega: Vec<T>,
    law: Option<ConductanceLaw>,
    seed: Option<u64>,
}

impl<T: Real> ConductanceField<T> {
    /// Wraps explicit conductances in canonical edge order.
    pub fn from_values(lattice: Lattice, omega: Vec<T>) -> Result<Self> {
        if omega.len() != lattice.edges() {
            return Err(Error::DimensionMismatch { expected: lattice.edges(), found: omega.len() });
        }
        if let Some((e, w)) = omega.iter().enumerate().find(|(_, w)| !(**w >= T::one()) || !w.is_finite()) {
            return Err(Error::Parameter(format!("conductance {w} on edge {e} is not a finite value ≥ 1")));
        }
        Ok(Self { lattice, omega, law: None, seed: None })
    }

    pub fn constant(lattice: Lattice, c: T) -> Result<Self> {
        let omega = vec![c; lattice.edges()];
        let mut f = Self::from_values(lattice, omega)?;
        f.law = c.to_f64().map(ConductanceLaw::Constant);
        Ok(f)
    }

    /// Realization `realization` of the i.i.d. field under `seed`.
    pub fn sample_realization(law: &ConductanceLaw, lattice: &Lattice, seed: u64, realization: u64) -> Result<Self> {
        law.validate()?;
        let mut omega = vec![T::one(); lattice.edges()];
        omega.par_chunks_mut(EDGE_BLOCK).enumerate().for_each(|(b, chunk)| {
            let mut rng = stream(seed, realization, b as u64);
            for w in chunk {
                // rounding to f32 can never take a value below 1 since 1 is representable
                *w = T::lit(law.sample(&mut rng)).max(T::one());
            }
        });
        Ok(Self { lattice: lattice.clone(), omega, law: Some(*law), seed: Some(seed) })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[T] {
        &self.omega
    }

    pub fn law(&self) -> Option<&ConductanceLaw> {
        self.law.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    #[inline]
    pub fn omega(&self, edge: usize) -> T {
        self.omega[edge]
    }

    /// Conductance of the edge from `site` in direction `k`.
    #[inline]
    pub fn omega_dir(&self, site: usize, k: usize) -> T {
        self.omega[self.lattice.edge_in_direction(site, k)]
    }

    pub fn set(&mut self, edge: usize, value: T) -> Result<()> {
        if !(value >= T::one()) || !value.is_finite() {
            return Err(Error::Parameter(format!("conductance {value} must be a finite value ≥ 1")));
        }
        if edge >= self.omega.len() {
            return Err(Error::Range(format!("edge {edge} outside field of {} edges", self.omega.len())));
        }
        self.omega[edge] = value;
        self.law = None;
        Ok(())
    }

    /// Environment seen from `x`: reads of `(y, z)` return `ω_{x+y, x+z}`.
    pub fn translate(&self, x: usize) -> FieldView<'_, T> {
        FieldView { field: self, shift: x % self.lattice.sites() }
    }

    /// `p_ω(x)`: sum of the conductances incident to `x`.
    pub fn total_jump_rate(&self, x: usize) -> T {
        (0..self.lattice.degree()).map(|k| self.omega_dir(x, k)).fold(T::zero(), |a, b| a + b)
    }

    pub fn jump_rates(&self) -> Vec<T> {
        (0..self.lattice.sites()).into_par_iter().map(|x| self.total_jump_rate(x)).collect()
    }

    pub fn classify_sites(&self, eta: T) -> SiteClassification<T> {
        let good: Vec<bool> = self.jump_rates().into_iter().map(|p| p <= eta).collect();
        let bad = good.iter().filter(|g| !**g).count();
        SiteClassification { eta, bad_fraction: bad as f64 / good.len() as f64, good }
    }

    pub fn mean(&self) -> f64 {
        crate::num::pairwise_sum(&self.omega.iter().map(|w| w.to_f64_lossy()).collect::<Vec<_>>())
            / self.omega.len() as f64
    }

    /// Same conductances in another precision.
    pub fn cast<U: Real>(&self) -> ConductanceField<U> {
        ConductanceField {
            lattice: self.lattice.clone(),
            omega: self.omega.iter().map(|w| U::lit(w.to_f64_lossy()).max(U::one())).collect(),
            law: self.law,
            seed: self.seed,
        }
    }
}

/// Translated read-only view `θ_x ω`.
#[derive(Clone, Copy, Debug)]
pub struct FieldView<'a, T: Real> {
    field: &'a ConductanceField<T>,
    shift: usize,
}

impl<'a, T: Real> FieldView<'a, T> {
    pub fn origin(&self) -> usize {
        self.shift
    }

    pub fn field(&self) -> &'a ConductanceField<T> {
        self.field
    }

    /// Conductance of the edge joining `y` and `y + e_axis` in view coordinates.
    #[inline]
    pub fn omega(&self, y: usize, axis: usize) -> T {
        let l = self.field.lattice();
        self.field.omega(l.edge(l.add(self.shift, y), axis))
    }

    /// Conductance between neighbouring view sites `y` and `z`.
    pub fn between(&self, y: usize, z: usize) -> Option<T> {
        let l = self.field.lattice();
        l.edge_between(l.add(self.shift, y), l.add(self.shift, z)).map(|e| self.field.omega(e))
    }

    /// Conductance of an edge given relative to the view origin.
    #[inline]
    pub fn at(&self, offset: &EdgeOffset) -> T {
        self.field.omega(self.field.lattice().edge_at(self.shift, offset))
    }

    pub fn translate(&self, y: usize) -> FieldView<'a, T> {
        FieldView { field: self.field, shift: self.field.lattice().add(self.shift, y) }
    }

    /// Materializes the view as a new field.
    pub fn to_field(&self) -> ConductanceField<T> {
        let l = self.field.lattice();
        let omega = (0..l.edges()).map(|e| self.omega(e / l.dim(), e % l.dim())).collect();
        ConductanceField { lattice: l.clone(), omega, law: self.field.law, seed: None }
    }
}

/// Good/bad flags: `x` is good iff `p_ω(x) ≤ η`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteClassification<T: Real> {
    pub eta: T,
    pub good: Vec<bool>,
    /// Empirical fraction of bad sites `q̂`.
    pub bad_fraction: f64,
}

impl<T: Real> SiteClassification<T> {
    #[inline]
    pub fn is_bad(&self, x: usize) -> bool {
        !self.good[x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(d: usize, n: usize) -> Lattice {
        Lattice::new(d, n).unwrap()
    }

    #[test]
    fn constant_law_gives_constant_field() {
        let f = ConductanceField::<f64>::sample_realization(&ConductanceLaw::Constant(1.0), &lat(2, 8), 1, 0).unwrap();
        assert_eq!(f.values().len(), 128);
        assert!(f.values().iter().all(|&w| w == 1.0));
        assert_eq!(f.total_jump_rate(5), 4.0);
    }

    #[test]
    fn two_point_edge_mean() {
        let law = ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 };
        let f = ConductanceField::<f64>::sample_realization(&law, &lat(1, 100_000), 5, 0).unwrap();
        assert!((f.mean() - 2.5).abs() < 4.0 * 1.5 / (1e5f64).sqrt());
    }

    #[test]
    fn sampling_is_deterministic_and_realizations_differ() {
        let law = ConductanceLaw::Uniform { lo: 1.0, hi: 3.0 };
        let a = ConductanceField::<f64>::sample_realization(&law, &lat(2, 70), 9, 0).unwrap();
        let b = ConductanceField::<f64>::sample_realization(&law, &lat(2, 70), 9, 0).unwrap();
        let c = ConductanceField::<f64>::sample_realization(&law, &lat(2, 70), 9, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
        let single: ConductanceField<f32> = ConductanceField::sample_realization(&law, &lat(2, 70), 9, 0).unwrap();
        assert!((single.values()[17] as f64 - a.values()[17]).abs() < 1e-6);
    }

    #[test]
    fn hand_enumerated_jump_rate() {
        let f = ConductanceField::from_values(lat(1, 5), vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(f.total_jump_rate(1), 3.0);
        assert_eq!(f.total_jump_rate(0), 6.0);
    }

    #[test]
    fn rejects_subunit_conductance() {
        assert!(ConductanceField::from_values(lat(1, 3), vec![1.0, 0.5, 2.0]).is_err());
        assert!(ConductanceField::<f64>::from_values(lat(1, 3), vec![1.0]).is_err());
    }

    #[test]
    fn translation_reads() {
        let law = ConductanceLaw::Uniform { lo: 1.0, hi: 2.0 };
        let l = lat(2, 5);
        let f = ConductanceField::<f64>::sample_realization(&law, &l, 2, 0).unwrap();
        let id = f.translate(0);
        for e in 0..l.edges() {
            assert_eq!(id.omega(e / 2, e % 2), f.omega(e));
        }
        assert_eq!(id.to_field().values(), f.values());
        for x in 0..l.sites() {
            for y in [0, 3, 7, 24] {
                let lhs = f.translate(x).translate(y);
                let rhs = f.translate(l.add(x, y));
                for z in 0..l.sites() {
                    assert_eq!(lhs.omega(z, 1), rhs.omega(z, 1));
                }
            }
        }
        let v = f.translate(7);
        assert_eq!(v.between(0, l.step(0, 3)), Some(f.omega_dir(7, 3)));
        assert_eq!(v.at(&EdgeOffset::unit(2, 0, false)), f.omega_dir(7, 1));
    }

    #[test]
    fn classification_thresholds() {
        let f = ConductanceField::constant(lat(2, 4), 1.0f64).unwrap();
        let c = f.classify_sites(4.0);
        assert_eq!(c.bad_fraction, 0.0);
        let c = f.classify_sites(3.0);
        assert_eq!(c.bad_fraction, 1.0);
    }
}
