use std::io::Write;

use rayon::prelude::*;

use super::function::{det_sum, FieldFunction};
use crate::environment::{ConductanceField, Lattice};
use crate::error::{Error, Result};
use crate::num::Real;

/// Which walk the generator drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    /// Jump rates `ω_{x,y}` (variable-speed walk).
    Conductance,
    /// All rates 1.
    Simple,
}

/// Below this many sites matvecs run on one thread.
const PAR_THRESHOLD: usize = 1 << 14;

/// Generator `L` of a walk on a fixed field, stored as a neighbour table.
///
/// `(Lg)(x) = Σ_k r(x,k) (g(x + k) − g(x))`, so `L` is symmetric with zero row sums.
#[derive(Clone, Debug)]
pub struct TorusOperator<T: Real> {
    lattice: Lattice,
    kind: GeneratorKind,
    /// `nbr[x·2d + k]`: neighbour of `x` in direction `k`.
    nbr: Vec<usize>,
    /// `rates[x·2d + k]`: rate of the edge from `x` in direction `k`.
    rates: Vec<T>,
    /// `p(x)`, the total jump rate (negated diagonal).
    diag: Vec<T>,
}

impl<T: Real> TorusOperator<T> {
    pub fn build(field: &ConductanceField<T>, kind: GeneratorKind) -> Self {
        let lattice = field.lattice().clone();
        let m = lattice.degree();
        let n = lattice.sites();
        let mut nbr = vec![0usize; n * m];
        let mut rates = vec![T::one(); n * m];
        nbr.par_chunks_mut(m).zip(rates.par_chunks_mut(m)).enumerate().for_each(|(x, (nb, r))| {
            for k in 0..m {
                nb[k] = lattice.step(x, k);
                if kind == GeneratorKind::Conductance {
                    r[k] = field.omega_dir(x, k);
                }
            }
        });
        let diag = rates.chunks(m).map(|r| r.iter().fold(T::zero(), |a, &b| a + b)).collect();
        Self { lattice, kind, nbr, rates, diag }
    }

    /// `L°`, which depends on the lattice only.
    pub fn simple(lattice: &Lattice) -> Self {
        let field = ConductanceField::constant(lattice.clone(), T::one()).expect("unit field is valid");
        Self::build(&field, GeneratorKind::Simple)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn sites(&self) -> usize {
        self.diag.len()
    }

    /// Total jump rate of `x`.
    #[inline]
    pub fn jump_rate(&self, x: usize) -> T {
        self.diag[x]
    }

    pub fn max_jump_rate(&self) -> T {
        self.diag.iter().copied().fold(T::zero(), T::max)
    }

    /// `(neighbour, rate)` for the 2d directions of `x`.
    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let m = self.lattice.degree();
        self.nbr[x * m..(x + 1) * m].iter().copied().zip(self.rates[x * m..(x + 1) * m].iter().copied())
    }

    #[inline]
    fn apply_at(&self, g: &[T], x: usize) -> T {
        let gx = g[x];
        self.row(x).fold(T::zero(), |acc, (y, r)| acc + r * (g[y] - gx))
    }

    /// `out = L g`.
    pub fn apply_into(&self, g: &[T], out: &mut [T]) {
        debug_assert_eq!(g.len(), self.sites());
        if self.sites() < PAR_THRESHOLD {
            for (x, o) in out.iter_mut().enumerate() {
                *o = self.apply_at(g, x);
            }
        } else {
            out.par_iter_mut().enumerate().for_each(|(x, o)| *o = self.apply_at(g, x));
        }
    }

    pub fn apply(&self, g: &FieldFunction<T>) -> FieldFunction<T> {
        let mut out = vec![T::zero(); self.sites()];
        self.apply_into(g.values(), &mut out);
        FieldFunction::new(out)
    }

    /// `out = (μ − L) g`.
    pub fn shifted_apply_into(&self, mu: T, g: &[T], out: &mut [T]) {
        let body = |x: usize| mu * g[x] - self.apply_at(g, x);
        if self.sites() < PAR_THRESHOLD {
            for (x, o) in out.iter_mut().enumerate() {
                *o = body(x);
            }
        } else {
            out.par_iter_mut().enumerate().for_each(|(x, o)| *o = body(x));
        }
    }

    /// Site-averaged Dirichlet form `(1/N) Σ_edges r_e (g(y) − g(x))²`.
    pub fn dirichlet_form(&self, g: &FieldFunction<T>) -> f64 {
        let v = g.values();
        let d = self.lattice.dim();
        // forward directions k = 2a visit every edge once
        det_sum(self.sites(), |x| {
            let m = 2 * d;
            let gx = v[x].to_f64_lossy();
            (0..d)
                .map(|a| {
                    let y = self.nbr[x * m + 2 * a];
                    let diff = v[y].to_f64_lossy() - gx;
                    self.rates[x * m + 2 * a].to_f64_lossy() * diff * diff
                })
                .sum::<f64>()
        }) / self.sites() as f64
    }

    /// Dense copy of `−L` in column-major order (symmetric, so also row-major).
    pub fn dense_negative(&self) -> Result<Vec<T>> {
        let n = self.sites();
        if n > super::DENSE_LIMIT {
            return Err(Error::TooLarge { sites: n, limit: super::DENSE_LIMIT });
        }
        let mut a = vec![T::zero(); n * n];
        for x in 0..n {
            a[x * n + x] = self.diag[x];
            for (y, r) in self.row(x) {
                a[x * n + y] = a[x * n + y] - r;
            }
        }
        Ok(a)
    }

    /// Coordinate-list export of `L`: one `row col value` line per nonzero, rows ascending.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# rcmlab-coo v1 sites={} kind={:?}", self.sites(), self.kind)?;
        for x in 0..self.sites() {
            let mut entries: Vec<(usize, f64)> = vec![(x, -self.diag[x].to_f64_lossy())];
            for (y, r) in self.row(x) {
                entries.push((y, r.to_f64_lossy()));
            }
            entries.sort_by_key(|e| e.0);
            for (y, v) in entries {
                writeln!(out, "{x} {y} {v:?}")?;
            }
        }
        Ok(())
    }
}

/// Generator of the given kind on `field`.
pub fn build_generator<T: Real>(field: &ConductanceField<T>, kind: GeneratorKind) -> TorusOperator<T> {
    TorusOperator::build(field, kind)
}

/// Site-averaged Dirichlet form of `g` under `op`.
pub fn dirichlet_form<T: Real>(op: &TorusOperator<T>, g: &FieldFunction<T>) -> f64 {
    op.dirichlet_form(g)
}
