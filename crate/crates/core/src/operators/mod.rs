//! Generators, semigroups, resolvents and Dirichlet forms on a fixed field.

mod boxgap;
mod eigen;
pub(crate) mod function;
mod generator;
mod resolvent;
mod semigroup;

use std::io::Write;

pub use boxgap::{box_spectral_gap, BoxGap};
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use function::FieldFunction;
pub use generator::{build_generator, dirichlet_form, GeneratorKind, TorusOperator};
pub use resolvent::{resolvent_solve, resolvent_solve_with, SolveReport, SolverOptions};
pub use semigroup::{
    semigroup_apply, semigroup_apply_with, Decomposition, SemigroupBackend, POISSON_TAIL, ZERO_EIGENVALUE,
};



use crate::error::Result;
use crate::num::Real;

/// Largest site count handled by dense decompositions.
pub const DENSE_LIMIT: usize = 4096;

/// Spectrum of `−L` as CSV: `index,eigenvalue`.
pub fn write_spectrum_csv<T: Real, W: Write>(eigenvalues: &[T], mut out: W) -> Result<()> {
    writeln!(out, "index,eigenvalue")?;
    for (i, l) in eigenvalues.iter().enumerate() {
        writeln!(out, "{i},{:?}", l.to_f64_lossy())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ConductanceField, ConductanceLaw, Lattice};

    fn ring_const(n: usize) -> TorusOperator<f64> {
        TorusOperator::simple(&Lattice::new(1, n).unwrap())
    }

    fn random_op(d: usize, n: usize, seed: u64) -> TorusOperator<f64> {
        let law = ConductanceLaw::Uniform { lo: 1.0, hi: 5.0 };
        let f = ConductanceField::sample_realization(&law, &Lattice::new(d, n).unwrap(), seed, 0).unwrap();
        TorusOperator::build(&f, GeneratorKind::Conductance)
    }

    #[test]
    fn ring_spectra() {
        let dec = Decomposition::new(&ring_const(3)).unwrap();
        let ev = dec.eigenvalues();
        assert_eq!(ev[0], 0.0);
        assert!((ev[1] - 3.0).abs() < 1e-12 && (ev[2] - 3.0).abs() < 1e-12);
        let dec = Decomposition::new(&ring_const(4)).unwrap();
        for (got, want) in dec.eigenvalues().iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_sum_to_zero_and_symmetric() {
        let op = random_op(2, 5, 1);
        let a = op.dense_negative().unwrap();
        let n = op.sites();
        for x in 0..n {
            let s: f64 = (0..n).map(|y| a[x * n + y]).sum();
            assert!(s.abs() <= 1e-12 * op.jump_rate(x));
            for y in 0..n {
                assert_eq!(a[x * n + y], a[y * n + x]);
            }
        }
    }

    #[test]
    fn eigenvector_semigroup_and_resolvent() {
        let op = ring_const(3);
        let g = FieldFunction::new(vec![1.0, -0.5, -0.5]);
        for backend in [SemigroupBackend::Dense, SemigroupBackend::Uniformization] {
            let out = semigroup_apply_with(&op, &g, 0.7, backend).unwrap();
            let want = g.scaled((-2.1f64).exp());
            assert!(out.max_abs_diff(&want) < 1e-11, "{backend:?}");
        }
        let u = resolvent_solve(&op, &g, 1.0).unwrap();
        assert!(u.max_abs_diff(&g.scaled(0.25)) < 1e-12);
        let c = FieldFunction::constant(3, 2.0);
        assert!(resolvent_solve(&op, &c, 0.5).unwrap().max_abs_diff(&c.scaled(2.0)) < 1e-12);
        let z = FieldFunction::zeros(3);
        assert_eq!(resolvent_solve(&op, &z, 0.5).unwrap(), z);
        assert!(semigroup_apply(&op, &g, -1.0).is_err());
        assert!(resolvent_solve(&op, &g, 0.0).is_err());
    }

    #[test]
    fn backends_agree_and_preserve_mean() {
        let op = random_op(2, 6, 3);
        let g = FieldFunction::from_fn(36, |x| ((x * 7) % 11) as f64);
        let a = semigroup_apply_with(&op, &g, 0.9, SemigroupBackend::Dense).unwrap();
        let b = semigroup_apply_with(&op, &g, 0.9, SemigroupBackend::Uniformization).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
        assert!((a.mean() - g.mean()).abs() < 1e-12);
        assert!((b.mean() - g.mean()).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_direct_sum() {
        let op = ring_const(3);
        let g = FieldFunction::new(vec![1.0, 0.0, 0.0]);
        // edges (0,1), (1,2), (2,0): differences 1, 0, 1
        assert!((dirichlet_form(&op, &g) - 2.0 / 3.0).abs() < 1e-15);
        let op = random_op(2, 4, 9);
        let g = FieldFunction::from_fn(16, |x| (x as f64).sin());
        let lg = op.apply(&g);
        assert!((dirichlet_form(&op, &g) + g.inner(&lg)).abs() < 1e-12);
    }

    #[test]
    fn f32_operator_runs() {
        let law = ConductanceLaw::Uniform { lo: 1.0, hi: 2.0 };
        let f: ConductanceField<f32> = ConductanceField::sample_realization(&law, &Lattice::new(1, 16).unwrap(), 4, 0).unwrap();
        let op = TorusOperator::build(&f, GeneratorKind::Conductance);
        let g = FieldFunction::from_fn(16, |x| if x < 8 { 1.0f32 } else { -1.0 });
        let u = resolvent_solve(&op, &g, 0.5).unwrap();
        let back = op.apply(&u);
        let resid = u.scaled(0.5).values().iter().zip(back.values()).zip(g.values()).map(|((a, b), c)| (a - b - c).abs()).fold(0.0f32, f32::max);
        assert!(resid < 1e-4);
    }

    #[test]
    fn coo_export_lists_nonzeros() {
        let op = ring_const(3);
        let mut buf = Vec::new();
        op.write_coo(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 1 + 9);
        assert!(s.contains("\n0 0 -2.0\n0 1 1.0\n"));
    }
}
