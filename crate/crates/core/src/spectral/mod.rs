//! Projected spectral measures of `−L` and the quantities integrated against them.

mod aest;
mod measure;

pub use aest::{a_estimators, AEstimators};
pub use measure::{psi_alpha, spectral_measure, Centering, DecayCurve, SpectralMeasure, NONERGODIC_WEIGHT};

/// Suprema entering the decay/tail equivalence, over `t, 1/δ ∈ {2⁰, …, 2²⁰}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TclSuprema {
    /// `sup_t t^α · variance(t)`.
    pub variance: f64,
    /// `sup_δ δ^{1−α} · tail(δ)`.
    pub tail: f64,
}

/// Grid suprema for the equivalence between variance decay and the spectral tail.
pub fn tcl_suprema(m: &SpectralMeasure, alpha: f64) -> crate::Result<TclSuprema> {
    let mut variance: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for k in 0..=20 {
        let t = 2f64.powi(k);
        variance = variance.max(t.powf(alpha) * m.variance(t));
        let delta = 1.0 / t;
        tail = tail.max(delta.powf(1.0 - alpha) * m.spectral_tail(delta)?);
    }
    Ok(TclSuprema { variance, tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ConductanceField, ConductanceLaw, Lattice};
    use crate::functionals::local_drift;
    use crate::operators::{resolvent_solve, FieldFunction, GeneratorKind, TorusOperator};
    use crate::Error;

    fn unit() -> SpectralMeasure {
        SpectralMeasure::new(vec![(1.0, 1.0)]).unwrap()
    }

    #[test]
    fn single_atom_formulas() {
        let m = unit();
        assert_eq!(m.variance(0.0), 1.0);
        assert!((m.variance(1.0) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(m.spectral_tail(0.5).unwrap(), 0.0);
        assert_eq!(m.spectral_tail(2.0).unwrap(), 1.0);
        assert_eq!(m.sigma_squared().unwrap(), 2.0);
        assert!((m.xi_variance(1e-6).unwrap() - 2.0).abs() < 1e-4);
        assert!((m.xi_variance(1e3).unwrap() - 0.002).abs() < 1e-12);
        assert!((m.xi_variance(2.0).unwrap() - (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert_eq!(m.zt_variance(0.0).unwrap(), 0.0);
        assert!((m.zt_variance(1.0).unwrap() - 2.0 * (-1f64).exp()).abs() < 1e-15);
        assert!((m.i_k_mu(2.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((m.i_k_mu(0.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((m.resolvent_second_moment(1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((m.resolvent_second_moment(1e4).unwrap() * 1e8 - 1.0).abs() < 1e-3);
        let z = SpectralMeasure::zero();
        assert_eq!(z.sigma_squared().unwrap(), 0.0);
        assert_eq!(z.resolvent_second_moment(0.3).unwrap(), 0.0);
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi_alpha(3.0, 10.0).unwrap(), 10.0);
        let e2 = std::f64::consts::E.powi(2);
        assert!((psi_alpha(2.0, e2).unwrap() - e2 / 2.0).abs() < 1e-12);
        assert!((psi_alpha(1.5, 100.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(psi_alpha(1.0, 2.0).is_err());
    }

    #[test]
    fn nonergodic_mass_rejected() {
        let m = SpectralMeasure::new(vec![(0.0, 0.5), (1.0, 1.0)]).unwrap();
        assert!(matches!(m.sigma_squared(), Err(Error::Nonergodic { .. })));
        assert!(m.zt_variance(1.0).is_ok());
        let tiny = SpectralMeasure::new(vec![(0.0, 1e-20), (1.0, 1.0)]).unwrap();
        assert_eq!(tiny.sigma_squared().unwrap(), 2.0);
    }

    #[test]
    fn synthetic_tail_alpha_two() {
        let m = SpectralMeasure::synthetic(2.0).unwrap();
        for delta in [1e-3, 1e-2, 0.1, 0.5] {
            let tail = m.spectral_tail(delta).unwrap();
            // cell granularity is about 0.14% in λ
            assert!((tail - delta).abs() < 3e-3 * delta + 2e-6, "{delta}: {tail}");
        }
    }

    #[test]
    fn ring_measure() {
        let op = TorusOperator::<f64>::simple(&Lattice::new(1, 3).unwrap());
        let g = FieldFunction::new(vec![1.0, -0.5, -0.5]);
        let m = spectral_measure(&op, &g, Centering::Center).unwrap().pruned(1e-20).coalesce(1e-9);
        assert_eq!(m.atoms().len(), 1);
        assert!((m.atoms()[0].0 - 3.0).abs() < 1e-12 && (m.atoms()[0].1 - 0.5).abs() < 1e-12);
        assert!((m.variance(0.4) - 0.5 * (-2.4f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn drift_on_constant_field_is_zero_measure() {
        let l = Lattice::new(2, 4).unwrap();
        let f = ConductanceField::constant(l, 1.0f64).unwrap();
        let drift = local_drift(2, &ConductanceLaw::Constant(1.0)).evaluate_all(&f).unwrap();
        let op = TorusOperator::build(&f, GeneratorKind::Conductance);
        let m = spectral_measure(&op, &drift, Centering::Center).unwrap();
        assert!(m.atoms().iter().all(|a| a.1 < 1e-20));
    }

    #[test]
    fn a_estimators_degenerate_and_chain() {
        let l = Lattice::new(2, 6).unwrap();
        let c = ConductanceField::constant(l.clone(), 1.0f64).unwrap();
        let a = a_estimators(&c, &FieldFunction::zeros(36), None).unwrap();
        assert_eq!((a.a0, a.a1, a.a2), (1.0, 1.0, 1.0));

        let law = ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 };
        let f = ConductanceField::<f64>::sample_realization(&law, &l, 8, 0).unwrap();
        let a = a_estimators(&f, &FieldFunction::zeros(36), None).unwrap();
        assert!((a.a0 - a.a1).abs() < 1e-14 && (a.a0 - a.a2).abs() < 1e-14);

        let op = TorusOperator::build(&f, GeneratorKind::Conductance);
        let drift = local_drift(2, &law).evaluate_all(&f).unwrap();
        for mu in [1.0, 0.1, 0.01, 0.001] {
            let phi = resolvent_solve(&op, &drift, mu).unwrap();
            let a = a_estimators(&f, &phi, Some(mu)).unwrap();
            assert!(a.chain_residual.unwrap() < 1e-8, "μ={mu}: {a:?}");
            assert!(a.a2 <= a.a1 && a.a1 <= a.a0);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let m = SpectralMeasure::power_law(2.5, 50, 1e-3, 1.0).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(SpectralMeasure::read_csv(&buf[..]).unwrap(), m);
        assert!(SpectralMeasure::read_csv("lambda,weight\n1,2,3\n".as_bytes()).is_err());
        assert!(SpectralMeasure::read_csv("-1,2\n".as_bytes()).is_err());
    }
}
