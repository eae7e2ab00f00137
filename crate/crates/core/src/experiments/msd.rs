use rayon::prelude::*;

use super::diffusivity::{diffusivity_experiment, validate_mu_list, DiffusivityConfig, DiffusivityResult, OrderTarget};
use super::{join, ExperimentReport};
use crate::environment::{ConductanceField, ConductanceLaw, EdgeOffset, Lattice};
use crate::error::{Error, Result};
use crate::functionals::{LocalFunctional, Polynomial};
use crate::num::Moments;
use crate::operators::{Decomposition, GeneratorKind, TorusOperator, DENSE_LIMIT};
use crate::spectral::{Centering, SpectralMeasure};
use crate::walker::{msd_estimate, EnsembleConfig, StartRule, WalkerKind};

#[derive(Clone, Debug, PartialEq)]
pub struct MsdConfig {
    pub law: ConductanceLaw,
    pub d: usize,
    pub n: usize,
    /// Strictly increasing sampling times; the last one is the horizon.
    pub times: Vec<f64>,
    pub realizations: usize,
    pub walks_per_field: usize,
    pub seed: u64,
    /// μ sweep of the diffusivity run that supplies `σ̄²` on the same fields.
    pub mu_list: Vec<f64>,
    /// Also compute the exact per-field gap from spectral measures (dense, one decomposition per field).
    pub predict: bool,
}

impl MsdConfig {
    pub fn new(law: ConductanceLaw, d: usize, n: usize) -> Self {
        Self {
            law,
            d,
            n,
            times: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            realizations: 16,
            walks_per_field: 2000,
            seed: 0,
            mu_list: super::default_mu_list(n),
            predict: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MsdResult {
    pub times: Vec<f64>,
    pub msd_over_t: Vec<f64>,
    pub msd_stderr: Vec<f64>,
    /// Ensemble `σ̄²` and its standard error.
    pub sigma_sq: (f64, f64),
    /// `MSD/t − d·σ̄²`, paired field by field.
    pub gap: Vec<f64>,
    pub gap_stderr: Vec<f64>,
    /// Exact `E[‖X_t‖²]/t − d·σ̄²` averaged over the same fields.
    pub predicted_gap: Option<Vec<f64>>,
    pub diffusivity: DiffusivityResult,
    pub report: ExperimentReport,
}

impl MsdResult {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,msd_over_t,msd_stderr,gap,gap_stderr,predicted_gap")?;
        for i in 0..self.times.len() {
            let pred = self.predicted_gap.as_ref().map_or(String::new(), |p| format!("{:?}", p[i]));
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{pred}",
                self.times[i], self.msd_over_t[i], self.msd_stderr[i], self.gap[i], self.gap_stderr[i]
            )?;
        }
        Ok(())
    }
}

fn axis_drift(d: usize, axis: usize, law: &ConductanceLaw) -> LocalFunctional {
    let p = Polynomial::constant(d, 0.0)
        .with_term(1.0, &[(EdgeOffset::unit(d, axis, true), 1)])
        .with_term(-1.0, &[(EdgeOffset::unit(d, axis, false), 1)]);
    LocalFunctional::polynomial(format!("drift{axis}"), p, law)
}

/// `E[‖X_t‖²]/t = Σ_a (2 m_a − σ²(𝔡_a) + ξ_{𝔡_a}(t))` for a walk started uniformly on one field.
fn predicted_msd(field: &ConductanceField<f64>, law: &ConductanceLaw, times: &[f64]) -> Result<Vec<f64>> {
    let l = field.lattice();
    let dec = Decomposition::new(&TorusOperator::build(field, GeneratorKind::Conductance))?;
    let mut out = vec![0.0; times.len()];
    for a in 0..l.dim() {
        let g = axis_drift(l.dim(), a, law).evaluate_all(field)?;
        let m = SpectralMeasure::from_decomposition(&dec, &g, Centering::Raw)?;
        let mean_a = (0..l.sites()).map(|x| field.omega(l.edge(x, a))).sum::<f64>() / l.sites() as f64;
        let base = 2.0 * mean_a - m.sigma_squared()?;
        for (o, &t) in out.iter_mut().zip(times) {
            *o += base + m.xi_variance(t)?;
        }
    }
    Ok(out)
}

/// Mean and standard error of paired per-field differences, or a quadrature bound with few fields.
fn paired(per_field: impl Iterator<Item = f64>, fallback_se: f64, fields: usize) -> (f64, f64) {
    let m: Moments = per_field.collect();
    (m.mean, if fields >= 10 { m.stderr() } else { fallback_se })
}

/// `MSD/t − d·σ̄²` for walks started from the stationary law, with `σ̄²` from the diffusivity pipeline on the same fields.
pub fn msd_experiment(config: &MsdConfig) -> Result<MsdResult> {
    let c = config;
    c.law.validate()?;
    if !c.law.is_bounded() {
        return Err(Error::Config(format!("the MSD gap needs a bounded law, got {}", c.law)));
    }
    let lattice = Lattice::new(c.d, c.n)?;
    validate_mu_list(&c.mu_list)?;
    if c.realizations < 2 || c.walks_per_field == 0 {
        return Err(Error::Parameter("need ≥ 2 fields and ≥ 1 walk per field".into()));
    }
    if c.predict && lattice.sites() > DENSE_LIMIT {
        return Err(Error::TooLarge { sites: lattice.sites(), limit: DENSE_LIMIT });
    }
    let ensemble = EnsembleConfig {
        law: c.law,
        lattice: lattice.clone(),
        kind: WalkerKind::Conductance,
        realizations: c.realizations,
        walks_per_field: c.walks_per_field,
        horizon: c.times.last().copied().unwrap_or(0.0),
        times: c.times.clone(),
        seed: c.seed,
        start: StartRule::Uniform,
    };
    ensemble.validate()?;

    let mut report = ExperimentReport::new("msd");
    report.echo("law", c.law);
    report.echo("d", c.d);
    report.echo("n", c.n);
    report.echo("times", join(&c.times));
    report.echo("realizations", c.realizations);
    report.echo("walks", c.walks_per_field);
    report.echo("seed", c.seed);
    report.echo("mu", join(&c.mu_list));
    report.echo("predict", c.predict);

    // both stages sample realization r from the same seed, so they see the same fields
    let mut dcfg = DiffusivityConfig::new(c.law, c.d, c.n);
    dcfg.mu_list = c.mu_list.clone();
    dcfg.realizations = c.realizations;
    dcfg.seed = c.seed;
    dcfg.target = OrderTarget::None;
    let diffusivity = diffusivity_experiment(&dcfg)?;
    let sigma_i = diffusivity.sigma_sq_per_field();
    let sigma_m: Moments = sigma_i.iter().copied().collect();
    let sigma_sq = (sigma_m.mean, sigma_m.stderr());

    let msd = msd_estimate(&ensemble)?;
    let df = c.d as f64;
    let nt = c.times.len();
    let (gap, gap_stderr): (Vec<f64>, Vec<f64>) = (0..nt)
        .map(|k| {
            let fallback = (msd.stderr[k].powi(2) + (df * sigma_sq.1).powi(2)).sqrt();
            paired(msd.per_field.iter().zip(&sigma_i).map(|(f, s)| f[k] - df * s), fallback, c.realizations)
        })
        .unzip();

    let predicted_gap = if c.predict {
        let per: Vec<Vec<f64>> = (0..c.realizations as u64)
            .into_par_iter()
            .map(|r| {
                let field = ConductanceField::<f64>::sample_realization(&c.law, &lattice, c.seed, r)?;
                predicted_msd(&field, &c.law, &c.times)
            })
            .collect::<Result<_>>()?;
        Some(
            (0..nt)
                .map(|k| per.iter().zip(&sigma_i).map(|(p, s)| p[k] - df * s).sum::<f64>() / c.realizations as f64)
                .collect::<Vec<f64>>(),
        )
    } else {
        None
    };

    let worst = (0..nt).map(|k| gap[k] / gap_stderr[k].max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min);
    report.check(
        "gap nonnegative",
        (0..nt).all(|k| gap[k] >= -3.0 * gap_stderr[k]),
        format!("min gap/stderr = {worst:.2} over {nt} times (bound −3)"),
    );
    report.note(format!("σ̄² = {:.6} ± {:.2e} from A₂ at μ = {:e}", sigma_sq.0, sigma_sq.1, c.mu_list[c.mu_list.len() - 1]));

    if c.law.variance() == Some(0.0) {
        let c0 = c.law.mean();
        let ok = (0..nt).all(|k| (msd.msd_over_t[k] - 2.0 * df * c0).abs() <= 3.0 * msd.stderr[k]);
        report.check("constant baseline", ok, format!("MSD/t = 2d·ω = {} within 3 standard errors", 2.0 * df * c0));
    } else if nt >= 2 {
        let (mid, last) = ((nt - 1) / 2, nt - 1);
        let fallback = (gap_stderr[mid].powi(2) + gap_stderr[last].powi(2)).sqrt();
        let (drop, se) = paired(
            msd.per_field.iter().map(|f| f[mid] - f[last]),
            fallback,
            c.realizations,
        );
        report.check(
            "gap decreasing",
            drop > 2.0 * se,
            format!(
                "gap({}) − gap({}) = {drop:.4e} ± {se:.2e} (need > 2 standard errors)",
                c.times[mid], c.times[last]
            ),
        );
    }
    if let Some(p) = &predicted_gap {
        let dev = (0..nt).map(|k| (gap[k] - p[k]).abs() / gap_stderr[k].max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        report.note(format!("largest |gap − exact prediction| = {dev:.2} standard errors"));
    }

    Ok(MsdResult {
        times: c.times.clone(),
        msd_over_t: msd.msd_over_t,
        msd_stderr: msd.stderr,
        sigma_sq,
        gap,
        gap_stderr,
        predicted_gap,
        diffusivity,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbounded_law_rejected() {
        let cfg = MsdConfig::new(ConductanceLaw::pareto(0.3, 0.1, f64::INFINITY), 2, 8);
        assert!(matches!(msd_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn constant_field_baseline() {
        let mut cfg = MsdConfig::new(ConductanceLaw::Constant(1.0), 2, 8);
        cfg.realizations = 10;
        cfg.walks_per_field = 200;
        cfg.times = vec![0.5, 1.0, 2.0, 4.0];
        let out = msd_experiment(&cfg).unwrap();
        assert!((out.sigma_sq.0 - 2.0).abs() < 1e-12);
        assert!(out.report.passed(), "{}", out.report.summary());
    }

    #[test]
    fn gap_matches_exact_prediction() {
        let law = ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 };
        let mut cfg = MsdConfig::new(law, 2, 6);
        cfg.realizations = 12;
        cfg.walks_per_field = 1500;
        cfg.times = vec![0.25, 1.0, 4.0];
        cfg.mu_list = vec![1.0, 0.1, 1e-3, 1e-5];
        cfg.predict = true;
        let out = msd_experiment(&cfg).unwrap();
        let p = out.predicted_gap.as_ref().unwrap();
        for k in 0..3 {
            assert!((out.gap[k] - p[k]).abs() < 4.0 * out.gap_stderr[k], "t={}: {} vs {}", out.times[k], out.gap[k], p[k]);
            assert!(p[k] > 0.0);
        }
        assert!(p.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn prediction_short_time_limit() {
        // ξ(t) → σ² as t → 0, so E[‖X_t‖²]/t → 2 Σ_a m_a
        let law = ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 };
        let field = ConductanceField::<f64>::sample_realization(&law, &Lattice::new(2, 5).unwrap(), 3, 0).unwrap();
        let p = predicted_msd(&field, &law, &[1e-9]).unwrap()[0];
        assert!((p - 2.0 * 2.0 * field.mean()).abs() < 1e-6);
    }
}
