use rand::Rng;
use rayon::prelude::*;

use super::{decay_fit, default_window, fit_detail, join, ExperimentReport, Status};
use crate::environment::{ConductanceField, ConductanceLaw, Lattice};
use crate::error::{Error, Result};
use crate::fit::PowerFit;
use crate::functionals::LocalFunctional;
use crate::num::Moments;
use crate::operators::{Decomposition, FieldFunction, GeneratorKind, TorusOperator, DENSE_LIMIT};
use crate::rng::{derive_seed, stream};
use crate::spectral::{Centering, DecayCurve, SpectralMeasure};
use crate::walker::{simulate, RateTable, WalkerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayPath {
    /// Exact spectral path when the torus fits the dense limit, else Monte Carlo.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayCentering {
    /// Subtract the declared `E[f]`. The torus zero mode then carries only the
    /// sampling fluctuation of the field, so no plateau appears in expectation.
    LawMean,
    /// Subtract the site average of `f(θ_x ω)` on each field.
    Empirical,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayTarget {
    pub alpha: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct DecayConfig {
    pub law: ConductanceLaw,
    pub d: usize,
    pub n: usize,
    pub functional: LocalFunctional,
    pub kind: WalkerKind,
    pub times: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub path: DecayPath,
    pub centering: DecayCentering,
    /// Walks per field on the Monte Carlo path.
    pub walks_per_field: usize,
    /// Fit window; defaults to the last decade of `times`.
    pub window: Option<(f64, f64)>,
    pub target: Option<DecayTarget>,
}

impl DecayConfig {
    pub fn new(law: ConductanceLaw, d: usize, n: usize, functional: LocalFunctional, kind: WalkerKind, times: Vec<f64>) -> Self {
        Self {
            law,
            d,
            n,
            functional,
            kind,
            times,
            realizations: 16,
            seed: 0,
            path: DecayPath::Auto,
            centering: DecayCentering::LawMean,
            walks_per_field: 0,
            window: None,
            target: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayResult {
    /// `E[(f_t)²]` with standard errors across fields (or pooled walks).
    pub curve: DecayCurve,
    pub fit: Option<PowerFit>,
    /// Whether the exact spectral path ran.
    pub exact: bool,
    pub zero_functional: bool,
    pub report: ExperimentReport,
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Parameter("no sampling times".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::Parameter(format!("sampling time {t} must be finite and ≥ 0")));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter("sampling times must be strictly increasing".into()));
    }
    Ok(())
}

fn kind_name(kind: WalkerKind) -> &'static str {
    match kind {
        WalkerKind::Conductance => "conductance",
        WalkerKind::Simple => "simple",
    }
}

/// Mean and standard error per time: across field means with ≥ 10 fields, pooled otherwise.
pub(crate) fn aggregate(per_field: &[Vec<Moments>]) -> (Vec<f64>, Vec<f64>) {
    let nt = per_field.first().map_or(0, Vec::len);
    (0..nt)
        .map(|i| {
            let m = if per_field.len() >= 10 {
                per_field.iter().map(|f| f[i].mean).collect::<Moments>()
            } else {
                Moments::merge_all(&per_field.iter().map(|f| f[i]).collect::<Vec<_>>())
            };
            (m.mean, m.stderr())
        })
        .unzip()
}

fn centered(g: FieldFunction<f64>, centering: DecayCentering, mean: f64) -> FieldFunction<f64> {
    match centering {
        DecayCentering::LawMean => g.shifted(-mean),
        DecayCentering::Empirical => g.centered(),
        DecayCentering::None => g,
    }
}

/// `E[(f_t)²]` for `f_t = e^{tL} f` (`L` the simple or conductance generator), with a fitted decay exponent.
pub fn variance_decay_experiment(config: &DecayConfig) -> Result<DecayResult> {
    let c = config;
    c.law.validate()?;
    let lattice = Lattice::new(c.d, c.n)?;
    c.functional.check_fits(&lattice, 0)?;
    validate_times(&c.times)?;
    if c.realizations < 2 {
        return Err(Error::Parameter("need at least 2 field realizations".into()));
    }
    let mean = c.functional.mean_hint();
    match (c.centering, mean) {
        (DecayCentering::None, Some(m)) if m.abs() <= 1e-12 => {}
        (DecayCentering::None, _) => {
            return Err(Error::Config(format!(
                "functional '{}' has nonzero or undeclared mean, so 𝒩 diverges; choose a centering",
                c.functional.name()
            )))
        }
        (DecayCentering::LawMean, None) => {
            return Err(Error::Config(format!("functional '{}' declares no mean; use empirical centering", c.functional.name())))
        }
        _ => {}
    }
    let mean = mean.unwrap_or(0.0);
    let exact = match c.path {
        DecayPath::Exact if lattice.sites() > DENSE_LIMIT => {
            return Err(Error::TooLarge { sites: lattice.sites(), limit: DENSE_LIMIT })
        }
        DecayPath::Exact => true,
        DecayPath::MonteCarlo => false,
        DecayPath::Auto => lattice.sites() <= DENSE_LIMIT,
    };
    if !exact && c.walks_per_field == 0 {
        return Err(Error::Config("the Monte Carlo path needs a positive walk count".into()));
    }

    let mut report = ExperimentReport::new("decay");
    report.echo("law", c.law);
    report.echo("d", c.d);
    report.echo("n", c.n);
    report.echo("functional", c.functional.name());
    report.echo("walker", kind_name(c.kind));
    report.echo("times", join(&c.times));
    report.echo("realizations", c.realizations);
    report.echo("seed", c.seed);
    report.echo("path", if exact { "exact" } else { "mc" });
    report.echo("centering", format!("{:?}", c.centering).to_lowercase());
    if !exact {
        report.echo("walks", c.walks_per_field);
    }
    if let Some((lo, hi)) = c.window {
        report.echo("window", format!("{lo},{hi}"));
    }

    let per_field: Vec<Vec<Moments>> = if exact {
        let simple = match c.kind {
            WalkerKind::Simple => Some(Decomposition::new(&TorusOperator::<f64>::simple(&lattice))?),
            WalkerKind::Conductance => None,
        };
        (0..c.realizations as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<Moments>> {
                let field = ConductanceField::<f64>::sample_realization(&c.law, &lattice, c.seed, r)?;
                let g = centered(c.functional.evaluate_all(&field)?, c.centering, mean);
                let own;
                let dec = match &simple {
                    Some(dec) => dec,
                    None => {
                        own = Decomposition::new(&TorusOperator::build(&field, GeneratorKind::Conductance))?;
                        &own
                    }
                };
                let m = SpectralMeasure::from_decomposition(dec, &g, Centering::Raw)?;
                Ok(c.times.iter().map(|&t| std::iter::once(m.variance(t)).collect()).collect())
            })
            .collect::<Result<_>>()?
    } else {
        // E[(f_t)²] = E[f(ω(0)) f(ω(2t))] for the environment seen from a walker started uniformly
        let horizon = (2.0 * c.times[c.times.len() - 1]).max(f64::MIN_POSITIVE);
        let walk_seed = derive_seed(c.seed, "decay-walks");
        (0..c.realizations as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<Moments>> {
                let field = ConductanceField::<f64>::sample_realization(&c.law, &lattice, c.seed, r)?;
                let g = centered(c.functional.evaluate_all(&field)?, c.centering, mean);
                let table = match c.kind {
                    WalkerKind::Conductance => RateTable::from_field(&field),
                    WalkerKind::Simple => RateTable::simple(&lattice),
                };
                let mut stats = vec![Moments::default(); c.times.len()];
                for w in 0..c.walks_per_field as u64 {
                    let mut rng = stream(walk_seed, r, w);
                    let start = rng.random_range(0..lattice.sites());
                    let traj = simulate(&table, start, horizon, &mut rng)?;
                    let g0 = g.values()[start];
                    for (s, &t) in stats.iter_mut().zip(&c.times) {
                        s.push(g0 * g.values()[traj.site_at(2.0 * t)?]);
                    }
                }
                Ok(stats)
            })
            .collect::<Result<_>>()?
    };

    let (values, stderr) = aggregate(&per_field);
    let curve = DecayCurve { times: c.times.clone(), values, stderr: Some(stderr) };
    let zero_functional = curve.values.iter().all(|v| v.abs() <= 1e-30);

    let mut fit = None;
    if zero_functional {
        report.note("zero functional: E[(f_t)²] vanishes identically, no exponent to fit");
        if c.target.is_some() {
            report.target("decay exponent", Status::Pass, "zero functional");
        }
    } else {
        match decay_fit(&curve, c.window) {
            Ok(f) => {
                if !f.is_power_law() {
                    report.note(format!("fit residual {:.3} exceeds the power-law threshold", f.residual));
                }
                if let Some(t) = c.target {
                    report.check(
                        "decay exponent",
                        (f.alpha() - t.alpha).abs() <= t.tolerance,
                        format!("{}; target {} ± {}", fit_detail(&f), t.alpha, t.tolerance),
                    );
                } else {
                    report.note(fit_detail(&f));
                }
                fit = Some(f);
            }
            Err(e) => {
                let (lo, hi) = c.window.unwrap_or_else(|| default_window(&c.times));
                let msg = format!("no fit on [{lo}, {hi}]: {e}");
                if c.target.is_some() {
                    report.check("decay exponent", false, msg);
                } else {
                    report.note(msg);
                }
            }
        }
    }
    Ok(DecayResult { curve, fit, exact, zero_functional, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::geometric_grid;
    use crate::functionals::{centered_edge, functional_by_name, local_drift};

    fn twopoint() -> ConductanceLaw {
        ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 }
    }

    #[test]
    fn constant_field_drift_is_zero() {
        let law = ConductanceLaw::Constant(1.0);
        let cfg = DecayConfig::new(law, 1, 16, local_drift(1, &law), WalkerKind::Conductance, vec![0.0, 1.0, 2.0]);
        let out = variance_decay_experiment(&cfg).unwrap();
        assert!(out.zero_functional);
        assert!(out.report.passed());
    }

    #[test]
    fn uncentered_functional_is_rejected() {
        let law = twopoint();
        let f = functional_by_name("poly:w(0;0)", 1, &law).unwrap();
        let mut cfg = DecayConfig::new(law, 1, 16, f, WalkerKind::Simple, vec![1.0, 2.0]);
        cfg.centering = DecayCentering::None;
        assert!(matches!(variance_decay_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn simple_walk_edge_matches_heat_kernel() {
        // E[(f°_t)²] = Var(ω) · Σ_y p_t(y)² = Var(ω) · p_{2t}(0) on the torus
        let law = twopoint();
        let n = 12;
        let times = vec![0.0, 0.5, 1.0, 3.0];
        let mut cfg = DecayConfig::new(law, 1, n, centered_edge(1, &law), WalkerKind::Simple, times.clone());
        cfg.realizations = 400;
        let out = variance_decay_experiment(&cfg).unwrap();
        let var = law.variance().unwrap();
        for (i, &t) in times.iter().enumerate() {
            let p2t: f64 = (0..n)
                .map(|k| (-2.0 * t * 2.0 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())).exp())
                .sum::<f64>()
                / n as f64;
            let se = out.curve.stderr.as_ref().unwrap()[i];
            assert!((out.curve.values[i] - var * p2t).abs() < 4.0 * se + 1e-9, "t={t}: {} vs {}", out.curve.values[i], var * p2t);
        }
    }

    #[test]
    fn exact_and_mc_paths_agree() {
        let law = twopoint();
        let times = vec![0.25, 0.5, 1.0, 2.0];
        let mut cfg = DecayConfig::new(law, 1, 10, local_drift(1, &law), WalkerKind::Conductance, times);
        cfg.realizations = 24;
        cfg.centering = DecayCentering::Empirical;
        let exact = variance_decay_experiment(&cfg).unwrap();
        cfg.path = DecayPath::MonteCarlo;
        cfg.walks_per_field = 4000;
        let mc = variance_decay_experiment(&cfg).unwrap();
        assert!(exact.exact && !mc.exact);
        for i in 0..4 {
            let se = (mc.curve.stderr.as_ref().unwrap()[i].powi(2) + exact.curve.stderr.as_ref().unwrap()[i].powi(2)).sqrt();
            // both estimate field averages over the same fields; the difference is walk noise
            assert!((exact.curve.values[i] - mc.curve.values[i]).abs() < 3.0 * se, "i={i}");
        }
    }

    #[test]
    fn curve_is_nonincreasing() {
        let law = twopoint();
        let mut cfg =
            DecayConfig::new(law, 2, 6, centered_edge(2, &law), WalkerKind::Conductance, geometric_grid(0.1, 10.0, 8));
        cfg.realizations = 3;
        let out = variance_decay_experiment(&cfg).unwrap();
        assert!(out.curve.values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn reproducible() {
        let law = twopoint();
        let mut cfg = DecayConfig::new(law, 1, 8, centered_edge(1, &law), WalkerKind::Conductance, vec![0.5, 1.0]);
        cfg.path = DecayPath::MonteCarlo;
        cfg.walks_per_field = 50;
        cfg.realizations = 3;
        let a = variance_decay_experiment(&cfg).unwrap();
        let b = variance_decay_experiment(&cfg).unwrap();
        assert_eq!(a.curve, b.curve);
    }
}
