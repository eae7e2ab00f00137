//! Desk-scale experiments: decay exponents, diffusivity convergence, MSD gap,
//! non-contractivity and the box Nash chain. Every run returns a typed result and
//! an [`ExperimentReport`] that echoes its configuration and lists pass/fail lines.

mod contract;
mod decay;
mod diffusivity;
mod msd;
mod nash;

use std::fmt::{self, Write as _};
use std::io::Write;

pub use contract::{
    contract_formula, contractivity_experiment, AnalogueConfig, ContractConfig, ContractResult, ContractVerdict,
};
pub use decay::{
    variance_decay_experiment, DecayCentering, DecayConfig, DecayPath, DecayResult, DecayTarget,
};
pub use diffusivity::{
    default_mu_list, diffusivity_experiment, order_target, DiffusivityConfig, DiffusivityResult, DiffusivityRow,
    OrderTarget,
};
pub use msd::{msd_experiment, MsdConfig, MsdResult};
pub use nash::{nash_chain_check, NashConfig, NashResult, NashRow};

use crate::error::Result;
use crate::fit::PowerFit;
use crate::spectral::DecayCurve;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported but not counted as a failure.
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One declared target and its outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetLine {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Ordered `key = value` echo; enough to rerun the experiment bit for bit.
    pub config: Vec<(String, String)>,
    pub targets: Vec<TargetLine>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), ..Self::default() }
    }

    pub fn echo(&mut self, key: &str, value: impl fmt::Display) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn target(&mut self, name: impl Into<String>, status: Status, detail: impl Into<String>) {
        self.targets.push(TargetLine { name: name.into(), status, detail: detail.into() });
    }

    pub fn check(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.target(name, if ok { Status::Pass } else { Status::Fail }, detail);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// No declared target failed.
    pub fn passed(&self) -> bool {
        self.targets.iter().all(|t| t.status != Status::Fail)
    }

    /// The echo as `key=value` lines, the same format the CLI reads.
    pub fn config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!("experiment: {}\n", self.experiment);
        for (k, v) in &self.config {
            let _ = writeln!(s, "  {k} = {v}");
        }
        for t in &self.targets {
            let _ = writeln!(s, "[{}] {}: {}", t.status, t.name, t.detail);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.summary().as_bytes())?;
        Ok(())
    }
}

/// Fit over samples with `lo ≤ t ≤ hi`; the default window is the last decade of sampled times.
pub fn decay_fit(curve: &DecayCurve, window: Option<(f64, f64)>) -> Result<PowerFit> {
    let (lo, hi) = window.unwrap_or_else(|| default_window(&curve.times));
    curve.fit(lo, hi)
}

pub(crate) fn default_window(times: &[f64]) -> (f64, f64) {
    let hi = times.iter().copied().fold(0.0, f64::max);
    (hi / 10.0, hi)
}

pub(crate) fn fit_detail(fit: &PowerFit) -> String {
    let (lo, hi) = fit.alpha_ci();
    format!(
        "α̂ = {:.4} (95% CI [{lo:.4}, {hi:.4}]), window [{:.4}, {:.4}], {} points, rms residual {:.4}",
        fit.alpha(),
        fit.window.0,
        fit.window.1,
        fit.points,
        fit.residual
    )
}

pub(crate) fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> DecayCurve {
        let times = crate::fit::geometric_grid(1.0, 1000.0, 31);
        let values = times.iter().map(|&t| f(t)).collect();
        DecayCurve::new(times, values)
    }

    #[test]
    fn exact_power_laws() {
        let fit = decay_fit(&synthetic(|t| t.powi(-2)), None).unwrap();
        assert!((fit.alpha() - 2.0).abs() < 1e-6);
        assert!(fit.is_power_law());
        let fit = decay_fit(&synthetic(|t| 3.0 / t.sqrt()), Some((1.0, 1000.0))).unwrap();
        assert!((fit.alpha() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exponential_is_flagged() {
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.25).collect();
        let curve = DecayCurve::new(times.clone(), times.iter().map(|t| (-2.0 * t).exp()).collect());
        let fit = decay_fit(&curve, Some((0.25, 5.0))).unwrap();
        assert!(!fit.is_power_law(), "residual {}", fit.residual);
    }

    #[test]
    fn nonpositive_values_rejected() {
        let mut curve = synthetic(|t| 1.0 / t);
        let last = curve.values.len() - 1;
        curve.values[last] = 0.0;
        assert!(matches!(decay_fit(&curve, None), Err(crate::Error::Fit(_))));
    }

    #[test]
    fn report_lines() {
        let mut r = ExperimentReport::new("demo");
        r.echo("seed", 7);
        r.check("a", true, "ok");
        r.target("b", Status::Inconclusive, "unclear");
        assert!(r.passed());
        assert_eq!(r.config_text(), "seed=7\n");
        r.check("c", false, "bad");
        assert!(!r.passed());
        assert!(r.summary().contains("[FAIL] c: bad"));
    }
}
