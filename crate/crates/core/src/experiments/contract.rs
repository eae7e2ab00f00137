use rand::Rng;
use rayon::prelude::*;

use super::{join, ExperimentReport, Status};
use crate::environment::{ConductanceField, ConductanceLaw, Lattice};
use crate::error::{Error, Result};
use crate::functionals::{contract_functional, for_box, LocalFunctional};
use crate::num::Moments;
use crate::operators::{Decomposition, FieldFunction, TorusOperator};
use crate::rng::{derive_seed, stream};
use crate::spectral::{Centering, DecayCurve, SpectralMeasure};

const CHUNK: usize = 1 << 16;

/// `μ₁μ₂ − μ₃ + μ₄ − μ₂² + 2μ₁μ₂² − 2μ₁μ₄`: the value of `E[S₁(𝕃f)·S₁(f)]` for
/// `f = X_{−1,0} + X_{2,3}²` under i.i.d. conductances with moments `μ₁..μ₄`.
pub fn contract_formula(m: [f64; 4]) -> f64 {
    let [m1, m2, m3, m4] = m;
    m1 * m2 - m3 + m4 - m2 * m2 + 2.0 * m1 * m2 * m2 - 2.0 * m1 * m4
}

/// Simple-walk analogue `t ↦ E[(S_r(f°_t))²]` on a ring.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalogueConfig {
    pub n: usize,
    pub box_radius: usize,
    pub realizations: usize,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractConfig {
    pub p: f64,
    pub eps: f64,
    pub cap: f64,
    /// Lower atom of the unscaled variable; conductances are `X/atom ≥ 1`.
    pub atom: f64,
    pub samples: usize,
    pub seed: u64,
    /// Draw the Pareto component from `½·target + ½·log-uniform[1, cap]` and reweight.
    pub importance: bool,
    pub analogue: AnalogueConfig,
}

impl ContractConfig {
    pub fn new(p: f64, eps: f64, cap: f64) -> Self {
        let mut times = vec![0.0];
        times.extend(crate::fit::geometric_grid(0.01, 100.0, 25));
        Self {
            p,
            eps,
            cap,
            atom: 0.01,
            samples: 2_000_000,
            seed: 0,
            importance: true,
            analogue: AnalogueConfig { n: 64, box_radius: 1, realizations: 32, times },
        }
    }

    pub fn law(&self) -> ConductanceLaw {
        ConductanceLaw::BoundedPareto { p: self.p, eps: self.eps, cap: self.cap, atom: self.atom }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractVerdict {
    /// Positive formula value matched by Monte Carlo within 3 standard errors.
    Confirmed,
    Disagree,
    /// The formula is not positive: the fourth moment does not dominate at this cap.
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct ContractResult {
    /// Cap-corrected `μ₁..μ₄` of the unscaled variable.
    pub moments: [f64; 4],
    pub formula: f64,
    /// Same formula with the cap removed.
    pub formula_uncapped: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub verdict: ContractVerdict,
    pub analogue: DecayCurve,
    pub analogue_nonincreasing: bool,
    pub report: ExperimentReport,
}

fn moments(law: &ConductanceLaw) -> Result<[f64; 4]> {
    let mut m = [0.0; 4];
    for (k, slot) in m.iter_mut().enumerate() {
        *slot = law
            .underlying_moment(k as u32 + 1)
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parameter(format!("moment {} of {law} is infinite", k + 1)))?;
    }
    Ok(m)
}

/// Edge draws in the conductance frame together with their likelihood ratio.
struct Sampler {
    p: f64,
    a: f64,
    cap: f64,
    atom: f64,
    mass: f64,
    log_cap: f64,
    importance: bool,
}

impl Sampler {
    fn new(c: &ContractConfig) -> Self {
        let a = 4.0 + c.eps;
        Self {
            p: c.p,
            a,
            cap: c.cap,
            atom: c.atom,
            mass: 1.0 - c.cap.powf(-a),
            log_cap: c.cap.ln(),
            importance: c.importance && c.cap.is_finite() && c.cap > 1.0,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        if rng.random::<f64>() >= self.p {
            return (1.0, 1.0);
        }
        let u: f64 = rng.random();
        if !self.importance {
            return (((1.0 - u * self.mass).powf(-1.0 / self.a) / self.atom).max(1.0), 1.0);
        }
        let x = if rng.random::<f64>() < 0.5 { (1.0 - u * self.mass).powf(-1.0 / self.a) } else { self.cap.powf(u) };
        let target = self.a * x.powf(-self.a - 1.0) / self.mass;
        let proposal = 1.0 / (x * self.log_cap);
        ((x / self.atom).max(1.0), target / (0.5 * target + 0.5 * proposal))
    }
}

/// Monte Carlo of `E[S₁(𝕃f)·S₁(f)]` in the conductance frame, one independent window per sample.
fn monte_carlo(c: &ContractConfig, f: &LocalFunctional) -> Result<Moments> {
    let d = 1;
    let period = 2 * (f.reach() + 2) + 1;
    let lattice = Lattice::new(d, period)?;
    f.check_fits(&lattice, 2)?;
    let site = |i: i64| lattice.site_of(&[i]);
    // every edge read by S₁(f) or S₁(𝕃f) at the origin
    let mut edges: Vec<usize> = Vec::new();
    for i in -2..=2 {
        edges.extend(f.stencil().iter().map(|e| lattice.edge_at(site(i), e)));
    }
    for i in -1..=1 {
        edges.extend(lattice.incident(site(i)).map(|(e, _)| e));
    }
    edges.sort_unstable();
    edges.dedup();
    let sampler = Sampler::new(c);
    let seed = derive_seed(c.seed, "contract");
    let chunks = c.samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks as u64)
        .into_par_iter()
        .map(|chunk| -> Result<Moments> {
            let mut rng = stream(seed, chunk, 0);
            let mut field = ConductanceField::<f64>::constant(lattice.clone(), 1.0)?;
            let mut g = vec![0.0; period];
            let mut buf = Vec::new();
            let mut acc = Moments::default();
            let count = CHUNK.min(c.samples - chunk as usize * CHUNK);
            for _ in 0..count {
                let mut weight = 1.0;
                for &e in &edges {
                    let (w, lr) = sampler.draw(&mut rng);
                    field.set(e, w)?;
                    weight *= lr;
                }
                for i in -2..=2 {
                    let x = site(i);
                    g[x] = f.eval_unchecked(&field, x, &mut buf);
                }
                let (mut s_f, mut s_lf) = (0.0, 0.0);
                for i in -1..=1 {
                    let x = site(i);
                    s_f += g[x];
                    for k in 0..2 * d {
                        s_lf += field.omega_dir(x, k) * (g[lattice.step(x, k)] - g[x]);
                    }
                }
                acc.push(weight * s_lf * s_f);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(Moments::merge_all(&parts))
}

/// `E[(S_r f°_t)²]` on a ring, averaged over fields and all box centres. On each field this is
/// `‖e^{tL°}(S_r f)‖²/N`, a sum of decaying exponentials.
fn analogue_curve(a: &AnalogueConfig, law: &ConductanceLaw, f: &LocalFunctional, seed: u64) -> Result<DecayCurve> {
    let lattice = Lattice::new(1, a.n)?;
    f.check_fits(&lattice, a.box_radius)?;
    if a.realizations < 2 {
        return Err(Error::Parameter("the analogue curve needs ≥ 2 fields".into()));
    }
    if a.times.iter().any(|t| !(*t >= 0.0)) || a.times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter("analogue times must be ≥ 0 and strictly increasing".into()));
    }
    let dec = Decomposition::new(&TorusOperator::<f64>::simple(&lattice))?;
    let field_seed = derive_seed(seed, "contract-analogue");
    let per: Vec<Vec<f64>> = (0..a.realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let field = ConductanceField::<f64>::sample_realization(law, &lattice, field_seed, r)?;
            let g = f.evaluate_all(&field)?;
            let h: Vec<f64> = (0..lattice.sites())
                .map(|x| {
                    let mut s = 0.0;
                    for_box(1, a.box_radius, |off| s += g.values()[lattice.shift(x, off)]);
                    s
                })
                .collect();
            let m = SpectralMeasure::from_decomposition(&dec, &FieldFunction::new(h), Centering::Raw)?;
            Ok(a.times.iter().map(|&t| m.variance(t)).collect())
        })
        .collect::<Result<_>>()?;
    let (values, stderr): (Vec<f64>, Vec<f64>) = (0..a.times.len())
        .map(|k| {
            let m: Moments = per.iter().map(|v| v[k]).collect();
            (m.mean, m.stderr())
        })
        .unzip();
    Ok(DecayCurve { times: a.times.clone(), values, stderr: Some(stderr) })
}

/// Closed form versus Monte Carlo for `½ ∂_t E[S₁(f_t)²]|_{t=0}`, plus the simple-walk contrast.
pub fn contractivity_experiment(config: &ContractConfig) -> Result<ContractResult> {
    let c = config;
    let law = c.law();
    law.validate()?;
    if c.samples < 2 {
        return Err(Error::Parameter("need at least 2 Monte Carlo samples".into()));
    }
    let mut report = ExperimentReport::new("contract");
    report.echo("p", c.p);
    report.echo("eps", c.eps);
    report.echo("cap", c.cap);
    report.echo("atom", c.atom);
    report.echo("samples", c.samples);
    report.echo("seed", c.seed);
    report.echo("importance", c.importance);
    report.echo("analogue_n", c.analogue.n);
    report.echo("analogue_radius", c.analogue.box_radius);
    report.echo("analogue_realizations", c.analogue.realizations);
    report.echo("analogue_times", join(&c.analogue.times));

    let m = moments(&law)?;
    let formula = contract_formula(m);
    let uncapped = ConductanceLaw::BoundedPareto { p: c.p, eps: c.eps, cap: f64::INFINITY, atom: c.atom };
    let formula_uncapped = contract_formula(moments(&uncapped)?);

    // f = X_{−1,0} + X_{2,3}² with X = atom·ω; 𝕃 in the X frame is atom times 𝕃 in the ω frame
    let f = contract_functional(1, &law, c.atom, c.atom * c.atom);
    let mc = monte_carlo(c, &f)?;
    let (mc_estimate, mc_stderr) = (c.atom * mc.mean, c.atom * mc.stderr());

    let verdict = if !(formula > 0.0) {
        ContractVerdict::Inconclusive
    } else if (formula - mc_estimate).abs() <= 3.0 * mc_stderr {
        ContractVerdict::Confirmed
    } else {
        ContractVerdict::Disagree
    };
    let detail = format!(
        "formula {formula:.6} (uncapped {formula_uncapped:.6}), Monte Carlo {mc_estimate:.6} ± {mc_stderr:.2e} ({} samples)",
        c.samples
    );
    match verdict {
        ContractVerdict::Confirmed => report.target("positive derivative", Status::Pass, detail),
        ContractVerdict::Disagree => report.target("positive derivative", Status::Fail, detail),
        ContractVerdict::Inconclusive => report.target(
            "positive derivative",
            Status::Inconclusive,
            format!("{detail}; μ₄ does not dominate at this cap"),
        ),
    }
    report.note(format!("moments μ₁..μ₄ = {:?}", m));

    let analogue = analogue_curve(&c.analogue, &law, &f, c.seed)?;
    let analogue_nonincreasing = analogue.values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    report.check(
        "simple-walk analogue nonincreasing",
        analogue_nonincreasing,
        format!("E[(S_{}(f°_t))²] on {} grid points", c.analogue.box_radius, analogue.times.len()),
    );
    Ok(ContractResult {
        moments: m,
        formula,
        formula_uncapped,
        mc_estimate,
        mc_stderr,
        verdict,
        analogue,
        analogue_nonincreasing,
        report,
    })
}
