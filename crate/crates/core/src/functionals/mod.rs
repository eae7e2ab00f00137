//! Local functionals of the environment and the norms built on them.

mod local;
mod poly;

use rayon::prelude::*;

pub use local::{for_box, LocalFunctional};
pub use poly::{Monomial, Polynomial};

use crate::environment::{ConductanceField, ConductanceLaw, EdgeOffset, Lattice};
use crate::error::{Error, Result};
use crate::num::Moments;

fn origin_edge(d: usize, shift0: i64, axis: usize) -> EdgeOffset {
    let mut base = vec![0; d];
    base[0] = shift0;
    EdgeOffset::new(base, axis)
}

/// `𝔡(ω) = ω_{0,e_1} − ω_{0,−e_1}`.
pub fn local_drift(d: usize, law: &ConductanceLaw) -> LocalFunctional {
    let p = Polynomial::constant(d, 0.0)
        .with_term(1.0, &[(origin_edge(d, 0, 0), 1)])
        .with_term(-1.0, &[(origin_edge(d, -1, 0), 1)]);
    LocalFunctional::polynomial("drift", p, law)
}

/// Centered single edge `ω_{0,e_1} − E[ω]`.
pub fn centered_edge(d: usize, law: &ConductanceLaw) -> LocalFunctional {
    let p = Polynomial::constant(d, -law.mean()).with_term(1.0, &[(origin_edge(d, 0, 0), 1)]);
    LocalFunctional::polynomial("edge", p, law)
}

/// `a·ω_{−1,0} + b·ω_{2,3}²` along the first axis; `a = b = 1` is the non-contractivity example.
pub fn contract_functional(d: usize, law: &ConductanceLaw, a: f64, b: f64) -> LocalFunctional {
    let p = Polynomial::constant(d, 0.0)
        .with_term(a, &[(origin_edge(d, -1, 0), 1)])
        .with_term(b, &[(origin_edge(d, 2, 0), 2)]);
    LocalFunctional::polynomial("contract-example", p, law)
}

/// Looks up `drift`, `edge`, `contract-example`, `constant:c` or `poly:<expr>`.
pub fn functional_by_name(descriptor: &str, d: usize, law: &ConductanceLaw) -> Result<LocalFunctional> {
    let desc = descriptor.trim();
    match desc {
        "drift" => return Ok(local_drift(d, law)),
        "edge" => return Ok(centered_edge(d, law)),
        "contract-example" => return Ok(contract_functional(d, law, 1.0, 1.0)),
        _ => {}
    }
    if let Some(c) = desc.strip_prefix("constant:") {
        let c: f64 = c.trim().parse().map_err(|_| Error::Parameter(format!("bad constant in '{desc}'")))?;
        return Ok(LocalFunctional::polynomial(desc, Polynomial::constant(d, c), law));
    }
    if let Some(expr) = desc.strip_prefix("poly:") {
        return Ok(LocalFunctional::polynomial(desc, Polynomial::parse(expr, d)?, law));
    }
    Err(Error::Parameter(format!(
        "unknown functional '{desc}' (expected drift, edge, contract-example, constant:c or poly:<expr>)"
    )))
}

/// One row of the `E[S_n²]/|B_n|` table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptNRow {
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptNEstimate {
    pub table: Vec<ScriptNRow>,
    /// Largest tabulated value, the estimate of `𝒩(f)`.
    pub sup: f64,
    pub argmax: usize,
    /// The table does not settle: `E[f] ≠ 0` or sustained growth at the largest n.
    pub divergent: bool,
}

/// Monte Carlo table of `E[(S_n f)²]/|B_n|` for `n = 0..=n_max`, one fresh field per realization.
pub fn estimate_script_n(
    f: &LocalFunctional,
    law: &ConductanceLaw,
    lattice: &Lattice,
    n_max: usize,
    realizations: usize,
    seed: u64,
) -> Result<ScriptNEstimate> {
    f.check_fits(lattice, n_max)?;
    if realizations < 2 {
        return Err(Error::Parameter("need at least 2 realizations for standard errors".into()));
    }
    let d = lattice.dim();
    let per_field: Vec<Vec<f64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let field = ConductanceField::<f64>::sample_realization(law, lattice, seed, r)?;
            // values on the largest box, then nested box sums by radius
            let mut buf = Vec::new();
            let mut shell = vec![0.0; n_max + 1];
            for_box(d, n_max, |off| {
                let radius = off.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
                shell[radius] += f.eval_unchecked(&field, lattice.site_of(off), &mut buf);
            });
            let mut s = 0.0;
            Ok((0..=n_max)
                .map(|n| {
                    s += shell[n];
                    s * s / ((2 * n + 1) as f64).powi(d as i32)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let table: Vec<ScriptNRow> = (0..=n_max)
        .map(|n| {
            let m: Moments = per_field.iter().map(|v| v[n]).collect();
            ScriptNRow { n, value: m.mean, stderr: m.stderr() }
        })
        .collect();
    let (argmax, sup) = table
        .iter()
        .map(|r| (r.n, r.value))
        .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });

    let mean_flag = f.mean_hint().is_some_and(|m| m.abs() > 1e-12);
    let growth_flag = n_max >= 2 && {
        let t = &table[n_max - 2..];
        let monotone = t[0].value < t[1].value && t[1].value < t[2].value;
        let pooled = (t[0].stderr.powi(2) + t[2].stderr.powi(2)).sqrt();
        monotone && t[2].value - t[0].value > 3.0 * pooled
    };
    Ok(ScriptNEstimate { table, sup, argmax, divergent: mean_flag || growth_flag })
}

/// `N(f) = |||f|||² + ‖f‖_∞²`.
pub fn big_n(f: &LocalFunctional) -> Result<f64> {
    f.big_n()
}
