use rayon::prelude::*;

use super::{join, ExperimentReport};
use crate::environment::{ConductanceField, ConductanceLaw, Lattice};
use crate::error::{Error, Result};
use crate::functionals::{for_box, LocalFunctional};
use crate::operators::{box_spectral_gap, semigroup_apply, GeneratorKind, TorusOperator};

#[derive(Clone, Debug)]
pub struct NashConfig {
    pub law: ConductanceLaw,
    pub d: usize,
    /// Torus period.
    pub n: usize,
    /// Box radii to test.
    pub n_list: Vec<usize>,
    pub functional: LocalFunctional,
    pub realizations: usize,
    pub seed: u64,
    /// Evaluate on `f_t = e^{tL} f` instead of `f`.
    pub time: f64,
}

/// Field-averaged terms of `E[f²] ≤ C_S n² ℰ(f,f) + (2/|B_n|²) E[S_n(f)²]` at one box radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NashRow {
    pub box_n: usize,
    pub c_s: f64,
    pub lhs: f64,
    pub poincare: f64,
    pub block: f64,
    pub rhs: f64,
    /// Smallest `rhs − lhs` over fields.
    pub min_slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct NashResult {
    pub rows: Vec<NashRow>,
    pub energy: f64,
    /// `max_n E[S_n²]/|B_n|` over the tested radii (including `n = 0`).
    pub script_n_prime: f64,
    /// `w = (𝒩′/(2eℰ))^{1/(d+2)}`, undefined when `ℰ = 0`.
    pub optimum_w: Option<f64>,
    /// Radius with the smallest right-hand side.
    pub best_n: usize,
    pub report: ExperimentReport,
}

struct FieldTerms {
    lhs: f64,
    energy: f64,
    /// `E[S_n²]` per radius.
    block_sq: Vec<f64>,
}

/// Checks the box Nash inequality field by field and locates the tightest radius.
pub fn nash_chain_check(config: &NashConfig) -> Result<NashResult> {
    let c = config;
    c.law.validate()?;
    let lattice = Lattice::new(c.d, c.n)?;
    c.functional.check_fits(&lattice, 0)?;
    if c.n_list.is_empty() || c.n_list.contains(&0) {
        return Err(Error::Parameter("box radii must be ≥ 1 and the list nonempty".into()));
    }
    if let Some(&r) = c.n_list.iter().find(|&&r| 2 * r + 1 > c.n) {
        return Err(Error::Aliasing { reach: r, period: c.n });
    }
    if c.realizations == 0 || !(c.time >= 0.0 && c.time.is_finite()) {
        return Err(Error::Parameter("need ≥ 1 realization and a finite time ≥ 0".into()));
    }
    let gaps: Vec<_> = c.n_list.iter().map(|&r| box_spectral_gap(c.d, r)).collect::<Result<_>>()?;

    let mut report = ExperimentReport::new("nash-check");
    report.echo("law", c.law);
    report.echo("d", c.d);
    report.echo("n", c.n);
    report.echo("boxes", join(&c.n_list));
    report.echo("functional", c.functional.name());
    report.echo("realizations", c.realizations);
    report.echo("seed", c.seed);
    report.echo("time", c.time);

    let mean_hint = c.functional.mean_hint();
    let terms: Vec<FieldTerms> = (0..c.realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<FieldTerms> {
            let field = ConductanceField::<f64>::sample_realization(&c.law, &lattice, c.seed, r)?;
            let op = TorusOperator::build(&field, GeneratorKind::Conductance);
            let raw = c.functional.evaluate_all(&field)?;
            let mut g = match mean_hint {
                Some(m) => raw.shifted(-m),
                None => raw.centered(),
            };
            if c.time > 0.0 {
                g = semigroup_apply(&op, &g, c.time)?;
            }
            let v = g.values();
            let block_sq = c
                .n_list
                .iter()
                .map(|&r| {
                    (0..lattice.sites())
                        .map(|x| {
                            let mut s = 0.0;
                            for_box(c.d, r, |off| s += v[lattice.shift(x, off)]);
                            s * s
                        })
                        .sum::<f64>()
                        / lattice.sites() as f64
                })
                .collect();
            Ok(FieldTerms { lhs: g.mean_square(), energy: op.dirichlet_form(&g), block_sq })
        })
        .collect::<Result<_>>()?;

    let nf = terms.len() as f64;
    let avg = |f: &dyn Fn(&FieldTerms) -> f64| terms.iter().map(f).sum::<f64>() / nf;
    let lhs = avg(&|t| t.lhs);
    let energy = avg(&|t| t.energy);
    let rows: Vec<NashRow> = c
        .n_list
        .iter()
        .zip(&gaps)
        .enumerate()
        .map(|(i, (&r, gap))| {
            let volume = ((2 * r + 1) as f64).powi(c.d as i32);
            let coef = gap.c_s * (r * r) as f64;
            let rhs_of = |t: &FieldTerms| coef * t.energy + 2.0 * t.block_sq[i] / (volume * volume);
            let min_slack = terms.iter().map(|t| rhs_of(t) - t.lhs).fold(f64::INFINITY, f64::min);
            let holds = terms.iter().all(|t| t.lhs <= rhs_of(t) + 1e-12 * t.lhs.abs());
            let poincare = coef * energy;
            let block = 2.0 * avg(&|t| t.block_sq[i]) / (volume * volume);
            NashRow { box_n: r, c_s: gap.c_s, lhs, poincare, block, rhs: poincare + block, min_slack, holds }
        })
        .collect();

    let script_n_prime = c
        .n_list
        .iter()
        .enumerate()
        .map(|(i, &r)| avg(&|t| t.block_sq[i]) / ((2 * r + 1) as f64).powi(c.d as i32))
        .fold(lhs, f64::max);
    let optimum_w = (energy > 0.0)
        .then(|| (script_n_prime / (2.0 * std::f64::consts::E * energy)).powf(1.0 / (c.d as f64 + 2.0)));
    let best_n = rows.iter().min_by(|a, b| a.rhs.total_cmp(&b.rhs)).map_or(0, |r| r.box_n);

    let all = rows.iter().all(|r| r.holds);
    let worst = rows.iter().map(|r| r.min_slack).fold(f64::INFINITY, f64::min);
    report.check(
        "seminash inequality",
        all,
        format!("{} radii × {} fields, smallest slack {worst:.3e}", rows.len(), terms.len()),
    );
    match optimum_w {
        Some(w) => report.note(format!("tightest radius {best_n}; heuristic optimum w = {w:.3}")),
        None => report.note("ℰ(f, f) = 0: both sides vanish, no optimum"),
    }
    Ok(NashResult { rows, energy, script_n_prime, optimum_w, best_n, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{functional_by_name, local_drift};

    #[test]
    fn zero_functional_both_sides_vanish() {
        let law = ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 };
        let cfg = NashConfig {
            law,
            d: 1,
            n: 32,
            n_list: vec![2, 4],
            functional: functional_by_name("constant:0", 1, &law).unwrap(),
            realizations: 2,
            seed: 1,
            time: 0.0,
        };
        let out = nash_chain_check(&cfg).unwrap();
        assert!(out.rows.iter().all(|r| r.lhs == 0.0 && r.rhs == 0.0 && r.holds));
        assert!(out.optimum_w.is_none());
    }

    #[test]
    fn drift_holds_at_every_radius() {
        let law = ConductanceLaw::TwoPoint { p: 0.5, low: 1.0, high: 4.0 };
        for time in [0.0, 2.0] {
            let cfg = NashConfig {
                law,
                d: 1,
                n: 64,
                n_list: vec![2, 4, 8],
                functional: local_drift(1, &law),
                realizations: 8,
                seed: 5,
                time,
            };
            let out = nash_chain_check(&cfg).unwrap();
            assert!(out.report.passed(), "{}", out.report.summary());
            assert!(out.optimum_w.unwrap() > 0.0);
        }
    }

    #[test]
    fn oversized_box_rejected() {
        let law = ConductanceLaw::Constant(1.0);
        let cfg = NashConfig {
            law,
            d: 1,
            n: 8,
            n_list: vec![4],
            functional: local_drift(1, &law),
            realizations: 1,
            seed: 0,
            time: 0.0,
        };
        assert!(matches!(nash_chain_check(&cfg), Err(Error::Aliasing { .. })));
    }
}
