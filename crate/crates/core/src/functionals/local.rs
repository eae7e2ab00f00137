use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::poly::Polynomial;
use crate::environment::{ConductanceField, ConductanceLaw, EdgeOffset, Lattice};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::operators::FieldFunction;

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Body {
    Poly(Polynomial),
    Custom(Evaluator),
}

/// A function of finitely many edge conductances around the origin.
#[derive(Clone)]
pub struct LocalFunctional {
    name: String,
    dim: usize,
    stencil: Vec<EdgeOffset>,
    body: Body,
    /// `|∇f|(e)` per stencil edge.
    oscillation: Option<Vec<f64>>,
    sup_bound: Option<f64>,
    mean_hint: Option<f64>,
}

impl fmt::Debug for LocalFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalFunctional")
            .field("name", &self.name)
            .field("stencil", &self.stencil)
            .field("oscillation", &self.oscillation)
            .field("sup_bound", &self.sup_bound)
            .field("mean_hint", &self.mean_hint)
            .finish_non_exhaustive()
    }
}

/// `[min, max]` of a univariate `Σ c_p x^p` on `[a, b]` with `a ≥ 1`.
fn univariate_range(coefs: &[(u32, f64)], a: f64, b: f64) -> (f64, f64) {
    let g = |x: f64| coefs.iter().map(|&(p, c)| c * x.powi(p as i32)).sum::<f64>();
    if coefs.iter().all(|c| c.1 >= 0.0) || coefs.iter().all(|c| c.1 <= 0.0) {
        // monotone on the positive axis
        let (ga, gb) = (g(a), g(b));
        return (ga.min(gb), ga.max(gb));
    }
    let steps = 4096;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=steps {
        let v = g(a + (b - a) * i as f64 / steps as f64);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

impl LocalFunctional {
    /// Polynomial functional with bounds derived from `law`'s support and moments.
    ///
    /// Univariate parts are bounded exactly; cross terms use interval products, which
    /// can only overestimate.
    pub fn polynomial(name: impl Into<String>, poly: Polynomial, law: &ConductanceLaw) -> Self {
        let (a, b) = law.support();
        let k = poly.stencil.len();
        let bounded = b.is_finite();

        // group single-variable terms per edge; everything else is a cross term
        let mut uni: Vec<Vec<(u32, f64)>> = vec![vec![]; k];
        let mut cross = vec![];
        for t in &poly.terms {
            if t.factors.len() == 1 {
                uni[t.factors[0].0].push((t.factors[0].1, t.coef));
            } else {
                cross.push(t);
            }
        }

        let (oscillation, sup_bound) = if bounded {
            let mut osc = vec![0.0; k];
            let (mut lo, mut hi) = (poly.constant, poly.constant);
            for (i, coefs) in uni.iter().enumerate() {
                if !coefs.is_empty() {
                    let (l, h) = univariate_range(coefs, a, b);
                    osc[i] += h - l;
                    lo += l;
                    hi += h;
                }
            }
            for t in &cross {
                let pmin: f64 = t.factors.iter().map(|&(_, p)| a.powi(p as i32)).product();
                let pmax: f64 = t.factors.iter().map(|&(_, p)| b.powi(p as i32)).product();
                let (l, h) = if t.coef >= 0.0 { (t.coef * pmin, t.coef * pmax) } else { (t.coef * pmax, t.coef * pmin) };
                lo += l;
                hi += h;
                for &(i, p) in &t.factors {
                    let others: f64 =
                        t.factors.iter().filter(|f| f.0 != i).map(|&(_, q)| b.powi(q as i32)).product();
                    osc[i] += t.coef.abs() * (b.powi(p as i32) - a.powi(p as i32)) * others;
                }
            }
            (Some(osc), Some(lo.abs().max(hi.abs())))
        } else {
            (None, None)
        };

        let mean_hint = poly.terms.iter().try_fold(poly.constant, |acc, t| {
            let m: Option<f64> = t.factors.iter().map(|&(_, p)| law.moment(p)).product();
            m.map(|m| acc + t.coef * m)
        });

        Self { name: name.into(), dim: poly.dim, stencil: poly.stencil.clone(), body: Body::Poly(poly), oscillation, sup_bound, mean_hint }
    }

    /// Arbitrary evaluator on declared stencil values; bounds are whatever the caller supplies.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        stencil: Vec<EdgeOffset>,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        oscillation: Option<Vec<f64>>,
        sup_bound: Option<f64>,
        mean_hint: Option<f64>,
    ) -> Result<Self> {
        if let Some(osc) = &oscillation {
            if osc.len() != stencil.len() || osc.iter().any(|o| !(*o >= 0.0)) {
                return Err(Error::Declaration("oscillation needs one nonnegative entry per stencil edge".into()));
            }
        }
        if stencil.iter().any(|e| e.base.len() != dim || e.axis >= dim) {
            return Err(Error::Declaration(format!("stencil edge outside dimension {dim}")));
        }
        Ok(Self { name: name.into(), dim, stencil, body: Body::Custom(Arc::new(evaluator)), oscillation, sup_bound, mean_hint })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stencil(&self) -> &[EdgeOffset] {
        &self.stencil
    }

    pub fn polynomial_body(&self) -> Option<&Polynomial> {
        match &self.body {
            Body::Poly(p) => Some(p),
            Body::Custom(_) => None,
        }
    }

    pub fn oscillation(&self) -> Option<&[f64]> {
        self.oscillation.as_deref()
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn mean_hint(&self) -> Option<f64> {
        self.mean_hint
    }

    /// Largest coordinate magnitude the stencil reaches.
    pub fn reach(&self) -> usize {
        self.stencil.iter().map(EdgeOffset::reach).max().unwrap_or(0)
    }

    /// `|||f||| = Σ_e |∇f|(e)`.
    pub fn triple_norm(&self) -> Option<f64> {
        self.oscillation.as_ref().map(|o| o.iter().sum())
    }

    /// Value on explicit stencil conductances.
    pub fn eval_values(&self, omega: &[f64]) -> f64 {
        match &self.body {
            Body::Poly(p) => p.eval(omega),
            Body::Custom(f) => f(omega),
        }
    }

    /// Rejects lattices on which the stencil would wrap; `extra` widens the region (box radius).
    pub fn check_fits(&self, lattice: &Lattice, extra: usize) -> Result<()> {
        if lattice.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: lattice.dim() });
        }
        let reach = self.reach() + extra;
        if 2 * reach + 1 > lattice.period() {
            return Err(Error::Aliasing { reach, period: lattice.period() });
        }
        Ok(())
    }

    /// `f(θ_x ω)` without the aliasing check.
    pub(crate) fn eval_unchecked<T: Real>(&self, field: &ConductanceField<T>, x: usize, buf: &mut Vec<f64>) -> f64 {
        let view = field.translate(x);
        buf.clear();
        buf.extend(self.stencil.iter().map(|e| view.at(e).to_f64_lossy()));
        self.eval_values(buf)
    }

    pub fn evaluate_at<T: Real>(&self, field: &ConductanceField<T>, x: usize) -> Result<f64> {
        self.check_fits(field.lattice(), 0)?;
        field.lattice().check_site(x)?;
        Ok(self.eval_unchecked(field, x, &mut Vec::new()))
    }

    /// `g(x) = f(θ_x ω)` at every site.
    pub fn evaluate_all<T: Real>(&self, field: &ConductanceField<T>) -> Result<FieldFunction<T>> {
        self.check_fits(field.lattice(), 0)?;
        let l = field.lattice();
        let vals: Vec<T> = (0..l.sites())
            .into_par_iter()
            .map_init(Vec::new, |buf, x| T::lit(self.eval_unchecked(field, x, buf)))
            .collect();
        Ok(FieldFunction::new(vals))
    }

    /// `S_n(f) = Σ_{x ∈ B_n} f(θ_x ω)` for the box of radius `n_box` around `center`.
    pub fn spatial_sum<T: Real>(&self, field: &ConductanceField<T>, n_box: usize, center: usize) -> Result<f64> {
        self.check_fits(field.lattice(), n_box)?;
        let l = field.lattice();
        l.check_site(center)?;
        let mut buf = Vec::new();
        let mut acc = crate::num::CompensatedSum::new();
        for_box(l.dim(), n_box, |off| {
            acc.add(self.eval_unchecked(field, l.shift(center, off), &mut buf));
        });
        Ok(acc.value())
    }

    /// `N(f) = |||f|||² + ‖f‖_∞²`.
    pub fn big_n(&self) -> Result<f64> {
        match (self.triple_norm(), self.sup_bound) {
            (Some(t), Some(s)) if t.is_finite() && s.is_finite() => Ok(t * t + s * s),
            _ => Err(Error::Declaration(format!(
                "functional '{}' lacks finite oscillation or sup bounds (unbounded law?)",
                self.name
            ))),
        }
    }
}

/// Visits every offset of `{−r, …, r}^d`.
pub fn for_box(d: usize, r: usize, mut visit: impl FnMut(&[i64])) {
    let r = r as i64;
    let mut off = vec![-r; d];
    loop {
        visit(&off);
        let mut a = 0;
        loop {
            if a == d {
                return;
            }
            off[a] += 1;
            if off[a] <= r {
                break;
            }
            off[a] = -r;
            a += 1;
        }
    }
}
