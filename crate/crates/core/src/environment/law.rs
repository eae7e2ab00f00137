use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Law of a single edge conductance. Edges are i.i.d. under every variant.
///
/// `BoundedPareto` draws `X` from `(1−p)·δ_atom + p·(4+ε)x^{−(5+ε)}` restricted to
/// `[1, cap]` and returns `ω = X / atom`, so the support starts at 1. With
/// `atom = 1` no rescaling happens; `cap = ∞` gives the untruncated tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConductanceLaw {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    /// `ω = high` with probability `p`, `ω = low` otherwise.
    TwoPoint { p: f64, low: f64, high: f64 },
    BoundedPareto { p: f64, eps: f64, cap: f64, atom: f64 },
}

impl ConductanceLaw {
    pub fn pareto(p: f64, eps: f64, cap: f64) -> Self {
        ConductanceLaw::BoundedPareto { p, eps, cap, atom: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        match *self {
            ConductanceLaw::Constant(c) => {
                if !(c >= 1.0 && c.is_finite()) {
                    return bad(format!("constant conductance {c} must be finite and ≥ 1"));
                }
            }
            ConductanceLaw::Uniform { lo, hi } => {
                if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
                    return bad(format!("uniform law needs 1 ≤ a ≤ b < ∞, got [{lo}, {hi}]"));
                }
            }
            ConductanceLaw::TwoPoint { p, low, high } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("probability {p} outside [0, 1]"));
                }
                if !(low >= 1.0 && high >= 1.0 && low.is_finite() && high.is_finite()) {
                    return bad(format!("two-point values {low}, {high} must be finite and ≥ 1"));
                }
            }
            ConductanceLaw::BoundedPareto { p, eps, cap, atom } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("probability {p} outside [0, 1]"));
                }
                if !(eps > 0.0 && eps.is_finite()) {
                    return bad(format!("tail parameter ε = {eps} must be > 0"));
                }
                if !(cap > 1.0) {
                    return bad(format!("cap {cap} must be > 1"));
                }
                if !(atom > 0.0 && atom <= 1.0) {
                    return bad(format!("atom {atom} must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// `(min, max)` of the support; `max` is infinite for an uncapped tail.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ConductanceLaw::Constant(c) => (c, c),
            ConductanceLaw::Uniform { lo, hi } => (lo, hi),
            ConductanceLaw::TwoPoint { p, low, high } => {
                if p == 0.0 {
                    (low, low)
                } else if p == 1.0 {
                    (high, high)
                } else {
                    (low.min(high), low.max(high))
                }
            }
            ConductanceLaw::BoundedPareto { p, cap, atom, .. } => {
                let lo = if p < 1.0 { 1.0 } else { 1.0 / atom };
                let hi = if p > 0.0 { cap / atom } else { 1.0 };
                (lo, hi)
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.support().1.is_finite()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ConductanceLaw::Constant(c) => c,
            ConductanceLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ConductanceLaw::TwoPoint { p, low, high } => {
                if rng.random::<f64>() < p {
                    high
                } else {
                    low
                }
            }
            ConductanceLaw::BoundedPareto { p, eps, cap, atom } => {
                let heavy = rng.random::<f64>() < p;
                let u: f64 = rng.random();
                let x = if heavy {
                    let a = 4.0 + eps;
                    let mass = 1.0 - cap.powf(-a);
                    (1.0 - u * mass).powf(-1.0 / a)
                } else {
                    atom
                };
                // x ≥ atom, so the division keeps ω ≥ 1 up to rounding
                (x / atom).max(1.0)
            }
        }
    }

    /// Moment `E[X^k]` of the unscaled variable `X` behind a `BoundedPareto` law;
    /// for other variants this is just `E[ω^k]`.
    pub fn underlying_moment(&self, k: u32) -> Option<f64> {
        match *self {
            ConductanceLaw::BoundedPareto { p, eps, cap, atom } => {
                let a = 4.0 + eps;
                let kf = k as f64;
                let tail = truncated_pareto_moment(a, kf, cap)?;
                Some((1.0 - p) * atom.powi(k as i32) + p * tail)
            }
            _ => self.moment(k),
        }
    }

    /// `E[ω^k]`, `None` when infinite.
    pub fn moment(&self, k: u32) -> Option<f64> {
        let kf = k as f64;
        match *self {
            ConductanceLaw::Constant(c) => Some(c.powi(k as i32)),
            ConductanceLaw::Uniform { lo, hi } => {
                if hi == lo {
                    Some(lo.powi(k as i32))
                } else {
                    Some((hi.powf(kf + 1.0) - lo.powf(kf + 1.0)) / ((kf + 1.0) * (hi - lo)))
                }
            }
            ConductanceLaw::TwoPoint { p, low, high } => {
                Some((1.0 - p) * low.powi(k as i32) + p * high.powi(k as i32))
            }
            ConductanceLaw::BoundedPareto { atom, .. } => {
                self.underlying_moment(k).map(|m| m / atom.powi(k as i32))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1).expect("first moment finite for every supported law")
    }

    pub fn variance(&self) -> Option<f64> {
        let m1 = self.mean();
        self.moment(2).map(|m2| (m2 - m1 * m1).max(0.0))
    }

    /// `ℙ[p_ω(0) > η]` for the total jump rate of a site in dimension `d`,
    /// when it has a closed form.
    pub fn bad_probability(&self, d: usize, eta: f64) -> Option<f64> {
        let m = 2 * d;
        match *self {
            ConductanceLaw::Constant(c) => Some(if m as f64 * c > eta { 1.0 } else { 0.0 }),
            ConductanceLaw::TwoPoint { p, low, high } => {
                let mut q = 0.0;
                for k in 0..=m {
                    let total = (m - k) as f64 * low + k as f64 * high;
                    if total > eta {
                        q += binomial(m, k) * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32);
                    }
                }
                Some(q)
            }
            ConductanceLaw::Uniform { lo, hi } => {
                if hi == lo {
                    return Some(if m as f64 * lo > eta { 1.0 } else { 0.0 });
                }
                let x = (eta - m as f64 * lo) / (hi - lo);
                Some(1.0 - irwin_hall_cdf(m, x))
            }
            ConductanceLaw::BoundedPareto { .. } => None,
        }
    }

    /// Smallest η with `ℙ[p_ω(0) > η] < (2d)^{−(2d+1)}`, when computable.
    pub fn default_eta(&self, d: usize) -> Option<f64> {
        let m = 2 * d;
        let threshold = (m as f64).powi(-(m as i32 + 1));
        match *self {
            ConductanceLaw::Constant(c) => Some(m as f64 * c),
            ConductanceLaw::TwoPoint { low, high, .. } => (0..=m)
                .map(|k| (m - k) as f64 * low.min(high) + k as f64 * low.max(high))
                .find(|&v| self.bad_probability(d, v).unwrap() < threshold),
            ConductanceLaw::Uniform { lo, hi } => {
                let (mut a, mut b) = (m as f64 * lo, m as f64 * hi);
                if self.bad_probability(d, a).unwrap() < threshold {
                    return Some(a);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if self.bad_probability(d, mid).unwrap() < threshold {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                Some(b)
            }
            ConductanceLaw::BoundedPareto { .. } => None,
        }
    }
}

fn truncated_pareto_moment(a: f64, k: f64, cap: f64) -> Option<f64> {
    if cap.is_infinite() {
        return if k < a { Some(a / (a - k)) } else { None };
    }
    let norm = 1.0 - cap.powf(-a);
    let raw = if (a - k).abs() < 1e-12 {
        a * cap.ln()
    } else {
        a / (a - k) * (1.0 - cap.powf(k - a))
    };
    Some(raw / norm)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// CDF of a sum of `m` independent uniforms on `[0, 1]`.
fn irwin_hall_cdf(m: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= m as f64 {
        return 1.0;
    }
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let mut acc = 0.0;
    for k in 0..=(x.floor() as usize) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(m, k) * (x - k as f64).powi(m as i32);
    }
    (acc / fact).clamp(0.0, 1.0)
}

impl fmt::Display for ConductanceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConductanceLaw::Constant(c) => write!(f, "constant:{c}"),
            ConductanceLaw::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            ConductanceLaw::TwoPoint { p, low, high } => write!(f, "twopoint:{p},{low},{high}"),
            ConductanceLaw::BoundedPareto { p, eps, cap, atom } => {
                let cap = if cap.is_infinite() { "inf".to_string() } else { cap.to_string() };
                if atom == 1.0 {
                    write!(f, "pareto:{p},{eps},{cap}")
                } else {
                    write!(f, "pareto:{p},{eps},{cap},{atom}")
                }
            }
        }
    }
}

impl FromStr for ConductanceLaw {
    type Err = Error;

    /// Parses `constant:c`, `uniform:a,b`, `twopoint:p,low,high`, `pareto:p,eps,cap[,atom]`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parameter(format!("law descriptor '{s}' lacks ':'")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| match t.trim() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                t => t
                    .parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("'{t}' is not a number in law '{s}'"))),
            })
            .collect::<Result<_>>()?;
        let arity = |n: &[usize]| {
            if n.contains(&nums.len()) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("law '{kind}' takes {n:?} parameters, got {}", nums.len())))
            }
        };
        let law = match kind.trim().to_ascii_lowercase().as_str() {
            "constant" => {
                arity(&[1])?;
                ConductanceLaw::Constant(nums[0])
            }
            "uniform" => {
                arity(&[2])?;
                ConductanceLaw::Uniform { lo: nums[0], hi: nums[1] }
            }
            "twopoint" => {
                arity(&[3])?;
                ConductanceLaw::TwoPoint { p: nums[0], low: nums[1], high: nums[2] }
            }
            "pareto" => {
                arity(&[3, 4])?;
                ConductanceLaw::BoundedPareto {
                    p: nums[0],
                    eps: nums[1],
                    cap: nums[2],
                    atom: nums.get(3).copied().unwrap_or(1.0),
                }
            }
            other => return Err(Error::Parameter(format!("unknown law '{other}'"))),
        };
        law.validate()?;
        Ok(law)
    }
}
