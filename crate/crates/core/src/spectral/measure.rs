use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::num::{CompensatedSum, Real};
use crate::operators::{Decomposition, FieldFunction, TorusOperator, ZERO_EIGENVALUE};

/// Largest weight tolerated on a zero eigenvalue by the functionals that divide by `λ`.
pub const NONERGODIC_WEIGHT: f64 = 1e-10;

/// Whether the site mean is removed before projecting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centering {
    Center,
    Raw,
}

/// Atomic measure `Σ w_i δ_{λ_i}` of `−L` projected on a function.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    /// Site mean removed before projecting (0 in raw mode).
    removed_mean: f64,
}

#[inline]
fn sum(it: impl Iterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(it);
    acc.value()
}

impl SpectralMeasure {
    /// Atoms are sorted by `λ`; negative weights or eigenvalues are rejected.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(a) = atoms.iter().find(|(l, w)| !(*l >= 0.0 && *w >= 0.0) || !l.is_finite() || !w.is_finite()) {
            return Err(Error::Parameter(format!("atom {a:?} needs finite λ ≥ 0 and w ≥ 0")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { atoms, removed_mean: 0.0 })
    }

    pub fn zero() -> Self {
        Self { atoms: vec![], removed_mean: 0.0 }
    }

    /// Measure of `g` under a decomposition that can be reused across functions.
    pub fn from_decomposition<T: Real>(dec: &Decomposition<T>, g: &FieldFunction<T>, centering: Centering) -> Result<Self> {
        g.check_len(dec.sites())?;
        let (g, removed_mean) = match centering {
            Centering::Center => (g.centered(), g.mean()),
            Centering::Raw => (g.clone(), 0.0),
        };
        let mut atoms = dec.atoms(&g);
        if centering == Centering::Center {
            // positive conductances make the torus connected: the kernel is the constants,
            // so anything left there after centering is roundoff
            atoms.retain(|a| a.0 >= ZERO_EIGENVALUE);
        }
        let mut m = Self::new(atoms)?;
        m.removed_mean = removed_mean;
        Ok(m)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn removed_mean(&self) -> f64 {
        self.removed_mean
    }

    pub fn total_mass(&self) -> f64 {
        sum(self.atoms.iter().map(|a| a.1))
    }

    /// Weight carried by eigenvalues below the zero threshold.
    pub fn mass_at_zero(&self) -> f64 {
        sum(self.atoms.iter().filter(|a| a.0 < ZERO_EIGENVALUE).map(|a| a.1))
    }

    fn ergodic_atoms(&self) -> Result<impl Iterator<Item = (f64, f64)> + '_> {
        if let Some(&(lambda, weight)) = self.atoms.iter().find(|a| a.0 < ZERO_EIGENVALUE && a.1 > NONERGODIC_WEIGHT) {
            return Err(Error::Nonergodic { lambda, weight });
        }
        Ok(self.atoms.iter().copied().filter(|a| a.0 >= ZERO_EIGENVALUE))
    }

    /// Merges atoms whose eigenvalues differ by at most `tol · max(1, λ)`.
    pub fn coalesce(&self, tol: f64) -> Self {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut group: Vec<(f64, f64)> = Vec::new();
        let flush = |group: &mut Vec<(f64, f64)>, out: &mut Vec<(f64, f64)>| {
            if group.is_empty() {
                return;
            }
            let w: f64 = group.iter().map(|a| a.1).sum();
            let l = if w > 0.0 {
                group.iter().map(|a| a.0 * a.1).sum::<f64>() / w
            } else {
                group.iter().map(|a| a.0).sum::<f64>() / group.len() as f64
            };
            out.push((l, w));
            group.clear();
        };
        for &a in &self.atoms {
            if let Some(first) = group.first() {
                if a.0 - first.0 > tol * first.0.max(1.0) {
                    flush(&mut group, &mut out);
                }
            }
            group.push(a);
        }
        flush(&mut group, &mut out);
        Self { atoms: out, removed_mean: self.removed_mean }
    }

    /// Drops atoms with weight at most `cutoff`.
    pub fn pruned(&self, cutoff: f64) -> Self {
        Self { atoms: self.atoms.iter().copied().filter(|a| a.1 > cutoff).collect(), removed_mean: self.removed_mean }
    }

    /// `E[(e^{tL} g)²] = Σ w e^{−2λt}`.
    pub fn variance(&self, t: f64) -> f64 {
        sum(self.atoms.iter().map(|&(l, w)| w * (-2.0 * l * t).exp()))
    }

    pub fn variance_curve(&self, times: &[f64]) -> Result<DecayCurve> {
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
            return Err(Error::Range(format!("time {t} must be ≥ 0")));
        }
        Ok(DecayCurve::new(times.to_vec(), times.iter().map(|&t| self.variance(t)).collect()))
    }

    /// `Σ_{λ ≤ δ} w/λ`.
    pub fn spectral_tail(&self, delta: f64) -> Result<f64> {
        Ok(sum(self.ergodic_atoms()?.filter(|a| a.0 <= delta).map(|(l, w)| w / l)))
    }

    /// `σ² = 2 Σ w/λ`.
    pub fn sigma_squared(&self) -> Result<f64> {
        Ok(2.0 * sum(self.ergodic_atoms()?.map(|(l, w)| w / l)))
    }

    /// `2 Σ w (1 − e^{−λt})/(λ² t)`.
    pub fn xi_variance(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Range(format!("time {t} must be > 0")));
        }
        Ok(2.0 * sum(self.ergodic_atoms()?.map(|(l, w)| {
            let x = l * t;
            w / l * (-(-x).exp_m1() / x)
        })))
    }

    /// `E[Z_t²] = 2 Σ w (e^{−λt} − 1 + λt)/λ²`, finite for zero atoms too (limit `w t²`).
    pub fn zt_variance(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Range(format!("time {t} must be ≥ 0")));
        }
        Ok(2.0 * sum(self.atoms.iter().map(|&(l, w)| w * t * t * phi2(l * t))))
    }

    /// `I_{k,μ} = Σ w (μ² + (2−k)λμ)/(λ(λ+μ)²)`.
    pub fn i_k_mu(&self, k: f64, mu: f64) -> Result<f64> {
        if !(mu > 0.0) {
            return Err(Error::Range(format!("μ = {mu} must be > 0")));
        }
        Ok(sum(self.ergodic_atoms()?.map(|(l, w)| w * (mu * mu + (2.0 - k) * l * mu) / (l * (l + mu) * (l + mu)))))
    }

    /// `E[(R_μ g)²] = Σ w/(λ+μ)²`.
    pub fn resolvent_second_moment(&self, mu: f64) -> Result<f64> {
        if !(mu > 0.0) {
            return Err(Error::Range(format!("μ = {mu} must be > 0")));
        }
        Ok(sum(self.atoms.iter().map(|&(l, w)| w / ((l + mu) * (l + mu)))))
    }

    /// `⟨R_μ g, g⟩ = Σ w/(λ+μ)`.
    pub fn resolvent_inner(&self, mu: f64) -> f64 {
        sum(self.atoms.iter().map(|&(l, w)| w / (l + mu)))
    }

    /// Discretizes `λ^{α−1} dλ` on `[lo, hi]` with `count` geometric cells, each carrying its exact mass.
    pub fn power_law(alpha: f64, count: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(0.0 < lo && lo < hi) || count == 0 {
            return Err(Error::Parameter(format!("bad synthetic measure α={alpha}, [{lo}, {hi}], {count} atoms")));
        }
        let ratio = (hi / lo).powf(1.0 / count as f64);
        let atoms = (0..count)
            .map(|i| {
                let a = lo * ratio.powi(i as i32);
                let b = if i + 1 == count { hi } else { a * ratio };
                ((a * b).sqrt(), (b.powf(alpha) - a.powf(alpha)) / alpha)
            })
            .collect();
        Self::new(atoms)
    }

    /// The standard synthetic fixture: 10⁴ atoms on `[10⁻⁶, 1]`.
    pub fn synthetic(alpha: f64) -> Result<Self> {
        Self::power_law(alpha, 10_000, 1e-6, 1.0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lambda,weight")?;
        for (l, w) in &self.atoms {
            writeln!(out, "{l:?},{w:?}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut atoms = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || (i == 0 && t.starts_with("lambda")) {
                continue;
            }
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected 'lambda,weight', got '{t}'") })
            };
            let mut parts = t.split(',');
            let l = parse(parts.next())?;
            let w = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse { line: i + 1, message: "too many columns".into() });
            }
            atoms.push((l, w));
        }
        Self::new(atoms)
    }
}

/// `(e^{−x} − 1 + x)/x²`, stable near 0.
fn phi2(x: f64) -> f64 {
    if x < 1e-3 {
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        ((-x).exp_m1() + x) / (x * x)
    }
}

/// Spectral measure of `g` for `−L`; needs the dense backend.
pub fn spectral_measure<T: Real>(op: &TorusOperator<T>, g: &FieldFunction<T>, centering: Centering) -> Result<SpectralMeasure> {
    let dec = Decomposition::new(op)?;
    SpectralMeasure::from_decomposition(&dec, g, centering)
}

/// `ψ_α(t)`: `t^{α−1}` below 2, `t / ln₊ t` at 2, `t` above, with `ln₊ t = max(1, ln t)`.
pub fn psi_alpha(alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Parameter(format!("ψ_α needs α > 1, got {alpha}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Range(format!("time {t} must be ≥ 0")));
    }
    Ok(if alpha < 2.0 {
        t.powf(alpha - 1.0)
    } else if alpha == 2.0 {
        t / t.ln().max(1.0)
    } else {
        t
    })
}

/// `(time, value)` samples of a decaying quantity, with optional standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl DecayCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        Self { times, values, stderr: None }
    }

    /// Power-law fit over samples with `lo ≤ t ≤ hi`.
    pub fn fit(&self, lo: f64, hi: f64) -> Result<crate::fit::PowerFit> {
        let (t, v): (Vec<f64>, Vec<f64>) =
            self.times.iter().zip(&self.values).filter(|(t, _)| **t >= lo && **t <= hi).map(|(a, b)| (*a, *b)).unzip();
        crate::fit::decay_fit(&t, &v)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value,stderr")?;
        for (i, (t, v)) in self.times.iter().zip(&self.values).enumerate() {
            match &self.stderr {
                Some(se) => writeln!(out, "{t:?},{v:?},{:?}", se[i])?,
                None => writeln!(out, "{t:?},{v:?},")?,
            }
        }
        Ok(())
    }
}
