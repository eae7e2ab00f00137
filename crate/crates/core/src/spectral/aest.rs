use crate::environment::ConductanceField;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::operators::FieldFunction;

/// The three corrector-based approximations of `σ̄²/2`, as torus site averages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AEstimators {
    /// `E[ω_{0,e₁}] − ℰ(φ, φ)`.
    pub a0: f64,
    /// `E[ω_{0,e₁}(1 + φ(θ_{e₁}ω) − φ(ω))]`.
    pub a1: f64,
    /// `½ Σ_{|z|=1} E[ω_{0,z}(e₁·z + φ(θ_zω) − φ(ω))²]`.
    pub a2: f64,
    /// `E[φ²]`.
    pub phi_second_moment: f64,
    /// With `φ = R_μ𝔡`: the larger relative defect of `A₀ = A₁ + μE[φ²] = A₂ + 2μE[φ²]`.
    pub chain_residual: Option<f64>,
}

pub fn a_estimators<T: Real>(field: &ConductanceField<T>, phi: &FieldFunction<T>, mu_used: Option<f64>) -> Result<AEstimators> {
    let l = field.lattice();
    phi.check_len(l.sites())
        .map_err(|_| Error::DimensionMismatch { expected: l.sites(), found: phi.len() })?;
    let d = l.dim();
    let p = phi.values();
    let n = l.sites();
    let (mut mean_e1, mut energy, mut a1, mut a2) = (0.0, 0.0, 0.0, 0.0);
    let parts: Vec<[f64; 4]> = {
        use rayon::prelude::*;
        (0..n.div_ceil(4096))
            .into_par_iter()
            .map(|b| {
                let mut acc = [0.0; 4];
                for x in b * 4096..((b + 1) * 4096).min(n) {
                    let px = p[x].to_f64_lossy();
                    for a in 0..d {
                        let w = field.omega(l.edge(x, a)).to_f64_lossy();
                        let grad = p[l.neighbor(x, a, true)].to_f64_lossy() - px;
                        energy_terms(&mut acc, a == 0, w, grad);
                    }
                }
                acc
            })
            .collect()
    };
    for part in parts {
        mean_e1 += part[0];
        energy += part[1];
        a1 += part[2];
        a2 += part[3];
    }
    let nf = n as f64;
    let (mean_e1, energy, a1, a2) = (mean_e1 / nf, energy / nf, a1 / nf, a2 / nf);
    let a0 = mean_e1 - energy;
    let m2 = phi.mean_square();
    let chain_residual = mu_used.map(|mu| {
        let scale = a0.abs().max(f64::MIN_POSITIVE);
        ((a0 - a1 - mu * m2).abs() / scale).max((a0 - a2 - 2.0 * mu * m2).abs() / scale)
    });
    Ok(AEstimators { a0, a1, a2, phi_second_moment: m2, chain_residual })
}

#[inline]
fn energy_terms(acc: &mut [f64; 4], first_axis: bool, w: f64, grad: f64) {
    acc[1] += w * grad * grad;
    if first_axis {
        acc[0] += w;
        acc[2] += w * (1.0 + grad);
        acc[3] += w * (1.0 + grad) * (1.0 + grad);
    } else {
        acc[3] += w * grad * grad;
    }
}
