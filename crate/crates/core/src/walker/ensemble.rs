use rayon::prelude::*;

use super::trajectory::{simulate, RateTable};
use crate::environment::{ConductanceField, ConductanceLaw, Lattice};
use crate::error::{Error, Result};
use crate::num::Moments;
use crate::rng::{derive_seed, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkerKind {
    /// Rates `ω_{x,y}`.
    Conductance,
    /// Rates 1.
    Simple,
}

/// Where each walk starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartRule {
    Origin,
    /// Uniform site, i.e. the environment process starts from its stationary law.
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub law: ConductanceLaw,
    pub lattice: Lattice,
    pub kind: WalkerKind,
    pub realizations: usize,
    pub walks_per_field: usize,
    pub horizon: f64,
    /// Sorted sampling times in `(0, horizon]`.
    pub times: Vec<f64>,
    pub seed: u64,
    pub start: StartRule,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if self.realizations == 0 || self.walks_per_field == 0 {
            return Err(Error::Parameter("realization and walk counts must be ≥ 1".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Parameter(format!("horizon {} must be finite and > 0", self.horizon)));
        }
        if self.times.is_empty() {
            return Err(Error::Parameter("no sampling times".into()));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter("sampling times must be strictly increasing".into()));
        }
        if !(self.times[0] > 0.0) || self.times[self.times.len() - 1] > self.horizon {
            return Err(Error::Parameter(format!("sampling times must lie in (0, {}]", self.horizon)));
        }
        Ok(())
    }
}

/// `E[‖X_t‖²]/t` per sampling time.
#[derive(Clone, Debug, PartialEq)]
pub struct MsdCurve {
    pub times: Vec<f64>,
    pub msd_over_t: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Field-level means of `‖X_t‖²/t`, `[realization][time]`.
    pub per_field: Vec<Vec<f64>>,
}

/// Streams used for the walks of one field; independent of the field's own streams.
pub fn walk_stream(seed: u64, realization: u64, walk: u64) -> crate::rng::Stream {
    stream(derive_seed(seed, "walks"), realization, walk)
}

/// Ensemble MSD/t. Standard errors are taken across field means when there are at
/// least 10 fields, otherwise across all walks pooled.
pub fn msd_estimate(config: &EnsembleConfig) -> Result<MsdCurve> {
    config.validate()?;
    let nt = config.times.len();
    let fields: Vec<(Vec<Moments>, Vec<f64>)> = (0..config.realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<(Vec<Moments>, Vec<f64>)> {
            let table = match config.kind {
                WalkerKind::Conductance => {
                    let field = ConductanceField::<f64>::sample_realization(&config.law, &config.lattice, config.seed, r)?;
                    RateTable::from_field(&field)
                }
                WalkerKind::Simple => RateTable::simple(&config.lattice),
            };
            let mut stats = vec![Moments::default(); nt];
            for w in 0..config.walks_per_field as u64 {
                let mut rng = walk_stream(config.seed, r, w);
                let start = match config.start {
                    StartRule::Origin => 0,
                    StartRule::Uniform => rand::Rng::random_range(&mut rng, 0..config.lattice.sites()),
                };
                let traj = simulate(&table, start, config.horizon, &mut rng)?;
                for (i, &t) in config.times.iter().enumerate() {
                    stats[i].push(traj.squared_displacement_at(t)? / t);
                }
            }
            let means = stats.iter().map(|m| m.mean).collect();
            Ok((stats, means))
        })
        .collect::<Result<_>>()?;

    let mut msd = Vec::with_capacity(nt);
    let mut se = Vec::with_capacity(nt);
    for i in 0..nt {
        if config.realizations >= 10 {
            let m: Moments = fields.iter().map(|f| f.1[i]).collect();
            msd.push(m.mean);
            se.push(m.stderr());
        } else {
            let parts: Vec<Moments> = fields.iter().map(|f| f.0[i]).collect();
            let m = Moments::merge_all(&parts);
            msd.push(m.mean);
            se.push(m.stderr());
        }
    }
    Ok(MsdCurve { times: config.times.clone(), msd_over_t: msd, stderr: se, per_field: fields.into_iter().map(|f| f.1).collect() })
}
