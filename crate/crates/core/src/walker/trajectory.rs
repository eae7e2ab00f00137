use std::io::Write;

use rand::Rng;

use crate::environment::{ConductanceField, Lattice};
use crate::error::{Error, Result};
use crate::functionals::LocalFunctional;
use crate::num::{CompensatedSum, Real};

/// Cumulative jump rates per site, shared by both walk kinds so matched streams
/// produce identical paths whenever the rates coincide.
#[derive(Clone, Debug)]
pub struct RateTable {
    lattice: Lattice,
    /// `cum[x·2d + k] = Σ_{j ≤ k} r(x, j)`.
    cum: Vec<f64>,
}

impl RateTable {
    pub fn from_field<T: Real>(field: &ConductanceField<T>) -> Self {
        let lattice = field.lattice().clone();
        let m = lattice.degree();
        let mut cum = Vec::with_capacity(lattice.sites() * m);
        for x in 0..lattice.sites() {
            let mut acc = 0.0;
            for k in 0..m {
                acc += field.omega_dir(x, k).to_f64_lossy();
                cum.push(acc);
            }
        }
        Self { lattice, cum }
    }

    /// All rates 1.
    pub fn simple(lattice: &Lattice) -> Self {
        let m = lattice.degree();
        let cum = (0..lattice.sites()).flat_map(|_| (1..=m).map(|k| k as f64)).collect();
        Self { lattice: lattice.clone(), cum }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    #[inline]
    pub fn total(&self, x: usize) -> f64 {
        self.cum[x * self.lattice.degree() + self.lattice.degree() - 1]
    }

    #[inline]
    fn pick(&self, x: usize, u: f64) -> usize {
        let m = self.lattice.degree();
        let row = &self.cum[x * m..(x + 1) * m];
        let target = u * row[m - 1];
        row.iter().position(|&c| target < c).unwrap_or(m - 1)
    }
}

/// Piecewise-constant path: the walker sits at `sites[i]` on `[times[i], times[i+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    d: usize,
    pub start: usize,
    pub horizon: f64,
    /// Jump times, strictly increasing, all ≤ horizon.
    pub times: Vec<f64>,
    /// Site after each jump.
    pub sites: Vec<usize>,
    /// Direction of each jump (`2a` is `+e_a`, `2a+1` is `−e_a`).
    pub moves: Vec<u8>,
    /// Unwrapped displacement after each jump, `d` entries per jump.
    disp: Vec<i32>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn jumps(&self) -> usize {
        self.times.len()
    }

    /// Number of jumps at or before `t`.
    fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Range(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    pub fn site_at(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(match self.index_at(t) {
            0 => self.start,
            i => self.sites[i - 1],
        })
    }

    /// Net jump vector up to time `t`, not reduced mod n.
    pub fn displacement_at(&self, t: f64) -> Result<Vec<i64>> {
        self.check_time(t)?;
        Ok(match self.index_at(t) {
            0 => vec![0; self.d],
            i => self.disp[(i - 1) * self.d..i * self.d].iter().map(|&c| c as i64).collect(),
        })
    }

    pub fn squared_displacement_at(&self, t: f64) -> Result<f64> {
        Ok(self.displacement_at(t)?.iter().map(|&c| (c * c) as f64).sum())
    }

    /// `(start, end, site)` for each sojourn intersected with `[0, t]`.
    pub fn sojourns(&self, t: f64) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.sojourns_between(0.0, t)
    }

    /// Sojourns intersected with `[a, b]`.
    pub fn sojourns_between(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let first = self.index_at(a);
        let last = self.index_at(b);
        (first..=last).map(move |i| {
            let s = if i == first { a } else { self.times[i - 1] };
            let e = if i < last { self.times[i] } else { b };
            let x = if i == 0 { self.start } else { self.sites[i - 1] };
            (s, e, x)
        })
    }

    /// Time spent at each site up to the horizon.
    pub fn occupation(&self, sites: usize) -> Vec<f64> {
        let mut occ = vec![0.0; sites];
        for (s, e, x) in self.sojourns(self.horizon) {
            occ[x] += e - s;
        }
        occ
    }

    /// CSV: `time,site,dx0,…` starting with the initial position.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "time,site")?;
        for a in 0..self.d {
            write!(out, ",dx{a}")?;
        }
        writeln!(out)?;
        write!(out, "0.0,{}", self.start)?;
        for _ in 0..self.d {
            write!(out, ",0")?;
        }
        writeln!(out)?;
        for i in 0..self.jumps() {
            write!(out, "{:?},{}", self.times[i], self.sites[i])?;
            for c in &self.disp[i * self.d..(i + 1) * self.d] {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Exact event-driven walk: exponential holding times with rate `p(x)`, then a
/// direction chosen proportionally to the rates.
pub fn simulate<R: Rng + ?Sized>(rates: &RateTable, start: usize, horizon: f64, rng: &mut R) -> Result<Trajectory> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Range(format!("horizon {horizon} must be finite and > 0")));
    }
    let l = rates.lattice();
    l.check_site(start)?;
    let d = l.dim();
    let mut traj = Trajectory { d, start, horizon, times: vec![], sites: vec![], moves: vec![], disp: vec![] };
    let mut t = 0.0;
    let mut x = start;
    let mut pos = vec![0i32; d];
    loop {
        let u: f64 = rng.random();
        t += -(-u).ln_1p() / rates.total(x);
        if t > horizon {
            break;
        }
        let k = rates.pick(x, rng.random());
        x = l.step(x, k);
        pos[k / 2] += if k % 2 == 0 { 1 } else { -1 };
        traj.times.push(t);
        traj.sites.push(x);
        traj.moves.push(k as u8);
        traj.disp.extend_from_slice(&pos);
    }
    Ok(traj)
}

/// Variable-speed walk among the conductances of `field`.
pub fn simulate_vsrw<T: Real, R: Rng + ?Sized>(field: &ConductanceField<T>, start: usize, horizon: f64, rng: &mut R) -> Result<Trajectory> {
    simulate(&RateTable::from_field(field), start, horizon, rng)
}

/// Simple walk, every rate 1.
pub fn simulate_srw<R: Rng + ?Sized>(lattice: &Lattice, start: usize, horizon: f64, rng: &mut R) -> Result<Trajectory> {
    simulate(&RateTable::simple(lattice), start, horizon, rng)
}

/// `f(θ_{X_t} ω)` at each requested time.
pub fn env_samples<T: Real>(field: &ConductanceField<T>, f: &LocalFunctional, traj: &Trajectory, times: &[f64]) -> Result<Vec<f64>> {
    f.check_fits(field.lattice(), 0)?;
    let mut buf = Vec::new();
    times.iter().map(|&t| Ok(f.eval_unchecked(field, traj.site_at(t)?, &mut buf))).collect()
}

/// `Z_t = ∫_0^t f(ω(s)) ds`, exact on the piecewise-constant path.
pub fn additive_functional<T: Real>(field: &ConductanceField<T>, f: &LocalFunctional, traj: &Trajectory, t: f64) -> Result<f64> {
    additive_functional_between(field, f, traj, 0.0, t)
}

/// `∫_a^b f(ω(s)) ds`.
pub fn additive_functional_between<T: Real>(
    field: &ConductanceField<T>,
    f: &LocalFunctional,
    traj: &Trajectory,
    a: f64,
    b: f64,
) -> Result<f64> {
    f.check_fits(field.lattice(), 0)?;
    traj.check_time(a)?;
    traj.check_time(b)?;
    if a > b {
        return Err(Error::Range(format!("interval [{a}, {b}] is reversed")));
    }
    let mut buf = Vec::new();
    let mut acc = CompensatedSum::new();
    for (s, e, x) in traj.sojourns_between(a, b) {
        if e > s {
            acc.add((e - s) * f.eval_unchecked(field, x, &mut buf));
        }
    }
    Ok(acc.value())
}
