use crate::error::{Error, Result};

/// Periodic hypercubic lattice `(Z/nZ)^d` with nearest-neighbour edges.
///
/// Sites are numbered `x = Σ c_i n^i`. Edge `x·d + a` joins `x` and `x + e_a`,
/// so every undirected edge has exactly one index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    d: usize,
    n: usize,
    sites: usize,
    strides: Vec<usize>,
}

/// An edge described relative to a reference site: it joins `base` and `base + e_axis`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeOffset {
    pub base: Vec<i64>,
    pub axis: usize,
}

impl EdgeOffset {
    pub fn new(base: Vec<i64>, axis: usize) -> Self {
        Self { base, axis }
    }

    /// Edge from the origin to `±e_axis` in dimension `d`.
    pub fn unit(d: usize, axis: usize, forward: bool) -> Self {
        let mut base = vec![0; d];
        if !forward {
            base[axis] = -1;
        }
        Self { base, axis }
    }

    /// Largest coordinate magnitude touched by either endpoint.
    pub fn reach(&self) -> usize {
        self.base
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let far = if i == self.axis { c + 1 } else { c };
                c.unsigned_abs().max(far.unsigned_abs()) as usize
            })
            .max()
            .unwrap_or(0)
    }
}

impl Lattice {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Lattice("dimension must be ≥ 1".into()));
        }
        if n < 3 {
            return Err(Error::Lattice("n must be ≥ 3".into()));
        }
        let mut strides = Vec::with_capacity(d);
        let mut sites: usize = 1;
        for _ in 0..d {
            strides.push(sites);
            sites = sites
                .checked_mul(n)
                .filter(|&s| s.checked_mul(d).is_some())
                .ok_or_else(|| Error::Lattice(format!("{n}^{d} sites overflow")))?;
        }
        Ok(Self { d, n, sites, strides })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn period(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.sites
    }

    #[inline]
    pub fn edges(&self) -> usize {
        self.sites * self.d
    }

    /// Number of neighbours of every site.
    #[inline]
    pub fn degree(&self) -> usize {
        2 * self.d
    }

    #[inline]
    pub fn coord(&self, site: usize, axis: usize) -> usize {
        (site / self.strides[axis]) % self.n
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        (0..self.d).map(|a| self.coord(site, a)).collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        coords.iter().zip(&self.strides).map(|(&c, &s)| (c % self.n) * s).sum()
    }

    /// Site of an integer offset from the origin, reduced mod n.
    pub fn site_of(&self, offset: &[i64]) -> usize {
        self.shift(0, offset)
    }

    #[inline]
    pub fn neighbor(&self, site: usize, axis: usize, forward: bool) -> usize {
        let c = self.coord(site, axis);
        let s = self.strides[axis];
        if forward {
            if c + 1 == self.n {
                site - c * s
            } else {
                site + s
            }
        } else if c == 0 {
            site + (self.n - 1) * s
        } else {
            site - s
        }
    }

    /// Neighbour in direction `k`: `k = 2a` is `+e_a`, `k = 2a + 1` is `−e_a`.
    #[inline]
    pub fn step(&self, site: usize, k: usize) -> usize {
        self.neighbor(site, k / 2, k % 2 == 0)
    }

    pub fn shift(&self, site: usize, offset: &[i64]) -> usize {
        debug_assert_eq!(offset.len(), self.d);
        let n = self.n as i64;
        let mut out = 0;
        for a in 0..self.d {
            let c = self.coord(site, a) as i64 + offset[a];
            out += (c.rem_euclid(n) as usize) * self.strides[a];
        }
        out
    }

    /// Group operation of the torus: coordinates added mod n.
    pub fn add(&self, x: usize, y: usize) -> usize {
        let mut out = 0;
        for a in 0..self.d {
            out += ((self.coord(x, a) + self.coord(y, a)) % self.n) * self.strides[a];
        }
        out
    }

    #[inline]
    pub fn edge(&self, site: usize, axis: usize) -> usize {
        site * self.d + axis
    }

    /// Edge index reached from `site` in direction `k` (see [`Lattice::step`]).
    #[inline]
    pub fn edge_in_direction(&self, site: usize, k: usize) -> usize {
        let axis = k / 2;
        if k % 2 == 0 {
            self.edge(site, axis)
        } else {
            self.edge(self.neighbor(site, axis, false), axis)
        }
    }

    pub fn edge_at(&self, site: usize, offset: &EdgeOffset) -> usize {
        self.edge(self.shift(site, &offset.base), offset.axis)
    }

    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        let site = edge / self.d;
        let axis = edge % self.d;
        (site, self.neighbor(site, axis, true))
    }

    pub fn edge_between(&self, x: usize, y: usize) -> Option<usize> {
        (0..self.degree())
            .find(|&k| self.step(x, k) == y)
            .map(|k| self.edge_in_direction(x, k))
    }

    /// `(edge, neighbour)` pairs for the 2d directions of `site`, in direction order.
    pub fn incident(&self, site: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.degree()).map(move |k| (self.edge_in_direction(site, k), self.step(site, k)))
    }

    /// Minimal-image displacement from `from` to `to`.
    pub fn displacement(&self, from: usize, to: usize) -> Vec<i64> {
        let n = self.n as i64;
        (0..self.d)
            .map(|a| {
                let mut c = self.coord(to, a) as i64 - self.coord(from, a) as i64;
                c = c.rem_euclid(n);
                if 2 * c > n {
                    c -= n;
                }
                c
            })
            .collect()
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.sites {
            Ok(())
        } else {
            Err(Error::Range(format!("site {site} outside torus of {} sites", self.sites)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_tori() {
        assert!(Lattice::new(2, 2).is_err());
        assert!(Lattice::new(0, 5).is_err());
        assert!(Lattice::new(1, 3).is_ok());
    }

    #[test]
    fn every_site_has_2d_distinct_incident_edges() {
        for &(d, n) in &[(1, 3), (2, 4), (3, 3)] {
            let lat = Lattice::new(d, n).unwrap();
            let mut count = vec![0usize; lat.edges()];
            for x in 0..lat.sites() {
                let mut edges: Vec<usize> = lat.incident(x).map(|(e, _)| e).collect();
                assert_eq!(edges.len(), 2 * d);
                edges.sort();
                edges.dedup();
                assert_eq!(edges.len(), 2 * d);
                for e in edges {
                    count[e] += 1;
                }
            }
            assert!(count.iter().all(|&c| c == 2));
        }
    }

    #[test]
    fn edge_lookup_is_symmetric() {
        let lat = Lattice::new(2, 5).unwrap();
        for e in 0..lat.edges() {
            let (x, y) = lat.endpoints(e);
            assert_eq!(lat.edge_between(x, y), Some(e));
            assert_eq!(lat.edge_between(y, x), Some(e));
        }
    }

    #[test]
    fn coords_roundtrip_and_shift() {
        let lat = Lattice::new(3, 4).unwrap();
        for x in 0..lat.sites() {
            assert_eq!(lat.site(&lat.coords(x)), x);
        }
        let x = lat.site(&[3, 0, 2]);
        assert_eq!(lat.shift(x, &[1, -1, 2]), lat.site(&[0, 3, 0]));
        assert_eq!(lat.displacement(x, lat.site(&[0, 3, 0])), vec![1, -1, 2]);
    }

    #[test]
    fn edge_offset_reach() {
        assert_eq!(EdgeOffset::unit(1, 0, true).reach(), 1);
        assert_eq!(EdgeOffset::unit(1, 0, false).reach(), 1);
        assert_eq!(EdgeOffset::new(vec![2], 0).reach(), 3);
        assert_eq!(EdgeOffset::new(vec![-1, 0], 1).reach(), 1);
    }
}
