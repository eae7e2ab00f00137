use super::eigen::symmetric_eigen;
use super::DENSE_LIMIT;
use crate::environment::Lattice;
use crate::error::{Error, Result};

/// Spectral gap of the free-boundary box `B_n = {−n, …, n}^d` with unit weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxGap {
    pub d: usize,
    pub n: usize,
    /// Smallest nonzero eigenvalue of the box graph Laplacian.
    pub lambda2: f64,
    /// `4 / (n² λ₂)`.
    pub c_s: f64,
}

/// Measures `λ₂` of the box graph Laplacian by dense decomposition.
pub fn box_spectral_gap(d: usize, n: usize) -> Result<BoxGap> {
    if d == 0 || n == 0 {
        return Err(Error::Parameter(format!("box needs d ≥ 1 and n ≥ 1, got d={d}, n={n}")));
    }
    let side = 2 * n + 1;
    let vertices = side
        .checked_pow(d as u32)
        .filter(|&v| v <= DENSE_LIMIT)
        .ok_or(Error::TooLarge { sites: side.saturating_pow(d as u32), limit: DENSE_LIMIT })?;
    // reuse torus indexing with period `side`; only non-wrapping neighbours are joined
    let lat = Lattice::new(d, side.max(3))?;
    let mut a = vec![0.0f64; vertices * vertices];
    for x in 0..vertices {
        for axis in 0..d {
            if lat.coord(x, axis) + 1 < side {
                let y = lat.neighbor(x, axis, true);
                a[x * vertices + y] -= 1.0;
                a[y * vertices + x] -= 1.0;
                a[x * vertices + x] += 1.0;
                a[y * vertices + y] += 1.0;
            }
        }
    }
    let eig = symmetric_eigen(a, vertices);
    let lambda2 = eig.values[1];
    Ok(BoxGap { d, n, lambda2, c_s: 4.0 / ((n * n) as f64 * lambda2) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_closed_form() {
        for n in [1usize, 2, 5, 20] {
            let g = box_spectral_gap(1, n).unwrap();
            let expect = 2.0 * (1.0 - (std::f64::consts::PI / (2 * n + 1) as f64).cos());
            assert!((g.lambda2 - expect).abs() < 1e-12, "n={n}");
        }
        assert!((box_spectral_gap(1, 1).unwrap().lambda2 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn product_box_shares_path_gap() {
        let g2 = box_spectral_gap(2, 3).unwrap();
        let g1 = box_spectral_gap(1, 3).unwrap();
        assert!((g2.lambda2 - g1.lambda2).abs() < 1e-12);
    }

    #[test]
    fn oversize_box_rejected() {
        assert!(matches!(box_spectral_gap(3, 8), Err(Error::TooLarge { .. })));
        assert!(box_spectral_gap(0, 3).is_err());
    }
}
