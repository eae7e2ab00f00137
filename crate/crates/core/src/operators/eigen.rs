//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit QL with Wilkinson shifts (the classic tred2/tql2 pair).
//!
//! Matrices are column-major, `a[c·n + r]`; the inner loops of both phases run
//! down columns, which keeps them contiguous.

use crate::num::Real;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T: Real> {
    pub values: Vec<T>,
    /// Orthonormal eigenvectors, column `i` pairs with `values[i]`.
    pub vectors: Vec<T>,
    pub n: usize,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn vector(&self, i: usize) -> &[T] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }
}

/// Decomposes the symmetric `n × n` matrix `a` (only its full storage is read).
pub fn symmetric_eigen<T: Real>(a: Vec<T>, n: usize) -> SymmetricEigen<T> {
    assert_eq!(a.len(), n * n, "matrix storage does not match order");
    if n == 0 {
        return SymmetricEigen { values: vec![], vectors: vec![], n };
    }
    let mut v = a;
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e, n);
    tql2(&mut v, &mut d, &mut e, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (new, &old) in order.iter().enumerate() {
        vectors[new * n..(new + 1) * n].copy_from_slice(&v[old * n..(old + 1) * n]);
    }
    SymmetricEigen { values, vectors, n }
}

#[inline(always)]
fn ix(n: usize, r: usize, c: usize) -> usize {
    c * n + r
}

fn tred2<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) {
    let z = T::zero();
    for j in 0..n {
        d[j] = v[ix(n, n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = z;
        let mut h = z;
        for k in 0..i {
            scale = scale + d[k].abs();
        }
        if scale == z {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[ix(n, i - 1, j)];
                v[ix(n, i, j)] = z;
                v[ix(n, j, i)] = z;
            }
        } else {
            for k in 0..i {
                d[k] = d[k] / scale;
                h = h + d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > z {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = z;
            }
            for j in 0..i {
                f = d[j];
                v[ix(n, j, i)] = f;
                g = e[j] + v[ix(n, j, j)] * f;
                let col = &v[j * n..j * n + i];
                for k in (j + 1)..i {
                    g = g + col[k] * d[k];
                    e[k] = e[k] + col[k] * f;
                }
                e[j] = g;
            }
            f = z;
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                let (fj, gj) = (d[j], e[j]);
                let col = &mut v[j * n..j * n + i];
                for k in j..i {
                    col[k] = col[k] - (fj * e[k] + gj * d[k]);
                }
                d[j] = v[ix(n, i - 1, j)];
                v[ix(n, i, j)] = z;
            }
        }
        d[i] = h;
    }
    // accumulate transformations
    for i in 0..n - 1 {
        v[ix(n, n - 1, i)] = v[ix(n, i, i)];
        v[ix(n, i, i)] = T::one();
        let h = d[i + 1];
        if h != z {
            for k in 0..=i {
                d[k] = v[ix(n, k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = z;
                for k in 0..=i {
                    g = g + v[ix(n, k, i + 1)] * v[ix(n, k, j)];
                }
                for k in 0..=i {
                    let idx = ix(n, k, j);
                    v[idx] = v[idx] - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[ix(n, k, i + 1)] = z;
        }
    }
    for j in 0..n {
        d[j] = v[ix(n, n - 1, j)];
        v[ix(n, n - 1, j)] = z;
    }
    v[ix(n, n - 1, n - 1)] = T::one();
    e[0] = z;
}

fn tql2<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) {
    let z = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = z;
    let mut f = z;
    let mut tst1 = z;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < z {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = z;
                let mut s2 = z;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = v.split_at_mut((i + 1) * n);
                    let ci = &mut left[i * n..];
                    let ci1 = &mut right[..n];
                    for k in 0..n {
                        let hk = ci1[k];
                        ci1[k] = s * ci[k] + c * hk;
                        ci[k] = c * ci[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(eig: &SymmetricEigen<f64>) -> Vec<f64> {
        let n = eig.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            let v = eig.vector(i);
            for c in 0..n {
                for r in 0..n {
                    a[c * n + r] += eig.values[i] * v[r] * v[c];
                }
            }
        }
        a
    }

    #[test]
    fn small_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1, 3
        let eig = symmetric_eigen(vec![2.0f64, 1.0, 1.0, 2.0], 2);
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn random_matrix_reconstructs() {
        let n = 37;
        let mut a = vec![0.0; n * n];
        let mut s = 12345u64;
        for c in 0..n {
            for r in 0..=c {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                a[c * n + r] = x;
                a[r * n + c] = x;
            }
        }
        let eig = symmetric_eigen(a.clone(), n);
        let back = reconstruct(&eig);
        let err = a.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = eig.vector(i).iter().zip(eig.vector(j)).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn diagonal_and_degenerate_inputs() {
        let eig = symmetric_eigen(vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0], 3);
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        let eig = symmetric_eigen(vec![5.0f32], 1);
        assert_eq!(eig.values, vec![5.0]);
        let eig = symmetric_eigen(vec![0.0f64; 16], 4);
        assert!(eig.values.iter().all(|&x| x == 0.0));
    }
}
