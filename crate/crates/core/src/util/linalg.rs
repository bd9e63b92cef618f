//! Dense Hermitian eigenproblems for the small (2x2 .. 5x5) matrices used by
//! the density-matrix checks and the Uhlmann fidelity.
//!
//! Cyclic complex Jacobi iteration; adequate and bit-stable for n <= 8.

use num_complex::Complex64 as C64;

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        CMat { dim, data: vec![C64::default(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim);
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::default() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// max_ij |A_ij - conj(A_ji)|
    pub fn hermiticity_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigen-decomposition of a Hermitian matrix. Returns (eigenvalues,
/// eigenvectors as columns of a unitary matrix), eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.dim;
    let mut a = m.clone();
    // symmetrize away roundoff
    for i in 0..n {
        for j in 0..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = avg;
        }
    }
    let mut v = CMat::identity(n);

    for _sweep in 0..100 {
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + a.trace().norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // complex Jacobi rotation zeroing a_pq
                let phase = apq / apq.norm(); // e^{i arg}
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // columns p,q update: G = [[c, s*e^{i phi}], [-s*e^{-i phi}, c]]
                let sp = s * phase;
                let spc = s * phase.conj();
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - spc * akq;
                    a[(k, q)] = sp * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sp * aqk;
                    a[(q, k)] = spc * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - spc * vkq;
                    v[(k, q)] = sp * vkp + c * vkq;
                }
            }
        }
    }

    let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    // sort ascending, permute columns of v
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
    let mut vs = CMat::zeros(n);
    for (newcol, &oldcol) in idx.iter().enumerate() {
        for k in 0..n {
            vs[(k, newcol)] = v[(k, oldcol)];
        }
    }
    vals = sorted;
    (vals, vs)
}

/// Hermitian PSD square root; negative eigenvalues (roundoff) clamp to zero.
pub fn sqrtm_psd(m: &CMat) -> CMat {
    let n = m.dim;
    let (vals, vecs) = eigh(m);
    let mut out = CMat::zeros(n);
    for (k, &lam) in vals.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += s * vecs[(i, k)] * vecs[(j, k)].conj();
            }
        }
    }
    out
}

/// Uhlmann fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)) for density matrices.
pub fn fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let sr = sqrtm_psd(rho);
    let inner = sr.mul(sigma).mul(&sr);
    let (vals, _) = eigh(&inner);
    vals.iter().map(|&l| l.max(0.0).sqrt()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_diagonal() {
        let m = CMat::from_rows(&[
            &[C64::new(2.0, 0.0), C64::default()],
            &[C64::default(), C64::new(-1.0, 0.0)],
        ]);
        let (vals, _) = eigh(&m);
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_pauli_y_like() {
        // [[0, -i], [i, 0]] has eigenvalues +-1
        let m = CMat::from_rows(&[
            &[C64::default(), C64::new(0.0, -1.0)],
            &[C64::new(0.0, 1.0), C64::default()],
        ]);
        let (vals, vecs) = eigh(&m);
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // residual check A v = lambda v
        for k in 0..2 {
            for i in 0..2 {
                let mut r = C64::default();
                for j in 0..2 {
                    r += m[(i, j)] * vecs[(j, k)];
                }
                r -= vals[k] * vecs[(i, k)];
                assert!(r.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_pure_states() {
        // F(|0><0|, |+><+|) = 1/sqrt(2)
        let p0 = CMat::from_rows(&[
            &[C64::new(1.0, 0.0), C64::default()],
            &[C64::default(), C64::default()],
        ]);
        let h = C64::new(0.5, 0.0);
        let plus = CMat::from_rows(&[&[h, h], &[h, h]]);
        let f = fidelity(&p0, &plus);
        assert!((f - 0.5f64.sqrt()).abs() < 1e-10, "f = {f}");
    }

    #[test]
    fn fidelity_identical_is_one() {
        let h = C64::new(0.5, 0.0);
        let plus = CMat::from_rows(&[&[h, h], &[h, h]]);
        assert!((fidelity(&plus, &plus) - 1.0).abs() < 1e-10);
    }
}
