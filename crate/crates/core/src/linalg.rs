//! Shifted linear solves `(S - z I) x = b` for symmetric `S`.
//!
//! Oscillator couplings are banded, so a band LU with partial pivoting is used
//! whenever the bandwidth is small against the dimension; otherwise a dense LU.

use nalgebra::{DMatrix, DVector};

/// Largest |i - j| with a nonzero entry.
pub fn bandwidth(m: &DMatrix<f64>) -> usize {
    let n = m.nrows();
    let mut bw = 0;
    for j in 0..n {
        for i in 0..n {
            if m[(i, j)] != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// Gaussian elimination with partial pivoting in band storage, lower and
/// upper bandwidth `p`. Row interchanges widen the upper band to `2p`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    p: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    /// Factors `m - shift I`. Returns `None` on an exactly zero pivot.
    pub fn factor(m: &DMatrix<f64>, p: usize, shift: f64) -> Option<Self> {
        let n = m.nrows();
        let width = 3 * p + 1;
        let mut lu = Self {
            n,
            p,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let hi = (i + p).min(n - 1);
            for j in lo..=hi {
                let v = m[(i, j)] - if i == j { shift } else { 0.0 };
                lu.set(i, j, v);
            }
        }

        for k in 0..n {
            let last_row = (k + p).min(n - 1);
            let mut piv = k;
            let mut best = lu.get(k, k).abs();
            for i in (k + 1)..=last_row {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            lu.pivots[k] = piv;
            let last_col = (k + 2 * p).min(n - 1);
            if piv != k {
                for j in k..=last_col {
                    let a = lu.get(k, j);
                    let b = lu.get(piv, j);
                    lu.set(k, j, b);
                    lu.set(piv, j, a);
                }
            }
            let pivot = lu.get(k, k);
            for i in (k + 1)..=last_row {
                let factor = lu.get(i, k) / pivot;
                lu.set(i, k, factor);
                if factor != 0.0 {
                    for j in (k + 1)..=last_col {
                        let v = lu.get(i, j) - factor * lu.get(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }
        Some(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.p >= i && j <= i + 2 * self.p);
        i * self.width + (j + self.p - i)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let n = self.n;
        let p = self.p;
        for k in 0..n {
            let piv = self.pivots[k];
            if piv != k {
                b.swap_rows(k, piv);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in (k + 1)..=(k + p).min(n - 1) {
                    b[i] -= self.get(i, k) * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in (k + 1)..=(k + 2 * p).min(n - 1) {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
    }
}

/// A factorization of `S - z I` that can be reused for any number of
/// right-hand sides.
#[derive(Debug, Clone)]
pub enum ShiftedFactor {
    Band(BandLu),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl ShiftedFactor {
    /// `None` when `S - z I` is exactly singular.
    pub fn new(s: &DMatrix<f64>, bandwidth: usize, z: f64) -> Option<Self> {
        let n = s.nrows();
        if n == 0 {
            return None;
        }
        if use_band(n, bandwidth) {
            BandLu::factor(s, bandwidth, z).map(ShiftedFactor::Band)
        } else {
            let mut shifted = s.clone();
            for i in 0..n {
                shifted[(i, i)] -= z;
            }
            let lu = shifted.lu();
            let u = lu.u();
            if u.diagonal().iter().any(|d| *d == 0.0 || !d.is_finite()) {
                return None;
            }
            Some(ShiftedFactor::Dense(lu))
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            ShiftedFactor::Band(lu) => {
                let mut x = b.clone();
                lu.solve_in_place(&mut x);
                x
            }
            ShiftedFactor::Dense(lu) => lu.solve(b).expect("nonsingular by construction"),
        }
    }
}

fn use_band(n: usize, bandwidth: usize) -> bool {
    4 * bandwidth < n
}

/// `S = L D L^T` without pivoting, in the given row order, exploiting a
/// bandwidth. Returns the pivots `D` and `y = L^{-1} v`, so that the leading
/// `j` terms of `sum y_i^2 / D_i` equal `v^T S^{-1} v` on the leading `j`
/// rows and columns.
///
/// Fails with the index of the first zero pivot.
pub fn bordered_quadratic_form(
    s: &DMatrix<f64>,
    v: &DVector<f64>,
    bandwidth: usize,
) -> Result<(Vec<f64>, Vec<f64>), usize> {
    let n = s.nrows();
    let b = bandwidth;
    // L stored column-major in band form: l[(i, k)] for k in i-b..i
    let mut l = DMatrix::<f64>::zeros(n, n.min(b + 1).max(1));
    let mut d = vec![0.0; n];
    let mut y = vec![0.0; n];
    // row-band accessor: L[i][k] at l[(i, i - k - 1)]
    let lget = |l: &DMatrix<f64>, i: usize, k: usize| -> f64 {
        if k >= i || i - k > b {
            0.0
        } else {
            l[(i, i - k - 1)]
        }
    };
    for i in 0..n {
        let lo = i.saturating_sub(b);
        for k in lo..i {
            // L[i][k] = (S[i][k] - sum_{j<k} L[i][j] L[k][j] D[j]) / D[k]
            let jlo = i.saturating_sub(b).max(k.saturating_sub(b));
            let mut s_ik = s[(i, k)];
            for j in jlo..k {
                s_ik -= lget(&l, i, j) * lget(&l, k, j) * d[j];
            }
            l[(i, i - k - 1)] = s_ik / d[k];
        }
        let mut dii = s[(i, i)];
        for k in lo..i {
            let lik = lget(&l, i, k);
            dii -= lik * lik * d[k];
        }
        if dii == 0.0 || !dii.is_finite() {
            return Err(i);
        }
        d[i] = dii;
        let mut yi = v[i];
        for k in lo..i {
            yi -= lget(&l, i, k) * y[k];
        }
        y[i] = yi;
    }
    Ok((d, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -(2.0 * i as f64 + 1.0)
            } else if i.abs_diff(j) == 1 {
                0.7
            } else if i.abs_diff(j) == 2 {
                -0.3
            } else {
                0.0
            }
        })
    }

    #[test]
    fn band_lu_matches_dense_solve() {
        let s = tridiag(40);
        let bw = bandwidth(&s);
        assert_eq!(bw, 2);
        let b = DVector::from_fn(40, |i, _| (i as f64).sin());
        for z in [0.0, -3.7, 10.2] {
            let band = BandLu::factor(&s, bw, z).unwrap();
            let mut x = b.clone();
            band.solve_in_place(&mut x);
            let dense = (&s - DMatrix::identity(40, 40) * z).lu().solve(&b).unwrap();
            assert!((x - dense).amax() < 1e-12);
        }
    }

    #[test]
    fn band_lu_needs_pivoting() {
        // zero leading diagonal forces a row swap
        let s = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 1.0]);
        let lu = BandLu::factor(&s, 1, 0.0).unwrap();
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        assert!((&s * &x - &b).amax() < 1e-14);
    }

    #[test]
    fn singular_shift_is_detected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(ShiftedFactor::new(&s, 0, 2.0).is_none());
    }

    #[test]
    fn bordered_form_partial_sums() {
        let s = tridiag(12);
        let v = DVector::from_fn(12, |i, _| if i < 3 { 1.0 / (i as f64 + 1.0) } else { 0.0 });
        let (d, y) = bordered_quadratic_form(&s, &v, 2).unwrap();
        for j in 1..=12 {
            let sub = s.view((0, 0), (j, j)).into_owned();
            let vj = v.rows(0, j).into_owned();
            let direct = vj.dot(&sub.lu().solve(&vj).unwrap());
            let partial: f64 = (0..j).map(|i| y[i] * y[i] / d[i]).sum();
            assert!((direct - partial).abs() < 1e-14, "j={j}");
        }
    }
}
