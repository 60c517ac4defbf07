//! Small dense LU factorizations with partial pivoting.

use ndarray::Array2;
use num_complex::Complex;

use crate::Real;

/// Solves `A x = b` in place. `a` is row-major `n × n` and is overwritten.
/// Returns `None` when a pivot vanishes.
pub fn lu_solve<T: Real>(a: &mut [T], n: usize, b: &mut [T]) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap()
        })?;
        let pv = a[piv * n + col];
        if !(pv.abs() > T::zero()) || !pv.is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / pv;
            if f == T::zero() {
                continue;
            }
            a[r * n + col] = T::zero();
            for k in col + 1..n {
                let v = a[col * n + k];
                a[r * n + k] -= f * v;
            }
            let bv = b[col];
            b[r] -= f * bv;
        }
    }
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r * n + k] * b[k];
        }
        b[r] = s / a[r * n + r];
    }
    Some(())
}

/// Determinant of a complex matrix.
pub fn det_complex<T: Real>(m: &Array2<Complex<T>>) -> Complex<T> {
    let n = m.nrows();
    let mut a: Vec<Complex<T>> = m.iter().copied().collect();
    let mut det = Complex::new(T::one(), T::zero());
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .norm()
                    .partial_cmp(&a[j * n + col].norm())
                    .unwrap()
            })
            .unwrap();
        let pv = a[piv * n + col];
        if pv.norm() == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        det = det * pv;
        for r in col + 1..n {
            let f = a[r * n + col] / pv;
            for k in col + 1..n {
                let v = a[col * n + k];
                a[r * n + k] = a[r * n + k] - f * v;
            }
        }
    }
    det
}

/// Determinant of a real matrix.
pub fn det_real<T: Real>(m: &Array2<T>) -> T {
    det_complex(&m.mapv(|v| Complex::new(v, T::zero()))).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solves_small_system() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut b = vec![3.0, 2.0, 4.0];
        lu_solve(&mut a, 3, &mut b).unwrap();
        for (x, e) in b.iter().zip([1.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*x, e, epsilon = 1e-14);
        }
        let mut s = vec![1.0, 2.0, 2.0, 4.0];
        assert!(lu_solve(&mut s, 2, &mut [1.0, 1.0]).is_none());
    }

    #[test]
    fn determinants() {
        assert_abs_diff_eq!(
            det_real(&array![[1.0, 2.0], [3.0, 4.0]]),
            -2.0,
            epsilon = 1e-14
        );
        let m = array![
            [Complex::new(0.0, 1.0), Complex::new(1.0, 0.0)],
            [Complex::new(2.0, 0.0), Complex::new(0.0, -1.0)]
        ];
        let d = det_complex(&m);
        assert_abs_diff_eq!(d.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.im, 0.0, epsilon = 1e-14);
    }
}
