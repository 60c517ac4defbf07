use ndarray::Array2;

use crate::{Error, Real, Result};

/// Largest matrix accepted by [`log_permanent`].
pub const MAX_PERMANENT_SIZE: usize = 22;

const BALANCE_ROUNDS: usize = 500;
// stop once every column log-sum of the balanced matrix is within this of 0
const BALANCE_TOL: f64 = 1e-2;

/// `log perm(exp(L))` for a square matrix of log-entries.
///
/// Rows are first shifted by their maxima and then balanced towards a doubly
/// stochastic matrix in the log domain (Sinkhorn rounds until the column sums
/// settle); the permanent of the balanced matrix has no underflow and little
/// cancellation in the alternating sum. The scalings are added back exactly.
pub fn log_permanent<T: Real>(l: &Array2<T>) -> Result<T> {
    let (n, m) = l.dim();
    if n != m {
        return Err(Error::InvalidInput(format!(
            "permanent of a {n}x{m} matrix"
        )));
    }
    if n > MAX_PERMANENT_SIZE {
        return Err(Error::OversizeMatrix(n));
    }
    if let Some(((row, col), _)) = l.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    if n == 0 {
        return Ok(T::zero());
    }
    let mut r: Vec<T> = l
        .rows()
        .into_iter()
        .map(|row| row.fold(T::neg_infinity(), |a, &b| a.max(b)))
        .collect();
    let mut c = vec![T::zero(); n];
    let tol = T::lit(BALANCE_TOL);
    for _ in 0..BALANCE_ROUNDS {
        let mut off = T::zero();
        for j in 0..n {
            let cj = log_sum_exp((0..n).map(|i| l[[i, j]] - r[i]));
            off = off.max((cj - c[j]).abs());
            c[j] = cj;
        }
        // nearly decomposable matrices need many rounds, the rest a few
        if off <= tol {
            break;
        }
        for i in 0..n {
            r[i] = log_sum_exp((0..n).map(|j| l[[i, j]] - c[j]));
        }
    }
    // column-major so Gray-code updates stream through contiguous memory
    let mut b = vec![T::zero(); n * n];
    for j in 0..n {
        for i in 0..n {
            b[j * n + i] = (l[[i, j]] - r[i] - c[j]).exp();
        }
    }
    let p = glynn_column_major(&b, n);
    if !(p > T::zero()) {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    let shift: T = r.iter().copied().sum::<T>() + c.iter().copied().sum::<T>();
    Ok(p.ln() + shift)
}

/// Glynn's formula with Gray-code enumeration on a column-major `n × n`
/// matrix: `perm(A) = 2^{1-n} Σ_δ (Π_k δ_k) Π_i Σ_j δ_j a_ij` over sign
/// vectors with `δ_0 = +1`. Half the subsets of Ryser's formula, same
/// `O(2ⁿ n)` shape.
pub fn glynn_column_major<T: Real>(b: &[T], n: usize) -> T {
    if n == 0 {
        return T::one();
    }
    let mut rowsum = vec![T::zero(); n];
    for j in 0..n {
        for (s, &a) in rowsum.iter_mut().zip(&b[j * n..(j + 1) * n]) {
            *s += a;
        }
    }
    let two = T::lit(2.0);
    let mut total = product(&rowsum);
    let mut comp = T::zero();
    let mut flipped: u64 = 0;
    let mut positive = true;
    for g in 1u64..(1u64 << (n - 1)) {
        let bit = g.trailing_zeros() as usize;
        flipped ^= 1 << bit;
        let j = bit + 1;
        let col = &b[j * n..(j + 1) * n];
        if flipped & (1 << bit) != 0 {
            for (s, &a) in rowsum.iter_mut().zip(col) {
                *s -= two * a;
            }
        } else {
            for (s, &a) in rowsum.iter_mut().zip(col) {
                *s += two * a;
            }
        }
        positive = !positive;
        let mut prod = product(&rowsum);
        if !positive {
            prod = -prod;
        }
        // Neumaier summation of the alternating terms
        let t = total + prod;
        if total.abs() >= prod.abs() {
            comp += (total - t) + prod;
        } else {
            comp += (prod - t) + total;
        }
        total = t;
    }
    (total + comp) / two.powi(n as i32 - 1)
}

#[inline]
fn product<T: Real>(v: &[T]) -> T {
    // four independent chains instead of one long dependency chain
    let mut acc = [T::one(); 4];
    let chunks = v.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        acc[0] *= c[0];
        acc[1] *= c[1];
        acc[2] *= c[2];
        acc[3] *= c[3];
    }
    let mut p = (acc[0] * acc[1]) * (acc[2] * acc[3]);
    for &x in rest {
        p *= x;
    }
    p
}

/// `log Σ exp(x)`, stable for any finite inputs.
pub fn log_sum_exp<T: Real>(xs: impl Iterator<Item = T> + Clone) -> T {
    let m = xs.clone().fold(T::neg_infinity(), |a, b| a.max(b));
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<T>().ln()
}
