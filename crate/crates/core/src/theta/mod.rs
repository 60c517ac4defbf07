//! Theta functions and the determinant/permanent identities that connect
//! them to the wave functions `Ψ_p`.
//!
//! All integrals are periodic trapezoid sums. The integrands are
//! trigonometric polynomials (or Gaussian-damped series whose tails sit
//! below double precision), so once the node count exceeds the bandwidth
//! the sums are exact up to rounding.

use ndarray::Array2;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::ensemble::{log_permanent, wave_function};
use crate::linalg::det_complex;
use crate::torus::{pairwise_sum, TorusPoint};
use crate::{Error, Real, Result};

/// Largest `|Im z|` accepted by [`theta_eval`].
pub const IM_WINDOW: f64 = 4.0;

/// Relative tail target `ln(1e17)`.
const TAIL_EXPONENT: f64 = 39.14435;

/// Largest matrix size for the nested quadratures.
pub const MAX_IDENTITY_SIZE: usize = 4;

/// `θ_p^{(k)}(z) = Σ_{m∈Zⁿ+p} e^{-k|m|²/4 + ik z·m/2}` truncated to
/// `|m_i| ≤ truncation_radius` on each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSpec<T> {
    pub k: usize,
    pub p: TorusPoint<T>,
    pub truncation_radius: T,
}

impl<T: Real> ThetaSpec<T> {
    /// Radius covering the whole window `|Im z| ≤ 4`: for fixed `y` the terms
    /// peak at `m = -y` and fall off like `e^{-k(m+y)²/4}`.
    pub fn new(k: usize, p: TorusPoint<T>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        let r = IM_WINDOW + (4.0 * TAIL_EXPONENT / k as f64).sqrt() + 1.0;
        Ok(ThetaSpec {
            k,
            p,
            truncation_radius: T::lit(r),
        })
    }

    /// The classical theta function (`k = 1`, `p = 0`) in `n` variables.
    pub fn classical(n: usize) -> Self {
        Self::new(1, TorusPoint::origin(n)).expect("k = 1")
    }
}

/// One axis: `Σ_{m∈Z+p, |m|≤R} e^{-km²/4 + ikzm/2}`.
fn theta_axis<T: Real>(k: T, p: T, radius: T, z: Complex<T>) -> Complex<T> {
    // with km integral every phase has period 4π in Re z; reducing first
    // keeps the phases small
    let kp = k * p;
    let re = if (kp - kp.round()).abs() <= T::epsilon() * k {
        let period = T::lit(4.0) * T::PI();
        z.re - (z.re / period).floor() * period
    } else {
        z.re
    };
    let lo = (-radius - p).ceil().to_i64().unwrap_or(0);
    let hi = (radius - p).floor().to_i64().unwrap_or(0);
    let quarter = T::lit(0.25);
    let half = T::lit(0.5);
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut comp = Complex::new(T::zero(), T::zero());
    for j in lo..=hi {
        let m = T::lit(j as f64) + p;
        let modulus = (-k * m * m * quarter - k * m * z.im * half).exp();
        let term = Complex::from_polar(modulus, k * m * re * half);
        // Neumaier summation, componentwise
        let t = acc + term;
        comp.re += if acc.re.abs() >= term.re.abs() {
            (acc.re - t.re) + term.re
        } else {
            (term.re - t.re) + acc.re
        };
        comp.im += if acc.im.abs() >= term.im.abs() {
            (acc.im - t.im) + term.im
        } else {
            (term.im - t.im) + acc.im
        };
        acc = t;
    }
    acc + comp
}

/// Evaluates the truncated lattice sum. The sum over `Zⁿ+p` is a product of
/// one-dimensional sums.
pub fn theta_eval<T: Real>(spec: &ThetaSpec<T>, z: &[Complex<T>]) -> Result<Complex<T>> {
    if z.len() != spec.p.dim() {
        return Err(Error::SizeMismatch(z.len(), spec.p.dim()));
    }
    let kt = T::of(spec.k);
    let mut out = Complex::new(T::one(), T::zero());
    for (&pa, &za) in spec.p.coords().iter().zip(z) {
        if !(za.im.abs() <= T::lit(IM_WINDOW)) || !za.re.is_finite() {
            return Err(Error::OutOfWindow(za.im.to_f64_lossy()));
        }
        out = out * theta_axis(kt, pa, spec.truncation_radius, za);
    }
    Ok(out)
}

/// Both sides of an identity. `fitted_constant` is the measured
/// proportionality factor where one is expected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub rel_error: T,
    pub fitted_constant: Option<T>,
}

impl<T: Real + Serialize> IdentityReport<T> {
    fn compare(lhs: T, rhs: T) -> Self {
        IdentityReport {
            lhs,
            rhs,
            rel_error: rel_error(lhs, rhs),
            fitted_constant: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn rel_error<T: Real>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

fn check_size(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::UnsupportedSize(format!(
            "N = {n}, supported 1..={max}"
        )));
    }
    Ok(())
}

/// Trapezoid nodes and the common weight on `[0, period)`.
fn trapezoid<T: Real>(q: usize, period: T) -> (Vec<T>, T) {
    let h = period / T::of(q);
    ((0..q).map(|i| T::of(i) * h).collect(), h)
}

/// `Σ_{i_1..i_N} |det(table[j][l][i_j])|²`: row `j` of the matrix is taken
/// at its own node `i_j`. `table[j][l]` holds `F_{jl}` on the nodes.
fn product_det_sum<T: Real>(table: &[Vec<Vec<Complex<T>>>], q: usize) -> T {
    let n = table.len();
    let total = q.pow(n as u32);
    let mut vals = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    let mut m = Array2::from_elem((n, n), Complex::new(T::zero(), T::zero()));
    for _ in 0..total {
        for j in 0..n {
            for l in 0..n {
                m[[j, l]] = table[j][l][idx[j]];
            }
        }
        vals.push(det_complex(&m).norm_sqr());
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < q {
                break;
            }
            *slot = 0;
        }
    }
    pairwise_sum(&vals)
}

fn random_complex<T: Real>(rng: &mut ChaCha8Rng) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re), T::lit(im))
}

/// Random `N × N` complex Gaussian coefficients.
pub fn random_coefficients<T: Real>(n: usize, seed: u64) -> Array2<Complex<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, n), |_| random_complex(&mut rng))
}

/// `perm(∫|F_{jk}|²dx) = ∫|det F_{jk}(x_j)|² dx^{⊗N}` for
/// `F_{jk}(x) = c_{jk} e^{ikx}` on `[0, 2π]`. The left side is the exact
/// permanent of `2π|c_{jk}|²`, the right side a product trapezoid sum.
pub fn verify_detperm_coeffs<T: Real + Serialize>(
    c: &Array2<Complex<T>>,
    quad_nodes: usize,
) -> Result<IdentityReport<T>> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::InvalidInput(
            "coefficient matrix must be square".into(),
        ));
    }
    check_size(n, MAX_IDENTITY_SIZE)?;
    if quad_nodes < 2 * n {
        return Err(Error::InvalidInput(format!(
            "need at least {} nodes for N = {n}",
            2 * n
        )));
    }
    let two_pi = T::TAU();
    let log_gram = c.mapv(|v| (two_pi * v.norm_sqr()).ln());
    let lhs = log_permanent(&log_gram)?.exp();
    let (nodes, h) = trapezoid(quad_nodes, two_pi);
    let table: Vec<Vec<Vec<Complex<T>>>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|l| {
                    nodes
                        .iter()
                        .map(|&x| c[[j, l]] * Complex::from_polar(T::one(), T::of(l + 1) * x))
                        .collect()
                })
                .collect()
        })
        .collect();
    let rhs = product_det_sum(&table, quad_nodes) * h.powi(n as i32);
    Ok(IdentityReport::compare(lhs, rhs))
}

/// [`verify_detperm_coeffs`] with seeded complex Gaussian coefficients.
pub fn verify_detperm<T: Real + Serialize>(
    n: usize,
    quad_nodes: usize,
    seed: u64,
) -> Result<IdentityReport<T>> {
    check_size(n, MAX_IDENTITY_SIZE)?;
    verify_detperm_coeffs(&random_coefficients::<T>(n, seed), quad_nodes)
}

/// `(2π)^{-N} ∫_{[0,2π]^N} |det(√a_{jk} e^{ikx_j})|² dx`, which equals
/// `perm(a)` for entrywise nonnegative `a`.
pub fn fourier_permanent<T: Real>(a: &Array2<T>, quad_nodes: usize) -> Result<T> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    check_size(n, MAX_IDENTITY_SIZE)?;
    if quad_nodes < 2 * n {
        return Err(Error::InvalidInput(format!(
            "need at least {} nodes for N = {n}",
            2 * n
        )));
    }
    for ((row, col), &v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
        if v < T::zero() {
            return Err(Error::NegativeEntry { row, col });
        }
    }
    let two_pi = T::TAU();
    let (nodes, _) = trapezoid(quad_nodes, two_pi);
    let table: Vec<Vec<Vec<Complex<T>>>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|l| {
                    let s = a[[j, l]].sqrt();
                    nodes
                        .iter()
                        .map(|&x| Complex::from_polar(s, T::of(l + 1) * x))
                        .collect()
                })
                .collect()
        })
        .collect();
    // (h / 2π)^N = Q^{-N}
    Ok(product_det_sum(&table, quad_nodes) / T::of(quad_nodes).powi(n as i32))
}

/// `f_k(x) = Σ_{|m|≤d} c_{k,m} e^{imx}` on the nodes. `coeffs` has one row
/// per function and `2d+1` columns indexed by `m + d`.
fn trig_table<T: Real>(coeffs: &Array2<Complex<T>>, nodes: &[T]) -> Vec<Vec<Complex<T>>> {
    let d = (coeffs.ncols() / 2) as i64;
    coeffs
        .rows()
        .into_iter()
        .map(|row| {
            nodes
                .iter()
                .map(|&x| {
                    row.iter()
                        .enumerate()
                        .map(|(i, &c)| {
                            c * Complex::from_polar(T::one(), T::lit((i as i64 - d) as f64) * x)
                        })
                        .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
                })
                .collect()
        })
        .collect()
}

/// `det(∫ f_j f̄_k dx) = (1/N!) ∫ |det f_k(x_j)|² dx^{⊗N}` on `[0, 2π]` for
/// trigonometric polynomials given by their coefficients (see
/// [`random_trig_coefficients`] for the layout). Both sides are trapezoid
/// sums on `quad_nodes` nodes.
pub fn gram_identity_coeffs<T: Real + Serialize>(
    coeffs: &Array2<Complex<T>>,
    quad_nodes: usize,
) -> Result<IdentityReport<T>> {
    let n = coeffs.nrows();
    check_size(n, MAX_IDENTITY_SIZE)?;
    if coeffs.ncols().is_multiple_of(2) {
        return Err(Error::InvalidInput(
            "coefficient rows must have odd length 2d+1".into(),
        ));
    }
    let degree = coeffs.ncols() / 2;
    if quad_nodes <= 2 * degree {
        return Err(Error::InvalidInput(format!(
            "need more than {} nodes for degree {degree}",
            2 * degree
        )));
    }
    let (nodes, h) = trapezoid(quad_nodes, T::TAU());
    let f = trig_table(coeffs, &nodes);
    let gram = Array2::from_shape_fn((n, n), |(j, l)| {
        f[j].iter()
            .zip(&f[l])
            .fold(Complex::new(T::zero(), T::zero()), |a, (&u, &v)| {
                a + u * v.conj()
            })
            * h
    });
    let lhs = det_complex(&gram).re;
    // row j of det(f_k(x_j)) is every function evaluated at x_j
    let table: Vec<Vec<Vec<Complex<T>>>> = (0..n).map(|_| f.clone()).collect();
    let factorial: T = (1..=n).map(T::of).fold(T::one(), |a, b| a * b);
    let rhs = product_det_sum(&table, quad_nodes) * h.powi(n as i32) / factorial;
    Ok(IdentityReport::compare(lhs, rhs))
}

/// Random coefficients of `n` trigonometric polynomials of degree `n`.
pub fn random_trig_coefficients<T: Real>(n: usize, seed: u64) -> Array2<Complex<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, 2 * n + 1), |_| random_complex(&mut rng))
}

/// [`gram_identity_coeffs`] for seeded random polynomials of degree `N`.
pub fn gram_identity<T: Real + Serialize>(
    n: usize,
    seed: u64,
    quad_nodes: usize,
) -> Result<IdentityReport<T>> {
    check_size(n, MAX_IDENTITY_SIZE)?;
    gram_identity_coeffs(&random_trig_coefficients::<T>(n, seed), quad_nodes)
}

/// Seeded complex matrix of determinant one: unit lower triangular times
/// unit upper triangular.
pub fn random_unimodular<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Array2<Complex<T>> {
    let one = Complex::new(T::one(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    let lower = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            one
        } else if i > j {
            random_complex(rng)
        } else {
            zero
        }
    });
    let upper = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            one
        } else if i < j {
            random_complex(rng)
        } else {
            zero
        }
    });
    lower.dot(&upper)
}

/// Gram identity before and after replacing `{f_k}` by `U f` with
/// `det U = 1`. Both sides should be unchanged.
pub fn gram_unimodular_check<T: Real + Serialize>(
    n: usize,
    seed: u64,
    quad_nodes: usize,
) -> Result<(IdentityReport<T>, IdentityReport<T>)> {
    check_size(n, MAX_IDENTITY_SIZE)?;
    let coeffs = random_trig_coefficients::<T>(n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_u64.rotate_left(32));
    let u = random_unimodular::<T>(n, &mut rng);
    let mixed = u.dot(&coeffs);
    Ok((
        gram_identity_coeffs(&coeffs, quad_nodes)?,
        gram_identity_coeffs(&mixed, quad_nodes)?,
    ))
}

/// Fiber integral `∫_{[0,4π]^N} |det(θ_{p_l}(x_j + iy_j) e^{-ky_j²/4})|² dx`
/// for the level-`k` basis on the circle (`n = 1`, `N = k`).
pub fn theta_fiber_integral<T: Real>(k: usize, y: &[T], quad_nodes: usize) -> Result<T> {
    let n = y.len();
    if n != k {
        return Err(Error::SizeMismatch(n, k));
    }
    check_size(n, 2)?;
    let kt = T::of(k);
    let (nodes, h) = trapezoid(quad_nodes, T::lit(4.0) * T::PI());
    let specs: Vec<ThetaSpec<T>> = (0..k)
        .map(|l| ThetaSpec::new(k, TorusPoint::wrap(&[T::of(l) / kt])?))
        .collect::<Result<_>>()?;
    let mut table = Vec::with_capacity(n);
    for &yj in y {
        let weight = (-kt * yj * yj * T::lit(0.25)).exp();
        let mut row = Vec::with_capacity(n);
        for spec in &specs {
            let col = nodes
                .iter()
                .map(|&x| Ok(theta_eval(spec, &[Complex::new(x, yj)])? * weight))
                .collect::<Result<Vec<_>>>()?;
            row.push(col);
        }
        table.push(row);
    }
    Ok(product_det_sum(&table, quad_nodes) * h.powi(n as i32))
}

/// `perm(Ψ_{p_l}(y_j))` for the level-`k` lattice on the circle.
pub fn theta_permanent_side<T: Real>(k: usize, y: &[T]) -> Result<T> {
    let kt = T::of(k);
    let pts: Vec<TorusPoint<T>> = (0..k)
        .map(|l| TorusPoint::wrap(&[T::of(l) / kt]))
        .collect::<Result<_>>()?;
    let ys: Vec<TorusPoint<T>> = y
        .iter()
        .map(|&v| TorusPoint::wrap(&[v]))
        .collect::<Result<_>>()?;
    let log_psi = Array2::from_shape_fn((y.len(), k), |(j, l)| {
        wave_function(k, &pts[l], &ys[j]).ln()
    });
    Ok(log_permanent(&log_psi)?.exp())
}

/// Fiber integral against `perm(Ψ_{p_l}(y_j))` at one configuration. The
/// fitted constant is their ratio and `rel_error` its deviation from
/// `(4π)^N`.
pub fn theta_pushforward_check<T: Real + Serialize>(
    k: usize,
    n: usize,
    y: &[T],
    quad_nodes: usize,
) -> Result<IdentityReport<T>> {
    if n != k {
        return Err(Error::InvalidInput(format!(
            "on the circle N = k, got N = {n}, k = {k}"
        )));
    }
    if y.len() != n {
        return Err(Error::SizeMismatch(y.len(), n));
    }
    let lhs = theta_fiber_integral(k, y, quad_nodes)?;
    let rhs = theta_permanent_side(k, y)?;
    let c = lhs / rhs;
    let expected = (T::lit(4.0) * T::PI()).powi(n as i32);
    Ok(IdentityReport {
        lhs,
        rhs,
        rel_error: rel_error(c, expected),
        fitted_constant: Some(c),
    })
}

/// Least-squares constant `c` in `fiber(y) ≈ c · perm(y)` over several
/// configurations (fit through the origin). `lhs`/`rhs` hold the summed
/// sides, `rel_error` the deviation of `c` from `(4π)^N`.
pub fn theta_constant_fit<T: Real + Serialize>(
    k: usize,
    ys: &[Vec<T>],
    quad_nodes: usize,
) -> Result<IdentityReport<T>> {
    if ys.is_empty() {
        return Err(Error::InvalidInput("no configurations".into()));
    }
    let (mut lp, mut pp, mut sl, mut sp) = (T::zero(), T::zero(), T::zero(), T::zero());
    for y in ys {
        let l = theta_fiber_integral(k, y, quad_nodes)?;
        let p = theta_permanent_side(k, y)?;
        lp += l * p;
        pp += p * p;
        sl += l;
        sp += p;
    }
    let c = lp / pp;
    let expected = (T::lit(4.0) * T::PI()).powi(k as i32);
    Ok(IdentityReport {
        lhs: sl,
        rhs: sp,
        rel_error: rel_error(c, expected),
        fitted_constant: Some(c),
    })
}

/// `(1/4π) ∫_0^{4π} |θ(x+iy)|² e^{-y²/2} dx` against the unnormalized
/// density `Σ_m e^{-(y-m)²/2}` of `γ`, on `nodes` equispaced `y`. Returns the
/// largest relative deviation.
pub fn theta_gamma_density_check<T: Real>(nodes: usize, quad_nodes: usize) -> Result<T> {
    if nodes == 0 {
        return Err(Error::InvalidInput("need at least one node".into()));
    }
    let four_pi = T::lit(4.0) * T::PI();
    let origin = TorusPoint::origin(1);
    let mut worst = T::zero();
    for i in 0..nodes {
        let y = T::of(i) / T::of(nodes);
        let fiber = theta_fiber_integral(1, &[y], quad_nodes)? / four_pi;
        let density = wave_function(1, &origin, &TorusPoint::wrap(&[y])?);
        worst = worst.max(rel_error(fiber, density));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn theta_direct(z: Complex<f64>) -> Complex<f64> {
        (-60i64..=60)
            .map(|m| {
                let m = m as f64;
                (Complex::<f64>::new(-m * m / 4.0, 0.0) + Complex::<f64>::i() * z * m / 2.0).exp()
            })
            .sum()
    }

    #[test]
    fn classical_value_at_zero() {
        let th = ThetaSpec::<f64>::classical(1);
        let v = theta_eval(&th, &[Complex::new(0.0, 0.0)]).unwrap();
        let direct: f64 = (-60i64..=60).map(|m| (-(m * m) as f64 / 4.0).exp()).sum();
        assert_relative_eq!(v.re, direct, max_relative = 1e-15);
        assert_relative_eq!(v.re, 3.5449077018110318, max_relative = 1e-14);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn matches_direct_sum_and_periodicity() {
        let th = ThetaSpec::<f64>::classical(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let z = Complex::new(rng.random_range(-10.0..10.0), rng.random_range(-2.9..2.9));
            let v = theta_eval(&th, &[z]).unwrap();
            // size of the terms; θ itself can nearly vanish
            let scale = theta_eval(&th, &[Complex::new(0.0, z.im)]).unwrap().norm();
            assert!((v - theta_direct(z)).norm() <= 1e-12 * scale);
            let shifted = theta_eval(&th, &[z + 4.0 * PI]).unwrap();
            assert!((shifted - v).norm() <= 1e-12 * scale);
            // θ(z+i) = θ(z) e^{1/4 - iz/2}
            let up = theta_eval(&th, &[z + Complex::i()]).unwrap();
            let expect = v * (Complex::<f64>::new(0.25, 0.0) - Complex::<f64>::i() * z / 2.0).exp();
            let up_scale = scale * (0.25 + z.im / 2.0).exp();
            assert!((up - expect).norm() <= 1e-12 * up_scale);
            let mirrored = theta_eval(&th, &[-z.conj()]).unwrap();
            assert!((mirrored - v.conj()).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn window_is_enforced() {
        let th = ThetaSpec::<f64>::classical(1);
        assert!(matches!(
            theta_eval(&th, &[Complex::new(0.0, 4.5)]),
            Err(Error::OutOfWindow(_))
        ));
        assert!(theta_eval(&th, &[Complex::new(0.0, -4.0)]).is_ok());
        assert!(matches!(
            theta_eval(&th, &[Complex::new(0.0, 0.0); 2]),
            Err(Error::SizeMismatch(2, 1))
        ));
    }

    #[test]
    fn detperm_small() {
        let c = Array2::from_elem((1, 1), Complex::new(0.3, -1.2));
        let r = verify_detperm_coeffs(&c, 6).unwrap();
        assert_relative_eq!(r.lhs, 2.0 * PI * c[[0, 0]].norm_sqr(), max_relative = 1e-14);
        assert!(r.rel_error <= 1e-14);
        for seed in 0..5 {
            assert!(verify_detperm::<f64>(2, 10, seed).unwrap().rel_error <= 1e-10);
            assert!(verify_detperm::<f64>(3, 14, seed).unwrap().rel_error <= 1e-9);
        }
    }

    #[test]
    fn fourier_permanent_examples() {
        let a = Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(
            fourier_permanent(&a, 10).unwrap(),
            10.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            fourier_permanent(&Array2::<f64>::eye(3), 14).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            fourier_permanent(&Array2::<f64>::ones((3, 3)), 14).unwrap(),
            6.0,
            max_relative = 1e-12
        );
        let bad = Array2::from_shape_vec((2, 2), vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            fourier_permanent(&bad, 10),
            Err(Error::NegativeEntry { row: 0, col: 1 })
        );
    }

    #[test]
    fn gram_orthonormal_and_random() {
        // e^{ikx}/√(2π) for k = 1, 2 on degree-2 rows
        let s = 1.0 / (2.0 * PI).sqrt();
        let mut c = Array2::from_elem((2, 5), Complex::new(0.0, 0.0));
        c[[0, 3]] = Complex::new(s, 0.0);
        c[[1, 4]] = Complex::new(s, 0.0);
        let r = gram_identity_coeffs(&c, 10).unwrap();
        assert_relative_eq!(r.lhs, 1.0, max_relative = 1e-13);
        assert_relative_eq!(r.rhs, 1.0, max_relative = 1e-13);
        for seed in 0..5 {
            assert!(gram_identity::<f64>(2, seed, 10).unwrap().rel_error <= 1e-10);
        }
    }

    #[test]
    fn gram_from_coefficients_matches_quadrature() {
        let c = random_trig_coefficients::<f64>(3, 9);
        let r = gram_identity_coeffs(&c, 14).unwrap();
        let exact = Array2::from_shape_fn((3, 3), |(j, l)| {
            c.row(j)
                .iter()
                .zip(c.row(l))
                .map(|(&u, &v)| u * v.conj())
                .sum::<Complex<f64>>()
                * (2.0 * PI)
        });
        assert_relative_eq!(r.lhs, det_complex(&exact).re, max_relative = 1e-11);
    }

    #[test]
    fn unimodular_recombination() {
        let (a, b) = gram_unimodular_check::<f64>(3, 4, 14).unwrap();
        assert!(rel_error(a.lhs, b.lhs) <= 1e-10);
        assert!(rel_error(a.rhs, b.rhs) <= 1e-10);
    }

    #[test]
    fn single_theta_fiber() {
        let r = theta_pushforward_check(1, 1, &[0.0f64], 64).unwrap();
        assert_relative_eq!(r.lhs, 4.0 * PI * 2.5066282880429056, max_relative = 1e-8);
        assert!(r.rel_error <= 1e-8);
    }

    #[test]
    fn two_theta_fiber() {
        let r = theta_pushforward_check(2, 2, &[0.13f64, 0.71], 64).unwrap();
        assert!(r.rel_error <= 1e-6, "{r:?}");
    }

    #[test]
    fn gamma_density_match() {
        assert!(theta_gamma_density_check::<f64>(64, 64).unwrap() <= 1e-8);
    }

    #[test]
    fn report_json_keys() {
        let r = theta_pushforward_check(1, 1, &[0.2f64], 64).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["lhs", "rhs", "rel_error", "fitted_constant"] {
            assert!(v.get(key).is_some());
        }
    }
}
