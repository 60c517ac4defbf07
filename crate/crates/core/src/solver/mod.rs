//! The variational solver for `MA(φ) = e^{βφ} μ₀`: the functionals `I` and
//! `F`, projected descent over c-convex grid functions, a finite-difference
//! oracle, geodesics and multi-start uniqueness probes.

mod ode;

pub use ode::{ode_oracle_1d, OdeSolution};

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ctransform::{c_transform, continuum_cells, project_cconvex, xi};
use crate::ensemble::{log_sum_exp, log_wave_function};
use crate::torus::{DiscreteMeasure, GridField, TorusPoint};
use crate::{Error, Real, Result};

/// Normalized `γ = Σ_m e^{-|x-m|²/2} dx` as a grid density.
pub fn gamma_density<T: Real>(dim: usize, res: usize) -> Result<DiscreteMeasure<T>> {
    let o = TorusPoint::origin(dim);
    let g = GridField::from_fn(dim, res, |x: &[T]| {
        log_wave_function(1, &o, &TorusPoint::wrap(x).expect("node")).exp()
    })?;
    DiscreteMeasure::grid_normalized(g)
}

/// Cell masses of `μ₀` on the grid of `φ`.
fn aligned_masses<T: Real>(phi: &GridField<T>, mu0: &DiscreteMeasure<T>) -> Result<Vec<T>> {
    phi.check_same_grid(mu0.grid_or_err()?)?;
    mu0.cell_masses()
}

/// `I_{μ₀}(φ) = log ∫ e^φ dμ₀`.
pub fn i_functional<T: Real>(phi: &GridField<T>, mu0: &DiscreteMeasure<T>) -> Result<T> {
    let w = aligned_masses(phi, mu0)?;
    Ok(log_integral(phi.values(), &w, T::one()))
}

/// `log Σ_i w_i e^{s φ_i}` over cells of positive mass.
fn log_integral<T: Real>(phi: &[T], w: &[T], s: T) -> T {
    log_sum_exp(
        phi.iter()
            .zip(w)
            .filter(|(_, &wi)| wi > T::zero())
            .map(|(&f, &wi)| s * f + wi.ln()),
    )
}

/// `F(φ) = ξ(φ) + (1/β) I_{μ₀}(βφ)` with the grid `ξ`.
pub fn f_functional<T: Real>(phi: &GridField<T>, beta: T, mu0: &DiscreteMeasure<T>) -> Result<T> {
    if beta == T::zero() {
        return Err(Error::BetaZero);
    }
    let w = aligned_masses(phi, mu0)?;
    Ok(xi(phi) + log_integral(phi.values(), &w, beta) / beta)
}

/// Tuning of [`minimize_f_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Fine samples per coarse cell and axis for 2-d cells.
    pub oversample: usize,
    /// Initial step of each backtracking search.
    pub eta0: f64,
    pub armijo_factor: f64,
    pub armijo_slope: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            oversample: 8,
            eta0: 0.5,
            armijo_factor: 0.5,
            armijo_slope: 1e-4,
        }
    }
}

/// Output of [`minimize_f`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult<T> {
    /// Zero-mean minimizer.
    #[serde(skip)]
    pub phi: GridField<T>,
    /// `F` of the minimizer with the grid `ξ`.
    #[serde(rename = "F_value")]
    pub f_value: T,
    /// `max_i |MA_i - target_i| Gⁿ`.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    /// Cell masses of `MA(φ*)`.
    #[serde(skip)]
    pub ma_masses: Vec<T>,
    /// Objective after each accepted step, starting with the initial point.
    #[serde(skip)]
    pub trajectory: Vec<T>,
}

impl<T: Real + Serialize> SolveResult<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain numeric fields")
    }

    pub fn write_phi_csv<W: Write>(&self, w: W) -> Result<()> {
        self.phi.write_csv(w)
    }

    /// `MA(φ*)` as a grid measure.
    pub fn ma_measure(&self) -> Result<DiscreteMeasure<T>> {
        DiscreteMeasure::from_cell_masses(self.phi.dim(), self.phi.res(), self.ma_masses.clone())
    }
}

/// Objective state at one iterate.
struct Eval<T> {
    phi: GridField<T>,
    f: T,
    masses: Vec<T>,
    target: Vec<T>,
}

struct Problem<T> {
    beta: T,
    w: Vec<T>,
    dim: usize,
    res: usize,
    oversample: usize,
}

impl<T: Real> Problem<T> {
    /// Evaluates at the continuum projection of `phi`.
    fn eval(&self, phi: &GridField<T>) -> Eval<T> {
        let cells = continuum_cells(phi, self.oversample);
        let phi = cells.projected;
        let lse = log_integral(phi.values(), &self.w, self.beta);
        let target = phi
            .values()
            .iter()
            .zip(&self.w)
            .map(|(&f, &wi)| {
                if wi > T::zero() {
                    (self.beta * f + wi.ln() - lse).exp()
                } else {
                    T::zero()
                }
            })
            .collect();
        Eval {
            f: cells.xi + lse / self.beta,
            masses: cells.masses,
            target,
            phi,
        }
    }

    fn residual(&self, e: &Eval<T>) -> T {
        let scale = T::of(self.res).powi(self.dim as i32);
        e.masses
            .iter()
            .zip(&e.target)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
            * scale
    }

    /// `H v` for the model Hessian `h^{n-2} L + β(diag t - t tᵀ)` plus a
    /// multiple of the constant mode, which `H` annihilates.
    fn hess_apply(&self, t: &[T], v: &[T], out: &mut [T]) {
        let g = self.res;
        let lap_scale = T::of(g).powi(2 - self.dim as i32);
        let tv: T = t.iter().zip(v).map(|(&a, &b)| a * b).sum();
        let mean: T = v.iter().copied().sum::<T>() / T::of(v.len());
        for i in 0..v.len() {
            let lap = if self.dim == 1 {
                T::lit(2.0) * v[i] - v[(i + 1) % g] - v[(i + g - 1) % g]
            } else {
                let (a, b) = (i / g, i % g);
                let at = |a: usize, b: usize| v[(a % g) * g + (b % g)];
                T::lit(4.0) * v[i]
                    - at(a + 1, b)
                    - at(a + g - 1, b)
                    - at(a, b + 1)
                    - at(a, b + g - 1)
            };
            out[i] = lap_scale * lap + self.beta * (t[i] * v[i] - t[i] * tv) + lap_scale * mean;
        }
    }

    /// Conjugate gradients on the model Hessian; `None` on negative curvature.
    fn newton_direction(&self, t: &[T], rhs: &[T]) -> Option<Vec<T>> {
        let n = rhs.len();
        let mut x = vec![T::zero(); n];
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut hp = vec![T::zero(); n];
        let rhs_norm: T = rhs.iter().map(|&a| a * a).sum::<T>().sqrt();
        if rhs_norm == T::zero() {
            return Some(x);
        }
        let mut rr: T = r.iter().map(|&a| a * a).sum();
        for _ in 0..4 * n {
            self.hess_apply(t, &p, &mut hp);
            let php: T = p.iter().zip(&hp).map(|(&a, &b)| a * b).sum();
            if !(php > T::zero()) {
                return None;
            }
            let alpha = rr / php;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            let rr_new: T = r.iter().map(|&a| a * a).sum();
            if rr_new.sqrt() <= T::lit(1e-12) * rhs_norm {
                break;
            }
            let b = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + b * p[i];
            }
        }
        Some(x)
    }
}

/// Grid density of `μ₀` at resolution `res` as cell masses, interpolating
/// when the grids differ.
fn background_masses<T: Real>(mu0: &DiscreteMeasure<T>, res: usize) -> Result<(usize, Vec<T>)> {
    let g = mu0.grid_or_err()?;
    let m = if g.res() == res {
        mu0.clone()
    } else {
        DiscreteMeasure::grid_normalized(GridField::from_fn(g.dim(), res, |x| g.interpolate(x))?)?
    };
    let w = m.cell_masses()?;
    if w.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::InvalidInput(
            "the background density must be strictly positive".into(),
        ));
    }
    Ok((g.dim(), w))
}

/// [`minimize_f_with`] with default options.
pub fn minimize_f<T: Real>(
    beta: T,
    mu0: &DiscreteMeasure<T>,
    res: usize,
    tol: T,
    max_iter: usize,
    init: Option<&GridField<T>>,
) -> Result<SolveResult<T>> {
    minimize_f_with(
        beta,
        mu0,
        res,
        tol,
        max_iter,
        init,
        &SolveOptions::default(),
    )
}

/// Minimizes `F` over c-convex grid functions.
///
/// The dual variable of `ξ` ranges over the continuum (exact power cells in
/// 1-d, oversampled cells in 2-d), so `MA(φ)` is a continuous function of
/// `φ` and `-MA(φ)` is the gradient of `ξ`. Each step solves the model
/// Hessian system for a Newton direction (falling back to the gradient if
/// that is not a descent direction), moves along it, projects onto
/// c-convex functions and backtracks until the Armijo condition holds.
pub fn minimize_f_with<T: Real>(
    beta: T,
    mu0: &DiscreteMeasure<T>,
    res: usize,
    tol: T,
    max_iter: usize,
    init: Option<&GridField<T>>,
    opts: &SolveOptions,
) -> Result<SolveResult<T>> {
    if beta == T::zero() {
        return Err(Error::BetaZero);
    }
    let (dim, w) = background_masses(mu0, res)?;
    let start = match init {
        Some(f) => {
            if f.dim() != dim || f.res() != res {
                return Err(Error::GridMismatch(
                    "initial potential is on a different grid".into(),
                ));
            }
            f.clone()
        }
        None => GridField::zeros(dim, res)?,
    };
    let prob = Problem {
        beta,
        w,
        dim,
        res,
        oversample: opts.oversample,
    };
    let mut cur = prob.eval(&start);
    let mut trajectory = vec![cur.f];
    let mut iterations = 0;
    let mut converged = false;
    let cell_inv = T::of(res).powi(dim as i32);
    while iterations < max_iter {
        if prob.residual(&cur) <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let grad: Vec<T> = cur
            .target
            .iter()
            .zip(&cur.masses)
            .map(|(&t, &m)| t - m)
            .collect();
        let newton = prob.newton_direction(&cur.target, &grad);
        let dir = match newton {
            Some(d) if grad.iter().zip(&d).map(|(&a, &b)| a * b).sum::<T>() > T::zero() => d,
            _ => grad.iter().map(|&g| g * cell_inv).collect(),
        };
        let slope: T = grad.iter().zip(&dir).map(|(&a, &b)| a * b).sum();
        let f_noise = T::lit(8.0) * T::epsilon() * cur.f.abs().max(T::one());
        let mut eta = T::lit(opts.eta0);
        let mut accepted = None;
        for _ in 0..60 {
            let trial = GridField::new(
                dim,
                res,
                cur.phi
                    .values()
                    .iter()
                    .zip(&dir)
                    .map(|(&p, &d)| p - eta * d)
                    .collect(),
            )?;
            let e = prob.eval(&trial);
            // below the resolution of F, a smaller residual decides
            let flat = e.f <= cur.f + f_noise && prob.residual(&e) < prob.residual(&cur);
            if e.f <= cur.f - T::lit(opts.armijo_slope) * eta * slope || flat {
                accepted = Some(e);
                break;
            }
            eta *= T::lit(opts.armijo_factor);
        }
        match accepted {
            Some(e) => {
                trajectory.push(e.f);
                cur = e;
            }
            // no decrease at machine precision: the iterate is as good as it gets
            None => {
                converged = prob.residual(&cur) <= tol;
                break;
            }
        }
    }
    if !converged && prob.residual(&cur) <= tol {
        converged = true;
    }
    let residual = prob.residual(&cur);
    let phi = cur.phi.zero_mean();
    let mu_aligned = DiscreteMeasure::from_cell_masses(dim, res, prob.w.clone())?;
    let f_value = f_functional(&phi, beta, &mu_aligned)?;
    Ok(SolveResult {
        phi,
        f_value,
        residual,
        iterations,
        converged,
        ma_masses: cur.masses,
        trajectory,
    })
}

/// `φ_t = (t φ₁^c + (1-t) φ₀^c)^c` with grid transforms.
pub fn geodesic<T: Real>(phi0: &GridField<T>, phi1: &GridField<T>, t: T) -> Result<GridField<T>> {
    phi0.check_same_grid(phi1)?;
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::InvalidInput("t must lie in [0, 1]".into()));
    }
    let a = c_transform(phi0);
    let b = c_transform(phi1);
    let mix = b.zip_map(&a, |x, y| t * x + (T::one() - t) * y)?;
    Ok(c_transform(&mix))
}

/// Agreement of minimizers from several random starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport<T> {
    /// Largest pairwise sup-distance between zero-mean minimizers.
    pub spread: T,
    /// Largest pairwise difference of `F` values.
    pub f_spread: T,
    pub all_converged: bool,
    pub n_starts: usize,
}

/// A random c-convex starting potential: a few random Fourier modes
/// projected onto c-convex functions.
pub fn random_cconvex<T: Real, R: Rng>(
    dim: usize,
    res: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<GridField<T>> {
    let modes: Vec<(f64, f64, f64, f64)> = (1..=4)
        .map(|m| {
            let a = amplitude / (m * m) as f64;
            (
                rng.random_range(-a..=a),
                rng.random_range(-a..=a),
                rng.random_range(-a..=a),
                rng.random_range(-a..=a),
            )
        })
        .collect();
    let f = GridField::from_fn(dim, res, |x: &[T]| {
        let mut s = 0.0;
        for (m, &(a, b, c, d)) in modes.iter().enumerate() {
            let k = 2.0 * PI * (m + 1) as f64;
            let x0 = x[0].to_f64_lossy();
            s += a * (k * x0).cos() + b * (k * x0).sin();
            if dim == 2 {
                let x1 = x[1].to_f64_lossy();
                s += c * (k * x1).cos() + d * (k * (x0 + x1)).sin();
            }
        }
        T::lit(s)
    })?;
    Ok(project_cconvex(&f))
}

/// Runs [`minimize_f`] from `n_starts` random c-convex potentials.
pub fn uniqueness_probe<T: Real>(
    beta: T,
    mu0: &DiscreteMeasure<T>,
    res: usize,
    n_starts: usize,
    seed: u64,
    tol: T,
    max_iter: usize,
) -> Result<UniquenessReport<T>> {
    let dim = mu0.dim();
    let starts: Vec<GridField<T>> = (0..n_starts)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            random_cconvex(dim, res, 0.3, &mut rng)
        })
        .collect::<Result<_>>()?;
    let results: Vec<SolveResult<T>> = starts
        .par_iter()
        .map(|s| minimize_f(beta, mu0, res, tol, max_iter, Some(s)))
        .collect::<Result<_>>()?;
    let mut spread = T::zero();
    let mut f_spread = T::zero();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            spread = spread.max(results[i].phi.sup_distance(&results[j].phi)?);
            f_spread = f_spread.max((results[i].f_value - results[j].f_value).abs());
        }
    }
    Ok(UniquenessReport {
        spread,
        f_spread,
        all_converged: results.iter().all(|r| r.converged),
        n_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bump(res: usize) -> DiscreteMeasure<f64> {
        DiscreteMeasure::grid_normalized(
            GridField::from_fn(1, res, |x: &[f64]| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_density::<f64>(1, 64).unwrap();
        assert_abs_diff_eq!(g.total_mass(), 1.0, epsilon = 1e-14);
        let d = g.as_grid().unwrap().values();
        for i in 1..64 {
            assert_abs_diff_eq!(d[i], d[64 - i], epsilon = 1e-15);
        }
        // direct lattice sums at 0 and 1/2
        let s = |x: f64| {
            (-40..=40)
                .map(|m| (-(x - m as f64).powi(2) / 2.0).exp())
                .sum::<f64>()
        };
        assert_abs_diff_eq!(d[0] / d[32], s(0.0) / s(0.5), epsilon = 1e-14);
        assert!(gamma_density::<f64>(2, 8).is_ok());
    }

    #[test]
    fn i_functional_examples() {
        let mu = bump(32);
        let z = GridField::zeros(1, 32).unwrap();
        assert_abs_diff_eq!(i_functional(&z, &mu).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            i_functional(&z.add_scalar(0.7), &mu).unwrap(),
            0.7,
            epsilon = 1e-14
        );
    }

    #[test]
    fn f_functional_examples() {
        let u = DiscreteMeasure::uniform_grid(1, 32).unwrap();
        let z = GridField::zeros(1, 32).unwrap();
        assert_eq!(f_functional(&z, 1.0, &u).unwrap(), 0.0);
        let phi = GridField::from_fn(1, 32, |x: &[f64]| 0.02 * (2.0 * PI * x[0]).sin()).unwrap();
        let a = f_functional(&phi, 1.5, &bump(32)).unwrap();
        let b = f_functional(&phi.add_scalar(-2.3), 1.5, &bump(32)).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        assert_eq!(f_functional(&z, 0.0, &u), Err(Error::BetaZero));
    }

    #[test]
    fn uniform_background_is_a_fixed_point() {
        let u = DiscreteMeasure::uniform_grid(1, 64).unwrap();
        let r = minimize_f(1.0, &u, 64, 1e-10, 50, None).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert!(r.phi.sup_norm() <= 1e-12);
    }

    #[test]
    fn solver_matches_oracle_and_descends() {
        let g = 128;
        let mu = bump(g);
        let r = minimize_f(1.0, &mu, g, 1e-10, 200, None).unwrap();
        assert!(r.converged, "residual {}", r.residual);
        for w in r.trajectory.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let f = mu.as_grid().unwrap().clone();
        let o = ode_oracle_1d(1.0, &f, g).unwrap();
        assert!(
            r.phi.sup_distance(&o.phi).unwrap() <= 1e-8,
            "{}",
            r.phi.sup_distance(&o.phi).unwrap()
        );
        let m: f64 = r.ma_masses.iter().sum();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_endpoints_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: GridField<f64> = random_cconvex(1, 64, 0.3, &mut rng).unwrap();
        let b: GridField<f64> = random_cconvex(1, 64, 0.3, &mut rng).unwrap();
        assert!(geodesic(&a, &b, 0.0).unwrap().sup_distance(&a).unwrap() <= 1e-15);
        assert!(geodesic(&a, &b, 1.0).unwrap().sup_distance(&b).unwrap() <= 1e-15);
        let z = GridField::zeros(1, 64).unwrap();
        let c = GridField::constant(1, 64, 0.4).unwrap();
        let mid = geodesic(&z, &c, 0.25).unwrap();
        for v in mid.values() {
            assert_abs_diff_eq!(*v, 0.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn uniqueness_on_uniform_background() {
        let u = DiscreteMeasure::uniform_grid(1, 64).unwrap();
        let rep = uniqueness_probe(1.0, &u, 64, 5, 11, 1e-10, 200).unwrap();
        assert!(rep.all_converged);
        assert!(rep.spread <= 1e-6, "{}", rep.spread);
    }
}
