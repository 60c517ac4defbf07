use crate::linalg::lu_solve;
use crate::torus::GridField;
use crate::{Error, Real, Result};

const MAX_NEWTON: usize = 100;

/// Converged finite-difference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<T> {
    /// Zero-mean potential.
    pub phi: GridField<T>,
    /// Normalizing constant in `φ'' + 1 = ρ e^{βφ} f`.
    pub rho: T,
    /// `max_i |φ''_h + 1 - ρ e^{βφ} f|`.
    pub residual: T,
    pub iterations: usize,
}

fn equations<T: Real>(phi: &[T], rho: T, beta: T, f: &[T], h2inv: T) -> Vec<T> {
    let g = phi.len();
    let mut e: Vec<T> = (0..g)
        .map(|i| {
            let d2 = (phi[(i + 1) % g] - phi[i] - phi[i] + phi[(i + g - 1) % g]) * h2inv;
            d2 + T::one() - rho * (beta * phi[i]).exp() * f[i]
        })
        .collect();
    e.push(phi.iter().copied().sum::<T>() / T::of(g));
    e
}

fn sup<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn quasi_convex<T: Real>(phi: &[T], h2inv: T) -> bool {
    let g = phi.len();
    (0..g).all(|i| {
        (phi[(i + 1) % g] - phi[i] - phi[i] + phi[(i + g - 1) % g]) * h2inv + T::one() > T::zero()
    })
}

/// Damped Newton on the periodic system `φ''_h + 1 = ρ e^{βφ} f` with
/// unknowns `(φ, ρ)` and a zero-mean row, for a density `f` sampled (or
/// interpolated) at `res` nodes.
pub fn ode_oracle_1d<T: Real>(beta: T, f: &GridField<T>, res: usize) -> Result<OdeSolution<T>> {
    if f.dim() != 1 {
        return Err(Error::UnsupportedSize(
            "the finite-difference oracle is 1-d".into(),
        ));
    }
    let fv: Vec<T> = if f.res() == res {
        f.values().to_vec()
    } else {
        GridField::from_fn(1, res, |x| f.interpolate(x))?.into_values()
    };
    if fv.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::InvalidInput(
            "density must be strictly positive".into(),
        ));
    }
    let g = res;
    let h2inv = T::of(g) * T::of(g);
    let mut phi = vec![T::zero(); g];
    let mut rho = T::of(g) / fv.iter().copied().sum::<T>();
    let mut e = equations(&phi, rho, beta, &fv, h2inv);
    let tol = T::lit(64.0) * T::epsilon() * h2inv.sqrt().max(T::one());
    let n = g + 1;
    for it in 0..MAX_NEWTON {
        let r = sup(&e);
        if r <= tol {
            return Ok(OdeSolution {
                phi: GridField::new(1, g, phi)?,
                rho,
                residual: r,
                iterations: it,
            });
        }
        let mut jac = vec![T::zero(); n * n];
        for i in 0..g {
            let ex = (beta * phi[i]).exp() * fv[i];
            jac[i * n + (i + 1) % g] += h2inv;
            jac[i * n + (i + g - 1) % g] += h2inv;
            jac[i * n + i] += -T::lit(2.0) * h2inv - rho * beta * ex;
            jac[i * n + g] = -ex;
        }
        for j in 0..g {
            jac[g * n + j] = T::one() / T::of(g);
        }
        let mut step: Vec<T> = e.iter().map(|&v| -v).collect();
        lu_solve(&mut jac, n, &mut step).ok_or(Error::NewtonDivergence {
            iterations: it,
            residual: r.to_f64_lossy(),
        })?;
        let mut lambda = T::one();
        loop {
            let trial: Vec<T> = phi
                .iter()
                .zip(&step)
                .map(|(&p, &d)| p + lambda * d)
                .collect();
            let trial_rho = rho + lambda * step[g];
            let te = equations(&trial, trial_rho, beta, &fv, h2inv);
            if trial_rho > T::zero() && quasi_convex(&trial, h2inv) && sup(&te) < r {
                phi = trial;
                rho = trial_rho;
                e = te;
                break;
            }
            lambda *= T::lit(0.5);
            if lambda < T::lit(1e-10) {
                return Err(Error::NewtonDivergence {
                    iterations: it,
                    residual: r.to_f64_lossy(),
                });
            }
        }
    }
    Err(Error::NewtonDivergence {
        iterations: MAX_NEWTON,
        residual: sup(&e).to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctransform::ma_hessian;
    use std::f64::consts::PI;

    #[test]
    fn flat_density_gives_zero() {
        for beta in [-1.0, 0.5, 2.0] {
            let s = ode_oracle_1d(beta, &GridField::constant(1, 32, 1.0).unwrap(), 32).unwrap();
            assert!(s.phi.sup_norm() <= 1e-14);
        }
    }

    #[test]
    fn bump_density_converges() {
        let f =
            GridField::from_fn(1, 256, |x: &[f64]| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap();
        let s = ode_oracle_1d(1.0, &f, 256).unwrap();
        assert!(s.residual <= 1e-10);
        let h = ma_hessian(&s.phi).unwrap();
        let integral = crate::torus::quadrature(&h);
        assert!((integral - 1.0).abs() <= 1e-8);
    }
}
