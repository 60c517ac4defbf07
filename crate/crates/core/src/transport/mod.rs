//! Wasserstein costs, the configuration distance, relative entropy, the
//! large deviation rate function and Kantorovich duality.

mod assignment;
mod atomize;
mod dual;

pub use assignment::{circle_shift_cost, hungarian, transport_integer};
pub use atomize::{atomize, atomize_pair, counts_for, natural_denominator, ATOM_CAP};
pub use dual::{duality_gap, duality_gap_trace, DualityTrace};

use serde::Serialize;

use crate::ctransform::xi;
use crate::ensemble::Configuration;
use crate::torus::{axis_gap, dist2_coords, pairwise_sum, DiscreteMeasure, GridField};
use crate::{Error, Real, Result};

/// Above this many atoms the cubic assignment solver is replaced: 1-d
/// problems use the cyclic-shift scan, others a transportation solver on
/// the distinct atoms.
const HUNGARIAN_MAX_1D: usize = 512;

/// Per-pair transport cost for exponent 1 (`d`) or 2 (`d²/2`).
fn pair_cost<T: Real>(exponent: u8, x: &[T], y: &[T]) -> T {
    let d2 = dist2_coords(x, y);
    if exponent == 1 {
        d2.sqrt()
    } else {
        d2 * T::lit(0.5)
    }
}

/// Runs of equal consecutive atoms as `(point, count)`.
fn runs<T: Real>(xs: &[Vec<T>]) -> (Vec<&Vec<T>>, Vec<usize>) {
    let mut pts: Vec<&Vec<T>> = Vec::new();
    let mut counts = Vec::new();
    for x in xs {
        if pts.last() == Some(&x) {
            *counts.last_mut().expect("parallel to pts") += 1;
        } else {
            pts.push(x);
            counts.push(1);
        }
    }
    (pts, counts)
}

/// Mean matched cost of two equal-length atom lists.
fn assignment_mean<T: Real>(xs: &[Vec<T>], ys: &[Vec<T>], exponent: u8) -> T {
    let n = xs.len();
    let dim = xs.first().map_or(1, Vec::len);
    if dim > 1 && n > HUNGARIAN_MAX_1D {
        // atom lists from atomization repeat each support point contiguously
        let (px, cx) = runs(xs);
        let (py, cy) = runs(ys);
        let cost: Vec<T> = px
            .iter()
            .flat_map(|x| py.iter().map(move |y| pair_cost(exponent, x, y)))
            .collect();
        return transport_integer(&cx, &cy, &cost) / T::of(n);
    }
    if dim == 1 && n > HUNGARIAN_MAX_1D {
        let a: Vec<T> = xs.iter().map(|p| p[0]).collect();
        let b: Vec<T> = ys.iter().map(|p| p[0]).collect();
        let total = circle_shift_cost(&a, &b, |u, v| {
            let d = axis_gap(u, v);
            if exponent == 1 {
                d
            } else {
                d * d * T::lit(0.5)
            }
        });
        return total / T::of(n);
    }
    let mut cost = Vec::with_capacity(n * n);
    for x in xs {
        for y in ys {
            cost.push(pair_cost(exponent, x, y));
        }
    }
    let col = hungarian(n, &cost);
    let matched: Vec<T> = col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .collect();
    pairwise_sum(&matched) / T::of(n)
}

/// `d^(N)(x, y) = (1/N) min_σ Σ d(x_i, y_σ(i))`.
pub fn config_distance<T: Real>(x: &Configuration<T>, y: &Configuration<T>) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Ok(T::zero());
    }
    // canonical argument order makes the result bitwise symmetric
    let flat = |c: &Configuration<T>| -> Vec<Vec<T>> {
        c.canonical()
            .points
            .iter()
            .map(|p| p.coords().to_vec())
            .collect()
    };
    let (xs, ys) = (flat(x), flat(y));
    let swap = xs
        .iter()
        .flatten()
        .zip(ys.iter().flatten())
        .find(|(a, b)| a != b)
        .is_some_and(|(a, b)| a > b);
    Ok(if swap {
        assignment_mean(&ys, &xs, 1)
    } else {
        assignment_mean(&xs, &ys, 1)
    })
}

/// Optimal transport cost with cost `d` (exponent 1) or `d²/2`
/// (exponent 2) after reduction to equal-weight atoms.
pub fn wasserstein_cost<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    exponent: u8,
) -> Result<T> {
    if exponent != 1 && exponent != 2 {
        return Err(Error::InvalidInput(format!(
            "exponent must be 1 or 2, got {exponent}"
        )));
    }
    let (xs, ys) = atomize_pair(mu, nu)?;
    Ok(assignment_mean(&xs, &ys, exponent))
}

/// Exact `W₁` on the circle: `∫ |F_μ - F_ν - m| dx` with `m` a median of
/// the CDF difference.
pub fn circle_w1<T: Real>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> Result<T> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::UnsupportedSize(
            "circle W1 needs 1-d measures".into(),
        ));
    }
    let tm = mu.total_mass();
    let tn = nu.total_mass();
    let mut events: Vec<(T, T)> = mu
        .to_weighted_points()
        .into_iter()
        .map(|(p, w)| (p.coords()[0], w / tm))
        .chain(
            nu.to_weighted_points()
                .into_iter()
                .map(|(p, w)| (p.coords()[0], -w / tn)),
        )
        .collect();
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // CDF difference on each interval between consecutive event points
    let mut segs: Vec<(T, T)> = Vec::with_capacity(events.len());
    let mut f = T::zero();
    for (i, &(x, w)) in events.iter().enumerate() {
        f += w;
        let next = if i + 1 < events.len() {
            events[i + 1].0
        } else {
            events[0].0 + T::one()
        };
        if next > x {
            segs.push((f, next - x));
        }
    }
    if segs.is_empty() {
        return Ok(T::zero());
    }
    let mut sorted = segs.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut acc = T::zero();
    let mut median = sorted[0].0;
    for &(v, len) in &sorted {
        acc += len;
        if acc >= T::lit(0.5) {
            median = v;
            break;
        }
    }
    Ok(segs.iter().map(|&(v, len)| (v - median).abs() * len).sum())
}

/// `Σ μ_i log(μ_i / μ₀_i)` over cells, `+∞` off absolute continuity.
pub fn relative_entropy<T: Real>(mu: &DiscreteMeasure<T>, mu0: &DiscreteMeasure<T>) -> Result<T> {
    mu.grid_or_err()?.check_same_grid(mu0.grid_or_err()?)?;
    let a = mu.cell_masses()?;
    let b = mu0.cell_masses()?;
    let mut terms = Vec::with_capacity(a.len());
    for (&m, &m0) in a.iter().zip(&b) {
        if m <= T::zero() {
            continue;
        }
        if m0 <= T::zero() {
            return Ok(T::infinity());
        }
        terms.push(m * (m / m0).ln());
    }
    Ok(pairwise_sum(&terms).max(T::zero()))
}

/// The rate function and its parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFunctionReport<T> {
    pub w2: T,
    pub entropy: T,
    #[serde(rename = "constant_C")]
    pub constant_c: T,
    #[serde(rename = "G_value")]
    pub g_value: T,
}

/// `G(μ) = βW²(μ, dx) + Ent_{μ₀}(μ) + C` with `C` chosen so `G(μ*) = 0`.
/// `dx` is the uniform measure on the grid of `μ`.
pub fn rate_function<T: Real>(
    mu: &DiscreteMeasure<T>,
    beta: T,
    mu0: &DiscreteMeasure<T>,
    mu_star: &DiscreteMeasure<T>,
) -> Result<RateFunctionReport<T>> {
    let unnormalized = |m: &DiscreteMeasure<T>| -> Result<(T, T)> {
        let g = m.grid_or_err()?;
        let dx = DiscreteMeasure::uniform_grid(g.dim(), g.res())?;
        Ok((wasserstein_cost(m, &dx, 2)?, relative_entropy(m, mu0)?))
    };
    let (w2s, ents) = unnormalized(mu_star)?;
    let constant_c = -(beta * w2s + ents);
    let (w2, entropy) = unnormalized(mu)?;
    Ok(RateFunctionReport {
        w2,
        entropy,
        constant_c,
        g_value: beta * w2 + entropy + constant_c,
    })
}

/// `J(φ) = -∫ φ dμ - ξ(φ)` on a common grid.
pub fn kantorovich_dual<T: Real>(phi: &GridField<T>, mu: &DiscreteMeasure<T>) -> Result<T> {
    phi.check_same_grid(mu.grid_or_err()?)?;
    let m = mu.cell_masses()?;
    let terms: Vec<T> = phi.values().iter().zip(&m).map(|(&f, &w)| f * w).collect();
    Ok(-pairwise_sum(&terms) - xi(phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusPoint;
    use approx::assert_abs_diff_eq;

    fn atoms(xs: &[f64]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::uniform_atoms(
            xs.iter()
                .map(|&x| TorusPoint::wrap(&[x]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn config_distance_examples() {
        let c = |v: &[f64]| Configuration::from_line(v).unwrap();
        assert_eq!(
            config_distance(&c(&[0.0, 0.5]), &c(&[0.5, 0.0])).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            config_distance(&c(&[0.1]), &c(&[0.3])).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        assert_eq!(
            config_distance(&c(&[0.1]), &c(&[0.3, 0.4])),
            Err(Error::SizeMismatch(1, 2))
        );
    }

    #[test]
    fn wasserstein_examples() {
        let m = atoms(&[0.1, 0.4, 0.8]);
        assert_eq!(wasserstein_cost(&m, &m, 2).unwrap(), 0.0);
        assert_abs_diff_eq!(
            wasserstein_cost(&atoms(&[0.0, 0.5]), &atoms(&[0.25, 0.75]), 2).unwrap(),
            0.03125,
            epsilon = 1e-15
        );
        let delta = atoms(&[0.0; 1024]);
        let dx = DiscreteMeasure::uniform_grid(1, 1024).unwrap();
        assert_abs_diff_eq!(
            wasserstein_cost(&delta, &dx, 2).unwrap(),
            1.0 / 24.0,
            epsilon = 1e-3
        );
        assert!(wasserstein_cost(&m, &m, 3).is_err());
    }

    #[test]
    fn circle_w1_examples() {
        assert_abs_diff_eq!(
            circle_w1(&atoms(&[0.1]), &atoms(&[0.3])).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            circle_w1(&atoms(&[0.1]), &atoms(&[0.9])).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        let delta = atoms(&[0.0]);
        let dx = DiscreteMeasure::uniform_grid(1, 1000).unwrap();
        // mean distance to a point is 1/4, up to the grid's O(1/G²) error
        assert_abs_diff_eq!(circle_w1(&delta, &dx).unwrap(), 0.25, epsilon = 1e-5);
        assert_eq!(circle_w1(&dx, &dx).unwrap(), 0.0);
    }

    #[test]
    fn entropy_examples() {
        let u = DiscreteMeasure::uniform_grid(1, 16).unwrap();
        assert_eq!(relative_entropy(&u, &u).unwrap(), 0.0);
        let half = DiscreteMeasure::grid(
            GridField::from_fn(1, 16, |x: &[f64]| if x[0] < 0.5 { 2.0 } else { 0.0 }).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            relative_entropy(&half, &u).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(relative_entropy(&u, &half).unwrap(), f64::INFINITY);
        let other = DiscreteMeasure::uniform_grid(1, 8).unwrap();
        assert!(matches!(
            relative_entropy(&u, &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn rate_function_at_uniform() {
        let u = DiscreteMeasure::uniform_grid(1, 64).unwrap();
        let r = rate_function(&u, 1.0, &u, &u).unwrap();
        assert_eq!(r.g_value, 0.0);
        assert_eq!(r.constant_c, 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"constant_C\"") && json.contains("\"G_value\""));
    }

    #[test]
    fn dual_examples() {
        let u = DiscreteMeasure::uniform_grid(1, 32).unwrap();
        let z = GridField::zeros(1, 32).unwrap();
        assert_eq!(kantorovich_dual(&z, &u).unwrap(), 0.0);
        let phi = GridField::from_fn(1, 32, |x: &[f64]| 0.05 * (6.0 * x[0]).sin()).unwrap();
        let a = kantorovich_dual(&phi, &u).unwrap();
        let b = kantorovich_dual(&phi.add_scalar(1.7), &u).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }
}
