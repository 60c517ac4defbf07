//! c-convex calculus on grids: c-transforms, projections onto c-convex
//! functions, c-gradients and Monge-Ampère measures.
//!
//! The grid operations take the max over grid nodes on both sides. The
//! [`continuum_cells`] variant lets the dual variable range over the whole
//! torus, which makes `ξ` differentiable and is what the solver descends on.

mod cells;

pub use cells::{continuum_cells, ContinuumCells};

use rayon::prelude::*;

use crate::torus::{DiscreteMeasure, GridField, TorusPoint};
use crate::{Error, Real, Result};

/// Absolute tolerance under which two candidate maxima count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Per-axis cost between grid nodes: `table[(i - j) mod G] = (min(|i-j|, G-|i-j|)/G)²/2`.
#[derive(Debug, Clone)]
pub(crate) struct AxisCost<T> {
    res: usize,
    table: Vec<T>,
}

impl<T: Real> AxisCost<T> {
    pub(crate) fn new(res: usize) -> Self {
        let g = T::of(res);
        let table = (0..res)
            .map(|d| {
                let s = T::of(d.min(res - d)) / g;
                s * s * T::lit(0.5)
            })
            .collect();
        Self { res, table }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> T {
        let d = if i >= j { i - j } else { i + self.res - j };
        self.table[d]
    }
}

/// One-axis transform: `out[b] = max_i (-c(i, b) - f[i])`.
fn axis_transform<T: Real>(cost: &AxisCost<T>, f: &[T], out: &mut [T]) {
    let g = cost.res;
    for (b, o) in out.iter_mut().enumerate() {
        let mut best = T::neg_infinity();
        for (i, &fi) in f.iter().enumerate().take(g) {
            let v = -cost.get(i, b) - fi;
            if v > best {
                best = v;
            }
        }
        *o = best;
    }
}

/// `φ^c(y) = max_x (-c(x, y) - φ(x))` with `x` ranging over grid nodes.
pub fn c_transform<T: Real>(phi: &GridField<T>) -> GridField<T> {
    let g = phi.res();
    let cost = AxisCost::<T>::new(g);
    let v = phi.values();
    let out = if phi.dim() == 1 {
        (0..g)
            .into_par_iter()
            .map(|j| {
                let mut best = T::neg_infinity();
                for (i, &vi) in v.iter().enumerate() {
                    let c = -cost.get(i, j) - vi;
                    if c > best {
                        best = c;
                    }
                }
                best
            })
            .collect()
    } else {
        // The cost is a sum over axes, so the max factors:
        // φ^c(a, b) = max_{i0} [-c(i0, a) + max_{i1} (-c(i1, b) - φ(i0, i1))].
        let mut inner = vec![T::zero(); g * g]; // inner[i0 * g + b]
        inner.par_chunks_mut(g).enumerate().for_each(|(i0, row)| {
            axis_transform(&cost, &v[i0 * g..(i0 + 1) * g], row);
        });
        let mut out = vec![T::zero(); g * g];
        out.par_chunks_mut(g).enumerate().for_each(|(a, row)| {
            for (b, o) in row.iter_mut().enumerate() {
                let mut best = T::neg_infinity();
                for i0 in 0..g {
                    let c = -cost.get(i0, a) + inner[i0 * g + b];
                    if c > best {
                        best = c;
                    }
                }
                *o = best;
            }
        });
        out
    };
    GridField::new(phi.dim(), g, out).expect("c-transform of a finite field is finite")
}

/// `(φ^c)^c`, the largest c-convex grid function below `φ`.
pub fn project_cconvex<T: Real>(phi: &GridField<T>) -> GridField<T> {
    c_transform(&c_transform(phi))
}

/// Result of [`c_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct CGradientField<T> {
    pub dim: usize,
    pub res: usize,
    /// Image point of every node (also set where undefined, to the tie-broken choice).
    pub map: Vec<TorusPoint<T>>,
    /// Grid index of the image node.
    pub target: Vec<usize>,
    pub defined_mask: Vec<bool>,
}

impl<T: Real> CGradientField<T> {
    pub fn defined_fraction(&self) -> f64 {
        self.defined_mask.iter().filter(|&&d| d).count() as f64 / self.defined_mask.len() as f64
    }
}

fn wrapped_index_gap(a: usize, b: usize, g: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(g - d)
}

fn within_one_cell(a: usize, b: usize, dim: usize, g: usize) -> bool {
    if dim == 1 {
        wrapped_index_gap(a, b, g) <= 1
    } else {
        wrapped_index_gap(a / g, b / g, g) <= 1 && wrapped_index_gap(a % g, b % g, g) <= 1
    }
}

/// The grid c-gradient: node `x` maps to the node `y` maximizing
/// `-c(x, y) - φ^c(y)`.
///
/// Near-ties (within [`TIE_TOL`]) between nodes that are adjacent resolve to
/// the lowest index; a near-tie with a node more than one cell away marks
/// the entry undefined.
pub fn c_gradient<T: Real>(phi: &GridField<T>) -> CGradientField<T> {
    let psi = c_transform(phi);
    let g = phi.res();
    let dim = phi.dim();
    let cost = AxisCost::<T>::new(g);
    let tol = T::lit(TIE_TOL);
    let pv = psi.values();
    let n = pv.len();
    let pair_cost = |x: usize, y: usize| -> T {
        if dim == 1 {
            cost.get(x, y)
        } else {
            cost.get(x / g, y / g) + cost.get(x % g, y % g)
        }
    };
    let results: Vec<(usize, bool)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut vals = Vec::with_capacity(n);
            let mut best = T::neg_infinity();
            for (y, &p) in pv.iter().enumerate() {
                let v = -pair_cost(x, y) - p;
                vals.push(v);
                if v > best {
                    best = v;
                }
            }
            let first = vals.iter().position(|&v| v == best).expect("nonempty grid");
            let mut chosen = first;
            let mut defined = true;
            for (y, &v) in vals.iter().enumerate() {
                if v >= best - tol {
                    if within_one_cell(y, first, dim, g) {
                        chosen = chosen.min(y);
                    } else {
                        defined = false;
                    }
                }
            }
            (chosen, defined)
        })
        .collect();
    let map = results
        .iter()
        .map(|&(t, _)| TorusPoint::wrap(&phi.node_coords(t)).expect("finite node"))
        .collect();
    CGradientField {
        dim,
        res: g,
        map,
        target: results.iter().map(|r| r.0).collect(),
        defined_mask: results.iter().map(|r| r.1).collect(),
    }
}

/// `MA(φ) = (∇^c φ^c)_* dx` on the grid: each node sends mass `G⁻ⁿ` to its
/// image under the c-gradient of `φ^c`.
pub fn ma_measure<T: Real>(phi: &GridField<T>) -> DiscreteMeasure<T> {
    let grad = c_gradient(&c_transform(phi));
    let n = phi.len();
    let mut counts = vec![0usize; n];
    for &t in &grad.target {
        counts[t] += 1;
    }
    let density = counts.into_iter().map(T::of).collect();
    DiscreteMeasure::Grid(GridField::new(phi.dim(), phi.res(), density).expect("finite counts"))
}

/// `det(D²φ + I)` by central differences, without a positivity check.
pub fn ma_hessian_unchecked<T: Real>(phi: &GridField<T>) -> GridField<T> {
    let g = phi.res();
    let h2 = T::of(g) * T::of(g);
    let v = phi.values();
    let out: Vec<T> = if phi.dim() == 1 {
        (0..g)
            .map(|i| {
                let d2 = (v[(i + 1) % g] - v[i] - v[i] + v[(i + g - 1) % g]) * h2;
                d2 + T::one()
            })
            .collect()
    } else {
        let at = |a: usize, b: usize| v[(a % g) * g + (b % g)];
        (0..g * g)
            .map(|idx| {
                let (a, b) = (idx / g + g, idx % g + g);
                let c = at(a, b);
                let fxx = (at(a + 1, b) - c - c + at(a - 1, b)) * h2;
                let fyy = (at(a, b + 1) - c - c + at(a, b - 1)) * h2;
                let fxy = (at(a + 1, b + 1) - at(a + 1, b - 1) - at(a - 1, b + 1)
                    + at(a - 1, b - 1))
                    * h2
                    * T::lit(0.25);
                (fxx + T::one()) * (fyy + T::one()) - fxy * fxy
            })
            .collect()
    };
    GridField::new(phi.dim(), g, out).expect("finite differences of a finite field")
}

/// `det(D²φ + I)` by central differences (`φ'' + 1` in 1-D).
///
/// Fails with [`Error::NegativeDeterminant`] when some node is not
/// quasi-convex.
pub fn ma_hessian<T: Real>(phi: &GridField<T>) -> Result<GridField<T>> {
    let d = ma_hessian_unchecked(phi);
    let bad: Vec<T> = d
        .values()
        .iter()
        .copied()
        .filter(|&x| x <= T::zero())
        .collect();
    if bad.is_empty() {
        Ok(d)
    } else {
        let min = bad.iter().fold(T::infinity(), |m, &x| m.min(x));
        Err(Error::NegativeDeterminant {
            count: bad.len(),
            min: min.to_f64_lossy(),
        })
    }
}

/// `ξ(φ) = ∫ φ^c dx`.
pub fn xi<T: Real>(phi: &GridField<T>) -> T {
    crate::torus::quadrature(&c_transform(phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cos_field(g: usize, a: f64) -> GridField<f64> {
        GridField::from_fn(1, g, |x: &[f64]| a * (2.0 * PI * x[0]).cos()).unwrap()
    }

    /// Direct O(G²) transform with coordinates, independent of the cost table.
    fn brute_transform(phi: &GridField<f64>) -> Vec<f64> {
        (0..phi.len())
            .map(|j| {
                let y = phi.node_coords(j);
                (0..phi.len())
                    .map(|i| {
                        let x = phi.node_coords(i);
                        let d2: f64 = x
                            .iter()
                            .zip(&y)
                            .map(|(a, b)| {
                                let t = (a - b).abs();
                                let t = t.min(1.0 - t);
                                t * t
                            })
                            .sum();
                        -d2 / 2.0 - phi.values()[i]
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn transform_of_constants() {
        let z = GridField::<f64>::zeros(1, 32).unwrap();
        assert!(c_transform(&z).values().iter().all(|&v| v == 0.0));
        let a = GridField::<f64>::constant(2, 8, 0.7).unwrap();
        assert!(c_transform(&a).values().iter().all(|&v| v == -0.7));
    }

    #[test]
    fn transform_matches_brute_force() {
        let phi = cos_field(256, 0.1);
        let fast = c_transform(&phi);
        let slow = brute_transform(&phi);
        for (a, b) in fast.values().iter().zip(&slow) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
        // 2-d separable path
        let phi2 = GridField::from_fn(2, 12, |x: &[f64]| {
            0.05 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + 0.1 * x[0] * (1.0 - x[0])
        })
        .unwrap();
        let fast = c_transform(&phi2);
        let slow = brute_transform(&phi2);
        for (a, b) in fast.values().iter().zip(&slow) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn projection_examples() {
        let z = GridField::<f64>::zeros(1, 16).unwrap();
        assert_eq!(project_cconvex(&z), z);
        let mut spike = vec![0.0; 64];
        spike[10] = 1.0;
        let s = GridField::new(1, 64, spike).unwrap();
        let p = project_cconvex(&s);
        for (a, b) in p.values().iter().zip(s.values()) {
            assert!(a <= b);
        }
        assert!(p.values()[10] < 1.0 - 0.5);
        let pp = project_cconvex(&p);
        assert_eq!(pp, p);
    }

    #[test]
    fn gradient_of_zero_is_identity() {
        let z = GridField::<f64>::zeros(1, 128).unwrap();
        let gr = c_gradient(&z);
        assert!(gr.defined_mask.iter().all(|&d| d));
        assert_eq!(gr.target, (0..128).collect::<Vec<_>>());
        let z2 = GridField::<f64>::zeros(2, 8).unwrap();
        assert_eq!(c_gradient(&z2).target, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn gradient_defined_for_smooth_cconvex() {
        let phi = project_cconvex(&cos_field(256, 0.01));
        let gr = c_gradient(&phi);
        assert!(gr.defined_fraction() >= 0.99, "{}", gr.defined_fraction());
    }

    #[test]
    fn gradient_tie_opposite_a_cone() {
        // φ = -c(·, 0): every y has two far-apart maximizers at the antipode
        let phi = GridField::from_fn(1, 64, |x: &[f64]| {
            let d = x[0].min(1.0 - x[0]);
            -d * d / 2.0
        })
        .unwrap();
        let gr = c_gradient(&phi);
        assert!(!gr.defined_mask[32]);
    }

    #[test]
    fn ma_measure_examples() {
        let z = GridField::<f64>::zeros(1, 64).unwrap();
        let m = ma_measure(&z);
        assert!(m.as_grid().unwrap().values().iter().all(|&v| v == 1.0));
        let c = GridField::<f64>::constant(1, 64, 3.5).unwrap();
        assert_eq!(ma_measure(&c), m);
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hessian_examples() {
        let z = GridField::<f64>::zeros(2, 16).unwrap();
        assert!(ma_hessian(&z).unwrap().values().iter().all(|&v| v == 1.0));
        let a = 0.02;
        let phi = cos_field(256, a);
        let d = ma_hessian(&phi).unwrap();
        for (i, v) in d.values().iter().enumerate() {
            let x = i as f64 / 256.0;
            let exact = 1.0 - 4.0 * PI * PI * a * (2.0 * PI * x).cos();
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-3);
        }
        assert!(matches!(
            ma_hessian(&cos_field(64, 1.0)),
            Err(Error::NegativeDeterminant { .. })
        ));
    }

    #[test]
    fn xi_examples() {
        let z = GridField::<f64>::zeros(1, 64).unwrap();
        assert_eq!(xi(&z), 0.0);
        let phi = cos_field(256, 0.1);
        assert_abs_diff_eq!(xi(&phi.add_scalar(0.3)), xi(&phi) - 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(xi(&phi), crate::torus::quadrature(&c_transform(&phi)));
    }
}
