use super::atomize::atomize;
use super::{assignment_mean, pair_cost};
use crate::torus::{pairwise_sum, DiscreteMeasure, GridField};
use crate::{Error, Real, Result};

/// Minimum number of nodes used to discretize `dx`.
const MIN_NODES: usize = 256;
const EPS_START: f64 = 1.0 / 16.0;
const EPS_FACTOR: f64 = 0.2;
const EPS_MIN: f64 = 1e-11;

/// Primal value and the best dual value after each ascent phase.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityTrace<T> {
    pub primal: T,
    /// Best `J` seen, starting with `J` at the zero potential.
    pub best_dual: Vec<T>,
    /// `primal - best_dual`, nonincreasing.
    pub gaps: Vec<T>,
}

/// Dual value `-Σ_a μ_a φ_a - (1/G) Σ_y φ^c(y)` of a potential on the atoms.
fn dual_value<T: Real>(atoms: &[Vec<T>], phi: &[T], nodes: &[Vec<T>]) -> T {
    let d = T::of(atoms.len());
    let first: Vec<T> = phi.iter().map(|&p| p / d).collect();
    let second: Vec<T> = nodes
        .iter()
        .map(|y| {
            atoms.iter().zip(phi).fold(T::neg_infinity(), |m, (x, &p)| {
                m.max(-pair_cost(2, x, y) - p)
            })
        })
        .collect();
    -pairwise_sum(&first) - pairwise_sum(&second) / T::of(nodes.len())
}

/// Atom potential induced by node prices: `φ(x) = max_y (-c(x, y) - π_y)`.
fn atom_potential<T: Real>(atoms: &[Vec<T>], prices: &[T], nodes: &[Vec<T>]) -> Vec<T> {
    atoms
        .iter()
        .map(|x| {
            nodes
                .iter()
                .zip(prices)
                .fold(T::neg_infinity(), |m, (y, &p)| {
                    m.max(-pair_cost(2, x, y) - p)
                })
        })
        .collect()
}

/// Kantorovich duality for `W²(μ, dx)` with `dx` on a grid whose node count
/// is a multiple of the atom count. The dual is improved by ε-scaling
/// auction phases (each bid raises one node price, a coordinate ascent
/// step on the dual); the atom potential is the c-transform of the prices.
/// Entry `t` of the trace is the state after `t` phases.
pub fn duality_gap_trace<T: Real>(
    mu: &DiscreteMeasure<T>,
    iterations: usize,
) -> Result<DualityTrace<T>> {
    let atoms = atomize(mu)?;
    let d = atoms.len();
    let dim = mu.dim();
    let reps = MIN_NODES.div_ceil(d);
    let total = d * reps;
    let side = match dim {
        1 => total,
        2 => {
            let s = (1..=64)
                .find(|s| s * s >= total && (s * s) % d == 0)
                .ok_or_else(|| {
                    Error::UnsupportedSize(format!(
                        "no square grid of at most 64² nodes fits {d} atoms"
                    ))
                })?;
            s
        }
        _ => return Err(Error::UnsupportedSize(format!("dimension {dim}"))),
    };
    let grid = GridField::<T>::zeros(dim, side)?;
    let nodes: Vec<Vec<T>> = (0..grid.len()).map(|i| grid.node_coords(i)).collect();
    let g = nodes.len();
    let reps = g / d;
    // persons: each atom repeated; objects: grid nodes
    let persons: Vec<Vec<T>> = atoms
        .iter()
        .flat_map(|a| std::iter::repeat_n(a.clone(), reps))
        .collect();
    let primal = assignment_mean(&persons, &nodes, 2);

    let mut prices = vec![T::zero(); g];
    let mut best = dual_value(&atoms, &atom_potential(&atoms, &prices, &nodes), &nodes);
    let mut trace = DualityTrace {
        primal,
        best_dual: vec![best],
        gaps: vec![primal - best],
    };
    let benefit: Vec<T> = persons
        .iter()
        .flat_map(|x| nodes.iter().map(move |y| -pair_cost(2, x, y)))
        .collect();
    let mut eps = T::lit(EPS_START);
    let mut settled = false;
    for _ in 0..iterations {
        if !settled {
            auction_phase(&benefit, g, &mut prices, eps);
            let j = dual_value(&atoms, &atom_potential(&atoms, &prices, &nodes), &nodes);
            if j > best {
                best = j;
            }
            settled = eps <= T::lit(EPS_MIN) || primal - best <= T::zero();
            eps = (eps * T::lit(EPS_FACTOR)).max(T::lit(EPS_MIN));
        }
        trace.best_dual.push(best);
        trace.gaps.push(primal - best);
    }
    Ok(trace)
}

/// `primal - best dual` after `iterations` ascent phases.
pub fn duality_gap<T: Real>(mu: &DiscreteMeasure<T>, iterations: usize) -> Result<T> {
    Ok(*duality_gap_trace(mu, iterations)?
        .gaps
        .last()
        .expect("trace has an initial entry"))
}

/// One forward auction run to a complete assignment at fixed `eps`,
/// starting from the current prices.
fn auction_phase<T: Real>(benefit: &[T], n: usize, prices: &mut [T], eps: T) {
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut queue: Vec<usize> = (0..n).rev().collect();
    while let Some(p) = queue.pop() {
        let row = &benefit[p * n..(p + 1) * n];
        let (mut v1, mut v2, mut o1) = (T::neg_infinity(), T::neg_infinity(), 0);
        for (o, (&b, &pr)) in row.iter().zip(prices.iter()).enumerate() {
            let v = b - pr;
            if v > v1 {
                v2 = v1;
                v1 = v;
                o1 = o;
            } else if v > v2 {
                v2 = v;
            }
        }
        let raise = if v2 == T::neg_infinity() {
            eps
        } else {
            v1 - v2 + eps
        };
        prices[o1] += raise;
        if let Some(q) = owner[o1].replace(p) {
            queue.push(q);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusPoint;

    #[test]
    fn uniform_measure_has_no_gap() {
        let u = DiscreteMeasure::<f64>::uniform_grid(1, 256).unwrap();
        let t = duality_gap_trace(&u, 3).unwrap();
        assert_eq!(t.gaps[0], 0.0);
        assert_eq!(t.primal, 0.0);
    }

    #[test]
    fn eight_atoms_converge_monotonically() {
        let xs = [0.03, 0.11, 0.2, 0.41, 0.47, 0.66, 0.7, 0.93];
        let mu = DiscreteMeasure::uniform_atoms(
            xs.iter()
                .map(|&x| TorusPoint::wrap(&[x]).unwrap())
                .collect(),
        )
        .unwrap();
        let t = duality_gap_trace(&mu, 40).unwrap();
        for w in t.gaps.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(t.gaps.iter().all(|&g| g >= -1e-9));
        assert!(*t.gaps.last().unwrap() <= 1e-6, "{:?}", t.gaps.last());
    }
}
