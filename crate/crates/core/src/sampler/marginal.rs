use crate::ensemble::{log_sum_exp, log_wave_function, EnsembleSpec};
use crate::torus::pairwise_sum;
use crate::torus::{DiscreteMeasure, GridField, TorusPoint};
use crate::{Error, Real, Result};

/// Largest ensemble handled by [`marginal_phi_exact`].
pub const MARGINAL_MAX_N: usize = 4;

fn node_points<T: Real>(dim: usize, res: usize) -> Result<Vec<TorusPoint<T>>> {
    let g = GridField::<T>::zeros(dim, res)?;
    (0..g.len())
        .map(|i| TorusPoint::wrap(&g.node_coords(i)))
        .collect()
}

/// `log Ψ_{p_i}(x_a)` for every point and node, row `i`.
fn log_psi_table<T: Real>(spec: &EnsembleSpec<T>, nodes: &[TorusPoint<T>]) -> Vec<Vec<T>> {
    spec.points
        .iter()
        .map(|p| {
            nodes
                .iter()
                .map(|x| log_wave_function(spec.k, p, x))
                .collect()
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..n {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// First-marginal potential `φ_N = (1/β) log(dμ₁/dμ₀)` of the β-deformed
/// ensemble by product quadrature on `res` nodes. The other `N-1`
/// particles range over sorted node tuples with multinomial multiplicity,
/// since the permanent is symmetric in its columns.
pub fn marginal_phi_exact<T: Real>(spec: &EnsembleSpec<T>, res: usize) -> Result<GridField<T>> {
    if spec.beta == T::zero() {
        return Err(Error::BetaZero);
    }
    let n_part = spec.size();
    if spec.n != 1 || n_part > MARGINAL_MAX_N {
        return Err(Error::UnsupportedSize(format!(
            "exact marginals need n = 1 and N <= {MARGINAL_MAX_N} (got n = {}, N = {n_part})",
            spec.n
        )));
    }
    let nodes = node_points::<T>(1, res)?;
    let w = spec.mu0.to_measure(1, res)?.cell_masses()?;
    // rows rescaled by their maxima; the common factor cancels against Z
    let psi: Vec<Vec<T>> = log_psi_table(spec, &nodes)
        .into_iter()
        .map(|row| {
            let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            row.into_iter().map(|v| (v - m).exp()).collect()
        })
        .collect();
    let perms = permutations(n_part);
    let power = spec.beta / T::of(spec.k);
    let rest = n_part - 1;
    let rest_fact = T::of(factorial(rest));
    let mut marginal = vec![T::zero(); res];
    let mut cols = vec![0usize; n_part];
    for (a1, m_out) in marginal.iter_mut().enumerate() {
        cols[0] = a1;
        let mut terms = Vec::new();
        let mut tuple = vec![0usize; rest];
        loop {
            // multiplicity of the sorted tuple and its weight
            let mut mult = rest_fact;
            let mut weight = T::one();
            let mut run = 1usize;
            for t in 0..rest {
                weight *= w[tuple[t]];
                if t > 0 && tuple[t] == tuple[t - 1] {
                    run += 1;
                    mult /= T::of(run);
                } else {
                    run = 1;
                }
                cols[t + 1] = tuple[t];
            }
            let perm: T = perms
                .iter()
                .map(|s| {
                    s.iter()
                        .enumerate()
                        .fold(T::one(), |p, (i, &j)| p * psi[i][cols[j]])
                })
                .sum();
            terms.push(mult * weight * perm.powf(power));
            // next nondecreasing tuple
            let mut t = rest;
            loop {
                if t == 0 {
                    break;
                }
                t -= 1;
                if tuple[t] + 1 < res {
                    tuple[t] += 1;
                    let v = tuple[t];
                    for u in tuple.iter_mut().skip(t + 1) {
                        *u = v;
                    }
                    break;
                }
                if t == 0 {
                    t = usize::MAX;
                    break;
                }
            }
            if t == usize::MAX || rest == 0 {
                break;
            }
        }
        *m_out = pairwise_sum(&terms);
    }
    let zt: Vec<T> = marginal.iter().zip(&w).map(|(&m, &wa)| m * wa).collect();
    let z = pairwise_sum(&zt);
    let values = marginal.iter().map(|&m| (m / z).ln() / spec.beta).collect();
    GridField::new(1, res, values)
}

/// Both readings of the finite-N transport potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialEstimate<T> {
    /// `(1/k) log ∫ perm(Ψ_{p_i}(x_j)) dμ₀^{⊗(N-1)}`, zero mean.
    pub log_integral: GridField<T>,
    /// The same integral with prefactor `1/N`, zero mean.
    pub per_particle: GridField<T>,
}

/// Finite-N transport potential on a grid of resolution `res`.
///
/// The permanent is linear in each column, so integrating out
/// `x_2, …, x_N` replaces those columns by `I_i = ∫ Ψ_{p_i} dμ₀` and
/// `∫ perm = (N-1)! Π_l I_l Σ_i Ψ_{p_i}(x_1)/I_i`. This is exact for every
/// `N` and needs no permanent at all.
pub fn transport_potential_estimate<T: Real>(
    spec: &EnsembleSpec<T>,
    res: usize,
) -> Result<PotentialEstimate<T>> {
    if spec.n > 2 {
        return Err(Error::UnsupportedSize(format!(
            "dimension {} grids are not supported",
            spec.n
        )));
    }
    let nodes = node_points::<T>(spec.n, res)?;
    let log_w: Vec<T> = spec
        .mu0
        .to_measure(spec.n, res)?
        .cell_masses()?
        .into_iter()
        .map(|v| v.ln())
        .collect();
    let table = log_psi_table(spec, &nodes);
    let log_i: Vec<T> = table
        .iter()
        .map(|row| log_sum_exp(row.iter().zip(&log_w).map(|(&a, &b)| a + b)))
        .collect();
    let f: Vec<T> = (0..nodes.len())
        .map(|a| log_sum_exp(table.iter().zip(&log_i).map(|(row, &li)| row[a] - li)))
        .collect();
    let f = GridField::new(spec.n, res, f)?;
    Ok(PotentialEstimate {
        log_integral: f.scale(T::one() / T::of(spec.k)).zero_mean(),
        per_particle: f.scale(T::one() / T::of(spec.size())).zero_mean(),
    })
}

/// `(1/kN)[log N! + Σ_p log ∫ e^{k(φ - c_p)} dμ₀]` for the lattice
/// ensemble `N = k` on the circle, with `μ₀` and `φ` on the same grid.
pub fn mgf_zero_temp<T: Real>(k: usize, phi: &GridField<T>, mu0: &DiscreteMeasure<T>) -> Result<T> {
    if phi.dim() != 1 {
        return Err(Error::UnsupportedSize(
            "the zero-temperature mgf is implemented on the circle".into(),
        ));
    }
    if k == 0 || phi.res() < 8 * k {
        return Err(Error::InvalidInput(format!(
            "need k >= 1 and G >= 8k (k = {k}, G = {})",
            phi.res()
        )));
    }
    let mu = mu0.grid_or_err()?;
    phi.check_same_grid(mu)?;
    let w = mu0.cell_masses()?;
    let kt = T::of(k);
    let nodes = node_points::<T>(1, phi.res())?;
    let mut sum = T::zero();
    for i in 0..k {
        let p = TorusPoint::wrap(&[T::of(i) / kt])?;
        sum += log_sum_exp(
            nodes
                .iter()
                .zip(phi.values())
                .zip(&w)
                .filter(|(_, &wa)| wa > T::zero())
                .map(|((x, &f), &wa)| log_wave_function(k, &p, x) + kt * f + wa.ln()),
        );
    }
    let log_fact: T = (2..=k).map(|i| T::of(i).ln()).sum();
    Ok((log_fact + sum) / (kt * kt))
}
