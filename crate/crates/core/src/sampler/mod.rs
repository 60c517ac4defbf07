//! β-deformed permanental Gibbs measures: Metropolis sampling, empirical
//! measures, first-marginal potentials and the zero-temperature moment
//! generating function.

mod marginal;

pub use marginal::{
    marginal_phi_exact, mgf_zero_temp, transport_potential_estimate, PotentialEstimate,
};

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{
    log_permanent, log_wave_function, Configuration, EnsembleSpec, MAX_PERMANENT_SIZE,
};
use crate::torus::{fmt17, wrap_unit, DiscreteMeasure, TorusPoint};
use crate::{Error, Real, Result};

/// `(β/k) log perm(Ψ_{p_i}(x_j)) + Σ_j log μ₀(x_j)`.
pub fn log_density_unnormalized<T: Real>(
    cfg: &Configuration<T>,
    spec: &EnsembleSpec<T>,
) -> Result<T> {
    spec.check(cfg)?;
    let cfg = &cfg.canonical();
    let bg: T = cfg
        .points
        .iter()
        .map(|p| spec.mu0.log_density_at(p.coords()))
        .sum();
    if spec.beta == T::zero() {
        return Ok(bg);
    }
    let l = spec.log_wave_matrix(cfg)?;
    Ok(spec.beta / T::of(spec.k) * log_permanent(&l)? + bg)
}

/// Markov chain settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainParams {
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_sigma: f64,
    pub seed: u64,
    pub n_chains: usize,
}

impl ChainParams {
    pub fn new(
        n_steps: usize,
        burn_in: usize,
        thin: usize,
        proposal_sigma: f64,
        seed: u64,
        n_chains: usize,
    ) -> Result<Self> {
        let p = Self {
            n_steps,
            burn_in,
            thin,
            proposal_sigma,
            seed,
            n_chains,
        };
        p.validate()?;
        Ok(p)
    }

    /// Proposal width `1/(2k)`, capped at 1/2.
    pub fn default_sigma(k: usize) -> f64 {
        (0.5 / k.max(1) as f64).min(0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps <= self.burn_in {
            return Err(Error::InvalidInput("n_steps must exceed burn_in".into()));
        }
        if self.thin == 0 || self.n_chains == 0 {
            return Err(Error::InvalidInput(
                "thin and n_chains must be at least 1".into(),
            ));
        }
        if !(self.proposal_sigma > 0.0 && self.proposal_sigma <= 0.5) {
            return Err(Error::InvalidInput(
                "proposal_sigma must lie in (0, 0.5]".into(),
            ));
        }
        Ok(())
    }
}

/// Thinned post-burn-in states of all chains, ordered by chain then step.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    pub configurations: Vec<Configuration<T>>,
    /// `(chain, step)` of each recorded configuration.
    pub origin: Vec<(usize, usize)>,
    pub acceptance_rate: f64,
    pub seed: u64,
    /// Set when the acceptance rate suggests a chain that barely moves or
    /// barely rejects.
    pub warning: Option<String>,
    pub spec: EnsembleSpec<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub acceptance_rate: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl<T: Real> SampleSet<T> {
    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    pub fn summary(&self) -> SampleSummary {
        SampleSummary {
            acceptance_rate: self.acceptance_rate,
            n_samples: self.len(),
            seed: self.seed,
            warning: self.warning.clone(),
        }
    }

    /// One row per recorded state: `chain,step,x1_1,…` with particle
    /// coordinates flattened in particle order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.spec.n;
        let mut header = vec!["chain".to_string(), "step".to_string()];
        for j in 0..self.spec.size() {
            for a in 0..n {
                header.push(if n == 1 {
                    format!("x{}", j + 1)
                } else {
                    format!("x{}_{}", j + 1, a + 1)
                });
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (cfg, (chain, step)) in self.configurations.iter().zip(&self.origin) {
            let mut row = vec![chain.to_string(), step.to_string()];
            for p in &cfg.points {
                row.extend(p.coords().iter().map(|c| fmt17(c.to_f64_lossy())));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct ChainOutput<T> {
    states: Vec<(usize, Configuration<T>)>,
    accepted: usize,
    proposed: usize,
}

/// Log-wave matrix of a configuration plus its cached log-permanent.
struct ChainState<'a, T> {
    spec: &'a EnsembleSpec<T>,
    coords: Vec<Vec<T>>,
    l: Array2<T>,
    log_perm: T,
    log_bg: Vec<T>,
}

impl<'a, T: Real> ChainState<'a, T> {
    fn new(spec: &'a EnsembleSpec<T>, coords: Vec<Vec<T>>) -> Result<Self> {
        let n = spec.size();
        let pts: Vec<TorusPoint<T>> = coords
            .iter()
            .map(|c| TorusPoint::wrap(c))
            .collect::<Result<_>>()?;
        let l = Array2::from_shape_fn((n, n), |(i, j)| {
            log_wave_function(spec.k, &spec.points[i], &pts[j])
        });
        let log_perm = if spec.beta == T::zero() {
            T::zero()
        } else {
            log_permanent(&l)?
        };
        let log_bg = coords.iter().map(|c| spec.mu0.log_density_at(c)).collect();
        Ok(Self {
            spec,
            coords,
            l,
            log_perm,
            log_bg,
        })
    }

    fn configuration(&self) -> Configuration<T> {
        Configuration::new(
            self.coords
                .iter()
                .map(|c| TorusPoint::wrap(c).expect("wrapped"))
                .collect(),
        )
    }

    /// Metropolis move of particle `j` to `x`; returns whether it was accepted.
    fn try_move<R: Rng>(&mut self, j: usize, x: Vec<T>, rng: &mut R) -> Result<bool> {
        let spec = self.spec;
        let new_bg = spec.mu0.log_density_at(&x);
        let p = TorusPoint::wrap(&x)?;
        let new_col: Vec<T> = spec
            .points
            .iter()
            .map(|pi| log_wave_function(spec.k, pi, &p))
            .collect();
        let mut new_perm = self.log_perm;
        let mut delta = new_bg - self.log_bg[j];
        if spec.beta != T::zero() {
            let old_col: Vec<T> = self.l.column(j).to_vec();
            for (i, v) in new_col.iter().enumerate() {
                self.l[[i, j]] = *v;
            }
            new_perm = log_permanent(&self.l)?;
            delta += spec.beta / T::of(spec.k) * (new_perm - self.log_perm);
            for (i, v) in old_col.into_iter().enumerate() {
                self.l[[i, j]] = v;
            }
        }
        let u: f64 = rng.random();
        let accept = delta >= T::zero() || u.ln() < delta.to_f64_lossy();
        if accept {
            for (i, v) in new_col.into_iter().enumerate() {
                self.l[[i, j]] = v;
            }
            self.log_perm = new_perm;
            self.log_bg[j] = new_bg;
            self.coords[j] = x;
        }
        Ok(accept)
    }
}

fn run_chain<T: Real>(
    spec: &EnsembleSpec<T>,
    params: &ChainParams,
    chain: usize,
) -> Result<ChainOutput<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(chain as u64);
    let n = spec.size();
    let init: Vec<Vec<T>> = (0..n)
        .map(|_| (0..spec.n).map(|_| T::lit(rng.random::<f64>())).collect())
        .collect();
    let mut state = ChainState::new(spec, init)?;
    let mut out = ChainOutput {
        states: Vec::new(),
        accepted: 0,
        proposed: 0,
    };
    for step in 0..params.n_steps {
        let j = rng.random_range(0..n);
        let x: Vec<T> = state.coords[j]
            .iter()
            .map(|&c| {
                let z: f64 = rng.sample(StandardNormal);
                wrap_unit(c + T::lit(z * params.proposal_sigma))
            })
            .collect();
        let accepted = state.try_move(j, x, &mut rng)?;
        if step >= params.burn_in {
            out.proposed += 1;
            out.accepted += usize::from(accepted);
            if (step - params.burn_in).is_multiple_of(params.thin) {
                out.states.push((step, state.configuration()));
            }
        }
    }
    Ok(out)
}

/// Single-site Metropolis sampling of `μ_β^(N)`, one independent stream of
/// the master seed per chain. The acceptance rate counts post-burn-in moves.
pub fn mcmc_sample<T: Real>(spec: &EnsembleSpec<T>, params: &ChainParams) -> Result<SampleSet<T>> {
    params.validate()?;
    if spec.size() > MAX_PERMANENT_SIZE {
        return Err(Error::OversizeMatrix(spec.size()));
    }
    let outputs: Vec<ChainOutput<T>> = (0..params.n_chains)
        .into_par_iter()
        .map(|c| run_chain(spec, params, c))
        .collect::<Result<_>>()?;
    let mut configurations = Vec::new();
    let mut origin = Vec::new();
    let (mut acc, mut prop) = (0usize, 0usize);
    for (chain, o) in outputs.into_iter().enumerate() {
        acc += o.accepted;
        prop += o.proposed;
        for (step, cfg) in o.states {
            origin.push((chain, step));
            configurations.push(cfg);
        }
    }
    let acceptance_rate = acc as f64 / prop.max(1) as f64;
    let warning = if !(0.01..=0.99).contains(&acceptance_rate) {
        Some(format!("acceptance rate {acceptance_rate:.4} is outside [0.01, 0.99]; the chain may not be ergodic"))
    } else {
        None
    };
    Ok(SampleSet {
        configurations,
        origin,
        acceptance_rate,
        seed: params.seed,
        warning,
        spec: spec.clone(),
    })
}

/// `(1/N) Σ δ_{x_i}`.
pub fn empirical_measure<T: Real>(cfg: &Configuration<T>) -> Result<DiscreteMeasure<T>> {
    DiscreteMeasure::uniform_atoms(cfg.points.clone())
}

/// Average of the empirical measures, binned to the nearest node of a
/// grid of resolution `res` and returned as a density.
pub fn mean_empirical<T: Real>(samples: &SampleSet<T>, res: usize) -> Result<DiscreteMeasure<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let dim = samples.spec.n;
    let cells = res
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
    let mut counts = vec![0usize; cells];
    let mut total = 0usize;
    for cfg in &samples.configurations {
        for p in &cfg.points {
            counts[crate::torus::nearest_node(p.coords(), res)] += 1;
            total += 1;
        }
    }
    let masses: Vec<T> = counts.iter().map(|&c| T::of(c) / T::of(total)).collect();
    DiscreteMeasure::from_cell_masses(dim, res, masses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{wave_function, Background};
    use approx::assert_abs_diff_eq;

    fn line_spec(k: usize, beta: f64) -> EnsembleSpec<f64> {
        EnsembleSpec::lattice(1, k, beta, Background::Uniform).unwrap()
    }

    #[test]
    fn log_density_examples() {
        let cfg = Configuration::from_line(&[0.1, 0.6, 0.9]).unwrap();
        assert_eq!(
            log_density_unnormalized(&cfg, &line_spec(3, 0.0)).unwrap(),
            0.0
        );
        let spec = line_spec(3, 3.0);
        let lp = log_permanent(&spec.log_wave_matrix(&cfg).unwrap()).unwrap();
        assert_abs_diff_eq!(
            log_density_unnormalized(&cfg, &spec).unwrap(),
            lp,
            epsilon = 1e-14
        );
        let one = line_spec(1, 1.0);
        let v = log_density_unnormalized(&Configuration::from_line(&[0.0]).unwrap(), &one).unwrap();
        let psi: f64 = wave_function(1, &TorusPoint::origin(1), &TorusPoint::origin(1));
        assert_abs_diff_eq!(v, psi.ln(), epsilon = 1e-14);
    }

    #[test]
    fn exchange_symmetry() {
        let spec = line_spec(4, 1.3);
        let a = Configuration::from_line(&[0.1, 0.35, 0.6, 0.95]).unwrap();
        let b = Configuration::from_line(&[0.95, 0.1, 0.6, 0.35]).unwrap();
        let (x, y) = (
            log_density_unnormalized(&a, &spec).unwrap(),
            log_density_unnormalized(&b, &spec).unwrap(),
        );
        assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0));
    }

    #[test]
    fn params_validation() {
        assert!(ChainParams::new(10, 10, 1, 0.1, 0, 1).is_err());
        assert!(ChainParams::new(10, 0, 0, 0.1, 0, 1).is_err());
        assert!(ChainParams::new(10, 0, 1, 0.6, 0, 1).is_err());
        assert!(ChainParams::new(10, 0, 1, 0.5, 0, 1).is_ok());
    }

    #[test]
    fn determinism_and_bookkeeping() {
        let spec = line_spec(4, 1.0);
        let p = ChainParams::new(600, 100, 5, 0.125, 42, 2).unwrap();
        let a = mcmc_sample(&spec, &p).unwrap();
        let b = mcmc_sample(&spec, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 100);
        assert!(a.acceptance_rate > 0.0 && a.acceptance_rate <= 1.0);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("chain,step,x1,x2,x3,x4\n0,100,"));
    }

    #[test]
    fn empirical_examples() {
        let m = empirical_measure(&Configuration::from_line(&[0.2, 0.7]).unwrap()).unwrap();
        let pts = m.to_weighted_points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].1, 0.5);
        assert_eq!(m.total_mass(), 1.0);
        let single = empirical_measure(&Configuration::from_line(&[0.3]).unwrap()).unwrap();
        assert_eq!(single.total_mass(), 1.0);
    }

    #[test]
    fn mean_empirical_of_one_configuration() {
        let spec = line_spec(2, 1.0);
        let set = SampleSet {
            configurations: vec![Configuration::from_line(&[0.0, 0.5]).unwrap()],
            origin: vec![(0, 0)],
            acceptance_rate: 0.5,
            seed: 0,
            warning: None,
            spec: spec.clone(),
        };
        let m = mean_empirical(&set, 4).unwrap();
        let masses = m.cell_masses().unwrap();
        assert_eq!(masses, vec![0.5, 0.0, 0.5, 0.0]);
        let empty = SampleSet {
            configurations: vec![],
            origin: vec![],
            ..set
        };
        assert_eq!(mean_empirical(&empty, 4), Err(Error::EmptySampleSet));
    }
}
