//! Wave functions `Ψ_p`, the potentials `c_p = -(1/k) log Ψ_p`, permanents
//! and the N-particle Hamiltonian.

mod permanent;

pub use permanent::{glynn_column_major, log_permanent, log_sum_exp, MAX_PERMANENT_SIZE};

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::torus::{signed_gap, DiscreteMeasure, GridField, TorusPoint};
use crate::{Error, Real, Result};

/// Terms below `e^{-TRUNC}` times the leading term are dropped: `2 ln(1e17)`.
const TRUNC_EXPONENT: f64 = 78.28869;

/// `log Σ_{j∈Z} e^{-k(u-j)²/2}` for one axis.
fn log_axis_sum<T: Real>(k: T, u: T) -> T {
    let t0 = u - u.round();
    let half_k = k * T::lit(0.5);
    let radius = (T::lit(TRUNC_EXPONENT) / half_k + t0 * t0).sqrt();
    let lo = (t0 - radius).ceil().to_i64().unwrap_or(0);
    let hi = (t0 + radius).floor().to_i64().unwrap_or(0);
    let mut rest = T::zero();
    for j in lo..=hi {
        if j == 0 {
            continue;
        }
        let t = t0 - T::lit(j as f64);
        rest += (-half_k * (t * t - t0 * t0)).exp();
    }
    -half_k * t0 * t0 + rest.ln_1p()
}

/// `log Ψ_p(x) = log Σ_{m∈Zⁿ+p} e^{-k|x-m|²/2}`.
///
/// The lattice is a product, so the sum factors over axes; each axis keeps
/// every term within `e^{-78}` of its leading term.
pub fn log_wave_function<T: Real>(k: usize, p: &TorusPoint<T>, x: &TorusPoint<T>) -> T {
    let kt = T::of(k.max(1));
    p.coords()
        .iter()
        .zip(x.coords())
        .map(|(&pa, &xa)| log_axis_sum(kt, signed_gap(pa, xa)))
        .sum()
}

/// `Ψ_p(x)`.
pub fn wave_function<T: Real>(k: usize, p: &TorusPoint<T>, x: &TorusPoint<T>) -> T {
    log_wave_function(k, p, x).exp()
}

/// `c_p(x) = -(1/k) log Ψ_p(x)`.
pub fn c_potential<T: Real>(k: usize, p: &TorusPoint<T>, x: &TorusPoint<T>) -> T {
    -log_wave_function(k, p, x) / T::of(k.max(1))
}

/// Background measure `μ₀` of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum Background<T> {
    /// Lebesgue measure `dx`.
    Uniform,
    /// A grid density normalized to unit mass, interpolated between nodes.
    Density(GridField<T>),
}

impl<T: Real> Background<T> {
    pub fn from_measure(m: &DiscreteMeasure<T>) -> Result<Self> {
        let g = m.grid_or_err()?;
        if g.values().iter().any(|&v| !(v > T::zero())) {
            return Err(Error::InvalidInput(
                "background density must be strictly positive".into(),
            ));
        }
        Ok(Self::Density(g.clone()))
    }

    pub fn density_at(&self, x: &[T]) -> T {
        match self {
            Self::Uniform => T::one(),
            Self::Density(g) => g.interpolate(x),
        }
    }

    pub fn log_density_at(&self, x: &[T]) -> T {
        match self {
            Self::Uniform => T::zero(),
            Self::Density(g) => g.interpolate(x).ln(),
        }
    }

    /// The background as a grid measure of resolution `res`.
    pub fn to_measure(&self, dim: usize, res: usize) -> Result<DiscreteMeasure<T>> {
        match self {
            Self::Uniform => DiscreteMeasure::uniform_grid(dim, res),
            Self::Density(g) if g.res() == res && g.dim() == dim => {
                DiscreteMeasure::grid(g.clone())
            }
            Self::Density(g) => {
                DiscreteMeasure::grid_normalized(GridField::from_fn(dim, res, |x| {
                    g.interpolate(x)
                })?)
            }
        }
    }
}

/// The data of one Gibbs ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec<T> {
    pub n: usize,
    pub k: usize,
    pub beta: T,
    pub points: Vec<TorusPoint<T>>,
    pub mu0: Background<T>,
}

impl<T: Real> EnsembleSpec<T> {
    /// Points on the lattice `(1/k)Zⁿ/Zⁿ`, `N = kⁿ`, in lexicographic order.
    pub fn lattice(n: usize, k: usize, beta: T, mu0: Background<T>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput("n and k must be positive".into()));
        }
        let count = k
            .checked_pow(n as u32)
            .filter(|&c| c <= 1 << 24)
            .ok_or_else(|| {
                Error::InvalidInput(format!("lattice with k={k}, n={n} is too large"))
            })?;
        let kt = T::of(k);
        let points = (0..count)
            .map(|mut idx| {
                let mut c = vec![T::zero(); n];
                for a in (0..n).rev() {
                    c[a] = T::of(idx % k) / kt;
                    idx /= k;
                }
                TorusPoint::wrap(&c).expect("lattice points are finite")
            })
            .collect();
        Self::with_points(n, k, beta, points, mu0)
    }

    /// A general point set `P^(N)`.
    pub fn with_points(
        n: usize,
        k: usize,
        beta: T,
        points: Vec<TorusPoint<T>>,
        mu0: Background<T>,
    ) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput("n and k must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidInput(
                "an ensemble needs at least one point".into(),
            ));
        }
        if points.iter().any(|p| p.dim() != n) {
            return Err(Error::InvalidInput(format!(
                "all points must be {n}-dimensional"
            )));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidInput("beta must be finite".into()));
        }
        if let Background::Density(g) = &mu0 {
            if g.dim() != n {
                return Err(Error::GridMismatch(format!(
                    "background is {}-d, ensemble is {n}-d",
                    g.dim()
                )));
            }
        }
        Ok(Self {
            n,
            k,
            beta,
            points,
            mu0,
        })
    }

    /// Number of particles `N`.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// `L_ij = log Ψ_{p_i}(x_j)`.
    pub fn log_wave_matrix(&self, cfg: &Configuration<T>) -> Result<Array2<T>> {
        self.check(cfg)?;
        let n = self.size();
        Ok(Array2::from_shape_fn((n, n), |(i, j)| {
            log_wave_function(self.k, &self.points[i], &cfg.points[j])
        }))
    }

    pub fn check(&self, cfg: &Configuration<T>) -> Result<()> {
        if cfg.points.len() != self.size() {
            return Err(Error::SizeMismatch(cfg.points.len(), self.size()));
        }
        if cfg.points.iter().any(|p| p.dim() != self.n) {
            return Err(Error::InvalidInput(
                "configuration dimension mismatch".into(),
            ));
        }
        Ok(())
    }
}

/// One microstate `(x_1, …, x_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration<T> {
    pub points: Vec<TorusPoint<T>>,
}

impl<T: Real> Configuration<T> {
    pub fn new(points: Vec<TorusPoint<T>>) -> Self {
        Self { points }
    }

    /// Builds a 1-d configuration from raw coordinates.
    pub fn from_line(xs: &[T]) -> Result<Self> {
        Ok(Self {
            points: xs
                .iter()
                .map(|&x| TorusPoint::wrap(&[x]))
                .collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same multiset of points in lexicographic order. Symmetric
    /// functions evaluated on it are bitwise invariant under relabeling.
    pub fn canonical(&self) -> Self {
        let mut points = self.points.clone();
        points.sort_by(|a, b| {
            a.coords()
                .iter()
                .zip(b.coords())
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Self { points }
    }
}

/// `H(x) = -(1/k) log perm(Ψ_{p_i}(x_j))`.
pub fn hamiltonian<T: Real>(cfg: &Configuration<T>, spec: &EnsembleSpec<T>) -> Result<T> {
    let l = spec.log_wave_matrix(&cfg.canonical())?;
    Ok(-log_permanent(&l)? / T::of(spec.k))
}

/// JSON form `{n, k, beta, points: [[...]], mu0: "uniform" | {grid_csv: path}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpecJson {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_mu0")]
    pub mu0: Mu0Json,
}

fn default_mu0() -> Mu0Json {
    Mu0Json::Named("uniform".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mu0Json {
    Named(String),
    Grid { grid_csv: PathBuf },
}

impl EnsembleSpecJson {
    /// Resolves file references relative to `base`.
    pub fn into_spec(self, base: &Path) -> Result<EnsembleSpec<f64>> {
        let mu0 = match self.mu0 {
            Mu0Json::Named(s) if s == "uniform" => Background::Uniform,
            Mu0Json::Named(s) => return Err(Error::Parse(format!("unknown mu0 {s:?}"))),
            Mu0Json::Grid { grid_csv } => {
                let g = GridField::<f64>::load(base.join(grid_csv))?;
                let m = DiscreteMeasure::grid_normalized(g)?;
                Background::from_measure(&m)?
            }
        };
        match self.points {
            None => EnsembleSpec::lattice(self.n, self.k, self.beta, mu0),
            Some(pts) => {
                let points = pts
                    .iter()
                    .map(|p| TorusPoint::wrap(p))
                    .collect::<Result<_>>()?;
                EnsembleSpec::with_points(self.n, self.k, self.beta, points, mu0)
            }
        }
    }
}
