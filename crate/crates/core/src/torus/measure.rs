use serde::{Deserialize, Serialize};

use super::{GridField, TorusPoint};
use crate::{Error, Real, Result};

/// A probability measure on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DiscreteMeasure<T> {
    /// Weighted point masses.
    Atoms {
        points: Vec<TorusPoint<T>>,
        weights: Vec<T>,
    },
    /// Cell densities on a grid; cell `j` carries mass `density_j · G⁻ⁿ`.
    Grid(GridField<T>),
}

pub(crate) fn mass_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn atoms(points: Vec<TorusPoint<T>>, weights: Vec<T>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points with {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidInput("atoms of mixed dimension".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > mass_tol() {
            return Err(Error::InvalidInput(format!("total mass {total} is not 1")));
        }
        Ok(Self::Atoms { points, weights })
    }

    /// Equal weights `1/N`.
    pub fn uniform_atoms(points: Vec<TorusPoint<T>>) -> Result<Self> {
        let w = T::one() / T::of(points.len().max(1));
        let n = points.len();
        Self::atoms(points, vec![w; n])
    }

    pub fn grid(density: GridField<T>) -> Result<Self> {
        if density.values().iter().any(|v| *v < T::zero()) {
            return Err(Error::InvalidInput("densities must be nonnegative".into()));
        }
        let total = super::quadrature(&density);
        if (total - T::one()).abs() > mass_tol() {
            return Err(Error::InvalidInput(format!("total mass {total} is not 1")));
        }
        Ok(Self::Grid(density))
    }

    /// Normalizes a nonnegative field to unit mass.
    pub fn grid_normalized(density: GridField<T>) -> Result<Self> {
        let total = super::quadrature(&density);
        if !(total > T::zero()) {
            return Err(Error::InvalidInput("density has no mass".into()));
        }
        Self::grid(density.scale(T::one() / total))
    }

    /// Lebesgue measure `dx` on the grid.
    pub fn uniform_grid(dim: usize, res: usize) -> Result<Self> {
        Ok(Self::Grid(GridField::constant(dim, res, T::one())?))
    }

    /// Builds a grid measure from per-cell masses summing to 1.
    pub fn from_cell_masses(dim: usize, res: usize, masses: Vec<T>) -> Result<Self> {
        let vol_inv = T::of(res.pow(dim as u32));
        Self::grid(GridField::new(
            dim,
            res,
            masses.into_iter().map(|m| m * vol_inv).collect(),
        )?)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Atoms { points, .. } => points[0].dim(),
            Self::Grid(g) => g.dim(),
        }
    }

    pub fn total_mass(&self) -> T {
        match self {
            Self::Atoms { weights, .. } => weights.iter().copied().sum(),
            Self::Grid(g) => super::quadrature(g),
        }
    }

    pub fn as_grid(&self) -> Option<&GridField<T>> {
        match self {
            Self::Grid(g) => Some(g),
            Self::Atoms { .. } => None,
        }
    }

    pub fn grid_or_err(&self) -> Result<&GridField<T>> {
        self.as_grid()
            .ok_or_else(|| Error::GridMismatch("expected a grid measure".into()))
    }

    /// Per-cell masses of a grid measure.
    pub fn cell_masses(&self) -> Result<Vec<T>> {
        let g = self.grid_or_err()?;
        let vol = g.cell_volume();
        Ok(g.values().iter().map(|&d| d * vol).collect())
    }

    /// Lists `(point, mass)` pairs; grid cells become atoms at their nodes.
    pub fn to_weighted_points(&self) -> Vec<(TorusPoint<T>, T)> {
        match self {
            Self::Atoms { points, weights } => points
                .iter()
                .cloned()
                .zip(weights.iter().copied())
                .collect(),
            Self::Grid(g) => {
                let vol = g.cell_volume();
                g.values()
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| {
                        (
                            TorusPoint::wrap(&g.node_coords(i)).expect("node coords are finite"),
                            d * vol,
                        )
                    })
                    .collect()
            }
        }
    }

    /// Bins atoms to the nearest node of a grid (a grid measure passes through
    /// unchanged when its grid matches).
    pub fn to_grid(&self, dim: usize, res: usize) -> Result<Self> {
        if self.dim() != dim {
            return Err(Error::GridMismatch(format!(
                "measure is {}-d, grid is {dim}-d",
                self.dim()
            )));
        }
        match self {
            Self::Grid(g) if g.res() == res => Ok(self.clone()),
            Self::Grid(_) => Err(Error::GridMismatch("regridding a grid measure".into())),
            Self::Atoms { points, weights } => {
                let mut masses = vec![T::zero(); res.pow(dim as u32)];
                for (p, &w) in points.iter().zip(weights) {
                    masses[nearest_node(p.coords(), res)] += w;
                }
                Self::from_cell_masses(dim, res, masses)
            }
        }
    }
}

/// Index of the grid node nearest to `x` (ties round up).
pub fn nearest_node<T: Real>(x: &[T], res: usize) -> usize {
    let g = T::of(res);
    let axis = |c: T| -> usize {
        let i = (super::wrap_unit(c) * g + T::lit(0.5))
            .floor()
            .to_usize()
            .unwrap_or(0);
        i % res
    };
    if x.len() == 1 {
        axis(x[0])
    } else {
        axis(x[0]) * res + axis(x[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_mass() {
        let p = |x: f64| TorusPoint::wrap(&[x]).unwrap();
        assert!(DiscreteMeasure::atoms(vec![p(0.1), p(0.2)], vec![0.5, 0.5]).is_ok());
        assert!(DiscreteMeasure::atoms(vec![p(0.1), p(0.2)], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::atoms(vec![p(0.1)], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::<f64>::uniform_grid(2, 8).is_ok());
        let bad = GridField::constant(1, 8, 2.0).unwrap();
        assert!(DiscreteMeasure::grid(bad.clone()).is_err());
        assert!(DiscreteMeasure::grid_normalized(bad).is_ok());
    }

    #[test]
    fn binning_to_nearest_node() {
        let p = |x: f64| TorusPoint::wrap(&[x]).unwrap();
        let m =
            DiscreteMeasure::atoms(vec![p(0.01), p(0.99), p(0.26)], vec![0.25, 0.25, 0.5]).unwrap();
        let g = m.to_grid(1, 4).unwrap();
        assert_eq!(g.cell_masses().unwrap(), vec![0.5, 0.5, 0.0, 0.0]);
    }
}
