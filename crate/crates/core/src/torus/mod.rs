//! Flat torus geometry, periodic grids and probability measures on them.

mod grid;
mod measure;

pub(crate) use grid::pairwise_sum;
pub use grid::{lift_eval, quadrature, GridField};
pub use measure::{nearest_node, DiscreteMeasure};

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// A point of `Rⁿ/Zⁿ` with every coordinate in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint<T> {
    coords: Vec<T>,
}

impl<T: Real> TorusPoint<T> {
    /// Reduces each coordinate mod 1.
    pub fn wrap(p: &[T]) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput(
                "a torus point needs at least one coordinate".into(),
            ));
        }
        if let Some(i) = p.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("coordinate {i} is not finite")));
        }
        Ok(Self {
            coords: p.iter().map(|&v| wrap_unit(v)).collect(),
        })
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![T::zero(); dim.max(1)],
        }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Translates by `v` and wraps.
    pub fn translate(&self, v: &[T]) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension {} vs {}",
                self.dim(),
                v.len()
            )));
        }
        let moved: Vec<T> = self.coords.iter().zip(v).map(|(&a, &b)| a + b).collect();
        Self::wrap(&moved)
    }
}

/// `wrap` as a free function.
pub fn wrap<T: Real>(p: &[T]) -> Result<TorusPoint<T>> {
    TorusPoint::wrap(p)
}

/// `x mod 1` in `[0, 1)`; tiny negative inputs that round up to 1 map to 0.
#[inline]
pub fn wrap_unit<T: Real>(x: T) -> T {
    let r = x - x.floor();
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Shortest signed displacement `b - a` on the circle, in `[-1/2, 1/2]`.
#[inline]
pub fn signed_gap<T: Real>(a: T, b: T) -> T {
    let half = T::lit(0.5);
    let mut d = b - a;
    d = d - d.round();
    if d < -half {
        d + T::one()
    } else if d > half {
        d - T::one()
    } else {
        d
    }
}

/// Per-axis wrap distance `min(|a-b|, 1-|a-b|)`.
#[inline]
pub fn axis_gap<T: Real>(a: T, b: T) -> T {
    signed_gap(a, b).abs()
}

fn check_dims<T: Real>(x: &TorusPoint<T>, y: &TorusPoint<T>) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Squared quotient distance `Σ_a min(|x_a-y_a|, 1-|x_a-y_a|)²` on raw coordinates.
#[inline]
pub fn dist2_coords<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let g = axis_gap(a, b);
            g * g
        })
        .sum()
}

pub fn torus_distance<T: Real>(x: &TorusPoint<T>, y: &TorusPoint<T>) -> Result<T> {
    check_dims(x, y)?;
    Ok(dist2_coords(&x.coords, &y.coords).sqrt())
}

/// Transport cost `c = d²/2`, in `[0, n/8]`.
pub fn cost<T: Real>(x: &TorusPoint<T>, y: &TorusPoint<T>) -> Result<T> {
    check_dims(x, y)?;
    Ok(dist2_coords(&x.coords, &y.coords) * T::lit(0.5))
}

/// Formats with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
