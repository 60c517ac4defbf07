use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fmt17, wrap_unit};
use crate::{Error, Real, Result};

/// Samples of a function on the uniform periodic grid with nodes at `j/G`.
///
/// Storage is row-major: node `(i0, i1)` lives at `i0 * G + i1`, so index
/// order is lexicographic order of the nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField<T> {
    dim: usize,
    res: usize,
    values: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn new(dim: usize, res: usize, values: Vec<T>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if res == 0 {
            return Err(Error::InvalidInput(
                "grid resolution must be positive".into(),
            ));
        }
        if values.len() != res.pow(dim as u32) {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {dim}-d grid of resolution {res}, got {}",
                res.pow(dim as u32),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "value at node {i} is not finite"
            )));
        }
        Ok(Self { dim, res, values })
    }

    pub fn constant(dim: usize, res: usize, c: T) -> Result<Self> {
        Self::new(dim, res, vec![c; res.pow(dim as u32)])
    }

    pub fn zeros(dim: usize, res: usize) -> Result<Self> {
        Self::constant(dim, res, T::zero())
    }

    /// Samples `f` at every node; `f` receives the node coordinates.
    pub fn from_fn(dim: usize, res: usize, mut f: impl FnMut(&[T]) -> T) -> Result<Self> {
        let n = res.pow(dim as u32);
        let mut buf = vec![T::zero(); dim];
        let mut values = Vec::with_capacity(n);
        for idx in 0..n {
            node_coords_into(dim, res, idx, &mut buf);
            values.push(f(&buf));
        }
        Self::new(dim, res, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn res(&self) -> usize {
        self.res
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn cell_volume(&self) -> T {
        T::one() / T::of(self.len())
    }

    /// Coordinates of node `idx`.
    pub fn node_coords(&self, idx: usize) -> Vec<T> {
        let mut buf = vec![T::zero(); self.dim];
        node_coords_into(self.dim, self.res, idx, &mut buf);
        buf
    }

    /// Per-axis integer indices of node `idx`.
    pub fn node_multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.res, idx % self.res]
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.dim == other.dim && self.res == other.res
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}-d G={} vs {}-d G={}",
                self.dim, self.res, other.dim, other.res
            )))
        }
    }

    /// Elementwise map; fails only if the result is not finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.dim,
            self.res,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.dim,
            self.res,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add_scalar(&self, a: T) -> Self {
        Self {
            dim: self.dim,
            res: self.res,
            values: self.values.iter().map(|&v| v + a).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            res: self.res,
            values: self.values.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn mean(&self) -> T {
        quadrature(self)
    }

    /// Shifts so that the grid mean is zero.
    pub fn zero_mean(&self) -> Self {
        self.add_scalar(-self.mean())
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// Translation by whole nodes: `out(node) = self(node - shift)`.
    pub fn shift_nodes(&self, shift: &[isize]) -> Self {
        let g = self.res as isize;
        let mut out = self.values.clone();
        for (idx, slot) in out.iter_mut().enumerate() {
            let m = self.node_multi_index(idx);
            let src = if self.dim == 1 {
                (m[0] as isize - shift[0]).rem_euclid(g) as usize
            } else {
                let a = (m[0] as isize - shift[0]).rem_euclid(g) as usize;
                let b = (m[1] as isize - shift.get(1).copied().unwrap_or(0)).rem_euclid(g) as usize;
                a * self.res + b
            };
            *slot = self.values[src];
        }
        Self {
            dim: self.dim,
            res: self.res,
            values: out,
        }
    }

    /// Multilinear interpolation at an arbitrary (unwrapped) point.
    pub fn interpolate(&self, x: &[T]) -> T {
        let g = T::of(self.res);
        let split = |c: T| {
            let s = wrap_unit(c) * g;
            let f = s.floor();
            let i = f.to_usize().unwrap_or(0) % self.res;
            (i, (i + 1) % self.res, s - f)
        };
        if self.dim == 1 {
            let (i, j, t) = split(x[0]);
            self.values[i] * (T::one() - t) + self.values[j] * t
        } else {
            let (i0, i1, s) = split(x[0]);
            let (j0, j1, t) = split(x[1]);
            let r = self.res;
            let v = |a: usize, b: usize| self.values[a * r + b];
            (v(i0, j0) * (T::one() - t) + v(i0, j1) * t) * (T::one() - s)
                + (v(i1, j0) * (T::one() - t) + v(i1, j1) * t) * s
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {},{}", self.dim, self.res)?;
        for v in &self.values {
            writeln!(w, "{}", fmt17(v.to_f64_lossy()))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(Error::Parse("empty grid file".into())),
            }
        };
        let body = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse(format!("expected '# dim,G' header, got {header:?}")))?;
        let mut parts = body.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<usize> {
            s.ok_or_else(|| Error::Parse("short header".into()))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("header: {e}")))
        };
        let dim = parse(parts.next())?;
        let res = parse(parts.next())?;
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|e| Error::Parse(format!("value {t:?}: {e}")))?;
            values.push(T::from_f64(v).ok_or_else(|| Error::Parse(format!("value {t:?}")))?);
        }
        Self::new(dim, res, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

fn node_coords_into<T: Real>(dim: usize, res: usize, idx: usize, out: &mut [T]) {
    let g = T::of(res);
    if dim == 1 {
        out[0] = T::of(idx) / g;
    } else {
        out[0] = T::of(idx / res) / g;
        out[1] = T::of(idx % res) / g;
    }
}

/// `Φ(x) = φ(x mod 1) + |x|²/2`, the periodically-convex lift of `φ`.
pub fn lift_eval<T: Real>(phi: &GridField<T>, x: &[T]) -> Result<T> {
    if x.len() != phi.dim() {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, grid is {}-d",
            x.len(),
            phi.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("point is not finite".into()));
    }
    let sq: T = x.iter().map(|&v| v * v).sum();
    Ok(phi.interpolate(x) + sq * T::lit(0.5))
}

/// Periodic trapezoid rule: `G⁻ⁿ Σ values`.
pub fn quadrature<T: Real>(f: &GridField<T>) -> T {
    // Summing in sorted order makes the result a function of the multiset of
    // values, so translated fields integrate to bit-identical results.
    let mut v = f.values().to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
    pairwise_sum(&v) / T::of(f.len())
}

pub(crate) fn pairwise_sum<T: Real>(v: &[T]) -> T {
    if v.len() <= 32 {
        v.iter().copied().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridField::<f64>::new(3, 4, vec![0.0; 64]).is_err());
        assert!(GridField::<f64>::new(1, 4, vec![0.0; 5]).is_err());
        assert!(GridField::<f64>::new(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn node_positions_are_exact() {
        let g = GridField::<f64>::zeros(2, 8).unwrap();
        assert_eq!(g.node_coords(8 * 3 + 5), vec![3.0 / 8.0, 5.0 / 8.0]);
        assert_eq!(g.node_multi_index(8 * 3 + 5), [3, 5]);
    }

    #[test]
    fn lift_examples() {
        let zero = GridField::<f64>::zeros(1, 16).unwrap();
        assert_abs_diff_eq!(lift_eval(&zero, &[2.0]).unwrap(), 2.0);
        let one = GridField::<f64>::constant(1, 16, 1.0).unwrap();
        assert_abs_diff_eq!(lift_eval(&one, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn quadrature_examples() {
        let one = GridField::<f64>::constant(1, 7, 1.0).unwrap();
        assert_abs_diff_eq!(quadrature(&one), 1.0, epsilon = 1e-15);
        let c = GridField::from_fn(1, 64, |x: &[f64]| (2.0 * PI * x[0]).cos()).unwrap();
        assert_abs_diff_eq!(quadrature(&c), 0.0, epsilon = 1e-14);
        let c2 = GridField::from_fn(1, 64, |x: &[f64]| (2.0 * PI * x[0]).cos().powi(2)).unwrap();
        assert_abs_diff_eq!(quadrature(&c2), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn interpolation_hits_nodes_and_midpoints() {
        let f = GridField::from_fn(2, 4, |x: &[f64]| x[0] + 10.0 * x[1]).unwrap();
        assert_eq!(f.interpolate(&[0.25, 0.5]), 0.25 + 5.0);
        assert_abs_diff_eq!(f.interpolate(&[0.125, 0.0]), 0.125, epsilon = 1e-15);
        // across the seam the last node is averaged with node 0
        assert_abs_diff_eq!(f.interpolate(&[0.875, 0.0]), 0.5 * 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(f.interpolate(&[-0.125, 1.0]), 0.5 * 0.75, epsilon = 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let f = GridField::from_fn(2, 5, |x: &[f64]| (x[0] * 3.1).sin() - x[1] / 7.0).unwrap();
        let s = f.to_csv_string();
        assert!(s.starts_with("# 2,5\n"));
        let g = GridField::<f64>::read_csv(s.as_bytes()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn shift_moves_values() {
        let f = GridField::from_fn(1, 4, |x: &[f64]| x[0]).unwrap();
        let s = f.shift_nodes(&[1]);
        assert_eq!(s.values(), &[0.75, 0.0, 0.25, 0.5]);
    }
}
