//! Reduction of weighted measures to equal-weight atom lists.

use crate::torus::DiscreteMeasure;
use crate::{Error, Real, Result};

/// Most atoms an equal-weight representation may use.
pub const ATOM_CAP: usize = 4096;

const RATIONAL_TOL: f64 = 1e-9;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Smallest `q ≤ cap` with `w q` within tolerance of an integer.
fn denominator_of(w: f64, cap: usize) -> Option<usize> {
    (1..=cap).find(|&q| {
        let s = w * q as f64;
        (s - s.round()).abs() <= RATIONAL_TOL * q as f64
    })
}

/// Common denominator under which every weight is (numerically) an
/// integer count, if one exists within the cap.
pub fn natural_denominator<T: Real>(weights: &[T], cap: usize) -> Option<usize> {
    let mut d = 1usize;
    for &w in weights {
        let q = denominator_of(w.to_f64_lossy(), cap)?;
        d = lcm(d, q);
        if d > cap {
            return None;
        }
    }
    Some(d)
}

/// Integer counts summing to `d`, proportional to `weights`: exact when the
/// weights are multiples of `1/d`, otherwise largest-remainder rounding.
pub fn counts_for<T: Real>(weights: &[T], d: usize) -> Vec<usize> {
    let total: f64 = weights.iter().map(|w| w.to_f64_lossy()).sum();
    let scaled: Vec<f64> = weights
        .iter()
        .map(|w| w.to_f64_lossy() / total * d as f64)
        .collect();
    let mut counts: Vec<usize> = scaled
        .iter()
        .map(|&s| (s + RATIONAL_TOL * d as f64).floor().max(0.0) as usize)
        .collect();
    let mut assigned: usize = counts.iter().sum();
    while assigned > d {
        // rounding overshoot from the tolerance; trim the smallest remainders
        let i = (0..counts.len())
            .filter(|&i| counts[i] > 0)
            .min_by(|&a, &b| {
                (scaled[a] - counts[a] as f64)
                    .partial_cmp(&(scaled[b] - counts[b] as f64))
                    .unwrap()
            })
            .expect("some positive count");
        counts[i] -= 1;
        assigned -= 1;
    }
    if assigned < d {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = scaled[a] - counts[a] as f64;
            let rb = scaled[b] - counts[b] as f64;
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().take(d - assigned) {
            counts[i] += 1;
        }
    }
    counts
}

/// Positive-mass points of a measure with their weights.
pub fn support<T: Real>(m: &DiscreteMeasure<T>) -> (Vec<Vec<T>>, Vec<T>) {
    m.to_weighted_points()
        .into_iter()
        .filter(|(_, w)| *w > T::zero())
        .map(|(p, w)| (p.coords().to_vec(), w))
        .unzip()
}

fn expand<T: Real>(points: &[Vec<T>], counts: &[usize]) -> Vec<Vec<T>> {
    points
        .iter()
        .zip(counts)
        .flat_map(|(p, &c)| std::iter::repeat_n(p.clone(), c))
        .collect()
}

/// Coordinates of equal-weight atoms.
pub type Atoms<T> = Vec<Vec<T>>;

/// Equal-weight atom lists of the same length for two measures. The length
/// is the least common denominator of both weight vectors when that fits
/// under the cap; otherwise both are rounded to the cap.
pub fn atomize_pair<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<(Atoms<T>, Atoms<T>)> {
    if mu.dim() != nu.dim() {
        return Err(Error::InvalidInput(format!(
            "measures of dimension {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let (pm, wm) = support(mu);
    let (pn, wn) = support(nu);
    if pm.is_empty() || pn.is_empty() {
        return Err(Error::InvalidInput("a measure has no mass".into()));
    }
    if pm.len() > ATOM_CAP || pn.len() > ATOM_CAP {
        return Err(Error::UnsupportedMeasure { cap: ATOM_CAP });
    }
    let d = match (
        natural_denominator(&normalized(&wm), ATOM_CAP),
        natural_denominator(&normalized(&wn), ATOM_CAP),
    ) {
        (Some(a), Some(b)) if lcm(a, b) <= ATOM_CAP => lcm(a, b),
        _ => ATOM_CAP,
    };
    Ok((
        expand(&pm, &counts_for(&wm, d)),
        expand(&pn, &counts_for(&wn, d)),
    ))
}

/// Equal-weight atom list for one measure.
pub fn atomize<T: Real>(mu: &DiscreteMeasure<T>) -> Result<Vec<Vec<T>>> {
    let (p, w) = support(mu);
    if p.is_empty() {
        return Err(Error::InvalidInput("the measure has no mass".into()));
    }
    if p.len() > ATOM_CAP {
        return Err(Error::UnsupportedMeasure { cap: ATOM_CAP });
    }
    let d = natural_denominator(&normalized(&w), ATOM_CAP).unwrap_or(ATOM_CAP);
    Ok(expand(&p, &counts_for(&w, d)))
}

fn normalized<T: Real>(w: &[T]) -> Vec<T> {
    let s: T = w.iter().copied().sum();
    w.iter().map(|&v| v / s).collect()
}
