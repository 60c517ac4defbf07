use crate::torus::GridField;
use crate::Real;

/// Cells of a grid potential when the dual variable ranges over the torus
/// rather than over grid nodes.
///
/// With `φ` given at nodes, `φ^c(y) = max_i (-c(x_i, y) - φ_i)` for every
/// `y ∈ X`; node `i` owns the set of `y` where its term wins. These cell
/// masses are `MA(φ)` as a measure on the nodes, they are the exact negative
/// gradient of `ξ`, and they vary continuously with `φ`.
#[derive(Debug, Clone)]
pub struct ContinuumCells<T> {
    /// Mass of each node's cell; zero for nodes below the c-convex envelope.
    pub masses: Vec<T>,
    /// `ξ(φ) = ∫ φ^c dy` over the continuum.
    pub xi: T,
    /// `(φ^c)^c` at the nodes.
    pub projected: GridField<T>,
}

/// Computes [`ContinuumCells`]. Exact in 1-D (power cells on the circle);
/// in 2-D the dual variable is sampled on a grid `oversample` times finer,
/// offset by half a fine cell so no sample is equidistant from two nodes.
pub fn continuum_cells<T: Real>(phi: &GridField<T>, oversample: usize) -> ContinuumCells<T> {
    if phi.dim() == 1 {
        line_cells(phi)
    } else {
        oversampled_cells(phi, oversample.max(1))
    }
}

/// Slope of the lifted chord between `(xa, φa + xa²/2)` and `(xb, φb + xb²/2)`,
/// arranged so the quadratic parts never cancel.
#[inline]
fn chord_slope<T: Real>(xa: T, pa: T, xb: T, pb: T) -> T {
    (pb - pa) / (xb - xa) + (xa + xb) * T::lit(0.5)
}

fn line_cells<T: Real>(phi: &GridField<T>) -> ContinuumCells<T> {
    let g = phi.res();
    let h = T::one() / T::of(g);
    let v = phi.values();
    // three periods of lifted points, sorted by abscissa
    let n = 3 * g;
    let x_of = |k: usize| T::of(k % g) * h + T::of(k / g) - T::one();
    let p_of = |k: usize| v[k % g];
    let slope = |a: usize, b: usize| chord_slope(x_of(a), p_of(a), x_of(b), p_of(b));

    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if slope(a, b) >= slope(b, k) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }

    let mut masses = vec![T::zero(); g];
    let mut proj = v.to_vec();
    let mut xi = T::zero();
    let sixth = T::one() / T::lit(6.0);
    for w in 1..hull.len() - 1 {
        let k = hull[w];
        if !(g..2 * g).contains(&k) {
            continue;
        }
        let (prev, next) = (hull[w - 1], hull[w + 1]);
        let sl = slope(prev, k);
        let sr = slope(k, next);
        let i = k - g;
        let xv = x_of(k);
        masses[i] = sr - sl;
        let (ur, ul) = (sr - xv, sl - xv);
        xi += -v[i] * (sr - sl) - (ur * ur * ur - ul * ul * ul) * sixth;
        // nodes strictly between this vertex and the next lie under the chord
        let (xa, pa, xb, pb) = (xv, v[i], x_of(next), p_of(next));
        for kk in k + 1..next {
            if kk >= 2 * g {
                break;
            }
            let x = x_of(kk);
            proj[kk - g] = pa + (x - xa) * ((pb - pa) / (xb - xa) + (xb - x) * T::lit(0.5));
        }
    }
    // nodes of the middle period before its first vertex hang off the previous chord
    if let Some(w) = hull.iter().position(|&k| k >= g) {
        let (a, b) = (hull[w - 1], hull[w]);
        let (xa, pa, xb, pb) = (x_of(a), p_of(a), x_of(b), p_of(b));
        for kk in g..b.min(2 * g) {
            let x = x_of(kk);
            proj[kk - g] = pa + (x - xa) * ((pb - pa) / (xb - xa) + (xb - x) * T::lit(0.5));
        }
    }
    ContinuumCells {
        masses,
        xi,
        projected: GridField::new(1, g, proj).expect("finite envelope"),
    }
}

fn oversampled_cells<T: Real>(phi: &GridField<T>, s: usize) -> ContinuumCells<T> {
    let g = phi.res();
    let gf = s * g;
    let v = phi.values();
    let gt = T::of(g);
    let gft = T::of(gf);
    // cf[i * gf + a]: axis cost between coarse node i and fine sample a
    let mut cf = vec![T::zero(); g * gf];
    for i in 0..g {
        for a in 0..gf {
            let d = crate::torus::axis_gap(T::of(i) / gt, (T::of(a) + T::lit(0.5)) / gft);
            cf[i * gf + a] = d * d * T::lit(0.5);
        }
    }
    // inner[i0][b] = max_i1 (-c(i1, b) - φ(i0, i1))
    let mut inner = vec![T::neg_infinity(); g * gf];
    let mut arg1 = vec![0usize; g * gf];
    for i0 in 0..g {
        for b in 0..gf {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            for i1 in 0..g {
                let c = -cf[i1 * gf + b] - v[i0 * g + i1];
                if c > best {
                    best = c;
                    arg = i1;
                }
            }
            inner[i0 * gf + b] = best;
            arg1[i0 * gf + b] = arg;
        }
    }
    let mut psi = vec![T::zero(); gf * gf];
    let mut counts = vec![0usize; g * g];
    for a in 0..gf {
        for b in 0..gf {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            for i0 in 0..g {
                let c = -cf[i0 * gf + a] + inner[i0 * gf + b];
                if c > best {
                    best = c;
                    arg = i0;
                }
            }
            psi[a * gf + b] = best;
            counts[arg * g + arg1[arg * gf + b]] += 1;
        }
    }
    let cell = T::one() / (gft * gft);
    let masses = counts.iter().map(|&c| T::of(c) * cell).collect();
    let xi = crate::torus::quadrature(&GridField::new(1, gf * gf, psi.clone()).expect("finite"));
    // (φ^c)^c(i0, i1) = max_a [-c(i0, a) + max_b (-c(i1, b) - ψ(a, b))]
    let mut inner2 = vec![T::neg_infinity(); gf * g]; // [a][i1]
    for a in 0..gf {
        for i1 in 0..g {
            let mut best = T::neg_infinity();
            for b in 0..gf {
                let c = -cf[i1 * gf + b] - psi[a * gf + b];
                if c > best {
                    best = c;
                }
            }
            inner2[a * g + i1] = best;
        }
    }
    let mut proj = vec![T::zero(); g * g];
    for i0 in 0..g {
        for i1 in 0..g {
            let mut best = T::neg_infinity();
            for a in 0..gf {
                let c = -cf[i0 * gf + a] + inner2[a * g + i1];
                if c > best {
                    best = c;
                }
            }
            proj[i0 * g + i1] = best.min(v[i0 * g + i1]);
        }
    }
    ContinuumCells {
        masses,
        xi,
        projected: GridField::new(2, g, proj).expect("finite envelope"),
    }
}
