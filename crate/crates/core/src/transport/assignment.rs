//! Equal-weight optimal assignment.

use crate::Real;

/// Minimum-cost perfect matching of an `n × n` row-major cost matrix by the
/// shortest augmenting path method with potentials, `O(n³)`.
/// Returns `col[row]`.
pub fn hungarian<T: Real>(n: usize, cost: &[T]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let inf = T::infinity();
    // 1-based rows and columns; column 0 is a virtual source
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=n {
        col[owner[j] - 1] = j - 1;
    }
    col
}

/// Optimal equal-weight matching cost on the circle for a cost that is a
/// convex increasing function of the arc length: some cyclic shift of the
/// two sorted lists is optimal, so all `n` shifts are scanned, `O(n²)`.
/// Returns the minimal total cost.
pub fn circle_shift_cost<T: Real>(xs: &[T], ys: &[T], cost: impl Fn(T, T) -> T) -> T {
    let n = xs.len();
    debug_assert_eq!(n, ys.len());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut best = T::infinity();
    for s in 0..n {
        let mut total = T::zero();
        for i in 0..n {
            total += cost(a[i], b[(i + s) % n]);
            if total >= best {
                break;
            }
        }
        if total < best {
            best = total;
        }
    }
    best
}

/// Minimal total cost of moving integer `supply` onto integer `demand`
/// (equal totals) with a dense cost matrix, row-major `supply.len() ×
/// demand.len()`. Successive shortest paths with Dijkstra on reduced
/// costs; every augmentation pushes the bottleneck amount, so the number of
/// rounds is far below the total mass for repeated atoms.
pub fn transport_integer<T: Real>(supply: &[usize], demand: &[usize], cost: &[T]) -> T {
    let m = supply.len();
    let n = demand.len();
    debug_assert_eq!(cost.len(), m * n);
    debug_assert_eq!(supply.iter().sum::<usize>(), demand.iter().sum::<usize>());
    let mut left = supply.to_vec();
    let mut need = demand.to_vec();
    let mut flow = vec![0usize; m * n];
    // nodes 0..m are sources, m..m+n sinks
    let mut pot = vec![T::zero(); m + n];
    let mut remaining: usize = supply.iter().sum();
    let mut dist = vec![T::infinity(); m + n];
    let mut prev = vec![usize::MAX; m + n];
    let mut done = vec![false; m + n];
    while remaining > 0 {
        dist.fill(T::infinity());
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..m {
            if left[i] > 0 {
                dist[i] = T::zero();
            }
        }
        let target = loop {
            let mut u = usize::MAX;
            let mut best = T::infinity();
            for v in 0..m + n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                unreachable!("balanced transport always has an augmenting path");
            }
            done[u] = true;
            if u >= m && need[u - m] > 0 {
                break u;
            }
            if u < m {
                let row = &cost[u * n..(u + 1) * n];
                for (j, &cj) in row.iter().enumerate() {
                    let v = m + j;
                    if done[v] {
                        continue;
                    }
                    let d = best + cj + pot[u] - pot[v];
                    if d < dist[v] {
                        dist[v] = d;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if done[i] || flow[i * n + j] == 0 {
                        continue;
                    }
                    let d = best - cost[i * n + j] + pot[u] - pot[i];
                    if d < dist[i] {
                        dist[i] = d;
                        prev[i] = u;
                    }
                }
            }
        };
        let dt = dist[target];
        for v in 0..m + n {
            if done[v] {
                pot[v] += dist[v] - dt;
            }
        }
        // bottleneck along the path
        let mut amount = need[target - m];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= m {
                // backward edge sink u -> source v cancels flow (v, u)
                amount = amount.min(flow[v * n + (u - m)]);
            }
            v = u;
        }
        amount = amount.min(left[v]);
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < m {
                flow[u * n + (v - m)] += amount;
            } else {
                flow[v * n + (u - m)] -= amount;
            }
            v = u;
        }
        left[v] -= amount;
        need[target - m] -= amount;
        remaining -= amount;
    }
    let terms: Vec<T> = flow
        .iter()
        .zip(cost)
        .filter(|(&f, _)| f > 0)
        .map(|(&f, &c)| T::of(f) * c)
        .collect();
    crate::torus::pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_assignment() {
        let c = vec![4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let col = hungarian(3, &c);
        let total: f64 = col.iter().enumerate().map(|(i, &j)| c[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
        assert!(hungarian::<f64>(0, &[]).is_empty());
    }

    #[test]
    fn circle_shift_forced_matching() {
        let sq = |a: f64, b: f64| {
            let d = crate::torus::axis_gap(a, b);
            d * d / 2.0
        };
        let c = circle_shift_cost(&[0.0, 0.5], &[0.25, 0.75], sq);
        assert!((c / 2.0 - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn integer_transport_matches_expanded_assignment() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = rng.random_range(1..6);
            let n = rng.random_range(1..6);
            let total = 12;
            let split = |k: usize, rng: &mut rand_chacha::ChaCha8Rng| {
                let mut c = vec![0usize; k];
                for _ in 0..total {
                    c[rng.random_range(0..k)] += 1;
                }
                c
            };
            let (a, b) = (split(m, &mut rng), split(n, &mut rng));
            let cost: Vec<f64> = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let rows: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat_n(i, a[i])).collect();
            let cols: Vec<usize> = (0..n).flat_map(|j| std::iter::repeat_n(j, b[j])).collect();
            let big: Vec<f64> = rows
                .iter()
                .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
                .map(|(i, j)| cost[i * n + j])
                .collect();
            let col = hungarian(total, &big);
            let expect: f64 = col
                .iter()
                .enumerate()
                .map(|(r, &c)| big[r * total + c])
                .sum();
            assert!((transport_integer(&a, &b, &cost) - expect).abs() < 1e-12);
        }
    }
}
