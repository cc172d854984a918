//! Two-objective solution-set machinery. Everything here is in
//! maximization orientation: higher is better on both axes.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// `a` dominates `b`: at least as good everywhere and not equal.
pub fn dominates(a: &Point, b: &Point) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && a != b
}

/// Indices of the non-dominated points; of duplicated points only the
/// first occurrence is kept.
pub fn nondominated_indices(points: &[Point]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // descending first objective, then descending second, then index
    order.sort_by(|&i, &j| {
        points[j][0]
            .total_cmp(&points[i][0])
            .then(points[j][1].total_cmp(&points[i][1]))
            .then(i.cmp(&j))
    });
    let mut keep = Vec::new();
    let mut best_second = f64::NEG_INFINITY;
    for i in order {
        if points[i][1] > best_second {
            best_second = points[i][1];
            keep.push(i);
        }
    }
    keep.sort_unstable();
    keep
}

/// The non-dominated subset with duplicates collapsed, in input order.
pub fn nondominated_filter(points: &[Point]) -> Vec<Point> {
    nondominated_indices(points).into_iter().map(|i| points[i]).collect()
}

/// Area dominated by `points` and bounded below by `reference`. Points that
/// do not strictly dominate the reference contribute nothing.
pub fn hypervolume_2d(points: &[Point], reference: Point) -> f64 {
    let mut useful: Vec<Point> = points
        .iter()
        .filter(|p| p[0] > reference[0] && p[1] > reference[1])
        .copied()
        .collect();
    useful = nondominated_filter(&useful);
    // along decreasing first objective the second objective increases
    useful.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let mut area = 0.0;
    let mut floor = reference[1];
    for p in useful {
        area += (p[0] - reference[0]) * (p[1] - floor);
        floor = p[1];
    }
    area
}

/// Additive epsilon indicators of `coverage` with respect to `front`:
/// `(max, mean)` over front points of the smallest worst-objective gap to a
/// coverage point, floored at zero.
pub fn epsilon_indicators(front: &[Point], coverage: &[Point]) -> Result<(f64, f64)> {
    if front.is_empty() {
        return Err(Error::Empty("reference front"));
    }
    if coverage.is_empty() {
        return Err(Error::Empty("coverage set"));
    }
    let eps: Vec<f64> = front
        .iter()
        .map(|f| {
            coverage
                .iter()
                .map(|c| (f[0] - c[0]).max(f[1] - c[1]))
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        })
        .collect();
    let max = eps.iter().copied().fold(0.0, f64::max);
    let mean = eps.iter().sum::<f64>() / eps.len() as f64;
    Ok((max, mean))
}

/// Per-objective `(lo, hi)` in raw units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationBounds {
    pub lo: Point,
    pub hi: Point,
}

impl NormalizationBounds {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if !(hi[0] >= lo[0] && hi[1] >= lo[1]) {
            return Err(Error::InvalidInput(format!("bounds {lo:?}..{hi:?} are inverted")));
        }
        Ok(Self { lo, hi })
    }

    /// Componentwise min/max over the union of all sets.
    pub fn from_sets<'a, I>(sets: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [Point]>,
    {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut any = false;
        for p in sets.into_iter().flatten() {
            any = true;
            for o in 0..2 {
                lo[o] = lo[o].min(p[o]);
                hi[o] = hi[o].max(p[o]);
            }
        }
        any.then_some(Self { lo, hi })
    }
}

/// Maps each coordinate to `(x - lo) / (hi - lo)` clipped to `[0, 1]`; a
/// degenerate objective (`hi == lo`) maps to 0.5.
pub fn normalize_points(points: &[Point], bounds: &NormalizationBounds) -> Vec<Point> {
    let mut warned = [false; 2];
    points
        .iter()
        .map(|p| {
            let mut q = [0.0; 2];
            for o in 0..2 {
                let span = bounds.hi[o] - bounds.lo[o];
                q[o] = if span > 0.0 {
                    ((p[o] - bounds.lo[o]) / span).clamp(0.0, 1.0)
                } else {
                    if !warned[o] {
                        log::warn!("objective {o} has degenerate bounds {}; mapping to 0.5", bounds.lo[o]);
                        warned[o] = true;
                    }
                    0.5
                };
            }
            q
        })
        .collect()
}

/// Non-domination rank of every point (0 = non-dominated).
pub fn nondomination_ranks(points: &[Point]) -> Vec<usize> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        r += 1;
    }
    rank
}

/// Crowding distance of each point within its own set. Extremes get
/// infinity; identical points share a value.
pub fn crowding_distances(points: &[Point]) -> Vec<f64> {
    let n = points.len();
    let mut distance = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    #[allow(clippy::needless_range_loop)]
    for o in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| points[a][o].total_cmp(&points[b][o]));
        let lo = points[order[0]][o];
        let hi = points[order[n - 1]][o];
        let span = hi - lo;
        for (pos, &i) in order.iter().enumerate() {
            let v = points[i][o];
            if v == lo || v == hi {
                distance[i] = f64::INFINITY;
                continue;
            }
            if span <= 0.0 {
                continue;
            }
            // neighbours with a different value, so duplicates agree
            let below = order[..pos].iter().rev().map(|&j| points[j][o]).find(|&x| x < v).unwrap_or(lo);
            let above = order[pos + 1..].iter().map(|&j| points[j][o]).find(|&x| x > v).unwrap_or(hi);
            distance[i] += (above - below) / span;
        }
    }
    distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn fig_front() -> Vec<Point> {
        vec![[1.0, 4.0], [2.0, 2.0], [4.0, 1.0]]
    }

    fn fig_coverage() -> Vec<Point> {
        vec![[0.5, 3.0], [0.75, 2.3], [2.3, 1.0], [3.3, 0.7]]
    }

    fn brute_force_nondominated(points: &[Point]) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let dominated = points.iter().any(|q| dominates(q, p));
            let duplicate_earlier = points[..i].contains(p);
            if !dominated && !duplicate_earlier {
                out.push(*p);
            }
        }
        out
    }

    fn brute_force_epsilon(front: &[Point], cs: &[Point]) -> Vec<f64> {
        front
            .iter()
            .map(|f| {
                let mut best = f64::INFINITY;
                for c in cs {
                    let gap = (f[0] - c[0]).max(f[1] - c[1]);
                    if gap < best {
                        best = gap;
                    }
                }
                best.max(0.0)
            })
            .collect()
    }

    #[test]
    fn incomparable_points_are_both_kept() {
        assert_eq!(nondominated_filter(&[[0.0, 1.0], [1.0, 0.0]]), vec![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn dominated_point_is_dropped() {
        assert_eq!(nondominated_filter(&[[1.0, 1.0], [0.0, 0.0]]), vec![[1.0, 1.0]]);
        assert_eq!(nondominated_filter(&[[1.0, 1.0], [1.0, 1.0], [1.0, 0.5]]), vec![[1.0, 1.0]]);
    }

    #[test]
    fn filter_matches_pairwise_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let pts: Vec<Point> = (0..10)
                .map(|_| [rng.random_range(0..5) as f64, rng.random_range(0..5) as f64])
                .collect();
            assert_eq!(nondominated_filter(&pts), brute_force_nondominated(&pts), "{pts:?}");
        }
    }

    #[test]
    fn hypervolume_examples() {
        assert_relative_eq!(hypervolume_2d(&fig_front(), [-0.5, 0.0]), 10.0, epsilon = 1e-12);
        assert_relative_eq!(hypervolume_2d(&[[1.0, 1.0]], [0.0, 0.0]), 1.0);
        assert_eq!(hypervolume_2d(&[], [0.0, 0.0]), 0.0);
        assert_eq!(hypervolume_2d(&[[-1.0, 5.0]], [0.0, 0.0]), 0.0);
    }

    #[test]
    fn epsilon_examples() {
        let (max, mean) = epsilon_indicators(&fig_front(), &fig_coverage()).unwrap();
        assert_relative_eq!(max, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mean, 0.9, epsilon = 1e-12);
        let per_point = brute_force_epsilon(&fig_front(), &fig_coverage());
        for (got, want) in per_point.iter().zip([1.0, 1.0, 0.7]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(epsilon_indicators(&fig_front(), &fig_front()).unwrap(), (0.0, 0.0));
        assert!(epsilon_indicators(&[], &fig_front()).is_err());
        assert!(epsilon_indicators(&fig_front(), &[]).is_err());
    }

    #[test]
    fn dominating_coverage_scores_zero() {
        let better: Vec<Point> = fig_front().iter().map(|p| [p[0] + 1.0, p[1] + 1.0]).collect();
        assert_eq!(epsilon_indicators(&fig_front(), &better).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn normalization() {
        let b = NormalizationBounds::new([2.0, -10.0], [4.0, 10.0]).unwrap();
        assert_eq!(normalize_points(&[[2.0, -10.0], [4.0, 10.0], [5.0, 0.0]], &b), vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.5]]);
        let unit = NormalizationBounds::new([0.0, 0.0], [1.0, 1.0]).unwrap();
        assert_eq!(normalize_points(&[[0.25, 0.75]], &unit), vec![[0.25, 0.75]]);
        let flat = NormalizationBounds::new([3.0, 0.0], [3.0, 1.0]).unwrap();
        assert_eq!(normalize_points(&[[3.0, 0.2]], &flat), vec![[0.5, 0.2]]);
        assert!(NormalizationBounds::new([1.0, 0.0], [0.0, 1.0]).is_err());
        let from = NormalizationBounds::from_sets([fig_front().as_slice(), fig_coverage().as_slice()]).unwrap();
        assert_eq!(from.lo, [0.5, 0.7]);
        assert_eq!(from.hi, [4.0, 4.0]);
    }

    #[test]
    fn ranks_and_crowding() {
        let pts = vec![[3.0, 1.0], [1.0, 3.0], [2.0, 2.0], [1.0, 1.0], [0.0, 0.0], [2.0, 2.0]];
        assert_eq!(nondomination_ranks(&pts), vec![0, 0, 0, 1, 2, 0]);
        let cd = crowding_distances(&pts[..3]);
        assert!(cd[0].is_infinite() && cd[1].is_infinite());
        assert_relative_eq!(cd[2], 2.0);
        let dup = crowding_distances(&[[3.0, 1.0], [1.0, 3.0], [2.0, 2.0], [2.0, 2.0]]);
        assert_eq!(dup[2], dup[3]);
    }

    fn points(max_len: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b)| [a, b]), 0..max_len)
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(pts in points(30)) {
            let once = nondominated_filter(&pts);
            prop_assert_eq!(nondominated_filter(&once), once);
        }

        #[test]
        fn hypervolume_is_monotone(pts in points(20), extra in (0.0f64..1.0, 0.0f64..1.0)) {
            let base = hypervolume_2d(&pts, [0.0, 0.0]);
            let mut more = pts.clone();
            more.push([extra.0, extra.1]);
            let grown = hypervolume_2d(&more, [0.0, 0.0]);
            prop_assert!(grown >= base - 1e-12);
            if pts.iter().any(|p| dominates(p, &[extra.0, extra.1]) || *p == [extra.0, extra.1]) {
                prop_assert!((grown - base).abs() < 1e-12);
            }
        }

        #[test]
        fn scaling_equivariance(pts in points(15), cs in points(15), lambda in 0.1f64..10.0) {
            let scale = |v: &[Point]| -> Vec<Point> { v.iter().map(|p| [p[0] * lambda, p[1] * lambda]).collect() };
            let hv = hypervolume_2d(&pts, [0.0, 0.0]);
            let hv_scaled = hypervolume_2d(&scale(&pts), [0.0, 0.0]);
            prop_assert!((hv_scaled - lambda * lambda * hv).abs() <= 1e-9 * (1.0 + hv_scaled));
            if !pts.is_empty() && !cs.is_empty() {
                let (e, m) = epsilon_indicators(&pts, &cs).unwrap();
                let (es, ms) = epsilon_indicators(&scale(&pts), &scale(&cs)).unwrap();
                prop_assert!((es - lambda * e).abs() < 1e-9 * (1.0 + es));
                prop_assert!((ms - lambda * m).abs() < 1e-9 * (1.0 + ms));
            }
        }

        #[test]
        fn epsilon_ordering_and_translation(pts in points(15), cs in points(15), dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
            prop_assume!(!pts.is_empty() && !cs.is_empty());
            let (e, m) = epsilon_indicators(&pts, &cs).unwrap();
            prop_assert!(e >= m && m >= 0.0);
            prop_assert_eq!(epsilon_indicators(&pts, &pts).unwrap(), (0.0, 0.0));
            let shift = |v: &[Point]| -> Vec<Point> { v.iter().map(|p| [p[0] + dx, p[1] + dy]).collect() };
            let (et, mt) = epsilon_indicators(&shift(&pts), &shift(&cs)).unwrap();
            prop_assert!((et - e).abs() < 1e-9 && (mt - m).abs() < 1e-9);
        }
    }
}
