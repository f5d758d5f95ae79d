use std::collections::HashMap;

use super::Vec2;
use crate::error::{Error, Result};
use crate::exec;

/// Uniform bucket grid over a 2D point set for nearest-neighbor and range
/// queries.
#[derive(Debug, Clone)]
pub struct PointGrid {
    points: Vec<Vec2>,
    cell: f64,
    origin: Vec2,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    max_ring: i64,
}

impl PointGrid {
    pub fn new(points: &[Vec2]) -> Self {
        let cell = Self::auto_cell(points);
        Self::with_cell(points, cell)
    }

    pub fn with_cell(points: &[Vec2], cell: f64) -> Self {
        let cell = if cell > 0.0 && cell.is_finite() {
            cell
        } else {
            1.0
        };
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if points.is_empty() {
            lo = Vec2::zeros();
            hi = Vec2::zeros();
        }
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut grid = Self {
            points: points.to_vec(),
            cell,
            origin: lo,
            buckets: HashMap::new(),
            max_ring: (((hi - lo).amax() / cell).ceil() as i64) + 2,
        };
        for (i, p) in points.iter().enumerate() {
            buckets.entry(grid.key(p)).or_default().push(i);
        }
        grid.buckets = buckets;
        grid
    }

    fn auto_cell(points: &[Vec2]) -> f64 {
        if points.len() < 2 {
            return 1.0;
        }
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).amax();
        if extent > 0.0 {
            extent / (points.len() as f64).sqrt()
        } else {
            1.0
        }
    }

    fn key(&self, p: &Vec2) -> (i64, i64) {
        let q = (p - self.origin) / self.cell;
        (q.x.floor() as i64, q.y.floor() as i64)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    /// Index and L1 distance of the nearest point under the L1 metric.
    /// Ties resolve to the lowest index.
    pub fn nearest_l1(&self, q: &Vec2) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (cx, cy) = self.key(q);
        let mut best: Option<(usize, f64)> = None;
        let mut ring = 0i64;
        loop {
            for (dx, dy) in ring_cells(ring) {
                if let Some(ids) = self.buckets.get(&(cx + dx, cy + dy)) {
                    for &i in ids {
                        let d = (self.points[i] - q).abs().sum();
                        match best {
                            Some((bi, bd)) if d > bd || (d == bd && i > bi) => {}
                            _ => best = Some((i, d)),
                        }
                    }
                }
            }
            // anything in ring r+1 is at L-inf distance >= r * cell
            if let Some((_, bd)) = best {
                if bd <= ring as f64 * self.cell {
                    break;
                }
            }
            ring += 1;
            if ring > self.max_ring + self.ring_offset(q) {
                break;
            }
        }
        best
    }

    fn ring_offset(&self, q: &Vec2) -> i64 {
        let (cx, cy) = self.key(q);
        cx.abs().max(cy.abs())
    }

    /// Indices of all points within Euclidean distance `radius` of `q`.
    pub fn within(&self, q: &Vec2, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.points.is_empty() || !(radius >= 0.0) {
            return out;
        }
        let lo = self.key(&(q - Vec2::repeat(radius)));
        let hi = self.key(&(q + Vec2::repeat(radius)));
        for x in lo.0..=hi.0 {
            for y in lo.1..=hi.1 {
                if let Some(ids) = self.buckets.get(&(x, y)) {
                    out.extend(
                        ids.iter()
                            .copied()
                            .filter(|&i| (self.points[i] - q).norm() <= radius),
                    );
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn ring_cells(r: i64) -> Vec<(i64, i64)> {
    if r == 0 {
        return vec![(0, 0)];
    }
    let mut v = Vec::with_capacity(8 * r as usize);
    for d in -r..=r {
        v.push((d, -r));
        v.push((d, r));
    }
    for d in -r + 1..r {
        v.push((-r, d));
        v.push((r, d));
    }
    v
}

/// L1 distance from `q` to its nearest neighbor in `grid`.
pub fn nearest_l1(grid: &PointGrid, q: &Vec2) -> f64 {
    grid.nearest_l1(q).map(|(_, d)| d).unwrap_or(f64::INFINITY)
}

fn mean_nn(from: &[Vec2], to: &PointGrid) -> f64 {
    let d = exec::map(from, |q| nearest_l1(to, q));
    d.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric L1 Chamfer distance: the average of the two directed mean
/// nearest-neighbor L1 distances, divided by `normalizer`.
pub fn chamfer_l1(a: &[Vec2], b: &[Vec2], normalizer: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::DegenerateInput(
            "Chamfer distance of an empty point set".into(),
        ));
    }
    if !(normalizer > 0.0) {
        return Err(Error::DegenerateInput(format!(
            "Chamfer normalizer must be positive, got {normalizer}"
        )));
    }
    let ga = PointGrid::new(a);
    let gb = PointGrid::new(b);
    Ok(0.5 * (mean_nn(a, &gb) + mean_nn(b, &ga)) / normalizer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(a: &[Vec2], b: &[Vec2], norm: f64) -> f64 {
        let dir = |x: &[Vec2], y: &[Vec2]| {
            x.iter()
                .map(|p| {
                    y.iter()
                        .map(|q| (p - q).abs().sum())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / x.len() as f64
        };
        0.5 * (dir(a, b) + dir(b, a)) / norm
    }

    #[test]
    fn identical_sets_are_zero() {
        let a = vec![Vec2::new(0.1, 0.2), Vec2::new(-0.3, 0.4)];
        assert_eq!(chamfer_l1(&a, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_is_l1_distance() {
        let d = chamfer_l1(&[Vec2::new(0.0, 0.0)], &[Vec2::new(3.0, 4.0)], 1.0).unwrap();
        assert_eq!(d, 7.0);
    }

    #[test]
    fn empty_set_is_degenerate() {
        assert!(chamfer_l1(&[], &[Vec2::zeros()], 1.0).is_err());
        assert!(chamfer_l1(&[Vec2::zeros()], &[Vec2::zeros()], 0.0).is_err());
    }

    #[test]
    fn within_matches_exhaustive_scan() {
        let pts: Vec<Vec2> = (0..30)
            .flat_map(|i| (0..30).map(move |j| Vec2::new(i as f64 * 0.01, j as f64 * 0.01)))
            .collect();
        let grid = PointGrid::with_cell(&pts, 0.013);
        for q in [
            Vec2::new(0.1, 0.1),
            Vec2::new(0.0, 0.29),
            Vec2::new(-0.05, 0.15),
        ] {
            for r in [0.0, 0.015, 0.05, 0.2] {
                let want: Vec<usize> = (0..pts.len())
                    .filter(|&i| (pts[i] - q).norm() <= r)
                    .collect();
                assert_eq!(grid.within(&q, r), want);
            }
        }
    }

    fn pts(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..max)
    }

    proptest! {
        #[test]
        fn grid_matches_brute_force(a in pts(60), b in pts(60)) {
            let a: Vec<Vec2> = a.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let b: Vec<Vec2> = b.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let got = chamfer_l1(&a, &b, 2.0).unwrap();
            let want = brute(&a, &b, 2.0);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        }

        #[test]
        fn symmetric_and_scale_invariant(a in pts(40), b in pts(40), s in 0.1..10.0f64) {
            let a: Vec<Vec2> = a.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let b: Vec<Vec2> = b.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let ab = chamfer_l1(&a, &b, 1.5).unwrap();
            let ba = chamfer_l1(&b, &a, 1.5).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            let sa: Vec<Vec2> = a.iter().map(|p| p * s).collect();
            let sb: Vec<Vec2> = b.iter().map(|p| p * s).collect();
            let scaled = chamfer_l1(&sa, &sb, 1.5 * s).unwrap();
            prop_assert!((scaled - ab).abs() <= 1e-9 * ab.max(1.0));
            prop_assert_eq!(chamfer_l1(&a, &a, 1.0).unwrap(), 0.0);
        }
    }
}
