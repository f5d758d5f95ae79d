use super::{Vec2, Vec3};
use crate::error::{Error, Result};

/// A sampled 2D curve. Contour curves carry the 3D object-space point each
/// sample was projected from; sketch strokes carry none.
///
/// Closed polylines do not repeat their first sample; the closing segment
/// from the last sample back to the first is implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredPolyline {
    pub points: Vec<Vec2>,
    pub anchors: Option<Vec<Vec3>>,
    pub closed: bool,
    pub source_id: usize,
}

impl AnchoredPolyline {
    pub fn stroke(points: Vec<Vec2>, closed: bool, source_id: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateInput(format!(
                "polyline {source_id} has {} samples, need at least 2",
                points.len()
            )));
        }
        Ok(Self {
            points,
            anchors: None,
            closed,
            source_id,
        })
    }

    pub fn contour(
        points: Vec<Vec2>,
        anchors: Vec<Vec3>,
        closed: bool,
        source_id: usize,
    ) -> Result<Self> {
        if anchors.len() != points.len() {
            return Err(Error::DegenerateInput(format!(
                "polyline {source_id}: {} anchors for {} samples",
                anchors.len(),
                points.len()
            )));
        }
        let mut p = Self::stroke(points, closed, source_id)?;
        p.anchors = Some(anchors);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn anchor(&self, i: usize) -> Option<Vec3> {
        self.anchors.as_ref().map(|a| a[i])
    }

    /// Number of segments, including the closing one for closed curves.
    pub fn segment_count(&self) -> usize {
        let n = self.points.len();
        if self.closed {
            n
        } else {
            n.saturating_sub(1)
        }
    }

    pub fn segment(&self, k: usize) -> (usize, usize) {
        (k, (k + 1) % self.points.len())
    }

    pub fn length(&self) -> f64 {
        (0..self.segment_count())
            .map(|k| {
                let (a, b) = self.segment(k);
                (self.points[b] - self.points[a]).norm()
            })
            .sum()
    }

    /// Neighbor indices of sample `i` along the curve (previous, next).
    pub fn neighbors(&self, i: usize) -> (Option<usize>, Option<usize>) {
        let n = self.points.len();
        if self.closed {
            (Some((i + n - 1) % n), Some((i + 1) % n))
        } else {
            (
                if i > 0 { Some(i - 1) } else { None },
                if i + 1 < n { Some(i + 1) } else { None },
            )
        }
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.closed || (i > 0 && i + 1 < self.points.len())
    }

    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.points.reverse();
        if let Some(a) = out.anchors.as_mut() {
            a.reverse();
        }
        out
    }
}

/// A position along a polyline: segment index and parameter in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePos {
    pub segment: usize,
    pub t: f64,
}

/// Arc-length-uniform sample positions along `points`.
pub(crate) fn arc_length_params(
    points: &[Vec2],
    closed: bool,
    interval: f64,
) -> Result<Vec<SamplePos>> {
    if !(interval > 0.0) || !interval.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "sampling interval must be positive, got {interval}"
        )));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateInput("polyline needs 2 samples".into()));
    }
    let n_seg = if closed { n } else { n - 1 };
    let seg_len: Vec<f64> = (0..n_seg)
        .map(|k| (points[(k + 1) % n] - points[k]).norm())
        .collect();
    let total: f64 = seg_len.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("zero-length polyline".into()));
    }
    let tol = 1e-9 * total.max(interval);

    let mut out = Vec::with_capacity((total / interval) as usize + 2);
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    let mut k = 0usize;
    loop {
        let s = k as f64 * interval;
        if s >= total - tol {
            break;
        }
        while seg + 1 < n_seg && seg_start + seg_len[seg] <= s {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let t = if seg_len[seg] > 0.0 {
            ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(SamplePos { segment: seg, t });
        k += 1;
    }
    if !closed {
        out.push(SamplePos {
            segment: n_seg - 1,
            t: 1.0,
        });
    }
    Ok(out)
}

/// Resample at a fixed arc-length interval. Endpoints are kept; the last
/// gap may be shorter than `interval`. Anchors are interpolated linearly
/// along their source segments.
pub fn resample(poly: &AnchoredPolyline, interval: f64) -> Result<AnchoredPolyline> {
    let params = arc_length_params(&poly.points, poly.closed, interval)?;
    let n = poly.points.len();
    let lerp2 = |sp: &SamplePos| {
        let a = poly.points[sp.segment];
        let b = poly.points[(sp.segment + 1) % n];
        if sp.t == 1.0 {
            b
        } else {
            a + (b - a) * sp.t
        }
    };
    let points: Vec<Vec2> = params.iter().map(lerp2).collect();
    let anchors = poly.anchors.as_ref().map(|an| {
        params
            .iter()
            .map(|sp| {
                let a = an[sp.segment];
                let b = an[(sp.segment + 1) % n];
                if sp.t == 1.0 {
                    b
                } else {
                    a + (b - a) * sp.t
                }
            })
            .collect()
    });
    if points.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "polyline {} shorter than the sampling interval",
            poly.source_id
        )));
    }
    Ok(AnchoredPolyline {
        points,
        anchors,
        closed: poly.closed,
        source_id: poly.source_id,
    })
}

/// Unit tangent at sample `i`: central difference of the neighbors,
/// one-sided at the ends of open curves.
pub fn tangent_at(poly: &AnchoredPolyline, i: usize) -> Result<Vec2> {
    let n = poly.points.len();
    if n < 2 || i >= n {
        return Err(Error::OutOfDomain(format!("tangent index {i} of {n}")));
    }
    let (prev, next) = poly.neighbors(i);
    let a = poly.points[prev.unwrap_or(i)];
    let b = poly.points[next.unwrap_or(i)];
    let d = b - a;
    let len = d.norm();
    if !(len > 1e-15) {
        return Err(Error::ZeroTangent { index: i });
    }
    Ok(d / len)
}

/// Interior angle in [0, pi] at sample `i`.
pub fn angle_at(poly: &AnchoredPolyline, i: usize) -> Result<f64> {
    let n = poly.points.len();
    if i >= n || !poly.is_interior(i) {
        return Err(Error::OutOfDomain(format!(
            "angle undefined at endpoint {i} of open polyline with {n} samples"
        )));
    }
    let (prev, next) = poly.neighbors(i);
    let a = poly.points[prev.unwrap()] - poly.points[i];
    let b = poly.points[next.unwrap()] - poly.points[i];
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Err(Error::ZeroTangent { index: i });
    }
    let cross = a.x * b.y - a.y * b.x;
    Ok(cross.abs().atan2(a.dot(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(pts: &[(f64, f64)]) -> AnchoredPolyline {
        AnchoredPolyline::stroke(
            pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
            false,
            0,
        )
        .unwrap()
    }

    #[test]
    fn straight_segment_subdivides_uniformly() {
        let r = resample(&line(&[(0.0, 0.0), (1.0, 0.0)]), 0.25).unwrap();
        let xs: Vec<f64> = r.points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn already_uniform_is_fixed_point() {
        let pts: Vec<(f64, f64)> = (0..11).map(|k| (0.1 * k as f64, 0.0)).collect();
        let p = line(&pts);
        let r = resample(&p, 0.1).unwrap();
        assert_eq!(r.points.len(), p.points.len());
        for (a, b) in r.points.iter().zip(&p.points) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    /// Independent arc-length oracle: walk the polygon with a tiny fixed step
    /// and count how many multiples of the interval are crossed.
    #[test]
    fn circle_sample_count_matches_arc_length_integrator() {
        let n = 64;
        let mut pts: Vec<Vec2> = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        pts.push(pts[0]);
        let poly = AnchoredPolyline::stroke(pts.clone(), false, 0).unwrap();

        let mut perimeter = 0.0;
        let steps = 10_000;
        for w in pts.windows(2) {
            for s in 0..steps {
                let a = w[0] + (w[1] - w[0]) * (s as f64 / steps as f64);
                let b = w[0] + (w[1] - w[0]) * ((s + 1) as f64 / steps as f64);
                perimeter += (b - a).norm();
            }
        }
        let expected = (perimeter / 0.1).ceil() as usize + 1;
        let r = resample(&poly, 0.1).unwrap();
        assert_eq!(r.points.len(), expected);
        for w in r.points.windows(2) {
            assert!((w[1] - w[0]).norm() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn closed_resample_does_not_repeat_start() {
        let sq = AnchoredPolyline::stroke(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            true,
            3,
        )
        .unwrap();
        let r = resample(&sq, 0.5).unwrap();
        assert_eq!(r.points.len(), 8);
        assert!(r.closed);
    }

    #[test]
    fn anchors_interpolate_linearly() {
        let p = AnchoredPolyline::contour(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)],
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 4.0, -2.0)],
            false,
            0,
        )
        .unwrap();
        let r = resample(&p, 0.25).unwrap();
        let a = r.anchors.unwrap();
        assert!((a[1] - Vec3::new(0.5, 1.0, -0.5)).norm() < 1e-15);
        assert_eq!(a[4], Vec3::new(2.0, 4.0, -2.0));
    }

    #[test]
    fn zero_length_is_degenerate() {
        let p = line(&[(1.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(resample(&p, 0.1), Err(Error::DegenerateInput(_))));
        assert!(matches!(
            resample(&line(&[(0.0, 0.0), (1.0, 0.0)]), 0.0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn tangents_on_straight_line_and_reversal() {
        let p = line(&[(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.5, 0.0)]);
        for i in 0..4 {
            assert_eq!(tangent_at(&p, i).unwrap(), Vec2::new(1.0, 0.0));
        }
        let r = p.reversed();
        for i in 0..4 {
            assert_eq!(tangent_at(&r, i).unwrap(), Vec2::new(-1.0, 0.0));
        }
    }

    #[test]
    fn circle_tangents_are_perpendicular_to_radius() {
        let n = 48;
        let step = 2.0 * PI / n as f64;
        let pts = (0..n)
            .map(|k| Vec2::new((k as f64 * step).cos(), (k as f64 * step).sin()))
            .collect();
        let p = AnchoredPolyline::stroke(pts, true, 0).unwrap();
        for i in 0..n {
            let t = tangent_at(&p, i).unwrap();
            let r = p.points[i].normalize();
            // angle between tangent and radius deviates from pi/2 by < 2 steps
            let dev = (t.dot(&r)).abs().asin();
            assert!(dev < 2.0 * step);
        }
    }

    #[test]
    fn coincident_neighbors_have_no_tangent() {
        let p = line(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        assert!(matches!(
            tangent_at(&p, 1),
            Err(Error::ZeroTangent { index: 1 })
        ));
    }

    #[test]
    fn angles() {
        assert!(
            (angle_at(&line(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]), 1).unwrap() - PI).abs() < 1e-15
        );
        assert!(
            (angle_at(&line(&[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)]), 1).unwrap() - PI / 2.0).abs()
                < 1e-15
        );
        assert!(matches!(
            angle_at(&line(&[(0.0, 0.0), (1.0, 0.0)]), 0),
            Err(Error::OutOfDomain(_))
        ));
    }

    /// Three consecutive points on a circle with arc angle `a` between them:
    /// the inscribed angle at the middle point is pi - a.
    #[test]
    fn inscribed_angle_on_circle() {
        for &a in &[0.05, 0.3, 1.0] {
            let pts: Vec<(f64, f64)> = (0..3)
                .map(|k| ((k as f64 * a).cos() * 2.0, (k as f64 * a).sin() * 2.0))
                .collect();
            let got = angle_at(&line(&pts), 1).unwrap();
            assert!((got - (PI - a)).abs() < 1e-12, "{got} vs {}", PI - a);
        }
    }

    #[test]
    fn polyline_needs_two_samples() {
        assert!(AnchoredPolyline::stroke(vec![Vec2::zeros()], false, 0).is_err());
    }
}
