//! Contour-to-stroke correspondences.
//!
//! Each contour curve is matched independently to nearby stroke vertices by
//! decoding a hidden Markov model with Viterbi: the emission factor is a
//! vertex compatibility score (distance plus tangent agreement) and the
//! transition factor a consistency score between consecutive contour edges
//! and the segment joining their matched stroke vertices. Stroke vertices
//! claimed by several curves are then resolved in a second round.

mod conflict;
mod viterbi;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use conflict::resolve_conflicts;
pub use viterbi::{path_log_score, viterbi_match, CurveMatch};

use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{angle_at, tangent_at, AnchoredPolyline, PointGrid, Vec2};

/// Kernel widths and search radii for matching. Distances are in
/// normalized image units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Width of the compatibility and consistency kernels.
    pub sigma1: f64,
    /// Width of the angle kernel used for confidences (radians).
    pub sigma2: f64,
    pub candidate_radius: f64,
    /// Multiplier applied to the candidate radius in the second round.
    pub conflict_radius_factor: f64,
    /// Optional separate width for the consistency kernel.
    pub edge_sigma: Option<f64>,
}

impl Default for MatchParams {
    fn default() -> Self {
        let sigma1 = 0.02;
        Self {
            sigma1,
            sigma2: std::f64::consts::PI / 8.0,
            candidate_radius: 3.0 * sigma1,
            conflict_radius_factor: 2.0,
            edge_sigma: None,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [
            self.sigma1,
            self.sigma2,
            self.candidate_radius,
            self.conflict_radius_factor,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite())
            && self.edge_sigma.is_none_or(|s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "matching parameters must be positive: {self:?}"
            )))
        }
    }

    pub fn consistency_sigma(&self) -> f64 {
        self.edge_sigma.unwrap_or(self.sigma1)
    }
}

/// A vertex of a sketch stroke.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrokeVertex {
    pub stroke: usize,
    pub index: usize,
}

/// Resampled strokes with precomputed tangents and a spatial index.
#[derive(Clone, Debug)]
pub struct StrokeSet {
    pub strokes: Vec<AnchoredPolyline>,
    tangents: Vec<Vec<Option<Vec2>>>,
    ids: Vec<StrokeVertex>,
    grid: PointGrid,
}

impl StrokeSet {
    pub fn new(strokes: Vec<AnchoredPolyline>, cell: f64) -> Self {
        let tangents = strokes
            .iter()
            .map(|s| (0..s.len()).map(|j| tangent_at(s, j).ok()).collect())
            .collect();
        let mut ids = Vec::new();
        let mut pts = Vec::new();
        for (k, s) in strokes.iter().enumerate() {
            for (j, p) in s.points.iter().enumerate() {
                ids.push(StrokeVertex {
                    stroke: k,
                    index: j,
                });
                pts.push(*p);
            }
        }
        let grid = PointGrid::with_cell(&pts, cell);
        Self {
            strokes,
            tangents,
            ids,
            grid,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn point(&self, q: StrokeVertex) -> Vec2 {
        self.strokes[q.stroke].points[q.index]
    }

    pub fn tangent(&self, q: StrokeVertex) -> Option<Vec2> {
        self.tangents[q.stroke][q.index]
    }

    /// Stroke vertices within `radius` of `p`, nearest first; ties broken
    /// by stroke id then index. Vertices in `exclude` are skipped.
    pub fn candidates(
        &self,
        p: &Vec2,
        radius: f64,
        exclude: Option<&BTreeSet<StrokeVertex>>,
    ) -> Vec<StrokeVertex> {
        let mut c: Vec<(f64, StrokeVertex)> = self
            .grid
            .within(p, radius)
            .into_iter()
            .map(|k| self.ids[k])
            .filter(|q| exclude.is_none_or(|ex| !ex.contains(q)))
            .map(|q| ((self.point(q) - p).norm(), q))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        c.into_iter().map(|(_, q)| q).collect()
    }
}

/// Candidate stroke vertices for `p` within `radius`, nearest first.
pub fn candidate_set(p: &Vec2, strokes: &StrokeSet, radius: f64) -> Vec<StrokeVertex> {
    strokes.candidates(p, radius, None)
}

/// Log of the vertex compatibility `exp(-(d_a + d_t)^2 / (2 sigma1^2))`
/// with `d_a = |p - q|` and `d_t = 1 - |t_p . t_q|`. A missing tangent
/// counts as fully misaligned.
pub fn log_compatibility(
    p: &Vec2,
    q: &Vec2,
    tp: Option<Vec2>,
    tq: Option<Vec2>,
    sigma1: f64,
) -> f64 {
    let da = (p - q).norm();
    let dt = match (tp, tq) {
        (Some(a), Some(b)) => 1.0 - a.dot(&b).abs(),
        _ => 1.0,
    };
    -(da + dt).powi(2) / (2.0 * sigma1 * sigma1)
}

pub fn compatibility(p: &Vec2, q: &Vec2, tp: Option<Vec2>, tq: Option<Vec2>, sigma1: f64) -> f64 {
    log_compatibility(p, q, tp, tq, sigma1).exp()
}

/// Log of the edge consistency `exp(-d_p^2 / (2 sigma^2))` with
/// `d_p = |(p_next - p) - (q_next - q)|`.
pub fn log_consistency(p: &Vec2, p_next: &Vec2, q: &Vec2, q_next: &Vec2, sigma: f64) -> f64 {
    let dp = ((p_next - p) - (q_next - q)).norm();
    -dp * dp / (2.0 * sigma * sigma)
}

pub fn consistency(p: &Vec2, p_next: &Vec2, q: &Vec2, q_next: &Vec2, sigma: f64) -> f64 {
    log_consistency(p, p_next, q, q_next, sigma).exp()
}

/// Confidence from the angle difference between contour and stroke:
/// `exp(-(a_p - a_q)^2 / (2 sigma2^2))`.
pub fn confidence_from_angles(angle_p: f64, angle_q: f64, sigma2: f64) -> f64 {
    let d = angle_p - angle_q;
    (-d * d / (2.0 * sigma2 * sigma2))
        .exp()
        .max(f64::MIN_POSITIVE)
}

/// One contour vertex matched to one stroke vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchEntry {
    pub curve: usize,
    pub i: usize,
    pub stroke: usize,
    pub j: usize,
    /// Vertex compatibility, in (0, 1].
    pub sv: f64,
    /// Confidence, in (0, 1].
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Unmatched {
    pub curve: usize,
    pub i: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub entries: Vec<MatchEntry>,
    pub unmatched: Vec<Unmatched>,
}

impl MatchSet {
    /// Identity correspondences between curves and same-shaped strokes
    /// (sample k of curve c to sample k of stroke c), with unit confidence.
    pub fn identity(curves: &[AnchoredPolyline]) -> Self {
        let entries = curves
            .iter()
            .enumerate()
            .flat_map(|(c, curve)| {
                (0..curve.len()).map(move |i| MatchEntry {
                    curve: c,
                    i,
                    stroke: c,
                    j: i,
                    sv: 1.0,
                    alpha: 1.0,
                })
            })
            .collect();
        Self {
            entries,
            unmatched: Vec::new(),
        }
    }

    /// True when no stroke vertex is claimed by two different curves.
    pub fn has_cross_curve_duplicates(&self) -> bool {
        let mut owner = std::collections::BTreeMap::new();
        for e in &self.entries {
            let prev = owner.insert((e.stroke, e.j), e.curve);
            if prev.is_some_and(|c| c != e.curve) {
                return true;
            }
        }
        false
    }
}

/// Per-curve assignment: `None` for vertices without a match.
pub type Assignment = Vec<Option<StrokeVertex>>;

pub(crate) fn contour_tangents(curve: &AnchoredPolyline) -> Vec<Option<Vec2>> {
    (0..curve.len())
        .map(|i| tangent_at(curve, i).ok())
        .collect()
}

pub(crate) fn vertex_sv(
    curve: &AnchoredPolyline,
    tangents: &[Option<Vec2>],
    i: usize,
    q: StrokeVertex,
    strokes: &StrokeSet,
    params: &MatchParams,
) -> f64 {
    log_compatibility(
        &curve.points[i],
        &strokes.point(q),
        tangents[i],
        strokes.tangent(q),
        params.sigma1,
    )
}

/// Round-one matching of a single curve.
pub fn match_curve(
    curve: &AnchoredPolyline,
    strokes: &StrokeSet,
    params: &MatchParams,
) -> CurveMatch {
    let cands: Vec<Vec<StrokeVertex>> = curve
        .points
        .iter()
        .map(|p| strokes.candidates(p, params.candidate_radius, None))
        .collect();
    viterbi_match(curve, strokes, params, &cands)
}

/// Confidences for final assignments. Vertices whose angle is undefined on
/// either side borrow the confidence of an adjacent matched vertex, or get 1.
pub fn confidences(
    curve: &AnchoredPolyline,
    assignment: &Assignment,
    strokes: &StrokeSet,
    sigma2: f64,
) -> Vec<Option<f64>> {
    let direct: Vec<Option<f64>> = assignment
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let q = (*q)?;
            let ap = angle_at(curve, i).ok()?;
            let aq = angle_at(&strokes.strokes[q.stroke], q.index).ok()?;
            Some(confidence_from_angles(ap, aq, sigma2))
        })
        .collect();
    assignment
        .iter()
        .enumerate()
        .map(|(i, q)| {
            q.map(|_| {
                direct[i].unwrap_or_else(|| {
                    let (prev, next) = curve.neighbors(i);
                    prev.and_then(|k| direct[k])
                        .or_else(|| next.and_then(|k| direct[k]))
                        .unwrap_or(1.0)
                })
            })
        })
        .collect()
}

/// Full matching: per-curve Viterbi, conflict resolution and confidences.
pub fn match_all(
    curves: &[AnchoredPolyline],
    strokes: &StrokeSet,
    params: &MatchParams,
) -> Result<MatchSet> {
    params.validate()?;
    let round1: Vec<Assignment> = exec::map(curves, |c| match_curve(c, strokes, params).assignment);
    let assignments = resolve_conflicts(curves, strokes, params, round1);
    Ok(build_match_set(curves, strokes, params, &assignments))
}

pub fn build_match_set(
    curves: &[AnchoredPolyline],
    strokes: &StrokeSet,
    params: &MatchParams,
    assignments: &[Assignment],
) -> MatchSet {
    let mut set = MatchSet::default();
    for (c, (curve, assign)) in curves.iter().zip(assignments).enumerate() {
        let tangents = contour_tangents(curve);
        let alphas = confidences(curve, assign, strokes, params.sigma2);
        for (i, q) in assign.iter().enumerate() {
            match q {
                Some(q) => set.entries.push(MatchEntry {
                    curve: c,
                    i,
                    stroke: q.stroke,
                    j: q.index,
                    sv: vertex_sv(curve, &tangents, i, *q, strokes, params)
                        .exp()
                        .max(f64::MIN_POSITIVE),
                    alpha: alphas[i].unwrap_or(1.0),
                }),
                None => set.unmatched.push(Unmatched { curve: c, i }),
            }
        }
    }
    set
}
