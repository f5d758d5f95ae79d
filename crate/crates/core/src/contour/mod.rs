//! Contour extraction: occluding contours, sharp features and boundaries of
//! a triangle mesh under a camera, chained into curves, projected and
//! trimmed to their visible parts.

mod bvh;
mod mesh;

use std::collections::HashMap;

pub use bvh::Bvh;
pub use mesh::TriangleMesh;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{arc_length_params, AnchoredPolyline, CameraRig, Vec3};

/// Default dihedral threshold for sharp edges.
pub const DEFAULT_SHARP_ANGLE: f64 = std::f64::consts::PI / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    Silhouette,
    Sharp,
    Boundary,
}

impl ContourKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContourKind::Silhouette => "silhouette",
            ContourKind::Sharp => "sharp",
            ContourKind::Boundary => "boundary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "silhouette" => Some(ContourKind::Silhouette),
            "sharp" => Some(ContourKind::Sharp),
            "boundary" => Some(ContourKind::Boundary),
            _ => None,
        }
    }
}

/// Classification of one mesh edge under a camera.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureEdge {
    pub index: usize,
    pub vertices: (usize, usize),
    pub faces: Vec<usize>,
    pub silhouette: bool,
    pub sharp: bool,
    pub boundary: bool,
    /// View direction used for the facing test (at the edge midpoint).
    pub view: Vec3,
}

impl FeatureEdge {
    /// Label used for chaining: boundary over silhouette over sharp.
    pub fn kind(&self) -> Option<ContourKind> {
        if self.boundary {
            Some(ContourKind::Boundary)
        } else if self.silhouette {
            Some(ContourKind::Silhouette)
        } else if self.sharp {
            Some(ContourKind::Sharp)
        } else {
            None
        }
    }
}

/// Contour curves with their kinds. Every curve carries 3D anchors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ContourSet {
    pub curves: Vec<AnchoredPolyline>,
    pub kinds: Vec<ContourKind>,
}

impl ContourSet {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn push(&mut self, curve: AnchoredPolyline, kind: ContourKind) {
        self.curves.push(curve);
        self.kinds.push(kind);
    }

    pub fn sample_count(&self) -> usize {
        self.curves.iter().map(|c| c.len()).sum()
    }
}

/// Classify every mesh edge as silhouette / sharp / boundary.
///
/// A face is front-facing when its normal points against the view direction.
/// Silhouette edges separate a front-facing from a non-front-facing face.
pub fn classify_edges(
    mesh: &TriangleMesh,
    rig: &CameraRig,
    sharp_angle: f64,
) -> Result<Vec<FeatureEdge>> {
    let edges = mesh.edges();
    let cos_sharp = sharp_angle.cos();
    let results = exec::map_range(edges.len(), |i| -> Result<FeatureEdge> {
        let ((a, b), faces) = &edges[i];
        let mid = (mesh.vertices[*a] + mesh.vertices[*b]) * 0.5;
        let view = rig.view_dir(&mid)?;
        let boundary = faces.len() == 1;
        let (mut silhouette, mut sharp) = (false, false);
        if faces.len() >= 2 {
            let (n1, n2) = (mesh.normals[faces[0]], mesh.normals[faces[1]]);
            let front1 = n1.dot(&view) < 0.0;
            let front2 = n2.dot(&view) < 0.0;
            silhouette = front1 != front2;
            sharp = n1.dot(&n2) < cos_sharp || faces.len() > 2;
        }
        Ok(FeatureEdge {
            index: i,
            vertices: (*a, *b),
            faces: faces.clone(),
            silhouette,
            sharp,
            boundary,
            view,
        })
    });
    results.into_iter().collect()
}

/// Chain feature edges into maximal polylines. A chain passes through a
/// vertex only when exactly two feature edges of the same kind meet there.
/// Chains are ordered by their smallest edge index.
pub fn chain_edges(edges: &[FeatureEdge]) -> Vec<(Vec<usize>, bool, ContourKind, usize)> {
    let feats: Vec<&FeatureEdge> = edges.iter().filter(|e| e.kind().is_some()).collect();
    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, e) in feats.iter().enumerate() {
        incident.entry(e.vertices.0).or_default().push(k);
        incident.entry(e.vertices.1).or_default().push(k);
    }
    let through = |v: usize| -> Option<(usize, usize)> {
        let inc = &incident[&v];
        if inc.len() == 2 && feats[inc[0]].kind() == feats[inc[1]].kind() {
            Some((inc[0], inc[1]))
        } else {
            None
        }
    };
    let other = |k: usize, v: usize| {
        let (a, b) = feats[k].vertices;
        if a == v {
            b
        } else {
            a
        }
    };

    let mut used = vec![false; feats.len()];
    let mut chains = Vec::new();
    for start in 0..feats.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let kind = feats[start].kind().unwrap();
        let (a, b) = feats[start].vertices;
        let mut fwd = vec![a, b];
        let mut min_edge = feats[start].index;
        let mut closed = false;
        // forward from b
        let mut cur_edge = start;
        let mut v = b;
        while let Some((e1, e2)) = through(v) {
            let next = if e1 == cur_edge { e2 } else { e1 };
            if next == start {
                closed = true;
                break;
            }
            if used[next] {
                break;
            }
            used[next] = true;
            min_edge = min_edge.min(feats[next].index);
            v = other(next, v);
            fwd.push(v);
            cur_edge = next;
        }
        if closed {
            fwd.pop(); // last vertex equals a
        } else {
            // backward from a
            let mut back = Vec::new();
            let mut cur_edge = start;
            let mut v = a;
            while let Some((e1, e2)) = through(v) {
                let next = if e1 == cur_edge { e2 } else { e1 };
                if used[next] {
                    break;
                }
                used[next] = true;
                min_edge = min_edge.min(feats[next].index);
                v = other(next, v);
                back.push(v);
                cur_edge = next;
            }
            back.reverse();
            back.extend(fwd);
            fwd = back;
        }
        chains.push((fwd, closed, kind, min_edge));
    }
    chains.sort_by_key(|c| c.3);
    chains
}

/// Extract contour chains of `mesh` under `rig`. Curve samples are the
/// analytic projections of the chain vertices (not yet resampled).
pub fn extract_contours(
    mesh: &TriangleMesh,
    rig: &CameraRig,
    sharp_angle: f64,
) -> Result<ContourSet> {
    let edges = classify_edges(mesh, rig, sharp_angle)?;
    let chains = chain_edges(&edges);
    if chains.is_empty() {
        return Err(Error::EmptyContours(
            "mesh has no contour edges in this view".into(),
        ));
    }
    let mut set = ContourSet::default();
    for (verts, closed, kind, min_edge) in chains {
        let anchors: Vec<Vec3> = verts.iter().map(|&v| mesh.vertices[v]).collect();
        let points = anchors
            .iter()
            .map(|a| rig.project(a))
            .collect::<Result<Vec<_>>>()?;
        set.push(
            AnchoredPolyline::contour(points, anchors, closed, min_edge)?,
            kind,
        );
    }
    Ok(set)
}

/// Resample every curve at interval `l` in image space. Anchors are placed
/// with perspective-correct interpolation so that projecting an anchor
/// reproduces its 2D sample exactly. Curves that collapse to a point in
/// this view are dropped.
pub fn project_contours(set: &ContourSet, rig: &CameraRig, l: f64) -> Result<ContourSet> {
    if set.is_empty() {
        return Err(Error::EmptyContours("nothing to project".into()));
    }
    let mut out = ContourSet::default();
    for (curve, &kind) in set.curves.iter().zip(&set.kinds) {
        let anchors = curve
            .anchors
            .as_ref()
            .ok_or_else(|| Error::DegenerateInput("contour curve without anchors".into()))?;
        let pts = anchors
            .iter()
            .map(|a| rig.project(a))
            .collect::<Result<Vec<_>>>()?;
        let params = match arc_length_params(&pts, curve.closed, l) {
            Ok(p) => p,
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        };
        let n = anchors.len();
        let mut new_anchors = Vec::with_capacity(params.len());
        for sp in &params {
            let (a, b) = (anchors[sp.segment], anchors[(sp.segment + 1) % n]);
            let (wa, wb) = (rig.clip(&a).w, rig.clip(&b).w);
            let s = sp.t;
            let denom = (1.0 - s) * wb + s * wa;
            let t = if s == 1.0 {
                1.0
            } else if denom != 0.0 {
                s * wa / denom
            } else {
                s
            };
            new_anchors.push(if t == 1.0 { b } else { a + (b - a) * t });
        }
        if new_anchors.len() < 2 {
            continue;
        }
        let points = new_anchors
            .iter()
            .map(|a| rig.project(a))
            .collect::<Result<Vec<_>>>()?;
        out.push(
            AnchoredPolyline::contour(points, new_anchors, curve.closed, curve.source_id)?,
            kind,
        );
    }
    Ok(out)
}

/// Occlusion tester shared by visibility trimming and regularization.
pub struct Occluder<'m> {
    pub bvh: Bvh<'m>,
    pub epsilon: f64,
}

impl<'m> Occluder<'m> {
    pub fn new(mesh: &'m TriangleMesh) -> Self {
        Self {
            bvh: Bvh::build(mesh),
            epsilon: 1e-4 * mesh.bbox_diagonal(),
        }
    }

    /// Nearest surface point strictly in front of `p` along the viewing ray
    /// (more than `epsilon` toward the camera).
    pub fn blocker(&self, rig: &CameraRig, p: &Vec3) -> Result<Option<Vec3>> {
        let (o, d) = rig.ray_to(p)?;
        let t_p = (p - o).dot(&d);
        Ok(self
            .bvh
            .first_hit(&o, &d, 1e-12, t_p - self.epsilon)
            .map(|(t, _)| o + d * t))
    }

    pub fn visible(&self, rig: &CameraRig, p: &Vec3) -> Result<bool> {
        Ok(self.blocker(rig, p)?.is_none())
    }
}

/// Index lists of the maximal runs of samples flagged `keep`, for a curve
/// of `n` samples. Runs shorter than two samples are dropped. Closed curves
/// start their first run right after a dropped sample so runs never wrap;
/// a fully kept curve yields one run in original order.
pub fn run_indices(n: usize, closed: bool, keep: &[bool]) -> Vec<Vec<usize>> {
    if keep.iter().all(|&k| k) {
        return if n >= 2 {
            vec![(0..n).collect()]
        } else {
            Vec::new()
        };
    }
    let start = if closed {
        (0..n).find(|&i| !keep[i]).map(|i| (i + 1) % n).unwrap_or(0)
    } else {
        0
    };
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for k in 0..n {
        let i = (start + k) % n;
        if keep[i] {
            cur.push(i);
        } else if !cur.is_empty() {
            runs.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs.retain(|r| r.len() >= 2);
    runs
}

/// Split curves into maximal runs of samples flagged `keep`. Runs shorter
/// than two samples are dropped. A fully kept closed curve stays closed.
pub fn split_runs(curve: &AnchoredPolyline, keep: &[bool]) -> Vec<AnchoredPolyline> {
    if keep.iter().all(|&k| k) {
        return vec![curve.clone()];
    }
    run_indices(curve.len(), curve.closed, keep)
        .into_iter()
        .map(|r| AnchoredPolyline {
            points: r.iter().map(|&i| curve.points[i]).collect(),
            anchors: curve
                .anchors
                .as_ref()
                .map(|a| r.iter().map(|&i| a[i]).collect()),
            closed: false,
            source_id: curve.source_id,
        })
        .collect()
}

/// Remove hidden samples: a sample is hidden when the mesh blocks the ray
/// from the camera to its anchor. Curves split at visibility changes.
pub fn visibility_trim(
    set: &ContourSet,
    mesh: &TriangleMesh,
    rig: &CameraRig,
) -> Result<ContourSet> {
    let occ = Occluder::new(mesh);
    let mut out = ContourSet::default();
    for (curve, &kind) in set.curves.iter().zip(&set.kinds) {
        let anchors = curve
            .anchors
            .as_ref()
            .ok_or_else(|| Error::DegenerateInput("contour curve without anchors".into()))?;
        let keep = exec::map(anchors, |a| occ.visible(rig, a))
            .into_iter()
            .collect::<Result<Vec<bool>>>()?;
        for part in split_runs(curve, &keep) {
            out.push(part, kind);
        }
    }
    Ok(out)
}
