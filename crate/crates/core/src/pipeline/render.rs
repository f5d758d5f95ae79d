//! Analytic and deviated contour rendering, including the visibility
//! regularization applied after deviation.

use serde::{Deserialize, Serialize};

use crate::contour::{
    extract_contours, project_contours, run_indices, visibility_trim, ContourSet, Occluder,
    TriangleMesh,
};
use crate::deviation::{apply_many, DeviationField};
use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{AnchoredPolyline, CameraRig, Vec2, Vec3, DEFAULT_INTERVAL_FRACTION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Dihedral angle above which an edge counts as sharp, in degrees.
    pub sharp_angle_deg: f64,
    /// Sampling interval as a fraction of the normalized image diagonal.
    pub interval_fraction: f64,
    /// Keep occluded contour samples.
    pub include_hidden: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            sharp_angle_deg: 60.0,
            interval_fraction: DEFAULT_INTERVAL_FRACTION,
            include_hidden: false,
        }
    }
}

impl ExtractConfig {
    pub fn interval(&self, rig: &CameraRig) -> f64 {
        self.interval_fraction * rig.viewport.normalized_diagonal()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sharp_angle_deg > 0.0 && self.sharp_angle_deg < 180.0)
            || !(self.interval_fraction > 0.0)
        {
            return Err(Error::Config(format!(
                "invalid extraction settings {self:?}"
            )));
        }
        Ok(())
    }
}

/// Contours of `mesh` seen from `rig`, resampled in image space, with
/// hidden samples still present.
pub fn analytic_projection(
    mesh: &TriangleMesh,
    rig: &CameraRig,
    ex: &ExtractConfig,
) -> Result<ContourSet> {
    ex.validate()?;
    let raw = extract_contours(mesh, rig, ex.sharp_angle_deg.to_radians())?;
    let set = project_contours(&raw, rig, ex.interval(rig))?;
    if set.is_empty() {
        return Err(Error::EmptyContours(
            "all contours collapse in this view".into(),
        ));
    }
    Ok(set)
}

/// Analytic contours, trimmed to visible samples unless configured
/// otherwise.
pub fn analytic_contours(
    mesh: &TriangleMesh,
    rig: &CameraRig,
    ex: &ExtractConfig,
) -> Result<ContourSet> {
    let set = analytic_projection(mesh, rig, ex)?;
    if ex.include_hidden {
        return Ok(set);
    }
    let vis = visibility_trim(&set, mesh, rig)?;
    if vis.is_empty() {
        return Err(Error::EmptyContours("no visible contour samples".into()));
    }
    Ok(vis)
}

/// Replace each sample by the deviated projection of its anchor.
pub fn deviate(set: &ContourSet, field: &DeviationField, rig: &CameraRig) -> Result<ContourSet> {
    let mut out = ContourSet::default();
    for (curve, &kind) in set.curves.iter().zip(&set.kinds) {
        let anchors = curve
            .anchors
            .as_ref()
            .ok_or_else(|| Error::DegenerateInput("contour curve without anchors".into()))?;
        let mut c = curve.clone();
        c.points = apply_many(field, rig, anchors)?;
        out.push(c, kind);
    }
    Ok(out)
}

/// Per-sample visibility in deviated space and deviated positions after
/// endpoint snapping, for every input curve.
pub struct Regularized {
    pub keep: Vec<Vec<bool>>,
    pub deviated: ContourSet,
}

/// Visibility in deviated space: a sample is hidden when the first surface
/// point in front of it on its original viewing ray is still in front of it
/// after deviation (deviated depth is the clip-space z before the divide).
/// Run endpoints next to a sample whose visibility the deviation changed
/// are snapped onto the nearest other visible curve when it lies within
/// `2 l`.
pub fn regularize_masks(
    deviated: &ContourSet,
    mesh: &TriangleMesh,
    rig: &CameraRig,
    field: &DeviationField,
    l: f64,
) -> Result<Regularized> {
    let occ = Occluder::new(mesh);
    let mut flat: Vec<Vec3> = Vec::new();
    for c in &deviated.curves {
        flat.extend(
            c.anchors
                .as_ref()
                .ok_or_else(|| Error::DegenerateInput("contour curve without anchors".into()))?,
        );
    }
    let blockers = exec::map(&flat, |a| occ.blocker(rig, a))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut eval_pts = flat.clone();
    let mut blocker_slot = vec![usize::MAX; flat.len()];
    for (k, b) in blockers.iter().enumerate() {
        if let Some(h) = b {
            blocker_slot[k] = eval_pts.len();
            eval_pts.push(*h);
        }
    }
    let mats = field.eval_many(&eval_pts)?;
    let depth = |m: usize, p: &Vec3| (mats[m] * rig.clip(p)).z;
    let mut vis = Vec::with_capacity(flat.len());
    let mut flipped = Vec::with_capacity(flat.len());
    for (k, a) in flat.iter().enumerate() {
        match blockers[k] {
            None => {
                vis.push(true);
                flipped.push(false);
            }
            Some(h) => {
                let v = !(depth(blocker_slot[k], &h) < depth(k, a));
                vis.push(v);
                flipped.push(v);
            }
        }
    }

    let mut keep = Vec::with_capacity(deviated.len());
    let mut flips = Vec::with_capacity(deviated.len());
    let mut at = 0;
    for c in &deviated.curves {
        keep.push(vis[at..at + c.len()].to_vec());
        flips.push(flipped[at..at + c.len()].to_vec());
        at += c.len();
    }

    // runs as (curve, indices) and the segments they contribute
    let runs: Vec<(usize, Vec<usize>)> = deviated
        .curves
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            run_indices(c.len(), c.closed, &keep[ci])
                .into_iter()
                .map(move |r| (ci, r))
        })
        .collect();
    let mut segs: Vec<(usize, Vec2, Vec2)> = Vec::new();
    for (ri, (ci, r)) in runs.iter().enumerate() {
        let pts = &deviated.curves[*ci].points;
        for w in r.windows(2) {
            segs.push((ri, pts[w[0]], pts[w[1]]));
        }
    }

    let mut out = deviated.clone();
    for (ri, (ci, r)) in runs.iter().enumerate() {
        let c = &deviated.curves[*ci];
        let n = c.len();
        if r.len() == n {
            continue;
        }
        let ends = [
            (r[0], c.neighbors(r[0]).0),
            (r[r.len() - 1], c.neighbors(r[r.len() - 1]).1),
        ];
        for (e, beyond) in ends {
            let Some(b) = beyond else { continue };
            if keep[*ci][b] || !(flips[*ci][e] || flips[*ci][b]) {
                continue;
            }
            let p = c.points[e];
            let best = segs
                .iter()
                .filter(|s| s.0 != ri)
                .map(|s| closest_on_segment(&p, &s.1, &s.2))
                .min_by(|a, b| (a - p).norm().total_cmp(&(b - p).norm()));
            if let Some(q) = best {
                if (q - p).norm() <= 2.0 * l {
                    out.curves[*ci].points[e] = q;
                }
            }
        }
    }
    Ok(Regularized {
        keep,
        deviated: out,
    })
}

fn closest_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> Vec2 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    if l2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / l2).clamp(0.0, 1.0);
    a + ab * t
}

/// Sub-curve of `curve` at indices `run`; a run covering the whole curve
/// keeps its closedness.
pub fn subcurve(curve: &AnchoredPolyline, run: &[usize]) -> AnchoredPolyline {
    AnchoredPolyline {
        points: run.iter().map(|&i| curve.points[i]).collect(),
        anchors: curve
            .anchors
            .as_ref()
            .map(|a| run.iter().map(|&i| a[i]).collect()),
        closed: curve.closed && run.len() == curve.len(),
        source_id: curve.source_id,
    }
}

/// Deviated curves split into their visible runs.
pub fn regularize_topology(
    deviated: &ContourSet,
    mesh: &TriangleMesh,
    rig: &CameraRig,
    field: &DeviationField,
    l: f64,
) -> Result<ContourSet> {
    let reg = regularize_masks(deviated, mesh, rig, field, l)?;
    let mut out = ContourSet::default();
    for (ci, (curve, &kind)) in reg
        .deviated
        .curves
        .iter()
        .zip(&reg.deviated.kinds)
        .enumerate()
    {
        for run in run_indices(curve.len(), curve.closed, &reg.keep[ci]) {
            out.push(subcurve(curve, &run), kind);
        }
    }
    Ok(out)
}

/// Contours of `mesh` from `rig` rendered through `field`.
pub fn render_deviated(
    field: &DeviationField,
    mesh: &TriangleMesh,
    rig: &CameraRig,
    ex: &ExtractConfig,
) -> Result<ContourSet> {
    let set = analytic_projection(mesh, rig, ex)?;
    let dev = deviate(&set, field, rig)?;
    if ex.include_hidden {
        return Ok(dev);
    }
    regularize_topology(&dev, mesh, rig, field, ex.interval(rig))
}
