//! 2D/3D geometry: anchored polylines, cameras with deviated projection,
//! rotations and Chamfer evaluation.

mod camera;
mod chamfer;
mod polyline;

pub use camera::{proj, rotate_object, CameraRig, Viewport};
pub use chamfer::{chamfer_l1, nearest_l1, PointGrid};
pub use polyline::{angle_at, resample, tangent_at, AnchoredPolyline, SamplePos};

pub(crate) use polyline::arc_length_params;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec4 = nalgebra::Vector4<f64>;
pub type Mat4 = nalgebra::Matrix4<f64>;

/// Default sampling interval as a fraction of the normalized image diagonal.
pub const DEFAULT_INTERVAL_FRACTION: f64 = 0.005;

/// Mean discrete acceleration `|p[i+1] - 2 p[i] + p[i-1]|` over all interior
/// samples of the given curves. Used as a wobble statistic.
pub fn mean_acceleration(curves: &[AnchoredPolyline]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in curves {
        let p = &c.points;
        let n = p.len();
        if n < 3 {
            continue;
        }
        for i in 1..n - 1 {
            sum += (p[i + 1] - 2.0 * p[i] + p[i - 1]).norm();
            count += 1;
        }
        if c.closed {
            sum += (p[1] - 2.0 * p[0] + p[n - 1]).norm();
            sum += (p[0] - 2.0 * p[n - 1] + p[n - 2]).norm();
            count += 2;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// All sample positions of a set of curves, flattened in order.
pub fn all_points(curves: &[AnchoredPolyline]) -> Vec<Vec2> {
    curves
        .iter()
        .flat_map(|c| c.points.iter().copied())
        .collect()
}
