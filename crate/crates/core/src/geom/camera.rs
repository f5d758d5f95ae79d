use nalgebra::{Rotation3, Unit};

use super::{Mat4, Vec2, Vec3, Vec4};
use crate::error::{Error, Result};

/// Image size in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewport {
    pub width: f64,
    pub height: f64,
}

impl Viewport {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "viewport must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    /// Half extents of the image in normalized units. The longer side maps
    /// to [-1, 1].
    pub fn half_extent(&self) -> (f64, f64) {
        let m = self.width.max(self.height);
        (self.width / m, self.height / m)
    }

    pub fn diagonal_px(&self) -> f64 {
        self.width.hypot(self.height)
    }

    /// Image diagonal in normalized units.
    pub fn normalized_diagonal(&self) -> f64 {
        let (wx, wy) = self.half_extent();
        2.0 * wx.hypot(wy)
    }

    /// Pixels per normalized unit.
    pub fn scale(&self) -> f64 {
        0.5 * self.width.max(self.height)
    }
}

/// Projection `P`, modelview `M` and their product `C = P M`.
///
/// `P` maps view space to normalized image space: after the perspective
/// divide, x and y are isotropic with the longer image side spanning
/// [-1, 1], y pointing up.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    pub projection: Mat4,
    pub modelview: Mat4,
    pub combined: Mat4,
    pub viewport: Viewport,
    inverse: Mat4,
}

impl CameraRig {
    pub fn new(projection: Mat4, modelview: Mat4, viewport: Viewport) -> Result<Self> {
        if projection
            .iter()
            .chain(modelview.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::DegenerateInput(
                "camera matrix has non-finite entries".into(),
            ));
        }
        let combined = projection * modelview;
        let inverse = combined
            .try_inverse()
            .ok_or_else(|| Error::DegenerateInput("camera matrix is singular".into()))?;
        Ok(Self {
            projection,
            modelview,
            combined,
            viewport,
            inverse,
        })
    }

    /// Pinhole camera with vertical field of view `fov_y` (radians).
    pub fn perspective(
        fov_y: f64,
        viewport: Viewport,
        near: f64,
        far: f64,
        eye: Vec3,
        target: Vec3,
        up: Vec3,
    ) -> Result<Self> {
        if !(fov_y > 0.0 && fov_y < std::f64::consts::PI) || !(near > 0.0 && far > near) {
            return Err(Error::DegenerateInput(format!(
                "bad perspective parameters: fov {fov_y}, near {near}, far {far}"
            )));
        }
        let f = 1.0 / (0.5 * fov_y).tan();
        let aspect = viewport.width / viewport.height;
        let (wx, wy) = viewport.half_extent();
        let mut p = Mat4::zeros();
        p[(0, 0)] = wx * f / aspect;
        p[(1, 1)] = wy * f;
        p[(2, 2)] = -(far + near) / (far - near);
        p[(2, 3)] = -2.0 * far * near / (far - near);
        p[(3, 2)] = -1.0;
        Self::new(p, look_at(eye, target, up)?, viewport)
    }

    /// Orthographic camera whose vertical half-extent covers `half_height`
    /// view-space units.
    pub fn orthographic(
        half_height: f64,
        viewport: Viewport,
        near: f64,
        far: f64,
        eye: Vec3,
        target: Vec3,
        up: Vec3,
    ) -> Result<Self> {
        if !(half_height > 0.0) || !(far > near) {
            return Err(Error::DegenerateInput(format!(
                "bad orthographic parameters: half height {half_height}, near {near}, far {far}"
            )));
        }
        let aspect = viewport.width / viewport.height;
        let (wx, wy) = viewport.half_extent();
        let mut p = Mat4::zeros();
        p[(0, 0)] = wx / (half_height * aspect);
        p[(1, 1)] = wy / half_height;
        p[(2, 2)] = -2.0 / (far - near);
        p[(2, 3)] = -(far + near) / (far - near);
        p[(3, 3)] = 1.0;
        Self::new(p, look_at(eye, target, up)?, viewport)
    }

    pub fn is_orthographic(&self) -> bool {
        let r = self.combined.row(3);
        r[0] == 0.0 && r[1] == 0.0 && r[2] == 0.0
    }

    /// Homogeneous clip coordinates `C [p; 1]`.
    pub fn clip(&self, p: &Vec3) -> Vec4 {
        self.combined * p.push(1.0)
    }

    /// Analytic projection (identity deviation).
    pub fn project(&self, p: &Vec3) -> Result<Vec2> {
        divide(self.clip(p), p)
    }

    /// Object-space point at normalized image position `xy` and clip depth
    /// `z_ndc` in [-1, 1].
    pub fn unproject(&self, xy: &Vec2, z_ndc: f64) -> Vec3 {
        let h = self.inverse * Vec4::new(xy.x, xy.y, z_ndc, 1.0);
        h.xyz() / h.w
    }

    /// Viewing ray through `p`: origin on the near plane and unit direction
    /// pointing into the scene. Works for both perspective and orthographic
    /// rigs.
    pub fn ray_to(&self, p: &Vec3) -> Result<(Vec3, Vec3)> {
        let xy = self.project(p)?;
        let near = self.unproject(&xy, -1.0);
        let far = self.unproject(&xy, 1.0);
        let d = far - near;
        let len = d.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::DegenerateInput("degenerate viewing ray".into()));
        }
        Ok((near, d / len))
    }

    /// Direction from the camera into the scene at `p`.
    pub fn view_dir(&self, p: &Vec3) -> Result<Vec3> {
        self.ray_to(p).map(|(_, d)| d)
    }

    /// Normalized image position to SVG pixel coordinates (y down).
    pub fn to_pixels(&self, p: &Vec2) -> Vec2 {
        let s = self.viewport.scale();
        Vec2::new(
            0.5 * self.viewport.width + p.x * s,
            0.5 * self.viewport.height - p.y * s,
        )
    }
}

fn divide(h: Vec4, p: &Vec3) -> Result<Vec2> {
    if !(h.w.abs() >= 1e-12) {
        return Err(Error::ProjectionSingularity {
            x: p.x,
            y: p.y,
            z: p.z,
            w: h.w,
        });
    }
    Ok(Vec2::new(h.x / h.w, h.y / h.w))
}

/// Right-handed view matrix looking from `eye` at `target`.
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Mat4> {
    let f = target - eye;
    if f.norm() == 0.0 {
        return Err(Error::DegenerateInput("eye coincides with target".into()));
    }
    let f = f.normalize();
    let s = f.cross(&up);
    if s.norm() < 1e-12 {
        return Err(Error::DegenerateInput(
            "up vector parallel to view direction".into(),
        ));
    }
    let s = s.normalize();
    let u = s.cross(&f);
    #[rustfmt::skip]
    let m = Mat4::new(
        s.x,  s.y,  s.z,  -s.dot(&eye),
        u.x,  u.y,  u.z,  -u.dot(&eye),
        -f.x, -f.y, -f.z, f.dot(&eye),
        0.0,  0.0,  0.0,  1.0,
    );
    Ok(m)
}

/// Project `p` through `dev * C` and divide by w.
pub fn proj(p: &Vec3, rig: &CameraRig, dev: &Mat4) -> Result<Vec2> {
    divide(dev * rig.clip(p), p)
}

/// Rotate the object about `axis` (through the origin) by `angle` radians:
/// the new modelview is `M R`.
pub fn rotate_object(rig: &CameraRig, axis: &Vec3, angle: f64) -> Result<CameraRig> {
    if angle == 0.0 {
        return Ok(rig.clone());
    }
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).to_homogeneous();
    CameraRig::new(rig.projection, rig.modelview * r, rig.viewport)
}
