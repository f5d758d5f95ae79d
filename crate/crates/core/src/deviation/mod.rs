//! The deviation field: a small network giving a 4x4 matrix per normalized
//! 3D point, applied between the camera matrix and the perspective divide.

pub mod checkpoint;
mod mlp;
mod tape;

pub use checkpoint::{load, save};
pub use mlp::{
    constant_field, entries_to_matrix, init_field, matrix_to_entries, Activation, Architecture,
    Batch, DeviationField, FieldGrad, Layer, Provenance, IDENTITY_ENTRIES, OUTPUTS,
};
pub use tape::{Adjoints, Tape, Var};

use crate::error::{Error, Result};
use crate::geom::{proj, CameraRig, Vec2, Vec3, Vec4};

/// Deviated projection of `p`: camera, then the field's matrix at `p`, then
/// the perspective divide.
pub fn apply(field: &DeviationField, rig: &CameraRig, p: &Vec3) -> Result<Vec2> {
    proj(p, rig, &field.eval(p)?)
}

/// Deviated projections of many points, evaluated in one batch.
pub fn apply_many(field: &DeviationField, rig: &CameraRig, points: &[Vec3]) -> Result<Vec<Vec2>> {
    let mats = field.eval_many(points)?;
    points
        .iter()
        .zip(&mats)
        .map(|(p, m)| proj(p, rig, m))
        .collect()
}

/// Homogeneous product `D h` with D given by its 15 free entries, returned
/// as (x, y, z, w).
pub fn deviate_vars<'t>(tape: &'t Tape, d: &[Var<'t>], h: &Vec4) -> [Var<'t>; 4] {
    let row = |r: usize, c: f64| {
        let terms: Vec<(Var<'t>, f64)> = (0..4)
            .filter(|&k| 4 * r + k < OUTPUTS)
            .map(|k| (d[4 * r + k], h[k]))
            .collect();
        tape.linear(&terms, c)
    };
    [row(0, 0.0), row(1, 0.0), row(2, 0.0), row(3, h[3])]
}

/// Differentiable counterpart of [`apply`]: `h` is the clip-space point
/// `C [p; 1]` and `p` is used only for error reporting.
pub fn project_vars<'t>(tape: &'t Tape, d: &[Var<'t>], h: &Vec4, p: &Vec3) -> Result<[Var<'t>; 2]> {
    let [x, y, _, w] = deviate_vars(tape, d, h);
    if !(w.value().abs() >= 1e-12) {
        return Err(Error::ProjectionSingularity {
            x: p.x,
            y: p.y,
            z: p.z,
            w: w.value(),
        });
    }
    Ok([x / w, y / w])
}
