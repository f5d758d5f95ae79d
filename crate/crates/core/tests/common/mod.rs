#![allow(dead_code)]

use nlpersp::contour::{ContourSet, TriangleMesh};
use nlpersp::deviation::{init_field, Architecture, DeviationField};
use nlpersp::geom::{AnchoredPolyline, CameraRig, Mat4, Vec2, Vec3, Viewport};
use nlpersp::matching::{MatchEntry, MatchSet};
use nlpersp::pipeline::{analytic_contours, ExtractConfig};
use nlpersp::training::{PairSource, TrainConfig, TrainingPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn perspective(eye: Vec3) -> CameraRig {
    CameraRig::perspective(
        0.6,
        Viewport::new(400.0, 400.0).unwrap(),
        0.1,
        50.0,
        eye,
        Vec3::zeros(),
        Vec3::y(),
    )
    .unwrap()
}

/// Orthographic view down -z whose image coordinates equal object x, y.
pub fn ortho_front() -> CameraRig {
    CameraRig::orthographic(
        1.0,
        Viewport::new(400.0, 400.0).unwrap(),
        0.1,
        20.0,
        Vec3::new(0.0, 0.0, 5.0),
        Vec3::zeros(),
        Vec3::y(),
    )
    .unwrap()
}

pub fn three_quarter() -> CameraRig {
    perspective(Vec3::new(2.2, 1.6, 3.4))
}

/// Visible analytic contours sampled at `fraction` of the image diagonal.
pub fn contours(mesh: &TriangleMesh, rig: &CameraRig, fraction: f64) -> ContourSet {
    let ex = ExtractConfig {
        interval_fraction: fraction,
        ..Default::default()
    };
    analytic_contours(mesh, rig, &ex).unwrap()
}

/// Pair whose strokes are the contours moved by `f`, matched sample to
/// sample with confidence `alpha(curve, i)`.
pub fn pair_from(
    set: &ContourSet,
    rig: &CameraRig,
    f: impl Fn(usize, usize, Vec2) -> Vec2,
    alpha: impl Fn(usize, usize) -> f64,
) -> TrainingPair {
    let strokes: Vec<AnchoredPolyline> = set
        .curves
        .iter()
        .enumerate()
        .map(|(c, curve)| {
            let pts = curve
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| f(c, i, *p))
                .collect();
            AnchoredPolyline::stroke(pts, curve.closed, c).unwrap()
        })
        .collect();
    let mut matches = MatchSet::identity(&set.curves);
    for e in &mut matches.entries {
        e.alpha = alpha(e.curve, e.i);
    }
    TrainingPair::new(
        set.curves.clone(),
        strokes,
        rig.clone(),
        matches,
        PairSource::Artist {
            name: "test".into(),
        },
    )
    .unwrap()
}

pub fn perfect_pair(set: &ContourSet, rig: &CameraRig) -> TrainingPair {
    pair_from(set, rig, |_, _, p| p, |_, _| 1.0)
}

/// Strokes jittered by uniform noise of amplitude `amp`, random confidences
/// in [0.2, 1].
pub fn jittered_pair(set: &ContourSet, rig: &CameraRig, amp: f64, seed: u64) -> TrainingPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = set.sample_count();
    let noise: Vec<Vec2> = (0..n)
        .map(|_| Vec2::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
        .collect();
    let alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let starts: Vec<usize> = set
        .curves
        .iter()
        .scan(0, |acc, c| {
            let s = *acc;
            *acc += c.len();
            Some(s)
        })
        .collect();
    pair_from(
        set,
        rig,
        |c, i, p| p + noise[starts[c] + i],
        |c, i| alphas[starts[c] + i],
    )
}

pub fn tiny_arch() -> Architecture {
    Architecture {
        hidden: vec![4],
        ..Default::default()
    }
}

/// Initial field with every parameter moved by up to `scale`.
pub fn perturbed(arch: &Architecture, seed: u64, scale: f64) -> DeviationField {
    let mut f = init_field(arch, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for k in 0..f.param_count() {
        f.set_param(k, f.param(k) + rng.gen_range(-scale..scale));
    }
    f
}

/// Config with a coarse grid and small samples, for fast objective checks.
pub fn small_config() -> TrainConfig {
    TrainConfig {
        grid_resolution: 3,
        smooth_pairs: 256,
        depth_pairs: 256,
        architecture: tiny_arch(),
        ..Default::default()
    }
}

pub fn max_abs_diff_from_identity(field: &DeviationField, points: &[Vec3]) -> f64 {
    points
        .iter()
        .map(|p| (field.eval(p).unwrap() - Mat4::identity()).amax())
        .fold(0.0, f64::max)
}

pub fn match_entry(curve: usize, i: usize, stroke: usize, j: usize, alpha: f64) -> MatchEntry {
    MatchEntry {
        curve,
        i,
        stroke,
        j,
        sv: 1.0,
        alpha,
    }
}

/// Clip-space matrix that applies the 2D similarity `x -> scale R(angle) x + t`
/// to projected outputs.
pub fn similarity(scale: f64, angle: f64, t: Vec2) -> Mat4 {
    let (s, c) = angle.sin_cos();
    let mut m = Mat4::identity();
    m[(0, 0)] = scale * c;
    m[(0, 1)] = -scale * s;
    m[(1, 0)] = scale * s;
    m[(1, 1)] = scale * c;
    m[(0, 3)] = t.x;
    m[(1, 3)] = t.y;
    m
}
