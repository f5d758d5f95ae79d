use super::{LossRecord, PairSource, TrainConfig, Trainer, TrainingPair};
use crate::contour::{run_indices, TriangleMesh};
use crate::deviation::{init_field, DeviationField};
use crate::error::Result;
use crate::geom::{rotate_object, CameraRig, Vec3};
use crate::matching::MatchSet;
use crate::pipeline::render::{
    analytic_projection, deviate, regularize_masks, subcurve, ExtractConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmentStage {
    One,
    Two,
}

impl AugmentStage {
    pub fn name(self) -> &'static str {
        match self {
            AugmentStage::One => "aug1",
            AugmentStage::Two => "aug2",
        }
    }

    fn degrees(self, cfg: &TrainConfig) -> &[f64] {
        match self {
            AugmentStage::One => &cfg.stage1_degrees,
            AugmentStage::Two => &cfg.stage2_degrees,
        }
    }
}

/// A training pair whose "contours" are the analytic contours of `mesh`
/// under `rig` and whose "strokes" are the same samples rendered through
/// `field` and regularized. Only samples visible after regularization are
/// kept, so contour and stroke runs correspond sample by sample.
pub fn synthetic_pair(
    field: &DeviationField,
    mesh: &TriangleMesh,
    rig: &CameraRig,
    ex: &ExtractConfig,
    angle_deg: f64,
) -> Result<TrainingPair> {
    let set = analytic_projection(mesh, rig, ex)?;
    let dev = deviate(&set, field, rig)?;
    let (keep, reg_points) = if ex.include_hidden {
        (
            set.curves.iter().map(|c| vec![true; c.len()]).collect(),
            dev,
        )
    } else {
        let r = regularize_masks(&dev, mesh, rig, field, ex.interval(rig))?;
        (r.keep, r.deviated)
    };
    let mut contours = Vec::new();
    let mut strokes = Vec::new();
    for (ci, curve) in set.curves.iter().enumerate() {
        for run in run_indices(curve.len(), curve.closed, &keep[ci]) {
            contours.push(subcurve(curve, &run));
            strokes.push(subcurve(&reg_points.curves[ci], &run));
        }
    }
    if contours.is_empty() {
        return Err(crate::Error::EmptyContours(format!(
            "no visible contours at {angle_deg} degrees"
        )));
    }
    let matches = MatchSet::identity(&contours);
    TrainingPair::new(
        contours,
        strokes,
        rig.clone(),
        matches,
        PairSource::Synthetic { angle_deg },
    )
}

/// Fine-tune `field` on `base` plus synthetic pairs rendered at rotations of
/// the object about its vertical axis, one stage after another. Each stage
/// synthesizes its pairs with the field as it was when the stage began.
/// Angles whose contours cannot be produced are skipped.
pub fn self_augment(
    field: DeviationField,
    base: &TrainingPair,
    mesh: &TriangleMesh,
    cfg: &TrainConfig,
    ex: &ExtractConfig,
    stages: &[AugmentStage],
) -> Result<(DeviationField, Vec<LossRecord>)> {
    let mut trainer = Trainer::new(field);
    augment_stages(&mut trainer, base, mesh, cfg, ex, stages)?;
    Ok((trainer.field, trainer.history))
}

/// [`self_augment`] on an existing trainer. On error the trainer holds the
/// last field with a finite loss.
pub fn augment_stages(
    trainer: &mut Trainer,
    base: &TrainingPair,
    mesh: &TriangleMesh,
    cfg: &TrainConfig,
    ex: &ExtractConfig,
    stages: &[AugmentStage],
) -> Result<()> {
    for &stage in stages {
        let current = trainer.field.clone();
        let mut pairs = vec![base.clone()];
        for &deg in stage.degrees(cfg) {
            let pair = rotate_object(&base.rig, &Vec3::y(), deg.to_radians())
                .and_then(|rig| synthetic_pair(&current, mesh, &rig, ex, deg));
            match pair {
                Ok(p) => pairs.push(p),
                Err(e) => log::warn!("skipping augmentation angle {deg}: {e}"),
            }
        }
        log::info!("{}: {} synthetic pairs", stage.name(), pairs.len() - 1);
        if cfg.augment_from_scratch {
            let provenance = trainer.field.provenance.clone();
            trainer.field = init_field(&cfg.architecture, cfg.seed);
            trainer.field.provenance = provenance;
        }
        trainer.run(&pairs, cfg, cfg.augment_iterations, stage.name())?;
    }
    Ok(())
}
