use std::path::PathBuf;

use serde::Serialize;

use super::io::{loss_csv, write_json, write_text, CameraFile, ContourFile, PipelineConfig};
use super::render::{analytic_contours, deviate, render_deviated, ExtractConfig};
use super::svg::{SvgDocument, SvgPath, ANALYTIC_COLOR, DEVIATED_COLOR, MATCH_COLOR};
use crate::contour::{ContourSet, TriangleMesh};
use crate::deviation::{self, init_field, DeviationField};
use crate::error::{Error, Result};
use crate::geom::{
    all_points, chamfer_l1, resample, rotate_object, AnchoredPolyline, CameraRig, Vec3,
};
use crate::matching::{match_all, MatchSet, StrokeSet};
use crate::training::{
    augment_stages, synthetic_pair, train, AugmentStage, PairSource, TrainConfig, Trainer,
    TrainingPair,
};

/// Last stage to run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stage {
    Init,
    Aug1,
    #[default]
    Aug2,
}

impl Stage {
    fn augmentation(self) -> &'static [AugmentStage] {
        match self {
            Stage::Init => &[],
            Stage::Aug1 => &[AugmentStage::One],
            Stage::Aug2 => &[AugmentStage::One, AugmentStage::Two],
        }
    }
}

/// Input and output locations of one command invocation.
#[derive(Clone, Debug, Default)]
pub struct ProjectManifest {
    pub mesh: Option<PathBuf>,
    pub sketch: Option<PathBuf>,
    pub camera: Option<PathBuf>,
    /// Contours with anchors, as written by `extract`.
    pub contours: Option<PathBuf>,
    pub matches: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub stage: Stage,
}

/// Parsed inputs. Every referenced file is read and validated when the
/// project is loaded, before any command runs.
#[derive(Clone, Debug)]
pub struct Project {
    pub mesh: Option<TriangleMesh>,
    pub sketch: Option<SvgDocument>,
    pub sketch_name: String,
    pub rig: Option<CameraRig>,
    pub contours: Option<ContourSet>,
    pub matches: Option<MatchSet>,
    pub field: Option<DeviationField>,
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub stage: Stage,
}

impl ProjectManifest {
    pub fn load(&self) -> Result<Project> {
        let mut config = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.training.seed = seed;
        }
        let mesh = self
            .mesh
            .as_ref()
            .map(|p| TriangleMesh::load_obj(p).map(TriangleMesh::normalized))
            .transpose()?;
        let sketch = self.sketch.as_ref().map(SvgDocument::load).transpose()?;
        let sketch_name = self
            .sketch
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sketch".into());
        let project = Project {
            mesh,
            sketch,
            sketch_name,
            rig: self.camera.as_ref().map(CameraFile::load).transpose()?,
            contours: self.contours.as_ref().map(ContourFile::load).transpose()?,
            matches: self
                .matches
                .as_ref()
                .map(super::io::load_matches)
                .transpose()?,
            field: self.field.as_ref().map(deviation::load).transpose()?,
            config,
            out: self.out.clone(),
            stage: self.stage,
        };
        if let Some(f) = &project.field {
            if f.architecture != project.config.training.architecture {
                return Err(Error::Checkpoint(format!(
                    "checkpoint architecture {:?} differs from the configured {:?}",
                    f.architecture, project.config.training.architecture
                )));
            }
        }
        std::fs::create_dir_all(&project.out).map_err(|e| Error::io(&project.out, e))?;
        Ok(project)
    }
}

fn need<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Config(format!("this command needs --{flag}")))
}

impl Project {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ex(&self) -> &ExtractConfig {
        &self.config.extract
    }

    /// Contours from the contours file, or extracted from the mesh.
    pub fn contour_set(&self) -> Result<ContourSet> {
        match &self.contours {
            Some(c) => Ok(c.clone()),
            None => analytic_contours(
                need(&self.mesh, "mesh")?,
                need(&self.rig, "camera")?,
                self.ex(),
            ),
        }
    }

    /// Sketch strokes resampled at the contour sampling interval.
    pub fn strokes(&self) -> Result<Vec<AnchoredPolyline>> {
        let rig = need(&self.rig, "camera")?;
        let l = self.ex().interval(rig);
        need(&self.sketch, "sketch")?
            .strokes()
            .iter()
            .map(|s| resample(s, l))
            .collect()
    }

    pub fn training_pair(&self) -> Result<TrainingPair> {
        let rig = need(&self.rig, "camera")?;
        let contours = self.contour_set()?;
        let strokes = self.strokes()?;
        let matches = match &self.matches {
            Some(m) => m.clone(),
            None => match_all(
                &contours.curves,
                &StrokeSet::new(strokes.clone(), self.config.matching.candidate_radius),
                &self.config.matching,
            )?,
        };
        TrainingPair::new(
            contours.curves,
            strokes,
            rig.clone(),
            matches,
            PairSource::Artist {
                name: self.sketch_name.clone(),
            },
        )
    }
}

fn kind_class<'a>(set: &'a ContourSet, prefix: &str) -> impl Fn(usize) -> String + 'a {
    let prefix = prefix.to_string();
    move |k| format!("{prefix}{}", set.kinds[k].as_str())
}

/// Analytic visible contours: `contours.svg` and `anchors.json`.
pub fn cmd_extract(p: &Project) -> Result<ContourSet> {
    let rig = need(&p.rig, "camera")?;
    let set = analytic_contours(need(&p.mesh, "mesh")?, rig, p.ex())?;
    let mut doc = SvgDocument::new(rig.viewport);
    doc.add_curves(&set.curves, kind_class(&set, ""), ANALYTIC_COLOR);
    doc.save(p.path("contours.svg"))?;
    write_json(
        p.path("anchors.json"),
        &ContourFile::from_set(&set, &rig.viewport)?,
    )?;
    log::info!(
        "extracted {} curves, {} samples",
        set.len(),
        set.sample_count()
    );
    Ok(set)
}

/// Contour-to-stroke correspondences: `matches.json` and `overlay.svg`.
pub fn cmd_match(p: &Project) -> Result<MatchSet> {
    let rig = need(&p.rig, "camera")?;
    let contours = p.contour_set()?;
    let strokes = p.strokes()?;
    if strokes.is_empty() {
        return Err(Error::DegenerateInput(
            "the sketch contains no strokes".into(),
        ));
    }
    let set = match_all(
        &contours.curves,
        &StrokeSet::new(strokes.clone(), p.config.matching.candidate_radius),
        &p.config.matching,
    )?;
    write_json(p.path("matches.json"), &set)?;

    let mut doc = SvgDocument::new(rig.viewport);
    doc.add_curves(&contours.curves, kind_class(&contours, ""), ANALYTIC_COLOR);
    doc.add_curves(&strokes, |_| "stroke".into(), DEVIATED_COLOR);
    for e in &set.entries {
        doc.paths.push(SvgPath {
            class: "match".into(),
            stroke: MATCH_COLOR.into(),
            points: vec![
                contours.curves[e.curve].points[e.i],
                strokes[e.stroke].points[e.j],
            ],
            closed: false,
        });
    }
    doc.save(p.path("overlay.svg"))?;
    log::info!(
        "matched {} vertices, {} unmatched",
        set.entries.len(),
        set.unmatched.len()
    );
    Ok(set)
}

fn save_stage(p: &Project, field: &DeviationField, stage: &str) -> Result<()> {
    deviation::save(field, p.path(&format!("field_{stage}.json")))?;
    deviation::save(field, p.path("field.json"))
}

/// Writes the loss log, and on error the last good field, before
/// propagating `res`.
fn finish(p: &Project, trainer: &Trainer, res: Result<()>) -> Result<()> {
    write_text(p.path("loss.csv"), &loss_csv(&trainer.history))?;
    if let Err(e) = res {
        deviation::save(&trainer.field, p.path("field_last_good.json"))?;
        log::error!("training stopped; last good field saved to field_last_good.json");
        return Err(e);
    }
    Ok(())
}

fn run_augmentation(
    p: &Project,
    trainer: &mut Trainer,
    pair: &TrainingPair,
    stages: &[AugmentStage],
) -> Result<()> {
    if stages.is_empty() {
        return Ok(());
    }
    let mesh = need(&p.mesh, "mesh")?;
    for &s in stages {
        augment_stages(trainer, pair, mesh, &p.config.training, p.ex(), &[s])?;
        save_stage(p, &trainer.field, s.name())?;
    }
    Ok(())
}

/// Initial training followed by the augmentation stages up to
/// `--stage`: `field_<stage>.json` per stage, `field.json` and `loss.csv`.
pub fn cmd_train(p: &Project) -> Result<DeviationField> {
    let pair = p.training_pair()?;
    let cfg = &p.config.training;
    if !p.stage.augmentation().is_empty() {
        need(&p.mesh, "mesh")?;
    }
    let start = match &p.field {
        Some(f) => f.clone(),
        None => init_field(&cfg.architecture, cfg.seed),
    };
    let mut trainer = Trainer::new(start);
    let res = trainer
        .run(std::slice::from_ref(&pair), cfg, cfg.iterations, "init")
        .and_then(|_| save_stage(p, &trainer.field, "init"))
        .and_then(|_| run_augmentation(p, &mut trainer, &pair, p.stage.augmentation()));
    finish(p, &trainer, res)?;
    Ok(trainer.field)
}

/// Augmentation stages up to `--stage` on an existing field.
pub fn cmd_augment(p: &Project) -> Result<DeviationField> {
    let pair = p.training_pair()?;
    let stages = p.stage.augmentation();
    if stages.is_empty() {
        return Err(Error::Config("augment needs --stage aug1 or aug2".into()));
    }
    let mut trainer = Trainer::new(need(&p.field, "field")?.clone());
    let res = run_augmentation(p, &mut trainer, &pair, stages);
    finish(p, &trainer, res)?;
    Ok(trainer.field)
}

/// Deviated contours over the analytic ones: `infer.svg`.
pub fn cmd_infer(p: &Project) -> Result<ContourSet> {
    let rig = need(&p.rig, "camera")?;
    let mesh = need(&p.mesh, "mesh")?;
    let field = need(&p.field, "field")?;
    let analytic = analytic_contours(mesh, rig, p.ex())?;
    let dev = render_deviated(field, mesh, rig, p.ex())?;
    let mut doc = SvgDocument::new(rig.viewport);
    doc.add_curves(
        &analytic.curves,
        kind_class(&analytic, "analytic-"),
        ANALYTIC_COLOR,
    );
    doc.add_curves(&dev.curves, kind_class(&dev, "deviated-"), DEVIATED_COLOR);
    doc.save(p.path("infer.svg"))?;
    Ok(dev)
}

/// Result of the cross-view consistency experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub angle_rad: f64,
    pub chamfer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    /// Normalized L1 Chamfer between analytic contours and the sketch.
    pub analytic_vs_sketch: f64,
    /// Normalized L1 Chamfer between deviated contours and the sketch.
    pub output_vs_sketch: f64,
    pub consistency: Option<ConsistencyReport>,
    /// Visibility after deviation uses a depth test along the original
    /// rays and snaps T-junction endpoints; stroke merging and splitting
    /// are not modeled.
    pub regularization: &'static str,
}

/// Chamfer distances of the analytic and the deviated contours to the
/// sketch strokes, normalized by the image diagonal.
pub fn alignment(pair: &TrainingPair, field: &DeviationField) -> Result<(f64, f64)> {
    let diag = pair.rig.viewport.normalized_diagonal();
    let sketch = all_points(&pair.strokes);
    let analytic = all_points(&pair.contours);
    let set = ContourSet {
        kinds: vec![crate::contour::ContourKind::Silhouette; pair.contours.len()],
        curves: pair.contours.clone(),
    };
    let output = all_points(&deviate(&set, field, &pair.rig)?.curves);
    Ok((
        chamfer_l1(&analytic, &sketch, diag)?,
        chamfer_l1(&output, &sketch, diag)?,
    ))
}

/// Render `field` at the object rotated by `angle` about the vertical axis,
/// train a fresh field on that render as a sketch, and compare both fields'
/// renders at the original view.
pub fn view_consistency(
    field: &DeviationField,
    mesh: &TriangleMesh,
    rig: &CameraRig,
    ex: &ExtractConfig,
    cfg: &TrainConfig,
    angle: f64,
) -> Result<f64> {
    let rotated = rotate_object(rig, &Vec3::y(), angle)?;
    let pair = synthetic_pair(field, mesh, &rotated, ex, angle.to_degrees())?;
    let (second, _) = train(
        std::slice::from_ref(&pair),
        cfg,
        init_field(&cfg.architecture, cfg.seed),
        cfg.iterations,
        "consistency",
    )?;
    let a = render_deviated(field, mesh, rig, ex)?;
    let b = render_deviated(&second, mesh, rig, ex)?;
    chamfer_l1(
        &all_points(&a.curves),
        &all_points(&b.curves),
        rig.viewport.normalized_diagonal(),
    )
}

/// Alignment metrics, plus the consistency experiment when `angle` is
/// given: `metrics.json`.
pub fn cmd_eval(p: &Project, angle: Option<f64>) -> Result<Metrics> {
    let field = need(&p.field, "field")?;
    let pair = p.training_pair()?;
    let (analytic_vs_sketch, output_vs_sketch) = alignment(&pair, field)?;
    let consistency = match angle {
        Some(a) => {
            let mesh = p
                .mesh
                .as_ref()
                .ok_or_else(|| Error::Config("the consistency experiment needs --mesh".into()))?;
            let chamfer = view_consistency(field, mesh, &pair.rig, p.ex(), &p.config.training, a)?;
            Some(ConsistencyReport {
                angle_rad: a,
                chamfer,
            })
        }
        None => None,
    };
    let m = Metrics {
        analytic_vs_sketch,
        output_vs_sketch,
        consistency,
        regularization: "simplified-visibility",
    };
    write_json(p.path("metrics.json"), &m)?;
    Ok(m)
}
