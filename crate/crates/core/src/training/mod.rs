//! Loss terms, optimization, and self-augmentation for the deviation field.

mod augment;
mod objective;
mod optim;

use serde::{Deserialize, Serialize};

pub use augment::{augment_stages, self_augment, synthetic_pair, AugmentStage};
pub use objective::{smoothness_pairs, Evaluation, Objective, SmoothnessSampleSet};
pub use optim::{train, Adam, LossRecord, Trainer};

use crate::deviation::{Architecture, DeviationField};
use crate::error::{Error, Result};
use crate::geom::{AnchoredPolyline, CameraRig};
use crate::matching::MatchSet;

/// Weights of the five loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub data: f64,
    pub shape: f64,
    pub slope: f64,
    pub smooth: f64,
    pub depth: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            data: 0.001,
            shape: 10.0,
            slope: 1.0,
            smooth: 1.0,
            depth: 1e-5,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        data: 0.0,
        shape: 0.0,
        slope: 0.0,
        smooth: 0.0,
        depth: 0.0,
    };

    /// Unit weight on one term, zero on the others.
    pub fn only(term: Term) -> Self {
        let mut w = Self::ZERO;
        *w.get_mut(term) = 1.0;
        w
    }

    pub fn get(&self, term: Term) -> f64 {
        match term {
            Term::Data => self.data,
            Term::Shape => self.shape,
            Term::Slope => self.slope,
            Term::Smooth => self.smooth,
            Term::Depth => self.depth,
        }
    }

    fn get_mut(&mut self, term: Term) -> &mut f64 {
        match term {
            Term::Data => &mut self.data,
            Term::Shape => &mut self.shape,
            Term::Slope => &mut self.slope,
            Term::Smooth => &mut self.smooth,
            Term::Depth => &mut self.depth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Data,
    Shape,
    Slope,
    Smooth,
    Depth,
}

impl Term {
    pub const ALL: [Term; 5] = [
        Term::Data,
        Term::Shape,
        Term::Slope,
        Term::Smooth,
        Term::Depth,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub weights: LossWeights,
    /// Kernel width of the smoothness term, in normalized object units.
    pub sigma1: f64,
    /// Smoothness pairs farther apart than `smooth_cutoff * sigma1` are
    /// ignored.
    pub smooth_cutoff: f64,
    pub eps_data: f64,
    pub eps_shape: f64,
    /// Grid vertices per axis in the smoothness sample set.
    pub grid_resolution: usize,
    /// Smoothness pairs evaluated per iteration and pair.
    pub smooth_pairs: usize,
    /// Depth-consistency anchor pairs evaluated per iteration and pair.
    pub depth_pairs: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub augment_iterations: usize,
    pub stage1_degrees: Vec<f64>,
    pub stage2_degrees: Vec<f64>,
    /// Restart from a fresh field before each augmentation stage instead of
    /// fine-tuning.
    pub augment_from_scratch: bool,
    pub seed: u64,
    pub architecture: Architecture,
}

fn degrees(max: i32) -> Vec<f64> {
    (-max..=max).filter(|&d| d != 0).map(f64::from).collect()
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            sigma1: 0.02,
            smooth_cutoff: 5.0,
            eps_data: 1e-6,
            eps_shape: 1e-6,
            grid_resolution: 9,
            smooth_pairs: 4096,
            depth_pairs: 4096,
            learning_rate: 1e-3,
            iterations: 2000,
            augment_iterations: 1000,
            stage1_degrees: degrees(5),
            stage2_degrees: degrees(10),
            augment_from_scratch: false,
            seed: 0,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.sigma1,
            self.smooth_cutoff,
            self.eps_data,
            self.eps_shape,
            self.learning_rate,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Config(
                "widths, epsilons and step size must be positive".into(),
            ));
        }
        if self.grid_resolution < 2 || self.smooth_pairs == 0 || self.depth_pairs == 0 {
            return Err(Error::Config(
                "grid resolution must be >= 2 and pair counts positive".into(),
            ));
        }
        let w = &self.weights;
        if ![w.data, w.shape, w.slope, w.smooth, w.depth]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
        {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        self.architecture.validate()
    }
}

/// Origin of a training pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PairSource {
    Artist { name: String },
    Synthetic { angle_deg: f64 },
}

/// Contours with anchors, the strokes they are matched to, and the camera
/// under which the contours were projected.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub contours: Vec<AnchoredPolyline>,
    pub strokes: Vec<AnchoredPolyline>,
    pub rig: CameraRig,
    pub matches: MatchSet,
    pub source: PairSource,
}

impl TrainingPair {
    pub fn new(
        contours: Vec<AnchoredPolyline>,
        strokes: Vec<AnchoredPolyline>,
        rig: CameraRig,
        matches: MatchSet,
        source: PairSource,
    ) -> Result<Self> {
        if contours.iter().any(|c| c.anchors.is_none()) {
            return Err(Error::DegenerateInput(
                "every contour vertex needs a 3D anchor".into(),
            ));
        }
        for e in &matches.entries {
            let ok = contours.get(e.curve).is_some_and(|c| e.i < c.len())
                && strokes.get(e.stroke).is_some_and(|s| e.j < s.len());
            if !ok {
                return Err(Error::DegenerateInput(format!(
                    "match ({}, {}) -> ({}, {}) is out of range",
                    e.curve, e.i, e.stroke, e.j
                )));
            }
            if !(e.alpha > 0.0 && e.alpha <= 1.0) {
                return Err(Error::DegenerateInput(format!(
                    "confidence {} outside (0, 1]",
                    e.alpha
                )));
            }
        }
        Ok(Self {
            contours,
            strokes,
            rig,
            matches,
            source,
        })
    }

    pub fn name(&self) -> String {
        match &self.source {
            PairSource::Artist { name } => name.clone(),
            PairSource::Synthetic { angle_deg } => format!("synthetic@{angle_deg}"),
        }
    }
}

/// Unweighted loss terms plus the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub data: f64,
    pub shape: f64,
    pub slope: f64,
    pub smooth: f64,
    pub depth: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn get(&self, term: Term) -> f64 {
        match term {
            Term::Data => self.data,
            Term::Shape => self.shape,
            Term::Slope => self.slope,
            Term::Smooth => self.smooth,
            Term::Depth => self.depth,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.data,
            self.shape,
            self.slope,
            self.smooth,
            self.depth,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    fn accumulate(&mut self, o: &LossBreakdown) {
        self.data += o.data;
        self.shape += o.shape;
        self.slope += o.slope;
        self.smooth += o.smooth;
        self.depth += o.depth;
        self.total += o.total;
    }
}

impl std::fmt::Display for LossBreakdown {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "data={:e} shape={:e} slope={:e} smooth={:e} depth={:e} total={:e}",
            self.data, self.shape, self.slope, self.smooth, self.depth, self.total
        )
    }
}

fn single_term(
    pair: &TrainingPair,
    field: &DeviationField,
    cfg: &TrainConfig,
    term: Term,
) -> Result<f64> {
    let obj = Objective::new(std::slice::from_ref(pair), cfg)?;
    Ok(obj
        .evaluate(field, 0, &LossWeights::only(term), false)?
        .loss
        .get(term))
}

pub fn loss_data(pair: &TrainingPair, field: &DeviationField, cfg: &TrainConfig) -> Result<f64> {
    single_term(pair, field, cfg, Term::Data)
}

pub fn loss_shape(pair: &TrainingPair, field: &DeviationField, cfg: &TrainConfig) -> Result<f64> {
    single_term(pair, field, cfg, Term::Shape)
}

pub fn loss_slope(pair: &TrainingPair, field: &DeviationField, cfg: &TrainConfig) -> Result<f64> {
    single_term(pair, field, cfg, Term::Slope)
}

pub fn loss_smooth(pair: &TrainingPair, field: &DeviationField, cfg: &TrainConfig) -> Result<f64> {
    single_term(pair, field, cfg, Term::Smooth)
}

pub fn loss_depth(pair: &TrainingPair, field: &DeviationField, cfg: &TrainConfig) -> Result<f64> {
    single_term(pair, field, cfg, Term::Depth)
}

/// All terms and their weighted sum for one pair.
pub fn total_loss(
    pair: &TrainingPair,
    field: &DeviationField,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let obj = Objective::new(std::slice::from_ref(pair), cfg)?;
    Ok(obj.evaluate(field, 0, &cfg.weights, false)?.loss)
}
