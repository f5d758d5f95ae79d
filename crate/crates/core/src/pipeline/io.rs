//! JSON, TOML and CSV files read and written by the commands.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::render::ExtractConfig;
use crate::contour::{ContourKind, ContourSet};
use crate::error::{Error, Result};
use crate::geom::{AnchoredPolyline, CameraRig, Mat4, Vec2, Vec3, Viewport};
use crate::matching::{MatchParams, MatchSet};
use crate::training::{LossRecord, TrainConfig};

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = read_text(path.as_ref())?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Camera file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CameraFile {
    /// Look-at camera. With `orthographic`, `half_height` replaces the field
    /// of view.
    Pinhole {
        width: f64,
        height: f64,
        #[serde(default)]
        fov_y_deg: Option<f64>,
        #[serde(default)]
        orthographic: bool,
        #[serde(default)]
        half_height: Option<f64>,
        near: f64,
        far: f64,
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    },
    /// Explicit row-major projection and modelview matrices.
    Matrices {
        width: f64,
        height: f64,
        projection: [f64; 16],
        modelview: [f64; 16],
    },
}

impl CameraFile {
    pub fn rig(&self) -> Result<CameraRig> {
        match self {
            CameraFile::Pinhole {
                width,
                height,
                fov_y_deg,
                orthographic,
                half_height,
                near,
                far,
                eye,
                target,
                up,
            } => {
                let vp = Viewport::new(*width, *height)?;
                let v = |a: &[f64; 3]| Vec3::new(a[0], a[1], a[2]);
                if *orthographic {
                    let h = half_height.ok_or_else(|| {
                        Error::Parse("orthographic camera needs half_height".into())
                    })?;
                    CameraRig::orthographic(h, vp, *near, *far, v(eye), v(target), v(up))
                } else {
                    let fov = fov_y_deg
                        .ok_or_else(|| Error::Parse("perspective camera needs fov_y_deg".into()))?;
                    CameraRig::perspective(
                        fov.to_radians(),
                        vp,
                        *near,
                        *far,
                        v(eye),
                        v(target),
                        v(up),
                    )
                }
            }
            CameraFile::Matrices {
                width,
                height,
                projection,
                modelview,
            } => CameraRig::new(
                Mat4::from_row_slice(projection),
                Mat4::from_row_slice(modelview),
                Viewport::new(*width, *height)?,
            ),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CameraRig> {
        read_json::<CameraFile>(path)?.rig()
    }
}

/// One contour curve with its anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourRecord {
    pub kind: ContourKind,
    pub closed: bool,
    pub source_id: usize,
    pub points: Vec<[f64; 2]>,
    pub anchors: Vec<[f64; 3]>,
}

/// The anchors file: contour samples in image units with their 3D points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourFile {
    pub format: String,
    pub version: u32,
    pub width: f64,
    pub height: f64,
    pub curves: Vec<ContourRecord>,
}

const CONTOUR_FORMAT: &str = "nlpersp-contours";

impl ContourFile {
    pub fn from_set(set: &ContourSet, viewport: &Viewport) -> Result<Self> {
        let curves = set
            .curves
            .iter()
            .zip(&set.kinds)
            .map(|(c, k)| {
                let anchors = c.anchors.as_ref().ok_or_else(|| {
                    Error::DegenerateInput("contour curve without anchors".into())
                })?;
                Ok(ContourRecord {
                    kind: *k,
                    closed: c.closed,
                    source_id: c.source_id,
                    points: c.points.iter().map(|p| [p.x, p.y]).collect(),
                    anchors: anchors.iter().map(|a| [a.x, a.y, a.z]).collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            format: CONTOUR_FORMAT.into(),
            version: 1,
            width: viewport.width,
            height: viewport.height,
            curves,
        })
    }

    pub fn to_set(&self) -> Result<ContourSet> {
        if self.format != CONTOUR_FORMAT || self.version != 1 {
            return Err(Error::Parse(format!(
                "expected {CONTOUR_FORMAT} version 1, found {} version {}",
                self.format, self.version
            )));
        }
        let mut set = ContourSet::default();
        for r in &self.curves {
            let c = AnchoredPolyline::contour(
                r.points.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
                r.anchors
                    .iter()
                    .map(|a| Vec3::new(a[0], a[1], a[2]))
                    .collect(),
                r.closed,
                r.source_id,
            )?;
            set.push(c, r.kind);
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ContourSet> {
        read_json::<ContourFile>(path)?.to_set()
    }
}

pub fn load_matches(path: impl AsRef<Path>) -> Result<MatchSet> {
    read_json(path)
}

/// Settings for every stage, read from TOML or JSON by file extension.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub extract: ExtractConfig,
    pub matching: MatchParams,
    pub training: TrainConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let cfg: Self = if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let json = path.as_ref().extension().is_some_and(|e| e == "json");
        Self::parse(&read_text(path.as_ref())?, json)
    }

    pub fn validate(&self) -> Result<()> {
        self.extract.validate()?;
        self.matching.validate()?;
        self.training.validate()
    }
}

pub const LOSS_HEADER: &str = "stage,iteration,data,shape,slope,smooth,depth,total";

pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut s = String::from(LOSS_HEADER);
    s.push('\n');
    for r in records {
        let l = &r.loss;
        s.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.stage, r.iteration, l.data, l.shape, l.slope, l.smooth, l.depth, l.total
        ));
    }
    s
}
