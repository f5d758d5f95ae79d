use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Architecture, DeviationField, Layer, Provenance};
use crate::error::{Error, Result};

const FORMAT: &str = "nlpersp-deviation-field";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    architecture: Architecture,
    seed: u64,
    provenance: Provenance,
    layers: Vec<LayerFile>,
}

pub fn to_json(field: &DeviationField) -> String {
    let file = CheckpointFile {
        format: FORMAT.into(),
        version: VERSION,
        architecture: field.architecture.clone(),
        seed: field.seed,
        provenance: field.provenance.clone(),
        layers: field
            .layers
            .iter()
            .map(|l| LayerFile {
                rows: l.weights.nrows(),
                cols: l.weights.ncols(),
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes")
}

pub fn from_json(text: &str) -> Result<DeviationField> {
    let file: CheckpointFile = serde_json::from_str(text)
        .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    if file.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "unknown format {:?}",
            file.format
        )));
    }
    if file.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (expected {VERSION})",
            file.version
        )));
    }
    file.architecture
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let shapes = file.architecture.shapes();
    if shapes.len() != file.layers.len() {
        return Err(Error::Checkpoint(format!(
            "architecture expects {} layers, file has {}",
            shapes.len(),
            file.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (k, ((rows, cols), l)) in shapes.into_iter().zip(file.layers).enumerate() {
        if l.rows != rows
            || l.cols != cols
            || l.weights.len() != rows * cols
            || l.bias.len() != rows
        {
            return Err(Error::Checkpoint(format!(
                "layer {k} does not match the architecture"
            )));
        }
        if !l.weights.iter().chain(&l.bias).all(|v| v.is_finite()) {
            return Err(Error::Checkpoint(format!(
                "layer {k} has non-finite parameters"
            )));
        }
        layers.push(Layer {
            weights: Array2::from_shape_vec((rows, cols), l.weights).expect("checked shape"),
            bias: Array1::from(l.bias),
        });
    }
    Ok(DeviationField {
        architecture: file.architecture,
        layers,
        seed: file.seed,
        provenance: file.provenance,
    })
}

pub fn save(field: &DeviationField, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), to_json(field)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<DeviationField> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviation::init_field;
    use crate::geom::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perturbed() -> DeviationField {
        let arch = Architecture {
            hidden: vec![6, 5],
            ..Default::default()
        };
        let mut f = init_field(&arch, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..f.param_count() {
            f.set_param(
                k,
                f.param(k) + rng.gen_range(-0.3..0.3) * std::f64::consts::PI,
            );
        }
        f.provenance.pairs = vec!["desk".into()];
        f.provenance.stage = "aug1".into();
        f
    }

    #[test]
    fn round_trip_is_bitwise() {
        let f = perturbed();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.json");
        save(&f, &path).unwrap();
        let g = load(&path).unwrap();
        assert_eq!(f, g);
        for p in [Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.9, 0.5, 0.99)] {
            let (a, b) = (f.eval(&p).unwrap(), g.eval(&p).unwrap());
            assert!(a
                .iter()
                .zip(b.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = to_json(&perturbed());
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_json(cut), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn architecture_and_version_mismatch_are_rejected() {
        let text = to_json(&perturbed());
        let bumped = text.replace("\"version\":1", "\"version\":2");
        assert!(matches!(from_json(&bumped), Err(Error::Checkpoint(_))));
        let wrong = text.replace("\"hidden\":[6,5]", "\"hidden\":[6,4]");
        assert!(matches!(from_json(&wrong), Err(Error::Checkpoint(_))));
    }
}
