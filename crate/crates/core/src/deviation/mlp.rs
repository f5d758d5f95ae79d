use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{Mat4, Vec3};

/// Number of network outputs; the (4,4) entry of the matrix is fixed to 1.
pub const OUTPUTS: usize = 15;

/// Row-major identity, truncated to the first 15 entries.
pub const IDENTITY_ENTRIES: [f64; OUTPUTS] =
    [1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0.];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => {
                if z > 30.0 {
                    z
                } else {
                    z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative expressed through the activation output.
    fn slope_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Softplus => -(-a).exp_m1(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Number of sinusoidal frequency bands added to the raw coordinates.
    pub encoding_frequencies: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![128; 4],
            activation: Activation::Tanh,
            encoding_frequencies: 0,
        }
    }
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        3 * (1 + 2 * self.encoding_frequencies)
    }

    /// (rows, cols) of each layer's weight matrix.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim()];
        dims.extend(&self.hidden);
        dims.push(OUTPUTS);
        dims.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config(
                "hidden layers must have at least one unit".into(),
            ));
        }
        Ok(())
    }

    fn encode_into(&self, p: &Vec3, out: &mut [f64]) {
        out[..3].copy_from_slice(p.as_slice());
        let mut k = 3;
        for f in 0..self.encoding_frequencies {
            let w = std::f64::consts::PI * (1u64 << f) as f64;
            for c in 0..3 {
                out[k] = (w * p[c]).sin();
                out[k + 1] = (w * p[c]).cos();
                k += 2;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// (outputs, inputs)
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Where a field's parameters came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Provenance {
    pub pairs: Vec<String>,
    pub stage: String,
    pub iterations: usize,
}

/// A fully connected network mapping a normalized 3D point to 15 entries of
/// a 4x4 deviation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationField {
    pub architecture: Architecture,
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub provenance: Provenance,
}

/// Gradient with the same layout as a field's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrad {
    pub layers: Vec<Layer>,
}

impl FieldGrad {
    pub fn zeros_like(field: &DeviationField) -> Self {
        Self {
            layers: field
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, o: &FieldGrad) {
        for (a, b) in self.layers.iter_mut().zip(&o.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights *= s;
            l.bias *= s;
        }
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weights
                    .iter()
                    .chain(l.bias.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn get(&self, k: usize) -> f64 {
        flat_get(&self.layers, k)
    }
}

fn flat_slot(layers: &[Layer], mut k: usize) -> (usize, Option<(usize, usize)>, usize) {
    for (li, l) in layers.iter().enumerate() {
        let nw = l.weights.len();
        if k < nw {
            let cols = l.weights.ncols();
            return (li, Some((k / cols, k % cols)), 0);
        }
        k -= nw;
        if k < l.bias.len() {
            return (li, None, k);
        }
        k -= l.bias.len();
    }
    panic!("parameter index out of range");
}

fn flat_get(layers: &[Layer], k: usize) -> f64 {
    match flat_slot(layers, k) {
        (li, Some(rc), _) => layers[li].weights[rc],
        (li, None, b) => layers[li].bias[b],
    }
}

/// Cached activations of one chunk of a batch evaluation.
struct Chunk {
    /// Layer inputs: the encoded points followed by each hidden output.
    acts: Vec<Array2<f64>>,
    out: Array2<f64>,
}

/// Outputs of a batch evaluation, retained for the backward pass.
pub struct Batch {
    chunks: Vec<Chunk>,
    len: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entries(&self, k: usize) -> [f64; OUTPUTS] {
        let c = &self.chunks[k / exec::CHUNK];
        let row = c.out.row(k % exec::CHUNK);
        let mut e = [0.0; OUTPUTS];
        for (d, s) in e.iter_mut().zip(row.iter()) {
            *d = *s;
        }
        e
    }

    pub fn all_entries(&self) -> Vec<[f64; OUTPUTS]> {
        (0..self.len).map(|k| self.entries(k)).collect()
    }
}

/// The 4x4 matrix with the given first 15 row-major entries and a unit
/// (4,4) entry.
pub fn entries_to_matrix(e: &[f64; OUTPUTS]) -> Mat4 {
    let mut m = Mat4::identity();
    for (k, v) in e.iter().enumerate() {
        m[(k / 4, k % 4)] = *v;
    }
    m
}

pub fn matrix_to_entries(m: &Mat4) -> [f64; OUTPUTS] {
    let mut e = [0.0; OUTPUTS];
    for (k, v) in e.iter_mut().enumerate() {
        *v = m[(k / 4, k % 4)];
    }
    e
}

/// A field with Glorot-uniform hidden weights, zero biases, and an output
/// layer with zero weights and identity bias, so it evaluates to the
/// identity everywhere.
pub fn init_field(architecture: &Architecture, seed: u64) -> DeviationField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = architecture.shapes();
    let last = shapes.len() - 1;
    let layers = shapes
        .iter()
        .enumerate()
        .map(|(li, &(rows, cols))| {
            if li == last {
                Layer {
                    weights: Array2::zeros((rows, cols)),
                    bias: Array1::from(IDENTITY_ENTRIES.to_vec()),
                }
            } else {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-a..a)),
                    bias: Array1::zeros(rows),
                }
            }
        })
        .collect();
    DeviationField {
        architecture: architecture.clone(),
        layers,
        seed,
        provenance: Provenance {
            stage: "init".into(),
            ..Default::default()
        },
    }
}

/// A field whose output is the constant matrix `m` (its (4,4) entry is
/// ignored).
pub fn constant_field(architecture: &Architecture, m: &Mat4, seed: u64) -> DeviationField {
    let mut f = init_field(architecture, seed);
    let last = f.layers.len() - 1;
    f.layers[last].bias = Array1::from(matrix_to_entries(m).to_vec());
    f
}

impl DeviationField {
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameter `k` in layer order: each layer's weights (row-major) then
    /// its bias.
    pub fn param(&self, k: usize) -> f64 {
        flat_get(&self.layers, k)
    }

    pub fn set_param(&mut self, k: usize, v: f64) {
        match flat_slot(&self.layers, k) {
            (li, Some(rc), _) => self.layers[li].weights[rc] = v,
            (li, None, b) => self.layers[li].bias[b] = v,
        }
    }

    fn forward_chunk(&self, points: &[Vec3]) -> Chunk {
        let arch = &self.architecture;
        let mut x = Array2::zeros((points.len(), arch.input_dim()));
        for (r, p) in points.iter().enumerate() {
            arch.encode_into(p, x.row_mut(r).into_slice().expect("standard layout"));
        }
        let mut acts = vec![x];
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = acts[li].dot(&layer.weights.t());
            z += &layer.bias;
            if li == last {
                return Chunk { acts, out: z };
            }
            z.mapv_inplace(|v| arch.activation.apply(v));
            acts.push(z);
        }
        unreachable!("network has an output layer")
    }

    /// Evaluate many points at once; chunks are processed in parallel.
    pub fn forward_batch(&self, points: &[Vec3]) -> Batch {
        let chunks = exec::map_chunks(points, |_, c| self.forward_chunk(c));
        Batch {
            chunks,
            len: points.len(),
        }
    }

    /// Parameter gradient of `sum_k grad_out[k] . entries(k)`. Per-chunk
    /// gradients are reduced in chunk order.
    pub fn backward_batch(&self, batch: &Batch, grad_out: &[[f64; OUTPUTS]]) -> FieldGrad {
        assert_eq!(grad_out.len(), batch.len, "one output gradient per point");
        let idx: Vec<usize> = (0..batch.chunks.len()).collect();
        let parts = exec::map(&idx, |&ci| {
            let chunk = &batch.chunks[ci];
            let lo = ci * exec::CHUNK;
            let rows = chunk.out.nrows();
            let mut delta = Array2::from_shape_fn((rows, OUTPUTS), |(r, c)| grad_out[lo + r][c]);
            let mut grads = Vec::with_capacity(self.layers.len());
            for li in (0..self.layers.len()).rev() {
                let input = &chunk.acts[li];
                let gw = delta.t().dot(input);
                let gb = delta.sum_axis(Axis(0));
                grads.push(Layer {
                    weights: gw,
                    bias: gb,
                });
                if li > 0 {
                    let mut next = delta.dot(&self.layers[li].weights);
                    let act = self.architecture.activation;
                    next.zip_mut_with(input, |d, a| *d *= act.slope_from_output(*a));
                    delta = next;
                }
            }
            grads.reverse();
            FieldGrad { layers: grads }
        });
        let mut total = FieldGrad::zeros_like(self);
        for p in &parts {
            total.add_assign(p);
        }
        total
    }

    /// The field `S D(p)` for a fixed matrix `S` whose last row is
    /// (0, 0, 0, 1). The product is folded into the output layer.
    pub fn premultiply(&self, m: &Mat4) -> Result<DeviationField> {
        if m.row(3) != Mat4::identity().row(3) {
            return Err(Error::Domain(
                "premultiplied matrix must keep the last row (0, 0, 0, 1)".into(),
            ));
        }
        // entries of S D are affine in the entries of D
        let map = |e: &[f64; OUTPUTS]| matrix_to_entries(&(m * entries_to_matrix(e)));
        let c = map(&[0.0; OUTPUTS]);
        let mut a = Array2::zeros((OUTPUTS, OUTPUTS));
        for col in 0..OUTPUTS {
            let mut unit = [0.0; OUTPUTS];
            unit[col] = 1.0;
            let v = map(&unit);
            for row in 0..OUTPUTS {
                a[(row, col)] = v[row] - c[row];
            }
        }
        let mut out = self.clone();
        let last = out.layers.len() - 1;
        let l = &self.layers[last];
        out.layers[last].weights = a.dot(&l.weights);
        out.layers[last].bias = a.dot(&l.bias) + Array1::from(c.to_vec());
        Ok(out)
    }

    /// The 15 raw network outputs at `p`.
    pub fn eval_entries(&self, p: &Vec3) -> Result<[f64; OUTPUTS]> {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field input {p:?}")));
        }
        let c = self.forward_chunk(std::slice::from_ref(p));
        let mut e = [0.0; OUTPUTS];
        for (d, s) in e.iter_mut().zip(c.out.slice(s![0, ..]).iter()) {
            *d = *s;
        }
        Ok(e)
    }

    /// The deviation matrix at `p`.
    pub fn eval(&self, p: &Vec3) -> Result<Mat4> {
        self.eval_entries(p).map(|e| entries_to_matrix(&e))
    }

    /// Deviation matrices at many points.
    pub fn eval_many(&self, points: &[Vec3]) -> Result<Vec<Mat4>> {
        if let Some(p) = points.iter().find(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::Domain(format!("non-finite field input {p:?}")));
        }
        let b = self.forward_batch(points);
        Ok((0..b.len())
            .map(|k| entries_to_matrix(&b.entries(k)))
            .collect())
    }
}
