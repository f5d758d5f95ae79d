use std::collections::HashMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LossBreakdown, LossWeights, TrainConfig, TrainingPair};
use crate::deviation::{project_vars, DeviationField, FieldGrad, Tape, Var, OUTPUTS};
use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{Vec2, Vec3, Vec4};

/// Points over which the smoothness term is evaluated: the vertices of a
/// regular grid over [-1, 1]^3 followed by contour anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessSampleSet {
    pub points: Vec<Vec3>,
    pub grid_count: usize,
}

impl SmoothnessSampleSet {
    pub fn grid(resolution: usize) -> Vec<Vec3> {
        let step = 2.0 / (resolution - 1) as f64;
        let c = |t: usize| -1.0 + step * t as f64;
        let mut pts = Vec::with_capacity(resolution.pow(3));
        for i in 0..resolution {
            for j in 0..resolution {
                for k in 0..resolution {
                    pts.push(Vec3::new(c(i), c(j), c(k)));
                }
            }
        }
        pts
    }

    pub fn new(anchors: &[Vec3], resolution: usize) -> Self {
        let mut points = Self::grid(resolution);
        let grid_count = points.len();
        points.extend_from_slice(anchors);
        Self { points, grid_count }
    }
}

/// Unordered pairs `(i, j)`, `i < j`, no farther apart than `cutoff`, with
/// kernel weight `exp(-d^2 / (2 sigma^2))`. Sorted by `(i, j)`.
pub fn smoothness_pairs(points: &[Vec3], sigma: f64, cutoff: f64) -> Vec<(u32, u32, f64)> {
    let key = |p: &Vec3| {
        (
            (p.x / cutoff).floor() as i64,
            (p.y / cutoff).floor() as i64,
            (p.z / cutoff).floor() as i64,
        )
    };
    let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i as u32);
    }
    let mut out = Vec::new();
    let mut near = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = key(p);
        near.clear();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &j in ids {
                            if j as usize > i {
                                let d2 = (points[j as usize] - p).norm_squared();
                                if d2 <= cutoff * cutoff {
                                    near.push((j, (-d2 / (2.0 * sigma * sigma)).exp()));
                                }
                            }
                        }
                    }
                }
            }
        }
        near.sort_by_key(|a| a.0);
        out.extend(near.iter().map(|&(j, w)| (i as u32, j, w)));
    }
    out
}

struct DataTerm {
    i: u32,
    q: Vec2,
    alpha: f64,
}

/// Residual `(P_k - P_i) - [[a, -b], [b, a]] (P_j - P_i)`, evaluated as
/// `(V - v) - M (U - u)` with `u`, `v` the analytic edges, so that it is
/// exactly zero when the projection is undeviated.
struct ShapeTerm {
    i: u32,
    j: u32,
    k: u32,
    a: f64,
    b: f64,
    u: Vec2,
    v: Vec2,
    weight: f64,
}

/// `(n . ((P_b - P_a) - e))^2` with `e` the analytic edge and `n` its unit
/// normal divided by its length.
struct SlopeTerm {
    a: u32,
    b: u32,
    e: Vec2,
    n: Vec2,
}

/// `(to - from) - analytic`, formed so that it is exactly zero when the
/// projected points equal the analytic ones.
fn edge_offset<'t>(
    tape: &'t Tape,
    from: [Var<'t>; 2],
    to: [Var<'t>; 2],
    analytic: &Vec2,
) -> [Var<'t>; 2] {
    std::array::from_fn(|c| {
        let e = tape.linear(&[(to[c], 1.0), (from[c], -1.0)], 0.0);
        tape.linear(&[(e, 1.0)], -analytic[c])
    })
}

struct Prepared {
    anchors: Vec<Vec3>,
    clip: Vec<Vec4>,
    data: Vec<DataTerm>,
    data_scale: f64,
    shape: Vec<ShapeTerm>,
    slope: Vec<SlopeTerm>,
    /// Smoothness pairs indexed into grid ++ anchors.
    smooth: Vec<(u32, u32, f64)>,
    smooth_norm: f64,
}

impl Prepared {
    fn new(pair: &TrainingPair, cfg: &TrainConfig, grid: &[Vec3]) -> Result<Self> {
        let mut starts = Vec::with_capacity(pair.contours.len());
        let mut anchors: Vec<Vec3> = Vec::new();
        let mut analytic: Vec<Vec2> = Vec::new();
        for c in &pair.contours {
            starts.push(anchors.len());
            anchors.extend(c.anchors.as_ref().expect("validated anchors"));
            analytic.extend(&c.points);
        }
        let clip: Vec<Vec4> = anchors.iter().map(|a| pair.rig.clip(a)).collect();

        if pair.matches.entries.is_empty() {
            return Err(Error::UndefinedLoss(format!(
                "pair {} has no matched vertices",
                pair.name()
            )));
        }
        let mut alpha = vec![0.0; anchors.len()];
        let mut data = Vec::with_capacity(pair.matches.entries.len());
        let mut dist = 0.0_f64;
        for e in &pair.matches.entries {
            let i = starts[e.curve] + e.i;
            let q = pair.strokes[e.stroke].points[e.j];
            alpha[i] = e.alpha;
            let diff: Vec2 = analytic[i] - q;
            dist += diff.x.abs() + diff.y.abs();
            data.push(DataTerm {
                i: i as u32,
                q,
                alpha: e.alpha,
            });
        }
        let n = data.len() as f64;
        let avg_l = dist / n + cfg.eps_data;
        let data_scale = 1.0 / (avg_l * n);

        let mut shape = Vec::new();
        let mut slope = Vec::new();
        for (c, curve) in pair.contours.iter().enumerate() {
            let s = starts[c];
            let len = curve.len();
            for i in 0..len {
                let (Some(j), Some(k)) = curve.neighbors(i) else {
                    continue;
                };
                if j == k {
                    continue;
                }
                let (pi, pj, pk) = (analytic[s + i], analytic[s + j], analytic[s + k]);
                let u = pj - pi;
                let v = pk - pi;
                let uu = u.norm_squared();
                if uu < 1e-24 || v.norm_squared() < 1e-24 {
                    log::warn!(
                        "skipping shape term at coincident vertices (curve {c}, vertex {i})"
                    );
                    continue;
                }
                let amin = alpha[s + i].min(alpha[s + j]).min(alpha[s + k]);
                shape.push(ShapeTerm {
                    i: (s + i) as u32,
                    j: (s + j) as u32,
                    k: (s + k) as u32,
                    a: u.dot(&v) / uu,
                    b: (u.x * v.y - u.y * v.x) / uu,
                    u,
                    v,
                    weight: 1.0 - amin + cfg.eps_shape,
                });
            }
            for seg in 0..curve.segment_count() {
                let (a, b) = curve.segment(seg);
                let e = analytic[s + b] - analytic[s + a];
                let l2 = e.norm_squared();
                if l2 < 1e-24 {
                    continue;
                }
                slope.push(SlopeTerm {
                    a: (s + a) as u32,
                    b: (s + b) as u32,
                    e,
                    n: Vec2::new(-e.y, e.x) / l2,
                });
            }
        }

        let mut all = grid.to_vec();
        all.extend_from_slice(&anchors);
        let smooth = smoothness_pairs(&all, cfg.sigma1, cfg.smooth_cutoff * cfg.sigma1);
        Ok(Self {
            anchors,
            clip,
            data,
            data_scale,
            shape,
            slope,
            smooth,
            smooth_norm: 2.0 / all.len() as f64,
        })
    }
}

/// Loss value and, when requested, its parameter gradient.
pub struct Evaluation {
    pub loss: LossBreakdown,
    pub grad: Option<FieldGrad>,
}

/// The training objective over a fixed set of pairs: geometry is
/// preprocessed once, and each evaluation runs the network once over the
/// grid and all anchors.
pub struct Objective {
    cfg: TrainConfig,
    grid_count: usize,
    pairs: Vec<Prepared>,
    points: Vec<Vec3>,
    offsets: Vec<usize>,
}

struct PairResult {
    loss: LossBreakdown,
    /// (global point index, d loss / d entries)
    rows: Vec<(usize, [f64; OUTPUTS])>,
}

impl Objective {
    pub fn new(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if pairs.is_empty() {
            return Err(Error::UndefinedLoss("no training pairs".into()));
        }
        let grid = SmoothnessSampleSet::grid(cfg.grid_resolution);
        let prepared = exec::map(pairs, |p| Prepared::new(p, cfg, &grid))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut points = grid.clone();
        let mut offsets = Vec::with_capacity(prepared.len());
        for p in &prepared {
            offsets.push(points.len());
            points.extend_from_slice(&p.anchors);
        }
        Ok(Self {
            cfg: cfg.clone(),
            grid_count: grid.len(),
            pairs: prepared,
            points,
            offsets,
        })
    }

    /// Number of points the network is evaluated at per iteration.
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Sum over pairs of the weighted terms. Sampled terms draw their pairs
    /// from a generator seeded by (config seed, iteration, pair index), so
    /// repeated calls with the same iteration see the same sample.
    pub fn evaluate(
        &self,
        field: &DeviationField,
        iteration: usize,
        weights: &LossWeights,
        want_grad: bool,
    ) -> Result<Evaluation> {
        let batch = field.forward_batch(&self.points);
        let entries = batch.all_entries();
        let idx: Vec<usize> = (0..self.pairs.len()).collect();
        let results = exec::map(&idx, |&p| {
            self.eval_pair(p, &entries, iteration, weights, want_grad)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut loss = LossBreakdown::default();
        let mut g = if want_grad {
            vec![[0.0; OUTPUTS]; self.points.len()]
        } else {
            Vec::new()
        };
        for r in &results {
            loss.accumulate(&r.loss);
            for (k, row) in &r.rows {
                for (a, b) in g[*k].iter_mut().zip(row) {
                    *a += b;
                }
            }
        }
        let grad = want_grad.then(|| field.backward_batch(&batch, &g));
        Ok(Evaluation { loss, grad })
    }

    fn rng(&self, iteration: usize, pair: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(((iteration as u64) << 24) ^ pair as u64);
        rng
    }

    fn eval_pair(
        &self,
        p: usize,
        entries: &[[f64; OUTPUTS]],
        iteration: usize,
        weights: &LossWeights,
        want_grad: bool,
    ) -> Result<PairResult> {
        let pr = &self.pairs[p];
        let base = self.offsets[p];
        let n = pr.anchors.len();
        let mut rng = self.rng(iteration, p);

        let sampled =
            pr.smooth.len().min(self.cfg.smooth_pairs) + (n * n).min(self.cfg.depth_pairs);
        let tape = Tape::with_capacity(60 * n + 20 * sampled);
        let leaves: Vec<Var> = (0..n)
            .flat_map(|k| {
                entries[base + k]
                    .iter()
                    .map(|v| tape.var(*v))
                    .collect::<Vec<_>>()
            })
            .collect();
        let d = |k: usize| &leaves[OUTPUTS * k..OUTPUTS * (k + 1)];
        let proj = (0..n)
            .map(|k| project_vars(&tape, d(k), &pr.clip[k], &pr.anchors[k]))
            .collect::<Result<Vec<_>>>()?;

        let data = {
            let terms: Vec<Var> = pr
                .data
                .iter()
                .map(|t| {
                    let [x, y] = proj[t.i as usize];
                    ((x - t.q.x).abs() + (y - t.q.y).abs()) * t.alpha
                })
                .collect();
            tape.sum(&terms) * pr.data_scale
        };

        let shape = {
            let terms: Vec<Var> = pr
                .shape
                .iter()
                .map(|t| {
                    let (pi, pj, pk) = (proj[t.i as usize], proj[t.j as usize], proj[t.k as usize]);
                    let du = edge_offset(&tape, pi, pj, &t.u);
                    let dv = edge_offset(&tape, pi, pk, &t.v);
                    let (a, b) = (t.a, t.b);
                    let rx = tape.linear(&[(dv[0], 1.0), (du[0], -a), (du[1], b)], 0.0);
                    let ry = tape.linear(&[(dv[1], 1.0), (du[1], -a), (du[0], -b)], 0.0);
                    (rx.square() + ry.square()) * t.weight
                })
                .collect();
            tape.sum(&terms)
        };

        let slope = {
            let terms: Vec<Var> = pr
                .slope
                .iter()
                .map(|t| {
                    let d = edge_offset(&tape, proj[t.a as usize], proj[t.b as usize], &t.e);
                    tape.linear(&[(d[0], t.n.x), (d[1], t.n.y)], 0.0).square()
                })
                .collect();
            let s = tape.sum(&terms);
            if terms.is_empty() {
                s
            } else {
                s / terms.len() as f64
            }
        };

        // grid leaves are created on first use
        let mut grid_leaves: HashMap<usize, usize> = HashMap::new();
        let mut extra: Vec<Var> = Vec::new();
        let smooth = {
            let total = pr.smooth.len();
            let k = self.cfg.smooth_pairs;
            let (chosen, scale): (Vec<usize>, f64) = if total <= k {
                ((0..total).collect(), 1.0)
            } else {
                let mut v = index::sample(&mut rng, total, k).into_vec();
                v.sort_unstable();
                (v, total as f64 / k as f64)
            };
            let mut terms = Vec::with_capacity(chosen.len());
            for c in chosen {
                let (i, j, w) = pr.smooth[c];
                let mut row = |s: u32| -> Vec<Var> {
                    let s = s as usize;
                    if s >= self.grid_count {
                        d(s - self.grid_count).to_vec()
                    } else {
                        let at = *grid_leaves.entry(s).or_insert_with(|| {
                            let at = extra.len();
                            extra.extend(entries[s].iter().map(|v| tape.var(*v)));
                            at
                        });
                        extra[at..at + OUTPUTS].to_vec()
                    }
                };
                let (di, dj) = (row(i), row(j));
                let diff: Vec<Var> = di.iter().zip(&dj).map(|(a, b)| *a - *b).collect();
                terms.push(tape.norm2(&diff) * w);
            }
            tape.sum(&terms) * (pr.smooth_norm * scale)
        };

        let depth = {
            let total = n.saturating_mul(n.saturating_sub(1));
            let k = self.cfg.depth_pairs;
            let (pairs, scale): (Vec<(usize, usize)>, f64) = if total <= k {
                let all = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
                (all.collect(), 1.0)
            } else {
                let v = (0..k)
                    .map(|_| {
                        let i = rng.gen_range(0..n);
                        let j = rng.gen_range(0..n - 1);
                        (i, if j >= i { j + 1 } else { j })
                    })
                    .collect();
                (v, total as f64 / k as f64)
            };
            let terms: Vec<Var> = pairs
                .iter()
                .map(|&(i, j)| {
                    let dh = pr.clip[i] - pr.clip[j];
                    let di = d(i);
                    tape.linear(
                        &[(di[8], dh.x), (di[9], dh.y), (di[10], dh.z), (di[11], dh.w)],
                        -dh.z,
                    )
                    .abs()
                })
                .collect();
            tape.sum(&terms) * scale
        };

        let total = tape.linear(
            &[
                (data, weights.data),
                (shape, weights.shape),
                (slope, weights.slope),
                (smooth, weights.smooth),
                (depth, weights.depth),
            ],
            0.0,
        );
        let loss = LossBreakdown {
            data: data.value(),
            shape: shape.value(),
            slope: slope.value(),
            smooth: smooth.value(),
            depth: depth.value(),
            total: total.value(),
        };

        let mut rows = Vec::new();
        if want_grad {
            let adj = tape.backward(total);
            let collect =
                |vars: &[Var]| -> [f64; OUTPUTS] { std::array::from_fn(|c| adj.wrt(vars[c])) };
            let mut grid_rows: Vec<(usize, usize)> = grid_leaves.into_iter().collect();
            grid_rows.sort_unstable();
            for (s, at) in grid_rows {
                rows.push((s, collect(&extra[at..at + OUTPUTS])));
            }
            for k in 0..n {
                rows.push((base + k, collect(d(k))));
            }
        }
        Ok(PairResult { loss, rows })
    }
}
