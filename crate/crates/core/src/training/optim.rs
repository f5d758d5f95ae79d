use serde::Serialize;

use super::{LossBreakdown, Objective, PairSource, TrainConfig, TrainingPair};
use crate::deviation::{DeviationField, FieldGrad};
use crate::error::{Error, Result};

/// Adam with the usual moment decay rates.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: FieldGrad,
    v: FieldGrad,
}

impl Adam {
    pub fn new(field: &DeviationField, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: FieldGrad::zeros_like(field),
            v: FieldGrad::zeros_like(field),
        }
    }

    pub fn step(&mut self, field: &mut DeviationField, grad: &FieldGrad) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (lr, eps) = (self.lr, self.eps);
        for (((p, g), m), v) in field
            .layers
            .iter_mut()
            .zip(&grad.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut p.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, g, m, v| update(p, *g, m, v));
            ndarray::Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, g, m, v| update(p, *g, m, v));
        }
    }
}

/// One row of the loss log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub stage: String,
    pub iteration: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

/// Optimization state that survives an aborted run: after an error,
/// `field` holds the last parameters with a finite loss.
pub struct Trainer {
    pub field: DeviationField,
    pub history: Vec<LossRecord>,
}

impl Trainer {
    pub fn new(field: DeviationField) -> Self {
        Self {
            field,
            history: Vec::new(),
        }
    }

    /// Run `iterations` Adam steps on the summed objective of `pairs`.
    pub fn run(
        &mut self,
        pairs: &[TrainingPair],
        cfg: &TrainConfig,
        iterations: usize,
        stage: &str,
    ) -> Result<()> {
        let objective = Objective::new(pairs, cfg)?;
        let mut adam = Adam::new(&self.field, cfg.learning_rate);
        for it in 0..iterations {
            let eval = objective.evaluate(&self.field, it, &cfg.weights, true)?;
            let grad = eval.grad.expect("gradient requested");
            if !eval.loss.is_finite() || !grad.norm().is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: it,
                    terms: eval.loss.to_string(),
                });
            }
            self.history.push(LossRecord {
                stage: stage.into(),
                iteration: it,
                loss: eval.loss,
            });
            if it % 100 == 0 {
                log::info!("[{stage}] iteration {it}: {}", eval.loss);
            }
            let before = self.field.clone();
            adam.step(&mut self.field, &grad);
            if self
                .field
                .layers
                .iter()
                .any(|l| l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()))
            {
                self.field = before;
                return Err(Error::NonFiniteLoss {
                    iteration: it,
                    terms: "parameters became non-finite".into(),
                });
            }
        }
        let last = objective.evaluate(&self.field, iterations, &cfg.weights, false)?;
        self.history.push(LossRecord {
            stage: stage.into(),
            iteration: iterations,
            loss: last.loss,
        });
        self.field.provenance.stage = stage.into();
        self.field.provenance.iterations += iterations;
        for p in pairs {
            if let PairSource::Artist { name } = &p.source {
                if !self.field.provenance.pairs.contains(name) {
                    self.field.provenance.pairs.push(name.clone());
                }
            }
        }
        Ok(())
    }
}

/// Train `field` on `pairs` for `iterations` steps and return the result
/// with its loss history.
pub fn train(
    pairs: &[TrainingPair],
    cfg: &TrainConfig,
    field: DeviationField,
    iterations: usize,
    stage: &str,
) -> Result<(DeviationField, Vec<LossRecord>)> {
    let mut t = Trainer::new(field);
    t.run(pairs, cfg, iterations, stage)?;
    Ok((t.field, t.history))
}
