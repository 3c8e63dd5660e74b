use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::model::{FeatureMap, MlpModel};
use super::MlpSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_stream, SeedSpec};

/// Row-major features in natural units with 0/1 (or probability) targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 || features.len() != dim * targets.len() {
            return Err(invalid(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                targets.len()
            )));
        }
        Ok(Self {
            dim,
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once this many iterations pass without a better validation loss.
    pub patience_iterations: usize,
    /// Trailing fraction of the rows held out for validation.
    pub validation_fraction: f64,
    /// Iterations between validation evaluations.
    pub eval_interval: usize,
    pub seed: SeedSpec,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.max_iterations == 0
            || self.patience_iterations == 0
            || self.eval_interval == 0
        {
            return Err(invalid(
                "batch size, iteration limits and eval interval must be positive",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(invalid("validation fraction must lie in (0, 0.5]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub iteration: usize,
    /// Mean minibatch loss since the previous entry.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The checkpoint with the lowest validation loss.
    pub model: MlpModel,
    pub log: Vec<TrainLogEntry>,
    pub best_iteration: usize,
    pub best_val_loss: f64,
}

/// Minibatch Adam on the quadratic loss with validation checkpointing.
pub fn train(
    spec: MlpSpec,
    features: FeatureMap,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.dim() != spec.inputs() {
        return Err(Error::Dimension {
            expected: spec.inputs(),
            got: data.dim(),
        });
    }
    if data.len() < 10 * cfg.batch_size {
        return Err(invalid(format!(
            "{} rows is fewer than ten batches of {}",
            data.len(),
            cfg.batch_size
        )));
    }
    let n_val = ((data.len() as f64) * cfg.validation_fraction).ceil() as usize;
    let n_train = data.len() - n_val;
    if n_train < cfg.batch_size {
        return Err(invalid("training split is smaller than one batch"));
    }
    let dim = data.dim();
    let mapped = features.apply_batch(data.features());
    let (train_x, val_x) = mapped.split_at(n_train * dim);
    let (train_y, val_y) = data.targets().split_at(n_train);

    let mut model = MlpModel::init(spec, features, cfg.seed.child(0))?;
    let mut adam = AdamState::new(model.params().len());
    let mut rng = derive_stream(cfg.seed.child(1), 0);

    let mut order: Vec<usize> = (0..n_train).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut batch_x = vec![0.0; cfg.batch_size * dim];
    let mut batch_y = vec![0.0; cfg.batch_size];

    let initial = model.eval_loss_mapped(val_x, val_y);
    let mut log = vec![TrainLogEntry {
        iteration: 0,
        train_loss: f64::NAN,
        val_loss: initial,
    }];
    let mut best = model.clone();
    let mut best_val = initial;
    let mut best_iteration = 0;
    let mut running = 0.0;
    let mut since_eval = 0;

    for iteration in 1..=cfg.max_iterations {
        if cursor + cfg.batch_size > n_train {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        for (k, &row) in order[cursor..cursor + cfg.batch_size].iter().enumerate() {
            batch_x[k * dim..(k + 1) * dim].copy_from_slice(&train_x[row * dim..(row + 1) * dim]);
            batch_y[k] = train_y[row];
        }
        cursor += cfg.batch_size;

        let (loss, grads, stats) = model.loss_and_grad_mapped(&batch_x, &batch_y)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite loss {loss} at iteration {iteration}"
            )));
        }
        model.update_running_stats(&stats, cfg.batch_size);
        adam_step(model.params_mut(), &grads, &mut adam, cfg.learning_rate);
        running += loss;
        since_eval += 1;

        if iteration % cfg.eval_interval == 0 || iteration == cfg.max_iterations {
            let val = model.eval_loss_mapped(val_x, val_y);
            if !val.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite validation loss at iteration {iteration}"
                )));
            }
            log.push(TrainLogEntry {
                iteration,
                train_loss: running / since_eval as f64,
                val_loss: val,
            });
            running = 0.0;
            since_eval = 0;
            if val < best_val {
                best_val = val;
                best = model.clone();
                best_iteration = iteration;
            } else if iteration - best_iteration >= cfg.patience_iterations {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        log,
        best_iteration,
        best_val_loss: best_val,
    })
}
