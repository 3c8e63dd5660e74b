//! Fully-connected CDF regressor.
//!
//! Hidden layers are `dense → [batch norm] → ReLU | PReLU`; the single
//! output unit is a sigmoid, so predictions are probabilities. Training
//! minimizes the mean squared error against 0/1 targets with Adam, which
//! makes the fitted network an estimate of `E[Z | x]`.

mod adam;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use model::{FeatureMap, FeatureTransform, Gradients, MlpModel};
pub use train::{train, Dataset, TrainConfig, TrainLogEntry, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Leaky ReLU with one learned negative slope per hidden layer.
    Prelu,
}

/// Network architecture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub batch_norm: bool,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, batch_norm: bool) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activation,
            batch_norm,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `inputs → hidden × depth → 1`.
    pub fn uniform(
        inputs: usize,
        width: usize,
        depth: usize,
        activation: Activation,
        batch_norm: bool,
    ) -> Result<Self> {
        let mut sizes = vec![inputs];
        sizes.extend(std::iter::repeat_n(width, depth));
        sizes.push(1);
        Self::new(sizes, activation, batch_norm)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 3 {
            return Err(invalid(
                "network needs an input, at least one hidden layer and an output",
            ));
        }
        if sizes.contains(&0) {
            return Err(invalid("layer sizes must be positive"));
        }
        if sizes[sizes.len() - 1] != 1 {
            return Err(invalid("the output layer must have exactly one unit"));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }
}

/// Number of trainable parameters: weights and biases, plus one PReLU
/// slope and a scale/shift pair per unit for each normalized hidden layer.
///
/// ```
/// use alffi::nn::{param_count, Activation, MlpSpec};
/// let spec = MlpSpec::uniform(3, 20, 5, Activation::Relu, false).unwrap();
/// assert_eq!(param_count(&spec), 1781);
/// ```
pub fn param_count(spec: &MlpSpec) -> usize {
    let sizes = &spec.layer_sizes;
    let dense: usize = sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
    let hidden = &sizes[1..sizes.len() - 1];
    let slopes = if spec.activation == Activation::Prelu {
        hidden.len()
    } else {
        0
    };
    let norms: usize = if spec.batch_norm {
        hidden.iter().map(|h| 2 * h).sum()
    } else {
        0
    };
    dense + slopes + norms
}
