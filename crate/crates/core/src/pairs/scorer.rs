//! Feedforward mention-pair scorer: three ReLU layers and a sigmoid output.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::PairFeatureLayout;
use crate::error::{Error, Result};
use crate::nn::{glorot, read_checkpoint, sigmoid, write_checkpoint, ParamSet};

pub const PAIR_MAGIC: &[u8; 4] = b"PRPS";
pub const PAIR_VERSION: u32 = 1;
pub const N_HIDDEN_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScorerConfig {
    pub layout: PairFeatureLayout,
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl PairScorerConfig {
    pub fn new(layout: PairFeatureLayout) -> Self {
        PairScorerConfig {
            layout,
            hidden: 1900,
            dropout: 0.6,
            seed: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layout.total_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScorerModel {
    pub config: PairScorerConfig,
    pub params: ParamSet,
}

struct Forward {
    /// Layer inputs: x, then each post-dropout activation.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    logits: Vec<f64>,
}

/// Mean binary cross-entropy from logits, computed stably.
pub fn bce_with_logits(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

impl PairScorerModel {
    pub fn new(config: PairScorerConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let mut fan_in = config.input_dim();
        for l in 0..N_HIDDEN_LAYERS {
            params.push(format!("layer{l}.w"), glorot(fan_in, config.hidden, &mut rng));
            params.push(format!("layer{l}.b"), Array2::zeros((1, config.hidden)));
            fan_in = config.hidden;
        }
        params.push("output.w", glorot(fan_in, 1, &mut rng));
        params.push("output.b", Array2::zeros((1, 1)));
        PairScorerModel { config, params }
    }

    pub fn from_params(config: PairScorerConfig, params: ParamSet) -> Result<Self> {
        let expected = PairScorerModel::new(PairScorerConfig { seed: 0, ..config.clone() });
        if expected.params.names != params.names || expected.params.shapes() != params.shapes() {
            return Err(Error::Checkpoint("pair scorer parameters do not match the layout".into()));
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("pair scorer parameters".into()));
        }
        Ok(PairScorerModel { config, params })
    }

    /// Sets the output layer to zero so every score is exactly 0.5.
    pub fn zero_output(&mut self) {
        let n = self.params.len();
        self.params.tensors[n - 2].fill(0.0);
        self.params.tensors[n - 1].fill(0.0);
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.config.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim(),
                got: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pair scorer input".into()));
        }
        Ok(())
    }

    /// Inverted dropout masks for one batch of `n` rows.
    pub fn dropout_masks(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Option<Array2<f64>>> {
        let p = self.config.dropout;
        (0..N_HIDDEN_LAYERS)
            .map(|_| {
                (p > 0.0).then(|| {
                    Array2::from_shape_fn((n, self.config.hidden), |_| {
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            1.0 / (1.0 - p)
                        }
                    })
                })
            })
            .collect()
    }

    fn forward(&self, x: ArrayView2<f64>, masks: &[Option<Array2<f64>>]) -> Forward {
        let t = &self.params.tensors;
        let mut inputs = vec![x.to_owned()];
        let mut pre = Vec::new();
        for l in 0..N_HIDDEN_LAYERS {
            let z = inputs[l].dot(&t[2 * l]) + &t[2 * l + 1];
            let mut a = z.mapv(|v| v.max(0.0));
            if let Some(Some(m)) = masks.get(l) {
                a *= m;
            }
            pre.push(z);
            inputs.push(a);
        }
        let out = inputs[N_HIDDEN_LAYERS].dot(&t[2 * N_HIDDEN_LAYERS]) + &t[2 * N_HIDDEN_LAYERS + 1];
        Forward {
            inputs,
            pre,
            masks: masks.to_vec(),
            logits: out.column(0).to_vec(),
        }
    }

    /// Coreference probabilities with dropout off.
    pub fn score(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x, &[]).logits.into_iter().map(sigmoid).collect())
    }

    /// Summed BCE over the batch and its parameter gradients. `masks` come
    /// from [`Self::dropout_masks`]; an empty slice disables dropout.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<f64>,
        y: &[f64],
        masks: &[Option<Array2<f64>>],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.check_input(x)?;
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let f = self.forward(x, masks);
        let t = &self.params.tensors;
        let loss: f64 = f.logits.iter().zip(y).map(|(&z, &y)| bce_with_logits(z, y)).sum();
        let mut grads = self.params.zeros_like();
        let mut d = Array2::from_shape_fn((y.len(), 1), |(i, _)| sigmoid(f.logits[i]) - y[i]);
        let last = 2 * N_HIDDEN_LAYERS;
        grads[last] = f.inputs[N_HIDDEN_LAYERS].t().dot(&d);
        grads[last + 1] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d_in = d.dot(&t[last].t());
        for l in (0..N_HIDDEN_LAYERS).rev() {
            if let Some(Some(m)) = f.masks.get(l) {
                d_in *= m;
            }
            d = d_in * &f.pre[l].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            grads[2 * l] = f.inputs[l].t().dot(&d);
            grads[2 * l + 1] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
            d_in = d.dot(&t[2 * l].t());
        }
        Ok((loss, grads))
    }

    pub fn loss(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self
            .forward(x, &[])
            .logits
            .iter()
            .zip(y)
            .map(|(&z, &y)| bce_with_logits(z, y))
            .sum())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, PAIR_MAGIC, PAIR_VERSION, &self.config, &self.params)?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut input = bytes;
        let (config, params): (PairScorerConfig, _) = read_checkpoint(&mut input, PAIR_MAGIC, PAIR_VERSION)?;
        PairScorerModel::from_params(config, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        PairScorerModel::from_bytes(&bytes)
    }
}
