//! BIOES tagger: locked dropout, highway projection, sequence encoder,
//! emission layer and CRF.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bioes::{Label, N_LABELS};
use super::crf::{self, N_STATES};
use super::encoder::{Encoder, EncoderKind, SequenceEncoder};
use crate::error::{Error, Result};
use crate::nn::{glorot, sigmoid, ParamSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub embedding_dim: usize,
    pub projection_dim: usize,
    pub hidden_size: usize,
    pub encoder: EncoderKind,
    pub dropout: f64,
    /// Nesting level the tagger was trained on.
    pub level: usize,
    pub seed: u64,
}

impl TaggerConfig {
    /// Full-size shape: 1024 → 2048 highway, 256 units per direction.
    pub fn reference() -> Self {
        TaggerConfig {
            embedding_dim: 1024,
            projection_dim: 2048,
            hidden_size: 256,
            encoder: EncoderKind::BiLstm,
            dropout: 0.5,
            level: 0,
            seed: 0,
        }
    }

}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig::reference()
    }
}

impl TaggerConfig {
    /// Toy dimensions for tests.
    pub fn toy(embedding_dim: usize, hidden_size: usize) -> Self {
        TaggerConfig {
            embedding_dim,
            projection_dim: hidden_size,
            hidden_size,
            encoder: EncoderKind::Mixer { window: 1 },
            dropout: 0.5,
            level: 0,
            seed: 0,
        }
    }
}

const WH: usize = 0;
const BH: usize = 1;
const WG: usize = 2;
const BG: usize = 3;
const WC: usize = 4;
const ENC: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    encoder: Encoder,
    n_encoder: usize,
    pub params: ParamSet,
}

struct Forward {
    x: Array2<f64>,
    pre_h: Array2<f64>,
    h: Array2<f64>,
    g: Array2<f64>,
    c: Array2<f64>,
    enc_out: Array2<f64>,
    enc_cache: super::encoder::EncoderCache,
    emissions: Array2<f64>,
}

/// Per-token decoding output.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagged {
    pub labels: Vec<Label>,
    /// Posterior marginal of the chosen label at each token.
    pub confidence: Vec<f64>,
}

impl TaggerModel {
    pub fn new(config: TaggerConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (e, p) = (config.embedding_dim, config.projection_dim);
        let encoder = Encoder::new(config.encoder, p, config.hidden_size);
        let mut params = ParamSet::new();
        params.push("highway.wh", glorot(e, p, &mut rng));
        params.push("highway.bh", Array2::zeros((1, p)));
        params.push("highway.wg", glorot(e, p, &mut rng));
        // gate biased towards the carry path at start
        params.push("highway.bg", Array2::from_elem((1, p), -1.0));
        params.push("highway.wc", glorot(e, p, &mut rng));
        let n_encoder = encoder.init_params(&mut params, &mut rng);
        params.push("emission.w", glorot(encoder.output_dim(), N_LABELS, &mut rng));
        params.push("emission.b", Array2::zeros((1, N_LABELS)));
        params.push("crf.transitions", Array2::zeros((N_STATES, N_STATES)));
        TaggerModel {
            config,
            encoder,
            n_encoder,
            params,
        }
    }

    /// Rebuilds a model around checkpointed parameters.
    pub fn from_params(config: TaggerConfig, params: ParamSet) -> Result<Self> {
        let mut model = TaggerModel::new(config);
        if model.params.names != params.names || model.params.shapes() != params.shapes() {
            return Err(Error::Checkpoint(
                "parameter layout does not match the tagger configuration".into(),
            ));
        }
        model.params = params;
        Ok(model)
    }

    fn wo(&self) -> usize {
        ENC + self.n_encoder
    }

    pub fn transitions(&self) -> &Array2<f64> {
        &self.params.tensors[self.wo() + 2]
    }

    fn forward(&self, x: ArrayView2<f64>, mask: Option<&Array2<f64>>) -> Forward {
        let p = &self.params.tensors;
        let x = match mask {
            Some(m) => &x * m,
            None => x.to_owned(),
        };
        let pre_h = x.dot(&p[WH]) + &p[BH];
        let h = pre_h.mapv(|v| v.max(0.0));
        let g = (x.dot(&p[WG]) + &p[BG]).mapv(sigmoid);
        let c = x.dot(&p[WC]);
        let proj = &g * &h + &(1.0 - &g) * &c;
        let (enc_out, enc_cache) = self.encoder.forward(&p[ENC..ENC + self.n_encoder], proj.view());
        let emissions = enc_out.dot(&p[self.wo()]) + &p[self.wo() + 1];
        Forward {
            x,
            pre_h,
            h,
            g,
            c,
            enc_out,
            enc_cache,
            emissions,
        }
    }

    fn check_dim(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.config.embedding_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.embedding_dim,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn emissions(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x)?;
        Ok(self.forward(x, None).emissions)
    }

    /// CRF negative log-likelihood of `gold` and its gradient for every
    /// parameter tensor. `mask` is an optional `1 x embedding_dim` locked
    /// dropout mask.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<f64>,
        gold: &[Label],
        mask: Option<&Array2<f64>>,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.check_dim(x)?;
        if gold.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: gold.len(),
            });
        }
        let p = &self.params.tensors;
        let fw = self.forward(x, mask);
        let gold_idx: Vec<usize> = gold.iter().map(|l| l.index()).collect();
        let (loss, d_em, d_tr) = crf::nll_with_grad(fw.emissions.view(), self.transitions().view(), &gold_idx);
        let wo = self.wo();

        let mut grads: Vec<Array2<f64>> = Vec::with_capacity(self.params.len());
        let d_wo = fw.enc_out.t().dot(&d_em);
        let d_bo = d_em.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_enc = d_em.dot(&p[wo].t());
        let (d_proj, enc_grads) = self
            .encoder
            .backward(&p[ENC..ENC + self.n_encoder], &fw.enc_cache, d_enc.view());
        let d_h = &d_proj * &fw.g;
        let d_g = &d_proj * &(&fw.h - &fw.c);
        let d_c = &d_proj * &(1.0 - &fw.g);
        let d_pre_h = &d_h * &fw.pre_h.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let d_pre_g = &d_g * &fw.g.mapv(|v| v * (1.0 - v));
        let xt = fw.x.t();
        grads.push(xt.dot(&d_pre_h));
        grads.push(d_pre_h.sum_axis(Axis(0)).insert_axis(Axis(0)));
        grads.push(xt.dot(&d_pre_g));
        grads.push(d_pre_g.sum_axis(Axis(0)).insert_axis(Axis(0)));
        grads.push(xt.dot(&d_c));
        grads.extend(enc_grads);
        grads.push(d_wo);
        grads.push(d_bo);
        grads.push(d_tr);
        Ok((loss, grads))
    }

    pub fn loss(&self, x: ArrayView2<f64>, gold: &[Label]) -> Result<f64> {
        self.check_dim(x)?;
        let fw = self.forward(x, None);
        let gold_idx: Vec<usize> = gold.iter().map(|l| l.index()).collect();
        let fb = crf::forward_backward(fw.emissions.view(), self.transitions().view());
        Ok(fb.log_z - crf::path_score(fw.emissions.view(), self.transitions().view(), &gold_idx))
    }

    /// Viterbi labels under the structurally masked transitions, with the
    /// posterior marginal of each chosen label.
    pub fn decode(&self, x: ArrayView2<f64>) -> Result<Tagged> {
        self.check_dim(x)?;
        if x.nrows() == 0 {
            return Ok(Tagged {
                labels: Vec::new(),
                confidence: Vec::new(),
            });
        }
        let em = self.forward(x, None).emissions;
        let tr = crf::masked(self.transitions().view());
        let (path, _) = crf::viterbi(em.view(), tr.view());
        let fb = crf::forward_backward(em.view(), tr.view());
        Ok(Tagged {
            confidence: path.iter().enumerate().map(|(t, &j)| fb.marginals[[t, j]]).collect(),
            labels: path.into_iter().map(Label::from_index).collect(),
        })
    }

    /// Locked dropout mask: one Bernoulli draw per embedding dimension,
    /// shared by every token of the sentence.
    pub fn dropout_mask(&self, rng: &mut ChaCha8Rng) -> Option<Array2<f64>> {
        let p = self.config.dropout;
        if p <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        Some(Array2::from_shape_fn((1, self.config.embedding_dim), |_| {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep
            }
        }))
    }
}

/// Copies an `f32` embedding slice (rows `range`) into an `f64` matrix.
pub fn sentence_matrix(data: &crate::model::EmbeddingMatrix, range: std::ops::Range<usize>) -> Array2<f64> {
    let dim = data.dim();
    let mut out = Array2::zeros((range.len(), dim));
    for (r, t) in range.enumerate() {
        for (c, v) in data.row(t).iter().enumerate() {
            out[[r, c]] = *v as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;

    fn toy(kind: EncoderKind) -> TaggerModel {
        let mut cfg = TaggerConfig::toy(4, 3);
        cfg.encoder = kind;
        cfg.projection_dim = 5;
        cfg.seed = 17;
        let mut m = TaggerModel::new(cfg);
        // non-trivial transitions so their gradient is exercised
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = m.params.tensors.len() - 1;
        m.params.tensors[t].mapv_inplace(|_| rng.random_range(-0.5..0.5));
        m
    }

    fn batch() -> (Array2<f64>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        (x, vec![Label::B, Label::E, Label::O])
    }

    #[test]
    fn full_gradient_check_both_encoders() {
        for kind in [EncoderKind::Mixer { window: 1 }, EncoderKind::BiLstm] {
            let model = toy(kind);
            let (x, gold) = batch();
            let (_, grads) = model.loss_and_grad(x.view(), &gold, None).unwrap();
            let mut params = model.params.clone();
            let err = gradient_check(&mut params, &grads, 1e-5, 1e-6, |p| {
                let m = TaggerModel {
                    params: p.clone(),
                    ..model.clone()
                };
                m.loss(x.view(), &gold).unwrap()
            });
            assert!(err < 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn small_step_does_not_increase_loss() {
        let model = toy(EncoderKind::Mixer { window: 1 });
        let (x, gold) = batch();
        let (before, grads) = model.loss_and_grad(x.view(), &gold, None).unwrap();
        let mut stepped = model.clone();
        for (p, g) in stepped.params.tensors.iter_mut().zip(&grads) {
            *p -= &(g * 1e-4);
        }
        assert!(stepped.loss(x.view(), &gold).unwrap() <= before);
    }

    #[test]
    fn decode_is_well_formed_and_confident() {
        let model = toy(EncoderKind::BiLstm);
        let (x, _) = batch();
        let tagged = model.decode(x.view()).unwrap();
        assert_eq!(tagged.labels.len(), 3);
        assert!(tagged.confidence.iter().all(|c| (0.0..=1.0).contains(c)));
        let d = super::super::bioes::bioes_decode(&tagged.labels, &tagged.confidence);
        assert_eq!(d.diagnostics, 0);
    }

    #[test]
    fn dimension_mismatch() {
        let model = toy(EncoderKind::BiLstm);
        assert!(matches!(
            model.decode(Array2::zeros((2, 3)).view()),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }
}
