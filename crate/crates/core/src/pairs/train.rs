//! Labelled pair extraction, pair-scorer training and evaluation.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{candidate_antecedents, encode_pair, PairFeatureLayout};
use super::scorer::{PairScorerConfig, PairScorerModel};
use crate::error::{Error, Result};
use crate::metrics::Prf;
use crate::model::{Document, PipelineConfig};
use crate::nn::{add_into, scale, AdamW};

/// Encoded (candidate, anaphor) pairs with gold labels.
#[derive(Debug, Clone, Default)]
pub struct PairDataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    /// (document index, antecedent id, anaphor id) per row.
    pub keys: Vec<(usize, usize, usize)>,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&y| y > 0.5).count()
    }

    fn rows(&self, idx: &[usize]) -> (Array2<f64>, Vec<f64>) {
        let x = self.x.select(ndarray::Axis(0), idx);
        (x, idx.iter().map(|&i| self.y[i]).collect())
    }
}

/// All in-window candidate pairs of one document, labelled by gold chain.
pub fn document_pairs(
    doc: &Document,
    layout: &PairFeatureLayout,
    config: &PipelineConfig,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<(usize, usize)>)> {
    let chain = doc.chain_of_mentions();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut keys = Vec::new();
    for i in 0..doc.mentions.len() {
        for j in candidate_antecedents(&doc.mentions, i, config) {
            rows.push(encode_pair(&doc.mentions[j], &doc.mentions[i], doc, layout)?);
            labels.push(if chain[i] == chain[j] { 1.0 } else { 0.0 });
            keys.push((j, i));
        }
    }
    Ok((rows, labels, keys))
}

pub fn collect_pairs(corpus: &[Document], layout: &PairFeatureLayout, config: &PipelineConfig) -> Result<PairDataset> {
    let per_doc: Vec<_> = corpus
        .par_iter()
        .map(|d| document_pairs(d, layout, config))
        .collect::<Result<_>>()?;
    let n: usize = per_doc.iter().map(|p| p.1.len()).sum();
    let dim = layout.total_dim();
    let mut x = Array2::zeros((n, dim));
    let mut y = Vec::with_capacity(n);
    let mut keys = Vec::with_capacity(n);
    let mut r = 0;
    for (d, (rows, labels, k)) in per_doc.into_iter().enumerate() {
        for row in rows {
            x.row_mut(r).assign(&ndarray::ArrayView1::from(&row));
            r += 1;
        }
        y.extend(labels);
        keys.extend(k.into_iter().map(|(a, b)| (d, a, b)));
    }
    Ok(PairDataset { x, y, keys })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairTrainConfig {
    pub batch_pairs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub train_fraction: f64,
    pub max_epochs: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for PairTrainConfig {
    fn default() -> Self {
        PairTrainConfig {
            batch_pairs: 16_000,
            learning_rate: 1.4e-4,
            weight_decay: 1e-5,
            train_fraction: 0.85,
            max_epochs: 20,
            hidden: 1900,
            dropout: 0.6,
            seed: 0,
        }
    }
}

impl PairTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_pairs == 0 || self.hidden == 0 {
            return Err(Error::Config("batch_pairs and hidden must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Config("learning rate must be positive, weight decay non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config("train fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedPairScorer {
    pub model: PairScorerModel,
    pub log: Vec<PairEpochLog>,
    pub best_epoch: usize,
}

/// Gold-mention pairs of `corpus` are extracted with the windows of
/// `pipeline` and the scorer trained on them.
pub fn train_pair_scorer(
    corpus: &[Document],
    pipeline: &PipelineConfig,
    config: &PairTrainConfig,
) -> Result<TrainedPairScorer> {
    let layout = PairFeatureLayout::new(pipeline.embedding_dim);
    let data = collect_pairs(corpus, &layout, pipeline)?;
    train_on_pairs(&data, layout, config)
}

pub fn train_on_pairs(data: &PairDataset, layout: PairFeatureLayout, config: &PairTrainConfig) -> Result<TrainedPairScorer> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Training("no mention pairs to train on".into()));
    }
    let mut model = PairScorerModel::new(PairScorerConfig {
        layout,
        hidden: config.hidden,
        dropout: config.dropout,
        seed: config.seed,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9a1f);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_train = ((data.len() as f64 * config.train_fraction).round() as usize).clamp(1, data.len());
    let train: Vec<usize> = order[..n_train].to_vec();
    let valid: Vec<usize> = if n_train < data.len() {
        order[n_train..].to_vec()
    } else {
        train.clone()
    };
    let (vx, vy) = data.rows(&valid);
    let validation_loss = |m: &PairScorerModel| -> Result<f64> { Ok(m.loss(vx.view(), &vy)? / vy.len() as f64) };

    let mut opt = AdamW::new(&model.params, config.learning_rate, config.weight_decay);
    let mut best = model.clone();
    let mut best_loss = validation_loss(&model)?;
    let mut best_epoch = 0;
    let mut log = Vec::new();
    const CHUNK: usize = 512;
    for epoch in 1..=config.max_epochs {
        let mut epoch_order = train.clone();
        epoch_order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in epoch_order.chunks(config.batch_pairs) {
            let (bx, by) = data.rows(batch);
            let masks = model.dropout_masks(batch.len(), &mut rng);
            let parts: Vec<(f64, Vec<Array2<f64>>)> = (0..batch.len().div_ceil(CHUNK))
                .into_par_iter()
                .map(|c| {
                    let lo = c * CHUNK;
                    let hi = (lo + CHUNK).min(batch.len());
                    let m: Vec<Option<Array2<f64>>> = masks
                        .iter()
                        .map(|m| m.as_ref().map(|m| m.slice(s![lo..hi, ..]).to_owned()))
                        .collect();
                    model.loss_and_grad(bx.slice(s![lo..hi, ..]), &by[lo..hi], &m)
                })
                .collect::<Result<_>>()?;
            let mut grads = model.params.zeros_like();
            let mut loss = 0.0;
            for (l, g) in &parts {
                loss += l;
                add_into(&mut grads, g);
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("pair loss at epoch {epoch}")));
            }
            scale(&mut grads, 1.0 / batch.len() as f64);
            opt.step(&mut model.params, &grads);
            total += loss;
        }
        let vl = validation_loss(&model)?;
        log::info!("pair epoch {epoch}: train {:.4} validation {:.4}", total / train.len() as f64, vl);
        log.push(PairEpochLog {
            epoch,
            train_loss: total / train.len() as f64,
            validation_loss: vl,
        });
        if vl < best_loss {
            best_loss = vl;
            best = model.clone();
            best_epoch = epoch;
        }
    }
    Ok(TrainedPairScorer {
        model: best,
        log,
        best_epoch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBucket {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub errors: usize,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub class0: Prf,
    pub class1: Prf,
    pub support0: usize,
    pub support1: usize,
    pub accuracy: f64,
    /// Error rate per predicted-score decile.
    pub buckets: Vec<ScoreBucket>,
}

/// Scores above 0.5 count as coreferent; exactly 0.5 does not.
pub fn evaluate_pair_scores(scores: &[f64], labels: &[f64]) -> PairEvaluation {
    let mut conf = [[0usize; 2]; 2];
    let mut buckets: Vec<ScoreBucket> = (0..10)
        .map(|k| ScoreBucket {
            lower: k as f64 / 10.0,
            upper: (k + 1) as f64 / 10.0,
            count: 0,
            errors: 0,
            error_rate: 0.0,
        })
        .collect();
    for (&s, &y) in scores.iter().zip(labels) {
        let gold = usize::from(y > 0.5);
        let pred = usize::from(s > 0.5);
        conf[gold][pred] += 1;
        let b = ((s * 10.0).floor() as usize).min(9);
        buckets[b].count += 1;
        buckets[b].errors += usize::from(gold != pred);
    }
    for b in &mut buckets {
        b.error_rate = if b.count > 0 { b.errors as f64 / b.count as f64 } else { 0.0 };
    }
    let class = |c: usize| {
        let tp = conf[c][c] as f64;
        let predicted = (conf[0][c] + conf[1][c]) as f64;
        let actual = (conf[c][0] + conf[c][1]) as f64;
        Prf::new(
            if predicted > 0.0 { tp / predicted } else { 0.0 },
            if actual > 0.0 { tp / actual } else { 0.0 },
        )
    };
    let n = scores.len().max(1) as f64;
    PairEvaluation {
        class0: class(0),
        class1: class(1),
        support0: conf[0][0] + conf[0][1],
        support1: conf[1][0] + conf[1][1],
        accuracy: (conf[0][0] + conf[1][1]) as f64 / n,
        buckets,
    }
}

pub fn evaluate_pair_scorer(model: &PairScorerModel, data: &PairDataset) -> Result<PairEvaluation> {
    let scores = model.score(data.x.view())?;
    Ok(evaluate_pair_scores(&scores, &data.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairs::features::{Segment, EXACT_MATCH_OFFSET};
    use rand::Rng;

    fn separable(n: usize, layout: &PairFeatureLayout, seed: u64) -> PairDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flag = layout.range(Segment::PairFeatures).start + EXACT_MATCH_OFFSET;
        let mut x = Array2::from_shape_fn((n, layout.total_dim()), |_| rng.random_range(-0.5..0.5));
        let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<f64>() < 0.3))).collect();
        for (i, &v) in y.iter().enumerate() {
            x[[i, flag]] = v;
        }
        PairDataset {
            x,
            keys: vec![(0, 0, 0); n],
            y,
        }
    }

    #[test]
    fn learns_exact_match_rule() {
        let layout = PairFeatureLayout::new(4);
        let data = separable(3000, &layout, 1);
        let cfg = PairTrainConfig {
            batch_pairs: 64,
            learning_rate: 3e-3,
            weight_decay: 1e-2,
            hidden: 16,
            dropout: 0.2,
            max_epochs: 10,
            ..Default::default()
        };
        let trained = train_on_pairs(&data, layout.clone(), &cfg).unwrap();
        let test = separable(400, &layout, 2);
        let eval = evaluate_pair_scorer(&trained.model, &test).unwrap();
        assert!(eval.accuracy >= 0.99, "{eval:?}");
    }

    #[test]
    fn repeated_positive_pair_climbs_to_one() {
        let layout = PairFeatureLayout::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let row = Array2::from_shape_fn((1, layout.total_dim()), |_| rng.random_range(-1.0..1.0));
        let data = PairDataset {
            x: row.clone(),
            y: vec![1.0],
            keys: vec![(0, 0, 0)],
        };
        let mut cfg = PairTrainConfig {
            hidden: 8,
            dropout: 0.0,
            learning_rate: 1e-2,
            max_epochs: 1,
            ..Default::default()
        };
        let mut last = 0.0;
        for epochs in 1..=10 {
            cfg.max_epochs = epochs * 5;
            let m = train_on_pairs(&data, layout.clone(), &cfg).unwrap().model;
            let s = m.score(row.view()).unwrap()[0];
            assert!(s >= last, "{s} < {last}");
            last = s;
        }
        assert!(last > 0.99, "{last}");
    }

    #[test]
    fn evaluation_edge_cases() {
        let labels = [1.0, 0.0, 1.0, 0.0];
        let perfect = evaluate_pair_scores(&[0.9, 0.1, 0.8, 0.2], &labels);
        assert_eq!(perfect.class0.f1, 1.0);
        assert_eq!(perfect.class1.f1, 1.0);
        assert!(perfect.buckets.iter().all(|b| b.errors == 0));
        let flat = evaluate_pair_scores(&[0.5; 4], &labels);
        assert_eq!(flat.class1.recall, 0.0);
        assert_eq!(flat.class0.recall, 1.0);
        assert_eq!(flat.buckets[5].count, 4);
        assert_eq!(flat.buckets[5].errors, 2);
        assert_eq!(evaluate_pair_scores(&[1.0], &[1.0]).buckets[9].count, 1);
    }

    #[test]
    fn noisy_boundary_errors_peak_mid_range() {
        // label flips are likeliest where the score is near 0.5
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..20_000 {
            let s: f64 = rng.random();
            let p_true = 0.5 + (s - 0.5).signum() * (s - 0.5).abs().sqrt() * 0.7;
            scores.push(s);
            labels.push(f64::from(u8::from(rng.random::<f64>() < p_true)));
        }
        let eval = evaluate_pair_scores(&scores, &labels);
        let peak = eval
            .buckets
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error_rate.total_cmp(&b.1.error_rate))
            .unwrap()
            .0;
        assert!((4..=5).contains(&peak), "{:?}", eval.buckets);
    }

    #[test]
    fn empty_pair_set_is_an_error() {
        let layout = PairFeatureLayout::new(2);
        let data = PairDataset {
            x: Array2::zeros((0, layout.total_dim())),
            ..Default::default()
        };
        assert!(matches!(
            train_on_pairs(&data, layout, &PairTrainConfig::default()),
            Err(Error::Training(_))
        ));
    }
}
