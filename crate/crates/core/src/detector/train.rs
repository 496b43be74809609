//! Tagger training on one nesting level, with validation-based model
//! selection, and the exact-match mention evaluation it relies on.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bioes::{bioes_decode, bioes_encode, Label};
use super::tagger::{sentence_matrix, TaggerConfig, TaggerModel};
use crate::error::{Error, Result};
use crate::metrics::Prf;
use crate::model::Document;
use crate::nn::{add_into, scale, AdamW, ReduceLrOnPlateau};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerTrainConfig {
    pub batch_sentences: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub max_epochs: usize,
    pub locked_dropout: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TaggerTrainConfig {
    fn default() -> Self {
        TaggerTrainConfig {
            batch_sentences: 16,
            learning_rate: 1.4e-4,
            weight_decay: 1e-5,
            plateau_factor: 0.5,
            plateau_patience: 2,
            max_epochs: 20,
            locked_dropout: 0.5,
            train_fraction: 0.85,
            seed: 0,
        }
    }
}

impl TaggerTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_sentences == 0 {
            return Err(Error::Config("batch_sentences must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Config("learning rate must be positive, weight decay non-negative".into()));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Config("plateau factor must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.locked_dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config("train fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Exact-match counts between predicted and gold spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpanCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl SpanCounts {
    pub fn add(&mut self, other: SpanCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    /// P/R/F1; with nothing predicted and nothing to find, all are 1.
    pub fn prf(&self) -> Prf {
        let (tp, fp, fn_) = (
            self.true_positives as f64,
            self.false_positives as f64,
            self.false_negatives as f64,
        );
        if tp + fp + fn_ == 0.0 {
            return Prf::new(1.0, 1.0);
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        Prf::new(p, r)
    }
}

pub fn span_counts(predicted: &[(usize, usize)], gold: &[(usize, usize)]) -> SpanCounts {
    use std::collections::HashSet;
    let p: HashSet<_> = predicted.iter().collect();
    let g: HashSet<_> = gold.iter().collect();
    let tp = p.intersection(&g).count();
    SpanCounts {
        true_positives: tp,
        false_positives: p.len() - tp,
        false_negatives: g.len() - tp,
    }
}

/// Exact span match between predicted and gold mentions of one document.
pub fn evaluate_mentions(predicted: &[(usize, usize)], gold: &[(usize, usize)]) -> Prf {
    span_counts(predicted, gold).prf()
}

/// One training sentence: its embedding rows and gold tags.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSentence {
    pub x: Array2<f64>,
    pub labels: Vec<Label>,
}

impl LabeledSentence {
    pub fn spans(&self) -> Vec<(usize, usize)> {
        bioes_decode(&self.labels, &vec![1.0; self.labels.len()])
            .spans
            .into_iter()
            .map(|(s, e, _)| (s, e))
            .collect()
    }
}

/// Sentences of every document tagged with the mentions of one nesting
/// level. Mentions crossing a sentence boundary cannot be tagged and are
/// skipped.
pub fn level_sentences(corpus: &[Document], level: usize) -> Result<Vec<LabeledSentence>> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for doc in corpus {
        let emb = doc.embeddings()?;
        for range in doc.sentences() {
            let spans: Vec<(usize, usize)> = doc
                .mentions
                .iter()
                .filter(|m| m.nesting_level == level)
                .filter(|m| m.start < range.end && m.end >= range.start)
                .filter_map(|m| {
                    if m.start >= range.start && m.end < range.end {
                        Some((m.start - range.start, m.end - range.start))
                    } else {
                        skipped += 1;
                        None
                    }
                })
                .collect();
            let labels = bioes_encode(&spans, range.len())?;
            out.push(LabeledSentence {
                x: sentence_matrix(emb, range),
                labels,
            });
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} mentions cross sentence boundaries and were not tagged");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_f1: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedTagger {
    pub model: TaggerModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_validation_f1: f64,
}

pub fn write_training_log(out: &mut impl Write, log: &[EpochLog]) -> Result<()> {
    for entry in log {
        let line = serde_json::to_string(entry).map_err(|e| Error::Training(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::Training(e.to_string()))?;
    }
    Ok(())
}

/// Exact-match counts of `model` over labelled sentences.
pub fn sentence_counts(model: &TaggerModel, sentences: &[LabeledSentence]) -> Result<SpanCounts> {
    let per: Vec<SpanCounts> = sentences
        .par_iter()
        .map(|s| {
            let tagged = model.decode(s.x.view())?;
            let pred: Vec<(usize, usize)> = bioes_decode(&tagged.labels, &tagged.confidence)
                .spans
                .into_iter()
                .map(|(a, b, _)| (a, b))
                .collect();
            Ok(span_counts(&pred, &s.spans()))
        })
        .collect::<Result<_>>()?;
    let mut total = SpanCounts::default();
    for c in per {
        total.add(c);
    }
    Ok(total)
}

/// Trains the tagger for mentions at `level` of `corpus`.
pub fn train_tagger(
    corpus: &[Document],
    level: usize,
    mut model_config: TaggerConfig,
    config: &TaggerTrainConfig,
) -> Result<TrainedTagger> {
    let sentences = level_sentences(corpus, level)?;
    if !sentences.iter().any(|s| s.labels.iter().any(|&l| l != Label::O)) {
        return Err(Error::Training(format!("no mentions at nesting level {level}")));
    }
    model_config.level = level;
    train_on_sentences(&sentences, model_config, config)
}

pub fn train_on_sentences(
    sentences: &[LabeledSentence],
    mut model_config: TaggerConfig,
    config: &TaggerTrainConfig,
) -> Result<TrainedTagger> {
    config.validate()?;
    if sentences.is_empty() {
        return Err(Error::Training("no training sentences".into()));
    }
    model_config.dropout = config.locked_dropout;
    model_config.seed = config.seed;
    let mut model = TaggerModel::new(model_config);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.shuffle(&mut rng);
    let n_train = ((sentences.len() as f64 * config.train_fraction).round() as usize).clamp(1, sentences.len());
    let train_idx: Vec<usize> = order[..n_train].to_vec();
    let valid: Vec<LabeledSentence> = if n_train < sentences.len() {
        order[n_train..].iter().map(|&i| sentences[i].clone()).collect()
    } else {
        train_idx.iter().map(|&i| sentences[i].clone()).collect()
    };

    let mut best = model.clone();
    let mut best_f1 = sentence_counts(&model, &valid)?.prf().f1;
    let mut best_epoch = 0;
    let mut log = Vec::new();
    let mut opt = AdamW::new(&model.params, config.learning_rate, config.weight_decay);
    let mut plateau = ReduceLrOnPlateau::new(config.plateau_factor, config.plateau_patience);

    for epoch in 1..=config.max_epochs {
        let mut epoch_order = train_idx.clone();
        epoch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in epoch_order.chunks(config.batch_sentences) {
            // masks are drawn up front so results do not depend on threads
            let masks: Vec<Option<Array2<f64>>> = batch.iter().map(|_| model.dropout_mask(&mut rng)).collect();
            let results: Vec<(f64, Vec<Array2<f64>>)> = batch
                .par_iter()
                .zip(masks.par_iter())
                .map(|(&i, mask)| {
                    let s = &sentences[i];
                    model.loss_and_grad(s.x.view(), &s.labels, mask.as_ref())
                })
                .collect::<Result<_>>()?;
            let mut grads = model.params.zeros_like();
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                add_into(&mut grads, g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("tagger loss at epoch {epoch}")));
            }
            scale(&mut grads, 1.0 / batch.len() as f64);
            opt.step(&mut model.params, &grads);
            epoch_loss += batch_loss;
        }
        let f1 = sentence_counts(&model, &valid)?.prf().f1;
        let entry = EpochLog {
            epoch,
            train_loss: epoch_loss / train_idx.len() as f64,
            validation_f1: f1,
            learning_rate: opt.lr,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} validation F1 {:.4} lr {:.2e}",
            entry.train_loss,
            f1,
            opt.lr
        );
        log.push(entry);
        if f1 > best_f1 {
            best_f1 = f1;
            best = model.clone();
            best_epoch = epoch;
        }
        opt.lr = plateau.observe(f1, opt.lr);
    }
    Ok(TrainedTagger {
        model: best,
        log,
        best_epoch,
        best_validation_f1: best_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn exact_match_counts() {
        let gold = [(0, 0), (2, 4)];
        assert_eq!(evaluate_mentions(&gold, &gold), Prf::new(1.0, 1.0));
        let p = evaluate_mentions(&[(0, 0), (2, 3)], &gold);
        assert!((p.precision - 0.5).abs() < 1e-12 && (p.recall - 0.5).abs() < 1e-12);
        assert!((p.f1 - 0.5).abs() < 1e-12);
    }

    /// Sentences where capitalised tokens (dimension 0 set) are mentions.
    fn caps(n_sent: usize, seed: u64) -> Vec<LabeledSentence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_sent)
            .map(|_| {
                let n = rng.random_range(3..9);
                let mut x = Array2::zeros((n, 4));
                let mut labels = vec![Label::O; n];
                for t in 0..n {
                    let cap = rng.random::<f64>() < 0.3;
                    x[[t, 0]] = if cap { 1.0 } else { -1.0 };
                    for d in 1..4 {
                        x[[t, d]] = rng.random_range(-0.5..0.5);
                    }
                    if cap {
                        labels[t] = Label::S;
                    }
                }
                LabeledSentence { x, labels }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let data = caps(20, 1);
        let cfg = TaggerTrainConfig {
            max_epochs: 0,
            ..Default::default()
        };
        let trained = train_on_sentences(&data, TaggerConfig::toy(4, 4), &cfg).unwrap();
        assert!(trained.log.is_empty());
        assert_eq!(trained.best_epoch, 0);
        let fresh = TaggerModel::new(TaggerConfig {
            dropout: cfg.locked_dropout,
            ..TaggerConfig::toy(4, 4)
        });
        assert_eq!(trained.model.params, fresh.params);
    }

    #[test]
    fn learns_capitalisation_quickly() {
        let data = caps(120, 2);
        let cfg = TaggerTrainConfig {
            learning_rate: 2e-2,
            max_epochs: 8,
            locked_dropout: 0.0,
            ..Default::default()
        };
        let trained = train_on_sentences(&data, TaggerConfig::toy(4, 4), &cfg).unwrap();
        assert!(trained.best_validation_f1 > 0.95, "{:?}", trained.log);
        let mut buf = Vec::new();
        write_training_log(&mut buf, &trained.log).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 8);
    }

    #[test]
    fn single_thread_runs_are_identical() {
        let data = caps(30, 3);
        let cfg = TaggerTrainConfig {
            learning_rate: 1e-2,
            max_epochs: 2,
            ..Default::default()
        };
        let a = train_on_sentences(&data, TaggerConfig::toy(4, 4), &cfg).unwrap();
        let b = train_on_sentences(&data, TaggerConfig::toy(4, 4), &cfg).unwrap();
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.log, b.log);
    }
}
