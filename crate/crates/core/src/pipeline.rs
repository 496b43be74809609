//! End-to-end resolution of one document: candidate scoring, antecedent
//! ranking and clustering with the configured strategy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::CorefCounts;
use crate::model::{ClusteringStrategy, Document, PipelineConfig};
use crate::pairs::{candidate_antecedents, encode_pair, PairScorerModel};
use crate::resolver::{
    cluster_easy_first, cluster_left_to_right, extract_cannot_links, global_proper_propagation, rank_antecedents,
    AntecedentDecision, ChainOutput, ConstraintSet, Diagnostics, FRENCH_CONJUNCTIONS,
};

/// Anything that scores (antecedent, anaphor) pairs of a document.
pub trait PairScore: Sync {
    fn score_pairs(&self, doc: &Document, pairs: &[(usize, usize)]) -> Result<Vec<f64>>;
}

impl PairScore for PairScorerModel {
    fn score_pairs(&self, doc: &Document, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        let layout = &self.config.layout;
        let mut x = ndarray::Array2::zeros((pairs.len(), layout.total_dim()));
        for (r, &(a, b)) in pairs.iter().enumerate() {
            let row = encode_pair(&doc.mentions[a], &doc.mentions[b], doc, layout)?;
            x.row_mut(r).assign(&ndarray::ArrayView1::from(&row));
        }
        self.score(x.view())
    }
}

/// Scores 1 for pairs in the same gold chain and 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl PairScore for OracleScorer {
    fn score_pairs(&self, doc: &Document, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        let chain = doc.chain_of_mentions();
        Ok(pairs
            .iter()
            .map(|&(a, b)| if chain[a] == chain[b] { 1.0 } else { 0.0 })
            .collect())
    }
}

/// Gold-derived scores with seeded noise: coreferent pairs land in
/// (0.5 + margin, 1], others in [0, 0.5 - margin), and a fraction
/// `error_rate` of pairs is moved to the wrong side. Scores are a pure
/// function of (seed, document, pair).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyOracleScorer {
    pub error_rate: f64,
    pub margin: f64,
    pub seed: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl PairScore for NoisyOracleScorer {
    fn score_pairs(&self, doc: &Document, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        let chain = doc.chain_of_mentions();
        let doc_hash = fnv1a(doc.doc_id.as_bytes()) ^ self.seed;
        Ok(pairs
            .iter()
            .map(|&(a, b)| {
                let mut rng = ChaCha8Rng::seed_from_u64(doc_hash ^ ((a as u64) << 32 | b as u64).rotate_left(17));
                let correct = chain[a] == chain[b];
                let flip = rng.random::<f64>() < self.error_rate;
                let span = 0.5 - self.margin;
                let u = self.margin + rng.random::<f64>() * span;
                if correct != flip {
                    0.5 + u
                } else {
                    0.5 - u
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolveConfig {
    pub pipeline: PipelineConfig,
    pub conjunctions: Vec<String>,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        ResolveConfig {
            pipeline: PipelineConfig::default(),
            conjunctions: FRENCH_CONJUNCTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub chains: Vec<Vec<usize>>,
    pub decisions: Vec<AntecedentDecision>,
    pub constraints: ConstraintSet,
    pub strategy: ClusteringStrategy,
    pub diagnostics: Diagnostics,
}

impl Resolution {
    pub fn output(&self, doc_id: &str) -> ChainOutput {
        ChainOutput {
            doc_id: doc_id.to_string(),
            chains: self.chains.clone(),
            strategy: self.strategy,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// Scores all in-window candidates and ranks them.
pub fn decide(doc: &Document, scorer: &dyn PairScore, config: &PipelineConfig) -> Result<Vec<AntecedentDecision>> {
    let candidates: Vec<Vec<usize>> = (0..doc.mentions.len())
        .map(|i| candidate_antecedents(&doc.mentions, i, config))
        .collect();
    let pairs: Vec<(usize, usize)> = candidates
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |&j| (j, i)))
        .collect();
    let scores = scorer.score_pairs(doc, &pairs)?;
    if scores.len() != pairs.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            got: scores.len(),
        });
    }
    let mut it = scores.into_iter();
    Ok(candidates
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let scored = c.into_iter().map(|j| (j, it.next().unwrap())).collect();
            rank_antecedents(i, scored, config.null_threshold)
        })
        .collect())
}

pub fn resolve_document(doc: &Document, scorer: &dyn PairScore, config: &ResolveConfig) -> Result<Resolution> {
    config.pipeline.validate()?;
    let p = &config.pipeline;
    let decisions = decide(doc, scorer, p)?;
    let n = doc.mentions.len();
    match p.clustering_strategy {
        ClusteringStrategy::LeftToRight => Ok(Resolution {
            chains: cluster_left_to_right(n, &decisions)?,
            decisions,
            constraints: ConstraintSet::default(),
            strategy: ClusteringStrategy::LeftToRight,
            diagnostics: Diagnostics::default(),
        }),
        ClusteringStrategy::EasyFirstGlobal => {
            let conj: Vec<&str> = config.conjunctions.iter().map(String::as_str).collect();
            let constraints = ConstraintSet {
                must_link: global_proper_propagation(doc, &decisions, p.null_threshold),
                cannot_link: extract_cannot_links(doc, &conj),
            };
            let out = cluster_easy_first(n, &decisions, &constraints, p.null_threshold)?;
            Ok(Resolution {
                chains: out.chains,
                decisions,
                constraints,
                strategy: ClusteringStrategy::EasyFirstGlobal,
                diagnostics: out.diagnostics,
            })
        }
    }
}

pub fn resolve_corpus(corpus: &[Document], scorer: &dyn PairScore, config: &ResolveConfig) -> Result<Vec<Resolution>> {
    corpus.par_iter().map(|d| resolve_document(d, scorer, config)).collect()
}

/// Chains as lists of (start, end) spans, so partitions over different
/// mention sets can be compared.
pub fn span_chains(doc: &Document, chains: &[Vec<usize>]) -> Vec<Vec<(usize, usize)>> {
    chains
        .iter()
        .map(|c| c.iter().map(|&m| doc.mentions[m].span()).collect())
        .collect()
}

/// Metric counts of predicted chains over `predicted` against the gold
/// chains of `gold`, matched by span.
pub fn score_chains(gold: &Document, predicted: &Document, chains: &[Vec<usize>]) -> CorefCounts {
    let g = span_chains(gold, &gold.partition());
    let p = span_chains(predicted, chains);
    CorefCounts::of(&g, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::smith_sentence;

    #[test]
    fn oracle_gets_smith_right_with_both_strategies() {
        let doc = smith_sentence();
        for strategy in [ClusteringStrategy::LeftToRight, ClusteringStrategy::EasyFirstGlobal] {
            let mut cfg = ResolveConfig::default();
            cfg.pipeline.clustering_strategy = strategy;
            cfg.conjunctions = vec!["and".into()];
            let r = resolve_document(&doc, &OracleScorer, &cfg).unwrap();
            let report = score_chains(&doc, &doc, &r.chains).report();
            assert!((report.conll_f1 - 1.0).abs() < 1e-12, "{strategy:?}");
            if strategy == ClusteringStrategy::EasyFirstGlobal {
                assert_eq!(r.constraints.cannot_link.len(), 1);
            }
        }
    }

    #[test]
    fn noisy_oracle_is_deterministic_and_calibrated() {
        let doc = smith_sentence();
        let pairs: Vec<(usize, usize)> = (0..8).flat_map(|b| (0..b).map(move |a| (a, b))).collect();
        let clean = NoisyOracleScorer {
            error_rate: 0.0,
            margin: 0.1,
            seed: 3,
        };
        let s1 = clean.score_pairs(&doc, &pairs).unwrap();
        assert_eq!(s1, clean.score_pairs(&doc, &pairs).unwrap());
        let gold = OracleScorer.score_pairs(&doc, &pairs).unwrap();
        for (s, g) in s1.iter().zip(&gold) {
            assert_eq!(*s > 0.5, *g > 0.5);
            assert!((*s - 0.5).abs() >= 0.1);
        }
        let all_wrong = NoisyOracleScorer { error_rate: 1.0, ..clean };
        for (s, g) in all_wrong.score_pairs(&doc, &pairs).unwrap().iter().zip(&gold) {
            assert_ne!(*s > 0.5, *g > 0.5);
        }
    }

    #[test]
    fn model_scorer_runs_on_documents() {
        use crate::model::EmbeddingMatrix;
        use crate::pairs::{PairFeatureLayout, PairScorerConfig};
        use std::sync::Arc;
        let mut doc = smith_sentence();
        let n = doc.n_tokens();
        doc.attach_embeddings(Arc::new(EmbeddingMatrix::zeros(n, 4)), 4).unwrap();
        let mut cfg = PairScorerConfig::new(PairFeatureLayout::new(4));
        cfg.hidden = 5;
        let model = PairScorerModel::new(cfg);
        let r = resolve_document(&doc, &model, &ResolveConfig::default()).unwrap();
        let covered: usize = r.chains.iter().map(Vec::len).sum();
        assert_eq!(covered, doc.mentions.len());
    }
}
