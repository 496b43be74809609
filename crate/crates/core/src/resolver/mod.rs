//! From pair scores to entity chains.

pub mod constraints;
pub mod easy_first;
pub mod taxonomy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClusteringStrategy, Document, PipelineConfig};
use crate::pairs::candidate_antecedents;

pub use constraints::{
    extract_cannot_links, global_proper_propagation, proper_key, ConstraintSet, ProperKey, FRENCH_CONJUNCTIONS,
};
pub use easy_first::{cluster_easy_first, EasyFirstOutcome};
pub use taxonomy::{antecedent_error_report, ErrorTaxonomy, MentionOutcome};

/// Candidate scores for one anaphor and the antecedent picked from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntecedentDecision {
    pub anaphor: usize,
    pub antecedent: Option<usize>,
    pub best_score: f64,
    /// (candidate id, score), nearest candidate first.
    pub scores: Vec<(usize, f64)>,
}

/// Highest-scoring candidate; the nearest wins ties. NULL unless the best
/// score is strictly above `threshold`.
pub fn rank_antecedents(anaphor: usize, scores: Vec<(usize, f64)>, threshold: f64) -> AntecedentDecision {
    let mut best: Option<(usize, f64)> = None;
    for &(c, s) in &scores {
        let better = match best {
            None => true,
            Some((bc, bs)) => s > bs || (s == bs && c > bc),
        };
        if better {
            best = Some((c, s));
        }
    }
    let best_score = best.map_or(0.0, |b| b.1);
    AntecedentDecision {
        anaphor,
        antecedent: best.filter(|b| b.1 > threshold).map(|b| b.0),
        best_score,
        scores,
    }
}

/// Union-find over mention ids with path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges two sets; the smaller root becomes the representative.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        keep
    }

    /// Sets as sorted id lists, ordered by their first member.
    pub fn chains(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let r = self.find(i);
            by_root[r].push(i);
        }
        let mut out: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        out.sort_by_key(|c| c[0]);
        out
    }
}

/// Links every anaphor to its chosen antecedent. NULL starts a new entity.
pub fn cluster_left_to_right(n_mentions: usize, decisions: &[AntecedentDecision]) -> Result<Vec<Vec<usize>>> {
    let mut uf = UnionFind::new(n_mentions);
    for d in decisions {
        if let Some(a) = d.antecedent {
            if a >= d.anaphor || d.anaphor >= n_mentions {
                return Err(Error::BadAntecedent {
                    anaphor: d.anaphor,
                    antecedent: a,
                });
            }
            uf.union(a, d.anaphor);
        }
    }
    Ok(uf.chains())
}

/// Decisions that pick the nearest gold antecedent inside the window.
pub fn oracle_decisions(doc: &Document, config: &PipelineConfig) -> Vec<AntecedentDecision> {
    let chain = doc.chain_of_mentions();
    (0..doc.mentions.len())
        .map(|i| {
            let scores = candidate_antecedents(&doc.mentions, i, config)
                .into_iter()
                .map(|j| (j, if chain[j] == chain[i] { 1.0 } else { 0.0 }))
                .collect();
            rank_antecedents(i, scores, config.null_threshold)
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Must-links dropped because they would join a cannot-link pair.
    pub constraint_conflicts: Vec<(usize, usize)>,
    /// Decisions redirected to a lower-ranked candidate by a cannot-link.
    pub redirected: usize,
    /// Decisions turned into NULL because every candidate was blocked.
    pub blocked: usize,
    pub must_links: usize,
    pub cannot_links: usize,
}

/// Chain output written by `resolve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub doc_id: String,
    pub chains: Vec<Vec<usize>>,
    pub strategy: ClusteringStrategy,
    pub diagnostics: Diagnostics,
}
