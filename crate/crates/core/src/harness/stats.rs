//! Corpus statistics and nearest-antecedent distance distributions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Document, MentionCategory, MAX_NESTING_LEVEL};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub tokens: usize,
    pub mentions: usize,
    pub chains: usize,
    pub mentions_per_doc: f64,
    pub chains_per_doc: f64,
    /// Share of mentions alone in their chain.
    pub singleton_ratio: f64,
    /// Over chains with at least two mentions.
    pub mentions_per_chain_avg: f64,
    pub mentions_per_chain_max: usize,
    pub entity_spread_avg: f64,
    pub entity_spread_max: usize,
    /// Set when no chain has two mentions, so spreads are reported as 0.
    pub spread_undefined: bool,
    /// Share of mentions at nesting level 0, 1, 2.
    pub nesting_ratios: Vec<f64>,
    pub plural_ratio: f64,
    pub pronoun_ratio: f64,
    pub common_ratio: f64,
    pub proper_ratio: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn corpus_stats(corpus: &[Document]) -> CorpusStats {
    let mut s = CorpusStats {
        documents: corpus.len(),
        ..Default::default()
    };
    let mut singletons = 0;
    let mut multi_chains = 0;
    let mut multi_mentions = 0;
    let mut spread_sum = 0usize;
    let mut levels = vec![0usize; MAX_NESTING_LEVEL + 1];
    let mut plural = 0;
    let mut cats: BTreeMap<MentionCategory, usize> = BTreeMap::new();
    for d in corpus {
        s.tokens += d.n_tokens();
        s.mentions += d.mentions.len();
        s.chains += d.chains.len();
        for m in &d.mentions {
            if m.nesting_level < levels.len() {
                levels[m.nesting_level] += 1;
            }
            plural += usize::from(m.is_plural);
            *cats.entry(m.category).or_default() += 1;
        }
        for c in &d.chains {
            if c.mention_ids.len() < 2 {
                singletons += c.mention_ids.len();
                continue;
            }
            multi_chains += 1;
            multi_mentions += c.mention_ids.len();
            s.mentions_per_chain_max = s.mentions_per_chain_max.max(c.mention_ids.len());
            let first = c.mention_ids.iter().map(|&m| d.mentions[m].start).min().unwrap();
            let last = c.mention_ids.iter().map(|&m| d.mentions[m].start).max().unwrap();
            spread_sum += last - first;
            s.entity_spread_max = s.entity_spread_max.max(last - first);
        }
    }
    s.mentions_per_doc = ratio(s.mentions, s.documents);
    s.chains_per_doc = ratio(s.chains, s.documents);
    s.singleton_ratio = ratio(singletons, s.mentions);
    s.mentions_per_chain_avg = ratio(multi_mentions, multi_chains);
    s.entity_spread_avg = ratio(spread_sum, multi_chains);
    s.spread_undefined = multi_chains == 0;
    s.nesting_ratios = levels.iter().map(|&l| ratio(l, s.mentions)).collect();
    s.plural_ratio = ratio(plural, s.mentions);
    let cat = |c| ratio(cats.get(&c).copied().unwrap_or(0), s.mentions);
    s.pronoun_ratio = cat(MentionCategory::Pronoun);
    s.common_ratio = cat(MentionCategory::Common);
    s.proper_ratio = cat(MentionCategory::Proper);
    s
}

impl CorpusStats {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("statistic\tvalue\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k}\t{v}");
        };
        row("documents", self.documents.to_string());
        row("tokens", self.tokens.to_string());
        row("mentions", self.mentions.to_string());
        row("chains", self.chains.to_string());
        row("mentions_per_doc", format!("{:.2}", self.mentions_per_doc));
        row("chains_per_doc", format!("{:.2}", self.chains_per_doc));
        row("singleton_ratio", format!("{:.4}", self.singleton_ratio));
        row("mentions_per_chain_avg", format!("{:.2}", self.mentions_per_chain_avg));
        row("mentions_per_chain_max", self.mentions_per_chain_max.to_string());
        row("entity_spread_avg", format!("{:.2}", self.entity_spread_avg));
        row("entity_spread_max", self.entity_spread_max.to_string());
        row("spread_undefined", self.spread_undefined.to_string());
        for (l, r) in self.nesting_ratios.iter().enumerate() {
            row(&format!("nesting_level_{l}_ratio"), format!("{r:.4}"));
        }
        row("plural_ratio", format!("{:.4}", self.plural_ratio));
        row("pronoun_ratio", format!("{:.4}", self.pronoun_ratio));
        row("common_ratio", format!("{:.4}", self.common_ratio));
        row("proper_ratio", format!("{:.4}", self.proper_ratio));
        out
    }
}

pub const DISTANCE_PERCENTILES: [u32; 5] = [50, 90, 95, 99, 100];

/// Nearest-rank percentile of sorted values.
pub fn nearest_rank(sorted: &[usize], pct: u32) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((pct as f64 / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub category: MentionCategory,
    pub count: usize,
    /// Aligned with [`DISTANCE_PERCENTILES`]; empty when `count` is 0.
    pub percentiles: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    pub rows: Vec<DistanceRow>,
    /// Sorted raw distances per category.
    #[serde(skip)]
    pub distances: BTreeMap<MentionCategory, Vec<usize>>,
}

/// Mention-id distance from every non-first chain mention to the previous
/// mention of its chain, by category of the later mention.
pub fn antecedent_distances(doc: &Document) -> Vec<(MentionCategory, usize)> {
    let mut out = Vec::new();
    for c in &doc.chains {
        let mut ids = c.mention_ids.clone();
        ids.sort_unstable();
        for w in ids.windows(2) {
            out.push((doc.mentions[w[1]].category, w[1] - w[0]));
        }
    }
    out
}

pub fn antecedent_distance_distribution(corpus: &[Document]) -> DistanceDistribution {
    let mut distances: BTreeMap<MentionCategory, Vec<usize>> =
        MentionCategory::ALL.iter().map(|&c| (c, Vec::new())).collect();
    for d in corpus {
        for (c, k) in antecedent_distances(d) {
            distances.get_mut(&c).unwrap().push(k);
        }
    }
    let rows = distances
        .iter_mut()
        .map(|(&category, v)| {
            v.sort_unstable();
            DistanceRow {
                category,
                count: v.len(),
                percentiles: DISTANCE_PERCENTILES
                    .iter()
                    .filter_map(|&p| nearest_rank(v, p))
                    .collect(),
            }
        })
        .collect();
    DistanceDistribution { rows, distances }
}

impl DistanceDistribution {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("category\tcount");
        for p in DISTANCE_PERCENTILES {
            let _ = write!(s, "\tp{p}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}\t{}", r.category.as_str(), r.count);
            if r.percentiles.is_empty() {
                for _ in DISTANCE_PERCENTILES {
                    s.push_str("\tNA");
                }
            }
            for v in &r.percentiles {
                let _ = write!(s, "\t{v}");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::smith_sentence;
    use crate::model::{Mention, Token};

    fn line(n_tokens: usize, mentions: Vec<Mention>) -> Document {
        let tokens = (0..n_tokens).map(|i| Token::new(i, "w", 0)).collect();
        Document::build("t", tokens, mentions, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn spread_of_one_chain() {
        let d = line(
            100,
            vec![
                Mention::new(0, 0, MentionCategory::Proper).with_chain("a"),
                Mention::new(99, 99, MentionCategory::Pronoun).with_chain("a"),
            ],
        );
        let s = corpus_stats(&[d]);
        assert_eq!(s.entity_spread_max, 99);
        assert_eq!(s.entity_spread_avg, 99.0);
        assert!(!s.spread_undefined);
        assert_eq!(s.singleton_ratio, 0.0);
        assert_eq!(s.pronoun_ratio, 0.5);
    }

    #[test]
    fn singletons_only() {
        let d = line(5, vec![Mention::new(1, 1, MentionCategory::Common), Mention::new(3, 3, MentionCategory::Common)]);
        let s = corpus_stats(&[d]);
        assert_eq!(s.singleton_ratio, 1.0);
        assert!(s.spread_undefined);
        assert_eq!(s.entity_spread_max, 0);
    }

    #[test]
    fn smith_hand_counts() {
        let s = corpus_stats(&[smith_sentence()]);
        let d = smith_sentence();
        assert_eq!(s.mentions, d.mentions.len());
        assert_eq!(s.chains, d.chains.len());
        let plural = d.mentions.iter().filter(|m| m.is_plural).count();
        assert_eq!(s.plural_ratio, plural as f64 / d.mentions.len() as f64);
        let sum: f64 = s.nesting_ratios.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distances_between_consecutive_chain_mentions() {
        let mut ms: Vec<Mention> = (0..10).map(|i| Mention::new(i, i, MentionCategory::Common)).collect();
        for i in [3, 5, 9] {
            ms[i] = Mention::new(i, i, MentionCategory::Pronoun).with_chain("a");
        }
        let d = line(10, ms);
        let dist = antecedent_distance_distribution(&[d]);
        assert_eq!(dist.distances[&MentionCategory::Pronoun], vec![2, 4]);
        let row = dist.rows.iter().find(|r| r.category == MentionCategory::Pronoun).unwrap();
        assert_eq!(row.percentiles, vec![2, 4, 4, 4, 4]);
        assert!(dist.to_tsv().contains("proper\t0\tNA"));
    }

    #[test]
    fn nearest_rank_definition() {
        let v: Vec<usize> = (1..=100).collect();
        assert_eq!(nearest_rank(&v, 50), Some(50));
        assert_eq!(nearest_rank(&v, 95), Some(95));
        assert_eq!(nearest_rank(&v, 100), Some(100));
        assert_eq!(nearest_rank(&[7], 1), Some(7));
        assert_eq!(nearest_rank(&[], 50), None);
    }
}
