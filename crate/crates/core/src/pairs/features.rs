//! Candidate generation and the mention / mention-pair input vectors.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, Gender, Mention, MentionCategory, Number, Person, PipelineConfig};
use crate::text::fold;

/// The `min(window, i)` mentions preceding `i`, nearest first.
pub fn candidate_antecedents(mentions: &[Mention], i: usize, config: &PipelineConfig) -> Vec<usize> {
    let window = config.window_for(mentions[i].category);
    (i.saturating_sub(window)..i).rev().collect()
}

/// Universal Dependencies v2 relation labels; subtypes fold into their base.
pub const DEPENDENCY_LABELS: [&str; 37] = [
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp", "clf", "compound", "conj",
    "cop", "csubj", "dep", "det", "discourse", "dislocated", "expl", "fixed", "flat", "goeswith", "iobj",
    "list", "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis", "punct",
    "reparandum", "root", "vocative", "xcomp",
];

/// Slot of a relation in the dependency one-hot; the last slot is unknown.
pub fn dependency_slot(relation: &str) -> usize {
    let base = relation.split(':').next().unwrap_or("").to_lowercase();
    DEPENDENCY_LABELS
        .iter()
        .position(|l| *l == base)
        .unwrap_or(DEPENDENCY_LABELS.len())
}

pub const MENTION_FEATURE_DIM: usize = 2 + 3 + (DEPENDENCY_LABELS.len() + 1) + 3 + 3 + 4;

/// Number of log2 distance buckets: 0, 1, 2-3, 4-7, ..., and 65536 or more.
pub const DISTANCE_BUCKETS: usize = 18;
pub const PAIR_FEATURE_DIM: usize = 5 * DISTANCE_BUCKETS + 6;

pub fn distance_bucket(d: usize) -> usize {
    if d == 0 {
        0
    } else {
        ((usize::BITS - d.leading_zeros()) as usize).min(DISTANCE_BUCKETS - 1)
    }
}

pub fn mention_gender(m: &Mention, doc: &Document) -> Gender {
    doc.tokens[m.head_token].gender_hint
}

pub fn mention_number(m: &Mention, doc: &Document) -> Number {
    if m.is_plural {
        Number::Plural
    } else {
        doc.tokens[m.head_token].number_hint
    }
}

pub fn mention_person(m: &Mention, doc: &Document) -> Person {
    doc.tokens[m.head_token].person_hint
}

pub fn mention_feature_vector(m: &Mention, doc: &Document) -> Vec<f64> {
    let mut v = vec![0.0; MENTION_FEATURE_DIM];
    let sentence = doc.tokens[m.start].sentence_index;
    let sentence_start = doc.tokens[..m.start]
        .iter()
        .rposition(|t| t.sentence_index != sentence)
        .map_or(0, |p| p + 1);
    v[0] = m.len() as f64;
    v[1] = (m.start - sentence_start) as f64;
    let mut o = 2;
    v[o + MentionCategory::ALL.iter().position(|c| *c == m.category).unwrap()] = 1.0;
    o += 3;
    v[o + dependency_slot(&doc.tokens[m.head_token].dependency_relation)] = 1.0;
    o += DEPENDENCY_LABELS.len() + 1;
    v[o + mention_gender(m, doc) as usize] = 1.0;
    o += 3;
    v[o + mention_number(m, doc) as usize] = 1.0;
    o += 3;
    v[o + mention_person(m, doc) as usize] = 1.0;
    v
}

/// The eleven pair features before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub id_distance: usize,
    pub start_distance: usize,
    pub end_distance: usize,
    pub sentence_distance: usize,
    pub paragraph_distance: usize,
    pub level_difference: usize,
    pub shared_token_ratio: f64,
    pub exact_match: bool,
    pub head_match: bool,
    pub syntactic_head_match: bool,
    /// Only persons are annotated, so this is always true.
    pub entity_type_match: bool,
}

impl PairFeatures {
    pub fn compute(ante: &Mention, ana: &Mention, doc: &Document) -> Self {
        let t = &doc.tokens;
        let lo = ante.start.max(ana.start);
        let hi = ante.end.min(ana.end);
        let shared = if lo <= hi { hi - lo + 1 } else { 0 };
        let union = ante.len() + ana.len() - shared;
        let head_a = &t[ante.head_token];
        let head_b = &t[ana.head_token];
        PairFeatures {
            id_distance: ana.id.abs_diff(ante.id),
            start_distance: ana.start.abs_diff(ante.start),
            end_distance: ana.end.abs_diff(ante.end),
            sentence_distance: t[ana.start].sentence_index.abs_diff(t[ante.start].sentence_index),
            paragraph_distance: t[ana.start].paragraph_index.abs_diff(t[ante.start].paragraph_index),
            level_difference: ana.nesting_level.abs_diff(ante.nesting_level),
            shared_token_ratio: shared as f64 / union as f64,
            exact_match: fold(&doc.mention_text(ante)) == fold(&doc.mention_text(ana)),
            head_match: fold(&head_a.text) == fold(&head_b.text),
            syntactic_head_match: !head_a.dependency_relation.is_empty()
                && head_a.dependency_relation == head_b.dependency_relation,
            entity_type_match: true,
        }
    }

    pub fn encode(&self) -> Vec<f64> {
        let mut v = vec![0.0; PAIR_FEATURE_DIM];
        let distances = [
            self.id_distance,
            self.start_distance,
            self.end_distance,
            self.sentence_distance,
            self.paragraph_distance,
        ];
        for (k, d) in distances.iter().enumerate() {
            v[k * DISTANCE_BUCKETS + distance_bucket(*d)] = 1.0;
        }
        let o = 5 * DISTANCE_BUCKETS;
        v[o] = self.level_difference as f64;
        v[o + 1] = self.shared_token_ratio;
        v[o + 2] = f64::from(u8::from(self.exact_match));
        v[o + 3] = f64::from(u8::from(self.head_match));
        v[o + 4] = f64::from(u8::from(self.syntactic_head_match));
        v[o + 5] = f64::from(u8::from(self.entity_type_match));
        v
    }
}

pub fn pair_feature_vector(ante: &Mention, ana: &Mention, doc: &Document) -> Vec<f64> {
    PairFeatures::compute(ante, ana, doc).encode()
}

/// Offset of the exact-match flag inside the pair-feature segment.
pub const EXACT_MATCH_OFFSET: usize = 5 * DISTANCE_BUCKETS + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    EmbeddingA,
    EmbeddingB,
    MentionFeaturesA,
    MentionFeaturesB,
    PairFeatures,
}

impl Segment {
    pub const DEFAULT_ORDER: [Segment; 5] = [
        Segment::EmbeddingA,
        Segment::EmbeddingB,
        Segment::MentionFeaturesA,
        Segment::MentionFeaturesB,
        Segment::PairFeatures,
    ];
}

/// Where each segment sits in the pair input vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFeatureLayout {
    pub embedding_dim: usize,
    pub mention_feature_dim: usize,
    pub pair_feature_dim: usize,
    pub order: Vec<Segment>,
}

impl PairFeatureLayout {
    pub fn new(embedding_dim: usize) -> Self {
        Self::with_order(embedding_dim, Segment::DEFAULT_ORDER.to_vec()).unwrap()
    }

    pub fn with_order(embedding_dim: usize, order: Vec<Segment>) -> Result<Self> {
        let mut seen = order.clone();
        seen.sort_by_key(|s| Segment::DEFAULT_ORDER.iter().position(|d| d == s));
        if seen != Segment::DEFAULT_ORDER {
            return Err(Error::Config(format!("layout must list every segment once, got {order:?}")));
        }
        Ok(PairFeatureLayout {
            embedding_dim,
            mention_feature_dim: MENTION_FEATURE_DIM,
            pair_feature_dim: PAIR_FEATURE_DIM,
            order,
        })
    }

    pub fn len_of(&self, segment: Segment) -> usize {
        match segment {
            Segment::EmbeddingA | Segment::EmbeddingB => self.embedding_dim,
            Segment::MentionFeaturesA | Segment::MentionFeaturesB => self.mention_feature_dim,
            Segment::PairFeatures => self.pair_feature_dim,
        }
    }

    pub fn range(&self, segment: Segment) -> Range<usize> {
        let mut o = 0;
        for s in &self.order {
            let len = self.len_of(*s);
            if *s == segment {
                return o..o + len;
            }
            o += len;
        }
        unreachable!("layout holds every segment")
    }

    pub fn total_dim(&self) -> usize {
        2 * self.embedding_dim + 2 * self.mention_feature_dim + self.pair_feature_dim
    }
}

/// Mean of the first and last token embeddings.
pub fn mention_representation(m: &Mention, doc: &Document) -> Result<Vec<f64>> {
    let emb = doc.embeddings()?;
    Ok(emb
        .row(m.start)
        .iter()
        .zip(emb.row(m.end))
        .map(|(a, b)| (f64::from(*a) + f64::from(*b)) / 2.0)
        .collect())
}

/// Input vector of the pair (antecedent, anaphor) laid out per `layout`.
pub fn encode_pair(ante: &Mention, ana: &Mention, doc: &Document, layout: &PairFeatureLayout) -> Result<Vec<f64>> {
    let dim = doc.embeddings()?.dim();
    if dim != layout.embedding_dim {
        return Err(Error::DimensionMismatch {
            expected: layout.embedding_dim,
            got: dim,
        });
    }
    let mut out = vec![0.0; layout.total_dim()];
    for s in &layout.order {
        let values = match s {
            Segment::EmbeddingA => mention_representation(ante, doc)?,
            Segment::EmbeddingB => mention_representation(ana, doc)?,
            Segment::MentionFeaturesA => mention_feature_vector(ante, doc),
            Segment::MentionFeaturesB => mention_feature_vector(ana, doc),
            Segment::PairFeatures => pair_feature_vector(ante, ana, doc),
        };
        out[layout.range(*s)].copy_from_slice(&values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::smith_sentence;
    use crate::model::{EmbeddingMatrix, Token};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn line(n: usize, cat: MentionCategory) -> Vec<Mention> {
        (0..n)
            .map(|i| Mention {
                id: i,
                ..Mention::new(i, i, cat)
            })
            .collect()
    }

    #[test]
    fn windows_by_category() {
        let cfg = PipelineConfig::default();
        let pro = line(60, MentionCategory::Pronoun);
        let c = candidate_antecedents(&pro, 50, &cfg);
        assert_eq!(c.len(), 30);
        assert_eq!((c[0], c[29]), (49, 20));
        let prop = line(20, MentionCategory::Proper);
        assert_eq!(candidate_antecedents(&prop, 10, &cfg), (0..10).rev().collect::<Vec<_>>());
        assert!(candidate_antecedents(&prop, 0, &cfg).is_empty());
    }

    #[test]
    fn buckets() {
        assert_eq!(distance_bucket(0), 0);
        assert_eq!(distance_bucket(1), 1);
        assert_eq!(distance_bucket(2), 2);
        assert_eq!(distance_bucket(3), 2);
        assert_eq!(distance_bucket(4), 3);
        assert_eq!(distance_bucket(65535), 16);
        assert_eq!(distance_bucket(65536), 17);
        assert_eq!(distance_bucket(10_000_000), 17);
    }

    fn doc_with(words: &[&str]) -> Document {
        let tokens = words.iter().enumerate().map(|(i, w)| Token::new(i, *w, 0)).collect();
        Document::assemble("t", tokens, vec![], &BTreeMap::new())
    }

    #[test]
    fn mention_vector_encoding() {
        let mut doc = doc_with(&["il", "vit", "a", "b", "Jean", "de", "Lyon"]);
        doc.tokens[0].gender_hint = Gender::Masculine;
        let il = Mention::new(0, 0, MentionCategory::Pronoun);
        let v = mention_feature_vector(&il, &doc);
        assert_eq!(&v[..5], &[1.0, 0.0, 1.0, 0.0, 0.0]);
        let g = 5 + DEPENDENCY_LABELS.len() + 1;
        assert_eq!(&v[g..g + 3], &[1.0, 0.0, 0.0]);
        let jean = Mention::new(4, 6, MentionCategory::Proper);
        let v = mention_feature_vector(&jean, &doc);
        assert_eq!(&v[..5], &[3.0, 4.0, 0.0, 0.0, 1.0]);
        assert_eq!(&v[g..g + 3], &[0.0, 0.0, 1.0]);
        // unknown dependency lands in the last slot
        assert_eq!(v[5 + DEPENDENCY_LABELS.len()], 1.0);
        assert_eq!(dependency_slot("nsubj:pass"), dependency_slot("nsubj"));
    }

    #[test]
    fn position_is_relative_to_sentence() {
        let mut doc = doc_with(&["a", "b", "c", "d"]);
        doc.tokens[2].sentence_index = 1;
        doc.tokens[3].sentence_index = 1;
        let m = Mention::new(3, 3, MentionCategory::Common);
        assert_eq!(mention_feature_vector(&m, &doc)[1], 1.0);
    }

    #[test]
    fn pair_features_on_examples() {
        let doc = doc_with(&["Indiana", "Indiana"]);
        let a = Mention { id: 0, ..Mention::new(0, 0, MentionCategory::Proper) };
        let b = Mention { id: 1, ..Mention::new(1, 1, MentionCategory::Proper) };
        let f = PairFeatures::compute(&a, &b, &doc);
        assert!(f.exact_match && f.head_match);
        assert_eq!(f.sentence_distance, 0);
        let v = f.encode();
        assert_eq!(v[1], 1.0);
        assert_eq!(v[EXACT_MATCH_OFFSET], 1.0);
        assert_eq!(v.len(), PAIR_FEATURE_DIM);

        let smith = smith_sentence();
        let parents = &smith.mentions[2];
        let my = &smith.mentions[3];
        assert_eq!(smith.mention_text(parents), "my parents");
        let f = PairFeatures::compute(parents, my, &smith);
        assert_eq!(f.shared_token_ratio, 0.5);
        assert_eq!(f.level_difference, 1);
        assert!(!f.exact_match);
    }

    fn embedded(doc: &mut Document, dim: usize) {
        let n = doc.n_tokens();
        let data = (0..n * dim).map(|k| k as f32).collect();
        doc.attach_embeddings(Arc::new(EmbeddingMatrix::new(n, dim, data).unwrap()), dim).unwrap();
    }

    #[test]
    fn representation_averages_boundaries() {
        let mut doc = doc_with(&["a", "b", "c"]);
        embedded(&mut doc, 2);
        let single = Mention::new(1, 1, MentionCategory::Common);
        assert_eq!(mention_representation(&single, &doc).unwrap(), vec![2.0, 3.0]);
        let span = Mention::new(0, 2, MentionCategory::Common);
        assert_eq!(mention_representation(&span, &doc).unwrap(), vec![2.0, 3.0]);
        let d = doc_with(&["x"]);
        assert!(matches!(mention_representation(&single, &d), Err(Error::MissingEmbeddings(_))));
    }

    #[test]
    fn layout_reordering_permutes_segments() {
        let mut doc = smith_sentence();
        embedded(&mut doc, 3);
        let (a, b) = (&doc.mentions[5], &doc.mentions[7]);
        let base = PairFeatureLayout::new(3);
        let mut order = Segment::DEFAULT_ORDER.to_vec();
        order.reverse();
        let rev = PairFeatureLayout::with_order(3, order).unwrap();
        let x = encode_pair(a, b, &doc, &base).unwrap();
        let y = encode_pair(a, b, &doc, &rev).unwrap();
        assert_eq!(x.len(), base.total_dim());
        assert_eq!(y.len(), base.total_dim());
        for s in Segment::DEFAULT_ORDER {
            assert_eq!(x[base.range(s)], y[rev.range(s)], "{s:?}");
        }
        assert!(PairFeatureLayout::with_order(3, vec![Segment::EmbeddingA]).is_err());
        assert!(matches!(
            encode_pair(a, b, &doc, &PairFeatureLayout::new(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
