//! Document, mention and chain types for character coreference annotation.
//!
//! A [`Document`] holds its tokens, the annotated (or predicted) mentions in
//! canonical reading order, and the chains partitioning those mentions.
//! Mentions may nest up to two levels deep; plural mentions form chains of
//! their own, separate from the chains of their members.

mod hints;
mod nesting;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hints::{fill_french_hints, french_pronoun_hint, PronounHint};
pub use nesting::{compute_nesting_levels, scan_nesting, NestingScan, MAX_NESTING_LEVEL};
pub use validate::{validate_document, ValidationReport, Violation};

/// Coarse part-of-speech information attached to a token at ingestion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenCategory {
    Pronoun,
    Common,
    Proper,
    Other,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionCategory {
    Pronoun,
    Common,
    Proper,
}

impl MentionCategory {
    pub const ALL: [MentionCategory; 3] = [
        MentionCategory::Pronoun,
        MentionCategory::Common,
        MentionCategory::Proper,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MentionCategory::Pronoun => "pronoun",
            MentionCategory::Common => "common",
            MentionCategory::Proper => "proper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Masculine,
    Feminine,
    #[default]
    Unknown,
}

impl Gender {
    pub fn code(self) -> &'static str {
        match self {
            Gender::Masculine => "m",
            Gender::Feminine => "f",
            Gender::Unknown => "u",
        }
    }

    pub fn is_known(self) -> bool {
        self != Gender::Unknown
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "m" | "masc" | "masculine" | "male" => Ok(Gender::Masculine),
            "f" | "fem" | "feminine" | "female" => Ok(Gender::Feminine),
            "u" | "" | "unknown" => Ok(Gender::Unknown),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Number {
    Singular,
    Plural,
    #[default]
    Unknown,
}

impl Number {
    pub fn code(self) -> &'static str {
        match self {
            Number::Singular => "s",
            Number::Plural => "p",
            Number::Unknown => "u",
        }
    }
}

impl FromStr for Number {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "s" | "sg" | "sing" | "singular" => Ok(Number::Singular),
            "p" | "pl" | "plur" | "plural" => Ok(Number::Plural),
            "u" | "" | "unknown" => Ok(Number::Unknown),
            other => Err(format!("unknown number `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Person {
    First,
    Second,
    Third,
    #[default]
    Unknown,
}

impl Person {
    pub fn code(self) -> &'static str {
        match self {
            Person::First => "1",
            Person::Second => "2",
            Person::Third => "3",
            Person::Unknown => "u",
        }
    }
}

impl FromStr for Person {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "1" | "first" => Ok(Person::First),
            "2" | "second" => Ok(Person::Second),
            "3" | "third" => Ok(Person::Third),
            "u" | "" | "unknown" => Ok(Person::Unknown),
            other => Err(format!("unknown person `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Token {
    pub index: usize,
    pub text: String,
    pub sentence_index: usize,
    pub paragraph_index: usize,
    pub category_hint: TokenCategory,
    /// Dependency relation of the token to its governor; empty when unknown.
    pub dependency_relation: String,
    pub gender_hint: Gender,
    pub number_hint: Number,
    pub person_hint: Person,
}

impl Token {
    pub fn new(index: usize, text: impl Into<String>, sentence_index: usize) -> Self {
        Token {
            index,
            text: text.into(),
            sentence_index,
            ..Default::default()
        }
    }
}

/// Entity membership as recorded on a mention at ingestion time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChainRef {
    Entity(String),
    Singleton,
}

impl ChainRef {
    pub fn entity(id: impl Into<String>) -> Self {
        ChainRef::Entity(id.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mention {
    pub id: usize,
    /// First token, inclusive.
    pub start: usize,
    /// Last token, inclusive.
    pub end: usize,
    pub nesting_level: usize,
    pub category: MentionCategory,
    pub head_token: usize,
    pub chain: ChainRef,
    pub is_plural: bool,
    pub confidence: f64,
}

impl Mention {
    /// A gold singleton mention with its head on the last token.
    pub fn new(start: usize, end: usize, category: MentionCategory) -> Self {
        Mention {
            id: 0,
            start,
            end,
            nesting_level: 0,
            category,
            head_token: end,
            chain: ChainRef::Singleton,
            is_plural: false,
            confidence: 1.0,
        }
    }

    pub fn with_chain(mut self, chain: impl Into<String>) -> Self {
        self.chain = ChainRef::Entity(chain.into());
        self
    }

    pub fn with_head(mut self, head: usize) -> Self {
        self.head_token = head;
        self
    }

    pub fn plural(mut self) -> Self {
        self.is_plural = true;
        self
    }

    pub fn span(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, other: &Mention) -> bool {
        self.start <= other.start && other.end <= self.end && self.span() != other.span()
    }

    pub fn token_range(&self) -> Range<usize> {
        self.start..self.end + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub chain_id: String,
    pub mention_ids: Vec<usize>,
    pub gender_label: Gender,
}

impl Chain {
    pub fn is_singleton(&self) -> bool {
        self.mention_ids.len() == 1
    }
}

/// Dense per-token vectors, row-major, one row per document token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(n_rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n_rows * dim {
            return Err(Error::Embedding(format!(
                "payload holds {} values, header declares {n_rows}x{dim}",
                data.len()
            )));
        }
        Ok(EmbeddingMatrix { n_rows, dim, data })
    }

    pub fn zeros(n_rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            n_rows,
            dim,
            data: vec![0.0; n_rows * dim],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Copy of rows `range`, used when documents are split into samples.
    pub fn slice_rows(&self, range: Range<usize>) -> EmbeddingMatrix {
        EmbeddingMatrix {
            n_rows: range.len(),
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub mentions: Vec<Mention>,
    pub chains: Vec<Chain>,
    pub embeddings: Option<Arc<EmbeddingMatrix>>,
}

impl Document {
    /// Builds a document from tokens and mentions in any order.
    ///
    /// Mentions are sorted canonically (start ascending, end descending),
    /// renumbered, given computed nesting levels and grouped into chains by
    /// their [`ChainRef`]; singleton markers become one-element chains. The
    /// result is validated and rejected if any invariant fails.
    pub fn build(
        doc_id: impl Into<String>,
        tokens: Vec<Token>,
        mentions: Vec<Mention>,
        chain_genders: &BTreeMap<String, Gender>,
    ) -> Result<Document> {
        let doc = Document::assemble(doc_id, tokens, mentions, chain_genders);
        let report = validate_document(&doc);
        if report.is_empty() {
            Ok(doc)
        } else {
            Err(Error::Validation(report))
        }
    }

    /// Same as [`Document::build`] without the final validation, so that
    /// malformed inputs can be inspected.
    pub fn assemble(
        doc_id: impl Into<String>,
        tokens: Vec<Token>,
        mut mentions: Vec<Mention>,
        chain_genders: &BTreeMap<String, Gender>,
    ) -> Document {
        sort_canonical(&mut mentions);
        for (id, m) in mentions.iter_mut().enumerate() {
            m.id = id;
        }
        let well_formed: Vec<bool> = mentions
            .iter()
            .map(|m| m.start <= m.end && m.end < tokens.len())
            .collect();
        let spans: Vec<(usize, usize)> = mentions
            .iter()
            .zip(&well_formed)
            .filter(|(_, ok)| **ok)
            .map(|(m, _)| m.span())
            .collect();
        let scan = scan_nesting(&spans);
        let mut k = 0;
        for (m, ok) in mentions.iter_mut().zip(&well_formed) {
            if *ok {
                m.nesting_level = scan.levels[k];
                k += 1;
            }
        }
        let chains = chains_from_refs(&mentions, chain_genders);
        Document {
            doc_id: doc_id.into(),
            tokens,
            mentions,
            chains,
            embeddings: None,
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn mention_text(&self, m: &Mention) -> String {
        self.tokens[m.token_range()]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Token ranges of the sentences, in order.
    pub fn sentences(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut begin = 0;
        for i in 1..=self.tokens.len() {
            if i == self.tokens.len()
                || self.tokens[i].sentence_index != self.tokens[begin].sentence_index
            {
                if begin < i {
                    out.push(begin..i);
                }
                begin = i;
            }
        }
        out
    }

    /// Index of the first token of each token's sentence.
    pub fn sentence_starts(&self) -> Vec<usize> {
        let mut starts = vec![0; self.tokens.len()];
        for range in self.sentences() {
            for i in range.clone() {
                starts[i] = range.start;
            }
        }
        starts
    }

    /// For each mention, the position of its chain in `self.chains`.
    pub fn chain_of_mentions(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.mentions.len()];
        for (c, chain) in self.chains.iter().enumerate() {
            for &m in &chain.mention_ids {
                if m < out.len() {
                    out[m] = c;
                }
            }
        }
        out
    }

    /// Gold partition of mention ids.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        self.chains.iter().map(|c| c.mention_ids.clone()).collect()
    }

    pub fn attach_embeddings(&mut self, matrix: Arc<EmbeddingMatrix>, expected_dim: usize) -> Result<()> {
        if matrix.dim() != expected_dim {
            return Err(Error::Attach(format!(
                "embedding dim {} does not match configured {expected_dim}",
                matrix.dim()
            )));
        }
        if matrix.n_rows() != self.tokens.len() {
            return Err(Error::Attach(format!(
                "embedding has {} rows, document {} has {} tokens",
                matrix.n_rows(),
                self.doc_id,
                self.tokens.len()
            )));
        }
        self.embeddings = Some(matrix);
        Ok(())
    }

    pub fn embeddings(&self) -> Result<&EmbeddingMatrix> {
        self.embeddings
            .as_deref()
            .ok_or_else(|| Error::MissingEmbeddings(self.doc_id.clone()))
    }

    /// Replaces the mention set (e.g. with detector output), rebuilding ids,
    /// nesting levels and chains.
    pub fn with_mentions(&self, mentions: Vec<Mention>) -> Document {
        let genders: BTreeMap<String, Gender> = self
            .chains
            .iter()
            .map(|c| (c.chain_id.clone(), c.gender_label))
            .collect();
        let mut doc = Document::assemble(self.doc_id.clone(), self.tokens.clone(), mentions, &genders);
        doc.embeddings = self.embeddings.clone();
        doc
    }
}

/// Sorts by start ascending, then end descending, so containers precede
/// the mentions nested in them.
pub fn sort_canonical(mentions: &mut [Mention]) {
    mentions.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
}

pub fn singleton_chain_id(mention_id: usize) -> String {
    format!("_s{mention_id}")
}

fn chains_from_refs(mentions: &[Mention], genders: &BTreeMap<String, Gender>) -> Vec<Chain> {
    let mut chains: Vec<Chain> = Vec::new();
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for m in mentions {
        match &m.chain {
            ChainRef::Entity(id) => {
                let slot = *by_id.entry(id.as_str()).or_insert_with(|| {
                    chains.push(Chain {
                        chain_id: id.clone(),
                        mention_ids: Vec::new(),
                        gender_label: genders.get(id).copied().unwrap_or_default(),
                    });
                    chains.len() - 1
                });
                chains[slot].mention_ids.push(m.id);
            }
            ChainRef::Singleton => chains.push(Chain {
                chain_id: singleton_chain_id(m.id),
                mention_ids: vec![m.id],
                gender_label: Gender::Unknown,
            }),
        }
    }
    chains
}

/// Result of [`classify_mention`]: the category plus a flag raised when the
/// head carried no usable hint and the common-noun fallback was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub category: MentionCategory,
    pub fallback: bool,
}

pub fn classify_mention(mention: &Mention, tokens: &[Token]) -> Classification {
    let hint = tokens
        .get(mention.head_token)
        .map(|t| t.category_hint)
        .unwrap_or(TokenCategory::Unknown);
    match hint {
        TokenCategory::Pronoun => Classification {
            category: MentionCategory::Pronoun,
            fallback: false,
        },
        TokenCategory::Proper => Classification {
            category: MentionCategory::Proper,
            fallback: false,
        },
        TokenCategory::Common => Classification {
            category: MentionCategory::Common,
            fallback: false,
        },
        TokenCategory::Other | TokenCategory::Unknown => Classification {
            category: MentionCategory::Common,
            fallback: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringStrategy {
    #[default]
    LeftToRight,
    EasyFirstGlobal,
}

impl ClusteringStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusteringStrategy::LeftToRight => "left_to_right",
            ClusteringStrategy::EasyFirstGlobal => "easy_first_global",
        }
    }
}

impl fmt::Display for ClusteringStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusteringStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "left_to_right" | "left-to-right" => Ok(ClusteringStrategy::LeftToRight),
            "easy_first_global" | "easy-first-global" => Ok(ClusteringStrategy::EasyFirstGlobal),
            other => Err(format!(
                "unknown strategy `{other}` (expected left_to_right or easy_first_global)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub pronoun_window: usize,
    pub noun_window: usize,
    pub null_threshold: f64,
    pub clustering_strategy: ClusteringStrategy,
    pub embedding_dim: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pronoun_window: 30,
            noun_window: 300,
            null_threshold: 0.5,
            clustering_strategy: ClusteringStrategy::LeftToRight,
            embedding_dim: 1024,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pronoun_window == 0 || self.noun_window == 0 {
            return Err(Error::Config("antecedent windows must be at least 1".into()));
        }
        if !(self.null_threshold > 0.0 && self.null_threshold < 1.0) {
            return Err(Error::Config(format!(
                "null threshold {} outside (0, 1)",
                self.null_threshold
            )));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn window_for(&self, category: MentionCategory) -> usize {
        match category {
            MentionCategory::Pronoun => self.pronoun_window,
            MentionCategory::Common | MentionCategory::Proper => self.noun_window,
        }
    }
}
