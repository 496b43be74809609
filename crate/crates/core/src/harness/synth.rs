//! Seeded synthetic corpora: French-like documents with gold chains,
//! morphological hints and pseudo-embeddings, plus the capitalised-token
//! corpus used to exercise the mention detector.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::FirstNameLexicon;
use crate::model::{
    fill_french_hints, Document, EmbeddingMatrix, Gender, Mention, MentionCategory, Number, Person, Token,
    TokenCategory,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolName {
    pub name: String,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCorpusConfig {
    pub n_docs: usize,
    pub tokens_per_doc: usize,
    /// Most distinct entities a document may introduce.
    pub n_entities: usize,
    /// Mean number of mentions before an entity retires.
    pub mentions_per_entity: f64,
    pub pronoun_ratio: f64,
    pub proper_ratio: f64,
    /// Share of pronouns realised without a gender mark ("lui", "se").
    pub ungendered_pronoun_ratio: f64,
    /// Median antecedent gap, in mentions, per anaphor category.
    pub pronoun_gap: f64,
    pub common_gap: f64,
    pub proper_gap: f64,
    pub tokens_per_mention: f64,
    /// Chance that a proper mention is coordinated with another entity.
    pub coordination_rate: f64,
    pub sentence_length: usize,
    pub sentences_per_paragraph: usize,
    pub embedding_dim: usize,
    pub embedding_noise: f64,
    pub first_names: Vec<PoolName>,
    pub surnames: Vec<String>,
    pub seed: u64,
}

const MALE_NAMES: &[&str] = &[
    "Jean", "Pierre", "Louis", "Henri", "Paul", "Jacques", "Charles", "Victor", "Julien", "Emile", "Lucien",
    "Gustave", "Raoul", "Octave", "Armand", "Edmond", "Honoré", "Ralph", "Raymond", "Bernard",
];
const FEMALE_NAMES: &[&str] = &[
    "Marie", "Jeanne", "Louise", "Julie", "Claire", "Sophie", "Emma", "Lucie", "Adèle", "Berthe", "Cécile",
    "Denise", "Eugénie", "Hortense", "Indiana", "Juliette", "Madeleine", "Noémie", "Pauline", "Rose",
];
const SURNAMES: &[&str] = &[
    "Martin", "Girard", "Dubois", "Durand", "Lefebvre", "Moreau", "Laurent", "Simon", "Michel", "Garnier",
    "Faure", "Rousseau", "Blanc", "Guerin", "Muller", "Henry", "Roussel", "Nicolas", "Perrin", "Morin",
    "Mathieu", "Clement", "Gauthier", "Dumont", "Lopez", "Fontaine", "Chevalier", "Robin", "Masson", "Sanchez",
    "Delmare", "Brun", "Roy", "Noel", "Meyer", "Lucas", "Meunier", "Bonnet", "Perez", "Marchand",
];

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            n_docs: 4,
            tokens_per_doc: 2000,
            n_entities: 200,
            mentions_per_entity: 30.0,
            pronoun_ratio: 0.6,
            proper_ratio: 0.25,
            ungendered_pronoun_ratio: 0.0,
            pronoun_gap: 3.0,
            common_gap: 20.0,
            proper_gap: 50.0,
            tokens_per_mention: 5.0,
            coordination_rate: 0.02,
            sentence_length: 15,
            sentences_per_paragraph: 8,
            embedding_dim: 16,
            embedding_noise: 0.1,
            first_names: MALE_NAMES
                .iter()
                .map(|n| (n, Gender::Masculine))
                .chain(FEMALE_NAMES.iter().map(|n| (n, Gender::Feminine)))
                .map(|(n, g)| PoolName {
                    name: n.to_string(),
                    gender: g,
                })
                .collect(),
            surnames: SURNAMES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

impl SyntheticCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.n_docs == 0 || self.tokens_per_doc == 0 || self.n_entities == 0 || self.embedding_dim == 0 {
            return bad("counts must be positive");
        }
        for r in [self.pronoun_ratio, self.proper_ratio, self.ungendered_pronoun_ratio, self.coordination_rate] {
            if !(0.0..=1.0).contains(&r) {
                return bad("ratios must lie in [0, 1]");
            }
        }
        if self.pronoun_ratio + self.proper_ratio > 1.0 + 1e-12 {
            return bad("pronoun_ratio + proper_ratio exceeds 1");
        }
        if !(self.tokens_per_mention >= 2.0) || !(self.mentions_per_entity >= 1.0) {
            return bad("tokens_per_mention must be at least 2 and mentions_per_entity at least 1");
        }
        if self.sentence_length == 0 || self.sentences_per_paragraph == 0 {
            return bad("sentence and paragraph sizes must be positive");
        }
        let expected_mentions = self.tokens_per_doc as f64 / self.tokens_per_mention;
        for g in [self.pronoun_gap, self.common_gap, self.proper_gap] {
            if !(g >= 1.0) {
                return bad("gaps must be at least 1");
            }
            if g >= expected_mentions {
                return bad("a gap mean exceeds the expected number of mentions per document");
            }
        }
        if self.first_names.is_empty() || self.surnames.is_empty() {
            return bad("name pools must not be empty");
        }
        Ok(())
    }

    /// Every distinct (first name, surname) pair is one proper key.
    pub fn name_capacity(&self) -> usize {
        self.first_names.len() * self.surnames.len()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    /// Counts for every pool first name, skewed towards its gender.
    pub first_names: FirstNameLexicon,
}

const FILLERS: &[&str] = &[
    "marchait", "vers", "la", "maison", "regardait", "longtemps", "puis", "dans", "jardin", "sans", "rien",
    "dire", "pendant", "que", "soir", "tombait", "sur", "ville", "avec", "une", "grande", "tristesse", "mais",
    "aussi", "parfois", "chemin", "lettre", "porte", "fenêtre", "pluie", "encore", "toujours", "alors",
];
const MALE_COMMON: &[&[&str]] = &[
    &["le", "garçon"],
    &["le", "vieux", "comte"],
    &["l'", "homme"],
    &["ce", "monsieur"],
    &["le", "frère"],
];
const FEMALE_COMMON: &[&[&str]] = &[
    &["la", "fille"],
    &["la", "vieille", "dame"],
    &["cette", "femme"],
    &["la", "servante"],
    &["la", "sœur"],
];
const UNGENDERED_PRONOUNS: &[&str] = &["lui", "se"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cat {
    Pronoun,
    Common,
    Proper,
}

impl Cat {
    fn mention_category(self) -> MentionCategory {
        match self {
            Cat::Pronoun => MentionCategory::Pronoun,
            Cat::Common => MentionCategory::Common,
            Cat::Proper => MentionCategory::Proper,
        }
    }
}

struct Entity {
    id: usize,
    first: usize,
    surname: usize,
    gender: Gender,
    vector: Vec<f64>,
}

struct Active {
    entity: usize,
    due: usize,
    planned_gap: usize,
    next: Cat,
    remaining: usize,
}

struct Builder<'a> {
    cfg: &'a SyntheticCorpusConfig,
    rng: ChaCha8Rng,
    tokens: Vec<Token>,
    rows: Vec<Vec<f64>>,
    mentions: Vec<Mention>,
    category_vectors: [Vec<f64>; 3],
    noise: Normal<f64>,
    sentence: usize,
    paragraph: usize,
    in_sentence: usize,
    sentences_in_paragraph: usize,
}

impl Builder<'_> {
    fn noise_row(&mut self) -> Vec<f64> {
        (0..self.cfg.embedding_dim).map(|_| self.noise.sample(&mut self.rng)).collect()
    }

    fn push_token(&mut self, text: &str, row: Vec<f64>) -> usize {
        let i = self.tokens.len();
        let mut t = Token::new(i, text, self.sentence);
        t.paragraph_index = self.paragraph;
        self.tokens.push(t);
        self.rows.push(row);
        self.in_sentence += 1;
        i
    }

    fn push_filler(&mut self) {
        let w = *FILLERS.choose(&mut self.rng).unwrap();
        let row = self.noise_row();
        let i = self.push_token(w, row);
        self.tokens[i].category_hint = TokenCategory::Other;
        if self.in_sentence >= self.cfg.sentence_length {
            let row = self.noise_row();
            let j = self.push_token(".", row);
            self.tokens[j].category_hint = TokenCategory::Other;
            self.sentence += 1;
            self.in_sentence = 0;
            self.sentences_in_paragraph += 1;
            if self.sentences_in_paragraph >= self.cfg.sentences_per_paragraph {
                self.paragraph += 1;
                self.sentences_in_paragraph = 0;
            }
        }
    }

    fn mention_row(&mut self, e: &Entity, cat: Cat) -> Vec<f64> {
        let c = &self.category_vectors[cat as usize];
        let base: Vec<f64> = e.vector.iter().zip(c).map(|(a, b)| a + 0.5 * b).collect();
        base.into_iter().map(|v| v + self.noise.sample(&mut self.rng)).collect()
    }

    /// Realises one mention of `e`; returns its token span.
    fn push_mention_tokens(&mut self, e: &Entity, cat: Cat) -> (usize, usize) {
        let words: Vec<String> = match cat {
            Cat::Pronoun => {
                if self.rng.random::<f64>() < self.cfg.ungendered_pronoun_ratio {
                    vec![UNGENDERED_PRONOUNS.choose(&mut self.rng).unwrap().to_string()]
                } else if e.gender == Gender::Feminine {
                    vec!["elle".into()]
                } else {
                    vec!["il".into()]
                }
            }
            Cat::Common => {
                let pool = if e.gender == Gender::Feminine {
                    FEMALE_COMMON
                } else {
                    MALE_COMMON
                };
                pool.choose(&mut self.rng).unwrap().iter().map(|w| w.to_string()).collect()
            }
            Cat::Proper => vec![
                self.cfg.first_names[e.first].name.clone(),
                self.cfg.surnames[e.surname].clone(),
            ],
        };
        let start = self.tokens.len();
        for w in &words {
            let row = self.mention_row(e, cat);
            self.push_token(w, row);
        }
        let end = self.tokens.len() - 1;
        let head = &mut self.tokens[end];
        head.category_hint = match cat {
            Cat::Pronoun => TokenCategory::Pronoun,
            Cat::Common => TokenCategory::Common,
            Cat::Proper => TokenCategory::Proper,
        };
        head.dependency_relation = if start % 2 == 0 { "nsubj" } else { "obj" }.to_string();
        head.number_hint = Number::Singular;
        head.person_hint = Person::Third;
        if cat != Cat::Pronoun {
            for t in &mut self.tokens[start..end] {
                t.category_hint = TokenCategory::Other;
            }
        }
        (start, end)
    }

    fn push_mention(&mut self, e: &Entity, cat: Cat) {
        let (s, t) = self.push_mention_tokens(e, cat);
        self.mentions
            .push(Mention::new(s, t, cat.mention_category()).with_chain(format!("e{}", e.id)));
    }

    fn push_coordination(&mut self, a: &Entity, b: &Entity) {
        let (s, ae) = self.push_mention_tokens(a, Cat::Proper);
        let row = self.noise_row();
        let c = self.push_token("et", row);
        self.tokens[c].category_hint = TokenCategory::Other;
        self.tokens[c].dependency_relation = "cc".into();
        let (bs, e) = self.push_mention_tokens(b, Cat::Proper);
        self.mentions
            .push(Mention::new(s, e, MentionCategory::Proper).with_head(ae).plural());
        self.mentions
            .push(Mention::new(s, ae, MentionCategory::Proper).with_chain(format!("e{}", a.id)));
        self.mentions
            .push(Mention::new(bs, e, MentionCategory::Proper).with_chain(format!("e{}", b.id)));
    }
}

fn draw_gap(rng: &mut ChaCha8Rng, median: f64) -> usize {
    let lo = (0.5 * median).ceil().max(1.0) as usize;
    let hi = ((1.5 * median).floor() as usize).max(lo);
    rng.random_range(lo..=hi)
}

fn draw_cat(rng: &mut ChaCha8Rng, cfg: &SyntheticCorpusConfig) -> Cat {
    let u: f64 = rng.random();
    if u < cfg.pronoun_ratio {
        Cat::Pronoun
    } else if u < cfg.pronoun_ratio + cfg.proper_ratio {
        Cat::Proper
    } else {
        Cat::Common
    }
}

fn gap_for(cfg: &SyntheticCorpusConfig, cat: Cat) -> f64 {
    match cat {
        Cat::Pronoun => cfg.pronoun_gap,
        Cat::Common => cfg.common_gap,
        Cat::Proper => cfg.proper_gap,
    }
}

fn generate_document(cfg: &SyntheticCorpusConfig, index: usize) -> Result<Document> {
    let seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(index as u64 + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let category_vectors = [0, 1, 2].map(|_| (0..cfg.embedding_dim).map(|_| unit.sample(&mut rng)).collect());
    let noise = Normal::new(0.0, cfg.embedding_noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut b = Builder {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5),
        tokens: Vec::new(),
        rows: Vec::new(),
        mentions: Vec::new(),
        category_vectors,
        noise,
        sentence: 0,
        paragraph: 0,
        in_sentence: 0,
        sentences_in_paragraph: 0,
    };

    // each entity gets a distinct (first name, surname) pair
    let capacity = cfg.name_capacity();
    let mut name_order: Vec<usize> = (0..capacity).collect();
    let n_names = cfg.n_entities.min(capacity);
    for i in 0..n_names {
        let j = rng.random_range(i..capacity);
        name_order.swap(i, j);
    }
    let mut entities: Vec<Entity> = Vec::new();
    let mut active: Vec<Active> = Vec::new();
    let mut genders: BTreeMap<String, Gender> = BTreeMap::new();
    let filler_mean = cfg.tokens_per_mention - 2.0;
    let max_mention_tokens = 9;

    let mut t = 0usize;
    while b.tokens.len() + max_mention_tokens + 1 < cfg.tokens_per_doc {
        let n_fill = rng.random_range(0..=(2.0 * filler_mean).round() as usize);
        for _ in 0..n_fill {
            if b.tokens.len() + max_mention_tokens + 1 >= cfg.tokens_per_doc {
                break;
            }
            b.push_filler();
        }
        // most urgent ready entity: tight gaps first, then earliest due
        let ready = active
            .iter()
            .enumerate()
            .filter(|(_, a)| a.due <= t)
            .min_by_key(|(_, a)| (a.planned_gap, a.due, a.entity))
            .map(|(k, _)| k);
        let slot = match ready {
            Some(k) => Some(k),
            None if entities.len() < n_names => {
                let code = name_order[entities.len()];
                let first = code % cfg.first_names.len();
                let e = Entity {
                    id: entities.len(),
                    first,
                    surname: code / cfg.first_names.len(),
                    gender: cfg.first_names[first].gender,
                    vector: (0..cfg.embedding_dim).map(|_| unit.sample(&mut rng)).collect(),
                };
                genders.insert(format!("e{}", e.id), e.gender);
                let lifetime = rng.random_range(1..=(2.0 * cfg.mentions_per_entity).round().max(1.0) as usize);
                entities.push(e);
                active.push(Active {
                    entity: entities.len() - 1,
                    due: t,
                    planned_gap: 0,
                    next: Cat::Proper,
                    remaining: lifetime,
                });
                Some(active.len() - 1)
            }
            None => active
                .iter()
                .enumerate()
                .min_by_key(|(_, a)| (a.due, a.entity))
                .map(|(k, _)| k),
        };
        let Some(k) = slot else {
            break;
        };
        let coordinate = active[k].next == Cat::Proper
            && active.len() > 1
            && rng.random::<f64>() < cfg.coordination_rate;
        let mut emitted = vec![k];
        if coordinate {
            let partner = active
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .min_by_key(|(_, a)| (a.due, a.entity))
                .map(|(j, _)| j)
                .unwrap();
            b.push_coordination(&entities[active[k].entity], &entities[active[partner].entity]);
            emitted.push(partner);
            t += 3;
        } else {
            b.push_mention(&entities[active[k].entity], active[k].next);
            t += 1;
        }
        for &j in &emitted {
            let a = &mut active[j];
            a.remaining = a.remaining.saturating_sub(1);
            a.next = draw_cat(&mut rng, cfg);
            a.planned_gap = draw_gap(&mut rng, gap_for(cfg, a.next));
            // `t` already points past this mention
            a.due = t - 1 + a.planned_gap;
        }
        if entities.len() < n_names {
            active.retain(|a| a.remaining > 0);
        }
    }
    while b.tokens.len() < cfg.tokens_per_doc {
        let row = b.noise_row();
        let i = b.push_token(FILLERS[b.tokens.len() % FILLERS.len()], row);
        b.tokens[i].category_hint = TokenCategory::Other;
    }
    fill_french_hints(&mut b.tokens);
    let n = b.tokens.len();
    let data: Vec<f32> = b.rows.iter().flatten().map(|&v| v as f32).collect();
    let doc_id = format!("synth-{:04}", index);
    let mut doc = Document::build(doc_id, b.tokens, b.mentions, &genders)?;
    doc.attach_embeddings(Arc::new(EmbeddingMatrix::new(n, cfg.embedding_dim, data)?), cfg.embedding_dim)?;
    Ok(doc)
}

/// Generates the corpus described by `config`; identical configs give
/// identical corpora.
pub fn generate_synthetic_corpus(config: &SyntheticCorpusConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let documents = (0..config.n_docs)
        .map(|i| generate_document(config, i))
        .collect::<Result<Vec<_>>>()?;
    let first_names = FirstNameLexicon::from_entries(config.first_names.iter().map(|p| match p.gender {
        Gender::Masculine => (p.name.as_str(), 9_800, 200),
        Gender::Feminine => (p.name.as_str(), 150, 9_850),
        Gender::Unknown => (p.name.as_str(), 5_000, 5_000),
    }));
    Ok(SyntheticCorpus { documents, first_names })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapitalizedCorpusConfig {
    pub n_docs: usize,
    pub tokens_per_doc: usize,
    pub sentence_length: usize,
    pub capitalized_ratio: f64,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for CapitalizedCorpusConfig {
    fn default() -> Self {
        CapitalizedCorpusConfig {
            n_docs: 4,
            tokens_per_doc: 500,
            sentence_length: 12,
            capitalized_ratio: 0.2,
            embedding_dim: 8,
            seed: 0,
        }
    }
}

/// Documents where every capitalised token is a single-token mention.
/// Embedding dimension 0 carries the capitalisation bit as ±1; the other
/// dimensions are a seeded vector per word form.
pub fn capitalized_corpus(config: &CapitalizedCorpusConfig) -> Result<Vec<Document>> {
    if config.embedding_dim == 0 || config.sentence_length == 0 {
        return Err(Error::Config("embedding_dim and sentence_length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab: Vec<String> = (0..200)
        .map(|_| {
            let len = rng.random_range(3..8);
            (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
        })
        .collect();
    let vectors: Vec<Vec<f32>> = (0..vocab.len())
        .map(|_| (1..config.embedding_dim).map(|_| rng.random_range(-0.5..0.5)).collect())
        .collect();
    (0..config.n_docs)
        .map(|d| {
            let mut tokens = Vec::with_capacity(config.tokens_per_doc);
            let mut data = Vec::with_capacity(config.tokens_per_doc * config.embedding_dim);
            let mut mentions = Vec::new();
            for i in 0..config.tokens_per_doc {
                let w = rng.random_range(0..vocab.len());
                let cap = rng.random::<f64>() < config.capitalized_ratio;
                let mut text = vocab[w].clone();
                if cap {
                    text[..1].make_ascii_uppercase();
                    mentions.push(Mention::new(i, i, MentionCategory::Proper));
                }
                let mut t = Token::new(i, text, i / config.sentence_length);
                t.category_hint = if cap { TokenCategory::Proper } else { TokenCategory::Other };
                tokens.push(t);
                data.push(if cap { 1.0 } else { -1.0 });
                data.extend(&vectors[w]);
            }
            let mut doc = Document::build(format!("caps-{d:04}"), tokens, mentions, &BTreeMap::new())?;
            let m = EmbeddingMatrix::new(config.tokens_per_doc, config.embedding_dim, data)?;
            doc.attach_embeddings(Arc::new(m), config.embedding_dim)?;
            Ok(doc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_document;

    fn small() -> SyntheticCorpusConfig {
        SyntheticCorpusConfig {
            n_docs: 2,
            tokens_per_doc: 1500,
            coordination_rate: 0.3,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic_corpus(&small()).unwrap();
        let b = generate_synthetic_corpus(&small()).unwrap();
        for (x, y) in a.documents.iter().zip(&b.documents) {
            assert_eq!(write_document(x).unwrap(), write_document(y).unwrap());
            assert_eq!(x.embeddings().unwrap().as_slice(), y.embeddings().unwrap().as_slice());
        }
        let c = generate_synthetic_corpus(&SyntheticCorpusConfig { seed: 12, ..small() }).unwrap();
        assert_ne!(write_document(&a.documents[0]).unwrap(), write_document(&c.documents[0]).unwrap());
    }

    #[test]
    fn documents_have_exact_length_and_validate() {
        let c = generate_synthetic_corpus(&small()).unwrap();
        for d in &c.documents {
            assert_eq!(d.n_tokens(), 1500);
            assert!(crate::model::validate_document(d).is_empty());
            assert!(d.mentions.iter().any(|m| m.is_plural));
        }
    }

    #[test]
    fn one_entity_links_to_predecessor() {
        let cfg = SyntheticCorpusConfig {
            n_entities: 1,
            coordination_rate: 0.0,
            ..small()
        };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        for d in &c.documents {
            assert_eq!(d.chains.len(), 1);
            assert!(d.mentions.len() > 100);
        }
    }

    #[test]
    fn infeasible_gaps_rejected() {
        let cfg = SyntheticCorpusConfig {
            tokens_per_doc: 100,
            proper_gap: 50.0,
            ..small()
        };
        assert!(matches!(generate_synthetic_corpus(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn capitalized_mentions_match_case() {
        let docs = capitalized_corpus(&CapitalizedCorpusConfig::default()).unwrap();
        for d in &docs {
            for m in &d.mentions {
                assert!(d.tokens[m.start].text.chars().next().unwrap().is_uppercase());
            }
            let caps = d.tokens.iter().filter(|t| t.text.chars().next().unwrap().is_uppercase()).count();
            assert_eq!(caps, d.mentions.len());
        }
    }
}
