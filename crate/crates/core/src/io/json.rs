//! Document JSON: the on-disk form of an annotated (or predicted) document.
//!
//! ```json
//! {"version": 1, "doc_id": "...",
//!  "tokens": [{"text", "sentence", "paragraph", "category", "dep", "gender", "number", "person"}],
//!  "mentions": [{"start", "end", "head", "level", "category", "chain", "plural", "confidence"}],
//!  "chain_genders": {"<chain id>": "m" | "f" | "u"}}
//! ```
//!
//! `chain` is a string (or integer) entity id, or `null` for a singleton.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    classify_mention, sort_canonical, validate_document, ChainRef, Document, Gender, Mention,
    MentionCategory, Number, Person, Token, TokenCategory,
};

pub const DOCUMENT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct DocumentJson {
    #[serde(default = "default_version")]
    version: u32,
    doc_id: String,
    tokens: Vec<TokenJson>,
    #[serde(default)]
    mentions: Vec<MentionJson>,
    #[serde(default)]
    chain_genders: BTreeMap<String, String>,
}

fn default_version() -> u32 {
    DOCUMENT_FORMAT_VERSION
}

fn unknown_code() -> String {
    "u".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct TokenJson {
    text: String,
    #[serde(default)]
    sentence: usize,
    #[serde(default)]
    paragraph: usize,
    #[serde(default)]
    category: TokenCategory,
    #[serde(default)]
    dep: String,
    #[serde(default = "unknown_code")]
    gender: String,
    #[serde(default = "unknown_code")]
    number: String,
    #[serde(default = "unknown_code")]
    person: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ChainField {
    Name(String),
    Number(i64),
}

#[derive(Debug, Serialize, Deserialize)]
struct MentionJson {
    start: usize,
    end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<MentionCategory>,
    #[serde(default)]
    chain: Option<ChainField>,
    #[serde(default)]
    plural: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

fn code<T: FromStr<Err = String>>(value: &str, path: String) -> Result<T> {
    value.parse().map_err(|message| Error::Parse { path, message })
}

/// Parses and validates a document. Mentions may appear in any order; they
/// are sorted canonically and renumbered.
pub fn parse_document(bytes: &[u8]) -> Result<Document> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let raw: DocumentJson = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if raw.version != DOCUMENT_FORMAT_VERSION {
        return Err(Error::Parse {
            path: "version".into(),
            message: format!("unsupported document version {}", raw.version),
        });
    }

    let mut tokens = Vec::with_capacity(raw.tokens.len());
    for (i, t) in raw.tokens.into_iter().enumerate() {
        tokens.push(Token {
            index: i,
            text: t.text,
            sentence_index: t.sentence,
            paragraph_index: t.paragraph,
            category_hint: t.category,
            dependency_relation: t.dep,
            gender_hint: code::<Gender>(&t.gender, format!("tokens[{i}].gender"))?,
            number_hint: code::<Number>(&t.number, format!("tokens[{i}].number"))?,
            person_hint: code::<Person>(&t.person, format!("tokens[{i}].person"))?,
        });
    }

    let mut mentions = Vec::with_capacity(raw.mentions.len());
    let mut declared_levels = Vec::with_capacity(raw.mentions.len());
    for m in raw.mentions {
        let chain = match m.chain {
            None => ChainRef::Singleton,
            Some(ChainField::Name(s)) => ChainRef::Entity(s),
            Some(ChainField::Number(n)) => ChainRef::Entity(n.to_string()),
        };
        let mut mention = Mention {
            id: 0,
            start: m.start,
            end: m.end,
            nesting_level: m.level.unwrap_or(0),
            category: MentionCategory::Common,
            head_token: m.head.unwrap_or(m.end),
            chain,
            is_plural: m.plural,
            confidence: m.confidence.unwrap_or(1.0),
        };
        mention.category = match m.category {
            Some(c) => c,
            None => classify_mention(&mention, &tokens).category,
        };
        declared_levels.push(m.level);
        mentions.push(mention);
    }
    // Keep declared levels aligned with the canonical order.
    let mut paired: Vec<(Mention, Option<usize>)> = mentions.into_iter().zip(declared_levels).collect();
    paired.sort_by(|(a, _), (b, _)| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let (mut mentions, declared): (Vec<Mention>, Vec<Option<usize>>) = paired.into_iter().unzip();
    sort_canonical(&mut mentions);

    let mut genders = BTreeMap::new();
    for (id, g) in &raw.chain_genders {
        genders.insert(id.clone(), code::<Gender>(g, format!("chain_genders.{id}"))?);
    }
    let mut doc = Document::assemble(raw.doc_id, tokens, mentions, &genders);
    for (m, level) in doc.mentions.iter_mut().zip(declared) {
        if let Some(level) = level {
            m.nesting_level = level;
        }
    }
    let report = validate_document(&doc);
    if !report.is_empty() {
        return Err(Error::Validation(report));
    }
    Ok(doc)
}

/// Serialises a document; `parse_document(write_document(d))` reproduces
/// `d` field for field (embeddings are stored separately).
pub fn write_document(doc: &Document) -> Result<Vec<u8>> {
    let tokens = doc
        .tokens
        .iter()
        .map(|t| TokenJson {
            text: t.text.clone(),
            sentence: t.sentence_index,
            paragraph: t.paragraph_index,
            category: t.category_hint,
            dep: t.dependency_relation.clone(),
            gender: t.gender_hint.code().into(),
            number: t.number_hint.code().into(),
            person: t.person_hint.code().into(),
        })
        .collect();
    let mentions = doc
        .mentions
        .iter()
        .map(|m| MentionJson {
            start: m.start,
            end: m.end,
            head: Some(m.head_token),
            level: Some(m.nesting_level),
            category: Some(m.category),
            chain: match &m.chain {
                ChainRef::Entity(id) => Some(ChainField::Name(id.clone())),
                ChainRef::Singleton => None,
            },
            plural: m.is_plural,
            confidence: Some(m.confidence),
        })
        .collect();
    let chain_genders = doc
        .chains
        .iter()
        .filter(|c| doc.mentions[c.mention_ids[0]].chain != ChainRef::Singleton)
        .filter(|c| c.gender_label != Gender::Unknown)
        .map(|c| (c.chain_id.clone(), c.gender_label.code().to_string()))
        .collect();
    let raw = DocumentJson {
        version: DOCUMENT_FORMAT_VERSION,
        doc_id: doc.doc_id.clone(),
        tokens,
        mentions,
        chain_genders,
    };
    serde_json::to_vec(&raw).map_err(|e| Error::Export(e.to_string()))
}
