//! Mention detection from two level taggers, and tagger checkpoints.

use std::path::Path;

use rayon::prelude::*;

use super::bioes::bioes_decode;
use super::tagger::{sentence_matrix, TaggerConfig, TaggerModel};
use crate::error::{Error, Result};
use crate::model::{classify_mention, ChainRef, Document, Mention, MentionCategory, Number};
use crate::nn::{read_checkpoint, write_checkpoint};

pub const TAGGER_MAGIC: &[u8; 4] = b"PRTM";
pub const TAGGER_VERSION: u32 = 1;

pub fn encode_tagger(model: &TaggerModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, TAGGER_MAGIC, TAGGER_VERSION, &model.config, &model.params)?;
    Ok(buf)
}

pub fn decode_tagger(bytes: &[u8]) -> Result<TaggerModel> {
    let mut input = bytes;
    let (config, params): (TaggerConfig, _) = read_checkpoint(&mut input, TAGGER_MAGIC, TAGGER_VERSION)?;
    TaggerModel::from_params(config, params)
}

pub fn save_tagger(path: &Path, model: &TaggerModel) -> Result<()> {
    std::fs::write(path, encode_tagger(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_tagger(path: &Path) -> Result<TaggerModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tagger(&bytes)
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub document: Document,
    /// Spans found by both taggers; the more confident copy is kept.
    pub duplicates_merged: usize,
    /// Spans dropped because they crossed a more confident one.
    pub crossing_dropped: usize,
    /// Malformed tag fragments ignored while decoding.
    pub fragments_dropped: usize,
}

/// Deduplicates spans and removes crossings greedily, most confident first.
/// Returns the kept spans in canonical order with the two drop counts.
pub fn resolve_overlaps(mut spans: Vec<(usize, usize, f64)>) -> (Vec<(usize, usize, f64)>, usize, usize) {
    spans.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(b.1.cmp(&a.1)));
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    let (mut dup, mut crossing) = (0, 0);
    for s in spans {
        if kept.iter().any(|k| k.0 == s.0 && k.1 == s.1) {
            dup += 1;
            continue;
        }
        let crosses = kept
            .iter()
            .any(|k| (s.0 < k.0 && k.0 <= s.1 && s.1 < k.1) || (k.0 < s.0 && s.0 <= k.1 && k.1 < s.1));
        if crosses {
            crossing += 1;
            continue;
        }
        kept.push(s);
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    (kept, dup, crossing)
}

/// Runs the taggers sentence by sentence and builds the predicted mention
/// set. Every mention starts as a singleton with its head on the last token.
pub fn detect_mentions(level0: &TaggerModel, level1: Option<&TaggerModel>, doc: &Document) -> Result<Detection> {
    let emb = doc.embeddings()?;
    let taggers: Vec<&TaggerModel> = std::iter::once(level0).chain(level1).collect();
    let per_sentence: Vec<(Vec<(usize, usize, f64)>, usize)> = doc
        .sentences()
        .into_par_iter()
        .map(|range| {
            let x = sentence_matrix(emb, range.clone());
            let mut spans = Vec::new();
            let mut fragments = 0;
            for t in &taggers {
                let tagged = t.decode(x.view())?;
                let decoded = bioes_decode(&tagged.labels, &tagged.confidence);
                fragments += decoded.diagnostics;
                spans.extend(decoded.spans.into_iter().map(|(s, e, c)| (s + range.start, e + range.start, c)));
            }
            Ok((spans, fragments))
        })
        .collect::<Result<_>>()?;
    let mut all = Vec::new();
    let mut fragments_dropped = 0;
    for (spans, f) in per_sentence {
        all.extend(spans);
        fragments_dropped += f;
    }
    let (kept, duplicates_merged, crossing_dropped) = resolve_overlaps(all);
    let mentions = kept
        .into_iter()
        .map(|(s, e, c)| {
            let mut m = Mention::new(s, e, MentionCategory::Common);
            m.confidence = c;
            m.chain = ChainRef::Singleton;
            m.category = classify_mention(&m, &doc.tokens).category;
            m.is_plural = doc.tokens[e].number_hint == Number::Plural;
            m
        })
        .collect();
    Ok(Detection {
        document: doc.with_mentions(mentions),
        duplicates_merged,
        crossing_dropped,
        fragments_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmbeddingMatrix;
    use crate::model::Token;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    #[test]
    fn overlaps_keep_the_confident_span() {
        let (kept, dup, cross) = resolve_overlaps(vec![(0, 2, 0.9), (1, 3, 0.8), (0, 2, 0.7), (0, 0, 0.6)]);
        assert_eq!(kept, vec![(0, 2, 0.9), (0, 0, 0.6)]);
        assert_eq!((dup, cross), (1, 1));
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = TaggerModel::new(TaggerConfig::toy(3, 4));
        let bytes = encode_tagger(&model).unwrap();
        let back = decode_tagger(&bytes).unwrap();
        assert_eq!(back.config, model.config);
        assert_eq!(back.params.names, model.params.names);
        assert!(decode_tagger(&bytes[..bytes.len() - 2]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_tagger(&extra).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.prtm");
        save_tagger(&path, &model).unwrap();
        assert_eq!(load_tagger(&path).unwrap().params.shapes(), model.params.shapes());
    }

    #[test]
    fn detection_produces_valid_singletons() {
        let tokens: Vec<Token> = (0..6).map(|i| Token::new(i, format!("w{i}"), i / 3)).collect();
        let mut doc = Document::assemble("d", tokens, vec![], &BTreeMap::new());
        let mut m = EmbeddingMatrix::zeros(6, 3);
        for i in 0..6 {
            m.row_mut(i).copy_from_slice(&[i as f32 * 0.3, 1.0, -0.5]);
        }
        doc.attach_embeddings(Arc::new(m), 3).unwrap();
        let t = TaggerModel::new(TaggerConfig::toy(3, 4));
        let det = detect_mentions(&t, Some(&t), &doc).unwrap();
        let report = crate::model::validate_document(&det.document);
        assert!(report.is_empty(), "{report:?}");
        assert!(det.document.mentions.iter().all(|m| m.chain == ChainRef::Singleton));
        // the same tagger twice duplicates every span
        assert_eq!(det.duplicates_merged, det.document.mentions.len());
    }
}
