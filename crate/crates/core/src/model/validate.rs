use std::collections::BTreeMap;
use std::fmt;

use super::{nesting::scan_nesting, ChainRef, Document, MAX_NESTING_LEVEL};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TokenIndex { position: usize, found: usize },
    SentenceOrder { token: usize },
    ParagraphOrder { token: usize },
    SpanReversed { mention: usize, start: usize, end: usize },
    SpanOutOfRange { mention: usize, end: usize, n_tokens: usize },
    HeadOutsideSpan { mention: usize, head: usize },
    Confidence { mention: usize, value: f64 },
    MentionId { position: usize, found: usize },
    MentionOrder { mention: usize },
    DuplicateSpan { first: usize, second: usize },
    CrossingSpans { first: usize, second: usize },
    NestingLevel { mention: usize, declared: usize, computed: usize },
    NestingTooDeep { mention: usize, level: usize },
    ChainUnknownMention { chain: String, mention: usize },
    ChainUnsorted { chain: String },
    EmptyChain { chain: String },
    MentionUnassigned { mention: usize },
    MentionInSeveralChains { mention: usize, chains: Vec<String> },
    ChainRefMismatch { mention: usize, chain: String },
    EmbeddingRows { rows: usize, tokens: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            TokenIndex { position, found } => {
                write!(f, "token at position {position} carries index {found}")
            }
            SentenceOrder { token } => write!(f, "token {token}: sentence index decreases"),
            ParagraphOrder { token } => write!(f, "token {token}: paragraph index decreases"),
            SpanReversed { mention, start, end } => {
                write!(f, "mention {mention}: end {end} < start {start}")
            }
            SpanOutOfRange { mention, end, n_tokens } => {
                write!(f, "mention {mention}: end {end} beyond {n_tokens} tokens")
            }
            HeadOutsideSpan { mention, head } => {
                write!(f, "mention {mention}: head token {head} outside span")
            }
            Confidence { mention, value } => {
                write!(f, "mention {mention}: confidence {value} outside [0, 1]")
            }
            MentionId { position, found } => {
                write!(f, "mention at position {position} carries id {found}")
            }
            MentionOrder { mention } => {
                write!(f, "mention {mention}: not in (start asc, end desc) order")
            }
            DuplicateSpan { first, second } => {
                write!(f, "mentions {first} and {second} share the same span")
            }
            CrossingSpans { first, second } => {
                write!(f, "mentions {first} and {second} overlap without nesting")
            }
            NestingLevel { mention, declared, computed } => write!(
                f,
                "mention {mention}: nesting level {declared}, computed {computed}"
            ),
            NestingTooDeep { mention, level } => write!(
                f,
                "mention {mention}: nesting level {level} exceeds {MAX_NESTING_LEVEL}"
            ),
            ChainUnknownMention { chain, mention } => {
                write!(f, "chain {chain}: unknown mention {mention}")
            }
            ChainUnsorted { chain } => write!(f, "chain {chain}: mention ids not sorted"),
            EmptyChain { chain } => write!(f, "chain {chain}: no mentions"),
            MentionUnassigned { mention } => write!(f, "mention {mention}: in no chain"),
            MentionInSeveralChains { mention, chains } => {
                write!(f, "mention {mention}: in several chains ({})", chains.join(", "))
            }
            ChainRefMismatch { mention, chain } => write!(
                f,
                "mention {mention}: chain reference disagrees with chain {chain}"
            ),
            EmbeddingRows { rows, tokens } => {
                write!(f, "embedding has {rows} rows for {tokens} tokens")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Lists every broken invariant of the document. An empty report means the
/// document is well formed.
pub fn validate_document(doc: &Document) -> ValidationReport {
    let mut out = Vec::new();
    let n = doc.tokens.len();

    for (pos, tok) in doc.tokens.iter().enumerate() {
        if tok.index != pos {
            out.push(Violation::TokenIndex {
                position: pos,
                found: tok.index,
            });
        }
        if pos > 0 {
            let prev = &doc.tokens[pos - 1];
            if tok.sentence_index < prev.sentence_index {
                out.push(Violation::SentenceOrder { token: pos });
            }
            if tok.paragraph_index < prev.paragraph_index {
                out.push(Violation::ParagraphOrder { token: pos });
            }
        }
    }

    // Mentions with unusable spans are reported once and left out of the
    // structural checks below.
    let mut usable = vec![true; doc.mentions.len()];
    for (pos, m) in doc.mentions.iter().enumerate() {
        if m.id != pos {
            out.push(Violation::MentionId {
                position: pos,
                found: m.id,
            });
        }
        if m.end < m.start {
            out.push(Violation::SpanReversed {
                mention: pos,
                start: m.start,
                end: m.end,
            });
            usable[pos] = false;
            continue;
        }
        if m.end >= n {
            out.push(Violation::SpanOutOfRange {
                mention: pos,
                end: m.end,
                n_tokens: n,
            });
            usable[pos] = false;
            continue;
        }
        if m.head_token < m.start || m.head_token > m.end {
            out.push(Violation::HeadOutsideSpan {
                mention: pos,
                head: m.head_token,
            });
        }
        if !(0.0..=1.0).contains(&m.confidence) {
            out.push(Violation::Confidence {
                mention: pos,
                value: m.confidence,
            });
        }
    }

    let kept: Vec<usize> = (0..doc.mentions.len()).filter(|&i| usable[i]).collect();
    for w in kept.windows(2) {
        let (a, b) = (&doc.mentions[w[0]], &doc.mentions[w[1]]);
        if (a.start, std::cmp::Reverse(a.end)) > (b.start, std::cmp::Reverse(b.end)) {
            out.push(Violation::MentionOrder { mention: w[1] });
        }
    }
    let spans: Vec<(usize, usize)> = kept.iter().map(|&i| doc.mentions[i].span()).collect();
    let scan = scan_nesting(&spans);
    for &(a, b) in &scan.duplicates {
        out.push(Violation::DuplicateSpan {
            first: kept[a],
            second: kept[b],
        });
    }
    for &(a, b) in &scan.crossings {
        out.push(Violation::CrossingSpans {
            first: kept[a],
            second: kept[b],
        });
    }
    if scan.crossings.is_empty() {
        for (k, &i) in kept.iter().enumerate() {
            let m = &doc.mentions[i];
            let level = scan.levels[k];
            if level > MAX_NESTING_LEVEL {
                out.push(Violation::NestingTooDeep { mention: i, level });
            } else if m.nesting_level != level {
                out.push(Violation::NestingLevel {
                    mention: i,
                    declared: m.nesting_level,
                    computed: level,
                });
            }
        }
    }

    let mut owners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (c, chain) in doc.chains.iter().enumerate() {
        if chain.mention_ids.is_empty() {
            out.push(Violation::EmptyChain {
                chain: chain.chain_id.clone(),
            });
        }
        if chain.mention_ids.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Violation::ChainUnsorted {
                chain: chain.chain_id.clone(),
            });
        }
        for &m in &chain.mention_ids {
            if m >= doc.mentions.len() {
                out.push(Violation::ChainUnknownMention {
                    chain: chain.chain_id.clone(),
                    mention: m,
                });
            } else {
                owners.entry(m).or_default().push(c);
            }
        }
    }
    for (i, m) in doc.mentions.iter().enumerate() {
        match owners.get(&i).map(|v| v.as_slice()) {
            None | Some([]) => out.push(Violation::MentionUnassigned { mention: i }),
            Some([c]) => {
                let chain = &doc.chains[*c];
                let agrees = match &m.chain {
                    ChainRef::Entity(id) => *id == chain.chain_id,
                    ChainRef::Singleton => chain.mention_ids.len() == 1,
                };
                if !agrees {
                    out.push(Violation::ChainRefMismatch {
                        mention: i,
                        chain: chain.chain_id.clone(),
                    });
                }
            }
            Some(many) => {
                let mut chains: Vec<String> =
                    many.iter().map(|&c| doc.chains[c].chain_id.clone()).collect();
                chains.dedup();
                out.push(Violation::MentionInSeveralChains { mention: i, chains });
            }
        }
    }

    if let Some(e) = &doc.embeddings {
        if e.n_rows() != n {
            out.push(Violation::EmbeddingRows {
                rows: e.n_rows(),
                tokens: n,
            });
        }
    }

    ValidationReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::smith_sentence;

    #[test]
    fn well_formed_fixture_has_empty_report() {
        let doc = smith_sentence();
        assert!(validate_document(&doc).is_empty());
    }

    #[test]
    fn reversed_span_is_one_violation() {
        let mut doc = smith_sentence();
        // John is a singleton at token 5; reverse its span in place.
        doc.mentions[1].start = 6;
        doc.mentions[1].end = 5;
        let report = validate_document(&doc);
        assert_eq!(report.len(), 1, "{report}");
        assert!(matches!(report.violations[0], Violation::SpanReversed { mention: 1, .. }));
    }

    #[test]
    fn mention_in_two_chains_is_one_violation() {
        let mut doc = smith_sentence();
        let john = doc.mentions[1].id;
        doc.chains[0].mention_ids.push(john);
        doc.chains[0].mention_ids.sort_unstable();
        let report = validate_document(&doc);
        assert_eq!(report.len(), 1, "{report}");
        assert!(matches!(
            report.violations[0],
            Violation::MentionInSeveralChains { mention: 1, .. }
        ));
    }

    #[test]
    fn duplicate_span_detected() {
        let doc = smith_sentence();
        let mut mentions = doc.mentions.clone();
        mentions.push(mentions[1].clone());
        let bad = Document::assemble("dup", doc.tokens.clone(), mentions, &Default::default());
        let report = validate_document(&bad);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateSpan { .. })));
    }

    #[test]
    fn wrong_level_and_bad_head() {
        let mut doc = smith_sentence();
        doc.mentions[0].nesting_level = 1;
        doc.mentions[2].head_token = 0;
        let report = validate_document(&doc);
        assert_eq!(report.len(), 2, "{report}");
    }

    #[test]
    fn partition_sizes_sum_to_mentions() {
        let doc = smith_sentence();
        let total: usize = doc.chains.iter().map(|c| c.mention_ids.len()).sum();
        assert_eq!(total, doc.mentions.len());
    }
}
