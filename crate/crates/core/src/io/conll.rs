//! CoNLL-2012 style export for external scorers, and the matching reader.
//!
//! One token per line, tab separated: document id, part number, token
//! position in its sentence, token text, coreference column. Sentences are
//! separated by blank lines. The coreference column uses `(k` to open,
//! `k)` to close and `(k)` for single-token mentions, joined by `|`, or `-`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{scan_nesting, Document};

/// Writes `doc` with `chains` (mention ids per chain) in the final column.
/// Chains are numbered from 1 in the order given.
pub fn export_conll(doc: &Document, chains: &[Vec<usize>]) -> Result<String> {
    let n = doc.tokens.len();
    let mut entries: Vec<(usize, usize, usize)> = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        for &m in chain {
            let mention = doc
                .mentions
                .get(m)
                .ok_or_else(|| Error::Export(format!("chain {} references unknown mention {m}", c + 1)))?;
            if mention.end >= n || mention.start > mention.end {
                return Err(Error::Export(format!("mention {m} has an invalid span")));
            }
            entries.push((mention.start, mention.end, c + 1));
        }
    }
    let spans: Vec<(usize, usize)> = entries.iter().map(|&(s, e, _)| (s, e)).collect();
    let scan = scan_nesting(&spans);
    if let Some(&(a, b)) = scan.crossings.first() {
        return Err(Error::Export(format!(
            "crossing spans {:?} and {:?} cannot be bracketed",
            spans[a], spans[b]
        )));
    }

    // Per token: openings outermost first, then single-token mentions,
    // then closings innermost first.
    let mut opens: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut singles: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut closes: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &(s, e, k) in &entries {
        if s == e {
            singles[s].push(k);
        } else {
            opens[s].push((e, k));
            closes[e].push((s, k));
        }
    }
    let mut out = String::new();
    out.push_str(&format!("#begin document ({}); part 000\n", doc.doc_id));
    let id = doc.doc_id.replace(char::is_whitespace, "_");
    for (si, range) in doc.sentences().into_iter().enumerate() {
        if si > 0 {
            out.push('\n');
        }
        for t in range.clone() {
            opens[t].sort_by(|a, b| b.cmp(a));
            singles[t].sort_unstable();
            closes[t].sort_by(|a, b| b.cmp(a));
            let mut cells: Vec<String> = Vec::new();
            cells.extend(opens[t].iter().map(|&(_, k)| format!("({k}")));
            cells.extend(singles[t].iter().map(|k| format!("({k})")));
            cells.extend(closes[t].iter().map(|&(_, k)| format!("{k})")));
            let coref = if cells.is_empty() { "-".to_string() } else { cells.join("|") };
            let mut text = doc.tokens[t].text.replace(char::is_whitespace, "_");
            if text.is_empty() {
                text = "_".into();
            }
            out.push_str(&format!("{id}\t0\t{}\t{text}\t{coref}\n", t - range.start));
        }
    }
    out.push_str("\n#end document\n");
    Ok(out)
}

/// A document read back from CoNLL text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConllDocument {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub sentence_of_token: Vec<usize>,
    /// `(start, end, chain number)` in order of closing.
    pub mentions: Vec<(usize, usize, usize)>,
}

impl ConllDocument {
    /// Chains as sorted span lists, ordered by their first span.
    pub fn partition(&self) -> Vec<Vec<(usize, usize)>> {
        let mut by_chain: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for &(s, e, k) in &self.mentions {
            by_chain.entry(k).or_default().push((s, e));
        }
        let mut out: Vec<Vec<(usize, usize)>> = by_chain
            .into_values()
            .map(|mut v| {
                v.sort_unstable();
                v
            })
            .collect();
        out.sort();
        out
    }
}

fn conll_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: format!("line {line}"),
        message: message.into(),
    }
}

pub fn import_conll(text: &str) -> Result<Vec<ConllDocument>> {
    let mut docs = Vec::new();
    let mut cur: Option<ConllDocument> = None;
    let mut open: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut sentence = 0usize;
    let mut blank_pending = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix("#begin document") {
            if cur.is_some() {
                return Err(conll_err(lineno, "nested #begin document"));
            }
            let id = rest
                .trim()
                .trim_start_matches('(')
                .split(')')
                .next()
                .unwrap_or("")
                .to_string();
            cur = Some(ConllDocument {
                doc_id: id,
                ..Default::default()
            });
            open.clear();
            sentence = 0;
            blank_pending = false;
            continue;
        }
        if line.starts_with("#end document") {
            let doc = cur.take().ok_or_else(|| conll_err(lineno, "#end document without #begin"))?;
            if let Some((k, _)) = open.iter().find(|(_, v)| !v.is_empty()) {
                return Err(conll_err(lineno, format!("chain {k} left open")));
            }
            docs.push(doc);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some(doc) = cur.as_mut() else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(conll_err(lineno, "token line outside a document"));
        };
        if line.trim().is_empty() {
            blank_pending = !doc.tokens.is_empty();
            continue;
        }
        if blank_pending {
            sentence += 1;
            blank_pending = false;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 5 {
            return Err(conll_err(lineno, format!("expected at least 5 columns, found {}", cols.len())));
        }
        let t = doc.tokens.len();
        doc.tokens.push(cols[3].to_string());
        doc.sentence_of_token.push(sentence);
        let coref = cols[cols.len() - 1];
        if coref == "-" {
            continue;
        }
        for part in coref.split('|') {
            let opens = part.starts_with('(');
            let closes = part.ends_with(')');
            let digits = part.trim_start_matches('(').trim_end_matches(')');
            let k: usize = digits
                .parse()
                .map_err(|_| conll_err(lineno, format!("bad coreference cell `{part}`")))?;
            match (opens, closes) {
                (true, true) => doc.mentions.push((t, t, k)),
                (true, false) => open.entry(k).or_default().push(t),
                (false, true) => {
                    let s = open
                        .get_mut(&k)
                        .and_then(|v| v.pop())
                        .ok_or_else(|| conll_err(lineno, format!("chain {k} closed but never opened")))?;
                    doc.mentions.push((s, t, k));
                }
                (false, false) => return Err(conll_err(lineno, format!("bad coreference cell `{part}`"))),
            }
        }
    }
    if cur.is_some() {
        return Err(conll_err(text.lines().count(), "missing #end document"));
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures::smith_sentence, Mention, MentionCategory, Token};
    use std::collections::BTreeMap;

    fn three_tokens(mentions: Vec<Mention>) -> Document {
        let tokens = (0..3).map(|i| Token::new(i, format!("w{i}"), 0)).collect();
        Document::build("d", tokens, mentions, &BTreeMap::new()).unwrap()
    }

    fn coref_column(text: &str) -> Vec<String> {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.rsplit('\t').next().unwrap().to_string())
            .collect()
    }

    #[test]
    fn one_chain_two_singles() {
        let doc = three_tokens(vec![
            Mention::new(0, 0, MentionCategory::Proper).with_chain("a"),
            Mention::new(2, 2, MentionCategory::Pronoun).with_chain("a"),
        ]);
        let text = export_conll(&doc, &doc.partition()).unwrap();
        assert_eq!(coref_column(&text), vec!["(1)", "-", "(1)"]);
    }

    #[test]
    fn nested_same_chain_stacks() {
        let doc = three_tokens(vec![
            Mention::new(0, 2, MentionCategory::Common).with_chain("a"),
            Mention::new(1, 1, MentionCategory::Pronoun).with_chain("a"),
        ]);
        let text = export_conll(&doc, &doc.partition()).unwrap();
        assert_eq!(coref_column(&text), vec!["(1", "(1)", "1)"]);
        let back = import_conll(&text).unwrap();
        assert_eq!(back[0].partition(), vec![vec![(0, 2), (1, 1)]]);
    }

    #[test]
    fn empty_chain_set_is_all_dashes() {
        let doc = three_tokens(vec![]);
        let text = export_conll(&doc, &[]).unwrap();
        assert_eq!(coref_column(&text), vec!["-", "-", "-"]);
    }

    #[test]
    fn crossing_spans_unencodable() {
        let tokens: Vec<Token> = (0..5).map(|i| Token::new(i, "x", 0)).collect();
        let mentions = vec![
            Mention::new(0, 2, MentionCategory::Common).with_chain("a"),
            Mention::new(2, 4, MentionCategory::Common).with_chain("b"),
        ];
        let doc = Document::assemble("x", tokens, mentions, &BTreeMap::new());
        assert!(matches!(export_conll(&doc, &doc.partition()), Err(Error::Export(_))));
    }

    #[test]
    fn smith_round_trip_partition() {
        let doc = smith_sentence();
        let text = export_conll(&doc, &doc.partition()).unwrap();
        let back = import_conll(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].doc_id, "smith");
        assert_eq!(back[0].tokens.len(), doc.tokens.len());
        let mut expected: Vec<Vec<(usize, usize)>> = doc
            .chains
            .iter()
            .map(|c| {
                let mut v: Vec<_> = c.mention_ids.iter().map(|&m| doc.mentions[m].span()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        expected.sort();
        assert_eq!(back[0].partition(), expected);
    }

    #[test]
    fn same_start_nested_in_one_chain() {
        let tokens: Vec<Token> = (0..4).map(|i| Token::new(i, "x", 0)).collect();
        let mentions = vec![
            Mention::new(0, 3, MentionCategory::Common).with_chain("a"),
            Mention::new(0, 1, MentionCategory::Common).with_chain("a"),
        ];
        let doc = Document::build("x", tokens, mentions, &BTreeMap::new()).unwrap();
        let text = export_conll(&doc, &doc.partition()).unwrap();
        assert_eq!(coref_column(&text), vec!["(1|(1", "1)", "-", "1)"]);
        assert_eq!(import_conll(&text).unwrap()[0].partition(), vec![vec![(0, 1), (0, 3)]]);
    }

    #[test]
    fn malformed_cells_rejected() {
        let text = "#begin document (d); part 000\nd\t0\t0\tw\t1)\n#end document\n";
        assert!(import_conll(text).is_err());
        let text = "#begin document (d); part 000\nd\t0\t0\tw\t(1\n#end document\n";
        assert!(import_conll(text).is_err());
    }
}
