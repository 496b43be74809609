//! Proper-name keys, global must-link propagation and coordination
//! cannot-links.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AntecedentDecision;
use crate::io::{is_honorific, is_name_function_word};
use crate::model::{Document, Mention, MentionCategory};
use crate::text::{fold, is_punctuation};

/// Folded, sorted token multiset of a proper mention.
pub type ProperKey = Vec<String>;

pub const FRENCH_CONJUNCTIONS: &[&str] = &["et", "ainsi que", "ni"];

/// Key of a proper mention without titles, determiners or punctuation.
/// `None` for other categories or when nothing is left.
pub fn proper_key(m: &Mention, doc: &Document) -> Option<ProperKey> {
    if m.category != MentionCategory::Proper {
        return None;
    }
    let mut key: Vec<String> = doc.tokens[m.token_range()]
        .iter()
        .map(|t| t.text.as_str())
        .filter(|w| !is_punctuation(w) && !is_honorific(w) && !is_name_function_word(w))
        .map(fold)
        .collect();
    key.sort();
    (!key.is_empty()).then_some(key)
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Pairs that must end up together; closed transitively.
    pub must_link: BTreeSet<(usize, usize)>,
    pub cannot_link: BTreeSet<(usize, usize)>,
}

impl ConstraintSet {
    pub fn add_must(&mut self, a: usize, b: usize) {
        if a != b {
            self.must_link.insert(pair(a, b));
        }
    }

    pub fn add_cannot(&mut self, a: usize, b: usize) {
        if a != b {
            self.cannot_link.insert(pair(a, b));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.must_link.is_empty() && self.cannot_link.is_empty()
    }
}

fn keys_of(doc: &Document) -> Vec<Option<ProperKey>> {
    doc.mentions.iter().map(|m| proper_key(m, doc)).collect()
}

/// Must-links implied by unanimous local evidence between proper keys.
///
/// Every locally scored pair of proper mentions votes for its key pair.
/// When all votes for (K1, K2) are above `threshold`, every mention bearing
/// K1 or K2 is linked to the others. Links are returned as a spanning path
/// over those mentions, which has the same transitive closure.
pub fn global_proper_propagation(
    doc: &Document,
    decisions: &[AntecedentDecision],
    threshold: f64,
) -> BTreeSet<(usize, usize)> {
    let keys = keys_of(doc);
    let mut votes: BTreeMap<(&ProperKey, &ProperKey), bool> = BTreeMap::new();
    for d in decisions {
        let Some(ka) = keys[d.anaphor].as_ref() else {
            continue;
        };
        for &(c, s) in &d.scores {
            let Some(kc) = keys[c].as_ref() else {
                continue;
            };
            let kp = if ka <= kc { (ka, kc) } else { (kc, ka) };
            let agree = s > threshold;
            votes.entry(kp).and_modify(|v| *v &= agree).or_insert(agree);
        }
    }
    let mut by_key: BTreeMap<&ProperKey, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        if let Some(k) = k {
            by_key.entry(k).or_default().push(i);
        }
    }
    let mut out = BTreeSet::new();
    for ((k1, k2), unanimous) in votes {
        if !unanimous {
            continue;
        }
        let mut members: Vec<usize> = by_key[k1].clone();
        if k1 != k2 {
            members.extend(&by_key[k2]);
        }
        members.sort_unstable();
        for w in members.windows(2) {
            out.insert(pair(w[0], w[1]));
        }
    }
    out
}

fn separated_by_conjunction(doc: &Document, from: usize, to: usize, conjunctions: &[Vec<String>]) -> bool {
    if from >= to {
        return false;
    }
    let between: Vec<String> = doc.tokens[from..to].iter().map(|t| fold(&t.text)).collect();
    conjunctions
        .iter()
        .any(|c| !c.is_empty() && between.windows(c.len()).any(|w| w == c.as_slice()))
}

/// Cannot-links between the two members of coordinated plural mentions
/// ("[[Ralph] et [M. Delmare]]"), spread to every mention sharing either
/// member's proper key.
pub fn extract_cannot_links(doc: &Document, conjunctions: &[&str]) -> BTreeSet<(usize, usize)> {
    let conj: Vec<Vec<String>> = conjunctions
        .iter()
        .map(|c| c.split_whitespace().map(fold).collect())
        .collect();
    let keys = keys_of(doc);
    let mut out = BTreeSet::new();
    for p in doc.mentions.iter().filter(|m| m.is_plural) {
        let children: Vec<&Mention> = doc
            .mentions
            .iter()
            .filter(|m| m.id != p.id && p.contains(m) && m.span() != p.span())
            .filter(|m| m.nesting_level == p.nesting_level + 1)
            .collect();
        let [a, b] = children.as_slice() else {
            continue;
        };
        let (a, b) = if a.start <= b.start { (a, b) } else { (b, a) };
        if !separated_by_conjunction(doc, a.end + 1, b.start, &conj) {
            continue;
        }
        let spread = |m: &Mention| -> Vec<usize> {
            match &keys[m.id] {
                Some(k) => (0..keys.len()).filter(|&i| keys[i].as_ref() == Some(k)).collect(),
                None => vec![m.id],
            }
        };
        let (sa, sb) = if keys[a.id].is_some() && keys[a.id] == keys[b.id] {
            (vec![a.id], vec![b.id])
        } else {
            (spread(a), spread(b))
        };
        for &x in &sa {
            for &y in &sb {
                if x != y {
                    out.insert(pair(x, y));
                }
            }
        }
    }
    out
}
