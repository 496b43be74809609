//! Character gender from surface clues, first names and coreference.
//!
//! Three cumulative stages: clue rules, then the first-name lexicon on
//! proper mentions still undecided, then the majority label of each chain
//! spread to all of its mentions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::io::{is_honorific, FirstNameLexicon, GenderClueLexicon};
use crate::metrics::Prf;
use crate::model::{Document, Gender, Mention, MentionCategory};

pub const DEFAULT_NAME_RATIO: f64 = 0.9;

/// Tokens of `m` that are not inside a mention nested in it.
fn own_tokens(m: &Mention, doc: &Document) -> Vec<usize> {
    let mut covered = vec![false; m.len()];
    for n in doc.mentions[m.id + 1..].iter().take_while(|n| n.start <= m.end) {
        if m.contains(n) && n.span() != m.span() {
            for t in n.token_range() {
                covered[t - m.start] = true;
            }
        }
    }
    m.token_range()
        .filter(|&t| !covered[t - m.start] || t == m.head_token)
        .collect()
}

/// Gender from explicit clues on the mention's own tokens. Unknown when no
/// clue is found or clues disagree.
pub fn heuristic_gender(mention: &Mention, doc: &Document, lexicon: &GenderClueLexicon) -> Gender {
    let mut found = Gender::Unknown;
    for t in own_tokens(mention, doc) {
        for (_, g) in lexicon.lookup(&doc.tokens[t].text) {
            if found == Gender::Unknown {
                found = g;
            } else if found != g {
                return Gender::Unknown;
            }
        }
    }
    found
}

/// Lexicon gender of the first non-honorific token of a proper mention.
pub fn firstname_gender(
    mention: &Mention,
    doc: &Document,
    lexicon: &FirstNameLexicon,
    ratio_threshold: f64,
) -> Gender {
    if mention.category != MentionCategory::Proper {
        return Gender::Unknown;
    }
    doc.tokens[mention.token_range()]
        .iter()
        .find(|t| !is_honorific(&t.text))
        .map_or(Gender::Unknown, |t| lexicon.gender_of(&t.text, ratio_threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderSource {
    Heuristic,
    Firstname,
    Propagated,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MentionGender {
    pub label: Gender,
    pub source: GenderSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGender {
    pub mentions: Vec<usize>,
    pub label: Gender,
    /// Share of decided mentions carrying the majority label; 0 when the
    /// chain is undecided.
    pub ratio: f64,
    /// Singleton or plural chains take no part in propagation.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenderAssignment {
    pub mentions: Vec<MentionGender>,
    pub chains: Vec<ChainGender>,
}

impl GenderAssignment {
    pub fn labels(&self) -> Vec<Gender> {
        self.mentions.iter().map(|m| m.label).collect()
    }
}

/// Stage 1: clue rules on every mention.
pub fn rule_stage(doc: &Document, clues: &GenderClueLexicon) -> Vec<MentionGender> {
    doc.mentions
        .iter()
        .map(|m| match heuristic_gender(m, doc, clues) {
            Gender::Unknown => MentionGender::default(),
            g => MentionGender {
                label: g,
                source: GenderSource::Heuristic,
            },
        })
        .collect()
}

/// Stage 2: first names for proper mentions left undecided by stage 1.
pub fn lexicon_stage(
    doc: &Document,
    previous: &[MentionGender],
    names: &FirstNameLexicon,
    ratio_threshold: f64,
) -> Vec<MentionGender> {
    doc.mentions
        .iter()
        .zip(previous)
        .map(|(m, p)| {
            if p.label.is_known() {
                return *p;
            }
            match firstname_gender(m, doc, names, ratio_threshold) {
                Gender::Unknown => *p,
                g => MentionGender {
                    label: g,
                    source: GenderSource::Firstname,
                },
            }
        })
        .collect()
}

/// Majority label of a chain over its decided mentions: `(label, ratio)`,
/// unknown on ties or when nothing is decided.
pub fn chain_majority(labels: impl IntoIterator<Item = Gender>) -> (Gender, f64) {
    let (mut m, mut f) = (0usize, 0usize);
    for g in labels {
        match g {
            Gender::Masculine => m += 1,
            Gender::Feminine => f += 1,
            Gender::Unknown => {}
        }
    }
    let decided = (m + f) as f64;
    if m > f {
        (Gender::Masculine, m as f64 / decided)
    } else if f > m {
        (Gender::Feminine, f as f64 / decided)
    } else {
        (Gender::Unknown, 0.0)
    }
}

/// Stage 3: every mention of a chain with a decided majority takes that
/// label. Mentions of undecided or excluded chains keep their label.
pub fn propagate_gender(
    chains: &[Vec<usize>],
    is_plural: &[bool],
    labels: &[MentionGender],
) -> GenderAssignment {
    let mut mentions = labels.to_vec();
    let chains = chains
        .iter()
        .map(|c| {
            let excluded = c.len() < 2 || c.iter().any(|&m| is_plural[m]);
            let (label, ratio) = if excluded {
                (Gender::Unknown, 0.0)
            } else {
                chain_majority(c.iter().map(|&m| labels[m].label))
            };
            if label.is_known() {
                for &m in c {
                    if mentions[m].label != label {
                        mentions[m] = MentionGender {
                            label,
                            source: GenderSource::Propagated,
                        };
                    }
                }
            }
            ChainGender {
                mentions: c.clone(),
                label,
                ratio,
                excluded,
            }
        })
        .collect();
    GenderAssignment { mentions, chains }
}

fn stage_assignment(chains: &[Vec<usize>], labels: Vec<MentionGender>) -> GenderAssignment {
    GenderAssignment {
        chains: chains
            .iter()
            .map(|c| ChainGender {
                mentions: c.clone(),
                label: Gender::Unknown,
                ratio: 0.0,
                excluded: false,
            })
            .collect(),
        mentions: labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderStage {
    Rules,
    Lexicon,
    Coreference,
}

impl GenderStage {
    pub const ALL: [GenderStage; 3] = [GenderStage::Rules, GenderStage::Lexicon, GenderStage::Coreference];

    pub fn as_str(self) -> &'static str {
        match self {
            GenderStage::Rules => "rules",
            GenderStage::Lexicon => "+lexicon",
            GenderStage::Coreference => "+coreference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedGender {
    pub rules: GenderAssignment,
    pub lexicon: GenderAssignment,
    pub coreference: GenderAssignment,
}

impl StagedGender {
    pub fn stage(&self, s: GenderStage) -> &GenderAssignment {
        match s {
            GenderStage::Rules => &self.rules,
            GenderStage::Lexicon => &self.lexicon,
            GenderStage::Coreference => &self.coreference,
        }
    }
}

/// Runs the three stages over `doc`, propagating along `chains`
/// (predicted or gold partitions of the document's mentions).
pub fn infer_gender(
    doc: &Document,
    chains: &[Vec<usize>],
    clues: &GenderClueLexicon,
    names: &FirstNameLexicon,
    ratio_threshold: f64,
) -> StagedGender {
    let s1 = rule_stage(doc, clues);
    let s2 = lexicon_stage(doc, &s1, names, ratio_threshold);
    let plural: Vec<bool> = doc.mentions.iter().map(|m| m.is_plural).collect();
    StagedGender {
        coreference: propagate_gender(chains, &plural, &s2),
        rules: stage_assignment(chains, s1),
        lexicon: stage_assignment(chains, s2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub predicted: usize,
    pub support: usize,
}

impl ClassCounts {
    pub fn prf(&self) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Prf::new(ratio(self.tp, self.predicted), ratio(self.tp, self.support))
    }

    fn add(&mut self, o: &ClassCounts) {
        self.tp += o.tp;
        self.predicted += o.predicted;
        self.support += o.support;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenderCounts {
    pub masculine: ClassCounts,
    pub feminine: ClassCounts,
}

impl GenderCounts {
    pub fn add(&mut self, o: &GenderCounts) {
        self.masculine.add(&o.masculine);
        self.feminine.add(&o.feminine);
    }

    /// Both classes pooled.
    pub fn overall(&self) -> ClassCounts {
        let mut c = self.masculine;
        c.add(&self.feminine);
        c
    }
}

/// Mentions whose gold chain has a known gender, two or more mentions and
/// no plural mention.
pub fn evaluable_mentions(gold: &Document) -> Vec<(usize, Gender)> {
    let mut out = Vec::new();
    for c in &gold.chains {
        if !c.gender_label.is_known()
            || c.mention_ids.len() < 2
            || c.mention_ids.iter().any(|&m| gold.mentions[m].is_plural)
        {
            continue;
        }
        out.extend(c.mention_ids.iter().map(|&m| (m, c.gender_label)));
    }
    out.sort_unstable();
    out
}

/// Per-class counts of `assignment` against gold chain genders. Mention ids
/// of the assignment must refer to `gold`'s mentions.
pub fn evaluate_gender(assignment: &GenderAssignment, gold: &Document) -> GenderCounts {
    let mut c = GenderCounts::default();
    for (m, g) in evaluable_mentions(gold) {
        let p = assignment.mentions[m].label;
        for (class, counts) in [(Gender::Masculine, &mut c.masculine), (Gender::Feminine, &mut c.feminine)] {
            counts.support += usize::from(g == class);
            counts.predicted += usize::from(p == class);
            counts.tp += usize::from(p == class && g == class);
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenderReport {
    pub rules: GenderCounts,
    pub lexicon: GenderCounts,
    pub coreference: GenderCounts,
}

impl GenderReport {
    pub fn add_document(&mut self, staged: &StagedGender, gold: &Document) {
        self.rules.add(&evaluate_gender(&staged.rules, gold));
        self.lexicon.add(&evaluate_gender(&staged.lexicon, gold));
        self.coreference.add(&evaluate_gender(&staged.coreference, gold));
    }

    pub fn stage(&self, s: GenderStage) -> &GenderCounts {
        match s {
            GenderStage::Rules => &self.rules,
            GenderStage::Lexicon => &self.lexicon,
            GenderStage::Coreference => &self.coreference,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("stage\tclass\tprecision\trecall\tf1\tsupport\n");
        for st in GenderStage::ALL {
            let c = self.stage(st);
            for (name, k) in [("masculine", c.masculine), ("feminine", c.feminine), ("all", c.overall())] {
                let p = k.prf();
                let _ = writeln!(
                    s,
                    "{}\t{name}\t{:.4}\t{:.4}\t{:.4}\t{}",
                    st.as_str(),
                    p.precision,
                    p.recall,
                    p.f1,
                    k.support
                );
            }
        }
        s
    }
}
