//! Classification of antecedent decisions against gold chains.

use serde::{Deserialize, Serialize};

use super::AntecedentDecision;
use crate::model::{Document, PipelineConfig};
use crate::pairs::candidate_antecedents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionOutcome {
    Correct,
    OutOfWindowWrongLink,
    OutOfWindowWrongNull,
    InWindowWrongLink,
    InWindowWrongNull,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTaxonomy {
    pub total: usize,
    pub correct: usize,
    pub out_of_window_wrong_link: usize,
    pub out_of_window_wrong_null: usize,
    pub in_window_wrong_link: usize,
    pub in_window_wrong_null: usize,
}

impl ErrorTaxonomy {
    pub fn record(&mut self, o: MentionOutcome) {
        self.total += 1;
        match o {
            MentionOutcome::Correct => self.correct += 1,
            MentionOutcome::OutOfWindowWrongLink => self.out_of_window_wrong_link += 1,
            MentionOutcome::OutOfWindowWrongNull => self.out_of_window_wrong_null += 1,
            MentionOutcome::InWindowWrongLink => self.in_window_wrong_link += 1,
            MentionOutcome::InWindowWrongNull => self.in_window_wrong_null += 1,
        }
    }

    pub fn add(&mut self, o: &ErrorTaxonomy) {
        self.total += o.total;
        self.correct += o.correct;
        self.out_of_window_wrong_link += o.out_of_window_wrong_link;
        self.out_of_window_wrong_null += o.out_of_window_wrong_null;
        self.in_window_wrong_link += o.in_window_wrong_link;
        self.in_window_wrong_null += o.in_window_wrong_null;
    }

    fn rate(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            n as f64 / self.total as f64
        }
    }

    pub fn correct_rate(&self) -> f64 {
        self.rate(self.correct)
    }

    pub fn out_of_window_rate(&self) -> f64 {
        self.rate(self.out_of_window_wrong_link + self.out_of_window_wrong_null)
    }

    pub fn in_window_rate(&self) -> f64 {
        self.rate(self.in_window_wrong_link + self.in_window_wrong_null)
    }
}

/// A decision is correct when it links to any earlier mention of the gold
/// chain, or is NULL for a chain-initial mention. A link made for a
/// chain-initial mention counts as an in-window wrong link.
pub fn classify_decisions(
    decisions: &[AntecedentDecision],
    gold: &Document,
    config: &PipelineConfig,
) -> Vec<MentionOutcome> {
    let chain = gold.chain_of_mentions();
    decisions
        .iter()
        .map(|d| {
            let i = d.anaphor;
            let has_gold = (0..i).any(|j| chain[j] == chain[i]);
            let linked_right = d.antecedent.is_some_and(|a| chain[a] == chain[i]);
            if !has_gold {
                return if d.antecedent.is_none() {
                    MentionOutcome::Correct
                } else {
                    MentionOutcome::InWindowWrongLink
                };
            }
            if linked_right {
                return MentionOutcome::Correct;
            }
            let reachable = candidate_antecedents(&gold.mentions, i, config)
                .into_iter()
                .any(|j| chain[j] == chain[i]);
            match (reachable, d.antecedent.is_some()) {
                (false, true) => MentionOutcome::OutOfWindowWrongLink,
                (false, false) => MentionOutcome::OutOfWindowWrongNull,
                (true, true) => MentionOutcome::InWindowWrongLink,
                (true, false) => MentionOutcome::InWindowWrongNull,
            }
        })
        .collect()
}

pub fn antecedent_error_report(
    decisions: &[AntecedentDecision],
    gold: &Document,
    config: &PipelineConfig,
) -> ErrorTaxonomy {
    let mut t = ErrorTaxonomy::default();
    for o in classify_decisions(decisions, gold, config) {
        t.record(o);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::super::oracle_decisions;
    use super::*;
    use crate::model::{Mention, MentionCategory, Token};
    use std::collections::BTreeMap;

    /// Mentions on consecutive tokens; `chains[i]` is the gold chain of i.
    fn line(chains: &[&str]) -> Document {
        let tokens = (0..chains.len()).map(|i| Token::new(i, format!("w{i}"), 0)).collect();
        let mentions = chains
            .iter()
            .enumerate()
            .map(|(i, c)| Mention::new(i, i, MentionCategory::Common).with_chain(*c))
            .collect();
        Document::build("t", tokens, mentions, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn oracle_is_all_correct_in_window() {
        let doc = line(&["a", "b", "a", "c", "b", "a"]);
        let cfg = PipelineConfig::default();
        let t = antecedent_error_report(&oracle_decisions(&doc, &cfg), &doc, &cfg);
        assert_eq!(t.correct, 6);
        assert_eq!(t.correct_rate(), 1.0);
    }

    #[test]
    fn one_gap_beyond_window() {
        let cfg = PipelineConfig {
            noun_window: 3,
            ..Default::default()
        };
        // gold gap between the two "a" mentions is 4 = window + 1
        let doc = line(&["a", "b", "c", "d", "a"]);
        let t = antecedent_error_report(&oracle_decisions(&doc, &cfg), &doc, &cfg);
        assert_eq!(t.out_of_window_wrong_null, 1);
        assert_eq!(t.correct, 4);
        assert!((t.out_of_window_rate() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wrong_links_and_nulls() {
        let doc = line(&["a", "b", "a"]);
        let cfg = PipelineConfig::default();
        let mk = |i, a| AntecedentDecision {
            anaphor: i,
            antecedent: a,
            best_score: 0.0,
            scores: vec![],
        };
        let outcomes = classify_decisions(&[mk(0, None), mk(1, Some(0)), mk(2, Some(1))], &doc, &cfg);
        assert_eq!(
            outcomes,
            vec![
                MentionOutcome::Correct,
                MentionOutcome::InWindowWrongLink,
                MentionOutcome::InWindowWrongLink
            ]
        );
        assert_eq!(classify_decisions(&[mk(2, None)], &doc, &cfg), vec![MentionOutcome::InWindowWrongNull]);
    }
}
