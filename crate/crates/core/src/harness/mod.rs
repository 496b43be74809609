//! Length sweeps, corpus statistics, antecedent distances and synthetic
//! corpora.

mod split;
mod stats;
mod synth;

pub use split::{
    length_sweep, mean_report, split_document, DocSweep, LengthSweepPoint, LengthSweepResult, SplitOutcome,
};
pub use stats::{
    antecedent_distance_distribution, antecedent_distances, corpus_stats, nearest_rank, CorpusStats,
    DistanceDistribution, DistanceRow, DISTANCE_PERCENTILES,
};
pub use synth::{
    capitalized_corpus, generate_synthetic_corpus, CapitalizedCorpusConfig, PoolName, SyntheticCorpus,
    SyntheticCorpusConfig,
};

/// Long documents of proper mentions only, whose gaps straddle the default
/// noun window of 300 mentions.
pub fn window_split_config(seed: u64) -> SyntheticCorpusConfig {
    SyntheticCorpusConfig {
        n_docs: 3,
        tokens_per_doc: 10_000,
        n_entities: 800,
        mentions_per_entity: 1_000.0,
        pronoun_ratio: 0.0,
        proper_ratio: 1.0,
        proper_gap: 400.0,
        tokens_per_mention: 2.5,
        coordination_rate: 0.01,
        seed,
        ..Default::default()
    }
}

/// Short documents with gaps well inside every window.
pub fn short_config(seed: u64) -> SyntheticCorpusConfig {
    SyntheticCorpusConfig {
        n_docs: 6,
        tokens_per_doc: 1_500,
        seed,
        ..Default::default()
    }
}

/// Most pronouns carry no gender mark, so surface clues alone leave
/// many mentions undecided.
pub fn gender_config(seed: u64) -> SyntheticCorpusConfig {
    SyntheticCorpusConfig {
        n_docs: 4,
        tokens_per_doc: 3_000,
        n_entities: 40,
        pronoun_ratio: 0.6,
        proper_ratio: 0.2,
        ungendered_pronoun_ratio: 0.6,
        seed,
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MentionCategory;

    #[test]
    fn gap_medians_match_configuration() {
        let cfg = SyntheticCorpusConfig {
            n_docs: 3,
            tokens_per_doc: 6_000,
            seed: 5,
            coordination_rate: 0.0,
            ..Default::default()
        };
        let corpus = generate_synthetic_corpus(&cfg).unwrap();
        let dist = antecedent_distance_distribution(&corpus.documents);
        for (cat, want) in [
            (MentionCategory::Pronoun, cfg.pronoun_gap),
            (MentionCategory::Common, cfg.common_gap),
            (MentionCategory::Proper, cfg.proper_gap),
        ] {
            let v = &dist.distances[&cat];
            let median = nearest_rank(v, 50).unwrap() as f64;
            assert!((median - want).abs() <= 0.2 * want, "{cat:?}: median {median}, want {want}");
        }
        let pron = dist.rows.iter().find(|r| r.category == MentionCategory::Pronoun).unwrap();
        assert!(pron.percentiles[2] <= 7, "pronoun p95 {}", pron.percentiles[2]);
    }

    #[test]
    fn window_split_family_straddles_the_window() {
        let corpus = generate_synthetic_corpus(&window_split_config(1)).unwrap();
        let d = &corpus.documents[0];
        assert_eq!(d.n_tokens(), 10_000);
        let v = &antecedent_distance_distribution(&corpus.documents).distances[&MentionCategory::Proper];
        let beyond = v.iter().filter(|&&k| k > 300).count() as f64 / v.len() as f64;
        assert!(beyond > 0.2 && beyond < 0.8, "share beyond window {beyond}");
    }
}
