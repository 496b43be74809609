use std::sync::Arc;

use litcoref::harness::{generate_synthetic_corpus, split_document, SyntheticCorpusConfig};
use litcoref::io::{export_conll, import_conll, read_document, read_embeddings, save_document, write_embeddings};
use litcoref::metrics::evaluate;
use litcoref::model::{validate_document, ClusteringStrategy, PipelineConfig};
use litcoref::pairs::{collect_pairs, evaluate_pair_scorer, train_pair_scorer, PairFeatureLayout, PairTrainConfig};
use litcoref::pipeline::{resolve_document, score_chains, span_chains, OracleScorer, ResolveConfig};
use proptest::prelude::*;

fn small(seed: u64) -> SyntheticCorpusConfig {
    SyntheticCorpusConfig {
        n_docs: 2,
        tokens_per_doc: 800,
        n_entities: 30,
        embedding_dim: 8,
        seed,
        ..Default::default()
    }
}

#[test]
fn disk_round_trip_then_resolve_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let doc = generate_synthetic_corpus(&small(1)).unwrap().documents.remove(0);
    let json = dir.path().join("d.json");
    let emb = dir.path().join("d.emb");
    save_document(&json, &doc).unwrap();
    write_embeddings(&emb, doc.embeddings().unwrap()).unwrap();

    let mut back = read_document(&json).unwrap();
    let m = read_embeddings(&emb).unwrap();
    back.attach_embeddings(Arc::new(m), 8).unwrap();
    assert_eq!(back.mentions, doc.mentions);
    assert_eq!(back.embeddings().unwrap(), doc.embeddings().unwrap());

    let r = resolve_document(&back, &OracleScorer, &ResolveConfig::default()).unwrap();
    assert_eq!(score_chains(&doc, &back, &r.chains).report().conll_f1, 1.0);

    // the CoNLL export carries the same partition
    let text = export_conll(&back, &r.chains).unwrap();
    let parsed = import_conll(&text).unwrap();
    assert_eq!(parsed.len(), 1);
    let report = evaluate(&span_chains(&doc, &doc.partition()), &parsed[0].partition());
    assert_eq!(report.conll_f1, 1.0);
}

#[test]
fn trained_scorer_beats_chance() {
    let corpus = generate_synthetic_corpus(&small(2)).unwrap().documents;
    let pipeline = PipelineConfig {
        embedding_dim: 8,
        ..Default::default()
    };
    let cfg = PairTrainConfig {
        batch_pairs: 256,
        learning_rate: 3e-3,
        max_epochs: 15,
        hidden: 16,
        dropout: 0.1,
        ..Default::default()
    };
    let trained = train_pair_scorer(&corpus, &pipeline, &cfg).unwrap();
    let data = collect_pairs(&corpus, &PairFeatureLayout::new(8), &pipeline).unwrap();
    let eval = evaluate_pair_scorer(&trained.model, &data).unwrap();
    assert!(eval.class1.f1 > 0.5, "{eval:?}");

    let mut rc = ResolveConfig {
        pipeline,
        ..Default::default()
    };
    for s in [ClusteringStrategy::LeftToRight, ClusteringStrategy::EasyFirstGlobal] {
        rc.pipeline.clustering_strategy = s;
        let r = resolve_document(&corpus[0], &trained.model, &rc).unwrap();
        let f = score_chains(&corpus[0], &corpus[0], &r.chains).report().conll_f1;
        assert!(f > 0.3, "{s:?}: {f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_documents_validate_and_split_conserves_tokens(
        seed in 0u64..1000,
        tokens in 300usize..1500,
        length in 50usize..2000,
    ) {
        let cfg = SyntheticCorpusConfig {
            n_docs: 1,
            tokens_per_doc: tokens,
            n_entities: 20,
            embedding_dim: 4,
            seed,
            ..Default::default()
        };
        let doc = generate_synthetic_corpus(&cfg).unwrap().documents.remove(0);
        prop_assert!(validate_document(&doc).is_empty());
        prop_assert_eq!(doc.n_tokens(), tokens);
        let out = split_document(&doc, length).unwrap();
        prop_assert_eq!(out.samples.len(), tokens / length);
        let kept: usize = out.samples.iter().map(|s| s.n_tokens()).sum();
        prop_assert_eq!(kept + out.remainder_tokens, tokens);
        // every mention lands in exactly one sample or the remainder
        let inside: usize = out.samples.iter().map(|s| s.mentions.len()).sum();
        let tail = doc.mentions.iter().filter(|m| m.start >= out.samples.len() * length).count();
        prop_assert_eq!(inside + tail + out.crossing_dropped, doc.mentions.len());
    }
}
