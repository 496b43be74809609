//! Non-overlapping fixed-length samples and the document-length sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricReport, Prf};
use crate::model::{ChainRef, ClusteringStrategy, Document, Gender, Mention, Token};
use crate::pipeline::{resolve_document, score_chains, PairScore, ResolveConfig};

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub samples: Vec<Document>,
    /// Mentions lost because they straddle a sample boundary.
    pub crossing_dropped: usize,
    /// Trailing tokens that do not fill a whole sample.
    pub remainder_tokens: usize,
}

/// Cuts `doc` into `floor(n / length)` samples of exactly `length` tokens.
/// Sample `k` is named `{doc_id}#{k}`; chain ids keep their names but are
/// scoped to the sample, and the surviving mentions of a chain that spans
/// samples form one chain per sample. A chain left with a single mention in
/// a sample becomes that sample's singleton.
pub fn split_document(doc: &Document, length: usize) -> Result<SplitOutcome> {
    if length == 0 {
        return Err(Error::Config("sample length must be at least 1".into()));
    }
    let n = doc.n_tokens();
    let n_samples = n / length;
    let genders: BTreeMap<String, Gender> = doc
        .chains
        .iter()
        .map(|c| (c.chain_id.clone(), c.gender_label))
        .collect();
    let chain = doc.chain_of_mentions();
    let mut crossing = 0;
    let mut samples = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let (lo, hi) = (k * length, (k + 1) * length);
        let tokens: Vec<Token> = doc.tokens[lo..hi]
            .iter()
            .enumerate()
            .map(|(i, t)| Token { index: i, ..t.clone() })
            .collect();
        let mut mentions = Vec::new();
        for m in &doc.mentions {
            let inside_start = (lo..hi).contains(&m.start);
            let inside_end = (lo..hi).contains(&m.end);
            if inside_start != inside_end {
                // counted once, at the sample holding its start
                if inside_start {
                    crossing += 1;
                }
                continue;
            }
            if !inside_start {
                continue;
            }
            let chain_ref = match &m.chain {
                ChainRef::Entity(_) => ChainRef::Entity(doc.chains[chain[m.id]].chain_id.clone()),
                ChainRef::Singleton => ChainRef::Singleton,
            };
            mentions.push(Mention {
                start: m.start - lo,
                end: m.end - lo,
                head_token: m.head_token.clamp(m.start, m.end) - lo,
                chain: chain_ref,
                ..m.clone()
            });
        }
        let mut sample = Document::assemble(format!("{}#{k}", doc.doc_id), tokens, mentions, &genders);
        if let Some(e) = &doc.embeddings {
            sample.embeddings = Some(Arc::new(e.slice_rows(lo..hi)));
        }
        samples.push(sample);
    }
    if crossing > 0 {
        log::info!("{}: {crossing} mentions cross a {length}-token boundary and were dropped", doc.doc_id);
    }
    Ok(SplitOutcome {
        samples,
        crossing_dropped: crossing,
        remainder_tokens: n - n_samples * length,
    })
}

/// Field-wise mean of reports; the default report for an empty slice.
pub fn mean_report(reports: &[MetricReport]) -> MetricReport {
    if reports.is_empty() {
        return MetricReport::default();
    }
    let k = reports.len() as f64;
    let avg = |f: fn(&MetricReport) -> Prf| Prf {
        precision: reports.iter().map(|r| f(r).precision).sum::<f64>() / k,
        recall: reports.iter().map(|r| f(r).recall).sum::<f64>() / k,
        f1: reports.iter().map(|r| f(r).f1).sum::<f64>() / k,
    };
    MetricReport {
        muc: avg(|r| r.muc),
        b_cubed: avg(|r| r.b_cubed),
        ceaf_e: avg(|r| r.ceaf_e),
        conll_f1: reports.iter().map(|r| r.conll_f1).sum::<f64>() / k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocSweep {
    pub doc_id: String,
    pub samples: usize,
    pub crossing_dropped: usize,
    pub remainder_tokens: usize,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSweepPoint {
    pub length: usize,
    pub strategy: ClusteringStrategy,
    pub retained_docs: usize,
    /// No document reached this length; `report` is meaningless.
    pub empty: bool,
    pub docs: Vec<DocSweep>,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSweepResult {
    pub points: Vec<LengthSweepPoint>,
}

/// For each length: every retained document is split, each sample is
/// resolved and scored on its own, sample scores are averaged per
/// document and document scores are macro-averaged.
pub fn length_sweep(
    corpus: &[Document],
    lengths: &[usize],
    scorer: &dyn PairScore,
    config: &ResolveConfig,
) -> Result<LengthSweepResult> {
    config.pipeline.validate()?;
    let jobs: Vec<(usize, usize)> = lengths
        .iter()
        .flat_map(|&l| (0..corpus.len()).map(move |d| (l, d)))
        .collect();
    let results: Vec<Option<DocSweep>> = jobs
        .par_iter()
        .map(|&(l, d)| {
            let doc = &corpus[d];
            if doc.n_tokens() < l || l == 0 {
                return Ok(None);
            }
            let split = split_document(doc, l)?;
            let reports = split
                .samples
                .iter()
                .map(|s| {
                    let r = resolve_document(s, scorer, config)?;
                    Ok(score_chains(s, s, &r.chains).report())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Some(DocSweep {
                doc_id: doc.doc_id.clone(),
                samples: split.samples.len(),
                crossing_dropped: split.crossing_dropped,
                remainder_tokens: split.remainder_tokens,
                report: mean_report(&reports),
            }))
        })
        .collect::<Result<_>>()?;
    let mut results = results.into_iter();
    let points = lengths
        .iter()
        .map(|&length| {
            let docs: Vec<DocSweep> = results.by_ref().take(corpus.len()).flatten().collect();
            let reports: Vec<MetricReport> = docs.iter().map(|d| d.report).collect();
            if docs.is_empty() {
                log::warn!("no document has {length} tokens or more");
            }
            LengthSweepPoint {
                length,
                strategy: config.pipeline.clustering_strategy,
                retained_docs: docs.len(),
                empty: docs.is_empty(),
                report: mean_report(&reports),
                docs,
            }
        })
        .collect();
    Ok(LengthSweepResult { points })
}

impl LengthSweepResult {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "length\tstrategy\tretained_docs\tsamples\tmuc_f1\tb_cubed_f1\tceaf_e_f1\tconll_f1\n",
        );
        for p in &self.points {
            let samples: usize = p.docs.iter().map(|d| d.samples).sum();
            if p.empty {
                let _ = writeln!(s, "{}\t{}\t0\t0\tNA\tNA\tNA\tNA", p.length, p.strategy.as_str());
                continue;
            }
            let r = &p.report;
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                p.length,
                p.strategy.as_str(),
                p.retained_docs,
                samples,
                r.muc.f1,
                r.b_cubed.f1,
                r.ceaf_e.f1,
                r.conll_f1
            );
        }
        s
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for p in &self.points {
            s.push_str(&serde_json::to_string(p).map_err(|e| Error::Export(e.to_string()))?);
            s.push('\n');
        }
        Ok(s)
    }

    /// Two columns per line, length and CoNLL F1 in percent; empty lengths
    /// are left out.
    pub fn to_gnuplot(&self) -> String {
        let mut s = String::new();
        if let Some(p) = self.points.first() {
            let _ = writeln!(s, "# strategy {}", p.strategy.as_str());
        }
        s.push_str("# length\tconll_f1\n");
        for p in self.points.iter().filter(|p| !p.empty) {
            let _ = writeln!(s, "{}\t{:.4}", p.length, 100.0 * p.report.conll_f1);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EmbeddingMatrix, MentionCategory};
    use crate::pipeline::OracleScorer;

    fn long_doc(n: usize) -> Document {
        let tokens = (0..n).map(|i| Token::new(i, format!("w{i}"), i / 10)).collect();
        let mentions = vec![
            Mention::new(5, 5, MentionCategory::Proper).with_chain("a"),
            Mention::new(1999, 2000, MentionCategory::Common).with_chain("a"),
            Mention::new(2005, 2005, MentionCategory::Pronoun).with_chain("a"),
            Mention::new(2006, 2006, MentionCategory::Pronoun).with_chain("a"),
            Mention::new(4500, 4500, MentionCategory::Pronoun).with_chain("b"),
        ]
        .into_iter()
        .filter(|m| m.end < n)
        .collect();
        let mut d = Document::build("d", tokens, mentions, &BTreeMap::new()).unwrap();
        let mut e = EmbeddingMatrix::zeros(n, 2);
        for i in 0..n {
            e.row_mut(i)[0] = i as f32;
        }
        d.attach_embeddings(Arc::new(e), 2).unwrap();
        d
    }

    #[test]
    fn exact_division() {
        let d = long_doc(10_000);
        let s = split_document(&d, 2000).unwrap();
        assert_eq!(s.samples.len(), 5);
        assert_eq!(s.remainder_tokens, 0);
        assert_eq!(s.crossing_dropped, 1);
        assert_eq!(s.samples[1].doc_id, "d#1");
        let total: usize = s.samples.iter().map(Document::n_tokens).sum();
        assert_eq!(total + s.remainder_tokens, 10_000);
        // chain "a" is split into a singleton in sample 0 and a pair in sample 1
        assert_eq!(s.samples[0].mentions.len(), 1);
        assert_eq!(s.samples[1].chains.len(), 1);
        assert_eq!(s.samples[1].chains[0].mention_ids, vec![0, 1]);
        assert_eq!(s.samples[1].mentions[0].start, 5);
        assert_eq!(s.samples[2].embeddings().unwrap().row(0)[0], 4000.0);
        for smp in &s.samples {
            assert!(crate::model::validate_document(smp).is_empty());
        }
    }

    #[test]
    fn remainder_is_dropped() {
        let d = long_doc(9_999);
        let s = split_document(&d, 2000).unwrap();
        assert_eq!(s.samples.len(), 4);
        assert_eq!(s.remainder_tokens, 1999);
        assert!(split_document(&d, 20_000).unwrap().samples.is_empty());
        assert!(split_document(&d, 0).is_err());
    }

    #[test]
    fn sweep_single_sample_equals_direct_evaluation() {
        let d = long_doc(4000);
        let cfg = ResolveConfig::default();
        let sweep = length_sweep(std::slice::from_ref(&d), &[4000, 8000], &OracleScorer, &cfg).unwrap();
        let direct = score_chains(&d, &d, &resolve_document(&d, &OracleScorer, &cfg).unwrap().chains).report();
        assert_eq!(sweep.points[0].report, direct);
        assert_eq!(sweep.points[0].retained_docs, 1);
        assert!(sweep.points[1].empty);
        assert!(sweep.to_tsv().lines().nth(2).unwrap().ends_with("NA"));
        assert_eq!(sweep.to_gnuplot().lines().count(), 3);
        assert_eq!(sweep.to_jsonl().unwrap().lines().count(), 2);
    }

    #[test]
    fn macro_mean_of_equal_reports_is_that_report() {
        let r = MetricReport {
            muc: Prf::new(0.5, 0.25),
            b_cubed: Prf::new(1.0, 0.5),
            ceaf_e: Prf::new(0.3, 0.9),
            conll_f1: 0.4,
        };
        let m = mean_report(&[r, r, r]);
        assert!((m.muc.f1 - r.muc.f1).abs() < 1e-15 && (m.conll_f1 - 0.4).abs() < 1e-15);
    }
}
