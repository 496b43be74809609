//! Python bindings for litcoref.
//!
//! Structured results (metric reports, statistics, sweeps) come back as
//! plain Python dicts and lists.

use std::path::PathBuf;
use std::sync::Arc;

use litcoref::detector::{detect_mentions, load_tagger, TaggerModel};
use litcoref::gender::{infer_gender, GenderReport, DEFAULT_NAME_RATIO};
use litcoref::harness::{
    antecedent_distance_distribution, corpus_stats, gender_config, generate_synthetic_corpus, length_sweep,
    short_config, split_document, window_split_config, SyntheticCorpusConfig,
};
use litcoref::io::{
    load_firstname_lexicon, load_gender_clue_lexicon, parse_document, read_embeddings, write_document,
    FirstNameLexicon, GenderClueLexicon,
};
use litcoref::metrics::evaluate;
use litcoref::model::{validate_document, ChainRef, ClusteringStrategy, Document};
use litcoref::pairs::PairScorerModel;
use litcoref::pipeline::{
    resolve_document, score_chains, span_chains, NoisyOracleScorer, OracleScorer, PairScore, ResolveConfig,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

fn err(e: litcoref::Error) -> PyErr {
    use litcoref::Error as E;
    match e {
        E::Io { .. } | E::Training(_) | E::Checkpoint(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Converts any serialisable value to Python objects through JSON.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn strategy(name: &str) -> PyResult<ClusteringStrategy> {
    match name.replace('-', "_").as_str() {
        "left_to_right" => Ok(ClusteringStrategy::LeftToRight),
        "easy_first_global" => Ok(ClusteringStrategy::EasyFirstGlobal),
        other => Err(PyValueError::new_err(format!("unknown strategy {other:?}"))),
    }
}

/// An annotated or predicted document.
#[pyclass(name = "Document", module = "pylitcoref")]
#[derive(Clone)]
pub struct PyDocument {
    pub inner: Document,
}

#[pymethods]
impl PyDocument {
    /// Parses document JSON.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyDocument {
            inner: parse_document(text.as_bytes()).map_err(err)?,
        })
    }

    /// Reads a document file and, when given, its embedding binary.
    #[staticmethod]
    #[pyo3(signature = (path, embeddings=None))]
    fn load(path: PathBuf, embeddings: Option<PathBuf>) -> PyResult<Self> {
        let mut doc = litcoref::io::read_document(&path).map_err(err)?;
        if let Some(e) = embeddings {
            let m = read_embeddings(&e).map_err(err)?;
            let dim = m.dim();
            doc.attach_embeddings(Arc::new(m), dim).map_err(err)?;
        }
        Ok(PyDocument { inner: doc })
    }

    fn to_json(&self) -> PyResult<String> {
        let bytes = write_document(&self.inner).map_err(err)?;
        String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn attach_embeddings(&mut self, path: PathBuf) -> PyResult<()> {
        let m = read_embeddings(&path).map_err(err)?;
        let dim = m.dim();
        self.inner.attach_embeddings(Arc::new(m), dim).map_err(err)
    }

    #[getter]
    fn doc_id(&self) -> &str {
        &self.inner.doc_id
    }

    #[getter]
    fn n_tokens(&self) -> usize {
        self.inner.n_tokens()
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.inner.tokens.iter().map(|t| t.text.clone()).collect()
    }

    /// `(start, end, category, chain)` per mention; `end` is inclusive and
    /// `chain` is None for singletons.
    #[getter]
    fn mentions(&self) -> Vec<(usize, usize, &'static str, Option<String>)> {
        self.inner
            .mentions
            .iter()
            .map(|m| {
                let chain = match &m.chain {
                    ChainRef::Entity(id) => Some(id.clone()),
                    ChainRef::Singleton => None,
                };
                (m.start, m.end, m.category.as_str(), chain)
            })
            .collect()
    }

    /// Gold chains as lists of mention ids.
    #[getter]
    fn chains(&self) -> Vec<Vec<usize>> {
        self.inner.partition()
    }

    /// Invariant violations, empty for a well-formed document.
    fn validate(&self) -> Vec<String> {
        validate_document(&self.inner)
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    fn mention_text(&self, mention_id: usize) -> PyResult<String> {
        let m = self
            .inner
            .mentions
            .get(mention_id)
            .ok_or_else(|| PyValueError::new_err(format!("no mention {mention_id}")))?;
        Ok(self.inner.mention_text(m))
    }

    fn __len__(&self) -> usize {
        self.inner.n_tokens()
    }

    fn __repr__(&self) -> String {
        format!(
            "Document({:?}, tokens={}, mentions={})",
            self.inner.doc_id,
            self.inner.n_tokens(),
            self.inner.mentions.len()
        )
    }
}

/// A trained mention-pair scorer checkpoint.
#[pyclass(name = "PairScorer", module = "pylitcoref")]
pub struct PyPairScorer {
    inner: PairScorerModel,
}

#[pymethods]
impl PyPairScorer {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyPairScorer {
            inner: PairScorerModel::load(&path).map_err(err)?,
        })
    }

    /// Coreference probability of each `(antecedent, anaphor)` pair.
    fn score_pairs(&self, doc: &PyDocument, pairs: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
        self.inner.score_pairs(&doc.inner, &pairs).map_err(err)
    }

    #[getter]
    fn embedding_dim(&self) -> usize {
        self.inner.config.layout.embedding_dim
    }
}

/// A trained mention tagger for one nesting level.
#[pyclass(name = "Tagger", module = "pylitcoref")]
pub struct PyTagger {
    inner: TaggerModel,
}

#[pymethods]
impl PyTagger {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTagger {
            inner: load_tagger(&path).map_err(err)?,
        })
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.config.level
    }
}

/// Predicts mentions with a level-0 tagger and an optional level-1 tagger.
#[pyfunction]
#[pyo3(signature = (doc, level0, level1=None))]
fn detect(doc: &PyDocument, level0: &PyTagger, level1: Option<&PyTagger>) -> PyResult<PyDocument> {
    let d = detect_mentions(&level0.inner, level1.map(|t| &t.inner), &doc.inner).map_err(err)?;
    Ok(PyDocument { inner: d.document })
}

/// Resolves coreference over the document's mentions.
///
/// `scorer` is a PairScorer, "oracle" for gold-derived scores, or None
/// with `noisy_error_rate` set for gold-derived scores with flipped pairs.
#[pyfunction]
#[pyo3(signature = (doc, scorer=None, strategy="left_to_right", noisy_error_rate=None, margin=0.1, seed=0))]
fn resolve(
    py: Python<'_>,
    doc: &PyDocument,
    scorer: Option<&Bound<'_, PyAny>>,
    strategy: &str,
    noisy_error_rate: Option<f64>,
    margin: f64,
    seed: u64,
) -> PyResult<PyObject> {
    let mut rc = ResolveConfig::default();
    rc.pipeline.clustering_strategy = self::strategy(strategy)?;
    let noisy;
    let model;
    let scorer: &dyn PairScore = match (scorer, noisy_error_rate) {
        (Some(s), None) if s.extract::<String>().is_ok_and(|s| s == "oracle") => &OracleScorer,
        (Some(s), None) => {
            model = s.downcast::<PyPairScorer>()?.borrow();
            rc.pipeline.embedding_dim = model.inner.config.layout.embedding_dim;
            &model.inner
        }
        (None, Some(error_rate)) => {
            noisy = NoisyOracleScorer {
                error_rate,
                margin,
                seed,
            };
            &noisy
        }
        _ => return Err(PyValueError::new_err("give exactly one of scorer and noisy_error_rate")),
    };
    let r = resolve_document(&doc.inner, scorer, &rc).map_err(err)?;
    to_py(py, &r.output(&doc.inner.doc_id))
}

/// MUC, B³, CEAFe and CoNLL F1 between two partitions of hashable items.
#[pyfunction]
fn score<'py>(
    py: Python<'py>,
    gold: Vec<Vec<Bound<'py, PyAny>>>,
    pred: Vec<Vec<Bound<'py, PyAny>>>,
) -> PyResult<PyObject> {
    // items are compared with Python equality
    let mut keys: Vec<Bound<'py, PyAny>> = Vec::new();
    let mut side = |p: &[Vec<Bound<'py, PyAny>>]| -> PyResult<Vec<Vec<usize>>> {
        let mut out = Vec::with_capacity(p.len());
        for cluster in p {
            let mut ids = Vec::with_capacity(cluster.len());
            for x in cluster {
                let mut found = None;
                for (i, k) in keys.iter().enumerate() {
                    if k.eq(x)? {
                        found = Some(i);
                        break;
                    }
                }
                ids.push(found.unwrap_or_else(|| {
                    keys.push(x.clone());
                    keys.len() - 1
                }));
            }
            out.push(ids);
        }
        Ok(out)
    };
    let g = side(&gold)?;
    let p = side(&pred)?;
    to_py(py, &evaluate(&g, &p))
}

/// Scores predicted chains (mention ids of `pred`) against `gold` by span.
#[pyfunction]
#[pyo3(signature = (gold, pred, chains=None))]
fn score_documents(py: Python<'_>, gold: &PyDocument, pred: &PyDocument, chains: Option<Vec<Vec<usize>>>) -> PyResult<PyObject> {
    let chains = chains.unwrap_or_else(|| pred.inner.partition());
    if let Some(bad) = chains.iter().flatten().find(|&&m| m >= pred.inner.mentions.len()) {
        return Err(PyValueError::new_err(format!("no mention {bad} in the predicted document")));
    }
    to_py(py, &score_chains(&gold.inner, &pred.inner, &chains).report())
}

/// Chains of mention ids rewritten as `(start, end)` span lists.
#[pyfunction]
fn chain_spans(doc: &PyDocument, chains: Vec<Vec<usize>>) -> PyResult<Vec<Vec<(usize, usize)>>> {
    if chains.iter().flatten().any(|&m| m >= doc.inner.mentions.len()) {
        return Err(PyValueError::new_err("mention id out of range"));
    }
    Ok(span_chains(&doc.inner, &chains))
}

#[pyfunction]
fn stats(py: Python<'_>, docs: Vec<PyRef<'_, PyDocument>>) -> PyResult<PyObject> {
    let corpus: Vec<Document> = docs.iter().map(|d| d.inner.clone()).collect();
    to_py(py, &corpus_stats(&corpus))
}

/// Nearest-antecedent distance percentiles per mention category.
#[pyfunction]
fn antecedent_distances(py: Python<'_>, docs: Vec<PyRef<'_, PyDocument>>) -> PyResult<PyObject> {
    let corpus: Vec<Document> = docs.iter().map(|d| d.inner.clone()).collect();
    to_py(py, &antecedent_distance_distribution(&corpus))
}

/// Consecutive samples of exactly `length` tokens and the tokens left over.
#[pyfunction]
fn split(doc: &PyDocument, length: usize) -> PyResult<(Vec<PyDocument>, usize)> {
    let out = split_document(&doc.inner, length).map_err(err)?;
    Ok((
        out.samples.into_iter().map(|inner| PyDocument { inner }).collect(),
        out.remainder_tokens,
    ))
}

/// Mean scores over fixed-length samples, resolved with gold-derived pair
/// scores.
#[pyfunction]
#[pyo3(signature = (docs, lengths, strategy="left_to_right"))]
fn oracle_length_sweep(
    py: Python<'_>,
    docs: Vec<PyRef<'_, PyDocument>>,
    lengths: Vec<usize>,
    strategy: &str,
) -> PyResult<PyObject> {
    let corpus: Vec<Document> = docs.iter().map(|d| d.inner.clone()).collect();
    let mut rc = ResolveConfig::default();
    rc.pipeline.clustering_strategy = self::strategy(strategy)?;
    let result = py
        .allow_threads(|| length_sweep(&corpus, &lengths, &OracleScorer, &rc))
        .map_err(err)?;
    to_py(py, &result)
}

/// Three-stage gender inference evaluated against gold chain genders.
///
/// `chains` defaults to each document's gold chains. Returns the report
/// as a dict and as TSV text.
#[pyfunction]
#[pyo3(signature = (docs, firstnames=None, clues=None, chains=None, threshold=DEFAULT_NAME_RATIO))]
fn gender(
    py: Python<'_>,
    docs: Vec<PyRef<'_, PyDocument>>,
    firstnames: Option<PathBuf>,
    clues: Option<PathBuf>,
    chains: Option<Vec<Vec<Vec<usize>>>>,
    threshold: f64,
) -> PyResult<(PyObject, String)> {
    let names = match firstnames {
        Some(p) => load_firstname_lexicon(&p).map_err(err)?,
        None => FirstNameLexicon::default(),
    };
    let clues = match clues {
        Some(p) => load_gender_clue_lexicon(&p).map_err(err)?,
        None => GenderClueLexicon::french_default(),
    };
    if chains.as_ref().is_some_and(|c| c.len() != docs.len()) {
        return Err(PyValueError::new_err("one chain list per document"));
    }
    let mut report = GenderReport::default();
    for (i, d) in docs.iter().enumerate() {
        let ch = chains.as_ref().map_or_else(|| d.inner.partition(), |c| c[i].clone());
        let staged = infer_gender(&d.inner, &ch, &clues, &names, threshold);
        report.add_document(&staged, &d.inner);
    }
    Ok((to_py(py, &report)?, report.to_tsv()))
}

/// Generates a synthetic corpus. `family` is one of custom, window_split,
/// short and gender; `config` is JSON overriding the custom defaults.
/// Returns the documents and the first-name lexicon as TSV text.
#[pyfunction]
#[pyo3(signature = (family="custom", seed=0, config=None))]
fn synthetic_corpus(family: &str, seed: u64, config: Option<&str>) -> PyResult<(Vec<PyDocument>, String)> {
    let cfg = match family.replace('-', "_").as_str() {
        "custom" => {
            let mut c: SyntheticCorpusConfig = match config {
                Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
                None => SyntheticCorpusConfig::default(),
            };
            c.seed = seed;
            c
        }
        "window_split" => window_split_config(seed),
        "short" => short_config(seed),
        "gender" => gender_config(seed),
        other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
    };
    let corpus = generate_synthetic_corpus(&cfg).map_err(err)?;
    let names = corpus.first_names.to_tsv();
    Ok((
        corpus.documents.into_iter().map(|inner| PyDocument { inner }).collect(),
        names,
    ))
}

#[pymodule]
pub fn pylitcoref(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDocument>()?;
    m.add_class::<PyPairScorer>()?;
    m.add_class::<PyTagger>()?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(resolve, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(score_documents, m)?)?;
    m.add_function(wrap_pyfunction!(chain_spans, m)?)?;
    m.add_function(wrap_pyfunction!(stats, m)?)?;
    m.add_function(wrap_pyfunction!(antecedent_distances, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_length_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(gender, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    Ok(())
}
