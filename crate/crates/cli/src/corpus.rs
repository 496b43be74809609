use std::path::{Path, PathBuf};
use std::sync::Arc;

use litcoref::io::{parse_document, read_embeddings};
use litcoref::model::Document;

use crate::Failure;

fn is_document_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".json") && !name.ends_with(".chains.json") && !name.ends_with("manifest.json")
}

/// Input paths with directories expanded to their document files, sorted.
pub fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_document_file(f))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Failure::Input("no input documents".into()));
    }
    Ok(out)
}

pub fn embedding_path(doc_path: &Path) -> PathBuf {
    doc_path.with_extension("emb")
}

/// Reads one document and attaches `<stem>.emb` when it exists. Returns
/// the files read.
pub fn load_document(path: &Path) -> Result<(Document, Vec<PathBuf>), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut doc = parse_document(&bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut read = vec![path.to_path_buf()];
    let emb = embedding_path(path);
    if emb.is_file() {
        let m = read_embeddings(&emb).map_err(|e| Failure::Input(e.to_string()))?;
        let dim = m.dim();
        doc.attach_embeddings(Arc::new(m), dim)
            .map_err(|e| Failure::Input(format!("{}: {e}", emb.display())))?;
        read.push(emb);
    }
    Ok((doc, read))
}

pub fn load_corpus(paths: &[PathBuf]) -> Result<(Vec<Document>, Vec<PathBuf>), Failure> {
    let mut docs = Vec::new();
    let mut read = Vec::new();
    for p in expand(paths)? {
        let (d, r) = load_document(&p)?;
        docs.push(d);
        read.extend(r);
    }
    Ok((docs, read))
}

/// Embedding width shared by every document of the corpus.
pub fn embedding_dim(corpus: &[Document]) -> Result<usize, Failure> {
    let mut dim = None;
    for d in corpus {
        let e = d.embeddings().map_err(|e| Failure::Input(e.to_string()))?;
        match dim {
            None => dim = Some(e.dim()),
            Some(k) if k != e.dim() => {
                return Err(Failure::Input(format!(
                    "{} has {}-dimensional embeddings, expected {k}",
                    d.doc_id,
                    e.dim()
                )))
            }
            _ => {}
        }
    }
    dim.ok_or_else(|| Failure::Input("empty corpus".into()))
}

/// File name used for a document id in output directories.
pub fn file_stem(doc_id: &str) -> String {
    doc_id
        .chars()
        .map(|c| if c.is_alphanumeric() || "-_.#".contains(c) { c } else { '_' })
        .collect()
}
