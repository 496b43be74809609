//! On-disk formats: document JSON, embedding binaries, lexicons and CoNLL.

mod conll;
mod embeddings;
mod json;
mod lexicon;

pub use conll::{export_conll, import_conll, ConllDocument};
pub use embeddings::{
    decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, EMBEDDING_MAGIC,
    EMBEDDING_VERSION,
};
pub use json::{parse_document, write_document, DOCUMENT_FORMAT_VERSION};
pub use lexicon::{
    is_honorific, is_name_function_word, load_firstname_lexicon, load_gender_clue_lexicon,
    ClueKind, FirstNameLexicon, GenderClueLexicon, NameCounts, HONORIFICS, NAME_FUNCTION_WORDS,
};

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Document;

pub fn read_document(path: impl AsRef<Path>) -> Result<Document> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_document(&bytes)
}

pub fn save_document(path: impl AsRef<Path>, doc: &Document) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_document(doc)?).map_err(|e| Error::io(path, e))
}
