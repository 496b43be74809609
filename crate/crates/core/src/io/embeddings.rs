//! Binary token-embedding files.
//!
//! Layout (all little-endian): magic `PRPC`, `u32` version (1), `u64`
//! token count, `u32` dimension, then `n_tokens * dim` `f32` values in
//! row-major order. Nothing may follow the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::EmbeddingMatrix;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"PRPC";
pub const EMBEDDING_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4;

pub fn encode_embeddings(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + matrix.as_slice().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.n_rows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.dim() as u32).to_le_bytes());
    for v in matrix.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Embedding(format!(
            "truncated header: {} bytes, need {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != EMBEDDING_MAGIC {
        return Err(Error::Embedding("bad magic, expected PRPC".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(Error::Embedding(format!("unsupported version {version}")));
    }
    let n_tokens = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as u64;
    let expected = n_tokens
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Embedding("declared shape overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    let got = payload.len() as u64;
    if got < expected {
        return Err(Error::Embedding(format!(
            "truncated payload: header declares {n_tokens}x{dim} ({expected} bytes), found {got}"
        )));
    }
    if got > expected {
        return Err(Error::Embedding(format!(
            "{} trailing bytes after {n_tokens}x{dim} payload",
            got - expected
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(n_tokens as usize, dim as usize, data)
}

pub fn write_embeddings(path: impl AsRef<Path>, matrix: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_embeddings(matrix))
        .map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn distinct_3x4() -> EmbeddingMatrix {
        let data = (0..12).map(|i| i as f32 * 0.25 - 1.0).collect();
        EmbeddingMatrix::new(3, 4, data).unwrap()
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.emb");
        let m = distinct_3x4();
        write_embeddings(&path, &m).unwrap();
        assert_eq!(read_embeddings(&path).unwrap(), m);
    }

    #[test]
    fn missing_row_is_truncation() {
        let m = EmbeddingMatrix::new(10, 2, vec![1.0; 20]).unwrap();
        let mut bytes = encode_embeddings(&m);
        bytes.truncate(bytes.len() - 8);
        let err = decode_embeddings(&bytes).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_embeddings(&distinct_3x4());
        bytes.push(0);
        assert!(decode_embeddings(&bytes).is_err());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_embeddings(&distinct_3x4());
        bytes[0] = b'X';
        assert!(decode_embeddings(&bytes).unwrap_err().to_string().contains("magic"));
        let mut bytes = encode_embeddings(&distinct_3x4());
        bytes[4] = 2;
        assert!(decode_embeddings(&bytes).unwrap_err().to_string().contains("version"));
    }

    proptest! {
        #[test]
        fn bit_identical_round_trip(rows in 0usize..6, dim in 1usize..6, seed in any::<u32>()) {
            let data: Vec<f32> = (0..rows * dim)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 7919) & 0x7f7f_ffff))
                .collect();
            let m = EmbeddingMatrix::new(rows, dim, data).unwrap();
            let back = decode_embeddings(&encode_embeddings(&m)).unwrap();
            let a: Vec<u32> = m.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
