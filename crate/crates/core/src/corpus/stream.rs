//! Token stream output.
//!
//! JSONL: one object per frame, `{"seq": label, "t": index, "tokens": [...],
//! "weights": [...]}`, with `t` counted from 0 within each sequence.
//!
//! Binary (all little-endian): magic `SILT`, version byte 1, then per frame a
//! record of `u32` label length, label bytes (UTF-8), `u32 t`, `u32 n`,
//! `n` x `u32` token ids and `n` x `f64` weights.

use std::io::{self, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SilhouetteSequence;
use crate::scalar::Scalar;
use crate::vocab::{encode_sequence, FrequencyTable, TokenFrame, VocabularyMap};

pub const BINARY_MAGIC: &[u8; 4] = b"SILT";
pub const BINARY_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenFormat {
    #[default]
    Jsonl,
    Binary,
}

/// One frame of a token stream as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub seq: String,
    pub t: usize,
    pub tokens: Vec<u32>,
    pub weights: Vec<f64>,
}

#[derive(Serialize)]
struct RecordRef<'a, T> {
    seq: &'a str,
    t: usize,
    tokens: &'a [u32],
    weights: &'a [T],
}

pub fn write_jsonl_frame<W: Write, T: Scalar>(
    out: &mut W,
    label: &str,
    frame: &TokenFrame<T>,
) -> Result<()> {
    let record = RecordRef {
        seq: label,
        t: frame.index,
        tokens: &frame.tokens,
        weights: &frame.weights,
    };
    serde_json::to_writer(&mut *out, &record)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_binary_header<W: Write>(out: &mut W) -> io::Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&[BINARY_VERSION])
}

pub fn write_binary_frame<W: Write, T: Scalar>(
    out: &mut W,
    label: &str,
    frame: &TokenFrame<T>,
) -> Result<()> {
    let len = |n: usize| {
        u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{n} does not fit 32 bits")))
    };
    out.write_all(&len(label.len())?.to_le_bytes())?;
    out.write_all(label.as_bytes())?;
    out.write_all(&len(frame.index)?.to_le_bytes())?;
    out.write_all(&len(frame.tokens.len())?.to_le_bytes())?;
    for &t in &frame.tokens {
        out.write_all(&t.to_le_bytes())?;
    }
    for &w in &frame.weights {
        out.write_all(&w.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

/// Tokenizes the corpus and writes every frame in corpus order. Sequences
/// are encoded in parallel; the bytes written do not depend on the number of
/// workers. Returns the number of frames written.
pub fn tokenize_corpus<W: Write, T: Scalar>(
    corpus: &[SilhouetteSequence],
    vocab: &VocabularyMap,
    freq: &FrequencyTable<T>,
    format: TokenFormat,
    out: &mut W,
) -> Result<usize> {
    let encoded: Vec<Vec<TokenFrame<T>>> = corpus
        .par_iter()
        .map(|seq| encode_sequence(seq, vocab, freq).map_err(|e| e.at_path(seq.source())))
        .collect::<Result<_>>()?;
    if format == TokenFormat::Binary {
        write_binary_header(out)?;
    }
    let mut frames = 0;
    for (seq, tfs) in corpus.iter().zip(&encoded) {
        for tf in tfs {
            match format {
                TokenFormat::Jsonl => write_jsonl_frame(out, seq.label(), tf)?,
                TokenFormat::Binary => write_binary_frame(out, seq.label(), tf)?,
            }
            frames += 1;
        }
    }
    Ok(frames)
}

pub fn read_jsonl(text: &str) -> Result<Vec<TokenRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn read_binary(mut input: impl Read) -> Result<Vec<TokenRecord>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let malformed = |offset: usize, message: &str| Error::Malformed {
        format: "token stream",
        offset,
        message: message.into(),
    };
    if bytes.len() < 5 || &bytes[..4] != BINARY_MAGIC {
        return Err(malformed(0, "bad magic"));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(malformed(4, "unsupported version"));
    }
    let mut pos = 5;
    let take = |n: usize, pos: &mut usize| -> Result<&[u8]> {
        let slice = bytes
            .get(*pos..*pos + n)
            .ok_or_else(|| malformed(*pos, "unexpected end of stream"))?;
        *pos += n;
        Ok(slice)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
    let mut records = Vec::new();
    while pos < bytes.len() {
        let label_len = u32_at(take(4, &mut pos)?);
        let at = pos;
        let seq = std::str::from_utf8(take(label_len, &mut pos)?)
            .map_err(|_| malformed(at, "label is not UTF-8"))?
            .to_string();
        let t = u32_at(take(4, &mut pos)?);
        let n = u32_at(take(4, &mut pos)?);
        let tokens = take(4 * n, &mut pos)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let weights = take(8 * n, &mut pos)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        records.push(TokenRecord {
            seq,
            t,
            tokens,
            weights,
        });
    }
    Ok(records)
}
