//! Expansion of contour/velocity pixels into a language-model token space,
//! token frequency estimation and the reciprocal-frequency coefficients.
//!
//! The expansion is an injective map from `(channel, pixel)` onto the token
//! ids `[0, 2 * S_L)`. Seed 0 is the identity layout (contour pixel `i` is
//! token `i`, velocity pixel `i` is token `S_L + i`); any other seed applies a
//! Fisher-Yates shuffle of those ids driven by SplitMix64.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{extract_sequence_maps, ContourMap, VelocityMap};
use crate::grid::SilhouetteSequence;
use crate::rng::{splitmix64_at, unit_signed, SplitMix64};
use crate::scalar::Scalar;

pub const VOCAB_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Contour = 0,
    Velocity = 1,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Contour, Channel::Velocity];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabularyMap {
    height: usize,
    width: usize,
    vocab_size: usize,
    seed: u64,
    /// `slot = channel * S_L + pixel` to token id.
    token_of_slot: Vec<u32>,
    /// Token id to slot; token ids beyond `2 * S_L` are unmapped.
    slot_of_token: Vec<u32>,
}

impl VocabularyMap {
    pub fn new(height: usize, width: usize, vocab_size: usize, seed: u64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid { height, width });
        }
        let pixels = height * width;
        let required = 2 * pixels;
        if required > vocab_size {
            return Err(Error::VocabularyTooSmall {
                pixels,
                vocab_size,
                required,
            });
        }
        if vocab_size > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "vocabulary size {vocab_size} exceeds 32-bit token ids"
            )));
        }
        let mut token_of_slot: Vec<u32> = (0..required as u32).collect();
        if seed != 0 {
            let mut rng = SplitMix64::new(seed);
            for i in (1..required).rev() {
                let j = rng.below(i as u64 + 1) as usize;
                token_of_slot.swap(i, j);
            }
        }
        let mut slot_of_token = vec![0u32; required];
        for (slot, &token) in token_of_slot.iter().enumerate() {
            slot_of_token[token as usize] = slot as u32;
        }
        Ok(Self {
            height,
            width,
            vocab_size,
            seed,
            token_of_slot,
            slot_of_token,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixels per frame, `S_L`.
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// `N`, the size of the token id space.
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of mapped tokens, `2 * S_L`.
    pub fn mapped_tokens(&self) -> usize {
        self.token_of_slot.len()
    }

    /// First slot of each channel before permutation.
    pub fn channel_offsets(&self) -> [usize; 2] {
        [0, self.pixels()]
    }

    #[inline]
    pub fn token(&self, channel: Channel, pixel: usize) -> Result<u32> {
        if pixel >= self.pixels() {
            return Err(Error::IndexOutOfRange {
                index: pixel,
                len: self.pixels(),
            });
        }
        Ok(self.token_of_slot[channel as usize * self.pixels() + pixel])
    }

    /// Inverse lookup; `None` for ids outside the silhouette vocabulary.
    pub fn slot(&self, token: u32) -> Option<(Channel, usize)> {
        let slot = *self.slot_of_token.get(token as usize)? as usize;
        let channel = if slot < self.pixels() {
            Channel::Contour
        } else {
            Channel::Velocity
        };
        Some((channel, slot % self.pixels()))
    }

    fn check_shape(&self, height: usize, width: usize) -> Result<()> {
        if height == self.height && width == self.width {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_height: self.height,
                expected_width: self.width,
                height,
                width,
            })
        }
    }
}

/// Occurrence counts per `(channel, pixel)` slot. Counters from disjoint
/// parts of a corpus merge into exactly the counts of the whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyCounter {
    pixels: usize,
    frames: u64,
    counts: Vec<u64>,
}

impl FrequencyCounter {
    pub fn new(pixels: usize) -> Self {
        Self {
            pixels,
            frames: 0,
            counts: vec![0; 2 * pixels],
        }
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn count(&self, channel: Channel, pixel: usize) -> u64 {
        self.counts[channel as usize * self.pixels + pixel]
    }

    pub fn add_frame(&mut self, contour: &ContourMap, velocity: &VelocityMap) {
        debug_assert_eq!(contour.grid().len(), self.pixels);
        for pixel in contour.grid().iter_ones() {
            self.counts[pixel] += 1;
        }
        for pixel in velocity.grid().iter_ones() {
            self.counts[self.pixels + pixel] += 1;
        }
        self.frames += 1;
    }

    pub fn add_sequence(&mut self, seq: &SilhouetteSequence) {
        for (c, v) in extract_sequence_maps(seq) {
            self.add_frame(&c, &v);
        }
    }

    pub fn merge(mut self, other: &FrequencyCounter) -> Self {
        assert_eq!(self.pixels, other.pixels, "merging counters of different shapes");
        self.frames += other.frames;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }
}

/// Per-token frequencies and coefficients, indexed by token id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable<T = f64> {
    frame_count: u64,
    f_min: T,
    mean_contour_frequency: T,
    frequencies: Vec<T>,
    coefficients: Vec<T>,
    channels: Vec<Channel>,
}

impl<T: Scalar> FrequencyTable<T> {
    /// `f_k = count_k / frames` and `w_k = f_c / max(f_k, f_min)`, where
    /// `f_c` is the mean frequency of the contour tokens that occur at all.
    pub fn from_counter(
        counter: &FrequencyCounter,
        vocab: &VocabularyMap,
        f_min: Option<T>,
    ) -> Result<Self> {
        if counter.frames == 0 {
            return Err(Error::EmptyCorpus);
        }
        if counter.pixels != vocab.pixels() {
            return Err(Error::InvalidArgument(format!(
                "counter covers {} pixels, vocabulary {}",
                counter.pixels,
                vocab.pixels()
            )));
        }
        let frames = T::from_u64(counter.frames).expect("frame count fits a float");
        let f_min = f_min.unwrap_or_else(|| T::one() / frames);
        let mut frequencies = vec![T::zero(); vocab.mapped_tokens()];
        let mut channels = vec![Channel::Contour; vocab.mapped_tokens()];
        for (slot, &count) in counter.counts.iter().enumerate() {
            let token = vocab.token_of_slot[slot] as usize;
            frequencies[token] = T::from_u64(count).expect("count fits a float") / frames;
            if slot >= vocab.pixels() {
                channels[token] = Channel::Velocity;
            }
        }
        Self::from_frequencies(counter.frames, f_min, frequencies, channels)
    }

    fn from_frequencies(
        frame_count: u64,
        f_min: T,
        frequencies: Vec<T>,
        channels: Vec<Channel>,
    ) -> Result<Self> {
        if !(f_min > T::zero() && f_min <= T::one()) {
            return Err(Error::InvalidFrequencyFloor(f_min.to_f64_lossy()));
        }
        let (sum, active) = frequencies
            .iter()
            .zip(&channels)
            .filter(|&(&f, &ch)| ch == Channel::Contour && f > T::zero())
            .fold((T::zero(), 0usize), |(s, n), (&f, _)| (s + f, n + 1));
        // A corpus without any contour pixel has no contour mean; fall back to
        // the floor so that every coefficient is 1.
        let mean = if active > 0 {
            sum / T::from_usize_lossy(active)
        } else {
            f_min
        };
        let coefficients = frequencies.iter().map(|&f| mean / f.max(f_min)).collect();
        Ok(Self {
            frame_count,
            f_min,
            mean_contour_frequency: mean,
            frequencies,
            coefficients,
            channels,
        })
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    pub fn f_min(&self) -> T {
        self.f_min
    }

    pub fn mean_contour_frequency(&self) -> T {
        self.mean_contour_frequency
    }

    /// Number of tokens covered (`2 * S_L`).
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequency(&self, token: u32) -> T {
        self.frequencies.get(token as usize).copied().unwrap_or_else(T::zero)
    }

    /// Coefficient of `token`; unmapped ids get the floor coefficient.
    pub fn coefficient(&self, token: u32) -> T {
        self.coefficients
            .get(token as usize)
            .copied()
            .unwrap_or_else(|| self.mean_contour_frequency / self.f_min)
    }

    pub fn channel(&self, token: u32) -> Option<Channel> {
        self.channels.get(token as usize).copied()
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    /// Frequencies of the tokens belonging to `channel`, in token id order.
    pub fn channel_frequencies(&self, channel: Channel) -> impl Iterator<Item = T> + '_ {
        self.frequencies
            .iter()
            .zip(&self.channels)
            .filter(move |(_, &ch)| ch == channel)
            .map(|(&f, _)| f)
    }
}

/// Counts token occurrences over a corpus. Sequences are processed in
/// parallel; the merged counts do not depend on the worker count.
pub fn count_tokens(corpus: &[SilhouetteSequence], vocab: &VocabularyMap) -> Result<FrequencyCounter> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for seq in corpus {
        vocab.check_shape(seq.height(), seq.width())?;
    }
    Ok(corpus
        .par_iter()
        .map(|seq| {
            let mut counter = FrequencyCounter::new(vocab.pixels());
            counter.add_sequence(seq);
            counter
        })
        .reduce(
            || FrequencyCounter::new(vocab.pixels()),
            |a, b| a.merge(&b),
        ))
}

pub fn estimate_frequencies<T: Scalar>(
    corpus: &[SilhouetteSequence],
    vocab: &VocabularyMap,
    f_min: Option<T>,
) -> Result<FrequencyTable<T>> {
    FrequencyTable::from_counter(&count_tokens(corpus, vocab)?, vocab, f_min)
}

/// Tokens of one frame with their coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenFrame<T = f64> {
    pub index: usize,
    pub tokens: Vec<u32>,
    pub weights: Vec<T>,
}

impl<T> TokenFrame<T> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn encode_frame<T: Scalar>(
    index: usize,
    contour: &ContourMap,
    velocity: &VelocityMap,
    vocab: &VocabularyMap,
    freq: &FrequencyTable<T>,
) -> Result<TokenFrame<T>> {
    let (c, v) = (contour.grid(), velocity.grid());
    vocab.check_shape(c.height(), c.width())?;
    vocab.check_shape(v.height(), v.width())?;
    let pixels = vocab.pixels();
    let mut tokens: Vec<u32> = Vec::with_capacity(c.count_ones() + v.count_ones());
    tokens.extend(c.iter_ones().map(|p| vocab.token_of_slot[p]));
    tokens.extend(v.iter_ones().map(|p| vocab.token_of_slot[pixels + p]));
    if vocab.seed != 0 {
        tokens.sort_unstable();
    }
    let weights = tokens.iter().map(|&t| freq.coefficient(t)).collect();
    Ok(TokenFrame {
        index,
        tokens,
        weights,
    })
}

pub fn encode_sequence<T: Scalar>(
    seq: &SilhouetteSequence,
    vocab: &VocabularyMap,
    freq: &FrequencyTable<T>,
) -> Result<Vec<TokenFrame<T>>> {
    vocab.check_shape(seq.height(), seq.width())?;
    extract_sequence_maps(seq)
        .iter()
        .enumerate()
        .map(|(t, (c, v))| encode_frame(t, c, v, vocab, freq))
        .collect()
}

/// Deterministic stand-in for a frozen embedding table: entry `(token, d)`
/// is the SplitMix64 value at counter `token * dim + d` mapped to `[-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionStub {
    pub dim: usize,
    pub seed: u64,
}

impl Default for ProjectionStub {
    fn default() -> Self {
        Self { dim: 256, seed: 0 }
    }
}

impl ProjectionStub {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("projection dimension must be positive".into()));
        }
        Ok(Self { dim, seed })
    }

    #[inline]
    pub fn entry(&self, token: u32, d: usize) -> f64 {
        unit_signed(splitmix64_at(self.seed, token as u64 * self.dim as u64 + d as u64))
    }

    pub fn row(&self, token: u32) -> Vec<f64> {
        (0..self.dim).map(|d| self.entry(token, d)).collect()
    }
}

/// L2-normalised weighted sum of the stub rows of the frame's tokens. An
/// empty frame projects to the zero vector.
pub fn project_frame<T: Scalar>(frame: &TokenFrame<T>, stub: &ProjectionStub) -> Vec<T> {
    let mut acc = vec![T::zero(); stub.dim];
    for (&token, &w) in frame.tokens.iter().zip(&frame.weights) {
        for (d, a) in acc.iter_mut().enumerate() {
            *a = *a + w * T::from_f64_lossy(stub.entry(token, d));
        }
    }
    let norm = acc.iter().map(|&x| x * x).sum::<T>().sqrt();
    if norm > T::zero() {
        for a in &mut acc {
            *a = *a / norm;
        }
    }
    acc
}

/// Formats a float with 17 significant digits, enough to round-trip binary64.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialises the vocabulary and its frequency table. Keys are emitted in a
/// fixed order, sparse lists contain only tokens with non-zero frequency, and
/// identical inputs always give identical bytes.
pub fn write_vocabulary_json<T: Scalar>(vocab: &VocabularyMap, freq: &FrequencyTable<T>) -> String {
    let mut out = String::new();
    let offsets = vocab.channel_offsets();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"version\": {VOCAB_FILE_VERSION},");
    let _ = writeln!(out, "  \"S_L\": {},", vocab.pixels());
    let _ = writeln!(out, "  \"height\": {},", vocab.height);
    let _ = writeln!(out, "  \"width\": {},", vocab.width);
    let _ = writeln!(out, "  \"N\": {},", vocab.vocab_size);
    let _ = writeln!(out, "  \"seed\": {},", vocab.seed);
    let _ = writeln!(out, "  \"frame_count\": {},", freq.frame_count);
    let _ = writeln!(out, "  \"channel_offsets\": [{}, {}],", offsets[0], offsets[1]);
    let active: Vec<usize> = (0..freq.len())
        .filter(|&k| freq.frequencies[k] > T::zero())
        .collect();
    let sparse = |out: &mut String, key: &str, values: &[T]| {
        let _ = write!(out, "  \"{key}\": [");
        for (i, &k) in active.iter().enumerate() {
            let sep = if i == 0 { "\n" } else { ",\n" };
            let _ = write!(out, "{sep}    [{k}, {}]", fmt_f64(values[k].to_f64_lossy()));
        }
        out.push_str(if active.is_empty() { "],\n" } else { "\n  ],\n" });
    };
    sparse(&mut out, "frequencies", &freq.frequencies);
    sparse(&mut out, "coefficients", &freq.coefficients);
    let _ = writeln!(out, "  \"f_min\": {},", fmt_f64(freq.f_min.to_f64_lossy()));
    let _ = writeln!(
        out,
        "  \"mean_contour_frequency\": {}",
        fmt_f64(freq.mean_contour_frequency.to_f64_lossy())
    );
    out.push_str("}\n");
    out
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    version: u32,
    #[serde(rename = "S_L")]
    pixels: usize,
    height: usize,
    width: usize,
    #[serde(rename = "N")]
    vocab_size: usize,
    seed: u64,
    frame_count: u64,
    channel_offsets: [usize; 2],
    frequencies: Vec<(u32, f64)>,
    coefficients: Vec<(u32, f64)>,
    f_min: f64,
    mean_contour_frequency: f64,
}

/// Parses a file produced by [`write_vocabulary_json`].
pub fn read_vocabulary_json<T: Scalar>(text: &str) -> Result<(VocabularyMap, FrequencyTable<T>)> {
    let file: VocabularyFile =
        serde_json::from_str(text).map_err(|e| Error::VocabularyFile(e.to_string()))?;
    let bad = |msg: String| Err(Error::VocabularyFile(msg));
    if file.version != VOCAB_FILE_VERSION {
        return bad(format!("unsupported version {}", file.version));
    }
    if file.pixels != file.height * file.width {
        return bad(format!(
            "S_L = {} does not match {}x{}",
            file.pixels, file.height, file.width
        ));
    }
    if file.channel_offsets != [0, file.pixels] {
        return bad(format!("unexpected channel_offsets {:?}", file.channel_offsets));
    }
    if file.frame_count == 0 {
        return bad("frame_count must be positive".into());
    }
    let vocab = VocabularyMap::new(file.height, file.width, file.vocab_size, file.seed)?;
    let mapped = vocab.mapped_tokens();
    let f_min = T::from_f64_lossy(file.f_min);
    if !(file.f_min > 0.0 && file.f_min <= 1.0) {
        return Err(Error::InvalidFrequencyFloor(file.f_min));
    }
    let mean = T::from_f64_lossy(file.mean_contour_frequency);
    let mut frequencies = vec![T::zero(); mapped];
    let mut coefficients = vec![mean / f_min; mapped];
    let mut channels = vec![Channel::Contour; mapped];
    for (token, ch) in channels.iter_mut().enumerate() {
        *ch = vocab.slot(token as u32).expect("mapped token").0;
    }
    for &(token, f) in &file.frequencies {
        if token as usize >= mapped || !(0.0..=1.0).contains(&f) {
            return bad(format!("invalid frequency entry [{token}, {f}]"));
        }
        frequencies[token as usize] = T::from_f64_lossy(f);
    }
    for &(token, w) in &file.coefficients {
        if token as usize >= mapped || w.is_nan() || w <= 0.0 {
            return bad(format!("invalid coefficient entry [{token}, {w}]"));
        }
        coefficients[token as usize] = T::from_f64_lossy(w);
    }
    let table = FrequencyTable {
        frame_count: file.frame_count,
        f_min,
        mean_contour_frequency: mean,
        frequencies,
        coefficients,
        channels,
    };
    Ok((vocab, table))
}

/// Reads only the `frequencies` list of a vocabulary-format file. Used for
/// overlaying an external frequency distribution (for example from text
/// tokens) on the silhouette statistics.
pub fn read_frequency_list(text: &str) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Partial {
        frequencies: Vec<(u64, f64)>,
    }
    let partial: Partial =
        serde_json::from_str(text).map_err(|e| Error::VocabularyFile(e.to_string()))?;
    partial
        .frequencies
        .into_iter()
        .map(|(token, f)| {
            if (0.0..=1.0).contains(&f) {
                Ok(f)
            } else {
                Err(Error::VocabularyFile(format!(
                    "frequency of token {token} outside [0, 1]: {f}"
                )))
            }
        })
        .collect()
}
