//! Bit-packed binary rasters and the flatten/decompose primitives.
//!
//! Pixels are flattened in row-major order: pixel `(row, col)` has index
//! `row * width + col`. Token ids are derived from this index, so the order is
//! part of the external contract.
//!
//! Internally every row starts on a fresh `u64` word and bit `col % 64` of
//! word `col / 64` holds column `col`. Padding bits past `width` are always
//! zero; the row kernels in [`crate::extract`] rely on that.

use std::fmt;

use crate::error::{Error, Result};

pub(crate) const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Mask of the valid bits in the last word of a `bits`-long row.
#[inline]
pub(crate) fn tail_mask(bits: usize) -> u64 {
    match bits % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Rectangular binary raster with bit-packed rows. `true` is foreground.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitGrid {
    height: usize,
    width: usize,
    row_words: usize,
    words: Vec<u64>,
}

impl BitGrid {
    /// All-zero grid.
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid { height, width });
        }
        let row_words = words_for(width);
        Ok(Self {
            height,
            width,
            row_words,
            words: vec![0; row_words * height],
        })
    }

    /// All-one grid.
    pub fn filled(height: usize, width: usize) -> Result<Self> {
        let mut grid = Self::new(height, width)?;
        let mask = tail_mask(width);
        for row in grid.words.chunks_exact_mut(grid.row_words) {
            row.fill(u64::MAX);
            *row.last_mut().unwrap() = mask;
        }
        Ok(grid)
    }

    /// Builds a grid from a predicate evaluated at every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut grid = Self::new(height, width)?;
        for row in 0..height {
            for col in 0..width {
                if f(row, col) {
                    grid.set_unchecked(row, col, true);
                }
            }
        }
        Ok(grid)
    }

    /// Parses rows of `'1'`/`'#'` (foreground) and `'0'`/`'.'` (background).
    /// Whitespace-only lines are skipped. Mostly useful in tests.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let rows: Vec<&str> = rows
            .iter()
            .map(|r| r.as_ref().trim())
            .filter(|r| !r.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut grid = Self::new(height, width)?;
        for (row, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::InvalidArgument(format!(
                    "row {row} has {} pixels, expected {width}",
                    line.chars().count()
                )));
            }
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '1' | '#' => grid.set_unchecked(row, col, true),
                    '0' | '.' => {}
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "unexpected pixel character {other:?}"
                        )))
                    }
                }
            }
        }
        Ok(grid)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels, `S_L = height * width`.
    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    /// Always false: grids have positive dimensions.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn same_shape(&self, other: &BitGrid) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn check_shape(&self, other: &BitGrid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_height: self.height,
                expected_width: self.width,
                height: other.height,
                width: other.width,
            })
        }
    }

    #[inline]
    pub(crate) fn row_words(&self) -> usize {
        self.row_words
    }

    #[inline]
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Packed words of one row; bit `c % 64` of word `c / 64` is column `c`.
    #[inline]
    pub fn row(&self, row: usize) -> &[u64] {
        &self.words[row * self.row_words..(row + 1) * self.row_words]
    }

    pub fn get(&self, row: usize, col: usize) -> Result<bool> {
        self.check_pixel(row, col)?;
        Ok(self.get_unchecked(row, col))
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) -> Result<()> {
        self.check_pixel(row, col)?;
        self.set_unchecked(row, col, value);
        Ok(())
    }

    /// Pixel by flattened index.
    pub fn get_index(&self, index: usize) -> Result<bool> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        Ok(self.get_unchecked(index / self.width, index % self.width))
    }

    fn check_pixel(&self, row: usize, col: usize) -> Result<()> {
        if row < self.height && col < self.width {
            Ok(())
        } else {
            Err(Error::PixelOutOfRange {
                row,
                col,
                height: self.height,
                width: self.width,
            })
        }
    }

    #[inline]
    pub(crate) fn get_unchecked(&self, row: usize, col: usize) -> bool {
        let word = self.words[row * self.row_words + col / WORD_BITS];
        (word >> (col % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub(crate) fn set_unchecked(&mut self, row: usize, col: usize, value: bool) {
        let word = &mut self.words[row * self.row_words + col / WORD_BITS];
        let bit = 1u64 << (col % WORD_BITS);
        if value {
            *word |= bit;
        } else {
            *word &= !bit;
        }
    }

    /// Number of foreground pixels.
    #[inline]
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Foreground pixel indices (row-major), ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        let width = self.width;
        self.words
            .chunks_exact(self.row_words)
            .enumerate()
            .flat_map(move |(row, words)| {
                words.iter().enumerate().flat_map(move |(w, &word)| {
                    SetBits(word).map(move |bit| row * width + w * WORD_BITS + bit)
                })
            })
    }

    pub fn xor(&self, other: &BitGrid) -> Result<BitGrid> {
        self.zip_words(other, |a, b| a ^ b)
    }

    pub fn and(&self, other: &BitGrid) -> Result<BitGrid> {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn or(&self, other: &BitGrid) -> Result<BitGrid> {
        self.zip_words(other, |a, b| a | b)
    }

    /// Pixel-wise complement (padding stays zero).
    pub fn not(&self) -> BitGrid {
        let mut out = self.clone();
        let mask = tail_mask(self.width);
        for row in out.words.chunks_exact_mut(self.row_words) {
            for w in row.iter_mut() {
                *w = !*w;
            }
            *row.last_mut().unwrap() &= mask;
        }
        out
    }

    /// Number of pixels where the two grids differ.
    pub fn hamming(&self, other: &BitGrid) -> Result<usize> {
        self.check_shape(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BitGrid) -> Result<bool> {
        self.check_shape(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    fn zip_words(&self, other: &BitGrid, op: impl Fn(u64, u64) -> u64) -> Result<BitGrid> {
        self.check_shape(other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(BitGrid {
            words,
            ..self.clone_shape()
        })
    }

    fn clone_shape(&self) -> BitGrid {
        BitGrid {
            height: self.height,
            width: self.width,
            row_words: self.row_words,
            words: Vec::new(),
        }
    }

    /// Row-major flattening into a bit vector of length `S_L`.
    pub fn flatten(&self) -> BitVector {
        let mut out = BitVector::zeros(self.len());
        for index in self.iter_ones() {
            out.set_unchecked(index);
        }
        out
    }

    /// Inverse of [`BitGrid::flatten`].
    pub fn unflatten(bits: &BitVector, height: usize, width: usize) -> Result<BitGrid> {
        let mut grid = BitGrid::new(height, width)?;
        if bits.len() != grid.len() {
            return Err(Error::LengthMismatch {
                len: bits.len(),
                height,
                width,
            });
        }
        for index in bits.iter_ones() {
            grid.set_unchecked(index / width, index % width, true);
        }
        Ok(grid)
    }
}

impl fmt::Debug for BitGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitGrid {}x{} [", self.height, self.width)?;
        for row in 0..self.height {
            let line: String = (0..self.width)
                .map(|col| if self.get_unchecked(row, col) { '#' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

/// Iterator over set-bit positions of a word, lowest first.
pub(crate) struct SetBits(pub(crate) u64);

impl Iterator for SetBits {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let bit = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(bit)
    }
}

/// Flat binary vector of fixed length, the flattened silhouette `s`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            out.set_unchecked(i);
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> Result<bool> {
        if index >= self.len {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        Ok((self.words[index / WORD_BITS] >> (index % WORD_BITS)) & 1 == 1)
    }

    pub fn set(&mut self, index: usize) -> Result<()> {
        if index >= self.len {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        self.set_unchecked(index);
        Ok(())
    }

    #[inline]
    fn set_unchecked(&mut self, index: usize) {
        self.words[index / WORD_BITS] |= 1u64 << (index % WORD_BITS);
    }

    #[inline]
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(w, &word)| SetBits(word).map(move |bit| w * WORD_BITS + bit))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len)
            .map(|i| (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1)
            .collect()
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = self
            .to_bools()
            .into_iter()
            .map(|b| if b { '1' } else { '0' })
            .collect();
        write!(f, "BitVector[{bits}]")
    }
}

/// Active indices of `s`, ascending: the positions of its one-hot summands.
pub fn decompose(s: &BitVector) -> Vec<usize> {
    s.iter_ones().collect()
}

/// Sum of the one-hot vectors at `indices`, as a vector of length `len`.
pub fn recompose(indices: &[usize], len: usize) -> Result<BitVector> {
    let mut out = BitVector::zeros(len);
    for &index in indices {
        out.set(index)?;
    }
    Ok(out)
}

/// Ordered frames of one walking sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilhouetteSequence {
    frames: Vec<BitGrid>,
    label: String,
    source: String,
}

impl SilhouetteSequence {
    pub fn new(
        frames: Vec<BitGrid>,
        label: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptySequence)?;
        for frame in &frames[1..] {
            first.check_shape(frame)?;
        }
        Ok(Self {
            frames,
            label: label.into(),
            source: source.into(),
        })
    }

    pub fn frames(&self) -> &[BitGrid] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<BitGrid> {
        self.frames
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false: sequences hold at least one frame.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }
}
