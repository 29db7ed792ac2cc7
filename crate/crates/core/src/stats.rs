//! Token density, compression rates, frequency histograms and heatmaps, and
//! the contour round-trip check.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extract::{extract_contour, extract_sequence_maps, reconstruct_silhouette, FillMode};
use crate::grid::SilhouetteSequence;
use crate::scalar::Scalar;
use crate::vocab::{Channel, FrequencyTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapType {
    Silhouette,
    Contour,
    Velocity,
}

impl MapType {
    pub const ALL: [MapType; 3] = [MapType::Silhouette, MapType::Contour, MapType::Velocity];

    pub fn as_str(self) -> &'static str {
        match self {
            MapType::Silhouette => "silhouette",
            MapType::Contour => "contour",
            MapType::Velocity => "velocity",
        }
    }
}

impl fmt::Display for MapType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-pixel activation counts of the three map types. Partial counts from
/// disjoint sub-corpora merge exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelCounts {
    height: usize,
    width: usize,
    frames: u64,
    sequences: u64,
    counts: [Vec<u64>; 3],
}

impl PixelCounts {
    pub fn new(height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            frames: 0,
            sequences: 0,
            counts: [vec![0; n], vec![0; n], vec![0; n]],
        }
    }

    pub fn add_sequence(&mut self, seq: &SilhouetteSequence) {
        for (frame, (c, v)) in seq.frames().iter().zip(extract_sequence_maps(seq)) {
            for (map, grid) in [frame, c.grid(), v.grid()].into_iter().enumerate() {
                for p in grid.iter_ones() {
                    self.counts[map][p] += 1;
                }
            }
            self.frames += 1;
        }
        self.sequences += 1;
    }

    pub fn merge(mut self, other: &PixelCounts) -> Self {
        assert_eq!(
            (self.height, self.width),
            (other.height, other.width),
            "merging counts of different shapes"
        );
        self.frames += other.frames;
        self.sequences += other.sequences;
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn counts(&self, map: MapType) -> &[u64] {
        &self.counts[map as usize]
    }

    pub fn total(&self, map: MapType) -> u64 {
        self.counts(map).iter().sum()
    }
}

fn corpus_shape(corpus: &[SilhouetteSequence]) -> Result<(usize, usize)> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?;
    let (h, w) = (first.height(), first.width());
    for seq in corpus {
        if (seq.height(), seq.width()) != (h, w) {
            return Err(Error::DimensionMismatch {
                expected_height: h,
                expected_width: w,
                height: seq.height(),
                width: seq.width(),
            });
        }
    }
    Ok((h, w))
}

/// Counts all pixels of the corpus, one worker per sequence.
pub fn count_pixels(corpus: &[SilhouetteSequence]) -> Result<PixelCounts> {
    let (h, w) = corpus_shape(corpus)?;
    Ok(corpus
        .par_iter()
        .map(|seq| {
            let mut counts = PixelCounts::new(h, w);
            counts.add_sequence(seq);
            counts
        })
        .reduce(|| PixelCounts::new(h, w), |a, b| a.merge(&b)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEntry<T> {
    pub map: MapType,
    pub active: u64,
    pub frames: u64,
    pub pixels: usize,
    pub density: T,
}

/// Fraction of active pixels of one map type over the whole corpus. First
/// frame velocities are zero maps and are counted.
pub fn compute_density<T: Scalar>(
    corpus: &[SilhouetteSequence],
    map: MapType,
) -> Result<DensityEntry<T>> {
    let counts = count_pixels(corpus)?;
    Ok(density_entry(&counts, map))
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    T::from_u64(num).expect("count fits a float") / T::from_u64(den).expect("count fits a float")
}

fn density_entry<T: Scalar>(counts: &PixelCounts, map: MapType) -> DensityEntry<T> {
    let pixels = counts.height * counts.width;
    let active = counts.total(map);
    DensityEntry {
        map,
        active,
        frames: counts.frames,
        pixels,
        density: ratio(active, counts.frames * pixels as u64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceDensity<T> {
    pub label: String,
    pub frames: usize,
    pub silhouette: T,
    pub contour: T,
    pub velocity: T,
}

/// Density summary of one corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport<T = f64> {
    pub frame_count: u64,
    pub sequence_count: usize,
    pub height: usize,
    pub width: usize,
    pub silhouette: T,
    pub contour: T,
    pub velocity: T,
    /// Velocity density over frames that have a predecessor; `None` when no
    /// sequence has more than one frame.
    pub velocity_excluding_first: Option<T>,
    pub first_frame_velocity: &'static str,
    /// Compression rates relative to the silhouette density; `None` for a
    /// corpus without foreground.
    pub acr_contour: Option<T>,
    pub acr_velocity: Option<T>,
    pub sequences: Vec<SequenceDensity<T>>,
}

pub fn density_report<T: Scalar>(corpus: &[SilhouetteSequence]) -> Result<DensityReport<T>> {
    let (height, width) = corpus_shape(corpus)?;
    let per_seq: Vec<PixelCounts> = corpus
        .par_iter()
        .map(|seq| {
            let mut counts = PixelCounts::new(height, width);
            counts.add_sequence(seq);
            counts
        })
        .collect();
    let total = per_seq
        .iter()
        .fold(PixelCounts::new(height, width), |a, b| a.merge(b));
    let density = |c: &PixelCounts, map| density_entry::<T>(c, map).density;
    let (s, c, v) = (
        density(&total, MapType::Silhouette),
        density(&total, MapType::Contour),
        density(&total, MapType::Velocity),
    );
    let moving_frames = total.frames - total.sequences;
    let velocity_excluding_first = (moving_frames > 0)
        .then(|| ratio(total.total(MapType::Velocity), moving_frames * (height * width) as u64));
    let acr = |x: T| (s > T::zero()).then(|| x / s);
    let sequences = corpus
        .iter()
        .zip(&per_seq)
        .map(|(seq, counts)| SequenceDensity {
            label: seq.label().to_string(),
            frames: seq.len(),
            silhouette: density(counts, MapType::Silhouette),
            contour: density(counts, MapType::Contour),
            velocity: density(counts, MapType::Velocity),
        })
        .collect();
    Ok(DensityReport {
        frame_count: total.frames,
        sequence_count: corpus.len(),
        height,
        width,
        silhouette: s,
        contour: c,
        velocity: v,
        velocity_excluding_first,
        first_frame_velocity: "included",
        acr_contour: acr(c),
        acr_velocity: acr(v),
        sequences,
    })
}

/// Mean over datasets of `P_x / P_s`, given `(P_s, P_x)` pairs.
pub fn compute_acr<T: Scalar>(densities: &[(T, T)]) -> Result<T> {
    if densities.is_empty() {
        return Err(Error::InvalidArgument("no densities given".into()));
    }
    let mut sum = T::zero();
    for (i, &(s, x)) in densities.iter().enumerate() {
        if s <= T::zero() {
            return Err(Error::InvalidArgument(format!(
                "silhouette density of dataset {i} is {s}; it must be positive"
            )));
        }
        sum = sum + x / s;
    }
    Ok(sum / T::from_usize_lossy(densities.len()))
}

/// Log-spaced histogram of token frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyHistogram<T = f64> {
    /// `None` covers both channels.
    pub channel: Option<Channel>,
    /// `bins + 1` edges from the frequency floor up to 1.
    pub edges: Vec<T>,
    pub counts: Vec<u64>,
    /// Tokens that never occur; kept out of the bins.
    pub zero_count: u64,
}

impl<T: Scalar> FrequencyHistogram<T> {
    /// Bins `values` on log-spaced edges spanning `[lower, 1]`. Values below
    /// `lower` land in the first bin.
    pub fn from_values(
        values: impl IntoIterator<Item = T>,
        lower: T,
        bins: usize,
        channel: Option<Channel>,
    ) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
        }
        if !(lower > T::zero() && lower <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "histogram lower edge {lower} outside (0, 1]"
            )));
        }
        let nb = T::from_usize_lossy(bins);
        let span = (T::one() / lower).ln();
        let edges = (0..=bins)
            .map(|i| {
                if i == bins {
                    T::one()
                } else {
                    lower * (span * T::from_usize_lossy(i) / nb).exp()
                }
            })
            .collect();
        let mut counts = vec![0u64; bins];
        let mut zero_count = 0;
        for f in values {
            if f <= T::zero() {
                zero_count += 1;
                continue;
            }
            let bin = if span <= T::zero() {
                bins - 1
            } else if f <= lower {
                0
            } else {
                ((f / lower).ln() / span * nb)
                    .floor()
                    .to_usize()
                    .unwrap_or(bins - 1)
                    .min(bins - 1)
            };
            counts[bin] += 1;
        }
        Ok(Self {
            channel,
            edges,
            counts,
            zero_count,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn nonzero_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `bin_lo,bin_hi,count` rows, plus an `overlay` column when given.
    pub fn to_csv(&self, overlay: Option<&FrequencyHistogram<T>>) -> String {
        let mut out = String::from("bin_lo,bin_hi,count");
        if overlay.is_some() {
            out.push_str(",overlay");
        }
        out.push('\n');
        for i in 0..self.bins() {
            let _ = write!(out, "{},{},{}", self.edges[i], self.edges[i + 1], self.counts[i]);
            if let Some(o) = overlay {
                let _ = write!(out, ",{}", o.counts.get(i).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        out
    }
}

pub fn compute_histogram<T: Scalar>(
    freq: &FrequencyTable<T>,
    channel: Option<Channel>,
    bins: usize,
) -> Result<FrequencyHistogram<T>> {
    let values: Vec<T> = match channel {
        Some(ch) => freq.channel_frequencies(ch).collect(),
        None => freq.frequencies().to_vec(),
    };
    FrequencyHistogram::from_values(values, freq.f_min(), bins, channel)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatmapNormalization {
    /// Per-pixel activation frequency.
    #[default]
    Raw,
    /// Divided by the largest contour-pixel frequency, clamped to 1.
    ContourRange,
}

impl FromStr for HeatmapNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "contour-range" => Ok(Self::ContourRange),
            other => Err(Error::InvalidArgument(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyHeatmap<T = f64> {
    pub height: usize,
    pub width: usize,
    pub map: MapType,
    pub normalization: HeatmapNormalization,
    /// Row-major values in `[0, 1]`.
    pub values: Vec<T>,
}

impl<T: Scalar> FrequencyHeatmap<T> {
    pub fn from_counts(counts: &PixelCounts, map: MapType, normalization: HeatmapNormalization) -> Self {
        let frames = counts.frames.max(1);
        let raw: Vec<T> = counts.counts(map).iter().map(|&c| ratio(c, frames)).collect();
        let values = match normalization {
            HeatmapNormalization::Raw => raw,
            HeatmapNormalization::ContourRange => {
                let max = counts.counts(MapType::Contour).iter().copied().max().unwrap_or(0);
                if max == 0 {
                    vec![T::zero(); raw.len()]
                } else {
                    let scale: T = ratio(max, frames);
                    raw.into_iter().map(|v| (v / scale).min(T::one())).collect()
                }
            }
        };
        Self {
            height: counts.height,
            width: counts.width,
            map,
            normalization,
            values,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// One CSV line per pixel row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Samples scaled linearly to `[0, maxval]` with rounding.
    pub fn quantize(&self, maxval: u16) -> Vec<u16> {
        let m = T::from_u16(maxval).expect("u16 fits a float");
        self.values
            .iter()
            .map(|&v| {
                (v.max(T::zero()).min(T::one()) * m)
                    .round()
                    .to_u16()
                    .unwrap_or(maxval)
            })
            .collect()
    }
}

pub fn compute_heatmap<T: Scalar>(
    corpus: &[SilhouetteSequence],
    map: MapType,
    normalization: HeatmapNormalization,
) -> Result<FrequencyHeatmap<T>> {
    Ok(FrequencyHeatmap::from_counts(&count_pixels(corpus)?, map, normalization))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorstFrame {
    pub sequence: String,
    pub frame: usize,
    pub mismatched_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundtripReport {
    pub mode: FillMode,
    pub frames: usize,
    pub mismatched_frames: usize,
    pub mismatched_pixels: usize,
    /// First frame with the largest Hamming distance, if any frame differs.
    pub worst: Option<WorstFrame>,
}

/// Hamming distance between each frame and the reconstruction of its
/// contour.
pub fn roundtrip_report(corpus: &[SilhouetteSequence], mode: FillMode) -> RoundtripReport {
    let per_seq: Vec<Vec<usize>> = corpus
        .par_iter()
        .map(|seq| {
            seq.frames()
                .iter()
                .map(|s| {
                    let back = reconstruct_silhouette(&extract_contour(s), mode);
                    back.hamming(s).expect("reconstruction keeps the shape")
                })
                .collect()
        })
        .collect();
    let mut report = RoundtripReport {
        mode,
        frames: 0,
        mismatched_frames: 0,
        mismatched_pixels: 0,
        worst: None,
    };
    for (seq, distances) in corpus.iter().zip(per_seq) {
        for (t, d) in distances.into_iter().enumerate() {
            report.frames += 1;
            if d == 0 {
                continue;
            }
            report.mismatched_frames += 1;
            report.mismatched_pixels += d;
            if report.worst.as_ref().is_none_or(|w| d > w.mismatched_pixels) {
                report.worst = Some(WorstFrame {
                    sequence: seq.label().to_string(),
                    frame: t,
                    mismatched_pixels: d,
                });
            }
        }
    }
    report
}
