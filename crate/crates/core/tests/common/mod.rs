//! Naive reference implementations. Everything here works on plain
//! `Vec<Vec<bool>>` frames, one pixel at a time, and shares no code with the
//! library beyond reading pixels out of a `BitGrid`.

#![allow(dead_code)]

use std::fmt::Write;

use siltok::{BitGrid, SilhouetteSequence};

pub type Frame = Vec<Vec<bool>>;

pub fn pixels(g: &BitGrid) -> Frame {
    (0..g.height())
        .map(|r| (0..g.width()).map(|c| g.get(r, c).unwrap()).collect())
        .collect()
}

pub fn sequence_pixels(seq: &SilhouetteSequence) -> Vec<Frame> {
    seq.frames().iter().map(pixels).collect()
}

pub fn popcount(f: &Frame) -> usize {
    f.iter().flatten().filter(|&&b| b).count()
}

/// Foreground pixels with at least one background (or out of frame)
/// 4-neighbour.
pub fn contour(f: &Frame) -> Frame {
    let h = f.len() as isize;
    let w = f[0].len() as isize;
    let at = |r: isize, c: isize| r >= 0 && c >= 0 && r < h && c < w && f[r as usize][c as usize];
    let mut out = vec![vec![false; w as usize]; h as usize];
    for r in 0..h {
        for c in 0..w {
            if !at(r, c) {
                continue;
            }
            let interior = at(r - 1, c) && at(r + 1, c) && at(r, c - 1) && at(r, c + 1);
            out[r as usize][c as usize] = !interior;
        }
    }
    out
}

pub fn xor(a: &Frame, b: &Frame) -> Frame {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x != y).collect())
        .collect()
}

/// `(contour, velocity)` per frame; the first velocity is all zero.
pub fn maps(frames: &[Frame]) -> Vec<(Frame, Frame)> {
    let contours: Vec<Frame> = frames.iter().map(contour).collect();
    contours
        .iter()
        .enumerate()
        .map(|(t, c)| {
            let v = if t == 0 { xor(c, c) } else { xor(c, &contours[t - 1]) };
            (c.clone(), v)
        })
        .collect()
}

pub fn row_major_ones(f: &Frame) -> Vec<usize> {
    let w = f[0].len();
    let mut out = Vec::new();
    for (r, row) in f.iter().enumerate() {
        for (c, &b) in row.iter().enumerate() {
            if b {
                out.push(r * w + c);
            }
        }
    }
    out
}

pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        let limit = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next();
            if v < limit {
                return v % n;
            }
        }
    }
}

/// Token id of each slot `channel * S_L + pixel`.
pub fn permutation(slots: usize, seed: u64) -> Vec<u32> {
    let mut p: Vec<u32> = (0..slots as u32).collect();
    if seed != 0 {
        let mut rng = Rng::new(seed);
        let mut i = slots - 1;
        while i > 0 {
            let j = rng.below(i as u64 + 1) as usize;
            p.swap(i, j);
            i -= 1;
        }
    }
    p
}

pub fn silb(frames: &[Frame]) -> Vec<u8> {
    let (h, w) = (frames[0].len(), frames[0][0].len());
    let mut out = b"SILB\x01".to_vec();
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for f in frames {
        for row in f {
            let mut bits: Vec<bool> = row.clone();
            while !bits.len().is_multiple_of(8) {
                bits.push(false);
            }
            for byte in bits.chunks(8) {
                out.push(byte.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8));
            }
        }
    }
    out
}

pub struct Table {
    pub frames: u64,
    pub counts: Vec<u64>,
    pub freq: Vec<f64>,
    pub coef: Vec<f64>,
    pub mean: f64,
    pub f_min: f64,
}

/// Counts per token id, frequencies, and `mean / max(f, f_min)` coefficients.
/// The contour mean is summed in ascending token id order.
pub fn table(corpus: &[Vec<Frame>], perm: &[u32], f_min: Option<f64>) -> Table {
    let sl = perm.len() / 2;
    let mut counts = vec![0u64; perm.len()];
    let mut frames = 0u64;
    for seq in corpus {
        for (c, v) in maps(seq) {
            frames += 1;
            for p in row_major_ones(&c) {
                counts[perm[p] as usize] += 1;
            }
            for p in row_major_ones(&v) {
                counts[perm[sl + p] as usize] += 1;
            }
        }
    }
    let f_min = f_min.unwrap_or(1.0 / frames as f64);
    let freq: Vec<f64> = counts.iter().map(|&n| n as f64 / frames as f64).collect();
    let mut is_contour = vec![false; perm.len()];
    for &t in &perm[..sl] {
        is_contour[t as usize] = true;
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for k in 0..perm.len() {
        if is_contour[k] && freq[k] > 0.0 {
            sum += freq[k];
            n += 1;
        }
    }
    let mean = if n > 0 { sum / n as f64 } else { f_min };
    let coef = freq.iter().map(|&f| mean / f.max(f_min)).collect();
    Table {
        frames,
        counts,
        freq,
        coef,
        mean,
        f_min,
    }
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn vocab_json(h: usize, w: usize, n: usize, seed: u64, t: &Table) -> String {
    let sl = h * w;
    let mut s = String::new();
    s += "{\n";
    writeln!(s, "  \"version\": 1,").unwrap();
    writeln!(s, "  \"S_L\": {sl},").unwrap();
    writeln!(s, "  \"height\": {h},").unwrap();
    writeln!(s, "  \"width\": {w},").unwrap();
    writeln!(s, "  \"N\": {n},").unwrap();
    writeln!(s, "  \"seed\": {seed},").unwrap();
    writeln!(s, "  \"frame_count\": {},", t.frames).unwrap();
    writeln!(s, "  \"channel_offsets\": [0, {sl}],").unwrap();
    for (key, values) in [("frequencies", &t.freq), ("coefficients", &t.coef)] {
        let rows: Vec<String> = (0..t.freq.len())
            .filter(|&k| t.freq[k] > 0.0)
            .map(|k| format!("    [{k}, {}]", sci(values[k])))
            .collect();
        if rows.is_empty() {
            writeln!(s, "  \"{key}\": [],").unwrap();
        } else {
            writeln!(s, "  \"{key}\": [\n{}\n  ],", rows.join(",\n")).unwrap();
        }
    }
    writeln!(s, "  \"f_min\": {},", sci(t.f_min)).unwrap();
    writeln!(s, "  \"mean_contour_frequency\": {}", sci(t.mean)).unwrap();
    s += "}\n";
    s
}

/// Tokens of one frame: contour slots then velocity slots in row-major
/// order, sorted by id unless the permutation is the identity.
pub fn frame_tokens(c: &Frame, v: &Frame, perm: &[u32], seed: u64) -> Vec<u32> {
    let sl = perm.len() / 2;
    let mut tokens: Vec<u32> = row_major_ones(c).into_iter().map(|p| perm[p]).collect();
    tokens.extend(row_major_ones(v).into_iter().map(|p| perm[sl + p]));
    if seed != 0 {
        tokens.sort();
    }
    tokens
}

pub fn jsonl(corpus: &[(String, Vec<Frame>)], perm: &[u32], seed: u64, t: &Table) -> String {
    let mut s = String::new();
    for (label, frames) in corpus {
        for (i, (c, v)) in maps(frames).iter().enumerate() {
            let tokens = frame_tokens(c, v, perm, seed);
            let ids: Vec<String> = tokens.iter().map(|k| k.to_string()).collect();
            let ws: Vec<String> = tokens
                .iter()
                .map(|&k| serde_json::to_string(&t.coef[k as usize]).unwrap())
                .collect();
            writeln!(
                s,
                "{{\"seq\":{},\"t\":{i},\"tokens\":[{}],\"weights\":[{}]}}",
                serde_json::to_string(label).unwrap(),
                ids.join(","),
                ws.join(",")
            )
            .unwrap();
        }
    }
    s
}

/// Counts of active pixels `(silhouette, contour, velocity)` by a double
/// loop over every pixel of every frame.
pub fn density_counts(corpus: &[Vec<Frame>]) -> [u64; 3] {
    let mut n = [0u64; 3];
    for seq in corpus {
        for (f, (c, v)) in seq.iter().zip(maps(seq)) {
            for r in 0..f.len() {
                for col in 0..f[0].len() {
                    n[0] += f[r][col] as u64;
                    n[1] += c[r][col] as u64;
                    n[2] += v[r][col] as u64;
                }
            }
        }
    }
    n
}

pub fn random_frame(rng: &mut Rng, h: usize, w: usize, permille: u64) -> Frame {
    (0..h)
        .map(|_| (0..w).map(|_| rng.below(1000) < permille).collect())
        .collect()
}

pub fn to_grid(f: &Frame) -> BitGrid {
    BitGrid::from_fn(f.len(), f[0].len(), |r, c| f[r][c]).unwrap()
}
