//! Contour and velocity maps, and reconstruction of a silhouette from its
//! contour.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BitGrid, SilhouetteSequence};

/// Inner boundary of a silhouette: foreground pixels with at least one
/// background (or out-of-frame) 4-neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourMap(BitGrid);

/// Pixel-wise XOR of two consecutive contour maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VelocityMap(BitGrid);

impl ContourMap {
    /// Wraps an arbitrary grid. Reconstruction is only exact for grids that
    /// came out of [`extract_contour`].
    pub fn from_grid(grid: BitGrid) -> Self {
        Self(grid)
    }

    pub fn grid(&self) -> &BitGrid {
        &self.0
    }

    pub fn into_grid(self) -> BitGrid {
        self.0
    }
}

impl VelocityMap {
    pub fn from_grid(grid: BitGrid) -> Self {
        Self(grid)
    }

    /// Velocity of the first frame of a sequence.
    pub fn zero_like(grid: &BitGrid) -> Self {
        Self(BitGrid::new(grid.height(), grid.width()).expect("shape of an existing grid"))
    }

    pub fn grid(&self) -> &BitGrid {
        &self.0
    }

    pub fn into_grid(self) -> BitGrid {
        self.0
    }
}

pub fn extract_contour(silhouette: &BitGrid) -> ContourMap {
    let height = silhouette.height();
    let nw = silhouette.row_words();
    let src = silhouette.words();
    let mut out = BitGrid::new(height, silhouette.width()).expect("shape of an existing grid");
    let dst = out.words_mut();

    for r in 0..height {
        let base = r * nw;
        for w in 0..nw {
            let cur = src[base + w];
            if cur == 0 {
                continue;
            }
            let up = if r > 0 { src[base - nw + w] } else { 0 };
            let down = if r + 1 < height { src[base + nw + w] } else { 0 };
            // Column c sits at bit c, so the left neighbour arrives via << 1.
            let carry_in = if w > 0 { src[base + w - 1] >> 63 } else { 0 };
            let carry_out = if w + 1 < nw { src[base + w + 1] << 63 } else { 0 };
            let left = (cur << 1) | carry_in;
            let right = (cur >> 1) | carry_out;
            let interior = cur & up & down & left & right;
            dst[base + w] = cur & !interior;
        }
    }
    ContourMap(out)
}

pub fn extract_velocity(current: &ContourMap, previous: &ContourMap) -> Result<VelocityMap> {
    Ok(VelocityMap(current.0.xor(&previous.0)?))
}

/// One `(contour, velocity)` pair per frame. The first frame's velocity is
/// the zero map so that the output stays aligned with the input frames.
pub fn extract_sequence_maps(seq: &SilhouetteSequence) -> Vec<(ContourMap, VelocityMap)> {
    let mut out: Vec<(ContourMap, VelocityMap)> = Vec::with_capacity(seq.len());
    for frame in seq.frames() {
        let contour = extract_contour(frame);
        let velocity = match out.last() {
            Some((prev, _)) => {
                extract_velocity(&contour, prev).expect("frames of a sequence share one shape")
            }
            None => VelocityMap::zero_like(frame),
        };
        out.push((contour, velocity));
    }
    out
}

/// Strategy used to refill a contour map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillMode {
    /// Everything not reachable from the frame border through non-contour
    /// pixels is foreground. Exact when the source background is a single
    /// border-connected region.
    #[default]
    ExteriorFill,
    /// Regions between contours alternate background / foreground by nesting
    /// depth. Also exact for enclosed holes whose rim is a separate contour.
    ParityFill,
}

impl FillMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FillMode::ExteriorFill => "exterior-fill",
            FillMode::ParityFill => "parity-fill",
        }
    }
}

impl fmt::Display for FillMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FillMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exterior-fill" => Ok(FillMode::ExteriorFill),
            "parity-fill" => Ok(FillMode::ParityFill),
            other => Err(Error::InvalidArgument(format!("unknown fill mode {other:?}"))),
        }
    }
}

pub fn reconstruct_silhouette(contour: &ContourMap, mode: FillMode) -> BitGrid {
    match mode {
        FillMode::ExteriorFill => exterior_fill(contour.grid()),
        FillMode::ParityFill => parity_fill(contour.grid()),
    }
}

fn neighbours4(index: usize, height: usize, width: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (index / width, index % width);
    let up = (r > 0).then(|| index - width);
    let down = (r + 1 < height).then(|| index + width);
    let left = (c > 0).then(|| index - 1);
    let right = (c + 1 < width).then(|| index + 1);
    [up, down, left, right].into_iter().flatten()
}

fn neighbours8(index: usize, height: usize, width: usize) -> impl Iterator<Item = usize> {
    let (r, c) = ((index / width) as isize, (index % width) as isize);
    let (h, w) = (height as isize, width as isize);
    (-1isize..=1)
        .flat_map(move |dr| (-1isize..=1).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| dr != 0 || dc != 0)
        .filter_map(move |(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nr < h && nc >= 0 && nc < w).then(|| (nr * w + nc) as usize)
        })
}

#[inline]
fn on_border(index: usize, height: usize, width: usize) -> bool {
    let (r, c) = (index / width, index % width);
    r == 0 || c == 0 || r + 1 == height || c + 1 == width
}

fn exterior_fill(contour: &BitGrid) -> BitGrid {
    let (height, width) = (contour.height(), contour.width());
    let wall: Vec<bool> = contour.flatten().to_bools();
    let mut outside = vec![false; wall.len()];
    let mut stack: Vec<usize> = (0..wall.len())
        .filter(|&i| on_border(i, height, width) && !wall[i])
        .collect();
    for &i in &stack {
        outside[i] = true;
    }
    while let Some(i) = stack.pop() {
        for n in neighbours4(i, height, width) {
            if !wall[n] && !outside[n] {
                outside[n] = true;
                stack.push(n);
            }
        }
    }
    BitGrid::from_fn(height, width, |r, c| !outside[r * width + c]).expect("existing shape")
}

const UNLABELLED: u32 = u32::MAX;

/// Labels connected components of the pixels where `mask == want`.
fn label_components(
    mask: &[bool],
    want: bool,
    height: usize,
    width: usize,
    eight: bool,
) -> (Vec<u32>, usize) {
    let mut labels = vec![UNLABELLED; mask.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if mask[start] != want || labels[start] != UNLABELLED {
            continue;
        }
        labels[start] = count;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let mut visit = |n: usize| {
                if mask[n] == want && labels[n] == UNLABELLED {
                    labels[n] = count;
                    stack.push(n);
                }
            };
            if eight {
                neighbours8(i, height, width).for_each(&mut visit);
            } else {
                neighbours4(i, height, width).for_each(&mut visit);
            }
        }
        count += 1;
    }
    (labels, count as usize)
}

fn parity_fill(contour: &BitGrid) -> BitGrid {
    let (height, width) = (contour.height(), contour.width());
    let wall: Vec<bool> = contour.flatten().to_bools();

    // Open regions are 4-connected; contour rings are 8-connected so that a
    // diagonal step does not split a ring.
    let (open_label, open_count) = label_components(&wall, false, height, width, false);
    let (ring_label, ring_count) = label_components(&wall, true, height, width, true);

    let mut open_to_ring: Vec<Vec<u32>> = vec![Vec::new(); open_count];
    let mut ring_to_open: Vec<Vec<u32>> = vec![Vec::new(); ring_count];
    let mut open_on_border = vec![false; open_count];
    let mut ring_on_border = vec![false; ring_count];

    for i in 0..wall.len() {
        if on_border(i, height, width) {
            if wall[i] {
                ring_on_border[ring_label[i] as usize] = true;
            } else {
                open_on_border[open_label[i] as usize] = true;
            }
        }
        if wall[i] {
            continue;
        }
        let open = open_label[i];
        for n in neighbours4(i, height, width) {
            if wall[n] {
                let ring = ring_label[n];
                open_to_ring[open as usize].push(ring);
                ring_to_open[ring as usize].push(open);
            }
        }
    }
    for list in open_to_ring.iter_mut().chain(ring_to_open.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }

    // Depth 0 is the world outside the frame together with every open region
    // that touches the frame border.
    let mut depth = vec![u32::MAX; open_count];
    let mut ring_seen = vec![false; ring_count];
    let mut queue: VecDeque<(Option<u32>, u32)> = VecDeque::new();
    queue.push_back((None, 0));
    for (open, _) in open_on_border.iter().enumerate().filter(|(_, &b)| b) {
        depth[open] = 0;
        queue.push_back((Some(open as u32), 0));
    }
    while let Some((region, d)) = queue.pop_front() {
        let rings: Vec<u32> = match region {
            None => (0..ring_count as u32)
                .filter(|&k| ring_on_border[k as usize])
                .collect(),
            Some(open) => open_to_ring[open as usize].clone(),
        };
        for ring in rings {
            if std::mem::replace(&mut ring_seen[ring as usize], true) {
                continue;
            }
            for &next in &ring_to_open[ring as usize] {
                if depth[next as usize] == u32::MAX {
                    depth[next as usize] = d + 1;
                    queue.push_back((Some(next), d + 1));
                }
            }
        }
    }

    BitGrid::from_fn(height, width, |r, c| {
        let i = r * width + c;
        wall[i] || {
            let d = depth[open_label[i] as usize];
            d != u32::MAX && d % 2 == 1
        }
    })
    .expect("existing shape")
}

/// True when every background pixel can reach the frame border through
/// background pixels (4-connectivity), i.e. the silhouette has no holes.
pub fn is_hole_free(silhouette: &BitGrid) -> bool {
    fill_holes(silhouette) == *silhouette
}

/// Sets every enclosed background pixel to foreground.
pub fn fill_holes(silhouette: &BitGrid) -> BitGrid {
    exterior_fill(silhouette)
}
