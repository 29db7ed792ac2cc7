//! Seeded synthetic walker: a stick figure with a round head, a capsule
//! torso, swinging two-segment legs and swinging arms.
//!
//! Rasterisation uses integer arithmetic only (Q8 fixed point coordinates and
//! an integer sine approximation), so a given config produces the same bits
//! on every platform and in every language that follows the same recipe.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extract::fill_holes;
use crate::grid::{BitGrid, SilhouetteSequence};
use crate::rng::{splitmix64_at, SplitMix64};

/// Fixed-point scale of geometry coordinates.
const ONE: i64 = 256;
/// Phase units per gait cycle.
const TURN: i64 = 1 << 16;
/// Scale of [`sin_q15`] results.
const Q15: i64 = 1 << 15;

pub const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkerConfig {
    pub seed: u64,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Frames per gait cycle.
    pub period: usize,
    /// Horizontal foot excursion in pixels.
    pub stride: usize,
    /// Head diameter as a fraction of the height, in thousandths.
    pub head_permille: u32,
    /// Shoulder-to-hip length as a fraction of the height, in thousandths.
    pub torso_permille: u32,
    /// Fill enclosed background so that every frame is hole free.
    pub hole_free: bool,
}

impl Default for WalkerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 30,
            height: crate::DEFAULT_HEIGHT,
            width: crate::DEFAULT_WIDTH,
            period: 30,
            stride: 7,
            head_permille: 130,
            torso_permille: 330,
            hole_free: true,
        }
    }
}

/// `sin(2π · phase / 2^16)` in Q15, via Bhaskara I's rational approximation
/// (max error about 0.0016).
pub fn sin_q15(phase: i64) -> i64 {
    let p = phase.rem_euclid(TURN);
    let half = TURN / 2;
    let (x, sign) = if p < half { (p, 1) } else { (p - half, -1) };
    let u = x * (half - x);
    let denom = 5 * half * half / 4 - u;
    sign * (4 * u * Q15) / denom
}

pub fn cos_q15(phase: i64) -> i64 {
    sin_q15(phase + TURN / 4)
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: i64,
    y: i64,
}

/// Segment with rounded caps; a disc when both ends coincide.
#[derive(Debug, Clone, Copy)]
struct Capsule {
    a: Point,
    b: Point,
    radius: i64,
}

impl Capsule {
    fn contains(&self, p: Point) -> bool {
        let (dx, dy) = ((self.b.x - self.a.x) as i128, (self.b.y - self.a.y) as i128);
        let (px, py) = ((p.x - self.a.x) as i128, (p.y - self.a.y) as i128);
        let r2 = (self.radius as i128) * (self.radius as i128);
        let len2 = dx * dx + dy * dy;
        let dot = px * dx + py * dy;
        if len2 == 0 || dot <= 0 {
            return px * px + py * py <= r2;
        }
        if dot >= len2 {
            let (qx, qy) = (px - dx, py - dy);
            return qx * qx + qy * qy <= r2;
        }
        // |p|^2 - dot^2/len2 <= r^2, multiplied through by len2.
        (px * px + py * py) * len2 - dot * dot <= r2 * len2
    }

    fn bounds(&self) -> (i64, i64, i64, i64) {
        (
            self.a.x.min(self.b.x) - self.radius,
            self.a.x.max(self.b.x) + self.radius,
            self.a.y.min(self.b.y) - self.radius,
            self.a.y.max(self.b.y) + self.radius,
        )
    }
}

/// Body proportions resolved for one sequence, in Q8 pixels.
#[derive(Debug, Clone)]
struct Body {
    center_x: i64,
    top: i64,
    foot_y: i64,
    head_radius: i64,
    torso_radius: i64,
    torso_len: i64,
    hip_spread: i64,
    leg_radius: i64,
    arm_radius: i64,
    arm_len: i64,
    stride: i64,
    knee_bend: i64,
    phase0: i64,
}

fn scaled(v: usize, permille: i64) -> i64 {
    v as i64 * ONE * permille / 1000
}

impl Body {
    fn new(cfg: &WalkerConfig) -> Result<Self> {
        let unsat = |m: String| Err(Error::UnsatisfiableWalker(m));
        if cfg.height < MIN_SIDE || cfg.width < MIN_SIDE {
            return unsat(format!(
                "frame {}x{} is below the {MIN_SIDE}x{MIN_SIDE} minimum",
                cfg.height, cfg.width
            ));
        }
        if cfg.height > u16::MAX as usize || cfg.width > u16::MAX as usize {
            return unsat(format!("frame {}x{} is too large", cfg.height, cfg.width));
        }
        if cfg.period < 2 {
            return unsat(format!("period {} must be at least 2", cfg.period));
        }
        if cfg.frames == 0 {
            return unsat("frame count must be positive".into());
        }
        if cfg.head_permille < 40 || cfg.torso_permille < 100 {
            return unsat("head or torso too small to draw".into());
        }
        if cfg.head_permille + cfg.torso_permille > 750 {
            return unsat(format!(
                "head ({}) and torso ({}) leave no room for legs",
                cfg.head_permille, cfg.torso_permille
            ));
        }

        let mut rng = SplitMix64::new(cfg.seed);
        let jitter = |rng: &mut SplitMix64, span: i64| rng.range_inclusive(-span, span);

        let (h, w) = (cfg.height, cfg.width);
        let top = scaled(h, 30) + ONE / 2;
        let foot_y = (h as i64) * ONE - scaled(h, 25);
        let head_radius = scaled(h, cfg.head_permille as i64) / 2;
        let torso_len = scaled(h, cfg.torso_permille as i64);
        let torso_radius = scaled(w, 100) + jitter(&mut rng, ONE / 3);
        let leg_radius = scaled(w, 55) + jitter(&mut rng, ONE / 6);
        let arm_radius = scaled(w, 40);
        let hip_spread = torso_radius / 2;
        let stride = cfg.stride as i64 * ONE + jitter(&mut rng, ONE / 2);
        let center_x = (w as i64) * ONE / 2 + jitter(&mut rng, ONE);
        let phase0 = rng.below(TURN as u64) as i64;

        let reach = stride + hip_spread + leg_radius + ONE;
        if center_x - reach < 0 || center_x + reach > (w as i64) * ONE {
            return unsat(format!(
                "stride {} px does not fit a frame {} px wide",
                cfg.stride, w
            ));
        }
        Ok(Self {
            center_x,
            top,
            foot_y,
            head_radius,
            torso_radius,
            torso_len,
            hip_spread,
            leg_radius,
            arm_radius,
            arm_len: torso_len * 4 / 5,
            stride: stride.max(0),
            knee_bend: leg_radius,
            phase0,
        })
    }

    fn parts(&self, phase: i64) -> Vec<Capsule> {
        let s = sin_q15(phase);
        let bob = (ONE / 2) * sin_q15(2 * phase).abs() / Q15;
        let cx = self.center_x;
        let head_c = Point {
            x: cx,
            y: self.top + self.head_radius + bob,
        };
        let shoulder_y = head_c.y + self.head_radius + self.torso_radius / 2;
        let hip_y = head_c.y + self.head_radius + self.torso_len;
        let mut parts = vec![
            Capsule {
                a: head_c,
                b: head_c,
                radius: self.head_radius,
            },
            Capsule {
                a: Point { x: cx, y: shoulder_y },
                b: Point { x: cx, y: hip_y },
                radius: self.torso_radius,
            },
        ];
        let knee_y = (hip_y + self.foot_y) / 2;
        for side in [1i64, -1] {
            let swing = side * self.stride * s / Q15;
            let hip = Point {
                x: cx + side * self.hip_spread / 2,
                y: hip_y,
            };
            // The knee leads while the leg moves forward.
            let forward = (side * cos_q15(phase)).max(0);
            let knee = Point {
                x: hip.x + swing / 2 + self.knee_bend * forward / Q15,
                y: knee_y,
            };
            let foot = Point {
                x: hip.x + swing,
                y: self.foot_y - self.leg_radius,
            };
            parts.push(Capsule {
                a: hip,
                b: knee,
                radius: self.leg_radius,
            });
            parts.push(Capsule {
                a: knee,
                b: foot,
                radius: self.leg_radius,
            });
            let shoulder = Point {
                x: cx + side * (self.torso_radius - self.arm_radius / 2),
                y: shoulder_y,
            };
            let hand = Point {
                x: shoulder.x - swing * 3 / 5,
                y: shoulder_y + self.arm_len,
            };
            parts.push(Capsule {
                a: shoulder,
                b: hand,
                radius: self.arm_radius,
            });
        }
        parts
    }
}

fn rasterize(parts: &[Capsule], height: usize, width: usize) -> BitGrid {
    let mut grid = BitGrid::new(height, width).expect("validated dimensions");
    for part in parts {
        let (x0, x1, y0, y1) = part.bounds();
        let col0 = (x0.div_euclid(ONE)).clamp(0, width as i64 - 1) as usize;
        let col1 = (x1.div_euclid(ONE)).clamp(0, width as i64 - 1) as usize;
        let row0 = (y0.div_euclid(ONE)).clamp(0, height as i64 - 1) as usize;
        let row1 = (y1.div_euclid(ONE)).clamp(0, height as i64 - 1) as usize;
        for row in row0..=row1 {
            for col in col0..=col1 {
                let center = Point {
                    x: col as i64 * ONE + ONE / 2,
                    y: row as i64 * ONE + ONE / 2,
                };
                if part.contains(center) {
                    grid.set_unchecked(row, col, true);
                }
            }
        }
    }
    grid
}

/// Phase of frame `t`; exactly periodic in `period`.
fn phase_at(t: usize, period: usize, phase0: i64) -> i64 {
    (phase0 + (t as i64 * TURN) / period as i64).rem_euclid(TURN)
}

pub fn generate_walker(cfg: &WalkerConfig) -> Result<SilhouetteSequence> {
    let body = Body::new(cfg)?;
    let frames = (0..cfg.frames)
        .map(|t| {
            let phase = phase_at(t, cfg.period, body.phase0);
            let grid = rasterize(&body.parts(phase), cfg.height, cfg.width);
            if cfg.hole_free {
                fill_holes(&grid)
            } else {
                grid
            }
        })
        .collect();
    SilhouetteSequence::new(
        frames,
        format!("walker-{:016x}", cfg.seed),
        format!("walker:seed={}", cfg.seed),
    )
}

/// `count` walkers; walker `k` is seeded with SplitMix64 output `k` of the
/// base seed and labelled `seq-kkk`.
pub fn generate_corpus(base: &WalkerConfig, count: usize) -> Result<Vec<SilhouetteSequence>> {
    (0..count)
        .map(|k| {
            let cfg = WalkerConfig {
                seed: splitmix64_at(base.seed, k as u64),
                ..base.clone()
            };
            let seq = generate_walker(&cfg)?;
            SilhouetteSequence::new(
                seq.into_frames(),
                format!("seq-{k:03}"),
                format!("walker:seed={}:seq={k}", base.seed),
            )
        })
        .collect()
}
