//! Deterministic synthetic surveillance sequence with exact masks.
//!
//! A smooth static background, a textured square sprite sweeping the frame
//! in horizontal raster order (toroidal wrap-around), frame ranges with no
//! sprite, and a range where the sprite stands still. The sprite texture is
//! redrawn every frame, so like a real moving object its contrast against
//! the background varies over time.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::Dataset;
use crate::numerics::DenseMatrix;

pub const MASK_ON: f64 = 255.0;
/// Default range of sprite pixel intensities.
pub const SPRITE_INTENSITY: (f64, f64) = (130.0, 235.0);

/// Inclusive 1-based frame interval.
pub type FrameRange = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub n_frames: usize,
    /// Side of the square sprite in pixels.
    pub sprite_size: usize,
    /// Sprite pixels are drawn i.i.d. uniform from this range in every
    /// frame; equal bounds give a flat sprite.
    pub sprite_intensity: (f64, f64),
    pub empty_ranges: Vec<FrameRange>,
    pub static_range: Option<FrameRange>,
    pub noise_sigma: f64,
    /// Amplitude of a linear illumination ramp on the background.
    pub illumination: Option<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            height: 64,
            width: 80,
            n_frames: 120,
            sprite_size: 12,
            sprite_intensity: SPRITE_INTENSITY,
            empty_ranges: vec![(2, 5), (90, 100)],
            static_range: Some((110, 120)),
            noise_sigma: 0.0,
            illumination: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.n_frames == 0 {
            return Err(Error::Config("height, width and n_frames must be positive".into()));
        }
        if self.sprite_size == 0 || self.sprite_size > self.height.min(self.width) {
            return Err(Error::Config(format!(
                "sprite of size {} does not fit in a {}x{} frame",
                self.sprite_size, self.height, self.width
            )));
        }
        let (lo, hi) = self.sprite_intensity;
        if !(0.0..=255.0).contains(&lo) || !(0.0..=255.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!("sprite intensity range must lie in [0, 255], got ({lo}, {hi})")));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if let Some(a) = self.illumination {
            if !(a.abs() < 2.0) {
                return Err(Error::Config(format!("illumination amplitude must be in (-2, 2), got {a}")));
            }
        }
        let mut ranges: Vec<FrameRange> = self.empty_ranges.clone();
        ranges.extend(self.static_range);
        for &(lo, hi) in &ranges {
            if lo == 0 || lo > hi || hi > self.n_frames {
                return Err(Error::Config(format!(
                    "frame range [{lo}, {hi}] is not within [1, {}]",
                    self.n_frames
                )));
            }
        }
        ranges.sort();
        if ranges.windows(2).any(|w| w[1].0 <= w[0].1) {
            return Err(Error::Config("frame ranges must be pairwise disjoint".into()));
        }
        Ok(())
    }

    fn in_ranges(ranges: &[FrameRange], frame: usize) -> bool {
        ranges.iter().any(|&(lo, hi)| (lo..=hi).contains(&frame))
    }

    /// Whether 1-based `frame` has no foreground.
    pub fn is_empty_frame(&self, frame: usize) -> bool {
        Self::in_ranges(&self.empty_ranges, frame)
    }

    fn speed(&self) -> usize {
        (self.sprite_size / 3).max(1)
    }

    /// Top-left corner `(row, col)` of the sprite in 1-based `frame`, or
    /// `None` when the frame is empty.
    pub fn sprite_origin(&self, frame: usize) -> Option<(usize, usize)> {
        if self.is_empty_frame(frame) {
            return None;
        }
        let t = match self.static_range {
            Some((lo, hi)) if (lo..=hi).contains(&frame) => lo - 1,
            _ => frame - 1,
        };
        let step = t * self.speed();
        let col = step % self.width;
        let band = step / self.width;
        let row = (band * self.sprite_size + self.sprite_size / 2) % self.height;
        Some((row, col))
    }

    pub fn background(&self) -> DenseMatrix {
        let (h, w) = (self.height as f64, self.width as f64);
        DenseMatrix::from_fn(self.height, self.width, |i, j| {
            let x = 2.0 * PI * j as f64 / w;
            let y = 2.0 * PI * i as f64 / h;
            (100.0 + 40.0 * (x + 0.3).sin() * y.cos()).round()
        })
    }

    fn illumination_gain(&self, frame: usize) -> f64 {
        match self.illumination {
            None => 1.0,
            Some(a) => {
                let t = if self.n_frames > 1 {
                    (frame - 1) as f64 / (self.n_frames - 1) as f64
                } else {
                    0.0
                };
                1.0 + a * (t - 0.5)
            }
        }
    }

    /// Pixels `(row, col)` covered by the sprite in 1-based `frame`.
    pub fn sprite_support(&self, frame: usize) -> Vec<(usize, usize)> {
        let Some((r0, c0)) = self.sprite_origin(frame) else {
            return Vec::new();
        };
        let n = self.sprite_size;
        (0..n)
            .flat_map(|dj| (0..n).map(move |di| ((r0 + di) % self.height, (c0 + dj) % self.width)))
            .collect()
    }

    /// Mask of the sprite in 1-based `frame`, `h x w` with values in `{0, 255}`.
    pub fn mask(&self, frame: usize) -> DenseMatrix {
        let mut mask = DenseMatrix::zeros(self.height, self.width);
        for (i, j) in self.sprite_support(frame) {
            mask[(i, j)] = MASK_ON;
        }
        mask
    }
}

/// Renders the sequence. Frames are integer-valued in `[0, 255]` so they
/// survive an 8-bit round trip unchanged.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let (h, w, n) = (spec.height, spec.width, spec.n_frames);
    let m = h * w;
    let background = spec.background();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut frames = DenseMatrix::zeros(m, n);
    let mut masks = DenseMatrix::zeros(m, n);

    for j in 0..n {
        let frame_no = j + 1;
        let gain = spec.illumination_gain(frame_no);
        let mut img = &background * gain;
        let (lo, hi) = spec.sprite_intensity;
        for (r, c) in spec.sprite_support(frame_no) {
            img[(r, c)] = if lo < hi { rng.random_range(lo..=hi) } else { lo };
            masks[(r + c * h, j)] = MASK_ON;
        }
        for p in 0..m {
            let noisy = if spec.noise_sigma > 0.0 {
                img[p] + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                img[p]
            };
            frames[(p, j)] = noisy.round().clamp(0.0, 255.0);
        }
    }

    Ok(Dataset {
        height: h,
        width: w,
        frames,
        ground_truth: Some(masks),
        names: (1..=n).map(|j| format!("frame_{j:06}.pgm")).collect(),
    })
}
