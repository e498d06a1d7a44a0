//! Ground-truth fisheye sequences of a textured plane under camera translation.
//!
//! The plane sits parallel to the image plane, so a sideways camera move is a
//! pure shift of its perspective image: the perspective-domain motion between
//! two renders is exactly the texture offset difference divided by the scale.
//! Rays past 90° hit a second, mirrored plane behind the camera; they are
//! rendered through the inverse of the wide-angle re-mapping so that content
//! beyond the 90° circle moves consistently with the front plane.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frame::{quantize, Frame};
use crate::par::{self, Parallelism};
use crate::pnm;
use crate::projection::{mirror_radius, CalibrationProfile, LensModel, TAN_GUARD};
use crate::{Error, Result};

/// Low-frequency luminance term that depends on the direction from the plane
/// origin. Far from the axis it approaches `amplitude·cos(angle − direction)`,
/// which keeps content near and beyond 90° distinguishable by direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub amplitude: f64,
    /// Gradient direction in radians.
    pub direction: f64,
    /// Plane distance (texture pixels) over which the gradient saturates.
    pub radius: f64,
}

impl Horizon {
    #[inline]
    fn value(&self, u: f64, v: f64) -> f64 {
        let (s, c) = self.direction.sin_cos();
        let norm = (u * u + v * v + self.radius * self.radius).sqrt();
        self.amplitude * (u * c + v * s) / norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneScene {
    /// Tileable luminance pattern, repeated over the plane.
    pub texture: Frame,
    /// Texture pixels per perspective pixel.
    pub scale: f64,
    /// Texture coordinate seen along the optical axis.
    pub offset: (f64, f64),
    pub horizon: Option<Horizon>,
    /// Sub-samples per axis averaged into each pixel.
    pub supersample: u32,
}

impl PlaneScene {
    pub fn new(texture: Frame, scale: f64, offset: (f64, f64)) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Usage(format!("scene scale must be positive, got {scale}")));
        }
        Ok(PlaneScene {
            texture,
            scale,
            offset,
            horizon: None,
            supersample: 1,
        })
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_supersampling(mut self, per_axis: u32) -> Self {
        self.supersample = per_axis.max(1);
        self
    }

    /// Scene used by the CLI and the tests: a sum of tileable cosines on a
    /// 256² tile, a horizon gradient, 3×3 supersampling.
    pub fn standard() -> Self {
        PlaneScene {
            texture: procedural_texture(256),
            scale: 1.0,
            offset: (0.0, 0.0),
            horizon: Some(Horizon {
                amplitude: 70.0,
                direction: 0.6,
                radius: 400.0,
            }),
            supersample: 3,
        }
    }

    /// Luminance at plane coordinate `(u, v)`, unclamped.
    pub fn value_at(&self, u: f64, v: f64) -> f64 {
        let t = &self.texture;
        let (w, h) = (t.width() as f64, t.height() as f64);
        let x = u.rem_euclid(w);
        let y = v.rem_euclid(h);
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let xi = (x0 as usize).min(t.width() - 1);
        let yi = (y0 as usize).min(t.height() - 1);
        let xj = (xi + 1) % t.width();
        let yj = (yi + 1) % t.height();
        let p00 = t.get(xi, yi) as f64;
        let p01 = t.get(xj, yi) as f64;
        let p10 = t.get(xi, yj) as f64;
        let p11 = t.get(xj, yj) as f64;
        let top = p00 + fx * (p01 - p00);
        let bottom = p10 + fx * (p11 - p10);
        let mut val = top + fy * (bottom - top);
        if let Some(hz) = &self.horizon {
            val += hz.value(u, v);
        }
        val
    }
}

/// Tileable test pattern: mid-gray plus cosines with whole cycles per tile.
pub fn procedural_texture(size: usize) -> Frame {
    const WAVES: [(f64, f64, f64, f64); 6] = [
        (3.0, 1.0, 22.0, 0.3),
        (1.0, 4.0, 20.0, 1.1),
        (7.0, 2.0, 18.0, 2.0),
        (-5.0, 6.0, 18.0, 0.7),
        (11.0, -3.0, 14.0, 2.6),
        (2.0, 13.0, 14.0, 4.1),
    ];
    let n = size as f64;
    Frame::from_fn(size, size, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let v = WAVES.iter().fold(128.0, |acc, &(kx, ky, a, phase)| {
            acc + a * (std::f64::consts::TAU * (kx * x + ky * y) / n + phase).cos()
        });
        quantize(v)
    })
}

/// Plane coordinate (relative to the axis) seen by the ray through fisheye
/// offset `(dx, dy)` from the center.
fn plane_point(lens: &LensModel, dx: f64, dy: f64) -> (f64, f64) {
    let rho = dx.hypot(dy);
    if rho == 0.0 {
        return (0.0, 0.0);
    }
    let (ux, uy) = (dx / rho, dy / rho);
    let r_f = rho.min(lens.valid_radius());
    let f = lens.profile().focal_length();
    let theta = lens.invert_radius(r_f).expect("radius clipped to the valid circle");
    let theta = if theta > FRAC_PI_2 {
        let unmirrored = mirror_radius(r_f, lens.right_angle_radius()).max(0.0);
        lens.invert_radius(unmirrored.min(lens.valid_radius()))
            .expect("mirrored radius inside the circle")
    } else {
        theta
    };
    let lateral = f * theta.min(FRAC_PI_2 - TAN_GUARD).tan();
    (lateral * ux, lateral * uy)
}

/// Render the scene through `profile`. Pixels outside the image circle are black.
pub fn render_fisheye(scene: &PlaneScene, profile: &CalibrationProfile, width: usize, height: usize) -> Frame {
    render_fisheye_with(scene, profile, width, height, Parallelism::default())
}

pub fn render_fisheye_with(
    scene: &PlaneScene,
    profile: &CalibrationProfile,
    width: usize,
    height: usize,
    mode: Parallelism,
) -> Frame {
    let lens = LensModel::new(profile.clone());
    let (cx, cy) = profile.center();
    let n = scene.supersample.max(1);
    let subs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64 - 0.5).collect();
    let norm = (n * n) as f64;
    let mut luma = vec![0u8; width * height];
    par::for_each_row(&mut luma, width, mode, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            if !lens.contains(x as f64, y as f64) {
                continue;
            }
            let mut acc = 0.0;
            for &sy in &subs {
                for &sx in &subs {
                    let (px, py) = plane_point(&lens, x as f64 + sx - cx, y as f64 + sy - cy);
                    acc += scene.value_at(scene.offset.0 + scene.scale * px, scene.offset.1 + scene.scale * py);
                }
            }
            *out = quantize(acc / norm);
        }
    });
    Frame::new(width, height, luma).expect("buffer sized to the frame")
}

/// Perspective-domain motion between consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub dx_p: f64,
    pub dy_p: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: Vec<Frame>,
    pub truth: GroundTruth,
}

impl SyntheticSequence {
    /// Write `frame_0001.pgm`, ... and `truth.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, f) in self.frames.iter().enumerate() {
            pnm::write_pgm(&dir.join(frame_file_name(i + 1)), f)?;
        }
        let truth = dir.join("truth.json");
        let json = serde_json::to_string_pretty(&self.truth).expect("truth serializes") + "\n";
        fs::write(&truth, json).map_err(|e| Error::io(truth, e))
    }
}

pub fn frame_file_name(number: usize) -> String {
    format!("frame_{number:04}.pgm")
}

/// Render `n_frames` frames, frame `k` with the offset moved by `k·step`.
pub fn generate_sequence(
    scene: &PlaneScene,
    profile: &CalibrationProfile,
    width: usize,
    height: usize,
    n_frames: usize,
    step: (f64, f64),
) -> Result<SyntheticSequence> {
    generate_sequence_with(scene, profile, width, height, n_frames, step, Parallelism::default())
}

pub fn generate_sequence_with(
    scene: &PlaneScene,
    profile: &CalibrationProfile,
    width: usize,
    height: usize,
    n_frames: usize,
    step: (f64, f64),
    mode: Parallelism,
) -> Result<SyntheticSequence> {
    if n_frames < 2 {
        return Err(Error::Usage(format!("a sequence needs at least two frames, got {n_frames}")));
    }
    let frames = (0..n_frames)
        .map(|k| {
            let k = k as f64;
            let shifted = PlaneScene {
                offset: (scene.offset.0 + k * step.0, scene.offset.1 + k * step.1),
                ..scene.clone()
            };
            render_fisheye_with(&shifted, profile, width, height, mode)
        })
        .collect();
    Ok(SyntheticSequence {
        frames,
        truth: GroundTruth {
            dx_p: step.0 / scene.scale,
            dy_p: step.1 / scene.scale,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::make_equisolid;

    fn small_profile() -> CalibrationProfile {
        make_equisolid(40.0, (47.5, 47.5), 185.0).unwrap()
    }

    #[test]
    fn constant_texture_gives_flat_disk() {
        let scene = PlaneScene::new(Frame::filled(16, 16, 90), 1.0, (0.0, 0.0)).unwrap();
        let p = small_profile();
        let f = render_fisheye(&scene, &p, 96, 96);
        let mask = crate::metrics::RegionMask::round(96, 96, &p);
        for y in 0..96 {
            for x in 0..96 {
                assert_eq!(f.get(x, y), if mask.get(x, y) { 90 } else { 0 });
            }
        }
    }

    #[test]
    fn zero_step_repeats_frames() {
        let scene = PlaneScene::standard().with_supersampling(1);
        let seq = generate_sequence(&scene, &small_profile(), 96, 96, 3, (0.0, 0.0)).unwrap();
        assert_eq!(seq.frames[0], seq.frames[1]);
        assert_eq!(seq.frames[1], seq.frames[2]);
        assert!(generate_sequence(&scene, &small_profile(), 96, 96, 1, (1.0, 0.0)).is_err());
    }

    #[test]
    fn truth_is_step_over_scale() {
        let mut scene = PlaneScene::standard().with_supersampling(1);
        scene.scale = 2.0;
        let seq = generate_sequence(&scene, &small_profile(), 32, 32, 2, (16.0, -4.0)).unwrap();
        assert_eq!(seq.truth, GroundTruth { dx_p: 8.0, dy_p: -2.0 });
    }

    #[test]
    fn texture_tiles() {
        let t = procedural_texture(64);
        let scene = PlaneScene::new(t, 1.0, (0.0, 0.0)).unwrap();
        assert_eq!(scene.value_at(3.25, 7.5), scene.value_at(3.25 + 64.0, 7.5 - 128.0));
    }

    #[test]
    fn sequential_and_parallel_renders_agree() {
        let scene = PlaneScene::standard();
        let p = small_profile();
        let a = render_fisheye_with(&scene, &p, 96, 96, Parallelism::Sequential);
        let b = render_fisheye_with(&scene, &p, 96, 96, Parallelism::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn wide_rays_land_on_the_back_plane_in_their_own_direction() {
        let lens = LensModel::new(small_profile());
        let r = 0.5 * (lens.right_angle_radius() + lens.valid_radius());
        let (px, py) = plane_point(&lens, r, 0.0);
        assert!(px > 0.0 && py.abs() < 1e-9);
        // continuity across the 90° circle: both sides run off to large radii
        let inner = plane_point(&lens, lens.right_angle_radius() - 0.01, 0.0).0;
        let outer = plane_point(&lens, lens.right_angle_radius() + 0.01, 0.0).0;
        assert!(inner > 1e3 && outer > 1e3);
    }
}
