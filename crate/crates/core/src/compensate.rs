//! Motion-compensated prediction frames and decision masks.

use std::fmt::Write as _;

use crate::frame::{quantize, Frame, InterpolatedRef};
use crate::par::{self, Parallelism};
use crate::projection::{CalibrationProfile, LensModel};
use crate::search::{block_grid, Block, BlockMotion, Decision, FisheyeBlock, MotionField, SearchConfig};
use crate::{Error, Result};

pub const GREEN: [u8; 3] = [0, 255, 0];
pub const RED: [u8; 3] = [255, 0, 0];
pub const YELLOW: [u8; 3] = [255, 255, 0];

/// Per-block record of which path produced the prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionMask {
    pub width: usize,
    pub height: usize,
    pub block_size: usize,
    pub blocks: Vec<(Block, Decision)>,
}

impl DecisionMask {
    pub fn from_field(field: &MotionField) -> Self {
        DecisionMask {
            width: field.width,
            height: field.height,
            block_size: field.block_size,
            blocks: field.blocks.iter().map(|b| (b.block, b.chosen)).collect(),
        }
    }

    pub fn color(decision: Decision) -> [u8; 3] {
        match decision {
            Decision::Fisheye => GREEN,
            Decision::Traditional => RED,
            Decision::Equal => YELLOW,
        }
    }

    /// RGB raster with each block painted in its decision color.
    pub fn to_rgb(&self) -> Vec<u8> {
        let mut rgb = vec![0u8; self.width * self.height * 3];
        for (block, decision) in &self.blocks {
            let c = Self::color(*decision);
            for (x, y) in block.pixels() {
                let i = (y * self.width + x) * 3;
                rgb[i..i + 3].copy_from_slice(&c);
            }
        }
        rgb
    }

    /// Decision colors blended 50% over a luminance frame.
    pub fn overlay(&self, luma: &Frame) -> Result<Vec<u8>> {
        if luma.width() != self.width || luma.height() != self.height {
            return Err(Error::Usage("overlay frame does not match the mask".into()));
        }
        let mut rgb = self.to_rgb();
        for (px, &l) in rgb.chunks_exact_mut(3).zip(luma.luma()) {
            for c in px {
                *c = (*c as u16 + l as u16).div_ceil(2) as u8;
            }
        }
        Ok(rgb)
    }

    /// `block_col,block_row,x,y,decision` rows.
    pub fn to_csv(&self) -> String {
        let cols = self.width.div_ceil(self.block_size);
        let mut s = String::from("block_col,block_row,x,y,decision\n");
        for (i, (b, d)) in self.blocks.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", i % cols, i / cols, b.x, b.y, d.as_str());
        }
        s
    }
}

/// Unrounded prediction of one block, in raster order within the block.
///
/// This is the sampling used by the search, so the SSD of the prediction
/// against the current block is the energy stored in the field.
pub fn predict_block(
    reference: &InterpolatedRef,
    record: &BlockMotion,
    lens: Option<&LensModel>,
    wide_mode: bool,
) -> Result<Vec<f64>> {
    let block = &record.block;
    if record.chosen.uses_fisheye() {
        let lens = lens.ok_or_else(|| {
            Error::Usage("fisheye-compensated block without a lens model".into())
        })?;
        let fb = FisheyeBlock::project(lens, block).ok_or_else(|| {
            Error::Usage(format!(
                "block at ({}, {}) leaves the image circle but is marked {}",
                block.x,
                block.y,
                record.chosen.as_str()
            ))
        })?;
        Ok(fb.predict(lens, reference, record.mv, wide_mode))
    } else {
        let f = reference.frame();
        Ok(block
            .pixels()
            .map(|(x, y)| {
                f.get_clamped(x as isize + record.mv.dx as isize, y as isize + record.mv.dy as isize)
                    as f64
            })
            .collect())
    }
}

/// Build the compensated frame for `field`.
///
/// Every block is predicted through the same sampling path the search used,
/// so its unrounded SSD against the current frame is the recorded energy.
/// Nothing is masked afterwards: blocks wholly outside the image circle match
/// the black border at zero motion and stay black by themselves.
pub fn compensate_frame(
    reference: &Frame,
    field: &MotionField,
    cfg: &SearchConfig,
    profile: Option<&CalibrationProfile>,
) -> Result<(Frame, DecisionMask)> {
    compensate_frame_with(reference, field, cfg, profile, Parallelism::default())
}

pub fn compensate_frame_with(
    reference: &Frame,
    field: &MotionField,
    cfg: &SearchConfig,
    profile: Option<&CalibrationProfile>,
    mode: Parallelism,
) -> Result<(Frame, DecisionMask)> {
    check_geometry(reference, field, cfg)?;
    let lens = cfg.method.lens(profile)?;
    let wide_mode = cfg.method.wide_mode();
    let interp = InterpolatedRef::new(reference.clone());

    let predictions = par::map(&field.blocks, mode, |record| {
        predict_block(&interp, record, lens.as_ref(), wide_mode)
    });

    let mut out = Frame::filled(reference.width(), reference.height(), 0);
    for (record, pred) in field.blocks.iter().zip(predictions) {
        let pred = pred?;
        for ((x, y), v) in record.block.pixels().zip(pred) {
            out.set(x, y, quantize(v));
        }
    }
    Ok((out, DecisionMask::from_field(field)))
}

fn check_geometry(reference: &Frame, field: &MotionField, cfg: &SearchConfig) -> Result<()> {
    if field.width != reference.width() || field.height != reference.height() {
        return Err(Error::Usage(format!(
            "motion field is for {}x{} frames, reference is {}x{}",
            field.width,
            field.height,
            reference.width(),
            reference.height()
        )));
    }
    if field.block_size != cfg.block_size {
        return Err(Error::Usage(format!(
            "motion field uses block size {}, configuration says {}",
            field.block_size, cfg.block_size
        )));
    }
    let grid = block_grid(field.width, field.height, field.block_size);
    if grid.len() != field.blocks.len() || grid.iter().zip(&field.blocks).any(|(g, b)| *g != b.block) {
        return Err(Error::Usage("motion field does not tile the frame in raster order".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{estimate, Method, MotionVector};

    fn textured(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, |x, y| ((x * 37 + y * 91 + x * y * 3) % 251) as u8)
    }

    #[test]
    fn zero_field_reproduces_reference() {
        let r = textured(48, 40);
        let cfg = SearchConfig::new(16, 4, Method::Tme).unwrap();
        let field = estimate(&r, &r, &cfg, None).unwrap();
        let (out, mask) = compensate_frame(&r, &field, &cfg, None).unwrap();
        assert_eq!(out, r);
        assert!(mask.blocks.iter().all(|(_, d)| *d == Decision::Traditional));
    }

    #[test]
    fn shifted_pair_interior_exact() {
        let r = textured(64, 64);
        let cur = Frame::from_fn(64, 64, |x, y| r.get_clamped(x as isize - 2, y as isize + 5));
        let cfg = SearchConfig::new(16, 6, Method::Tme).unwrap();
        let field = estimate(&cur, &r, &cfg, None).unwrap();
        let (out, _) = compensate_frame(&r, &field, &cfg, None).unwrap();
        for y in 16..48 {
            for x in 16..48 {
                assert_eq!(out.get(x, y), cur.get(x, y));
            }
        }
        assert_eq!(field.blocks[5].mv, MotionVector::new(-2, 5));
    }

    #[test]
    fn geometry_mismatch_is_usage_error() {
        let r = textured(32, 32);
        let cfg = SearchConfig::new(16, 2, Method::Tme).unwrap();
        let field = estimate(&r, &r, &cfg, None).unwrap();
        let small = textured(16, 32);
        assert!(compensate_frame(&small, &field, &cfg, None).unwrap_err().is_usage());
        let cfg8 = SearchConfig::new(8, 2, Method::Tme).unwrap();
        assert!(compensate_frame(&r, &field, &cfg8, None).is_err());
    }

    #[test]
    fn mask_colors_and_overlay() {
        let mask = DecisionMask {
            width: 2,
            height: 1,
            block_size: 1,
            blocks: vec![
                (Block { x: 0, y: 0, width: 1, height: 1 }, Decision::Fisheye),
                (Block { x: 1, y: 0, width: 1, height: 1 }, Decision::Equal),
            ],
        };
        assert_eq!(mask.to_rgb(), vec![0, 255, 0, 255, 255, 0]);
        let luma = Frame::new(2, 1, vec![100, 0]).unwrap();
        assert_eq!(mask.overlay(&luma).unwrap(), vec![50, 178, 50, 128, 128, 0]);
        assert!(mask.to_csv().ends_with("1,0,1,0,equal\n"));
    }

    /// Unrounded per-block predictions, for comparing against recorded energies.
    fn block_energies(cur: &Frame, reference: &Frame, field: &MotionField, cfg: &SearchConfig, profile: &CalibrationProfile) -> Vec<f64> {
        let lens = cfg.method.lens(Some(profile)).unwrap();
        let interp = InterpolatedRef::new(reference.clone());
        field
            .blocks
            .iter()
            .map(|b| {
                let pred = predict_block(&interp, b, lens.as_ref(), cfg.method.wide_mode()).unwrap();
                b.block
                    .pixels()
                    .zip(pred)
                    .map(|((x, y), v)| {
                        let d = cur.get(x, y) as f64 - v;
                        d * d
                    })
                    .sum()
            })
            .collect()
    }

    fn disk_pair() -> (Frame, Frame, CalibrationProfile) {
        let profile = crate::projection::make_equisolid(20.0, (31.5, 31.5), 185.0).unwrap();
        let lens = LensModel::new(profile.clone());
        let scene = |s: f64| {
            Frame::from_fn(64, 64, |x, y| {
                if lens.contains(x as f64, y as f64) {
                    (128.0 + 80.0 * ((x as f64 + s) * 0.3).sin() * (y as f64 * 0.2).cos()) as u8
                } else {
                    0
                }
            })
        };
        (scene(0.0), scene(1.5), profile)
    }

    #[test]
    fn compensated_ssd_is_recorded_energy() {
        let (reference, cur, profile) = disk_pair();
        for method in [Method::Tme, Method::Eme, Method::EmePlus, Method::HmePlus] {
            let cfg = SearchConfig::new(8, 3, method).unwrap();
            let field = estimate(&cur, &reference, &cfg, Some(&profile)).unwrap();
            let energies = block_energies(&cur, &reference, &field, &cfg, &profile);
            for (b, e) in field.blocks.iter().zip(energies) {
                assert_eq!(b.energy(), e, "{method} block ({}, {})", b.block.x, b.block.y);
            }
        }
    }

    #[test]
    fn black_corners_stay_black() {
        let (reference, cur, profile) = disk_pair();
        let lens = LensModel::new(profile.clone());
        let cfg = SearchConfig::new(8, 3, Method::HmePlus).unwrap();
        let field = estimate(&cur, &reference, &cfg, Some(&profile)).unwrap();
        let (out, _) = compensate_frame(&reference, &field, &cfg, Some(&profile)).unwrap();
        let outside: Vec<&BlockMotion> = field
            .blocks
            .iter()
            .filter(|b| b.block.pixels().all(|(x, y)| !lens.contains(x as f64, y as f64)))
            .collect();
        assert!(!outside.is_empty());
        for b in outside {
            assert!(b.block.pixels().all(|(x, y)| out.get(x, y) == 0));
        }
    }
}
