//! Full-search block matching: traditional, fisheye, and hybrid.
//!
//! Every method scans the same integer grid of candidates, `[-range, range]²`.
//! For the traditional path a candidate is an image-domain displacement; for
//! the fisheye path it is a displacement of the block's perspective
//! coordinates. The minimum SSD wins, ties going to the smaller `dx² + dy²`
//! and then to raster order of `(dy, dx)`.

mod field;

use std::fmt;
use std::str::FromStr;

pub use field::{BlockMotion, Decision, MotionField};

use crate::frame::{Frame, InterpolatedRef};
use crate::par::{self, Parallelism};
use crate::projection::{make_equisolid, CalibrationProfile, LensModel};
use crate::{Error, Result};

/// Block sizes accepted by [`SearchConfig`].
pub const BLOCK_SIZES: [usize; 4] = [8, 16, 32, 64];

/// Estimation method, named after the usual nomenclature.
///
/// `e*` methods project through an equisolid model built from the profile's
/// focal length, `c*` methods through the calibrated profile itself. `h`
/// marks the hybrid with traditional matching, `_plus` the wide-angle
/// re-mapping for rays beyond 90°.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Tme,
    Eme,
    EmePlus,
    Hme,
    HmePlus,
    Cme,
    CmePlus,
    Chme,
    ChmePlus,
}

/// Lens model a fisheye method projects through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LensSource {
    Equisolid,
    Calibrated,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Tme,
        Method::Eme,
        Method::Hme,
        Method::EmePlus,
        Method::HmePlus,
        Method::Cme,
        Method::Chme,
        Method::CmePlus,
        Method::ChmePlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tme => "tme",
            Method::Eme => "eme",
            Method::EmePlus => "eme_plus",
            Method::Hme => "hme",
            Method::HmePlus => "hme_plus",
            Method::Cme => "cme",
            Method::CmePlus => "cme_plus",
            Method::Chme => "chme",
            Method::ChmePlus => "chme_plus",
        }
    }

    pub fn lens_source(self) -> Option<LensSource> {
        use Method::*;
        match self {
            Tme => None,
            Eme | EmePlus | Hme | HmePlus => Some(LensSource::Equisolid),
            Cme | CmePlus | Chme | ChmePlus => Some(LensSource::Calibrated),
        }
    }

    pub fn is_hybrid(self) -> bool {
        use Method::*;
        matches!(self, Hme | HmePlus | Chme | ChmePlus)
    }

    pub fn wide_mode(self) -> bool {
        use Method::*;
        matches!(self, EmePlus | HmePlus | CmePlus | ChmePlus)
    }

    pub fn needs_profile(self) -> bool {
        self.lens_source().is_some()
    }

    /// Lens model for this method, or `None` for traditional matching.
    pub fn lens(self, profile: Option<&CalibrationProfile>) -> Result<Option<LensModel>> {
        let Some(source) = self.lens_source() else {
            return Ok(None);
        };
        let profile = profile.ok_or_else(|| {
            Error::Usage(format!("method {self} needs a calibration profile"))
        })?;
        let lens_profile = match source {
            LensSource::Calibrated => profile.clone(),
            LensSource::Equisolid => {
                make_equisolid(profile.focal_length(), profile.center(), profile.fov_deg())?
            }
        };
        Ok(Some(LensModel::new(lens_profile)))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown method `{s}`, expected one of tme, eme, hme, eme_plus, hme_plus, cme, chme, cme_plus, chme_plus"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub block_size: usize,
    pub search_range: i32,
    pub method: Method,
}

impl SearchConfig {
    pub fn new(block_size: usize, search_range: i32, method: Method) -> Result<Self> {
        if !BLOCK_SIZES.contains(&block_size) {
            return Err(Error::Usage(format!(
                "block size must be one of 8, 16, 32, 64, got {block_size}"
            )));
        }
        if search_range < 1 {
            return Err(Error::Usage(format!(
                "search range must be at least 1, got {search_range}"
            )));
        }
        Ok(SearchConfig {
            block_size,
            search_range,
            method,
        })
    }

    pub fn with_method(self, method: Method) -> Self {
        SearchConfig { method, ..self }
    }
}

/// Integer displacement. Perspective-domain for fisheye paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };

    pub const fn new(dx: i32, dy: i32) -> Self {
        MotionVector { dx, dy }
    }

    pub fn norm2(self) -> i64 {
        let (dx, dy) = (self.dx as i64, self.dy as i64);
        dx * dx + dy * dy
    }

    pub fn as_f64(self) -> (f64, f64) {
        (self.dx as f64, self.dy as f64)
    }
}

/// Axis-aligned pixel rectangle of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Block {
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y..self.y + self.height)
            .flat_map(move |y| (self.x..self.x + self.width).map(move |x| (x, y)))
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    fn corners(&self) -> [(f64, f64); 4] {
        let (x0, y0) = (self.x as f64, self.y as f64);
        let (x1, y1) = ((self.x + self.width - 1) as f64, (self.y + self.height - 1) as f64);
        [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
    }
}

/// Raster-order tiling. Blocks on the right and bottom edges are clipped.
pub fn block_grid(width: usize, height: usize, block_size: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    for y in (0..height).step_by(block_size) {
        for x in (0..width).step_by(block_size) {
            blocks.push(Block {
                x,
                y,
                width: block_size.min(width - x),
                height: block_size.min(height - y),
            });
        }
    }
    blocks
}

/// All candidates of `[-range, range]²` in tie-break order.
///
/// A scan that only accepts strict improvements therefore resolves ties
/// exactly as the ordering prescribes.
pub fn candidate_order(range: i32) -> Vec<MotionVector> {
    let mut c: Vec<MotionVector> = (-range..=range)
        .flat_map(|dy| (-range..=range).map(move |dx| MotionVector::new(dx, dy)))
        .collect();
    c.sort_by_key(|m| (m.norm2(), m.dy, m.dx));
    c
}

/// Sum of squared differences of two equally sized blocks.
pub fn ssd(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "ssd of blocks with {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    let sum: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64)
}

/// Outcome of a single-path block search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatch {
    pub mv: MotionVector,
    pub energy: f64,
}

/// SSD of `block` against `reference` displaced by `mv`, with edge clamping.
/// Stops early, returning `None`, once the partial sum reaches `limit`.
fn shifted_ssd(cur: &Frame, reference: &Frame, block: &Block, mv: MotionVector, limit: u64) -> Option<u64> {
    let w = reference.width() as isize;
    let h = reference.height() as isize;
    let x0 = block.x as isize + mv.dx as isize;
    let inside_x = x0 >= 0 && x0 + block.width as isize <= w;
    let cur_luma = cur.luma();
    let ref_luma = reference.luma();
    let mut acc = 0u64;
    for j in 0..block.height {
        let ry = (block.y as isize + j as isize + mv.dy as isize).clamp(0, h - 1) as usize;
        let cur_row = &cur_luma[(block.y + j) * cur.width() + block.x..][..block.width];
        let ref_row = &ref_luma[ry * w as usize..][..w as usize];
        if inside_x {
            let r = &ref_row[x0 as usize..][..block.width];
            for (&a, &b) in cur_row.iter().zip(r) {
                let d = a as i32 - b as i32;
                acc += (d * d) as u64;
            }
        } else {
            for (i, &a) in cur_row.iter().enumerate() {
                let rx = (x0 + i as isize).clamp(0, w - 1) as usize;
                let d = a as i32 - ref_row[rx] as i32;
                acc += (d * d) as u64;
            }
        }
        if acc >= limit {
            return None;
        }
    }
    Some(acc)
}

fn traditional_scan(cur: &Frame, reference: &Frame, block: &Block, candidates: &[MotionVector]) -> BlockMatch {
    let mut best = BlockMatch {
        mv: MotionVector::ZERO,
        energy: f64::INFINITY,
    };
    let mut limit = u64::MAX;
    for &mv in candidates {
        if let Some(e) = shifted_ssd(cur, reference, block, mv, limit) {
            limit = e;
            best = BlockMatch { mv, energy: e as f64 };
            if e == 0 {
                break;
            }
        }
    }
    best
}

/// Exhaustive integer-pel search of `block` in `reference`.
pub fn search_traditional(cur: &Frame, reference: &Frame, block: &Block, cfg: &SearchConfig) -> BlockMatch {
    traditional_scan(cur, reference, block, &candidate_order(cfg.search_range))
}

/// A block's pixels projected to the perspective domain, ready for scanning.
#[derive(Debug, Clone)]
pub struct FisheyeBlock {
    coords: Vec<(f64, f64)>,
    wide: Vec<bool>,
    target: Vec<f64>,
}

impl FisheyeBlock {
    /// `None` when any pixel of the block lies outside the valid image circle.
    pub fn new(lens: &LensModel, cur: &Frame, block: &Block) -> Option<Self> {
        let mut fb = Self::project(lens, block)?;
        fb.target = block.pixels().map(|(x, y)| cur.get(x, y) as f64).collect();
        Some(fb)
    }

    /// Projection only, without current-frame samples; enough for [`Self::predict`].
    pub fn project(lens: &LensModel, block: &Block) -> Option<Self> {
        if !block.corners().iter().all(|&(x, y)| lens.contains(x, y)) {
            return None;
        }
        let mut coords = Vec::with_capacity(block.area());
        let mut wide = Vec::with_capacity(block.area());
        for (x, y) in block.pixels() {
            let (p, w) = lens.to_perspective(x as f64, y as f64).ok()?;
            coords.push(p);
            wide.push(w);
        }
        Some(FisheyeBlock {
            coords,
            wide,
            target: Vec::new(),
        })
    }

    pub fn any_wide(&self) -> bool {
        self.wide.iter().any(|&w| w)
    }

    /// Predicted samples for candidate `mv`, unrounded.
    pub fn predict(&self, lens: &LensModel, reference: &InterpolatedRef, mv: MotionVector, wide_mode: bool) -> Vec<f64> {
        let (dx, dy) = mv.as_f64();
        self.coords
            .iter()
            .zip(&self.wide)
            .map(|(&(xp, yp), &w)| {
                let (fx, fy) = lens.back_project(xp, yp, w, dx, dy, wide_mode);
                reference.sample(fx, fy)
            })
            .collect()
    }

    fn energy_below(
        &self,
        lens: &LensModel,
        reference: &InterpolatedRef,
        mv: MotionVector,
        wide_mode: bool,
        limit: f64,
    ) -> Option<f64> {
        let (dx, dy) = mv.as_f64();
        let mut acc = 0.0;
        for ((&(xp, yp), &w), &t) in self.coords.iter().zip(&self.wide).zip(&self.target) {
            let (fx, fy) = lens.back_project(xp, yp, w, dx, dy, wide_mode);
            let d = t - reference.sample(fx, fy);
            acc += d * d;
            if acc >= limit {
                return None;
            }
        }
        Some(acc)
    }

    fn scan(&self, lens: &LensModel, reference: &InterpolatedRef, wide_mode: bool, candidates: &[MotionVector]) -> BlockMatch {
        let mut best = BlockMatch {
            mv: MotionVector::ZERO,
            energy: f64::INFINITY,
        };
        for &mv in candidates {
            if let Some(e) = self.energy_below(lens, reference, mv, wide_mode, best.energy) {
                best = BlockMatch { mv, energy: e };
                if e == 0.0 {
                    break;
                }
            }
        }
        best
    }
}

/// Exhaustive search over perspective-domain displacements.
///
/// Returns `None` (not applicable) when the block leaves the image circle.
pub fn search_fisheye(
    cur: &Frame,
    reference: &InterpolatedRef,
    block: &Block,
    cfg: &SearchConfig,
    lens: &LensModel,
    wide_mode: bool,
) -> Option<BlockMatch> {
    let fb = FisheyeBlock::new(lens, cur, block)?;
    Some(fb.scan(lens, reference, wide_mode, &candidate_order(cfg.search_range)))
}

/// Estimate a motion field for `cur` predicted from `reference`.
pub fn estimate(
    cur: &Frame,
    reference: &Frame,
    cfg: &SearchConfig,
    profile: Option<&CalibrationProfile>,
) -> Result<MotionField> {
    estimate_with(cur, reference, cfg, profile, Parallelism::default())
}

pub fn estimate_with(
    cur: &Frame,
    reference: &Frame,
    cfg: &SearchConfig,
    profile: Option<&CalibrationProfile>,
    mode: Parallelism,
) -> Result<MotionField> {
    if !cur.same_dimensions(reference) {
        return Err(Error::Usage(format!(
            "current frame is {}x{}, reference is {}x{}",
            cur.width(),
            cur.height(),
            reference.width(),
            reference.height()
        )));
    }
    let lens = cfg.method.lens(profile)?;
    let interp = InterpolatedRef::new(reference.clone());
    let candidates = candidate_order(cfg.search_range);
    let grid = block_grid(cur.width(), cur.height(), cfg.block_size);
    let method = cfg.method;
    let wide_mode = method.wide_mode();

    let blocks = par::map(&grid, mode, |block| {
        let fisheye = lens.as_ref().and_then(|lens| {
            FisheyeBlock::new(lens, cur, block).map(|fb| fb.scan(lens, &interp, wide_mode, &candidates))
        });
        // pure fisheye methods fall back to translation outside the image circle
        let traditional = (lens.is_none() || method.is_hybrid() || fisheye.is_none())
            .then(|| traditional_scan(cur, reference, block, &candidates));
        combine(*block, traditional, fisheye)
    });

    Ok(MotionField {
        width: cur.width(),
        height: cur.height(),
        block_size: cfg.block_size,
        method,
        blocks,
    })
}

fn combine(block: Block, traditional: Option<BlockMatch>, fisheye: Option<BlockMatch>) -> BlockMotion {
    let (mv, chosen) = match (traditional, fisheye) {
        (Some(t), Some(f)) if t.energy < f.energy => (t.mv, Decision::Traditional),
        (Some(t), Some(f)) if t.energy > f.energy => (f.mv, Decision::Fisheye),
        (Some(_), Some(f)) => (f.mv, Decision::Equal),
        (Some(t), None) => (t.mv, Decision::Traditional),
        (None, Some(f)) => (f.mv, Decision::Fisheye),
        (None, None) => unreachable!("every block runs at least one search"),
    };
    BlockMotion {
        block,
        mv,
        chosen,
        ssd_traditional: traditional.map(|t| t.energy),
        ssd_fisheye: fisheye.map(|f| f.energy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, seed: u32) -> Frame {
        Frame::from_fn(w, h, |x, y| {
            let v = (x as u32 * 7919 + y as u32 * 104729 + seed * 31337).wrapping_mul(2654435761);
            (v >> 24) as u8
        })
    }

    fn shifted(src: &Frame, dx: isize, dy: isize) -> Frame {
        // cur(x, y) = ref(x + dx, y + dy), clamped
        Frame::from_fn(src.width(), src.height(), |x, y| {
            src.get_clamped(x as isize + dx, y as isize + dy)
        })
    }

    #[test]
    fn ssd_examples() {
        assert_eq!(ssd(&[0, 0, 0, 0], &[1, 2, 3, 4]).unwrap(), 30.0);
        assert_eq!(ssd(&[9; 16], &[9; 16]).unwrap(), 0.0);
        assert!(ssd(&[0; 4], &[0; 5]).is_err());
        let big = ssd(&[0; 64 * 64], &[255; 64 * 64]).unwrap();
        assert_eq!(big, 64.0 * 64.0 * 255.0 * 255.0);
    }

    #[test]
    fn candidate_order_ties() {
        let c = candidate_order(2);
        assert_eq!(c.len(), 25);
        assert_eq!(c[0], MotionVector::ZERO);
        assert_eq!(&c[1..5], &[
            MotionVector::new(0, -1),
            MotionVector::new(-1, 0),
            MotionVector::new(1, 0),
            MotionVector::new(0, 1),
        ]);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::new(12, 4, Method::Tme).is_err());
        assert!(SearchConfig::new(16, 0, Method::Tme).is_err());
        assert!(SearchConfig::new(64, 1, Method::ChmePlus).is_ok());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("hme+".parse::<Method>().is_err());
    }

    #[test]
    fn recovers_global_shift() {
        let reference = textured(64, 64, 1);
        let cur = shifted(&reference, 3, -2);
        let cfg = SearchConfig::new(8, 8, Method::Tme).unwrap();
        let field = estimate(&cur, &reference, &cfg, None).unwrap();
        for b in &field.blocks {
            let interior = b.block.x >= 8 && b.block.x + 16 <= 64 && b.block.y >= 8 && b.block.y + 16 <= 64;
            if interior {
                assert_eq!(b.mv, MotionVector::new(3, -2));
                assert_eq!(b.energy(), 0.0);
            }
        }
    }

    #[test]
    fn identical_frames_give_zero_field() {
        let f = textured(40, 24, 3);
        let cfg = SearchConfig::new(8, 3, Method::Tme).unwrap();
        let field = estimate(&f, &f, &cfg, None).unwrap();
        assert_eq!(field.blocks.len(), 5 * 3);
        assert!(field.blocks.iter().all(|b| b.mv == MotionVector::ZERO && b.energy() == 0.0));
    }

    #[test]
    fn energy_never_exceeds_zero_candidate() {
        let a = textured(48, 48, 5);
        let b = textured(48, 48, 6);
        let cfg = SearchConfig::new(16, 4, Method::Tme).unwrap();
        for block in block_grid(48, 48, 16) {
            let m = search_traditional(&a, &b, &block, &cfg);
            let zero = shifted_ssd(&a, &b, &block, MotionVector::ZERO, u64::MAX).unwrap();
            assert!(m.energy <= zero as f64);
        }
    }

    #[test]
    fn clipped_edge_blocks() {
        let grid = block_grid(20, 10, 8);
        assert_eq!(grid.len(), 3 * 2);
        assert_eq!(grid[2], Block { x: 16, y: 0, width: 4, height: 8 });
        assert_eq!(grid[5], Block { x: 16, y: 8, width: 4, height: 2 });
    }

    #[test]
    fn calibrated_methods_need_a_profile() {
        let f = textured(16, 16, 0);
        let cfg = SearchConfig::new(8, 2, Method::ChmePlus).unwrap();
        let err = estimate(&f, &f, &cfg, None).unwrap_err();
        assert!(err.is_usage());
        let mismatched = textured(16, 8, 0);
        assert!(estimate(&f, &mismatched, &cfg.with_method(Method::Tme), None).is_err());
    }

    #[test]
    fn fisheye_zero_motion_is_exact_at_integer_positions() {
        let profile = make_equisolid(30.0, (31.5, 31.5), 180.0).unwrap();
        let lens = LensModel::new(profile.clone());
        let f = textured(64, 64, 2);
        let cfg = SearchConfig::new(8, 2, Method::Eme).unwrap();
        let interp = InterpolatedRef::new(f.clone());
        let block = Block { x: 24, y: 24, width: 8, height: 8 };
        let m = search_fisheye(&f, &interp, &block, &cfg, &lens, false).unwrap();
        assert_eq!(m.mv, MotionVector::ZERO);
        assert!(m.energy < 1e-12, "{}", m.energy);
        // block corner outside the circle
        let corner = Block { x: 0, y: 0, width: 8, height: 8 };
        assert!(search_fisheye(&f, &interp, &corner, &cfg, &lens, false).is_none());
    }
}
