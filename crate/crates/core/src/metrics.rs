//! Luminance PSNR inside the round fisheye region, and sequence reports.

use std::fmt::Write as _;

use crate::compensate::compensate_frame_with;
use crate::frame::Frame;
use crate::par::Parallelism;
use crate::projection::CalibrationProfile;
use crate::search::{block_grid, estimate_with, Block, Method, SearchConfig};
use crate::{Error, Result};

/// Peak value of 8-bit luma, squared.
const PEAK2: f64 = 255.0 * 255.0;

/// Per-pixel inclusion mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn full(width: usize, height: usize) -> Self {
        RegionMask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    /// Pixels within `p(theta_max)` of the calibrated center.
    pub fn round(width: usize, height: usize, profile: &CalibrationProfile) -> Self {
        let (cx, cy) = profile.center();
        let radius = profile.valid_radius();
        Self::from_fn(width, height, |x, y| {
            (x as f64 - cx).hypot(y as f64 - cy) <= radius
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        RegionMask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Keep only pixels that fall inside one of `blocks`.
    pub fn restrict_to(&self, blocks: &[Block]) -> Self {
        let mut keep = vec![false; self.bits.len()];
        for b in blocks {
            for (x, y) in b.pixels() {
                keep[y * self.width + x] = true;
            }
        }
        let bits = self.bits.iter().zip(keep).map(|(&a, k)| a && k).collect();
        RegionMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }
}

/// Blocks inside the round region that contain pixels seen at incident angles
/// beyond 90°, i.e. that reach past `p(π/2)`.
pub fn rim_blocks(width: usize, height: usize, block_size: usize, profile: &CalibrationProfile) -> Vec<Block> {
    let (cx, cy) = profile.center();
    let r_pi = profile.right_angle_radius();
    let r_max = profile.valid_radius();
    block_grid(width, height, block_size)
        .into_iter()
        .filter(|b| {
            b.pixels().any(|(x, y)| {
                let r = (x as f64 - cx).hypot(y as f64 - cy);
                r > r_pi && r <= r_max
            })
        })
        .collect()
}

/// Mean squared error over the masked pixels.
pub fn mse_round(a: &Frame, b: &Frame, mask: &RegionMask) -> Result<f64> {
    if !a.same_dimensions(b) || a.width() != mask.width || a.height() != mask.height {
        return Err(Error::Usage(format!(
            "PSNR of {}x{} and {}x{} frames with a {}x{} mask",
            a.width(),
            a.height(),
            b.width(),
            b.height(),
            mask.width,
            mask.height
        )));
    }
    let mut sum = 0u64;
    let mut n = 0u64;
    for ((&x, &y), &m) in a.luma().iter().zip(b.luma()).zip(&mask.bits) {
        if m {
            let d = x as i64 - y as i64;
            sum += (d * d) as u64;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Usage("PSNR mask selects no pixels".into()));
    }
    Ok(sum as f64 / n as f64)
}

/// `10·log10(255² / MSE)` over the masked pixels; `+∞` for identical content.
pub fn psnr_round(a: &Frame, b: &Frame, mask: &RegionMask) -> Result<f64> {
    let mse = mse_round(a, b, mask)?;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK2 / mse).log10()
    }
}

/// Decibel value with `inf` for the infinite case.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

/// What to run over a sequence.
#[derive(Debug, Clone)]
pub struct EvaluationPlan {
    pub sequence: String,
    /// Frame label as printed, e.g. `31-50`.
    pub frames: String,
    pub methods: Vec<Method>,
    pub block_sizes: Vec<usize>,
    pub search_range: i32,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub sequence: String,
    pub frames: String,
    pub method: Method,
    pub block_size: usize,
    pub search_range: i32,
    /// One entry per predicted frame.
    pub frame_psnr: Vec<f64>,
    pub mean_psnr_db: f64,
    /// `None` when TME is absent from the run or either mean is infinite.
    pub delta_vs_tme_db: Option<f64>,
}

impl ReportRow {
    /// Set when the mean is infinite because some frame was predicted exactly.
    pub fn has_infinite_frame(&self) -> bool {
        self.frame_psnr.iter().any(|p| p.is_infinite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub rows: Vec<ReportRow>,
}

pub const REPORT_COLUMNS: [&str; 7] = [
    "sequence",
    "frames",
    "method",
    "block_size",
    "search_range",
    "mean_psnr_db",
    "delta_vs_tme_db",
];

impl SequenceReport {
    pub fn row(&self, method: Method, block_size: usize) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.block_size == block_size)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.sequence.clone(),
                r.frames.clone(),
                r.method.to_string(),
                r.block_size.to_string(),
                r.search_range.to_string(),
                format_db(r.mean_psnr_db),
                r.delta_vs_tme_db.map_or_else(|| "n/a".to_string(), format_db),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Column-aligned table for terminals.
    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                let mut mean = format_db(r.mean_psnr_db);
                if r.has_infinite_frame() {
                    mean.push('*');
                }
                [
                    r.sequence.clone(),
                    r.frames.clone(),
                    r.method.to_string(),
                    r.block_size.to_string(),
                    r.search_range.to_string(),
                    mean,
                    r.delta_vs_tme_db.map_or_else(|| "n/a".to_string(), format_db),
                ]
            })
            .collect();
        let mut widths = REPORT_COLUMNS.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = String::new();
        let header = REPORT_COLUMNS.map(String::from);
        for row in std::iter::once(&header).chain(&cells) {
            let line: Vec<String> = row
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(s, "{}", line.join("  ").trim_end());
        }
        if self.rows.iter().any(ReportRow::has_infinite_frame) {
            s.push_str("* mean includes frames predicted exactly (infinite PSNR)\n");
        }
        s
    }
}

/// Predict every frame from its predecessor with each method and block size,
/// and average the round-region PSNR over the predicted frames.
pub fn evaluate_sequence(
    frames: &[Frame],
    plan: &EvaluationPlan,
    profile: Option<&CalibrationProfile>,
) -> Result<SequenceReport> {
    if frames.len() < 2 {
        return Err(Error::Usage(format!(
            "evaluation needs at least two frames, got {}",
            frames.len()
        )));
    }
    if plan.methods.is_empty() || plan.block_sizes.is_empty() {
        return Err(Error::Usage("evaluation needs at least one method and block size".into()));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if let Some(i) = frames.iter().position(|f| f.width() != w || f.height() != h) {
        return Err(Error::Usage(format!("frame {i} differs in size from the first frame")));
    }
    let mask = match profile {
        Some(p) => RegionMask::round(w, h, p),
        None => RegionMask::full(w, h),
    };

    let mut rows = Vec::new();
    for &block_size in &plan.block_sizes {
        let mut group = Vec::new();
        for &method in &plan.methods {
            let cfg = SearchConfig::new(block_size, plan.search_range, method)?;
            let mut frame_psnr = Vec::with_capacity(frames.len() - 1);
            for pair in frames.windows(2) {
                let (reference, cur) = (&pair[0], &pair[1]);
                let field = estimate_with(cur, reference, &cfg, profile, plan.parallelism)?;
                let (pred, _) = compensate_frame_with(reference, &field, &cfg, profile, plan.parallelism)?;
                frame_psnr.push(psnr_round(cur, &pred, &mask)?);
            }
            let mean_psnr_db = frame_psnr.iter().sum::<f64>() / frame_psnr.len() as f64;
            group.push(ReportRow {
                sequence: plan.sequence.clone(),
                frames: plan.frames.clone(),
                method,
                block_size,
                search_range: plan.search_range,
                frame_psnr,
                mean_psnr_db,
                delta_vs_tme_db: None,
            });
        }
        let tme = group
            .iter()
            .find(|r| r.method == Method::Tme)
            .map(|r| r.mean_psnr_db);
        for row in &mut group {
            row.delta_vs_tme_db = tme
                .filter(|t| t.is_finite() && row.mean_psnr_db.is_finite())
                .map(|t| row.mean_psnr_db - t);
        }
        rows.extend(group);
    }
    Ok(SequenceReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::make_equisolid;

    #[test]
    fn identical_frames_are_infinite() {
        let a = Frame::filled(8, 8, 77);
        assert_eq!(psnr_round(&a, &a, &RegionMask::full(8, 8)).unwrap(), f64::INFINITY);
        assert_eq!(format_db(f64::INFINITY), "inf");
    }

    #[test]
    fn constant_offset_closed_form() {
        let a = Frame::filled(10, 7, 120);
        let b = Frame::filled(10, 7, 136);
        let p = psnr_round(&a, &b, &RegionMask::full(10, 7)).unwrap();
        let closed = 10.0 * (65025.0f64 / 256.0).log10();
        assert!((p - closed).abs() < 1e-12, "{p}");
        assert!((p - 24.0484).abs() < 1e-4, "{p}");
    }

    #[test]
    fn empty_mask_and_size_mismatch() {
        let a = Frame::filled(4, 4, 0);
        let none = RegionMask::from_fn(4, 4, |_, _| false);
        assert!(psnr_round(&a, &a, &none).is_err());
        let b = Frame::filled(4, 5, 0);
        assert!(psnr_round(&a, &b, &RegionMask::full(4, 4)).unwrap_err().is_usage());
    }

    #[test]
    fn round_mask_excludes_outside() {
        let p = make_equisolid(8.0, (15.0, 15.0), 180.0).unwrap();
        let m = RegionMask::round(31, 31, &p);
        let r = p.valid_radius();
        for y in 0..31 {
            for x in 0..31 {
                let d = (x as f64 - 15.0).hypot(y as f64 - 15.0);
                if d > r + 0.5 {
                    assert!(!m.get(x, y));
                }
            }
        }
        assert!(m.get(15, 15));
        assert!(!m.get(0, 0));
    }

    #[test]
    fn static_sequence_report() {
        let f = Frame::from_fn(32, 32, |x, y| (x * 5 + y * 3) as u8);
        let frames = vec![f.clone(), f.clone(), f];
        let plan = EvaluationPlan {
            sequence: "static".into(),
            frames: "1-3".into(),
            methods: vec![Method::Tme, Method::Hme],
            block_sizes: vec![16],
            search_range: 2,
            parallelism: Parallelism::Sequential,
        };
        let profile = make_equisolid(11.0, (15.5, 15.5), 180.0).unwrap();
        let report = evaluate_sequence(&frames, &plan, Some(&profile)).unwrap();
        assert_eq!(report.rows.len(), 2);
        for r in &report.rows {
            assert!(r.mean_psnr_db.is_infinite());
            assert_eq!(r.delta_vs_tme_db, None);
        }
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "static,1-3,tme,16,2,inf,n/a");
        assert_eq!(lines.next().unwrap(), "static,1-3,hme,16,2,inf,n/a");
        assert!(lines.next().is_none());
        assert!(report.to_text().contains("inf*"));
    }

    #[test]
    fn too_few_frames() {
        let plan = EvaluationPlan {
            sequence: "s".into(),
            frames: "1-1".into(),
            methods: vec![Method::Tme],
            block_sizes: vec![8],
            search_range: 1,
            parallelism: Parallelism::Sequential,
        };
        assert!(evaluate_sequence(&[Frame::filled(8, 8, 0)], &plan, None).is_err());
    }
}
