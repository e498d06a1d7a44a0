use serde::{Deserialize, Serialize};

use super::{block_grid, Block, Method, MotionVector};
use crate::{Error, Result};

/// Which matching path supplied a block's prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Traditional,
    Fisheye,
    /// Both paths reached the same SSD; the fisheye prediction is used.
    Equal,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Traditional => "traditional",
            Decision::Fisheye => "fisheye",
            Decision::Equal => "equal",
        }
    }

    /// Whether the prediction is sampled through the lens model.
    pub fn uses_fisheye(self) -> bool {
        !matches!(self, Decision::Traditional)
    }
}

/// Motion estimation result for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMotion {
    pub block: Block,
    pub mv: MotionVector,
    pub chosen: Decision,
    pub ssd_traditional: Option<f64>,
    pub ssd_fisheye: Option<f64>,
}

impl BlockMotion {
    /// SSD of the prediction actually used.
    pub fn energy(&self) -> f64 {
        let e = match self.chosen {
            Decision::Traditional => self.ssd_traditional,
            Decision::Fisheye | Decision::Equal => self.ssd_fisheye,
        };
        e.expect("chosen path always carries an energy")
    }
}

/// Per-block motion vectors for a frame, in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    pub width: usize,
    pub height: usize,
    pub block_size: usize,
    pub method: Method,
    pub blocks: Vec<BlockMotion>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldEntry {
    x: usize,
    y: usize,
    dx: i32,
    dy: i32,
    method: Decision,
    ssd_t: Option<f64>,
    ssd_f: Option<f64>,
}

impl MotionField {
    pub fn total_energy(&self) -> f64 {
        self.blocks.iter().map(BlockMotion::energy).sum()
    }

    pub fn count(&self, decision: Decision) -> usize {
        self.blocks.iter().filter(|b| b.chosen == decision).count()
    }

    /// JSON array of `{x, y, dx, dy, method, ssd_t, ssd_f}` records.
    pub fn to_json(&self) -> String {
        let entries: Vec<FieldEntry> = self
            .blocks
            .iter()
            .map(|b| FieldEntry {
                x: b.block.x,
                y: b.block.y,
                dx: b.mv.dx,
                dy: b.mv.dy,
                method: b.chosen,
                ssd_t: b.ssd_traditional,
                ssd_f: b.ssd_fisheye,
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&entries).expect("field serializes");
        s.push('\n');
        s
    }

    /// Rebuild a field from its JSON export. The frame geometry and block size
    /// are not part of the export and must be supplied.
    pub fn from_json(
        json: &str,
        width: usize,
        height: usize,
        block_size: usize,
        method: Method,
    ) -> Result<Self> {
        let entries: Vec<FieldEntry> = serde_json::from_str(json)
            .map_err(|e| Error::Usage(format!("motion field JSON: {e}")))?;
        let grid = block_grid(width, height, block_size);
        if grid.len() != entries.len() {
            return Err(Error::Usage(format!(
                "motion field has {} blocks, a {width}x{height} frame with block size {block_size} has {}",
                entries.len(),
                grid.len()
            )));
        }
        let mut blocks = Vec::with_capacity(grid.len());
        for (i, (block, e)) in grid.into_iter().zip(entries).enumerate() {
            if e.x != block.x || e.y != block.y {
                return Err(Error::Usage(format!(
                    "motion field entry {i} at ({}, {}) expected at ({}, {})",
                    e.x, e.y, block.x, block.y
                )));
            }
            let needed = match e.method {
                Decision::Traditional => e.ssd_t,
                _ => e.ssd_f,
            };
            if needed.is_none() {
                return Err(Error::Usage(format!(
                    "motion field entry {i} lacks the energy of its chosen path"
                )));
            }
            blocks.push(BlockMotion {
                block,
                mv: MotionVector::new(e.dx, e.dy),
                chosen: e.method,
                ssd_traditional: e.ssd_t,
                ssd_fisheye: e.ssd_f,
            });
        }
        Ok(MotionField {
            width,
            height,
            block_size,
            method,
            blocks,
        })
    }
}
