//! Multi-scale per-part response maps and their binary container.
//!
//! Container layout (all integers little endian):
//!
//! ```text
//! b"SWRS" | u32 header_len | header JSON (header_len bytes) | f32 data
//! ```
//!
//! The data section holds, for each level in order, the `parts` part maps
//! followed by the background map, each `width * height` values row-major.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point2;

pub const STACK_MAGIC: &[u8; 4] = b"SWRS";
pub const STACK_FORMAT_VERSION: u32 = 1;

/// Log-ratio returned for lookups outside the maps.
pub const OUTSIDE_LOG_RATIO: f64 = -6.907_755_278_982_137; // ln(1e-3)

/// Geometric image pyramid: level `l` is tuned to objects
/// `base_height_px * factor^l` pixels tall and sampled every
/// `base_cell_px * factor^l` image pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PyramidSpec {
    pub base_height_px: f64,
    pub factor: f64,
    pub levels: usize,
    pub base_cell_px: f64,
}

impl Default for PyramidSpec {
    fn default() -> Self {
        // 50 * 1.2^12 > 400 px.
        Self {
            base_height_px: 50.0,
            factor: 1.2,
            levels: 13,
            base_cell_px: 2.0,
        }
    }
}

impl PyramidSpec {
    pub fn scale(&self, level: usize) -> f64 {
        self.factor.powi(level as i32)
    }

    pub fn cell(&self, level: usize) -> f64 {
        self.base_cell_px * self.scale(level)
    }

    /// Level whose tuned object height is closest (in log scale) to `height_px`.
    pub fn level_for_height(&self, height_px: f64) -> usize {
        if !(height_px > 0.0) {
            return 0;
        }
        let l = ((height_px / self.base_height_px).ln() / self.factor.ln()).round();
        (l.max(0.0) as usize).min(self.levels - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub scale: f64,
    pub cell: f64,
    pub width: usize,
    pub height: usize,
}

/// One pyramid level: `parts` score maps followed by the background map.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleLevel {
    pub info: LevelInfo,
    pub data: Vec<f32>,
}

impl ScaleLevel {
    pub fn new(info: LevelInfo, maps: usize, fill: f32) -> Self {
        let n = info.width * info.height * maps;
        Self {
            info,
            data: vec![fill; n],
        }
    }

    fn map_len(&self) -> usize {
        self.info.width * self.info.height
    }

    pub fn map(&self, index: usize) -> &[f32] {
        let n = self.map_len();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn map_mut(&mut self, index: usize) -> &mut [f32] {
        let n = self.map_len();
        &mut self.data[index * n..(index + 1) * n]
    }

    /// Bilinear lookup in map coordinates; `None` outside the sampled grid.
    pub fn bilinear(&self, index: usize, x: f64, y: f64) -> Option<f64> {
        let (w, h) = (self.info.width, self.info.height);
        if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
            return None;
        }
        let map = self.map(index);
        let x0 = (x.floor() as usize).min(w - 1);
        let y0 = (y.floor() as usize).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let at = |xx: usize, yy: usize| map[yy * w + xx] as f64;
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StackHeader {
    format_version: u32,
    parts: usize,
    image_width: u32,
    image_height: u32,
    pyramid: PyramidSpec,
    levels: Vec<LevelInfo>,
}

/// Per-part, per-scale score maps plus a strictly positive background map.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseStack {
    pub parts: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub pyramid: PyramidSpec,
    pub levels: Vec<ScaleLevel>,
}

impl ResponseStack {
    /// Allocates a stack with every part map at `part_fill` and every
    /// background map at `background`.
    pub fn new(
        parts: usize,
        image_width: u32,
        image_height: u32,
        pyramid: PyramidSpec,
        part_fill: f32,
        background: f32,
    ) -> Self {
        let levels = (0..pyramid.levels)
            .map(|l| {
                let cell = pyramid.cell(l);
                let info = LevelInfo {
                    scale: pyramid.scale(l),
                    cell,
                    width: ((image_width.max(1) - 1) as f64 / cell).ceil() as usize + 1,
                    height: ((image_height.max(1) - 1) as f64 / cell).ceil() as usize + 1,
                };
                let mut level = ScaleLevel::new(info, parts + 1, part_fill);
                level.map_mut(parts).fill(background);
                level
            })
            .collect();
        Self {
            parts,
            image_width,
            image_height,
            pyramid,
            levels,
        }
    }

    pub fn level(&self, level: usize) -> Result<&ScaleLevel> {
        self.levels.get(level).ok_or(Error::InvalidScale(level))
    }

    pub fn level_for_height(&self, height_px: f64) -> usize {
        self.pyramid.level_for_height(height_px)
    }

    /// `ln(S_j / S_b)` at image pixel `x` on `level`, bilinearly
    /// interpolated; pixels outside the maps give [`OUTSIDE_LOG_RATIO`].
    pub fn part_evidence(&self, level: usize, part: usize, x: &Point2) -> Result<f64> {
        let lv = self.level(level)?;
        if part >= self.parts {
            return Err(Error::Params(format!("part {part} out of range")));
        }
        let (mx, my) = (x.x / lv.info.cell, x.y / lv.info.cell);
        match (lv.bilinear(part, mx, my), lv.bilinear(self.parts, mx, my)) {
            (Some(s), Some(b)) => Ok((s / b).ln()),
            _ => Ok(OUTSIDE_LOG_RATIO),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (l, lv) in self.levels.iter().enumerate() {
            if lv.data.len() != lv.info.width * lv.info.height * (self.parts + 1) {
                return Err(Error::Schema(format!("level {l} has inconsistent size")));
            }
            if lv.map(self.parts).iter().any(|&b| !(b > 0.0)) {
                return Err(Error::Schema(format!("level {l} background is not strictly positive")));
            }
            if lv.data.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Schema(format!("level {l} has negative or non-finite scores")));
            }
        }
        Ok(())
    }

    fn header(&self) -> StackHeader {
        StackHeader {
            format_version: STACK_FORMAT_VERSION,
            parts: self.parts,
            image_width: self.image_width,
            image_height: self.image_height,
            pyramid: self.pyramid,
            levels: self.levels.iter().map(|l| l.info.clone()).collect(),
        }
    }

    /// Number of f32 values in the data section.
    pub fn value_count(&self) -> usize {
        self.levels.iter().map(|l| l.data.len()).sum()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header())?;
        w.write_all(STACK_MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.value_count() * 4);
        for lv in &self.levels {
            for v in &lv.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != STACK_MAGIC {
            return Err(Error::Schema("not a response stack container".into()));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = bytes
            .get(8..8 + header_len)
            .ok_or_else(|| Error::Schema("truncated header".into()))?;
        let header: StackHeader =
            serde_json::from_slice(body).map_err(|e| Error::Schema(format!("bad stack header: {e}")))?;
        if header.format_version != STACK_FORMAT_VERSION {
            return Err(Error::Version {
                found: header.format_version,
                expected: STACK_FORMAT_VERSION,
            });
        }
        if header.levels.len() != header.pyramid.levels {
            return Err(Error::Schema("level count disagrees with pyramid".into()));
        }
        let maps = header.parts + 1;
        let expected: usize = header.levels.iter().map(|l| l.width * l.height * maps).sum();
        let data = &bytes[8 + header_len..];
        if data.len() != expected * 4 {
            return Err(Error::Schema(format!(
                "data section has {} bytes, header declares {}",
                data.len(),
                expected * 4
            )));
        }
        let mut offset = 0;
        let mut levels = Vec::with_capacity(header.levels.len());
        for info in header.levels {
            let n = info.width * info.height * maps;
            let values = data[offset..offset + n * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            offset += n * 4;
            levels.push(ScaleLevel { info, data: values });
        }
        let stack = Self {
            parts: header.parts,
            image_width: header.image_width,
            image_height: header.image_height,
            pyramid: header.pyramid,
            levels,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
