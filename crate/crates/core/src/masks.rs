//! Occluder mask catalog and part-level occlusion states.
//!
//! Masks are binary grids over an object's normalized 2D bounding box
//! (`u` rightward, `v` downward, both in `[0, 1]`). The catalog is generated
//! by sliding boxes of several shapes across the grid; mask 0 is the empty
//! mask.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox2, Camera, PlacedObject};
use crate::Point2;

/// Mask grid resolution along each axis.
pub const GRID: usize = 32;
/// Masks covering this fraction or more of the grid are discarded.
pub const MAX_COVERAGE: f64 = 0.9;

/// Occlusion state of one part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartState {
    Visible,
    SelfOccluded,
    /// Hidden by an occluder: a mask for hypotheses, another object or an
    /// unmodeled occluder for ground truth.
    MaskOccluded,
}

impl PartState {
    /// The visibility indicator: 1 for visible parts, 0 otherwise.
    pub fn indicator(self) -> u8 {
        u8::from(self == PartState::Visible)
    }
}

/// How a box is positioned along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Flush with the low edge (left or top).
    Start,
    /// Flush with the high edge (right or bottom).
    End,
    /// Both flush positions.
    Edges,
    /// Every multiple of the stride that keeps the box inside the grid.
    Slide(f64),
}

impl Placement {
    fn offsets(self, size: f64) -> Vec<f64> {
        const SLACK: f64 = 1e-9;
        match self {
            Placement::Start => vec![0.0],
            Placement::End => vec![1.0 - size],
            Placement::Edges => vec![0.0, 1.0 - size],
            Placement::Slide(stride) => {
                let mut out = Vec::new();
                let mut k = 0u32;
                loop {
                    let pos = k as f64 * stride;
                    if pos + size > 1.0 + SLACK {
                        break;
                    }
                    out.push(pos);
                    k += 1;
                }
                out
            }
        }
    }
}

/// One generator box shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub label: String,
    pub width: f64,
    pub height: f64,
    pub x: Placement,
    pub y: Placement,
}

impl BoxSpec {
    pub fn new(label: &str, width: f64, height: f64, x: Placement, y: Placement) -> Self {
        Self {
            label: label.into(),
            width,
            height,
            x,
            y,
        }
    }
}

/// Generator parameters for a mask catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    pub boxes: Vec<BoxSpec>,
}

impl Default for MaskParams {
    /// Frozen defaults yielding 288 distinct non-empty masks.
    fn default() -> Self {
        use Placement::*;
        let mut boxes = Vec::new();
        // Truncation and side occlusion: full-height strips flush left or right.
        for k in 2..=13 {
            let w = k as f64 / 16.0;
            boxes.push(BoxSpec::new("side_strip", w, 1.0, Edges, Start));
        }
        // Occlusion of the lower body across the full width.
        for k in 2..=12 {
            boxes.push(BoxSpec::new("bottom_band", 1.0, k as f64 / 16.0, Start, End));
        }
        // Lower parts hidden from one side.
        for w in [0.25, 0.375, 0.5, 0.625, 0.75] {
            for h in [0.25, 0.375, 0.5, 0.625, 0.75] {
                boxes.push(BoxSpec::new("lower_corner", w, h, Edges, End));
            }
        }
        // Posts and trees: narrow full-height pillars anywhere along the body.
        for w in [0.125, 0.1875, 0.25, 0.3125] {
            boxes.push(BoxSpec::new("pillar", w, 1.0, Slide(0.0625), Start));
        }
        // Waist-high pillars such as hydrants or low posts.
        for w in [0.125, 0.1875] {
            boxes.push(BoxSpec::new("short_pillar", w, 0.75, Slide(0.0625), End));
        }
        // Low obstacles in the middle of the lower body.
        for w in [0.25, 0.375, 0.5, 0.625] {
            for h in [0.25, 0.375, 0.5, 0.625] {
                boxes.push(BoxSpec::new("low_block", w, h, Slide(0.0625), End));
            }
        }
        Self { boxes }
    }
}

/// A binary coverage grid, row-major with rows along `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskRecord", into = "MaskRecord")]
pub struct OcclusionMask {
    pub id: usize,
    pub grid: Vec<bool>,
    pub coverage_fraction: f64,
}

#[derive(Serialize, Deserialize)]
struct MaskRecord {
    id: usize,
    coverage_fraction: f64,
    rows: Vec<String>,
}

impl From<OcclusionMask> for MaskRecord {
    fn from(m: OcclusionMask) -> Self {
        let rows = m
            .grid
            .chunks(GRID)
            .map(|row| row.iter().map(|&c| if c { '1' } else { '0' }).collect())
            .collect();
        MaskRecord {
            id: m.id,
            coverage_fraction: m.coverage_fraction,
            rows,
        }
    }
}

impl TryFrom<MaskRecord> for OcclusionMask {
    type Error = String;

    fn try_from(r: MaskRecord) -> std::result::Result<Self, String> {
        if r.rows.len() != GRID || r.rows.iter().any(|row| row.len() != GRID) {
            return Err(format!("mask {} is not a {GRID}x{GRID} grid", r.id));
        }
        let mut grid = Vec::with_capacity(GRID * GRID);
        for row in &r.rows {
            for ch in row.chars() {
                match ch {
                    '0' => grid.push(false),
                    '1' => grid.push(true),
                    other => return Err(format!("invalid mask cell {other:?}")),
                }
            }
        }
        let mask = OcclusionMask::from_grid(r.id, grid);
        if mask.coverage_fraction != r.coverage_fraction {
            return Err(format!("mask {} coverage does not match its grid", r.id));
        }
        Ok(mask)
    }
}

impl OcclusionMask {
    pub fn from_grid(id: usize, grid: Vec<bool>) -> Self {
        let covered = grid.iter().filter(|&&c| c).count();
        Self {
            id,
            coverage_fraction: covered as f64 / grid.len() as f64,
            grid,
        }
    }

    pub fn empty() -> Self {
        Self::from_grid(0, vec![false; GRID * GRID])
    }

    /// Rasterizes a box: a cell is covered when its center lies in the box.
    pub fn from_box(id: usize, x0: f64, y0: f64, w: f64, h: f64) -> Self {
        const SLACK: f64 = 1e-9;
        let mut grid = vec![false; GRID * GRID];
        for row in 0..GRID {
            let cv = (row as f64 + 0.5) / GRID as f64;
            if cv < y0 - SLACK || cv > y0 + h + SLACK {
                continue;
            }
            for col in 0..GRID {
                let cu = (col as f64 + 0.5) / GRID as f64;
                if cu >= x0 - SLACK && cu <= x0 + w + SLACK {
                    grid[row * GRID + col] = true;
                }
            }
        }
        Self::from_grid(id, grid)
    }

    pub fn covers(&self, cell: usize) -> bool {
        self.grid[cell]
    }
}

/// The ordered set of masks; ids are contiguous from 0 and mask 0 is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskCatalog {
    pub masks: Vec<OcclusionMask>,
    pub generator_params: MaskParams,
}

impl MaskCatalog {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&OcclusionMask> {
        self.masks.get(id)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .masks
            .first()
            .ok_or_else(|| Error::Schema("empty mask catalog".into()))?;
        if first.coverage_fraction != 0.0 {
            return Err(Error::Schema("mask 0 must be empty".into()));
        }
        for (i, m) in self.masks.iter().enumerate() {
            if m.id != i {
                return Err(Error::Schema(format!("mask ids are not contiguous at {i}")));
            }
            if i > 0 && !(m.coverage_fraction > 0.0 && m.coverage_fraction < MAX_COVERAGE) {
                return Err(Error::Schema(format!("mask {i} has coverage {}", m.coverage_fraction)));
            }
        }
        Ok(())
    }
}

/// Generates the catalog by sliding every box spec across the grid,
/// dropping empty, near-total and duplicate grids.
pub fn generate_mask_catalog(params: &MaskParams) -> Result<MaskCatalog> {
    let mut masks = vec![OcclusionMask::empty()];
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    seen.insert(masks[0].grid.clone());
    for spec in &params.boxes {
        if !(spec.width > 0.0 && spec.width <= 1.0 && spec.height > 0.0 && spec.height <= 1.0) {
            return Err(Error::Params(format!("box {:?} has an invalid size", spec.label)));
        }
        let bad_stride = |p: Placement| matches!(p, Placement::Slide(s) if s <= 0.0 || !s.is_finite());
        if bad_stride(spec.x) || bad_stride(spec.y) {
            return Err(Error::Params(format!("box {:?} has a nonpositive stride", spec.label)));
        }
        for y0 in spec.y.offsets(spec.height) {
            for x0 in spec.x.offsets(spec.width) {
                let m = OcclusionMask::from_box(masks.len(), x0, y0, spec.width, spec.height);
                if m.coverage_fraction == 0.0 || m.coverage_fraction >= MAX_COVERAGE {
                    continue;
                }
                if seen.insert(m.grid.clone()) {
                    masks.push(m);
                }
            }
        }
    }
    if masks.len() == 1 {
        return Err(Error::Params("mask parameters produce no masks".into()));
    }
    Ok(MaskCatalog {
        masks,
        generator_params: params.clone(),
    })
}

/// Grid cell of every part, from its projected position normalized by the
/// tight box of all projected parts.
#[derive(Clone, Debug, PartialEq)]
pub struct PartCells {
    pub cells: Vec<usize>,
    pub bbox: BBox2,
}

impl PartCells {
    pub fn new(pixels: &[Point2]) -> Self {
        let bbox = BBox2::from_points(pixels).unwrap_or(BBox2::new(0.0, 0.0, 0.0, 0.0));
        let cells = pixels.iter().map(|p| cell_index(&bbox, p)).collect();
        Self { cells, bbox }
    }
}

/// Normalized `(u, v)` of a pixel inside `bbox`; degenerate extents map to 0.5.
pub fn normalized_coords(bbox: &BBox2, p: &Point2) -> (f64, f64) {
    let norm = |x: f64, lo: f64, span: f64| if span > 0.0 { (x - lo) / span } else { 0.5 };
    (
        norm(p.x, bbox.min_u, bbox.width()),
        norm(p.y, bbox.min_v, bbox.height()),
    )
}

fn cell_index(bbox: &BBox2, p: &Point2) -> usize {
    let (u, v) = normalized_coords(bbox, p);
    let to_cell = |x: f64| ((x * GRID as f64).floor().max(0.0) as usize).min(GRID - 1);
    to_cell(v) * GRID + to_cell(u)
}

/// Part states under `mask` given self-occlusion flags and part cells.
pub fn states_for(mask: &OcclusionMask, cells: &PartCells, self_occ: &[bool]) -> Vec<PartState> {
    cells
        .cells
        .iter()
        .zip(self_occ)
        .map(|(&cell, &so)| {
            if so {
                PartState::SelfOccluded
            } else if mask.covers(cell) {
                PartState::MaskOccluded
            } else {
                PartState::Visible
            }
        })
        .collect()
}

/// Projects the object and labels every part under `mask`.
pub fn part_occlusion_state(
    obj: &PlacedObject,
    self_occ: &[bool],
    mask: &OcclusionMask,
    cam: &Camera,
) -> Result<Vec<PartState>> {
    if self_occ.len() != obj.vertices.len() {
        return Err(Error::Topology("self-occlusion flags do not match vertex count".into()));
    }
    let pixels = cam.project(&obj.vertices)?;
    Ok(states_for(mask, &PartCells::new(&pixels), self_occ))
}

/// Weighted label agreement: 2 per occluded part the mask hides, 1 per other
/// non-self-occluded part it leaves visible.
pub fn covering_score(mask: &OcclusionMask, occluded: &[bool], cells: &PartCells, self_occ: &[bool]) -> u32 {
    let mut score = 0;
    for (j, &cell) in cells.cells.iter().enumerate() {
        if self_occ[j] {
            continue;
        }
        let hidden = mask.covers(cell);
        if occluded[j] && hidden {
            score += 2;
        } else if !occluded[j] && !hidden {
            score += 1;
        }
    }
    score
}

fn membership(set: &[usize], m: usize) -> Vec<bool> {
    let mut flags = vec![false; m];
    for &j in set {
        flags[j] = true;
    }
    flags
}

/// Mask maximizing [`covering_score`] for the given occluded set; ties go to
/// smaller coverage, then lower id.
pub fn select_mask_covering(occluded: &[usize], self_occ: &[bool], cells: &PartCells, catalog: &MaskCatalog) -> usize {
    let flags = membership(occluded, self_occ.len());
    let mut best = (0u32, f64::INFINITY, usize::MAX);
    for m in &catalog.masks {
        let s = covering_score(m, &flags, cells, self_occ);
        let better = s > best.0
            || (s == best.0 && m.coverage_fraction < best.1)
            || (s == best.0 && m.coverage_fraction == best.1 && m.id < best.2);
        if better {
            best = (s, m.coverage_fraction, m.id);
        }
    }
    best.2
}

/// Ids of masks hiding every part in `occluded`. Falls back to the best
/// covering mask when no mask hides them all.
pub fn admissible_masks(occluded: &[usize], self_occ: &[bool], cells: &PartCells, catalog: &MaskCatalog) -> Vec<usize> {
    let ids: Vec<usize> = catalog
        .masks
        .iter()
        .filter(|m| occluded.iter().all(|&j| m.covers(cells.cells[j])))
        .map(|m| m.id)
        .collect();
    if ids.is_empty() {
        vec![select_mask_covering(occluded, self_occ, cells, catalog)]
    } else {
        ids
    }
}
