//! Chroma matching, connected-component labeling and ROI extraction.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{chroma_b, chroma_r, ChromaSignature};
use crate::image::{BitMask, Frame};
use crate::mapping::{Dims, PixelPoint};

/// Minimum blob area at the 320×240 reference resolution.
pub const REFERENCE_MIN_BLOB_AREA: usize = 30;
pub const REFERENCE_DIMS: Dims = Dims::new(320, 240);

/// The reference minimum area scaled by frame area, rounded, at least 1.
pub fn default_min_blob_area(cam: Dims) -> usize {
    let scaled = REFERENCE_MIN_BLOB_AREA as f64 * cam.area() as f64 / REFERENCE_DIMS.area() as f64;
    (scaled.round() as usize).max(1)
}

#[inline]
fn matches(px: &[u8], sig: &ChromaSignature) -> bool {
    let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
    (chroma_b(r, g, b) - sig.target.cb).abs() <= sig.threshold
        && (chroma_r(r, g, b) - sig.target.cr).abs() <= sig.threshold
}

/// Sets a bit wherever both `|Cb' - cb|` and `|Cr' - cr|` are within the
/// signature threshold (inclusive). Luma is not consulted.
pub fn chroma_match_mask(frame: &Frame, sig: &ChromaSignature) -> BitMask {
    let mut mask = BitMask::new(frame.width(), frame.height());
    for (bit, px) in mask.bits_mut().iter_mut().zip(frame.as_bytes().chunks_exact(3)) {
        *bit = matches(px, sig);
    }
    mask
}

/// Row-parallel variant of [`chroma_match_mask`]; bit-identical output.
pub fn chroma_match_mask_par(frame: &Frame, sig: &ChromaSignature) -> BitMask {
    let w = frame.width();
    let mut mask = BitMask::new(w, frame.height());
    mask.bits_mut()
        .par_chunks_mut(w)
        .zip(frame.as_bytes().par_chunks(3 * w))
        .for_each(|(bits, row)| {
            for (bit, px) in bits.iter_mut().zip(row.chunks_exact(3)) {
                *bit = matches(px, sig);
            }
        });
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = crate::error::Error;

    fn try_from(n: u8) -> crate::error::Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(crate::error::Error::Config(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }
}

/// Label image: 0 is background, components are numbered `1..=count` in the
/// row-major order their first pixel is encountered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl ComponentLabeling {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass union-find labeling, linear in pixel count.
pub fn connected_components(mask: &BitMask, connectivity: Connectivity) -> ComponentLabeling {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    // Provisional labels are 1-based; slot 0 of the forest is the background.
    let mut provisional = vec![0u32; w * h];
    let mut sets = DisjointSets { parent: vec![0] };

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            let mut current = 0u32;
            let mut join = |n: u32| {
                if n != 0 {
                    current = if current == 0 { n } else { sets.union(current, n) };
                }
            };
            if x > 0 {
                join(provisional[i - 1]);
            }
            if y > 0 {
                let up = i - w;
                join(provisional[up]);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        join(provisional[up - 1]);
                    }
                    if x + 1 < w {
                        join(provisional[up + 1]);
                    }
                }
            }
            provisional[i] = if current == 0 { sets.make() } else { current };
        }
    }

    let mut dense = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    for label in provisional.iter_mut() {
        if *label == 0 {
            continue;
        }
        let root = sets.find(*label) as usize;
        if dense[root] == 0 {
            count += 1;
            dense[root] = count;
        }
        *label = dense[root];
    }

    ComponentLabeling {
        width: w,
        height: h,
        labels: provisional,
        count: count as usize,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BBox {
    pub fn contains(&self, p: PixelPoint) -> bool {
        p.x >= self.min_x as f64
            && p.x <= self.max_x as f64
            && p.y >= self.min_y as f64
            && p.y <= self.max_y as f64
    }
}

/// One detected region reduced to its centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub label: u32,
    pub area: usize,
    pub bbox: BBox,
    pub centroid: PixelPoint,
}

impl Roi {
    /// A single-pixel ROI at `centroid`, for scripted inputs that bypass segmentation.
    pub fn at(centroid: PixelPoint) -> Roi {
        let (x, y) = (centroid.x.max(0.0) as usize, centroid.y.max(0.0) as usize);
        Roi {
            label: 0,
            area: 1,
            bbox: BBox {
                min_x: x,
                min_y: y,
                max_x: centroid.x.ceil().max(0.0) as usize,
                max_y: centroid.y.ceil().max(0.0) as usize,
            },
            centroid,
        }
    }
}

/// One ROI per component of at least `min_blob_area` pixels, sorted by area
/// descending with ties broken by label.
pub fn extract_rois(labeling: &ComponentLabeling, min_blob_area: usize) -> Vec<Roi> {
    #[derive(Clone, Copy)]
    struct Acc {
        area: usize,
        sum_x: u64,
        sum_y: u64,
        bbox: BBox,
    }
    let mut acc = vec![
        Acc {
            area: 0,
            sum_x: 0,
            sum_y: 0,
            bbox: BBox {
                min_x: usize::MAX,
                min_y: usize::MAX,
                max_x: 0,
                max_y: 0,
            },
        };
        labeling.count()
    ];
    for (y, row) in labeling.labels().chunks(labeling.width()).enumerate() {
        for (x, &label) in row.iter().enumerate() {
            if label == 0 {
                continue;
            }
            let a = &mut acc[label as usize - 1];
            a.area += 1;
            a.sum_x += x as u64;
            a.sum_y += y as u64;
            a.bbox.min_x = a.bbox.min_x.min(x);
            a.bbox.min_y = a.bbox.min_y.min(y);
            a.bbox.max_x = a.bbox.max_x.max(x);
            a.bbox.max_y = a.bbox.max_y.max(y);
        }
    }
    let mut rois: Vec<Roi> = acc
        .iter()
        .enumerate()
        .filter(|(_, a)| a.area >= min_blob_area && a.area > 0)
        .map(|(i, a)| Roi {
            label: i as u32 + 1,
            area: a.area,
            bbox: a.bbox,
            centroid: PixelPoint::new(a.sum_x as f64 / a.area as f64, a.sum_y as f64 / a.area as f64),
        })
        .collect();
    rois.sort_by(|a, b| b.area.cmp(&a.area).then(a.label.cmp(&b.label)));
    rois
}

/// Convenience: mask, label and extract in one call.
pub fn segment(frame: &Frame, sig: &ChromaSignature, connectivity: Connectivity, min_blob_area: usize) -> Vec<Roi> {
    let mask = chroma_match_mask(frame, sig);
    extract_rois(&connected_components(&mask, connectivity), min_blob_area)
}

/// One line per ROI: `label area min_x min_y max_x max_y cx cy`.
pub fn format_rois(rois: &[Roi]) -> String {
    let mut out = String::new();
    for r in rois {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {:.3} {:.3}",
            r.label, r.area, r.bbox.min_x, r.bbox.min_y, r.bbox.max_x, r.bbox.max_y, r.centroid.x, r.centroid.y
        );
    }
    out
}
