//! Mask-level topology metrics: component count error (CCE), hole count
//! error (HCE) and exact topology match (ETM).
//!
//! Foreground is 8-connected and background 4-connected. A hole is a
//! background component that does not touch the image border.
//!
//! Masks can be read from PBM files (`P1` plain or `P4` packed) or from a raw
//! dense format: a 16-byte header (`b"TOPOMASK"`, height as little-endian
//! `u32`, width as little-endian `u32`) followed by `H * W` bytes, nonzero
//! meaning foreground.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 8] = b"TOPOMASK";
const RAW_HEADER_LEN: usize = 16;

/// Rectangular binary mask; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidShape { height, width });
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: format!("{} pixels", height * width),
                found: format!("{} pixels", data.len()),
            });
        }
        Ok(Self { height, width, data })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![false; height * width])
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let data = (0..height * width).map(|p| f(p / width, p % width)).collect();
        Self::new(height, width, data)
    }

    /// Parses rows of `#` / `1` (foreground) and `.` / `0` (background).
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut data = Vec::with_capacity(height * width);
        for row in rows {
            if row.chars().count() != width {
                return Err(Error::MaskFormat("ragged ascii rows".into()));
            }
            for ch in row.chars() {
                data.push(match ch {
                    '#' | '1' => true,
                    '.' | '0' => false,
                    other => return Err(Error::MaskFormat(format!("unexpected character {other:?}"))),
                });
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }
}

struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Single raster pass joining each selected pixel with its already-visited
/// neighbours (W, NW, N, NE for 8-connectivity; W, N for 4-connectivity).
fn label(mask: &BinaryMask, select: bool, eight: bool) -> DisjointSets {
    let (h, w) = (mask.height, mask.width);
    let mut sets = DisjointSets::new(h * w);
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) != select {
                continue;
            }
            let p = (r * w + c) as u32;
            let mut join = |rr: usize, cc: usize| {
                if mask.get(rr, cc) == select {
                    sets.union(p, (rr * w + cc) as u32);
                }
            };
            if c > 0 {
                join(r, c - 1);
            }
            if r > 0 {
                join(r - 1, c);
                if eight {
                    if c > 0 {
                        join(r - 1, c - 1);
                    }
                    if c + 1 < w {
                        join(r - 1, c + 1);
                    }
                }
            }
        }
    }
    sets
}

/// Number of 8-connected foreground components.
pub fn count_components(mask: &BinaryMask) -> usize {
    let mut sets = label(mask, true, true);
    (0..mask.data.len() as u32)
        .filter(|&p| mask.data[p as usize] && sets.find(p) == p)
        .count()
}

/// Number of 4-connected background components not touching the border.
pub fn count_holes(mask: &BinaryMask) -> usize {
    let (h, w) = (mask.height, mask.width);
    let mut sets = label(mask, false, false);
    let mut touches_border = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) && (r == 0 || c == 0 || r + 1 == h || c + 1 == w) {
                let root = sets.find((r * w + c) as u32);
                touches_border[root as usize] = true;
            }
        }
    }
    (0..(h * w) as u32)
        .filter(|&p| !mask.data[p as usize] && sets.find(p) == p && !touches_border[p as usize])
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopoSummary {
    pub components: usize,
    pub holes: usize,
}

pub fn summarize(mask: &BinaryMask) -> TopoSummary {
    TopoSummary {
        components: count_components(mask),
        holes: count_holes(mask),
    }
}

/// Per-pair topology errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopoErrors {
    pub cce: usize,
    pub hce: usize,
    /// 1 iff both counts match exactly.
    pub etm: u8,
}

pub fn topo_errors(pred: &BinaryMask, gt: &BinaryMask) -> Result<TopoErrors> {
    if (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", gt.height, gt.width),
            found: format!("{}x{}", pred.height, pred.width),
        });
    }
    let (p, g) = (summarize(pred), summarize(gt));
    let cce = p.components.abs_diff(g.components);
    let hce = p.holes.abs_diff(g.holes);
    Ok(TopoErrors {
        cce,
        hce,
        etm: u8::from(cce == 0 && hce == 0),
    })
}

/// Batch means with ETM as a percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoAggregate {
    pub cce: f64,
    pub hce: f64,
    pub etm_pct: f64,
    pub n: usize,
}

pub fn aggregate(items: &[TopoErrors]) -> Result<TopoAggregate> {
    if items.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = items.len() as f64;
    let sum = |f: fn(&TopoErrors) -> usize| items.iter().map(f).sum::<usize>() as f64;
    Ok(TopoAggregate {
        cce: sum(|e| e.cce) / n,
        hce: sum(|e| e.hce) / n,
        etm_pct: 100.0 * sum(|e| e.etm as usize) / n,
        n: items.len(),
    })
}

// --- file formats ---

/// Raw dense encoding (see module docs).
pub fn encode_raw(mask: &BinaryMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + mask.data.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(mask.height as u32).to_le_bytes());
    out.extend_from_slice(&(mask.width as u32).to_le_bytes());
    out.extend(mask.data.iter().map(|&v| u8::from(v)));
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<BinaryMask> {
    if bytes.len() < RAW_HEADER_LEN || &bytes[..8] != RAW_MAGIC {
        return Err(Error::MaskFormat("missing raw mask header".into()));
    }
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[RAW_HEADER_LEN..];
    if body.len() != height * width {
        return Err(Error::MaskFormat(format!(
            "raw body has {} bytes, header says {height}x{width}",
            body.len()
        )));
    }
    BinaryMask::new(height, width, body.iter().map(|&b| b != 0).collect())
}

/// Plain PBM (`P1`); `1` is foreground.
pub fn encode_pbm_plain(mask: &BinaryMask) -> String {
    let mut out = format!("P1\n{} {}\n", mask.width, mask.height);
    for row in mask.data.chunks(mask.width) {
        let line: Vec<&str> = row.iter().map(|&v| if v { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Splits PBM header tokens, skipping `#` comments. Returns the tokens and
/// the byte offset just past the last one consumed.
fn pbm_header(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut pos = 0;
    while tokens.len() < count {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MaskFormat("truncated PBM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    Ok((tokens, pos))
}

fn parse_dim(token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::MaskFormat(format!("bad PBM dimension {token:?}")))
}

pub fn decode_pbm(bytes: &[u8]) -> Result<BinaryMask> {
    let (header, pos) = pbm_header(bytes, 3)?;
    let width = parse_dim(&header[1])?;
    let height = parse_dim(&header[2])?;
    match header[0].as_str() {
        "P1" => {
            let mut data = Vec::with_capacity(height * width);
            let mut in_comment = false;
            for &b in &bytes[pos..] {
                match b {
                    b'#' => in_comment = true,
                    b'\n' => in_comment = false,
                    _ if in_comment => {}
                    b'0' => data.push(false),
                    b'1' => data.push(true),
                    b if b.is_ascii_whitespace() => {}
                    other => {
                        return Err(Error::MaskFormat(format!(
                            "unexpected byte {other:#04x} in P1 body"
                        )))
                    }
                }
            }
            if data.len() != height * width {
                return Err(Error::MaskFormat(format!(
                    "P1 body has {} pixels, header says {height}x{width}",
                    data.len()
                )));
            }
            BinaryMask::new(height, width, data)
        }
        "P4" => {
            // exactly one whitespace byte separates header and raster
            let body = bytes.get(pos + 1..).unwrap_or_default();
            let stride = width.div_ceil(8);
            if body.len() < stride * height {
                return Err(Error::MaskFormat("truncated P4 raster".into()));
            }
            let data = (0..height * width)
                .map(|p| {
                    let (r, c) = (p / width, p % width);
                    body[r * stride + c / 8] & (0x80 >> (c % 8)) != 0
                })
                .collect();
            BinaryMask::new(height, width, data)
        }
        magic => Err(Error::MaskFormat(format!("unsupported PBM magic {magic:?}"))),
    }
}

/// Reads a raw or PBM mask, detecting the format from its leading bytes.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(RAW_MAGIC) {
        decode_raw(&bytes)
    } else {
        decode_pbm(&bytes)
    }
}

/// One `pred gt class` line of a mask manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub class_id: String,
}

/// Parses a manifest: whitespace-separated `pred_path gt_path class_id` per
/// line, blank lines and `#` comments ignored. Relative paths resolve
/// against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [pred, gt, class_id] = fields[..] else {
            return Err(Error::Manifest {
                line: idx + 1,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        };
        entries.push(ManifestEntry {
            pred: base.join(pred),
            gt: base.join(gt),
            class_id: class_id.to_owned(),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoReport {
    pub cce: f64,
    pub hce: f64,
    pub etm_pct: f64,
    pub n: usize,
    /// Same statistics restricted to each class id.
    pub per_class: std::collections::BTreeMap<String, TopoAggregate>,
}

/// Evaluates every pair in a manifest file, pooling all items uniformly.
pub fn report_from_manifest(path: &Path) -> Result<TopoReport> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let entries = parse_manifest(&text, base)?;
    let mut all = Vec::with_capacity(entries.len());
    let mut by_class: std::collections::BTreeMap<String, Vec<TopoErrors>> = Default::default();
    for entry in &entries {
        let errs = topo_errors(&read_mask(&entry.pred)?, &read_mask(&entry.gt)?)?;
        all.push(errs);
        by_class.entry(entry.class_id.clone()).or_default().push(errs);
    }
    let pooled = aggregate(&all)?;
    let per_class = by_class
        .into_iter()
        .map(|(k, v)| aggregate(&v).map(|a| (k, a)))
        .collect::<Result<_>>()?;
    Ok(TopoReport {
        cce: pooled.cce,
        hce: pooled.hce,
        etm_pct: pooled.etm_pct,
        n: pooled.n,
        per_class,
    })
}
