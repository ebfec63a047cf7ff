//! Scan orders that serialize an `H x W` grid into a 1-D sequence.
//!
//! Two families are provided:
//!
//! * **TopoA** orders walk the grid along alternating diagonals (`i + j = s`)
//!   or anti-diagonals (`i - j = s - (W - 1)`), reversing every odd segment so
//!   the walk never jumps: consecutive cells are always 4- or 8-neighbours.
//!   The four directions are the diagonal walk, the anti-diagonal walk, and the
//!   full reversal of each.
//! * **Cross** orders are the axis-aligned row-major and column-major walks and
//!   their reversals.
//!
//! Every direction is stored as a forward permutation (`scan position ->
//! raster index`) together with its inverse (`raster index -> scan position`),
//! so a flattened feature vector can be gathered into scan order and scattered
//! back without loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of scan directions held by an [`IndexPair`].
pub const DIRECTIONS: usize = 4;

/// Height and width of a 2-D feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridShape {
    height: usize,
    width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        let fits = height
            .checked_mul(width)
            .is_some_and(|len| i64::try_from(len).is_ok());
        if height == 0 || width == 0 || !fits {
            return Err(Error::InvalidShape { height, width });
        }
        Ok(Self { height, width })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of cells, `H * W`.
    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    /// Always false; a valid shape has at least one cell.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major flattening of `(row, col)`.
    #[inline]
    pub fn flatten(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Inverse of [`GridShape::flatten`].
    #[inline]
    pub fn unflatten(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Which family of scan orders an [`IndexPair`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanKind {
    /// Rows: diag, antidiag, flip(diag), flip(antidiag).
    Topoa,
    /// Rows: row-major, column-major, flip(row-major), flip(column-major).
    Cross,
}

/// Four forward scan permutations over a flattened grid and their inverses.
///
/// `forward[k][j]` is the raster index visited at scan position `j` of
/// direction `k`; `inverse[k][forward[k][j]] == j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPair {
    kind: ScanKind,
    shape: GridShape,
    forward: Vec<i64>,
    inverse: Vec<i64>,
}

/// Axis-aligned counterpart of [`IndexPair`]; same layout, different orders.
pub type CrossIndexPair = IndexPair;

impl IndexPair {
    /// Assembles a pair from four forward rows, computing the inverse rows.
    fn from_forward_rows(kind: ScanKind, shape: GridShape, rows: [Vec<i64>; DIRECTIONS]) -> Self {
        let len = shape.len();
        let mut forward = Vec::with_capacity(DIRECTIONS * len);
        for row in &rows {
            debug_assert_eq!(row.len(), len);
            forward.extend_from_slice(row);
        }
        let mut inverse = vec![0i64; DIRECTIONS * len];
        for k in 0..DIRECTIONS {
            let fwd = &forward[k * len..(k + 1) * len];
            let inv = &mut inverse[k * len..(k + 1) * len];
            for (pos, &raster) in fwd.iter().enumerate() {
                inv[raster as usize] = pos as i64;
            }
        }
        Self {
            kind,
            shape,
            forward,
            inverse,
        }
    }

    #[inline]
    pub fn kind(&self) -> ScanKind {
        self.kind
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Sequence length `L = H * W`.
    #[inline]
    pub fn len(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward row `k` (scan position -> raster index).
    ///
    /// Panics if `k >= 4`.
    #[inline]
    pub fn forward(&self, k: usize) -> &[i64] {
        let len = self.len();
        &self.forward[k * len..(k + 1) * len]
    }

    /// Inverse row `k` (raster index -> scan position).
    ///
    /// Panics if `k >= 4`.
    #[inline]
    pub fn inverse(&self, k: usize) -> &[i64] {
        let len = self.len();
        &self.inverse[k * len..(k + 1) * len]
    }

    pub fn forward_rows(&self) -> impl Iterator<Item = &[i64]> {
        self.forward.chunks_exact(self.len())
    }

    pub fn inverse_rows(&self) -> impl Iterator<Item = &[i64]> {
        self.inverse.chunks_exact(self.len())
    }

    /// Heap footprint of the index data in bytes.
    pub fn byte_size(&self) -> usize {
        (self.forward.len() + self.inverse.len()) * std::mem::size_of::<i64>()
    }

    /// JSON form `{"h":H,"w":W,"forward":[[..];4],"inverse":[[..];4]}`.
    pub fn to_dump(&self) -> IndexDump {
        IndexDump {
            h: self.shape.height,
            w: self.shape.width,
            forward: self.forward_rows().map(<[i64]>::to_vec).collect(),
            inverse: self.inverse_rows().map(<[i64]>::to_vec).collect(),
        }
    }
}

/// Serializable dump of an [`IndexPair`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDump {
    pub h: usize,
    pub w: usize,
    pub forward: Vec<Vec<i64>>,
    pub inverse: Vec<Vec<i64>>,
}

/// Visits every segment `s = 0 ..= H + W - 2` and pushes the flattened
/// indices produced by `cell(s, i)` for each admissible row `i`, in
/// increasing `i` for even `s` and decreasing `i` for odd `s`.
fn alternating_segments(shape: GridShape, cell: impl Fn(usize, usize) -> usize) -> Vec<i64> {
    let (h, w) = (shape.height, shape.width);
    let mut order = Vec::with_capacity(shape.len());
    for s in 0..(h + w - 1) {
        // rows i with 0 <= s - i < w
        let lo = s.saturating_sub(w - 1);
        let hi = s.min(h - 1);
        if s % 2 == 0 {
            order.extend((lo..=hi).map(|i| cell(s, i) as i64));
        } else {
            order.extend((lo..=hi).rev().map(|i| cell(s, i) as i64));
        }
    }
    order
}

/// Diagonal zigzag: segment `s` holds cells `(i, s - i)`.
pub fn build_base_diagonal(shape: GridShape) -> Vec<i64> {
    alternating_segments(shape, |s, i| shape.flatten(i, s - i))
}

/// Anti-diagonal zigzag: segment `s` holds cells `(i, W - 1 - (s - i))`.
pub fn build_base_antidiagonal(shape: GridShape) -> Vec<i64> {
    let last_col = shape.width - 1;
    alternating_segments(shape, |s, i| shape.flatten(i, last_col - (s - i)))
}

fn reversed(order: &[i64]) -> Vec<i64> {
    order.iter().rev().copied().collect()
}

/// TopoA forward/inverse indices: `[diag, antidiag, flip(diag), flip(antidiag)]`.
pub fn build_topoa_indices(shape: GridShape) -> IndexPair {
    let diag = build_base_diagonal(shape);
    let antidiag = build_base_antidiagonal(shape);
    let flip_diag = reversed(&diag);
    let flip_antidiag = reversed(&antidiag);
    IndexPair::from_forward_rows(ScanKind::Topoa, shape, [diag, antidiag, flip_diag, flip_antidiag])
}

/// Cross-Scan forward/inverse indices: row-major, column-major and reversals.
///
/// Column-major visits `(i, j)` by increasing `j`, then `i`, emitting the
/// row-major index `i * W + j`.
pub fn build_cross_indices(shape: GridShape) -> CrossIndexPair {
    let len = shape.len() as i64;
    let row_major: Vec<i64> = (0..len).collect();
    let col_major: Vec<i64> = (0..shape.width)
        .flat_map(|j| (0..shape.height).map(move |i| shape.flatten(i, j) as i64))
        .collect();
    let flip_row = reversed(&row_major);
    let flip_col = reversed(&col_major);
    IndexPair::from_forward_rows(ScanKind::Cross, shape, [row_major, col_major, flip_row, flip_col])
}

/// Builds the index pair of the requested family.
pub fn build_indices(kind: ScanKind, shape: GridShape) -> IndexPair {
    match kind {
        ScanKind::Topoa => build_topoa_indices(shape),
        ScanKind::Cross => build_cross_indices(shape),
    }
}

/// Returns true iff `order` contains every value in `0..order.len()` once.
pub fn is_permutation(order: &[i64]) -> bool {
    let mut seen = vec![false; order.len()];
    for &v in order {
        let Ok(v) = usize::try_from(v) else {
            return false;
        };
        match seen.get_mut(v) {
            Some(slot) if !*slot => *slot = true,
            _ => return false,
        }
    }
    true
}

fn check_order(order: &[i64], shape: GridShape) -> Result<()> {
    if order.len() != shape.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("order of length {}", shape.len()),
            found: format!("length {}", order.len()),
        });
    }
    if !is_permutation(order) {
        return Err(Error::NotAPermutation { len: order.len() });
    }
    Ok(())
}

/// Squared Euclidean distances between consecutive visited cells.
pub fn adjacent_step_sq_distances(order: &[i64], shape: GridShape) -> Result<Vec<u64>> {
    check_order(order, shape)?;
    Ok(order
        .windows(2)
        .map(|pair| {
            let (r0, c0) = shape.unflatten(pair[0] as usize);
            let (r1, c1) = shape.unflatten(pair[1] as usize);
            let dr = r0.abs_diff(r1) as u64;
            let dc = c0.abs_diff(c1) as u64;
            dr * dr + dc * dc
        })
        .collect())
}

/// Euclidean distances between consecutive visited cells.
pub fn adjacent_step_distances(order: &[i64], shape: GridShape) -> Result<Vec<f64>> {
    Ok(adjacent_step_sq_distances(order, shape)?
        .into_iter()
        .map(|d2| (d2 as f64).sqrt())
        .collect())
}
