//! Fixed-parameter diagonal state-space recurrence and the four-direction
//! gather -> scan -> scatter pipeline.
//!
//! The continuous system `h' = A h + B x, y = C h + D x` with diagonal `A` is
//! discretized by zero-order hold:
//!
//! ```text
//! a_bar[n] = exp(delta * a[n])
//! b_bar[n] = (exp(delta * a[n]) - 1) / a[n] * b[n]
//! h[k]     = a_bar * h[k-1] + b_bar * x[k]      (h[-1] = 0)
//! y[k]     = sum_n c[n] * h[k][n] + d * x[k]
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scan_order::{GridShape, IndexPair, DIRECTIONS};

/// Dense `B x C x (H * W)` feature tensor, row-major over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    batch: usize,
    channels: usize,
    shape: GridShape,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(batch: usize, channels: usize, shape: GridShape, data: Vec<f64>) -> Result<Self> {
        let expected = batch * channels * shape.len();
        if batch == 0 || channels == 0 || data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{batch}x{channels}x{shape} ({expected} values)"),
                found: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            batch,
            channels,
            shape,
            data,
        })
    }

    pub fn zeros(batch: usize, channels: usize, shape: GridShape) -> Self {
        Self {
            batch,
            channels,
            shape,
            data: vec![0.0; batch * channels * shape.len()],
        }
    }

    pub fn from_fn(
        batch: usize,
        channels: usize,
        shape: GridShape,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let len = shape.len();
        let mut data = Vec::with_capacity(batch * channels * len);
        for b in 0..batch {
            for c in 0..channels {
                for l in 0..len {
                    data.push(f(b, c, l));
                }
            }
        }
        Self::new(batch, channels, shape, data)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Sequence length `L = H * W`.
    pub fn seq_len(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row for `(batch, channel)`.
    pub fn channel(&self, b: usize, c: usize) -> &[f64] {
        let len = self.seq_len();
        let start = (b * self.channels + c) * len;
        &self.data[start..start + len]
    }

    /// All channels of batch item `b`, as a `C x L` row-major block.
    pub fn item(&self, b: usize) -> &[f64] {
        let block = self.channels * self.seq_len();
        &self.data[b * block..(b + 1) * block]
    }

    pub fn same_dims(&self, other: &FeatureMap) -> bool {
        self.batch == other.batch && self.channels == other.channels && self.shape == other.shape
    }

    pub fn dims_string(&self) -> String {
        format!("{}x{}x{}", self.batch, self.channels, self.shape)
    }
}

/// Continuous-time parameters of a diagonal SSM.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmParams {
    /// Diagonal of `A`; every entry must be strictly negative.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
    pub delta: f64,
}

impl Default for SsmParams {
    /// `N = 4`, `a = (-1, -2, -3, -4)`, `b = c = 1`, `d = 0`, `delta = 0.1`.
    fn default() -> Self {
        Self {
            a: vec![-1.0, -2.0, -3.0, -4.0],
            b: vec![1.0; 4],
            c: vec![1.0; 4],
            d: 0.0,
            delta: 0.1,
        }
    }
}

impl SsmParams {
    /// Configuration whose output equals its input (`c = 0`, `d = 1`).
    pub fn pass_through(state_dim: usize) -> Self {
        Self {
            a: vec![-1.0; state_dim],
            b: vec![1.0; state_dim],
            c: vec![0.0; state_dim],
            d: 1.0,
            delta: 0.1,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.len();
        if n == 0 || self.b.len() != n || self.c.len() != n {
            return Err(Error::InvalidParams(format!(
                "a, b, c must share a non-zero length (got {}, {}, {})",
                self.a.len(),
                self.b.len(),
                self.c.len()
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "step size must be positive, got {}",
                self.delta
            )));
        }
        if self.a.contains(&0.0) {
            return Err(Error::InvalidParams(
                "zero-order hold is singular for a = 0".into(),
            ));
        }
        if self.a.iter().any(|&a| a.is_nan() || a >= 0.0) {
            return Err(Error::InvalidParams(
                "state transition coefficients must be strictly negative".into(),
            ));
        }
        let finite = self.b.iter().chain(&self.c).all(|v| v.is_finite()) && self.d.is_finite();
        if !finite {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
        Ok(())
    }
}

/// Zero-order-hold coefficients, one pair per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

pub fn discretize(params: &SsmParams) -> Result<Discretized> {
    params.validate()?;
    let (a_bar, b_bar) = params
        .a
        .iter()
        .zip(&params.b)
        .map(|(&a, &b)| {
            let da = params.delta * a;
            // expm1 keeps b_bar accurate as delta -> 0
            (da.exp(), da.exp_m1() / a * b)
        })
        .unzip();
    Ok(Discretized {
        a_bar,
        b_bar,
        c: params.c.clone(),
        d: params.d,
    })
}

impl Discretized {
    /// Runs the recurrence over `x` into `out` using `state` as scratch.
    fn run(&self, x: &[f64], out: &mut [f64], state: &mut [f64]) {
        state.fill(0.0);
        for (y, &xk) in out.iter_mut().zip(x) {
            let mut acc = 0.0;
            for (((h, a), b), c) in state.iter_mut().zip(&self.a_bar).zip(&self.b_bar).zip(&self.c) {
                *h = a * *h + b * xk;
                acc += c * *h;
            }
            *y = acc + self.d * xk;
        }
    }
}

/// Applies the discretized recurrence to one sequence.
pub fn scan_sequence(x: &[f64], params: &SsmParams) -> Result<Vec<f64>> {
    let disc = discretize(params)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut out = vec![0.0; x.len()];
    let mut state = vec![0.0; disc.a_bar.len()];
    disc.run(x, &mut out, &mut state);
    Ok(out)
}

/// Gathers each `(batch, channel)` row into every scan direction of
/// `indices`, transforms it with `seq_fn`, restores raster order through the
/// inverse indices, and sums the four restored maps.
///
/// Directions are combined as `(d0 + d1) + (d2 + d3)`, so results do not
/// depend on how rows are scheduled across threads.
pub fn multi_direction_map<F>(x: &FeatureMap, indices: &IndexPair, seq_fn: F) -> Result<FeatureMap>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if indices.shape() != x.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("indices for {}", x.shape()),
            found: format!("indices for {}", indices.shape()),
        });
    }
    let len = x.seq_len();
    let mut out = vec![0.0; x.data.len()];
    out.par_chunks_mut(len).zip(x.data.par_chunks(len)).for_each_init(
        || (vec![0.0; len], vec![0.0; len], vec![[0.0; DIRECTIONS]; len]),
        |(gathered, scanned, restored), (dst, src)| {
            for k in 0..DIRECTIONS {
                for (g, &raster) in gathered.iter_mut().zip(indices.forward(k)) {
                    *g = src[raster as usize];
                }
                seq_fn(gathered, scanned);
                for (r, &pos) in restored.iter_mut().zip(indices.inverse(k)) {
                    r[k] = scanned[pos as usize];
                }
            }
            for (o, r) in dst.iter_mut().zip(restored.iter()) {
                *o = (r[0] + r[1]) + (r[2] + r[3]);
            }
        },
    );
    Ok(FeatureMap {
        batch: x.batch,
        channels: x.channels,
        shape: x.shape,
        data: out,
    })
}

/// Four-direction SSM scan of `x` along the orders in `indices`.
pub fn multi_direction_scan(x: &FeatureMap, indices: &IndexPair, params: &SsmParams) -> Result<FeatureMap> {
    let disc = discretize(params)?;
    let state_dim = disc.a_bar.len();
    multi_direction_map(x, indices, |seq, out| {
        // small fixed buffer; state_dim is tiny in practice
        let mut state = vec![0.0; state_dim];
        disc.run(seq, out, &mut state);
    })
}
