//! Dependence-aware fusion of the Cross and TopoA branches.
//!
//! For each batch item the channel rows of both branches are compressed with a
//! shared Gaussian random projection, scaled by `1/sqrt(L)` and unit
//! normalized. RBF kernels over those channel descriptors (one bandwidth from
//! the pooled median of pairwise squared distances) are double-centered and
//! compared with a normalized Frobenius inner product, giving a biased HSIC
//! estimate. A scalar sigmoid gate turns that estimate into the TopoA weight:
//!
//! ```text
//! w    = sigmoid(alpha * hsic / T)
//! fuse = w * F_topoa + (1 - w) * F_cross
//! out  = (1 - rho) * fuse + rho * F_topoa
//! ```

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ssm::FeatureMap;

/// Rows with an ℓ2 norm below this are left at zero instead of normalized.
pub const NORM_EPS: f64 = 1e-12;
/// Lower bound on the median bandwidth.
pub const BANDWIDTH_FLOOR: f64 = 1e-12;
/// Smallest projection width regardless of `d_proj` or `L`.
pub const MIN_PROJECTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    /// Projection cap; the effective width is `max(8, min(d_proj, L))`.
    pub d_proj: usize,
    pub alpha: f64,
    pub temperature: f64,
    /// Weight of the TopoA residual shortcut.
    pub rho: f64,
    pub seed: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            d_proj: 64,
            alpha: 0.5,
            temperature: 1.5,
            rho: 0.2,
            seed: 0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_proj == 0 {
            return Err(Error::InvalidGateConfig("d_proj must be positive".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidGateConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidGateConfig(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidGateConfig("alpha must be finite".into()));
        }
        Ok(())
    }

    /// Effective projection width for sequence length `seq_len`.
    pub fn projection_width(&self, seq_len: usize) -> usize {
        self.d_proj.min(seq_len).max(MIN_PROJECTION)
    }
}

/// Identity of a projection matrix; equal keys give bit-identical matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProjectionKey {
    pub seq_len: usize,
    pub width: usize,
    pub seed: u64,
}

/// `L x k` matrix with i.i.d. `N(0, 1) / sqrt(k)` entries.
pub fn sample_projection(key: ProjectionKey) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    let scale = 1.0 / (key.width as f64).sqrt();
    Array2::from_shape_simple_fn((key.seq_len, key.width), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * scale
    })
}

/// Get-or-create store of projection matrices.
#[derive(Debug, Default)]
pub struct ProjectionCache {
    matrices: Mutex<HashMap<ProjectionKey, Arc<Array2<f64>>>>,
}

impl ProjectionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_sample(&self, key: ProjectionKey) -> Arc<Array2<f64>> {
        if let Some(p) = self.lock().get(&key) {
            return Arc::clone(p);
        }
        // sampled outside the lock; racing samplers produce identical matrices
        let sampled = Arc::new(sample_projection(key));
        Arc::clone(self.lock().entry(key).or_insert(sampled))
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<ProjectionKey, Arc<Array2<f64>>>> {
        self.matrices.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Projects `C x L` features to `C x k` and unit-normalizes each row.
pub fn project_and_normalize(features: ArrayView2<f64>, projection: ArrayView2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != projection.nrows() {
        return Err(Error::ShapeMismatch {
            expected: format!("features with {} columns", projection.nrows()),
            found: format!("{} columns", features.ncols()),
        });
    }
    let seq_len = features.ncols() as f64;
    let mut out = features.dot(&projection) / seq_len.sqrt();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm < NORM_EPS {
            row.fill(0.0);
        } else {
            row /= norm;
        }
    }
    Ok(out)
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn upper_sq_distances(x: ArrayView2<f64>, out: &mut Vec<f64>) {
    let n = x.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(sq_dist(x.row(i), x.row(j)));
        }
    }
}

/// Median of the pooled off-diagonal squared distances of both descriptor
/// sets, floored at [`BANDWIDTH_FLOOR`]. Even counts average the middle pair.
pub fn median_bandwidth(xc: ArrayView2<f64>, xt: ArrayView2<f64>) -> Result<f64> {
    let channels = xc.nrows();
    if channels < 2 || xt.nrows() < 2 {
        return Err(Error::TooFewChannels(channels.min(xt.nrows())));
    }
    let mut dists = Vec::with_capacity(channels * (channels - 1));
    upper_sq_distances(xc, &mut dists);
    upper_sq_distances(xt, &mut dists);
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    Ok(median.max(BANDWIDTH_FLOOR))
}

/// Gaussian kernel `exp(-|x_i - x_j|^2 / (2 sigma_sq))` over the rows of `x`.
pub fn rbf_kernel(x: ArrayView2<f64>, sigma_sq: f64) -> Result<Array2<f64>> {
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(Error::InvalidBandwidth(sigma_sq));
    }
    let n = x.nrows();
    let mut k = Array2::<f64>::ones((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (-sq_dist(x.row(i), x.row(j)) / (2.0 * sigma_sq)).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(k)
}

/// `H K H` with `H = I - 11ᵀ/C`, computed by subtracting row, column and
/// grand means.
pub fn double_center(k: ArrayView2<f64>) -> Array2<f64> {
    let n = k.nrows() as f64;
    let row_means = k.sum_axis(Axis(1)) / n;
    let col_means = k.sum_axis(Axis(0)) / n;
    let grand = row_means.sum() / n;
    let mut out = k.to_owned();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = *v - row_means[i] - col_means[j] + grand;
    }
    out
}

/// Biased HSIC: `<HKcH, HKtH>_F / (C - 1)^2`.
pub fn hsic_estimate(kc: ArrayView2<f64>, kt: ArrayView2<f64>) -> Result<f64> {
    let c = kc.nrows();
    if c < 2 {
        return Err(Error::TooFewChannels(c));
    }
    if kc.dim() != (c, c) || kt.dim() != (c, c) {
        return Err(Error::ShapeMismatch {
            expected: format!("two {c}x{c} kernels"),
            found: format!("{:?} and {:?}", kc.dim(), kt.dim()),
        });
    }
    let cc = double_center(kc);
    let ct = double_center(kt);
    let inner: f64 = cc.iter().zip(ct.iter()).map(|(a, b)| a * b).sum();
    Ok(inner / ((c - 1) * (c - 1)) as f64)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// TopoA weight `sigmoid(alpha * hsic / T)`.
pub fn gate_weight(hsic: f64, cfg: &GateConfig) -> f64 {
    sigmoid(cfg.alpha * hsic / cfg.temperature)
}

/// Per-item gate diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDiagnostics {
    pub hsic: f64,
    pub sigma_sq: f64,
    pub w: f64,
}

/// Cross-Scan and TopoA-Scan outputs of identical shape.
#[derive(Debug, Clone)]
pub struct BranchPair {
    cross: FeatureMap,
    topoa: FeatureMap,
}

impl BranchPair {
    pub fn new(cross: FeatureMap, topoa: FeatureMap) -> Result<Self> {
        if !cross.same_dims(&topoa) {
            return Err(Error::ShapeMismatch {
                expected: cross.dims_string(),
                found: topoa.dims_string(),
            });
        }
        Ok(Self { cross, topoa })
    }

    pub fn cross(&self) -> &FeatureMap {
        &self.cross
    }

    pub fn topoa(&self) -> &FeatureMap {
        &self.topoa
    }
}

#[derive(Debug, Clone)]
pub struct Fused {
    pub output: FeatureMap,
    pub diagnostics: Vec<GateDiagnostics>,
}

/// HSIC gate with its projection store.
#[derive(Debug, Default)]
pub struct HsicGate {
    config: GateConfig,
    projections: ProjectionCache,
}

impl HsicGate {
    pub fn new(config: GateConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            projections: ProjectionCache::new(),
        })
    }

    pub fn config(&self) -> &GateConfig {
        &self.config
    }

    pub fn projections(&self) -> &ProjectionCache {
        &self.projections
    }

    /// Gate statistics for one `C x L` item of each branch.
    pub fn diagnose_item(&self, cross: ArrayView2<f64>, topoa: ArrayView2<f64>) -> Result<GateDiagnostics> {
        let seq_len = cross.ncols();
        let key = ProjectionKey {
            seq_len,
            width: self.config.projection_width(seq_len),
            seed: self.config.seed,
        };
        let p = self.projections.get_or_sample(key);
        let xc = project_and_normalize(cross, p.view())?;
        let xt = project_and_normalize(topoa, p.view())?;
        let sigma_sq = median_bandwidth(xc.view(), xt.view())?;
        let kc = rbf_kernel(xc.view(), sigma_sq)?;
        let kt = rbf_kernel(xt.view(), sigma_sq)?;
        let hsic = hsic_estimate(kc.view(), kt.view())?;
        Ok(GateDiagnostics {
            hsic,
            sigma_sq,
            w: gate_weight(hsic, &self.config),
        })
    }

    /// Fuses the two branches item by item.
    pub fn fuse(&self, pair: &BranchPair) -> Result<Fused> {
        let (cross, topoa) = (&pair.cross, &pair.topoa);
        let channels = cross.channels();
        let seq_len = cross.seq_len();
        let rho = self.config.rho;
        let mut data = Vec::with_capacity(cross.data().len());
        let mut diagnostics = Vec::with_capacity(cross.batch());
        for b in 0..cross.batch() {
            let fc = ArrayView2::from_shape((channels, seq_len), cross.item(b)).expect("item block");
            let ft = ArrayView2::from_shape((channels, seq_len), topoa.item(b)).expect("item block");
            let diag = self.diagnose_item(fc, ft)?;
            let w = diag.w;
            data.extend(cross.item(b).iter().zip(topoa.item(b)).map(|(&c, &t)| {
                let fused = w * t + (1.0 - w) * c;
                (1.0 - rho) * fused + rho * t
            }));
            diagnostics.push(diag);
        }
        let output = FeatureMap::new(cross.batch(), channels, cross.shape(), data)?;
        Ok(Fused { output, diagnostics })
    }
}

/// One-shot fusion with a fresh projection store.
pub fn fuse(pair: &BranchPair, cfg: &GateConfig) -> Result<Fused> {
    HsicGate::new(*cfg)?.fuse(pair)
}
