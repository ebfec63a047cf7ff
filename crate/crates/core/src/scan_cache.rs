//! Device-aware LRU cache for scan index pairs.
//!
//! Building an [`IndexPair`] is `O(H * W)` work that every forward pass would
//! otherwise repeat. [`ScanCache`] keys finished pairs by
//! `(height, width, device)` so that only the first request for a resolution
//! pays for construction; later requests are a hash lookup.
//!
//! Placement is modelled abstractly: a [`DeviceSignature`] is an opaque tag and
//! moving an entry between placements deep-copies the index data, optionally
//! sleeping for a configured synthetic cost.
//!
//! Recency is tracked with a monotone access counter rather than wall time, so
//! eviction order is fully deterministic for a given request sequence.
//!
//! # Thread safety
//!
//! All state sits behind one mutex. The lock is released while a missing pair
//! is being built, so concurrent misses on the same key may each build; the
//! first insertion wins and later builders adopt the stored entry.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan_order::{build_topoa_indices, GridShape, IndexPair};

/// Capacity used when none is configured.
pub const DEFAULT_CAPACITY: usize = 64;

/// Opaque placement tag such as `"host"` or `"accel:0"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DeviceSignature(String);

impl DeviceSignature {
    pub fn new(tag: impl Into<String>) -> Result<Self> {
        let tag = tag.into();
        if tag.is_empty() {
            return Err(Error::EmptyDevice);
        }
        Ok(Self(tag))
    }

    /// The default host placement.
    pub fn host() -> Self {
        Self("host".to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for DeviceSignature {
    type Error = Error;

    fn try_from(tag: String) -> Result<Self> {
        Self::new(tag)
    }
}

impl From<DeviceSignature> for String {
    fn from(sig: DeviceSignature) -> Self {
        sig.0
    }
}

impl fmt::Display for DeviceSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `(height, width, device)` lookup key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    shape: GridShape,
    device: DeviceSignature,
}

impl CacheKey {
    pub fn new(height: usize, width: usize, device: DeviceSignature) -> Result<Self> {
        Ok(Self {
            shape: GridShape::new(height, width)?,
            device,
        })
    }

    pub fn from_shape(shape: GridShape, device: DeviceSignature) -> Self {
        Self { shape, device }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height()
    }

    pub fn width(&self) -> usize {
        self.shape.width()
    }

    pub fn device(&self) -> &DeviceSignature {
        &self.device
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.shape, self.device)
    }
}

/// A cached index pair with its placement and recency stamp.
#[derive(Debug, Clone)]
pub struct CacheEntry {
    indices: Arc<IndexPair>,
    placement: DeviceSignature,
    last_used: u64,
}

impl CacheEntry {
    pub fn new(indices: Arc<IndexPair>, placement: DeviceSignature, last_used: u64) -> Self {
        Self {
            indices,
            placement,
            last_used,
        }
    }

    pub fn indices(&self) -> &Arc<IndexPair> {
        &self.indices
    }

    pub fn placement(&self) -> &DeviceSignature {
        &self.placement
    }

    pub fn last_used(&self) -> u64 {
        self.last_used
    }
}

/// Point-in-time counters. `requests == hits + misses` in every snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub transfers: u64,
    /// Index pairs built, including builds that lost an insertion race.
    pub constructions: u64,
    /// Time spent serving misses (construction plus insertion).
    pub build_time_total: Duration,
    /// Time spent serving hits (lookup plus any transfer).
    pub lookup_time_total: Duration,
}

impl CacheStats {
    pub fn hit_rate(&self) -> f64 {
        self.hits as f64 / self.requests.max(1) as f64
    }

    /// JSON export; `hit_rate` is a fraction in `[0, 1]`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "requests": self.requests,
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
            "transfers": self.transfers,
            "hit_rate": self.hit_rate(),
            "constructions": self.constructions,
            "build_ms": self.build_time_total.as_secs_f64() * 1e3,
            "lookup_ms": self.lookup_time_total.as_secs_f64() * 1e3,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub capacity: usize,
    /// Synthetic cost of moving one entry between placements.
    pub transfer_delay: Duration,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            capacity: DEFAULT_CAPACITY,
            transfer_delay: Duration::ZERO,
        }
    }
}

/// Entry removed by LRU eviction, with its recency stamp at removal time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eviction {
    pub key: CacheKey,
    pub last_used: u64,
}

/// Detailed outcome of one [`ScanCache::get_or_build_traced`] call.
#[derive(Debug, Clone)]
pub struct Lookup {
    pub indices: Arc<IndexPair>,
    pub hit: bool,
    pub transferred: bool,
    pub evicted: Option<Eviction>,
    /// Index-service time for this request.
    pub elapsed: Duration,
}

#[derive(Debug, Default)]
struct Inner {
    entries: HashMap<CacheKey, CacheEntry>,
    clock: u64,
    stats: CacheStats,
}

impl Inner {
    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn evict_lru(&mut self) -> Option<Eviction> {
        let victim = self
            .entries
            .iter()
            .min_by_key(|(_, e)| e.last_used)
            .map(|(k, _)| k.clone())?;
        let entry = self.entries.remove(&victim)?;
        self.stats.evictions += 1;
        Some(Eviction {
            key: victim,
            last_used: entry.last_used,
        })
    }
}

/// LRU cache of TopoA index pairs keyed by resolution and placement.
#[derive(Debug, Default)]
pub struct ScanCache {
    config: CacheConfig,
    inner: Mutex<Inner>,
}

impl ScanCache {
    pub fn new(capacity: usize) -> Result<Self> {
        Self::with_config(CacheConfig {
            capacity,
            ..CacheConfig::default()
        })
    }

    pub fn with_config(config: CacheConfig) -> Result<Self> {
        if config.capacity == 0 {
            return Err(Error::ZeroCapacity);
        }
        Ok(Self {
            config,
            inner: Mutex::default(),
        })
    }

    pub fn config(&self) -> CacheConfig {
        self.config
    }

    pub fn capacity(&self) -> usize {
        self.config.capacity
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // A panic while holding the lock cannot leave the map half-updated in
        // a way that breaks later lookups, so poisoning is ignored.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Returns the TopoA index pair for `key`, building it on a miss.
    pub fn get_or_build(&self, key: &CacheKey) -> Arc<IndexPair> {
        self.get_or_build_traced(key).indices
    }

    /// Like [`ScanCache::get_or_build`], also reporting hit/miss, transfer
    /// and eviction details.
    pub fn get_or_build_traced(&self, key: &CacheKey) -> Lookup {
        let start = Instant::now();
        {
            let mut inner = self.lock();
            let now = inner.tick();
            inner.stats.requests += 1;
            if inner.entries.contains_key(key) {
                inner.stats.hits += 1;
                let entry = inner.entries.get_mut(key).expect("checked above");
                let transferred = entry.placement != key.device;
                if transferred {
                    *entry = self.move_entry(entry, &key.device);
                }
                entry.last_used = now;
                let indices = Arc::clone(&entry.indices);
                if transferred {
                    inner.stats.transfers += 1;
                }
                let elapsed = start.elapsed();
                inner.stats.lookup_time_total += elapsed;
                return Lookup {
                    indices,
                    hit: true,
                    transferred,
                    evicted: None,
                    elapsed,
                };
            }
            inner.stats.misses += 1;
        }

        let built = Arc::new(build_topoa_indices(key.shape));

        let mut inner = self.lock();
        inner.stats.constructions += 1;
        let now = inner.tick();
        let (indices, evicted) = match inner.entries.get_mut(key) {
            // another thread inserted while we were building
            Some(existing) => {
                existing.last_used = now;
                (Arc::clone(&existing.indices), None)
            }
            None => {
                inner.entries.insert(
                    key.clone(),
                    CacheEntry::new(Arc::clone(&built), key.device.clone(), now),
                );
                let evicted = if inner.entries.len() > self.config.capacity {
                    inner.evict_lru()
                } else {
                    None
                };
                (built, evicted)
            }
        };
        let elapsed = start.elapsed();
        inner.stats.build_time_total += elapsed;
        Lookup {
            indices,
            hit: false,
            transferred: false,
            evicted,
            elapsed,
        }
    }

    fn move_entry(&self, entry: &CacheEntry, target: &DeviceSignature) -> CacheEntry {
        let copied = Arc::new(IndexPair::clone(&entry.indices));
        if !self.config.transfer_delay.is_zero() {
            std::thread::sleep(self.config.transfer_delay);
        }
        CacheEntry {
            indices: copied,
            placement: target.clone(),
            last_used: entry.last_used,
        }
    }

    /// Moves `entry` to `target`, recording a transfer unless the placement
    /// already matches (in which case the entry is returned unchanged).
    pub fn transfer(&self, entry: &CacheEntry, target: &DeviceSignature) -> CacheEntry {
        if entry.placement == *target {
            return entry.clone();
        }
        let moved = self.move_entry(entry, target);
        self.lock().stats.transfers += 1;
        moved
    }

    /// Re-tags every stored entry with `target` without re-keying, the way
    /// module buffers follow a model moved to another device. A later request
    /// whose key names a different device transfers the entry back.
    pub fn relocate_all(&self, target: &DeviceSignature) {
        let mut inner = self.lock();
        for entry in inner.entries.values_mut() {
            entry.placement = target.clone();
        }
    }

    pub fn snapshot_stats(&self) -> CacheStats {
        self.lock().stats
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.lock().entries.contains_key(key)
    }

    /// Stored entry for `key`, without touching recency or stats.
    pub fn peek(&self, key: &CacheKey) -> Option<CacheEntry> {
        self.lock().entries.get(key).cloned()
    }

    /// Keys with their recency stamps, least recently used first.
    pub fn entries_by_recency(&self) -> Vec<(CacheKey, u64)> {
        let inner = self.lock();
        let mut out: Vec<_> = inner
            .entries
            .iter()
            .map(|(k, e)| (k.clone(), e.last_used))
            .collect();
        out.sort_by_key(|(_, t)| *t);
        out
    }

    /// Drops all entries and resets counters.
    pub fn clear(&self) {
        *self.lock() = Inner::default();
    }
}
