//! Memoizing function oracle with exact evaluation accounting.

use crate::error::{CrossError, Result};
use crate::index::MultiIndex;
use crate::Scalar;
use dashmap::DashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub type OracleFn = Arc<dyn Fn(&MultiIndex) -> Scalar + Send + Sync>;

/// Default bound on memoized entries per cache. A multi-index key plus map
/// overhead costs on the order of 100-200 bytes, so this keeps a cache
/// within a few gigabytes even for deep tensors.
pub const DEFAULT_CACHE_CAP: usize = 16_000_000;

/// Pointwise access to an implicitly defined tensor on a product grid.
///
/// Evaluations are memoized by multi-index (default on: the same fiber
/// positions recur across sweeps), and the call counter counts callback
/// invocations only, so the reported evaluation count reflects true function
/// work. Once a cache reaches its entry cap, further misses evaluate
/// without inserting, trading repeat work for bounded memory. Clones share
/// the callback, the counter, and the cache;
/// [`FunctionOracle::fork_cache`] gives a worker its own cache while keeping
/// the shared counter.
#[derive(Clone)]
pub struct FunctionOracle {
    dims: Arc<[usize]>,
    f: OracleFn,
    calls: Arc<AtomicU64>,
    cache: Option<Arc<DashMap<MultiIndex, Scalar>>>,
    cached: Arc<AtomicU64>,
    cache_cap: usize,
}

impl FunctionOracle {
    /// Memoizing oracle over mode sizes `dims` with the default cache cap.
    pub fn new(dims: &[usize], f: OracleFn) -> Result<Self> {
        Self::with_cache_cap(dims, f, DEFAULT_CACHE_CAP)
    }

    /// Memoizing oracle with an explicit bound on cached entries.
    pub fn with_cache_cap(dims: &[usize], f: OracleFn, cache_cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(CrossError::invalid("tensor must have at least one mode"));
        }
        for (k, &n) in dims.iter().enumerate() {
            if n == 0 || n > u16::MAX as usize {
                return Err(CrossError::invalid(format!(
                    "mode size {} at position {} outside 1..={}",
                    n,
                    k + 1,
                    u16::MAX
                )));
            }
        }
        Ok(FunctionOracle {
            dims: dims.into(),
            f,
            calls: Arc::new(AtomicU64::new(0)),
            cache: Some(Arc::new(DashMap::new())),
            cached: Arc::new(AtomicU64::new(0)),
            cache_cap,
        })
    }

    /// Same oracle without memoization (every eval invokes the callback).
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    /// Clone with a fresh, empty cache but the shared call counter. Workers
    /// of the parallel sweep each hold a fork so caches need no cross-thread
    /// synchronization beyond the counter.
    pub fn fork_cache(&self) -> Self {
        FunctionOracle {
            dims: self.dims.clone(),
            f: self.f.clone(),
            calls: self.calls.clone(),
            cache: self.cache.as_ref().map(|_| Arc::new(DashMap::new())),
            cached: Arc::new(AtomicU64::new(0)),
            cache_cap: self.cache_cap,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes d.
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Callback invocations so far, across all clones and forks.
    pub fn eval_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Evaluates at a full multi-index, consulting the memo cache first.
    /// A non-finite callback value is reported as an input error and is not
    /// cached.
    pub fn eval(&self, idx: &MultiIndex) -> Result<Scalar> {
        idx.validate(&self.dims)?;
        match &self.cache {
            Some(cache) => {
                if let Some(v) = cache.get(idx) {
                    return Ok(*v);
                }
                if self.cached.load(Ordering::Relaxed) >= self.cache_cap as u64 {
                    self.calls.fetch_add(1, Ordering::Relaxed);
                    let v = (self.f)(idx);
                    return if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(CrossError::invalid(format!(
                            "oracle returned non-finite value {v} at {idx:?}"
                        )))
                    };
                }
                // Entry API keeps the evaluation exactly-once per point even
                // under concurrent misses, so eval_count stays deterministic.
                let mut fresh = Ok(0.0);
                let v = *cache.entry(idx.clone()).or_insert_with(|| {
                    self.calls.fetch_add(1, Ordering::Relaxed);
                    self.cached.fetch_add(1, Ordering::Relaxed);
                    let v = (self.f)(idx);
                    fresh = if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(CrossError::invalid(format!(
                            "oracle returned non-finite value {v} at {idx:?}"
                        )))
                    };
                    v
                });
                if let Err(e) = fresh {
                    if cache.remove(idx).is_some() {
                        self.cached.fetch_sub(1, Ordering::Relaxed);
                    }
                    return Err(e);
                }
                if !v.is_finite() {
                    // A racing thread cached the point before this one saw it.
                    if cache.remove(idx).is_some() {
                        self.cached.fetch_sub(1, Ordering::Relaxed);
                    }
                    return Err(CrossError::invalid(format!(
                        "oracle returned non-finite value {v} at {idx:?}"
                    )));
                }
                Ok(v)
            }
            None => {
                self.calls.fetch_add(1, Ordering::Relaxed);
                let v = (self.f)(idx);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CrossError::invalid(format!(
                        "oracle returned non-finite value {v} at {idx:?}"
                    )))
                }
            }
        }
    }

    /// Evaluates a batch, optionally splitting the work over `threads`
    /// evaluator threads (the hybrid mode of the parallel sweep). Results
    /// keep the input order.
    pub fn eval_batch(&self, idxs: &[MultiIndex], threads: usize) -> Result<Vec<Scalar>> {
        if threads <= 1 || idxs.len() < 64 {
            return idxs.iter().map(|i| self.eval(i)).collect();
        }
        let chunk = idxs.len().div_ceil(threads);
        let mut out = vec![0.0; idxs.len()];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (slot, work) in out.chunks_mut(chunk).zip(idxs.chunks(chunk)) {
                handles.push(scope.spawn(move || -> Result<()> {
                    for (o, i) in slot.iter_mut().zip(work) {
                        *o = self.eval(i)?;
                    }
                    Ok(())
                }));
            }
            for h in handles {
                h.join().expect("evaluator thread panicked")?;
            }
            Ok::<(), CrossError>(())
        })?;
        Ok(out)
    }
}
