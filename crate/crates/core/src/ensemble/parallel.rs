//! Deterministic sharding of per-sample work across threads.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub workers: usize,
    /// Extra attempts per sample after the first failure.
    pub max_retries: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            max_retries: 2,
        }
    }
}

/// Completed and failed sample indices of a run. Written to disk when a run
/// aborts; passing it back to [`run_parallel`] skips the completed indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialRun<T> {
    pub completed: BTreeMap<u64, T>,
    pub failed: BTreeMap<u64, String>,
}

impl<T> Default for PartialRun<T> {
    fn default() -> Self {
        Self {
            completed: BTreeMap::new(),
            failed: BTreeMap::new(),
        }
    }
}

impl<T: Serialize + DeserializeOwned> PartialRun<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Indices handled by `worker` out of `workers`: every `workers`-th index
/// starting at `worker`.
pub fn shard(indices: &[u64], worker: usize, workers: usize) -> Vec<u64> {
    indices.iter().skip(worker).step_by(workers).copied().collect()
}

fn attempt<T>(job: &(impl Fn(u64) -> Result<T> + Sync), index: u64, retries: usize) -> Result<T, String> {
    let mut last = String::new();
    for _ in 0..=retries {
        match catch_unwind(AssertUnwindSafe(|| job(index))) {
            Ok(Ok(v)) => return Ok(v),
            Ok(Err(e)) => last = e.to_string(),
            Err(panic) => {
                last = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "worker panicked".into())
            }
        }
    }
    Err(last)
}

/// Runs `job` on sample indices `0..samples`, skipping those already in
/// `resume`. Results come back ordered by sample index, so the output does
/// not depend on the worker count. If any sample still fails after the
/// retries, the partial run is returned as the error value.
pub fn run_parallel<T, F>(
    samples: u64,
    options: RunOptions,
    resume: Option<PartialRun<T>>,
    job: F,
) -> std::result::Result<Vec<T>, PartialRun<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let mut state = resume.unwrap_or_default();
    state.failed.clear();
    let pending: Vec<u64> = (0..samples)
        .filter(|i| !state.completed.contains_key(i))
        .collect();
    let workers = options.workers.max(1).min(pending.len().max(1));

    let outcomes: Vec<Vec<(u64, Result<T, String>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let mine = shard(&pending, w, workers);
                let job = &job;
                scope.spawn(move || {
                    mine.into_iter()
                        .map(|i| (i, attempt(job, i, options.max_retries)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("attempt catches panics"))
            .collect()
    });

    for (i, outcome) in outcomes.into_iter().flatten() {
        match outcome {
            Ok(v) => {
                state.completed.insert(i, v);
            }
            Err(message) => {
                state.failed.insert(i, message);
            }
        }
    }
    if state.failed.is_empty() {
        Ok(state.completed.into_values().collect())
    } else {
        Err(state)
    }
}

impl<T> From<PartialRun<T>> for Error {
    fn from(run: PartialRun<T>) -> Self {
        Error::Aborted {
            completed: run.completed.len(),
            failed: run.failed.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn shards_are_disjoint_and_cover() {
        let indices: Vec<u64> = (0..200).collect();
        let mut seen = BTreeSet::new();
        for w in 0..8 {
            for i in shard(&indices, w, 8) {
                assert!(seen.insert(i));
                assert_eq!(i % 8, w as u64);
            }
        }
        assert_eq!(seen.len(), 200);
    }

    #[test]
    fn output_independent_of_workers() {
        let job = |i: u64| Ok((i as f64).sqrt().to_bits());
        let one = run_parallel(50, RunOptions { workers: 1, max_retries: 0 }, None, job).unwrap();
        let eight = run_parallel(50, RunOptions { workers: 8, max_retries: 0 }, None, job).unwrap();
        assert_eq!(one, eight);
        assert_eq!(one.len(), 50);
    }

    #[test]
    fn transient_failures_are_retried() {
        let calls = AtomicUsize::new(0);
        let job = |i: u64| {
            if i == 3 && calls.fetch_add(1, Ordering::SeqCst) == 0 {
                return Err(Error::InvalidConfig("transient".into()));
            }
            Ok(i)
        };
        let out = run_parallel(5, RunOptions { workers: 2, max_retries: 1 }, None, job).unwrap();
        assert_eq!(out, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn abort_leaves_resumable_manifest() {
        let job = |i: u64| {
            if i == 7 {
                panic!("sample {i} broke");
            }
            Ok(i * 10)
        };
        let partial = run_parallel(10, RunOptions { workers: 3, max_retries: 1 }, None, job).unwrap_err();
        assert_eq!(partial.completed.len(), 9);
        assert!(partial.failed[&7].contains("sample 7 broke"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partial.json");
        partial.save(&path).unwrap();
        let loaded: PartialRun<u64> = PartialRun::load(&path).unwrap();
        assert_eq!(loaded.completed, partial.completed);

        let calls = AtomicUsize::new(0);
        let fixed = |i: u64| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok(i * 10)
        };
        let out = run_parallel(10, RunOptions::default(), Some(loaded), fixed).unwrap();
        assert_eq!(out, (0..10).map(|i| i * 10).collect::<Vec<_>>());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }
}
