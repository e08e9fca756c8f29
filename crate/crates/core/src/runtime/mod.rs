//! Partitioned execution of kernel loops over worker threads.
//!
//! Every loop runs as a set of contiguous ranges over its source. Each range
//! gets fresh thread-local state; after the loop the partials are merged into
//! the global state in ascending thread order. Loops that build join tables
//! or read breaker outputs run as a single range.

mod affinity;
mod cost;

use std::time::{Duration, Instant};

pub use cost::{cost_report, CostReport, CostRow};

use crate::error::{Error, Result};
use crate::kernel_ir::KernelProgram;
use crate::storage::ColumnTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Interpreter,
    Native,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interpreter" | "interp" => Ok(Backend::Interpreter),
            "native" => Ok(Backend::Native),
            other => Err(Error::Config(format!("unknown backend {other:?} (expected interpreter or native)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PartitionStrategy {
    #[default]
    ContiguousRanges,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub num_threads: usize,
    pub pin_cores: Option<Vec<usize>>,
    pub backend: Backend,
    pub partition: PartitionStrategy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            num_threads: 1,
            pin_cores: None,
            backend: Backend::Interpreter,
            partition: PartitionStrategy::ContiguousRanges,
        }
    }
}

impl RunConfig {
    pub fn new(backend: Backend, num_threads: usize) -> Self {
        RunConfig { num_threads, backend, ..RunConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_threads == 0 {
            return Err(Error::Config("num_threads must be at least 1".into()));
        }
        if let Some(pins) = &self.pin_cores {
            if pins.len() != self.num_threads {
                return Err(Error::Config(format!(
                    "pin list has {} cores for {} threads",
                    pins.len(),
                    self.num_threads
                )));
            }
            let mut seen = pins.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != pins.len() {
                return Err(Error::Config("pin list repeats a core".into()));
            }
        }
        Ok(())
    }
}

/// The per-backend half of the partitioning protocol.
pub trait LoopExecutor: Sync {
    type Global: Send + Sync;
    type Local: Send;

    fn program(&self) -> &KernelProgram;
    fn new_global(&self) -> Result<Self::Global>;
    /// Number of source rows of loop `l`, given the state left by earlier loops.
    fn source_len(&self, g: &Self::Global, l: usize) -> Result<usize>;
    fn new_local(&self, g: &Self::Global, l: usize) -> Result<Self::Local>;
    fn run_range(&self, g: &Self::Global, local: &mut Self::Local, l: usize, begin: usize, end: usize) -> Result<()>;
    fn merge(&self, g: &mut Self::Global, local: Self::Local, l: usize) -> Result<()>;
    /// Builds the result, including the final sort and limit.
    fn finish(&self, g: Self::Global) -> Result<ColumnTable>;
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoopStats {
    pub parallel: bool,
    pub source_len: usize,
    /// Rows handled by each range, in thread order.
    pub rows_per_thread: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct RunStats {
    pub loops: Vec<LoopStats>,
    pub wall: Duration,
    pub pinned: bool,
}

/// Splits `len` rows into `n` contiguous ranges whose sizes differ by at most one.
pub fn partition(len: usize, n: usize) -> Vec<(usize, usize)> {
    let n = n.max(1);
    let (base, extra) = (len / n, len % n);
    let mut out = Vec::with_capacity(n);
    let mut begin = 0;
    for i in 0..n {
        let end = begin + base + usize::from(i < extra);
        out.push((begin, end));
        begin = end;
    }
    out
}

/// Runs every loop of the executor's program under `cfg`.
pub fn execute<E: LoopExecutor>(exec: &E, cfg: &RunConfig) -> Result<(ColumnTable, RunStats)> {
    cfg.validate()?;
    let start = Instant::now();
    let prog = exec.program();
    let mut g = exec.new_global()?;
    let mut stats = RunStats::default();
    let mut pin_ok = cfg.pin_cores.is_some();
    for l in 0..prog.loops.len() {
        let len = exec.source_len(&g, l)?;
        let parallel = prog.loops[l].is_parallel() && cfg.num_threads > 1;
        let ranges = if parallel { partition(len, cfg.num_threads) } else { vec![(0, len)] };
        let locals: Vec<Result<E::Local>> = if ranges.len() == 1 {
            vec![run_one(exec, &g, l, ranges[0])]
        } else {
            let gref = &g;
            let pins = cfg.pin_cores.as_deref();
            let (locals, pinned): (Vec<_>, Vec<bool>) = std::thread::scope(|s| {
                let handles: Vec<_> = ranges
                    .iter()
                    .enumerate()
                    .map(|(t, &r)| {
                        s.spawn(move || {
                            let pinned = pins.map(|p| affinity::pin_current_thread(p[t]));
                            (run_one(exec, gref, l, r), pinned.unwrap_or(false))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).unzip()
            });
            if cfg.pin_cores.is_some() && pinned.iter().any(|p| !p) {
                pin_ok = false;
            }
            locals
        };
        for local in locals {
            exec.merge(&mut g, local?, l)?;
        }
        stats.loops.push(LoopStats {
            parallel,
            source_len: len,
            rows_per_thread: ranges.iter().map(|(b, e)| e - b).collect(),
        });
    }
    let table = exec.finish(g)?;
    if cfg.pin_cores.is_some() && !pin_ok {
        log::warn!("thread pinning is unavailable on this host; ran unpinned");
    }
    stats.pinned = pin_ok;
    stats.wall = start.elapsed();
    Ok((table, stats))
}

fn run_one<E: LoopExecutor>(exec: &E, g: &E::Global, l: usize, (begin, end): (usize, usize)) -> Result<E::Local> {
    let mut local = exec.new_local(g, l)?;
    exec.run_range(g, &mut local, l, begin, end)?;
    Ok(local)
}

/// Number of physical cores, or logical CPUs when the topology is unknown.
pub fn physical_cores() -> usize {
    affinity::physical_cores()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_covers_every_row_once() {
        for len in [0, 1, 7, 100, 101] {
            for n in 1..9 {
                let r = partition(len, n);
                assert_eq!(r.len(), n);
                assert_eq!(r[0].0, 0);
                assert_eq!(r[n - 1].1, len);
                assert!(r.windows(2).all(|w| w[0].1 == w[1].0));
                assert_eq!(r.iter().map(|(b, e)| e - b).sum::<usize>(), len);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(Backend::Interpreter, 2);
        assert!(c.validate().is_ok());
        c.pin_cores = Some(vec![0]);
        assert!(c.validate().is_err());
        c.pin_cores = Some(vec![1, 1]);
        assert!(c.validate().is_err());
        c.num_threads = 0;
        assert!(c.validate().is_err());
    }
}
