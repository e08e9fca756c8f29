//! Benchmark harness over the query suite. Produces one JSON-lines record per
//! measurement.
//!
//! Record kinds (field `record`):
//!
//! - `load`: `mode`, `table`, `rows`, `load_ms`. Hot mode reads every table
//!   into memory once; the time is reported here and never added to
//!   execution times. Cold mode only reads file directories.
//! - `codegen`: `query`, `emit_ms`, `toolchain_ms`. Always a fresh compile
//!   into a private cache directory.
//! - `exec`: `query`, `mode`, `backend` (`native`, `interpreter` or
//!   `volcano`), `threads`, `repeat`, `exec_ms` (median), `runs_ms`,
//!   `bind_ms` (median; file reads in cold mode), `rows_out`,
//!   `payload_bytes` and `columns_read` of one run, `speedup_vs_volcano`.
//! - `cost`: `query`, `mode`, `system`, `baseline`, `baseline_ms`, `cost`
//!   (a thread count or `"infinity"`), `rows` and a `note`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::backend_native::{measure_codegen, Toolchain, ToolchainConfig};
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::runtime::{cost_report, Backend, RunConfig};
use crate::session::Session;
use crate::storage::{csv, fbc};
use crate::tpch::{queries, schema};
use crate::volcano::volcano_interpret;

pub const MIN_REPEAT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Tables preloaded into memory.
    Hot,
    /// Every execution streams the needed columns from FBC files.
    Cold,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hot" => Ok(Mode::Hot),
            "cold" => Ok(Mode::Cold),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected hot or cold)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    /// Directory with `<table>.fbc` or `<table>.tbl` files.
    pub data_dir: PathBuf,
    pub queries: Vec<String>,
    pub threads: Vec<usize>,
    pub repeat: usize,
    pub modes: Vec<Mode>,
    /// Also time the volcano interpreter (the single-threaded baseline).
    pub volcano: bool,
    /// Also time the loop interpreter at each thread count.
    pub interpreter: bool,
    pub toolchain: ToolchainConfig,
}

impl BenchConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        BenchConfig {
            data_dir: data_dir.into(),
            queries: queries::SUITE.iter().map(|s| s.to_string()).collect(),
            threads: vec![1, 2, 4, 8],
            repeat: MIN_REPEAT,
            modes: vec![Mode::Hot, Mode::Cold],
            volcano: true,
            interpreter: true,
            toolchain: ToolchainConfig::from_env().unwrap_or_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeat < MIN_REPEAT {
            return Err(Error::Config(format!("repeat must be at least {MIN_REPEAT}, got {}", self.repeat)));
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return Err(Error::Config("thread counts must be positive".into()));
        }
        for q in &self.queries {
            if !queries::SUITE.contains(&q.as_str()) {
                return Err(Error::UnknownQuery(format!("{q:?} (suite: {})", queries::SUITE.join(", "))));
            }
        }
        Ok(())
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn load_catalog(dir: &Path, mode: Mode, records: &mut Vec<Json>) -> Result<Catalog> {
    let mut c = Catalog::new();
    for name in schema::TABLES {
        let fbc_path = dir.join(format!("{name}.fbc"));
        let csv_path = dir.join(format!("{name}.tbl"));
        let start = Instant::now();
        match mode {
            Mode::Cold => {
                if !fbc_path.exists() {
                    return Err(Error::UnknownTable(format!(
                        "{name} (cold mode streams {}; run `flarelite convert` first)",
                        fbc_path.display()
                    )));
                }
                c.register_fbc(name, &fbc_path)?;
            }
            Mode::Hot => {
                let table = if fbc_path.exists() {
                    fbc::read_fbc(&fbc_path, None)?
                } else if csv_path.exists() {
                    let s = schema::by_name(name).expect("known table");
                    csv::load_csv(&csv_path, &s, &csv::CsvOptions::default())?
                } else {
                    return Err(Error::UnknownTable(format!(
                        "{name} (no {name}.fbc or {name}.tbl in {}; run `flarelite gen` first)",
                        dir.display()
                    )));
                };
                c.register_table(name, table.schema().clone(), table)?;
            }
        }
        let rows = match &c.entry(name)?.source {
            crate::catalog::TableSource::Memory(t) => Some(t.row_count()),
            crate::catalog::TableSource::Fbc(_) => None,
        };
        records.push(json!({"record": "load", "mode": mode, "table": name, "rows": rows, "load_ms": ms(start)}));
    }
    Ok(c)
}

/// Runs the benchmark and returns its records in order.
pub fn run(cfg: &BenchConfig) -> Result<Vec<Json>> {
    let mut out = Vec::new();
    run_with(cfg, |r| out.push(r.clone()))?;
    Ok(out)
}

/// Like [`run`], handing each record to `sink` as soon as it exists.
pub fn run_with(cfg: &BenchConfig, mut sink: impl FnMut(&Json)) -> Result<()> {
    cfg.validate()?;
    let cache = tempfile::Builder::new().prefix("flarelite-bench").tempdir()?;
    let toolchain = ToolchainConfig { work_dir: cache.path().to_path_buf(), ..cfg.toolchain.clone() };
    let mut codegen_done = std::collections::HashSet::new();
    for &mode in &cfg.modes {
        let mut loads = Vec::new();
        let catalog = load_catalog(&cfg.data_dir, mode, &mut loads)?;
        loads.iter().for_each(&mut sink);
        let mut session = Session::with_toolchain(toolchain.clone());
        *session.catalog_mut() = catalog;
        for q in &cfg.queries {
            let df = queries::build(&mut session, q)?;
            let prepared = session.prepare(&df)?;
            if codegen_done.insert(q.clone()) {
                let t = measure_codegen(&prepared.program, &Toolchain::new(toolchain.clone())?)?;
                sink(&json!({"record": "codegen", "query": q, "emit_ms": t.emit_ms, "toolchain_ms": t.toolchain_ms}));
            }
            let mut volcano_ms = None;
            if cfg.volcano {
                let plan = df.inlined()?;
                let before = session.catalog().stats();
                let mut runs = Vec::new();
                let mut rows_out = 0;
                for _ in 0..cfg.repeat {
                    let start = Instant::now();
                    rows_out = volcano_interpret(&plan, session.catalog())?.row_count();
                    runs.push(ms(start));
                }
                let io = session.catalog().stats().since(&before);
                let m = median(&runs);
                volcano_ms = Some(m);
                sink(&json!({
                    "record": "exec", "query": q, "mode": mode, "backend": "volcano", "threads": 1,
                    "repeat": cfg.repeat, "exec_ms": m, "runs_ms": runs, "bind_ms": Json::Null, "rows_out": rows_out,
                    "payload_bytes": io.payload_bytes / cfg.repeat as u64,
                    "columns_read": io.columns_read / cfg.repeat as u64, "speedup_vs_volcano": 1.0,
                }));
            }
            let mut backends = vec![Backend::Native];
            if cfg.interpreter {
                backends.push(Backend::Interpreter);
            }
            let mut native = Vec::new();
            for backend in backends {
                for &threads in &cfg.threads {
                    let rc = RunConfig::new(backend, threads);
                    // warm-up: loads the kernel so runs measure execution only
                    session.run_program(&prepared.program, &rc)?;
                    let mut runs = Vec::new();
                    let mut binds = Vec::new();
                    let mut rows_out = 0;
                    let mut io = None;
                    for _ in 0..cfg.repeat {
                        let before = session.catalog().stats();
                        let (t, stats) = session.run_program(&prepared.program, &rc)?;
                        io.get_or_insert(session.catalog().stats().since(&before));
                        rows_out = t.row_count();
                        binds.push(stats.bind_ms);
                        runs.push(stats.bind_ms + stats.run.wall.as_secs_f64() * 1e3);
                    }
                    let m = median(&runs);
                    if backend == Backend::Native {
                        native.push((threads, m));
                    }
                    let io = io.unwrap_or_default();
                    sink(&json!({
                        "record": "exec", "query": q, "mode": mode,
                        "backend": if backend == Backend::Native { "native" } else { "interpreter" },
                        "threads": threads, "repeat": cfg.repeat, "exec_ms": m, "runs_ms": runs,
                        "bind_ms": median(&binds), "rows_out": rows_out, "payload_bytes": io.payload_bytes,
                        "columns_read": io.columns_read, "speedup_vs_volcano": volcano_ms.map(|v| v / m),
                    }));
                }
            }
            if let Some(v) = volcano_ms {
                for r in cost_records(q, mode, &native, v) {
                    sink(&r);
                }
            }
        }
    }
    Ok(())
}

/// COST of native against the single-threaded volcano baseline, and of the
/// volcano interpreter against single-threaded native. The volcano
/// interpreter has no parallel mode, so its only data point is one thread.
pub fn cost_records(query: &str, mode: Mode, native: &[(usize, f64)], volcano_ms: f64) -> Vec<Json> {
    let mut out = Vec::new();
    let n = cost_report(query, native, volcano_ms);
    out.push(json!({
        "record": "cost", "query": query, "mode": mode, "system": "native", "baseline": "volcano@1",
        "baseline_ms": volcano_ms, "cost": n.cost_label(), "rows": n.rows,
        "note": "smallest native thread count faster than the volcano interpreter on one thread",
    }));
    let native_1 = native.iter().find(|m| m.0 == 1).or(native.first());
    if let Some(&(_, native_ms)) = native_1 {
        let v = cost_report(query, &[(1, volcano_ms)], native_ms);
        out.push(json!({
            "record": "cost", "query": query, "mode": mode, "system": "volcano", "baseline": "native@1",
            "baseline_ms": native_ms, "cost": v.cost_label(), "rows": v.rows,
            "note": "the volcano interpreter is single-threaded by contract; only 1 thread is measured, so \
                     infinity means it never beats single-threaded native",
        }));
    }
    out
}
