use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use flarelite::backend_native::ToolchainConfig;
use flarelite::bench::{self, BenchConfig, Mode};
use flarelite::storage::{csv, fbc};
use flarelite::tpch::gen::{register_dir, write_tables, Format, GenConfig};
use flarelite::tpch::{queries, schema};
use flarelite::{Backend, RunConfig, Session};

#[derive(Parser)]
#[command(name = "flarelite", version, about = "Compile analytical queries into native kernels")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate simplified TPC-H tables.
    Gen {
        #[arg(long, default_value_t = 0.01)]
        sf: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value = "fbc")]
        format: Format,
    },
    /// Run one query.
    Query(QueryArgs),
    /// Benchmark the query suite and write a JSON-lines report.
    Bench(BenchArgs),
    /// Convert a directory of tables between CSV and FBC.
    Convert {
        #[arg(long = "in", default_value = "csv")]
        from: Format,
        #[arg(long = "out", default_value = "fbc")]
        to: Format,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        /// Output directory (defaults to --data).
        #[arg(long)]
        dest: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Toolchain {
    /// TOML file with command, exe_command, work_dir, timeout_secs, dump_dir.
    #[arg(long)]
    toolchain_config: Option<PathBuf>,
    /// Keep every emitted C source in this directory.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

impl Toolchain {
    fn config(&self) -> Result<ToolchainConfig> {
        let mut cfg = match &self.toolchain_config {
            Some(p) => ToolchainConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => ToolchainConfig::from_env()?,
        };
        if let Some(d) = &self.dump_dir {
            cfg.dump_dir = Some(d.clone());
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Table,
    Csv,
}

#[derive(Args)]
struct QueryArgs {
    /// SQL text, or a path to a file containing it.
    #[arg(long, conflicts_with = "query", required_unless_present = "query")]
    sql: Option<String>,
    /// A suite query by name (q1, q3, q4, q6, q12, q13, q14, q19).
    #[arg(long)]
    query: Option<String>,
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "native")]
    backend: Backend,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Comma-separated core ids, one per thread.
    #[arg(long, value_delimiter = ',')]
    pin: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "table")]
    format: OutFormat,
    /// Print the physical plan and kernel IR instead of running.
    #[arg(long)]
    explain: bool,
    /// Print timings and I/O accounting to stderr.
    #[arg(long)]
    stats: bool,
    /// Run native kernels in a child process.
    #[arg(long)]
    isolate: bool,
    #[command(flatten)]
    toolchain: Toolchain,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "tpch-mini")]
    suite: String,
    /// Subset of the suite, comma-separated.
    #[arg(long, value_delimiter = ',')]
    queries: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    threads: Vec<usize>,
    #[arg(long, default_value_t = bench::MIN_REPEAT)]
    repeat: usize,
    #[arg(long, default_value = "bench.jsonl")]
    report: PathBuf,
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "hot,cold")]
    modes: Vec<Mode>,
    /// Skip the volcano baseline (COST records are then omitted).
    #[arg(long)]
    no_volcano: bool,
    /// Skip the loop interpreter.
    #[arg(long)]
    no_interpreter: bool,
    #[command(flatten)]
    toolchain: Toolchain,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Gen { sf, seed, out, format } => {
            let paths = write_tables(&GenConfig::new(sf, seed)?, &out, format)?;
            for p in paths {
                emit(format_args!("{}\n", p.display()))?;
            }
        }
        Cmd::Query(a) => query(a)?,
        Cmd::Bench(a) => run_bench(a)?,
        Cmd::Convert { from, to, data, dest } => convert(from, to, &data, dest.as_deref().unwrap_or(&data))?,
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (`| head`) ends the process quietly.
fn emit(args: std::fmt::Arguments) -> Result<()> {
    match std::io::stdout().lock().write_fmt(args) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => Ok(r?),
    }
}

fn query(a: QueryArgs) -> Result<()> {
    let mut s = Session::with_toolchain(a.toolchain.config()?);
    s.set_process_isolation(a.isolate);
    register_dir(s.catalog_mut(), &a.data)?;
    queries::register_udfs(&mut s)?;
    let df = match (&a.sql, &a.query) {
        (Some(text), _) => {
            let text = if Path::new(text).is_file() { std::fs::read_to_string(text)? } else { text.clone() };
            s.sql(&text)?
        }
        (None, Some(name)) => queries::build(&mut s, name)?,
        (None, None) => bail!("give --sql or --query"),
    };
    if a.explain {
        let p = s.prepare(&df)?;
        emit(format_args!("{}\n{}", p.physical, flarelite::kernel_ir::print_program(&p.program)))?;
        return Ok(());
    }
    let mut cfg = RunConfig::new(a.backend, a.threads);
    cfg.pin_cores = a.pin;
    let before = s.catalog().stats();
    let (t, stats) = s.execute_with_stats(&df, &cfg)?;
    let io = s.catalog().stats().since(&before);
    match a.format {
        OutFormat::Table => emit(format_args!("{t}\n"))?,
        OutFormat::Csv => emit(format_args!("{}", t.to_csv()))?,
    }
    if a.stats {
        if let Some(c) = stats.codegen {
            eprintln!("codegen: emit {:.3} ms, toolchain {:.3} ms", c.emit_ms, c.toolchain_ms);
        }
        eprintln!(
            "plan {:.3} ms, bind {:.3} ms, run {:.3} ms",
            stats.plan_ms,
            stats.bind_ms,
            stats.run.wall.as_secs_f64() * 1e3
        );
        eprintln!(
            "io: {} columns, {} payload bytes, {} header bytes, {} rows bound",
            io.columns_read, io.payload_bytes, io.header_bytes, io.rows
        );
    }
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    if a.suite != "tpch-mini" {
        bail!("unknown suite {:?} (only tpch-mini exists)", a.suite);
    }
    let mut cfg = BenchConfig::new(&a.data);
    if let Some(q) = a.queries {
        cfg.queries = q;
    }
    cfg.threads = a.threads;
    cfg.repeat = a.repeat;
    cfg.modes = a.modes;
    cfg.volcano = !a.no_volcano;
    cfg.interpreter = !a.no_interpreter;
    cfg.toolchain = a.toolchain.config()?;
    let mut w = BufWriter::new(File::create(&a.report).with_context(|| format!("creating {}", a.report.display()))?);
    let mut err = None;
    bench::run_with(&cfg, |r| {
        if err.is_none() {
            err = writeln!(w, "{r}").err();
        }
        summarize(r);
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    w.flush()?;
    eprintln!("report written to {}", a.report.display());
    Ok(())
}

fn summarize(r: &serde_json::Value) {
    match r["record"].as_str() {
        Some("exec") => eprintln!(
            "{:<4} {:<4} {:<11} x{:<2} {:>10.3} ms",
            r["query"].as_str().unwrap_or(""),
            r["mode"].as_str().unwrap_or(""),
            r["backend"].as_str().unwrap_or(""),
            r["threads"],
            r["exec_ms"].as_f64().unwrap_or(f64::NAN)
        ),
        Some("cost") => eprintln!(
            "{:<4} {:<4} COST({}) vs {} = {}",
            r["query"].as_str().unwrap_or(""),
            r["mode"].as_str().unwrap_or(""),
            r["system"].as_str().unwrap_or(""),
            r["baseline"].as_str().unwrap_or(""),
            r["cost"].as_str().unwrap_or("")
        ),
        _ => {}
    }
}

fn convert(from: Format, to: Format, data: &Path, dest: &Path) -> Result<()> {
    std::fs::create_dir_all(dest)?;
    for name in schema::TABLES {
        let src = data.join(format!("{name}.{}", from.extension()));
        if !src.exists() {
            bail!("missing {} (run `flarelite gen --format {}` first)", src.display(), from.extension());
        }
        let sch = schema::by_name(name).expect("known table");
        let table = match from {
            Format::Csv => csv::load_csv(&src, &sch, &csv::CsvOptions::default())?,
            Format::Fbc => fbc::read_fbc(&src, None)?,
        };
        let path = dest.join(format!("{name}.{}", to.extension()));
        match to {
            Format::Csv => csv::write_csv(&table, &path, b'|')?,
            Format::Fbc => fbc::write_fbc(&table, &path)?,
        }
        emit(format_args!("{}\n", path.display()))?;
    }
    Ok(())
}
