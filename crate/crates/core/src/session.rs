//! Entry point tying catalog, UDFs, planning and both backends together.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use crate::backend_native::{run_process, Artifact, CodegenTiming, NativeBackend, NativeExecutor, ToolchainConfig};
use crate::catalog::{Catalog, Schema};
use crate::error::Result;
use crate::frontend::{parse_sql, DataFrame};
use crate::kernel_ir::{bind_inputs, compile_plan, Interpreter, KernelProgram};
use crate::optimizer::{optimize, PhysicalPlan};
use crate::runtime::{execute, Backend, RunConfig, RunStats};
use crate::storage::ColumnTable;
use crate::udf::{UdfDef, UdfRegistry};

/// A query lowered all the way to a kernel program.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub physical: PhysicalPlan,
    pub program: KernelProgram,
}

#[derive(Clone, Debug, Default)]
pub struct ExecStats {
    /// Absent for the interpreter.
    pub codegen: Option<CodegenTiming>,
    pub plan_ms: f64,
    pub bind_ms: f64,
    pub run: RunStats,
}

/// Tables, UDFs and a lazily created native backend.
pub struct Session {
    catalog: Catalog,
    udfs: Arc<UdfRegistry>,
    toolchain: ToolchainConfig,
    native: OnceLock<NativeBackend>,
    isolate: bool,
}

impl Default for Session {
    fn default() -> Self {
        Session::new()
    }
}

impl Session {
    /// Toolchain defaults, with `FLARELITE_CC` applied.
    pub fn new() -> Self {
        let toolchain = ToolchainConfig::from_env().unwrap_or_default();
        Session::with_toolchain(toolchain)
    }

    pub fn with_toolchain(toolchain: ToolchainConfig) -> Self {
        Session {
            catalog: Catalog::new(),
            udfs: Arc::new(UdfRegistry::new()),
            toolchain,
            native: OnceLock::new(),
            isolate: false,
        }
    }

    /// Runs native kernels as child processes instead of loading them.
    pub fn set_process_isolation(&mut self, on: bool) {
        if self.isolate != on {
            self.isolate = on;
            self.native = OnceLock::new();
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn catalog_mut(&mut self) -> &mut Catalog {
        &mut self.catalog
    }

    pub fn register_table(&mut self, name: &str, table: ColumnTable) -> Result<()> {
        let schema: Schema = table.schema().clone();
        self.catalog.register_table(name, schema, table)
    }

    pub fn register_udf(&mut self, def: UdfDef) -> Result<()> {
        Arc::make_mut(&mut self.udfs).register(def)
    }

    pub fn udfs(&self) -> &Arc<UdfRegistry> {
        &self.udfs
    }

    pub fn sql(&self, text: &str) -> Result<DataFrame> {
        let plan = parse_sql(text, &self.catalog, self.udfs.as_ref())?;
        DataFrame::from_plan(plan, self.udfs.clone())
    }

    pub fn table(&self, name: &str) -> Result<DataFrame> {
        DataFrame::scan(&self.catalog, name, self.udfs.clone())
    }

    /// Inlines UDFs, optimizes and compiles to the loop IR.
    pub fn prepare(&self, df: &DataFrame) -> Result<Prepared> {
        let physical = optimize(&df.inlined()?)?;
        let program = compile_plan(&physical)?;
        Ok(Prepared { physical, program })
    }

    pub fn native(&self) -> Result<&NativeBackend> {
        if let Some(n) = self.native.get() {
            return Ok(n);
        }
        let mut n = NativeBackend::new(self.toolchain.clone())?;
        n.isolate = self.isolate;
        Ok(self.native.get_or_init(|| n))
    }

    pub fn execute(&self, df: &DataFrame, cfg: &RunConfig) -> Result<ColumnTable> {
        self.execute_with_stats(df, cfg).map(|(t, _)| t)
    }

    pub fn execute_with_stats(&self, df: &DataFrame, cfg: &RunConfig) -> Result<(ColumnTable, ExecStats)> {
        let start = Instant::now();
        let prepared = self.prepare(df)?;
        let plan_ms = start.elapsed().as_secs_f64() * 1e3;
        let (t, mut stats) = self.run_program(&prepared.program, cfg)?;
        stats.plan_ms = plan_ms;
        Ok((t, stats))
    }

    /// Binds inputs from the catalog and runs a compiled program.
    pub fn run_program(&self, prog: &KernelProgram, cfg: &RunConfig) -> Result<(ColumnTable, ExecStats)> {
        cfg.validate()?;
        let mut stats = ExecStats::default();
        let artifact = match cfg.backend {
            Backend::Native => {
                let (a, timing) = self.native()?.compile(prog)?;
                stats.codegen = Some(timing);
                Some(a)
            }
            Backend::Interpreter => None,
        };
        let bind = Instant::now();
        let inputs = bind_inputs(prog, &self.catalog)?;
        stats.bind_ms = bind.elapsed().as_secs_f64() * 1e3;
        let table = match artifact {
            None => {
                let (t, run) = execute(&Interpreter::new(prog, inputs)?, cfg)?;
                stats.run = run;
                t
            }
            Some(Artifact::Loaded(k)) => {
                let (t, run) = execute(&NativeExecutor::new(prog, k, inputs)?, cfg)?;
                stats.run = run;
                t
            }
            Some(Artifact::Executable(exe)) => {
                if cfg.num_threads > 1 {
                    log::warn!("process isolation runs kernels single-threaded");
                }
                let run = Instant::now();
                let t = run_process(prog, &exe, &inputs)?;
                stats.run.wall = run.elapsed();
                t
            }
        };
        Ok((table, stats))
    }
}
