#![allow(dead_code)]

pub mod csvgen;
pub mod fuzz;
pub mod plans;

use std::sync::OnceLock;

use flarelite::backend_native::{Artifact, NativeBackend, NativeExecutor, ToolchainConfig};
use flarelite::catalog::Catalog;
use flarelite::frontend::LogicalPlan;
use flarelite::kernel_ir::{bind_inputs, compile_plan, ir_interpret};
use flarelite::optimizer::optimize;
use flarelite::runtime::{execute, Backend, RunConfig};
use flarelite::tpch::gen::{generate, GenConfig};
use flarelite::value::{rows_match, rows_match_ordered, Value};
use flarelite::volcano::volcano_interpret;
use flarelite::{Error, Session};

pub const TOL: f64 = 1e-9;

pub type Rows = Vec<Vec<Value>>;

pub fn native() -> &'static NativeBackend {
    static B: OnceLock<NativeBackend> = OnceLock::new();
    B.get_or_init(|| NativeBackend::new(ToolchainConfig::from_env().unwrap()).unwrap())
}

pub fn tpch_session(sf: f64, seed: u64) -> Session {
    let mut s = Session::new();
    for (name, t) in generate(&GenConfig::new(sf, seed).unwrap()) {
        s.register_table(name, t).unwrap();
    }
    s
}

pub fn volcano(plan: &LogicalPlan, c: &Catalog) -> Result<Rows, Error> {
    volcano_interpret(plan, c).map(|t| t.rows())
}

pub fn ir(plan: &LogicalPlan, c: &Catalog) -> Result<Rows, Error> {
    let prog = compile_plan(&optimize(plan)?)?;
    let inputs = bind_inputs(&prog, c)?;
    ir_interpret(&prog, &inputs).map(|t| t.rows())
}

pub fn run_native(plan: &LogicalPlan, c: &Catalog, threads: usize) -> Result<Rows, Error> {
    let prog = compile_plan(&optimize(plan)?)?;
    let inputs = bind_inputs(&prog, c)?;
    let (art, _) = native().compile(&prog)?;
    let Artifact::Loaded(k) = art else { unreachable!("in-process backend") };
    let exec = NativeExecutor::new(&prog, k, inputs)?;
    execute(&exec, &RunConfig::new(Backend::Native, threads)).map(|(t, _)| t.rows())
}

/// Whether result order is part of the answer.
pub fn ordered(plan: &LogicalPlan) -> bool {
    match plan {
        LogicalPlan::Sort { .. } => true,
        LogicalPlan::Limit { input, .. } => matches!(**input, LogicalPlan::Sort { .. }),
        _ => false,
    }
}

pub fn compare(plan: &LogicalPlan, want: &Rows, got: &Rows) -> Result<(), String> {
    if ordered(plan) {
        rows_match_ordered(want, got, TOL)
    } else {
        rows_match(want, got, TOL)
    }
}

fn same_outcome(plan: &LogicalPlan, a: &Result<Rows, Error>, b: &Result<Rows, Error>) -> Result<(), String> {
    match (a, b) {
        (Ok(x), Ok(y)) => compare(plan, x, y),
        (Err(x), Err(y)) if std::mem::discriminant(x) == std::mem::discriminant(y) => Ok(()),
        (x, y) => Err(format!("{:?} vs {:?}", x.as_ref().map(|r| r.len()), y.as_ref().map(|r| r.len()))),
    }
}

/// Volcano, loop interpreter and native kernel on one plan.
pub struct Triple {
    pub volcano: Result<Rows, Error>,
    pub ir: Result<Rows, Error>,
    pub native: Result<Rows, Error>,
}

impl Triple {
    pub fn run(plan: &LogicalPlan, c: &Catalog, threads: usize) -> Triple {
        Triple { volcano: volcano(plan, c), ir: ir(plan, c), native: run_native(plan, c, threads) }
    }

    pub fn check(&self, plan: &LogicalPlan) -> Result<(), String> {
        same_outcome(plan, &self.volcano, &self.ir).map_err(|e| format!("volcano vs ir: {e}"))?;
        same_outcome(plan, &self.volcano, &self.native).map_err(|e| format!("volcano vs native: {e}"))?;
        Ok(())
    }
}
