//! Native backend: C emission, toolchain invocation and kernel loading.

mod emit;
mod kernel;
mod process;
mod toolchain;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

pub use emit::{cmd, emit_source, input_pair_count, status, ABI_VERSION};
pub use kernel::{descriptor_block, input_pairs, CompiledKernel, NativeExecutor, Pair, ENTRY_SYMBOL};
pub use process::{run_process, write_input_dump, DUMP_MAGIC};
pub use toolchain::{ArtifactKind, CodegenTiming, Toolchain, ToolchainConfig, ENV_COMMAND};

use crate::error::Result;
use crate::kernel_ir::KernelProgram;

/// Builds `src` as a shared library (or takes it from the cache) and loads it.
pub fn build_and_load(src: &str, toolchain: &Toolchain) -> Result<(Arc<CompiledKernel>, CodegenTiming)> {
    let (path, spent) = toolchain.build(src, ArtifactKind::Library)?;
    let kernel = Arc::new(CompiledKernel::load(path)?);
    Ok((kernel, CodegenTiming { emit_ms: 0.0, toolchain_ms: spent.as_secs_f64() * 1e3 }))
}

/// Emits and builds a program, returning only the timings.
pub fn measure_codegen(prog: &KernelProgram, toolchain: &Toolchain) -> Result<CodegenTiming> {
    let start = Instant::now();
    let src = emit_source(prog);
    let emit_ms = start.elapsed().as_secs_f64() * 1e3;
    let (_, spent) = toolchain.build(&src, ArtifactKind::Library)?;
    Ok(CodegenTiming { emit_ms, toolchain_ms: spent.as_secs_f64() * 1e3 })
}

/// What a program was compiled into.
#[derive(Clone, Debug)]
pub enum Artifact {
    Loaded(Arc<CompiledKernel>),
    Executable(PathBuf),
}

/// A toolchain plus the kernels already loaded from it.
#[derive(Debug)]
pub struct NativeBackend {
    toolchain: Toolchain,
    loaded: Mutex<HashMap<PathBuf, Arc<CompiledKernel>>>,
    /// Run kernels as child processes instead of loading them.
    pub isolate: bool,
}

impl NativeBackend {
    pub fn new(cfg: ToolchainConfig) -> Result<Self> {
        Ok(NativeBackend { toolchain: Toolchain::new(cfg)?, loaded: Mutex::new(HashMap::new()), isolate: false })
    }

    pub fn toolchain(&self) -> &Toolchain {
        &self.toolchain
    }

    pub fn compile(&self, prog: &KernelProgram) -> Result<(Artifact, CodegenTiming)> {
        let start = Instant::now();
        let src = emit_source(prog);
        let emit_ms = start.elapsed().as_secs_f64() * 1e3;
        let kind = if self.isolate { ArtifactKind::Executable } else { ArtifactKind::Library };
        let (path, spent) = self.toolchain.build(&src, kind)?;
        let timing = CodegenTiming { emit_ms, toolchain_ms: spent.as_secs_f64() * 1e3 };
        if self.isolate {
            return Ok((Artifact::Executable(path), timing));
        }
        let mut loaded = self.loaded.lock().unwrap_or_else(|e| e.into_inner());
        let kernel = match loaded.get(&path) {
            Some(k) => k.clone(),
            None => {
                let k = Arc::new(CompiledKernel::load(&path)?);
                loaded.insert(path, k.clone());
                k
            }
        };
        Ok((Artifact::Loaded(kernel), timing))
    }
}
