//! Loading compiled kernels and driving them through the runtime protocol.

use std::ffi::c_void;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::emit::{cmd, status};
use crate::error::{Error, Result};
use crate::kernel_ir::{check_inputs, finish_output, KernelProgram};
use crate::runtime::LoopExecutor;
use crate::storage::{ColumnData, ColumnTable};
use crate::value::Value;

pub const ENTRY_SYMBOL: &[u8] = b"flk_entry";

type EntryFn = unsafe extern "C" fn(u32, *mut c_void, *const c_void, *mut c_void) -> i32;

/// A loaded kernel library.
pub struct CompiledKernel {
    entry: EntryFn,
    path: PathBuf,
    // keeps `entry` valid; dropped last
    _lib: libloading::Library,
}

impl std::fmt::Debug for CompiledKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompiledKernel").field("path", &self.path).finish()
    }
}

impl CompiledKernel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        // SAFETY: the library is one we emitted; its initializers are empty.
        let lib = unsafe { libloading::Library::new(&path) }
            .map_err(|e| Error::Native(format!("loading {}: {e}", path.display())))?;
        // SAFETY: the emitted source defines flk_entry with this signature.
        let entry: EntryFn = unsafe {
            *lib.get::<EntryFn>(ENTRY_SYMBOL).map_err(|e| Error::Native(format!("{}: {e}", path.display())))?
        };
        Ok(CompiledKernel { entry, path, _lib: lib })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// # Safety
    /// `arg` and `out` must match what command `c` expects.
    unsafe fn call(&self, c: u32, ctx: *mut c_void, arg: *const c_void, out: *mut c_void) -> Result<()> {
        check((self.entry)(c, ctx, arg, out))
    }
}

pub(crate) fn check(rc: i32) -> Result<()> {
    match rc {
        status::OK => Ok(()),
        status::OVERFLOW => Err(Error::Overflow),
        status::NOMEM => Err(Error::Native("out of memory".into())),
        status::BADARG => Err(Error::Native("descriptor block does not match the kernel".into())),
        other => Err(Error::Native(format!("kernel returned status {other}"))),
    }
}

/// One `{base, len}` pair of the descriptor block. A null base stands for
/// an absent buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub base: *const u8,
    pub len: u64,
    /// Bytes behind `base`.
    pub bytes: usize,
}

impl Pair {
    fn null(len: u64) -> Pair {
        Pair { base: std::ptr::null(), len, bytes: 0 }
    }

    fn of<T>(s: &[T], len: u64) -> Pair {
        Pair { base: s.as_ptr().cast(), len, bytes: std::mem::size_of_val(s) }
    }
}

/// Descriptor pairs for the bound inputs, in declaration order.
pub fn input_pairs(inputs: &[ColumnTable]) -> Vec<Pair> {
    let mut pairs = Vec::new();
    for t in inputs {
        let rows = t.row_count() as u64;
        pairs.push(Pair::null(rows));
        for col in t.columns() {
            match col.data() {
                ColumnData::Int64(v) | ColumnData::Date(v) => pairs.push(Pair::of(v, rows)),
                ColumnData::Float64(v) => pairs.push(Pair::of(v, rows)),
                ColumnData::Text(td) => {
                    pairs.push(Pair::of(td.arena(), td.arena().len() as u64));
                    pairs.push(Pair::of(td.offsets(), rows + 1));
                }
            }
            pairs.push(match col.validity() {
                Some(b) => Pair::of(b.bytes(), rows),
                None => Pair::null(rows),
            });
        }
    }
    pairs
}

/// Flattens pairs behind the header word: version 1 in the low half, pair
/// count in the high half.
pub fn descriptor_block(pairs: &[Pair]) -> Vec<u64> {
    let mut d = Vec::with_capacity(1 + 2 * pairs.len());
    d.push(1 | ((pairs.len() as u64) << 32));
    for p in pairs {
        d.push(p.base as usize as u64);
        d.push(p.len);
    }
    d
}

pub struct GlobalHandle {
    ptr: *mut c_void,
    kernel: Arc<CompiledKernel>,
}

pub struct LocalHandle {
    ptr: *mut c_void,
    kernel: Arc<CompiledKernel>,
}

// SAFETY: the kernel state is plain heap memory. The runtime only runs loops
// concurrently against a shared global that they read, each with its own
// local, and merges under `&mut`.
unsafe impl Send for GlobalHandle {}
unsafe impl Sync for GlobalHandle {}
unsafe impl Send for LocalHandle {}

impl Drop for GlobalHandle {
    fn drop(&mut self) {
        // SAFETY: ptr came from CREATE and is freed once.
        unsafe {
            let _ = self.kernel.call(cmd::FREE, self.ptr, std::ptr::null(), std::ptr::null_mut());
        }
    }
}

impl Drop for LocalHandle {
    fn drop(&mut self) {
        // SAFETY: ptr came from NEW_LOCAL and is freed once.
        unsafe {
            let _ = self.kernel.call(cmd::FREE_LOCAL, std::ptr::null_mut(), self.ptr, std::ptr::null_mut());
        }
    }
}

#[repr(C)]
struct RunArgs {
    lp: u64,
    begin: u64,
    end: u64,
    local: *mut c_void,
}

/// Runs a compiled program over bound inputs. The inputs are owned here so
/// the addresses in the descriptor block outlive the kernel state.
pub struct NativeExecutor<'p> {
    prog: &'p KernelProgram,
    kernel: Arc<CompiledKernel>,
    _inputs: Vec<ColumnTable>,
    desc: Vec<u64>,
}

impl<'p> NativeExecutor<'p> {
    pub fn new(prog: &'p KernelProgram, kernel: Arc<CompiledKernel>, inputs: Vec<ColumnTable>) -> Result<Self> {
        check_inputs(prog, &inputs)?;
        let desc = descriptor_block(&input_pairs(&inputs));
        Ok(NativeExecutor { prog, kernel, _inputs: inputs, desc })
    }
}

impl LoopExecutor for NativeExecutor<'_> {
    type Global = GlobalHandle;
    type Local = LocalHandle;

    fn program(&self) -> &KernelProgram {
        self.prog
    }

    fn new_global(&self) -> Result<GlobalHandle> {
        let mut ptr: *mut c_void = std::ptr::null_mut();
        // SAFETY: CREATE reads the descriptor block and writes one pointer.
        unsafe {
            self.kernel.call(
                cmd::CREATE,
                std::ptr::null_mut(),
                self.desc.as_ptr().cast(),
                (&mut ptr as *mut *mut c_void).cast(),
            )?;
        }
        Ok(GlobalHandle { ptr, kernel: self.kernel.clone() })
    }

    fn source_len(&self, g: &GlobalHandle, l: usize) -> Result<usize> {
        let l = l as u64;
        let mut n = 0u64;
        // SAFETY: SOURCE_LEN reads a u64 and writes a u64.
        unsafe {
            self.kernel.call(cmd::SOURCE_LEN, g.ptr, (&l as *const u64).cast(), (&mut n as *mut u64).cast())?;
        }
        Ok(n as usize)
    }

    fn new_local(&self, g: &GlobalHandle, _l: usize) -> Result<LocalHandle> {
        let mut ptr: *mut c_void = std::ptr::null_mut();
        // SAFETY: NEW_LOCAL writes one pointer.
        unsafe {
            self.kernel.call(cmd::NEW_LOCAL, g.ptr, std::ptr::null(), (&mut ptr as *mut *mut c_void).cast())?;
        }
        Ok(LocalHandle { ptr, kernel: self.kernel.clone() })
    }

    fn run_range(&self, g: &GlobalHandle, local: &mut LocalHandle, l: usize, begin: usize, end: usize) -> Result<()> {
        let a = RunArgs { lp: l as u64, begin: begin as u64, end: end as u64, local: local.ptr };
        // SAFETY: RUN reads the global and writes only to the local state.
        unsafe { self.kernel.call(cmd::RUN, g.ptr, (&a as *const RunArgs).cast(), std::ptr::null_mut()) }
    }

    fn merge(&self, g: &mut GlobalHandle, local: LocalHandle, l: usize) -> Result<()> {
        let a = RunArgs { lp: l as u64, begin: 0, end: 0, local: local.ptr };
        // SAFETY: exclusive access to the global through `&mut`.
        unsafe { self.kernel.call(cmd::MERGE, g.ptr, (&a as *const RunArgs).cast(), std::ptr::null_mut()) }
    }

    fn finish(&self, g: GlobalHandle) -> Result<ColumnTable> {
        let mut desc: *const u64 = std::ptr::null();
        // SAFETY: FINISH writes a pointer to a result block owned by the
        // global, which stays alive until `g` drops at the end of this call.
        unsafe {
            self.kernel.call(cmd::FINISH, g.ptr, std::ptr::null(), (&mut desc as *mut *const u64).cast())?;
            read_result(self.prog, desc)
        }
    }
}

/// # Safety
/// `desc` must be a result block produced by FINISH for `prog`.
unsafe fn read_result(prog: &KernelProgram, desc: *const u64) -> Result<ColumnTable> {
    let spec = &prog.output;
    let ncols = spec.schema.len();
    let header = *desc;
    if header as u32 != 1 || (header >> 32) as usize != 2 * ncols {
        return Err(Error::Native(format!("unexpected result block header {header:#x}")));
    }
    let rows = if ncols == 0 { 0 } else { *desc.add(2) as usize };
    let mut out: Vec<Vec<Value>> = vec![Vec::with_capacity(ncols); rows];
    for (i, def) in spec.schema.columns().iter().enumerate() {
        let vals = *desc.add(1 + 4 * i) as usize as *const u8;
        let nulls = *desc.add(3 + 4 * i) as usize as *const u8;
        for (r, row) in out.iter_mut().enumerate() {
            if *nulls.add(r) != 0 {
                row.push(Value::Null);
                continue;
            }
            let v = match def.dtype {
                crate::catalog::DataType::Int64 => Value::Int64(*(vals as *const i64).add(r)),
                crate::catalog::DataType::Date => Value::Date(*(vals as *const i64).add(r)),
                crate::catalog::DataType::Float64 => Value::Float64(*(vals as *const f64).add(r)),
                crate::catalog::DataType::Text => {
                    let s = vals.add(16 * r);
                    let p = *(s as *const *const u8);
                    let n = *(s.add(8) as *const u64) as usize;
                    Value::Text(if n == 0 { Vec::new() } else { std::slice::from_raw_parts(p, n).to_vec() })
                }
            };
            row.push(v);
        }
    }
    finish_output(spec, out)
}
