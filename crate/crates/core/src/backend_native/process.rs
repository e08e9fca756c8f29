//! Process-isolation fallback: the kernel runs as a child executable that
//! reads an input dump and writes its result as an FBC file.
//!
//! Dump layout, little-endian: `"FLKIN1\0\0" | u64 pair_count`, then per
//! descriptor pair `u64 byte_len | u64 len | bytes`, where a byte length of
//! `u64::MAX` marks an absent buffer. The child runs every loop as a single
//! range and exits with the kernel status.

use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::Command;

use super::kernel::{check, input_pairs};
use crate::error::{Error, Result};
use crate::kernel_ir::{check_inputs, finish_output, KernelProgram};
use crate::storage::{fbc, ColumnTable};

pub const DUMP_MAGIC: &[u8; 8] = b"FLKIN1\0\0";

pub fn write_input_dump(inputs: &[ColumnTable], path: &Path) -> Result<()> {
    let pairs = input_pairs(inputs);
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(pairs.len() as u64).to_le_bytes())?;
    for p in &pairs {
        if p.base.is_null() {
            w.write_all(&u64::MAX.to_le_bytes())?;
            w.write_all(&p.len.to_le_bytes())?;
            continue;
        }
        w.write_all(&(p.bytes as u64).to_le_bytes())?;
        w.write_all(&p.len.to_le_bytes())?;
        // SAFETY: base/bytes describe a live slice of one of `inputs`.
        w.write_all(unsafe { std::slice::from_raw_parts(p.base, p.bytes) })?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `exe` (built from the program's source with `-DFLK_MAIN`) on the
/// inputs and reads back its result.
pub fn run_process(prog: &KernelProgram, exe: &Path, inputs: &[ColumnTable]) -> Result<ColumnTable> {
    check_inputs(prog, inputs)?;
    let dir = tempfile::Builder::new().prefix("flk-run").tempdir()?;
    let input = dir.path().join("input.bin");
    let output = dir.path().join("output.fbc");
    write_input_dump(inputs, &input)?;
    let out = Command::new(exe).arg(&input).arg(&output).output()?;
    match out.status.code() {
        Some(0) => {}
        Some(rc) if rc < 64 => check(rc)?,
        Some(rc) => {
            return Err(Error::Native(format!(
                "kernel process failed with exit code {rc}: {}",
                String::from_utf8_lossy(&out.stderr)
            )))
        }
        None => return Err(Error::Native(format!("kernel process killed: {}", out.status))),
    }
    let table = fbc::read_fbc(&output, None)?;
    finish_output(&prog.output, table.rows())
}
