//! Fused loop IR, its compiler, optimization passes and interpreter.

mod compile;
pub mod hashtable;
mod interp;
mod ir;
pub mod passes;
mod printer;
pub mod staging;

pub use compile::{compile_plan, compile_unoptimized};
pub use interp::{bind_inputs, check_inputs, ir_interpret, IVal, InterpState, Interpreter};
pub use ir::*;
pub use printer::print_program;

#[cfg(test)]
mod tests;
