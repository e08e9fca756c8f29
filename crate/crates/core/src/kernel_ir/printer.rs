//! Deterministic text form of a kernel program.

use std::fmt::{self, Write};

use crate::catalog::Schema;
use crate::frontend::{ArithOp, Expr};

use super::ir::*;

fn schema_list(s: &Schema) -> String {
    s.columns()
        .iter()
        .map(|c| format!("{} {}{}", c.name, VType::of(c.dtype).name(), if c.nullable { "?" } else { "" }))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fields(f: &[FieldDecl]) -> String {
    f.iter().map(|f| format!("{}{}", f.ty.name(), if f.nullable { "?" } else { "" })).collect::<Vec<_>>().join(", ")
}

fn slots(s: &[SlotDecl]) -> String {
    s.iter().map(|s| format!("{} {}", slot_name(s.func), s.ty.name())).collect::<Vec<_>>().join(", ")
}

fn slot_name(f: SlotFunc) -> &'static str {
    match f {
        SlotFunc::Sum => "sum",
        SlotFunc::Count => "count",
        SlotFunc::Min => "min",
        SlotFunc::Max => "max",
    }
}

fn fin_name(f: Finalize) -> &'static str {
    match f {
        Finalize::Value => "value",
        Finalize::Count => "count",
        Finalize::Avg => "avg",
    }
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Val(v) => format!("v{v}"),
        Operand::Const(l) => Expr::Literal(l.clone()).to_string(),
    }
}

fn operands(os: &[Operand]) -> String {
    os.iter().map(operand).collect::<Vec<_>>().join(", ")
}

fn op_text(op: &Op) -> String {
    match op {
        Op::Arith(a, x, y) => {
            let sym = match a {
                ArithOp::Add => "+",
                ArithOp::Sub => "-",
                ArithOp::Mul => "*",
                ArithOp::Div => "/",
            };
            format!("{} {sym} {}", operand(x), operand(y))
        }
        Op::ToF64(x) => format!("to_f64({})", operand(x)),
        Op::Cmp(c, x, y) => format!("{} {} {}", operand(x), c.symbol(), operand(y)),
        Op::And(v) => format!("and({})", operands(v)),
        Op::Or(v) => format!("or({})", operands(v)),
        Op::Not(x) => format!("not({})", operand(x)),
        Op::StartsWith(x, p) => {
            format!("starts_with({}, {})", operand(x), Expr::Literal(crate::frontend::Literal::Text(p.clone())))
        }
        Op::Select(c, x, y) => format!("select({}, {}, {})", operand(c), operand(x), operand(y)),
    }
}

fn stmts(out: &mut String, prog: &KernelProgram, body: &[Stmt], depth: usize) -> fmt::Result {
    let pad = "  ".repeat(depth);
    for s in body {
        match s {
            Stmt::Let { dst, op } => {
                let info = &prog.vals[*dst];
                writeln!(
                    out,
                    "{pad}v{dst}: {}{} = {}",
                    info.ty.name(),
                    if info.nullable { "?" } else { "" },
                    op_text(op)
                )?
            }
            Stmt::If { cond, body } => {
                writeln!(out, "{pad}if {} {{", operand(cond))?;
                stmts(out, prog, body, depth + 1)?;
                writeln!(out, "{pad}}}")?;
            }
            Stmt::AggUpdate { target, keys, updates } => {
                let (name, decls) = match target {
                    AggTarget::Acc(a) => (format!("acc {a}"), &prog.accumulators[*a].slots[..]),
                    AggTarget::Group(h) => (format!("ht {h} [{}]", operands(keys)), prog.hash_tables[*h].slots()),
                };
                let ups = updates
                    .iter()
                    .map(|u| {
                        let arg = u.arg.as_ref().map_or_else(|| "*".to_string(), operand);
                        format!("{}[{}] <- {arg}", slot_name(decls[u.slot].func), u.slot)
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                writeln!(out, "{pad}update {name}: {ups}")?;
            }
            Stmt::HashInsert { ht, keys, payload } => {
                writeln!(out, "{pad}insert ht {ht} [{}] -> [{}]", operands(keys), operands(payload))?
            }
            Stmt::HashProbe { ht, kind, keys, payload, body } => {
                let pay = payload.iter().map(|v| format!("v{v}")).collect::<Vec<_>>().join(", ");
                writeln!(out, "{pad}probe {} ht {ht} [{}] -> [{pay}] {{", kind.name(), operands(keys))?;
                stmts(out, prog, body, depth + 1)?;
                writeln!(out, "{pad}}}")?;
            }
            Stmt::Emit { buffer, values } => writeln!(out, "{pad}emit buffer {buffer} [{}]", operands(values))?,
        }
    }
    Ok(())
}

fn out_cols(cols: &[OutCol]) -> String {
    cols.iter()
        .map(|c| match c {
            OutCol::Key(k) => format!("key {k}"),
            OutCol::Agg { slot, finalize } => format!("{} {slot}", fin_name(*finalize)),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn print_program(prog: &KernelProgram) -> String {
    let mut out = String::new();
    write_program(&mut out, prog).expect("writing to a string");
    out
}

fn write_program(out: &mut String, prog: &KernelProgram) -> fmt::Result {
    for (i, d) in prog.inputs.iter().enumerate() {
        writeln!(out, "input {i} {}: {}", d.table, schema_list(&d.schema))?;
    }
    for (i, a) in prog.accumulators.iter().enumerate() {
        writeln!(out, "acc {i}: {}", slots(&a.slots))?;
    }
    for (i, h) in prog.hash_tables.iter().enumerate() {
        let mult = match h.multiplicity {
            Multiplicity::Unique => "unique",
            Multiplicity::Multi => "multi",
        };
        match &h.purpose {
            Purpose::JoinBuild => {
                writeln!(out, "ht {i} join {mult}: keys [{}] payload [{}]", fields(&h.keys), fields(&h.payload))?
            }
            Purpose::GroupBy { slots: s } => {
                writeln!(out, "ht {i} group {mult}: keys [{}] slots [{}]", fields(&h.keys), slots(s))?
            }
        }
    }
    for (i, b) in prog.buffers.iter().enumerate() {
        writeln!(out, "buffer {i}: {}", schema_list(&b.schema))?;
    }
    for (i, l) in prog.loops.iter().enumerate() {
        let src = match &l.source {
            LoopSource::Scan { input } => format!("scan input {input}"),
            LoopSource::GroupTable { ht } => format!("groups of ht {ht}"),
            LoopSource::AccRow { acc } => format!("row of acc {acc}"),
            LoopSource::Empty => "empty".to_string(),
        };
        writeln!(out, "loop {i} over {src}{}:", if l.is_parallel() { " (parallel)" } else { "" })?;
        for (v, f) in &l.defs {
            let info = &prog.vals[*v];
            let field = match f {
                SourceField::Column(c) => format!("column {c}"),
                SourceField::Key(k) => format!("key {k}"),
                SourceField::Agg { slot, finalize } => format!("{} {slot}", fin_name(*finalize)),
            };
            writeln!(
                out,
                "  v{v}: {}{} = {field}  # {}",
                info.ty.name(),
                if info.nullable { "?" } else { "" },
                info.hint
            )?;
        }
        stmts(out, prog, &l.body, 1)?;
    }
    let src = match &prog.output.source {
        OutputSource::Buffer(b) => format!("buffer {b}"),
        OutputSource::Acc { acc, cols } => format!("acc {acc} [{}]", out_cols(cols)),
        OutputSource::Groups { ht, cols } => format!("groups of ht {ht} [{}]", out_cols(cols)),
    };
    writeln!(out, "output {src}: {}", schema_list(&prog.output.schema))?;
    for p in &prog.output.post {
        match p {
            PostOp::Sort(keys) => {
                let k = keys.iter().map(|(i, d)| format!("{i}{}", if *d { " desc" } else { "" })).collect::<Vec<_>>();
                writeln!(out, "  sort [{}]", k.join(", "))?
            }
            PostOp::Limit(n) => writeln!(out, "  limit {n}")?,
        }
    }
    Ok(())
}
