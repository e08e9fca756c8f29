//! Direct execution of a kernel program, statement by statement.
//!
//! This is the reference semantics for the native backend and for the
//! partitioned runtime.

use crate::catalog::{Catalog, DataType};
use crate::error::{Error, Result};
use crate::frontend::{ArithOp, CmpOp, JoinKind, Literal};
use crate::runtime::{self, LoopExecutor, RunConfig};
use crate::storage::{ColumnData, ColumnTable};
use crate::value::Value;

use super::hashtable::{canonical_f64_bits, combine, hash_bytes, hash_f64, hash_i64, RawIndex, NULL_HASH};
use super::ir::*;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IVal<'a> {
    Null,
    I(i64),
    F(f64),
    T(&'a [u8]),
    B(bool),
}

#[derive(Clone, Debug, PartialEq)]
enum Owned {
    Null,
    I(i64),
    F(f64),
    T(Vec<u8>),
    B(bool),
}

impl Owned {
    fn of(v: IVal<'_>) -> Owned {
        match v {
            IVal::Null => Owned::Null,
            IVal::I(x) => Owned::I(x),
            IVal::F(x) => Owned::F(x),
            IVal::T(x) => Owned::T(x.to_vec()),
            IVal::B(x) => Owned::B(x),
        }
    }

    fn get(&self) -> IVal<'_> {
        match self {
            Owned::Null => IVal::Null,
            Owned::I(x) => IVal::I(*x),
            Owned::F(x) => IVal::F(*x),
            Owned::T(x) => IVal::T(x),
            Owned::B(x) => IVal::B(*x),
        }
    }
}

fn to_value(v: IVal<'_>, ty: DataType) -> Value {
    match (v, ty) {
        (IVal::Null, _) => Value::Null,
        (IVal::I(x), DataType::Date) => Value::Date(x),
        (IVal::I(x), _) => Value::Int64(x),
        (IVal::F(x), _) => Value::Float64(x),
        (IVal::T(x), _) => Value::Text(x.to_vec()),
        (IVal::B(_), _) => unreachable!("boolean in a result column"),
    }
}

fn key_hash(keys: &[IVal<'_>]) -> u64 {
    keys.iter().fold(0, |h, k| {
        combine(
            h,
            match *k {
                IVal::Null => NULL_HASH,
                IVal::I(x) => hash_i64(x),
                IVal::F(x) => hash_f64(x),
                IVal::T(x) => hash_bytes(x),
                IVal::B(x) => hash_i64(x as i64),
            },
        )
    })
}

fn key_eq(a: &[IVal<'_>], b: &[Owned]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (*x, y.get()) {
        (IVal::Null, IVal::Null) => true,
        (IVal::I(p), IVal::I(q)) => p == q,
        (IVal::F(p), IVal::F(q)) => canonical_f64_bits(p) == canonical_f64_bits(q),
        (IVal::T(p), IVal::T(q)) => p == q,
        (IVal::B(p), IVal::B(q)) => p == q,
        _ => false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Num {
    I(i64),
    F(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Slot {
    v: Num,
    count: i64,
}

impl Slot {
    const EMPTY: Slot = Slot { v: Num::I(0), count: 0 };
}

fn fold(func: SlotFunc, a: Num, b: Num) -> Result<Num> {
    Ok(match (func, a, b) {
        (SlotFunc::Sum, Num::I(x), Num::I(y)) => Num::I(x.checked_add(y).ok_or(Error::Overflow)?),
        (SlotFunc::Sum, Num::F(x), Num::F(y)) => Num::F(x + y),
        (SlotFunc::Min, Num::I(x), Num::I(y)) => Num::I(x.min(y)),
        (SlotFunc::Max, Num::I(x), Num::I(y)) => Num::I(x.max(y)),
        (SlotFunc::Min, Num::F(x), Num::F(y)) => Num::F(if y.total_cmp(&x).is_lt() { y } else { x }),
        (SlotFunc::Max, Num::F(x), Num::F(y)) => Num::F(if y.total_cmp(&x).is_gt() { y } else { x }),
        (f, a, b) => unreachable!("slot {f:?} over {a:?} and {b:?}"),
    })
}

fn update(slot: &mut Slot, decl: &SlotDecl, arg: Option<IVal<'_>>) -> Result<()> {
    let x = match arg {
        None => {
            slot.count += 1;
            return Ok(());
        }
        Some(IVal::Null) => return Ok(()),
        Some(IVal::I(x)) => Num::I(x),
        Some(IVal::F(x)) => Num::F(x),
        Some(other) => unreachable!("aggregate over {other:?}"),
    };
    if decl.func != SlotFunc::Count {
        slot.v = if slot.count == 0 { x } else { fold(decl.func, slot.v, x)? };
    }
    slot.count += 1;
    Ok(())
}

fn merge_slot(dst: &mut Slot, src: &Slot, decl: &SlotDecl) -> Result<()> {
    if src.count == 0 {
        return Ok(());
    }
    if dst.count == 0 {
        *dst = *src;
        return Ok(());
    }
    if decl.func != SlotFunc::Count {
        dst.v = fold(decl.func, dst.v, src.v)?;
    }
    dst.count += src.count;
    Ok(())
}

fn finalize(slot: &Slot, fin: Finalize) -> IVal<'static> {
    match fin {
        Finalize::Count => IVal::I(slot.count),
        _ if slot.count == 0 => IVal::Null,
        Finalize::Value => match slot.v {
            Num::I(x) => IVal::I(x),
            Num::F(x) => IVal::F(x),
        },
        Finalize::Avg => match slot.v {
            Num::I(x) => IVal::F(x as f64 / slot.count as f64),
            Num::F(x) => IVal::F(x / slot.count as f64),
        },
    }
}

#[derive(Clone, Debug, Default)]
struct GroupTable {
    index: RawIndex,
    keys: Vec<Vec<Owned>>,
    slots: Vec<Vec<Slot>>,
}

impl GroupTable {
    fn entry(&mut self, keys: &[IVal<'_>], nslots: usize) -> &mut Vec<Slot> {
        let h = key_hash(keys);
        let e = match self.index.find(h, |e| key_eq(keys, &self.keys[e])) {
            Some(e) => e,
            None => {
                let e = self.index.insert(h);
                self.keys.push(keys.iter().map(|k| Owned::of(*k)).collect());
                self.slots.push(vec![Slot::EMPTY; nslots]);
                e
            }
        };
        &mut self.slots[e]
    }
}

#[derive(Clone, Debug, Default)]
struct JoinTable {
    index: RawIndex,
    keys: Vec<Vec<Owned>>,
    /// First and last row of each key's chain.
    chains: Vec<(usize, usize)>,
    rows: Vec<(Vec<Owned>, usize)>,
}

const END: usize = usize::MAX;

impl JoinTable {
    fn insert(&mut self, keys: &[IVal<'_>], payload: Vec<Owned>) {
        let row = self.rows.len();
        self.rows.push((payload, END));
        let h = key_hash(keys);
        match self.index.find(h, |e| key_eq(keys, &self.keys[e])) {
            Some(e) => {
                let tail = self.chains[e].1;
                self.rows[tail].1 = row;
                self.chains[e].1 = row;
            }
            None => {
                self.index.insert(h);
                self.keys.push(keys.iter().map(|k| Owned::of(*k)).collect());
                self.chains.push((row, row));
            }
        }
    }

    fn first(&self, keys: &[IVal<'_>]) -> usize {
        self.index.find(key_hash(keys), |e| key_eq(keys, &self.keys[e])).map_or(END, |e| self.chains[e].0)
    }
}

#[derive(Clone, Debug)]
enum Table {
    Group(GroupTable),
    Join(JoinTable),
}

/// Global or thread-local state of a running program.
#[derive(Clone, Debug)]
pub struct InterpState {
    accs: Vec<Vec<Slot>>,
    tables: Vec<Table>,
    buffers: Vec<Vec<Vec<Value>>>,
}

impl InterpState {
    fn new(prog: &KernelProgram) -> Self {
        InterpState {
            accs: prog.accumulators.iter().map(|a| vec![Slot::EMPTY; a.slots.len()]).collect(),
            tables: prog
                .hash_tables
                .iter()
                .map(|h| match h.purpose {
                    Purpose::JoinBuild => Table::Join(JoinTable::default()),
                    Purpose::GroupBy { .. } => Table::Group(GroupTable::default()),
                })
                .collect(),
            buffers: vec![Vec::new(); prog.buffers.len()],
        }
    }

    fn group(&self, ht: usize) -> &GroupTable {
        match &self.tables[ht] {
            Table::Group(g) => g,
            Table::Join(_) => unreachable!("hash table {ht} is a join table"),
        }
    }

    fn group_mut(&mut self, ht: usize) -> &mut GroupTable {
        match &mut self.tables[ht] {
            Table::Group(g) => g,
            Table::Join(_) => unreachable!("hash table {ht} is a join table"),
        }
    }

    fn join(&self, ht: usize) -> &JoinTable {
        match &self.tables[ht] {
            Table::Join(j) => j,
            Table::Group(_) => unreachable!("hash table {ht} is a group table"),
        }
    }

    fn join_mut(&mut self, ht: usize) -> &mut JoinTable {
        match &mut self.tables[ht] {
            Table::Join(j) => j,
            Table::Group(_) => unreachable!("hash table {ht} is a group table"),
        }
    }
}

/// Interpreter over bound input tables, one per program input.
pub struct Interpreter<'p> {
    prog: &'p KernelProgram,
    inputs: Vec<ColumnTable>,
}

impl<'p> Interpreter<'p> {
    pub fn new(prog: &'p KernelProgram, inputs: Vec<ColumnTable>) -> Result<Self> {
        check_inputs(prog, &inputs)?;
        Ok(Interpreter { prog, inputs })
    }

    fn operand<'a>(&'a self, o: &'a Operand, regs: &[IVal<'a>]) -> IVal<'a> {
        match o {
            Operand::Val(v) => regs[*v],
            Operand::Const(l) => match l {
                Literal::Int64(x) | Literal::Date(x) => IVal::I(*x),
                Literal::Float64(x) => IVal::F(*x),
                Literal::Text(x) => IVal::T(x),
                Literal::Bool(x) => IVal::B(*x),
            },
        }
    }

    fn eval<'a>(&'a self, op: &'a Op, regs: &[IVal<'a>]) -> Result<IVal<'a>> {
        let get = |o: &'a Operand| self.operand(o, regs);
        Ok(match op {
            Op::Arith(op, a, b) => arith(*op, get(a), get(b))?,
            Op::ToF64(a) => match get(a) {
                IVal::I(x) => IVal::F(x as f64),
                v => v,
            },
            Op::Cmp(op, a, b) => IVal::B(compare(*op, get(a), get(b))),
            Op::And(v) => IVal::B(v.iter().map(get).fold(true, |acc, x| acc & truthy(x))),
            Op::Or(v) => IVal::B(v.iter().map(get).fold(false, |acc, x| acc | truthy(x))),
            Op::Not(a) => IVal::B(!truthy(get(a))),
            Op::StartsWith(a, p) => IVal::B(matches!(get(a), IVal::T(s) if s.starts_with(p))),
            Op::Select(c, a, b) => {
                let (c, a, b) = (get(c), get(a), get(b));
                if truthy(c) {
                    a
                } else {
                    b
                }
            }
        })
    }

    fn read<'a>(&'a self, g: &'a InterpState, source: &LoopSource, f: &SourceField, row: usize) -> IVal<'a> {
        match (source, f) {
            (LoopSource::Scan { input }, SourceField::Column(c)) => {
                let col = self.inputs[*input].column(*c);
                if !col.is_valid(row) {
                    return IVal::Null;
                }
                match col.data() {
                    ColumnData::Int64(v) | ColumnData::Date(v) => IVal::I(v[row]),
                    ColumnData::Float64(v) => IVal::F(v[row]),
                    ColumnData::Text(t) => IVal::T(t.get(row)),
                }
            }
            (LoopSource::GroupTable { ht }, SourceField::Key(k)) => g.group(*ht).keys[row][*k].get(),
            (LoopSource::GroupTable { ht }, SourceField::Agg { slot, finalize: fin }) => {
                finalize(&g.group(*ht).slots[row][*slot], *fin)
            }
            (LoopSource::AccRow { acc }, SourceField::Agg { slot, finalize: fin }) => {
                finalize(&g.accs[*acc][*slot], *fin)
            }
            (s, f) => unreachable!("field {f:?} of {s:?}"),
        }
    }

    fn exec<'a>(
        &'a self,
        stmts: &'a [Stmt],
        regs: &mut Vec<IVal<'a>>,
        g: &'a InterpState,
        local: &mut InterpState,
    ) -> Result<()> {
        let prog = self.prog;
        for s in stmts {
            match s {
                Stmt::Let { dst, op } => regs[*dst] = self.eval(op, regs)?,
                Stmt::If { cond, body } => {
                    if truthy(self.operand(cond, regs)) {
                        self.exec(body, regs, g, local)?;
                    }
                }
                Stmt::AggUpdate { target, keys, updates } => {
                    let (decls, slots) = match target {
                        AggTarget::Acc(a) => (&prog.accumulators[*a].slots[..], &mut local.accs[*a]),
                        AggTarget::Group(h) => {
                            let keys: Vec<IVal<'_>> = keys.iter().map(|k| self.operand(k, regs)).collect();
                            let decls = prog.hash_tables[*h].slots();
                            (decls, local.group_mut(*h).entry(&keys, decls.len()))
                        }
                    };
                    for u in updates {
                        let arg = u.arg.as_ref().map(|a| self.operand(a, regs));
                        update(&mut slots[u.slot], &decls[u.slot], arg)?;
                    }
                }
                Stmt::HashInsert { ht, keys, payload } => {
                    let keys: Vec<IVal<'_>> = keys.iter().map(|k| self.operand(k, regs)).collect();
                    if keys.contains(&IVal::Null) {
                        continue;
                    }
                    let payload = payload.iter().map(|p| Owned::of(self.operand(p, regs))).collect();
                    local.join_mut(*ht).insert(&keys, payload);
                }
                Stmt::HashProbe { ht, kind, keys, payload, body } => {
                    let keys: Vec<IVal<'_>> = keys.iter().map(|k| self.operand(k, regs)).collect();
                    let table = g.join(*ht);
                    let mut row = if keys.contains(&IVal::Null) { END } else { table.first(&keys) };
                    match kind {
                        JoinKind::Inner | JoinKind::LeftOuter => {
                            if row == END && *kind == JoinKind::LeftOuter {
                                for p in payload {
                                    regs[*p] = IVal::Null;
                                }
                                self.exec(body, regs, g, local)?;
                            }
                            while row != END {
                                let (vals, next) = &table.rows[row];
                                for (p, v) in payload.iter().zip(vals) {
                                    regs[*p] = v.get();
                                }
                                self.exec(body, regs, g, local)?;
                                row = *next;
                            }
                        }
                        JoinKind::LeftSemi => {
                            if row != END {
                                self.exec(body, regs, g, local)?;
                            }
                        }
                        JoinKind::LeftAnti => {
                            if row == END {
                                self.exec(body, regs, g, local)?;
                            }
                        }
                    }
                }
                Stmt::Emit { buffer, values } => {
                    let schema = &prog.buffers[*buffer].schema;
                    let row = values
                        .iter()
                        .zip(schema.columns())
                        .map(|(v, c)| to_value(self.operand(v, regs), c.dtype))
                        .collect();
                    local.buffers[*buffer].push(row);
                }
            }
        }
        Ok(())
    }
}

fn truthy(v: IVal<'_>) -> bool {
    matches!(v, IVal::B(true))
}

fn arith<'a>(op: ArithOp, a: IVal<'a>, b: IVal<'a>) -> Result<IVal<'a>> {
    Ok(match (a, b) {
        (IVal::Null, _) | (_, IVal::Null) => IVal::Null,
        (IVal::I(x), IVal::I(y)) => match op {
            ArithOp::Add => IVal::I(x.checked_add(y).ok_or(Error::Overflow)?),
            ArithOp::Sub => IVal::I(x.checked_sub(y).ok_or(Error::Overflow)?),
            ArithOp::Mul => IVal::I(x.checked_mul(y).ok_or(Error::Overflow)?),
            ArithOp::Div if y == 0 => IVal::Null,
            ArithOp::Div => IVal::I(x.checked_div(y).ok_or(Error::Overflow)?),
        },
        (IVal::F(x), IVal::F(y)) => IVal::F(match op {
            ArithOp::Add => x + y,
            ArithOp::Sub => x - y,
            ArithOp::Mul => x * y,
            ArithOp::Div => x / y,
        }),
        (a, b) => unreachable!("arithmetic over {a:?} and {b:?}"),
    })
}

fn compare(op: CmpOp, a: IVal<'_>, b: IVal<'_>) -> bool {
    match (a, b) {
        (IVal::Null, _) | (_, IVal::Null) => false,
        (IVal::F(x), IVal::F(y)) => match op {
            CmpOp::Eq => x == y,
            CmpOp::NotEq => x != y,
            CmpOp::Lt => x < y,
            CmpOp::LtEq => x <= y,
            CmpOp::Gt => x > y,
            CmpOp::GtEq => x >= y,
        },
        (IVal::I(x), IVal::I(y)) => op.holds(x.cmp(&y)),
        (IVal::T(x), IVal::T(y)) => op.holds(x.cmp(y)),
        (IVal::B(x), IVal::B(y)) => op.holds(x.cmp(&y)),
        (a, b) => unreachable!("comparison of {a:?} and {b:?}"),
    }
}

impl LoopExecutor for Interpreter<'_> {
    type Global = InterpState;
    type Local = InterpState;

    fn program(&self) -> &KernelProgram {
        self.prog
    }

    fn new_global(&self) -> Result<InterpState> {
        Ok(InterpState::new(self.prog))
    }

    fn source_len(&self, g: &InterpState, l: usize) -> Result<usize> {
        Ok(match self.prog.loops[l].source {
            LoopSource::Scan { input } => self.inputs[input].row_count(),
            LoopSource::GroupTable { ht } => g.group(ht).keys.len(),
            LoopSource::AccRow { .. } => 1,
            LoopSource::Empty => 0,
        })
    }

    fn new_local(&self, _g: &InterpState, _l: usize) -> Result<InterpState> {
        Ok(InterpState::new(self.prog))
    }

    fn run_range(&self, g: &InterpState, local: &mut InterpState, l: usize, begin: usize, end: usize) -> Result<()> {
        let lp = &self.prog.loops[l];
        let mut regs = vec![IVal::Null; self.prog.vals.len()];
        for row in begin..end {
            for (v, f) in &lp.defs {
                regs[*v] = self.read(g, &lp.source, f, row);
            }
            self.exec(&lp.body, &mut regs, g, local)?;
        }
        Ok(())
    }

    fn merge(&self, g: &mut InterpState, local: InterpState, l: usize) -> Result<()> {
        let t = self.prog.loops[l].targets();
        let mut local = local;
        for a in t.accs {
            for (i, decl) in self.prog.accumulators[a].slots.iter().enumerate() {
                merge_slot(&mut g.accs[a][i], &local.accs[a][i], decl)?;
            }
        }
        for h in t.hash_tables {
            match std::mem::replace(&mut local.tables[h], Table::Join(JoinTable::default())) {
                Table::Group(src) => {
                    let decls = self.prog.hash_tables[h].slots();
                    let dst = g.group_mut(h);
                    for (keys, slots) in src.keys.iter().zip(&src.slots) {
                        let kv: Vec<IVal<'_>> = keys.iter().map(Owned::get).collect();
                        let entry = dst.entry(&kv, decls.len());
                        for (i, decl) in decls.iter().enumerate() {
                            merge_slot(&mut entry[i], &slots[i], decl)?;
                        }
                    }
                }
                Table::Join(src) => {
                    let dst = g.join_mut(h);
                    if dst.rows.is_empty() {
                        *dst = src;
                    } else {
                        for (keys, &(head, _)) in src.keys.iter().zip(&src.chains) {
                            let kv: Vec<IVal<'_>> = keys.iter().map(Owned::get).collect();
                            let mut row = head;
                            while row != END {
                                dst.insert(&kv, src.rows[row].0.clone());
                                row = src.rows[row].1;
                            }
                        }
                    }
                }
            }
        }
        for b in t.buffers {
            let rows = std::mem::take(&mut local.buffers[b]);
            g.buffers[b].extend(rows);
        }
        Ok(())
    }

    fn finish(&self, mut g: InterpState) -> Result<ColumnTable> {
        let spec = &self.prog.output;
        let types: Vec<DataType> = spec.schema.columns().iter().map(|c| c.dtype).collect();
        let rows = match &spec.source {
            OutputSource::Buffer(b) => std::mem::take(&mut g.buffers[*b]),
            OutputSource::Acc { acc, cols } => vec![cols
                .iter()
                .zip(&types)
                .map(|(c, t)| match c {
                    OutCol::Agg { slot, finalize: fin } => to_value(finalize(&g.accs[*acc][*slot], *fin), *t),
                    OutCol::Key(_) => unreachable!("key column of an ungrouped aggregate"),
                })
                .collect()],
            OutputSource::Groups { ht, cols } => {
                let table = g.group(*ht);
                (0..table.keys.len())
                    .map(|e| {
                        cols.iter()
                            .zip(&types)
                            .map(|(c, t)| match c {
                                OutCol::Key(k) => to_value(table.keys[e][*k].get(), *t),
                                OutCol::Agg { slot, finalize: fin } => {
                                    to_value(finalize(&table.slots[e][*slot], *fin), *t)
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        finish_output(spec, rows)
    }
}

/// Checks that bound tables match the program's input declarations.
pub fn check_inputs(prog: &KernelProgram, inputs: &[ColumnTable]) -> Result<()> {
    if inputs.len() != prog.inputs.len() {
        return Err(Error::Schema(format!("{} inputs bound for {} declared", inputs.len(), prog.inputs.len())));
    }
    for (decl, t) in prog.inputs.iter().zip(inputs) {
        let got: Vec<DataType> = t.schema().columns().iter().map(|c| c.dtype).collect();
        let want: Vec<DataType> = decl.schema.columns().iter().map(|c| c.dtype).collect();
        if got != want {
            return Err(Error::SchemaMismatch {
                table: decl.table.clone(),
                column: decl.schema.names().collect::<Vec<_>>().join(", "),
                reason: "bound column types differ from the program's input declaration".into(),
            });
        }
    }
    Ok(())
}

/// Fetches each program input from the catalog, projected to the declared
/// columns.
pub fn bind_inputs(prog: &KernelProgram, catalog: &Catalog) -> Result<Vec<ColumnTable>> {
    prog.inputs
        .iter()
        .map(|d| catalog.bind(&d.table, &d.schema.names().map(str::to_string).collect::<Vec<_>>()))
        .collect()
}

/// Runs a program single-threaded and returns its result.
pub fn ir_interpret(prog: &KernelProgram, inputs: &[ColumnTable]) -> Result<ColumnTable> {
    let interp = Interpreter::new(prog, inputs.to_vec())?;
    runtime::execute(&interp, &RunConfig::default()).map(|(t, _)| t)
}
