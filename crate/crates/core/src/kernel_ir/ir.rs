//! Data structures of the fused loop IR.
//!
//! A program is a sequence of loops. Each loop iterates a source (a bound
//! input table, the entries of a group-by table, or the single row of an
//! accumulator set), defines one value per source field at the top of the
//! body, and then runs straight-line SSA statements with nested guard,
//! probe and aggregation regions.

use crate::catalog::{DataType, Schema};
use crate::frontend::{ArithOp, CmpOp, JoinKind, Literal};

pub type ValId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VType {
    I64,
    F64,
    Date,
    Text,
    Bool,
}

impl VType {
    pub fn of(dt: DataType) -> VType {
        match dt {
            DataType::Int64 => VType::I64,
            DataType::Float64 => VType::F64,
            DataType::Date => VType::Date,
            DataType::Text => VType::Text,
        }
    }

    pub fn data_type(self) -> Option<DataType> {
        Some(match self {
            VType::I64 => DataType::Int64,
            VType::F64 => DataType::Float64,
            VType::Date => DataType::Date,
            VType::Text => DataType::Text,
            VType::Bool => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            VType::I64 => "i64",
            VType::F64 => "f64",
            VType::Date => "date",
            VType::Text => "text",
            VType::Bool => "bool",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValInfo {
    pub ty: VType,
    pub nullable: bool,
    /// Source-level name used by printers.
    pub hint: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Val(ValId),
    Const(Literal),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// Operands have the result type (integer operands of float arithmetic
    /// are converted by an explicit `ToF64` first).
    Arith(ArithOp, Operand, Operand),
    ToF64(Operand),
    /// Operands have the same type. Null compares false.
    Cmp(CmpOp, Operand, Operand),
    And(Vec<Operand>),
    Or(Vec<Operand>),
    Not(Operand),
    StartsWith(Operand, Vec<u8>),
    Select(Operand, Operand, Operand),
}

impl Op {
    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Op::Arith(_, a, b) | Op::Cmp(_, a, b) => vec![a, b],
            Op::ToF64(a) | Op::Not(a) | Op::StartsWith(a, _) => vec![a],
            Op::And(v) | Op::Or(v) => v.iter().collect(),
            Op::Select(c, a, b) => vec![c, a, b],
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match self {
            Op::Arith(_, a, b) | Op::Cmp(_, a, b) => vec![a, b],
            Op::ToF64(a) | Op::Not(a) | Op::StartsWith(a, _) => vec![a],
            Op::And(v) | Op::Or(v) => v.iter_mut().collect(),
            Op::Select(c, a, b) => vec![c, a, b],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotFunc {
    Sum,
    Count,
    Min,
    Max,
}

/// One aggregate state cell: a running value and the number of non-null
/// inputs folded into it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotDecl {
    pub func: SlotFunc,
    pub ty: VType,
}

/// How a slot becomes an output value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Finalize {
    /// The value, null when no input was folded.
    Value,
    /// The count.
    Count,
    /// value / count as float, null when no input was folded.
    Avg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotUpdate {
    pub slot: usize,
    /// `None` counts rows.
    pub arg: Option<Operand>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccDecl {
    pub slots: Vec<SlotDecl>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplicity {
    Unique,
    Multi,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Purpose {
    JoinBuild,
    GroupBy { slots: Vec<SlotDecl> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub ty: VType,
    pub nullable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashTableDecl {
    pub keys: Vec<FieldDecl>,
    pub payload: Vec<FieldDecl>,
    pub multiplicity: Multiplicity,
    pub purpose: Purpose,
}

impl HashTableDecl {
    pub fn slots(&self) -> &[SlotDecl] {
        match &self.purpose {
            Purpose::GroupBy { slots } => slots,
            Purpose::JoinBuild => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BufferDecl {
    pub schema: Schema,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputDecl {
    pub table: String,
    pub schema: Schema,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggTarget {
    Acc(usize),
    Group(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Let {
        dst: ValId,
        op: Op,
    },
    If {
        cond: Operand,
        body: Vec<Stmt>,
    },
    /// For group targets `keys` selects (or creates) the entry.
    AggUpdate {
        target: AggTarget,
        keys: Vec<Operand>,
        updates: Vec<SlotUpdate>,
    },
    /// Rows with a null key are not inserted.
    HashInsert {
        ht: usize,
        keys: Vec<Operand>,
        payload: Vec<Operand>,
    },
    /// Runs `body` per matching build row (inner), per match or once with
    /// null payload (left outer), once on any match (semi) or once on no
    /// match (anti). A null probe key matches nothing.
    HashProbe {
        ht: usize,
        kind: JoinKind,
        keys: Vec<Operand>,
        payload: Vec<ValId>,
        body: Vec<Stmt>,
    },
    Emit {
        buffer: usize,
        values: Vec<Operand>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoopSource {
    Scan {
        input: usize,
    },
    GroupTable {
        ht: usize,
    },
    AccRow {
        acc: usize,
    },
    /// Never iterates; what a constantly false filter compiles to.
    Empty,
}

/// A value defined from the current source row at the top of the body.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceField {
    Column(usize),
    Key(usize),
    Agg { slot: usize, finalize: Finalize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelLoop {
    pub source: LoopSource,
    pub defs: Vec<(ValId, SourceField)>,
    pub body: Vec<Stmt>,
}

impl KernelLoop {
    /// Whether the loop may run over partitioned ranges: it scans an input
    /// and builds no join table.
    pub fn is_parallel(&self) -> bool {
        fn builds(stmts: &[Stmt]) -> bool {
            stmts.iter().any(|s| match s {
                Stmt::HashInsert { .. } => true,
                Stmt::If { body, .. } | Stmt::HashProbe { body, .. } => builds(body),
                _ => false,
            })
        }
        matches!(self.source, LoopSource::Scan { .. }) && !builds(&self.body)
    }

    /// State written by the loop body.
    pub fn targets(&self) -> Targets {
        let mut t = Targets::default();
        fn walk(stmts: &[Stmt], t: &mut Targets) {
            for s in stmts {
                match s {
                    Stmt::AggUpdate { target: AggTarget::Acc(a), .. } => push(&mut t.accs, *a),
                    Stmt::AggUpdate { target: AggTarget::Group(h), .. } | Stmt::HashInsert { ht: h, .. } => {
                        push(&mut t.hash_tables, *h)
                    }
                    Stmt::Emit { buffer, .. } => push(&mut t.buffers, *buffer),
                    Stmt::If { body, .. } | Stmt::HashProbe { body, .. } => walk(body, t),
                    Stmt::Let { .. } => {}
                }
            }
        }
        fn push(v: &mut Vec<usize>, x: usize) {
            if !v.contains(&x) {
                v.push(x);
            }
        }
        walk(&self.body, &mut t);
        t.accs.sort_unstable();
        t.hash_tables.sort_unstable();
        t.buffers.sort_unstable();
        t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Targets {
    pub accs: Vec<usize>,
    pub hash_tables: Vec<usize>,
    pub buffers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OutCol {
    Key(usize),
    Agg { slot: usize, finalize: Finalize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum OutputSource {
    Buffer(usize),
    /// One row from an accumulator set.
    Acc {
        acc: usize,
        cols: Vec<OutCol>,
    },
    /// One row per group, in first-insertion order.
    Groups {
        ht: usize,
        cols: Vec<OutCol>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PostOp {
    /// Sort by `(column, descending)` keys, ties broken by every column
    /// ascending.
    Sort(Vec<(usize, bool)>),
    Limit(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub schema: Schema,
    pub source: OutputSource,
    pub post: Vec<PostOp>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelProgram {
    pub inputs: Vec<InputDecl>,
    pub vals: Vec<ValInfo>,
    pub accumulators: Vec<AccDecl>,
    pub hash_tables: Vec<HashTableDecl>,
    pub buffers: Vec<BufferDecl>,
    pub loops: Vec<KernelLoop>,
    pub output: OutputSpec,
}

impl KernelProgram {
    pub fn operand_type(&self, o: &Operand) -> (VType, bool) {
        match o {
            Operand::Val(v) => (self.vals[*v].ty, self.vals[*v].nullable),
            Operand::Const(l) => (literal_vtype(l), false),
        }
    }

    /// Every statement, depth first.
    pub fn statements(&self) -> Vec<&Stmt> {
        fn walk<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
            for s in stmts {
                out.push(s);
                if let Stmt::If { body, .. } | Stmt::HashProbe { body, .. } = s {
                    walk(body, out);
                }
            }
        }
        let mut out = Vec::new();
        for l in &self.loops {
            walk(&l.body, &mut out);
        }
        out
    }
}

pub fn literal_vtype(l: &Literal) -> VType {
    match l {
        Literal::Int64(_) => VType::I64,
        Literal::Float64(_) => VType::F64,
        Literal::Date(_) => VType::Date,
        Literal::Text(_) => VType::Text,
        Literal::Bool(_) => VType::Bool,
    }
}

/// Applies the final sort and limit to output rows and builds the table.
pub fn finish_output(
    spec: &OutputSpec,
    mut rows: Vec<Vec<crate::value::Value>>,
) -> crate::Result<crate::storage::ColumnTable> {
    for op in &spec.post {
        match op {
            PostOp::Sort(keys) => rows.sort_by(|a, b| {
                keys.iter()
                    .map(|&(i, desc)| {
                        let o = a[i].total_cmp(&b[i]);
                        if desc {
                            o.reverse()
                        } else {
                            o
                        }
                    })
                    .find(|o| o.is_ne())
                    .unwrap_or_else(|| crate::value::cmp_rows(a, b))
            }),
            PostOp::Limit(n) => rows.truncate(usize::try_from(*n).unwrap_or(usize::MAX)),
        }
    }
    crate::storage::ColumnTable::from_rows(spec.schema.clone(), &rows)
}
