//! Produce/consume compilation of a physical plan into loops.
//!
//! `produce` on a node drives its input; the consumer callback receives the
//! current row as column bindings and appends statements to the open loop.
//! Scans, group tables and accumulator rows open loops; hash builds and
//! aggregates close them.

use crate::error::{Error, Result};
use crate::frontend::{AggFunc, ArithOp, BoolOp, CmpOp, Expr, Literal};
use crate::optimizer::{PhysNode, PhysOp, PhysicalPlan, Role};

use super::ir::*;
use super::passes;

#[derive(Clone, Debug)]
struct Binding {
    name: String,
    op: Operand,
}

type Env = Vec<Binding>;

struct OpenLoop {
    pipeline: usize,
    source: LoopSource,
    defs: Vec<(ValId, SourceField)>,
    blocks: Vec<Vec<Stmt>>,
}

struct Builder {
    prog: KernelProgram,
    loops: Vec<Option<KernelLoop>>,
    open: Option<OpenLoop>,
}

type Consumer<'c> = &'c mut dyn FnMut(&mut Builder, &Env) -> Result<()>;

impl Builder {
    fn new_val(&mut self, ty: VType, nullable: bool, hint: &str) -> ValId {
        self.prog.vals.push(ValInfo { ty, nullable, hint: hint.to_string() });
        self.prog.vals.len() - 1
    }

    fn emit(&mut self, s: Stmt) {
        let open = self.open.as_mut().expect("statement outside a loop");
        open.blocks.last_mut().expect("open block").push(s);
    }

    fn let_(&mut self, op: Op, ty: VType, nullable: bool, hint: &str) -> Operand {
        let dst = self.new_val(ty, nullable, hint);
        self.emit(Stmt::Let { dst, op });
        Operand::Val(dst)
    }

    fn begin_block(&mut self) {
        self.open.as_mut().expect("open loop").blocks.push(Vec::new());
    }

    fn end_block(&mut self) -> Vec<Stmt> {
        self.open.as_mut().expect("open loop").blocks.pop().expect("open block")
    }

    fn open_loop(&mut self, pipeline: usize, source: LoopSource) {
        assert!(self.open.is_none(), "loops do not nest");
        self.open = Some(OpenLoop { pipeline, source, defs: Vec::new(), blocks: vec![Vec::new()] });
    }

    fn def(&mut self, field: SourceField, ty: VType, nullable: bool, hint: &str) -> Operand {
        let v = self.new_val(ty, nullable, hint);
        self.open.as_mut().expect("open loop").defs.push((v, field));
        Operand::Val(v)
    }

    fn close_loop(&mut self) -> Result<()> {
        let mut open = self.open.take().expect("open loop");
        let body = open.blocks.pop().expect("loop body");
        let slot = self
            .loops
            .get_mut(open.pipeline)
            .ok_or_else(|| Error::Unsupported(format!("pipeline {} out of range", open.pipeline)))?;
        if slot.is_some() {
            return Err(Error::Unsupported(format!("pipeline {} compiled twice", open.pipeline)));
        }
        *slot = Some(KernelLoop { source: open.source, defs: open.defs, body });
        Ok(())
    }

    fn ty(&self, o: &Operand) -> (VType, bool) {
        self.prog.operand_type(o)
    }

    fn cast_f64(&mut self, o: Operand) -> Operand {
        match o {
            Operand::Const(Literal::Int64(v)) => Operand::Const(Literal::Float64(v as f64)),
            Operand::Val(_) if self.ty(&o).0 == VType::I64 => {
                let nullable = self.ty(&o).1;
                self.let_(Op::ToF64(o), VType::F64, nullable, "")
            }
            o => o,
        }
    }

    /// Brings two numeric operands to a common type.
    fn unify(&mut self, a: Operand, b: Operand) -> (Operand, Operand, VType) {
        let (ta, tb) = (self.ty(&a).0, self.ty(&b).0);
        if ta == tb {
            (a, b, ta)
        } else if matches!((ta, tb), (VType::I64, VType::F64) | (VType::F64, VType::I64)) {
            (self.cast_f64(a), self.cast_f64(b), VType::F64)
        } else {
            (a, b, ta)
        }
    }

    fn cmp(&mut self, op: CmpOp, a: Operand, b: Operand) -> Operand {
        let (a, b, _) = self.unify(a, b);
        self.let_(Op::Cmp(op, a, b), VType::Bool, false, "")
    }

    fn expr(&mut self, e: &Expr, env: &Env) -> Result<Operand> {
        Ok(match e {
            Expr::Column(name) => env.iter().find(|b| b.name == *name).map(|b| b.op.clone()).ok_or_else(|| {
                Error::UnknownColumn { name: name.clone(), candidates: env.iter().map(|b| b.name.clone()).collect() }
            })?,
            Expr::Literal(l) => Operand::Const(l.clone()),
            Expr::Arith(op, l, r) => {
                let (a, b) = (self.expr(l, env)?, self.expr(r, env)?);
                let nullable = self.ty(&a).1 || self.ty(&b).1;
                let (a, b, ty) = self.unify(a, b);
                let div_null = *op == ArithOp::Div && ty == VType::I64;
                self.let_(Op::Arith(*op, a, b), ty, nullable || div_null, "")
            }
            Expr::Cmp(op, l, r) => {
                let (a, b) = (self.expr(l, env)?, self.expr(r, env)?);
                self.cmp(*op, a, b)
            }
            Expr::Between(..) => {
                let parts = self.conjuncts(e, env)?;
                self.let_(Op::And(parts), VType::Bool, false, "")
            }
            Expr::Bool(BoolOp::Not, args) => {
                let a = self.expr(&args[0], env)?;
                self.let_(Op::Not(a), VType::Bool, false, "")
            }
            Expr::Bool(op, args) => {
                let ops = args.iter().map(|a| self.expr(a, env)).collect::<Result<Vec<_>>>()?;
                let op = if *op == BoolOp::And { Op::And(ops) } else { Op::Or(ops) };
                self.let_(op, VType::Bool, false, "")
            }
            Expr::StartsWith(x, p) => {
                let a = self.expr(x, env)?;
                self.let_(Op::StartsWith(a, p.clone()), VType::Bool, false, "")
            }
            Expr::If(c, x, y) => {
                let c = self.expr(c, env)?;
                let (a, b) = (self.expr(x, env)?, self.expr(y, env)?);
                let nullable = self.ty(&a).1 || self.ty(&b).1;
                let (a, b, ty) = self.unify(a, b);
                self.let_(Op::Select(c, a, b), ty, nullable, "")
            }
            Expr::Udf(name, _) => {
                return Err(Error::Unsupported(format!("UDF {name} was not inlined before compilation")))
            }
        })
    }

    /// Flattened conjunction; `between` becomes two comparisons.
    fn conjuncts(&mut self, e: &Expr, env: &Env) -> Result<Vec<Operand>> {
        Ok(match e {
            Expr::Bool(BoolOp::And, args) => {
                let mut out = Vec::new();
                for a in args {
                    out.extend(self.conjuncts(a, env)?);
                }
                out
            }
            Expr::Between(x, lo, hi) => {
                let v = self.expr(x, env)?;
                let (l, h) = (self.expr(lo, env)?, self.expr(hi, env)?);
                vec![self.cmp(CmpOp::GtEq, v.clone(), l), self.cmp(CmpOp::LtEq, v, h)]
            }
            _ => vec![self.expr(e, env)?],
        })
    }

    fn produce(&mut self, node: &PhysNode, k: Consumer) -> Result<()> {
        match &node.op {
            PhysOp::Scan { table, .. } => {
                let input = self.prog.inputs.len();
                self.prog.inputs.push(InputDecl { table: table.clone(), schema: node.schema.clone() });
                self.open_loop(node.pipeline, LoopSource::Scan { input });
                let env = self.source_env(node, SourceField::Column);
                k(self, &env)?;
                self.close_loop()
            }
            PhysOp::Empty => {
                self.open_loop(node.pipeline, LoopSource::Empty);
                let env = self.source_env(node, SourceField::Column);
                k(self, &env)?;
                self.close_loop()
            }
            PhysOp::Filter { predicate } => self.produce(&node.inputs[0], &mut |b, env| {
                let parts = b.conjuncts(predicate, env)?;
                let cond = if parts.len() == 1 {
                    parts.into_iter().next().unwrap()
                } else {
                    b.let_(Op::And(parts), VType::Bool, false, "")
                };
                b.begin_block();
                k(b, env)?;
                let body = b.end_block();
                b.emit(Stmt::If { cond, body });
                Ok(())
            }),
            PhysOp::Project { exprs } => self.produce(&node.inputs[0], &mut |b, env| {
                let mut out = Vec::with_capacity(exprs.len());
                for (e, name) in exprs {
                    let op = b.expr(e, env)?;
                    out.push(Binding { name: name.clone(), op });
                }
                k(b, &out)
            }),
            PhysOp::HashJoin { kind, on } => {
                let (left, right) = (&node.inputs[0], &node.inputs[1]);
                let ht = self.prog.hash_tables.len();
                let payload: Vec<FieldDecl> = if kind.emits_right() {
                    right
                        .schema
                        .columns()
                        .iter()
                        .map(|c| FieldDecl { ty: VType::of(c.dtype), nullable: c.nullable })
                        .collect()
                } else {
                    Vec::new()
                };
                self.prog.hash_tables.push(HashTableDecl {
                    keys: Vec::new(),
                    payload: payload.clone(),
                    multiplicity: Multiplicity::Multi,
                    purpose: Purpose::JoinBuild,
                });
                self.produce(right, &mut |b, env| {
                    let keys = on.iter().map(|(_, r)| b.expr(r, env)).collect::<Result<Vec<_>>>()?;
                    b.prog.hash_tables[ht].keys =
                        keys.iter().map(|k| FieldDecl { ty: b.ty(k).0, nullable: false }).collect();
                    let payload =
                        if kind.emits_right() { env.iter().map(|x| x.op.clone()).collect() } else { Vec::new() };
                    b.emit(Stmt::HashInsert { ht, keys, payload });
                    Ok(())
                })?;
                let outer = *kind == crate::frontend::JoinKind::LeftOuter;
                self.produce(left, &mut |b, env| {
                    let keys = on.iter().map(|(l, _)| b.expr(l, env)).collect::<Result<Vec<_>>>()?;
                    let mut out = env.clone();
                    let mut vals = Vec::new();
                    for (c, f) in right.schema.columns().iter().zip(&payload) {
                        let v = b.new_val(f.ty, f.nullable || outer, &c.name);
                        vals.push(v);
                        out.push(Binding { name: c.name.clone(), op: Operand::Val(v) });
                    }
                    b.begin_block();
                    k(b, &out)?;
                    let body = b.end_block();
                    b.emit(Stmt::HashProbe { ht, kind: *kind, keys, payload: vals, body });
                    Ok(())
                })
            }
            PhysOp::Aggregate { group_by, aggs } => {
                let (target, cols) = self.aggregate(node, group_by, aggs)?;
                let Role::Breaker { output: Some(out) } = node.role else {
                    return Err(Error::Unsupported("aggregate in the middle of a pipeline".into()));
                };
                let source = match target {
                    AggTarget::Acc(acc) => LoopSource::AccRow { acc },
                    AggTarget::Group(ht) => LoopSource::GroupTable { ht },
                };
                self.open_loop(out, source);
                let mut env = Vec::new();
                for (c, oc) in node.schema.columns().iter().zip(&cols) {
                    let field = match oc {
                        OutCol::Key(i) => SourceField::Key(*i),
                        OutCol::Agg { slot, finalize } => SourceField::Agg { slot: *slot, finalize: *finalize },
                    };
                    let op = self.def(field, VType::of(c.dtype), c.nullable, &c.name);
                    env.push(Binding { name: c.name.clone(), op });
                }
                k(self, &env)?;
                self.close_loop()
            }
            PhysOp::Sort { .. } => Err(Error::Unsupported("sort below the query root".into())),
            PhysOp::Limit { .. } => Err(Error::Unsupported("limit below the query root".into())),
        }
    }

    fn source_env(&mut self, node: &PhysNode, field: impl Fn(usize) -> SourceField) -> Env {
        node.schema
            .columns()
            .iter()
            .enumerate()
            .map(|(i, c)| Binding {
                name: c.name.clone(),
                op: self.def(field(i), VType::of(c.dtype), c.nullable, &c.name),
            })
            .collect()
    }

    /// Compiles the aggregate's input pipeline, ending in state updates.
    fn aggregate(
        &mut self,
        node: &PhysNode,
        group_by: &[(Expr, String)],
        aggs: &[crate::frontend::AggExpr],
    ) -> Result<(AggTarget, Vec<OutCol>)> {
        let input_schema = &node.inputs[0].schema;
        let mut slots = Vec::new();
        let mut cols: Vec<OutCol> = (0..group_by.len()).map(OutCol::Key).collect();
        for (i, a) in aggs.iter().enumerate() {
            let out = &node.schema.columns()[group_by.len() + i];
            let arg_ty = match &a.arg {
                Some(e) => VType::of(
                    e.infer(input_schema, &crate::frontend::NoUdfs)?
                        .value()
                        .ok_or_else(|| Error::ty(format!("aggregate over boolean {e}")))?,
                ),
                None => VType::I64,
            };
            let (func, ty, finalize) = match a.func {
                AggFunc::Sum => (SlotFunc::Sum, arg_ty, Finalize::Value),
                AggFunc::Avg => (SlotFunc::Sum, arg_ty, Finalize::Avg),
                AggFunc::Count => (SlotFunc::Count, VType::I64, Finalize::Count),
                AggFunc::Min => (SlotFunc::Min, arg_ty, Finalize::Value),
                AggFunc::Max => (SlotFunc::Max, arg_ty, Finalize::Value),
            };
            debug_assert!(out.dtype == VType::of(out.dtype).data_type().unwrap());
            slots.push(SlotDecl { func, ty });
            cols.push(OutCol::Agg { slot: i, finalize });
        }
        let target = if group_by.is_empty() {
            self.prog.accumulators.push(AccDecl { slots });
            AggTarget::Acc(self.prog.accumulators.len() - 1)
        } else {
            let keys = node.schema.columns()[..group_by.len()]
                .iter()
                .map(|c| FieldDecl { ty: VType::of(c.dtype), nullable: c.nullable })
                .collect();
            self.prog.hash_tables.push(HashTableDecl {
                keys,
                payload: Vec::new(),
                multiplicity: Multiplicity::Unique,
                purpose: Purpose::GroupBy { slots },
            });
            AggTarget::Group(self.prog.hash_tables.len() - 1)
        };
        self.produce(&node.inputs[0], &mut |b, env| {
            let keys = group_by.iter().map(|(e, _)| b.expr(e, env)).collect::<Result<Vec<_>>>()?;
            let mut updates = Vec::new();
            for (slot, a) in aggs.iter().enumerate() {
                let arg = match &a.arg {
                    Some(e) => Some(b.expr(e, env)?),
                    None => None,
                };
                updates.push(SlotUpdate { slot, arg });
            }
            b.emit(Stmt::AggUpdate { target, keys, updates });
            Ok(())
        })?;
        Ok((target, cols))
    }
}

/// Lowers a physical plan to loops without running the cleanup passes.
pub fn compile_unoptimized(plan: &PhysicalPlan) -> Result<KernelProgram> {
    let mut node = &plan.root;
    let mut post = Vec::new();
    let out_schema = plan.root.schema.clone();
    loop {
        match (&node.op, node.role) {
            (PhysOp::Sort { keys }, Role::Sink) => {
                let idx = keys
                    .iter()
                    .map(|k| out_schema.resolve(&k.column).map(|(i, _)| (i, k.desc)))
                    .collect::<Result<Vec<_>>>()?;
                post.insert(0, PostOp::Sort(idx));
            }
            (PhysOp::Limit { n }, Role::Sink) => post.insert(0, PostOp::Limit(*n)),
            _ => break,
        }
        node = &node.inputs[0];
    }
    let mut b = Builder {
        prog: KernelProgram {
            inputs: Vec::new(),
            vals: Vec::new(),
            accumulators: Vec::new(),
            hash_tables: Vec::new(),
            buffers: Vec::new(),
            loops: Vec::new(),
            output: OutputSpec { schema: out_schema.clone(), source: OutputSource::Buffer(0), post },
        },
        loops: vec![None; plan.pipeline_count],
        open: None,
    };
    let source = match (&node.op, node.role) {
        (PhysOp::Aggregate { group_by, aggs }, Role::Sink) => match b.aggregate(node, group_by, aggs)? {
            (AggTarget::Acc(acc), cols) => OutputSource::Acc { acc, cols },
            (AggTarget::Group(ht), cols) => OutputSource::Groups { ht, cols },
        },
        _ => {
            b.prog.buffers.push(BufferDecl { schema: out_schema });
            b.produce(node, &mut |b, env| {
                let values = env.iter().map(|x| x.op.clone()).collect();
                b.emit(Stmt::Emit { buffer: 0, values });
                Ok(())
            })?;
            OutputSource::Buffer(0)
        }
    };
    b.prog.output.source = source;
    let mut prog = b.prog;
    prog.loops = b
        .loops
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Unsupported(format!("pipeline {i} produced no loop"))))
        .collect::<Result<_>>()?;
    Ok(prog)
}

/// Produce/consume compilation followed by CSE and DCE.
pub fn compile_plan(plan: &PhysicalPlan) -> Result<KernelProgram> {
    let mut prog = compile_unoptimized(plan)?;
    passes::cse(&mut prog);
    passes::dce(&mut prog);
    passes::renumber(&mut prog);
    Ok(prog)
}
