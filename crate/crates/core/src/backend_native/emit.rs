//! C source emission.
//!
//! The generated library exports one function,
//! `int32_t flk_entry(uint32_t cmd, void* ctx, const void* arg, void* out)`,
//! whose commands mirror the runtime's executor protocol. Inputs arrive as a
//! descriptor block: a u32 version (1) and a u32 pair count, followed by
//! `{base, u64 len}` pairs. Each input contributes `(NULL, rows)` and then,
//! per column, `(values, rows), (validity, rows)` or for text
//! `(arena, bytes), (offsets, rows + 1), (validity, rows)`. The result block
//! returned by FINISH has the same header and two pairs per output column:
//! values (8-byte numbers or `flk_str`) and one null byte per row.

use std::fmt::Write;

use crate::frontend::{ArithOp, CmpOp, JoinKind, Literal};
use crate::kernel_ir::*;

pub const ABI_VERSION: u32 = 1;
const PRELUDE: &str = include_str!("prelude.c");

pub mod cmd {
    pub const CREATE: u32 = 0;
    pub const FREE: u32 = 1;
    pub const NEW_LOCAL: u32 = 2;
    pub const FREE_LOCAL: u32 = 3;
    pub const SOURCE_LEN: u32 = 4;
    pub const RUN: u32 = 5;
    pub const MERGE: u32 = 6;
    pub const FINISH: u32 = 7;
}

pub mod status {
    pub const OK: i32 = 0;
    pub const OVERFLOW: i32 = 1;
    pub const NOMEM: i32 = 2;
    pub const BADARG: i32 = 3;
}

fn ctype(t: VType) -> &'static str {
    match t {
        VType::I64 | VType::Date => "int64_t",
        VType::F64 => "double",
        VType::Text => "flk_str",
        VType::Bool => "int",
    }
}

fn lit(l: &Literal) -> String {
    match l {
        Literal::Int64(x) | Literal::Date(x) => {
            if *x == i64::MIN {
                "(-INT64_C(9223372036854775807) - 1)".into()
            } else {
                format!("INT64_C({x})")
            }
        }
        Literal::Float64(x) => {
            if x.is_nan() {
                "(__builtin_nan(\"\"))".into()
            } else if x.is_infinite() {
                if *x > 0.0 { "(__builtin_inf())" } else { "(-__builtin_inf())" }.into()
            } else {
                format!("{x:?}")
            }
        }
        Literal::Text(b) => format!("((flk_str){{(const uint8_t*){}, {}}})", c_string(b), b.len()),
        Literal::Bool(b) => u8::from(*b).to_string(),
    }
}

fn c_string(b: &[u8]) -> String {
    let mut s = String::from("\"");
    for &c in b {
        if c.is_ascii_alphanumeric() || b" _-.,:;/()[]{}#*+=<>!&|^~@$%".contains(&c) {
            s.push(c as char);
        } else {
            write!(s, "\\{c:03o}").unwrap();
        }
    }
    s.push('"');
    s
}

struct Emitter<'p> {
    prog: &'p KernelProgram,
    out: String,
    depth: usize,
}

impl Emitter<'_> {
    fn line(&mut self, s: impl AsRef<str>) {
        for _ in 0..self.depth {
            self.out.push_str("    ");
        }
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    fn open(&mut self, s: impl AsRef<str>) {
        self.line(s);
        self.depth += 1;
    }

    fn close(&mut self, s: &str) {
        self.depth -= 1;
        self.line(s);
    }

    fn nullable(&self, o: &Operand) -> bool {
        self.prog.operand_type(o).1
    }

    fn val(&self, o: &Operand) -> String {
        match o {
            Operand::Val(v) => format!("v{v}"),
            Operand::Const(l) => lit(l),
        }
    }

    fn null(&self, o: &Operand) -> String {
        match o {
            Operand::Val(v) if self.prog.vals[*v].nullable => format!("v{v}_n"),
            _ => "0".into(),
        }
    }

    fn decl(&mut self, v: ValId, value: &str, null: Option<&str>) {
        let info = &self.prog.vals[v];
        self.line(format!("{} v{v} = {value};", ctype(info.ty)));
        if info.nullable {
            self.line(format!("uint8_t v{v}_n = {};", null.unwrap_or("0")));
        }
    }

    fn key_hash(&self, keys: &[Operand], types: &[FieldDecl]) -> String {
        let mut h = "0".to_string();
        for (k, t) in keys.iter().zip(types) {
            let hk = hash_of(t.ty, &self.val(k));
            let hk = if self.nullable(k) { format!("({} ? FLK_NULL_HASH : {hk})", self.null(k)) } else { hk };
            h = format!("flk_combine({h}, {hk})");
        }
        h
    }

    fn key_args(&self, keys: &[Operand]) -> String {
        keys.iter().map(|k| format!(", {}, {}", self.val(k), self.null(k))).collect()
    }

    fn prelude_and_types(&mut self) {
        self.out.push_str("/* generated kernel, ABI 1 */\n");
        self.out.push_str(PRELUDE);
        self.out.push('\n');
        let prog = self.prog;
        for (a, acc) in prog.accumulators.iter().enumerate() {
            self.open("typedef struct {");
            for (i, s) in acc.slots.iter().enumerate() {
                self.line(format!("{} s{i};", ctype(s.ty)));
                self.line(format!("int64_t c{i};"));
            }
            self.close(&format!("}} flk_acc{a};"));
        }
        for (h, ht) in prog.hash_tables.iter().enumerate() {
            self.open("typedef struct {");
            for (i, k) in ht.keys.iter().enumerate() {
                self.line(format!("{} k{i};", ctype(k.ty)));
                self.line(format!("uint8_t k{i}_n;"));
            }
            match &ht.purpose {
                Purpose::GroupBy { slots } => {
                    for (i, s) in slots.iter().enumerate() {
                        self.line(format!("{} s{i};", ctype(s.ty)));
                        self.line(format!("int64_t c{i};"));
                    }
                }
                Purpose::JoinBuild => self.line("uint64_t head, tail;"),
            }
            self.close(&format!("}} flk_ht{h}_e;"));
            if ht.purpose == Purpose::JoinBuild {
                self.open("typedef struct {");
                for (i, p) in ht.payload.iter().enumerate() {
                    self.line(format!("{} p{i};", ctype(p.ty)));
                    self.line(format!("uint8_t p{i}_n;"));
                }
                self.line("uint64_t next;");
                self.close(&format!("}} flk_ht{h}_r;"));
                self.line(format!(
                    "typedef struct {{ flk_index ix; flk_ht{h}_e* e; uint64_t ecap; flk_ht{h}_r* r; uint64_t rn, rcap; }} flk_ht{h};"
                ));
            } else {
                self.line(format!("typedef struct {{ flk_index ix; flk_ht{h}_e* e; uint64_t ecap; }} flk_ht{h};"));
            }
        }
        for (b, buf) in prog.buffers.iter().enumerate() {
            self.open("typedef struct {");
            self.line("uint64_t n, cap;");
            for (i, c) in buf.schema.columns().iter().enumerate() {
                self.line(format!("{}* c{i};", ctype(VType::of(c.dtype))));
                self.line(format!("uint8_t* c{i}_n;"));
            }
            self.close(&format!("}} flk_buf{b};"));
        }
        self.open("typedef struct {");
        self.line("int unused;");
        for a in 0..prog.accumulators.len() {
            self.line(format!("flk_acc{a} acc{a};"));
        }
        for h in 0..prog.hash_tables.len() {
            self.line(format!("flk_ht{h} ht{h};"));
        }
        for b in 0..prog.buffers.len() {
            self.line(format!("flk_buf{b} buf{b};"));
        }
        self.close("} flk_state;");
        self.open("typedef struct {");
        self.line("flk_state st;");
        for (k, input) in prog.inputs.iter().enumerate() {
            self.line(format!("uint64_t in{k}_n;"));
            for (c, col) in input.schema.columns().iter().enumerate() {
                match VType::of(col.dtype) {
                    VType::Text => {
                        self.line(format!("const uint8_t* in{k}_c{c}_a;"));
                        self.line(format!("const uint64_t* in{k}_c{c}_o;"));
                    }
                    t => self.line(format!("const {}* in{k}_c{c};", ctype(t))),
                }
                self.line(format!("const uint8_t* in{k}_c{c}_v;"));
            }
        }
        self.line("uint64_t out_n;");
        self.line("uint64_t* out_desc;");
        for (i, c) in prog.output.schema.columns().iter().enumerate() {
            self.line(format!("{}* o{i};", ctype(VType::of(c.dtype))));
            self.line(format!("uint8_t* o{i}_n;"));
        }
        self.close("} flk_global;");
        self.out.push('\n');
    }

    fn state_fns(&mut self) {
        let prog = self.prog;
        self.open("static void flk_state_init(flk_state* s) {");
        self.line("memset(s, 0, sizeof *s);");
        for (a, acc) in prog.accumulators.iter().enumerate() {
            for (i, s) in acc.slots.iter().enumerate() {
                // -0.0 is the identity of IEEE addition
                if s.func == SlotFunc::Sum && s.ty == VType::F64 {
                    self.line(format!("s->acc{a}.s{i} = -0.0;"));
                }
            }
        }
        self.close("}");
        self.open("static void flk_state_free(flk_state* s) {");
        for (h, ht) in prog.hash_tables.iter().enumerate() {
            self.line(format!("flk_ix_free(&s->ht{h}.ix);"));
            self.line(format!("free(s->ht{h}.e);"));
            if ht.purpose == Purpose::JoinBuild {
                self.line(format!("free(s->ht{h}.r);"));
            }
        }
        for (b, buf) in prog.buffers.iter().enumerate() {
            for i in 0..buf.schema.len() {
                self.line(format!("free(s->buf{b}.c{i});"));
                self.line(format!("free(s->buf{b}.c{i}_n);"));
            }
        }
        self.line("memset(s, 0, sizeof *s);");
        self.close("}");
        self.out.push('\n');
    }

    fn key_params(keys: &[FieldDecl]) -> String {
        keys.iter().enumerate().map(|(i, k)| format!(", {} k{i}, uint8_t k{i}_n", ctype(k.ty))).collect()
    }

    fn key_eq(keys: &[FieldDecl]) -> String {
        let parts: Vec<String> = keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let eq = match k.ty {
                    VType::F64 => format!("flk_fbits(e->k{i}) == flk_fbits(k{i})"),
                    VType::Text => format!("flk_str_eq(e->k{i}, k{i})"),
                    _ => format!("e->k{i} == k{i}"),
                };
                format!("e->k{i}_n == k{i}_n && (k{i}_n || {eq})")
            })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(" && ")
        }
    }

    fn table_fns(&mut self) {
        let prog = self.prog;
        for (h, ht) in prog.hash_tables.iter().enumerate() {
            let params = Self::key_params(&ht.keys);
            let args: String = (0..ht.keys.len()).map(|i| format!(", k{i}, k{i}_n")).collect();
            self.open(format!("static uint64_t flk_ht{h}_find(const flk_ht{h}* t, uint64_t h{params}) {{"));
            self.line("const flk_index* ix = &t->ix;");
            self.line("if (!ix->slot) return FLK_END;");
            self.line("uint64_t mask = ((uint64_t)1 << ix->bits) - 1, i = flk_ix_find_start(ix, h);");
            self.open("for (;;) {");
            self.line("uint32_t s = ix->slot[i];");
            self.line("if (s == FLK_EMPTY) return FLK_END;");
            self.open("if (ix->h[s] == h) {");
            self.line(format!("const flk_ht{h}_e* e = &t->e[s];"));
            self.line(format!("if ({}) return s;", Self::key_eq(&ht.keys)));
            self.close("}");
            self.line("i = (i + 1) & mask;");
            self.close("}");
            self.close("}");
            // entry lookup or creation
            self.open(format!("static flk_ht{h}_e* flk_ht{h}_get(flk_ht{h}* t, uint64_t h{params}) {{"));
            self.line(format!("uint64_t s = flk_ht{h}_find(t, h{args});"));
            self.line("if (s != FLK_END) return &t->e[s];");
            self.line("s = flk_ix_push(&t->ix, h);");
            self.line("if (s == FLK_END) return 0;");
            self.line("if (flk_grow((void**)&t->e, &t->ecap, s + 1, sizeof *t->e)) return 0;");
            self.line(format!("flk_ht{h}_e* e = &t->e[s];"));
            self.line("memset(e, 0, sizeof *e);");
            for i in 0..ht.keys.len() {
                self.line(format!("e->k{i} = k{i}; e->k{i}_n = k{i}_n;"));
            }
            match &ht.purpose {
                Purpose::GroupBy { slots } => {
                    for (i, sd) in slots.iter().enumerate() {
                        if sd.func == SlotFunc::Sum && sd.ty == VType::F64 {
                            self.line(format!("e->s{i} = -0.0;"));
                        }
                    }
                }
                Purpose::JoinBuild => self.line("e->head = FLK_END; e->tail = FLK_END;"),
            }
            self.line("return e;");
            self.close("}");
            if ht.purpose == Purpose::JoinBuild {
                let pparams: String = ht
                    .payload
                    .iter()
                    .enumerate()
                    .map(|(i, p)| format!(", {} p{i}, uint8_t p{i}_n", ctype(p.ty)))
                    .collect();
                self.open(format!("static int flk_ht{h}_insert(flk_ht{h}* t, uint64_t h{params}{pparams}) {{"));
                self.line(format!("flk_ht{h}_e* e = flk_ht{h}_get(t, h{args});"));
                self.line("if (!e) return FLK_NOMEM;");
                self.line("if (flk_grow((void**)&t->r, &t->rcap, t->rn + 1, sizeof *t->r)) return FLK_NOMEM;");
                self.line("uint64_t r = t->rn++;");
                for i in 0..ht.payload.len() {
                    self.line(format!("t->r[r].p{i} = p{i}; t->r[r].p{i}_n = p{i}_n;"));
                }
                self.line("t->r[r].next = FLK_END;");
                self.line("if (e->tail == FLK_END) e->head = r; else t->r[e->tail].next = r;");
                self.line("e->tail = r;");
                self.line("return FLK_OK;");
                self.close("}");
            }
        }
        for (b, buf) in prog.buffers.iter().enumerate() {
            self.open(format!("static int flk_buf{b}_reserve(flk_buf{b}* b) {{"));
            self.line("if (b->n < b->cap) return 0;");
            self.line("uint64_t cap = b->cap ? b->cap * 2 : 64;");
            for i in 0..buf.schema.len() {
                self.line(format!("void* c{i} = realloc(b->c{i}, cap * sizeof *b->c{i});"));
                self.line(format!("if (!c{i}) return 1;"));
                self.line(format!("b->c{i} = c{i};"));
                self.line(format!("void* n{i} = realloc(b->c{i}_n, cap);"));
                self.line(format!("if (!n{i}) return 1;"));
                self.line(format!("b->c{i}_n = n{i};"));
            }
            self.line("b->cap = cap;");
            self.line("return 0;");
            self.close("}");
        }
        self.out.push('\n');
    }

    fn stmts(&mut self, body: &[Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        let prog = self.prog;
        match s {
            Stmt::Let { dst, op } => self.let_(*dst, op),
            Stmt::If { cond, body } => {
                self.open(format!("if ({}) {{", self.val(cond)));
                self.stmts(body);
                self.close("}");
            }
            Stmt::AggUpdate { target, keys, updates } => {
                self.open("{");
                let decls: &[SlotDecl] = match target {
                    AggTarget::Acc(a) => {
                        self.line(format!("flk_acc{a}* A = &lc->acc{a};"));
                        &prog.accumulators[*a].slots
                    }
                    AggTarget::Group(h) => {
                        let ht = &prog.hash_tables[*h];
                        let hash = self.key_hash(keys, &ht.keys);
                        self.line(format!(
                            "flk_ht{h}_e* A = flk_ht{h}_get(&lc->ht{h}, {hash}{});",
                            self.key_args(keys)
                        ));
                        self.line("if (!A) return FLK_NOMEM;");
                        ht.slots()
                    }
                };
                for u in updates {
                    self.update(u, &decls[u.slot]);
                }
                self.close("}");
            }
            Stmt::HashInsert { ht, keys, payload } => {
                let nulls: Vec<String> = keys.iter().filter(|k| self.nullable(k)).map(|k| self.null(k)).collect();
                let guarded = !nulls.is_empty();
                if guarded {
                    self.open(format!("if (!({})) {{", nulls.join(" | ")));
                }
                let hash = self.key_hash(keys, &prog.hash_tables[*ht].keys);
                let pay: String = payload.iter().map(|p| format!(", {}, {}", self.val(p), self.null(p))).collect();
                self.line(format!(
                    "if (flk_ht{ht}_insert(&lc->ht{ht}, {hash}{}{pay})) return FLK_NOMEM;",
                    self.key_args(keys)
                ));
                if guarded {
                    self.close("}");
                }
            }
            Stmt::HashProbe { ht, kind, keys, payload, body } => {
                let decl = &prog.hash_tables[*ht];
                let nulls: Vec<String> = keys.iter().filter(|k| self.nullable(k)).map(|k| self.null(k)).collect();
                let hash = self.key_hash(keys, &decl.keys);
                let find = format!("flk_ht{ht}_find(&g->st.ht{ht}, {hash}{})", self.key_args(keys));
                let first = format!("(s_ == FLK_END ? FLK_END : g->st.ht{ht}.e[s_].head)");
                self.open("{");
                if nulls.is_empty() {
                    self.line(format!("uint64_t s_ = {find};"));
                } else {
                    self.line(format!("uint64_t s_ = ({}) ? FLK_END : {find};", nulls.join(" | ")));
                }
                match kind {
                    JoinKind::LeftSemi => {
                        self.open("if (s_ != FLK_END) {");
                        self.stmts(body);
                        self.close("}");
                    }
                    JoinKind::LeftAnti => {
                        self.open("if (s_ == FLK_END) {");
                        self.stmts(body);
                        self.close("}");
                    }
                    JoinKind::Inner => {
                        self.open(format!(
                            "for (uint64_t r_ = {first}; r_ != FLK_END; r_ = g->st.ht{ht}.r[r_].next) {{"
                        ));
                        self.bind_payload(*ht, payload, false);
                        self.stmts(body);
                        self.close("}");
                    }
                    JoinKind::LeftOuter => {
                        self.line(format!("uint64_t r_ = {first};"));
                        self.line("int miss_ = r_ == FLK_END;");
                        self.open("do {");
                        self.bind_payload(*ht, payload, true);
                        self.stmts(body);
                        self.line(format!("if (!miss_) r_ = g->st.ht{ht}.r[r_].next;"));
                        self.close("} while (!miss_ && r_ != FLK_END);");
                    }
                }
                self.close("}");
            }
            Stmt::Emit { buffer, values } => {
                self.open("{");
                self.line(format!("flk_buf{buffer}* B = &lc->buf{buffer};"));
                self.line(format!("if (flk_buf{buffer}_reserve(B)) return FLK_NOMEM;"));
                for (i, v) in values.iter().enumerate() {
                    self.line(format!("B->c{i}[B->n] = {}; B->c{i}_n[B->n] = {};", self.val(v), self.null(v)));
                }
                self.line("B->n++;");
                self.close("}");
            }
        }
    }

    fn bind_payload(&mut self, ht: usize, payload: &[ValId], outer: bool) {
        for (i, v) in payload.iter().enumerate() {
            let info = &self.prog.vals[*v];
            let row = format!("g->st.ht{ht}.r[r_]");
            if outer {
                let zero = match info.ty {
                    VType::Text => "((flk_str){0, 0})",
                    VType::F64 => "0.0",
                    _ => "0",
                };
                self.decl(*v, &format!("miss_ ? {zero} : {row}.p{i}"), Some(&format!("miss_ ? 1 : {row}.p{i}_n")));
            } else {
                self.decl(*v, &format!("{row}.p{i}"), Some(&format!("{row}.p{i}_n")));
            }
        }
    }

    fn update(&mut self, u: &SlotUpdate, d: &SlotDecl) {
        let i = u.slot;
        let Some(arg) = &u.arg else {
            self.line(format!("A->c{i}++;"));
            return;
        };
        let (x, xn) = (self.val(arg), self.null(arg));
        let nullable = self.nullable(arg);
        if d.func == SlotFunc::Count {
            self.line(if nullable { format!("A->c{i} += !{xn};") } else { format!("A->c{i}++;") });
            return;
        }
        if nullable {
            self.open(format!("if (!{xn}) {{"));
        }
        match (d.func, d.ty) {
            (SlotFunc::Sum, VType::F64) => self.line(format!("A->s{i} += {x};")),
            (SlotFunc::Sum, _) => {
                self.line(format!("if (__builtin_add_overflow(A->s{i}, {x}, &A->s{i})) return FLK_OVERFLOW;"))
            }
            (f, t) => {
                let less = if f == SlotFunc::Min { "<" } else { ">" };
                let cmp = if t == VType::F64 {
                    format!("flk_tkey({x}) {less} flk_tkey(A->s{i})")
                } else {
                    format!("{x} {less} A->s{i}")
                };
                self.line(format!("if (A->c{i} == 0 || {cmp}) A->s{i} = {x};"));
            }
        }
        self.line(format!("A->c{i}++;"));
        if nullable {
            self.close("}");
        }
    }

    fn let_(&mut self, dst: ValId, op: &Op) {
        let ty = self.prog.vals[dst].ty;
        match op {
            Op::Arith(a, x, y) => {
                let (xv, yv) = (self.val(x), self.val(y));
                let null = join_nulls(&[self.null(x), self.null(y)]);
                if ty == VType::F64 {
                    let sym = arith_symbol(*a);
                    self.decl(dst, &format!("{xv} {sym} {yv}"), Some(&null));
                    return;
                }
                let nullable = self.prog.vals[dst].nullable;
                let guard = if nullable { format!("!v{dst}_n && ") } else { String::new() };
                match a {
                    ArithOp::Div => {
                        self.decl(dst, "0", Some(&format!("{null} | ({yv} == 0)")));
                        self.open(format!("if (!v{dst}_n) {{"));
                        self.line(format!(
                            "if ({xv} == (-INT64_C(9223372036854775807) - 1) && {yv} == -1) return FLK_OVERFLOW;"
                        ));
                        self.line(format!("v{dst} = {xv} / {yv};"));
                        self.close("}");
                    }
                    _ => {
                        let f = match a {
                            ArithOp::Add => "__builtin_add_overflow",
                            ArithOp::Sub => "__builtin_sub_overflow",
                            _ => "__builtin_mul_overflow",
                        };
                        self.decl(dst, "0", Some(&null));
                        self.line(format!("if ({guard}{f}({xv}, {yv}, &v{dst})) return FLK_OVERFLOW;"));
                    }
                }
            }
            Op::ToF64(x) => {
                let null = self.null(x);
                self.decl(dst, &format!("(double){}", self.val(x)), Some(&null))
            }
            Op::Cmp(c, x, y) => {
                let (xv, yv) = (self.val(x), self.val(y));
                let sym = c.symbol_c();
                let body = match self.prog.operand_type(x).0 {
                    VType::Text => format!("flk_str_cmp({xv}, {yv}) {sym} 0"),
                    _ => format!("{xv} {sym} {yv}"),
                };
                let nulls: Vec<String> = [x, y].iter().filter(|o| self.nullable(o)).map(|o| self.null(o)).collect();
                let e = if nulls.is_empty() {
                    format!("({body})")
                } else {
                    format!("!({}) && ({body})", nulls.join(" | "))
                };
                self.decl(dst, &e, None);
            }
            Op::And(v) | Op::Or(v) => {
                let sym = if matches!(op, Op::And(_)) { " & " } else { " | " };
                let e = if v.is_empty() {
                    if matches!(op, Op::And(_)) { "1" } else { "0" }.to_string()
                } else {
                    v.iter().map(|o| self.val(o)).collect::<Vec<_>>().join(sym)
                };
                self.decl(dst, &e, None);
            }
            Op::Not(x) => self.decl(dst, &format!("!{}", self.val(x)), None),
            Op::StartsWith(x, p) => {
                let test = format!("flk_starts({}, {}, {})", self.val(x), c_string(p), p.len());
                let e = if self.nullable(x) { format!("!{} && {test}", self.null(x)) } else { test };
                self.decl(dst, &e, None);
            }
            Op::Select(c, x, y) => {
                let cv = self.val(c);
                let null = format!("{cv} ? {} : {}", self.null(x), self.null(y));
                self.decl(dst, &format!("{cv} ? {} : {}", self.val(x), self.val(y)), Some(&null));
            }
        }
    }

    fn source_def(&mut self, l: &KernelLoop, v: ValId, f: &SourceField) {
        let info = &self.prog.vals[v];
        if !info.hint.is_empty() {
            self.line(format!("/* {} */", info.hint.replace("*/", "* /")));
        }
        match (&l.source, f) {
            (LoopSource::Scan { input }, SourceField::Column(c)) => {
                let k = *input;
                let value = if info.ty == VType::Text {
                    format!("flk_text(g->in{k}_c{c}_a, g->in{k}_c{c}_o, i)")
                } else {
                    format!("g->in{k}_c{c}[i]")
                };
                self.decl(v, &value, Some(&format!("flk_null_at(g->in{k}_c{c}_v, i)")));
            }
            (LoopSource::GroupTable { ht }, f) => {
                let e = format!("g->st.ht{ht}.e[i]");
                self.agg_def(v, &e, f);
            }
            (LoopSource::AccRow { acc }, f) => {
                let e = format!("g->st.acc{acc}");
                self.agg_def(v, &e, f);
            }
            // never iterates; the value only has to type-check
            (LoopSource::Empty, _) => {
                let zero = if info.ty == VType::Text { "(flk_str){0}" } else { "0" };
                self.decl(v, zero, Some("1"));
            }
            (s, f) => unreachable!("field {f:?} of {s:?}"),
        }
    }

    fn agg_def(&mut self, v: ValId, e: &str, f: &SourceField) {
        match f {
            SourceField::Key(k) => self.decl(v, &format!("{e}.k{k}"), Some(&format!("{e}.k{k}_n"))),
            SourceField::Agg { slot, finalize } => match finalize {
                Finalize::Count => self.decl(v, &format!("{e}.c{slot}"), None),
                Finalize::Value => self.decl(v, &format!("{e}.s{slot}"), Some(&format!("{e}.c{slot} == 0"))),
                Finalize::Avg => self.decl(
                    v,
                    &format!("(double){e}.s{slot} / (double){e}.c{slot}"),
                    Some(&format!("{e}.c{slot} == 0")),
                ),
            },
            SourceField::Column(_) => unreachable!("column of a breaker source"),
        }
    }

    fn loops(&mut self) {
        let prog = self.prog;
        for (n, l) in prog.loops.iter().enumerate() {
            self.open(format!(
                "static int flk_loop{n}(const flk_global* g, flk_state* lc, uint64_t begin, uint64_t end) {{"
            ));
            self.line("(void)g; (void)lc;");
            self.open("for (uint64_t i = begin; i < end; i++) {");
            for (v, f) in &l.defs {
                self.source_def(l, *v, f);
            }
            self.stmts(&l.body);
            self.close("}");
            self.line("return FLK_OK;");
            self.close("}");
        }
        self.out.push('\n');
    }

    fn merges(&mut self) {
        let prog = self.prog;
        for (n, l) in prog.loops.iter().enumerate() {
            let t = l.targets();
            self.open(format!("static int flk_merge{n}(flk_global* g, flk_state* lc) {{"));
            self.line("(void)g; (void)lc;");
            for a in &t.accs {
                self.line(format!("flk_acc{a}* D = &g->st.acc{a}; const flk_acc{a}* S = &lc->acc{a};"));
                self.merge_slots(&prog.accumulators[*a].slots);
            }
            for h in &t.hash_tables {
                let ht = &prog.hash_tables[*h];
                let args: String = (0..ht.keys.len()).map(|i| format!(", S->k{i}, S->k{i}_n")).collect();
                match &ht.purpose {
                    Purpose::GroupBy { slots } => {
                        self.open(format!("for (uint64_t s = 0; s < lc->ht{h}.ix.n; s++) {{"));
                        self.line(format!("const flk_ht{h}_e* S = &lc->ht{h}.e[s];"));
                        self.line(format!("flk_ht{h}_e* D = flk_ht{h}_get(&g->st.ht{h}, lc->ht{h}.ix.h[s]{args});"));
                        self.line("if (!D) return FLK_NOMEM;");
                        self.merge_slots(slots);
                        self.close("}");
                    }
                    Purpose::JoinBuild => {
                        self.open(format!("if (g->st.ht{h}.ix.n == 0) {{"));
                        self.line(format!("flk_ht{h} tmp = g->st.ht{h}; g->st.ht{h} = lc->ht{h}; lc->ht{h} = tmp;"));
                        self.close("} else {");
                        self.depth += 1;
                        self.open(format!("for (uint64_t s = 0; s < lc->ht{h}.ix.n; s++) {{"));
                        self.line(format!("const flk_ht{h}_e* S = &lc->ht{h}.e[s];"));
                        self.open(format!("for (uint64_t r = S->head; r != FLK_END; r = lc->ht{h}.r[r].next) {{"));
                        self.line(format!("const flk_ht{h}_r* R = &lc->ht{h}.r[r];"));
                        let pay: String = (0..ht.payload.len()).map(|i| format!(", R->p{i}, R->p{i}_n")).collect();
                        self.line(format!(
                            "if (flk_ht{h}_insert(&g->st.ht{h}, lc->ht{h}.ix.h[s]{args}{pay})) return FLK_NOMEM;"
                        ));
                        self.close("}");
                        self.close("}");
                        self.close("}");
                    }
                }
            }
            for b in &t.buffers {
                let cols = prog.buffers[*b].schema.len();
                self.line(format!("flk_buf{b}* D = &g->st.buf{b}; const flk_buf{b}* S = &lc->buf{b};"));
                self.open("for (uint64_t r = 0; r < S->n; r++) {");
                self.line(format!("if (flk_buf{b}_reserve(D)) return FLK_NOMEM;"));
                for i in 0..cols {
                    self.line(format!("D->c{i}[D->n] = S->c{i}[r]; D->c{i}_n[D->n] = S->c{i}_n[r];"));
                }
                self.line("D->n++;");
                self.close("}");
            }
            self.line("return FLK_OK;");
            self.close("}");
        }
        self.out.push('\n');
    }

    fn merge_slots(&mut self, slots: &[SlotDecl]) {
        for (i, d) in slots.iter().enumerate() {
            match (d.func, d.ty) {
                (SlotFunc::Count, _) => {}
                (SlotFunc::Sum, VType::F64) => self.line(format!("D->s{i} += S->s{i};")),
                (SlotFunc::Sum, _) => self.line(format!(
                    "if (S->c{i} && __builtin_add_overflow(D->s{i}, S->s{i}, &D->s{i})) return FLK_OVERFLOW;"
                )),
                (f, t) => {
                    let less = if f == SlotFunc::Min { "<" } else { ">" };
                    let cmp = if t == VType::F64 {
                        format!("flk_tkey(S->s{i}) {less} flk_tkey(D->s{i})")
                    } else {
                        format!("S->s{i} {less} D->s{i}")
                    };
                    self.line(format!("if (S->c{i} && (D->c{i} == 0 || {cmp})) D->s{i} = S->s{i};"));
                }
            }
            self.line(format!("D->c{i} += S->c{i};"));
        }
    }

    fn finish(&mut self) {
        let prog = self.prog;
        let spec = &prog.output;
        let ncols = spec.schema.len();
        self.open("static int flk_finish(flk_global* g) {");
        match &spec.source {
            OutputSource::Buffer(b) => {
                self.line(format!("flk_buf{b}* B = &g->st.buf{b};"));
                self.line("g->out_n = B->n;");
                for i in 0..ncols {
                    self.line(format!("g->o{i} = B->c{i}; g->o{i}_n = B->c{i}_n;"));
                }
            }
            OutputSource::Acc { acc, cols } => {
                self.line("g->out_n = 1;");
                self.alloc_out(ncols);
                self.line(format!("const flk_acc{acc}* E = &g->st.acc{acc};"));
                self.fill_out(cols, "0");
            }
            OutputSource::Groups { ht, cols } => {
                self.line(format!("g->out_n = g->st.ht{ht}.ix.n;"));
                self.alloc_out(ncols);
                self.open("for (uint64_t r = 0; r < g->out_n; r++) {");
                self.line(format!("const flk_ht{ht}_e* E = &g->st.ht{ht}.e[r];"));
                self.fill_out(cols, "r");
                self.close("}");
            }
        }
        self.line(format!("g->out_desc = malloc(sizeof(uint64_t) * {});", 1 + 4 * ncols));
        self.line("if (!g->out_desc) return FLK_NOMEM;");
        self.line(format!("g->out_desc[0] = (uint64_t)1 | ((uint64_t){} << 32);", 2 * ncols));
        for i in 0..ncols {
            self.line(format!(
                "g->out_desc[{}] = (uint64_t)(uintptr_t)g->o{i}; g->out_desc[{}] = g->out_n;",
                1 + 4 * i,
                2 + 4 * i
            ));
            self.line(format!(
                "g->out_desc[{}] = (uint64_t)(uintptr_t)g->o{i}_n; g->out_desc[{}] = g->out_n;",
                3 + 4 * i,
                4 + 4 * i
            ));
        }
        self.line("return FLK_OK;");
        self.close("}");
        self.out.push('\n');
    }

    fn alloc_out(&mut self, ncols: usize) {
        for i in 0..ncols {
            self.line(format!("g->o{i} = malloc((g->out_n + 1) * sizeof *g->o{i});"));
            self.line(format!("g->o{i}_n = malloc(g->out_n + 1);"));
            self.line(format!("if (!g->o{i} || !g->o{i}_n) return FLK_NOMEM;"));
        }
    }

    fn fill_out(&mut self, cols: &[OutCol], row: &str) {
        for (i, c) in cols.iter().enumerate() {
            match c {
                OutCol::Key(k) => self.line(format!("g->o{i}[{row}] = E->k{k}; g->o{i}_n[{row}] = E->k{k}_n;")),
                OutCol::Agg { slot, finalize } => match finalize {
                    Finalize::Count => self.line(format!("g->o{i}[{row}] = E->c{slot}; g->o{i}_n[{row}] = 0;")),
                    Finalize::Value => self.line(format!(
                        "g->o{i}[{row}] = E->s{slot}; g->o{i}_n[{row}] = E->c{slot} == 0;"
                    )),
                    Finalize::Avg => self.line(format!(
                        "g->o{i}[{row}] = E->c{slot} ? (double)E->s{slot} / (double)E->c{slot} : 0.0; g->o{i}_n[{row}] = E->c{slot} == 0;"
                    )),
                },
            }
        }
    }

    fn entry(&mut self) {
        let prog = self.prog;
        let owned_out = !matches!(prog.output.source, OutputSource::Buffer(_));
        let pairs: usize = prog
            .inputs
            .iter()
            .map(|i| {
                1 + i
                    .schema
                    .columns()
                    .iter()
                    .map(|c| if VType::of(c.dtype) == VType::Text { 3 } else { 2 })
                    .sum::<usize>()
            })
            .sum();
        self.open("static int flk_create(const uint64_t* d, flk_global** out) {");
        self.line(format!("if ((uint32_t)d[0] != 1 || (d[0] >> 32) != {pairs}) return FLK_BADARG;"));
        self.line("flk_global* g = calloc(1, sizeof *g);");
        self.line("if (!g) return FLK_NOMEM;");
        self.line("flk_state_init(&g->st);");
        let mut p = 1;
        for (k, input) in prog.inputs.iter().enumerate() {
            self.line(format!("g->in{k}_n = d[{}];", p + 1));
            p += 2;
            for (c, col) in input.schema.columns().iter().enumerate() {
                if VType::of(col.dtype) == VType::Text {
                    self.line(format!("g->in{k}_c{c}_a = (const uint8_t*)(uintptr_t)d[{p}];"));
                    self.line(format!("g->in{k}_c{c}_o = (const uint64_t*)(uintptr_t)d[{}];", p + 2));
                    p += 4;
                } else {
                    self.line(format!("g->in{k}_c{c} = (const {}*)(uintptr_t)d[{p}];", ctype(VType::of(col.dtype))));
                    p += 2;
                }
                self.line(format!("g->in{k}_c{c}_v = (const uint8_t*)(uintptr_t)d[{p}];"));
                p += 2;
            }
        }
        self.line("*out = g;");
        self.line("return FLK_OK;");
        self.close("}");

        self.open("static void flk_free(flk_global* g) {");
        self.line("if (!g) return;");
        if owned_out {
            for i in 0..prog.output.schema.len() {
                self.line(format!("free(g->o{i}); free(g->o{i}_n);"));
            }
        }
        self.line("free(g->out_desc);");
        self.line("flk_state_free(&g->st);");
        self.line("free(g);");
        self.close("}");

        self.open("static uint64_t flk_source_len(const flk_global* g, uint64_t l) {");
        self.open("switch (l) {");
        for (n, l) in prog.loops.iter().enumerate() {
            let len = match &l.source {
                LoopSource::Scan { input } => format!("g->in{input}_n"),
                LoopSource::GroupTable { ht } => format!("g->st.ht{ht}.ix.n"),
                LoopSource::AccRow { .. } => "1".into(),
                LoopSource::Empty => "0".into(),
            };
            self.line(format!("case {n}: return {len};"));
        }
        self.line("default: return 0;");
        self.close("}");
        self.close("}");

        self.open("int32_t flk_entry(uint32_t cmd, void* ctx, const void* arg, void* out) {");
        self.line("flk_global* g = (flk_global*)ctx;");
        self.open("switch (cmd) {");
        self.line("case FLK_CREATE: return flk_create((const uint64_t*)arg, (flk_global**)out);");
        self.line("case FLK_FREE: flk_free(g); return FLK_OK;");
        self.open("case FLK_NEW_LOCAL: {");
        self.line("flk_state* s = malloc(sizeof *s);");
        self.line("if (!s) return FLK_NOMEM;");
        self.line("flk_state_init(s);");
        self.line("*(flk_state**)out = s;");
        self.line("return FLK_OK;");
        self.close("}");
        self.line(
            "case FLK_FREE_LOCAL: if (arg) { flk_state_free((flk_state*)arg); free((void*)arg); } return FLK_OK;",
        );
        self.line("case FLK_SOURCE_LEN: *(uint64_t*)out = flk_source_len(g, *(const uint64_t*)arg); return FLK_OK;");
        self.open("case FLK_RUN: {");
        self.line("const flk_run_args* a = (const flk_run_args*)arg;");
        self.open("switch (a->loop) {");
        for n in 0..prog.loops.len() {
            self.line(format!("case {n}: return flk_loop{n}(g, (flk_state*)a->local, a->begin, a->end);"));
        }
        self.line("default: return FLK_BADARG;");
        self.close("}");
        self.close("}");
        self.open("case FLK_MERGE: {");
        self.line("const flk_run_args* a = (const flk_run_args*)arg;");
        self.open("switch (a->loop) {");
        for n in 0..prog.loops.len() {
            self.line(format!("case {n}: return flk_merge{n}(g, (flk_state*)a->local);"));
        }
        self.line("default: return FLK_BADARG;");
        self.close("}");
        self.close("}");
        self.open("case FLK_FINISH: {");
        self.line("int rc = flk_finish(g);");
        self.line("if (rc) return rc;");
        self.line("*(const uint64_t**)out = g->out_desc;");
        self.line("return FLK_OK;");
        self.close("}");
        self.line("default: return FLK_BADARG;");
        self.close("}");
        self.close("}");
    }

    /// `main` for the process fallback, compiled only with `-DFLK_MAIN`.
    /// Reads an input dump, runs every loop as one range, writes the result
    /// as FBC and exits with the kernel status.
    fn main(&mut self) {
        let prog = self.prog;
        let schema = &prog.output.schema;
        self.out.push_str("\n#ifdef FLK_MAIN\n#include <stdio.h>\n");
        self.open("static int flk_put(FILE* f, const void* p, size_t n) {");
        self.line("return n == 0 || fwrite(p, 1, n, f) == n;");
        self.close("}");
        self.open("static int flk_u64(FILE* f, uint64_t x) {");
        self.line("return flk_put(f, &x, 8);");
        self.close("}");
        self.open("int main(int argc, char** argv) {");
        self.line("if (argc != 3) return 64;");
        self.line("FILE* in = fopen(argv[1], \"rb\");");
        self.line("if (!in) return 65;");
        self.line("uint64_t hdr[2];");
        self.line("if (fread(hdr, 8, 2, in) != 2 || hdr[0] != 0x314e494b4c46ULL) return 65;");
        self.line("uint64_t np = hdr[1];");
        self.line("uint64_t* d = calloc(1 + 2 * np, 8);");
        self.line("if (!d) return 66;");
        self.line("d[0] = (uint64_t)1 | (np << 32);");
        self.open("for (uint64_t i = 0; i < np; i++) {");
        self.line("uint64_t m[2];");
        self.line("if (fread(m, 8, 2, in) != 2) return 65;");
        self.line("d[2 + 2 * i] = m[1];");
        self.line("if (m[0] == UINT64_MAX) continue;");
        self.line("void* p = malloc(m[0] ? m[0] : 1);");
        self.line("if (!p || (m[0] && fread(p, 1, m[0], in) != m[0])) return 65;");
        self.line("d[1 + 2 * i] = (uint64_t)(uintptr_t)p;");
        self.close("}");
        self.line("fclose(in);");
        self.line("flk_global* g = 0;");
        self.line("int rc = flk_entry(FLK_CREATE, 0, d, &g);");
        self.line("if (rc) return rc;");
        self.open(format!("for (uint64_t l = 0; l < {}; l++) {{", prog.loops.len()));
        self.line("uint64_t n = 0;");
        self.line("flk_entry(FLK_SOURCE_LEN, g, &l, &n);");
        self.line("void* lc = 0;");
        self.line("if ((rc = flk_entry(FLK_NEW_LOCAL, g, 0, &lc))) return rc;");
        self.line("flk_run_args a = { l, 0, n, lc };");
        self.line("if ((rc = flk_entry(FLK_RUN, g, &a, 0))) return rc;");
        self.line("if ((rc = flk_entry(FLK_MERGE, g, &a, 0))) return rc;");
        self.line("flk_entry(FLK_FREE_LOCAL, g, lc, 0);");
        self.close("}");
        self.line("const uint64_t* od = 0;");
        self.line("if ((rc = flk_entry(FLK_FINISH, g, 0, &od))) return rc;");
        self.line("uint64_t rows = g->out_n;");
        self.line("FILE* f = fopen(argv[2], \"wb\");");
        self.line("if (!f) return 67;");
        self.line(format!("uint32_t h32[2] = {{ 1, {} }};", schema.len()));
        self.line("int ok = flk_put(f, \"FBC1\", 4) && flk_put(f, h32, 8);");
        let dir_len: usize = schema.names().map(|n| 2 + n.len() + 2 + 24).sum();
        self.line(format!("uint64_t off = {};", 12 + dir_len));
        for (i, c) in schema.columns().iter().enumerate() {
            let text = c.dtype == crate::catalog::DataType::Text;
            self.open("{");
            if text {
                self.line("uint64_t len = 8 + (rows + 1) * 8;");
                self.line(format!("for (uint64_t r = 0; r < rows; r++) if (!g->o{i}_n[r]) len += g->o{i}[r].n;"));
            } else {
                self.line("uint64_t len = rows * 8;");
            }
            if c.nullable {
                self.line("len += (rows + 7) / 8;");
            }
            self.line(format!("uint16_t nl = {};", c.name.len()));
            self.line(format!("uint8_t ty[2] = {{ {}, {} }};", c.dtype.code(), u8::from(c.nullable)));
            self.line(format!(
                "ok = ok && flk_put(f, &nl, 2) && flk_put(f, {}, {}) && flk_put(f, ty, 2);",
                c_string(c.name.as_bytes()),
                c.name.len()
            ));
            self.line("ok = ok && flk_u64(f, rows) && flk_u64(f, off) && flk_u64(f, len);");
            self.line("off += len;");
            self.close("}");
        }
        for (i, c) in schema.columns().iter().enumerate() {
            if c.dtype == crate::catalog::DataType::Text {
                self.open("{");
                self.line("uint64_t a = 0;");
                self.line(format!("for (uint64_t r = 0; r < rows; r++) if (!g->o{i}_n[r]) a += g->o{i}[r].n;"));
                self.line("ok = ok && flk_u64(f, a);");
                self.line(format!(
                    "for (uint64_t r = 0; r < rows; r++) if (!g->o{i}_n[r]) ok = ok && flk_put(f, g->o{i}[r].p, g->o{i}[r].n);"
                ));
                self.line("a = 0;");
                self.line("ok = ok && flk_u64(f, 0);");
                self.open("for (uint64_t r = 0; r < rows; r++) {");
                self.line(format!("if (!g->o{i}_n[r]) a += g->o{i}[r].n;"));
                self.line("ok = ok && flk_u64(f, a);");
                self.close("}");
                self.close("}");
            } else {
                self.open("for (uint64_t r = 0; r < rows; r++) {");
                // null rows carry zero bytes
                self.line("uint64_t x = 0;");
                self.line(format!("if (!g->o{i}_n[r]) memcpy(&x, &g->o{i}[r], 8);"));
                self.line("ok = ok && flk_u64(f, x);");
                self.close("}");
            }
            if c.nullable {
                self.open("for (uint64_t r = 0; r < rows; r += 8) {");
                self.line("uint8_t b = 0;");
                self.line(format!("for (uint64_t k = r; k < rows && k < r + 8; k++) if (!g->o{i}_n[k]) b |= (uint8_t)(1u << (k - r));"));
                self.line("ok = ok && flk_put(f, &b, 1);");
                self.close("}");
            }
        }
        self.line("if (fclose(f) != 0 || !ok) return 67;");
        self.line("flk_entry(FLK_FREE, g, 0, 0);");
        self.line("return 0;");
        self.close("}");
        self.out.push_str("#endif\n");
    }
}

fn hash_of(t: VType, v: &str) -> String {
    match t {
        VType::F64 => format!("flk_hash_f64({v})"),
        VType::Text => format!("flk_hash_str({v})"),
        _ => format!("flk_hash_i64((int64_t){v})"),
    }
}

fn join_nulls(parts: &[String]) -> String {
    let live: Vec<&String> = parts.iter().filter(|p| p.as_str() != "0").collect();
    if live.is_empty() {
        "0".into()
    } else {
        live.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" | ")
    }
}

fn arith_symbol(a: ArithOp) -> &'static str {
    match a {
        ArithOp::Add => "+",
        ArithOp::Sub => "-",
        ArithOp::Mul => "*",
        ArithOp::Div => "/",
    }
}

trait CSymbol {
    fn symbol_c(self) -> &'static str;
}

impl CSymbol for CmpOp {
    fn symbol_c(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtEq => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtEq => ">=",
        }
    }
}

/// Emits the C translation unit for a program. Pure: the same program
/// always yields the same bytes.
pub fn emit_source(prog: &KernelProgram) -> String {
    let mut e = Emitter { prog, out: String::new(), depth: 0 };
    e.prelude_and_types();
    e.state_fns();
    e.table_fns();
    e.loops();
    e.merges();
    e.finish();
    e.entry();
    e.main();
    e.out
}

/// Number of descriptor pairs the emitted code expects for its inputs.
pub fn input_pair_count(prog: &KernelProgram) -> usize {
    prog.inputs
        .iter()
        .map(|i| {
            1 + i.schema.columns().iter().map(|c| if VType::of(c.dtype) == VType::Text { 3 } else { 2 }).sum::<usize>()
        })
        .sum()
}
