//! Cleanup passes: common subexpression elimination, dead code
//! elimination and dense renumbering.

use std::collections::{HashMap, HashSet};

use super::ir::*;

/// Scoped hash-consing. A `Let` whose operation already has a value in an
/// enclosing scope is dropped and its uses redirected.
pub fn cse(prog: &mut KernelProgram) {
    for l in &mut prog.loops {
        let mut subst: HashMap<ValId, Operand> = HashMap::new();
        let mut scopes: Vec<HashMap<String, ValId>> = vec![HashMap::new()];
        cse_block(&mut l.body, &mut subst, &mut scopes);
    }
}

fn apply(o: &mut Operand, subst: &HashMap<ValId, Operand>) {
    if let Operand::Val(v) = o {
        if let Some(r) = subst.get(v) {
            *o = r.clone();
        }
    }
}

fn cse_block(stmts: &mut Vec<Stmt>, subst: &mut HashMap<ValId, Operand>, scopes: &mut Vec<HashMap<String, ValId>>) {
    let mut out = Vec::with_capacity(stmts.len());
    for mut s in stmts.drain(..) {
        for o in stmt_operands_mut(&mut s) {
            apply(o, subst);
        }
        match &mut s {
            Stmt::Let { dst, op } => {
                let key = format!("{op:?}");
                if let Some(prev) = scopes.iter().rev().find_map(|m| m.get(&key)) {
                    subst.insert(*dst, Operand::Val(*prev));
                    continue;
                }
                scopes.last_mut().unwrap().insert(key, *dst);
            }
            Stmt::If { body, .. } | Stmt::HashProbe { body, .. } => {
                scopes.push(HashMap::new());
                cse_block(body, subst, scopes);
                scopes.pop();
            }
            _ => {}
        }
        out.push(s);
    }
    *stmts = out;
}

/// Operands read directly by a statement (not its nested body).
pub fn stmt_operands(s: &Stmt) -> Vec<&Operand> {
    match s {
        Stmt::Let { op, .. } => op.operands(),
        Stmt::If { cond, .. } => vec![cond],
        Stmt::AggUpdate { keys, updates, .. } => {
            keys.iter().chain(updates.iter().filter_map(|u| u.arg.as_ref())).collect()
        }
        Stmt::HashInsert { keys, payload, .. } => keys.iter().chain(payload).collect(),
        Stmt::HashProbe { keys, .. } => keys.iter().collect(),
        Stmt::Emit { values, .. } => values.iter().collect(),
    }
}

fn stmt_operands_mut(s: &mut Stmt) -> Vec<&mut Operand> {
    match s {
        Stmt::Let { op, .. } => op.operands_mut(),
        Stmt::If { cond, .. } => vec![cond],
        Stmt::AggUpdate { keys, updates, .. } => {
            keys.iter_mut().chain(updates.iter_mut().filter_map(|u| u.arg.as_mut())).collect()
        }
        Stmt::HashInsert { keys, payload, .. } => keys.iter_mut().chain(payload.iter_mut()).collect(),
        Stmt::HashProbe { keys, .. } => keys.iter_mut().collect(),
        Stmt::Emit { values, .. } => values.iter_mut().collect(),
    }
}

/// Removes unused lets and source reads, and guards or probes whose body
/// became empty. Repeats until nothing changes.
pub fn dce(prog: &mut KernelProgram) {
    for l in &mut prog.loops {
        loop {
            let mut used = HashSet::new();
            collect_uses(&l.body, &mut used);
            let before = count(&l.body) + l.defs.len();
            prune(&mut l.body, &used);
            l.defs.retain(|(v, _)| used.contains(v));
            if count(&l.body) + l.defs.len() == before {
                break;
            }
        }
    }
}

fn collect_uses(stmts: &[Stmt], used: &mut HashSet<ValId>) {
    for s in stmts {
        for o in stmt_operands(s) {
            if let Operand::Val(v) = o {
                used.insert(*v);
            }
        }
        if let Stmt::If { body, .. } | Stmt::HashProbe { body, .. } = s {
            collect_uses(body, used);
        }
    }
}

fn count(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::If { body, .. } | Stmt::HashProbe { body, .. } => 1 + count(body),
            _ => 1,
        })
        .sum()
}

fn prune(stmts: &mut Vec<Stmt>, used: &HashSet<ValId>) {
    for s in stmts.iter_mut() {
        if let Stmt::If { body, .. } | Stmt::HashProbe { body, .. } = s {
            prune(body, used);
        }
    }
    stmts.retain(|s| match s {
        Stmt::Let { dst, .. } => used.contains(dst),
        Stmt::If { body, .. } | Stmt::HashProbe { body, .. } => !body.is_empty(),
        _ => true,
    });
}

/// Renumbers values densely in definition order.
pub fn renumber(prog: &mut KernelProgram) {
    let mut map: HashMap<ValId, ValId> = HashMap::new();
    let mut vals = Vec::new();
    let old = std::mem::take(&mut prog.vals);
    let mut fresh = |v: ValId, map: &mut HashMap<ValId, ValId>| {
        map.insert(v, vals.len());
        vals.push(old[v].clone());
    };
    fn defs_in(stmts: &[Stmt], out: &mut Vec<ValId>) {
        for s in stmts {
            match s {
                Stmt::Let { dst, .. } => out.push(*dst),
                Stmt::If { body, .. } => defs_in(body, out),
                Stmt::HashProbe { payload, body, .. } => {
                    out.extend(payload);
                    defs_in(body, out);
                }
                _ => {}
            }
        }
    }
    for l in &prog.loops {
        let mut order: Vec<ValId> = l.defs.iter().map(|(v, _)| *v).collect();
        defs_in(&l.body, &mut order);
        for v in order {
            fresh(v, &mut map);
        }
    }
    fn rename(stmts: &mut [Stmt], map: &HashMap<ValId, ValId>) {
        for s in stmts.iter_mut() {
            for o in stmt_operands_mut(s) {
                if let Operand::Val(v) = o {
                    *v = map[v];
                }
            }
            match s {
                Stmt::Let { dst, .. } => *dst = map[dst],
                Stmt::If { body, .. } => rename(body, map),
                Stmt::HashProbe { payload, body, .. } => {
                    for p in payload.iter_mut() {
                        *p = map[p];
                    }
                    rename(body, map);
                }
                _ => {}
            }
        }
    }
    for l in &mut prog.loops {
        for (v, _) in &mut l.defs {
            *v = map[v];
        }
        rename(&mut l.body, &map);
    }
    prog.vals = vals;
}
