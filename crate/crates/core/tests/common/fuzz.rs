//! Differential fuzzing: random plans over random tables must give the same
//! answer on the volcano interpreter, the loop interpreter and native code.
//! A divergence is shrunk (rows first, then plan nodes) and dumped.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plans::{depth, one_step_smaller, random_catalog, PlanGen};
use super::Triple;
use flarelite::catalog::Catalog;
use flarelite::frontend::LogicalPlan;
use flarelite::storage::ColumnTable;

pub const PLANS: u64 = 500;
pub const MAX_DEPTH: usize = 5;
pub const MAX_ROWS: usize = 1000;

pub fn threads_for(seed: u64) -> usize {
    1 + (seed % 4) as usize
}

/// Disagreement or a panic in any engine.
pub fn outcome(plan: &LogicalPlan, c: &Catalog, threads: usize) -> Result<Triple, String> {
    let t = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| Triple::run(plan, c, threads))).map_err(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        format!("panic: {}", msg.unwrap_or_default())
    })?;
    t.check(plan)?;
    Ok(t)
}

fn diverges(plan: &LogicalPlan, c: &Catalog, threads: usize) -> bool {
    outcome(plan, c, threads).is_err()
}

fn with_rows(c: &Catalog, table: &str, keep: &dyn Fn(usize) -> bool) -> Catalog {
    let mut out = Catalog::new();
    for name in c.table_names() {
        let t = c.bind_all(name).unwrap();
        let rows: Vec<_> =
            t.rows().into_iter().enumerate().filter(|(i, _)| name != table || keep(*i)).map(|r| r.1).collect();
        let s = t.schema().clone();
        out.register_table(name, s.clone(), ColumnTable::from_rows(s, &rows).unwrap()).unwrap();
    }
    out
}

/// Greedy shrink: drop row chunks while the divergence persists, then try
/// every one-node-smaller plan.
pub fn minimize(mut plan: LogicalPlan, mut c: Catalog, threads: usize) -> (LogicalPlan, Catalog) {
    loop {
        let mut progress = false;
        let names: Vec<String> = c.table_names().map(str::to_string).collect();
        for name in &names {
            let mut chunk = c.bind_all(name).unwrap().row_count().div_ceil(2);
            while chunk > 0 {
                let n = c.bind_all(name).unwrap().row_count();
                let mut start = 0;
                while start < n {
                    let cand = with_rows(&c, name, &|i| i < start || i >= start + chunk);
                    if diverges(&plan, &cand, threads) {
                        c = cand;
                        progress = true;
                    } else {
                        start += chunk;
                    }
                    if c.bind_all(name).unwrap().row_count() <= start {
                        break;
                    }
                }
                chunk /= 2;
            }
        }
        if let Some(smaller) = one_step_smaller(&plan).into_iter().find(|p| diverges(p, &c, threads)) {
            plan = smaller;
            progress = true;
        }
        if !progress {
            return (plan, c);
        }
    }
}

pub fn dump(seed: u64, plan: &LogicalPlan, c: &Catalog, threads: usize) -> PathBuf {
    let mut s = String::new();
    writeln!(s, "seed {seed}, native threads {threads}\n\nplan:\n{plan}").unwrap();
    for name in c.table_names() {
        writeln!(s, "table {name}:\n{}", c.bind_all(name).unwrap().to_csv()).unwrap();
    }
    if let Ok(t) = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| Triple::run(plan, c, threads))) {
        writeln!(s, "volcano: {:?}\n\nir: {:?}\n\nnative: {:?}\n", t.volcano, t.ir, t.native).unwrap();
    }
    writeln!(s, "{}", outcome(plan, c, threads).err().unwrap_or_default()).unwrap();
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("fuzz-failures");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(format!("seed-{seed}.txt"));
    std::fs::write(&path, s).unwrap();
    path
}

pub struct Summary {
    pub failures: Vec<PathBuf>,
    pub nonempty: u64,
}

/// Runs `plans` random plans from consecutive seeds starting at `base`.
pub fn run(base: u64, plans: u64) -> Summary {
    let mut failures = Vec::new();
    let mut nonempty = 0;
    for i in 0..plans {
        let seed = base.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_catalog(&mut rng, MAX_ROWS);
        let d = rng.gen_range(1..=MAX_DEPTH);
        let plan = PlanGen::new(&mut rng).plan(d);
        assert!(depth(&plan) <= MAX_DEPTH, "{plan}");
        let threads = threads_for(seed);
        let res = outcome(&plan, &c, threads);
        if matches!(&res, Ok(t) if matches!(&t.volcano, Ok(r) if !r.is_empty())) {
            nonempty += 1;
        }
        if res.is_err() {
            let (p, c) = minimize(plan, c, threads);
            failures.push(dump(seed, &p, &c, threads));
        }
    }
    Summary { failures, nonempty }
}

pub fn base_seed() -> u64 {
    std::env::var("FLARELITE_FUZZ_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0x5eed)
}
