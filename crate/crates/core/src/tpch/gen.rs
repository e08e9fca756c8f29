//! Deterministic generator for simplified TPC-H data.
//!
//! Distributions are uniform; keys, schemas and value domains follow TPC-H
//! closely enough for the query suite. Not dbgen-compatible.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schema;
use crate::catalog::{date, Catalog};
use crate::error::{Error, Result};
use crate::storage::{csv::write_csv, fbc::write_fbc, ColumnBuilder, ColumnTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Fbc,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "fbc" => Ok(Format::Fbc),
            other => Err(Error::Config(format!("unknown format {other:?} (expected csv or fbc)"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "tbl",
            Format::Fbc => "fbc",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub scale_factor: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { scale_factor: 0.01, seed: 42 }
    }
}

impl GenConfig {
    pub fn new(scale_factor: f64, seed: u64) -> Result<Self> {
        if !(scale_factor.is_finite() && scale_factor > 0.0) {
            return Err(Error::Config(format!("scale factor must be positive, got {scale_factor}")));
        }
        Ok(GenConfig { scale_factor, seed })
    }

    fn count(&self, base: f64) -> usize {
        ((base * self.scale_factor).round() as usize).max(1)
    }

    pub fn orders(&self) -> usize {
        self.count(1_500_000.0)
    }

    pub fn customers(&self) -> usize {
        self.count(150_000.0)
    }

    pub fn parts(&self) -> usize {
        self.count(200_000.0)
    }

    pub fn suppliers(&self) -> usize {
        self.count(10_000.0)
    }
}

const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];
const NATIONS: [(&str, i64); 25] = [
    ("ALGERIA", 0),
    ("ARGENTINA", 1),
    ("BRAZIL", 1),
    ("CANADA", 1),
    ("EGYPT", 4),
    ("ETHIOPIA", 0),
    ("FRANCE", 3),
    ("GERMANY", 3),
    ("INDIA", 2),
    ("INDONESIA", 2),
    ("IRAN", 4),
    ("IRAQ", 4),
    ("JAPAN", 2),
    ("JORDAN", 4),
    ("KENYA", 0),
    ("MOROCCO", 0),
    ("MOZAMBIQUE", 0),
    ("PERU", 1),
    ("CHINA", 2),
    ("ROMANIA", 3),
    ("SAUDI ARABIA", 4),
    ("VIETNAM", 2),
    ("RUSSIA", 3),
    ("UNITED KINGDOM", 3),
    ("UNITED STATES", 1),
];
pub const SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"];
pub const PRIORITIES: [&str; 5] = ["1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"];
pub const SHIP_MODES: [&str; 7] = ["REG AIR", "AIR", "RAIL", "SHIP", "TRUCK", "MAIL", "FOB"];
const INSTRUCTIONS: [&str; 4] = ["DELIVER IN PERSON", "COLLECT COD", "NONE", "TAKE BACK RETURN"];
const TYPE1: [&str; 6] = ["STANDARD", "SMALL", "MEDIUM", "LARGE", "ECONOMY", "PROMO"];
const TYPE2: [&str; 5] = ["ANODIZED", "BURNISHED", "PLATED", "POLISHED", "BRUSHED"];
const TYPE3: [&str; 5] = ["TIN", "NICKEL", "BRASS", "STEEL", "COPPER"];
const CONTAINER1: [&str; 5] = ["SM", "LG", "MED", "JUMBO", "WRAP"];
const CONTAINER2: [&str; 8] = ["CASE", "BOX", "BAG", "JAR", "PKG", "PACK", "CAN", "DRUM"];
const COLORS: [&str; 12] =
    ["almond", "azure", "blush", "chiffon", "coral", "forest", "ivory", "khaki", "linen", "navy", "plum", "wheat"];
const WORDS: [&str; 16] = [
    "furiously",
    "quickly",
    "carefully",
    "blithely",
    "final",
    "pending",
    "regular",
    "express",
    "ironic",
    "bold",
    "deposits",
    "packages",
    "accounts",
    "theodolites",
    "foxes",
    "pinto",
];

const START: i64 = 19_920_101;
/// Last order date: 151 days before 1998-12-31.
const LAST_ORDER: i64 = 19_980_802;
/// Items shipped after this date are still open.
const CURRENT: i64 = 19_950_617;

fn comment(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

fn cents(c: i64) -> f64 {
    c as f64 / 100.0
}

/// TPC-H retail price formula.
pub fn retail_price(partkey: i64) -> f64 {
    cents(90_000 + (partkey / 10) % 20_001 + 100 * (partkey % 1_000))
}

struct Builder {
    cols: Vec<ColumnBuilder>,
    schema: crate::catalog::Schema,
}

impl Builder {
    fn new(schema: crate::catalog::Schema) -> Self {
        let cols = schema.columns().iter().map(|c| ColumnBuilder::new(c.dtype)).collect();
        Builder { cols, schema }
    }

    fn i(&mut self, c: usize, v: i64) {
        self.cols[c].push_i64(v);
    }

    fn f(&mut self, c: usize, v: f64) {
        self.cols[c].push_f64(v);
    }

    fn t(&mut self, c: usize, v: &str) {
        self.cols[c].push_text(v.as_bytes());
    }

    fn finish(self) -> ColumnTable {
        let rows = self.cols.first().map_or(0, ColumnBuilder::len);
        let cols = self.cols.into_iter().map(|b| std::sync::Arc::new(b.finish())).collect();
        ColumnTable::new(self.schema, rows, cols).expect("generator columns match their schema")
    }
}

fn rng_for(cfg: &GenConfig, table: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ table.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn supplier_for(partkey: i64, i: i64, suppliers: i64) -> i64 {
    (partkey + i * (suppliers / 4).max(1) + (partkey - 1) / suppliers) % suppliers + 1
}

/// All eight tables, in `schema::TABLES` order.
pub fn generate(cfg: &GenConfig) -> Vec<(&'static str, ColumnTable)> {
    let (n_s, n_p, n_c, n_o) =
        (cfg.suppliers() as i64, cfg.parts() as i64, cfg.customers() as i64, cfg.orders() as i64);

    let mut region = Builder::new(schema::region());
    let mut rng = rng_for(cfg, 7);
    for (k, name) in REGIONS.iter().enumerate() {
        region.i(0, k as i64);
        region.t(1, name);
        region.t(2, &comment(&mut rng, 4));
    }

    let mut nation = Builder::new(schema::nation());
    let mut rng = rng_for(cfg, 6);
    for (k, (name, r)) in NATIONS.iter().enumerate() {
        nation.i(0, k as i64);
        nation.t(1, name);
        nation.i(2, *r);
        nation.t(3, &comment(&mut rng, 5));
    }

    let mut supplier = Builder::new(schema::supplier());
    let mut rng = rng_for(cfg, 5);
    for k in 1..=n_s {
        let nk = rng.gen_range(0..25);
        supplier.i(0, k);
        supplier.t(1, &format!("Supplier#{k:09}"));
        supplier.t(2, &comment(&mut rng, 2));
        supplier.i(3, nk);
        supplier.t(
            4,
            &format!(
                "{}-{:03}-{:03}-{:04}",
                nk + 10,
                rng.gen_range(100..1000),
                rng.gen_range(100..1000),
                rng.gen_range(1000..10000)
            ),
        );
        supplier.f(5, cents(rng.gen_range(-99_999..=999_999)));
        supplier.t(6, &comment(&mut rng, 6));
    }

    let mut part = Builder::new(schema::part());
    let mut partsupp = Builder::new(schema::partsupp());
    let mut rng = rng_for(cfg, 3);
    for k in 1..=n_p {
        let name: Vec<&str> = COLORS.choose_multiple(&mut rng, 3).copied().collect();
        let m = rng.gen_range(1..=5);
        part.i(0, k);
        part.t(1, &name.join(" "));
        part.t(2, &format!("Manufacturer#{m}"));
        part.t(3, &format!("Brand#{m}{}", rng.gen_range(1..=5)));
        let ty = format!(
            "{} {} {}",
            TYPE1.choose(&mut rng).expect("non-empty"),
            TYPE2.choose(&mut rng).expect("non-empty"),
            TYPE3.choose(&mut rng).expect("non-empty")
        );
        part.t(4, &ty);
        part.i(5, rng.gen_range(1..=50));
        let container = format!(
            "{} {}",
            CONTAINER1.choose(&mut rng).expect("non-empty"),
            CONTAINER2.choose(&mut rng).expect("non-empty")
        );
        part.t(6, &container);
        part.f(7, retail_price(k));
        part.t(8, &comment(&mut rng, 3));
        for i in 0..4 {
            partsupp.i(0, k);
            partsupp.i(1, supplier_for(k, i, n_s));
            partsupp.i(2, rng.gen_range(1..=9_999));
            partsupp.f(3, cents(rng.gen_range(100..=100_000)));
            partsupp.t(4, &comment(&mut rng, 8));
        }
    }

    let mut customer = Builder::new(schema::customer());
    let mut rng = rng_for(cfg, 2);
    for k in 1..=n_c {
        let nk = rng.gen_range(0..25);
        customer.i(0, k);
        customer.t(1, &format!("Customer#{k:09}"));
        customer.t(2, &comment(&mut rng, 2));
        customer.i(3, nk);
        customer.t(
            4,
            &format!(
                "{}-{:03}-{:03}-{:04}",
                nk + 10,
                rng.gen_range(100..1000),
                rng.gen_range(100..1000),
                rng.gen_range(1000..10000)
            ),
        );
        customer.f(5, cents(rng.gen_range(-99_999..=999_999)));
        customer.t(6, SEGMENTS.choose(&mut rng).expect("non-empty"));
        customer.t(7, &comment(&mut rng, 6));
    }

    let mut orders = Builder::new(schema::orders());
    let mut lineitem = Builder::new(schema::lineitem());
    let mut rng = rng_for(cfg, 1);
    let span = date::to_days(LAST_ORDER) - date::to_days(START);
    for k in 1..=n_o {
        // a third of the customers never order, as in TPC-H
        let mut cust = rng.gen_range(1..=n_c);
        if n_c >= 3 && cust % 3 == 0 {
            cust = if cust == n_c { cust - 1 } else { cust + 1 };
        }
        let odate = date::add_days(START, rng.gen_range(0..=span));
        let lines = rng.gen_range(1..=7);
        let (mut total, mut open, mut shipped) = (0.0f64, 0, 0);
        for ln in 1..=lines {
            let pk = rng.gen_range(1..=n_p);
            let sk = supplier_for(pk, rng.gen_range(0..4), n_s);
            let qty = rng.gen_range(1..=50i64);
            let price = cents(qty * (90_000 + (pk / 10) % 20_001 + 100 * (pk % 1_000)));
            let disc = cents(rng.gen_range(0..=10));
            let tax = cents(rng.gen_range(0..=8));
            let ship = date::add_days(odate, rng.gen_range(1..=121));
            let commit = date::add_days(odate, rng.gen_range(30..=90));
            let receipt = date::add_days(ship, rng.gen_range(1..=30));
            let flag = if receipt <= CURRENT {
                if rng.gen_bool(0.5) {
                    "R"
                } else {
                    "A"
                }
            } else {
                "N"
            };
            let status = if ship > CURRENT { "O" } else { "F" };
            if status == "O" {
                open += 1;
            } else {
                shipped += 1;
            }
            total += price * (1.0 + tax) * (1.0 - disc);
            lineitem.i(0, k);
            lineitem.i(1, pk);
            lineitem.i(2, sk);
            lineitem.i(3, ln);
            lineitem.f(4, qty as f64);
            lineitem.f(5, price);
            lineitem.f(6, disc);
            lineitem.f(7, tax);
            lineitem.t(8, flag);
            lineitem.t(9, status);
            lineitem.i(10, ship);
            lineitem.i(11, commit);
            lineitem.i(12, receipt);
            lineitem.t(13, INSTRUCTIONS.choose(&mut rng).expect("non-empty"));
            lineitem.t(14, SHIP_MODES.choose(&mut rng).expect("non-empty"));
            lineitem.t(15, &comment(&mut rng, 4));
        }
        orders.i(0, k);
        orders.i(1, cust);
        orders.t(
            2,
            if open == 0 {
                "F"
            } else if shipped == 0 {
                "O"
            } else {
                "P"
            },
        );
        orders.f(3, (total * 100.0).round() / 100.0);
        orders.i(4, odate);
        orders.t(5, PRIORITIES.choose(&mut rng).expect("non-empty"));
        orders.t(6, &format!("Clerk#{:09}", rng.gen_range(1..=cfg.count(1_000.0) as i64)));
        orders.i(7, 0);
        let c = if rng.gen_ratio(1, 10) {
            format!("special {} requests", WORDS.choose(&mut rng).expect("non-empty"))
        } else {
            comment(&mut rng, 5)
        };
        orders.t(8, &c);
    }

    vec![
        ("lineitem", lineitem.finish()),
        ("orders", orders.finish()),
        ("customer", customer.finish()),
        ("part", part.finish()),
        ("partsupp", partsupp.finish()),
        ("supplier", supplier.finish()),
        ("nation", nation.finish()),
        ("region", region.finish()),
    ]
}

/// A catalog holding freshly generated tables.
pub fn generate_catalog(cfg: &GenConfig) -> Result<Catalog> {
    let mut c = Catalog::new();
    for (name, t) in generate(cfg) {
        c.register_table(name, t.schema().clone(), t)?;
    }
    Ok(c)
}

/// Writes every table to `dir/<table>.<ext>` and returns the paths.
pub fn write_tables(cfg: &GenConfig, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, t) in generate(cfg) {
        let path = dir.join(format!("{name}.{}", format.extension()));
        match format {
            Format::Csv => write_csv(&t, &path, b'|')?,
            Format::Fbc => write_fbc(&t, &path)?,
        }
        out.push(path);
    }
    Ok(out)
}

/// Registers the tables found in `dir` (FBC files are read lazily, CSV
/// files are parsed now).
pub fn register_dir(catalog: &mut Catalog, dir: &Path) -> Result<()> {
    for name in schema::TABLES {
        let fbc = dir.join(format!("{name}.fbc"));
        let csv = dir.join(format!("{name}.tbl"));
        if fbc.exists() {
            catalog.register_fbc(name, &fbc)?;
        } else if csv.exists() {
            let s = schema::by_name(name).expect("known table");
            let opts = crate::storage::csv::CsvOptions::default();
            let t = crate::storage::csv::load_csv(&csv, &s, &opts)?;
            catalog.register_table(name, s, t)?;
        } else {
            return Err(Error::UnknownTable(format!(
                "{name} (no {name}.fbc or {name}.tbl in {}; run `flarelite gen` first)",
                dir.display()
            )));
        }
    }
    Ok(())
}
