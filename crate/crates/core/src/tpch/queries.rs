//! The query suite: Q1, Q3, Q4*, Q6, Q12, Q13*, Q14 and Q19*.
//!
//! Starred queries are rewritten because the SQL subset has no sub-queries:
//! Q4 uses a left semi join for its EXISTS; Q13 is built with the DataFrame
//! API as two stacked aggregates and filters comments by prefix; Q19 moves
//! the part/lineitem key equality out of the disjuncts into the join. Q12 and
//! Q14 express their CASE arms with the staged UDFs `high_line` and
//! `promo_revenue`.

use crate::catalog::DataType;
use crate::error::{Error, Result};
use crate::frontend::{col, lit_date, lit_f64, udf, AggExpr, AggFunc, DataFrame, Expr, JoinKind, SortKey};
use crate::kernel_ir::staging::Rep;
use crate::session::Session;
use crate::udf::UdfDef;

pub const SUITE: [&str; 8] = ["q1", "q3", "q4", "q6", "q12", "q13", "q14", "q19"];

pub const Q1: &str = "select l_returnflag, l_linestatus, sum(l_quantity) as sum_qty, \
    sum(l_extendedprice) as sum_base_price, sum(l_extendedprice * (1 - l_discount)) as sum_disc_price, \
    sum(l_extendedprice * (1 - l_discount) * (1 + l_tax)) as sum_charge, avg(l_quantity) as avg_qty, \
    avg(l_extendedprice) as avg_price, avg(l_discount) as avg_disc, count(*) as count_order \
    from lineitem where l_shipdate <= date '1998-09-02' \
    group by l_returnflag, l_linestatus order by l_returnflag, l_linestatus";

pub const Q3: &str =
    "select l_orderkey, sum(l_extendedprice * (1 - l_discount)) as revenue, o_orderdate, o_shippriority \
    from lineitem join orders on l_orderkey = o_orderkey join customer on o_custkey = c_custkey \
    where c_mktsegment = 'BUILDING' and o_orderdate < date '1995-03-15' and l_shipdate > date '1995-03-15' \
    group by l_orderkey, o_orderdate, o_shippriority order by revenue desc, o_orderdate limit 10";

pub const Q6: &str = "select sum(l_extendedprice * l_discount) as revenue from lineitem \
    where l_shipdate >= date '1994-01-01' and l_shipdate < date '1995-01-01' \
    and l_discount between 0.05 and 0.07 and l_quantity < 24";

pub const Q12: &str = "select l_shipmode, sum(high_line(o_orderpriority)) as high_line_count, \
    sum(1 - high_line(o_orderpriority)) as low_line_count \
    from lineitem join orders on l_orderkey = o_orderkey \
    where l_shipmode in ('MAIL', 'SHIP') and l_commitdate < l_receiptdate and l_shipdate < l_commitdate \
    and l_receiptdate >= date '1994-01-01' and l_receiptdate < date '1995-01-01' \
    group by l_shipmode order by l_shipmode";

pub const Q19: &str = "select sum(l_extendedprice * (1 - l_discount)) as revenue \
    from lineitem join part on l_partkey = p_partkey \
    where (p_brand = 'Brand#12' and p_container in ('SM CASE', 'SM BOX', 'SM PACK', 'SM PKG') \
        and l_quantity >= 1 and l_quantity <= 11 and p_size between 1 and 5 \
        and l_shipmode in ('AIR', 'REG AIR') and l_shipinstruct = 'DELIVER IN PERSON') \
    or (p_brand = 'Brand#23' and p_container in ('MED BAG', 'MED BOX', 'MED PKG', 'MED PACK') \
        and l_quantity >= 10 and l_quantity <= 20 and p_size between 1 and 10 \
        and l_shipmode in ('AIR', 'REG AIR') and l_shipinstruct = 'DELIVER IN PERSON') \
    or (p_brand = 'Brand#34' and p_container in ('LG CASE', 'LG BOX', 'LG PACK', 'LG PKG') \
        and l_quantity >= 20 and l_quantity <= 30 and p_size between 1 and 15 \
        and l_shipmode in ('AIR', 'REG AIR') and l_shipinstruct = 'DELIVER IN PERSON')";

/// 1 for urgent or high priority orders, else 0.
pub fn high_line_udf() -> UdfDef {
    UdfDef::new("high_line", vec![DataType::Text], |a: &[Rep]| {
        a[0].clone().eq("1-URGENT").or(a[0].clone().eq("2-HIGH")).select(1i64, 0i64)
    })
}

/// Discounted price for promotional parts, else 0.
pub fn promo_revenue_udf() -> UdfDef {
    UdfDef::new("promo_revenue", vec![DataType::Text, DataType::Float64, DataType::Float64], |a: &[Rep]| {
        let price = a[1].clone() * (Rep::from(1.0) - a[2].clone());
        a[0].clone().starts_with("PROMO").select(price, 0.0)
    })
}

/// Registers the suite's UDFs unless already present.
pub fn register_udfs(session: &mut Session) -> Result<()> {
    for def in [high_line_udf(), promo_revenue_udf()] {
        if session.udfs().get(&def.name).is_none() {
            session.register_udf(def)?;
        }
    }
    Ok(())
}

fn revenue() -> Expr {
    col("l_extendedprice") * (lit_f64(1.0) - col("l_discount"))
}

fn q4(s: &Session) -> Result<DataFrame> {
    let orders = s
        .table("orders")?
        .filter(col("o_orderdate").gt_eq(lit_date("1993-07-01")).and(col("o_orderdate").lt(lit_date("1993-10-01"))))?;
    let late = s.table("lineitem")?.filter(col("l_commitdate").lt(col("l_receiptdate")))?;
    orders
        .join(&late, JoinKind::LeftSemi, vec![(col("o_orderkey"), col("l_orderkey"))])?
        .group_agg(vec![(col("o_orderpriority"), "o_orderpriority")], vec![AggExpr::count_star("order_count")])?
        .sort(vec![SortKey::asc("o_orderpriority")])
}

fn q13(s: &Session) -> Result<DataFrame> {
    let orders = s.table("orders")?.filter(col("o_comment").starts_with("special").not())?;
    s.table("customer")?
        .join(&orders, JoinKind::LeftOuter, vec![(col("c_custkey"), col("o_custkey"))])?
        .group_agg(
            vec![(col("c_custkey"), "c_custkey")],
            vec![AggExpr::new(AggFunc::Count, col("o_orderkey"), "c_count")],
        )?
        .group_agg(vec![(col("c_count"), "c_count")], vec![AggExpr::count_star("custdist")])?
        .sort(vec![SortKey::desc("custdist"), SortKey::desc("c_count")])
}

fn q14(s: &Session) -> Result<DataFrame> {
    let promo = udf("promo_revenue", vec![col("p_type"), col("l_extendedprice"), col("l_discount")]);
    s.table("lineitem")?
        .filter(col("l_shipdate").gt_eq(lit_date("1995-09-01")).and(col("l_shipdate").lt(lit_date("1995-10-01"))))?
        .join(&s.table("part")?, JoinKind::Inner, vec![(col("l_partkey"), col("p_partkey"))])?
        .group_agg(
            vec![],
            vec![AggExpr::new(AggFunc::Sum, promo, "promo"), AggExpr::new(AggFunc::Sum, revenue(), "total")],
        )?
        .select(vec![(lit_f64(100.0) * col("promo") / col("total"), "promo_revenue")])
}

/// SQL text of a suite query, for those expressible in the SQL subset.
pub fn sql(name: &str) -> Option<&'static str> {
    Some(match name {
        "q1" => Q1,
        "q3" => Q3,
        "q6" => Q6,
        "q12" => Q12,
        "q19" => Q19,
        _ => return None,
    })
}

/// Builds a suite query against the session's tables. Registers the suite
/// UDFs first.
pub fn build(session: &mut Session, name: &str) -> Result<DataFrame> {
    register_udfs(session)?;
    let s = &*session;
    match name {
        "q4" => q4(s),
        "q13" => q13(s),
        "q14" => q14(s),
        other => match sql(other) {
            Some(text) => s.sql(text),
            None => Err(Error::UnknownQuery(format!("{other:?} (suite: {})", SUITE.join(", ")))),
        },
    }
}
