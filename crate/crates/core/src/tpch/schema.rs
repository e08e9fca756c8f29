//! Column layouts of the eight TPC-H tables.

use crate::catalog::{ColumnDef, DataType, Schema};

use DataType::{Date, Float64 as F, Int64 as I, Text as T};

fn build(cols: &[(&str, DataType)]) -> Schema {
    Schema::new(cols.iter().map(|(n, t)| ColumnDef::new(*n, *t)).collect()).expect("static schema")
}

pub fn lineitem() -> Schema {
    build(&[
        ("l_orderkey", I),
        ("l_partkey", I),
        ("l_suppkey", I),
        ("l_linenumber", I),
        ("l_quantity", F),
        ("l_extendedprice", F),
        ("l_discount", F),
        ("l_tax", F),
        ("l_returnflag", T),
        ("l_linestatus", T),
        ("l_shipdate", Date),
        ("l_commitdate", Date),
        ("l_receiptdate", Date),
        ("l_shipinstruct", T),
        ("l_shipmode", T),
        ("l_comment", T),
    ])
}

pub fn orders() -> Schema {
    build(&[
        ("o_orderkey", I),
        ("o_custkey", I),
        ("o_orderstatus", T),
        ("o_totalprice", F),
        ("o_orderdate", Date),
        ("o_orderpriority", T),
        ("o_clerk", T),
        ("o_shippriority", I),
        ("o_comment", T),
    ])
}

pub fn customer() -> Schema {
    build(&[
        ("c_custkey", I),
        ("c_name", T),
        ("c_address", T),
        ("c_nationkey", I),
        ("c_phone", T),
        ("c_acctbal", F),
        ("c_mktsegment", T),
        ("c_comment", T),
    ])
}

pub fn part() -> Schema {
    build(&[
        ("p_partkey", I),
        ("p_name", T),
        ("p_mfgr", T),
        ("p_brand", T),
        ("p_type", T),
        ("p_size", I),
        ("p_container", T),
        ("p_retailprice", F),
        ("p_comment", T),
    ])
}

pub fn partsupp() -> Schema {
    build(&[("ps_partkey", I), ("ps_suppkey", I), ("ps_availqty", I), ("ps_supplycost", F), ("ps_comment", T)])
}

pub fn supplier() -> Schema {
    build(&[
        ("s_suppkey", I),
        ("s_name", T),
        ("s_address", T),
        ("s_nationkey", I),
        ("s_phone", T),
        ("s_acctbal", F),
        ("s_comment", T),
    ])
}

pub fn nation() -> Schema {
    build(&[("n_nationkey", I), ("n_name", T), ("n_regionkey", I), ("n_comment", T)])
}

pub fn region() -> Schema {
    build(&[("r_regionkey", I), ("r_name", T), ("r_comment", T)])
}

pub const TABLES: [&str; 8] = ["lineitem", "orders", "customer", "part", "partsupp", "supplier", "nation", "region"];

pub fn by_name(name: &str) -> Option<Schema> {
    Some(match name {
        "lineitem" => lineitem(),
        "orders" => orders(),
        "customer" => customer(),
        "part" => part(),
        "partsupp" => partsupp(),
        "supplier" => supplier(),
        "nation" => nation(),
        "region" => region(),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discount_ordinal() {
        assert_eq!(lineitem().resolve("l_discount").unwrap(), (6, F));
        assert_eq!(lineitem().len(), 16);
        for t in TABLES {
            assert!(by_name(t).is_some());
        }
    }
}
