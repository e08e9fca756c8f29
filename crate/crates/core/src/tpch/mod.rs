//! Simplified TPC-H: schemas, a deterministic generator and the query suite.

pub mod gen;
pub mod queries;
pub mod schema;

#[cfg(test)]
mod tests {
    use super::gen::{generate, GenConfig};
    use super::queries::{build, SUITE};
    use crate::runtime::{Backend, RunConfig};
    use crate::session::Session;
    use crate::value::Value;
    use crate::volcano::volcano_interpret;

    fn session(sf: f64) -> Session {
        let mut s = Session::new();
        for (name, t) in generate(&GenConfig::new(sf, 7).unwrap()) {
            s.register_table(name, t).unwrap();
        }
        s
    }

    #[test]
    fn sizes_at_small_scale() {
        let tables = generate(&GenConfig::new(0.01, 1).unwrap());
        let rows = |n: &str| tables.iter().find(|t| t.0 == n).unwrap().1.row_count();
        let li = rows("lineitem") as f64;
        assert!((li - 60_000.0).abs() <= 0.02 * 60_000.0, "lineitem {li}");
        assert_eq!(rows("orders"), 15_000);
        assert_eq!(rows("customer"), 1_500);
        assert_eq!(rows("nation"), 25);
        assert_eq!(rows("region"), 5);
    }

    #[test]
    fn same_seed_same_tables() {
        let a = generate(&GenConfig::new(0.002, 9).unwrap());
        let b = generate(&GenConfig::new(0.002, 9).unwrap());
        let c = generate(&GenConfig::new(0.002, 10).unwrap());
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            assert_eq!(x.1.rows(), y.1.rows());
            if x.0 == "lineitem" {
                assert_ne!(x.1.rows(), z.1.rows());
            }
        }
    }

    fn close(a: &[Vec<Value>], b: &[Vec<Value>]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.iter().zip(y).all(|(u, v)| match (u, v) {
                    (Value::Float64(p), Value::Float64(q)) => (p - q).abs() <= 1e-9 * p.abs().max(q.abs()).max(1.0),
                    _ => u == v,
                })
            })
    }

    #[test]
    fn suite_agrees_across_engines() {
        let mut s = session(0.005);
        for q in SUITE {
            let df = build(&mut s, q).unwrap();
            let oracle = volcano_interpret(&df.inlined().unwrap(), s.catalog()).unwrap().rows();
            assert!(!oracle.is_empty(), "{q} is empty");
            for (backend, threads) in [(Backend::Interpreter, 1), (Backend::Native, 1), (Backend::Native, 3)] {
                let got = s.execute(&df, &RunConfig::new(backend, threads)).unwrap().rows();
                assert!(close(&oracle, &got), "{q} {backend:?}x{threads}\n{oracle:?}\n{got:?}");
            }
        }
    }
}
