//! COST: the smallest thread count at which a system beats a single-threaded
//! baseline.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostRow {
    pub threads: usize,
    pub wall_ms: f64,
    /// Relative to this system's own 1-thread time (or its first row).
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostReport {
    pub query: String,
    pub baseline_ms: f64,
    pub rows: Vec<CostRow>,
    /// `None` when no measured thread count beats the baseline.
    pub cost: Option<usize>,
}

impl CostReport {
    pub fn cost_label(&self) -> String {
        self.cost.map_or_else(|| "infinity".to_string(), |c| c.to_string())
    }
}

/// `measurements` are `(threads, wall ms)` of the system under test;
/// `baseline_single_thread_ms` is the other system's 1-thread time.
pub fn cost_report(query: &str, measurements: &[(usize, f64)], baseline_single_thread_ms: f64) -> CostReport {
    let mut sorted = measurements.to_vec();
    sorted.sort_by_key(|m| m.0);
    let t1 = sorted.iter().find(|m| m.0 == 1).or(sorted.first()).map_or(f64::NAN, |m| m.1);
    let rows = sorted.iter().map(|&(threads, wall_ms)| CostRow { threads, wall_ms, speedup: t1 / wall_ms }).collect();
    let cost = sorted.iter().find(|m| m.1 < baseline_single_thread_ms).map(|m| m.0);
    CostReport { query: query.to_string(), baseline_ms: baseline_single_thread_ms, rows, cost }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "query {}  baseline {:.3} ms  COST {}", self.query, self.baseline_ms, self.cost_label())?;
        writeln!(f, "{:>8} {:>12} {:>9}", "threads", "wall_ms", "speedup")?;
        for r in &self.rows {
            writeln!(f, "{:>8} {:>12.3} {:>8.2}x", r.threads, r.wall_ms, r.speedup)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry() {
        let r = cost_report("q6", &[(1, 10.0)], 5.0);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].speedup, 1.0);
        assert_eq!(r.cost, None);
        assert_eq!(r.cost_label(), "infinity");
    }

    #[test]
    fn smallest_beating_count() {
        let r = cost_report("q1", &[(4, 3.0), (1, 10.0), (2, 6.0)], 7.0);
        assert_eq!(r.cost, Some(2));
        assert_eq!(r.rows.iter().map(|r| r.threads).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert_eq!(r.to_string(), cost_report("q1", &[(1, 10.0), (2, 6.0), (4, 3.0)], 7.0).to_string());
    }
}
