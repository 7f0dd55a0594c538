//! Per-iteration cost traces.

use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub cost: f64,
    pub data_term: f64,
    pub reg_term: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostTrace {
    pub rows: Vec<TraceRow>,
}

impl CostTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, iter: usize, data_term: f64, reg_term: f64) {
        self.rows.push(TraceRow {
            iter,
            cost: data_term + reg_term,
            data_term,
            reg_term,
        });
    }

    pub fn costs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cost).collect()
    }

    pub fn first(&self) -> Option<f64> {
        self.rows.first().map(|r| r.cost)
    }

    pub fn last(&self) -> Option<f64> {
        self.rows.last().map(|r| r.cost)
    }

    /// Largest increase between consecutive costs (0 if never increasing).
    pub fn max_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].cost - w[0].cost)
            .fold(0.0, f64::max)
    }

    /// True when no step increases the cost by more than `slack`, scaled
    /// by `max(1, |first cost|)`.
    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        let scale = self.first().map_or(1.0, |c| c.abs().max(1.0));
        self.max_increase() <= slack * scale
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,cost,data_term,reg_term\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.12e},{:.12e},{:.12e}", r.iter, r.cost, r.data_term, r.reg_term);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
