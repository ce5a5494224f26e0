use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::geometry::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    BudgetExhausted,
}

/// One recorded step. Channels that were not enabled are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// `||U_k x^k - x^k||`.
    pub residual: f64,
    pub dist_c: Option<f64>,
    pub dist_xstar: Option<f64>,
    /// `max_z ||x^{k+1} - z|| - ||x^k - z||` over the witnesses.
    pub fejer_slack: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    /// `(k, x^k)` every `store_every` steps.
    pub iterates: Vec<(usize, Vector)>,
    pub final_iterate: Vector,
    pub stop_reason: StopReason,
    /// Number of operator applications that produced `final_iterate`.
    pub total_steps: usize,
    /// Reference point behind the `dist_xstar` channel.
    pub xstar: Option<Vector>,
    /// Emit the `lambda_k` column.
    pub step_channel: bool,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_dist_c(&self) -> bool {
        self.rows.iter().any(|r| r.dist_c.is_some())
    }

    pub fn max_fejer_slack(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.fejer_slack)
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.max(s))))
    }

    pub fn iterate_at(&self, k: usize) -> Option<&Vector> {
        self.iterates
            .binary_search_by_key(&k, |(i, _)| *i)
            .ok()
            .map(|i| &self.iterates[i].1)
    }

    pub fn csv_header(&self) -> &'static str {
        if self.step_channel {
            "k,residual,dist_C,dist_xstar,fejer_slack,lambda_k"
        } else {
            "k,residual,dist_C,dist_xstar,fejer_slack"
        }
    }

    /// CSV with 17 significant digits per float and empty cells for
    /// disabled channels.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(self.csv_header());
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.k, float(row.residual));
            for cell in [row.dist_c, row.dist_xstar, row.fejer_slack] {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&float(v));
                }
            }
            if self.step_channel {
                out.push(',');
                if let Some(v) = row.lambda {
                    out.push_str(&float(v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let trace = IterationTrace {
            rows: vec![TraceRow {
                k: 0,
                residual: 0.5,
                dist_c: None,
                dist_xstar: Some(1.0),
                fejer_slack: None,
                lambda: None,
            }],
            iterates: vec![],
            final_iterate: Vector::zeros(1),
            stop_reason: StopReason::Converged,
            total_steps: 0,
            xstar: None,
            step_channel: false,
        };
        assert_eq!(
            trace.to_csv(),
            "k,residual,dist_C,dist_xstar,fejer_slack\n0,5.0000000000000000e-1,,1.0000000000000000e0,\n"
        );
    }
}
