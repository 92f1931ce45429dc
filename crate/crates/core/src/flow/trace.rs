use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "# t E Ql2 Qhm3 Qhk vol phimin phimax dt";

/// One accepted state of a flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub energy: f64,
    pub q_l2: f64,
    pub q_hm3: f64,
    pub q_hk: f64,
    pub volume: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    /// Step that led to this row; zero for the initial row.
    pub dt: f64,
}

/// Which norm of the gradient a decay fit reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormColumn {
    L2,
    HMinus3,
    Hk,
}

impl TraceRow {
    pub fn norm(&self, column: NormColumn) -> f64 {
        match column {
            NormColumn::L2 => self.q_l2,
            NormColumn::HMinus3 => self.q_hm3,
            NormColumn::Hk => self.q_hk,
        }
    }

    fn values(&self) -> [f64; 9] {
        [
            self.t,
            self.energy,
            self.q_l2,
            self.q_hm3,
            self.q_hk,
            self.volume,
            self.phi_min,
            self.phi_max,
            self.dt,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
}

impl FlowTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().is_none_or(|r| row.t > r.t));
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Trapezoidal `int ||Q||_{L^2}^2 dt` between rows `i` and `j`.
    pub fn dissipation(&self, i: usize, j: usize) -> f64 {
        self.rows[i..=j]
            .windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].q_l2.powi(2) + w[1].q_l2.powi(2)))
            .sum()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for row in &self.rows {
            let cols: Vec<String> = row.values().iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cols.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut trace = FlowTrace::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Trace(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != 9 {
                return Err(Error::Trace(format!(
                    "line {}: expected 9 columns, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            if let Some(prev) = trace.rows.last() {
                if vals[0] <= prev.t {
                    return Err(Error::Trace(format!("line {}: time is not increasing", lineno + 1)));
                }
            }
            trace.rows.push(TraceRow {
                t: vals[0],
                energy: vals[1],
                q_l2: vals[2],
                q_hm3: vals[3],
                q_hk: vals[4],
                volume: vals[5],
                phi_min: vals[6],
                phi_max: vals[7],
                dt: vals[8],
            });
        }
        Ok(trace)
    }
}
