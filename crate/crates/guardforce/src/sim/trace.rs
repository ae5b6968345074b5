//! Time-indexed run record and its CSV projection.
//!
//! The CSV schema is fixed:
//! `t,q1..qn,qd1..qdn,x,z_force,b_fc_z,sigma,active,violation`
//! where `qd` columns hold the commanded decision variable (joint rates
//! at velocity level, torques at torque level), `x` is the end-effector
//! coordinate along the contact axis, and `z_force`/`b_fc_z`/`sigma`
//! report the contact-axis slots. Floats are written with 12 significant
//! digits and LF line endings so identical runs produce byte-identical
//! files.

use crate::environment::ContactAxis;
use crate::Vec6;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One control tick worth of signals, sampled at the tick start.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: f64,
    pub q: Vec<f64>,
    /// Filtered command applied over the tick.
    pub u_star: Vec<f64>,
    /// Nominal command before filtering.
    pub u_nom: Vec<f64>,
    pub x: [f64; 3],
    pub xdot: [f64; 3],
    /// Contact-axis reference coordinate.
    pub x_ref: f64,
    pub h_e: Vec6,
    pub b_fc: Vec6,
    pub sigma: Vec6,
    pub z1: Vec6,
    pub z2: Vec6,
    pub z3: Option<Vec6>,
    pub active_set: Vec<usize>,
    pub lambda: Vec<f64>,
    pub in_contact: bool,
    pub violation: bool,
    pub slack_used: bool,
}

/// Complete run record on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trace {
    pub dt: f64,
    pub axis: ContactAxis,
    /// Force limit on the contact axis (N).
    pub f_max: f64,
    pub rows: Vec<TraceRow>,
    /// Largest contact force seen between samples (N).
    pub substep_peak_force: f64,
}

impl Trace {
    pub fn axis_force(&self, row: &TraceRow) -> f64 {
        row.h_e[self.axis.index]
    }

    pub fn barrier_trace(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.b_fc[self.axis.index]).collect()
    }

    pub fn force_trace(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h_e[self.axis.index]).collect()
    }

    pub fn contact_flags(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.in_contact).collect()
    }
}

/// Format a float with 12 significant digits. Idempotent under
/// parse-then-format, which makes CSV round trips exact.
pub fn format_sig(v: f64) -> String {
    format!("{:.11e}", v)
}

pub fn csv_header(dof: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=dof).map(|i| format!("q{i}")));
    cols.extend((1..=dof).map(|i| format!("qd{i}")));
    cols.extend(
        ["x", "z_force", "b_fc_z", "sigma", "active", "violation"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

/// Serialize the trace to the documented CSV schema.
pub fn to_csv(trace: &Trace) -> String {
    let dof = trace.rows.first().map_or(0, |r| r.q.len());
    let mut out = String::with_capacity(trace.rows.len() * 200);
    out.push_str(&csv_header(dof));
    out.push('\n');
    let axis = trace.axis.index;
    for row in &trace.rows {
        let mut fields: Vec<String> = Vec::with_capacity(2 * dof + 7);
        fields.push(format_sig(row.t));
        fields.extend(row.q.iter().map(|&v| format_sig(v)));
        fields.extend(row.u_star.iter().map(|&v| format_sig(v)));
        fields.push(format_sig(row.x[axis]));
        fields.push(format_sig(row.h_e[axis]));
        fields.push(format_sig(row.b_fc[axis]));
        fields.push(format_sig(row.sigma[axis]));
        fields.push(format!("{}", row.active_set.len()));
        fields.push(format!("{}", u8::from(row.violation)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parsed CSV projection: header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> Result<CsvTable, TraceError> {
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or(TraceError::Parse {
        line: 0,
        message: "empty file".into(),
    })?;
    let header: Vec<String> = header_line.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect();
        let row = row.map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })?;
        if row.len() != header.len() {
            return Err(TraceError::Parse {
                line: i + 1,
                message: format!("expected {} fields, got {}", header.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// Re-serialize a parsed table with the canonical formatting. The last
/// two columns are integer flags.
pub fn table_to_csv(table: &CsvTable) -> String {
    let mut out = String::new();
    out.push_str(&table.header.join(","));
    out.push('\n');
    let n = table.header.len();
    for row in &table.rows {
        let fields: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i + 2 >= n {
                    format!("{}", v as i64)
                } else {
                    format_sig(v)
                }
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
