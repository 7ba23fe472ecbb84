//! Per-grid-point trace table and its CSV form.

use std::io::{self, Write};

/// Column names for a state dimension `n`, optionally with the baseline error.
pub fn header(n: usize, baseline: bool) -> Vec<String> {
    let indexed = |name: &'static str| (1..=n).map(move |i| format!("{name}_{i}"));
    let mut cols = vec!["t".to_string()];
    cols.extend(indexed("x"));
    cols.extend(indexed("xhat"));
    cols.push("state_err".into());
    cols.extend(indexed("theta_hat"));
    cols.extend(indexed("theta_g_hat"));
    cols.push("param_err".into());
    cols.push("Delta".into());
    cols.push("Ycal".into());
    cols.extend(indexed("psi"));
    if baseline {
        cols.push("kb_err".into());
    }
    cols
}

/// One row per grid point, in [`header`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub state_err: f64,
    pub theta_hat: Vec<f64>,
    pub theta_g_hat: Vec<f64>,
    pub param_err: f64,
    pub delta: f64,
    pub y_cal: f64,
    pub psi: Vec<f64>,
    pub kb_err: Option<f64>,
}

impl TraceRow {
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        v.extend(&self.x);
        v.extend(&self.x_hat);
        v.push(self.state_err);
        v.extend(&self.theta_hat);
        v.extend(&self.theta_g_hat);
        v.push(self.param_err);
        v.push(self.delta);
        v.push(self.y_cal);
        v.extend(&self.psi);
        v.extend(self.kb_err);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub n: usize,
    pub baseline: bool,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn header(&self) -> Vec<String> {
        header(self.n, self.baseline)
    }

    /// Writes the trace as CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header().join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (i, v) in row.values().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                // Adding zero maps -0 to 0.
                line.push_str(&format!("{:.16e}", v + 0.0));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    /// `(t, state_err)` pairs.
    pub fn state_errors(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, r.state_err)).collect()
    }
}
