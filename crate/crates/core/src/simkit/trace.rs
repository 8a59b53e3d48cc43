//! Time-indexed record of one simulation run and its CSV form.

use std::io::Write;
use std::path::Path;

use crate::dynamics::RotorUnitState;
use crate::error::{Error, Result};
use crate::tower::tower_base_load_metric;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorRecord {
    pub v: f64,
    pub v_hat: f64,
    pub state: RotorUnitState,
    pub t_g: f64,
    pub beta_ref: f64,
    pub p_g: f64,
    pub dp_ref: f64,
    pub thrust: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub t: f64,
    pub rotors: [RotorRecord; 3],
    pub phi_z: f64,
    pub phi_z_dot: f64,
    pub u_c: f64,
    pub dp_total_ref: f64,
    pub dp_23_ref: f64,
    pub mitigation_active: bool,
}

const ROTOR_COLUMNS: [&str; 15] = [
    "v", "v_hat", "y_a", "y_b", "dtheta_s", "y_a_dot", "y_b_dot", "omega_r", "omega_g", "beta",
    "t_g", "beta_ref", "p_g", "dp_ref", "thrust",
];

const TOWER_COLUMNS: [&str; 6] = ["phi_z", "phi_z_dot", "u_c", "dp_total_ref", "dp_23_ref", "mitigation"];

impl TraceRow {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 3 * ROTOR_COLUMNS.len() + TOWER_COLUMNS.len());
        out.push(self.t);
        for r in &self.rotors {
            let s = &r.state;
            out.extend([
                r.v, r.v_hat, s.y_a, s.y_b, s.delta_theta_s, s.y_a_dot, s.y_b_dot, s.omega_r,
                s.omega_g, s.beta, r.t_g, r.beta_ref, r.p_g, r.dp_ref, r.thrust,
            ]);
        }
        out.extend([
            self.phi_z,
            self.phi_z_dot,
            self.u_c,
            self.dp_total_ref,
            self.dp_23_ref,
            if self.mitigation_active { 1.0 } else { 0.0 },
        ]);
        out
    }
}

/// Column names in file order.
pub fn column_names() -> Vec<String> {
    let mut names = vec!["time".to_string()];
    for i in 1..=3 {
        names.extend(ROTOR_COLUMNS.iter().map(|c| format!("{c}_{i}")));
    }
    names.extend(TOWER_COLUMNS.iter().map(|c| c.to_string()));
    names
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.t)
    }

    /// Rows with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> impl Iterator<Item = &TraceRow> + '_ {
        self.rows.iter().filter(move |r| r.t >= t0 && r.t <= t1)
    }

    /// RMS torsion angle over `[t0, t1]`.
    pub fn rms_phi_z(&self, t0: f64, t1: f64) -> Result<f64> {
        let phi: Vec<f64> = self.window(t0, t1).map(|r| r.phi_z).collect();
        tower_base_load_metric(&phi)
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| Error::Config {
            key: "trace".into(),
            reason: e.to_string(),
        };
        w.write_record(column_names()).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.values().iter().map(|v| format!("{v:e}")))
                .map_err(fail)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "trace".into(),
            source: e,
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
