//! CSV writers. Floats are written with 17 significant digits so that files
//! round-trip exactly and reruns can be compared byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dualvar_core::grid::Field;
use dualvar_core::optimizer::IterationRecord;

use crate::error::Result;

pub const TRACE_HEADER: &str = "iter,objective,grad_norm,primal_residual";
pub const VERIFY_HEADER: &str = "check_name,value,threshold,pass";
pub const SWEEP_HEADER: &str = "param,converged,final_objective,final_residual,error_vs_oracle";

pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn trace_csv(records: impl IntoIterator<Item = IterationRecord>) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iter,
            float(r.objective),
            float(r.grad_norm),
            float(r.primal_residual)
        );
    }
    out
}

/// One row per node and component: time, space coordinates, component,
/// value. Nodes are in the grid's storage order.
pub fn field_csv(field: &Field) -> String {
    let g = field.grid();
    let mut out = String::from(if g.space_dim() == 2 {
        "axis0,axis1,axis2,component,value\n"
    } else {
        "axis0,axis1,component,value\n"
    });
    for node in 0..g.n_nodes() {
        let (t, x, y) = g.position(node);
        for (c, v) in field.node(node).iter().enumerate() {
            if g.space_dim() == 2 {
                let _ = writeln!(
                    out,
                    "{},{},{},{c},{}",
                    float(t),
                    float(x),
                    float(y),
                    float(*v)
                );
            } else {
                let _ = writeln!(out, "{},{},{c},{}", float(t), float(x), float(*v));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn verify_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from(VERIFY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.name,
            float(r.value),
            float(r.threshold),
            r.pass
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub converged: bool,
    pub final_objective: f64,
    pub final_residual: f64,
    pub error_vs_oracle: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.param,
            r.converged,
            float(r.final_objective),
            float(r.final_residual),
            float(r.error_vs_oracle)
        );
    }
    out
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dualvar_core::grid::SpaceTimeGrid;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(f64::NAN), "NaN");
    }

    #[test]
    fn field_rows() {
        let g = SpaceTimeGrid::new_1d(4, 4, 0.0, 1.0, 1.0).unwrap();
        let f = Field::from_fn(g, 2, |t, x, _, o| {
            o[0] = t;
            o[1] = x;
        });
        let csv = field_csv(&f);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "axis0,axis1,component,value");
        assert_eq!(lines.len(), 1 + 16 * 2);
        let cols: Vec<&str> = lines[4].split(',').collect();
        // second node, second component: x = 1/3
        assert_eq!(cols[2], "1");
        assert_eq!(cols[3].parse::<f64>().unwrap(), g.x(1));
    }
}
