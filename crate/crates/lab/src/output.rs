//! CSV and JSON writers. Floats are written in shortest round-trip form so reruns are
//! byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use gavg_core::{LatticeSolution, SolutionField};
use serde::Serialize;

use crate::error::LabResult;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> LabResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> LabResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t, x, u, obstacle_active` for every node, time ascending.
pub fn write_solution(path: &Path, field: &SolutionField) -> LabResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "u", "obstacle_active"])?;
    for k in 0..=field.nt {
        let t = field.t(k).to_string();
        for j in 0..field.grid.nodes() {
            w.write_record([
                t.as_str(),
                &field.grid.x(j).to_string(),
                &field.value(k, j).to_string(),
                if field.obstacle_active(k, j) { "1" } else { "0" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `k, j, t, x, Y, Z, A` for every lattice node, root first.
pub fn write_lattice(path: &Path, solution: &LatticeSolution) -> LabResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "j", "t", "x", "Y", "Z", "A"])?;
    let mut failure = None;
    solution.for_each_node(|k, j, t, x, y, z, a| {
        if failure.is_none() {
            let record = [k.to_string(), j.to_string(), t.to_string(), x.to_string(), y.to_string(), z.to_string(), a.to_string()];
            if let Err(e) = w.write_record(&record) {
                failure = Some(e);
            }
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}
