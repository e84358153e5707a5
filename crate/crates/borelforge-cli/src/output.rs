//! Files written by a run: expression JSON, report JSON and text, CSV grids.

use std::fs;
use std::path::Path;

use serde_json::json;

use borelforge::{Region, SmoothExpr};

use crate::job::Outputs;
use crate::{CliError, Outcome};

/// Samples per axis of a dumped grid.
pub const GRID_1D: usize = 1001;
pub const GRID_2D: usize = 101;

pub fn write_outcome(dir: &Path, names: &Outputs, o: &Outcome, dump_grid: bool) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    if let Some(e) = &o.expr {
        fs::write(dir.join(&names.expr), expr_json(e)?)?;
        if dump_grid || names.grid.is_some() {
            let name = names.grid.clone().unwrap_or_else(|| "grid.csv".into());
            write_grid(&dir.join(name), e)?;
        }
    }
    let status = if o.report.pass { "ok" } else { "verification-failed" };
    let doc = json!({
        "command": o.command,
        "status": status,
        "exit_code": crate::outcome_code(o),
        "result": o.result,
        "report": o.report,
    });
    fs::write(dir.join(&names.report), serde_json::to_string_pretty(&doc).map_err(io)?)?;
    fs::write(dir.join(&names.text), o.report.to_text())?;
    Ok(())
}

/// Report for a construction that failed partway.
pub fn write_failure(dir: &Path, names: &Outputs, command: &str, err: &CliError) -> Result<(), CliError> {
    let CliError::Construction { message, report } = err else { return Ok(()) };
    fs::create_dir_all(dir)?;
    let doc = json!({
        "command": command,
        "status": "construction-failed",
        "exit_code": 2,
        "error": message,
        "report": report,
    });
    fs::write(dir.join(&names.report), serde_json::to_string_pretty(&doc).map_err(io)?)?;
    fs::write(dir.join(&names.text), format!("{}  error: {message}\n", report.to_text()))?;
    Ok(())
}

fn io(e: serde_json::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

pub fn expr_json(e: &SmoothExpr) -> Result<String, CliError> {
    serde_json::to_string_pretty(e).map_err(io)
}

fn grid_points(r: &Region) -> Vec<Vec<f64>> {
    let (lo, hi) = (r.lo(), r.hi());
    let axis = |i: usize, n: usize| -> Vec<f64> { (0..n).map(|t| lo[i] + (hi[i] - lo[i]) * t as f64 / (n - 1) as f64).collect() };
    if r.dim() == 1 {
        axis(0, GRID_1D).into_iter().map(|x| vec![x]).collect()
    } else {
        let ys = axis(1, GRID_2D);
        axis(0, GRID_2D).into_iter().flat_map(|x| ys.iter().map(move |y| vec![x, *y])).collect()
    }
}

/// `x,f,df` in 1D and `x,y,f` in 2D.
pub fn write_grid(path: &Path, e: &SmoothExpr) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let csv_err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    let one_d = e.dim() == 1;
    if one_d {
        w.write_record(["x", "f", "df"]).map_err(csv_err)?;
    } else {
        w.write_record(["x", "y", "f"]).map_err(csv_err)?;
    }
    for p in grid_points(e.region()) {
        let row: Vec<String> = if one_d {
            let d = e.eval_derivs(&p, 1).map_err(|err| CliError::Io(std::io::Error::other(err)))?;
            vec![p[0].to_string(), d[0].to_string(), d[1].to_string()]
        } else {
            let v = e.eval(&p).map_err(|err| CliError::Io(std::io::Error::other(err)))?;
            vec![p[0].to_string(), p[1].to_string(), v.to_string()]
        };
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
