//! CSV rendering with round-trip exact numbers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::ews::{FtleSeries, RegionGrid, SafePointReport};
use crate::integrator::Trajectory;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[String]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.as_ref().join(","));
        out.push('\n');
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    csv(
        &["t", "x"],
        traj.times().iter().zip(traj.states()).map(|(t, x)| [num(*t), num(*x)]),
    )
}

pub fn ftle_csv(series: &FtleSeries) -> String {
    csv(
        &["t", "lambda"],
        series.times.iter().zip(&series.values).map(|(t, v)| [num(*t), num(*v)]),
    )
}

pub fn region_csv(grid: &RegionGrid) -> String {
    csv(
        &["axis1", "axis2", "outcome"],
        grid.cells
            .iter()
            .map(|c| [num(c.axis1), num(c.axis2), c.outcome.render()]),
    )
}

pub fn safepoints_csv(report: &SafePointReport) -> String {
    csv(
        &["t", "u_delta", "m_frozen", "m_future", "flag"],
        report.rows.iter().map(|r| {
            [
                num(r.t),
                num(r.u_delta),
                num(r.m_frozen),
                num(r.m_future),
                r.flag.as_str().to_string(),
            ]
        }),
    )
}

/// Two-column CSV from paired slices.
pub fn columns_csv(names: [&str; 2], a: &[f64], b: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{},{}", names[0], names[1]);
    for (x, y) in a.iter().zip(b) {
        let _ = writeln!(out, "{},{}", num(*x), num(*y));
    }
    out
}

pub fn write(path: &Path, content: &str) -> io::Result<()> {
    fs::write(path, content)
}
