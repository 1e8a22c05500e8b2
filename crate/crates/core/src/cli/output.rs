//! Output files: CSV with `#` comment headers, sorted-key JSON summaries
//! and long-format plot data.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::convergence::SweepResult;
use crate::diagnostics::EntropyReport;
use crate::error::Result;

/// One named series of `(t, value)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub trait PlotData {
    fn series(&self) -> Vec<Series>;
}

fn zip_series(name: &str, t: &[f64], v: &[f64]) -> Series {
    Series { name: name.into(), points: t.iter().copied().zip(v.iter().copied()).collect() }
}

impl PlotData for EntropyReport {
    fn series(&self) -> Vec<Series> {
        vec![
            zip_series("S", &self.times, &self.s),
            zip_series("production", &self.times, &self.production_cum),
            zip_series("lhs", &self.times, &self.lhs),
            zip_series("budget", &self.times, &self.budget_series),
        ]
    }
}

/// The `t` column holds epsilon; distances are attached to the finer member
/// of each pair.
impl PlotData for SweepResult {
    fn series(&self) -> Vec<Series> {
        vec![
            zip_series("pairwise_l1", &self.epsilons[1..], &self.pairwise_l1),
            zip_series("weak_residual", &self.epsilons, &self.weak_residuals),
            zip_series("llogl_sup", &self.epsilons, &self.uniform_bounds),
        ]
    }
}

impl PlotData for Series {
    fn series(&self) -> Vec<Series> {
        vec![self.clone()]
    }
}

/// Long-format `series,t,value` table in input order.
pub fn write_plot_data(w: &mut impl Write, reports: &[&dyn PlotData], comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "series,t,value")?;
    for r in reports {
        for s in r.series() {
            for (t, v) in &s.points {
                writeln!(w, "{},{t},{v}", s.name)?;
            }
        }
    }
    Ok(())
}

pub fn emit_plot_data(path: &Path, reports: &[&dyn PlotData], comments: &[String]) -> Result<()> {
    let mut buf = Vec::new();
    write_plot_data(&mut buf, reports, comments)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_comments(w: &mut impl Write, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

/// Hex SHA-256 of the canonical (sorted-key) JSON form.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(cfg)?)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Sorted-key pretty JSON with a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
    s.push('\n');
    Ok(s)
}

/// Per-run output directory.
pub struct OutputDir {
    root: PathBuf,
    comments: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, comments: Vec<String>) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), comments })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    /// Writes a CSV with the comment header; `rows` are already formatted.
    pub fn csv(&self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut buf = Vec::new();
        write_comments(&mut buf, &self.comments)?;
        writeln!(buf, "{header}")?;
        for r in rows {
            writeln!(buf, "{r}")?;
        }
        fs::write(self.path(name), buf)?;
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        fs::write(self.path(name), to_sorted_json(value)?)?;
        Ok(())
    }

    pub fn plot(&self, name: &str, reports: &[&dyn PlotData]) -> Result<()> {
        emit_plot_data(&self.path(name), reports, &self.comments)
    }
}
