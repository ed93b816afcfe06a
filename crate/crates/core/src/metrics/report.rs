//! Per-image metric rows over a directory, with aggregates, CSV and a text
//! table.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::{psnr, ssim, uciqe, uiqm};
use crate::error::{Error, Result};
use crate::image_io::{read_image, ImageFormat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Psnr,
    Ssim,
    Uiqm,
    Uciqe,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Psnr, Metric::Ssim, Metric::Uiqm, Metric::Uciqe];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::Uiqm => "uiqm",
            Metric::Uciqe => "uciqe",
        }
    }

    pub fn needs_reference(self) -> bool {
        matches!(self, Metric::Psnr | Metric::Ssim)
    }

    /// Parses a comma-separated list such as `psnr,uiqm`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out: Vec<Metric> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(Error::InvalidArgument("empty metric list".into()));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown metric `{s}` (expected psnr, ssim, uiqm or uciqe)"
                ))
            })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub reference: Option<PathBuf>,
    pub metrics: Vec<Metric>,
    /// Fail on the first unreadable image instead of skipping it.
    pub strict: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            reference: None,
            metrics: vec![Metric::Uiqm, Metric::Uciqe],
            strict: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricRow {
    /// File name relative to the evaluated directory.
    pub path: String,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub uiqm: Option<f64>,
    pub uciqe: Option<f64>,
    /// Why some or all values are missing.
    pub warning: Option<String>,
}

impl MetricRow {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Psnr => self.psnr,
            Metric::Ssim => self.ssim,
            Metric::Uiqm => self.uiqm,
            Metric::Uciqe => self.uciqe,
        }
    }

    fn set(&mut self, m: Metric, v: f64) {
        let slot = match m {
            Metric::Psnr => &mut self.psnr,
            Metric::Ssim => &mut self.ssim,
            Metric::Uiqm => &mut self.uiqm,
            Metric::Uciqe => &mut self.uciqe,
        };
        *slot = Some(v);
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub metrics: Vec<Metric>,
    /// Sorted by file name.
    pub rows: Vec<MetricRow>,
}

/// `"inf"` for the PSNR sentinel, shortest round-trip form otherwise.
pub(crate) fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

/// Table cell: fixed decimals, `"inf"` for the PSNR sentinel, `-` when absent.
pub fn format_cell(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) => format!("{v:.decimals$}"),
        None => "-".into(),
    }
}

impl MetricReport {
    /// Rows that carry a value for `m`.
    pub fn count(&self, m: Metric) -> usize {
        self.rows.iter().filter(|r| r.get(m).is_some()).count()
    }

    /// Arithmetic mean over rows that carry `m`; infinite if any PSNR is.
    pub fn mean(&self, m: Metric) -> Option<f64> {
        let values: Vec<f64> = self.rows.iter().filter_map(|r| r.get(m)).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn warnings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.rows
            .iter()
            .filter_map(|r| r.warning.as_deref().map(|w| (r.path.as_str(), w)))
    }

    /// `path,psnr,ssim,uiqm,uciqe`, one line per row; absent values are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,psnr,ssim,uiqm,uciqe\n");
        for row in &self.rows {
            out.push_str(&row.path);
            for m in Metric::ALL {
                out.push(',');
                if let Some(v) = row.get(m) {
                    out.push_str(&format_value(v));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`MetricReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<MetricReport> {
        let bad = |m: String| Error::InvalidArgument(format!("metric csv: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("path,psnr,ssim,uiqm,uciqe") {
            return Err(bad("missing header".into()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(format!("line {}: expected 5 fields", i + 2)));
            }
            let mut row = MetricRow {
                path: fields[0].to_string(),
                ..Default::default()
            };
            for (m, f) in Metric::ALL.into_iter().zip(&fields[1..]) {
                if !f.is_empty() {
                    let v = f
                        .parse::<f64>()
                        .map_err(|_| bad(format!("line {}: bad number `{f}`", i + 2)))?;
                    row.set(m, v);
                }
            }
            rows.push(row);
        }
        let metrics = Metric::ALL
            .into_iter()
            .filter(|&m| rows.iter().any(|r| r.get(m).is_some()))
            .collect();
        Ok(MetricReport { metrics, rows })
    }

    /// Aligned text table: one line per image, then the means.
    pub fn table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.path.len())
            .chain([12])
            .max()
            .unwrap_or(12);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "image");
        for m in &self.metrics {
            let _ = write!(out, " {:>9}", m.name().to_uppercase());
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<width$}", row.path);
            for &m in &self.metrics {
                let _ = write!(out, " {:>9}", format_cell(row.get(m), 4));
            }
            if let Some(w) = &row.warning {
                let _ = write!(out, "  ({w})");
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<width$}", format!("mean (n={})", self.rows.len()));
        for &m in &self.metrics {
            let _ = write!(out, " {:>9}", format_cell(self.mean(m), 4));
        }
        out.push('\n');
        out
    }
}

fn image_files(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && ImageFormat::from_path(&path).is_ok() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

fn evaluate_one(dir: &Path, name: &str, opts: &EvalOptions) -> Result<MetricRow> {
    let mut row = MetricRow {
        path: name.to_string(),
        ..Default::default()
    };
    let image = match read_image(&dir.join(name)) {
        Ok(img) => img,
        Err(e) if !opts.strict => {
            row.warning = Some(format!("skipped: {e}"));
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let mut reference = None;
    if let Some(ref_dir) = &opts.reference {
        if opts.metrics.iter().any(|m| m.needs_reference()) {
            match read_image(&ref_dir.join(name)) {
                Ok(r) if r.shape() == image.shape() => reference = Some(r),
                Ok(r) => {
                    row.warning = Some(format!(
                        "reference size {:?} differs from {:?}",
                        &r.shape()[2..],
                        &image.shape()[2..]
                    ))
                }
                Err(e) => row.warning = Some(format!("no usable reference: {e}")),
            }
        }
    }
    for &m in &opts.metrics {
        let value = match (m, &reference) {
            (Metric::Psnr, Some(r)) => psnr(&image, r, 1.0),
            (Metric::Ssim, Some(r)) => ssim(&image, r),
            (Metric::Psnr | Metric::Ssim, None) => continue,
            (Metric::Uiqm, _) => uiqm(&image),
            (Metric::Uciqe, _) => uciqe(&image),
        };
        match value {
            Ok(v) => row.set(m, v),
            Err(e) if !opts.strict => {
                row.warning.get_or_insert_with(|| format!("{m}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(row)
}

/// Evaluates every `.png`/`.ppm` in `dir`, in file-name order. With a
/// reference directory, files are paired by name.
pub fn evaluate_dir(dir: &Path, opts: &EvalOptions) -> Result<MetricReport> {
    if opts.reference.is_none() {
        if let Some(m) = opts.metrics.iter().find(|m| m.needs_reference()) {
            return Err(Error::InvalidArgument(format!(
                "{m} needs a reference directory"
            )));
        }
    }
    let names = image_files(dir)?;
    let rows = names
        .par_iter()
        .map(|name| evaluate_one(dir, name, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        metrics: opts.metrics.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> MetricReport {
        MetricReport {
            metrics: Metric::ALL.to_vec(),
            rows: vec![
                MetricRow {
                    path: "a.png".into(),
                    psnr: Some(f64::INFINITY),
                    ssim: Some(1.0),
                    uiqm: Some(0.125),
                    uciqe: Some(0.3),
                    warning: None,
                },
                MetricRow {
                    path: "b.png".into(),
                    uiqm: Some(1.0 / 3.0),
                    uciqe: Some(0.6),
                    warning: Some("no usable reference".into()),
                    ..Default::default()
                },
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = report();
        let csv = r.to_csv();
        assert!(csv.starts_with("path,psnr,ssim,uiqm,uciqe\na.png,inf,1,0.125,0.3\nb.png,,,"));
        let back = MetricReport::from_csv(&csv).unwrap();
        for m in Metric::ALL {
            assert_eq!(back.mean(m), r.mean(m));
        }
    }

    #[test]
    fn means_skip_missing_rows() {
        let r = report();
        assert_eq!(r.count(Metric::Ssim), 1);
        assert_eq!(r.mean(Metric::Ssim), Some(1.0));
        assert_eq!(r.mean(Metric::Psnr), Some(f64::INFINITY));
        assert!((r.mean(Metric::Uciqe).unwrap() - 0.45).abs() < 1e-15);
        assert!(r.table().contains("mean (n=2)"));
    }

    #[test]
    fn metric_lists() {
        assert_eq!(
            Metric::parse_list("uciqe, PSNR,uciqe").unwrap(),
            vec![Metric::Psnr, Metric::Uciqe]
        );
        assert!(Metric::parse_list("lpips").is_err());
        assert!(Metric::parse_list("").is_err());
    }
}
