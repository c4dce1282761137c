//! Experiment reports: named-column numeric tables with provenance
//! metadata, emitted as CSV (byte-deterministic, round-trippable) and as
//! simple SVG line plots.

use crate::error::{Result, SqgError};
use std::fmt::Write as _;
use std::path::Path;

/// A numeric table with named columns plus run provenance.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Column names, one per entry of each row.
    pub columns: Vec<String>,
    /// Data rows; every row has `columns.len()` entries.
    pub rows: Vec<Vec<f64>>,
    /// Crate version at run time.
    pub version: String,
    /// SHA-256 hash of the canonical config.
    pub config_hash: String,
    /// Wall-clock duration of the run, seconds.
    pub wall_time: f64,
}

impl ExperimentReport {
    /// Creates an empty report bound to a config hash.
    pub fn new(columns: &[&str], config_hash: &str) -> Self {
        ExperimentReport {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            wall_time: 0.0,
        }
    }

    /// Appends one row (must match the column count).
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Serializes as CSV. The config hash and version ride in comment
    /// lines; the wall time rides in its own comment line that round-trip
    /// comparison ignores. The data section is byte-deterministic for
    /// identical rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# config_hash={}", self.config_hash);
        let _ = writeln!(out, "# version={}", self.version);
        let _ = writeln!(out, "# wall_time_s={:.3}", self.wall_time);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Parses the format produced by [`ExperimentReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut config_hash = String::new();
        let mut version = String::new();
        let mut wall_time = 0.0;
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("config_hash=") {
                    config_hash = v.to_string();
                } else if let Some(v) = rest.strip_prefix("version=") {
                    version = v.to_string();
                } else if let Some(v) = rest.strip_prefix("wall_time_s=") {
                    wall_time = v.parse().unwrap_or(0.0);
                }
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(|s| s.to_string()).collect()),
                Some(cols) => {
                    let row: Vec<f64> = line
                        .split(',')
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| SqgError::Config(format!("bad CSV row: {line}")))?;
                    if row.len() != cols.len() {
                        return Err(SqgError::Config(format!(
                            "CSV row has {} cells, expected {}",
                            row.len(),
                            cols.len()
                        )));
                    }
                    rows.push(row);
                }
            }
        }
        let columns = columns.ok_or_else(|| SqgError::Config("CSV has no header".into()))?;
        Ok(ExperimentReport {
            columns,
            rows,
            version,
            config_hash,
            wall_time,
        })
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SqgError::Config(format!("no column '{name}'")))
    }

    /// Extracts one column as a vector.
    pub fn column_values(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Renders a deterministic SVG line plot of `y_cols` against `x_col`.
    /// Log axes take `log10` of the data first (requires positive values,
    /// non-positive points are skipped).
    pub fn to_svg(&self, x_col: &str, y_cols: &[&str], log_x: bool, log_y: bool) -> Result<String> {
        const W: f64 = 640.0;
        const H: f64 = 420.0;
        const M: f64 = 50.0;
        let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        let xs_raw = self.column_values(x_col)?;
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        let tf = |v: f64, log: bool| -> Option<f64> {
            if log {
                (v > 0.0).then(|| v.log10())
            } else {
                Some(v)
            }
        };
        for &name in y_cols {
            let ys = self.column_values(name)?;
            let pts: Vec<(f64, f64)> = xs_raw
                .iter()
                .zip(&ys)
                .filter_map(|(&x, &y)| Some((tf(x, log_x)?, tf(y, log_y)?)))
                .collect();
            series.push((name.to_string(), pts));
        }
        let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
        if all.is_empty() {
            return Err(SqgError::Config("no plottable points".into()));
        }
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x1 - x0 < 1e-300 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-300 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
             viewBox=\"0 0 {W} {H}\">"
        );
        let _ = writeln!(svg, "  <metadata>config_hash={}</metadata>", self.config_hash);
        let _ = writeln!(
            svg,
            "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>"
        );
        let _ = writeln!(
            svg,
            "  <rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" \
             stroke=\"black\"/>",
            W - 2.0 * M,
            H - 2.0 * M
        );
        let xlabel = if log_x { format!("log10({x_col})") } else { x_col.to_string() };
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            W / 2.0,
            H - 12.0,
            xlabel
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{:.4}</text>",
            M,
            H - M + 14.0,
            x0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{:.4}</text>",
            W - M,
            H - M + 14.0,
            x1
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{:.4}</text>",
            4.0,
            H - M,
            y0
        );
        let _ = writeln!(svg, "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{:.4}</text>", 4.0, M, y1);
        for (si, (name, pts)) in series.iter().enumerate() {
            let color = palette[si % palette.len()];
            if pts.len() > 1 {
                let path: Vec<String> = pts
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect();
                let _ = writeln!(
                    svg,
                    "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                     stroke-width=\"1.5\"/>",
                    path.join(" ")
                );
            }
            for &(x, y) in pts {
                let _ = writeln!(
                    svg,
                    "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                    px(x),
                    py(y)
                );
            }
            let _ = writeln!(
                svg,
                "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
                W - M - 140.0,
                M + 16.0 * (si as f64 + 1.0)
            );
        }
        let _ = writeln!(svg, "</svg>");
        Ok(svg)
    }

    /// Writes `<stem>.csv` (always) and `<stem>.svg` (when a plot spec is
    /// given) under `dir`.
    pub fn emit(
        &self,
        dir: &Path,
        stem: &str,
        plot: Option<(&str, &[&str], bool, bool)>,
    ) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        if let Some((x, ys, lx, ly)) = plot {
            std::fs::write(dir.join(format!("{stem}.svg")), self.to_svg(x, ys, lx, ly)?)?;
        }
        Ok(())
    }

    /// True when both reports hold the same data to `tol` per entry (used
    /// by the determinism check; metadata other than the config hash is
    /// ignored).
    pub fn rows_match(&self, other: &ExperimentReport, tol: f64) -> bool {
        self.columns == other.columns
            && self.config_hash == other.config_hash
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
                })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new(&["n", "error"], "deadbeef");
        r.push(vec![8.0, 1.25e-3]);
        r.push(vec![16.0, 3.125e-4]);
        r.wall_time = 1.5;
        r
    }

    #[test]
    fn csv_round_trips_exactly() {
        let r = sample();
        let back = ExperimentReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.columns, r.columns);
        assert_eq!(back.rows, r.rows);
        assert_eq!(back.config_hash, "deadbeef");
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ExperimentReport::new(&["a", "b"], "cafe");
        let csv = r.to_csv();
        let data_lines: Vec<&str> =
            csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data_lines, vec!["a,b"]);
        let back = ExperimentReport::from_csv(&csv).unwrap();
        assert!(back.rows.is_empty());
    }

    #[test]
    fn svg_is_deterministic_and_carries_hash() {
        let r = sample();
        let s1 = r.to_svg("n", &["error"], true, true).unwrap();
        let s2 = r.to_svg("n", &["error"], true, true).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.contains("config_hash=deadbeef"));
        assert!(s1.starts_with("<svg"));
    }

    #[test]
    fn rows_match_respects_tolerance() {
        let a = sample();
        let mut b = sample();
        assert!(a.rows_match(&b, 1e-12));
        b.rows[0][1] *= 1.0 + 1e-6;
        assert!(!a.rows_match(&b, 1e-12));
        assert!(a.rows_match(&b, 1e-3));
    }
}
