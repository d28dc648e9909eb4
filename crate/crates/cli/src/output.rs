//! Artifact writers: versioned CSV, run manifests with digests, and simple
//! SVG line plots. All float formatting uses Rust's shortest round-trip
//! rendering so identical runs are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// One CSV artifact being assembled in memory.
pub struct Csv {
    name: String,
    buf: String,
}

impl Csv {
    /// `schema` is a stable identifier written as a header comment.
    pub fn new(name: &str, schema: &str, columns: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# schema: {schema}");
        let _ = writeln!(buf, "{}", columns.join(","));
        Self {
            name: name.to_string(),
            buf,
        }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.buf, "# {text}");
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn content(&self) -> &str {
        &self.buf
    }
}

/// Format any Display value for a CSV field.
pub fn field(x: impl std::fmt::Display) -> String {
    x.to_string()
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub status: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(subcommand: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            status: "running".into(),
            started_unix: now_unix(),
            finished_unix: None,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, ok: bool) {
        self.status = if ok { "ok".into() } else { "failed".into() };
        self.finished_unix = Some(now_unix());
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Write a CSV artifact and record it in the manifest.
pub fn emit(dir: &Path, manifest: &mut RunManifest, csv: &Csv) -> std::io::Result<PathBuf> {
    let path = dir.join(format!("{}.csv", csv.name));
    std::fs::write(&path, csv.content())?;
    manifest.outputs.push(OutputRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(csv.content().as_bytes()),
        bytes: csv.content().len(),
    });
    Ok(path)
}

/// A minimal SVG polyline plot of (x, y) points, purely a function of the
/// data series.
pub fn line_plot(points: &[(f64, f64)], title: &str) -> String {
    let (w, h, pad) = (640.0f64, 400.0f64, 50.0f64);
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0.is_finite() && y0.is_finite()) || points.len() < 2 {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-300) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-300) * (h - 2.0 * pad);
    let mut path = String::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        let _ = write!(path, "{}{},{} ", if i == 0 { "M" } else { "L" }, sx(x), sy(y));
    }
    let mut dots = String::new();
    for &(x, y) in points {
        let _ = write!(
            dots,
            r##"<circle cx="{}" cy="{}" r="3" fill="#1f77b4"/>"##,
            sx(x),
            sy(y)
        );
    }
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#,
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            r#"<text x="{tx}" y="24" text-anchor="middle" font-family="monospace">{title}</text>"#,
            r##"<path d="{path}" stroke="#1f77b4" fill="none" stroke-width="1.5"/>"##,
            "{dots}</svg>\n"
        ),
        w = w,
        h = h,
        tx = w / 2.0,
        title = title,
        path = path.trim_end(),
        dots = dots
    )
}

/// Write an SVG plot next to the CSVs and record it.
pub fn emit_plot(
    dir: &Path,
    manifest: &mut RunManifest,
    name: &str,
    points: &[(f64, f64)],
    title: &str,
) -> std::io::Result<()> {
    let svg = line_plot(points, title);
    let path = dir.join(format!("{name}.svg"));
    std::fs::write(&path, &svg)?;
    manifest.outputs.push(OutputRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(svg.as_bytes()),
        bytes: svg.len(),
    });
    Ok(())
}
