//! Artifact writers for JSON envelopes, CSV tables and SVG plots. Every file is
//! stamped with the config hash and the crate version.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hartree_fock::BandStructure;
use crate::quasiparticle::QuasiparticleLevel;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped into every emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub config_hash: String,
    pub version: String,
}

impl Stamp {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            version: VERSION.to_string(),
        }
    }
}

/// Floating-point text with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".to_string()
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: &'a str,
    version: &'a str,
    data: &'a T,
}

pub fn json_text<T: Serialize>(stamp: &Stamp, data: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&Envelope {
        config_hash: &stamp.config_hash,
        version: &stamp.version,
        data,
    })?;
    text.push('\n');
    Ok(text)
}

/// CSV text with a `# config_hash=… version=…` comment line and a header row.
pub fn csv_text(stamp: &Stamp, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut text = format!("# config_hash={} version={}\n", stamp.config_hash, stamp.version);
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Writes artifacts under one directory and remembers their relative paths.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    stamp: Stamp,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, stamp: Stamp) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            stamp,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    /// Relative paths written since the last call.
    pub fn take_written(&mut self) -> Vec<String> {
        std::mem::take(&mut self.written)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.root.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let text = json_text(&self.stamp, data)?;
        self.put(name, &text)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let text = csv_text(&self.stamp, header, rows);
        self.put(name, &text)
    }

    pub fn band_plot(&mut self, name: &str, bands: &BandStructure, levels: &[QuasiparticleLevel]) -> Result<()> {
        let text = band_plot_svg(bands, levels, &self.stamp)?;
        self.put(name, &text)
    }

    pub fn line_plot(&mut self, name: &str, plot: &LinePlot) -> Result<()> {
        let text = line_plot_svg(plot, &self.stamp)?;
        self.put(name, &text)
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (ylo, yhi) = span(&mut ys.clone());
        let pad = 0.05 * (yhi - ylo);
        Self {
            x: span(&mut xs.clone()),
            y: (ylo - pad, yhi + pad),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(stamp: &Stamp, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        s,
        "<!-- config_hash={} version={} -->",
        stamp.config_hash, stamp.version
    );
    let _ = writeln!(s, "<title>{title}</title>");
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    s
}

fn axes(s: &mut String, frame: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1) = (MARGIN, WIDTH - MARGIN);
    let (y0, y1) = (HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(s, "<g stroke=\"black\" stroke-width=\"1\">");
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\"/>");
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\"/>");
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "<g font-family=\"sans-serif\" font-size=\"12\">");
    let _ = writeln!(s, "<text x=\"{x0}\" y=\"{}\">{:.4}</text>", y0 + 16.0, frame.x.0);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4}</text>",
        x1,
        y0 + 16.0,
        frame.x.1
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{y0}\" text-anchor=\"end\">{:.4}</text>",
        x0 - 4.0,
        frame.y.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4}</text>",
        x0 - 4.0,
        y1 + 4.0,
        frame.y.1
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>",
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{ylabel}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(s, "</g>");
}

fn polyline(s: &mut String, frame: &Frame, xs: &[f64], ys: &[f64], color: &str) {
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.3},{:.3}", frame.px(x), frame.py(y)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
        points.join(" ")
    );
}

fn horizontal(s: &mut String, frame: &Frame, y: f64, dash: &str, color: &str) {
    let py = frame.py(y);
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN}\" y1=\"{py:.3}\" x2=\"{}\" y2=\"{py:.3}\" stroke=\"{color}\" stroke-dasharray=\"{dash}\"/>",
        WIDTH - MARGIN
    );
}

/// Band plot with one polyline per band. Each level adds a dashed line at ε(0)⁺
/// and, when it differs, a dotted line at ε(0)⁻.
pub fn band_plot_svg(bands: &BandStructure, levels: &[QuasiparticleLevel], stamp: &Stamp) -> Result<String> {
    if bands.bands.is_empty() || bands.kgrid.is_empty() {
        return Err(Error::invalid("band structure is empty"));
    }
    for n in 0..bands.band_count() {
        bands.row(n)?;
    }
    let ys = bands
        .bands
        .iter()
        .flatten()
        .copied()
        .chain(levels.iter().flat_map(|l| [l.plus_level, l.minus_level]));
    let frame = Frame::new(bands.kgrid.iter().copied(), ys);
    let mut s = svg_open(stamp, "band structure");
    axes(&mut s, &frame, "k (1/bohr)", "energy (hartree)");
    for (n, band) in bands.bands.iter().enumerate() {
        polyline(&mut s, &frame, &bands.kgrid, band, PALETTE[n % PALETTE.len()]);
    }
    for level in levels {
        let color = PALETTE[level.band % PALETTE.len()];
        horizontal(&mut s, &frame, level.plus_level, "6,4", color);
        if level.minus_level != level.plus_level {
            horizontal(&mut s, &frame, level.minus_level, "1,3", color);
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Generic multi-series line plot.
#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub x: Vec<f64>,
    pub series: Vec<Vec<f64>>,
}

pub fn line_plot_svg(plot: &LinePlot, stamp: &Stamp) -> Result<String> {
    if plot.x.is_empty() || plot.series.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    if plot.series.iter().any(|s| s.len() != plot.x.len()) {
        return Err(Error::invalid("series length differs from the x samples"));
    }
    let ys = plot.series.iter().flatten().copied().filter(|v| v.is_finite());
    let frame = Frame::new(plot.x.iter().copied(), ys);
    let mut s = svg_open(stamp, &plot.title);
    axes(&mut s, &frame, &plot.xlabel, &plot.ylabel);
    for (i, series) in plot.series.iter().enumerate() {
        polyline(&mut s, &frame, &plot.x, series, PALETTE[i % PALETTE.len()]);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes a band plot to `path`.
pub fn emit_band_plot(bands: &BandStructure, levels: &[QuasiparticleLevel], path: &Path, stamp: &Stamp) -> Result<()> {
    let text = band_plot_svg(bands, levels, stamp)?;
    std::fs::write(path, text)?;
    Ok(())
}
