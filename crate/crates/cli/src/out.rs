//! Output plumbing: atomic writes, run manifests, full-precision formatting,
//! and minimal SVG emission.
//!
//! Every output file `X` gets a run manifest at `X.manifest.json`; CSV and
//! SVG files additionally carry a trailing `# manifest=...` comment. Report
//! JSON stays free of run-specific keys so that re-deriving the same report
//! from saved data is byte-identical.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// 17 significant digits, enough to round-trip any f64.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp_write");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

pub fn manifest_comment(output: &Path) -> String {
    format!(
        "# manifest={}",
        manifest_path(output)
            .file_name()
            .unwrap()
            .to_string_lossy()
    )
}

/// Provenance record for one command invocation.
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub parameters: Vec<(String, String)>,
    pub kernel: Option<String>,
    pub grid: Option<(usize, f64, usize)>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub deterministic: bool,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().skip(1).collect(),
            parameters: Vec::new(),
            kernel: None,
            grid: None,
            seed: None,
            outputs: Vec::new(),
            deterministic: false,
        }
    }

    pub fn param(&mut self, key: &str, value: String) -> &mut Self {
        self.parameters.push((key.to_string(), value));
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::from("{\n");
        s.push_str(&format!("  \"command\": {},\n", quote(&self.command)));
        let argv: Vec<String> = self.argv.iter().map(|a| quote(a)).collect();
        s.push_str(&format!("  \"argv\": [{}],\n", argv.join(", ")));
        s.push_str(&format!(
            "  \"tool_version\": {},\n",
            quote(env!("CARGO_PKG_VERSION"))
        ));
        let created = if self.deterministic {
            0
        } else {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        };
        s.push_str(&format!("  \"created_unix\": {created},\n"));
        s.push_str("  \"parameters\": {");
        let params: Vec<String> = self
            .parameters
            .iter()
            .map(|(k, v)| format!("{}: {}", quote(k), quote(v)))
            .collect();
        s.push_str(&params.join(", "));
        s.push_str("},\n");
        if let Some(k) = &self.kernel {
            s.push_str(&format!("  \"kernel\": {},\n", quote(k)));
        }
        if let Some((d, l, n)) = self.grid {
            s.push_str(&format!(
                "  \"grid\": {{\"d\": {d}, \"l\": {}, \"n\": {n}}},\n",
                full(l)
            ));
        }
        if let Some(seed) = self.seed {
            s.push_str(&format!("  \"seed\": {seed},\n"));
        }
        let outs: Vec<String> = self.outputs.iter().map(|o| quote(o)).collect();
        s.push_str(&format!("  \"outputs\": [{}]\n", outs.join(", ")));
        s.push_str("}\n");
        s
    }

    /// Write `bytes` to `path` atomically and drop the manifest next to it.
    pub fn emit(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.emit_manifest_only(path)
    }

    /// Manifest for an output that is already on disk (binary field files).
    pub fn emit_manifest_only(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .push(path.file_name().unwrap().to_string_lossy().into_owned());
        write_atomic(&manifest_path(path), self.render().as_bytes())?;
        Ok(())
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Flat JSON object with fixed key order; numbers carry full precision.
pub fn flat_json(pairs: &[(&str, JsonVal)]) -> String {
    let mut s = String::from("{\n");
    let body: Vec<String> = pairs
        .iter()
        .map(|(k, v)| format!("  {}: {}", quote(k), v.render()))
        .collect();
    s.push_str(&body.join(",\n"));
    s.push_str("\n}\n");
    s
}

pub enum JsonVal {
    Num(f64),
    Int(i64),
    Str(String),
}

impl JsonVal {
    fn render(&self) -> String {
        match self {
            JsonVal::Num(x) => full(*x),
            JsonVal::Int(i) => i.to_string(),
            JsonVal::Str(s) => quote(s),
        }
    }
}

/// Minimal static SVG polyline plot of (x, y) series.
pub fn svg_plot(series: &[(&str, Vec<(f64, f64)>)], title: &str) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (_, pts) in series {
        for (x, y) in pts {
            xs.push(*x);
            ys.push(*y);
        }
    }
    let (xmin, xmax) = bounds(&xs);
    let (ymin, ymax) = bounds(&ys);
    let sx = |x: f64| pad + (x - xmin) / (xmax - xmin).max(1e-300) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - ymin) / (ymax - ymin).max(1e-300) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    s.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    ));
    s.push_str(&format!(
        "<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - pad,
        w - pad,
        h - pad,
        h - pad
    ));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            w - pad - 110.0,
            pad + 16.0 * (i + 1) as f64
        ));
    }
    for (v, label_x) in [(xmin, true), (xmax, true)] {
        let _ = (v, label_x);
    }
    s.push_str(&format!(
        "<text x=\"{pad}\" y=\"{}\" font-size=\"10\">{}</text>\n<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
        h - pad + 16.0,
        trim(xmin),
        w - pad,
        h - pad + 16.0,
        trim(xmax)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n<text x=\"{}\" y=\"{pad}\" font-size=\"10\">{}</text>\n",
        4.0,
        h - pad,
        trim(ymin),
        4.0,
        trim(ymax)
    ));
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn trim(x: f64) -> String {
    format!("{x:.4}")
}
