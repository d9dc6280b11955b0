//! Result assembly and file emission.
//!
//! Every experiment produces a [`ResultBundle`]: tables (written as CSV),
//! metadata (written as `meta.json`, byte-identical across reruns of the
//! same config), optional SVG plots, and warnings. The wall-clock timestamp
//! goes to `run.log` only, keeping the CSV/JSON outputs reproducible.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;

/// One CSV table; `name` may contain `/` to place the file in a
/// subdirectory of the output directory.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Declared row count; emission fails if the rows disagree.
    pub expected_rows: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str], expected_rows: usize) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::with_capacity(expected_rows),
            expected_rows,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct ResultBundle {
    pub tables: Vec<Table>,
    /// Experiment-specific metadata merged into `meta.json`.
    pub meta: Map<String, Value>,
    /// SVG plots as `(name, document)` pairs; skipped under `--no-plots`.
    pub svgs: Vec<(String, String)>,
    pub warnings: Vec<String>,
    /// Number of failed verification checks; nonzero turns into exit code 1.
    pub failed_checks: usize,
}

impl ResultBundle {
    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes)?;
    fs::rename(tmp, path)
}

/// Writes the bundle under `out_dir`: one CSV per table, `meta.json`,
/// the SVGs (unless suppressed), and `run.log` with the timestamp.
pub fn write_bundle(
    bundle: &ResultBundle,
    config: &ExperimentConfig,
    out_dir: &Path,
    plots: bool,
) -> io::Result<Vec<String>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    for table in &bundle.tables {
        if table.rows.len() != table.expected_rows {
            return Err(io::Error::other(format!(
                "table {} has {} rows, declared {}",
                table.name,
                table.rows.len(),
                table.expected_rows
            )));
        }
        let path = out_dir.join(format!("{}.csv", table.name));
        write_atomic(&path, table.to_csv().as_bytes())?;
        written.push(format!("{}.csv", table.name));
    }

    let meta = json!({
        "experiment": config.experiment.as_str(),
        "config": config,
        "generator": lrdlab_core::numerics::GENERATOR_NAME,
        "normal_transform": lrdlab_core::numerics::NORMAL_TRANSFORM,
        "code_version": env!("CARGO_PKG_VERSION"),
        "results": Value::Object(bundle.meta.clone()),
        "warnings": bundle.warnings,
        "failed_checks": bundle.failed_checks,
    });
    let mut meta_bytes = serde_json::to_vec_pretty(&meta)?;
    meta_bytes.push(b'\n');
    write_atomic(&out_dir.join("meta.json"), &meta_bytes)?;
    written.push("meta.json".into());

    if plots {
        for (name, svg) in &bundle.svgs {
            let path = out_dir.join(format!("{name}.svg"));
            write_atomic(&path, svg.as_bytes())?;
            written.push(format!("{name}.svg"));
        }
    }

    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let log = format!(
        "unix_time={stamp} experiment={} seed={} files={}\n",
        config.experiment.as_str(),
        config.seed,
        written.join(";")
    );
    write_atomic(&out_dir.join("run.log"), log.as_bytes())?;

    Ok(written)
}

/// Fixed-precision float formatting for CSV cells: deterministic and
/// readable. Values round-trip within a relative 1e-12, which is below
/// every tolerance reported in these tables.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.12e}")
    }
}
