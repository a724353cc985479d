//! CSV trace writers and the JSON report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dcflow::{FlowTrace64, IterateTrace64};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Rows of already formatted cells under a header.
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut out = String::new();
        let cols: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
        Self { out }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn into_string(self) -> String {
        self.out
    }
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

/// `k, x_0.., f, grad_norm, step_norm, bregman_step`; the last row has no step.
pub fn scheme_csv(trace: &IterateTrace64) -> String {
    let n = trace.points.first().map_or(0, |x| x.len());
    let mut header = vec!["k".to_string()];
    header.extend(indexed("x", n));
    header.extend(["f", "grad_norm", "step_norm", "bregman_step"].map(String::from));
    let mut csv = Csv::new(&header);
    for k in 0..trace.len() {
        let mut cells = vec![k.to_string()];
        cells.extend(trace.points[k].iter().map(|&v| fmt_float(v)));
        cells.push(fmt_float(trace.f_values[k]));
        cells.push(fmt_float(trace.grad_norms[k]));
        cells.push(trace.step_norms.get(k).map_or(String::new(), |&v| fmt_float(v)));
        cells.push(trace.bregman_steps.get(k).map_or(String::new(), |&v| fmt_float(v)));
        csv.row(&cells);
    }
    csv.into_string()
}

/// `t, y_0.., x_0.., f, metric_speed_sq, energy_residual`; the residual is
/// empty at the two endpoints.
pub fn flow_csv(trace: &FlowTrace64) -> String {
    let n = trace.x_states.first().map_or(0, |x| x.len());
    let mut header = vec!["t".to_string()];
    header.extend(indexed("y", n));
    header.extend(indexed("x", n));
    header.extend(["f", "metric_speed_sq", "energy_residual"].map(String::from));
    let mut csv = Csv::new(&header);
    for i in 0..trace.len() {
        let mut cells = vec![fmt_float(trace.times[i])];
        cells.extend(trace.y_states[i].iter().map(|&v| fmt_float(v)));
        cells.extend(trace.x_states[i].iter().map(|&v| fmt_float(v)));
        cells.push(fmt_float(trace.f_values[i]));
        cells.push(fmt_float(trace.metric_speed_sq[i]));
        cells.push(trace.energy_residuals[i].map_or(String::new(), fmt_float));
        csv.row(&cells);
    }
    csv.into_string()
}

/// One named pass/fail flag.
#[derive(Debug, Clone)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Accumulates flags, measurements and notes for one experiment.
#[derive(Debug, Default)]
pub struct Report {
    pub flags: Vec<Flag>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub data: Map<String, Value>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn flag(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.flags.push(Flag { name: name.to_string(), passed, detail: detail.into() });
    }

    pub fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.data.insert(key.to_string(), value.into());
    }

    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    pub fn to_json(&self, header: Map<String, Value>) -> Value {
        let mut obj = header;
        let flags: Map<String, Value> = self
            .flags
            .iter()
            .map(|f| (f.name.clone(), serde_json::json!({ "passed": f.passed, "detail": f.detail })))
            .collect();
        obj.insert("flags".into(), Value::Object(flags));
        obj.insert("passed".into(), Value::Bool(self.passed()));
        obj.insert("warnings".into(), self.warnings.clone().into());
        obj.insert("notes".into(), self.notes.clone().into());
        obj.insert("results".into(), Value::Object(self.data.clone()));
        let files: Vec<String> = self
            .files
            .iter()
            .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
            .collect();
        obj.insert("files".into(), files.into());
        Value::Object(obj)
    }

    pub fn summary(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{title}");
        for f in &self.flags {
            let _ = writeln!(s, "  [{}] {}: {}", if f.passed { "PASS" } else { "FAIL" }, f.name, f.detail);
        }
        for w in &self.warnings {
            let _ = writeln!(s, "  [WARN] {w}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        let _ = writeln!(
            s,
            "  {} flag(s), {} failed; files: {}",
            self.flags.len(),
            self.flags.iter().filter(|f| !f.passed).count(),
            self.files.len()
        );
        s
    }
}

/// JSON number for finite values, `null` otherwise.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn nums<'a>(vs: impl IntoIterator<Item = &'a f64>) -> Value {
    Value::Array(vs.into_iter().map(|&v| num(v)).collect())
}
