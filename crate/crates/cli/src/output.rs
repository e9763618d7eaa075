//! CSV and JSON artifacts. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use wavepacket_core::flow::hs_norm;
use wavepacket_core::gaussian::WidthSeries;
use wavepacket_core::oracle::ScalingPoint;
use wavepacket_core::Trajectory;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON number, or a string for values JSON cannot represent.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| Value::String(v.to_string()))
}

pub fn complex_pair(re: f64, im: f64) -> Value {
    Value::Array(vec![num(re), num(im)])
}

pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let text = header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(",") + "\n";
        Self { text, columns: header.len() }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{}", float(*v));
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, &self.text)
    }
}

pub fn write_json(path: &Path, value: &Map<String, Value>) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("maps with string keys serialize");
    text.push('\n');
    fs::write(path, text)
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    if d == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=d).map(|i| format!("{prefix}{i}")).collect()
    }
}

pub fn trajectory_csv(traj: &Trajectory) -> Csv {
    let d = traj.model().dim();
    let mut header = vec!["t".to_string()];
    header.extend(axis_names("p", d));
    header.extend(axis_names("q", d));
    header.extend(["W", "sympl_defect", "hs_norm_S"].map(String::from));
    let mut csv = Csv::new(&header);
    for s in traj.samples() {
        let mut row = vec![s.t];
        row.extend(s.x.p.iter());
        row.extend(s.x.q.iter());
        row.extend([s.w, s.sympl_defect, hs_norm(s.s.matrix())]);
        csv.row(&row);
    }
    csv
}

pub fn width_csv(w: &WidthSeries) -> Csv {
    let mut csv = Csv::new(&["t", "sigma", "dx2", "dp2", "trG", "hsS2", "dual_path_gap"]);
    for k in 0..w.len() {
        csv.row(&[w.times[k], w.sigma[k], w.dx2[k], w.dp2[k], w.tr_g[k], w.hs_s2[k], w.dual_path_gap[k]]);
    }
    csv
}

pub fn scaling_csv(points: &[ScalingPoint]) -> Csv {
    let mut csv = Csv::new(&["hbar", "norm_error", "aligned_norm_error", "fidelity", "phase_mismatch", "grid_points"]);
    for p in points {
        csv.row(&[
            p.hbar,
            p.norm_error,
            p.fidelity.norm_error,
            p.fidelity.modulus,
            p.fidelity.phase_mismatch,
            p.grid_points as f64,
        ]);
    }
    csv
}
