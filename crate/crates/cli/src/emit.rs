use hmcf_core::analysis::{check_star, pressure, StarReport};
use hmcf_core::flow::FlowState;
use hmcf_core::interface::{extract_interface_with, Curve, Interpolation};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// `{:.16e}` keeps 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotFiles {
    pub height: PathBuf,
    pub interface: Option<PathBuf>,
    pub meta: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotMeta {
    pub t: f64,
    pub step: usize,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
    /// `"present"`, `"no interface"`, or the extraction error.
    pub interface: String,
    pub interface_points: usize,
    pub star: Option<StarReport>,
    pub star_error: Option<String>,
}

/// Interface at level `flat_tol`, crossings placed linearly in `h^p`.
pub fn snapshot_interface(state: &FlowState, p: f64) -> Result<Option<Curve>, String> {
    extract_interface_with(&state.field, state.field.flat_tol(), Interpolation::Power(p)).map_err(|e| e.to_string())
}

pub fn snapshot_meta(state: &FlowState, p: f64, curve: &Result<Option<Curve>, String>) -> SnapshotMeta {
    let f = &state.field;
    let (interface, interface_points) = match curve {
        Ok(Some(c)) => ("present".to_string(), c.len()),
        Ok(None) => ("no interface".to_string(), 0),
        Err(e) => (e.clone(), 0),
    };
    let (star, star_error) = match curve {
        Ok(Some(c)) => match pressure(f, p).and_then(|g| check_star(&g, c, 0.0)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        _ => (None, None),
    };
    SnapshotMeta {
        t: state.t,
        step: state.step_count,
        nx: f.nx(),
        ny: f.ny(),
        dx: f.dx(),
        dy: f.dy(),
        origin: f.origin(),
        interface,
        interface_points,
        star,
        star_error,
    }
}

/// Writes `height_{step}.csv` (row `i` holds `h(x_i, y_0..)`),
/// `interface_{step}.csv` when there is an interface, and `meta_{step}.json`.
pub fn emit_snapshot(state: &FlowState, p: f64, dir: &Path) -> io::Result<(SnapshotFiles, SnapshotMeta)> {
    fs::create_dir_all(dir)?;
    let tag = format!("{:08}", state.step_count);
    let height = dir.join(format!("height_{tag}.csv"));
    let mut text = String::new();
    for row in state.field.values().rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(&height, text)?;

    let curve = snapshot_interface(state, p);
    let interface = match &curve {
        Ok(Some(c)) => {
            let path = dir.join(format!("interface_{tag}.csv"));
            let mut text = String::from("x,y\n");
            for q in c.points() {
                writeln!(text, "{},{}", fmt_float(q[0]), fmt_float(q[1])).expect("writing to a string");
            }
            fs::write(&path, text)?;
            Some(path)
        }
        _ => None,
    };

    let meta = snapshot_meta(state, p, &curve);
    let meta_path = dir.join(format!("meta_{tag}.json"));
    fs::write(&meta_path, serde_json::to_string_pretty(&meta).map_err(io::Error::other)?)?;
    Ok((SnapshotFiles { height, interface, meta: meta_path }, meta))
}

/// Reads a height CSV written by [`emit_snapshot`] back as rows.
pub fn load_height_csv(path: &Path) -> io::Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(|line| {
            line.split(',')
                .map(|c| c.parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{c}: {e}"))))
                .collect()
        })
        .collect()
}
