//! Columnar text files for episode traces, belief snapshots, detections
//! and budget curves.

use std::path::Path;

use crate::dataio::columnar::{self, ColumnarWriter};
use crate::error::{Error, Result};
use crate::eval::{BudgetCurve, Detection};
use crate::geometry::Window;
use crate::search::{BeliefSnapshot, Episode, TraceStep};

pub const TRACE_KIND: &str = "episode-trace";
pub const SNAPSHOT_KIND: &str = "belief-snapshot";
pub const DETECTIONS_KIND: &str = "detections";
pub const CURVE_KIND: &str = "budget-curve";

const TRACE_COLUMNS: [&str; 9] = [
    "image_id",
    "t",
    "proposal_index",
    "x",
    "y",
    "w",
    "h",
    "score",
    "belief_at_selection",
];
const SNAPSHOT_COLUMNS: [&str; 2] = ["proposal_index", "belief"];
const DETECTION_COLUMNS: [&str; 6] = ["image_id", "x", "y", "w", "h", "score"];
const CURVE_COLUMNS: [&str; 4] = ["class", "policy", "budget", "ap"];

fn check_field(s: &str) -> Result<()> {
    if s.contains(['\t', '\n']) {
        return Err(Error::input(format!("`{s}` contains a tab or newline")));
    }
    Ok(())
}

/// Traces of several episodes in one table, grouped by image.
pub fn write_traces(path: &Path, episodes: &[Episode]) -> Result<()> {
    let mut w = ColumnarWriter::new(TRACE_KIND, &TRACE_COLUMNS);
    for e in episodes {
        check_field(&e.image_id)?;
        for s in &e.trace {
            let [x, y, ww, h] = s.window.to_array();
            w.row(&[
                &e.image_id,
                &s.t,
                &s.proposal_index,
                &x,
                &y,
                &ww,
                &h,
                &s.score,
                &s.belief_at_selection,
            ]);
        }
    }
    w.write(path)
}

/// Reads traces back as `(image_id, steps)` in file order.
pub fn read_traces(path: &Path) -> Result<Vec<(String, Vec<TraceStep>)>> {
    let rows = columnar::read(path, TRACE_KIND, &TRACE_COLUMNS)?;
    let mut out: Vec<(String, Vec<TraceStep>)> = Vec::new();
    for row in &rows {
        let id = row.fields[0].clone();
        let window = parse_window(path, row, 3)?;
        let step = TraceStep {
            t: row.parse(path, 1, "t")?,
            proposal_index: row.parse(path, 2, "proposal_index")?,
            window,
            score: parse_score(path, row, 7)?,
            belief_at_selection: row.parse(path, 8, "belief_at_selection")?,
        };
        match out.last_mut() {
            Some((last, steps)) if *last == id => {
                if step.t != steps.len() + 1 {
                    return Err(Error::parse(
                        path,
                        row.line,
                        format!("expected t = {}", steps.len() + 1),
                    ));
                }
                steps.push(step)
            }
            _ => {
                if step.t != 1 {
                    return Err(Error::parse(path, row.line, "a trace must start at t = 1"));
                }
                out.push((id, vec![step]))
            }
        }
    }
    Ok(out)
}

pub fn write_snapshot(path: &Path, snapshot: &BeliefSnapshot) -> Result<()> {
    let mut w = ColumnarWriter::new(SNAPSHOT_KIND, &SNAPSHOT_COLUMNS);
    for (i, b) in snapshot.beliefs.iter().enumerate() {
        w.row(&[&i, b]);
    }
    w.write(path)
}

pub fn read_snapshot(path: &Path) -> Result<Vec<f64>> {
    let rows = columnar::read(path, SNAPSHOT_KIND, &SNAPSHOT_COLUMNS)?;
    let mut out = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let i: usize = row.parse(path, 0, "proposal_index")?;
        if i != k {
            return Err(Error::parse(path, row.line, format!("expected proposal_index {k}")));
        }
        out.push(row.parse(path, 1, "belief")?);
    }
    Ok(out)
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut w = ColumnarWriter::new(DETECTIONS_KIND, &DETECTION_COLUMNS);
    for d in detections {
        check_field(&d.image_id)?;
        let [x, y, ww, h] = d.window.to_array();
        w.row(&[&d.image_id, &x, &y, &ww, &h, &d.score]);
    }
    w.write(path)
}

fn parse_window(path: &Path, row: &columnar::Row, first: usize) -> Result<Window> {
    let names = ["x", "y", "w", "h"];
    let mut v = [0.0; 4];
    for (k, slot) in v.iter_mut().enumerate() {
        *slot = row.parse(path, first + k, names[k])?;
    }
    Window::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::parse(path, row.line, e.to_string()))
}

fn parse_score(path: &Path, row: &columnar::Row, col: usize) -> Result<f64> {
    let s: f64 = row.parse(path, col, "score")?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::parse(path, row.line, format!("score {s} is outside [0, 1]")));
    }
    Ok(s)
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let rows = columnar::read(path, DETECTIONS_KIND, &DETECTION_COLUMNS)?;
    rows.iter()
        .map(|row| {
            Ok(Detection {
                image_id: row.fields[0].clone(),
                window: parse_window(path, row, 1)?,
                score: parse_score(path, row, 5)?,
            })
        })
        .collect()
}

/// Several curves in one table.
pub fn write_curves(path: &Path, curves: &[BudgetCurve]) -> Result<()> {
    let mut w = ColumnarWriter::new(CURVE_KIND, &CURVE_COLUMNS);
    for c in curves {
        check_field(&c.class)?;
        check_field(&c.policy)?;
        for (b, ap) in &c.points {
            w.row(&[&c.class, &c.policy, b, ap]);
        }
    }
    w.write(path)
}

pub fn read_curves(path: &Path) -> Result<Vec<BudgetCurve>> {
    let rows = columnar::read(path, CURVE_KIND, &CURVE_COLUMNS)?;
    let mut out: Vec<BudgetCurve> = Vec::new();
    for row in &rows {
        let (class, policy) = (&row.fields[0], &row.fields[1]);
        let b: usize = row.parse(path, 2, "budget")?;
        let ap: f64 = row.parse(path, 3, "ap")?;
        if !(0.0..=1.0).contains(&ap) {
            return Err(Error::parse(path, row.line, format!("AP {ap} is outside [0, 1]")));
        }
        match out.last_mut() {
            Some(c) if &c.class == class && &c.policy == policy => {
                if c.points.last().is_some_and(|p| p.0 >= b) {
                    return Err(Error::parse(path, row.line, "budgets must be strictly increasing"));
                }
                c.points.push((b, ap));
            }
            _ => out.push(BudgetCurve {
                class: class.clone(),
                policy: policy.clone(),
                points: vec![(b, ap)],
            }),
        }
    }
    Ok(out)
}
