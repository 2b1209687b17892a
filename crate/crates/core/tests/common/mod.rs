//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use active_search::dataio::ImageRecord;
use active_search::forest::ForestModel;
use active_search::geometry::{kernel, Window};
use active_search::search::{Hyperparameters, TraceStep};

/// Cells of an `n`-cell axis whose centers fall in `[lo, hi)`.
fn axis_cells(lo: f64, hi: f64, n: usize) -> Vec<bool> {
    (0..n)
        .map(|k| {
            let c = (k as f64 + 0.5) / n as f64;
            lo <= c && c < hi
        })
        .collect()
}

/// IoU by counting the cells of an `n`×`n` grid covered by each box. Boxes
/// are axis-aligned, so a cell is covered iff its column and its row are.
pub fn raster_iou(a: &Window, b: &Window, n: usize) -> f64 {
    let (ax, ay) = (axis_cells(a.x(), a.x() + a.w(), n), axis_cells(a.y(), a.y() + a.h(), n));
    let (bx, by) = (axis_cells(b.x(), b.x() + b.w(), n), axis_cells(b.y(), b.y() + b.h(), n));
    let count = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&k| f(k)).count();
    let (acx, acy) = (count(&|k| ax[k]), count(&|k| ay[k]));
    let (bcx, bcy) = (count(&|k| bx[k]), count(&|k| by[k]));
    let (icx, icy) = (count(&|k| ax[k] && bx[k]), count(&|k| ay[k] && by[k]));
    let inter = icx * icy;
    let union = acx * acy + bcx * bcy - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Beliefs recomputed from scratch as the cumulative sum over the trace,
/// querying the forest afresh and using the scalar kernel.
pub fn batch_beliefs(
    image: &ImageRecord,
    trace: &[TraceStep],
    forest: &ForestModel,
    theta: &Hyperparameters,
) -> Vec<f64> {
    let mut beliefs = vec![0.0; image.proposals.len()];
    for step in trace {
        let o_t = image.proposals[step.proposal_index].window;
        let gamma = forest.extract_context(&image.proposals[step.proposal_index]);
        for (i, b) in beliefs.iter_mut().enumerate() {
            let o_i = image.proposals[i].window;
            let s = (step.score - 0.5) * kernel(&o_t, &o_i, theta.sigma_s).unwrap();
            let c: f64 = gamma.iter().map(|g| kernel(g, &o_i, theta.sigma_c).unwrap()).sum();
            *b += theta.lambda * s + (1.0 - theta.lambda) * c;
        }
    }
    beliefs
}

/// Cells of an `n`-cell axis lying inside `[lo, hi]`, and cells meeting
/// `(lo, hi)` in a segment of positive length.
fn axis_inner_outer(lo: f64, hi: f64, n: usize) -> (usize, usize) {
    let (mut inner, mut outer) = (0, 0);
    for k in 0..n {
        let (c0, c1) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
        inner += (lo <= c0 && c1 <= hi) as usize;
        outer += (c0 < hi && lo < c1) as usize;
    }
    (inner, outer)
}

/// Bounds on the true IoU from covered-cell counts on an `n`×`n` grid:
/// every box area lies between its inner and outer cell counts.
pub fn raster_iou_bracket(a: &Window, b: &Window, n: usize) -> (f64, f64) {
    let area = |x0: f64, x1: f64, y0: f64, y1: f64| {
        if x1 <= x0 || y1 <= y0 {
            return (0, 0);
        }
        let (ix, ox) = axis_inner_outer(x0, x1, n);
        let (iy, oy) = axis_inner_outer(y0, y1, n);
        (ix * iy, ox * oy)
    };
    let (a_in, a_out) = area(a.x(), a.x() + a.w(), a.y(), a.y() + a.h());
    let (b_in, b_out) = area(b.x(), b.x() + b.w(), b.y(), b.y() + b.h());
    let (i_in, i_out) = area(
        a.x().max(b.x()),
        (a.x() + a.w()).min(b.x() + b.w()),
        a.y().max(b.y()),
        (a.y() + a.h()).min(b.y() + b.h()),
    );
    let u_out = (a_out + b_out).saturating_sub(i_in);
    let u_in = (a_in + b_in).saturating_sub(i_out);
    let lo = if u_out == 0 { 0.0 } else { i_in as f64 / u_out as f64 };
    let hi = if u_in == 0 {
        1.0
    } else {
        (i_out as f64 / u_in as f64).min(1.0)
    };
    (lo, hi)
}

pub fn median_sorted(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
