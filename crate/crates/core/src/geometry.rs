//! Normalized windows, overlap, the IoU smoothing kernel and displacement
//! arithmetic.
//!
//! Every window lives in fractional image coordinates: `x`, `y` are the
//! top-left corner as a fraction of the image width/height and `w`, `h` the
//! size in the same units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest side length a displaced window is clamped to.
pub const MIN_SIDE: f64 = 0.01;

/// Slack allowed when checking that a window lies inside the unit square.
/// Coordinates written as decimals do not always sum back to exactly 1.
pub const INSIDE_EPS: f64 = 1e-9;

/// An axis-aligned box in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Window {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Window {
    /// Builds a window, rejecting negative corners, non-positive sizes and
    /// non-finite values. The window is not required to lie inside the image.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::input(format!(
                "window ({x}, {y}, {w}, {h}) has a non-finite coordinate"
            )));
        }
        if x < 0.0 || y < 0.0 {
            return Err(Error::input(format!(
                "window ({x}, {y}, {w}, {h}) has a negative corner"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::input(format!(
                "window ({x}, {y}, {w}, {h}) has a non-positive side"
            )));
        }
        Ok(Window { x, y, w, h })
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    /// `[x, y, w, h]`, the location feature of the window.
    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    /// Whether the window fits in the unit square (up to [`INSIDE_EPS`]).
    pub fn is_inside_image(&self) -> bool {
        self.x + self.w <= 1.0 + INSIDE_EPS && self.y + self.h <= 1.0 + INSIDE_EPS
    }

    /// Squared distance between the two window centers.
    pub fn center_distance_sq(&self, other: &Window) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).powi(2) + (ay - by).powi(2)
    }

    /// Clamps raw coordinates into a window inside the image: sides are
    /// clipped to `[MIN_SIDE, 1]`, then the corner is shifted so the window
    /// fits in `[0,1]²`.
    pub fn clamped(x: f64, y: f64, w: f64, h: f64) -> Window {
        let w = clamp_finite(w, MIN_SIDE, 1.0);
        let h = clamp_finite(h, MIN_SIDE, 1.0);
        let x = clamp_finite(x, 0.0, 1.0 - w);
        let y = clamp_finite(y, 0.0, 1.0 - h);
        Window { x, y, w, h }
    }
}

fn clamp_finite(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

impl TryFrom<[f64; 4]> for Window {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Window::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Window> for [f64; 4] {
    fn from(w: Window) -> Self {
        w.to_array()
    }
}

/// A 4-D offset between two windows, componentwise in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement {
        dx: 0.0,
        dy: 0.0,
        dw: 0.0,
        dh: 0.0,
    };

    pub fn new(dx: f64, dy: f64, dw: f64, dh: f64) -> Self {
        Displacement { dx, dy, dw, dh }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.dx, self.dy, self.dw, self.dh]
    }

    /// Euclidean distance between two displacement vectors.
    pub fn distance(&self, other: &Displacement) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        a.iter()
            .zip(b.iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<[f64; 4]> for Displacement {
    fn from(v: [f64; 4]) -> Self {
        Displacement::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Displacement> for [f64; 4] {
    fn from(d: Displacement) -> Self {
        d.to_array()
    }
}

#[inline]
fn fmin(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}

#[inline]
fn fmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

/// IoU from corner coordinates. Areas are taken from the same edge
/// differences as the intersection, so a window overlaps itself with IoU
/// exactly 1.
#[inline]
fn iou_edges(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = fmax(fmin(a[2], b[2]) - fmax(a[0], b[0]), 0.0);
    let iy = fmax(fmin(a[3], b[3]) - fmax(a[1], b[1]), 0.0);
    let inter = ix * iy;
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    let union = fmax(area_a + area_b - inter, f64::MIN_POSITIVE);
    fmin(inter / union, 1.0)
}

impl Window {
    #[inline]
    fn edges(&self) -> [f64; 4] {
        [self.x, self.y, self.x + self.w, self.y + self.h]
    }
}

/// Intersection over union of two windows.
#[inline]
pub fn iou(a: &Window, b: &Window) -> f64 {
    iou_edges(a.edges(), b.edges())
}

/// Precomputed exponent scale for the IoU kernel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelScale {
    /// `-1 / (2σ²)`
    neg_inv_two_sigma_sq: f64,
    /// Kernel value of two disjoint windows.
    at_zero_overlap: f64,
    /// At or below this IoU the kernel underflows to zero.
    min_nonzero_iou: f64,
}

impl KernelScale {
    pub(crate) fn new(sigma: f64) -> Self {
        let neg_inv_two_sigma_sq = -1.0 / (2.0 * sigma * sigma);
        // slightly below the true threshold; values under it are exact zeros
        let reach = (EXP_UNDERFLOW / neg_inv_two_sigma_sq).sqrt();
        KernelScale {
            neg_inv_two_sigma_sq,
            at_zero_overlap: kernel_from_iou_scaled(0.0, neg_inv_two_sigma_sq),
            min_nonzero_iou: (1.0 - reach * (1.0 + 1e-9)).max(0.0),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, iou: f64) -> f64 {
        if iou == 0.0 {
            self.at_zero_overlap
        } else {
            kernel_from_iou_scaled(iou, self.neg_inv_two_sigma_sq)
        }
    }
}

/// Below this exponent `exp` underflows to exactly zero.
const EXP_UNDERFLOW: f64 = -746.0;

#[inline]
fn kernel_from_iou_scaled(iou: f64, neg_inv_two_sigma_sq: f64) -> f64 {
    let d = 1.0 - iou;
    let e = d * d * neg_inv_two_sigma_sq;
    if e < EXP_UNDERFLOW {
        0.0
    } else {
        e.exp()
    }
}

/// `exp(-(1 - IoU(a, b))² / (2σ²))`.
pub fn kernel(a: &Window, b: &Window, sigma: f64) -> Result<f64> {
    check_sigma("sigma", sigma)?;
    Ok(KernelScale::new(sigma).eval(iou(a, b)))
}

pub(crate) fn check_sigma(name: &'static str, sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(name, format!("must be a positive real, got {sigma}")));
    }
    Ok(())
}

/// The displacement that carries `from` onto `to`.
pub fn displacement_between(from: &Window, to: &Window) -> Displacement {
    Displacement::new(to.x - from.x, to.y - from.y, to.w - from.w, to.h - from.h)
}

/// `o + d`, clamped into the image (see [`Window::clamped`]).
pub fn apply_displacement(o: &Window, d: &Displacement) -> Window {
    Window::clamped(o.x + d.dx, o.y + d.dy, o.w + d.dw, o.h + d.dh)
}

/// Structure-of-arrays copy of a window list, for scanning one query window
/// against every entry. Produces the same IoU values as [`iou`].
#[derive(Debug, Clone, Default)]
pub struct WindowArray {
    x1: Vec<f64>,
    y1: Vec<f64>,
    x2: Vec<f64>,
    y2: Vec<f64>,
    area: Vec<f64>,
}

/// Reusable buffers for [`WindowArray::accumulate_kernel`].
#[derive(Debug, Clone, Default)]
pub(crate) struct KernelScratch {
    iou: Vec<f64>,
    hits: Vec<u32>,
    kernel: Vec<f64>,
}

impl WindowArray {
    pub fn new<'a>(windows: impl IntoIterator<Item = &'a Window>) -> Self {
        let mut out = WindowArray::default();
        for w in windows {
            let [x1, y1, x2, y2] = w.edges();
            out.x1.push(x1);
            out.y1.push(y1);
            out.x2.push(x2);
            out.y2.push(y2);
            out.area.push((x2 - x1) * (y2 - y1));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.area.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area.is_empty()
    }

    /// IoU of `q` with entry `i`.
    #[inline]
    pub fn iou_at(&self, q: &Window, i: usize) -> f64 {
        iou_edges(q.edges(), [self.x1[i], self.y1[i], self.x2[i], self.y2[i]])
    }

    /// IoU of `q` with every entry, written to `out`.
    pub fn iou_all(&self, q: &Window, out: &mut Vec<f64>) {
        let n = self.len();
        out.clear();
        out.resize(n, 0.0);
        let [qx1, qy1, qx2, qy2] = q.edges();
        let qa = (qx2 - qx1) * (qy2 - qy1);
        let (x1, y1, x2, y2, area) = (
            &self.x1[..n],
            &self.y1[..n],
            &self.x2[..n],
            &self.y2[..n],
            &self.area[..n],
        );
        // branch-free so the loop vectorizes; mirrors `iou_edges`
        for i in 0..n {
            let ix = fmax(fmin(qx2, x2[i]) - fmax(qx1, x1[i]), 0.0);
            let iy = fmax(fmin(qy2, y2[i]) - fmax(qy1, y1[i]), 0.0);
            let inter = ix * iy;
            let union = fmax(qa + area[i] - inter, f64::MIN_POSITIVE);
            out[i] = fmin(inter / union, 1.0);
        }
    }

    /// Adds `weight * K(q, entry_i; σ)` to `out[i]` for every entry.
    pub(crate) fn accumulate_kernel(
        &self,
        q: &Window,
        scale: &KernelScale,
        weight: f64,
        scratch: &mut KernelScratch,
        out: &mut [f64],
    ) {
        debug_assert_eq!(out.len(), self.len());
        self.iou_all(q, &mut scratch.iou);
        // Most pairs are disjoint or too far apart for the exponential to
        // register; evaluate it only above the cutoff.
        let cutoff = if scale.at_zero_overlap == 0.0 {
            scale.min_nonzero_iou
        } else {
            0.0
        };
        scratch.hits.clear();
        scratch.hits.resize(self.len(), 0);
        let mut count = 0usize;
        for (i, &o) in scratch.iou.iter().enumerate() {
            scratch.hits[count] = i as u32;
            count += (o > cutoff) as usize;
        }
        if scale.at_zero_overlap == 0.0 {
            // every other term is an exact zero
            for &i in &scratch.hits[..count] {
                let i = i as usize;
                out[i] += weight * scale.eval(scratch.iou[i]);
            }
            return;
        }
        scratch.kernel.clear();
        scratch.kernel.resize(self.len(), scale.at_zero_overlap);
        for &i in &scratch.hits[..count] {
            let i = i as usize;
            scratch.kernel[i] = scale.eval(scratch.iou[i]);
        }
        for (slot, &k) in out.iter_mut().zip(&scratch.kernel) {
            *slot += weight * k;
        }
    }
}
