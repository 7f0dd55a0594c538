//! Parallel-beam CT projector with exact pixel/ray intersection lengths.
//!
//! The image is centred on the origin with square pixels of side
//! `pixel_size`; row 0 is the top row. View `v` has angle `v * pi / n_views`
//! and detector `d` samples the line `x cos(theta) + y sin(theta) = t_d`,
//! `t_d = (d - (n_det - 1) / 2) * detector_spacing`. Sinograms are stored
//! view-major.

use crate::error::{ensure_len, Error, Result};
use crate::ops::image::Image;
use crate::ops::operator::LinearOperator;
use crate::parallel;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn default_pixel_size() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtGeometry {
    pub rows: usize,
    pub cols: usize,
    pub n_views: usize,
    pub n_detectors: usize,
    #[serde(default = "default_pixel_size")]
    pub pixel_size: f64,
    /// Defaults to half the pixel size.
    #[serde(default)]
    pub detector_spacing: Option<f64>,
}

impl CtGeometry {
    /// Geometry with half-pixel detector spacing whose detector row spans
    /// the image diagonal. The count is odd, so a detector sits at `t = 0`
    /// and axis-aligned rays pass through pixel centres.
    pub fn new(rows: usize, cols: usize, n_views: usize) -> Self {
        let diag = ((rows * rows + cols * cols) as f64).sqrt().ceil() as usize;
        let n_detectors = 2 * diag + 1;
        CtGeometry {
            rows,
            cols,
            n_views,
            n_detectors,
            pixel_size: 1.0,
            detector_spacing: None,
        }
    }

    pub fn with_pixel_size(mut self, pixel_size: f64) -> Self {
        self.pixel_size = pixel_size;
        self
    }

    pub fn spacing(&self) -> f64 {
        self.detector_spacing.unwrap_or(0.5 * self.pixel_size)
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_views)
            .map(|v| v as f64 * PI / self.n_views as f64)
            .collect()
    }

    pub fn detector_offset(&self, d: usize) -> f64 {
        (d as f64 - (self.n_detectors as f64 - 1.0) / 2.0) * self.spacing()
    }

    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn sinogram_len(&self) -> usize {
        self.n_views * self.n_detectors
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.n_views == 0 || self.n_detectors == 0 {
            return Err(Error::config("CT geometry needs positive image size, views and detectors"));
        }
        if !(self.pixel_size > 0.0) || !(self.spacing() > 0.0) {
            return Err(Error::config("pixel size and detector spacing must be positive"));
        }
        let span = self.n_detectors as f64 * self.spacing();
        let diag = self.pixel_size * ((self.rows * self.rows + self.cols * self.cols) as f64).sqrt();
        if span < diag {
            log::warn!("detector span {span:.3} is shorter than the image diagonal {diag:.3}");
        }
        Ok(())
    }
}

/// Sparse ray table: for every ray the pixels it crosses and the lengths.
#[derive(Clone, Debug)]
struct RayTable {
    offsets: Vec<usize>,
    pixels: Vec<u32>,
    lengths: Vec<f64>,
}

/// Like [`trace_segments`], but an axis-aligned ray lying exactly on a grid
/// line gives half its length to the pixels on either side.
fn trace_ray(geom: &CtGeometry, theta: f64, t: f64, out: &mut Vec<(u32, f64)>) {
    let ps = geom.pixel_size;
    let (cos, sin) = (theta.cos(), theta.sin());
    let on_line = |coord: f64, lo: f64| {
        let k = (coord - lo) / ps;
        (k - k.round()).abs() < 1e-9
    };
    let split = (sin.abs() < 1e-15 && on_line(t * cos, -(geom.cols as f64) * ps / 2.0))
        || (cos.abs() < 1e-15 && on_line(t * sin, -(geom.rows as f64) * ps / 2.0));
    if !split {
        trace_segments(geom, theta, t, 1.0, out);
        return;
    }
    let eps = 1e-7 * ps;
    let mut both = Vec::new();
    trace_segments(geom, theta, t - eps, 0.5, &mut both);
    trace_segments(geom, theta, t + eps, 0.5, &mut both);
    both.sort_by_key(|&(p, _)| p);
    for (p, l) in both {
        match out.last_mut() {
            Some(last) if last.0 == p => last.1 += l,
            _ => out.push((p, l)),
        }
    }
}

/// Segments of the line `{b + s d}` inside each pixel, by parametric sweep
/// over grid-line crossings, each scaled by `weight`.
fn trace_segments(geom: &CtGeometry, theta: f64, t: f64, weight: f64, out: &mut Vec<(u32, f64)>) {
    let ps = geom.pixel_size;
    let (cos, sin) = (theta.cos(), theta.sin());
    let (bx, by) = (t * cos, t * sin);
    let (dx, dy) = (-sin, cos);
    let xmin = -(geom.cols as f64) * ps / 2.0;
    let xmax = -xmin;
    let ymax = geom.rows as f64 * ps / 2.0;
    let ymin = -ymax;

    // Clip the line to the image box.
    let mut s0 = f64::NEG_INFINITY;
    let mut s1 = f64::INFINITY;
    for (b, d, lo, hi) in [(bx, dx, xmin, xmax), (by, dy, ymin, ymax)] {
        if d.abs() < 1e-15 {
            if b < lo || b > hi {
                return;
            }
        } else {
            let (a, c) = ((lo - b) / d, (hi - b) / d);
            s0 = s0.max(a.min(c));
            s1 = s1.min(a.max(c));
        }
    }
    if s1 <= s0 {
        return;
    }

    let mut cuts = vec![s0, s1];
    if dx.abs() >= 1e-15 {
        for k in 0..=geom.cols {
            let s = (xmin + k as f64 * ps - bx) / dx;
            if s > s0 && s < s1 {
                cuts.push(s);
            }
        }
    }
    if dy.abs() >= 1e-15 {
        for k in 0..=geom.rows {
            let s = (ymin + k as f64 * ps - by) / dy;
            if s > s0 && s < s1 {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let (x, y) = (bx + mid * dx, by + mid * dy);
        let c = (((x - xmin) / ps).floor() as isize).clamp(0, geom.cols as isize - 1) as usize;
        let r = (((ymax - y) / ps).floor() as isize).clamp(0, geom.rows as isize - 1) as usize;
        out.push(((r * geom.cols + c) as u32, weight * len));
    }
}

impl RayTable {
    fn build(geom: &CtGeometry) -> Self {
        let angles = geom.angles();
        let per_ray: Vec<Vec<(u32, f64)>> = parallel::map_indexed(geom.sinogram_len(), |ray| {
            let v = ray / geom.n_detectors;
            let d = ray % geom.n_detectors;
            let mut segs = Vec::new();
            trace_ray(geom, angles[v], geom.detector_offset(d), &mut segs);
            segs
        });
        let mut offsets = Vec::with_capacity(per_ray.len() + 1);
        let mut pixels = Vec::new();
        let mut lengths = Vec::new();
        offsets.push(0);
        for segs in per_ray {
            for (p, l) in segs {
                pixels.push(p);
                lengths.push(l);
            }
            offsets.push(pixels.len());
        }
        RayTable {
            offsets,
            pixels,
            lengths,
        }
    }

    /// Pixel-major copy of the table with rays in ascending order.
    fn transpose(&self, n_pixels: usize) -> RayTable {
        let mut counts = vec![0usize; n_pixels + 1];
        for &p in &self.pixels {
            counts[p as usize + 1] += 1;
        }
        for i in 0..n_pixels {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut rays = vec![0u32; self.pixels.len()];
        let mut lengths = vec![0.0; self.pixels.len()];
        for ray in 0..self.offsets.len() - 1 {
            for k in self.offsets[ray]..self.offsets[ray + 1] {
                let p = self.pixels[k] as usize;
                rays[fill[p]] = ray as u32;
                lengths[fill[p]] = self.lengths[k];
                fill[p] += 1;
            }
        }
        RayTable {
            offsets,
            pixels: rays,
            lengths,
        }
    }

    fn gather(&self, x: &[f64], out: &mut [f64]) {
        let chunk = 64;
        parallel::for_each_chunk(out, chunk, |ci, block| {
            for (k, o) in block.iter_mut().enumerate() {
                let row = ci * chunk + k;
                let (a, b) = (self.offsets[row], self.offsets[row + 1]);
                *o = self.pixels[a..b]
                    .iter()
                    .zip(&self.lengths[a..b])
                    .map(|(&p, &l)| l * x[p as usize])
                    .sum();
            }
        });
    }
}

/// The system matrix `A` for a [`CtGeometry`].
#[derive(Clone, Debug)]
pub struct Radon {
    geom: CtGeometry,
    rays: RayTable,
    pixels: RayTable,
}

impl Radon {
    pub fn new(geom: &CtGeometry) -> Result<Self> {
        geom.validate()?;
        let rays = RayTable::build(geom);
        let pixels = rays.transpose(geom.image_len());
        Ok(Radon {
            geom: geom.clone(),
            rays,
            pixels,
        })
    }

    pub fn geometry(&self) -> &CtGeometry {
        &self.geom
    }

    /// `(pixel, length)` pairs crossed by ray `ray` (view-major index).
    pub fn ray(&self, ray: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.rays.offsets[ray], self.rays.offsets[ray + 1]);
        self.rays.pixels[a..b]
            .iter()
            .zip(&self.rays.lengths[a..b])
            .map(|(&p, &l)| (p as usize, l))
    }
}

pub fn build_radon(geom: &CtGeometry) -> Result<Radon> {
    Radon::new(geom)
}

impl LinearOperator for Radon {
    fn in_dim(&self) -> usize {
        self.geom.image_len()
    }
    fn out_dim(&self) -> usize {
        self.geom.sinogram_len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.rays.gather(x, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.pixels.gather(y, out);
    }
}

/// Ramp-filtered backprojection scaled by `pi / n_views`.
///
/// Each view is zero-padded to a power of two at least twice the detector
/// count and multiplied by `|f|` (cycles per unit length, zero at DC). The
/// backprojection interpolates the filtered views linearly at each pixel
/// centre.
pub fn fbp(y: &[f64], geom: &CtGeometry) -> Result<Image> {
    geom.validate()?;
    ensure_len("sinogram", y.len(), geom.sinogram_len())?;
    let nd = geom.n_detectors;
    let npad = (2 * nd).next_power_of_two();
    let du = geom.spacing();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(npad);
    let inv = planner.plan_fft_inverse(npad);
    // Band-limited ramp: spectrum of the sampled Ram-Lak kernel.
    let mut kernel = vec![Complex64::new(0.0, 0.0); npad];
    for (k, slot) in kernel.iter_mut().enumerate() {
        let n = if k <= npad / 2 { k as isize } else { k as isize - npad as isize };
        let h = if n == 0 {
            1.0 / (4.0 * du * du)
        } else if n % 2 != 0 {
            -1.0 / (PI * PI * (n * n) as f64 * du * du)
        } else {
            0.0
        };
        *slot = Complex64::new(h * du, 0.0);
    }
    fwd.process(&mut kernel);
    let ramp: Vec<f64> = kernel.iter().map(|c| c.re).collect();

    let filtered: Vec<Vec<f64>> = parallel::map_indexed(geom.n_views, |v| {
        let mut buf = vec![Complex64::new(0.0, 0.0); npad];
        for d in 0..nd {
            buf[d] = Complex64::new(y[v * nd + d], 0.0);
        }
        fwd.process(&mut buf);
        for (b, r) in buf.iter_mut().zip(&ramp) {
            *b *= *r;
        }
        inv.process(&mut buf);
        buf[..nd].iter().map(|c| c.re / npad as f64).collect()
    });

    let angles = geom.angles();
    let trig: Vec<(f64, f64)> = angles.iter().map(|a| (a.cos(), a.sin())).collect();
    let ps = geom.pixel_size;
    let (rows, cols) = (geom.rows, geom.cols);
    let centre = (nd as f64 - 1.0) / 2.0;
    let scale = PI / geom.n_views as f64;
    let mut out = vec![0.0; rows * cols];
    parallel::for_each_chunk(&mut out, cols, |r, row| {
        let yc = (rows as f64 / 2.0 - r as f64 - 0.5) * ps;
        for (c, o) in row.iter_mut().enumerate() {
            let xc = (c as f64 - cols as f64 / 2.0 + 0.5) * ps;
            let mut acc = 0.0;
            for (v, &(cs, sn)) in trig.iter().enumerate() {
                let u = (xc * cs + yc * sn) / du + centre;
                let i0 = u.floor();
                let f = u - i0;
                let i0 = i0 as isize;
                let q = &filtered[v];
                let at = |i: isize| {
                    if i >= 0 && (i as usize) < nd {
                        q[i as usize]
                    } else {
                        0.0
                    }
                };
                acc += (1.0 - f) * at(i0) + f * at(i0 + 1);
            }
            *o = acc * scale;
        }
    });
    Image::from_vec(rows, cols, out)
}
