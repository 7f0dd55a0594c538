//! Analytic ellipse phantoms.

use crate::error::{Error, Result};
use crate::ops::image::Image;
use crate::ops::rng::seeded;
use rand::Rng;

/// One ellipse: additive intensity, semi-axes, centre and rotation in
/// degrees, on the `[-1, 1]^2` square (y pointing up).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let phi = self.phi_deg.to_radians();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let u = dx * phi.cos() + dy * phi.sin();
        let v = -dx * phi.sin() + dy * phi.cos();
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

const fn e(intensity: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> Ellipse {
    Ellipse { intensity, a, b, x0, y0, phi_deg }
}

/// Modified (high-contrast) Shepp-Logan ellipses.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    e(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    e(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    e(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    e(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    e(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    e(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    e(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    e(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    e(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    e(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Sum of the intensities of the ellipses containing `(x, y)`.
pub fn ellipse_value(ellipses: &[Ellipse], x: f64, y: f64) -> f64 {
    ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum()
}

/// Rasterises ellipses by pixel-centre inclusion, clamped to `[0, 1]`.
pub fn rasterize(ellipses: &[Ellipse], rows: usize, cols: usize) -> Image {
    Image::from_fn(rows, cols, |r, c| {
        let x = 2.0 * (c as f64 + 0.5) / cols as f64 - 1.0;
        let y = 1.0 - 2.0 * (r as f64 + 0.5) / rows as f64;
        ellipse_value(ellipses, x, y).clamp(0.0, 1.0)
    })
}

pub fn shepp_logan(rows: usize, cols: usize) -> Result<Image> {
    check_size(rows, cols)?;
    Ok(rasterize(&SHEPP_LOGAN, rows, cols))
}

/// Seeded perturbation of the Shepp-Logan layout: inner ellipses move,
/// resize, rotate and change contrast; the skull stays fixed.
pub fn phantom_variant(rows: usize, cols: usize, seed: u64) -> Result<Image> {
    check_size(rows, cols)?;
    let mut rng = seeded(seed);
    let mut ellipses = SHEPP_LOGAN.to_vec();
    for el in ellipses.iter_mut().skip(2) {
        el.x0 += rng.random_range(-0.05..0.05);
        el.y0 += rng.random_range(-0.05..0.05);
        el.a *= rng.random_range(0.8..1.2);
        el.b *= rng.random_range(0.8..1.2);
        el.phi_deg += rng.random_range(-15.0..15.0);
        el.intensity *= rng.random_range(0.6..1.4);
    }
    Ok(rasterize(&ellipses, rows, cols))
}

/// Frame stack for low-rank plus sparse experiments: Shepp-Logan with a
/// slowly pulsing contrast plus a small disk that circles the centre.
pub fn dynamic_phantom(rows: usize, cols: usize, frames: usize) -> Result<Image> {
    if frames == 0 {
        return Err(Error::shape("need at least one frame"));
    }
    check_size(rows, cols)?;
    let mut stack = Vec::with_capacity(rows * cols * frames);
    for t in 0..frames {
        let phase = 2.0 * std::f64::consts::PI * t as f64 / frames as f64;
        let mut ellipses = SHEPP_LOGAN.to_vec();
        ellipses[4].intensity *= 1.0 + 0.5 * phase.sin();
        ellipses.push(e(0.4, 0.06, 0.06, 0.35 * phase.cos(), -0.3 + 0.2 * phase.sin(), 0.0));
        stack.extend_from_slice(rasterize(&ellipses, rows, cols).as_slice());
    }
    Image::new(rows, cols, frames, stack)
}

fn check_size(rows: usize, cols: usize) -> Result<()> {
    if rows < 16 || cols < 16 {
        return Err(Error::shape("phantom needs at least 16x16 pixels"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamic_frames_differ_only_inside() {
        let x = dynamic_phantom(32, 32, 6).unwrap();
        assert_eq!(x.dims(), (32, 32, 6));
        assert_ne!(x.frame(0), x.frame(3));
        assert_eq!(x.frame(0)[0], 0.0);
    }

    #[test]
    fn corners_are_empty() {
        let p = shepp_logan(64, 64).unwrap();
        for (r, c) in [(0, 0), (0, 63), (63, 0), (63, 63)] {
            assert_eq!(p.get(r, c), 0.0);
        }
        assert!(p.min() >= 0.0 && p.max() <= 1.0);
    }

    #[test]
    fn centre_value_is_hand_sum() {
        // (0,0) lies in the skull (1.0) and brain (-0.8) only
        assert!((ellipse_value(&SHEPP_LOGAN, 0.0, 0.0) - 0.2).abs() < 1e-15);
        let p = shepp_logan(65, 65).unwrap();
        assert!((p.get(32, 32) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn fine_raster_downsamples_to_coarse() {
        let coarse = shepp_logan(64, 64).unwrap();
        let fine = shepp_logan(128, 128).unwrap();
        let mut mad = 0.0;
        for r in 0..64 {
            for c in 0..64 {
                let avg = (fine.get(2 * r, 2 * c)
                    + fine.get(2 * r + 1, 2 * c)
                    + fine.get(2 * r, 2 * c + 1)
                    + fine.get(2 * r + 1, 2 * c + 1))
                    / 4.0;
                mad += (avg - coarse.get(r, c)).abs();
            }
        }
        assert!(mad / 4096.0 < 0.1);
    }

    #[test]
    fn variants_are_seeded_and_distinct() {
        let a = phantom_variant(32, 32, 1).unwrap();
        assert_eq!(a, phantom_variant(32, 32, 1).unwrap());
        assert_ne!(a, phantom_variant(32, 32, 2).unwrap());
        assert!(shepp_logan(8, 8).is_err());
    }
}
