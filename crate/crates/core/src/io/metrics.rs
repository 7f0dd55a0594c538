//! Image quality metrics and the metrics CSV.

use crate::error::{Error, Result};
use crate::ops::image::Image;
use std::fmt::Write as _;

pub fn rmse(x: &Image, reference: &Image) -> Result<f64> {
    x.check_same_shape(reference)?;
    let sse: f64 = x
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sse / x.len() as f64).sqrt())
}

/// `20 log10(peak / rmse)`; `f64::INFINITY` when the images are equal.
pub fn psnr(x: &Image, reference: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::value("PSNR peak must be positive"));
    }
    let e = rmse(x, reference)?;
    Ok(if e == 0.0 { f64::INFINITY } else { 20.0 * (peak / e).log10() })
}

pub const METRICS_HEADER: &str = "name,psnr,rmse,runtime_seconds,iterations";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub name: String,
    pub psnr: f64,
    pub rmse: f64,
    /// Left blank in the CSV when absent.
    pub runtime_seconds: Option<f64>,
    pub iterations: usize,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        let psnr = if self.psnr.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.6}", self.psnr)
        };
        let runtime = self.runtime_seconds.map(|t| format!("{t:.3}")).unwrap_or_default();
        format!("{},{psnr},{:.8e},{runtime},{}", self.name, self.rmse, self.iterations)
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::rng::{seeded, uniform_vec};

    #[test]
    fn identical_images_have_infinite_psnr() {
        let x = Image::filled(4, 4, 0.3);
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn constant_offset() {
        let x = Image::filled(5, 5, 0.1);
        let r = Image::zeros(5, 5);
        assert!((rmse(&x, &r).unwrap() - 0.1).abs() < 1e-15);
        assert!((psnr(&x, &r, 1.0).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn two_pass_recomputation() {
        let mut rng = seeded(4);
        let x = Image::from_vec(7, 9, uniform_vec(&mut rng, 63)).unwrap();
        let r = Image::from_vec(7, 9, uniform_vec(&mut rng, 63)).unwrap();
        let mut diffs = Vec::new();
        for i in 0..63 {
            diffs.push(x.as_slice()[i] - r.as_slice()[i]);
        }
        let mse = diffs.iter().map(|d| d * d).sum::<f64>() / 63.0;
        let want = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&x, &r, 1.0).unwrap() - want).abs() < 1e-10);
        assert!(psnr(&x, &Image::zeros(3, 3), 1.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let row = MetricsRow {
            name: "fbp".into(),
            psnr: f64::INFINITY,
            rmse: 0.0,
            runtime_seconds: None,
            iterations: 0,
        };
        assert_eq!(metrics_csv(&[row]), format!("{METRICS_HEADER}\nfbp,inf,0.00000000e0,,0\n"));
    }
}
