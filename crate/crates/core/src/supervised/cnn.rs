//! Three-layer residual CNN with reflect padding and hand-written
//! backpropagation:
//! `x + conv3(relu(conv2(relu(conv1(x)))))`, all kernels 3x3.

use crate::error::{Error, Result};
use crate::ops::image::Image;
use crate::ops::rng::{normal_vec, seeded};
use serde::{Deserialize, Serialize};

/// Weights are stored `[out][in][ky][kx]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvNetParams {
    pub channels: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightInit {
    Zero,
    /// Zero-mean Gaussian weights with this standard deviation; zero biases.
    Gaussian(f64),
}

impl ConvNetParams {
    pub fn zeros(channels: usize) -> Self {
        let c = channels;
        ConvNetParams {
            channels: c,
            w1: vec![0.0; 9 * c],
            b1: vec![0.0; c],
            w2: vec![0.0; 9 * c * c],
            b2: vec![0.0; c],
            w3: vec![0.0; 9 * c],
            b3: vec![0.0],
        }
    }

    pub fn init(channels: usize, init: WeightInit, seed: u64) -> Self {
        let mut p = Self::zeros(channels);
        if let WeightInit::Gaussian(std) = init {
            let mut rng = seeded(seed);
            for w in [&mut p.w1, &mut p.w2, &mut p.w3] {
                let n = normal_vec(&mut rng, w.len());
                w.iter_mut().zip(n).for_each(|(a, b)| *a = std * b);
            }
        }
        p
    }

    pub fn param_count(channels: usize) -> usize {
        let c = channels;
        9 * c + c + 9 * c * c + c + 9 * c + 1
    }

    /// Parameters in the order `w1, b1, w2, b2, w3, b3`.
    pub fn to_flat(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn from_flat(channels: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::param_count(channels) {
            return Err(Error::shape(format!(
                "{} parameters given, a {channels}-channel net has {}",
                flat.len(),
                Self::param_count(channels)
            )));
        }
        let mut p = Self::zeros(channels);
        let mut at = 0;
        for w in [&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2, &mut p.w3, &mut p.b3] {
            let n = w.len();
            w.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(p)
    }

    pub fn is_zero(&self) -> bool {
        self.to_flat().iter().all(|&v| v == 0.0)
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

/// Neighbour index table: `taps[p * 9 + k]` is the pixel read by tap `k`
/// at output pixel `p`.
fn taps(rows: usize, cols: usize) -> Vec<u32> {
    let mut t = Vec::with_capacity(rows * cols * 9);
    for r in 0..rows {
        for c in 0..cols {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let rr = reflect(r as isize + dy, rows);
                    let cc = reflect(c as isize + dx, cols);
                    t.push((rr * cols + cc) as u32);
                }
            }
        }
    }
    t
}

/// `out[o] = b[o] + sum_i w[o, i] * in[i]` (3x3 taps), channel-major buffers.
fn conv(input: &[f64], cin: usize, w: &[f64], b: &[f64], cout: usize, taps: &[u32], hw: usize) -> Vec<f64> {
    let mut out = vec![0.0; cout * hw];
    for o in 0..cout {
        let dst = &mut out[o * hw..(o + 1) * hw];
        dst.iter_mut().for_each(|v| *v = b[o]);
        for i in 0..cin {
            let src = &input[i * hw..(i + 1) * hw];
            let k = &w[(o * cin + i) * 9..(o * cin + i + 1) * 9];
            for (p, d) in dst.iter_mut().enumerate() {
                let t = &taps[p * 9..p * 9 + 9];
                let mut acc = 0.0;
                for q in 0..9 {
                    acc += k[q] * src[t[q] as usize];
                }
                *d += acc;
            }
        }
    }
    out
}

/// Gradients of `conv` given the output gradient `g`.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    cin: usize,
    w: &[f64],
    cout: usize,
    g: &[f64],
    taps: &[u32],
    hw: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    need_input: bool,
) -> Vec<f64> {
    let mut gin = if need_input { vec![0.0; cin * hw] } else { Vec::new() };
    for o in 0..cout {
        let go = &g[o * hw..(o + 1) * hw];
        gb[o] += go.iter().sum::<f64>();
        for i in 0..cin {
            let src = &input[i * hw..(i + 1) * hw];
            let base = (o * cin + i) * 9;
            let mut acc = [0.0; 9];
            for (p, &gp) in go.iter().enumerate() {
                if gp == 0.0 {
                    continue;
                }
                let t = &taps[p * 9..p * 9 + 9];
                for q in 0..9 {
                    acc[q] += gp * src[t[q] as usize];
                }
            }
            for q in 0..9 {
                gw[base + q] += acc[q];
            }
            if need_input {
                let k = &w[base..base + 9];
                let dst = &mut gin[i * hw..(i + 1) * hw];
                for (p, &gp) in go.iter().enumerate() {
                    if gp == 0.0 {
                        continue;
                    }
                    let t = &taps[p * 9..p * 9 + 9];
                    for q in 0..9 {
                        dst[t[q] as usize] += k[q] * gp;
                    }
                }
            }
        }
    }
    gin
}

struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<f64>,
}

fn forward_frame(theta: &ConvNetParams, x: &[f64], taps: &[u32], hw: usize) -> Activations {
    let c = theta.channels;
    let mut h1 = conv(x, 1, &theta.w1, &theta.b1, c, taps, hw);
    h1.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut h2 = conv(&h1, c, &theta.w2, &theta.b2, c, taps, hw);
    h2.iter_mut().for_each(|v| *v = v.max(0.0));
    let a3 = conv(&h2, c, &theta.w3, &theta.b3, 1, taps, hw);
    let out = x.iter().zip(&a3).map(|(p, q)| p + q).collect();
    Activations { h1, h2, out }
}

fn check_input(theta: &ConvNetParams, x: &Image) -> Result<()> {
    if x.rows() < 3 || x.cols() < 3 {
        return Err(Error::shape("CNN input must be at least 3x3"));
    }
    if ConvNetParams::param_count(theta.channels) != theta.to_flat().len() {
        return Err(Error::shape("inconsistent CNN parameter lengths"));
    }
    Ok(())
}

/// Applies the network to every frame.
pub fn cnn_forward(theta: &ConvNetParams, x: &Image) -> Result<Image> {
    check_input(theta, x)?;
    if theta.is_zero() {
        return Ok(x.clone());
    }
    let hw = x.frame_len();
    let t = taps(x.rows(), x.cols());
    let mut out = Vec::with_capacity(x.len());
    for f in 0..x.frames() {
        out.extend(forward_frame(theta, x.frame(f), &t, hw).out);
    }
    x.with_data(out)
}

/// Gradients of `<grad_out, f(x)>` with respect to the parameters and the
/// input.
pub fn cnn_backward(theta: &ConvNetParams, x: &Image, grad_out: &Image) -> Result<(ConvNetParams, Image)> {
    check_input(theta, x)?;
    x.check_same_shape(grad_out)?;
    let c = theta.channels;
    let hw = x.frame_len();
    let t = taps(x.rows(), x.cols());
    let mut grad = ConvNetParams::zeros(c);
    let mut gx_all = Vec::with_capacity(x.len());
    for f in 0..x.frames() {
        let xf = x.frame(f);
        let g = grad_out.frame(f);
        let act = forward_frame(theta, xf, &t, hw);
        let mut g2 = conv_backward(&act.h2, c, &theta.w3, 1, g, &t, hw, &mut grad.w3, &mut grad.b3, true);
        g2.iter_mut().zip(&act.h2).for_each(|(gv, h)| if *h <= 0.0 { *gv = 0.0 });
        let mut g1 = conv_backward(&act.h1, c, &theta.w2, c, &g2, &t, hw, &mut grad.w2, &mut grad.b2, true);
        g1.iter_mut().zip(&act.h1).for_each(|(gv, h)| if *h <= 0.0 { *gv = 0.0 });
        let gx = conv_backward(xf, 1, &theta.w1, c, &g1, &t, hw, &mut grad.w1, &mut grad.b1, true);
        gx_all.extend(g.iter().zip(&gx).map(|(a, b)| a + b));
    }
    Ok((grad, x.with_data(gx_all)?))
}

/// Squared error `||f(x) - target||^2` summed over all frames, and the
/// parameter gradient of `scale` times it.
pub(crate) fn squared_error_gradient(
    theta: &ConvNetParams,
    x: &Image,
    target: &Image,
    scale: f64,
) -> Result<(f64, ConvNetParams)> {
    check_input(theta, x)?;
    x.check_same_shape(target)?;
    let c = theta.channels;
    let hw = x.frame_len();
    let t = taps(x.rows(), x.cols());
    let mut grad = ConvNetParams::zeros(c);
    let mut sq = 0.0;
    for f in 0..x.frames() {
        let xf = x.frame(f);
        let act = forward_frame(theta, xf, &t, hw);
        let r: Vec<f64> = act.out.iter().zip(target.frame(f)).map(|(p, q)| p - q).collect();
        sq += r.iter().map(|v| v * v).sum::<f64>();
        let g: Vec<f64> = r.iter().map(|v| 2.0 * scale * v).collect();
        let mut g2 = conv_backward(&act.h2, c, &theta.w3, 1, &g, &t, hw, &mut grad.w3, &mut grad.b3, true);
        g2.iter_mut().zip(&act.h2).for_each(|(gv, h)| if *h <= 0.0 { *gv = 0.0 });
        let mut g1 = conv_backward(&act.h1, c, &theta.w2, c, &g2, &t, hw, &mut grad.w2, &mut grad.b2, true);
        g1.iter_mut().zip(&act.h1).for_each(|(gv, h)| if *h <= 0.0 { *gv = 0.0 });
        conv_backward(xf, 1, &theta.w1, c, &g1, &t, hw, &mut grad.w1, &mut grad.b1, false);
    }
    Ok((sq, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::rng::uniform_vec;

    fn random_image(rows: usize, cols: usize, seed: u64) -> Image {
        let v: Vec<f64> = uniform_vec(&mut seeded(seed), rows * cols).iter().map(|u| 2.0 * u - 1.0).collect();
        Image::from_vec(rows, cols, v).unwrap()
    }

    #[test]
    fn zero_weights_are_the_identity() {
        let x = random_image(5, 6, 1);
        assert_eq!(cnn_forward(&ConvNetParams::zeros(4), &x).unwrap(), x);
        assert_eq!(ConvNetParams::zeros(16).to_flat().len(), 9 * 16 + 16 + 9 * 256 + 16 + 9 * 16 + 1);
    }

    #[test]
    fn hand_evaluated_identity_path() {
        // one channel: centre taps 1, 2, 3 and biases 0 except b2 = 0.5
        let mut p = ConvNetParams::zeros(1);
        p.w1[4] = 1.0;
        p.w2[4] = 2.0;
        p.b2[0] = 0.5;
        p.w3[4] = 3.0;
        let x = Image::filled(4, 4, 0.25);
        // relu(0.25) = 0.25 -> relu(2 * 0.25 + 0.5) = 1 -> 3 * 1 = 3, plus skip
        let y = cnn_forward(&p, &x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 3.25));
        let neg = Image::filled(4, 4, -1.0);
        // relu(-1) = 0 -> relu(0.5) = 0.5 -> 1.5, plus skip
        assert!(cnn_forward(&p, &neg).unwrap().as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn network_is_not_linear() {
        let mut p = ConvNetParams::init(3, WeightInit::Gaussian(0.5), 4);
        // zero biases would make the net positively homogeneous
        p.b1 = vec![0.3, -0.2, 0.1];
        p.b2 = vec![-0.1, 0.2, 0.4];
        let x = random_image(6, 6, 2);
        let x2 = x.with_data(x.as_slice().iter().map(|v| 2.0 * v).collect()).unwrap();
        let f = cnn_forward(&p, &x).unwrap();
        let f2 = cnn_forward(&p, &x2).unwrap();
        let gap = f2.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - 2.0 * b).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-6);
    }

    #[test]
    fn zero_output_gradient_gives_zero() {
        let p = ConvNetParams::init(2, WeightInit::Gaussian(0.3), 1);
        let x = random_image(5, 5, 3);
        let (g, gx) = cnn_backward(&p, &x, &Image::zeros(5, 5)).unwrap();
        assert!(g.is_zero());
        assert!(gx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn skip_path_passes_gradient_through() {
        let x = random_image(5, 5, 4);
        let mut g = Image::zeros(5, 5);
        g.set(2, 3, 1.0);
        let (_, gx) = cnn_backward(&ConvNetParams::zeros(2), &x, &g).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = random_image(8, 8, 5);
        let target = random_image(8, 8, 6);
        let p = ConvNetParams::init(2, WeightInit::Gaussian(0.4), 7);
        // loss = 0.5 ||f(x) - target||^2
        let loss = |p: &ConvNetParams, x: &Image| {
            let y = cnn_forward(p, x).unwrap();
            0.5 * y.as_slice().iter().zip(target.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let y = cnn_forward(&p, &x).unwrap();
        let g_out = y.with_data(y.as_slice().iter().zip(target.as_slice()).map(|(a, b)| a - b).collect()).unwrap();
        let (g, gx) = cnn_backward(&p, &x, &g_out).unwrap();
        let flat = p.to_flat();
        let gflat = g.to_flat();
        let h = 1e-5;
        for i in 0..flat.len() {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (loss(&ConvNetParams::from_flat(2, &up).unwrap(), &x)
                - loss(&ConvNetParams::from_flat(2, &dn).unwrap(), &x))
                / (2.0 * h);
            assert!((fd - gflat[i]).abs() <= 1e-4 * fd.abs().max(1e-2), "param {i}: {fd} vs {}", gflat[i]);
        }
        for i in 0..64 {
            let mut up = x.clone();
            let mut dn = x.clone();
            up.as_mut_slice()[i] += h;
            dn.as_mut_slice()[i] -= h;
            let fd = (loss(&p, &up) - loss(&p, &dn)) / (2.0 * h);
            assert!((fd - gx.as_slice()[i]).abs() <= 1e-4 * fd.abs().max(1e-2));
        }
    }
}
