//! Proximal maps of the l1 norm and the l0 penalty.

use num_complex::Complex64;

#[inline]
pub fn soft(v: f64, tau: f64) -> f64 {
    let m = v.abs() - tau;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// Elementwise `sign(v) * max(|v| - tau, 0)`.
pub fn soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    debug_assert!(tau >= 0.0);
    v.iter().map(|&x| soft(x, tau)).collect()
}

/// Complex soft threshold: shrinks the magnitude, keeps the phase.
pub fn soft_threshold_complex(v: &[Complex64], tau: f64) -> Vec<Complex64> {
    v.iter()
        .map(|z| {
            let m = z.norm();
            if m > tau {
                z * ((m - tau) / m)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Keeps `v` when `|v| >= gamma`, otherwise zero. Ties are kept.
#[inline]
pub fn hard(v: f64, gamma: f64) -> f64 {
    if v.abs() >= gamma {
        v
    } else {
        0.0
    }
}

pub fn hard_threshold(v: &[f64], gamma: f64) -> Vec<f64> {
    debug_assert!(gamma >= 0.0);
    v.iter().map(|&x| hard(x, gamma)).collect()
}

pub fn hard_threshold_in_place(v: &mut [f64], gamma: f64) {
    for x in v.iter_mut() {
        *x = hard(*x, gamma);
    }
}

/// `min_z (v - z)^2 + gamma^2 [z != 0]` summed over entries, i.e. the cost
/// left after optimal hard-threshold coding.
pub fn l0_coding_cost(v: &[f64], gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    v.iter().map(|x| (x * x).min(g2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_examples() {
        assert_eq!(soft_threshold(&[3.0, -0.5, 1.0], 1.0), vec![2.0, 0.0, 0.0]);
        let v = [0.3, -1.2, 4.0];
        assert_eq!(soft_threshold(&v, 0.0), v.to_vec());
    }

    #[test]
    fn soft_matches_grid_search() {
        let v = [1.37, -0.21, -2.9, 0.69, 0.71, 0.0];
        let tau = 0.7;
        let z = soft_threshold(&v, tau);
        for (vi, zi) in v.iter().zip(&z) {
            // 1-D grid oracle on [-4, 4] with step 1e-4
            let mut best = (f64::INFINITY, 0.0);
            let mut k = -40000i64;
            while k <= 40000 {
                let c = k as f64 * 1e-4;
                let f = 0.5 * (vi - c).powi(2) + tau * c.abs();
                if f < best.0 {
                    best = (f, c);
                }
                k += 1;
            }
            assert!((best.1 - zi).abs() <= 1e-4 + 1e-12, "v={vi} grid={} soft={zi}", best.1);
        }
    }

    #[test]
    fn complex_soft_keeps_phase() {
        let z = [Complex64::new(3.0, 4.0), Complex64::new(0.1, 0.1)];
        let out = soft_threshold_complex(&z, 1.0);
        assert!((out[0] - Complex64::new(2.4, 3.2)).norm() < 1e-14);
        assert_eq!(out[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn hard_examples() {
        assert_eq!(hard_threshold(&[0.5, -2.0, 1.0], 1.0), vec![0.0, -2.0, 1.0]);
        let v = [0.3, -1.2, 4.0];
        assert_eq!(hard_threshold(&v, 0.0), v.to_vec());
    }

    fn brute_l0(v: &[f64], gamma: f64) -> (f64, Vec<f64>) {
        let n = v.len();
        let mut best = (f64::INFINITY, vec![0.0; n]);
        for mask in 0u32..(1 << n) {
            let z: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { v[i] } else { 0.0 }).collect();
            let cost: f64 = v.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                + gamma * gamma * mask.count_ones() as f64;
            if cost < best.0 {
                best = (cost, z);
            }
        }
        best
    }

    fn cost(v: &[f64], z: &[f64], gamma: f64) -> f64 {
        v.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            + gamma * gamma * z.iter().filter(|x| **x != 0.0).count() as f64
    }

    #[test]
    fn hard_matches_enumeration_length_six() {
        let v = [0.95, -0.3, 1.7, -0.89, 0.05, -2.2];
        let g = 0.9;
        let (best, _) = brute_l0(&v, g);
        assert!((cost(&v, &hard_threshold(&v, g), g) - best).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hard_is_exhaustive_minimizer(v in prop::collection::vec(-3.0f64..3.0, 1..=10), g in 0.0f64..2.0) {
            let (best, _) = brute_l0(&v, g);
            let z = hard_threshold(&v, g);
            prop_assert!((cost(&v, &z, g) - best).abs() <= 1e-12 * (1.0 + best));
            prop_assert!((l0_coding_cost(&v, g) - best).abs() <= 1e-12 * (1.0 + best));
        }

        #[test]
        fn soft_satisfies_subgradient_condition(v in prop::collection::vec(-3.0f64..3.0, 1..=12), tau in 0.0f64..2.0) {
            let z = soft_threshold(&v, tau);
            for (vi, zi) in v.iter().zip(&z) {
                let g = vi - zi;
                if *zi != 0.0 {
                    prop_assert!((g - tau * zi.signum()).abs() <= 1e-10);
                } else {
                    prop_assert!(g.abs() <= tau + 1e-10);
                }
            }
        }
    }
}
