use mbirlab::io::phantom_variant;
use mbirlab::learning::{learn_transform, learn_ultra, transform_objective};
use mbirlab::ops::bases::random_orthogonal;
use mbirlab::ops::rng::seeded;
use mbirlab::ops::{extract_patches, PatchConfig};
use ndarray::{concatenate, Array2, Axis};

mod common;
use common::{sparse_codes, two_cluster_accuracy};

#[test]
fn planted_clusters_are_recovered() {
    for seed in 0..5 {
        let mut rng = seeded(seed);
        let omegas: Vec<Array2<f64>> = (0..2).map(|_| random_orthogonal(16, &mut rng)).collect();
        let parts: Vec<Array2<f64>> =
            omegas.iter().map(|o| o.t().dot(&sparse_codes(16, 150, 2, &mut rng))).collect();
        let x = concatenate(Axis(1), &[parts[0].view(), parts[1].view()]).unwrap();
        let truth: Vec<usize> = (0..300).map(|i| i / 150).collect();
        let fit = learn_ultra(x.view(), 2, 0.5, 40, seed + 10).unwrap();
        let acc = two_cluster_accuracy(&fit.assignment.labels, &truth);
        println!("seed {seed}: accuracy {acc:.3}");
        assert!(acc >= 0.95, "seed {seed}: accuracy {acc}");
    }
}

#[test]
fn planted_transform_reaches_the_true_objective() {
    // gamma sits just below the smallest planted magnitude
    for seed in 0..5 {
        let mut rng = seeded(seed + 40);
        let omega = random_orthogonal(16, &mut rng);
        let z = sparse_codes(16, 1000, 3, &mut rng);
        let x = omega.t().dot(&z);
        let gamma = 0.9;
        let truth = transform_objective(&omega, x.view(), &z, gamma);
        let fit = learn_transform(x.view(), gamma, 300, 0).unwrap();
        let got = *fit.objective.last().unwrap();
        println!("seed {seed}: learned {got} truth {truth}");
        assert!((got - truth).abs() <= 1e-6 * truth, "seed {seed}: {got} vs {truth}");
    }
}

#[test]
fn sparse_clusters_keep_orthonormal_transforms() {
    // flat phantom patches make some cluster cross products nearly rank one
    let mats: Vec<_> =
        [0, 10].iter().map(|&s| extract_patches(&phantom_variant(32, 32, s).unwrap(), &PatchConfig::square(6, 2)).unwrap()).collect();
    let x = concatenate(Axis(1), &[mats[0].view(), mats[1].view()]).unwrap();
    let fit = learn_ultra(x.view(), 3, 0.05, 15, 0).unwrap();
    for t in &fit.model.transforms {
        let defect = (t.omega.t().dot(&t.omega) - Array2::<f64>::eye(36)).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(defect <= 1e-10, "{defect}");
    }
    assert!(fit.objective.windows(2).all(|w| w[1] <= w[0] + 1e-9 * fit.objective[0]));
}
