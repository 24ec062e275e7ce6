use std::sync::Arc;

use distreg_core::distributions::EmpiricalDistribution;
use distreg_core::embeddings::{
    embedding_distance, empirical_quantile, quantile_levels, DirectionScheme, Embedder, EmbeddingConfig, EmbeddingVector,
    Fingerprint,
};
use distreg_core::kernel_ridge::{fit, gram_matrix, regularized_risk, KernelConfig};
use proptest::prelude::*;

fn vectors(rows: &[Vec<f64>]) -> Vec<EmbeddingVector> {
    let w: Arc<[f64]> = Arc::from(vec![1.0 / rows[0].len() as f64; rows[0].len()]);
    rows.iter()
        .map(|r| EmbeddingVector::new(r.clone(), w.clone(), Fingerprint("p".into())).unwrap())
        .collect()
}

fn cloud() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 2..40).prop_map(|mut v| {
        if v.len() % 2 == 1 {
            v.pop();
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_positive_semidefinite(rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..12),
                                     ell in 0.1f64..5.0) {
        let g = gram_matrix(&KernelConfig::new(ell).unwrap(), &vectors(&rows)).unwrap();
        prop_assert_eq!(g.clone(), g.transpose());
        let min = g.symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-10, "smallest eigenvalue {}", min);
    }

    #[test]
    fn empirical_quantile_is_monotone_and_bounded(mut xs in prop::collection::vec(-10.0f64..10.0, 1..50),
                                                 mut ts in prop::collection::vec(0.0f64..=1.0, 2..10)) {
        xs.sort_by(f64::total_cmp);
        ts.sort_by(f64::total_cmp);
        let qs: Vec<f64> = ts.iter().map(|&t| empirical_quantile(&xs, t).unwrap()).collect();
        prop_assert!(qs.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(qs.iter().all(|q| xs.contains(q)));
    }

    #[test]
    fn quantile_levels_are_symmetric_inside_trim(count in 1usize..60, trim in 0.0f64..0.45) {
        let l = quantile_levels(count, trim);
        prop_assert_eq!(l.len(), count);
        for (a, b) in l.iter().zip(l.iter().rev()) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
        prop_assert!(l.iter().all(|&t| t > trim && t < 1.0 - trim));
    }

    #[test]
    fn sliced_distance_is_a_metric(a in cloud(), b in cloud(), c in cloud(), seed in any::<u64>()) {
        let cfg = EmbeddingConfig::SlicedWasserstein {
            num_directions: 5,
            num_quantiles: 7,
            trim: 0.0,
            seed,
            directions: DirectionScheme::Random,
        };
        let emb = Embedder::new(&cfg, 2).unwrap();
        let e = |v: &Vec<f64>| emb.embed(&EmpiricalDistribution::new("x", 2, v.clone()).unwrap()).unwrap();
        let (ea, eb, ec) = (e(&a), e(&b), e(&c));
        let d = |u: &EmbeddingVector, v: &EmbeddingVector| embedding_distance(u, v).unwrap();
        prop_assert_eq!(d(&ea, &ea), 0.0);
        prop_assert_eq!(d(&ea, &eb), d(&eb, &ea));
        prop_assert!(d(&ea, &ec) <= d(&ea, &eb) + d(&eb, &ec) + 1e-12);
    }

    #[test]
    fn fitted_coefficients_minimize_the_regularized_risk(
        rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 2..10),
        lambda in 1e-3f64..1.0,
        seed in any::<u64>(),
    ) {
        let x = vectors(&rows);
        let y: Vec<f64> = (0..x.len()).map(|i| ((seed >> (i % 60)) & 7) as f64 - 3.5).collect();
        let kernel = KernelConfig::new(1.0).unwrap();
        let model = fit(&x, &y, lambda, kernel).unwrap();
        let g = gram_matrix(&kernel, &x).unwrap();
        let best = regularized_risk(&g, model.alpha(), &y, lambda);
        for i in 0..x.len() {
            for h in [-1e-3, 1e-3] {
                let mut a = model.alpha().to_vec();
                a[i] += h;
                prop_assert!(regularized_risk(&g, &a, &y, lambda) >= best - 1e-12);
            }
        }
    }
}
