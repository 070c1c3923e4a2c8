use dynsample_core::chernoff::{chernoff_info, rho, scaled_pair_terms, ChernoffOptions};
use dynsample_core::cluster::ari;
use dynsample_core::cluster::GmmConfig;
use dynsample_core::nalgebra::DMatrix;
use dynsample_core::pairs::pair_count;
use dynsample_core::sampling::{algorithm1_uniform, algorithm2_chernoff, PipelineConfig};
use dynsample_core::sbm::{initial_sample, make_block_model, round_count, sample_sbm, BlockModel};
use dynsample_core::spectral::latent_from_block_model;
use dynsample_core::spectral::SpectralConfig;
use proptest::prelude::*;

/// Symmetrized entries in (0.05, 0.95) and a random simplex.
fn block_model() -> impl Strategy<Value = BlockModel> {
    (2usize..=6).prop_flat_map(|k| {
        (prop::collection::vec(0.05f64..0.95, k * k), prop::collection::vec(0.01f64..1.0, k)).prop_map(
            move |(raw, w)| {
                let b = DMatrix::from_fn(k, k, |i, j| 0.5 * (raw[i * k + j] + raw[j * k + i]));
                let s: f64 = w.iter().sum();
                make_block_model(b, w.iter().map(|x| x / s).collect()).unwrap()
            },
        )
    })
}

/// Exhaustive pair counting over all unordered pairs.
fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0i128, 0i128, 0i128, 0i128);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1,
                (true, false) => only_a += 1,
                (false, true) => only_b += 1,
                (false, false) => neither += 1,
            }
        }
    }
    let num = 2 * (both * neither - only_a * only_b);
    let den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn label_pair() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..=12).prop_flat_map(|n| (prop::collection::vec(0usize..5, n), prop::collection::vec(0usize..5, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scaling_down_lowers_rho(model in block_model(), p in 0.05f64..0.95) {
        let opts = ChernoffOptions::default();
        let full = rho(model.b(), model.pi(), &opts).unwrap();
        let scaled = rho(&(model.b() * p), model.pi(), &opts).unwrap();
        prop_assert!(full > scaled, "{full} vs {scaled}");
    }

    #[test]
    fn woodbury_inverse_matches_direct(model in block_model(), p in 0.05f64..0.95, t in 0.02f64..0.98, pick in 0usize..15) {
        let pairs = dynsample_core::chernoff::block_pairs(model.k());
        let (k, l) = pairs[pick % pairs.len()];
        let terms = scaled_pair_terms(&model, p, t, k, l).unwrap();
        let scale = terms.inverse_direct.amax();
        prop_assert!((&terms.inverse_direct - &terms.inverse_woodbury).amax() <= 1e-8 * scale);
        prop_assert!((&terms.sigma_scaled - &terms.sigma_decomposed).amax() <= 1e-10 * terms.sigma_scaled.amax());
        prop_assert!(terms.h > 0.0);
        prop_assert!(terms.objective_scaled < terms.objective_unscaled);
    }

    #[test]
    fn rho_is_the_minimum_pair(model in block_model()) {
        let r = chernoff_info(&model, &ChernoffOptions::default()).unwrap();
        let (k, l) = r.active;
        prop_assert_eq!(r.rho, r.c[(k, l)]);
        for a in 0..model.k() {
            for b in a + 1..model.k() {
                prop_assert!(r.c[(a, b)] >= r.rho);
                prop_assert_eq!(r.c[(a, b)], r.c[(b, a)]);
            }
        }
    }

    #[test]
    fn latent_positions_reproduce_b(model in block_model()) {
        let latent = latent_from_block_model(&model);
        let err = (latent.reconstruct() - model.b()).amax();
        prop_assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn ari_matches_pair_counting((a, b) in label_pair()) {
        prop_assert_eq!(ari(&a, &b).unwrap(), ari_pairs(&a, &b));
        prop_assert_eq!(ari(&a, &b).unwrap(), ari(&b, &a).unwrap());
    }

    #[test]
    fn ari_ignores_label_names((a, b) in label_pair(), shift in 1usize..7) {
        let renamed: Vec<usize> = a.iter().map(|x| (x + shift) * 3).collect();
        prop_assert_eq!(ari(&a, &b).unwrap(), ari(&renamed, &b).unwrap());
        prop_assert_eq!(ari(&a, &renamed).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn both_algorithms_spend_the_same_budget(seed in any::<u64>(), p0 in 0.1f64..0.4, p1 in 0.0f64..0.5) {
        let b = DMatrix::from_row_slice(3, 3, &[0.7, 0.2, 0.1, 0.2, 0.6, 0.15, 0.1, 0.15, 0.5]);
        let model = make_block_model(b, vec![0.3, 0.3, 0.4]).unwrap();
        let n = 90;
        let (truth, _) = sample_sbm(&model, n, seed).unwrap();
        let e0 = initial_sample(n, p0, seed ^ 1).unwrap();
        let inc = round_count(p1 * pair_count(n) as f64);
        prop_assume!(inc <= pair_count(n) - e0.len());
        let cfg = PipelineConfig {
            spectral: SpectralConfig { max_rank: 10, ..SpectralConfig::default() },
            gmm: GmmConfig { k_range: 1..=4, restarts: 2, ..GmmConfig::default() },
            ..PipelineConfig::default()
        };
        let a = algorithm1_uniform(&truth, &e0, p1, seed, &cfg).unwrap();
        let c = algorithm2_chernoff(&truth, &e0, p1, seed, &cfg).unwrap();
        for out in [&a, &c] {
            prop_assert!(out.budget.is_disjoint());
            prop_assert_eq!(out.budget.increment(), inc);
            prop_assert_eq!(out.observed.len(), e0.len() + inc);
            prop_assert_eq!(out.tau_hat.len(), n);
        }
    }
}
