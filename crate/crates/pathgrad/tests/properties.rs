//! Property tests for the crate's structural invariants.

use proptest::prelude::*;

use pathgrad::attribution::{
    integrated_gradients, pixel_importance, scaling_path, ImportanceMap, ScalarFn,
};
use pathgrad::autodiff::forward_output;
use pathgrad::evaluation::{localization_score, BoundingBox};
use pathgrad::models;
use pathgrad::Tensor;

fn finite_vec(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(data in finite_vec(6, -30.0, 30.0)) {
        let mut b = pathgrad::GraphBuilder::new();
        let x = b.input("x", &[6]).unwrap();
        let s = b.softmax(x).unwrap();
        b.output("y", s).unwrap();
        let net = b.finish().unwrap();
        let out = forward_output(&net, "y", &[("x", &Tensor::from_vec(data))]).unwrap();
        prop_assert!(out.data().iter().all(|&p| p >= 0.0));
        prop_assert!((out.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pixel_importance_nonnegative_and_channel_permutation_invariant(
        data in finite_vec(3 * 4 * 3, -5.0, 5.0)
    ) {
        let t = Tensor::new(vec![3, 4, 3], data.clone()).unwrap();
        let map = pixel_importance(&t).unwrap();
        prop_assert!(map.scores().iter().all(|&s| s >= 0.0));

        // Rotate the channel axis: per-pixel sums must not change.
        let mut rotated = vec![0.0; data.len()];
        for p in 0..12 {
            for c in 0..3 {
                rotated[p * 3 + (c + 1) % 3] = data[p * 3 + c];
            }
        }
        let map2 = pixel_importance(&Tensor::new(vec![3, 4, 3], rotated).unwrap()).unwrap();
        for (a, b) in map.scores().iter().zip(map2.scores()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn localization_is_scale_invariant(
        scores in finite_vec(16, 0.0, 10.0),
        scale in 1e-3f64..1e3,
    ) {
        let map = ImportanceMap::from_scores(4, 4, scores).unwrap();
        let boxes = [BoundingBox::new(1, 0, 3, 2).unwrap()];
        let base = localization_score(&map, &boxes);
        let scaled = localization_score(&map.scaled(scale), &boxes);
        prop_assert!((base - scaled).abs() <= 1e-9);
    }

    #[test]
    fn linear_models_are_exact_at_any_step_count(
        w in finite_vec(3, -2.0, 2.0),
        x in finite_vec(3, -2.0, 2.0),
        baseline in finite_vec(3, -2.0, 2.0),
        m in 1usize..40,
    ) {
        let net = models::linear_model(&w, 0.0).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let xt = Tensor::from_vec(x.clone());
        let bt = Tensor::from_vec(baseline.clone());
        let path = scaling_path(&xt, Some(&bt)).unwrap();
        let res = integrated_gradients(&f, &path, m).unwrap();
        for i in 0..3 {
            let expect = w[i] * (x[i] - baseline[i]);
            prop_assert!((res.values.data()[i] - expect).abs() <= 1e-12,
                "coord {i}: {} vs {expect}", res.values.data()[i]);
        }
        prop_assert!(res.completeness_gap <= 1e-12);
    }

    #[test]
    fn path_endpoints_are_bit_exact(
        x in finite_vec(5, -3.0, 3.0),
        baseline in finite_vec(5, -3.0, 3.0),
    ) {
        let xt = Tensor::from_vec(x);
        let bt = Tensor::from_vec(baseline);
        let path = scaling_path(&xt, Some(&bt)).unwrap();
        let start = path.at(0.0);
        let end = path.at(1.0);
        prop_assert_eq!(start.data(), bt.data());
        prop_assert_eq!(end.data(), xt.data());
    }

    #[test]
    fn model_serialization_roundtrips_forward_outputs(
        x in finite_vec(3, -2.0, 2.0),
        seed in 0u64..1000,
    ) {
        let net = models::build_mlp(
            &[3, 4, 2],
            models::Activation::Tanh,
            models::Head::Softmax,
            seed,
        )
        .unwrap();
        let arch = models::Arch::Mlp {
            sizes: vec![3, 4, 2],
            hidden: models::Activation::Tanh,
            head: models::Head::Softmax,
        };
        let mut path = std::env::temp_dir();
        path.push(format!("pathgrad-prop-{}-{seed}.model", std::process::id()));
        models::save_model(&path, &arch, &net).unwrap();
        let spec = models::load_model(&path).unwrap();
        std::fs::remove_file(&path).ok();
        let rebuilt = spec.build().unwrap();
        let xt = Tensor::from_vec(x);
        let target = models::one_hot(0, 2);
        let a = forward_output(&net, "probs", &[("x", &xt), ("target", &target)]).unwrap();
        let b = forward_output(&rebuilt, "probs", &[("x", &xt), ("target", &target)]).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }
}
