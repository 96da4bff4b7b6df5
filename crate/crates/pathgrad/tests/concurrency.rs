//! Shared immutable graphs support concurrent gradient evaluation: many
//! threads, one network, private workspaces, results identical to the
//! serial ones.

use pathgrad::attribution::{scaling_path, ScalarFn};
use pathgrad::models;
use pathgrad::Tensor;

#[test]
fn concurrent_interior_gradients_match_serial() {
    let net = models::build_mlp(
        &[4, 8, 1],
        models::Activation::Tanh,
        models::Head::Sigmoid,
        99,
    )
    .unwrap();
    let x = Tensor::from_slice(&[0.4, -0.7, 0.9, 0.1]);
    let path = scaling_path(&x, None).unwrap();
    let alphas: Vec<f64> = (1..=8).map(|k| k as f64 / 8.0).collect();

    let serial: Vec<Tensor> = {
        let f = ScalarFn::new(&net, "out", "x", &[]).unwrap();
        alphas.iter().map(|&a| f.grad(&path.at(a)).unwrap()).collect()
    };

    let parallel: Vec<Tensor> = std::thread::scope(|scope| {
        let handles: Vec<_> = alphas
            .iter()
            .map(|&a| {
                let net = &net;
                let path = &path;
                scope.spawn(move || {
                    let f = ScalarFn::new(net, "out", "x", &[]).unwrap();
                    f.grad(&path.at(a)).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    for (s, p) in serial.iter().zip(&parallel) {
        assert_eq!(s.data(), p.data());
    }
}
