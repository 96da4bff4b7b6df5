//! Plain SGD with cross-entropy for the toy models.
//!
//! Training uses the `loss` output wired into the classifier graphs and
//! `backward()` w.r.t. the parameters; nothing fancier is needed at this
//! scale. The input network is never mutated: training works on a copy and
//! returns it. Given a seed, the result is bit-identical across runs.

use crate::autodiff::{backward, forward_output};
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::models::one_hot;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Labelled examples; `items` pair the data-input tensor with a class id.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub items: Vec<(Tensor, usize)>,
    pub classes: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

/// Name of the data input: the declared input that is not `target`.
fn data_input_name(net: &Network) -> Result<String> {
    net.inputs()
        .iter()
        .map(|(n, _)| n.clone())
        .find(|n| n != "target")
        .ok_or_else(|| Error::InvalidArg("net has no data input".into()))
}

/// Encode a label for the net's target input: one-hot for K-way heads,
/// a scalar 0/1 for the binary sigmoid head.
fn encode_target(net: &Network, label: usize, classes: usize) -> Result<Tensor> {
    let shape = net.input_shape("target")?;
    match shape {
        [1] if classes == 2 => Ok(Tensor::from_slice(&[label as f64])),
        [k] if *k == classes => Ok(one_hot(label, classes)),
        other => Err(Error::ShapeMismatch {
            context: "target encoding".into(),
            expected: vec![classes],
            got: other.to_vec(),
        }),
    }
}

/// SGD over the dataset; returns the trained copy.
pub fn train_toy(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<Network> {
    net.output_node("loss").map_err(|_| {
        Error::InvalidArg("net has no loss output; build it with a classifier head".into())
    })?;
    for (_, label) in &data.items {
        if *label >= data.classes {
            return Err(Error::InvalidArg(format!(
                "label {label} out of range for {} classes",
                data.classes
            )));
        }
    }
    let input_name = data_input_name(net)?;
    let mut trained = net.clone();
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.items.len()).collect();

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let (x, label) = &data.items[i];
            let target = encode_target(&trained, *label, data.classes)?;
            let grads = backward(
                &trained,
                "loss",
                &[(input_name.as_str(), x), ("target", &target)],
            )
            .map_err(|e| match e {
                // log(0) from a fully collapsed probability is divergence,
                // not a caller mistake.
                Error::DomainViolation(_) => Error::Divergence {
                    epoch,
                    loss: f64::INFINITY,
                },
                other => other,
            })?;
            let mut nan = false;
            for name in trained.param_names().to_vec() {
                let g = grads.param(&name);
                if !g.all_finite() {
                    nan = true;
                    break;
                }
                let updated = trained
                    .param(&name)?
                    .zip_map(g, |p, gr| p - cfg.learning_rate * gr);
                trained.set_param_unchecked(&name, updated);
            }
            if nan {
                return Err(Error::Divergence {
                    epoch,
                    loss: f64::NAN,
                });
            }
        }
    }
    Ok(trained)
}

/// Mean training loss, for monitoring.
pub fn mean_loss(net: &Network, data: &Dataset) -> Result<f64> {
    let input_name = data_input_name(net)?;
    let mut total = 0.0;
    for (x, label) in &data.items {
        let target = encode_target(net, *label, data.classes)?;
        total += forward_output(net, "loss", &[(input_name.as_str(), x), ("target", &target)])?
            .item();
    }
    Ok(total / data.items.len() as f64)
}

/// Classification accuracy under the net's head.
pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    let input_name = data_input_name(net)?;
    let binary = net.output_node("probs").is_err();
    let mut correct = 0usize;
    for (x, label) in &data.items {
        let predicted = if binary {
            let p = forward_output(net, "out", &[(input_name.as_str(), x)])?.item();
            usize::from(p > 0.5)
        } else {
            let target = encode_target(net, 0, data.classes)?;
            let probs = forward_output(
                net,
                "probs",
                &[(input_name.as_str(), x), ("target", &target)],
            )?;
            probs
                .data()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        if predicted == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_mlp, gaussian_blobs, Activation, Head};

    fn logistic_net() -> Network {
        build_mlp(&[2, 1], Activation::Identity, Head::Sigmoid, 4).unwrap()
    }

    #[test]
    fn logistic_model_separates_blobs() {
        let data = gaussian_blobs(60, 5);
        let net = logistic_net();
        let cfg = TrainConfig {
            epochs: 6,
            learning_rate: 0.5,
            seed: 9,
        };
        let trained = train_toy(&net, &data, &cfg).unwrap();
        let acc = accuracy(&trained, &data).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn zero_epochs_leaves_params_untouched() {
        let data = gaussian_blobs(10, 5);
        let net = logistic_net();
        let cfg = TrainConfig {
            epochs: 0,
            learning_rate: 0.5,
            seed: 9,
        };
        let trained = train_toy(&net, &data, &cfg).unwrap();
        for name in net.param_names() {
            assert_eq!(net.param(name).unwrap(), trained.param(name).unwrap());
        }
    }

    #[test]
    fn training_is_seed_deterministic_and_pure() {
        let data = gaussian_blobs(20, 5);
        let net = logistic_net();
        let before: Vec<f64> = net.param("w0").unwrap().data().to_vec();
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.3,
            seed: 77,
        };
        let a = train_toy(&net, &data, &cfg).unwrap();
        let b = train_toy(&net, &data, &cfg).unwrap();
        for name in net.param_names() {
            assert_eq!(a.param(name).unwrap().data(), b.param(name).unwrap().data());
        }
        // The input net was not mutated.
        assert_eq!(net.param("w0").unwrap().data(), before.as_slice());
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let data = Dataset {
            items: vec![(Tensor::from_slice(&[0.0, 0.0]), 3)],
            classes: 2,
        };
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.1,
            seed: 0,
        };
        assert!(train_toy(&logistic_net(), &data, &cfg).is_err());
    }

    #[test]
    fn headless_net_cannot_train() {
        let net = build_mlp(&[2, 1], Activation::Identity, Head::None, 0).unwrap();
        let data = gaussian_blobs(5, 5);
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.1,
            seed: 0,
        };
        assert!(train_toy(&net, &data, &cfg).is_err());
    }
}
