//! Gradient verification harness: reverse-mode vs central differences.
//!
//! For every op in the catalog this builds a probe graph with seeded inputs
//! kept away from kinks and ties, then compares `backward` against
//! `finite_difference_gradient` coordinate by coordinate. Three-layer
//! random compositions exercise the chain rule across op families. The
//! acceptance suite runs the same sweep with its tolerance pinned.

use crate::autodiff::{backward, finite_difference_gradient, op_catalog};
use crate::error::Result;
use crate::graph::{Graph, GraphBuilder, NodeId};
use crate::models::{self, Activation, Head};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Margin kept between ReLU/max-pool inputs and their kinks or ties.
pub const KINK_MARGIN: f64 = 1e-2;

/// One gradient check: a graph, its bindings, and the scalar output.
pub struct Probe {
    pub name: String,
    pub graph: Graph,
    pub bindings: Vec<(String, Tensor)>,
    pub output: String,
}

/// Outcome of one probe.
#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub name: String,
    /// max over coordinates of |ad − fd| / max(1, |ad|, |fd|)
    pub max_rel_err: f64,
}

/// Compare backward() to central differences on one graph.
pub fn max_relative_error(
    graph: &Graph,
    output: &str,
    bindings: &[(String, Tensor)],
    h: f64,
) -> Result<f64> {
    let borrowed: Vec<(&str, &Tensor)> =
        bindings.iter().map(|(n, t)| (n.as_str(), t)).collect();
    let grads = backward(graph, output, &borrowed)?;
    let fd = finite_difference_gradient(graph, output, &borrowed, h)?;
    let mut worst: f64 = 0.0;
    for (name, ad) in &grads.inputs {
        let fd_t = &fd[name];
        for (a, f) in ad.data().iter().zip(fd_t.data()) {
            let rel = (a - f).abs() / f64::max(1.0, f64::max(a.abs(), f.abs()));
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn tensor_uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform(lo, hi)).collect()).expect("shape")
}

/// Uniform values bounded away from zero by the kink margin (for ReLU-style
/// probes).
fn tensor_off_kink(rng: &mut Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            sign * rng.uniform(KINK_MARGIN, scale)
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// Values whose pairwise gaps within each pooling window are at least the
/// margin, so max-pool argmaxes are stable under the FD perturbation.
fn tensor_tie_free(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    // Distinct multiples of 3·margin in shuffled order.
    let mut levels: Vec<f64> = (0..n).map(|i| i as f64 * 3.0 * KINK_MARGIN).collect();
    rng.shuffle(&mut levels);
    let jitter: Vec<f64> = levels
        .iter()
        .map(|l| l + rng.uniform(0.0, KINK_MARGIN / 2.0))
        .collect();
    Tensor::new(shape.to_vec(), jitter).expect("shape")
}

/// Scalarize a node through a fixed random weighting so every coordinate
/// influences the output.
fn weighted_sum(b: &mut GraphBuilder, rng: &mut Rng, node: NodeId) -> NodeId {
    let shape = b.peek_shape(node).to_vec();
    let w = b.constant(tensor_uniform(rng, &shape, 0.2, 1.0));
    let prod = b.mul(node, w).expect("same shape");
    b.sum(prod)
}

fn finish(b: GraphBuilder, out: NodeId) -> Graph {
    let mut b = b;
    b.output("y", out).expect("single output");
    b.finish().expect("probe graph")
}

/// A probe graph per catalog op. Panics only on programming errors; every
/// graph here is static.
pub fn catalog_probes() -> Vec<Probe> {
    let mut probes = Vec::new();
    let mut push = |name: &str, graph: Graph, bindings: Vec<(String, Tensor)>| {
        probes.push(Probe {
            name: name.into(),
            graph,
            bindings,
            output: "y".into(),
        });
    };

    // add / sub / mul, both same-shape and scalar-broadcast forms.
    for (name, which) in [("add", 0), ("sub", 1), ("mul", 2)] {
        let mut rng = Rng::new(101 + which as u64);
        let mut b = GraphBuilder::new();
        let p = b.input("p", &[5]).unwrap();
        let q = b.input("q", &[5]).unwrap();
        let s = b.input("s", &[1]).unwrap();
        let full = match which {
            0 => b.add(p, q).unwrap(),
            1 => b.sub(p, q).unwrap(),
            _ => b.mul(p, q).unwrap(),
        };
        let mixed = match which {
            0 => b.add(full, s).unwrap(),
            1 => b.sub(full, s).unwrap(),
            _ => b.mul(full, s).unwrap(),
        };
        let y = weighted_sum(&mut b, &mut rng, mixed);
        let g = finish(b, y);
        push(
            name,
            g,
            vec![
                ("p".into(), tensor_uniform(&mut rng, &[5], -2.0, 2.0)),
                ("q".into(), tensor_uniform(&mut rng, &[5], -2.0, 2.0)),
                ("s".into(), tensor_uniform(&mut rng, &[1], 0.5, 1.5)),
            ],
        );
    }

    // matmul: matrix-vector and matrix-matrix.
    {
        let mut rng = Rng::new(7);
        let mut b = GraphBuilder::new();
        let a = b.input("a", &[3, 4]).unwrap();
        let v = b.input("v", &[4]).unwrap();
        let m2 = b.input("m2", &[3, 2]).unwrap();
        let av = b.matmul(a, v).unwrap();
        let avr = b.reshape(av, &[1, 3]).unwrap();
        let prod = b.matmul(avr, m2).unwrap();
        let y = weighted_sum(&mut b, &mut rng, prod);
        let g = finish(b, y);
        push(
            "matmul",
            g,
            vec![
                ("a".into(), tensor_uniform(&mut rng, &[3, 4], -1.0, 1.0)),
                ("v".into(), tensor_uniform(&mut rng, &[4], -1.0, 1.0)),
                ("m2".into(), tensor_uniform(&mut rng, &[3, 2], -1.0, 1.0)),
            ],
        );
    }

    // Elementwise nonlinearities.
    {
        let mut rng = Rng::new(11);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[6]).unwrap();
        let r = b.relu(x);
        let y = weighted_sum(&mut b, &mut rng, r);
        let g = finish(b, y);
        push(
            "relu",
            g,
            vec![("x".into(), tensor_off_kink(&mut rng, &[6], 1.5))],
        );
    }
    for (name, seed) in [("sigmoid", 13u64), ("tanh", 17)] {
        let mut rng = Rng::new(seed);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[6]).unwrap();
        let a = if name == "sigmoid" {
            b.sigmoid(x)
        } else {
            b.tanh(x)
        };
        let y = weighted_sum(&mut b, &mut rng, a);
        let g = finish(b, y);
        push(
            name,
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[6], -2.0, 2.0))],
        );
    }
    {
        let mut rng = Rng::new(19);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[5]).unwrap();
        let l = b.log(x);
        let y = weighted_sum(&mut b, &mut rng, l);
        let g = finish(b, y);
        push(
            "log",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[5], 0.3, 3.0))],
        );
    }
    {
        let mut rng = Rng::new(23);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[5]).unwrap();
        let s = b.softmax(x).unwrap();
        let y = weighted_sum(&mut b, &mut rng, s);
        let g = finish(b, y);
        push(
            "softmax",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[5], -2.0, 2.0))],
        );
    }
    {
        let mut rng = Rng::new(29);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[4]).unwrap();
        let s = b.scale(x, -1.7);
        let y = weighted_sum(&mut b, &mut rng, s);
        let g = finish(b, y);
        push(
            "scale",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[4], -1.0, 1.0))],
        );
    }

    // Pooling.
    {
        let mut rng = Rng::new(31);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[8]).unwrap();
        let p = b.max_pool1d(x, 2).unwrap();
        let y = weighted_sum(&mut b, &mut rng, p);
        let g = finish(b, y);
        push(
            "max_pool1d",
            g,
            vec![("x".into(), tensor_tie_free(&mut rng, &[8]))],
        );
    }
    {
        let mut rng = Rng::new(37);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[8]).unwrap();
        let p = b.avg_pool1d(x, 4).unwrap();
        let y = weighted_sum(&mut b, &mut rng, p);
        let g = finish(b, y);
        push(
            "avg_pool1d",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[8], -1.0, 1.0))],
        );
    }
    {
        let mut rng = Rng::new(41);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[4, 4, 2]).unwrap();
        let p = b.max_pool2d(x, (2, 2)).unwrap();
        let y = weighted_sum(&mut b, &mut rng, p);
        let g = finish(b, y);
        push(
            "max_pool2d",
            g,
            vec![("x".into(), tensor_tie_free(&mut rng, &[4, 4, 2]))],
        );
    }
    {
        let mut rng = Rng::new(43);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[4, 4, 2]).unwrap();
        let p = b.avg_pool2d(x, (2, 2)).unwrap();
        let y = weighted_sum(&mut b, &mut rng, p);
        let g = finish(b, y);
        push(
            "avg_pool2d",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[4, 4, 2], -1.0, 1.0))],
        );
    }

    // Convolution with both the image and the kernel as inputs.
    {
        let mut rng = Rng::new(47);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[5, 5, 2]).unwrap();
        let k = b.input("k", &[3, 3, 2, 2]).unwrap();
        let c = b.conv2d(x, k).unwrap();
        let y = weighted_sum(&mut b, &mut rng, c);
        let g = finish(b, y);
        push(
            "conv2d",
            g,
            vec![
                ("x".into(), tensor_uniform(&mut rng, &[5, 5, 2], -1.0, 1.0)),
                (
                    "k".into(),
                    tensor_uniform(&mut rng, &[3, 3, 2, 2], -0.5, 0.5),
                ),
            ],
        );
    }

    // Structural ops.
    {
        let mut rng = Rng::new(53);
        let mut b = GraphBuilder::new();
        let p = b.input("p", &[2, 3]).unwrap();
        let q = b.input("q", &[1, 3]).unwrap();
        let c0 = b.concat(&[p, q], 0).unwrap();
        let c1 = b.concat(&[p, p], 1).unwrap();
        let y0 = weighted_sum(&mut b, &mut rng, c0);
        let y1 = weighted_sum(&mut b, &mut rng, c1);
        let y = b.add(y0, y1).unwrap();
        let g = finish(b, y);
        push(
            "concat",
            g,
            vec![
                ("p".into(), tensor_uniform(&mut rng, &[2, 3], -1.0, 1.0)),
                ("q".into(), tensor_uniform(&mut rng, &[1, 3], -1.0, 1.0)),
            ],
        );
    }
    {
        let mut rng = Rng::new(59);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[3, 4]).unwrap();
        let r = b.row(x, 1).unwrap();
        let y = weighted_sum(&mut b, &mut rng, r);
        let g = finish(b, y);
        push(
            "row",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[3, 4], -1.0, 1.0))],
        );
    }
    {
        let mut rng = Rng::new(61);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2, 6]).unwrap();
        let r = b.reshape(x, &[3, 4]).unwrap();
        let y = weighted_sum(&mut b, &mut rng, r);
        let g = finish(b, y);
        push(
            "reshape",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[2, 6], -1.0, 1.0))],
        );
    }
    {
        let mut rng = Rng::new(67);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[7]).unwrap();
        let y = b.sum(x);
        let g = finish(b, y);
        push(
            "sum",
            g,
            vec![("x".into(), tensor_uniform(&mut rng, &[7], -1.0, 1.0))],
        );
    }

    // Embedding lookup: gradient flows into the table; ids are fixed.
    {
        let mut rng = Rng::new(71);
        let mut b = GraphBuilder::new();
        let table = b.input("table", &[5, 3]).unwrap();
        let ids = b.constant(Tensor::from_slice(&[0.0, 2.0, 4.0, 2.0]));
        let e = b.embed(table, ids).unwrap();
        let y = weighted_sum(&mut b, &mut rng, e);
        let g = finish(b, y);
        push(
            "embed",
            g,
            vec![(
                "table".into(),
                tensor_uniform(&mut rng, &[5, 3], -1.0, 1.0),
            )],
        );
    }

    // LSTM cell composite: weights, state, and input all differentiated.
    {
        let mut rng = Rng::new(73);
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2]).unwrap();
        let h0 = b.input("h0", &[3]).unwrap();
        let c0 = b.input("c0", &[3]).unwrap();
        let mut wx = Vec::new();
        let mut wh = Vec::new();
        let mut bias = Vec::new();
        for gate in ["i", "f", "g", "o"] {
            wx.push(b.input(&format!("wx_{gate}"), &[3, 2]).unwrap());
            wh.push(b.input(&format!("wh_{gate}"), &[3, 3]).unwrap());
            bias.push(b.input(&format!("b_{gate}"), &[3]).unwrap());
        }
        let (h1, c1) = b
            .lstm_cell(
                x,
                h0,
                c0,
                [wx[0], wx[1], wx[2], wx[3]],
                [wh[0], wh[1], wh[2], wh[3]],
                [bias[0], bias[1], bias[2], bias[3]],
            )
            .unwrap();
        let yh = weighted_sum(&mut b, &mut rng, h1);
        let yc = weighted_sum(&mut b, &mut rng, c1);
        let y = b.add(yh, yc).unwrap();
        let g = finish(b, y);
        let mut bindings = vec![
            ("x".into(), tensor_uniform(&mut rng, &[2], -1.0, 1.0)),
            ("h0".into(), tensor_uniform(&mut rng, &[3], -0.5, 0.5)),
            ("c0".into(), tensor_uniform(&mut rng, &[3], -0.5, 0.5)),
        ];
        for gate in ["i", "f", "g", "o"] {
            bindings.push((
                format!("wx_{gate}"),
                tensor_uniform(&mut rng, &[3, 2], -0.7, 0.7),
            ));
            bindings.push((
                format!("wh_{gate}"),
                tensor_uniform(&mut rng, &[3, 3], -0.7, 0.7),
            ));
            bindings.push((
                format!("b_{gate}"),
                tensor_uniform(&mut rng, &[3], -0.3, 0.3),
            ));
        }
        push("lstm_cell", g, bindings);
    }

    probes
}

/// Three-layer compositions with random parameters: a smooth MLP through
/// its softmax class score, a ReLU MLP validated to sit clear of its kinks,
/// and a small convnet mixing conv, pooling, and softmax.
pub fn composition_probes() -> Vec<Probe> {
    let mut probes = Vec::new();

    {
        let net = models::build_mlp(&[4, 6, 3], Activation::Tanh, Head::Softmax, 301)
            .expect("static shapes");
        let mut rng = Rng::new(302);
        let x = tensor_uniform(&mut rng, &[4], -1.0, 1.0);
        probes.push(Probe {
            name: "mlp_tanh_softmax".into(),
            graph: net,
            bindings: vec![
                ("x".into(), x),
                ("target".into(), models::one_hot(1, 3)),
            ],
            output: "score".into(),
        });
    }

    {
        // ReLU composition: the seed below keeps every pre-activation at
        // least KINK_MARGIN from zero (asserted by the caller via
        // `relu_margins_ok`).
        let net = models::build_mlp(&[3, 5, 1], Activation::Relu, Head::Sigmoid, 303)
            .expect("static shapes");
        let mut rng = Rng::new(304);
        let x = tensor_uniform(&mut rng, &[3], 0.3, 1.2);
        probes.push(Probe {
            name: "mlp_relu_sigmoid".into(),
            graph: net,
            bindings: vec![("x".into(), x)],
            output: "out".into(),
        });
    }

    {
        let plan = [
            models::ConvStep::Conv { kernel: 3, channels: 2 },
            models::ConvStep::Relu,
            models::ConvStep::AvgPool { window: 2 },
            models::ConvStep::Flatten,
            models::ConvStep::Dense { units: 2 },
            models::ConvStep::Softmax,
        ];
        let net = models::build_convnet([6, 6, 1], &plan, 305).expect("static shapes");
        let mut rng = Rng::new(306);
        let x = tensor_uniform(&mut rng, &[6, 6, 1], 0.1, 1.0);
        probes.push(Probe {
            name: "convnet_softmax".into(),
            graph: net,
            bindings: vec![
                ("x".into(), x),
                ("target".into(), models::one_hot(0, 2)),
            ],
            output: "score".into(),
        });
    }

    probes
}

/// Whether every ReLU pre-activation in the probe sits at least the kink
/// margin away from zero.
pub fn relu_margins_ok(probe: &Probe) -> Result<bool> {
    use crate::graph::Op;
    let borrowed: Vec<(&str, &Tensor)> = probe
        .bindings
        .iter()
        .map(|(n, t)| (n.as_str(), t))
        .collect();
    let out_id = probe.graph.output_node(&probe.output)?;
    let acts = probe.graph.eval_targets(
        &borrowed.iter().map(|(n, t)| (*n, *t)).collect(),
        &[out_id],
    )?;
    for idx in 0..probe.graph.num_nodes() {
        if let Op::Relu { input } = &probe.graph.node(NodeId(idx)).op {
            if let Some(z) = &acts[input.index()] {
                if z.data().iter().any(|v| v.abs() < KINK_MARGIN) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Run every probe; h is the central-difference step.
pub fn run_probes(probes: &[Probe], h: f64) -> Result<Vec<ProbeResult>> {
    probes
        .iter()
        .map(|p| {
            Ok(ProbeResult {
                name: p.name.clone(),
                max_rel_err: max_relative_error(&p.graph, &p.output, &p.bindings, h)?,
            })
        })
        .collect()
}

/// Catalog entries that have a dedicated probe (leaves need none).
pub fn probe_coverage() -> (Vec<&'static str>, Vec<String>) {
    let catalog: Vec<&'static str> = op_catalog().iter().map(|o| o.name).collect();
    let probed: Vec<String> = catalog_probes().into_iter().map(|p| p.name).collect();
    (catalog, probed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_catalog_op_has_a_probe() {
        let (catalog, probed) = probe_coverage();
        for name in catalog {
            assert!(
                probed.iter().any(|p| p == name),
                "catalog op '{name}' lacks a gradient probe"
            );
        }
    }

    #[test]
    fn relu_composition_sits_clear_of_kinks() {
        let probes = composition_probes();
        let relu = probes
            .iter()
            .find(|p| p.name == "mlp_relu_sigmoid")
            .unwrap();
        assert!(relu_margins_ok(relu).unwrap());
    }
}
