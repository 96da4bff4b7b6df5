//! Forward evaluation and reverse-mode differentiation.
//!
//! `backward` runs one forward pass, seeds the scalar output with 1, and
//! sweeps the graph in reverse topological order applying each op's
//! vector-Jacobian product. Gradients are accumulated for every input and
//! every parameter; an input the output does not depend on gets an all-zero
//! gradient rather than an error.
//!
//! Both passes are pure: identical arguments give bit-identical results.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{self, Graph, NodeId, Op, PoolKind};
use crate::tensor::Tensor;

/// Input bindings as (name, tensor) pairs.
pub type Bindings<'a> = [(&'a str, &'a Tensor)];

pub(crate) fn bind_map<'a>(bindings: &'a Bindings<'a>) -> BTreeMap<&'a str, &'a Tensor> {
    bindings.iter().map(|(n, t)| (*n, *t)).collect()
}

/// Evaluate the graph on the given inputs; returns every declared output.
/// All declared outputs are computed, so every input they depend on must
/// be bound.
pub fn forward(graph: &Graph, inputs: &Bindings) -> Result<BTreeMap<String, Tensor>> {
    let targets: Vec<_> = graph.outputs().iter().map(|(_, id)| *id).collect();
    let acts = graph.eval_targets(&bind_map(inputs), &targets)?;
    Ok(graph
        .outputs()
        .iter()
        .map(|(name, id)| {
            (
                name.clone(),
                acts[id.index()].clone().expect("target evaluated"),
            )
        })
        .collect())
}

/// Evaluate one named output; only the inputs it depends on are required.
pub fn forward_output(graph: &Graph, output: &str, inputs: &Bindings) -> Result<Tensor> {
    let id = graph.output_node(output)?;
    let acts = graph.eval_targets(&bind_map(inputs), &[id])?;
    Ok(acts[id.index()].clone().expect("target evaluated"))
}

/// Gradients of one scalar output with respect to every input and parameter.
#[derive(Clone, Debug)]
pub struct Gradients {
    /// d(output)/d(input), keyed by input name; same shape as the input.
    pub inputs: BTreeMap<String, Tensor>,
    /// d(output)/d(parameter), keyed by parameter name.
    pub params: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn input(&self, name: &str) -> &Tensor {
        &self.inputs[name]
    }

    pub fn param(&self, name: &str) -> &Tensor {
        &self.params[name]
    }
}

/// How the backward pass treats ReLU nodes. `Gradient` is the true
/// vector-Jacobian product; the other two deliberately break it and exist
/// for the DeConvNet and guided-backprop attribution rules.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReluBackward {
    /// Pass the signal where the forward input was > 0.
    Gradient,
    /// Apply ReLU to the incoming backward signal, ignoring the forward mask.
    Deconvnet,
    /// Pass only where the forward input was > 0 and the signal is > 0.
    Guided,
}

/// Reverse-mode gradients of a scalar output w.r.t. all inputs and params.
pub fn backward(graph: &Graph, output: &str, inputs: &Bindings) -> Result<Gradients> {
    let (grads, _) = backward_with_rule(graph, output, inputs, ReluBackward::Gradient)?;
    Ok(grads)
}

/// Backward pass with a configurable ReLU rule; also returns the forward
/// activations so callers can inspect them.
pub(crate) fn backward_with_rule(
    graph: &Graph,
    output: &str,
    inputs: &Bindings,
    relu_rule: ReluBackward,
) -> Result<(Gradients, Vec<Option<Tensor>>)> {
    let out_id = graph.output_node(output)?;
    if graph.node_shape(out_id).iter().product::<usize>() != 1 {
        return Err(Error::NonScalarOutput(output.into()));
    }
    let acts = graph.eval_targets(&bind_map(inputs), &[out_id])?;

    // Adjoint per node, zero-initialized; reverse sweep accumulates. Only
    // ancestors of the output can pick up a nonzero adjoint, and exactly
    // those nodes have evaluated activations.
    let mut adj: Vec<Tensor> = (0..graph.num_nodes())
        .map(|i| Tensor::zeros(graph.node_shape(NodeId(i))))
        .collect();
    {
        let seed = adj[out_id.index()].data_mut();
        seed[0] = 1.0;
    }

    for idx in (0..graph.num_nodes()).rev() {
        let node_adj = adj[idx].clone();
        if node_adj.data().iter().all(|&g| g == 0.0) {
            continue;
        }
        let op = graph.node(NodeId(idx)).op.clone();
        apply_vjp(&op, &node_adj, &acts, &mut adj, relu_rule);
    }

    let mut input_grads = BTreeMap::new();
    let mut param_grads = BTreeMap::new();
    for (idx, node_adj) in adj.iter().enumerate() {
        match &graph.node(NodeId(idx)).op {
            Op::Input { name } => {
                input_grads.insert(name.clone(), node_adj.clone());
            }
            Op::Param { name } => {
                param_grads.insert(name.clone(), node_adj.clone());
            }
            _ => {}
        }
    }
    Ok((
        Gradients {
            inputs: input_grads,
            params: param_grads,
        },
        acts,
    ))
}

/// Scatter `g` (the adjoint of an op's output) into the adjoints of the
/// op's operands.
fn apply_vjp(
    op: &Op,
    g: &Tensor,
    acts: &[Option<Tensor>],
    adj: &mut [Tensor],
    relu_rule: ReluBackward,
) {
    let val = |id: NodeId| acts[id.index()].as_ref().expect("ancestor activation");
    match op {
        Op::Input { .. } | Op::Param { .. } | Op::Const { .. } => {}
        Op::Add { lhs, rhs } => {
            accumulate_broadcast(adj, *lhs, g, 1.0);
            accumulate_broadcast(adj, *rhs, g, 1.0);
        }
        Op::Sub { lhs, rhs } => {
            accumulate_broadcast(adj, *lhs, g, 1.0);
            accumulate_broadcast(adj, *rhs, g, -1.0);
        }
        Op::Mul { lhs, rhs } => {
            let (a, b) = (val(*lhs), val(*rhs));
            let to_lhs = scaled_by_operand(g, b);
            let to_rhs = scaled_by_operand(g, a);
            accumulate_broadcast(adj, *lhs, &to_lhs, 1.0);
            accumulate_broadcast(adj, *rhs, &to_rhs, 1.0);
        }
        Op::MatMul { lhs, rhs } => {
            let (a, b) = (val(*lhs), val(*rhs));
            let (da, db) = matmul_vjp(a, b, g);
            adj[lhs.index()].accumulate(&da);
            adj[rhs.index()].accumulate(&db);
        }
        Op::Relu { input } => {
            let x = val(*input);
            let passed = match relu_rule {
                ReluBackward::Gradient => {
                    x.zip_map(g, |xi, gi| if xi > 0.0 { gi } else { 0.0 })
                }
                ReluBackward::Deconvnet => g.map(|gi| if gi > 0.0 { gi } else { 0.0 }),
                ReluBackward::Guided => x.zip_map(g, |xi, gi| {
                    if xi > 0.0 && gi > 0.0 {
                        gi
                    } else {
                        0.0
                    }
                }),
            };
            adj[input.index()].accumulate(&passed);
        }
        Op::Sigmoid { input } => {
            let x = val(*input);
            let d = x.zip_map(g, |xi, gi| {
                let s = graph::sigmoid(xi);
                gi * s * (1.0 - s)
            });
            adj[input.index()].accumulate(&d);
        }
        Op::Tanh { input } => {
            let x = val(*input);
            let d = x.zip_map(g, |xi, gi| {
                let t = xi.tanh();
                gi * (1.0 - t * t)
            });
            adj[input.index()].accumulate(&d);
        }
        Op::Log { input } => {
            let x = val(*input);
            let d = x.zip_map(g, |xi, gi| gi / xi);
            adj[input.index()].accumulate(&d);
        }
        Op::Softmax { input } => {
            let y = graph::softmax(val(*input));
            let dot: f64 = y
                .data()
                .iter()
                .zip(g.data())
                .map(|(yi, gi)| yi * gi)
                .sum();
            let d = y.zip_map(g, |yi, gi| yi * (gi - dot));
            adj[input.index()].accumulate(&d);
        }
        Op::Scale { input, factor } => {
            adj[input.index()].accumulate(&g.scale(*factor));
        }
        Op::MaxPool1d { input, window } => {
            let (_, arg) = graph::pool1d(val(*input), *window, PoolKind::Max);
            let mut d = Tensor::zeros(val(*input).shape());
            for (o, &src) in arg.iter().enumerate() {
                d.data_mut()[src] += g.data()[o];
            }
            adj[input.index()].accumulate(&d);
        }
        Op::AvgPool1d { input, window } => {
            let w = *window as f64;
            let mut d = Tensor::zeros(val(*input).shape());
            for (o, &go) in g.data().iter().enumerate() {
                for j in 0..*window {
                    d.data_mut()[o * window + j] += go / w;
                }
            }
            adj[input.index()].accumulate(&d);
        }
        Op::MaxPool2d { input, window } => {
            let (_, arg) = graph::pool2d(val(*input), *window, PoolKind::Max);
            let mut d = Tensor::zeros(val(*input).shape());
            for (o, &src) in arg.iter().enumerate() {
                d.data_mut()[src] += g.data()[o];
            }
            adj[input.index()].accumulate(&d);
        }
        Op::AvgPool2d { input, window } => {
            let x = val(*input);
            let (h_in, w_in, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let (ph, pw) = *window;
            let ow = w_in / pw;
            let denom = (ph * pw) as f64;
            let mut d = Tensor::zeros(x.shape());
            for (o, &go) in g.data().iter().enumerate() {
                let ch = o % c;
                let oj = (o / c) % ow;
                let oi = o / (c * ow);
                for di in 0..ph {
                    for dj in 0..pw {
                        let idx = ((oi * ph + di) * w_in + (oj * pw + dj)) * c + ch;
                        d.data_mut()[idx] += go / denom;
                    }
                }
            }
            let _ = h_in;
            adj[input.index()].accumulate(&d);
        }
        Op::Conv2d { input, kernel } => {
            let x = val(*input);
            let k = val(*kernel);
            let (dx, dk) = conv2d_vjp(x, k, g);
            adj[input.index()].accumulate(&dx);
            adj[kernel.index()].accumulate(&dk);
        }
        Op::Concat { inputs, axis } => {
            let shapes: Vec<&[usize]> = inputs.iter().map(|id| val(*id).shape()).collect();
            let parts = concat_vjp(g, &shapes, *axis);
            for (id, part) in inputs.iter().zip(parts) {
                adj[id.index()].accumulate(&part);
            }
        }
        Op::Row { input, index } => {
            let cols = val(*input).shape()[1];
            let mut d = Tensor::zeros(val(*input).shape());
            d.data_mut()[index * cols..(index + 1) * cols].copy_from_slice(g.data());
            adj[input.index()].accumulate(&d);
        }
        Op::Reshape { input, .. } => {
            let d = Tensor::new(val(*input).shape().to_vec(), g.data().to_vec())
                .expect("reshape vjp");
            adj[input.index()].accumulate(&d);
        }
        Op::Sum { input } => {
            let d = Tensor::filled(val(*input).shape(), g.item());
            adj[input.index()].accumulate(&d);
        }
        Op::Embed { table, ids } => {
            let idxs = graph::embed_ids(val(*ids));
            let d_cols = val(*table).shape()[1];
            let mut d = Tensor::zeros(val(*table).shape());
            for (r, &row_idx) in idxs.iter().enumerate() {
                for c in 0..d_cols {
                    d.data_mut()[row_idx * d_cols + c] += g.data()[r * d_cols + c];
                }
            }
            adj[table.index()].accumulate(&d);
            // ids carry no gradient (indices are not differentiable).
        }
    }
}

/// Multiply adjoint `g` elementwise by operand `other`, honoring the
/// scalar-tensor broadcast cases of Mul.
fn scaled_by_operand(g: &Tensor, other: &Tensor) -> Tensor {
    if g.shape() == other.shape() {
        g.mul_elem(other)
    } else if other.is_scalar() {
        g.scale(other.item())
    } else {
        // g is the broadcast output and other full-size cannot happen: the
        // output shape equals the larger operand.
        unreachable!("mul vjp shape combination")
    }
}

/// Accumulate `g * sign` into the adjoint of operand `id`, reducing over the
/// broadcast if the operand is scalar.
fn accumulate_broadcast(adj: &mut [Tensor], id: NodeId, g: &Tensor, sign: f64) {
    let target_shape = adj[id.index()].shape().to_vec();
    if target_shape == g.shape() {
        if sign == 1.0 {
            adj[id.index()].accumulate(g);
        } else {
            adj[id.index()].accumulate(&g.scale(sign));
        }
    } else {
        // Operand was a broadcast scalar: its adjoint is the summed signal.
        let total: f64 = g.data().iter().sum::<f64>() * sign;
        let mut t = Tensor::zeros(&target_shape);
        t.data_mut()[0] = total;
        adj[id.index()].accumulate(&t);
    }
}

pub(crate) fn matmul_vjp(a: &Tensor, b: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    if b.rank() == 1 {
        // y = A v: dA = g ⊗ v, dv = Aᵀ g
        let mut da = vec![0.0; m * k];
        let mut dv = vec![0.0; k];
        for i in 0..m {
            let gi = g.data()[i];
            for p in 0..k {
                da[i * k + p] += gi * b.data()[p];
                dv[p] += a.data()[i * k + p] * gi;
            }
        }
        (
            Tensor::new(vec![m, k], da).unwrap(),
            Tensor::from_vec(dv),
        )
    } else {
        let n = b.shape()[1];
        let mut da = vec![0.0; m * k];
        let mut db = vec![0.0; k * n];
        for i in 0..m {
            for j in 0..n {
                let gij = g.data()[i * n + j];
                for p in 0..k {
                    da[i * k + p] += gij * b.data()[p * n + j];
                    db[p * n + j] += a.data()[i * k + p] * gij;
                }
            }
        }
        (
            Tensor::new(vec![m, k], da).unwrap(),
            Tensor::new(vec![k, n], db).unwrap(),
        )
    }
}

pub(crate) fn conv2d_vjp(x: &Tensor, k: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let (_, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kh, kw, _, cout) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
    let (oh, ow) = (g.shape()[0], g.shape()[1]);
    let mut dx = Tensor::zeros(x.shape());
    let mut dk = Tensor::zeros(k.shape());
    for oi in 0..oh {
        for oj in 0..ow {
            for o in 0..cout {
                let go = g.data()[(oi * ow + oj) * cout + o];
                if go == 0.0 {
                    continue;
                }
                for di in 0..kh {
                    for dj in 0..kw {
                        for ci in 0..c {
                            let xi = ((oi + di) * w + (oj + dj)) * c + ci;
                            let ki = ((di * kw + dj) * c + ci) * cout + o;
                            dx.data_mut()[xi] += go * k.data()[ki];
                            dk.data_mut()[ki] += go * x.data()[xi];
                        }
                    }
                }
            }
        }
    }
    (dx, dk)
}

/// Split a concat output adjoint back into per-part adjoints.
pub(crate) fn concat_vjp(g: &Tensor, shapes: &[&[usize]], axis: usize) -> Vec<Tensor> {
    let rank = shapes[0].len();
    let outer: usize = shapes[0][..axis].iter().product();
    let inner: usize = shapes[0][axis + 1..rank].iter().product();
    let mut parts: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
    let mut cursor = 0usize;
    for oi in 0..outer {
        for (p, shape) in shapes.iter().enumerate() {
            let pa = shape[axis];
            let len = pa * inner;
            let dst_start = oi * len;
            parts[p].data_mut()[dst_start..dst_start + len]
                .copy_from_slice(&g.data()[cursor..cursor + len]);
            cursor += len;
        }
    }
    parts
}

/// Central-difference gradient estimate, one coordinate at a time:
/// `(F(x + h·eᵢ) − F(x − h·eᵢ)) / 2h`. A test oracle for `backward`.
pub fn finite_difference_gradient(
    graph: &Graph,
    output: &str,
    inputs: &Bindings,
    h: f64,
) -> Result<BTreeMap<String, Tensor>> {
    if h <= 0.0 {
        return Err(Error::InvalidArg("finite difference step must be > 0".into()));
    }
    let out_id = graph.output_node(output)?;
    if graph.node_shape(out_id).iter().product::<usize>() != 1 {
        return Err(Error::NonScalarOutput(output.into()));
    }

    let depends_on = graph.ancestor_inputs(out_id);
    let mut result = BTreeMap::new();
    for (name, shape) in graph.inputs() {
        let bound = inputs.iter().find(|(n, _)| n == name).map(|(_, t)| *t);
        if !depends_on.contains(name) {
            // The output does not read this input; its derivative is zero.
            result.insert(name.clone(), Tensor::zeros(shape));
            continue;
        }
        let base = bound
            .cloned()
            .ok_or_else(|| Error::UnknownInput(format!("input '{name}' not bound")))?;
        let mut grad = Tensor::zeros(base.shape());
        for i in 0..base.numel() {
            let mut plus = base.clone();
            plus.data_mut()[i] += h;
            let mut minus = base.clone();
            minus.data_mut()[i] -= h;
            let f_plus = eval_with_replaced(graph, output, inputs, name, &plus)?;
            let f_minus = eval_with_replaced(graph, output, inputs, name, &minus)?;
            grad.data_mut()[i] = (f_plus - f_minus) / (2.0 * h);
        }
        result.insert(name.clone(), grad);
    }
    Ok(result)
}

fn eval_with_replaced(
    graph: &Graph,
    output: &str,
    inputs: &Bindings,
    name: &str,
    replacement: &Tensor,
) -> Result<f64> {
    let rebound: Vec<(&str, &Tensor)> = inputs
        .iter()
        .map(|(n, t)| if *n == name { (*n, replacement) } else { (*n, *t) })
        .collect();
    Ok(forward_output(graph, output, &rebound)?.item())
}

/// Description of one primitive op in the catalog.
#[derive(Clone, Copy, Debug)]
pub struct OpInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// The vector-Jacobian product the backward pass applies.
    pub gradient: &'static str,
}

/// The fixed primitive-op catalog. Every entry has a forward rule and a
/// derivative contract, and the gradient test suite drives each one against
/// finite differences.
pub fn op_catalog() -> Vec<OpInfo> {
    vec![
        OpInfo { name: "add", summary: "elementwise addition (scalar broadcast allowed)", gradient: "passes the signal to both operands; scalar side receives the sum" },
        OpInfo { name: "sub", summary: "elementwise subtraction (scalar broadcast allowed)", gradient: "signal to lhs, negated signal to rhs" },
        OpInfo { name: "mul", summary: "elementwise product (scalar broadcast allowed)", gradient: "signal times the other operand" },
        OpInfo { name: "matmul", summary: "matrix product [m,k]x[k,n] or matrix-vector [m,k]x[k]", gradient: "dA = g Bᵀ, dB = Aᵀ g" },
        OpInfo { name: "relu", summary: "max(x, 0)", gradient: "passes where x > 0; the subderivative at exactly 0 is 0" },
        OpInfo { name: "sigmoid", summary: "logistic function", gradient: "g · σ(x)(1 − σ(x))" },
        OpInfo { name: "tanh", summary: "hyperbolic tangent", gradient: "g · (1 − tanh²x)" },
        OpInfo { name: "log", summary: "natural log, domain x > 0", gradient: "g / x" },
        OpInfo { name: "softmax", summary: "softmax over a rank-1 tensor", gradient: "y ⊙ (g − ⟨g, y⟩)" },
        OpInfo { name: "scale", summary: "multiply by a fixed scalar", gradient: "g · c" },
        OpInfo { name: "max_pool1d", summary: "non-overlapping 1D max pooling", gradient: "routes g to the argmax (lowest flat index on ties)" },
        OpInfo { name: "avg_pool1d", summary: "non-overlapping 1D average pooling", gradient: "spreads g/window over the window" },
        OpInfo { name: "max_pool2d", summary: "non-overlapping 2D max pooling over [H,W,C]", gradient: "routes g to the argmax (lowest flat index on ties)" },
        OpInfo { name: "avg_pool2d", summary: "non-overlapping 2D average pooling over [H,W,C]", gradient: "spreads g uniformly over the window" },
        OpInfo { name: "conv2d", summary: "valid stride-1 2D convolution, channels last", gradient: "correlation of g with kernel / input respectively" },
        OpInfo { name: "concat", summary: "concatenate along an axis", gradient: "splits g back to the parts" },
        OpInfo { name: "row", summary: "select one row of a rank-2 tensor", gradient: "scatters g into that row" },
        OpInfo { name: "reshape", summary: "reinterpret data with a new shape", gradient: "reshapes g back" },
        OpInfo { name: "sum", summary: "sum all elements to a scalar", gradient: "broadcasts g" },
        OpInfo { name: "embed", summary: "row lookup: table [V,D] by integer ids [L]", gradient: "accumulates g into the looked-up table rows; ids get none" },
        OpInfo { name: "lstm_cell", summary: "one LSTM step, a composite of primitives", gradient: "composed from the primitives above" },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn square_net() -> Graph {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[1]).unwrap();
        let y = b.mul(x, x).unwrap();
        b.output("y", y).unwrap();
        b.finish().unwrap()
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[1]).unwrap();
        let y = b.sigmoid(x);
        b.output("y", y).unwrap();
        let g = b.finish().unwrap();
        let out = forward_output(&g, "y", &[("x", &Tensor::scalar(0.0))]).unwrap();
        assert_eq!(out.item(), 0.5);
    }

    #[test]
    fn identity_graph_returns_input() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2, 2]).unwrap();
        b.output("y", x).unwrap();
        let g = b.finish().unwrap();
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = forward_output(&g, "y", &[("x", &t)]).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn relu_mlp_forward_matches_hand_evaluation() {
        // Two-layer ReLU MLP with hand-set weights, checked against the
        // same arithmetic done by hand:
        //   h = relu(W1 x + b1), y = W2 h + b2
        //   x = (1, -2):
        //   z1 = (1*1 + 2*(-2) + 0.5, -1*1 + 1*(-2) + 4) = (-2.5, 1)
        //   h  = (0, 1)
        //   y  = 3*0 + (-2)*1 + 0.25 = -1.75
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2]).unwrap();
        let w1 = b
            .param(
                "w1",
                Tensor::new(vec![2, 2], vec![1.0, 2.0, -1.0, 1.0]).unwrap(),
            )
            .unwrap();
        let b1 = b.param("b1", Tensor::from_slice(&[0.5, 4.0])).unwrap();
        let w2 = b
            .param("w2", Tensor::new(vec![1, 2], vec![3.0, -2.0]).unwrap())
            .unwrap();
        let b2 = b.param("b2", Tensor::from_slice(&[0.25])).unwrap();
        let z1 = b.matmul(w1, x).unwrap();
        let z1 = b.add(z1, b1).unwrap();
        let h = b.relu(z1);
        let z2 = b.matmul(w2, h).unwrap();
        let y = b.add(z2, b2).unwrap();
        b.output("y", y).unwrap();
        let g = b.finish().unwrap();
        let out = forward_output(&g, "y", &[("x", &Tensor::from_slice(&[1.0, -2.0]))]).unwrap();
        assert_eq!(out.item(), -1.75);
    }

    #[test]
    fn gradient_of_square_at_three_is_six() {
        let g = square_net();
        let grads = backward(&g, "y", &[("x", &Tensor::scalar(3.0))]).unwrap();
        assert_eq!(grads.input("x").item(), 6.0);
    }

    #[test]
    fn gradient_of_linear_is_weights_everywhere() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2]).unwrap();
        let w = b
            .param("w", Tensor::new(vec![1, 2], vec![2.0, 3.0]).unwrap())
            .unwrap();
        let y = b.matmul(w, x).unwrap();
        b.output("y", y).unwrap();
        let g = b.finish().unwrap();
        for point in [[0.0, 0.0], [1.0, 1.0], [-4.5, 2.25]] {
            let t = Tensor::from_slice(&point);
            let grads = backward(&g, "y", &[("x", &t)]).unwrap();
            assert_eq!(grads.input("x").data(), &[2.0, 3.0]);
        }
    }

    #[test]
    fn finite_difference_matches_square() {
        let g = square_net();
        let fd =
            finite_difference_gradient(&g, "y", &[("x", &Tensor::scalar(3.0))], 1e-5).unwrap();
        assert!((fd["x"].item() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn finite_difference_of_constant_is_zero() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[3]).unwrap();
        let c = b.constant(Tensor::scalar(7.0));
        let _ = x;
        b.output("y", c).unwrap();
        let g = b.finish().unwrap();
        let t = Tensor::from_slice(&[1.0, 2.0, 3.0]);
        let fd = finite_difference_gradient(&g, "y", &[("x", &t)], 1e-5).unwrap();
        assert_eq!(fd["x"].data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn disconnected_input_gets_zero_gradient() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2]).unwrap();
        let z = b.input("z", &[3]).unwrap();
        let _ = z;
        let s = b.sum(x);
        b.output("y", s).unwrap();
        let g = b.finish().unwrap();
        let tx = Tensor::from_slice(&[1.0, 2.0]);
        let tz = Tensor::from_slice(&[5.0, 6.0, 7.0]);
        let grads = backward(&g, "y", &[("x", &tx), ("z", &tz)]).unwrap();
        assert_eq!(grads.input("z").data(), &[0.0, 0.0, 0.0]);
        assert_eq!(grads.input("x").data(), &[1.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_output() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2]).unwrap();
        b.output("y", x).unwrap();
        let g = b.finish().unwrap();
        let t = Tensor::from_slice(&[1.0, 2.0]);
        assert!(matches!(
            backward(&g, "y", &[("x", &t)]),
            Err(Error::NonScalarOutput(_))
        ));
    }

    #[test]
    fn relu_derivative_fixed_to_zero_at_kink() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[1]).unwrap();
        let r = b.relu(x);
        b.output("y", r).unwrap();
        let g = b.finish().unwrap();
        for (v, expect) in [(-2.0, 0.0), (0.0, 0.0), (2.0, 1.0)] {
            let grads = backward(&g, "y", &[("x", &Tensor::scalar(v))]).unwrap();
            assert_eq!(grads.input("x").item(), expect);
        }
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let g = square_net();
        let t = Tensor::scalar(1.234_567_891);
        let a = backward(&g, "y", &[("x", &t)]).unwrap();
        let b2 = backward(&g, "y", &[("x", &t)]).unwrap();
        assert_eq!(a.input("x").data(), b2.input("x").data());
        let fa = forward(&g, &[("x", &t)]).unwrap();
        let fb = forward(&g, &[("x", &t)]).unwrap();
        assert_eq!(fa["y"].data(), fb["y"].data());
    }

    #[test]
    fn catalog_covers_required_ops() {
        let names: Vec<&str> = op_catalog().iter().map(|o| o.name).collect();
        for required in [
            "add", "sub", "mul", "matmul", "relu", "sigmoid", "tanh", "softmax",
            "max_pool1d", "max_pool2d", "avg_pool1d", "avg_pool2d", "conv2d", "concat",
            "scale", "embed", "lstm_cell",
        ] {
            assert!(names.contains(&required), "missing op {required}");
        }
    }
}
