//! The rival score-backpropagation attribution methods: DeepLift (rescale
//! rule), layer-wise relevance propagation (ε rule), DeConvNet, and guided
//! backpropagation.
//!
//! These exist as comparison points. Each backpropagates the prediction
//! through the graph with its own per-op rule, which is exactly why none of
//! them is invariant across functionally equivalent networks, the property
//! the equivalent-pair experiment demonstrates.
//!
//! Supported rules cover the primitive-op catalog as follows: linear ops
//! use the linear chain rule (relevance/multiplier weighted by
//! contributions), elementwise nonlinearities use each method's
//! nonlinearity rule, max pooling redistributes winner-take-all, average
//! pooling proportionally. Elementwise products split symmetrically
//! (DeepLift: averaged counterpart activations, which conserves deltas;
//! LRP: an even split). Softmax under DeepLift uses the elementwise
//! diagonal as a documented approximation; attribute pre-softmax scores
//! when exact conservation matters.

use crate::attribution::{AttributionResult, MethodTag, ScalarFn};
use crate::autodiff::{backward_with_rule, concat_vjp, conv2d_vjp, matmul_vjp, ReluBackward};
use crate::error::{Error, Result};
use crate::graph::{self, Graph, NodeId, Op, PoolKind};
use crate::tensor::Tensor;

/// Default ε stabilizer for LRP.
pub const DEFAULT_LRP_EPSILON: f64 = 1e-2;

/// Pre-activation deltas smaller than this fall back to the local gradient
/// in the rescale rule.
const DELTA_TOL: f64 = 1e-9;

/// Method selector plus its parameters.
#[derive(Clone, Debug)]
pub enum BackpropRule {
    /// Rescale rule against a reference input (same shape as the input).
    DeepliftRescale { reference: Tensor },
    /// ε-stabilized relevance propagation; ε > 0.
    LrpEpsilon { epsilon: f64 },
    Deconvnet,
    GuidedBackprop,
}

/// DeConvNet signal: a backward pass where every ReLU applies ReLU to the
/// incoming backward signal and ignores the forward mask. Networks without
/// ReLUs reproduce the plain gradient exactly.
pub fn deconvnet(f: &ScalarFn, input: &Tensor) -> Result<Tensor> {
    let bindings = f.bindings(input);
    let (grads, _) = backward_with_rule(
        f.network(),
        f.output_name(),
        &bindings,
        ReluBackward::Deconvnet,
    )?;
    Ok(grads.inputs[f.wrt()].clone())
}

/// Guided backpropagation signal: ReLU passes only where both the forward
/// input and the backward signal are positive.
pub fn guided_backprop(f: &ScalarFn, input: &Tensor) -> Result<Tensor> {
    let bindings = f.bindings(input);
    let (grads, _) = backward_with_rule(
        f.network(),
        f.output_name(),
        &bindings,
        ReluBackward::Guided,
    )?;
    Ok(grads.inputs[f.wrt()].clone())
}

/// DeepLift with the rescale rule.
///
/// Every nonlinearity propagates with the multiplier Δoutput/Δpre-activation
/// measured between the reference run and the input run; linear pieces use
/// the chain rule on deltas. Attributions are multiplier × (input −
/// reference) and sum to F(input) − F(reference) on nets whose deltas are
/// well defined. A zero pre-activation delta is not an error: the rule
/// passes the local gradient through instead.
pub fn deeplift_rescale(
    f: &ScalarFn,
    input: &Tensor,
    reference: &Tensor,
) -> Result<AttributionResult> {
    if input.shape() != reference.shape() {
        return Err(Error::ShapeMismatch {
            context: "deeplift reference".into(),
            expected: input.shape().to_vec(),
            got: reference.shape().to_vec(),
        });
    }
    let net = f.network();
    let out_id = net.output_node(f.output_name())?;
    let in_id = net.input_node(f.wrt())?;

    let bind_x = f.bindings(input);
    let bind_r = f.bindings(reference);
    let acts_x = net.eval_targets(&bind_x.iter().map(|(n, t)| (*n, *t)).collect(), &[out_id])?;
    let acts_r = net.eval_targets(&bind_r.iter().map(|(n, t)| (*n, *t)).collect(), &[out_id])?;

    let multipliers = deeplift_sweep(net, out_id, &acts_x, &acts_r);
    let values = multipliers[in_id.index()].mul_elem(&input.sub(reference));
    let f_x = acts_x[out_id.index()].as_ref().expect("output evaluated").item();
    let f_r = acts_r[out_id.index()].as_ref().expect("output evaluated").item();
    let gap = (values.sum() - (f_x - f_r)).abs();
    Ok(AttributionResult {
        values,
        method: MethodTag::DeepliftRescale,
        steps: 1,
        completeness_gap: gap,
    })
}

/// Rescale factor Δy/Δz with local-gradient fallback on tiny deltas.
fn rescale_factor(y_x: f64, y_r: f64, z_x: f64, z_r: f64, local: impl Fn(f64) -> f64) -> f64 {
    let dz = z_x - z_r;
    if dz.abs() > DELTA_TOL {
        (y_x - y_r) / dz
    } else {
        local(z_x)
    }
}

fn deeplift_sweep(
    net: &Graph,
    out_id: NodeId,
    acts_x: &[Option<Tensor>],
    acts_r: &[Option<Tensor>],
) -> Vec<Tensor> {
    let mut mult: Vec<Tensor> = (0..net.num_nodes())
        .map(|i| Tensor::zeros(net.node_shape(NodeId(i))))
        .collect();
    mult[out_id.index()].data_mut()[0] = 1.0;

    for idx in (0..net.num_nodes()).rev() {
        let m = mult[idx].clone();
        if m.data().iter().all(|&v| v == 0.0) {
            continue;
        }
        let op = net.node(NodeId(idx)).op.clone();
        let vx = |id: NodeId| acts_x[id.index()].as_ref().expect("ancestor activation");
        let vr = |id: NodeId| acts_r[id.index()].as_ref().expect("ancestor activation");
        match &op {
            Op::Input { .. } | Op::Param { .. } | Op::Const { .. } => {}
            Op::Add { lhs, rhs } => {
                spread(&mut mult, *lhs, &m, 1.0);
                spread(&mut mult, *rhs, &m, 1.0);
            }
            Op::Sub { lhs, rhs } => {
                spread(&mut mult, *lhs, &m, 1.0);
                spread(&mut mult, *rhs, &m, -1.0);
            }
            Op::Mul { lhs, rhs } => {
                // Symmetric Leibniz split on deltas: exact conservation for
                // bilinear pieces.
                let avg_r = vx(*rhs).add(vr(*rhs)).scale(0.5);
                let avg_l = vx(*lhs).add(vr(*lhs)).scale(0.5);
                spread_scaled(&mut mult, *lhs, &m, &avg_r);
                spread_scaled(&mut mult, *rhs, &m, &avg_l);
            }
            Op::MatMul { lhs, rhs } => {
                let avg_a = vx(*lhs).add(vr(*lhs)).scale(0.5);
                let avg_b = vx(*rhs).add(vr(*rhs)).scale(0.5);
                let (da, db) = matmul_vjp(&avg_a, &avg_b, &m);
                mult[lhs.index()].accumulate(&da);
                mult[rhs.index()].accumulate(&db);
            }
            Op::Conv2d { input, kernel } => {
                let avg_x = vx(*input).add(vr(*input)).scale(0.5);
                let avg_k = vx(*kernel).add(vr(*kernel)).scale(0.5);
                let (dx, dk) = conv2d_vjp(&avg_x, &avg_k, &m);
                mult[input.index()].accumulate(&dx);
                mult[kernel.index()].accumulate(&dk);
            }
            Op::Relu { input } => {
                elementwise_rescale(&mut mult, *input, &m, idx, acts_x, acts_r, |z| {
                    if z > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                });
            }
            Op::Sigmoid { input } => {
                elementwise_rescale(&mut mult, *input, &m, idx, acts_x, acts_r, |z| {
                    let s = graph::sigmoid(z);
                    s * (1.0 - s)
                });
            }
            Op::Tanh { input } => {
                elementwise_rescale(&mut mult, *input, &m, idx, acts_x, acts_r, |z| {
                    let t = z.tanh();
                    1.0 - t * t
                });
            }
            Op::Log { input } => {
                elementwise_rescale(&mut mult, *input, &m, idx, acts_x, acts_r, |z| 1.0 / z);
            }
            Op::Softmax { input } => {
                // Elementwise diagonal approximation (documented).
                let y_x = acts_x[idx].as_ref().expect("ancestor activation");
                elementwise_rescale(&mut mult, *input, &m, idx, acts_x, acts_r, |_z| {
                    // local fallback: diagonal of the softmax Jacobian at x
                    // is y(1−y); z is unused because y is per-coordinate.
                    f64::NAN
                });
                // Replace NaN fallbacks (zero-delta coordinates) with the
                // diagonal local gradient.
                let fixed = mult[input.index()].zip_map(y_x, |v, y| {
                    if v.is_nan() {
                        y * (1.0 - y)
                    } else {
                        v
                    }
                });
                mult[input.index()] = fixed;
            }
            Op::Scale { input, factor } => {
                spread(&mut mult, *input, &m, *factor);
            }
            Op::MaxPool1d { input, window } => {
                let (_, arg) = graph::pool1d(vx(*input), *window, PoolKind::Max);
                let (y_x, y_r) = (
                    acts_x[idx].as_ref().expect("ancestor activation"),
                    acts_r[idx].as_ref().expect("ancestor activation"),
                );
                maxpool_rescale(&mut mult, *input, &m, &arg, y_x, y_r, vx(*input), vr(*input));
            }
            Op::MaxPool2d { input, window } => {
                let (_, arg) = graph::pool2d(vx(*input), *window, PoolKind::Max);
                let (y_x, y_r) = (
                    acts_x[idx].as_ref().expect("ancestor activation"),
                    acts_r[idx].as_ref().expect("ancestor activation"),
                );
                maxpool_rescale(&mut mult, *input, &m, &arg, y_x, y_r, vx(*input), vr(*input));
            }
            Op::AvgPool1d { input, window } => {
                let w = *window as f64;
                let mut d = Tensor::zeros(vx(*input).shape());
                for (o, &mo) in m.data().iter().enumerate() {
                    for j in 0..*window {
                        d.data_mut()[o * window + j] += mo / w;
                    }
                }
                mult[input.index()].accumulate(&d);
            }
            Op::AvgPool2d { input, window } => {
                let x = vx(*input);
                let (w_in, c) = (x.shape()[1], x.shape()[2]);
                let (ph, pw) = *window;
                let ow = w_in / pw;
                let denom = (ph * pw) as f64;
                let mut d = Tensor::zeros(x.shape());
                for (o, &mo) in m.data().iter().enumerate() {
                    let ch = o % c;
                    let oj = (o / c) % ow;
                    let oi = o / (c * ow);
                    for di in 0..ph {
                        for dj in 0..pw {
                            let i2 = ((oi * ph + di) * w_in + (oj * pw + dj)) * c + ch;
                            d.data_mut()[i2] += mo / denom;
                        }
                    }
                }
                mult[input.index()].accumulate(&d);
            }
            Op::Concat { inputs, axis } => {
                let shapes: Vec<&[usize]> = inputs.iter().map(|id| vx(*id).shape()).collect();
                for (id, part) in inputs.iter().zip(concat_vjp(&m, &shapes, *axis)) {
                    mult[id.index()].accumulate(&part);
                }
            }
            Op::Row { input, index } => {
                let cols = vx(*input).shape()[1];
                let mut d = Tensor::zeros(vx(*input).shape());
                d.data_mut()[index * cols..(index + 1) * cols].copy_from_slice(m.data());
                mult[input.index()].accumulate(&d);
            }
            Op::Reshape { input, .. } => {
                let d = Tensor::new(vx(*input).shape().to_vec(), m.data().to_vec())
                    .expect("reshape multipliers");
                mult[input.index()].accumulate(&d);
            }
            Op::Sum { input } => {
                let d = Tensor::filled(vx(*input).shape(), m.item());
                mult[input.index()].accumulate(&d);
            }
            Op::Embed { .. } => {
                // Multipliers stop at the table (a parameter); token ids
                // carry none.
            }
        }
    }
    mult
}

fn elementwise_rescale(
    mult: &mut [Tensor],
    input: NodeId,
    m: &Tensor,
    self_idx: usize,
    acts_x: &[Option<Tensor>],
    acts_r: &[Option<Tensor>],
    local: impl Fn(f64) -> f64 + Copy,
) {
    let z_x = acts_x[input.index()].as_ref().expect("ancestor activation");
    let z_r = acts_r[input.index()].as_ref().expect("ancestor activation");
    let y_x = acts_x[self_idx].as_ref().expect("ancestor activation");
    let y_r = acts_r[self_idx].as_ref().expect("ancestor activation");
    let mut d = Tensor::zeros(z_x.shape());
    for i in 0..d.numel() {
        let factor = rescale_factor(
            y_x.data()[i],
            y_r.data()[i],
            z_x.data()[i],
            z_r.data()[i],
            local,
        );
        d.data_mut()[i] = m.data()[i] * factor;
    }
    mult[input.index()].accumulate(&d);
}

#[allow(clippy::too_many_arguments)]
fn maxpool_rescale(
    mult: &mut [Tensor],
    input: NodeId,
    m: &Tensor,
    arg: &[usize],
    y_x: &Tensor,
    y_r: &Tensor,
    z_x: &Tensor,
    z_r: &Tensor,
) {
    // Winner-take-all at the input-side argmax with the rescale factor
    // against that coordinate's delta.
    let mut d = Tensor::zeros(z_x.shape());
    for (o, &src) in arg.iter().enumerate() {
        let factor = rescale_factor(
            y_x.data()[o],
            y_r.data()[o],
            z_x.data()[src],
            z_r.data()[src],
            |_| 1.0,
        );
        d.data_mut()[src] += m.data()[o] * factor;
    }
    mult[input.index()].accumulate(&d);
}

/// Multiplier or relevance flowing into a possibly-scalar operand of a
/// broadcasting elementwise op.
fn spread(mult: &mut [Tensor], id: NodeId, m: &Tensor, sign: f64) {
    let shape = mult[id.index()].shape().to_vec();
    if shape == m.shape() {
        mult[id.index()].accumulate(&m.scale(sign));
    } else {
        let total: f64 = m.data().iter().sum::<f64>() * sign;
        let mut t = Tensor::zeros(&shape);
        t.data_mut()[0] = total;
        mult[id.index()].accumulate(&t);
    }
}

/// Like [`spread`], scaling the signal elementwise by `by` first.
fn spread_scaled(mult: &mut [Tensor], id: NodeId, m: &Tensor, by: &Tensor) {
    let scaled = if m.shape() == by.shape() {
        m.mul_elem(by)
    } else if by.is_scalar() {
        m.scale(by.item())
    } else {
        // m is scalar, by is full: the op output was full-size, so m
        // cannot be scalar here; mul output shape equals the larger side.
        unreachable!("mul multiplier shape combination")
    };
    spread(mult, id, &scaled, 1.0);
}

/// Layer-wise relevance propagation with the ε rule.
///
/// Relevance starts at F(input) on the chosen scalar output and flows
/// backward: linear layers redistribute proportionally to contributions
/// zᵢⱼ with an ε-stabilized denominator, ReLU and the other elementwise
/// nonlinearities pass relevance through, max pooling is winner-take-all,
/// average pooling proportional. Conservation holds up to ε leakage (and
/// relevance absorbed by bias parameters).
pub fn lrp_epsilon(f: &ScalarFn, input: &Tensor, epsilon: f64) -> Result<AttributionResult> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidArg("LRP epsilon must be > 0".into()));
    }
    let net = f.network();
    let out_id = net.output_node(f.output_name())?;
    let in_id = net.input_node(f.wrt())?;
    let bindings = f.bindings(input);
    let acts = net.eval_targets(&bindings.iter().map(|(n, t)| (*n, *t)).collect(), &[out_id])?;

    let mut rel: Vec<Tensor> = (0..net.num_nodes())
        .map(|i| Tensor::zeros(net.node_shape(NodeId(i))))
        .collect();
    rel[out_id.index()].data_mut()[0] = acts[out_id.index()]
        .as_ref()
        .expect("output evaluated")
        .item();

    let stab = |z: f64| z + epsilon * if z >= 0.0 { 1.0 } else { -1.0 };

    for idx in (0..net.num_nodes()).rev() {
        let r = rel[idx].clone();
        if r.data().iter().all(|&v| v == 0.0) {
            continue;
        }
        let op = net.node(NodeId(idx)).op.clone();
        let val = |id: NodeId| acts[id.index()].as_ref().expect("ancestor activation");
        match &op {
            Op::Input { .. } | Op::Param { .. } | Op::Const { .. } => {}
            // Elementwise nonlinearities pass relevance through.
            Op::Relu { input }
            | Op::Sigmoid { input }
            | Op::Tanh { input }
            | Op::Log { input }
            | Op::Softmax { input }
            | Op::Scale { input, .. } => {
                rel[input.index()].accumulate(&r);
            }
            Op::Add { lhs, rhs } | Op::Sub { lhs, rhs } => {
                let neg = matches!(op, Op::Sub { .. });
                let a = val(*lhs);
                let b = val(*rhs);
                let z = acts[idx].as_ref().expect("ancestor activation");
                let mut ra = Tensor::zeros(a.shape());
                let mut rb = Tensor::zeros(b.shape());
                for i in 0..z.numel() {
                    let ai = if a.is_scalar() { a.item() } else { a.data()[i] };
                    let bi_raw = if b.is_scalar() { b.item() } else { b.data()[i] };
                    let bi = if neg { -bi_raw } else { bi_raw };
                    let d = stab(ai + bi);
                    let share_a = r.data()[i] * ai / d;
                    let share_b = r.data()[i] * bi / d;
                    if a.is_scalar() {
                        ra.data_mut()[0] += share_a;
                    } else {
                        ra.data_mut()[i] += share_a;
                    }
                    if b.is_scalar() {
                        rb.data_mut()[0] += share_b;
                    } else {
                        rb.data_mut()[i] += share_b;
                    }
                }
                rel[lhs.index()].accumulate(&ra);
                rel[rhs.index()].accumulate(&rb);
            }
            Op::Mul { lhs, rhs } => {
                // Even split between the two factors (documented rule).
                let half = r.scale(0.5);
                spread(&mut rel, *lhs, &half, 1.0);
                spread(&mut rel, *rhs, &half, 1.0);
            }
            Op::MatMul { lhs, rhs } => {
                let a = val(*lhs);
                let b = val(*rhs);
                let z = acts[idx].as_ref().expect("ancestor activation");
                let (m_rows, k) = (a.shape()[0], a.shape()[1]);
                let mut ra = Tensor::zeros(a.shape());
                let mut rb = Tensor::zeros(b.shape());
                if b.rank() == 1 {
                    for i in 0..m_rows {
                        let d = stab(z.data()[i]);
                        let ri = r.data()[i];
                        for p in 0..k {
                            let contrib = a.data()[i * k + p] * b.data()[p];
                            let share = ri * contrib / d;
                            ra.data_mut()[i * k + p] += share;
                            rb.data_mut()[p] += share;
                        }
                    }
                } else {
                    let n = b.shape()[1];
                    for i in 0..m_rows {
                        for j in 0..n {
                            let d = stab(z.data()[i * n + j]);
                            let rij = r.data()[i * n + j];
                            for p in 0..k {
                                let contrib = a.data()[i * k + p] * b.data()[p * n + j];
                                let share = rij * contrib / d;
                                ra.data_mut()[i * k + p] += share;
                                rb.data_mut()[p * n + j] += share;
                            }
                        }
                    }
                }
                rel[lhs.index()].accumulate(&ra);
                rel[rhs.index()].accumulate(&rb);
            }
            Op::Conv2d { input, kernel } => {
                let x = val(*input);
                let kt = val(*kernel);
                let z = acts[idx].as_ref().expect("ancestor activation");
                let (w_in, c) = (x.shape()[1], x.shape()[2]);
                let (kh, kw, cout) = (kt.shape()[0], kt.shape()[1], kt.shape()[3]);
                let (oh, ow) = (z.shape()[0], z.shape()[1]);
                let mut rx = Tensor::zeros(x.shape());
                let mut rk = Tensor::zeros(kt.shape());
                for oi in 0..oh {
                    for oj in 0..ow {
                        for o in 0..cout {
                            let zi = (oi * ow + oj) * cout + o;
                            let d = stab(z.data()[zi]);
                            let ro = r.data()[zi];
                            if ro == 0.0 {
                                continue;
                            }
                            for di in 0..kh {
                                for dj in 0..kw {
                                    for ci in 0..c {
                                        let xi = ((oi + di) * w_in + (oj + dj)) * c + ci;
                                        let ki = ((di * kw + dj) * c + ci) * cout + o;
                                        let share =
                                            ro * x.data()[xi] * kt.data()[ki] / d;
                                        rx.data_mut()[xi] += share;
                                        rk.data_mut()[ki] += share;
                                    }
                                }
                            }
                        }
                    }
                }
                rel[input.index()].accumulate(&rx);
                rel[kernel.index()].accumulate(&rk);
            }
            Op::MaxPool1d { input, window } => {
                let (_, arg) = graph::pool1d(val(*input), *window, PoolKind::Max);
                let mut d = Tensor::zeros(val(*input).shape());
                for (o, &src) in arg.iter().enumerate() {
                    d.data_mut()[src] += r.data()[o];
                }
                rel[input.index()].accumulate(&d);
            }
            Op::MaxPool2d { input, window } => {
                let (_, arg) = graph::pool2d(val(*input), *window, PoolKind::Max);
                let mut d = Tensor::zeros(val(*input).shape());
                for (o, &src) in arg.iter().enumerate() {
                    d.data_mut()[src] += r.data()[o];
                }
                rel[input.index()].accumulate(&d);
            }
            Op::AvgPool1d { input, window } => {
                let x = val(*input);
                let mut d = Tensor::zeros(x.shape());
                let z_all = acts[idx].as_ref().expect("ancestor activation");
                for (o, &ro) in r.data().iter().enumerate() {
                    let z = z_all.data()[o];
                    let dnm = stab(z * *window as f64);
                    for j in 0..*window {
                        d.data_mut()[o * window + j] += ro * x.data()[o * window + j] / dnm;
                    }
                }
                rel[input.index()].accumulate(&d);
            }
            Op::AvgPool2d { input, window } => {
                let x = val(*input);
                let (w_in, c) = (x.shape()[1], x.shape()[2]);
                let (ph, pw) = *window;
                let ow = w_in / pw;
                let mut d = Tensor::zeros(x.shape());
                let z_all = acts[idx].as_ref().expect("ancestor activation");
                for (o, &ro) in r.data().iter().enumerate() {
                    let ch = o % c;
                    let oj = (o / c) % ow;
                    let oi = o / (c * ow);
                    let z = z_all.data()[o];
                    let dnm = stab(z * (ph * pw) as f64);
                    for di in 0..ph {
                        for dj in 0..pw {
                            let i2 = ((oi * ph + di) * w_in + (oj * pw + dj)) * c + ch;
                            d.data_mut()[i2] += ro * x.data()[i2] / dnm;
                        }
                    }
                }
                rel[input.index()].accumulate(&d);
            }
            Op::Concat { inputs, axis } => {
                let shapes: Vec<&[usize]> = inputs.iter().map(|id| val(*id).shape()).collect();
                for (id, part) in inputs.iter().zip(concat_vjp(&r, &shapes, *axis)) {
                    rel[id.index()].accumulate(&part);
                }
            }
            Op::Row { input, index } => {
                let cols = val(*input).shape()[1];
                let mut d = Tensor::zeros(val(*input).shape());
                d.data_mut()[index * cols..(index + 1) * cols].copy_from_slice(r.data());
                rel[input.index()].accumulate(&d);
            }
            Op::Reshape { input, .. } => {
                let d = Tensor::new(val(*input).shape().to_vec(), r.data().to_vec())
                    .expect("reshape relevance");
                rel[input.index()].accumulate(&d);
            }
            Op::Sum { input } => {
                let x = val(*input);
                let d0 = stab(acts[idx].as_ref().expect("ancestor activation").item());
                let d = x.map(|xi| r.item() * xi / d0);
                rel[input.index()].accumulate(&d);
            }
            Op::Embed { table, .. } => {
                // Relevance terminates at the embedding table parameter.
                let _ = table;
            }
        }
    }

    let values = rel[in_id.index()].clone();
    let f_x = acts[out_id.index()].as_ref().expect("output evaluated").item();
    let gap = (values.sum() - f_x).abs();
    Ok(AttributionResult {
        values,
        method: MethodTag::LrpEpsilon,
        steps: 1,
        completeness_gap: gap,
    })
}

/// Dispatch helper used by the comparison tooling.
pub fn run_rule(f: &ScalarFn, input: &Tensor, rule: &BackpropRule) -> Result<AttributionResult> {
    match rule {
        BackpropRule::DeepliftRescale { reference } => deeplift_rescale(f, input, reference),
        BackpropRule::LrpEpsilon { epsilon } => lrp_epsilon(f, input, *epsilon),
        BackpropRule::Deconvnet => {
            let values = deconvnet(f, input)?;
            Ok(AttributionResult {
                values,
                method: MethodTag::Deconvnet,
                steps: 1,
                completeness_gap: f64::NAN,
            })
        }
        BackpropRule::GuidedBackprop => {
            let values = guided_backprop(f, input)?;
            Ok(AttributionResult {
                values,
                method: MethodTag::GuidedBackprop,
                steps: 1,
                completeness_gap: f64::NAN,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::models;

    fn single_relu_net() -> Graph {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[1]).unwrap();
        let r = b.relu(x);
        b.output("out", r).unwrap();
        b.finish().unwrap()
    }

    #[test]
    fn deeplift_on_linear_model_is_w_times_delta() {
        let net = models::linear_model(&[2.0, 3.0], 0.5).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0, -2.0]);
        let reference = Tensor::from_slice(&[0.5, 0.5]);
        let res = deeplift_rescale(&f, &x, &reference).unwrap();
        assert!((res.values.data()[0] - 2.0 * 0.5).abs() < 1e-12);
        assert!((res.values.data()[1] - 3.0 * (-2.5)).abs() < 1e-12);
        assert!(res.completeness_gap < 1e-12);
    }

    #[test]
    fn deeplift_active_relu_passes_delta() {
        let net = single_relu_net();
        let f = ScalarFn::single(&net).unwrap();
        let res = deeplift_rescale(
            &f,
            &Tensor::from_slice(&[2.0]),
            &Tensor::from_slice(&[0.0]),
        )
        .unwrap();
        assert_eq!(res.values.data(), &[2.0]);
    }

    #[test]
    fn deeplift_conserves_on_mlp() {
        let net =
            models::build_mlp(&[3, 6, 4, 1], models::Activation::Tanh, models::Head::Sigmoid, 8)
                .unwrap();
        let f = ScalarFn::new(&net, "out", "x", &[]).unwrap();
        let x = Tensor::from_slice(&[0.9, -0.4, 0.2]);
        let reference = Tensor::from_slice(&[0.1, 0.1, -0.3]);
        let res = deeplift_rescale(&f, &x, &reference).unwrap();
        assert!(res.completeness_gap <= 1e-9, "gap {}", res.completeness_gap);
    }

    #[test]
    fn deeplift_conserves_through_pools_and_products() {
        // relu MLP + pooling + an elementwise product of activations.
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[4]).unwrap();
        let w = b
            .param(
                "w",
                Tensor::new(vec![4, 4], (0..16).map(|i| (i as f64 - 8.0) / 10.0).collect())
                    .unwrap(),
            )
            .unwrap();
        let z = b.matmul(w, x).unwrap();
        let h = b.relu(z);
        let p = b.max_pool1d(h, 2).unwrap();
        let q = b.avg_pool1d(h, 2).unwrap();
        let prod = b.mul(p, q).unwrap();
        let s = b.sum(prod);
        b.output("out", s).unwrap();
        let net = b.finish().unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let x_t = Tensor::from_slice(&[1.0, -0.5, 2.0, 0.3]);
        let r_t = Tensor::from_slice(&[0.2, 0.1, -0.4, 0.8]);
        let res = deeplift_rescale(&f, &x_t, &r_t).unwrap();
        assert!(res.completeness_gap <= 1e-9, "gap {}", res.completeness_gap);
    }

    #[test]
    fn lrp_linear_is_proportional_to_wx() {
        // ε → tiny: attributions ∝ wᵢxᵢ and sum to F(x) within 1e-6.
        let net = models::linear_model(&[2.0, 3.0], 0.0).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0, 1.0]);
        let res = lrp_epsilon(&f, &x, 1e-9).unwrap();
        assert!((res.values.data()[0] - 2.0).abs() < 1e-6);
        assert!((res.values.data()[1] - 3.0).abs() < 1e-6);
        assert!((res.total() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn lrp_zero_input_gives_zero_attributions() {
        let net = models::linear_model(&[2.0, 3.0], 0.0).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let res = lrp_epsilon(&f, &Tensor::from_slice(&[0.0, 0.0]), 1e-2).unwrap();
        assert_eq!(res.values.data(), &[0.0, 0.0]);
    }

    #[test]
    fn lrp_rejects_nonpositive_epsilon() {
        let net = models::linear_model(&[1.0], 0.0).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        assert!(lrp_epsilon(&f, &Tensor::from_slice(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn deconvnet_equals_gradient_without_relus() {
        let net = models::build_mlp(&[2, 3, 1], models::Activation::Tanh, models::Head::None, 2)
            .unwrap();
        let f = ScalarFn::new(&net, "out", "x", &[]).unwrap();
        let x = Tensor::from_slice(&[0.3, -0.9]);
        let d = deconvnet(&f, &x).unwrap();
        let g = f.grad(&x).unwrap();
        assert_eq!(d.data(), g.data());
    }

    #[test]
    fn deconvnet_ignores_forward_mask() {
        // y = relu(x) at x = −1 with upstream 1: plain gradient 0, deconv 1.
        let net = single_relu_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[-1.0]);
        assert_eq!(f.grad(&x).unwrap().data(), &[0.0]);
        assert_eq!(deconvnet(&f, &x).unwrap().data(), &[1.0]);
    }

    #[test]
    fn guided_equals_gradient_without_relus() {
        let net = models::build_mlp(&[2, 3, 1], models::Activation::Sigmoid, models::Head::None, 6)
            .unwrap();
        let f = ScalarFn::new(&net, "out", "x", &[]).unwrap();
        let x = Tensor::from_slice(&[0.5, 0.2]);
        assert_eq!(guided_backprop(&f, &x).unwrap().data(), f.grad(&x).unwrap().data());
    }

    #[test]
    fn guided_clips_negative_signal() {
        // y = −relu(x) at x = 2: upstream into the relu is −1, so guided
        // clips it to zero while the plain gradient is −1.
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[1]).unwrap();
        let r = b.relu(x);
        let y = b.neg(r);
        b.output("out", y).unwrap();
        let net = b.finish().unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let x_t = Tensor::from_slice(&[2.0]);
        assert_eq!(f.grad(&x_t).unwrap().data(), &[-1.0]);
        assert_eq!(guided_backprop(&f, &x_t).unwrap().data(), &[0.0]);
    }

    #[test]
    fn all_four_methods_differ_across_the_equivalent_pair() {
        let pair = models::equivalent_pair();
        let fa = ScalarFn::single(&pair.net_a).unwrap();
        let fb = ScalarFn::single(&pair.net_b).unwrap();
        let x = Tensor::from_slice(&[1.0, 2.0]);
        let reference = Tensor::from_slice(&[0.0, 0.0]);

        let dl_a = deeplift_rescale(&fa, &x, &reference).unwrap();
        let dl_b = deeplift_rescale(&fb, &x, &reference).unwrap();
        assert!(
            dl_a.values.max_abs_diff(&dl_b.values) > 1e-3,
            "deeplift: {:?} vs {:?}",
            dl_a.values.data(),
            dl_b.values.data()
        );
        // Both still conserve their own delta.
        assert!(dl_a.completeness_gap < 1e-9);
        assert!(dl_b.completeness_gap < 1e-9);

        let lrp_a = lrp_epsilon(&fa, &x, DEFAULT_LRP_EPSILON).unwrap();
        let lrp_b = lrp_epsilon(&fb, &x, DEFAULT_LRP_EPSILON).unwrap();
        assert!(lrp_a.values.max_abs_diff(&lrp_b.values) > 1e-3);

        let dc_a = deconvnet(&fa, &x).unwrap();
        let dc_b = deconvnet(&fb, &x).unwrap();
        assert!(dc_a.max_abs_diff(&dc_b) > 1e-3);

        let g_a = guided_backprop(&fa, &x).unwrap();
        let g_b = guided_backprop(&fb, &x).unwrap();
        assert!(g_a.max_abs_diff(&g_b) > 1e-3);
    }

    #[test]
    fn deeplift_expected_values_on_the_pair() {
        // Hand-computed rescale multipliers for the shipped pair at input
        // (1,2), reference (0,0). The max block splits differently across
        // the nets; the min block contributes the same 0.5·0.1298828125 to
        // x1 on both sides (its two forms are delta-exact rewrites).
        let pair = models::equivalent_pair();
        let fa = ScalarFn::single(&pair.net_a).unwrap();
        let fb = ScalarFn::single(&pair.net_b).unwrap();
        let x = Tensor::from_slice(&[1.0, 2.0]);
        let reference = Tensor::from_slice(&[0.0, 0.0]);
        let a = deeplift_rescale(&fa, &x, &reference).unwrap();
        let b = deeplift_rescale(&fb, &x, &reference).unwrap();
        let min_add = 0.5 * 0.1298828125;
        assert!((a.values.data()[0] - (1.0 / 3.0 + min_add)).abs() < 1e-12);
        assert!((a.values.data()[1] - 2.0 / 3.0).abs() < 1e-12);
        let k = 5.0 / 6.0;
        let m_g = 0.7;
        let m_h = 0.5 / 1.3;
        assert!((b.values.data()[0] - (k * m_g * (1.0 - m_h) + min_add)).abs() < 1e-12);
        assert!((b.values.data()[1] - k * m_h * 2.0).abs() < 1e-12);
        // The max-block asymmetry survives the shared min block.
        assert!((a.values.data()[0] - b.values.data()[0]).abs() > 1e-2);
    }
}
