//! Define-then-run computation graphs over a fixed primitive-op catalog.
//!
//! A [`Graph`] is an immutable, topologically ordered DAG of primitive ops
//! plus a named parameter store. Shapes are static: every node's shape is
//! inferred and checked while the graph is built, so execution never has to
//! guess. There is no broadcasting except scalar-tensor; use explicit
//! `reshape` where shapes need massaging.
//!
//! Graphs are immutable after [`GraphBuilder::finish`]; `forward`/`backward`
//! over a shared graph are safe to run from many threads.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`]; indices are topological.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations. Each op defines a forward rule and a
/// vector-Jacobian product (see `autodiff`).
#[derive(Clone, Debug)]
pub enum Op {
    /// Named graph input (leaf).
    Input { name: String },
    /// Named parameter from the graph's store (leaf).
    Param { name: String },
    /// Embedded constant tensor (leaf).
    Const { value: Tensor },
    /// Elementwise addition; one side may be scalar.
    Add { lhs: NodeId, rhs: NodeId },
    /// Elementwise subtraction; one side may be scalar.
    Sub { lhs: NodeId, rhs: NodeId },
    /// Elementwise (Hadamard) product; one side may be scalar.
    Mul { lhs: NodeId, rhs: NodeId },
    /// Matrix product: `[m,k]x[k,n] -> [m,n]` or `[m,k]x[k] -> [m]`.
    MatMul { lhs: NodeId, rhs: NodeId },
    /// max(x, 0). The subderivative at exactly 0 is fixed to 0.
    Relu { input: NodeId },
    Sigmoid { input: NodeId },
    Tanh { input: NodeId },
    /// Natural log; domain x > 0 enforced at evaluation.
    Log { input: NodeId },
    /// Softmax over a rank-1 tensor.
    Softmax { input: NodeId },
    /// Multiply by a compile-time scalar.
    Scale { input: NodeId, factor: f64 },
    /// Non-overlapping max pooling over a rank-1 tensor.
    MaxPool1d { input: NodeId, window: usize },
    /// Non-overlapping average pooling over a rank-1 tensor.
    AvgPool1d { input: NodeId, window: usize },
    /// Non-overlapping max pooling over `[H,W,C]`.
    MaxPool2d { input: NodeId, window: (usize, usize) },
    /// Non-overlapping average pooling over `[H,W,C]`.
    AvgPool2d { input: NodeId, window: (usize, usize) },
    /// Valid (no padding), stride-1 2D convolution:
    /// input `[H,W,Cin]`, kernel `[kh,kw,Cin,Cout] -> [H-kh+1, W-kw+1, Cout]`.
    Conv2d { input: NodeId, kernel: NodeId },
    /// Concatenate along an axis.
    Concat { inputs: Vec<NodeId>, axis: usize },
    /// Select row `index` of a rank-2 tensor (static index).
    Row { input: NodeId, index: usize },
    /// Reinterpret the data with a new shape of equal element count.
    Reshape { input: NodeId, shape: Vec<usize> },
    /// Sum all elements to a `[1]` scalar.
    Sum { input: NodeId },
    /// Embedding lookup: table `[V,D]` indexed by ids `[L] -> [L,D]`.
    /// Ids must hold integral values in [0, V).
    Embed { table: NodeId, ids: NodeId },
}

impl Op {
    /// Node ids this op reads.
    pub(crate) fn operands(&self) -> Vec<NodeId> {
        match self {
            Op::Input { .. } | Op::Param { .. } | Op::Const { .. } => vec![],
            Op::Add { lhs, rhs }
            | Op::Sub { lhs, rhs }
            | Op::Mul { lhs, rhs }
            | Op::MatMul { lhs, rhs } => vec![*lhs, *rhs],
            Op::Relu { input }
            | Op::Sigmoid { input }
            | Op::Tanh { input }
            | Op::Log { input }
            | Op::Softmax { input }
            | Op::Scale { input, .. }
            | Op::MaxPool1d { input, .. }
            | Op::AvgPool1d { input, .. }
            | Op::MaxPool2d { input, .. }
            | Op::AvgPool2d { input, .. }
            | Op::Row { input, .. }
            | Op::Reshape { input, .. }
            | Op::Sum { input } => vec![*input],
            Op::Conv2d { input, kernel } => vec![*input, *kernel],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Embed { table, ids } => vec![*table, *ids],
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) shape: Vec<usize>,
}

/// Immutable computation graph plus named parameter store: a DAG of
/// primitive ops representing a function from named input tensors to named
/// output tensors.
#[derive(Clone, Debug)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
    inputs: Vec<(String, Vec<usize>)>,
    outputs: Vec<(String, NodeId)>,
    params: BTreeMap<String, Tensor>,
    param_order: Vec<String>,
}

/// Networks are graphs; model code reads better with the domain name.
pub type Network = Graph;

impl Graph {
    /// Declared inputs in declaration order: (name, shape).
    pub fn inputs(&self) -> &[(String, Vec<usize>)] {
        &self.inputs
    }

    /// Declared outputs in declaration order: (name, node).
    pub fn outputs(&self) -> &[(String, NodeId)] {
        &self.outputs
    }

    pub fn output_node(&self, name: &str) -> Result<NodeId> {
        self.outputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
            .ok_or_else(|| Error::UnknownOutput(name.into()))
    }

    /// Node id of a declared input.
    pub fn input_node(&self, name: &str) -> Result<NodeId> {
        self.nodes
            .iter()
            .position(|n| matches!(&n.op, Op::Input { name: n2 } if n2 == name))
            .map(NodeId)
            .ok_or_else(|| Error::UnknownInput(name.into()))
    }

    pub fn input_shape(&self, name: &str) -> Result<&[usize]> {
        self.inputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
            .ok_or_else(|| Error::UnknownInput(name.into()))
    }

    pub fn param(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.into()))
    }

    /// Parameter names in declaration order.
    pub fn param_names(&self) -> &[String] {
        &self.param_order
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub(crate) fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    /// A copy of this graph with one parameter replaced (shape-checked).
    pub fn with_param(&self, name: &str, value: Tensor) -> Result<Graph> {
        let current = self.param(name)?;
        if current.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                context: format!("with_param('{name}')"),
                expected: current.shape().to_vec(),
                got: value.shape().to_vec(),
            });
        }
        let mut g = self.clone();
        g.params.insert(name.into(), value);
        Ok(g)
    }

    pub(crate) fn set_param_unchecked(&mut self, name: &str, value: Tensor) {
        self.params.insert(name.into(), value);
    }

    /// Input names the given node transitively depends on.
    pub(crate) fn ancestor_inputs(&self, node: NodeId) -> Vec<String> {
        let needed = self.needed_for(&[node]);
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match (&n.op, needed[i]) {
                (Op::Input { name }, true) => Some(name.clone()),
                _ => None,
            })
            .collect()
    }

    fn needed_for(&self, targets: &[NodeId]) -> Vec<bool> {
        let mut needed = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = targets.iter().map(|id| id.0).collect();
        while let Some(i) = stack.pop() {
            if needed[i] {
                continue;
            }
            needed[i] = true;
            for op in self.nodes[i].op.operands() {
                stack.push(op.0);
            }
        }
        needed
    }

    /// Evaluate the ancestors of `targets`; other slots stay `None`.
    ///
    /// Bound names must be declared inputs with the declared shapes; an
    /// input is only required when a target actually depends on it.
    pub(crate) fn eval_targets(
        &self,
        bindings: &BTreeMap<&str, &Tensor>,
        targets: &[NodeId],
    ) -> Result<Vec<Option<Tensor>>> {
        for (name, tensor) in bindings {
            match self.inputs.iter().find(|(n, _)| n == name) {
                None => return Err(Error::UnknownInput((*name).into())),
                Some((_, shape)) if tensor.shape() != shape.as_slice() => {
                    return Err(Error::ShapeMismatch {
                        context: format!("input '{name}'"),
                        expected: shape.clone(),
                        got: tensor.shape().to_vec(),
                    })
                }
                _ => {}
            }
        }
        let needed = self.needed_for(targets);
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Input { name }, true) = (&node.op, needed[i]) {
                if !bindings.contains_key(name.as_str()) {
                    return Err(Error::UnknownInput(format!("input '{name}' not bound")));
                }
            }
        }

        let mut acts: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if !needed[i] {
                continue;
            }
            let value = self.eval_op(&node.op, &acts, bindings)?;
            debug_assert_eq!(value.shape(), node.shape.as_slice());
            acts[i] = Some(value);
        }
        Ok(acts)
    }

    fn eval_op(
        &self,
        op: &Op,
        acts: &[Option<Tensor>],
        bindings: &BTreeMap<&str, &Tensor>,
    ) -> Result<Tensor> {
        let v = |id: NodeId| acts[id.0].as_ref().expect("operand evaluated before use");
        Ok(match op {
            Op::Input { name } => (*bindings.get(name.as_str()).expect("validated")).clone(),
            Op::Param { name } => self.param(name)?.clone(),
            Op::Const { value } => value.clone(),
            Op::Add { lhs, rhs } => elementwise_binary(v(*lhs), v(*rhs), |a, b| a + b),
            Op::Sub { lhs, rhs } => elementwise_binary(v(*lhs), v(*rhs), |a, b| a - b),
            Op::Mul { lhs, rhs } => elementwise_binary(v(*lhs), v(*rhs), |a, b| a * b),
            Op::MatMul { lhs, rhs } => matmul(v(*lhs), v(*rhs)),
            Op::Relu { input } => v(*input).map(|x| if x > 0.0 { x } else { 0.0 }),
            Op::Sigmoid { input } => v(*input).map(sigmoid),
            Op::Tanh { input } => v(*input).map(f64::tanh),
            Op::Log { input } => {
                let x = v(*input);
                if x.data().iter().any(|&e| e <= 0.0) {
                    return Err(Error::DomainViolation(
                        "log of non-positive value".into(),
                    ));
                }
                x.map(f64::ln)
            }
            Op::Softmax { input } => softmax(v(*input)),
            Op::Scale { input, factor } => v(*input).scale(*factor),
            Op::MaxPool1d { input, window } => pool1d(v(*input), *window, PoolKind::Max).0,
            Op::AvgPool1d { input, window } => pool1d(v(*input), *window, PoolKind::Avg).0,
            Op::MaxPool2d { input, window } => pool2d(v(*input), *window, PoolKind::Max).0,
            Op::AvgPool2d { input, window } => pool2d(v(*input), *window, PoolKind::Avg).0,
            Op::Conv2d { input, kernel } => conv2d(v(*input), v(*kernel)),
            Op::Concat { inputs, axis } => {
                let parts: Vec<&Tensor> = inputs.iter().map(|id| v(*id)).collect();
                concat(&parts, *axis)
            }
            Op::Row { input, index } => row(v(*input), *index),
            Op::Reshape { input, shape } => {
                Tensor::new(shape.clone(), v(*input).data().to_vec()).expect("validated at build")
            }
            Op::Sum { input } => Tensor::scalar(v(*input).sum()),
            Op::Embed { table, ids } => embed(v(*table), v(*ids))?,
        })
    }
}

/// Staged construction of a [`Graph`]. Operand shapes are checked as each
/// node is added, so a finished graph cannot fail shape checks at runtime.
#[derive(Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    inputs: Vec<(String, Vec<usize>)>,
    outputs: Vec<(String, NodeId)>,
    params: BTreeMap<String, Tensor>,
    param_order: Vec<String>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, shape });
        id
    }

    fn shape_of(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Shape a node will have in the finished graph.
    pub fn peek_shape(&self, id: NodeId) -> &[usize] {
        self.shape_of(id)
    }

    pub fn input(&mut self, name: &str, shape: &[usize]) -> Result<NodeId> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "input '{name}' shape {shape:?}"
            )));
        }
        if self.inputs.iter().any(|(n, _)| n == name) {
            return Err(Error::InvalidArg(format!("duplicate input '{name}'")));
        }
        self.inputs.push((name.into(), shape.to_vec()));
        Ok(self.push(Op::Input { name: name.into() }, shape.to_vec()))
    }

    pub fn param(&mut self, name: &str, value: Tensor) -> Result<NodeId> {
        if self.params.contains_key(name) {
            return Err(Error::InvalidArg(format!("duplicate parameter '{name}'")));
        }
        let shape = value.shape().to_vec();
        self.params.insert(name.into(), value);
        self.param_order.push(name.into());
        Ok(self.push(Op::Param { name: name.into() }, shape))
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        let shape = value.shape().to_vec();
        self.push(Op::Const { value }, shape)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.constant(Tensor::scalar(value))
    }

    fn binary_elementwise_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<Vec<usize>> {
        let sa = self.shape_of(a);
        let sb = self.shape_of(b);
        if sa == sb || sb.iter().product::<usize>() == 1 {
            Ok(sa.to_vec())
        } else if sa.iter().product::<usize>() == 1 {
            Ok(sb.to_vec())
        } else {
            Err(Error::ShapeMismatch {
                context: what.into(),
                expected: sa.to_vec(),
                got: sb.to_vec(),
            })
        }
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let shape = self.binary_elementwise_shape(lhs, rhs, "add")?;
        Ok(self.push(Op::Add { lhs, rhs }, shape))
    }

    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let shape = self.binary_elementwise_shape(lhs, rhs, "sub")?;
        Ok(self.push(Op::Sub { lhs, rhs }, shape))
    }

    pub fn mul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let shape = self.binary_elementwise_shape(lhs, rhs, "mul")?;
        Ok(self.push(Op::Mul { lhs, rhs }, shape))
    }

    pub fn matmul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let sa = self.shape_of(lhs).to_vec();
        let sb = self.shape_of(rhs).to_vec();
        let shape = match sa.as_slice() {
            [m, k1] if sb.len() == 2 && *k1 == sb[0] => vec![*m, sb[1]],
            [m, k1] if sb.len() == 1 && *k1 == sb[0] => vec![*m],
            _ => {
                return Err(Error::ShapeMismatch {
                    context: "matmul".into(),
                    expected: sa,
                    got: sb,
                })
            }
        };
        Ok(self.push(Op::MatMul { lhs, rhs }, shape))
    }

    fn unary(&mut self, input: NodeId, make: impl Fn(NodeId) -> Op) -> NodeId {
        let shape = self.shape_of(input).to_vec();
        self.push(make(input), shape)
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        self.unary(input, |input| Op::Relu { input })
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        self.unary(input, |input| Op::Sigmoid { input })
    }

    pub fn tanh(&mut self, input: NodeId) -> NodeId {
        self.unary(input, |input| Op::Tanh { input })
    }

    pub fn log(&mut self, input: NodeId) -> NodeId {
        self.unary(input, |input| Op::Log { input })
    }

    pub fn softmax(&mut self, input: NodeId) -> Result<NodeId> {
        if self.shape_of(input).len() != 1 {
            return Err(Error::InvalidShape(format!(
                "softmax expects a rank-1 tensor, got {:?}",
                self.shape_of(input)
            )));
        }
        Ok(self.unary(input, |input| Op::Softmax { input }))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let shape = self.shape_of(input).to_vec();
        self.push(Op::Scale { input, factor }, shape)
    }

    pub fn neg(&mut self, input: NodeId) -> NodeId {
        self.scale(input, -1.0)
    }

    pub fn max_pool1d(&mut self, input: NodeId, window: usize) -> Result<NodeId> {
        let shape = pool1d_shape(self.shape_of(input), window)?;
        Ok(self.push(Op::MaxPool1d { input, window }, shape))
    }

    pub fn avg_pool1d(&mut self, input: NodeId, window: usize) -> Result<NodeId> {
        let shape = pool1d_shape(self.shape_of(input), window)?;
        Ok(self.push(Op::AvgPool1d { input, window }, shape))
    }

    pub fn max_pool2d(&mut self, input: NodeId, window: (usize, usize)) -> Result<NodeId> {
        let shape = pool2d_shape(self.shape_of(input), window)?;
        Ok(self.push(Op::MaxPool2d { input, window }, shape))
    }

    pub fn avg_pool2d(&mut self, input: NodeId, window: (usize, usize)) -> Result<NodeId> {
        let shape = pool2d_shape(self.shape_of(input), window)?;
        Ok(self.push(Op::AvgPool2d { input, window }, shape))
    }

    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId) -> Result<NodeId> {
        let si = self.shape_of(input);
        let sk = self.shape_of(kernel);
        if si.len() != 3 || sk.len() != 4 {
            return Err(Error::InvalidShape(format!(
                "conv2d expects input [H,W,C] and kernel [kh,kw,Cin,Cout], got {si:?} and {sk:?}"
            )));
        }
        let (h, w, c) = (si[0], si[1], si[2]);
        let (kh, kw, cin, cout) = (sk[0], sk[1], sk[2], sk[3]);
        if cin != c || kh > h || kw > w {
            return Err(Error::ShapeMismatch {
                context: "conv2d".into(),
                expected: si.to_vec(),
                got: sk.to_vec(),
            });
        }
        let shape = vec![h - kh + 1, w - kw + 1, cout];
        Ok(self.push(Op::Conv2d { input, kernel }, shape))
    }

    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::InvalidArg("concat of zero tensors".into()));
        }
        let first = self.shape_of(inputs[0]).to_vec();
        if axis >= first.len() {
            return Err(Error::InvalidArg(format!(
                "concat axis {axis} out of range for rank {}",
                first.len()
            )));
        }
        let mut axis_total = first[axis];
        for id in &inputs[1..] {
            let s = self.shape_of(*id);
            if s.len() != first.len()
                || s.iter()
                    .zip(&first)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::ShapeMismatch {
                    context: "concat".into(),
                    expected: first,
                    got: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let mut shape = first;
        shape[axis] = axis_total;
        Ok(self.push(
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            shape,
        ))
    }

    pub fn row(&mut self, input: NodeId, index: usize) -> Result<NodeId> {
        let s = self.shape_of(input);
        if s.len() != 2 {
            return Err(Error::InvalidShape(format!(
                "row expects a rank-2 tensor, got {s:?}"
            )));
        }
        if index >= s[0] {
            return Err(Error::InvalidArg(format!(
                "row index {index} out of range for {} rows",
                s[0]
            )));
        }
        let shape = vec![s[1]];
        Ok(self.push(Op::Row { input, index }, shape))
    }

    pub fn reshape(&mut self, input: NodeId, shape: &[usize]) -> Result<NodeId> {
        let numel: usize = self.shape_of(input).iter().product();
        let target: usize = shape.iter().product();
        if numel != target || shape.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "reshape {:?} -> {shape:?}",
                self.shape_of(input)
            )));
        }
        Ok(self.push(
            Op::Reshape {
                input,
                shape: shape.to_vec(),
            },
            shape.to_vec(),
        ))
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        self.push(Op::Sum { input }, vec![1])
    }

    pub fn embed(&mut self, table: NodeId, ids: NodeId) -> Result<NodeId> {
        let st = self.shape_of(table);
        let si = self.shape_of(ids);
        if st.len() != 2 || si.len() != 1 {
            return Err(Error::InvalidShape(format!(
                "embed expects table [V,D] and ids [L], got {st:?} and {si:?}"
            )));
        }
        let shape = vec![si[0], st[1]];
        Ok(self.push(Op::Embed { table, ids }, shape))
    }

    /// One LSTM cell step, composed from primitives.
    ///
    /// Gate order is input, forget, cell candidate, output; weights are the
    /// standard `W*x + U*h + b` affine maps. Returns `(h_next, c_next)`.
    #[allow(clippy::too_many_arguments)]
    pub fn lstm_cell(
        &mut self,
        x: NodeId,
        h_prev: NodeId,
        c_prev: NodeId,
        wx: [NodeId; 4],
        wh: [NodeId; 4],
        bias: [NodeId; 4],
    ) -> Result<(NodeId, NodeId)> {
        let gate = |builder: &mut Self, k: usize| -> Result<NodeId> {
            let a = builder.matmul(wx[k], x)?;
            let b = builder.matmul(wh[k], h_prev)?;
            let ab = builder.add(a, b)?;
            builder.add(ab, bias[k])
        };
        let zi = gate(self, 0)?;
        let zf = gate(self, 1)?;
        let zg = gate(self, 2)?;
        let zo = gate(self, 3)?;
        let i = self.sigmoid(zi);
        let f = self.sigmoid(zf);
        let g = self.tanh(zg);
        let o = self.sigmoid(zo);
        let fc = self.mul(f, c_prev)?;
        let ig = self.mul(i, g)?;
        let c_next = self.add(fc, ig)?;
        let tc = self.tanh(c_next);
        let h_next = self.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// Register a named output.
    pub fn output(&mut self, name: &str, node: NodeId) -> Result<()> {
        if self.outputs.iter().any(|(n, _)| n == name) {
            return Err(Error::InvalidArg(format!("duplicate output '{name}'")));
        }
        self.outputs.push((name.into(), node));
        Ok(())
    }

    pub fn finish(self) -> Result<Graph> {
        if self.outputs.is_empty() {
            return Err(Error::InvalidArg("graph declares no outputs".into()));
        }
        Ok(Graph {
            nodes: self.nodes,
            inputs: self.inputs,
            outputs: self.outputs,
            params: self.params,
            param_order: self.param_order,
        })
    }
}

// ---- forward kernels, shared with the backward pass ----

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn elementwise_binary(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    if a.shape() == b.shape() {
        a.zip_map(b, f)
    } else if b.is_scalar() {
        let s = b.item();
        a.map(|x| f(x, s))
    } else {
        let s = a.item();
        b.map(|x| f(s, x))
    }
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    if b.rank() == 1 {
        let mut out = vec![0.0; m];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a.data()[i * k + p] * b.data()[p];
            }
            *slot = acc;
        }
        Tensor::from_vec(out)
    } else {
        let n = b.shape()[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let av = a.data()[i * k + p];
                for j in 0..n {
                    out[i * n + j] += av * b.data()[p * n + j];
                }
            }
        }
        Tensor::new(vec![m, n], out).expect("matmul shape")
    }
}

pub(crate) fn softmax(x: &Tensor) -> Tensor {
    let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.data().iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::from_vec(exps.into_iter().map(|e| e / total).collect())
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) enum PoolKind {
    Max,
    Avg,
}

fn pool1d_shape(shape: &[usize], window: usize) -> Result<Vec<usize>> {
    if shape.len() != 1 {
        return Err(Error::InvalidShape(format!(
            "1d pooling expects a rank-1 tensor, got {shape:?}"
        )));
    }
    if window == 0 || !shape[0].is_multiple_of(window) {
        return Err(Error::InvalidShape(format!(
            "pool window {window} does not divide length {}",
            shape[0]
        )));
    }
    Ok(vec![shape[0] / window])
}

fn pool2d_shape(shape: &[usize], window: (usize, usize)) -> Result<Vec<usize>> {
    if shape.len() != 3 {
        return Err(Error::InvalidShape(format!(
            "2d pooling expects [H,W,C], got {shape:?}"
        )));
    }
    let (ph, pw) = window;
    if ph == 0 || pw == 0 || !shape[0].is_multiple_of(ph) || !shape[1].is_multiple_of(pw) {
        return Err(Error::InvalidShape(format!(
            "pool window {window:?} does not divide {shape:?}"
        )));
    }
    Ok(vec![shape[0] / ph, shape[1] / pw, shape[2]])
}

/// Returns (pooled tensor, argmax flat indices for max pooling).
/// Ties go to the lowest flat index so gradients are deterministic.
pub(crate) fn pool1d(x: &Tensor, window: usize, kind: PoolKind) -> (Tensor, Vec<usize>) {
    let n = x.shape()[0] / window;
    let mut out = vec![0.0; n];
    let mut arg = vec![0usize; n];
    for i in 0..n {
        match kind {
            PoolKind::Max => {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = i * window;
                for j in 0..window {
                    let v = x.data()[i * window + j];
                    if v > best {
                        best = v;
                        best_at = i * window + j;
                    }
                }
                out[i] = best;
                arg[i] = best_at;
            }
            PoolKind::Avg => {
                let mut acc = 0.0;
                for j in 0..window {
                    acc += x.data()[i * window + j];
                }
                out[i] = acc / window as f64;
            }
        }
    }
    (Tensor::from_vec(out), arg)
}

pub(crate) fn pool2d(x: &Tensor, window: (usize, usize), kind: PoolKind) -> (Tensor, Vec<usize>) {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ph, pw) = window;
    let (oh, ow) = (h / ph, w / pw);
    let mut out = vec![0.0; oh * ow * c];
    let mut arg = vec![0usize; oh * ow * c];
    let at = |i: usize, j: usize, ch: usize| (i * w + j) * c + ch;
    for oi in 0..oh {
        for oj in 0..ow {
            for ch in 0..c {
                let o = (oi * ow + oj) * c + ch;
                match kind {
                    PoolKind::Max => {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_at = at(oi * ph, oj * pw, ch);
                        for di in 0..ph {
                            for dj in 0..pw {
                                let idx = at(oi * ph + di, oj * pw + dj, ch);
                                let v = x.data()[idx];
                                if v > best {
                                    best = v;
                                    best_at = idx;
                                }
                            }
                        }
                        out[o] = best;
                        arg[o] = best_at;
                    }
                    PoolKind::Avg => {
                        let mut acc = 0.0;
                        for di in 0..ph {
                            for dj in 0..pw {
                                acc += x.data()[at(oi * ph + di, oj * pw + dj, ch)];
                            }
                        }
                        out[o] = acc / (ph * pw) as f64;
                    }
                }
            }
        }
    }
    (
        Tensor::new(vec![oh, ow, c], out).expect("pool shape"),
        arg,
    )
}

pub(crate) fn conv2d(x: &Tensor, k: &Tensor) -> Tensor {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kh, kw, _, cout) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![0.0; oh * ow * cout];
    for oi in 0..oh {
        for oj in 0..ow {
            for o in 0..cout {
                let mut acc = 0.0;
                for di in 0..kh {
                    for dj in 0..kw {
                        for ci in 0..c {
                            let xv = x.data()[((oi + di) * w + (oj + dj)) * c + ci];
                            let kv = k.data()[((di * kw + dj) * c + ci) * cout + o];
                            acc += xv * kv;
                        }
                    }
                }
                out[(oi * ow + oj) * cout + o] = acc;
            }
        }
    }
    Tensor::new(vec![oh, ow, cout], out).expect("conv shape")
}

pub(crate) fn concat(parts: &[&Tensor], axis: usize) -> Tensor {
    let rank = parts[0].rank();
    let mut shape = parts[0].shape().to_vec();
    shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
    // outer = product of dims before axis, inner = product after.
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..rank].iter().product();
    let mut out = Vec::with_capacity(shape.iter().product());
    for oi in 0..outer {
        for p in parts {
            let pa = p.shape()[axis];
            let start = oi * pa * inner;
            out.extend_from_slice(&p.data()[start..start + pa * inner]);
        }
    }
    Tensor::new(shape, out).expect("concat shape")
}

pub(crate) fn row(x: &Tensor, index: usize) -> Tensor {
    let cols = x.shape()[1];
    Tensor::from_slice(&x.data()[index * cols..(index + 1) * cols])
}

pub(crate) fn embed(table: &Tensor, ids: &Tensor) -> Result<Tensor> {
    let (v, d) = (table.shape()[0], table.shape()[1]);
    let mut out = Vec::with_capacity(ids.numel() * d);
    for &raw in ids.data() {
        if raw.fract() != 0.0 || raw < 0.0 || raw as usize >= v {
            return Err(Error::DomainViolation(format!(
                "embedding index {raw} not an integer in [0, {v})"
            )));
        }
        let r = raw as usize;
        out.extend_from_slice(&table.data()[r * d..(r + 1) * d]);
    }
    Tensor::new(vec![ids.numel(), d], out)
}

/// Resolve an embedding id tensor to usize indices (validated by `embed`).
pub(crate) fn embed_ids(ids: &Tensor) -> Vec<usize> {
    ids.data().iter().map(|&x| x as usize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_rejects_shape_mismatch() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2]).unwrap();
        let y = b.input("y", &[3]).unwrap();
        assert!(b.add(x, y).is_err());
        assert!(b.matmul(x, y).is_err());
    }

    #[test]
    fn scalar_broadcast_allowed() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[3]).unwrap();
        let c = b.scalar(2.0);
        let y = b.mul(x, c).unwrap();
        b.output("y", y).unwrap();
        let g = b.finish().unwrap();
        let t = Tensor::from_slice(&[1.0, 2.0, 3.0]);
        let out = crate::autodiff::forward(&g, &[("x", &t)]).unwrap();
        assert_eq!(out["y"].data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn concat_axis0_and_axis1() {
        let a = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap();
        let c0 = concat(&[&a, &b], 0);
        assert_eq!(c0.shape(), &[2, 2]);
        assert_eq!(c0.data(), &[1.0, 2.0, 3.0, 4.0]);
        let c1 = concat(&[&a, &b], 1);
        assert_eq!(c1.shape(), &[1, 4]);
        assert_eq!(c1.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn maxpool_tie_goes_to_lowest_flat_index() {
        let x = Tensor::from_slice(&[1.0, 1.0, 0.0, 2.0]);
        let (out, arg) = pool1d(&x, 2, PoolKind::Max);
        assert_eq!(out.data(), &[1.0, 2.0]);
        assert_eq!(arg, vec![0, 3]);
    }

    #[test]
    fn softmax_is_normalized() {
        let s = softmax(&Tensor::from_slice(&[0.0, 0.0]));
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = softmax(&Tensor::from_slice(&[100.0, 1.0, -50.0]));
        assert!((s.sum() - 1.0).abs() < 1e-12);
        assert!(s.data().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn embed_rejects_bad_ids() {
        let table = Tensor::new(vec![3, 2], vec![0.0; 6]).unwrap();
        assert!(embed(&table, &Tensor::from_slice(&[0.5])).is_err());
        assert!(embed(&table, &Tensor::from_slice(&[3.0])).is_err());
        assert!(embed(&table, &Tensor::from_slice(&[2.0])).is_ok());
    }
}
