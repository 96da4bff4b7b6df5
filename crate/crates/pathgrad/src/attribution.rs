//! Counterfactual scaling paths, interior gradients, and integrated
//! gradients.
//!
//! The central objects:
//!
//! * [`PathSpec`] — the straight line γ(α) = baseline + α·(input − baseline)
//!   from a baseline (default: the zero tensor, i.e. a black image or zero
//!   feature vector) to the input. γ(0) and γ(1) reproduce the endpoints
//!   bit-exactly.
//! * [`ScalarFn`] — a scalar-valued view of a network: one designated
//!   output of one designated input, with any remaining inputs pinned.
//! * [`interior_gradients`] — the gradients of the network at every scaled
//!   counterfactual γ(α).
//! * [`integrated_gradients`] — the Riemann-sum cumulation of those
//!   gradients along the path, which distributes the prediction across the
//!   input coordinates so that they sum to F(input) − F(baseline) up to a
//!   reported completeness gap.
//!
//! Non-differentiable points on the path are not specially detected: the
//! ReLU subderivative-at-0 convention applies. For piecewise-smooth
//! networks the completeness gap shrinks like O(1/m) regardless.

use std::collections::BTreeMap;

use crate::autodiff::{backward, forward_output};
use crate::error::{Error, Result};
use crate::evaluation::CurveSeries;
use crate::graph::Graph;
use crate::tensor::Tensor;

/// The default α grid for interior-gradient visualizations.
pub const DEFAULT_ALPHAS: [f64; 10] = [0.02, 0.04, 0.06, 0.08, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Straight-line scaling path from a baseline to an input.
#[derive(Clone, Debug)]
pub struct PathSpec {
    baseline: Tensor,
    input: Tensor,
}

impl PathSpec {
    /// Path with an explicit baseline; shapes must match.
    pub fn new(input: Tensor, baseline: Tensor) -> Result<PathSpec> {
        if input.shape() != baseline.shape() {
            return Err(Error::ShapeMismatch {
                context: "PathSpec".into(),
                expected: input.shape().to_vec(),
                got: baseline.shape().to_vec(),
            });
        }
        Ok(PathSpec { baseline, input })
    }

    /// Path from the zero baseline, i.e. γ(α) = α · input.
    pub fn from_zero(input: Tensor) -> PathSpec {
        let baseline = Tensor::zeros(input.shape());
        PathSpec { baseline, input }
    }

    pub fn baseline(&self) -> &Tensor {
        &self.baseline
    }

    pub fn input(&self) -> &Tensor {
        &self.input
    }

    /// input − baseline.
    pub fn delta(&self) -> Tensor {
        self.input.sub(&self.baseline)
    }

    /// γ(α). The endpoints are special-cased so that γ(0) == baseline and
    /// γ(1) == input exactly, bit for bit.
    pub fn at(&self, alpha: f64) -> Tensor {
        if alpha == 0.0 {
            self.baseline.clone()
        } else if alpha == 1.0 {
            self.input.clone()
        } else {
            self.baseline
                .zip_map(&self.input, |b, x| b + alpha * (x - b))
        }
    }
}

/// Build the counterfactual scaling path for an input. With no baseline the
/// zero tensor is used, recovering the set {α·input | 0 ≤ α ≤ 1}.
pub fn scaling_path(input: &Tensor, baseline: Option<&Tensor>) -> Result<PathSpec> {
    match baseline {
        Some(b) => PathSpec::new(input.clone(), b.clone()),
        None => Ok(PathSpec::from_zero(input.clone())),
    }
}

/// A scalar-valued view of a network: the function F: ℝⁿ → ℝ that
/// attribution operates on. One input is designated as the variable; any
/// other declared inputs are pinned to fixed tensors.
#[derive(Clone, Debug)]
pub struct ScalarFn<'g> {
    net: &'g Graph,
    output: String,
    wrt: String,
    pinned: BTreeMap<String, Tensor>,
}

impl<'g> ScalarFn<'g> {
    pub fn new(
        net: &'g Graph,
        output: &str,
        wrt: &str,
        pinned: &[(&str, Tensor)],
    ) -> Result<ScalarFn<'g>> {
        let out_id = net.output_node(output)?;
        if net.node_shape(out_id).iter().product::<usize>() != 1 {
            return Err(Error::NonScalarOutput(output.into()));
        }
        net.input_shape(wrt)?;
        let pinned: BTreeMap<String, Tensor> = pinned
            .iter()
            .map(|(n, t)| ((*n).to_string(), t.clone()))
            .collect();
        // Every input the output actually depends on must be either the
        // designated variable or pinned.
        for name in net.ancestor_inputs(out_id) {
            if name != wrt && !pinned.contains_key(&name) {
                return Err(Error::UnknownInput(format!(
                    "input '{name}' feeds output '{output}' and must be pinned"
                )));
            }
        }
        Ok(ScalarFn {
            net,
            output: output.into(),
            wrt: wrt.into(),
            pinned,
        })
    }

    /// Convenience for the common case: one data input, one scalar score.
    ///
    /// Picks the output named `out` (or `score`) when present, otherwise
    /// the first scalar output, and requires that it depend on exactly one
    /// input, which becomes the designated variable.
    pub fn single(net: &'g Graph) -> Result<ScalarFn<'g>> {
        let scalar_outputs: Vec<&String> = net
            .outputs()
            .iter()
            .filter(|(_, id)| net.node_shape(*id).iter().product::<usize>() == 1)
            .map(|(n, _)| n)
            .collect();
        let output = scalar_outputs
            .iter()
            .find(|n| n.as_str() == "out")
            .or_else(|| scalar_outputs.iter().find(|n| n.as_str() == "score"))
            .or_else(|| scalar_outputs.first())
            .ok_or_else(|| Error::InvalidArg("graph has no scalar output".into()))?
            .to_string();
        let deps = net.ancestor_inputs(net.output_node(&output)?);
        match deps.as_slice() {
            [one] => ScalarFn::new(net, &output, one, &[]),
            _ => Err(Error::InvalidArg(format!(
                "output '{output}' depends on {} inputs; pin the extras with ScalarFn::new",
                deps.len()
            ))),
        }
    }

    pub fn network(&self) -> &'g Graph {
        self.net
    }

    pub fn output_name(&self) -> &str {
        &self.output
    }

    pub fn wrt(&self) -> &str {
        &self.wrt
    }

    pub(crate) fn bindings<'a>(&'a self, x: &'a Tensor) -> Vec<(&'a str, &'a Tensor)> {
        let mut b: Vec<(&str, &Tensor)> = vec![(self.wrt.as_str(), x)];
        for (n, t) in &self.pinned {
            b.push((n.as_str(), t));
        }
        b
    }

    /// F(x).
    pub fn value(&self, x: &Tensor) -> Result<f64> {
        Ok(forward_output(self.net, &self.output, &self.bindings(x))?.item())
    }

    /// ∇F(x) with respect to the designated input.
    pub fn grad(&self, x: &Tensor) -> Result<Tensor> {
        let grads = backward(self.net, &self.output, &self.bindings(x))?;
        Ok(grads.inputs[&self.wrt].clone())
    }
}

/// The gradients of the network at every counterfactual γ(α).
#[derive(Clone, Debug)]
pub struct InteriorGradients {
    alphas: Vec<f64>,
    gradients: Vec<Tensor>,
}

impl InteriorGradients {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn gradients(&self) -> &[Tensor] {
        &self.gradients
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Tensor)> {
        self.alphas.iter().copied().zip(self.gradients.iter())
    }
}

/// Gradient of F at each γ(α), α ascending. The entry at α = 1 is
/// bit-identical to the plain gradient at the raw input.
pub fn interior_gradients(
    f: &ScalarFn,
    path: &PathSpec,
    alphas: &[f64],
) -> Result<InteriorGradients> {
    let mut sorted: Vec<f64> = alphas.to_vec();
    for &a in &sorted {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidArg(format!("alpha {a} outside [0, 1]")));
        }
    }
    sorted.sort_by(f64::total_cmp);
    let mut gradients = Vec::with_capacity(sorted.len());
    for &a in &sorted {
        gradients.push(f.grad(&path.at(a))?);
    }
    Ok(InteriorGradients {
        alphas: sorted,
        gradients,
    })
}

/// Which attribution produced a result.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MethodTag {
    /// Plain gradient at the input.
    Gradient,
    IntegratedGradients,
    DeepliftRescale,
    LrpEpsilon,
    Deconvnet,
    GuidedBackprop,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Gradient => "grad",
            MethodTag::IntegratedGradients => "ig",
            MethodTag::DeepliftRescale => "deeplift",
            MethodTag::LrpEpsilon => "lrp",
            MethodTag::Deconvnet => "deconvnet",
            MethodTag::GuidedBackprop => "guided",
        }
    }
}

/// Per-coordinate attributions plus bookkeeping.
#[derive(Clone, Debug)]
pub struct AttributionResult {
    /// Same shape as the attributed input.
    pub values: Tensor,
    pub method: MethodTag,
    /// Riemann steps (1 for single-pass methods).
    pub steps: usize,
    /// |Σᵢ valuesᵢ − (F(input) − F(baseline/reference))| as computed when
    /// the result was produced. Never assumed zero.
    pub completeness_gap: f64,
}

impl AttributionResult {
    pub fn total(&self) -> f64 {
        self.values.sum()
    }
}

/// Riemann scheme for the path integral. The right-endpoint sum is the
/// formula the method is defined with and the default everywhere; the
/// variants exist for numerical comparisons only.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum RiemannScheme {
    Left,
    #[default]
    Right,
    Midpoint,
}

/// Integrated gradients along the path with the right-endpoint Riemann sum:
///
/// attrᵢ = Σ_{k=1..m} ∂F(γ(k/m))/∂xᵢ · (γᵢ(k/m) − γᵢ((k−1)/m))
///
/// The completeness gap |Σ attr − (F(γ(1)) − F(γ(0)))| is computed and
/// stored on the result.
pub fn integrated_gradients(f: &ScalarFn, path: &PathSpec, steps: usize) -> Result<AttributionResult> {
    integrated_gradients_with(f, path, steps, RiemannScheme::Right)
}

/// Integrated gradients with an explicit Riemann scheme.
pub fn integrated_gradients_with(
    f: &ScalarFn,
    path: &PathSpec,
    steps: usize,
    scheme: RiemannScheme,
) -> Result<AttributionResult> {
    if steps < 1 {
        return Err(Error::InvalidArg("integrated gradients need m >= 1".into()));
    }
    let m = steps as f64;
    let mut total = Tensor::zeros(path.input().shape());
    let mut prev = path.at(0.0);
    for k in 1..=steps {
        let t = k as f64 / m;
        let point = path.at(t);
        let grad = match scheme {
            RiemannScheme::Right => f.grad(&point)?,
            RiemannScheme::Left => f.grad(&prev)?,
            RiemannScheme::Midpoint => f.grad(&path.at((k as f64 - 0.5) / m))?,
        };
        let increment = point.sub(&prev);
        total.accumulate(&grad.mul_elem(&increment));
        prev = point;
    }
    let gap = (total.sum() - (f.value(path.input())? - f.value(path.baseline())?)).abs();
    Ok(AttributionResult {
        values: total,
        method: MethodTag::IntegratedGradients,
        steps,
        completeness_gap: gap,
    })
}

/// Plain gradient at the input, packaged as an attribution result for
/// side-by-side comparisons. The completeness gap records how badly the raw
/// gradient fails the sum rule; that failure is the saturation story.
pub fn gradient_attribution(f: &ScalarFn, path: &PathSpec) -> Result<AttributionResult> {
    let grad = f.grad(path.input())?;
    let gap = (grad.sum() - (f.value(path.input())? - f.value(path.baseline())?)).abs();
    Ok(AttributionResult {
        values: grad,
        method: MethodTag::Gradient,
        steps: 1,
        completeness_gap: gap,
    })
}

/// Recompute |Σᵢ attrᵢ − (F(γ(1)) − F(γ(0)))| for a result from scratch.
/// Decreases toward 0 as the step count grows for piecewise-smooth F.
pub fn completeness_gap(result: &AttributionResult, f: &ScalarFn, path: &PathSpec) -> Result<f64> {
    Ok((result.values.sum() - (f.value(path.input())? - f.value(path.baseline())?)).abs())
}

/// Per-pixel importance: a 2D grid of nonnegative scores.
#[derive(Clone, Debug)]
pub struct ImportanceMap {
    height: usize,
    width: usize,
    scores: Vec<f64>,
}

impl ImportanceMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    /// Scale every score by a constant (used in tests for the invariance
    /// property of localization).
    pub fn scaled(&self, c: f64) -> ImportanceMap {
        ImportanceMap {
            height: self.height,
            width: self.width,
            scores: self.scores.iter().map(|s| s * c).collect(),
        }
    }

    pub fn from_scores(height: usize, width: usize, scores: Vec<f64>) -> Result<ImportanceMap> {
        if scores.len() != height * width {
            return Err(Error::InvalidShape(format!(
                "importance map {height}x{width} needs {} scores, got {}",
                height * width,
                scores.len()
            )));
        }
        Ok(ImportanceMap {
            height,
            width,
            scores,
        })
    }
}

/// Aggregate a gradient (or attribution) tensor over the color dimension:
/// per pixel, the sum of absolute values across channels. Requires an
/// `[H, W, C]` tensor (channels last).
pub fn pixel_importance(grad: &Tensor) -> Result<ImportanceMap> {
    if grad.rank() != 3 {
        return Err(Error::InvalidShape(format!(
            "pixel importance expects [H,W,C], got {:?}",
            grad.shape()
        )));
    }
    let (h, w, c) = (grad.shape()[0], grad.shape()[1], grad.shape()[2]);
    let mut scores = vec![0.0; h * w];
    for (p, score) in scores.iter_mut().enumerate() {
        let base = p * c;
        *score = (0..c).map(|ch| grad.data()[base + ch].abs()).sum();
    }
    Ok(ImportanceMap {
        height: h,
        width: w,
        scores,
    })
}

/// Mean absolute importance per α: the trend chart that accompanies
/// interior-gradient visualizations. Rank-3 gradients aggregate through
/// [`pixel_importance`]; lower ranks use the mean of |g| directly.
pub fn importance_trend(ig: &InteriorGradients) -> CurveSeries {
    let ys: Vec<f64> = ig
        .gradients()
        .iter()
        .map(|g| {
            if g.rank() == 3 {
                pixel_importance(g).expect("rank checked").mean()
            } else {
                g.abs_sum() / g.numel() as f64
            }
        })
        .collect();
    CurveSeries::new(ig.alphas().to_vec(), ys, "mean_importance").expect("alphas sorted")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::models;

    fn sigma10_net() -> Graph {
        models::sigmoid_unit(10.0)
    }

    #[test]
    fn zero_baseline_path_is_pure_scaling() {
        let t = Tensor::from_slice(&[2.0, -4.0]);
        let path = scaling_path(&t, None).unwrap();
        assert_eq!(path.at(0.5).data(), &[1.0, -2.0]);
        assert_eq!(path.at(0.0).data(), &[0.0, 0.0]);
        assert_eq!(path.at(1.0).data(), t.data());
    }

    #[test]
    fn midpath_with_nonzero_baseline() {
        let x = Tensor::from_slice(&[2.0]);
        let b = Tensor::from_slice(&[0.0]);
        let path = scaling_path(&x, Some(&b)).unwrap();
        assert_eq!(path.at(0.5).data(), &[1.0]);

        let x = Tensor::from_slice(&[3.0]);
        let b = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, Some(&b)).unwrap();
        // b + 0.25 (x - b) = 1 + 0.5
        assert_eq!(path.at(0.25).data(), &[1.5]);
    }

    #[test]
    fn path_endpoints_are_bit_exact() {
        let x = Tensor::from_slice(&[0.3, 0.7, -1.1]);
        let b = Tensor::from_slice(&[0.1, 0.1, 0.1]);
        let path = PathSpec::new(x.clone(), b.clone()).unwrap();
        assert_eq!(path.at(0.0), b);
        assert_eq!(path.at(1.0), x);
    }

    #[test]
    fn path_rejects_shape_mismatch() {
        let x = Tensor::from_slice(&[1.0, 2.0]);
        let b = Tensor::from_slice(&[0.0]);
        assert!(scaling_path(&x, Some(&b)).is_err());
    }

    #[test]
    fn interior_gradient_at_one_matches_backward_bit_exactly() {
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let ig = interior_gradients(&f, &path, &[0.5, 1.0]).unwrap();
        let direct = f.grad(&x).unwrap();
        assert_eq!(ig.gradients()[1].data(), direct.data());
    }

    #[test]
    fn interior_gradients_constant_for_linear_net() {
        let net = models::linear_model(&[2.0, 3.0], 0.0).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0, 1.0]);
        let path = scaling_path(&x, None).unwrap();
        let ig = interior_gradients(&f, &path, &[0.1, 0.5, 1.0]).unwrap();
        for g in ig.gradients() {
            assert_eq!(g.data(), &[2.0, 3.0]);
        }
    }

    #[test]
    fn saturating_sigmoid_gradient_collapses_at_full_scale() {
        // d/dx σ(10x) = 10 σ'(10x); at α = 0.1 the slope is ~4300x larger
        // than at α = 1.
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let alphas: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let ig = interior_gradients(&f, &path, &alphas).unwrap();
        let first = ig.gradients()[0].item().abs();
        let last = ig.gradients()[9].item().abs();
        assert!(first > 50.0 * last, "{first} vs {last}");
        // Closed form: 10 σ'(1) and 10 σ'(10).
        let sp = |z: f64| {
            let s = 1.0 / (1.0 + (-z).exp());
            s * (1.0 - s)
        };
        assert!((first - 10.0 * sp(1.0)).abs() < 1e-12);
        assert!((last - 10.0 * sp(10.0)).abs() < 1e-12);
    }

    #[test]
    fn linear_model_is_exact_at_one_step() {
        let net = models::linear_model(&[2.0, 3.0], 0.0).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0, 1.0]);
        let path = scaling_path(&x, None).unwrap();
        let res = integrated_gradients(&f, &path, 1).unwrap();
        assert_eq!(res.values.data(), &[2.0, 3.0]);
        assert!(res.completeness_gap <= 1e-12);
    }

    #[test]
    fn sigmoid_attribution_approaches_closed_form() {
        // ∫₀¹ 10 σ'(10α) dα = σ(10) − σ(0) = 0.4999546...
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let res = integrated_gradients(&f, &path, 500).unwrap();
        let exact = 1.0 / (1.0 + (-10.0f64).exp()) - 0.5;
        assert!((res.values.item() - exact).abs() < 5e-3);
    }

    #[test]
    fn completeness_gap_shrinks_with_steps() {
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let gap = |m: usize| {
            integrated_gradients(&f, &path, m)
                .unwrap()
                .completeness_gap
        };
        let (g20, g100, g500) = (gap(20), gap(100), gap(500));
        assert!(g500 < g100 && g100 < g20, "{g20} {g100} {g500}");
    }

    #[test]
    fn stored_gap_matches_recomputed_gap() {
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let res = integrated_gradients(&f, &path, 50).unwrap();
        let re = completeness_gap(&res, &f, &path).unwrap();
        assert_eq!(res.completeness_gap, re);
    }

    #[test]
    fn midpoint_scheme_is_more_accurate_here() {
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let right = integrated_gradients_with(&f, &path, 50, RiemannScheme::Right).unwrap();
        let mid = integrated_gradients_with(&f, &path, 50, RiemannScheme::Midpoint).unwrap();
        assert!(mid.completeness_gap < right.completeness_gap);
    }

    #[test]
    fn pixel_importance_sums_abs_channels() {
        let t = Tensor::new(vec![1, 1, 3], vec![0.1, -0.2, 0.3]).unwrap();
        let map = pixel_importance(&t).unwrap();
        assert!((map.get(0, 0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn pixel_importance_of_zero_is_zero() {
        let map = pixel_importance(&Tensor::zeros(&[2, 2, 3])).unwrap();
        assert!(map.scores().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pixel_importance_matches_scalar_loop() {
        let mut rng = crate::rng::Rng::new(42);
        let t = Tensor::new(
            vec![4, 5, 3],
            (0..60).map(|_| rng.uniform(-2.0, 2.0)).collect(),
        )
        .unwrap();
        let map = pixel_importance(&t).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                let mut expect = 0.0;
                for ch in 0..3 {
                    expect += t.get(&[r, c, ch]).abs();
                }
                assert_eq!(map.get(r, c), expect);
            }
        }
    }

    #[test]
    fn pixel_importance_rejects_wrong_rank() {
        assert!(pixel_importance(&Tensor::zeros(&[3, 3])).is_err());
    }

    #[test]
    fn trend_of_zero_gradients_is_zero() {
        let ig = InteriorGradients {
            alphas: vec![0.5, 1.0],
            gradients: vec![Tensor::zeros(&[2, 2, 1]), Tensor::zeros(&[2, 2, 1])],
        };
        let trend = importance_trend(&ig);
        assert_eq!(trend.ys(), &[0.0, 0.0]);
    }

    #[test]
    fn trend_single_alpha_is_mean_abs() {
        let g = Tensor::new(vec![1, 2, 2], vec![1.0, -1.0, 2.0, 0.0]).unwrap();
        let ig = InteriorGradients {
            alphas: vec![1.0],
            gradients: vec![g],
        };
        let trend = importance_trend(&ig);
        // per-pixel sums: 2.0 and 2.0; mean = 2.0
        assert_eq!(trend.ys(), &[2.0]);
    }

    #[test]
    fn trend_peaks_at_smallest_alpha_for_saturating_net() {
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let alphas: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let ig = interior_gradients(&f, &path, &alphas).unwrap();
        let trend = importance_trend(&ig);
        let peak = trend
            .ys()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 0);
    }

    #[test]
    fn gradient_attribution_reports_honest_gap() {
        let net = sigma10_net();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let res = gradient_attribution(&f, &path).unwrap();
        // Saturated: tiny gradient, huge gap against ΔF ≈ 0.5.
        assert!(res.total() < 1e-3);
        assert!(res.completeness_gap > 0.49);
    }

    #[test]
    fn multi_input_scalar_fn_pins_other_inputs() {
        let mut b = GraphBuilder::new();
        let x = b.input("x", &[2]).unwrap();
        let t = b.input("t", &[2]).unwrap();
        let prod = b.mul(x, t).unwrap();
        let s = b.sum(prod);
        b.output("score", s).unwrap();
        let net = b.finish().unwrap();
        let pin = Tensor::from_slice(&[1.0, 0.0]);
        let f = ScalarFn::new(&net, "score", "x", &[("t", pin)]).unwrap();
        let x = Tensor::from_slice(&[3.0, 4.0]);
        assert_eq!(f.value(&x).unwrap(), 3.0);
        assert_eq!(f.grad(&x).unwrap().data(), &[1.0, 0.0]);
    }
}
