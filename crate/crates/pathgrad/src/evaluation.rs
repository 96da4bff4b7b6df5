//! Measurement protocols: saturation sweeps, pixel-ablation (AOPC)
//! curves, bounding-box localization, and Riemann-convergence studies.
//!
//! Everything here is deterministic given its seeds; per-input evaluations
//! are independent, and curves serialize to CSV with the fixed header
//! `x,y,label` so repeated runs produce identical bytes.

use crate::attribution::{integrated_gradients, ImportanceMap, PathSpec, ScalarFn};
use crate::error::{Error, Result};
use crate::graph::{Graph, Op};
use crate::tensor::Tensor;

/// A labelled (x, y) series; x strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSeries {
    xs: Vec<f64>,
    ys: Vec<f64>,
    label: String,
}

impl CurveSeries {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, label: &str) -> Result<CurveSeries> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidArg(format!(
                "curve '{label}': {} x values vs {} y values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArg(format!(
                "curve '{label}': x values must be strictly increasing"
            )));
        }
        Ok(CurveSeries {
            xs,
            ys,
            label: label.into(),
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn last_y(&self) -> f64 {
        *self.ys.last().expect("non-empty curve")
    }

    /// Rows of this curve in `x,y,label` form (no header).
    fn csv_rows(&self, out: &mut String) {
        for (x, y) in self.xs.iter().zip(&self.ys) {
            out.push_str(&format!("{x},{y},{}\n", self.label));
        }
    }

    pub fn to_csv(&self) -> String {
        curves_to_csv(std::slice::from_ref(self))
    }
}

/// Serialize curves into one CSV document with header `x,y,label`.
pub fn curves_to_csv(series: &[CurveSeries]) -> String {
    let mut out = String::from("x,y,label\n");
    for s in series {
        s.csv_rows(&mut out);
    }
    out
}

/// Axis-aligned box in pixel coordinates, inclusive-exclusive:
/// columns `[x0, x1)`, rows `[y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<BoundingBox> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidArg(format!(
                "degenerate bounding box [{x0},{y0},{x1},{y1}]"
            )));
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        if self.x1 > width || self.y1 > height {
            return Err(Error::InvalidArg(format!(
                "bounding box [{},{},{},{}] exceeds {width}x{height} image",
                self.x0, self.y0, self.x1, self.y1
            )));
        }
        Ok(())
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        col >= self.x0 && col < self.x1 && row >= self.y0 && row < self.y1
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Which activation the saturation sweep reads.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Tap {
    /// The named output itself (softmax probabilities or a plain score).
    Output,
    /// The input of the softmax producing the named output.
    PreSoftmax,
}

/// Trend of the top class's score over the scaling path γ(α) = α·input.
///
/// The top class is chosen at α = 1 (argmax over the named output; index 0
/// for scalar outputs) and then tracked across every α. With
/// `Tap::PreSoftmax` the named output must be a softmax node, and the sweep
/// reads its pre-activation instead.
pub fn saturation_sweep(
    net: &Graph,
    output: &str,
    wrt: &str,
    pinned: &[(&str, Tensor)],
    input: &Tensor,
    alphas: &[f64],
    tap: Tap,
) -> Result<CurveSeries> {
    let out_id = net.output_node(output)?;
    let tap_id = match tap {
        Tap::Output => out_id,
        Tap::PreSoftmax => match &net.node(out_id).op {
            Op::Softmax { input } => *input,
            _ => {
                return Err(Error::InvalidArg(format!(
                    "output '{output}' is not a softmax node; pre-softmax tap unavailable"
                )))
            }
        },
    };

    let mut sorted: Vec<f64> = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidArg("alphas must lie in [0, 1]".into()));
    }

    let path = PathSpec::from_zero(input.clone());
    let eval_at = |point: &Tensor| -> Result<(Tensor, Tensor)> {
        let mut bindings: Vec<(&str, &Tensor)> = vec![(wrt, point)];
        for (n, t) in pinned {
            bindings.push((n, t));
        }
        let acts = net.eval_targets(
            &bindings.iter().map(|(n, t)| (*n, *t)).collect(),
            &[out_id, tap_id],
        )?;
        Ok((
            acts[out_id.index()].clone().expect("target evaluated"),
            acts[tap_id.index()].clone().expect("target evaluated"),
        ))
    };

    let (full_out, _) = eval_at(input)?;
    let top = argmax(full_out.data());

    let mut ys = Vec::with_capacity(sorted.len());
    for &a in &sorted {
        let (_, tapped) = eval_at(&path.at(a))?;
        ys.push(tapped.data()[top]);
    }
    let label = match tap {
        Tap::Output => "score",
        Tap::PreSoftmax => "presoftmax",
    };
    CurveSeries::new(sorted, ys, label)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

/// L2 and cosine distance between a named layer's activations at γ(α) and
/// at the raw input, per α. Flattening trends evidence saturation inside
/// the network, not just at its head.
pub fn intermediate_saturation(
    net: &Graph,
    layer_output: &str,
    wrt: &str,
    pinned: &[(&str, Tensor)],
    input: &Tensor,
    alphas: &[f64],
) -> Result<(CurveSeries, CurveSeries)> {
    let layer_id = net.output_node(layer_output)?;
    let mut sorted: Vec<f64> = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidArg("alphas must lie in [0, 1]".into()));
    }

    let path = PathSpec::from_zero(input.clone());
    let acts_at = |point: &Tensor| -> Result<Tensor> {
        let mut bindings: Vec<(&str, &Tensor)> = vec![(wrt, point)];
        for (n, t) in pinned {
            bindings.push((n, t));
        }
        let acts = net.eval_targets(
            &bindings.iter().map(|(n, t)| (*n, *t)).collect(),
            &[layer_id],
        )?;
        Ok(acts[layer_id.index()].clone().expect("target evaluated"))
    };

    let reference = acts_at(input)?;
    let mut l2 = Vec::with_capacity(sorted.len());
    let mut cos = Vec::with_capacity(sorted.len());
    for &a in &sorted {
        let current = acts_at(&path.at(a))?;
        l2.push(l2_distance(&current, &reference));
        cos.push(cosine_distance(&current, &reference));
    }
    Ok((
        CurveSeries::new(sorted.clone(), l2, "l2_distance")?,
        CurveSeries::new(sorted, cos, "cosine_distance")?,
    ))
}

fn l2_distance(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn cosine_distance(a: &Tensor, b: &Tensor) -> f64 {
    if a.data() == b.data() {
        // Identical activations (the α = 1 case) are exactly distance 0.
        return 0.0;
    }
    let dot: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
    let na: f64 = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        0.0
    } else if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        1.0 - dot / (na * nb)
    }
}

/// Area-over-the-perturbation-curve protocol.
///
/// Pixels are ranked once by descending importance (ties broken by
/// row-major index), then ablated cumulatively `pixels_per_step` at a time
/// by zeroing every channel. The curve's k-th value is the average score
/// drop over steps 1..=k:
///
///   y(k) = (1/k) Σ_{j=1..k} (F(original) − F(ablated through step j))
pub fn aopc(
    f: &ScalarFn,
    image: &Tensor,
    importance: &ImportanceMap,
    steps: usize,
    pixels_per_step: usize,
) -> Result<CurveSeries> {
    if image.rank() != 3 {
        return Err(Error::InvalidShape(format!(
            "aopc expects an [H,W,C] image, got {:?}",
            image.shape()
        )));
    }
    let (h, w, c) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    if importance.height() != h || importance.width() != w {
        return Err(Error::ShapeMismatch {
            context: "aopc importance map".into(),
            expected: vec![h, w],
            got: vec![importance.height(), importance.width()],
        });
    }
    if steps * pixels_per_step > h * w {
        return Err(Error::InvalidArg(format!(
            "aopc would ablate {} of {} pixels",
            steps * pixels_per_step,
            h * w
        )));
    }

    let ranking = rank_pixels(importance);
    let original = f.value(image)?;
    let mut ablated = image.clone();
    let mut cumulative_drop = 0.0;
    let mut xs = Vec::with_capacity(steps);
    let mut ys = Vec::with_capacity(steps);
    for k in 1..=steps {
        for &p in &ranking[(k - 1) * pixels_per_step..k * pixels_per_step] {
            for ch in 0..c {
                ablated.data_mut()[p * c + ch] = 0.0;
            }
        }
        cumulative_drop += original - f.value(&ablated)?;
        xs.push(k as f64);
        ys.push(cumulative_drop / k as f64);
    }
    CurveSeries::new(xs, ys, "aopc")
}

/// Flat pixel indices in descending importance order; ties go to the lower
/// row-major index so the protocol is deterministic.
pub fn rank_pixels(importance: &ImportanceMap) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..importance.scores().len()).collect();
    idx.sort_by(|&a, &b| {
        importance.scores()[b]
            .total_cmp(&importance.scores()[a])
            .then(a.cmp(&b))
    });
    idx
}

/// Fraction of total importance mass falling inside any of the boxes.
/// An all-zero map scores 0.
pub fn localization_score(importance: &ImportanceMap, boxes: &[BoundingBox]) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for row in 0..importance.height() {
        for col in 0..importance.width() {
            let s = importance.get(row, col);
            total += s;
            if boxes.iter().any(|b| b.contains(col, row)) {
                inside += s;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

/// Patch images that pass the localization protocol's eligibility filters:
/// the box covers less than two thirds of the image, the model scores the
/// image at ≥ 0.5 for the patch class, and ablating (blacking out) the box
/// drops that score by at least `min_drop`. Keeps generating until `count`
/// eligible images are found.
pub fn eligible_patch_images(
    f: &ScalarFn,
    count: usize,
    min_drop: f64,
    seed: u64,
) -> Result<Vec<crate::models::PatchImage>> {
    let mut rng = crate::rng::Rng::new(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let budget = count * 100;
    while out.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::InvalidArg(format!(
                "only {} of {count} generated images passed the eligibility filters",
                out.len()
            )));
        }
        let img = crate::models::datasets::gen_patch_image(&mut rng, true);
        let bbox = img.bbox.expect("patch image has a box");
        let (h, w) = (img.image.shape()[0], img.image.shape()[1]);
        if 3 * bbox.area() >= 2 * h * w {
            continue;
        }
        let score = f.value(&img.image)?;
        if score < 0.5 {
            continue;
        }
        let mut ablated = img.image.clone();
        let c = img.image.shape()[2];
        for row in bbox.y0..bbox.y1 {
            for col in bbox.x0..bbox.x1 {
                for ch in 0..c {
                    ablated.data_mut()[(row * w + col) * c + ch] = 0.0;
                }
            }
        }
        if score - f.value(&ablated)? < min_drop {
            continue;
        }
        out.push(img);
    }
    Ok(out)
}

/// Completeness gap as a function of the Riemann step count: a direct look
/// at the convergence the sum-to-delta property promises in the limit.
pub fn riemann_convergence(f: &ScalarFn, path: &PathSpec, ms: &[usize]) -> Result<CurveSeries> {
    if ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArg(
            "step counts must be strictly increasing".into(),
        ));
    }
    let mut xs = Vec::with_capacity(ms.len());
    let mut ys = Vec::with_capacity(ms.len());
    for &m in ms {
        let res = integrated_gradients(f, path, m)?;
        xs.push(m as f64);
        ys.push(res.completeness_gap);
    }
    CurveSeries::new(xs, ys, "completeness_gap")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::{pixel_importance, scaling_path};
    use crate::models;

    #[test]
    fn curve_rejects_unsorted_x() {
        assert!(CurveSeries::new(vec![0.2, 0.1], vec![0.0, 0.0], "bad").is_err());
        assert!(CurveSeries::new(vec![0.1, 0.1], vec![0.0, 0.0], "bad").is_err());
        assert!(CurveSeries::new(vec![0.1], vec![0.0, 0.0], "bad").is_err());
    }

    #[test]
    fn csv_has_fixed_header_and_rows() {
        let c = CurveSeries::new(vec![1.0, 2.0], vec![0.5, 0.25], "demo").unwrap();
        assert_eq!(c.to_csv(), "x,y,label\n1,0.5,demo\n2,0.25,demo\n");
    }

    #[test]
    fn linear_net_sweep_is_linear() {
        let net = models::linear_model(&[2.0, 3.0], 0.0).unwrap();
        let x = Tensor::from_slice(&[1.0, 1.0]);
        let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
        let curve =
            saturation_sweep(&net, "out", "x", &[], &x, &alphas, Tap::Output).unwrap();
        for (a, y) in curve.xs().iter().zip(curve.ys()) {
            assert!((y - 5.0 * a).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_net_sweep_is_flat_near_one() {
        let net = models::sigmoid_unit(10.0);
        let x = Tensor::from_slice(&[1.0]);
        let alphas: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let curve =
            saturation_sweep(&net, "out", "x", &[], &x, &alphas, Tap::Output).unwrap();
        let at = |a: f64| curve.ys()[curve.xs().iter().position(|&x| x == a).unwrap()];
        assert!((at(1.0) - at(0.8)).abs() < 1e-3);
        // Flat tail: |slope| on the last segment under 5% of the max slope.
        let slopes: Vec<f64> = curve
            .ys()
            .windows(2)
            .zip(curve.xs().windows(2))
            .map(|(y, x)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .collect();
        let max_slope = slopes.iter().cloned().fold(0.0, f64::max);
        assert!(slopes.last().unwrap() < &(0.05 * max_slope));
    }

    #[test]
    fn sweep_at_alpha_one_equals_forward_bit_exactly() {
        let net = models::sigmoid_unit(10.0);
        let x = Tensor::from_slice(&[0.371]);
        let curve =
            saturation_sweep(&net, "out", "x", &[], &x, &[0.5, 1.0], Tap::Output).unwrap();
        let direct = crate::autodiff::forward_output(&net, "out", &[("x", &x)]).unwrap();
        assert_eq!(curve.ys()[1], direct.item());
    }

    #[test]
    fn presoftmax_tap_requires_softmax_output() {
        let net = models::linear_model(&[1.0], 0.0).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        assert!(
            saturation_sweep(&net, "out", "x", &[], &x, &[1.0], Tap::PreSoftmax).is_err()
        );
    }

    #[test]
    fn intermediate_distances_vanish_at_alpha_one() {
        let net = models::build_mlp(&[2, 4, 2], models::Activation::Tanh, models::Head::Softmax, 3)
            .unwrap();
        let x = Tensor::from_slice(&[0.4, -0.2]);
        let (l2, cos) = intermediate_saturation(&net, "h0", "x", &[], &x, &[0.3, 1.0]).unwrap();
        assert_eq!(l2.ys()[1], 0.0);
        assert_eq!(cos.ys()[1], 0.0);
    }

    #[test]
    fn linear_tap_l2_decreases_linearly() {
        let net = models::linear_model(&[2.0, -1.0], 0.0).unwrap();
        let x = Tensor::from_slice(&[1.0, 1.0]);
        let (l2, _) =
            intermediate_saturation(&net, "out", "x", &[], &x, &[0.0, 0.5, 1.0]).unwrap();
        // |F(αx) − F(x)| = (1−α)|F(x)| = (1−α)·1
        assert!((l2.ys()[0] - 1.0).abs() < 1e-12);
        assert!((l2.ys()[1] - 0.5).abs() < 1e-12);
        assert_eq!(l2.ys()[2], 0.0);
    }

    #[test]
    fn strongly_saturating_tap_has_flat_cosine_tail() {
        // tanh(20·x) activations pin to ±1 well before α = 0.6.
        let net = models::build_mlp(&[3, 8, 2], models::Activation::Tanh, models::Head::Softmax, 5)
            .unwrap();
        let boosted = {
            let w = net.param("w0").unwrap().scale(60.0);
            net.with_param("w0", w).unwrap()
        };
        let x = Tensor::from_slice(&[0.8, -0.5, 0.9]);
        let (_, cos) =
            intermediate_saturation(&boosted, "h0", "x", &[], &x, &[0.05, 0.6]).unwrap();
        let at_005 = cos.ys()[0];
        let at_06 = cos.ys()[1];
        assert!(
            at_06 < 0.01 * at_005,
            "cosine distance {at_06} at α=0.6 vs {at_005} at α=0.05"
        );
    }

    #[test]
    fn aopc_constant_predictor_is_zero() {
        let mut b = crate::graph::GraphBuilder::new();
        let x = b.input("x", &[2, 2, 1]).unwrap();
        let _ = x;
        let c = b.scalar(0.75);
        b.output("out", c).unwrap();
        let net = b.finish().unwrap();
        let f = ScalarFn::new(&net, "out", "x", &[]).unwrap();
        let img = Tensor::filled(&[2, 2, 1], 0.5);
        let imp = pixel_importance(&img).unwrap();
        let curve = aopc(&f, &img, &imp, 4, 1).unwrap();
        assert!(curve.ys().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn aopc_matches_bruteforce_reevaluation() {
        // Linear image model with known positive weights; the oracle
        // re-evaluates the model from scratch after every ablation step.
        let (h, w) = (4, 4);
        let mut rng = crate::rng::Rng::new(11);
        let weights: Vec<f64> = (0..h * w).map(|_| rng.uniform(0.1, 1.0)).collect();
        let mut b = crate::graph::GraphBuilder::new();
        let x = b.input("x", &[h, w, 1]).unwrap();
        let flat = b.reshape(x, &[h * w]).unwrap();
        let wrow = b
            .param(
                "w",
                Tensor::new(vec![1, h * w], weights.clone()).unwrap(),
            )
            .unwrap();
        let y = b.matmul(wrow, flat).unwrap();
        b.output("out", y).unwrap();
        let net = b.finish().unwrap();
        let f = ScalarFn::new(&net, "out", "x", &[]).unwrap();

        let img = Tensor::new(
            vec![h, w, 1],
            (0..h * w).map(|_| rng.uniform(0.0, 1.0)).collect(),
        )
        .unwrap();
        let imp = ImportanceMap::from_scores(h, w, weights.clone()).unwrap();
        let curve = aopc(&f, &img, &imp, 5, 2).unwrap();

        // Oracle: independent recomputation per step.
        let ranking = rank_pixels(&imp);
        let orig = f.value(&img).unwrap();
        let mut drops = Vec::new();
        for k in 1..=5 {
            let mut fresh = img.clone();
            for &p in &ranking[..k * 2] {
                fresh.data_mut()[p] = 0.0;
            }
            drops.push(orig - f.value(&fresh).unwrap());
        }
        for k in 1..=5usize {
            let expect = drops[..k].iter().sum::<f64>() / k as f64;
            assert_eq!(curve.ys()[k - 1], expect, "step {k}");
        }
    }

    #[test]
    fn aopc_rejects_oversized_ablation() {
        let net = models::linear_model(&[1.0; 4], 0.0).unwrap();
        let _ = net;
        let mut b = crate::graph::GraphBuilder::new();
        let x = b.input("x", &[2, 2, 1]).unwrap();
        let s = b.sum(x);
        b.output("out", s).unwrap();
        let net = b.finish().unwrap();
        let f = ScalarFn::new(&net, "out", "x", &[]).unwrap();
        let img = Tensor::filled(&[2, 2, 1], 1.0);
        let imp = pixel_importance(&img).unwrap();
        assert!(aopc(&f, &img, &imp, 5, 1).is_err());
    }

    #[test]
    fn localization_all_mass_inside_is_one() {
        let mut scores = vec![0.0; 16];
        scores[5] = 2.0;
        let imp = ImportanceMap::from_scores(4, 4, scores).unwrap();
        let b = BoundingBox::new(1, 1, 2, 2).unwrap();
        assert_eq!(localization_score(&imp, &[b]), 1.0);
    }

    #[test]
    fn localization_uniform_half_box_is_half() {
        let imp = ImportanceMap::from_scores(4, 4, vec![1.0; 16]).unwrap();
        let b = BoundingBox::new(0, 0, 4, 2).unwrap();
        assert!((localization_score(&imp, &[b]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn localization_zero_mass_is_zero() {
        let imp = ImportanceMap::from_scores(2, 2, vec![0.0; 4]).unwrap();
        let b = BoundingBox::new(0, 0, 1, 1).unwrap();
        assert_eq!(localization_score(&imp, &[b]), 0.0);
    }

    #[test]
    fn convergence_is_zero_for_linear_nets() {
        let net = models::linear_model(&[2.0, 3.0], 0.0).unwrap();
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0, -1.0]);
        let path = scaling_path(&x, None).unwrap();
        let curve = riemann_convergence(&f, &path, &[1, 10, 100]).unwrap();
        assert!(curve.ys().iter().all(|&g| g <= 1e-12));
    }

    #[test]
    fn convergence_decreases_for_sigmoid_net() {
        let net = models::sigmoid_unit(10.0);
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        let curve = riemann_convergence(&f, &path, &[20, 100, 500]).unwrap();
        assert!(curve.ys()[2] < curve.ys()[1] && curve.ys()[1] < curve.ys()[0]);
    }

    #[test]
    fn convergence_requires_increasing_steps() {
        let net = models::sigmoid_unit(10.0);
        let f = ScalarFn::single(&net).unwrap();
        let x = Tensor::from_slice(&[1.0]);
        let path = scaling_path(&x, None).unwrap();
        assert!(riemann_convergence(&f, &path, &[100, 20]).is_err());
    }
}
