//! Implementations of the CLI subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pathgrad::attribution::{
    gradient_attribution, integrated_gradients, interior_gradients, importance_trend,
    pixel_importance, scaling_path, AttributionResult, ImportanceMap, PathSpec, ScalarFn,
    DEFAULT_ALPHAS,
};
use pathgrad::autodiff::forward_output;
use pathgrad::baselines::{deeplift_rescale, lrp_epsilon, run_rule, BackpropRule};
use pathgrad::error::{Error, Result};
use pathgrad::evaluation::{
    aopc, curves_to_csv, eligible_patch_images, localization_score, riemann_convergence,
    saturation_sweep, CurveSeries, Tap,
};
use pathgrad::image::write_heatmap;
use pathgrad::models::{
    self, accuracy, class_score_fn, load_model, one_hot, save_model, train_toy, Arch,
};
use pathgrad::{Network, Tensor};

use crate::inputs::{load_companion, load_input, LoadedInput};
use crate::{
    AopcArgs, AttributeArgs, CompareArgs, ConvergeArgs, DatasetTag, InteriorArgs, LocalizeArgs,
    Method, SaturateArgs, TapArg, TrainArgs,
};

/// A loaded model plus the attribution-space view of one input.
struct Prepared {
    net: Network,
    arch: Arch,
    input: LoadedInput,
    /// The tensor attribution runs over: the image, the feature vector, or
    /// the embedded token sequence.
    x: Tensor,
    /// Resolved class for classifier heads; None for plain scalar outputs.
    class: Option<usize>,
}

fn prepare(model: &Path, input: &Path, class_flag: Option<usize>) -> Result<Prepared> {
    let spec = load_model(model)?;
    let arch = spec.arch.clone();
    match &arch {
        Arch::Lstm { vocab, .. } => {
            let lm = spec.build_lstm()?;
            let loaded = load_input(input, &arch)?;
            let tokens = match &loaded {
                LoadedInput::Tokens(t) => t.clone(),
                _ => unreachable!("lstm arch loads tokens"),
            };
            let x = lm.embed_tokens(&tokens)?;
            let net = lm.embedded_net()?;
            let class = match class_flag {
                Some(c) if c >= *vocab => {
                    return Err(Error::InvalidArg(format!(
                        "class {c} outside vocabulary of {vocab}"
                    )))
                }
                Some(c) => c,
                None => argmax(
                    forward_output(&net, "probs", &[("embedded", &x)])?.data(),
                ),
            };
            Ok(Prepared {
                net,
                arch,
                input: loaded,
                x,
                class: Some(class),
            })
        }
        _ => {
            let net = spec.build()?;
            let loaded = load_input(input, &arch)?;
            let x = match &loaded {
                LoadedInput::Image(t) => t.clone(),
                LoadedInput::Features { tensor, .. } => tensor.clone(),
                LoadedInput::Tokens(_) => unreachable!("non-lstm arch"),
            };
            let class = if net.output_node("probs").is_ok() {
                Some(match class_flag {
                    Some(c) => c,
                    None => argmax(forward_output(&net, "probs", &[("x", &x)])?.data()),
                })
            } else {
                if class_flag.is_some() {
                    return Err(Error::InvalidArg(
                        "--class only applies to softmax-headed models".into(),
                    ));
                }
                None
            };
            Ok(Prepared {
                net,
                arch,
                input: loaded,
                x,
                class,
            })
        }
    }
}

fn scalar_fn(p: &Prepared) -> Result<ScalarFn<'_>> {
    match (&p.arch, p.class) {
        (Arch::Lstm { vocab, .. }, Some(c)) => ScalarFn::new(
            &p.net,
            "score",
            "embedded",
            &[("target", one_hot(c, *vocab))],
        ),
        (_, Some(c)) => class_score_fn(&p.net, c),
        (_, None) => ScalarFn::new(&p.net, "out", "x", &[]),
    }
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

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

/// Per-coordinate importance of an attribution tensor as a 2D map: images
/// aggregate |·| over channels per pixel; vectors become a 1×n strip; token
/// attributions a 1×L strip aggregated over embedding dimensions.
fn importance_of(values: &Tensor) -> Result<ImportanceMap> {
    match values.rank() {
        3 => pixel_importance(values),
        2 => {
            let rows = values.shape()[0];
            let cols = values.shape()[1];
            let reshaped = Tensor::new(vec![1, rows, cols], values.data().to_vec())
                .expect("rank-2 to 1-row image");
            pixel_importance(&reshaped)
        }
        1 => {
            let n = values.numel();
            let reshaped = Tensor::new(vec![1, n, 1], values.data().to_vec())
                .expect("rank-1 to 1-row image");
            pixel_importance(&reshaped)
        }
        other => Err(Error::InvalidShape(format!(
            "no importance rendering for rank-{other} tensors"
        ))),
    }
}

fn attribution_csv(p: &Prepared, values: &Tensor) -> String {
    let mut csv = String::new();
    match &p.input {
        LoadedInput::Image(_) => {
            csv.push_str("row,col,channel,value\n");
            let (h, w, c) = (values.shape()[0], values.shape()[1], values.shape()[2]);
            for row in 0..h {
                for col in 0..w {
                    for ch in 0..c {
                        let _ = writeln!(
                            csv,
                            "{row},{col},{ch},{}",
                            values.get(&[row, col, ch])
                        );
                    }
                }
            }
        }
        LoadedInput::Features { names, .. } => {
            csv.push_str("feature,value\n");
            for (name, v) in names.iter().zip(values.data()) {
                let _ = writeln!(csv, "{name},{v}");
            }
        }
        LoadedInput::Tokens(tokens) => {
            csv.push_str("position,token,attribution\n");
            let d = values.shape()[1];
            for (pos, tok) in tokens.iter().enumerate() {
                let word_sum: f64 = (0..d).map(|j| values.get(&[pos, j])).sum();
                let _ = writeln!(csv, "{pos},{tok},{word_sum}");
            }
        }
    }
    csv
}

pub fn attribute(args: &AttributeArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let p = prepare(&args.model, &args.input, args.class)?;
    let f = scalar_fn(&p)?;
    let baseline = load_companion(args.baseline.as_deref(), &p.x, &p.arch)?;
    let path = scaling_path(&p.x, Some(&baseline))?;

    let result = match args.method {
        Method::Ig => integrated_gradients(&f, &path, args.steps)?,
        Method::Grad => gradient_attribution(&f, &path)?,
        Method::Deeplift => {
            let reference = load_companion(args.reference.as_deref(), &p.x, &p.arch)?;
            deeplift_rescale(&f, &p.x, &reference)?
        }
        Method::Lrp => lrp_epsilon(&f, &p.x, args.epsilon)?,
        Method::Deconvnet => run_rule(&f, &p.x, &BackpropRule::Deconvnet)?,
        Method::Guided => run_rule(&f, &p.x, &BackpropRule::GuidedBackprop)?,
    };

    write_text(
        &args.out.join("attribution.csv"),
        &attribution_csv(&p, &result.values),
    )?;
    write_heatmap(&args.out.join("heatmap.pgm"), &importance_of(&result.values)?)?;
    write_text(
        &args.out.join("summary.txt"),
        &summary_text(&p, &f, &path, &result)?,
    )?;
    Ok(())
}

fn summary_text(
    p: &Prepared,
    f: &ScalarFn,
    path: &PathSpec,
    result: &AttributionResult,
) -> Result<String> {
    let f_input = f.value(path.input())?;
    let f_baseline = f.value(path.baseline())?;
    let mut s = String::new();
    let _ = writeln!(s, "method: {}", result.method.as_str());
    let _ = writeln!(s, "steps: {}", result.steps);
    if let Some(c) = p.class {
        let _ = writeln!(s, "class: {c}");
    }
    let _ = writeln!(s, "input kind: {}", p.input.kind());
    let _ = writeln!(s, "F(input): {f_input}");
    let _ = writeln!(s, "F(baseline): {f_baseline}");
    let _ = writeln!(s, "score delta: {}", f_input - f_baseline);
    let _ = writeln!(s, "attribution total: {}", result.total());
    if result.completeness_gap.is_nan() {
        let _ = writeln!(s, "completeness gap: n/a");
    } else {
        let _ = writeln!(s, "completeness gap: {}", result.completeness_gap);
    }
    Ok(s)
}

pub fn interior(args: &InteriorArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let p = prepare(&args.model, &args.input, args.class)?;
    let f = scalar_fn(&p)?;
    let baseline = load_companion(args.baseline.as_deref(), &p.x, &p.arch)?;
    let path = scaling_path(&p.x, Some(&baseline))?;
    let alphas: Vec<f64> = args
        .alphas
        .clone()
        .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());

    let ig = interior_gradients(&f, &path, &alphas)?;
    for (alpha, grad) in ig.iter() {
        let name = format!("heatmap_alpha_{alpha}.pgm");
        write_heatmap(&args.out.join(name), &importance_of(grad)?)?;
    }
    write_text(
        &args.out.join("trend.csv"),
        &importance_trend(&ig).to_csv(),
    )?;
    Ok(())
}

pub fn saturate(args: &SaturateArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let p = prepare(&args.model, &args.input, None)?;
    let (output, wrt) = match &p.arch {
        Arch::Lstm { .. } => ("probs", "embedded"),
        _ if p.net.output_node("probs").is_ok() => ("probs", "x"),
        _ => ("out", "x"),
    };
    let alphas: Vec<f64> = args
        .alphas
        .clone()
        .unwrap_or_else(|| (0..=20).map(|k| k as f64 / 20.0).collect());
    let tap = match args.tap {
        TapArg::Output => Tap::Output,
        TapArg::Presoftmax => Tap::PreSoftmax,
    };
    let curve = saturation_sweep(&p.net, output, wrt, &[], &p.x, &alphas, tap)?;
    write_text(&args.out.join("saturation.csv"), &curve.to_csv())?;
    Ok(())
}

pub fn aopc_cmd(args: &AopcArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let spec = load_model(&args.model)?;
    if !matches!(spec.arch, Arch::Conv { .. }) {
        return Err(Error::InvalidArg(
            "the aopc protocol runs on conv image models".into(),
        ));
    }
    let net = spec.build()?;
    let images: Vec<_> = models::object_patch_images(args.count * 2, args.seed)
        .into_iter()
        .filter(|img| img.label == 1)
        .take(args.count)
        .collect();
    if images.len() < args.count {
        return Err(Error::InvalidArg("not enough generated images".into()));
    }

    let mut ig_mean = vec![0.0; args.ablation_steps];
    let mut grad_mean = vec![0.0; args.ablation_steps];
    let mut xs = Vec::new();
    for img in &images {
        let predicted = argmax(forward_output(&net, "probs", &[("x", &img.image)])?.data());
        let f = class_score_fn(&net, predicted)?;
        let path = scaling_path(&img.image, None)?;
        let ig = integrated_gradients(&f, &path, args.steps)?;
        let grad = gradient_attribution(&f, &path)?;
        let ig_curve = aopc(
            &f,
            &img.image,
            &pixel_importance(&ig.values)?,
            args.ablation_steps,
            args.pixels_per_step,
        )?;
        let grad_curve = aopc(
            &f,
            &img.image,
            &pixel_importance(&grad.values)?,
            args.ablation_steps,
            args.pixels_per_step,
        )?;
        xs = ig_curve.xs().to_vec();
        for (acc, y) in ig_mean.iter_mut().zip(ig_curve.ys()) {
            *acc += y;
        }
        for (acc, y) in grad_mean.iter_mut().zip(grad_curve.ys()) {
            *acc += y;
        }
    }
    let n = images.len() as f64;
    for v in ig_mean.iter_mut().chain(grad_mean.iter_mut()) {
        *v /= n;
    }
    let ig_curve = CurveSeries::new(xs.clone(), ig_mean, "ig")?;
    let grad_curve = CurveSeries::new(xs, grad_mean, "grad")?;
    write_text(
        &args.out.join("aopc.csv"),
        &curves_to_csv(&[ig_curve.clone(), grad_curve.clone()]),
    )?;
    let mut report = String::new();
    let _ = writeln!(report, "images: {}", images.len());
    let _ = writeln!(report, "ablation steps: {}", args.ablation_steps);
    let _ = writeln!(report, "pixels per step: {}", args.pixels_per_step);
    let _ = writeln!(report, "final-step aopc (ig): {}", ig_curve.last_y());
    let _ = writeln!(report, "final-step aopc (grad): {}", grad_curve.last_y());
    let _ = writeln!(
        report,
        "integrated gradients ablations drop the score more: {}",
        ig_curve.last_y() > grad_curve.last_y()
    );
    write_text(&args.out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

pub fn localize(args: &LocalizeArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let spec = load_model(&args.model)?;
    if !matches!(spec.arch, Arch::Conv { .. }) {
        return Err(Error::InvalidArg(
            "the localization protocol runs on conv image models".into(),
        ));
    }
    let net = spec.build()?;

    // Single-image mode: user image plus a ground-truth box sidecar.
    if let (Some(input), Some(box_path)) = (&args.input, &args.boxes) {
        let image = match load_input(input, &spec.arch)? {
            LoadedInput::Image(t) => t,
            _ => unreachable!("conv arch loads images"),
        };
        let boxes = crate::inputs::load_boxes(box_path)?;
        let (h, w) = (image.shape()[0], image.shape()[1]);
        for b in &boxes {
            b.validate_for(w, h)?;
        }
        let predicted = argmax(forward_output(&net, "probs", &[("x", &image)])?.data());
        let f = class_score_fn(&net, predicted)?;
        let path = scaling_path(&image, None)?;
        let ig = integrated_gradients(&f, &path, args.steps)?;
        let grad = gradient_attribution(&f, &path)?;
        let ig_frac = localization_score(&pixel_importance(&ig.values)?, &boxes);
        let grad_frac = localization_score(&pixel_importance(&grad.values)?, &boxes);
        let mut report = String::new();
        let _ = writeln!(report, "image: {}", input.display());
        let _ = writeln!(report, "boxes: {}", boxes.len());
        let _ = writeln!(report, "class: {predicted}");
        let _ = writeln!(report, "in-box fraction (ig): {ig_frac}");
        let _ = writeln!(report, "in-box fraction (grad): {grad_frac}");
        write_text(&args.out.join("report.txt"), &report)?;
        print!("{report}");
        return Ok(());
    }

    // Corpus mode: the synthetic generator puts the object in class 1 by
    // construction.
    let f = class_score_fn(&net, 1)?;
    let images = eligible_patch_images(&f, args.count, args.min_drop, args.seed)?;

    let mut csv = String::from("index,ig,grad\n");
    let mut wins = 0usize;
    let mut ig_total = 0.0;
    let mut grad_total = 0.0;
    for (i, img) in images.iter().enumerate() {
        let path = scaling_path(&img.image, None)?;
        let ig = integrated_gradients(&f, &path, args.steps)?;
        let grad = gradient_attribution(&f, &path)?;
        let boxes = [img.bbox.expect("eligible images have boxes")];
        let ig_frac = localization_score(&pixel_importance(&ig.values)?, &boxes);
        let grad_frac = localization_score(&pixel_importance(&grad.values)?, &boxes);
        if ig_frac > grad_frac {
            wins += 1;
        }
        ig_total += ig_frac;
        grad_total += grad_frac;
        let _ = writeln!(csv, "{i},{ig_frac},{grad_frac}");
    }
    write_text(&args.out.join("localize.csv"), &csv)?;
    let n = images.len();
    let mut report = String::new();
    let _ = writeln!(report, "eligible images: {n}");
    let _ = writeln!(report, "ig wins: {wins}");
    let _ = writeln!(report, "mean in-box fraction (ig): {}", ig_total / n as f64);
    let _ = writeln!(
        report,
        "mean in-box fraction (grad): {}",
        grad_total / n as f64
    );
    let _ = writeln!(report, "strict majority for ig: {}", 2 * wins > n);
    write_text(&args.out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

pub fn converge(args: &ConvergeArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let p = prepare(&args.model, &args.input, args.class)?;
    let f = scalar_fn(&p)?;
    let baseline = load_companion(args.baseline.as_deref(), &p.x, &p.arch)?;
    let path = scaling_path(&p.x, Some(&baseline))?;
    let curve = riemann_convergence(&f, &path, &args.m_list)?;
    write_text(&args.out.join("convergence.csv"), &curve.to_csv())?;
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let pair = models::equivalent_pair();
    let x = Tensor::from_slice(&[1.0, 2.0]);
    let reference = Tensor::from_slice(&[0.0, 0.0]);
    let path = scaling_path(&x, Some(&reference))?;

    let methods: [(&str, BackpropRule); 4] = [
        (
            "deeplift",
            BackpropRule::DeepliftRescale {
                reference: reference.clone(),
            },
        ),
        (
            "lrp",
            BackpropRule::LrpEpsilon {
                epsilon: args.epsilon,
            },
        ),
        ("deconvnet", BackpropRule::Deconvnet),
        ("guided", BackpropRule::GuidedBackprop),
    ];

    let mut csv = String::from("method,net,x1,x2\n");
    let mut report = String::new();
    let _ = writeln!(report, "input: (1, 2)   baseline/reference: (0, 0)");

    let fa = ScalarFn::single(&pair.net_a)?;
    let fb = ScalarFn::single(&pair.net_b)?;

    // Integrated gradients first: the invariant method.
    let ig_a = integrated_gradients(&fa, &path, args.steps)?;
    let ig_b = integrated_gradients(&fb, &path, args.steps)?;
    for (net, r) in [("A", &ig_a), ("B", &ig_b)] {
        let _ = writeln!(csv, "ig,{net},{},{}", r.values.data()[0], r.values.data()[1]);
    }
    let ig_diff = ig_a.values.max_abs_diff(&ig_b.values);
    let tolerance = 10.0 * ig_a.completeness_gap.max(ig_b.completeness_gap);
    let _ = writeln!(
        report,
        "ig: max|netA−netB| = {ig_diff} (tolerance 10×gap = {tolerance}) → {}",
        if ig_diff <= tolerance { "matches" } else { "DIFFERS" }
    );

    let grad_a = gradient_attribution(&fa, &path)?;
    let grad_b = gradient_attribution(&fb, &path)?;
    for (net, r) in [("A", &grad_a), ("B", &grad_b)] {
        let _ = writeln!(csv, "grad,{net},{},{}", r.values.data()[0], r.values.data()[1]);
    }
    let _ = writeln!(
        report,
        "grad: max|netA−netB| = {} (gradients agree wherever the function is differentiable)",
        grad_a.values.max_abs_diff(&grad_b.values)
    );

    for (name, rule) in &methods {
        let ra = run_rule(&fa, &x, rule)?;
        let rb = run_rule(&fb, &x, rule)?;
        for (net, r) in [("A", &ra), ("B", &rb)] {
            let _ = writeln!(
                csv,
                "{name},{net},{},{}",
                r.values.data()[0],
                r.values.data()[1]
            );
        }
        let diff = ra.values.max_abs_diff(&rb.values);
        let _ = writeln!(
            report,
            "{name}: max|netA−netB| = {diff} → {}",
            if diff > 1e-3 { "differs" } else { "MATCHES" }
        );
    }

    write_text(&args.out.join("compare.csv"), &csv)?;
    write_text(&args.out.join("compare.txt"), &report)?;
    print!("{report}");
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let (mut task, tag) = match args.dataset {
        DatasetTag::Blobs => (models::blob_task(args.seed)?, "blobs"),
        DatasetTag::Patches => (models::patch_task(args.seed)?, "patches"),
        DatasetTag::Copytokens => (models::copytoken_task(args.seed)?, "copytokens"),
    };
    if let Some(epochs) = args.epochs {
        task.config.epochs = epochs;
    }
    if let Some(lr) = args.lr {
        task.config.learning_rate = lr;
    }
    let trained = train_toy(&task.net, &task.data, &task.config)?;
    let acc = accuracy(&trained, &task.data)?;
    let model_path: PathBuf = args.out.join(format!("{tag}.model"));
    save_model(&model_path, &task.arch, &trained)?;
    println!("dataset: {tag}");
    println!("epochs: {}", task.config.epochs);
    println!("learning rate: {}", task.config.learning_rate);
    println!("training accuracy: {acc}");
    println!("model written: {}", model_path.display());
    Ok(())
}
