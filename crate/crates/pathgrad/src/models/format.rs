//! Model file format: a line-oriented text header followed by raw
//! little-endian f64 parameter data.
//!
//! ```text
//! pathgrad-model v1
//! arch mlp sizes=2,1 hidden=identity head=none
//! param w0 1 2
//! param b0 1
//! data
//! <f64 little-endian bytes, parameters in declaration order>
//! ```
//!
//! The grammar is documented in full in the book's model-format chapter.
//! Round trips are bit-exact: save → load reproduces identical forward
//! outputs. Malformed files, unsupported versions, and parameter/shape
//! inconsistencies are three distinct errors.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::models::{
    build_convnet, build_lstm_lm, build_mlp, Activation, ConvStep, Head, LstmLm,
};
use crate::tensor::Tensor;

const MAGIC: &str = "pathgrad-model";
const VERSION: &str = "v1";

/// Architecture descriptor: enough to rebuild the graph skeleton.
#[derive(Clone, Debug, PartialEq)]
pub enum Arch {
    Mlp {
        sizes: Vec<usize>,
        hidden: Activation,
        head: Head,
    },
    Conv {
        input: [usize; 3],
        plan: Vec<ConvStep>,
    },
    Lstm {
        vocab: usize,
        embed_dim: usize,
        hidden: usize,
        seq_len: usize,
    },
}

/// Parsed model: architecture plus named parameter tensors in declaration
/// order.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub arch: Arch,
    pub params: Vec<(String, Tensor)>,
}

impl ModelSpec {
    /// Rebuild the network: construct the architecture's canonical graph
    /// and substitute the stored parameters.
    pub fn build(&self) -> Result<Network> {
        let skeleton = match &self.arch {
            Arch::Mlp {
                sizes,
                hidden,
                head,
            } => build_mlp(sizes, *hidden, *head, 0)?,
            Arch::Conv { input, plan } => build_convnet(*input, plan, 0)?,
            Arch::Lstm {
                vocab,
                embed_dim,
                hidden,
                seq_len,
            } => build_lstm_lm(*vocab, *embed_dim, *hidden, *seq_len, 0)?
                .token_net()
                .clone(),
        };
        if skeleton.param_names().len() != self.params.len() {
            return Err(Error::ModelShapeInconsistent(format!(
                "architecture declares {} parameters, file provides {}",
                skeleton.param_names().len(),
                self.params.len()
            )));
        }
        let mut net = skeleton;
        for (name, tensor) in &self.params {
            let expected = net
                .param(name)
                .map_err(|_| {
                    Error::ModelShapeInconsistent(format!(
                        "parameter '{name}' is not part of the architecture"
                    ))
                })?
                .shape()
                .to_vec();
            if expected != tensor.shape() {
                return Err(Error::ModelShapeInconsistent(format!(
                    "parameter '{name}': architecture expects shape {expected:?}, file has {:?}",
                    tensor.shape()
                )));
            }
            net.set_param_unchecked(name, tensor.clone());
        }
        Ok(net)
    }

    /// For LSTM specs, rebuild the full language-model wrapper.
    pub fn build_lstm(&self) -> Result<LstmLm> {
        match self.arch {
            Arch::Lstm {
                vocab,
                embed_dim,
                hidden,
                seq_len,
            } => {
                let net = self.build()?;
                Ok(build_lstm_lm(vocab, embed_dim, hidden, seq_len, 0)?.with_net(net))
            }
            _ => Err(Error::InvalidArg("model is not an LSTM".into())),
        }
    }
}

fn activation_token(a: Activation) -> &'static str {
    match a {
        Activation::Identity => "identity",
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
        Activation::Tanh => "tanh",
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    Ok(match s {
        "identity" => Activation::Identity,
        "relu" => Activation::Relu,
        "sigmoid" => Activation::Sigmoid,
        "tanh" => Activation::Tanh,
        other => return Err(Error::MalformedModel(format!("unknown activation '{other}'"))),
    })
}

fn head_token(h: Head) -> &'static str {
    match h {
        Head::None => "none",
        Head::Sigmoid => "sigmoid",
        Head::Softmax => "softmax",
    }
}

fn parse_head(s: &str) -> Result<Head> {
    Ok(match s {
        "none" => Head::None,
        "sigmoid" => Head::Sigmoid,
        "softmax" => Head::Softmax,
        other => return Err(Error::MalformedModel(format!("unknown head '{other}'"))),
    })
}

fn plan_token(step: &ConvStep) -> String {
    match step {
        ConvStep::Conv { kernel, channels } => format!("conv:{kernel}:{channels}"),
        ConvStep::Relu => "relu".into(),
        ConvStep::AvgPool { window } => format!("avgpool:{window}"),
        ConvStep::MaxPool { window } => format!("maxpool:{window}"),
        ConvStep::Flatten => "flatten".into(),
        ConvStep::Dense { units } => format!("dense:{units}"),
        ConvStep::Softmax => "softmax".into(),
    }
}

fn parse_plan_token(s: &str) -> Result<ConvStep> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::MalformedModel(format!("unknown plan step '{s}'"));
    let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
    Ok(match parts.as_slice() {
        ["conv", k, c] => ConvStep::Conv {
            kernel: num(k)?,
            channels: num(c)?,
        },
        ["relu"] => ConvStep::Relu,
        ["avgpool", w] => ConvStep::AvgPool { window: num(w)? },
        ["maxpool", w] => ConvStep::MaxPool { window: num(w)? },
        ["flatten"] => ConvStep::Flatten,
        ["dense", u] => ConvStep::Dense { units: num(u)? },
        ["softmax"] => ConvStep::Softmax,
        _ => return Err(bad()),
    })
}

fn arch_line(arch: &Arch) -> String {
    match arch {
        Arch::Mlp {
            sizes,
            hidden,
            head,
        } => format!(
            "arch mlp sizes={} hidden={} head={}",
            sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
            activation_token(*hidden),
            head_token(*head)
        ),
        Arch::Conv { input, plan } => format!(
            "arch conv input={}x{}x{} plan={}",
            input[0],
            input[1],
            input[2],
            plan.iter().map(plan_token).collect::<Vec<_>>().join(",")
        ),
        Arch::Lstm {
            vocab,
            embed_dim,
            hidden,
            seq_len,
        } => format!("arch lstm vocab={vocab} embed={embed_dim} hidden={hidden} seq={seq_len}"),
    }
}

fn kv<'a>(fields: &'a [&str], key: &str, line: &str) -> Result<&'a str> {
    fields
        .iter()
        .find_map(|f| f.strip_prefix(&format!("{key}=")[..]).or_else(|| {
            f.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
        }))
        .ok_or_else(|| Error::MalformedModel(format!("missing {key}= in '{line}'")))
}

fn parse_arch_line(line: &str) -> Result<Arch> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 || fields[0] != "arch" {
        return Err(Error::MalformedModel(format!("bad arch line '{line}'")));
    }
    let rest = &fields[2..];
    match fields[1] {
        "mlp" => {
            let sizes = kv(rest, "sizes", line)?
                .split(',')
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::MalformedModel(format!("bad size '{s}'")))
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok(Arch::Mlp {
                sizes,
                hidden: parse_activation(kv(rest, "hidden", line)?)?,
                head: parse_head(kv(rest, "head", line)?)?,
            })
        }
        "conv" => {
            let dims = kv(rest, "input", line)?
                .split('x')
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::MalformedModel(format!("bad input dim '{s}'")))
                })
                .collect::<Result<Vec<usize>>>()?;
            if dims.len() != 3 {
                return Err(Error::MalformedModel(format!(
                    "conv input needs HxWxC, got '{line}'"
                )));
            }
            let plan = kv(rest, "plan", line)?
                .split(',')
                .map(parse_plan_token)
                .collect::<Result<Vec<ConvStep>>>()?;
            Ok(Arch::Conv {
                input: [dims[0], dims[1], dims[2]],
                plan,
            })
        }
        "lstm" => {
            let num = |key: &str| -> Result<usize> {
                kv(rest, key, line)?
                    .parse::<usize>()
                    .map_err(|_| Error::MalformedModel(format!("bad {key} in '{line}'")))
            };
            Ok(Arch::Lstm {
                vocab: num("vocab")?,
                embed_dim: num("embed")?,
                hidden: num("hidden")?,
                seq_len: num("seq")?,
            })
        }
        other => Err(Error::MalformedModel(format!("unknown arch kind '{other}'"))),
    }
}

/// Serialize the architecture and the network's parameters (in declaration
/// order) to `path`.
pub fn save_model(path: &Path, arch: &Arch, net: &Network) -> Result<()> {
    let mut header = String::new();
    header.push_str(&format!("{MAGIC} {VERSION}\n"));
    header.push_str(&arch_line(arch));
    header.push('\n');
    let mut blob: Vec<u8> = Vec::new();
    for name in net.param_names() {
        let t = net.param(name)?;
        header.push_str(&format!(
            "param {name} {}\n",
            t.shape()
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        ));
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    header.push_str("data\n");
    let mut bytes = header.into_bytes();
    bytes.extend_from_slice(&blob);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Parse a model file. See the module docs for the grammar.
pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let bytes = std::fs::read(path)?;
    parse_model(&bytes)
}

pub(crate) fn parse_model(bytes: &[u8]) -> Result<ModelSpec> {
    // Split the text header (up to and including the "data" line) from the
    // binary payload.
    let mut lines: Vec<String> = Vec::new();
    let mut pos = 0usize;
    let mut body_start = None;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|e| pos + e)
            .ok_or_else(|| Error::MalformedModel("header has no data line".into()))?;
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::MalformedModel("non-UTF-8 header".into()))?
            .to_string();
        pos = end + 1;
        if line == "data" {
            body_start = Some(pos);
            break;
        }
        lines.push(line);
    }
    let body_start =
        body_start.ok_or_else(|| Error::MalformedModel("header has no data line".into()))?;

    if lines.is_empty() {
        return Err(Error::MalformedModel("empty header".into()));
    }
    let magic_fields: Vec<&str> = lines[0].split_whitespace().collect();
    match magic_fields.as_slice() {
        [m, v] if *m == MAGIC && *v == VERSION => {}
        [m, v] if *m == MAGIC => {
            return Err(Error::ModelVersionMismatch((*v).into()));
        }
        _ => {
            return Err(Error::MalformedModel(format!(
                "bad magic line '{}'",
                lines[0]
            )))
        }
    }
    if lines.len() < 2 {
        return Err(Error::MalformedModel("missing arch line".into()));
    }
    let arch = parse_arch_line(&lines[1])?;

    let mut declared: Vec<(String, Vec<usize>)> = Vec::new();
    for line in &lines[2..] {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 || fields[0] != "param" {
            return Err(Error::MalformedModel(format!("bad param line '{line}'")));
        }
        let shape = fields[2..]
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::MalformedModel(format!("bad dimension '{s}'")))
            })
            .collect::<Result<Vec<usize>>>()?;
        declared.push((fields[1].to_string(), shape));
    }

    let total: usize = declared
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum();
    let body = &bytes[body_start..];
    if body.len() != total * 8 {
        return Err(Error::MalformedModel(format!(
            "parameter data is {} bytes, expected {}",
            body.len(),
            total * 8
        )));
    }

    let mut params = Vec::with_capacity(declared.len());
    let mut offset = 0usize;
    for (name, shape) in declared {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let start = offset + i * 8;
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&body[start..start + 8]);
            data.push(f64::from_le_bytes(buf));
        }
        offset += n * 8;
        params.push((
            name,
            Tensor::new(shape, data)
                .map_err(|e| Error::MalformedModel(format!("bad tensor: {e}")))?,
        ));
    }
    Ok(ModelSpec { arch, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::forward_output;
    use crate::models::{linear_model, patch_classifier_plan};

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("pathgrad-test-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn save_load_roundtrip_is_bit_exact() {
        let net = build_convnet([8, 8, 1], &patch_classifier_plan(), 3).unwrap();
        let arch = Arch::Conv {
            input: [8, 8, 1],
            plan: patch_classifier_plan(),
        };
        let path = tmp("conv.model");
        save_model(&path, &arch, &net).unwrap();
        let spec = load_model(&path).unwrap();
        let rebuilt = spec.build().unwrap();
        let x = Tensor::new(vec![8, 8, 1], (0..64).map(|i| i as f64 / 64.0).collect()).unwrap();
        let target = crate::models::one_hot(0, 2);
        let a = forward_output(&net, "probs", &[("x", &x), ("target", &target)]).unwrap();
        let b = forward_output(&rebuilt, "probs", &[("x", &x), ("target", &target)]).unwrap();
        assert_eq!(a.data(), b.data());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn truncated_file_is_malformed() {
        let net = linear_model(&[2.0, 3.0], 0.0).unwrap();
        let arch = Arch::Mlp {
            sizes: vec![2, 1],
            hidden: Activation::Identity,
            head: Head::None,
        };
        let path = tmp("trunc.model");
        save_model(&path, &arch, &net).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(
            parse_model(&bytes),
            Err(Error::MalformedModel(_))
        ));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn version_mismatch_is_distinct() {
        let bytes = b"pathgrad-model v9\narch mlp sizes=1,1 hidden=identity head=none\ndata\n";
        assert!(matches!(
            parse_model(bytes),
            Err(Error::ModelVersionMismatch(v)) if v == "v9"
        ));
    }

    #[test]
    fn shape_inconsistency_is_distinct() {
        // b0 declared with the wrong shape for a [2,1] MLP.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"pathgrad-model v1\narch mlp sizes=2,1 hidden=identity head=none\nparam w0 1 2\nparam b0 2\ndata\n",
        );
        for v in [2.0f64, 3.0, 0.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let spec = parse_model(&bytes).unwrap();
        assert!(matches!(
            spec.build(),
            Err(Error::ModelShapeInconsistent(_))
        ));
    }

    #[test]
    fn handwritten_minimal_file_loads_to_linear_model() {
        // The documented golden example: F(x) = 2 x1 + 3 x2.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"pathgrad-model v1\narch mlp sizes=2,1 hidden=identity head=none\nparam w0 1 2\nparam b0 1\ndata\n",
        );
        for v in [2.0f64, 3.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let spec = parse_model(&bytes).unwrap();
        let net = spec.build().unwrap();
        let x = Tensor::from_slice(&[1.0, 1.0]);
        let out = forward_output(&net, "out", &[("x", &x)]).unwrap();
        assert_eq!(out.item(), 5.0);
    }

    #[test]
    fn lstm_roundtrip_preserves_scores() {
        let lm = build_lstm_lm(5, 3, 4, 6, 21).unwrap();
        let arch = Arch::Lstm {
            vocab: 5,
            embed_dim: 3,
            hidden: 4,
            seq_len: 6,
        };
        let path = tmp("lstm.model");
        save_model(&path, &arch, lm.token_net()).unwrap();
        let spec = load_model(&path).unwrap();
        let rebuilt = spec.build_lstm().unwrap();
        let tokens = Tensor::from_slice(&[0.0, 1.0, 2.0, 3.0, 4.0, 0.0]);
        let target = lm.one_hot(2);
        let a = forward_output(
            lm.token_net(),
            "score",
            &[("tokens", &tokens), ("target", &target)],
        )
        .unwrap();
        let b = forward_output(
            rebuilt.token_net(),
            "score",
            &[("tokens", &tokens), ("target", &target)],
        )
        .unwrap();
        assert_eq!(a.item(), b.item());
        std::fs::remove_file(&path).ok();
    }
}
