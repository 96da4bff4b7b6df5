//! Input ingestion: each model family reads its natural input kind.
//!
//! * conv models — binary PGM (P5) or PPM (P6) images,
//! * mlp models — a CSV of named features, one `name,value` line each,
//! * lstm models — a text file of whitespace-separated token ids.

use std::path::Path;

use pathgrad::error::{Error, Result};
use pathgrad::image::read_image;
use pathgrad::models::Arch;
use pathgrad::Tensor;

pub enum LoadedInput {
    /// [H, W, C] in [0, 1].
    Image(Tensor),
    /// Flat feature vector with names in file order.
    Features { names: Vec<String>, tensor: Tensor },
    Tokens(Vec<usize>),
}

impl LoadedInput {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedInput::Image(_) => "image",
            LoadedInput::Features { .. } => "features",
            LoadedInput::Tokens(_) => "tokens",
        }
    }
}

pub fn load_features(path: &Path) -> Result<(Vec<String>, Tensor)> {
    let text = std::fs::read_to_string(path)?;
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, value) = line.split_once(',').ok_or_else(|| {
            Error::InvalidArg(format!(
                "{}:{}: expected 'name,value'",
                path.display(),
                lineno + 1
            ))
        })?;
        let v: f64 = value.trim().parse().map_err(|_| {
            Error::InvalidArg(format!(
                "{}:{}: bad value '{}'",
                path.display(),
                lineno + 1,
                value.trim()
            ))
        })?;
        names.push(name.trim().to_string());
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::InvalidArg(format!(
            "{}: no feature rows",
            path.display()
        )));
    }
    Ok((names, Tensor::from_vec(values)))
}

pub fn load_tokens(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| {
                Error::InvalidArg(format!("{}: bad token id '{tok}'", path.display()))
            })
        })
        .collect()
}

/// Load the input in the form the architecture expects, validating shape.
pub fn load_input(path: &Path, arch: &Arch) -> Result<LoadedInput> {
    match arch {
        Arch::Conv { input, .. } => {
            let img = read_image(path)?;
            if img.shape() != input {
                return Err(Error::ShapeMismatch {
                    context: format!("image {}", path.display()),
                    expected: input.to_vec(),
                    got: img.shape().to_vec(),
                });
            }
            Ok(LoadedInput::Image(img))
        }
        Arch::Mlp { sizes, .. } => {
            let (names, tensor) = load_features(path)?;
            if tensor.numel() != sizes[0] {
                return Err(Error::ShapeMismatch {
                    context: format!("features {}", path.display()),
                    expected: vec![sizes[0]],
                    got: vec![tensor.numel()],
                });
            }
            Ok(LoadedInput::Features { names, tensor })
        }
        Arch::Lstm { vocab, seq_len, .. } => {
            let tokens = load_tokens(path)?;
            if tokens.len() != *seq_len {
                return Err(Error::InvalidArg(format!(
                    "{}: expected {seq_len} tokens, found {}",
                    path.display(),
                    tokens.len()
                )));
            }
            if let Some(bad) = tokens.iter().find(|&&t| t >= *vocab) {
                return Err(Error::InvalidArg(format!(
                    "{}: token {bad} outside vocabulary of {vocab}",
                    path.display()
                )));
            }
            Ok(LoadedInput::Tokens(tokens))
        }
    }
}

/// Bounding-box sidecar file: one `x0 y0 x1 y1` per line (inclusive-
/// exclusive pixel coordinates), blank lines and `#` comments skipped.
pub fn load_boxes(path: &Path) -> Result<Vec<pathgrad::evaluation::BoundingBox>> {
    let text = std::fs::read_to_string(path)?;
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<usize> = line
            .split_whitespace()
            .map(|f| {
                f.parse::<usize>().map_err(|_| {
                    Error::InvalidArg(format!(
                        "{}:{}: bad coordinate '{f}'",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        match fields.as_slice() {
            [x0, y0, x1, y1] => boxes.push(pathgrad::evaluation::BoundingBox::new(
                *x0, *y0, *x1, *y1,
            )?),
            _ => {
                return Err(Error::InvalidArg(format!(
                    "{}:{}: expected 'x0 y0 x1 y1'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if boxes.is_empty() {
        return Err(Error::InvalidArg(format!(
            "{}: no boxes",
            path.display()
        )));
    }
    Ok(boxes)
}

/// Load a same-kind tensor (baseline or DeepLift reference) or default to
/// zeros of `like`'s shape.
pub fn load_companion(path: Option<&Path>, like: &Tensor, arch: &Arch) -> Result<Tensor> {
    match path {
        None => Ok(Tensor::zeros(like.shape())),
        Some(p) => {
            let t = match arch {
                Arch::Conv { .. } => read_image(p)?,
                Arch::Mlp { .. } => load_features(p)?.1,
                Arch::Lstm { .. } => {
                    return Err(Error::InvalidArg(
                        "token models use the zero embedding as baseline/reference".into(),
                    ))
                }
            };
            if t.shape() != like.shape() {
                return Err(Error::ShapeMismatch {
                    context: format!("companion input {}", p.display()),
                    expected: like.shape().to_vec(),
                    got: t.shape().to_vec(),
                });
            }
            Ok(t)
        }
    }
}
