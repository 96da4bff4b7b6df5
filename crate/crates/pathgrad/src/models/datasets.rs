//! Synthetic datasets, one per experiment, each with ground truth by
//! construction.
//!
//! * Gaussian blobs: linearly separable 2D classes for the logistic model.
//! * Object-patch images: a bright patch on a dark noisy background whose
//!   bounding box is known exactly, standing in for human-drawn boxes in
//!   the ablation and localization protocols.
//! * Repetition corpus: length-10 token sequences where the last token
//!   repeats an earlier one and the next word is that repeated token.

use crate::evaluation::BoundingBox;
use crate::models::train::Dataset;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Side length of the synthetic images.
pub const IMAGE_SIZE: usize = 16;
/// Side length of the bright object patch.
pub const PATCH_SIZE: usize = 4;

/// Two separable Gaussian blobs in 2D; class 0 near (−1.5,−1.5), class 1
/// near (1.5, 1.5).
pub fn gaussian_blobs(n_per_class: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut items = Vec::with_capacity(2 * n_per_class);
    for label in 0..2usize {
        let center = if label == 0 { -1.5 } else { 1.5 };
        for _ in 0..n_per_class {
            let x = center + 0.5 * rng.normal();
            let y = center + 0.5 * rng.normal();
            items.push((Tensor::from_slice(&[x, y]), label));
        }
    }
    rng.shuffle(&mut items);
    Dataset { items, classes: 2 }
}

/// One synthetic image: label 1 images carry a bright patch with its
/// bounding box; label 0 images are background only.
#[derive(Clone, Debug)]
pub struct PatchImage {
    pub image: Tensor,
    pub label: usize,
    pub bbox: Option<BoundingBox>,
}

pub(crate) fn gen_patch_image(rng: &mut Rng, with_patch: bool) -> PatchImage {
    let n = IMAGE_SIZE;
    let mut data: Vec<f64> = (0..n * n).map(|_| rng.uniform(0.0, 0.25)).collect();
    let bbox = if with_patch {
        let row = rng.below(n - PATCH_SIZE + 1);
        let col = rng.below(n - PATCH_SIZE + 1);
        for r in row..row + PATCH_SIZE {
            for c in col..col + PATCH_SIZE {
                data[r * n + c] = rng.uniform(0.75, 1.0);
            }
        }
        Some(BoundingBox::new(col, row, col + PATCH_SIZE, row + PATCH_SIZE).expect("patch box"))
    } else {
        None
    };
    PatchImage {
        image: Tensor::new(vec![n, n, 1], data).expect("image shape"),
        label: usize::from(with_patch),
        bbox,
    }
}

/// Balanced set of patch/no-patch images.
pub fn object_patch_images(n: usize, seed: u64) -> Vec<PatchImage> {
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(gen_patch_image(&mut rng, i % 2 == 0));
    }
    out
}

/// The patch images as a labelled training set.
pub fn patch_dataset(n: usize, seed: u64) -> Dataset {
    let items = object_patch_images(n, seed)
        .into_iter()
        .map(|p| (p.image, p.label))
        .collect();
    Dataset { items, classes: 2 }
}

/// Token sequences of length `seq_len` where position `seq_len − 1` repeats
/// an earlier token, and the target (next word) is that repeated token.
/// All other positions are distinct from the repeated token.
pub fn repetition_corpus(
    n: usize,
    vocab: usize,
    seq_len: usize,
    seed: u64,
) -> Vec<(Vec<usize>, usize)> {
    assert!(vocab >= 2, "repetition corpus needs at least two tokens");
    assert!(seq_len >= 2);
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let repeated = rng.below(vocab);
        let source = rng.below(seq_len - 1);
        let mut tokens = Vec::with_capacity(seq_len);
        for pos in 0..seq_len - 1 {
            if pos == source {
                tokens.push(repeated);
            } else {
                let mut t = rng.below(vocab);
                while t == repeated {
                    t = rng.below(vocab);
                }
                tokens.push(t);
            }
        }
        tokens.push(repeated);
        out.push((tokens, repeated));
    }
    out
}

/// Repetition corpus as a trainable dataset (tokens as f64 ids).
pub fn repetition_dataset(n: usize, vocab: usize, seq_len: usize, seed: u64) -> Dataset {
    let items = repetition_corpus(n, vocab, seq_len, seed)
        .into_iter()
        .map(|(tokens, target)| {
            (
                Tensor::from_vec(tokens.into_iter().map(|t| t as f64).collect()),
                target,
            )
        })
        .collect();
    Dataset {
        items,
        classes: vocab,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_balanced_and_in_range() {
        let d = gaussian_blobs(50, 1);
        assert_eq!(d.items.len(), 100);
        assert_eq!(d.items.iter().filter(|(_, l)| *l == 1).count(), 50);
    }

    #[test]
    fn patch_images_have_boxes_only_when_labeled() {
        for img in object_patch_images(20, 3) {
            assert_eq!(img.bbox.is_some(), img.label == 1);
            if let Some(b) = img.bbox {
                b.validate_for(IMAGE_SIZE, IMAGE_SIZE).unwrap();
                // The patch really is brighter than anything outside it.
                for r in b.y0..b.y1 {
                    for c in b.x0..b.x1 {
                        assert!(img.image.get(&[r, c, 0]) >= 0.75);
                    }
                }
            }
        }
    }

    #[test]
    fn repetition_corpus_repeats_exactly_once() {
        for (tokens, target) in repetition_corpus(50, 8, 10, 7) {
            assert_eq!(*tokens.last().unwrap(), target);
            let occurrences = tokens.iter().filter(|&&t| t == target).count();
            assert_eq!(occurrences, 2, "tokens {tokens:?} target {target}");
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = object_patch_images(6, 11);
        let b = object_patch_images(6, 11);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image.data(), y.image.data());
            assert_eq!(x.bbox, y.bbox);
        }
    }
}
