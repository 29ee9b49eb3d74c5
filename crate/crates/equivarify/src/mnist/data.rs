//! Joint (digit, angle) samples and their equivariant 40-slot encoding.
//!
//! Labels are angle-major blocks of ten: slot = angle_index * 10 + digit,
//! so a 90-degree input rotation is literally a shift by ten slots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::GroupAction;
use crate::error::{Error, Result};
use crate::nn::layer::softmax;
use crate::nn::tensor::Tensor;

pub const NUM_DIGITS: usize = 10;
pub const NUM_ANGLES: usize = 4;
pub const NUM_CLASSES: usize = NUM_DIGITS * NUM_ANGLES;

#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub image: Tensor,
    pub digit: u8,
    pub angle_index: u8,
}

impl LabeledSample {
    pub fn joint_class(&self) -> usize {
        self.angle_index as usize * NUM_DIGITS + self.digit as usize
    }

    pub fn joint_label(&self) -> Tensor {
        encode_label(self.digit, self.angle_index).expect("fields validated at construction")
    }
}

/// One-hot vector in R^40 at slot `angle_index * 10 + digit`.
pub fn encode_label(digit: u8, angle_index: u8) -> Result<Tensor> {
    if digit as usize >= NUM_DIGITS || angle_index as usize >= NUM_ANGLES {
        return Err(Error::Label(format!(
            "digit {digit} / angle {angle_index} out of range"
        )));
    }
    let mut v = Tensor::zeros(vec![NUM_CLASSES]);
    v.data_mut()[angle_index as usize * NUM_DIGITS + digit as usize] = 1.0;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotatePolicy {
    /// Every sample kept at angle 0.
    None,
    /// Uniform seeded choice over the four angles.
    Random,
}

impl std::str::FromStr for RotatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RotatePolicy::None),
            "random" => Ok(RotatePolicy::Random),
            _ => Err(Error::Config(format!("unknown rotate policy {s:?}"))),
        }
    }
}

/// Applies the rotation policy with the exact pixel-permutation action
/// and records the angle index in the label.
pub fn prepare_dataset(
    samples: &[(Tensor, u8)],
    rot90: &GroupAction<Tensor>,
    policy: RotatePolicy,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples
        .iter()
        .map(|(image, digit)| {
            let angle_index = match policy {
                RotatePolicy::None => 0u8,
                RotatePolicy::Random => rng.gen_range(0..NUM_ANGLES as u8),
            };
            let image = if angle_index == 0 {
                image.clone()
            } else {
                rot90.apply(angle_index as usize, image)?
            };
            Ok(LabeledSample {
                image,
                digit: *digit,
                angle_index,
            })
        })
        .collect()
}

/// Digit marginal of a 40-logit output: softmax probabilities summed over
/// the four angle blocks. Invariant under input rotation because the
/// summands are identical up to reordering.
pub fn digit_marginal(logits: &Tensor) -> Result<Tensor> {
    if logits.len() != NUM_CLASSES {
        return Err(Error::Shape(format!(
            "expected {NUM_CLASSES} logits, got {}",
            logits.len()
        )));
    }
    let probs = softmax(logits.data());
    let mut out = Tensor::zeros(vec![NUM_DIGITS]);
    for a in 0..NUM_ANGLES {
        for d in 0..NUM_DIGITS {
            out.data_mut()[d] += probs[a * NUM_DIGITS + d];
        }
    }
    Ok(out)
}

/// Argmax helper with first-wins tie-breaking.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
