//! Runtime equivariance verification on trained models: rotating an input
//! by k quarter turns must shift the 40-dim output by exactly 10k slots.

use std::sync::Arc;

use crate::action::{block_shift_perm, rot90_action};
use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::mnist::data::{argmax, NUM_ANGLES, NUM_DIGITS};
use crate::nn::model::Model;
use crate::nn::tensor::Tensor;

pub struct VerifyRow {
    pub image_index: usize,
    pub rotation: usize,
    pub predicted_digit: usize,
    pub predicted_angle: usize,
    pub top_prob: f64,
    /// Max abs deviation from the shifted base output; 0.0 means bit-equal.
    pub deviation: f64,
    pub exact: bool,
}

pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub max_deviation: f64,
    pub all_exact: bool,
    /// True when every rotated copy predicts the same digit with the
    /// expected angle offset.
    pub predictions_consistent: bool,
}

impl VerifyReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from(
            "image  rot    pred-digit  pred-angle  top-prob  max-deviation  exact\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>5} {:>4} {:>11} {:>10} {:>9.4} {:>14.3e} {:>6}\n",
                r.image_index,
                format!("{}°", r.rotation * 90),
                r.predicted_digit,
                format!("{}°", r.predicted_angle * 90),
                r.top_prob,
                r.deviation,
                if r.exact { "yes" } else { "NO" }
            ));
        }
        s.push_str(&format!(
            "\nmax deviation {:.3e}; output shift exact for all rotations: {}\n",
            self.max_deviation,
            if self.all_exact { "yes" } else { "NO" }
        ));
        s.push_str(&format!(
            "predictions consistent under rotation: {}\n",
            if self.predictions_consistent { "yes" } else { "NO" }
        ));
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("image,rotation_deg,pred_digit,pred_angle_deg,top_prob,deviation,exact\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:.6},{:.17e},{}\n",
                r.image_index,
                r.rotation * 90,
                r.predicted_digit,
                r.predicted_angle * 90,
                r.top_prob,
                r.deviation,
                r.exact
            ));
        }
        s
    }
}

/// Feeds each image and its three quarter-turn rotations through the
/// model and checks the exact output-shift law.
pub fn verify_equivariance(model: &Model, images: &[Tensor]) -> Result<VerifyReport> {
    if images.is_empty() {
        return Err(Error::Verify("no images to verify".into()));
    }
    let group = Arc::new(FiniteGroup::cyclic(4)?);
    let rot = rot90_action(Arc::clone(&group), 28, 28, 1)?;
    let mut rows = Vec::new();
    let mut max_deviation = 0.0f64;
    let mut all_exact = true;
    let mut predictions_consistent = true;
    for (idx, image) in images.iter().enumerate() {
        let base = model.forward(image)?;
        let base_pred = argmax(base.data());
        for k in 0..NUM_ANGLES {
            let out = model.forward(&rot.apply(k, image)?)?;
            let expected = base.permuted(&block_shift_perm(&group, k, NUM_DIGITS))?;
            let deviation = out.max_abs_diff(&expected);
            let exact = out == expected;
            let pred = argmax(out.data());
            let probs = crate::nn::layer::softmax(out.data());
            // rotating by k should add k to the predicted angle block
            let want = ((base_pred / NUM_DIGITS + k) % NUM_ANGLES) * NUM_DIGITS
                + base_pred % NUM_DIGITS;
            if pred != want {
                predictions_consistent = false;
            }
            max_deviation = max_deviation.max(deviation);
            all_exact &= exact;
            rows.push(VerifyRow {
                image_index: idx,
                rotation: k,
                predicted_digit: pred % NUM_DIGITS,
                predicted_angle: pred / NUM_DIGITS,
                top_prob: probs[pred],
                deviation,
                exact,
            });
        }
    }
    Ok(VerifyReport {
        rows,
        max_deviation,
        all_exact,
        predictions_consistent,
    })
}
