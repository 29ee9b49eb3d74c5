//! Test-set evaluation: joint, digit and angle accuracy plus a per-digit
//! angle-confusion summary.

use crate::error::Result;
use crate::mnist::data::{argmax, LabeledSample, NUM_ANGLES, NUM_DIGITS};
use crate::nn::model::Model;

pub struct EvalReport {
    pub samples: usize,
    pub joint_correct: usize,
    pub digit_correct: usize,
    pub angle_correct: usize,
    /// `angle_confusion[true_angle][pred_angle]`, over all samples.
    pub angle_confusion: [[usize; NUM_ANGLES]; NUM_ANGLES],
    /// Per true digit: (count, joint correct).
    pub per_digit: [(usize, usize); NUM_DIGITS],
}

impl EvalReport {
    pub fn joint_accuracy(&self) -> f64 {
        self.joint_correct as f64 / self.samples as f64
    }

    pub fn digit_accuracy(&self) -> f64 {
        self.digit_correct as f64 / self.samples as f64
    }

    pub fn angle_accuracy(&self) -> f64 {
        self.angle_correct as f64 / self.samples as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("samples         {}\n", self.samples));
        s.push_str(&format!(
            "joint accuracy  {:.4} ({}/{})\n",
            self.joint_accuracy(),
            self.joint_correct,
            self.samples
        ));
        s.push_str(&format!("digit accuracy  {:.4}\n", self.digit_accuracy()));
        s.push_str(&format!("angle accuracy  {:.4}\n", self.angle_accuracy()));
        s.push_str("\nangle confusion (rows: true, cols: predicted)\n");
        s.push_str("        0deg  90deg 180deg 270deg\n");
        for (a, row) in self.angle_confusion.iter().enumerate() {
            s.push_str(&format!(
                "{:>6} {:>5} {:>5} {:>6} {:>6}\n",
                format!("{}deg", a * 90),
                row[0],
                row[1],
                row[2],
                row[3]
            ));
        }
        s.push_str("\nper-digit joint accuracy\n");
        for (d, (count, correct)) in self.per_digit.iter().enumerate() {
            if *count > 0 {
                s.push_str(&format!(
                    "digit {d}: {:.4} ({correct}/{count})\n",
                    *correct as f64 / *count as f64
                ));
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        s.push_str(&format!("samples,{}\n", self.samples));
        s.push_str(&format!("joint_accuracy,{:.6}\n", self.joint_accuracy()));
        s.push_str(&format!("digit_accuracy,{:.6}\n", self.digit_accuracy()));
        s.push_str(&format!("angle_accuracy,{:.6}\n", self.angle_accuracy()));
        for (a, row) in self.angle_confusion.iter().enumerate() {
            for (b, n) in row.iter().enumerate() {
                s.push_str(&format!("confusion_true{a}_pred{b},{n}\n"));
            }
        }
        for (d, (count, correct)) in self.per_digit.iter().enumerate() {
            s.push_str(&format!("digit{d}_count,{count}\n"));
            s.push_str(&format!("digit{d}_joint_correct,{correct}\n"));
        }
        s
    }
}

pub fn evaluate(model: &Model, dataset: &[LabeledSample]) -> Result<EvalReport> {
    let mut report = EvalReport {
        samples: dataset.len(),
        joint_correct: 0,
        digit_correct: 0,
        angle_correct: 0,
        angle_confusion: [[0; NUM_ANGLES]; NUM_ANGLES],
        per_digit: [(0, 0); NUM_DIGITS],
    };
    for s in dataset {
        let logits = model.forward(&s.image)?;
        let pred = argmax(logits.data());
        let pred_angle = pred / NUM_DIGITS;
        let pred_digit = pred % NUM_DIGITS;
        let truth = s.joint_class();
        report.angle_confusion[s.angle_index as usize][pred_angle] += 1;
        report.per_digit[s.digit as usize].0 += 1;
        if pred == truth {
            report.joint_correct += 1;
            report.per_digit[s.digit as usize].1 += 1;
        }
        if pred_digit == s.digit as usize {
            report.digit_correct += 1;
        }
        if pred_angle == s.angle_index as usize {
            report.angle_correct += 1;
        }
    }
    Ok(report)
}
