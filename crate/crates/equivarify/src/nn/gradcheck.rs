//! Central finite-difference verification of the reverse-mode gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::model::Model;
use crate::nn::tensor::Tensor;

pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub worst_param: String,
}

/// Compares analytic parameter gradients against central differences at
/// step `epsilon`. Checks every parameter when the model has at most
/// `max_sampled` of them, otherwise a seeded random subset of that size.
pub fn grad_check(
    model: &Model,
    x: &Tensor,
    target: &Tensor,
    epsilon: f64,
    max_sampled: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grads) = model.backward(x, target)?;
    let names = model.param_names();
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut coords: Vec<(usize, usize)> = Vec::with_capacity(total);
    for (pi, &sz) in sizes.iter().enumerate() {
        for i in 0..sz {
            coords.push((pi, i));
        }
    }
    if coords.len() > max_sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        coords.shuffle(&mut rng);
        coords.truncate(max_sampled);
        coords.sort_unstable();
    }
    let mut max_rel = 0.0f64;
    let mut worst = String::new();
    let mut scratch = model.clone();
    for &(pi, i) in &coords {
        let orig = scratch.params()[pi].data()[i];
        scratch.params_mut()[pi].data_mut()[i] = orig + epsilon;
        let (lp, _) = loss_only(&scratch, x, target)?;
        scratch.params_mut()[pi].data_mut()[i] = orig - epsilon;
        let (lm, _) = loss_only(&scratch, x, target)?;
        scratch.params_mut()[pi].data_mut()[i] = orig;
        let fd = (lp - lm) / (2.0 * epsilon);
        let an = grads[pi].data()[i];
        let denom = an.abs().max(fd.abs()).max(1e-8);
        let rel = (an - fd).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = format!("{}[{i}]", names[pi]);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked: coords.len(),
        worst_param: worst,
    })
}

fn loss_only(model: &Model, x: &Tensor, target: &Tensor) -> Result<(f64, ())> {
    let out = model.forward(x)?;
    let (loss, _) = crate::nn::layer::softmax_cross_entropy(&out, target)?;
    Ok((loss, ()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Layer;
    use crate::nn::model::{Concat, Stage};
    use rand::Rng;

    fn seeded_tensor(shape: Vec<usize>, scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape, (0..len).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
    }

    #[test]
    fn linear_model_matches_at_machine_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Model {
            stages: vec![Stage::plain(
                vec![Layer::Dense {
                    weights: seeded_tensor(vec![6, 4], 0.5, &mut rng),
                    bias: seeded_tensor(vec![4], 0.1, &mut rng),
                }],
                Concat::Flat,
            )],
            seed: 3,
        };
        let x = seeded_tensor(vec![6], 1.0, &mut rng);
        let mut target = Tensor::zeros(vec![4]);
        target.data_mut()[2] = 1.0;
        let r = grad_check(&model, &x, &target, 1e-6, 1000, 0).unwrap();
        assert!(r.max_rel_error < 1e-7, "rel err {}", r.max_rel_error);
    }

    #[test]
    fn three_layer_random_model_under_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = Model {
            stages: vec![Stage::plain(
                vec![
                    Layer::Conv2d {
                        weights: seeded_tensor(vec![3, 3, 1, 3], 0.4, &mut rng),
                        bias: seeded_tensor(vec![3], 0.1, &mut rng),
                    },
                    Layer::Relu,
                    Layer::MaxPool { pool: 2 },
                    Layer::Dense {
                        weights: seeded_tensor(vec![27, 5], 0.4, &mut rng),
                        bias: seeded_tensor(vec![5], 0.1, &mut rng),
                    },
                ],
                Concat::Flat,
            )],
            seed: 9,
        };
        let x = seeded_tensor(vec![6, 6, 1], 1.0, &mut rng);
        let mut target = Tensor::zeros(vec![5]);
        target.data_mut()[1] = 1.0;
        let r = grad_check(&model, &x, &target, 1e-6, 500, 1).unwrap();
        assert!(r.max_rel_error < 1e-5, "rel err {} at {}", r.max_rel_error, r.worst_param);
    }

    #[test]
    fn relu_away_from_kink_is_accurate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        // bias pushed away from zero keeps pre-activations off the kink
        let model = Model {
            stages: vec![Stage::plain(
                vec![
                    Layer::Dense {
                        weights: seeded_tensor(vec![4, 4], 0.5, &mut rng),
                        bias: Tensor::filled(vec![4], 0.75),
                    },
                    Layer::Relu,
                    Layer::Dense {
                        weights: seeded_tensor(vec![4, 3], 0.5, &mut rng),
                        bias: Tensor::zeros(vec![3]),
                    },
                ],
                Concat::Flat,
            )],
            seed: 21,
        };
        let x = seeded_tensor(vec![4], 0.3, &mut rng);
        let mut target = Tensor::zeros(vec![3]);
        target.data_mut()[0] = 1.0;
        let r = grad_check(&model, &x, &target, 1e-6, 100, 2).unwrap();
        assert!(r.max_rel_error < 1e-5);
    }
}
