//! Builds the equivariant digit+angle network.
//!
//! Chain: equivarified conv1 on the raw image (rotation branches,
//! channel concat) -> conv2 equivarified against the channel-block shift
//! -> equivarified (dense . pool . conv3) producing four stacked logit
//! blocks in R^40. Every stage shares one set of base-map parameters
//! across its four branches, so equivarifying changes no parameter
//! counts.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{block_shift_perm, rot90_perm};
use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::mnist::config::Config;
use crate::nn::layer::Layer;
use crate::nn::model::{Concat, Model, Stage};
use crate::nn::tensor::{compose_perms, identity_perm, Tensor};

pub const IMAGE_SIDE: usize = 28;

fn he_tensor(shape: Vec<usize>, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let len: usize = shape.iter().product();
    let std = (2.0 / fan_in as f64).sqrt();
    // Box-Muller on uniform draws keeps the init independent of rand's
    // normal-sampling internals.
    let data = (0..len)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    Tensor::new(shape, data).expect("length matches shape")
}

fn conv(cin: usize, cout: usize, k: usize, rng: &mut ChaCha8Rng) -> Layer {
    Layer::Conv2d {
        weights: he_tensor(vec![k, k, cin, cout], k * k * cin, rng),
        bias: Tensor::zeros(vec![cout]),
    }
}

/// Branch permutations for the image input: branch k applies the
/// rotation by g_k^-1, i.e. 90*(4-k) degrees counterclockwise.
fn rot_branch_perms(group: &FiniteGroup, side: usize, channels: usize) -> Vec<Vec<usize>> {
    let base = rot90_perm(side, channels);
    let len = side * side * channels;
    let mut powers = Vec::with_capacity(4);
    let mut cur = identity_perm(len);
    for _ in 0..4 {
        powers.push(cur.clone());
        cur = compose_perms(&base, &cur);
    }
    group
        .elements()
        .map(|k| powers[group.inv(k)].clone())
        .collect()
}

/// Branch permutations for a channel-stacked G-product input: branch k
/// applies the block shift of g_k^-1 on the channel groups, realized as
/// a flat-index permutation of the h x w x (4c) tensor.
fn channel_shift_branch_perms(
    group: &FiniteGroup,
    side: usize,
    block_channels: usize,
) -> Vec<Vec<usize>> {
    let n = group.order();
    let total = n * block_channels;
    group
        .elements()
        .map(|k| {
            let ginv = group.inv(k);
            // channel-group permutation of g_k^-1 as on a flat |G|-tuple
            let block = block_shift_perm(group, ginv, block_channels);
            // expand across spatial positions
            let mut perm = Vec::with_capacity(side * side * total);
            for pos in 0..side * side {
                for &c in &block {
                    perm.push(pos * total + c);
                }
            }
            perm
        })
        .collect()
}

/// The default equivariant model for the given config and C4 group.
pub fn build_model(group: &Arc<FiniteGroup>, cfg: &Config) -> Result<Model> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.kernel;
    let side = IMAGE_SIDE;
    let pooled = side / cfg.pool;
    let stage0 = Stage::equivarified(
        rot_branch_perms(group, side, 1),
        vec![conv(1, cfg.c1, k, &mut rng), Layer::Relu],
        Concat::Channels,
    );
    let stage1 = Stage::equivarified(
        channel_shift_branch_perms(group, side, cfg.c1),
        vec![conv(4 * cfg.c1, cfg.c2, k, &mut rng), Layer::Relu],
        Concat::Channels,
    );
    let dense_in = pooled * pooled * cfg.c3;
    let stage2 = Stage::equivarified(
        channel_shift_branch_perms(group, side, cfg.c2),
        vec![
            conv(4 * cfg.c2, cfg.c3, k, &mut rng),
            Layer::Relu,
            Layer::MaxPool { pool: cfg.pool },
            Layer::Dense {
                weights: he_tensor(vec![dense_in, 10], dense_in, &mut rng),
                bias: Tensor::zeros(vec![10]),
            },
        ],
        Concat::Flat,
    );
    Ok(Model {
        stages: vec![stage0, stage1, stage2],
        seed: cfg.seed,
    })
}

/// Rebuilds a model from a checkpoint alone: the architecture is
/// recovered from the `hyper` line (a rendered config) and the weights
/// are then loaded in.
pub fn load_checkpoint_model(path: &std::path::Path) -> Result<(Config, Model)> {
    use std::io::BufRead;
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut hyper = None;
    for line in reader.lines() {
        let line = line?;
        let t = line.trim_end();
        if t.is_empty() {
            break;
        }
        if let Some(rest) = t.strip_prefix("hyper ") {
            hyper = Some(rest.to_string());
        }
    }
    let hyper = hyper.ok_or_else(|| Error::Format("checkpoint missing hyper line".into()))?;
    let mut cfg = Config::default();
    cfg.apply_pairs(hyper.split_whitespace().map(String::from))?;
    let group = Arc::new(FiniteGroup::cyclic(4)?);
    let mut model = build_model(&group, &cfg)?;
    crate::nn::checkpoint::load_into(&mut model, path)?;
    Ok((cfg, model))
}

/// The same base maps with no equivarification: a single branch per
/// stage taking the canonical (identity) input. Used as the parameter
/// -count reference.
pub fn build_reference_model(cfg: &Config) -> Result<Model> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.kernel;
    let pooled = IMAGE_SIDE / cfg.pool;
    let dense_in = pooled * pooled * cfg.c3;
    Ok(Model {
        stages: vec![
            Stage::plain(vec![conv(1, cfg.c1, k, &mut rng), Layer::Relu], Concat::Channels),
            Stage::plain(vec![conv(4 * cfg.c1, cfg.c2, k, &mut rng), Layer::Relu], Concat::Channels),
            Stage::plain(
                vec![
                    conv(4 * cfg.c2, cfg.c3, k, &mut rng),
                    Layer::Relu,
                    Layer::MaxPool { pool: cfg.pool },
                    Layer::Dense {
                        weights: he_tensor(vec![dense_in, 10], dense_in, &mut rng),
                        bias: Tensor::zeros(vec![10]),
                    },
                ],
                Concat::Flat,
            ),
        ],
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{block_shift_action, rot90_action};
    use crate::mnist::data::NUM_CLASSES;

    fn c4() -> Arc<FiniteGroup> {
        Arc::new(FiniteGroup::cyclic(4).unwrap())
    }

    fn seeded_image(seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(
            vec![IMAGE_SIDE, IMAGE_SIDE, 1],
            (0..IMAGE_SIDE * IMAGE_SIDE).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn shapes_flow_through() {
        let g = c4();
        let cfg = Config::default();
        let m = build_model(&g, &cfg).unwrap();
        let x = seeded_image(5);
        let cache = m.forward_cached(&x).unwrap();
        assert_eq!(cache.output().shape(), &[NUM_CLASSES]);
    }

    #[test]
    fn first_stage_output_is_four_channel_copies() {
        let g = c4();
        let cfg = Config::default();
        let m = build_model(&g, &cfg).unwrap();
        let x = seeded_image(6);
        let (y, _) = m.stages[0].forward(&x).unwrap();
        assert_eq!(y.shape(), &[IMAGE_SIDE, IMAGE_SIDE, 4 * cfg.c1]);
    }

    #[test]
    fn output_dim_40_regardless_of_channels() {
        let g = c4();
        let mut cfg = Config::default();
        cfg.c1 = 2;
        cfg.c2 = 3;
        cfg.c3 = 5;
        let m = build_model(&g, &cfg).unwrap();
        assert_eq!(m.forward(&seeded_image(7)).unwrap().shape(), &[NUM_CLASSES]);
    }

    #[test]
    fn random_weight_model_is_exactly_equivariant() {
        let g = c4();
        let cfg = Config::default();
        let m = build_model(&g, &cfg).unwrap();
        let rot = rot90_action(g.clone(), IMAGE_SIDE, IMAGE_SIDE, 1).unwrap();
        let shift = block_shift_action(g, 10).unwrap();
        let x = seeded_image(8);
        let out = m.forward(&x).unwrap();
        for gk in 0..4 {
            let rotated = rot.apply(gk, &x).unwrap();
            let lhs = m.forward(&rotated).unwrap();
            let rhs = shift.apply(gk, &out).unwrap();
            assert_eq!(lhs, rhs, "g^{gk}");
        }
    }

    #[test]
    fn parameter_count_matches_reference() {
        let g = c4();
        let cfg = Config::default();
        let m = build_model(&g, &cfg).unwrap();
        let r = build_reference_model(&cfg).unwrap();
        assert_eq!(m.param_count(), r.param_count());
    }

    #[test]
    fn seeded_build_is_reproducible() {
        let g = c4();
        let cfg = Config::default();
        let a = build_model(&g, &cfg).unwrap();
        let b = build_model(&g, &cfg).unwrap();
        for (p, q) in a.params().iter().zip(b.params()) {
            assert_eq!(*p, q);
        }
    }
}
