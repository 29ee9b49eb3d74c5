//! Sequential models built from equivarified stages.
//!
//! A stage holds one base map (a short chain of layers) and, when
//! equivarified, a set of input permutations, one per group element: the
//! stage evaluates its base map on each permuted input with the *same*
//! parameters and concatenates the branch outputs in enumeration order.
//! This is exactly the G-product lift of the base map, so it introduces
//! no parameters beyond the base map's own.

use crate::error::{Error, Result};
use crate::nn::layer::{softmax_cross_entropy, Layer, LayerCache};
use crate::nn::tensor::Tensor;

/// How branch outputs are joined into the stage output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concat {
    /// Stack along the channel axis (spatial branch outputs).
    Channels,
    /// Append flat vectors (final logit blocks).
    Flat,
}

#[derive(Debug, Clone)]
pub struct Stage {
    /// One flat-index permutation of the stage input per branch. Branch k
    /// runs the base map on the input permuted by `branch_perms[k]`
    /// (already the action of `g_k^-1`). Empty means one plain branch.
    pub branch_perms: Vec<Vec<usize>>,
    pub layers: Vec<Layer>,
    pub concat: Concat,
}

pub struct StageCache {
    branch_caches: Vec<Vec<LayerCache>>,
    branch_out_shape: Vec<usize>,
    in_shape: Vec<usize>,
}

impl Stage {
    pub fn plain(layers: Vec<Layer>, concat: Concat) -> Self {
        Stage {
            branch_perms: Vec::new(),
            layers,
            concat,
        }
    }

    pub fn equivarified(branch_perms: Vec<Vec<usize>>, layers: Vec<Layer>, concat: Concat) -> Self {
        Stage {
            branch_perms,
            layers,
            concat,
        }
    }

    fn branches(&self) -> usize {
        self.branch_perms.len().max(1)
    }

    fn run_layers(&self, x: Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x;
        for layer in &self.layers {
            let (y, cache) = layer.forward(&cur)?;
            caches.push(cache);
            cur = y;
        }
        Ok((cur, caches))
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, StageCache)> {
        let mut outs = Vec::with_capacity(self.branches());
        let mut branch_caches = Vec::with_capacity(self.branches());
        if self.branch_perms.is_empty() {
            let (y, caches) = self.run_layers(x.clone())?;
            outs.push(y);
            branch_caches.push(caches);
        } else {
            for perm in &self.branch_perms {
                let xb = x.permuted(perm)?;
                let (y, caches) = self.run_layers(xb)?;
                outs.push(y);
                branch_caches.push(caches);
            }
        }
        let branch_out_shape = outs[0].shape().to_vec();
        let y = match self.concat {
            Concat::Channels => crate::nn::layer::concat_channels(&outs)?,
            Concat::Flat => {
                let mut data = Vec::new();
                for o in &outs {
                    data.extend_from_slice(o.data());
                }
                Tensor::new(vec![data.len()], data)?
            }
        };
        Ok((
            y,
            StageCache {
                branch_caches,
                branch_out_shape,
                in_shape: x.shape().to_vec(),
            },
        ))
    }

    /// Returns (grad wrt stage input, parameter grads in registry order),
    /// with branch contributions accumulated in fixed branch order.
    pub fn backward(&self, cache: &StageCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let b = self.branches();
        let branch_grads: Vec<Tensor> = match self.concat {
            Concat::Channels => {
                let parts = crate::nn::layer::split_channels(grad_out, b)?;
                parts
                    .into_iter()
                    .map(|p| p.reshape(cache.branch_out_shape.clone()))
                    .collect::<Result<_>>()?
            }
            Concat::Flat => {
                let per: usize = cache.branch_out_shape.iter().product();
                if grad_out.len() != per * b {
                    return Err(Error::Shape(format!(
                        "stage grad length {} != {b} branches of {per}",
                        grad_out.len()
                    )));
                }
                grad_out
                    .data()
                    .chunks(per)
                    .map(|c| Tensor::new(cache.branch_out_shape.clone(), c.to_vec()))
                    .collect::<Result<_>>()?
            }
        };
        let in_len: usize = cache.in_shape.iter().product();
        let mut grad_in = vec![0.0; in_len];
        let mut param_grads: Option<Vec<Tensor>> = None;
        for (k, gy) in branch_grads.iter().enumerate() {
            let mut cur = gy.clone();
            let mut grads_rev: Vec<Vec<Tensor>> = Vec::with_capacity(self.layers.len());
            for (layer, lcache) in self
                .layers
                .iter()
                .zip(&cache.branch_caches[k])
                .rev()
            {
                let (gx, pg) = layer.backward(lcache, &cur)?;
                grads_rev.push(pg);
                cur = gx;
            }
            // flatten in forward layer order
            let mut flat: Vec<Tensor> = Vec::new();
            for pg in grads_rev.into_iter().rev() {
                flat.extend(pg);
            }
            match &mut param_grads {
                None => param_grads = Some(flat),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&flat) {
                        for (av, gv) in a.data_mut().iter_mut().zip(g.data()) {
                            *av += gv;
                        }
                    }
                }
            }
            // scatter branch input grad through the branch permutation
            if self.branch_perms.is_empty() {
                for (i, v) in cur.data().iter().enumerate() {
                    grad_in[i] += v;
                }
            } else {
                let perm = &self.branch_perms[k];
                for (i, v) in cur.data().iter().enumerate() {
                    grad_in[perm[i]] += v;
                }
            }
        }
        Ok((
            Tensor::new(cache.in_shape.clone(), grad_in)?,
            param_grads.unwrap_or_default(),
        ))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|p| p.len())
            .sum()
    }
}

/// An ordered stage list with a stable parameter registry.
#[derive(Debug, Clone)]
pub struct Model {
    pub stages: Vec<Stage>,
    /// Seed that produced the initial parameters; recorded in checkpoints.
    pub seed: u64,
}

pub struct ModelCache {
    stage_caches: Vec<StageCache>,
    output: Tensor,
}

impl ModelCache {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

impl Model {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<ModelCache> {
        let mut cur = x.clone();
        let mut stage_caches = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let (y, cache) = stage.forward(&cur)?;
            stage_caches.push(cache);
            cur = y;
        }
        Ok(ModelCache {
            stage_caches,
            output: cur,
        })
    }

    /// Loss plus exact reverse-mode parameter gradients, in registry order.
    pub fn backward(&self, x: &Tensor, target: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let cache = self.forward_cached(x)?;
        let (loss, grad_logits) = softmax_cross_entropy(&cache.output, target)?;
        let grads = self.backward_from(&cache, &grad_logits)?;
        Ok((loss, grads))
    }

    /// Backpropagates an arbitrary output gradient; returns parameter
    /// grads in registry order.
    pub fn backward_from(&self, cache: &ModelCache, grad_output: &Tensor) -> Result<Vec<Tensor>> {
        let mut all: Vec<Vec<Tensor>> = vec![Vec::new(); self.stages.len()];
        let mut cur = grad_output.clone();
        for (i, stage) in self.stages.iter().enumerate().rev() {
            let (gx, pg) = stage.backward(&cache.stage_caches[i], &cur)?;
            all[i] = pg;
            cur = gx;
        }
        Ok(all.into_iter().flatten().collect())
    }

    /// Registry names, in the same order as `params()` and gradients.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            for (j, layer) in stage.layers.iter().enumerate() {
                let kinds = ["w", "b"];
                for (p, _) in layer.params().iter().enumerate() {
                    names.push(format!("s{i}.{}{j}.{}", layer.kind_name(), kinds[p]));
                }
            }
        }
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.stages
            .iter()
            .flat_map(|s| s.layers.iter().flat_map(|l| l.params()))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.stages
            .iter_mut()
            .flat_map(|s| s.layers.iter_mut().flat_map(|l| l.params_mut()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Plain SGD: p <- p - lr * g, elementwise, in registry order.
    pub fn sgd_step(&mut self, grads: &[Tensor], lr: f64) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != grads.len() {
            return Err(Error::Parameter(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (p, g) in params.iter_mut().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Parameter(format!(
                    "gradient shape {:?} != parameter shape {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= lr * gv;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> Model {
        Model {
            stages: vec![Stage::plain(
                vec![Layer::Dense {
                    weights: Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
                    bias: Tensor::zeros(vec![2]),
                }],
                Concat::Flat,
            )],
            seed: 0,
        }
    }

    #[test]
    fn sgd_zero_gradient_keeps_params() {
        let mut m = tiny_model();
        let before: Vec<Tensor> = m.params().into_iter().cloned().collect();
        let grads = vec![Tensor::zeros(vec![2, 2]), Tensor::zeros(vec![2])];
        m.sgd_step(&grads, 0.1).unwrap();
        let after: Vec<Tensor> = m.params().into_iter().cloned().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn sgd_zero_lr_keeps_params() {
        let mut m = tiny_model();
        let before: Vec<Tensor> = m.params().into_iter().cloned().collect();
        let grads = vec![Tensor::filled(vec![2, 2], 3.0), Tensor::filled(vec![2], 1.0)];
        m.sgd_step(&grads, 0.0).unwrap();
        assert_eq!(before, m.params().into_iter().cloned().collect::<Vec<_>>());
    }

    #[test]
    fn sgd_scalar_arithmetic() {
        let mut m = Model {
            stages: vec![Stage::plain(
                vec![Layer::Dense {
                    weights: Tensor::new(vec![1, 1], vec![1.0]).unwrap(),
                    bias: Tensor::zeros(vec![1]),
                }],
                Concat::Flat,
            )],
            seed: 0,
        };
        let grads = vec![Tensor::new(vec![1, 1], vec![2.0]).unwrap(), Tensor::zeros(vec![1])];
        m.sgd_step(&grads, 0.1).unwrap();
        assert!((m.params()[0].data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_rejects_registry_mismatch() {
        let mut m = tiny_model();
        assert!(m.sgd_step(&[Tensor::zeros(vec![2, 2])], 0.1).is_err());
    }

    #[test]
    fn dense_gradient_is_outer_product() {
        let m = tiny_model();
        let x = Tensor::new(vec![2], vec![0.3, -0.7]).unwrap();
        let target = Tensor::new(vec![2], vec![1.0, 0.0]).unwrap();
        let (_, grads) = m.backward(&x, &target).unwrap();
        let cache = m.forward_cached(&x).unwrap();
        let (_, gl) = softmax_cross_entropy(cache.output(), &target).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((grads[0].data()[i * 2 + j] - x.data()[i] * gl.data()[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_zeroes_param_grads() {
        let m = tiny_model();
        let x = Tensor::new(vec![2], vec![0.3, -0.7]).unwrap();
        let cache = m.forward_cached(&x).unwrap();
        let grads = m.backward_from(&cache, &Tensor::zeros(vec![2])).unwrap();
        assert!(grads.iter().all(|g| g.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn determinism_bit_identical_passes() {
        let m = tiny_model();
        let x = Tensor::new(vec![2], vec![0.3, -0.7]).unwrap();
        let target = Tensor::new(vec![2], vec![0.0, 1.0]).unwrap();
        let (l1, g1) = m.backward(&x, &target).unwrap();
        let (l2, g2) = m.backward(&x, &target).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }
}
