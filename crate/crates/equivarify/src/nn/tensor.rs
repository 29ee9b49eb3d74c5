//! Dense row-major tensors over f64.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: Vec<usize>, v: f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![v; len],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the buffer under a new shape of the same length.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Applies a flat-index permutation: `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "permutation length {} does not match tensor length {}",
                perm.len(),
                self.data.len()
            )));
        }
        let data = perm.iter().map(|&j| self.data[j]).collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Composes two flat-index permutations: applying the result equals
/// applying `second` to the output of `first`.
pub fn compose_perms(first: &[usize], second: &[usize]) -> Vec<usize> {
    // out[i] = (x ∘ first)[second[i]] = x[first[second[i]]]
    second.iter().map(|&i| first[i]).collect()
}

pub fn identity_perm(len: usize) -> Vec<usize> {
    (0..len).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_length() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn permutation_composition_matches_sequential_application() {
        let t = Tensor::new(vec![4], vec![10.0, 11.0, 12.0, 13.0]).unwrap();
        let p1 = vec![1, 2, 3, 0];
        let p2 = vec![3, 0, 1, 2];
        let seq = t.permuted(&p1).unwrap().permuted(&p2).unwrap();
        let combined = t.permuted(&compose_perms(&p1, &p2)).unwrap();
        assert_eq!(seq, combined);
    }
}
