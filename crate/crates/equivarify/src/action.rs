//! Concrete actions of finite groups on carrier spaces.
//!
//! Built-in actions are exact index permutations of the carrier, so the
//! action laws hold as bit equalities, never up to tolerance.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{FiniteGroup, QuotientGroup, Subgroup};
use crate::nn::tensor::{compose_perms, identity_perm, Tensor};

type TransformFn<X> = Arc<dyn Fn(&X) -> Result<X> + Send + Sync>;

/// Values an action can measure deviations on.
pub trait Carrier: Clone + PartialEq {
    /// Worst elementwise distance; 0 exactly when the values coincide.
    fn max_abs_diff(&self, other: &Self) -> f64;
}

impl Carrier for Tensor {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        Tensor::max_abs_diff(self, other)
    }
}

impl Carrier for usize {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        if self == other {
            0.0
        } else {
            1.0
        }
    }
}

impl Carrier for f64 {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl<T: Carrier> Carrier for Vec<T> {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.iter()
            .zip(other)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// A finite group together with one concrete transform per element.
pub struct GroupAction<X> {
    group: Arc<FiniteGroup>,
    transforms: Vec<TransformFn<X>>,
}

impl<X> Clone for GroupAction<X> {
    fn clone(&self) -> Self {
        GroupAction {
            group: Arc::clone(&self.group),
            transforms: self.transforms.clone(),
        }
    }
}

impl<X> GroupAction<X> {
    /// Wraps raw per-element transforms. `transforms[g]` realizes the
    /// action of element index `g`; index `identity` must be the identity
    /// map (verified by `verify` on samples, not at construction).
    pub fn from_fns(group: Arc<FiniteGroup>, transforms: Vec<TransformFn<X>>) -> Result<Self> {
        if transforms.len() != group.order() {
            return Err(Error::WrongGroup {
                expected: group.order(),
                got: transforms.len(),
            });
        }
        Ok(GroupAction { group, transforms })
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    /// Applies element `g` to a carrier value.
    pub fn apply(&self, g: usize, x: &X) -> Result<X> {
        let f = self.transforms.get(g).ok_or(Error::InvalidElement {
            index: g,
            order: self.group.order(),
        })?;
        f(x)
    }

    /// Every element acts as the identity.
    pub fn trivial(group: Arc<FiniteGroup>) -> Self
    where
        X: Clone + 'static,
        X: Send + Sync,
    {
        let transforms = (0..group.order())
            .map(|_| Arc::new(|x: &X| Ok(x.clone())) as TransformFn<X>)
            .collect();
        GroupAction { group, transforms }
    }

    /// Pulls an action of the quotient group back to the parent:
    /// `g` acts as `projection(g)` does.
    pub fn through_quotient(q: &QuotientGroup, action: &GroupAction<X>) -> Result<Self>
    where
        X: 'static,
    {
        if action.group.order() != q.group().order() {
            return Err(Error::WrongGroup {
                expected: q.group().order(),
                got: action.group.order(),
            });
        }
        let transforms = q
            .parent()
            .elements()
            .map(|g| {
                let coset = q.project(g).expect("element in range");
                Arc::clone(&action.transforms[coset])
            })
            .collect();
        Ok(GroupAction {
            group: Arc::clone(q.parent()),
            transforms,
        })
    }
}

impl<X: Carrier> GroupAction<X> {
    /// Checks both action laws on every `(g1, g2, sample)` triple and
    /// reports the worst deviation. Exact permutation actions report 0.
    pub fn verify(&self, samples: &[X]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::InsufficientProbes);
        }
        let e = self.group.identity();
        let mut worst = 0.0f64;
        for x in samples {
            worst = worst.max(self.apply(e, x)?.max_abs_diff(x));
            for g1 in self.group.elements() {
                for g2 in self.group.elements() {
                    let lhs = self.apply(g1, &self.apply(g2, x)?)?;
                    let rhs = self.apply(self.group.mul(g1, g2), x)?;
                    worst = worst.max(lhs.max_abs_diff(&rhs));
                }
            }
        }
        Ok(worst)
    }

    /// The elements fixing every probe. For a permutation action on a
    /// finite carrier, a single probe with pairwise-distinct entries
    /// already determines the kernel.
    pub fn kernel(&self, probes: &[X]) -> Result<Subgroup> {
        if probes.is_empty() {
            return Err(Error::InsufficientProbes);
        }
        let mut members = Vec::new();
        for g in self.group.elements() {
            let fixes_all = probes
                .iter()
                .map(|x| Ok::<bool, Error>(self.apply(g, x)? == *x))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|b| b);
            if fixes_all {
                members.push(g);
            }
        }
        Subgroup::new(Arc::clone(&self.group), members)
    }
}

/// An action given by one flat-index permutation of a tensor per element.
pub fn permutation_action(
    group: Arc<FiniteGroup>,
    shape: Vec<usize>,
    perms: Vec<Vec<usize>>,
) -> Result<GroupAction<Tensor>> {
    let len: usize = shape.iter().product();
    if perms.len() != group.order() {
        return Err(Error::WrongGroup {
            expected: group.order(),
            got: perms.len(),
        });
    }
    let transforms = perms
        .into_iter()
        .map(|perm| {
            debug_assert_eq!(perm.len(), len);
            let shape = shape.clone();
            Arc::new(move |x: &Tensor| {
                if x.len() != len {
                    return Err(Error::CarrierMismatch(format!(
                        "tensor shape {:?}, action expects {:?}",
                        x.shape(),
                        shape
                    )));
                }
                x.permuted(&perm)
            }) as TransformFn<Tensor>
        })
        .collect();
    Ok(GroupAction { group, transforms })
}

/// The flat-index permutation of one 90-degree counterclockwise rotation
/// of an `h x h x c` row-major image: out(r, c) = in(c, h-1-r).
pub fn rot90_perm(h: usize, c: usize) -> Vec<usize> {
    let mut perm = vec![0usize; h * h * c];
    for r in 0..h {
        for col in 0..h {
            for ch in 0..c {
                perm[(r * h + col) * c + ch] = (col * h + (h - 1 - r)) * c + ch;
            }
        }
    }
    perm
}

/// C4 acting on square images by exact 90-degree rotations, identically
/// on every channel. No interpolation: pure pixel-index permutation.
pub fn rot90_action(group: Arc<FiniteGroup>, h: usize, w: usize, c: usize) -> Result<GroupAction<Tensor>> {
    if group.order() != 4 {
        return Err(Error::WrongGroup {
            expected: 4,
            got: group.order(),
        });
    }
    if h != w {
        return Err(Error::NonSquare { h, w });
    }
    let base = rot90_perm(h, c);
    let mut perms = Vec::with_capacity(4);
    let mut cur = identity_perm(h * w * c);
    for _ in 0..4 {
        perms.push(cur.clone());
        cur = compose_perms(&base, &cur);
    }
    // cur is now rot^4 = identity; perms[k] rotates by 90k degrees CCW.
    debug_assert_eq!(cur, identity_perm(h * w * c));
    permutation_action(group, vec![h, w, c], perms)
}

/// The permutation of `|G|` contiguous blocks induced by the G-product
/// action under the canonical enumeration: block `k` of `g·s` is block
/// `index(g^-1 * g_k)` of `s`.
pub fn block_shift_perm(group: &FiniteGroup, g: usize, block_size: usize) -> Vec<usize> {
    let n = group.order();
    let ginv = group.inv(g);
    let mut perm = Vec::with_capacity(n * block_size);
    for k in 0..n {
        let src = group.mul(ginv, k);
        for t in 0..block_size {
            perm.push(src * block_size + t);
        }
    }
    perm
}

/// The induced G-product action on a flat vector of `|G|` contiguous
/// blocks, in canonical enumeration order. For C4 this sends
/// `(z0, z1, z2, z3)` to `(z3, z0, z1, z2)` under the generator.
pub fn block_shift_action(group: Arc<FiniteGroup>, block_size: usize) -> Result<GroupAction<Tensor>> {
    if block_size == 0 {
        return Err(Error::BlockMismatch {
            len: 0,
            blocks: group.order(),
        });
    }
    let n = group.order();
    let perms: Vec<Vec<usize>> = (0..n)
        .map(|g| block_shift_perm(&group, g, block_size))
        .collect();
    permutation_action(group, vec![n * block_size], perms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c4() -> Arc<FiniteGroup> {
        Arc::new(FiniteGroup::cyclic(4).unwrap())
    }

    fn image(h: usize, c: usize, vals: &[f64]) -> Tensor {
        Tensor::new(vec![h, h, c], vals.to_vec()).unwrap()
    }

    #[test]
    fn rot90_two_by_two() {
        // [[a,b],[c,d]] rotated CCW is [[b,d],[a,c]]
        let a = rot90_action(c4(), 2, 2, 1).unwrap();
        let x = image(2, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = a.apply(1, &x).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0, 1.0, 3.0]);
    }

    #[test]
    fn rot90_identity_is_exact() {
        let a = rot90_action(c4(), 3, 3, 2).unwrap();
        let x = Tensor::new(vec![3, 3, 2], (0..18).map(|v| v as f64).collect()).unwrap();
        assert_eq!(a.apply(0, &x).unwrap(), x);
    }

    #[test]
    fn rot90_four_times_is_identity() {
        let a = rot90_action(c4(), 5, 5, 3);
        let a = a.unwrap();
        let x = Tensor::new(vec![5, 5, 3], (0..75).map(|v| (v as f64).sin()).collect()).unwrap();
        let mut y = x.clone();
        for _ in 0..4 {
            y = a.apply(1, &y).unwrap();
        }
        assert_eq!(y, x);
        // g^2 twice is also the identity
        let z = a.apply(2, &a.apply(2, &x).unwrap()).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn rot90_rejects_non_square() {
        assert!(matches!(
            rot90_action(c4(), 2, 3, 1),
            Err(Error::NonSquare { h: 2, w: 3 })
        ));
        let c2 = Arc::new(FiniteGroup::cyclic(2).unwrap());
        assert!(matches!(
            rot90_action(c2, 2, 2, 1),
            Err(Error::WrongGroup { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn rot90_perm_has_order_four() {
        for h in [2usize, 3, 4, 7] {
            let base = rot90_perm(h, 1);
            let mut cur = base.clone();
            let mut order = 1;
            while cur != identity_perm(h * h) {
                cur = compose_perms(&base, &cur);
                order += 1;
            }
            assert_eq!(order, 4, "h={h}");
        }
    }

    #[test]
    fn block_shift_matches_tuple_formula() {
        // g(z0,z1,z2,z3) = (z3,z0,z1,z2), blocks untouched internally
        let a = block_shift_action(c4(), 10).unwrap();
        let x = Tensor::new(vec![40], (0..40).map(|v| v as f64).collect()).unwrap();
        let y = a.apply(1, &x).unwrap();
        let mut expect: Vec<f64> = (30..40).map(|v| v as f64).collect();
        expect.extend((0..30).map(|v| v as f64));
        assert_eq!(y.data(), expect.as_slice());
        // g^2 shifts by two blocks
        let y2 = a.apply(2, &x).unwrap();
        let mut expect2: Vec<f64> = (20..40).map(|v| v as f64).collect();
        expect2.extend((0..20).map(|v| v as f64));
        assert_eq!(y2.data(), expect2.as_slice());
        // identity untouched
        assert_eq!(a.apply(0, &x).unwrap(), x);
    }

    #[test]
    fn block_shift_preserves_entry_multiset() {
        let a = block_shift_action(c4(), 3).unwrap();
        let x = Tensor::new(vec![12], (0..12).map(|v| v as f64 * 1.5).collect()).unwrap();
        for g in 0..4 {
            let mut ys = a.apply(g, &x).unwrap().into_data();
            let mut xs = x.data().to_vec();
            ys.sort_by(f64::total_cmp);
            xs.sort_by(f64::total_cmp);
            assert_eq!(xs, ys);
        }
    }

    #[test]
    fn trivial_action_fixes_everything() {
        let a: GroupAction<Tensor> = GroupAction::trivial(c4());
        let x = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        for g in 0..4 {
            assert_eq!(a.apply(g, &x).unwrap(), x);
        }
        let k = a.kernel(&[x]).unwrap();
        assert_eq!(k.len(), 4);
    }

    #[test]
    fn verify_passes_for_builtin_actions() {
        let a = rot90_action(c4(), 4, 4, 2).unwrap();
        let samples: Vec<Tensor> = (0..5)
            .map(|s| {
                Tensor::new(
                    vec![4, 4, 2],
                    (0..32).map(|v| ((v * 7 + s * 13) % 31) as f64).collect(),
                )
                .unwrap()
            })
            .collect();
        assert_eq!(a.verify(&samples).unwrap(), 0.0);
        let b = block_shift_action(c4(), 5).unwrap();
        let bs: Vec<Tensor> = (0..3)
            .map(|s| Tensor::new(vec![20], (0..20).map(|v| (v + s) as f64).collect()).unwrap())
            .collect();
        assert_eq!(b.verify(&bs).unwrap(), 0.0);
    }

    #[test]
    fn verify_flags_corrupted_action() {
        // transform[g] wired to transform[g+1]: identity and composition
        // laws both fail on asymmetric input
        let g = c4();
        let good = rot90_action(g.clone(), 2, 2, 1).unwrap();
        let transforms: Vec<TransformFn<Tensor>> = (0..4)
            .map(|k| {
                let good = good.clone();
                let k2 = (k + 1) % 4;
                Arc::new(move |x: &Tensor| good.apply(k2, x)) as TransformFn<Tensor>
            })
            .collect();
        let bad = GroupAction::from_fns(g, transforms).unwrap();
        let x = image(2, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert!(bad.verify(&[x]).unwrap() > 0.0);
    }

    #[test]
    fn verify_rejects_empty_samples() {
        let a = rot90_action(c4(), 2, 2, 1).unwrap();
        assert!(matches!(a.verify(&[]), Err(Error::InsufficientProbes)));
        assert!(matches!(a.kernel(&[]), Err(Error::InsufficientProbes)));
    }

    #[test]
    fn kernel_of_swap_action_is_center() {
        // C4 acting on 2 entries through the swap: g and g^3 swap, e and g^2 fix.
        let g = c4();
        let swap = vec![1usize, 0];
        let id = identity_perm(2);
        let perms = vec![id.clone(), swap.clone(), id, swap];
        let a = permutation_action(g, vec![2], perms).unwrap();
        let probe = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let k = a.kernel(&[probe]).unwrap();
        assert_eq!(k.members(), &[0, 2]);
        assert!(k.is_normal());
    }

    #[test]
    fn kernel_of_rot90_on_distinct_image_is_trivial() {
        let a = rot90_action(c4(), 3, 3, 1).unwrap();
        let probe = Tensor::new(vec![3, 3, 1], (0..9).map(|v| v as f64).collect()).unwrap();
        let k = a.kernel(&[probe]).unwrap();
        assert_eq!(k.members(), &[0]);
    }

    #[test]
    fn quotient_pullback_acts_through_projection() {
        use crate::group::{QuotientGroup, Subgroup};
        let g = c4();
        let n = Subgroup::new(g.clone(), vec![0, 2]).unwrap();
        let q = QuotientGroup::new(g.clone(), &n).unwrap();
        // C2 swap action on a 2-vector
        let c2 = Arc::clone(q.group());
        let swap = permutation_action(c2, vec![2], vec![identity_perm(2), vec![1, 0]]).unwrap();
        let pulled = GroupAction::through_quotient(&q, &swap).unwrap();
        let x = Tensor::new(vec![2], vec![5.0, 7.0]).unwrap();
        // g and g^3 both act as the swap; e and g^2 as identity
        assert_eq!(pulled.apply(1, &x).unwrap().data(), &[7.0, 5.0]);
        assert_eq!(pulled.apply(3, &x).unwrap().data(), &[7.0, 5.0]);
        assert_eq!(pulled.apply(2, &x).unwrap(), x);
        assert_eq!(pulled.verify(&[x.clone()]).unwrap(), 0.0);
        // kernel of the pulled-back action contains N
        let k = pulled.kernel(&[x]).unwrap();
        assert!(k.contains(0) && k.contains(2));
    }

    #[test]
    fn carrier_mismatch_reported() {
        let a = rot90_action(c4(), 2, 2, 1).unwrap();
        let wrong = Tensor::new(vec![3], vec![0.0; 3]).unwrap();
        assert!(matches!(
            a.apply(1, &wrong),
            Err(Error::CarrierMismatch(_))
        ));
    }
}
