//! Property-based checks of the algebraic laws behind the exact
//! equivariance claims.

use proptest::prelude::*;

use equivarify::action::{block_shift_perm, rot90_perm};
use equivarify::group::FiniteGroup;
use equivarify::nn::tensor::{compose_perms, identity_perm, Tensor};

proptest! {
    #[test]
    fn rot90_perm_has_order_four(side in 1usize..12, channels in 1usize..4) {
        let base = rot90_perm(side, channels);
        let mut p = identity_perm(side * side * channels);
        for _ in 0..4 {
            p = compose_perms(&base, &p);
        }
        prop_assert_eq!(p, identity_perm(side * side * channels));
    }

    #[test]
    fn block_shift_is_a_homomorphism(
        n in 1usize..8,
        block in 1usize..5,
        a in 0usize..8,
        b in 0usize..8,
    ) {
        let g = FiniteGroup::cyclic(n).unwrap();
        let (a, b) = (a % n, b % n);
        // action composition law: perm(a) ∘ perm(b) = perm(ab)
        let composed = compose_perms(
            &block_shift_perm(&g, b, block),
            &block_shift_perm(&g, a, block),
        );
        prop_assert_eq!(composed, block_shift_perm(&g, g.mul(a, b), block));
    }

    #[test]
    fn permuted_by_perm_then_inverse_is_identity(
        data in prop::collection::vec(-1e3f64..1e3, 1..64),
        seed in 0u64..1000,
    ) {
        let n = data.len();
        // seeded permutation
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        for i in (1..n).rev() {
            state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let mut inv = vec![0usize; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let t = Tensor::new(vec![n], data).unwrap();
        let round = t.permuted(&perm).unwrap().permuted(&inv).unwrap();
        prop_assert_eq!(round, t);
    }

    #[test]
    fn cyclic_and_dihedral_axioms_hold(n in 1usize..10) {
        prop_assert!(FiniteGroup::cyclic(n).unwrap().check_axioms().is_empty());
        prop_assert!(FiniteGroup::dihedral(n).unwrap().check_axioms().is_empty());
    }

    #[test]
    fn group_inverse_round_trip(n in 1usize..12, a in 0usize..12) {
        let g = FiniteGroup::cyclic(n).unwrap();
        let a = a % n;
        prop_assert_eq!(g.mul(a, g.inv(a)), g.identity());
        prop_assert_eq!(g.inv(g.inv(a)), a);
    }
}
