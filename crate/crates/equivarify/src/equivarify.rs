//! The G-product construction and the unique equivariant lift.
//!
//! For a map `F: X -> Z` and a G-action on X, the lift sends `x` to the
//! tuple whose component `k` is `F(g_k^-1 x)` under the canonical
//! enumeration of G. The codomain carries the induced action
//! `(g s)(g') = s(g^-1 g')`, a pure permutation of components, so
//! projecting at the identity recovers `F` and equivariance holds
//! bit-exactly: both sides of `F(gx) = g F(x)` evaluate `F` on
//! bit-identical inputs.

use std::sync::Arc;

use crate::action::{Carrier, GroupAction};
use crate::error::{Error, Result};
use crate::group::{FiniteGroup, QuotientGroup};

/// An ordered |G|-tuple over a base space: component `k` holds `s(g_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GProductValue<Z> {
    components: Vec<Z>,
}

impl<Z> GProductValue<Z> {
    pub fn new(components: Vec<Z>) -> Self {
        GProductValue { components }
    }

    pub fn components(&self) -> &[Z] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Evaluation at the identity: the projection `p(s) = s(e)`.
    pub fn project(&self) -> &Z {
        &self.components[0]
    }
}

impl<Z: Carrier> Carrier for GProductValue<Z> {
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components.max_abs_diff(&other.components)
    }
}

/// The induced action on the G-product: component `k` of `g·s` is the
/// component of `s` at `g^-1 g_k`.
pub fn induced_action<Z>(group: Arc<FiniteGroup>) -> GroupAction<GProductValue<Z>>
where
    Z: Clone + Send + Sync + 'static,
{
    let n = group.order();
    let transforms = (0..n)
        .map(|g| {
            let group = Arc::clone(&group);
            Arc::new(move |s: &GProductValue<Z>| {
                if s.len() != group.order() {
                    return Err(Error::CarrierMismatch(format!(
                        "tuple has {} components, group has order {}",
                        s.len(),
                        group.order()
                    )));
                }
                let ginv = group.inv(g);
                let components = (0..group.order())
                    .map(|k| s.components[group.mul(ginv, k)].clone())
                    .collect();
                Ok(GProductValue { components })
            }) as Arc<dyn Fn(&GProductValue<Z>) -> Result<GProductValue<Z>> + Send + Sync>
        })
        .collect();
    GroupAction::from_fns(group, transforms).expect("one transform per element")
}

type MapFn<X, Z> = Arc<dyn Fn(&X) -> Result<Z> + Send + Sync>;

/// An equivariant map into a G-product, together with the base map it
/// lifts and the actions on both sides.
pub struct EquivariantMap<X, Z> {
    group: Arc<FiniteGroup>,
    domain_action: GroupAction<X>,
    codomain_action: GroupAction<GProductValue<Z>>,
    base: MapFn<X, Z>,
    forward: MapFn<X, GProductValue<Z>>,
}

impl<X, Z> Clone for EquivariantMap<X, Z> {
    fn clone(&self) -> Self {
        EquivariantMap {
            group: Arc::clone(&self.group),
            domain_action: self.domain_action.clone(),
            codomain_action: self.codomain_action.clone(),
            base: Arc::clone(&self.base),
            forward: Arc::clone(&self.forward),
        }
    }
}

impl<X, Z> EquivariantMap<X, Z>
where
    X: Clone + Send + Sync + 'static,
    Z: Clone + Send + Sync + 'static,
{
    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn domain_action(&self) -> &GroupAction<X> {
        &self.domain_action
    }

    pub fn codomain_action(&self) -> &GroupAction<GProductValue<Z>> {
        &self.codomain_action
    }

    pub fn forward(&self, x: &X) -> Result<GProductValue<Z>> {
        (self.forward)(x)
    }

    /// The base map `F`, i.e. the projection of the forward map.
    pub fn base(&self, x: &X) -> Result<Z> {
        (self.base)(x)
    }

    /// Chains a second equivarified layer after this one. The composite
    /// is again an equivariant map from the original domain.
    pub fn then<W>(&self, next: &EquivariantMap<GProductValue<Z>, W>) -> Result<EquivariantMap<X, W>>
    where
        W: Clone + Send + Sync + 'static,
    {
        if next.group.order() != self.group.order() {
            return Err(Error::Composition(format!(
                "group orders differ: {} vs {}",
                self.group.order(),
                next.group.order()
            )));
        }
        let first = Arc::clone(&self.forward);
        let second = Arc::clone(&next.forward);
        let forward: MapFn<X, GProductValue<W>> =
            Arc::new(move |x: &X| second(&first(x)?));
        let first_b = Arc::clone(&self.forward);
        let second_b = Arc::clone(&next.base);
        let base: MapFn<X, W> = Arc::new(move |x: &X| second_b(&first_b(x)?));
        Ok(EquivariantMap {
            group: Arc::clone(&self.group),
            domain_action: self.domain_action.clone(),
            codomain_action: next.codomain_action.clone(),
            base,
            forward,
        })
    }
}

/// The unique equivariant lift of `F` into the G-product:
/// component `k` of the output is `F(g_k^-1 x)`.
pub fn lift<X, Z, F>(f: F, action: &GroupAction<X>) -> EquivariantMap<X, Z>
where
    X: Clone + Send + Sync + 'static,
    Z: Clone + Send + Sync + 'static,
    F: Fn(&X) -> Result<Z> + Send + Sync + 'static,
{
    let group = Arc::clone(action.group());
    let base: MapFn<X, Z> = Arc::new(f);
    let fwd_base = Arc::clone(&base);
    let fwd_action = action.clone();
    let fwd_group = Arc::clone(&group);
    let forward: MapFn<X, GProductValue<Z>> = Arc::new(move |x: &X| {
        let components = fwd_group
            .elements()
            .map(|k| fwd_base(&fwd_action.apply(fwd_group.inv(k), x)?))
            .collect::<Result<Vec<Z>>>()?;
        Ok(GProductValue { components })
    });
    EquivariantMap {
        codomain_action: induced_action(Arc::clone(&group)),
        group,
        domain_action: action.clone(),
        base,
        forward,
    }
}

/// Equivarifies one layer of a chain: identical to `lift`, the point
/// being that the input action is the induced block action produced by
/// the previous equivarified layer.
pub fn equivarify_layer<X, Z, F>(layer: F, input_action: &GroupAction<X>) -> EquivariantMap<X, Z>
where
    X: Clone + Send + Sync + 'static,
    Z: Clone + Send + Sync + 'static,
    F: Fn(&X) -> Result<Z> + Send + Sync + 'static,
{
    lift(layer, input_action)
}

/// Composes a head map with a chain of equivarified layers over the same
/// group. Fails on group mismatch.
pub fn compose_equivariant<X, Z>(
    head: &EquivariantMap<X, Z>,
    tail: &[EquivariantMap<GProductValue<Z>, Z>],
) -> Result<EquivariantMap<X, Z>>
where
    X: Clone + Send + Sync + 'static,
    Z: Clone + Send + Sync + 'static,
{
    let mut acc = head.clone();
    for layer in tail {
        acc = acc.then(layer)?;
    }
    Ok(acc)
}

/// The universal-property map: for an alternative equivarification
/// `(Z', p')`, sends `z'` to the tuple with component `k` equal to
/// `p'(g_k^-1 z')`. Then `p ∘ π = p'` and `π ∘ F̂' = F̂`.
pub fn universal_map<ZP, Z>(
    p_prime: impl Fn(&ZP) -> Result<Z> + Send + Sync + 'static,
    action_prime: &GroupAction<ZP>,
) -> impl Fn(&ZP) -> Result<GProductValue<Z>>
where
    ZP: Clone + Send + Sync + 'static,
    Z: Clone + Send + Sync + 'static,
{
    let group = Arc::clone(action_prime.group());
    let action = action_prime.clone();
    move |zp: &ZP| {
        let components = group
            .elements()
            .map(|k| p_prime(&action.apply(group.inv(k), zp)?))
            .collect::<Result<Vec<Z>>>()?;
        Ok(GProductValue { components })
    }
}

/// Lifts `F` over the quotient G/N instead of G, for an action whose
/// kernel contains N. The tuple has |G|/|N| components and the result is
/// equivariant for the original G acting through the projection.
///
/// Descent is verified on the supplied probes: every element of N must
/// fix every probe.
pub fn lift_through_quotient<X, Z, F>(
    f: F,
    action: &GroupAction<X>,
    quotient: &QuotientGroup,
    probes: &[X],
) -> Result<EquivariantMap<X, Z>>
where
    X: Carrier + Send + Sync + 'static,
    Z: Clone + Send + Sync + 'static,
    F: Fn(&X) -> Result<Z> + Send + Sync + 'static,
{
    if action.group().order() != quotient.parent().order() {
        return Err(Error::WrongGroup {
            expected: quotient.parent().order(),
            got: action.group().order(),
        });
    }
    if probes.is_empty() {
        return Err(Error::InsufficientProbes);
    }
    // Coset representatives: first parent element projecting to each coset.
    let q = quotient.group().order();
    let mut reps = vec![usize::MAX; q];
    for g in quotient.parent().elements() {
        let c = quotient.project(g)?;
        if reps[c] == usize::MAX {
            reps[c] = g;
        }
    }
    // The action must be constant on cosets at every probe.
    for g in quotient.parent().elements() {
        let rep = reps[quotient.project(g)?];
        for x in probes {
            if action.apply(g, x)?.max_abs_diff(&action.apply(rep, x)?) != 0.0 {
                return Err(Error::NotWellDefined(format!(
                    "elements {g} and {rep} of the same coset act differently",
                )));
            }
        }
    }
    // Quotient action on X: coset c acts as its representative.
    let qa_group = Arc::clone(quotient.group());
    let parent_action = action.clone();
    let transforms = (0..q)
        .map(|c| {
            let parent_action = parent_action.clone();
            let rep = reps[c];
            Arc::new(move |x: &X| parent_action.apply(rep, x))
                as Arc<dyn Fn(&X) -> Result<X> + Send + Sync>
        })
        .collect();
    let quotient_action = GroupAction::from_fns(qa_group, transforms)?;
    Ok(lift(f, &quotient_action))
}

/// Worst deviation from `F(gx) = g F(x)` over all group elements and
/// samples. Exactly 0 for every lift built here, evaluated
/// deterministically.
pub fn check_equivariance<X, Z>(map: &EquivariantMap<X, Z>, samples: &[X]) -> Result<f64>
where
    X: Clone + Send + Sync + 'static,
    Z: Carrier + Send + Sync + 'static,
{
    let mut worst = 0.0f64;
    for x in samples {
        let fx = map.forward(x)?;
        for g in map.group().elements() {
            let lhs = map.forward(&map.domain_action().apply(g, x)?)?;
            let rhs = map.codomain_action().apply(g, &fx)?;
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    Ok(worst)
}
