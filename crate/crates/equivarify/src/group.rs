//! Finite groups as explicit Cayley tables.
//!
//! Elements are dense indices `0..n`, and the multiplication table is the
//! single source of truth: every algebraic property is checkable by
//! exhaustive scan.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// How many random triples to sample when a group is too large for the
/// exhaustive cubic associativity scan.
const ASSOC_SAMPLE_TRIPLES: usize = 10_000;
const EXHAUSTIVE_LIMIT: usize = 64;

/// A finite group given by its full multiplication table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    /// Row-major `order x order` table, `table[a * order + b] = a * b`.
    table: Vec<usize>,
    identity: usize,
    inverses: Vec<usize>,
    element_names: Vec<String>,
}

impl FiniteGroup {
    /// Builds a group from a raw table, locating the identity and inverses.
    /// Fails if the table is not a group table.
    pub fn from_table(table: Vec<Vec<usize>>, names: Option<Vec<String>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidOrder(0));
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in &table {
            if row.len() != n {
                return Err(Error::Format(format!(
                    "table row has {} entries, expected {n}",
                    row.len()
                )));
            }
            for &v in row {
                if v >= n {
                    return Err(Error::InvalidElement { index: v, order: n });
                }
                flat.push(v);
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| flat[e * n + a] == a && flat[a * n + e] == a))
            .ok_or_else(|| Error::Format("table has no identity element".into()))?;
        let mut inverses = Vec::with_capacity(n);
        for a in 0..n {
            let inv = (0..n)
                .find(|&b| flat[a * n + b] == identity && flat[b * n + a] == identity)
                .ok_or_else(|| Error::Format(format!("element {a} has no inverse")))?;
            inverses.push(inv);
        }
        let element_names =
            names.unwrap_or_else(|| (0..n).map(|k| format!("g{k}")).collect());
        let g = FiniteGroup {
            order: n,
            table: flat,
            identity,
            inverses,
            element_names,
        };
        let report = g.check_axioms();
        if !report.is_empty() {
            return Err(Error::Format(format!(
                "table violates group axioms: {}",
                report.violations[0]
            )));
        }
        Ok(g)
    }

    /// The cyclic group Z/nZ. Index `k` represents `g^k`; identity at 0.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidOrder(0));
        }
        let table: Vec<usize> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a + b) % n))
            .collect();
        let names = (0..n)
            .map(|k| match k {
                0 => "e".to_string(),
                1 => "g".to_string(),
                _ => format!("g^{k}"),
            })
            .collect();
        Ok(FiniteGroup {
            order: n,
            table,
            identity: 0,
            inverses: (0..n).map(|k| (n - k) % n).collect(),
            element_names: names,
        })
    }

    /// The dihedral group of order 2n: rotations `r^k` at indices `0..n`,
    /// reflections `f r^k` at indices `n..2n`, with `f r f = r^-1`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidOrder(0));
        }
        let order = 2 * n;
        // (s, k) with s in {0,1}: element = f^s r^k, index = s*n + k.
        // (s1,k1)*(s2,k2): f^s1 r^k1 f^s2 r^k2 = f^(s1+s2) r^(±k1+k2).
        let mut table = vec![0usize; order * order];
        for s1 in 0..2usize {
            for k1 in 0..n {
                for s2 in 0..2usize {
                    for k2 in 0..n {
                        let s = (s1 + s2) % 2;
                        let k = if s2 == 0 { (k1 + k2) % n } else { (n - k1 + k2) % n };
                        let a = s1 * n + k1;
                        let b = s2 * n + k2;
                        table[a * order + b] = s * n + k;
                    }
                }
            }
        }
        let mut names = Vec::with_capacity(order);
        for s in 0..2 {
            for k in 0..n {
                names.push(match (s, k) {
                    (0, 0) => "e".into(),
                    (0, 1) => "r".into(),
                    (0, _) => format!("r^{k}"),
                    (1, 0) => "f".into(),
                    (1, 1) => "fr".into(),
                    (_, _) => format!("fr^{k}"),
                });
            }
        }
        let mut inverses = Vec::with_capacity(order);
        for a in 0..order {
            let inv = (0..order)
                .find(|&b| table[a * order + b] == 0)
                .expect("dihedral table always has inverses");
            inverses.push(inv);
        }
        Ok(FiniteGroup {
            order,
            table,
            identity: 0,
            inverses,
            element_names: names,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn element_name(&self, a: usize) -> &str {
        &self.element_names[a]
    }

    /// The product `a * b` from the table.
    pub fn compose(&self, a: usize, b: usize) -> Result<usize> {
        self.check_element(a)?;
        self.check_element(b)?;
        Ok(self.table[a * self.order + b])
    }

    /// Unchecked product, for inner loops over valid indices.
    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    pub fn inverse(&self, a: usize) -> Result<usize> {
        self.check_element(a)?;
        Ok(self.inverses[a])
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverses[a]
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    fn check_element(&self, a: usize) -> Result<()> {
        if a >= self.order {
            return Err(Error::InvalidElement {
                index: a,
                order: self.order,
            });
        }
        Ok(())
    }

    /// Verifies closure, identity, inverses and associativity against the
    /// table. Exhaustive for orders up to 64; larger groups get a seeded
    /// random sample of triples for the cubic associativity scan.
    pub fn check_axioms(&self) -> AxiomReport {
        let n = self.order;
        let mut violations = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.table[a * n + b] >= n {
                    violations.push(format!(
                        "closure: {a}*{b} = {} is out of range",
                        self.table[a * n + b]
                    ));
                }
            }
        }
        if !violations.is_empty() {
            return AxiomReport { violations };
        }
        let e = self.identity;
        for a in 0..n {
            if self.mul(e, a) != a || self.mul(a, e) != a {
                violations.push(format!("identity: e*{a} or {a}*e differs from {a}"));
            }
            let inv = self.inverses[a];
            if self.mul(a, inv) != e || self.mul(inv, a) != e {
                violations.push(format!("inverse: {a} and {inv} do not compose to e"));
            }
        }
        let check_triple = |a: usize, b: usize, c: usize, violations: &mut Vec<String>| {
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                violations.push(format!("associativity fails on ({a},{b},{c})"));
            }
        };
        if n <= EXHAUSTIVE_LIMIT {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check_triple(a, b, c, &mut violations);
                    }
                }
            }
        } else {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
            for _ in 0..ASSOC_SAMPLE_TRIPLES {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                let c = rng.gen_range(0..n);
                check_triple(a, b, c, &mut violations);
            }
        }
        AxiomReport { violations }
    }

    /// Serializes as plain text: `order n` then n rows of the table.
    pub fn to_text(&self) -> String {
        let mut s = format!("order {}\n", self.order);
        for a in 0..self.order {
            let row: Vec<String> = (0..self.order)
                .map(|b| self.mul(a, b).to_string())
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Parses the `to_text` format. The table is validated as a group table.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty group file".into()))?;
        let n: usize = header
            .strip_prefix("order")
            .map(str::trim)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header line: {header:?}")))?;
        let mut table = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format("truncated group table".into()))?;
            let row: std::result::Result<Vec<usize>, _> =
                line.split_whitespace().map(str::parse).collect();
            let row = row.map_err(|_| Error::Format(format!("bad table row: {line:?}")))?;
            table.push(row);
        }
        Self::from_table(table, None)
    }

    /// Parses a raw table without validating the axioms, so that corrupted
    /// tables can still be loaded for inspection and reported on.
    pub fn from_text_unchecked(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty group file".into()))?;
        let n: usize = header
            .strip_prefix("order")
            .map(str::trim)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header line: {header:?}")))?;
        if n == 0 {
            return Err(Error::InvalidOrder(0));
        }
        let mut flat = Vec::with_capacity(n * n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format("truncated group table".into()))?;
            for tok in line.split_whitespace() {
                let v: usize = tok
                    .parse()
                    .map_err(|_| Error::Format(format!("bad table entry: {tok:?}")))?;
                flat.push(v);
            }
        }
        if flat.len() != n * n {
            return Err(Error::Format(format!(
                "expected {} table entries, got {}",
                n * n,
                flat.len()
            )));
        }
        // Identity / inverses are best-effort here; check_axioms reports the rest.
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| flat[e * n + a] == a && flat[a * n + e] == a))
            .unwrap_or(0);
        let inverses = (0..n)
            .map(|a| {
                (0..n)
                    .find(|&b| flat[a * n + b] == identity)
                    .unwrap_or(a)
            })
            .collect();
        Ok(FiniteGroup {
            order: n,
            table: flat,
            identity,
            inverses,
            element_names: (0..n).map(|k| format!("g{k}")).collect(),
        })
    }
}

impl fmt::Display for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "group of order {}", self.order)
    }
}

/// Outcome of `check_axioms`: empty means the table is a group.
#[derive(Debug, Clone, Default)]
pub struct AxiomReport {
    pub violations: Vec<String>,
}

impl AxiomReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A subset of a group's elements, closed under product and inverse.
#[derive(Debug, Clone)]
pub struct Subgroup {
    parent: Arc<FiniteGroup>,
    members: Vec<usize>,
}

impl Subgroup {
    /// Validates closure, identity and inverses before accepting the set.
    pub fn new(parent: Arc<FiniteGroup>, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if !members.contains(&parent.identity()) {
            return Err(Error::InvalidSubgroup("missing identity".into()));
        }
        for &a in &members {
            if a >= parent.order() {
                return Err(Error::InvalidElement {
                    index: a,
                    order: parent.order(),
                });
            }
            if !members.contains(&parent.inv(a)) {
                return Err(Error::InvalidSubgroup(format!("missing inverse of {a}")));
            }
            for &b in &members {
                if !members.contains(&parent.mul(a, b)) {
                    return Err(Error::InvalidSubgroup(format!(
                        "not closed: {a}*{b} escapes the subset"
                    )));
                }
            }
        }
        Ok(Subgroup { parent, members })
    }

    pub fn parent(&self) -> &Arc<FiniteGroup> {
        &self.parent
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, a: usize) -> bool {
        self.members.binary_search(&a).is_ok()
    }

    /// Exhaustive normality check: g n g^-1 stays in the subgroup.
    pub fn is_normal(&self) -> bool {
        self.parent.elements().all(|g| {
            self.members
                .iter()
                .all(|&n| self.contains(self.parent.mul(self.parent.mul(g, n), self.parent.inv(g))))
        })
    }
}

/// A quotient group together with the projection from the parent.
#[derive(Debug, Clone)]
pub struct QuotientGroup {
    group: Arc<FiniteGroup>,
    /// parent element index -> coset index
    projection: Vec<usize>,
    parent: Arc<FiniteGroup>,
}

impl QuotientGroup {
    /// Builds G/N for a normal subgroup N by coset enumeration.
    pub fn new(parent: Arc<FiniteGroup>, normal: &Subgroup) -> Result<Self> {
        if !Arc::ptr_eq(&parent, normal.parent()) && *parent != **normal.parent() {
            return Err(Error::InvalidSubgroup("subgroup of a different group".into()));
        }
        if !normal.is_normal() {
            return Err(Error::NotNormal);
        }
        let n = parent.order();
        let mut coset_of = vec![usize::MAX; n];
        let mut reps: Vec<usize> = Vec::new();
        for a in 0..n {
            if coset_of[a] != usize::MAX {
                continue;
            }
            let coset = reps.len();
            for &h in normal.members() {
                coset_of[parent.mul(a, h)] = coset;
            }
            reps.push(a);
        }
        let q = reps.len();
        let mut table = vec![vec![0usize; q]; q];
        for (i, &a) in reps.iter().enumerate() {
            for (j, &b) in reps.iter().enumerate() {
                table[i][j] = coset_of[parent.mul(a, b)];
            }
        }
        let names = reps
            .iter()
            .map(|&a| format!("[{}]", parent.element_name(a)))
            .collect();
        let group = Arc::new(FiniteGroup::from_table(table, Some(names))?);
        Ok(QuotientGroup {
            group,
            projection: coset_of,
            parent,
        })
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn parent(&self) -> &Arc<FiniteGroup> {
        &self.parent
    }

    /// Coset of a parent element.
    pub fn project(&self, a: usize) -> Result<usize> {
        self.projection
            .get(a)
            .copied()
            .ok_or(Error::InvalidElement {
                index: a,
                order: self.parent.order(),
            })
    }
}
