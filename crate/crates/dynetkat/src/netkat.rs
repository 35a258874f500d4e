//! Dup-free NetKAT terms, their denotational semantics over finite packet
//! spaces, and the relational normal form used as an equivalence decision
//! procedure.
//!
//! A policy over a finite schema denotes a relation on packets; two policies
//! are equivalent exactly when their relations coincide. `eval_policy`
//! follows the denotational semantics pointwise, while `normalize` computes
//! the relation compositionally (star as reflexive-transitive closure);
//! tests cross-check the two routes against each other.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::Result;
use crate::packet::{FieldSchema, Packet};

/// Predicate fragment: `0 | 1 | f = n | a + b | a · b | ¬a`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NkPredicate {
    Zero,
    One,
    Test(String, String),
    Or(Box<NkPredicate>, Box<NkPredicate>),
    And(Box<NkPredicate>, Box<NkPredicate>),
    Not(Box<NkPredicate>),
}

/// Dup-free NetKAT policy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NkPolicy {
    Pred(NkPredicate),
    Assign(String, String),
    Plus(Box<NkPolicy>, Box<NkPolicy>),
    Seq(Box<NkPolicy>, Box<NkPolicy>),
    Star(Box<NkPolicy>),
}

impl NkPolicy {
    pub fn zero() -> NkPolicy {
        NkPolicy::Pred(NkPredicate::Zero)
    }

    pub fn one() -> NkPolicy {
        NkPolicy::Pred(NkPredicate::One)
    }

    pub fn test(f: &str, v: &str) -> NkPolicy {
        NkPolicy::Pred(NkPredicate::Test(f.into(), v.into()))
    }

    pub fn assign(f: &str, v: &str) -> NkPolicy {
        NkPolicy::Assign(f.into(), v.into())
    }

    pub fn plus(a: NkPolicy, b: NkPolicy) -> NkPolicy {
        NkPolicy::Plus(Box::new(a), Box::new(b))
    }

    pub fn seq(a: NkPolicy, b: NkPolicy) -> NkPolicy {
        NkPolicy::Seq(Box::new(a), Box::new(b))
    }

    pub fn star(a: NkPolicy) -> NkPolicy {
        NkPolicy::Star(Box::new(a))
    }

    /// Right-nested sum; the empty sum is `0`.
    pub fn sum<I: IntoIterator<Item = NkPolicy>>(items: I) -> NkPolicy {
        let mut items: Vec<NkPolicy> = items.into_iter().collect();
        match items.pop() {
            None => NkPolicy::zero(),
            Some(last) => items
                .into_iter()
                .rev()
                .fold(last, |acc, p| NkPolicy::plus(p, acc)),
        }
    }

    /// Right-nested sequence; the empty sequence is `1`.
    pub fn seq_all<I: IntoIterator<Item = NkPolicy>>(items: I) -> NkPolicy {
        let mut items: Vec<NkPolicy> = items.into_iter().collect();
        match items.pop() {
            None => NkPolicy::one(),
            Some(last) => items
                .into_iter()
                .rev()
                .fold(last, |acc, p| NkPolicy::seq(p, acc)),
        }
    }
}

/// Canonical denotation of a policy: a sorted set of (input, output) packet
/// index pairs over one schema. Coincides with the sum-of-complete-points
/// normal form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NkRelation {
    pub pairs: BTreeSet<(u32, u32)>,
    pub packet_count: u32,
}

impl NkRelation {
    pub fn empty(packet_count: u32) -> NkRelation {
        NkRelation {
            pairs: BTreeSet::new(),
            packet_count,
        }
    }

    pub fn identity(packet_count: u32) -> NkRelation {
        NkRelation {
            pairs: (0..packet_count).map(|i| (i, i)).collect(),
            packet_count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn union(&self, other: &NkRelation) -> NkRelation {
        NkRelation {
            pairs: self.pairs.union(&other.pairs).cloned().collect(),
            packet_count: self.packet_count,
        }
    }

    pub fn compose(&self, other: &NkRelation) -> NkRelation {
        let mut by_src: HashMap<u32, Vec<u32>> = HashMap::new();
        for &(a, b) in &other.pairs {
            by_src.entry(a).or_default().push(b);
        }
        let mut pairs = BTreeSet::new();
        for &(a, mid) in &self.pairs {
            if let Some(outs) = by_src.get(&mid) {
                for &b in outs {
                    pairs.insert((a, b));
                }
            }
        }
        NkRelation {
            pairs,
            packet_count: self.packet_count,
        }
    }

    /// Reflexive-transitive closure, by BFS from every packet.
    pub fn star(&self) -> NkRelation {
        let mut succ: HashMap<u32, Vec<u32>> = HashMap::new();
        for &(a, b) in &self.pairs {
            succ.entry(a).or_default().push(b);
        }
        let mut pairs = BTreeSet::new();
        for src in 0..self.packet_count {
            let mut seen = BTreeSet::new();
            let mut queue = std::collections::VecDeque::new();
            seen.insert(src);
            queue.push_back(src);
            while let Some(x) = queue.pop_front() {
                if let Some(outs) = succ.get(&x) {
                    for &y in outs {
                        if seen.insert(y) {
                            queue.push_back(y);
                        }
                    }
                }
            }
            for y in seen {
                pairs.insert((src, y));
            }
        }
        NkRelation {
            pairs,
            packet_count: self.packet_count,
        }
    }

    pub fn is_subset(&self, other: &NkRelation) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    pub fn outputs(&self, input: u32) -> BTreeSet<u32> {
        self.pairs
            .range((input, 0)..=(input, u32::MAX))
            .map(|&(_, b)| b)
            .collect()
    }
}

/// Evaluates a predicate on a single packet.
pub fn eval_pred(a: &NkPredicate, p: &Packet, schema: &FieldSchema) -> Result<bool> {
    Ok(match a {
        NkPredicate::Zero => false,
        NkPredicate::One => true,
        NkPredicate::Test(f, v) => {
            let fi = schema.field_index(f)?;
            let vi = schema.value_index(fi, v)?;
            p.0[fi] == vi
        }
        NkPredicate::Or(x, y) => eval_pred(x, p, schema)? || eval_pred(y, p, schema)?,
        NkPredicate::And(x, y) => eval_pred(x, p, schema)? && eval_pred(y, p, schema)?,
        NkPredicate::Not(x) => !eval_pred(x, p, schema)?,
    })
}

/// Evaluates a policy on a single packet, returning the set of output
/// packets. Star is computed as a fixpoint of the iterates, which stabilizes
/// within the size of the packet space.
pub fn eval_policy(p: &NkPolicy, input: &Packet, schema: &FieldSchema) -> Result<BTreeSet<Packet>> {
    Ok(match p {
        NkPolicy::Pred(a) => {
            if eval_pred(a, input, schema)? {
                [input.clone()].into()
            } else {
                BTreeSet::new()
            }
        }
        NkPolicy::Assign(f, v) => {
            let fi = schema.field_index(f)?;
            let vi = schema.value_index(fi, v)?;
            let mut out = input.clone();
            out.0[fi] = vi;
            [out].into()
        }
        NkPolicy::Plus(x, y) => {
            let mut s = eval_policy(x, input, schema)?;
            s.extend(eval_policy(y, input, schema)?);
            s
        }
        NkPolicy::Seq(x, y) => {
            // Kleisli composition
            let mut s = BTreeSet::new();
            for mid in eval_policy(x, input, schema)? {
                s.extend(eval_policy(y, &mid, schema)?);
            }
            s
        }
        NkPolicy::Star(x) => {
            let mut acc: BTreeSet<Packet> = [input.clone()].into();
            loop {
                let mut next = acc.clone();
                for q in &acc {
                    next.extend(eval_policy(x, q, schema)?);
                }
                if next == acc {
                    break acc;
                }
                acc = next;
            }
        }
    })
}

/// Computes the canonical relation of a policy, compositionally.
pub fn normalize(p: &NkPolicy, schema: &FieldSchema) -> Result<NkRelation> {
    let n = schema.packet_count() as u32;
    Ok(match p {
        NkPolicy::Pred(a) => {
            let mut pairs = BTreeSet::new();
            for i in 0..n {
                if eval_pred(a, &schema.packet_at(i), schema)? {
                    pairs.insert((i, i));
                }
            }
            NkRelation {
                pairs,
                packet_count: n,
            }
        }
        NkPolicy::Assign(f, v) => {
            let fi = schema.field_index(f)?;
            let vi = schema.value_index(fi, v)?;
            let mut pairs = BTreeSet::new();
            for i in 0..n {
                let mut out = schema.packet_at(i);
                out.0[fi] = vi;
                pairs.insert((i, schema.packet_index(&out)));
            }
            NkRelation {
                pairs,
                packet_count: n,
            }
        }
        NkPolicy::Plus(x, y) => normalize(x, schema)?.union(&normalize(y, schema)?),
        NkPolicy::Seq(x, y) => normalize(x, schema)?.compose(&normalize(y, schema)?),
        NkPolicy::Star(x) => normalize(x, schema)?.star(),
    })
}

/// Decides policy equivalence by relation equality; sound and complete for
/// the dup-free fragment over finite domains.
pub fn nk_equiv(p: &NkPolicy, q: &NkPolicy, schema: &FieldSchema) -> Result<bool> {
    Ok(normalize(p, schema)? == normalize(q, schema)?)
}

pub fn nk_is_zero(p: &NkPolicy, schema: &FieldSchema) -> Result<bool> {
    Ok(normalize(p, schema)?.is_empty())
}

/// Rebuilds a policy from a relation, as the canonical sum of complete
/// tests and complete assignments.
pub fn policy_of_relation(rel: &NkRelation, schema: &FieldSchema) -> NkPolicy {
    NkPolicy::sum(rel.pairs.iter().map(|&(a, b)| {
        let src = schema.packet_at(a);
        let dst = schema.packet_at(b);
        NkPolicy::seq(complete_test(&src, schema), complete_assignment(&dst, schema))
    }))
}

/// The complete test `f1 = v1 · ... · fn = vn` matching exactly `p`.
pub fn complete_test(p: &Packet, schema: &FieldSchema) -> NkPolicy {
    NkPolicy::seq_all(p.0.iter().zip(schema.fields()).map(|(v, f)| {
        NkPolicy::test(&f.name, &f.values[*v as usize])
    }))
}

/// The complete assignment `f1 <- v1 · ... · fn <- vn` producing exactly `p`.
pub fn complete_assignment(p: &Packet, schema: &FieldSchema) -> NkPolicy {
    NkPolicy::seq_all(p.0.iter().zip(schema.fields()).map(|(v, f)| {
        NkPolicy::assign(&f.name, &f.values[*v as usize])
    }))
}

/// Schema plus a memo table for `normalize`; step computation and rewriting
/// hit the same policies repeatedly. Confine one `Ctx` per task.
pub struct Ctx {
    pub schema: FieldSchema,
    cache: RefCell<HashMap<NkPolicy, Arc<NkRelation>>>,
}

impl Ctx {
    pub fn new(schema: FieldSchema) -> Ctx {
        Ctx {
            schema,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn normalize(&self, p: &NkPolicy) -> Result<Arc<NkRelation>> {
        if let Some(r) = self.cache.borrow().get(p) {
            return Ok(r.clone());
        }
        let r = Arc::new(normalize(p, &self.schema)?);
        self.cache.borrow_mut().insert(p.clone(), r.clone());
        Ok(r)
    }

    pub fn packet_count(&self) -> u32 {
        self.schema.packet_count() as u32
    }
}

pub fn format_relation(rel: &NkRelation, schema: &FieldSchema) -> String {
    if rel.is_empty() {
        return "zero".into();
    }
    if *rel == NkRelation::identity(rel.packet_count) {
        return "one".into();
    }
    rel.pairs
        .iter()
        .map(|&(a, b)| {
            let src = schema.format_packet(&schema.packet_at(a));
            let dst = schema
                .format_packet(&schema.packet_at(b))
                .replace('=', "<-");
            format!("{src}.{dst}")
        })
        .collect::<Vec<_>>()
        .join(" + ")
}
