//! Head normal forms of dynamic terms as derived by the equational axioms:
//! every term rewrites to a choice of flow summands (a policy prefix and a
//! continuation) and communication summands. Flow summands are grouped by
//! continuation and represented by the canonical relation of the combined
//! policy, which identifies normal forms up to associativity, commutativity,
//! idempotence, units, distribution of choice over prefixing, and policy
//! equivalence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::dnk::{canonical, Dir, DnkTerm, Definitions};
use crate::error::{Error, Result};
use crate::netkat::{policy_of_relation, Ctx, NkRelation};
use crate::sos::Label;

/// Kind of a communication summand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CommKind {
    Recv,
    Send,
    Rcfg,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommSummand {
    pub kind: CommKind,
    pub chan: String,
    pub rel: Arc<NkRelation>,
    pub cont: DnkTerm,
}

/// A head normal form: flow summands grouped by (canonical) continuation,
/// plus a set of communication summands. The empty normal form is `bot`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalForm {
    pub flows: BTreeMap<DnkTerm, NkRelation>,
    pub comms: BTreeSet<CommSummand>,
}

impl NormalForm {
    pub fn is_bot(&self) -> bool {
        self.flows.values().all(|r| r.is_empty()) && self.comms.is_empty()
    }

    fn add_flow(&mut self, cont: DnkTerm, rel: &NkRelation) {
        if rel.is_empty() {
            return;
        }
        self.flows
            .entry(cont)
            .and_modify(|r| *r = r.union(rel))
            .or_insert_with(|| rel.clone());
    }

    fn merge(&mut self, other: NormalForm) {
        for (cont, rel) in other.flows {
            self.add_flow(cont, &rel);
        }
        self.comms.extend(other.comms);
    }

    /// Applies `f` to every continuation, re-canonicalizing.
    fn map_conts(self, f: impl Fn(DnkTerm) -> DnkTerm) -> NormalForm {
        let mut out = NormalForm::default();
        for (cont, rel) in self.flows {
            out.add_flow(canonical(&f(cont)), &rel);
        }
        for c in self.comms {
            out.comms.insert(CommSummand {
                cont: canonical(&f(c.cont)),
                ..c
            });
        }
        out
    }

    /// Rebuilds a term from the normal form, with canonical policies.
    pub fn to_term(&self, ctx: &Ctx) -> DnkTerm {
        let mut summands = Vec::new();
        for (cont, rel) in &self.flows {
            summands.push(DnkTerm::seq_pol(
                policy_of_relation(rel, &ctx.schema),
                cont.clone(),
            ));
        }
        for c in &self.comms {
            let p = policy_of_relation(&c.rel, &ctx.schema);
            summands.push(match c.kind {
                CommKind::Recv => DnkTerm::recv(&c.chan, p, c.cont.clone()),
                CommKind::Send => DnkTerm::send(&c.chan, p, c.cont.clone()),
                CommKind::Rcfg => DnkTerm::rcfg(&c.chan, p, c.cont.clone()),
            });
        }
        canonical(&DnkTerm::choice(summands))
    }

    /// The transitions this normal form describes, for cross-checking
    /// against the operational semantics.
    pub fn transitions(&self) -> BTreeSet<(Label, DnkTerm)> {
        let mut out = BTreeSet::new();
        for (cont, rel) in &self.flows {
            for &(a, b) in &rel.pairs {
                out.insert((Label::Flow(a, b), cont.clone()));
            }
        }
        for c in &self.comms {
            let label = match c.kind {
                CommKind::Recv => Label::Recv(c.chan.clone(), c.rel.clone()),
                CommKind::Send => Label::Send(c.chan.clone(), c.rel.clone()),
                CommKind::Rcfg => Label::Rcfg(c.chan.clone(), c.rel.clone()),
            };
            out.insert((label, c.cont.clone()));
        }
        out
    }
}

/// Computes the head normal form of a term by one round of axiomatic
/// rewriting: prefixes are split over complete points (kept symbolic as a
/// relation), choice is flattened, parallel composition is expanded into
/// left merges plus closed synchronizations, restriction filters blocked
/// communication summands, and projection counts down on continuations.
pub fn head_normal_form(t: &DnkTerm, defs: &Definitions, ctx: &Ctx) -> Result<NormalForm> {
    Ok(match t {
        DnkTerm::Bot => NormalForm::default(),
        DnkTerm::SeqN(p, d) => {
            let mut nf = NormalForm::default();
            nf.add_flow(canonical(d), ctx.normalize(p)?.as_ref());
            nf
        }
        DnkTerm::Recv(x, p, d) | DnkTerm::Send(x, p, d) | DnkTerm::Rcfg(x, p, d) => {
            let kind = match t {
                DnkTerm::Recv(..) => CommKind::Recv,
                DnkTerm::Send(..) => CommKind::Send,
                _ => CommKind::Rcfg,
            };
            let mut nf = NormalForm::default();
            nf.comms.insert(CommSummand {
                kind,
                chan: x.clone(),
                rel: Arc::new(ctx.normalize(p)?.as_ref().clone()),
                cont: canonical(d),
            });
            nf
        }
        DnkTerm::OPlus(a, b) => {
            let mut nf = head_normal_form(a, defs, ctx)?;
            nf.merge(head_normal_form(b, defs, ctx)?);
            nf
        }
        DnkTerm::Var(x) => head_normal_form(defs.get(x)?, defs, ctx)?,
        DnkTerm::Par(a, b) => {
            let na = head_normal_form(a, defs, ctx)?;
            let nb = head_normal_form(b, defs, ctx)?;
            let mut nf = na
                .clone()
                .map_conts(|c| DnkTerm::par(c, b.as_ref().clone()));
            nf.merge(
                nb.clone()
                    .map_conts(|c| DnkTerm::par(c, a.as_ref().clone())),
            );
            nf.comms.extend(comm_pairs(&na, &nb));
            nf
        }
        DnkTerm::LeftMerge(a, b) => head_normal_form(a, defs, ctx)?
            .map_conts(|c| DnkTerm::par(c, b.as_ref().clone())),
        DnkTerm::CommMerge(a, b) => {
            let na = head_normal_form(a, defs, ctx)?;
            let nb = head_normal_form(b, defs, ctx)?;
            NormalForm {
                flows: BTreeMap::new(),
                comms: comm_pairs(&na, &nb),
            }
        }
        DnkTerm::Delta(l, d) => {
            let nd = head_normal_form(d, defs, ctx)?;
            let mut nf = NormalForm::default();
            for (cont, rel) in nd.flows {
                nf.add_flow(
                    canonical(&DnkTerm::Delta(l.clone(), Arc::new(cont))),
                    &rel,
                );
            }
            for c in nd.comms {
                let blocked = match c.kind {
                    CommKind::Recv => l.blocks(Dir::Recv, &c.chan, &c.rel),
                    CommKind::Send => l.blocks(Dir::Send, &c.chan, &c.rel),
                    CommKind::Rcfg => false,
                };
                if !blocked {
                    nf.comms.insert(CommSummand {
                        cont: canonical(&DnkTerm::Delta(l.clone(), Arc::new(c.cont))),
                        ..c
                    });
                }
            }
            nf
        }
        DnkTerm::Proj(0, _) => NormalForm::default(),
        DnkTerm::Proj(n, d) => {
            let n = *n;
            head_normal_form(d, defs, ctx)?
                .map_conts(move |c| DnkTerm::Proj(n - 1, Arc::new(c)))
        }
    })
}

/// Closed synchronizations between the communication summands of two normal
/// forms: a receive against a send of an equivalent policy on the same
/// channel, in either orientation.
fn comm_pairs(na: &NormalForm, nb: &NormalForm) -> BTreeSet<CommSummand> {
    let mut out = BTreeSet::new();
    for ca in &na.comms {
        for cb in &nb.comms {
            let ok = ca.chan == cb.chan
                && ca.rel == cb.rel
                && matches!(
                    (ca.kind, cb.kind),
                    (CommKind::Recv, CommKind::Send) | (CommKind::Send, CommKind::Recv)
                );
            if ok {
                out.insert(CommSummand {
                    kind: CommKind::Rcfg,
                    chan: ca.chan.clone(),
                    rel: ca.rel.clone(),
                    cont: canonical(&DnkTerm::par(ca.cont.clone(), cb.cont.clone())),
                });
            }
        }
    }
    out
}

/// Finite approximation of a term: behaviour up to `depth` steps, fully
/// expanded with recursion variables eliminated. Depth zero is `bot`.
pub fn unfold(t: &DnkTerm, defs: &Definitions, ctx: &Ctx, depth: u32) -> Result<DnkTerm> {
    let mut memo = HashMap::new();
    unfold_memo(&canonical(t), defs, ctx, depth, &mut memo)
}

fn unfold_memo(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    depth: u32,
    memo: &mut HashMap<(DnkTerm, u32), DnkTerm>,
) -> Result<DnkTerm> {
    if depth == 0 {
        return Ok(DnkTerm::Bot);
    }
    if let Some(r) = memo.get(&(t.clone(), depth)) {
        return Ok(r.clone());
    }
    let nf = head_normal_form(t, defs, ctx)?;
    let mut summands = Vec::new();
    // group flows by unfolded continuation: distinct continuations may
    // become equal once truncated, and their relations must then be pooled
    // for the comparison to respect the transition structure
    let mut flows: BTreeMap<DnkTerm, NkRelation> = BTreeMap::new();
    for (cont, rel) in &nf.flows {
        let k = unfold_memo(cont, defs, ctx, depth - 1, memo)?;
        flows
            .entry(k)
            .and_modify(|r| *r = r.union(rel))
            .or_insert_with(|| rel.clone());
    }
    for (k, rel) in flows {
        summands.push(DnkTerm::seq_pol(policy_of_relation(&rel, &ctx.schema), k));
    }
    for c in &nf.comms {
        let k = unfold_memo(&c.cont, defs, ctx, depth - 1, memo)?;
        let p = policy_of_relation(&c.rel, &ctx.schema);
        summands.push(match c.kind {
            CommKind::Recv => DnkTerm::recv(&c.chan, p, k),
            CommKind::Send => DnkTerm::send(&c.chan, p, k),
            CommKind::Rcfg => DnkTerm::rcfg(&c.chan, p, k),
        });
    }
    let result = canonical(&DnkTerm::choice(summands));
    memo.insert((t.clone(), depth), result.clone());
    Ok(result)
}

/// Equality modulo associativity, commutativity, idempotence, units, and
/// policy equivalence, for recursion-free terms. Policies are replaced by
/// their canonical forms and the results compared structurally.
pub fn aci_equal(a: &DnkTerm, b: &DnkTerm, ctx: &Ctx) -> Result<bool> {
    Ok(canonical(&canon_policies(a, ctx)?) == canonical(&canon_policies(b, ctx)?))
}

fn canon_policies(t: &DnkTerm, ctx: &Ctx) -> Result<DnkTerm> {
    let canon = |p: &Arc<crate::netkat::NkPolicy>| -> Result<Arc<crate::netkat::NkPolicy>> {
        Ok(Arc::new(policy_of_relation(
            ctx.normalize(p)?.as_ref(),
            &ctx.schema,
        )))
    };
    Ok(match t {
        DnkTerm::Bot => DnkTerm::Bot,
        DnkTerm::Var(x) => {
            return Err(Error::Invalid(format!(
                "cannot decide equality of open terms: variable `{x}`"
            )))
        }
        DnkTerm::SeqN(p, d) => DnkTerm::SeqN(canon(p)?, Arc::new(canon_policies(d, ctx)?)),
        DnkTerm::Recv(x, p, d) => {
            DnkTerm::Recv(x.clone(), canon(p)?, Arc::new(canon_policies(d, ctx)?))
        }
        DnkTerm::Send(x, p, d) => {
            DnkTerm::Send(x.clone(), canon(p)?, Arc::new(canon_policies(d, ctx)?))
        }
        DnkTerm::Rcfg(x, p, d) => {
            DnkTerm::Rcfg(x.clone(), canon(p)?, Arc::new(canon_policies(d, ctx)?))
        }
        DnkTerm::Par(a, b) => DnkTerm::Par(
            Arc::new(canon_policies(a, ctx)?),
            Arc::new(canon_policies(b, ctx)?),
        ),
        DnkTerm::OPlus(a, b) => DnkTerm::OPlus(
            Arc::new(canon_policies(a, ctx)?),
            Arc::new(canon_policies(b, ctx)?),
        ),
        DnkTerm::LeftMerge(a, b) => DnkTerm::LeftMerge(
            Arc::new(canon_policies(a, ctx)?),
            Arc::new(canon_policies(b, ctx)?),
        ),
        DnkTerm::CommMerge(a, b) => DnkTerm::CommMerge(
            Arc::new(canon_policies(a, ctx)?),
            Arc::new(canon_policies(b, ctx)?),
        ),
        DnkTerm::Delta(l, d) => DnkTerm::Delta(l.clone(), Arc::new(canon_policies(d, ctx)?)),
        DnkTerm::Proj(n, d) => DnkTerm::Proj(*n, Arc::new(canon_policies(d, ctx)?)),
    })
}

/// The prefix-closed set of label sequences of length at most `depth`,
/// computed through repeated head normal forms. Errors out once more than
/// `budget` distinct words have been produced.
pub fn trace_expand(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    depth: u32,
    budget: usize,
) -> Result<BTreeSet<Vec<Label>>> {
    let mut out: BTreeSet<Vec<Label>> = [Vec::new()].into();
    let mut frontier: BTreeSet<(DnkTerm, Vec<Label>)> = [(canonical(t), Vec::new())].into();
    for _ in 0..depth {
        // a word may be realized by several distinct continuations, and
        // each of them contributes its own extensions
        let mut next = BTreeSet::new();
        let mut nf_cache: HashMap<DnkTerm, BTreeSet<(Label, DnkTerm)>> = HashMap::new();
        for (s, w) in frontier {
            let steps = match nf_cache.get(&s) {
                Some(steps) => steps.clone(),
                None => {
                    let steps = head_normal_form(&s, defs, ctx)?.transitions();
                    nf_cache.insert(s.clone(), steps.clone());
                    steps
                }
            };
            for (l, cont) in steps {
                let mut w2 = w.clone();
                w2.push(l);
                if out.insert(w2.clone()) && out.len() > budget {
                    return Err(Error::WordBudget { limit: budget });
                }
                next.insert((cont, w2));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(out)
}
