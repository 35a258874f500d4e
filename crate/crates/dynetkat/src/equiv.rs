//! Equivalence checking for dynamic terms: strong bisimilarity by partition
//! refinement with counterexample extraction, bounded equational equivalence
//! through finite unfoldings, and trace inclusion.

use std::collections::{BTreeMap, BTreeSet};

use crate::dnk::{DnkTerm, Definitions};
use crate::error::{Error, Result};
use crate::netkat::{nk_equiv, Ctx, NkPolicy};
use crate::norm::{aci_equal, trace_expand, unfold};
use crate::sos::{build_term_lts, format_label, Label, Lts};

/// Evidence that two terms are not bisimilar: after the common `trace`, the
/// side named by `lacking` cannot match the `missing` label. For
/// nondeterministic systems the trace is a guided path (successors chosen to
/// preserve the distinction), which still pinpoints the divergence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub trace: Vec<Label>,
    pub missing: Label,
    pub lacking: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Witness {
    pub fn render(&self, ctx: &Ctx) -> String {
        let side = match self.lacking {
            Side::Left => "left",
            Side::Right => "right",
        };
        let prefix = if self.trace.is_empty() {
            "initially".to_string()
        } else {
            format!(
                "after {}",
                self.trace
                    .iter()
                    .map(|l| format_label(l, ctx))
                    .collect::<Vec<_>>()
                    .join(" . ")
            )
        };
        format!(
            "{prefix}, the {side} term cannot match {}",
            format_label(&self.missing, ctx)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    Inequivalent(Witness),
    Inconclusive(String),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Equivalent)
    }
}

/// Decides strong bisimilarity of two terms over their (finite) transition
/// systems. A state-budget overflow yields `Inconclusive`.
pub fn bisimilar(
    t1: &DnkTerm,
    t2: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    max_states: usize,
) -> Result<Verdict> {
    let l1 = match build_term_lts(t1, defs, ctx, max_states) {
        Ok(l) => l,
        Err(Error::StateBudget { explored }) => {
            return Ok(Verdict::Inconclusive(format!(
                "state budget exhausted after {explored} states while exploring the left term"
            )))
        }
        Err(e) => return Err(e),
    };
    let l2 = match build_term_lts(t2, defs, ctx, max_states) {
        Ok(l) => l,
        Err(Error::StateBudget { explored }) => {
            return Ok(Verdict::Inconclusive(format!(
                "state budget exhausted after {explored} states while exploring the right term"
            )))
        }
        Err(e) => return Err(e),
    };
    Ok(bisimilar_lts(&l1, &l2))
}

/// Partition refinement on the disjoint union of the two systems, keeping
/// each round's partition for witness extraction.
pub fn bisimilar_lts<S, T>(l1: &Lts<S>, l2: &Lts<T>) -> Verdict {
    let n1 = l1.states.len();
    let n = n1 + l2.states.len();
    // union transitions, right states shifted by n1
    let trans: Vec<BTreeSet<(Label, usize)>> = l1
        .transitions
        .iter()
        .cloned()
        .chain(
            l2.transitions
                .iter()
                .map(|succs| succs.iter().map(|(l, j)| (l.clone(), j + n1)).collect()),
        )
        .collect();
    let init1 = l1.initial;
    let init2 = l2.initial + n1;

    // rounds[k][state] = block id after k refinement rounds
    let mut rounds: Vec<Vec<usize>> = vec![vec![0; n]];
    loop {
        let prev = rounds.last().unwrap();
        let mut sig_to_block: BTreeMap<(usize, BTreeSet<(Label, usize)>), usize> = BTreeMap::new();
        let mut next = vec![0; n];
        for (s, succs) in trans.iter().enumerate() {
            let sig: BTreeSet<(Label, usize)> =
                succs.iter().map(|(l, j)| (l.clone(), prev[*j])).collect();
            let key = (prev[s], sig);
            let id = sig_to_block.len();
            let block = *sig_to_block.entry(key).or_insert(id);
            next[s] = block;
        }
        let stable = {
            // partition unchanged when the block relation is identical
            let mut renaming: BTreeMap<usize, usize> = BTreeMap::new();
            let mut same = true;
            for s in 0..n {
                match renaming.get(&next[s]) {
                    Some(&p) if p == prev[s] => {}
                    Some(_) => {
                        same = false;
                        break;
                    }
                    None => {
                        renaming.insert(next[s], prev[s]);
                    }
                }
            }
            same && renaming.len() == prev.iter().collect::<BTreeSet<_>>().len()
        };
        rounds.push(next);
        if stable {
            break;
        }
    }

    let final_blocks = rounds.last().unwrap();
    if final_blocks[init1] == final_blocks[init2] {
        return Verdict::Equivalent;
    }
    Verdict::Inequivalent(extract_witness(&trans, &rounds, init1, init2))
}

/// Separation level of two states: the first round that puts them in
/// different blocks. Bisimilar states have no such round.
fn sep_level(rounds: &[Vec<usize>], a: usize, b: usize) -> Option<usize> {
    (0..rounds.len()).find(|&k| rounds[k][a] != rounds[k][b])
}

fn extract_witness(
    trans: &[BTreeSet<(Label, usize)>],
    rounds: &[Vec<usize>],
    mut s1: usize,
    mut s2: usize,
) -> Witness {
    let mut trace = Vec::new();
    loop {
        let k = sep_level(rounds, s1, s2).expect("states must be separated");
        debug_assert!(k > 0, "round zero is a single block");
        let prev = &rounds[k - 1];
        let sig = |s: usize| -> BTreeSet<(Label, usize)> {
            trans[s].iter().map(|(l, j)| (l.clone(), prev[*j])).collect()
        };
        let (sig1, sig2) = (sig(s1), sig(s2));
        // some (label, block) move is available on exactly one side; `a`
        // has it, `b` must fail to match it
        let (a, b, dst_side, diff) = match sig1.difference(&sig2).next() {
            Some(d) => (s1, s2, Side::Right, d.clone()),
            None => {
                let d = sig2.difference(&sig1).next().unwrap().clone();
                (s2, s1, Side::Left, d)
            }
        };
        let (label, block) = diff;
        let matching: Vec<usize> = trans[b]
            .iter()
            .filter(|(l, _)| *l == label)
            .map(|(_, j)| *j)
            .collect();
        if matching.is_empty() {
            return Witness {
                trace,
                missing: label,
                lacking: dst_side,
            };
        }
        // pick a successor of `a` inside the distinguishing block and the
        // opposing successor separated from it at the earliest round
        let t1 = trans[a]
            .iter()
            .find(|(l, j)| *l == label && rounds[k - 1][*j] == block)
            .map(|(_, j)| *j)
            .unwrap();
        let t2 = matching
            .into_iter()
            .min_by_key(|&j| sep_level(rounds, t1, j).unwrap_or(usize::MAX))
            .unwrap();
        trace.push(label);
        match dst_side {
            Side::Right => {
                s1 = t1;
                s2 = t2;
            }
            Side::Left => {
                s1 = t2;
                s2 = t1;
            }
        }
    }
}

/// Bounded equational equivalence: the finite unfoldings of the two terms
/// agree at every depth up to `n`. Returns the first depth at which they
/// differ, if any.
pub fn bounded_equiv(
    t1: &DnkTerm,
    t2: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    n: u32,
) -> Result<Option<u32>> {
    for k in 0..=n {
        let u1 = unfold(t1, defs, ctx, k)?;
        let u2 = unfold(t2, defs, ctx, k)?;
        if !aci_equal(&u1, &u2, ctx)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Checks that policy equivalence and bisimilarity agree on prefixed terms:
/// `p` and `q` are equivalent policies exactly when `p;d` and `q;d` are
/// bisimilar.
pub fn layering_agrees(
    p: &NkPolicy,
    q: &NkPolicy,
    d: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    max_states: usize,
) -> Result<bool> {
    let pol = nk_equiv(p, q, &ctx.schema)?;
    let t1 = DnkTerm::seq_pol(p.clone(), d.clone());
    let t2 = DnkTerm::seq_pol(q.clone(), d.clone());
    match bisimilar(&t1, &t2, defs, ctx, max_states)? {
        Verdict::Equivalent => Ok(pol),
        Verdict::Inequivalent(_) => Ok(!pol),
        Verdict::Inconclusive(msg) => Err(Error::Invalid(msg)),
    }
}

/// Bounded trace inclusion of `t1` in `t2`; returns a shortest trace of
/// `t1` that `t2` lacks, if any.
pub fn trace_included(
    t1: &DnkTerm,
    t2: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    depth: u32,
    budget: usize,
) -> Result<Option<Vec<Label>>> {
    let w1 = trace_expand(t1, defs, ctx, depth, budget)?;
    let w2 = trace_expand(t2, defs, ctx, depth, budget)?;
    Ok(w1
        .difference(&w2)
        .min_by_key(|w| w.len())
        .cloned())
}
