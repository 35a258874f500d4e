//! Small-step operational semantics: labelled transitions for terms and for
//! configurations (a term paired with input/output packet queues), and
//! breadth-first construction of the induced transition systems.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::dnk::{canonical, Dir, DnkTerm, Definitions};
use crate::error::{Error, Result};
use crate::netkat::{format_relation, Ctx, NkRelation};
use crate::packet::PacketList;

/// Transition label. Flow steps carry concrete input/output packet indices;
/// communication and reconfiguration steps carry the channel and the
/// canonical relation of the communicated policy, so that labels are
/// identified modulo policy equivalence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Flow(u32, u32),
    Recv(String, Arc<NkRelation>),
    Send(String, Arc<NkRelation>),
    Rcfg(String, Arc<NkRelation>),
}

pub fn format_label(label: &Label, ctx: &Ctx) -> String {
    match label {
        Label::Flow(a, b) => format!(
            "({}, {})",
            ctx.schema.format_packet(&ctx.schema.packet_at(*a)),
            ctx.schema.format_packet(&ctx.schema.packet_at(*b))
        ),
        Label::Recv(x, r) => format!("{x}?{}", format_relation(r, &ctx.schema)),
        Label::Send(x, r) => format!("{x}!{}", format_relation(r, &ctx.schema)),
        Label::Rcfg(x, r) => format!("rcfg({x}, {})", format_relation(r, &ctx.schema)),
    }
}

/// All transitions of a term, by structural recursion on the rules.
pub fn term_step(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
) -> Result<BTreeSet<(Label, DnkTerm)>> {
    let mut out = BTreeSet::new();
    step_into(t, defs, ctx, &mut out)?;
    Ok(out)
}

fn step_into(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    out: &mut BTreeSet<(Label, DnkTerm)>,
) -> Result<()> {
    match t {
        DnkTerm::Bot => {}
        DnkTerm::SeqN(p, d) => {
            let rel = ctx.normalize(p)?;
            for &(a, b) in &rel.pairs {
                out.insert((Label::Flow(a, b), d.as_ref().clone()));
            }
        }
        DnkTerm::Recv(x, p, d) => {
            out.insert((
                Label::Recv(x.clone(), Arc::new(ctx.normalize(p)?.as_ref().clone())),
                d.as_ref().clone(),
            ));
        }
        DnkTerm::Send(x, p, d) => {
            out.insert((
                Label::Send(x.clone(), Arc::new(ctx.normalize(p)?.as_ref().clone())),
                d.as_ref().clone(),
            ));
        }
        DnkTerm::Rcfg(x, p, d) => {
            out.insert((
                Label::Rcfg(x.clone(), Arc::new(ctx.normalize(p)?.as_ref().clone())),
                d.as_ref().clone(),
            ));
        }
        DnkTerm::OPlus(a, b) => {
            step_into(a, defs, ctx, out)?;
            step_into(b, defs, ctx, out)?;
        }
        DnkTerm::Par(a, b) => {
            let sa = term_step(a, defs, ctx)?;
            let sb = term_step(b, defs, ctx)?;
            for (l, a2) in &sa {
                out.insert((l.clone(), DnkTerm::par(a2.clone(), b.as_ref().clone())));
            }
            for (l, b2) in &sb {
                out.insert((l.clone(), DnkTerm::par(a.as_ref().clone(), b2.clone())));
            }
            sync_steps(&sa, &sb, out);
        }
        DnkTerm::Var(x) => step_into(defs.get(x)?, defs, ctx, out)?,
        DnkTerm::Delta(l, d) => {
            for (label, d2) in term_step(d, defs, ctx)? {
                let blocked = match &label {
                    Label::Recv(x, r) => l.blocks(Dir::Recv, x, r),
                    Label::Send(x, r) => l.blocks(Dir::Send, x, r),
                    Label::Flow(..) | Label::Rcfg(..) => false,
                };
                if !blocked {
                    out.insert((label, DnkTerm::Delta(l.clone(), Arc::new(d2))));
                }
            }
        }
        DnkTerm::Proj(0, _) => {}
        DnkTerm::Proj(n, d) => {
            for (label, d2) in term_step(d, defs, ctx)? {
                out.insert((label, DnkTerm::Proj(n - 1, Arc::new(d2))));
            }
        }
        DnkTerm::LeftMerge(a, b) => {
            for (l, a2) in term_step(a, defs, ctx)? {
                out.insert((l, DnkTerm::par(a2, b.as_ref().clone())));
            }
        }
        DnkTerm::CommMerge(a, b) => {
            let sa = term_step(a, defs, ctx)?;
            let sb = term_step(b, defs, ctx)?;
            sync_steps(&sa, &sb, out);
        }
    }
    Ok(())
}

/// Closed synchronization: a receive on one side against a send of an
/// equivalent policy on the same channel on the other side, in either
/// orientation, producing a reconfiguration step.
fn sync_steps(
    sa: &BTreeSet<(Label, DnkTerm)>,
    sb: &BTreeSet<(Label, DnkTerm)>,
    out: &mut BTreeSet<(Label, DnkTerm)>,
) {
    for (la, a2) in sa {
        for (lb, b2) in sb {
            let hit = match (la, lb) {
                (Label::Recv(x, r), Label::Send(y, s))
                | (Label::Send(x, r), Label::Recv(y, s)) => {
                    if x == y && r == s {
                        Some((x.clone(), r.clone()))
                    } else {
                        None
                    }
                }
                _ => None,
            };
            if let Some((x, r)) = hit {
                out.insert((
                    Label::Rcfg(x, r),
                    DnkTerm::par(a2.clone(), b2.clone()),
                ));
            }
        }
    }
}

/// A configuration: a term together with the list of packets waiting to be
/// processed and the list of packets already emitted (most recent first).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Config {
    pub term: DnkTerm,
    pub pending: PacketList,
    pub done: PacketList,
}

impl Config {
    pub fn new(term: DnkTerm, pending: PacketList) -> Config {
        Config {
            term,
            pending,
            done: PacketList::empty(),
        }
    }
}

/// All transitions of a configuration. Flow steps consume the head of the
/// pending queue and prepend the produced packet to the done queue;
/// communication steps leave both queues unchanged.
pub fn config_step(c: &Config, defs: &Definitions, ctx: &Ctx) -> Result<BTreeSet<(Label, Config)>> {
    let head = c.pending.head().map(|p| ctx.schema.packet_index(p));
    let mut out = BTreeSet::new();
    for (label, t2) in term_step(&c.term, defs, ctx)? {
        match label {
            Label::Flow(a, b) => {
                if head == Some(a) {
                    out.insert((
                        Label::Flow(a, b),
                        Config {
                            term: t2,
                            pending: c.pending.tail(),
                            done: c.done.push_front(ctx.schema.packet_at(b)),
                        },
                    ));
                }
            }
            other => {
                out.insert((
                    other,
                    Config {
                        term: t2,
                        pending: c.pending.clone(),
                        done: c.done.clone(),
                    },
                ));
            }
        }
    }
    Ok(out)
}

/// A finite labelled transition system over states of type `S`.
#[derive(Debug, Clone)]
pub struct Lts<S> {
    pub states: Vec<S>,
    pub transitions: Vec<BTreeSet<(Label, usize)>>,
    pub initial: usize,
}

impl<S> Lts<S> {
    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(|t| t.len()).sum()
    }

    /// The set of label sequences of length at most `depth` from the
    /// initial state (prefix-closed).
    pub fn traces_up_to(&self, depth: usize) -> BTreeSet<Vec<Label>> {
        let mut out: BTreeSet<Vec<Label>> = [Vec::new()].into();
        let mut frontier: Vec<(usize, Vec<Label>)> = vec![(self.initial, Vec::new())];
        for _ in 0..depth {
            let mut next = Vec::new();
            for (s, w) in frontier {
                for (l, t) in &self.transitions[s] {
                    let mut w2 = w.clone();
                    w2.push(l.clone());
                    out.insert(w2.clone());
                    next.push((*t, w2));
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        out
    }

    /// Whether some path from the initial state exhibits exactly this label
    /// sequence.
    pub fn has_trace(&self, word: &[Label]) -> bool {
        let mut current: BTreeSet<usize> = [self.initial].into();
        for l in word {
            let mut next = BTreeSet::new();
            for &s in &current {
                for (m, t) in &self.transitions[s] {
                    if m == l {
                        next.insert(*t);
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        true
    }
}

pub const DEFAULT_STATE_BUDGET: usize = 100_000;

/// Reads the state budget from `DNK_STATE_BUDGET`, falling back to the
/// default.
pub fn state_budget() -> usize {
    std::env::var("DNK_STATE_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_STATE_BUDGET)
}

fn build<S, F>(initial: S, max_states: usize, mut step: F) -> Result<Lts<S>>
where
    S: Ord + Clone,
    F: FnMut(&S) -> Result<BTreeSet<(Label, S)>>,
{
    let mut index: BTreeMap<S, usize> = BTreeMap::new();
    let mut states = vec![initial.clone()];
    index.insert(initial, 0);
    let mut transitions: Vec<BTreeSet<(Label, usize)>> = vec![BTreeSet::new()];
    let mut queue: VecDeque<usize> = [0].into();
    while let Some(i) = queue.pop_front() {
        let succs = step(&states[i].clone())?;
        for (label, s) in succs {
            let j = match index.get(&s) {
                Some(&j) => j,
                None => {
                    if states.len() >= max_states {
                        return Err(Error::StateBudget {
                            explored: states.len(),
                        });
                    }
                    let j = states.len();
                    states.push(s.clone());
                    transitions.push(BTreeSet::new());
                    index.insert(s, j);
                    queue.push_back(j);
                    j
                }
            };
            transitions[i].insert((label, j));
        }
    }
    Ok(Lts {
        states,
        transitions,
        initial: 0,
    })
}

/// Builds the transition system of a term, with states identified up to
/// structural canonicalization.
pub fn build_term_lts(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    max_states: usize,
) -> Result<Lts<DnkTerm>> {
    defs.check_guarded()?;
    defs.check_closed(t)?;
    build(canonical(t), max_states, |s| {
        Ok(term_step(s, defs, ctx)?
            .into_iter()
            .map(|(l, t2)| (l, canonical(&t2)))
            .collect())
    })
}

/// Builds the transition system of a configuration.
pub fn build_config_lts(
    c: &Config,
    defs: &Definitions,
    ctx: &Ctx,
    max_states: usize,
) -> Result<Lts<Config>> {
    defs.check_guarded()?;
    defs.check_closed(&c.term)?;
    let init = Config {
        term: canonical(&c.term),
        pending: c.pending.clone(),
        done: c.done.clone(),
    };
    build(init, max_states, |s| {
        Ok(config_step(s, defs, ctx)?
            .into_iter()
            .map(|(l, c2)| {
                (
                    l,
                    Config {
                        term: canonical(&c2.term),
                        pending: c2.pending,
                        done: c2.done,
                    },
                )
            })
            .collect())
    })
}

/// Plain-text export: one `state` line per state, one `trans` line per
/// transition.
pub fn export_text<S>(lts: &Lts<S>, ctx: &Ctx, show: impl Fn(&S) -> String) -> String {
    let mut out = String::new();
    for (i, s) in lts.states.iter().enumerate() {
        let mark = if i == lts.initial { " initial" } else { "" };
        out.push_str(&format!("state {i}{mark} {}\n", show(s)));
    }
    for (i, succs) in lts.transitions.iter().enumerate() {
        for (l, j) in succs {
            out.push_str(&format!("trans {i} -> {j} [{}]\n", format_label(l, ctx)));
        }
    }
    out
}

/// JSON export with the same information as the text form.
pub fn export_json<S>(lts: &Lts<S>, ctx: &Ctx, show: impl Fn(&S) -> String) -> serde_json::Value {
    serde_json::json!({
        "initial": lts.initial,
        "states": lts.states.iter().map(&show).collect::<Vec<_>>(),
        "transitions": lts
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(i, succs)| {
                succs.iter().map(move |(l, j)| (i, l, *j))
            })
            .map(|(i, l, j)| serde_json::json!({
                "src": i,
                "label": format_label(l, ctx),
                "dst": j,
            }))
            .collect::<Vec<_>>(),
    })
}
