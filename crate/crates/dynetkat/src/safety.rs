//! Safety properties: "no execution exhibits a word of this regular
//! expression as a prefix of its trace". Properties range over a declared
//! finite alphabet of complete flow steps and reconfiguration events; sugar
//! (`true`, negated letters, powers) is eliminated first, then the
//! expression is flattened into a finite set of forbidden words and checked
//! by a product search of the transition system against a word trie. A
//! separate encoding of the property as a most-permissive safe process term
//! serves as an independent oracle via trace inclusion.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::dnk::{canonical, DnkTerm, Definitions};
use crate::error::{Error, Result};
use crate::netkat::{policy_of_relation, Ctx, NkPolicy, NkRelation};
use crate::sos::{term_step, Label};

/// A letter of the property alphabet: one complete flow step (input and
/// output packet index) or one reconfiguration event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Act {
    Flow { test: u32, assign: u32 },
    Rcfg { chan: String, rel: NkRelation },
}

impl Act {
    pub fn render(&self, ctx: &Ctx) -> String {
        match self {
            Act::Flow { test, assign } => format!(
                "flow({}, {})",
                ctx.schema.format_packet(&ctx.schema.packet_at(*test)),
                ctx.schema.format_packet(&ctx.schema.packet_at(*assign)),
            ),
            Act::Rcfg { chan, rel } => format!(
                "rcfg({chan}, {})",
                crate::netkat::format_relation(rel, &ctx.schema)
            ),
        }
    }

    fn of_label(label: &Label) -> Option<Act> {
        match label {
            Label::Flow(a, b) => Some(Act::Flow {
                test: *a,
                assign: *b,
            }),
            Label::Rcfg(x, r) => Some(Act::Rcfg {
                chan: x.clone(),
                rel: r.as_ref().clone(),
            }),
            Label::Recv(..) | Label::Send(..) => None,
        }
    }
}

/// The declared alphabet a property ranges over.
#[derive(Debug, Clone, Default)]
pub struct Alphabet {
    pub acts: BTreeSet<Act>,
}

impl Alphabet {
    pub fn contains(&self, a: &Act) -> bool {
        self.acts.contains(a)
    }
}

/// The longest word an expression can denote, independent of the
/// alphabet. Used to bound the exploration that derives an alphabet.
pub fn word_bound(r: &Regexp) -> usize {
    match r {
        Regexp::True | Regexp::Act(_) | Regexp::NotAct(_) => 1,
        Regexp::Plus(a, b) => word_bound(a).max(word_bound(b)),
        Regexp::Cat(a, b) => word_bound(a) + word_bound(b),
        Regexp::Pow(a, n) => word_bound(a) * (*n as usize).max(1),
    }
}

/// Collects an alphabet from the labels a term can reach within `depth`
/// steps; a bare send/receive step within the bound is an error.
pub fn derive_alphabet(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    depth: usize,
) -> Result<Alphabet> {
    let mut acts = BTreeSet::new();
    let mut seen: BTreeSet<DnkTerm> = [canonical(t)].into();
    let mut frontier: Vec<DnkTerm> = seen.iter().cloned().collect();
    for _ in 0..depth {
        let mut next = Vec::new();
        for s in frontier {
            for (label, s2) in term_step(&s, defs, ctx)? {
                match Act::of_label(&label) {
                    Some(a) => {
                        acts.insert(a);
                    }
                    None => {
                        return Err(Error::ResidualComm(
                            "bare send/receive step while deriving the alphabet; \
                             restrict the term first"
                                .into(),
                        ))
                    }
                }
                let c = canonical(&s2);
                if seen.insert(c.clone()) {
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    Ok(Alphabet { acts })
}

/// Regular expressions over the alphabet, including the sugar eliminated by
/// `desugar`: `true` (any letter), negated letters (any *other* letter of
/// the same kind), and powers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Regexp {
    True,
    Act(Act),
    NotAct(Act),
    Plus(Box<Regexp>, Box<Regexp>),
    Cat(Box<Regexp>, Box<Regexp>),
    Pow(Box<Regexp>, u32),
}

/// Sugar-free expressions: letters, choice, concatenation, and the empty
/// word (the meaning of a zeroth power).
#[derive(Debug, Clone)]
pub enum Plain {
    Eps,
    Act(Act),
    Plus(Box<Plain>, Box<Plain>),
    Cat(Box<Plain>, Box<Plain>),
}

fn sum_of(acts: impl IntoIterator<Item = Act>) -> Result<Plain> {
    let mut items: Vec<Plain> = acts.into_iter().map(Plain::Act).collect();
    match items.pop() {
        None => Err(Error::Invalid(
            "negation or `true` denotes an empty set of letters here".into(),
        )),
        Some(last) => Ok(items
            .into_iter()
            .rev()
            .fold(last, |acc, p| Plain::Plus(Box::new(p), Box::new(acc)))),
    }
}

/// Eliminates sugar against the alphabet. Letters must belong to the
/// alphabet; negation of a flow letter covers the other flow letters only,
/// and likewise for reconfigurations.
pub fn desugar(r: &Regexp, alphabet: &Alphabet, ctx: &Ctx) -> Result<Plain> {
    match r {
        Regexp::True => sum_of(alphabet.acts.iter().cloned()),
        Regexp::Act(a) => {
            if !alphabet.contains(a) {
                return Err(Error::ActOutsideAlphabet(a.render(ctx)));
            }
            Ok(Plain::Act(a.clone()))
        }
        Regexp::NotAct(a) => {
            if !alphabet.contains(a) {
                return Err(Error::ActOutsideAlphabet(a.render(ctx)));
            }
            let same_kind = |b: &Act| {
                matches!(
                    (a, b),
                    (Act::Flow { .. }, Act::Flow { .. }) | (Act::Rcfg { .. }, Act::Rcfg { .. })
                )
            };
            sum_of(
                alphabet
                    .acts
                    .iter()
                    .filter(|b| *b != a && same_kind(b))
                    .cloned(),
            )
        }
        Regexp::Plus(x, y) => Ok(Plain::Plus(
            Box::new(desugar(x, alphabet, ctx)?),
            Box::new(desugar(y, alphabet, ctx)?),
        )),
        Regexp::Cat(x, y) => Ok(Plain::Cat(
            Box::new(desugar(x, alphabet, ctx)?),
            Box::new(desugar(y, alphabet, ctx)?),
        )),
        Regexp::Pow(x, n) => {
            if *n == 0 {
                return Ok(Plain::Eps);
            }
            let base = desugar(x, alphabet, ctx)?;
            let mut acc = base.clone();
            for _ in 1..*n {
                acc = Plain::Cat(Box::new(acc), Box::new(base.clone()));
            }
            Ok(acc)
        }
    }
}

/// Flattens a sugar-free expression into its finite set of words by
/// distributing concatenation over choice.
pub fn words(p: &Plain) -> Vec<Vec<Act>> {
    match p {
        Plain::Eps => vec![vec![]],
        Plain::Act(a) => vec![vec![a.clone()]],
        Plain::Plus(x, y) => {
            let mut w = words(x);
            w.extend(words(y));
            w
        }
        Plain::Cat(x, y) => {
            let wx = words(x);
            let wy = words(y);
            let mut out = Vec::with_capacity(wx.len() * wy.len());
            for a in &wx {
                for b in &wy {
                    let mut w = a.clone();
                    w.extend(b.iter().cloned());
                    out.push(w);
                }
            }
            out
        }
    }
}

/// A safety property: the bracketed expression describes the forbidden
/// trace prefixes.
#[derive(Debug, Clone)]
pub struct Property {
    pub alphabet: Alphabet,
    pub forbidden: Regexp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SafetyVerdict {
    Safe,
    /// A trace of the system realizing a forbidden word.
    Violated(Vec<Act>),
}

impl SafetyVerdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, SafetyVerdict::Safe)
    }
}

struct Trie {
    // children per node; terminal nodes mark complete forbidden words
    children: Vec<BTreeMap<Act, usize>>,
    terminal: Vec<bool>,
}

impl Trie {
    fn build(words: &[Vec<Act>]) -> Trie {
        let mut t = Trie {
            children: vec![BTreeMap::new()],
            terminal: vec![false],
        };
        for w in words {
            let mut node = 0;
            for a in w {
                node = match t.children[node].get(a) {
                    Some(&n) => n,
                    None => {
                        let n = t.children.len();
                        t.children.push(BTreeMap::new());
                        t.terminal.push(false);
                        t.children[node].insert(a.clone(), n);
                        n
                    }
                };
            }
            t.terminal[node] = true;
        }
        t
    }
}

/// Checks a safety property directly on the transition system: breadth-first
/// product of reachable states with the trie of forbidden words, bounded by
/// the longest forbidden word. Every flow or reconfiguration label reachable
/// within that bound must belong to the declared alphabet, and the term must
/// be closed (no residual send/receive steps).
pub fn check_safe(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    prop: &Property,
) -> Result<SafetyVerdict> {
    let plain = desugar(&prop.forbidden, &prop.alphabet, ctx)?;
    let forbidden = words(&plain);
    let bound = forbidden.iter().map(|w| w.len()).max().unwrap_or(0);
    let trie = Trie::build(&forbidden);
    // a forbidden empty word is exhibited by every system
    if trie.terminal[0] {
        return Ok(SafetyVerdict::Violated(Vec::new()));
    }

    // validate all labels reachable within the bound
    let mut seen: BTreeSet<DnkTerm> = BTreeSet::new();
    let mut frontier: Vec<DnkTerm> = vec![canonical(t)];
    seen.extend(frontier.iter().cloned());
    let mut steps_of: BTreeMap<DnkTerm, BTreeSet<(Label, DnkTerm)>> = BTreeMap::new();
    for _ in 0..bound {
        let mut next = Vec::new();
        for s in frontier {
            let succs: BTreeSet<(Label, DnkTerm)> = term_step(&s, defs, ctx)?
                .into_iter()
                .map(|(l, t2)| (l, canonical(&t2)))
                .collect();
            for (label, t2) in &succs {
                match Act::of_label(label) {
                    Some(a) => {
                        if !prop.alphabet.contains(&a) {
                            return Err(Error::LabelOutsideAlphabet(a.render(ctx)));
                        }
                    }
                    None => {
                        return Err(Error::ResidualComm(crate::sos::format_label(label, ctx)))
                    }
                }
                if seen.insert(t2.clone()) {
                    next.push(t2.clone());
                }
            }
            steps_of.insert(s, succs);
        }
        frontier = next;
    }

    // product search for a forbidden prefix
    let mut visited: BTreeSet<(DnkTerm, usize)> = BTreeSet::new();
    let mut queue: VecDeque<(DnkTerm, usize, Vec<Act>)> =
        [(canonical(t), 0usize, Vec::new())].into();
    while let Some((s, node, word)) = queue.pop_front() {
        if !visited.insert((s.clone(), node)) {
            continue;
        }
        let succs = match steps_of.get(&s) {
            Some(succs) => succs.clone(),
            None => continue,
        };
        for (label, t2) in succs {
            let a = Act::of_label(&label).expect("validated above");
            if let Some(&child) = trie.children[node].get(&a) {
                let mut w2 = word.clone();
                w2.push(a);
                if trie.terminal[child] {
                    return Ok(SafetyVerdict::Violated(w2));
                }
                queue.push_back((t2, child, w2));
            }
        }
    }
    Ok(SafetyVerdict::Safe)
}

fn act_to_term(a: &Act, cont: DnkTerm, ctx: &Ctx) -> DnkTerm {
    match a {
        Act::Flow { test, assign } => {
            let p = NkPolicy::seq(
                crate::netkat::complete_test(&ctx.schema.packet_at(*test), &ctx.schema),
                crate::netkat::complete_assignment(&ctx.schema.packet_at(*assign), &ctx.schema),
            );
            DnkTerm::seq_pol(p, cont)
        }
        Act::Rcfg { chan, rel } => {
            DnkTerm::rcfg(chan, policy_of_relation(rel, &ctx.schema), cont)
        }
    }
}

/// Encodes a property as the most permissive process over the alphabet that
/// never completes a forbidden word, adding its (guarded) definitions under
/// the given name prefix. Used as an independent oracle: the checked system
/// is safe exactly when its traces are included in this process's traces.
pub fn prop_to_dnk(
    prop: &Property,
    ctx: &Ctx,
    defs: &mut Definitions,
    prefix: &str,
) -> Result<DnkTerm> {
    let plain = desugar(&prop.forbidden, &prop.alphabet, ctx)?;
    let forbidden = words(&plain);
    let trie = Trie::build(&forbidden);

    let theta = format!("{prefix}_free");
    let node_name = |i: usize| format!("{prefix}_node{i}");
    // the unconstrained process: any letter, then stop or continue
    defs.define(
        &theta,
        DnkTerm::choice(prop.alphabet.acts.iter().map(|a| {
            DnkTerm::oplus(
                act_to_term(a, DnkTerm::Bot, ctx),
                act_to_term(a, DnkTerm::var(&theta), ctx),
            )
        })),
    )?;
    for (i, children) in trie.children.iter().enumerate() {
        let mut summands = Vec::new();
        for a in &prop.alphabet.acts {
            match children.get(a) {
                // completing a forbidden word is the one excluded move
                Some(&c) if trie.terminal[c] => {}
                Some(&c) => {
                    summands.push(DnkTerm::oplus(
                        act_to_term(a, DnkTerm::Bot, ctx),
                        act_to_term(a, DnkTerm::var(&node_name(c)), ctx),
                    ));
                }
                None => {
                    summands.push(DnkTerm::oplus(
                        act_to_term(a, DnkTerm::Bot, ctx),
                        act_to_term(a, DnkTerm::var(&theta), ctx),
                    ));
                }
            }
        }
        defs.define(&node_name(i), DnkTerm::choice(summands))?;
    }
    Ok(DnkTerm::var(&node_name(0)))
}

/// Oracle-based safety check via trace inclusion in the permissive process,
/// bounded by the longest forbidden word. Expansion is guarded by a budget
/// on `|alphabet| ^ bound`.
pub fn check_safe_via_oracle(
    t: &DnkTerm,
    defs: &Definitions,
    ctx: &Ctx,
    prop: &Property,
    word_budget: usize,
) -> Result<bool> {
    let plain = desugar(&prop.forbidden, &prop.alphabet, ctx)?;
    let all_words = words(&plain);
    // a forbidden empty word is realized by every system's empty trace,
    // which inclusion in the permissive process cannot detect
    if all_words.iter().any(|w| w.is_empty()) {
        return Ok(false);
    }
    let bound = all_words.iter().map(|w| w.len()).max().unwrap_or(0) as u32;
    let mut explosion: u64 = 1;
    for _ in 0..bound {
        explosion = explosion.saturating_mul(prop.alphabet.acts.len() as u64);
        if explosion > word_budget as u64 {
            return Err(Error::PropBudget(explosion));
        }
    }
    let mut all_defs = defs.clone();
    let spec_term = prop_to_dnk(prop, ctx, &mut all_defs, "__prop")?;
    let cex = crate::equiv::trace_included(t, &spec_term, &all_defs, ctx, bound, word_budget)?;
    Ok(cex.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netkat::NkRelation;
    use crate::packet::FieldSchema;

    fn ctx() -> Ctx {
        Ctx::new(
            FieldSchema::new(vec![("port".into(), vec!["int".into(), "ext".into()])]).unwrap(),
        )
    }

    fn flow(a: u32, b: u32) -> Act {
        Act::Flow { test: a, assign: b }
    }

    fn alphabet(ctx: &Ctx) -> Alphabet {
        let n = ctx.packet_count();
        let mut acts = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                acts.insert(flow(a, b));
            }
        }
        acts.insert(Act::Rcfg {
            chan: "up".into(),
            rel: NkRelation::identity(n),
        });
        Alphabet { acts }
    }

    #[test]
    fn desugar_true_and_negation() {
        let ctx = ctx();
        let al = alphabet(&ctx);
        let all = words(&desugar(&Regexp::True, &al, &ctx).unwrap());
        assert_eq!(all.len(), al.acts.len());
        // negated flow letter: the other flows, not the rcfg
        let not = words(&desugar(&Regexp::NotAct(flow(0, 0)), &al, &ctx).unwrap());
        assert_eq!(not.len(), 3);
        assert!(not.iter().all(|w| matches!(w[0], Act::Flow { .. })));
    }

    #[test]
    fn desugar_rejects_foreign_letters() {
        let ctx = ctx();
        let al = Alphabet {
            acts: [flow(0, 0)].into(),
        };
        assert!(matches!(
            desugar(&Regexp::Act(flow(1, 1)), &al, &ctx),
            Err(Error::ActOutsideAlphabet(_))
        ));
    }

    #[test]
    fn power_expands_words() {
        let ctx = ctx();
        let al = alphabet(&ctx);
        let r = Regexp::Pow(Box::new(Regexp::Act(flow(0, 0))), 3);
        let w = words(&desugar(&r, &al, &ctx).unwrap());
        assert_eq!(w, vec![vec![flow(0, 0); 3]]);
    }

    #[test]
    fn direct_check_finds_violation() {
        let ctx = ctx();
        let defs = Definitions::new();
        // system does (int,int) then (int,ext)
        let t = DnkTerm::seq_pol(
            NkPolicy::test("port", "int"),
            DnkTerm::seq_pol(
                NkPolicy::seq(NkPolicy::test("port", "int"), NkPolicy::assign("port", "ext")),
                DnkTerm::Bot,
            ),
        );
        let safe_prop = Property {
            alphabet: alphabet(&ctx),
            forbidden: Regexp::Act(flow(1, 1)),
        };
        assert!(check_safe(&t, &defs, &ctx, &safe_prop).unwrap().is_safe());
        let bad_prop = Property {
            alphabet: alphabet(&ctx),
            forbidden: Regexp::Cat(
                Box::new(Regexp::Act(flow(0, 0))),
                Box::new(Regexp::Act(flow(0, 1))),
            ),
        };
        match check_safe(&t, &defs, &ctx, &bad_prop).unwrap() {
            SafetyVerdict::Violated(w) => assert_eq!(w, vec![flow(0, 0), flow(0, 1)]),
            SafetyVerdict::Safe => panic!("expected violation"),
        }
    }

    #[test]
    fn direct_check_agrees_with_oracle() {
        let ctx = ctx();
        let defs = Definitions::new();
        let t = DnkTerm::seq_pol(
            NkPolicy::one(),
            DnkTerm::seq_pol(NkPolicy::test("port", "ext"), DnkTerm::Bot),
        );
        for forbidden in [
            Regexp::Act(flow(0, 0)),
            Regexp::Cat(
                Box::new(Regexp::True),
                Box::new(Regexp::Act(flow(1, 1))),
            ),
            Regexp::Cat(
                Box::new(Regexp::NotAct(flow(1, 1))),
                Box::new(Regexp::Act(flow(1, 1))),
            ),
        ] {
            let prop = Property {
                alphabet: alphabet(&ctx),
                forbidden,
            };
            let direct = check_safe(&t, &defs, &ctx, &prop).unwrap().is_safe();
            let oracle = check_safe_via_oracle(&t, &defs, &ctx, &prop, 100_000).unwrap();
            assert_eq!(direct, oracle);
        }
    }

    #[test]
    fn residual_comm_is_rejected() {
        let ctx = ctx();
        let defs = Definitions::new();
        let t = DnkTerm::send("up", NkPolicy::one(), DnkTerm::Bot);
        let prop = Property {
            alphabet: alphabet(&ctx),
            forbidden: Regexp::Act(flow(0, 0)),
        };
        assert!(matches!(
            check_safe(&t, &defs, &ctx, &prop),
            Err(Error::ResidualComm(_))
        ));
    }

    #[test]
    fn labels_outside_alphabet_are_rejected() {
        let ctx = ctx();
        let defs = Definitions::new();
        let t = DnkTerm::seq_pol(NkPolicy::one(), DnkTerm::Bot);
        let prop = Property {
            alphabet: Alphabet {
                acts: [flow(0, 0)].into(),
            },
            forbidden: Regexp::Act(flow(0, 0)),
        };
        assert!(matches!(
            check_safe(&t, &defs, &ctx, &prop),
            Err(Error::LabelOutsideAlphabet(_))
        ));
    }
}
