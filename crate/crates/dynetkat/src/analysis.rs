//! Configuration extraction and classical reachability/waypointing analyses,
//! plus the bundled example programs.
//!
//! `head` reads the currently installed flow policy off a term's normal
//! form; `tail` collects the configurations reachable after given
//! reconfiguration events. Both expect terms without bare send/receive
//! steps, which the restriction operator guarantees.

use std::collections::{BTreeSet, HashMap};

use crate::dnk::{
    canonical, Definitions, DnkTerm, FamilyPosition, IndexedFamily, RestrictionSet,
};
use crate::error::{Error, Result};
use crate::netkat::{nk_equiv, nk_is_zero, policy_of_relation, Ctx, NkPolicy, NkPredicate, NkRelation};
use crate::norm::{head_normal_form, CommKind};
use crate::syntax::{parse_program, Program};

/// A reconfiguration event, used as an element of the set `R` that `tail`
/// selects on. Policies are matched by canonical relation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReconfigEvent {
    pub chan: String,
    pub rel: NkRelation,
}

impl ReconfigEvent {
    pub fn new(chan: &str, pol: &NkPolicy, ctx: &Ctx) -> Result<ReconfigEvent> {
        Ok(ReconfigEvent {
            chan: chan.into(),
            rel: ctx.normalize(pol)?.as_ref().clone(),
        })
    }
}

/// The current flow configuration of a term: the sum of the policies of its
/// flow summands. Reconfiguration summands contribute nothing; a bare
/// send/receive summand violates the precondition and is an error.
pub fn head(t: &DnkTerm, defs: &Definitions, ctx: &Ctx) -> Result<NkPolicy> {
    let nf = head_normal_form(t, defs, ctx)?;
    for c in &nf.comms {
        if c.kind != CommKind::Rcfg {
            let sym = if c.kind == CommKind::Recv { "?" } else { "!" };
            return Err(Error::ResidualComm(format!("{}{}", c.chan, sym)));
        }
    }
    let mut rel = NkRelation::empty(ctx.packet_count());
    for r in nf.flows.values() {
        rel = rel.union(r);
    }
    Ok(policy_of_relation(&rel, &ctx.schema))
}

/// Result of `tail`: the collected term, and whether the depth bound cut
/// the collection short.
#[derive(Debug, Clone)]
pub struct TailResult {
    pub term: DnkTerm,
    pub exhausted: bool,
}

/// Default unfolding depth for `tail`: one level per selected event plus
/// slack for the surrounding flow structure.
pub fn default_tail_depth(events: &BTreeSet<ReconfigEvent>) -> u32 {
    events.len() as u32 + 2
}

/// The sum of configurations reachable after the events in `R`: flow
/// summands are traversed, reconfiguration summands whose event belongs to
/// `R` contribute their continuation (and its own tail), and all other
/// reconfiguration summands contribute nothing. Recursion through the
/// (guarded) definitions is cut on revisited terms and bounded by `depth`.
pub fn tail(
    t: &DnkTerm,
    events: &BTreeSet<ReconfigEvent>,
    defs: &Definitions,
    ctx: &Ctx,
    depth: u32,
) -> Result<TailResult> {
    let mut memo: HashMap<DnkTerm, Option<DnkTerm>> = HashMap::new();
    let mut exhausted = false;
    let term = tail_rec(&canonical(t), events, defs, ctx, depth, &mut memo, &mut exhausted)?;
    Ok(TailResult { term, exhausted })
}

fn tail_rec(
    t: &DnkTerm,
    events: &BTreeSet<ReconfigEvent>,
    defs: &Definitions,
    ctx: &Ctx,
    depth: u32,
    memo: &mut HashMap<DnkTerm, Option<DnkTerm>>,
    exhausted: &mut bool,
) -> Result<DnkTerm> {
    match memo.get(t) {
        // a term currently being collected contributes nothing new
        Some(None) => return Ok(DnkTerm::Bot),
        Some(Some(done)) => return Ok(done.clone()),
        None => {}
    }
    if depth == 0 {
        *exhausted = true;
        return Ok(DnkTerm::Bot);
    }
    memo.insert(t.clone(), None);
    let nf = head_normal_form(t, defs, ctx)?;
    let mut parts = Vec::new();
    for cont in nf.flows.keys() {
        parts.push(tail_rec(cont, events, defs, ctx, depth - 1, memo, exhausted)?);
    }
    for c in &nf.comms {
        match c.kind {
            CommKind::Rcfg => {
                let ev = ReconfigEvent {
                    chan: c.chan.clone(),
                    rel: c.rel.as_ref().clone(),
                };
                if events.contains(&ev) {
                    parts.push(c.cont.clone());
                    parts.push(tail_rec(
                        &c.cont,
                        events,
                        defs,
                        ctx,
                        depth - 1,
                        memo,
                        exhausted,
                    )?);
                }
            }
            CommKind::Recv | CommKind::Send => {
                let sym = if c.kind == CommKind::Recv { "?" } else { "!" };
                return Err(Error::ResidualComm(format!("{}{}", c.chan, sym)));
            }
        }
    }
    let result = canonical(&DnkTerm::choice(parts));
    memo.insert(t.clone(), Some(result.clone()));
    Ok(result)
}

fn pred_policy(p: &NkPredicate) -> NkPolicy {
    NkPolicy::Pred(p.clone())
}

/// Reachability: can a packet satisfying `inp` end up satisfying `outp`
/// under iterated switching (`p`) and forwarding (`t`)? With `star` unset
/// the single-application form is checked instead.
pub fn check_reach(
    inp: &NkPredicate,
    p: &NkPolicy,
    topo: &NkPolicy,
    outp: &NkPredicate,
    ctx: &Ctx,
    star: bool,
) -> Result<bool> {
    let hop = NkPolicy::seq(p.clone(), topo.clone());
    let middle = if star { NkPolicy::star(hop) } else { hop };
    let expr = NkPolicy::seq_all([pred_policy(inp), middle, pred_policy(outp)]);
    Ok(!nk_is_zero(&expr, &ctx.schema)?)
}

/// Waypointing: all traffic from `inp` to `outp` passes through `w`.
pub fn check_waypoint(
    inp: &NkPredicate,
    outp: &NkPredicate,
    w: &NkPredicate,
    p: &NkPolicy,
    topo: &NkPolicy,
    ctx: &Ctx,
) -> Result<bool> {
    let hop = |pre: Option<&NkPredicate>| {
        let step = NkPolicy::seq(p.clone(), topo.clone());
        match pre {
            None => step,
            Some(a) => NkPolicy::seq(
                NkPolicy::Pred(NkPredicate::Not(Box::new(a.clone()))),
                step,
            ),
        }
    };
    let reach = NkPolicy::seq_all([
        pred_policy(inp),
        NkPolicy::star(hop(None)),
        pred_policy(outp),
    ]);
    let via = NkPolicy::seq_all([
        pred_policy(inp),
        NkPolicy::star(hop(Some(outp))),
        pred_policy(w),
        NkPolicy::star(hop(Some(inp))),
        pred_policy(outp),
    ]);
    nk_equiv(&NkPolicy::plus(reach, via.clone()), &via, &ctx.schema)
}

/// Closes a program's initial term under restriction of all its channels,
/// forcing synchronous communication.
pub fn closed_init(program: &Program) -> Result<DnkTerm> {
    let init = program
        .init
        .clone()
        .ok_or_else(|| Error::Invalid("program has no `init`".into()))?;
    if program.channels.is_empty() {
        return Ok(init);
    }
    Ok(DnkTerm::delta(
        RestrictionSet::channels(program.channels.iter().cloned()),
        init,
    ))
}

pub const FIXTURE_NAMES: [&str; 3] = [
    "firewall",
    "controllers-independent",
    "controllers-sync",
];

const FIREWALL_SRC: &str = include_str!("../fixtures/firewall.dnk");
const CONTROLLERS_INDEPENDENT_SRC: &str =
    include_str!("../fixtures/controllers-independent.dnk");
const CONTROLLERS_SYNC_SRC: &str = include_str!("../fixtures/controllers-sync.dnk");

/// Loads a bundled example program by name. The controller examples gain
/// the update-driven switch family (which has no file syntax, being a
/// definition per reachable flow-table tuple) and their `init` term here.
pub fn fixture(name: &str) -> Result<Program> {
    let src = match name {
        "firewall" => FIREWALL_SRC,
        "controllers-independent" => CONTROLLERS_INDEPENDENT_SRC,
        "controllers-sync" => CONTROLLERS_SYNC_SRC,
        other => {
            return Err(Error::Invalid(format!(
                "unknown fixture `{other}` (expected one of: {})",
                FIXTURE_NAMES.join(", ")
            )))
        }
    };
    let mut program = parse_program(src)?;
    if name.starts_with("controllers-") {
        attach_switch_family(&mut program)?;
    }
    program.defs.check_guarded()?;
    if let Some(init) = &program.init {
        program.defs.check_closed(init)?;
    }
    Ok(program)
}

/// Builds the indexed `SDN` family over the parsed policies and sets
/// `init = SDN[S1,...,S6] || C1 || C2`.
fn attach_switch_family(program: &mut Program) -> Result<()> {
    let ctx = program.ctx();
    let link = program.netkat["L"].clone();
    let table = |n: &str| program.netkat[n].clone();
    let options: Vec<(String, NkPolicy)> = [
        ("0", NkPolicy::zero()),
        ("ft3", table("ft3")),
        ("ft4", table("ft4")),
        ("ft5", table("ft5")),
        ("ft6", table("ft6")),
    ]
    .map(|(n, p)| (n.to_string(), p))
    .into();
    let initial_name = |i: usize| {
        // the zero tables coincide with the `0` option and share its name
        let name = format!("S{i}");
        let pol = table(&name);
        if pol == NkPolicy::zero() {
            ("0".to_string(), pol)
        } else {
            (name, pol)
        }
    };
    let family = IndexedFamily {
        base: "SDN".into(),
        positions: (1..=6)
            .map(|i| FamilyPosition {
                channel: format!("upS{i}"),
                initial: initial_name(i),
                options: options.clone(),
            })
            .collect(),
        flow: Box::new(move |tables| {
            NkPolicy::star(NkPolicy::seq(
                NkPolicy::sum(tables.iter().map(|p| (*p).clone())),
                link.clone(),
            ))
        }),
    };
    let sdn = family.instantiate(&mut program.defs, &ctx)?;
    program.init = Some(DnkTerm::par(
        DnkTerm::var(&sdn),
        DnkTerm::par(DnkTerm::var("C1"), DnkTerm::var("C2")),
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::FieldSchema;

    fn port_ctx() -> Ctx {
        Ctx::new(
            FieldSchema::new(vec![("port".into(), vec!["int".into(), "ext".into()])]).unwrap(),
        )
    }

    #[test]
    fn head_base_cases() {
        let ctx = port_ctx();
        let defs = Definitions::new();
        // inaction has the empty configuration
        let h = head(&DnkTerm::Bot, &defs, &ctx).unwrap();
        assert!(nk_is_zero(&h, &ctx.schema).unwrap());
        // a reconfiguration prefix contributes nothing
        let t = DnkTerm::rcfg("x", NkPolicy::one(), DnkTerm::seq_pol(NkPolicy::one(), DnkTerm::Bot));
        let h = head(&t, &defs, &ctx).unwrap();
        assert!(nk_is_zero(&h, &ctx.schema).unwrap());
        // a bare send violates the precondition
        assert!(matches!(
            head(&DnkTerm::send("x", NkPolicy::one(), DnkTerm::Bot), &defs, &ctx),
            Err(Error::ResidualComm(_))
        ));
    }

    #[test]
    fn tail_base_cases() {
        let ctx = port_ctx();
        let defs = Definitions::new();
        let none = BTreeSet::new();
        let r = tail(&DnkTerm::Bot, &none, &defs, &ctx, 5).unwrap();
        assert_eq!(r.term, DnkTerm::Bot);
        assert!(!r.exhausted);
        // an event outside R is dropped
        let t = DnkTerm::rcfg("x", NkPolicy::one(), DnkTerm::seq_pol(NkPolicy::one(), DnkTerm::Bot));
        let r = tail(&t, &none, &defs, &ctx, 5).unwrap();
        assert_eq!(r.term, DnkTerm::Bot);
    }

    #[test]
    fn tail_selects_matching_events() {
        let ctx = port_ctx();
        let defs = Definitions::new();
        let cont = DnkTerm::seq_pol(NkPolicy::test("port", "int"), DnkTerm::Bot);
        let t = DnkTerm::rcfg("x", NkPolicy::one(), cont.clone());
        let ev: BTreeSet<_> = [ReconfigEvent::new("x", &NkPolicy::one(), &ctx).unwrap()].into();
        let r = tail(&t, &ev, &defs, &ctx, 5).unwrap();
        assert_eq!(r.term, canonical(&cont));
        // matching is modulo policy equivalence
        let ev2: BTreeSet<_> = [ReconfigEvent::new(
            "x",
            &NkPolicy::plus(NkPolicy::one(), NkPolicy::zero()),
            &ctx,
        )
        .unwrap()]
        .into();
        let r = tail(&t, &ev2, &defs, &ctx, 5).unwrap();
        assert_eq!(r.term, canonical(&cont));
    }

    #[test]
    fn reach_trivial_and_star() {
        let ctx = port_ctx();
        let one = NkPredicate::One;
        assert!(check_reach(&one, &NkPolicy::one(), &NkPolicy::one(), &one, &ctx, true).unwrap());
        // int -> ext requires the hop; star-free with identity topology
        let inp = NkPredicate::Test("port".into(), "int".into());
        let outp = NkPredicate::Test("port".into(), "ext".into());
        let p = NkPolicy::seq(NkPolicy::test("port", "int"), NkPolicy::assign("port", "ext"));
        assert!(check_reach(&inp, &p, &NkPolicy::one(), &outp, &ctx, false).unwrap());
        assert!(!check_reach(&outp, &p, &NkPolicy::one(), &inp, &ctx, false).unwrap());
    }

    #[test]
    fn waypoint_on_a_line() {
        // three-position line a -> w -> b encoded in a single field
        let ctx = Ctx::new(
            FieldSchema::new(vec![(
                "sw".into(),
                vec!["a".into(), "w".into(), "b".into()],
            )])
            .unwrap(),
        );
        let p = NkPolicy::plus(
            NkPolicy::seq(NkPolicy::test("sw", "a"), NkPolicy::assign("sw", "w")),
            NkPolicy::seq(NkPolicy::test("sw", "w"), NkPolicy::assign("sw", "b")),
        );
        let inp = NkPredicate::Test("sw".into(), "a".into());
        let outp = NkPredicate::Test("sw".into(), "b".into());
        let via = NkPredicate::Test("sw".into(), "w".into());
        assert!(check_waypoint(&inp, &outp, &via, &p, &NkPolicy::one(), &ctx).unwrap());
        // a route that skips w entirely defeats the waypoint
        let bypass = NkPolicy::seq(NkPolicy::test("sw", "a"), NkPolicy::assign("sw", "b"));
        assert!(!check_waypoint(&inp, &outp, &via, &bypass, &NkPolicy::one(), &ctx).unwrap());
    }

    #[test]
    fn firewall_fixture_loads() {
        let program = fixture("firewall").unwrap();
        assert_eq!(program.defs.len(), 3);
        assert_eq!(program.schema.packet_count(), 2);
        let printed = crate::syntax::print_program(&program);
        let reparsed = parse_program(&printed).unwrap();
        assert_eq!(program.init, reparsed.init);
    }

    #[test]
    fn firewall_head_and_tail() {
        let program = fixture("firewall").unwrap();
        let ctx = program.ctx();
        let init = closed_init(&program).unwrap();
        // closed configuration forwards int -> ext only
        let h = head(&init, &program.defs, &ctx).unwrap();
        let expected = NkPolicy::seq(
            NkPolicy::test("port", "int"),
            NkPolicy::assign("port", "ext"),
        );
        assert!(nk_equiv(&h, &expected, &ctx.schema).unwrap());
        // after the request synchronization both directions flow
        let ev: BTreeSet<_> =
            [ReconfigEvent::new("secConReq", &NkPolicy::one(), &ctx).unwrap()].into();
        let r = tail(&init, &ev, &program.defs, &ctx, default_tail_depth(&ev)).unwrap();
        assert!(!r.exhausted);
        let h2 = head(&r.term, &program.defs, &ctx).unwrap();
        let both = NkPolicy::plus(
            expected,
            NkPolicy::seq(NkPolicy::test("port", "ext"), NkPolicy::assign("port", "int")),
        );
        assert!(nk_equiv(&h2, &both, &ctx.schema).unwrap());
    }

    #[test]
    fn controller_fixture_family_size() {
        let program = fixture("controllers-independent").unwrap();
        // positions 1,2,5,6 range over 6 tables, positions 3,4 over 5
        assert_eq!(program.defs.len(), 6 * 6 * 5 * 5 * 6 * 6 + 2);
    }

    #[test]
    fn unknown_fixture_name() {
        assert!(fixture("nope").is_err());
    }
}
