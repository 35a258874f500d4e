//! FatTree topology generation and the firewall-migration benchmark.
//!
//! The generator produces a three-layer topology (core, aggregation,
//! top-of-rack) with shortest-path forwarding between all ToR pairs. The
//! migration scenario moves an SSH firewall from one aggregation switch to
//! another through four controller updates and checks, across every update
//! prefix, that non-SSH traffic keeps flowing, SSH traffic never leaks,
//! and the new firewall ends up as a waypoint.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{default_tail_depth, head, tail, ReconfigEvent};
use crate::dnk::{Definitions, DnkTerm, RestrictionSet};
use crate::error::{Error, Result};
use crate::netkat::{Ctx, NkPolicy, NkPredicate};
use crate::packet::FieldSchema;

/// A switch in the generated topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Switch {
    /// ToR `index` within `pod`.
    Tor { pod: u32, index: u32 },
    /// Aggregation switch `index` within `pod`; index doubles as its core
    /// group number.
    Agg { pod: u32, index: u32 },
    /// Core `member` within `group`; group g links to aggregation switch g
    /// of every pod.
    Core { group: u32, member: u32 },
}

impl Switch {
    pub fn name(&self) -> String {
        match self {
            Switch::Tor { pod, index } => format!("t{pod}_{index}"),
            Switch::Agg { pod, index } => format!("a{pod}_{index}"),
            Switch::Core { group, member } => format!("c{group}_{member}"),
        }
    }
}

/// One undirected link, as a pair of (switch, local port) endpoints.
pub type Link = ((Switch, u32), (Switch, u32));

#[derive(Debug)]
pub struct FatTree {
    pub k: u32,
    /// ToR switches per pod: `k^2/4`, or `k/2` in the classical variant.
    pub tors_per_pod: u32,
    pub schema: FieldSchema,
    pub switches: Vec<Switch>,
    pub links: Vec<Link>,
    /// Link traversal policy: for each link direction, move the packet to
    /// the far switch and set `pt` to the ingress port there.
    pub topology: NkPolicy,
    /// Valley-free shortest-path forwarding: each rule tests the current
    /// switch and ingress port and picks an egress port.
    pub forwarding: NkPolicy,
}

/// Generates the `k`-pod FatTree. `classical` selects `k/2` ToR switches
/// per pod instead of the default `k^2/4`.
pub fn gen_fattree(k: u32, classical: bool) -> Result<FatTree> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::Invalid(format!(
            "pod count must be even and at least 2, got {k}"
        )));
    }
    let half = k / 2;
    let tpp = if classical { half } else { k * k / 4 };
    if (tpp * k) as u64 * 4 > 20_000 {
        return Err(Error::Invalid(format!("k = {k} exceeds the size budget")));
    }

    let mut switches = Vec::new();
    for pod in 0..k {
        for index in 0..tpp {
            switches.push(Switch::Tor { pod, index });
        }
    }
    for pod in 0..k {
        for index in 0..half {
            switches.push(Switch::Agg { pod, index });
        }
    }
    for group in 0..half {
        for member in 0..half {
            switches.push(Switch::Core { group, member });
        }
    }

    // Local port numbering. ToR: 0 is the host port, 1+j faces agg j.
    // Agg: 0..tpp face the pod's ToRs, tpp+m faces core member m of the
    // agg's group. Core: port p faces agg <group> of pod p.
    let mut links = Vec::new();
    for pod in 0..k {
        for index in 0..tpp {
            for j in 0..half {
                links.push((
                    (Switch::Tor { pod, index }, 1 + j),
                    (Switch::Agg { pod, index: j }, index),
                ));
            }
        }
        for j in 0..half {
            for m in 0..half {
                links.push((
                    (Switch::Agg { pod, index: j }, tpp + m),
                    (Switch::Core { group: j, member: m }, pod),
                ));
            }
        }
    }

    let ports = (1 + half).max(tpp + half).max(k);
    let schema = FieldSchema::new(vec![
        (
            "sw".into(),
            switches.iter().map(|s| s.name()).collect(),
        ),
        ("pt".into(), (0..ports).map(|p| p.to_string()).collect()),
        ("type".into(), vec!["ssh".into(), "other".into()]),
    ])?;

    let mut hops = Vec::new();
    for ((a, pa), (b, pb)) in &links {
        hops.push(link_hop(a, *pa, b, *pb));
        hops.push(link_hop(b, *pb, a, *pa));
    }
    let topology = NkPolicy::sum(hops);

    let mut rules = Vec::new();
    for pod in 0..k {
        for index in 0..tpp {
            // host traffic goes up to every agg; arrivals rest at the ToR
            let tor = Switch::Tor { pod, index };
            rules.push(forward_rule(
                &tor,
                0,
                (0..half).map(|j| 1 + j).collect(),
                None,
            ));
        }
        for j in 0..half {
            let agg = Switch::Agg { pod, index: j };
            for i in 0..tpp {
                // from a ToR: up to the core group and across to the other
                // ToRs of the pod
                let outs = (0..half)
                    .map(|m| tpp + m)
                    .chain((0..tpp).filter(|o| *o != i))
                    .collect();
                rules.push(forward_rule(&agg, i, outs, None));
            }
            for m in 0..half {
                rules.push(forward_rule(&agg, tpp + m, (0..tpp).collect(), None));
            }
        }
    }
    for group in 0..half {
        for member in 0..half {
            let core = Switch::Core { group, member };
            for p in 0..k {
                rules.push(forward_rule(
                    &core,
                    p,
                    (0..k).filter(|q| *q != p).collect(),
                    None,
                ));
            }
        }
    }
    let forwarding = NkPolicy::sum(rules);

    Ok(FatTree {
        k,
        tors_per_pod: tpp,
        schema,
        switches,
        links,
        topology,
        forwarding,
    })
}

fn link_hop(a: &Switch, pa: u32, b: &Switch, pb: u32) -> NkPolicy {
    NkPolicy::seq_all([
        NkPolicy::test("sw", &a.name()),
        NkPolicy::test("pt", &pa.to_string()),
        NkPolicy::assign("sw", &b.name()),
        NkPolicy::assign("pt", &pb.to_string()),
    ])
}

/// A forwarding rule: at `sw` with ingress `pt`, pick any egress port in
/// `outs`; `only_type` adds a packet-type filter.
fn forward_rule(sw: &Switch, pt: u32, outs: Vec<u32>, only_type: Option<&str>) -> NkPolicy {
    let mut test = NkPolicy::seq(
        NkPolicy::test("sw", &sw.name()),
        NkPolicy::test("pt", &pt.to_string()),
    );
    if let Some(ty) = only_type {
        test = NkPolicy::seq(test, NkPolicy::test("type", ty));
    }
    NkPolicy::seq(
        test,
        NkPolicy::sum(outs.iter().map(|o| NkPolicy::assign("pt", &o.to_string()))),
    )
}

impl FatTree {
    pub fn half(&self) -> u32 {
        self.k / 2
    }

    pub fn tors(&self) -> impl Iterator<Item = Switch> + '_ {
        self.switches.iter().copied().filter(|s| matches!(s, Switch::Tor { .. }))
    }

    fn sw_pred(&self, s: &Switch) -> NkPredicate {
        NkPredicate::Test("sw".into(), s.name())
    }
}

/// The firewall-migration scenario: four sequential controller updates
/// shift the SSH firewall from aggregation switch `ax` to `ax2`.
pub struct MigrationScenario {
    pub ta: Switch,
    pub tb: Switch,
    pub ax: Switch,
    pub ax2: Switch,
    /// The four (channel, installed policy) update events, in order.
    pub updates: Vec<(String, NkPolicy)>,
    /// Network forwarding policy after each update prefix (length 5).
    pub configs: Vec<NkPolicy>,
    pub defs: Definitions,
    pub init: DnkTerm,
}

/// Builds the DyNetKAT program for shifting the firewall from `ax` to
/// `ax2` (both aggregation switches of `ta`'s pod; equal only in the
/// degenerate two-pod instance, where the updates reinstall the existing
/// rules).
pub fn gen_migration(
    ft: &FatTree,
    ta: Switch,
    tb: Switch,
    ax: Switch,
    ax2: Switch,
) -> Result<MigrationScenario> {
    let (pod_a, _) = match ta {
        Switch::Tor { pod, index } => (pod, index),
        _ => return Err(Error::Invalid("source must be a ToR switch".into())),
    };
    match tb {
        Switch::Tor { pod, .. } if pod != pod_a => {}
        Switch::Tor { .. } => {
            return Err(Error::Invalid(
                "source and destination ToR must be in different pods".into(),
            ))
        }
        _ => return Err(Error::Invalid("destination must be a ToR switch".into())),
    }
    let x = match ax {
        Switch::Agg { pod, index } if pod == pod_a => index,
        _ => {
            return Err(Error::Invalid(
                "firewall must be an aggregation switch of the source pod".into(),
            ))
        }
    };
    let x2 = match ax2 {
        Switch::Agg { pod, index } if pod == pod_a => index,
        _ => {
            return Err(Error::Invalid(
                "new firewall must be an aggregation switch of the source pod".into(),
            ))
        }
    };

    // Rule blocks that the updates swap out. The firewall variant of an
    // aggregation switch forwards only non-SSH traffic from its ToRs; a
    // core group is "open" for the source pod when it forwards that pod's
    // uplink traffic onward.
    let agg_block = |idx: u32, firewall: bool| -> NkPolicy {
        let agg = Switch::Agg { pod: pod_a, index: idx };
        let tpp = ft.tors_per_pod;
        let half = ft.half();
        let mut rules = Vec::new();
        for i in 0..tpp {
            let outs = (0..half)
                .map(|m| tpp + m)
                .chain((0..tpp).filter(|o| *o != i))
                .collect();
            rules.push(forward_rule(&agg, i, outs, firewall.then_some("other")));
        }
        for m in 0..half {
            rules.push(forward_rule(&agg, tpp + m, (0..tpp).collect(), None));
        }
        NkPolicy::sum(rules)
    };
    let core_block = |group: u32, open_for_pod_a: bool| -> NkPolicy {
        let mut rules = Vec::new();
        for member in 0..ft.half() {
            let core = Switch::Core { group, member };
            for p in 0..ft.k {
                let outs: Vec<u32> = (0..ft.k)
                    .filter(|q| *q != p && (p != pod_a || open_for_pod_a))
                    .collect();
                if !outs.is_empty() {
                    rules.push(forward_rule(&core, p, outs, None));
                }
            }
        }
        NkPolicy::sum(rules)
    };

    // Everything outside the swapped blocks: core groups other than x/x2
    // stay closed for the source pod throughout, so its uplink traffic is
    // pinned to the firewall path.
    let tpp = ft.tors_per_pod;
    let half = ft.half();
    let mut base = Vec::new();
    for pod in 0..ft.k {
        for index in 0..tpp {
            let tor = Switch::Tor { pod, index };
            base.push(forward_rule(&tor, 0, (0..half).map(|j| 1 + j).collect(), None));
        }
        for j in 0..half {
            if pod == pod_a && (j == x || j == x2) {
                continue;
            }
            base.push(agg_block_at(ft, pod, j));
        }
    }
    for group in 0..half {
        if group == x || group == x2 {
            continue;
        }
        base.push(core_block(group, false));
    }

    let config = |ax_fw: bool, ax2_fw: bool, cx_open: bool, cx2_open: bool| -> NkPolicy {
        let mut parts = base.clone();
        parts.push(agg_block(x, ax_fw));
        parts.push(core_block(x, cx_open));
        if x2 != x {
            parts.push(agg_block(x2, ax2_fw));
            parts.push(core_block(x2, cx2_open));
        }
        NkPolicy::sum(parts)
    };

    // Update order keeps SSH filtered on every open path: the new firewall
    // comes up before its core group opens, and the old core group closes
    // before the old firewall comes down. In the degenerate ax = ax2 case
    // each update reinstalls the current rules.
    let degenerate = x == x2;
    let states: [(bool, bool, bool, bool); 5] = if degenerate {
        [(true, true, true, true); 5]
    } else {
        [
            (true, false, true, false),
            (true, true, true, false),
            (true, true, true, true),
            (true, true, false, true),
            (false, true, false, true),
        ]
    };
    let configs: Vec<NkPolicy> = states
        .iter()
        .map(|&(a, b, c, d)| config(a, b, c, d))
        .collect();
    let updates: Vec<(String, NkPolicy)> = if degenerate {
        vec![
            ("upd1".into(), agg_block(x2, true)),
            ("upd2".into(), core_block(x2, true)),
            ("upd3".into(), core_block(x, true)),
            ("upd4".into(), agg_block(x, true)),
        ]
    } else {
        vec![
            ("upd1".into(), agg_block(x2, true)),
            ("upd2".into(), core_block(x2, true)),
            ("upd3".into(), core_block(x, false)),
            ("upd4".into(), agg_block(x, false)),
        ]
    };

    let mut defs = Definitions::new();
    for (j, cfg) in configs.iter().enumerate() {
        let mut body = DnkTerm::seq_pol(cfg.clone(), DnkTerm::var(&format!("Net{j}")));
        if j < 4 {
            let (chan, pol) = &updates[j];
            body = DnkTerm::oplus(
                body,
                DnkTerm::recv(chan, pol.clone(), DnkTerm::var(&format!("Net{}", j + 1))),
            );
        }
        defs.define(&format!("Net{j}"), body)?;
    }
    let controller = updates.iter().rev().fold(DnkTerm::Bot, |cont, (chan, pol)| {
        DnkTerm::send(chan, pol.clone(), cont)
    });
    let init = DnkTerm::delta(
        RestrictionSet::full(),
        DnkTerm::par(DnkTerm::var("Net0"), controller),
    );

    Ok(MigrationScenario {
        ta,
        tb,
        ax,
        ax2,
        updates,
        configs,
        defs,
        init,
    })
}

fn agg_block_at(ft: &FatTree, pod: u32, j: u32) -> NkPolicy {
    let agg = Switch::Agg { pod, index: j };
    let tpp = ft.tors_per_pod;
    let half = ft.half();
    let mut rules = Vec::new();
    for i in 0..tpp {
        let outs = (0..half)
            .map(|m| tpp + m)
            .chain((0..tpp).filter(|o| *o != i))
            .collect();
        rules.push(forward_rule(&agg, i, outs, None));
    }
    for m in 0..half {
        rules.push(forward_rule(&agg, tpp + m, (0..tpp).collect(), None));
    }
    NkPolicy::sum(rules)
}

/// Source-traffic predicate: a fresh packet of the given type at the host
/// port of `ta`.
fn ingress_pred(ta: &Switch, ty: &str) -> NkPredicate {
    NkPredicate::And(
        Box::new(NkPredicate::And(
            Box::new(NkPredicate::Test("sw".into(), ta.name())),
            Box::new(NkPredicate::Test("pt".into(), "0".into())),
        )),
        Box::new(NkPredicate::Test("type".into(), ty.into())),
    )
}

/// The configuration policies the equational pipeline extracts: the head
/// of the network after each update prefix.
pub struct PreparedScenario {
    /// `prefix_heads[j]` = head of the configuration reached after exactly
    /// the first `j` updates.
    pub prefix_heads: Vec<NkPolicy>,
    pub final_head: NkPolicy,
}

/// Runs the preprocessing stage: restriction is already part of the
/// scenario's initial term, so this is normalization plus head/tail per
/// update prefix. Each prefix's configuration is obtained by applying the
/// updates one tail at a time — summing the intermediate configurations
/// instead would let the decision procedure mix rules from different
/// configurations within a single packet's flight.
pub fn prepare(sc: &MigrationScenario, ctx: &Ctx) -> Result<PreparedScenario> {
    let mut current = sc.init.clone();
    let mut prefix_heads = vec![head(&current, &sc.defs, ctx)?];
    for (chan, pol) in &sc.updates {
        let r: BTreeSet<_> = [ReconfigEvent::new(chan, pol, ctx)?].into();
        current = tail(&current, &r, &sc.defs, ctx, default_tail_depth(&r))?.term;
        prefix_heads.push(head(&current, &sc.defs, ctx)?);
    }
    let final_head = prefix_heads.last().unwrap().clone();
    Ok(PreparedScenario {
        prefix_heads,
        final_head,
    })
}

pub const PROPERTY_NAMES: [&str; 3] = ["reachability-i", "reachability-ii", "waypointing"];

/// Decides one of the three migration properties against the prepared
/// configurations.
pub fn check_property(
    name: &str,
    ft: &FatTree,
    sc: &MigrationScenario,
    prep: &PreparedScenario,
    ctx: &Ctx,
) -> Result<bool> {
    let out = ft.sw_pred(&sc.tb);
    match name {
        // non-SSH traffic reaches the destination at every update prefix
        "reachability-i" => {
            let inp = ingress_pred(&sc.ta, "other");
            for h in &prep.prefix_heads {
                if !crate::analysis::check_reach(&inp, h, &ft.topology, &out, ctx, true)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        // SSH traffic reaches the destination at no update prefix
        "reachability-ii" => {
            let inp = ingress_pred(&sc.ta, "ssh");
            for h in &prep.prefix_heads {
                if crate::analysis::check_reach(&inp, h, &ft.topology, &out, ctx, true)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        // the new firewall is a waypoint once all updates are in place
        "waypointing" => {
            let inp = ingress_pred(&sc.ta, "other");
            let w = ft.sw_pred(&sc.ax2);
            crate::analysis::check_waypoint(&inp, &out, &w, &prep.final_head, &ft.topology, ctx)
        }
        other => Err(Error::Invalid(format!("unknown property `{other}`"))),
    }
}

#[derive(Debug, Serialize)]
pub struct PropertyTiming {
    pub name: String,
    pub holds: bool,
    /// Median decision time over the configured runs, in milliseconds.
    pub decide_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub k: u32,
    pub classical: bool,
    pub switches: usize,
    pub runs: u32,
    /// Median preprocessing time (normalization, restriction, head/tail).
    pub preprocessing_ms: f64,
    pub properties: Vec<PropertyTiming>,
    /// Median wall-clock time for deciding all properties concurrently,
    /// one worker per property; absent in sequential mode.
    pub all_parallel_ms: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Default scenario placement: first ToR of pods 0 and 1, firewall moving
/// from the first aggregation switch of pod 0 to the second (or staying
/// put when the pod has a single one).
pub fn default_scenario(ft: &FatTree) -> Result<MigrationScenario> {
    let ta = Switch::Tor { pod: 0, index: 0 };
    let tb = Switch::Tor { pod: 1, index: 0 };
    let ax = Switch::Agg { pod: 0, index: 0 };
    let ax2 = Switch::Agg { pod: 0, index: if ft.half() > 1 { 1 } else { 0 } };
    gen_migration(ft, ta, tb, ax, ax2)
}

/// Runs the benchmark for one pod count: `runs` timed repetitions with a
/// fresh normalization cache each, reporting medians. Verdicts must agree
/// across runs.
pub fn run_benchmark(k: u32, classical: bool, runs: u32, parallel: bool) -> Result<BenchReport> {
    let ft = gen_fattree(k, classical)?;
    let sc = default_scenario(&ft)?;

    let mut prep_times = Vec::new();
    let mut decide_times: Vec<Vec<f64>> = vec![Vec::new(); PROPERTY_NAMES.len()];
    let mut parallel_times = Vec::new();
    let mut verdicts: Option<Vec<bool>> = None;

    for _ in 0..runs.max(1) {
        let ctx = Ctx::new(ft.schema.clone());
        let start = Instant::now();
        let prep = prepare(&sc, &ctx)?;
        prep_times.push(start.elapsed().as_secs_f64() * 1e3);

        let mut run_verdicts = Vec::new();
        for (i, name) in PROPERTY_NAMES.iter().enumerate() {
            // a fresh cache per property keeps the timings independent
            let ctx = Ctx::new(ft.schema.clone());
            let start = Instant::now();
            let holds = check_property(name, &ft, &sc, &prep, &ctx)?;
            decide_times[i].push(start.elapsed().as_secs_f64() * 1e3);
            run_verdicts.push(holds);
        }
        match &verdicts {
            None => verdicts = Some(run_verdicts),
            Some(prev) if *prev == run_verdicts => {}
            Some(_) => {
                return Err(Error::Invalid(
                    "verdicts differed between benchmark runs".into(),
                ))
            }
        }

        if parallel {
            use rayon::prelude::*;
            let start = Instant::now();
            let results: Vec<Result<bool>> = PROPERTY_NAMES
                .par_iter()
                .map(|name| {
                    let ctx = Ctx::new(ft.schema.clone());
                    check_property(name, &ft, &sc, &prep, &ctx)
                })
                .collect();
            for r in results {
                r?;
            }
            parallel_times.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }

    let verdicts = verdicts.unwrap();
    Ok(BenchReport {
        k,
        classical,
        switches: ft.switches.len(),
        runs: runs.max(1),
        preprocessing_ms: median(prep_times),
        properties: PROPERTY_NAMES
            .iter()
            .zip(verdicts)
            .zip(decide_times)
            .map(|((name, holds), times)| PropertyTiming {
                name: (*name).into(),
                holds,
                decide_ms: median(times),
            })
            .collect(),
        all_parallel_ms: if parallel {
            Some(median(parallel_times))
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netkat::normalize;
    use std::collections::{HashMap, VecDeque};

    #[test]
    fn rejects_odd_or_tiny_k() {
        assert!(gen_fattree(3, false).is_err());
        assert!(gen_fattree(0, false).is_err());
    }

    #[test]
    fn layer_counts_match_parameterization() {
        let ft = gen_fattree(4, false).unwrap();
        assert_eq!(ft.tors().count(), 16); // k^3/4
        assert_eq!(ft.switches.len(), 16 + 8 + 4);
        let classical = gen_fattree(4, true).unwrap();
        assert_eq!(classical.tors().count(), 8);
    }

    #[test]
    fn links_form_a_port_bijection() {
        let ft = gen_fattree(4, false).unwrap();
        let mut seen = BTreeSet::new();
        for (a, b) in &ft.links {
            assert!(seen.insert(*a), "port reused: {a:?}");
            assert!(seen.insert(*b), "port reused: {b:?}");
        }
    }

    /// Hop distances between switches in the undirected link graph.
    fn graph_distances(ft: &FatTree) -> HashMap<(Switch, Switch), u32> {
        let mut adj: HashMap<Switch, Vec<Switch>> = HashMap::new();
        for ((a, _), (b, _)) in &ft.links {
            adj.entry(*a).or_default().push(*b);
            adj.entry(*b).or_default().push(*a);
        }
        let mut dist = HashMap::new();
        for s in &ft.switches {
            let mut queue = VecDeque::from([(*s, 0)]);
            let mut local = HashMap::from([(*s, 0u32)]);
            while let Some((u, d)) = queue.pop_front() {
                for v in adj.get(&u).into_iter().flatten() {
                    if !local.contains_key(v) {
                        local.insert(*v, d + 1);
                        queue.push_back((*v, d + 1));
                    }
                }
            }
            for (t, d) in local {
                dist.insert((*s, t), d);
            }
        }
        dist
    }

    /// The generic forwarding policy routes every ToR pair in exactly the
    /// graph distance, per a BFS oracle on the generated topology.
    fn assert_shortest_paths(k: u32) {
        let ft = gen_fattree(k, false).unwrap();
        let ctx = Ctx::new(ft.schema.clone());
        let dist = graph_distances(&ft);
        let hop = normalize(
            &NkPolicy::seq(ft.forwarding.clone(), ft.topology.clone()),
            &ctx.schema,
        )
        .unwrap();
        for a in ft.tors() {
            // packet BFS from a's host port
            let start = ctx
                .schema
                .packet_from_pairs(&[
                    ("sw".into(), a.name()),
                    ("pt".into(), "0".into()),
                    ("type".into(), "other".into()),
                ])
                .unwrap();
            let sw_field = ctx.schema.field_index("sw").unwrap();
            let mut steps: HashMap<u32, u32> =
                HashMap::from([(ctx.schema.packet_index(&start), 0)]);
            let mut queue = VecDeque::from([ctx.schema.packet_index(&start)]);
            while let Some(p) = queue.pop_front() {
                let d = steps[&p];
                for q in hop.outputs(p) {
                    steps.entry(q).or_insert_with(|| {
                        queue.push_back(q);
                        d + 1
                    });
                }
            }
            for b in ft.tors() {
                if a == b {
                    continue;
                }
                let best = (0..ctx.schema.packet_count() as u32)
                    .filter(|p| {
                        ctx.schema.packet_at(*p).0[sw_field]
                            == ctx.schema.value_index(sw_field, &b.name()).unwrap()
                    })
                    .filter_map(|p| steps.get(&p))
                    .min()
                    .copied();
                assert_eq!(
                    best,
                    Some(dist[&(a, b)]),
                    "route {} -> {}",
                    a.name(),
                    b.name()
                );
            }
        }
    }

    #[test]
    fn forwarding_is_shortest_path_k2() {
        assert_shortest_paths(2);
    }

    #[test]
    fn forwarding_is_shortest_path_k4() {
        assert_shortest_paths(4);
    }

    #[test]
    fn migration_rejects_bad_placement() {
        let ft = gen_fattree(4, false).unwrap();
        let ta = Switch::Tor { pod: 0, index: 0 };
        let tb_same_pod = Switch::Tor { pod: 0, index: 1 };
        let ax = Switch::Agg { pod: 0, index: 0 };
        let ax2 = Switch::Agg { pod: 0, index: 1 };
        assert!(gen_migration(&ft, ta, tb_same_pod, ax, ax2).is_err());
        let agg_wrong_pod = Switch::Agg { pod: 1, index: 0 };
        assert!(gen_migration(&ft, ta, Switch::Tor { pod: 1, index: 0 }, agg_wrong_pod, ax2).is_err());
    }

    #[test]
    fn migration_properties_hold_k2() {
        let ft = gen_fattree(2, false).unwrap();
        let sc = default_scenario(&ft).unwrap();
        assert_eq!(sc.updates.len(), 4);
        let ctx = Ctx::new(ft.schema.clone());
        let prep = prepare(&sc, &ctx).unwrap();
        assert_eq!(prep.prefix_heads.len(), 5);
        for name in PROPERTY_NAMES {
            assert!(
                check_property(name, &ft, &sc, &prep, &ctx).unwrap(),
                "property {name}"
            );
        }
    }

    #[test]
    fn benchmark_report_is_deterministic_in_verdicts() {
        let report = run_benchmark(2, false, 2, true).unwrap();
        assert_eq!(report.properties.len(), 3);
        assert!(report.properties.iter().all(|p| p.holds));
        assert!(report.all_parallel_ms.is_some());
        let again = run_benchmark(2, false, 2, false).unwrap();
        assert_eq!(
            report.properties.iter().map(|p| p.holds).collect::<Vec<_>>(),
            again.properties.iter().map(|p| p.holds).collect::<Vec<_>>()
        );
        assert!(again.all_parallel_ms.is_none());
    }
}
