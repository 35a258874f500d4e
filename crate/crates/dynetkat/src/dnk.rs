//! The dynamic-network term language layered on top of NetKAT policies:
//! prefixing, channel communication, parallel composition, nondeterministic
//! choice, guarded recursion, restriction, and projection.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::netkat::{Ctx, NkPolicy, NkRelation};

/// Direction of a communication action on a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Recv,
    Send,
}

impl Dir {
    pub fn symbol(self) -> &'static str {
        match self {
            Dir::Recv => "?",
            Dir::Send => "!",
        }
    }
}

/// Restriction set for `delta`: the communication actions to block.
///
/// The canonical form lists specific `(direction, channel, policy relation)`
/// triples, matched modulo NetKAT equivalence. `all_channels` additionally
/// blocks every action on the named channels regardless of direction or
/// payload, which is the common "close the whole program" usage.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RestrictionSet {
    pub all_channels: BTreeSet<String>,
    pub specific: BTreeSet<(Dir, String, NkRelation)>,
}

impl RestrictionSet {
    /// Blocks every send/receive on every channel; reconfiguration labels
    /// always pass through.
    pub fn full() -> RestrictionSet {
        RestrictionSet {
            all_channels: ["*".into()].into(),
            specific: BTreeSet::new(),
        }
    }

    pub fn channels<I: IntoIterator<Item = String>>(chans: I) -> RestrictionSet {
        RestrictionSet {
            all_channels: chans.into_iter().collect(),
            specific: BTreeSet::new(),
        }
    }

    pub fn blocks(&self, dir: Dir, chan: &str, rel: &NkRelation) -> bool {
        self.all_channels.contains("*")
            || self.all_channels.contains(chan)
            || self
                .specific
                .contains(&(dir, chan.to_string(), rel.clone()))
    }
}

/// A term of the dynamic layer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DnkTerm {
    /// Inaction.
    Bot,
    /// `p ; d` - run policy `p` on one packet, continue as `d`.
    SeqN(Arc<NkPolicy>, Arc<DnkTerm>),
    /// `x ? p ; d` - receive policy `p` on channel `x`.
    Recv(String, Arc<NkPolicy>, Arc<DnkTerm>),
    /// `x ! p ; d` - send policy `p` on channel `x`.
    Send(String, Arc<NkPolicy>, Arc<DnkTerm>),
    /// `rcfg(x, p) ; d` - the closed synchronization of a send/receive pair.
    Rcfg(String, Arc<NkPolicy>, Arc<DnkTerm>),
    Par(Arc<DnkTerm>, Arc<DnkTerm>),
    OPlus(Arc<DnkTerm>, Arc<DnkTerm>),
    Var(String),
    Delta(Arc<RestrictionSet>, Arc<DnkTerm>),
    Proj(u32, Arc<DnkTerm>),
    LeftMerge(Arc<DnkTerm>, Arc<DnkTerm>),
    CommMerge(Arc<DnkTerm>, Arc<DnkTerm>),
}

impl DnkTerm {
    pub fn seq_pol(p: NkPolicy, d: DnkTerm) -> DnkTerm {
        DnkTerm::SeqN(Arc::new(p), Arc::new(d))
    }

    pub fn recv(chan: &str, p: NkPolicy, d: DnkTerm) -> DnkTerm {
        DnkTerm::Recv(chan.into(), Arc::new(p), Arc::new(d))
    }

    pub fn send(chan: &str, p: NkPolicy, d: DnkTerm) -> DnkTerm {
        DnkTerm::Send(chan.into(), Arc::new(p), Arc::new(d))
    }

    pub fn rcfg(chan: &str, p: NkPolicy, d: DnkTerm) -> DnkTerm {
        DnkTerm::Rcfg(chan.into(), Arc::new(p), Arc::new(d))
    }

    pub fn par(a: DnkTerm, b: DnkTerm) -> DnkTerm {
        DnkTerm::Par(Arc::new(a), Arc::new(b))
    }

    pub fn oplus(a: DnkTerm, b: DnkTerm) -> DnkTerm {
        DnkTerm::OPlus(Arc::new(a), Arc::new(b))
    }

    pub fn var(name: &str) -> DnkTerm {
        DnkTerm::Var(name.into())
    }

    pub fn delta(l: RestrictionSet, d: DnkTerm) -> DnkTerm {
        DnkTerm::Delta(Arc::new(l), Arc::new(d))
    }

    pub fn proj(n: u32, d: DnkTerm) -> DnkTerm {
        DnkTerm::Proj(n, Arc::new(d))
    }

    /// Right-nested choice over the summands; the empty choice is `bot`.
    pub fn choice<I: IntoIterator<Item = DnkTerm>>(items: I) -> DnkTerm {
        let mut items: Vec<DnkTerm> = items.into_iter().collect();
        match items.pop() {
            None => DnkTerm::Bot,
            Some(last) => items
                .into_iter()
                .rev()
                .fold(last, |acc, t| DnkTerm::oplus(t, acc)),
        }
    }

    /// Flattens a term into its list of choice summands.
    pub fn expand_sum(&self) -> Vec<&DnkTerm> {
        fn go<'a>(t: &'a DnkTerm, out: &mut Vec<&'a DnkTerm>) {
            match t {
                DnkTerm::OPlus(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                other => out.push(other),
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }
}

/// Recursion environment: each variable has exactly one defining equation.
#[derive(Debug, Clone, Default)]
pub struct Definitions {
    map: BTreeMap<String, Arc<DnkTerm>>,
}

impl Definitions {
    pub fn new() -> Definitions {
        Definitions::default()
    }

    pub fn define(&mut self, name: &str, body: DnkTerm) -> Result<()> {
        if self.map.contains_key(name) {
            return Err(Error::Invalid(format!(
                "variable `{name}` has more than one defining equation"
            )));
        }
        self.map.insert(name.into(), Arc::new(body));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Arc<DnkTerm>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::UndefinedVariable(name.into()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Arc<DnkTerm>)> {
        self.map.iter()
    }

    /// Checks that every definition is guarded: no variable may occur in
    /// head position, i.e. reachable without crossing a prefix. This is a
    /// purely local syntactic check per equation.
    pub fn check_guarded(&self) -> Result<()> {
        for (name, body) in &self.map {
            if let Some(var) = first_head_var(body) {
                return Err(Error::Unguarded {
                    definition: name.clone(),
                    variable: var,
                });
            }
        }
        Ok(())
    }

    /// Checks that every variable mentioned anywhere (including in `start`)
    /// has a defining equation.
    pub fn check_closed(&self, start: &DnkTerm) -> Result<()> {
        fn vars(t: &DnkTerm, out: &mut BTreeSet<String>) {
            match t {
                DnkTerm::Bot => {}
                DnkTerm::Var(x) => {
                    out.insert(x.clone());
                }
                DnkTerm::SeqN(_, d)
                | DnkTerm::Recv(_, _, d)
                | DnkTerm::Send(_, _, d)
                | DnkTerm::Rcfg(_, _, d)
                | DnkTerm::Delta(_, d)
                | DnkTerm::Proj(_, d) => vars(d, out),
                DnkTerm::Par(a, b)
                | DnkTerm::OPlus(a, b)
                | DnkTerm::LeftMerge(a, b)
                | DnkTerm::CommMerge(a, b) => {
                    vars(a, out);
                    vars(b, out);
                }
            }
        }
        let mut want = BTreeSet::new();
        vars(start, &mut want);
        for body in self.map.values() {
            vars(body, &mut want);
        }
        for x in want {
            self.get(&x)?;
        }
        Ok(())
    }
}

fn first_head_var(t: &DnkTerm) -> Option<String> {
    match t {
        DnkTerm::Var(x) => Some(x.clone()),
        DnkTerm::Bot
        | DnkTerm::SeqN(..)
        | DnkTerm::Recv(..)
        | DnkTerm::Send(..)
        | DnkTerm::Rcfg(..) => None,
        DnkTerm::Delta(_, d) | DnkTerm::Proj(_, d) => first_head_var(d),
        DnkTerm::Par(a, b)
        | DnkTerm::OPlus(a, b)
        | DnkTerm::LeftMerge(a, b)
        | DnkTerm::CommMerge(a, b) => first_head_var(a).or_else(|| first_head_var(b)),
    }
}

/// Structural canonicalization used for state identity: choice is flattened,
/// sorted, and deduplicated with `bot` dropped; parallel is flattened and
/// sorted with `bot` dropped; `pi[0]` and restricted/projected `bot`
/// collapse to `bot`. All rewrites are sound for bisimilarity.
pub fn canonical(t: &DnkTerm) -> DnkTerm {
    match t {
        DnkTerm::Bot | DnkTerm::Var(_) => t.clone(),
        DnkTerm::SeqN(p, d) => DnkTerm::SeqN(p.clone(), Arc::new(canonical(d))),
        DnkTerm::Recv(x, p, d) => DnkTerm::Recv(x.clone(), p.clone(), Arc::new(canonical(d))),
        DnkTerm::Send(x, p, d) => DnkTerm::Send(x.clone(), p.clone(), Arc::new(canonical(d))),
        DnkTerm::Rcfg(x, p, d) => DnkTerm::Rcfg(x.clone(), p.clone(), Arc::new(canonical(d))),
        DnkTerm::OPlus(..) => {
            let mut summands = BTreeSet::new();
            collect_oplus(t, &mut summands);
            DnkTerm::choice(summands)
        }
        DnkTerm::Par(..) => {
            let mut factors = Vec::new();
            collect_par(t, &mut factors);
            factors.sort();
            match factors.len() {
                0 => DnkTerm::Bot,
                _ => {
                    let mut it = factors.into_iter().rev();
                    let last = it.next().unwrap();
                    it.fold(last, |acc, f| DnkTerm::par(f, acc))
                }
            }
        }
        DnkTerm::Delta(l, d) => match canonical(d) {
            DnkTerm::Bot => DnkTerm::Bot,
            inner => DnkTerm::Delta(l.clone(), Arc::new(inner)),
        },
        DnkTerm::Proj(0, _) => DnkTerm::Bot,
        DnkTerm::Proj(n, d) => match canonical(d) {
            DnkTerm::Bot => DnkTerm::Bot,
            inner => DnkTerm::Proj(*n, Arc::new(inner)),
        },
        DnkTerm::LeftMerge(a, b) => match canonical(a) {
            DnkTerm::Bot => DnkTerm::Bot,
            ca => DnkTerm::LeftMerge(Arc::new(ca), Arc::new(canonical(b))),
        },
        DnkTerm::CommMerge(a, b) => {
            let (ca, cb) = (canonical(a), canonical(b));
            if ca == DnkTerm::Bot || cb == DnkTerm::Bot {
                DnkTerm::Bot
            } else {
                let (lo, hi) = if ca <= cb { (ca, cb) } else { (cb, ca) };
                DnkTerm::CommMerge(Arc::new(lo), Arc::new(hi))
            }
        }
    }
}

fn collect_oplus(t: &DnkTerm, out: &mut BTreeSet<DnkTerm>) {
    match t {
        DnkTerm::OPlus(a, b) => {
            collect_oplus(a, out);
            collect_oplus(b, out);
        }
        other => {
            let c = canonical(other);
            if c != DnkTerm::Bot {
                out.insert(c);
            }
        }
    }
}

fn collect_par(t: &DnkTerm, out: &mut Vec<DnkTerm>) {
    match t {
        DnkTerm::Par(a, b) => {
            collect_par(a, out);
            collect_par(b, out);
        }
        other => {
            let c = canonical(other);
            if c != DnkTerm::Bot {
                out.push(c);
            }
        }
    }
}

/// One coordinate of an indexed family of definitions: the channel its
/// updates arrive on, the initially installed policy, and the policies it
/// can be updated to.
pub struct FamilyPosition {
    pub channel: String,
    pub initial: (String, NkPolicy),
    pub options: Vec<(String, NkPolicy)>,
}

/// A family of mutually recursive definitions indexed by a tuple of
/// per-position policies, as used for switch networks driven by controller
/// updates. Each instance runs `flow(current policies)` and loops, or
/// receives a replacement policy for one position.
pub struct IndexedFamily {
    pub base: String,
    pub positions: Vec<FamilyPosition>,
    pub flow: Box<dyn Fn(&[&NkPolicy]) -> NkPolicy>,
}

impl IndexedFamily {
    fn instance_name(&self, names: &[&str]) -> String {
        format!("{}[{}]", self.base, names.join(","))
    }

    /// Instantiates every tuple reachable from the initial configuration by
    /// single-position updates, adding one definition per tuple. Returns the
    /// name of the initial instance.
    pub fn instantiate(&self, defs: &mut Definitions, _ctx: &Ctx) -> Result<String> {
        // per position: dedup of initial + options, tracking display names
        let mut opts: Vec<Vec<(String, Arc<NkPolicy>)>> = Vec::new();
        let mut init_idx: Vec<usize> = Vec::new();
        let mut recv_idx: Vec<Vec<usize>> = Vec::new();
        for pos in &self.positions {
            let mut list: Vec<(String, Arc<NkPolicy>)> = Vec::new();
            let index_of = |list: &mut Vec<(String, Arc<NkPolicy>)>,
                                name: &String,
                                pol: &NkPolicy| {
                match list.iter().position(|(n, _)| n == name) {
                    Some(i) => i,
                    None => {
                        list.push((name.clone(), Arc::new(pol.clone())));
                        list.len() - 1
                    }
                }
            };
            init_idx.push(index_of(&mut list, &pos.initial.0, &pos.initial.1));
            let mut rs = Vec::new();
            for (n, p) in &pos.options {
                rs.push(index_of(&mut list, n, p));
            }
            recv_idx.push(rs);
            opts.push(list);
        }

        let initial: Vec<usize> = init_idx;
        let mut seen: BTreeSet<Vec<usize>> = [initial.clone()].into();
        let mut queue: VecDeque<Vec<usize>> = [initial.clone()].into();
        while let Some(tuple) = queue.pop_front() {
            let names: Vec<&str> = tuple
                .iter()
                .enumerate()
                .map(|(j, &i)| opts[j][i].0.as_str())
                .collect();
            let self_name = self.instance_name(&names);
            let pols: Vec<&NkPolicy> = tuple
                .iter()
                .enumerate()
                .map(|(j, &i)| opts[j][i].1.as_ref())
                .collect();
            let mut summands = vec![DnkTerm::seq_pol(
                (self.flow)(&pols),
                DnkTerm::var(&self_name),
            )];
            for (j, rs) in recv_idx.iter().enumerate() {
                for &r in rs {
                    let mut next = tuple.clone();
                    next[j] = r;
                    let next_names: Vec<&str> = next
                        .iter()
                        .enumerate()
                        .map(|(k, &i)| opts[k][i].0.as_str())
                        .collect();
                    let next_name = self.instance_name(&next_names);
                    summands.push(DnkTerm::Recv(
                        self.positions[j].channel.clone(),
                        opts[j][r].1.clone(),
                        Arc::new(DnkTerm::var(&next_name)),
                    ));
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
            defs.define(&self_name, DnkTerm::choice(summands))?;
        }

        let init_names: Vec<&str> = initial
            .iter()
            .enumerate()
            .map(|(j, &i)| opts[j][i].0.as_str())
            .collect();
        Ok(self.instance_name(&init_names))
    }
}
