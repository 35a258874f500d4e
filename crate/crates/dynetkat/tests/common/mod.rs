//! Seeded random generators shared by the integration suites.
// not every suite uses every generator
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dynetkat::dnk::{Definitions, DnkTerm, RestrictionSet};
use dynetkat::netkat::{NkPolicy, NkPredicate};
use dynetkat::packet::FieldSchema;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A schema with up to two fields of two values each.
pub fn small_schema(r: &mut StdRng) -> FieldSchema {
    let fields = r.gen_range(1..=2);
    FieldSchema::new(
        (0..fields)
            .map(|i| (format!("f{i}"), vec!["a".into(), "b".into()]))
            .collect(),
    )
    .unwrap()
}

fn rand_field(r: &mut StdRng, schema: &FieldSchema) -> (String, String) {
    let f = schema.fields()[r.gen_range(0..schema.fields().len())].clone();
    let v = f.values[r.gen_range(0..f.values.len())].clone();
    (f.name, v)
}

pub fn rand_pred(r: &mut StdRng, schema: &FieldSchema, depth: u32) -> NkPredicate {
    let leaf = depth == 0 || r.gen_bool(0.4);
    if leaf {
        match r.gen_range(0..4) {
            0 => NkPredicate::Zero,
            1 => NkPredicate::One,
            _ => {
                let (f, v) = rand_field(r, schema);
                NkPredicate::Test(f, v)
            }
        }
    } else {
        match r.gen_range(0..3) {
            0 => NkPredicate::Or(
                Box::new(rand_pred(r, schema, depth - 1)),
                Box::new(rand_pred(r, schema, depth - 1)),
            ),
            1 => NkPredicate::And(
                Box::new(rand_pred(r, schema, depth - 1)),
                Box::new(rand_pred(r, schema, depth - 1)),
            ),
            _ => NkPredicate::Not(Box::new(rand_pred(r, schema, depth - 1))),
        }
    }
}

pub fn rand_policy(r: &mut StdRng, schema: &FieldSchema, depth: u32, star: bool) -> NkPolicy {
    let leaf = depth == 0 || r.gen_bool(0.3);
    if leaf {
        if r.gen_bool(0.5) {
            NkPolicy::Pred(rand_pred(r, schema, depth.min(1)))
        } else {
            let (f, v) = rand_field(r, schema);
            NkPolicy::Assign(f, v)
        }
    } else {
        match r.gen_range(0..if star { 3 } else { 2 }) {
            0 => NkPolicy::plus(
                rand_policy(r, schema, depth - 1, star),
                rand_policy(r, schema, depth - 1, star),
            ),
            1 => NkPolicy::seq(
                rand_policy(r, schema, depth - 1, star),
                rand_policy(r, schema, depth - 1, star),
            ),
            _ => NkPolicy::star(rand_policy(r, schema, depth - 1, star)),
        }
    }
}

pub const CHANNELS: [&str; 2] = ["x", "y"];

fn rand_chan(r: &mut StdRng) -> &'static str {
    CHANNELS[r.gen_range(0..CHANNELS.len())]
}

/// A closed term (no recursion variables) built from all constructors of
/// the dynamic layer.
pub fn rand_term(r: &mut StdRng, schema: &FieldSchema, depth: u32) -> DnkTerm {
    if depth == 0 || r.gen_bool(0.25) {
        return DnkTerm::Bot;
    }
    match r.gen_range(0..8) {
        0 => DnkTerm::seq_pol(rand_policy(r, schema, 2, false), rand_term(r, schema, depth - 1)),
        1 => DnkTerm::recv(rand_chan(r), rand_policy(r, schema, 1, false), rand_term(r, schema, depth - 1)),
        2 => DnkTerm::send(rand_chan(r), rand_policy(r, schema, 1, false), rand_term(r, schema, depth - 1)),
        3 => DnkTerm::rcfg(rand_chan(r), rand_policy(r, schema, 1, false), rand_term(r, schema, depth - 1)),
        4 => DnkTerm::oplus(rand_term(r, schema, depth - 1), rand_term(r, schema, depth - 1)),
        5 => DnkTerm::par(rand_term(r, schema, depth - 1), rand_term(r, schema, depth - 1)),
        6 => DnkTerm::delta(rand_restriction(r), rand_term(r, schema, depth - 1)),
        _ => DnkTerm::proj(r.gen_range(0..=3), rand_term(r, schema, depth - 1)),
    }
}

pub fn rand_restriction(r: &mut StdRng) -> RestrictionSet {
    if r.gen_bool(0.5) {
        RestrictionSet::full()
    } else {
        let n = r.gen_range(0..=CHANNELS.len());
        RestrictionSet::channels(CHANNELS.iter().take(n).map(|c| c.to_string()))
    }
}

/// A prefix whose head action is immediate: used where axiom schemas
/// require a guarding action `a`.
pub fn rand_prefix(r: &mut StdRng, schema: &FieldSchema, cont: DnkTerm) -> DnkTerm {
    match r.gen_range(0..4) {
        0 => DnkTerm::seq_pol(rand_policy(r, schema, 2, false), cont),
        1 => DnkTerm::recv(rand_chan(r), rand_policy(r, schema, 1, false), cont),
        2 => DnkTerm::send(rand_chan(r), rand_policy(r, schema, 1, false), cont),
        _ => DnkTerm::rcfg(rand_chan(r), rand_policy(r, schema, 1, false), cont),
    }
}

/// Adds a small mutually recursive system (two equations, every variable
/// occurrence guarded by a prefix) to `defs` under fresh `{prefix}`-names,
/// and returns a start term over them.
pub fn rand_system_into(
    r: &mut StdRng,
    schema: &FieldSchema,
    defs: &mut Definitions,
    prefix: &str,
) -> DnkTerm {
    let names = [format!("{prefix}0"), format!("{prefix}1")];
    for name in &names {
        let summands: Vec<DnkTerm> = (0..r.gen_range(1..=3))
            .map(|_| {
                let cont = match r.gen_range(0..4) {
                    0 => DnkTerm::Bot,
                    _ => DnkTerm::var(&names[r.gen_range(0..names.len())]),
                };
                rand_prefix(r, schema, cont)
            })
            .collect();
        defs.define(name, DnkTerm::choice(summands)).unwrap();
    }
    match r.gen_range(0..3) {
        0 => DnkTerm::var(&names[0]),
        1 => DnkTerm::oplus(DnkTerm::var(&names[0]), DnkTerm::var(&names[1])),
        _ => rand_prefix(r, schema, DnkTerm::var(&names[1])),
    }
}

/// The same system re-defined under a different name prefix, so that the
/// copy is trivially bisimilar to the original.
pub fn rename_system(defs: &mut Definitions, from: &str, to: &str, start: &DnkTerm) -> DnkTerm {
    fn rn(t: &DnkTerm, from: &str, to: &str) -> DnkTerm {
        use std::sync::Arc;
        match t {
            DnkTerm::Var(name) if name.starts_with(from) => {
                DnkTerm::var(&format!("{to}{}", &name[from.len()..]))
            }
            DnkTerm::Bot | DnkTerm::Var(_) => t.clone(),
            DnkTerm::SeqN(p, d) => DnkTerm::SeqN(p.clone(), Arc::new(rn(d, from, to))),
            DnkTerm::Recv(x, p, d) => {
                DnkTerm::Recv(x.clone(), p.clone(), Arc::new(rn(d, from, to)))
            }
            DnkTerm::Send(x, p, d) => {
                DnkTerm::Send(x.clone(), p.clone(), Arc::new(rn(d, from, to)))
            }
            DnkTerm::Rcfg(x, p, d) => {
                DnkTerm::Rcfg(x.clone(), p.clone(), Arc::new(rn(d, from, to)))
            }
            DnkTerm::OPlus(a, b) => {
                DnkTerm::oplus(rn(a, from, to), rn(b, from, to))
            }
            DnkTerm::Par(a, b) => DnkTerm::par(rn(a, from, to), rn(b, from, to)),
            DnkTerm::LeftMerge(a, b) => {
                DnkTerm::LeftMerge(Arc::new(rn(a, from, to)), Arc::new(rn(b, from, to)))
            }
            DnkTerm::CommMerge(a, b) => {
                DnkTerm::CommMerge(Arc::new(rn(a, from, to)), Arc::new(rn(b, from, to)))
            }
            DnkTerm::Delta(l, d) => DnkTerm::Delta(l.clone(), Arc::new(rn(d, from, to))),
            DnkTerm::Proj(n, d) => DnkTerm::proj(*n, rn(d, from, to)),
        }
    }
    for i in 0..2 {
        let body = defs.get(&format!("{from}{i}")).unwrap().as_ref().clone();
        defs.define(&format!("{to}{i}"), rn(&body, from, to)).unwrap();
    }
    rn(start, from, to)
}
