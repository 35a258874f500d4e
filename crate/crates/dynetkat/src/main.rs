//! Command-line driver: parses programs, dispatches analyses, and prints
//! verdicts in text or JSON.
//!
//! Exit codes: 0 when the checked property holds (or the command simply
//! succeeded), 1 when a property is violated (with a witness on standard
//! output), 2 for usage or input errors, 3 when a state/word budget ran
//! out.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dynetkat::analysis::{
    check_reach, check_waypoint, closed_init, default_tail_depth, fixture, head, tail,
    ReconfigEvent,
};
use dynetkat::dnk::DnkTerm;
use dynetkat::equiv::{bisimilar, Verdict};
use dynetkat::error::Error;
use dynetkat::fattree::run_benchmark;
use dynetkat::netkat::{Ctx, NkPolicy, NkPredicate};
use dynetkat::norm::{head_normal_form, trace_expand, unfold};
use dynetkat::packet::{Packet, PacketList};
use dynetkat::safety::{check_safe, derive_alphabet, word_bound, Property, SafetyVerdict};
use dynetkat::sos::{
    build_config_lts, build_term_lts, export_json, export_text, format_label, state_budget, Config,
};
use dynetkat::syntax::{
    parse_policy_str, parse_program, parse_properties, parse_term_str, policy_to_pred, print_term,
    Program,
};

#[derive(Parser)]
#[command(name = "dnk", version, about = "DyNetKAT network verification toolkit")]
struct Cli {
    /// Emit machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Where the program under analysis comes from.
#[derive(Args)]
struct Source {
    /// Bundled example: firewall, controllers-independent, controllers-sync
    #[arg(long, conflicts_with = "program")]
    fixture: Option<String>,
    /// Program file
    #[arg(long)]
    program: Option<PathBuf>,
    /// Do not wrap `init` in a restriction over the declared channels
    #[arg(long)]
    no_auto_delta: bool,
}

impl Source {
    fn load(&self) -> Result<Program, Error> {
        match (&self.fixture, &self.program) {
            (Some(name), None) => fixture(name),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
                let program = parse_program(&text)?;
                program.defs.check_guarded()?;
                if let Some(init) = &program.init {
                    program.defs.check_closed(init)?;
                }
                Ok(program)
            }
            _ => Err(Error::Invalid(
                "exactly one of --fixture and --program is required".into(),
            )),
        }
    }

    fn init(&self, program: &Program) -> Result<DnkTerm, Error> {
        if self.no_auto_delta {
            program
                .init
                .clone()
                .ok_or_else(|| Error::Invalid("program has no `init`".into()))
        } else {
            closed_init(program)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicySource {
    /// Current configuration of the initial term
    Head,
    /// Configuration reached after the events given with --events
    HeadOfTail,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Reachable,
    Unreachable,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the one-step-exposed normal form of a term
    Normalize {
        #[command(flatten)]
        src: Source,
        /// Term to normalize (defaults to init)
        #[arg(long)]
        term: Option<String>,
        /// Unfolding depth
        #[arg(long, default_value_t = 1)]
        depth: u32,
    },
    /// Export the labelled transition system of a term or configuration
    Lts {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        term: Option<String>,
        /// Build the configuration LTS with this pending-queue content:
        /// each occurrence is one packet as comma-separated field=value
        #[arg(long)]
        pending: Vec<String>,
        #[arg(long)]
        state_budget: Option<usize>,
    },
    /// Decide bisimilarity of two terms
    Bisim {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long)]
        state_budget: Option<usize>,
    },
    /// Enumerate traces of a term up to a depth
    Traces {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        term: Option<String>,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
    },
    /// Check reachability between two predicates
    CheckReach {
        #[command(flatten)]
        src: Source,
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: String,
        /// Flow policy to check against
        #[arg(long, value_enum, default_value_t = PolicySource::Head)]
        policy: PolicySource,
        /// Reconfiguration events chan=policy selecting the tail
        #[arg(long)]
        events: Vec<String>,
        /// Iterate switching and forwarding under a Kleene star
        #[arg(long)]
        star: bool,
        /// Topology policy applied after each switching step
        #[arg(long, default_value = "one")]
        topo: String,
        /// Verdict that makes the exit code 0
        #[arg(long, value_enum, default_value_t = Expect::Reachable)]
        expect: Expect,
    },
    /// Check that all traffic between two predicates crosses a waypoint
    CheckWaypoint {
        #[command(flatten)]
        src: Source,
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: String,
        #[arg(long)]
        via: String,
        #[arg(long, value_enum, default_value_t = PolicySource::Head)]
        policy: PolicySource,
        #[arg(long)]
        events: Vec<String>,
        #[arg(long, default_value = "one")]
        topo: String,
    },
    /// Check safety properties from a property file
    CheckSafety {
        #[command(flatten)]
        src: Source,
        /// Property file (alphabet + forbidden-word expressions)
        #[arg(long)]
        props: PathBuf,
        /// Check only the named property
        #[arg(long)]
        prop: Option<String>,
        /// Value for symbolic powers such as true^n
        #[arg(long)]
        n: Option<u32>,
        /// Check symbolic powers for every value 0..=N
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Run the FatTree migration benchmark
    Bench {
        /// Pod counts, e.g. 2,4
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, default_value_t = 10)]
        runs: u32,
        /// Decide the three properties concurrently as well
        #[arg(long)]
        parallel: bool,
        /// Use k/2 instead of k^2/4 ToR switches per pod
        #[arg(long)]
        classical: bool,
        /// Write the JSON report to a file
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli.cmd, json) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::StateBudget { .. } | Error::WordBudget { .. } | Error::PropBudget(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn parse_pred(src: &str, program: &Program) -> Result<NkPredicate, Error> {
    let pol = parse_policy_str(src, program)?;
    policy_to_pred(&pol)
        .ok_or_else(|| Error::Invalid(format!("`{src}` is not a predicate (tests only)")))
}

fn parse_events(
    specs: &[String],
    program: &Program,
    ctx: &Ctx,
) -> Result<BTreeSet<ReconfigEvent>, Error> {
    let mut events = BTreeSet::new();
    for spec in specs {
        let (chan, pol) = spec.split_once('=').ok_or_else(|| {
            Error::Invalid(format!("event `{spec}` must have the form chan=policy"))
        })?;
        if !program.channels.contains(chan) {
            return Err(Error::Invalid(format!("unknown channel `{chan}`")));
        }
        let pol = parse_policy_str(pol, program)?;
        events.insert(ReconfigEvent::new(chan, &pol, ctx)?);
    }
    Ok(events)
}

/// Resolves the switching policy for check-reach/check-waypoint: the head
/// of the restricted initial term, or of its tail after the given events.
fn resolve_policy(
    which: PolicySource,
    events: &[String],
    src: &Source,
    program: &Program,
    ctx: &Ctx,
) -> Result<NkPolicy, Error> {
    let init = src.init(program)?;
    match which {
        PolicySource::Head => head(&init, &program.defs, ctx),
        PolicySource::HeadOfTail => {
            let events = parse_events(events, program, ctx)?;
            if events.is_empty() {
                return Err(Error::Invalid(
                    "--policy head-of-tail needs at least one --events".into(),
                ));
            }
            let t = tail(&init, &events, &program.defs, ctx, default_tail_depth(&events))?;
            head(&t.term, &program.defs, ctx)
        }
    }
}

fn term_or_init(spec: &Option<String>, src: &Source, program: &Program) -> Result<DnkTerm, Error> {
    match spec {
        Some(text) => {
            let t = parse_term_str(text, program)?;
            program.defs.check_closed(&t)?;
            Ok(t)
        }
        None => src.init(program),
    }
}

fn parse_packet(spec: &str, ctx: &Ctx) -> Result<Packet, Error> {
    let mut pairs = Vec::new();
    for part in spec.split(',') {
        let (f, v) = part.trim().split_once('=').ok_or_else(|| {
            Error::Invalid(format!("packet component `{part}` must be field=value"))
        })?;
        pairs.push((f.trim().to_string(), v.trim().to_string()));
    }
    ctx.schema.packet_from_pairs(&pairs)
}

fn run(cmd: Cmd, json: bool) -> Result<u8, Error> {
    match cmd {
        Cmd::Normalize { src, term, depth } => {
            let program = src.load()?;
            let ctx = program.ctx();
            let t = term_or_init(&term, &src, &program)?;
            let result = if depth <= 1 {
                head_normal_form(&t, &program.defs, &ctx)?.to_term(&ctx)
            } else {
                unfold(&t, &program.defs, &ctx, depth)?
            };
            let text = print_term(&result);
            if json {
                println!("{}", json!({ "command": "normalize", "term": text }));
            } else {
                println!("{text}");
            }
            Ok(0)
        }
        Cmd::Lts { src, term, pending, state_budget: budget } => {
            let program = src.load()?;
            let ctx = program.ctx();
            let t = term_or_init(&term, &src, &program)?;
            let budget = budget.unwrap_or_else(state_budget);
            if pending.is_empty() {
                let lts = build_term_lts(&t, &program.defs, &ctx, budget)?;
                if json {
                    println!("{}", export_json(&lts, &ctx, print_term));
                } else {
                    print!("{}", export_text(&lts, &ctx, print_term));
                }
            } else {
                let mut queue = PacketList::empty();
                for spec in pending.iter().rev() {
                    queue = queue.push_front(parse_packet(spec, &ctx)?);
                }
                let lts = build_config_lts(&Config::new(t, queue), &program.defs, &ctx, budget)?;
                let show = |c: &Config| {
                    let fmt = |l: &PacketList| {
                        l.0.iter()
                            .map(|p| ctx.schema.format_packet(p))
                            .collect::<Vec<_>>()
                            .join("::")
                    };
                    format!(
                        "{} | pending [{}] | done [{}]",
                        print_term(&c.term),
                        fmt(&c.pending),
                        fmt(&c.done)
                    )
                };
                if json {
                    println!("{}", export_json(&lts, &ctx, show));
                } else {
                    print!("{}", export_text(&lts, &ctx, show));
                }
            }
            Ok(0)
        }
        Cmd::Bisim { src, left, right, state_budget: budget } => {
            let program = src.load()?;
            let ctx = program.ctx();
            let l = parse_term_str(&left, &program)?;
            let r = parse_term_str(&right, &program)?;
            program.defs.check_closed(&l)?;
            program.defs.check_closed(&r)?;
            let budget = budget.unwrap_or_else(state_budget);
            match bisimilar(&l, &r, &program.defs, &ctx, budget)? {
                Verdict::Equivalent => {
                    if json {
                        println!("{}", json!({ "command": "bisim", "verdict": "equivalent" }));
                    } else {
                        println!("equivalent");
                    }
                    Ok(0)
                }
                Verdict::Inequivalent(w) => {
                    let witness = w.render(&ctx);
                    if json {
                        println!(
                            "{}",
                            json!({ "command": "bisim", "verdict": "inequivalent",
                                    "witness": witness })
                        );
                    } else {
                        println!("inequivalent: {witness}");
                    }
                    Ok(1)
                }
                Verdict::Inconclusive(reason) => {
                    eprintln!("inconclusive: {reason}");
                    Ok(3)
                }
            }
        }
        Cmd::Traces { src, term, depth, budget } => {
            let program = src.load()?;
            let ctx = program.ctx();
            let t = term_or_init(&term, &src, &program)?;
            let traces = trace_expand(&t, &program.defs, &ctx, depth, budget)?;
            let rendered: Vec<String> = traces
                .iter()
                .map(|tr| {
                    tr.iter()
                        .map(|l| format_label(l, &ctx))
                        .collect::<Vec<_>>()
                        .join(" . ")
                })
                .collect();
            if json {
                println!("{}", json!({ "command": "traces", "depth": depth, "traces": rendered }));
            } else {
                for tr in rendered {
                    println!("{}", if tr.is_empty() { "<empty>" } else { &tr });
                }
            }
            Ok(0)
        }
        Cmd::CheckReach { src, input, out, policy, events, star, topo, expect } => {
            let program = src.load()?;
            let ctx = program.ctx();
            let inp = parse_pred(&input, &program)?;
            let outp = parse_pred(&out, &program)?;
            let topo = parse_policy_str(&topo, &program)?;
            let p = resolve_policy(policy, &events, &src, &program, &ctx)?;
            let reachable = check_reach(&inp, &p, &topo, &outp, &ctx, star)?;
            let verdict = if reachable { "reachable" } else { "unreachable" };
            let holds = (expect == Expect::Reachable) == reachable;
            if json {
                println!(
                    "{}",
                    json!({ "command": "check-reach", "verdict": verdict, "holds": holds })
                );
            } else {
                println!("{verdict}");
            }
            Ok(if holds { 0 } else { 1 })
        }
        Cmd::CheckWaypoint { src, input, out, via, policy, events, topo } => {
            let program = src.load()?;
            let ctx = program.ctx();
            let inp = parse_pred(&input, &program)?;
            let outp = parse_pred(&out, &program)?;
            let w = parse_pred(&via, &program)?;
            let topo = parse_policy_str(&topo, &program)?;
            let p = resolve_policy(policy, &events, &src, &program, &ctx)?;
            let holds = check_waypoint(&inp, &outp, &w, &p, &topo, &ctx)?;
            if json {
                println!("{}", json!({ "command": "check-waypoint", "holds": holds }));
            } else {
                println!("{}", if holds { "waypoint holds" } else { "waypoint violated" });
            }
            Ok(if holds { 0 } else { 1 })
        }
        Cmd::CheckSafety { src, props, prop, n, n_max } => {
            let program = src.load()?;
            let ctx = program.ctx();
            let init = src.init(&program)?;
            let text = std::fs::read_to_string(&props)
                .map_err(|e| Error::Invalid(format!("{}: {e}", props.display())))?;
            let file = parse_properties(&text, &program)?;
            let mut all_safe = true;
            let mut results = Vec::new();
            for (name, regexp) in &file.props {
                if prop.as_deref().is_some_and(|p| p != name) {
                    continue;
                }
                let ns: Vec<u32> = if regexp.has_symbolic_power() {
                    match (n, n_max) {
                        (Some(v), None) => vec![v],
                        (None, Some(m)) => (0..=m).collect(),
                        _ => {
                            return Err(Error::Invalid(format!(
                                "property `{name}` has a symbolic power; give exactly one of --n, --n-max"
                            )))
                        }
                    }
                } else {
                    vec![0]
                };
                for v in ns {
                    let forbidden = regexp.instantiate(v);
                    let alphabet = if file.auto_alphabet {
                        derive_alphabet(&init, &program.defs, &ctx, word_bound(&forbidden))?
                    } else {
                        file.alphabet.clone()
                    };
                    let property = Property { alphabet, forbidden };
                    let shown = if regexp.has_symbolic_power() {
                        format!("{name}[n={v}]")
                    } else {
                        name.clone()
                    };
                    match check_safe(&init, &program.defs, &ctx, &property)? {
                        SafetyVerdict::Safe => results.push((shown, true, None)),
                        SafetyVerdict::Violated(word) => {
                            all_safe = false;
                            let witness = word
                                .iter()
                                .map(|a| a.render(&ctx))
                                .collect::<Vec<_>>()
                                .join(" . ");
                            results.push((shown, false, Some(witness)));
                        }
                    }
                }
            }
            if results.is_empty() {
                return Err(Error::Invalid("no matching property".into()));
            }
            if json {
                let items: Vec<_> = results
                    .iter()
                    .map(|(name, safe, witness)| {
                        json!({ "property": name, "safe": safe, "witness": witness })
                    })
                    .collect();
                println!("{}", json!({ "command": "check-safety", "results": items }));
            } else {
                for (name, _safe, witness) in &results {
                    match witness {
                        None => println!("{name}: safe"),
                        Some(w) => println!("{name}: violated by {w}"),
                    }
                }
            }
            Ok(if all_safe { 0 } else { 1 })
        }
        Cmd::Bench { k, runs, parallel, classical, out } => {
            let mut reports = Vec::new();
            for k in k {
                let report = run_benchmark(k, classical, runs, parallel)?;
                if !json {
                    println!(
                        "k={} switches={} preprocessing={:.1}ms",
                        report.k, report.switches, report.preprocessing_ms
                    );
                    for p in &report.properties {
                        println!(
                            "  {}: {} ({:.1}ms)",
                            p.name,
                            if p.holds { "holds" } else { "violated" },
                            p.decide_ms
                        );
                    }
                    if let Some(ms) = report.all_parallel_ms {
                        println!("  all properties in parallel: {ms:.1}ms");
                    }
                }
                reports.push(report);
            }
            let doc = serde_json::to_value(&reports)
                .map_err(|e| Error::Invalid(format!("report serialization: {e}")))?;
            if json {
                println!("{doc}");
            }
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap())
                    .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            }
            Ok(0)
        }
    }
}
