//! Printing of policies, terms, and programs in the concrete syntax
//! accepted by the parser.

use crate::dnk::{DnkTerm, RestrictionSet};
use crate::netkat::{NkPolicy, NkPredicate};
use crate::syntax::parser::Program;

fn pred_prec(a: &NkPredicate) -> u8 {
    match a {
        NkPredicate::Or(..) => 0,
        NkPredicate::And(..) => 1,
        _ => 2,
    }
}

fn print_pred(a: &NkPredicate, min_prec: u8, out: &mut String) {
    let prec = pred_prec(a);
    let paren = prec < min_prec;
    if paren {
        out.push('(');
    }
    match a {
        NkPredicate::Zero => out.push_str("zero"),
        NkPredicate::One => out.push_str("one"),
        NkPredicate::Test(f, v) => {
            out.push_str(f);
            out.push_str(" = ");
            out.push_str(v);
        }
        NkPredicate::Or(x, y) => {
            print_pred(x, 0, out);
            out.push_str(" + ");
            print_pred(y, 0, out);
        }
        NkPredicate::And(x, y) => {
            print_pred(x, 1, out);
            out.push_str(" . ");
            print_pred(y, 1, out);
        }
        NkPredicate::Not(x) => {
            out.push('~');
            print_pred(x, 3, out);
        }
    }
    if paren {
        out.push(')');
    }
}

fn pol_prec(p: &NkPolicy) -> u8 {
    match p {
        NkPolicy::Plus(..) => 0,
        NkPolicy::Seq(..) => 1,
        NkPolicy::Star(..) => 2,
        NkPolicy::Pred(a) => pred_prec(a).min(2),
        NkPolicy::Assign(..) => 2,
    }
}

fn print_pol(p: &NkPolicy, min_prec: u8, out: &mut String) {
    let prec = pol_prec(p);
    let paren = prec < min_prec;
    if paren {
        out.push('(');
    }
    match p {
        NkPolicy::Pred(a) => print_pred(a, if paren { 0 } else { min_prec }, out),
        NkPolicy::Assign(f, v) => {
            out.push_str(f);
            out.push_str(" <- ");
            out.push_str(v);
        }
        NkPolicy::Plus(x, y) => {
            print_pol(x, 0, out);
            out.push_str(" + ");
            print_pol(y, 0, out);
        }
        NkPolicy::Seq(x, y) => {
            print_pol(x, 1, out);
            out.push_str(" . ");
            print_pol(y, 1, out);
        }
        NkPolicy::Star(x) => {
            print_pol(x, 3, out);
            out.push('*');
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn print_policy(p: &NkPolicy) -> String {
    let mut out = String::new();
    print_pol(p, 0, &mut out);
    out
}

fn print_restriction(l: &RestrictionSet, out: &mut String) {
    out.push('{');
    if l.all_channels.contains("*") {
        out.push('*');
    } else {
        let mut first = true;
        for c in &l.all_channels {
            if !first {
                out.push_str(", ");
            }
            out.push_str(c);
            first = false;
        }
    }
    out.push('}');
}

// term precedence: choice 0, parallel 1, prefix 2
fn term_prec(t: &DnkTerm) -> u8 {
    match t {
        DnkTerm::OPlus(..) => 0,
        DnkTerm::Par(..) | DnkTerm::LeftMerge(..) | DnkTerm::CommMerge(..) => 1,
        _ => 2,
    }
}

fn print_term_prec(t: &DnkTerm, min_prec: u8, out: &mut String) {
    let prec = term_prec(t);
    let paren = prec < min_prec;
    if paren {
        out.push('(');
    }
    match t {
        DnkTerm::Bot => out.push_str("bot"),
        DnkTerm::Var(x) => out.push_str(x),
        DnkTerm::SeqN(p, d) => {
            // a policy prefix must not be mistaken for a variable or eat the
            // following `;`, so compound policies get parentheses
            let pol = print_policy(p);
            if pol_prec(p) < 2 {
                out.push('(');
                out.push_str(&pol);
                out.push(')');
            } else {
                out.push_str(&pol);
            }
            print_cont(d, out);
        }
        DnkTerm::Recv(x, p, d) => {
            out.push_str(x);
            out.push_str(" ? ");
            print_pol(p, 2, out);
            print_cont(d, out);
        }
        DnkTerm::Send(x, p, d) => {
            out.push_str(x);
            out.push_str(" ! ");
            print_pol(p, 2, out);
            print_cont(d, out);
        }
        DnkTerm::Rcfg(x, p, d) => {
            out.push_str("rcfg(");
            out.push_str(x);
            out.push_str(", ");
            out.push_str(&print_policy(p));
            out.push(')');
            print_cont(d, out);
        }
        DnkTerm::Par(a, b) => {
            print_term_prec(a, 2, out);
            out.push_str(" || ");
            print_term_prec(b, 1, out);
        }
        DnkTerm::OPlus(a, b) => {
            print_term_prec(a, 1, out);
            out.push_str(" (+) ");
            print_term_prec(b, 0, out);
        }
        DnkTerm::Delta(l, d) => {
            out.push_str("delta");
            print_restriction(l, out);
            out.push('(');
            print_term_prec(d, 0, out);
            out.push(')');
        }
        DnkTerm::Proj(n, d) => {
            out.push_str(&format!("pi[{n}]("));
            print_term_prec(d, 0, out);
            out.push(')');
        }
        // the merge operators have no concrete syntax; print their
        // expansion-ready form with explicit grouping
        DnkTerm::LeftMerge(a, b) => {
            out.push_str("leftmerge(");
            print_term_prec(a, 0, out);
            out.push_str(", ");
            print_term_prec(b, 0, out);
            out.push(')');
        }
        DnkTerm::CommMerge(a, b) => {
            out.push_str("commmerge(");
            print_term_prec(a, 0, out);
            out.push_str(", ");
            print_term_prec(b, 0, out);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

fn print_cont(d: &DnkTerm, out: &mut String) {
    if *d == DnkTerm::Bot {
        return;
    }
    out.push_str(" ; ");
    print_term_prec(d, 2, out);
}

pub fn print_term(t: &DnkTerm) -> String {
    let mut out = String::new();
    print_term_prec(t, 0, &mut out);
    out
}

/// Prints a whole program in parseable form. Policy abbreviations were
/// substituted during parsing, so definitions appear expanded.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    out.push_str("fields {\n");
    for f in p.schema.fields() {
        out.push_str(&format!("  {} : {{ {} }};\n", f.name, f.values.join(", ")));
    }
    out.push_str("}\n");
    if !p.channels.is_empty() {
        out.push_str("channels {\n");
        for c in &p.channels {
            out.push_str(&format!("  {c};\n"));
        }
        out.push_str("}\n");
    }
    for (name, body) in p.defs.iter() {
        out.push_str(&format!("dnk {name} = {};\n", print_term(body)));
    }
    if let Some(init) = &p.init {
        out.push_str(&format!("init = {};\n", print_term(init)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse_program;

    const SRC: &str = "
        fields { port : { int, ext }; }
        channels { c; d; }
        dnk X = (port = int) . (port <- ext) ; X
            (+) c ? one ; Y
            (+) delta{c, d}(pi[2](Y || X));
        dnk Y = c ! ~(port = int) + port = ext ; X;
        init = X || Y;
    ";

    #[test]
    fn print_parse_round_trip() {
        let prog = parse_program(SRC).unwrap();
        let printed = print_program(&prog);
        let reparsed = parse_program(&printed).unwrap();
        assert_eq!(prog.init, reparsed.init);
        let orig: Vec<_> = prog.defs.iter().collect();
        let back: Vec<_> = reparsed.defs.iter().collect();
        assert_eq!(orig, back);
    }

    #[test]
    fn policy_printing_respects_precedence() {
        use crate::netkat::NkPolicy;
        let p = NkPolicy::seq(
            NkPolicy::plus(NkPolicy::test("a", "x"), NkPolicy::test("b", "y")),
            NkPolicy::star(NkPolicy::assign("a", "x")),
        );
        assert_eq!(print_policy(&p), "(a = x + b = y) . (a <- x)*");
    }
}
