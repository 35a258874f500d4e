//! Recursive-descent parsers for program files (schema, channels, policy
//! and process definitions) and property files (alphabet plus forbidden
//! trace expressions).
//!
//! Identifiers are disambiguated against the declaration blocks parsed
//! earlier in the same file: a name is a channel, a policy abbreviation, a
//! field, or otherwise a process variable. Policy abbreviations are
//! substituted eagerly. All binary operators associate to the right; every
//! operator involved is semantically associative, so this only fixes the
//! parse tree, not the meaning.

use std::collections::{BTreeMap, BTreeSet};

use crate::dnk::{Definitions, DnkTerm, RestrictionSet};
use crate::error::{Error, Result};
use crate::netkat::{normalize, Ctx, NkPolicy, NkPredicate};
use crate::packet::FieldSchema;
use crate::safety::{Act, Alphabet, Regexp};

use super::lexer::{Lexer, Token, TokenKind};

/// A parsed program file.
#[derive(Debug)]
pub struct Program {
    pub schema: FieldSchema,
    pub channels: BTreeSet<String>,
    pub netkat: BTreeMap<String, NkPolicy>,
    pub defs: Definitions,
    pub init: Option<DnkTerm>,
}

impl Program {
    pub fn ctx(&self) -> Ctx {
        Ctx::new(self.schema.clone())
    }
}

/// A parsed property file: the declared alphabet and named properties.
/// Powers may carry a symbolic exponent, instantiated later.
#[derive(Debug)]
pub struct PropertyFile {
    pub alphabet: Alphabet,
    /// Declared as `alphabet auto;`: the alphabet is to be derived from
    /// the labels the analyzed system can reach within the word bound.
    pub auto_alphabet: bool,
    pub props: Vec<(String, PropRegexp)>,
}

#[derive(Debug, Clone)]
pub enum PropRegexp {
    True,
    Act(Act),
    NotAct(Act),
    Plus(Box<PropRegexp>, Box<PropRegexp>),
    Cat(Box<PropRegexp>, Box<PropRegexp>),
    Pow(Box<PropRegexp>, u32),
    PowVar(Box<PropRegexp>, String),
}

impl PropRegexp {
    /// Replaces every symbolic exponent by `n`.
    pub fn instantiate(&self, n: u32) -> Regexp {
        match self {
            PropRegexp::True => Regexp::True,
            PropRegexp::Act(a) => Regexp::Act(a.clone()),
            PropRegexp::NotAct(a) => Regexp::NotAct(a.clone()),
            PropRegexp::Plus(x, y) => {
                Regexp::Plus(Box::new(x.instantiate(n)), Box::new(y.instantiate(n)))
            }
            PropRegexp::Cat(x, y) => {
                Regexp::Cat(Box::new(x.instantiate(n)), Box::new(y.instantiate(n)))
            }
            PropRegexp::Pow(x, k) => Regexp::Pow(Box::new(x.instantiate(n)), *k),
            PropRegexp::PowVar(x, _) => Regexp::Pow(Box::new(x.instantiate(n)), n),
        }
    }

    pub fn has_symbolic_power(&self) -> bool {
        match self {
            PropRegexp::True | PropRegexp::Act(_) | PropRegexp::NotAct(_) => false,
            PropRegexp::Plus(x, y) | PropRegexp::Cat(x, y) => {
                x.has_symbolic_power() || y.has_symbolic_power()
            }
            PropRegexp::Pow(x, _) => x.has_symbolic_power(),
            PropRegexp::PowVar(..) => true,
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Parser> {
        Ok(Parser {
            tokens: Lexer::tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek2(&self) -> &TokenKind {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].kind
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        let t = &self.tokens[self.pos];
        Error::Parse {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<()> {
        if *self.peek() == kind {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if *self.peek() == kind {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            TokenKind::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if let TokenKind::Ident(s) = self.peek() {
            if s == kw {
                self.next();
                return true;
            }
        }
        false
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), TokenKind::Ident(s) if s == kw)
    }

    fn value(&mut self) -> Result<String> {
        match self.peek().clone() {
            TokenKind::Ident(s) => {
                self.next();
                Ok(s)
            }
            TokenKind::Number(n) => {
                self.next();
                Ok(n.to_string())
            }
            _ => Err(self.error("expected a field value")),
        }
    }
}

struct Symbols {
    schema: FieldSchema,
    channels: BTreeSet<String>,
    netkat: BTreeMap<String, NkPolicy>,
}

impl Symbols {
    fn is_field(&self, name: &str) -> bool {
        self.schema.field_index(name).is_ok()
    }
}

fn symbols_of(program: &Program) -> Symbols {
    Symbols {
        schema: program.schema.clone(),
        channels: program.channels.clone(),
        netkat: program.netkat.clone(),
    }
}

/// Parses a standalone policy expression in the scope of a program's
/// fields and abbreviations.
pub fn parse_policy_str(src: &str, program: &Program) -> Result<NkPolicy> {
    let mut p = Parser::new(src)?;
    let sym = symbols_of(program);
    let pol = parse_policy(&mut p, &sym)?;
    if *p.peek() != TokenKind::Eof {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(pol)
}

/// Parses a standalone term in the scope of a program's declarations.
pub fn parse_term_str(src: &str, program: &Program) -> Result<DnkTerm> {
    let mut p = Parser::new(src)?;
    let sym = symbols_of(program);
    let t = parse_term(&mut p, &sym)?;
    if *p.peek() != TokenKind::Eof {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(t)
}

/// Parses a complete program file.
pub fn parse_program(src: &str) -> Result<Program> {
    let mut p = Parser::new(src)?;

    // fields { name : { v, ... }; ... }
    if !p.keyword("fields") {
        return Err(p.error("expected `fields` block"));
    }
    p.expect(TokenKind::LBrace, "`{`")?;
    let mut fields = Vec::new();
    while !p.eat(TokenKind::RBrace) {
        let name = p.ident("a field name")?;
        p.expect(TokenKind::Colon, "`:`")?;
        p.expect(TokenKind::LBrace, "`{`")?;
        let mut values = Vec::new();
        loop {
            values.push(p.value()?);
            if !p.eat(TokenKind::Comma) {
                break;
            }
        }
        p.expect(TokenKind::RBrace, "`}`")?;
        p.expect(TokenKind::Semi, "`;`")?;
        fields.push((name, values));
    }
    let schema = FieldSchema::new(fields)?;

    // channels { a; b; }
    let mut channels = BTreeSet::new();
    if p.keyword("channels") {
        p.expect(TokenKind::LBrace, "`{`")?;
        while !p.eat(TokenKind::RBrace) {
            channels.insert(p.ident("a channel name")?);
            p.expect(TokenKind::Semi, "`;`")?;
        }
    }

    let mut sym = Symbols {
        schema,
        channels,
        netkat: BTreeMap::new(),
    };
    let mut defs = Definitions::new();
    let mut init = None;

    loop {
        if p.keyword("netkat") {
            let name = p.ident("a policy name")?;
            p.expect(TokenKind::Equals, "`=`")?;
            let pol = parse_policy(&mut p, &sym)?;
            p.expect(TokenKind::Semi, "`;`")?;
            if sym.netkat.insert(name.clone(), pol).is_some() {
                return Err(Error::Invalid(format!(
                    "policy `{name}` defined more than once"
                )));
            }
        } else if p.keyword("dnk") {
            let name = p.ident("a process name")?;
            p.expect(TokenKind::Equals, "`=`")?;
            let term = parse_term(&mut p, &sym)?;
            p.expect(TokenKind::Semi, "`;`")?;
            defs.define(&name, term)?;
        } else if p.keyword("init") {
            p.expect(TokenKind::Equals, "`=`")?;
            let term = parse_term(&mut p, &sym)?;
            p.expect(TokenKind::Semi, "`;`")?;
            if init.replace(term).is_some() {
                return Err(Error::Invalid("more than one `init`".into()));
            }
        } else if *p.peek() == TokenKind::Eof {
            break;
        } else {
            return Err(p.error("expected `netkat`, `dnk`, or `init`"));
        }
    }

    Ok(Program {
        schema: sym.schema,
        channels: sym.channels,
        netkat: sym.netkat,
        defs,
        init,
    })
}

// ---- policies ----

fn parse_policy(p: &mut Parser, sym: &Symbols) -> Result<NkPolicy> {
    let mut terms = vec![parse_policy_seq(p, sym)?];
    while p.eat(TokenKind::Plus) {
        terms.push(parse_policy_seq(p, sym)?);
    }
    Ok(NkPolicy::sum(terms))
}

fn parse_policy_seq(p: &mut Parser, sym: &Symbols) -> Result<NkPolicy> {
    let mut terms = vec![parse_policy_star(p, sym)?];
    while p.eat(TokenKind::Dot) {
        terms.push(parse_policy_star(p, sym)?);
    }
    Ok(NkPolicy::seq_all(terms))
}

fn parse_policy_star(p: &mut Parser, sym: &Symbols) -> Result<NkPolicy> {
    let mut pol = parse_policy_atom(p, sym)?;
    while p.eat(TokenKind::Star) {
        pol = NkPolicy::star(pol);
    }
    Ok(pol)
}

fn parse_policy_atom(p: &mut Parser, sym: &Symbols) -> Result<NkPolicy> {
    if p.eat(TokenKind::LParen) {
        let pol = parse_policy(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        return Ok(pol);
    }
    if p.eat(TokenKind::Tilde) {
        let pol = parse_policy_atom(p, sym)?;
        let pred = policy_to_pred(&pol)
            .ok_or_else(|| p.error("`~` applies to predicates only"))?;
        return Ok(NkPolicy::Pred(NkPredicate::Not(Box::new(pred))));
    }
    if p.keyword("zero") {
        return Ok(NkPolicy::zero());
    }
    if p.keyword("one") {
        return Ok(NkPolicy::one());
    }
    let tok = p.pos;
    let name = p.ident("a policy")?;
    if sym.is_field(&name) {
        if p.eat(TokenKind::Equals) {
            let v = p.value()?;
            check_value(p, sym, &name, &v)?;
            return Ok(NkPolicy::test(&name, &v));
        }
        if p.eat(TokenKind::Arrow) {
            let v = p.value()?;
            check_value(p, sym, &name, &v)?;
            return Ok(NkPolicy::assign(&name, &v));
        }
        p.pos = tok;
        return Err(p.error(format!("field `{name}` needs `=` or `<-`")));
    }
    if let Some(pol) = sym.netkat.get(&name) {
        return Ok(pol.clone());
    }
    p.pos = tok;
    Err(p.error(format!("unknown policy name `{name}`")))
}

fn check_value(p: &Parser, sym: &Symbols, field: &str, value: &str) -> Result<()> {
    let fi = sym.schema.field_index(field)?;
    sym.schema
        .value_index(fi, value)
        .map(|_| ())
        .map_err(|_| p.error(format!("`{value}` is not a value of field `{field}`")))
}

/// Views a policy built from tests as a predicate, if possible.
pub fn policy_to_pred(p: &NkPolicy) -> Option<NkPredicate> {
    match p {
        NkPolicy::Pred(a) => Some(a.clone()),
        NkPolicy::Plus(x, y) => Some(NkPredicate::Or(
            Box::new(policy_to_pred(x)?),
            Box::new(policy_to_pred(y)?),
        )),
        NkPolicy::Seq(x, y) => Some(NkPredicate::And(
            Box::new(policy_to_pred(x)?),
            Box::new(policy_to_pred(y)?),
        )),
        NkPolicy::Assign(..) | NkPolicy::Star(_) => None,
    }
}

// ---- terms ----

fn parse_term(p: &mut Parser, sym: &Symbols) -> Result<DnkTerm> {
    let mut terms = vec![parse_term_par(p, sym)?];
    while p.eat(TokenKind::OPlus) {
        terms.push(parse_term_par(p, sym)?);
    }
    Ok(DnkTerm::choice(terms))
}

fn parse_term_par(p: &mut Parser, sym: &Symbols) -> Result<DnkTerm> {
    let mut t = parse_term_prefix(p, sym)?;
    if p.eat(TokenKind::ParPipe) {
        let rest = parse_term_par(p, sym)?;
        t = DnkTerm::par(t, rest);
    }
    Ok(t)
}

/// Whether a token can only appear at the start of a top-level statement,
/// so that a preceding `;` must be the statement terminator rather than a
/// continuation marker.
fn starts_statement(kind: &TokenKind) -> bool {
    match kind {
        TokenKind::Eof => true,
        TokenKind::Ident(name) => matches!(name.as_str(), "dnk" | "netkat" | "init"),
        _ => false,
    }
}

fn parse_continuation(p: &mut Parser, sym: &Symbols) -> Result<DnkTerm> {
    if *p.peek() == TokenKind::Semi && !starts_statement(p.peek2()) {
        p.next();
        parse_term_prefix(p, sym)
    } else {
        // a prefix without continuation ends in inaction
        Ok(DnkTerm::Bot)
    }
}

fn parse_term_prefix(p: &mut Parser, sym: &Symbols) -> Result<DnkTerm> {
    if p.keyword("bot") {
        return Ok(DnkTerm::Bot);
    }
    if p.at_keyword("delta") {
        p.next();
        p.expect(TokenKind::LBrace, "`{`")?;
        let restriction = if p.eat(TokenKind::Star) {
            RestrictionSet::full()
        } else if *p.peek() == TokenKind::RBrace {
            // an empty restriction set blocks nothing
            RestrictionSet::channels([])
        } else {
            let mut chans = Vec::new();
            loop {
                let c = p.ident("a channel name")?;
                if !sym.channels.contains(&c) {
                    return Err(p.error(format!("unknown channel `{c}`")));
                }
                chans.push(c);
                if !p.eat(TokenKind::Comma) {
                    break;
                }
            }
            RestrictionSet::channels(chans)
        };
        p.expect(TokenKind::RBrace, "`}`")?;
        p.expect(TokenKind::LParen, "`(`")?;
        let t = parse_term(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        return Ok(DnkTerm::delta(restriction, t));
    }
    if p.at_keyword("pi") {
        p.next();
        p.expect(TokenKind::LBracket, "`[`")?;
        let n = match p.peek().clone() {
            TokenKind::Number(n) => {
                p.next();
                n as u32
            }
            _ => return Err(p.error("expected a depth")),
        };
        p.expect(TokenKind::RBracket, "`]`")?;
        p.expect(TokenKind::LParen, "`(`")?;
        let t = parse_term(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        return Ok(DnkTerm::proj(n, t));
    }
    if p.at_keyword("rcfg") {
        p.next();
        p.expect(TokenKind::LParen, "`(`")?;
        let chan = p.ident("a channel name")?;
        if !sym.channels.contains(&chan) {
            return Err(p.error(format!("unknown channel `{chan}`")));
        }
        p.expect(TokenKind::Comma, "`,`")?;
        let pol = parse_policy(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        let cont = parse_continuation(p, sym)?;
        return Ok(DnkTerm::rcfg(&chan, pol, cont));
    }
    // communication prefix: channel name followed by `?` or `!`
    if let TokenKind::Ident(name) = p.peek().clone() {
        if sym.channels.contains(&name) {
            p.next();
            let send = match p.next().kind {
                TokenKind::Question => false,
                TokenKind::Bang => true,
                _ => return Err(p.error(format!("channel `{name}` needs `?` or `!`"))),
            };
            let pol = parse_policy(p, sym)?;
            let cont = parse_continuation(p, sym)?;
            return Ok(if send {
                DnkTerm::send(&name, pol, cont)
            } else {
                DnkTerm::recv(&name, pol, cont)
            });
        }
        // process variable: a plain identifier that is neither a field, a
        // policy abbreviation, nor a policy keyword
        if !sym.is_field(&name)
            && !sym.netkat.contains_key(&name)
            && name != "zero"
            && name != "one"
            && !matches!(name.as_str(), "dnk" | "netkat" | "init")
        {
            p.next();
            return Ok(DnkTerm::var(&name));
        }
    }
    // otherwise, a policy prefix; `(` may open either a policy or a term
    // group, so try the policy reading first and fall back
    if *p.peek() == TokenKind::LParen {
        let save = p.pos;
        if let Ok(pol) = parse_policy(p, sym) {
            if *p.peek() == TokenKind::Semi
                || *p.peek() == TokenKind::Star
                || matches!(
                    p.peek(),
                    TokenKind::OPlus
                        | TokenKind::ParPipe
                        | TokenKind::RParen
                        | TokenKind::RBrace
                        | TokenKind::Eof
                )
            {
                let cont = parse_continuation(p, sym)?;
                return Ok(DnkTerm::seq_pol(pol, cont));
            }
        }
        p.pos = save;
        p.expect(TokenKind::LParen, "`(`")?;
        let t = parse_term(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        return Ok(t);
    }
    let pol = parse_policy(p, sym)?;
    let cont = parse_continuation(p, sym)?;
    Ok(DnkTerm::seq_pol(pol, cont))
}

// ---- properties ----

/// Parses a property file against the program's schema and channels.
pub fn parse_properties(src: &str, program: &Program) -> Result<PropertyFile> {
    let mut p = Parser::new(src)?;
    let sym = Symbols {
        schema: program.schema.clone(),
        channels: program.channels.clone(),
        netkat: program.netkat.clone(),
    };

    if !p.keyword("alphabet") {
        return Err(p.error("expected `alphabet` block"));
    }
    let mut acts = BTreeSet::new();
    let auto_alphabet = p.keyword("auto");
    if auto_alphabet {
        p.expect(TokenKind::Semi, "`;`")?;
    } else {
        p.expect(TokenKind::LBrace, "`{`")?;
        while !p.eat(TokenKind::RBrace) {
            acts.insert(parse_act(&mut p, &sym)?);
            p.expect(TokenKind::Semi, "`;`")?;
        }
    }
    let alphabet = Alphabet { acts };

    let mut props = Vec::new();
    while p.keyword("prop") {
        let name = p.ident("a property name")?;
        p.expect(TokenKind::Equals, "`=`")?;
        p.expect(TokenKind::LBracket, "`[`")?;
        let r = parse_regexp(&mut p, &sym)?;
        p.expect(TokenKind::RBracket, "`]`")?;
        if !p.keyword("false") {
            return Err(p.error("expected `false`"));
        }
        p.expect(TokenKind::Semi, "`;`")?;
        props.push((name, r));
    }
    if *p.peek() != TokenKind::Eof {
        return Err(p.error("expected `prop` or end of file"));
    }
    Ok(PropertyFile {
        alphabet,
        auto_alphabet,
        props,
    })
}

fn parse_act(p: &mut Parser, sym: &Symbols) -> Result<Act> {
    if p.keyword("flow") {
        p.expect(TokenKind::LParen, "`(`")?;
        let test = parse_policy(p, sym)?;
        p.expect(TokenKind::Comma, "`,`")?;
        let assign = parse_policy(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        let test_rel = normalize(&test, &sym.schema)?;
        let n = sym.schema.packet_count() as u32;
        let ti = match test_rel.pairs.iter().collect::<Vec<_>>().as_slice() {
            [(a, b)] if a == b => *a,
            _ => {
                return Err(p.error(
                    "the first argument of `flow` must be a complete test \
                     matching exactly one packet",
                ))
            }
        };
        let assign_rel = normalize(&assign, &sym.schema)?;
        let outs: BTreeSet<u32> = assign_rel.pairs.iter().map(|&(_, b)| b).collect();
        let ai = match (assign_rel.pairs.len() as u32, outs.len()) {
            (k, 1) if k == n => *outs.iter().next().unwrap(),
            _ => {
                return Err(p.error(
                    "the second argument of `flow` must be a complete assignment",
                ))
            }
        };
        return Ok(Act::Flow {
            test: ti,
            assign: ai,
        });
    }
    if p.keyword("rcfg") {
        p.expect(TokenKind::LParen, "`(`")?;
        let chan = p.ident("a channel name")?;
        if !sym.channels.contains(&chan) {
            return Err(p.error(format!("unknown channel `{chan}`")));
        }
        p.expect(TokenKind::Comma, "`,`")?;
        let pol = parse_policy(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        return Ok(Act::Rcfg {
            chan,
            rel: normalize(&pol, &sym.schema)?,
        });
    }
    Err(p.error("expected `flow(...)` or `rcfg(...)`"))
}

fn parse_regexp(p: &mut Parser, sym: &Symbols) -> Result<PropRegexp> {
    let mut terms = vec![parse_regexp_cat(p, sym)?];
    while p.eat(TokenKind::Plus) {
        terms.push(parse_regexp_cat(p, sym)?);
    }
    let last = terms.pop().unwrap();
    Ok(terms
        .into_iter()
        .rev()
        .fold(last, |acc, r| PropRegexp::Plus(Box::new(r), Box::new(acc))))
}

fn parse_regexp_cat(p: &mut Parser, sym: &Symbols) -> Result<PropRegexp> {
    let mut terms = vec![parse_regexp_pow(p, sym)?];
    while p.eat(TokenKind::Dot) {
        terms.push(parse_regexp_pow(p, sym)?);
    }
    let last = terms.pop().unwrap();
    Ok(terms
        .into_iter()
        .rev()
        .fold(last, |acc, r| PropRegexp::Cat(Box::new(r), Box::new(acc))))
}

fn parse_regexp_pow(p: &mut Parser, sym: &Symbols) -> Result<PropRegexp> {
    let mut r = parse_regexp_atom(p, sym)?;
    while p.eat(TokenKind::Caret) {
        r = match p.peek().clone() {
            TokenKind::Number(n) => {
                p.next();
                PropRegexp::Pow(Box::new(r), n as u32)
            }
            TokenKind::Ident(v) => {
                p.next();
                PropRegexp::PowVar(Box::new(r), v)
            }
            _ => return Err(p.error("expected an exponent")),
        };
    }
    Ok(r)
}

fn parse_regexp_atom(p: &mut Parser, sym: &Symbols) -> Result<PropRegexp> {
    if p.eat(TokenKind::LParen) {
        let r = parse_regexp(p, sym)?;
        p.expect(TokenKind::RParen, "`)`")?;
        return Ok(r);
    }
    if p.keyword("true") {
        return Ok(PropRegexp::True);
    }
    if p.eat(TokenKind::Bang) {
        let a = parse_act(p, sym)?;
        return Ok(PropRegexp::NotAct(a));
    }
    Ok(PropRegexp::Act(parse_act(p, sym)?))
}
