//! Concrete syntax: a lexer, a recursive-descent parser for program and
//! property files, and a printer producing parseable text.

mod lexer;
mod parser;
mod printer;

pub use lexer::{Lexer, Token, TokenKind};
pub use parser::{
    parse_policy_str, parse_program, parse_properties, parse_term_str, policy_to_pred, Program,
    PropertyFile,
};
pub use printer::{print_policy, print_program, print_term};
