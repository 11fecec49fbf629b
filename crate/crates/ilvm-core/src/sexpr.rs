//! S-expression reader and printer, the concrete syntax of every language
//! in the family.
//!
//! Only symbols, arbitrary-precision integers, and lists exist; reader
//! syntax for other datatypes (strings, `#`-prefixed literals) is rejected
//! so every language's value space stays closed. Comments run from `;` to
//! end of line. Printing is canonical: single spaces, no line breaks, so
//! `read(print(e))` is the identity.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;

/// A symbolic expression: the universal program and data syntax.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SExpr {
    /// A non-empty atom that is not an integer literal.
    Symbol(String),
    /// An integer atom; arbitrary precision, width checks happen later.
    Int(BigInt),
    /// A parenthesized sequence.
    List(Vec<SExpr>),
}

impl SExpr {
    /// Build a symbol from a string slice.
    pub fn sym(name: &str) -> SExpr {
        SExpr::Symbol(name.to_string())
    }

    /// Build an integer atom from anything convertible to a `BigInt`.
    pub fn int(value: impl Into<BigInt>) -> SExpr {
        SExpr::Int(value.into())
    }

    /// Build a list node.
    pub fn list(items: Vec<SExpr>) -> SExpr {
        SExpr::List(items)
    }

    /// The symbol's text, if this is a symbol.
    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s) => Some(s),
            _ => None,
        }
    }

    /// The integer value, if this is an integer atom.
    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            SExpr::Int(n) => Some(n),
            _ => None,
        }
    }

    /// The element slice, if this is a list.
    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items) => Some(items),
            _ => None,
        }
    }

    /// True iff this is the symbol `name`.
    pub fn is_symbol(&self, name: &str) -> bool {
        self.as_symbol() == Some(name)
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Symbol(s) => f.write_str(s),
            SExpr::Int(n) => write!(f, "{}", n),
            SExpr::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", item)?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A failure to read exactly one s-expression; each case names the byte
/// offset where the problem sits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadError {
    /// A `(` without its `)`, or a stray `)`.
    UnbalancedParens { offset: usize },
    /// Bytes after the first complete expression, or reader syntax we do
    /// not support (string quotes, `#`-prefixed atoms).
    TrailingGarbage { offset: usize },
    /// Nothing but whitespace and comments.
    EmptyInput { offset: usize },
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReadError::UnbalancedParens { offset } => {
                write!(f, "unbalanced parentheses at byte {}", offset)
            }
            ReadError::TrailingGarbage { offset } => {
                write!(f, "trailing garbage at byte {}", offset)
            }
            ReadError::EmptyInput { offset } => {
                write!(f, "empty input at byte {}", offset)
            }
        }
    }
}

impl core::error::Error for ReadError {}

/// Parse exactly one s-expression from `text`, allowing surrounding
/// whitespace and `;`-to-end-of-line comments.
pub fn read(text: &str) -> Result<SExpr, ReadError> {
    let bytes = text.as_bytes();
    let mut pos = skip_blank(bytes, 0);
    if pos == bytes.len() {
        return Err(ReadError::EmptyInput { offset: pos });
    }
    let expr = parse_expr(text, &mut pos)?;
    pos = skip_blank(bytes, pos);
    if pos != bytes.len() {
        return Err(ReadError::TrailingGarbage { offset: pos });
    }
    Ok(expr)
}

/// Parse every s-expression in `text`, in order. An input of only
/// whitespace and comments yields the empty vector.
pub fn read_many(text: &str) -> Result<Vec<SExpr>, ReadError> {
    let bytes = text.as_bytes();
    let mut pos = skip_blank(bytes, 0);
    let mut exprs = Vec::new();
    while pos < bytes.len() {
        exprs.push(parse_expr(text, &mut pos)?);
        pos = skip_blank(bytes, pos);
    }
    Ok(exprs)
}

/// Render `e` in the canonical single-space parenthesized form.
pub fn print(e: &SExpr) -> String {
    e.to_string()
}

fn skip_blank(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b';' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn is_atom_byte(b: u8) -> bool {
    !b.is_ascii_whitespace() && b != b'(' && b != b')' && b != b';'
}

fn parse_expr(text: &str, pos: &mut usize) -> Result<SExpr, ReadError> {
    let bytes = text.as_bytes();
    match bytes[*pos] {
        b'(' => {
            let open = *pos;
            *pos += 1;
            let mut items = Vec::new();
            loop {
                *pos = skip_blank(bytes, *pos);
                if *pos == bytes.len() {
                    return Err(ReadError::UnbalancedParens { offset: open });
                }
                if bytes[*pos] == b')' {
                    *pos += 1;
                    return Ok(SExpr::List(items));
                }
                items.push(parse_expr(text, pos)?);
            }
        }
        b')' => Err(ReadError::UnbalancedParens { offset: *pos }),
        b'"' | b'#' => Err(ReadError::TrailingGarbage { offset: *pos }),
        _ => {
            let start = *pos;
            while *pos < bytes.len() && is_atom_byte(bytes[*pos]) {
                *pos += 1;
            }
            let token = &text[start..*pos];
            Ok(classify_atom(token))
        }
    }
}

/// A token is an integer iff it is an optional sign followed by one or
/// more digits; every other atom is a symbol.
fn classify_atom(token: &str) -> SExpr {
    let digits = token.strip_prefix(['+', '-']).unwrap_or(token);
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        SExpr::Int(token.parse::<BigInt>().expect("checked digit form"))
    } else {
        SExpr::Symbol(token.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn roundtrip(e: &SExpr) {
        assert_eq!(&read(&print(e)).unwrap(), e);
    }

    #[test]
    fn reads_nested_program_form() {
        let got = read("(begin (set! rax 15))").unwrap();
        let want = SExpr::list(vec![
            SExpr::sym("begin"),
            SExpr::list(vec![SExpr::sym("set!"), SExpr::sym("rax"), SExpr::int(15)]),
        ]);
        assert_eq!(got, want);
        roundtrip(&want);
    }

    #[test]
    fn reads_empty_list() {
        assert_eq!(read("()").unwrap(), SExpr::list(vec![]));
    }

    #[test]
    fn reads_stack_address_form() {
        let got = read("(rbp - 8)").unwrap();
        let want = SExpr::list(vec![SExpr::sym("rbp"), SExpr::sym("-"), SExpr::int(8)]);
        assert_eq!(got, want);
    }

    #[test]
    fn prints_canonically() {
        let jump = SExpr::list(vec![SExpr::sym("jump"), SExpr::sym("done")]);
        assert_eq!(print(&jump), "(jump done)");
        assert_eq!(print(&SExpr::int(-1)), "-1");
        assert_eq!(print(&SExpr::list(vec![])), "()");
    }

    #[test]
    fn print_normalizes_whitespace_and_comments() {
        let e = read("( jump ; target\n  done )").unwrap();
        assert_eq!(print(&e), "(jump done)");
        roundtrip(&e);
    }

    #[test]
    fn integer_atom_classification() {
        assert_eq!(read("-5").unwrap(), SExpr::int(-5));
        assert_eq!(read("+7").unwrap(), SExpr::int(7));
        assert_eq!(read("-").unwrap(), SExpr::sym("-"));
        assert_eq!(read("+").unwrap(), SExpr::sym("+"));
        assert_eq!(read("5x").unwrap(), SExpr::sym("5x"));
        assert_eq!(read("set!").unwrap(), SExpr::sym("set!"));
    }

    #[test]
    fn integers_are_arbitrary_precision() {
        let big = "123456789012345678901234567890";
        let e = read(big).unwrap();
        assert_eq!(print(&e), big);
        assert!(e.as_int().is_some());
    }

    #[test]
    fn empty_input_names_offset() {
        assert_eq!(read(""), Err(ReadError::EmptyInput { offset: 0 }));
        assert_eq!(read("  ; only a comment"), Err(ReadError::EmptyInput { offset: 18 }));
    }

    #[test]
    fn unbalanced_parens_name_offset() {
        assert_eq!(read("(a"), Err(ReadError::UnbalancedParens { offset: 0 }));
        assert_eq!(read(")"), Err(ReadError::UnbalancedParens { offset: 0 }));
        assert_eq!(read(" (a (b)"), Err(ReadError::UnbalancedParens { offset: 1 }));
    }

    #[test]
    fn trailing_garbage_names_offset() {
        assert_eq!(read("a)"), Err(ReadError::TrailingGarbage { offset: 1 }));
        assert_eq!(read("a b"), Err(ReadError::TrailingGarbage { offset: 2 }));
        assert_eq!(read("(a)(b)"), Err(ReadError::TrailingGarbage { offset: 3 }));
    }

    #[test]
    fn foreign_literals_are_rejected() {
        assert_eq!(read("#t"), Err(ReadError::TrailingGarbage { offset: 0 }));
        assert_eq!(read("(x \"s\")"), Err(ReadError::TrailingGarbage { offset: 3 }));
    }
}
