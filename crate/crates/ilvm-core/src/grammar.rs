//! BNF grammars over s-expressions with a backtracking matcher:
//! literal atoms, nonterminal references, sequences with `...` repetition,
//! terminal classes (integer widths, registers, labels, abstract
//! locations, frame variables), and subscripted metavariables like
//! `reg_1` that must match the same subterm at every occurrence within
//! one alternative.
//!
//! Grammars load from a declarative text form, one s-expression per
//! production: `(nt alternative ...)`, first production's nonterminal is
//! the start symbol and production order is significant.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;

use crate::frames::{classify, SymClass};
use crate::ints::{in_range, Width};
use crate::sexpr::{read_many, ReadError, SExpr};

/// A terminal class: a predicate on a single atom, decided by symbol
/// classification plus integer width checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermClass {
    Int32,
    Int64,
    Int61,
    Reg,
    Label,
    Aloc,
    Fvar,
}

impl TermClass {
    /// All classes, by their pattern names.
    pub const ALL: [TermClass; 7] = [
        TermClass::Int32,
        TermClass::Int64,
        TermClass::Int61,
        TermClass::Reg,
        TermClass::Label,
        TermClass::Aloc,
        TermClass::Fvar,
    ];

    pub fn from_name(name: &str) -> Option<TermClass> {
        Some(match name {
            "int32" => TermClass::Int32,
            "int64" => TermClass::Int64,
            "int61" => TermClass::Int61,
            "reg" => TermClass::Reg,
            "label" => TermClass::Label,
            "aloc" => TermClass::Aloc,
            "fvar" => TermClass::Fvar,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TermClass::Int32 => "int32",
            TermClass::Int64 => "int64",
            TermClass::Int61 => "int61",
            TermClass::Reg => "reg",
            TermClass::Label => "label",
            TermClass::Aloc => "aloc",
            TermClass::Fvar => "fvar",
        }
    }

    /// Whether `e` is a member of the class.
    pub fn check(self, e: &SExpr) -> bool {
        match self {
            TermClass::Int32 => int_in_width(e, 32),
            TermClass::Int64 => int_in_width(e, 64),
            TermClass::Int61 => int_in_width(e, 61),
            TermClass::Reg => matches!(symbol_class(e), Some(SymClass::Register(_))),
            TermClass::Label => matches!(symbol_class(e), Some(SymClass::Label(_))),
            TermClass::Aloc => matches!(symbol_class(e), Some(SymClass::Aloc(_))),
            TermClass::Fvar => matches!(symbol_class(e), Some(SymClass::Fvar(_))),
        }
    }
}

impl fmt::Display for TermClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn int_in_width(e: &SExpr, bits: u32) -> bool {
    match e.as_int() {
        Some(n) => in_range(Width::new(bits).expect("width above 2"), n),
        None => false,
    }
}

/// A symbol out of the binder range (fv1620 and up) classifies as nothing.
fn symbol_class(e: &SExpr) -> Option<SymClass> {
    e.as_symbol().and_then(|s| classify(s).ok())
}

/// One pattern of a production alternative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    /// Matches exactly this symbol.
    LiteralSym(String),
    /// Matches exactly this integer.
    LiteralInt(BigInt),
    /// Matches anything derivable from the named nonterminal.
    Nonterminal(String),
    /// Matches any member of the terminal class.
    Class(TermClass),
    /// A subscripted metavariable like `reg_1`: matches its base pattern,
    /// and every occurrence of the same name within one alternative must
    /// match the same subterm.
    Subscripted { name: String, base: Box<Pattern> },
    /// A list whose elements match the items in order.
    Seq(Vec<SeqItem>),
}

/// An element of a sequence pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeqItem {
    /// Matches exactly one element.
    One(Pattern),
    /// A pattern followed by `...`: matches zero or more elements.
    Many(Pattern),
}

/// A malformed grammar or a query against a missing nonterminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrammarError {
    UnknownNonterminal(String),
    /// A production form the loader cannot accept.
    BadProduction(String),
    Read(ReadError),
}

impl fmt::Display for GrammarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarError::UnknownNonterminal(nt) => write!(f, "unknown nonterminal: {}", nt),
            GrammarError::BadProduction(msg) => write!(f, "bad production: {}", msg),
            GrammarError::Read(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for GrammarError {}

impl From<ReadError> for GrammarError {
    fn from(e: ReadError) -> Self {
        GrammarError::Read(e)
    }
}

/// An ordered set of productions; the first production's nonterminal is
/// the start symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    productions: Vec<(String, Vec<Pattern>)>,
}

impl Grammar {
    /// Load a grammar from its text form: one s-expression per
    /// production, `(nt alternative ...)`.
    pub fn from_text(text: &str) -> Result<Grammar, GrammarError> {
        let forms = read_many(text)?;
        if forms.is_empty() {
            return Err(GrammarError::BadProduction(String::from("no productions")));
        }
        // First pass: collect the nonterminal names so pattern symbols can
        // be resolved.
        let mut heads: Vec<String> = Vec::new();
        for form in &forms {
            let items = form.as_list().ok_or_else(|| {
                GrammarError::BadProduction(format!("expected (nt alternative ...) in: {}", form))
            })?;
            let head = items.first().and_then(SExpr::as_symbol).ok_or_else(|| {
                GrammarError::BadProduction(format!("expected a nonterminal head in: {}", form))
            })?;
            if TermClass::from_name(head).is_some() {
                return Err(GrammarError::BadProduction(format!(
                    "{} is a reserved terminal class",
                    head
                )));
            }
            if head == "..." {
                return Err(GrammarError::BadProduction(String::from(
                    "... cannot name a production",
                )));
            }
            if heads.iter().any(|h| h == head) {
                return Err(GrammarError::BadProduction(format!(
                    "duplicate production for {}",
                    head
                )));
            }
            if items.len() < 2 {
                return Err(GrammarError::BadProduction(format!(
                    "production {} has no alternatives",
                    head
                )));
            }
            heads.push(head.to_string());
        }
        let mut productions = Vec::new();
        for form in &forms {
            let items = form.as_list().expect("checked in the first pass");
            let head = items[0].as_symbol().expect("checked in the first pass");
            let alts = items[1..]
                .iter()
                .map(|alt| compile_pattern(alt, &heads))
                .collect::<Result<Vec<_>, _>>()?;
            productions.push((head.to_string(), alts));
        }
        Ok(Grammar { productions })
    }

    /// The start symbol: the first production's nonterminal.
    pub fn start(&self) -> &str {
        &self.productions[0].0
    }

    /// The nonterminal names, in production order.
    pub fn nonterminals(&self) -> impl Iterator<Item = &str> {
        self.productions.iter().map(|(nt, _)| nt.as_str())
    }

    fn alternatives(&self, nt: &str) -> Result<&[Pattern], GrammarError> {
        self.productions
            .iter()
            .find(|(name, _)| name == nt)
            .map(|(_, alts)| alts.as_slice())
            .ok_or_else(|| GrammarError::UnknownNonterminal(nt.to_string()))
    }

    /// Whether `e` derives from `nt`. Alternatives are tried in
    /// production order; each alternative opens a fresh metavariable
    /// scope.
    pub fn matches(&self, nt: &str, e: &SExpr) -> Result<bool, GrammarError> {
        for alt in self.alternatives(nt)? {
            let mut binds: Vec<(String, SExpr)> = Vec::new();
            if self.match_pattern(alt, e, &mut binds)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn match_pattern(
        &self,
        pat: &Pattern,
        e: &SExpr,
        binds: &mut Vec<(String, SExpr)>,
    ) -> Result<bool, GrammarError> {
        match pat {
            Pattern::LiteralSym(s) => Ok(e.is_symbol(s)),
            Pattern::LiteralInt(n) => Ok(e.as_int() == Some(n)),
            Pattern::Nonterminal(nt) => self.matches(nt, e),
            Pattern::Class(c) => Ok(c.check(e)),
            Pattern::Subscripted { name, base } => {
                if let Some((_, bound)) = binds.iter().find(|(n, _)| n == name) {
                    return Ok(bound == e);
                }
                if self.match_pattern(base, e, binds)? {
                    binds.push((name.clone(), e.clone()));
                    Ok(true)
                } else {
                    Ok(false)
                }
            }
            Pattern::Seq(items) => match e.as_list() {
                Some(es) => self.match_seq(items, es, binds),
                None => Ok(false),
            },
        }
    }

    fn match_seq(
        &self,
        items: &[SeqItem],
        es: &[SExpr],
        binds: &mut Vec<(String, SExpr)>,
    ) -> Result<bool, GrammarError> {
        let Some((item, rest)) = items.split_first() else {
            return Ok(es.is_empty());
        };
        match item {
            SeqItem::One(p) => {
                let Some((e0, etail)) = es.split_first() else {
                    return Ok(false);
                };
                let mark = binds.len();
                if self.match_pattern(p, e0, binds)? && self.match_seq(rest, etail, binds)? {
                    Ok(true)
                } else {
                    binds.truncate(mark);
                    Ok(false)
                }
            }
            SeqItem::Many(p) => {
                // Try every split point, leftmost-shortest first. Each
                // repetition opens its own metavariable scope: outer
                // bindings stay visible, bindings made inside one element
                // do not constrain its siblings.
                for k in 0..=es.len() {
                    let mark = binds.len();
                    let mut ok = true;
                    for e in &es[..k] {
                        if !self.match_pattern(p, e, binds)? {
                            ok = false;
                            break;
                        }
                        binds.truncate(mark);
                    }
                    if ok && self.match_seq(rest, &es[k..], binds)? {
                        return Ok(true);
                    }
                    binds.truncate(mark);
                }
                Ok(false)
            }
        }
    }
}

/// Split a subscripted metavariable: `reg_1` -> ("reg", "1").
fn split_subscript(sym: &str) -> Option<(&str, &str)> {
    let (prefix, digits) = sym.rsplit_once('_')?;
    if prefix.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((prefix, digits))
}

fn compile_symbol(sym: &str, nts: &[String]) -> Pattern {
    if let Some((prefix, _)) = split_subscript(sym) {
        if let Some(c) = TermClass::from_name(prefix) {
            return Pattern::Subscripted { name: sym.to_string(), base: Box::new(Pattern::Class(c)) };
        }
        if nts.iter().any(|h| h == prefix) {
            return Pattern::Subscripted {
                name: sym.to_string(),
                base: Box::new(Pattern::Nonterminal(prefix.to_string())),
            };
        }
    }
    if let Some(c) = TermClass::from_name(sym) {
        return Pattern::Class(c);
    }
    if nts.iter().any(|h| h == sym) {
        return Pattern::Nonterminal(sym.to_string());
    }
    Pattern::LiteralSym(sym.to_string())
}

fn compile_pattern(e: &SExpr, nts: &[String]) -> Result<Pattern, GrammarError> {
    match e {
        SExpr::Symbol(s) => {
            if s == "..." {
                return Err(GrammarError::BadProduction(String::from(
                    "... must follow a pattern inside a sequence",
                )));
            }
            Ok(compile_symbol(s, nts))
        }
        SExpr::Int(n) => Ok(Pattern::LiteralInt(n.clone())),
        SExpr::List(items) => {
            let mut seq = Vec::new();
            let mut i = 0;
            while i < items.len() {
                let pat = compile_pattern(&items[i], nts)?;
                if items.get(i + 1).map(|n| n.is_symbol("...")).unwrap_or(false) {
                    seq.push(SeqItem::Many(pat));
                    i += 2;
                } else {
                    seq.push(SeqItem::One(pat));
                    i += 1;
                }
            }
            Ok(Pattern::Seq(seq))
        }
    }
}
