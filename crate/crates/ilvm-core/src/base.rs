//! The base x64-subset language: effect sequences with the full `set!`
//! address-mode dispatch, label resolution with fall-through blocks,
//! compare/jump-if, and the `done` halt; plus the straight-line
//! environment-passing interpreter kept as a differential oracle.
//!
//! The executor here is the one shared machine backend: later language
//! levels (modules, abstract locations, frame variables, return points)
//! compose onto the same instruction set and run through the same loop,
//! so no feature's semantics exists twice.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;

use crate::closures::ProcCode;
use crate::ints::{Binop, OutOfRangeOperand, Width};
use crate::machine::{MValue, MachineState, Register, Relop, StateError};
use crate::sexpr::SExpr;

/// A readable/writable named location. Registers come from the base
/// language; frame variables and abstract-location cells are layered on
/// by the frames module and flow through the same executor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Loc {
    Reg(Register),
    /// Frame variable `fv<index>`; resolved against rbp and the
    /// frame-variable offset at every access.
    Fvar(u32),
    /// An abstract-location cell in the current run's cell bank.
    Cell { id: usize, name: String },
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Reg(r) => write!(f, "{}", r),
            Loc::Fvar(i) => write!(f, "fv{}", i),
            Loc::Cell { name, .. } => f.write_str(name),
        }
    }
}

/// A plain value source: literal, label, or location read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Triv {
    Int(i64),
    Label(String),
    Loc(Loc),
}

impl fmt::Display for Triv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Triv::Int(n) => write!(f, "{}", n),
            Triv::Label(l) => f.write_str(l),
            Triv::Loc(loc) => write!(f, "{}", loc),
        }
    }
}

/// The `+`/`-` of an address computation. Address arithmetic is exact and
/// bounds-checked, never wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddrOp {
    Add,
    Sub,
}

impl AddrOp {
    fn apply(self, base: i64, index: i64) -> i128 {
        match self {
            AddrOp::Add => base as i128 + index as i128,
            AddrOp::Sub => base as i128 - index as i128,
        }
    }
}

impl fmt::Display for AddrOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AddrOp::Add => "+",
            AddrOp::Sub => "-",
        })
    }
}

/// The index part of a memory address: literal or register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemIndex {
    Int(i64),
    Reg(Register),
}

impl fmt::Display for MemIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemIndex::Int(n) => write!(f, "{}", n),
            MemIndex::Reg(r) => write!(f, "{}", r),
        }
    }
}

/// The second operand of a binop form: literal, location, or address read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Opand {
    Int(i64),
    Loc(Loc),
    /// `(rbp - offset)`.
    StackRead { offset: i64 },
    /// `(base op index)` with a non-rbp base.
    MemRead { base: Register, op: AddrOp, index: MemIndex },
}

impl fmt::Display for Opand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Opand::Int(n) => write!(f, "{}", n),
            Opand::Loc(loc) => write!(f, "{}", loc),
            Opand::StackRead { offset } => write!(f, "(rbp - {})", offset),
            Opand::MemRead { base, op, index } => write!(f, "({} {} {})", base, op, index),
        }
    }
}

/// Where a jump goes: a literal label or a location holding one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JumpTarget {
    Label(String),
    Loc(Loc),
}

impl fmt::Display for JumpTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpTarget::Label(l) => f.write_str(l),
            JumpTarget::Loc(loc) => write!(f, "{}", loc),
        }
    }
}

/// One executable instruction after flattening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    /// `(set! loc triv)`.
    SetLoc { dst: Loc, src: Triv },
    /// `(set! loc (binop loc opand))`; the destination repeats as the
    /// first operand.
    SetLocBinop { dst: Loc, op: Binop, src: Opand },
    /// `(set! (rbp - offset) triv)`.
    SetStack { offset: i64, src: Triv },
    /// `(set! reg (rbp - offset))`.
    SetRegFromStack { dst: Register, offset: i64 },
    /// `(set! (base op index) triv)` with a non-rbp base.
    SetMem { base: Register, op: AddrOp, index: MemIndex, src: Triv },
    /// `(set! reg (base op index))` with a non-rbp base.
    SetRegFromMem { dst: Register, base: Register, op: AddrOp, index: MemIndex },
    /// `(set! rbp (binop rbp amount))`: updates the frame-variable offset
    /// and rbp together.
    RbpIncrement { op: Binop, amount: i64 },
    /// `(set! rbp triv)`: rbp alone, no offset correction.
    RbpDirectSet { src: Triv },
    /// `(jump trg)`.
    Jump { target: JumpTarget },
    /// `(compare reg opand)`.
    Compare { reg: Register, opand: Opand },
    /// `(jump-if relop label)`.
    JumpIf { relop: Relop, label: String },
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::SetLoc { dst, src } => write!(f, "(set! {} {})", dst, src),
            Instr::SetLocBinop { dst, op, src } => {
                write!(f, "(set! {} ({} {} {}))", dst, op, dst, src)
            }
            Instr::SetStack { offset, src } => write!(f, "(set! (rbp - {}) {})", offset, src),
            Instr::SetRegFromStack { dst, offset } => {
                write!(f, "(set! {} (rbp - {}))", dst, offset)
            }
            Instr::SetMem { base, op, index, src } => {
                write!(f, "(set! ({} {} {}) {})", base, op, index, src)
            }
            Instr::SetRegFromMem { dst, base, op, index } => {
                write!(f, "(set! {} ({} {} {}))", dst, base, op, index)
            }
            Instr::RbpIncrement { op, amount } => {
                write!(f, "(set! rbp ({} rbp {}))", op, amount)
            }
            Instr::RbpDirectSet { src } => write!(f, "(set! rbp {})", src),
            Instr::Jump { target } => write!(f, "(jump {})", target),
            Instr::Compare { reg, opand } => write!(f, "(compare {} {})", reg, opand),
            Instr::JumpIf { relop, label } => write!(f, "(jump-if {} {})", relop, label),
        }
    }
}

/// A parsed statement before flattening: instructions plus the grouping
/// and labeling forms label resolution erases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Instr(Instr),
    Begin(Vec<Stmt>),
    WithLabel(String, Box<Stmt>),
    /// `(return-point label tail)`: the label marks the continuation
    /// immediately after the form.
    ReturnPoint(String, Box<Stmt>),
}

/// Flattened code with its label table; entry is index 0. A label denotes
/// the suite from its index to the end of the sequence (fall-through).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTable {
    pub code: Vec<Instr>,
    pub labels: BTreeMap<String, usize>,
}

/// The reserved halt target; never a key in any label table.
pub const DONE_LABEL: &str = "done";

/// A malformed program form, reported with the offending subform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(message: String) -> ParseError {
        ParseError { message }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl core::error::Error for ParseError {}

/// A run-time fault inside the executor.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecError {
    /// Control transferred to a label the program never bound.
    UndefinedLabel(String),
    /// An instruction met a value of the wrong shape; carries the
    /// rendered instruction and the value.
    TypeError { instr: String, value: MValue },
    /// A stack/memory bounds fault or double halt.
    State(StateError),
    /// Control ran past the last instruction without halting.
    FellOffEnd,
    /// An abstract location was read before any write.
    UnassignedAlocRead(String),
    /// The arithmetic kernel rejected an operand; an engine bug.
    Arith(OutOfRangeOperand),
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::UndefinedLabel(l) => write!(f, "undefined label: {}", l),
            ExecError::TypeError { instr, value } => {
                write!(f, "type error in {}: unexpected value {}", instr, value)
            }
            ExecError::State(e) => write!(f, "{}", e),
            ExecError::FellOffEnd => {
                f.write_str("control fell off the end of the program without jumping to done")
            }
            ExecError::UnassignedAlocRead(a) => {
                write!(f, "abstract location {} read before assignment", a)
            }
            ExecError::Arith(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for ExecError {}

impl From<StateError> for ExecError {
    fn from(e: StateError) -> Self {
        ExecError::State(e)
    }
}

impl From<OutOfRangeOperand> for ExecError {
    fn from(e: OutOfRangeOperand) -> Self {
        ExecError::Arith(e)
    }
}

/// Everything that can go wrong taking a program from text shape to a
/// halted value.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseError {
    Parse(ParseError),
    /// A label bound twice (or a binding of the reserved `done`).
    DuplicateLabel(String),
    /// A program with no instructions at all.
    EmptyProgram,
    Exec(ExecError),
}

impl fmt::Display for BaseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseError::Parse(e) => write!(f, "{}", e),
            BaseError::DuplicateLabel(l) => write!(f, "duplicate label: {}", l),
            BaseError::EmptyProgram => f.write_str("empty program"),
            BaseError::Exec(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for BaseError {}

impl From<ParseError> for BaseError {
    fn from(e: ParseError) -> Self {
        BaseError::Parse(e)
    }
}

impl From<ExecError> for BaseError {
    fn from(e: ExecError) -> Self {
        BaseError::Exec(e)
    }
}

// ---------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------

/// How a symbol resolves in operand or target position.
pub(crate) enum SymKind {
    Loc(Loc),
    Label(String),
}

/// Symbol resolution and feature gating for one parsing scope. The base
/// language resolves registers and treats everything else as a label; the
/// frames module layers frame variables and abstract locations on top.
pub(crate) trait SymbolScope {
    /// Resolve a symbol in operand/target position.
    fn resolve(&mut self, sym: &str) -> Result<SymKind, ParseError>;

    /// Resolve a symbol on the left of `set!`.
    fn resolve_dest(&mut self, sym: &str, form: &SExpr) -> Result<Loc, ParseError>;

    /// Whether `return-point` and jump live-location lists are in the
    /// feature set.
    fn frames_features(&self) -> bool {
        false
    }
}

/// The base scope: registers are locations, every other symbol a label.
pub(crate) struct BaseScope;

impl SymbolScope for BaseScope {
    fn resolve(&mut self, sym: &str) -> Result<SymKind, ParseError> {
        Ok(match Register::from_name(sym) {
            Some(r) => SymKind::Loc(Loc::Reg(r)),
            None => SymKind::Label(sym.to_string()),
        })
    }

    fn resolve_dest(&mut self, sym: &str, form: &SExpr) -> Result<Loc, ParseError> {
        match Register::from_name(sym) {
            Some(r) => Ok(Loc::Reg(r)),
            None => Err(ParseError::new(format!(
                "set!: expected a register on the left in: {}",
                form
            ))),
        }
    }
}

fn int_literal(e: &SExpr, context: &str) -> Result<i64, ParseError> {
    let n = e
        .as_int()
        .ok_or_else(|| ParseError::new(format!("{}: expected an integer at: {}", context, e)))?;
    i64::try_from(n).map_err(|_| {
        ParseError::new(format!("{}: integer literal outside the machine word: {}", context, e))
    })
}

pub(crate) fn parse_triv(e: &SExpr, cx: &mut dyn SymbolScope) -> Result<Triv, ParseError> {
    match e {
        SExpr::Int(_) => Ok(Triv::Int(int_literal(e, "set!")?)),
        SExpr::Symbol(s) => Ok(match cx.resolve(s)? {
            SymKind::Loc(loc) => Triv::Loc(loc),
            SymKind::Label(l) => Triv::Label(l),
        }),
        SExpr::List(_) => Err(ParseError::new(format!("expected an atomic value in: {}", e))),
    }
}

/// An address form: `(rbp - int)` or `(base op index)` with non-rbp base.
enum Addr {
    Stack { offset: i64 },
    Mem { base: Register, op: AddrOp, index: MemIndex },
}

/// Parse the inside of an address form, mirroring the run-time checks the
/// source system performs on rbp displacements.
fn parse_addr(items: &[SExpr], form: &SExpr) -> Result<Addr, ParseError> {
    let [base_e, op_e, index_e] = items else {
        return Err(ParseError::new(format!("expected (base op index) in: {}", form)));
    };
    let base_sym = base_e
        .as_symbol()
        .ok_or_else(|| ParseError::new(format!("expected a register base at: {} in: {}", base_e, form)))?;
    let base = Register::from_name(base_sym)
        .ok_or_else(|| ParseError::new(format!("expected a register base at: {} in: {}", base_e, form)))?;
    let op_sym = op_e
        .as_symbol()
        .ok_or_else(|| ParseError::new(format!("expected + or - at: {} in: {}", op_e, form)))?;
    if base == Register::Rbp {
        if op_sym != "-" {
            return Err(ParseError::new(format!(
                "rbp: expected the literal symbol - at: {} in: {}",
                op_e, form
            )));
        }
        let offset = match index_e.as_int() {
            Some(_) => int_literal(index_e, "rbp")?,
            None => {
                return Err(ParseError::new(format!("rbp: expected integer at: {}", index_e)));
            }
        };
        if offset < 0 {
            return Err(ParseError::new(format!(
                "rbp: expected a nonnegative displacement at: {}",
                index_e
            )));
        }
        return Ok(Addr::Stack { offset });
    }
    let op = match op_sym {
        "+" => AddrOp::Add,
        "-" => AddrOp::Sub,
        _ => {
            return Err(ParseError::new(format!(
                "expected + or - at: {} in: {}",
                op_e, form
            )));
        }
    };
    let index = match index_e {
        SExpr::Int(_) => MemIndex::Int(int_literal(index_e, "address")?),
        SExpr::Symbol(s) => match Register::from_name(s) {
            Some(r) => MemIndex::Reg(r),
            None => {
                return Err(ParseError::new(format!(
                    "expected an integer or register index at: {} in: {}",
                    index_e, form
                )));
            }
        },
        SExpr::List(_) => {
            return Err(ParseError::new(format!(
                "expected an integer or register index at: {} in: {}",
                index_e, form
            )));
        }
    };
    Ok(Addr::Mem { base, op, index })
}

fn parse_opand(e: &SExpr, cx: &mut dyn SymbolScope, form: &SExpr) -> Result<Opand, ParseError> {
    match e {
        SExpr::Int(_) => Ok(Opand::Int(int_literal(e, "set!")?)),
        SExpr::Symbol(s) => match cx.resolve(s)? {
            SymKind::Loc(loc) => Ok(Opand::Loc(loc)),
            SymKind::Label(_) => Err(ParseError::new(format!(
                "expected an integer or location at: {} in: {}",
                e, form
            ))),
        },
        SExpr::List(items) => match parse_addr(items, e)? {
            Addr::Stack { offset } => Ok(Opand::StackRead { offset }),
            Addr::Mem { base, op, index } => Ok(Opand::MemRead { base, op, index }),
        },
    }
}

fn parse_set(items: &[SExpr], form: &SExpr, cx: &mut dyn SymbolScope) -> Result<Instr, ParseError> {
    let [_, lhs, rhs] = items else {
        return Err(ParseError::new(format!("set!: expected (set! place value) in: {}", form)));
    };
    match lhs {
        // Address store: (set! (rbp - o) v) or (set! (base op i) v).
        SExpr::List(addr_items) => {
            let src = parse_triv(rhs, cx)?;
            match parse_addr(addr_items, lhs)? {
                Addr::Stack { offset } => Ok(Instr::SetStack { offset, src }),
                Addr::Mem { base, op, index } => Ok(Instr::SetMem { base, op, index, src }),
            }
        }
        SExpr::Symbol(lhs_sym) => {
            let dst = cx.resolve_dest(lhs_sym, form)?;
            match rhs {
                SExpr::List(rhs_items) => {
                    // A binop form if the head is an operator, otherwise
                    // an address read.
                    if let Some(op) = rhs_items
                        .first()
                        .and_then(SExpr::as_symbol)
                        .and_then(Binop::from_name)
                    {
                        let [_, first, second] = rhs_items.as_slice() else {
                            return Err(ParseError::new(format!(
                                "set!: expected (binop place operand) in: {}",
                                form
                            )));
                        };
                        if first.as_symbol() != Some(lhs_sym) {
                            return Err(ParseError::new(format!(
                                "set!: the left-hand side must repeat as the first operand in: {}",
                                form
                            )));
                        }
                        if dst == Loc::Reg(Register::Rbp) {
                            // The increment form: both rbp and the
                            // frame-variable offset move by a literal.
                            let amount = int_literal(second, "rbp")?;
                            return Ok(Instr::RbpIncrement { op, amount });
                        }
                        let src = parse_opand(second, cx, form)?;
                        Ok(Instr::SetLocBinop { dst, op, src })
                    } else {
                        let Loc::Reg(dst_reg) = dst else {
                            return Err(ParseError::new(format!(
                                "set!: only a register may load an address form in: {}",
                                form
                            )));
                        };
                        match parse_addr(rhs_items, rhs)? {
                            Addr::Stack { offset } => {
                                Ok(Instr::SetRegFromStack { dst: dst_reg, offset })
                            }
                            Addr::Mem { base, op, index } => {
                                Ok(Instr::SetRegFromMem { dst: dst_reg, base, op, index })
                            }
                        }
                    }
                }
                _ => {
                    let src = parse_triv(rhs, cx)?;
                    if dst == Loc::Reg(Register::Rbp) {
                        Ok(Instr::RbpDirectSet { src })
                    } else {
                        Ok(Instr::SetLoc { dst, src })
                    }
                }
            }
        }
        SExpr::Int(_) => Err(ParseError::new(format!(
            "set!: cannot assign to an integer in: {}",
            form
        ))),
    }
}

fn parse_jump(items: &[SExpr], form: &SExpr, cx: &mut dyn SymbolScope) -> Result<Instr, ParseError> {
    let rest = &items[1..];
    if rest.is_empty() {
        return Err(ParseError::new(format!("jump: expected a target in: {}", form)));
    }
    if rest.len() > 1 && !cx.frames_features() {
        return Err(ParseError::new(format!("jump: expected (jump trg) in: {}", form)));
    }
    let target = match &rest[0] {
        SExpr::Symbol(s) => match cx.resolve(s)? {
            SymKind::Loc(loc) => JumpTarget::Loc(loc),
            SymKind::Label(l) => JumpTarget::Label(l),
        },
        other => {
            return Err(ParseError::new(format!(
                "jump: expected a label or location at: {} in: {}",
                other, form
            )));
        }
    };
    // Trailing live-location annotations: validated, never executed.
    for extra in &rest[1..] {
        let sym = extra.as_symbol().ok_or_else(|| {
            ParseError::new(format!("jump: expected a location at: {} in: {}", extra, form))
        })?;
        match cx.resolve(sym)? {
            SymKind::Loc(_) => {}
            SymKind::Label(_) => {
                return Err(ParseError::new(format!(
                    "jump: expected a location at: {} in: {}",
                    extra, form
                )));
            }
        }
    }
    Ok(Instr::Jump { target })
}

pub(crate) fn parse_stmt(e: &SExpr, cx: &mut dyn SymbolScope) -> Result<Stmt, ParseError> {
    let SExpr::List(items) = e else {
        return Err(ParseError::new(format!("expected an effect form in: {}", e)));
    };
    let head = items.first().and_then(SExpr::as_symbol);
    match head {
        Some("begin") => {
            let body = items[1..]
                .iter()
                .map(|s| parse_stmt(s, cx))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Stmt::Begin(body))
        }
        Some("with-label") => {
            let [_, label_e, inner_e] = items.as_slice() else {
                return Err(ParseError::new(format!(
                    "with-label: expected (with-label label effect) in: {}",
                    e
                )));
            };
            let label = label_symbol(label_e, cx, e)?;
            let inner = parse_stmt(inner_e, cx)?;
            Ok(Stmt::WithLabel(label, Box::new(inner)))
        }
        Some("return-point") if cx.frames_features() => {
            let [_, label_e, tail_e] = items.as_slice() else {
                return Err(ParseError::new(format!(
                    "return-point: expected (return-point label tail) in: {}",
                    e
                )));
            };
            let label = label_symbol(label_e, cx, e)?;
            let tail = parse_stmt(tail_e, cx)?;
            Ok(Stmt::ReturnPoint(label, Box::new(tail)))
        }
        Some("set!") => Ok(Stmt::Instr(parse_set(items, e, cx)?)),
        Some("jump") => Ok(Stmt::Instr(parse_jump(items, e, cx)?)),
        Some("compare") => {
            let [_, reg_e, opand_e] = items.as_slice() else {
                return Err(ParseError::new(format!(
                    "compare: expected (compare reg opand) in: {}",
                    e
                )));
            };
            let reg = reg_e
                .as_symbol()
                .and_then(Register::from_name)
                .ok_or_else(|| {
                    ParseError::new(format!("compare: expected a register at: {} in: {}", reg_e, e))
                })?;
            let opand = match opand_e {
                SExpr::Int(_) => Opand::Int(int_literal(opand_e, "compare")?),
                SExpr::Symbol(s) => match Register::from_name(s) {
                    Some(r) => Opand::Loc(Loc::Reg(r)),
                    None => {
                        return Err(ParseError::new(format!(
                            "compare: expected an integer or register at: {} in: {}",
                            opand_e, e
                        )));
                    }
                },
                SExpr::List(_) => {
                    return Err(ParseError::new(format!(
                        "compare: expected an integer or register at: {} in: {}",
                        opand_e, e
                    )));
                }
            };
            Ok(Stmt::Instr(Instr::Compare { reg, opand }))
        }
        Some("jump-if") => {
            let [_, relop_e, label_e] = items.as_slice() else {
                return Err(ParseError::new(format!(
                    "jump-if: expected (jump-if relop label) in: {}",
                    e
                )));
            };
            let relop = relop_e
                .as_symbol()
                .and_then(Relop::from_name)
                .ok_or_else(|| {
                    ParseError::new(format!("jump-if: expected a relop at: {} in: {}", relop_e, e))
                })?;
            let label = label_symbol(label_e, cx, e)?;
            Ok(Stmt::Instr(Instr::JumpIf { relop, label }))
        }
        _ => Err(ParseError::new(format!("expected an effect form in: {}", e))),
    }
}

fn label_symbol(e: &SExpr, cx: &mut dyn SymbolScope, form: &SExpr) -> Result<String, ParseError> {
    match e.as_symbol() {
        Some(s) => match cx.resolve(s)? {
            SymKind::Label(l) => Ok(l),
            SymKind::Loc(_) => Err(ParseError::new(format!(
                "expected a label at: {} in: {}",
                e, form
            ))),
        },
        None => Err(ParseError::new(format!("expected a label at: {} in: {}", e, form))),
    }
}

/// Parse a whole `(begin effect ...)` program in the base language.
pub fn parse_program(program: &SExpr) -> Result<Vec<Stmt>, ParseError> {
    parse_program_in(program, &mut BaseScope)
}

pub(crate) fn parse_program_in(
    program: &SExpr,
    cx: &mut dyn SymbolScope,
) -> Result<Vec<Stmt>, ParseError> {
    let items = program
        .as_list()
        .filter(|items| items.first().map(|h| h.is_symbol("begin")).unwrap_or(false))
        .ok_or_else(|| {
            ParseError::new(format!("program: expected (begin effect ...) in: {}", program))
        })?;
    items[1..].iter().map(|e| parse_stmt(e, cx)).collect()
}

// ---------------------------------------------------------------------
// Label resolution
// ---------------------------------------------------------------------

/// Splice statement trees into a flat instruction sequence, binding each
/// label to its fall-through position.
pub(crate) fn flatten(stmts: &[Stmt], table: &mut BlockTable) -> Result<(), BaseError> {
    for stmt in stmts {
        match stmt {
            Stmt::Instr(i) => table.code.push(i.clone()),
            Stmt::Begin(body) => flatten(body, table)?,
            Stmt::WithLabel(label, inner) => {
                bind_label(table, label, table.code.len())?;
                flatten(core::slice::from_ref(inner), table)?;
            }
            Stmt::ReturnPoint(label, tail) => {
                flatten(core::slice::from_ref(tail), table)?;
                bind_label(table, label, table.code.len())?;
            }
        }
    }
    Ok(())
}

pub(crate) fn bind_label(table: &mut BlockTable, label: &str, index: usize) -> Result<(), BaseError> {
    if label == DONE_LABEL || table.labels.contains_key(label) {
        return Err(BaseError::DuplicateLabel(label.to_string()));
    }
    table.labels.insert(label.to_string(), index);
    Ok(())
}

/// Parse and flatten a base-language program into its block table.
pub fn resolve_labels(program: &SExpr) -> Result<BlockTable, BaseError> {
    let stmts = parse_program(program)?;
    let mut table = BlockTable { code: Vec::new(), labels: BTreeMap::new() };
    flatten(&stmts, &mut table)?;
    if table.code.is_empty() {
        return Err(BaseError::EmptyProgram);
    }
    Ok(table)
}

// ---------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------

/// Observer called after each executed instruction with its index, the
/// instruction, and the machine state it produced.
pub type TraceFn<'t> = dyn FnMut(usize, &Instr, &MachineState) + 't;

enum Next {
    Advance,
    Goto(usize),
    Halt,
}

struct Run<'a> {
    table: &'a BlockTable,
    state: &'a mut MachineState,
    cells: &'a mut [Option<MValue>],
}

impl Run<'_> {
    fn type_error(&self, instr: &Instr, value: MValue) -> ExecError {
        ExecError::TypeError { instr: instr.to_string(), value }
    }

    fn int_of(&self, v: MValue, instr: &Instr) -> Result<i64, ExecError> {
        v.as_int().ok_or_else(|| self.type_error(instr, v))
    }

    fn load_loc(&mut self, loc: &Loc) -> Result<MValue, ExecError> {
        match loc {
            Loc::Reg(r) => Ok(self.state.reg_get(*r)),
            Loc::Fvar(i) => {
                let idx = crate::frames::fvar_index(self.state, *i)?;
                Ok(self.state.stack_get(idx)?)
            }
            Loc::Cell { id, name } => self.cells[*id]
                .clone()
                .ok_or_else(|| ExecError::UnassignedAlocRead(name.clone())),
        }
    }

    fn store_loc(&mut self, loc: &Loc, v: MValue) -> Result<(), ExecError> {
        match loc {
            Loc::Reg(r) => {
                self.state.reg_set(*r, v);
                Ok(())
            }
            Loc::Fvar(i) => {
                let idx = crate::frames::fvar_index(self.state, *i)?;
                Ok(self.state.stack_set(idx, v)?)
            }
            Loc::Cell { id, .. } => {
                self.cells[*id] = Some(v);
                Ok(())
            }
        }
    }

    fn eval_triv(&mut self, t: &Triv) -> Result<MValue, ExecError> {
        match t {
            Triv::Int(n) => Ok(MValue::Int(*n)),
            Triv::Label(l) => Ok(MValue::Label(l.clone())),
            Triv::Loc(loc) => self.load_loc(loc),
        }
    }

    fn eval_opand(&mut self, o: &Opand, instr: &Instr) -> Result<MValue, ExecError> {
        match o {
            Opand::Int(n) => Ok(MValue::Int(*n)),
            Opand::Loc(loc) => self.load_loc(loc),
            Opand::StackRead { offset } => {
                let idx = self.stack_slot_index(*offset, instr)?;
                Ok(self.state.stack_get(idx)?)
            }
            Opand::MemRead { base, op, index } => {
                let idx = self.mem_index(*base, *op, index, instr)?;
                Ok(self.state.mem_get(idx)?)
            }
        }
    }

    /// `(rbp - offset)` addressing: the current rbp minus a literal.
    fn stack_slot_index(&self, offset: i64, instr: &Instr) -> Result<i64, ExecError> {
        let rbp = self.state.reg_get(Register::Rbp);
        let rbp = self.int_of(rbp, instr)?;
        clamp_stack_index(rbp as i128 - offset as i128)
    }

    fn mem_index(
        &mut self,
        base: Register,
        op: AddrOp,
        index: &MemIndex,
        instr: &Instr,
    ) -> Result<i64, ExecError> {
        let b = self.int_of(self.state.reg_get(base), instr)?;
        let i = match index {
            MemIndex::Int(n) => *n,
            MemIndex::Reg(r) => self.int_of(self.state.reg_get(*r), instr)?,
        };
        let idx = op.apply(b, i);
        i64::try_from(idx).map_err(|_| {
            ExecError::State(StateError::MemIndexOutOfBounds(if idx < 0 {
                i64::MIN
            } else {
                i64::MAX
            }))
        })
    }

    fn transfer(&mut self, label: &str) -> Result<Next, ExecError> {
        if label == DONE_LABEL {
            let result = self.state.reg_get(Register::Rax);
            self.state.halt(result)?;
            return Ok(Next::Halt);
        }
        match self.table.labels.get(label) {
            Some(idx) => Ok(Next::Goto(*idx)),
            None => Err(ExecError::UndefinedLabel(label.to_string())),
        }
    }

    fn step(&mut self, instr: &Instr) -> Result<Next, ExecError> {
        match instr {
            Instr::SetLoc { dst, src } => {
                let v = self.eval_triv(src)?;
                self.store_loc(dst, v)?;
                Ok(Next::Advance)
            }
            Instr::SetLocBinop { dst, op, src } => {
                let a = self.load_loc(dst)?;
                let a = self.int_of(a, instr)?;
                let b = self.eval_opand(src, instr)?;
                let b = self.int_of(b, instr)?;
                let r = op.apply_i64(Width::W64, a, b)?;
                self.store_loc(dst, MValue::Int(r))?;
                Ok(Next::Advance)
            }
            Instr::SetStack { offset, src } => {
                let idx = self.stack_slot_index(*offset, instr)?;
                let v = self.eval_triv(src)?;
                self.state.stack_set(idx, v)?;
                Ok(Next::Advance)
            }
            Instr::SetRegFromStack { dst, offset } => {
                let idx = self.stack_slot_index(*offset, instr)?;
                let v = self.state.stack_get(idx)?;
                self.state.reg_set(*dst, v);
                Ok(Next::Advance)
            }
            Instr::SetMem { base, op, index, src } => {
                let idx = self.mem_index(*base, *op, index, instr)?;
                let v = self.eval_triv(src)?;
                self.state.mem_set(idx, v)?;
                Ok(Next::Advance)
            }
            Instr::SetRegFromMem { dst, base, op, index } => {
                let idx = self.mem_index(*base, *op, index, instr)?;
                let v = self.state.mem_get(idx)?;
                self.state.reg_set(*dst, v);
                Ok(Next::Advance)
            }
            Instr::RbpIncrement { op, amount } => {
                let offset = op.apply_i64(Width::W64, self.state.fvar_offset(), *amount)?;
                let rbp = self.int_of(self.state.reg_get(Register::Rbp), instr)?;
                let rbp = op.apply_i64(Width::W64, rbp, *amount)?;
                self.state.set_fvar_offset(offset);
                self.state.reg_set(Register::Rbp, MValue::Int(rbp));
                Ok(Next::Advance)
            }
            Instr::RbpDirectSet { src } => {
                let v = self.eval_triv(src)?;
                self.state.reg_set(Register::Rbp, v);
                Ok(Next::Advance)
            }
            Instr::Jump { target } => {
                let label = match target {
                    JumpTarget::Label(l) => l.clone(),
                    JumpTarget::Loc(loc) => match self.load_loc(loc)? {
                        MValue::Label(l) => l,
                        MValue::Proc(handle) => {
                            let code = handle.borrow().code().clone();
                            match code {
                                ProcCode::Label(l) => l,
                                _ => {
                                    return Err(
                                        self.type_error(instr, MValue::Proc(handle.clone()))
                                    );
                                }
                            }
                        }
                        other => return Err(self.type_error(instr, other)),
                    },
                };
                self.transfer(&label)
            }
            Instr::Compare { reg, opand } => {
                let v1 = self.int_of(self.state.reg_get(*reg), instr)?;
                let v2 = self.eval_opand(opand, instr)?;
                let v2 = self.int_of(v2, instr)?;
                self.state.flags_update(v1, v2);
                Ok(Next::Advance)
            }
            Instr::JumpIf { relop, label } => {
                if self.state.flag(*relop) {
                    self.transfer(label)
                } else {
                    Ok(Next::Advance)
                }
            }
        }
    }
}

fn clamp_stack_index(idx: i128) -> Result<i64, ExecError> {
    i64::try_from(idx).map_err(|_| {
        ExecError::State(StateError::StackIndexOutOfBounds(if idx < 0 {
            i64::MIN
        } else {
            i64::MAX
        }))
    })
}

/// Run flattened code from entry until `done` fires; returns the halted
/// value. `cells` is the abstract-location bank (empty for base
/// programs); `trace` observes each executed instruction.
pub fn run(
    table: &BlockTable,
    state: &mut MachineState,
    cells: &mut [Option<MValue>],
    mut trace: Option<&mut TraceFn<'_>>,
) -> Result<MValue, ExecError> {
    let mut pc = 0usize;
    loop {
        let Some(instr) = table.code.get(pc) else {
            return Err(ExecError::FellOffEnd);
        };
        let mut run = Run { table, state, cells };
        let next = run.step(instr)?;
        if let Some(t) = trace.as_deref_mut() {
            t(pc, instr, state);
        }
        match next {
            Next::Advance => pc += 1,
            Next::Goto(i) => pc = i,
            Next::Halt => {
                let result = state.halted().cloned().expect("halt latched");
                return Ok(result);
            }
        }
    }
}

/// Parse, resolve, and run a base-language program on `state`.
pub fn exec(program: &SExpr, state: &mut MachineState) -> Result<MValue, BaseError> {
    exec_traced(program, state, None)
}

/// `exec` with an instruction-level trace observer.
pub fn exec_traced(
    program: &SExpr,
    state: &mut MachineState,
    trace: Option<&mut TraceFn<'_>>,
) -> Result<MValue, BaseError> {
    let table = resolve_labels(program)?;
    Ok(run(&table, state, &mut [], trace)?)
}

// ---------------------------------------------------------------------
// The straight-line oracle
// ---------------------------------------------------------------------

/// A fault in the straight-line reference interpreter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// A register read before any write (the dictionary-lookup failure).
    UnboundRegister(String),
    /// A form outside the straight-line register language.
    Malformed(String),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::UnboundRegister(r) => write!(f, "unbound register: {}", r),
            OracleError::Malformed(form) => write!(f, "malformed straight-line effect: {}", form),
        }
    }
}

impl core::error::Error for OracleError {}

/// The environment-passing reference interpreter for the straight-line
/// register language: `(begin (set! reg value-or-binop) ...)`, no labels,
/// jumps, memory, or compare. Folds an environment register -> integer
/// over the effects and returns env\[rax\]. Arithmetic is exact, so this
/// is an independent oracle for the wrapping executor.
pub fn oracle_interp_v1(program: &SExpr) -> Result<BigInt, OracleError> {
    let malformed = |e: &SExpr| OracleError::Malformed(e.to_string());
    let items = program
        .as_list()
        .filter(|items| items.first().map(|h| h.is_symbol("begin")).unwrap_or(false))
        .ok_or_else(|| malformed(program))?;
    let mut env: BTreeMap<Register, BigInt> = BTreeMap::new();
    let lookup = |env: &BTreeMap<Register, BigInt>, r: Register| {
        env.get(&r)
            .cloned()
            .ok_or_else(|| OracleError::UnboundRegister(r.name().to_string()))
    };
    let opand_value = |env: &BTreeMap<Register, BigInt>, e: &SExpr| match e {
        SExpr::Int(n) => Ok(n.clone()),
        SExpr::Symbol(s) => match Register::from_name(s) {
            Some(r) => lookup(env, r),
            None => Err(malformed(e)),
        },
        SExpr::List(_) => Err(malformed(e)),
    };
    for effect in &items[1..] {
        let parts = effect.as_list().ok_or_else(|| malformed(effect))?;
        let [set, lhs, rhs] = parts else {
            return Err(malformed(effect));
        };
        if !set.is_symbol("set!") {
            return Err(malformed(effect));
        }
        let dst = lhs
            .as_symbol()
            .and_then(Register::from_name)
            .ok_or_else(|| malformed(effect))?;
        let value = match rhs {
            SExpr::List(rhs_items) => {
                let [op_e, first, second] = rhs_items.as_slice() else {
                    return Err(malformed(effect));
                };
                let op = op_e
                    .as_symbol()
                    .and_then(Binop::from_name)
                    .ok_or_else(|| malformed(effect))?;
                if first.as_symbol() != lhs.as_symbol() {
                    return Err(malformed(effect));
                }
                let a = lookup(&env, dst)?;
                let b = opand_value(&env, second)?;
                op.apply_exact(&a, &b)
            }
            _ => opand_value(&env, rhs)?,
        };
        env.insert(dst, value);
    }
    lookup(&env, Register::Rax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::read;
    use alloc::vec;

    fn run_text(text: &str) -> Result<MValue, BaseError> {
        let mut state = MachineState::fresh_state();
        exec(&read(text).unwrap(), &mut state)
    }

    fn run_text_with_state(text: &str) -> (Result<MValue, BaseError>, MachineState) {
        let mut state = MachineState::fresh_state();
        let result = exec(&read(text).unwrap(), &mut state);
        (result, state)
    }

    const FACT_5: &str = "(begin (set! r15 5)
                                 (set! r14 1)
                                 (with-label fact (compare r15 0))
                                 (jump-if = end)
                                 (set! r14 (* r14 r15))
                                 (set! r15 (+ r15 -1))
                                 (jump fact)
                                 (with-label end (set! rax r14))
                                 (jump done))";

    #[test]
    fn halting_with_a_value() {
        assert_eq!(run_text("(begin (set! rax 15) (jump done))").unwrap(), MValue::Int(15));
    }

    #[test]
    fn halting_through_the_return_address_register() {
        assert_eq!(run_text("(begin (set! rax 15) (jump r15))").unwrap(), MValue::Int(15));
    }

    #[test]
    fn halting_with_void_rax() {
        assert_eq!(run_text("(begin (jump done))").unwrap(), MValue::Void);
    }

    #[test]
    fn factorial_loops_through_labels() {
        assert_eq!(run_text(FACT_5).unwrap(), MValue::Int(120));
        assert_eq!(
            run_text(&FACT_5.replacen("(set! r15 5)", "(set! r15 6)", 1)).unwrap(),
            MValue::Int(720)
        );
    }

    #[test]
    fn factorial_label_table() {
        let table = resolve_labels(&read(FACT_5).unwrap()).unwrap();
        assert_eq!(table.labels.get("fact"), Some(&2));
        assert_eq!(table.labels.get("end"), Some(&7));
        assert_eq!(table.code[2].to_string(), "(compare r15 0)");
        assert_eq!(table.code[7].to_string(), "(set! rax r14)");
    }

    #[test]
    fn single_effect_program_resolves() {
        let table = resolve_labels(&read("(begin (set! rax 15))").unwrap()).unwrap();
        assert!(table.labels.is_empty());
        assert_eq!(table.code.len(), 1);
    }

    #[test]
    fn nested_begins_splice_in_order() {
        let table = resolve_labels(
            &read("(begin (begin (set! rax 1) (set! rax 2)) (jump done))").unwrap(),
        )
        .unwrap();
        assert_eq!(table.code.len(), 3);
        assert_eq!(table.code[0].to_string(), "(set! rax 1)");
        assert_eq!(table.code[1].to_string(), "(set! rax 2)");
        assert_eq!(table.code[2].to_string(), "(jump done)");
    }

    #[test]
    fn empty_program_is_an_error() {
        assert_eq!(resolve_labels(&read("(begin)").unwrap()), Err(BaseError::EmptyProgram));
        assert_eq!(
            resolve_labels(&read("(begin (begin))").unwrap()),
            Err(BaseError::EmptyProgram)
        );
    }

    #[test]
    fn duplicate_labels_are_errors() {
        let program = read(
            "(begin (with-label l (set! rax 1)) (with-label l (set! rax 2)) (jump done))",
        )
        .unwrap();
        assert_eq!(
            resolve_labels(&program),
            Err(BaseError::DuplicateLabel(String::from("l")))
        );
    }

    #[test]
    fn done_is_reserved() {
        let program = read("(begin (with-label done (set! rax 1)) (jump done))").unwrap();
        assert_eq!(
            resolve_labels(&program),
            Err(BaseError::DuplicateLabel(String::from("done")))
        );
    }

    #[test]
    fn stack_slot_write_then_read() {
        let (result, state) =
            run_text_with_state("(begin (set! (rbp - 0) 5) (set! rax (rbp - 0)) (jump done))");
        assert_eq!(result.unwrap(), MValue::Int(5));
        assert_eq!(state.stack_get(12959).unwrap(), MValue::Int(5));
    }

    #[test]
    fn fresh_stack_slot_reads_uninit() {
        assert_eq!(
            run_text("(begin (set! rax (rbp - 0)) (jump done))").unwrap(),
            MValue::Uninit
        );
    }

    #[test]
    fn rbp_address_forms_must_subtract_a_literal() {
        let plus = exec(
            &read("(begin (set! rax (rbp + 0)) (jump done))").unwrap(),
            &mut MachineState::fresh_state(),
        );
        match plus {
            Err(BaseError::Parse(e)) => {
                assert_eq!(e.message, "rbp: expected the literal symbol - at: + in: (rbp + 0)");
            }
            other => panic!("expected a parse error, got {:?}", other),
        }
        let reg_offset = exec(
            &read("(begin (set! rax (rbp - rax)) (jump done))").unwrap(),
            &mut MachineState::fresh_state(),
        );
        match reg_offset {
            Err(BaseError::Parse(e)) => {
                assert_eq!(e.message, "rbp: expected integer at: rax");
            }
            other => panic!("expected a parse error, got {:?}", other),
        }
    }

    #[test]
    fn heap_write_then_read_through_r12() {
        let (result, state) =
            run_text_with_state("(begin (set! (r12 + 0) 5) (set! rax (r12 + 0)) (jump done))");
        assert_eq!(result.unwrap(), MValue::Int(5));
        assert_eq!(state.mem_get(0).unwrap(), MValue::Int(5));
    }

    #[test]
    fn heap_addressing_with_register_index() {
        let (result, state) = run_text_with_state(
            "(begin (set! rbx 3) (set! (r12 + rbx) 7) (set! rax (r12 + rbx)) (jump done))",
        );
        assert_eq!(result.unwrap(), MValue::Int(7));
        assert_eq!(state.mem_get(3).unwrap(), MValue::Int(7));
    }

    #[test]
    fn binop_reads_address_operands() {
        let result = run_text(
            "(begin (set! (rbp - 8) 40) (set! rax 2) (set! rax (+ rax (rbp - 8))) (jump done))",
        );
        assert_eq!(result.unwrap(), MValue::Int(42));
    }

    #[test]
    fn binop_operands_must_repeat_the_destination() {
        let result = run_text("(begin (set! rax (+ rbx 1)) (jump done))");
        assert!(matches!(result, Err(BaseError::Parse(_))));
    }

    #[test]
    fn machine_arithmetic_wraps_at_word_width() {
        assert_eq!(
            run_text("(begin (set! rax 9223372036854775807) (set! rax (+ rax 0)) (jump done))")
                .unwrap(),
            MValue::Int(9223372036854775807)
        );
        assert_eq!(
            run_text("(begin (set! rax 9223372036854775807) (set! rax (+ rax 1)) (jump done))")
                .unwrap(),
            MValue::Int(-9223372036854775808)
        );
    }

    #[test]
    fn arithmetic_on_void_is_a_type_error() {
        let result = run_text("(begin (set! rax (+ rax 1)) (jump done))");
        match result {
            Err(BaseError::Exec(ExecError::TypeError { instr, value })) => {
                assert_eq!(instr, "(set! rax (+ rax 1))");
                assert_eq!(value, MValue::Void);
            }
            other => panic!("expected a type error, got {:?}", other),
        }
    }

    #[test]
    fn falling_off_the_end_is_an_error() {
        assert_eq!(
            run_text("(begin (set! rax 1))"),
            Err(BaseError::Exec(ExecError::FellOffEnd))
        );
    }

    #[test]
    fn jumping_to_an_unbound_label_is_an_error() {
        assert_eq!(
            run_text("(begin (jump nowhere))"),
            Err(BaseError::Exec(ExecError::UndefinedLabel(String::from("nowhere"))))
        );
    }

    #[test]
    fn jumping_through_a_non_label_is_a_type_error() {
        let result = run_text("(begin (set! rbx 3) (jump rbx))");
        assert!(matches!(
            result,
            Err(BaseError::Exec(ExecError::TypeError { .. }))
        ));
    }

    #[test]
    fn compare_and_conditional_jump() {
        let result = run_text(
            "(begin (set! rax 1)
                    (compare rax 0)
                    (jump-if > end)
                    (set! rax 99)
                    (with-label end (jump done)))",
        );
        assert_eq!(result.unwrap(), MValue::Int(1));
        let not_taken = run_text(
            "(begin (set! rax 1)
                    (compare rax 5)
                    (jump-if > end)
                    (set! rax 99)
                    (with-label end (jump done)))",
        );
        assert_eq!(not_taken.unwrap(), MValue::Int(99));
    }

    #[test]
    fn label_values_flow_through_registers() {
        let result = run_text(
            "(begin (set! rbx end)
                    (jump rbx)
                    (set! rax 99)
                    (with-label end (set! rax 7))
                    (jump done))",
        );
        assert_eq!(result.unwrap(), MValue::Int(7));
    }

    #[test]
    fn rbp_increments_couple_to_the_fvar_offset() {
        let (result, state) = run_text_with_state(
            "(begin (set! rbp (- rbp 16)) (set! rax rbp) (jump done))",
        );
        assert_eq!(result.unwrap(), MValue::Int(12943));
        assert_eq!(state.fvar_offset(), -16);
        let rbp = state.reg_get(Register::Rbp).as_int().unwrap();
        assert_eq!(rbp - state.fvar_offset(), 12959);
    }

    #[test]
    fn rbp_direct_set_leaves_the_offset() {
        let (_, state) = run_text_with_state("(begin (set! rbp 100) (jump done))");
        assert_eq!(state.reg_get(Register::Rbp), MValue::Int(100));
        assert_eq!(state.fvar_offset(), 0);
    }

    #[test]
    fn rbp_increment_amount_must_be_a_literal() {
        let result = run_text("(begin (set! rbp (- rbp rax)) (jump done))");
        assert!(matches!(result, Err(BaseError::Parse(_))));
    }

    #[test]
    fn stack_bounds_fault_on_wild_offset() {
        let result = run_text("(begin (set! (rbp - 13000) 1) (jump done))");
        assert_eq!(
            result,
            Err(BaseError::Exec(ExecError::State(StateError::StackIndexOutOfBounds(-41))))
        );
    }

    #[test]
    fn trace_reports_each_executed_instruction() {
        let mut state = MachineState::fresh_state();
        let mut seen: Vec<(usize, String, MValue)> = Vec::new();
        let program = read("(begin (set! rax 1) (set! rax (+ rax 2)) (jump done))").unwrap();
        let mut observer = |idx: usize, instr: &Instr, s: &MachineState| {
            seen.push((idx, instr.to_string(), s.reg_get(Register::Rax)));
        };
        exec_traced(&program, &mut state, Some(&mut observer)).unwrap();
        assert_eq!(
            seen,
            vec![
                (0, String::from("(set! rax 1)"), MValue::Int(1)),
                (1, String::from("(set! rax (+ rax 2))"), MValue::Int(3)),
                (2, String::from("(jump done)"), MValue::Int(3)),
            ]
        );
    }

    #[test]
    fn oracle_folds_an_environment() {
        assert_eq!(
            oracle_interp_v1(&read("(begin (set! rax 15))").unwrap()).unwrap(),
            BigInt::from(15)
        );
        assert_eq!(
            oracle_interp_v1(
                &read("(begin (set! rbx 2) (set! rax 3) (set! rax (* rax rbx)))").unwrap()
            )
            .unwrap(),
            BigInt::from(6)
        );
    }

    #[test]
    fn oracle_rejects_reads_before_writes() {
        assert_eq!(
            oracle_interp_v1(&read("(begin (set! rax rbx))").unwrap()),
            Err(OracleError::UnboundRegister(String::from("rbx")))
        );
        assert_eq!(
            oracle_interp_v1(&read("(begin (set! rbx 1))").unwrap()),
            Err(OracleError::UnboundRegister(String::from("rax")))
        );
    }

    #[test]
    fn oracle_is_exact_while_the_executor_wraps() {
        let program = read(
            "(begin (set! rax 9223372036854775807) (set! rax (+ rax 1)))",
        )
        .unwrap();
        let exact = oracle_interp_v1(&program).unwrap();
        assert_eq!(exact, BigInt::from(9223372036854775807i64) + 1);
        let wrapped = crate::ints::wrap(Width::W64, &exact);
        assert_eq!(wrapped, BigInt::from(-9223372036854775808i64));
    }

    #[test]
    fn label_transparency_for_unused_labels() {
        let plain = run_text("(begin (set! rax 3) (set! rax (+ rax 4)) (jump done))").unwrap();
        let labeled = run_text(
            "(begin (set! rax 3) (with-label fresh (set! rax (+ rax 4))) (jump done))",
        )
        .unwrap();
        assert_eq!(plain, labeled);
    }
}
