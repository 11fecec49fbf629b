//! Named language definitions: a grammar, a feature-composed interpreter
//! backend, and a result class, plus the checked-run wrapper that
//! separates invalid programs, runtime faults, and wrong-class results.
//! Includes the 61-bit surface evaluator built on the procedure records.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;

use crate::base::{self, BaseError, OracleError, TraceFn};
use crate::closures::{self, CallOutcome, ClosureError, ProcCode};
use crate::frames::{self, FramesError};
use crate::grammar::{Grammar, GrammarError, TermClass};
use crate::ints::{in_range, wrap, Binop, Width};
use crate::machine::{MValue, MachineState};
use crate::sexpr::SExpr;

/// A fault below the grammar level: the program parsed or ran into an
/// error inside its interpreter.
#[derive(Debug, Clone, PartialEq)]
pub enum RuntimeFault {
    Base(BaseError),
    Frames(FramesError),
    Oracle(OracleError),
    V7(V7Error),
    /// An exact result too wide for the 64-bit machine word.
    WordOverflow(BigInt),
    /// A grammar engine failure during checking; not reachable for the
    /// built-in languages.
    Grammar(GrammarError),
}

impl fmt::Display for RuntimeFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeFault::Base(e) => write!(f, "{}", e),
            RuntimeFault::Frames(e) => write!(f, "{}", e),
            RuntimeFault::Oracle(e) => write!(f, "{}", e),
            RuntimeFault::V7(e) => write!(f, "{}", e),
            RuntimeFault::WordOverflow(n) => {
                write!(f, "result exceeds the 64-bit machine word: {}", n)
            }
            RuntimeFault::Grammar(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for RuntimeFault {}

/// The checked-run taxonomy: exactly one of these explains a non-value.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// The program does not derive from the grammar's start nonterminal.
    InvalidProgram { nonterminal: String, term: String },
    RuntimeFault(RuntimeFault),
    /// The program ran to a value outside the language's result class.
    BadResult { expected: TermClass, value: MValue },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::InvalidProgram { nonterminal, term } => {
                write!(f, "invalid program (not a {} term): {}", nonterminal, term)
            }
            RunError::RuntimeFault(e) => write!(f, "{}", e),
            RunError::BadResult { expected, value } => {
                write!(f, "result is not {}: {}", expected, value)
            }
        }
    }
}

impl core::error::Error for RunError {}

/// Which feature composition runs the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// The exact environment-folding interpreter for straight-line
    /// register programs.
    OracleEnvFold,
    /// The machine executor over `(begin effect ...)` programs.
    MachineExec,
    /// The machine executor over `(module ...)` programs.
    ModuleExec,
    /// The 61-bit tagged-surface evaluator.
    TaggedEval,
}

impl Backend {
    /// Whether runs of this backend drive the shared machine state.
    pub fn machine_backed(self) -> bool {
        matches!(self, Backend::MachineExec | Backend::ModuleExec)
    }
}

/// A named language: grammar for validity, backend for meaning, and the
/// class its results must inhabit.
#[derive(Debug, Clone)]
pub struct LanguageDef {
    name: String,
    grammar: Grammar,
    backend: Backend,
    result_check: TermClass,
}

impl LanguageDef {
    pub fn new(name: &str, grammar: Grammar, backend: Backend, result_check: TermClass) -> Self {
        LanguageDef { name: name.to_string(), grammar, backend, result_check }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn result_check(&self) -> TermClass {
        self.result_check
    }

    /// Whether the program derives from the grammar's start symbol.
    pub fn validates(&self, program: &SExpr) -> Result<bool, GrammarError> {
        self.grammar.matches(self.grammar.start(), program)
    }

    /// Run the unchecked interpreter on a fresh machine.
    pub fn interp(&self, program: &SExpr) -> Result<MValue, RuntimeFault> {
        self.interp_on(program, &mut MachineState::fresh_state(), None)
    }

    /// Run the unchecked interpreter on `state` with an optional
    /// instruction trace (machine-backed languages only drive both).
    pub fn interp_on(
        &self,
        program: &SExpr,
        state: &mut MachineState,
        trace: Option<&mut TraceFn<'_>>,
    ) -> Result<MValue, RuntimeFault> {
        match self.backend {
            Backend::OracleEnvFold => {
                let n = base::oracle_interp_v1(program).map_err(RuntimeFault::Oracle)?;
                match i64::try_from(&n) {
                    Ok(v) => Ok(MValue::Int(v)),
                    Err(_) => Err(RuntimeFault::WordOverflow(n)),
                }
            }
            Backend::MachineExec => {
                base::exec_traced(program, state, trace).map_err(RuntimeFault::Base)
            }
            Backend::ModuleExec => {
                frames::exec_module(program, state, trace).map_err(RuntimeFault::Frames)
            }
            Backend::TaggedEval => interp_v7(program).map_err(RuntimeFault::V7),
        }
    }

    /// The checked wrapper: grammar first, then the interpreter, then the
    /// result class. Produces exactly one of value, InvalidProgram,
    /// RuntimeFault, or BadResult.
    pub fn run_checked(&self, program: &SExpr) -> Result<MValue, RunError> {
        self.run_checked_on(program, &mut MachineState::fresh_state(), None)
    }

    /// `run_checked` on a caller-owned machine state with optional trace.
    pub fn run_checked_on(
        &self,
        program: &SExpr,
        state: &mut MachineState,
        trace: Option<&mut TraceFn<'_>>,
    ) -> Result<MValue, RunError> {
        match self.validates(program) {
            Ok(true) => {}
            Ok(false) => {
                return Err(RunError::InvalidProgram {
                    nonterminal: self.grammar.start().to_string(),
                    term: program.to_string(),
                });
            }
            Err(e) => return Err(RunError::RuntimeFault(RuntimeFault::Grammar(e))),
        }
        let value = self.interp_on(program, state, trace).map_err(RunError::RuntimeFault)?;
        if !value_in_class(self.result_check, &value) {
            return Err(RunError::BadResult { expected: self.result_check, value });
        }
        Ok(value)
    }
}

/// Whether a run result inhabits a terminal class.
fn value_in_class(class: TermClass, v: &MValue) -> bool {
    match class {
        TermClass::Int32 => int_result_in_width(v, 32),
        TermClass::Int64 => int_result_in_width(v, 64),
        TermClass::Int61 => int_result_in_width(v, 61),
        TermClass::Label => matches!(v, MValue::Label(_)),
        TermClass::Reg | TermClass::Aloc | TermClass::Fvar => false,
    }
}

fn int_result_in_width(v: &MValue, bits: u32) -> bool {
    match v {
        MValue::Int(n) => in_range(Width::new(bits).expect("width above 2"), &BigInt::from(*n)),
        _ => false,
    }
}

/// A language name registered twice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateLanguageName(pub String);

impl fmt::Display for DuplicateLanguageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "duplicate language name: {}", self.0)
    }
}

impl core::error::Error for DuplicateLanguageName {}

/// The set of registered languages, looked up by name.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    langs: Vec<LanguageDef>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry { langs: Vec::new() }
    }

    pub fn register(&mut self, def: LanguageDef) -> Result<(), DuplicateLanguageName> {
        if self.langs.iter().any(|l| l.name == def.name) {
            return Err(DuplicateLanguageName(def.name));
        }
        self.langs.push(def);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&LanguageDef> {
        self.langs.iter().find(|l| l.name == name)
    }

    /// Language names in registration order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.langs.iter().map(|l| l.name.as_str())
    }
}

/// Build the registry of built-in languages. Each later language is the
/// earlier feature set with features overridden or added; the backends
/// share one executor and one arithmetic kernel.
pub fn register_languages() -> Registry {
    let mut r = Registry::new();
    let built_ins = [
        ("x64-v1", X64_V1_GRAMMAR, Backend::OracleEnvFold, TermClass::Int64),
        ("paren-x64", PAREN_X64_GRAMMAR, Backend::MachineExec, TermClass::Int64),
        ("asm-alloc-lang", ASM_ALLOC_GRAMMAR, Backend::ModuleExec, TermClass::Int64),
        ("exprs-lang-v7", EXPRS_V7_GRAMMAR, Backend::TaggedEval, TermClass::Int61),
    ];
    for (name, text, backend, check) in built_ins {
        let grammar = Grammar::from_text(text).expect("built-in grammar parses");
        r.register(LanguageDef::new(name, grammar, backend, check))
            .expect("built-in names are distinct");
    }
    r
}

/// Grammar text for the straight-line register language.
pub const X64_V1_GRAMMAR: &str = include_str!("../grammars/x64-v1.sexp");
/// Grammar text for the parenthesized x64 subset.
pub const PAREN_X64_GRAMMAR: &str = include_str!("../grammars/paren-x64.sexp");
/// Grammar text for the module/aloc/fvar language.
pub const ASM_ALLOC_GRAMMAR: &str = include_str!("../grammars/asm-alloc-lang.sexp");
/// Grammar text for the 61-bit tagged surface language.
pub const EXPRS_V7_GRAMMAR: &str = include_str!("../grammars/exprs-lang-v7.sexp");

// ---------------------------------------------------------------------
// The 61-bit surface evaluator
// ---------------------------------------------------------------------

/// A fault in the 61-bit surface evaluator.
#[derive(Debug, Clone, PartialEq)]
pub enum V7Error {
    /// A symbol that is neither a parameter, a define, nor a primitive.
    UnboundLabel(String),
    /// A call fault: non-procedure, arity, or primitive operand trouble.
    Closure(ClosureError),
    /// A form outside the evaluator's shape (unchecked entry).
    Malformed(String),
}

impl fmt::Display for V7Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            V7Error::UnboundLabel(l) => write!(f, "unbound label: {}", l),
            V7Error::Closure(e) => write!(f, "{}", e),
            V7Error::Malformed(form) => write!(f, "malformed surface form: {}", form),
        }
    }
}

impl core::error::Error for V7Error {}

impl From<ClosureError> for V7Error {
    fn from(e: ClosureError) -> Self {
        V7Error::Closure(e)
    }
}

struct V7Defs {
    /// Define label -> its procedure record.
    procs: BTreeMap<String, MValue>,
    /// Define label -> (parameter names, body).
    bodies: BTreeMap<String, (Vec<String>, SExpr)>,
}

/// Evaluate a 61-bit surface program: `(module def ... value)` or a bare
/// value expression. Integer literals are reinterpreted at width 61;
/// `+`, `-`, `*` are primitives at width 61; an uncalled define label
/// evaluates to its procedure.
pub fn interp_v7(program: &SExpr) -> Result<MValue, V7Error> {
    let mut defs = V7Defs { procs: BTreeMap::new(), bodies: BTreeMap::new() };
    let value = match program.as_list() {
        Some(items) if items.first().map(|h| h.is_symbol("module")).unwrap_or(false) => {
            let Some((value, def_forms)) = items[1..].split_last() else {
                return Err(V7Error::Malformed(program.to_string()));
            };
            for def in def_forms {
                add_define(def, &mut defs)?;
            }
            value
        }
        _ => program,
    };
    eval_v7(value, &defs, &BTreeMap::new())
}

fn add_define(def: &SExpr, defs: &mut V7Defs) -> Result<(), V7Error> {
    let malformed = || V7Error::Malformed(def.to_string());
    let items = def.as_list().ok_or_else(malformed)?;
    let [head, label_e, lambda_e] = items else {
        return Err(malformed());
    };
    if !head.is_symbol("define") {
        return Err(malformed());
    }
    let label = label_e.as_symbol().ok_or_else(malformed)?;
    let lambda_items = lambda_e.as_list().ok_or_else(malformed)?;
    let [lam, params_e, body] = lambda_items else {
        return Err(malformed());
    };
    if !lam.is_symbol("lambda") {
        return Err(malformed());
    }
    let params = params_e
        .as_list()
        .ok_or_else(malformed)?
        .iter()
        .map(|p| p.as_symbol().map(str::to_string).ok_or_else(malformed))
        .collect::<Result<Vec<_>, _>>()?;
    let proc = closures::make_procedure(ProcCode::Label(label.to_string()), params.len(), 0);
    defs.procs.insert(label.to_string(), proc);
    defs.bodies.insert(label.to_string(), (params, body.clone()));
    Ok(())
}

fn v7_primitive(name: &str) -> Option<MValue> {
    let op = Binop::from_name(name)?;
    Some(closures::primitive(op, Width::W61))
}

fn wrap61(n: &BigInt) -> i64 {
    i64::try_from(&wrap(Width::W61, n)).expect("a 61-bit value fits the machine word")
}

fn eval_v7(
    e: &SExpr,
    defs: &V7Defs,
    params: &BTreeMap<String, MValue>,
) -> Result<MValue, V7Error> {
    match e {
        SExpr::Int(n) => Ok(MValue::Int(wrap61(n))),
        SExpr::Symbol(s) => {
            if let Some(v) = params.get(s) {
                return Ok(v.clone());
            }
            if let Some(v) = defs.procs.get(s) {
                return Ok(v.clone());
            }
            if let Some(v) = v7_primitive(s) {
                return Ok(v);
            }
            Err(V7Error::UnboundLabel(s.clone()))
        }
        SExpr::List(items) => {
            // `(call f a ...)` or the implicit-call reading of any other
            // list, which the unchecked evaluator accepts.
            let exprs = match items.first() {
                Some(h) if h.is_symbol("call") => &items[1..],
                _ => &items[..],
            };
            let Some((callee, args)) = exprs.split_first() else {
                return Err(V7Error::Malformed(e.to_string()));
            };
            let f = eval_v7(callee, defs, params)?;
            let mut argv = vec![f.clone()];
            for a in args {
                argv.push(eval_v7(a, defs, params)?);
            }
            match closures::call(&f, &argv)? {
                CallOutcome::Value(v) => Ok(v),
                CallOutcome::EnterCode { label, args } => {
                    let Some((names, body)) = defs.bodies.get(&label) else {
                        return Err(V7Error::UnboundLabel(label));
                    };
                    let mut frame = BTreeMap::new();
                    for (name, value) in names.iter().zip(&args[1..]) {
                        frame.insert(name.clone(), value.clone());
                    }
                    eval_v7(body, defs, &frame)
                }
            }
        }
    }
}
