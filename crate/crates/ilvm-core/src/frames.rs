//! Module-level language features over the base executor: `module` and
//! `define` with assignment metadata, abstract locations redirected to
//! physical locations or bound as per-scope cells, frame variables
//! fv0..fv1619 with dynamic offset correction, and `return-point`
//! continuation labels.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::base::{
    self, BaseError, BlockTable, ExecError, Loc, ParseError, SymKind, SymbolScope, TraceFn,
};
use crate::machine::{MValue, MachineState, Register, StateError, STACK_SIZE};
use crate::sexpr::SExpr;

/// Number of frame-variable slots: one per stack word.
pub const FVAR_COUNT: u32 = (STACK_SIZE / 8) as u32;

/// An abstract location: an identifier with a numeric suffix, like `x.1`.
/// Identity is the full symbol; two scopes using the same symbol still get
/// distinct cells.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Aloc {
    name: String,
}

impl Aloc {
    /// Parse a symbol of shape `<base>.<digits>` with a non-empty base.
    pub fn parse(sym: &str) -> Option<Aloc> {
        let (base, digits) = sym.rsplit_once('.')?;
        if base.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        Some(Aloc { name: sym.to_string() })
    }

    /// The full symbol, e.g. `x.1`.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// The identifier part before the final dot.
    pub fn base(&self) -> &str {
        self.name.rsplit_once('.').map(|(b, _)| b).unwrap_or(&self.name)
    }

    /// The numeric suffix after the final dot.
    pub fn number(&self) -> u64 {
        self.name
            .rsplit_once('.')
            .and_then(|(_, d)| d.parse().ok())
            .unwrap_or(u64::MAX)
    }
}

impl fmt::Display for Aloc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// The four mutually exclusive classes a symbol can take at this level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymClass {
    Register(Register),
    Fvar(u32),
    Aloc(Aloc),
    Label(String),
}

/// A frame-variable index outside the 1620-slot binder range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    FvarIndexTooLarge { index: u64 },
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifyError::FvarIndexTooLarge { index } => write!(
                f,
                "frame variable fv{} is out of range: only fv0 through fv{} exist",
                index,
                FVAR_COUNT - 1
            ),
        }
    }
}

impl core::error::Error for ClassifyError {}

/// Classify a symbol: register names, then `fv<digits>`, then
/// `<id>.<digits>`, and anything else is a label.
pub fn classify(sym: &str) -> Result<SymClass, ClassifyError> {
    if let Some(r) = Register::from_name(sym) {
        return Ok(SymClass::Register(r));
    }
    if let Some(digits) = sym.strip_prefix("fv") {
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            let index: u64 = digits.parse().unwrap_or(u64::MAX);
            if index >= u64::from(FVAR_COUNT) {
                return Err(ClassifyError::FvarIndexTooLarge { index });
            }
            return Ok(SymClass::Fvar(index as u32));
        }
    }
    if let Some(a) = Aloc::parse(sym) {
        return Ok(SymClass::Aloc(a));
    }
    Ok(SymClass::Label(sym.to_string()))
}

/// Collect every abstract location written by a `set!` anywhere in a
/// tail/effect tree, looking through begins, labels, and return-points.
pub fn collect_alocs(body: &SExpr) -> BTreeSet<Aloc> {
    let mut out = BTreeSet::new();
    walk_alocs(body, &mut out);
    out
}

fn walk_alocs(e: &SExpr, out: &mut BTreeSet<Aloc>) {
    let Some(items) = e.as_list() else { return };
    match items.first().and_then(SExpr::as_symbol) {
        Some("begin") => {
            for s in &items[1..] {
                walk_alocs(s, out);
            }
        }
        Some("with-label") | Some("return-point") => {
            if let Some(inner) = items.get(2) {
                walk_alocs(inner, out);
            }
        }
        Some("set!") => {
            if let Some(sym) = items.get(1).and_then(SExpr::as_symbol) {
                if let Ok(SymClass::Aloc(a)) = classify(sym) {
                    out.insert(a);
                }
            }
        }
        _ => {}
    }
}

/// The frame-variable offset calculation:
/// int(rbp) - (fvar_offset + 8 * index), checked into the stack bounds.
/// rbp increments move both rbp and fvar_offset, so a frame variable keeps
/// naming the caller's slot across call-frame allocation.
pub fn fvar_index(state: &MachineState, index: u32) -> Result<i64, ExecError> {
    let rbp = state.reg_get(Register::Rbp);
    let Some(rbp) = rbp.as_int() else {
        return Err(ExecError::TypeError { instr: format!("fv{}", index), value: rbp });
    };
    let idx = rbp as i128 - (state.fvar_offset() as i128 + 8 * index as i128);
    let idx = i64::try_from(idx).unwrap_or(if idx < 0 { i64::MIN } else { i64::MAX });
    if !(0..STACK_SIZE as i64).contains(&idx) {
        return Err(ExecError::State(StateError::StackIndexOutOfBounds(idx)));
    }
    Ok(idx)
}

/// A fault at the module language level.
#[derive(Debug, Clone, PartialEq)]
pub enum FramesError {
    Parse(ParseError),
    /// A `define` label bound twice (or binding the reserved `done`).
    DuplicateDefineLabel(String),
    Base(BaseError),
}

impl fmt::Display for FramesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FramesError::Parse(e) => write!(f, "{}", e),
            FramesError::DuplicateDefineLabel(l) => write!(f, "duplicate define label: {}", l),
            FramesError::Base(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for FramesError {}

impl From<ParseError> for FramesError {
    fn from(e: ParseError) -> Self {
        FramesError::Parse(e)
    }
}

impl From<BaseError> for FramesError {
    fn from(e: BaseError) -> Self {
        FramesError::Base(e)
    }
}

fn classify_for_parse(sym: &str) -> Result<SymClass, ParseError> {
    classify(sym).map_err(|e| ParseError::new(e.to_string()))
}

/// One scope's symbol resolution: the assignment map redirects its alocs
/// to physical locations; every other aloc gets a scope-local cell on
/// first sight.
struct ModuleScope<'a> {
    assignment: BTreeMap<Aloc, Loc>,
    next_cell: &'a mut usize,
    scope_cells: BTreeMap<Aloc, usize>,
}

impl ModuleScope<'_> {
    fn aloc_loc(&mut self, a: &Aloc) -> Loc {
        if let Some(loc) = self.assignment.get(a) {
            return loc.clone();
        }
        let id = match self.scope_cells.get(a) {
            Some(id) => *id,
            None => {
                let id = *self.next_cell;
                *self.next_cell += 1;
                self.scope_cells.insert(a.clone(), id);
                id
            }
        };
        Loc::Cell { id, name: a.name().to_string() }
    }
}

impl SymbolScope for ModuleScope<'_> {
    fn resolve(&mut self, sym: &str) -> Result<SymKind, ParseError> {
        Ok(match classify_for_parse(sym)? {
            SymClass::Register(r) => SymKind::Loc(Loc::Reg(r)),
            SymClass::Fvar(i) => SymKind::Loc(Loc::Fvar(i)),
            SymClass::Aloc(a) => SymKind::Loc(self.aloc_loc(&a)),
            SymClass::Label(l) => SymKind::Label(l),
        })
    }

    fn resolve_dest(&mut self, sym: &str, form: &SExpr) -> Result<Loc, ParseError> {
        match self.resolve(sym)? {
            SymKind::Loc(loc) => Ok(loc),
            SymKind::Label(_) => Err(ParseError::new(format!(
                "set!: cannot assign to a label in: {}",
                form
            ))),
        }
    }

    fn frames_features(&self) -> bool {
        true
    }
}

/// Parse an `info` clause list; only the `assignment` clause is
/// interpreted, other metadata clauses are inert.
fn parse_info(e: &SExpr) -> Result<BTreeMap<Aloc, Loc>, ParseError> {
    let clauses = e
        .as_list()
        .ok_or_else(|| ParseError::new(format!("info: expected a clause list in: {}", e)))?;
    let mut map = BTreeMap::new();
    for clause in clauses {
        let items = clause
            .as_list()
            .ok_or_else(|| ParseError::new(format!("info: expected a clause in: {}", clause)))?;
        if !items.first().map(|h| h.is_symbol("assignment")).unwrap_or(false) {
            continue;
        }
        let [_, pairs_e] = items else {
            return Err(ParseError::new(format!(
                "assignment: expected (assignment ((aloc rloc) ...)) in: {}",
                clause
            )));
        };
        let pairs = pairs_e.as_list().ok_or_else(|| {
            ParseError::new(format!("assignment: expected a pair list in: {}", pairs_e))
        })?;
        for pair in pairs {
            let pair_items = pair
                .as_list()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| {
                    ParseError::new(format!("assignment: expected (aloc rloc) in: {}", pair))
                })?;
            let aloc_sym = pair_items[0].as_symbol().ok_or_else(|| {
                ParseError::new(format!(
                    "assignment: expected an abstract location at: {}",
                    pair_items[0]
                ))
            })?;
            let SymClass::Aloc(aloc) = classify_for_parse(aloc_sym)? else {
                return Err(ParseError::new(format!(
                    "assignment: expected an abstract location at: {}",
                    pair_items[0]
                )));
            };
            let rloc_sym = pair_items[1].as_symbol().unwrap_or("");
            let rloc = match classify_for_parse(rloc_sym)? {
                SymClass::Register(r) => Loc::Reg(r),
                SymClass::Fvar(i) => Loc::Fvar(i),
                _ => {
                    return Err(ParseError::new(format!(
                        "assignment: expected a register or frame variable at: {}",
                        pair_items[1]
                    )));
                }
            };
            map.insert(aloc, rloc);
        }
    }
    Ok(map)
}

/// A compiled module: flattened code plus the number of abstract-location
/// cells its scopes allocated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleCode {
    pub table: BlockTable,
    pub cell_count: usize,
}

/// Compile `(module info (define label info tail) ... tail)` into a block
/// table. The module tail is the entry; each define binds its label at its
/// tail's first instruction; each scope resolves alocs against its own
/// info.
pub fn compile_module(program: &SExpr) -> Result<ModuleCode, FramesError> {
    let shape_error = || {
        FramesError::Parse(ParseError::new(format!(
            "module: expected (module info def ... tail) in: {}",
            program
        )))
    };
    let items = program
        .as_list()
        .filter(|items| items.first().map(|h| h.is_symbol("module")).unwrap_or(false))
        .ok_or_else(shape_error)?;
    if items.len() < 3 {
        return Err(shape_error());
    }
    let module_info = parse_info(&items[1])?;
    let tail = items.last().expect("length checked");
    let defines = &items[2..items.len() - 1];

    struct Def<'a> {
        label: String,
        assignment: BTreeMap<Aloc, Loc>,
        tail: &'a SExpr,
    }
    let mut defs: Vec<Def> = Vec::new();
    for d in defines {
        let d_items = d
            .as_list()
            .filter(|i| i.first().map(|h| h.is_symbol("define")).unwrap_or(false))
            .ok_or_else(|| {
                FramesError::Parse(ParseError::new(format!(
                    "define: expected (define label info tail) in: {}",
                    d
                )))
            })?;
        let (label_e, info_e, tail_e) = match d_items {
            [_, l, t] => (l, None, t),
            [_, l, i, t] => (l, Some(i), t),
            _ => {
                return Err(FramesError::Parse(ParseError::new(format!(
                    "define: expected (define label info tail) in: {}",
                    d
                ))));
            }
        };
        let label = match label_e.as_symbol().map(classify_for_parse) {
            Some(Ok(SymClass::Label(l))) => l,
            _ => {
                return Err(FramesError::Parse(ParseError::new(format!(
                    "define: expected a label at: {} in: {}",
                    label_e, d
                ))));
            }
        };
        let assignment = match info_e {
            Some(i) => parse_info(i)?,
            None => BTreeMap::new(),
        };
        defs.push(Def { label, assignment, tail: tail_e });
    }

    let mut next_cell = 0usize;
    let mut table = BlockTable { code: Vec::new(), labels: BTreeMap::new() };

    // The module tail is the entry scope.
    {
        let mut scope = ModuleScope {
            assignment: module_info,
            next_cell: &mut next_cell,
            scope_cells: BTreeMap::new(),
        };
        let stmt = base::parse_stmt(tail, &mut scope)?;
        base::flatten(core::slice::from_ref(&stmt), &mut table)?;
    }

    for def in defs {
        if def.label == base::DONE_LABEL || table.labels.contains_key(&def.label) {
            return Err(FramesError::DuplicateDefineLabel(def.label));
        }
        table.labels.insert(def.label, table.code.len());
        let mut scope = ModuleScope {
            assignment: def.assignment,
            next_cell: &mut next_cell,
            scope_cells: BTreeMap::new(),
        };
        let stmt = base::parse_stmt(def.tail, &mut scope)?;
        base::flatten(core::slice::from_ref(&stmt), &mut table)?;
    }

    if table.code.is_empty() {
        return Err(FramesError::Base(BaseError::EmptyProgram));
    }
    Ok(ModuleCode { table, cell_count: next_cell })
}

/// Compile and run a module program on `state`.
pub fn exec_module(
    program: &SExpr,
    state: &mut MachineState,
    trace: Option<&mut TraceFn<'_>>,
) -> Result<MValue, FramesError> {
    let code = compile_module(program)?;
    let mut cells = vec![None; code.cell_count];
    Ok(base::run(&code.table, state, &mut cells, trace).map_err(BaseError::Exec)?)
}

/// Run a module program on a fresh machine.
pub fn interp_module(program: &SExpr) -> Result<MValue, FramesError> {
    exec_module(program, &mut MachineState::fresh_state(), None)
}

/// The non-tail-call module: the caller passes 41 on the stack,
/// allocates the callee frame, and adds the live fv1 afterwards.
#[cfg(test)]
pub(crate) const NON_TAIL_CALL: &str = "(module ((assignment ()))
           (define identity ((assignment ()))
             (begin (set! rax fv0) (jump r15)))
           (begin
             (set! fv0 41)
             (set! fv1 1)
             (set! rbp (- rbp 16))
             (return-point l
               (begin
                 (set! r15 l)
                 (set! fv2 fv0)
                 (jump identity)))
             (set! rbp (+ rbp 16))
             (set! r10 fv1)
             (set! rax (+ rax r10))
             (jump done)))";
