//! Procedure records: callable values carrying a code entry, a
//! user-facing arity, and a fixed-size environment vector.
//!
//! The record is the procedure value itself; no wrapping machinery sits
//! between a caller and the code. The code the record names consumes one
//! more operand than the user-facing arity, because every call passes the
//! procedure itself first so the body can reach its environment.

use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use crate::ints::{Binop, OutOfRangeOperand, Width};
use crate::machine::MValue;

/// Shared, mutable handle to a procedure record.
pub type ProcHandle = Rc<RefCell<ProcedureRecord>>;

/// A host-side callable; receives the full host argument list (the
/// procedure itself first).
pub type HostFn = dyn Fn(&[MValue]) -> Result<MValue, ClosureError>;

/// What the record's label names: where calls transfer to.
#[derive(Clone)]
pub enum ProcCode {
    /// An IL code entry; the executor resolves it in the block table.
    Label(String),
    /// A built-in arithmetic primitive at a fixed width.
    Prim(Binop, Width),
    /// A host callable, for tests and embedders.
    Host(Rc<HostFn>),
}

impl ProcCode {
    /// Wrap a host closure as a code entry.
    pub fn host(f: impl Fn(&[MValue]) -> Result<MValue, ClosureError> + 'static) -> ProcCode {
        ProcCode::Host(Rc::new(f))
    }
}

impl fmt::Debug for ProcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcCode::Label(l) => write!(f, "Label({:?})", l),
            ProcCode::Prim(op, w) => write!(f, "Prim({}, {})", op, w),
            ProcCode::Host(_) => f.write_str("Host(..)"),
        }
    }
}

/// A procedure: code entry, user-facing arity, environment vector.
#[derive(Debug)]
pub struct ProcedureRecord {
    code: ProcCode,
    user_arity: usize,
    env: Vec<MValue>,
}

impl ProcedureRecord {
    /// The code entry.
    pub fn code(&self) -> &ProcCode {
        &self.code
    }

    /// The label's name when the code is an IL entry or a primitive.
    pub fn label_name(&self) -> Option<&str> {
        match &self.code {
            ProcCode::Label(l) => Some(l),
            ProcCode::Prim(op, _) => Some(op.name()),
            ProcCode::Host(_) => None,
        }
    }

    /// Arity from the user's perspective.
    pub fn user_arity(&self) -> usize {
        self.user_arity
    }

    /// Operand count of the underlying code: user arity plus the
    /// procedure itself.
    pub fn host_arity(&self) -> usize {
        self.user_arity + 1
    }

    /// Environment length.
    pub fn env_len(&self) -> usize {
        self.env.len()
    }
}

/// A procedure-record fault.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosureError {
    /// The value is not a procedure record.
    NotAProcedure(MValue),
    /// Host-argument count differs from the code's operand count.
    ArityMismatch { expected: usize, got: usize },
    /// Environment access outside the fixed vector.
    EnvIndexOutOfBounds { index: usize, len: usize },
    /// A primitive received a non-integer operand.
    PrimOperandType { prim: &'static str, value: MValue },
    /// A primitive received an operand outside its width.
    Arith(OutOfRangeOperand),
}

impl fmt::Display for ClosureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosureError::NotAProcedure(v) => write!(f, "not a procedure: {}", v),
            ClosureError::ArityMismatch { expected, got } => {
                write!(f, "arity mismatch: code takes {} operands, got {}", expected, got)
            }
            ClosureError::EnvIndexOutOfBounds { index, len } => {
                write!(f, "environment index {} out of bounds (length {})", index, len)
            }
            ClosureError::PrimOperandType { prim, value } => {
                write!(f, "{}: expected an integer operand, got {}", prim, value)
            }
            ClosureError::Arith(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for ClosureError {}

impl From<OutOfRangeOperand> for ClosureError {
    fn from(e: OutOfRangeOperand) -> Self {
        ClosureError::Arith(e)
    }
}

/// Make a fresh procedure record; environment cells start void.
pub fn make_procedure(code: ProcCode, user_arity: usize, env_size: usize) -> MValue {
    MValue::Proc(Rc::new(RefCell::new(ProcedureRecord {
        code,
        user_arity,
        env: alloc::vec![MValue::Void; env_size],
    })))
}

/// A built-in arithmetic primitive as a procedure record: user arity 2,
/// empty environment.
pub fn primitive(op: Binop, width: Width) -> MValue {
    make_procedure(ProcCode::Prim(op, width), 2, 0)
}

fn with_record<T>(p: &MValue, f: impl FnOnce(&ProcedureRecord) -> T) -> Result<T, ClosureError> {
    match p {
        MValue::Proc(handle) => Ok(f(&handle.borrow())),
        other => Err(ClosureError::NotAProcedure(other.clone())),
    }
}

/// The record's code entry.
pub fn unsafe_procedure_label(p: &MValue) -> Result<ProcCode, ClosureError> {
    with_record(p, |r| r.code.clone())
}

/// The record's user-facing arity (not the host arity).
pub fn unsafe_procedure_arity(p: &MValue) -> Result<usize, ClosureError> {
    with_record(p, |r| r.user_arity)
}

/// Operand count of the record's code: user arity + 1.
pub fn host_procedure_arity(p: &MValue) -> Result<usize, ClosureError> {
    with_record(p, |r| r.host_arity())
}

/// A snapshot of the environment vector.
pub fn unsafe_procedure_env(p: &MValue) -> Result<Vec<MValue>, ClosureError> {
    with_record(p, |r| r.env.clone())
}

/// Read environment cell `i`.
pub fn unsafe_procedure_ref(p: &MValue, i: usize) -> Result<MValue, ClosureError> {
    with_record(p, |r| {
        r.env
            .get(i)
            .cloned()
            .ok_or(ClosureError::EnvIndexOutOfBounds { index: i, len: r.env.len() })
    })?
}

/// Write environment cell `i`.
pub fn unsafe_procedure_set(p: &MValue, i: usize, v: MValue) -> Result<(), ClosureError> {
    match p {
        MValue::Proc(handle) => {
            let mut r = handle.borrow_mut();
            let len = r.env.len();
            match r.env.get_mut(i) {
                Some(cell) => {
                    *cell = v;
                    Ok(())
                }
                None => Err(ClosureError::EnvIndexOutOfBounds { index: i, len }),
            }
        }
        other => Err(ClosureError::NotAProcedure(other.clone())),
    }
}

/// Where a call goes after the record-level checks pass.
#[derive(Debug, Clone, PartialEq)]
pub enum CallOutcome {
    /// Primitive or host code already produced the result.
    Value(MValue),
    /// IL code: the caller transfers control to `label` with `args` bound
    /// positionally.
    EnterCode { label: String, args: Vec<MValue> },
}

/// Call a procedure with the full host argument list: the procedure
/// itself first, then the user arguments.
pub fn call(p: &MValue, args: &[MValue]) -> Result<CallOutcome, ClosureError> {
    let code = unsafe_procedure_label(p)?;
    let expected = host_procedure_arity(p)?;
    if args.len() != expected {
        return Err(ClosureError::ArityMismatch { expected, got: args.len() });
    }
    match code {
        ProcCode::Prim(op, width) => {
            let a = prim_int(op, &args[1])?;
            let b = prim_int(op, &args[2])?;
            Ok(CallOutcome::Value(MValue::Int(op.apply_i64(width, a, b)?)))
        }
        ProcCode::Host(f) => Ok(CallOutcome::Value(f(args)?)),
        ProcCode::Label(label) => Ok(CallOutcome::EnterCode { label, args: args.to_vec() }),
    }
}

fn prim_int(op: Binop, v: &MValue) -> Result<i64, ClosureError> {
    v.as_int()
        .ok_or_else(|| ClosureError::PrimOperandType { prim: op.name(), value: v.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// A code body computing `x + env[0]` at machine width: host arity 2.
    fn adder_code() -> ProcCode {
        ProcCode::host(|args| {
            let x = args[1].as_int().expect("integer argument");
            let e = unsafe_procedure_ref(&args[0], 0)?.as_int().expect("integer env");
            Ok(MValue::Int(Binop::Add.apply_i64(Width::W64, x, e)?))
        })
    }

    fn make_foo() -> MValue {
        let foo = make_procedure(adder_code(), 1, 1);
        unsafe_procedure_set(&foo, 0, MValue::Int(21)).unwrap();
        foo
    }

    #[test]
    fn closure_over_captured_value() {
        let foo = make_foo();
        let got = call(&foo, &[foo.clone(), MValue::Int(21)]).unwrap();
        assert_eq!(got, CallOutcome::Value(MValue::Int(42)));
    }

    #[test]
    fn user_and_host_arities_differ_by_one() {
        let foo = make_foo();
        assert_eq!(unsafe_procedure_arity(&foo).unwrap(), 1);
        assert_eq!(host_procedure_arity(&foo).unwrap(), 2);
    }

    #[test]
    fn fresh_env_cells_are_void() {
        let p = make_procedure(ProcCode::Label(String::from("l")), 2, 3);
        for i in 0..3 {
            assert_eq!(unsafe_procedure_ref(&p, i).unwrap(), MValue::Void);
        }
    }

    #[test]
    fn env_reads_your_writes_without_neighbors() {
        let p = make_procedure(ProcCode::Label(String::from("l")), 0, 2);
        unsafe_procedure_set(&p, 1, MValue::Int(9)).unwrap();
        assert_eq!(unsafe_procedure_ref(&p, 1).unwrap(), MValue::Int(9));
        assert_eq!(unsafe_procedure_ref(&p, 0).unwrap(), MValue::Void);
    }

    #[test]
    fn records_do_not_alias() {
        let a = make_procedure(ProcCode::Label(String::from("l")), 1, 1);
        let b = make_procedure(ProcCode::Label(String::from("l")), 1, 1);
        unsafe_procedure_set(&a, 0, MValue::Int(1)).unwrap();
        assert_eq!(unsafe_procedure_ref(&b, 0).unwrap(), MValue::Void);
        assert_ne!(a, b);
    }

    #[test]
    fn env_bounds() {
        let p = make_procedure(ProcCode::Label(String::from("l")), 0, 1);
        assert_eq!(
            unsafe_procedure_ref(&p, 1),
            Err(ClosureError::EnvIndexOutOfBounds { index: 1, len: 1 })
        );
        let empty = make_procedure(ProcCode::Label(String::from("l")), 0, 0);
        assert_eq!(
            unsafe_procedure_set(&empty, 0, MValue::Void),
            Err(ClosureError::EnvIndexOutOfBounds { index: 0, len: 0 })
        );
    }

    #[test]
    fn non_procedures_are_rejected() {
        assert_eq!(
            unsafe_procedure_label(&MValue::Int(5)).err(),
            Some(ClosureError::NotAProcedure(MValue::Int(5)))
        );
        assert!(matches!(
            call(&MValue::label("f"), &[]),
            Err(ClosureError::NotAProcedure(_))
        ));
    }

    #[test]
    fn call_checks_host_arity() {
        let foo = make_foo();
        assert_eq!(
            call(&foo, core::slice::from_ref(&foo)),
            Err(ClosureError::ArityMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn primitives_are_procedures() {
        let plus = primitive(Binop::Add, Width::W61);
        assert_eq!(unsafe_procedure_arity(&plus).unwrap(), 2);
        assert_eq!(unsafe_procedure_env(&plus).unwrap(), vec![]);
        let max61 = 1152921504606846975i64;
        let got = call(&plus, &[plus.clone(), MValue::Int(max61), MValue::Int(1)]).unwrap();
        assert_eq!(got, CallOutcome::Value(MValue::Int(-1152921504606846976)));
    }

    #[test]
    fn primitive_operand_type_fault() {
        let times = primitive(Binop::Mul, Width::W64);
        let got = call(&times, &[times.clone(), MValue::Void, MValue::Int(1)]);
        assert_eq!(
            got,
            Err(ClosureError::PrimOperandType { prim: "*", value: MValue::Void })
        );
    }

    #[test]
    fn il_code_calls_surface_as_transfers() {
        let p = make_procedure(ProcCode::Label(String::from("identity")), 1, 0);
        let got = call(&p, &[p.clone(), MValue::Int(7)]).unwrap();
        assert_eq!(
            got,
            CallOutcome::EnterCode {
                label: String::from("identity"),
                args: vec![p.clone(), MValue::Int(7)],
            }
        );
    }
}
