//! The single shared run-time model every language executes against:
//! register file, stack and memory vectors, comparison flags, the
//! frame-variable offset accumulator, and the halt latch.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::closures::ProcHandle;

/// Number of stack cells; 8 x the frame-variable count of 1620.
pub const STACK_SIZE: usize = 12960;
/// Number of heap cells.
pub const MEMORY_SIZE: usize = 10000;

/// The 16 general-purpose register names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Register {
    Rsp,
    Rbp,
    Rax,
    Rbx,
    Rcx,
    Rdx,
    Rsi,
    Rdi,
    R8,
    R9,
    R10,
    R11,
    R12,
    R13,
    R14,
    R15,
}

impl Register {
    /// Every register, in canonical listing order.
    pub const ALL: [Register; 16] = [
        Register::Rsp,
        Register::Rbp,
        Register::Rax,
        Register::Rbx,
        Register::Rcx,
        Register::Rdx,
        Register::Rsi,
        Register::Rdi,
        Register::R8,
        Register::R9,
        Register::R10,
        Register::R11,
        Register::R12,
        Register::R13,
        Register::R14,
        Register::R15,
    ];

    /// Parse a register name; `None` for any other symbol.
    pub fn from_name(name: &str) -> Option<Register> {
        Register::ALL.iter().copied().find(|r| r.name() == name)
    }

    /// The lowercase register name.
    pub fn name(self) -> &'static str {
        match self {
            Register::Rsp => "rsp",
            Register::Rbp => "rbp",
            Register::Rax => "rax",
            Register::Rbx => "rbx",
            Register::Rcx => "rcx",
            Register::Rdx => "rdx",
            Register::Rsi => "rsi",
            Register::Rdi => "rdi",
            Register::R8 => "r8",
            Register::R9 => "r9",
            Register::R10 => "r10",
            Register::R11 => "r11",
            Register::R12 => "r12",
            Register::R13 => "r13",
            Register::R14 => "r14",
            Register::R15 => "r15",
        }
    }

    fn index(self) -> usize {
        Register::ALL.iter().position(|r| *r == self).expect("listed")
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A machine word value.
#[derive(Debug, Clone)]
pub enum MValue {
    /// A 64-bit-range integer.
    Int(i64),
    /// A code label, compared by name.
    Label(String),
    /// A procedure record handle (see the closures module).
    Proc(ProcHandle),
    /// The value of a register nothing has written.
    Void,
    /// The value of a stack cell nothing has written.
    Uninit,
    /// The value of a memory cell nothing has allocated.
    Unalloced,
}

impl MValue {
    /// Build a label value.
    pub fn label(name: &str) -> MValue {
        MValue::Label(String::from(name))
    }

    /// The integer payload, if this is an Int.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            MValue::Int(n) => Some(*n),
            _ => None,
        }
    }
}

impl PartialEq for MValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (MValue::Int(a), MValue::Int(b)) => a == b,
            (MValue::Label(a), MValue::Label(b)) => a == b,
            (MValue::Proc(a), MValue::Proc(b)) => alloc::rc::Rc::ptr_eq(a, b),
            (MValue::Void, MValue::Void) => true,
            (MValue::Uninit, MValue::Uninit) => true,
            (MValue::Unalloced, MValue::Unalloced) => true,
            _ => false,
        }
    }
}

impl Eq for MValue {}

impl fmt::Display for MValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MValue::Int(n) => write!(f, "{}", n),
            MValue::Label(l) => f.write_str(l),
            MValue::Proc(p) => match p.try_borrow() {
                Ok(record) => match record.label_name() {
                    Some(name) => write!(f, "#<procedure:{}>", name),
                    None => f.write_str("#<procedure>"),
                },
                Err(_) => f.write_str("#<procedure>"),
            },
            MValue::Void => f.write_str("#<void>"),
            MValue::Uninit => f.write_str("uninit"),
            MValue::Unalloced => f.write_str("unalloced"),
        }
    }
}

/// The six comparison relations tracked by the flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relop {
    Neq,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relop {
    /// Every relation, in canonical listing order.
    pub const ALL: [Relop; 6] = [
        Relop::Neq,
        Relop::Eq,
        Relop::Lt,
        Relop::Le,
        Relop::Gt,
        Relop::Ge,
    ];

    /// Parse the printed operator; `None` for any other symbol.
    pub fn from_name(name: &str) -> Option<Relop> {
        Relop::ALL.iter().copied().find(|r| r.name() == name)
    }

    /// The printed operator.
    pub fn name(self) -> &'static str {
        match self {
            Relop::Neq => "!=",
            Relop::Eq => "=",
            Relop::Lt => "<",
            Relop::Le => "<=",
            Relop::Gt => ">",
            Relop::Ge => ">=",
        }
    }

    /// Apply the relation to two integers.
    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            Relop::Neq => a != b,
            Relop::Eq => a == b,
            Relop::Lt => a < b,
            Relop::Le => a <= b,
            Relop::Gt => a > b,
            Relop::Ge => a >= b,
        }
    }

    fn index(self) -> usize {
        Relop::ALL.iter().position(|r| *r == self).expect("listed")
    }
}

impl fmt::Display for Relop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A state access or halt fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateError {
    /// Stack index outside [0, 12960): a wild stack pointer or offset.
    StackIndexOutOfBounds(i64),
    /// Memory index outside [0, 10000).
    MemIndexOutOfBounds(i64),
    /// A second halt: the executor failed to stop at the first.
    DoubleHalt,
}

impl fmt::Display for StateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateError::StackIndexOutOfBounds(i) => {
                write!(f, "stack index {} out of bounds (0..{})", i, STACK_SIZE)
            }
            StateError::MemIndexOutOfBounds(i) => {
                write!(f, "memory index {} out of bounds (0..{})", i, MEMORY_SIZE)
            }
            StateError::DoubleHalt => f.write_str("halted twice"),
        }
    }
}

impl core::error::Error for StateError {}

/// The whole machine: registers, stack, memory, flags, frame-variable
/// offset, and the halt latch.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    regs: [MValue; 16],
    stack: Vec<MValue>,
    memory: Vec<MValue>,
    flags: [bool; 6],
    fvar_offset: i64,
    halted: Option<MValue>,
}

impl MachineState {
    /// A fresh machine: stack all `uninit`, memory all `unalloced`, flags
    /// false, frame-variable offset 0; rbp holds the stack's last index,
    /// r12 the heap origin 0, r15 the `done` label, every other register
    /// void.
    pub fn fresh_state() -> MachineState {
        let mut regs: [MValue; 16] = core::array::from_fn(|_| MValue::Void);
        regs[Register::Rbp.index()] = MValue::Int(STACK_SIZE as i64 - 1);
        regs[Register::R12.index()] = MValue::Int(0);
        regs[Register::R15.index()] = MValue::label("done");
        MachineState {
            regs,
            stack: vec![MValue::Uninit; STACK_SIZE],
            memory: vec![MValue::Unalloced; MEMORY_SIZE],
            flags: [false; 6],
            fvar_offset: 0,
            halted: None,
        }
    }

    /// Read a register.
    pub fn reg_get(&self, r: Register) -> MValue {
        self.regs[r.index()].clone()
    }

    /// Write a register. Writing rbp here never touches the
    /// frame-variable offset; that correction belongs to the increment
    /// instruction form alone.
    pub fn reg_set(&mut self, r: Register, v: MValue) {
        self.regs[r.index()] = v;
    }

    /// Read a stack cell.
    pub fn stack_get(&self, idx: i64) -> Result<MValue, StateError> {
        match usize::try_from(idx).ok().filter(|i| *i < STACK_SIZE) {
            Some(i) => Ok(self.stack[i].clone()),
            None => Err(StateError::StackIndexOutOfBounds(idx)),
        }
    }

    /// Write a stack cell.
    pub fn stack_set(&mut self, idx: i64, v: MValue) -> Result<(), StateError> {
        match usize::try_from(idx).ok().filter(|i| *i < STACK_SIZE) {
            Some(i) => {
                self.stack[i] = v;
                Ok(())
            }
            None => Err(StateError::StackIndexOutOfBounds(idx)),
        }
    }

    /// Read a memory cell.
    pub fn mem_get(&self, idx: i64) -> Result<MValue, StateError> {
        match usize::try_from(idx).ok().filter(|i| *i < MEMORY_SIZE) {
            Some(i) => Ok(self.memory[i].clone()),
            None => Err(StateError::MemIndexOutOfBounds(idx)),
        }
    }

    /// Write a memory cell.
    pub fn mem_set(&mut self, idx: i64, v: MValue) -> Result<(), StateError> {
        match usize::try_from(idx).ok().filter(|i| *i < MEMORY_SIZE) {
            Some(i) => {
                self.memory[i] = v;
                Ok(())
            }
            None => Err(StateError::MemIndexOutOfBounds(idx)),
        }
    }

    /// Number of stack cells.
    pub fn stack_len(&self) -> usize {
        self.stack.len()
    }

    /// Number of memory cells.
    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    /// Set every flag from one comparison of two integer payloads.
    pub fn flags_update(&mut self, v1: i64, v2: i64) {
        for relop in Relop::ALL {
            self.flags[relop.index()] = relop.eval(v1, v2);
        }
    }

    /// Read one flag.
    pub fn flag(&self, relop: Relop) -> bool {
        self.flags[relop.index()]
    }

    /// Latch the program result. The executor observes this and stops.
    pub fn halt(&mut self, v: MValue) -> Result<(), StateError> {
        if self.halted.is_some() {
            return Err(StateError::DoubleHalt);
        }
        self.halted = Some(v);
        Ok(())
    }

    /// The latched result, if the machine has halted.
    pub fn halted(&self) -> Option<&MValue> {
        self.halted.as_ref()
    }

    /// The frame-variable offset accumulator.
    pub fn fvar_offset(&self) -> i64 {
        self.fvar_offset
    }

    /// Overwrite the frame-variable offset accumulator.
    pub fn set_fvar_offset(&mut self, offset: i64) {
        self.fvar_offset = offset;
    }

    /// Debug dump: one `name=value` line per register holding a non-void
    /// value, then `stack[i]=v` for non-`uninit` cells and `memory[i]=v`
    /// for non-`unalloced` cells, indices ascending.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in Register::ALL {
            let v = &self.regs[r.index()];
            if !matches!(v, MValue::Void) {
                out.push_str(&format!("{}={}\n", r, v));
            }
        }
        for (i, v) in self.stack.iter().enumerate() {
            if !matches!(v, MValue::Uninit) {
                out.push_str(&format!("stack[{}]={}\n", i, v));
            }
        }
        for (i, v) in self.memory.iter().enumerate() {
            if !matches!(v, MValue::Unalloced) {
                out.push_str(&format!("memory[{}]={}\n", i, v));
            }
        }
        out
    }
}

impl Default for MachineState {
    fn default() -> Self {
        MachineState::fresh_state()
    }
}
