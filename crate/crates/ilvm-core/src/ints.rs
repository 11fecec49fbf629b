//! Fixed-width two's-complement arithmetic at any width >= 2.
//!
//! Every operation computes in arbitrary precision and then wraps, so the
//! same kernel serves the 64-bit machine words of the base languages and
//! the 61-bit payloads of the tagged surface language, bit-exactly.

use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

/// A bit width. The shipped languages use 61 and 64; anything >= 2 works.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Width(u32);

impl Width {
    /// The tagged-integer payload width.
    pub const W61: Width = Width(61);
    /// The machine word width.
    pub const W64: Width = Width(64);

    /// A width of `bits` bits; `None` below the 2-bit minimum.
    pub fn new(bits: u32) -> Option<Width> {
        (bits >= 2).then_some(Width(bits))
    }

    /// The number of bits.
    pub fn bits(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An operand handed to a `tc_*` operation was already outside the width's
/// value range; that is an engine bug upstream, not a user error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutOfRangeOperand {
    pub width: Width,
    pub operand: BigInt,
}

impl fmt::Display for OutOfRangeOperand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "operand {} out of range for width {}",
            self.operand, self.width
        )
    }
}

impl core::error::Error for OutOfRangeOperand {}

/// Largest representable value: 2^(w-1) - 1.
pub fn max_int(w: Width) -> BigInt {
    (BigInt::one() << (w.bits() - 1)) - 1
}

/// Smallest representable value: -2^(w-1).
pub fn min_int(w: Width) -> BigInt {
    -(BigInt::one() << (w.bits() - 1))
}

/// Reduce `n` into [min_int(w), max_int(w)] by two's-complement wrap:
/// ((n + 2^(w-1)) mod 2^w) - 2^(w-1).
pub fn wrap(w: Width, n: &BigInt) -> BigInt {
    let half = BigInt::one() << (w.bits() - 1);
    let full = BigInt::one() << w.bits();
    let shifted = mod_positive(&(n + &half), &full);
    shifted - half
}

/// The three wrapping binary operations every language level shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binop {
    Add,
    Sub,
    Mul,
}

impl Binop {
    /// Parse the printed operator; `None` for any other symbol.
    pub fn from_name(name: &str) -> Option<Binop> {
        match name {
            "+" => Some(Binop::Add),
            "-" => Some(Binop::Sub),
            "*" => Some(Binop::Mul),
            _ => None,
        }
    }

    /// The printed operator.
    pub fn name(self) -> &'static str {
        match self {
            Binop::Add => "+",
            Binop::Sub => "-",
            Binop::Mul => "*",
        }
    }

    /// Apply the wrapping operation at width `w`.
    pub fn apply(self, w: Width, a: &BigInt, b: &BigInt) -> Result<BigInt, OutOfRangeOperand> {
        match self {
            Binop::Add => tc_add(w, a, b),
            Binop::Sub => tc_sub(w, a, b),
            Binop::Mul => tc_mul(w, a, b),
        }
    }

    /// Apply at a machine-word-or-narrower width, staying in `i64`.
    pub fn apply_i64(self, w: Width, a: i64, b: i64) -> Result<i64, OutOfRangeOperand> {
        debug_assert!(w.bits() <= 64, "result must fit a machine word");
        let r = self.apply(w, &BigInt::from(a), &BigInt::from(b))?;
        Ok(i64::try_from(r).expect("wrapped result fits the width"))
    }

    /// Apply the exact (unwrapped) operation; the oracle semantics.
    pub fn apply_exact(self, a: &BigInt, b: &BigInt) -> BigInt {
        match self {
            Binop::Add => a + b,
            Binop::Sub => a - b,
            Binop::Mul => a * b,
        }
    }
}

impl fmt::Display for Binop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Remainder normalized into [0, modulus) for a positive modulus.
fn mod_positive(n: &BigInt, modulus: &BigInt) -> BigInt {
    let r = n % modulus;
    if r < BigInt::zero() {
        r + modulus
    } else {
        r
    }
}

/// True iff `n` is representable at width `w`.
pub fn in_range(w: Width, n: &BigInt) -> bool {
    *n >= min_int(w) && *n <= max_int(w)
}

/// Wrapping addition of two in-range operands.
pub fn tc_add(w: Width, a: &BigInt, b: &BigInt) -> Result<BigInt, OutOfRangeOperand> {
    check_operands(w, a, b)?;
    Ok(wrap(w, &(a + b)))
}

/// Wrapping subtraction of two in-range operands.
pub fn tc_sub(w: Width, a: &BigInt, b: &BigInt) -> Result<BigInt, OutOfRangeOperand> {
    check_operands(w, a, b)?;
    Ok(wrap(w, &(a - b)))
}

/// Wrapping multiplication of two in-range operands.
pub fn tc_mul(w: Width, a: &BigInt, b: &BigInt) -> Result<BigInt, OutOfRangeOperand> {
    check_operands(w, a, b)?;
    Ok(wrap(w, &(a * b)))
}

fn check_operands(w: Width, a: &BigInt, b: &BigInt) -> Result<(), OutOfRangeOperand> {
    for operand in [a, b] {
        if !in_range(w, operand) {
            return Err(OutOfRangeOperand {
                width: w,
                operand: operand.clone(),
            });
        }
    }
    Ok(())
}
