//! Seeded program generators and property runners shared by the workspace
//! test suites.
//!
//! Every runner takes an explicit seed and case count, so callers pick
//! their own scale: unit tests run a handful of cases, the acceptance
//! suite runs thousands. Generation uses a fixed-algorithm RNG
//! (ChaCha8), so a given seed reproduces the same corpus on any build.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use ilvm_core::base;
use ilvm_core::frames;
use ilvm_core::ints::{wrap, Binop, Width};
use ilvm_core::machine::{MValue, MachineState, Register, Relop};
use ilvm_core::registry::{register_languages, LanguageDef, Registry};
use ilvm_core::sexpr::{print, read, SExpr};

/// The fixed-algorithm RNG all generators run on.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------
// S-expression trees
// ---------------------------------------------------------------------

const SYMBOL_HEADS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
const SYMBOL_TAILS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789-.!*<=>+";

/// A random symbol that can never be mistaken for an integer literal
/// (it starts with a letter).
pub fn gen_symbol(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(0..=6);
    let mut s = String::new();
    s.push(*SYMBOL_HEADS.choose(rng).unwrap() as char);
    for _ in 0..len {
        s.push(*SYMBOL_TAILS.choose(rng).unwrap() as char);
    }
    s
}

/// A random integer spanning small counts, the full machine-word range,
/// and values too wide for any machine word.
pub fn gen_bigint(rng: &mut ChaCha8Rng) -> BigInt {
    match rng.gen_range(0..4) {
        0 => BigInt::from(rng.gen_range(-100i64..=100)),
        1 => BigInt::from(rng.gen::<i64>()),
        2 => BigInt::from(rng.gen::<i64>()) << rng.gen_range(1..64u32),
        _ => BigInt::from(rng.gen::<i64>()) * BigInt::from(rng.gen::<i64>()),
    }
}

/// A random s-expression tree of bounded depth.
pub fn gen_tree(rng: &mut ChaCha8Rng, depth: u32) -> SExpr {
    if depth == 0 || rng.gen_bool(0.4) {
        if rng.gen_bool(0.5) {
            SExpr::sym(&gen_symbol(rng))
        } else {
            SExpr::Int(gen_bigint(rng))
        }
    } else {
        let n = rng.gen_range(0..=4);
        SExpr::list((0..n).map(|_| gen_tree(rng, depth - 1)).collect())
    }
}

/// Printing a generated tree and reading it back yields the same tree.
pub fn check_sexpr_roundtrip(seed: u64, cases: usize) {
    let mut rng = rng(seed);
    for i in 0..cases {
        let tree = gen_tree(&mut rng, 5);
        let text = print(&tree);
        match read(&text) {
            Ok(back) => assert_eq!(back, tree, "case {}: round-trip changed {}", i, text),
            Err(e) => panic!("case {}: {} re-reading {}", i, e, text),
        }
    }
}

// ---------------------------------------------------------------------
// Fixed-width arithmetic
// ---------------------------------------------------------------------

/// Two's-complement operations agree with exact arithmetic followed by a
/// wrap, at every width, and always land in range.
pub fn check_wrap_agreement(seed: u64, cases: usize) {
    let mut rng = rng(seed);
    let ops = [Binop::Add, Binop::Sub, Binop::Mul];
    for i in 0..cases {
        let w = Width::new(rng.gen_range(2..=64)).unwrap();
        let a = wrap(w, &gen_bigint(&mut rng));
        let b = wrap(w, &gen_bigint(&mut rng));
        let op = *ops.choose(&mut rng).unwrap();
        let got = op
            .apply(w, &a, &b)
            .unwrap_or_else(|e| panic!("case {}: {} on in-range operands", i, e));
        let want = wrap(w, &op.apply_exact(&a, &b));
        assert_eq!(
            got, want,
            "case {}: ({} {} {}) at width {}",
            i,
            op.name(),
            a,
            b,
            w
        );
        assert_eq!(wrap(w, &got), got, "case {}: result escaped width {}", i, w);
    }
}

// ---------------------------------------------------------------------
// Flags
// ---------------------------------------------------------------------

/// After a compare, each relation flag matches the direct comparison and
/// exactly one of <, =, > holds.
pub fn check_flags_trichotomy(seed: u64, cases: usize) {
    let mut rng = rng(seed);
    let mut state = MachineState::fresh_state();
    for i in 0..cases {
        let a: i64 = rng.gen();
        let b: i64 = match rng.gen_range(0..3) {
            0 => a,
            1 => a.wrapping_add(rng.gen_range(-2..=2)),
            _ => rng.gen(),
        };
        state.flags_update(a, b);
        for relop in Relop::ALL {
            assert_eq!(
                state.flag(relop),
                relop.eval(a, b),
                "case {}: ({} {} {})",
                i,
                relop.name(),
                a,
                b
            );
        }
        let strict = [Relop::Lt, Relop::Eq, Relop::Gt]
            .into_iter()
            .filter(|r| state.flag(*r))
            .count();
        assert_eq!(strict, 1, "case {}: trichotomy broken for ({}, {})", i, a, b);
    }
}

// ---------------------------------------------------------------------
// Straight-line register programs
// ---------------------------------------------------------------------

/// Registers the straight-line generator writes. Kept away from rbp so
/// the generated programs mean the same thing to every backend.
const GEN_REGISTERS: [Register; 8] = [
    Register::Rax,
    Register::Rbx,
    Register::Rcx,
    Register::Rdx,
    Register::Rsi,
    Register::Rdi,
    Register::R8,
    Register::R9,
];

/// Magnitude cap keeping every intermediate far inside the 64-bit word,
/// so exact and wrapping interpretation cannot disagree.
const VALUE_CAP: i128 = 1 << 40;

fn gen_small_literal(rng: &mut ChaCha8Rng) -> i64 {
    if rng.gen_bool(0.8) {
        rng.gen_range(-1_000_000..=1_000_000)
    } else {
        rng.gen_range(i32::MIN as i64..=i32::MAX as i64)
    }
}

/// A random straight-line program `(begin (set! reg ...) ...)` over
/// `+`, `-`, `*` where every read is preceded by a write, the last
/// effect writes rax, and no intermediate value leaves the magnitude
/// cap. Returns the program and the value rax ends with.
pub fn gen_straight_line(rng: &mut ChaCha8Rng) -> (SExpr, i64) {
    let mut vals: BTreeMap<Register, i128> = BTreeMap::new();
    let mut effects = Vec::new();
    let set = |dst: Register, src: SExpr| {
        SExpr::list(vec![SExpr::sym("set!"), SExpr::sym(dst.name()), src])
    };
    for _ in 0..rng.gen_range(1..=10) {
        let dst = *GEN_REGISTERS.choose(rng).unwrap();
        let written: Vec<Register> = vals.keys().copied().collect();
        match rng.gen_range(0..3) {
            0 if !written.is_empty() => {
                let src = *written.choose(rng).unwrap();
                effects.push(set(dst, SExpr::sym(src.name())));
                vals.insert(dst, vals[&src]);
            }
            1 if written.contains(&dst) => {
                let op = *[Binop::Add, Binop::Sub, Binop::Mul].choose(rng).unwrap();
                let mut lit = match op {
                    Binop::Mul => rng.gen_range(-8i64..=8),
                    _ => gen_small_literal(rng),
                };
                let apply = |lit: i64| match op {
                    Binop::Add => vals[&dst] + lit as i128,
                    Binop::Sub => vals[&dst] - lit as i128,
                    Binop::Mul => vals[&dst] * lit as i128,
                };
                if apply(lit).abs() > VALUE_CAP {
                    lit = rng.gen_range(0..=1);
                }
                effects.push(set(
                    dst,
                    SExpr::list(vec![
                        SExpr::sym(op.name()),
                        SExpr::sym(dst.name()),
                        SExpr::int(lit),
                    ]),
                ));
                vals.insert(dst, apply(lit));
            }
            _ => {
                let lit = gen_small_literal(rng);
                effects.push(set(dst, SExpr::int(lit)));
                vals.insert(dst, lit as i128);
            }
        }
    }
    // Land the result in rax, from a register or a fresh literal.
    let written: Vec<Register> = vals.keys().copied().collect();
    let result = if !written.is_empty() && rng.gen_bool(0.7) {
        let src = *written.choose(rng).unwrap();
        effects.push(set(Register::Rax, SExpr::sym(src.name())));
        vals[&src]
    } else {
        let lit = gen_small_literal(rng);
        effects.push(set(Register::Rax, SExpr::int(lit)));
        lit as i128
    };
    let mut items = vec![SExpr::sym("begin")];
    items.extend(effects);
    (SExpr::list(items), i64::try_from(result).unwrap())
}

/// Append `(jump done)` to a `(begin ...)` program so the machine
/// executor halts where the straight-line program simply ends.
pub fn with_jump_done(program: &SExpr) -> SExpr {
    let mut items = program.as_list().expect("a begin form").to_vec();
    items.push(SExpr::list(vec![SExpr::sym("jump"), SExpr::sym("done")]));
    SExpr::list(items)
}

fn language<'r>(registry: &'r Registry, name: &str) -> &'r LanguageDef {
    registry.get(name).expect("built-in language")
}

/// Generated straight-line programs are grammatical, and the exact
/// reference interpreter agrees with the machine executor modulo the
/// 64-bit wrap (vacuous here by construction: nothing overflows).
pub fn check_oracle_equivalence(seed: u64, cases: usize) {
    let mut rng = rng(seed);
    let registry = register_languages();
    let v1 = language(&registry, "x64-v1");
    for i in 0..cases {
        let (program, expected) = gen_straight_line(&mut rng);
        assert!(
            v1.validates(&program).unwrap(),
            "case {}: generator left the grammar: {}",
            i,
            program
        );
        let exact = base::oracle_interp_v1(&program)
            .unwrap_or_else(|e| panic!("case {}: oracle {} on {}", i, e, program));
        assert_eq!(exact, BigInt::from(expected), "case {}: tracked value", i);
        let wrapped = i64::try_from(&wrap(Width::W64, &exact)).unwrap();
        let mut state = MachineState::fresh_state();
        let got = base::exec(&with_jump_done(&program), &mut state)
            .unwrap_or_else(|e| panic!("case {}: exec {} on {}", i, e, program));
        assert_eq!(got, MValue::Int(wrapped), "case {}: {}", i, program);
    }
}

// ---------------------------------------------------------------------
// Frame programs
// ---------------------------------------------------------------------

/// A generated frame program: a module whose tail writes abstract
/// locations, with the assignment map sending each to its own register.
pub struct FrameProgram {
    /// `(module ((assignment (...))) tail)` — writes go through alocs.
    pub with_alocs: SExpr,
    /// The same program with every aloc textually replaced by its
    /// assigned register and an empty assignment map.
    pub with_registers: SExpr,
    /// The value rax holds at `done`.
    pub expected: i64,
}

const ALOC_REGISTERS: [Register; 8] = [
    Register::Rbx,
    Register::Rcx,
    Register::Rdx,
    Register::Rsi,
    Register::Rdi,
    Register::R8,
    Register::R9,
    Register::R10,
];

/// A random module over abstract locations `a.1 b.2 ...`, each assigned
/// a distinct register the program never mentions directly. The tail is
/// straight-line aloc arithmetic ending `(set! rax aloc) (jump done)`.
pub fn gen_frame_program(rng: &mut ChaCha8Rng) -> FrameProgram {
    let count = rng.gen_range(1..=4);
    let mut regs = ALOC_REGISTERS;
    regs.shuffle(rng);
    let alocs: Vec<(String, Register)> = (0..count)
        .map(|i| {
            let base = (b'a' + i as u8) as char;
            (format!("{}.{}", base, i + 1), regs[i])
        })
        .collect();

    let mut vals: BTreeMap<usize, i128> = BTreeMap::new();
    let mut effects = Vec::new();
    let set = |dst: &str, src: SExpr| {
        SExpr::list(vec![SExpr::sym("set!"), SExpr::sym(dst), src])
    };
    // Open with a literal write so at least one aloc is readable.
    let first = rng.gen_range(0..count);
    let lit = gen_small_literal(rng);
    effects.push(set(&alocs[first].0, SExpr::int(lit)));
    vals.insert(first, lit as i128);

    for _ in 0..rng.gen_range(2..=9) {
        let dst = rng.gen_range(0..count);
        let written: Vec<usize> = vals.keys().copied().collect();
        match rng.gen_range(0..3) {
            0 => {
                let src = *written.choose(rng).unwrap();
                effects.push(set(&alocs[dst].0, SExpr::sym(&alocs[src].0)));
                vals.insert(dst, vals[&src]);
            }
            1 if vals.contains_key(&dst) => {
                let op = *[Binop::Add, Binop::Sub, Binop::Mul].choose(rng).unwrap();
                let mut lit = match op {
                    Binop::Mul => rng.gen_range(-8i64..=8),
                    _ => gen_small_literal(rng),
                };
                let apply = |lit: i64| match op {
                    Binop::Add => vals[&dst] + lit as i128,
                    Binop::Sub => vals[&dst] - lit as i128,
                    Binop::Mul => vals[&dst] * lit as i128,
                };
                if apply(lit).abs() > VALUE_CAP {
                    lit = rng.gen_range(0..=1);
                }
                effects.push(set(
                    &alocs[dst].0,
                    SExpr::list(vec![
                        SExpr::sym(op.name()),
                        SExpr::sym(&alocs[dst].0),
                        SExpr::int(lit),
                    ]),
                ));
                vals.insert(dst, apply(lit));
            }
            _ => {
                let lit = gen_small_literal(rng);
                effects.push(set(&alocs[dst].0, SExpr::int(lit)));
                vals.insert(dst, lit as i128);
            }
        }
    }
    let written: Vec<usize> = vals.keys().copied().collect();
    let result_aloc = *written.choose(rng).unwrap();
    effects.push(set("rax", SExpr::sym(&alocs[result_aloc].0)));
    effects.push(SExpr::list(vec![SExpr::sym("jump"), SExpr::sym("done")]));

    let mut tail_items = vec![SExpr::sym("begin")];
    tail_items.extend(effects);
    let tail = SExpr::list(tail_items);

    let pairs = alocs
        .iter()
        .map(|(name, reg)| SExpr::list(vec![SExpr::sym(name), SExpr::sym(reg.name())]))
        .collect();
    let info = |assignment: Vec<SExpr>| {
        SExpr::list(vec![SExpr::list(vec![
            SExpr::sym("assignment"),
            SExpr::list(assignment),
        ])])
    };
    let module = |info: SExpr, tail: SExpr| {
        SExpr::list(vec![SExpr::sym("module"), info, tail])
    };

    let substitution: BTreeMap<&str, &str> = alocs
        .iter()
        .map(|(name, reg)| (name.as_str(), reg.name()))
        .collect();
    let replaced = substitute_symbols(&tail, &substitution);

    FrameProgram {
        with_alocs: module(info(pairs), tail),
        with_registers: module(info(Vec::new()), replaced),
        expected: i64::try_from(vals[&result_aloc]).unwrap(),
    }
}

fn substitute_symbols(e: &SExpr, map: &BTreeMap<&str, &str>) -> SExpr {
    match e {
        SExpr::Symbol(s) => match map.get(s.as_str()) {
            Some(to) => SExpr::sym(to),
            None => e.clone(),
        },
        SExpr::List(items) => {
            SExpr::list(items.iter().map(|i| substitute_symbols(i, map)).collect())
        }
        SExpr::Int(_) => e.clone(),
    }
}

/// Wrap the `index`-th effect of the module's tail in
/// `(with-label <fresh> ...)`, leaving everything else alone.
pub fn insert_fresh_label(program: &SExpr, index: usize, fresh: &str) -> SExpr {
    let items = program.as_list().expect("a module form");
    let mut items = items.to_vec();
    let tail_at = items.len() - 1;
    let mut tail = items[tail_at].as_list().expect("a begin tail").to_vec();
    let effect_at = 1 + index % (tail.len() - 1);
    tail[effect_at] = SExpr::list(vec![
        SExpr::sym("with-label"),
        SExpr::sym(fresh),
        tail[effect_at].clone(),
    ]);
    items[tail_at] = SExpr::list(tail);
    SExpr::list(items)
}

/// Generated frame programs are grammatical; redirecting alocs through
/// the assignment map matches textual substitution; and wrapping any
/// instruction in a never-jumped-to label changes nothing.
pub fn check_frame_invariants(seed: u64, cases: usize) {
    let mut rng = rng(seed);
    let registry = register_languages();
    let asm = language(&registry, "asm-alloc-lang");
    for i in 0..cases {
        let program = gen_frame_program(&mut rng);
        assert!(
            asm.validates(&program.with_alocs).unwrap(),
            "case {}: generator left the grammar: {}",
            i,
            program.with_alocs
        );
        let expected = MValue::Int(program.expected);
        let redirected = frames::interp_module(&program.with_alocs)
            .unwrap_or_else(|e| panic!("case {}: {} on {}", i, e, program.with_alocs));
        let substituted = frames::interp_module(&program.with_registers)
            .unwrap_or_else(|e| panic!("case {}: {} on {}", i, e, program.with_registers));
        assert_eq!(redirected, expected, "case {}: {}", i, program.with_alocs);
        assert_eq!(
            substituted, expected,
            "case {}: {}",
            i, program.with_registers
        );

        let labeled = insert_fresh_label(&program.with_alocs, rng.gen(), "fresh-label");
        let got = frames::interp_module(&labeled)
            .unwrap_or_else(|e| panic!("case {}: {} on {}", i, e, labeled));
        assert_eq!(got, expected, "case {}: {}", i, labeled);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runners_pass_at_smoke_scale() {
        check_sexpr_roundtrip(11, 200);
        check_wrap_agreement(12, 500);
        check_flags_trichotomy(13, 500);
        check_oracle_equivalence(14, 50);
        check_frame_invariants(15, 20);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut a = rng(42);
        let mut b = rng(42);
        for _ in 0..20 {
            assert_eq!(gen_straight_line(&mut a).0, gen_straight_line(&mut b).0);
        }
    }

    #[test]
    fn fresh_labels_land_on_an_effect() {
        let mut r = rng(7);
        let program = gen_frame_program(&mut r);
        let labeled = insert_fresh_label(&program.with_alocs, 3, "fresh-label");
        let text = print(&labeled);
        assert!(text.contains("(with-label fresh-label (set!"));
    }
}
