//! Randomized invariants at development scale. The acceptance suite in
//! the CLI crate re-runs the same runners at full scale.

use num_bigint::BigInt;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use ilvm_core::ints::{max_int, min_int, wrap, Width};
use ilvm_core::machine::MValue;
use ilvm_core::registry::{interp_v7, register_languages};
use ilvm_core::sexpr::SExpr;
use ilvm_testkit::{
    check_flags_trichotomy, check_frame_invariants, check_oracle_equivalence,
    check_sexpr_roundtrip, check_wrap_agreement, gen_straight_line, rng, with_jump_done,
};

#[test]
fn sexpr_round_trip() {
    check_sexpr_roundtrip(101, 2_000);
}

#[test]
fn wrapping_arithmetic_agrees_with_exact() {
    check_wrap_agreement(102, 20_000);
}

#[test]
fn flags_satisfy_trichotomy() {
    check_flags_trichotomy(103, 2_000);
}

#[test]
fn oracle_agrees_with_the_executor() {
    check_oracle_equivalence(104, 300);
}

#[test]
fn frame_programs_keep_their_invariants() {
    check_frame_invariants(105, 50);
}

#[test]
fn surface_addition_is_width_61_wrapping() {
    let mut rng = rng(107);
    let span = max_int(Width::W61) - min_int(Width::W61);
    let int61 = |rng: &mut ChaCha8Rng| {
        min_int(Width::W61) + BigInt::from(rng.gen::<u64>()) * &span / BigInt::from(u64::MAX)
    };
    for i in 0..500 {
        let a = int61(&mut rng);
        let b = int61(&mut rng);
        let program = SExpr::list(vec![
            SExpr::sym("call"),
            SExpr::sym("+"),
            SExpr::Int(a.clone()),
            SExpr::Int(b.clone()),
        ]);
        let want = i64::try_from(&wrap(Width::W61, &(&a + &b))).unwrap();
        assert_eq!(
            interp_v7(&program).unwrap(),
            MValue::Int(want),
            "case {}: (call + {} {})",
            i,
            a,
            b
        );
    }
}

/// A random surface term: literals, primitive names, unbound symbols,
/// and calls of arbitrary shape, valid or not.
fn gen_surface_term(rng: &mut ChaCha8Rng, depth: u32) -> SExpr {
    if depth == 0 || rng.gen_bool(0.4) {
        match rng.gen_range(0..4) {
            0 => SExpr::int(rng.gen::<i64>()),
            1 => SExpr::sym(["+", "-", "*"].choose(rng).unwrap()),
            2 => SExpr::sym("x.1"),
            _ => SExpr::sym("mystery"),
        }
    } else {
        let mut items = vec![SExpr::sym("call")];
        items.extend((0..rng.gen_range(0..=3)).map(|_| gen_surface_term(rng, depth - 1)));
        SExpr::list(items)
    }
}

#[test]
fn surface_evaluation_is_total_over_arbitrary_terms() {
    let mut rng = rng(108);
    for _ in 0..2_000 {
        let term = gen_surface_term(&mut rng, 4);
        // Any outcome is fine; reaching it without a panic is the point.
        let _ = interp_v7(&term);
    }
}

#[test]
fn checked_runs_agree_with_unchecked_on_grammatical_programs() {
    let mut rng = rng(106);
    let registry = register_languages();
    let lang = registry.get("paren-x64").unwrap();
    for i in 0..200 {
        let program = with_jump_done(&gen_straight_line(&mut rng).0);
        assert!(lang.validates(&program).unwrap(), "case {}: {}", i, program);
        let checked = lang.run_checked(&program);
        let unchecked = lang.interp(&program);
        assert_eq!(checked.unwrap(), unchecked.unwrap(), "case {}: {}", i, program);
    }
}
