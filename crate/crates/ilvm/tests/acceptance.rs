//! The acceptance suite: one test per acceptance criterion, so the run
//! prints one pass/fail line per criterion. Everything runs at desk
//! scale; the property suite in the final criterion targets under a
//! minute.

use std::io::Write;
use std::process::{Command, Stdio};

use num_bigint::BigInt;

use ilvm_core::base::{self, BaseError, Instr};
use ilvm_core::closures::{self, CallOutcome, ProcCode};
use ilvm_core::frames::{classify, interp_module, ClassifyError, SymClass};
use ilvm_core::grammar::TermClass;
use ilvm_core::ints::{max_int, min_int, Binop, Width};
use ilvm_core::machine::{MValue, MachineState, Register};
use ilvm_core::registry::{interp_v7, register_languages, RunError};
use ilvm_core::sexpr::read;
use ilvm_testkit::{
    check_flags_trichotomy, check_frame_invariants, check_oracle_equivalence,
    check_sexpr_roundtrip, check_wrap_agreement,
};

const FACT: &str = "(begin (set! r15 5)
                           (set! r14 1)
                           (with-label fact (compare r15 0))
                           (jump-if = end)
                           (set! r14 (* r14 r15))
                           (set! r15 (+ r15 -1))
                           (jump fact)
                           (with-label end (set! rax r14))
                           (jump done))";

/// The factorial loop with r15 left as an input register.
const FACT_BODY: &str = "(begin (set! r14 1)
                                (with-label fact (compare r15 0))
                                (jump-if = end)
                                (set! r14 (* r14 r15))
                                (set! r15 (+ r15 -1))
                                (jump fact)
                                (with-label end (set! rax r14))
                                (jump done))";

const NON_TAIL_CALL: &str = "(module ((assignment ()))
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

const MAX64: &str = "9223372036854775807";
const MAX61: &str = "1152921504606846975";

#[test]
fn acceptance_01_factorial() {
    let registry = register_languages();
    let lang = registry.get("paren-x64").unwrap();
    assert_eq!(
        lang.run_checked(&read(FACT).unwrap()).unwrap(),
        MValue::Int(120)
    );

    let mut state = MachineState::fresh_state();
    state.reg_set(Register::R15, MValue::Int(6));
    let got = lang
        .run_checked_on(&read(FACT_BODY).unwrap(), &mut state, None)
        .unwrap();
    assert_eq!(got, MValue::Int(720));
}

#[test]
fn acceptance_02_halt_path() {
    let mut state = MachineState::fresh_state();
    let program = read("(begin (set! rax 15) (jump done))").unwrap();
    assert_eq!(base::exec(&program, &mut state).unwrap(), MValue::Int(15));

    // r15 starts bound to the done label, so jumping through it halts.
    let mut state = MachineState::fresh_state();
    let program = read("(begin (set! rax 15) (jump r15))").unwrap();
    assert_eq!(base::exec(&program, &mut state).unwrap(), MValue::Int(15));
}

#[test]
fn acceptance_03_machine_model_constants() {
    let state = MachineState::fresh_state();
    assert_eq!(state.stack_len(), 12960);
    assert_eq!(state.memory_len(), 10000);
    assert_eq!(state.reg_get(Register::Rbp), MValue::Int(12959));
    assert_eq!(state.reg_get(Register::R12), MValue::Int(0));
    assert!((0..12960).all(|i| state.stack_get(i).unwrap() == MValue::Uninit));
    assert!((0..10000).all(|i| state.mem_get(i).unwrap() == MValue::Unalloced));

    // Witness the heap origin: a write through r12 lands at memory[0].
    let mut state = MachineState::fresh_state();
    let program = read("(begin (set! (r12 + 0) 5) (set! rax (r12 + 0)) (jump done))").unwrap();
    assert_eq!(base::exec(&program, &mut state).unwrap(), MValue::Int(5));
    assert_eq!(state.mem_get(0).unwrap(), MValue::Int(5));
}

#[test]
fn acceptance_04_stack_addressing() {
    let mut state = MachineState::fresh_state();
    let program = read("(begin (set! (rbp - 0) 5) (set! rax (rbp - 0)) (jump done))").unwrap();
    assert_eq!(base::exec(&program, &mut state).unwrap(), MValue::Int(5));

    // rbp displacements admit only the subtraction-by-literal form.
    let plus = read("(begin (set! (rbp + 0) 5) (jump done))").unwrap();
    match base::exec(&plus, &mut MachineState::fresh_state()) {
        Err(BaseError::Parse(e)) => assert_eq!(
            e.to_string(),
            "rbp: expected the literal symbol - at: + in: (rbp + 0)"
        ),
        other => panic!("expected a parse error, got {:?}", other),
    }
    let reg_amount = read("(begin (set! (rbp - rax) 5) (jump done))").unwrap();
    match base::exec(&reg_amount, &mut MachineState::fresh_state()) {
        Err(BaseError::Parse(e)) => {
            assert_eq!(e.to_string(), "rbp: expected integer at: rax")
        }
        other => panic!("expected a parse error, got {:?}", other),
    }
    // The register-amount form is also outside the grammar.
    let registry = register_languages();
    let lang = registry.get("paren-x64").unwrap();
    assert!(!lang.validates(&reg_amount).unwrap());
}

#[test]
fn acceptance_05_twos_complement() {
    let add = |w: Width, a: &BigInt, b: i64| Binop::Add.apply(w, a, &BigInt::from(b)).unwrap();
    assert_eq!(add(Width::W64, &max_int(Width::W64), 0), max_int(Width::W64));
    assert_eq!(add(Width::W64, &max_int(Width::W64), 1), min_int(Width::W64));
    assert_eq!(max_int(Width::W64), MAX64.parse::<BigInt>().unwrap());
    assert_eq!(
        min_int(Width::W64),
        "-9223372036854775808".parse::<BigInt>().unwrap()
    );
    assert_eq!(add(Width::W61, &max_int(Width::W61), 0), max_int(Width::W61));
    assert_eq!(add(Width::W61, &max_int(Width::W61), 1), min_int(Width::W61));
    assert_eq!(max_int(Width::W61), MAX61.parse::<BigInt>().unwrap());
    assert_eq!(
        min_int(Width::W61),
        "-1152921504606846976".parse::<BigInt>().unwrap()
    );

    // The surface language reinterprets the literal at width 61.
    let program = read(&format!("(+ {} 0)", MAX64)).unwrap();
    assert_eq!(interp_v7(&program).unwrap(), MValue::Int(-1));
}

#[test]
fn acceptance_06_frames_non_tail_call() {
    assert_eq!(
        interp_module(&read(NON_TAIL_CALL).unwrap()).unwrap(),
        MValue::Int(42)
    );

    // rbp and the frame-variable offset move in lockstep at every step.
    let mut state = MachineState::fresh_state();
    let mut steps = 0usize;
    let mut observer = |_: usize, instr: &Instr, state: &MachineState| {
        let rbp = state.reg_get(Register::Rbp).as_int().expect("rbp stays an integer");
        assert_eq!(rbp - state.fvar_offset(), 12959, "after {}", instr);
        steps += 1;
    };
    let registry = register_languages();
    let lang = registry.get("asm-alloc-lang").unwrap();
    let got = lang
        .run_checked_on(&read(NON_TAIL_CALL).unwrap(), &mut state, Some(&mut observer))
        .unwrap();
    assert_eq!(got, MValue::Int(42));
    assert!(steps >= 10, "the run covers the whole program");
}

#[test]
fn acceptance_07_frame_variable_bounds() {
    assert_eq!(classify("fv0").unwrap(), SymClass::Fvar(0));
    assert_eq!(classify("fv1619").unwrap(), SymClass::Fvar(1619));
    assert_eq!(
        classify("fv1620"),
        Err(ClassifyError::FvarIndexTooLarge { index: 1620 })
    );
    assert!(TermClass::Fvar.check(&read("fv1619").unwrap()));
    assert!(!TermClass::Fvar.check(&read("fv1620").unwrap()));
}

#[test]
fn acceptance_08_closures() {
    let code = ProcCode::host(|args| {
        let x = args[1].as_int().expect("integer argument");
        let e = closures::unsafe_procedure_ref(&args[0], 0)?
            .as_int()
            .expect("integer environment slot");
        Ok(MValue::Int(Binop::Add.apply_i64(Width::W64, x, e)?))
    });
    let foo = closures::make_procedure(code, 1, 1);
    closures::unsafe_procedure_set(&foo, 0, MValue::Int(21)).unwrap();
    assert_eq!(
        closures::call(&foo, &[foo.clone(), MValue::Int(21)]).unwrap(),
        CallOutcome::Value(MValue::Int(42))
    );
    assert_eq!(closures::unsafe_procedure_arity(&foo).unwrap(), 1);
    assert_eq!(closures::host_procedure_arity(&foo).unwrap(), 2);
}

#[test]
fn acceptance_09_validation() {
    let registry = register_languages();
    let lang = registry.get("exprs-lang-v7").unwrap();
    let bare = read(&format!("(+ {} 0)", MAX64)).unwrap();
    let module = read(&format!("(module (call + {} 0))", MAX64)).unwrap();
    let accepted = read(&format!("(module (call + {} 0))", MAX61)).unwrap();
    assert!(!lang.validates(&bare).unwrap());
    assert!(!lang.validates(&module).unwrap());
    assert!(lang.validates(&accepted).unwrap());

    assert_eq!(
        lang.run_checked(&accepted).unwrap(),
        MValue::Int(1152921504606846975)
    );
    assert!(matches!(
        lang.run_checked(&bare),
        Err(RunError::InvalidProgram { .. })
    ));
    assert!(matches!(
        lang.run_checked(&module),
        Err(RunError::InvalidProgram { .. })
    ));

    // The same rejection through the CLI is exit code 2.
    let mut child = Command::new(env!("CARGO_BIN_EXE_ilvm"))
        .args(["run", "--lang", "exprs-lang-v7", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(format!("(+ {} 0)", MAX64).as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn acceptance_10_property_suite() {
    check_sexpr_roundtrip(1, 10_000);
    check_wrap_agreement(2, 100_000);
    check_oracle_equivalence(3, 1_000);
    check_flags_trichotomy(4, 10_000);
    check_frame_invariants(5, 100);
}
