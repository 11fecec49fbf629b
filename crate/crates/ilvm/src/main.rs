//! Batch command-line front end for the language registry: validate and
//! run program files in a named language, with trace and state-dump
//! output for debugging failing compiler passes.
//!
//! Exit codes partition run outcomes: 0 for a value, 2 for a program
//! outside the language's grammar, 3 for a runtime fault, 4 for a result
//! outside the language's result class, and 1 for usage, IO, or reader
//! errors. Standard output carries only the value (or the record in
//! `--output-format=records`); every diagnostic goes to standard error.

use std::fs;
use std::io::Read;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use ilvm_core::base::{Instr, TraceFn};
use ilvm_core::machine::{MachineState, Register};
use ilvm_core::registry::{register_languages, LanguageDef, Registry, RunError};
use ilvm_core::sexpr::{read, SExpr};

#[derive(Parser)]
#[command(
    name = "ilvm",
    version,
    about = "Validate and run programs in a family of compiler intermediate languages"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program file and print its value
    Run(RunArgs),
    /// Check a program file against a language's grammar
    Validate(ValidateArgs),
    /// List the registered language names, one per line
    ListLangs,
}

#[derive(Args)]
struct RunArgs {
    /// Language to run the program in (defaults to $ILVM_LANG)
    #[arg(long, env = "ILVM_LANG")]
    lang: String,
    /// Program file, or `-` for standard input
    input: String,
    /// Stream the executor trace to standard error
    #[arg(long)]
    trace: bool,
    /// Print the machine-state dump to standard error after halt or fault
    #[arg(long)]
    dump_state: bool,
    /// Skip grammar validation and the result-class check
    #[arg(long)]
    no_checked: bool,
    /// How to render the outcome on standard output
    #[arg(long, value_enum, default_value_t = OutputFormat::Plain)]
    output_format: OutputFormat,
}

#[derive(Args)]
struct ValidateArgs {
    /// Language whose grammar to check against (defaults to $ILVM_LANG)
    #[arg(long, env = "ILVM_LANG")]
    lang: String,
    /// Program file, or `-` for standard input
    input: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// The bare value
    Plain,
    /// A single `(result ...)` or `(error ...)` s-expression record
    Records,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let registry = register_languages();
    let code = match cli.command {
        Command::Run(args) => cmd_run(&registry, &args),
        Command::Validate(args) => cmd_validate(&registry, &args),
        Command::ListLangs => {
            for name in registry.names() {
                println!("{}", name);
            }
            0
        }
    };
    ExitCode::from(code)
}

/// Print a diagnostic the way every other ilvm error is printed.
fn fail(message: impl std::fmt::Display) -> u8 {
    eprintln!("ilvm: error: {}", message);
    1
}

fn lookup<'r>(registry: &'r Registry, name: &str) -> Result<&'r LanguageDef, u8> {
    registry
        .get(name)
        .ok_or_else(|| fail(format_args!("unknown language: {} (see `ilvm list-langs`)", name)))
}

/// Read one program from a file or standard input.
fn load_program(input: &str) -> Result<SExpr, u8> {
    let text = if input == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| fail(format_args!("standard input: {}", e)))?;
        text
    } else {
        fs::read_to_string(input).map_err(|e| fail(format_args!("{}: {}", input, e)))?
    };
    read(&text).map_err(|e| fail(format_args!("{}: {}", input, e)))
}

fn cmd_validate(registry: &Registry, args: &ValidateArgs) -> u8 {
    let (lang, program) = match lookup(registry, &args.lang)
        .and_then(|lang| Ok((lang, load_program(&args.input)?)))
    {
        Ok(found) => found,
        Err(code) => return code,
    };
    match lang.validates(&program) {
        Ok(true) => 0,
        Ok(false) => {
            println!("invalid: {}", program);
            2
        }
        Err(e) => {
            eprintln!("ilvm: {}: {}", lang.name(), e);
            3
        }
    }
}

fn cmd_run(registry: &Registry, args: &RunArgs) -> u8 {
    let (lang, program) = match lookup(registry, &args.lang)
        .and_then(|lang| Ok((lang, load_program(&args.input)?)))
    {
        Ok(found) => found,
        Err(code) => return code,
    };

    let mut state = MachineState::fresh_state();
    let mut sink = |pc: usize, instr: &Instr, state: &MachineState| {
        eprintln!("[{}] {} ; rax = {}", pc, instr, state.reg_get(Register::Rax));
    };
    let trace: Option<&mut TraceFn> = if args.trace { Some(&mut sink) } else { None };

    let outcome = if args.no_checked {
        lang.interp_on(&program, &mut state, trace)
            .map_err(RunError::RuntimeFault)
    } else {
        lang.run_checked_on(&program, &mut state, trace)
    };
    if args.dump_state {
        eprint!("{}", state.dump());
    }

    match outcome {
        Ok(value) => {
            match args.output_format {
                OutputFormat::Plain => println!("{}", value),
                OutputFormat::Records => println!("(result {})", value),
            }
            0
        }
        Err(e) => {
            eprintln!("ilvm: {}: {}", lang.name(), e);
            if args.output_format == OutputFormat::Records {
                println!("{}", error_record(&e));
            }
            match e {
                RunError::InvalidProgram { .. } => 2,
                RunError::RuntimeFault(_) => 3,
                RunError::BadResult { .. } => 4,
            }
        }
    }
}

/// Render a run error as a single `(error <class> <payload>)` record:
/// the offending term for invalid programs, a quoted message otherwise.
fn error_record(e: &RunError) -> String {
    match e {
        RunError::InvalidProgram { term, .. } => format!("(error invalid-program {})", term),
        RunError::RuntimeFault(fault) => {
            format!("(error runtime-fault {})", quote(&fault.to_string()))
        }
        RunError::BadResult { .. } => format!("(error bad-result {})", quote(&e.to_string())),
    }
}

fn quote(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}
