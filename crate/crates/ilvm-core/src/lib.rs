//! Core machine model and interpreters for a family of compiler
//! intermediate languages, from a parenthesized x64 subset up to a
//! tagged-data expression language.
//!
//! The crate is organized as composable language features over one shared
//! machine model:
//!
//! - [`sexpr`]: the s-expression reader/printer every language shares.
//! - [`ints`]: fixed-width two's-complement arithmetic at any width.
//! - [`machine`]: registers, stack, memory, flags, and the halt latch.
//! - [`base`]: the base x64-subset executor (blocks, jumps, address modes)
//!   plus the straight-line reference interpreter used as a test oracle.
//! - [`frames`]: modules, abstract locations, frame variables, return points.
//! - [`closures`]: procedure records with arity and environment vectors.
//! - [`grammar`]: a BNF matcher over s-expressions for per-language validation.
//! - [`registry`]: named language definitions and checked interpreter wrappers.
//!
//! No IO lives here; the companion `ilvm` crate provides the CLI.

#![no_std]

extern crate alloc;

pub mod base;
pub mod closures;
pub mod frames;
pub mod grammar;
pub mod ints;
pub mod machine;
pub mod registry;
pub mod sexpr;
