//! Regular combinators for string-to-monoid functions.
//!
//! The crate provides a reference evaluator for combinator expressions, copyless
//! cost register automata, a compiler from expressions to machine cascades, and
//! extraction of expressions from machines.

pub mod ccra;
pub mod compile;
pub mod expr;
pub mod extract_comm;
pub mod extract_noncomm;
pub mod monoid;
pub mod relang;

use num_bigint::BigInt;

pub use ccra::{Acra, Cascade, Ccra, Stage, Update};
pub use compile::compile;
pub use expr::{eval_naive, FuncExpr, E};
pub use monoid::{Additive, Monoid, MonoidError, MonoidValue, Word};
pub use relang::{Alphabet, Dfa, Nfa, Re, Regex};

/// Arbitrary-precision integers under addition.
pub type Int = Additive<BigInt>;

pub type IntExpr = E<Int>;
pub type StrExpr = E<Word>;
pub type IntCcra = Ccra<Int>;
pub type StrCcra = Ccra<Word>;
pub type IntAcra = Acra<Int>;
