//! Self-similar groups given by a wreath recursion.
//!
//! Conventions: the group acts on the right and reads words from the left,
//! `(xw)^g = x^g w^{g|_x}`. Products are written left to right, so `g·h`
//! acts as `g` first and then `h`, and `(gh)|_v = g|_v h|_{v^g}`.
//!
//! The defining file is assumed to describe a faithful action; nothing here
//! can check that.

mod group;
mod recursion;
mod table;
mod word_closure;

pub use group::{
    Element, GeneratorAutomaton, GoodGenerators, Group, Nucleus, Structure, DEFAULT_BALL_BUDGET,
    DEFAULT_MAX_ROUNDS, DEFAULT_STATE_CAP,
};
pub use recursion::{invert_word, reduce, Alphabet, GenSym, GeneratorDef, WreathRecursion};
pub use table::{ElemId, IDENTITY};
pub use word_closure::{formal_step, is_trivial, words_equal};
