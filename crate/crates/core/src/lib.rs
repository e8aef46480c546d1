//! Expected-signature method of moments for parameter estimation in
//! rough differential equations.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops walk
// several parallel arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod drivers;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod picard;
pub mod reference;
pub mod poly;
pub mod signature;
pub mod simulate;
pub mod words;

pub use error::{Error, Result};
pub use poly::{CompiledPoly, Monomial, MultiPoly, Vars};
pub use signature::{
    chen_concat, path_signature, segment_signature, SampledPath, TruncatedSignature, WordSet,
    WordSignature,
};
pub use words::{enumerate_words, prefix_closure, shuffle, Word, WordMultiset};
pub use picard::{
    expected_lifted_signature, expected_response_signature, lift_to_word, picard_level1,
    picard_level1_anchored, Anchor, DriverExpectation, PicardExpansion, VectorField,
};
pub use drivers::{
    expected_sig_time_bm, ExpectedSignature, Provenance, SymbolicTimeBm,
};
